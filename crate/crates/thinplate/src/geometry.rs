//! Dumbbell geometry: material parameters, channel profiles, and the
//! structural hypotheses a profile must satisfy.
//!
//! A dumbbell domain consists of two unit-height rectangular plates
//!
//! ```text
//!     Ω_L = (−l, 0) × (−1, 1),      Ω_R = (1, 1+r) × (−1, 1),
//! ```
//!
//! joined by the thin channel
//!
//! ```text
//!     R_ε = { (x,y) : 0 < x < 1,  0 < y < ε·g(x) },
//! ```
//!
//! where `g ∈ C²[0,1]` is a strictly positive profile and `ε > 0` a
//! thickness parameter small enough that the channel attaches strictly
//! inside the segments {0}×(−1,1) and {1}×(−1,1).
//!
//! The spectral splitting as ε → 0 relies on a mild structural hypothesis
//! on the profile near the junctions, checked by [`validate_profile`]:
//! `g` must be non-increasing on [0, δ] and non-decreasing on [1−δ, 1]
//! for some window half-width δ ∈ (0, 1/2). Monotonicity is deliberately
//! *non-strict* so that constant profiles qualify.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Number of sample points per unit length used by the dense positivity
/// and monotonicity scans. The monotonicity windows get at least this
/// many samples each regardless of their width.
const PROFILE_SAMPLES: usize = 2000;

/// The pair (σ, τ) parametrizing the plate form
/// `∫ (1−σ)|D²u|² + σ(Δu)² + τ|∇u|² + u²`.
///
/// σ plays the role of a Poisson ratio (the form is coercive on H² for
/// σ ∈ (−1,1)); τ ≥ 0 is a lateral tension adding a membrane term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub sigma: f64,
    pub tau: f64,
}

impl MaterialParams {
    /// Validated constructor: σ strictly inside (−1,1), τ ≥ 0, both finite.
    pub fn new(sigma: f64, tau: f64) -> Result<Self> {
        let p = Self { sigma, tau };
        p.validate()?;
        Ok(p)
    }

    /// Re-check the invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= -1.0 || self.sigma >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "sigma = {} must lie strictly in (-1, 1)",
                self.sigma
            )));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::InvalidParams(format!(
                "tau = {} must be finite and >= 0",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Closed-form channel profiles. Each kind evaluates g, g′ and g″
/// analytically; nothing in the suite ever differentiates numerically.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// g ≡ value.
    Constant { value: f64 },
    /// g(x) = Σ coeffs[i]·xⁱ (ascending powers).
    Polynomial { coeffs: Vec<f64> },
    /// g(x) = a + b·(1 − cos 2πx): a smooth bump, maximal at x = 1/2
    /// for b > 0. With b > 0 it *violates* the junction monotonicity
    /// hypothesis (g is increasing right at x = 0), which makes it the
    /// standard negative test case.
    CosineBump { a: f64, b: f64 },
}

/// A channel profile together with the monotonicity window half-width δ
/// used by [`validate_profile`].
///
/// The JSON shape is flat — `{"kind": "constant", "value": 1.0}`,
/// `{"kind": "polynomial", "coeffs": [...]}`, `{"kind": "cosine_bump",
/// "a": ..., "b": ...}` — with an optional `delta`. Unknown keys and
/// fields that do not belong to the stated kind are rejected by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpecWire", into = "ProfileSpecWire")]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    /// Monotonicity window half-width, in (0, 1/2). Default 0.25.
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.25
}

/// Flat serialization shape for [`ProfileSpec`]. A hand-rolled bridge:
/// serde cannot combine `deny_unknown_fields` with `flatten`, and this
/// also lets us reject fields that exist but belong to a different kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpecWire {
    kind: ProfileKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default = "default_delta")]
    delta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProfileKindTag {
    Constant,
    Polynomial,
    CosineBump,
}

impl TryFrom<ProfileSpecWire> for ProfileSpec {
    type Error = String;

    fn try_from(w: ProfileSpecWire) -> std::result::Result<Self, String> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| format!("profile kind `{:?}` requires field `{name}`", w.kind))
        };
        let forbid = |name: &str, absent: bool| {
            if absent {
                Ok(())
            } else {
                Err(format!(
                    "field `{name}` does not belong to profile kind `{:?}`",
                    w.kind
                ))
            }
        };
        let kind = match w.kind {
            ProfileKindTag::Constant => {
                forbid("coeffs", w.coeffs.is_none())?;
                forbid("a", w.a.is_none())?;
                forbid("b", w.b.is_none())?;
                ProfileKind::Constant {
                    value: need("value", w.value)?,
                }
            }
            ProfileKindTag::Polynomial => {
                forbid("value", w.value.is_none())?;
                forbid("a", w.a.is_none())?;
                forbid("b", w.b.is_none())?;
                ProfileKind::Polynomial {
                    coeffs: w
                        .coeffs
                        .ok_or("profile kind `Polynomial` requires field `coeffs`")?,
                }
            }
            ProfileKindTag::CosineBump => {
                forbid("value", w.value.is_none())?;
                forbid("coeffs", w.coeffs.is_none())?;
                ProfileKind::CosineBump {
                    a: need("a", w.a)?,
                    b: need("b", w.b)?,
                }
            }
        };
        let spec = ProfileSpec {
            kind,
            delta: w.delta,
        };
        spec.validate_shape().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<ProfileSpec> for ProfileSpecWire {
    fn from(p: ProfileSpec) -> Self {
        let mut w = ProfileSpecWire {
            kind: ProfileKindTag::Constant,
            value: None,
            coeffs: None,
            a: None,
            b: None,
            delta: p.delta,
        };
        match p.kind {
            ProfileKind::Constant { value } => {
                w.kind = ProfileKindTag::Constant;
                w.value = Some(value);
            }
            ProfileKind::Polynomial { coeffs } => {
                w.kind = ProfileKindTag::Polynomial;
                w.coeffs = Some(coeffs);
            }
            ProfileKind::CosineBump { a, b } => {
                w.kind = ProfileKindTag::CosineBump;
                w.a = Some(a);
                w.b = Some(b);
            }
        }
        w
    }
}

impl ProfileSpec {
    pub fn new(kind: ProfileKind, delta: f64) -> Result<Self> {
        let p = Self { kind, delta };
        p.validate_shape()?;
        Ok(p)
    }

    /// Constant profile with the default window.
    pub fn constant(value: f64) -> Self {
        Self {
            kind: ProfileKind::Constant { value },
            delta: default_delta(),
        }
    }

    /// Structural validity of the description itself (not positivity).
    pub fn validate_shape(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidParams(format!(
                "delta = {} must lie in (0, 1/2)",
                self.delta
            )));
        }
        let finite = match &self.kind {
            ProfileKind::Constant { value } => value.is_finite(),
            ProfileKind::Polynomial { coeffs } => {
                !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite())
            }
            ProfileKind::CosineBump { a, b } => a.is_finite() && b.is_finite(),
        };
        if !finite {
            return Err(Error::InvalidParams(
                "profile coefficients must be finite (and non-empty for polynomials)".into(),
            ));
        }
        Ok(())
    }

    /// g(x).
    pub fn g(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant { value } => *value,
            ProfileKind::Polynomial { coeffs } => horner(coeffs, x),
            ProfileKind::CosineBump { a, b } => {
                a + b * (1.0 - (2.0 * std::f64::consts::PI * x).cos())
            }
        }
    }

    /// g′(x).
    pub fn dg(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant { .. } => 0.0,
            ProfileKind::Polynomial { coeffs } => horner_derivative(coeffs, x),
            ProfileKind::CosineBump { a: _, b } => {
                let w = 2.0 * std::f64::consts::PI;
                b * w * (w * x).sin()
            }
        }
    }

    /// g″(x).
    pub fn ddg(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant { .. } => 0.0,
            ProfileKind::Polynomial { coeffs } => horner_second_derivative(coeffs, x),
            ProfileKind::CosineBump { a: _, b } => {
                let w = 2.0 * std::f64::consts::PI;
                b * w * w * (w * x).cos()
            }
        }
    }

    /// Is this a constant profile? Returns the constant if so.
    pub fn as_constant(&self) -> Option<f64> {
        match &self.kind {
            ProfileKind::Constant { value } => Some(*value),
            _ => None,
        }
    }

    /// Maximum of g over a dense sample of [0,1] (endpoints included).
    pub fn max_g_sampled(&self) -> f64 {
        sample_grid()
            .map(|x| self.g(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum of g over the same dense sample, with its location.
    pub fn min_g_sampled(&self) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for x in sample_grid() {
            let v = self.g(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }
}

/// Evaluate Σ c[i]·xⁱ by Horner's rule.
fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * x + c * i as f64)
}

fn horner_second_derivative(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(2)
        .rev()
        .fold(0.0, |acc, (i, &c)| acc * x + c * (i * (i - 1)) as f64)
}

fn sample_grid() -> impl Iterator<Item = f64> {
    (0..=PROFILE_SAMPLES).map(|i| i as f64 / PROFILE_SAMPLES as f64)
}

/// A dumbbell domain: Ω_L ∪ R_ε ∪ Ω_R (see module docs for coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumbbellSpec {
    /// Width l > 0 of the left plate (−l,0)×(−1,1).
    pub left_len: f64,
    /// Width r > 0 of the right plate (1,1+r)×(−1,1).
    pub right_len: f64,
    pub profile: ProfileSpec,
    /// Channel thickness parameter ε > 0 with ε·max g < 1.
    pub epsilon: f64,
}

impl DumbbellSpec {
    pub fn new(left_len: f64, right_len: f64, profile: ProfileSpec, epsilon: f64) -> Result<Self> {
        let s = Self {
            left_len,
            right_len,
            profile,
            epsilon,
        };
        s.validate()?;
        Ok(s)
    }

    /// Re-check all invariants (used after deserialization and by the
    /// sweep drivers, which rebuild specs per ε).
    pub fn validate(&self) -> Result<()> {
        self.profile.validate_shape()?;
        if !(self.left_len > 0.0 && self.left_len.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "left_len = {} must be finite and > 0",
                self.left_len
            )));
        }
        if !(self.right_len > 0.0 && self.right_len.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "right_len = {} must be finite and > 0",
                self.right_len
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon {
                epsilon: self.epsilon,
            });
        }
        let (x_min, g_min) = self.profile.min_g_sampled();
        if g_min <= 0.0 {
            return Err(Error::NonPositiveProfile { x: x_min, g: g_min });
        }
        // The channel top must stay strictly inside the attachment segments
        // {0}×(−1,1), {1}×(−1,1): ε·max g < 1.
        let top = self.epsilon * self.profile.max_g_sampled();
        if top >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "epsilon * max g = {top} must be < 1 so the channel attaches inside the plates"
            )));
        }
        Ok(())
    }

    /// The same dumbbell at a different channel thickness. Fails if the
    /// new ε violates ε·max g < 1.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.left_len, self.right_len, self.profile.clone(), epsilon)
    }

    /// Analytic area of Ω_ε: 2l + 2r + ε∫₀¹g. The integral is evaluated
    /// in closed form per profile kind.
    pub fn area(&self) -> f64 {
        2.0 * self.left_len + 2.0 * self.right_len + self.epsilon * profile_integral(&self.profile)
    }
}

/// ∫₀¹ g(x) dx in closed form.
pub fn profile_integral(profile: &ProfileSpec) -> f64 {
    match &profile.kind {
        ProfileKind::Constant { value } => *value,
        ProfileKind::Polynomial { coeffs } => coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c / (i as f64 + 1.0))
            .sum(),
        // ∫₀¹ a + b(1 − cos 2πx) dx = a + b (the cosine integrates to 0).
        ProfileKind::CosineBump { a, b } => a + b,
    }
}

/// Result of the junction-monotonicity and positivity scan.
#[derive(Debug, Clone, Serialize)]
pub struct MpReport {
    /// True iff no violations were found.
    pub holds: bool,
    /// The window half-width that was checked.
    pub delta_used: f64,
    /// Sample points (x, g′(x)) where monotonicity fails: g′ > 0 on the
    /// left window [0, δ] or g′ < 0 on the right window [1−δ, 1].
    pub violations: Vec<(f64, f64)>,
}

/// Check the structural hypothesis on a profile: g > 0 on all of [0,1]
/// (dense sample including endpoints), g non-increasing on [0, δ] and
/// non-decreasing on [1−δ, 1], each window sampled at ≥ 1000 points.
///
/// Positivity failure is an error ([`Error::NonPositiveProfile`]);
/// monotonicity failure is a *finding*, reported via `holds = false`
/// with the offending samples listed.
pub fn validate_profile(profile: &ProfileSpec) -> Result<MpReport> {
    profile.validate_shape()?;
    let (x_min, g_min) = profile.min_g_sampled();
    if g_min <= 0.0 {
        return Err(Error::NonPositiveProfile { x: x_min, g: g_min });
    }

    let delta = profile.delta;
    let n = PROFILE_SAMPLES; // per window, well above the required 1000
    let mut violations = Vec::new();
    // Left window [0, δ]: non-increasing, so g′ ≤ 0. Scanned in full
    // before the right window so reports read in x order.
    for i in 0..=n {
        let xl = delta * (i as f64 / n as f64);
        let dl = profile.dg(xl);
        if dl > 0.0 {
            violations.push((xl, dl));
        }
    }
    // Right window [1−δ, 1]: non-decreasing, so g′ ≥ 0.
    for i in 0..=n {
        let xr = 1.0 - delta + delta * (i as f64 / n as f64);
        let dr = profile.dg(xr);
        if dr < 0.0 {
            violations.push((xr, dr));
        }
    }
    // Keep the report readable: the first few violations identify the
    // offending region; thousands of near-identical samples do not.
    const MAX_REPORTED: usize = 16;
    let holds = violations.is_empty();
    violations.truncate(MAX_REPORTED);
    Ok(MpReport {
        holds,
        delta_used: delta,
        violations,
    })
}

/// The channel height ε·g(x).
pub fn channel_height(profile: &ProfileSpec, epsilon: f64, x: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon { epsilon });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { x });
    }
    Ok(epsilon * profile.g(x))
}
