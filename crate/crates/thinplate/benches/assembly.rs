//! Assembly throughput: sequential vs. data-parallel element loops.
//!
//! Phase A (per-element matrices) is the embarrassingly parallel part of
//! assembly; phase B (scatter) stays sequential in both strategies so
//! results are bitwise identical. This bench measures the end-to-end
//! `assemble_with` call for both strategies on the two expensive forms:
//! the plate form on a dumbbell mesh and the ε-weighted pull-back form
//! on the channel reference strip. Run with `cargo bench`; under
//! `cargo test` criterion executes one untimed iteration per case.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use thinplate::femcore::{assemble_with, FormKind, Strategy};
use thinplate::meshgen::{build_channel_reference_mesh, build_dumbbell_mesh, DofMap, QuadMesh};
use thinplate::{DumbbellSpec, MaterialParams, ProfileKind, ProfileSpec};

fn cosine_profile() -> ProfileSpec {
    ProfileSpec::new(
        ProfileKind::CosineBump { a: 1.0, b: 0.5 },
        0.25,
    )
    .expect("valid profile")
}

fn strategies() -> Vec<(&'static str, Strategy)> {
    let mut v = vec![("sequential", Strategy::Sequential)];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Strategy::Parallel));
    }
    v
}

fn bench_case(c: &mut Criterion, group: &str, mesh: &QuadMesh, kind: &FormKind) {
    let dofs = DofMap::for_mesh(mesh);
    let mut g = c.benchmark_group(group);
    g.throughput(Throughput::Elements(mesh.n_elems() as u64));
    g.sample_size(20);
    for (name, strategy) in strategies() {
        g.bench_with_input(
            BenchmarkId::new(name, mesh.n_elems()),
            &strategy,
            |b, &strategy| {
                b.iter(|| assemble_with(mesh, &dofs, kind, strategy).expect("assembly"));
            },
        );
    }
    g.finish();
}

fn assembly_benches(c: &mut Criterion) {
    let params = MaterialParams::new(0.3, 1.0).expect("valid params");
    let profile = cosine_profile();

    let spec =
        DumbbellSpec::new(1.0, 1.0, profile.clone(), 0.25).expect("valid dumbbell geometry");
    let dumbbell = build_dumbbell_mesh(&spec, 0.04).expect("dumbbell mesh");
    bench_case(c, "plate_form_dumbbell", &dumbbell, &FormKind::PlateForm(params));

    let strip = build_channel_reference_mesh(192, 16, &profile).expect("reference strip");
    bench_case(
        c,
        "pullback_form_strip",
        &strip,
        &FormKind::ChannelEpsForm(params, 0.1, profile.clone()),
    );
    bench_case(c, "weighted_mass_strip", &strip, &FormKind::WeightedMass(profile));
}

criterion_group!(benches, assembly_benches);
criterion_main!(benches);
