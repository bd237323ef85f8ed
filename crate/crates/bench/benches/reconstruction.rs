use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use userkit::lattice::{
    build_lattice_family, build_target_hamiltonian, target_a_from_hamiltonian, LatticeSpec,
};
use userkit::magnus::{time_ordered_evolve, EvolutionSpec};
use userkit::matrix::{
    eig_hermitian, expm_hermitian_i, random_gaussian, random_hermitian,
    random_hermitian_with_spectrum,
};
use userkit::sear::{
    estimate_noise_strength, generate_approx_unitaries, haar_twirl_set, SearConfig,
};
use userkit::user::{user_reconstruct, Observable, PureState, ReconstructionPlan};
use userkit::{CMatrix, Tolerances};

fn bench_eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_hermitian");
    let tol = Tolerances::default();
    for d in [4, 16, 64] {
        let h = random_hermitian(d, &mut ChaCha8Rng::seed_from_u64(d as u64));
        group.bench_with_input(BenchmarkId::from_parameter(d), &h, |b, h| {
            b.iter(|| eig_hermitian(black_box(h), &tol).unwrap())
        });
    }
    group.finish();
}

fn bench_reconstruct(c: &mut Criterion) {
    let mut group = c.benchmark_group("user_reconstruct");
    let tol = Tolerances::default();
    for d in [2, 8, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spectrum: Vec<f64> = (0..d)
            .map(|j| -0.9 + 1.8 * j as f64 / (d - 1) as f64)
            .collect();
        let gap = 1.8 / (d - 1) as f64;
        let a = random_hermitian_with_spectrum(&spectrum, &mut rng);
        let psi =
            PureState::normalized(random_gaussian(d, 1, &mut rng).column(0).into_owned()).unwrap();
        let obs = Observable::new(random_hermitian(d, &mut rng), &tol).unwrap();
        let u_sd = expm_hermitian_i(&a, 0.2 * PI).unwrap();
        let plan = ReconstructionPlan::from_gap(gap, 0.2, 10.0).unwrap();
        group.bench_function(BenchmarkId::new("d", d), |b| {
            b.iter(|| user_reconstruct(&psi, &obs, black_box(&u_sd), &plan, &tol).unwrap())
        });
    }
    group.finish();
}

fn bench_noise_strength(c: &mut Criterion) {
    let d = 16;
    let spec = LatticeSpec::with_sites(d);
    let fam = build_lattice_family(&spec).unwrap();
    let h = build_target_hamiltonian(&spec).unwrap();
    let a = target_a_from_hamiltonian(&h, 2.5).unwrap().a;
    let cfg = SearConfig {
        perturbation: 1e-2,
        ..SearConfig::default()
    };
    let list: Vec<CMatrix> = generate_approx_unitaries(&fam, &a, &cfg)
        .unwrap()
        .into_iter()
        .map(|m| m.intermediate)
        .collect();
    let set = haar_twirl_set(d, 100, 0);
    let psi = userkit::lattice::gaussian_wavepacket(&spec, -2.0, 1.5, 0.5).unwrap();
    let obs = userkit::lattice::position_observable(&spec).unwrap();
    c.bench_function("estimate_noise_strength/N16_nt100", |b| {
        b.iter(|| estimate_noise_strength(black_box(&list), &set, &psi, &obs).unwrap())
    });
    c.bench_function("time_ordered_evolve/N16_512", |b| {
        let s = EvolutionSpec::new(2.0 * PI, 1.0, 512).unwrap();
        b.iter(|| time_ordered_evolve(&fam, black_box(&s)).unwrap())
    });
}

criterion_group!(benches, bench_eig, bench_reconstruct, bench_noise_strength);
criterion_main!(benches);
