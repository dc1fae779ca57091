use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use chemoflow::ctrw::{self, BoundaryMode, ParticleEnsemble, Sensitivity, SlimeProfile, WaitingLaw};
use chemoflow::fracops::{l1_memory, FracHistory};
use chemoflow::ns_fluid::{linear_potential, step_fluid, FluidParams, FluidState};
use chemoflow::specfun::{mittag_leffler, EvalPolicy};
use chemoflow::{ChiModel, Grid2D, KsParams, KsSolver, KsState, ScalarBc, ScalarField, VectorField};

fn bump(grid: Grid2D) -> ScalarField {
    ScalarField::from_fn(grid, ScalarBc::Neumann0, |x, y| 1.0 + (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.02).exp())
}

fn specfun(c: &mut Criterion) {
    let policy = EvalPolicy::default();
    for z in [-0.5, -8.0, -40.0, 3.0] {
        c.bench_function(&format!("mittag_leffler(0.6, 1, {z})"), |b| {
            b.iter(|| mittag_leffler(black_box(0.6), 1.0, black_box(z), &policy).unwrap())
        });
    }
}

fn l1(c: &mut Criterion) {
    let width = 64 * 64;
    let mut h = FracHistory::new(vec![1.0; width], 0.0, 1e-3).unwrap();
    for k in 1..500 {
        h.push(vec![1.0 / (1.0 + k as f64); width]).unwrap();
    }
    c.bench_function("l1_memory 64x64, 500 levels", |b| b.iter(|| l1_memory(black_box(&h), 0.7).unwrap()));
}

fn ks_step(c: &mut Criterion) {
    let grid = Grid2D::unit_square(64).unwrap();
    let solver = KsSolver::new(KsParams::new(0.7, 1.0, ChiModel::Unit).unwrap(), grid).unwrap();
    let u = VectorField::zeros(grid);
    let mut state = KsState::new(bump(grid), ScalarField::constant(grid, ScalarBc::Neumann0, 0.5), 1e-4).unwrap();
    for _ in 0..20 {
        solver.step(&mut state, &u).unwrap();
    }
    c.bench_function("ks step 64x64 after 20 levels", |b| {
        b.iter_batched(|| state.clone(), |mut s| solver.step(&mut s, &u).unwrap(), BatchSize::LargeInput)
    });
}

fn fluid_step(c: &mut Criterion) {
    let grid = Grid2D::unit_square(64).unwrap();
    let n = bump(grid);
    let params = FluidParams::default();
    let state = FluidState::at_rest(linear_potential(grid));
    c.bench_function("fluid step 64x64", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| step_fluid(&mut s, &n, 1e-3, &params).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn ctrw_evolve(c: &mut Criterion) {
    let sites = 200;
    let dx = 1.0 / sites as f64;
    let law = WaitingLaw::for_diffusivity(0.6, dx, 0.01).unwrap();
    let slime: Vec<f64> = (0..sites).map(|i| 1.0 + (i as f64 + 0.5) * dx).collect();
    let profile = SlimeProfile::new(slime, Sensitivity::Exponential { beta: 2.0 }).unwrap();
    let start = vec![sites / 2; 20_000];
    c.bench_function("ctrw evolve 20k walkers to t = 0.1", |b| {
        b.iter_batched(
            || ParticleEnsemble::new(start.clone(), &law, 7, 8).unwrap(),
            |mut e| ctrw::evolve(&mut e, &law, &profile, BoundaryMode::Reflecting, 0.1).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = specfun, l1, ks_step, fluid_step, ctrw_evolve
}
criterion_main!(benches);
