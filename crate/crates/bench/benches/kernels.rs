use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use ewlab_core::noise::{NoiseSource, StreamId};
use ewlab_core::solver::{Scheme, Sigma, SigmaSpec, Solver, SolverConfig};
use ewlab_core::{bump_mollifier, Lattice, SpectralPlan};

fn setup(side: usize) -> (Lattice, Arc<SpectralPlan>, Arc<NoiseSource>) {
    let lat = Lattice::new(3, side, 0.25).unwrap();
    let plan = Arc::new(SpectralPlan::new(&lat));
    let phi = Arc::new(bump_mollifier(&plan, 0.5).unwrap());
    let dt = 0.25 * 0.25 / 12.0;
    let source = Arc::new(NoiseSource::new(plan.clone(), phi, 7, dt).unwrap());
    (lat, plan, source)
}

fn transforms(c: &mut Criterion) {
    let (lat, plan, _) = setup(64);
    let mut ws = plan.workspace();
    let mut field: Vec<f64> = (0..lat.cell_count()).map(|i| (i % 17) as f64).collect();
    c.bench_function("fft_roundtrip_64", |b| {
        b.iter(|| {
            plan.forward(&field, &mut ws).unwrap();
            plan.inverse(&mut ws, &mut field).unwrap();
            black_box(field[0])
        })
    });
}

fn noise(c: &mut Criterion) {
    let (lat, plan, source) = setup(64);
    let mut ws = plan.workspace();
    let mut out = vec![0.0; lat.cell_count()];
    let stream = StreamId::new(1, 0, 0);
    let mut t = 0;
    c.bench_function("raw_slice_64", |b| {
        b.iter(|| {
            t += 1;
            source.raw(stream, t, &mut out);
            black_box(out[0])
        })
    });
    c.bench_function("smoothed_slice_64", |b| {
        b.iter(|| {
            t += 1;
            source.fill(stream, t, &mut out, &mut ws).unwrap();
            black_box(out[0])
        })
    });
}

fn stepping(c: &mut Criterion) {
    let (_, _, source) = setup(64);
    let dt = source.dt();
    for scheme in [Scheme::SpectralExponential, Scheme::ExplicitFd] {
        let cfg = SolverConfig::new(scheme, dt, 0.1, 1.0);
        let mut solver = Solver::new(cfg, Sigma::new(SigmaSpec::Linear).unwrap(), source.clone()).unwrap();
        let mut state = solver.initial_state(0).unwrap();
        let stream = StreamId::new(2, 0, 0);
        c.bench_function(&format!("step_64_{scheme:?}"), |b| {
            b.iter(|| {
                solver.step_stream(&mut state, stream).unwrap();
                black_box(state.values[0])
            })
        });
    }
}

criterion_group!(benches, transforms, noise, stepping);
criterion_main!(benches);
