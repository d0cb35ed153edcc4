use std::f64::consts::PI;
use std::sync::Arc;

use ewlab_core::kernels::{HeatSemigroupPlan, Symbol};
use ewlab_core::noise::{CouplingWindow, NoiseSource, StreamId};
use ewlab_core::solver::*;
use ewlab_core::{bump_mollifier, covariance_of, CovarianceKernel, Error, Lattice, SpectralPlan, Tolerances};

fn setup(n: usize, h: f64, r0: f64, dt: f64) -> (Arc<NoiseSource>, CovarianceKernel) {
    let lat = Lattice::new(3, n, h).unwrap();
    let plan = Arc::new(SpectralPlan::new(&lat));
    let phi = bump_mollifier(&plan, r0).unwrap();
    let r = covariance_of(&plan, &phi, &Tolerances::default()).unwrap();
    (Arc::new(NoiseSource::new(plan, Arc::new(phi), 99, dt).unwrap()), r)
}

fn linear() -> Sigma {
    Sigma::new(SigmaSpec::Linear).unwrap()
}

#[test]
fn sigma_lipschitz_constants_are_verified() {
    for spec in [
        SigmaSpec::Linear,
        SigmaSpec::Sine,
        SigmaSpec::Affine { a: 0.5, b: -2.0 },
        SigmaSpec::ShiftedSigmoid { center: 1.0, amplitude: 2.0, slope: 3.0 },
    ] {
        let s = Sigma::new(spec).unwrap();
        assert!(s.lipschitz() > 0.0);
    }
    assert!((SigmaSpec::ShiftedSigmoid { center: 0.0, amplitude: 2.0, slope: 3.0 }.lipschitz_constant() - 1.5).abs() < 1e-15);
}

#[test]
fn beta_zero_keeps_constants_bitwise_in_both_schemes() {
    let dt = 0.25f64.powi(2) / 12.0;
    let (src, _) = setup(16, 0.25, 0.5, dt);
    for scheme in [Scheme::SpectralExponential, Scheme::ExplicitFd] {
        let mut cfg = SolverConfig::new(scheme, dt, 0.0, 40.0 * dt);
        cfg.initial = InitialData::Constant(1.0);
        let mut s = Solver::new(cfg, linear(), src.clone()).unwrap();
        let (f, probe) = s.run(StreamId::default(), &ProbeSpec::every(vec![0, 17], 10, 40)).unwrap();
        assert!(f.values.iter().all(|v| *v == 1.0));
        assert!(probe.values.iter().flatten().all(|v| *v == 1.0));
        assert_eq!(probe.times.len(), 5);
    }
}

#[test]
fn explicit_scheme_decays_a_fourier_mode_by_the_discrete_factor() {
    let h = 0.5;
    let dt = h * h / 12.0;
    let (src, _) = setup(16, h, 1.0, dt);
    let lat = src.lattice().clone();
    let k = 2.0 * PI * 2.0 / lat.period();
    let f: Vec<f64> = (0..lat.cell_count()).map(|i| (k * lat.position(i)[1]).cos()).collect();
    let mut cfg = SolverConfig::new(Scheme::ExplicitFd, dt, 0.0, dt);
    cfg.initial = InitialData::Perturbed { lambda: 0.0, f: Arc::new(f.clone()) };
    let mut s = Solver::new(cfg, linear(), src).unwrap();
    let mut st = s.initial_state(0).unwrap();
    s.advance(&mut st, StreamId::default(), 3).unwrap();
    let factor = (1.0 - dt * (2.0 / (h * h)) * (1.0 - (h * k).cos())).powi(3);
    for (a, b) in st.values.iter().zip(&f) {
        assert!((a - factor * b).abs() < 1e-13);
    }
}

#[test]
fn explicit_scheme_stability_bound_is_enforced() {
    let h = 0.5;
    let (src, _) = setup(16, h, 1.0, h * h / 5.0);
    let cfg = SolverConfig::new(Scheme::ExplicitFd, h * h / 5.0, 0.1, 1.0 * h * h / 5.0);
    assert!(matches!(Solver::new(cfg, linear(), src), Err(Error::SchemeStability { .. })));
}

#[test]
fn one_step_variance_matches_the_gaussian_oracle() {
    let dt = 0.01;
    let beta = 0.5;
    let (src, r) = setup(16, 0.25, 0.5, dt);
    let cfg = SolverConfig::new(Scheme::SpectralExponential, dt, beta, dt);
    let mut s = Solver::new(cfg, linear(), src.clone()).unwrap();
    let mut xs = Vec::new();
    for rep in 0..10_000u64 {
        let mut st = s.initial_state(0).unwrap();
        s.step_stream(&mut st, StreamId::new(5, rep, 0)).unwrap();
        xs.push(st.values[(rep as usize * 37) % st.values.len()]);
    }
    // u+ = S_dt[1 + beta dW]; Var = beta^2 dt (S_dt^2 R)(0)
    let plan = HeatSemigroupPlan::new(src.plan().clone(), Symbol::Continuum, 2.0 * dt).unwrap();
    let oracle = beta * beta * dt * plan.apply(&r.values).unwrap()[0];
    assert!((oracle / (beta * beta * dt * r.at_origin()) - 1.0).abs() < 0.5);
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - 1.0).powi(2)).collect();
    let v = sq.iter().sum::<f64>() / n;
    let se = (sq.iter().map(|x| (x - v).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((v - oracle).abs() < 3.0 * se, "{v} vs {oracle} ({se})");
    assert!((m - 1.0).abs() < 3.0 * (v / n).sqrt());
}

fn scheme_gap(src: &Arc<NoiseSource>, dt: f64) -> f64 {
    let run = |scheme| {
        let mut cfg = SolverConfig::new(scheme, dt, 0.1, 0.5);
        cfg.symbol = Symbol::Discrete;
        let mut s = Solver::new(cfg, linear(), src.clone()).unwrap();
        s.run(StreamId::new(1, 0, 0), &ProbeSpec::default()).unwrap().0
    };
    let a = run(Scheme::SpectralExponential);
    let b = run(Scheme::ExplicitFd);
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn schemes_agree_on_a_shared_noise_path_and_converge_in_dt() {
    let h = 0.5;
    let dt = h * h / 12.0;
    let (fine, _) = setup(16, h, 1.0, dt / 2.0);
    let coarse = Arc::new(
        NoiseSource::new(fine.plan().clone(), fine.mollifier().clone(), fine.master_seed(), dt)
            .unwrap()
            .with_substeps(2)
            .unwrap(),
    );
    let g1 = scheme_gap(&coarse, dt);
    let g2 = scheme_gap(&fine, dt / 2.0);
    assert!(g1 < 0.01, "gap {g1}");
    assert!(g2 < g1 && g2 > 0.0, "{g2} vs {g1}");
}

#[test]
fn substeps_sum_a_finer_path() {
    let (fine, _) = setup(16, 0.5, 1.0, 0.01);
    let coarse = NoiseSource::new(fine.plan().clone(), fine.mollifier().clone(), fine.master_seed(), 0.02)
        .unwrap()
        .with_substeps(2)
        .unwrap();
    let n = fine.lattice().cell_count();
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let s = StreamId::new(3, 3, 0);
    coarse.raw(s, -2, &mut a);
    fine.raw(s, -4, &mut b);
    fine.raw(s, -3, &mut c);
    for i in 0..n {
        assert_eq!(a[i], b[i] + c[i]);
    }
}

#[test]
fn large_beta_triggers_blow_up() {
    let dt = 0.5f64.powi(2) / 12.0;
    let (src, _) = setup(16, 0.5, 1.0, dt);
    let cfg = SolverConfig::new(Scheme::SpectralExponential, dt, 50.0, 2000.0 * dt);
    let mut s = Solver::new(cfg, linear(), src).unwrap();
    match s.run(StreamId::default(), &ProbeSpec::default()) {
        Err(Error::BlowUp { time }) => assert!(time > 0.0),
        other => panic!("expected blow-up, got {:?}", other.map(|r| r.0.time())),
    }
}

#[test]
fn shifted_and_coupled_runs() {
    let dt = 0.0625;
    let (src, _) = setup(16, 0.5, 1.0, dt);
    let cfg = SolverConfig::new(Scheme::SpectralExponential, dt, 0.2, 1.0);
    let mut s = Solver::new(cfg, linear(), src.clone()).unwrap();
    let base = StreamId::new(2, 1, 0);
    let z = s.run_shifted(0.0, base).unwrap();
    assert_eq!(z.time_index, 0);
    assert!(z.values.iter().all(|v| *v == 1.0));
    let (a, b) = s.run_coupled_pair(CouplingWindow::new(1.0, 1.0).unwrap(), base).unwrap();
    assert_eq!(a, b);
    let (a, b) = s.run_coupled_pair(CouplingWindow::new(2.0, 1.0).unwrap(), base).unwrap();
    assert_eq!(a.time_index, 0);
    assert_ne!(a.values, b.values);
    // the K2 path consumes the shared slices, i.e. matches a shifted start on that stream
    let shared = StreamId { window: CouplingWindow::SHARED, ..base };
    assert_eq!(s.run_shifted(1.0, shared).unwrap().values, b.values);
    let cfg0 = SolverConfig::new(Scheme::SpectralExponential, dt, 0.0, 1.0);
    let mut s0 = Solver::new(cfg0, linear(), src).unwrap();
    let (a, b) = s0.run_coupled_pair(CouplingWindow::new(2.0, 1.0).unwrap(), base).unwrap();
    assert!(a.values.iter().chain(&b.values).all(|v| *v == 1.0));
}

#[test]
fn response_probe_matches_the_one_step_expansion() {
    let dt = 0.5f64.powi(2) / 12.0;
    let beta = 0.3;
    let (src, _) = setup(16, 0.5, 1.0, dt);
    let lat = src.lattice().clone();
    let cfg = SolverConfig::new(Scheme::SpectralExponential, dt, beta, 1.0);
    let mut s = Solver::new(cfg.clone(), linear(), src.clone()).unwrap();
    let z = lat.index_of(&[1, -2, 0]);
    let stream = StreamId::new(4, 0, 0);
    let r = 6;
    let resp = s.noise_response_probe(stream, r, z, 1e-3, &[(r + 1, z)]).unwrap();
    // linear sigma with left-endpoint evaluation: response = beta S_dt[u(r) phi(. - z)](z)
    let mut state = s.initial_state(0).unwrap();
    s.advance(&mut state, stream, r).unwrap();
    let phi = src.mollifier();
    let shift = lat.coords(z);
    let bumped: Vec<f64> = (0..lat.cell_count())
        .map(|i| {
            let c: Vec<i64> = lat.coords(i).iter().zip(&shift).map(|(a, b)| a - b).collect();
            beta * state.values[i] * phi.values[lat.index_of(&c)]
        })
        .collect();
    let heat = HeatSemigroupPlan::new(src.plan().clone(), Symbol::Continuum, dt).unwrap();
    let oracle = heat.apply(&bumped).unwrap()[z];
    assert!(oracle > 0.0);
    assert!((resp.response[0] - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", resp.response[0]);

    let cfg0 = SolverConfig::new(Scheme::SpectralExponential, dt, 0.0, 1.0);
    let mut s0 = Solver::new(cfg0, linear(), src).unwrap();
    let resp0 = s0.noise_response_probe(stream, r, z, 1e-3, &[(r + 3, z), (r + 5, 0)]).unwrap();
    assert!(resp0.response.iter().all(|v| *v == 0.0));
}
