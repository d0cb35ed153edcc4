use ewlab_core::noise::{CouplingWindow, StreamId};
use ewlab_core::solver::{ProbeSpec, Scheme, Solver};
use ewlab_core::stats::fluctuation::FluctuationFunctional;
use ewlab_core::stats::gamma::{gamma_from_replicas, pair_distance, MIN_PAIRS};
use ewlab_core::stats::sigma_g::TestFunction;
use ewlab_core::{Check, ExperimentReport};

use super::{ids, require, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, ExactnessSection, Model};
use crate::error::CliError;
use crate::output::Output;

/// The `beta = 0` runs: constants stay constant, so every statistic is trivially zero.
pub struct Exactness {
    big: Setup,
    big_model: Model,
    small: Setup,
    small_model: Model,
    sec: ExactnessSection,
}

impl Exactness {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.exactness.clone();
        let big_model = cfg.model(sec.grid, sec.dt, Some(0.0));
        let small_model = cfg.model(sec.small_grid, sec.dt, Some(0.0));
        require(sec.pairs >= MIN_PAIRS, || format!("exactness.pairs must be at least {MIN_PAIRS}"))?;
        require(sec.eps > 0.0 && sec.eps <= 1.0, || "exactness.eps must lie in (0, 1]".into())?;
        steps("exactness.horizon", sec.horizon, big_model.dt)?;
        steps("exactness.horizon", sec.horizon, small_model.dt)?;
        CouplingWindow::new(sec.k1, sec.k2)?.steps(small_model.dt)?;
        let big = Setup::new(big_model.geometry, &cfg.tolerances)?;
        let small = Setup::new(small_model.geometry, &cfg.tolerances)?;
        Ok(Self {
            big,
            big_model,
            small,
            small_model,
            sec,
        })
    }
}

fn all_one(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 1.0)
}

impl Experiment for Exactness {
    fn name(&self) -> &'static str {
        "exactness"
    }

    fn cost(&self) -> f64 {
        let big = 2.0 * self.sec.horizon / self.big_model.dt * self.big.cells();
        let pairs = self.sec.pairs as f64 * (self.sec.k1 + self.sec.k2) / self.small_model.dt;
        let small = (pairs + 3.0 * self.sec.horizon / self.small_model.dt) * self.small.cells();
        big + small
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let d = self.big.lattice.dim();
        let mut rep = ExperimentReport::new("exactness", d);
        let stream = StreamId::new(ids::EXACTNESS, 0, 0);
        let sites = vec![0, self.big.lattice.cell_count() / 2];
        for (scheme, label) in [(Scheme::SpectralExponential, "spectral"), (Scheme::ExplicitFd, "fd")] {
            let mut model = self.big_model;
            model.scheme = scheme;
            let source = self.big.source(ctx.seed, model.dt)?;
            let mut solver = Solver::new(model.solver_config(self.sec.horizon), sigma(model.sigma)?, source)?;
            let n = steps("horizon", self.sec.horizon, model.dt)?;
            let (field, probe) = solver.run(stream, &ProbeSpec::every(sites.clone(), 1, n))?;
            rep.checks.push(Check::flag(format!("{label}_bitwise"), all_one(&field.values)));
            rep.checks.push(Check::flag(
                format!("{label}_trajectory_bitwise"),
                probe.values.iter().all(|v| all_one(v)),
            ));
        }

        let m = self.small_model;
        let source = self.small.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let window = CouplingWindow::new(self.sec.k1, self.sec.k2)?;
        let cells: Vec<usize> = (0..self.small.lattice.cell_count()).collect();
        let per = ctx.pool.map_init(
            self.sec.pairs,
            || Solver::new(m.solver_config(m.dt), sig, source.clone()),
            |solver, i| {
                let (a, b) = solver.run_coupled_pair(window, StreamId::new(ids::EXACTNESS, 1 + i as u64, 0))?;
                Ok(pair_distance(&a, &b, &cells))
            },
        )?;
        let (gamma, _) = gamma_from_replicas(&per)?;
        rep.scalar("gamma", gamma);
        rep.checks.push(Check::within("gamma_zero", gamma, Some(0.0), Some(0.0)));

        // X_eps at the micro time `horizon`, i.e. macro time eps^2 horizon
        let g = TestFunction::Gaussian { width: 1.0 };
        let t_macro = self.sec.eps * self.sec.eps * self.sec.horizon;
        let functional = FluctuationFunctional::new(&self.small.lattice, self.sec.eps, t_macro, &g, 1.0, ctx.tol.g_tail)?;
        let mut solver = Solver::new(m.solver_config(self.sec.horizon), sig, source.clone())?;
        let (field, _) = solver.run(stream, &ProbeSpec::default())?;
        let x = functional.evaluate(&field)?;
        rep.scalar("x_eps", x);
        rep.checks.push(Check::within("x_eps_zero", x, Some(0.0), Some(0.0)));

        let bump = steps("horizon", self.sec.horizon, m.dt)? / 2;
        let targets: Vec<(i64, usize)> = (0..4).map(|k| (bump + 1 + k, self.small.lattice.axis_cell(0, k))).collect();
        let resp = solver.noise_response_probe(stream, bump, 0, 1e-3, &targets)?;
        let max = resp.response.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        rep.scalar("max_probe_response", max);
        rep.checks.push(Check::within("probe_zero", max, Some(0.0), Some(0.0)));
        Ok(Output::new(rep))
    }
}
