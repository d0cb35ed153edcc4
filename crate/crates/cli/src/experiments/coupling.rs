use ewlab_core::kernels::ppr_integral;
use ewlab_core::noise::{CouplingWindow, StreamId};
use ewlab_core::solver::Solver;
use ewlab_core::stats::fit::fit_power_law;
use ewlab_core::stats::gamma::{alpha, gamma_from_replicas, pair_distance, MIN_PAIRS};
use ewlab_core::stats::quadrature::integrate;
use ewlab_core::{Check, ExperimentReport, ReportRow};

use super::{ids, require, sigma, Experiment, RunContext, Setup};
use crate::config::{Config, CouplingSection, Model};
use crate::error::CliError;
use crate::output::{Output, Table};
use crate::plot::{Chart, Series, Style};

/// `gamma(K2) = E |u_{K1}(0, x) - u_{K2}(0, x)|^2` along a ladder with `K1 = ratio K2`.
pub struct Coupling {
    setup: Setup,
    model: Model,
    sec: CouplingSection,
    sites: Vec<usize>,
}

impl Coupling {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.coupling.clone();
        let model = cfg.model(sec.grid, sec.dt, sec.beta);
        require(sec.k2.len() >= 3, || "coupling.k2 needs at least three rungs".into())?;
        require(sec.k2.windows(2).all(|w| w[1] > w[0]) && sec.k2[0] > 0.0, || {
            "coupling.k2 must be positive and increasing".into()
        })?;
        require(sec.ratio > 1.0, || "coupling.ratio must exceed 1".into())?;
        require(sec.pairs >= MIN_PAIRS, || format!("coupling.pairs must be at least {MIN_PAIRS}"))?;
        require(sec.site_stride >= 1, || "coupling.site_stride must be positive".into())?;
        for &k2 in &sec.k2 {
            CouplingWindow::new(sec.ratio * k2, k2)?.steps(model.dt)?;
        }
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        model.solver_config(model.dt).validate(&setup.lattice)?;
        let lat = &setup.lattice;
        let stride = sec.site_stride;
        let sites = (0..lat.cell_count())
            .filter(|&i| lat.coords(i).iter().all(|c| c.rem_euclid(stride as i64) == 0))
            .collect();
        Ok(Self {
            setup,
            model,
            sec,
            sites,
        })
    }
}

impl Experiment for Coupling {
    fn name(&self) -> &'static str {
        "coupling"
    }

    fn cost(&self) -> f64 {
        let per: f64 = self.sec.k2.iter().map(|k| (1.0 + self.sec.ratio) * k).sum();
        (self.sec.pairs as f64 * per + 2.0 * self.sec.k2[0]) / self.model.dt * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let m = self.model;
        let source = self.setup.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let d = self.setup.lattice.dim();
        let se_k = ctx.tol.se_multiplier;
        let mut rep = ExperimentReport::new("coupling", d);
        let mut table = Table::new(
            "gamma",
            &["k1", "k2", "gamma", "gamma_se", "alpha", "gamma_over_alpha", "leading_order"],
        );
        let mut rungs = Vec::new();
        for (rung, &k2) in self.sec.k2.iter().enumerate() {
            let window = CouplingWindow::new(self.sec.ratio * k2, k2)?;
            let per = ctx.pool.map_init(
                self.sec.pairs,
                || Solver::new(m.solver_config(m.dt), sig, source.clone()),
                |solver, i| {
                    let replica = ((rung as u64) << 32) | i as u64;
                    let (a, b) = solver.run_coupled_pair(window, StreamId::new(ids::COUPLING, replica, 0))?;
                    Ok(pair_distance(&a, &b, &self.sites))
                },
            )?;
            let (gamma, se) = gamma_from_replicas(&per)?;
            let a = alpha(window.k1, k2, d);
            let lead = integrate(
                |s| ppr_integral(&self.setup.plan, &self.setup.kernel, s),
                k2,
                window.k1,
                8,
                8,
            );
            let x = vec![0.0; d];
            rep.rows.push(ReportRow::new("gamma", Some(k2), x.clone(), gamma));
            rep.rows.push(ReportRow::new("gamma_se", Some(k2), x.clone(), se));
            rep.rows.push(ReportRow::new("gamma_over_alpha", Some(k2), x, gamma / a));
            table.push_numbers(&[window.k1, k2, gamma, se, a, gamma / a, lead]);
            rungs.push((k2, gamma, se, a, lead));
        }

        let points: Vec<(f64, f64)> = rungs.iter().map(|r| (r.0, r.1)).collect();
        match fit_power_law(&points) {
            Ok(fit) => {
                rep.scalar("exponent", fit.exponent);
                rep.scalar("exponent_se", fit.exponent_se);
                rep.checks.push(Check::within(
                    "exponent",
                    fit.exponent,
                    Some(ctx.tol.decay_exponent_low),
                    Some(ctx.tol.decay_exponent_high),
                ));
            }
            Err(e) => {
                rep.notes.push(format!("power-law fit failed: {e}"));
                rep.checks.push(Check::flag("exponent", false));
            }
        }
        let lead_points: Vec<(f64, f64)> = rungs.iter().map(|r| (r.0, r.4)).collect();
        if let Ok(fit) = fit_power_law(&lead_points) {
            rep.scalar("leading_order_exponent", fit.exponent);
        }
        let monotone = rungs
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
        rep.checks.push(Check::flag("monotone_2se", monotone));
        let ratios: Vec<f64> = rungs.iter().map(|r| r.1 / r.3).collect();
        let spread = ratios.iter().copied().fold(f64::MIN, f64::max) / ratios.iter().copied().fold(f64::MAX, f64::min);
        rep.scalar("gamma_alpha_spread", spread);
        rep.checks.push(Check::within("gamma_alpha_spread", spread, Some(1.0), Some(ctx.tol.gamma_alpha_spread)));
        for (k2, gamma, se, ..) in &rungs {
            rep.checks.push(Check::within(format!("gamma_positive_k2_{k2}"), gamma - se_k * se, Some(0.0), None));
        }

        // equal start times must give the same path
        let k0 = self.sec.k2[0];
        let mut solver = Solver::new(m.solver_config(m.dt), sig, source.clone())?;
        let (a, b) = solver.run_coupled_pair(CouplingWindow::new(k0, k0)?, StreamId::new(ids::COUPLING, u64::MAX, 0))?;
        rep.checks.push(Check::flag("degenerate_pair_identical", a.values == b.values));

        let mut out = Output::new(rep);
        out.tables.push(table);
        let (k_last, g_last) = *points.last().expect("at least three rungs");
        let guide: Vec<(f64, f64)> = points.iter().map(|p| (p.0, g_last * (p.0 / k_last).powf(-0.5))).collect();
        let scale = g_last / rungs.last().expect("non-empty").4;
        let lead: Vec<(f64, f64)> = lead_points.iter().map(|p| (p.0, scale * p.1)).collect();
        out.plots.push((
            "gamma".into(),
            Chart::new("Coupled-pair distance", "K2", "gamma")
                .log_log()
                .with(Series::new("gamma", points, Style::Markers))
                .with(Series::new("K2^-0.5", guide, Style::Dashed))
                .with(Series::new("leading order (scaled)", lead, Style::Line))
                .render(),
        ));
        Ok(out)
    }
}
