use ewlab_core::noise::StreamId;
use ewlab_core::solver::{ProbeSpec, Solver};
use ewlab_core::{Check, ExperimentReport, ReportRow};

use super::{ids, mean_and_se, require, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, MomentsSection, Model};
use crate::error::CliError;
use crate::output::Output;
use crate::plot::{Chart, Series, Style};

/// `|| u(t, 0) ||_p` over replicas on a regular time grid.
pub struct Moments {
    setup: Setup,
    model: Model,
    sec: MomentsSection,
    stride: i64,
    steps: i64,
}

impl Moments {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.moments.clone();
        let model = cfg.model(sec.grid, sec.dt, sec.beta);
        let stride = steps("moments.record_every", sec.record_every, model.dt)?;
        let total = steps("moments.horizon", sec.horizon, model.dt)?;
        require(stride > 0 && total % stride == 0 && total / stride >= 8, || {
            "moments.horizon must be a multiple of record_every with at least 8 records".into()
        })?;
        require(sec.replicas >= 2, || "moments.replicas must be at least 2".into())?;
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        model.solver_config(sec.horizon).validate(&setup.lattice)?;
        Ok(Self {
            setup,
            model,
            sec,
            stride,
            steps: total,
        })
    }
}

fn norm(values: &[f64], p: i32) -> f64 {
    (values.iter().map(|v| v.abs().powi(p)).sum::<f64>() / values.len() as f64).powf(1.0 / p as f64)
}

impl Experiment for Moments {
    fn name(&self) -> &'static str {
        "moments"
    }

    fn cost(&self) -> f64 {
        self.sec.replicas as f64 * self.steps as f64 * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let m = self.model;
        let source = self.setup.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let probe = ProbeSpec::every(vec![0], self.stride, self.steps);
        let paths = ctx.pool.map_init(
            self.sec.replicas,
            || Solver::new(m.solver_config(self.sec.horizon), sig, source.clone()),
            |solver, i| {
                let (_, p) = solver.run(StreamId::new(ids::MOMENTS, i as u64, 0), &probe)?;
                Ok(p.values.into_iter().map(|v| v[0]).collect::<Vec<f64>>())
            },
        )?;
        let records = paths[0].len();
        let times: Vec<f64> = (0..records).map(|k| k as f64 * self.sec.record_every).collect();
        let d = self.setup.lattice.dim();
        let origin = vec![0.0; d];
        let mut rep = ExperimentReport::new("moments", d);
        let mut n2 = Vec::with_capacity(records);
        let mut n4 = Vec::with_capacity(records);
        for (k, &t) in times.iter().enumerate() {
            let col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
            let (a, b) = (norm(&col, 2), norm(&col, 4));
            rep.rows.push(ReportRow::new("norm2", Some(t), origin.clone(), a));
            rep.rows.push(ReportRow::new("norm4", Some(t), origin.clone(), b));
            n2.push((t, a));
            n4.push((t, b));
        }
        let horizon = self.sec.horizon;
        let max_over = |lo: f64, hi: f64| {
            n4.iter()
                .filter(|(t, _)| *t >= lo - 1e-12 && *t <= hi + 1e-12)
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let middle = max_over(horizon / 4.0, 3.0 * horizon / 4.0);
        let last = max_over(3.0 * horizon / 4.0, horizon);
        let bound = ctx.tol.moment_growth * middle;
        rep.scalar("norm4_middle_max", middle);
        rep.scalar("norm4_last_quarter_max", last);
        rep.scalar("growth_ratio", last / middle);
        rep.checks.push(Check::within("norm4_bounded", last, None, Some(bound)));
        for frac in [0.25, 0.5, 1.0] {
            let t = frac * horizon;
            if let Some(p) = n2.iter().find(|p| (p.0 - t).abs() < 1e-9) {
                rep.scalar(format!("norm2_t{t}"), p.1);
            }
        }
        let last_col: Vec<f64> = paths.iter().map(|p| p[records - 1]).collect();
        let (mean, se) = mean_and_se(&last_col);
        rep.rows.push(ReportRow::new("mean", Some(horizon), origin, mean).with_reference(1.0));
        rep.checks.push(Check::within_se("final_mean", mean, 1.0, se, ctx.tol.se_multiplier));
        rep.checks.push(Check::flag("finite", n4.iter().all(|p| p.1.is_finite())));

        let mut out = Output::new(rep);
        out.plots.push((
            "moments".into(),
            Chart::new("Moments of u(t, 0)", "t", "norm")
                .with(Series::new("L2", n2, Style::Line))
                .with(Series::new("L4", n4, Style::Line))
                .with(Series::new(
                    "1.05 x middle max",
                    vec![(3.0 * horizon / 4.0, bound), (horizon, bound)],
                    Style::Dashed,
                ))
                .render(),
        ));
        Ok(out)
    }
}
