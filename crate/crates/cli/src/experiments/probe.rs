use ewlab_core::kernels::heat_kernel_1d;
use ewlab_core::noise::StreamId;
use ewlab_core::solver::Solver;
use ewlab_core::{Check, ExperimentReport, HeatSemigroupPlan, ReportRow};

use super::{ids, require, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, Model, ProbeSection};
use crate::error::CliError;
use crate::output::{Output, Table};
use crate::plot::{Chart, Series, Style};

/// Finite-perturbation response to a noise bump at `(r, 0)`, compared with the heat kernel.
pub struct Probe {
    setup: Setup,
    model: Model,
    sec: ProbeSection,
    bump_step: i64,
    lag_steps: i64,
}

impl Probe {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.probe.clone();
        let model = cfg.model(sec.grid, sec.dt, sec.beta);
        let bump_step = steps("probe.bump_time", sec.bump_time, model.dt)?;
        let lag_steps = steps("probe.lag", sec.lag, model.dt)?;
        require(lag_steps >= 1, || "probe.lag must be at least one step".into())?;
        require(sec.amplitude > 0.0 && sec.amplitude.is_finite(), || "probe.amplitude must be positive".into())?;
        require(sec.replicas >= 2, || "probe.replicas must be at least 2".into())?;
        require(sec.resolved_floor > 0.0 && sec.resolved_floor < 1.0, || {
            "probe.resolved_floor must lie in (0, 1)".into()
        })?;
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        require(sec.max_offset >= 2 && sec.max_offset < setup.lattice.side() as i64 / 2, || {
            "probe.max_offset must lie in [2, n/2)".into()
        })?;
        model
            .solver_config((bump_step + lag_steps) as f64 * model.dt)
            .validate(&setup.lattice)?;
        Ok(Self {
            setup,
            model,
            sec,
            bump_step,
            lag_steps,
        })
    }
}

fn l2(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

impl Experiment for Probe {
    fn name(&self) -> &'static str {
        "probe"
    }

    fn cost(&self) -> f64 {
        let per = 2.0 * (self.bump_step + 2 * self.lag_steps) as f64;
        self.sec.replicas as f64 * per * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let m = self.model;
        let s = &self.setup;
        let lat = &s.lattice;
        let source = s.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let horizon = (self.bump_step + self.lag_steps) as f64 * m.dt;
        let read = self.bump_step + self.lag_steps;
        let offsets: Vec<i64> = (0..=self.sec.max_offset).collect();
        let mut targets: Vec<(i64, usize)> = offsets.iter().map(|&k| (read, lat.axis_cell(0, k))).collect();
        targets.push((self.bump_step + 1, 0));
        let near = targets.len() - 1;
        let eps_b = self.sec.amplitude;
        let runs = ctx.pool.map_init(
            self.sec.replicas,
            || Solver::new(m.solver_config(horizon), sig, source.clone()),
            |solver, i| {
                let stream = StreamId::new(ids::PROBE, i as u64, 0);
                let a = solver.noise_response_probe(stream, self.bump_step, 0, eps_b, &targets)?;
                let b = solver.noise_response_probe(stream, self.bump_step, 0, 2.0 * eps_b, &targets)?;
                Ok((a, b))
            },
        )?;

        let d = lat.dim();
        let h = lat.spacing();
        let mut rep = ExperimentReport::new("probe", d);
        let axis = heat_kernel_1d(self.sec.lag, lat);
        let p0 = axis[0].powi(d as i32);
        let heat: Vec<f64> = offsets.iter().map(|&k| axis[lat.wrap(k)] * axis[0].powi(d as i32 - 1)).collect();
        let mut norms = Vec::new();
        for (j, &k) in offsets.iter().enumerate() {
            let col: Vec<f64> = runs.iter().map(|r| r.0.response[j]).collect();
            let norm = l2(&col);
            let mut x = vec![0.0; d];
            x[0] = k as f64 * h;
            rep.rows
                .push(ReportRow::new("response_l2", Some(self.sec.lag), x, norm).with_reference(heat[j]));
            norms.push(norm);
        }
        let resolved: Vec<usize> = (0..offsets.len())
            .filter(|&j| heat[j] >= self.sec.resolved_floor * p0 && norms[j] > 0.0)
            .collect();
        let logs: Vec<f64> = resolved.iter().map(|&j| (norms[j] / heat[j]).ln()).collect();
        let centre = logs.iter().sum::<f64>() / logs.len().max(1) as f64;
        let band = logs.iter().map(|l| (l - centre).abs()).fold(0.0, f64::max);
        rep.scalar("resolved_offsets", resolved.len() as f64);
        rep.scalar("resolved_max_distance", resolved.last().map(|&j| offsets[j] as f64 * h).unwrap_or(0.0));
        rep.scalar("log_offset", centre);
        rep.scalar("log_band", band);
        rep.checks.push(Check::within("resolved_range", resolved.len() as f64, Some(3.0), None));
        rep.checks.push(Check::within("log_profile_band", band, None, Some(ctx.tol.probe_log_band)));

        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in &runs {
            for (x, y) in a.response.iter().zip(&b.response) {
                num += (y - x).powi(2);
                den += x * x;
            }
        }
        let linearity = (num / den).sqrt();
        rep.scalar("linearity", linearity);
        rep.checks.push(Check::within("amplitude_linearity", linearity, None, Some(ctx.tol.probe_linearity)));
        let cancellations: usize = runs.iter().map(|r| r.0.cancellation + r.1.cancellation).sum();
        rep.scalar("cancellations", cancellations as f64);

        // one step after the bump with u(r, 0) near 1: beta sigma(1) (S_dt phi)(0)
        let heat_dt = HeatSemigroupPlan::new(s.plan.clone(), m.symbol, m.dt)?;
        let oracle = m.beta * sig.eval(1.0) * heat_dt.apply(&s.phi.values)?[0];
        let near_mean = runs.iter().map(|r| r.0.response[near]).sum::<f64>() / runs.len() as f64;
        rep.scalar("near_response_mean", near_mean);
        rep.scalar("near_response_oracle", oracle);
        rep.checks.push(Check::within("near_response_positive", near_mean, Some(0.0), None));

        let mut table = Table::new("probe", &["replica", "t", "site_index", "value"]);
        for (i, (a, _)) in runs.iter().enumerate() {
            for ((t, cell), v) in targets.iter().zip(&a.response) {
                table.push_numbers(&[i as f64, *t as f64 * m.dt, *cell as f64, *v]);
            }
        }
        let mut out = Output::new(rep);
        out.tables.push(table);
        let scale = centre.exp();
        let data: Vec<(f64, f64)> = offsets.iter().zip(&norms).map(|(k, v)| (*k as f64 * h, *v)).collect();
        let guide: Vec<(f64, f64)> = offsets.iter().zip(&heat).map(|(k, p)| (*k as f64 * h, scale * p)).collect();
        let mut chart = Chart::new("Response profile against the heat kernel", "|x - z|", "L2 response")
            .with(Series::new("response", data, Style::Markers))
            .with(Series::new("scaled p(t - r, x - z)", guide, Style::Dashed));
        chart.log_y = true;
        out.plots.push(("response_profile".into(), chart.render()));
        Ok(out)
    }
}
