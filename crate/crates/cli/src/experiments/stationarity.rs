use ewlab_core::noise::StreamId;
use ewlab_core::solver::{ProbeSpec, Solver};
use ewlab_core::stats::ks::two_sample;
use ewlab_core::stats::stationarity::{stationarity_diagnostic, MarginalSample, MIN_STATIONARITY_REPLICAS};
use ewlab_core::{Check, ExperimentReport, ReportRow};

use super::{ids, require, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, Model, StationaritySection};
use crate::error::CliError;
use crate::output::{Output, Table};
use crate::plot::{Chart, Series, Style};

/// Convergence in law of `u(t, 0)` and the law of the shifted-start solution.
pub struct Stationarity {
    setup: Setup,
    model: Model,
    sec: StationaritySection,
    shifted_k: f64,
    horizon: f64,
}

impl Stationarity {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.stationarity.clone();
        let model = cfg.model(sec.grid, sec.dt, sec.beta);
        require(sec.replicas >= MIN_STATIONARITY_REPLICAS, || {
            format!(
                "stationarity.replicas = {} is below the minimum of {MIN_STATIONARITY_REPLICAS}",
                sec.replicas
            )
        })?;
        require(sec.times.len() >= 2, || "stationarity.times needs at least two entries".into())?;
        require(sec.times.windows(2).all(|w| w[1] > w[0]) && sec.times[0] > 0.0, || {
            "stationarity.times must be positive and increasing".into()
        })?;
        for t in &sec.times {
            steps("stationarity time", *t, model.dt)?;
        }
        let horizon = *sec.times.last().expect("checked non-empty");
        let shifted_k = sec.shifted_k.unwrap_or(sec.times[sec.times.len() - 2]);
        require(sec.times.iter().any(|t| (t - shifted_k).abs() < 1e-12), || {
            format!("stationarity.shifted_k = {shifted_k} must be one of the marginal times")
        })?;
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        model.solver_config(horizon).validate(&setup.lattice)?;
        Ok(Self {
            setup,
            model,
            sec,
            shifted_k,
            horizon,
        })
    }
}

impl Experiment for Stationarity {
    fn name(&self) -> &'static str {
        "stationarity"
    }

    fn cost(&self) -> f64 {
        let per = (self.horizon + self.shifted_k) / self.model.dt;
        self.sec.replicas as f64 * per * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let m = self.model;
        let source = self.setup.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let times = &self.sec.times;
        let probe = ProbeSpec::at_times(vec![0], times, &[], m.dt)?;
        let results = ctx.pool.map_init(
            self.sec.replicas,
            || Solver::new(m.solver_config(self.horizon), sig, source.clone()),
            |solver, i| {
                let (_, p) = solver.run(StreamId::new(ids::STATIONARITY, i as u64, 0), &probe)?;
                let forward: Vec<f64> = p.values.iter().map(|v| v[0]).collect();
                let shifted = solver.run_shifted(self.shifted_k, StreamId::new(ids::SHIFTED, i as u64, 0))?;
                Ok((forward, shifted.values[0]))
            },
        )?;
        let samples = times
            .iter()
            .enumerate()
            .map(|(k, &t)| MarginalSample::new(t, 0, results.iter().map(|r| r.0[k]).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        let lambda = 1.0;
        let diag = stationarity_diagnostic(&samples, lambda, ctx.tol.se_multiplier)?;
        let t_stat = diag.scalars["t_stat"];
        let d = self.setup.lattice.dim();
        let mut rep = ExperimentReport::new("stationarity", d);
        let mut ks_table = Table::new("ks", &["t_a", "t_b", "ks_stat", "ks_crit_1pct", "p_value"]);
        let mut ks_points = Vec::new();
        let mut crit_points = Vec::new();
        for w in samples.windows(2) {
            let r = two_sample(&w[0].values, &w[1].values)?;
            ks_table.push_numbers(&[w[0].t, w[1].t, r.statistic, r.critical_1pct, r.p_value]);
            ks_points.push((w[1].t, r.statistic));
            crit_points.push((w[1].t, r.critical_1pct));
        }
        let mut diag = diag;
        for row in &mut diag.rows {
            row.x = vec![0.0; d];
        }
        diag.dim = d;
        rep.absorb("marginals", diag);

        // the pair (T_stat, 2 T_stat), or the next recorded time when 2 T_stat is absent
        if t_stat == 0.0 {
            rep.notes.push("marginals are degenerate: T_stat = 0".into());
            rep.checks.push(Check::flag("ks_tstat_pair", true));
        } else if let Some(i) = times.iter().position(|t| *t == t_stat).filter(|i| i + 1 < times.len()) {
            let j = times.iter().position(|t| (t - 2.0 * t_stat).abs() < 1e-12).unwrap_or(i + 1);
            let r = two_sample(&samples[i].values, &samples[j].values)?;
            rep.scalar("ks_tstat_pair.t_a", times[i]);
            rep.scalar("ks_tstat_pair.t_b", times[j]);
            rep.scalar("ks_tstat_pair.statistic", r.statistic);
            rep.scalar("ks_tstat_pair.critical_1pct", r.critical_1pct);
            rep.checks.push(Check::within("ks_tstat_pair", r.statistic, None, Some(r.critical_1pct)));
        } else {
            rep.notes.push("no marginal pair stabilised within the recorded times".into());
            rep.checks.push(Check::flag("ks_tstat_pair", false));
        }

        let k_index = times.iter().position(|t| (t - self.shifted_k).abs() < 1e-12).expect("validated");
        let shifted: Vec<f64> = results.iter().map(|r| r.1).collect();
        let r = two_sample(&shifted, &samples[k_index].values)?;
        rep.rows.push(
            ReportRow::new("shifted_ks", Some(self.shifted_k), vec![0.0; d], r.statistic).with_reference(r.critical_1pct),
        );
        rep.scalar("shifted.k", self.shifted_k);
        rep.scalar("shifted.statistic", r.statistic);
        rep.scalar("shifted.p_value", r.p_value);
        rep.checks.push(Check::within("shifted_ks", r.statistic, None, Some(r.critical_1pct)));
        ks_table.push_numbers(&[-self.shifted_k, self.shifted_k, r.statistic, r.critical_1pct, r.p_value]);

        let mut out = Output::new(rep);
        out.tables.push(ks_table);
        let mut chart = Chart::new("KS distance between consecutive marginals", "t", "KS statistic")
            .with(Series::new("KS", ks_points, Style::Markers))
            .with(Series::new("1% critical", crit_points, Style::Dashed));
        chart.log_x = true;
        out.plots.push(("ks".into(), chart.render()));
        Ok(out)
    }
}
