use ewlab_core::noise::StreamId;
use ewlab_core::solver::{ProbeSpec, Scheme, Solver};
use ewlab_core::stats::fluctuation::{first_chaos_variance, FluctuationFunctional};
use ewlab_core::stats::jackknife::variance_se;
use ewlab_core::stats::ks::against_standard_normal;
use ewlab_core::stats::normal;
use ewlab_core::stats::nu_sigma::{combine, replica_contribution};
use ewlab_core::stats::sigma_g::{sigma_g, sigma_g_real_space};
use ewlab_core::stats::stationarity::{stationarity_diagnostic, MarginalSample, MIN_STATIONARITY_REPLICAS};
use ewlab_core::{Check, ExperimentReport, Lattice, ReportRow};

use super::{ids, mean_and_se, require, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, EwSection, Model};
use crate::error::CliError;
use crate::output::{Output, Table};
use crate::plot::{Chart, Series, Style};

/// Variance and law of `X_eps` against the Edwards–Wilkinson limit.
///
/// In first-chaos mode the reference is `beta^2 sigma(1)^2 Sigma_g` with `nu = 1`,
/// which is the leading order for small `beta`.
pub struct EwLimit {
    name: &'static str,
    setup: Setup,
    model: Model,
    sec: EwSection,
    /// Ascending micro times, one functional each.
    functionals: Vec<FluctuationFunctional>,
    horizon: f64,
    stream: u32,
}

impl EwLimit {
    pub fn new(cfg: &Config, name: &'static str, sec: &EwSection) -> Result<Self, CliError> {
        let sec = sec.clone();
        let mut model = cfg.model(sec.grid, sec.dt, sec.beta);
        if let Some(s) = sec.sigma {
            model.sigma = s;
        }
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        require(!sec.eps.is_empty(), || format!("{name}.eps is empty"))?;
        for &e in &sec.eps {
            let l = e.log2();
            require(e > 0.0 && e <= 1.0 && (l - l.round()).abs() < 1e-12, || {
                format!("{name}.eps = {e} is not a dyadic scale 2^-k")
            })?;
        }
        require(sec.eps.contains(&sec.check_eps), || {
            format!("{name}.check_eps = {} is not in eps", sec.check_eps)
        })?;
        require(sec.t > 0.0, || format!("{name}.t must be positive"))?;
        require(sec.replicas >= 50, || format!("{name}.replicas must be at least 50"))?;
        let mut eps = sec.eps.clone();
        eps.sort_by(|a, b| b.total_cmp(a));
        eps.dedup();
        let functionals = eps
            .iter()
            .map(|&e| {
                let f = FluctuationFunctional::new(&setup.lattice, e, sec.t, &sec.g, 1.0, cfg.tolerances.g_tail)?;
                steps("micro time t / eps^2", f.micro_time(), model.dt)?;
                Ok(f)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let horizon = functionals.last().expect("non-empty").micro_time();
        for &t in &sec.stationarity_times {
            steps("stationarity time", t, model.dt)?;
            require(t > 0.0 && t <= horizon, || {
                format!("{name}.stationarity_times must lie in (0, {horizon}]")
            })?;
        }
        model.solver_config(horizon).validate(&setup.lattice)?;
        let stream = if sec.first_chaos { ids::FIRST_CHAOS } else { ids::EW };
        Ok(Self {
            name,
            setup,
            model,
            sec,
            functionals,
            horizon,
            stream,
        })
    }

    fn macro_lattice(&self, eps: f64) -> Result<Lattice, CliError> {
        let l = &self.setup.lattice;
        Ok(Lattice::new(l.dim(), l.side(), eps * l.spacing())?)
    }
}

struct Replica {
    x: Vec<f64>,
    probe: Vec<f64>,
    nu: Option<(f64, Vec<f64>)>,
}

impl Experiment for EwLimit {
    fn name(&self) -> &'static str {
        self.name
    }

    fn cost(&self) -> f64 {
        self.sec.replicas as f64 * self.horizon / self.model.dt * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let m = self.model;
        let s = &self.setup;
        let source = s.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let micro: Vec<f64> = self.functionals.iter().map(|f| f.micro_time()).collect();
        let probe = ProbeSpec::at_times(vec![0], &self.sec.stationarity_times, &micro, m.dt)?;
        let want_nu = !self.sec.first_chaos;
        let stride = self.sec.nu_stride;
        let reps = ctx.pool.map_init(
            self.sec.replicas,
            || Solver::new(m.solver_config(self.horizon), sig, source.clone()),
            |solver, i| {
                let (_, p) = solver.run(StreamId::new(self.stream, i as u64, 0), &probe)?;
                let x = self
                    .functionals
                    .iter()
                    .zip(&p.snapshots)
                    .map(|(f, snap)| f.evaluate(snap))
                    .collect::<Result<Vec<_>, _>>()?;
                let nu = want_nu.then(|| {
                    replica_contribution(&p.snapshots.last().expect("one per eps").values, &sig, &s.kernel, stride)
                });
                Ok(Replica {
                    x,
                    probe: p.values.iter().map(|v| v[0]).collect(),
                    nu,
                })
            },
        )?;

        let d = s.lattice.dim();
        let origin = vec![0.0; d];
        let mut rep = ExperimentReport::new(self.name, d);
        let beta = m.beta;
        let s1 = sig.eval(1.0);
        let nu2_info = if want_nu {
            let est = combine(reps.iter().map(|r| r.nu.clone().expect("computed")).collect(), &s.kernel);
            rep.scalar("nu2", est.nu2);
            rep.scalar("nu2_se", est.se);
            Some((est.nu2, est.se))
        } else {
            None
        };
        let mut table = Table::new(
            "ew",
            &["epsilon", "n_replicas", "var_X", "se_var", "sigma_g", "ratio", "ks_stat", "ks_crit_1pct"],
        );
        let mut ratio_points = Vec::new();
        let mut qq = Vec::new();
        let tol = &ctx.tol;
        for (k, f) in self.functionals.iter().enumerate() {
            let eps = f.eps;
            let xs: Vec<f64> = reps.iter().map(|r| r.x[k]).collect();
            let (mean, mean_se) = mean_and_se(&xs);
            let n = xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se_var = variance_se(&xs);
            let mac = self.macro_lattice(eps)?;
            let unit = sigma_g(1.0, 1.0, self.sec.t, &self.sec.g, &mac)?;
            let real = sigma_g_real_space(1.0, 1.0, self.sec.t, &self.sec.g, mac.period(), d);
            let rel = (unit.value - real).abs() / real;
            let tag = format!("eps{eps}");
            rep.scalar(format!("{tag}.sigma_g_unit"), unit.value);
            rep.scalar(format!("{tag}.sigma_g_unit_real_space"), real);
            rep.scalar(format!("{tag}.sigma_g_quadrature_error"), unit.quadrature_error / real);
            let reference = match nu2_info {
                Some((nu2, _)) => beta * beta * nu2 * unit.value,
                None => beta * beta * s1 * s1 * real,
            };
            let ratio = var / reference;
            let z: Vec<f64> = xs.iter().map(|x| x / reference.sqrt()).collect();
            let ks = against_standard_normal(&z)?;
            table.push_numbers(&[eps, n, var, se_var, reference, ratio, ks.statistic, ks.critical_1pct]);
            rep.rows.push(ReportRow::new("var_x", Some(self.sec.t), origin.clone(), var).with_reference(reference));
            rep.rows.push(ReportRow::new("var_x_se", Some(self.sec.t), origin.clone(), se_var));
            rep.rows.push(ReportRow::new("mean_x", Some(self.sec.t), origin.clone(), mean).with_reference(0.0));
            rep.scalar(format!("{tag}.var_x"), var);
            rep.scalar(format!("{tag}.ratio"), ratio);
            rep.scalar(format!("{tag}.ks_stat"), ks.statistic);
            rep.scalar(format!("{tag}.ks_p_value"), ks.p_value);
            if self.sec.first_chaos {
                let exact =
                    beta * beta * s1 * s1 * first_chaos_variance(&s.plan, &s.kernel, f, steps("t", f.micro_time(), m.dt)?, m.dt, m.scheme, m.symbol)?;
                rep.scalar(format!("{tag}.linearised_variance"), exact);
                rep.scalar(format!("{tag}.linearised_over_limit"), exact / reference);
            }
            ratio_points.push((eps, ratio));
            if eps != self.sec.check_eps {
                continue;
            }
            rep.checks.push(Check::within("sigma_g_cross_check", rel, None, Some(tol.sigma_g_relative)));
            match nu2_info {
                Some((nu2, nu_se)) => {
                    let rel_se = ((se_var / var).powi(2) + (nu_se / nu2).powi(2)).sqrt();
                    rep.scalar("ratio_rel_se", rel_se);
                    rep.checks.push(Check::within_se("variance_ratio", ratio, 1.0, ratio * rel_se, tol.se_multiplier));
                }
                None => {
                    rep.checks.push(Check::within_se("variance", var, reference, se_var, tol.se_multiplier));
                }
            }
            rep.checks.push(Check::within("ks_normal", ks.statistic, None, Some(ks.critical_1pct)));
            rep.checks.push(Check::within_se("mean_zero", mean, 0.0, mean_se, tol.se_multiplier));
            let mut sorted = z.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            qq = sorted
                .iter()
                .enumerate()
                .map(|(i, v)| (normal::quantile((i as f64 + 0.5) / n), *v))
                .collect();
        }
        rep.scalar("replicas", reps.len() as f64);
        rep.scalar("beta", beta);
        rep.scalar("scheme_is_spectral", (m.scheme == Scheme::SpectralExponential) as u8 as f64);

        // convergence in law at the origin, reported but not a pass criterion here
        if reps.len() >= MIN_STATIONARITY_REPLICAS && self.sec.stationarity_times.len() >= 2 {
            let mut times: Vec<(usize, f64)> = self.sec.stationarity_times.iter().copied().enumerate().collect();
            times.sort_by(|a, b| a.1.total_cmp(&b.1));
            let samples = times
                .iter()
                .map(|(j, t)| MarginalSample::new(*t, 0, reps.iter().map(|r| r.probe[*j]).collect()))
                .collect::<Result<Vec<_>, _>>()?;
            let mut diag = stationarity_diagnostic(&samples, 1.0, tol.se_multiplier)?;
            for c in std::mem::take(&mut diag.checks) {
                diag.notes.push(format!(
                    "stationarity diagnostic {}: {}",
                    c.name,
                    if c.passed { "ok" } else { "not met" }
                ));
            }
            for row in &mut diag.rows {
                row.x = origin.clone();
            }
            rep.absorb("stationarity", diag);
        }

        let mut out = Output::new(rep);
        out.tables.push(table);
        let mut chart = Chart::new("Variance ratio by scale", "epsilon", "Var X / reference")
            .with(Series::new("ratio", ratio_points.clone(), Style::Markers))
            .with(Series::new("1", ratio_points.iter().map(|p| (p.0, 1.0)).collect(), Style::Dashed));
        chart.log_x = true;
        out.plots.push(("ratio".into(), chart.render()));
        let diag: Vec<(f64, f64)> = qq.iter().map(|p| (p.0, p.0)).collect();
        out.plots.push((
            "qq".into(),
            Chart::new("Standardised X against N(0, 1)", "normal quantile", "sample quantile")
                .with(Series::new("X / sqrt(reference)", qq, Style::Markers))
                .with(Series::new("identity", diag, Style::Dashed))
                .render(),
        ));
        Ok(out)
    }
}
