use ewlab_core::kernels::{
    check_chapman_kolmogorov, check_covariance, check_fourier_identity, check_ppr_bound, f_tilde_profile,
    fourier_identity_decay, max_image_tau,
};
use ewlab_core::{ExperimentReport, Tolerances};

use super::{logspace, require, Experiment, RunContext, Setup};
use crate::config::{Config, Geometry, KernelChecksSection};
use crate::error::CliError;
use crate::output::Output;
use crate::plot::{Chart, Series, Style};

pub struct KernelChecks {
    setup: Setup,
    decay: Geometry,
    sec: KernelChecksSection,
    radii: Vec<f64>,
}

impl KernelChecks {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.kernel_checks.clone();
        let setup = Setup::new(cfg.geometry(sec.grid), &cfg.tolerances)?;
        let g = setup.geometry;
        require(sec.ppr_points >= 3 && sec.decay_points >= 3, || {
            "ppr_points and decay_points must be at least 3".into()
        })?;
        require(sec.fourier_offset.len() == g.dim, || {
            format!("fourier_offset needs {} components", g.dim)
        })?;
        require(sec.decay_side >= g.side, || "decay_side must not be below the lattice side".into())?;
        let decay = Geometry {
            side: sec.decay_side,
            ..g
        };
        decay.lattice()?;
        let (h, lo, hi) = (g.spacing, 2.0 * g.r0, setup.lattice.period() / 4.0);
        let radii = if sec.ftilde_radii.is_empty() {
            (1..setup.lattice.side())
                .map(|k| k as f64 * h)
                .filter(|r| *r > lo * (1.0 + 1e-12) && *r < hi * (1.0 - 1e-12))
                .collect()
        } else {
            sec.ftilde_radii.clone()
        };
        require(radii.len() >= 3, || format!("need at least three F-tilde radii in ({lo}, {hi})"))?;
        Ok(Self {
            setup,
            decay,
            sec,
            radii,
        })
    }
}

fn power_reference(points: &[(f64, f64)], exponent: f64) -> Vec<(f64, f64)> {
    let (s, v) = *points.last().expect("non-empty");
    points.iter().map(|(x, _)| (*x, v * (x / s).powf(exponent))).collect()
}

impl Experiment for KernelChecks {
    fn name(&self) -> &'static str {
        "kernel_checks"
    }

    fn cost(&self) -> f64 {
        0.0
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let tol: &Tolerances = &ctx.tol;
        let Setup {
            lattice, plan, phi, kernel, ..
        } = &self.setup;
        let d = lattice.dim();
        let mut rep = ExperimentReport::new("kernel_checks", d);

        rep.absorb("covariance", check_covariance(phi, kernel, tol));
        let pairs: Vec<(f64, f64)> = self.sec.ck_pairs.iter().map(|p| (p[0], p[1])).collect();
        rep.absorb("chapman_kolmogorov", check_chapman_kolmogorov(lattice, &pairs, tol)?);

        let tmax = max_image_tau(lattice.period(), kernel.support_radius, d, tol.periodization) * (1.0 - 1e-9) / 2.0;
        let times = logspace(tmax / 101.0, tmax, self.sec.ppr_points);
        let ppr = check_ppr_bound(plan, kernel, &times, tol)?;
        let ppr_points: Vec<(f64, f64)> = ppr
            .rows
            .iter()
            .filter(|r| r.quantity == "ppr")
            .map(|r| (r.t.unwrap_or(0.0), r.value))
            .collect();
        rep.absorb("ppr", ppr);

        for &t in &self.sec.fourier_times {
            rep.absorb(
                &format!("fourier_t{t}"),
                check_fourier_identity(plan, kernel, t, &self.sec.fourier_offset, tol)?,
            );
        }

        let big = Setup::new(self.decay, tol)?;
        let tmax4 = max_image_tau(big.lattice.period(), big.kernel.support_radius, d, tol.periodization) * (1.0 - 1e-9) / 4.0;
        let decay_times = logspace(tmax4 / 10.0, tmax4, self.sec.decay_points);
        let decay = fourier_identity_decay(&big.plan, &big.kernel, &decay_times, tol)?;
        let decay_points: Vec<(f64, f64)> = decay.rows.iter().map(|r| (r.t.unwrap_or(0.0), r.value)).collect();
        rep.absorb("fourier_decay", decay);
        rep.scalar("fourier_decay.side", self.decay.side as f64);

        let ft = f_tilde_profile(plan, kernel, &self.radii, tol)?;
        let ft_points: Vec<(f64, f64)> = ft.rows.iter().map(|r| (r.x[0], r.value)).collect();
        rep.absorb("f_tilde", ft);

        let mut out = Output::new(rep);
        let half_d = -(d as f64) / 2.0;
        out.plots.push((
            "ppr_decay".into(),
            Chart::new("Integrated covariance I(t)", "t", "I(t)")
                .log_log()
                .with(Series::new("I(t)", ppr_points.clone(), Style::Markers))
                .with(Series::new(format!("t^{half_d}"), power_reference(&ppr_points, half_d), Style::Dashed))
                .render(),
        ));
        out.plots.push((
            "fourier_decay".into(),
            Chart::new("Spectral side at x = 0", "t", "value")
                .log_log()
                .with(Series::new("spectral sum", decay_points.clone(), Style::Markers))
                .with(Series::new(format!("t^{half_d}"), power_reference(&decay_points, half_d), Style::Dashed))
                .render(),
        ));
        let tail = 2.0 - d as f64;
        out.plots.push((
            "f_tilde".into(),
            Chart::new("F-tilde along the first axis", "|x|", "F-tilde")
                .log_log()
                .with(Series::new("F-tilde", ft_points.clone(), Style::Markers))
                .with(Series::new(format!("|x|^{tail}"), power_reference(&ft_points, tail), Style::Dashed))
                .render(),
        ));
        Ok(out)
    }
}
