use std::sync::Arc;

use ewlab_core::noise::{write_dump, NoiseSource, StreamId};
use ewlab_core::solver::{FieldState, ProbeSpec, Scheme, Solver};
use ewlab_core::{Check, ExperimentReport, ReportRow};

use super::{ids, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, Model, SchemesSection};
use crate::error::CliError;
use crate::output::{Output, Table};

/// Spectral and explicit schemes on one Brownian path, at `dt` and `dt / 2`.
pub struct SchemeComparison {
    setup: Setup,
    model: Model,
    sec: SchemesSection,
}

impl SchemeComparison {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.schemes.clone();
        let mut model = cfg.model(sec.grid, sec.dt, sec.beta);
        model.symbol = sec.symbol;
        steps("schemes.horizon", sec.horizon, model.dt)?;
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        let mut fd = model.solver_config(sec.horizon);
        fd.scheme = Scheme::ExplicitFd;
        fd.validate(&setup.lattice)?;
        Ok(Self { setup, model, sec })
    }

    fn pair(&self, source: Arc<NoiseSource>, dt: f64) -> Result<(FieldState, FieldState), CliError> {
        let sig = sigma(self.model.sigma)?;
        let run = |scheme| -> Result<FieldState, CliError> {
            let mut m = self.model;
            m.scheme = scheme;
            m.dt = dt;
            let mut s = Solver::new(m.solver_config(self.sec.horizon), sig, source.clone())?;
            Ok(s.run(StreamId::new(ids::SCHEMES, 0, 0), &ProbeSpec::default())?.0)
        };
        Ok((run(Scheme::SpectralExponential)?, run(Scheme::ExplicitFd)?))
    }
}

fn sup_gap(a: &FieldState, b: &FieldState) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

impl Experiment for SchemeComparison {
    fn name(&self) -> &'static str {
        "schemes"
    }

    fn cost(&self) -> f64 {
        // two schemes at dt (two fine slices per step) and two at dt / 2
        8.0 * self.sec.horizon / self.model.dt * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let dt = self.model.dt;
        let fine = self.setup.source(ctx.seed, dt / 2.0)?;
        let coarse = Arc::new(
            NoiseSource::new(self.setup.plan.clone(), self.setup.phi.clone(), ctx.seed, dt)?.with_substeps(2)?,
        );
        let (sa, fa) = self.pair(coarse, dt)?;
        let (sb, fb) = self.pair(fine, dt / 2.0)?;
        let g1 = sup_gap(&sa, &fa);
        let g2 = sup_gap(&sb, &fb);

        let d = self.setup.lattice.dim();
        let mut rep = ExperimentReport::new("schemes", d);
        let origin = vec![0.0; d];
        rep.rows.push(ReportRow::new("sup_gap", Some(self.sec.horizon), origin.clone(), g1).with_reference(ctx.tol.scheme_gap));
        rep.rows.push(ReportRow::new("sup_gap_half_dt", Some(self.sec.horizon), origin, g2));
        rep.scalar("dt", dt);
        rep.scalar("gap_dt", g1);
        rep.scalar("gap_half_dt", g2);
        rep.scalar("gap_ratio", g2 / g1);
        rep.checks.push(Check::within("gap_default", g1, None, Some(ctx.tol.scheme_gap)));
        rep.checks.push(Check::flag("halving_decreases", g2 > 0.0 && g2 < g1));

        let mut out = Output::new(rep);
        let mut table = Table::new("gaps", &["dt", "sup_gap"]);
        table.push_numbers(&[dt, g1]);
        table.push_numbers(&[dt / 2.0, g2]);
        out.tables.push(table);
        if ctx.dumps {
            for (name, f) in [("spectral_final.bin", &sa), ("fd_final.bin", &fa)] {
                let mut bytes = Vec::new();
                write_dump(&mut bytes, &self.setup.lattice, f.dt, f.time_index, &f.values)?;
                out.blobs.push((name.into(), bytes));
            }
        }
        Ok(out)
    }
}
