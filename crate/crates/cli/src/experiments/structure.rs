use ewlab_core::noise::StreamId;
use ewlab_core::solver::{ProbeSpec, Solver};
use ewlab_core::stats::structure::{replica_structure, structure_function, MIN_SNAPSHOTS};

use super::{ids, require, sigma, steps, Experiment, RunContext, Setup};
use crate::config::{Config, Model, StructureSection};
use crate::error::CliError;
use crate::output::Output;
use crate::plot::{Chart, Series, Style};

/// Order-2 spatial increments of `u(T, .)` at offsets below the noise correlation length.
pub struct Structure {
    setup: Setup,
    model: Model,
    sec: StructureSection,
}

impl Structure {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.structure.clone();
        let model = cfg.model(sec.grid, sec.dt, sec.beta);
        steps("structure.horizon", sec.horizon, model.dt)?;
        require(sec.replicas >= MIN_SNAPSHOTS, || {
            format!("structure.replicas must be at least {MIN_SNAPSHOTS}")
        })?;
        let g = model.geometry;
        require(sec.offsets.len() >= 3, || "structure.offsets needs at least three entries".into())?;
        require(
            sec.offsets.windows(2).all(|w| w[1] > w[0])
                && sec.offsets[0] >= 2
                && (*sec.offsets.last().expect("non-empty") as f64) * g.spacing <= 2.0 * g.r0 * (1.0 + 1e-12),
            || format!("structure.offsets must increase from 2 with k h <= {}", 2.0 * g.r0),
        )?;
        let setup = Setup::new(g, &cfg.tolerances)?;
        model.solver_config(sec.horizon).validate(&setup.lattice)?;
        Ok(Self { setup, model, sec })
    }
}

impl Experiment for Structure {
    fn name(&self) -> &'static str {
        "structure"
    }

    fn cost(&self) -> f64 {
        self.sec.replicas as f64 * self.sec.horizon / self.model.dt * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let m = self.model;
        let source = self.setup.source(ctx.seed, m.dt)?;
        let sig = sigma(m.sigma)?;
        let lat = &self.setup.lattice;
        let offsets = &self.sec.offsets;
        let per = ctx.pool.map_init(
            self.sec.replicas,
            || Solver::new(m.solver_config(self.sec.horizon), sig, source.clone()),
            |solver, i| {
                let (f, _) = solver.run(StreamId::new(ids::STRUCTURE, i as u64, 0), &ProbeSpec::default())?;
                Ok(replica_structure(lat, &f.values, 2, offsets))
            },
        )?;
        let r0 = self.setup.geometry.r0;
        let mut rep = structure_function(lat, &per, 2, offsets, 2.0 * r0, ctx.tol.structure_slope)?;
        rep.experiment = "structure".into();
        rep.scalar("horizon", self.sec.horizon);
        let points: Vec<(f64, f64)> = rep
            .rows
            .iter()
            .filter(|r| r.quantity == "s2")
            .map(|r| (r.x[0], r.value))
            .collect();
        let slope = rep.scalars.get("slope").copied().unwrap_or(f64::NAN);
        let mut out = Output::new(rep);
        if let (Some(first), true) = (points.first().copied(), slope.is_finite()) {
            let guide: Vec<(f64, f64)> = points.iter().map(|p| (p.0, first.1 * (p.0 / first.0).powf(2.0))).collect();
            out.plots.push((
                "structure".into(),
                Chart::new("Second-order structure function", "r", "S2(r)")
                    .log_log()
                    .with(Series::new(format!("S2, slope {slope:.3}"), points, Style::Markers))
                    .with(Series::new("r^2", guide, Style::Dashed))
                    .render(),
            ));
        }
        Ok(out)
    }
}
