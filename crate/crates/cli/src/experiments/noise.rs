use ewlab_core::noise::{sample_raw_slice, write_dump, CovarianceAccumulator, StreamId};
use ewlab_core::report::{Check, ReportRow};

use super::{ids, mean_and_se, require, Experiment, RunContext, Setup};
use crate::config::{Config, NoiseSection};
use crate::error::CliError;
use crate::output::Output;
use crate::plot::{Chart, Series, Style};

/// Slices generated per parallel batch before they are folded in order.
const BATCH: usize = 64;

pub struct NoiseCertification {
    setup: Setup,
    dt: f64,
    sec: NoiseSection,
}

impl NoiseCertification {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let sec = cfg.noise.clone();
        let model = cfg.model(sec.grid, sec.dt, None);
        let setup = Setup::new(model.geometry, &cfg.tolerances)?;
        let n = setup.lattice.side() as i64;
        require(sec.slices >= 100, || format!("noise.slices = {} is below 100", sec.slices))?;
        require(sec.cross_slices >= 2, || "noise.cross_slices must be at least 2".into())?;
        require(!sec.lags.is_empty(), || "noise.lags is empty".into())?;
        for lag in &sec.lags {
            require(lag.len() == setup.lattice.dim() && lag.iter().all(|k| k.abs() < n / 2), || {
                format!("lag {lag:?} must have {} components below n/2", setup.lattice.dim())
            })?;
        }
        Ok(Self {
            setup,
            dt: model.dt,
            sec,
        })
    }
}

impl Experiment for NoiseCertification {
    fn name(&self) -> &'static str {
        "noise"
    }

    fn cost(&self) -> f64 {
        (self.sec.slices + 2 * self.sec.cross_slices) as f64 * self.setup.cells()
    }

    fn run(&self, ctx: &RunContext) -> Result<Output, CliError> {
        let s = &self.setup;
        let source = s.source(ctx.seed, self.dt)?;
        let stream = StreamId::new(ids::NOISE, 0, 0);
        let mut acc = CovarianceAccumulator::new(&s.lattice, &self.sec.lags);
        let mut start = 0;
        while start < self.sec.slices {
            let len = BATCH.min(self.sec.slices - start);
            let batch = ctx.pool.map_init(
                len,
                || Ok(s.plan.workspace()),
                |ws, i| source.slice(stream, (start + i) as i64, ws),
            )?;
            for slice in &batch {
                acc.push(slice);
            }
            start += len;
        }
        let tol = &ctx.tol;
        let mut rep = acc.report(&s.kernel, tol.se_multiplier, tol.ks_alpha)?;
        rep.experiment = "noise".into();

        // independence across stream ids at equal time indices
        let other = StreamId::new(ids::NOISE, 1, 0);
        let var0 = self.dt * s.kernel.at_origin();
        let cross = ctx.pool.map_init(
            self.sec.cross_slices,
            || Ok(s.plan.workspace()),
            |ws, i| {
                let a = source.slice(stream, i as i64, ws)?;
                let b = source.slice(other, i as i64, ws)?;
                let n = a.values.len() as f64;
                Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() / n / var0)
            },
        )?;
        let (mc, sc) = mean_and_se(&cross);
        rep.rows.push(ReportRow::new("cross_stream_corr", None, vec![0.0; s.lattice.dim()], mc));
        rep.checks.push(Check::within_se("cross_stream", mc, 0.0, sc, tol.se_multiplier));
        rep.scalar("cross_stream_corr", mc);
        rep.scalar("cross_stream_se", sc);
        rep.scalar("dt", self.dt);

        let lag_points: Vec<(f64, f64, f64)> = rep
            .rows
            .iter()
            .filter(|r| r.quantity == "cov")
            .map(|r| {
                let dist = r.x.iter().map(|v| v * v).sum::<f64>().sqrt();
                (dist, r.value, r.reference.unwrap_or(0.0))
            })
            .collect();
        let mut out = Output::new(rep);
        let mut sorted = lag_points.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.plots.push((
            "covariance".into(),
            Chart::new("Slice covariance by lag", "|lag|", "covariance")
                .with(Series::new("empirical", sorted.iter().map(|p| (p.0, p.1)).collect(), Style::Markers))
                .with(Series::new("dt R(lag)", sorted.iter().map(|p| (p.0, p.2)).collect(), Style::Dashed))
                .render(),
        ));
        if ctx.dumps {
            let raw = sample_raw_slice(&source.seed(stream), &s.lattice, self.dt, 0);
            let mut bytes = Vec::new();
            write_dump(&mut bytes, &s.lattice, self.dt, 0, &raw)?;
            out.blobs.push(("raw_slice_0.bin".into(), bytes));
            let smooth = source.slice(stream, 0, &mut s.plan.workspace())?;
            let mut bytes = Vec::new();
            write_dump(&mut bytes, &s.lattice, self.dt, 0, &smooth.values)?;
            out.blobs.push(("smoothed_slice_0.bin".into(), bytes));
        }
        Ok(out)
    }
}
