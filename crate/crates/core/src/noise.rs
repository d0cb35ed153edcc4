//! Counter-based smoothed noise increments.
//!
//! Every raw cell value is a pure function of `(master seed, stream id, time
//! index, cell index)`: the seed and stream id form the ChaCha key, the time
//! index selects the ChaCha stream and the cell index the word position. Slices
//! can therefore be regenerated in any order, which is what lets two coupled
//! solvers consume identical increments without buffering.

use std::io::{self, Read, Write};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, MollifierSpec};
use crate::lattice::Lattice;
use crate::report::{Check, ExperimentReport, ReportRow};
use crate::spectral::{SpectralPlan, SpectralWorkspace};
use crate::stats::normal;
use crate::stats::summation::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StreamId {
    pub experiment: u32,
    pub replica: u64,
    pub window: u32,
}

impl StreamId {
    pub fn new(experiment: u32, replica: u64, window: u32) -> Self {
        Self { experiment, replica, window }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream: StreamId,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream: StreamId) -> Self {
        Self { master_seed, stream }
    }

    pub fn with_window(self, window: u32) -> Self {
        Self {
            stream: StreamId { window, ..self.stream },
            ..self
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut k = [0u8; 32];
        k[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        k[8..12].copy_from_slice(&self.stream.experiment.to_le_bytes());
        k[12..16].copy_from_slice(&self.stream.window.to_le_bytes());
        k[16..24].copy_from_slice(&self.stream.replica.to_le_bytes());
        k[24..32].copy_from_slice(b"ewlab-v1");
        k
    }

    /// Generator positioned at the first cell of slice `time_index`.
    pub fn generator(&self, time_index: i64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(time_index as u64);
        rng
    }
}

/// Open-interval uniform from 53 random bits.
#[inline]
fn uniform(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normals `out[c]`, cell `c` using the `c`-th 64-bit word of the stream.
pub fn standard_normals(seed: &SeedSpec, time_index: i64, out: &mut [f64]) {
    let mut rng = seed.generator(time_index);
    for v in out.iter_mut() {
        *v = normal::quantile(uniform(rng.next_u64()));
    }
}

/// Independent `N(0, dt h^{-d})` cell values.
pub fn sample_raw_slice(seed: &SeedSpec, lattice: &Lattice, dt: f64, time_index: i64) -> Vec<f64> {
    let mut out = vec![0.0; lattice.cell_count()];
    fill_raw_slice(seed, lattice, dt, time_index, &mut out);
    out
}

pub fn fill_raw_slice(seed: &SeedSpec, lattice: &Lattice, dt: f64, time_index: i64, out: &mut [f64]) {
    standard_normals(seed, time_index, out);
    let scale = (dt / lattice.cell_volume()).sqrt();
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// One smoothed increment `Delta W_phi` on the lattice at step `time_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSlice {
    pub time_index: i64,
    pub dt: f64,
    pub values: Vec<f64>,
}

/// `h^d (phi (*) raw)` by spectral circular convolution.
pub fn smooth_slice(
    plan: &SpectralPlan,
    phi: &MollifierSpec,
    raw: &[f64],
    out: &mut [f64],
    ws: &mut SpectralWorkspace,
) -> Result<()> {
    if plan.lattice() != &phi.lattice {
        return Err(Error::InvalidArgument("mollifier and plan lattices differ".into()));
    }
    plan.filter(raw, &phi.fourier, out, ws)
}

/// Generator of smoothed slices for one master seed and step size.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    plan: Arc<SpectralPlan>,
    phi: Arc<MollifierSpec>,
    master_seed: u64,
    dt: f64,
    substeps: u32,
}

impl NoiseSource {
    pub fn new(plan: Arc<SpectralPlan>, phi: Arc<MollifierSpec>, master_seed: u64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if plan.lattice() != &phi.lattice {
            return Err(Error::InvalidArgument("mollifier and plan lattices differ".into()));
        }
        Ok(Self { plan, phi, master_seed, dt, substeps: 1 })
    }

    /// Source whose increment at index `i` is the sum of `k` raw increments of
    /// a finer path with step `dt / k` at fine indices `k i .. k i + k`. A run
    /// at `dt` with `k = 2` and a run at `dt / 2` then share one Brownian path.
    pub fn with_substeps(mut self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("substep count must be positive".into()));
        }
        self.substeps = k;
        Ok(self)
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    pub fn lattice(&self) -> &Lattice {
        self.plan.lattice()
    }

    pub fn plan(&self) -> &Arc<SpectralPlan> {
        &self.plan
    }

    pub fn mollifier(&self) -> &Arc<MollifierSpec> {
        &self.phi
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn seed(&self, stream: StreamId) -> SeedSpec {
        SeedSpec::new(self.master_seed, stream)
    }

    /// Raw cell values for `stream` at `time_index`.
    pub fn raw(&self, stream: StreamId, time_index: i64, out: &mut [f64]) {
        let k = self.substeps as i64;
        let fine_dt = self.dt / k as f64;
        let seed = self.seed(stream);
        fill_raw_slice(&seed, self.lattice(), fine_dt, k * time_index, out);
        if k > 1 {
            let mut extra = vec![0.0; out.len()];
            for j in 1..k {
                fill_raw_slice(&seed, self.lattice(), fine_dt, k * time_index + j, &mut extra);
                for (o, e) in out.iter_mut().zip(&extra) {
                    *o += e;
                }
            }
        }
    }

    /// Smooths `raw` in place.
    pub fn smooth_in_place(&self, raw: &mut [f64], ws: &mut SpectralWorkspace) -> Result<()> {
        self.plan.forward(raw, ws)?;
        for (c, f) in ws.spectrum.iter_mut().zip(&self.phi.fourier) {
            *c *= *f;
        }
        self.plan.inverse(ws, raw)
    }

    pub fn fill(&self, stream: StreamId, time_index: i64, out: &mut [f64], ws: &mut SpectralWorkspace) -> Result<()> {
        self.raw(stream, time_index, out);
        self.smooth_in_place(out, ws)
    }

    pub fn slice(&self, stream: StreamId, time_index: i64, ws: &mut SpectralWorkspace) -> Result<NoiseSlice> {
        let mut values = vec![0.0; self.lattice().cell_count()];
        self.fill(stream, time_index, &mut values, ws)?;
        Ok(NoiseSlice { time_index, dt: self.dt, values })
    }

    /// Slices for consecutive time indices `range` on one stream.
    pub fn iter(&self, stream: StreamId, range: std::ops::Range<i64>) -> SliceIter {
        SliceIter {
            source: self.clone(),
            routes: vec![(range.clone(), stream)],
            next: range.start,
            end: range.end,
            ws: None,
        }
    }
}

/// Steps as integer count of `dt`, rejecting values off the step grid.
pub fn steps_of(what: &str, value: f64, dt: f64) -> Result<i64> {
    let k = (value / dt).round();
    if !(value >= 0.0) || (k * dt - value).abs() > 1e-9 * dt.max(value) {
        return Err(Error::NotOnStepGrid { what: format!("{what} = {value}"), dt });
    }
    Ok(k as i64)
}

/// Start times `-K1 < -K2 <= 0` of two coupled solutions ending at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingWindow {
    pub k1: f64,
    pub k2: f64,
}

impl CouplingWindow {
    /// Window id of the shared increments on `[-K2, 0)`.
    pub const SHARED: u32 = 0;
    /// Window id of the private increments on `[-K1, -K2)`.
    pub const PRIVATE: u32 = 1;

    /// `K1 >= K2 >= 0`; equality is allowed as a degenerate test case.
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k2 >= 0.0 && k1 >= k2) {
            return Err(Error::InvalidArgument(format!("coupling window needs K1 >= K2 >= 0, got ({k1}, {k2})")));
        }
        Ok(Self { k1, k2 })
    }

    pub fn steps(&self, dt: f64) -> Result<(i64, i64)> {
        Ok((steps_of("K1", self.k1, dt)?, steps_of("K2", self.k2, dt)?))
    }

    /// Stream feeding time index `i` of the coupled pair.
    pub fn stream_for(&self, base: StreamId, i: i64, n2: i64) -> StreamId {
        let window = if i >= -n2 { Self::SHARED } else { Self::PRIVATE };
        StreamId { window, ..base }
    }
}

/// Iterator over smoothed slices; clones replay the same stream.
pub struct SliceIter {
    source: NoiseSource,
    routes: Vec<(std::ops::Range<i64>, StreamId)>,
    next: i64,
    end: i64,
    ws: Option<SpectralWorkspace>,
}

impl Clone for SliceIter {
    fn clone(&self) -> Self {
        Self {
            source: self.source.clone(),
            routes: self.routes.clone(),
            next: self.next,
            end: self.end,
            ws: None,
        }
    }
}

impl SliceIter {
    fn stream_at(&self, i: i64) -> StreamId {
        self.routes
            .iter()
            .find(|(r, _)| r.contains(&i))
            .map(|(_, s)| *s)
            .expect("routes cover the iterator range")
    }
}

impl Iterator for SliceIter {
    type Item = NoiseSlice;

    fn next(&mut self) -> Option<NoiseSlice> {
        if self.next >= self.end {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let stream = self.stream_at(i);
        let ws = self.ws.get_or_insert_with(|| self.source.plan.workspace());
        Some(self.source.slice(stream, i, ws).expect("lattice shapes are fixed by the source"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next).max(0) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for SliceIter {}

/// Iterators for the `K1` path over `[-K1, 0)` and the `K2` path over `[-K2, 0)`.
pub fn coupled_streams(source: &NoiseSource, base: StreamId, window: CouplingWindow) -> Result<(SliceIter, SliceIter)> {
    let (n1, n2) = window.steps(source.dt)?;
    let shared = StreamId { window: CouplingWindow::SHARED, ..base };
    let private = StreamId { window: CouplingWindow::PRIVATE, ..base };
    let a = SliceIter {
        source: source.clone(),
        routes: vec![(-n1..-n2, private), (-n2..0, shared)],
        next: -n1,
        end: 0,
        ws: None,
    };
    let b = SliceIter {
        source: source.clone(),
        routes: vec![(-n2..0, shared)],
        next: -n2,
        end: 0,
        ws: None,
    };
    Ok((a, b))
}

/// Spatial covariance `(1/N) sum_x dW(x) dW(x + lag)` of one slice at each lag.
pub fn spatial_covariances(lattice: &Lattice, values: &[f64], tables: &[Vec<usize>]) -> Vec<f64> {
    let n = lattice.cell_count() as f64;
    tables
        .iter()
        .map(|t| {
            let mut acc = NeumaierSum::default();
            for (x, &y) in t.iter().enumerate() {
                acc.add(values[x] * values[y]);
            }
            acc.value() / n
        })
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) {
                    return Err(Error::InvalidArgument("lag covariance matrix is singular".into()));
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// `x^T A^{-1} x` through the Cholesky factor of `A`.
fn quadratic_form_inverse(a: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let l = cholesky(a)?;
    let mut y = vec![0.0; x.len()];
    for i in 0..x.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (x[i] - s) / l[i][i];
    }
    Ok(y.iter().map(|v| v * v).sum())
}

/// Maximum separation, in steps, of slice pairs tested for temporal correlation.
pub const TEMPORAL_LAGS: usize = 5;

/// Streaming per-slice statistics for [`empirical_covariance`].
///
/// Only the per-lag spatial covariances and the last few slices are kept, so
/// long slice sequences run in bounded memory.
pub struct CovarianceAccumulator {
    lattice: Lattice,
    lags: Vec<Vec<i64>>,
    lag_cells: Vec<usize>,
    plan: SpectralPlan,
    ws: SpectralWorkspace,
    autocorr: Vec<f64>,
    dt: Option<f64>,
    rows: Vec<Vec<f64>>,
    recent: std::collections::VecDeque<Vec<f64>>,
    cross: Vec<Vec<f64>>,
    variance: NeumaierSum,
}

impl CovarianceAccumulator {
    pub fn new(lattice: &Lattice, lags: &[Vec<i64>]) -> Self {
        let plan = SpectralPlan::new(lattice);
        let ws = plan.workspace();
        Self {
            lattice: lattice.clone(),
            lags: lags.to_vec(),
            lag_cells: lags.iter().map(|l| lattice.index_of(l)).collect(),
            plan,
            ws,
            autocorr: vec![0.0; lattice.cell_count()],
            dt: None,
            rows: Vec::new(),
            recent: Default::default(),
            cross: vec![Vec::new(); TEMPORAL_LAGS],
            variance: NeumaierSum::default(),
        }
    }

    pub fn push(&mut self, slice: &NoiseSlice) {
        self.dt.get_or_insert(slice.dt);
        let v = &slice.values;
        let n = v.len() as f64;
        // all lags at once from the periodogram; agrees with `spatial_covariances`
        self.plan.forward(v, &mut self.ws).expect("slice matches the lattice");
        for c in self.ws.spectrum.iter_mut() {
            *c = c.norm_sqr().into();
        }
        self.plan.inverse(&mut self.ws, &mut self.autocorr).expect("buffer matches the lattice");
        self.rows.push(self.lag_cells.iter().map(|&i| self.autocorr[i] / n).collect());
        self.variance.add(v.iter().map(|x| x * x).sum::<f64>() / n);
        for (tau, prev) in self.recent.iter().enumerate() {
            let c = prev.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / n;
            self.cross[tau].push(c);
        }
        let mut buf = if self.recent.len() == TEMPORAL_LAGS {
            self.recent.pop_back().expect("full")
        } else {
            vec![0.0; v.len()]
        };
        buf.copy_from_slice(v);
        self.recent.push_front(buf);
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    /// Compares with `dt R(lag)` per lag, in aggregate, and checks temporal independence.
    pub fn report(&self, kernel: &CovarianceKernel, se_multiplier: f64, alpha: f64) -> Result<ExperimentReport> {
        const MIN_SLICES: usize = 100;
        if self.count() < MIN_SLICES {
            return Err(Error::TooFewSamples { needed: MIN_SLICES, got: self.count() });
        }
        let lat = &self.lattice;
        let dt = self.dt.expect("at least one slice");
        let rows = &self.rows;
        let s = rows.len() as f64;
        let m = self.lags.len();
        let mut rep = ExperimentReport::new("noise_covariance", lat.dim());
        let mut mean = vec![0.0; m];
        let mut residual = vec![0.0; m];
        for (j, lag) in self.lags.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (mu, se) = mean_and_se(&col);
            let target = dt * kernel.values[lat.index_of(lag)];
            mean[j] = mu;
            residual[j] = mu - target;
            let x: Vec<f64> = lag.iter().map(|k| *k as f64 * lat.spacing()).collect();
            rep.rows.push(ReportRow::new("cov", None, x.clone(), mu).with_reference(target));
            rep.rows.push(ReportRow::new("cov_se", None, x, se));
            rep.checks.push(Check::within_se(format!("lag_{j}"), mu, target, se, se_multiplier));
        }
        // Hotelling-type aggregate with the sample covariance of the lag means
        let mut cov = vec![vec![0.0; m]; m];
        for r in rows {
            for a in 0..m {
                for b in 0..=a {
                    cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        for a in 1..m {
            let (upper, lower) = cov.split_at_mut(a);
            for (row, v) in upper.iter_mut().zip(&lower[0][..a]) {
                row[a] = *v;
            }
        }
        for v in cov.iter_mut().flatten() {
            *v /= (s - 1.0) * s;
        }
        let chi2 = quadratic_form_inverse(&cov, &residual)?;
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let dist = ChiSquared::new(m as f64).expect("positive degrees of freedom");
        let crit = dist.inverse_cdf(1.0 - alpha);
        rep.scalar("chi2", chi2);
        rep.scalar("chi2_critical", crit);
        rep.scalar("chi2_p_value", 1.0 - dist.cdf(chi2));
        rep.checks.push(Check::within("chi2", chi2, None, Some(crit)));

        let var0 = self.variance.value() / s;
        let mut max_corr: f64 = 0.0;
        for (tau, cross) in self.cross.iter().enumerate() {
            if cross.len() < 2 {
                continue;
            }
            let corr: Vec<f64> = cross.iter().map(|c| c / var0).collect();
            let (mu, se) = mean_and_se(&corr);
            max_corr = max_corr.max(mu.abs());
            let lag = (tau + 1) as f64 * dt;
            rep.rows.push(ReportRow::new("temporal_corr", Some(lag), vec![0.0; lat.dim()], mu));
            rep.checks.push(Check::within_se(format!("temporal_{}", tau + 1), mu, 0.0, se, se_multiplier));
        }
        rep.scalar("max_temporal_corr", max_corr);
        rep.scalar("slices", s);
        Ok(rep)
    }
}

/// Compares empirical slice covariances with `dt R(lag)` and checks temporal independence.
pub fn empirical_covariance<'a>(
    slices: impl IntoIterator<Item = &'a NoiseSlice>,
    lags: &[Vec<i64>],
    kernel: &CovarianceKernel,
    se_multiplier: f64,
    alpha: f64,
) -> Result<ExperimentReport> {
    let mut acc = CovarianceAccumulator::new(&kernel.lattice, lags);
    for s in slices {
        acc.push(s);
    }
    acc.report(kernel, se_multiplier, alpha)
}

/// Header of the raw little-endian slice and snapshot format.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub dim: u64,
    pub side: u64,
    pub spacing: f64,
    pub dt: f64,
    pub time_index: i64,
    pub values: Vec<f64>,
}

pub fn write_dump<W: Write>(mut w: W, lattice: &Lattice, dt: f64, time_index: i64, values: &[f64]) -> io::Result<()> {
    w.write_all(&(lattice.dim() as u64).to_le_bytes())?;
    w.write_all(&(lattice.side() as u64).to_le_bytes())?;
    w.write_all(&lattice.spacing().to_le_bytes())?;
    w.write_all(&dt.to_le_bytes())?;
    w.write_all(&time_index.to_le_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_dump<R: Read>(mut r: R) -> io::Result<DumpRecord> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let dim = u64::from_le_bytes(next(&mut r)?);
    let side = u64::from_le_bytes(next(&mut r)?);
    let spacing = f64::from_le_bytes(next(&mut r)?);
    let dt = f64::from_le_bytes(next(&mut r)?);
    let time_index = i64::from_le_bytes(next(&mut r)?);
    let count = side
        .checked_pow(dim as u32)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "cell count overflows"))?;
    let mut bytes = vec![0u8; count as usize * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(DumpRecord { dim, side, spacing, dt, time_index, values })
}
