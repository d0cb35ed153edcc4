//! Time stepping of the mild formulation.
//!
//! Two schemes advance a [`FieldState`] by one increment `dW` of the smoothed
//! noise, both evaluating `sigma(u)` at the left endpoint:
//!
//! * spectral-exponential: `u+ = S_dt [u + beta sigma(u) dW]`,
//! * explicit finite differences: `u+ = u + dt Lap_h u + beta sigma(u) dW`.
//!
//! A state carries a global time index, so `time = index * dt` and negative
//! indices describe shifted starts before time zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{HeatSemigroupPlan, Symbol};
use crate::lattice::Lattice;
use crate::noise::{steps_of, CouplingWindow, NoiseSource, StreamId};
use crate::spectral::SpectralWorkspace;

/// Diffusion coefficient `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaSpec {
    Linear,
    Affine { a: f64, b: f64 },
    Sine,
    /// `amplitude / (1 + exp(-slope (u - center)))`.
    ShiftedSigmoid { center: f64, amplitude: f64, slope: f64 },
}

impl SigmaSpec {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            SigmaSpec::Linear => u,
            SigmaSpec::Affine { a, b } => a + b * u,
            SigmaSpec::Sine => u.sin(),
            SigmaSpec::ShiftedSigmoid { center, amplitude, slope } => {
                amplitude / (1.0 + (-slope * (u - center)).exp())
            }
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match *self {
            SigmaSpec::Linear | SigmaSpec::Sine => 1.0,
            SigmaSpec::Affine { b, .. } => b.abs(),
            SigmaSpec::ShiftedSigmoid { amplitude, slope, .. } => (amplitude * slope).abs() / 4.0,
        }
    }
}

/// A `sigma` whose Lipschitz constant has been checked on a dense grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma {
    spec: SigmaSpec,
    lipschitz: f64,
}

impl Sigma {
    pub fn new(spec: SigmaSpec) -> Result<Self> {
        let lip = spec.lipschitz_constant();
        if !lip.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma {spec:?} has no finite Lipschitz constant")));
        }
        const POINTS: usize = 20_001;
        let step = 20.0 / (POINTS - 1) as f64;
        let mut prev = spec.eval(-10.0);
        for i in 1..POINTS {
            let v = spec.eval(-10.0 + i as f64 * step);
            if !v.is_finite() || (v - prev).abs() > lip * step * (1.0 + 1e-9) + 1e-15 {
                return Err(Error::InvalidArgument(format!(
                    "sigma {spec:?} violates its Lipschitz constant {lip} near {}",
                    -10.0 + i as f64 * step
                )));
            }
            prev = v;
        }
        Ok(Self { spec, lipschitz: lip })
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.spec.eval(u)
    }

    pub fn spec(&self) -> SigmaSpec {
        self.spec
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SpectralExponential,
    ExplicitFd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Constant(f64),
    /// `lambda + f` with `f` a bounded lattice function.
    Perturbed { lambda: f64, f: Arc<Vec<f64>> },
}

impl InitialData {
    pub fn field(&self, lattice: &Lattice) -> Result<Vec<f64>> {
        match self {
            InitialData::Constant(l) => Ok(vec![*l; lattice.cell_count()]),
            InitialData::Perturbed { lambda, f } => {
                lattice.check_field(f)?;
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("initial perturbation must be finite".into()));
                }
                Ok(f.iter().map(|v| lambda + v).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub beta: f64,
    pub horizon: f64,
    pub initial: InitialData,
    /// Heat symbol of the spectral scheme; `Discrete` matches the finite-difference Laplacian.
    pub symbol: Symbol,
    /// Magnitude treated as runaway growth.
    pub blow_up: f64,
}

impl SolverConfig {
    pub fn new(scheme: Scheme, dt: f64, beta: f64, horizon: f64) -> Self {
        Self {
            scheme,
            dt,
            beta,
            horizon,
            initial: InitialData::Constant(1.0),
            symbol: Symbol::Continuum,
            blow_up: 1e150,
        }
    }

    /// `dt = h^2 / 12`.
    pub fn default_dt(lattice: &Lattice) -> f64 {
        lattice.spacing().powi(2) / 12.0
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta = {} must be >= 0", self.beta)));
        }
        if self.scheme == Scheme::ExplicitFd {
            let limit = lattice.spacing().powi(2) / (2.0 * lattice.dim() as f64);
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::SchemeStability { dt: self.dt, limit });
            }
        }
        steps_of("horizon", self.horizon, self.dt)?;
        Ok(())
    }

    pub fn steps(&self) -> i64 {
        (self.horizon / self.dt).round() as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub time_index: i64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl FieldState {
    pub fn new(time_index: i64, dt: f64, values: Vec<f64>) -> Self {
        Self { time_index, dt, values }
    }

    pub fn time(&self) -> f64 {
        self.time_index as f64 * self.dt
    }
}

/// Site values at recorded times, plus optional snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryProbe {
    pub sites: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[k][j]` is `u(times[k], sites[j])`.
    pub values: Vec<Vec<f64>>,
    pub snapshots: Vec<FieldState>,
}

/// What to record during [`Solver::run`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeSpec {
    pub sites: Vec<usize>,
    /// Step indices (relative to the start) at which sites are recorded.
    pub record_steps: Vec<i64>,
    pub snapshot_steps: Vec<i64>,
}

impl ProbeSpec {
    /// Records every `stride` steps up to `steps`, including the start.
    pub fn every(sites: Vec<usize>, stride: i64, steps: i64) -> Self {
        Self {
            sites,
            record_steps: (0..=steps).step_by(stride.max(1) as usize).collect(),
            snapshot_steps: Vec::new(),
        }
    }

    /// Converts times to step indices, rejecting those off the grid.
    pub fn at_times(sites: Vec<usize>, times: &[f64], snapshots: &[f64], dt: f64) -> Result<Self> {
        let conv = |ts: &[f64]| ts.iter().map(|t| steps_of("probe time", *t, dt)).collect::<Result<Vec<_>>>();
        Ok(Self {
            sites,
            record_steps: conv(times)?,
            snapshot_steps: conv(snapshots)?,
        })
    }
}

/// One solver instance: owns its buffers and steps one state at a time.
pub struct Solver {
    cfg: SolverConfig,
    sigma: Sigma,
    source: Arc<NoiseSource>,
    heat: HeatSemigroupPlan,
    ws: SpectralWorkspace,
    noise: Vec<f64>,
    work: Vec<f64>,
}

impl Solver {
    pub fn new(cfg: SolverConfig, sigma: Sigma, source: Arc<NoiseSource>) -> Result<Self> {
        let lat = source.lattice().clone();
        cfg.validate(&lat)?;
        if (cfg.dt - source.dt()).abs() > 1e-15 * cfg.dt {
            return Err(Error::InvalidArgument(format!(
                "solver dt {} differs from noise dt {}",
                cfg.dt,
                source.dt()
            )));
        }
        let heat = HeatSemigroupPlan::new(source.plan().clone(), cfg.symbol, cfg.dt)?;
        let ws = source.plan().workspace();
        let n = lat.cell_count();
        Ok(Self {
            cfg,
            sigma,
            source,
            heat,
            ws,
            noise: vec![0.0; n],
            work: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn lattice(&self) -> &Lattice {
        self.source.lattice()
    }

    pub fn source(&self) -> &Arc<NoiseSource> {
        &self.source
    }

    pub fn initial_state(&self, time_index: i64) -> Result<FieldState> {
        Ok(FieldState::new(time_index, self.cfg.dt, self.cfg.initial.field(self.lattice())?))
    }

    /// Advances `state` by one step driven by the smoothed increment `dw`.
    ///
    /// `dw = None` takes a noiseless step; it must only be used when `beta = 0`
    /// or to evolve deterministically.
    pub fn step_with(&mut self, state: &mut FieldState, dw: Option<&[f64]>) -> Result<()> {
        let beta = self.cfg.beta;
        let lat = self.source.lattice();
        match self.cfg.scheme {
            Scheme::SpectralExponential => {
                self.work.copy_from_slice(&state.values);
                if let Some(dw) = dw.filter(|_| beta != 0.0) {
                    for ((w, u), n) in self.work.iter_mut().zip(&state.values).zip(dw) {
                        *w += beta * self.sigma.eval(*u) * n;
                    }
                }
                self.heat.apply_into(&self.work, &mut state.values, &mut self.ws)?;
            }
            Scheme::ExplicitFd => {
                laplacian(lat, &state.values, &mut self.work);
                let dt = self.cfg.dt;
                match dw.filter(|_| beta != 0.0) {
                    Some(dw) => {
                        for ((u, l), n) in state.values.iter_mut().zip(&self.work).zip(dw) {
                            *u = *u + dt * l + beta * self.sigma.eval(*u) * n;
                        }
                    }
                    None => {
                        for (u, l) in state.values.iter_mut().zip(&self.work) {
                            *u += dt * l;
                        }
                    }
                }
            }
        }
        state.time_index += 1;
        let bound = self.cfg.blow_up;
        if state.values.iter().any(|v| !(v.abs() <= bound)) {
            return Err(Error::BlowUp { time: state.time() });
        }
        Ok(())
    }

    /// Step consuming a pre-computed slice, checking its time index.
    pub fn step(&mut self, state: &mut FieldState, slice: &crate::noise::NoiseSlice) -> Result<()> {
        if slice.time_index != state.time_index {
            return Err(Error::TimeIndexMismatch { state: state.time_index, slice: slice.time_index });
        }
        self.step_with(state, Some(&slice.values))
    }

    /// Generates the slice of `stream` at the state's time index and steps.
    pub fn step_stream(&mut self, state: &mut FieldState, stream: StreamId) -> Result<()> {
        if self.cfg.beta == 0.0 {
            return self.step_with(state, None);
        }
        let mut noise = std::mem::take(&mut self.noise);
        let res = self
            .source
            .fill(stream, state.time_index, &mut noise, &mut self.ws)
            .and_then(|_| self.step_with(state, Some(&noise)));
        self.noise = noise;
        res
    }

    /// `steps` consecutive steps on one stream.
    pub fn advance(&mut self, state: &mut FieldState, stream: StreamId, steps: i64) -> Result<()> {
        for _ in 0..steps {
            self.step_stream(state, stream)?;
        }
        Ok(())
    }

    /// Runs from time 0 to the horizon, recording probes.
    pub fn run(&mut self, stream: StreamId, probes: &ProbeSpec) -> Result<(FieldState, TrajectoryProbe)> {
        let mut state = self.initial_state(0)?;
        let mut out = TrajectoryProbe {
            sites: probes.sites.clone(),
            ..Default::default()
        };
        let steps = self.cfg.steps();
        let record = |state: &FieldState, out: &mut TrajectoryProbe, k: i64| {
            if probes.record_steps.contains(&k) {
                out.times.push(state.time());
                out.values.push(probes.sites.iter().map(|&s| state.values[s]).collect());
            }
            if probes.snapshot_steps.contains(&k) {
                out.snapshots.push(state.clone());
            }
        };
        record(&state, &mut out, 0);
        for k in 1..=steps {
            self.step_stream(&mut state, stream)?;
            record(&state, &mut out, k);
        }
        Ok((state, out))
    }

    /// Solution started from the initial data at time `-K`, returned at time 0.
    pub fn run_shifted(&mut self, k: f64, stream: StreamId) -> Result<FieldState> {
        let n = steps_of("K", k, self.cfg.dt)?;
        let mut state = self.initial_state(-n)?;
        self.advance(&mut state, stream, n)?;
        Ok(state)
    }

    /// `(u_{K1}(0), u_{K2}(0))` driven by one noise: the `K2` path consumes
    /// exactly the shared slices on `[-K2, 0)`.
    pub fn run_coupled_pair(&mut self, window: CouplingWindow, base: StreamId) -> Result<(FieldState, FieldState)> {
        let (n1, n2) = window.steps(self.cfg.dt)?;
        let mut a = self.initial_state(-n1)?;
        let private = StreamId { window: CouplingWindow::PRIVATE, ..base };
        let shared = StreamId { window: CouplingWindow::SHARED, ..base };
        self.advance(&mut a, private, n1 - n2)?;
        let mut b = self.initial_state(-n2)?;
        if self.cfg.beta == 0.0 {
            self.advance(&mut a, shared, n2)?;
            self.advance(&mut b, shared, n2)?;
            return Ok((a, b));
        }
        let mut noise = std::mem::take(&mut self.noise);
        for i in -n2..0 {
            self.source.fill(shared, i, &mut noise, &mut self.ws)?;
            self.step_with(&mut a, Some(&noise))?;
            self.step_with(&mut b, Some(&noise))?;
        }
        self.noise = noise;
        Ok((a, b))
    }

    /// Finite-perturbation response `(u_pert - u_base) / eps_b` at `targets`.
    ///
    /// The perturbed path receives an extra raw increment `eps_b h^{-d}` at
    /// cell `bump_cell` on the step starting at time index `bump_step`, which
    /// is then smoothed with the rest of the slice. `targets` are
    /// `(time index, cell)` pairs with time index `> bump_step`.
    pub fn noise_response_probe(
        &mut self,
        stream: StreamId,
        bump_step: i64,
        bump_cell: usize,
        eps_b: f64,
        targets: &[(i64, usize)],
    ) -> Result<ProbeResponse> {
        if targets.iter().any(|(t, _)| *t <= bump_step) {
            return Err(Error::InvalidArgument("response targets must lie after the bump time".into()));
        }
        if !(eps_b.is_finite() && eps_b > 0.0) {
            return Err(Error::InvalidArgument(format!("bump amplitude {eps_b} must be positive")));
        }
        let end = targets.iter().map(|t| t.0).max().unwrap_or(bump_step + 1);
        let mut base = self.initial_state(0)?;
        self.advance(&mut base, stream, bump_step)?;
        let mut pert = base.clone();
        let mut response = vec![0.0; targets.len()];
        let mut cancellation = 0usize;
        let hd = self.lattice().cell_volume();
        let mut noise = std::mem::take(&mut self.noise);
        let mut bumped = vec![0.0; noise.len()];
        for i in bump_step..end {
            self.source.raw(stream, i, &mut noise);
            if i == bump_step {
                bumped.copy_from_slice(&noise);
                bumped[bump_cell] += eps_b / hd;
                self.source.smooth_in_place(&mut bumped, &mut self.ws)?;
            }
            self.source.smooth_in_place(&mut noise, &mut self.ws)?;
            self.step_with(&mut base, Some(&noise))?;
            let p = if i == bump_step { &bumped } else { &noise };
            self.step_with(&mut pert, Some(p))?;
            for (k, (t, cell)) in targets.iter().enumerate() {
                if *t == base.time_index {
                    let diff = pert.values[*cell] - base.values[*cell];
                    if diff.abs() < 1e-10 * base.values[*cell].abs() {
                        cancellation += 1;
                    }
                    response[k] = diff / eps_b;
                }
            }
        }
        self.noise = noise;
        Ok(ProbeResponse { response, cancellation })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResponse {
    pub response: Vec<f64>,
    /// Targets whose difference fell below `1e-10` of the base value.
    pub cancellation: usize,
}

/// `(2d+1)`-point Laplacian on the torus.
pub fn laplacian(lattice: &Lattice, u: &[f64], out: &mut [f64]) {
    let n = lattice.side();
    let d = lattice.dim();
    let inv_h2 = 1.0 / lattice.spacing().powi(2);
    let centre = 2.0 * d as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut stride = 1;
        for _ in 0..d {
            let j = (i / stride) % n;
            let up = if j + 1 == n { i + stride - n * stride } else { i + stride };
            let down = if j == 0 { i + (n - 1) * stride } else { i - stride };
            acc += u[up] + u[down];
            stride *= n;
        }
        *o = (acc - centre * u[i]) * inv_h2;
    }
}
