//! Experiment configuration: a TOML document whose unknown keys are errors.
//!
//! Global lattice and model settings live in `[lattice]` and `[model]`; each
//! experiment section may override the grid (`grid = { side = 16, ... }`),
//! `dt`, `beta` and, where it matters, `sigma`.

use std::path::Path;

use ewlab_core::solver::{Scheme, SigmaSpec, SolverConfig};
use ewlab_core::stats::sigma_g::TestFunction;
use ewlab_core::{Lattice, Symbol, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub kernel_checks: KernelChecksSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub exactness: ExactnessSection,
    #[serde(default)]
    pub schemes: SchemesSection,
    #[serde(default)]
    pub moments: MomentsSection,
    #[serde(default)]
    pub stationarity: StationaritySection,
    #[serde(default)]
    pub structure: StructureSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default = "EwSection::first_chaos")]
    pub first_chaos: EwSection,
    #[serde(default)]
    pub ew: EwSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; all cores when absent. Does not affect results.
    pub workers: Option<usize>,
    pub out: Option<String>,
    /// Largest allowed projected number of cell updates per command.
    pub budget: u64,
    /// Write one raw noise slice and final fields in the binary dump format.
    pub dumps: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 20_240_917,
            workers: None,
            out: None,
            budget: 20_000_000_000_000,
            dumps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub dim: usize,
    pub side: usize,
    pub spacing: f64,
    pub r0: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            dim: 3,
            side: 64,
            spacing: 0.25,
            r0: 0.5,
        }
    }
}

/// Partial grid override inside an experiment section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    pub side: Option<usize>,
    pub spacing: Option<f64>,
    pub r0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub beta: f64,
    pub sigma: SigmaSpec,
    pub scheme: Scheme,
    pub symbol: Symbol,
    /// Time step; `h^2 / 12` when absent.
    pub dt: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            beta: 0.1,
            sigma: SigmaSpec::Linear,
            scheme: Scheme::SpectralExponential,
            symbol: Symbol::Continuum,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelChecksSection {
    pub grid: Option<GridOverride>,
    pub ck_pairs: Vec<[f64; 2]>,
    pub ppr_points: usize,
    pub fourier_times: Vec<f64>,
    pub fourier_offset: Vec<i64>,
    /// Side of the larger lattice used for the large-time Fourier decay.
    pub decay_side: usize,
    pub decay_points: usize,
    /// F-tilde radii; every multiple of h in `(2 r0, L/4)` when empty.
    pub ftilde_radii: Vec<f64>,
}

impl Default for KernelChecksSection {
    fn default() -> Self {
        Self {
            grid: None,
            ck_pairs: vec![[0.1, 0.1], [0.05, 0.2], [0.3, 0.15]],
            ppr_points: 21,
            fourier_times: vec![0.05, 0.2],
            fourier_offset: vec![3, -1, 2],
            decay_side: 128,
            decay_points: 11,
            ftilde_radii: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub slices: usize,
    pub lags: Vec<Vec<i64>>,
    /// Slices compared across two stream ids for independence.
    pub cross_slices: usize,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            grid: None,
            dt: None,
            slices: 10_000,
            lags: default_lags(),
            cross_slices: 200,
        }
    }
}

fn default_lags() -> Vec<Vec<i64>> {
    [
        [0, 0, 0],
        [1, 0, 0],
        [2, 0, 0],
        [3, 0, 0],
        [4, 0, 0],
        [5, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
        [0, 2, 0],
        [0, 0, 3],
        [1, 1, 0],
        [1, 1, 1],
        [2, 1, 0],
        [2, 2, 0],
        [2, 2, 1],
        [3, 2, 0],
        [0, 3, 3],
        [6, 0, 0],
        [4, 4, 0],
        [8, 0, 0],
    ]
    .iter()
    .map(|a| a.to_vec())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactnessSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub horizon: f64,
    /// Lattice for the coupled-pair and fluctuation parts.
    pub small_grid: Option<GridOverride>,
    pub pairs: usize,
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
}

impl Default for ExactnessSection {
    fn default() -> Self {
        Self {
            grid: None,
            dt: None,
            horizon: 0.5,
            small_grid: Some(GridOverride {
                side: Some(32),
                spacing: Some(1.0),
                r0: Some(2.0),
            }),
            pairs: 100,
            k1: 2.0,
            k2: 1.0,
            eps: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemesSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    pub horizon: f64,
    /// Spectral symbol for the comparison; the discrete one matches the FD Laplacian.
    pub symbol: Symbol,
}

impl Default for SchemesSection {
    fn default() -> Self {
        Self {
            grid: None,
            dt: None,
            beta: None,
            horizon: 0.5,
            symbol: Symbol::Discrete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    pub horizon: f64,
    pub replicas: usize,
    pub record_every: f64,
}

impl Default for MomentsSection {
    fn default() -> Self {
        Self {
            grid: None,
            dt: None,
            beta: None,
            horizon: 20.0,
            replicas: 1000,
            record_every: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaritySection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    /// Increasing marginal times; consecutive entries should double.
    pub times: Vec<f64>,
    pub replicas: usize,
    /// Start time `-K` of the shifted-equation law check; the largest time below the horizon when absent.
    pub shifted_k: Option<f64>,
}

impl Default for StationaritySection {
    fn default() -> Self {
        Self {
            grid: None,
            dt: None,
            beta: None,
            times: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            replicas: 2000,
            shifted_k: Some(4.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    pub horizon: f64,
    pub replicas: usize,
    /// Offsets in cells along each axis.
    pub offsets: Vec<i64>,
}

impl Default for StructureSection {
    fn default() -> Self {
        Self {
            // offsets must sit well inside the correlation length 2 r0
            grid: Some(GridOverride {
                side: Some(32),
                spacing: Some(0.25),
                r0: Some(1.0),
            }),
            dt: None,
            beta: None,
            horizon: 2.0,
            replicas: 100,
            offsets: vec![2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    pub k2: Vec<f64>,
    /// `K1 = ratio * K2`.
    pub ratio: f64,
    pub pairs: usize,
    /// Sites averaged per pair: every `site_stride`-th cell along each axis.
    pub site_stride: usize,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            // K1 up to 32 needs a box wider than the heat kernel spread sqrt(2 K1)
            grid: Some(GridOverride {
                side: Some(32),
                spacing: Some(1.0),
                r0: Some(2.0),
            }),
            dt: None,
            beta: None,
            k2: vec![2.0, 4.0, 8.0, 16.0],
            ratio: 2.0,
            pairs: 500,
            site_stride: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EwSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<SigmaSpec>,
    /// Dyadic scales; X is evaluated for each from one run per replica.
    pub eps: Vec<f64>,
    /// Scale at which the variance and normality checks are made.
    pub check_eps: f64,
    /// Macroscopic time.
    pub t: f64,
    pub replicas: usize,
    pub g: TestFunction,
    /// Microscopic times of the stationarity diagnostic at the origin.
    pub stationarity_times: Vec<f64>,
    /// Compare against the first-chaos value `beta^2 sigma(1)^2 Sigma_g` instead of `nu_sigma`.
    pub first_chaos: bool,
    /// Stride of the spatial average in the nu_sigma estimate.
    pub nu_stride: usize,
}

impl Default for EwSection {
    fn default() -> Self {
        Self {
            grid: Some(GridOverride {
                side: Some(32),
                spacing: Some(1.0),
                r0: Some(2.0),
            }),
            dt: None,
            beta: None,
            sigma: None,
            eps: vec![0.5, 0.25],
            check_eps: 0.25,
            t: 1.0,
            replicas: 2000,
            g: TestFunction::Gaussian { width: 1.0 },
            stationarity_times: vec![2.0, 4.0, 8.0, 16.0],
            first_chaos: false,
            nu_stride: 2,
        }
    }
}

impl EwSection {
    fn first_chaos() -> Self {
        Self {
            beta: Some(0.02),
            sigma: Some(SigmaSpec::Sine),
            replicas: 1000,
            first_chaos: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub grid: Option<GridOverride>,
    pub dt: Option<f64>,
    pub beta: Option<f64>,
    /// Time `r` of the bump.
    pub bump_time: f64,
    /// Elapsed time `t - r` at which responses are read.
    pub lag: f64,
    pub amplitude: f64,
    pub replicas: usize,
    /// Targets `z + k h e_1` for `k = 0..=max_offset`.
    pub max_offset: i64,
    /// Offsets count as resolved while `p(t - r, x - z) >= floor * p(t - r, 0)`.
    pub resolved_floor: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            grid: Some(GridOverride {
                side: Some(32),
                spacing: Some(0.5),
                r0: Some(1.0),
            }),
            dt: None,
            beta: None,
            bump_time: 0.5,
            lag: 2.0,
            amplitude: 1e-3,
            replicas: 50,
            max_offset: 14,
            resolved_floor: 1e-2,
        }
    }
}

/// Lattice, mollifier radius and step shared by the jobs of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dim: usize,
    pub side: usize,
    pub spacing: f64,
    pub r0: f64,
}

impl Geometry {
    pub fn lattice(&self) -> Result<Lattice, CliError> {
        Ok(Lattice::new(self.dim, self.side, self.spacing)?)
    }
}

/// Model parameters after section overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub geometry: Geometry,
    pub dt: f64,
    pub beta: f64,
    pub sigma: SigmaSpec,
    pub scheme: Scheme,
    pub symbol: Symbol,
}

impl Model {
    pub fn solver_config(&self, horizon: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.scheme, self.dt, self.beta, horizon);
        cfg.symbol = self.symbol;
        cfg.blow_up = 1e150;
        cfg
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Parses `text` over the defaults: each key replaces the section default,
    /// and `grid` tables replace only the fields they name.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let user: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        let mut merged = toml::Table::try_from(Self::default()).map_err(|e| bad(&e))?;
        for (name, section) in &user {
            match (merged.get_mut(name), section) {
                (Some(toml::Value::Table(base)), toml::Value::Table(over)) => {
                    for (key, value) in over {
                        match (base.get_mut(key), value) {
                            (Some(toml::Value::Table(g)), toml::Value::Table(o)) if key == "grid" => {
                                g.extend(o.clone());
                            }
                            _ => {
                                base.insert(key.clone(), value.clone());
                            }
                        }
                    }
                }
                _ => {
                    merged.insert(name.clone(), section.clone());
                }
            }
        }
        let cfg: Self = toml::Value::Table(merged).try_into().map_err(|e| bad(&e))?;
        // keys the typed form drops silently, e.g. fields next to a unit `kind`
        let back = toml::Table::try_from(&cfg).map_err(|e| bad(&e))?;
        unused_key(&user, &back, "").map_or(Ok(cfg), |k| Err(CliError::Config(format!("unknown key `{k}`"))))
    }

    pub fn geometry(&self, grid: Option<GridOverride>) -> Geometry {
        let g = grid.unwrap_or_default();
        Geometry {
            dim: self.lattice.dim,
            side: g.side.unwrap_or(self.lattice.side),
            spacing: g.spacing.unwrap_or(self.lattice.spacing),
            r0: g.r0.unwrap_or(self.lattice.r0),
        }
    }

    pub fn model(&self, grid: Option<GridOverride>, dt: Option<f64>, beta: Option<f64>) -> Model {
        let geometry = self.geometry(grid);
        Model {
            geometry,
            dt: dt
                .or(self.model.dt)
                .unwrap_or(geometry.spacing * geometry.spacing / 12.0),
            beta: beta.unwrap_or(self.model.beta),
            sigma: self.model.sigma,
            scheme: self.model.scheme,
            symbol: self.model.symbol,
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring settings that cannot change results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.workers = None;
        c.run.out = None;
        c.run.budget = 0;
        c.run.dumps = false;
        let json = serde_json::to_string(&c).expect("config is serialisable");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn unused_key(user: &toml::Table, typed: &toml::Table, prefix: &str) -> Option<String> {
    user.iter().find_map(|(k, v)| {
        let path = format!("{prefix}{k}");
        match (v, typed.get(k)) {
            (_, None) => Some(path),
            (toml::Value::Table(u), Some(toml::Value::Table(t))) => unused_key(u, t, &format!("{path}.")),
            _ => None,
        }
    })
}

impl Default for Config {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            lattice: LatticeSection::default(),
            model: ModelSection::default(),
            tolerances: Tolerances::default(),
            kernel_checks: KernelChecksSection::default(),
            noise: NoiseSection::default(),
            exactness: ExactnessSection::default(),
            schemes: SchemesSection::default(),
            moments: MomentsSection::default(),
            stationarity: StationaritySection::default(),
            structure: StructureSection::default(),
            coupling: CouplingSection::default(),
            first_chaos: EwSection::first_chaos(),
            ew: EwSection::default(),
            probe: ProbeSection::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c.lattice.side, 64);
        assert_eq!(c.first_chaos.beta, Some(0.02));
        assert_eq!(c.noise.lags.len(), 20);
        let m = c.model(None, None, None);
        assert_eq!(m.dt, 0.25 * 0.25 / 12.0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(Config::from_toml("[lattice]\nsides = 8\n").is_err());
        assert!(Config::from_toml("[bogus]\n").is_err());
        assert!(Config::from_toml("[tolerances]\nppr = 1\n").is_err());
        assert!(Config::from_toml("[model]\nsigma = { kind = \"linear\", a = 1 }\n").is_err());
    }

    #[test]
    fn section_keys_merge_over_section_defaults() {
        let c = Config::from_toml("[first_chaos]\nreplicas = 60\n[ew]\ngrid = { side = 16 }\n").unwrap();
        assert_eq!(c.first_chaos.replicas, 60);
        assert!(c.first_chaos.first_chaos);
        assert_eq!(c.first_chaos.beta, Some(0.02));
        let g = c.ew.grid.unwrap();
        assert_eq!((g.side, g.spacing, g.r0), (Some(16), Some(1.0), Some(2.0)));
    }

    #[test]
    fn overrides_and_hash() {
        let c = Config::from_toml(
            "[model]\nbeta = 0.2\nsigma = { kind = \"affine\", a = 0.5, b = 2.0 }\n[probe]\ngrid = { side = 16 }\n",
        )
        .unwrap();
        let m = c.model(c.probe.grid, None, None);
        assert_eq!(m.geometry.side, 16);
        assert_eq!(m.geometry.spacing, 0.5);
        assert_eq!(m.beta, 0.2);
        let mut d = c.clone();
        d.run.workers = Some(3);
        assert_eq!(c.hash(), d.hash());
        d.run.seed += 1;
        assert_ne!(c.hash(), d.hash());
    }
}
