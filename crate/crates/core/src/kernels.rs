//! Mollifier, covariance, heat kernel and the deterministic kernel checks.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::report::{Check, ExperimentReport, ReportRow};
use crate::spectral::{SpectralPlan, SpectralWorkspace};
use crate::stats::fit::{fit_power_law, largest_decade};
use crate::stats::summation::compensated_sum;
use crate::tolerances::Tolerances;

/// Samples of a normalised bump `phi` and of its continuum transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub lattice: Lattice,
    pub r0: f64,
    pub values: Vec<f64>,
    /// `h^d F[phi]` on the half spectrum (real because `phi` is even).
    pub fourier: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceKernel {
    pub lattice: Lattice,
    pub r0: f64,
    pub values: Vec<f64>,
    /// `R_hat = phi_hat^2` on the half spectrum.
    pub fourier: Vec<f64>,
    pub support_radius: f64,
}

impl CovarianceKernel {
    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    /// `h^d sum R`.
    pub fn integral(&self) -> f64 {
        self.lattice.cell_volume() * compensated_sum(self.values.iter().copied())
    }

    /// Cells within the support radius, as (index, signed offset) pairs.
    pub fn support_cells(&self) -> Vec<(usize, Vec<i64>)> {
        let r2 = self.support_radius * self.support_radius * (1.0 + 1e-12);
        let lat = &self.lattice;
        (0..lat.cell_count())
            .filter(|&i| lat.torus_norm_sq(i) <= r2)
            .map(|i| (i, lat.coords(i)))
            .collect()
    }
}

/// `phi(x) = c exp(-1/(1 - |x/r0|^2))` on `|x| < r0`, normalised so that `h^d sum phi = 1`.
pub fn bump_mollifier(plan: &SpectralPlan, r0: f64) -> Result<MollifierSpec> {
    let lat = plan.lattice();
    let h = lat.spacing();
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::InvalidMollifier(format!("radius {r0} must be positive")));
    }
    if 8.0 * r0 > lat.period() {
        return Err(Error::InvalidMollifier(format!(
            "radius {r0} too large for period {}: need 8 r0 <= L",
            lat.period()
        )));
    }
    if r0 < 2.0 * h {
        return Err(Error::InvalidMollifier(format!(
            "radius {r0} under-resolved by spacing {h}: need r0 >= 2h"
        )));
    }
    let mut values: Vec<f64> = lat
        .torus_norm_sq_table()
        .into_iter()
        .map(|r2| {
            let s = r2 / (r0 * r0);
            if s < 1.0 {
                (-1.0 / (1.0 - s)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let mass = lat.cell_volume() * compensated_sum(values.iter().copied());
    for v in values.iter_mut() {
        *v /= mass;
    }
    let mut ws = plan.workspace();
    plan.forward(&values, &mut ws)?;
    let hd = lat.cell_volume();
    let fourier = ws.spectrum.iter().map(|c| hd * c.re).collect();
    Ok(MollifierSpec {
        lattice: lat.clone(),
        r0,
        values,
        fourier,
    })
}

/// Lattice autocorrelation `R = phi * phi~` through `R_hat = phi_hat^2`.
pub fn covariance_of(plan: &SpectralPlan, phi: &MollifierSpec, tol: &Tolerances) -> Result<CovarianceKernel> {
    let lat = plan.lattice();
    if lat != &phi.lattice {
        return Err(Error::InvalidArgument("mollifier built on a different lattice".into()));
    }
    let fourier: Vec<f64> = phi.fourier.iter().map(|f| f * f).collect();
    let max = fourier.iter().cloned().fold(0.0, f64::max);
    let min = fourier.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol.spd * max {
        return Err(Error::Aliasing {
            min_fourier: min,
            tolerance: tol.spd * max,
        });
    }
    let hd = lat.cell_volume();
    let mut ws = plan.workspace();
    for (c, f) in ws.spectrum.iter_mut().zip(&fourier) {
        *c = (f / hd).into();
    }
    let mut raw = vec![0.0; lat.cell_count()];
    plan.inverse(&mut ws, &mut raw)?;
    let values = (0..raw.len())
        .map(|i| 0.5 * (raw[i] + raw[lat.reflected(i)]))
        .collect();
    Ok(CovarianceKernel {
        lattice: lat.clone(),
        r0: phi.r0,
        values,
        fourier,
        support_radius: 2.0 * phi.r0,
    })
}

/// Bound on the relative weight of periodic images of a Gaussian of variance
/// parameter `tau` (kernel `p(tau, .)`) evaluated within distance `rho` (per
/// axis) of the origin: `(sum_m exp(-(L^2 m^2 - 2 L rho |m|) / (4 tau)))^d - 1`.
pub fn image_ratio(period: f64, rho: f64, tau: f64, dim: usize) -> f64 {
    let mut tail = 0.0;
    for m in 1..=64 {
        let m = m as f64;
        let term = (-(period * period * m * m - 2.0 * period * rho * m) / (4.0 * tau)).exp();
        tail += 2.0 * term;
        if term < 1e-300 || term < tail * 1e-17 {
            break;
        }
    }
    (dim as f64 * tail.ln_1p()).exp_m1()
}

/// Largest `tau` with `image_ratio <= tol`.
pub fn max_image_tau(period: f64, rho: f64, dim: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, period * period);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if image_ratio(period, rho, mid, dim) <= tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest period with `image_ratio <= tol`.
pub fn required_period(rho: f64, tau: f64, dim: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = (2.0 * rho, 2.0 * rho + 100.0 * tau.sqrt() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if image_ratio(mid, rho, tau, dim) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn validate_images(lat: &Lattice, rho: f64, tau: f64, t: f64, tol: f64) -> Result<()> {
    let err = image_ratio(lat.period(), rho, tau, lat.dim());
    if err > tol {
        return Err(Error::Periodization {
            t,
            error: err,
            tolerance: tol,
            required_period: required_period(rho, tau, lat.dim(), tol),
        });
    }
    Ok(())
}

/// One-axis periodised heat kernel `sum_m (4 pi t)^{-1/2} exp(-(y + mL)^2 / 4t)` at `y = h k`.
pub fn heat_kernel_1d(t: f64, lattice: &Lattice) -> Vec<f64> {
    let n = lattice.side();
    let h = lattice.spacing();
    let l = lattice.period();
    let norm = (4.0 * PI * t).powf(-0.5);
    let reach = ((160.0 * t).sqrt() / l).ceil() as i64 + 1;
    (0..n)
        .map(|j| {
            let y = lattice.signed(j) as f64 * h;
            let mut s = 0.0;
            for m in -reach..=reach {
                let z = y + m as f64 * l;
                s += (-(z * z) / (4.0 * t)).exp();
            }
            norm * s
        })
        .collect()
}

/// Separable product `prod_i a(x_i)` of a one-axis profile.
pub fn separable_field(axis: &[f64], lattice: &Lattice) -> Vec<f64> {
    let n = lattice.side();
    (0..lattice.cell_count())
        .map(|idx| {
            let mut rest = idx;
            let mut acc = 1.0;
            for _ in 0..lattice.dim() {
                acc *= axis[rest % n];
                rest /= n;
            }
            acc
        })
        .collect()
}

/// Sampled periodised heat kernel `p(t, .)`.
pub fn heat_kernel_field(t: f64, lattice: &Lattice, tol: &Tolerances) -> Result<Vec<f64>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!("heat time {t} must be positive")));
    }
    let d = lattice.dim() as f64;
    let l = lattice.period();
    let outside = d * erfc(l / (4.0 * t.sqrt()));
    if outside > tol.periodization {
        return Err(Error::Periodization {
            t,
            error: outside,
            tolerance: tol.periodization,
            required_period: 4.0 * t.sqrt() * erfc_inv(tol.periodization / d),
        });
    }
    let axis = heat_kernel_1d(t, lattice);
    let mass1 = lattice.spacing() * compensated_sum(axis.iter().copied());
    let mass = mass1.powi(lattice.dim() as i32);
    if (mass - 1.0).abs() > tol.heat_mass {
        return Err(Error::UnderResolved {
            t,
            mass,
            tolerance: tol.heat_mass,
        });
    }
    Ok(separable_field(&axis, lattice))
}

/// Circular one-axis lattice convolution `h sum_y a(x - y) b(y)`.
pub fn convolve_1d(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|x| h * compensated_sum((0..n).map(|y| a[(x + n - y) % n] * b[y])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symbol {
    /// `|xi|^2`.
    Continuum,
    /// `(2/h^2) sum_i (1 - cos h xi_i)`.
    Discrete,
}

/// Invariants of a covariance kernel as a report: mass, symmetry, domination
/// by `R(0)`, support and spectral nonnegativity.
pub fn check_covariance(phi: &MollifierSpec, r: &CovarianceKernel, tol: &Tolerances) -> ExperimentReport {
    let lat = &r.lattice;
    let d = lat.dim();
    let hd = lat.cell_volume();
    let mut rep = ExperimentReport::new("covariance", d);
    let phi_mass = hd * compensated_sum(phi.values.iter().copied());
    let mass = r.integral();
    let origin = vec![0.0; d];
    rep.rows.push(ReportRow::new("phi_mass", None, origin.clone(), phi_mass).with_reference(1.0));
    rep.rows.push(ReportRow::new("r_integral", None, origin.clone(), mass).with_reference(1.0));
    let r0_direct = hd * compensated_sum(phi.values.iter().map(|v| v * v));
    rep.rows.push(ReportRow::new("r_origin", None, origin, r.at_origin()).with_reference(r0_direct));
    rep.checks.push(Check::within("phi_mass", (phi_mass - 1.0).abs(), None, Some(tol.mollifier_mass)));
    rep.checks.push(Check::within("r_integral", (mass - 1.0).abs(), None, Some(tol.covariance_mass)));
    rep.checks.push(Check::within(
        "r_origin",
        (r.at_origin() - r0_direct).abs() / r0_direct,
        None,
        Some(1e-12),
    ));
    let r2 = r.support_radius * r.support_radius * (1.0 + 1e-12);
    let (mut symmetric, mut dominated, mut outside) = (true, true, 0.0f64);
    for i in 0..lat.cell_count() {
        symmetric &= r.values[i].to_bits() == r.values[lat.reflected(i)].to_bits();
        dominated &= r.values[i].abs() <= r.at_origin();
        if lat.torus_norm_sq(i) > r2 {
            outside = outside.max(r.values[i].abs());
        }
    }
    rep.checks.push(Check::flag("symmetric", symmetric));
    rep.checks.push(Check::flag("origin_dominates", dominated));
    rep.checks.push(Check::within("outside_support", outside, None, Some(1e-12)));
    let max_hat = r.fourier.iter().cloned().fold(0.0, f64::max);
    let min_hat = r.fourier.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.checks.push(Check::within("spectrum_floor", min_hat / max_hat, Some(-tol.spd), None));
    rep.scalar("r_integral", mass);
    rep.scalar("r_origin", r.at_origin());
    rep
}

/// `p(t) * p(s) = p(t + s)` by direct lattice convolution, relative sup-norm.
///
/// The kernels are separable, so the d-dimensional convolution is the tensor
/// product of one-dimensional convolutions.
pub fn check_chapman_kolmogorov(lattice: &Lattice, pairs: &[(f64, f64)], tol: &Tolerances) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("chapman_kolmogorov", lattice.dim());
    let mut worst: f64 = 0.0;
    for &(t, s) in pairs {
        heat_kernel_field(t, lattice, tol)?;
        heat_kernel_field(s, lattice, tol)?;
        let target = heat_kernel_field(t + s, lattice, tol)?;
        let conv = separable_field(
            &convolve_1d(&heat_kernel_1d(t, lattice), &heat_kernel_1d(s, lattice), lattice.spacing()),
            lattice,
        );
        let sup = target.iter().cloned().fold(0.0, f64::max);
        let err = conv.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / sup;
        let mass = lattice.cell_volume() * compensated_sum(target.iter().copied());
        let origin = vec![0.0; lattice.dim()];
        rep.rows.push(ReportRow::new("ck_relative_error", Some(t + s), origin.clone(), err));
        rep.rows.push(ReportRow::new("heat_mass", Some(t + s), origin, mass).with_reference(1.0));
        rep.checks.push(Check::within(format!("heat_mass_t{}", t + s), (mass - 1.0).abs(), None, Some(tol.heat_mass)));
        worst = worst.max(err);
    }
    rep.checks.push(Check::within("relative_sup_error", worst, None, Some(tol.chapman_kolmogorov)));
    rep.scalar("relative_sup_error", worst);
    Ok(rep)
}

/// Cached multiplier table `exp(-t symbol)` on the half spectrum.
#[derive(Debug, Clone)]
pub struct HeatSemigroupPlan {
    spectral: Arc<SpectralPlan>,
    symbol: Symbol,
    t: f64,
    multiplier: Vec<f64>,
}

impl HeatSemigroupPlan {
    pub fn new(spectral: Arc<SpectralPlan>, symbol: Symbol, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!("semigroup time {t} must be >= 0")));
        }
        let table = match symbol {
            Symbol::Continuum => spectral.k2().to_vec(),
            Symbol::Discrete => spectral.discrete_symbol(),
        };
        let multiplier = table.into_iter().map(|s| (-t * s).exp()).collect();
        Ok(Self {
            spectral,
            symbol,
            t,
            multiplier,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn symbol(&self) -> Symbol {
        self.symbol
    }

    pub fn spectral(&self) -> &Arc<SpectralPlan> {
        &self.spectral
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64], ws: &mut SpectralWorkspace) -> Result<()> {
        self.spectral.filter(f, &self.multiplier, out, ws)
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; f.len()];
        let mut ws = self.spectral.workspace();
        self.apply_into(f, &mut out, &mut ws)?;
        Ok(out)
    }
}

/// `S_t f` with the cached plan when `t` matches, otherwise a fresh table.
pub fn semigroup_apply(plan: &HeatSemigroupPlan, t: f64, f: &[f64]) -> Result<Vec<f64>> {
    if t == plan.t {
        plan.apply(f)
    } else {
        HeatSemigroupPlan::new(plan.spectral.clone(), plan.symbol, t)?.apply(f)
    }
}

/// `(1/V) sum_k m(k) R_hat(k) cos(k.x)` for a radial multiplier `m(|k|^2)`.
fn spectral_pairing(plan: &SpectralPlan, r: &CovarianceKernel, x: &[f64], m: impl Fn(f64) -> f64) -> f64 {
    let lat = plan.lattice();
    let mut acc = crate::stats::summation::NeumaierSum::default();
    let zero = x.iter().all(|v| *v == 0.0);
    for (i, (k2, rh)) in plan.k2().iter().zip(&r.fourier).enumerate() {
        let phase = if zero {
            1.0
        } else {
            let k = plan.wavevector(i);
            k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().cos()
        };
        acc.add(plan.multiplicity(i) * m(*k2) * rh * phase);
    }
    acc.value() / lat.volume()
}

/// `I(t) = int int p(t,y1) p(t,y2) R(y1 - y2)` on the torus, from the spectral sum.
pub fn ppr_integral(plan: &SpectralPlan, r: &CovarianceKernel, t: f64) -> f64 {
    spectral_pairing(plan, r, &vec![0.0; plan.lattice().dim()], |k2| (-2.0 * t * k2).exp())
}

/// Fits the decay of `I(t)` and the constant in `I(t) <= C (1 ^ t^{-d/2})`.
pub fn check_ppr_bound(plan: &SpectralPlan, r: &CovarianceKernel, times: &[f64], tol: &Tolerances) -> Result<ExperimentReport> {
    let lat = plan.lattice();
    let d = lat.dim();
    if times.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: times.len() });
    }
    let (tmin, tmax) = (times[0], times[times.len() - 1]);
    if tmax < 100.0 * tmin {
        return Err(Error::InvalidArgument(format!(
            "times [{tmin}, {tmax}] must span at least two decades"
        )));
    }
    let mut rep = ExperimentReport::new("ppr_bound", d);
    let origin = vec![0.0; d];
    let mut points = Vec::new();
    let mut constant: f64 = 0.0;
    let mut nonneg = true;
    for &t in times {
        validate_images(lat, r.support_radius, 2.0 * t, t, tol.periodization)?;
        let v = ppr_integral(plan, r, t);
        let envelope = 1.0f64.min(t.powf(-(d as f64) / 2.0));
        constant = constant.max(v / envelope);
        nonneg &= v >= 0.0;
        rep.rows.push(ReportRow::new("ppr", Some(t), origin.clone(), v).with_reference(envelope));
        points.push((t, v));
    }
    let fit = fit_power_law(&largest_decade(&points))?;
    let target = -(d as f64) / 2.0;
    rep.checks.push(Check::within(
        "tail_slope",
        fit.exponent,
        Some(target - tol.ppr_slope),
        Some(target + tol.ppr_slope),
    ));
    rep.checks.push(Check::flag("nonnegative", nonneg));
    let t_small = 1e-4 * r.r0 * r.r0;
    let small = ppr_integral(plan, r, t_small) / r.at_origin();
    rep.rows.push(ReportRow::new("ppr_small_t", Some(t_small), origin, small));
    rep.checks.push(Check::within("small_t_ratio", small, Some(0.9), Some(1.0)));
    rep.scalar("slope", fit.exponent);
    rep.scalar("slope_se", fit.exponent_se);
    rep.scalar("fit_t_min", fit.fit_range.0);
    rep.scalar("fit_t_max", fit.fit_range.1);
    rep.scalar("envelope_constant", constant);
    Ok(rep)
}

/// Both sides of the Fourier representation of
/// `int int p(2t, x - y1) p(2t, -y2) R(y1 - y2) dy1 dy2` at lattice offset `x`.
pub fn fourier_identity_sides(
    plan: &SpectralPlan,
    r: &CovarianceKernel,
    t: f64,
    x: &[i64],
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    let lat = plan.lattice();
    if x.len() != lat.dim() {
        return Err(Error::ShapeMismatch { expected: lat.dim(), got: x.len() });
    }
    // direct: R paired with the separable convolution p(2t) * p(2t)
    heat_kernel_field(2.0 * t, lat, tol)?;
    let q = heat_kernel_1d(2.0 * t, lat);
    let a = convolve_1d(&q, &q, lat.spacing());
    let n = lat.side() as i64;
    let mut acc = crate::stats::summation::NeumaierSum::default();
    for (w, coords) in r.support_cells() {
        let mut prod = 1.0;
        for (xi, wi) in x.iter().zip(&coords) {
            prod *= a[(xi - wi).rem_euclid(n) as usize];
        }
        acc.add(r.values[w] * prod);
    }
    let lhs = lat.cell_volume() * acc.value();
    let xs: Vec<f64> = x.iter().map(|k| *k as f64 * lat.spacing()).collect();
    let rhs = spectral_pairing(plan, r, &xs, |k2| (-4.0 * t * k2).exp());
    Ok((lhs, rhs))
}

pub fn check_fourier_identity(
    plan: &SpectralPlan,
    r: &CovarianceKernel,
    t: f64,
    x: &[i64],
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let lat = plan.lattice();
    let (lhs, rhs) = fourier_identity_sides(plan, r, t, x, tol)?;
    let (lhs0, rhs0) = if x.iter().all(|k| *k == 0) {
        (lhs, rhs)
    } else {
        fourier_identity_sides(plan, r, t, &vec![0; lat.dim()], tol)?
    };
    let xs: Vec<f64> = x.iter().map(|k| *k as f64 * lat.spacing()).collect();
    let mut rep = ExperimentReport::new("fourier_identity", lat.dim());
    rep.rows.push(ReportRow::new("fourier_lhs", Some(t), xs.clone(), lhs).with_reference(rhs));
    let origin = vec![0.0; lat.dim()];
    rep.rows.push(ReportRow::new("fourier_lhs", Some(t), origin, lhs0).with_reference(rhs0));
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    rep.checks.push(Check::within("discrepancy_origin", rel(lhs0, rhs0), None, Some(tol.fourier_identity)));
    rep.checks.push(Check::within("discrepancy_offset", (lhs - rhs).abs() / rhs0.abs(), None, Some(tol.fourier_identity)));
    rep.checks.push(Check::flag("origin_dominates", rhs.abs() <= rhs0 * (1.0 + 1e-14)));
    rep.scalar("discrepancy", rel(lhs0, rhs0));
    Ok(rep)
}

/// Large-time decay of the spectral side at `x = 0`.
pub fn fourier_identity_decay(plan: &SpectralPlan, r: &CovarianceKernel, times: &[f64], tol: &Tolerances) -> Result<ExperimentReport> {
    let lat = plan.lattice();
    let d = lat.dim();
    let origin = vec![0.0; d];
    let mut rep = ExperimentReport::new("fourier_decay", d);
    let mut points = Vec::new();
    for &t in times {
        validate_images(lat, r.support_radius, 4.0 * t, t, tol.periodization)?;
        let v = spectral_pairing(plan, r, &origin, |k2| (-4.0 * t * k2).exp());
        rep.rows.push(ReportRow::new("fourier_rhs", Some(t), origin.clone(), v));
        points.push((t, v));
    }
    let fit = fit_power_law(&largest_decade(&points))?;
    let target = -(d as f64) / 2.0;
    rep.checks.push(Check::within(
        "tail_slope",
        fit.exponent,
        Some(target - tol.ppr_slope),
        Some(target + tol.ppr_slope),
    ));
    rep.scalar("slope", fit.exponent);
    rep.scalar("slope_se", fit.exponent_se);
    Ok(rep)
}

/// `int_T^inf p(2r, y) dr` in free space, `|y|^2 = y2`.
pub fn heat_time_tail(y2: f64, cut: f64, dim: usize) -> f64 {
    let s = dim as f64 / 2.0 - 1.0;
    let pref = (8.0 * PI).powf(-(dim as f64) / 2.0);
    let a = y2 / 8.0;
    if a < 1e-12 * cut {
        return pref * cut.powf(-s) / s;
    }
    pref * a.powf(-s) * gamma_lr(s, a / cut) * gamma(s)
}

/// `F~(x)` on every lattice cell: spectral time integral on `[0, cut]` plus the free-space tail.
fn f_tilde_field(plan: &SpectralPlan, r: &CovarianceKernel, cut: f64, cells: &[usize]) -> Result<Vec<f64>> {
    let lat = plan.lattice();
    let hd = lat.cell_volume();
    let mut ws = plan.workspace();
    for (i, c) in ws.spectrum.iter_mut().enumerate() {
        let k2 = plan.k2()[i];
        let w = if k2 == 0.0 {
            cut
        } else {
            -(-2.0 * cut * k2).exp_m1() / (2.0 * k2)
        };
        *c = (w * r.fourier[i] / hd).into();
    }
    let mut near = vec![0.0; lat.cell_count()];
    plan.inverse(&mut ws, &mut near)?;
    let support = r.support_cells();
    let h = lat.spacing();
    Ok(cells
        .iter()
        .map(|&c| {
            let xc = lat.coords(c);
            let tail = compensated_sum(support.iter().map(|(w, wc)| {
                let y2: f64 = xc
                    .iter()
                    .zip(wc)
                    .map(|(a, b)| ((a - b) as f64 * h).powi(2))
                    .sum();
                r.values[*w] * heat_time_tail(y2, cut, lat.dim())
            }));
            near[c] + hd * tail
        })
        .collect())
}

/// `F~(r e_1) = int_0^inf int int p(s, x - z1) p(s, z2) R(z1 - z2)` along the first axis.
pub fn f_tilde_profile(plan: &SpectralPlan, r: &CovarianceKernel, radii: &[f64], tol: &Tolerances) -> Result<ExperimentReport> {
    let lat = plan.lattice();
    let d = lat.dim();
    let h = lat.spacing();
    let mut cells = Vec::with_capacity(radii.len());
    for &rad in radii {
        if !(rad > r.support_radius && rad < lat.period() / 4.0) {
            return Err(Error::InvalidArgument(format!(
                "radius {rad} outside ({}, {})",
                r.support_radius,
                lat.period() / 4.0
            )));
        }
        let k = (rad / h).round();
        if (k * h - rad).abs() > 1e-9 * h {
            return Err(Error::InvalidArgument(format!("radius {rad} is not a multiple of h = {h}")));
        }
        cells.push(lat.axis_cell(0, k as i64));
    }
    let rho = radii.iter().cloned().fold(0.0, f64::max) + r.support_radius;
    let cut = max_image_tau(lat.period(), rho, d, tol.periodization) / 2.0;
    let full = f_tilde_field(plan, r, cut, &cells)?;
    let half = f_tilde_field(plan, r, cut / 2.0, &cells)?;
    let quad_err = full
        .iter()
        .zip(&half)
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max);
    if quad_err > tol.ftilde_quadrature {
        return Err(Error::Quadrature(format!(
            "F-tilde changes by {quad_err:e} when the time split moves from {cut} to {}",
            cut / 2.0
        )));
    }
    let mut rep = ExperimentReport::new("f_tilde", d);
    let mut points = Vec::new();
    for (&rad, &v) in radii.iter().zip(&full) {
        let mut x = vec![0.0; d];
        x[0] = rad;
        let envelope = rad.powf(2.0 - d as f64);
        rep.rows.push(ReportRow::new("f_tilde", None, x, v).with_reference(envelope));
        points.push((rad, v));
    }
    let fit = fit_power_law(&points)?;
    let target = 2.0 - d as f64;
    rep.checks.push(Check::within(
        "tail_slope",
        fit.exponent,
        Some(target - tol.ftilde_slope),
        Some(target + tol.ftilde_slope),
    ));
    let monotone = full
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + quad_err.max(1e-12)));
    rep.checks.push(Check::flag("monotone", monotone));
    rep.checks.push(Check::flag("positive", full.iter().all(|v| *v > 0.0)));
    rep.scalar("slope", fit.exponent);
    rep.scalar("slope_se", fit.exponent_se);
    rep.scalar("time_split", cut);
    rep.scalar("quadrature_error", quad_err);
    Ok(rep)
}
