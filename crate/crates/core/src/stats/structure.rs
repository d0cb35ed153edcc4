//! Spatial increment moments `S_2n(r) = E |u(x + r e) - u(x)|^{2n}`.

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::report::{Check, ExperimentReport, ReportRow};
use crate::stats::fit::fit_power_law;

pub const MIN_SNAPSHOTS: usize = 100;

/// Per-replica `S_2n` at each offset (in lattice steps), averaged over all sites and axes.
pub fn replica_structure(lattice: &Lattice, field: &[f64], order: u32, offsets: &[i64]) -> Vec<f64> {
    let d = lattice.dim();
    offsets
        .iter()
        .map(|&k| {
            let mut acc = 0.0;
            for axis in 0..d {
                let mut shift = vec![0; d];
                shift[axis] = k;
                let table = lattice.shift_table(&shift);
                for (x, &y) in table.iter().enumerate() {
                    acc += (field[y] - field[x]).abs().powi(order as i32);
                }
            }
            acc / (d * lattice.cell_count()) as f64
        })
        .collect()
}

/// Fits the small-offset slope of `S_order` from per-replica profiles.
///
/// Passes when the slope is at least `min_slope`; a field with `S = 0` is a trivial pass.
pub fn structure_function(
    lattice: &Lattice,
    per_replica: &[Vec<f64>],
    order: u32,
    offsets: &[i64],
    max_offset: f64,
    min_slope: f64,
) -> Result<ExperimentReport> {
    if per_replica.len() < MIN_SNAPSHOTS {
        return Err(Error::TooFewSamples { needed: MIN_SNAPSHOTS, got: per_replica.len() });
    }
    let h = lattice.spacing();
    for w in offsets.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument("offsets must increase".into()));
        }
    }
    if offsets.len() < 3 || offsets[0] < 1 || offsets[offsets.len() - 1] as f64 * h > max_offset * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "need at least three offsets within [h, {max_offset}]"
        )));
    }
    let n = per_replica.len() as f64;
    let mut rep = ExperimentReport::new("structure_function", lattice.dim());
    let mut points = Vec::new();
    let mut ses = Vec::new();
    for (j, &k) in offsets.iter().enumerate() {
        let mean = per_replica.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = per_replica.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let mut x = vec![0.0; lattice.dim()];
        x[0] = k as f64 * h;
        rep.rows.push(ReportRow::new(format!("s{order}"), None, x.clone(), mean));
        rep.rows.push(ReportRow::new(format!("s{order}_se"), None, x, se));
        points.push((k as f64 * h, mean));
        ses.push(se);
    }
    if points.iter().all(|p| p.1 == 0.0) {
        rep.notes.push("structure function identically zero: trivial pass".into());
        rep.checks.push(Check::flag("trivial", true));
        return Ok(rep);
    }
    let fit = fit_power_law(&points)?;
    rep.checks.push(Check::within("slope", fit.exponent, Some(min_slope), None));
    let monotone = points
        .windows(2)
        .zip(ses.windows(2))
        .all(|(p, s)| p[1].1 >= p[0].1 - 2.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    rep.checks.push(Check::flag("monotone_2se", monotone));
    rep.scalar("slope", fit.exponent);
    rep.scalar("slope_se", fit.exponent_se);
    rep.scalar("fit_r_min", fit.fit_range.0);
    rep.scalar("fit_r_max", fit.fit_range.1);
    Ok(rep)
}
