//! One-point marginal diagnostics for convergence in law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{Check, ExperimentReport, ReportRow};
use crate::stats::ks::{self, KsResult};

/// Replicated values of `u(t, x)` at one time and site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSample {
    pub t: f64,
    pub site: usize,
    pub values: Vec<f64>,
}

impl MarginalSample {
    pub fn new(t: f64, site: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("marginal sample has non-finite values".into()));
        }
        Ok(Self { t, site, values })
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn mean_and_se(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}

pub fn ks_distance(a: &MarginalSample, b: &MarginalSample) -> Result<KsResult> {
    ks::two_sample(&a.values, &b.values)
}

/// Minimum replica count accepted by [`stationarity_diagnostic`].
pub const MIN_STATIONARITY_REPLICAS: usize = 500;

/// KS distances between consecutive marginals.
///
/// `T_stat` is the earliest time from which every later consecutive pair is
/// below its 1% critical value. Stabilisation is flagged by the last pair.
pub fn stationarity_diagnostic(samples: &[MarginalSample], lambda: f64, se_multiplier: f64) -> Result<ExperimentReport> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    for s in samples {
        if s.count() < MIN_STATIONARITY_REPLICAS {
            return Err(Error::TooFewSamples { needed: MIN_STATIONARITY_REPLICAS, got: s.count() });
        }
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidArgument("marginal times must increase".into()));
    }
    let mut rep = ExperimentReport::new("stationarity", 0);
    let mut below = Vec::new();
    for w in samples.windows(2) {
        let r = ks_distance(&w[0], &w[1])?;
        rep.rows.push(ReportRow::new("ks", Some(w[1].t), vec![], r.statistic).with_reference(r.critical_1pct));
        rep.rows.push(ReportRow::new("ks_p_value", Some(w[1].t), vec![], r.p_value));
        below.push(!r.rejects());
    }
    let degenerate = samples.iter().all(|s| s.values.iter().all(|v| *v == s.values[0]));
    let mut first = below.len();
    while first > 0 && below[first - 1] {
        first -= 1;
    }
    let t_stat = if degenerate {
        0.0
    } else if first < below.len() {
        samples[first].t
    } else {
        f64::INFINITY
    };
    rep.checks.push(Check::flag("stabilized", *below.last().expect("at least one pair")));
    for s in samples {
        let (mean, se) = s.mean_and_se();
        rep.rows.push(ReportRow::new("mean", Some(s.t), vec![], mean).with_reference(lambda));
        rep.rows.push(ReportRow::new("mean_se", Some(s.t), vec![], se));
        rep.checks.push(Check::within_se(format!("mean_t{}", s.t), mean, lambda, se, se_multiplier));
    }
    rep.scalar("t_stat", t_stat);
    rep.scalar("replicas", samples[0].count() as f64);
    Ok(rep)
}
