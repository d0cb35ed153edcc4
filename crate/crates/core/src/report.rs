//! Structured experiment results with JSON and CSV serialisation.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One sampled quantity at `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    pub t: Option<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub reference: Option<f64>,
    pub ratio: Option<f64>,
}

impl ReportRow {
    pub fn new(quantity: impl Into<String>, t: Option<f64>, x: Vec<f64>, value: f64) -> Self {
        Self {
            quantity: quantity.into(),
            t,
            x,
            value,
            reference: None,
            ratio: None,
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self.ratio = Some(self.value / reference);
        self
    }
}

/// A pass/fail verdict. When `se` is present the bounds are `k * se` wide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub se: Option<f64>,
    pub k: Option<f64>,
    pub passed: bool,
}

impl Check {
    /// `lower <= value <= upper`, either bound optional.
    pub fn within(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = value.is_finite()
            && lower.is_none_or(|l| value >= l)
            && upper.is_none_or(|u| value <= u);
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            se: None,
            k: None,
            passed,
        }
    }

    /// `|value - target| <= k * se`.
    pub fn within_se(name: impl Into<String>, value: f64, target: f64, se: f64, k: f64) -> Self {
        let mut c = Self::within(name, value, Some(target - k * se), Some(target + k * se));
        c.se = Some(se);
        c.k = Some(k);
        c
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            lower: Some(1.0),
            upper: None,
            se: None,
            k: None,
            passed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_hash: String,
    pub dim: usize,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, dim: usize) -> Self {
        Self {
            experiment: experiment.into(),
            dim,
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.scalars.insert(key.into(), value);
    }

    /// Absorbs another report's rows, checks and scalars under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: ExperimentReport) {
        self.rows.extend(other.rows);
        self.checks.extend(other.checks.into_iter().map(|mut c| {
            c.name = format!("{prefix}.{}", c.name);
            c
        }));
        for (k, v) in other.scalars {
            self.scalars.insert(format!("{prefix}.{k}"), v);
        }
        self.notes.extend(other.notes);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only serialisable data")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["quantity".to_string(), "t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        header.extend(["value", "reference", "ratio"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut cells = vec![r.quantity.clone(), opt(r.t)];
            for i in 0..self.dim {
                cells.push(r.x.get(i).map(|v| num(*v)).unwrap_or_default());
            }
            cells.push(num(r.value));
            cells.push(opt(r.reference));
            cells.push(opt(r.ratio));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Checks as CSV, so verdicts can be recomputed from the bounds.
    pub fn write_checks_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "name,value,lower,upper,se,k,passed")?;
        for c in &self.checks {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.name,
                num(c.value),
                opt(c.lower),
                opt(c.upper),
                opt(c.se),
                opt(c.k),
                c.passed
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Shortest round-trip decimal for a double.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_column_per_axis() {
        let mut rep = ExperimentReport::new("demo", 3);
        rep.rows.push(ReportRow::new("I", Some(0.5), vec![0.0, 0.25, -0.5], 0.1).with_reference(0.2));
        let csv = rep.csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "quantity,t,x1,x2,x3,value,reference,ratio");
        assert_eq!(lines.next().unwrap(), "I,0.5,0.0,0.25,-0.5,0.1,0.2,0.5");
    }

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1 + 0.2, 1e-300, 6.02214076e23, -0.0, 1.0 / 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn verdicts() {
        assert!(Check::within_se("m", 1.02, 1.0, 0.01, 3.0).passed);
        assert!(!Check::within_se("m", 1.05, 1.0, 0.01, 3.0).passed);
        assert!(!Check::within("nan", f64::NAN, None, None).passed);
    }
}
