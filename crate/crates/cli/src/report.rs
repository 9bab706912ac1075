//! Experiment reports: result tables plus named pass/fail checks.
//!
//! A check passes exactly when its margin is non-negative, and the process
//! exit code is 0 exactly when every check passes. Reports are deterministic
//! for a given configuration and seed; the wall-clock time is only embedded on
//! request, so repeated runs produce byte-identical output by default.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Version of the report layout; bumped on any incompatible change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes the table as CSV with a header row; numbers carry 12
    /// significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(csv_cell)).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_g12(n.as_f64().expect("f64")),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// `printf("%.12g")`: 12 significant digits, trailing zeros dropped, and
/// scientific notation outside `1e-4 ≤ |x| < 1e12`.
pub fn format_g12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let fixed = format!("{:.*}", (DIGITS - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", strip_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// How a check compares its value to the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    /// `value ≤ threshold`.
    #[serde(rename = "<=")]
    AtMost,
    /// `value ≥ threshold`.
    #[serde(rename = ">=")]
    AtLeast,
    /// `|value − reference| ≤ threshold`.
    #[serde(rename = "|value-reference|<=")]
    Within,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The library invariant this check instantiates.
    pub invariant: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub relation: Relation,
    pub threshold: f64,
    /// Non-negative exactly when the check passes.
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, invariant: &str, value: f64, threshold: f64) -> Self {
        Self::build(name, invariant, value, None, Relation::AtMost, threshold, threshold - value)
    }

    pub fn at_least(name: &str, invariant: &str, value: f64, threshold: f64) -> Self {
        Self::build(name, invariant, value, None, Relation::AtLeast, threshold, value - threshold)
    }

    pub fn within(name: &str, invariant: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let margin = tolerance - (value - reference).abs();
        Self::build(name, invariant, value, Some(reference), Relation::Within, tolerance, margin)
    }

    fn build(
        name: &str,
        invariant: &str,
        value: f64,
        reference: Option<f64>,
        relation: Relation,
        threshold: f64,
        margin: f64,
    ) -> Self {
        // NaN margins fail.
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        Check {
            name: name.into(),
            invariant: invariant.into(),
            value,
            reference,
            relation,
            threshold,
            margin,
            pass: margin >= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub library_version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    /// Headline scalar results.
    pub summary: serde_json::Map<String, Value>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub all_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").into(),
            experiment: config.experiment.name().into(),
            config: config.clone(),
            summary: serde_json::Map::new(),
            tables: Vec::new(),
            checks: Vec::new(),
            all_pass: true,
            wall_clock_seconds: None,
        }
    }

    pub fn summarize(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn check(&mut self, c: Check) {
        self.all_pass &= c.pass;
        self.checks.push(c);
    }

    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().all(|c| c.margin >= 0.0) {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Writes the main (first) table as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        self.tables.first().ok_or_else(|| CliError::Output("report has no table".into()))?.write_csv(out)
    }
}

/// A JSON number cell.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_matches_printf() {
        // Reference strings from C's printf("%.12g").
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456.789, "123456.789"),
            (1e-5, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (0.00012345, "0.00012345"),
            (1e12, "1e+12"),
            (999999999999.0, "999999999999"),
            (-0.75, "-0.75"),
            (std::f64::consts::PI, "3.14159265359"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g12(x), want, "{x}");
        }
    }

    #[test]
    fn margins_decide_pass() {
        assert!(Check::at_most("a", "i", 0.01, 0.02).pass);
        assert!(!Check::at_least("a", "i", 0.01, 0.02).pass);
        let w = Check::within("a", "i", 0.23977, 0.234, 0.001);
        assert!(!w.pass && w.margin < 0.0);
        assert!(!Check::at_most("a", "i", f64::NAN, 1.0).pass);
    }

    #[test]
    fn csv_quotes_and_formats() {
        let mut t = Table::new("t", &["n", "x", "label"]);
        t.push(vec![Value::from(3u64), num(1.0 / 3.0), Value::from("a,b")]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,x,label\n3,0.333333333333,\"a,b\"\n");
    }
}
