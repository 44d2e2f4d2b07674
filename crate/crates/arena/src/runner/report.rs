//! Tab-separated reports with `#` header lines.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

pub const COLUMNS: &str = "metric\tparty\tvalue\tci-low\tci-high";

/// Printed in every header: all times are whole rounds.
pub const ROUND_NOTE: &str =
    "times are in rounds; multiply by the block interval (600 s or 15 s) for wall-clock figures, which also omit propagation delay";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(Ratio<i128>),
    Approx(f64),
    Flag(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Approx(x) => write!(f, "{x:?}"),
            Value::Flag(b) => write!(f, "{b}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl FromStr for Value {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((n, d)) = s.split_once('/') {
            if let (Ok(n), Ok(d)) = (n.parse::<i128>(), d.parse::<i128>()) {
                if d == 0 {
                    return Err(format!("`{s}` has a zero denominator"));
                }
                return Ok(Value::Exact(Ratio::new(n, d)));
            }
        }
        Ok(match s {
            "true" => Value::Flag(true),
            "false" => Value::Flag(false),
            _ => s.parse::<f64>().map_or_else(|_| Value::Text(s.to_string()), Value::Approx),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub metric: String,
    pub party: String,
    pub value: Value,
    pub ci: Option<(f64, f64)>,
}

impl Record {
    pub fn new(metric: impl Into<String>, party: impl Into<String>, value: Value) -> Self {
        Record { metric: clean(metric.into()), party: clean(party.into()), value, ci: None }
    }

    /// A mean with a symmetric interval.
    pub fn estimate(metric: impl Into<String>, party: impl Into<String>, mean: f64, half_width: f64) -> Self {
        Record { ci: Some((mean - half_width, mean + half_width)), ..Record::new(metric, party, Value::Approx(mean)) }
    }
}

/// Tabs and newlines would break the record grammar.
fn clean(s: String) -> String {
    let s = s.replace(['\t', '\n', '\r'], " ");
    if s.is_empty() {
        "-".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Ordered `key: value` header entries.
    pub header: Vec<(String, String)>,
    pub records: Vec<Record>,
    /// Free-form summary lines, printed after the records.
    pub summary: Vec<String>,
}

impl Report {
    pub fn new(command: &str, digest: &str, seed: u64) -> Self {
        let header = vec![
            ("tool".into(), format!("arena {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), command.into()),
            ("scenario-sha256".into(), digest.into()),
            ("seed".into(), seed.to_string()),
            ("note".into(), ROUND_NOTE.into()),
        ];
        Report { header, records: Vec::new(), summary: Vec::new() }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn find(&self, metric: &str, party: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.metric == metric && r.party == party)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(COLUMNS);
        out.push('\n');
        for r in &self.records {
            let (lo, hi) = r.ci.map_or(("-".to_string(), "-".to_string()), |(l, h)| (format!("{l:?}"), format!("{h:?}")));
            out.push_str(&format!("{}\t{}\t{}\t{lo}\t{hi}\n", r.metric, r.party, r.value));
        }
        for s in &self.summary {
            out.push_str(&format!("## {s}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Report, ReportError> {
        let mut rep = Report { header: Vec::new(), records: Vec::new(), summary: Vec::new() };
        let mut seen_columns = false;
        for (i, line) in text.lines().enumerate() {
            let bad = |m: &str| ReportError { line: i + 1, message: m.to_string() };
            if let Some(s) = line.strip_prefix("## ") {
                rep.summary.push(s.to_string());
            } else if let Some(h) = line.strip_prefix("# ") {
                let (k, v) = h.split_once(": ").ok_or_else(|| bad("header needs `key: value`"))?;
                rep.header.push((k.to_string(), v.to_string()));
            } else if line == COLUMNS {
                seen_columns = true;
            } else {
                if !seen_columns {
                    return Err(bad("record before the column line"));
                }
                let cols: Vec<&str> = line.split('\t').collect();
                let [metric, party, value, lo, hi] = cols[..] else { return Err(bad("record needs five columns")) };
                let ci = match (lo, hi) {
                    ("-", "-") => None,
                    _ => Some((lo.parse().map_err(|_| bad("bad ci-low"))?, hi.parse().map_err(|_| bad("bad ci-high"))?)),
                };
                let value = value.parse().map_err(|e: String| bad(&e))?;
                rep.records.push(Record { metric: metric.into(), party: party.into(), value, ci });
            }
        }
        Ok(rep)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("report line {line}: {message}")]
pub struct ReportError {
    pub line: usize,
    pub message: String,
}
