//! Canonical report tables. JSON is the source of truth; CSV is a fixed
//! column projection of the rows.

use std::cmp::Ordering;

use ncmart::Exponent;
use serde::Serialize;
use serde_json::Value;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 9] = [
    "section",
    "name",
    "p",
    "n",
    "value",
    "expected",
    "deviation",
    "provenance",
    "passed",
];

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub section: String,
    pub name: String,
    pub p: Option<Exponent>,
    pub n: Option<usize>,
    pub value: Option<f64>,
    pub expected: Option<f64>,
    pub deviation: Option<f64>,
    pub provenance: Option<String>,
    /// `None` for report-only rows.
    pub passed: Option<bool>,
}

impl Row {
    pub fn new(section: &str, name: impl Into<String>) -> Self {
        Self {
            section: section.into(),
            name: name.into(),
            p: None,
            n: None,
            value: None,
            expected: None,
            deviation: None,
            provenance: None,
            passed: None,
        }
    }

    pub fn p(mut self, p: Exponent) -> Self {
        self.p = Some(p);
        self
    }

    pub fn p_f64(self, p: f64) -> Self {
        self.p(Exponent::Finite(p))
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    /// Non-finite values are stored as `None` so JSON stays valid.
    pub fn value(mut self, v: f64) -> Self {
        self.value = v.is_finite().then_some(v);
        self
    }

    pub fn expected(mut self, expected: f64, provenance: &str) -> Self {
        self.expected = Some(expected);
        self.provenance = Some(provenance.into());
        if let Some(v) = self.value {
            self.deviation = Some((v - expected).abs());
        }
        self
    }

    pub fn passed(mut self, ok: bool) -> Self {
        self.passed = Some(ok);
        self
    }

    fn key_cmp(&self, other: &Row) -> Ordering {
        let p = |r: &Row| r.p.map(|e| e.value());
        self.section
            .cmp(&other.section)
            .then_with(|| self.name.cmp(&other.name))
            .then_with(|| match (p(self), p(other)) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                (a, b) => a.is_some().cmp(&b.is_some()),
            })
            .then_with(|| self.n.cmp(&other.n))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub budget: usize,
    pub passed: bool,
    pub rows: Vec<Row>,
    /// Offending instances for failed checks.
    pub failures: Vec<Value>,
}

impl Report {
    pub fn new(command: &str, seed: u64, budget: usize, mut rows: Vec<Row>, failures: Vec<Value>) -> Self {
        rows.sort_by(Row::key_cmp);
        let passed = failures.is_empty() && rows.iter().all(|r| r.passed != Some(false));
        Self {
            command: command.into(),
            seed,
            budget,
            passed,
            rows,
            failures,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.section.clone(),
                r.name.clone(),
                r.p.map(|p| p.to_string()).unwrap_or_default(),
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.value),
                opt(r.expected),
                opt(r.deviation),
                r.provenance.clone().unwrap_or_default(),
                r.passed.map(|b| b.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}
