//! Deterministic verification reports.
//!
//! A report is a CSV table with one row per check plus `#`-prefixed header
//! lines carrying the version, config hash, seed and config echo, and a
//! trailing summary line. Floats are written in shortest round-trip
//! scientific notation, so `parse(serialize(r))` reproduces `r` exactly.

use sha2::{Digest, Sha256};

use crate::error::{CollarError, Result};

pub const REPORT_MAGIC: &str = "# collar-report v1";
pub const CSV_HEADER: &str = "check_id,t,x1,x2,mode,a,value,bound,pass";
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Where a check attained its worst value.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub mode: String,
    pub a: f64,
    pub value: f64,
    pub bound: f64,
}

impl Witness {
    pub fn new(t: f64, x: &[f64], mode: impl Into<String>, a: f64, value: f64, bound: f64) -> Self {
        Witness {
            t,
            x1: x.first().copied().unwrap_or(0.0),
            x2: x.get(1).copied().unwrap_or(0.0),
            mode: mode.into(),
            a,
            value,
            bound,
        }
    }

    /// Witness carrying only a measured value against a bound.
    pub fn scalar(mode: impl Into<String>, value: f64, bound: f64) -> Self {
        Witness::new(f64::NAN, &[], mode, f64::NAN, value, bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    pub witness: Witness,
}

impl Check {
    pub fn new(id: impl Into<String>, pass: bool, witness: Witness) -> Self {
        Check { id: id.into(), pass, witness }
    }

    /// The measured constant of the check (the witness value).
    pub fn measured(&self) -> f64 {
        self.witness.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config_echo: Vec<String>,
    pub checks: Vec<Check>,
}

pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

fn parse_f(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| CollarError::Parse(format!("bad float '{s}'")))
}

impl VerificationReport {
    pub fn new(checks: Vec<Check>) -> Self {
        VerificationReport {
            version: format!("collar {}", env!("CARGO_PKG_VERSION")),
            config_hash: config_hash(""),
            seed: DEFAULT_SEED,
            config_echo: Vec::new(),
            checks,
        }
    }

    /// Stamps the report with the run configuration it was produced under.
    pub fn with_config(mut self, echo: &str, seed: u64) -> Self {
        self.config_hash = config_hash(echo);
        self.config_echo = echo.lines().map(clean).collect();
        self.seed = seed;
        self
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn summary_line(&self) -> String {
        let passed = self.checks.iter().filter(|c| c.pass).count();
        format!(
            "summary: checks={} passed={} failed={} status={}",
            self.checks.len(),
            passed,
            self.checks.len() - passed,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_MAGIC);
        out.push('\n');
        out.push_str(&format!("# version={}\n", clean(&self.version)));
        out.push_str(&format!("# config_hash={}\n", self.config_hash));
        out.push_str(&format!("# seed={}\n", self.seed));
        for line in &self.config_echo {
            out.push_str(&format!("# config: {line}\n"));
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            let w = &c.witness;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                clean(&c.id),
                fmt_f(w.t),
                fmt_f(w.x1),
                fmt_f(w.x2),
                clean(&w.mode),
                fmt_f(w.a),
                fmt_f(w.value),
                fmt_f(w.bound),
                c.pass
            ));
        }
        out.push_str(&format!("# {}\n", self.summary_line()));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_MAGIC) {
            return Err(CollarError::Parse("missing report header".into()));
        }
        let mut report = VerificationReport::new(Vec::new());
        let mut in_table = false;
        for line in lines {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some(v) = rest.strip_prefix("version=") {
                    report.version = v.to_string();
                } else if let Some(v) = rest.strip_prefix("config_hash=") {
                    report.config_hash = v.to_string();
                } else if let Some(v) = rest.strip_prefix("seed=") {
                    report.seed = v.parse().map_err(|_| CollarError::Parse(format!("bad seed '{v}'")))?;
                } else if let Some(v) = rest.strip_prefix("config: ") {
                    report.config_echo.push(v.to_string());
                } else if rest.starts_with("summary:") {
                    if rest != report.summary_line() {
                        return Err(CollarError::Parse("summary line does not match rows".into()));
                    }
                } else {
                    return Err(CollarError::Parse(format!("unknown header line '{line}'")));
                }
                continue;
            }
            if line == CSV_HEADER {
                in_table = true;
                continue;
            }
            if !in_table {
                return Err(CollarError::Parse(format!("row before table header: '{line}'")));
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(CollarError::Parse(format!("expected 9 columns, got {}", cols.len())));
            }
            let pass = match cols[8] {
                "true" => true,
                "false" => false,
                other => return Err(CollarError::Parse(format!("bad pass flag '{other}'"))),
            };
            report.checks.push(Check {
                id: cols[0].to_string(),
                pass,
                witness: Witness {
                    t: parse_f(cols[1])?,
                    x1: parse_f(cols[2])?,
                    x2: parse_f(cols[3])?,
                    mode: cols[4].to_string(),
                    a: parse_f(cols[5])?,
                    value: parse_f(cols[6])?,
                    bound: parse_f(cols[7])?,
                },
            });
        }
        Ok(report)
    }
}

/// Concatenates reports produced under the same configuration.
pub fn merge_reports(reports: &[VerificationReport]) -> Result<VerificationReport> {
    let first = reports
        .first()
        .ok_or_else(|| CollarError::InvalidParameter("nothing to merge".into()))?;
    let mut merged = first.clone();
    for r in &reports[1..] {
        if r.config_hash != first.config_hash {
            return Err(CollarError::ConfigMismatch {
                left: first.config_hash.clone(),
                right: r.config_hash.clone(),
            });
        }
        merged.checks.extend(r.checks.iter().cloned());
    }
    Ok(merged)
}
