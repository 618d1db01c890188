//! Report schema shared by the library, the CLI and the acceptance suite.
//!
//! Reports are deterministic: all containers are ordered, and every numeric
//! carries a provenance tag ("exact", "quadrature" or "mc" with a confidence
//! interval).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// A point estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            ci_low: value,
            ci_high: value,
        }
    }

    pub fn covers(&self, target: f64) -> bool {
        self.ci_low <= target && target <= self.ci_high
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// How a reported number was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Quadrature,
    Mc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Statistic {
    pub value: f64,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<[f64; 2]>,
}

impl Statistic {
    pub fn exact(value: f64) -> Self {
        Statistic {
            value,
            provenance: Provenance::Exact,
            ci: None,
        }
    }

    pub fn quadrature(value: f64) -> Self {
        Statistic {
            value,
            provenance: Provenance::Quadrature,
            ci: None,
        }
    }

    pub fn mc(est: Estimate) -> Self {
        Statistic {
            value: est.value,
            provenance: Provenance::Mc,
            ci: Some([est.ci_low, est.ci_high]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Fail => write!(f, "FAIL"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: Statistic,
    pub threshold: String,
    pub verdict: Verdict,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        statistic: Statistic,
        threshold: impl Into<String>,
        pass: bool,
    ) -> Self {
        Check {
            name: name.into(),
            statistic,
            threshold: threshold.into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(experiment: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        Report {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            seed,
            checks: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Minimal CSV writer for the small tables the experiments export.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}
