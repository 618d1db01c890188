//! Experiment configuration: a flat, human-writable TOML file of
//! `key = value` sections that round-trips bit-exactly and hashes into
//! every report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{Generator, LqSpace, MatrixGenerator, SpectralGenerator};
use crate::simulate::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convolve,
    Bdg,
    Tail,
    Interp,
    Doob,
    DilationCheck,
    RenormCheck,
    CrProbe,
    Suite,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Convolve => "convolve",
            ExperimentKind::Bdg => "bdg",
            ExperimentKind::Tail => "tail",
            ExperimentKind::Interp => "interp",
            ExperimentKind::Doob => "doob",
            ExperimentKind::DilationCheck => "dilation-check",
            ExperimentKind::RenormCheck => "renorm-check",
            ExperimentKind::CrProbe => "cr-probe",
            ExperimentKind::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceSection {
    pub q: f64,
    pub d: usize,
}

impl Default for SpaceSection {
    fn default() -> Self {
        SpaceSection { q: 2.0, d: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Heat,
    Spectral,
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSection {
    pub kind: GeneratorKind,
    /// spectral: real and imaginary parts of the modes mu_k
    pub modes_re: Vec<f64>,
    pub modes_im: Vec<f64>,
    /// matrix: real rows of A
    pub rows: Vec<Vec<f64>>,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection {
            kind: GeneratorKind::Heat,
            modes_re: Vec::new(),
            modes_im: Vec::new(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessSection {
    /// noise dimension m
    pub noise_dim: usize,
    /// moment exponent used by bdg / doob / interp
    pub p: f64,
    /// norm-power exponent used by cr-probe
    pub r: f64,
}

impl Default for ProcessSection {
    fn default() -> Self {
        ProcessSection {
            noise_dim: 1,
            p: 2.0,
            r: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub t_end: f64,
    pub steps: usize,
    pub refinements: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            t_end: 1.0,
            steps: 64,
            refinements: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub paths: usize,
    pub seed: u64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            paths: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// dilation identity residual tolerance
    pub residual_tol: f64,
    /// dilation-route vs direct-route relative path gap
    pub route_gap_tol: f64,
    /// contraction ratio slack
    pub contraction_tol: f64,
    /// CI multiplier for inequality acceptance
    pub ci_slack: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            residual_tol: 1e-8,
            route_gap_tol: 1e-6,
            contraction_tol: 1e-8,
            ci_slack: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub process: ProcessSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub checks: CheckSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    /// Hex SHA-256 of the canonical serialization; recorded in every report.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml().as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.space.q >= 1.0) || !self.space.q.is_finite() {
            return Err(Error::Config("space: q must be >= 1".into()));
        }
        if self.space.d == 0 || self.space.d > 64 {
            return Err(Error::Config("space: d must be in 1..=64".into()));
        }
        if !(self.grid.t_end > 0.0) {
            return Err(Error::Config("grid: t_end must be positive".into()));
        }
        if self.grid.steps == 0 {
            return Err(Error::Config("grid: steps must be positive".into()));
        }
        if self.sampling.paths == 0 || self.sampling.paths > 100_000 {
            return Err(Error::Config("sampling: paths must be in 1..=100000".into()));
        }
        if self.process.noise_dim == 0 {
            return Err(Error::Config("process: noise_dim must be positive".into()));
        }
        if !(self.process.p > 0.0) {
            return Err(Error::Config("process: p must be positive".into()));
        }
        match self.generator.kind {
            GeneratorKind::Heat => {}
            GeneratorKind::Spectral => {
                if self.generator.modes_re.is_empty()
                    || self.generator.modes_re.len() != self.generator.modes_im.len()
                {
                    return Err(Error::Config(
                        "generator: modes_re and modes_im must be nonempty and equal length"
                            .into(),
                    ));
                }
            }
            GeneratorKind::Matrix => {
                if self.generator.rows.is_empty() {
                    return Err(Error::Config("generator: rows must be nonempty".into()));
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<LqSpace> {
        LqSpace::new(self.space.q, self.space.d)
    }

    pub fn build_generator(&self) -> Result<Generator> {
        match self.generator.kind {
            GeneratorKind::Heat => Ok(Generator::Spectral(SpectralGenerator::heat(
                self.space.d,
                self.space.q,
            )?)),
            GeneratorKind::Spectral => {
                let modes: Vec<C64> = self
                    .generator
                    .modes_re
                    .iter()
                    .zip(&self.generator.modes_im)
                    .map(|(&r, &i)| C64::new(r, i))
                    .collect();
                Ok(Generator::Spectral(SpectralGenerator::new(
                    modes,
                    self.space.q,
                )?))
            }
            GeneratorKind::Matrix => Ok(Generator::Matrix(MatrixGenerator::from_real_rows(
                &self.generator.rows,
                self.space.q,
            )?)),
        }
    }

    pub fn build_grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.grid.t_end, self.grid.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[experiment]
kind = "bdg"

[space]
q = 4.0
d = 8

[process]
noise_dim = 2
p = 4.0

[grid]
t_end = 1.0
steps = 32

[sampling]
paths = 20000
seed = 7
"#;

    #[test]
    fn toml_roundtrip_is_bit_exact() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = ExperimentConfig::from_toml("[experiment]\nkind = \"suite\"\n").unwrap();
        assert_eq!(cfg.space.q, 2.0);
        assert_eq!(cfg.sampling.paths, 10_000);
        assert_eq!(cfg.checks.ci_slack, 3.0);
        assert!(matches!(cfg.generator.kind, GeneratorKind::Heat));
    }

    #[test]
    fn validation_names_the_offending_field() {
        let bad = "[experiment]\nkind = \"bdg\"\n[space]\nq = 0.5\n";
        let err = ExperimentConfig::from_toml(bad).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("q must be >= 1"), "message: {msg}");

        let bad = "[experiment]\nkind = \"bdg\"\n[sampling]\npaths = 0\n";
        let err = ExperimentConfig::from_toml(bad).unwrap_err();
        assert!(format!("{err}").contains("paths"));

        let bad = "[experiment]\nkind = \"bdg\"\n[space]\nbogus = 1\n";
        assert!(ExperimentConfig::from_toml(bad).is_err());
    }

    #[test]
    fn builders_produce_working_objects() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let gen = cfg.build_generator().unwrap();
        assert_eq!(gen.dim(), 8);
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.n_steps(), 32);

        let spectral = r#"
[experiment]
kind = "convolve"
[space]
q = 2.0
d = 2
[generator]
kind = "spectral"
modes_re = [1.0, 4.0]
modes_im = [0.5, -1.0]
"#;
        let cfg = ExperimentConfig::from_toml(spectral).unwrap();
        assert!(cfg.build_generator().unwrap().as_spectral().is_some());

        let matrix = r#"
[experiment]
kind = "renorm-check"
[space]
q = 2.0
d = 2
[generator]
kind = "matrix"
rows = [[-1.0, 0.5], [0.0, -2.0]]
"#;
        let cfg = ExperimentConfig::from_toml(matrix).unwrap();
        assert!(matches!(cfg.build_generator().unwrap(), Generator::Matrix(_)));
    }
}
