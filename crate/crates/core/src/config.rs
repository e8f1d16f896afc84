//! Run configuration: a single JSON document describing problem, sampling,
//! method, per-grade settings, and outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::problems::ProblemDef;
use crate::sampling::SampleCounts;
use crate::trainer::{GradeConfig, Stage2Config};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sgl")]
    Sgl,
    #[serde(rename = "ts-mgdl")]
    TsMgdl,
}

/// One experiment: everything needed to reproduce a training run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub samples: SampleCounts,
    /// For `ts-mgdl`: the grade sequence. For `sgl`: exactly one entry
    /// describing the whole network.
    pub grades: Vec<GradeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<Stage2Config>,
    /// Evaluation grid shape, time levels first.
    pub test_grid: Vec<usize>,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let hash = hex_digest(&bytes);
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::config("config file is not valid UTF-8"))?;
        Ok((Self::from_json(&text)?, hash))
    }

    /// Build the problem with any overrides applied.
    pub fn build_problem(&self) -> Result<ProblemDef> {
        let mut p = ProblemDef::by_name(&self.problem)?;
        if let Some(nu) = self.viscosity {
            p = p.with_viscosity(nu)?;
        }
        if let Some(t) = self.t_final {
            p = p.with_t_final(t)?;
        }
        Ok(p)
    }

    /// Structural validation with field paths in every message.
    pub fn validate(&self) -> Result<()> {
        let problem = ProblemDef::by_name(&self.problem)?;
        if self.grades.is_empty() {
            return Err(Error::config("grades: at least one grade is required"));
        }
        for (i, g) in self.grades.iter().enumerate() {
            if g.hidden.is_empty() {
                return Err(Error::config(format!("grades[{i}].hidden: must not be empty")));
            }
            if g.hidden.iter().any(|&w| w == 0) {
                return Err(Error::config(format!("grades[{i}].hidden: zero width")));
            }
            if g.epochs == 0 {
                return Err(Error::config(format!("grades[{i}].epochs: must be at least 1")));
            }
            if g.learning_rate < 0.0 || g.learning_rate.is_nan() {
                return Err(Error::config(format!("grades[{i}].learning_rate: must be >= 0")));
            }
            if g.decay_rate < 0.0 {
                return Err(Error::config(format!("grades[{i}].decay_rate: must be >= 0")));
            }
        }
        match self.method {
            Method::Sgl => {
                if self.grades.len() != 1 {
                    return Err(Error::config(
                        "grades: method \"sgl\" takes exactly one entry (the whole network)",
                    ));
                }
                if self.stage2.is_some() {
                    return Err(Error::config(
                        "stage2: not allowed with method \"sgl\"",
                    ));
                }
            }
            Method::TsMgdl => {
                if let Some(s2) = &self.stage2 {
                    let k_last = self.grades.last().unwrap().hidden.len();
                    let total: usize = self.grades.iter().map(|g| g.hidden.len()).sum();
                    if s2.k <= k_last {
                        return Err(Error::config(format!(
                            "stage2.k: {} does not exceed the final grade's {k_last} hidden \
                             layers; the unfrozen tail must reach past the final grade",
                            s2.k
                        )));
                    }
                    if s2.k > total {
                        return Err(Error::config(format!(
                            "stage2.k: {} exceeds the {total} hidden layers of the composition",
                            s2.k
                        )));
                    }
                    if s2.decay_rate < 0.0 {
                        return Err(Error::config("stage2.decay_rate: must be >= 0"));
                    }
                }
            }
        }
        if self.samples.collocation == 0 || self.samples.initial == 0 || self.samples.boundary == 0
        {
            return Err(Error::config("samples: all three counts must be positive"));
        }
        if self.test_grid.len() != 1 + problem.spatial_dim {
            return Err(Error::config(format!(
                "test_grid: expected {} axes for {} (time first), got {}",
                1 + problem.spatial_dim,
                self.problem,
                self.test_grid.len()
            )));
        }
        if self.test_grid.iter().any(|&n| n < 2) {
            return Err(Error::config("test_grid: every axis needs at least 2 levels"));
        }
        if let Some(nu) = self.viscosity {
            if nu <= 0.0 {
                return Err(Error::config("viscosity: must be positive"));
            }
        }
        if let Some(t) = self.t_final {
            if t <= 0.0 {
                return Err(Error::config("t_final: must be positive"));
            }
        }
        Ok(())
    }

    /// Replace architecture, epochs, and sampling with the desk-scale
    /// preset so a run completes in minutes on a CPU.
    pub fn apply_desk_scale(&mut self) -> Result<()> {
        let problem = ProblemDef::by_name(&self.problem)?;
        let (counts, grid) = match problem.spatial_dim {
            1 => (
                SampleCounts { collocation: 2000, initial: 120, boundary: 80 },
                vec![100, 256],
            ),
            2 => (
                SampleCounts { collocation: 2000, initial: 200, boundary: 400 },
                vec![32, 15, 15],
            ),
            _ => (
                SampleCounts { collocation: 2000, initial: 200, boundary: 600 },
                vec![33, 7, 7, 7],
            ),
        };
        self.samples = counts;
        self.test_grid = grid;
        match self.method {
            Method::TsMgdl => {
                self.grades = vec![
                    GradeConfig { hidden: vec![64, 64], learning_rate: 1e-3, decay_rate: 1e-4, epochs: 3000 },
                    GradeConfig { hidden: vec![64, 64], learning_rate: 3e-4, decay_rate: 1e-4, epochs: 5000 },
                    GradeConfig { hidden: vec![64, 64], learning_rate: 2e-4, decay_rate: 1e-4, epochs: 5000 },
                ];
                self.stage2 = Some(Stage2Config {
                    k: 5,
                    learning_rate: 3e-4,
                    decay_rate: 1e-4,
                    epochs: 10_000,
                });
            }
            Method::Sgl => {
                // matched final architecture and total epoch budget
                self.grades = vec![GradeConfig {
                    hidden: vec![64, 64, 64, 64, 64, 64],
                    learning_rate: 1e-3,
                    decay_rate: 1e-4,
                    epochs: 23_000,
                }];
                self.stage2 = None;
            }
        }
        self.validate()
    }

    /// The desk-scale 1D two-stage preset used by the acceptance suite.
    pub fn desk_1d(seed: u64) -> Self {
        let mut cfg = Self {
            problem: "burgers1d".into(),
            method: Method::TsMgdl,
            seed,
            samples: SampleCounts { collocation: 2000, initial: 120, boundary: 80 },
            grades: Vec::new(),
            stage2: None,
            test_grid: vec![100, 256],
            deterministic: true,
            threads: None,
            viscosity: None,
            t_final: None,
        };
        cfg.apply_desk_scale().unwrap();
        cfg.seed = seed;
        cfg
    }

    /// The matched single-grade baseline of [`RunConfig::desk_1d`].
    pub fn desk_1d_sgl(seed: u64) -> Self {
        let mut cfg = Self::desk_1d(seed);
        cfg.method = Method::Sgl;
        cfg.apply_desk_scale().unwrap();
        cfg.seed = seed;
        cfg
    }
}

/// Lowercase hex SHA-256.
pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "problem": "burgers1d",
            "method": "ts-mgdl",
            "seed": 0,
            "samples": { "collocation": 100, "initial": 10, "boundary": 8 },
            "grades": [
                { "hidden": [8, 8], "learning_rate": 1e-3, "decay_rate": 1e-4, "epochs": 10 },
                { "hidden": [6, 6], "learning_rate": 3e-4, "decay_rate": 1e-4, "epochs": 10 }
            ],
            "stage2": { "k": 3, "learning_rate": 3e-4, "decay_rate": 1e-4, "epochs": 10 },
            "test_grid": [5, 16]
        })
    }

    #[test]
    fn roundtrip_parses_to_equal_structure() {
        let cfg = RunConfig::from_json(&base_json().to_string()).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let again = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg, again);
        assert!(cfg.deterministic, "deterministic defaults to true");
    }

    #[test]
    fn malformed_k_names_the_precondition() {
        let mut v = base_json();
        v["stage2"]["k"] = serde_json::json!(2); // k_last = 2, needs k > 2
        let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("stage2.k"), "{err}");
        assert!(err.contains("reach past the final grade"), "{err}");
    }

    #[test]
    fn sgl_forbids_stage2_and_multiple_grades() {
        let mut v = base_json();
        v["method"] = serde_json::json!("sgl");
        let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("sgl"), "{err}");
        v["grades"] = serde_json::json!([
            { "hidden": [8, 8], "learning_rate": 1e-3, "decay_rate": 1e-4, "epochs": 10 }
        ]);
        let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("stage2"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let mut v = base_json();
        v["grdaes"] = serde_json::json!([]);
        let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("grdaes"), "{err}");
    }

    #[test]
    fn grid_shape_must_match_problem() {
        let mut v = base_json();
        v["test_grid"] = serde_json::json!([5, 16, 16]);
        let err = RunConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("test_grid"), "{err}");
    }

    #[test]
    fn desk_preset_is_valid_and_matches_the_documented_shape() {
        let cfg = RunConfig::desk_1d(3);
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.samples.collocation, 2000);
        assert_eq!(cfg.grades.len(), 3);
        assert!(cfg.grades.iter().all(|g| g.hidden == vec![64, 64]));
        assert_eq!(
            cfg.grades.iter().map(|g| g.epochs).collect::<Vec<_>>(),
            vec![3000, 5000, 5000]
        );
        let s2 = cfg.stage2.as_ref().unwrap();
        assert_eq!((s2.k, s2.epochs), (5, 10_000));
        let sgl = RunConfig::desk_1d_sgl(3);
        assert_eq!(sgl.grades[0].hidden, vec![64; 6]);
        assert_eq!(sgl.grades[0].epochs, 23_000);
    }

    #[test]
    fn hash_is_stable_per_bytes() {
        assert_eq!(hex_digest(b"abc").len(), 64);
        assert_eq!(hex_digest(b"abc"), hex_digest(b"abc"));
        assert_ne!(hex_digest(b"abc"), hex_digest(b"abd"));
    }
}
