//! Task configuration files.
//!
//! Configs are JSON documents with an explicit `schema_version`. Unknown
//! fields are errors, not warnings: a config that parses today must mean
//! exactly the same thing to every future build that accepts it.
//!
//! Every task (except `world`) carries a top-level `seed`, the master seed
//! for all of its sampling; the `--seed` flag overrides it. Worlds come in
//! via [`WorldSource`]: a saved document, a named preset, or a full inline
//! config — exactly one.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use latentlab::{build_world, BankEstimator, DtJudge, World, WorldConfig};

use crate::artifacts::sha256_hex;
use crate::error::{io_error, CliError};

pub const SCHEMA_VERSION: u32 = 1;

/// Read a config file: verify the schema version, then parse the task
/// document strictly. Returns the document, the file's SHA-256 (recorded in
/// the manifest), and the directory its relative paths resolve against.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, String, PathBuf), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_error(&format!("reading config {}", path.display()), e))?;

    // Check the version before strict parsing, so a config from a newer
    // schema fails with "wrong version", not with a misleading field error.
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: Option<u32>,
    }
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match probe.schema_version {
        None => {
            return Err(CliError::Config(format!(
                "{}: missing schema_version (this build reads version {SCHEMA_VERSION})",
                path.display()
            )))
        }
        Some(v) if v != SCHEMA_VERSION => {
            return Err(CliError::Config(format!(
                "{}: schema_version {v}, but this build reads version {SCHEMA_VERSION}",
                path.display()
            )))
        }
        Some(_) => {}
    }

    let doc: T = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = match path.parent() {
        Some(p) if p != Path::new("") => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((doc, sha256_hex(text.as_bytes()), base))
}

/// Where a task's world comes from. Exactly one field must be set.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSource {
    /// Path to a saved world document, relative to the config file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Named preset: `biased_nonlinear`, `unbiased_linear`, or
    /// `unbiased_nonlinear`.
    #[serde(default)]
    pub preset: Option<String>,
    /// Build seed for `preset`.
    #[serde(default)]
    pub preset_seed: u64,
    /// Full inline world config.
    #[serde(default)]
    pub config: Option<WorldConfig>,
}

impl WorldSource {
    /// Load or build the world. `reseed` (from `--seed` on the `world` task)
    /// replaces the build seed; a world loaded from a file is already fixed,
    /// so reseeding one is an error rather than a silent no-op.
    pub fn realize(&self, base: &Path, reseed: Option<u64>) -> Result<World, CliError> {
        let given =
            usize::from(self.path.is_some()) + usize::from(self.preset.is_some())
                + usize::from(self.config.is_some());
        if given != 1 {
            return Err(CliError::Config(format!(
                "world source needs exactly one of path, preset, config; got {given}"
            )));
        }

        if let Some(rel) = &self.path {
            if reseed.is_some() {
                return Err(CliError::Config(
                    "a world loaded from a file cannot be reseeded; rebuild it instead".into(),
                ));
            }
            let full = base.join(rel);
            let text = fs::read_to_string(&full)
                .map_err(|e| io_error(&format!("reading world {}", full.display()), e))?;
            return Ok(latentlab::serialize::world_from_json(&text)?);
        }

        let config = if let Some(name) = &self.preset {
            let seed = reseed.unwrap_or(self.preset_seed);
            match name.as_str() {
                "biased_nonlinear" => WorldConfig::biased_nonlinear(seed),
                "unbiased_linear" => WorldConfig::unbiased_linear(seed),
                "unbiased_nonlinear" => WorldConfig::unbiased_nonlinear(seed),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown world preset {other:?}; expected biased_nonlinear, \
                         unbiased_linear, or unbiased_nonlinear"
                    )))
                }
            }
        } else {
            let mut config = self.config.clone().expect("counted above");
            if let Some(seed) = reseed {
                config.seed = seed;
            }
            config
        };
        Ok(build_world(&config)?)
    }
}

/// How the attribute-level direction bank is estimated.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSpec {
    #[serde(default = "default_estimator")]
    pub estimator: BankEstimator,
    /// Prior draws behind each attribute-level direction.
    #[serde(default = "default_direction_samples")]
    pub direction_samples: usize,
}

impl Default for BankSpec {
    fn default() -> Self {
        BankSpec {
            estimator: default_estimator(),
            direction_samples: default_direction_samples(),
        }
    }
}

fn default_estimator() -> BankEstimator {
    BankEstimator::Averaging
}
fn default_direction_samples() -> usize {
    500
}
fn default_lambda1() -> f64 {
    0.75
}
fn default_step_size() -> f64 {
    0.1
}
fn default_max_steps() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_sample_count() -> usize {
    200
}
fn default_judge() -> DtJudge {
    DtJudge::EvalClassifiers
}
fn default_lambdas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_p_levels() -> Vec<f64> {
    vec![0.6, 0.7, 0.8, 0.9]
}
fn default_one() -> f64 {
    1.0
}

/// `world`: build a world and save it with its accuracy report.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldTask {
    #[allow(dead_code)] // checked in load(), kept so strict parsing accepts it
    pub schema_version: u32,
    pub world: WorldSource,
}

/// `edit`: walk one trajectory from one prior draw.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditTask {
    #[allow(dead_code)]
    pub schema_version: u32,
    pub world: WorldSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bank: BankSpec,
    pub edit: EditSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditSpec {
    pub primal: String,
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_true")]
    pub incremental: bool,
    /// Explicit target for the primal attribute; omitted flips the starting
    /// label.
    #[serde(default)]
    pub target_label: Option<bool>,
    /// Index of the prior draw to edit under the master seed.
    #[serde(default)]
    pub start_index: u64,
}

/// `dt`: trace one transformation/disentanglement curve.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtTask {
    #[allow(dead_code)]
    pub schema_version: u32,
    pub world: WorldSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bank: BankSpec,
    pub dt: DtSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtSpec {
    pub primal: String,
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_true")]
    pub incremental: bool,
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    /// Who labels the samples: `eval_classifiers` (default) or `oracle`.
    #[serde(default = "default_judge")]
    pub judge: DtJudge,
}

/// `grid`: sweep both blend factors over a lambda list and score every cell
/// by its mean curve area over all ordered attribute pairs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTask {
    #[allow(dead_code)]
    pub schema_version: u32,
    pub world: WorldSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bank: BankSpec,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_true")]
    pub incremental: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambdas: default_lambdas(),
            sample_count: default_sample_count(),
            step_size: default_step_size(),
            max_steps: default_max_steps(),
            incremental: default_true(),
        }
    }
}

/// `ablate-incremental`: the same curve twice, with and without per-step
/// direction updates, on identical samples.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateTask {
    #[allow(dead_code)]
    pub schema_version: u32,
    pub world: WorldSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bank: BankSpec,
    pub ablate: AblateSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateSpec {
    pub primal: String,
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    /// Transformation-accuracy levels where the two curves are compared.
    #[serde(default = "default_p_levels")]
    pub p_levels: Vec<f64>,
}

/// `compare-attr-level`: averaging versus boundary-normal estimators.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareTask {
    #[allow(dead_code)]
    pub schema_version: u32,
    pub world: WorldSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub compare: CompareSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default = "default_direction_samples")]
    pub direction_samples: usize,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_true")]
    pub incremental: bool,
    /// Blend factors for the comparison curves; pure attribute-level by
    /// default, so the estimators are measured undiluted.
    #[serde(default = "default_one")]
    pub lambda1: f64,
    #[serde(default = "default_one")]
    pub lambda2: f64,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec {
            direction_samples: default_direction_samples(),
            sample_count: default_sample_count(),
            step_size: default_step_size(),
            max_steps: default_max_steps(),
            incremental: default_true(),
            lambda1: default_one(),
            lambda2: default_one(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("task.json");
        fs::write(&path, text).expect("write config");
        (dir, path)
    }

    #[test]
    fn minimal_dt_config_fills_defaults() {
        let (_dir, path) = write_config(
            r#"{
                "schema_version": 1,
                "world": { "preset": "unbiased_linear" },
                "dt": { "primal": "age", "conditions": ["gender"] }
            }"#,
        );
        let (task, sha, _base): (DtTask, _, _) = load(&path).expect("parses");
        assert_eq!(task.seed, 0, "seed defaults to 0");
        assert_eq!(task.dt.sample_count, 200);
        assert_eq!(task.dt.lambda1, 0.75);
        assert_eq!(task.dt.lambda2, 0.0);
        assert_eq!(task.dt.judge, DtJudge::EvalClassifiers);
        assert_eq!(task.bank.estimator, BankEstimator::Averaging);
        assert_eq!(sha.len(), 64, "sha256 of the raw file");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let (_dir, path) = write_config(
            r#"{
                "schema_version": 1,
                "world": { "preset": "unbiased_linear" },
                "dt": { "primal": "age", "speed": 11 }
            }"#,
        );
        let err = load::<DtTask>(&path).expect_err("unknown field must fail");
        assert_eq!(err.exit_code(), 2, "config error");
        assert!(err.message().contains("speed"), "names the offender: {}", err.message());
    }

    #[test]
    fn missing_and_wrong_schema_versions_are_refused() {
        let (_dir, none) = write_config(r#"{ "world": { "preset": "unbiased_linear" } }"#);
        let err = load::<WorldTask>(&none).expect_err("missing version");
        assert!(err.message().contains("schema_version"), "got: {}", err.message());

        let (_dir2, wrong) = write_config(
            r#"{ "schema_version": 9, "world": { "preset": "unbiased_linear" } }"#,
        );
        let err = load::<WorldTask>(&wrong).expect_err("future version");
        assert!(err.message().contains('9'), "names the version: {}", err.message());
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn world_source_must_be_single() {
        let both = WorldSource {
            path: Some(PathBuf::from("w.json")),
            preset: Some("unbiased_linear".into()),
            preset_seed: 0,
            config: None,
        };
        let err = both.realize(Path::new("."), None).expect_err("two sources");
        assert_eq!(err.exit_code(), 2);

        let neither =
            WorldSource { path: None, preset: None, preset_seed: 0, config: None };
        let err = neither.realize(Path::new("."), None).expect_err("no source");
        assert!(err.message().contains("exactly one"), "got: {}", err.message());
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        let source = WorldSource {
            path: None,
            preset: Some("glorious".into()),
            preset_seed: 0,
            config: None,
        };
        let err = source.realize(Path::new("."), None).expect_err("bad preset");
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("glorious"), "names the preset: {}", err.message());
    }

    #[test]
    fn reseeding_a_saved_world_is_refused() {
        let source = WorldSource {
            path: Some(PathBuf::from("w.json")),
            preset: None,
            preset_seed: 0,
            config: None,
        };
        let err = source.realize(Path::new("."), Some(7)).expect_err("reseed of file");
        assert_eq!(err.exit_code(), 2, "config error, not a silent no-op");
    }

    #[test]
    fn missing_config_file_is_an_io_error() {
        let err = load::<WorldTask>(Path::new("/nonexistent/task.json"))
            .expect_err("missing file");
        assert_eq!(err.exit_code(), 4);
    }
}
