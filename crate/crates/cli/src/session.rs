//! Run provenance, the effective manifest and the on-disk fit cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use encalign::crossval::{make_folds, EncodingConfig, FoldScheme};
use encalign::matrixio::{load_manifest, read_header, read_matrix, DatasetManifest, RoiAtlas, SubjectEntry};
use encalign::trmap::{select_response_rows, TrPolicy};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{BaselineArg, FdrArg, GlobalArgs, TrPolicyArg};
use crate::error::{CliError, CliResult, Context};

/// Embedded in every artifact. Wall time and stage timings live in a
/// separate `timings/` file so artifacts stay byte-identical across runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub manifest_hash: Option<String>,
    pub seed: Option<u64>,
    pub subcommand: String,
    pub flags: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run record serializes")
    }
}

#[derive(Debug, Serialize)]
struct Stage {
    name: String,
    seconds: f64,
}

#[derive(Debug)]
pub struct Timings {
    start: Instant,
    last: Instant,
    stages: Vec<Stage>,
}

impl Timings {
    pub fn new() -> Self {
        let now = Instant::now();
        Timings {
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    /// Closes the current stage.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }

    pub fn to_value(&self, record: &RunRecord, threads: usize) -> serde_json::Value {
        serde_json::json!({
            "run": record,
            "threads": threads,
            "wall_seconds": self.start.elapsed().as_secs_f64(),
            "stages": self.stages,
        })
    }
}

pub struct Session {
    pub global: GlobalArgs,
    pub record: RunRecord,
    pub timings: Timings,
}

impl Session {
    pub fn out(&self) -> &Path {
        &self.global.out
    }

    pub fn dataset(&mut self) -> CliResult<Dataset> {
        let ds = Dataset::load(&self.global)?;
        self.record.manifest_hash = Some(ds.hash.clone());
        self.record.seed = Some(ds.manifest.seed);
        Ok(ds)
    }
}

/// The manifest after command-line overrides, with its hash.
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub hash: String,
}

impl Dataset {
    pub fn load(global: &GlobalArgs) -> CliResult<Self> {
        let path = global
            .manifest
            .as_ref()
            .ok_or_else(|| CliError::Input("this subcommand needs --manifest".into()))?;
        let mut manifest = load_manifest(path).context(|| format!("loading manifest {}", path.display()))?;
        if let Some(seed) = global.seed_override {
            manifest.seed = seed;
        }
        if let Some(fdr) = global.fdr {
            manifest.fdr = match fdr {
                FdrArg::None => encalign::stats::Correction::None,
                FdrArg::Bh => encalign::stats::Correction::Bh,
            };
        }
        if let Some(b) = global.baseline {
            manifest.baseline.mode = match b {
                BaselineArg::Gaussian => encalign::matrixio::BaselineMode::Gaussian,
                BaselineArg::Shuffle => encalign::matrixio::BaselineMode::Shuffle,
            };
        }
        if let Some(p) = global.tr_policy {
            let section = manifest.trmap.as_mut().ok_or_else(|| {
                CliError::Input(format!("--tr-policy given but {} has no trmap section", path.display()))
            })?;
            section.tr_policy = match p {
                TrPolicyArg::FirstRelevant => TrPolicy::FirstRelevant,
                TrPolicyArg::LastRelevant => TrPolicy::LastRelevant,
            };
        }
        manifest
            .validate_fields()
            .context(|| format!("manifest {} after overrides", path.display()))?;
        let hash = hex::encode(Sha256::digest(manifest.to_json().as_bytes()));
        Ok(Dataset { manifest, hash })
    }

    pub fn cache_dir(&self, out: &Path) -> PathBuf {
        out.join("cache").join(&self.hash)
    }

    pub fn fit_dir(&self, out: &Path, condition: &str, subject: &str, layer: usize) -> PathBuf {
        self.cache_dir(out)
            .join("fits")
            .join(condition)
            .join(subject)
            .join(format!("layer_{:02}", layer + 1))
    }

    pub fn ceiling_dir(&self, out: &Path) -> PathBuf {
        self.cache_dir(out).join("ceiling")
    }

    pub fn encoding_config(&self) -> EncodingConfig {
        let m = &self.manifest;
        EncodingConfig {
            inner_folds: m.n_inner_folds,
            lambda_grid: m.lambda_grid.clone(),
            alpha: m.significance_alpha,
            correction: m.fdr,
            ..EncodingConfig::default()
        }
    }

    pub fn scheme(&self, n_samples: usize) -> CliResult<FoldScheme> {
        make_folds(n_samples, self.manifest.n_outer_folds)
            .context(|| format!("splitting {n_samples} samples into outer folds"))
    }

    pub fn n_layers(&self, condition: &str) -> CliResult<usize> {
        Ok(self.condition(condition)?.layer_files.len())
    }

    fn condition(&self, name: &str) -> CliResult<&encalign::matrixio::ConditionEntry> {
        self.manifest.condition(name).context(|| format!("condition '{name}'"))
    }

    pub fn subject(&self, id: &str) -> CliResult<&SubjectEntry> {
        self.manifest.subject(id).context(|| format!("subject '{id}'"))
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.manifest.subjects.iter().map(|s| s.id.clone()).collect()
    }

    pub fn condition_names(&self) -> Vec<String> {
        self.manifest.conditions.iter().map(|c| c.name.clone()).collect()
    }

    pub fn features(&self, condition: &str, layer: usize) -> CliResult<DMatrix<f64>> {
        let path = self.manifest.resolve(&self.condition(condition)?.layer_files[layer]);
        Ok(read_matrix(&path, true)
            .context(|| format!("reading condition {condition}, layer {}", layer + 1))?
            .to_dmatrix())
    }

    pub fn all_layers(&self, condition: &str) -> CliResult<Vec<DMatrix<f64>>> {
        (0..self.n_layers(condition)?)
            .map(|l| self.features(condition, l))
            .collect()
    }

    /// Stimulus count of a condition, read from the first layer's header.
    pub fn n_stimuli(&self, condition: &str) -> CliResult<usize> {
        let path = self.manifest.resolve(&self.condition(condition)?.layer_files[0]);
        Ok(read_header(&path)
            .context(|| format!("reading {}", path.display()))?
            .rows as usize)
    }

    /// Responses with one row per stimulus: TR-aligned when the manifest
    /// has a trmap section, as stored otherwise.
    pub fn responses(&self, subject: &str, n_stimuli: usize) -> CliResult<DMatrix<f64>> {
        let entry = self.subject(subject)?;
        let path = self.manifest.resolve(&entry.response_file);
        let y = read_matrix(&path, true)
            .context(|| format!("reading responses of subject {subject}"))?
            .to_dmatrix();
        match self.manifest.trmap_config() {
            Some(cfg) => {
                select_response_rows(n_stimuli, &y, &cfg).context(|| format!("TR alignment for subject {subject}"))
            }
            None if y.nrows() == n_stimuli => Ok(y),
            None => Err(CliError::Input(format!(
                "subject {subject}: {} has {} rows but the features have {n_stimuli}; add a trmap section to align them",
                path.display(),
                y.nrows()
            ))),
        }
    }

    pub fn atlas(&self, subject: &str) -> CliResult<RoiAtlas> {
        let entry = self.subject(subject)?;
        self.manifest
            .load_atlas(entry)
            .context(|| format!("reading ROIs of subject {subject}"))
    }
}
