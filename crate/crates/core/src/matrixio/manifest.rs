//! Dataset manifests: a JSON document naming subjects, feature conditions and
//! the experimental constants of a run. Relative paths resolve against the
//! manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::read_header;
use super::roi::{read_roi_file, RoiAtlas};
use crate::error::{Error, Result};
use crate::stats::Correction;
use crate::trmap::{max_tr_index, TrMapConfig, TrPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub response_file: PathBuf,
    pub roi_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub name: String,
    pub layer_files: Vec<PathBuf>,
}

/// Stimulus-to-TR mapping applied to raw response recordings. The TR length
/// comes from the manifest's top-level `tr_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrMapSection {
    pub stimulus_stride_seconds: f64,
    pub segment_seconds: f64,
    pub tr_policy: TrPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_override: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    Gaussian,
    Shuffle,
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(BaselineMode::Gaussian),
            "shuffle" => Ok(BaselineMode::Shuffle),
            other => Err(Error::InvalidArgument(format!("unknown baseline mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub mode: BaselineMode,
    pub draws: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            mode: BaselineMode::Gaussian,
            draws: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastMode {
    Connection,
    Interaction,
}

impl std::str::FromStr for ContrastMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "connection" => Ok(ContrastMode::Connection),
            "interaction" => Ok(ContrastMode::Interaction),
            other => Err(Error::InvalidArgument(format!("unknown contrast mode '{other}'"))),
        }
    }
}

/// A contrast declared in the manifest. For `interaction`, `condition_b`
/// lists the unimodal conditions removed from `condition_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastEntry {
    pub mode: ContrastMode,
    pub condition_a: String,
    pub condition_b: Vec<String>,
}

fn default_floor() -> f64 {
    0.05
}

fn is_default_floor(v: &f64) -> bool {
    *v == default_floor()
}

fn is_none_correction(c: &Correction) -> bool {
    *c == Correction::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub subjects: Vec<SubjectEntry>,
    pub conditions: Vec<ConditionEntry>,
    pub tr_seconds: f64,
    pub n_outer_folds: usize,
    pub n_inner_folds: usize,
    pub lambda_grid: Vec<f64>,
    pub significance_alpha: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "is_none_correction")]
    pub fdr: Correction,
    #[serde(default = "default_floor", skip_serializing_if = "is_default_floor")]
    pub ceiling_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_rois: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trmap: Option<TrMapSection>,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contrasts: Vec<ContrastEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn condition(&self, name: &str) -> Result<&ConditionEntry> {
        self.conditions
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Manifest(format!("unknown condition '{name}'")))
    }

    pub fn subject(&self, id: &str) -> Result<&SubjectEntry> {
        self.subjects
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Manifest(format!("unknown subject '{id}'")))
    }

    pub fn trmap_config(&self) -> Option<TrMapConfig> {
        self.trmap.as_ref().map(|t| TrMapConfig {
            tr_seconds: self.tr_seconds,
            stimulus_stride_seconds: t.stimulus_stride_seconds,
            segment_seconds: t.segment_seconds,
            tr_policy: t.tr_policy,
            span_override: t.span_override,
        })
    }

    pub fn load_atlas(&self, subject: &SubjectEntry) -> Result<RoiAtlas> {
        let header = read_header(self.resolve(&subject.response_file))?;
        read_roi_file(self.resolve(&subject.roi_file), header.cols as usize)
    }

    /// Checks scalar fields and cross-references without touching the disk.
    pub fn validate_fields(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::Manifest("no subjects".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Manifest("no conditions".into()));
        }
        let mut ids = BTreeSet::new();
        for s in &self.subjects {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate subject id '{}'", s.id)));
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.conditions {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Manifest(format!("duplicate condition '{}'", c.name)));
            }
            if c.layer_files.is_empty() {
                return Err(Error::Manifest(format!("condition '{}' has no layer files", c.name)));
            }
        }
        if !(self.tr_seconds.is_finite() && self.tr_seconds > 0.0) {
            return Err(Error::Manifest(format!(
                "tr_seconds must be positive, got {}",
                self.tr_seconds
            )));
        }
        if self.n_outer_folds < 2 {
            return Err(Error::Manifest("n_outer_folds must be at least 2".into()));
        }
        if self.n_inner_folds < 2 {
            return Err(Error::Manifest("n_inner_folds must be at least 2".into()));
        }
        validate_lambda_grid(&self.lambda_grid).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Manifest(m),
            other => other,
        })?;
        if !(self.significance_alpha > 0.0 && self.significance_alpha < 1.0) {
            return Err(Error::Manifest(format!(
                "significance_alpha must lie in (0, 1), got {}",
                self.significance_alpha
            )));
        }
        if !(self.ceiling_floor.is_finite() && self.ceiling_floor > 0.0) {
            return Err(Error::Manifest("ceiling_floor must be positive".into()));
        }
        if self.baseline.draws < 3 {
            return Err(Error::Manifest("baseline.draws must be at least 3".into()));
        }
        for entry in &self.contrasts {
            self.condition(&entry.condition_a)?;
            for b in &entry.condition_b {
                self.condition(b)?;
            }
            let want = match entry.mode {
                ContrastMode::Connection => 1,
                ContrastMode::Interaction => 2,
            };
            if entry.condition_b.len() != want {
                return Err(Error::Manifest(format!(
                    "{:?} contrast needs {want} condition_b entries, got {}",
                    entry.mode,
                    entry.condition_b.len()
                )));
            }
        }
        if let Some(cfg) = self.trmap_config() {
            cfg.validate().map_err(|e| Error::Manifest(e.to_string()))?;
        }
        Ok(())
    }

    /// Reads every referenced header and ROI file and checks that shapes
    /// agree: all feature files share one row count, and each subject's
    /// responses either match it or cover every mapped TR.
    pub fn validate_files(&self) -> Result<()> {
        let mut n_rows: Option<(u64, PathBuf)> = None;
        for c in &self.conditions {
            for f in &c.layer_files {
                let path = self.resolve(f);
                let h = read_header(&path)?;
                match &n_rows {
                    None => n_rows = Some((h.rows, path)),
                    Some((rows, first)) if *rows != h.rows => {
                        return Err(Error::Shape(format!(
                            "{} has {} rows but {} has {rows}",
                            path.display(),
                            h.rows,
                            first.display()
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
        let (n_stimuli, _) = n_rows.expect("validated non-empty conditions");
        let needed = match self.trmap_config() {
            Some(cfg) => max_tr_index(n_stimuli as usize, &cfg)? as u64 + 1,
            None => n_stimuli,
        };
        for s in &self.subjects {
            let path = self.resolve(&s.response_file);
            let h = read_header(&path)?;
            let ok = if self.trmap.is_some() {
                h.rows >= needed
            } else {
                h.rows == needed
            };
            if !ok {
                return Err(Error::Shape(format!(
                    "subject '{}': {} has {} rows, features have {n_stimuli}{}",
                    s.id,
                    path.display(),
                    h.rows,
                    if self.trmap.is_some() {
                        format!(" (TR mapping needs {needed})")
                    } else {
                        String::new()
                    }
                )));
            }
            let atlas = read_roi_file(self.resolve(&s.roi_file), h.cols as usize)?;
            if let Some(names) = &self.language_rois {
                atlas.union_of(names.iter().map(String::as_str)).map_err(|_| {
                    Error::Manifest(format!(
                        "subject '{}': language_rois names an ROI missing from its atlas",
                        s.id
                    ))
                })?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

pub fn validate_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda_grid is empty".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "lambda_grid values must be positive, got {v}"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("lambda_grid must be strictly increasing".into()));
    }
    Ok(())
}

pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<DatasetManifest> {
    let mut m: DatasetManifest = serde_json::from_str(text).map_err(|source| Error::Json {
        path: PathBuf::from("<manifest>"),
        source,
    })?;
    m.base_dir = base_dir.into();
    m.validate_fields()?;
    Ok(m)
}

/// Parses, validates and cross-checks a manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate_fields()?;
    m.validate_files()?;
    Ok(m)
}

pub fn write_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, m.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixio::{write_matrix, write_roi_file, Matrix};
    use std::collections::BTreeMap;

    struct Fixture {
        dir: tempfile::TempDir,
    }

    impl Fixture {
        /// `n_subjects` subjects with `resp_rows` responses, one condition of
        /// `n_layers` layers with `feat_rows` rows (the last layer gets
        /// `last_layer_rows`).
        fn new(
            n_subjects: usize,
            resp_rows: usize,
            n_layers: usize,
            feat_rows: usize,
            last_layer_rows: usize,
        ) -> (Self, serde_json::Value) {
            let dir = tempfile::tempdir().unwrap();
            let root = dir.path();
            let mut subjects = Vec::new();
            for s in 0..n_subjects {
                let resp = format!("resp_{s}.eamx");
                write_matrix(
                    &Matrix::new(resp_rows, 4, vec![0.0; resp_rows * 4]).unwrap(),
                    root.join(&resp),
                )
                .unwrap();
                let roi = format!("roi_{s}.json");
                let atlas = RoiAtlas::new(BTreeMap::from([("AG".to_string(), vec![0, 1])]), 4).unwrap();
                write_roi_file(&atlas, root.join(&roi)).unwrap();
                subjects.push(serde_json::json!({"id": format!("sub-{s:02}"), "response_file": resp, "roi_file": roi}));
            }
            let mut layers = Vec::new();
            for l in 0..n_layers {
                let rows = if l + 1 == n_layers { last_layer_rows } else { feat_rows };
                let f = format!("joint_{l:02}.eamx");
                write_matrix(&Matrix::new(rows, 3, vec![0.0; rows * 3]).unwrap(), root.join(&f)).unwrap();
                layers.push(f);
            }
            let json = serde_json::json!({
                "subjects": subjects,
                "conditions": [{"name": "joint", "layer_files": layers}],
                "tr_seconds": 1.49,
                "n_outer_folds": 6,
                "n_inner_folds": 5,
                "lambda_grid": [0.1, 1.0, 10.0],
                "significance_alpha": 0.05,
                "seed": 1
            });
            (Fixture { dir }, json)
        }

        fn write(&self, json: &serde_json::Value) -> PathBuf {
            let p = self.dir.path().join("manifest.json");
            fs::write(&p, serde_json::to_string_pretty(json).unwrap()).unwrap();
            p
        }
    }

    #[test]
    fn six_subjects_twelve_layers_loads() {
        let (fx, json) = Fixture::new(6, 1075, 12, 1075, 1075);
        let m = load_manifest(fx.write(&json)).unwrap();
        assert_eq!(m.subjects.len(), 6);
        assert_eq!(m.conditions[0].layer_files.len(), 12);
        assert_eq!(m.baseline, BaselineSection::default());
        assert_eq!(m.ceiling_floor, 0.05);
        let atlas = m.load_atlas(&m.subjects[0]).unwrap();
        assert_eq!(atlas.get("AG").unwrap(), &[0, 1]);
    }

    #[test]
    fn off_by_one_layer_is_shape_error() {
        let (fx, json) = Fixture::new(2, 1075, 3, 1075, 1074);
        assert!(matches!(load_manifest(fx.write(&json)), Err(Error::Shape(_))));
    }

    #[test]
    fn response_row_mismatch_is_shape_error() {
        let (fx, json) = Fixture::new(2, 1074, 2, 1075, 1075);
        assert!(matches!(load_manifest(fx.write(&json)), Err(Error::Shape(_))));
    }

    #[test]
    fn empty_lambda_grid_rejected() {
        let (fx, mut json) = Fixture::new(1, 20, 1, 20, 20);
        json["lambda_grid"] = serde_json::json!([]);
        let err = load_manifest(fx.write(&json)).unwrap_err();
        assert!(err.to_string().contains("lambda_grid"), "{err}");
    }

    #[test]
    fn unsorted_or_nonpositive_grid_rejected() {
        assert!(validate_lambda_grid(&[1.0, 1.0]).is_err());
        assert!(validate_lambda_grid(&[0.0, 1.0]).is_err());
        assert!(validate_lambda_grid(&[10.0, 1.0]).is_err());
        assert!(validate_lambda_grid(&[0.1, 1.0]).is_ok());
    }

    #[test]
    fn missing_field_is_descriptive() {
        let (fx, mut json) = Fixture::new(1, 20, 1, 20, 20);
        json.as_object_mut().unwrap().remove("seed");
        let err = load_manifest(fx.write(&json)).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let (fx, mut json) = Fixture::new(1, 20, 1, 20, 20);
        json["subjects"][0]["response_file"] = serde_json::json!("nope.eamx");
        let err = load_manifest(fx.write(&json)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("nope.eamx"));
    }

    #[test]
    fn unknown_condition_reference_rejected() {
        let (fx, mut json) = Fixture::new(1, 20, 1, 20, 20);
        json["contrasts"] = serde_json::json!([
            {"mode": "connection", "condition_a": "joint", "condition_b": ["lang_only"]}
        ]);
        let err = load_manifest(fx.write(&json)).unwrap_err();
        assert!(err.to_string().contains("lang_only"), "{err}");
    }

    #[test]
    fn trmap_section_needs_enough_recording_rows() {
        let (fx, mut json) = Fixture::new(1, 30, 1, 10, 10);
        json["trmap"] = serde_json::json!({
            "stimulus_stride_seconds": 3.0, "segment_seconds": 5.0,
            "tr_policy": "last_relevant", "span_override": 3
        });
        // stimulus 9 -> round(27 / 1.49) = 18, + 2 = 20 -> needs 21 rows
        let m = load_manifest(fx.write(&json)).unwrap();
        assert_eq!(m.trmap_config().unwrap().span(), 3);

        let (fx, mut json) = Fixture::new(1, 20, 1, 10, 10);
        json["trmap"] = serde_json::json!({
            "stimulus_stride_seconds": 3.0, "segment_seconds": 5.0,
            "tr_policy": "last_relevant", "span_override": 3
        });
        assert!(matches!(load_manifest(fx.write(&json)), Err(Error::Shape(_))));
    }

    #[test]
    fn serialization_round_trips() {
        let (fx, json) = Fixture::new(2, 20, 2, 20, 20);
        let path = fx.write(&json);
        let m = load_manifest(&path).unwrap();
        let again = parse_manifest(&m.to_json(), m.base_dir().to_path_buf()).unwrap();
        assert_eq!(again, m);
    }
}
