//! Synthetic ground truth.
//!
//! Latent time courses for language (`lang`), vision (`vis`), information
//! shared by both (`shared`) and a nonlinear `interaction` term are mixed
//! into feature matrices for four conditions and into multi-subject voxel
//! responses with a known ROI layout:
//!
//! | condition   | carries                                          |
//! |-------------|--------------------------------------------------|
//! | `joint`     | lang, vis, shared, optionally interaction        |
//! | `lang_only` | lang, plus `lang_only_shared_gain` × shared      |
//! | `vis_only`  | vis, shared                                      |
//! | `mask_truth`| lang                                             |
//!
//! The interaction is the standardized elementwise product of one projection
//! of `lang` and one of `vis`, so no linear function of the unimodal features
//! recovers it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crossval::default_lambda_grid;
use crate::error::{Error, Result};
use crate::matrixio::{
    load_manifest, write_matrix, write_roi_file, BaselineSection, DatasetManifest, Matrix, RoiAtlas,
};
use crate::stats::Correction;

pub const CONDITIONS: [&str; 4] = ["joint", "lang_only", "vis_only", "mask_truth"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentWeights {
    #[serde(default)]
    pub lang: f64,
    #[serde(default)]
    pub vis: f64,
    #[serde(default)]
    pub shared: f64,
    #[serde(default)]
    pub interaction: f64,
}

impl ComponentWeights {
    fn as_array(&self) -> [f64; 4] {
        [self.lang, self.vis, self.shared, self.interaction]
    }
}

/// One ROI: voxel count and the amplitude with which each latent component
/// drives its voxels (per-subject noise has standard deviation
/// `noise_sigma[subject]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiSpec {
    pub name: String,
    pub n_voxels: usize,
    pub weights: ComponentWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentDims {
    pub lang: usize,
    pub vis: usize,
    pub shared: usize,
    pub interaction: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDims {
    pub joint: usize,
    pub lang_only: usize,
    pub vis_only: usize,
    pub mask_truth: usize,
}

/// How the unimodal conditions relate to the joint one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnimodalFeatures {
    /// Separate mixing matrices, dimensions and feature noise.
    Independent,
    /// The joint layer with the other modality's inputs removed: same
    /// mixing matrices and joint dimensionality. Unimodal feature noise
    /// rides on each modality's pathway and goes with it; joint feature
    /// noise exists only in the joint layer.
    Ablated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureNoise {
    pub joint: f64,
    pub unimodal: f64,
}

/// Analysis settings copied into the emitted manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub n_outer_folds: usize,
    pub n_inner_folds: usize,
    pub lambda_grid: Vec<f64>,
    pub significance_alpha: f64,
    #[serde(default)]
    pub fdr: Correction,
    #[serde(default)]
    pub baseline: BaselineSection,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n_outer_folds: 6,
            n_inner_folds: 5,
            lambda_grid: default_lambda_grid(),
            significance_alpha: 0.05,
            fdr: Correction::None,
            baseline: BaselineSection::default(),
        }
    }
}

/// Generator settings. Fields missing from a JSON spec take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub n_subjects: usize,
    pub n_layers: usize,
    pub rois: Vec<RoiSpec>,
    pub latent_dims: LatentDims,
    pub feature_dims: FeatureDims,
    pub feature_noise: FeatureNoise,
    pub unimodal_features: UnimodalFeatures,
    /// Per-subject response noise; a single value applies to every subject.
    pub noise_sigma: Vec<f64>,
    /// AR(1) coefficient of the latent time courses.
    pub temporal_smoothing: f64,
    pub joint_includes_interaction: bool,
    /// Gain of the shared component in each joint layer.
    pub shared_layer_gains: Vec<f64>,
    /// Gain of the interaction component in each joint layer.
    pub interaction_layer_gains: Vec<f64>,
    pub lang_only_shared_gain: f64,
    #[serde(default)]
    pub run: RunSettings,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let roi = |name: &str, weights| RoiSpec {
            name: name.into(),
            n_voxels: 20,
            weights,
        };
        let n_layers = 4;
        SynthSpec {
            n_samples: 300,
            n_subjects: 6,
            n_layers,
            rois: vec![
                roi(
                    "AG",
                    ComponentWeights {
                        lang: 0.5,
                        shared: 0.7,
                        ..Default::default()
                    },
                ),
                roi(
                    "IFG",
                    ComponentWeights {
                        lang: 0.7,
                        ..Default::default()
                    },
                ),
                roi(
                    "PTL",
                    ComponentWeights {
                        lang: 0.7,
                        ..Default::default()
                    },
                ),
                roi(
                    "PCC",
                    ComponentWeights {
                        interaction: 0.7,
                        ..Default::default()
                    },
                ),
            ],
            latent_dims: LatentDims {
                lang: 4,
                vis: 4,
                shared: 2,
                interaction: 2,
            },
            feature_dims: FeatureDims {
                joint: 16,
                lang_only: 8,
                vis_only: 8,
                mask_truth: 8,
            },
            feature_noise: FeatureNoise {
                joint: 0.5,
                unimodal: 0.0,
            },
            unimodal_features: UnimodalFeatures::Ablated,
            noise_sigma: vec![1.0],
            temporal_smoothing: 0.3,
            joint_includes_interaction: true,
            shared_layer_gains: vec![1.0; n_layers],
            interaction_layer_gains: vec![1.0; n_layers],
            lang_only_shared_gain: 0.0,
            run: RunSettings::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Every ROI weight set to zero: responses are pure noise.
    pub fn null(mut self) -> Self {
        for r in &mut self.rois {
            r.weights = ComponentWeights::default();
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_voxels(&self) -> usize {
        self.rois.iter().map(|r| r.n_voxels).sum()
    }

    pub fn subject_sigma(&self, subject: usize) -> f64 {
        if self.noise_sigma.len() == 1 {
            self.noise_sigma[0]
        } else {
            self.noise_sigma[subject]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_samples < 2 || self.n_subjects == 0 || self.n_layers == 0 {
            return bad("n_samples must be at least 2, n_subjects and n_layers at least 1".into());
        }
        if self.rois.is_empty() || self.rois.iter().any(|r| r.n_voxels == 0) {
            return bad("every ROI needs at least one voxel".into());
        }
        let mut names: Vec<&str> = self.rois.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("ROI names must be unique".into());
        }
        if self
            .rois
            .iter()
            .flat_map(|r| r.weights.as_array())
            .any(|w| !(w.is_finite() && w >= 0.0))
        {
            return bad("ROI weights must be finite and nonnegative".into());
        }
        let d = self.latent_dims;
        if d.lang == 0 || d.vis == 0 || d.shared == 0 || d.interaction == 0 {
            return bad("latent dimensions must be at least 1".into());
        }
        let f = self.feature_dims;
        if f.joint == 0 || f.lang_only == 0 || f.vis_only == 0 || f.mask_truth == 0 {
            return bad("feature dimensions must be at least 1".into());
        }
        let fnoise = [self.feature_noise.joint, self.feature_noise.unimodal];
        if fnoise.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("feature noise must be finite and nonnegative".into());
        }
        if !(self.noise_sigma.len() == 1 || self.noise_sigma.len() == self.n_subjects) {
            return bad(format!(
                "noise_sigma needs 1 or {} entries, got {}",
                self.n_subjects,
                self.noise_sigma.len()
            ));
        }
        if self.noise_sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("noise_sigma must be positive".into());
        }
        if !(0.0..1.0).contains(&self.temporal_smoothing) {
            return bad(format!(
                "temporal_smoothing must lie in [0, 1), got {}",
                self.temporal_smoothing
            ));
        }
        for (name, gains) in [
            ("shared_layer_gains", &self.shared_layer_gains),
            ("interaction_layer_gains", &self.interaction_layer_gains),
        ] {
            if gains.len() != self.n_layers || gains.iter().any(|g| !g.is_finite()) {
                return bad(format!("{name} needs {} finite entries", self.n_layers));
            }
        }
        if !self.lang_only_shared_gain.is_finite() {
            return bad("lang_only_shared_gain must be finite".into());
        }
        Ok(())
    }
}

/// Latent time courses, `n_samples × dims` each.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub lang: DMatrix<f64>,
    pub vis: DMatrix<f64>,
    pub shared: DMatrix<f64>,
    pub interaction: DMatrix<f64>,
}

/// What was planted where, for checking analyses against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rois: Vec<RoiSpec>,
    /// ROIs driven by the shared component: joint beats `lang_only` there.
    pub connection_rois: Vec<String>,
    /// ROIs driven by the interaction that the joint features carry.
    pub interaction_rois: Vec<String>,
    pub joint_includes_interaction: bool,
    pub lang_only_shared_gain: f64,
    pub shared_layer_gains: Vec<f64>,
    pub interaction_layer_gains: Vec<f64>,
    pub noise_sigma: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// Condition name → per-layer `n_samples × feature_dim` features, in
    /// the order of [`CONDITIONS`].
    pub conditions: Vec<(String, Vec<DMatrix<f64>>)>,
    /// One `n_samples × n_voxels` matrix per subject, common voxel space.
    pub responses: Vec<DMatrix<f64>>,
    pub atlas: RoiAtlas,
    pub latents: Latents,
    pub ground_truth: GroundTruth,
}

impl SynthData {
    pub fn condition(&self, name: &str) -> Option<&[DMatrix<f64>]> {
        self.conditions
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l.as_slice())
    }
}

// Independent random streams, so e.g. changing the subject count leaves
// the features untouched.
const STREAM_LATENTS: u64 = 0;
const STREAM_INTERACTION: u64 = 1;
const STREAM_MIXING: u64 = 2;
const STREAM_FEATURE_NOISE: u64 = 3;
const STREAM_LOADINGS: u64 = 4;
const STREAM_SUBJECTS: u64 = 16;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Stationary AR(1) columns with unit marginal variance.
pub fn ar1(n: usize, dims: usize, rho: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let innovations = randn(n, dims, rng);
    let scale = (1.0 - rho * rho).sqrt();
    let mut out = DMatrix::zeros(n, dims);
    for j in 0..dims {
        out[(0, j)] = innovations[(0, j)];
        for t in 1..n {
            out[(t, j)] = rho * out[(t - 1, j)] + scale * innovations[(t, j)];
        }
    }
    out
}

fn standardize_columns(m: &mut DMatrix<f64>) {
    let n = m.nrows() as f64;
    for mut c in m.column_iter_mut() {
        let mean = c.sum() / n;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        c.apply(|v| *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 });
    }
}

fn unit_vector(dims: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v: DVector<f64> = DVector::from_fn(dims, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    v / norm
}

fn latents(spec: &SynthSpec) -> Latents {
    let n = spec.n_samples;
    let d = spec.latent_dims;
    let rho = spec.temporal_smoothing;
    let mut r = rng(spec.seed, STREAM_LATENTS);
    let lang = ar1(n, d.lang, rho, &mut r);
    let vis = ar1(n, d.vis, rho, &mut r);
    let shared = ar1(n, d.shared, rho, &mut r);
    let mut r = rng(spec.seed, STREAM_INTERACTION);
    let mut interaction = DMatrix::zeros(n, d.interaction);
    for k in 0..d.interaction {
        let a = &lang * unit_vector(d.lang, &mut r);
        let b = &vis * unit_vector(d.vis, &mut r);
        interaction.set_column(k, &a.component_mul(&b));
    }
    standardize_columns(&mut interaction);
    Latents {
        lang,
        vis,
        shared,
        interaction,
    }
}

/// `Σ gain · z · M / sqrt(dims)` over components, plus feature noise.
fn mix(
    parts: &[(&DMatrix<f64>, f64)],
    out_dims: usize,
    noise: f64,
    mixing: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = parts[0].0.nrows();
    let mut f = DMatrix::zeros(n, out_dims);
    for (z, gain) in parts {
        let m = randn(z.ncols(), out_dims, mixing) / (z.ncols() as f64).sqrt();
        if *gain != 0.0 {
            f += *z * m * *gain;
        }
    }
    let e = randn(n, out_dims, noise_rng);
    if noise > 0.0 {
        f += e * noise;
    }
    f
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let z = latents(spec);
    let fd = spec.feature_dims;
    let fnoise = spec.feature_noise;
    let mut mixing = rng(spec.seed, STREAM_MIXING);
    let mut noise = rng(spec.seed, STREAM_FEATURE_NOISE);

    let int_gain = |l: usize| {
        if spec.joint_includes_interaction {
            spec.interaction_layer_gains[l]
        } else {
            0.0
        }
    };
    // Mixing matrices are drawn even for zero gains so that toggling a
    // component leaves every other draw unchanged.
    let (joint, lang_only, vis_only) = match spec.unimodal_features {
        UnimodalFeatures::Independent => {
            let joint: Vec<_> = (0..spec.n_layers)
                .map(|l| {
                    let parts = [
                        (&z.lang, 1.0),
                        (&z.vis, 1.0),
                        (&z.shared, spec.shared_layer_gains[l]),
                        (&z.interaction, int_gain(l)),
                    ];
                    mix(&parts, fd.joint, fnoise.joint, &mut mixing, &mut noise)
                })
                .collect();
            let lang_only: Vec<_> = (0..spec.n_layers)
                .map(|_| {
                    let parts = [(&z.lang, 1.0), (&z.shared, spec.lang_only_shared_gain)];
                    mix(&parts, fd.lang_only, fnoise.unimodal, &mut mixing, &mut noise)
                })
                .collect();
            let vis_only: Vec<_> = (0..spec.n_layers)
                .map(|_| {
                    let parts = [(&z.vis, 1.0), (&z.shared, 1.0)];
                    mix(&parts, fd.vis_only, fnoise.unimodal, &mut mixing, &mut noise)
                })
                .collect();
            (joint, lang_only, vis_only)
        }
        UnimodalFeatures::Ablated => {
            let (mut joint, mut lang_only, mut vis_only) = (Vec::new(), Vec::new(), Vec::new());
            for l in 0..spec.n_layers {
                let [lang, vis, shared, inter] = [&z.lang, &z.vis, &z.shared, &z.interaction]
                    .map(|c| c * randn(c.ncols(), fd.joint, &mut mixing) / (c.ncols() as f64).sqrt());
                let [e_lang, e_vis, e_joint] = [fnoise.unimodal, fnoise.unimodal, fnoise.joint]
                    .map(|sd| randn(spec.n_samples, fd.joint, &mut noise) * sd);
                let g = spec.shared_layer_gains[l];
                let lang_path = &lang + &e_lang;
                let vis_path = &vis + &shared * g + &e_vis;
                joint.push(&lang_path + &vis_path + &inter * int_gain(l) + &e_joint);
                lang_only.push(&lang_path + &shared * spec.lang_only_shared_gain);
                vis_only.push(vis_path);
            }
            (joint, lang_only, vis_only)
        }
    };
    let mask_truth = vec![mix(
        &[(&z.lang, 1.0)],
        fd.mask_truth,
        fnoise.unimodal,
        &mut mixing,
        &mut noise,
    )];

    let n = spec.n_samples;
    let v = spec.n_voxels();
    let components = [&z.lang, &z.vis, &z.shared, &z.interaction];
    let mut loadings = rng(spec.seed, STREAM_LOADINGS);
    let mut signal = DMatrix::zeros(n, v);
    let mut rois = BTreeMap::new();
    let mut at = 0;
    for roi in &spec.rois {
        for j in at..at + roi.n_voxels {
            for (zc, w) in components.iter().zip(roi.weights.as_array()) {
                let u = unit_vector(zc.ncols(), &mut loadings);
                if w != 0.0 {
                    let col = *zc * u * w;
                    let mut dst = signal.column_mut(j);
                    dst += col;
                }
            }
        }
        rois.insert(roi.name.clone(), (at..at + roi.n_voxels).collect());
        at += roi.n_voxels;
    }
    let atlas = RoiAtlas::new(rois, v)?;
    let responses = (0..spec.n_subjects)
        .map(|s| {
            let mut r = rng(spec.seed, STREAM_SUBJECTS + s as u64);
            &signal + randn(n, v, &mut r) * spec.subject_sigma(s)
        })
        .collect();

    let planted = |pick: fn(&ComponentWeights) -> f64| -> Vec<String> {
        spec.rois
            .iter()
            .filter(|r| pick(&r.weights) > 0.0)
            .map(|r| r.name.clone())
            .collect()
    };
    let ground_truth = GroundTruth {
        rois: spec.rois.clone(),
        connection_rois: if spec.shared_layer_gains.iter().any(|&g| g != spec.lang_only_shared_gain) {
            planted(|w| w.shared)
        } else {
            Vec::new()
        },
        interaction_rois: if spec.joint_includes_interaction {
            planted(|w| w.interaction)
        } else {
            Vec::new()
        },
        joint_includes_interaction: spec.joint_includes_interaction,
        lang_only_shared_gain: spec.lang_only_shared_gain,
        shared_layer_gains: spec.shared_layer_gains.clone(),
        interaction_layer_gains: spec.interaction_layer_gains.clone(),
        noise_sigma: (0..spec.n_subjects).map(|s| spec.subject_sigma(s)).collect(),
        seed: spec.seed,
    };
    Ok(SynthData {
        conditions: vec![
            ("joint".into(), joint),
            ("lang_only".into(), lang_only),
            ("vis_only".into(), vis_only),
            ("mask_truth".into(), mask_truth),
        ],
        responses,
        atlas,
        latents: z,
        ground_truth,
    })
}

pub fn subject_id(s: usize) -> String {
    format!("sub-{:02}", s + 1)
}

pub fn layer_file_name(l: usize) -> String {
    format!("layer_{:02}.eamx", l + 1)
}

/// Writes features, responses, ROI files, `ground_truth.json`, `spec.json`
/// and `manifest.json` under `dir`; returns the manifest path. The manifest
/// declares a connection contrast (`joint` vs `lang_only`) and an
/// interaction contrast (`joint` minus `lang_only` and `vis_only`).
pub fn write_dataset(spec: &SynthSpec, data: &SynthData, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(dir)?;
    let mut conditions = Vec::new();
    for (name, layers) in &data.conditions {
        let cdir = dir.join("features").join(name);
        mkdir(&cdir)?;
        let mut files = Vec::new();
        for (l, m) in layers.iter().enumerate() {
            let rel = PathBuf::from("features").join(name).join(layer_file_name(l));
            write_matrix(&Matrix::from_dmatrix(m)?, dir.join(&rel))?;
            files.push(rel);
        }
        conditions.push(serde_json::json!({ "name": name, "layer_files": files }));
    }
    let mut subjects = Vec::new();
    for (s, y) in data.responses.iter().enumerate() {
        let id = subject_id(s);
        let sdir = PathBuf::from("subjects").join(&id);
        mkdir(&dir.join(&sdir))?;
        let response_file = sdir.join("responses.eamx");
        let roi_file = sdir.join("rois.json");
        write_matrix(&Matrix::from_dmatrix(y)?, dir.join(&response_file))?;
        write_roi_file(&data.atlas, dir.join(&roi_file))?;
        subjects.push(serde_json::json!({ "id": id, "response_file": response_file, "roi_file": roi_file }));
    }
    let write_json = |name: &str, value: &serde_json::Value| {
        let p = dir.join(name);
        let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    };
    write_json(
        "ground_truth.json",
        &serde_json::to_value(&data.ground_truth).expect("serializable"),
    )?;
    write_json("spec.json", &serde_json::to_value(spec).expect("serializable"))?;
    let run = &spec.run;
    let manifest = serde_json::json!({
        "subjects": subjects,
        "conditions": conditions,
        "tr_seconds": 1.49,
        "n_outer_folds": run.n_outer_folds,
        "n_inner_folds": run.n_inner_folds,
        "lambda_grid": run.lambda_grid,
        "significance_alpha": run.significance_alpha,
        "seed": spec.seed,
        "fdr": run.fdr,
        "language_rois": spec.rois.iter().map(|r| &r.name).collect::<Vec<_>>(),
        "baseline": run.baseline,
        "contrasts": [
            { "mode": "connection", "condition_a": "joint", "condition_b": ["lang_only"] },
            { "mode": "interaction", "condition_a": "joint", "condition_b": ["lang_only", "vis_only"] },
        ],
    });
    write_json("manifest.json", &manifest)?;
    let path = dir.join("manifest.json");
    load_manifest(&path)?;
    Ok(path)
}

/// Generates and writes in one step.
pub fn generate_dataset(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<(SynthData, DatasetManifest)> {
    let data = generate(spec)?;
    let path = write_dataset(spec, &data, dir)?;
    Ok((data, load_manifest(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossval::{fit_encoding, make_folds, EncodingConfig};
    use crate::residual::concat_columns;

    fn small() -> SynthSpec {
        SynthSpec {
            n_samples: 120,
            n_subjects: 3,
            n_layers: 2,
            shared_layer_gains: vec![1.0; 2],
            interaction_layer_gains: vec![1.0; 2],
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let a = generate(&small().with_seed(5)).unwrap();
        let b = generate(&small().with_seed(5)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small().with_seed(6)).unwrap();
        assert_ne!(a.responses[0], c.responses[0]);
    }

    #[test]
    fn shapes_and_atlas() {
        let spec = small();
        let d = generate(&spec).unwrap();
        assert_eq!(d.responses.len(), 3);
        assert_eq!(d.responses[0].shape(), (120, 80));
        assert_eq!(d.condition("joint").unwrap().len(), 2);
        assert_eq!(d.condition("joint").unwrap()[0].shape(), (120, 16));
        assert_eq!(d.condition("mask_truth").unwrap().len(), 1);
        assert_eq!(d.atlas.get("IFG").unwrap(), (20..40).collect::<Vec<_>>().as_slice());
        assert_eq!(d.ground_truth.connection_rois, vec!["AG".to_string()]);
        assert_eq!(d.ground_truth.interaction_rois, vec!["PCC".to_string()]);
    }

    #[test]
    fn ar1_keeps_unit_variance() {
        for rho in [0.0, 0.3, 0.8] {
            let z = ar1(20_000, 3, rho, &mut rng(1, 0));
            for c in z.column_iter() {
                let mean = c.sum() / c.len() as f64;
                let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64;
                assert!((var - 1.0).abs() < 0.05, "rho {rho}: variance {var}");
            }
        }
    }

    #[test]
    fn ar1_lag_one_correlation() {
        let z = ar1(20_000, 1, 0.3, &mut rng(2, 0));
        let c = z.column(0);
        let r = crate::stats::pearson(&c.as_slice()[1..], &c.as_slice()[..c.len() - 1])
            .unwrap()
            .unwrap();
        assert!((r - 0.3).abs() < 0.03, "{r}");
    }

    #[test]
    fn interaction_is_not_linearly_recoverable() {
        let spec = SynthSpec {
            n_samples: 600,
            ..SynthSpec::default()
        };
        let z = generate(&spec).unwrap().latents;
        let x = concat_columns(&[&z.lang, &z.vis]).unwrap();
        let res = fit_encoding(
            &x,
            &z.interaction,
            &make_folds(600, 6).unwrap(),
            &EncodingConfig::default(),
        )
        .unwrap();
        for r in res.mean_correlation {
            assert!(r < 0.2, "{r}");
        }
        // ...whereas each unimodal latent is.
        let res = fit_encoding(&x, &z.lang, &make_folds(600, 6).unwrap(), &EncodingConfig::default()).unwrap();
        assert!(res.mean_correlation.iter().all(|&r| r > 0.99));
    }

    #[test]
    fn null_spec_gives_pure_noise() {
        let d = generate(&small().null()).unwrap();
        let sigma = small().noise_sigma[0];
        let y = &d.responses[0];
        let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var - sigma * sigma).abs() < 0.1, "{var}");
        assert!(d.ground_truth.connection_rois.is_empty());
    }

    #[test]
    fn toggling_interaction_only_changes_joint() {
        let with = generate(&small()).unwrap();
        let without = generate(&SynthSpec {
            joint_includes_interaction: false,
            ..small()
        })
        .unwrap();
        assert_ne!(with.condition("joint"), without.condition("joint"));
        for name in ["lang_only", "vis_only", "mask_truth"] {
            assert_eq!(with.condition(name), without.condition(name));
        }
        assert_eq!(with.responses, without.responses);
        assert!(without.ground_truth.interaction_rois.is_empty());
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            SynthSpec {
                temporal_smoothing: 1.0,
                ..small()
            },
            SynthSpec {
                noise_sigma: vec![1.0, 1.0],
                ..small()
            },
            SynthSpec {
                shared_layer_gains: vec![1.0],
                ..small()
            },
            SynthSpec {
                latent_dims: LatentDims {
                    interaction: 0,
                    ..small().latent_dims
                },
                ..small()
            },
        ];
        for s in bad {
            assert!(generate(&s).is_err());
        }
    }

    #[test]
    fn dataset_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        let (data, manifest) = generate_dataset(&spec, dir.path()).unwrap();
        assert_eq!(manifest.subjects.len(), 3);
        assert_eq!(manifest.conditions.len(), 4);
        assert_eq!(manifest.contrasts.len(), 2);
        let subj = &manifest.subjects[1];
        let y = crate::matrixio::read_matrix(manifest.resolve(&subj.response_file), true).unwrap();
        assert_eq!(y.to_dmatrix(), data.responses[1]);
        assert_eq!(manifest.load_atlas(subj).unwrap(), data.atlas);
        let gt: GroundTruth =
            serde_json::from_str(&fs::read_to_string(dir.path().join("ground_truth.json")).unwrap()).unwrap();
        assert_eq!(gt, data.ground_truth);
        let back: SynthSpec = serde_json::from_str(&fs::read_to_string(dir.path().join("spec.json")).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
