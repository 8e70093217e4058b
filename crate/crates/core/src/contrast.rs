//! Group-level contrasts between alignment conditions.
//!
//! *Connection contrast*: a joint (e.g. vision-language) representation is
//! compared with an ablated one (e.g. language-only) over the voxels the
//! joint condition predicts significantly in any layer, per ROI, with a
//! two-sided paired t-test across subjects.
//!
//! *Interaction contrast*: the unimodal representations are removed from the
//! joint one; the residual's alignment is compared with that of random
//! baseline features pushed through the identical pipeline, with a one-sided
//! paired t-test across subjects.
//!
//! Per-ROI scores pool layers by averaging the per-layer ROI scores.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ceiling::normalize_by_ceiling;
use crate::crossval::{fit_encoding, zscore, EncodingConfig, EncodingResult, FoldScheme};
use crate::error::{Error, Result};
use crate::matrixio::{BaselineMode, ContrastMode, RoiAtlas};
use crate::par;
use crate::residual::{concat_columns, linearly_determined, remove_information_with, remove_sequential, RemovalMode};
use crate::stats::{nan_mean, paired_ttest, Tail};

pub const LAYER_POOLING: &str = "mean_of_layer_scores";

/// Logical OR of boolean masks of equal length.
pub fn union_of_masks(masks: &[&[bool]]) -> Result<Vec<bool>> {
    let first = masks
        .first()
        .ok_or_else(|| Error::InvalidArgument("union of zero masks".into()))?;
    if masks.iter().any(|m| m.len() != first.len()) {
        return Err(Error::Shape("masks differ in voxel count".into()));
    }
    Ok((0..first.len()).map(|j| masks.iter().any(|m| m[j])).collect())
}

/// Voxels significant in any layer.
pub fn union_mask(results: &[EncodingResult]) -> Result<Vec<bool>> {
    let masks: Vec<&[bool]> = results.iter().map(|r| r.significant_mask.as_slice()).collect();
    union_of_masks(&masks)
}

/// Mean of `values` over the ROI's voxels that pass `mask`, skipping
/// undefined (NaN) voxels. `Ok(None)` flags an empty intersection.
pub fn roi_score(values: &[f64], mask: Option<&[bool]>, atlas: &RoiAtlas, roi: &str) -> Result<Option<f64>> {
    let idx = atlas
        .get(roi)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown ROI '{roi}'")))?;
    if let Some(m) = mask {
        if m.len() != values.len() {
            return Err(Error::Shape(format!(
                "mask covers {} voxels, scores cover {}",
                m.len(),
                values.len()
            )));
        }
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= values.len()) {
        return Err(Error::Shape(format!(
            "ROI '{roi}' voxel {bad} is outside {} scores",
            values.len()
        )));
    }
    Ok(nan_mean(
        idx.iter().filter(|&&i| mask.is_none_or(|m| m[i])).map(|&i| values[i]),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Tested,
    /// The paired differences have no spread (e.g. a condition against
    /// itself); no p-value.
    Degenerate,
    TooFewSubjects,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRow {
    pub roi: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff: f64,
    pub paired_t: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub status: RowStatus,
    pub n_subjects: usize,
    /// Subjects left out because the ROI had no usable voxel for them.
    pub n_excluded: usize,
    /// Interaction contrasts: spread of the baseline over draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    /// 1-based layer number.
    pub layer: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff: f64,
    pub p_value: Option<f64>,
    pub status: RowStatus,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelSelection {
    /// Condition whose union-of-layers significance mask selects voxels;
    /// `None` when every ROI voxel is used.
    pub reference_condition: Option<String>,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalInfo {
    /// Conditions removed from `condition_a`, in removal order.
    pub removed: Vec<String>,
    pub sequential: bool,
    pub mode: RemovalMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineInfo {
    pub mode: BaselineMode,
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub mode: ContrastMode,
    pub condition_a: String,
    pub condition_b: String,
    pub alpha: f64,
    pub tail: String,
    pub roi_rows: Vec<RoiRow>,
    pub layerwise: Vec<LayerRow>,
    pub voxel_selection: VoxelSelection,
    pub layer_pooling: String,
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal: Option<RemovalInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineInfo>,
    pub warnings: Vec<String>,
}

impl ContrastReport {
    pub fn row(&self, roi: &str) -> Option<&RoiRow> {
        self.roi_rows.iter().find(|r| r.roi == roi)
    }
}

struct Paired {
    mean_a: f64,
    mean_b: f64,
    t: Option<f64>,
    p: Option<f64>,
    status: RowStatus,
    n: usize,
}

/// Paired test over subjects with a score in both conditions.
fn paired(pairs: &[(f64, f64)], tail: Tail) -> Paired {
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let n = pairs.len();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let (t, p, status) = if n < 3 {
        (None, None, RowStatus::TooFewSubjects)
    } else {
        match paired_ttest(&a, &b, tail) {
            Ok(r) => (Some(r.statistic), Some(r.p_value), RowStatus::Tested),
            Err(_) => (None, None, RowStatus::Degenerate),
        }
    };
    Paired {
        mean_a: mean(&a),
        mean_b: mean(&b),
        t,
        p,
        status,
        n,
    }
}

fn roi_row(roi: &str, pairs: &[(f64, f64)], n_excluded: usize, tail: Tail, alpha: f64) -> RoiRow {
    let p = paired(pairs, tail);
    RoiRow {
        roi: roi.to_string(),
        mean_a: p.mean_a,
        mean_b: p.mean_b,
        diff: p.mean_a - p.mean_b,
        paired_t: p.t,
        p_value: p.p,
        significant: p.p.is_some_and(|v| v < alpha),
        status: p.status,
        n_subjects: p.n,
        n_excluded,
        baseline_sd: None,
    }
}

fn layer_row(layer: usize, pairs: &[(f64, f64)], tail: Tail) -> LayerRow {
    let p = paired(pairs, tail);
    LayerRow {
        layer: layer + 1,
        mean_a: p.mean_a,
        mean_b: p.mean_b,
        diff: p.mean_a - p.mean_b,
        p_value: p.p,
        status: p.status,
        n_subjects: p.n,
    }
}

fn tail_name(tail: Tail) -> String {
    match tail {
        Tail::OneSidedGreater => "one_sided_greater".into(),
        Tail::TwoSided => "two_sided".into(),
    }
}

/// One subject's per-layer encoding results for both conditions.
#[derive(Debug, Clone)]
pub struct SubjectLayers {
    pub id: String,
    pub joint: Vec<EncodingResult>,
    pub ablated: Vec<EncodingResult>,
    pub atlas: RoiAtlas,
    /// Per-voxel noise ceiling for normalized scores.
    pub ceiling: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastOptions {
    pub alpha: f64,
    /// ROIs reported; `None` means every ROI in the atlas.
    pub rois: Option<Vec<String>>,
    /// ROIs whose union defines the voxels of the layer curves; `None`
    /// means every reported ROI.
    pub language_rois: Option<Vec<String>>,
    pub normalize: bool,
    pub ceiling_floor: f64,
}

impl Default for ContrastOptions {
    fn default() -> Self {
        ContrastOptions {
            alpha: 0.05,
            rois: None,
            language_rois: None,
            normalize: false,
            ceiling_floor: crate::ceiling::DEFAULT_FLOOR,
        }
    }
}

impl ContrastOptions {
    fn roi_names(&self, atlas: &RoiAtlas) -> Vec<String> {
        self.rois
            .clone()
            .unwrap_or_else(|| atlas.names().map(str::to_string).collect())
    }

    fn language_names(&self, atlas: &RoiAtlas) -> Vec<String> {
        self.language_rois.clone().unwrap_or_else(|| self.roi_names(atlas))
    }
}

/// Per-voxel values that enter ROI means: mean correlations, optionally
/// ceiling-normalized (voxels below the floor become NaN).
fn voxel_values(mean_correlation: &[f64], ceiling: Option<&[f64]>, opts: &ContrastOptions) -> Result<Vec<f64>> {
    match (opts.normalize, ceiling) {
        (false, _) => Ok(mean_correlation.to_vec()),
        (true, Some(c)) => Ok(normalize_by_ceiling(mean_correlation, c, opts.ceiling_floor)?.values),
        (true, None) => Err(Error::InvalidArgument(
            "normalized scores requested without a noise ceiling".into(),
        )),
    }
}

/// Mask selecting the union of the named ROIs.
fn roi_union_mask(atlas: &RoiAtlas, names: &[String], n_voxels: usize) -> Result<Vec<bool>> {
    let idx = atlas.union_of(names.iter().map(String::as_str))?;
    let mut m = vec![false; n_voxels];
    for i in idx {
        if i >= n_voxels {
            return Err(Error::Shape(format!("ROI voxel {i} outside {n_voxels} voxels")));
        }
        m[i] = true;
    }
    Ok(m)
}

fn and(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

/// Mean over layers of the layers' ROI scores (layers where the ROI is
/// empty or undefined are skipped).
fn pooled_roi_score(layers: &[Vec<f64>], mask: Option<&[bool]>, atlas: &RoiAtlas, roi: &str) -> Result<Option<f64>> {
    let scores = layers
        .iter()
        .map(|v| roi_score(v, mask, atlas, roi))
        .collect::<Result<Vec<_>>>()?;
    Ok(nan_mean(scores.into_iter().flatten()))
}

/// Cross-modal connection contrast: `joint` (condition A) against `ablated`
/// (condition B) over the joint condition's union mask.
pub fn connection_contrast(
    subjects: &[SubjectLayers],
    condition_a: &str,
    condition_b: &str,
    opts: &ContrastOptions,
) -> Result<ContrastReport> {
    let first = subjects
        .first()
        .ok_or_else(|| Error::InvalidArgument("no subjects".into()))?;
    let n_layers = first.joint.len();
    for s in subjects {
        if s.joint.len() != n_layers || s.ablated.len() != n_layers || n_layers == 0 {
            return Err(Error::Shape(format!(
                "subject {} has {} joint and {} ablated layers, expected {} of each",
                s.id,
                s.joint.len(),
                s.ablated.len(),
                n_layers
            )));
        }
    }

    struct Prepared {
        mask: Vec<bool>,
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    }
    let prepared = subjects
        .iter()
        .map(|s| -> Result<Prepared> {
            let v = s.joint[0].mean_correlation.len();
            if s.joint.iter().chain(&s.ablated).any(|r| r.mean_correlation.len() != v) {
                return Err(Error::Shape(format!("subject {}: layers differ in voxel count", s.id)));
            }
            let values = |rs: &[EncodingResult]| {
                rs.iter()
                    .map(|r| voxel_values(&r.mean_correlation, s.ceiling.as_deref(), opts))
                    .collect::<Result<Vec<_>>>()
            };
            Ok(Prepared {
                mask: union_mask(&s.joint)?,
                a: values(&s.joint)?,
                b: values(&s.ablated)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let mut roi_rows = Vec::new();
    for roi in opts.roi_names(&first.atlas) {
        let mut pairs = Vec::new();
        let mut excluded = 0;
        for (s, p) in subjects.iter().zip(&prepared) {
            let a = pooled_roi_score(&p.a, Some(&p.mask), &s.atlas, &roi)?;
            let b = pooled_roi_score(&p.b, Some(&p.mask), &s.atlas, &roi)?;
            match (a, b) {
                (Some(a), Some(b)) => pairs.push((a, b)),
                _ => excluded += 1,
            }
        }
        if excluded > 0 {
            warnings.push(format!(
                "ROI {roi}: {excluded} subject(s) excluded (no selected voxels)"
            ));
        }
        roi_rows.push(roi_row(&roi, &pairs, excluded, Tail::TwoSided, opts.alpha));
    }

    let mut layerwise = Vec::new();
    for l in 0..n_layers {
        let mut pairs = Vec::new();
        for (s, p) in subjects.iter().zip(&prepared) {
            let lang = roi_union_mask(&s.atlas, &opts.language_names(&s.atlas), p.mask.len())?;
            let m = and(&p.mask, &lang);
            let pick = |v: &[f64]| nan_mean(v.iter().zip(&m).filter(|(_, k)| **k).map(|(x, _)| *x));
            if let (Some(a), Some(b)) = (pick(&p.a[l]), pick(&p.b[l])) {
                pairs.push((a, b));
            }
        }
        layerwise.push(layer_row(l, &pairs, Tail::TwoSided));
    }

    Ok(ContrastReport {
        mode: ContrastMode::Connection,
        condition_a: condition_a.to_string(),
        condition_b: condition_b.to_string(),
        alpha: opts.alpha,
        tail: tail_name(Tail::TwoSided),
        roi_rows,
        layerwise,
        voxel_selection: VoxelSelection {
            reference_condition: Some(condition_a.to_string()),
            rule: "union of significant voxels over all layers of the reference condition".into(),
        },
        layer_pooling: LAYER_POOLING.into(),
        normalized: opts.normalize,
        removal: None,
        baseline: None,
        warnings,
    })
}

/// How baseline features are produced.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSpec {
    pub mode: BaselineMode,
    pub draws: usize,
    pub seed: u64,
}

impl BaselineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.draws < 3 {
            return Err(Error::InvalidArgument(format!(
                "the random baseline needs at least 3 draws, got {}",
                self.draws
            )));
        }
        Ok(())
    }

    /// Draw `k` for `layer`: a standard-normal matrix of the residual's
    /// shape, or the residual with its rows shuffled.
    pub fn draw(&self, residual: &DMatrix<f64>, layer: usize, k: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((layer as u64) << 32) | k as u64);
        match self.mode {
            BaselineMode::Gaussian => DMatrix::from_fn(residual.nrows(), residual.ncols(), |_, _| {
                StandardNormal.sample(&mut rng)
            }),
            BaselineMode::Shuffle => {
                let mut order: Vec<usize> = (0..residual.nrows()).collect();
                order.shuffle(&mut rng);
                residual.select_rows(order.iter())
            }
        }
    }
}

/// Inputs of an interaction contrast. Every feature matrix has one row per
/// sample; a unimodal condition with a single layer applies to all layers.
#[derive(Debug, Clone)]
pub struct InteractionInput<'a> {
    pub condition_a: &'a str,
    pub joint: &'a [DMatrix<f64>],
    pub unimodal: Vec<(&'a str, &'a [DMatrix<f64>])>,
    pub subjects: Vec<InteractionSubject<'a>>,
}

#[derive(Debug, Clone)]
pub struct InteractionSubject<'a> {
    pub id: &'a str,
    pub responses: &'a DMatrix<f64>,
    pub atlas: &'a RoiAtlas,
    pub ceiling: Option<&'a [f64]>,
    /// Restricts ROI voxels; default is every ROI voxel.
    pub voxel_mask: Option<&'a [bool]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionOptions {
    pub contrast: ContrastOptions,
    pub removal_mode: RemovalMode,
    /// Remove unimodal conditions one after another (in the given order)
    /// instead of jointly.
    pub sequential: bool,
}

impl Default for InteractionOptions {
    fn default() -> Self {
        InteractionOptions {
            contrast: ContrastOptions::default(),
            removal_mode: RemovalMode::CrossValidated,
            sequential: false,
        }
    }
}

/// Per-layer residual of the joint features after removing the unimodal
/// ones, re-z-scored.
pub fn interaction_residuals(
    input: &InteractionInput,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
    opts: &InteractionOptions,
) -> Result<Vec<DMatrix<f64>>> {
    if input.unimodal.is_empty() {
        return Err(Error::InvalidArgument("nothing to remove".into()));
    }
    for (name, layers) in &input.unimodal {
        if !(layers.len() == 1 || layers.len() == input.joint.len()) {
            return Err(Error::Shape(format!(
                "condition {name} has {} layers; need 1 or {}",
                layers.len(),
                input.joint.len()
            )));
        }
    }
    par::try_map_range(input.joint.len(), |l| {
        let sources: Vec<&DMatrix<f64>> = input
            .unimodal
            .iter()
            .map(|(_, layers)| if layers.len() == 1 { &layers[0] } else { &layers[l] })
            .collect();
        let all = concat_columns(&sources)?;
        let mut residual = if opts.sequential {
            remove_sequential(&sources, &input.joint[l], scheme, cfg, opts.removal_mode)?
        } else {
            remove_information_with(&all, &input.joint[l], scheme, cfg, opts.removal_mode)?
        };
        // A penalized fit never removes an exact linear dependence completely,
        // and re-z-scoring would blow its remnant back up.
        for (j, exact) in linearly_determined(&all, &input.joint[l])?.into_iter().enumerate() {
            if exact {
                residual.column_mut(j).fill(0.0);
            }
        }
        Ok(zscore(&residual))
    })
}

/// Voxel values of an encoding of `features` for one subject.
fn encode_values(
    features: &DMatrix<f64>,
    subject: &InteractionSubject,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
    opts: &ContrastOptions,
) -> Result<Vec<f64>> {
    let r = fit_encoding(features, subject.responses, scheme, cfg)?;
    voxel_values(&r.mean_correlation, subject.ceiling, opts)
}

/// Multimodal interaction contrast: residual alignment (condition A) against
/// the random baseline (condition B), one-sided.
pub fn interaction_contrast(
    input: &InteractionInput,
    baseline: &BaselineSpec,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
    opts: &InteractionOptions,
) -> Result<ContrastReport> {
    baseline.validate()?;
    let first = input
        .subjects
        .first()
        .ok_or_else(|| Error::InvalidArgument("no subjects".into()))?;
    if input.joint.is_empty() {
        return Err(Error::InvalidArgument("no joint layers".into()));
    }
    let copts = &opts.contrast;
    let residuals = interaction_residuals(input, scheme, cfg, opts)?;
    let n_layers = residuals.len();
    let n_subj = input.subjects.len();
    let k_draws = baseline.draws;

    // values[layer][subject][0] = residual, [1 + k] = baseline draw k.
    let per_task = par::try_map_range(n_layers * n_subj * (1 + k_draws), |task| {
        let l = task / (n_subj * (1 + k_draws));
        let s = (task / (1 + k_draws)) % n_subj;
        let k = task % (1 + k_draws);
        let subject = &input.subjects[s];
        let features = if k == 0 {
            residuals[l].clone()
        } else {
            baseline.draw(&residuals[l], l, k - 1)
        };
        encode_values(&features, subject, scheme, cfg, copts)
    })?;
    let values = |l: usize, s: usize, k: usize| &per_task[(l * n_subj + s) * (1 + k_draws) + k];

    let mut warnings = Vec::new();
    let mut roi_rows = Vec::new();
    for roi in copts.roi_names(first.atlas) {
        let mut pairs = Vec::new();
        let mut excluded = 0;
        // Group mean per baseline draw, for the reported spread.
        let mut draw_means: Vec<Vec<f64>> = vec![Vec::new(); k_draws];
        for (s, subject) in input.subjects.iter().enumerate() {
            let score = |k: usize| -> Result<Option<f64>> {
                let scores = (0..n_layers)
                    .map(|l| roi_score(values(l, s, k), subject.voxel_mask, subject.atlas, &roi))
                    .collect::<Result<Vec<_>>>()?;
                Ok(nan_mean(scores.into_iter().flatten()))
            };
            let res = score(0)?;
            let draws = (1..=k_draws).map(score).collect::<Result<Vec<_>>>()?;
            match (res, nan_mean(draws.iter().flatten().copied())) {
                (Some(r), Some(b)) => {
                    pairs.push((r, b));
                    for (k, d) in draws.iter().enumerate() {
                        if let Some(d) = d {
                            draw_means[k].push(*d);
                        }
                    }
                }
                _ => excluded += 1,
            }
        }
        if excluded > 0 {
            warnings.push(format!("ROI {roi}: {excluded} subject(s) excluded (no usable voxels)"));
        }
        let mut row = roi_row(&roi, &pairs, excluded, Tail::OneSidedGreater, copts.alpha);
        let means: Vec<f64> = draw_means.iter().filter_map(|d| nan_mean(d.iter().copied())).collect();
        if means.len() >= 2 {
            let m = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
            row.baseline_sd = Some(var.sqrt());
        }
        roi_rows.push(row);
    }

    let mut layerwise = Vec::new();
    for l in 0..n_layers {
        let mut pairs = Vec::new();
        for (s, subject) in input.subjects.iter().enumerate() {
            let n_voxels = subject.responses.ncols();
            let mut m = roi_union_mask(subject.atlas, &copts.language_names(subject.atlas), n_voxels)?;
            if let Some(vm) = subject.voxel_mask {
                m = and(&m, vm);
            }
            let pick = |v: &[f64]| nan_mean(v.iter().zip(&m).filter(|(_, k)| **k).map(|(x, _)| *x));
            let res = pick(values(l, s, 0));
            let base = nan_mean((1..=k_draws).filter_map(|k| pick(values(l, s, k))));
            if let (Some(r), Some(b)) = (res, base) {
                pairs.push((r, b));
            }
        }
        layerwise.push(layer_row(l, &pairs, Tail::OneSidedGreater));
    }

    let removed: Vec<String> = input.unimodal.iter().map(|(n, _)| n.to_string()).collect();
    let uses_mask = input.subjects.iter().any(|s| s.voxel_mask.is_some());
    Ok(ContrastReport {
        mode: ContrastMode::Interaction,
        condition_a: format!("{} minus {}", input.condition_a, removed.join("+")),
        condition_b: format!("{} baseline", mode_name(baseline.mode)),
        alpha: copts.alpha,
        tail: tail_name(Tail::OneSidedGreater),
        roi_rows,
        layerwise,
        voxel_selection: VoxelSelection {
            reference_condition: None,
            rule: if uses_mask {
                "ROI voxels within a caller-supplied mask".into()
            } else {
                "all ROI voxels".into()
            },
        },
        layer_pooling: LAYER_POOLING.into(),
        normalized: copts.normalize,
        removal: Some(RemovalInfo {
            removed,
            sequential: opts.sequential,
            mode: opts.removal_mode,
        }),
        baseline: Some(BaselineInfo {
            mode: baseline.mode,
            draws: baseline.draws,
            seed: baseline.seed,
        }),
        warnings,
    })
}

fn mode_name(m: BaselineMode) -> &'static str {
    match m {
        BaselineMode::Gaussian => "gaussian",
        BaselineMode::Shuffle => "shuffle",
    }
}

/// Per-subject pooled ROI scores of `k` baseline draws starting at
/// `first_draw`, for null-versus-null comparisons.
pub fn baseline_roi_scores(
    input: &InteractionInput,
    baseline: &BaselineSpec,
    first_draw: usize,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
    opts: &InteractionOptions,
    roi: &str,
) -> Result<Vec<Option<f64>>> {
    let residuals = interaction_residuals(input, scheme, cfg, opts)?;
    par::try_map_range(input.subjects.len(), |s| {
        let subject = &input.subjects[s];
        let mut scores = Vec::new();
        for (l, res) in residuals.iter().enumerate() {
            for k in first_draw..first_draw + baseline.draws {
                let v = encode_values(&baseline.draw(res, l, k), subject, scheme, cfg, &opts.contrast)?;
                scores.extend(roi_score(&v, subject.voxel_mask, subject.atlas, roi)?);
            }
        }
        Ok(nan_mean(scores))
    })
}
