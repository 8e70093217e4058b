//! Cross-validated encoding models.
//!
//! Samples are split into contiguous, time-ordered outer folds. For each outer
//! fold the remaining rows are z-scored (statistics from those rows only), a
//! per-voxel ridge penalty is chosen by an inner contiguous cross-validation
//! over the training rows, and the resulting model predicts the held-out
//! block. Every sample is therefore predicted exactly once, by a model that
//! never saw it.

use std::fs;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixio::{read_matrix, validate_lambda_grid, write_matrix, Matrix};
use crate::par;
use crate::ridge::RidgePath;
use crate::stats::{bh_fdr, nan_mean, one_sample_ttest, pearson_unchecked, Correction, Tail};

/// Contiguous, balanced assignment of samples to folds. When the sample count
/// does not divide evenly, the earliest folds receive one extra sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldScheme {
    n_samples: usize,
    n_folds: usize,
    assignment: Vec<usize>,
}

impl FoldScheme {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        (0..self.n_folds).map(|k| self.fold_range(k).len()).collect()
    }

    pub fn fold_range(&self, fold: usize) -> Range<usize> {
        let base = self.n_samples / self.n_folds;
        let extra = self.n_samples % self.n_folds;
        let start = fold * base + fold.min(extra);
        let len = base + usize::from(fold < extra);
        start..start + len
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_range(fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let r = self.fold_range(fold);
        (0..r.start).chain(r.end..self.n_samples).collect()
    }
}

pub fn make_folds(n_samples: usize, n_folds: usize) -> Result<FoldScheme> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_samples < 2 * n_folds {
        return Err(Error::InvalidArgument(format!(
            "{n_samples} samples cannot fill {n_folds} folds of at least 2"
        )));
    }
    let mut scheme = FoldScheme {
        n_samples,
        n_folds,
        assignment: Vec::with_capacity(n_samples),
    };
    for k in 0..n_folds {
        let len = scheme.fold_range(k).len();
        scheme.assignment.extend(std::iter::repeat_n(k, len));
    }
    Ok(scheme)
}

/// 10 log-spaced values from 1e-1 to 1e8.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..10).map(|k| 10f64.powi(k - 1)).collect()
}

/// Per-column z-scoring with statistics from a fixed set of rows. Columns
/// whose spread is numerically zero keep a unit scale and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let magnitude = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let is_constant = sd == 0.0 || sd <= 1e-12 * magnitude;
            mean.push(m);
            scale.push(if is_constant { 1.0 } else { sd });
            constant.push(is_constant);
        }
        Standardizer { mean, scale, constant }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        z
    }

    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = z.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = *v * s + m);
        }
        x
    }
}

/// Z-scores every column of `x` using its own statistics.
pub fn zscore(x: &DMatrix<f64>) -> DMatrix<f64> {
    Standardizer::fit(x).apply(x)
}

/// What the inner cross-validation maximizes when picking a penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScore {
    /// Mean held-out Pearson correlation.
    #[default]
    Pearson,
    /// Negative mean held-out squared error (z-scored units). Unlike
    /// correlation it sees prediction amplitude, which matters when the
    /// prediction is subtracted rather than correlated.
    NegMse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub inner_folds: usize,
    pub lambda_grid: Vec<f64>,
    pub alpha: f64,
    pub correction: Correction,
    #[serde(default)]
    pub selection: SelectionScore,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            inner_folds: 5,
            lambda_grid: default_lambda_grid(),
            alpha: 0.05,
            correction: Correction::None,
            selection: SelectionScore::Pearson,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        validate_lambda_grid(&self.lambda_grid)?;
        if self.inner_folds < 2 {
            return Err(Error::InvalidArgument("inner_folds must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

fn check_pair(x: &DMatrix<f64>, y: &DMatrix<f64>, scheme: &FoldScheme) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "features have {} rows, responses have {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if scheme.n_samples() != x.nrows() {
        return Err(Error::Shape(format!(
            "fold scheme covers {} samples, data has {}",
            scheme.n_samples(),
            x.nrows()
        )));
    }
    if x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Shape("features and responses need at least one column".into()));
    }
    Ok(())
}

/// Per-component shrinkage factors for each voxel's penalty, laid out to
/// scale a projection `Uᵀ Y` column by column.
fn per_voxel_shrinkage(path: &RidgePath, lambdas: &[f64]) -> DMatrix<f64> {
    let s = path.singular_values();
    DMatrix::from_fn(s.len(), lambdas.len(), |k, j| s[k] / (s[k] * s[k] + lambdas[j]))
}

/// Inner cross-validation scores, `grid.len() × v`, averaged over inner
/// folds (NaN where undefined in every inner fold). Higher is better.
pub fn inner_scores(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    inner_folds: usize,
    grid: &[f64],
    selection: SelectionScore,
) -> Result<DMatrix<f64>> {
    let scheme = make_folds(x.nrows(), inner_folds)?;
    let v = y.ncols();
    let per_fold = par::try_map_range(inner_folds, |k| -> Result<DMatrix<f64>> {
        let train = scheme.train_indices(k);
        let test = scheme.test_indices(k);
        let x_tr = x.select_rows(train.iter());
        let y_tr = y.select_rows(train.iter());
        let x_scaler = Standardizer::fit(&x_tr);
        let y_scaler = Standardizer::fit(&y_tr);
        let path = match RidgePath::factor(&x_scaler.apply(&x_tr)) {
            Ok(p) => p,
            Err(Error::DegenerateDesign) => return Ok(DMatrix::from_element(grid.len(), v, f64::NAN)),
            Err(e) => return Err(e),
        };
        let projected = path.project(&y_scaler.apply(&y_tr))?;
        let x_te = x_scaler.apply(&x.select_rows(test.iter()));
        let y_te = y_scaler.apply(&y.select_rows(test.iter()));
        // (X_test V)ᵀ, r × m
        let xv_t = (x_te * path.right_vectors()).transpose();
        let mut scores = DMatrix::from_element(grid.len(), v, f64::NAN);
        for (li, &lambda) in grid.iter().enumerate() {
            let d = path.shrinkage(lambda);
            let mut scaled = projected.clone();
            for (r, dr) in d.iter().enumerate() {
                scaled.row_mut(r).scale_mut(*dr);
            }
            let pred = xv_t.tr_mul(&scaled);
            for j in 0..v {
                let (p, t) = (pred.column(j), y_te.column(j));
                scores[(li, j)] = match selection {
                    SelectionScore::Pearson => pearson_unchecked(p.as_slice(), t.as_slice()).unwrap_or(f64::NAN),
                    SelectionScore::NegMse => -(p - t).norm_squared() / p.len() as f64,
                };
            }
        }
        Ok(scores)
    })?;
    Ok(DMatrix::from_fn(grid.len(), v, |li, j| {
        nan_mean(per_fold.iter().map(|s| s[(li, j)])).unwrap_or(f64::NAN)
    }))
}

/// Per-voxel penalty maximizing the inner score; ties go to the larger
/// penalty, and voxels with no defined score get the largest.
pub fn select_lambdas(scores: &DMatrix<f64>, grid: &[f64]) -> Vec<f64> {
    (0..scores.ncols())
        .map(|j| {
            let mut best = grid.len() - 1;
            let mut best_score = f64::NEG_INFINITY;
            for li in 0..grid.len() {
                let s = scores[(li, j)];
                if s.is_finite() && s >= best_score {
                    best = li;
                    best_score = s;
                }
            }
            grid[best]
        })
        .collect()
}

/// The model trained for one outer fold, in z-scored units.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub fold: usize,
    /// p × v weights mapping z-scored features to z-scored responses.
    pub weights: DMatrix<f64>,
    pub selected_lambda: Vec<f64>,
    pub x_scaler: Standardizer,
    pub y_scaler: Standardizer,
}

impl FoldModel {
    /// Predictions in the responses' original units.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = crate::ridge::predict(&self.weights, &self.x_scaler.apply(x))?;
        Ok(self.y_scaler.invert(&z))
    }
}

/// Fits ridge on `x`/`y` with per-voxel penalties chosen by inner CV.
pub fn fit_with_inner_cv(x: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &EncodingConfig, fold: usize) -> Result<FoldModel> {
    let scores = inner_scores(x, y, cfg.inner_folds, &cfg.lambda_grid, cfg.selection)?;
    let selected_lambda = select_lambdas(&scores, &cfg.lambda_grid);
    let x_scaler = Standardizer::fit(x);
    let y_scaler = Standardizer::fit(y);
    let weights = match RidgePath::factor(&x_scaler.apply(x)) {
        Ok(path) => {
            let mut projected = path.project(&y_scaler.apply(y))?;
            projected.component_mul_assign(&per_voxel_shrinkage(&path, &selected_lambda));
            path.weights_from_projection(&projected, &DVector::from_element(path.rank(), 1.0))
        }
        // Every feature column constant on these rows: the only fit is zero.
        Err(Error::DegenerateDesign) => DMatrix::zeros(x.ncols(), y.ncols()),
        Err(e) => return Err(e),
    };
    Ok(FoldModel {
        fold,
        weights,
        selected_lambda,
        x_scaler,
        y_scaler,
    })
}

/// Trains the model for outer fold `fold`, reading only its training rows.
pub fn fit_fold(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    scheme: &FoldScheme,
    fold: usize,
    cfg: &EncodingConfig,
) -> Result<FoldModel> {
    check_pair(x, y, scheme)?;
    if fold >= scheme.n_folds() {
        return Err(Error::InvalidArgument(format!("fold {fold} out of range")));
    }
    let train = scheme.train_indices(fold);
    fit_with_inner_cv(&x.select_rows(train.iter()), &y.select_rows(train.iter()), cfg, fold)
}

/// Held-out predictions for every sample.
#[derive(Debug, Clone)]
pub struct CvPredictions {
    /// n × v, original response units.
    pub predictions: DMatrix<f64>,
    /// n_folds × v
    pub selected_lambda: DMatrix<f64>,
    /// Voxels that were constant within some outer training fold.
    pub constant_voxels: Vec<bool>,
}

pub fn cross_validated_predictions(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
) -> Result<CvPredictions> {
    check_pair(x, y, scheme)?;
    cfg.validate()?;
    let models = par::try_map_range(scheme.n_folds(), |k| fit_fold(x, y, scheme, k, cfg))?;
    let (n, v) = y.shape();
    let mut predictions = DMatrix::zeros(n, v);
    let mut selected_lambda = DMatrix::zeros(scheme.n_folds(), v);
    let mut constant_voxels = vec![false; v];
    for model in &models {
        let range = scheme.fold_range(model.fold);
        let held_out = x.rows(range.start, range.len()).into_owned();
        let pred = model.predict(&held_out)?;
        predictions.rows_mut(range.start, range.len()).copy_from(&pred);
        for j in 0..v {
            selected_lambda[(model.fold, j)] = model.selected_lambda[j];
            constant_voxels[j] |= model.y_scaler.constant[j];
        }
    }
    Ok(CvPredictions {
        predictions,
        selected_lambda,
        constant_voxels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingResult {
    pub cv_predictions: DMatrix<f64>,
    /// n_folds × v; NaN where undefined.
    pub fold_correlations: DMatrix<f64>,
    /// Mean over defined folds; NaN if none.
    pub mean_correlation: Vec<f64>,
    pub selected_lambda: DMatrix<f64>,
    pub significance_pvalues: Vec<f64>,
    pub significant_mask: Vec<bool>,
    pub constant_voxels: Vec<bool>,
    pub alpha: f64,
    pub correction: Correction,
}

/// One-sided p-value that the fold correlations exceed zero. Degenerate
/// samples (too few defined folds, or no spread) resolve by the sign of
/// their mean.
fn fold_significance(corrs: &[f64]) -> f64 {
    let defined: Vec<f64> = corrs.iter().copied().filter(|v| v.is_finite()).collect();
    if defined.len() < 3 {
        return 1.0;
    }
    match one_sample_ttest(&defined, 0.0, Tail::OneSidedGreater) {
        Ok(t) => t.p_value,
        Err(_) => {
            if defined.iter().sum::<f64>() > 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

pub fn fit_encoding(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
) -> Result<EncodingResult> {
    if scheme.n_folds() < 3 {
        return Err(Error::InvalidArgument(format!(
            "significance testing across folds needs at least 3 folds, got {}",
            scheme.n_folds()
        )));
    }
    if scheme.fold_sizes().iter().any(|&s| s < 3) {
        return Err(Error::InvalidArgument(
            "every outer fold needs at least 3 samples for a correlation".into(),
        ));
    }
    let cv = cross_validated_predictions(x, y, scheme, cfg)?;
    let v = y.ncols();
    let mut fold_correlations = DMatrix::from_element(scheme.n_folds(), v, f64::NAN);
    for k in 0..scheme.n_folds() {
        let r = scheme.fold_range(k);
        let pred = cv.predictions.rows(r.start, r.len());
        let truth = y.rows(r.start, r.len());
        for j in 0..v {
            let p: Vec<f64> = pred.column(j).iter().copied().collect();
            let t: Vec<f64> = truth.column(j).iter().copied().collect();
            if let Some(c) = pearson_unchecked(&p, &t) {
                fold_correlations[(k, j)] = c;
            }
        }
    }
    let mean_correlation: Vec<f64> = (0..v)
        .map(|j| nan_mean(fold_correlations.column(j).iter().copied()).unwrap_or(f64::NAN))
        .collect();
    let significance_pvalues: Vec<f64> = (0..v)
        .map(|j| {
            let corrs: Vec<f64> = fold_correlations.column(j).iter().copied().collect();
            fold_significance(&corrs)
        })
        .collect();
    let significant_mask = match cfg.correction {
        Correction::None => significance_pvalues.iter().map(|&p| p < cfg.alpha).collect(),
        Correction::Bh => bh_fdr(&significance_pvalues, cfg.alpha),
    };
    Ok(EncodingResult {
        cv_predictions: cv.predictions,
        fold_correlations,
        mean_correlation,
        selected_lambda: cv.selected_lambda,
        significance_pvalues,
        significant_mask,
        constant_voxels: cv.constant_voxels,
        alpha: cfg.alpha,
        correction: cfg.correction,
    })
}

/// Mean of the per-voxel mean correlation over `subset`, skipping undefined
/// voxels. `None` flags an empty (or entirely undefined) subset.
///
/// # Panics
/// If an index is out of range.
pub fn score_alignment(result: &EncodingResult, subset: &[usize]) -> Option<f64> {
    nan_mean(subset.iter().map(|&i| result.mean_correlation[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSummary {
    pub n_samples: usize,
    pub n_voxels: usize,
    pub n_folds: usize,
    pub alpha: f64,
    pub correction: Correction,
    pub mean_correlation: Option<f64>,
    pub n_significant: usize,
    pub mean_correlation_significant: Option<f64>,
    pub n_constant_voxels: usize,
    pub n_undefined_voxels: usize,
}

const FIELD_FILES: [&str; 6] = [
    "cv_predictions",
    "fold_correlations",
    "mean_correlation",
    "selected_lambda",
    "significance_pvalues",
    "significant_mask",
];

impl EncodingResult {
    pub fn n_voxels(&self) -> usize {
        self.mean_correlation.len()
    }

    pub fn summary(&self) -> EncodingSummary {
        let significant: Vec<usize> = (0..self.n_voxels()).filter(|&j| self.significant_mask[j]).collect();
        EncodingSummary {
            n_samples: self.cv_predictions.nrows(),
            n_voxels: self.n_voxels(),
            n_folds: self.fold_correlations.nrows(),
            alpha: self.alpha,
            correction: self.correction,
            mean_correlation: nan_mean(self.mean_correlation.iter().copied()),
            n_significant: significant.len(),
            mean_correlation_significant: score_alignment(self, &significant),
            n_constant_voxels: self.constant_voxels.iter().filter(|&&c| c).count(),
            n_undefined_voxels: self.mean_correlation.iter().filter(|v| !v.is_finite()).count(),
        }
    }

    /// Writes one `.eamx` per field plus `summary.json`. `extra` is merged
    /// into the summary object (provenance records and the like).
    pub fn write_dir(&self, dir: impl AsRef<Path>, extra: Option<&serde_json::Value>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let column = |v: &[f64]| Matrix::column(v);
        let mask: Vec<f64> = self.significant_mask.iter().map(|&b| f64::from(u8::from(b))).collect();
        let files: [(&str, Matrix); 6] = [
            (FIELD_FILES[0], Matrix::from_dmatrix(&self.cv_predictions)?),
            (FIELD_FILES[1], Matrix::from_dmatrix(&self.fold_correlations)?),
            (FIELD_FILES[2], column(&self.mean_correlation)?),
            (FIELD_FILES[3], Matrix::from_dmatrix(&self.selected_lambda)?),
            (FIELD_FILES[4], column(&self.significance_pvalues)?),
            (FIELD_FILES[5], column(&mask)?),
        ];
        for (name, m) in &files {
            write_matrix(m, dir.join(format!("{name}.eamx")))?;
        }
        let constant: Vec<f64> = self.constant_voxels.iter().map(|&b| f64::from(u8::from(b))).collect();
        write_matrix(&column(&constant)?, dir.join("constant_voxels.eamx"))?;

        let mut summary = serde_json::to_value(self.summary()).expect("summary serializes");
        if let (Some(obj), Some(serde_json::Value::Object(more))) = (summary.as_object_mut(), extra) {
            for (k, v) in more {
                obj.insert(k.clone(), v.clone());
            }
        }
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let load = |name: &str| read_matrix(dir.join(format!("{name}.eamx")), false);
        let summary_path = dir.join("summary.json");
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: EncodingSummary = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: summary_path.clone(),
            source,
        })?;
        let to_vec = |m: Matrix| m.into_data();
        let to_mask = |m: Matrix| m.into_data().into_iter().map(|v| v != 0.0).collect::<Vec<bool>>();
        let result = EncodingResult {
            cv_predictions: load(FIELD_FILES[0])?.to_dmatrix(),
            fold_correlations: load(FIELD_FILES[1])?.to_dmatrix(),
            mean_correlation: to_vec(load(FIELD_FILES[2])?),
            selected_lambda: load(FIELD_FILES[3])?.to_dmatrix(),
            significance_pvalues: to_vec(load(FIELD_FILES[4])?),
            significant_mask: to_mask(load(FIELD_FILES[5])?),
            constant_voxels: to_mask(load("constant_voxels")?),
            alpha: summary.alpha,
            correction: summary.correction,
        };
        let v = result.n_voxels();
        if result.cv_predictions.ncols() != v
            || result.significant_mask.len() != v
            || result.significance_pvalues.len() != v
        {
            return Err(Error::Shape(format!(
                "inconsistent encoding result fields in {}",
                dir.display()
            )));
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn even_split() {
        let s = make_folds(12, 6).unwrap();
        assert_eq!(s.assignment(), &[0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5]);
    }

    #[test]
    fn remainder_goes_to_earliest_folds() {
        let s = make_folds(13, 6).unwrap();
        assert_eq!(s.fold_sizes(), vec![3, 2, 2, 2, 2, 2]);
        assert_eq!(&s.assignment()[..4], &[0, 0, 0, 1]);
    }

    #[test]
    fn paper_scale_split() {
        let s = make_folds(1075, 6).unwrap();
        assert_eq!(s.fold_sizes(), vec![180, 179, 179, 179, 179, 179]);
        assert_eq!(s.fold_range(1), 180..359);
    }

    #[test]
    fn fold_preconditions() {
        assert!(make_folds(10, 1).is_err());
        assert!(make_folds(11, 6).is_err());
        assert!(make_folds(12, 6).is_ok());
    }

    #[test]
    fn train_and_test_partition_samples() {
        let s = make_folds(23, 4).unwrap();
        for k in 0..4 {
            let mut all = s.train_indices(k);
            all.extend(s.test_indices(k));
            all.sort_unstable();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
    }

    #[test]
    fn default_grid_spans_decades() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[9], 1e8);
    }

    #[test]
    fn standardizer_flags_constant_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let s = Standardizer::fit(&x);
        assert_eq!(s.constant, vec![false, true]);
        assert_eq!(s.scale[1], 1.0);
        let z = s.apply(&x);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        assert!((s.invert(&z) - x).amax() < 1e-15);
    }

    #[test]
    fn noiseless_recovery() {
        let x = randn(120, 5, 1);
        let w = randn(5, 8, 2);
        let y = &x * &w;
        let scheme = make_folds(120, 6).unwrap();
        let res = fit_encoding(&x, &y, &scheme, &EncodingConfig::default()).unwrap();
        for &r in &res.mean_correlation {
            assert!(r >= 0.999, "{r}");
        }
        assert!(res.significant_mask.iter().all(|&b| b));
    }

    #[test]
    fn selection_prefers_larger_penalty_on_ties() {
        let grid = [1.0, 10.0, 100.0];
        let scores = DMatrix::from_row_slice(3, 3, &[0.5, f64::NAN, 0.2, 0.5, f64::NAN, 0.3, 0.1, f64::NAN, 0.3]);
        assert_eq!(select_lambdas(&scores, &grid), vec![10.0, 100.0, 100.0]);
    }

    #[test]
    fn constant_voxel_is_flagged_and_undefined() {
        let x = randn(60, 3, 3);
        let mut y = randn(60, 2, 4);
        y.column_mut(1).fill(2.5);
        let scheme = make_folds(60, 6).unwrap();
        let res = fit_encoding(&x, &y, &scheme, &EncodingConfig::default()).unwrap();
        assert_eq!(res.constant_voxels, vec![false, true]);
        assert!(res.mean_correlation[1].is_nan());
        assert!(!res.significant_mask[1]);
        assert_eq!(res.significance_pvalues[1], 1.0);
    }

    #[test]
    fn two_fold_scheme_cannot_be_tested() {
        let x = randn(40, 3, 5);
        let y = randn(40, 2, 6);
        let scheme = make_folds(40, 2).unwrap();
        assert!(fit_encoding(&x, &y, &scheme, &EncodingConfig::default()).is_err());
    }

    #[test]
    fn row_mismatch_is_shape_error() {
        let scheme = make_folds(40, 4).unwrap();
        assert!(matches!(
            fit_encoding(&randn(40, 3, 1), &randn(39, 2, 2), &scheme, &EncodingConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn held_out_rows_do_not_leak() {
        let x = randn(90, 6, 7);
        let y = &x * randn(6, 5, 8) + randn(90, 5, 9);
        let scheme = make_folds(90, 6).unwrap();
        let cfg = EncodingConfig::default();
        for k in 0..6 {
            let clean = fit_fold(&x, &y, &scheme, k, &cfg).unwrap();
            let mut corrupted = y.clone();
            for i in scheme.fold_range(k) {
                corrupted.row_mut(i).fill(1e6 * (i as f64 + 1.0));
            }
            let dirty = fit_fold(&x, &corrupted, &scheme, k, &cfg).unwrap();
            assert_eq!(clean.selected_lambda, dirty.selected_lambda);
            assert!(clean
                .weights
                .iter()
                .zip(dirty.weights.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn voxel_permutation_is_equivariant() {
        let x = randn(72, 4, 10);
        let y = &x * randn(4, 6, 11) + randn(72, 6, 12) * 2.0;
        let perm = [3, 0, 5, 1, 4, 2];
        let y_perm = y.select_columns(perm.iter());
        let scheme = make_folds(72, 6).unwrap();
        let cfg = EncodingConfig::default();
        let a = fit_encoding(&x, &y, &scheme, &cfg).unwrap();
        let b = fit_encoding(&x, &y_perm, &scheme, &cfg).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(a.mean_correlation[old].to_bits(), b.mean_correlation[new].to_bits());
            assert_eq!(a.significance_pvalues[old], b.significance_pvalues[new]);
            assert_eq!(a.selected_lambda.column(old), b.selected_lambda.column(new));
        }
    }

    #[test]
    fn adding_a_constant_leaves_correlations_unchanged() {
        let x = randn(72, 4, 13);
        let y = &x * randn(4, 3, 14) + randn(72, 3, 15);
        let mut shifted = y.clone();
        shifted.column_mut(1).add_scalar_mut(250.0);
        let scheme = make_folds(72, 6).unwrap();
        let cfg = EncodingConfig::default();
        let a = fit_encoding(&x, &y, &scheme, &cfg).unwrap();
        let b = fit_encoding(&x, &shifted, &scheme, &cfg).unwrap();
        assert!((a.fold_correlations.clone() - b.fold_correlations.clone()).amax() < 1e-9);
    }

    #[test]
    fn score_alignment_means() {
        let mut res = fit_encoding(
            &randn(36, 2, 16),
            &randn(36, 4, 17),
            &make_folds(36, 6).unwrap(),
            &EncodingConfig::default(),
        )
        .unwrap();
        res.mean_correlation = vec![0.25, 0.25, 0.25, 0.25];
        assert_eq!(score_alignment(&res, &[0, 1, 2, 3]), Some(0.25));
        res.mean_correlation = vec![0.1, f64::NAN, 0.4, -0.2];
        assert_eq!(score_alignment(&res, &[2]), Some(0.4));
        assert!((score_alignment(&res, &[0, 1, 2]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(score_alignment(&res, &[1]), None);
        assert_eq!(score_alignment(&res, &[]), None);
    }

    #[test]
    fn result_directory_round_trip() {
        let x = randn(48, 3, 18);
        let y = &x * randn(3, 4, 19) + randn(48, 4, 20);
        let res = fit_encoding(&x, &y, &make_folds(48, 6).unwrap(), &EncodingConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        res.write_dir(dir.path(), Some(&serde_json::json!({"layer": 3})))
            .unwrap();
        let back = EncodingResult::read_dir(dir.path()).unwrap();
        assert_eq!(back, res);
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["layer"], 3);
        assert_eq!(summary["n_voxels"], 4);
    }
}
