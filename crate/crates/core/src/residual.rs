//! Removal of linearly predictable information.
//!
//! To strip what representation A explains from representation B, ridge
//! regression predicts B from A and the prediction is subtracted. By default
//! the removal is cross-validated: each block of rows is residualized by a
//! model fitted on the other blocks, with the same z-scoring and nested
//! penalty selection as the encoding models, except that penalties are chosen
//! by held-out squared error: the prediction is subtracted, so its amplitude
//! has to be right, and correlation cannot see amplitude.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::crossval::{
    cross_validated_predictions, fit_with_inner_cv, zscore, EncodingConfig, FoldScheme, SelectionScore, Standardizer,
};
use crate::error::{Error, Result};
use crate::ridge::RidgePath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalMode {
    /// Held-out rows are residualized by models that never saw them.
    #[default]
    CrossValidated,
    /// One model fit on all rows; leaks and overstates removal.
    InSample,
}

/// Describes a removal for reports: which representation was removed from
/// which, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSpec {
    pub source: String,
    pub target: String,
    pub lambda_grid: Vec<f64>,
    pub n_folds: usize,
    pub mode: RemovalMode,
}

pub fn concat_columns(parts: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
    let n = first.nrows();
    if let Some(bad) = parts.iter().find(|m| m.nrows() != n) {
        return Err(Error::Shape(format!(
            "cannot concatenate matrices with {} and {} rows",
            n,
            bad.nrows()
        )));
    }
    let p: usize = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(n, p);
    let mut at = 0;
    for m in parts {
        out.columns_mut(at, m.ncols()).copy_from(m);
        at += m.ncols();
    }
    Ok(out)
}

/// `B − B̂`, where `B̂` predicts `target` from `source`.
pub fn remove_information_with(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
    mode: RemovalMode,
) -> Result<DMatrix<f64>> {
    if source.nrows() != target.nrows() {
        return Err(Error::Shape(format!(
            "source has {} rows, target has {}",
            source.nrows(),
            target.nrows()
        )));
    }
    let cfg = &removal_config(cfg);
    let predicted = match mode {
        RemovalMode::CrossValidated => cross_validated_predictions(source, target, scheme, cfg)?.predictions,
        RemovalMode::InSample => {
            cfg.validate()?;
            fit_with_inner_cv(source, target, cfg, 0)?.predict(source)?
        }
    };
    Ok(target - predicted)
}

/// `cfg` with penalty selection switched to held-out squared error.
pub fn removal_config(cfg: &EncodingConfig) -> EncodingConfig {
    EncodingConfig {
        selection: SelectionScore::NegMse,
        ..cfg.clone()
    }
}

/// Cross-validated removal of `source` from `target`.
pub fn remove_information(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
) -> Result<DMatrix<f64>> {
    remove_information_with(source, target, scheme, cfg, RemovalMode::CrossValidated)
}

/// Removes the masked-prediction target representation from the joint
/// representation. Same computation as
/// `remove_information(mask_truth, joint, ..)`.
pub fn remove_masked_prediction(
    joint: &DMatrix<f64>,
    mask_truth: &DMatrix<f64>,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
) -> Result<DMatrix<f64>> {
    remove_information(mask_truth, joint, scheme, cfg)
}

/// Removes `sources` from `target` one after another, in the given order.
pub fn remove_sequential(
    sources: &[&DMatrix<f64>],
    target: &DMatrix<f64>,
    scheme: &FoldScheme,
    cfg: &EncodingConfig,
    mode: RemovalMode,
) -> Result<DMatrix<f64>> {
    let mut current = target.clone();
    for s in sources {
        current = remove_information_with(s, &current, scheme, cfg, mode)?;
    }
    Ok(current)
}

/// Relative spread below which a least-squares residual is rounding error.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-9;

/// Flags the `target` columns that are exactly linear (to rounding) in
/// `source` plus an intercept, judged by the in-sample least-squares fit.
pub fn linearly_determined(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Vec<bool>> {
    if source.nrows() != target.nrows() {
        return Err(Error::Shape(format!(
            "source has {} rows, target has {}",
            source.nrows(),
            target.nrows()
        )));
    }
    let x = zscore(source);
    let y = zscore(target);
    let spread = Standardizer::fit(target);
    let residual = match RidgePath::factor(&x) {
        Ok(path) => &y - &x * path.solve_least_squares(&y)?,
        Err(Error::DegenerateDesign) => y,
        Err(e) => return Err(e),
    };
    Ok(column_variances(&residual)
        .into_iter()
        .zip(&spread.constant)
        .map(|(v, &constant)| constant || v.sqrt() <= EXACT_FIT_TOLERANCE)
        .collect())
}

/// Per-column variance (population).
pub fn column_variances(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    m.column_iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Residual variance as a fraction of the original, per column.
pub fn retained_variance(original: &DMatrix<f64>, residual: &DMatrix<f64>) -> Vec<f64> {
    column_variances(residual)
        .into_iter()
        .zip(column_variances(original))
        .map(|(r, o)| if o > 0.0 { r / o } else { f64::NAN })
        .collect()
}
