//! Correlation and hypothesis-test primitives.

mod special;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use special::{ln_beta, ln_gamma, reg_inc_beta, student_t_cdf, student_t_sf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    OneSidedGreater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub tail: Tail,
}

/// Multiple-comparison handling for per-voxel significance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    Bh,
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "bh" => Ok(Correction::Bh),
            other => Err(Error::InvalidArgument(format!("unknown FDR mode '{other}'"))),
        }
    }
}

/// Relative spread below which a sample is treated as constant.
const DEGENERATE_REL: f64 = 1e-12;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation. `Ok(None)` marks an undefined value (either input
/// constant), which callers exclude from averages.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "pearson inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs at least 3 samples, got {}",
            a.len()
        )));
    }
    Ok(pearson_unchecked(a, b))
}

pub(crate) fn pearson_unchecked(a: &[f64], b: &[f64]) -> Option<f64> {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale_a = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = a.len() as f64;
    if saa.sqrt() <= DEGENERATE_REL * scale_a * n.sqrt() || saa == 0.0 {
        return None;
    }
    if sbb.sqrt() <= DEGENERATE_REL * scale_b * n.sqrt() || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Column-wise Pearson correlation of two equally shaped matrices; undefined
/// columns are `NaN`.
pub fn pearson_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.shape(), b.shape(), "pearson_columns shape mismatch");
    (0..a.ncols())
        .map(|j| pearson_unchecked(a.column(j).as_slice(), b.column(j).as_slice()).unwrap_or(f64::NAN))
        .collect()
}

fn ttest_core(diffs: &[f64], scale: f64, tail: Tail) -> Result<TestResult> {
    let n = diffs.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "t-test needs at least 3 observations, got {n}"
        )));
    }
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("t-test input contains non-finite values".into()));
    }
    let m = mean(diffs);
    let var = diffs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 || sd <= DEGENERATE_REL * scale {
        return Err(Error::ZeroVariance);
    }
    let t = m / (sd / (n as f64).sqrt());
    let dof = n - 1;
    let p = match tail {
        Tail::OneSidedGreater => student_t_sf(t, dof as f64),
        Tail::TwoSided => (2.0 * student_t_sf(t.abs(), dof as f64)).min(1.0),
    };
    Ok(TestResult {
        statistic: t,
        p_value: p.clamp(0.0, 1.0),
        dof,
        tail,
    })
}

/// One-sample t-test of `x` against `mu0`.
pub fn one_sample_ttest(x: &[f64], mu0: f64, tail: Tail) -> Result<TestResult> {
    let scale = x.iter().fold(mu0.abs(), |m, v| m.max(v.abs()));
    let diffs: Vec<f64> = x.iter().map(|v| v - mu0).collect();
    ttest_core(&diffs, scale, tail)
}

/// Paired t-test: a one-sample test of `x − y` against zero. A constant
/// difference (including `x == y`) has zero variance and is an error.
pub fn paired_ttest(x: &[f64], y: &[f64], tail: Tail) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "paired t-test inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let scale = x.iter().chain(y).fold(0.0f64, |m, v| m.max(v.abs()));
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    ttest_core(&diffs, scale, tail)
}

/// Benjamini-Hochberg step-up selection at level `q`.
pub fn bh_fdr(p_values: &[f64], q: f64) -> Vec<bool> {
    let n = p_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let cutoff = order
        .iter()
        .enumerate()
        .filter(|(rank, &i)| p_values[i] <= (rank + 1) as f64 * q / n as f64)
        .map(|(rank, _)| rank + 1)
        .next_back()
        .unwrap_or(0);
    let mut mask = vec![false; n];
    for &i in &order[..cutoff] {
        mask[i] = true;
    }
    mask
}

/// Arithmetic mean of the finite entries, `None` if there are none.
pub fn nan_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}
