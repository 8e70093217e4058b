//! Inter-subject noise ceilings.
//!
//! Each subject is predicted from the remaining subjects (their response
//! matrices concatenated column-wise as the design) with the usual
//! cross-validated ridge encoding; the held-out correlation is that subject's
//! ceiling, and the group ceiling is the mean over subjects.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::crossval::{fit_encoding, EncodingConfig, FoldScheme};
use crate::error::{Error, Result};
use crate::par;
use crate::residual::concat_columns;
use crate::stats::nan_mean;

/// Default ceiling below which normalized scores are not reported.
pub const DEFAULT_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeilingResult {
    /// Group ceiling: mean over subjects, per voxel (NaN if undefined for all).
    pub per_voxel_ceiling: Vec<f64>,
    /// One row per held-out subject.
    pub per_subject_ceilings: Vec<Vec<f64>>,
    pub n_subjects: usize,
}

impl CeilingResult {
    pub fn n_voxels(&self) -> usize {
        self.per_voxel_ceiling.len()
    }
}

/// Leave-one-subject-out ceilings for subjects sharing a voxel space.
pub fn noise_ceiling(ys: &[DMatrix<f64>], scheme: &FoldScheme, cfg: &EncodingConfig) -> Result<CeilingResult> {
    if ys.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "noise ceilings need at least 3 subjects, got {}",
            ys.len()
        )));
    }
    let shape = ys[0].shape();
    if let Some((i, y)) = ys.iter().enumerate().find(|(_, y)| y.shape() != shape) {
        return Err(Error::Shape(format!(
            "subject {i} has shape {:?}, subject 0 has {:?}; ceilings need a common voxel space",
            y.shape(),
            shape
        )));
    }
    let per_subject_ceilings = par::try_map_range(ys.len(), |s| -> Result<Vec<f64>> {
        let others: Vec<&DMatrix<f64>> = ys.iter().enumerate().filter(|(i, _)| *i != s).map(|(_, y)| y).collect();
        let design = concat_columns(&others)?;
        Ok(fit_encoding(&design, &ys[s], scheme, cfg)?.mean_correlation)
    })?;
    let v = shape.1;
    let per_voxel_ceiling = (0..v)
        .map(|j| nan_mean(per_subject_ceilings.iter().map(|c| c[j])).unwrap_or(f64::NAN))
        .collect();
    Ok(CeilingResult {
        per_voxel_ceiling,
        per_subject_ceilings,
        n_subjects: ys.len(),
    })
}

/// Ceiling-normalized scores. Voxels whose ceiling is below the floor (or
/// undefined) are flagged and carry NaN, so NaN-skipping means exclude them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScores {
    pub values: Vec<f64>,
    pub excluded: Vec<bool>,
}

pub fn normalize_score(score: f64, ceiling: f64, floor: f64) -> Option<f64> {
    if ceiling.is_finite() && ceiling >= floor {
        Some(score / ceiling.max(floor))
    } else {
        None
    }
}

pub fn normalize_by_ceiling(scores: &[f64], ceiling: &[f64], floor: f64) -> Result<NormalizedScores> {
    if scores.len() != ceiling.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} ceiling values",
            scores.len(),
            ceiling.len()
        )));
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ceiling floor must be positive, got {floor}"
        )));
    }
    let normalized: Vec<Option<f64>> = scores
        .iter()
        .zip(ceiling)
        .map(|(&s, &c)| normalize_score(s, c, floor))
        .collect();
    Ok(NormalizedScores {
        values: normalized.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        excluded: normalized.iter().map(Option::is_none).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossval::make_folds;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn subjects(shared: &DMatrix<f64>, sigma: f64, n_subjects: usize, seed: u64) -> Vec<DMatrix<f64>> {
        (0..n_subjects)
            .map(|s| shared + randn(shared.nrows(), shared.ncols(), seed + s as u64) * sigma)
            .collect()
    }

    #[test]
    fn identical_subjects_reach_one() {
        let shared = randn(120, 8, 1);
        let ys = vec![shared.clone(); 4];
        let c = noise_ceiling(&ys, &make_folds(120, 6).unwrap(), &EncodingConfig::default()).unwrap();
        assert_eq!(c.n_subjects, 4);
        assert!(
            c.per_voxel_ceiling.iter().all(|&v| v >= 0.99),
            "{:?}",
            c.per_voxel_ceiling
        );
    }

    #[test]
    fn independent_subjects_sit_near_zero() {
        let scheme = make_folds(90, 6).unwrap();
        let cfg = EncodingConfig::default();
        let mut outside = 0;
        for seed in 0..20u64 {
            let ys: Vec<_> = (0..3).map(|s| randn(90, 30, 1000 * seed + s)).collect();
            let c = noise_ceiling(&ys, &scheme, &cfg).unwrap();
            let vals: Vec<f64> = c.per_voxel_ceiling.iter().copied().filter(|v| v.is_finite()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            if mean.abs() >= 2.0 * sd / n.sqrt() {
                outside += 1;
            }
        }
        // Two standard errors: about 1 in 20 seeds is expected outside.
        assert!(outside <= 3, "{outside} of 20 seeds outside 2 SE");
    }

    #[test]
    fn ceilings_fall_as_noise_grows() {
        let scheme = make_folds(150, 6).unwrap();
        let cfg = EncodingConfig::default();
        let shared = randn(150, 20, 7);
        let group: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&sigma| {
                let c = noise_ceiling(&subjects(&shared, sigma, 4, 70), &scheme, &cfg).unwrap();
                nan_mean(c.per_voxel_ceiling.iter().copied()).unwrap()
            })
            .collect();
        assert!(group[0] > group[1] && group[1] > group[2], "{group:?}");
    }

    #[test]
    fn subject_order_does_not_matter() {
        let scheme = make_folds(60, 6).unwrap();
        let cfg = EncodingConfig::default();
        let ys = subjects(&randn(60, 5, 3), 1.0, 4, 30);
        let a = noise_ceiling(&ys, &scheme, &cfg).unwrap();
        let reversed: Vec<_> = ys.iter().rev().cloned().collect();
        let b = noise_ceiling(&reversed, &scheme, &cfg).unwrap();
        for (x, y) in a.per_voxel_ceiling.iter().zip(&b.per_voxel_ceiling) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut back = b.per_subject_ceilings.clone();
        back.reverse();
        for (ra, rb) in a.per_subject_ceilings.iter().zip(&back) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicated_subject_does_not_hurt_the_others() {
        // Duplicating a design block halves its effective penalty, so the
        // ceiling can move by a small amount in either direction.
        let scheme = make_folds(120, 6).unwrap();
        let cfg = EncodingConfig::default();
        let ys = subjects(&randn(120, 6, 5), 1.0, 3, 50);
        let base = noise_ceiling(&ys, &scheme, &cfg).unwrap();
        let mut more = ys.clone();
        more.push(ys[0].clone());
        let dup = noise_ceiling(&more, &scheme, &cfg).unwrap();
        for s in 1..3 {
            let before = nan_mean(base.per_subject_ceilings[s].iter().copied()).unwrap();
            let after = nan_mean(dup.per_subject_ceilings[s].iter().copied()).unwrap();
            assert!(after >= before - 0.01, "subject {s}: {before} -> {after}");
        }
    }

    #[test]
    fn input_errors() {
        let scheme = make_folds(30, 6).unwrap();
        let cfg = EncodingConfig::default();
        let two = vec![randn(30, 2, 1), randn(30, 2, 2)];
        assert!(matches!(
            noise_ceiling(&two, &scheme, &cfg),
            Err(Error::InvalidArgument(_))
        ));
        let mismatched = vec![randn(30, 2, 1), randn(30, 2, 2), randn(30, 3, 3)];
        assert!(matches!(
            noise_ceiling(&mismatched, &scheme, &cfg),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn normalization_scalar_cases() {
        assert!((normalize_score(0.3, 0.6, DEFAULT_FLOOR).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(normalize_score(0.3, 0.04, DEFAULT_FLOOR), None);
        assert_eq!(normalize_score(0.3, f64::NAN, DEFAULT_FLOOR), None);
    }

    #[test]
    fn normalization_is_elementwise() {
        let scores = randn(40, 1, 9);
        let ceil = randn(40, 1, 10).map(|v| v.abs() * 0.2);
        let n = normalize_by_ceiling(scores.as_slice(), ceil.as_slice(), DEFAULT_FLOOR).unwrap();
        assert!(n.excluded.iter().any(|&e| e) && n.excluded.iter().any(|&e| !e));
        for i in 0..40 {
            match normalize_score(scores[i], ceil[i], DEFAULT_FLOOR) {
                Some(v) => assert_eq!(n.values[i], v),
                None => assert!(n.excluded[i] && n.values[i].is_nan()),
            }
        }
        assert!(normalize_by_ceiling(&[0.1], &[0.5, 0.5], DEFAULT_FLOOR).is_err());
    }
}
