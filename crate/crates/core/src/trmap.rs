//! Stimulus-to-TR alignment.
//!
//! Stimuli (video clips) arrive every `stimulus_stride_seconds`; the recording
//! is sampled every `tr_seconds`. The representation of a clip's final segment
//! overlaps several TRs; `tr_policy` picks the first or the last of them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrPolicy {
    FirstRelevant,
    LastRelevant,
}

impl std::str::FromStr for TrPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_relevant" | "first" => Ok(TrPolicy::FirstRelevant),
            "last_relevant" | "last" => Ok(TrPolicy::LastRelevant),
            other => Err(Error::InvalidArgument(format!("unknown TR policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrMapConfig {
    pub tr_seconds: f64,
    pub stimulus_stride_seconds: f64,
    pub segment_seconds: f64,
    pub tr_policy: TrPolicy,
    /// Fixed segment span in TRs. When `None` the span is
    /// `ceil(segment_seconds / tr_seconds)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_override: Option<usize>,
}

impl Default for TrMapConfig {
    /// Acquisition constants of the reference dataset. The 5 s segment over a
    /// 1.49 s TR is taken to cover 3 TRs, although `ceil(5 / 1.49)` is 4; the
    /// override makes that choice explicit and [`TrMapConfig::span_discrepancy`]
    /// reports it.
    fn default() -> Self {
        TrMapConfig {
            tr_seconds: 1.49,
            stimulus_stride_seconds: 3.0,
            segment_seconds: 5.0,
            tr_policy: TrPolicy::FirstRelevant,
            span_override: Some(3),
        }
    }
}

impl TrMapConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tr_seconds", self.tr_seconds),
            ("stimulus_stride_seconds", self.stimulus_stride_seconds),
            ("segment_seconds", self.segment_seconds),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.span_override == Some(0) {
            return Err(Error::InvalidArgument("span_override must be at least 1".into()));
        }
        Ok(())
    }

    pub fn computed_span(&self) -> usize {
        (self.segment_seconds / self.tr_seconds).ceil().max(1.0) as usize
    }

    pub fn span(&self) -> usize {
        self.span_override.unwrap_or_else(|| self.computed_span())
    }

    /// `(override, computed)` when an override disagrees with the span implied
    /// by segment and TR durations.
    pub fn span_discrepancy(&self) -> Option<(usize, usize)> {
        match self.span_override {
            Some(s) if s != self.computed_span() => Some((s, self.computed_span())),
            _ => None,
        }
    }

    pub fn with_policy(mut self, policy: TrPolicy) -> Self {
        self.tr_policy = policy;
        self
    }
}

/// Recording row for a stimulus. Onset/TR is rounded half away from zero.
pub fn stimulus_to_tr(stimulus_index: usize, cfg: &TrMapConfig) -> Result<usize> {
    cfg.validate()?;
    let onset = stimulus_index as f64 * cfg.stimulus_stride_seconds;
    let base = (onset / cfg.tr_seconds).round();
    if !(base.is_finite() && base >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stimulus {stimulus_index} maps to invalid TR {base}"
        )));
    }
    let base = base as usize;
    Ok(match cfg.tr_policy {
        TrPolicy::FirstRelevant => base,
        TrPolicy::LastRelevant => base + cfg.span() - 1,
    })
}

/// Response rows for `n_stimuli` stimuli, in stimulus order.
pub fn select_response_rows(n_stimuli: usize, responses: &DMatrix<f64>, cfg: &TrMapConfig) -> Result<DMatrix<f64>> {
    let indices = (0..n_stimuli)
        .map(|i| stimulus_to_tr(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let offending: Vec<usize> = indices
        .iter()
        .enumerate()
        .filter(|(_, &tr)| tr >= responses.nrows())
        .map(|(i, _)| i)
        .collect();
    if !offending.is_empty() {
        let shown: Vec<String> = offending.iter().take(10).map(|i| i.to_string()).collect();
        return Err(Error::Shape(format!(
            "{} stimuli map past the last recording row ({} rows); offending stimuli: {}{}",
            offending.len(),
            responses.nrows(),
            shown.join(", "),
            if offending.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(responses.select_rows(indices.iter()))
}

/// Selects the response rows matching each feature row (one stimulus per row).
pub fn align_rows(
    features: &DMatrix<f64>,
    responses: &DMatrix<f64>,
    cfg: &TrMapConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let y = select_response_rows(features.nrows(), responses, cfg)?;
    Ok((features.clone(), y))
}

/// Largest recording row needed for `n_stimuli` stimuli.
pub fn max_tr_index(n_stimuli: usize, cfg: &TrMapConfig) -> Result<usize> {
    if n_stimuli == 0 {
        return Err(Error::InvalidArgument("no stimuli".into()));
    }
    stimulus_to_tr(n_stimuli - 1, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(policy: TrPolicy) -> TrMapConfig {
        TrMapConfig::default().with_policy(policy)
    }

    #[test]
    fn first_stimulus_maps_to_zero() {
        assert_eq!(stimulus_to_tr(0, &cfg(TrPolicy::FirstRelevant)).unwrap(), 0);
    }

    #[test]
    fn stride_over_tr_rounds_to_two() {
        assert_eq!(stimulus_to_tr(1, &cfg(TrPolicy::FirstRelevant)).unwrap(), 2);
    }

    #[test]
    fn last_relevant_adds_span_minus_one() {
        assert_eq!(stimulus_to_tr(1, &cfg(TrPolicy::LastRelevant)).unwrap(), 4);
    }

    #[test]
    fn span_override_is_reported() {
        let c = TrMapConfig::default();
        assert_eq!(c.computed_span(), 4);
        assert_eq!(c.span(), 3);
        assert_eq!(c.span_discrepancy(), Some((3, 4)));
        let computed = TrMapConfig {
            span_override: None,
            ..c
        };
        assert_eq!(computed.span(), 4);
        assert_eq!(computed.span_discrepancy(), None);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // 1 * 3.0 / 2.0 = 1.5 -> 2
        let c = TrMapConfig {
            tr_seconds: 2.0,
            stimulus_stride_seconds: 3.0,
            segment_seconds: 2.0,
            tr_policy: TrPolicy::FirstRelevant,
            span_override: None,
        };
        assert_eq!(stimulus_to_tr(1, &c).unwrap(), 2);
    }

    #[test]
    fn mapping_is_strictly_monotone_and_policies_differ_by_span() {
        let first = cfg(TrPolicy::FirstRelevant);
        let last = cfg(TrPolicy::LastRelevant);
        let mut prev = None;
        for i in 0..1075 {
            let a = stimulus_to_tr(i, &first).unwrap();
            let b = stimulus_to_tr(i, &last).unwrap();
            assert_eq!(b - a, first.span() - 1);
            if let Some(p) = prev {
                assert!(a > p);
            }
            prev = Some(a);
        }
    }

    #[test]
    fn align_selects_mapped_rows() {
        let c = cfg(TrPolicy::FirstRelevant);
        let n = 1075;
        let needed = max_tr_index(n, &c).unwrap() + 1;
        let x = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        let y = DMatrix::from_fn(needed, 3, |i, j| (i * 10 + j) as f64);
        let (xa, ya) = align_rows(&x, &y, &c).unwrap();
        assert_eq!(xa, x);
        assert_eq!(ya.nrows(), 1075);
        assert_eq!(ya[(1, 0)], 20.0);
    }

    #[test]
    fn align_single_stimulus() {
        let x = DMatrix::from_element(1, 4, 1.0);
        let y = DMatrix::from_fn(5, 2, |i, _| i as f64);
        let (xa, ya) = align_rows(&x, &y, &cfg(TrPolicy::FirstRelevant)).unwrap();
        assert_eq!((xa.nrows(), ya.nrows()), (1, 1));
        assert_eq!(ya[(0, 0)], 0.0);
    }

    #[test]
    fn identity_config_keeps_leading_rows() {
        let c = TrMapConfig {
            tr_seconds: 1.0,
            stimulus_stride_seconds: 1.0,
            segment_seconds: 1.0,
            tr_policy: TrPolicy::LastRelevant,
            span_override: None,
        };
        assert_eq!(c.span(), 1);
        let x = DMatrix::from_element(1075, 2, 0.0);
        let y = DMatrix::from_fn(1200, 1, |i, _| i as f64);
        let (_, ya) = align_rows(&x, &y, &c).unwrap();
        assert_eq!(ya, y.rows(0, 1075).into_owned());
    }

    #[test]
    fn out_of_range_lists_stimuli() {
        let x = DMatrix::from_element(4, 1, 0.0);
        let y = DMatrix::from_element(5, 1, 0.0);
        let err = align_rows(&x, &y, &cfg(TrPolicy::LastRelevant)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("offending stimuli: 2, 3"), "{msg}");
    }

    #[test]
    fn invalid_config_rejected() {
        let c = TrMapConfig {
            tr_seconds: 0.0,
            ..TrMapConfig::default()
        };
        assert!(stimulus_to_tr(0, &c).is_err());
    }
}
