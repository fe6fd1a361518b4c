//! Split-conformal calibration and prediction sets.
//!
//! The threshold is the `ceil((n + 1)(1 - alpha))`-th smallest calibration
//! score. When that index exceeds `n` the threshold is `+inf` and every label
//! is admitted. Sets keep every label whose score is `<=` the threshold; an
//! empty set falls back to the argmax singleton.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{score, score_all, ScoreKind};
use crate::types::{Label, LabeledBatch, PredictionSet, ProbabilityVector};

pub const DEFAULT_ALPHA: f64 = 0.10;

/// Subtracted from `(n + 1)(1 - alpha)` before taking the ceiling.
const INDEX_SLACK: f64 = 1e-9;

pub fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// 1-based order statistic used as threshold, or `None` when it exceeds `n`.
pub fn quantile_index(n: usize, alpha: f64) -> Option<usize> {
    let target = (n as f64 + 1.0) * (1.0 - alpha);
    let idx = (target - INDEX_SLACK).ceil().max(1.0) as usize;
    (idx <= n).then_some(idx)
}

/// Calibration scores at the gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub kind: ScoreKind,
    pub alpha: f64,
    pub scores: Vec<f64>,
}

impl CalibrationRecord {
    pub fn from_scores(scores: Vec<f64>, kind: ScoreKind, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if scores.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        Ok(Self { kind, alpha, scores })
    }

    pub fn from_batch(batch: &LabeledBatch, kind: ScoreKind, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let scores = batch
            .iter()
            .map(|ex| score(kind, &ex.probs, ex.require_gold()?))
            .collect::<Result<Vec<_>>>()?;
        Self::from_scores(scores, kind, alpha)
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn fit(&self) -> CalibratedThreshold {
        let n = self.n();
        let tau_hat = quantile_index(n, self.alpha).map(|idx| {
            let mut scratch = self.scores.clone();
            let (_, nth, _) = scratch.select_nth_unstable_by(idx - 1, f64::total_cmp);
            *nth
        });
        CalibratedThreshold {
            kind: self.kind,
            alpha: self.alpha,
            n,
            tau_hat,
        }
    }
}

/// A fitted threshold; `tau_hat == None` stands for `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedThreshold {
    pub kind: ScoreKind,
    pub alpha: f64,
    pub n: usize,
    pub tau_hat: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ThresholdFile {
    kind: String,
    lambda: Option<f64>,
    alpha: f64,
    n: usize,
    tau_hat: Option<f64>,
}

impl CalibratedThreshold {
    pub fn admits(&self, s: f64) -> bool {
        self.tau_hat.is_none_or(|t| s <= t)
    }

    pub fn to_json(&self) -> String {
        let file = ThresholdFile {
            kind: self.kind.name().to_string(),
            lambda: self.kind.lambda(),
            alpha: self.alpha,
            n: self.n,
            tau_hat: self.tau_hat,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("threshold serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        use serde::de::Error as _;
        let file: ThresholdFile = serde_json::from_str(text)?;
        let kind = ScoreKind::from_name(&file.kind, file.lambda.unwrap_or(crate::scores::DEFAULT_LAMBDA))
            .map_err(serde_json::Error::custom)?;
        check_alpha(file.alpha).map_err(serde_json::Error::custom)?;
        if file.n == 0 {
            return Err(serde_json::Error::custom("threshold fitted on zero examples"));
        }
        if file.tau_hat.is_some_and(|t| !t.is_finite()) {
            return Err(serde_json::Error::custom("tau_hat must be finite or null"));
        }
        Ok(Self {
            kind,
            alpha: file.alpha,
            n: file.n,
            tau_hat: file.tau_hat,
        })
    }
}

pub fn calibrate(batch: &LabeledBatch, kind: ScoreKind, alpha: f64) -> Result<CalibratedThreshold> {
    Ok(CalibrationRecord::from_batch(batch, kind, alpha)?.fit())
}

/// Labels admitted by the threshold, before the non-empty fallback.
pub fn raw_members(tau: &CalibratedThreshold, p: &ProbabilityVector) -> Vec<Label> {
    score_all(tau.kind, p)
        .into_iter()
        .zip(1..)
        .filter(|&(s, _)| tau.admits(s))
        .map(|(_, y)| y)
        .collect()
}

pub fn predict_set(tau: &CalibratedThreshold, p: &ProbabilityVector) -> PredictionSet {
    let mut members = raw_members(tau, p);
    if members.is_empty() {
        members.push(p.argmax());
    }
    PredictionSet::from_posterior(members, p).expect("members are non-empty labels of p")
}

/// Fraction of examples whose gold label lies in their prediction set.
pub fn empirical_coverage(tau: &CalibratedThreshold, batch: &LabeledBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut covered = 0usize;
    for ex in batch {
        let gold = ex.require_gold()?;
        if predict_set(tau, &ex.probs).contains(gold) {
            covered += 1;
        }
    }
    Ok(covered as f64 / batch.len() as f64)
}

pub fn average_set_size(tau: &CalibratedThreshold, batch: &LabeledBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: usize = batch.iter().map(|ex| predict_set(tau, &ex.probs).len()).sum();
    Ok(total as f64 / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{normalize, Example, LabelSpace};
    use proptest::prelude::*;

    fn threshold(kind: ScoreKind, tau_hat: Option<f64>) -> CalibratedThreshold {
        CalibratedThreshold {
            kind,
            alpha: 0.1,
            n: 10,
            tau_hat,
        }
    }

    fn sorted_index_oracle(scores: &[f64], alpha: f64) -> Option<f64> {
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let idx = ((n + 1) as f64 * (1.0 - alpha)).ceil() as usize;
        (idx <= n).then(|| sorted[idx - 1])
    }

    #[test]
    fn calibrate_examples() {
        let rec = CalibrationRecord::from_scores(vec![0.4, 0.1, 0.3, 0.2], ScoreKind::Naive, 0.5).unwrap();
        assert_eq!(rec.fit().tau_hat, Some(0.3));

        let rec = CalibrationRecord::from_scores(vec![0.5], ScoreKind::Naive, 0.1).unwrap();
        assert_eq!(rec.fit().tau_hat, None);

        assert_eq!(quantile_index(4981, 0.10), Some(4484));
        assert_eq!(quantile_index(4, 0.10), None);
        assert_eq!(quantile_index(9, 0.10), Some(9));
    }

    #[test]
    fn calibrate_from_batch() {
        let space = LabelSpace::new(3).unwrap();
        let p = normalize(&[0.5, 0.3, 0.2]).unwrap();
        let batch = LabeledBatch::new(
            vec![
                Example::new("a", p.clone()).with_gold(1),
                Example::new("b", p.clone()).with_gold(2),
                Example::new("c", p.clone()).with_gold(3),
            ],
            space,
        )
        .unwrap();
        // naive scores 0.5, 0.7, 0.8; index ceil(4 * 0.5) = 2
        let t = calibrate(&batch, ScoreKind::Naive, 0.5).unwrap();
        assert!((t.tau_hat.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(t.n, 3);

        let unlabeled = LabeledBatch::new(vec![Example::new("x", p)], space).unwrap();
        assert_eq!(
            calibrate(&unlabeled, ScoreKind::Aps, 0.1),
            Err(Error::MissingGold { id: "x".into() })
        );
        let empty = LabeledBatch::new(vec![], space).unwrap();
        assert_eq!(calibrate(&empty, ScoreKind::Aps, 0.1), Err(Error::EmptyBatch));
        assert_eq!(calibrate(&batch, ScoreKind::Aps, 1.0), Err(Error::InvalidAlpha(1.0)));
        assert!(calibrate(&batch, ScoreKind::Aps, f64::NAN).is_err());
    }

    #[test]
    fn predict_set_examples() {
        let p = normalize(&[0.5, 0.3, 0.2]).unwrap();
        let set = predict_set(&threshold(ScoreKind::Naive, Some(0.6)), &p);
        assert_eq!(set.members(), &[1]);

        let full = predict_set(&threshold(ScoreKind::Aps, None), &p);
        assert_eq!(full.members(), &[1, 2, 3]);

        let t = threshold(ScoreKind::Naive, Some(0.2));
        assert!(raw_members(&t, &p).is_empty());
        assert_eq!(predict_set(&t, &p).members(), &[1]);
    }

    #[test]
    fn coverage_and_size_examples() {
        let space = LabelSpace::default();
        let one_hot: Vec<Example> = (1..=19)
            .map(|y| Example::new(format!("e{y}"), ProbabilityVector::one_hot(y, space).unwrap()).with_gold(y))
            .collect();
        let batch = LabeledBatch::new(one_hot, space).unwrap();
        let t = threshold(ScoreKind::Naive, Some(0.5));
        assert_eq!(empirical_coverage(&t, &batch).unwrap(), 1.0);
        assert_eq!(average_set_size(&t, &batch).unwrap(), 1.0);
        let full = threshold(ScoreKind::Naive, None);
        assert_eq!(empirical_coverage(&full, &batch).unwrap(), 1.0);
        assert_eq!(average_set_size(&full, &batch).unwrap(), 19.0);

        let uniform = LabeledBatch::new(
            vec![Example::new("u", ProbabilityVector::uniform(space)).with_gold(3)],
            space,
        )
        .unwrap();
        let t = threshold(ScoreKind::Naive, Some(1.0 - 1.0 / 19.0));
        assert_eq!(average_set_size(&t, &uniform).unwrap(), 19.0);
    }

    #[test]
    fn threshold_json_round_trip() {
        let t = CalibratedThreshold {
            kind: ScoreKind::Raps { lambda: 0.01 },
            alpha: 0.1,
            n: 4981,
            tau_hat: Some(0.1 + 0.2),
        };
        let text = t.to_json();
        assert!(text.contains("\"kind\": \"raps\""));
        let back = CalibratedThreshold::from_json(&text).unwrap();
        assert_eq!(back.tau_hat.unwrap().to_bits(), t.tau_hat.unwrap().to_bits());
        assert_eq!(back, t);

        let inf = CalibratedThreshold {
            kind: ScoreKind::Aps,
            tau_hat: None,
            ..t
        };
        let text = inf.to_json();
        assert!(text.contains("\"tau_hat\": null"));
        assert_eq!(CalibratedThreshold::from_json(&text).unwrap(), inf);

        assert!(
            CalibratedThreshold::from_json(r#"{"kind":"x","lambda":null,"alpha":0.1,"n":1,"tau_hat":null}"#).is_err()
        );
        assert!(
            CalibratedThreshold::from_json(r#"{"kind":"aps","lambda":null,"alpha":1.5,"n":1,"tau_hat":null}"#).is_err()
        );
    }

    proptest! {
        #[test]
        fn json_bit_exact(bits in any::<u64>(), alpha in 0.001f64..0.999) {
            let tau = f64::from_bits(bits);
            prop_assume!(tau.is_finite());
            let t = CalibratedThreshold { kind: ScoreKind::Naive, alpha, n: 7, tau_hat: Some(tau) };
            let back = CalibratedThreshold::from_json(&t.to_json()).unwrap();
            prop_assert_eq!(back.tau_hat.unwrap().to_bits(), bits);
            prop_assert_eq!(back.alpha.to_bits(), alpha.to_bits());
        }

        #[test]
        fn fit_matches_sort_oracle(scores in prop::collection::vec(0.0f64..2.0, 1..60), alpha in 0.01f64..0.99) {
            let rec = CalibrationRecord::from_scores(scores.clone(), ScoreKind::Aps, alpha).unwrap();
            let target = (scores.len() as f64 + 1.0) * (1.0 - alpha);
            // skip products sitting on an integer, where the slack is deliberate
            prop_assume!((target - target.round()).abs() > 1e-6);
            prop_assert_eq!(rec.fit().tau_hat, sorted_index_oracle(&scores, alpha));
        }

        #[test]
        fn fit_is_permutation_invariant(mut scores in prop::collection::vec(0.0f64..1.0, 1..80), seed in any::<u64>()) {
            let before = CalibrationRecord::from_scores(scores.clone(), ScoreKind::Naive, 0.1).unwrap().fit();
            let len = scores.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                scores.swap(i, (s >> 33) as usize % (i + 1));
            }
            let after = CalibrationRecord::from_scores(scores, ScoreKind::Naive, 0.1).unwrap().fit();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn set_contains_argmax(raw in prop::collection::vec(0.0f64..1.0, 2..20), tau in 0.0f64..1.2, which in 0usize..3) {
            prop_assume!(raw.iter().any(|&v| v > 0.0));
            let p = normalize(&raw).unwrap();
            let kind = ScoreKind::all()[which];
            let set = predict_set(&threshold(kind, Some(tau)), &p);
            prop_assert!(set.contains(p.argmax()));
        }

        #[test]
        fn smaller_alpha_gives_superset(
            cal in prop::collection::vec(0.0f64..1.1, 1..50),
            raw in prop::collection::vec(0.0f64..1.0, 2..20),
            a1 in 0.01f64..0.98, gap in 0.0f64..0.5, which in 0usize..3,
        ) {
            prop_assume!(raw.iter().any(|&v| v > 0.0));
            let a2 = (a1 + gap).min(0.99);
            let kind = ScoreKind::all()[which];
            let t1 = CalibrationRecord::from_scores(cal.clone(), kind, a1).unwrap().fit();
            let t2 = CalibrationRecord::from_scores(cal, kind, a2).unwrap().fit();
            let big = t1.tau_hat.unwrap_or(f64::INFINITY);
            let small = t2.tau_hat.unwrap_or(f64::INFINITY);
            prop_assert!(big >= small);
            let p = normalize(&raw).unwrap();
            let m1 = raw_members(&t1, &p);
            for y in raw_members(&t2, &p) {
                prop_assert!(m1.contains(&y));
            }
        }
    }
}
