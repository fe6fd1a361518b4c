use serde::{Deserialize, Serialize};

use crate::conformal::{check_alpha, predict_set, CalibrationRecord};
use crate::decode::decode_mean;
use crate::error::{Error, Result};
use crate::metrics::agreement::qwk;
use crate::scores::{score, ScoreKind};
use crate::types::LabeledBatch;

pub const DEFAULT_ALPHA_GRID: [f64; 7] = [0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.50];

/// One (kind, alpha) cell: calibrated on one batch, measured on another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: ScoreKind,
    pub alpha: f64,
    pub qwk: f64,
    pub coverage: f64,
    pub avg_set_size: f64,
}

/// Calibrates on `cal` and evaluates the in-set mean decoder on `tune` for
/// every kind and alpha. Rows come out kind-major in input order.
pub fn alpha_sweep(
    cal: &LabeledBatch,
    tune: &LabeledBatch,
    kinds: &[ScoreKind],
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    for &a in alphas {
        check_alpha(a)?;
    }
    if cal.is_empty() || tune.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if cal.space() != tune.space() {
        return Err(Error::MixedK(cal.space().k(), tune.space().k()));
    }
    let k = tune.space().k();
    let golds = tune.golds()?;
    let cal_golds = cal.golds()?;

    let mut rows = Vec::with_capacity(kinds.len() * alphas.len());
    for &kind in kinds {
        let scores = cal
            .iter()
            .zip(&cal_golds)
            .map(|(ex, &g)| score(kind, &ex.probs, g))
            .collect::<Result<Vec<_>>>()?;
        for &alpha in alphas {
            let tau = CalibrationRecord::from_scores(scores.clone(), kind, alpha)?.fit();
            let mut preds = Vec::with_capacity(tune.len());
            let (mut covered, mut size) = (0usize, 0usize);
            for (ex, &g) in tune.iter().zip(&golds) {
                let set = predict_set(&tau, &ex.probs);
                covered += set.contains(g) as usize;
                size += set.len();
                preds.push(decode_mean(&set)?);
            }
            let n = tune.len() as f64;
            rows.push(SweepRow {
                kind,
                alpha,
                qwk: qwk(&golds, &preds, k)?,
                coverage: covered as f64 / n,
                avg_set_size: size as f64 / n,
            });
        }
    }
    Ok(rows)
}
