//! Single-label decoding from prediction sets, ensembling and document-level
//! aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conformal::{predict_set, CalibratedThreshold};
use crate::error::{Error, Result};
use crate::types::{normalize, Label, LabeledBatch, PredictionSet, ProbabilityVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    Argmax,
    CpMean,
    /// Picks gold when the set covers it. Needs gold labels, so it is only
    /// usable for evaluation.
    Oracle,
}

impl FromStr for Decoder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "argmax" => Ok(Decoder::Argmax),
            "cp_mean" => Ok(Decoder::CpMean),
            "oracle" => Ok(Decoder::Oracle),
            other => Err(format!("unknown decoder {other:?}")),
        }
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoder::Argmax => "argmax",
            Decoder::CpMean => "cp_mean",
            Decoder::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedExample {
    pub id: String,
    pub point: Label,
    pub set: PredictionSet,
    pub baseline_point: Label,
}

/// Expected label under the in-set weights, before rounding.
pub fn in_set_mean(set: &PredictionSet) -> f64 {
    set.iter().map(|(y, w)| y as f64 * w).sum()
}

/// Rounded in-set posterior mean. Halves round away from zero.
pub fn decode_mean(set: &PredictionSet) -> Result<Label> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let rounded = in_set_mean(set).round() as Label;
    Ok(rounded.clamp(set.min(), set.max()))
}

pub fn decode_oracle(set: &PredictionSet, gold: Label, fallback: Label) -> Label {
    if set.contains(gold) {
        gold
    } else {
        fallback
    }
}

/// Elementwise mean of several posteriors for the same example.
pub fn ensemble_average(ps: &[ProbabilityVector]) -> Result<ProbabilityVector> {
    let first = ps.first().ok_or(Error::EmptyInput)?;
    let k = first.k();
    let mut acc = vec![0.0; k];
    for p in ps {
        if p.k() != k {
            return Err(Error::MixedK(k, p.k()));
        }
        acc.iter_mut().zip(p.as_slice()).for_each(|(a, v)| *a += v);
    }
    let n = ps.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    normalize(&acc)
}

/// Most frequent label. Among tied labels the one nearest the mean of the
/// tied labels wins, then the lower label.
pub fn ensemble_vote(points: &[Label]) -> Result<Label> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &p in points {
        *counts.entry(p).or_default() += 1;
    }
    let top = *counts.values().max().expect("non-empty");
    let tied: Vec<Label> = counts.into_iter().filter(|&(_, c)| c == top).map(|(l, _)| l).collect();
    let center = tied.iter().map(|&l| l as f64).sum::<f64>() / tied.len() as f64;
    // BTreeMap order makes the first minimum the lowest label
    let mut best = tied[0];
    for &l in &tied[1..] {
        if (l as f64 - center).abs() < (best as f64 - center).abs() {
            best = l;
        }
    }
    Ok(best)
}

/// Document label as the maximum over its sentences.
pub fn document_level<S: AsRef<str>>(points: &[(S, Label)]) -> Result<BTreeMap<String, Label>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut docs: BTreeMap<String, Label> = BTreeMap::new();
    for (doc, label) in points {
        docs.entry(doc.as_ref().to_string())
            .and_modify(|m| *m = (*m).max(*label))
            .or_insert(*label);
    }
    Ok(docs)
}

/// Runs sets and the chosen decoder over a batch.
///
/// The oracle falls back to the in-set mean when gold is outside the set.
pub fn decode_batch(tau: &CalibratedThreshold, batch: &LabeledBatch, decoder: Decoder) -> Result<Vec<DecodedExample>> {
    batch
        .iter()
        .map(|ex| {
            let set = predict_set(tau, &ex.probs);
            let baseline_point = ex.probs.argmax();
            let point = match decoder {
                Decoder::Argmax => baseline_point,
                Decoder::CpMean => decode_mean(&set)?,
                Decoder::Oracle => decode_oracle(&set, ex.require_gold()?, decode_mean(&set)?),
            };
            Ok(DecodedExample {
                id: ex.id.clone(),
                point,
                set,
                baseline_point,
            })
        })
        .collect()
}
