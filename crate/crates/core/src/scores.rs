//! Nonconformity scores: naive complement, APS and RAPS.
//!
//! APS is the deterministic cumulative-mass form (no randomized tie term) and
//! the RAPS penalty is `lambda * rank` counted from rank 1. Equal
//! probabilities are ranked by ascending label everywhere, so calibration and
//! prediction always see the same ordering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, LabelSpace, ProbabilityVector};

pub const DEFAULT_LAMBDA: f64 = 0.01;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScoreKind {
    /// `1 - p(y|x)`.
    Naive,
    /// Cumulative mass down to and including `y`'s rank.
    Aps,
    /// APS plus `lambda * rank(y)`.
    Raps {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

impl ScoreKind {
    pub fn raps(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(ScoreKind::Raps { lambda })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScoreKind::Naive => "naive",
            ScoreKind::Aps => "aps",
            ScoreKind::Raps { .. } => "raps",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            ScoreKind::Raps { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Builds a kind from its name; `lambda` only matters for RAPS.
    pub fn from_name(name: &str, lambda: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "naive" => Ok(ScoreKind::Naive),
            "aps" => Ok(ScoreKind::Aps),
            "raps" => ScoreKind::raps(lambda),
            other => Err(Error::UnknownScore(other.to_string())),
        }
    }

    /// The three kinds with the default RAPS lambda.
    pub fn all() -> [ScoreKind; 3] {
        [
            ScoreKind::Naive,
            ScoreKind::Aps,
            ScoreKind::Raps { lambda: DEFAULT_LAMBDA },
        ]
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKind::from_name(s, DEFAULT_LAMBDA)
    }
}

/// Labels sorted by descending probability with their cumulative mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedRanking {
    order: Vec<Label>,
    ranks: Vec<usize>,
    cumprob: Vec<f64>,
}

impl SortedRanking {
    /// Labels from most to least probable.
    pub fn order(&self) -> &[Label] {
        &self.order
    }

    /// 1-based rank of a label.
    pub fn rank_of(&self, label: Label) -> usize {
        self.ranks[label as usize - 1]
    }

    /// Cumulative mass of the top `rank` labels, indexed by `rank - 1`.
    pub fn cumprob(&self) -> &[f64] {
        &self.cumprob
    }
}

pub fn rank(p: &ProbabilityVector) -> SortedRanking {
    let probs = p.as_slice();
    let k = probs.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));

    let mut ranks = vec![0; k];
    let mut cumprob = Vec::with_capacity(k);
    let mut acc = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        ranks[i] = r + 1;
        acc += probs[i];
        cumprob.push(acc);
    }
    SortedRanking {
        order: idx.into_iter().map(|i| i as Label + 1).collect(),
        ranks,
        cumprob,
    }
}

fn score_ranked(kind: ScoreKind, p: &ProbabilityVector, ranking: &SortedRanking, y: Label) -> f64 {
    match kind {
        ScoreKind::Naive => 1.0 - p.prob(y),
        ScoreKind::Aps => ranking.cumprob[ranking.rank_of(y) - 1],
        ScoreKind::Raps { lambda } => {
            let r = ranking.rank_of(y);
            ranking.cumprob[r - 1] + lambda * r as f64
        }
    }
}

/// Nonconformity of label `y` under `p`.
pub fn score(kind: ScoreKind, p: &ProbabilityVector, y: Label) -> Result<f64> {
    let space = LabelSpace::new(p.k())?;
    space.check(y)?;
    if let ScoreKind::Naive = kind {
        return Ok(1.0 - p.prob(y));
    }
    Ok(score_ranked(kind, p, &rank(p), y))
}

/// Scores of every label, sharing one ranking.
pub fn score_all(kind: ScoreKind, p: &ProbabilityVector) -> Vec<f64> {
    let k = p.k() as Label;
    match kind {
        ScoreKind::Naive => p.as_slice().iter().map(|q| 1.0 - q).collect(),
        _ => {
            let ranking = rank(p);
            (1..=k).map(|y| score_ranked(kind, p, &ranking, y)).collect()
        }
    }
}
