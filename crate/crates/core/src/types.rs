//! Domain types shared by every stage: label spaces, probability vectors,
//! examples, batches and prediction sets.
//!
//! Labels are 1-based integers `1..=k`, matching how ordinal levels are
//! numbered in the input and output files.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordinal level, 1-based.
pub type Label = u32;

/// Entries this far below zero are treated as serialization noise and clamped.
pub const NEGATIVE_SLACK: f64 = 1e-12;
/// Ingested rows closer than this to unit mass are kept verbatim.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Ingested rows further than this from unit mass are rejected.
pub const SUM_REJECT: f64 = 1e-2;

/// The ordered label set `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSpace {
    k: usize,
}

impl LabelSpace {
    pub const DEFAULT_K: usize = 19;

    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewLabels(k));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn contains(&self, label: Label) -> bool {
        label >= 1 && (label as usize) <= self.k
    }

    pub fn check(&self, label: Label) -> Result<Label> {
        if self.contains(label) {
            Ok(label)
        } else {
            Err(Error::UnknownLabel { label, k: self.k })
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        1..=self.k as Label
    }
}

impl Default for LabelSpace {
    fn default() -> Self {
        Self { k: Self::DEFAULT_K }
    }
}

/// A distribution `p(y|x)` over `k` ordered labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

fn clamp_row(raw: &[f64]) -> Result<Vec<f64>> {
    raw.iter()
        .enumerate()
        .map(|(i, &v)| {
            let label = i as Label + 1;
            if !v.is_finite() {
                Err(Error::NonFinite { label })
            } else if v < -NEGATIVE_SLACK {
                Err(Error::NegativeEntry { label, value: v })
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect()
}

/// Divides a non-negative row by its sum.
///
/// Entries in `[-1e-12, 0)` are clamped to zero first.
pub fn normalize(raw: &[f64]) -> Result<ProbabilityVector> {
    let mut probs = clamp_row(raw)?;
    let sum: f64 = probs.iter().sum();
    if sum <= 0.0 {
        return Err(Error::AllZero);
    }
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(ProbabilityVector { probs })
}

/// Smallest label attaining the maximum probability.
pub fn argmax_label(p: &ProbabilityVector) -> Label {
    p.argmax()
}

impl ProbabilityVector {
    /// Ingests a row read from a file.
    ///
    /// Rows within 1e-6 of unit mass are kept as given; rows within 1e-2 are
    /// renormalized; anything further off is rejected.
    pub fn ingest(raw: &[f64]) -> Result<Self> {
        let probs = clamp_row(raw)?;
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(Error::AllZero);
        }
        let dev = (sum - 1.0).abs();
        if dev > SUM_REJECT {
            Err(Error::RowSum { sum })
        } else if dev > SUM_TOLERANCE {
            normalize(&probs)
        } else {
            Ok(Self { probs })
        }
    }

    /// Like [`ProbabilityVector::ingest`] but also checks the row length.
    pub fn ingest_k(raw: &[f64], space: LabelSpace) -> Result<Self> {
        if raw.len() != space.k() {
            return Err(Error::WrongLength {
                expected: space.k(),
                got: raw.len(),
            });
        }
        Self::ingest(raw)
    }

    pub fn one_hot(label: Label, space: LabelSpace) -> Result<Self> {
        space.check(label)?;
        let mut probs = vec![0.0; space.k()];
        probs[label as usize - 1] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(space: LabelSpace) -> Self {
        let k = space.k();
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a 1-based label; zero outside the label range.
    pub fn prob(&self, label: Label) -> f64 {
        label
            .checked_sub(1)
            .and_then(|i| self.probs.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn argmax(&self) -> Label {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as Label + 1
    }
}

impl<'de> Deserialize<'de> for ProbabilityVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        ProbabilityVector::ingest(&raw).map_err(serde::de::Error::custom)
    }
}

/// One scored item: its posterior plus whatever metadata the input carried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub probs: ProbabilityVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, String>,
}

impl Example {
    pub fn new(id: impl Into<String>, probs: ProbabilityVector) -> Self {
        Self {
            id: id.into(),
            probs,
            gold: None,
            doc_id: None,
            groups: BTreeMap::new(),
        }
    }

    pub fn with_gold(mut self, gold: Label) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn with_doc(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = Some(doc_id.into());
        self
    }

    pub fn with_group(mut self, tag: impl Into<String>, value: impl Into<String>) -> Self {
        self.groups.insert(tag.into(), value.into());
        self
    }

    pub fn require_gold(&self) -> Result<Label> {
        self.gold.ok_or_else(|| Error::MissingGold { id: self.id.clone() })
    }
}

/// An ordered collection of examples over one label space.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    examples: Vec<Example>,
    space: LabelSpace,
}

impl LabeledBatch {
    pub fn new(examples: Vec<Example>, space: LabelSpace) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if ex.probs.k() != space.k() {
                return Err(Error::MixedK(space.k(), ex.probs.k()));
            }
            if let Some(g) = ex.gold {
                space.check(g)?;
            }
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Self { examples, space })
    }

    pub fn space(&self) -> LabelSpace {
        self.space
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    /// Gold labels in batch order; fails on the first example without one.
    pub fn golds(&self) -> Result<Vec<Label>> {
        self.examples.iter().map(Example::require_gold).collect()
    }
}

impl<'a> IntoIterator for &'a LabeledBatch {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

/// A conformal label set `C(x)` with the posterior renormalized over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    members: Vec<Label>,
    weights: Vec<f64>,
}

impl PredictionSet {
    /// Builds a set from candidate labels and renormalizes `p` over them.
    ///
    /// If the members carry no mass at all the weights fall back to uniform.
    pub fn from_posterior(members: impl IntoIterator<Item = Label>, p: &ProbabilityVector) -> Result<Self> {
        let space = LabelSpace::new(p.k())?;
        let mut members: Vec<Label> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::EmptySet);
        }
        for &m in &members {
            space.check(m)?;
        }
        let raw: Vec<f64> = members.iter().map(|&m| p.prob(m)).collect();
        Self::renormalized(members, raw)
    }

    /// Builds a set from explicit per-member weights, rescaled to unit mass.
    pub fn with_weights(members: Vec<Label>, weights: Vec<f64>) -> Result<Self> {
        if members.len() != weights.len() {
            return Err(Error::LengthMismatch(members.len(), weights.len()));
        }
        if members.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut pairs: Vec<(Label, f64)> = members.into_iter().zip(weights).collect();
        pairs.sort_by_key(|&(m, _)| m);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateLabel(w[0].0));
            }
        }
        for &(m, w) in &pairs {
            if m == 0 {
                return Err(Error::UnknownLabel { label: m, k: 0 });
            }
            if !w.is_finite() {
                return Err(Error::NonFinite { label: m });
            }
            if w < 0.0 {
                return Err(Error::NegativeEntry { label: m, value: w });
            }
        }
        let (members, raw) = pairs.into_iter().unzip();
        Self::renormalized(members, raw)
    }

    fn renormalized(members: Vec<Label>, raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        let weights = if total > 0.0 {
            raw.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / members.len() as f64; members.len()]
        };
        Ok(Self { members, weights })
    }

    pub fn members(&self) -> &[Label] {
        &self.members
    }

    /// Renormalized weights, aligned with [`PredictionSet::members`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    pub fn min(&self) -> Label {
        self.members[0]
    }

    pub fn max(&self) -> Label {
        self.members[self.members.len() - 1]
    }

    pub fn weight(&self, label: Label) -> Option<f64> {
        self.members.binary_search(&label).ok().map(|i| self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, f64)> + '_ {
        self.members.iter().copied().zip(self.weights.iter().copied())
    }
}
