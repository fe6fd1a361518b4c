//! Ordinal agreement metrics: quadratic weighted kappa, exact / adjacent
//! accuracy, mean absolute distance and coarse-bin accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, LabelSpace};

fn check_pairs(golds: &[Label], preds: &[Label], k: usize) -> Result<LabelSpace> {
    if golds.len() != preds.len() {
        return Err(Error::LengthMismatch(golds.len(), preds.len()));
    }
    if golds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let space = LabelSpace::new(k)?;
    for &l in golds.iter().chain(preds) {
        space.check(l)?;
    }
    Ok(space)
}

/// Mergeable sufficient statistics for quadratic weighted kappa.
///
/// Keeps the integer sum of squared gaps and both marginals, so shards can
/// be accumulated independently and merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QwkAccumulator {
    k: usize,
    n: u64,
    squared_gaps: u64,
    gold_hist: Vec<u64>,
    pred_hist: Vec<u64>,
}

impl QwkAccumulator {
    pub fn new(space: LabelSpace) -> Self {
        Self {
            k: space.k(),
            n: 0,
            squared_gaps: 0,
            gold_hist: vec![0; space.k()],
            pred_hist: vec![0; space.k()],
        }
    }

    pub fn push(&mut self, gold: Label, pred: Label) -> Result<()> {
        let space = LabelSpace::new(self.k)?;
        space.check(gold)?;
        space.check(pred)?;
        let gap = gold.abs_diff(pred) as u64;
        self.n += 1;
        self.squared_gaps += gap * gap;
        self.gold_hist[gold as usize - 1] += 1;
        self.pred_hist[pred as usize - 1] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &QwkAccumulator) -> Result<()> {
        if other.k != self.k {
            return Err(Error::MixedK(self.k, other.k));
        }
        self.n += other.n;
        self.squared_gaps += other.squared_gaps;
        self.gold_hist
            .iter_mut()
            .zip(&other.gold_hist)
            .for_each(|(a, b)| *a += b);
        self.pred_hist
            .iter_mut()
            .zip(&other.pred_hist)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn kappa(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::EmptyInput);
        }
        // observed = squared_gaps / (k-1)^2, expected = sum (i-j)^2 a_i b_j / (n (k-1)^2);
        // the common factors cancel and both sides stay integral
        let mut chance: u128 = 0;
        for (i, &a) in self.gold_hist.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in self.pred_hist.iter().enumerate() {
                let d = i.abs_diff(j) as u128;
                chance += d * d * a as u128 * b as u128;
            }
        }
        if chance == 0 {
            return Ok(1.0);
        }
        let observed = self.squared_gaps as u128 * self.n as u128;
        Ok(1.0 - observed as f64 / chance as f64)
    }
}

/// Cohen's kappa with quadratic weights `(i - j)^2 / (k - 1)^2`.
///
/// Returns 1 when there is no expected disagreement, i.e. every gold and
/// prediction is the same single label.
pub fn qwk(golds: &[Label], preds: &[Label], k: usize) -> Result<f64> {
    let space = check_pairs(golds, preds, k)?;
    let mut acc = QwkAccumulator::new(space);
    for (&g, &p) in golds.iter().zip(preds) {
        acc.push(g, p)?;
    }
    acc.kappa()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicMetrics {
    pub acc: f64,
    pub adj_acc: f64,
    /// Mean absolute distance in levels.
    pub dist: f64,
}

pub fn basic_metrics(golds: &[Label], preds: &[Label], k: usize) -> Result<BasicMetrics> {
    check_pairs(golds, preds, k)?;
    let n = golds.len() as f64;
    let (mut exact, mut adjacent, mut total) = (0usize, 0usize, 0u64);
    for (&g, &p) in golds.iter().zip(preds) {
        let d = g.abs_diff(p);
        exact += (d == 0) as usize;
        adjacent += (d <= 1) as usize;
        total += d as u64;
    }
    Ok(BasicMetrics {
        acc: exact as f64 / n,
        adj_acc: adjacent as f64 / n,
        dist: total as f64 / n,
    })
}

/// A collapse of fine labels into contiguous coarse bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseMap {
    name: String,
    bins: Vec<u32>,
}

impl CoarseMap {
    /// `bins[i]` is the bin of label `i + 1`.
    pub fn new(name: impl Into<String>, bins: Vec<u32>) -> Result<Self> {
        let name = name.into();
        if bins.is_empty() {
            return Err(Error::CoarseMap(format!("{name}: empty map")));
        }
        let mut closed = Vec::new();
        for w in bins.windows(2) {
            if w[0] != w[1] {
                if closed.contains(&w[1]) {
                    return Err(Error::CoarseMap(format!("{name}: bin {} is not contiguous", w[1])));
                }
                closed.push(w[0]);
            }
        }
        Ok(Self { name, bins })
    }

    /// Splits `1..=k` into `m` contiguous bins of near-equal width.
    pub fn equal_width(name: impl Into<String>, k: usize, m: usize) -> Result<Self> {
        if m == 0 || m > k {
            return Err(Error::CoarseMap(format!("cannot split {k} labels into {m} bins")));
        }
        let bins = (0..k).map(|i| (i * m / k) as u32 + 1).collect();
        Self::new(name, bins)
    }

    pub fn identity(k: usize) -> Self {
        Self {
            name: format!("acc{k}"),
            bins: (1..=k as u32).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> usize {
        self.bins.len()
    }

    pub fn bin(&self, label: Label) -> Option<u32> {
        label.checked_sub(1).and_then(|i| self.bins.get(i as usize)).copied()
    }
}

/// The `acc7` / `acc5` / `acc3` maps, read from a JSON object of the form
/// `{"acc7": {"1": 1, ..., "19": 7}, ...}`. Keys starting with `_` are
/// ignored so the file can carry notes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoarseMaps {
    maps: BTreeMap<String, CoarseMap>,
}

/// Placeholder equal-width maps shipped with the crate; not the official
/// corpus mapping.
pub const DEFAULT_COARSE_MAPS: &str = include_str!("../../data/coarse_maps.json");

impl CoarseMaps {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::CoarseMap(e.to_string()))?;
        let mut maps = BTreeMap::new();
        for (name, value) in raw {
            if name.starts_with('_') {
                continue;
            }
            let table: BTreeMap<String, u32> =
                serde_json::from_value(value).map_err(|e| Error::CoarseMap(format!("{name}: {e}")))?;
            let mut pairs = table
                .into_iter()
                .map(|(l, b)| {
                    l.parse::<u32>()
                        .map(|l| (l, b))
                        .map_err(|_| Error::CoarseMap(format!("{name}: label key {l:?} is not an integer")))
                })
                .collect::<Result<Vec<_>>>()?;
            pairs.sort_unstable();
            for (i, &(l, _)) in pairs.iter().enumerate() {
                if l as usize != i + 1 {
                    return Err(Error::CoarseMap(format!("{name}: labels must be exactly 1..=k")));
                }
            }
            let bins = pairs.into_iter().map(|(_, b)| b).collect();
            maps.insert(name.clone(), CoarseMap::new(name, bins)?);
        }
        Ok(Self { maps })
    }

    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_COARSE_MAPS).expect("shipped coarse maps parse")
    }

    pub fn get(&self, name: &str) -> Option<&CoarseMap> {
        self.maps.get(name)
    }
}

pub fn coarse_accuracy(golds: &[Label], preds: &[Label], map: &CoarseMap) -> Result<f64> {
    check_pairs(golds, preds, map.k())?;
    let hits = golds
        .iter()
        .zip(preds)
        .filter(|&(&g, &p)| map.bin(g) == map.bin(p))
        .count();
    Ok(hits as f64 / golds.len() as f64)
}
