//! Seeded stratified split of a labeled batch into calibration and tuning
//! halves.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, LabeledBatch};

/// Examples of one class that go to the first split:
/// `floor(fraction * n + 0.5)`, clamped to `[1, n - 1]` when `n >= 2`.
/// A singleton class goes entirely to the first split.
pub fn first_split_size(n: usize, fraction: f64) -> usize {
    match n {
        0 => 0,
        1 => 1,
        _ => ((fraction * n as f64 + 0.5).floor() as usize).clamp(1, n - 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub class: Label,
    pub original: usize,
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSplit {
    pub first: LabeledBatch,
    pub second: LabeledBatch,
    pub counts: Vec<ClassCounts>,
}

fn check_fraction(fraction: f64) -> Result<f64> {
    if fraction.is_finite() && fraction > 0.0 && fraction < 1.0 {
        Ok(fraction)
    } else {
        Err(Error::InvalidFraction(fraction))
    }
}

/// Splits per gold class; each output keeps the input order.
pub fn stratified_split(batch: &LabeledBatch, fraction: f64, seed: u64) -> Result<StratifiedSplit> {
    check_fraction(fraction)?;
    let golds = batch.golds()?;
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &g) in golds.iter().enumerate() {
        by_class.entry(g).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut to_first = vec![false; golds.len()];
    let mut counts = Vec::with_capacity(by_class.len());
    for (class, mut idx) in by_class {
        let take = first_split_size(idx.len(), fraction);
        idx.shuffle(&mut rng);
        for &i in &idx[..take] {
            to_first[i] = true;
        }
        counts.push(ClassCounts {
            class,
            original: idx.len(),
            first: take,
            second: idx.len() - take,
        });
    }

    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (ex, goes_first) in batch.iter().zip(to_first) {
        if goes_first {
            first.push(ex.clone());
        } else {
            second.push(ex.clone());
        }
    }
    Ok(StratifiedSplit {
        first: LabeledBatch::new(first, batch.space())?,
        second: LabeledBatch::new(second, batch.space())?,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Example, LabelSpace, ProbabilityVector};
    use proptest::prelude::*;

    fn batch_with_counts(counts: &[(Label, usize)]) -> LabeledBatch {
        let space = LabelSpace::default();
        let mut examples = Vec::new();
        for &(class, n) in counts {
            for i in 0..n {
                let p = ProbabilityVector::one_hot(class, space).unwrap();
                examples.push(Example::new(format!("c{class}-{i}"), p).with_gold(class));
            }
        }
        LabeledBatch::new(examples, space).unwrap()
    }

    #[test]
    fn size_rule() {
        assert_eq!(first_split_size(15, 0.8), 12);
        assert_eq!(first_split_size(1, 0.3), 1);
        assert_eq!(first_split_size(2, 0.5), 1);
        assert_eq!(first_split_size(2, 0.99), 1);
        assert_eq!(first_split_size(2, 0.01), 1);
        assert_eq!(first_split_size(10, 0.25), 3);
    }

    #[test]
    fn split_examples() {
        let b = batch_with_counts(&[(19, 15), (3, 1)]);
        let s = stratified_split(&b, 0.8, 7).unwrap();
        let c19 = s.counts.iter().find(|c| c.class == 19).unwrap();
        assert_eq!((c19.first, c19.second), (12, 3));
        let c3 = s.counts.iter().find(|c| c.class == 3).unwrap();
        assert_eq!((c3.first, c3.second), (1, 0));
        assert_eq!(s.first.len(), 13);

        let two = batch_with_counts(&[(1, 1), (2, 1)]);
        let s = stratified_split(&two, 0.5, 0).unwrap();
        assert_eq!((s.first.len(), s.second.len()), (2, 0));
    }

    #[test]
    fn split_errors() {
        let b = batch_with_counts(&[(1, 3)]);
        assert_eq!(stratified_split(&b, 1.0, 0), Err(Error::InvalidFraction(1.0)));
        let space = LabelSpace::default();
        let unlabeled = LabeledBatch::new(vec![Example::new("x", ProbabilityVector::uniform(space))], space).unwrap();
        assert!(matches!(
            stratified_split(&unlabeled, 0.5, 0),
            Err(Error::MissingGold { .. })
        ));
    }

    proptest! {
        #[test]
        fn split_partitions(counts in prop::collection::vec((1u32..=19, 1usize..30), 1..8), fraction in 0.05f64..0.95, seed in any::<u64>()) {
            let mut merged: BTreeMap<Label, usize> = BTreeMap::new();
            for (c, n) in counts {
                *merged.entry(c).or_default() += n;
            }
            let pairs: Vec<_> = merged.into_iter().collect();
            let b = batch_with_counts(&pairs);
            let s = stratified_split(&b, fraction, seed).unwrap();
            prop_assert_eq!(s.first.len() + s.second.len(), b.len());
            for c in &s.counts {
                prop_assert_eq!(c.first + c.second, c.original);
                let in_first = s.first.iter().filter(|e| e.gold == Some(c.class)).count();
                prop_assert_eq!(in_first, c.first);
            }
            let mut ids: Vec<&str> = s.first.iter().chain(s.second.iter()).map(|e| e.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), b.len());
            let again = stratified_split(&b, fraction, seed).unwrap();
            prop_assert_eq!(again, s);
        }
    }
}
