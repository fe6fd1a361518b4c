//! Synthetic exchangeable data for tests and shipped fixtures.
//!
//! Gold labels follow a long-tailed prior over 19 levels (the per-class
//! counts of a real development split). Each posterior is a discretized
//! Gaussian bump around a noisy center, sharpened or flattened by a random
//! temperature, so the model is sometimes confidently wrong.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::types::{normalize, Example, Label, LabelSpace, LabeledBatch};

/// Per-level counts of the 7310-example development set.
pub const DEV_CLASS_COUNTS: [usize; 19] = [
    44, 68, 182, 78, 417, 189, 701, 613, 236, 1012, 409, 1491, 349, 1072, 258, 114, 49, 13, 15,
];

const DOMAINS: [(&str, f64); 3] = [("arts", 1625.0), ("stem", 163.0), ("social", 535.0)];
const TEXT_CLASSES: [&str; 3] = ["advanced", "foundational", "specialized"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub space: LabelSpace,
    /// Relative class frequencies, one per label.
    pub class_weights: Vec<f64>,
    /// Std-dev of the posterior center around gold, in levels.
    pub center_sd: f64,
    /// Width of the posterior bump, in levels.
    pub width: f64,
    /// Temperatures are drawn uniformly from this range.
    pub temperature: (f64, f64),
    /// Sentences per synthetic document.
    pub doc_size: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            space: LabelSpace::default(),
            class_weights: DEV_CLASS_COUNTS.iter().map(|&c| c as f64).collect(),
            center_sd: 1.3,
            width: 1.2,
            temperature: (0.5, 2.0),
            doc_size: 5,
        }
    }
}

struct Sampler<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    domains: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a SyntheticConfig, seed: u64) -> Result<Self> {
        if cfg.class_weights.len() != cfg.space.k() {
            return Err(Error::WrongLength {
                expected: cfg.space.k(),
                got: cfg.class_weights.len(),
            });
        }
        let noise = Normal::new(0.0, cfg.center_sd).map_err(|_| Error::InvalidLambda(cfg.center_sd))?;
        let domains = WeightedIndex::new(DOMAINS.iter().map(|d| d.1)).expect("positive weights");
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            domains,
        })
    }

    fn example(&mut self, id: String, index: usize, gold: Label) -> Result<Example> {
        let cfg = self.cfg;
        let center = gold as f64 + self.noise.sample(&mut self.rng);
        let (lo, hi) = cfg.temperature;
        let temp = if hi > lo { self.rng.random_range(lo..hi) } else { lo };
        let logits: Vec<f64> = cfg
            .space
            .labels()
            .map(|j| -((j as f64 - center) / cfg.width).powi(2) / (2.0 * temp))
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let probs = normalize(&raw)?;
        let domain = DOMAINS[self.domains.sample(&mut self.rng)].0;
        let text_class = TEXT_CLASSES[self.rng.random_range(0..TEXT_CLASSES.len())];
        Ok(Example::new(id, probs)
            .with_gold(gold)
            .with_doc(format!("doc{}", index / cfg.doc_size.max(1)))
            .with_group("domain", domain)
            .with_group("class", text_class))
    }
}

/// Draws `n` i.i.d. examples with ids `{prefix}-{i}`.
pub fn generate(cfg: &SyntheticConfig, n: usize, seed: u64, prefix: &str) -> Result<LabeledBatch> {
    let mut sampler = Sampler::new(cfg, seed)?;
    let prior = WeightedIndex::new(&cfg.class_weights).map_err(|e| Error::CoarseMap(e.to_string()))?;
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let gold = prior.sample(&mut sampler.rng) as Label + 1;
        examples.push(sampler.example(format!("{prefix}-{i}"), i, gold)?);
    }
    LabeledBatch::new(examples, cfg.space)
}

/// Like [`generate`] but with exactly `counts[c]` examples of label `c + 1`,
/// laid out class by class.
pub fn generate_with_counts(cfg: &SyntheticConfig, counts: &[usize], seed: u64, prefix: &str) -> Result<LabeledBatch> {
    if counts.len() != cfg.space.k() {
        return Err(Error::WrongLength {
            expected: cfg.space.k(),
            got: counts.len(),
        });
    }
    let mut sampler = Sampler::new(cfg, seed)?;
    let mut examples = Vec::with_capacity(counts.iter().sum());
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let i = examples.len();
            examples.push(sampler.example(format!("{prefix}-{i}"), i, c as Label + 1)?);
        }
    }
    LabeledBatch::new(examples, cfg.space)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg, 200, 42, "x").unwrap();
        let b = generate(&cfg, 200, 42, "x").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&cfg, 200, 43, "x").unwrap());
        for ex in &a {
            let sum: f64 = ex.probs.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(ex.gold.is_some() && ex.doc_id.is_some());
            assert_eq!(ex.groups.len(), 2);
        }
    }

    #[test]
    fn exact_counts() {
        let b = generate_with_counts(&SyntheticConfig::default(), &DEV_CLASS_COUNTS, 1, "d").unwrap();
        assert_eq!(b.len(), 7310);
        assert_eq!(b.iter().filter(|e| e.gold == Some(19)).count(), 15);
    }

    #[test]
    fn argmax_is_informative() {
        let b = generate(&SyntheticConfig::default(), 2000, 3, "x").unwrap();
        let exact = b.iter().filter(|e| Some(e.probs.argmax()) == e.gold).count() as f64 / 2000.0;
        assert!(exact > 0.2 && exact < 0.8, "exact accuracy {exact}");
    }
}
