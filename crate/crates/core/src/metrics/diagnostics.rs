//! Coverage failure stratification and error redistribution between a
//! baseline decoder and the conformal decoder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, PredictionSet};

/// Failure counts for one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupFailure {
    pub failures: usize,
    pub total: usize,
    pub rate: f64,
}

impl GroupFailure {
    fn from_counts(failures: usize, total: usize) -> Self {
        Self {
            failures,
            total,
            rate: failures as f64 / total as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRates {
    pub overall: GroupFailure,
    /// Keyed by `tag=value`; examples carrying several tags are also counted
    /// under the joined key `a=x;b=y`.
    pub by_group: BTreeMap<String, GroupFailure>,
}

/// Share of examples whose gold label falls outside their set, overall and
/// per group tag.
pub fn failure_rates(
    sets: &[PredictionSet],
    golds: &[Option<Label>],
    groups: &[BTreeMap<String, String>],
) -> Result<FailureRates> {
    if sets.len() != golds.len() {
        return Err(Error::LengthMismatch(sets.len(), golds.len()));
    }
    if sets.len() != groups.len() {
        return Err(Error::LengthMismatch(sets.len(), groups.len()));
    }
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut failures = 0;
    for (i, ((set, gold), tags)) in sets.iter().zip(golds).zip(groups).enumerate() {
        let gold = gold.ok_or_else(|| Error::MissingGold { id: format!("#{i}") })?;
        let failed = !set.contains(gold) as usize;
        failures += failed;
        let mut keys: Vec<String> = tags.iter().map(|(t, v)| format!("{t}={v}")).collect();
        if keys.len() > 1 {
            keys.push(keys.join(";"));
        }
        for key in keys {
            let c = counts.entry(key).or_default();
            c.0 += failed;
            c.1 += 1;
        }
    }
    Ok(FailureRates {
        overall: GroupFailure::from_counts(failures, sets.len()),
        by_group: counts
            .into_iter()
            .map(|(k, (f, t))| (k, GroupFailure::from_counts(f, t)))
            .collect(),
    })
}

/// How far improved examples moved toward gold, as fractions of `improved`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShrinkHistogram {
    #[serde(rename = "1")]
    pub one: f64,
    #[serde(rename = "2")]
    pub two: f64,
    #[serde(rename = "3")]
    pub three: f64,
    #[serde(rename = "4+")]
    pub four_plus: f64,
}

impl ShrinkHistogram {
    pub fn buckets(&self) -> [(&'static str, f64); 4] {
        [
            ("1", self.one),
            ("2", self.two),
            ("3", self.three),
            ("4+", self.four_plus),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RedistributionReport {
    pub n: usize,
    /// Baseline exact, conformal decoder wrong.
    pub newly_wrong: usize,
    /// Fraction of `newly_wrong` that are off by one level.
    pub newly_wrong_within_one: f64,
    /// `|cp - gold| < |baseline - gold|`.
    pub improved: usize,
    pub improvement_histogram: ShrinkHistogram,
    /// `|cp - gold| > |baseline - gold| > 0`.
    pub worsened: usize,
}

pub fn redistribution(golds: &[Label], baseline: &[Label], cp: &[Label]) -> Result<RedistributionReport> {
    if golds.len() != baseline.len() {
        return Err(Error::LengthMismatch(golds.len(), baseline.len()));
    }
    if golds.len() != cp.len() {
        return Err(Error::LengthMismatch(golds.len(), cp.len()));
    }
    let mut report = RedistributionReport {
        n: golds.len(),
        ..Default::default()
    };
    let mut near_misses = 0usize;
    let mut shrinks = [0usize; 4];
    for ((&g, &b), &c) in golds.iter().zip(baseline).zip(cp) {
        let before = g.abs_diff(b);
        let after = g.abs_diff(c);
        if before == 0 && after > 0 {
            report.newly_wrong += 1;
            near_misses += (after == 1) as usize;
        }
        if after < before {
            report.improved += 1;
            shrinks[((before - after) as usize).min(4) - 1] += 1;
        } else if after > before && before > 0 {
            report.worsened += 1;
        }
    }
    if report.newly_wrong > 0 {
        report.newly_wrong_within_one = near_misses as f64 / report.newly_wrong as f64;
    }
    if report.improved > 0 {
        let total = report.improved as f64;
        report.improvement_histogram = ShrinkHistogram {
            one: shrinks[0] as f64 / total,
            two: shrinks[1] as f64 / total,
            three: shrinks[2] as f64 / total,
            four_plus: shrinks[3] as f64 / total,
        };
    }
    Ok(report)
}
