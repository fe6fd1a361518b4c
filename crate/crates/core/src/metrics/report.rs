use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::agreement::{basic_metrics, coarse_accuracy, qwk, CoarseMaps};
use crate::metrics::diagnostics::{failure_rates, redistribution, FailureRates, RedistributionReport};
use crate::types::{Label, PredictionSet};

/// Everything needed to score one decoded run.
#[derive(Debug, Clone)]
pub struct EvaluationInput {
    pub k: usize,
    pub golds: Vec<Label>,
    pub preds: Vec<Label>,
    pub baseline: Vec<Label>,
    pub sets: Vec<PredictionSet>,
    pub groups: Vec<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub qwk: f64,
    pub acc: f64,
    pub adj_acc: f64,
    pub dist: f64,
    /// `None` when no map of that name covers the label space.
    pub acc7: Option<f64>,
    pub acc5: Option<f64>,
    pub acc3: Option<f64>,
    pub coverage: f64,
    pub avg_set_size: f64,
    pub per_group_failure: FailureRates,
    pub redistribution: RedistributionReport,
}

pub fn evaluate(input: &EvaluationInput, maps: &CoarseMaps) -> Result<EvaluationReport> {
    let n = input.golds.len();
    for len in [
        input.preds.len(),
        input.baseline.len(),
        input.sets.len(),
        input.groups.len(),
    ] {
        if len != n {
            return Err(Error::LengthMismatch(n, len));
        }
    }
    let basic = basic_metrics(&input.golds, &input.preds, input.k)?;
    let coarse = |name: &str| -> Result<Option<f64>> {
        match maps.get(name) {
            Some(m) if m.k() == input.k => coarse_accuracy(&input.golds, &input.preds, m).map(Some),
            _ => Ok(None),
        }
    };
    let golds: Vec<Option<Label>> = input.golds.iter().copied().map(Some).collect();
    let failures = failure_rates(&input.sets, &golds, &input.groups)?;
    let size: usize = input.sets.iter().map(PredictionSet::len).sum();
    Ok(EvaluationReport {
        n,
        qwk: qwk(&input.golds, &input.preds, input.k)?,
        acc: basic.acc,
        adj_acc: basic.adj_acc,
        dist: basic.dist,
        acc7: coarse("acc7")?,
        acc5: coarse("acc5")?,
        acc3: coarse("acc3")?,
        coverage: 1.0 - failures.overall.rate,
        avg_set_size: size as f64 / n as f64,
        per_group_failure: failures,
        redistribution: redistribution(&input.golds, &input.baseline, &input.preds)?,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvaluationReport {
    /// Flat `metric,value` rows.
    pub fn csv_rows(&self) -> Vec<(String, String)> {
        let mut rows: Vec<(String, String)> = vec![
            ("n".into(), self.n.to_string()),
            ("qwk".into(), self.qwk.to_string()),
            ("acc".into(), self.acc.to_string()),
            ("adj_acc".into(), self.adj_acc.to_string()),
            ("dist".into(), self.dist.to_string()),
            ("acc7".into(), fmt_opt(self.acc7)),
            ("acc5".into(), fmt_opt(self.acc5)),
            ("acc3".into(), fmt_opt(self.acc3)),
            ("coverage".into(), self.coverage.to_string()),
            ("avg_set_size".into(), self.avg_set_size.to_string()),
            (
                "failure_rate.overall".into(),
                self.per_group_failure.overall.rate.to_string(),
            ),
        ];
        for (group, f) in &self.per_group_failure.by_group {
            rows.push((format!("failure_rate.{group}"), f.rate.to_string()));
        }
        let r = &self.redistribution;
        rows.push(("redistribution.newly_wrong".into(), r.newly_wrong.to_string()));
        rows.push((
            "redistribution.newly_wrong_within_one".into(),
            r.newly_wrong_within_one.to_string(),
        ));
        rows.push(("redistribution.improved".into(), r.improved.to_string()));
        for (bucket, frac) in r.improvement_histogram.buckets() {
            rows.push((format!("redistribution.shrink_{bucket}"), frac.to_string()));
        }
        rows.push(("redistribution.worsened".into(), r.worsened.to_string()));
        rows
    }
}
