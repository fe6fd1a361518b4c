//! Python bindings for `ordinal_cp`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ordinal_cp::{
    conformal, decode, metrics, CalibratedThreshold, Example, Label, LabelSpace, LabeledBatch, PredictionSet,
    ProbabilityVector, ScoreKind,
};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn probs(raw: &[f64]) -> PyResult<ProbabilityVector> {
    ProbabilityVector::ingest(raw).map_err(err)
}

fn kind(name: &str, lambda: f64) -> PyResult<ScoreKind> {
    ScoreKind::from_name(name, lambda).map_err(err)
}

fn batch(rows: &[Vec<f64>], golds: Option<&[Label]>) -> PyResult<LabeledBatch> {
    if let Some(g) = golds {
        if g.len() != rows.len() {
            return Err(err(format!("{} rows but {} gold labels", rows.len(), g.len())));
        }
    }
    let examples = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let ex = Example::new(i.to_string(), probs(r)?);
            Ok(match golds {
                Some(g) => ex.with_gold(g[i]),
                None => ex,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let k = rows.first().map_or(LabelSpace::DEFAULT_K, Vec::len);
    LabeledBatch::new(examples, LabelSpace::new(k).map_err(err)?).map_err(err)
}

/// Validates and renormalizes a probability row.
#[pyfunction]
fn normalize(p: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(ordinal_cp::normalize(&p).map_err(err)?.as_slice().to_vec())
}

/// 1-based label of the largest probability; ties go to the lower label.
#[pyfunction]
fn argmax_label(p: Vec<f64>) -> PyResult<Label> {
    Ok(ordinal_cp::argmax_label(&probs(&p)?))
}

/// Nonconformity of label `y` under `kind` ("naive", "aps" or "raps").
#[pyfunction]
#[pyo3(signature = (kind, p, y, lam = ordinal_cp::scores::DEFAULT_LAMBDA))]
fn score(kind: &str, p: Vec<f64>, y: Label, lam: f64) -> PyResult<f64> {
    ordinal_cp::score(self::kind(kind, lam)?, &probs(&p)?, y).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (kind, p, lam = ordinal_cp::scores::DEFAULT_LAMBDA))]
fn score_all(kind: &str, p: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    Ok(ordinal_cp::score_all(self::kind(kind, lam)?, &probs(&p)?))
}

/// Rounded renormalized in-set mean of `members` weighted by `weights`.
#[pyfunction]
fn decode_mean(members: Vec<Label>, weights: Vec<f64>) -> PyResult<Label> {
    let set = PredictionSet::with_weights(members, weights).map_err(err)?;
    decode::decode_mean(&set).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (golds, preds, k = LabelSpace::DEFAULT_K))]
fn qwk(golds: Vec<Label>, preds: Vec<Label>, k: usize) -> PyResult<f64> {
    metrics::qwk(&golds, &preds, k).map_err(err)
}

/// Exact accuracy, within-one accuracy and mean absolute distance.
#[pyfunction]
#[pyo3(signature = (golds, preds, k = LabelSpace::DEFAULT_K))]
fn basic_metrics<'py>(py: Python<'py>, golds: Vec<Label>, preds: Vec<Label>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics::basic_metrics(&golds, &preds, k).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("acc", m.acc)?;
    d.set_item("adj_acc", m.adj_acc)?;
    d.set_item("dist", m.dist)?;
    Ok(d)
}

/// A fitted split-conformal threshold.
#[pyclass(name = "Threshold", frozen)]
struct PyThreshold {
    inner: CalibratedThreshold,
}

#[pymethods]
impl PyThreshold {
    /// Fits the threshold on calibration rows and their gold labels.
    #[staticmethod]
    #[pyo3(signature = (probs, golds, kind = "aps", alpha = conformal::DEFAULT_ALPHA, lam = ordinal_cp::scores::DEFAULT_LAMBDA))]
    fn calibrate(probs: Vec<Vec<f64>>, golds: Vec<Label>, kind: &str, alpha: f64, lam: f64) -> PyResult<Self> {
        let b = batch(&probs, Some(&golds))?;
        let inner = conformal::calibrate(&b, self::kind(kind, lam)?, alpha).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CalibratedThreshold::from_json(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn lam(&self) -> Option<f64> {
        self.inner.kind.lambda()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// `None` stands for an infinite threshold (every label admitted).
    #[getter]
    fn tau_hat(&self) -> Option<f64> {
        self.inner.tau_hat
    }

    /// Returns `(members, weights)` for one probability row.
    fn predict_set(&self, p: Vec<f64>) -> PyResult<(Vec<Label>, Vec<f64>)> {
        let set = conformal::predict_set(&self.inner, &probs(&p)?);
        Ok((set.members().to_vec(), set.weights().to_vec()))
    }

    /// Decoded label for each row.
    fn decode(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Label>> {
        rows.iter()
            .map(|r| decode::decode_mean(&conformal::predict_set(&self.inner, &probs(r)?)).map_err(err))
            .collect()
    }

    fn coverage(&self, rows: Vec<Vec<f64>>, golds: Vec<Label>) -> PyResult<f64> {
        conformal::empirical_coverage(&self.inner, &batch(&rows, Some(&golds))?).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Threshold(kind={:?}, alpha={}, n={}, tau_hat={})",
            self.inner.kind.name(),
            self.inner.alpha,
            self.inner.n,
            self.inner.tau_hat.map_or("None".to_string(), |t| t.to_string())
        )
    }
}

#[pymodule]
fn ordinal_cp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(argmax_label, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(score_all, m)?)?;
    m.add_function(wrap_pyfunction!(decode_mean, m)?)?;
    m.add_function(wrap_pyfunction!(qwk, m)?)?;
    m.add_function(wrap_pyfunction!(basic_metrics, m)?)?;
    m.add_class::<PyThreshold>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
