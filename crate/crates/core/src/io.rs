//! File formats.
//!
//! Probability inputs are CSV with header `id,gold,doc_id,group,p1,...,pK`
//! (gold, doc_id and group may be empty) or JSONL with the same fields and a
//! `probs` array. The `group` field is either a bare value, stored under the
//! tag `group`, or `tag=value` pairs joined by `;`.
//!
//! Predictions are CSV `id,pred,baseline,set` with `|`-separated set members.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::DecodedExample;
use crate::types::{Example, Label, LabelSpace, LabeledBatch, ProbabilityVector};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },

    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

fn parse_err(path: &Path, line: u64, msg: impl ToString) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the `group` column.
pub fn parse_groups(field: &str) -> BTreeMap<String, String> {
    let field = field.trim();
    if field.is_empty() {
        return BTreeMap::new();
    }
    if !field.contains('=') {
        return BTreeMap::from([("group".to_string(), field.to_string())]);
    }
    field
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| match pair.split_once('=') {
            Some((t, v)) => (t.trim().to_string(), v.trim().to_string()),
            None => ("group".to_string(), pair.trim().to_string()),
        })
        .collect()
}

pub fn format_groups(groups: &BTreeMap<String, String>) -> String {
    match groups.iter().next() {
        Some((tag, value)) if groups.len() == 1 && tag == "group" => value.clone(),
        _ => groups
            .iter()
            .map(|(t, v)| format!("{t}={v}"))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn opt(field: &str) -> Option<&str> {
    let f = field.trim();
    (!f.is_empty()).then_some(f)
}

fn parse_gold(raw: Option<&str>, space: LabelSpace, path: &Path, line: u64) -> Result<Option<Label>, IoError> {
    raw.map(|g| {
        let label: Label = g
            .parse()
            .map_err(|_| parse_err(path, line, format!("gold {g:?} is not an integer label")))?;
        space.check(label).map_err(|e| parse_err(path, line, e))
    })
    .transpose()
}

/// Reads a probability file, choosing JSONL for `.jsonl` / `.json` paths and
/// CSV otherwise.
pub fn read_probability_file(path: &Path, space: LabelSpace) -> Result<LabeledBatch, IoError> {
    let text = read_text(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => parse_probability_jsonl(&text, path, space),
        _ => parse_probability_csv(&text, path, space),
    }
}

pub fn parse_probability_csv(text: &str, path: &Path, space: LabelSpace) -> Result<LabeledBatch, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    let mut expected = vec!["id".to_string(), "gold".into(), "doc_id".into(), "group".into()];
    expected.extend((1..=space.k()).map(|i| format!("p{i}")));
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(parse_err(
            path,
            1,
            format!("header must be {}, got {}", expected.join(","), got.join(",")),
        ));
    }

    let mut examples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e)
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = opt(&record[0]).ok_or_else(|| parse_err(path, line, "empty id"))?;
        let gold = parse_gold(opt(&record[1]), space, path, line)?;
        let raw = record
            .iter()
            .skip(4)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("probability {v:?} is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let probs = ProbabilityVector::ingest_k(&raw, space).map_err(|e| parse_err(path, line, e))?;
        examples.push(Example {
            id: id.to_string(),
            probs,
            gold,
            doc_id: opt(&record[2]).map(str::to_string),
            groups: parse_groups(&record[3]),
        });
    }
    LabeledBatch::new(examples, space).map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

#[derive(Deserialize)]
struct JsonRow {
    id: serde_json::Value,
    #[serde(default)]
    gold: Option<serde_json::Value>,
    #[serde(default)]
    doc_id: Option<serde_json::Value>,
    #[serde(default)]
    group: Option<serde_json::Value>,
    probs: Vec<f64>,
}

fn json_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => opt(s).map(str::to_string),
        other => Some(other.to_string()),
    }
}

pub fn parse_probability_jsonl(text: &str, path: &Path, space: LabelSpace) -> Result<LabeledBatch, IoError> {
    let mut examples = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(raw_line).map_err(|e| parse_err(path, line, e))?;
        let id = json_text(&row.id).ok_or_else(|| parse_err(path, line, "empty id"))?;
        let gold_text = row.gold.as_ref().and_then(json_text);
        let gold = parse_gold(gold_text.as_deref(), space, path, line)?;
        let groups = match &row.group {
            Some(serde_json::Value::Object(map)) => map
                .iter()
                .filter_map(|(k, v)| json_text(v).map(|v| (k.clone(), v)))
                .collect(),
            Some(v) => json_text(v).map(|s| parse_groups(&s)).unwrap_or_default(),
            None => BTreeMap::new(),
        };
        let probs = ProbabilityVector::ingest_k(&row.probs, space).map_err(|e| parse_err(path, line, e))?;
        examples.push(Example {
            id,
            probs,
            gold,
            doc_id: row.doc_id.as_ref().and_then(json_text),
            groups,
        });
    }
    LabeledBatch::new(examples, space).map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn format_prob(p: f64, decimals: Option<usize>) -> String {
    match decimals {
        Some(d) => {
            let s = format!("{p:.d$}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s.is_empty() {
                "0".to_string()
            } else {
                s.to_string()
            }
        }
        None => p.to_string(),
    }
}

/// Writes a batch in the CSV input format. `decimals` rounds probabilities
/// for compact fixtures; `None` keeps the shortest exact representation.
pub fn probability_csv(batch: &LabeledBatch, decimals: Option<usize>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "gold".into(), "doc_id".into(), "group".into()];
    header.extend((1..=batch.space().k()).map(|i| format!("p{i}")));
    w.write_record(&header).expect("in-memory write");
    for ex in batch {
        let mut row = vec![
            ex.id.clone(),
            ex.gold.map(|g| g.to_string()).unwrap_or_default(),
            ex.doc_id.clone().unwrap_or_default(),
            format_groups(&ex.groups),
        ];
        row.extend(ex.probs.as_slice().iter().map(|&p| format_prob(p, decimals)));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// One row of the predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub pred: Label,
    pub baseline: Label,
    pub set: Vec<Label>,
}

impl From<&DecodedExample> for PredictionRow {
    fn from(d: &DecodedExample) -> Self {
        Self {
            id: d.id.clone(),
            pred: d.point,
            baseline: d.baseline_point,
            set: d.set.members().to_vec(),
        }
    }
}

fn join_labels(labels: &[Label]) -> String {
    labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("|")
}

pub fn predictions_csv(rows: &[PredictionRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "pred", "baseline", "set"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.pred.to_string(),
            r.baseline.to_string(),
            join_labels(&r.set),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn parse_predictions_csv(text: &str, path: &Path, space: LabelSpace) -> Result<Vec<PredictionRow>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "pred", "baseline", "set"] {
        return Err(parse_err(path, 1, "header must be id,pred,baseline,set"));
    }
    let label = |v: &str, line: u64| -> Result<Label, IoError> {
        let l: Label = v
            .parse()
            .map_err(|_| parse_err(path, line, format!("{v:?} is not an integer label")))?;
        space.check(l).map_err(|e| parse_err(path, line, e))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.position().map(|p| p.line()).unwrap_or(0), e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let set = record[3]
            .split('|')
            .filter(|s| !s.trim().is_empty())
            .map(|s| label(s.trim(), line))
            .collect::<Result<Vec<_>, _>>()?;
        if set.is_empty() {
            return Err(parse_err(path, line, "empty prediction set"));
        }
        rows.push(PredictionRow {
            id: record[0].to_string(),
            pred: label(&record[1], line)?,
            baseline: label(&record[2], line)?,
            set,
        });
    }
    Ok(rows)
}

/// Sibling of the predictions file carrying renormalized in-set weights.
pub fn weights_jsonl(decoded: &[(String, Vec<Label>, Vec<f64>)]) -> String {
    #[derive(Serialize)]
    struct Row<'a> {
        id: &'a str,
        members: &'a [Label],
        weights: &'a [f64],
    }
    let mut out = String::new();
    for (id, members, weights) in decoded {
        out.push_str(&serde_json::to_string(&Row { id, members, weights }).expect("serializes"));
        out.push('\n');
    }
    out
}

/// Files produced by a command, written only once everything has succeeded.
#[derive(Debug, Default)]
pub struct OutputBundle {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputBundle {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes each file to a temporary name inside `dir`, then renames.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
        let write_err = |path: &Path, source| IoError::Write {
            path: path.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(write_err(&tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest).map_err(|e| write_err(&dest, e))?;
            written.push(dest);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SyntheticConfig};

    fn space3() -> LabelSpace {
        LabelSpace::new(3).unwrap()
    }

    #[test]
    fn csv_with_optional_columns() {
        let text = "id,gold,doc_id,group,p1,p2,p3\n\
                    a,2,d1,domain=stem;class=adv,0.2,0.5,0.3\n\
                    b,,,,1e-1,0.8,0.1\n";
        let b = parse_probability_csv(text, Path::new("x.csv"), space3()).unwrap();
        assert_eq!(b.len(), 2);
        let a = &b.examples()[0];
        assert_eq!((a.gold, a.doc_id.as_deref()), (Some(2), Some("d1")));
        assert_eq!(a.groups["domain"], "stem");
        let second = &b.examples()[1];
        assert_eq!((second.gold, second.doc_id.as_ref()), (None, None));
        assert!((second.probs.prob(1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let bad_header = "id,gold,p1,p2,p3\n";
        assert!(matches!(
            parse_probability_csv(bad_header, Path::new("x.csv"), space3()),
            Err(IoError::Parse { line: 1, .. })
        ));
        let bad_prob = "id,gold,doc_id,group,p1,p2,p3\na,1,,,0.2,0.5,0.3\nb,1,,,0.2,abc,0.3\n";
        match parse_probability_csv(bad_prob, Path::new("x.csv"), space3()) {
            Err(IoError::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad_sum = "id,gold,doc_id,group,p1,p2,p3\na,1,,,0.2,0.5,0.5\n";
        assert!(matches!(
            parse_probability_csv(bad_sum, Path::new("x.csv"), space3()),
            Err(IoError::Parse { line: 2, .. })
        ));
        let bad_gold = "id,gold,doc_id,group,p1,p2,p3\na,4,,,0.2,0.5,0.3\n";
        assert!(parse_probability_csv(bad_gold, Path::new("x.csv"), space3()).is_err());
        let dup = "id,gold,doc_id,group,p1,p2,p3\na,1,,,0.2,0.5,0.3\na,1,,,0.2,0.5,0.3\n";
        assert!(matches!(
            parse_probability_csv(dup, Path::new("x.csv"), space3()),
            Err(IoError::Invalid { .. })
        ));
        let short = "id,gold,doc_id,group,p1,p2,p3\na,1,,,0.2,0.8\n";
        assert!(matches!(
            parse_probability_csv(short, Path::new("x.csv"), space3()),
            Err(IoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn jsonl_rows() {
        let text = r#"{"id": "a", "gold": 3, "probs": [0.1, 0.1, 0.8], "group": {"domain": "arts"}}

{"id": 7, "gold": null, "doc_id": "d", "group": "x", "probs": [0.5, 0.25, 0.25]}
{"id": "c", "probs": [0.5, 0.25]}
"#;
        let err = parse_probability_jsonl(text, Path::new("x.jsonl"), space3()).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 4, .. }));
        let ok: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        let b = parse_probability_jsonl(&ok, Path::new("x.jsonl"), space3()).unwrap();
        assert_eq!(b.examples()[0].groups["domain"], "arts");
        assert_eq!(b.examples()[1].id, "7");
        assert_eq!(b.examples()[1].groups["group"], "x");
        assert_eq!(b.examples()[1].gold, None);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let b = generate(&SyntheticConfig::default(), 50, 9, "r").unwrap();
        let text = probability_csv(&b, None);
        let back = parse_probability_csv(&text, Path::new("r.csv"), b.space()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rounded_csv_still_ingests() {
        let b = generate(&SyntheticConfig::default(), 50, 9, "r").unwrap();
        let text = probability_csv(&b, Some(6));
        let back = parse_probability_csv(&text, Path::new("r.csv"), b.space()).unwrap();
        for (x, y) in back.iter().zip(&b) {
            assert_eq!(x.gold, y.gold);
            assert!(x
                .probs
                .as_slice()
                .iter()
                .zip(y.probs.as_slice())
                .all(|(p, q)| (p - q).abs() < 1e-5));
        }
    }

    #[test]
    fn group_field_forms() {
        assert!(parse_groups("").is_empty());
        assert_eq!(parse_groups("stem")["group"], "stem");
        let g = parse_groups("domain=stem; class=adv");
        assert_eq!((g["domain"].as_str(), g["class"].as_str()), ("stem", "adv"));
        assert_eq!(format_groups(&g), "class=adv;domain=stem");
        assert_eq!(format_groups(&parse_groups("stem")), "stem");
    }

    #[test]
    fn predictions_round_trip() {
        let rows = vec![
            PredictionRow {
                id: "a".into(),
                pred: 8,
                baseline: 9,
                set: vec![7, 8, 9],
            },
            PredictionRow {
                id: "b,c".into(),
                pred: 1,
                baseline: 1,
                set: vec![1],
            },
        ];
        let text = predictions_csv(&rows);
        assert!(text.starts_with("id,pred,baseline,set\na,8,9,7|8|9\n"));
        let back = parse_predictions_csv(&text, Path::new("p.csv"), LabelSpace::default()).unwrap();
        assert_eq!(back, rows);
        let bad = "id,pred,baseline,set\na,8,9,\n";
        assert!(parse_predictions_csv(bad, Path::new("p.csv"), LabelSpace::default()).is_err());
    }

    #[test]
    fn bundle_commits_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let mut bundle = OutputBundle::default();
        bundle.add("a.txt", "one");
        bundle.add("b.txt", "two");
        let written = bundle.commit(&out).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(out.join("b.txt")).unwrap(), "two");
        let leftovers: Vec<_> = fs::read_dir(&out).unwrap().filter_map(|e| e.ok()).collect();
        assert_eq!(leftovers.len(), 2);
    }
}
