//! Trial-level records: loading, validation, filtering and persistence.
//!
//! Record order is semantically significant. Quantile binning breaks ties
//! by input position, so every operation here preserves the order in which
//! records were read.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Field names of the interchange schema, in canonical column order.
pub const FIELDS: [&str; 7] = [
    "question_id",
    "domain",
    "condition",
    "format",
    "correct",
    "nlp",
    "answer_text",
];

/// One question's outcome under one (condition, format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub question_id: String,
    pub domain: String,
    pub condition: String,
    pub format: String,
    pub correct: bool,
    /// Mean token log-probability of the generated answer, nats per token.
    pub nlp: f64,
    pub answer_text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialFormat {
    Jsonl,
    Csv,
}

impl TrialFormat {
    /// Guess from the file extension; anything other than `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TrialFormat::Csv,
            _ => TrialFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub loaded_at: Option<SystemTime>,
}

/// An ordered, validated collection of trial records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialSet {
    records: Vec<TrialRecord>,
    pub provenance: Provenance,
}

impl TrialSet {
    /// Build a set from in-memory records, enforcing the same invariants as the loader.
    pub fn new(records: Vec<TrialRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !r.nlp.is_finite() {
                return Err(Error::NonFiniteConfidence { line: i + 1 });
            }
            if !seen.insert((&r.question_id, &r.condition, &r.format)) {
                return Err(duplicate(i + 1, r));
            }
        }
        Ok(TrialSet {
            records,
            provenance: Provenance::default(),
        })
    }

    /// Wrap records without uniqueness checks. Used for bootstrap multisets,
    /// which repeat question ids by construction.
    #[cfg(test)]
    pub(crate) fn from_resample(records: Vec<TrialRecord>) -> Self {
        TrialSet {
            records,
            provenance: Provenance::default(),
        }
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TrialRecord> {
        self.records.iter()
    }

    /// Sorted distinct domain labels.
    pub fn domains(&self) -> Vec<String> {
        distinct(self.records.iter().map(|r| &r.domain))
    }

    pub fn conditions(&self) -> Vec<String> {
        distinct(self.records.iter().map(|r| &r.condition))
    }

    pub fn formats(&self) -> Vec<String> {
        distinct(self.records.iter().map(|r| &r.format))
    }

    pub fn domain_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.domain.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Conjunctive selection; absent selectors match everything.
    pub fn filter(&self, sel: &Selector) -> TrialSet {
        for value in sel.unknown_values(self) {
            log::warn!("selector value `{value}` matches no record");
        }
        TrialSet {
            records: self
                .records
                .iter()
                .filter(|r| sel.matches(r))
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trial records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(FIELDS).map_err(|e| csv_io(path, e))?;
        for r in &self.records {
            let correct = if r.correct { "true" } else { "false" };
            let nlp = r.nlp.to_string();
            w.write_record([
                r.question_id.as_str(),
                r.domain.as_str(),
                r.condition.as_str(),
                r.format.as_str(),
                correct,
                nlp.as_str(),
                r.answer_text.as_deref().unwrap_or(""),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl<'a> IntoIterator for &'a TrialSet {
    type Item = &'a TrialRecord;
    type IntoIter = std::slice::Iter<'a, TrialRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn distinct<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut v: Vec<String> = it.cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    v.dedup();
    v
}

fn duplicate(line: usize, r: &TrialRecord) -> Error {
    Error::DuplicateKey {
        line,
        question_id: r.question_id.clone(),
        condition: r.condition.clone(),
        format: r.format.clone(),
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Selection predicate for [`TrialSet::filter`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selector {
    pub domain: Option<String>,
    pub condition: Option<String>,
    pub format: Option<String>,
}

impl Selector {
    pub fn domain(mut self, d: impl Into<String>) -> Self {
        self.domain = Some(d.into());
        self
    }

    pub fn condition(mut self, c: impl Into<String>) -> Self {
        self.condition = Some(c.into());
        self
    }

    pub fn format(mut self, f: impl Into<String>) -> Self {
        self.format = Some(f.into());
        self
    }

    pub fn matches(&self, r: &TrialRecord) -> bool {
        self.domain.as_ref().is_none_or(|d| *d == r.domain)
            && self.condition.as_ref().is_none_or(|c| *c == r.condition)
            && self.format.as_ref().is_none_or(|f| *f == r.format)
    }

    /// Selector values that occur nowhere in `set` (each checked on its own).
    pub fn unknown_values(&self, set: &TrialSet) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(d) = &self.domain {
            if !set.iter().any(|r| &r.domain == d) {
                out.push(format!("domain={d}"));
            }
        }
        if let Some(c) = &self.condition {
            if !set.iter().any(|r| &r.condition == c) {
                out.push(format!("condition={c}"));
            }
        }
        if let Some(f) = &self.format {
            if !set.iter().any(|r| &r.format == f) {
                out.push(format!("format={f}"));
            }
        }
        out
    }

    /// Intersection of two selectors; `None` if they contradict each other.
    pub fn and(&self, other: &Selector) -> Option<Selector> {
        fn both(a: &Option<String>, b: &Option<String>) -> Option<Option<String>> {
            match (a, b) {
                (Some(x), Some(y)) if x != y => None,
                (Some(x), _) | (_, Some(x)) => Some(Some(x.clone())),
                (None, None) => Some(None),
            }
        }
        Some(Selector {
            domain: both(&self.domain, &other.domain)?,
            condition: both(&self.condition, &other.condition)?,
            format: both(&self.format, &other.format)?,
        })
    }
}

/// Load a trial file, validating every record.
pub fn load_trials(path: &Path, format: TrialFormat) -> Result<TrialSet> {
    let mut set = match format {
        TrialFormat::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            parse_jsonl(BufReader::new(file)).map_err(|e| match e {
                Error::Io { source, .. } => Error::io(path, source),
                other => other,
            })?
        }
        TrialFormat::Csv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            parse_csv(BufReader::new(file))?
        }
    };
    set.provenance = Provenance {
        source: Some(path.to_path_buf()),
        loaded_at: Some(SystemTime::now()),
    };
    Ok(set)
}

/// Parse JSONL from any reader. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl(reader: impl BufRead) -> Result<TrialSet> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = parse_json_line(&line, lineno)?;
        let Value::Object(map) = value else {
            return Err(Error::Malformed {
                line: lineno,
                message: "expected a JSON object".into(),
            });
        };
        let get = |f: &str| map.get(f).filter(|v| !v.is_null());
        let field = |f: &str| get(f).ok_or_else(|| missing(lineno, f));

        let record = TrialRecord {
            question_id: json_label(field("question_id")?, lineno, "question_id")?,
            domain: json_label(field("domain")?, lineno, "domain")?,
            condition: json_label(field("condition")?, lineno, "condition")?,
            format: json_label(field("format")?, lineno, "format")?,
            correct: json_bool(field("correct")?, lineno)?,
            nlp: json_nlp(field("nlp")?, lineno)?,
            answer_text: match get("answer_text") {
                None => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(other) => Some(other.to_string()),
            },
        };
        push_checked(&mut records, &mut seen, record, lineno)?;
    }
    Ok(TrialSet {
        records,
        provenance: Provenance::default(),
    })
}

/// Parse CSV with the canonical header names (any column order; `answer_text` optional).
pub fn parse_csv(reader: impl std::io::Read) -> Result<TrialSet> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let mut cols = [None; 7];
    for (slot, name) in cols.iter_mut().zip(FIELDS) {
        *slot = col(name);
    }
    for (i, name) in FIELDS.iter().enumerate().take(6) {
        if cols[i].is_none() {
            return Err(missing(1, name));
        }
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Malformed {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let lineno = row.position().map_or(0, |p| p.line() as usize);
        let cell = |i: usize| -> Result<&str> {
            cols[i]
                .and_then(|c| row.get(c))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| missing(lineno, FIELDS[i]))
        };
        let nlp = parse_nlp_str(cell(5)?, lineno)?;
        let record = TrialRecord {
            question_id: cell(0)?.to_string(),
            domain: cell(1)?.to_string(),
            condition: cell(2)?.to_string(),
            format: cell(3)?.to_string(),
            correct: parse_bool_str(cell(4)?, lineno)?,
            nlp,
            answer_text: cols[6]
                .and_then(|c| row.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        };
        push_checked(&mut records, &mut seen, record, lineno)?;
    }
    Ok(TrialSet {
        records,
        provenance: Provenance::default(),
    })
}

fn push_checked(
    records: &mut Vec<TrialRecord>,
    seen: &mut HashSet<(String, String, String)>,
    record: TrialRecord,
    line: usize,
) -> Result<()> {
    let key = (
        record.question_id.clone(),
        record.condition.clone(),
        record.format.clone(),
    );
    if !seen.insert(key) {
        return Err(duplicate(line, &record));
    }
    records.push(record);
    Ok(())
}

fn missing(line: usize, field: &str) -> Error {
    Error::MissingField {
        line,
        field: field.to_string(),
    }
}

/// Python's `json` module writes bare `NaN`/`Infinity`; quote them so the
/// record parses and the non-finite value is reported precisely.
fn parse_json_line(line: &str, lineno: usize) -> Result<Value> {
    match serde_json::from_str(line) {
        Ok(v) => Ok(v),
        Err(first) => {
            let patched = quote_non_finite(line);
            serde_json::from_str(&patched).map_err(|_| Error::Malformed {
                line: lineno,
                message: first.to_string(),
            })
        }
    }
}

fn quote_non_finite(line: &str) -> String {
    let mut out = String::with_capacity(line.len() + 8);
    let mut in_str = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(c) = rest.chars().next() {
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_str = true;
            out.push(c);
            rest = &rest[1..];
            continue;
        }
        if let Some(tok) = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t))
        {
            out.push('"');
            out.push_str(tok);
            out.push('"');
            rest = &rest[tok.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

fn json_label(v: &Value, line: usize, field: &str) -> Result<String> {
    match v {
        Value::String(s) if !s.is_empty() => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::InvalidField {
            line,
            field: field.into(),
            message: format!("expected a non-empty string or number, got {v}"),
        }),
    }
}

fn json_bool(v: &Value, line: usize) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        Value::String(s) => parse_bool_str(s, line),
        _ => Err(Error::InvalidField {
            line,
            field: "correct".into(),
            message: format!("expected boolean, got {v}"),
        }),
    }
}

fn json_nlp(v: &Value, line: usize) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or(Error::NonFiniteConfidence { line }),
        Value::String(s) => parse_nlp_str(s, line),
        _ => Err(Error::InvalidField {
            line,
            field: "nlp".into(),
            message: format!("expected number, got {v}"),
        }),
    }
}

fn parse_nlp_str(s: &str, line: usize) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|_| Error::InvalidField {
        line,
        field: "nlp".into(),
        message: format!("not a number: `{s}`"),
    })?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFiniteConfidence { line })
    }
}

fn parse_bool_str(s: &str, line: usize) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "t" | "yes" => Ok(true),
        "false" | "0" | "f" | "no" => Ok(false),
        _ => Err(Error::InvalidField {
            line,
            field: "correct".into(),
            message: format!("expected boolean, got `{s}`"),
        }),
    }
}

/// Outcome of a question-id pairing check between two trial sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingReport {
    pub paired: bool,
    /// Number of (domain, question_id) entries common to both sides.
    pub shared: usize,
    /// Entries present in `a` but not in `b`, as `domain/question_id`.
    pub missing: Vec<String>,
    /// Entries present in `b` but not in `a`.
    pub extra: Vec<String>,
}

impl fmt::Display for PairingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "paired={} shared={} missing={} extra={}",
            self.paired,
            self.shared,
            self.missing.len(),
            self.extra.len()
        )
    }
}

/// Check that `a` and `b` hold the same multiset of question ids within each domain.
pub fn validate_paired(a: &TrialSet, b: &TrialSet) -> PairingReport {
    let tally = |s: &TrialSet| {
        let mut m: BTreeMap<(String, String), i64> = BTreeMap::new();
        for r in s {
            *m.entry((r.domain.clone(), r.question_id.clone())).or_insert(0) += 1;
        }
        m
    };
    let ta = tally(a);
    let tb = tally(b);
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    let mut shared = 0usize;
    for (key, &na) in &ta {
        let nb = tb.get(key).copied().unwrap_or(0);
        shared += na.min(nb) as usize;
        for _ in 0..(na - nb).max(0) {
            missing.push(format!("{}/{}", key.0, key.1));
        }
    }
    for (key, &nb) in &tb {
        let na = ta.get(key).copied().unwrap_or(0);
        for _ in 0..(nb - na).max(0) {
            extra.push(format!("{}/{}", key.0, key.1));
        }
    }
    PairingReport {
        paired: missing.is_empty() && extra.is_empty(),
        shared,
        missing,
        extra,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn rec(q: &str, d: &str, c: &str, f: &str, ok: bool, nlp: f64) -> TrialRecord {
        TrialRecord {
            question_id: q.into(),
            domain: d.into(),
            condition: c.into(),
            format: f.into(),
            correct: ok,
            nlp,
            answer_text: None,
        }
    }

    #[test]
    fn loads_four_line_jsonl() {
        let src = r#"{"question_id":"q1","domain":"Arts","condition":1,"format":"f16","correct":true,"nlp":-0.2,"answer_text":"Paris"}
{"question_id":"q2","domain":"Arts","condition":1,"format":"f16","correct":false,"nlp":-0.9}
{"question_id":"q3","domain":"Science","condition":"1","format":"f16","correct":1,"nlp":-0.4}

{"question_id":"q4","domain":"History","condition":1,"format":"f16","correct":0,"nlp":-1.5}
"#;
        let set = parse_jsonl(src.as_bytes()).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.records()[0].answer_text.as_deref(), Some("Paris"));
        assert_eq!(set.records()[2].condition, "1");
        assert!(set.records()[2].correct);
        assert!(!set.records()[3].correct);
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let src = r#"{"question_id":"q17","domain":"Arts","condition":"cond1","format":"f16","correct":true,"nlp":-0.2}
{"question_id":"q17","domain":"Arts","condition":"cond1","format":"f16","correct":false,"nlp":-0.3}
"#;
        match parse_jsonl(src.as_bytes()) {
            Err(Error::DuplicateKey {
                line,
                question_id,
                condition,
                format,
            }) => {
                assert_eq!(line, 2);
                assert_eq!((question_id.as_str(), condition.as_str(), format.as_str()), ("q17", "cond1", "f16"));
            }
            other => panic!("expected DuplicateKey, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_field_and_line() {
        let src = r#"{"question_id":"q1","domain":"Arts","condition":1,"format":"f16","correct":true,"nlp":-0.2}
{"question_id":"q2","domain":"Arts","condition":1,"correct":true,"nlp":-0.2}
"#;
        match parse_jsonl(src.as_bytes()) {
            Err(Error::MissingField { line, field }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "format");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bare_nan_reports_line() {
        let src = r#"{"question_id":"q1","domain":"Arts","condition":1,"format":"f16","correct":true,"nlp":-0.2}
{"question_id":"q2","domain":"Arts","condition":1,"format":"f16","correct":true,"nlp":NaN}
"#;
        assert!(matches!(
            parse_jsonl(src.as_bytes()),
            Err(Error::NonFiniteConfidence { line: 2 })
        ));
        let inf = r#"{"question_id":"q1","domain":"Arts","condition":1,"format":"f16","correct":true,"nlp":-Infinity}"#;
        assert!(matches!(
            parse_jsonl(inf.as_bytes()),
            Err(Error::NonFiniteConfidence { line: 1 })
        ));
        // NaN inside a string value is left alone
        let text = r#"{"question_id":"NaN","domain":"Arts","condition":1,"format":"f16","correct":true,"nlp":-1}"#;
        assert_eq!(parse_jsonl(text.as_bytes()).unwrap().records()[0].question_id, "NaN");
    }

    #[test]
    fn csv_with_reordered_header() {
        let src = "domain,question_id,condition,format,correct,nlp\nArts,q1,1,f16,true,-0.5\nArts,q2,1,f16,false,-0.7\n";
        let set = parse_csv(src.as_bytes()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.records()[0].question_id, "q1");
        assert_eq!(set.records()[1].answer_text, None);

        let nan = "question_id,domain,condition,format,correct,nlp\nq1,Arts,1,f16,true,NaN\n";
        assert!(matches!(
            parse_csv(nan.as_bytes()),
            Err(Error::NonFiniteConfidence { line: 2 })
        ));
        let short = "question_id,domain,condition,format,correct\nq1,Arts,1,f16,true\n";
        assert!(matches!(parse_csv(short.as_bytes()), Err(Error::MissingField { .. })));
    }

    fn sample() -> TrialSet {
        TrialSet::new(vec![
            rec("q1", "Arts", "1", "f16", true, -0.1),
            rec("q2", "Science", "1", "f16", false, -0.2),
            rec("q1", "Arts", "2", "f16", true, -0.3),
            rec("q2", "Science", "1", "q5_k_m", true, -0.4),
            rec("q3", "Science", "2", "q5_k_m", false, -0.5),
        ])
        .unwrap()
    }

    #[test]
    fn filter_selectors() {
        let s = sample();
        assert_eq!(s.filter(&Selector::default()), s);
        let sci = s.filter(&Selector::default().domain("Science").condition("1"));
        assert_eq!(sci.len(), 2);
        assert_eq!(sci.records()[0].question_id, "q2");
        assert_eq!(sci.records()[1].format, "q5_k_m");
        let none = Selector::default().domain("Nonexistent");
        assert!(s.filter(&none).is_empty());
        assert_eq!(none.unknown_values(&s), vec!["domain=Nonexistent".to_string()]);
    }

    #[test]
    fn pairing() {
        let a = TrialSet::new(vec![
            rec("q1", "Arts", "1", "f16", true, -0.1),
            rec("q2", "Arts", "1", "f16", true, -0.1),
        ])
        .unwrap();
        let b = TrialSet::new(vec![
            rec("q1", "Arts", "1", "f16", true, -0.1),
            rec("q3", "Arts", "1", "f16", true, -0.1),
        ])
        .unwrap();
        let r = validate_paired(&a, &b);
        assert!(!r.paired);
        assert_eq!(r.missing, vec!["Arts/q2"]);
        assert_eq!(r.extra, vec!["Arts/q3"]);
        assert_eq!(r.shared, 1);
        let same = validate_paired(&a, &a);
        assert!(same.paired && same.missing.is_empty() && same.extra.is_empty());
        assert_eq!(same.shared, 2);
    }

    #[test]
    fn pairing_sees_domain_disagreement() {
        let a = TrialSet::new(vec![rec("q1", "Arts", "1", "f16", true, -0.1)]).unwrap();
        let b = TrialSet::new(vec![rec("q1", "History", "2", "f16", true, -0.1)]).unwrap();
        assert!(!validate_paired(&a, &b).paired);
    }

    fn arb_record() -> impl Strategy<Value = TrialRecord> {
        (
            0u32..40,
            prop::sample::select(vec!["Arts", "Geography", "History", "Science"]),
            prop::sample::select(vec!["1", "2", "7"]),
            prop::sample::select(vec!["f16", "q5_k_m"]),
            any::<bool>(),
            -20.0f64..0.0,
            prop::option::of("[a-z \"\\\\]{0,8}"),
        )
            .prop_map(|(q, d, c, f, ok, nlp, text)| TrialRecord {
                question_id: format!("q{q}"),
                domain: d.into(),
                condition: c.into(),
                format: f.into(),
                correct: ok,
                nlp,
                answer_text: text,
            })
    }

    fn arb_set() -> impl Strategy<Value = TrialSet> {
        prop::collection::vec(arb_record(), 0..60).prop_map(|recs| {
            let mut seen = HashSet::new();
            let recs = recs
                .into_iter()
                .filter(|r| seen.insert((r.question_id.clone(), r.condition.clone(), r.format.clone())))
                .collect();
            TrialSet::new(recs).unwrap()
        })
    }

    fn arb_selector() -> impl Strategy<Value = Selector> {
        (
            prop::option::of(prop::sample::select(vec!["Arts", "Science", "Nope"])),
            prop::option::of(prop::sample::select(vec!["1", "2"])),
            prop::option::of(prop::sample::select(vec!["f16", "q5_k_m"])),
        )
            .prop_map(|(d, c, f)| Selector {
                domain: d.map(String::from),
                condition: c.map(String::from),
                format: f.map(String::from),
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(set in arb_set()) {
            let back = parse_jsonl(set.to_jsonl().as_bytes()).unwrap();
            prop_assert_eq!(back.records(), set.records());
        }

        #[test]
        fn filter_composes(set in arb_set(), p in arb_selector(), q in arb_selector()) {
            let nested = set.filter(&p).filter(&q);
            match p.and(&q) {
                Some(pq) => {
                    let direct = set.filter(&pq);
                    prop_assert_eq!(nested.records(), direct.records());
                }
                None => prop_assert!(nested.is_empty()),
            }
        }

        #[test]
        fn pairing_verdict_symmetric(a in arb_set(), b in arb_set()) {
            prop_assert_eq!(validate_paired(&a, &b).paired, validate_paired(&b, &a).paired);
        }
    }
}
