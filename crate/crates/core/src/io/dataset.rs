//! Line-delimited dataset files.
//!
//! One record per line, four tab-separated fields:
//!
//! ```text
//! id <TAB> payload <TAB> crowd_label <TAB> expert_label
//! ```
//!
//! `payload` is either `feat:` followed by comma-separated `index:value`
//! pairs, or `text:` followed by raw text with `\\`, `\t`, `\n` and `\r`
//! escaped. Labels are `0`, `1`, or `-` when absent. Blank lines and lines
//! starting with `#` are skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Instance, Label, SparseVec};
use crate::error::{Error, Result};
use crate::featurize::{hash_features, HashFeaturizerConfig, TruthLabels};

use super::{read_file, write_file};

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Features(Vec<(u32, f64)>),
    Text(String),
}

/// A parsed line before featurization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub id: String,
    pub payload: Payload,
    pub crowd: Option<Label>,
    pub expert: Option<Label>,
    pub line: usize,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape sequence `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

fn parse_label(field: &str) -> std::result::Result<Option<Label>, String> {
    match field.trim() {
        "" | "-" => Ok(None),
        "0" => Ok(Some(Label::Negative)),
        "1" => Ok(Some(Label::Positive)),
        other => Err(format!("label must be 0, 1 or -, got `{other}`")),
    }
}

fn parse_features(body: &str) -> std::result::Result<Vec<(u32, f64)>, String> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|pair| {
            let (i, v) = pair.split_once(':').ok_or_else(|| format!("feature pair `{pair}` lacks `:`"))?;
            let i: u32 = i.trim().parse().map_err(|_| format!("bad feature index `{i}`"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("bad feature value `{v}`"))?;
            Ok((i, v))
        })
        .collect()
}

/// Parses the contents of one dataset file; `path` only labels errors.
pub fn parse_rows(contents: &str, path: &str) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (n, line) in contents.lines().enumerate() {
        let line_no = n + 1;
        let err = |message: String| Error::Parse { path: path.to_string(), line: line_no, message };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        let payload = if let Some(body) = fields[1].strip_prefix("feat:") {
            Payload::Features(parse_features(body).map_err(err)?)
        } else if let Some(body) = fields[1].strip_prefix("text:") {
            Payload::Text(unescape(body).map_err(err)?)
        } else {
            return Err(err("payload must start with `feat:` or `text:`".into()));
        };
        rows.push(RawRow {
            id: id.to_string(),
            payload,
            crowd: parse_label(fields[2]).map_err(err)?,
            expert: parse_label(fields[3]).map_err(err)?,
            line: line_no,
        });
    }
    Ok(rows)
}

/// Turns raw rows into instances of a fixed dimension.
#[derive(Debug, Clone)]
pub struct DatasetReader {
    pub dim: usize,
    pub featurizer: HashFeaturizerConfig,
}

impl DatasetReader {
    /// Dimension implied by `rows`: the hash dimension when any row holds
    /// text, otherwise `explicit` or one past the largest feature index.
    pub fn infer_dim<'a>(
        rows: impl IntoIterator<Item = &'a RawRow>,
        explicit: Option<usize>,
        featurizer: &HashFeaturizerConfig,
    ) -> Result<usize> {
        let mut max_index: Option<u32> = None;
        let mut has_text = false;
        for row in rows {
            match &row.payload {
                Payload::Text(_) => has_text = true,
                Payload::Features(f) => {
                    for &(i, _) in f {
                        max_index = Some(max_index.map_or(i, |m| m.max(i)));
                    }
                }
            }
        }
        if has_text {
            featurizer.validate()?;
            return Ok(featurizer.dimension);
        }
        match (explicit, max_index) {
            (Some(d), _) => Ok(d),
            (None, Some(m)) => Ok(m as usize + 1),
            (None, None) => Err(Error::Config("cannot infer input dimension; set input_dim".into())),
        }
    }

    pub fn instances(&self, rows: Vec<RawRow>, path: &str) -> Result<Vec<Instance>> {
        rows.into_iter()
            .map(|row| {
                let err = |message: String| Error::Parse { path: path.to_string(), line: row.line, message };
                let (features, raw_text) = match row.payload {
                    Payload::Features(mut pairs) => {
                        pairs.sort_by_key(|p| p.0);
                        let (idx, vals): (Vec<u32>, Vec<f64>) = pairs.into_iter().unzip();
                        (SparseVec::new(self.dim, idx, vals).map_err(|e| err(e.to_string()))?, None)
                    }
                    Payload::Text(text) => {
                        let hashed = hash_features(&text, &self.featurizer)?;
                        if hashed.empty {
                            log::warn!("{path}:{}: empty text hashed to a zero vector", row.line);
                        }
                        if hashed.vector.dim() != self.dim {
                            return Err(err(format!(
                                "text rows hash to dimension {} but the dataset uses {}",
                                hashed.vector.dim(),
                                self.dim
                            )));
                        }
                        (hashed.vector, Some(text))
                    }
                };
                Ok(Instance { id: row.id, features, crowd_label: row.crowd, expert_label: row.expert, raw_text })
            })
            .collect()
    }

    pub fn read(&self, path: &Path) -> Result<Vec<Instance>> {
        let name = path.display().to_string();
        let rows = parse_rows(&read_file(path)?, &name)?;
        self.instances(rows, &name)
    }
}

fn label_field(label: Option<Label>) -> String {
    label.map_or_else(|| "-".to_string(), |l| l.to_string())
}

/// Formats one instance; text is kept when present, otherwise features.
pub fn format_row(inst: &Instance) -> String {
    let payload = match &inst.raw_text {
        Some(text) => format!("text:{}", escape(text)),
        None => {
            let mut s = String::from("feat:");
            for (k, (i, v)) in inst.features.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{i}:{v}");
            }
            s
        }
    };
    format!("{}\t{}\t{}\t{}\n", inst.id, payload, label_field(inst.crowd_label), label_field(inst.expert_label))
}

pub fn write_dataset(path: &Path, instances: &[Instance]) -> Result<()> {
    let body: String = instances.iter().map(format_row).collect();
    write_file(path, body.as_bytes())
}

/// `id <TAB> label` per line.
pub fn write_truth(path: &Path, truth: &TruthLabels) -> Result<()> {
    let body: String = truth.iter().map(|(id, l)| format!("{id}\t{l}\n")).collect();
    write_file(path, body.as_bytes())
}

pub fn read_truth(path: &Path) -> Result<TruthLabels> {
    let name = path.display().to_string();
    let mut truth = TruthLabels::default();
    let mut seen = BTreeMap::new();
    for (n, line) in read_file(path)?.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { path: name.clone(), line: n + 1, message };
        let (id, label) = line.split_once('\t').ok_or_else(|| err("expected `id<TAB>label`".into()))?;
        let label = parse_label(label).map_err(err)?.ok_or_else(|| err("missing label".into()))?;
        if seen.insert(id.to_string(), ()).is_some() {
            return Err(err(format!("duplicate id `{id}`")));
        }
        truth.insert(id, label);
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_payloads() {
        let src = "# comment\nc1\tfeat:0:0.5,3:-1.25\t1\t-\nc2\ttext:sick after\\tdinner\t-\t0\n\n";
        let rows = parse_rows(src, "x.tsv").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].payload, Payload::Features(vec![(0, 0.5), (3, -1.25)]));
        assert_eq!(rows[0].crowd, Some(Label::Positive));
        assert_eq!(rows[0].expert, None);
        assert_eq!(rows[1].payload, Payload::Text("sick after\tdinner".into()));
        assert_eq!(rows[1].line, 3);
    }

    #[test]
    fn errors_name_file_and_line() {
        let err = parse_rows("a\tfeat:1:2\t1\t-\nb\tfeat:1:x\t1\t-\n", "crowd.tsv").unwrap_err().to_string();
        assert!(err.starts_with("crowd.tsv:2:"), "{err}");
        let err = parse_rows("a\tblob\t1\t-\n", "f").unwrap_err().to_string();
        assert!(err.contains("feat:"), "{err}");
        assert!(parse_rows("a\tfeat:1:1\t2\t-\n", "f").is_err());
        assert!(parse_rows("a\tfeat:1:1\t1\n", "f").is_err());
    }

    #[test]
    fn row_roundtrip() {
        let inst = Instance::new("v7", SparseVec::new(8, vec![1, 5], vec![0.1 + 0.2, -3e-17]).unwrap())
            .with_expert(Label::Negative);
        let line = format_row(&inst);
        let rows = parse_rows(&line, "f").unwrap();
        let reader = DatasetReader { dim: 8, featurizer: HashFeaturizerConfig::default() };
        assert_eq!(reader.instances(rows, "f").unwrap(), vec![inst]);

        let mut t = Instance::new("t1", SparseVec::zeros(4096));
        t.raw_text = Some("line\none\\two".into());
        let parsed = parse_rows(&format_row(&t), "f").unwrap();
        assert_eq!(parsed[0].payload, Payload::Text("line\none\\two".into()));
    }

    #[test]
    fn infer_dimension() {
        let rows = parse_rows("a\tfeat:4:1\t1\t-\nb\tfeat:9:1\t0\t-\n", "f").unwrap();
        let h = HashFeaturizerConfig::default();
        assert_eq!(DatasetReader::infer_dim(&rows, None, &h).unwrap(), 10);
        assert_eq!(DatasetReader::infer_dim(&rows, Some(50), &h).unwrap(), 50);
        let text = parse_rows("a\ttext:hello\t1\t-\n", "f").unwrap();
        assert_eq!(DatasetReader::infer_dim(&text, None, &h).unwrap(), 4096);
    }

    #[test]
    fn out_of_range_feature_is_reported() {
        let rows = parse_rows("a\tfeat:12:1\t1\t-\n", "f").unwrap();
        let reader = DatasetReader { dim: 8, featurizer: HashFeaturizerConfig::default() };
        assert!(reader.instances(rows, "f").unwrap_err().to_string().starts_with("f:1:"));
    }
}
