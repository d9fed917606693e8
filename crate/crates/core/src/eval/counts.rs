use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};

/// Histogram of labels in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    counts: IndexMap<String, u64>,
    total: u64,
}

impl LabelCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a new label; errors if it is already present.
    pub fn insert(&mut self, label: impl Into<String>, count: u64) -> Result<()> {
        let label = label.into();
        if self.counts.contains_key(&label) {
            return Err(Error::InvalidConfig(format!("duplicate label {label:?}")));
        }
        self.total += count;
        self.counts.insert(label, count);
        Ok(())
    }

    /// Adds `n` to `label`, inserting it at the end if absent.
    pub fn add(&mut self, label: &str, n: u64) {
        *self.counts.entry(label.to_string()).or_insert(0) += n;
        self.total += n;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(l, &c)| (l.as_str(), c))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    /// Empirical probabilities over `labels`; absent labels get zero.
    pub fn frequencies_on(&self, labels: &[String]) -> Vec<f64> {
        let total = self.total as f64;
        labels.iter().map(|l| self.get(l) as f64 / total).collect()
    }

    pub fn to_dist(&self) -> Result<DiscreteDist> {
        if self.total == 0 {
            return Err(Error::InvalidDistribution("histogram is empty".into()));
        }
        let labels: Vec<String> = self.counts.keys().cloned().collect();
        let probs = self.frequencies_on(&labels);
        DiscreteDist::normalized(labels, probs)
    }

    /// `label,count,probability` CSV.
    pub fn frequency_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "count", "probability"]).unwrap();
        let total = self.total as f64;
        for (label, c) in self.iter() {
            let p = if self.total == 0 {
                0.0
            } else {
                c as f64 / total
            };
            w.write_record([label, &c.to_string(), &p.to_string()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_count(field: &str) -> std::result::Result<u64, String> {
    match field.parse::<u64>() {
        Ok(c) => Ok(c),
        Err(_) if field.parse::<i64>().is_ok() => Err(format!("negative count {field}")),
        Err(_) => Err(format!("invalid count {field:?}")),
    }
}

/// `label,count` rows; a non-numeric count on the first row is a header.
/// `path` only labels errors.
pub fn parse_counts_csv(text: &str, path: &Path) -> Result<LabelCounts> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut counts = LabelCounts::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let count = match parse_count(&rec[1]) {
            Ok(c) => c,
            Err(_) if i == 0 && rec[1].parse::<f64>().is_err() => continue,
            Err(msg) => return Err(parse_error(path, line, msg)),
        };
        counts
            .insert(&rec[0], count)
            .map_err(|_| parse_error(path, line, format!("duplicate label {:?}", &rec[0])))?;
    }
    if counts.is_empty() {
        return Err(parse_error(path, 0, "no counts"));
    }
    Ok(counts)
}

struct StrictCounts(LabelCounts);

impl<'de> Deserialize<'de> for StrictCounts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = StrictCounts;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from label to non-negative integer count")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<StrictCounts, A::Error> {
                let mut counts = LabelCounts::new();
                while let Some((label, count)) = map.next_entry::<String, i64>()? {
                    if count < 0 {
                        return Err(de::Error::custom(format!(
                            "negative count {count} for {label:?}"
                        )));
                    }
                    counts
                        .insert(label, count as u64)
                        .map_err(de::Error::custom)?;
                }
                Ok(StrictCounts(counts))
            }
        }
        d.deserialize_map(V)
    }
}

/// JSON object `{"label": count, ...}`.
pub fn parse_counts_json(text: &str, path: &Path) -> Result<LabelCounts> {
    let StrictCounts(counts) = serde_json::from_str(text)
        .map_err(|e| parse_error(path, e.line() as u64, e.to_string()))?;
    if counts.is_empty() {
        return Err(parse_error(path, 1, "no counts"));
    }
    Ok(counts)
}

/// Reads a `.json` map or a `label,count` CSV. Other extensions are
/// sniffed: a leading `{` selects JSON.
pub fn load_counts(path: &Path) -> Result<LabelCounts> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let is_json = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => true,
        Some(e) if e.eq_ignore_ascii_case("csv") => false,
        _ => text.trim_start().starts_with('{'),
    };
    if is_json {
        parse_counts_json(&text, path)
    } else {
        parse_counts_csv(&text, path)
    }
}
