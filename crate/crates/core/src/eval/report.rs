use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::counts::LabelCounts;
use crate::dist::{kl_divergence_probs, PROTOCOL_SMOOTHING};
use crate::error::{Error, Result};

/// One generated histogram attributed to a source (model) name.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedCounts {
    pub source: String,
    pub counts: LabelCounts,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlOptions {
    /// Replaces zero empirical probabilities; vectors are not renormalized.
    pub smoothing: f64,
    /// Logarithm base; `e` gives nats.
    pub log_base: f64,
}

impl Default for KlOptions {
    fn default() -> Self {
        Self {
            smoothing: PROTOCOL_SMOOTHING,
            log_base: std::f64::consts::E,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub source: String,
    /// Arithmetic mean of `per_trial`.
    pub kl: f64,
    pub per_trial: Vec<f64>,
}

/// Average `KL(generated || reference)` per source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub reference: String,
    pub smoothing: f64,
    pub log_base: f64,
    pub trials: usize,
    pub rows: Vec<KlRow>,
}

/// Sources appear in first-seen order. Labels are the reference labels
/// followed by labels only seen in generated histograms; a missing label
/// counts as zero.
pub fn kl_report(
    generated: &[NamedCounts],
    reference_name: &str,
    reference: &LabelCounts,
    opts: KlOptions,
) -> Result<KlReport> {
    if reference.total() == 0 {
        return Err(Error::InvalidDistribution(
            "reference histogram is empty".into(),
        ));
    }
    if !(opts.smoothing.is_finite() && opts.smoothing >= 0.0) {
        return Err(Error::Domain(format!(
            "smoothing must be >= 0, got {}",
            opts.smoothing
        )));
    }
    if !(opts.log_base.is_finite() && opts.log_base > 0.0 && opts.log_base != 1.0) {
        return Err(Error::Domain(format!("invalid log base {}", opts.log_base)));
    }
    let mut labels: Vec<String> = reference.labels().map(str::to_string).collect();
    for g in generated {
        for l in g.counts.labels() {
            if reference.get(l) == 0 && !labels.iter().any(|x| x == l) {
                labels.push(l.to_string());
            }
        }
    }
    let ref_probs = reference.frequencies_on(&labels);
    let scale = opts.log_base.ln();
    let mut by_source: IndexMap<&str, Vec<f64>> = IndexMap::new();
    for g in generated {
        if g.counts.total() == 0 {
            return Err(Error::InvalidDistribution(format!(
                "histogram for {:?} is empty",
                g.source
            )));
        }
        let probs = g.counts.frequencies_on(&labels);
        let kl = kl_divergence_probs(&probs, &ref_probs, opts.smoothing) / scale;
        by_source.entry(&g.source).or_default().push(kl);
    }
    let rows = by_source
        .into_iter()
        .map(|(source, per_trial)| KlRow {
            source: source.to_string(),
            kl: per_trial.iter().sum::<f64>() / per_trial.len() as f64,
            per_trial,
        })
        .collect();
    Ok(KlReport {
        reference: reference_name.to_string(),
        smoothing: opts.smoothing,
        log_base: opts.log_base,
        trials: generated.len(),
        rows,
    })
}

impl KlReport {
    /// Human-readable table: one row per source with its mean KL.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.source.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let unit = if self.log_base == std::f64::consts::E {
            "nats".to_string()
        } else {
            format!("log base {}", self.log_base)
        };
        let mut out = format!(
            "Average KL divergence to {} (smoothing {:e}, {unit})\n",
            self.reference, self.smoothing
        );
        writeln!(out, "{:<width$}  {:>6}  {:>10}", "source", "trials", "kl").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:<width$}  {:>6}  {:>10.3}",
                r.source,
                r.per_trial.len(),
                r.kl
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Metadata in a leading `#` line, then `source,kl,per_trial` rows with
    /// trial values separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut meta = csv::Writer::from_writer(Vec::new());
        meta.write_record([
            self.reference.as_str(),
            &self.smoothing.to_string(),
            &self.log_base.to_string(),
            &self.trials.to_string(),
        ])
        .unwrap();
        let meta = String::from_utf8(meta.into_inner().unwrap()).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "kl", "per_trial"]).unwrap();
        for r in &self.rows {
            let trials: Vec<String> = r.per_trial.iter().map(f64::to_string).collect();
            w.write_record([r.source.as_str(), &r.kl.to_string(), &trials.join(";")])
                .unwrap();
        }
        format!(
            "# {meta}{}",
            String::from_utf8(w.into_inner().unwrap()).unwrap()
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidConfig(format!("KL report CSV: {msg}"));
        let (first, body) = text
            .split_once('\n')
            .ok_or_else(|| bad("missing metadata".into()))?;
        let first = first
            .strip_prefix("# ")
            .ok_or_else(|| bad("missing metadata".into()))?;
        let meta = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(first.as_bytes())
            .records()
            .next()
            .ok_or_else(|| bad("empty metadata".into()))?
            .map_err(|e| bad(e.to_string()))?;
        if meta.len() != 4 {
            return Err(bad(
                "metadata needs reference,smoothing,log_base,trials".into()
            ));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let mut rows = Vec::new();
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 3 {
                return Err(bad(format!("row has {} fields", rec.len())));
            }
            let per_trial = rec[2].split(';').map(num).collect::<Result<Vec<_>>>()?;
            rows.push(KlRow {
                source: rec[0].to_string(),
                kl: num(&rec[1])?,
                per_trial,
            });
        }
        Ok(Self {
            reference: meta[0].to_string(),
            smoothing: num(&meta[1])?,
            log_base: num(&meta[2])?,
            trials: meta[3].parse().map_err(|e| bad(format!("trials: {e}")))?,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform10(each: u64) -> LabelCounts {
        let mut c = LabelCounts::new();
        for d in 0..10 {
            c.insert(d.to_string(), each).unwrap();
        }
        c
    }

    fn single_mode() -> LabelCounts {
        let mut c = LabelCounts::new();
        c.insert("3", 100).unwrap();
        c
    }

    fn named(source: &str, counts: LabelCounts) -> NamedCounts {
        NamedCounts {
            source: source.into(),
            counts,
        }
    }

    #[test]
    fn identical_is_zero() {
        let r = kl_report(
            &[named("g", uniform10(7))],
            "ref",
            &uniform10(6000),
            KlOptions::default(),
        )
        .unwrap();
        assert_eq!(r.rows[0].kl, 0.0);
    }

    #[test]
    fn single_mode_is_ln10() {
        let r = kl_report(
            &[named("g", single_mode())],
            "ref",
            &uniform10(6000),
            KlOptions::default(),
        )
        .unwrap();
        let expected = 10f64.ln() + 9.0 * 1e-10 * (1e-10f64 / 0.1).ln();
        assert_abs_diff_eq!(r.rows[0].kl, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rows[0].kl, 10f64.ln(), epsilon = 1e-6);
        let bits = KlOptions {
            log_base: 2.0,
            ..KlOptions::default()
        };
        let r2 = kl_report(&[named("g", single_mode())], "ref", &uniform10(6000), bits).unwrap();
        assert_abs_diff_eq!(r2.rows[0].kl, expected / 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn averages_trials_per_source() {
        let gen = [
            named("a", single_mode()),
            named("b", uniform10(1)),
            named("a", uniform10(3)),
        ];
        let r = kl_report(&gen, "mnist", &uniform10(6000), KlOptions::default()).unwrap();
        assert_eq!(r.trials, 3);
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].source, "a");
        assert_eq!(r.rows[0].per_trial.len(), 2);
        assert_abs_diff_eq!(r.rows[0].kl, r.rows[0].per_trial[0] / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn unseen_labels_are_unified() {
        let mut g = LabelCounts::new();
        g.insert("x", 5).unwrap();
        g.insert("0", 5).unwrap();
        let r = kl_report(&[named("g", g)], "ref", &uniform10(1), KlOptions::default()).unwrap();
        assert!(r.rows[0].kl.is_finite() && r.rows[0].kl > 1.0);
    }

    #[test]
    fn errors() {
        let empty = LabelCounts::new();
        assert!(kl_report(&[], "ref", &empty, KlOptions::default()).is_err());
        let bad = KlOptions {
            smoothing: -1.0,
            ..KlOptions::default()
        };
        assert!(kl_report(&[], "ref", &uniform10(1), bad).is_err());
    }

    #[test]
    fn round_trips() {
        let gen = [
            named("DCGAN", single_mode()),
            named("PacDCGAN2", uniform10(2)),
            named("DCGAN", uniform10(5)),
        ];
        let r = kl_report(&gen, "mnist, train", &uniform10(6000), KlOptions::default()).unwrap();
        assert_eq!(KlReport::from_csv(&r.to_csv()).unwrap(), r);
        assert_eq!(KlReport::from_json(&r.to_json()).unwrap(), r);
        let table = r.to_table();
        assert!(table.contains("DCGAN") && table.contains("nats"));
    }
}
