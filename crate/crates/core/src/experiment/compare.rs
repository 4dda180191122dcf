//! Differences between two runs of the same kind.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{read_manifest, read_summary, ExperimentKind, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDiff {
    pub key: String,
    pub a: Value,
    pub b: Value,
}

/// One statistic present in both runs with differing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDiff {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub se_a: f64,
    pub se_b: f64,
    /// `(a - b) / sqrt(se_a^2 + se_b^2)`.
    pub z: f64,
    /// `|z| <= 3`.
    pub consistent: bool,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub kind: ExperimentKind,
    pub seeds: (u64, u64),
    /// Differing config entries; seeds are reported separately.
    pub config: Vec<ConfigDiff>,
    pub statistics: Vec<StatDiff>,
}

impl CompareReport {
    pub fn is_empty(&self) -> bool {
        self.config.is_empty() && self.statistics.is_empty()
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

fn is_seed(key: &str) -> bool {
    key == "seed" || key.ends_with(".seed")
}

/// Compares two runs given their manifests (or run directories).
pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport, RunError> {
    let (ma, mb) = (read_manifest(a)?, read_manifest(b)?);
    if ma.kind != mb.kind {
        return Err(RunError::KindMismatch { a: ma.kind, b: mb.kind });
    }
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", &serde_json::to_value(&ma.config)?, &mut fa);
    flatten("", &serde_json::to_value(&mb.config)?, &mut fb);
    let mut keys: Vec<&String> = fa.keys().chain(fb.keys()).collect();
    keys.sort();
    keys.dedup();
    let config = keys
        .into_iter()
        .filter(|k| !is_seed(k))
        .filter_map(|k| {
            let (x, y) = (fa.get(k).cloned().unwrap_or(Value::Null), fb.get(k).cloned().unwrap_or(Value::Null));
            (x != y).then(|| ConfigDiff { key: k.clone(), a: x, b: y })
        })
        .collect();

    let (sa, sb) = (read_summary(a, &ma)?, read_summary(b, &mb)?);
    let statistics = sa
        .statistics
        .iter()
        .filter_map(|x| {
            let y = sb.statistics.iter().find(|y| y.name == x.name)?;
            if x.value == y.value {
                return None;
            }
            let z = (x.value - y.value) / (x.se * x.se + y.se * y.se).sqrt();
            Some(StatDiff {
                name: x.name.clone(),
                a: x.value,
                b: y.value,
                se_a: x.se,
                se_b: y.se,
                z,
                consistent: z.abs() <= 3.0,
                ratio: x.value / y.value,
            })
        })
        .collect();
    Ok(CompareReport {
        kind: ma.kind,
        seeds: (ma.seed, mb.seed),
        config,
        statistics,
    })
}
