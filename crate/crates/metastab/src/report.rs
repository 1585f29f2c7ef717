//! Structured, deterministic reports: condition checks, sweeps, manifests.
//!
//! Identical inputs must yield bit-identical JSON, so every map is a
//! `BTreeMap` and nothing time-dependent enters a `ConditionReport`
//! (the run manifest carries the timestamp instead).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    H2,
    C03,
    M1,
    M2a,
    M2b,
    B09A,
    B09,
    L08,
    CAPEST,
    TMIX2,
    TMIX3,
}

impl ConditionId {
    pub fn parse(s: &str) -> Option<ConditionId> {
        match s.to_ascii_uppercase().as_str() {
            "H2" => Some(ConditionId::H2),
            "C03" | "03" => Some(ConditionId::C03),
            "M1" => Some(ConditionId::M1),
            "M2A" => Some(ConditionId::M2a),
            "M2B" => Some(ConditionId::M2b),
            "B09A" => Some(ConditionId::B09A),
            "B09" => Some(ConditionId::B09),
            "L08" => Some(ConditionId::L08),
            "CAPEST" => Some(ConditionId::CAPEST),
            "TMIX2" => Some(ConditionId::TMIX2),
            "TMIX3" => Some(ConditionId::TMIX3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    TrendPass,
    Fail,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: u32,
    pub value: f64,
}

/// Result of one condition check, optionally with an N-sweep attached.
///
/// The headline scalar lives under `values["value"]`; auxiliary scalars
/// keep their own keys. Verdicts: `pass` only when the value is exactly
/// zero (the asymptotic statement holds trivially at finite N), `warn` for
/// a single-N evaluation of a limit statement, `trend-pass`/`fail` for
/// sweeps by strict decrease across at least three sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub params: BTreeMap<String, f64>,
    pub values: BTreeMap<String, f64>,
    pub sweep: Vec<SweepPoint>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn single(id: ConditionId, params: BTreeMap<String, f64>, values: BTreeMap<String, f64>) -> Self {
        let value = values.get("value").copied().unwrap_or(f64::NAN);
        let verdict = if value.abs() <= 1e-14 {
            Verdict::Pass
        } else {
            Verdict::Warn
        };
        let notes = if verdict == Verdict::Warn {
            vec!["single-size evaluation of an asymptotic condition; run a sweep for a trend verdict".into()]
        } else {
            Vec::new()
        };
        ConditionReport { id, params, values, sweep: Vec::new(), verdict, notes }
    }

    pub fn value(&self) -> f64 {
        self.values.get("value").copied().unwrap_or(f64::NAN)
    }

    pub fn push_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Strict decrease across the sweep; equality within 1e-12 counts as
/// non-decrease. Needs at least three points.
pub fn trend_verdict(points: &[SweepPoint]) -> Verdict {
    if points.len() < 3 {
        return Verdict::Warn;
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].value < w[0].value - 1e-12);
    if strictly_decreasing {
        Verdict::TrendPass
    } else {
        Verdict::Fail
    }
}

/// Run a per-size check over an N-sweep and merge into one report. The
/// closure returns the report for a single size; sweep points run as
/// independent jobs and merge in size order, so the output is
/// deterministic whatever the worker count. Headline values become the
/// sweep points and the verdict is the trend verdict.
pub fn sweep_condition<F>(ns: &[u32], run: F) -> crate::error::Result<ConditionReport>
where
    F: Fn(u32) -> crate::error::Result<ConditionReport> + Sync,
{
    use rayon::prelude::*;
    assert!(!ns.is_empty());
    let mut ordered = ns.to_vec();
    ordered.sort_unstable();
    let reports: Vec<ConditionReport> = ordered
        .par_iter()
        .map(|&n| run(n))
        .collect::<crate::error::Result<_>>()?;
    let points: Vec<SweepPoint> = ordered
        .iter()
        .zip(&reports)
        .map(|(&n, rep)| SweepPoint { n, value: rep.value() })
        .collect();
    let mut rep = reports.into_iter().last().expect("at least one sweep point");
    rep.verdict = trend_verdict(&points);
    rep.sweep = points;
    rep.notes.retain(|n| !n.starts_with("single-size evaluation"));
    if rep.verdict == Verdict::TrendPass {
        rep.push_note("value strictly decreases across the sweep");
    } else if rep.verdict == Verdict::Fail {
        rep.push_note("value does not strictly decrease across the sweep");
    }
    Ok(rep)
}

/// Manifest embedded in CLI outputs: command, parameters, version, input
/// hashes, timestamp. The timestamp is excluded from the content hash so
/// reruns stay byte-comparable after stripping it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub toolkit_version: String,
    pub input_hashes: BTreeMap<String, String>,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, params: BTreeMap<String, String>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            params,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hashes: BTreeMap::new(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn hash_input(&mut self, name: &str, bytes: &[u8]) {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(bytes);
        self.input_hashes.insert(name.to_string(), format!("{:x}", h.finalize()));
    }
}
