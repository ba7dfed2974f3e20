use std::collections::BTreeMap;
use std::fmt::Write as _;

use lipsync_core::{MfccFrame, WeightVector};
use serde::Serialize;

/// Shown as the top phoneme when every weight is zero.
pub const SILENCE_MARK: &str = "-";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    pub rms: f64,
    pub top: String,
    pub weights: BTreeMap<String, f64>,
}

pub fn rows(analysis: &[(MfccFrame, WeightVector)]) -> Vec<Row> {
    analysis
        .iter()
        .map(|(frame, w)| Row {
            t: w.timestamp,
            rms: frame.rms,
            top: w.argmax().unwrap_or(SILENCE_MARK).to_owned(),
            weights: w.weights.clone(),
        })
        .collect()
}

pub fn to_json(rows: &[Row]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows serialise");
    s.push('\n');
    s
}

pub fn to_table(rows: &[Row], labels: &[String]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:>9} {:>9} {:>4}", "t", "rms", "top");
    for label in labels {
        let _ = write!(s, " {label:>8}");
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:>9.3} {:>9.5} {:>4}", row.t, row.rms, row.top);
        for label in labels {
            let _ = write!(s, " {:>8.4}", row.weights.get(label).copied().unwrap_or(0.0));
        }
        s.push('\n');
    }
    s
}
