//! The metrics report: one JSON document per run with an entry for every
//! request, pairing the fabric's movement costs with the centralized
//! baseline's.

use serde::Serialize;

use super::{Metrics, Ratios, RequestStatus};
use crate::dpu::Payload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub processing: u32,
    pub rejection: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestReport {
    pub request_id: u64,
    pub source_text: String,
    pub status: RequestStatus,
    pub payload: Payload,
    pub counters: Counters,
    pub fabric_metrics: Metrics,
    pub baseline_metrics: Metrics,
    pub ratios: Ratios,
    /// View records blocks skipped because the named field was missing or
    /// text where a number was needed.
    pub skipped_values: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub topology: String,
    pub routing: String,
    pub seed: u64,
    pub records: u64,
    pub requests: Vec<RequestReport>,
}

impl RunReport {
    /// Pretty JSON with a trailing newline, stable across runs.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
