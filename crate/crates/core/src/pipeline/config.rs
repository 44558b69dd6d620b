use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::faq::DEFAULT_FAQ_THRESHOLD;
use crate::generate::SelectionWeights;
use crate::retrieve::SearchPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchSource {
    Builtin,
    External,
}

/// Per-stage budgets in milliseconds. The total deadline caps the sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Deadlines {
    pub total_ms: u64,
    pub generate_ms: u64,
}

impl Default for Deadlines {
    fn default() -> Self {
        Deadlines {
            total_ms: 10_000,
            generate_ms: 8_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub faq_threshold: f64,
    pub search: SearchPolicy,
    pub search_source: SearchSource,
    /// Apply recency decay with this half-life after filtering.
    pub recency_half_life_days: Option<f64>,
    /// Detected languages below this confidence fall back to the client
    /// locale, or English.
    pub language_min_confidence: f64,
    pub context_budget: usize,
    pub selection: SelectionWeights,
    pub deadlines: Deadlines,
    /// Reject feedback for request ids this process has not answered.
    pub strict_feedback: bool,
    /// Prefix for topic links; the topic id is appended.
    pub link_base: String,
    /// How many recent request ids are remembered for feedback checks.
    pub request_memory: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            faq_threshold: DEFAULT_FAQ_THRESHOLD,
            search: SearchPolicy::default(),
            search_source: SearchSource::Builtin,
            recency_half_life_days: None,
            language_min_confidence: 0.7,
            context_budget: 4096,
            selection: SelectionWeights::default(),
            deadlines: Deadlines::default(),
            strict_feedback: false,
            link_base: "/topics/".into(),
            request_memory: 10_000,
        }
    }
}

impl PipelineConfig {
    pub fn total_deadline(&self) -> Duration {
        Duration::from_millis(self.deadlines.total_ms)
    }

    pub fn generate_deadline(&self) -> Duration {
        Duration::from_millis(self.deadlines.generate_ms.min(self.deadlines.total_ms))
    }
}
