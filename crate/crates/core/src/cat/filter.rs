use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::CatBundle;
use super::validate::{RejectClass, Validator, Variant, Verdict};
use crate::ctl::{self, SyntaxError};

/// Number of top-level statements in the solution. A loop counts once,
/// however many statements its body holds.
pub fn difficulty(bundle: &CatBundle) -> Result<usize, SyntaxError> {
    Ok(ctl::parse(&bundle.solution)?.body.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub variant: Variant,
    pub total: usize,
    pub accepted: usize,
    pub counts: BTreeMap<RejectClass, usize>,
    /// `accepted / total`, or 0 for an empty batch.
    pub pass_rate: f64,
    /// Solution length -> count over all bundles whose solution parses.
    pub histogram_all: BTreeMap<usize, usize>,
    /// Solution length -> count over accepted bundles.
    pub difficulty_histogram: BTreeMap<usize, usize>,
}

impl FilterStats {
    pub fn empty(variant: Variant) -> FilterStats {
        FilterStats {
            variant,
            total: 0,
            accepted: 0,
            counts: RejectClass::ALL.iter().map(|c| (*c, 0)).collect(),
            pass_rate: 0.0,
            histogram_all: BTreeMap::new(),
            difficulty_histogram: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, bundle: &CatBundle, verdict: &Verdict) {
        self.total += 1;
        let len = difficulty(bundle).ok();
        if let Some(len) = len {
            *self.histogram_all.entry(len).or_default() += 1;
        }
        match verdict.reject_class {
            Some(class) => *self.counts.entry(class).or_default() += 1,
            None => {
                self.accepted += 1;
                if let Some(len) = len {
                    *self.difficulty_histogram.entry(len).or_default() += 1;
                }
            }
        }
        self.refresh_rate();
    }

    /// Combines two batches' statistics; associative and commutative.
    pub fn merge(mut self, other: &FilterStats) -> FilterStats {
        self.total += other.total;
        self.accepted += other.accepted;
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_default() += v;
        }
        for (k, v) in &other.histogram_all {
            *self.histogram_all.entry(*k).or_default() += v;
        }
        for (k, v) in &other.difficulty_histogram {
            *self.difficulty_histogram.entry(*k).or_default() += v;
        }
        self.refresh_rate();
        self
    }

    fn refresh_rate(&mut self) {
        self.pass_rate = if self.total == 0 { 0.0 } else { self.accepted as f64 / self.total as f64 };
    }

    pub fn count(&self, class: RejectClass) -> usize {
        self.counts.get(&class).copied().unwrap_or(0)
    }
}

pub struct FilterOutput {
    pub accepted: Vec<CatBundle>,
    pub verdicts: Vec<Verdict>,
    pub stats: FilterStats,
}

/// Validates every bundle in parallel; output order follows input order.
pub fn filter_batch(validator: &Validator, bundles: &[CatBundle], variant: Variant) -> FilterOutput {
    let verdicts: Vec<Verdict> = bundles.par_iter().map(|b| validator.validate(b, variant)).collect();
    let mut stats = FilterStats::empty(variant);
    let mut accepted = Vec::new();
    for (bundle, verdict) in bundles.iter().zip(&verdicts) {
        stats.record(bundle, verdict);
        if verdict.accepted() {
            accepted.push(bundle.clone());
        }
    }
    FilterOutput { accepted, verdicts, stats }
}

/// Histogram as aligned text rows, one bar per solution length.
pub fn render_histogram(hist: &BTreeMap<usize, usize>) -> String {
    if hist.is_empty() {
        return "no data\n".to_string();
    }
    let peak = hist.values().copied().max().unwrap_or(1).max(1);
    let mut out = String::from("solution length | count\n");
    for (len, count) in hist {
        let bar = "#".repeat((count * 40).div_ceil(peak));
        out.push_str(&format!("{len:>15} | {count:>5} {bar}\n"));
    }
    out
}
