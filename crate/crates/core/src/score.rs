//! Accuracy overall and per category.
//!
//! Percentages are rounded half-up with exact integer arithmetic: two
//! decimals per category, one decimal overall.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use core::fmt;

use serde::{Serialize, Serializer};

use crate::eval::{EvalResult, QaSample};
use crate::prompt::Category;

/// A percentage stored as an integer count of `10^-decimals` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Percent {
    units: u64,
    decimals: u8,
}

impl Percent {
    /// `100 * correct / n`, rounded half-up. `None` when `n == 0`.
    pub fn of(correct: usize, n: usize, decimals: u8) -> Option<Percent> {
        if n == 0 {
            return None;
        }
        let scale = 100 * 10u128.pow(decimals as u32);
        let (c, n) = (correct as u128, n as u128);
        let units = (2 * scale * c + n) / (2 * n);
        Some(Percent {
            units: units as u64,
            decimals,
        })
    }

    pub fn as_f64(self) -> f64 {
        self.units as f64 / libm::pow(10.0, self.decimals as f64)
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scale = 10u64.pow(self.decimals as u32);
        if self.decimals == 0 {
            return write!(f, "{}", self.units);
        }
        write!(
            f,
            "{}.{:0width$}",
            self.units / scale,
            self.units % scale,
            width = self.decimals as usize
        )
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

/// Placeholder shown for an undefined accuracy.
pub const UNDEFINED: &str = "—";

pub fn display_percent(p: Option<Percent>) -> String {
    p.map_or_else(|| UNDEFINED.into(), |p| format!("{p}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CategoryScore {
    pub n: usize,
    pub correct: usize,
    pub accuracy: Option<Percent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreReport {
    pub overall_acc: Option<Percent>,
    pub n: usize,
    pub correct: usize,
    /// Every category is present, with `n == 0` when unseen.
    pub per_category: BTreeMap<Category, CategoryScore>,
    pub n_parse_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("result for unknown sample {0:?}")]
    UnknownSample(String),
}

impl ScoreReport {
    /// Builds a report from per-category `(correct, n)` counts.
    pub fn from_counts(counts: &BTreeMap<Category, (usize, usize)>, n_parse_errors: usize) -> Self {
        let mut per_category = BTreeMap::new();
        let (mut total_correct, mut total) = (0, 0);
        for cat in Category::ALL {
            let (correct, n) = counts.get(&cat).copied().unwrap_or((0, 0));
            total_correct += correct;
            total += n;
            per_category.insert(
                cat,
                CategoryScore {
                    n,
                    correct,
                    accuracy: Percent::of(correct, n, 2),
                },
            );
        }
        ScoreReport {
            overall_acc: Percent::of(total_correct, total, 1),
            n: total,
            correct: total_correct,
            per_category,
            n_parse_errors,
        }
    }

    /// Unrounded overall accuracy.
    pub fn overall_exact(&self) -> Option<f64> {
        (self.n > 0).then(|| 100.0 * self.correct as f64 / self.n as f64)
    }

    /// Count-weighted mean of the rounded per-category accuracies.
    pub fn weighted_category_mean(&self) -> Option<f64> {
        (self.n > 0).then(|| {
            self.per_category
                .values()
                .filter_map(|c| c.accuracy.map(|a| a.as_f64() * c.n as f64))
                .sum::<f64>()
                / self.n as f64
        })
    }

    pub fn overall_display(&self) -> String {
        display_percent(self.overall_acc)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), ScoreError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ScoreError::DuplicateSampleId(id.into()));
        }
    }
    Ok(())
}

/// Scores `results` against the gold labels and categories of `samples`.
pub fn score(results: &[EvalResult], samples: &[QaSample]) -> Result<ScoreReport, ScoreError> {
    check_unique(samples.iter().map(|s| s.sample_id.as_str()))?;
    check_unique(results.iter().map(|r| r.sample_id.as_str()))?;
    let by_id: BTreeMap<&str, &QaSample> = samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let mut counts: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    let mut parse_errors = 0;
    for r in results {
        let sample = by_id
            .get(r.sample_id.as_str())
            .ok_or_else(|| ScoreError::UnknownSample(r.sample_id.clone()))?;
        let entry = counts.entry(sample.question.category).or_default();
        entry.0 += (r.predicted_index == Some(sample.gold_index)) as usize;
        entry.1 += 1;
        parse_errors += r.parse_error as usize;
    }
    Ok(ScoreReport::from_counts(&counts, parse_errors))
}

/// Scores results on their own recorded category and correctness.
pub fn score_results(results: &[EvalResult]) -> Result<ScoreReport, ScoreError> {
    check_unique(results.iter().map(|r| r.sample_id.as_str()))?;
    let mut counts: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for r in results {
        let entry = counts.entry(r.category).or_default();
        entry.0 += r.correct as usize;
        entry.1 += 1;
    }
    Ok(ScoreReport::from_counts(
        &counts,
        results.iter().filter(|r| r.parse_error).count(),
    ))
}

/// Markdown table in the layout of a task-wise accuracy table.
pub fn render_markdown(rows: &[(&str, &ScoreReport)]) -> String {
    let mut out = String::from("| Input Type | Sound | Music | Speech | Mixed | Overall |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for (name, report) in rows {
        out.push_str(&format!("| {name} |"));
        for cat in Category::ALL {
            let acc = report.per_category.get(&cat).and_then(|c| c.accuracy);
            out.push_str(&format!(" {} |", display_percent(acc)));
        }
        out.push_str(&format!(" {} |\n", report.overall_display()));
    }
    out
}
