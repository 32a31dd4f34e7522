//! The two semantic confidence estimators (same-sample and held-out),
//! verbalized-confidence parsing, and margin profiles.

use crate::data_model::{count_summary, CountSummary, QuestionRecord};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Empirical semantic PMF over dense class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPmf {
    pub probs: Vec<f64>,
    /// Sample count the PMF was computed from.
    pub n: usize,
}

/// Confidence source a `ConfidenceOutcome` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Sem1,
    Sem2,
    Verbalized,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Sem1 => "sem1",
            Source::Sem2 => "sem2",
            Source::Verbalized => "verbalized",
        }
    }
}

/// (deployed class, confidence, correctness) for one question under one
/// confidence source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceOutcome {
    pub question_id: String,
    pub source: Source,
    pub deployed_class: usize,
    pub confidence: f64,
    pub correct: bool,
}

/// (K, Delta, p, m_std, lambda_std) summary of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginProfile {
    pub k_classes: usize,
    /// Top-two gap.
    pub delta: f64,
    /// Top-two mass.
    pub p_top2: f64,
    /// Standardized margin Delta / sqrt(p / n_ref).
    pub m_std: f64,
    /// m_std / 2.
    pub lambda_std: f64,
    pub n_ref: usize,
}

/// PMF from counts; classes never counted get probability zero.
pub fn empirical_pmf(summary: &CountSummary, k_classes: usize) -> EmpiricalPmf {
    debug_assert!(summary.counts.len() <= k_classes);
    let n = summary.n_total;
    let mut probs = vec![0.0; k_classes];
    for (k, &c) in summary.counts.iter().enumerate() {
        probs[k] = c as f64 / n as f64;
    }
    EmpiricalPmf { probs, n }
}

/// Argmax class; exact ties go to the smallest class id.
pub fn mode_select(pmf: &EmpiricalPmf) -> usize {
    mode_of(&pmf.probs)
}

fn mode_of(probs: &[f64]) -> usize {
    let mut best = 0usize;
    for (k, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = k;
        }
    }
    best
}

fn mode_of_counts(counts: &[u32]) -> usize {
    let mut best = 0usize;
    for (k, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Same-sample confidence: the maximal frequency on the (subset) pool,
/// deployed class the pool mode.
pub fn c1_confidence(record: &QuestionRecord, index_subset: Option<&[usize]>) -> Result<ConfidenceOutcome> {
    let summary = count_summary(record, index_subset)?;
    let mode = mode_of_counts(&summary.counts);
    Ok(ConfidenceOutcome {
        question_id: record.question_id.clone(),
        source: Source::Sem1,
        deployed_class: mode,
        confidence: summary.counts[mode] as f64 / summary.n_total as f64,
        correct: record.class_correct[mode],
    })
}

/// Held-out confidence: mode on the selection block N, frequency of that
/// class on the disjoint evaluation block E.
pub fn c2_single_split(
    record: &QuestionRecord,
    selection_idx: &[usize],
    eval_idx: &[usize],
) -> Result<ConfidenceOutcome> {
    if selection_idx.is_empty() || eval_idx.is_empty() {
        return Err(Error::InvalidBlocks);
    }
    let mut seen = vec![false; record.samples.len()];
    for &i in selection_idx {
        if i >= seen.len() {
            return Err(Error::IndexOutOfRange { index: i, len: seen.len() });
        }
        seen[i] = true;
    }
    if eval_idx.iter().any(|&i| i < seen.len() && seen[i]) {
        return Err(Error::InvalidBlocks);
    }
    let sel = count_summary(record, Some(selection_idx))?;
    let mode = mode_of_counts(&sel.counts);
    let eval = count_summary(record, Some(eval_idx))?;
    Ok(ConfidenceOutcome {
        question_id: record.question_id.clone(),
        source: Source::Sem2,
        deployed_class: mode,
        confidence: eval.counts[mode] as f64 / eval.n_total as f64,
        correct: record.class_correct[mode],
    })
}

/// Held-out confidence averaged over independent uniform (N, E) draws from
/// the pool. The deployed class and correctness come from the full-pool
/// mode, so the deployment policy does not depend on the splits.
pub fn c2_averaged<R: Rng>(
    record: &QuestionRecord,
    n: usize,
    m: usize,
    r_splits: usize,
    rng: &mut R,
) -> Result<ConfidenceOutcome> {
    let pool = record.pool_size();
    if n == 0 || m == 0 || r_splits == 0 {
        return Err(Error::InvalidBlocks);
    }
    if n + m > pool {
        return Err(Error::PoolTooSmall { needed: n + m, available: pool });
    }
    let mut indices: Vec<usize> = (0..pool).collect();
    let mut acc = 0.0;
    for _ in 0..r_splits {
        indices.shuffle(rng);
        let sel = count_summary(record, Some(&indices[..n]))?;
        let mode = mode_of_counts(&sel.counts);
        let eval = count_summary(record, Some(&indices[n..n + m]))?;
        acc += eval.counts[mode] as f64 / eval.n_total as f64;
    }
    let full = count_summary(record, None)?;
    let full_mode = mode_of_counts(&full.counts);
    Ok(ConfidenceOutcome {
        question_id: record.question_id.clone(),
        source: Source::Sem2,
        deployed_class: full_mode,
        confidence: acc / r_splits as f64,
        correct: record.class_correct[full_mode],
    })
}

/// Mean verbalized confidence over all samples; unparseable or missing
/// text is imputed at 1.0.
pub fn verbalized_confidence(record: &QuestionRecord) -> Result<ConfidenceOutcome> {
    let mut acc = 0.0;
    for s in &record.samples {
        acc += s
            .verbalized_raw
            .as_deref()
            .and_then(parse_verbalized)
            .unwrap_or(1.0);
    }
    let full = count_summary(record, None)?;
    let full_mode = mode_of_counts(&full.counts);
    Ok(ConfidenceOutcome {
        question_id: record.question_id.clone(),
        source: Source::Verbalized,
        deployed_class: full_mode,
        confidence: acc / record.samples.len() as f64,
        correct: record.class_correct[full_mode],
    })
}

/// Pulls a confidence out of generation text: the last "confidence" token
/// followed by a number, optional percent sign. Numbers above 1 are read
/// as percentages; values outside [0, 100] fail the parse.
pub fn parse_verbalized(text: &str) -> Option<f64> {
    // Models often restate confidence at the end, hence the last match.
    static PATTERN: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let re = PATTERN.get_or_init(|| {
        regex::Regex::new(r"(?i)confidence[^0-9]{0,12}([0-9]+(?:\.[0-9]+)?)\s*%?").unwrap()
    });
    let last = re.captures_iter(text).last()?;
    let raw: f64 = last.get(1)?.as_str().parse().ok()?;
    if raw > 100.0 {
        return None;
    }
    Some(if raw > 1.0 { raw / 100.0 } else { raw })
}

/// Margin profile from a probability vector (empirical or true).
///
/// For K = 1 the degenerate convention Delta = p = probs[0] applies, which
/// keeps m_std finite and classifies the question as large-margin.
pub fn margin_profile(probs: &[f64], n_ref: usize) -> MarginProfile {
    assert!(!probs.is_empty(), "margin profile needs at least one class");
    let (delta, p_top2) = if probs.len() == 1 {
        (probs[0], probs[0])
    } else {
        let mut top1 = f64::MIN;
        let mut top2 = f64::MIN;
        for &p in probs {
            if p > top1 {
                top2 = top1;
                top1 = p;
            } else if p > top2 {
                top2 = p;
            }
        }
        (top1 - top2, top1 + top2)
    };
    let m_std = if p_top2 > 0.0 {
        delta / (p_top2 / n_ref as f64).sqrt()
    } else {
        0.0
    };
    MarginProfile {
        k_classes: probs.len(),
        delta,
        p_top2,
        m_std,
        lambda_std: 0.5 * m_std,
        n_ref,
    }
}
