//! Experiment-grade analyses over ingested records: per-pair ECE tables,
//! budget sweeps, margin stratification, boundary alignment, and the
//! paired percentile bootstrap.

use crate::calibration::{binned_ece_pairs, BinningScheme, EceReport};
use crate::data_model::{count_summary, QuestionRecord};
use crate::error::{Error, Result};
use crate::estimators::{
    c1_confidence, c2_averaged, margin_profile, verbalized_confidence, empirical_pmf,
};
use crate::rng::keyed_stream;
use crate::theory;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the boundary-alignment prediction treats the top-two mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PConvention {
    /// p -> 1: prediction collapses to phi(m_boundary)/sqrt(n).
    PToOne,
    /// Per-question empirical p and lambda inside the window.
    EmpiricalP,
}

/// Shared evaluation knobs. Defaults follow the reference protocol:
/// n = m = 25 split of a 50-generation pool, R = 10 splits, L = 10 bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub r_splits: usize,
    pub l_bins: usize,
    pub p_convention: PConvention,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 25,
            m: 25,
            r_splits: 10,
            l_bins: 10,
            p_convention: PConvention::PToOne,
        }
    }
}

impl RunConfig {
    pub fn scheme(&self) -> Result<BinningScheme> {
        BinningScheme::equal_width(self.l_bins)
    }
}

/// Per-question evaluation under all three confidence sources, plus the
/// full-pool margin summary used for stratification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionEval {
    pub question_id: String,
    pub k_classes: usize,
    pub pool: usize,
    /// Full-pool empirical top-two gap (the observable margin axis).
    pub delta_q: f64,
    pub p_q: f64,
    pub c1: f64,
    pub c2: f64,
    pub ver: f64,
    /// Correctness of the full-pool mode; shared by all three sources.
    pub correct: bool,
}

/// Records large enough for the (n, m) split, evaluated one by one.
/// Smaller records are excluded and counted.
pub fn question_outcomes(records: &[QuestionRecord], cfg: &RunConfig) -> Result<(Vec<QuestionEval>, usize)> {
    let needed = cfg.n + cfg.m;
    let included: Vec<&QuestionRecord> = records.iter().filter(|r| r.pool_size() >= needed).collect();
    let excluded = records.len() - included.len();
    if included.is_empty() {
        return Err(Error::EmptyEvaluationSet(records.len()));
    }
    let evals: Result<Vec<QuestionEval>> = included
        .par_iter()
        .map(|r| evaluate_record(r, cfg))
        .collect();
    Ok((evals?, excluded))
}

fn evaluate_record(record: &QuestionRecord, cfg: &RunConfig) -> Result<QuestionEval> {
    let sem1 = c1_confidence(record, None)?;
    let mut rng = keyed_stream(cfg.seed, "c2-splits", &record.question_id);
    let sem2 = c2_averaged(record, cfg.n, cfg.m, cfg.r_splits, &mut rng)?;
    let ver = verbalized_confidence(record)?;
    let counts = count_summary(record, None)?;
    let pmf = empirical_pmf(&counts, record.k_classes());
    let profile = margin_profile(&pmf.probs, record.pool_size());
    Ok(QuestionEval {
        question_id: record.question_id.clone(),
        k_classes: record.k_classes(),
        pool: record.pool_size(),
        delta_q: profile.delta,
        p_q: profile.p_top2,
        c1: sem1.confidence,
        c2: sem2.confidence,
        ver: ver.confidence,
        correct: sem1.correct,
    })
}

/// Per-pair evaluation: one ECE report per confidence source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub sem1: EceReport,
    pub sem2: EceReport,
    pub verbalized: EceReport,
    pub accuracy: f64,
    pub n_questions: usize,
    pub n_excluded: usize,
}

pub fn evaluate_pair(records: &[QuestionRecord], cfg: &RunConfig) -> Result<PairEvaluation> {
    let (evals, n_excluded) = question_outcomes(records, cfg)?;
    pair_from_evals(&evals, n_excluded, &cfg.scheme()?)
}

fn pair_from_evals(evals: &[QuestionEval], n_excluded: usize, scheme: &BinningScheme) -> Result<PairEvaluation> {
    let s1: Vec<(f64, bool)> = evals.iter().map(|e| (e.c1, e.correct)).collect();
    let s2: Vec<(f64, bool)> = evals.iter().map(|e| (e.c2, e.correct)).collect();
    let sv: Vec<(f64, bool)> = evals.iter().map(|e| (e.ver, e.correct)).collect();
    let accuracy = evals.iter().filter(|e| e.correct).count() as f64 / evals.len() as f64;
    Ok(PairEvaluation {
        sem1: binned_ece_pairs(&s1, scheme)?,
        sem2: binned_ece_pairs(&s2, scheme)?,
        verbalized: binned_ece_pairs(&sv, scheme)?,
        accuracy,
        n_questions: evals.len(),
        n_excluded,
    })
}

/// Pooled ECEs at one per-question budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub sem1_ece: f64,
    pub sem2_ece: f64,
    pub n_questions: usize,
}

/// Restriction of a record to a sorted index subset, preserving class
/// indexing (classes absent from the subset keep zero counts).
fn subrecord(record: &QuestionRecord, indices: &[usize]) -> QuestionRecord {
    QuestionRecord {
        question_id: record.question_id.clone(),
        samples: indices.iter().map(|&i| record.samples[i].clone()).collect(),
        class_correct: record.class_correct.clone(),
        class_labels: record.class_labels.clone(),
        meta: record.meta.clone(),
    }
}

/// Subsamples each question to budget n (seeded, without replacement) and
/// evaluates the pair on the subsample: same-sample confidence on all n,
/// held-out confidence on floor(n/2) / remainder half-splits.
///
/// At n equal to the full pool the subsample is the identity and the
/// point reproduces `evaluate_pair` with n = m = pool/2 exactly.
pub fn n_sweep(
    records: &[QuestionRecord],
    n_grid: &[usize],
    cfg: &RunConfig,
) -> Result<Vec<SweepPoint>> {
    let min_pool = records.iter().map(|r| r.pool_size()).min().unwrap_or(0);
    if let Some(&bad) = n_grid.iter().find(|&&n| n > min_pool) {
        return Err(Error::GridExceedsPool { n: bad, pool: min_pool });
    }
    if n_grid.iter().any(|&n| n < 2) {
        return Err(Error::InsufficientData("sweep budgets must be >= 2".into()));
    }
    let scheme = cfg.scheme()?;
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let evals: Result<Vec<QuestionEval>> = records
            .par_iter()
            .map(|record| {
                let sub = if n == record.pool_size() {
                    subrecord(record, &(0..record.pool_size()).collect::<Vec<_>>())
                } else {
                    let mut idx: Vec<usize> = (0..record.pool_size()).collect();
                    let mut rng =
                        keyed_stream(cfg.seed, &format!("subsample-{n}"), &record.question_id);
                    idx.shuffle(&mut rng);
                    let mut chosen = idx[..n].to_vec();
                    chosen.sort_unstable();
                    subrecord(record, &chosen)
                };
                let sub_cfg = RunConfig {
                    n: n / 2,
                    m: n - n / 2,
                    ..cfg.clone()
                };
                evaluate_record(&sub, &sub_cfg)
            })
            .collect();
        let evals = evals?;
        let pair = pair_from_evals(&evals, 0, &scheme)?;
        points.push(SweepPoint {
            n,
            sem1_ece: pair.sem1.ece,
            sem2_ece: pair.sem2.ece,
            n_questions: evals.len(),
        });
    }
    Ok(points)
}

/// One margin stratum; empty strata keep `None` ECEs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stratum {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub count: usize,
    pub sem1_ece: Option<f64>,
    pub sem2_ece: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratifyResult {
    pub strata: Vec<Stratum>,
    /// 2 lambda* / sqrt(n): the JDR boundary on the margin axis.
    pub jdr_boundary_delta: f64,
    /// sqrt(log(K_bar) / n) with K_bar the mean class count.
    pub low_large_boundary_delta: f64,
    pub k_bar: f64,
    pub n_boundary: usize,
}

/// Stratifies pooled ECEs by the full-pool empirical margin.
pub fn stratify_by_margin(
    records: &[QuestionRecord],
    bin_edges: &[f64],
    n_boundary: usize,
    cfg: &RunConfig,
) -> Result<StratifyResult> {
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidBinning("margin edges must be increasing".into()));
    }
    let scheme = cfg.scheme()?;
    let (evals, _) = question_outcomes(records, cfg)?;
    let k_bar = evals.iter().map(|e| e.k_classes as f64).sum::<f64>() / evals.len() as f64;
    let mut strata = Vec::with_capacity(bin_edges.len() - 1);
    for w in bin_edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let last = hi >= bin_edges[bin_edges.len() - 1];
        let members: Vec<&QuestionEval> = evals
            .iter()
            .filter(|e| e.delta_q >= lo && (e.delta_q < hi || (last && e.delta_q <= hi)))
            .collect();
        if members.is_empty() {
            strata.push(Stratum {
                delta_lo: lo,
                delta_hi: hi,
                count: 0,
                sem1_ece: None,
                sem2_ece: None,
            });
            continue;
        }
        let s1: Vec<(f64, bool)> = members.iter().map(|e| (e.c1, e.correct)).collect();
        let s2: Vec<(f64, bool)> = members.iter().map(|e| (e.c2, e.correct)).collect();
        strata.push(Stratum {
            delta_lo: lo,
            delta_hi: hi,
            count: members.len(),
            sem1_ece: Some(binned_ece_pairs(&s1, &scheme)?.ece),
            sem2_ece: Some(binned_ece_pairs(&s2, &scheme)?.ece),
        });
    }
    let nb = n_boundary as f64;
    Ok(StratifyResult {
        strata,
        jdr_boundary_delta: 2.0 * theory::lambda_star_default() / nb.sqrt(),
        low_large_boundary_delta: (k_bar.ln() / nb).sqrt(),
        k_bar,
        n_boundary,
    })
}

/// Regime boundary selector for the alignment check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Jdr,
    LowLarge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignResult {
    pub boundary: Boundary,
    pub n_boundary: usize,
    pub delta_boundary: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub n_questions: usize,
    pub gap_emp: f64,
    pub gap_theory: f64,
    pub ratio: f64,
    pub k_bar: f64,
}

/// Empirical Sem1-Sem2 ECE gap inside a +-window around a regime
/// boundary, against the leading-order prediction.
pub fn boundary_alignment(
    records: &[QuestionRecord],
    boundary: Boundary,
    window_frac: f64,
    n_boundary: usize,
    cfg: &RunConfig,
) -> Result<AlignResult> {
    if !(window_frac > 0.0 && window_frac <= 0.5) {
        return Err(Error::InvalidSpec("window_frac must lie in (0, 0.5]".into()));
    }
    let scheme = cfg.scheme()?;
    let (evals, _) = question_outcomes(records, cfg)?;
    let k_bar = evals.iter().map(|e| e.k_classes as f64).sum::<f64>() / evals.len() as f64;
    let nb = n_boundary as f64;
    let m_boundary = match boundary {
        Boundary::Jdr => 2.0 * theory::lambda_star_default(),
        Boundary::LowLarge => k_bar.ln().sqrt(),
    };
    let delta_boundary = m_boundary / nb.sqrt();
    let (window_lo, window_hi) = (
        delta_boundary * (1.0 - window_frac),
        delta_boundary * (1.0 + window_frac),
    );
    let members: Vec<&QuestionEval> = evals
        .iter()
        .filter(|e| e.delta_q >= window_lo && e.delta_q <= window_hi)
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyWindow { lo: window_lo, hi: window_hi });
    }
    let s1: Vec<(f64, bool)> = members.iter().map(|e| (e.c1, e.correct)).collect();
    let s2: Vec<(f64, bool)> = members.iter().map(|e| (e.c2, e.correct)).collect();
    let gap_emp = binned_ece_pairs(&s1, &scheme)?.ece - binned_ece_pairs(&s2, &scheme)?.ece;
    let gap_theory = match cfg.p_convention {
        PConvention::PToOne => theory::std_normal_pdf(m_boundary) / nb.sqrt(),
        PConvention::EmpiricalP => {
            let mut acc = 0.0;
            for e in &members {
                let lambda = 0.5 * e.delta_q / (e.p_q / nb).sqrt();
                acc += e.p_q.sqrt() * theory::gap_g_a(lambda).expect("lambda >= 0");
            }
            acc / members.len() as f64 / nb.sqrt()
        }
    };
    Ok(AlignResult {
        boundary,
        n_boundary,
        delta_boundary,
        window_lo,
        window_hi,
        n_questions: members.len(),
        gap_emp,
        gap_theory,
        ratio: gap_emp / gap_theory,
        k_bar,
    })
}

/// The three paired-bootstrap statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    /// Mean per-question confidence reduction c1 - c2.
    MeanConfidenceReduction,
    /// Population ECE gap Sem1 - Sem2.
    EceGap,
    /// Same gap restricted to the low-margin sub-population
    /// {Delta_q < 1/sqrt(n)}.
    EceGapLowMargin,
}

impl BootstrapStatistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MeanConfidenceReduction => "mean_confidence_reduction",
            Self::EceGap => "ece_gap",
            Self::EceGapLowMargin => "ece_gap_low_margin",
        }
    }
}

/// Fewer low-margin questions than this yields a not-applicable cell.
pub const LOW_MARGIN_FLOOR: usize = 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub statistic: BootstrapStatistic,
    /// Full-sample statistic; `None` when not applicable.
    pub point: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub b_reps: usize,
    pub n_questions: usize,
    pub applicable: bool,
    /// Set when the point estimate escapes the percentile interval.
    pub point_outside_ci: bool,
}

/// Paired percentile bootstrap over questions: question ids are resampled
/// with replacement, keeping each question's (c1, c2, correctness) tuple
/// intact.
pub fn paired_bootstrap(
    records: &[QuestionRecord],
    statistic: BootstrapStatistic,
    b_reps: usize,
    alpha: f64,
    cfg: &RunConfig,
) -> Result<BootstrapSummary> {
    if b_reps < 100 {
        return Err(Error::InsufficientData(format!(
            "bootstrap needs at least 100 replicates, got {b_reps}"
        )));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidSpec("alpha must lie in (0, 1)".into()));
    }
    let scheme = cfg.scheme()?;
    let (all_evals, _) = question_outcomes(records, cfg)?;
    let evals: Vec<QuestionEval> = match statistic {
        BootstrapStatistic::EceGapLowMargin => {
            let thr = 1.0 / (cfg.n as f64 + cfg.m as f64).sqrt();
            all_evals.into_iter().filter(|e| e.delta_q < thr).collect()
        }
        _ => all_evals,
    };
    if statistic == BootstrapStatistic::EceGapLowMargin && evals.len() < LOW_MARGIN_FLOOR {
        return Ok(BootstrapSummary {
            statistic,
            point: None,
            ci_low: None,
            ci_high: None,
            b_reps,
            n_questions: evals.len(),
            applicable: false,
            point_outside_ci: false,
        });
    }

    let stat = |chosen: &[usize]| -> Result<f64> {
        match statistic {
            BootstrapStatistic::MeanConfidenceReduction => {
                let s: f64 = chosen.iter().map(|&i| evals[i].c1 - evals[i].c2).sum();
                Ok(s / chosen.len() as f64)
            }
            _ => {
                let s1: Vec<(f64, bool)> =
                    chosen.iter().map(|&i| (evals[i].c1, evals[i].correct)).collect();
                let s2: Vec<(f64, bool)> =
                    chosen.iter().map(|&i| (evals[i].c2, evals[i].correct)).collect();
                Ok(binned_ece_pairs(&s1, &scheme)?.ece - binned_ece_pairs(&s2, &scheme)?.ece)
            }
        }
    };

    let identity: Vec<usize> = (0..evals.len()).collect();
    let point = stat(&identity)?;
    let mut resampled = Vec::with_capacity(b_reps);
    for b in 0..b_reps {
        let mut rng = keyed_stream(cfg.seed, "paired-bootstrap", &format!("{}:{b}", statistic.as_str()));
        let chosen: Vec<usize> = (0..evals.len())
            .map(|_| rand::Rng::gen_range(&mut rng, 0..evals.len()))
            .collect();
        resampled.push(stat(&chosen)?);
    }
    resampled.sort_by(|a, b| a.partial_cmp(b).expect("no NaN statistics"));
    let ci_low = percentile(&resampled, alpha / 2.0);
    let ci_high = percentile(&resampled, 1.0 - alpha / 2.0);
    Ok(BootstrapSummary {
        statistic,
        point: Some(point),
        ci_low: Some(ci_low),
        ci_high: Some(ci_high),
        b_reps,
        n_questions: evals.len(),
        applicable: true,
        point_outside_ci: point < ci_low || point > ci_high,
    })
}

/// Linear-interpolation empirical percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Ordinary least squares of log(gap) on log(n).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
    pub n_dropped: usize,
}

pub fn rate_fit(points: &[(usize, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, gap)| *gap > 0.0)
        .map(|&(n, gap)| ((n as f64).ln(), gap.ln()))
        .collect();
    let n_dropped = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs >= 3 positive gaps, has {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        n_used: usable.len(),
        n_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{export_records, ingest_from_reader};
    use std::io::BufReader;

    fn unanimous_records(q: usize, pool: usize, correct: bool) -> Vec<QuestionRecord> {
        (0..q)
            .map(|i| QuestionRecord {
                question_id: format!("q{i}"),
                samples: (0..pool)
                    .map(|_| crate::data_model::SemanticSample {
                        class_id: 0,
                        graded_correct: None,
                        verbalized_raw: None,
                    })
                    .collect(),
                class_correct: vec![correct],
                class_labels: vec!["a".into()],
                meta: Default::default(),
            })
            .collect()
    }

    #[test]
    fn unanimous_correct_records_have_zero_ece() {
        let records = unanimous_records(5, 50, true);
        let pair = evaluate_pair(&records, &RunConfig::default()).unwrap();
        assert_eq!(pair.sem1.ece, 0.0);
        assert_eq!(pair.sem2.ece, 0.0);
        assert_eq!(pair.accuracy, 1.0);
        assert_eq!(pair.n_questions, 5);
    }

    #[test]
    fn unanimous_wrong_records_have_ece_one() {
        let records = unanimous_records(4, 50, false);
        let pair = evaluate_pair(&records, &RunConfig::default()).unwrap();
        assert_eq!(pair.sem1.ece, 1.0);
        assert_eq!(pair.sem2.ece, 1.0);
        assert_eq!(pair.accuracy, 0.0);
    }

    #[test]
    fn short_records_are_excluded() {
        let mut records = unanimous_records(3, 50, true);
        records.extend(unanimous_records(2, 10, true).into_iter().map(|mut r| {
            r.question_id = format!("short-{}", r.question_id);
            r
        }));
        let pair = evaluate_pair(&records, &RunConfig::default()).unwrap();
        assert_eq!(pair.n_questions, 3);
        assert_eq!(pair.n_excluded, 2);
        let all_short = unanimous_records(2, 10, true);
        assert!(matches!(
            evaluate_pair(&all_short, &RunConfig::default()),
            Err(Error::EmptyEvaluationSet(2))
        ));
    }

    #[test]
    fn sweep_flat_for_unanimous_records() {
        let records = unanimous_records(4, 50, true);
        let pts = n_sweep(&records, &[10, 20, 50], &RunConfig::default()).unwrap();
        assert_eq!(pts.len(), 3);
        for p in &pts {
            assert_eq!(p.sem1_ece, 0.0);
            assert_eq!(p.sem2_ece, 0.0);
            assert_eq!(p.n_questions, 4);
        }
        assert!(matches!(
            n_sweep(&records, &[60], &RunConfig::default()),
            Err(Error::GridExceedsPool { n: 60, pool: 50 })
        ));
    }

    #[test]
    fn sweep_at_full_pool_matches_evaluate_pair() {
        // Mixed-class records so the splits actually matter.
        let jsonl: String = (0..6)
            .map(|i| {
                let k0 = 30 + (i % 3);
                let samples: Vec<String> = (0..50)
                    .map(|j| {
                        let class = if j < k0 { "A" } else { "B" };
                        format!(r#"{{"class":"{class}"}}"#)
                    })
                    .collect();
                format!(
                    r#"{{"question_id":"q{i}","samples":[{}],"class_correct":{{"A":true,"B":false}}}}"#,
                    samples.join(",")
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let records = ingest_from_reader(BufReader::new(jsonl.as_bytes()), true)
            .unwrap()
            .records;
        let cfg = RunConfig::default();
        let pair = evaluate_pair(&records, &cfg).unwrap();
        let pts = n_sweep(&records, &[50], &cfg).unwrap();
        assert_eq!(pts[0].sem1_ece, pair.sem1.ece);
        assert_eq!(pts[0].sem2_ece, pair.sem2.ece);
        // And the export/ingest round trip preserves the evaluation.
        let text = export_records(&records).unwrap();
        let again = ingest_from_reader(BufReader::new(text.as_bytes()), true)
            .unwrap()
            .records;
        let pair2 = evaluate_pair(&again, &cfg).unwrap();
        assert_eq!(pair.sem1.ece, pair2.sem1.ece);
        assert_eq!(pair.sem2.ece, pair2.sem2.ece);
    }

    #[test]
    fn stratify_reaggregates_to_unstratified() {
        let jsonl: String = (0..20)
            .map(|i| {
                let k0 = 26 + i % 20;
                let samples: Vec<String> = (0..50)
                    .map(|j| format!(r#"{{"class":"{}"}}"#, if j < k0 { "A" } else { "B" }))
                    .collect();
                format!(
                    r#"{{"question_id":"q{i}","samples":[{}],"class_correct":{{"A":{},"B":false}}}}"#,
                    samples.join(","),
                    i % 3 != 0
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let records = ingest_from_reader(BufReader::new(jsonl.as_bytes()), true)
            .unwrap()
            .records;
        let cfg = RunConfig::default();
        let res = stratify_by_margin(&records, &[0.0, 0.2, 0.5, 1.0], 50, &cfg).unwrap();
        assert_eq!(res.strata.len(), 3);
        let total: usize = res.strata.iter().map(|s| s.count).sum();
        assert_eq!(total, 20);
        // Single full-range stratum reduces to evaluate_pair.
        let single = stratify_by_margin(&records, &[0.0, 1.0], 50, &cfg).unwrap();
        let pair = evaluate_pair(&records, &cfg).unwrap();
        assert_eq!(single.strata[0].sem1_ece, Some(pair.sem1.ece));
        assert_eq!(single.strata[0].sem2_ece, Some(pair.sem2.ece));
        // Boundary markers at n=50.
        assert!((res.jdr_boundary_delta - 0.0865503198733).abs() < 1e-9);
        assert!((res.low_large_boundary_delta - (2.0f64.ln() / 50.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn strata_masses_reaggregate_per_bin() {
        // Count-weighted per-bin gap masses over a full-cover stratification
        // reproduce the unstratified report bin by bin.
        let jsonl: String = (0..24)
            .map(|i| {
                let k0 = 26 + (i * 7) % 22;
                let samples: Vec<String> = (0..50)
                    .map(|j| format!(r#"{{"class":"{}"}}"#, if j < k0 { "A" } else { "B" }))
                    .collect();
                format!(
                    r#"{{"question_id":"q{i}","samples":[{}],"class_correct":{{"A":{},"B":false}}}}"#,
                    samples.join(","),
                    i % 4 != 0
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let records = ingest_from_reader(BufReader::new(jsonl.as_bytes()), true)
            .unwrap()
            .records;
        let cfg = RunConfig::default();
        let scheme = cfg.scheme().unwrap();
        let edges = [0.0, 0.15, 0.4, 1.0];
        let (evals, _) = question_outcomes(&records, &cfg).unwrap();
        let unstrat = pair_from_evals(&evals, 0, &scheme).unwrap();
        let mut merged = vec![0.0f64; scheme.l_bins];
        let total: f64 = evals.len() as f64;
        for w in edges.windows(2) {
            let last = w[1] >= edges[edges.len() - 1];
            let members: Vec<(f64, bool)> = evals
                .iter()
                .filter(|e| e.delta_q >= w[0] && (e.delta_q < w[1] || (last && e.delta_q <= w[1])))
                .map(|e| (e.c1, e.correct))
                .collect();
            if members.is_empty() {
                continue;
            }
            let rep = binned_ece_pairs(&members, &scheme).unwrap();
            for (b, stat) in rep.per_bin.iter().enumerate() {
                merged[b] += stat.signed_gap_mass * members.len() as f64 / total;
            }
        }
        for (b, stat) in unstrat.sem1.per_bin.iter().enumerate() {
            assert!((merged[b] - stat.signed_gap_mass).abs() < 1e-12, "bin {b}");
        }
    }

    #[test]
    fn empty_stratum_reported_with_none() {
        let records = unanimous_records(3, 50, true);
        let res =
            stratify_by_margin(&records, &[0.0, 0.5, 0.9, 1.0], 50, &RunConfig::default()).unwrap();
        assert_eq!(res.strata[0].count, 0);
        assert!(res.strata[0].sem1_ece.is_none());
        assert_eq!(res.strata[2].count, 3); // Delta = 1 in the last stratum
    }

    #[test]
    fn alignment_boundary_values() {
        // Unanimous records sit at Delta=1, far from any boundary: window empty.
        let records = unanimous_records(3, 50, true);
        let err = boundary_alignment(&records, Boundary::Jdr, 0.10, 50, &RunConfig::default());
        assert!(matches!(err, Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn bootstrap_degenerate_ci_collapses() {
        // All questions identical: every resample statistic equals the point.
        let records = unanimous_records(40, 50, true);
        let cfg = RunConfig::default();
        let s = paired_bootstrap(&records, BootstrapStatistic::MeanConfidenceReduction, 200, 0.05, &cfg)
            .unwrap();
        assert!(s.applicable);
        assert_eq!(s.point, Some(0.0));
        assert_eq!(s.ci_low, Some(0.0));
        assert_eq!(s.ci_high, Some(0.0));
        assert!(!s.point_outside_ci);
    }

    #[test]
    fn bootstrap_low_margin_floor() {
        let records = unanimous_records(40, 50, true); // Delta = 1: none low margin
        let cfg = RunConfig::default();
        let s = paired_bootstrap(&records, BootstrapStatistic::EceGapLowMargin, 500, 0.05, &cfg)
            .unwrap();
        assert!(!s.applicable);
        assert_eq!(s.point, None);
        assert!(matches!(
            paired_bootstrap(&records, BootstrapStatistic::EceGap, 99, 0.05, &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bootstrap_point_equals_unresampled_statistic() {
        let jsonl: String = (0..30)
            .map(|i| {
                let k0 = 26 + i % 15;
                let samples: Vec<String> = (0..50)
                    .map(|j| format!(r#"{{"class":"{}"}}"#, if j < k0 { "A" } else { "B" }))
                    .collect();
                format!(
                    r#"{{"question_id":"q{i}","samples":[{}],"class_correct":{{"A":{},"B":false}}}}"#,
                    samples.join(","),
                    i % 2 == 0
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let records = ingest_from_reader(BufReader::new(jsonl.as_bytes()), true)
            .unwrap()
            .records;
        let cfg = RunConfig::default();
        let pair = evaluate_pair(&records, &cfg).unwrap();
        let s = paired_bootstrap(&records, BootstrapStatistic::EceGap, 200, 0.05, &cfg).unwrap();
        assert!((s.point.unwrap() - (pair.sem1.ece - pair.sem2.ece)).abs() < 1e-15);
        // Determinism.
        let s2 = paired_bootstrap(&records, BootstrapStatistic::EceGap, 200, 0.05, &cfg).unwrap();
        assert_eq!(s.ci_low, s2.ci_low);
        assert_eq!(s.ci_high, s2.ci_high);
    }

    #[test]
    fn rate_fit_exact_power_laws() {
        let points: Vec<(usize, f64)> = [25, 50, 100, 200, 400]
            .iter()
            .map(|&n| (n, 0.7 / (n as f64).sqrt()))
            .collect();
        let fit = rate_fit(&points).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let points: Vec<(usize, f64)> = [25, 50, 100, 200]
            .iter()
            .map(|&n| (n, 3.0 / n as f64))
            .collect();
        let fit = rate_fit(&points).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);

        let with_bad = vec![(25usize, 0.1), (50, 0.05), (100, -0.01), (200, 0.02)];
        let fit = rate_fit(&with_bad).unwrap();
        assert_eq!(fit.n_dropped, 1);
        assert_eq!(fit.n_used, 3);
        assert!(rate_fit(&[(10, 0.1), (20, 0.05)]).is_err());
    }
}
