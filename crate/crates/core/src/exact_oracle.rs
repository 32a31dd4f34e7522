//! Exact enumeration over all multinomial outcomes for small (n, K):
//! ground-truth expectations for both estimators, the wrong-mode
//! probability, and exact population ECEs. This is the independent
//! brute-force reference the Monte Carlo engine is checked against.

use crate::calibration::BinningScheme;
use crate::error::{Error, Result};
use crate::estimators::margin_profile;
use crate::estimators::MarginProfile;
use serde::{Deserialize, Serialize};

/// Default cap on enumerated outcomes, C(n+K-1, K-1).
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

/// A question with known answer distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueQuestion {
    /// Categorical distribution over K classes; sums to 1.
    pub probs: Vec<f64>,
    /// Correctness per class.
    pub class_correct: Vec<bool>,
}

impl TrueQuestion {
    pub fn new(probs: Vec<f64>, class_correct: Vec<bool>) -> Result<Self> {
        if probs.is_empty() || probs.len() != class_correct.len() {
            return Err(Error::InvalidQuestion(
                "probs and class_correct must be non-empty and equal length".into(),
            ));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidQuestion("probabilities outside [0,1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidQuestion(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs, class_correct })
    }

    /// Population mode, ties to the smallest class id.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }

    /// Oracle confidence max_k pi_k.
    pub fn oracle_confidence(&self) -> f64 {
        self.probs[self.mode()]
    }

    pub fn oracle_correct(&self) -> bool {
        self.class_correct[self.mode()]
    }

    pub fn margin(&self, n_ref: usize) -> MarginProfile {
        margin_profile(&self.probs, n_ref)
    }
}

/// Exact expectations for one question.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct OracleResult {
    pub e_c1: f64,
    pub e_c2: f64,
    /// Pr(selection-block mode != population mode).
    pub pr_wrong_mode: f64,
    pub e_abs_c1_err: f64,
    pub e_abs_c2_err: f64,
    /// E[c1] - E[c2].
    pub exact_gap: f64,
}

/// ln k! for k = 0..=n.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

/// Number of count vectors: C(n+K-1, K-1).
pub fn enumeration_outcome_count(n: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..(k - 1) {
        c = c.saturating_mul((n + k - 1 - i) as u128) / (i as u128 + 1);
    }
    c
}

fn check_cap(n: usize, k: usize, cap: u64) -> Result<()> {
    let outcomes = enumeration_outcome_count(n, k);
    if outcomes > cap as u128 {
        return Err(Error::EnumerationCap { outcomes, cap });
    }
    Ok(())
}

/// Iterates all count vectors of length K summing to n together with their
/// multinomial probability under `probs`.
struct Outcomes<'a> {
    counts: Vec<u32>,
    probs: &'a [f64],
    log_probs: Vec<f64>,
    lf: &'a [f64],
    n: usize,
    started: bool,
    done: bool,
}

impl<'a> Outcomes<'a> {
    fn new(n: usize, probs: &'a [f64], lf: &'a [f64]) -> Self {
        let mut counts = vec![0u32; probs.len()];
        counts[0] = n as u32;
        Self {
            counts,
            probs,
            log_probs: probs.iter().map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect(),
            lf,
            n,
            started: false,
            done: false,
        }
    }

    fn probability(&self) -> f64 {
        let mut logp = self.lf[self.n];
        for (k, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if self.probs[k] == 0.0 {
                return 0.0;
            }
            logp += c as f64 * self.log_probs[k] - self.lf[c as usize];
        }
        logp.exp()
    }

    /// Advances to the next composition; returns false when exhausted.
    fn advance(&mut self) -> bool {
        if !self.started {
            self.started = true;
            return true;
        }
        let k = self.counts.len();
        if k == 1 || self.counts[k - 1] as usize == self.n {
            self.done = true;
            return false;
        }
        let i = self.counts[..k - 1].iter().position(|&c| c > 0).expect("sum invariant");
        let t = self.counts[i];
        self.counts[i] = 0;
        self.counts[0] = t - 1;
        self.counts[i + 1] += 1;
        !self.done
    }
}

fn mode_of_counts(counts: &[u32]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Exact E[c1], E|c1 - c*| and Pr(mode missed) by full enumeration of the
/// selection block.
pub fn enumerate_c1(q: &TrueQuestion, n: usize, cap: u64) -> Result<OracleResult> {
    check_cap(n, q.probs.len(), cap)?;
    let lf = log_factorials(n);
    let c_star = q.oracle_confidence();
    let z_star = q.mode();
    let mut e_c1 = 0.0;
    let mut e_abs = 0.0;
    let mut pr_wrong = 0.0;
    let mut mass = 0.0;
    let mut it = Outcomes::new(n, &q.probs, &lf);
    while it.advance() {
        let p = it.probability();
        if p == 0.0 {
            continue;
        }
        mass += p;
        let mode = mode_of_counts(&it.counts);
        let c1 = it.counts[mode] as f64 / n as f64;
        e_c1 += p * c1;
        e_abs += p * (c1 - c_star).abs();
        if mode != z_star {
            pr_wrong += p;
        }
    }
    debug_assert!((mass - 1.0).abs() < 1e-10, "probability mass {mass}");
    Ok(OracleResult {
        e_c1,
        pr_wrong_mode: pr_wrong,
        e_abs_c1_err: e_abs,
        ..Default::default()
    })
}

/// Exact E[c2] and E|c2 - c*|.
///
/// The mean collapses analytically: conditionally on the selected class z,
/// the held-out frequency is unbiased for pi_z, so E[c2] = sum_z Pr(mode =
/// z) pi_z. The absolute error additionally enumerates the evaluation
/// block's binomial count for the selected class only.
pub fn enumerate_c2(q: &TrueQuestion, n: usize, m: usize, cap: u64) -> Result<OracleResult> {
    check_cap(n, q.probs.len(), cap)?;
    let lf = log_factorials(n.max(m));
    let c_star = q.oracle_confidence();
    let mut pr_mode = vec![0.0f64; q.probs.len()];
    let mut it = Outcomes::new(n, &q.probs, &lf);
    while it.advance() {
        let p = it.probability();
        if p == 0.0 {
            continue;
        }
        pr_mode[mode_of_counts(&it.counts)] += p;
    }
    let mut e_c2 = 0.0;
    let mut e_abs = 0.0;
    for (z, &pr) in pr_mode.iter().enumerate() {
        if pr == 0.0 {
            continue;
        }
        let pi_z = q.probs[z];
        e_c2 += pr * pi_z;
        for (j, bp) in binomial_pmf(m, pi_z, &lf).into_iter().enumerate() {
            e_abs += pr * bp * (j as f64 / m as f64 - c_star).abs();
        }
    }
    Ok(OracleResult {
        e_c2,
        e_abs_c2_err: e_abs,
        ..Default::default()
    })
}

/// Both estimators on one question; `exact_gap` = E[c1] - E[c2].
pub fn oracle_result(q: &TrueQuestion, n: usize, m: usize, cap: u64) -> Result<OracleResult> {
    let a = enumerate_c1(q, n, cap)?;
    let b = enumerate_c2(q, n, m, cap)?;
    Ok(OracleResult {
        e_c1: a.e_c1,
        e_c2: b.e_c2,
        pr_wrong_mode: a.pr_wrong_mode,
        e_abs_c1_err: a.e_abs_c1_err,
        e_abs_c2_err: b.e_abs_c2_err,
        exact_gap: a.e_c1 - b.e_c2,
    })
}

fn binomial_pmf(m: usize, p: f64, lf: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; m + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[m] = 1.0;
        return pmf;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    for (j, slot) in pmf.iter_mut().enumerate() {
        *slot = (lf[m] - lf[j] - lf[m - j] + j as f64 * lp + (m - j) as f64 * lq).exp();
    }
    pmf
}

/// Exact population ECEs over the full joint distribution of (estimate,
/// deployed correctness), plus the oracle pair's ECE.
pub fn oracle_population_ece(
    questions: &[TrueQuestion],
    n: usize,
    m: usize,
    scheme: &BinningScheme,
    cap: u64,
) -> Result<(f64, f64, f64)> {
    if questions.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let l = scheme.l_bins;
    let mut mass1 = vec![0.0f64; l];
    let mut mass2 = vec![0.0f64; l];
    let mut mass_star = vec![0.0f64; l];
    let w = 1.0 / questions.len() as f64;
    let lf = log_factorials(n.max(m));
    for q in questions {
        check_cap(n, q.probs.len(), cap)?;
        let z_star = q.mode();
        let c_star = q.probs[z_star];
        let a_star = if q.class_correct[z_star] { 1.0 } else { 0.0 };
        mass_star[scheme.bin_index(c_star)] += w * (a_star - c_star);

        let mut pr_mode = vec![0.0f64; q.probs.len()];
        let mut it = Outcomes::new(n, &q.probs, &lf);
        while it.advance() {
            let p = it.probability();
            if p == 0.0 {
                continue;
            }
            let mode = mode_of_counts(&it.counts);
            pr_mode[mode] += p;
            let c1 = it.counts[mode] as f64 / n as f64;
            let a = if q.class_correct[mode] { 1.0 } else { 0.0 };
            mass1[scheme.bin_index(c1)] += w * p * (a - c1);
        }
        for (z, &pr) in pr_mode.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            let a = if q.class_correct[z] { 1.0 } else { 0.0 };
            for (j, bp) in binomial_pmf(m, q.probs[z], &lf).into_iter().enumerate() {
                let c = j as f64 / m as f64;
                mass2[scheme.bin_index(c)] += w * pr * bp * (a - c);
            }
        }
    }
    let fold = |mass: &[f64]| mass.iter().map(|v| v.abs()).sum::<f64>();
    Ok((fold(&mass1), fold(&mass2), fold(&mass_star)))
}
