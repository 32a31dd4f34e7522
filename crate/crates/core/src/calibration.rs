//! Binned expected calibration error and the bounds relating an estimated
//! ECE to the oracle one.

use crate::error::{Error, Result};
use crate::estimators::ConfidenceOutcome;
use crate::fmt::csv_num;
use serde::{Deserialize, Serialize};

/// L equal-width bins over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    pub l_bins: usize,
    /// L+1 edges, 0 = t0 < ... < tL = 1.
    pub edges: Vec<f64>,
}

impl BinningScheme {
    /// Equal-width bins; the default everywhere is L = 10.
    pub fn equal_width(l_bins: usize) -> Result<Self> {
        if l_bins == 0 {
            return Err(Error::InvalidBinning("need at least one bin".into()));
        }
        let edges = (0..=l_bins).map(|i| i as f64 / l_bins as f64).collect();
        Ok(Self { l_bins, edges })
    }

    /// Bin membership: c in ((l-1)/L, l/L], with c = 0 assigned to bin 0.
    /// Keeps c = 1.0 in the top bin.
    pub fn bin_index(&self, c: f64) -> usize {
        if c <= 0.0 {
            return 0;
        }
        let raw = (c * self.l_bins as f64).ceil() as usize;
        raw.saturating_sub(1).min(self.l_bins - 1)
    }
}

impl Default for BinningScheme {
    fn default() -> Self {
        Self::equal_width(10).expect("10 > 0")
    }
}

/// Per-bin aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub count: usize,
    /// Undefined (None) for empty bins.
    pub mean_confidence: Option<f64>,
    pub mean_accuracy: Option<f64>,
    /// (1/n) sum over the bin of (accuracy - confidence).
    pub signed_gap_mass: f64,
}

/// Scalar ECE plus the reliability-diagram view it was summed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EceReport {
    pub ece: f64,
    pub per_bin: Vec<BinStat>,
    pub n_outcomes: usize,
}

/// Binned ECE over (confidence, correctness) pairs.
pub fn binned_ece_pairs(pairs: &[(f64, bool)], scheme: &BinningScheme) -> Result<EceReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let n = pairs.len() as f64;
    let l = scheme.l_bins;
    let mut count = vec![0usize; l];
    let mut conf_sum = vec![0.0f64; l];
    let mut acc_sum = vec![0.0f64; l];
    let mut gap_sum = vec![0.0f64; l];
    for &(c, a) in pairs {
        let b = scheme.bin_index(c);
        let av = if a { 1.0 } else { 0.0 };
        count[b] += 1;
        conf_sum[b] += c;
        acc_sum[b] += av;
        gap_sum[b] += av - c;
    }
    let per_bin: Vec<BinStat> = (0..l)
        .map(|b| BinStat {
            count: count[b],
            mean_confidence: (count[b] > 0).then(|| conf_sum[b] / count[b] as f64),
            mean_accuracy: (count[b] > 0).then(|| acc_sum[b] / count[b] as f64),
            signed_gap_mass: gap_sum[b] / n,
        })
        .collect();
    let ece = per_bin.iter().map(|b| b.signed_gap_mass.abs()).sum();
    Ok(EceReport { ece, per_bin, n_outcomes: pairs.len() })
}

/// Binned ECE over confidence outcomes.
pub fn binned_ece(outcomes: &[ConfidenceOutcome], scheme: &BinningScheme) -> Result<EceReport> {
    let pairs: Vec<(f64, bool)> = outcomes.iter().map(|o| (o.confidence, o.correct)).collect();
    binned_ece_pairs(&pairs, scheme)
}

/// Same aggregates as `binned_ece`, named for the per-bin plotting view.
pub fn reliability_table(outcomes: &[ConfidenceOutcome], scheme: &BinningScheme) -> Result<EceReport> {
    binned_ece(outcomes, scheme)
}

/// CSV export of the per-bin view.
pub fn reliability_csv(report: &EceReport, scheme: &BinningScheme) -> String {
    let mut out = String::from(
        "bin_index,lower_edge,upper_edge,count,mean_confidence,mean_accuracy,signed_gap_mass\n",
    );
    for (i, b) in report.per_bin.iter().enumerate() {
        let mc = b.mean_confidence.map(csv_num).unwrap_or_default();
        let ma = b.mean_accuracy.map(csv_num).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i + 1,
            csv_num(scheme.edges[i]),
            csv_num(scheme.edges[i + 1]),
            b.count,
            mc,
            ma,
            csv_num(b.signed_gap_mass),
        ));
    }
    out
}

/// delta + eps + 2 (eps/eta + boundary mass): the generic bound on
/// |ECE(est) - ECE(oracle)|.
pub fn ece_difference_bound(delta_n: f64, eps_n: f64, eta: f64, boundary_mass: f64) -> Result<f64> {
    if eta <= 0.0 {
        return Err(Error::NonPositiveEta);
    }
    Ok(delta_n + eps_n + 2.0 * (eps_n / eta + boundary_mass))
}

/// delta + eps + 4 sqrt(2 M (L-1) eps): the density-M variant.
pub fn ece_difference_bound_density(delta_n: f64, eps_n: f64, density_bound_m: f64, l_bins: usize) -> f64 {
    delta_n + eps_n + 4.0 * (2.0 * density_bound_m * (l_bins as f64 - 1.0) * eps_n).sqrt()
}
