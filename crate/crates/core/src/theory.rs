//! Closed-form theoretical quantities for the two semantic confidence
//! estimators: the Jensen and selection bias constants J and S, the gap
//! constants g_A and g_B, the root lambda* of g_B, regime classification,
//! and the finite-sample bias bounds.
//!
//! All normal-distribution machinery is self-contained: Phi is evaluated
//! through a complementary error function built from the power series
//! (small arguments) and a Lentz continued fraction (tails), giving
//! absolute accuracy well below 1e-13 over the whole real line.

use crate::error::{Error, Result};
use crate::estimators::MarginProfile;
use serde::{Deserialize, Serialize};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF via the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Complementary error function.
///
/// |x| < 2 uses the alternating power series of erf (exact coefficients,
/// no tabulated constants); larger arguments use the classical continued
/// fraction sqrt(pi) e^{x^2} erfc(x) = 1/(x+ (1/2)/(x+ (2/2)/(x+ ...)))
/// evaluated with modified Lentz iteration.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax < 2.0 {
        1.0 - erf_series(x)
    } else if x > 0.0 {
        erfc_cf(x)
    } else {
        2.0 - erfc_cf(-x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum_k (-1)^k x^{2k+1} / (k! (2k+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for k in 1..200 {
        let kf = k as f64;
        term *= -x2 / kf;
        let add = term / (2.0 * kf + 1.0);
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    2.0 * INV_SQRT_PI * sum
}

fn erfc_cf(x: f64) -> f64 {
    // Modified Lentz on F = 1/(x+ a1/(x+ a2/(x+ ...))), a_k = k/2.
    let tiny = 1e-300;
    let mut f = x.max(tiny);
    let mut c = f;
    let mut d = 0.0_f64;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    INV_SQRT_PI * (-x * x).exp() / f
}

/// Jensen bias constant J(lambda) = phi(2 lambda) - 2 lambda Phi(-2 lambda).
pub fn jensen_j(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let u = 2.0 * lambda;
    Ok(std_normal_pdf(u) - u * std_normal_cdf(-u))
}

/// Selection bias constant S(lambda) = 2 lambda Phi(-2 lambda).
pub fn selection_s(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let u = 2.0 * lambda;
    Ok(u * std_normal_cdf(-u))
}

/// Direct-gap constant g_A(lambda) = J + S = phi(2 lambda).
pub fn gap_g_a(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(std_normal_pdf(2.0 * lambda))
}

/// Oracle-distance constant g_B(lambda) = J - S = phi(2 lambda) - 4 lambda Phi(-2 lambda).
pub fn gap_g_b(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let u = 2.0 * lambda;
    Ok(std_normal_pdf(u) - 2.0 * u * std_normal_cdf(-u))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda < 0.0 || lambda.is_nan() {
        Err(Error::NegativeLambda(lambda))
    } else {
        Ok(())
    }
}

/// Unique positive root of g_B, located by bisection on [0, 2].
///
/// g_B is strictly decreasing, so bisection cannot fail; the returned
/// point has bracket width at most `tolerance`.
pub fn lambda_star(tolerance: f64) -> Result<f64> {
    if !(tolerance > 0.0 && tolerance <= 1e-3) {
        return Err(Error::InvalidTolerance(tolerance));
    }
    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    let f_lo = gap_g_b(lo)?;
    let f_hi = gap_g_b(hi)?;
    if f_lo <= 0.0 || f_hi >= 0.0 {
        return Err(Error::BracketFailure(lo, hi));
    }
    for _ in 0..200 {
        if hi - lo <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gap_g_b(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// lambda* bisected to machine resolution; the root find costs ~50
/// pdf/cdf evaluations, cheap enough to run on demand.
pub fn lambda_star_default() -> f64 {
    let (mut lo, mut hi) = (0.25_f64, 0.4_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap_g_b(mid).expect("mid >= 0") > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regime of a question on the (m_std, K) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Jensen-dominated: m_std < 2 lambda*.
    Jdr,
    /// Low margin but not Jensen-dominated: 2 lambda* <= m_std < sqrt(log K).
    LowNotJdr,
    /// m_std^2 >= log K.
    LargeMargin,
}

/// Regime tag plus the two boundary positions on the m_std axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegimeTag {
    pub tag: Regime,
    /// JDR boundary 2 lambda*, flat in K.
    pub jdr_boundary_m: f64,
    /// Low/large crossover sqrt(log K).
    pub low_large_boundary_m: f64,
}

/// Classifies a margin profile. Boundary ties go to the larger-margin side.
pub fn classify_regime(profile: &MarginProfile) -> RegimeTag {
    let jdr_boundary_m = 2.0 * lambda_star_default();
    let low_large_boundary_m = (profile.k_classes as f64).ln().sqrt();
    let m = profile.m_std;
    let tag = if profile.k_classes == 1 || m * m >= (profile.k_classes as f64).ln() {
        Regime::LargeMargin
    } else if m < jdr_boundary_m {
        Regime::Jdr
    } else {
        Regime::LowNotJdr
    };
    RegimeTag {
        tag,
        jdr_boundary_m,
        low_large_boundary_m,
    }
}

/// min( C sqrt(log(2K)/(2n)), (K-1) exp(-n Delta^2 / (2p)) ).
///
/// With Delta = 0 the Bernstein side degenerates to K-1 and the Hoeffding
/// term is returned alone.
pub fn pointwise_bias_bound(profile: &MarginProfile, n: usize, c_const: f64) -> f64 {
    let k = profile.k_classes as f64;
    let nf = n as f64;
    let hoeffding = c_const * ((2.0 * k).ln() / (2.0 * nf)).sqrt();
    if profile.delta == 0.0 {
        return hoeffding;
    }
    hoeffding.min(bernstein_term(profile, n))
}

/// Bernstein-side selection error bound (K-1) exp(-n Delta^2 / (2p)).
pub fn selection_error_bound(profile: &MarginProfile, n: usize) -> f64 {
    if profile.k_classes <= 1 {
        return 0.0;
    }
    bernstein_term(profile, n)
}

fn bernstein_term(profile: &MarginProfile, n: usize) -> f64 {
    let k = profile.k_classes as f64;
    (k - 1.0) * (-(n as f64) * profile.delta * profile.delta / (2.0 * profile.p_top2)).exp()
}

/// Leading-order bias and gap predictions, scaled by sqrt(p/n).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BiasPrediction {
    /// sqrt(p/n) J(lambda): upward bias of the same-sample estimator.
    pub jensen: f64,
    /// sqrt(p/n) S(lambda): downward bias magnitude of the held-out estimator.
    pub selection: f64,
    /// sqrt(p/n) g_A(lambda): direct ECE gap.
    pub gap_a: f64,
    /// sqrt(p/n) g_B(lambda): oracle-distance gap.
    pub gap_b: f64,
}

/// Evaluates the leading-order constants at the standardized margin the
/// profile's (delta, p) imply for selection size `n`.
pub fn bias_prediction(profile: &MarginProfile, n: usize) -> BiasPrediction {
    let scale = (profile.p_top2 / n as f64).sqrt();
    let lambda = if scale > 0.0 {
        0.5 * profile.delta / scale
    } else {
        0.0
    };
    let j = jensen_j(lambda).expect("lambda >= 0");
    let s = selection_s(lambda).expect("lambda >= 0");
    BiasPrediction {
        jensen: scale * j,
        selection: scale * s,
        gap_a: scale * (j + s),
        gap_b: scale * (j - s),
    }
}

/// One row of the J/S/g_A/g_B table the CLI prints.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TheoryRow {
    pub lambda: f64,
    pub j: f64,
    pub s: f64,
    pub g_a: f64,
    pub g_b: f64,
}

/// Table on lambda in [0, max] with the given step, lambda* appended.
pub fn theory_table(step: f64, max: f64) -> Vec<TheoryRow> {
    let mut rows = Vec::new();
    let mut k = 0usize;
    loop {
        let lambda = k as f64 * step;
        if lambda > max + 1e-12 {
            break;
        }
        rows.push(row_at(lambda));
        k += 1;
    }
    rows.push(row_at(lambda_star_default()));
    rows
}

fn row_at(lambda: f64) -> TheoryRow {
    TheoryRow {
        lambda,
        j: jensen_j(lambda).expect("lambda >= 0"),
        s: selection_s(lambda).expect("lambda >= 0"),
        g_a: gap_g_a(lambda).expect("lambda >= 0"),
        g_b: gap_g_b(lambda).expect("lambda >= 0"),
    }
}
