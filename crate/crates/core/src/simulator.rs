//! Monte Carlo verification of the asymptotic claims on synthetic
//! question populations: bias expansions, the direct ECE gap, the sharp
//! oracle-distance comparison, bound inequalities, and the n^{-1/2} rate.
//!
//! Determinism contract: every (question, trial) pair owns an RNG
//! substream keyed by the spec seed, and reductions run in fixed order
//! with compensated summation, so results are bit-identical for any
//! worker count.

use crate::calibration::BinningScheme;
use crate::data_model::{QuestionRecord, SemanticSample};
use crate::error::{Error, Result};
use crate::exact_oracle::{oracle_result, TrueQuestion};
use crate::rng::{indexed_stream, CompensatedSum};
use crate::theory::{self, Regime};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How class correctness is assigned by the population generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Modal class correct, every other class incorrect (before flips).
    Modal,
    /// All classes share one label per question (before flips the whole
    /// question is correct). Keeps the deployed label independent of the
    /// selected class, which the oracle-distance comparison needs.
    Shared,
}

/// Synthetic population: either explicit questions or a generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PopulationSpec {
    Explicit { questions: Vec<ExplicitQuestion> },
    Generator { generator: GeneratorSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitQuestion {
    pub probs: Vec<f64>,
    pub correct: Vec<bool>,
}

/// Grid generator over standardized or absolute margins.
///
/// Questions cycle through the margin grid; when `balance_orientation` is
/// set (the default) consecutive grid passes alternate the order of the
/// top-two classes, which cancels the systematic skew the lowest-index
/// tie rule would otherwise inject at finite n. The modal label of a
/// `rho_modal_incorrect` fraction of each (grid point, orientation) cell
/// is flipped to false, producing an over-confident population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_questions: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Top-two probability mass.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Half standardized margins, interpreted at `lambda_ref_n`.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    /// Absolute top-two gaps; alternative to `lambda_grid`.
    #[serde(default)]
    pub delta_grid: Option<Vec<f64>>,
    /// Reference n for the lambda grid; defaults to the spec's n.
    #[serde(default)]
    pub lambda_ref_n: Option<usize>,
    #[serde(default = "default_rho")]
    pub rho_modal_incorrect: f64,
    #[serde(default = "default_labels")]
    pub labels: LabelRule,
    #[serde(default = "default_true")]
    pub balance_orientation: bool,
}

fn default_k() -> usize {
    2
}
fn default_p() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.3
}
fn default_labels() -> LabelRule {
    LabelRule::Modal
}
fn default_true() -> bool {
    true
}

/// Full simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub population: PopulationSpec,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_one")]
    pub trials: usize,
    #[serde(default = "default_one")]
    pub r_splits: usize,
    pub seed: u64,
    /// Bin-interior eta choice; "n^-1/4" or "fixed:<value>".
    #[serde(default = "default_eta")]
    pub eta_rule: String,
    #[serde(default = "default_bootstrap_reps")]
    pub bootstrap_reps: usize,
    #[serde(default = "default_l_bins")]
    pub l_bins: usize,
}

fn default_one() -> usize {
    1
}
fn default_eta() -> String {
    "n^-1/4".into()
}
fn default_bootstrap_reps() -> usize {
    200
}
fn default_l_bins() -> usize {
    10
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.trials == 0 {
            return Err(Error::InvalidSpec("n, m, trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn eta(&self) -> Result<f64> {
        parse_eta(&self.eta_rule, self.n)
    }
}

fn parse_eta(rule: &str, n: usize) -> Result<f64> {
    if rule == "n^-1/4" {
        return Ok((n as f64).powf(-0.25));
    }
    if let Some(v) = rule.strip_prefix("fixed:") {
        let x: f64 = v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad eta_rule `{rule}`")))?;
        if x <= 0.0 {
            return Err(Error::NonPositiveEta);
        }
        return Ok(x);
    }
    Err(Error::InvalidSpec(format!("unknown eta_rule `{rule}`")))
}

/// Expands the population spec into concrete questions.
pub fn build_population(spec: &SimSpec) -> Result<Vec<TrueQuestion>> {
    match &spec.population {
        PopulationSpec::Explicit { questions } => questions
            .iter()
            .map(|q| TrueQuestion::new(q.probs.clone(), q.correct.clone()))
            .collect(),
        PopulationSpec::Generator { generator } => {
            generate_questions(generator, generator.lambda_ref_n.unwrap_or(spec.n))
        }
    }
}

fn generate_questions(g: &GeneratorSpec, ref_n: usize) -> Result<Vec<TrueQuestion>> {
    if g.n_questions == 0 {
        return Err(Error::InvalidSpec("generator needs n_questions >= 1".into()));
    }
    if g.k < 2 {
        return Err(Error::InvalidSpec("generator needs k >= 2".into()));
    }
    if !(0.0..=1.0).contains(&g.rho_modal_incorrect) {
        return Err(Error::InvalidSpec("rho must lie in [0, 1]".into()));
    }
    let deltas: Vec<f64> = match (&g.delta_grid, &g.lambda_grid) {
        (Some(d), None) => d.clone(),
        (None, Some(l)) => l
            .iter()
            .map(|lam| 2.0 * lam * (g.p / ref_n as f64).sqrt())
            .collect(),
        _ => {
            return Err(Error::InvalidSpec(
                "generator needs exactly one of delta_grid, lambda_grid".into(),
            ))
        }
    };
    if deltas.is_empty() {
        return Err(Error::InvalidSpec("margin grid is empty".into()));
    }
    let rest = if g.k > 2 { (1.0 - g.p) / (g.k - 2) as f64 } else { 0.0 };
    if g.k == 2 && (g.p - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidSpec("k = 2 requires p = 1".into()));
    }
    for &d in &deltas {
        if !(0.0..=g.p).contains(&d) {
            return Err(Error::InvalidSpec(format!("delta {d} outside [0, p]")));
        }
        if g.k > 2 && (g.p - d) / 2.0 < rest - 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "runner-up mass {} below background class mass {rest}",
                (g.p - d) / 2.0
            )));
        }
    }

    let grid_len = deltas.len();
    let orientations = if g.balance_orientation { 2 } else { 1 };
    // Cell sizes for the exact flip fraction within each (grid, orientation)
    // cell.
    let mut cell_total = vec![0usize; grid_len * orientations];
    for i in 0..g.n_questions {
        let grid = i % grid_len;
        let orient = (i / grid_len) % orientations;
        cell_total[grid * orientations + orient] += 1;
    }
    let flip_count: Vec<usize> = cell_total
        .iter()
        .map(|&c| (g.rho_modal_incorrect * c as f64).round() as usize)
        .collect();

    let mut cell_seen = vec![0usize; grid_len * orientations];
    let mut questions = Vec::with_capacity(g.n_questions);
    for i in 0..g.n_questions {
        let grid = i % grid_len;
        let orient = (i / grid_len) % orientations;
        let cell = grid * orientations + orient;
        let flipped = cell_seen[cell] < flip_count[cell];
        cell_seen[cell] += 1;

        let d = deltas[grid];
        let hi = (g.p + d) / 2.0;
        let lo = (g.p - d) / 2.0;
        let mut probs = Vec::with_capacity(g.k);
        let mode_idx = if orient == 0 {
            probs.push(hi);
            probs.push(lo);
            0
        } else {
            probs.push(lo);
            probs.push(hi);
            1
        };
        probs.extend(std::iter::repeat_n(rest, g.k - 2));
        let correct = match g.labels {
            LabelRule::Modal => {
                let mut v = vec![false; g.k];
                v[mode_idx] = !flipped;
                v
            }
            LabelRule::Shared => vec![!flipped; g.k],
        };
        questions.push(TrueQuestion::new(probs, correct)?);
    }
    Ok(questions)
}

/// Measured-vs-predicted summary of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub measured: BTreeMap<String, f64>,
    pub predicted: BTreeMap<String, f64>,
    pub std_err: BTreeMap<String, f64>,
    pub meta: SimMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimMeta {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub n_questions: usize,
    pub eta_rule: String,
    pub eta: f64,
    pub l_bins: usize,
}

impl SimResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,measured,predicted,std_err\n");
        for (k, v) in &self.measured {
            let p = self
                .predicted
                .get(k)
                .map(|x| crate::fmt::csv_num(*x))
                .unwrap_or_default();
            let s = self
                .std_err
                .get(k)
                .map(|x| crate::fmt::csv_num(*x))
                .unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", k, crate::fmt::csv_num(*v), p, s));
        }
        out
    }
}

struct QuestionAccum {
    // Means over trials.
    c1_sum: f64,
    c1_sumsq: f64,
    c2_sum: f64,
    c2_sumsq: f64,
    a_sum: f64,
    abs1_sum: f64,
    abs2_sum: f64,
    wrong_label_sum: f64,
    wrong_mode_sum: f64,
    wrong_mode_sumsq: f64,
    // Per-bin signed gap masses, summed over trials.
    mass1: Vec<f64>,
    mass2: Vec<f64>,
    // Deterministic oracle atom.
    c_star: f64,
    a_star: f64,
    // Leading-order predictions at the spec's n.
    pred_jensen: f64,
    pred_selection: f64,
    pred_gap_a: f64,
    pred_gap_b: f64,
    bound_delta: f64,
    bound_eps1: f64,
    bound_eps2: f64,
}

fn draw_class<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
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

fn simulate_question(
    q: &TrueQuestion,
    qidx: u64,
    spec: &SimSpec,
    scheme: &BinningScheme,
) -> QuestionAccum {
    let k = q.probs.len();
    let z_star = q.mode();
    let c_star = q.probs[z_star];
    let a_star = if q.class_correct[z_star] { 1.0 } else { 0.0 };
    let profile = q.margin(spec.n);
    let pred = theory::bias_prediction(&profile, spec.n);
    let pi1 = c_star;
    let bern = theory::selection_error_bound(&profile, spec.n);
    let mut acc = QuestionAccum {
        c1_sum: 0.0,
        c1_sumsq: 0.0,
        c2_sum: 0.0,
        c2_sumsq: 0.0,
        a_sum: 0.0,
        abs1_sum: 0.0,
        abs2_sum: 0.0,
        wrong_label_sum: 0.0,
        wrong_mode_sum: 0.0,
        wrong_mode_sumsq: 0.0,
        mass1: vec![0.0; scheme.l_bins],
        mass2: vec![0.0; scheme.l_bins],
        c_star,
        a_star,
        pred_jensen: pred.jensen,
        pred_selection: pred.selection,
        pred_gap_a: pred.gap_a,
        pred_gap_b: pred.gap_b,
        bound_delta: bern,
        bound_eps1: (pi1 * (1.0 - pi1) / spec.n as f64).sqrt() + bern,
        bound_eps2: (pi1 * (1.0 - pi1) / spec.m as f64).sqrt() + bern,
    };
    let mut counts = vec![0u32; k];
    for trial in 0..spec.trials {
        let mut rng: ChaCha12Rng = indexed_stream(spec.seed, "sim-question", qidx, trial as u64);
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..spec.n {
            counts[draw_class(&q.probs, &mut rng)] += 1;
        }
        let z_hat = mode_of_counts(&counts);
        let c1 = counts[z_hat] as f64 / spec.n as f64;
        let mut eval_hits = 0u32;
        for _ in 0..spec.m {
            if draw_class(&q.probs, &mut rng) == z_hat {
                eval_hits += 1;
            }
        }
        let c2 = eval_hits as f64 / spec.m as f64;
        let a = if q.class_correct[z_hat] { 1.0 } else { 0.0 };
        acc.c1_sum += c1;
        acc.c1_sumsq += c1 * c1;
        acc.c2_sum += c2;
        acc.c2_sumsq += c2 * c2;
        acc.a_sum += a;
        acc.abs1_sum += (c1 - c_star).abs();
        acc.abs2_sum += (c2 - c_star).abs();
        if a != a_star {
            acc.wrong_label_sum += 1.0;
        }
        if z_hat != z_star {
            acc.wrong_mode_sum += 1.0;
            acc.wrong_mode_sumsq += 1.0;
        }
        acc.mass1[scheme.bin_index(c1)] += a - c1;
        acc.mass2[scheme.bin_index(c2)] += a - c2;
    }
    acc
}

fn fold_ece(mass: &[CompensatedSum], total: f64) -> f64 {
    mass.iter().map(|m| (m.value() / total).abs()).sum()
}

/// Runs the simulation and aggregates measured statistics, leading-order
/// predictions, and Monte Carlo standard errors.
pub fn run_simulation(spec: &SimSpec) -> Result<SimResult> {
    let questions = build_population(spec)?;
    run_on_questions(spec, &questions)
}

pub fn run_on_questions(spec: &SimSpec, questions: &[TrueQuestion]) -> Result<SimResult> {
    spec.validate()?;
    if questions.is_empty() {
        return Err(Error::InvalidSpec("population is empty".into()));
    }
    let scheme = BinningScheme::equal_width(spec.l_bins)?;
    let eta = spec.eta()?;
    let accs: Vec<QuestionAccum> = questions
        .par_iter()
        .enumerate()
        .map(|(i, q)| simulate_question(q, i as u64, spec, &scheme))
        .collect();

    let nq = questions.len() as f64;
    let t = spec.trials as f64;
    let units = nq * t;
    let l = scheme.l_bins;

    // Ordered, compensated reduction.
    let mut mean = BTreeMap::new();
    let mut se = BTreeMap::new();
    let mut mass1 = vec![CompensatedSum::default(); l];
    let mut mass2 = vec![CompensatedSum::default(); l];
    let mut mass_star = vec![CompensatedSum::default(); l];
    let mut sums: BTreeMap<&str, CompensatedSum> = BTreeMap::new();
    let mut sumsq: BTreeMap<&str, CompensatedSum> = BTreeMap::new();
    let add = |map: &mut BTreeMap<&str, CompensatedSum>, key: &'static str, v: f64| {
        map.entry(key).or_default().add(v);
    };
    for a in &accs {
        add(&mut sums, "c1", a.c1_sum);
        add(&mut sumsq, "c1", a.c1_sumsq);
        add(&mut sums, "c2", a.c2_sum);
        add(&mut sumsq, "c2", a.c2_sumsq);
        add(&mut sums, "a", a.a_sum);
        add(&mut sums, "abs1", a.abs1_sum);
        add(&mut sums, "abs2", a.abs2_sum);
        add(&mut sums, "wrong_label", a.wrong_label_sum);
        add(&mut sums, "wrong_mode", a.wrong_mode_sum);
        add(&mut sumsq, "wrong_mode", a.wrong_mode_sumsq);
        add(&mut sums, "c_star", a.c_star);
        add(&mut sums, "a_star", a.a_star);
        add(&mut sums, "pred_j", a.pred_jensen);
        add(&mut sums, "pred_s", a.pred_selection);
        add(&mut sums, "pred_ga", a.pred_gap_a);
        add(&mut sums, "pred_gb", a.pred_gap_b);
        add(&mut sums, "bound_delta", a.bound_delta);
        add(&mut sums, "bound_eps1", a.bound_eps1);
        add(&mut sums, "bound_eps2", a.bound_eps2);
        for b in 0..l {
            mass1[b].add(a.mass1[b]);
            mass2[b].add(a.mass2[b]);
        }
    }
    for (i, q) in questions.iter().enumerate() {
        mass_star[scheme.bin_index(accs[i].c_star)].add(accs[i].a_star - accs[i].c_star);
        let _ = q;
    }

    let s = |k: &str| sums.get(k).map(|c| c.value()).unwrap_or(0.0);
    let mean_c1 = s("c1") / units;
    let mean_c2 = s("c2") / units;
    let mean_c_star = s("c_star") / nq;
    let a_bar = s("a") / units;
    let a_star_bar = s("a_star") / nq;
    let sem1_ece = fold_ece(&mass1, units);
    let sem2_ece = fold_ece(&mass2, units);
    let oracle_ece = fold_ece(&mass_star, nq);
    let eps1 = s("abs1") / units;
    let eps2 = s("abs2") / units;
    let delta_n = s("wrong_label") / units;
    let boundary_mass = questions
        .iter()
        .map(|q| {
            let c = q.oracle_confidence();
            let dist = scheme
                .edges
                .iter()
                .map(|e| (c - e).abs())
                .fold(f64::INFINITY, f64::min);
            if dist <= eta {
                1.0
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / nq;

    mean.insert("mean_c1".into(), mean_c1);
    mean.insert("mean_c2".into(), mean_c2);
    mean.insert("mean_cstar".into(), mean_c_star);
    mean.insert("mean_c1_bias".into(), mean_c1 - mean_c_star);
    mean.insert("mean_c2_bias".into(), mean_c2 - mean_c_star);
    mean.insert("a_bar".into(), a_bar);
    mean.insert("a_star_bar".into(), a_star_bar);
    mean.insert("overconfidence".into(), mean_c_star - a_bar);
    mean.insert("sem1_ece".into(), sem1_ece);
    mean.insert("sem2_ece".into(), sem2_ece);
    mean.insert("oracle_ece".into(), oracle_ece);
    mean.insert("ece_gap".into(), sem1_ece - sem2_ece);
    mean.insert(
        "oracle_distance_diff".into(),
        (sem1_ece - oracle_ece).abs() - (sem2_ece - oracle_ece).abs(),
    );
    mean.insert("eps1_n".into(), eps1);
    mean.insert("eps2_n".into(), eps2);
    mean.insert("delta_n".into(), delta_n);
    mean.insert("pr_wrong_mode".into(), s("wrong_mode") / units);
    mean.insert("boundary_mass_eta".into(), boundary_mass);
    mean.insert(
        "sem1_oracle_ece_dist".into(),
        (sem1_ece - oracle_ece).abs(),
    );
    mean.insert(
        "sem2_oracle_ece_dist".into(),
        (sem2_ece - oracle_ece).abs(),
    );

    let mut predicted = BTreeMap::new();
    predicted.insert("mean_c1_bias".into(), s("pred_j") / nq);
    predicted.insert("mean_c2_bias".into(), -s("pred_s") / nq);
    predicted.insert("ece_gap".into(), s("pred_ga") / nq);
    predicted.insert("oracle_distance_diff".into(), s("pred_gb") / nq);
    predicted.insert("delta_n".into(), s("bound_delta") / nq);
    predicted.insert("eps1_n".into(), s("bound_eps1") / nq);
    predicted.insert("eps2_n".into(), s("bound_eps2") / nq);
    let b1 = crate::calibration::ece_difference_bound(delta_n, eps1, eta, boundary_mass)?;
    let b2 = crate::calibration::ece_difference_bound(delta_n, eps2, eta, boundary_mass)?;
    predicted.insert("sem1_oracle_ece_dist".into(), b1);
    predicted.insert("sem2_oracle_ece_dist".into(), b2);

    // Standard errors: unit-level second moments for the mean statistics.
    let se_of = |key: &str, mean_v: f64| -> f64 {
        let var = (sumsq.get(key).map(|c| c.value()).unwrap_or(0.0) / units - mean_v * mean_v)
            .max(0.0);
        (var / units).sqrt()
    };
    se.insert("mean_c1".into(), se_of("c1", mean_c1));
    se.insert("mean_c2".into(), se_of("c2", mean_c2));
    se.insert("mean_c1_bias".into(), se_of("c1", mean_c1));
    se.insert("mean_c2_bias".into(), se_of("c2", mean_c2));
    se.insert(
        "pr_wrong_mode".into(),
        se_of("wrong_mode", s("wrong_mode") / units),
    );

    // ECE-functional standard errors by a seeded bootstrap over questions.
    if questions.len() > 1 && spec.bootstrap_reps > 0 {
        let mut gaps = Vec::with_capacity(spec.bootstrap_reps);
        let mut diffs = Vec::with_capacity(spec.bootstrap_reps);
        let mut e1s = Vec::with_capacity(spec.bootstrap_reps);
        let mut e2s = Vec::with_capacity(spec.bootstrap_reps);
        let nq_us = questions.len();
        for b in 0..spec.bootstrap_reps {
            let mut rng = indexed_stream(spec.seed, "sim-ece-se", b as u64, 0);
            let mut m1 = vec![0.0; l];
            let mut m2 = vec![0.0; l];
            let mut ms = vec![0.0; l];
            for _ in 0..nq_us {
                let idx = rng.gen_range(0..nq_us);
                let a = &accs[idx];
                for bin in 0..l {
                    m1[bin] += a.mass1[bin];
                    m2[bin] += a.mass2[bin];
                }
                ms[scheme.bin_index(a.c_star)] += a.a_star - a.c_star;
            }
            let f1: f64 = m1.iter().map(|v| (v / units).abs()).sum();
            let f2: f64 = m2.iter().map(|v| (v / units).abs()).sum();
            let fs: f64 = ms.iter().map(|v| (v / nq).abs()).sum();
            e1s.push(f1);
            e2s.push(f2);
            gaps.push(f1 - f2);
            diffs.push((f1 - fs).abs() - (f2 - fs).abs());
        }
        se.insert("sem1_ece".into(), sample_std(&e1s));
        se.insert("sem2_ece".into(), sample_std(&e2s));
        se.insert("ece_gap".into(), sample_std(&gaps));
        se.insert("oracle_distance_diff".into(), sample_std(&diffs));
    }

    Ok(SimResult {
        measured: mean,
        predicted,
        std_err: se,
        meta: SimMeta {
            n: spec.n,
            m: spec.m,
            trials: spec.trials,
            seed: spec.seed,
            n_questions: questions.len(),
            eta_rule: spec.eta_rule.clone(),
            eta,
            l_bins: spec.l_bins,
        },
    })
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    var.sqrt()
}

/// Direct-gap theorem check on an over-confident low-margin population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapCheck {
    pub measured_gap: f64,
    pub predicted_gap: f64,
    pub rel_deviation: f64,
    pub gap_std_err: f64,
    /// E[c*] - a_bar; the theorem hypothesis requires it positive.
    pub overconfidence: f64,
    pub applicable: bool,
    pub tolerance: f64,
    pub pass: bool,
    pub result: SimResult,
}

pub fn verify_gap_theorem(spec: &SimSpec, tolerance: f64) -> Result<GapCheck> {
    let result = run_simulation(spec)?;
    let measured_gap = result.measured["ece_gap"];
    let predicted_gap = result.predicted["ece_gap"];
    let overconfidence = result.measured["overconfidence"];
    let applicable = overconfidence > 0.0;
    let rel_deviation = if predicted_gap != 0.0 {
        (measured_gap - predicted_gap) / predicted_gap
    } else {
        f64::INFINITY
    };
    let pass = applicable && measured_gap > 0.0 && rel_deviation.abs() <= tolerance;
    Ok(GapCheck {
        measured_gap,
        predicted_gap,
        rel_deviation,
        gap_std_err: result.std_err.get("ece_gap").copied().unwrap_or(f64::NAN),
        overconfidence,
        applicable,
        tolerance,
        pass,
    result,
    })
}

/// Sharp oracle-distance check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpCheck {
    pub measured_diff: f64,
    pub predicted_diff: f64,
    pub diff_std_err: f64,
    pub sup_lambda: f64,
    pub regime: Regime,
    pub overconfidence: f64,
    pub c0: f64,
    /// Non-degenerate over-confidence hypothesis E[c*] - a_bar >= c0/sqrt(n).
    pub applicable: bool,
    /// +1 inside JDR, -1 in the low-not-JDR band, 0 at large margin.
    pub expected_sign: i8,
    pub sign_ok: bool,
    pub within_2se_of_zero: bool,
    pub result: SimResult,
}

pub fn verify_sharp_theorem(spec: &SimSpec, c0: f64) -> Result<SharpCheck> {
    let questions = build_population(spec)?;
    let result = run_on_questions(spec, &questions)?;
    let measured_diff = result.measured["oracle_distance_diff"];
    let predicted_diff = result.predicted["oracle_distance_diff"];
    let diff_std_err = result
        .std_err
        .get("oracle_distance_diff")
        .copied()
        .unwrap_or(f64::NAN);
    let sup_lambda = questions
        .iter()
        .map(|q| q.margin(spec.n).lambda_std)
        .fold(0.0, f64::max);
    // Population regime from the largest standardized margin present.
    let regime = questions
        .iter()
        .map(|q| theory::classify_regime(&q.margin(spec.n)).tag)
        .fold(Regime::Jdr, |acc, r| match (acc, r) {
            (Regime::LargeMargin, _) | (_, Regime::LargeMargin) => Regime::LargeMargin,
            (Regime::LowNotJdr, _) | (_, Regime::LowNotJdr) => Regime::LowNotJdr,
            _ => Regime::Jdr,
        });
    let overconfidence = result.measured["overconfidence"];
    let applicable = overconfidence >= c0 / (spec.n as f64).sqrt();
    let expected_sign = match regime {
        Regime::Jdr => 1,
        Regime::LowNotJdr => -1,
        Regime::LargeMargin => 0,
    };
    let sign_ok = match expected_sign {
        1 => measured_diff > 0.0,
        -1 => measured_diff < 0.0,
        _ => true,
    };
    Ok(SharpCheck {
        measured_diff,
        predicted_diff,
        diff_std_err,
        sup_lambda,
        regime,
        overconfidence,
        c0,
        applicable,
        expected_sign,
        sign_ok,
        within_2se_of_zero: measured_diff.abs() < 2.0 * diff_std_err,
        result,
    })
}

/// One bound-inequality check row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheckRow {
    pub probs: Vec<f64>,
    pub n: usize,
    pub quantity: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    /// Hoeffding-side reference with C = 1 where the theorem defines one;
    /// informational because the universal constant is unspecified.
    pub hoeffding_reference: Option<f64>,
}

/// Exact-oracle verification of the Bernstein-side bound inequalities for
/// the bias, selection error, and confidence errors of both estimators.
pub fn verify_bias_bounds(
    questions: &[TrueQuestion],
    ns: &[usize],
    cap: u64,
) -> Result<Vec<BoundCheckRow>> {
    let mut rows = Vec::new();
    for q in questions {
        for &n in ns {
            let r = oracle_result(q, n, n, cap)?;
            let profile = q.margin(n);
            let c_star = q.oracle_confidence();
            let bern = theory::selection_error_bound(&profile, n);
            let hoeff = (2.0 * profile.k_classes as f64).ln() / (2.0 * n as f64);
            let hoeff = hoeff.sqrt();
            let pi1 = c_star;
            let eps_bern = (pi1 * (1.0 - pi1) / n as f64).sqrt() + bern;
            let push = |rows: &mut Vec<BoundCheckRow>, quantity: &str, value: f64, bound: f64, h: Option<f64>| {
                rows.push(BoundCheckRow {
                    probs: q.probs.clone(),
                    n,
                    quantity: quantity.into(),
                    value,
                    bound,
                    pass: value <= bound + 1e-12,
                    hoeffding_reference: h,
                });
            };
            push(&mut rows, "abs_bias_c1", (r.e_c1 - c_star).abs(), bern, Some(hoeff));
            push(&mut rows, "abs_bias_c2", (r.e_c2 - c_star).abs(), bern, Some(hoeff));
            push(&mut rows, "pr_wrong_mode", r.pr_wrong_mode, bern, None);
            push(&mut rows, "eps_c1", r.e_abs_c1_err, eps_bern, Some(hoeff));
            push(&mut rows, "eps_c2", r.e_abs_c2_err, eps_bern, None);
        }
    }
    Ok(rows)
}

/// Gap measured on the low-margin sub-population at each n (threshold
/// re-evaluated per n), for the rate fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub n_low_margin: usize,
    pub gap: f64,
    pub gap_std_err: f64,
}

pub fn gap_rate_sweep(spec: &SimSpec, n_grid: &[usize]) -> Result<Vec<RatePoint>> {
    let questions = build_population(spec)?;
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let threshold = |k: usize| ((k as f64).ln() / n as f64).sqrt();
        let subset: Vec<TrueQuestion> = questions
            .iter()
            .filter(|q| {
                let prof = q.margin(n);
                prof.delta < threshold(prof.k_classes)
            })
            .cloned()
            .collect();
        if subset.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "only {} low-margin questions at n = {n}",
                subset.len()
            )));
        }
        let sub_spec = SimSpec {
            n,
            m: n,
            ..spec.clone()
        };
        let result = run_on_questions(&sub_spec, &subset)?;
        points.push(RatePoint {
            n,
            n_low_margin: subset.len(),
            gap: result.measured["ece_gap"],
            gap_std_err: result.std_err.get("ece_gap").copied().unwrap_or(f64::NAN),
        });
    }
    Ok(points)
}

/// Materializes the population as clustered records, one pool of
/// `pool_size` draws per question, for the record-based pipeline.
pub fn export_records(spec: &SimSpec, pool_size: usize) -> Result<Vec<QuestionRecord>> {
    let questions = build_population(spec)?;
    let records: Vec<QuestionRecord> = questions
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let mut rng = indexed_stream(spec.seed, "export", i as u64, 0);
            let samples: Vec<SemanticSample> = (0..pool_size)
                .map(|_| SemanticSample {
                    class_id: draw_class(&q.probs, &mut rng),
                    graded_correct: None,
                    verbalized_raw: None,
                })
                .collect();
            QuestionRecord {
                question_id: format!("sim-{i:06}"),
                samples,
                class_correct: q.class_correct.clone(),
                class_labels: (0..q.probs.len()).map(|k| k.to_string()).collect(),
                meta: BTreeMap::new(),
            }
        })
        .collect();
    Ok(records)
}
