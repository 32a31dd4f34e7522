//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `--nocapture` to see them). Every tolerance is pinned
//! here; all runs are seeded and deterministic.

use sem_ece_core::analysis::{self, BootstrapStatistic, RunConfig};
use sem_ece_core::data_model::export_records;
use sem_ece_core::exact_oracle::{
    enumerate_c1, enumerate_c2, oracle_result, TrueQuestion, DEFAULT_ENUMERATION_CAP,
};
use sem_ece_core::simulator::{
    export_records as sim_export, gap_rate_sweep, run_simulation, verify_bias_bounds,
    verify_gap_theorem, verify_sharp_theorem, ExplicitQuestion, GeneratorSpec, LabelRule,
    PopulationSpec, SimSpec,
};
use sem_ece_core::theory;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn explicit_spec(probs: Vec<f64>, n: usize, m: usize, trials: usize, seed: u64) -> SimSpec {
    let k = probs.len();
    let mut correct = vec![false; k];
    correct[0] = true;
    SimSpec {
        population: PopulationSpec::Explicit {
            questions: vec![ExplicitQuestion { probs, correct }],
        },
        n,
        m,
        trials,
        r_splits: 1,
        seed,
        eta_rule: "n^-1/4".into(),
        bootstrap_reps: 0,
        l_bins: 10,
    }
}

fn generated_spec(g: GeneratorSpec, n: usize, m: usize, seed: u64) -> SimSpec {
    SimSpec {
        population: PopulationSpec::Generator { generator: g },
        n,
        m,
        trials: 1,
        r_splits: 1,
        seed,
        eta_rule: "n^-1/4".into(),
        bootstrap_reps: 200,
        l_bins: 10,
    }
}

#[test]
fn criterion_01_lambda_star_root() {
    let t0 = Instant::now();
    let root = theory::lambda_star(1e-6).expect("bracket");
    let elapsed = t0.elapsed();
    let double = 2.0 * root;
    let lo = theory::gap_g_b(root - 1e-6).unwrap();
    let hi = theory::gap_g_b(root + 1e-6).unwrap();
    let pass = (0.3059..=0.3066).contains(&root)
        && (0.6118..=0.6132).contains(&double)
        && lo > 0.0
        && hi < 0.0
        && elapsed.as_micros() < 1000;
    report(
        "1 (lambda* root)",
        pass,
        &format!(
            "lambda*={root:.6}, 2lambda*={double:.6}, gB sign change [{lo:+.2e},{hi:+.2e}], {}us",
            elapsed.as_micros()
        ),
    );
}

#[test]
fn criterion_02_boundary_constants() {
    let sqrt50 = 50.0f64.sqrt();
    let jdr = theory::std_normal_pdf(0.6125) / sqrt50;
    let simpleqa = theory::std_normal_pdf(7.48f64.ln().sqrt()) / sqrt50;
    let popqa = theory::std_normal_pdf(6.05f64.ln().sqrt()) / sqrt50;
    let pass = (jdr - 0.0468).abs() <= 1e-4
        && (simpleqa - 0.0206).abs() <= 1e-4
        && (popqa - 0.0229).abs() <= 1e-4;
    report(
        "2 (boundary constants)",
        pass,
        &format!("phi(0.6125)/sqrt50={jdr:.6}, K=7.48: {simpleqa:.6}, K=6.05: {popqa:.6}"),
    );
}

#[test]
fn criterion_03_oracle_equivalence() {
    let t0 = Instant::now();
    let grid: [&[f64]; 5] = [
        &[0.5, 0.5],
        &[0.55, 0.45],
        &[0.6, 0.4],
        &[0.7, 0.3],
        &[0.4, 0.35, 0.25],
    ];
    // Spot values from hand enumeration.
    let spot = oracle_result(
        &TrueQuestion::new(vec![0.6, 0.4], vec![true, false]).unwrap(),
        3,
        3,
        DEFAULT_ENUMERATION_CAP,
    )
    .unwrap();
    assert!((spot.e_c1 - 0.76).abs() < 1e-12, "spot E[c1] {}", spot.e_c1);
    assert!(
        (spot.pr_wrong_mode - 0.352).abs() < 1e-12,
        "spot Pr {}",
        spot.pr_wrong_mode
    );

    let mut worst: f64 = 0.0;
    let mut seed = 300;
    for probs in grid {
        for n in [3usize, 5, 10, 25] {
            seed += 1;
            let mut correct = vec![false; probs.len()];
            correct[0] = true;
            let q = TrueQuestion::new(probs.to_vec(), correct).unwrap();
            let exact = oracle_result(&q, n, n, DEFAULT_ENUMERATION_CAP).unwrap();
            let spec = explicit_spec(probs.to_vec(), n, n, 100_000, seed);
            let r = run_simulation(&spec).unwrap();
            for (key, want) in [
                ("mean_c1", exact.e_c1),
                ("mean_c2", exact.e_c2),
                ("pr_wrong_mode", exact.pr_wrong_mode),
            ] {
                let got = r.measured[key];
                let se = r.std_err[key].max(1e-9);
                let z = (got - want).abs() / se;
                worst = worst.max(z);
                assert!(
                    z <= 4.0,
                    "{key} at pi={probs:?} n={n}: got {got}, exact {want}, z={z:.2}"
                );
            }
        }
    }
    report(
        "3 (oracle equivalence)",
        worst <= 4.0,
        &format!(
            "20 configs x 3 stats, worst |z|={worst:.2} (<=4), spot values exact, {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_bias_expansions() {
    let t0 = Instant::now();
    let n = 200usize;
    let mut detail = String::new();
    let mut pass = true;
    for (i, lambda) in [0.0f64, 0.15, 0.306, 0.5].into_iter().enumerate() {
        let spec = generated_spec(
            GeneratorSpec {
                n_questions: 20_000,
                k: 2,
                p: 1.0,
                lambda_grid: Some(vec![lambda]),
                delta_grid: None,
                lambda_ref_n: Some(n),
                rho_modal_incorrect: 0.0,
                labels: LabelRule::Modal,
                balance_orientation: true,
            },
            n,
            n,
            400 + i as u64,
        );
        let r = run_simulation(&spec).unwrap();
        let (b1, p1) = (r.measured["mean_c1_bias"], r.predicted["mean_c1_bias"]);
        let tol1 = (0.1 * p1.abs()).max(0.002);
        let ok1 = (b1 - p1).abs() <= tol1;
        pass &= ok1;
        detail.push_str(&format!("c1@{lambda}: {b1:.5} vs {p1:.5}; "));
        if lambda > 0.0 {
            let (b2, p2) = (r.measured["mean_c2_bias"], r.predicted["mean_c2_bias"]);
            let tol2 = (0.1 * p2.abs()).max(0.002);
            let ok2 = (b2 - p2).abs() <= tol2;
            pass &= ok2;
            detail.push_str(&format!("c2@{lambda}: {b2:.5} vs {p2:.5}; "));
        }
    }
    detail.push_str(&format!("{:.1}s", t0.elapsed().as_secs_f64()));
    report("4 (bias expansions)", pass, &detail);
}

#[test]
fn criterion_05_direct_gap_theorem() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for (i, lambdas) in [vec![0.15], vec![0.05, 0.1, 0.15, 0.2, 0.25]]
        .into_iter()
        .enumerate()
    {
        let spec = generated_spec(
            GeneratorSpec {
                n_questions: 20_000,
                k: 2,
                p: 1.0,
                lambda_grid: Some(lambdas.clone()),
                delta_grid: None,
                lambda_ref_n: Some(50),
                rho_modal_incorrect: 0.3,
                labels: LabelRule::Modal,
                balance_orientation: true,
            },
            50,
            50,
            500 + i as u64,
        );
        let check = verify_gap_theorem(&spec, 0.15).unwrap();
        pass &= check.applicable && check.pass && check.measured_gap > 0.0;
        detail.push_str(&format!(
            "pop{i}: gap={:.5} pred={:.5} rel={:+.1}% overconf={:.3}; ",
            check.measured_gap,
            check.predicted_gap,
            100.0 * check.rel_deviation,
            check.overconfidence
        ));
    }
    detail.push_str(&format!("{:.1}s", t0.elapsed().as_secs_f64()));
    report("5 (direct gap, rho=0.3, n=50, 15% rel)", pass, &detail);
}

#[test]
fn criterion_06_sharp_sign_structure() {
    let t0 = Instant::now();
    let lambda_star = theory::lambda_star_default();
    let n = 200usize;
    let mut detail = String::new();

    let run = |lambda: f64, n_questions: usize, seed: u64| {
        let spec = generated_spec(
            GeneratorSpec {
                n_questions,
                k: 3,
                p: 0.95,
                lambda_grid: Some(vec![lambda]),
                delta_grid: None,
                lambda_ref_n: Some(n),
                rho_modal_incorrect: 0.6,
                labels: LabelRule::Shared,
                balance_orientation: true,
            },
            n,
            n,
            seed,
        );
        verify_sharp_theorem(&spec, 0.5).unwrap()
    };

    let jdr = run(0.15, 6000, 601);
    let at_root = run(lambda_star, 2000, 602);
    let low = run(0.5, 10_000, 603);

    let ok_jdr = jdr.applicable
        && jdr.regime == theory::Regime::Jdr
        && jdr.expected_sign == 1
        && jdr.measured_diff > 0.0;
    let ok_root = at_root.applicable && at_root.within_2se_of_zero;
    let ok_low = low.applicable
        && low.regime == theory::Regime::LowNotJdr
        && low.expected_sign == -1
        && low.measured_diff < 0.0;
    detail.push_str(&format!(
        "JDR(0.15): D={:+.5} pred={:+.5}; root: D={:+.5} se={:.5}; LowNotJDR(0.5): D={:+.5} pred={:+.5}; {:.1}s",
        jdr.measured_diff,
        jdr.predicted_diff,
        at_root.measured_diff,
        at_root.diff_std_err,
        low.measured_diff,
        low.predicted_diff,
        t0.elapsed().as_secs_f64()
    ));
    report("6 (sharp sign structure)", ok_jdr && ok_root && ok_low, &detail);
}

#[test]
fn criterion_07_rate_fit() {
    let t0 = Instant::now();
    let deltas: Vec<f64> = (1..=20).map(|k| 0.0125 * k as f64).collect();
    let spec = generated_spec(
        GeneratorSpec {
            n_questions: 30_000,
            k: 2,
            p: 1.0,
            lambda_grid: None,
            delta_grid: Some(deltas),
            lambda_ref_n: None,
            rho_modal_incorrect: 0.5,
            labels: LabelRule::Modal,
            balance_orientation: true,
        },
        50,
        50,
        700,
    );
    let grid = [25usize, 50, 100, 200, 400];
    let points = gap_rate_sweep(&spec, &grid).unwrap();
    let fit = analysis::rate_fit(&points.iter().map(|p| (p.n, p.gap)).collect::<Vec<_>>()).unwrap();
    let pass = (-0.65..=-0.42).contains(&fit.slope);
    let gaps: Vec<String> = points.iter().map(|p| format!("{}:{:.4}", p.n, p.gap)).collect();
    report(
        "7 (low-margin gap rate)",
        pass,
        &format!(
            "slope={:.3} in [-0.65,-0.42], r2={:.3}, gaps {}, {:.1}s",
            fit.slope,
            fit.r_squared,
            gaps.join(" "),
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_bound_inequalities() {
    let t0 = Instant::now();
    // Exact Bernstein-side bounds on the full oracle grid.
    let grid: [&[f64]; 5] = [
        &[0.5, 0.5],
        &[0.55, 0.45],
        &[0.6, 0.4],
        &[0.7, 0.3],
        &[0.4, 0.35, 0.25],
    ];
    let questions: Vec<TrueQuestion> = grid
        .iter()
        .map(|probs| {
            let mut correct = vec![false; probs.len()];
            correct[0] = true;
            TrueQuestion::new(probs.to_vec(), correct).unwrap()
        })
        .collect();
    let rows = verify_bias_bounds(&questions, &[3, 5, 10, 25], DEFAULT_ENUMERATION_CAP).unwrap();
    let violations: Vec<&_> = rows.iter().filter(|r| !r.pass).collect();

    // Generic ECE difference bound at eta = n^{-1/4} on simulated populations.
    let mut ece_ok = true;
    for (i, (lambda, rho, labels, n)) in [
        (0.15f64, 0.3, LabelRule::Modal, 50usize),
        (0.306, 0.6, LabelRule::Shared, 200),
        (0.5, 0.5, LabelRule::Modal, 100),
    ]
    .into_iter()
    .enumerate()
    {
        let spec = generated_spec(
            GeneratorSpec {
                n_questions: 4000,
                k: 2,
                p: 1.0,
                lambda_grid: Some(vec![lambda]),
                delta_grid: None,
                lambda_ref_n: Some(n),
                rho_modal_incorrect: rho,
                labels,
                balance_orientation: true,
            },
            n,
            n,
            800 + i as u64,
        );
        let r = run_simulation(&spec).unwrap();
        ece_ok &= r.measured["sem1_oracle_ece_dist"] <= r.predicted["sem1_oracle_ece_dist"] + 1e-12;
        ece_ok &= r.measured["sem2_oracle_ece_dist"] <= r.predicted["sem2_oracle_ece_dist"] + 1e-12;
    }
    let pass = violations.is_empty() && ece_ok;
    report(
        "8 (bound inequalities)",
        pass,
        &format!(
            "{} exact bound rows, {} violations; ECE bound at eta=n^-1/4 on 3 populations: {}; {:.1}s",
            rows.len(),
            violations.len(),
            if ece_ok { "holds" } else { "violated" },
            t0.elapsed().as_secs_f64()
        ),
    );
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sem-ece"))
        .args(args)
        .output()
        .expect("run sem-ece")
}

fn parse_sweep_csv(path: &Path) -> Vec<(usize, f64, f64)> {
    let text = std::fs::read_to_string(path).expect("sweep csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn criterion_09_opposite_side_sweep() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let n_questions = 6000usize;

    // Over-confident population, exported to JSONL through the CLI.
    let export_spec = serde_json::json!({
        "mode": "export",
        "pool_size": 400,
        "sim": {
            "population": {"generator": {
                "n_questions": n_questions,
                "k": 2,
                "p": 1.0,
                "delta_grid": [0.25],
                "rho_modal_incorrect": 0.7,
                "labels": "shared",
                "balance_orientation": true
            }},
            "n": 50, "m": 50, "seed": 900
        }
    });
    let spec_path = dir.path().join("export.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(&export_spec).unwrap()).unwrap();
    let prefix = dir.path().join("population");
    let out = run_cli(&[
        "simulate",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out-prefix",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "export failed: {}", String::from_utf8_lossy(&out.stderr));
    let jsonl = dir.path().join("population.jsonl");

    let sweep_csv = dir.path().join("sweep.csv");
    let out = run_cli(&[
        "sweep",
        "--input",
        jsonl.to_str().unwrap(),
        "--n-grid",
        "25,50,100,200,400",
        "--out",
        sweep_csv.to_str().unwrap(),
        "--seed",
        "901",
    ]);
    assert!(out.status.success(), "sweep failed: {}", String::from_utf8_lossy(&out.stderr));
    let points = parse_sweep_csv(&sweep_csv);
    assert_eq!(points.len(), 5);

    let slack = 0.5 / (n_questions as f64).sqrt(); // 1 s.e. of a pooled ECE
    let mut monotone = true;
    for w in points.windows(2) {
        monotone &= w[1].1 <= w[0].1 + slack; // Sem1 non-increasing
        monotone &= w[1].2 >= w[0].2 - slack; // Sem2 non-decreasing
    }
    let (_, s1_final, s2_final) = points[points.len() - 1];
    let converged = (s1_final - s2_final).abs() < 0.01;
    let series: Vec<String> = points
        .iter()
        .map(|(n, a, b)| format!("n={n}:{a:.4}/{b:.4}"))
        .collect();
    report(
        "9 (opposite-side sweep via cmd_sweep)",
        monotone && converged,
        &format!(
            "{} (slack {slack:.4}), final |gap|={:.4}, {:.1}s",
            series.join(" "),
            (s1_final - s2_final).abs(),
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_bootstrap_coverage() {
    let t0 = Instant::now();
    // Degenerate input: identical questions collapse the CI to a point.
    let lambda = 0.2f64;
    let delta = 2.0 * lambda * (1.0f64 / 50.0).sqrt();
    let probs = vec![(1.0 + delta) / 2.0, (1.0 - delta) / 2.0];
    let q = TrueQuestion::new(probs.clone(), vec![true, false]).unwrap();
    let truth = enumerate_c1(&q, 50, DEFAULT_ENUMERATION_CAP).unwrap().e_c1
        - enumerate_c2(&q, 25, 25, DEFAULT_ENUMERATION_CAP).unwrap().e_c2;

    let mut covered = 0usize;
    let reps = 100usize;
    for rep in 0..reps {
        let spec = SimSpec {
            population: PopulationSpec::Explicit {
                questions: vec![ExplicitQuestion {
                    probs: probs.clone(),
                    correct: vec![true, false],
                }],
            },
            n: 25,
            m: 25,
            trials: 1,
            r_splits: 10,
            seed: 1000 + rep as u64,
            eta_rule: "n^-1/4".into(),
            bootstrap_reps: 0,
            l_bins: 10,
        };
        // 400 iid pools of 50 generations each.
        let spec = SimSpec {
            population: PopulationSpec::Generator {
                generator: GeneratorSpec {
                    n_questions: 400,
                    k: 2,
                    p: 1.0,
                    lambda_grid: Some(vec![lambda]),
                    delta_grid: None,
                    lambda_ref_n: Some(50),
                    rho_modal_incorrect: 0.0,
                    labels: LabelRule::Modal,
                    balance_orientation: false,
                },
            },
            ..spec
        };
        let records = sim_export(&spec, 50).unwrap();
        let cfg = RunConfig {
            seed: 1000 + rep as u64,
            n: 25,
            m: 25,
            r_splits: 10,
            l_bins: 10,
            p_convention: analysis::PConvention::PToOne,
        };
        let s = analysis::paired_bootstrap(
            &records,
            BootstrapStatistic::MeanConfidenceReduction,
            500,
            0.05,
            &cfg,
        )
        .unwrap();
        let (lo, hi) = (s.ci_low.unwrap(), s.ci_high.unwrap());
        if lo <= truth && truth <= hi {
            covered += 1;
        }
    }
    let pass = covered >= 88;
    report(
        "10 (bootstrap coverage)",
        pass,
        &format!(
            "truth={truth:.5}, covered {covered}/{reps} (need >= 88), {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_11_cli_determinism() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // Small mixed population on disk.
    let spec = SimSpec {
        population: PopulationSpec::Generator {
            generator: GeneratorSpec {
                n_questions: 300,
                k: 3,
                p: 0.9,
                delta_grid: Some(vec![0.05, 0.0866, 0.15, 0.3]),
                lambda_grid: None,
                lambda_ref_n: None,
                rho_modal_incorrect: 0.3,
                labels: LabelRule::Modal,
                balance_orientation: true,
            },
        },
        n: 25,
        m: 25,
        trials: 1,
        r_splits: 10,
        seed: 1100,
        eta_rule: "n^-1/4".into(),
        bootstrap_reps: 50,
        l_bins: 10,
    };
    let records = sim_export(&spec, 50).unwrap();
    let input = dir.path().join("records.jsonl");
    std::fs::write(&input, export_records(&records).unwrap()).unwrap();

    let sim_spec_path = dir.path().join("sim.json");
    std::fs::write(
        &sim_spec_path,
        serde_json::to_string(&serde_json::json!({
            "mode": "run",
            "sim": {
                "population": {"generator": {
                    "n_questions": 500, "k": 2, "p": 1.0,
                    "lambda_grid": [0.15], "rho_modal_incorrect": 0.3,
                    "labels": "modal", "balance_orientation": true
                }},
                "n": 50, "m": 50, "trials": 2, "seed": 1101
            }
        }))
        .unwrap(),
    )
    .unwrap();

    let input_s = input.to_str().unwrap().to_string();
    let commands: Vec<(String, Vec<String>)> = vec![
        (
            "ece_table.csv".into(),
            vec![
                "evaluate".into(), "--input".into(), input_s.clone(),
                "--out-dir".into(), String::new(), "--seed".into(), "1102".into(),
            ],
        ),
        (
            "sweep.csv".into(),
            vec![
                "sweep".into(), "--input".into(), input_s.clone(),
                "--n-grid".into(), "10,25,50".into(),
                "--out".into(), String::new(), "--seed".into(), "1102".into(),
            ],
        ),
        (
            "strata.csv".into(),
            vec![
                "stratify".into(), "--input".into(), input_s.clone(),
                "--edges".into(), "0,0.05,0.1,0.2,0.5,1".into(),
                "--out".into(), String::new(), "--seed".into(), "1102".into(),
            ],
        ),
        (
            "boot.csv".into(),
            vec![
                "bootstrap".into(), "--input".into(), input_s.clone(),
                "--stat".into(), "ece-gap".into(), "--b-reps".into(), "200".into(),
                "--out".into(), String::new(), "--seed".into(), "1102".into(),
            ],
        ),
        (
            "align.csv".into(),
            vec![
                "align".into(), "--input".into(), input_s.clone(),
                "--boundary".into(), "jdr".into(), "--window".into(), "0.25".into(),
                "--out".into(), String::new(), "--seed".into(), "1102".into(),
            ],
        ),
        (
            "sim.csv".into(),
            vec![
                "simulate".into(), "--spec".into(),
                sim_spec_path.to_str().unwrap().into(),
                "--out-prefix".into(), String::new(),
            ],
        ),
        (
            "oracle.csv".into(),
            vec![
                "oracle".into(), "--pi".into(), "0.6,0.4".into(),
                "--n-list".into(), "3,5,10".into(),
                "--out".into(), String::new(),
            ],
        ),
        (
            "theory.csv".into(),
            vec!["theory".into(), "--out".into(), String::new()],
        ),
    ];

    let mut pass = true;
    let mut detail = String::new();
    for (file, args) in &commands {
        let mut outputs = Vec::new();
        for (run_idx, workers) in [(0, "1"), (1, "4"), (2, "1")] {
            let sub = dir.path().join(format!("{}-w{run_idx}", file.trim_end_matches(".csv")));
            std::fs::create_dir_all(&sub).unwrap();
            let target = if args[0] == "evaluate" {
                sub.clone()
            } else if args[0] == "simulate" {
                sub.join("sim")
            } else {
                sub.join(file)
            };
            let mut full: Vec<String> = args.clone();
            let slot = full.iter().position(|a| a.is_empty()).unwrap();
            full[slot] = target.to_str().unwrap().into();
            full.push("--workers".into());
            full.push(workers.into());
            let out = run_cli(&full.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            assert!(
                out.status.success(),
                "{} failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            );
            let produced = if args[0] == "evaluate" {
                sub.join("ece_table.csv")
            } else if args[0] == "simulate" {
                sub.join("sim.csv")
            } else {
                target
            };
            outputs.push(std::fs::read(produced).unwrap());
        }
        let identical = outputs[0] == outputs[1] && outputs[0] == outputs[2];
        pass &= identical;
        detail.push_str(&format!("{}:{} ", args[0], if identical { "ok" } else { "DIFFERS" }));
    }
    report(
        "11 (CLI determinism across workers)",
        pass,
        &format!("{detail}{:.1}s", t0.elapsed().as_secs_f64()),
    );
}
