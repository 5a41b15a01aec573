//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. Run with `--nocapture` to see the lines.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realinterp::discretize::DiscretizingSequence;
use realinterp::grid::{ProbeGrid, Window};
use realinterp::kfunc::{k_exact_oracle, k_min_formula, k_profile, shape_report, ExactOracle, WeightedSeqCouple};
use realinterp::stability::{
    condition_v_profile, counterexample_search, doubling_schedule, equivalence_experiment, gilbert_experiment,
    sum_sup_ratio, Comparison, EquivalenceParams, Orientation, SampleSpec, SumSupVariant, Triple,
};
use realinterp::{Exponent, QuasiConcaveFn, SeqVector};

const RHO: f64 = 2.0;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn exponents() -> [Exponent; 3] {
    [Exponent::ONE, Exponent::TWO, Exponent::INFINITY]
}

fn c1_discretizing() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let window = Window::symmetric(10.0, 12.0).unwrap();
    let (mut failures, mut worst_slack) = (0, 0.0f64);
    let mut built = 0;
    while built < 20 {
        let Ok(f) = QuasiConcaveFn::power_log(rng.gen_range(0.2..=0.8), rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0))
        else {
            continue;
        };
        built += 1;
        match DiscretizingSequence::build(&f, &window, RHO) {
            Ok(seq) => {
                let report = seq.verify();
                let slack = report.value("max_tightness_slack").unwrap_or(f64::INFINITY);
                worst_slack = worst_slack.max(slack);
                if !report.passed() || slack >= 1e-9 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    check(
        failures == 0 && within(elapsed, Duration::from_secs(5)),
        format!("20 functions, {failures} failures, max slack {worst_slack:.1e}, {elapsed:.2?} (limit 5s)"),
    )
}

struct KInstance {
    couple: WeightedSeqCouple,
    a: SeqVector,
    t: f64,
}

fn k_instances(q: Exponent, seed: u64) -> Vec<KInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..100)
        .map(|_| {
            let n = rng.gen_range(1..=6usize);
            let v = (0..n).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect();
            let w = (0..n).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect();
            let couple = WeightedSeqCouple::new(q, 0, v, w).unwrap();
            let a = (0..n as i64)
                .map(|i| (i, if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(-2.0f64..2.0).exp()))
                .collect();
            KInstance { couple, a, t: rng.gen_range(-4.0f64..4.0).exp() }
        })
        .collect()
}

fn c2_sandwich() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut worst = 1.0f64;
    for (j, q) in exponents().into_iter().enumerate() {
        for inst in k_instances(q, 20 + j as u64) {
            let f = k_min_formula(&inst.couple, &inst.a, inst.t).unwrap();
            let k = k_exact_oracle(&inst.couple, &inst.a, inst.t).unwrap().value;
            worst = worst.max(k / f);
            if k < f * (1.0 - 1e-7) || k > 2.0 * f * (1.0 + 1e-7) {
                violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        violations == 0 && within(elapsed, Duration::from_secs(30)),
        format!("300 instances, {violations} violations at tol 1e-7, max K/F {worst:.4}, {elapsed:.2?} (limit 30s)"),
    )
}

fn c3_shape() -> Outcome {
    let grid = ProbeGrid::geometric(1e-4, 1e4, 32).unwrap();
    let mut violations = 0;
    for (j, q) in exponents().into_iter().enumerate() {
        for inst in k_instances(q, 20 + j as u64) {
            let profile = k_profile(&ExactOracle::new(&inst.couple), &inst.a, &grid).unwrap();
            violations += shape_report(&profile, 1e-7).violations.len();
        }
    }
    check(violations == 0, format!("300 profiles on 32-point grids over [1e-4, 1e4], {violations} violations at tol 1e-7"))
}

fn c4_gilbert() -> Outcome {
    let start = Instant::now();
    let triple = Triple::power();
    let windows = [Window::symmetric(4.0, 16.0).unwrap(), Window::symmetric(4.0, 32.0).unwrap()];
    let spec = SampleSpec { samples: 200, ..Default::default() };
    let mut worst: f64 = 0.0;
    for p in exponents() {
        for q in exponents() {
            let report = gilbert_experiment(&triple, &windows, p, q, RHO, &spec).unwrap();
            worst = worst.max(report.drift);
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 0.10 && within(elapsed, Duration::from_secs(120)),
        format!("9 (p,q) pairs, 200 samples, 4^±16 -> 4^±32, max drift {:.2}% (limit 10%), {elapsed:.2?}", worst * 100.0),
    )
}

fn c5_condition_v() -> Outcome {
    let power: Vec<usize> = [10.0, 20.0, 40.0]
        .iter()
        .map(|&r| {
            condition_v_profile(&Triple::power(), &Window::symmetric(4.0, r).unwrap(), RHO, Orientation::Ratio10)
                .unwrap()
                .max_cardinality
        })
        .collect();
    let log: Vec<usize> = doubling_schedule(&Window::symmetric(10.0, 6.0).unwrap(), 3)
        .unwrap()
        .iter()
        .map(|w| condition_v_profile(&Triple::log(), w, RHO, Orientation::Ratio10).unwrap().max_cardinality)
        .collect();
    let passed = power.iter().all(|&m| m == 4) && log.windows(2).all(|w| w[1] > w[0]);
    check(passed, format!("power triple max {power:?} (expect all 4); log triple max {log:?} (expect strictly increasing)"))
}

fn c6_stability_holds() -> Outcome {
    let triple = Triple::power();
    let windows = [Window::symmetric(4.0, 16.0).unwrap(), Window::symmetric(4.0, 32.0).unwrap()];
    let spec = SampleSpec::default();
    let mut passed = true;
    let (mut lo, mut hi, mut drift) = (f64::INFINITY, 0.0f64, 0.0f64);
    for comparison in [Comparison::Fine, Comparison::Inner] {
        for p in exponents() {
            let report = equivalence_experiment(&triple, &windows, &EquivalenceParams::new(comparison, p), &spec).unwrap();
            for run in &report.runs {
                lo = lo.min(run.side_ratio.min);
                hi = hi.max(run.side_ratio.max);
                passed &= run.embedding_violations.is_empty()
                    && run.side_ratio.min >= 1.0 - 1e-9
                    && run.side_ratio.max <= run.max_cardinality as f64;
            }
            drift = drift.max(report.side_ratio_drift);
        }
    }
    passed &= drift < 0.10;
    check(
        passed,
        format!("both comparisons, p in {{1,2,inf}}: l1/linf side ratio in [{lo:.3}, {hi:.3}] (bound [1, 4]), drift {:.3}% (limit 10%)", drift * 100.0),
    )
}

fn c7_stability_fails() -> Outcome {
    let params = EquivalenceParams::new(Comparison::Inner, Exponent::ONE);
    let log_windows = doubling_schedule(&Window::symmetric(10.0, 6.0).unwrap(), 3).unwrap();
    let log = counterexample_search(&Triple::log(), &log_windows, &params).unwrap();
    let control_windows = doubling_schedule(&Window::symmetric(4.0, 16.0).unwrap(), 3).unwrap();
    let control = counterexample_search(&Triple::power(), &control_windows, &params).unwrap();
    let control_drift = control.max_step_drift.max((control.total_increase - 1.0).abs());
    let worst: Vec<String> = log.rows.iter().map(|r| format!("{:.2}", r.worst_ratio)).collect();
    check(
        log.strictly_increasing && log.total_increase >= 2.0 && control_drift < 0.05,
        format!(
            "log triple worst ratio [{}] total x{:.2} (need strictly increasing, >= x2); power control drift {:.3}% (limit 5%)",
            worst.join(", "),
            log.total_increase,
            control_drift * 100.0
        ),
    )
}

fn c8_sum_sup() -> Outcome {
    let triple = Triple::power();
    let (small, large) = (Window::symmetric(4.0, 16.0).unwrap(), Window::symmetric(4.0, 32.0).unwrap());
    let (mut worst, mut drift) = (0.0f64, 0.0f64);
    for variant in SumSupVariant::ALL {
        for r in [1.0, -1.0, 2.0] {
            let a = sum_sup_ratio(variant, r, &triple, &small, RHO).unwrap();
            let b = sum_sup_ratio(variant, r, &triple, &large, RHO).unwrap();
            worst = worst.max(a.max_ratio).max(b.max_ratio);
            drift = drift.max((b.max_ratio - a.max_ratio).abs() / a.max_ratio);
        }
    }
    check(
        worst <= 6.0 && drift < 0.05,
        format!("4 variants x r in {{1,-1,2}}: max block ratio {worst:.3} (limit 6), window drift {:.3}% (limit 5%)", drift * 100.0),
    )
}

fn run_cli(out: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_realinterp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn c9_determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["stability", "--seed", "7", "--samples", "40"],
        &["gilbert-check", "--seed", "7", "--samples", "40"],
        &["falsify", "--seed", "7"],
        &["discretize"],
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        if !(run_cli(a.path(), args) && run_cli(b.path(), args)) {
            mismatches.push(format!("{} did not exit 0", args[0]));
            continue;
        }
        for entry in std::fs::read_dir(a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            compared += 1;
            if std::fs::read(a.path().join(&name)).ok() != std::fs::read(b.path().join(&name)).ok() {
                mismatches.push(name.to_string_lossy().into_owned());
            }
        }
    }
    check(
        mismatches.is_empty() && compared > 0,
        format!("{compared} report files from 4 repeated CLI runs, mismatches {mismatches:?}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("1 discretizing sequences verify", c1_discretizing),
        ("2 K sandwich F <= K <= 2F", c2_sandwich),
        ("3 K shape", c3_shape),
        ("4 Gilbert equivalence stable", c4_gilbert),
        ("5 condition (v) counts", c5_condition_v),
        ("6 stability when (v) holds", c6_stability_holds),
        ("7 divergence when (v) fails", c7_stability_fails),
        ("8 sum-sup block ratios", c8_sum_sup),
        ("9 CLI determinism", c9_determinism),
    ];
    let mut failed = Vec::new();
    for (name, criterion) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {name}: {} ({:.2?})", outcome.detail, start.elapsed());
        if !outcome.passed {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
