//! Acceptance gate: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

use std::process::Command as Process;
use std::time::Instant;

use clap::Parser;
use ncmart::instances::remark_3_9_instance;
use ncmart::jn::{
    bmo_c2_exact, distribution_tail, evaluate_definition, exact_p2, Component, Deflator, DeflatorClass,
    Functional, NormKind, Side, TailMode,
};
use ncmart::norms;
use ncmart::sampling::{random_projection, random_rank_profile, stream_rng};
use ncmart::{Exponent, Operator};
use ncmart_cli::{random_instance, render, run, Cli, Format, Report, Row};
use rand::Rng;
use rayon::prelude::*;

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("ncmart").chain(args.iter().copied())).expect("valid arguments")
}

fn report(args: &[&str]) -> Report {
    run(&cli(args)).expect("command runs")
}

fn section<'a>(r: &'a Report, name: &str) -> Vec<&'a Row> {
    r.rows.iter().filter(|row| row.section == name).collect()
}

fn max(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, f64::max)
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = report(&["counterexample", "remark320"]);
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    let mut residual_rows = 0;
    let mut bmo_rows = 0;
    for row in &r.rows {
        let (n, v) = (row.n.unwrap() as f64, row.value.unwrap_or(f64::NAN));
        match row.name.as_str() {
            "sup_m |x - x_m|_p" => {
                let p = row.p.unwrap().value();
                worst = worst.max((v - (n - 1.0).sqrt() * n.powf(-1.0 / p)).abs());
                residual_rows += 1;
            }
            "bmo_c" => {
                worst = worst.max((v - 1.0).abs());
                bmo_rows += 1;
            }
            _ => {}
        }
    }
    Outcome {
        passed: r.passed && residual_rows == 20 && bmo_rows == 5 && worst <= 1e-10 && elapsed < 30.0,
        detail: format!("20 residual + 5 bmo_c values, max deviation {worst:.2e}, {elapsed:.2} s"),
    }
}

fn criterion_2() -> Outcome {
    let comp = Component {
        side: Side::Right,
        lag: 1,
        norm: NormKind::HcFull,
        class: DeflatorClass::General,
    };
    let mut ok = true;
    let mut ratios = Vec::new();
    for n in [2usize, 4, 8] {
        let inst = remark_3_9_instance(n, 1.0).unwrap();
        let a = inst.companion("a").unwrap().clone();
        let witness =
            evaluate_definition(&inst.x, &comp, n + 1, &Deflator::General(a), Exponent::Finite(1.0)).unwrap();
        let two = exact_p2(&inst.x, Functional::BigBmoCP).unwrap().lower_bound;
        ok &= witness >= (n as f64).sqrt() - 1e-9 && (two - 1.0).abs() <= 1e-10;
        ratios.push(witness / two);
    }
    // Each doubling of n multiplies the certified ratio by at least √2.
    ok &= ratios.windows(2).all(|w| w[1] >= w[0] * 2f64.sqrt() - 1e-9);
    let r = report(&["counterexample", "remark39", "--n", "2,4,8", "--p", "1", "--budget", "0"]);
    ok &= r.passed;
    Outcome {
        passed: ok,
        detail: format!(
            "BMO_c_1 / BMO_c_2 ratios {:.6} {:.6} {:.6} for n = 2, 4, 8",
            ratios[0], ratios[1], ratios[2]
        ),
    }
}

fn criterion_3() -> Outcome {
    let devs: Vec<(f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|t| {
            let x = random_instance(0xACCE_0003, t, 6);
            let est = bmo_c2_exact(&x).unwrap();
            (
                (est.lower_bound - norms::bmo_c(&x)).abs(),
                (est.reevaluate(&x).unwrap() - est.lower_bound).abs(),
            )
        })
        .collect();
    let v = max(devs.iter().map(|d| d.0));
    let w = max(devs.iter().map(|d| d.1));
    Outcome {
        passed: v <= 1e-10 && w <= 1e-9,
        detail: format!("1000 martingales: value deviation {v:.2e}, witness deviation {w:.2e}"),
    }
}

fn criterion_4() -> Outcome {
    let r = report(&[
        "jn-verify", "--random", "--trials", "1000", "--budget", "24", "--p", "0.5,1,1.5,2,3,4", "--seed", "4",
    ]);
    let dirs = section(&r, "directions");
    let failed = dirs.iter().filter(|row| row.passed != Some(true)).count();
    let worst = max(dirs.iter().filter_map(|row| row.value));
    Outcome {
        passed: r.passed && r.failures.is_empty() && failed == 0 && !dirs.is_empty(),
        detail: format!(
            "{} checks x 1000 instances, {} violations, max ratio {worst:.12}",
            dirs.len(),
            r.failures.len()
        ),
    }
}

fn criterion_5(suite: &Report) -> Outcome {
    let rows = section(suite, "holder");
    let get = |name: &str| max(rows.iter().filter(|r| r.name == name).filter_map(|r| r.value));
    let recon = get("max |a0 a1 - a|");
    let norm = get("max ||a0|_p - |a|_2^(2/p)|");
    let chain = get("max chain excess");
    Outcome {
        passed: rows.len() == 9
            && rows.iter().all(|r| r.passed == Some(true))
            && recon <= 1e-9
            && norm <= 1e-9
            && chain <= 1e-9,
        detail: format!("reconstruction {recon:.2e}, a0 norm {norm:.2e}, chain excess {chain:.2e}"),
    }
}

/// Tail of the squared integrand by sorting eigenvalues.
fn tail_oracle(sq: &Operator, tau_e: f64, lambda: f64) -> f64 {
    let n = sq.dim() as f64;
    let mut total = 0.0;
    for (m, w) in sq.mats().iter().zip(sq.space().weights()) {
        for l in m.clone().symmetric_eigenvalues().iter() {
            if l.max(0.0).sqrt() > lambda {
                total += w / n;
            }
        }
    }
    total / tau_e
}

fn criterion_6(cli_report: &Report) -> Outcome {
    let results: Vec<(bool, [Option<f64>; 3])> = (0..300u64)
        .into_par_iter()
        .map(|t| {
            let x = random_instance(0xACCE_0006, t, 4);
            let space = x.space().clone();
            let k = space.levels();
            let mut rng = stream_rng(0xACCE_0006, 1 << 32 | t);
            let level = rng.random_range(1..=k);
            let profile = random_rank_profile(&mut rng, &space, level);
            let e = random_projection(&space, level, &profile, t).unwrap();
            let grid: Vec<f64> = (1..=60).map(|i| i as f64 * 0.1).collect();
            let mart = x.martingale();
            let mut ok = true;
            let mut fitted = [None; 3];
            for (i, mode) in [TailMode::ConditionalSc, TailMode::PlainRight, TailMode::PlainLeft]
                .into_iter()
                .enumerate()
            {
                let curve = distribution_tail(&x, level, &e, mode, &grid).unwrap();
                let sq = match mode {
                    TailMode::ConditionalSc => norms::cond_sc_squared(&(&(&x - &mart[level]) * e.proj())),
                    TailMode::PlainRight => (&(&x - &mart[level - 1]) * e.proj()).abs_sq(),
                    TailMode::PlainLeft => (e.proj() * &(&x - &mart[level - 1])).abs_sq(),
                };
                let top = norms::psd_max_eigenvalue(&sq).max(0.0).sqrt();
                ok &= curve.values.windows(2).all(|w| w[1] <= w[0]);
                for (l, v) in grid.iter().zip(&curve.values) {
                    ok &= (v - tail_oracle(&sq, e.trace_value(), *l)).abs() <= 1e-12;
                    if *l >= top * (1.0 + 1e-12) {
                        ok &= *v == 0.0;
                    }
                }
                if curve.values.iter().any(|&v| v > 0.0) {
                    ok &= curve.fitted_c.is_some_and(|c| c > 0.0);
                }
                fitted[i] = curve.fitted_c;
            }
            (ok, fitted)
        })
        .collect();
    let ok = results.iter().all(|r| r.0);
    let min_c = |i: usize| {
        results
            .iter()
            .filter_map(|r| r.1[i])
            .fold(f64::INFINITY, f64::min)
    };
    let cli_ok = section(cli_report, "tail").iter().all(|r| r.passed == Some(true));
    Outcome {
        passed: ok && cli_ok,
        detail: format!(
            "300 instances, min fitted c: conditional-sc {:.4}, plain-right {:.4}, plain-left {:.4}",
            min_c(0),
            min_c(1),
            min_c(2)
        ),
    }
}

fn criterion_7() -> Outcome {
    let r = report(&["atoms-verify", "--trials", "1000", "--seed", "7"]);
    let find = |sec: &str, name: &str, q: Exponent| {
        r.rows
            .iter()
            .find(|row| row.section == sec && row.name == name && row.p == Some(q))
            .cloned()
    };
    let qs = [Exponent::Finite(1.25), Exponent::Finite(2.0), Exponent::Finite(4.0), Exponent::Inf];
    let lemma42 = max(qs
        .iter()
        .filter_map(|&q| find("crude_atom_h1", "max h1 norm of crude atoms", q)?.value));
    let conversions_ok = qs.iter().all(|&q| {
        find("pr_to_crude", "invalid crude certificates", q).is_some_and(|row| row.value == Some(0.0))
    });
    let two = Exponent::Finite(2.0);
    let coef = find("two_atom", "max coefficient sum / (sqrt2 |x|_2)", two).and_then(|r| r.value);
    let pairing = find("pairing", "max |tau(x* a)| / bmo_c(x)", two).and_then(|r| r.value);
    let ratios: Vec<String> = qs
        .iter()
        .filter_map(|&q| Some(format!("{q}: {:.4}", find("plain_atom_ratio", "max ratio", q)?.value?)))
        .collect();
    Outcome {
        passed: r.passed
            && lemma42 <= 1.0 + 1e-8
            && conversions_ok
            && coef.is_some_and(|c| c <= 1.0 + 1e-9)
            && pairing.is_some_and(|p| p <= 1.0 + 1e-9),
        detail: format!(
            "1000 trials per q: max h1 {lemma42:.10}, conversions all valid, coefficient ratio {:.10}, pairing ratio {:.6}; plain-atom max ratios {}",
            coef.unwrap_or(f64::NAN),
            pairing.unwrap_or(f64::NAN),
            ratios.join(", ")
        ),
    }
}

fn criterion_8(suite: &Report) -> Outcome {
    let l51 = section(suite, "operator_steps");
    let l52 = section(suite, "conditional_cauchy_schwarz");
    let min51 = l51.iter().filter_map(|r| r.value).fold(f64::INFINITY, f64::min);
    let max52 = max(l52.iter().filter_map(|r| r.value));
    Outcome {
        passed: l51.len() == 6
            && l52.len() == 1
            && l51.iter().chain(&l52).all(|r| r.passed == Some(true))
            && min51 >= -1e-9
            && max52 <= 1.0 + 1e-9,
        detail: format!("1000 trials each: min scaled residual {min51:.2e}, max conditional Cauchy-Schwarz ratio {max52:.12}"),
    }
}

fn criterion_9() -> Outcome {
    let input = std::env::temp_dir().join(format!("ncmart-acceptance-{}.json", std::process::id()));
    let x = random_instance(9, 0, 3);
    std::fs::write(&input, serde_json::to_string(&x.to_json()).unwrap()).unwrap();
    let input = input.to_string_lossy().into_owned();
    let commands: Vec<Vec<&str>> = vec![
        vec!["norms", &input],
        vec!["jn-verify", "--random", "--trials", "12", "--budget", "20", "--seed", "3"],
        vec!["jn-verify", "--instance", "rademacher", "--n", "3", "--budget", "20"],
        vec!["atoms-verify", "--trials", "40", "--seed", "5"],
        vec!["counterexample", "remark320"],
        vec!["counterexample", "remark39", "--n", "2,4", "--budget", "20"],
        vec!["sweep-growth", "--n", "1,2,3", "--depth", "3", "--budget", "40"],
        vec!["random-suite", "--trials", "60", "--seed", "11"],
    ];
    let pools: Vec<rayon::ThreadPool> = [1, 3]
        .iter()
        .map(|&n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap())
        .collect();
    let mut ok = true;
    for args in &commands {
        let c = cli(args);
        let outputs: Vec<(String, String)> = pools
            .iter()
            .chain(pools.iter())
            .map(|pool| {
                let r = pool.install(|| run(&c).unwrap());
                (render(&r, Format::Json), render(&r, Format::Csv))
            })
            .collect();
        ok &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    // The binary with explicit thread counts.
    let bin = env!("CARGO_BIN_EXE_ncmart");
    let args = ["atoms-verify", "--trials", "30", "--seed", "2"];
    let outs: Vec<Vec<u8>> = ["1", "3", "1"]
        .iter()
        .map(|t| {
            Process::new(bin)
                .args(args)
                .args(["--threads", t])
                .output()
                .unwrap()
                .stdout
        })
        .collect();
    ok &= !outs[0].is_empty() && outs.windows(2).all(|w| w[0] == w[1]);
    let _ = std::fs::remove_file(&input);
    Outcome {
        passed: ok,
        detail: format!(
            "{} commands x 2 runs x 2 thread counts, plus the binary at 1/3 threads: byte-identical",
            commands.len()
        ),
    }
}

fn main() {
    let suite = report(&["random-suite", "--trials", "1000", "--seed", "58"]);
    let tail_run = report(&["jn-verify", "--random", "--trials", "200", "--budget", "8", "--p", "1,3", "--seed", "6"]);
    let criteria: Vec<Criterion> = vec![
        ("rademacher row residuals and bmo_c", Box::new(criterion_1)),
        ("BMO_c_p / BMO_c_2 witness growth", Box::new(criterion_2)),
        ("p = 2 extreme-point identity", Box::new(criterion_3)),
        ("constant-free directions", Box::new(criterion_4)),
        ("Hoelder factorization contract", Box::new(|| criterion_5(&suite))),
        ("distribution tails", Box::new(|| criterion_6(&tail_run))),
        ("atom suites", Box::new(criterion_7)),
        ("operator inequality steps", Box::new(|| criterion_8(&suite))),
        ("reproducibility", Box::new(criterion_9)),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        all &= out.passed;
        println!(
            "criterion {} [{}] {name}: {} ({:.1} s)",
            i + 1,
            if out.passed { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
