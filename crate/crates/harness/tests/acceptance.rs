//! Acceptance criteria 1-11, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines appear in `cargo test` output; exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use flockbound_harness::suites::{self, Check};
use flockbound_harness::Tolerances;

fn all(parts: Vec<Check>) -> (bool, String) {
    let ok = parts.iter().all(|c| c.passed);
    let detail = parts
        .iter()
        .map(Check::line)
        .collect::<Vec<_>>()
        .join("\n      ");
    (ok, detail)
}

fn main() -> ExitCode {
    let tol = Tolerances::default();

    let t0 = Instant::now();
    let preset = suites::run_all(&suites::preset_scenarios(&tol));
    let preset_secs = t0.elapsed().as_secs_f64();
    let random = suites::run_all(&suites::random_scenarios(100, &tol));
    let truncated = suites::truncated_runs(&tol);

    let criteria: Vec<(u32, &str, Vec<Check>)> = vec![
        (
            1,
            "closed-form two-agent oracle",
            vec![suites::oracle_check(&tol)],
        ),
        (
            2,
            "flocking-time bound audit",
            vec![suites::bound_check(&preset, preset_secs)],
        ),
        (
            3,
            "monotonicity suite",
            vec![suites::monotonicity_check(&random)],
        ),
        (
            4,
            "conservation",
            vec![suites::conservation_check(&random, &truncated)],
        ),
        (
            5,
            "envelope domination",
            vec![suites::envelope_check(&preset, &tol)],
        ),
        (
            6,
            "Lyapunov functional",
            vec![suites::lyapunov_check(&[&preset, &random])],
        ),
        (
            7,
            "alpha ordering and switching structure",
            vec![
                suites::alpha_ordering_check(1, &tol),
                suites::switching_check(1, &tol),
            ],
        ),
        (
            8,
            "truncation-size independence",
            vec![suites::n_independence_check(&[10, 50, 200], &tol)],
        ),
        (
            9,
            "growth and Hölder audits",
            vec![suites::growth_check(200), suites::holder_check(200)],
        ),
        (
            10,
            "conditional regime",
            vec![suites::conditional_regime_check()],
        ),
        (11, "integrator order", vec![suites::order_check()]),
    ];

    let mut failures = 0;
    for (id, title, parts) in criteria {
        let (ok, detail) = all(parts);
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {}: {title}\n      {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} of 11 criteria pass ({:.1} s)",
        11 - failures,
        t0.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
