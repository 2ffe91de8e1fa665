//! Verification batteries. Each function runs one property suite and returns
//! a [`Check`] with the measured worst case and the tolerance it was held to.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use flockbound::diagnostics::{CONSERVATION_TOL, LYAPUNOV_TOL, MONOTONE_TOL};
use flockbound::dynamics::{field_growth_check, integrate_fixed};
use flockbound::kernels::{make_power_law_profile, truncate_infinite_profile, InfiniteProfile};
use flockbound::theory::{alignment_time, decay_envelope, holder_audit, sup_norm, Alignment};
use flockbound::{
    flocking_time_bound, InitialEnvelope, KernelSpec, Network, ParticleState, SenderProfile,
    SimParams, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::SCHEMA;
use crate::run::{mean_velocity_report, run, run_with, sweep_alpha, RunSummary, BOUND_TOL};
use crate::scenario::{draw_initial, Scenario, Switching, Tolerances};
use crate::HarnessError;

/// Seed of every randomized battery.
pub const BATTERY_SEED: u64 = 0x5eed_f10c;

pub const ORACLE_REL_TOL: f64 = 0.01;
pub const ORACLE_BUDGET_S: f64 = 1.0;
pub const AUDIT_BUDGET_S: f64 = 120.0;
pub const APPENDIX_BUDGET_S: f64 = 10.0;
pub const ENVELOPE_EQ_TOL: f64 = 1e-6;
pub const ARCTAN_TOL: f64 = 1e-6;
pub const ORDER_RATIO_MIN: f64 = 7.2;
pub const ALIGN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn new(
        name: &str,
        passed: bool,
        measured: f64,
        tolerance: f64,
        detail: String,
        start: Instant,
    ) -> Self {
        Self {
            name: name.to_string(),
            passed,
            measured,
            tolerance,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn failed(name: &str, err: &HarnessError, start: Instant) -> Self {
        Self::new(
            name,
            false,
            f64::NAN,
            f64::NAN,
            format!("{}: {err}", err.kind()),
            start,
        )
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.3e}, tolerance {:.3e} ({:.2} s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(checks: Vec<Check>) -> Self {
        let mut warnings = Vec::new();
        if checks.is_empty() {
            warnings.push("no checks were run".to_string());
        }
        Self {
            schema: SCHEMA,
            passed: checks.iter().all(|c| c.passed),
            checks,
            warnings,
        }
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Two agents, `psi = 1`, `m = (1/2, 1/2)`, `alpha = 1/2`: `D' = -kappa D^(1/2)`,
/// so `t_f = 2 sqrt(D0) / kappa`.
pub fn two_agent_oracle(
    kappa: f64,
    d0: f64,
    tol: &Tolerances,
) -> Result<(Trajectory, RunSummary), HarnessError> {
    let scenario = Scenario {
        n: 2,
        d: 1,
        alpha: 0.5,
        beta: 0.0,
        kappa,
        t_max: Some(5.0),
        tolerances: *tol,
        ..Scenario::default()
    };
    let initial = ParticleState::new(0.0, 2, 1, vec![0.0, 0.0], vec![0.0, d0])?;
    run_with(
        &scenario,
        &initial,
        Network::Fixed(SenderProfile::uniform(2)?),
    )
}

pub fn oracle_check(tol: &Tolerances) -> Check {
    let start = Instant::now();
    let name = "two-agent closed-form flocking time";
    let mut rel = 0.0f64;
    let mut slowest = 0.0f64;
    let mut detail = Vec::new();
    for (kappa, d0) in [(1.0, 1.0), (2.0, 4.0)] {
        let t0 = Instant::now();
        let tf = match two_agent_oracle(kappa, d0, tol) {
            Ok((_, s)) => s.observed_t_f,
            Err(e) => return Check::failed(name, &e, start),
        };
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        let err = tf.map_or(f64::INFINITY, |t| (t - 2.0).abs() / 2.0);
        rel = rel.max(err);
        detail.push(format!("kappa={kappa} D0={d0}: t_f={tf:?}"));
    }
    detail.push(format!("slowest run {slowest:.3} s"));
    let passed = rel <= ORACLE_REL_TOL && slowest < ORACLE_BUDGET_S;
    Check::new(name, passed, rel, ORACLE_REL_TOL, detail.join("; "), start)
}

/// Twenty reference-preset scenarios, `alpha` cycling through `0.1, ..., 0.9`,
/// horizon `1.05 * t_f_bound`.
pub fn preset_scenarios(tol: &Tolerances) -> Vec<Scenario> {
    (0..20u64)
        .map(|i| Scenario {
            seed: 1 + i,
            alpha: 0.1 * (1 + i % 9) as f64,
            t_max: None,
            tolerances: *tol,
            ..Scenario::default()
        })
        .collect()
}

pub type Outcome = Result<(Trajectory, RunSummary), HarnessError>;

pub fn run_all(scenarios: &[Scenario]) -> Vec<Outcome> {
    scenarios.par_iter().map(run).collect()
}

fn successes(outcomes: &[Outcome]) -> Result<Vec<&RunSummary>, Check> {
    let start = Instant::now();
    outcomes
        .iter()
        .map(|o| o.as_ref().map(|(_, s)| s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Check::failed("run", e, start))
}

fn renamed(mut c: Check, name: &str) -> Check {
    c.name = name.to_string();
    c
}

/// Observed flocking time below the bound and `D_x <= Dx_infty` on every run.
pub fn bound_check(outcomes: &[Outcome], elapsed: f64) -> Check {
    let start = Instant::now();
    let name = "flocking-time and position bounds on reference-preset runs";
    let runs = match successes(outcomes) {
        Ok(r) => r,
        Err(c) => return renamed(c, name),
    };
    let mut ratio = 0.0f64;
    let mut missing = 0;
    for s in &runs {
        match (s.observed_t_f, s.t_f_bound) {
            (Some(tf), Some(b)) => ratio = ratio.max(tf / b),
            _ => missing += 1,
        }
    }
    let dx_excess = worst(
        runs.iter()
            .map(|s| s.dx_bound_excess.unwrap_or(f64::INFINITY)),
    );
    let passed = runs.len() >= 20
        && missing == 0
        && ratio <= 1.0
        && dx_excess <= BOUND_TOL
        && elapsed < AUDIT_BUDGET_S;
    let detail = format!(
        "{} runs, max t_f/bound {ratio:.4}, max Dx - Dx_infty {dx_excess:.3e}, {missing} without t_f or bound, {elapsed:.1} s total",
        runs.len()
    );
    Check::new(name, passed, ratio, 1.0, detail, start)
}

/// `D_v^(k)` below its decay envelope on the preset runs, and equal to it on
/// the two-agent oracle.
pub fn envelope_check(outcomes: &[Outcome], tol: &Tolerances) -> Check {
    let start = Instant::now();
    let name = "decay envelope domination";
    let runs = match successes(outcomes) {
        Ok(r) => r,
        Err(c) => return renamed(c, name),
    };
    let margin = runs
        .iter()
        .map(|s| s.envelope_worst_margin)
        .fold(f64::INFINITY, f64::min);
    let (traj, _) = match two_agent_oracle(1.0, 1.0, tol) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, &e, start),
    };
    let first = &traj.samples[0];
    let env = match decay_envelope(
        1.0,
        0.5,
        1.0,
        &KernelSpec::constant(),
        InitialEnvelope::from_state(&first.state),
    ) {
        Ok(e) => e,
        Err(e) => return Check::failed(name, &e.into(), start),
    };
    let gap = worst(traj.frames().map(|f| (f.dv[0] - env.at(f.t)).abs()));
    let passed = margin >= -BOUND_TOL && gap <= ENVELOPE_EQ_TOL;
    let detail = format!(
        "worst margin {margin:.3e} over {} runs, oracle gap {gap:.3e}",
        runs.len()
    );
    Check::new(name, passed, -margin, BOUND_TOL, detail, start)
}

/// Random scenarios: `n <= 100`, `d <= 3`, `beta in [0, 1]`, a third of them
/// switching, horizon 3.
pub fn random_scenarios(count: usize, tol: &Tolerances) -> Vec<Scenario> {
    let mut rng = ChaCha20Rng::seed_from_u64(BATTERY_SEED);
    (0..count)
        .map(|i| Scenario {
            n: rng.gen_range(2..=100),
            d: rng.gen_range(1..=3),
            alpha: rng.gen_range(0.1..0.9),
            beta: rng.gen_range(0.0..=1.0),
            kappa: rng.gen_range(0.5..2.0),
            p: rng.gen_range(0.0..3.0),
            rx: rng.gen_range(0.5..5.0),
            rv: rng.gen_range(0.1..2.0),
            seed: rng.gen(),
            t_max: Some(3.0),
            switching: (i % 3 == 2).then(|| Switching {
                period: rng.gen_range(0.3..1.5),
                seed: rng.gen(),
            }),
            tolerances: *tol,
        })
        .collect()
}

/// Componentwise diameters non-increasing, maxima non-increasing, minima
/// non-decreasing between consecutive samples.
pub fn monotonicity_check(outcomes: &[Outcome]) -> Check {
    let start = Instant::now();
    let name = "componentwise diameter, maximum and minimum monotonicity";
    let runs = match successes(outcomes) {
        Ok(r) => r,
        Err(c) => return renamed(c, name),
    };
    let v = worst(runs.iter().map(|s| s.max_monotonicity_violation));
    let bad = runs
        .iter()
        .filter(|s| s.max_monotonicity_violation > MONOTONE_TOL)
        .count();
    let passed = v <= MONOTONE_TOL;
    Check::new(
        name,
        passed,
        v,
        MONOTONE_TOL,
        format!("{} runs, {bad} with violations", runs.len()),
        start,
    )
}

/// Truncated infinite profiles with a positive tail.
pub fn truncated_runs(tol: &Tolerances) -> Vec<Outcome> {
    let sources = [
        (InfiniteProfile::Geometric { ratio: 0.5 }, 1e-3),
        (InfiniteProfile::Geometric { ratio: 0.8 }, 1e-2),
        (InfiniteProfile::PowerLaw { p: 2.0 }, 2e-2),
        (InfiniteProfile::PowerLaw { p: 3.0 }, 1e-3),
    ];
    sources
        .par_iter()
        .enumerate()
        .map(|(i, &(src, eps))| {
            let profile = truncate_infinite_profile(src, eps)?;
            let scenario = Scenario {
                n: profile.len(),
                d: 1 + i % 2,
                alpha: 0.5,
                seed: 100 + i as u64,
                t_max: Some(3.0),
                tolerances: *tol,
                ..Scenario::default()
            };
            let initial = draw_initial(&scenario);
            run_with(&scenario, &initial, Network::Fixed(profile))
        })
        .collect()
}

/// `v_c` constant on fixed sender profiles, drift bounded by the tail mass on
/// truncated ones.
pub fn conservation_check(fixed: &[Outcome], truncated: &[Outcome]) -> Check {
    let start = Instant::now();
    let name = "mean-velocity conservation";
    let (fixed, truncated) = match (successes(fixed), successes(truncated)) {
        (Ok(f), Ok(t)) => (f, t),
        (Err(c), _) | (_, Err(c)) => return renamed(c, name),
    };
    let fixed: Vec<_> = fixed
        .into_iter()
        .filter(|s| s.scenario.switching.is_none())
        .collect();
    let drift = worst(fixed.iter().map(|s| s.max_vc_drift));
    let excess = worst(
        truncated
            .iter()
            .map(|s| s.max_vc_drift - s.vc_drift_allowance),
    );
    let passed =
        drift <= CONSERVATION_TOL && excess <= 0.0 && !fixed.is_empty() && !truncated.is_empty();
    let detail = format!(
        "{} fixed-profile runs, {} truncated runs, truncated drift minus allowance {excess:.3e}",
        fixed.len(),
        truncated.len()
    );
    Check::new(name, passed, drift, CONSERVATION_TOL, detail, start)
}

/// `L(t)` non-increasing on fixed-network runs.
pub fn lyapunov_check(outcomes: &[&[Outcome]]) -> Check {
    let start = Instant::now();
    let name = "Lyapunov functional non-increasing";
    let mut runs = Vec::new();
    for o in outcomes {
        match successes(o) {
            Ok(r) => runs.extend(r.into_iter().filter(|s| s.scenario.switching.is_none())),
            Err(c) => return renamed(c, name),
        }
    }
    let v = worst(runs.iter().map(|s| s.max_lyapunov_violation));
    Check::new(
        name,
        v <= LYAPUNOV_TOL,
        v,
        LYAPUNOV_TOL,
        format!("{} fixed-network runs", runs.len()),
        start,
    )
}

/// Flocking times strictly increasing along `alpha = 0.1, 0.4, 0.8`.
pub fn alpha_ordering_check(seed: u64, tol: &Tolerances) -> Check {
    let start = Instant::now();
    let name = "flocking time increases with alpha";
    let scenario = Scenario {
        seed,
        tolerances: *tol,
        ..Scenario::default()
    };
    let rows = match sweep_alpha(&scenario, &[0.1, 0.4, 0.8]) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, &e, start),
    };
    let tfs: Vec<Option<f64>> = rows.iter().map(|(_, s)| s.observed_t_f).collect();
    let times: Option<Vec<f64>> = tfs.iter().copied().collect();
    let (passed, gap) = match &times {
        Some(t) => {
            let gap = t
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            (gap > 0.0, gap)
        }
        None => (false, f64::NAN),
    };
    let detail = format!("seed {seed}: t_f = {tfs:?}");
    Check::new(name, passed, gap, 0.0, detail, start)
}

/// Integer-period switching: `v_c` piecewise constant, jumps only at switch
/// instants, velocities aligned to `v_c(t_f)` afterwards.
pub fn switching_check(seed: u64, tol: &Tolerances) -> Check {
    let start = Instant::now();
    let name = "switching mean velocity structure";
    let scenario = Scenario {
        seed,
        switching: Some(Switching { period: 1.0, seed }),
        tolerances: *tol,
        ..Scenario::default()
    };
    let (traj, summary) = match run(&scenario) {
        Ok(r) => r,
        Err(e) => return Check::failed(name, &e, start),
    };
    let rep = mean_velocity_report(&traj);
    let tf = summary.observed_t_f;
    let before = tf.unwrap_or(f64::INFINITY);
    let misplaced = rep
        .jumps
        .iter()
        .filter(|(t, j)| {
            *j > CONSERVATION_TOL && (t.fract() != 0.0 || !rep.switch_times.contains(t))
        })
        .count();
    let visible = rep
        .jumps
        .iter()
        .filter(|&&(t, j)| t <= before && j > 1e-6)
        .count();
    let align = rep.alignment_error.unwrap_or(f64::INFINITY);
    let passed = rep.max_drift_within_intervals <= CONSERVATION_TOL
        && misplaced == 0
        && visible > 0
        && align <= ALIGN_TOL
        && summary.ok;
    let detail = format!(
        "t_f {tf:?}, {visible} visible jumps before t_f, {misplaced} off-instant jumps, alignment error {align:.3e}, audits {}",
        if summary.ok { "ok" } else { "failed" }
    );
    Check::new(
        name,
        passed,
        rep.max_drift_within_intervals,
        CONSERVATION_TOL,
        detail,
        start,
    )
}

/// One geometric profile truncated at several sizes, initial data with the
/// same diameters `2 rx`, `2 rv`.
pub fn n_independence_check(sizes: &[usize], tol: &Tolerances) -> Check {
    let start = Instant::now();
    let name = "bound independent of the truncation size";
    let base = Scenario {
        alpha: 0.5,
        seed: 2,
        tolerances: *tol,
        ..Scenario::default()
    };
    let outcomes: Vec<Result<(f64, Option<f64>), HarnessError>> = sizes
        .par_iter()
        .map(|&n| {
            let ratio: f64 = 0.5;
            let weights: Vec<f64> = (0..n)
                .map(|j| (1.0 - ratio) * ratio.powi(j as i32))
                .collect();
            let profile = SenderProfile::explicit_with_tail(weights, ratio.powi(n as i32))?;
            let scenario = Scenario { n, ..base.clone() };
            let drawn = draw_initial(&scenario);
            let (mut x, mut v) = (drawn.x().to_vec(), drawn.v().to_vec());
            // pin the extremes so every truncation starts from the same diameters
            x[0] = -scenario.rx;
            v[0] = -scenario.rv;
            x[n - 1] = scenario.rx;
            v[n - 1] = scenario.rv;
            let initial = ParticleState::new(0.0, n, 1, x, v)?;
            let bound = flocking_time_bound(
                InitialEnvelope::from_state(&initial),
                &initial.component_diameters(),
                scenario.alpha,
                scenario.kappa,
                &scenario.kernel()?,
            )?
            .t_f_bound
            .ok_or_else(|| {
                HarnessError::Config("no finite bound for the truncation check".into())
            })?;
            let (_, summary) = run_with(&scenario, &initial, Network::Fixed(profile))?;
            Ok((bound, summary.observed_t_f))
        })
        .collect();
    let mut results = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(e) => return Check::failed(name, &e, start),
        }
    }
    let bound = results[0].0;
    let identical = results.iter().all(|r| r.0.to_bits() == bound.to_bits());
    let ratio = worst(
        results
            .iter()
            .map(|r| r.1.map_or(f64::INFINITY, |t| t / bound)),
    );
    let passed = identical && ratio < 1.0;
    let detail = format!(
        "sizes {sizes:?}, bound {bound:.6}, identical {identical}, t_f {:?}",
        results.iter().map(|r| r.1).collect::<Vec<_>>()
    );
    Check::new(name, passed, ratio, 1.0, detail, start)
}

/// Growth bound on random one-dimensional states.
pub fn growth_check(count: usize) -> Check {
    let start = Instant::now();
    let name = "vector-field growth bound";
    let mut rng = ChaCha20Rng::seed_from_u64(BATTERY_SEED ^ 1);
    let mut ratio = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(1..=60);
        let r = rng.gen_range(0.1..10.0);
        let x = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        let v = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        let alpha = rng.gen_range(0.05..0.95);
        let kappa = rng.gen_range(0.1..3.0);
        let res = ParticleState::new(0.0, n, 1, x, v)
            .and_then(|s| {
                Ok((
                    s,
                    KernelSpec::cucker_smale(rng.gen_range(0.0..2.0))?,
                    make_power_law_profile(n, rng.gen_range(0.0..3.0))?,
                ))
            })
            .and_then(|(s, k, p)| field_growth_check(&s, &p, &k, kappa, alpha));
        match res {
            Ok(g) => ratio = ratio.max(g.lhs / g.rhs.max(f64::MIN_POSITIVE)),
            Err(e) => return Check::failed(name, &e.into(), start),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = ratio <= 1.0 + 1e-12 && secs < APPENDIX_BUDGET_S;
    Check::new(
        name,
        passed,
        ratio,
        1.0,
        format!("{count} states, max lhs/rhs"),
        start,
    )
}

/// Hölder estimate on random pairs inside the ball of radius `r0`.
pub fn holder_check(count: usize) -> Check {
    let start = Instant::now();
    let name = "Hölder estimate of the vector field";
    let mut rng = ChaCha20Rng::seed_from_u64(BATTERY_SEED ^ 2);
    let mut ratio = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(1..=40);
        let d = rng.gen_range(1..=3);
        let r0 = rng.gen_range(0.2..5.0);
        // each row has Euclidean norm at most r0 / 2, so the sup norm stays below r0
        let c = 0.5 * r0 / (d as f64).sqrt();
        let draw = |rng: &mut ChaCha20Rng| -> Vec<f64> {
            (0..n * d).map(|_| rng.gen_range(-c..=c)).collect()
        };
        let (ux, uv, wx, wv) = (
            draw(&mut rng),
            draw(&mut rng),
            draw(&mut rng),
            draw(&mut rng),
        );
        let alpha = rng.gen_range(0.05..0.95);
        let kappa = rng.gen_range(0.1..3.0);
        let beta = rng.gen_range(0.0..2.0);
        let p = rng.gen_range(0.0..3.0);
        let res = (|| {
            let u = ParticleState::new(0.0, n, d, ux, uv)?;
            let w = ParticleState::new(0.0, n, d, wx, wv)?;
            debug_assert!(sup_norm(&u) <= r0 && sup_norm(&w) <= r0);
            holder_audit(
                &u,
                &w,
                &make_power_law_profile(n, p)?,
                &KernelSpec::cucker_smale(beta)?,
                kappa,
                alpha,
                r0,
            )
        })();
        match res {
            Ok(h) => ratio = ratio.max(h.lhs / h.rhs.max(f64::MIN_POSITIVE)),
            Err(e) => return Check::failed(name, &e.into(), start),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = ratio <= 1.0 && secs < APPENDIX_BUDGET_S;
    Check::new(
        name,
        passed,
        ratio,
        1.0,
        format!("{count} pairs, max lhs/rhs"),
        start,
    )
}

/// `beta = 1`, `a = 0`, `b = 1`: `int_0^inf psi(s) ds = pi/2`, below the
/// required `D0^(1/2) / (1/2) = 4` for `D0 = 4`.
pub fn conditional_regime_check() -> Check {
    let start = Instant::now();
    let name = "no finite-time guarantee for an integrable kernel";
    let res = KernelSpec::cucker_smale(1.0)
        .and_then(|k| alignment_time(4.0, 0.5, 1.0, &k, InitialEnvelope::new(0.0, 1.0)?));
    match res {
        Ok(Alignment::NoGuarantee {
            reachable,
            required,
        }) => {
            let err = (reachable - FRAC_PI_2).abs();
            let detail = format!("reachable {reachable:.12}, required {required}");
            Check::new(
                name,
                err <= ARCTAN_TOL && required > FRAC_PI_2,
                err,
                ARCTAN_TOL,
                detail,
                start,
            )
        }
        Ok(other) => Check::new(
            name,
            false,
            f64::NAN,
            ARCTAN_TOL,
            format!("got {other:?}"),
            start,
        ),
        Err(e) => Check::failed(name, &e.into(), start),
    }
}

/// Error ratio of the fixed-step Dormand-Prince solution of the two-agent
/// oracle under step halving, on `[0, 1.3]` where `D >= 0.1`.
pub fn order_check() -> Check {
    let start = Instant::now();
    let name = "integrator convergence order";
    let exact = |t: f64| (1.0 - 0.5 * t).powi(2);
    let res = (|| {
        let state = ParticleState::new(0.0, 2, 1, vec![0.0, 0.0], vec![0.0, 1.0])?;
        let params = SimParams::new(
            1.0,
            0.5,
            KernelSpec::constant(),
            Network::Fixed(SenderProfile::uniform(2)?),
            5.0,
        );
        let err = |h: f64, steps: usize| -> flockbound::Result<f64> {
            Ok(worst(
                integrate_fixed(&state, &params, h, steps)?
                    .iter()
                    .map(|s| ((s.v()[1] - s.v()[0]) - exact(s.t())).abs()),
            ))
        };
        Ok::<_, flockbound::Error>(err(0.1, 13)? / err(0.05, 26)?)
    })();
    match res {
        Ok(ratio) => Check::new(
            name,
            ratio >= ORDER_RATIO_MIN,
            ratio,
            ORDER_RATIO_MIN,
            "h = 0.1 vs 0.05".into(),
            start,
        ),
        Err(e) => Check::failed(name, &e.into(), start),
    }
}

/// Every suite, in the order of the acceptance criteria.
pub fn default_battery(tol: &Tolerances) -> Vec<Check> {
    let preset_start = Instant::now();
    let preset = run_all(&preset_scenarios(tol));
    let preset_secs = preset_start.elapsed().as_secs_f64();
    let random = run_all(&random_scenarios(100, tol));
    let truncated = truncated_runs(tol);
    vec![
        oracle_check(tol),
        bound_check(&preset, preset_secs),
        monotonicity_check(&random),
        conservation_check(&random, &truncated),
        envelope_check(&preset, tol),
        lyapunov_check(&[&preset, &random]),
        alpha_ordering_check(1, tol),
        switching_check(1, tol),
        n_independence_check(&[10, 50, 200], tol),
        growth_check(200),
        holder_check(200),
        conditional_regime_check(),
        order_check(),
    ]
}

/// One check per scenario: the run completes and passes all audits.
pub fn batch(scenarios: &[Scenario]) -> Vec<Check> {
    scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let start = Instant::now();
            let name = format!("scenario {i} (seed {})", s.seed);
            match run(s) {
                Ok((_, summary)) => {
                    let detail = if summary.ok {
                        "all audits pass".to_string()
                    } else {
                        summary.violations.join("; ")
                    };
                    Check::new(
                        &name,
                        summary.ok,
                        summary.max_monotonicity_violation,
                        MONOTONE_TOL,
                        detail,
                        start,
                    )
                }
                Err(e) => Check::failed(&name, &e, start),
            }
        })
        .collect()
}

/// `[[scenario]]` tables in TOML, or `{"scenario": [...]}` in JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Batch {
    #[serde(default)]
    pub scenario: Vec<Scenario>,
}

impl Batch {
    pub fn parse(text: &str, json: bool) -> Result<Self, HarnessError> {
        let b: Self = if json {
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?
        };
        for s in &b.scenario {
            s.validate()?;
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_checks_pass() {
        for c in [
            conditional_regime_check(),
            order_check(),
            oracle_check(&Tolerances::default()),
        ] {
            assert!(c.passed, "{}", c.line());
        }
    }

    #[test]
    fn random_scenarios_are_valid_and_reproducible() {
        let tol = Tolerances::default();
        let a = random_scenarios(30, &tol);
        assert_eq!(a, random_scenarios(30, &tol));
        for s in &a {
            s.validate().unwrap();
            assert!(s.n <= 100 && s.d <= 3 && (0.0..=1.0).contains(&s.beta));
        }
        assert!(a.iter().any(|s| s.switching.is_some()));
        assert_eq!(preset_scenarios(&tol).len(), 20);
    }

    #[test]
    fn empty_batch_passes_with_warning() {
        let b = Batch::parse("", false).unwrap();
        let report = Report::new(batch(&b.scenario));
        assert!(report.passed);
        assert_eq!(report.warnings.len(), 1);
        let b = Batch::parse(
            "[[scenario]]\nn = 4\nt_max = 0.5\n[[scenario]]\nn = 5\nt_max = 0.5\n",
            false,
        )
        .unwrap();
        let report = Report::new(batch(&b.scenario));
        assert_eq!(report.checks.len(), 2);
        assert!(report.passed, "{report:?}");
        assert!(Batch::parse("[[scenario]]\nalpha = 2.0\n", false).is_err());
    }
}
