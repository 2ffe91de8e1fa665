use std::time::Instant;

use flockbound::diagnostics::{audit_trajectory, envelope_dominates, DX_ENVELOPE_TOL};
use flockbound::dynamics::{Event, IntegrationStats};
use flockbound::kernels::check_alpha;
use flockbound::theory::{decay_envelope, Alignment};
use flockbound::{
    flocking_time_bound, integrate, InitialEnvelope, Network, ParticleState, TheoryBounds,
    Trajectory,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::SCHEMA;
use crate::scenario::{draw_initial, Scenario, BOUND_HORIZON_FACTOR, FALLBACK_T_MAX};
use crate::HarnessError;

/// Tolerance on `D_v^(k)(t) <= envelope_k(t)` and `D_x(t) <= Dx_infty`.
pub const BOUND_TOL: f64 = 1e-6;

/// Observed quantities next to the theoretical bounds for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub n: usize,
    pub t_max: f64,
    pub observed_t_f: Option<f64>,
    pub t_f_bound: Option<f64>,
    pub alignment: Vec<Alignment>,
    #[serde(rename = "Dx_max_observed")]
    pub dx_max_observed: f64,
    #[serde(rename = "Dx_infty")]
    pub dx_infty: Option<f64>,
    /// Set when the theory module rejected the initial data.
    pub theory_error: Option<String>,
    pub max_monotonicity_violation: f64,
    pub max_vc_drift: f64,
    pub vc_drift_allowance: f64,
    pub max_lyapunov_violation: f64,
    /// `min_{k,t} (envelope_k(t) - D_v^(k)(t))`.
    pub envelope_worst_margin: f64,
    pub dx_bound_excess: Option<f64>,
    pub violations: Vec<String>,
    pub ok: bool,
    pub stats: IntegrationStats,
    pub wall_time: f64,
}

impl RunSummary {
    /// Numerical failure of the theory (unattainable or degenerate bound).
    pub fn theory_failed(&self) -> bool {
        self.theory_error.is_some()
    }
}

/// Draws the seeded initial data and runs the scenario on its power-law network.
pub fn run(scenario: &Scenario) -> Result<(Trajectory, RunSummary), HarnessError> {
    scenario.validate()?;
    let initial = draw_initial(scenario);
    run_with(scenario, &initial, scenario.network()?)
}

/// Runs from given initial data and network; `scenario` supplies the model
/// constants, tolerances and horizon.
pub fn run_with(
    scenario: &Scenario,
    initial: &ParticleState,
    network: Network,
) -> Result<(Trajectory, RunSummary), HarnessError> {
    scenario.validate()?;
    let start = Instant::now();
    let kernel = scenario.kernel()?;
    let env = InitialEnvelope::from_state(initial);
    let dv0 = initial.component_diameters();
    let theory = flocking_time_bound(env, &dv0, scenario.alpha, scenario.kappa, &kernel);

    let t_max = scenario.t_max.unwrap_or(match &theory {
        Ok(TheoryBounds {
            t_f_bound: Some(b), ..
        }) if *b > 0.0 => BOUND_HORIZON_FACTOR * b,
        _ => FALLBACK_T_MAX,
    });
    let mut params = scenario.sim_params(t_max)?;
    params.network = network;
    params.validate()?;
    let mut traj = integrate(initial, &params)?;
    traj.seed = Some(scenario.seed);

    let audit = audit_trajectory(&traj);
    let frames: Vec<_> = traj.frames().cloned().collect();
    let envelopes = dv0
        .iter()
        .map(|&d| decay_envelope(d, scenario.alpha, scenario.kappa, &kernel, env))
        .collect::<flockbound::Result<Vec<_>>>()?;
    let envelope = envelope_dominates(&frames, &envelopes, BOUND_TOL);
    let dx_max_observed = frames.iter().map(|f| f.dx).fold(0.0, f64::max);
    let observed_t_f = traj.flocking_time();

    let mut violations = Vec::new();
    let mut flag = |ok: bool, what: &str| {
        if !ok {
            violations.push(what.to_string());
        }
    };
    flag(audit.diameter.ok, "velocity diameter increased");
    flag(audit.upper.ok, "component maximum increased");
    flag(audit.lower.ok, "component minimum decreased");
    flag(audit.sup_norm.ok, "velocity sup-norm increased");
    flag(
        audit.vc_drift <= audit.vc_drift_allowance,
        "mean velocity drifted",
    );
    flag(
        audit.dx_envelope_excess <= DX_ENVELOPE_TOL,
        "position diameter outgrew Dx0 + t sum Dv0",
    );
    flag(audit.lyapunov.ok, "Lyapunov functional increased");
    flag(
        audit.post_snap_velocity_spread == 0.0,
        "velocities differ after the snap",
    );
    flag(envelope.ok, "velocity diameter above the decay envelope");

    let (t_f_bound, alignment, dx_infty, theory_error) = match &theory {
        Ok(b) => (b.t_f_bound, b.alignment.clone(), Some(b.dx_infty), None),
        Err(e) => (None, Vec::new(), None, Some(e.to_string())),
    };
    let dx_bound_excess = dx_infty.map(|b| dx_max_observed - b);
    if let Some(excess) = dx_bound_excess {
        flag(excess <= BOUND_TOL, "position diameter above Dx_infty");
    }
    if let (Some(tf), Some(bound)) = (observed_t_f, t_f_bound) {
        flag(tf <= bound, "observed flocking time exceeds the bound");
    }

    let summary = RunSummary {
        schema: SCHEMA,
        scenario: scenario.clone(),
        seed: scenario.seed,
        n: initial.n(),
        t_max,
        observed_t_f,
        t_f_bound,
        alignment,
        dx_max_observed,
        dx_infty,
        theory_error,
        max_monotonicity_violation: audit
            .diameter
            .max_violation
            .max(audit.upper.max_violation)
            .max(audit.lower.max_violation),
        max_vc_drift: audit.vc_drift,
        vc_drift_allowance: audit.vc_drift_allowance,
        max_lyapunov_violation: audit.lyapunov.max_violation,
        envelope_worst_margin: envelope
            .worst_margin
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        dx_bound_excess,
        ok: violations.is_empty(),
        violations,
        stats: traj.stats,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((traj, summary))
}

/// One row of an alpha sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub observed_t_f: Option<f64>,
    pub t_f_bound: Option<f64>,
    #[serde(rename = "Dx_max_observed")]
    pub dx_max_observed: f64,
    #[serde(rename = "Dx_infty")]
    pub dx_infty: Option<f64>,
    pub ok: bool,
}

impl From<&RunSummary> for SweepRow {
    fn from(s: &RunSummary) -> Self {
        Self {
            alpha: s.scenario.alpha,
            observed_t_f: s.observed_t_f,
            t_f_bound: s.t_f_bound,
            dx_max_observed: s.dx_max_observed,
            dx_infty: s.dx_infty,
            ok: s.ok,
        }
    }
}

/// Runs the scenario once per alpha, in parallel, with the shared seed.
/// Results come back in input order.
pub fn sweep_alpha(
    scenario: &Scenario,
    alphas: &[f64],
) -> Result<Vec<(Trajectory, RunSummary)>, HarnessError> {
    if alphas.is_empty() {
        return Err(HarnessError::Config("alpha list is empty".into()));
    }
    for &a in alphas {
        check_alpha(a)
            .map_err(|_| HarnessError::Config(format!("alpha must lie in (0, 1), got {a}")))?;
    }
    alphas
        .par_iter()
        .map(|&alpha| {
            run(&Scenario {
                alpha,
                ..scenario.clone()
            })
        })
        .collect()
}

/// Structure of the weighted mean velocity along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVelocityReport {
    /// Largest change of `v_c` between samples of the same switching interval.
    pub max_drift_within_intervals: f64,
    /// `(t, |jump|)` for every sample that starts a new interval.
    pub jumps: Vec<(f64, f64)>,
    /// Times of the switch events.
    pub switch_times: Vec<f64>,
    /// `max_{i, t >= t_f} |v_i(t) - v_c(t_f)|`, when flocking was observed.
    pub alignment_error: Option<f64>,
}

pub fn mean_velocity_report(traj: &Trajectory) -> MeanVelocityReport {
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let mut max_drift = 0.0f64;
    let mut jumps = Vec::new();
    for w in traj.samples.windows(2) {
        let step = dist(&w[1].frame.vc, &w[0].frame.vc);
        if w[1].interval == w[0].interval {
            max_drift = max_drift.max(step);
        } else {
            jumps.push((w[1].frame.t, step));
        }
    }
    let switch_times = traj
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Switch { t, .. } => Some(*t),
            _ => None,
        })
        .collect();
    let alignment_error = traj.flocking_time().map(|tf| {
        let at_tf = traj
            .samples
            .iter()
            .find(|s| s.frame.t >= tf)
            .unwrap_or_else(|| traj.samples.last().expect("trajectories are never empty"));
        let vc = &at_tf.frame.vc;
        traj.samples
            .iter()
            .filter(|s| s.frame.t >= tf)
            .flat_map(|s| (0..s.state.n()).map(move |i| dist(s.state.v_row(i), vc)))
            .fold(0.0, f64::max)
    });
    MeanVelocityReport {
        max_drift_within_intervals: max_drift,
        jumps,
        switch_times,
        alignment_error,
    }
}

/// Runs a switching scenario and renders every velocity with `v_c` overlaid.
pub fn switching_demo(
    scenario: &Scenario,
) -> Result<(Trajectory, RunSummary, String), HarnessError> {
    if scenario.switching.is_none() {
        return Err(HarnessError::Config(
            "switching demo needs a switching configuration".into(),
        ));
    }
    let (traj, summary) = run(scenario)?;
    let svg = crate::plot::velocities(&traj, 0);
    Ok((traj, summary, svg))
}
