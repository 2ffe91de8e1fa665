//! Observables along a trajectory and the audits built on them.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Event, ParticleState, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SenderProfile};
use crate::theory::{psi_integral, velocity_energy, DecayEnvelope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFrame {
    pub t: f64,
    /// `M^(k) = sup_i v_i^k`.
    #[serde(rename = "M")]
    pub max: Vec<f64>,
    /// `m^(k) = inf_i v_i^k`.
    #[serde(rename = "m")]
    pub min: Vec<f64>,
    #[serde(rename = "Dv")]
    pub dv: Vec<f64>,
    #[serde(rename = "Dx")]
    pub dx: f64,
    /// `sum_i m_i v_i` with the active profile.
    pub vc: Vec<f64>,
    /// `Psi(D_x) + sum_k (D_v^(k))^(2-alpha) / (kappa (2-alpha))`.
    pub lyap: f64,
}

/// Compensated (Kahan) summation.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `v_c = sum_i m_i v_i`, compensated per component.
pub fn weighted_mean_velocity(state: &ParticleState, profile: &SenderProfile) -> Vec<f64> {
    let d = state.d();
    (0..d)
        .map(|k| {
            kahan_sum(
                profile
                    .weights()
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m * state.v()[i * d + k]),
            )
        })
        .collect()
}

pub fn frame(
    state: &ParticleState,
    profile: &SenderProfile,
    kernel: &KernelSpec,
    kappa: f64,
    alpha: f64,
) -> Result<DiagnosticsFrame> {
    if profile.len() != state.n() {
        return Err(Error::Shape(format!(
            "profile has {} senders but the state has {} agents",
            profile.len(),
            state.n()
        )));
    }
    Ok(frame_unchecked(state, profile, kernel, kappa, alpha))
}

pub(crate) fn frame_unchecked(
    state: &ParticleState,
    profile: &SenderProfile,
    kernel: &KernelSpec,
    kappa: f64,
    alpha: f64,
) -> DiagnosticsFrame {
    let d = state.d();
    let mut max = vec![f64::NEG_INFINITY; d];
    let mut min = vec![f64::INFINITY; d];
    for row in state.v().chunks(d) {
        for k in 0..d {
            max[k] = max[k].max(row[k]);
            min[k] = min[k].min(row[k]);
        }
    }
    let dv: Vec<f64> = max.iter().zip(&min).map(|(a, b)| a - b).collect();
    let dx = state.position_diameter();
    let lyap = psi_integral(kernel, dx) + velocity_energy(&dv, alpha, kappa);
    DiagnosticsFrame {
        t: state.t(),
        vc: weighted_mean_velocity(state, profile),
        max,
        min,
        dv,
        dx,
        lyap,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// Per component, `min_t (envelope_k(t) - D_v^(k)(t))`; negative values
    /// are violations.
    pub worst_margin: Vec<f64>,
    pub tol: f64,
    pub ok: bool,
}

/// Checks `D_v^(k)(t) <= envelope_k(t) + tol` on every frame.
pub fn envelope_dominates(
    frames: &[DiagnosticsFrame],
    envelopes: &[DecayEnvelope],
    tol: f64,
) -> EnvelopeReport {
    let mut worst_margin = vec![f64::INFINITY; envelopes.len()];
    for f in frames {
        for (k, env) in envelopes.iter().enumerate() {
            let t = f.t - frames[0].t;
            worst_margin[k] = worst_margin[k].min(env.at(t) - f.dv[k]);
        }
    }
    let ok = worst_margin.iter().all(|m| *m >= -tol);
    EnvelopeReport {
        worst_margin,
        tol,
        ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    /// Largest increase between consecutive frames (zero when none).
    pub max_violation: f64,
    pub pairs: usize,
    pub tol: f64,
    pub ok: bool,
}

impl MonotoneReport {
    fn new(tol: f64) -> Self {
        Self {
            max_violation: 0.0,
            pairs: 0,
            tol,
            ok: true,
        }
    }

    fn record(&mut self, increase: f64) {
        self.pairs += 1;
        self.max_violation = self.max_violation.max(increase);
        self.ok = self.max_violation <= self.tol;
    }

    fn merge(&mut self, other: &Self) {
        self.pairs += other.pairs;
        self.max_violation = self.max_violation.max(other.max_violation);
        self.ok = self.max_violation <= self.tol;
    }
}

/// Checks that `lyap` never increases by more than `tol` between consecutive frames.
pub fn lyapunov_monotone(frames: &[DiagnosticsFrame], tol: f64) -> MonotoneReport {
    let mut report = MonotoneReport::new(tol);
    for w in frames.windows(2) {
        report.record(w[1].lyap - w[0].lyap);
    }
    report
}

/// Result of every trajectory-level invariant audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAudit {
    /// `D_v^(k)` non-increasing.
    pub diameter: MonotoneReport,
    /// `M^(k)` non-increasing.
    pub upper: MonotoneReport,
    /// `m^(k)` non-decreasing.
    pub lower: MonotoneReport,
    /// `sup_i max_k |v_i^k|` never above its initial value.
    pub sup_norm: MonotoneReport,
    /// Largest `|v_c(t) - v_c(t_0)|` on the first profile interval before the snap.
    pub vc_drift: f64,
    /// Allowed drift: `tail_mass |v|_inf t + 1e-8`.
    pub vc_drift_allowance: f64,
    /// Largest excess of `D_x(t)` over `D_x(0) + t sum_k D_v^(k)(0)`.
    pub dx_envelope_excess: f64,
    /// `lyap` non-increasing within profile intervals, before the snap.
    pub lyapunov: MonotoneReport,
    /// Largest pairwise velocity difference after the snap (exactly zero expected).
    pub post_snap_velocity_spread: f64,
    /// Largest change of a relative position after the snap.
    pub post_snap_position_drift: f64,
    pub ok: bool,
}

pub const MONOTONE_TOL: f64 = 1e-8;
pub const CONSERVATION_TOL: f64 = 1e-8;
pub const LYAPUNOV_TOL: f64 = 1e-6;
pub const DX_ENVELOPE_TOL: f64 = 1e-6;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Runs every sample-based invariant check on a trajectory.
pub fn audit_trajectory(traj: &Trajectory) -> TrajectoryAudit {
    let samples = &traj.samples;
    let first = &samples[0];
    let snap = traj.snap_time();
    let before_snap = |t: f64| snap.is_none_or(|s| t < s);

    let mut diameter = MonotoneReport::new(MONOTONE_TOL);
    let mut upper = MonotoneReport::new(MONOTONE_TOL);
    let mut lower = MonotoneReport::new(MONOTONE_TOL);
    for w in samples.windows(2) {
        let (a, b) = (&w[0].frame, &w[1].frame);
        for k in 0..a.dv.len() {
            diameter.record(b.dv[k] - a.dv[k]);
            upper.record(b.max[k] - a.max[k]);
            lower.record(a.min[k] - b.min[k]);
        }
    }

    let mut sup_norm = MonotoneReport::new(MONOTONE_TOL);
    let sup0 = first.state.velocity_sup();
    for s in samples {
        sup_norm.record(s.state.velocity_sup() - sup0);
    }

    let tail = traj
        .params
        .network
        .profile_for_interval(first.interval)
        .tail_mass();
    let mut vc_drift = 0.0f64;
    let mut t_last = first.frame.t;
    for s in samples
        .iter()
        .take_while(|s| s.interval == first.interval && before_snap(s.frame.t))
    {
        vc_drift = vc_drift.max(euclid(&s.frame.vc, &first.frame.vc));
        t_last = s.frame.t;
    }
    let vc_drift_allowance = tail * sup0 * (t_last - first.frame.t) + CONSERVATION_TOL;

    let sum_dv0: f64 = first.frame.dv.iter().sum();
    let dx_envelope_excess = samples
        .iter()
        .map(|s| s.frame.dx - (first.frame.dx + (s.frame.t - first.frame.t) * sum_dv0))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut lyapunov = MonotoneReport::new(LYAPUNOV_TOL);
    let mut start = 0;
    for end in 1..=samples.len() {
        let boundary = end == samples.len()
            || samples[end].interval != samples[start].interval
            || !before_snap(samples[end].frame.t);
        if boundary {
            let frames: Vec<DiagnosticsFrame> = samples[start..end]
                .iter()
                .map(|s| s.frame.clone())
                .collect();
            lyapunov.merge(&lyapunov_monotone(&frames, LYAPUNOV_TOL));
            start = end;
        }
    }

    let mut post_snap_velocity_spread = 0.0f64;
    let mut post_snap_position_drift = 0.0f64;
    if let Some(ts) = snap {
        let after: Vec<&ParticleState> = samples
            .iter()
            .filter(|s| s.frame.t >= ts)
            .map(|s| &s.state)
            .collect();
        if let Some(base) = after.first() {
            for st in &after {
                for i in 1..st.n() {
                    post_snap_velocity_spread =
                        post_snap_velocity_spread.max(euclid(st.v_row(i), st.v_row(0)));
                    for k in 0..st.d() {
                        let rel = st.x_row(i)[k] - st.x_row(0)[k];
                        let rel0 = base.x_row(i)[k] - base.x_row(0)[k];
                        post_snap_position_drift = post_snap_position_drift.max((rel - rel0).abs());
                    }
                }
            }
        }
    }
    debug_assert!(
        traj.events
            .iter()
            .filter(|e| matches!(e, Event::ConsensusDetected { .. }))
            .count()
            <= 1
    );

    let ok = diameter.ok
        && upper.ok
        && lower.ok
        && sup_norm.ok
        && vc_drift <= vc_drift_allowance
        && dx_envelope_excess <= DX_ENVELOPE_TOL
        && lyapunov.ok
        && post_snap_velocity_spread == 0.0;
    TrajectoryAudit {
        diameter,
        upper,
        lower,
        sup_norm,
        vc_drift,
        vc_drift_allowance,
        dx_envelope_excess,
        lyapunov,
        post_snap_velocity_spread,
        post_snap_position_drift,
        ok,
    }
}
