//! The particle system, its vector field and an adaptive Dormand-Prince
//! integrator that handles switching instants and finite-time consensus.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsFrame};
use crate::error::{Error, Result};
use crate::kernels::{check_alpha, sign_power, KernelSpec, SenderProfile, SwitchingSignal};

/// Positions and velocities of `n` agents in `d` dimensions at time `t`,
/// stored row-major (`x[i * d + k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    t: f64,
    n: usize,
    d: usize,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl ParticleState {
    pub fn new(t: f64, n: usize, d: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!(
                "need n, d >= 1, got n = {n}, d = {d}"
            )));
        }
        if x.len() != n * d || v.len() != n * d {
            return Err(Error::Shape(format!(
                "expected {} entries in x and v, got {} and {}",
                n * d,
                x.len(),
                v.len()
            )));
        }
        let state = Self { t, n, d, x, v };
        if !t.is_finite() || !state.is_finite() {
            return Err(Error::Domain("state entries must be finite".into()));
        }
        Ok(state)
    }

    /// Builds a state from per-agent rows.
    pub fn from_rows(t: f64, x: &[Vec<f64>], v: &[Vec<f64>]) -> Result<Self> {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        if v.len() != n || x.iter().chain(v).any(|r| r.len() != d) {
            return Err(Error::Shape("ragged position/velocity rows".into()));
        }
        Self::new(t, n, d, x.concat(), v.concat())
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn v_row(&self, i: usize) -> &[f64] {
        &self.v[i * self.d..(i + 1) * self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|c| c.is_finite())
    }

    /// `sup_{i,j} |x_i - x_j|` by exact pairwise scan.
    pub fn position_diameter(&self) -> f64 {
        pairwise_diameter(&self.x, self.n, self.d)
    }

    /// `sup_{i,j} |v_i - v_j|` by exact pairwise scan.
    pub fn velocity_diameter(&self) -> f64 {
        pairwise_diameter(&self.v, self.n, self.d)
    }

    /// Componentwise velocity diameters `max_i v_i^k - min_i v_i^k`.
    pub fn component_diameters(&self) -> Vec<f64> {
        (0..self.d)
            .map(|k| {
                let (lo, hi) = component_range(&self.v, self.d, k);
                hi - lo
            })
            .collect()
    }

    /// `sup_i max_k |v_i^k|`.
    pub fn velocity_sup(&self) -> f64 {
        self.v.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn pairwise_diameter(rows: &[f64], n: usize, d: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..n {
        let a = &rows[i * d..(i + 1) * d];
        for j in i + 1..n {
            let b = &rows[j * d..(j + 1) * d];
            let s: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            best = best.max(s);
        }
    }
    best.sqrt()
}

fn component_range(rows: &[f64], d: usize, k: usize) -> (f64, f64) {
    rows.iter()
        .skip(k)
        .step_by(d)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        })
}

/// Sender network: one profile, or a switching signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    Fixed(SenderProfile),
    Switching(SwitchingSignal),
}

impl Network {
    pub fn n_agents(&self) -> usize {
        match self {
            Self::Fixed(p) => p.len(),
            Self::Switching(s) => s.n_agents(),
        }
    }

    pub fn interval_index(&self, t: f64) -> usize {
        match self {
            Self::Fixed(_) => 0,
            Self::Switching(s) => s.interval_index(t),
        }
    }

    pub fn profile_for_interval(&self, n: usize) -> SenderProfile {
        match self {
            Self::Fixed(p) => p.clone(),
            Self::Switching(s) => s.profile_for_interval(n),
        }
    }

    pub fn profile_at(&self, t: f64) -> SenderProfile {
        self.profile_for_interval(self.interval_index(t))
    }

    pub fn switch_time(&self, n: usize) -> Option<f64> {
        match self {
            Self::Fixed(_) => None,
            Self::Switching(s) => s.switch_time(n),
        }
    }
}

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;
pub const DEFAULT_CONSENSUS_TOL: f64 = 1e-9;
pub const DEFAULT_MERGE_TOL: f64 = 1e-4;

/// A cluster is released once the force tearing it apart exceeds the merge
/// criterion by this factor.
const RELEASE_FACTOR: f64 = 2.0;
/// Verification rounds per component when locking velocity clusters.
const MAX_LOCK_ROUNDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub kappa: f64,
    pub alpha: f64,
    pub kernel: KernelSpec,
    pub network: Network,
    pub rtol: f64,
    pub atol: f64,
    /// Consensus is declared once `max_k D_v^(k)` drops below this.
    pub consensus_tol: f64,
    pub t_max: f64,
    pub output_stride: f64,
    /// Relative spread (in units of `max_k D_v^(k)`) below which near-equal
    /// velocity components are locked together. Zero disables locking.
    pub merge_tol: f64,
}

impl SimParams {
    /// Default tolerances and an output stride of `t_max / 1000`.
    pub fn new(kappa: f64, alpha: f64, kernel: KernelSpec, network: Network, t_max: f64) -> Self {
        Self {
            kappa,
            alpha,
            kernel,
            network,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            consensus_tol: DEFAULT_CONSENSUS_TOL,
            t_max,
            output_stride: t_max / 1000.0,
            merge_tol: DEFAULT_MERGE_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let positive = [
            ("kappa", self.kappa),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("consensus_tol", self.consensus_tol),
            ("t_max", self.t_max),
            ("output_stride", self.output_stride),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.merge_tol >= 0.0 && self.merge_tol < 1.0) {
            return Err(Error::Config(format!(
                "merge_tol must lie in [0, 1), got {}",
                self.merge_tol
            )));
        }
        Ok(())
    }

    pub fn h_min(&self) -> f64 {
        1e-12 * self.t_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Switch {
        t: f64,
        interval: usize,
    },
    ConsensusDetected {
        t: f64,
    },
    SnapApplied {
        t: f64,
    },
    /// Agents whose `component` velocities were locked into one cluster.
    ClusterMerged {
        t: f64,
        component: usize,
        size: usize,
    },
    ClusterReleased {
        t: f64,
        component: usize,
        size: usize,
    },
}

impl Event {
    pub fn t(&self) -> f64 {
        match *self {
            Self::Switch { t, .. }
            | Self::ConsensusDetected { t }
            | Self::SnapApplied { t }
            | Self::ClusterMerged { t, .. }
            | Self::ClusterReleased { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: ParticleState,
    pub frame: DiagnosticsFrame,
    /// Index of the switching interval whose profile was active.
    pub interval: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub params: SimParams,
    pub seed: Option<u64>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    /// Time at which consensus was detected.
    pub fn flocking_time(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e {
            Event::ConsensusDetected { t } => Some(*t),
            _ => None,
        })
    }

    pub fn snap_time(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e {
            Event::SnapApplied { t } => Some(*t),
            _ => None,
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = &DiagnosticsFrame> {
        self.samples.iter().map(|s| &s.frame)
    }

    pub fn last_state(&self) -> &ParticleState {
        &self
            .samples
            .last()
            .expect("trajectory has an initial sample")
            .state
    }
}

/// Raw accelerations `kappa sum_j m_j psi(|x_j - x_i|) Gamma(v_j - v_i)`,
/// accumulated pairwise so every pair costs one kernel evaluation.
#[allow(clippy::too_many_arguments)]
fn accelerations(
    x: &[f64],
    v: &[f64],
    d: usize,
    weights: &[f64],
    kernel: &KernelSpec,
    kappa: f64,
    alpha: f64,
    out: &mut [f64],
) {
    out.fill(0.0);
    let n = weights.len();
    for i in 0..n {
        let (xi, vi) = (&x[i * d..(i + 1) * d], &v[i * d..(i + 1) * d]);
        for j in i + 1..n {
            let (mi, mj) = (weights[i], weights[j]);
            if mi == 0.0 && mj == 0.0 {
                continue;
            }
            let (xj, vj) = (&x[j * d..(j + 1) * d], &v[j * d..(j + 1) * d]);
            let mut r2 = 0.0;
            let mut differ = false;
            for k in 0..d {
                let dx = xj[k] - xi[k];
                r2 += dx * dx;
                differ |= vj[k] != vi[k];
            }
            if !differ {
                continue;
            }
            let w = kappa * kernel.eval(r2.sqrt());
            for k in 0..d {
                let g = w * sign_power(vj[k] - vi[k], alpha);
                out[i * d + k] += mj * g;
                out[j * d + k] -= mi * g;
            }
        }
    }
}

fn check_shapes(state: &ParticleState, profile: &SenderProfile) -> Result<()> {
    if profile.len() != state.n() {
        return Err(Error::Shape(format!(
            "profile has {} senders but the state has {} agents",
            profile.len(),
            state.n()
        )));
    }
    Ok(())
}

/// `(dx, dv)` with `dx = v` and `dv_i = kappa sum_j m_j psi(|x_j - x_i|) Gamma(v_j - v_i)`.
pub fn vector_field(
    state: &ParticleState,
    profile: &SenderProfile,
    kernel: &KernelSpec,
    kappa: f64,
    alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_alpha(alpha)?;
    check_shapes(state, profile)?;
    let mut dv = vec![0.0; state.v.len()];
    accelerations(
        &state.x,
        &state.v,
        state.d,
        profile.weights(),
        kernel,
        kappa,
        alpha,
        &mut dv,
    );
    Ok((state.v.clone(), dv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Compares `sup_i |dx_i| + sup_i |dv_i|` against
/// `|v|_inf + 2^alpha kappa psi(0) |v|_inf^alpha` with `|v|_inf = sup_i |v_i|`.
pub fn field_growth_check(
    state: &ParticleState,
    profile: &SenderProfile,
    kernel: &KernelSpec,
    kappa: f64,
    alpha: f64,
) -> Result<GrowthCheck> {
    let (dx, dv) = vector_field(state, profile, kernel, kappa, alpha)?;
    let sup = |rows: &[f64]| {
        rows.chunks(state.d)
            .map(|r| r.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let vnorm = sup(&state.v);
    let lhs = sup(&dx) + sup(&dv);
    let rhs = vnorm + 2f64.powf(alpha) * kappa * kernel.sup_value() * vnorm.powf(alpha);
    Ok(GrowthCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12,
    })
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Coefficients of the fourth-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Evaluates the (possibly cluster-projected) field for the stacked state
/// `y = [x; v]` and hands out reusable buffers.
struct Field<'a> {
    params: &'a SimParams,
    n: usize,
    d: usize,
    weights: Vec<f64>,
    /// Per component, the clusters whose velocity components are locked.
    clusters: Vec<Vec<Vec<usize>>>,
    evaluations: usize,
}

impl<'a> Field<'a> {
    fn new(params: &'a SimParams, n: usize, d: usize, profile: &SenderProfile) -> Self {
        Self {
            params,
            n,
            d,
            weights: profile.weights().to_vec(),
            clusters: vec![Vec::new(); d],
            evaluations: 0,
        }
    }

    /// Writes `[v; a]` into `out` and the unprojected accelerations into `raw`.
    fn eval(&mut self, y: &[f64], out: &mut [f64], raw: &mut [f64]) {
        self.evaluations += 1;
        let nd = self.n * self.d;
        let (x, v) = y.split_at(nd);
        out[..nd].copy_from_slice(v);
        let p = self.params;
        accelerations(
            x,
            v,
            self.d,
            &self.weights,
            &p.kernel,
            p.kappa,
            p.alpha,
            raw,
        );
        out[nd..].copy_from_slice(raw);
        for (k, groups) in self.clusters.iter().enumerate() {
            for g in groups {
                let mean = weighted_mean(g, &self.weights, |i| raw[i * self.d + k]);
                for &i in g {
                    out[nd + i * self.d + k] = mean;
                }
            }
        }
    }
}

/// `sum m_i f(i) / sum m_i` over `members`, or the plain mean when the mass vanishes.
fn weighted_mean(members: &[usize], weights: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mass: f64 = members.iter().map(|&i| weights[i]).sum();
    if mass > 0.0 {
        members.iter().map(|&i| weights[i] * f(i)).sum::<f64>() / mass
    } else {
        members.iter().map(|&i| f(i)).sum::<f64>() / members.len() as f64
    }
}

struct Attempt {
    y: Vec<f64>,
    /// All seven stages; the last is the derivative at `y` (FSAL).
    k: Vec<Vec<f64>>,
    raw_last: Vec<f64>,
    err: f64,
}

impl Attempt {
    /// Continuous extension at `y0 + theta h`, `theta` in `[0, 1]`.
    fn interpolate(&self, y0: &[f64], h: f64, theta: f64) -> Vec<f64> {
        let k = &self.k;
        (0..y0.len())
            .map(|i| {
                let diff = self.y[i] - y0[i];
                let b = h * k[0][i] - diff;
                let c = diff - h * k[6][i] - b;
                let e = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
                y0[i] + theta * (diff + (1.0 - theta) * (b + theta * (c + (1.0 - theta) * e)))
            })
            .collect()
    }
}

/// One Dormand-Prince trial step from `y` with derivative `k1`.
fn dp_attempt(field: &mut Field, y: &[f64], k1: &[f64], h: f64, dv_scale: &[f64]) -> Attempt {
    let len = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut raw = vec![0.0; len / 2];
    let mut stage = vec![0.0; len];
    for row in &A[1..] {
        for (idx, st) in stage.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (a, kj) in row.iter().zip(&k) {
                acc += a * kj[idx];
            }
            *st = y[idx] + h * acc;
        }
        let mut ks = vec![0.0; len];
        field.eval(&stage, &mut ks, &mut raw);
        k.push(ks);
    }
    debug_assert_eq!(C[6], 1.0);
    // stage 7 sits at the 5th-order solution (FSAL)
    let nd = len / 2;
    let d = field.d;
    let params = field.params;
    let mut err = 0.0f64;
    for idx in 0..len {
        let e: f64 = h * (0..7).map(|j| E[j] * k[j][idx]).sum::<f64>();
        let scale = if idx < nd {
            params.atol + params.rtol * (y[idx].abs().max(stage[idx].abs()) + 1.0)
        } else {
            params.atol + params.rtol * dv_scale[(idx - nd) % d]
        };
        err = err.max(e.abs() / scale);
    }
    Attempt {
        y: stage,
        k,
        raw_last: raw,
        err,
    }
}

fn stack(state: &ParticleState) -> Vec<f64> {
    let mut y = state.x.clone();
    y.extend_from_slice(&state.v);
    y
}

fn unstack(t: f64, n: usize, d: usize, y: &[f64]) -> ParticleState {
    let (x, v) = y.split_at(n * d);
    ParticleState {
        t,
        n,
        d,
        x: x.to_vec(),
        v: v.to_vec(),
    }
}

fn component_diameters_of(v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let (lo, hi) = component_range(v, d, k);
            hi - lo
        })
        .collect()
}

/// Result of [`step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ParticleState,
    pub h_used: f64,
    /// Normalized error estimate of the accepted step (at most one).
    pub error_estimate: f64,
    /// Proposal for the next step.
    pub h_next: f64,
}

fn controller_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// One accepted adaptive step without cluster locking, using the profile
/// active at `state.t`. The step is clipped to end at the next switch
/// instant and at `t_max`; rejected trials shrink `h` until the error
/// estimate is within tolerance.
pub fn step(state: &ParticleState, params: &SimParams, h: f64) -> Result<StepOutcome> {
    params.validate()?;
    let n = state.n;
    if params.network.n_agents() != n {
        return Err(Error::Shape("network size differs from the state".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!(
            "step size must be positive, got {h}"
        )));
    }
    let interval = params.network.interval_index(state.t);
    let profile = params.network.profile_for_interval(interval);
    let mut field = Field::new(params, n, state.d, &profile);
    let y = stack(state);
    let mut k1 = vec![0.0; y.len()];
    let mut raw = vec![0.0; y.len() / 2];
    field.eval(&y, &mut k1, &mut raw);
    let dv_scale = component_diameters_of(&state.v, state.d);
    let mut limit = params.t_max - state.t;
    if let Some(ts) = params.network.switch_time(interval + 1) {
        limit = limit.min(ts - state.t);
    }
    let mut h = h.min(limit);
    loop {
        let attempt = dp_attempt(&mut field, &y, &k1, h, &dv_scale);
        if attempt.err <= 1.0 {
            let t = if h == limit {
                state.t + limit
            } else {
                state.t + h
            };
            return Ok(StepOutcome {
                state: unstack(t, n, state.d, &attempt.y),
                h_used: h,
                error_estimate: attempt.err,
                h_next: h * controller_factor(attempt.err),
            });
        }
        h *= controller_factor(attempt.err).min(1.0);
        if h < params.h_min() {
            return Err(Error::Stiffness {
                t: state.t,
                h,
                h_min: params.h_min(),
                state: Box::new(state.clone()),
            });
        }
    }
}

/// Classical fixed-step integration with the 5th-order Dormand-Prince
/// solution and no error control, for convergence studies on a fixed profile.
pub fn integrate_fixed(
    state: &ParticleState,
    params: &SimParams,
    h: f64,
    steps: usize,
) -> Result<Vec<ParticleState>> {
    params.validate()?;
    let profile = params.network.profile_at(state.t);
    check_shapes(state, &profile)?;
    let mut field = Field::new(params, state.n, state.d, &profile);
    let mut y = stack(state);
    let mut k1 = vec![0.0; y.len()];
    let mut raw = vec![0.0; y.len() / 2];
    let ones = vec![1.0; state.d];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for s in 1..=steps {
        field.eval(&y, &mut k1, &mut raw);
        y = dp_attempt(&mut field, &y, &k1, h, &ones).y;
        out.push(unstack(state.t + s as f64 * h, state.n, state.d, &y));
    }
    Ok(out)
}

struct Recorder<'a> {
    params: &'a SimParams,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    fn push(&mut self, state: ParticleState, profile: &SenderProfile, interval: usize) {
        let p = self.params;
        let frame = diagnostics::frame_unchecked(&state, profile, &p.kernel, p.kappa, p.alpha);
        let sample = Sample {
            state,
            frame,
            interval,
        };
        match self.samples.last_mut() {
            Some(last) if last.state.t == sample.state.t => *last = sample,
            _ => self.samples.push(sample),
        }
    }
}

/// Whether the mutual coupling of the union of `units` at velocity spread
/// `hold^(1/alpha)` outweighs the external forcing that tends to pull it apart.
///
/// Units are ordered by their mean `k`-th acceleration in `raw` and never
/// split. For every cut into a lower and an upper part, the mean acceleration
/// difference (the tearing force) must stay below `factor * hold` times the
/// restoring coefficient `kappa (mean_U sum_L m_j psi_ij + mean_L sum_U m_j psi_ij)`.
fn holds(
    field: &Field,
    units: &[Vec<usize>],
    k: usize,
    raw: &[f64],
    x: &[f64],
    factor: f64,
) -> bool {
    let d = field.d;
    let w = &field.weights;
    let mut units: Vec<(f64, &[usize])> = units
        .iter()
        .map(|u| (weighted_mean(u, w, |i| raw[i * d + k]), u.as_slice()))
        .collect();
    units.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<usize> = units.iter().flat_map(|u| u.1.iter().copied()).collect();
    let c = sorted.len();
    let mut psi = vec![0.0; c * c];
    for a in 0..c {
        for b in a + 1..c {
            let (i, j) = (sorted[a], sorted[b]);
            let r2: f64 = (0..d).map(|q| (x[i * d + q] - x[j * d + q]).powi(2)).sum();
            let p = field.params.kernel.eval(r2.sqrt());
            psi[a * c + b] = p;
            psi[b * c + a] = p;
        }
    }
    // to_lower[a] = sum over the lower part of m_j psi_aj, likewise to_upper
    let mut to_lower = vec![0.0; c];
    let mut to_upper: Vec<f64> = (0..c)
        .map(|a| (0..c).map(|b| w[sorted[b]] * psi[a * c + b]).sum())
        .collect();
    // mass-weighted mean over sorted positions `range`, plain mean if massless
    let mean = |range: std::ops::Range<usize>, f: &dyn Fn(usize) -> f64| {
        let mass: f64 = range.clone().map(|a| w[sorted[a]]).sum();
        let len = range.len() as f64;
        if mass > 0.0 {
            range.map(|a| w[sorted[a]] * f(a)).sum::<f64>() / mass
        } else {
            range.map(f).sum::<f64>() / len
        }
    };
    let acc = |a: usize| raw[sorted[a] * d + k];
    let mut s = 0;
    for (_, u) in &units[..units.len() - 1] {
        for _ in 0..u.len() {
            let me = w[sorted[s]];
            for a in 0..c {
                to_lower[a] += me * psi[a * c + s];
                to_upper[a] -= me * psi[a * c + s];
            }
            s += 1;
        }
        let tear = mean(s..c, &acc) - mean(0..s, &acc);
        if tear <= 0.0 {
            continue;
        }
        let restore =
            field.params.kappa * (mean(s..c, &|a| to_lower[a]) + mean(0..s, &|a| to_upper[a]));
        if tear > factor * restore {
            return false;
        }
    }
    true
}

fn block_acceleration(field: &Field, members: &[usize], k: usize, raw: &[f64]) -> f64 {
    weighted_mean(members, &field.weights, |i| raw[i * field.d + k])
}

/// Releases clusters whose tearing force exceeds twice their restoring pull
/// at the threshold spread, and merges neighbouring velocity levels whose gap
/// is within `merge_tol max_k D_v^(k)` and whose relative external forcing the
/// mutual pull at that spread can hold. Merged clusters are snapped to their
/// mass-weighted mean velocity. Returns whether the state or the cluster
/// structure changed.
fn update_clusters(
    field: &mut Field,
    y: &mut [f64],
    raw: &[f64],
    t: f64,
    events: &mut Vec<Event>,
) -> bool {
    let (n, d) = (field.n, field.d);
    let nd = n * d;
    let eps = field.params.merge_tol;
    let alpha = field.params.alpha;
    let mut changed = false;
    // A component's own spread would never let its last two levels merge.
    let scale = max_diameter(y, n, d);
    for k in 0..d {
        let (lo, hi) = component_range(&y[nd..], d, k);
        if hi == lo {
            continue;
        }
        let threshold = eps * scale;
        let hold = threshold.powf(alpha);
        let (x, v) = y.split_at(nd);
        let mut kept = Vec::new();
        for g in std::mem::take(&mut field.clusters[k]) {
            let singles: Vec<Vec<usize>> = g.iter().map(|&i| vec![i]).collect();
            if !holds(field, &singles, k, raw, x, RELEASE_FACTOR * hold) {
                events.push(Event::ClusterReleased {
                    t,
                    component: k,
                    size: g.len(),
                });
                changed = true;
            } else {
                kept.push(g);
            }
        }
        let mut label = vec![usize::MAX; n];
        for (gi, g) in kept.iter().enumerate() {
            for &i in g {
                label[i] = gi;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            v[i * d + k]
                .total_cmp(&v[j * d + k])
                .then(label[i].cmp(&label[j]))
                .then(i.cmp(&j))
        });
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for &i in &order {
            match blocks.last_mut() {
                Some(b) if label[i] != usize::MAX && label[b[0]] == label[i] => b.push(i),
                _ => blocks.push(vec![i]),
            }
        }
        // chains of adjacent levels within the gap threshold
        let mut chains: Vec<Vec<Vec<usize>>> = Vec::new();
        for b in blocks {
            let joins = chains.last().is_some_and(|c| {
                let last = c[c.len() - 1][0];
                v[b[0] * d + k] - v[last * d + k] <= threshold
            });
            if joins {
                chains.last_mut().expect("nonempty").push(b);
            } else {
                chains.push(vec![b]);
            }
        }
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut pending: Vec<Vec<Vec<usize>>> = Vec::new();
        for c in chains {
            if c.len() > 1 {
                pending.push(c);
            } else if c[0].len() > 1 {
                clusters.push(c.into_iter().next().expect("one block"));
            }
        }
        let before: Vec<f64> = (0..n).map(|i| y[nd + i * d + k]).collect();
        let mut out = vec![0.0; y.len()];
        let mut after = vec![0.0; nd];
        // Snapping moves velocities relative to nearby agents, where the
        // coupling is steepest, so a group is accepted only if it holds after
        // the snap. Rejected groups split at their worst boundary.
        for _ in 0..MAX_LOCK_ROUNDS {
            if pending.is_empty() {
                break;
            }
            for c in &pending {
                let g: Vec<usize> = c.concat();
                let mean = weighted_mean(&g, &field.weights, |i| before[i]);
                for &i in &g {
                    y[nd + i * d + k] = mean;
                }
            }
            field.eval(y, &mut out, &mut after);
            let mut next = Vec::new();
            for c in pending {
                let g: Vec<usize> = c.concat();
                if holds(field, &c, k, &after, &y[..nd], hold) {
                    events.push(Event::ClusterMerged {
                        t,
                        component: k,
                        size: g.len(),
                    });
                    changed = true;
                    clusters.push(g);
                    continue;
                }
                for &i in &g {
                    y[nd + i * d + k] = before[i];
                }
                let cut = worst_boundary(field, &c, k, &after);
                let (lower, upper) = c.split_at(cut);
                for part in [lower, upper] {
                    if part.len() > 1 {
                        next.push(part.to_vec());
                    } else if part[0].len() > 1 {
                        clusters.push(part[0].clone());
                    }
                }
            }
            pending = next;
        }
        for c in pending {
            for g in c {
                for &i in &g {
                    y[nd + i * d + k] = before[i];
                }
                if g.len() > 1 {
                    clusters.push(g);
                }
            }
        }
        field.clusters[k] = clusters;
    }
    changed
}

/// Index `s` in `1..blocks.len()` maximizing the mean acceleration of
/// `blocks[s..]` minus that of `blocks[..s]`.
fn worst_boundary(field: &Field, blocks: &[Vec<usize>], k: usize, raw: &[f64]) -> usize {
    let mut best = (f64::NEG_INFINITY, 1);
    for s in 1..blocks.len() {
        let lower = block_acceleration(field, &blocks[..s].concat(), k, raw);
        let upper = block_acceleration(field, &blocks[s..].concat(), k, raw);
        if upper - lower > best.0 {
            best = (upper - lower, s);
        }
    }
    best.1
}

/// Sets every velocity to the mass-normalized mean `sum m_i v_i / sum m_i`.
fn snap_to_mean(y: &mut [f64], n: usize, d: usize, weights: &[f64]) {
    let nd = n * d;
    let all: Vec<usize> = (0..n).collect();
    for k in 0..d {
        let mean = weighted_mean(&all, weights, |i| y[nd + i * d + k]);
        for i in 0..n {
            y[nd + i * d + k] = mean;
        }
    }
}

/// Integrates from `initial` until `t_max`.
///
/// Diagnostics are sampled every `output_stride` (from the continuous
/// extension between steps), at every switch instant and at the consensus
/// time. Once `max_k D_v^(k) < consensus_tol`, velocities are
/// snapped to the mass-normalized mean and positions are transported
/// linearly for the rest of the window.
pub fn integrate(initial: &ParticleState, params: &SimParams) -> Result<Trajectory> {
    params.validate()?;
    let (n, d) = (initial.n, initial.d);
    if params.network.n_agents() != n {
        return Err(Error::Shape(format!(
            "network has {} senders but the state has {} agents",
            params.network.n_agents(),
            n
        )));
    }
    if !initial.is_finite() {
        return Err(Error::Divergence { t: initial.t });
    }
    let t_end = params.t_max;
    let stride = params.output_stride;
    let sample_at = |idx: usize| {
        let s = idx as f64 * stride;
        if s >= t_end * (1.0 - 1e-12) {
            t_end
        } else {
            s
        }
    };

    let mut interval = params.network.interval_index(initial.t);
    let mut profile = params.network.profile_for_interval(interval);
    let mut field = Field::new(params, n, d, &profile);
    let mut rec = Recorder {
        params,
        samples: Vec::new(),
    };
    let mut events = Vec::new();
    let mut stats = IntegrationStats::default();

    let mut t = initial.t;
    let mut y = stack(initial);
    let mut next_sample_idx = (t / stride).floor() as usize + 1;
    rec.push(initial.clone(), &profile, interval);

    let mut k1 = vec![0.0; y.len()];
    let mut raw = vec![0.0; nd(n, d)];
    field.eval(&y, &mut k1, &mut raw);
    let locking = params.merge_tol > 0.0;
    let mut consensus = None;
    if max_diameter(&y, n, d) < params.consensus_tol {
        consensus = Some(t);
    }
    let mut h_prop = (1e-3 * t_end).min(stride);
    let h_min = params.h_min();

    while consensus.is_none() && t < t_end {
        let next_switch = params
            .network
            .switch_time(interval + 1)
            .filter(|&s| s < t_end);
        let target = next_switch.unwrap_or(t_end);
        let room = target - t;
        let clipped = h_prop >= room;
        let h = if clipped { room } else { h_prop };
        let dv_scale = component_diameters_of(&y[nd(n, d)..], d);
        let attempt = dp_attempt(&mut field, &y, &k1, h, &dv_scale);
        if attempt.err > 1.0 {
            stats.rejected += 1;
            h_prop = h * controller_factor(attempt.err).min(1.0);
            if h_prop < h_min {
                return Err(Error::Stiffness {
                    t,
                    h: h_prop,
                    h_min,
                    state: Box::new(unstack(t, n, d, &y)),
                });
            }
            continue;
        }
        stats.accepted += 1;
        let h_next = h * controller_factor(attempt.err);
        h_prop = if clipped { h_prop.max(h_next) } else { h_next };
        let t_new = if clipped { target } else { t + h };
        // samples strictly inside the step come from the continuous extension
        while sample_at(next_sample_idx) < t_new {
            let s = sample_at(next_sample_idx);
            let ys = attempt.interpolate(&y, h, (s - t) / h);
            rec.push(unstack(s, n, d, &ys), &profile, interval);
            next_sample_idx += 1;
        }
        t = t_new;
        y = attempt.y;
        k1 = attempt.k.into_iter().next_back().expect("seven stages");
        raw = attempt.raw_last;
        if y.iter().any(|c| !c.is_finite()) {
            return Err(Error::Divergence { t });
        }

        let mut refresh = false;
        if locking {
            refresh |= update_clusters(&mut field, &mut y, &raw, t, &mut events);
        }
        let mut sample_now = false;
        if next_switch == Some(t) {
            interval = params.network.interval_index(t);
            profile = params.network.profile_for_interval(interval);
            field.weights = profile.weights().to_vec();
            events.push(Event::Switch { t, interval });
            refresh = true;
            sample_now = true;
        }
        while sample_at(next_sample_idx) <= t {
            sample_now = true;
            if sample_at(next_sample_idx) >= t_end {
                break;
            }
            next_sample_idx += 1;
        }
        if max_diameter(&y, n, d) < params.consensus_tol {
            consensus = Some(t);
            break;
        }
        if refresh {
            field.eval(&y, &mut k1, &mut raw);
        }
        if sample_now {
            rec.push(unstack(t, n, d, &y), &profile, interval);
        }
    }
    stats.evaluations = field.evaluations;

    if let Some(tf) = consensus {
        events.push(Event::ConsensusDetected { t: tf });
        snap_to_mean(&mut y, n, d, &field.weights);
        events.push(Event::SnapApplied { t: tf });
        let snapped = unstack(tf, n, d, &y);
        rec.push(snapped.clone(), &profile, interval);
        // transport: x_i(s) = x_i(t_f) + v (s - t_f)
        let mut times: Vec<(f64, bool)> = Vec::new();
        let mut idx = next_sample_idx;
        loop {
            let s = sample_at(idx);
            if s > tf {
                times.push((s, false));
            }
            if s >= t_end {
                break;
            }
            idx += 1;
        }
        let mut m = interval + 1;
        while let Some(sw) = params.network.switch_time(m).filter(|&sw| sw < t_end) {
            if sw > tf {
                times.push((sw, true));
            }
            m += 1;
        }
        times.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        times.dedup_by(|later, earlier| later.0 == earlier.0);
        for (s, is_switch) in times {
            if is_switch {
                interval = params.network.interval_index(s);
                profile = params.network.profile_for_interval(interval);
                events.push(Event::Switch { t: s, interval });
            }
            let mut moved = snapped.clone();
            moved.t = s;
            let dt = s - tf;
            for (xi, vi) in moved.x.iter_mut().zip(&snapped.v) {
                *xi += vi * dt;
            }
            rec.push(moved, &profile, interval);
        }
    }

    Ok(Trajectory {
        samples: rec.samples,
        events,
        params: params.clone(),
        seed: None,
        stats,
    })
}

fn nd(n: usize, d: usize) -> usize {
    n * d
}

fn max_diameter(y: &[f64], n: usize, d: usize) -> f64 {
    component_diameters_of(&y[n * d..], d)
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_agents(kappa: f64, d0: f64) -> (ParticleState, SimParams) {
        let state = ParticleState::new(0.0, 2, 1, vec![0.0, 0.0], vec![0.0, d0]).unwrap();
        let profile = SenderProfile::uniform(2).unwrap();
        let params = SimParams::new(
            kappa,
            0.5,
            KernelSpec::constant(),
            Network::Fixed(profile),
            5.0,
        );
        (state, params)
    }

    #[test]
    fn field_examples() {
        let (state, params) = two_agents(1.0, 1.0);
        let Network::Fixed(profile) = &params.network else {
            unreachable!()
        };
        let (dx, dv) = vector_field(&state, profile, &params.kernel, 1.0, 0.5).unwrap();
        assert_eq!(dx, vec![0.0, 1.0]);
        assert_eq!(dv, vec![0.5, -0.5]);

        let lopsided = SenderProfile::explicit(vec![1.0, 0.0]).unwrap();
        let (_, dv) = vector_field(&state, &lopsided, &params.kernel, 1.0, 0.5).unwrap();
        assert_eq!(dv, vec![0.0, -1.0]);

        let aligned = ParticleState::new(
            0.0,
            3,
            2,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            [0.3, -1.0].repeat(3),
        )
        .unwrap();
        let (_, dv) = vector_field(
            &aligned,
            &SenderProfile::uniform(3).unwrap(),
            &params.kernel,
            1.0,
            0.5,
        )
        .unwrap();
        assert!(dv.iter().all(|&a| a == 0.0));

        assert!(matches!(
            vector_field(
                &state,
                &SenderProfile::uniform(3).unwrap(),
                &params.kernel,
                1.0,
                0.5
            ),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn growth_examples() {
        let zero = ParticleState::new(0.0, 2, 1, vec![0.0, 3.0], vec![0.0, 0.0]).unwrap();
        let u = SenderProfile::uniform(2).unwrap();
        let k = KernelSpec::constant();
        let g = field_growth_check(&zero, &u, &k, 1.0, 0.5).unwrap();
        assert_eq!((g.lhs, g.rhs, g.ok), (0.0, 0.0, true));

        let (state, _) = two_agents(1.0, 1.0);
        let g = field_growth_check(&state, &u, &k, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(g.lhs, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.rhs, 1.0 + 2f64.sqrt(), epsilon = 1e-15);
        assert!(g.ok);
    }

    #[test]
    fn growth_bound_fails_in_two_dimensions() {
        // only the second agent sends; its pull on the first has Euclidean
        // size sqrt(2) (2s)^alpha, above 2^alpha |v|^alpha = 2^alpha (sqrt(2) s)^alpha
        let s = 1.0;
        let state = ParticleState::new(0.0, 2, 2, vec![0.0; 4], vec![-s, -s, s, s]).unwrap();
        let m = SenderProfile::explicit(vec![0.0, 1.0]).unwrap();
        let g = field_growth_check(&state, &m, &KernelSpec::constant(), 1.0, 0.5).unwrap();
        assert!(!g.ok, "{g:?}");
        assert_abs_diff_eq!(
            g.lhs - 2f64.sqrt(),
            2f64.sqrt() * 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn aligned_step_is_exact_transport() {
        let state = ParticleState::new(0.0, 3, 1, vec![0.0, 1.0, 5.0], vec![2.0; 3]).unwrap();
        let params = SimParams::new(
            1.0,
            0.5,
            KernelSpec::cucker_smale(0.25).unwrap(),
            Network::Fixed(SenderProfile::uniform(3).unwrap()),
            10.0,
        );
        let out = step(&state, &params, 0.25).unwrap();
        assert_eq!(out.h_used, 0.25);
        assert_eq!(out.state.v(), state.v());
        for i in 0..3 {
            assert_abs_diff_eq!(out.state.x()[i], state.x()[i] + 0.5, epsilon = 1e-14);
        }
        assert!(out.error_estimate < 1e-6);
    }

    #[test]
    fn step_clips_at_switch() {
        let base = make_profile();
        let signal = SwitchingSignal::explicit(vec![0.0, 1.0], vec![base.clone(), base]).unwrap();
        let mut state = ParticleState::new(0.0, 3, 1, vec![0.0, 1.0, 2.0], vec![0.4; 3]).unwrap();
        state.t = 0.9;
        let params = SimParams::new(
            1.0,
            0.5,
            KernelSpec::constant(),
            Network::Switching(signal),
            10.0,
        );
        let out = step(&state, &params, 0.5).unwrap();
        assert_abs_diff_eq!(out.h_used, 0.1, epsilon = 1e-15);
        assert_eq!(out.state.t(), 1.0);
    }

    fn make_profile() -> SenderProfile {
        SenderProfile::explicit(vec![0.5, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn two_agent_flocking_time() {
        for (kappa, d0) in [(1.0, 1.0), (2.0, 4.0)] {
            let (state, params) = two_agents(kappa, d0);
            let traj = integrate(&state, &params).unwrap();
            let tf = traj.flocking_time().unwrap();
            assert!((tf - 2.0).abs() < 0.02, "kappa {kappa}: t_f = {tf}");
            // most samples come from the continuous extension, not step ends
            assert!(
                traj.stats.accepted * 2 < traj.samples.len(),
                "{:?}",
                traj.stats
            );
            // closed form D(t) = (D0^(1/2) - kappa t / 2)^2 at every sample before t_f
            for s in traj.samples.iter().filter(|s| s.state.t() < tf) {
                let t = s.state.t();
                let want = (d0.sqrt() - 0.5 * kappa * t).max(0.0).powi(2);
                assert_abs_diff_eq!(s.frame.dv[0], want, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn aligned_start_is_immediate_consensus() {
        let state = ParticleState::new(0.0, 3, 1, vec![0.0, 2.0, 7.0], vec![1.5; 3]).unwrap();
        let params = SimParams::new(
            1.0,
            0.3,
            KernelSpec::cucker_smale(1.0).unwrap(),
            Network::Fixed(make_profile()),
            2.0,
        );
        let traj = integrate(&state, &params).unwrap();
        assert_eq!(traj.flocking_time(), Some(0.0));
        let last = traj.last_state();
        assert_eq!(last.t(), 2.0);
        assert_abs_diff_eq!(last.x()[2], 10.0, epsilon = 1e-14);
        assert_eq!(traj.stats.accepted, 0);
    }

    #[test]
    fn snap_freezes_relative_positions() {
        let (state, params) = two_agents(1.0, 1.0);
        let traj = integrate(&state, &params).unwrap();
        let tf = traj.flocking_time().unwrap();
        let after: Vec<_> = traj.samples.iter().filter(|s| s.state.t() >= tf).collect();
        assert!(after.len() > 10);
        let gap0 = after[0].state.x()[1] - after[0].state.x()[0];
        for s in after {
            assert_eq!(s.state.v()[0], s.state.v()[1]);
            assert!((s.state.x()[1] - s.state.x()[0] - gap0).abs() <= 1e-12);
        }
        let times: Vec<f64> = traj.samples.iter().map(|s| s.state.t()).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*times.last().unwrap(), params.t_max);
    }

    #[test]
    fn fixed_step_is_high_order() {
        let (state, params) = two_agents(1.0, 1.0);
        let exact = |t: f64| (1.0 - 0.5 * t).powi(2);
        let err = |h: f64, steps: usize| {
            integrate_fixed(&state, &params, h, steps)
                .unwrap()
                .iter()
                .map(|s| ((s.v()[1] - s.v()[0]) - exact(s.t())).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.1, 13) / err(0.05, 26);
        assert!(ratio >= 7.2, "ratio {ratio}");
    }

    #[test]
    fn switching_samples_at_instants() {
        let base = make_profile();
        let signal = SwitchingSignal::permuting(base, 1.0, 7).unwrap();
        let state =
            ParticleState::new(0.0, 3, 1, vec![0.0, 1.0, 2.0], vec![-1.0, 0.0, 1.0]).unwrap();
        let mut params = SimParams::new(
            1.0,
            0.5,
            KernelSpec::cucker_smale(0.25).unwrap(),
            Network::Switching(signal),
            3.5,
        );
        params.output_stride = 0.3;
        let traj = integrate(&state, &params).unwrap();
        for ts in [1.0, 2.0, 3.0] {
            assert!(
                traj.samples.iter().any(|s| s.state.t() == ts),
                "no sample at {ts}"
            );
            assert!(traj.events.contains(&Event::Switch {
                t: ts,
                interval: ts as usize
            }));
        }
        let times: Vec<f64> = traj.samples.iter().map(|s| s.state.t()).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn field_conserves_weighted_momentum(n in 2usize..12, d in 1usize..4, seed in 0u64..1000, alpha in 0.05..0.95f64) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let profile = SenderProfile::explicit(raw.iter().map(|w| w / total).collect()).unwrap();
            let state = ParticleState::new(0.0, n, d, x, v).unwrap();
            let (_, dv) = vector_field(&state, &profile, &KernelSpec::cucker_smale(0.7).unwrap(), 1.3, alpha).unwrap();
            for k in 0..d {
                let s: f64 = (0..n).map(|i| profile.weights()[i] * dv[i * d + k]).sum();
                prop_assert!(s.abs() < 1e-12);
            }
        }
    }
}
