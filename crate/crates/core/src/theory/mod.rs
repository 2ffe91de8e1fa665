//! A-priori quantities: the kernel primitive and its inverse, diameter decay
//! envelopes, alignment times, the position-diameter bound, the flocking-time
//! bound and the Hölder/growth constants of the vector field.
//!
//! Conventions: `kappa` is the coupling strength, `alpha` the exponent of the
//! sign-power coupling, and `(a, b)` the initial position and velocity
//! diameters, so that every pairwise distance stays below `a + b t`.

pub mod quad;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dynamics::{vector_field, ParticleState};
use crate::error::{Error, Result};
use crate::kernels::{check_alpha, KernelFamily, KernelSpec, SenderProfile};

use quad::{dyadic_integral, dyadic_integral_from, monotone_root};

/// Absolute tolerance of every kernel quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// Cap on bracket doublings in root searches (the bracket overflows long before).
pub const MAX_DOUBLINGS: usize = 1_000_000;

/// Initial diameters `a = sup |x_i - x_j|`, `b = sup |v_i - v_j|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialEnvelope {
    pub a: f64,
    pub b: f64,
}

impl InitialEnvelope {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!(
                "envelope needs a, b >= 0, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    /// Position diameter and the Euclidean norm of the per-component velocity
    /// diameters, which dominates every velocity difference.
    pub fn from_state(state: &ParticleState) -> Self {
        Self {
            a: state.position_diameter(),
            b: state
                .component_diameters()
                .iter()
                .map(|w| w * w)
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// `Psi(t) = int_0^t psi(r) dr`.
pub fn psi_integral(kernel: &KernelSpec, t: f64) -> f64 {
    psi_integral_between(kernel, 0.0, t)
}

/// `int_lo^hi psi(r) dr` for `0 <= lo <= hi`, without forming a difference of
/// primitives when quadrature is involved.
pub fn psi_integral_between(kernel: &KernelSpec, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    match kernel.family() {
        KernelFamily::Constant => hi - lo,
        KernelFamily::CuckerSmale { beta } if *beta == 0.0 => hi - lo,
        KernelFamily::CuckerSmale { beta } if *beta == 0.5 => hi.asinh() - lo.asinh(),
        KernelFamily::CuckerSmale { beta } => {
            let beta = *beta;
            let f = |r: f64| (1.0 + r * r).powf(-beta);
            if lo == 0.0 {
                dyadic_integral(&f, hi, QUAD_TOL)
            } else {
                dyadic_integral_from(&f, lo, hi, QUAD_TOL)
            }
        }
        KernelFamily::Tabulated { .. } => {
            tabulated_primitive(kernel, hi) - tabulated_primitive(kernel, lo)
        }
    }
}

/// Exact primitive of a piecewise-linear kernel.
fn tabulated_primitive(kernel: &KernelSpec, t: f64) -> f64 {
    let KernelFamily::Tabulated { r, psi } = kernel.family() else {
        unreachable!("tabulated primitive on a non-tabulated kernel")
    };
    let mut acc = 0.0;
    for w in 0..r.len() - 1 {
        if t <= r[w] {
            return acc;
        }
        let seg_end = t.min(r[w + 1]);
        acc += 0.5 * (psi[w] + kernel.eval(seg_end)) * (seg_end - r[w]);
        if t <= r[w + 1] {
            return acc;
        }
    }
    acc + psi[psi.len() - 1] * (t - r[r.len() - 1])
}

/// `lim_{t -> inf} Psi(t)`, or `None` for non-integrable kernels.
pub fn psi_integral_limit(kernel: &KernelSpec) -> Option<f64> {
    match kernel.family() {
        KernelFamily::Constant => None,
        KernelFamily::CuckerSmale { beta } if *beta <= 0.5 => None,
        // int_0^inf (1 + r^2)^-beta dr = sqrt(pi)/2 * Gamma(beta - 1/2) / Gamma(beta)
        KernelFamily::CuckerSmale { beta } => {
            Some(0.5 * std::f64::consts::PI.sqrt() * (ln_gamma(beta - 0.5) - ln_gamma(*beta)).exp())
        }
        KernelFamily::Tabulated { r, psi } => {
            if psi[psi.len() - 1] == 0.0 {
                Some(tabulated_primitive(kernel, r[r.len() - 1]))
            } else {
                None
            }
        }
    }
}

/// Validates `y` and returns the value to invert. A kernel with compact
/// support attains its limit at the end of the support, so values within
/// rounding of that limit are clamped onto it.
fn check_attainable(kernel: &KernelSpec, y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!(
            "Psi inverse needs finite y >= 0, got {y}"
        )));
    }
    if let Some(limit) = psi_integral_limit(kernel) {
        if kernel.reaches_zero() && y <= limit * (1.0 + 1e-12) {
            return Ok(y.min(limit));
        }
        if y >= limit {
            return Err(Error::Unattainable { value: y, limit });
        }
    }
    Ok(y)
}

/// Generalized inverse of `Psi`: the `t` with `Psi(t) = y`.
///
/// Closed forms are used for `psi = 1` and `beta = 1/2`; every other kernel
/// goes through [`psi_integral_inverse_bisect`].
pub fn psi_integral_inverse(kernel: &KernelSpec, y: f64) -> Result<f64> {
    let y = check_attainable(kernel, y)?;
    match kernel.family() {
        KernelFamily::Tabulated { r, .. } if Some(y) == psi_integral_limit(kernel) => {
            Ok(r[r.len() - 1])
        }
        KernelFamily::Constant => Ok(y),
        KernelFamily::CuckerSmale { beta } if *beta == 0.0 => Ok(y),
        KernelFamily::CuckerSmale { beta } if *beta == 0.5 => Ok(y.sinh()),
        _ => psi_integral_inverse_bisect(kernel, y),
    }
}

/// Bracketed bisection for `Psi(t) = y`, bracket `[0, 1]` doubled until it
/// contains the root.
pub fn psi_integral_inverse_bisect(kernel: &KernelSpec, y: f64) -> Result<f64> {
    let y = check_attainable(kernel, y)?;
    monotone_root(&|t: f64| psi_integral(kernel, t), y, MAX_DOUBLINGS).ok_or_else(|| {
        Error::Domain(format!(
            "Psi inverse of {y} lies beyond the floating-point range"
        ))
    })
}

/// Upper envelope of one componentwise velocity diameter,
/// `t -> (max(0, D0^(1-alpha) - kappa (1-alpha) I(t)))^(1/(1-alpha))` with
/// `I(t) = int_0^t psi(a + b s) ds`.
#[derive(Debug, Clone)]
pub struct DecayEnvelope {
    dv0: f64,
    alpha: f64,
    kappa: f64,
    kernel: KernelSpec,
    env: InitialEnvelope,
}

impl DecayEnvelope {
    /// `int_0^t psi(a + b s) ds`.
    pub fn kernel_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let InitialEnvelope { a, b } = self.env;
        if b == 0.0 {
            self.kernel.eval(a) * t
        } else {
            psi_integral_between(&self.kernel, a, a + b * t) / b
        }
    }

    /// Total available dissipation `int_0^inf psi(a + b s) ds` (may be infinite).
    pub fn kernel_integral_limit(&self) -> f64 {
        let InitialEnvelope { a, b } = self.env;
        if b == 0.0 {
            return if self.kernel.eval(a) > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        match psi_integral_limit(&self.kernel) {
            None => f64::INFINITY,
            Some(limit) => ((limit - psi_integral(&self.kernel, a)) / b).max(0.0),
        }
    }

    /// `kappa (1 - alpha) I(t)`, the decrease of `D^(1-alpha)` guaranteed by time `t`.
    fn decrease(&self, t: f64) -> f64 {
        self.kappa * (1.0 - self.alpha) * self.kernel_integral(t)
    }

    pub fn at(&self, t: f64) -> f64 {
        if self.dv0 == 0.0 {
            return 0.0;
        }
        let rest = self.dv0.powf(1.0 - self.alpha) - self.decrease(t);
        if rest <= 0.0 {
            0.0
        } else {
            rest.powf(1.0 / (1.0 - self.alpha))
        }
    }

    pub fn initial(&self) -> f64 {
        self.dv0
    }
}

pub fn decay_envelope(
    dv0: f64,
    alpha: f64,
    kappa: f64,
    kernel: &KernelSpec,
    env: InitialEnvelope,
) -> Result<DecayEnvelope> {
    check_alpha(alpha)?;
    check_kappa(kappa)?;
    if !(dv0 >= 0.0 && dv0.is_finite()) {
        return Err(Error::Domain(format!(
            "initial diameter must be >= 0, got {dv0}"
        )));
    }
    Ok(DecayEnvelope {
        dv0,
        alpha,
        kappa,
        kernel: kernel.clone(),
        env,
    })
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "kappa must be positive, got {kappa}"
        )))
    }
}

/// Outcome of the alignment-time search for one velocity component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alignment {
    /// The component diameter is guaranteed to vanish by `time`.
    Finite { time: f64 },
    /// The kernel is integrable along `a + b s` and the available dissipation
    /// `reachable = int_0^inf psi(a + b s) ds` falls short of
    /// `required = D0^(1-alpha) / (kappa (1-alpha))`.
    NoGuarantee { reachable: f64, required: f64 },
}

impl Alignment {
    pub fn time(&self) -> Option<f64> {
        match *self {
            Self::Finite { time } => Some(time),
            Self::NoGuarantee { .. } => None,
        }
    }
}

/// Solves `int_0^t psi(a + b s) ds = D0^(1-alpha) / (kappa (1-alpha))` for `t`.
pub fn alignment_time(
    dv0: f64,
    alpha: f64,
    kappa: f64,
    kernel: &KernelSpec,
    env: InitialEnvelope,
) -> Result<Alignment> {
    let envelope = decay_envelope(dv0, alpha, kappa, kernel, env)?;
    if dv0 == 0.0 {
        return Ok(Alignment::Finite { time: 0.0 });
    }
    let required = dv0.powf(1.0 - alpha) / (kappa * (1.0 - alpha));
    let reachable = envelope.kernel_integral_limit();
    if reachable <= required {
        return Ok(Alignment::NoGuarantee {
            reachable,
            required,
        });
    }
    // same expression as the envelope, so that the envelope is exactly zero at the root
    let start = dv0.powf(1.0 - alpha);
    match monotone_root(&|t: f64| envelope.decrease(t), start, MAX_DOUBLINGS) {
        Some(time) => Ok(Alignment::Finite { time }),
        None => Ok(Alignment::NoGuarantee {
            reachable,
            required,
        }),
    }
}

/// `sum_k D_k^(2-alpha) / (kappa (2-alpha))`, the velocity part of the Lyapunov functional.
pub fn velocity_energy(dv: &[f64], alpha: f64, kappa: f64) -> f64 {
    dv.iter().map(|d| d.powf(2.0 - alpha)).sum::<f64>() / (kappa * (2.0 - alpha))
}

/// Position-diameter bound `Psi^-1(Psi(Dx0) + sum_k Dv0_k^(2-alpha) / (kappa (2-alpha)))`.
pub fn dx_infinity(
    dx0: f64,
    dv0: &[f64],
    alpha: f64,
    kappa: f64,
    kernel: &KernelSpec,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_kappa(kappa)?;
    if !(dx0 >= 0.0) || dv0.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Domain("diameters must be nonnegative".into()));
    }
    let energy = velocity_energy(dv0, alpha, kappa);
    if energy == 0.0 {
        return Ok(dx0);
    }
    let required = psi_integral(kernel, dx0) + energy;
    match psi_integral_inverse(kernel, required) {
        Err(Error::Unattainable { limit, .. }) => {
            Err(Error::ConditionalHypothesisFailed { required, limit })
        }
        other => other,
    }
}

/// All a-priori bounds for one initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    /// Per-component alignment outcome.
    pub alignment: Vec<Alignment>,
    /// Flocking-time bound; `None` when some component has no finite
    /// alignment time, so the theorem's hypothesis is not met.
    pub t_f_bound: Option<f64>,
    pub dx_infty: f64,
    /// `psi(dx_infty)`.
    pub psi_floor: f64,
    /// True when some component sits in the conditional regime.
    pub integrable: bool,
}

impl TheoryBounds {
    pub fn t_underline(&self) -> Vec<Option<f64>> {
        self.alignment.iter().map(Alignment::time).collect()
    }
}

/// Flocking-time bound `max_k Dv0_k^(1-alpha) / (kappa (1-alpha) psi(Dx_infty))`
/// together with the per-component alignment times. Uses only initial
/// diameters and the kernel, never the number of agents.
pub fn flocking_time_bound(
    env: InitialEnvelope,
    dv0: &[f64],
    alpha: f64,
    kappa: f64,
    kernel: &KernelSpec,
) -> Result<TheoryBounds> {
    let dx_infty = dx_infinity(env.a, dv0, alpha, kappa, kernel)?;
    let psi_floor = kernel.eval(dx_infty);
    let alignment = dv0
        .iter()
        .map(|&d| alignment_time(d, alpha, kappa, kernel, env))
        .collect::<Result<Vec<_>>>()?;
    let integrable = alignment.iter().any(|a| a.time().is_none());
    let worst = dv0.iter().fold(0.0f64, |m, d| m.max(d.powf(1.0 - alpha)));
    let t_f_bound = if worst == 0.0 {
        Some(0.0)
    } else if psi_floor == 0.0 {
        return Err(Error::DegenerateBound { dx_infty });
    } else if integrable {
        None
    } else {
        Some(worst / (kappa * (1.0 - alpha) * psi_floor))
    };
    Ok(TheoryBounds {
        alignment,
        t_f_bound,
        dx_infty,
        psi_floor,
        integrable,
    })
}

/// Constants of the Hölder estimate of the vector field on a ball of radius `r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderConstants {
    pub s0: f64,
    pub c_gamma: f64,
    pub c_x: f64,
    pub c_v: f64,
    pub k1: f64,
    pub k2: f64,
    /// `L_{R0} = S0^(1-alpha) + kappa (K1 S0^(1-alpha) + K2)`.
    pub l: f64,
}

pub fn holder_constant(
    r0: f64,
    alpha: f64,
    kappa: f64,
    kernel: &KernelSpec,
    d: usize,
) -> Result<HolderConstants> {
    check_alpha(alpha)?;
    if !(r0 > 0.0) || d == 0 {
        return Err(Error::Domain(format!(
            "need R0 > 0 and d >= 1, got R0 = {r0}, d = {d}"
        )));
    }
    let s0 = 4.0 * std::f64::consts::SQRT_2 * r0;
    let c_gamma = 2f64.powf(1.0 - alpha) * (d as f64).powf(0.5 * (1.0 - alpha));
    let c_x = kernel.lipschitz_bound() * c_gamma * (2.0 * r0).powf(alpha);
    let c_v = kernel.sup_value() * c_gamma;
    let k1 = std::f64::consts::SQRT_2 * c_x * 3f64.sqrt();
    let k2 = std::f64::consts::SQRT_2 * c_v * (2.0 + 2f64.powf(1.0 - alpha)).sqrt();
    let l = s0.powf(1.0 - alpha) + kappa * (k1 * s0.powf(1.0 - alpha) + k2);
    Ok(HolderConstants {
        s0,
        c_gamma,
        c_x,
        c_v,
        k1,
        k2,
        l,
    })
}

/// Both sides of `|F(u) - F(ubar)| <= L |u - ubar|^alpha` in the
/// `m + 2^-i` weighted norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `|u|_B = sup_i |x_i| + sup_i |v_i|`.
pub fn sup_norm(state: &ParticleState) -> f64 {
    let sup = |rows: &[f64]| {
        rows.chunks(state.d())
            .map(|r| r.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    sup(state.x()) + sup(state.v())
}

pub fn holder_audit(
    u: &ParticleState,
    ubar: &ParticleState,
    profile: &SenderProfile,
    kernel: &KernelSpec,
    kappa: f64,
    alpha: f64,
    r0: f64,
) -> Result<HolderCheck> {
    if u.n() != ubar.n() || u.d() != ubar.d() {
        return Err(Error::Shape(
            "Hölder audit needs states of equal shape".into(),
        ));
    }
    let consts = holder_constant(r0, alpha, kappa, kernel, u.d())?;
    let (fx, fv) = vector_field(u, profile, kernel, kappa, alpha)?;
    let (gx, gv) = vector_field(ubar, profile, kernel, kappa, alpha)?;
    let d = u.d();
    let weights: Vec<f64> = profile
        .weights()
        .iter()
        .enumerate()
        .map(|(i, m)| m + 0.5f64.powi(i as i32 + 1))
        .collect();
    let weighted = |a: &[f64], b: &[f64]| {
        a.chunks(d)
            .zip(b.chunks(d))
            .zip(&weights)
            .map(|((p, q), w)| w * p.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    };
    let lhs = weighted(&fx, &gx) + weighted(&fv, &gv);
    let du = weighted(u.x(), ubar.x()) + weighted(u.v(), ubar.v());
    let rhs = consts.l * du.powf(alpha);
    Ok(HolderCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12,
    })
}
