//! Communication weights, the sublinear coupling map, sender mass profiles
//! and switching signals.
//!
//! Everything here is an immutable value; evaluation is pure.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(weights) + tail_mass = 1`.
pub const MASS_TOL: f64 = 1e-12;

/// Largest truncation length `truncate_infinite_profile` will produce.
pub const MAX_TRUNCATION: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `psi(r) = (1 + r^2)^(-beta)`.
    CuckerSmale { beta: f64 },
    /// `psi = 1`.
    Constant,
    /// Piecewise-linear interpolation of `(r, psi)` nodes, clamped to the last
    /// value beyond the grid.
    Tabulated { r: Vec<f64>, psi: Vec<f64> },
}

/// A communication weight normalized to `psi(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    lipschitz_bound: f64,
    sup_value: f64,
}

impl KernelSpec {
    pub fn cucker_smale(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self {
            family: KernelFamily::CuckerSmale { beta },
            lipschitz_bound: cucker_smale_lipschitz(beta),
            sup_value: 1.0,
        })
    }

    pub fn constant() -> Self {
        Self {
            family: KernelFamily::Constant,
            lipschitz_bound: 0.0,
            sup_value: 1.0,
        }
    }

    /// Builds a tabulated kernel. The grid must start at `r = 0` with
    /// `psi = 1`, be strictly increasing in `r` and non-increasing in `psi`.
    pub fn tabulated(r: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if r.len() != psi.len() || r.is_empty() {
            return Err(Error::Config(format!(
                "tabulated kernel needs equal, nonempty node lists (got {} and {})",
                r.len(),
                psi.len()
            )));
        }
        if r[0] != 0.0 || psi[0] != 1.0 {
            return Err(Error::Config(
                "tabulated kernel must start at (0, 1)".to_string(),
            ));
        }
        if r.iter().chain(psi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "tabulated kernel has non-finite nodes".into(),
            ));
        }
        let mut lip: f64 = 0.0;
        for w in 0..r.len() - 1 {
            let (r0, r1, p0, p1) = (r[w], r[w + 1], psi[w], psi[w + 1]);
            if r1 <= r0 {
                return Err(Error::Config(
                    "tabulated r grid must be strictly increasing".into(),
                ));
            }
            if p1 > p0 || p1 < 0.0 {
                return Err(Error::Config(
                    "tabulated psi values must be non-increasing and nonnegative".into(),
                ));
            }
            lip = lip.max((p0 - p1) / (r1 - r0));
        }
        Ok(Self {
            family: KernelFamily::Tabulated { r, psi },
            lipschitz_bound: lip,
            sup_value: 1.0,
        })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn sup_value(&self) -> f64 {
        self.sup_value
    }

    /// `Some(beta)` for the Cucker-Smale family, `Some(0)` for the constant kernel.
    pub fn beta(&self) -> Option<f64> {
        match self.family {
            KernelFamily::CuckerSmale { beta } => Some(beta),
            KernelFamily::Constant => Some(0.0),
            KernelFamily::Tabulated { .. } => None,
        }
    }

    /// True when the kernel attains zero somewhere. Flocking-time bounds may
    /// degenerate for such kernels.
    pub fn reaches_zero(&self) -> bool {
        match &self.family {
            KernelFamily::Tabulated { psi, .. } => psi.last().is_some_and(|&p| p == 0.0),
            _ => false,
        }
    }

    /// Kernel value without the domain check. `r` must be nonnegative.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        match &self.family {
            KernelFamily::CuckerSmale { beta } => {
                if *beta == 0.0 {
                    1.0
                } else {
                    (1.0 + r * r).powf(-beta)
                }
            }
            KernelFamily::Constant => 1.0,
            KernelFamily::Tabulated { r: grid, psi } => {
                let last = grid.len() - 1;
                if r >= grid[last] {
                    return psi[last];
                }
                // first node strictly greater than r
                let hi = grid.partition_point(|&g| g <= r);
                let lo = hi - 1;
                let w = (r - grid[lo]) / (grid[hi] - grid[lo]);
                psi[lo] + w * (psi[hi] - psi[lo])
            }
        }
    }
}

/// `sup_r |d/dr (1 + r^2)^(-beta)|`, attained at `r^2 = 1 / (2 beta + 1)`.
fn cucker_smale_lipschitz(beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let r2 = 1.0 / (2.0 * beta + 1.0);
    2.0 * beta * r2.sqrt() * (1.0 + r2).powf(-beta - 1.0)
}

/// Evaluates the communication weight at distance `r >= 0`.
pub fn psi(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("psi needs r >= 0, got {r}")));
    }
    Ok(spec.eval(r))
}

/// Scalar sign-power `sgn(x) |x|^alpha`.
#[inline]
pub fn sign_power(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x.powf(alpha)
    } else if x < 0.0 {
        -(-x).powf(alpha)
    } else {
        0.0
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Componentwise sublinear coupling map.
pub fn gamma(v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    Ok(v.iter().map(|&c| sign_power(c, alpha)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileSource {
    Uniform,
    PowerLaw { p: f64 },
    Geometric { ratio: f64 },
    Explicit,
}

/// Nonnegative sender weights. For truncations of infinite profiles the
/// dropped mass is kept in `tail_mass` and the weights are not renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderProfile {
    weights: Vec<f64>,
    tail_mass: f64,
    source: ProfileSource,
}

impl SenderProfile {
    fn validated(weights: Vec<f64>, tail_mass: f64, source: ProfileSource) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config(
                "sender profile must have at least one agent".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(
                "sender weights must be finite and nonnegative".into(),
            ));
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(Error::Config(format!("invalid tail mass {tail_mass}")));
        }
        let total: f64 = weights.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Config(format!(
                "sender weights plus tail mass must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            weights,
            tail_mass,
            source,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("profile length must be >= 1".into()));
        }
        Self::validated(vec![1.0 / n as f64; n], 0.0, ProfileSource::Uniform)
    }

    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        Self::validated(weights, 0.0, ProfileSource::Explicit)
    }

    pub fn explicit_with_tail(weights: Vec<f64>, tail_mass: f64) -> Result<Self> {
        Self::validated(weights, tail_mass, ProfileSource::Explicit)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Mass carried by the retained senders.
    pub fn retained_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same weights under a permutation of agent indices: agent `i` gets the
    /// weight previously carried by agent `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "permutation of length {} for profile of length {}",
                perm.len(),
                self.weights.len()
            )));
        }
        let weights = perm.iter().map(|&j| self.weights[j]).collect();
        Ok(Self {
            weights,
            tail_mass: self.tail_mass,
            source: ProfileSource::Explicit,
        })
    }
}

/// `m_j = j^(-p) / sum_k k^(-p)` on `{1, ..., n}`.
pub fn make_power_law_profile(n: usize, p: f64) -> Result<SenderProfile> {
    if n == 0 {
        return Err(Error::Config("profile length must be >= 1".into()));
    }
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::Config(format!(
            "power-law exponent must be >= 0, got {p}"
        )));
    }
    let raw: Vec<f64> = (1..=n).map(|j| (j as f64).powf(-p)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    SenderProfile::validated(weights, 0.0, ProfileSource::PowerLaw { p })
}

/// Infinite sender profiles with a computable tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfiniteProfile {
    /// `m_j = (1 - ratio) ratio^(j-1)`, so `ratio = 1/2` gives `m_j = 2^-j`.
    Geometric { ratio: f64 },
    /// `m_j = j^(-p) / zeta(p)`, `p > 1`.
    PowerLaw { p: f64 },
}

/// Truncates an infinite profile at the smallest `N` whose dropped mass is
/// below `eps`. The weights keep their infinite-profile values.
pub fn truncate_infinite_profile(source: InfiniteProfile, eps: f64) -> Result<SenderProfile> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    match source {
        InfiniteProfile::Geometric { ratio } => {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::UnsupportedProfile(format!(
                    "geometric ratio {ratio} outside (0, 1)"
                )));
            }
            let mut n = 1usize;
            let mut tail = ratio;
            while tail >= eps {
                n += 1;
                tail *= ratio;
                if n > MAX_TRUNCATION {
                    return Err(Error::Config(format!(
                        "truncation needs more than {MAX_TRUNCATION} agents"
                    )));
                }
            }
            let weights = (0..n)
                .map(|j| (1.0 - ratio) * ratio.powi(j as i32))
                .collect();
            SenderProfile::validated(
                weights,
                ratio.powi(n as i32),
                ProfileSource::Geometric { ratio },
            )
        }
        InfiniteProfile::PowerLaw { p } => {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::UnsupportedProfile(format!(
                    "power-law exponent {p} has no finite mass (need p > 1)"
                )));
            }
            let zeta = power_tail(p, 0);
            // integral bound: sum_{j>N} j^-p <= N^(1-p) / (p - 1)
            let bound_n = ((eps * (p - 1.0) * zeta).powf(-1.0 / (p - 1.0))).floor() + 1.0;
            if !(bound_n <= MAX_TRUNCATION as f64) {
                return Err(Error::Config(format!(
                    "truncation needs more than {MAX_TRUNCATION} agents"
                )));
            }
            let mut n = (bound_n as usize).max(1);
            while n > 1 && power_tail(p, n - 1) / zeta < eps {
                n -= 1;
            }
            while power_tail(p, n) / zeta >= eps {
                n += 1;
            }
            let weights = (1..=n).map(|j| (j as f64).powf(-p) / zeta).collect();
            SenderProfile::validated(
                weights,
                power_tail(p, n) / zeta,
                ProfileSource::PowerLaw { p },
            )
        }
    }
}

/// `sum_{j > n} j^(-p)` for `p > 1`: direct summation up to a cutoff, then
/// an Euler-Maclaurin remainder.
fn power_tail(p: f64, n: usize) -> f64 {
    let cutoff = n.max(2000);
    let direct: f64 = ((n + 1)..=cutoff).rev().map(|j| (j as f64).powf(-p)).sum();
    let m = cutoff as f64;
    // sum_{j > m} f(j) = int_m^inf f - f(m)/2 - f'(m)/12 + f'''(m)/720 - ...
    let f = m.powf(-p);
    let integral = m.powf(1.0 - p) / (p - 1.0);
    let d1 = -p * m.powf(-p - 1.0);
    let d3 = -p * (p + 1.0) * (p + 2.0) * m.powf(-p - 3.0);
    direct + integral - 0.5 * f - d1 / 12.0 + d3 / 720.0
}

/// Piecewise-constant selection of the active sender profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SwitchingSignal {
    /// `profiles[n]` is active on `[switch_times[n], switch_times[n+1])`.
    Explicit {
        switch_times: Vec<f64>,
        profiles: Vec<SenderProfile>,
    },
    /// The base profile on `[0, period)`, then an independent seeded
    /// Fisher-Yates shuffle of its weights on every `[n period, (n+1) period)`.
    Permuting {
        base: SenderProfile,
        period: f64,
        seed: u64,
    },
}

impl SwitchingSignal {
    pub fn explicit(switch_times: Vec<f64>, profiles: Vec<SenderProfile>) -> Result<Self> {
        if switch_times.is_empty() || switch_times.len() != profiles.len() {
            return Err(Error::Config(
                "switching signal needs one profile per switch instant".into(),
            ));
        }
        if switch_times[0] != 0.0 {
            return Err(Error::Config("first switch instant must be 0".into()));
        }
        if switch_times
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::Config(
                "switch instants must be strictly increasing".into(),
            ));
        }
        let n = profiles[0].len();
        if profiles.iter().any(|p| p.len() != n) {
            return Err(Error::Shape(
                "all switching profiles must have equal length".into(),
            ));
        }
        Ok(Self::Explicit {
            switch_times,
            profiles,
        })
    }

    pub fn permuting(base: SenderProfile, period: f64, seed: u64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Config(format!(
                "switch period must be positive, got {period}"
            )));
        }
        Ok(Self::Permuting { base, period, seed })
    }

    pub fn n_agents(&self) -> usize {
        match self {
            Self::Explicit { profiles, .. } => profiles[0].len(),
            Self::Permuting { base, .. } => base.len(),
        }
    }

    /// Index `n` of the interval `[t_n, t_{n+1})` containing `t`.
    pub fn interval_index(&self, t: f64) -> usize {
        match self {
            Self::Explicit { switch_times, .. } => {
                switch_times.partition_point(|&s| s <= t).saturating_sub(1)
            }
            Self::Permuting { period, .. } => {
                if t <= 0.0 {
                    return 0;
                }
                let mut n = (t / period).floor() as usize;
                // keep agreement with switch_time(n) = n * period under rounding
                while n > 0 && n as f64 * period > t {
                    n -= 1;
                }
                while (n + 1) as f64 * period <= t {
                    n += 1;
                }
                n
            }
        }
    }

    /// Start of interval `n`, or `None` past the last explicit instant.
    pub fn switch_time(&self, n: usize) -> Option<f64> {
        match self {
            Self::Explicit { switch_times, .. } => switch_times.get(n).copied(),
            Self::Permuting { period, .. } => Some(n as f64 * period),
        }
    }

    /// First switch instant strictly after `t`.
    pub fn next_switch_after(&self, t: f64) -> Option<f64> {
        self.switch_time(self.interval_index(t) + 1)
    }

    pub fn profile_for_interval(&self, n: usize) -> SenderProfile {
        match self {
            Self::Explicit { profiles, .. } => profiles[n.min(profiles.len() - 1)].clone(),
            Self::Permuting { base, seed, .. } => {
                if n == 0 {
                    return base.clone();
                }
                let mut perm: Vec<usize> = (0..base.len()).collect();
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                rng.set_stream(n as u64);
                perm.shuffle(&mut rng);
                base.permuted(&perm)
                    .expect("permutation has profile length")
            }
        }
    }

    /// The profile active at time `t >= 0` (right-continuous).
    pub fn profile_at(&self, t: f64) -> SenderProfile {
        self.profile_for_interval(self.interval_index(t))
    }
}

/// Convenience wrapper matching the operation name used across the crate.
pub fn profile_at(signal: &SwitchingSignal, t: f64) -> SenderProfile {
    signal.profile_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cucker_smale_values() {
        let k = KernelSpec::cucker_smale(0.25).unwrap();
        assert_eq!(psi(&k, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(psi(&k, 1.0).unwrap(), 2f64.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(psi(&k, 1.0).unwrap(), 0.840_896_4, epsilon = 1e-7);
        let flat = KernelSpec::cucker_smale(0.0).unwrap();
        for r in [0.0, 0.3, 7.0, 1e9] {
            assert_eq!(psi(&flat, r).unwrap(), 1.0);
        }
        assert!(matches!(psi(&k, -1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn lipschitz_matches_grid_search() {
        for beta in [0.1, 0.25, 0.5, 1.0, 3.0] {
            let k = KernelSpec::cucker_smale(beta).unwrap();
            let brute = (0..200_000)
                .map(|i| {
                    let r = i as f64 * 1e-4;
                    2.0 * beta * r * (1.0 + r * r).powf(-beta - 1.0)
                })
                .fold(0.0, f64::max);
            assert!((k.lipschitz_bound() - brute).abs() < 1e-7, "beta {beta}");
        }
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let k = KernelSpec::tabulated(vec![0.0, 1.0, 3.0], vec![1.0, 0.5, 0.1]).unwrap();
        assert_eq!(k.eval(0.5), 0.75);
        assert_abs_diff_eq!(k.eval(2.0), 0.3, epsilon = 1e-15);
        assert_eq!(k.eval(100.0), 0.1);
        assert_eq!(k.lipschitz_bound(), 0.5);
        assert!(!k.reaches_zero());
        let z = KernelSpec::tabulated(vec![0.0, 2.0], vec![1.0, 0.0]).unwrap();
        assert!(z.reaches_zero());
        assert!(KernelSpec::tabulated(vec![0.0, 1.0], vec![1.0, 1.5]).is_err());
        assert!(KernelSpec::tabulated(vec![0.0, 0.0], vec![1.0, 0.5]).is_err());
        assert!(KernelSpec::tabulated(vec![0.1, 1.0], vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(&[0.0, 0.0], 0.3).unwrap(), vec![0.0, 0.0]);
        assert_eq!(gamma(&[4.0, -9.0], 0.5).unwrap(), vec![2.0, -3.0]);
        assert_abs_diff_eq!(
            gamma(&[2.0], 0.5).unwrap()[0],
            std::f64::consts::SQRT_2,
            epsilon = 1e-15
        );
        assert!(gamma(&[1.0], 1.0).is_err());
        assert!(gamma(&[1.0], 0.0).is_err());
    }

    #[test]
    fn power_law_examples() {
        let p = make_power_law_profile(3, 2.0).unwrap();
        let want = [36.0 / 49.0, 9.0 / 49.0, 4.0 / 49.0];
        for (w, e) in p.weights().iter().zip(want) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
        }
        assert_eq!(
            make_power_law_profile(4, 0.0).unwrap().weights(),
            &[0.25; 4]
        );
        assert_eq!(make_power_law_profile(1, 3.7).unwrap().weights(), &[1.0]);
        assert!(make_power_law_profile(0, 2.0).is_err());
    }

    #[test]
    fn geometric_truncation() {
        let half = InfiniteProfile::Geometric { ratio: 0.5 };
        let p = truncate_infinite_profile(half, 1e-6).unwrap();
        assert_eq!(p.len(), 20);
        assert_abs_diff_eq!(p.tail_mass(), 2f64.powi(-20), epsilon = 1e-20);
        let q = truncate_infinite_profile(half, 0.6).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.tail_mass(), 0.5);
        assert_eq!(q.weights(), &[0.5]);
    }

    #[test]
    fn power_law_truncation_agrees_with_brute_force() {
        let p = truncate_infinite_profile(InfiniteProfile::PowerLaw { p: 2.0 }, 1e-3).unwrap();
        let n = p.len();
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        // brute-force partial sums, independent of the Euler-Maclaurin tail
        let partial = |k: usize| (1..=k).map(|j| 1.0 / (j * j) as f64).sum::<f64>();
        let tail_n = (zeta2 - partial(n)) / zeta2;
        let tail_prev = (zeta2 - partial(n - 1)) / zeta2;
        assert!(tail_n < 1e-3 && tail_prev >= 1e-3, "n = {n}");
        assert!(tail_n <= (1.0 / n as f64) / zeta2);
        assert_abs_diff_eq!(p.tail_mass(), tail_n, epsilon = 1e-12);
        assert_eq!(n, 608);
    }

    #[test]
    fn unsupported_profiles() {
        let r = truncate_infinite_profile(InfiniteProfile::PowerLaw { p: 1.0 }, 1e-3);
        assert!(matches!(r, Err(Error::UnsupportedProfile(_))));
        let r = truncate_infinite_profile(InfiniteProfile::Geometric { ratio: 1.0 }, 1e-3);
        assert!(matches!(r, Err(Error::UnsupportedProfile(_))));
    }

    #[test]
    fn explicit_signal_lookup() {
        let ps: Vec<_> = [1.0, 0.5, 0.0]
            .iter()
            .map(|&a| SenderProfile::explicit(vec![a, 1.0 - a]).unwrap())
            .collect();
        let s = SwitchingSignal::explicit(vec![0.0, 1.0, 2.0], ps.clone()).unwrap();
        assert_eq!(profile_at(&s, 1.5), ps[1]);
        assert_eq!(profile_at(&s, 1.0), ps[1]);
        assert_eq!(profile_at(&s, 0.999_999), ps[0]);
        assert_eq!(profile_at(&s, 99.0), ps[2]);
        assert_eq!(s.next_switch_after(1.0), Some(2.0));
        assert_eq!(s.next_switch_after(2.5), None);
        assert!(SwitchingSignal::explicit(vec![0.0, 0.0], ps[..2].to_vec()).is_err());
        assert!(SwitchingSignal::explicit(vec![0.5], ps[..1].to_vec()).is_err());
    }

    #[test]
    fn permuting_signal_is_reproducible() {
        let base = make_power_law_profile(30, 2.0).unwrap();
        let s = SwitchingSignal::permuting(base.clone(), 1.0, 7).unwrap();
        assert_eq!(s.profile_at(0.5), base);
        let a = s.profile_at(3.25);
        let b = s.profile_at(3.25);
        assert_eq!(a, b);
        assert_ne!(a, base);
        assert_eq!(s.profile_at(3.0), a);
        let mut sorted = a.weights().to_vec();
        sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert_eq!(sorted, base.weights());
        let other = SwitchingSignal::permuting(base, 1.0, 8).unwrap();
        assert_ne!(other.profile_at(3.25), a);
    }

    #[test]
    fn fractional_period_boundaries() {
        let base = SenderProfile::uniform(3).unwrap();
        let s = SwitchingSignal::permuting(base, 0.1, 1).unwrap();
        for n in 0..200usize {
            let t = s.switch_time(n).unwrap();
            assert_eq!(s.interval_index(t), n);
            assert_eq!(s.next_switch_after(t), s.switch_time(n + 1));
        }
    }

    fn any_kernel() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            (0.0..3.0f64).prop_map(|b| KernelSpec::cucker_smale(b).unwrap()),
            Just(KernelSpec::constant()),
            proptest::collection::vec((0.01..2.0f64, 0.0..1.0f64), 1..6).prop_map(|steps| {
                let mut r = vec![0.0];
                let mut p = vec![1.0];
                for (dr, shrink) in steps {
                    r.push(r.last().unwrap() + dr);
                    p.push(p.last().unwrap() * shrink);
                }
                KernelSpec::tabulated(r, p).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn kernel_monotone_and_lipschitz(k in any_kernel(), a in 0.0..20.0f64, b in 0.0..20.0f64) {
            let (r1, r2) = if a <= b { (a, b) } else { (b, a) };
            let (p1, p2) = (psi(&k, r1).unwrap(), psi(&k, r2).unwrap());
            prop_assert!(p2 <= p1);
            prop_assert!((0.0..=1.0).contains(&p2));
            prop_assert!((p1 - p2).abs() <= k.lipschitz_bound() * (r2 - r1) + 1e-12);
        }

        #[test]
        fn gamma_odd_and_monotone(v in proptest::collection::vec(-50.0..50.0f64, 1..5),
                                  w in proptest::collection::vec(-50.0..50.0f64, 1..5),
                                  alpha in 0.01..0.99f64) {
            let neg: Vec<f64> = v.iter().map(|c| -c).collect();
            let g = gamma(&v, alpha).unwrap();
            let gn = gamma(&neg, alpha).unwrap();
            for (a, b) in g.iter().zip(&gn) {
                prop_assert_eq!(*a, -*b);
            }
            let gw = gamma(&w, alpha).unwrap();
            for k in 0..v.len().min(w.len()) {
                if v[k] >= w[k] {
                    prop_assert!(g[k] >= gw[k]);
                }
            }
        }

        #[test]
        fn constructed_profiles_have_unit_mass(n in 1usize..400, p in 0.0..4.0f64,
                                               eps in 1e-9..0.5f64, ratio in 0.05..0.95f64,
                                               q in 1.2..4.0f64) {
            let check = |pr: &SenderProfile| {
                (pr.retained_mass() + pr.tail_mass() - 1.0).abs() <= MASS_TOL
                    && pr.weights().iter().all(|w| *w >= 0.0)
            };
            prop_assert!(check(&make_power_law_profile(n, p).unwrap()));
            prop_assert!(check(&SenderProfile::uniform(n).unwrap()));
            let g = truncate_infinite_profile(InfiniteProfile::Geometric { ratio }, eps).unwrap();
            prop_assert!(check(&g));
            prop_assert!(g.tail_mass() < eps);
            if let Ok(pl) = truncate_infinite_profile(InfiniteProfile::PowerLaw { p: q }, eps.max(1e-4)) {
                prop_assert!(check(&pl));
                prop_assert!(pl.tail_mass() < eps.max(1e-4));
            }
        }
    }
}
