use std::path::Path;

use flockbound::dynamics::{DEFAULT_ATOL, DEFAULT_CONSENSUS_TOL, DEFAULT_MERGE_TOL, DEFAULT_RTOL};
use flockbound::kernels::make_power_law_profile;
use flockbound::{KernelSpec, Network, ParticleState, SimParams, SwitchingSignal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Environment variable that replaces the built-in default seed.
pub const SEED_ENV: &str = "FLOCKBOUND_SEED";
pub const DEFAULT_SEED: u64 = 1;
/// Horizon used when the theory gives no finite bound.
pub const FALLBACK_T_MAX: f64 = 15.0;
/// Margin applied to the bound when it sets the horizon.
pub const BOUND_HORIZON_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Switching {
    pub period: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub consensus_tol: f64,
    pub merge_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            consensus_tol: DEFAULT_CONSENSUS_TOL,
            merge_tol: DEFAULT_MERGE_TOL,
        }
    }
}

/// One experiment: power-law sender profile, Cucker-Smale kernel and uniform
/// random initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub p: f64,
    pub rx: f64,
    pub rv: f64,
    pub seed: u64,
    /// `None` picks `1.05 * t_f_bound`, or [`FALLBACK_T_MAX`] without a bound.
    pub t_max: Option<f64>,
    pub switching: Option<Switching>,
    pub tolerances: Tolerances,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: 50,
            d: 1,
            alpha: 0.6,
            beta: 0.25,
            kappa: 1.0,
            p: 2.0,
            rx: 5.0,
            rv: 2.0,
            seed: default_seed(),
            t_max: None,
            switching: None,
            tolerances: Tolerances::default(),
        }
    }
}

/// [`DEFAULT_SEED`] unless `FLOCKBOUND_SEED` holds a valid integer.
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

fn positive(name: &str, v: f64) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n == 0 || self.d == 0 {
            return Err(HarnessError::Config(format!(
                "need n, d >= 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HarnessError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(HarnessError::Config(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(HarnessError::Config(format!(
                "p must be >= 0, got {}",
                self.p
            )));
        }
        positive("kappa", self.kappa)?;
        if !(self.rx >= 0.0 && self.rx.is_finite() && self.rv >= 0.0 && self.rv.is_finite()) {
            return Err(HarnessError::Config(format!(
                "ranges must be >= 0, got ({}, {})",
                self.rx, self.rv
            )));
        }
        if let Some(t) = self.t_max {
            positive("t_max", t)?;
        }
        if let Some(sw) = self.switching {
            positive("switching period", sw.period)?;
        }
        let tol = &self.tolerances;
        positive("rtol", tol.rtol)?;
        positive("atol", tol.atol)?;
        positive("consensus_tol", tol.consensus_tol)?;
        positive("merge_tol", tol.merge_tol)?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelSpec, HarnessError> {
        Ok(KernelSpec::cucker_smale(self.beta)?)
    }

    pub fn network(&self) -> Result<Network, HarnessError> {
        let base = make_power_law_profile(self.n, self.p)?;
        Ok(match self.switching {
            None => Network::Fixed(base),
            Some(sw) => Network::Switching(SwitchingSignal::permuting(base, sw.period, sw.seed)?),
        })
    }

    pub fn sim_params(&self, t_max: f64) -> Result<SimParams, HarnessError> {
        let mut params = SimParams::new(
            self.kappa,
            self.alpha,
            self.kernel()?,
            self.network()?,
            t_max,
        );
        params.rtol = self.tolerances.rtol;
        params.atol = self.tolerances.atol;
        params.consensus_tol = self.tolerances.consensus_tol;
        params.merge_tol = self.tolerances.merge_tol;
        params.validate()?;
        Ok(params)
    }

    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.extension().is_some_and(|e| e == "json"))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, HarnessError> {
        let s: Self = if json {
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?
        };
        s.validate()?;
        Ok(s)
    }
}

/// I.i.d. `x ~ U[-rx, rx]^d`, `v ~ U[-rv, rv]^d` from ChaCha20 seeded with
/// `scenario.seed`. Positions are drawn for every agent before velocities.
pub fn draw_initial(scenario: &Scenario) -> ParticleState {
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    let len = scenario.n * scenario.d;
    let mut uniform = |r: f64| -> Vec<f64> {
        (0..len)
            .map(|_| {
                let u: f64 = rng.gen();
                r * (2.0 * u - 1.0)
            })
            .collect()
    };
    let x = uniform(scenario.rx);
    let v = uniform(scenario.rv);
    ParticleState::new(0.0, scenario.n, scenario.d, x, v).expect("shape follows from the scenario")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_preset() {
        let s = Scenario {
            seed: 3,
            ..Scenario::default()
        };
        assert_eq!(
            (s.n, s.d, s.kappa, s.beta, s.p, s.rx, s.rv),
            (50, 1, 1.0, 0.25, 2.0, 5.0, 2.0)
        );
        s.validate().unwrap();
        let w = match s.network().unwrap() {
            Network::Fixed(p) => p,
            _ => unreachable!(),
        };
        let total: f64 = w.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((w.weights()[0] / w.weights()[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn draws_are_reproducible_and_in_range() {
        let s = Scenario {
            n: 200,
            d: 3,
            seed: 11,
            ..Scenario::default()
        };
        let a = draw_initial(&s);
        assert_eq!(a, draw_initial(&s));
        assert!(a.x().iter().all(|c| c.abs() <= 5.0));
        assert!(a.v().iter().all(|c| c.abs() <= 2.0));
        let other = draw_initial(&Scenario {
            seed: 12,
            ..s.clone()
        });
        assert_ne!(a, other);

        let still = draw_initial(&Scenario { rv: 0.0, ..s });
        assert!(still.v().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn large_draw_is_fast() {
        let s = Scenario {
            n: 10_000,
            ..Scenario::default()
        };
        let start = std::time::Instant::now();
        let st = draw_initial(&s);
        assert_eq!(st.n(), 10_000);
        assert!(start.elapsed().as_secs_f64() < 1.0);
    }

    #[test]
    fn config_round_trip_and_rejections() {
        let text = r#"
            n = 20
            alpha = 0.4
            seed = 9
            t_max = 3.0
            [switching]
            period = 1.0
            seed = 4
            [tolerances]
            rtol = 1e-6
        "#;
        let s = Scenario::parse(text, false).unwrap();
        assert_eq!(s.n, 20);
        assert_eq!(
            s.switching,
            Some(Switching {
                period: 1.0,
                seed: 4
            })
        );
        assert_eq!(s.tolerances.rtol, 1e-6);
        assert_eq!(s.tolerances.atol, DEFAULT_ATOL);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::parse(&json, true).unwrap(), s);

        assert!(matches!(
            Scenario::parse("alpha = 1.0", false),
            Err(HarnessError::Config(_))
        ));
        assert!(matches!(
            Scenario::parse("nn = 3", false),
            Err(HarnessError::Config(_))
        ));
        assert!(matches!(
            Scenario::parse("t_max = -1.0", false),
            Err(HarnessError::Config(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn text_round_trip_preserves_scenarios(
            n in 1usize..500,
            d in 1usize..4,
            alpha in 0.01..0.99f64,
            beta in 0.0..2.0f64,
            seed in proptest::prelude::any::<u64>(),
            period in proptest::option::of(0.1..10.0f64),
        ) {
            let s = Scenario {
                n,
                d,
                alpha,
                beta,
                seed,
                switching: period.map(|period| Switching { period, seed: seed ^ 1 }),
                ..Scenario::default()
            };
            // TOML integers are signed 64-bit
            if s.seed <= i64::MAX as u64 && s.switching.is_none_or(|w| w.seed <= i64::MAX as u64) {
                let toml_text = toml::to_string(&s).unwrap();
                proptest::prop_assert_eq!(&Scenario::parse(&toml_text, false).unwrap(), &s);
            }
            let json_text = serde_json::to_string(&s).unwrap();
            proptest::prop_assert_eq!(&Scenario::parse(&json_text, true).unwrap(), &s);
        }
    }
}
