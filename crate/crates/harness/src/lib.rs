//! Experiment harness for `flockbound`: seeded scenarios, runs with audits
//! against the a-priori bounds, sweeps, file output and verification
//! batteries.

pub mod output;
pub mod plot;
pub mod run;
pub mod scenario;
pub mod suites;

pub use run::{run, sweep_alpha, switching_demo, RunSummary, SweepRow};
pub use scenario::{draw_initial, Scenario, Switching, Tolerances};
pub use suites::{Check, Report};

/// Exit status for a run that finished but violated an audited invariant.
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] flockbound::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("output error: {0}")]
    Output(String),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl HarnessError {
    /// 2 for configuration and i/o problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use flockbound::Error as E;
        match self {
            Self::Core(E::Stiffness { .. })
            | Self::Core(E::Divergence { .. })
            | Self::Core(E::Unattainable { .. })
            | Self::Core(E::DegenerateBound { .. })
            | Self::Core(E::ConditionalHypothesisFailed { .. }) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }

    /// Short machine-readable tag for failure records.
    pub fn kind(&self) -> &'static str {
        use flockbound::Error as E;
        match self {
            Self::Config(_) | Self::Core(E::Config(_)) => "config",
            Self::Core(E::Domain(_)) => "domain",
            Self::Core(E::Shape(_)) => "shape",
            Self::Core(E::UnsupportedProfile(_)) => "unsupported_profile",
            Self::Core(E::Stiffness { .. }) => "stiffness",
            Self::Core(E::Divergence { .. }) => "divergence",
            Self::Core(E::Unattainable { .. }) => "unattainable",
            Self::Core(E::DegenerateBound { .. }) => "degenerate_bound",
            Self::Core(E::ConditionalHypothesisFailed { .. }) => "conditional_hypothesis_failed",
            Self::Io(_) => "io",
            Self::Output(_) => "output",
        }
    }
}

/// Serializable record of a run that could not complete.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FailureRecord {
    pub schema: u32,
    pub scenario: Scenario,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl FailureRecord {
    pub fn new(scenario: &Scenario, err: &HarnessError) -> Self {
        Self {
            schema: output::SCHEMA,
            scenario: scenario.clone(),
            kind: err.kind().to_string(),
            message: err.to_string(),
            exit_code: err.exit_code(),
        }
    }
}
