use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flockbound::{flocking_time_bound, InitialEnvelope};
use flockbound_harness::output::{self, Format};
use flockbound_harness::scenario::Switching;
use flockbound_harness::suites::{self, Batch, Report};
use flockbound_harness::{
    draw_initial, run, sweep_alpha, switching_demo, FailureRecord, HarnessError, RunSummary,
    Scenario, EXIT_NUMERICAL, EXIT_VIOLATION,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "flockbound",
    version,
    about = "Finite-time flocking experiments with a-priori bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series and summary.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Also write per-agent positions and velocities.
        #[arg(long)]
        agents: bool,
    },
    /// Print the a-priori bounds for the scenario's initial data.
    Bound {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run the scenario once per alpha with a shared seed.
    SweepAlpha {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.4,0.8")]
        alphas: Vec<f64>,
    },
    /// Run with permuted sender profiles and plot velocities against v_c.
    SwitchingDemo {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the default verification battery, or a batch of scenarios.
    Verify {
        /// TOML or JSON file with `[[scenario]]` entries.
        #[arg(long)]
        batch: Option<PathBuf>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
        #[arg(long)]
        consensus_tol: Option<f64>,
        /// Write report.json here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML (or .json) file with scenario fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of agents [default: 50]
    #[arg(long)]
    n: Option<usize>,
    /// Spatial dimension [default: 1]
    #[arg(long)]
    d: Option<usize>,
    /// Coupling exponent in (0, 1) [default: 0.6]
    #[arg(long)]
    alpha: Option<f64>,
    /// Kernel decay, psi(r) = (1 + r^2)^-beta [default: 0.25]
    #[arg(long)]
    beta: Option<f64>,
    /// Coupling strength [default: 1]
    #[arg(long)]
    kappa: Option<f64>,
    /// Sender weights proportional to j^-p [default: 2]
    #[arg(long)]
    p: Option<f64>,
    /// Initial positions drawn from U[-rx, rx] [default: 5]
    #[arg(long)]
    rx: Option<f64>,
    /// Initial velocities drawn from U[-rv, rv] [default: 2]
    #[arg(long)]
    rv: Option<f64>,
    /// Defaults to $FLOCKBOUND_SEED, then 1.
    #[arg(long)]
    seed: Option<u64>,
    /// End time [default: 1.05 x flocking-time bound, else 15]
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    consensus_tol: Option<f64>,
    /// Permute the sender profile every `period` time units.
    #[arg(long)]
    switch_period: Option<f64>,
    #[arg(long)]
    switch_seed: Option<u64>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write dv.svg, dx.svg and velocities.svg.
    #[arg(long)]
    plot: bool,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario, HarnessError> {
        let mut s = match &self.config {
            Some(path) => Scenario::from_file(path)?,
            None => Scenario::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        set!(n, d, alpha, beta, kappa, p, rx, rv, seed);
        if self.t_max.is_some() {
            s.t_max = self.t_max;
        }
        if let Some(v) = self.rtol {
            s.tolerances.rtol = v;
        }
        if let Some(v) = self.atol {
            s.tolerances.atol = v;
        }
        if let Some(v) = self.consensus_tol {
            s.tolerances.consensus_tol = v;
        }
        if self.switch_period.is_some() || self.switch_seed.is_some() {
            let base = s.switching.unwrap_or(Switching {
                period: 1.0,
                seed: s.seed,
            });
            s.switching = Some(Switching {
                period: self.switch_period.unwrap_or(base.period),
                seed: self.switch_seed.unwrap_or(base.seed),
            });
        }
        s.validate()?;
        Ok(s)
    }
}

/// Failures carry the scenario, when known, for `failure.json`.
type CmdResult = Result<u8, Box<(Option<Scenario>, HarnessError)>>;

fn status(summary: &RunSummary) -> u8 {
    if summary.theory_failed() {
        EXIT_NUMERICAL as u8
    } else if !summary.ok {
        EXIT_VIOLATION as u8
    } else {
        0
    }
}

fn report_failure(dir: Option<&Path>, scenario: Option<&Scenario>, err: &HarnessError) -> u8 {
    eprintln!("error: {err}");
    if let (Some(dir), Some(s)) = (dir, scenario) {
        let record = FailureRecord::new(s, err);
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = output::write_json(&dir.join("failure.json"), &record);
        }
    }
    err.exit_code() as u8
}

fn print_summary(s: &RunSummary) {
    println!(
        "seed {} alpha {}: t_f {} (bound {}), Dx max {:.4} (Dx_infty {}), {} [{:.2} s]",
        s.seed,
        s.scenario.alpha,
        s.observed_t_f
            .map_or("not reached".into(), |t| format!("{t:.4}")),
        s.t_f_bound.map_or("none".into(), |t| format!("{t:.4}")),
        s.dx_max_observed,
        s.dx_infty.map_or("none".into(), |t| format!("{t:.4}")),
        if s.ok {
            "audits pass".to_string()
        } else {
            s.violations.join("; ")
        },
        s.wall_time
    );
    if let Some(e) = &s.theory_error {
        println!("theory: {e}");
    }
}

fn simulate(args: &ScenarioArgs, out: &OutputArgs, agents: bool) -> CmdResult {
    let scenario = args.resolve().map_err(|e| Box::new((None, e)))?;
    let fail = |e| Box::new((Some(scenario.clone()), e));
    let (traj, summary) = run(&scenario).map_err(fail)?;
    output::write_run(&out.out, &traj, &summary, out.format, agents, out.plot).map_err(fail)?;
    print_summary(&summary);
    Ok(status(&summary))
}

fn bound(args: &ScenarioArgs) -> CmdResult {
    let scenario = args.resolve().map_err(|e| Box::new((None, e)))?;
    let fail = |e: HarnessError| Box::new((Some(scenario.clone()), e));
    let initial = draw_initial(&scenario);
    let env = InitialEnvelope::from_state(&initial);
    let dv0 = initial.component_diameters();
    let kernel = scenario.kernel().map_err(fail)?;
    let bounds = flocking_time_bound(env, &dv0, scenario.alpha, scenario.kappa, &kernel)
        .map_err(|e| fail(e.into()))?;
    let doc = json!({
        "schema": output::SCHEMA,
        "scenario": scenario,
        "a": env.a,
        "b": env.b,
        "Dv0": dv0,
        "bounds": bounds,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("bounds serialize")
    );
    for (k, a) in bounds.alignment.iter().enumerate() {
        if let flockbound::theory::Alignment::NoGuarantee {
            reachable,
            required,
        } = a
        {
            eprintln!("component {}: no finite-time guarantee, int_0^inf psi(a + b s) ds = {reachable} < {required}", k + 1);
        }
    }
    Ok(0)
}

fn sweep(args: &ScenarioArgs, out: &OutputArgs, alphas: &[f64]) -> CmdResult {
    let scenario = args.resolve().map_err(|e| Box::new((None, e)))?;
    let fail = |e| Box::new((Some(scenario.clone()), e));
    let results = sweep_alpha(&scenario, alphas).map_err(fail)?;
    output::write_sweep(&out.out, &results, out.format, out.plot).map_err(fail)?;
    let mut code = 0;
    for (_, s) in &results {
        print_summary(s);
        code = code.max(status(s));
    }
    Ok(code)
}

fn demo(args: &ScenarioArgs, out: &OutputArgs) -> CmdResult {
    let mut scenario = args.resolve().map_err(|e| Box::new((None, e)))?;
    if scenario.switching.is_none() {
        scenario.switching = Some(Switching {
            period: 1.0,
            seed: scenario.seed,
        });
    }
    let fail = |e| Box::new((Some(scenario.clone()), e));
    let (traj, summary, svg) = switching_demo(&scenario).map_err(fail)?;
    output::write_run(&out.out, &traj, &summary, out.format, false, out.plot).map_err(fail)?;
    std::fs::write(out.out.join("velocities.svg"), svg).map_err(|e| fail(e.into()))?;
    let rep = flockbound_harness::run::mean_velocity_report(&traj);
    output::write_json(&out.out.join("mean_velocity.json"), &rep).map_err(fail)?;
    print_summary(&summary);
    println!(
        "v_c: {} interval boundaries, max drift within intervals {:.3e}",
        rep.jumps.len(),
        rep.max_drift_within_intervals
    );
    Ok(status(&summary))
}

fn verify(
    batch: Option<&Path>,
    rtol: Option<f64>,
    atol: Option<f64>,
    consensus_tol: Option<f64>,
    out: Option<&Path>,
) -> CmdResult {
    let fail = |e| Box::new((None, e));
    let checks = match batch {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| fail(e.into()))?;
            let mut b =
                Batch::parse(&text, path.extension().is_some_and(|e| e == "json")).map_err(fail)?;
            for s in &mut b.scenario {
                s.tolerances.rtol = rtol.unwrap_or(s.tolerances.rtol);
                s.tolerances.atol = atol.unwrap_or(s.tolerances.atol);
                s.tolerances.consensus_tol = consensus_tol.unwrap_or(s.tolerances.consensus_tol);
            }
            suites::batch(&b.scenario)
        }
        None => {
            let mut tol = flockbound_harness::Tolerances::default();
            tol.rtol = rtol.unwrap_or(tol.rtol);
            tol.atol = atol.unwrap_or(tol.atol);
            tol.consensus_tol = consensus_tol.unwrap_or(tol.consensus_tol);
            suites::default_battery(&tol)
        }
    };
    let report = Report::new(checks);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.checks {
        eprintln!("{}", c.line());
    }
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| fail(e.into()))?;
            output::write_json(&dir.join("report.json"), &report).map_err(fail)?;
        }
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    }
    Ok(if report.passed {
        0
    } else {
        EXIT_VIOLATION as u8
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, dir) = match &cli.command {
        Command::Simulate {
            scenario,
            out,
            agents,
        } => (simulate(scenario, out, *agents), Some(out.out.as_path())),
        Command::Bound { scenario } => (bound(scenario), None),
        Command::SweepAlpha {
            scenario,
            out,
            alphas,
        } => (sweep(scenario, out, alphas), Some(out.out.as_path())),
        Command::SwitchingDemo { scenario, out } => (demo(scenario, out), Some(out.out.as_path())),
        Command::Verify {
            batch,
            rtol,
            atol,
            consensus_tol,
            out,
        } => (
            verify(
                batch.as_deref(),
                *rtol,
                *atol,
                *consensus_tol,
                out.as_deref(),
            ),
            out.as_deref(),
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            let (scenario, err) = *failure;
            ExitCode::from(report_failure(dir, scenario.as_ref(), &err))
        }
    }
}
