use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flockbound::theory::decay_envelope;
use flockbound::{InitialEnvelope, Trajectory};
use serde::Serialize;

use crate::run::{RunSummary, SweepRow};
use crate::{plot, HarnessError};

/// Version of every JSON document written by the harness.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Header `t,Dv_1..Dv_d,Dx,vc_1..vc_d,lyap,M_1..M_d,m_1..m_d`.
pub fn timeseries_header(d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=d).map(|k| format!("Dv_{k}")));
    h.push("Dx".into());
    h.extend((1..=d).map(|k| format!("vc_{k}")));
    h.push("lyap".into());
    h.extend((1..=d).map(|k| format!("M_{k}")));
    h.extend((1..=d).map(|k| format!("m_{k}")));
    h
}

pub fn write_timeseries_csv<W: Write>(out: W, traj: &Trajectory) -> Result<(), HarnessError> {
    let d = traj.last_state().d();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(timeseries_header(d))?;
    for f in traj.frames() {
        let mut row = vec![f.t];
        row.extend(&f.dv);
        row.push(f.dx);
        row.extend(&f.vc);
        row.push(f.lyap);
        row.extend(&f.max);
        row.extend(&f.min);
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `t,agent,x_1..x_d,v_1..v_d`.
pub fn write_agents_csv<W: Write>(out: W, traj: &Trajectory) -> Result<(), HarnessError> {
    let d = traj.last_state().d();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    header.extend((1..=d).map(|k| format!("v_{k}")));
    w.write_record(&header)?;
    for s in &traj.samples {
        let st = &s.state;
        for i in 0..st.n() {
            let mut row = vec![format!("{:e}", st.t()), i.to_string()];
            row.extend(
                st.x_row(i)
                    .iter()
                    .chain(st.v_row(i))
                    .map(|v| format!("{v:e}")),
            );
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct Series<'a> {
    frames: Vec<&'a flockbound::DiagnosticsFrame>,
}

/// Time series, summary and optional plots of one run in `dir`. Returns the
/// written paths.
pub fn write_run(
    dir: &Path,
    traj: &Trajectory,
    summary: &RunSummary,
    format: Format,
    agents: bool,
    plots: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        Format::Csv => {
            let path = dir.join("timeseries.csv");
            write_timeseries_csv(BufWriter::new(File::create(&path)?), traj)?;
            written.push(path);
        }
        Format::Json => {
            let path = dir.join("timeseries.json");
            let body = Series {
                frames: traj.frames().collect(),
            };
            write_json(
                &path,
                &Versioned {
                    schema: SCHEMA,
                    body: &body,
                },
            )?;
            written.push(path);
        }
    }
    if agents {
        let path = dir.join("agents.csv");
        write_agents_csv(BufWriter::new(File::create(&path)?), traj)?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    write_json(&path, summary)?;
    written.push(path);
    if plots {
        written.extend(write_plots(dir, &[("", traj)], summary)?);
    }
    Ok(written)
}

fn envelope_points(traj: &Trajectory, summary: &RunSummary) -> Vec<Vec<(f64, f64)>> {
    let first = &traj.samples[0];
    let env = InitialEnvelope::from_state(&first.state);
    let Ok(kernel) = summary.scenario.kernel() else {
        return Vec::new();
    };
    let t_end = traj.last_state().t();
    first
        .frame
        .dv
        .iter()
        .filter_map(|&dv0| {
            decay_envelope(
                dv0,
                summary.scenario.alpha,
                summary.scenario.kappa,
                &kernel,
                env,
            )
            .ok()
        })
        .map(|e| {
            (0..=400)
                .map(|i| t_end * i as f64 / 400.0)
                .map(|t| (t, e.at(t)))
                .collect()
        })
        .collect()
}

/// `dv.svg`, `dx.svg` and `velocities.svg`. With several runs the envelope and
/// `Dx_infty` overlays are omitted, since each run has its own.
pub fn write_plots(
    dir: &Path,
    runs: &[(&str, &Trajectory)],
    summary: &RunSummary,
) -> Result<Vec<PathBuf>, HarnessError> {
    let single = runs.len() == 1;
    let envelopes = if single {
        envelope_points(runs[0].1, summary)
    } else {
        Vec::new()
    };
    let dx_infty = if single { summary.dx_infty } else { None };
    let files = [
        ("dv.svg", plot::velocity_diameters(runs, &envelopes)),
        ("dx.svg", plot::position_diameter(runs, dx_infty)),
        ("velocities.svg", plot::velocities(runs[0].1, 0)),
    ];
    let mut written = Vec::new();
    for (name, svg) in files {
        let path = dir.join(name);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

/// `sweep.csv` (or `sweep.json`) with one row per alpha, one subdirectory per
/// run and comparison plots.
pub fn write_sweep(
    dir: &Path,
    results: &[(Trajectory, RunSummary)],
    format: Format,
    plots: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let rows: Vec<SweepRow> = results.iter().map(|(_, s)| SweepRow::from(s)).collect();
    match format {
        Format::Csv => {
            let path = dir.join("sweep.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record([
                "alpha",
                "observed_t_f",
                "t_f_bound",
                "Dx_max_observed",
                "Dx_infty",
                "ok",
            ])?;
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
            for r in &rows {
                w.write_record([
                    r.alpha.to_string(),
                    opt(r.observed_t_f),
                    opt(r.t_f_bound),
                    format!("{:e}", r.dx_max_observed),
                    opt(r.dx_infty),
                    r.ok.to_string(),
                ])?;
            }
            w.flush()?;
            written.push(path);
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Table<'a> {
                rows: &'a [SweepRow],
            }
            let path = dir.join("sweep.json");
            write_json(
                &path,
                &Versioned {
                    schema: SCHEMA,
                    body: &Table { rows: &rows },
                },
            )?;
            written.push(path);
        }
    }
    for (traj, summary) in results {
        let sub = dir.join(format!("alpha_{}", summary.scenario.alpha));
        written.extend(write_run(&sub, traj, summary, format, false, false)?);
    }
    if plots {
        let labels: Vec<String> = results
            .iter()
            .map(|(_, s)| format!("alpha={}", s.scenario.alpha))
            .collect();
        let runs: Vec<(&str, &Trajectory)> = labels
            .iter()
            .map(String::as_str)
            .zip(results.iter().map(|(t, _)| t))
            .collect();
        written.extend(write_plots(dir, &runs, &results[0].1)?);
    }
    Ok(written)
}
