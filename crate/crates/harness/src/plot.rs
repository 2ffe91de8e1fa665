//! Minimal static SVG line charts.

use std::fmt::Write;

use flockbound::Trajectory;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: Option<String>,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub width: f64,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, index: usize) -> Self {
        Self {
            label: Some(label.into()),
            points,
            color: PALETTE[index % PALETTE.len()].to_string(),
            width: 1.8,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` ticks.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let f = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        let pad = 0.5 * y0.abs().max(1.0);
        y0 -= pad;
        y1 += pad;
    }
    let pad = 0.04 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    let xs = nice_step(x1 - x0, 6.0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 + 1e-9 * xs {
        let px = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#e5e5e5"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            fmt_tick(t, xs)
        );
        t += xs;
    }
    let ys = nice_step(y1 - y0, 6.0);
    let mut t = (y0 / ys).ceil() * ys;
    while t <= y1 + 1e-9 * ys {
        let py = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            fmt_tick(t, ys)
        );
        t += ys;
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(ylabel)
    );

    let mut legend = 0;
    for s in series {
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if path.is_empty() {
            continue;
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="{}"{dash} points="{}"/>"#,
            s.color,
            s.width,
            path.join(" ")
        );
        if let Some(label) = &s.label {
            let ly = TOP + 10.0 + 18.0 * legend as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 22.0,
                s.color,
                lx + 28.0,
                ly + 4.0,
                escape(label)
            );
            legend += 1;
        }
    }
    out.push_str("</svg>\n");
    out
}

fn component_label(name: &str, k: usize, d: usize) -> String {
    if d == 1 {
        name.to_string()
    } else {
        format!("{name}^({})", k + 1)
    }
}

/// Velocity diameters per component, optionally with their decay envelopes.
pub fn velocity_diameters(runs: &[(&str, &Trajectory)], envelopes: &[Vec<(f64, f64)>]) -> String {
    let mut series = Vec::new();
    for (label, traj) in runs {
        let d = traj.samples[0].frame.dv.len();
        for k in 0..d {
            let pts = traj.frames().map(|f| (f.t, f.dv[k])).collect();
            let name = component_label("D_v", k, d);
            let name = if label.is_empty() {
                name
            } else {
                format!("{name} {label}")
            };
            series.push(Series::new(name, pts, series.len()));
        }
    }
    for (k, env) in envelopes.iter().enumerate() {
        let mut s = Series::new(format!("envelope {}", k + 1), env.clone(), k).dashed();
        s.width = 1.2;
        series.push(s);
    }
    line_chart("Velocity diameter", "t", "D_v(t)", &series)
}

/// Position diameter, with a dashed level at `dx_infty` when given.
pub fn position_diameter(runs: &[(&str, &Trajectory)], dx_infty: Option<f64>) -> String {
    let mut series: Vec<Series> = runs
        .iter()
        .enumerate()
        .map(|(i, (label, traj))| {
            let name = if label.is_empty() {
                "D_x".to_string()
            } else {
                format!("D_x {label}")
            };
            Series::new(name, traj.frames().map(|f| (f.t, f.dx)).collect(), i)
        })
        .collect();
    if let Some(b) = dx_infty {
        let t_end = runs
            .iter()
            .map(|(_, t)| t.last_state().t())
            .fold(0.0, f64::max);
        series.push(Series::new("Dx_infty", vec![(0.0, b), (t_end, b)], 7).dashed());
    }
    line_chart("Position diameter", "t", "D_x(t)", &series)
}

/// Component `k` of every agent velocity in grey with the weighted mean on top.
pub fn velocities(traj: &Trajectory, k: usize) -> String {
    let n = traj.samples[0].state.n();
    let mut series: Vec<Series> = (0..n)
        .map(|i| Series {
            label: None,
            points: traj
                .samples
                .iter()
                .map(|s| (s.frame.t, s.state.v_row(i)[k]))
                .collect(),
            color: "#9a9a9a".into(),
            width: 0.8,
            dashed: false,
        })
        .collect();
    let mut vc = Series::new("v_c", traj.frames().map(|f| (f.t, f.vc[k])).collect(), 1);
    vc.width = 2.6;
    series.push(vc);
    line_chart("Velocities and weighted mean", "t", "v(t)", &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_step(10.0, 5.0), 2.0);
        assert_eq!(nice_step(0.3, 6.0), 0.05);
        assert_eq!(nice_step(7.0, 6.0), 1.0);
        assert_eq!(fmt_tick(0.25, 0.05), "0.25");
        assert_eq!(fmt_tick(4.0, 2.0), "4");
    }

    #[test]
    fn chart_is_well_formed() {
        let s = [
            Series::new("a<b", vec![(0.0, 1.0), (1.0, 0.0)], 0),
            Series::new("flat", vec![(0.0, 2.0), (1.0, 2.0)], 1).dashed(),
        ];
        let svg = line_chart("t", "x", "y", &s);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("stroke-dasharray"));
        // degenerate data still produces a finite frame
        let empty = line_chart("t", "x", "y", &[Series::new("c", vec![(1.0, 1.0)], 0)]);
        assert!(!empty.contains("NaN") && !empty.contains("inf"));
    }
}
