use std::path::Path;
use std::process::{Command, Output};

fn flockbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flockbound"))
        .args(args)
        .env_remove("FLOCKBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bound_prints_the_a_priori_quantities() {
    let out = flockbound(&["bound", "--n", "10", "--seed", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert!(v["bounds"]["t_f_bound"].as_f64().unwrap() > 0.0);
    assert!(v["bounds"]["dx_infty"].as_f64().unwrap() > 0.0);
    assert_eq!(v["Dv0"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_parameters_exit_with_config_code() {
    let out = flockbound(&["simulate", "--alpha", "1.5", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    assert!(!Path::new("unused").exists());
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let args = [
            "simulate", "--n", "12", "--d", "2", "--seed", "7", "--plot", "--out",
        ];
        let out = flockbound(&[&args[..], &[out_dir.to_str().unwrap()]].concat());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["timeseries.csv", "dv.svg", "dx.svg", "velocities.svg"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (mut sa, mut sb) = (json(&a.join("summary.json")), json(&b.join("summary.json")));
    for s in [&mut sa, &mut sb] {
        s.as_object_mut().unwrap().remove("wall_time");
    }
    assert_eq!(sa, sb);
    assert_eq!(sa["ok"], true);
    assert!(sa["observed_t_f"].as_f64().unwrap() <= sa["t_f_bound"].as_f64().unwrap());
}

#[test]
fn corrupted_tolerance_is_caught_by_the_monotonicity_audit() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch.toml");
    std::fs::write(
        &batch,
        "[[scenario]]\nn = 30\nd = 2\nalpha = 0.3\nseed = 4\n\n[[scenario]]\nn = 30\nd = 2\nalpha = 0.7\nseed = 4\n",
    )
    .unwrap();
    let verify = |extra: &[&str], name: &str| {
        let out_dir = dir.path().join(name);
        let args = [
            "verify",
            "--batch",
            batch.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ];
        let out = flockbound(&[&args[..], extra].concat());
        (out.status.code(), json(&out_dir.join("report.json")))
    };
    let (code, report) = verify(&[], "clean");
    assert_eq!(code, Some(0));
    assert_eq!(report["passed"], true);

    let (code, report) = verify(&["--rtol", "1"], "corrupt");
    assert_eq!(code, Some(1));
    for check in report["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], false);
        assert!(check["measured"].as_f64().unwrap() > 1e-8);
        assert!(check["detail"]
            .as_str()
            .unwrap()
            .contains("velocity diameter increased"));
    }
}

#[test]
fn sweep_and_switching_demo_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    let out = flockbound(&[
        "sweep-alpha",
        "--n",
        "10",
        "--alphas",
        "0.3,0.8",
        "--format",
        "json",
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = json(&sweep.join("sweep.json"));
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);
    assert!(sweep.join("alpha_0.3/timeseries.json").exists());

    let demo = dir.path().join("demo");
    let out = flockbound(&[
        "switching-demo",
        "--n",
        "10",
        "--switch-period",
        "0.5",
        "--out",
        demo.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep = json(&demo.join("mean_velocity.json"));
    assert!(rep["max_drift_within_intervals"].as_f64().unwrap() < 1e-8);
    assert!(std::fs::read_to_string(demo.join("velocities.svg"))
        .unwrap()
        .starts_with("<svg"));
}
