use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wapf_core::{bodies_to_fields, read_snapshot, write_snapshot, Body, DomainSpec, Snapshot, Topology};

fn wapf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wapf")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn snapshots(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".wapf"))
        .collect();
    names.sort();
    names
}

#[test]
fn zero_end_time_writes_one_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = wapf(&["run", "--scenario", "uniform-advection", "--cells", "100", "--t-end", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(snapshots(&out), vec!["snap_00000.wapf"]);
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = diag.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,dt,mass_total,mom_x,min_rho,max_speed,max_gradphi,flags"
    );
    assert_eq!(lines.count(), 1);
}

#[test]
fn failures_print_one_categorized_line() {
    let cases: [(&[&str], i32, &str); 5] = [
        (&["run", "--scenario", "delta-shock", "--bogus"], 2, "usage"),
        (&["frobnicate"], 2, "usage"),
        (&["run", "--scenario", "delta-shock", "--integrator", "exact2d"], 1, "config"),
        (&["run", "--scenario", "no-such-scenario"], 1, "config"),
        (&["star-fraction", "--snapshot", "/nonexistent/s.wapf"], 1, "io"),
    ];
    for (args, code, category) in cases {
        let o = wapf(args);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with(&format!("error[{category}]: ")), "{args:?}: {err}");
    }
}

#[test]
fn help_exits_cleanly() {
    let o = wapf(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("star-fraction"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "# test\nscenario = delta-shock\ncells = 40\nt_end = 0.1\nrho_l = 2\n").unwrap();
    let out = dir.path().join("a");
    let o = wapf(&["run", "--config", cfg.to_str().unwrap(), "--cells", "30", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = read_snapshot(out.join("snap_00000.wapf")).unwrap();
    assert_eq!(first.domain.cells(), &[30]);
    assert_eq!(first.state.species[0].rho[0], 2.0);
    let last = read_snapshot(out.join(snapshots(&out).last().unwrap())).unwrap();
    assert!((last.time() - 0.1).abs() < 1e-12);

    let out = dir.path().join("b");
    let o = wapf(&[
        "run", "--config", cfg.to_str().unwrap(), "--set", "rho_l=3", "--t-end", "0", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = read_snapshot(out.join("snap_00000.wapf")).unwrap();
    assert_eq!(first.domain.cells(), &[40]);
    assert_eq!(first.state.species[0].rho[0], 3.0);
    assert_eq!(snapshots(&out).len(), 1);
    let out = dir.path().join("c");
    let o = wapf(&["run", "--config", cfg.to_str().unwrap(), "--set", "t_end=0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(snapshots(&out).len(), 1);

    let out = dir.path().join("d");
    let o = wapf(&[
        "run", "--config", cfg.to_str().unwrap(), "--set", "t_end=0", "--t-end", "0.05", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let last = read_snapshot(out.join(snapshots(&out).last().unwrap())).unwrap();
    assert!((last.time() - 0.05).abs() < 1e-12);
}

#[test]
fn star_fraction_of_a_single_body() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("body.wapf");
    let d = DomainSpec::new(&[20, 20], 0.25, Topology::OpenBox).unwrap();
    let (m, floor) = (7.0, 0.01);
    let body = Body::new(m, &[2.6, 3.1], &[0.0, 0.0]).unwrap();
    write_snapshot(&Snapshot::new(d.clone(), bodies_to_fields(&[body], &d, floor).unwrap()), &path).unwrap();
    let o = wapf(&["star-fraction", "--snapshot", path.to_str().unwrap(), "--radius-cells", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let frac: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    let total = m + floor * d.volume();
    let cell_floor = floor * d.cell_volume();
    assert!((frac - (m + cell_floor) / total).abs() < 1e-12, "{frac}");
    assert!((frac - m / total).abs() <= cell_floor / total + 1e-12);
}

#[test]
fn reruns_reproduce_the_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let o = wapf(&[
            "run", "--scenario", "rotating-disk", "--cells", "48", "--t-end", "0.3", "--seed", "9",
            "--snapshot-every", "0.1", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(fs::read(out.join("diagnostics.csv")).unwrap());
    }
    assert!(csvs[0].len() > 100);
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn convergence_writes_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let o = wapf(&[
        "convergence", "--scenario", "uniform-advection", "--eps-list", "0.04,0.02,0.01", "--t-samples", "0.5",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("order rho"));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("epsilon,time,R_rho,R_mom"));
    assert!(lines[4].starts_with("order,0.5,"));
}
