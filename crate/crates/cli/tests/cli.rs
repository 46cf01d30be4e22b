//! End-to-end checks of the command-line surface: output formats, exit
//! codes, and the optimize -> simulate round trip.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trapcool"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("trapcool-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn elements_prints_twelve_significant_digits() {
    let out = bin().args(["elements", "0", "0", "1.0"]).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("magnitude = 0.606530659713"), "{}", stdout(&out));

    let out = bin().args(["elements", "2", "2", "0.0"]).output().unwrap();
    assert!(stdout(&out).contains("magnitude = 1.000000000000"));
}

#[test]
fn malformed_usage_exits_one() {
    let out = bin().args(["elements", "zero", "0", "1.0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_exits_one_with_line() {
    let dir = scratch("badcfg");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "params.eta = 1.0\nnot.a.key = 2\n").unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn rates_at_eta_zero_are_flat() {
    let dir = scratch("rates0");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "params.eta = 0.0\n").unwrap();
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "rates",
            "--delta",
            "-1",
            "--rows",
            "6",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("rates.csv")).unwrap();
    assert!(csv.starts_with("# schema: trapcool.rates.v1"));
    assert!(csv.contains("n,gamma_n_units_omega2_over_gamma"));
    let values: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 7);
    for v in &values {
        assert!((v - values[0]).abs() <= 1e-15 * values[0]);
    }
}

#[test]
fn simulate_zero_cycles_returns_initial_state() {
    let dir = scratch("zerocycles");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "initial.nbar = 0\nrun.cycles = 0\n").unwrap();
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "simulate",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("final_p0 = 1.000000000000"));
    let final_csv = std::fs::read_to_string(dir.join("final.csv")).unwrap();
    let first_row = final_csv.lines().find(|l| l.starts_with("0,")).unwrap();
    assert!(first_row.starts_with("0,1."));
}

#[test]
fn runaway_population_exits_two() {
    // Blue-pulse heating at eta = 5 outruns a 121-level basis within a few
    // cycles.
    let dir = scratch("runaway");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "params.eta = 5.0\nbasis.n_max = 120\ninitial.nbar = 3\n\
         cycle.pulses = [(9, 0.6)]\nrun.cycles = 30\n",
    )
    .unwrap();
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "simulate",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn optimize_budget_zero_is_usage_error() {
    let out = bin().args(["optimize", "--budget", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_fragment_round_trips_through_simulate() {
    let dir = scratch("roundtrip");
    let base = "params.eta = 0.8\n\
                initial.nbar = 0.5\n\
                run.cycles = 10\n\
                cycle.pulses = [(-2, 0.5)]\n";
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, base).unwrap();
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "optimize",
            "--budget",
            "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let best_p0: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("best_p0 = "))
        .expect("best_p0 line")
        .parse()
        .unwrap();
    let fragment: String = text
        .lines()
        .filter(|l| {
            l.starts_with("cycle.pulses")
                || l.starts_with("run.cycles")
                || l.starts_with("basis.n_max")
                || l.starts_with("run.quad_order")
        })
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(fragment.contains("cycle.pulses"), "{text}");

    let cfg2 = dir.join("best.cfg");
    std::fs::write(&cfg2, format!("{base}{fragment}")).unwrap();
    let out = bin()
        .args([
            "--config",
            cfg2.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "simulate",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let final_p0: f64 = stdout(&out)
        .lines()
        .find_map(|l| l.strip_prefix("final_p0 = "))
        .expect("final_p0 line")
        .parse()
        .unwrap();
    assert!(
        (best_p0 - final_p0).abs() <= 1e-12,
        "optimize reported {best_p0}, simulate reproduced {final_p0}"
    );
}

#[test]
fn reproduce_rate_curves_has_expected_ratio() {
    let dir = scratch("fig4");
    let out = bin()
        .args(["--out", dir.to_str().unwrap(), "reproduce", "fig4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("emptying_rates.csv")).unwrap();
    assert!(csv.starts_with("# schema: trapcool.emptying_rates.v1"));
    let mut rows = csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with('n'));
    let parse_row = |line: &str| -> Vec<f64> {
        line.split(',').skip(1).map(|v| v.parse().unwrap()).collect()
    };
    let row0 = parse_row(rows.next().unwrap());
    let row1 = parse_row(rows.next().unwrap());
    for col in 0..2 {
        let ratio = row0[col] / row1[col];
        assert!((0.02..=0.08).contains(&ratio), "column {col}: ratio {ratio}");
    }
}
