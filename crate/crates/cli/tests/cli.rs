use std::path::Path;
use std::process::Command;

use lrwsim::{
    preset, preset_library, run, CliError, ConfigError, InitiatorSelector, LossSetting, Mode,
    PrimitiveMode, ScenarioConfig, TopologyKind,
};

fn lrwsim() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lrwsim"));
    cmd.env_remove(lrwsim::SEED_ENV);
    cmd
}

fn presets_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn library_contains_the_required_presets() {
    let names: Vec<&str> = preset_library().unwrap().into_iter().map(|(n, _)| n).collect();
    for want in ["fig5", "table2", "table3", "inf_timeout", "consensus2"] {
        assert!(names.contains(&want), "missing preset {want}");
    }
}

#[test]
fn preset_parameters() {
    let t2 = preset("table2").unwrap();
    assert_eq!(t2.topology.kind, TopologyKind::Star);
    assert_eq!(t2.topology.sizes, vec![6]);
    assert_eq!(t2.timers.timeouts_ms, vec![Some(50), Some(75), Some(100)]);
    assert_eq!(t2.trials, 250);
    assert_eq!(t2.radio.loss, LossSetting::Auto);

    let t3 = preset("table3").unwrap();
    assert_eq!(t3.topology.kind, TopologyKind::Testbed31);
    assert_eq!(t3.trials, 1000);
    let topology = lrwsim::runner::build_topology(&t3, 31);
    let initiators = lrwsim::runner::select_initiators(&t3, &topology, 0).unwrap();
    assert_eq!(initiators.iter().map(|n| n.0).collect::<Vec<_>>(), vec![1, 7, 13, 19, 25, 31]);
    assert_eq!(
        t3.timers.timeouts_ms,
        (100..=350).step_by(50).map(Some).collect::<Vec<_>>()
    );

    let inf = preset("inf_timeout").unwrap();
    assert_eq!(inf.timers.timeouts_ms, vec![None]);
    assert_eq!(inf.trials, 9258);
    assert_eq!(inf.topology.sizes, vec![7]);
    assert_eq!(inf.initiators, InitiatorSelector::Rotate);

    let fig5 = preset("fig5").unwrap();
    assert_eq!(fig5.topology.sizes, (1..=11).collect::<Vec<_>>());
    assert_eq!(fig5.radio.primitives, vec![PrimitiveMode::Broadcast, PrimitiveMode::Unicast]);
    assert!(fig5.radio.unicast_hw_ack);

    assert_eq!(preset("consensus2").unwrap().mode, Mode::Consensus);
    assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset(_))));
}

#[test]
fn shipped_files_match_the_embedded_presets() {
    for (name, cfg) in preset_library().unwrap() {
        let path = presets_dir().join(format!("{name}.cfg"));
        assert_eq!(ScenarioConfig::load(&path).unwrap(), cfg, "{name}");
    }
}

#[test]
fn every_preset_keeps_commit_at_least_twice_timeout() {
    for (name, cfg) in preset_library().unwrap() {
        for &t in &cfg.timers.timeouts_ms {
            let timers = cfg.timers.timer_config(t).unwrap();
            if let (Some(t), Some(c)) = (timers.timeout_us, timers.commit_us) {
                assert!(c >= 2 * t, "{name}");
            }
            assert_eq!(timers.response_us, 40_000, "{name}");
        }
    }
}

#[test]
fn table2_scenario_writes_one_row_per_timeout() {
    let out = tempfile::tempdir().unwrap();
    let status = lrwsim()
        .arg("--scenario")
        .arg(presets_dir().join("table2.cfg"))
        .args(["--seed", "7", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rel = read(out.path(), "reliability.csv");
    let timeouts: Vec<&str> = rel.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rel.lines().next().unwrap(), "timeout_ms,op_reliability_pct,series_reliability_pct");
    assert_eq!(timeouts, vec!["50", "75", "100"]);
    for t in ["50", "75", "100"] {
        assert_eq!(read(out.path(), &format!("durations_t{t}.csv")).lines().count(), 251);
    }
    let meta = read(out.path(), "metadata.txt");
    assert!(meta.contains("loss_calibration:"));
    assert!(meta.contains("not hardware reproductions"));
    assert!(meta.contains("extends the optimistic duration"));
}

#[test]
fn fig5_writes_a_duration_table_for_both_primitives() {
    let out = tempfile::tempdir().unwrap();
    let status = lrwsim()
        .arg("--scenario")
        .arg(presets_dir().join("fig5.cfg"))
        .args(["--trials", "20", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let summary = read(out.path(), "summary.csv");
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 22);
    for k in 1..=11 {
        for p in ["broadcast", "unicast"] {
            assert!(rows.iter().any(|r| r[1] == k.to_string() && r[2] == p), "k={k} {p}");
        }
    }
    assert!(out.path().join("durations_n11_unicast.csv").exists());
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let output = lrwsim().arg("--bogus").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.starts_with("lrwsim: error[usage]"));
    assert!(err.contains("Usage:"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(lrwsim().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn config_errors_exit_one_with_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "[timers]\ntimeout_ms = 100\ncommit_ms = 150\n").unwrap();
    let output = lrwsim().arg("--scenario").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).starts_with("lrwsim: error[config]:"));

    let output = lrwsim().output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let output = lrwsim().args(["--preset", "missing"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn audit_failures_map_to_exit_two() {
    assert_eq!(CliError::Audit(1, "x".into()).exit_code(), 2);
    assert_eq!(CliError::Config(ConfigError::UnknownPreset("x".into())).exit_code(), 1);
}

#[test]
fn seed_flag_overrides_environment_which_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    std::fs::write(&cfg, "[scenario]\ntrials = 5\nseed = 1\n[radio]\nloss_prob = 0.3\n").unwrap();
    let run_with = |seed: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(format!("{seed:?}{env:?}").replace(['"', ' '], ""));
        let mut cmd = lrwsim();
        cmd.arg("--scenario").arg(&cfg).arg("--out").arg(&out);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env(lrwsim::SEED_ENV, e);
        }
        assert!(cmd.status().unwrap().success());
        read(&out, "metadata.txt")
            .lines()
            .find(|l| l.starts_with("seed:"))
            .unwrap()
            .to_owned()
    };
    assert_eq!(run_with(None, None), "seed: 1");
    assert_eq!(run_with(None, Some("9")), "seed: 9");
    assert_eq!(run_with(Some("4"), Some("9")), "seed: 4");
}

#[test]
fn trace_export_marks_each_trial() {
    let dir = tempfile::tempdir().unwrap();
    let status = lrwsim()
        .args(["--preset", "table2", "--trials", "3", "--emit-trace", "--emit-histogram", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let trace = read(dir.path(), "trace.csv");
    assert!(trace.starts_with("time_us,node,record_kind,op_id,detail\n"));
    assert_eq!(trace.lines().filter(|l| l.starts_with("# point=")).count(), 9);
    assert!(trace.contains("# point=t75 trial=2\n"));
    assert!(dir.path().join("histogram_t50.csv").exists());
}

#[test]
fn partial_runs_match_the_prefix_of_full_runs() {
    let mut cfg: ScenarioConfig = "[scenario]\ntrials = 40\nseed = 3\n[radio]\nloss_prob = 0.2\n"
        .parse()
        .unwrap();
    let full = run(&cfg).unwrap();
    cfg.trials = 10;
    let part = run(&cfg).unwrap();
    let full_ops = &full.points[0].ops;
    let part_ops = &part.points[0].ops;
    assert_eq!(&full_ops[..part_ops.len()], &part_ops[..]);
}

#[test]
fn ops_modes_write_cost_tables() {
    let cfg: ScenarioConfig = "[scenario]\nmode = transact\ntrials = 3\n[topology]\nneighbors = 4..5\n[workload]\nread_set = 1..2\nwrite_set = 3\n"
        .parse()
        .unwrap();
    let report = run(&cfg).unwrap();
    let costs = &report.files["costs.csv"];
    let rows: Vec<&str> = costs.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], "transact,5,1,3,3,100.00,6.000,2.000");
    assert_eq!(rows[1], "transact,5,2,3,3,100.00,7.000,2.000");

    let cfg: ScenarioConfig = "[scenario]\nmode = read_all\ntrials = 2\n[topology]\nneighbors = 6\n"
        .parse()
        .unwrap();
    let report = run(&cfg).unwrap();
    assert_eq!(report.files["costs.csv"].lines().nth(1).unwrap(), "read_all,7,-,-,2,100.00,7.000,1.000");

    let cfg: ScenarioConfig = "[scenario]\nmode = read_all\n[topology]\nkind = clique\nnodes = 3\n"
        .parse()
        .unwrap();
    assert!(matches!(run(&cfg), Err(CliError::Config(_))));
}

#[test]
fn consensus_mode_reports_every_input_pair() {
    let report = run(&preset("consensus2").unwrap()).unwrap();
    assert!(report.violations.is_empty());
    assert_eq!(report.files["consensus.csv"].lines().count(), 9);
}

#[test]
fn series_size_limits_the_initiators() {
    let cfg: ScenarioConfig = "[scenario]\ntrials = 2\nseries_size = 2\n[topology]\nkind = testbed31\n"
        .parse()
        .unwrap();
    let report = run(&cfg).unwrap();
    assert_eq!(report.points[0].ops.len(), 4);
    let cfg: ScenarioConfig = "[scenario]\nseries_size = 7\n[topology]\nkind = testbed31\n"
        .parse()
        .unwrap();
    assert!(run(&cfg).is_err());
}
