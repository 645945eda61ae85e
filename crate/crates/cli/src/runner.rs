//! Expands a scenario into sweep points, runs each point's trials in
//! parallel on independent substreams, and renders the output tables.
//!
//! Trial `t` of every point uses stream `t`, so a point's results depend
//! only on `(config, seed, t)` and the sweep shares random numbers across
//! points. Results are merged in trial order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::sync::Arc;

use lrw_core::protocol::InvokeRequest;
use lrw_core::{NodeId, SpecId, SpecRegistry, Value, MS};
use lrw_metrics::{
    audit_consistency, audit_serializability, audit_single_engagement, duration_histogram,
    mean, mean_broadcasts, mean_ci95, op_records, reliability, series_by_trial,
    series_reliability, write_durations, write_histogram, write_reliability, OpRecord,
    ReliabilityRow, SeriesRecord,
};
use neighbor_ops::{
    check_consensus, explore_interleavings, run_ops, LrwConsensus, OpsRequest, OpsSetup,
    OpsTimers, StepProtocol, UvwConsensus,
};
use rayon::prelude::*;
use simnet::{run_lrw, LrwScenario, Primitive, RadioModel, Topology, TRACE_HEADER};

use crate::calibrate::{calibrate_loss, Calibration};
use crate::config::{
    InitiatorSelector, LossSetting, Mode, PrimitiveMode, RadioConfig, ScenarioConfig, TopologyKind,
};
use crate::error::{CliError, ConfigError};
use crate::workload::{counter_registry, initial_stores};

/// Schedules explored per consensus instance before giving up.
const CONSENSUS_MAX_STEPS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Point {
    pub timeout_ms: Option<u64>,
    pub size: u32,
    pub primitive: PrimitiveMode,
}

impl Point {
    /// Names only the dimensions that the scenario actually sweeps.
    pub fn label(&self, cfg: &ScenarioConfig) -> String {
        let mut parts = Vec::new();
        if cfg.timers.timeouts_ms.len() > 1 {
            parts.push(match self.timeout_ms {
                Some(t) => format!("t{t}"),
                None => "tinf".into(),
            });
        }
        if cfg.topology.sizes.len() > 1 {
            parts.push(format!("n{}", self.size));
        }
        if cfg.radio.primitives.len() > 1 {
            parts.push(self.primitive.as_str().to_owned());
        }
        parts.join("_")
    }
}

pub fn lrw_points(cfg: &ScenarioConfig) -> Vec<Point> {
    let mut points = Vec::new();
    for &timeout_ms in &cfg.timers.timeouts_ms {
        for &size in &cfg.topology.sizes {
            for &primitive in &cfg.radio.primitives {
                points.push(Point {
                    timeout_ms,
                    size,
                    primitive,
                });
            }
        }
    }
    points
}

pub fn build_topology(cfg: &ScenarioConfig, size: u32) -> Topology {
    let topology = match cfg.topology.kind {
        TopologyKind::Star => Topology::star(size),
        TopologyKind::Clique => Topology::clique(size),
        TopologyKind::Band { radius } => Topology::band(size, radius),
        TopologyKind::Testbed31 => Topology::testbed_31(),
    };
    if cfg.topology.churn_rate > 0.0 {
        topology.with_churn(cfg.topology.churn_rate)
    } else {
        topology
    }
}

/// Initiators of one trial, truncated to the series size.
pub fn select_initiators(
    cfg: &ScenarioConfig,
    topology: &Topology,
    trial: u64,
) -> Result<Vec<NodeId>, ConfigError> {
    let nodes: Vec<NodeId> = topology.nodes().collect();
    let selected: Vec<NodeId> = match &cfg.initiators {
        InitiatorSelector::Default if !topology.initiators().is_empty() => topology.initiators().to_vec(),
        InitiatorSelector::Default => nodes[..1].to_vec(),
        InitiatorSelector::Center => match cfg.topology.kind {
            TopologyKind::Star => vec![NodeId(0)],
            _ => vec![nodes[(nodes.len() - 1) / 2]],
        },
        InitiatorSelector::Rotate => vec![nodes[(trial % nodes.len() as u64) as usize]],
        InitiatorSelector::Modulo { modulus, residue } => nodes
            .iter()
            .copied()
            .filter(|n| n.0 % modulus == *residue)
            .collect(),
        InitiatorSelector::List(ids) => {
            let mut seen = BTreeSet::new();
            for &id in ids {
                if !topology.contains(NodeId(id)) || !seen.insert(id) {
                    return Err(ConfigError::invalid(
                        "topology",
                        "initiators",
                        format!("node {id} is absent or listed twice"),
                    ));
                }
            }
            ids.iter().map(|&id| NodeId(id)).collect()
        }
    };
    if selected.is_empty() {
        return Err(ConfigError::invalid("topology", "initiators", "selects no node"));
    }
    match cfg.series_size {
        Some(n) if n > selected.len() => Err(ConfigError::invalid(
            "scenario",
            "series_size",
            format!("{n} exceeds the {} selected initiators", selected.len()),
        )),
        Some(n) => Ok(selected[..n].to_vec()),
        None => Ok(selected),
    }
}

pub fn radio_model(radio: &RadioConfig, loss_prob: f64) -> RadioModel {
    RadioModel {
        loss_prob,
        mac_lo_us: radio.mac_delay_lo_ms * MS,
        mac_hi_us: radio.mac_delay_hi_ms * MS,
        unicast_hw_ack: radio.unicast_hw_ack,
        ack_delay_us: radio.ack_delay_ms * MS,
        ..RadioModel::default()
    }
}

/// The configured loss, calibrating first when it is `auto`.
pub fn resolve_loss(cfg: &ScenarioConfig) -> Result<(f64, Option<Calibration>), CliError> {
    match cfg.radio.loss {
        LossSetting::Fixed(p) => Ok((p, None)),
        LossSetting::Auto => {
            let c = calibrate_loss(&cfg.calibration, &cfg.radio)?;
            Ok((c.loss_prob, Some(c)))
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub ops: Vec<OpRecord>,
    pub violations: Vec<String>,
    pub trace: Option<String>,
}

pub fn run_lrw_trial(
    cfg: &ScenarioConfig,
    loss_prob: f64,
    point: Point,
    trial: u64,
    specs: &Arc<SpecRegistry>,
    spec: SpecId,
    emit_trace: bool,
) -> Result<TrialResult, CliError> {
    let topology = build_topology(cfg, point.size);
    let initiators = select_initiators(cfg, &topology, trial)?;
    let mut sc = LrwScenario::new(topology, Arc::clone(specs));
    sc.radio = radio_model(&cfg.radio, loss_prob);
    sc.primitive = match point.primitive {
        PrimitiveMode::Broadcast => Primitive::Broadcast,
        PrimitiveMode::Unicast => Primitive::UnicastFanout,
    };
    sc.timers = cfg.timers.timer_config(point.timeout_ms)?;
    sc.stores = initial_stores(&sc.topology, &cfg.workload, cfg.seed, trial);
    sc.invocations = initiators
        .into_iter()
        .map(|n| (n, InvokeRequest::new(spec, vec![cfg.workload.increment])))
        .collect();
    sc.seed = cfg.seed;
    sc.stream = trial;
    sc.strict_payload = cfg.strict_payload;
    let run = run_lrw(&sc, None)?;
    let report = audit_consistency(&run.trace);
    let violations = report
        .violations
        .iter()
        .chain(&audit_single_engagement(&run.trace))
        .chain(&audit_serializability(&run.trace))
        .map(|v| format!("trial {trial}: {v}"))
        .collect();
    let trace = emit_trace.then(|| {
        let mut s = String::new();
        let mut buf = Vec::new();
        run.trace
            .export_records(&mut buf)
            .expect("writing to a Vec cannot fail");
        let label = point.label(cfg);
        let _ = writeln!(s, "# point={} trial={trial}", if label.is_empty() { "-" } else { &label });
        s.push_str(std::str::from_utf8(&buf).expect("export is ASCII"));
        s
    });
    Ok(TrialResult {
        ops: op_records(&run.trace, trial),
        violations,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: Point,
    pub label: String,
    pub ops: Vec<OpRecord>,
    pub series: Vec<SeriesRecord>,
    pub violations: Vec<String>,
    pub traces: Vec<String>,
}

pub fn run_lrw_point(
    cfg: &ScenarioConfig,
    loss_prob: f64,
    point: Point,
    emit_trace: bool,
) -> Result<PointResult, CliError> {
    let (registry, spec) = counter_registry(cfg.workload.accept_max);
    let specs = Arc::new(registry);
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_lrw_trial(cfg, loss_prob, point, t, &specs, spec, emit_trace))
        .collect::<Result<_, _>>()?;
    let mut ops = Vec::new();
    let mut violations = Vec::new();
    let mut traces = Vec::new();
    for t in trials {
        ops.extend(t.ops);
        violations.extend(t.violations);
        traces.extend(t.trace);
    }
    Ok(PointResult {
        point,
        label: point.label(cfg),
        series: series_by_trial(&ops),
        ops,
        violations,
        traces,
    })
}

/// Everything one scenario run produced, with output files rendered.
#[derive(Clone, Debug, Default)]
pub struct Report {
    /// File name to content, written verbatim.
    pub files: BTreeMap<String, String>,
    pub violations: Vec<String>,
    pub points: Vec<PointResult>,
    pub loss_prob: f64,
    pub calibration: Option<Calibration>,
}

impl Report {
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }

    pub fn point(&self, label: &str) -> Option<&PointResult> {
        self.points.iter().find(|p| p.label == label)
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let (loss_prob, calibration) = match cfg.mode {
        Mode::Consensus => (0.0, None),
        _ => resolve_loss(cfg)?,
    };
    let mut report = Report {
        loss_prob,
        calibration,
        ..Report::default()
    };
    match cfg.mode {
        Mode::Lrw => run_lrw_mode(cfg, &mut report)?,
        Mode::ReadAll | Mode::WriteAll | Mode::Transact => run_ops_mode(cfg, &mut report)?,
        Mode::Consensus => run_consensus_mode(&mut report)?,
    }
    report.files.insert("metadata.txt".into(), metadata(cfg, &report));
    Ok(report)
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> String {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("tables are ASCII")
}

fn suffixed(stem: &str, label: &str) -> String {
    if label.is_empty() {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{label}.csv")
    }
}

fn fmt_opt(v: Option<f64>, precision: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.precision$}"))
}

fn run_lrw_mode(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), CliError> {
    let emit_trace = cfg.output.emit_trace;
    for point in lrw_points(cfg) {
        report
            .points
            .push(run_lrw_point(cfg, report.loss_prob, point, emit_trace)?);
    }
    let mut rows = Vec::new();
    let mut summary = String::from(
        "timeout_ms,size,primitive,ops,op_reliability_pct,series_reliability_pct,mean_ms,ci95_ms,mean_broadcasts\n",
    );
    let mut trace = String::new();
    if emit_trace {
        trace.push_str(TRACE_HEADER);
        trace.push('\n');
    }
    for p in &report.points {
        let op_pct = reliability(&p.ops).ok();
        let series_pct = series_reliability(&p.series).ok();
        rows.push(ReliabilityRow {
            timeout_ms: p.point.timeout_ms,
            op_pct: op_pct.unwrap_or(0.0),
            series_pct: series_pct.unwrap_or(0.0),
        });
        let durations: Vec<f64> = p.ops.iter().map(OpRecord::optimistic_ms).collect();
        let ci = mean_ci95(&durations).ok().map(|(_, half)| half);
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{}",
            p.point.timeout_ms.map_or_else(|| "inf".into(), |t| t.to_string()),
            p.point.size,
            p.point.primitive.as_str(),
            p.ops.len(),
            fmt_opt(op_pct, 2),
            fmt_opt(series_pct, 2),
            fmt_opt(mean(&durations).ok(), 3),
            fmt_opt(ci, 3),
            fmt_opt(mean_broadcasts(&p.ops).ok(), 3),
        );
        report.files.insert(
            suffixed("durations", &p.label),
            csv_string(|w| write_durations(w, &p.ops)),
        );
        if cfg.output.emit_histogram {
            if let Ok(h) = duration_histogram(&p.ops, cfg.output.histogram_bin_ms) {
                report
                    .files
                    .insert(suffixed("histogram", &p.label), csv_string(|w| write_histogram(w, &h)));
            }
        }
        for t in &p.traces {
            trace.push_str(t);
        }
        report.violations.extend(
            p.violations
                .iter()
                .map(|v| if p.label.is_empty() { v.clone() } else { format!("{}: {v}", p.label) }),
        );
    }
    report
        .files
        .insert("reliability.csv".into(), csv_string(|w| write_reliability(w, &rows)));
    report.files.insert("summary.csv".into(), summary);
    if emit_trace {
        report.files.insert("trace.csv".into(), trace);
    }
    Ok(())
}

fn run_ops_mode(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), CliError> {
    if cfg.topology.kind != TopologyKind::Star {
        return Err(ConfigError::invalid(
            "topology",
            "kind",
            "neighborhood operations run on a star around the initiator",
        )
        .into());
    }
    let timers = OpsTimers::default();
    let set_sizes: Vec<(u32, u32)> = match cfg.mode {
        Mode::Transact => cfg
            .workload
            .read_sizes
            .iter()
            .flat_map(|&r| cfg.workload.write_sizes.iter().map(move |&w| (r, w)))
            .collect(),
        _ => vec![(0, 0)],
    };
    let mut out = String::from("operation,n,read_set,write_set,trials,completed_pct,messages_mean,rounds_mean\n");
    for &k in &cfg.topology.sizes {
        for &(r, w) in &set_sizes {
            if r > k || w > k {
                return Err(ConfigError::invalid(
                    "workload",
                    "read_set",
                    format!("set sizes {r}/{w} exceed the {k} neighbors"),
                )
                .into());
            }
            let request = match cfg.mode {
                Mode::ReadAll => OpsRequest::ReadAll,
                Mode::WriteAll => OpsRequest::WriteAll {
                    value: cfg.workload.increment,
                    acked: cfg.workload.acked,
                },
                _ => OpsRequest::Transact {
                    read_set: (1..=r).map(NodeId).collect(),
                    write_set: (1..=w).map(NodeId).collect(),
                    value: cfg.workload.increment,
                },
            };
            let runs: Vec<(bool, u32, u32)> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let setup = OpsSetup {
                        topology: build_topology(cfg, k),
                        radio: radio_model(&cfg.radio, report.loss_prob),
                        timers,
                        seed: cfg.seed,
                        stream: t,
                        values: BTreeMap::new(),
                    };
                    let run = run_ops(&setup, vec![(NodeId(0), request.clone())])?;
                    let completed = run.results.first().is_some_and(|r| r.error.is_none());
                    let cost = run.costs.values().next().copied().unwrap_or_default();
                    Ok((completed, cost.messages, cost.rounds))
                })
                .collect::<Result<_, simnet::SimError>>()?;
            let n = runs.len() as f64;
            let completed = runs.iter().filter(|r| r.0).count() as f64;
            let messages = runs.iter().map(|r| f64::from(r.1)).sum::<f64>() / n;
            let rounds = runs.iter().map(|r| f64::from(r.2)).sum::<f64>() / n;
            let sets = match cfg.mode {
                Mode::Transact => format!("{r},{w}"),
                _ => "-,-".into(),
            };
            let _ = writeln!(
                out,
                "{},{},{sets},{},{:.2},{messages:.3},{rounds:.3}",
                cfg.mode.as_str(),
                k + 1,
                cfg.trials,
                100.0 * completed / n,
            );
        }
    }
    report.files.insert("costs.csv".into(), out);
    Ok(())
}

/// Binary input pairs for the two-node constructions.
pub const CONSENSUS_INPUTS: [(Value, Value); 4] = [(0, 1), (1, 0), (0, 0), (1, 1)];

fn consensus_row<P: StepProtocol>(
    name: &str,
    protocol: &P,
    inputs: (Value, Value),
    out: &mut String,
    violations: &mut Vec<String>,
) -> Result<(), CliError> {
    let ex = explore_interleavings(protocol, CONSENSUS_MAX_STEPS)
        .map_err(|e| ConfigError::invalid("scenario", "mode", e.to_string()))?;
    let found = check_consensus(&ex, &[inputs.0, inputs.1]);
    let _ = writeln!(
        out,
        "{name},{};{},{},{},{}",
        inputs.0,
        inputs.1,
        ex.schedules,
        ex.terminals.len(),
        found.len()
    );
    violations.extend(
        found
            .iter()
            .map(|v| format!("{name} inputs ({},{}): {v:?}", inputs.0, inputs.1)),
    );
    Ok(())
}

fn run_consensus_mode(report: &mut Report) -> Result<(), CliError> {
    let mut out = String::from("protocol,inputs,schedules,terminals,violations\n");
    for inputs in CONSENSUS_INPUTS {
        let lrw = LrwConsensus::new(vec![inputs.0, inputs.1]);
        consensus_row("lrw", &lrw, inputs, &mut out, &mut report.violations)?;
        let uvw = UvwConsensus::new(inputs.0, inputs.1);
        consensus_row("uvw", &uvw, inputs, &mut out, &mut report.violations)?;
    }
    report.files.insert("consensus.csv".into(), out);
    Ok(())
}

fn metadata(cfg: &ScenarioConfig, report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", cfg.name);
    let _ = writeln!(s, "mode: {}", cfg.mode.as_str());
    let _ = writeln!(s, "seed: {}", cfg.seed);
    let _ = writeln!(s, "trials_per_point: {}", cfg.trials);
    if let Some(note) = &cfg.note {
        let _ = writeln!(s, "note: {note}");
    }
    if cfg.mode != Mode::Consensus {
        let _ = writeln!(s, "loss_prob: {:.6}", report.loss_prob);
    }
    if let Some(c) = &report.calibration {
        let _ = writeln!(
            s,
            "loss_calibration: midpoint of feasible interval [{:.6}, {:.6}] found by bisection over {} evaluations; targets: reliability < {}% at {} ms and >= {}% at {} ms, {} neighbors, {} trials, seed {}",
            c.p_low,
            c.p_high,
            c.evaluations,
            cfg.calibration.below_pct,
            cfg.calibration.low_timeout_ms,
            cfg.calibration.at_least_pct,
            cfg.calibration.high_timeout_ms,
            cfg.calibration.neighbors,
            cfg.calibration.trials,
            cfg.calibration.seed,
        );
        let _ = writeln!(
            s,
            "note: the loss model is calibrated to reproduce reliability curve shapes; absolute reliability values are not hardware reproductions"
        );
    }
    if cfg.mode == Mode::Lrw {
        let _ = writeln!(
            s,
            "note: duration_ms of Canceled operations runs to the last AbortAck and of Failed operations to Return; this extends the optimistic duration defined for Success"
        );
    }
    if !report.violations.is_empty() {
        let _ = writeln!(s, "audit_violations: {}", report.violations.len());
    }
    s
}
