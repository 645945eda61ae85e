//! Scenario configuration: INI-style `key = value` text under `[section]`
//! headers. Times are in milliseconds. List-valued keys accept `a, b, c`
//! and inclusive ranges `a..b` or `a..b step s`.
//!
//! ```text
//! [scenario]
//! name = table2
//! mode = lrw
//! trials = 250
//! seed = 7
//!
//! [topology]
//! kind = star
//! neighbors = 6
//!
//! [timers]
//! timeout_ms = 50, 75, 100
//! commit_ms = 2x
//!
//! [radio]
//! loss_prob = auto
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use lrw_core::{TimerConfig, MS};

use crate::error::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Lrw,
    ReadAll,
    WriteAll,
    Transact,
    Consensus,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lrw => "lrw",
            Mode::ReadAll => "read_all",
            Mode::WriteAll => "write_all",
            Mode::Transact => "transact",
            Mode::Consensus => "consensus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    /// Hub 0 with leaves `1..=size`.
    Star,
    /// Nodes `1..=size`, all linked.
    Clique,
    /// Nodes `1..=size`, linked within `radius` ids.
    Band { radius: u32 },
    /// 31-node band of radius 3 with every sixth node an initiator.
    Testbed31,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    /// Leaf count for a star, node count otherwise. One run per entry.
    pub sizes: Vec<u32>,
    /// Flips per potential link per second; zero keeps links static.
    pub churn_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitiatorSelector {
    /// The topology's own initiators.
    Default,
    /// The star hub, or the middle node of other topologies.
    Center,
    /// One initiator per trial, cycling through all nodes.
    Rotate,
    /// Nodes with `id % modulus == residue`.
    Modulo { modulus: u32, residue: u32 },
    List(Vec<u32>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CommitSetting {
    /// Multiple of the timeout.
    Factor(f64),
    Ms(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimersConfig {
    pub response_ms: u64,
    /// `None` is an unbounded timeout. One run per entry.
    pub timeouts_ms: Vec<Option<u64>>,
    pub commit: CommitSetting,
}

impl TimersConfig {
    pub fn timer_config(&self, timeout_ms: Option<u64>) -> Result<TimerConfig, ConfigError> {
        let commit_us = match (self.commit, timeout_ms) {
            (CommitSetting::Ms(ms), _) => ms * MS,
            (CommitSetting::Factor(f), Some(t)) => (f * (t * MS) as f64).round() as u64,
            (CommitSetting::Factor(_), None) => {
                return Err(ConfigError::invalid(
                    "timers",
                    "commit_ms",
                    "an unbounded timeout needs an explicit commit_ms",
                ))
            }
        };
        let timers = TimerConfig {
            response_us: self.response_ms * MS,
            timeout_us: timeout_ms.map(|t| t * MS),
            commit_us: Some(commit_us),
        };
        timers.validate()?;
        Ok(timers)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossSetting {
    Fixed(f64),
    /// Calibrated against the no-contention reliability curve.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PrimitiveMode {
    Broadcast,
    /// One unicast per neighbor.
    Unicast,
}

impl PrimitiveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveMode::Broadcast => "broadcast",
            PrimitiveMode::Unicast => "unicast",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadioConfig {
    pub loss: LossSetting,
    pub mac_delay_lo_ms: u64,
    pub mac_delay_hi_ms: u64,
    pub unicast_hw_ack: bool,
    pub ack_delay_ms: u64,
    /// One run per entry.
    pub primitives: Vec<PrimitiveMode>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    /// Per-node probability that `f` rejects.
    pub veto_prob: f64,
    /// `g` accepts only if every response is at most this value.
    pub accept_max: Option<i64>,
    /// Initial counters are uniform over `0..=initial_max`.
    pub initial_max: i64,
    pub increment: i64,
    /// Transaction read/write set sizes; one run per pair.
    pub read_sizes: Vec<u32>,
    pub write_sizes: Vec<u32>,
    pub acked: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationConfig {
    pub neighbors: u32,
    pub trials: u64,
    pub seed: u64,
    pub low_timeout_ms: u64,
    pub below_pct: f64,
    pub high_timeout_ms: u64,
    pub at_least_pct: f64,
    pub lo: f64,
    pub hi: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub histogram_bin_ms: f64,
    pub emit_trace: bool,
    pub emit_histogram: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub trials: u64,
    /// Invocations per series; defaults to every selected initiator.
    pub series_size: Option<usize>,
    pub seed: u64,
    pub strict_payload: bool,
    /// Free text copied into the run metadata.
    pub note: Option<String>,
    pub topology: TopologyConfig,
    pub initiators: InitiatorSelector,
    pub timers: TimersConfig,
    pub radio: RadioConfig,
    pub workload: WorkloadConfig,
    pub calibration: CalibrationConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            mode: Mode::Lrw,
            trials: 100,
            series_size: None,
            seed: 0,
            strict_payload: false,
            note: None,
            topology: TopologyConfig {
                kind: TopologyKind::Star,
                sizes: vec![6],
                churn_rate: 0.0,
            },
            initiators: InitiatorSelector::Default,
            timers: TimersConfig {
                response_ms: 40,
                timeouts_ms: vec![Some(100)],
                commit: CommitSetting::Factor(2.0),
            },
            radio: RadioConfig {
                loss: LossSetting::Fixed(0.0),
                mac_delay_lo_ms: 3,
                mac_delay_hi_ms: 12,
                unicast_hw_ack: false,
                ack_delay_ms: 1,
                primitives: vec![PrimitiveMode::Broadcast],
            },
            workload: WorkloadConfig {
                veto_prob: 0.0,
                accept_max: None,
                initial_max: 0,
                increment: 1,
                read_sizes: vec![1],
                write_sizes: vec![1],
                acked: false,
            },
            calibration: CalibrationConfig {
                neighbors: 6,
                trials: 250,
                seed: 7,
                low_timeout_ms: 50,
                below_pct: 90.0,
                high_timeout_ms: 100,
                at_least_pct: 99.5,
                lo: 0.0,
                hi: 1.0,
                tolerance: 1e-4,
            },
            output: OutputConfig {
                histogram_bin_ms: 5.0,
                emit_trace: false,
                emit_histogram: false,
            },
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Fields that a single run cannot satisfy, independent of sweeps.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::invalid("scenario", "trials", "must be positive"));
        }
        if self.topology.sizes.is_empty() || self.topology.sizes.contains(&0) {
            return Err(ConfigError::invalid("topology", "size", "sizes must be positive"));
        }
        if !self.topology.churn_rate.is_finite() || self.topology.churn_rate < 0.0 {
            return Err(ConfigError::invalid("topology", "churn_rate", "must be a finite non-negative rate"));
        }
        if let LossSetting::Fixed(p) = self.radio.loss {
            if !(0.0..=1.0).contains(&p) {
                return Err(lrw_core::ConfigError::LossOutOfRange(p).into());
            }
        }
        if self.radio.mac_delay_lo_ms > self.radio.mac_delay_hi_ms {
            return Err(ConfigError::invalid("radio", "mac_delay_lo_ms", "exceeds mac_delay_hi_ms"));
        }
        if self.radio.primitives.is_empty() {
            return Err(ConfigError::invalid("radio", "primitive", "needs at least one entry"));
        }
        if !(0.0..=1.0).contains(&self.workload.veto_prob) {
            return Err(ConfigError::invalid("workload", "veto_prob", "must lie in [0, 1]"));
        }
        if self.workload.initial_max < 0 {
            return Err(ConfigError::invalid("workload", "initial_max", "must be non-negative"));
        }
        if self.timers.timeouts_ms.is_empty() {
            return Err(ConfigError::invalid("timers", "timeout_ms", "needs at least one entry"));
        }
        if let CommitSetting::Factor(f) = self.timers.commit {
            if !f.is_finite() || f <= 0.0 {
                return Err(ConfigError::invalid("timers", "commit_ms", "factor must be positive"));
            }
        }
        for &t in &self.timers.timeouts_ms {
            self.timers.timer_config(t)?;
        }
        if !(self.output.histogram_bin_ms > 0.0 && self.output.histogram_bin_ms.is_finite()) {
            return Err(ConfigError::invalid("output", "histogram_bin_ms", "must be positive"));
        }
        if self.series_size == Some(0) {
            return Err(ConfigError::invalid("scenario", "series_size", "must be positive"));
        }
        let c = &self.calibration;
        if !(0.0..=1.0).contains(&c.lo) || !(0.0..=1.0).contains(&c.hi) || c.lo >= c.hi {
            return Err(ConfigError::invalid("calibration", "lo", "bounds must satisfy 0 <= lo < hi <= 1"));
        }
        if c.trials == 0 || c.neighbors == 0 || c.tolerance.is_nan() || c.tolerance <= 0.0 {
            return Err(ConfigError::invalid("calibration", "trials", "trials, neighbors and tolerance must be positive"));
        }
        Ok(())
    }
}

impl FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = ScenarioConfig::default();
        let mut size_key: Option<&'static str> = None;
        let mut seen = BTreeSet::new();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                let value = value.trim();
                if !seen.insert((section.to_owned(), key.to_owned())) {
                    return Err(ConfigError::invalid(section, key, "duplicate key"));
                }
                let field = Field { section, key, value };
                match (section, key) {
                    ("scenario", "name") => cfg.name = value.to_owned(),
                    ("scenario", "mode") => cfg.mode = field.parse_mode()?,
                    ("scenario", "trials") => cfg.trials = field.parse()?,
                    ("scenario", "series_size") => cfg.series_size = Some(field.parse()?),
                    ("scenario", "seed") => cfg.seed = field.parse()?,
                    ("scenario", "strict_payload") => cfg.strict_payload = field.parse()?,
                    ("scenario", "note") => cfg.note = Some(value.to_owned()),
                    ("topology", "kind") => cfg.topology.kind = field.parse_kind(props)?,
                    ("topology", "radius") => {}
                    ("topology", k @ ("neighbors" | "nodes")) => {
                        cfg.topology.sizes = field.parse_list()?;
                        size_key = Some(if k == "neighbors" { "neighbors" } else { "nodes" });
                    }
                    ("topology", "churn_rate") => cfg.topology.churn_rate = field.parse()?,
                    ("topology", "initiators") => cfg.initiators = field.parse_selector()?,
                    ("timers", "response_ms") => cfg.timers.response_ms = field.parse()?,
                    ("timers", "timeout_ms") => cfg.timers.timeouts_ms = field.parse_timeouts()?,
                    ("timers", "commit_ms") => cfg.timers.commit = field.parse_commit()?,
                    ("radio", "loss_prob") => {
                        cfg.radio.loss = if value == "auto" {
                            LossSetting::Auto
                        } else {
                            LossSetting::Fixed(field.parse()?)
                        }
                    }
                    ("radio", "mac_delay_lo_ms") => cfg.radio.mac_delay_lo_ms = field.parse()?,
                    ("radio", "mac_delay_hi_ms") => cfg.radio.mac_delay_hi_ms = field.parse()?,
                    ("radio", "unicast_hw_ack") => cfg.radio.unicast_hw_ack = field.parse()?,
                    ("radio", "ack_delay_ms") => cfg.radio.ack_delay_ms = field.parse()?,
                    ("radio", "primitive") => cfg.radio.primitives = field.parse_primitives()?,
                    ("workload", "veto_prob") => cfg.workload.veto_prob = field.parse()?,
                    ("workload", "accept_max") => cfg.workload.accept_max = Some(field.parse()?),
                    ("workload", "initial_max") => cfg.workload.initial_max = field.parse()?,
                    ("workload", "increment") => cfg.workload.increment = field.parse()?,
                    ("workload", "read_set") => cfg.workload.read_sizes = field.parse_list()?,
                    ("workload", "write_set") => cfg.workload.write_sizes = field.parse_list()?,
                    ("workload", "acked") => cfg.workload.acked = field.parse()?,
                    ("calibration", "neighbors") => cfg.calibration.neighbors = field.parse()?,
                    ("calibration", "trials") => cfg.calibration.trials = field.parse()?,
                    ("calibration", "seed") => cfg.calibration.seed = field.parse()?,
                    ("calibration", "low_timeout_ms") => cfg.calibration.low_timeout_ms = field.parse()?,
                    ("calibration", "below_pct") => cfg.calibration.below_pct = field.parse()?,
                    ("calibration", "high_timeout_ms") => cfg.calibration.high_timeout_ms = field.parse()?,
                    ("calibration", "at_least_pct") => cfg.calibration.at_least_pct = field.parse()?,
                    ("calibration", "lo") => cfg.calibration.lo = field.parse()?,
                    ("calibration", "hi") => cfg.calibration.hi = field.parse()?,
                    ("calibration", "tolerance") => cfg.calibration.tolerance = field.parse()?,
                    ("output", "histogram_bin_ms") => cfg.output.histogram_bin_ms = field.parse()?,
                    ("output", "emit_trace") => cfg.output.emit_trace = field.parse()?,
                    ("output", "emit_histogram") => cfg.output.emit_histogram = field.parse()?,
                    _ => return Err(ConfigError::UnknownKey(section.to_owned(), key.to_owned())),
                }
            }
        }
        let expected = match cfg.topology.kind {
            TopologyKind::Star => Some("neighbors"),
            TopologyKind::Clique | TopologyKind::Band { .. } => Some("nodes"),
            TopologyKind::Testbed31 => None,
        };
        match (expected, size_key) {
            (Some(want), Some(got)) if want != got => {
                return Err(ConfigError::invalid("topology", got, format!("use `{want}` for this topology kind")))
            }
            (None, Some(got)) => {
                return Err(ConfigError::invalid("topology", got, "the 31-node topology has a fixed size"))
            }
            (Some("nodes"), None) => {
                return Err(ConfigError::invalid("topology", "nodes", "required for this topology kind"))
            }
            _ => {}
        }
        if cfg.topology.kind == TopologyKind::Testbed31 {
            cfg.topology.sizes = vec![31];
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Field<'a> {
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

impl Field<'_> {
    fn err(&self, message: impl fmt::Display) -> ConfigError {
        ConfigError::invalid(self.section, self.key, format!("`{}`: {message}", self.value))
    }

    fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value.parse().map_err(|e| self.err(e))
    }

    fn parse_mode(&self) -> Result<Mode, ConfigError> {
        Ok(match self.value {
            "lrw" => Mode::Lrw,
            "read_all" => Mode::ReadAll,
            "write_all" => Mode::WriteAll,
            "transact" => Mode::Transact,
            "consensus" => Mode::Consensus,
            _ => return Err(self.err("expected lrw, read_all, write_all, transact or consensus")),
        })
    }

    fn parse_kind(&self, props: &ini::Properties) -> Result<TopologyKind, ConfigError> {
        Ok(match self.value {
            "star" => TopologyKind::Star,
            "clique" => TopologyKind::Clique,
            "testbed31" => TopologyKind::Testbed31,
            "band" => {
                let radius = props.get("radius").ok_or_else(|| {
                    ConfigError::invalid("topology", "radius", "required for a band topology")
                })?;
                let field = Field {
                    section: "topology",
                    key: "radius",
                    value: radius.trim(),
                };
                TopologyKind::Band { radius: field.parse()? }
            }
            _ => return Err(self.err("expected star, clique, band or testbed31")),
        })
    }

    fn parse_selector(&self) -> Result<InitiatorSelector, ConfigError> {
        Ok(match self.value {
            "default" => InitiatorSelector::Default,
            "center" => InitiatorSelector::Center,
            "rotate" => InitiatorSelector::Rotate,
            v if v.starts_with("mod:") => {
                let parts: Vec<&str> = v[4..].split(':').collect();
                let [m, r] = parts[..] else {
                    return Err(self.err("expected mod:MODULUS:RESIDUE"));
                };
                let modulus: u32 = m.trim().parse().map_err(|e| self.err(e))?;
                let residue: u32 = r.trim().parse().map_err(|e| self.err(e))?;
                if modulus == 0 || residue >= modulus {
                    return Err(self.err("residue must be below a positive modulus"));
                }
                InitiatorSelector::Modulo { modulus, residue }
            }
            _ => InitiatorSelector::List(self.parse_list()?),
        })
    }

    fn parse_timeouts(&self) -> Result<Vec<Option<u64>>, ConfigError> {
        self.value
            .split(',')
            .map(str::trim)
            .map(|v| match v {
                "inf" => Ok(vec![None]),
                _ => parse_range(v).map(|r| r.into_iter().map(Some).collect()),
            })
            .collect::<Result<Vec<Vec<_>>, String>>()
            .map(|v| v.concat())
            .map_err(|e| self.err(e))
    }

    fn parse_commit(&self) -> Result<CommitSetting, ConfigError> {
        match self.value.strip_suffix('x') {
            Some(f) => f
                .trim()
                .parse()
                .map(CommitSetting::Factor)
                .map_err(|e| self.err(e)),
            None => self.parse().map(CommitSetting::Ms),
        }
    }

    fn parse_primitives(&self) -> Result<Vec<PrimitiveMode>, ConfigError> {
        self.value
            .split(',')
            .map(|v| match v.trim() {
                "broadcast" => Ok(PrimitiveMode::Broadcast),
                "unicast" => Ok(PrimitiveMode::Unicast),
                _ => Err(self.err("expected broadcast or unicast")),
            })
            .collect()
    }

    fn parse_list<T>(&self) -> Result<Vec<T>, ConfigError>
    where
        T: TryFrom<u64>,
    {
        let mut out = Vec::new();
        for item in self.value.split(',').map(str::trim) {
            for v in parse_range(item).map_err(|e| self.err(e))? {
                out.push(T::try_from(v).map_err(|_| self.err("value out of range"))?);
            }
        }
        if out.is_empty() {
            return Err(self.err("empty list"));
        }
        Ok(out)
    }
}

/// `n`, `a..b` or `a..b step s`, all inclusive.
fn parse_range(item: &str) -> Result<Vec<u64>, String> {
    let Some((lo, rest)) = item.split_once("..") else {
        return item.parse().map(|v| vec![v]).map_err(|e| format!("{e}"));
    };
    let (hi, step) = match rest.split_once("step") {
        Some((hi, step)) => (hi, step.trim().parse::<u64>().map_err(|e| e.to_string())?),
        None => (rest, 1),
    };
    let lo: u64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: u64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if step == 0 || lo > hi {
        return Err("range needs lo <= hi and a positive step".into());
    }
    Ok((lo..=hi).step_by(step as usize).collect())
}
