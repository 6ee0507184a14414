//! Flat `key = value` experiment files.
//!
//! ```text
//! # comment
//! preset = uwb
//! mac.variant = slotted-aloha
//! mac.slot_size = 0.002
//! sweep.mac.retx_limit = 0, 2, 4, 6
//! experiment.replications = 10
//! ```
//!
//! `preset` is applied before every other key regardless of where it
//! appears. `sweep.<key>` lines declare sweep axes in file order; the first
//! axis varies slowest.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::mac::MacVariant;
use crate::radio::{CcaMode, ChannelModel, Modulation, Propagation};
use crate::scenario::{Placement, Position};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError {
            path: None,
            line,
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.to_path_buf());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}:", p.display())?;
        }
        if let Some(l) = self.line {
            write!(f, "{l}:")?;
        }
        if self.path.is_some() || self.line.is_some() {
            write!(f, " ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub sweeps: Vec<SweepAxis>,
    pub replications: usize,
    pub base_seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            base: SimConfig::default(),
            sweeps: vec![],
            replications: 1,
            base_seed: 1,
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn n_points(&self) -> usize {
        self.sweeps.iter().map(|a| a.values.len()).product()
    }

    /// Key/value assignments of sweep point `index`, first axis outermost.
    pub fn point_assignments(&self, index: usize) -> Vec<(&str, &str)> {
        let mut rest = index;
        let mut out = vec![("", ""); self.sweeps.len()];
        for (i, axis) in self.sweeps.iter().enumerate().rev() {
            let n = axis.values.len();
            out[i] = (axis.key.as_str(), axis.values[rest % n].as_str());
            rest /= n;
        }
        out
    }

    /// Configuration of sweep point `index`.
    pub fn point_config(&self, index: usize) -> Result<SimConfig, ConfigError> {
        let mut c = self.base.clone();
        for (k, v) in self.point_assignments(index) {
            set(&mut c, k, v).map_err(|m| ConfigError::new(None, Some(k), m))?;
        }
        Ok(c)
    }

    /// Every sweep point must validate; warnings are returned.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        if self.replications == 0 {
            return Err(ConfigError::new(
                None,
                Some("experiment.replications"),
                "must be >= 1",
            ));
        }
        let mut warnings = vec![];
        for p in 0..self.n_points() {
            let c = self.point_config(p)?;
            let w = c.validate().map_err(|(k, m)| {
                let m = if self.sweeps.is_empty() {
                    m
                } else {
                    format!("{m} (sweep point {p})")
                };
                ConfigError::new(None, Some(k), m)
            })?;
            warnings.extend(w);
        }
        warnings.dedup();
        Ok(warnings)
    }

    /// Adds or replaces a sweep axis from `key=v1,v2,...`.
    pub fn add_sweep(&mut self, arg: &str) -> Result<(), ConfigError> {
        let (key, values) = arg.split_once('=').ok_or_else(|| {
            ConfigError::new(None, None, format!("expected key=v1,v2,... in `{arg}`"))
        })?;
        let axis = parse_axis(key.trim(), values)
            .map_err(|m| ConfigError::new(None, Some(key.trim()), m))?;
        match self.sweeps.iter_mut().find(|a| a.key == axis.key) {
            Some(a) => *a = axis,
            None => self.sweeps.push(axis),
        }
        Ok(())
    }
}

fn parse_axis(key: &str, values: &str) -> Result<SweepAxis, String> {
    let values: Vec<String> = values
        .split(',')
        .map(|v| unquote(v.trim()).to_string())
        .collect();
    if values.iter().any(String::is_empty) {
        return Err("empty sweep value".into());
    }
    let mut probe = SimConfig::default();
    for v in &values {
        set(&mut probe, key, v)?;
    }
    Ok(SweepAxis {
        key: key.to_string(),
        values,
    })
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn num(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn count<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn choice<T: Copy>(v: &str, options: &[(&str, T)]) -> Result<T, String> {
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            format!("`{v}` is not one of {}", names.join(", "))
        })
}

/// Every key accepted by [`set`].
pub const KEYS: &[&str] = &[
    "radio.bandwidth",
    "radio.carrier_frequency",
    "radio.bitrate",
    "radio.antenna_height",
    "radio.antenna_gain",
    "radio.noise_figure",
    "radio.temperature",
    "radio.sensitivity",
    "radio.rx_threshold",
    "radio.tx_power",
    "radio.modulation",
    "radio.cca_mode",
    "radio.propagation",
    "radio.channel",
    "mac.variant",
    "mac.slot_size",
    "mac.retx_delay",
    "mac.retx_limit",
    "mac.queue_capacity",
    "mac.csma_backoff_unit",
    "mac.csma_min_backoff_exponent",
    "mac.csma_max_backoff_exponent",
    "mac.ack_turnaround",
    "mac.data_bits",
    "mac.ack_bits",
    "mac.control_bits",
    "mac.allow_short_retx_delay",
    "routing.route_lifetime",
    "routing.buffer_capacity",
    "routing.rreq_min_interval",
    "routing.discovery_timeout",
    "routing.discovery_retries",
    "scenario.width",
    "scenario.height",
    "scenario.n_sensors",
    "scenario.n_targets",
    "scenario.n_radio_targets",
    "scenario.event_period",
    "scenario.event_jitter",
    "scenario.detection_range",
    "scenario.target_speed",
    "scenario.sim_duration",
    "scenario.base_x",
    "scenario.base_y",
    "scenario.placement",
    "scenario.grid_jitter",
    "scenario.identification_timeout",
    "scenario.mobility_tick",
    "energy.tx_power_draw",
    "energy.rx_power_draw",
    "energy.supply_voltage",
    "metrics.truncation_guard",
];

/// Assigns one simulation parameter from its textual value.
pub fn set(c: &mut SimConfig, key: &str, value: &str) -> Result<(), String> {
    let v = unquote(value.trim());
    let r = &mut c.radio;
    let m = &mut c.mac;
    let s = &mut c.scenario;
    match key {
        "radio.bandwidth" => r.bandwidth = num(v)?,
        "radio.carrier_frequency" => r.carrier_frequency = num(v)?,
        "radio.bitrate" => r.bitrate = num(v)?,
        "radio.antenna_height" => r.antenna_height = num(v)?,
        "radio.antenna_gain" => r.antenna_gain = num(v)?,
        "radio.noise_figure" => r.noise_figure = num(v)?,
        "radio.temperature" => r.temperature = num(v)?,
        "radio.sensitivity" => r.sensitivity = num(v)?,
        "radio.rx_threshold" => r.rx_threshold = num(v)?,
        "radio.tx_power" => r.tx_power = num(v)?,
        "radio.modulation" => {
            r.modulation = choice(
                v,
                &[
                    ("uwb-bpm", Modulation::UwbBpm),
                    ("oqpsk", Modulation::Oqpsk),
                ],
            )?
        }
        "radio.cca_mode" => {
            r.cca_mode = choice(
                v,
                &[
                    ("always-free", CcaMode::AlwaysFree),
                    ("threshold", CcaMode::Threshold),
                ],
            )?
        }
        "radio.propagation" => {
            r.propagation = choice(
                v,
                &[
                    ("two-ray", Propagation::TwoRayGround),
                    ("free-space", Propagation::FreeSpace),
                ],
            )?
        }
        "radio.channel" => {
            r.channel = choice(
                v,
                &[
                    ("ber", ChannelModel::BerCapture),
                    ("ideal", ChannelModel::Ideal),
                ],
            )?
        }
        "mac.variant" => {
            m.variant = MacVariant::parse(v).ok_or_else(|| {
                format!("`{v}` is not one of unslotted-aloha, slotted-aloha, csma-ca")
            })?
        }
        "mac.slot_size" => m.slot_size = num(v)?,
        "mac.retx_delay" => m.retx_delay = num(v)?,
        "mac.retx_limit" => m.retx_limit = count(v)?,
        "mac.queue_capacity" => m.queue_capacity = count(v)?,
        "mac.csma_backoff_unit" => m.csma_backoff_unit = num(v)?,
        "mac.csma_min_backoff_exponent" => m.csma_min_backoff_exponent = count(v)?,
        "mac.csma_max_backoff_exponent" => m.csma_max_backoff_exponent = count(v)?,
        "mac.ack_turnaround" => m.ack_turnaround = num(v)?,
        "mac.data_bits" => m.data_bits = count(v)?,
        "mac.ack_bits" => m.ack_bits = count(v)?,
        "mac.control_bits" => m.control_bits = count(v)?,
        "mac.allow_short_retx_delay" => c.allow_short_retx_delay = flag(v)?,
        "routing.route_lifetime" => c.routing.route_lifetime = num(v)?,
        "routing.buffer_capacity" => c.routing.buffer_capacity = count(v)?,
        "routing.rreq_min_interval" => c.routing.rreq_min_interval = num(v)?,
        "routing.discovery_timeout" => c.routing.discovery_timeout = num(v)?,
        "routing.discovery_retries" => c.routing.discovery_retries = count(v)?,
        "scenario.width" => s.width = num(v)?,
        "scenario.height" => s.height = num(v)?,
        "scenario.n_sensors" => s.n_sensors = count(v)?,
        "scenario.n_targets" => s.n_targets = count(v)?,
        "scenario.n_radio_targets" => s.n_radio_targets = count(v)?,
        "scenario.event_period" => s.event_period = num(v)?,
        "scenario.event_jitter" => s.event_jitter = num(v)?,
        "scenario.detection_range" => s.detection_range = num(v)?,
        "scenario.target_speed" => s.target_speed = num(v)?,
        "scenario.sim_duration" => s.sim_duration = num(v)?,
        "scenario.base_x" => {
            let y = s.base().y;
            s.base_position = Some(Position::new(num(v)?, y));
        }
        "scenario.base_y" => {
            let x = s.base().x;
            s.base_position = Some(Position::new(x, num(v)?));
        }
        "scenario.placement" => {
            s.placement = choice(
                v,
                &[
                    ("grid", Placement::JitteredGrid),
                    ("uniform", Placement::Uniform),
                ],
            )?
        }
        "scenario.grid_jitter" => s.grid_jitter = num(v)?,
        "scenario.identification_timeout" => s.identification_timeout = num(v)?,
        "scenario.mobility_tick" => s.mobility_tick = num(v)?,
        "energy.tx_power_draw" => c.energy.tx_power_draw = num(v)?,
        "energy.rx_power_draw" => c.energy.rx_power_draw = num(v)?,
        "energy.supply_voltage" => c.energy.supply_voltage = num(v)?,
        "metrics.truncation_guard" => c.truncation_guard = num(v)?,
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

/// Parses experiment text. Validation is left to [`ExperimentSpec::validate`]
/// except that errors are mapped back to the defining line.
pub fn parse(text: &str) -> Result<ExperimentSpec, ConfigError> {
    struct Line<'a> {
        no: usize,
        key: &'a str,
        value: &'a str,
    }
    let mut lines = vec![];
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::new(Some(no), None, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::new(Some(no), None, "missing key"));
        }
        if value.is_empty() {
            return Err(ConfigError::new(Some(no), Some(key), "missing value"));
        }
        if let Some(prev) = seen.insert(key, no) {
            return Err(ConfigError::new(
                Some(no),
                Some(key),
                format!("duplicate key (first set on line {prev})"),
            ));
        }
        lines.push(Line { no, key, value });
    }

    let mut spec = ExperimentSpec::default();
    if let Some(l) = lines.iter().find(|l| l.key == "preset") {
        let name = unquote(l.value);
        spec.base = SimConfig::preset(name).ok_or_else(|| {
            ConfigError::new(
                Some(l.no),
                Some("preset"),
                format!("unknown preset `{name}` (uwb, oqpsk)"),
            )
        })?;
    }
    for l in lines.iter().filter(|l| l.key != "preset") {
        let err = |m: String| ConfigError::new(Some(l.no), Some(l.key), m);
        let v = unquote(l.value);
        match l.key {
            "experiment.replications" => spec.replications = count(v).map_err(err)?,
            "experiment.seed" => spec.base_seed = count(v).map_err(err)?,
            "experiment.output" => spec.output = PathBuf::from(v),
            k if k.starts_with("sweep.") => {
                let axis = parse_axis(&k["sweep.".len()..], l.value).map_err(err)?;
                spec.sweeps.push(axis);
            }
            k => set(&mut spec.base, k, v).map_err(err)?,
        }
    }
    spec.validate().map_err(|mut e| {
        if let Some(k) = &e.key {
            e.line = seen
                .get(k.as_str())
                .or_else(|| seen.get(format!("sweep.{k}").as_str()))
                .copied();
        }
        e
    })?;
    Ok(spec)
}

/// Reads and parses an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(None, None, format!("cannot read: {e}")).at(path))?;
    parse(&text).map_err(|e| e.at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uwb_preset_values() {
        let s = parse("preset = \"uwb\"\n").unwrap();
        assert_eq!(s.base.radio.tx_power, -24.318);
        assert_eq!(s.base.radio.bitrate, 1e6);
        assert_eq!(s.base.radio.bandwidth, 1e8);
    }

    #[test]
    fn oqpsk_preset_values() {
        let s = parse("preset = oqpsk").unwrap();
        assert_eq!(s.base.radio.sensitivity, -96.0);
        assert_eq!(s.base.radio.rx_threshold, -85.0);
    }

    #[test]
    fn preset_applies_first() {
        let s = parse("mac.retx_limit = 2\npreset = uwb\n").unwrap();
        assert_eq!(s.base.mac.retx_limit, 2);
    }

    #[test]
    fn negative_slot_names_key_and_line() {
        let e = parse("mac.variant = slotted\n\nmac.slot_size = -1\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("mac.slot_size"));
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse("# x\nmac.slotsize = 0.002\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("unknown key"));
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(parse("mac.retx_limit").unwrap_err().line, Some(1));
        assert_eq!(parse("mac.retx_limit = -1").unwrap_err().line, Some(1));
        assert_eq!(parse("a = 1\na = 2").unwrap_err().line, Some(2));
        let e = parse("mac.retx_limit = 1\nmac.retx_limit = 2").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn sweep_axes_and_points() {
        let s = parse(
            "sweep.mac.retx_limit = 0, 2, 4\nsweep.mac.variant = unslotted, slotted\nmac.slot_size = 0.002",
        )
        .unwrap();
        assert_eq!(s.n_points(), 6);
        assert_eq!(
            s.point_assignments(0),
            vec![("mac.retx_limit", "0"), ("mac.variant", "unslotted")]
        );
        assert_eq!(
            s.point_assignments(3),
            vec![("mac.retx_limit", "2"), ("mac.variant", "slotted")]
        );
        assert_eq!(s.point_config(5).unwrap().mac.retx_limit, 4);
    }

    #[test]
    fn invalid_sweep_value_reported() {
        let e = parse("sweep.mac.retx_delay = 0.005, 0.0001").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("mac.retx_delay"));
        assert_eq!(e.line, Some(1));
        let e = parse("sweep.mac.retx_limit = 1, x").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn short_retx_delay_override() {
        assert!(parse("mac.retx_delay = 0.001").is_err());
        let s = parse("mac.retx_delay = 0.001\nmac.allow_short_retx_delay = true").unwrap();
        assert!(!s.validate().unwrap().is_empty());
    }

    #[test]
    fn empty_file_is_default_single_point() {
        let s = parse("").unwrap();
        assert_eq!(s.n_points(), 1);
        assert_eq!(s.base, SimConfig::default());
    }

    #[test]
    fn cli_sweep_overrides_file_axis() {
        let mut s = parse("sweep.mac.retx_limit = 0, 1").unwrap();
        s.add_sweep("mac.retx_limit=3,4,5").unwrap();
        assert_eq!(s.sweeps.len(), 1);
        assert_eq!(s.n_points(), 3);
        assert!(s.add_sweep("nonsense").is_err());
    }

    #[test]
    fn every_listed_key_is_settable() {
        let samples = [
            "1",
            "uwb-bpm",
            "always-free",
            "two-ray",
            "ber",
            "csma",
            "true",
            "grid",
        ];
        for k in KEYS {
            let mut c = SimConfig::default();
            assert!(
                samples.iter().any(|v| set(&mut c, k, v).is_ok()),
                "{k} rejects every sample"
            );
        }
    }
}
