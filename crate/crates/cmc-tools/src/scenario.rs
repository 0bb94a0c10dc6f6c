//! Flat `key = value` scenario files with explicit SI unit suffixes.
//!
//! ```text
//! # const on-time buck
//! topology = const-on-time-valley
//! v_in = 12 V
//! t_on = 100 ns
//! a_int = 4 mV
//! ```
//!
//! Blank lines and `#` comments are ignored. Amplitudes and slopes may be
//! given in volts; they are divided by `r_sample` so the core only sees
//! currents.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use cmc_core::conditioning::OverdriveParams;
use cmc_core::interference::{self, InterferenceSignal, SpectralBounds};
use cmc_core::loop_core::{LoopConfig, PhaseMode, Topology};
use cmc_core::sweep;
use cmc_core::Conditioning;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, key: Option<String>, message: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("inconsistent scenario: {0}")]
    Inconsistent(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ScenarioError {
    /// Key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Parse { key, .. } => key.as_deref(),
            _ => None,
        }
    }
}

/// Physical dimension of a parsed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Time,
    Current,
    Voltage,
    Resistance,
    Frequency,
    Inductance,
    CurrentSlope,
    VoltageSlope,
}

impl Dim {
    fn base_unit(self) -> &'static str {
        match self {
            Dim::Time => "s",
            Dim::Current => "A",
            Dim::Voltage => "V",
            Dim::Resistance => "ohm",
            Dim::Frequency => "Hz",
            Dim::Inductance => "H",
            Dim::CurrentSlope => "A/s",
            Dim::VoltageSlope => "V/s",
        }
    }
}

fn prefix_scale(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" | "μ" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        _ => return None,
    })
}

/// Parses a unit such as `mV`, `MHz`, `mohm` or `A/us` into its dimension
/// and scale to SI.
pub fn parse_unit(unit: &str) -> Option<(Dim, f64)> {
    if let Some((num, den)) = unit.split_once('/') {
        let (dn, sn) = parse_unit(num.trim())?;
        let (dd, sd) = parse_unit(den.trim())?;
        return match (dn, dd) {
            (Dim::Current, Dim::Time) => Some((Dim::CurrentSlope, sn / sd)),
            (Dim::Voltage, Dim::Time) => Some((Dim::VoltageSlope, sn / sd)),
            _ => None,
        };
    }
    // Longer symbols first so "Hz" is not read as "H" with prefix.
    const BASES: [(&str, Dim); 8] = [
        ("ohm", Dim::Resistance),
        ("Ohm", Dim::Resistance),
        ("Ω", Dim::Resistance),
        ("Hz", Dim::Frequency),
        ("s", Dim::Time),
        ("A", Dim::Current),
        ("V", Dim::Voltage),
        ("H", Dim::Inductance),
    ];
    BASES.iter().find_map(|(sym, dim)| {
        let prefix = unit.strip_suffix(sym)?;
        prefix_scale(prefix).map(|s| (*dim, s))
    })
}

/// Splits `"4.5 mV"` into the SI value and its dimension.
pub fn parse_quantity(text: &str) -> Result<(f64, Dim), String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .rev()
        .find(|&i| text[..i].trim().parse::<f64>().is_ok())
        .ok_or_else(|| format!("'{text}' does not start with a number"))?;
    let value: f64 = text[..split].trim().parse().map_err(|_| format!("bad number in '{text}'"))?;
    let unit = text[split..].trim();
    if unit.is_empty() {
        return Err(format!("'{text}' needs a unit"));
    }
    let (dim, scale) = parse_unit(unit).ok_or_else(|| format!("unknown unit '{unit}'"))?;
    Ok((value * scale, dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Quantity(&'static [Dim]),
    Number,
    Integer,
    Text,
}

const CURRENT_LIKE: &[Dim] = &[Dim::Current, Dim::Voltage];
const SLOPE_LIKE: &[Dim] = &[Dim::CurrentSlope, Dim::VoltageSlope];

const KEYS: &[(&str, Kind)] = &[
    ("topology", Kind::Text),
    ("v_in", Kind::Quantity(&[Dim::Voltage])),
    ("v_out", Kind::Quantity(&[Dim::Voltage])),
    ("inductance", Kind::Quantity(&[Dim::Inductance])),
    ("m1", Kind::Quantity(&[Dim::CurrentSlope])),
    ("m2", Kind::Quantity(&[Dim::CurrentSlope])),
    ("t_on", Kind::Quantity(&[Dim::Time])),
    ("t_off", Kind::Quantity(&[Dim::Time])),
    ("t_period", Kind::Quantity(&[Dim::Time])),
    ("t_on_min", Kind::Quantity(&[Dim::Time])),
    ("i_max", Kind::Quantity(&[Dim::Current])),
    ("i_c", Kind::Quantity(&[Dim::Current])),
    ("i_out", Kind::Quantity(&[Dim::Current])),
    ("i_start", Kind::Quantity(&[Dim::Current])),
    ("i_c_min", Kind::Quantity(&[Dim::Current])),
    ("i_c_max", Kind::Quantity(&[Dim::Current])),
    ("map_points", Kind::Integer),
    ("r_sample", Kind::Quantity(&[Dim::Resistance])),
    ("conditioning", Kind::Text),
    ("m_s", Kind::Quantity(SLOPE_LIKE)),
    ("tau", Kind::Quantity(&[Dim::Time])),
    ("tau_c", Kind::Quantity(&[Dim::Time])),
    ("v_trig", Kind::Quantity(&[Dim::Voltage])),
    ("t_d_const", Kind::Quantity(&[Dim::Time])),
    ("t_blank", Kind::Quantity(&[Dim::Time])),
    ("interference", Kind::Text),
    ("a_int", Kind::Quantity(CURRENT_LIKE)),
    ("f_int", Kind::Quantity(&[Dim::Frequency])),
    ("slew", Kind::Quantity(SLOPE_LIKE)),
    ("phase", Kind::Number),
    ("phase_mode", Kind::Text),
    ("cycles", Kind::Integer),
    ("seed", Kind::Integer),
    ("output", Kind::Text),
    ("a_hat_max", Kind::Number),
    ("omega_hat_min", Kind::Number),
    ("omega_hat_max", Kind::Number),
    ("level", Kind::Number),
    ("param_min", Kind::Number),
    ("param_max", Kind::Number),
    ("param_points", Kind::Integer),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Quantity(f64, Dim),
    Number(f64),
    Integer(u64),
    Text(String),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: Value,
}

/// Parsed but not yet interpreted key/value pairs.
#[derive(Debug, Clone, Default)]
struct RawScenario {
    entries: BTreeMap<String, Entry>,
}

fn parse_error(line: usize, key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, key: Some(key.to_string()), message: format!("{key}: {}", message.into()) }
}

impl RawScenario {
    fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut raw = RawScenario::default();
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let content = full.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError::Parse { line, key: None, message: format!("expected key = value, got '{content}'") });
            };
            let (key, value) = (key.trim(), value.trim());
            let Some((_, kind)) = KEYS.iter().find(|(k, _)| *k == key) else {
                return Err(parse_error(line, key, "unknown key"));
            };
            let value = match kind {
                Kind::Quantity(dims) => {
                    let (v, dim) = parse_quantity(value).map_err(|m| parse_error(line, key, m))?;
                    if !dims.contains(&dim) {
                        let want: Vec<&str> = dims.iter().map(|d| d.base_unit()).collect();
                        return Err(parse_error(line, key, format!("unit must be one of [{}], got {}", want.join(", "), dim.base_unit())));
                    }
                    Value::Quantity(v, dim)
                }
                Kind::Number => Value::Number(value.parse().map_err(|_| parse_error(line, key, format!("'{value}' is not a number")))?),
                Kind::Integer => Value::Integer(value.parse().map_err(|_| parse_error(line, key, format!("'{value}' is not an integer")))?),
                Kind::Text => Value::Text(value.to_string()),
            };
            if raw.entries.insert(key.to_string(), Entry { line, value }).is_some() {
                return Err(parse_error(line, key, "duplicate key"));
            }
        }
        if raw.entries.is_empty() {
            return Err(ScenarioError::Parse { line: 0, key: None, message: "scenario is empty".into() });
        }
        Ok(raw)
    }

    fn text(&self, key: &str) -> Option<(&str, usize)> {
        match self.entries.get(key) {
            Some(Entry { value: Value::Text(s), line }) => Some((s.as_str(), *line)),
            _ => None,
        }
    }

    fn number(&self, key: &str) -> Option<f64> {
        match self.entries.get(key)?.value {
            Value::Number(v) => Some(v),
            _ => None,
        }
    }

    fn integer(&self, key: &str) -> Option<u64> {
        match self.entries.get(key)?.value {
            Value::Integer(v) => Some(v),
            _ => None,
        }
    }

    /// SI value of a quantity key, with volts converted to amperes.
    fn si(&self, key: &str, r_sample: Option<f64>) -> Result<Option<f64>, ScenarioError> {
        let Some(Entry { value: Value::Quantity(v, dim), line }) = self.entries.get(key) else {
            return Ok(None);
        };
        let current_domain = KEYS
            .iter()
            .any(|(k, kind)| *k == key && matches!(kind, Kind::Quantity(d) if d.contains(&Dim::Current) || d.contains(&Dim::CurrentSlope)));
        if current_domain && matches!(dim, Dim::Voltage | Dim::VoltageSlope) {
            let r = r_sample.ok_or_else(|| parse_error(*line, key, "voltage value needs r_sample"))?;
            return Ok(Some(v / r));
        }
        Ok(Some(*v))
    }

    fn require(&self, key: &str, r_sample: Option<f64>, why: &str) -> Result<f64, ScenarioError> {
        self.si(key, r_sample)?
            .ok_or_else(|| ScenarioError::Inconsistent(format!("{key} is required {why}")))
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

/// Interference description: a concrete waveform or only its bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum Interference {
    Signal(InterferenceSignal),
    Bounds(SpectralBounds),
}

impl Interference {
    pub fn bounds(&self) -> Result<SpectralBounds, interference::InterferenceError> {
        match self {
            Interference::Signal(w) => w.bounds(),
            Interference::Bounds(b) => Ok(*b),
        }
    }

    /// A waveform to simulate: the signal itself, or the worst-case
    /// trapezoid of the bounds.
    pub fn waveform(&self) -> Result<InterferenceSignal, interference::InterferenceError> {
        match self {
            Interference::Signal(w) => Ok(w.clone()),
            Interference::Bounds(b) => interference::worst_case_trapezoid(b.a_ub, b.omega_l, b.lambda_ub, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSettings {
    pub n_cycles: Option<usize>,
    pub seed: u64,
    pub output_path: Option<String>,
}

/// Sweep ranges used by the map and region commands. Normalized values are
/// relative to `m1` and the steady on time.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub i_c_min: f64,
    pub i_c_max: f64,
    pub map_points: usize,
    pub a_hat_max: f64,
    pub omega_hat_min: f64,
    pub omega_hat_max: f64,
    pub level: Option<f64>,
    pub param_range: Option<(f64, f64)>,
    pub param_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub loop_cfg: LoopConfig,
    pub conditioning: Conditioning,
    pub interference: Interference,
    pub run: RunSettings,
    /// Current command.
    pub i_c: f64,
    /// Start of the first sensing phase; the steady start when absent.
    pub i_start: Option<f64>,
    pub r_sample: Option<f64>,
    pub phase_mode: PhaseMode,
    pub sweep: SweepSettings,
}

pub const PRESETS: &[(&str, &str)] = &[("buck-prototype", BUCK_PROTOTYPE)];

/// Constant on-time valley buck converter.
const BUCK_PROTOTYPE: &str = "\
topology = const-on-time-valley
v_in = 12 V
v_out = 2 V
inductance = 240 nH
t_on = 100 ns
r_sample = 10 mohm
interference = sinusoid
f_int = 5 MHz
a_int = 4 mV
i_out = 8 A
";

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::from_raw(&RawScenario::parse(text)?)
    }

    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
        Self::parse(text)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    fn from_raw(raw: &RawScenario) -> Result<Self, ScenarioError> {
        let r_sample = raw.si("r_sample", None)?;
        if let Some(r) = r_sample {
            if r <= 0.0 {
                return Err(parse_error(raw.line("r_sample"), "r_sample", "must be positive"));
            }
        }
        let loop_cfg = loop_config(raw)?;
        let ripple = loop_cfg.m1 * loop_cfg.steady_on_time();
        let i_c = match (raw.si("i_c", None)?, raw.si("i_out", None)?) {
            (Some(c), _) => c,
            (None, Some(avg)) if loop_cfg.topology.is_peak() => avg + ripple / 2.0,
            (None, Some(avg)) => avg - ripple / 2.0,
            (None, None) => return Err(ScenarioError::Inconsistent("either i_c or i_out is required".into())),
        };
        let mut loop_cfg = loop_cfg;
        loop_cfg.i_max = raw.si("i_max", None)?.unwrap_or(4.0 * (i_c.abs() + ripple));
        loop_cfg
            .validate()
            .map_err(|e| ScenarioError::Inconsistent(e.to_string()))?;

        let conditioning = conditioning(raw, r_sample)?;
        let interference = interference_of(raw, r_sample)?;
        let phase_mode = match raw.text("phase_mode") {
            None | Some(("free-running", _)) => PhaseMode::FreeRunning,
            Some(("synchronous", _)) => PhaseMode::Synchronous,
            Some((other, line)) => return Err(parse_error(line, "phase_mode", format!("unknown mode '{other}'"))),
        };
        let param_range = match (raw.number("param_min"), raw.number("param_max")) {
            (Some(a), Some(b)) if a < b => Some((a, b)),
            (None, None) => None,
            _ => return Err(ScenarioError::Inconsistent("param_min and param_max must both be set, min < max".into())),
        };
        let sweep = SweepSettings {
            i_c_min: raw.si("i_c_min", None)?.unwrap_or(0.5 * i_c),
            i_c_max: raw.si("i_c_max", None)?.unwrap_or(1.5 * i_c),
            map_points: raw.integer("map_points").unwrap_or(101) as usize,
            a_hat_max: raw.number("a_hat_max").unwrap_or(0.4),
            omega_hat_min: raw.number("omega_hat_min").unwrap_or(0.25),
            omega_hat_max: raw.number("omega_hat_max").unwrap_or(8.0),
            level: raw.number("level"),
            param_range,
            param_points: raw.integer("param_points").map(|n| n as usize),
        };
        if !(sweep.i_c_min < sweep.i_c_max && sweep.map_points >= 2) {
            return Err(ScenarioError::Inconsistent("static map range is empty".into()));
        }
        if !(sweep.a_hat_max > 0.0 && sweep.omega_hat_min > 0.0 && sweep.omega_hat_min <= sweep.omega_hat_max) {
            return Err(ScenarioError::Inconsistent("region axes are empty".into()));
        }
        Ok(Scenario {
            loop_cfg,
            conditioning,
            interference,
            run: RunSettings {
                n_cycles: raw.integer("cycles").map(|n| n as usize),
                seed: raw.integer("seed").unwrap_or(0),
                output_path: raw.text("output").map(|(s, _)| s.to_string()),
            },
            i_c,
            i_start: raw.si("i_start", None)?,
            r_sample,
            phase_mode,
            sweep,
        })
    }
}

fn loop_config(raw: &RawScenario) -> Result<LoopConfig, ScenarioError> {
    let topology: Topology = match raw.text("topology") {
        Some((name, line)) => name
            .parse()
            .map_err(|_| parse_error(line, "topology", format!("unknown topology '{name}'")))?,
        None => return Err(ScenarioError::Inconsistent("topology is required".into())),
    };
    let (m1, m2) = match (raw.si("m1", None)?, raw.si("m2", None)?) {
        (Some(a), Some(b)) => (a, b),
        (None, None) => {
            let why = "when m1/m2 are not given";
            let v_in = raw.require("v_in", None, why)?;
            let v_out = raw.require("v_out", None, why)?;
            let l = raw.require("inductance", None, why)?;
            ((v_in - v_out) / l, v_out / l)
        }
        _ => return Err(ScenarioError::Inconsistent("m1 and m2 must be given together".into())),
    };
    let cfg = match topology {
        Topology::ConstOffTimePeak => {
            LoopConfig::const_off_time_peak(m1, m2, raw.require("t_off", None, "for const-off-time-peak")?, 1.0)
        }
        Topology::ConstOnTimeValley => {
            LoopConfig::const_on_time_valley(m1, m2, raw.require("t_on", None, "for const-on-time-valley")?, 1.0)
        }
        Topology::FixedFreqPeak => {
            LoopConfig::fixed_freq_peak(m1, m2, raw.require("t_period", None, "for fixed-frequency loops")?, 1.0)
        }
        Topology::FixedFreqValley => {
            LoopConfig::fixed_freq_valley(m1, m2, raw.require("t_period", None, "for fixed-frequency loops")?, 1.0)
        }
    };
    Ok(cfg.with_t_on_min(raw.si("t_on_min", None)?.unwrap_or(0.0)))
}

fn conditioning(raw: &RawScenario, r_sample: Option<f64>) -> Result<Conditioning, ScenarioError> {
    let cond = match raw.text("conditioning") {
        None | Some(("none", _)) => Conditioning::None,
        Some(("slope", _)) => Conditioning::SlopeComp { m_s: raw.require("m_s", r_sample, "for slope compensation")? },
        Some(("filter", _)) => Conditioning::Filter { tau: raw.require("tau", None, "for the filter")? },
        Some(("overdrive", _)) => {
            let why = "for the overdrive comparator";
            Conditioning::Overdrive(OverdriveParams {
                tau_c: raw.require("tau_c", None, why)?,
                v_trig: raw.require("v_trig", None, why)?,
                t_d_const: raw.si("t_d_const", None)?.unwrap_or(0.0),
                r_sample: r_sample.ok_or_else(|| ScenarioError::Inconsistent(format!("r_sample is required {why}")))?,
                t_blank: raw.si("t_blank", None)?.unwrap_or(0.0),
            })
        }
        Some((other, line)) => return Err(parse_error(line, "conditioning", format!("unknown method '{other}'"))),
    };
    cond.validate().map_err(|e| ScenarioError::Inconsistent(e.to_string()))?;
    Ok(cond)
}

fn interference_of(raw: &RawScenario, r_sample: Option<f64>) -> Result<Interference, ScenarioError> {
    let kind = raw.text("interference");
    if matches!(kind, None | Some(("zero", _))) {
        return Ok(Interference::Signal(InterferenceSignal::Zero));
    }
    let why = "for nonzero interference";
    let a = raw.require("a_int", r_sample, why)?;
    let omega = TAU * raw.require("f_int", None, why)?;
    let phase = raw.number("phase").unwrap_or(0.0);
    let slew = raw.si("slew", r_sample)?;
    let out = match kind {
        Some(("sinusoid", _)) => Interference::Signal(InterferenceSignal::sinusoid(a, omega, phase)),
        Some(("trapezoid", _)) => {
            Interference::Signal(InterferenceSignal::trapezoid(a, omega, slew.unwrap_or(2.0 * a * omega), phase))
        }
        Some(("bounds", _)) => {
            let slew = slew.unwrap_or(a * omega);
            let factor = if a > 0.0 { slew / (a * omega) } else { 1.0 };
            Interference::Bounds(sweep::cell_bounds(a, omega / TAU, factor))
        }
        Some((other, line)) => return Err(parse_error(line, "interference", format!("unknown waveform '{other}'"))),
        None => unreachable!(),
    };
    match &out {
        Interference::Signal(w) => w.validate(),
        Interference::Bounds(b) => b.validate(),
    }
    .map_err(|e| ScenarioError::Inconsistent(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn buck_preset_slopes() {
        let s = Scenario::preset("buck-prototype").unwrap();
        assert!((s.loop_cfg.m1 - 10.0 / 240e-9).abs() < 1e-3);
        assert!((s.loop_cfg.m2 - 2.0 / 240e-9).abs() < 1e-3);
        assert!((s.loop_cfg.m2 * 1e-6 - 8.333).abs() < 1e-3);
        assert_eq!(s.loop_cfg.topology, Topology::ConstOnTimeValley);
        let Interference::Signal(InterferenceSignal::Sinusoid(t)) = &s.interference else { panic!() };
        assert!((t.amplitude - 0.4).abs() < 1e-12);
        assert!((t.omega - TAU * 5e6).abs() < 1e-3);
        // Valley command sits half a ripple below the average.
        let ripple = s.loop_cfg.m1 * 100e-9;
        assert!((s.i_c - (8.0 - ripple / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Scenario::preset("boost"), Err(ScenarioError::UnknownPreset(_))));
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(Scenario::parse(""), Err(ScenarioError::Parse { .. })));
        assert!(matches!(Scenario::parse("# nothing\n\n"), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn wrong_unit_names_key() {
        let text = BUCK_PROTOTYPE.replace("t_on = 100 ns", "t_on = 100 mV");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 5, .. }), "{err}");
        assert_eq!(err.key(), Some("t_on"));
        assert!(err.to_string().contains("t_on"));
    }

    #[test]
    fn missing_unit_and_unknown_key() {
        let err = Scenario::parse("t_on = 100").unwrap_err();
        assert_eq!(err.key(), Some("t_on"));
        let err = Scenario::parse("colour = red").unwrap_err();
        assert_eq!(err.key(), Some("colour"));
    }

    #[test]
    fn duplicate_key_reports_second_line() {
        let err = Scenario::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }));
    }

    #[test]
    fn units() {
        assert_eq!(parse_unit("MHz"), Some((Dim::Frequency, 1e6)));
        assert_eq!(parse_unit("mohm"), Some((Dim::Resistance, 1e-3)));
        assert_eq!(parse_unit("nH"), Some((Dim::Inductance, 1e-9)));
        assert_eq!(parse_unit("A/us"), Some((Dim::CurrentSlope, 1e6)));
        assert_eq!(parse_unit("xV"), None);
        assert_eq!(parse_unit("A/V"), None);
        let (v, d) = parse_quantity("1.5e-3 V").unwrap();
        assert_eq!(d, Dim::Voltage);
        assert!((v - 1.5e-3).abs() < 1e-18);
    }

    #[test]
    fn voltage_slope_needs_sense_resistor() {
        let text = "topology = const-off-time-peak\nm1 = 1 A/us\nm2 = 1 A/us\nt_off = 1 us\ni_c = 2 A\nconditioning = slope\nm_s = 5 mV/us\n";
        assert_eq!(Scenario::parse(text).unwrap_err().key(), Some("m_s"));
        let s = Scenario::parse(&format!("{text}r_sample = 10 mohm\n")).unwrap();
        assert!((s.conditioning.compensation_slope() - 0.5e6).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn quantity_round_trip(mant in 1u32..100_000, exp in -6i32..6, pi in 0usize..7, ui in 0usize..6) {
            let prefixes = [("p", 1e-12), ("n", 1e-9), ("u", 1e-6), ("m", 1e-3), ("", 1.0), ("k", 1e3), ("M", 1e6)];
            let units = [("s", Dim::Time), ("A", Dim::Current), ("V", Dim::Voltage), ("ohm", Dim::Resistance), ("Hz", Dim::Frequency), ("H", Dim::Inductance)];
            let v = mant as f64 * 10f64.powi(exp);
            let (p, scale) = prefixes[pi];
            let (u, dim) = units[ui];
            let (got, d) = parse_quantity(&format!("{v} {p}{u}")).unwrap();
            prop_assert_eq!(d, dim);
            prop_assert!((got - v * scale).abs() <= 1e-12 * (v * scale).abs());
            let (tight, _) = parse_quantity(&format!("{v}{p}{u}")).unwrap();
            prop_assert_eq!(tight, got);
        }
    }
}
