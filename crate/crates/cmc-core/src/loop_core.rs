//! Cycle-by-cycle simulation of extremum current-mode loops.
//!
//! All four topologies share one sensing-phase model. During the sensing
//! phase the inductor current moves linearly from its start value and the
//! comparator watches `current + w(t)`. Valley loops are handled by flipping
//! the sign of current, command and interference, so every search below
//! looks for an upward crossing of a rising ramp.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conditioning::{
    self, Conditioning, ConditioningError, ConvolutionMethod, OverdriveParams, SensingRamp,
};
use crate::interference::InterferenceSignal;
use crate::math;

/// Base number of pre-scan points across the sensing window.
pub const SCAN_POINTS: usize = 4096;
/// Base number of pre-scan points for the filtered detector.
pub const FILTER_SCAN_POINTS: usize = 512;
/// Relative (to the window) resolution of the bisection refinement.
pub const CROSSING_TOL: f64 = 1e-10;
/// Relative (to `i_max`) tolerance used for steady-state detection.
pub const STEADY_TOL: f64 = 1e-9;
/// Consecutive settled cycles needed to declare convergence.
pub const STEADY_RUN: usize = 8;
/// Longest limit-cycle period searched for.
pub const MAX_LIMIT_PERIOD: usize = 32;
/// A step in a static map counts as a jump when it exceeds this many times
/// the command step.
pub const JUMP_FACTOR: f64 = 4.0;
/// Smallest limit-cycle spread, as a multiple of the steady tolerance.
pub const LIMIT_SPREAD_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LoopError {
    #[error("comparator never triggers within the sensing window")]
    NoCrossing,
    #[error("inductor current exceeded i_max")]
    Divergent,
    #[error("loop configuration is inconsistent: {0}")]
    InvalidConfig(&'static str),
    #[error("static map has fewer than two reached samples")]
    InsufficientData,
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Topology {
    ConstOffTimePeak,
    ConstOnTimeValley,
    FixedFreqPeak,
    FixedFreqValley,
}

impl Topology {
    pub const ALL: [Topology; 4] = [
        Topology::ConstOffTimePeak,
        Topology::ConstOnTimeValley,
        Topology::FixedFreqPeak,
        Topology::FixedFreqValley,
    ];

    pub fn is_peak(self) -> bool {
        matches!(self, Topology::ConstOffTimePeak | Topology::FixedFreqPeak)
    }

    pub fn is_fixed_frequency(self) -> bool {
        matches!(self, Topology::FixedFreqPeak | Topology::FixedFreqValley)
    }

    pub fn name(self) -> &'static str {
        match self {
            Topology::ConstOffTimePeak => "const-off-time-peak",
            Topology::ConstOnTimeValley => "const-on-time-valley",
            Topology::FixedFreqPeak => "fixed-freq-peak",
            Topology::FixedFreqValley => "fixed-freq-valley",
        }
    }
}

impl core::str::FromStr for Topology {
    type Err = LoopError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topology::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or(LoopError::InvalidConfig("unknown topology"))
    }
}

/// Plant and timing of one current loop.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoopConfig {
    pub topology: Topology,
    pub m1: f64,
    pub m2: f64,
    pub t_off: Option<f64>,
    pub t_on: Option<f64>,
    pub t_period: Option<f64>,
    /// Minimum duration of the sensing phase (minimum on time for peak loops).
    pub t_on_min: f64,
    pub i_max: f64,
}

impl LoopConfig {
    pub fn const_off_time_peak(m1: f64, m2: f64, t_off: f64, i_max: f64) -> Self {
        Self {
            topology: Topology::ConstOffTimePeak,
            m1,
            m2,
            t_off: Some(t_off),
            t_on: None,
            t_period: None,
            t_on_min: 0.0,
            i_max,
        }
    }

    pub fn const_on_time_valley(m1: f64, m2: f64, t_on: f64, i_max: f64) -> Self {
        Self {
            topology: Topology::ConstOnTimeValley,
            t_off: None,
            t_on: Some(t_on),
            ..Self::const_off_time_peak(m1, m2, 0.0, i_max)
        }
    }

    pub fn fixed_freq_peak(m1: f64, m2: f64, t_period: f64, i_max: f64) -> Self {
        Self {
            topology: Topology::FixedFreqPeak,
            t_off: None,
            t_period: Some(t_period),
            ..Self::const_off_time_peak(m1, m2, 0.0, i_max)
        }
    }

    pub fn fixed_freq_valley(m1: f64, m2: f64, t_period: f64, i_max: f64) -> Self {
        Self {
            topology: Topology::FixedFreqValley,
            ..Self::fixed_freq_peak(m1, m2, t_period, i_max)
        }
    }

    pub fn with_t_on_min(mut self, t_on_min: f64) -> Self {
        self.t_on_min = t_on_min;
        self
    }

    pub fn validate(&self) -> Result<(), LoopError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.m1) || !pos(self.m2) {
            return Err(LoopError::InvalidConfig("slopes must be positive"));
        }
        if !pos(self.i_max) {
            return Err(LoopError::InvalidConfig("i_max must be positive"));
        }
        if !(self.t_on_min.is_finite() && self.t_on_min >= 0.0) {
            return Err(LoopError::InvalidConfig("t_on_min must be non-negative"));
        }
        let (a, b, c) = (self.t_off, self.t_on, self.t_period);
        let timing_ok = match self.topology {
            Topology::ConstOffTimePeak => a.is_some_and(pos) && b.is_none() && c.is_none(),
            Topology::ConstOnTimeValley => b.is_some_and(pos) && a.is_none() && c.is_none(),
            _ => c.is_some_and(pos) && a.is_none() && b.is_none(),
        };
        if !timing_ok {
            return Err(LoopError::InvalidConfig("timing field does not match topology"));
        }
        Ok(())
    }

    /// `+1` for peak loops, `-1` for valley loops.
    #[inline]
    fn sign(&self) -> f64 {
        if self.topology.is_peak() {
            1.0
        } else {
            -1.0
        }
    }

    /// Slope of the current during the sensing phase (magnitude).
    #[inline]
    pub fn sensing_slope(&self) -> f64 {
        if self.topology.is_peak() {
            self.m1
        } else {
            self.m2
        }
    }

    /// Slope of the current during the fixed (dead) phase (magnitude).
    #[inline]
    pub fn dead_slope(&self) -> f64 {
        if self.topology.is_peak() {
            self.m2
        } else {
            self.m1
        }
    }

    /// Duration of the fixed phase that follows an event at `t_event`.
    #[inline]
    pub fn dead_time(&self, t_event: f64) -> f64 {
        match self.topology {
            Topology::ConstOffTimePeak => self.t_off.unwrap_or(0.0),
            Topology::ConstOnTimeValley => self.t_on.unwrap_or(0.0),
            _ => self.t_period.unwrap_or(0.0) - t_event,
        }
    }

    /// Sensing-phase duration at the interference-free steady state.
    pub fn steady_event_time(&self) -> f64 {
        match self.topology {
            Topology::ConstOffTimePeak => self.m2 * self.t_off.unwrap_or(0.0) / self.m1,
            Topology::ConstOnTimeValley => self.m1 * self.t_on.unwrap_or(0.0) / self.m2,
            Topology::FixedFreqPeak => self.m2 * self.t_period.unwrap_or(0.0) / (self.m1 + self.m2),
            Topology::FixedFreqValley => self.m1 * self.t_period.unwrap_or(0.0) / (self.m1 + self.m2),
        }
    }

    /// Steady on time (the normalization base for every topology).
    pub fn steady_on_time(&self) -> f64 {
        match self.topology {
            Topology::ConstOnTimeValley => self.t_on.unwrap_or(0.0),
            Topology::FixedFreqValley => self.t_period.unwrap_or(0.0) - self.steady_event_time(),
            _ => self.steady_event_time(),
        }
    }

    /// Start-of-cycle current that an interference-free loop settles to for
    /// command `i_c`.
    pub fn nominal_start(&self, i_c: f64) -> f64 {
        i_c - self.sign() * self.sensing_slope() * self.steady_event_time()
    }

    /// Physical duration of a cycle whose sensing phase lasted `t_event`.
    #[inline]
    pub fn cycle_duration(&self, t_event: f64) -> f64 {
        match self.topology {
            Topology::ConstOffTimePeak | Topology::ConstOnTimeValley => t_event + self.dead_time(t_event),
            _ => self.t_period.unwrap_or(0.0),
        }
    }
}

/// State after a completed switching cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoopState {
    pub cycle: usize,
    /// Peak (peak loops) or valley (valley loops) current of this cycle.
    pub i_extremum: f64,
    /// Duration of the sensing phase.
    pub t_event: f64,
    /// Physical time at the end of the cycle.
    pub wall_time: f64,
    /// Opposite extremum, where the next sensing phase starts.
    pub i_next_start: f64,
    /// Low-pass filter state carried into the next sensing phase.
    pub filter_y: f64,
}

impl LoopState {
    /// State before the first cycle.
    pub fn initial(i_start: f64) -> Self {
        Self { cycle: 0, i_extremum: i_start, t_event: 0.0, wall_time: 0.0, i_next_start: i_start, filter_y: 0.0 }
    }

    pub fn with_filter_state(mut self, y: f64) -> Self {
        self.filter_y = y;
        self
    }
}

/// How the interference time axis relates to the switching cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PhaseMode {
    /// `w` restarts at the beginning of every sensing phase.
    Synchronous,
    /// `w` runs in absolute time.
    #[default]
    FreeRunning,
}

/// Trigger model used by [`first_crossing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorModel {
    Ideal,
    Filtered { tau: f64, y0: f64, method: ConvolutionMethod },
    OverdriveDelay(OverdriveParams),
}

/// Outcome of one sensing phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t_event: f64,
    /// Filter output at the event (filtered detector only, else the command).
    pub detector_value: f64,
}

/// Pre-scan pitch: `window/base` halved until it resolves `omega`.
pub fn scan_pitch(window: f64, base: usize, omega: f64) -> f64 {
    let mut h = window / base as f64;
    if omega > 0.0 {
        let limit = math::PI / (4.0 * omega);
        let mut guard = 0;
        while h > limit && guard < 24 {
            h *= 0.5;
            guard += 1;
        }
    }
    h
}

/// First time in `[t_min, window]` at which the detector fires.
///
/// The sensed signal is `ramp.offset + ramp.slope·t + w(w_t0 + t)`. Only the
/// first event counts (first-event triggering with latching). If the
/// condition already holds at `t_min` the event is `t_min`.
pub fn first_crossing(
    ramp: &SensingRamp,
    w: &InterferenceSignal,
    w_t0: f64,
    detector: &DetectorModel,
    t_min: f64,
    window: f64,
) -> Result<Crossing, LoopError> {
    if !(window > 0.0) || t_min > window {
        return Err(LoopError::NoCrossing);
    }
    match detector {
        DetectorModel::Ideal => ideal_crossing(ramp, w, w_t0, w.amplitude_bound(), t_min, window)
            .map(|t| Crossing { t_event: t, detector_value: ramp.command - ramp.command_slope * t })
            .ok_or(LoopError::NoCrossing),
        DetectorModel::Filtered { tau, y0, method } => {
            filtered_crossing(ramp, w, w_t0, *tau, *y0, *method, t_min, window).ok_or(LoopError::NoCrossing)
        }
        DetectorModel::OverdriveDelay(p) => {
            let ev = conditioning::overdrive_trigger(ramp, w, w_t0, w.amplitude_bound(), p, t_min, window)?;
            Ok(Crossing { t_event: ev.t_event, detector_value: ramp.command })
        }
    }
}

fn ideal_crossing(
    ramp: &SensingRamp,
    w: &InterferenceSignal,
    w_t0: f64,
    a_ub: f64,
    t_min: f64,
    window: f64,
) -> Option<f64> {
    let g = |t: f64| ramp.ideal_error(t) + w.eval(w_t0 + t);
    if g(t_min) >= 0.0 {
        return Some(t_min);
    }
    let h = scan_pitch(window, SCAN_POINTS, w.resolution_omega());
    let tol = CROSSING_TOL * window;
    // Nothing can fire before the upper envelope reaches the command.
    let t_b = ramp.envelope_crossing(a_ub);
    let mut k = math::floor(t_min / h) as u64 + 1;
    if t_b > t_min {
        k = k.max(math::floor(t_b / h) as u64);
    }
    let mut prev = t_min.max((k.saturating_sub(1)) as f64 * h);
    if prev >= t_b.max(t_min) && g(prev) >= 0.0 {
        prev = t_min;
    }
    loop {
        let mut t = k as f64 * h;
        let last = t >= window;
        if last {
            t = window;
        }
        if g(t) >= 0.0 {
            return Some(conditioning::bisect_sign(&g, prev, t, tol));
        }
        if last {
            return None;
        }
        prev = t;
        k += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn filtered_crossing(
    ramp: &SensingRamp,
    w: &InterferenceSignal,
    w_t0: f64,
    tau: f64,
    y0: f64,
    method: ConvolutionMethod,
    t_min: f64,
    window: f64,
) -> Option<Crossing> {
    let det = |t: f64| {
        let rise = math::one_minus_exp_neg(t / tau);
        y0 * math::exp(-t / tau) + ramp.offset * rise + ramp.slope * (t - tau * rise)
    };
    let command = |t: f64| ramp.command - ramp.command_slope * t;
    let conv_from = |t0: f64, c0: f64, t1: f64| match method {
        ConvolutionMethod::ClosedForm => c0 * math::exp(-(t1 - t0) / tau) + w.lowpass_increment(w_t0 + t0, w_t0 + t1, tau),
        ConvolutionMethod::AdaptiveSimpson => conditioning::lowpass_quadrature(w, w_t0, tau, t1),
    };
    let mut t_prev = t_min;
    let mut c_prev = conv_from(0.0, 0.0, t_min);
    let g_min = det(t_min) + c_prev - command(t_min);
    if g_min >= 0.0 {
        return Some(Crossing { t_event: t_min, detector_value: det(t_min) + c_prev });
    }
    let h = scan_pitch(window, FILTER_SCAN_POINTS, w.resolution_omega());
    let tol = CROSSING_TOL * window;
    let mut k = math::floor(t_min / h) as u64 + 1;
    loop {
        let mut t = k as f64 * h;
        let last = t >= window;
        if last {
            t = window;
        }
        let c = conv_from(t_prev, c_prev, t);
        if det(t) + c - command(t) >= 0.0 {
            let g = |s: f64| det(s) + conv_from(t_prev, c_prev, s) - command(s);
            let te = conditioning::bisect_sign(&g, t_prev, t, tol);
            return Some(Crossing { t_event: te, detector_value: det(te) + conv_from(t_prev, c_prev, te) });
        }
        if last {
            return None;
        }
        t_prev = t;
        c_prev = c;
        k += 1;
    }
}

/// Sign-flipped interference seen by the sensing-phase model.
pub(crate) fn oriented_signal(cfg: &LoopConfig, w: &InterferenceSignal) -> InterferenceSignal {
    if cfg.topology.is_peak() {
        w.clone()
    } else {
        w.negated()
    }
}

/// Steady filter state at the start of a sensing phase for command `i_c`.
pub fn steady_filter_state(cfg: &LoopConfig, cond: &Conditioning, i_c: f64) -> f64 {
    match cond {
        Conditioning::Filter { tau } => {
            let t_ev = cfg.steady_event_time();
            i_c * math::exp(-cfg.dead_time(t_ev) / tau)
        }
        _ => 0.0,
    }
}

/// One switching cycle with an already oriented interference signal.
pub(crate) fn advance(
    cfg: &LoopConfig,
    state: &LoopState,
    i_c: f64,
    cond: &Conditioning,
    w_oriented: &InterferenceSignal,
    w_origin: f64,
) -> Result<LoopState, LoopError> {
    let sign = cfg.sign();
    let slope = cfg.sensing_slope();
    let offset = sign * state.i_next_start;
    let command = sign * i_c;
    // Only the ideal detector needs the ramp to start below the command;
    // the filter and the integrator carry state of their own.
    let stateless = matches!(cond, Conditioning::None | Conditioning::SlopeComp { .. });
    if stateless && offset >= command {
        return Err(LoopError::NoCrossing);
    }
    let mut window = (cfg.i_max - offset) / slope;
    let mut capped_by_period = false;
    if let Some(t) = cfg.t_period {
        if cfg.topology.is_fixed_frequency() && t < window {
            window = t;
            capped_by_period = true;
        }
    }
    if !(window > 0.0) {
        return Err(LoopError::Divergent);
    }
    let ramp = SensingRamp { offset, slope, command, command_slope: cond.compensation_slope() };
    let detector = match cond {
        Conditioning::None | Conditioning::SlopeComp { .. } => DetectorModel::Ideal,
        Conditioning::Filter { tau } => DetectorModel::Filtered {
            tau: *tau,
            y0: sign * state.filter_y,
            method: ConvolutionMethod::ClosedForm,
        },
        Conditioning::Overdrive(p) => DetectorModel::OverdriveDelay(*p),
    };
    let crossing = match first_crossing(&ramp, w_oriented, w_origin, &detector, cfg.t_on_min, window) {
        Ok(c) => c,
        Err(LoopError::NoCrossing) if !capped_by_period => return Err(LoopError::Divergent),
        Err(e) => return Err(e),
    };
    let t_event = crossing.t_event;
    let ext = offset + slope * t_event;
    let t_dead = cfg.dead_time(t_event);
    let next = ext - cfg.dead_slope() * t_dead;
    if ext.abs() > cfg.i_max || next.abs() > cfg.i_max {
        return Err(LoopError::Divergent);
    }
    let filter_y = match cond {
        Conditioning::Filter { tau } => sign * crossing.detector_value * math::exp(-t_dead / tau),
        _ => 0.0,
    };
    Ok(LoopState {
        cycle: state.cycle + 1,
        i_extremum: sign * ext,
        t_event,
        wall_time: state.wall_time + cfg.cycle_duration(t_event),
        i_next_start: sign * next,
        filter_y,
    })
}

/// Advances the loop by one switching cycle.
pub fn step_cycle(
    cfg: &LoopConfig,
    state: &LoopState,
    i_c: f64,
    cond: &Conditioning,
    w: &InterferenceSignal,
    mode: PhaseMode,
) -> Result<LoopState, LoopError> {
    let w_o = oriented_signal(cfg, w);
    let origin = match mode {
        PhaseMode::Synchronous => 0.0,
        PhaseMode::FreeRunning => state.wall_time,
    };
    advance(cfg, state, i_c, cond, &w_o, origin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    /// Settled; the count is the 1-based cycle (after the last command
    /// change) from which the state stays put.
    Converged(usize),
    LimitCycle(usize),
    Divergent,
    NoCrossing,
    Unresolved,
}

impl Verdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, Verdict::Converged(_) | Verdict::LimitCycle(1))
    }
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Verdict::Converged(n) => write!(f, "Converged({n})"),
            Verdict::LimitCycle(k) => write!(f, "LimitCycle({k})"),
            Verdict::Divergent => f.write_str("Divergent"),
            Verdict::NoCrossing => f.write_str("NoCrossing"),
            Verdict::Unresolved => f.write_str("Unresolved"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trace {
    pub states: Vec<LoopState>,
    pub verdict: Verdict,
    /// Interference time at the start of the first cycle (free-running).
    pub time_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub mode: PhaseMode,
    /// Starting state; defaults to the interference-free steady state of the
    /// first command.
    pub initial: Option<LoopState>,
    /// Seeds the interference time offset in free-running mode.
    pub seed: u64,
    /// Stop as soon as the verdict is settled and the remaining commands are
    /// constant.
    pub early_exit: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { mode: PhaseMode::FreeRunning, initial: None, seed: 0, early_exit: true }
    }
}

#[inline]
fn states_close(a: &LoopState, b: &LoopState, tol: f64) -> bool {
    (a.i_extremum - b.i_extremum).abs() < tol && (a.i_next_start - b.i_next_start).abs() < tol
}

/// Smallest period `k ≤ 32` whose last `4k` states repeat within `tol` and
/// whose members spread well beyond `tol`.
pub fn detect_limit_cycle(values: &[(f64, f64)], tol: f64) -> Option<usize> {
    for k in 2..=MAX_LIMIT_PERIOD {
        let need = 4 * k;
        if values.len() < need {
            break;
        }
        let tail = &values[values.len() - need..];
        let periodic = (k..need).all(|j| {
            (tail[j].0 - tail[j - k].0).abs() < tol && (tail[j].1 - tail[j - k].1).abs() < tol
        });
        if !periodic {
            continue;
        }
        // A decaying oscillation with a pole near -1 repeats within `tol`
        // long before it settles, so demand a macroscopic spread.
        let floor = LIMIT_SPREAD_FACTOR * tol;
        let spread = (1..k).any(|j| {
            (tail[need - 1 - j].0 - tail[need - 1].0).abs() > floor
                || (tail[need - 1 - j].1 - tail[need - 1].1).abs() > floor
        });
        if spread {
            return Some(k);
        }
    }
    None
}

/// Limit-cycle period of a state tail. With free-running periodic
/// interference the interference phase at the cycle boundaries must repeat
/// too, so a forced response that only happens to look periodic does not
/// count.
fn periodic_orbit(states: &[LoopState], tol: f64, forcing_period: Option<f64>) -> Option<usize> {
    let tail: Vec<(f64, f64)> = states.iter().map(|s| (s.i_extremum, s.i_next_start)).collect();
    let k = detect_limit_cycle(&tail, tol)?;
    let Some(p) = forcing_period else {
        return Some(k);
    };
    let n = states.len();
    let phase_tol = 1e-9 * p;
    let same_phase = (n - 3 * k..n).all(|j| {
        let d = (states[j].wall_time - states[j - k].wall_time) / p;
        (d - math::floor(d + 0.5)).abs() * p < phase_tol
    });
    same_phase.then_some(k)
}

/// Runs `n_cycles` cycles. Commands beyond the end of `commands` repeat the
/// last entry.
pub fn simulate(
    cfg: &LoopConfig,
    commands: &[f64],
    cond: &Conditioning,
    w: &InterferenceSignal,
    n_cycles: usize,
    opts: &SimOptions,
) -> Result<Trace, LoopError> {
    cfg.validate()?;
    cond.validate()?;
    if commands.is_empty() || n_cycles == 0 {
        return Err(LoopError::InvalidConfig("need at least one command and one cycle"));
    }
    let time_offset = match (opts.mode, w.fundamental_period()) {
        (PhaseMode::FreeRunning, Some(p)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.gen::<f64>() * p
        }
        _ => 0.0,
    };
    let w_o = oriented_signal(cfg, &w.shifted(time_offset));
    let forcing_period = match opts.mode {
        PhaseMode::FreeRunning => w.fundamental_period(),
        PhaseMode::Synchronous => None,
    };
    let mut state = opts.initial.unwrap_or_else(|| {
        LoopState::initial(cfg.nominal_start(commands[0])).with_filter_state(steady_filter_state(cfg, cond, commands[0]))
    });
    let tol = STEADY_TOL * cfg.i_max;
    let last_change = commands
        .windows(2)
        .rposition(|p| p[0] != p[1])
        .map_or(0, |i| i + 1);
    let mut states: Vec<LoopState> = Vec::with_capacity(n_cycles.min(4096));
    let mut run = 0usize;
    let mut run_start = 0usize;
    let mut verdict = Verdict::Unresolved;
    for n in 0..n_cycles {
        let i_c = commands[n.min(commands.len() - 1)];
        let origin = match opts.mode {
            PhaseMode::Synchronous => 0.0,
            PhaseMode::FreeRunning => state.wall_time,
        };
        let next = match advance(cfg, &state, i_c, cond, &w_o, origin) {
            Ok(s) => s,
            Err(LoopError::Divergent) => {
                verdict = Verdict::Divergent;
                break;
            }
            Err(LoopError::NoCrossing) => {
                verdict = Verdict::NoCrossing;
                break;
            }
            Err(e) => return Err(e),
        };
        if n > last_change {
            if states_close(&next, &state, tol) {
                if run == 0 {
                    run_start = n - 1;
                }
                run += 1;
            } else {
                run = 0;
            }
        }
        states.push(next);
        state = next;
        let settled = n >= last_change;
        if run >= STEADY_RUN && verdict == Verdict::Unresolved {
            verdict = Verdict::Converged(run_start - last_change + 1);
            if opts.early_exit {
                break;
            }
        }
        if run < STEADY_RUN {
            verdict = Verdict::Unresolved;
        }
        if opts.early_exit && settled && run == 0 && (n + 1 - last_change) % 64 == 0 {
            if let Some(k) = periodic_orbit(&states[last_change..], tol, forcing_period) {
                verdict = Verdict::LimitCycle(k);
                break;
            }
        }
    }
    if verdict == Verdict::Unresolved {
        if let Some(k) = periodic_orbit(&states[last_change.min(states.len())..], tol, forcing_period) {
            verdict = Verdict::LimitCycle(k);
        }
    }
    Ok(Trace { states, verdict, time_offset })
}

// ---------------------------------------------------------------------------
// Static map
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MapOutcome {
    Reached(f64),
    LimitCycle { period: usize, values: Vec<f64> },
    Divergent,
    NoCrossing,
}

impl MapOutcome {
    pub fn reached(&self) -> Option<f64> {
        match self {
            MapOutcome::Reached(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StaticMap {
    pub samples: Vec<(f64, MapOutcome)>,
}

impl StaticMap {
    pub fn reached(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().filter_map(|(c, o)| o.reached().map(|p| (*c, p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticMapOptions {
    /// Current at the start of the sensing phase, held fixed for every command.
    pub i_start: f64,
    /// Bisect between samples whose extremum step exceeds twice the grid step
    /// so genuine jumps are separated from steep continuous stretches.
    pub refine: bool,
    /// Iterations used to settle the carried filter state.
    pub max_iterations: usize,
}

impl Default for StaticMapOptions {
    fn default() -> Self {
        Self { i_start: 0.0, refine: true, max_iterations: 400 }
    }
}

/// Extremum reached for command `i_c` with the interference restarted at
/// every cycle and the sensing phase always starting from `opts.i_start`.
pub fn map_point(
    cfg: &LoopConfig,
    i_c: f64,
    cond: &Conditioning,
    w_oriented: &InterferenceSignal,
    opts: &StaticMapOptions,
) -> MapOutcome {
    let mut state = LoopState::initial(opts.i_start).with_filter_state(steady_filter_state(cfg, cond, i_c));
    let one = |s: &LoopState| advance(cfg, s, i_c, cond, w_oriented, 0.0);
    let iterations = if matches!(cond, Conditioning::Filter { .. }) { opts.max_iterations.max(1) } else { 1 };
    let tol = STEADY_TOL * cfg.i_max;
    let mut values: Vec<(f64, f64)> = Vec::new();
    let mut last = f64::NAN;
    let mut run = 0;
    for _ in 0..iterations {
        match one(&state) {
            Ok(s) => {
                let p = s.i_extremum;
                if (p - last).abs() < tol {
                    run += 1;
                    if run >= STEADY_RUN {
                        return MapOutcome::Reached(p);
                    }
                } else {
                    run = 0;
                }
                last = p;
                values.push((p, s.filter_y));
                state = LoopState { i_next_start: opts.i_start, ..s };
            }
            Err(LoopError::NoCrossing) => return MapOutcome::NoCrossing,
            Err(_) => return MapOutcome::Divergent,
        }
    }
    if iterations == 1 {
        return MapOutcome::Reached(last);
    }
    if let Some(k) = detect_limit_cycle(&values, tol) {
        let vals = values[values.len() - k..].iter().map(|v| v.0).collect();
        return MapOutcome::LimitCycle { period: k, values: vals };
    }
    MapOutcome::Reached(last)
}

pub fn static_map(cfg: &LoopConfig, grid: &[f64], cond: &Conditioning, w: &InterferenceSignal) -> StaticMap {
    static_map_with(cfg, grid, cond, w, &StaticMapOptions::default())
}

pub fn static_map_with(
    cfg: &LoopConfig,
    grid: &[f64],
    cond: &Conditioning,
    w: &InterferenceSignal,
    opts: &StaticMapOptions,
) -> StaticMap {
    let w_o = oriented_signal(cfg, w);
    let mut samples: Vec<(f64, MapOutcome)> =
        grid.iter().map(|&c| (c, map_point(cfg, c, cond, &w_o, opts))).collect();
    if opts.refine && grid.len() >= 2 {
        let step = (grid[grid.len() - 1] - grid[0]).abs() / (grid.len() - 1) as f64;
        let min_dc = 1e-9 * cfg.i_max;
        let mut extra: Vec<(f64, MapOutcome)> = Vec::new();
        let mut stack: Vec<(f64, f64, f64, f64)> = Vec::new();
        for pair in samples.windows(2) {
            if let (Some(p0), Some(p1)) = (pair[0].1.reached(), pair[1].1.reached()) {
                stack.push((pair[0].0, p0, pair[1].0, p1));
            }
        }
        while let Some((c0, p0, c1, p1)) = stack.pop() {
            if (p1 - p0).abs() <= 2.0 * step || (c1 - c0) <= min_dc {
                continue;
            }
            let cm = 0.5 * (c0 + c1);
            let out = map_point(cfg, cm, cond, &w_o, opts);
            if let Some(pm) = out.reached() {
                stack.push((c0, p0, cm, pm));
                stack.push((cm, pm, c1, p1));
            }
            extra.push((cm, out));
        }
        samples.extend(extra);
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    StaticMap { samples }
}

/// Total size of the jumps in the reached extremum values.
///
/// A pair of neighbouring reached samples contributes `Δi_p − Δi_c` when
/// `Δi_p` exceeds both `JUMP_FACTOR·Δi_c` and twice the largest command step
/// in the map (the grid resolution).
pub fn discontinuity_measure(map: &StaticMap) -> Result<f64, LoopError> {
    if map.reached().count() < 2 {
        return Err(LoopError::InsufficientData);
    }
    let h_max = map
        .samples
        .windows(2)
        .map(|p| p[1].0 - p[0].0)
        .fold(0.0, f64::max);
    let mut total = 0.0;
    for pair in map.samples.windows(2) {
        if let (Some(p0), Some(p1)) = (pair[0].1.reached(), pair[1].1.reached()) {
            let dc = pair[1].0 - pair[0].0;
            let dp = p1 - p0;
            if dp > JUMP_FACTOR * dc && dp > 2.0 * h_max {
                total += dp - dc;
            }
        }
    }
    Ok(total)
}

/// Least-squares gain and offset `(g, o)` of `i_p ≈ g·i_c + o`.
pub fn fit_gain_offset(map: &StaticMap) -> Result<(f64, f64), LoopError> {
    let pts: Vec<(f64, f64)> = map.reached().collect();
    if pts.len() < 2 {
        return Err(LoopError::InsufficientData);
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - cx) * (p.0 - cx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - cx) * (p.1 - cy)).sum();
    if sxx <= 0.0 {
        return Err(LoopError::InsufficientData);
    }
    let g = sxy / sxx;
    Ok((g, cy - g * cx))
}

/// Largest fractional deviation `|i_p − fit(i_c)| / i_c` after removing the
/// fitted gain and offset.
pub fn nonlinearity_degree(map: &StaticMap) -> Result<f64, LoopError> {
    let (g, o) = fit_gain_offset(map)?;
    Ok(map
        .reached()
        .filter(|(c, _)| *c != 0.0)
        .map(|(c, p)| ((p - (g * c + o)) / c).abs())
        .fold(0.0, f64::max))
}

/// Whether `slope·t + w(t)` is strictly increasing on a dense grid over
/// `[0, window]`.
pub fn monotone_sensor_check(w: &InterferenceSignal, slope: f64, window: f64) -> bool {
    if !(window > 0.0) {
        return true;
    }
    let omega = w.resolution_omega();
    let by_freq = if omega > 0.0 { math::ceil(window * omega * 64.0 / math::TAU) as usize } else { 0 };
    let n = by_freq.clamp(16_384, 1 << 24);
    let h = window / n as f64;
    let mut prev = w.eval(0.0);
    for k in 1..=n {
        let t = k as f64 * h;
        let v = slope * t + w.eval(t);
        if v <= prev {
            return false;
        }
        prev = v;
    }
    true
}
