//! Closed-form stability verdicts, pole ranges and transient metrics, plus
//! the design inequalities for filter and comparator conditioning.

use alloc::vec::Vec;

use thiserror::Error;

use crate::conditioning::Conditioning;
use crate::interference::{InterferenceSignal, SpectralBounds};
use crate::loop_core::{LoopConfig, Topology};
use crate::math;

/// Fourier terms used when a trapezoid enters a spectral formula.
pub const TRAPEZOID_HARMONICS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("linearization denominator is not positive")]
    UnstableLinearization,
    #[error("a pole lies on or outside the unit circle")]
    NotSettling,
    #[error("denominator vanishes")]
    DegenerateDenominator,
    #[error("radicand is negative")]
    ComplexRadicand,
    #[error("invalid analysis input")]
    InvalidInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StabilityVerdict {
    GuaranteedStable,
    NotGuaranteed,
}

impl core::fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            StabilityVerdict::GuaranteedStable => "GuaranteedStable",
            StabilityVerdict::NotGuaranteed => "NotGuaranteed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoleRange {
    pub a_min: f64,
    pub a_max: f64,
    pub b: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransientReport {
    pub pole_range: PoleRange,
    pub n_w: f64,
    pub o_w: f64,
    pub stable_small_signal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizedDesign {
    pub a_hat: f64,
    pub omega_hat: f64,
    pub tau_hat: f64,
    pub t_on_min_hat: f64,
    pub m_s_hat: f64,
    pub lambda_hat: f64,
    pub i_max_hat: f64,
    pub t_min_hat: f64,
}

/// Largest interference slew tolerated by the large-signal theorems.
pub fn stability_bound(topology: Topology, m1: f64, m2: f64, cond: &Conditioning) -> f64 {
    let base = match topology {
        Topology::ConstOffTimePeak => m1 / 2.0,
        Topology::ConstOnTimeValley => m2 / 2.0,
        Topology::FixedFreqPeak => (m1 - m2) / 2.0,
        Topology::FixedFreqValley => (m2 - m1) / 2.0,
    };
    base + cond.compensation_slope()
}

/// Strict check of the topology's large-signal stability bound.
pub fn large_signal_verdict(
    topology: Topology,
    m1: f64,
    m2: f64,
    lambda_ub: f64,
    cond: &Conditioning,
) -> StabilityVerdict {
    if lambda_ub >= 0.0 && lambda_ub < stability_bound(topology, m1, m2, cond) {
        StabilityVerdict::GuaranteedStable
    } else {
        StabilityVerdict::NotGuaranteed
    }
}

/// Range of the closed-loop pole over all interference slopes `|w'| ≤ Λ_ub`.
pub fn pole_range(
    topology: Topology,
    m1: f64,
    m2: f64,
    lambda_ub: f64,
    cond: &Conditioning,
) -> Result<PoleRange, AnalysisError> {
    if !(m1 > 0.0 && m2 > 0.0 && lambda_ub >= 0.0) {
        return Err(AnalysisError::InvalidInput);
    }
    let ms = cond.compensation_slope();
    let (m, other) = match topology {
        Topology::ConstOffTimePeak | Topology::FixedFreqPeak => (m1, m2),
        Topology::ConstOnTimeValley | Topology::FixedFreqValley => (m2, m1),
    };
    let lo_den = m + ms - lambda_ub;
    let hi_den = m + ms + lambda_ub;
    if lo_den <= 0.0 {
        return Err(AnalysisError::UnstableLinearization);
    }
    let (a_min, a_max, a0, b) = if topology.is_fixed_frequency() {
        (
            (ms - lambda_ub - other) / lo_den,
            (ms + lambda_ub - other) / hi_den,
            (ms - other) / (m + ms),
            -other / m,
        )
    } else {
        ((ms - lambda_ub) / lo_den, (ms + lambda_ub) / hi_den, ms / (m + ms), 0.0)
    };
    Ok(PoleRange { a_min, a_max, b, beta: (1.0 - a0) / (1.0 - b) })
}

#[inline]
fn settling_of(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        (4.0 / math::ln(a.abs())).abs()
    }
}

/// Worst-case settling in cycles.
pub fn settling(pr: &PoleRange) -> Result<f64, AnalysisError> {
    if !(pr.a_min.abs() < 1.0 && pr.a_max.abs() < 1.0) {
        return Err(AnalysisError::NotSettling);
    }
    Ok(settling_of(pr.a_min).max(settling_of(pr.a_max)))
}

/// Worst-case overshoot as a fraction of the step.
pub fn overshoot(pr: &PoleRange) -> f64 {
    if pr.b == 0.0 {
        (-pr.a_min).max(0.0)
    } else {
        ((pr.b - pr.a_min) / (1.0 - pr.b)).max(0.0)
    }
}

pub fn transient_report(pr: PoleRange) -> TransientReport {
    let (n_w, stable) = match settling(&pr) {
        Ok(n) => (n, true),
        Err(_) => (f64::INFINITY, false),
    };
    TransientReport { pole_range: pr, n_w, o_w: overshoot(&pr), stable_small_signal: stable }
}

/// Compensation slope (normalized by `m1`) minimizing the worst-case
/// settling, and that settling.
pub fn optimal_slope(lambda_hat: f64) -> (f64, f64) {
    let root = math::sqrt(0.25 + lambda_hat * lambda_hat);
    let ms = root - 0.5;
    let a = 1.0 - 1.0 / (0.5 + root + lambda_hat);
    (ms, settling_of(a))
}

// ---------------------------------------------------------------------------
// Low-pass filter conditioning
// ---------------------------------------------------------------------------

/// How the interference term in the filter theorems is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyConvention {
    /// `√(1 + (2π·ω̂·τ̂)²)`, the printed form (equal to `√(1 + (ω_l τ)²)`).
    #[default]
    AsPrinted,
    /// `√(1 + (ω̂·τ̂)²)`.
    WithoutTwoPi,
}

fn filter_attenuation(n: &NormalizedDesign, conv: FrequencyConvention) -> f64 {
    let x = match conv {
        FrequencyConvention::AsPrinted => math::TAU * n.omega_hat * n.tau_hat,
        FrequencyConvention::WithoutTwoPi => n.omega_hat * n.tau_hat,
    };
    1.0 / math::hypot(1.0, x)
}

/// Left-hand side of the filter continuity inequality.
pub fn filter_continuity_lhs(n: &NormalizedDesign, conv: FrequencyConvention) -> f64 {
    let tau = n.tau_hat;
    let d = math::exp(-n.t_on_min_hat / tau);
    let b = math::exp(-n.t_min_hat / tau);
    let att = filter_attenuation(n, conv);
    n.a_hat / ((1.0 - d) * tau) * (1.0 + d * att) + b * n.i_max_hat / ((1.0 - d) * tau)
}

pub fn filter_continuity_ok(n: &NormalizedDesign) -> bool {
    filter_continuity_ok_with(n, FrequencyConvention::AsPrinted)
}

pub fn filter_continuity_ok_with(n: &NormalizedDesign, conv: FrequencyConvention) -> bool {
    n.tau_hat > 0.0 && filter_continuity_lhs(n, conv) < 1.0
}

/// Both left-hand sides of the filter stability inequalities.
pub fn filter_stability_lhs(n: &NormalizedDesign, conv: FrequencyConvention) -> (f64, f64) {
    let tau = n.tau_hat;
    let d = math::exp(-n.t_on_min_hat / tau);
    let b = math::exp(-n.t_min_hat / tau);
    let att = filter_attenuation(n, conv);
    let one_d = 1.0 - d;
    let k0 = d * (n.t_on_min_hat + tau * d - tau) / (one_d * one_d);
    let k1 = 1.0 / one_d;
    let k2 = 1.0 + (1.0 + d) * d / (one_d * one_d);
    let k3 = (d - b) / (one_d * one_d);
    let first = k0 / tau + k1 * n.a_hat / tau + k2 * n.a_hat * att / tau;
    let second = k3 * n.i_max_hat / tau + n.a_hat / tau + n.a_hat * att / tau;
    (first, second)
}

pub fn filter_stability_ok(n: &NormalizedDesign) -> bool {
    filter_stability_ok_with(n, FrequencyConvention::AsPrinted)
}

pub fn filter_stability_ok_with(n: &NormalizedDesign, conv: FrequencyConvention) -> bool {
    if !(n.tau_hat > 0.0) {
        return false;
    }
    let (a, b) = filter_stability_lhs(n, conv);
    a < 0.5 && b < 0.5
}

/// Linearized filter loop around an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterLoop {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub beta: f64,
    pub psi1: f64,
    pub psi2: f64,
}

/// Closed-loop pole, zero and feedback gains of the filtered loop.
///
/// `i_c` is the command and `i_start` the current at the start of the
/// sensing phase (valley for peak loops, peak for valley loops). The
/// interference phase is referenced to the start of the sensing phase.
pub fn filter_closed_loop(
    cfg: &LoopConfig,
    tau: f64,
    i_c: f64,
    i_start: f64,
    w: &InterferenceSignal,
) -> Result<FilterLoop, AnalysisError> {
    if !(tau > 0.0) {
        return Err(AnalysisError::InvalidInput);
    }
    let t_sense = cfg.steady_event_time();
    let period = t_sense + cfg.dead_time(t_sense);
    let d = math::exp(-t_sense / tau);
    let b = math::exp(-period / tau);
    let w_o = if cfg.topology.is_peak() { w.clone() } else { w.negated() };
    let (_, dg_end) = w_o.forced_lowpass(t_sense, tau, TRAPEZOID_HARMONICS);
    let (g0, _) = w_o.forced_lowpass(0.0, tau, TRAPEZOID_HARMONICS);
    let psi1 = dg_end + d / tau * g0;
    let psi2 = match cfg.topology {
        Topology::ConstOffTimePeak => -b / tau * i_c + d / tau * i_start,
        Topology::ConstOnTimeValley => -d / tau * i_start - b / tau * i_c,
        Topology::FixedFreqPeak | Topology::FixedFreqValley => d / tau * i_start - b / tau * i_c,
    };
    let m = cfg.sensing_slope();
    let psi_eff = (psi1 + psi2) / (1.0 - d);
    let den = m + psi_eff;
    if den == 0.0 {
        return Err(AnalysisError::DegenerateDenominator);
    }
    let a = if cfg.topology.is_fixed_frequency() {
        (psi_eff - cfg.dead_slope()) / den
    } else {
        1.0 - m / den
    };
    let beta = m / ((1.0 - d) * den);
    Ok(FilterLoop { a, b, d, beta, psi1, psi2 })
}

// ---------------------------------------------------------------------------
// Comparator overdrive conditioning
// ---------------------------------------------------------------------------

/// Stability bound `k ≥ 4A²/m1 + B` (all in the current domain).
pub fn comparator_stability_ok(a_ub: f64, b_integral: f64, m1: f64, v_trig_tau: f64) -> bool {
    v_trig_tau >= 4.0 * a_ub * a_ub / m1 + b_integral
}

/// Largest overdrive delay after the ideal crossing.
pub fn comparator_max_delay(a_ub: f64, b_integral: f64, m1: f64, v_trig_tau: f64) -> f64 {
    let r = a_ub / m1;
    r + math::sqrt(r * r + 2.0 / m1 * (v_trig_tau + b_integral))
}

/// Pole range of the linearized comparator loop.
pub fn comparator_psi_pole_range(
    a_hat: f64,
    omega_hat: f64,
    tau_hat: f64,
    m1: f64,
) -> Result<PoleRange, AnalysisError> {
    if a_hat == 0.0 {
        return Ok(PoleRange { a_min: 0.0, a_max: 0.0, b: 0.0, beta: 1.0 });
    }
    if !(a_hat > 0.0 && omega_hat > 0.0 && tau_hat >= 0.0 && m1 > 0.0) {
        return Err(AnalysisError::InvalidInput);
    }
    let radicand = 1.0 + (tau_hat - a_hat / omega_hat) / (a_hat * a_hat);
    if radicand < 0.0 {
        return Err(AnalysisError::ComplexRadicand);
    }
    let root = math::sqrt(radicand);
    if root == 1.0 {
        return Err(AnalysisError::DegenerateDenominator);
    }
    let psi_min = -2.0 * m1 / (1.0 + root);
    let psi_max = 2.0 * m1 / (root - 1.0);
    let (lo, hi) = (m1 + psi_min, m1 + psi_max);
    if lo == 0.0 || hi == 0.0 {
        return Err(AnalysisError::DegenerateDenominator);
    }
    Ok(PoleRange { a_min: psi_min / lo, a_max: psi_max / hi, b: 0.0, beta: 1.0 })
}

/// Largest saturating integral of `m1·t + w(t) − b'` accumulated between the
/// first and last crossings of level `b'`, maximized over `b'` and the
/// interference phase. Any comparator threshold at or above this value
/// keeps the static map continuous.
pub fn comparator_continuity_threshold(w: &InterferenceSignal, m1: f64) -> f64 {
    let a = w.amplitude_bound();
    let Some(period) = w.fundamental_period() else {
        return 0.0;
    };
    if a == 0.0 {
        return 0.0;
    }
    let eval = |level: f64, shift: f64| saturating_between_crossings(w, m1, level, shift, period);
    let (n_off, n_ph) = (33usize, 64usize);
    let mut best = (0.0, 0.0, 0.0);
    for i in 0..n_off {
        let level = -a + 2.0 * a * i as f64 / (n_off - 1) as f64;
        for j in 0..n_ph {
            let shift = period * j as f64 / n_ph as f64;
            let v = eval(level, shift);
            if v > best.0 {
                best = (v, level, shift);
            }
        }
    }
    if best.0 == 0.0 {
        return 0.0;
    }
    // Local refinement around the best coarse cell.
    let mut step_l = 2.0 * a / (n_off - 1) as f64;
    let mut step_s = period / n_ph as f64;
    for _ in 0..6 {
        let (_, l0, s0) = best;
        for di in -2i32..=2 {
            for dj in -2i32..=2 {
                let level = (l0 + di as f64 * step_l * 0.5).clamp(-a, a);
                let shift = s0 + dj as f64 * step_s * 0.5;
                let v = eval(level, shift);
                if v > best.0 {
                    best = (v, level, shift);
                }
            }
        }
        step_l *= 0.5;
        step_s *= 0.5;
    }
    best.0
}

fn saturating_between_crossings(
    w: &InterferenceSignal,
    m1: f64,
    level: f64,
    shift: f64,
    period: f64,
) -> f64 {
    let a = w.amplitude_bound();
    let t_lo = (level - a) / m1;
    let t_hi = (level + a) / m1;
    let span = t_hi - t_lo;
    let omega = w.resolution_omega().max(math::TAU / period);
    let n = (math::ceil(span * omega * 128.0 / math::TAU) as usize).clamp(512, 1 << 20);
    let h = span / n as f64;
    let f = |t: f64| m1 * t + w.eval(t + shift) - level;
    let vals: Vec<f64> = (0..=n).map(|k| f(t_lo + k as f64 * h)).collect();
    let first = vals.iter().position(|v| *v >= 0.0);
    let last = vals.iter().rposition(|v| *v < 0.0);
    let (Some(first), Some(last)) = (first, last) else {
        return 0.0;
    };
    if last < first {
        return 0.0;
    }
    let mut state = 0.0_f64;
    let mut best = 0.0_f64;
    for k in first.max(1)..=last + 1 {
        if k > n {
            break;
        }
        state = (state + 0.5 * h * (vals[k - 1] + vals[k])).max(0.0);
        best = best.max(state);
    }
    best
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Which steady-state interval and slope serve as normalization base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationBase {
    /// Steady on time and `m1` for every topology.
    #[default]
    OnTime,
    /// Steady sensing interval with its slope: on time and `m1` for peak
    /// loops, off time and `m2` for valley loops.
    SensingPhase,
}

/// Physical design quantities that the normalized form is built from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhysicalDesign {
    pub a_ub: f64,
    pub omega_l: f64,
    /// Filter time constant, or comparator threshold `v_trig·τ_c/r_sample`.
    pub tau: f64,
    pub t_on_min: f64,
    pub m_s: f64,
    pub lambda_ub: f64,
    pub i_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeConstantKind {
    #[default]
    Filter,
    Comparator,
}

pub fn normalize_physical(p: &PhysicalDesign, m: f64, t_b: f64, kind: TimeConstantKind) -> NormalizedDesign {
    let t_on_min_hat = p.t_on_min / t_b;
    NormalizedDesign {
        a_hat: p.a_ub / (m * t_b),
        omega_hat: p.omega_l * t_b / math::TAU,
        tau_hat: match kind {
            TimeConstantKind::Filter => p.tau / t_b,
            TimeConstantKind::Comparator => 2.0 * p.tau / (m * t_b * t_b),
        },
        t_on_min_hat,
        m_s_hat: p.m_s / m,
        lambda_hat: p.lambda_ub / m,
        i_max_hat: p.i_max / (m * t_b),
        t_min_hat: t_on_min_hat + 1.0,
    }
}

pub fn denormalize(n: &NormalizedDesign, m: f64, t_b: f64, kind: TimeConstantKind) -> PhysicalDesign {
    PhysicalDesign {
        a_ub: n.a_hat * m * t_b,
        omega_l: n.omega_hat * math::TAU / t_b,
        tau: match kind {
            TimeConstantKind::Filter => n.tau_hat * t_b,
            TimeConstantKind::Comparator => n.tau_hat * m * t_b * t_b / 2.0,
        },
        t_on_min: n.t_on_min_hat * t_b,
        m_s: n.m_s_hat * m,
        lambda_ub: n.lambda_hat * m,
        i_max: n.i_max_hat * m * t_b,
    }
}

/// Normalization slope and interval for a loop.
pub fn normalization_base(cfg: &LoopConfig, base: NormalizationBase) -> (f64, f64) {
    match base {
        NormalizationBase::OnTime => (cfg.m1, cfg.steady_on_time()),
        NormalizationBase::SensingPhase => (cfg.sensing_slope(), cfg.steady_event_time()),
    }
}

pub fn normalize(cfg: &LoopConfig, cond: &Conditioning, spec: &SpectralBounds) -> NormalizedDesign {
    normalize_with(cfg, cond, spec, NormalizationBase::OnTime)
}

pub fn normalize_with(
    cfg: &LoopConfig,
    cond: &Conditioning,
    spec: &SpectralBounds,
    base: NormalizationBase,
) -> NormalizedDesign {
    let (m, t_b) = normalization_base(cfg, base);
    let (tau, kind) = match cond {
        Conditioning::Filter { tau } => (*tau, TimeConstantKind::Filter),
        Conditioning::Overdrive(p) => (p.threshold(), TimeConstantKind::Comparator),
        _ => (0.0, TimeConstantKind::Filter),
    };
    let phys = PhysicalDesign {
        a_ub: spec.a_ub,
        omega_l: spec.omega_l,
        tau,
        t_on_min: cfg.t_on_min,
        m_s: cond.compensation_slope(),
        lambda_ub: spec.lambda_ub,
        i_max: cfg.i_max,
    };
    normalize_physical(&phys, m, t_b, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NONE: Conditioning = Conditioning::None;

    #[test]
    fn verdict_examples() {
        let v = |t, m1, m2, l, c: &Conditioning| large_signal_verdict(t, m1, m2, l, c);
        assert_eq!(v(Topology::ConstOffTimePeak, 1.0, 1.0, 0.4, &NONE), StabilityVerdict::GuaranteedStable);
        assert_eq!(v(Topology::FixedFreqPeak, 1.0, 1.2, 0.0, &NONE), StabilityVerdict::NotGuaranteed);
        assert_eq!(
            v(Topology::ConstOffTimePeak, 1.0, 1.0, 0.6, &Conditioning::SlopeComp { m_s: 0.2 }),
            StabilityVerdict::GuaranteedStable
        );
        assert_eq!(v(Topology::ConstOffTimePeak, 1.0, 1.0, 0.5, &NONE), StabilityVerdict::NotGuaranteed);
        assert_eq!(v(Topology::ConstOnTimeValley, 5.0, 1.0, 0.49, &NONE), StabilityVerdict::GuaranteedStable);
        assert_eq!(v(Topology::FixedFreqValley, 1.0, 2.0, 0.49, &NONE), StabilityVerdict::GuaranteedStable);
    }

    #[test]
    fn pole_range_examples() {
        let pr = pole_range(Topology::ConstOffTimePeak, 3.0, 1.0, 0.0, &NONE).unwrap();
        assert_eq!((pr.a_min, pr.a_max, pr.b), (0.0, 0.0, 0.0));
        let pr = pole_range(Topology::ConstOffTimePeak, 3.0, 1.0, 1.0, &NONE).unwrap();
        // Direct evaluation: 1 - 3/2 and 1 - 3/4.
        assert!((pr.a_min + 0.5).abs() < 1e-15);
        assert!((pr.a_max - 0.25).abs() < 1e-15);
        let pr = pole_range(Topology::FixedFreqPeak, 2.0, 1.5, 0.0, &NONE).unwrap();
        assert_eq!(pr.a_min, -0.75);
        assert_eq!(pr.a_max, -0.75);
        assert_eq!(pr.b, -0.75);
        let pr = pole_range(Topology::FixedFreqValley, 1.5, 2.0, 0.0, &NONE).unwrap();
        assert_eq!(pr.b, -0.75);
        assert_eq!(
            pole_range(Topology::ConstOffTimePeak, 1.0, 1.0, 1.0, &NONE),
            Err(AnalysisError::UnstableLinearization)
        );
    }

    #[test]
    fn settling_examples() {
        let pr = |a_min, a_max| PoleRange { a_min, a_max, b: 0.0, beta: 1.0 };
        assert_eq!(settling(&pr(0.0, 0.0)).unwrap(), 0.0);
        assert!((settling(&pr(0.0, (-1.0f64).exp())).unwrap() - 4.0).abs() < 1e-12);
        let expected = 4.0 / 2f64.ln();
        assert!((settling(&pr(-0.5, 0.25)).unwrap() - expected).abs() < 1e-12);
        assert_eq!(settling(&pr(-1.0, 0.2)), Err(AnalysisError::NotSettling));
    }

    #[test]
    fn overshoot_examples() {
        let pr = |a_min, b| PoleRange { a_min, a_max: 0.3, b, beta: 1.0 };
        assert_eq!(overshoot(&pr(0.1, 0.0)), 0.0);
        assert_eq!(overshoot(&pr(-0.25, 0.0)), 0.25);
        assert!((overshoot(&pr(-0.5, -0.4)) - 0.1 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn optimal_slope_examples() {
        assert_eq!(optimal_slope(0.0), (0.0, 0.0));
        let (ms, _) = optimal_slope(1.0);
        assert!((ms - (1.25f64.sqrt() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn optimal_slope_balances_poles() {
        for &l in &[0.1, 0.15, 0.5, 1.0, 2.0] {
            let (ms, nw) = optimal_slope(l);
            let pr = pole_range(Topology::ConstOffTimePeak, 1.0, 1.0, l, &Conditioning::SlopeComp { m_s: ms }).unwrap();
            assert!((pr.a_min + pr.a_max).abs() < 1e-12);
            assert!((settling(&pr).unwrap() - nw).abs() < 1e-9);
        }
    }

    #[test]
    fn comparator_examples() {
        assert!(comparator_stability_ok(0.0, 0.0, 1.0, 0.0));
        assert!(comparator_stability_ok(1.0, 0.5, 1.0, 4.5));
        assert!(!comparator_stability_ok(1.0, 0.5, 1.0, 4.5 - 1e-12));
        assert!((comparator_max_delay(0.0, 0.0, 2.0, 0.3) - 0.3f64.sqrt()).abs() < 1e-15);
        assert!((comparator_max_delay(1.0, 0.0, 1.0, 4.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn comparator_pole_range_examples() {
        let pr = comparator_psi_pole_range(0.0, 2.0, 0.6, 1.0).unwrap();
        assert_eq!((pr.a_min, pr.a_max), (0.0, 0.0));
        let pr = comparator_psi_pole_range(1e-6, 2.0, 0.6, 1.0).unwrap();
        assert!(pr.a_min.abs() < 1e-5 && pr.a_max.abs() < 1e-5);
        let pr = comparator_psi_pole_range(0.02, 2.0, 0.6, 1.0).unwrap();
        let root = (1.0 + (0.6 - 0.01) / 4e-4f64).sqrt();
        let (pmin, pmax) = (-2.0 / (1.0 + root), 2.0 / (root - 1.0));
        assert!((pr.a_min - pmin / (1.0 + pmin)).abs() < 1e-15);
        assert!((pr.a_max - pmax / (1.0 + pmax)).abs() < 1e-15);
        assert!(pr.a_min.abs() < 1.0 && pr.a_max.abs() < 1.0);
        assert_eq!(comparator_psi_pole_range(0.5, 0.5, 0.1, 1.0), Err(AnalysisError::ComplexRadicand));
    }

    #[test]
    fn continuity_threshold_monotone_sensor_is_zero() {
        assert_eq!(comparator_continuity_threshold(&InterferenceSignal::Zero, 1.0), 0.0);
        let w = InterferenceSignal::sinusoid(0.05, 10.0, 0.0);
        assert_eq!(comparator_continuity_threshold(&w, 1.0), 0.0);
        let w = InterferenceSignal::sinusoid(0.3, 10.0, 0.0);
        assert!(comparator_continuity_threshold(&w, 1.0) > 0.0);
    }

    fn norm(a_hat: f64, tau_hat: f64, i_max_hat: f64) -> NormalizedDesign {
        NormalizedDesign {
            a_hat,
            omega_hat: 2.0,
            tau_hat,
            t_on_min_hat: 0.5,
            i_max_hat,
            t_min_hat: 1.5,
            ..Default::default()
        }
    }

    #[test]
    fn filter_continuity_examples() {
        for &t in &[0.05, 0.3, 1.0, 5.0] {
            assert!(filter_continuity_ok(&norm(0.0, t, 0.0)));
        }
        assert!(!filter_continuity_ok(&norm(0.1, 1e-3, 4.0)));
    }

    #[test]
    fn filter_stability_examples() {
        assert!(filter_stability_ok(&norm(0.0, 50.0, 0.0)));
        for k in 1..200 {
            assert!(!filter_stability_ok(&norm(1.0, k as f64 * 0.05, 4.0)));
        }
    }

    #[test]
    fn normalize_round_trip() {
        let p = PhysicalDesign {
            a_ub: 0.4,
            omega_l: 3.1e7,
            tau: 2.5e-8,
            t_on_min: 5e-8,
            m_s: 1e7,
            lambda_ub: 4e6,
            i_max: 20.0,
        };
        for kind in [TimeConstantKind::Filter, TimeConstantKind::Comparator] {
            let n = normalize_physical(&p, 4.1e7, 1e-7, kind);
            let q = denormalize(&n, 4.1e7, 1e-7, kind);
            for (x, y) in [(p.a_ub, q.a_ub), (p.omega_l, q.omega_l), (p.tau, q.tau), (p.t_on_min, q.t_on_min), (p.m_s, q.m_s), (p.lambda_ub, q.lambda_ub), (p.i_max, q.i_max)] {
                assert!(((x - y) / x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn filter_loop_without_interference() {
        let cfg = LoopConfig::const_off_time_peak(1.0, 1.0, 1.0, 10.0);
        let fl = filter_closed_loop(&cfg, 0.3, 0.0, 0.0, &InterferenceSignal::Zero).unwrap();
        assert_eq!(fl.psi1, 0.0);
        assert_eq!(fl.psi2, 0.0);
        assert!(fl.a.abs() < 1e-15);
        let cot = LoopConfig::const_on_time_valley(1.0, 1.0, 1.0, 10.0);
        let fl = filter_closed_loop(&cot, 0.3, 1.0, 2.0, &InterferenceSignal::Zero).unwrap();
        assert!(fl.psi2 < 0.0);
    }

    proptest! {
        #[test]
        fn filter_checks_monotone_in_amplitude(a in 0.0f64..0.2, da in 0.0f64..0.2, tau in 0.01f64..3.0, imax in 0.0f64..5.0) {
            let lo = norm(a, tau, imax);
            let hi = norm(a + da, tau, imax);
            prop_assert!(!(filter_continuity_ok(&hi) && !filter_continuity_ok(&lo)));
            prop_assert!(!(filter_stability_ok(&hi) && !filter_stability_ok(&lo)));
        }

        #[test]
        fn pole_range_ordered(l in 0.0f64..0.99, ms in 0.0f64..2.0, m2 in 0.1f64..3.0) {
            for t in Topology::ALL {
                if let Ok(pr) = pole_range(t, 1.0, m2, l, &Conditioning::SlopeComp { m_s: ms }) {
                    prop_assert!(pr.a_min <= pr.a_max);
                }
            }
        }
    }
}
