//! Control-conditioning detector models: slope compensation, first-order
//! low-pass filtering of the sensed current, and the comparator overdrive
//! delay modeled as a saturating integrator.

use alloc::vec::Vec;

use thiserror::Error;

use crate::interference::InterferenceSignal;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ConditioningError {
    #[error("detector never triggers within the sensing window")]
    NoCrossing,
    #[error("least-squares fit is singular (all overdrive values equal)")]
    SingularFit,
    #[error("fit needs at least two points with positive overdrive")]
    InvalidData,
    #[error("invalid conditioning parameter")]
    InvalidParameter,
}

/// Comparator overdrive model parameters.
///
/// The integrator accumulates `∫(i_sensed − i_c) dt` in the current domain,
/// so the trigger threshold `v_trig·tau_c` is divided by `r_sample`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverdriveParams {
    pub tau_c: f64,
    pub v_trig: f64,
    pub t_d_const: f64,
    pub r_sample: f64,
    /// End of the blanking interval; the integrator is held in reset before it.
    pub t_blank: f64,
}

impl OverdriveParams {
    /// Builds parameters directly from the current-domain threshold `k` [A·s]
    /// with unit sense resistance and no constant delay.
    pub fn from_threshold(k: f64) -> Self {
        Self { tau_c: 1.0, v_trig: k, t_d_const: 0.0, r_sample: 1.0, t_blank: 0.0 }
    }

    /// Integrator area needed to trigger, in A·s.
    #[inline]
    pub fn threshold(&self) -> f64 {
        self.v_trig * self.tau_c / self.r_sample
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Conditioning {
    #[default]
    None,
    SlopeComp {
        m_s: f64,
    },
    Filter {
        tau: f64,
    },
    Overdrive(OverdriveParams),
}

impl Conditioning {
    pub fn validate(&self) -> Result<(), ConditioningError> {
        let ok = match self {
            Self::None => true,
            Self::SlopeComp { m_s } => m_s.is_finite() && *m_s >= 0.0,
            Self::Filter { tau } => tau.is_finite() && *tau > 0.0,
            Self::Overdrive(p) => {
                p.tau_c.is_finite()
                    && p.tau_c > 0.0
                    && p.v_trig.is_finite()
                    && p.v_trig >= 0.0
                    && p.r_sample > 0.0
                    && p.t_d_const >= 0.0
                    && p.t_blank >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ConditioningError::InvalidParameter)
        }
    }

    /// Slope of the compensating command ramp, zero for other methods.
    pub fn compensation_slope(&self) -> f64 {
        match self {
            Self::SlopeComp { m_s } => *m_s,
            _ => 0.0,
        }
    }
}

/// Compensated command `i_c − m_s·t`.
#[inline]
pub fn slope_command(i_c: f64, m_s: f64, t: f64) -> f64 {
    i_c - m_s * t
}

/// Sensing-phase geometry: the sensed signal is
/// `offset + slope·t + w(w_t0 + t)` against the command `command − command_slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingRamp {
    pub offset: f64,
    pub slope: f64,
    pub command: f64,
    pub command_slope: f64,
}

impl SensingRamp {
    /// Error between sensed signal and command, without interference.
    #[inline]
    pub fn ideal_error(&self, t: f64) -> f64 {
        self.offset + (self.slope + self.command_slope) * t - self.command
    }

    /// Time at which `ideal ramp + level` meets the command.
    #[inline]
    pub fn envelope_crossing(&self, level: f64) -> f64 {
        (self.command - self.offset - level) / (self.slope + self.command_slope)
    }
}

/// Region boundaries of the comparator model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionBoundaries {
    pub t_a: f64,
    pub t_b: f64,
    pub t_d: f64,
}

impl RegionBoundaries {
    /// Boundaries from the `±a_ub` envelopes of the ideal ramp.
    pub fn from_envelope(ramp: &SensingRamp, a_ub: f64, t_a: f64) -> Self {
        let t_b = ramp.envelope_crossing(a_ub).max(t_a);
        let t_d = ramp.envelope_crossing(-a_ub).max(t_b);
        Self { t_a, t_b, t_d }
    }
}

/// How the interference convolution inside the filter is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// Exact piecewise closed form.
    #[default]
    ClosedForm,
    /// Adaptive Simpson quadrature with absolute tolerance `1e-12·A_ub`.
    AdaptiveSimpson,
}

/// Output of the first-order low-pass filter `t` seconds into a segment
/// whose input is `offset + slope·t + w(w_t0 + t)`, starting from state `y0`.
pub fn filter_output(
    y0: f64,
    offset: f64,
    slope: f64,
    w: &InterferenceSignal,
    w_t0: f64,
    tau: f64,
    t: f64,
    method: ConvolutionMethod,
) -> f64 {
    let decay = math::exp(-t / tau);
    let rise = math::one_minus_exp_neg(t / tau);
    let conv = match method {
        ConvolutionMethod::ClosedForm => w.lowpass_increment(w_t0, w_t0 + t, tau),
        ConvolutionMethod::AdaptiveSimpson => lowpass_quadrature(w, w_t0, tau, t),
    };
    y0 * decay + offset * rise + slope * (t - tau * rise) + conv
}

/// `∫₀ᵗ w(w_t0+s) e^{-(t-s)/τ}/τ ds` by adaptive Simpson quadrature.
pub fn lowpass_quadrature(w: &InterferenceSignal, w_t0: f64, tau: f64, t: f64) -> f64 {
    if t <= 0.0 || w.is_zero() {
        return 0.0;
    }
    let tol = 1e-12 * w.amplitude_bound();
    let f = |s: f64| w.eval(w_t0 + s) * math::exp(-(t - s) / tau) / tau;
    // Split into pieces no longer than a quarter of the fastest period so the
    // initial Simpson estimates are not fooled by aliasing.
    let omega = w.resolution_omega().max(1.0 / tau);
    let pieces = math::ceil(t * omega / (math::PI / 2.0)).max(1.0) as usize;
    let h = t / pieces as f64;
    (0..pieces)
        .map(|k| {
            let a = k as f64 * h;
            adaptive_simpson(&f, a, a + h, tol / pieces as f64, 40)
        })
        .sum()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Result of the saturating-integrator detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverdriveEvent {
    /// Switching instant, including the constant delay and the minimum time.
    pub t_event: f64,
    /// Instant the integrator reached the threshold.
    pub t_trigger: f64,
    /// Last instant the integrator left zero before triggering.
    pub t_fi: f64,
}

/// Saturating-integrator comparator.
///
/// Integrates `sensed − command` from `max(t_blank, t_b)` with the state
/// clamped at zero, and triggers when the state reaches the threshold.
/// Before `t_b` the upper envelope is still below the command, so the
/// clamped state is identically zero there.
pub fn overdrive_trigger(
    ramp: &SensingRamp,
    w: &InterferenceSignal,
    w_t0: f64,
    a_ub: f64,
    params: &OverdriveParams,
    t_min: f64,
    window: f64,
) -> Result<OverdriveEvent, ConditioningError> {
    let k = params.threshold();
    let regions = RegionBoundaries::from_envelope(ramp, a_ub, params.t_blank.max(0.0));
    let start = regions.t_b.max(0.0);
    let stop = window - params.t_d_const;
    if start >= stop {
        return Err(ConditioningError::NoCrossing);
    }
    let g = |t: f64| ramp.ideal_error(t) + w.eval(w_t0 + t);
    let pitch = (window / 8192.0).min(0.05 * params.tau_c);
    let mut t = start;
    let mut g_prev = g(t);
    let mut state = 0.0_f64;
    let mut t_fi = start;
    if k <= 0.0 && g_prev >= 0.0 {
        let t_event = (t + params.t_d_const).max(t_min);
        return Ok(OverdriveEvent { t_event, t_trigger: t, t_fi: t });
    }
    while t < stop {
        let h = pitch.min(stop - t);
        let t_next = t + h;
        let g_next = g(t_next);
        // Integrate the linear interpolant of g over the step, dropping the
        // part before an upward zero crossing while the state is clamped.
        let (mut s0, mut g0) = (0.0, g_prev);
        if state == 0.0 && g_prev < 0.0 && g_next > 0.0 {
            s0 = h * (-g_prev) / (g_next - g_prev);
            g0 = 0.0;
            t_fi = t + s0;
        }
        let seg = h - s0;
        let next = state + 0.5 * seg * (g0 + g_next);
        if next >= k && next > 0.0 {
            let t_trig = if k <= 0.0 {
                bisect_sign(&g, t, t_next, 1e-12 * window)
            } else {
                t + s0 + quadratic_step(state, g0, g_next, seg, k)
            };
            let t_event = (t_trig + params.t_d_const).max(t_min);
            if t_event > window {
                return Err(ConditioningError::NoCrossing);
            }
            return Ok(OverdriveEvent { t_event, t_trigger: t_trig, t_fi });
        }
        if next <= 0.0 {
            state = 0.0;
            t_fi = t_next;
        } else {
            state = next;
        }
        t = t_next;
        g_prev = g_next;
    }
    Err(ConditioningError::NoCrossing)
}

/// Offset `s ∈ [0, h]` where `state + ∫₀ˢ (g0 + (g1 − g0)u/h) du` reaches `k`.
fn quadratic_step(state: f64, g0: f64, g1: f64, h: f64, k: f64) -> f64 {
    let rem = k - state;
    let c = 0.5 * (g1 - g0) / h;
    let disc = (g0 * g0 + 4.0 * c * rem).max(0.0);
    let den = g0 + math::sqrt(disc);
    let s = if den > 0.0 { 2.0 * rem / den } else { h * rem / (0.5 * h * (g0 + g1)) };
    s.clamp(0.0, h)
}

/// Smallest `t` in `(lo, hi]` with `g(t) ≥ 0`, given `g(lo) < 0 ≤ g(hi)`.
pub(crate) fn bisect_sign<F: Fn(f64) -> f64>(g: &F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Least-squares fit of `delay = p1/Δv + p2`; returns `(p1, p2)`.
pub fn overdrive_delay_fit(points: &[(f64, f64)]) -> Result<(f64, f64), ConditioningError> {
    if points.len() < 2 || points.iter().any(|(dv, d)| !(*dv > 0.0) || !d.is_finite()) {
        return Err(ConditioningError::InvalidData);
    }
    let xs: Vec<f64> = points.iter().map(|(dv, _)| 1.0 / dv).collect();
    let n = points.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|(_, d)| d).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, (_, y)) in xs.iter().zip(points) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if !(sxx > f64::EPSILON * x_mean * x_mean * n) {
        return Err(ConditioningError::SingularFit);
    }
    let p1 = sxy / sxx;
    Ok((p1, y_mean - p1 * x_mean))
}
