//! Interference signals on the current sensor and their amplitude, slew and
//! integral bounds.
//!
//! A signal is a zero-mean, bounded deviation `w(t)` added to the ideal
//! current ramp. Every variant can be evaluated pointwise, differentiated,
//! bounded, and passed through a first-order low-pass filter in closed form.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math::{self, PI, TAU};

/// Points per fundamental period used for the trapezoid integral bound.
pub const B_INTEGRAL_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InterferenceError {
    #[error("sinusoid component with zero angular frequency (dc is excluded)")]
    DcComponent,
    #[error("trapezoid cannot reach its amplitude within half a period at the given slew")]
    InfeasibleTrapezoid,
    #[error("non-finite or negative signal parameter")]
    InvalidParameter,
}

/// One sinusoidal line `A·sin(ωt + φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tone {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Tone {
    pub fn new(amplitude: f64, omega: f64, phase: f64) -> Self {
        Self { amplitude, omega, phase }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        self.amplitude * math::sin(self.omega * t + self.phase)
    }

    #[inline]
    fn derivative(&self, t: f64) -> f64 {
        self.amplitude * self.omega * math::cos(self.omega * t + self.phase)
    }

    /// Steady-state response of `1/(1+sτ)` to this tone, and its derivative.
    fn forced_lowpass(&self, t: f64, tau: f64) -> (f64, f64) {
        let wt = self.omega * tau;
        let gain = self.amplitude / math::hypot(1.0, wt);
        let lag = math::atan(wt);
        let arg = self.omega * t + self.phase - lag;
        (gain * math::sin(arg), gain * self.omega * math::cos(arg))
    }

    /// `∫_{ta}^{tb} w(s) e^{-(tb-s)/τ}/τ ds` for this tone.
    fn lowpass_increment(&self, ta: f64, tb: f64, tau: f64) -> f64 {
        let decay = math::exp(-(tb - ta) / tau);
        self.forced_lowpass(tb, tau).0 - decay * self.forced_lowpass(ta, tau).0
    }
}

/// Interference waveform `w(t)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InterferenceSignal {
    Zero,
    Sinusoid(Tone),
    /// Symmetric periodic trapezoid: plateaus at `±amplitude`, edges of slope
    /// `±slew`, fundamental `omega_l`. With `phase = 0` it rises through zero
    /// at `t = 0`, like a sine.
    Trapezoid {
        amplitude: f64,
        omega_l: f64,
        slew: f64,
        phase: f64,
    },
    SumOfSinusoids(Vec<Tone>),
}

/// Amplitude, slew and integral bounds of a signal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralBounds {
    pub a_ub: f64,
    pub lambda_ub: f64,
    pub b_integral: f64,
    pub omega_l: f64,
    pub omega_ub: f64,
}

impl SpectralBounds {
    pub const ZERO: SpectralBounds = SpectralBounds {
        a_ub: 0.0,
        lambda_ub: 0.0,
        b_integral: 0.0,
        omega_l: 0.0,
        omega_ub: 0.0,
    };

    pub fn validate(&self) -> Result<(), InterferenceError> {
        let fields = [self.a_ub, self.lambda_ub, self.b_integral, self.omega_l, self.omega_ub];
        if fields.iter().any(|v| v.is_nan() || *v < 0.0) || self.omega_l > self.omega_ub {
            return Err(InterferenceError::InvalidParameter);
        }
        if self.a_ub > 0.0 && self.omega_l <= 0.0 {
            return Err(InterferenceError::DcComponent);
        }
        Ok(())
    }
}

/// Waveform family drawn by [`sample_random`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleShape {
    #[default]
    Trapezoid,
    Sinusoid,
}

// ---------------------------------------------------------------------------
// Trapezoid geometry
// ---------------------------------------------------------------------------

/// Half of the edge duration, expressed as an angle of the fundamental.
#[inline]
fn trapezoid_half_edge(amplitude: f64, omega_l: f64, slew: f64) -> f64 {
    omega_l * amplitude / slew
}

#[inline]
fn trapezoid_shape(theta: f64, amplitude: f64, alpha: f64) -> f64 {
    let th = math::wrap_angle(theta);
    if th < alpha {
        amplitude * th / alpha
    } else if th <= PI - alpha {
        amplitude
    } else if th < PI + alpha {
        amplitude * (PI - th) / alpha
    } else if th <= TAU - alpha {
        -amplitude
    } else {
        amplitude * (th - TAU) / alpha
    }
}

/// Segment index (0 rise, 1 high, 2 fall, 3 low, 4 rise again) and the angle
/// at which that segment ends.
#[inline]
fn trapezoid_segment(th: f64, alpha: f64) -> (usize, f64) {
    if th < alpha {
        (0, alpha)
    } else if th < PI - alpha {
        (1, PI - alpha)
    } else if th < PI + alpha {
        (2, PI + alpha)
    } else if th < TAU - alpha {
        (3, TAU - alpha)
    } else {
        (4, TAU + alpha)
    }
}

impl InterferenceSignal {
    pub fn sinusoid(amplitude: f64, omega: f64, phase: f64) -> Self {
        Self::Sinusoid(Tone::new(amplitude, omega, phase))
    }

    pub fn trapezoid(amplitude: f64, omega_l: f64, slew: f64, phase: f64) -> Self {
        Self::Trapezoid { amplitude, omega_l, slew, phase }
    }

    /// Checks the parameters of the waveform.
    pub fn validate(&self) -> Result<(), InterferenceError> {
        let tone_ok = |t: &Tone| -> Result<(), InterferenceError> {
            if !(t.amplitude.is_finite() && t.omega.is_finite() && t.phase.is_finite()) {
                return Err(InterferenceError::InvalidParameter);
            }
            if t.omega == 0.0 && t.amplitude != 0.0 {
                return Err(InterferenceError::DcComponent);
            }
            Ok(())
        };
        match self {
            Self::Zero => Ok(()),
            Self::Sinusoid(t) => tone_ok(t),
            Self::SumOfSinusoids(ts) => ts.iter().try_for_each(tone_ok),
            Self::Trapezoid { amplitude, omega_l, slew, phase } => {
                let finite = amplitude.is_finite() && omega_l.is_finite() && phase.is_finite();
                if !finite || *amplitude < 0.0 || *omega_l < 0.0 || slew.is_nan() || *slew < 0.0 {
                    return Err(InterferenceError::InvalidParameter);
                }
                if *amplitude == 0.0 {
                    return Ok(());
                }
                if *omega_l == 0.0 {
                    return Err(InterferenceError::DcComponent);
                }
                if !(slew * PI / omega_l >= 2.0 * amplitude * (1.0 - 1e-12)) {
                    return Err(InterferenceError::InfeasibleTrapezoid);
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Sinusoid(t) => t.amplitude == 0.0,
            Self::SumOfSinusoids(ts) => ts.iter().all(|t| t.amplitude == 0.0),
            Self::Trapezoid { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// `sup |w|` without the integral quadrature done by [`bounds`](Self::bounds).
    pub fn amplitude_bound(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Sinusoid(t) => t.amplitude.abs(),
            Self::SumOfSinusoids(ts) => ts.iter().map(|t| t.amplitude.abs()).sum(),
            Self::Trapezoid { amplitude, .. } => amplitude.abs(),
        }
    }

    /// `w(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Sinusoid(tone) => tone.eval(t),
            Self::SumOfSinusoids(ts) => ts.iter().map(|tone| tone.eval(t)).sum(),
            Self::Trapezoid { amplitude, omega_l, slew, phase } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                let alpha = trapezoid_half_edge(*amplitude, *omega_l, *slew);
                trapezoid_shape(omega_l * t + phase, *amplitude, alpha)
            }
        }
    }

    /// `w'(t)`; one-sided (right) derivative at trapezoid corners.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Sinusoid(tone) => tone.derivative(t),
            Self::SumOfSinusoids(ts) => ts.iter().map(|tone| tone.derivative(t)).sum(),
            Self::Trapezoid { amplitude, omega_l, slew, phase } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                let alpha = trapezoid_half_edge(*amplitude, *omega_l, *slew);
                let th = math::wrap_angle(omega_l * t + phase);
                match trapezoid_segment(th, alpha).0 {
                    0 | 4 => *slew,
                    2 => -*slew,
                    _ => 0.0,
                }
            }
        }
    }

    /// Period of the lowest frequency component, if the signal is non-zero.
    pub fn fundamental_period(&self) -> Option<f64> {
        match self {
            Self::Zero => None,
            Self::Sinusoid(t) => (t.omega != 0.0).then(|| TAU / t.omega.abs()),
            Self::SumOfSinusoids(ts) => ts
                .iter()
                .filter(|t| t.omega != 0.0 && t.amplitude != 0.0)
                .map(|t| TAU / t.omega.abs())
                .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p)))),
            Self::Trapezoid { amplitude, omega_l, .. } => {
                (*amplitude != 0.0 && *omega_l != 0.0).then(|| TAU / omega_l)
            }
        }
    }

    /// Highest angular frequency that matters for grid resolution. For a
    /// trapezoid this is the edge rate `π/(edge duration)`.
    pub fn resolution_omega(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Sinusoid(t) => t.omega.abs(),
            Self::SumOfSinusoids(ts) => ts
                .iter()
                .filter(|t| t.amplitude != 0.0)
                .map(|t| t.omega.abs())
                .fold(0.0, f64::max),
            Self::Trapezoid { amplitude, omega_l, slew, .. } => {
                if *amplitude == 0.0 {
                    0.0
                } else {
                    let alpha = trapezoid_half_edge(*amplitude, *omega_l, *slew);
                    omega_l * (PI / 2.0) / alpha.max(1e-3)
                }
            }
        }
    }

    /// `-w(t)`, as a signal of the same kind.
    pub fn negated(&self) -> Self {
        match self {
            Self::Zero => Self::Zero,
            Self::Sinusoid(t) => Self::Sinusoid(Tone { phase: t.phase + PI, ..*t }),
            Self::SumOfSinusoids(ts) => Self::SumOfSinusoids(
                ts.iter().map(|t| Tone { phase: t.phase + PI, ..*t }).collect(),
            ),
            // Half-wave symmetry: shifting by half a period flips the sign.
            Self::Trapezoid { amplitude, omega_l, slew, phase } => Self::Trapezoid {
                amplitude: *amplitude,
                omega_l: *omega_l,
                slew: *slew,
                phase: phase + PI,
            },
        }
    }

    /// `w(t + shift)`, as a signal of the same kind.
    pub fn shifted(&self, shift: f64) -> Self {
        match self {
            Self::Zero => Self::Zero,
            Self::Sinusoid(t) => Self::Sinusoid(Tone { phase: t.phase + t.omega * shift, ..*t }),
            Self::SumOfSinusoids(ts) => Self::SumOfSinusoids(
                ts.iter()
                    .map(|t| Tone { phase: t.phase + t.omega * shift, ..*t })
                    .collect(),
            ),
            Self::Trapezoid { amplitude, omega_l, slew, phase } => Self::Trapezoid {
                amplitude: *amplitude,
                omega_l: *omega_l,
                slew: *slew,
                phase: phase + omega_l * shift,
            },
        }
    }

    /// Sine series of the signal truncated to `harmonics` terms per
    /// trapezoid (odd harmonics only); sinusoids are returned unchanged.
    pub fn fourier_tones(&self, harmonics: usize) -> Vec<Tone> {
        match self {
            Self::Zero => Vec::new(),
            Self::Sinusoid(t) => alloc::vec![*t],
            Self::SumOfSinusoids(ts) => ts.clone(),
            Self::Trapezoid { amplitude, omega_l, slew, phase } => {
                if *amplitude == 0.0 {
                    return Vec::new();
                }
                let alpha = trapezoid_half_edge(*amplitude, *omega_l, *slew);
                (0..harmonics)
                    .map(|k| {
                        let n = (2 * k + 1) as f64;
                        let x = n * alpha;
                        let sinc = if x.abs() < 1e-12 { 1.0 } else { math::sin(x) / x };
                        Tone::new(4.0 * amplitude / (n * PI) * sinc, n * omega_l, n * phase)
                    })
                    .collect()
            }
        }
    }

    /// Amplitude, slew and integral bounds.
    pub fn bounds(&self) -> Result<SpectralBounds, InterferenceError> {
        self.validate()?;
        let tones_bounds = |ts: &[Tone]| {
            let active: Vec<&Tone> = ts.iter().filter(|t| t.amplitude != 0.0).collect();
            if active.is_empty() {
                return SpectralBounds::ZERO;
            }
            SpectralBounds {
                a_ub: active.iter().map(|t| t.amplitude.abs()).sum(),
                lambda_ub: active.iter().map(|t| (t.amplitude * t.omega).abs()).sum(),
                b_integral: active.iter().map(|t| (t.amplitude / t.omega).abs()).sum(),
                omega_l: active.iter().map(|t| t.omega.abs()).fold(f64::INFINITY, f64::min),
                omega_ub: active.iter().map(|t| t.omega.abs()).fold(0.0, f64::max),
            }
        };
        Ok(match self {
            Self::Zero => SpectralBounds::ZERO,
            Self::Sinusoid(t) => tones_bounds(core::slice::from_ref(t)),
            Self::SumOfSinusoids(ts) => tones_bounds(ts),
            Self::Trapezoid { amplitude, omega_l, slew, .. } => {
                if *amplitude == 0.0 {
                    SpectralBounds::ZERO
                } else {
                    SpectralBounds {
                        a_ub: *amplitude,
                        lambda_ub: *slew,
                        b_integral: self.primitive_extremum(B_INTEGRAL_POINTS),
                        omega_l: *omega_l,
                        omega_ub: *omega_l,
                    }
                }
            }
        })
    }

    /// Largest magnitude of the zero-mean antiderivative over one period,
    /// by composite Simpson quadrature with `points` panels.
    fn primitive_extremum(&self, points: usize) -> f64 {
        let Some(period) = self.fundamental_period() else {
            return 0.0;
        };
        let n = points.max(8);
        let h = period / n as f64;
        let mut prim = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prim.push(0.0);
        let mut w_left = self.eval(0.0);
        for k in 0..n {
            let t0 = k as f64 * h;
            let w_mid = self.eval(t0 + 0.5 * h);
            let w_right = self.eval(t0 + h);
            acc += h / 6.0 * (w_left + 4.0 * w_mid + w_right);
            prim.push(acc);
            w_left = w_right;
        }
        // Mean over the period by the trapezoid rule on the periodic samples.
        let mean = prim[..n].iter().sum::<f64>() / n as f64;
        prim.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max)
    }

    /// `∫_{ta}^{tb} w(s) e^{-(tb-s)/τ}/τ ds`, exact for every variant.
    ///
    /// This is the zero-state response of the first-order low-pass filter to
    /// `w` switched on at `ta`, observed at `tb`.
    pub fn lowpass_increment(&self, ta: f64, tb: f64, tau: f64) -> f64 {
        if tb <= ta {
            return 0.0;
        }
        match self {
            Self::Zero => 0.0,
            Self::Sinusoid(t) => t.lowpass_increment(ta, tb, tau),
            Self::SumOfSinusoids(ts) => ts.iter().map(|t| t.lowpass_increment(ta, tb, tau)).sum(),
            Self::Trapezoid { amplitude, omega_l, slew, phase } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                let alpha = trapezoid_half_edge(*amplitude, *omega_l, *slew);
                let mut y = 0.0;
                let mut s = ta;
                let mut guard = 0usize;
                while s < tb && guard < 1_000_000 {
                    guard += 1;
                    let th = math::wrap_angle(omega_l * s + phase);
                    let (seg, th_end) = trapezoid_segment(th, alpha);
                    let q = match seg {
                        0 | 4 => *slew,
                        2 => -*slew,
                        _ => 0.0,
                    };
                    let mut s_next = s + (th_end - th) / omega_l;
                    if s_next <= s {
                        s_next = s + 1e-15 * (1.0 + s.abs());
                    }
                    let s_end = s_next.min(tb);
                    let h = s_end - s;
                    let w_start = trapezoid_shape(th, *amplitude, alpha);
                    let w_end = w_start + q * h;
                    let decay = math::exp(-h / tau);
                    y = y * decay + (w_end - w_start * decay) - q * tau * math::one_minus_exp_neg(h / tau);
                    s = s_end;
                }
                y
            }
        }
    }

    /// Steady-state low-pass response `g(t) = (w * h)(t)` and `g'(t)`,
    /// evaluated from the sine series (trapezoids use `harmonics` terms).
    pub fn forced_lowpass(&self, t: f64, tau: f64, harmonics: usize) -> (f64, f64) {
        self.fourier_tones(harmonics)
            .iter()
            .map(|tone| tone.forced_lowpass(t, tau))
            .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
    }
}

/// Trapezoid with the largest admissible amplitude and slew.
pub fn worst_case_trapezoid(
    a_ub: f64,
    omega_l: f64,
    lambda_ub: f64,
    phase: f64,
) -> Result<InterferenceSignal, InterferenceError> {
    if a_ub == 0.0 {
        return Ok(InterferenceSignal::Zero);
    }
    let sig = InterferenceSignal::trapezoid(a_ub, omega_l, lambda_ub, phase);
    sig.validate()?;
    Ok(sig)
}

/// Draws one interference realization from the class described by `spec`.
///
/// Amplitude is uniform on `(0, a_ub]`, frequency uniform on
/// `[omega_l, omega_ub]`, phase uniform on `[0, 2π)`. Trapezoids use the
/// slew bound as their edge slope; the amplitude is capped so the edges fit
/// in half a period. An infinite slew bound selects edges of slope `2Aω`.
pub fn sample_random(spec: &SpectralBounds, shape: SampleShape, seed: u64) -> InterferenceSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_amp: f64 = rng.gen();
    let u_freq: f64 = rng.gen();
    let u_phase: f64 = rng.gen();
    if spec.a_ub <= 0.0 || spec.lambda_ub <= 0.0 || spec.omega_ub <= 0.0 {
        return InterferenceSignal::Zero;
    }
    let mut amplitude = spec.a_ub * (1.0 - u_amp);
    let omega = spec.omega_l + (spec.omega_ub - spec.omega_l) * u_freq;
    let phase = TAU * u_phase;
    match shape {
        SampleShape::Sinusoid => {
            if spec.lambda_ub.is_finite() {
                amplitude = amplitude.min(spec.lambda_ub / omega);
            }
            InterferenceSignal::sinusoid(amplitude, omega, phase)
        }
        SampleShape::Trapezoid => {
            let slew = if spec.lambda_ub.is_finite() {
                amplitude = amplitude.min(spec.lambda_ub * PI / (2.0 * omega));
                spec.lambda_ub
            } else {
                2.0 * amplitude * omega
            };
            InterferenceSignal::trapezoid(amplitude, omega, slew, phase)
        }
    }
}
