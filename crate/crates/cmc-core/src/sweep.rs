//! Monte Carlo stability regions, design diagrams and overshoot/settling
//! trade-off points on a normalized plant (`m1 = 1`, steady on time `1`).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{self, FrequencyConvention, PoleRange};
use crate::conditioning::{Conditioning, OverdriveParams, SensingRamp};
use crate::interference::{self, InterferenceSignal, SampleShape, SpectralBounds};
use crate::loop_core::{
    self, first_crossing, simulate, DetectorModel, LoopConfig, LoopState, PhaseMode, SimOptions, Topology, Verdict,
};
use crate::math;

/// Fraction of the step inside which the response counts as settled.
pub const SETTLE_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridCell {
    pub stable_mc: f64,
    pub stable_theorem: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignGrid {
    pub a_hat_axis: Vec<f64>,
    pub omega_hat_axis: Vec<f64>,
    /// `cells[i][j]` belongs to `a_hat_axis[i]` and `omega_hat_axis[j]`.
    pub cells: Vec<Vec<GridCell>>,
}

impl DesignGrid {
    /// Cells claimed stable by the theorem but not by every sample.
    pub fn subset_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if c.stable_theorem && c.stable_mc < 1.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignCurve {
    pub parameter_axis: Vec<f64>,
    pub n_w_theory: Vec<f64>,
    pub n_w_sim: Vec<f64>,
    pub o_w_theory: Vec<f64>,
    pub o_w_sim: Vec<f64>,
    /// Largest simulated comparator delay (comparator curves only).
    pub t_od_sim: Vec<f64>,
    /// Bound on the comparator delay (comparator curves only).
    pub t_od_theory: Vec<f64>,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMethod {
    Slope,
    Filter,
    Comparator,
}

impl core::str::FromStr for DesignMethod {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "slope" => Ok(DesignMethod::Slope),
            "filter" => Ok(DesignMethod::Filter),
            "comparator" => Ok(DesignMethod::Comparator),
            _ => Err(()),
        }
    }
}

/// Loop with unit rising slope and unit steady on time.
pub fn normalized_plant(topology: Topology, m2: f64, i_max: f64) -> LoopConfig {
    match topology {
        Topology::ConstOffTimePeak => LoopConfig::const_off_time_peak(1.0, m2, 1.0 / m2, i_max),
        Topology::ConstOnTimeValley => LoopConfig::const_on_time_valley(1.0, m2, 1.0, i_max),
        Topology::FixedFreqPeak => LoopConfig::fixed_freq_peak(1.0, m2, (1.0 + m2) / m2, i_max),
        Topology::FixedFreqValley => LoopConfig::fixed_freq_valley(1.0, m2, (1.0 + m2) / m2, i_max),
    }
}

/// Converts a normalized comparator time constant into a threshold on the
/// normalized plant.
pub fn comparator_from_tau_hat(tau_hat: f64) -> Conditioning {
    Conditioning::Overdrive(OverdriveParams::from_threshold(0.5 * tau_hat))
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// Plant, operating point and sampling used by [`mc_stability_region`].
#[derive(Debug, Clone, PartialEq)]
pub struct McSetup {
    pub topology: Topology,
    pub m2: f64,
    pub i_c: f64,
    pub i_max: f64,
    pub t_on_min: f64,
    pub n_cycles: usize,
    pub shape: SampleShape,
    /// Slew bound of a cell as a multiple of `A·ω`.
    pub slew_factor: f64,
}

impl McSetup {
    pub fn new(topology: Topology) -> Self {
        Self {
            topology,
            m2: 1.0,
            i_c: 2.0,
            i_max: 10.0,
            t_on_min: 0.0,
            n_cycles: 500,
            shape: SampleShape::Trapezoid,
            slew_factor: 1.0,
        }
    }

    pub fn plant(&self) -> LoopConfig {
        normalized_plant(self.topology, self.m2, self.i_max).with_t_on_min(self.t_on_min)
    }
}

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Spectral bounds of the trapezoid class sampled for one cell. `B` is the
/// largest over the admissible amplitudes since narrowing the amplitude at
/// a fixed slew squares the wave up.
pub fn cell_bounds(a_hat: f64, omega_hat: f64, slew_factor: f64) -> SpectralBounds {
    let omega = math::TAU * omega_hat;
    if a_hat <= 0.0 {
        return SpectralBounds { omega_l: omega, omega_ub: omega, ..SpectralBounds::ZERO };
    }
    let lambda = slew_factor * a_hat * omega;
    let mut b: f64 = 0.0;
    for j in 1..=16 {
        let amp = (a_hat * j as f64 / 16.0).min(lambda * math::PI / (2.0 * omega));
        if let Ok(s) = interference::worst_case_trapezoid(amp, omega, lambda, 0.0) {
            if let Ok(sb) = s.bounds() {
                b = b.max(sb.b_integral);
            }
        }
    }
    SpectralBounds { a_ub: a_hat, lambda_ub: lambda, b_integral: b, omega_l: omega, omega_ub: omega }
}

/// Whether the closed-form theory certifies every signal of the cell.
pub fn theorem_flag(setup: &McSetup, cond: &Conditioning, spec: &SpectralBounds) -> bool {
    let cfg = setup.plant();
    match cond {
        Conditioning::None | Conditioning::SlopeComp { .. } => {
            analysis::large_signal_verdict(setup.topology, cfg.m1, cfg.m2, spec.lambda_ub, cond)
                == analysis::StabilityVerdict::GuaranteedStable
        }
        Conditioning::Filter { .. } => {
            let n = analysis::normalize(&cfg, cond, spec);
            analysis::filter_stability_ok_with(&n, FrequencyConvention::AsPrinted)
        }
        Conditioning::Overdrive(p) => analysis::comparator_stability_ok(spec.a_ub, spec.b_integral, cfg.m1, p.threshold()),
    }
}

/// One Monte Carlo sample: random trapezoid restarted each cycle and a
/// random initial start current. Stable means the trace settles.
pub fn mc_sample(setup: &McSetup, cond: &Conditioning, spec: &SpectralBounds, seed: u64) -> bool {
    let cfg = setup.plant();
    let w = interference::sample_random(spec, setup.shape, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_5EED);
    let jitter: f64 = rng.gen::<f64>() - 0.5;
    let start = cfg.nominal_start(setup.i_c) + jitter * cfg.m1 * cfg.steady_on_time();
    let initial = LoopState::initial(start).with_filter_state(loop_core::steady_filter_state(&cfg, cond, setup.i_c));
    let opts = SimOptions { mode: PhaseMode::Synchronous, initial: Some(initial), seed, early_exit: true };
    match simulate(&cfg, &[setup.i_c], cond, &w, setup.n_cycles, &opts) {
        Ok(t) => t.verdict.is_stable(),
        Err(_) => false,
    }
}

fn mc_cell(setup: &McSetup, cond: &Conditioning, a_hat: f64, omega_hat: f64, n_samples: usize, cell_seed: u64) -> GridCell {
    let spec = cell_bounds(a_hat, omega_hat, setup.slew_factor);
    let stable_theorem = theorem_flag(setup, cond, &spec);
    let stable = if spec.a_ub == 0.0 {
        usize::from(mc_sample(setup, cond, &spec, cell_seed)) * n_samples
    } else {
        (0..n_samples)
            .filter(|&s| mc_sample(setup, cond, &spec, mix_seed(cell_seed, s as u64, 0x1234)))
            .count()
    };
    GridCell { stable_mc: stable as f64 / n_samples as f64, stable_theorem }
}

/// Stable fraction of random trapezoid realizations per `(Â, ω̂)` cell,
/// together with the matching closed-form verdict.
///
/// Axes must be strictly increasing. Results depend only on `seed`.
pub fn mc_stability_region(
    setup: &McSetup,
    cond: &Conditioning,
    a_hat_axis: &[f64],
    omega_hat_axis: &[f64],
    n_samples: usize,
    seed: u64,
) -> DesignGrid {
    let n_samples = n_samples.max(1);
    let jobs: Vec<(usize, usize)> = (0..a_hat_axis.len())
        .flat_map(|i| (0..omega_hat_axis.len()).map(move |j| (i, j)))
        .collect();
    let run = |&(i, j): &(usize, usize)| {
        mc_cell(setup, cond, a_hat_axis[i], omega_hat_axis[j], n_samples, mix_seed(seed, i as u64, j as u64))
    };
    #[cfg(feature = "parallel")]
    let flat: Vec<GridCell> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let flat: Vec<GridCell> = jobs.iter().map(run).collect();
    let cells = flat.chunks(omega_hat_axis.len().max(1)).map(|r| r.to_vec()).collect();
    DesignGrid { a_hat_axis: a_hat_axis.to_vec(), omega_hat_axis: omega_hat_axis.to_vec(), cells }
}

// ---------------------------------------------------------------------------
// Step responses
// ---------------------------------------------------------------------------

/// Measured step response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// Cycles until the extremum error stays inside the settling band,
    /// interpolated between cycles. Infinite when the loop never settles.
    pub settling: f64,
    /// Largest excess beyond the final value, relative to the step.
    pub overshoot: f64,
    /// Sum of absolute relative errors, a smooth proxy for slowness.
    pub score: f64,
    /// Switching delay after the ideal crossing at the final state.
    pub delay: f64,
}

impl StepMetrics {
    const UNSETTLED: StepMetrics =
        StepMetrics { settling: f64::INFINITY, overshoot: f64::INFINITY, score: f64::INFINITY, delay: 0.0 };
}

/// Settles at `i_c0`, steps the command to `i_c1` and measures the response
/// with the interference restarted each cycle.
pub fn step_response(
    cfg: &LoopConfig,
    cond: &Conditioning,
    w: &InterferenceSignal,
    i_c0: f64,
    i_c1: f64,
    max_cycles: usize,
) -> StepMetrics {
    let sync = SimOptions { mode: PhaseMode::Synchronous, initial: None, seed: 0, early_exit: true };
    let pre = match simulate(cfg, &[i_c0], cond, w, max_cycles, &sync) {
        Ok(t) if matches!(t.verdict, Verdict::Converged(_)) => t,
        _ => return StepMetrics::UNSETTLED,
    };
    let before = *pre.states.last().unwrap();
    let opts = SimOptions { initial: Some(before), ..sync };
    let post = match simulate(cfg, &[i_c1], cond, w, max_cycles, &opts) {
        Ok(t) if matches!(t.verdict, Verdict::Converged(_)) => t,
        _ => return StepMetrics::UNSETTLED,
    };
    let n = post.states.len();
    let last = post.states[n - 1];
    let final_p = last.i_extremum;
    let delta = final_p - before.i_extremum;
    if delta == 0.0 {
        return StepMetrics { settling: 0.0, overshoot: 0.0, score: 0.0, delay: 0.0 };
    }
    let band = SETTLE_BAND * delta.abs();
    // Error magnitudes, starting with the full step just before it lands.
    let errs: Vec<f64> = core::iter::once(delta.abs())
        .chain(post.states.iter().map(|s| (s.i_extremum - final_p).abs()))
        .collect();
    let mut overshoot: f64 = 0.0;
    let mut score = 0.0;
    for s in &post.states {
        let e = s.i_extremum - final_p;
        overshoot = overshoot.max(e / delta);
        score += e.abs() / delta.abs();
    }
    let settling = interpolated_settling(&errs, band, loop_core::STEADY_TOL * cfg.i_max);
    let prev_start = if n >= 2 { post.states[n - 2].i_next_start } else { before.i_next_start };
    StepMetrics { settling, overshoot, score, delay: switching_delay(cfg, cond, w, i_c1, prev_start, last.t_event) }
}

/// Cycle at which the error envelope crosses `band`, interpolated
/// log-linearly between the last sample above it and the next one.
/// `errs[0]` is the error just before the first cycle. Errors at or below
/// `floor` count as exactly settled.
fn interpolated_settling(errs: &[f64], band: f64, floor: f64) -> f64 {
    let Some(k) = errs.iter().rposition(|e| *e > band) else {
        return 0.0;
    };
    let Some(&next) = errs.get(k + 1) else {
        return f64::INFINITY;
    };
    let frac = if next > floor {
        (math::ln(errs[k] / band) / math::ln(errs[k] / next)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    k as f64 + frac
}

fn switching_delay(cfg: &LoopConfig, cond: &Conditioning, w: &InterferenceSignal, i_c: f64, start: f64, t_event: f64) -> f64 {
    let sign = if cfg.topology.is_peak() { 1.0 } else { -1.0 };
    let w_o = if cfg.topology.is_peak() { w.clone() } else { w.negated() };
    let offset = sign * start;
    let ramp = SensingRamp {
        offset,
        slope: cfg.sensing_slope(),
        command: sign * i_c,
        command_slope: cond.compensation_slope(),
    };
    let window = (cfg.i_max - offset) / cfg.sensing_slope();
    match first_crossing(&ramp, &w_o, 0.0, &DetectorModel::Ideal, cfg.t_on_min, window) {
        Ok(c) => t_event - c.t_event,
        Err(_) => 0.0,
    }
}

fn worse(a: &StepMetrics, b: &StepMetrics) -> bool {
    a.settling > b.settling || (a.settling == b.settling && a.score > b.score)
}

/// Step response at the worst interference phase: a coarse phase grid,
/// then golden-section refinement around the worst coarse phase. Overshoot
/// and delay are maximized separately over the evaluated phases.
pub fn worst_phase_response<F>(make_w: F, cfg: &LoopConfig, cond: &Conditioning, i_c0: f64, i_c1: f64, phases: usize) -> StepMetrics
where
    F: Fn(f64) -> InterferenceSignal,
{
    let phases = phases.max(16);
    let eval = |phi: f64| step_response(cfg, cond, &make_w(phi), i_c0, i_c1, 600);
    let mut worst = StepMetrics { settling: -1.0, overshoot: 0.0, score: -1.0, delay: 0.0 };
    let mut worst_phi = 0.0;
    let mut max_over: f64 = 0.0;
    let mut max_delay: f64 = 0.0;
    let h = math::TAU / phases as f64;
    for k in 0..phases {
        let phi = k as f64 * h;
        let m = eval(phi);
        max_over = max_over.max(m.overshoot);
        max_delay = max_delay.max(m.delay);
        if worse(&m, &worst) {
            worst = m;
            worst_phi = phi;
        }
    }
    if worst.settling.is_finite() {
        let gr = 0.5 * (math::sqrt(5.0) - 1.0);
        let (mut lo, mut hi) = (worst_phi - h, worst_phi + h);
        let mut x1 = hi - gr * (hi - lo);
        let mut x2 = lo + gr * (hi - lo);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        for _ in 0..12 {
            for m in [&f1, &f2] {
                max_over = max_over.max(m.overshoot);
                max_delay = max_delay.max(m.delay);
                if worse(m, &worst) {
                    worst = *m;
                }
            }
            if worse(&f1, &f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = eval(x2);
            }
        }
    }
    StepMetrics { overshoot: max_over, delay: max_delay, ..worst }
}

// ---------------------------------------------------------------------------
// Design diagrams
// ---------------------------------------------------------------------------

/// Plant and interference settings shared by the design diagrams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramSetup {
    pub m2: f64,
    pub omega_hat: f64,
    pub i_c: f64,
    /// Relative command step.
    pub step: f64,
    pub i_max: f64,
    pub phases: usize,
}

impl Default for DiagramSetup {
    fn default() -> Self {
        Self { m2: 1.0, omega_hat: 2.0, i_c: 2.0, step: 0.005, i_max: 20.0, phases: 16 }
    }
}

fn theory_point(pr: Result<PoleRange, analysis::AnalysisError>) -> (f64, f64) {
    match pr {
        Ok(pr) => {
            let r = analysis::transient_report(pr);
            (r.n_w, if r.stable_small_signal { r.o_w } else { f64::INFINITY })
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

/// Theoretical worst-case settling and overshoot for one diagram point,
/// plus the comparator delay bound (zero for other methods).
pub fn theory_at(method: DesignMethod, topology: Topology, setup: &DiagramSetup, level: f64, param: f64) -> (f64, f64, f64) {
    let cfg = normalized_plant(topology, setup.m2, setup.i_max);
    let omega = math::TAU * setup.omega_hat;
    match method {
        DesignMethod::Slope => {
            let cond = Conditioning::SlopeComp { m_s: param };
            let (n, o) = theory_point(analysis::pole_range(topology, cfg.m1, cfg.m2, level, &cond));
            (n, o, 0.0)
        }
        DesignMethod::Filter => {
            let w = InterferenceSignal::sinusoid(level, omega, 0.0);
            let (n, o) = theory_point(filter_pole_range(&cfg, param, setup.i_c, &w, 64));
            (n, o, 0.0)
        }
        DesignMethod::Comparator => {
            let pr = analysis::comparator_psi_pole_range(level, setup.omega_hat, param, cfg.m1);
            let (n, o) = theory_point(pr);
            let b = InterferenceSignal::sinusoid(level, omega, 0.0).bounds().map_or(0.0, |s| s.b_integral);
            let t_on = cfg.steady_on_time();
            let k = 0.5 * param * cfg.m1 * t_on * t_on;
            (n, o, analysis::comparator_max_delay(level, b, cfg.m1, k))
        }
    }
}

/// Pole range of the filtered loop over `phases` evenly spaced shifts of a
/// periodic `w`, each linearized at its own synchronous operating point.
pub fn filter_pole_range(
    cfg: &LoopConfig,
    tau: f64,
    i_c: f64,
    w: &InterferenceSignal,
    phases: usize,
) -> Result<PoleRange, analysis::AnalysisError> {
    let cond = Conditioning::Filter { tau };
    let period = w.fundamental_period().unwrap_or(0.0);
    let phases = if period > 0.0 { phases.max(1) } else { 1 };
    let mut a_min = f64::INFINITY;
    let mut a_max = f64::NEG_INFINITY;
    let mut b = 0.0;
    for k in 0..phases {
        let wk = w.shifted(period * k as f64 / phases as f64);
        let (i_c, i_start) =
            filter_operating_point(cfg, &cond, &wk, i_c).ok_or(analysis::AnalysisError::NotSettling)?;
        let fl = analysis::filter_closed_loop(cfg, tau, i_c, i_start, &wk)?;
        a_min = a_min.min(fl.a);
        a_max = a_max.max(fl.a);
        b = fl.b;
    }
    Ok(PoleRange { a_min, a_max, b, beta: 1.0 })
}

fn filter_operating_point(cfg: &LoopConfig, cond: &Conditioning, w: &InterferenceSignal, i_c: f64) -> Option<(f64, f64)> {
    let sync = SimOptions { mode: PhaseMode::Synchronous, initial: None, seed: 0, early_exit: true };
    let t = simulate(cfg, &[i_c], cond, w, 2000, &sync).ok()?;
    if !matches!(t.verdict, Verdict::Converged(_)) {
        return None;
    }
    Some((i_c, t.states.last()?.i_next_start))
}

fn design_point(method: DesignMethod, topology: Topology, setup: &DiagramSetup, level: f64, param: f64) -> [f64; 6] {
    let (n_t, o_t, d_t) = theory_at(method, topology, setup, level, param);
    let cfg = normalized_plant(topology, setup.m2, setup.i_max);
    let omega = math::TAU * setup.omega_hat;
    let (cond, amp) = match method {
        DesignMethod::Slope => (Conditioning::SlopeComp { m_s: param }, level / omega),
        DesignMethod::Filter => (Conditioning::Filter { tau: param }, level),
        DesignMethod::Comparator => (comparator_from_tau_hat(param), level),
    };
    let i_c1 = setup.i_c * (1.0 + setup.step);
    let m = if amp == 0.0 {
        step_response(&cfg, &cond, &InterferenceSignal::Zero, setup.i_c, i_c1, 600)
    } else {
        worst_phase_response(|phi| InterferenceSignal::sinusoid(amp, omega, phi), &cfg, &cond, setup.i_c, i_c1, setup.phases)
    };
    [n_t, m.settling, o_t, m.overshoot, d_t, m.delay]
}

/// Theory and simulated worst-case settling/overshoot along a design
/// parameter, one curve per interference level.
///
/// Levels are `Λ̂` for slope compensation and `Â` for the filter and the
/// comparator. The parameter is `m̂s`, the filter `τ̂` or the comparator `τ̂`.
pub fn design_diagram(
    method: DesignMethod,
    levels: &[f64],
    parameter_axis: &[f64],
    topology: Topology,
    setup: &DiagramSetup,
) -> Vec<DesignCurve> {
    levels
        .iter()
        .map(|&level| {
            let run = |p: &f64| design_point(method, topology, setup, level, *p);
            #[cfg(feature = "parallel")]
            let pts: Vec<[f64; 6]> = {
                use rayon::prelude::*;
                parameter_axis.par_iter().map(run).collect()
            };
            #[cfg(not(feature = "parallel"))]
            let pts: Vec<[f64; 6]> = parameter_axis.iter().map(run).collect();
            let col = |i: usize| pts.iter().map(|p| p[i]).collect::<Vec<_>>();
            let comparator = method == DesignMethod::Comparator;
            DesignCurve {
                parameter_axis: parameter_axis.to_vec(),
                n_w_theory: col(0),
                n_w_sim: col(1),
                o_w_theory: col(2),
                o_w_sim: col(3),
                t_od_theory: if comparator { col(4) } else { vec![] },
                t_od_sim: if comparator { col(5) } else { vec![] },
                level,
            }
        })
        .collect()
}

/// Theoretical `(o_w, n_w)` per parameter value.
pub fn tradeoff_points(
    method: DesignMethod,
    level: f64,
    parameter_axis: &[f64],
    topology: Topology,
    setup: &DiagramSetup,
) -> Vec<(f64, f64)> {
    parameter_axis
        .iter()
        .map(|&p| {
            let (n, o, _) = theory_at(method, topology, setup, level, p);
            (o, n)
        })
        .collect()
}

/// Points not dominated in both overshoot and settling.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    finite
        .iter()
        .copied()
        .filter(|p| {
            !finite
                .iter()
                .any(|q| q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1))
        })
        .collect()
}
