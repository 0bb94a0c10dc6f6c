//! Command implementations. Each writes its files into the output
//! directory and returns the one-line summary to print.

use std::path::{Path, PathBuf};

use cmc_core::analysis::{self, NormalizedDesign, StabilityVerdict, TransientReport};
use cmc_core::conditioning;
use cmc_core::interference::SpectralBounds;
use cmc_core::loop_core::{self, LoopConfig, LoopState, SimOptions, StaticMapOptions};
use cmc_core::sweep::{self, DesignMethod, DiagramSetup, McSetup};
use cmc_core::Conditioning;
use serde::Serialize;
use thiserror::Error;

use crate::output;
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    StaticMap,
    Stability,
    Transient,
    DesignDiagram,
    McRegion,
    FitComparator,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Precondition(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Scenario(ScenarioError::Io { .. }) => 1,
            _ => 2,
        }
    }
}

fn precondition(e: impl std::fmt::Display) -> CliError {
    CliError::Precondition(e.to_string())
}

/// Flags shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub cycles: Option<usize>,
    /// `(Â points, ω̂ points)`.
    pub grid: (usize, usize),
    pub samples: usize,
    pub data: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("."), seed: 0, cycles: None, grid: (32, 32), samples: 64, data: None }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let io = |source| CliError::Io { path: dir.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

/// Runs a scenario command. `fit-comparator` ignores the scenario; see
/// [`fit_comparator`].
pub fn run(cmd: Command, sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    match cmd {
        Command::Simulate => simulate(sc, opts),
        Command::StaticMap => static_map(sc, opts),
        Command::Stability => stability(sc, opts),
        Command::Transient => transient(sc, opts),
        Command::DesignDiagram => design_diagram(sc, opts),
        Command::McRegion => mc_region(sc, opts),
        Command::FitComparator => fit_comparator(opts),
    }
}

fn bounds(sc: &Scenario) -> Result<SpectralBounds, CliError> {
    sc.interference.bounds().map_err(precondition)
}

fn normalized(sc: &Scenario) -> Result<NormalizedDesign, CliError> {
    Ok(analysis::normalize(&sc.loop_cfg, &sc.conditioning, &bounds(sc)?))
}

fn simulate(sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let cfg = &sc.loop_cfg;
    let w = sc.interference.waveform().map_err(precondition)?;
    let n = opts.cycles.or(sc.run.n_cycles).unwrap_or(200);
    let initial = sc.i_start.map(|s| {
        LoopState::initial(s).with_filter_state(loop_core::steady_filter_state(cfg, &sc.conditioning, sc.i_c))
    });
    let sim = SimOptions { mode: sc.phase_mode, initial, seed: opts.seed, early_exit: false };
    let trace = loop_core::simulate(cfg, &[sc.i_c], &sc.conditioning, &w, n, &sim).map_err(precondition)?;
    let path = write_file(&opts.out_dir, "trace.csv", &output::trace_csv(&trace))?;
    let last = trace.states.last().map_or(f64::NAN, |s| s.i_extremum);
    Ok(format!(
        "simulate: verdict {} after {} cycles, last extremum {last} A, command {} A -> {}",
        trace.verdict,
        trace.states.len(),
        sc.i_c,
        path.display()
    ))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1).max(1) as f64).collect()
}

fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

fn static_map(sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let cfg = &sc.loop_cfg;
    let w = sc.interference.waveform().map_err(precondition)?;
    let s = &sc.sweep;
    let grid = linspace(s.i_c_min, s.i_c_max, s.map_points);
    // Hold the sensing phase start where every command on the grid is reachable.
    let i_start = sc.i_start.unwrap_or(if cfg.topology.is_peak() {
        cfg.nominal_start(s.i_c_min)
    } else {
        cfg.nominal_start(s.i_c_max)
    });
    let map_opts = StaticMapOptions { i_start, ..StaticMapOptions::default() };
    let map = loop_core::static_map_with(cfg, &grid, &sc.conditioning, &w, &map_opts);
    let path = write_file(&opts.out_dir, "static_map.csv", &output::static_map_csv(&map))?;
    let jump = loop_core::discontinuity_measure(&map).map_err(precondition)?;
    let nl = loop_core::nonlinearity_degree(&map).map_err(precondition)?;
    Ok(format!(
        "static-map: {} samples, largest jump {jump:.4e} A, nonlinearity {nl:.4e} -> {}",
        map.samples.len(),
        path.display()
    ))
}

#[derive(Serialize)]
struct StabilityReport {
    topology: &'static str,
    conditioning: Conditioning,
    verdict: StabilityVerdict,
    bounds: SpectralBounds,
    normalized: NormalizedDesign,
    /// Slew bound for slope-type checks, else absent.
    slew_limit: Option<f64>,
}

fn stability(sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let cfg = &sc.loop_cfg;
    let b = bounds(sc)?;
    let n = normalized(sc)?;
    let (ok, slew_limit, detail) = match sc.conditioning {
        Conditioning::None | Conditioning::SlopeComp { .. } => {
            let limit = analysis::stability_bound(cfg.topology, cfg.m1, cfg.m2, &sc.conditioning);
            let v = analysis::large_signal_verdict(cfg.topology, cfg.m1, cfg.m2, b.lambda_ub, &sc.conditioning);
            (
                v == StabilityVerdict::GuaranteedStable,
                Some(limit),
                format!("slew bound {:.4} A/us vs limit {:.4} A/us", b.lambda_ub * 1e-6, limit * 1e-6),
            )
        }
        Conditioning::Filter { .. } => (
            analysis::filter_stability_ok(&n),
            None,
            format!(
                "A^={:.4} w^={:.4} tau^={:.4}, continuity {}",
                n.a_hat,
                n.omega_hat,
                n.tau_hat,
                if analysis::filter_continuity_ok(&n) { "ok" } else { "not guaranteed" }
            ),
        ),
        Conditioning::Overdrive(p) => {
            let need = 4.0 * b.a_ub * b.a_ub / cfg.m1 + b.b_integral;
            (
                analysis::comparator_stability_ok(b.a_ub, b.b_integral, cfg.m1, p.threshold()),
                None,
                format!("threshold {:.4e} A*s vs required {:.4e} A*s", p.threshold(), need),
            )
        }
    };
    let verdict = if ok { StabilityVerdict::GuaranteedStable } else { StabilityVerdict::NotGuaranteed };
    let report = StabilityReport {
        topology: cfg.topology.name(),
        conditioning: sc.conditioning,
        verdict,
        bounds: b,
        normalized: n,
        slew_limit,
    };
    let path = write_file(&opts.out_dir, "stability.json", &output::json_bytes(&report))?;
    Ok(format!("stability: {verdict} ({}; {detail}) -> {}", cfg.topology.name(), path.display()))
}

fn transient(sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let cfg = &sc.loop_cfg;
    let b = bounds(sc)?;
    let pr = match sc.conditioning {
        Conditioning::None | Conditioning::SlopeComp { .. } => {
            analysis::pole_range(cfg.topology, cfg.m1, cfg.m2, b.lambda_ub, &sc.conditioning)
        }
        Conditioning::Filter { tau } => {
            let w = sc.interference.waveform().map_err(precondition)?;
            sweep::filter_pole_range(cfg, tau, sc.i_c, &w, 64)
        }
        Conditioning::Overdrive(_) => {
            let n = normalized(sc)?;
            analysis::comparator_psi_pole_range(n.a_hat, n.omega_hat, n.tau_hat, 1.0)
        }
    }
    .map_err(precondition)?;
    let report: TransientReport = analysis::transient_report(pr);
    let path = write_file(&opts.out_dir, "transient.json", &output::json_bytes(&report))?;
    Ok(format!(
        "transient: poles [{:.4}, {:.4}], N_w {:.3} cycles, O_w {:.4}{} -> {}",
        pr.a_min,
        pr.a_max,
        report.n_w,
        report.o_w,
        if report.stable_small_signal { "" } else { " (not settling)" },
        path.display()
    ))
}

/// Normalized conditioning on the unit plant used by the sweeps.
fn normalized_conditioning(sc: &Scenario, n: &NormalizedDesign) -> Conditioning {
    match sc.conditioning {
        Conditioning::None => Conditioning::None,
        Conditioning::SlopeComp { .. } => Conditioning::SlopeComp { m_s: n.m_s_hat },
        Conditioning::Filter { .. } => Conditioning::Filter { tau: n.tau_hat },
        Conditioning::Overdrive(_) => sweep::comparator_from_tau_hat(n.tau_hat),
    }
}

fn design_diagram(sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let cfg: &LoopConfig = &sc.loop_cfg;
    let n = normalized(sc)?;
    let (method, level, (lo, hi), points, geometric) = match sc.conditioning {
        Conditioning::None | Conditioning::SlopeComp { .. } => (DesignMethod::Slope, n.lambda_hat, (0.0, 1.0), 21, false),
        Conditioning::Filter { .. } => (DesignMethod::Filter, n.a_hat, (0.05, 3.0), 33, true),
        Conditioning::Overdrive(_) => (DesignMethod::Comparator, n.a_hat, (0.02, 0.25), 17, false),
    };
    let level = sc.sweep.level.unwrap_or(level);
    let (lo, hi) = sc.sweep.param_range.unwrap_or((lo, hi));
    let points = sc.sweep.param_points.unwrap_or(points).max(2);
    if geometric && lo <= 0.0 {
        return Err(precondition("filter parameter axis must be positive"));
    }
    let axis = if geometric { geomspace(lo, hi, points) } else { linspace(lo, hi, points) };
    let omega_hat = if n.omega_hat > 0.0 { n.omega_hat } else { DiagramSetup::default().omega_hat };
    let setup = DiagramSetup { m2: cfg.m2 / cfg.m1, omega_hat, ..DiagramSetup::default() };
    let curves = sweep::design_diagram(method, &[level], &axis, cfg.topology, &setup);
    let curve = &curves[0];
    let path = write_file(&opts.out_dir, "design_curve.csv", &output::curve_csv(curve))?;
    let best = curve
        .parameter_axis
        .iter()
        .zip(&curve.n_w_sim)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or((f64::NAN, f64::NAN), |(p, n)| (*p, *n));
    Ok(format!(
        "design-diagram: {method:?} at level {level:.4}, {} points, fastest simulated settling {:.3} at {:.4} -> {}",
        axis.len(),
        best.1,
        best.0,
        path.display()
    ))
}

fn mc_region(sc: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let cfg = &sc.loop_cfg;
    let n = normalized(sc)?;
    let (na, nw) = opts.grid;
    if na == 0 || nw == 0 {
        return Err(precondition("grid must have at least one cell"));
    }
    let s = &sc.sweep;
    let a_axis: Vec<f64> = (1..=na).map(|k| s.a_hat_max * k as f64 / na as f64).collect();
    let w_axis = geomspace(s.omega_hat_min, s.omega_hat_max, nw);
    let setup = McSetup {
        m2: cfg.m2 / cfg.m1,
        t_on_min: n.t_on_min_hat,
        n_cycles: opts.cycles.or(sc.run.n_cycles).unwrap_or(500),
        ..McSetup::new(cfg.topology)
    };
    let cond = normalized_conditioning(sc, &n);
    let grid = sweep::mc_stability_region(&setup, &cond, &a_axis, &w_axis, opts.samples, opts.seed);
    let path = write_file(&opts.out_dir, "mc_region.csv", &output::grid_csv(&grid))?;
    let cells = na * nw;
    let certified = grid.cells.iter().flatten().filter(|c| c.stable_theorem).count();
    let all_stable = grid.cells.iter().flatten().filter(|c| c.stable_mc == 1.0).count();
    let violations = grid.subset_violations().len();
    Ok(format!(
        "mc-region: {cells} cells, {certified} certified, {all_stable} fully stable in simulation, {violations} subset violations -> {}",
        path.display()
    ))
}

#[derive(Serialize)]
struct FitReport {
    p1: f64,
    p2: f64,
    points: usize,
}

pub fn fit_comparator(opts: &RunOptions) -> Result<String, CliError> {
    let data = opts
        .data
        .as_ref()
        .ok_or_else(|| precondition("fit-comparator needs --data with delta_v,delay rows"))?;
    let file = std::fs::File::open(data).map_err(|source| CliError::Io { path: data.display().to_string(), source })?;
    let pts = output::read_fit_points(file).map_err(precondition)?;
    let (p1, p2) = conditioning::overdrive_delay_fit(&pts).map_err(precondition)?;
    let report = FitReport { p1, p2, points: pts.len() };
    let path = write_file(&opts.out_dir, "comparator_fit.json", &output::json_bytes(&report))?;
    Ok(format!("fit-comparator: p1 {p1:.4e}, p2 {p2:.4e} from {} points -> {}", pts.len(), path.display()))
}
