//! Cycle-by-cycle simulation and closed-form design analysis for extremum
//! (peak/valley) current-mode control loops whose current sensor is corrupted
//! by bounded, band-limited interference.
//!
//! The crate is `no_std` compatible (with `alloc`). Enable `parallel` to run
//! Monte Carlo sweeps on a rayon thread pool and `serde` to derive
//! serialization for the report types.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod conditioning;
pub mod interference;
pub mod loop_core;
pub mod sweep;

mod math;

pub use analysis::{NormalizedDesign, PoleRange, StabilityVerdict, TransientReport};
pub use conditioning::{Conditioning, OverdriveParams, RegionBoundaries};
pub use interference::{InterferenceSignal, SpectralBounds, Tone};
pub use loop_core::{
    LoopConfig, LoopState, MapOutcome, PhaseMode, StaticMap, Topology, Trace, Verdict,
};
pub use sweep::{DesignCurve, DesignGrid};
