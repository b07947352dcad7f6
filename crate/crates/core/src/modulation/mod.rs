//! Geometric decomposition `u = lambda^{-1} e^{i gamma} (Q~_b + eps)` of the
//! solution near a ring, its orthogonality conditions, and the diagnostic
//! scalars built from epsilon and the modulation parameters.

mod decompose;
mod diagnostics;
mod family;
mod track;

pub(crate) use decompose::core_nodes;
pub use decompose::{
    core_value, decompose, epsilon_grid, guess_from_peak, h1_norm, DecomposeOptions, Decomposition, WEIGHT_CUTOFF,
};
pub use diagnostics::{
    epsilon_energy, exterior_field, exterior_grid, exterior_norms, lyapunov, restrict_to, ExteriorNorms,
    ExteriorOperator, LyapunovParams, LyapunovReport, EXTERIOR_MAX_NODES,
};
pub use family::{FamilyMember, ProfileFamily, BLEND_B};
pub use track::{
    modulation_timeseries, write_csv, DiagnosticsRecord, ModulationRecord, Tracker, TrackerConfig, CSV_HEADER,
};

use crate::field::LocalFrame;

/// Modulation parameters at one lab time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationState {
    pub lambda: f64,
    /// Unwrapped phase.
    pub gamma: f64,
    pub r_c: f64,
    pub z_c: f64,
    pub b: f64,
    pub t: f64,
    /// Rescaled time `s0 + int dt / lambda^2`.
    pub s: f64,
}

impl ModulationState {
    pub fn frame(&self) -> LocalFrame {
        LocalFrame { lambda: self.lambda, r_c: self.r_c, z_c: self.z_c, gamma: self.gamma }
    }
}

/// `s0 = e^{3 pi / (4 b0)}`.
pub fn initial_rescaled_time(b0: f64) -> f64 {
    (0.75 * std::f64::consts::PI / b0).exp()
}
