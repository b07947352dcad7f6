//! Radial profiles of the rescaled problem: the ground state Q, the
//! self-similar profiles Q_b, their truncation with error Psi_b, the outgoing
//! radiation zeta_b, and the scalar quantities built from them.

mod ground;
mod radiation;
mod scalars;
mod selfsimilar;
mod truncated;

use num_complex::Complex64 as C64;

pub use ground::{solve_ground_state, GroundState};
pub use radiation::{solve_radiation, Radiation};
pub use scalars::{
    mass_excess_derivative, momentum_degeneracy_check, profile_energy, qb_residual, qp5_residual, MassExcessFit,
    Qp5Check,
};
pub use selfsimilar::{solve_qb, turning_radius, SelfSimilarProfile};
pub use truncated::{truncate, CutoffShape, ProfileError, TruncatedProfile};

/// Default truncation parameter eta.
pub const DEFAULT_ETA: f64 = 0.1;
/// Largest admissible eta.
pub const ETA_MAX: f64 = 0.2;

/// A radial function and its first two radial derivatives at one radius.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProfileSample {
    pub q: C64,
    pub dq: C64,
    pub d2q: C64,
}

impl ProfileSample {
    /// `Lambda f = f + R f'`.
    #[inline]
    pub fn lambda(&self, r: f64) -> C64 {
        self.q + self.dq * r
    }

    /// `Lambda^2 f = f + 3 R f' + R^2 f''`.
    #[inline]
    pub fn lambda2(&self, r: f64) -> C64 {
        self.q + self.dq * (3.0 * r) + self.d2q * (r * r)
    }

    pub fn conj(&self) -> Self {
        Self { q: self.q.conj(), dq: self.dq.conj(), d2q: self.d2q.conj() }
    }
}

/// A (possibly complex) radial profile of the rescaled radius.
pub trait RadialProfile: Send + Sync {
    fn sample(&self, r: f64) -> ProfileSample;
    /// Radius beyond which the profile vanishes or is negligible.
    fn support(&self) -> f64;
    fn b(&self) -> f64;
    /// Suggested radial quadrature spacing.
    fn spacing(&self) -> f64;
    /// Radii where derivatives of the profile jump (quadrature breakpoints).
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.support()]
    }
}

/// `2 pi int f(R) R dR` over the profile support by piecewise Simpson.
pub fn radial_integral(p: &dyn RadialProfile, f: impl Fn(f64, &ProfileSample) -> f64) -> f64 {
    let h = p.spacing();
    2.0 * std::f64::consts::PI * crate::numerics::simpson_pieces(|r| r * f(r, &p.sample(r)), &p.breakpoints(), h)
}
