use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{fmt_f64, key_values};
use crate::error::{Error, Result};
use crate::profiles::{
    profile_energy, radial_integral, solve_qb, solve_radiation, truncate, GroundState, RadialProfile, Radiation,
    TruncatedProfile,
};

pub const BUNDLE_HEADER: &str = "RINGBLOW-PROFILE v1";

/// A solved profile with its radiation and scalar summaries.
#[derive(Debug, Clone)]
pub struct ProfileBundle {
    pub profile: TruncatedProfile,
    pub radiation: Radiation,
    pub q0: f64,
    /// `(int |Q~_b|^2 - int Q^2) / b^2` at this b.
    pub d0: f64,
    /// `E(Q~_b)`.
    pub energy: f64,
}

impl ProfileBundle {
    pub fn solve(b: f64, eta: f64, q: &GroundState) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::Precondition(format!("profile bundle needs b > 0, got {b}")));
        }
        let p = solve_qb(b, eta, 1e-13, q.q0)?;
        let (tq, psi) = truncate(Arc::new(p));
        let radiation = solve_radiation(&tq, &psi, 3.0 * tq.r_b, 0.005)?;
        let (energy, _) = profile_energy(&tq, &psi)?;
        let d0 = (radial_integral(&tq, |_, s| s.q.norm_sqr()) - q.mass()) / (b * b);
        Ok(Self { profile: tq, radiation, q0: q.q0, d0, energy })
    }

    /// Header, key = value lines, then the columns
    /// `R Re_Q Im_Q Sigma Theta Re_Psi Im_Psi Re_zeta Im_zeta` on [0, R_b].
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let tq = &self.profile;
        let h = tq.spacing();
        writeln!(w, "{BUNDLE_HEADER}")?;
        let keys = [
            ("b", tq.b),
            ("eta", tq.eta),
            ("h", h),
            ("R_b", tq.r_b),
            ("q0", self.q0),
            ("Gamma_b", self.radiation.gamma_b),
            ("d0", self.d0),
            ("E", self.energy),
        ];
        let pairs: Vec<(&str, String)> = keys.iter().map(|&(k, v)| (k, fmt_f64(v))).collect();
        w.write_all(key_values(&pairs).as_bytes())?;
        let n = (tq.r_b / h).round() as usize;
        for k in 0..=n {
            let r = (k as f64 * h).min(tq.r_b);
            let q: C64 = tq.sample(r).q;
            let (psi, _) = tq.psi(r);
            let (zeta, _) = self.radiation.eval(r);
            let row = [r, q.re, q.im, tq.sigma(r), tq.theta(r), psi.re, psi.im, zeta.re, zeta.im];
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

pub fn write_profile_bundle(b: f64, eta: f64, q: &GroundState, w: impl Write) -> Result<ProfileBundle> {
    let bundle = ProfileBundle::solve(b, eta, q)?;
    bundle.write(w)?;
    Ok(bundle)
}
