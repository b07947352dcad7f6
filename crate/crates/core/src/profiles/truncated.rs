use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{GroundState, ProfileSample, RadialProfile, SelfSimilarProfile};
use crate::cutoffs::smoothstep;

/// Shape of the transition band of the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffShape {
    /// `1 - s(x)` with the quintic smoothstep s.
    QuinticSmoothstep,
    /// No cutoff (the b = 0 profile Q itself).
    None,
}

#[derive(Debug, Clone)]
enum Base {
    Ground(Arc<GroundState>),
    Shot(Arc<SelfSimilarProfile>),
}

/// `Q~_b = phi_b Q_b = Sigma + i Theta`, supported in R <= R_b.
#[derive(Debug, Clone)]
pub struct TruncatedProfile {
    base: Base,
    pub b: f64,
    pub eta: f64,
    pub r_b: f64,
    pub r_b_minus: f64,
    pub shape: CutoffShape,
}

/// `Psi_b` on the profile grid and its weighted sup norms.
#[derive(Debug, Clone)]
pub struct ProfileError {
    pub b: f64,
    pub h: f64,
    /// Samples of Psi_b at R = k h for R in [0, R_b].
    pub samples: Vec<C64>,
    /// `sup |P(R) Psi^(k)|` for `P in {1, R, R^2}` (rows) and `k in {0, 1}`
    /// (columns).
    pub sup_norms: [[f64; 2]; 3],
}

/// Multiplies Q_b by the cutoff and assembles Psi_b.
pub fn truncate(profile: Arc<SelfSimilarProfile>) -> (TruncatedProfile, ProfileError) {
    let r_b = profile.r_b;
    let tp = TruncatedProfile {
        b: profile.b,
        eta: profile.eta,
        r_b,
        r_b_minus: (1.0 - profile.eta).sqrt() * r_b,
        shape: CutoffShape::QuinticSmoothstep,
        base: Base::Shot(profile),
    };
    let err = tp.profile_error();
    (tp, err)
}

impl TruncatedProfile {
    /// The b = 0 member: Q itself, no cutoff, Psi = 0.
    pub fn flat(q: Arc<GroundState>) -> Self {
        Self { b: 0.0, eta: 0.0, r_b: q.r_max, r_b_minus: q.r_max, shape: CutoffShape::None, base: Base::Ground(q) }
    }

    fn base_eval(&self, r: f64) -> (f64, f64, f64) {
        match &self.base {
            Base::Ground(q) => q.eval(r),
            Base::Shot(p) => p.eval(r),
        }
    }

    pub fn base_spacing(&self) -> f64 {
        match &self.base {
            Base::Ground(q) => q.h,
            Base::Shot(p) => p.h,
        }
    }

    pub fn self_similar(&self) -> Option<&SelfSimilarProfile> {
        match &self.base {
            Base::Shot(p) => Some(p),
            Base::Ground(_) => None,
        }
    }

    /// phi and its first three derivatives.
    pub fn cutoff(&self, r: f64) -> [f64; 4] {
        if self.shape == CutoffShape::None || r <= self.r_b_minus {
            return [1.0, 0.0, 0.0, 0.0];
        }
        if r >= self.r_b {
            return [0.0; 4];
        }
        let w = self.r_b - self.r_b_minus;
        let s = smoothstep((r - self.r_b_minus) / w);
        [1.0 - s[0], -s[1] / w, -s[2] / (w * w), -s[3] / (w * w * w)]
    }

    /// Real amplitude `phi P` with two derivatives.
    pub fn amplitude(&self, r: f64) -> (f64, f64, f64) {
        if self.shape != CutoffShape::None && r >= self.r_b {
            return (0.0, 0.0, 0.0);
        }
        let (p, dp, d2p) = self.base_eval(r);
        let [f, df, d2f, _] = self.cutoff(r);
        (f * p, df * p + f * dp, d2f * p + 2.0 * df * dp + f * d2p)
    }

    /// `-D` with `Psi = -D e^{-i b R^2 / 4}`, and its derivative:
    /// `D = (phi'' + phi'/R) P + 2 phi' P' + (phi^3 - phi) P^3`.
    pub fn psi_real(&self, r: f64) -> (f64, f64) {
        // closed interval: at the ends Psi' takes its one-sided limit from inside
        if self.shape == CutoffShape::None || r < self.r_b_minus || r > self.r_b {
            return (0.0, 0.0);
        }
        let (p, dp, d2p) = self.base_eval(r);
        let w = self.r_b - self.r_b_minus;
        let s = crate::cutoffs::smoothstep_poly((r - self.r_b_minus) / w);
        let [f, df, d2f, d3f] = [1.0 - s[0], -s[1] / w, -s[2] / (w * w), -s[3] / (w * w * w)];
        let lap = d2f + df / r;
        let dlap = d3f + d2f / r - df / (r * r);
        let p3 = p * p * p;
        let d = lap * p + 2.0 * df * dp + (f * f * f - f) * p3;
        let dd = dlap * p
            + lap * dp
            + 2.0 * d2f * dp
            + 2.0 * df * d2p
            + (3.0 * f * f - 1.0) * df * p3
            + (f * f * f - f) * 3.0 * p * p * dp;
        (-d, -dd)
    }

    /// (Psi_b, Psi_b') at radius r.
    pub fn psi(&self, r: f64) -> (C64, C64) {
        let (v, dv) = self.psi_real(r);
        let th = -0.25 * self.b * r * r;
        let e = C64::from_polar(1.0, th);
        let dth = -0.5 * self.b * r;
        (e * v, e * C64::new(dv, dth * v))
    }

    pub fn sigma(&self, r: f64) -> f64 {
        self.sample(r).q.re
    }

    pub fn theta(&self, r: f64) -> f64 {
        self.sample(r).q.im
    }

    fn profile_error(&self) -> ProfileError {
        let h = self.base_spacing();
        let n = (self.r_b / h).round() as usize;
        let mut samples = Vec::with_capacity(n + 1);
        let mut sup = [[0.0f64; 2]; 3];
        for k in 0..=n {
            let r = k as f64 * h;
            let (p, dp) = self.psi(r);
            samples.push(p);
            for (row, w) in [1.0, r, r * r].iter().enumerate() {
                sup[row][0] = sup[row][0].max(w * p.norm());
                sup[row][1] = sup[row][1].max(w * dp.norm());
            }
        }
        ProfileError { b: self.b, h, samples, sup_norms: sup }
    }
}

impl RadialProfile for TruncatedProfile {
    fn sample(&self, r: f64) -> ProfileSample {
        let (a, da, d2a) = self.amplitude(r);
        if a == 0.0 && da == 0.0 && d2a == 0.0 {
            return ProfileSample::default();
        }
        let b = self.b;
        let e = C64::from_polar(1.0, -0.25 * b * r * r);
        let t1 = -0.5 * b * r;
        let t2 = -0.5 * b;
        ProfileSample {
            q: e * a,
            dq: e * C64::new(da, t1 * a),
            d2q: e * C64::new(d2a - t1 * t1 * a, 2.0 * t1 * da + t2 * a),
        }
    }

    fn support(&self) -> f64 {
        self.r_b
    }

    fn b(&self) -> f64 {
        self.b
    }

    fn spacing(&self) -> f64 {
        self.base_spacing()
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.base {
            Base::Ground(q) => q.breakpoints(),
            Base::Shot(_) => vec![0.0, self.r_b_minus, self.r_b],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{solve_ground_state, solve_qb};

    #[test]
    fn cutoff_support_and_agreement() {
        let gs = solve_ground_state(0.01, 1e-12).unwrap();
        let p = Arc::new(solve_qb(0.2, 0.1, 1e-13, gs.q0).unwrap());
        let (tq, psi) = truncate(p.clone());
        for &r in &[0.0, 1.0, 5.0, tq.r_b_minus] {
            let s = tq.sample(r);
            let (pv, _, _) = p.eval(r);
            let qb = C64::from_polar(pv, -0.05 * r * r);
            assert!((s.q - qb).norm() < 1e-15);
            assert_eq!(psi.samples[(r / psi.h).floor() as usize], C64::new(0.0, 0.0));
        }
        assert_eq!(tq.sample(tq.r_b).q, C64::new(0.0, 0.0));
        assert_eq!(tq.sample(tq.r_b + 1.0).q, C64::new(0.0, 0.0));
        assert_eq!(tq.psi(tq.r_b + 0.1).0, C64::new(0.0, 0.0));
        assert!(psi.sup_norms[2][0] > 0.0);
    }

    #[test]
    fn flat_profile_is_real() {
        let gs = Arc::new(solve_ground_state(0.01, 1e-12).unwrap());
        let tq = TruncatedProfile::flat(gs);
        for k in 0..100 {
            let s = tq.sample(k as f64 * 0.1);
            assert_eq!(s.q.im, 0.0);
            assert_eq!(s.dq.im, 0.0);
        }
        assert_eq!(tq.psi(3.0).0, C64::new(0.0, 0.0));
    }

    #[test]
    fn derivatives_are_consistent() {
        let gs = solve_ground_state(0.01, 1e-12).unwrap();
        let p = Arc::new(solve_qb(0.25, 0.1, 1e-13, gs.q0).unwrap());
        let (tq, _) = truncate(p);
        let d = 1e-5;
        for &r in &[0.7, 3.3, tq.r_b_minus + 0.1, tq.r_b - 0.1] {
            let s = tq.sample(r);
            let fd = (tq.sample(r + d).q - tq.sample(r - d).q) / (2.0 * d);
            let fd2 = (tq.sample(r + d).dq - tq.sample(r - d).dq) / (2.0 * d);
            assert!((fd - s.dq).norm() < 1e-6, "dq at {r}");
            assert!((fd2 - s.d2q).norm() < 1e-5, "d2q at {r}");
            let (pv, dpv) = tq.psi(r);
            let fdp = (tq.psi(r + d).0 - tq.psi(r - d).0) / (2.0 * d);
            assert!((fdp - dpv).norm() < 1e-5 * (1.0 + pv.norm()), "psi' at {r}");
        }
    }
}
