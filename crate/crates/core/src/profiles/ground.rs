use crate::error::{Error, Result};
use crate::numerics::{bessel_k, hermite, rk4};

use super::{ProfileSample, RadialProfile};
use num_complex::Complex64 as C64;

/// Positive radial solution of `Q'' + Q'/R - Q + Q^3 = 0` in 2D.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub h: f64,
    pub r_max: f64,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub q0: f64,
    /// Radius where the shooting solution hands over to the K0 tail.
    pub r_match: f64,
    /// Width of the final bisection bracket on Q(0).
    pub bracket: f64,
    /// Max ODE residual on [h, r_match], second derivative by fourth-order
    /// differences of the stored Q'.
    pub residual: f64,
    tail_c: f64,
}

fn rhs(r: f64, y: [f64; 2]) -> [f64; 2] {
    let p = y[0];
    let pp = if r == 0.0 { 0.5 * (p - p * p * p) } else { -y[1] / r + p - p * p * p };
    [y[1], pp]
}

#[derive(PartialEq, Eq, Debug)]
enum Shot {
    Crosses,
    TurnsUp,
}

fn classify(q0: f64, h: f64) -> Shot {
    let mut y = [q0, 0.0];
    let n = (30.0 / h) as usize;
    for k in 0..n {
        y = rk4(rhs, k as f64 * h, y, h);
        if y[0] < 0.0 {
            return Shot::Crosses;
        }
        if y[1] > 0.0 {
            return Shot::TurnsUp;
        }
    }
    Shot::TurnsUp
}

fn trajectory(q0: f64, h: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::with_capacity(n + 1);
    let mut d = Vec::with_capacity(n + 1);
    let mut y = [q0, 0.0];
    v.push(y[0]);
    d.push(y[1]);
    for k in 0..n {
        y = rk4(rhs, k as f64 * h, y, h);
        v.push(y[0]);
        d.push(y[1]);
    }
    (v, d)
}

/// Shooting on Q(0) with RK4 at spacing `h`; bisection stops once the
/// bracket on Q(0) is below `tol` (or at the floating-point limit).
pub fn solve_ground_state(h: f64, tol: f64) -> Result<GroundState> {
    if !(h > 0.0 && h <= 0.02) {
        return Err(Error::Precondition(format!("ground state spacing must be in (0, 0.02], got {h}")));
    }
    if !(tol >= 1e-12) {
        return Err(Error::Precondition(format!("ground state tolerance must be >= 1e-12, got {tol}")));
    }
    let (mut lo, mut hi) = (0.1, 10.0);
    if classify(lo, h) != Shot::TurnsUp || classify(hi, h) != Shot::Crosses {
        return Err(Error::Solver("no bisection bracket for Q(0) in [0.1, 10]".into()));
    }
    // the bracket is always driven to the floating-point limit so that the
    // shooting solution tracks the decaying branch far enough out
    let target = tol.min(1e-13);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= target * 1e-3 {
            break;
        }
        match classify(mid, h) {
            Shot::Crosses => hi = mid,
            Shot::TurnsUp => lo = mid,
        }
    }
    let n_shoot = (16.0 / h).ceil() as usize;
    let (vl, dl) = trajectory(lo, h, n_shoot);
    let (vh, _) = trajectory(hi, h, n_shoot);
    // hand over to the tail before the two bracket trajectories separate
    let mut m = n_shoot;
    for k in 1..=n_shoot {
        let sep = (vh[k] - vl[k]).abs() > 1e-6 * vl[k].abs();
        if sep || vl[k] < 1e-4 * lo || dl[k] >= 0.0 {
            m = k;
            break;
        }
    }
    let r_match = m as f64 * h;
    if r_match < 8.0 {
        return Err(Error::Solver(format!("shooting solution separates early (R = {r_match:.3})")));
    }
    let tail_c = vl[m] / bessel_k(0, r_match);
    let n = ((20.0f64.max(r_match + 4.0)) / h).ceil() as usize;
    let n = n + (n & 1);
    let mut values = vl[..=m].to_vec();
    let mut derivs = dl[..=m].to_vec();
    for k in m + 1..=n {
        let r = k as f64 * h;
        values.push(tail_c * bessel_k(0, r));
        derivs.push(-tail_c * bessel_k(1, r));
    }
    let q0 = lo;
    let mut residual = 0.0f64;
    for k in 2..m.saturating_sub(2) {
        let r = k as f64 * h;
        let d2 = (-derivs[k + 2] + 8.0 * derivs[k + 1] - 8.0 * derivs[k - 1] + derivs[k - 2]) / (12.0 * h);
        let q = values[k];
        residual = residual.max((d2 + derivs[k] / r - q + q * q * q).abs());
    }
    let gs = GroundState { h, r_max: n as f64 * h, values, derivs, q0, r_match, bracket: hi - lo, residual, tail_c };
    if !(gs.values.iter().all(|&q| q > 0.0) && gs.values.windows(2).all(|w| w[1] < w[0])) {
        return Err(Error::Solver("ground state not positive and decreasing".into()));
    }
    if gs.values[n] >= 1e-8 * q0 {
        return Err(Error::Solver("ground state tail not decayed at R_max".into()));
    }
    Ok(gs)
}

impl GroundState {
    /// (Q, Q', Q'') at radius r; beyond the matching radius the K0 tail is
    /// evaluated directly.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let r = r.abs();
        if r >= self.r_match {
            let k0 = bessel_k(0, r);
            let k1 = bessel_k(1, r);
            return (self.tail_c * k0, -self.tail_c * k1, self.tail_c * (k0 + k1 / r));
        }
        let (q, dq) = hermite(&self.values, &self.derivs, self.h, r);
        let d2q = if r < 1e-8 { 0.5 * (q - q * q * q) } else { -dq / r + q - q * q * q };
        (q, dq, d2q)
    }

    pub fn grid_r(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// `int Q^2` over R^2.
    pub fn mass(&self) -> f64 {
        super::radial_integral(self, |_, s| s.q.norm_sqr())
    }

    /// `int |grad Q|^2`.
    pub fn grad_norm_sq(&self) -> f64 {
        super::radial_integral(self, |_, s| s.dq.norm_sqr())
    }

    /// `int Q^4`.
    pub fn l4_norm4(&self) -> f64 {
        super::radial_integral(self, |_, s| s.q.norm_sqr() * s.q.norm_sqr())
    }
}

impl RadialProfile for GroundState {
    fn sample(&self, r: f64) -> ProfileSample {
        let (q, dq, d2q) = self.eval(r);
        ProfileSample { q: C64::new(q, 0.0), dq: C64::new(dq, 0.0), d2q: C64::new(d2q, 0.0) }
    }

    fn support(&self) -> f64 {
        self.r_max
    }

    fn b(&self) -> f64 {
        0.0
    }

    fn spacing(&self) -> f64 {
        self.h
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.r_match, self.r_max]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_values() {
        let q = solve_ground_state(0.01, 1e-12).unwrap();
        assert!((q.q0 - 2.206_20).abs() < 5e-4, "q0 = {}", q.q0);
        let m = q.mass();
        assert!((m - 11.7009).abs() < 2e-3, "mass = {m}");
        let g = q.grad_norm_sq();
        let l4 = q.l4_norm4();
        assert!((g / m - 1.0).abs() < 1e-5, "{g} vs {m}");
        assert!((0.5 * l4 / m - 1.0).abs() < 1e-5, "{l4} vs {m}");
        assert!(q.residual < 1e-6, "residual {}", q.residual);
        assert!(q.bracket <= 1e-12);
        assert!(q.values[q.values.len() - 1] < 1e-8 * q.q0);
    }

    #[test]
    fn refinement_moves_q0_little() {
        let a = solve_ground_state(0.02, 1e-12).unwrap();
        let b = solve_ground_state(0.01, 1e-12).unwrap();
        assert!((a.q0 - b.q0).abs() <= 4.0 * 5e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(solve_ground_state(0.05, 1e-10), Err(Error::Precondition(_))));
        assert!(matches!(solve_ground_state(0.01, 1e-14), Err(Error::Precondition(_))));
    }

    #[test]
    fn tail_is_continuous() {
        let q = solve_ground_state(0.01, 1e-12).unwrap();
        let (a, da, _) = q.eval(q.r_match - 1e-9);
        let (b, db, _) = q.eval(q.r_match + 1e-9);
        // the two points are 2e-9 apart and |Q'/Q| ~ 1
        assert!((a - b).abs() < 1e-8 * a);
        assert!((da - db).abs() < 1e-6 * da.abs());
    }
}
