use num_complex::Complex64 as C64;

use super::{ProfileError, TruncatedProfile};
use crate::error::{Error, Result};
use crate::numerics::{hermite, simpson_samples};
use crate::tridiag;

/// Outgoing solution of `Delta zeta - zeta + i b Lambda zeta = Psi_b`.
#[derive(Debug, Clone)]
pub struct Radiation {
    pub b: f64,
    pub eta: f64,
    pub h: f64,
    pub r_outer: f64,
    pub zeta: Vec<C64>,
    pub dzeta: Vec<C64>,
    pub gamma_b: f64,
    pub grad_norm_sq: f64,
    pub condition_estimate: f64,
}

/// Solves for `zeta = w e^{-i b R^2/4}` where
/// `w'' + w'/R + (b^2 R^2/4 - 1) w = -D` (the real part of Psi_b in the
/// rotating gauge), with `w'(0) = 0` and the outgoing WKB condition
/// `w' = (i k - k'/(2k) - 1/(2R)) w` at `r_outer`, by second-order finite
/// differences on spacing `h`.
pub fn solve_radiation(tq: &TruncatedProfile, psi: &ProfileError, r_outer: f64, h: f64) -> Result<Radiation> {
    if psi.b != tq.b {
        return Err(Error::Precondition(format!("profile error for b = {} used with b = {}", psi.b, tq.b)));
    }
    let b = tq.b;
    if !(b > 0.0) {
        return Err(Error::Precondition("radiation needs b > 0".into()));
    }
    if r_outer < 3.0 * tq.r_b * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("R_outer = {r_outer} is below 3 R_b = {}", 3.0 * tq.r_b)));
    }
    let n = (r_outer / h).ceil() as usize;
    let h = r_outer / n as f64;
    let zero = C64::new(0.0, 0.0);
    let mut lo = vec![zero; n + 1];
    let mut di = vec![zero; n + 1];
    let mut up = vec![zero; n + 1];
    let mut rhs = vec![zero; n + 1];
    let ih2 = 1.0 / (h * h);
    // Psi in the rotating gauge is real; interpolate it linearly from the
    // profile-grid samples
    let hat: Vec<f64> = psi
        .samples
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let r = k as f64 * psi.h;
            (v * C64::from_polar(1.0, 0.25 * b * r * r)).re
        })
        .collect();
    let source = |r: f64| {
        let s = r / psi.h;
        let k = s.floor() as usize;
        if k + 1 >= hat.len() {
            return 0.0;
        }
        let t = s - k as f64;
        (1.0 - t) * hat[k] + t * hat[k + 1]
    };
    let mut any = false;
    for i in 0..=n {
        let r = i as f64 * h;
        let src = source(r);
        any |= src != 0.0;
        rhs[i] = C64::new(src, 0.0);
        let pot = 0.25 * b * b * r * r - 1.0;
        if i == 0 {
            di[0] = C64::new(-4.0 * ih2 + pot, 0.0);
            up[0] = C64::new(4.0 * ih2, 0.0);
            continue;
        }
        let adv = 1.0 / (2.0 * h * r);
        lo[i] = C64::new(ih2 - adv, 0.0);
        di[i] = C64::new(-2.0 * ih2 + pot, 0.0);
        up[i] = C64::new(ih2 + adv, 0.0);
        if i == n {
            let k = pot.sqrt();
            let dk = 0.25 * b * b * r / k;
            let beta = C64::new(-dk / (2.0 * k) - 1.0 / (2.0 * r), k);
            // ghost w_{n+1} = w_{n-1} + 2 h beta w_n
            lo[i] += up[i];
            di[i] += up[i] * beta * (2.0 * h);
            up[i] = zero;
        }
    }
    if !any {
        return Ok(Radiation {
            b,
            eta: tq.eta,
            h,
            r_outer,
            zeta: vec![zero; n + 1],
            dzeta: vec![zero; n + 1],
            gamma_b: 0.0,
            grad_norm_sq: 0.0,
            condition_estimate: 1.0,
        });
    }
    let factor = tridiag::TriFactor::new(&lo, &di, &up)
        .ok_or_else(|| Error::Resolution("singular radiation system; reduce h".into()))?;
    let mut w = rhs;
    factor.solve(&mut w);
    let mut probe = vec![C64::new(1.0, 0.0); n + 1];
    factor.solve(&mut probe);
    let a_norm = (0..=n).map(|i| lo[i].norm() + di[i].norm() + up[i].norm()).fold(0.0f64, f64::max);
    let cond = a_norm * probe.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if !(cond <= 1e12) {
        return Err(Error::Resolution(format!("radiation system condition ~{cond:.3e}; reduce h")));
    }
    let mut dw = vec![zero; n + 1];
    for i in 1..n {
        dw[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
    }
    {
        let r = r_outer;
        let k = (0.25 * b * b * r * r - 1.0).sqrt();
        let dk = 0.25 * b * b * r / k;
        dw[n] = w[n] * C64::new(-dk / (2.0 * k) - 1.0 / (2.0 * r), k);
    }
    let mut zeta = Vec::with_capacity(n + 1);
    let mut dzeta = Vec::with_capacity(n + 1);
    let mut grad = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let r = i as f64 * h;
        let e = C64::from_polar(1.0, -0.25 * b * r * r);
        let dz = dw[i] - C64::new(0.0, 0.5 * b * r) * w[i];
        zeta.push(w[i] * e);
        dzeta.push(dz * e);
        grad.push(dz.norm_sqr() * r);
    }
    let grad_norm_sq = 2.0 * std::f64::consts::PI * simpson_samples(&grad, h);
    // mean of R^2 |zeta|^2 over the last local wavelength 2 pi / k
    let k_out = (0.25 * b * b * r_outer * r_outer - 1.0).sqrt();
    let window = ((2.0 * std::f64::consts::PI / k_out) / h).ceil() as usize;
    let start = n.saturating_sub(window);
    let vals: Vec<f64> = (start..=n)
        .map(|i| {
            let r = i as f64 * h;
            r * r * w[i].norm_sqr()
        })
        .collect();
    let gamma_b = simpson_samples(&vals, h) / ((n - start) as f64 * h);
    Ok(Radiation { b, eta: tq.eta, h, r_outer, zeta, dzeta, gamma_b, grad_norm_sq, condition_estimate: cond })
}

impl Radiation {
    /// (zeta, zeta') at radius r; zero beyond r_outer.
    pub fn eval(&self, r: f64) -> (C64, C64) {
        if r > self.r_outer {
            return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        }
        hermite(&self.zeta, &self.dzeta, self.h, r)
    }

    /// Oscillation-averaged `R^2 |zeta|^2` over a window of one local
    /// wavelength centred at r.
    pub fn averaged_flux(&self, r: f64) -> f64 {
        let k = (0.25 * self.b * self.b * r * r - 1.0).max(1e-6).sqrt();
        let half = std::f64::consts::PI / k;
        let lo = (r - half).max(0.0);
        let hi = (r + half).min(self.r_outer);
        crate::numerics::simpson(
            |x| {
                let z = self.eval(x).0;
                x * x * z.norm_sqr()
            },
            lo,
            hi,
            64,
        ) / (hi - lo)
    }
}
