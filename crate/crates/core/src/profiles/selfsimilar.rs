use crate::error::{Error, Result};
use crate::numerics::{hermite, rk4};

/// `R_b = (2/b) sqrt(1 - eta)`.
pub fn turning_radius(b: f64, eta: f64) -> f64 {
    2.0 / b * (1.0 - eta).sqrt()
}

/// Real amplitude P_b of `Q_b = P_b e^{-i b R^2 / 4}` on [0, R_b], solving
/// `P'' + P'/R - P + (b^2 R^2 / 4) P + P^3 = 0`, `P'(0) = 0`, `P(R_b) = 0`.
#[derive(Debug, Clone)]
pub struct SelfSimilarProfile {
    pub b: f64,
    pub eta: f64,
    pub r_b: f64,
    pub h: f64,
    pub p_values: Vec<f64>,
    pub p_derivs: Vec<f64>,
    pub p0: f64,
    /// Achieved `|P_b(0) - Q(0)|`.
    pub eps_star: f64,
    /// Relative mismatch of (P, P') at the matching radius.
    pub match_residual: f64,
    pub r_match: f64,
}

struct Rhs {
    b2: f64,
    nonlinear: bool,
}

impl Rhs {
    #[inline]
    fn f(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let p = y[0];
        let cubic = if self.nonlinear { p * p * p } else { 0.0 };
        if r == 0.0 {
            [y[1], 0.5 * (p - cubic)]
        } else {
            [y[1], -y[1] / r + (1.0 - 0.25 * self.b2 * r * r) * p - cubic]
        }
    }
}

/// Backward solution of the linear equation from (0, -1) at R_b, stored with
/// a running log-scale: actual value = exp(sigma + log_scale[k]) * y[k].
struct LinearBranch {
    y: Vec<[f64; 2]>,
    log_scale: Vec<f64>,
}

fn linear_branch(b: f64, h: f64, n: usize, m: usize) -> LinearBranch {
    let rhs = Rhs { b2: b * b, nonlinear: false };
    let mut y = vec![[0.0; 2]; n + 1];
    let mut log_scale = vec![0.0; n + 1];
    let mut cur = [0.0, -1.0];
    let mut ls = 0.0;
    y[n] = cur;
    for k in (m..n).rev() {
        cur = rk4(|r, v| rhs.f(r, v), (k + 1) as f64 * h, cur, -h);
        let mag = cur[0].abs().max(cur[1].abs());
        if mag > 1e100 {
            cur = [cur[0] / mag, cur[1] / mag];
            ls += mag.ln();
        }
        y[k] = cur;
        log_scale[k] = ls;
    }
    LinearBranch { y, log_scale }
}

struct Shooter {
    b: f64,
    h: f64,
    n: usize,
    m: usize,
    lin: LinearBranch,
}

impl Shooter {
    fn forward(&self, p0: f64, store: Option<&mut Vec<[f64; 2]>>) -> [f64; 2] {
        let rhs = Rhs { b2: self.b * self.b, nonlinear: true };
        let mut y = [p0, 0.0];
        let mut out = store;
        if let Some(v) = out.as_deref_mut() {
            v.push(y);
        }
        for k in 0..self.m {
            y = rk4(|r, v| rhs.f(r, v), k as f64 * self.h, y, self.h);
            if let Some(v) = out.as_deref_mut() {
                v.push(y);
            }
        }
        y
    }

    /// First node (scanning down from R_b) where the scaled linear branch
    /// exceeds 1e-10; the cubic term is negligible above it.
    fn switch_node(&self, sigma: f64) -> usize {
        let cut = (1e-10f64).ln();
        for k in (self.m..=self.n).rev() {
            let y = self.lin.y[k];
            let mag = y[0].abs().max(y[1].abs());
            if mag > 0.0 && sigma + self.lin.log_scale[k] + mag.ln() > cut {
                return k;
            }
        }
        self.m
    }

    fn backward(&self, sigma: f64, store: Option<&mut Vec<[f64; 2]>>) -> [f64; 2] {
        let rhs = Rhs { b2: self.b * self.b, nonlinear: true };
        let s = self.switch_node(sigma);
        let scale = |k: usize| (sigma + self.lin.log_scale[k]).exp();
        let mut out = store;
        if let Some(v) = out.as_deref_mut() {
            v.resize(self.n + 1, [0.0; 2]);
            for (k, slot) in v.iter_mut().enumerate().skip(s) {
                let c = scale(k);
                *slot = [c * self.lin.y[k][0], c * self.lin.y[k][1]];
            }
        }
        let c = scale(s);
        let mut y = [c * self.lin.y[s][0], c * self.lin.y[s][1]];
        for k in (self.m..s).rev() {
            y = rk4(|r, v| rhs.f(r, v), (k + 1) as f64 * self.h, y, -self.h);
            if let Some(v) = out.as_deref_mut() {
                v[k] = y;
            }
        }
        y
    }

    fn mismatch(&self, p0: f64, sigma: f64) -> [f64; 2] {
        let f = self.forward(p0, None);
        let g = self.backward(sigma, None);
        [f[0] - g[0], f[1] - g[1]]
    }
}

/// Two-sided shooting for P_b: forward from R = 0 on P(0), backward from R_b
/// on the slope `P'(R_b) = -e^sigma`, Newton matching of (P, P') at an
/// interior radius. `q0_ref` is Q(0), the starting guess and the reference
/// for the reported closeness.
pub fn solve_qb(b: f64, eta: f64, tol: f64, q0_ref: f64) -> Result<SelfSimilarProfile> {
    if !(b > 0.0 && b <= 0.5) {
        return Err(Error::Precondition(format!("solve_qb needs 0 < b <= 0.5, got {b}")));
    }
    if !(eta > 0.0 && eta <= super::ETA_MAX) {
        return Err(Error::Precondition(format!("solve_qb needs 0 < eta <= 0.2, got {eta}")));
    }
    let r_b = turning_radius(b, eta);
    let h_target = (b / 100.0).clamp(0.001, 0.005);
    let n = (r_b / h_target).ceil() as usize;
    let n = n + (n & 1);
    let h = r_b / n as f64;
    let m = ((4.0f64.min(0.5 * r_b)) / h).round() as usize;
    let shooter = Shooter { b, h, n, m, lin: linear_branch(b, h, n, m) };

    let (lo, hi) = (q0_ref - 0.5, q0_ref + 0.5);
    let not_found = || Error::ProfileNotFound { b, lo, hi };
    // P_b(0) sits about 0.54 b^2 below Q(0); step down further while the
    // forward shot crosses zero before the matching radius
    let mut p0 = q0_ref - 0.54 * b * b;
    let mut fwd = shooter.forward(p0, None);
    while !(fwd[0] > 0.0 && fwd[1] < 0.0) {
        p0 -= 1e-3;
        if p0 < lo {
            return Err(not_found());
        }
        fwd = shooter.forward(p0, None);
    }
    let ym = shooter.lin.y[m];
    if !(ym[0] > 0.0) {
        return Err(not_found());
    }
    let mut sigma = fwd[0].ln() - shooter.lin.log_scale[m] - ym[0].ln();
    let scale = fwd[0].abs().max(fwd[1].abs());
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs()) / scale;
    let mut f = shooter.mismatch(p0, sigma);
    let tol = tol.max(1e-14);
    let mut converged = norm(f) <= tol;
    for _ in 0..60 {
        if converged {
            break;
        }
        let dp = 1e-7;
        let ds = 1e-7;
        let fp = shooter.mismatch(p0 + dp, sigma);
        let fs = shooter.mismatch(p0, sigma + ds);
        let j = [[(fp[0] - f[0]) / dp, (fs[0] - f[0]) / ds], [(fp[1] - f[1]) / dp, (fs[1] - f[1]) / ds]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(not_found());
        }
        let step_p = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let step_s = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut t = 1.0;
        loop {
            let (np, ns) = (p0 + t * step_p, sigma + t * step_s);
            let nf = shooter.mismatch(np, ns);
            if norm(nf) < norm(f) || t < 1e-4 {
                p0 = np;
                sigma = ns;
                f = nf;
                break;
            }
            t *= 0.5;
        }
        if (p0 - q0_ref).abs() > 0.5 {
            return Err(not_found());
        }
        // Newton steps at the round-off floor of P(0) ~ 2 also end the loop
        converged = norm(f) <= tol || (step_p.abs() < 1e-13 && step_s.abs() < 1e-11);
    }
    if !converged {
        return Err(not_found());
    }

    let mut fwd_store = Vec::with_capacity(m + 1);
    shooter.forward(p0, Some(&mut fwd_store));
    let mut bwd_store = Vec::new();
    shooter.backward(sigma, Some(&mut bwd_store));
    let mut p_values = Vec::with_capacity(n + 1);
    let mut p_derivs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let y = if k <= m { fwd_store[k] } else { bwd_store[k] };
        p_values.push(y[0]);
        p_derivs.push(y[1]);
    }
    // positivity on [0, R_b): the forward part directly, the backward part
    // through the unscaled branch (scaled values may underflow to 0)
    let s = shooter.switch_node(sigma);
    let positive = fwd_store.iter().all(|y| y[0] > 0.0)
        && (m + 1..s).all(|k| bwd_store[k][0] > 0.0)
        && (s.max(m + 1)..n).all(|k| shooter.lin.y[k][0] > 0.0);
    if !positive {
        return Err(Error::Inconsistency(format!("P_b changes sign before R_b (b = {b})")));
    }
    Ok(SelfSimilarProfile {
        b,
        eta,
        r_b,
        h,
        p_values,
        p_derivs,
        p0,
        eps_star: (p0 - q0_ref).abs(),
        match_residual: norm(f),
        r_match: m as f64 * h,
    })
}

impl SelfSimilarProfile {
    /// (P, P', P'') at radius r in [0, R_b].
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (p, dp) = hermite(&self.p_values, &self.p_derivs, self.h, r);
        let d2p = if r < 1e-8 {
            0.5 * (p - p * p * p)
        } else {
            -dp / r + (1.0 - 0.25 * self.b * self.b * r * r) * p - p * p * p
        };
        (p, dp, d2p)
    }
}
