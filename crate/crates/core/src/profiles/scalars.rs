use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{radial_integral, solve_qb, truncate, GroundState, ProfileError, RadialProfile, TruncatedProfile};
use crate::error::{Error, Result};
use crate::field::{apply_scaling_generator, laplacian_2d, RescaledGrid2D, Stencil};
use crate::numerics::simpson_pieces;

/// Least-squares slope of the mass excess against b^2.
#[derive(Debug, Clone)]
pub struct MassExcessFit {
    pub d0: f64,
    /// rms deviation from the fitted line.
    pub residual: f64,
    /// residual / (d0 * max b^2).
    pub relative_residual: f64,
    /// (b, int |Q~_b|^2 - int Q^2)
    pub samples: Vec<(f64, f64)>,
}

/// Fits `int |Q~_b|^2 - int Q^2` against b^2 through the origin.
pub fn mass_excess_derivative(eta: f64, b_samples: &[f64], q: &GroundState) -> Result<MassExcessFit> {
    if b_samples.len() < 3 {
        return Err(Error::Precondition("mass excess fit needs at least 3 values of b".into()));
    }
    if let Some(b) = b_samples.iter().find(|&&b| !(b > 0.0 && b <= 0.3)) {
        return Err(Error::Precondition(format!("b = {b} outside (0, 0.3]")));
    }
    let mq = q.mass();
    let mut samples = Vec::new();
    for &b in b_samples {
        let p = solve_qb(b, eta, 1e-13, q.q0)?;
        let (tq, _) = truncate(Arc::new(p));
        samples.push((b, radial_integral(&tq, |_, s| s.q.norm_sqr()) - mq));
    }
    let sxy: f64 = samples.iter().map(|(b, y)| b * b * y).sum();
    let sxx: f64 = samples.iter().map(|(b, _)| b.powi(4)).sum();
    let d0 = sxy / sxx;
    if !(d0 > 0.0) {
        return Err(Error::Inconsistency(format!("mass excess slope d0 = {d0} is not positive")));
    }
    let residual = (samples.iter().map(|(b, y)| (y - d0 * b * b).powi(2)).sum::<f64>() / samples.len() as f64).sqrt();
    let bmax2 = b_samples.iter().fold(0.0f64, |m, b| m.max(b * b));
    Ok(MassExcessFit { d0, residual, relative_residual: residual / (d0 * bmax2), samples })
}

/// `E(Q~_b) = 1/2 int |grad Q~_b|^2 - 1/4 int |Q~_b|^4` and the gap to
/// `-1/2 Re int Lambda Psi_b conj(Q~_b)`.
pub fn profile_energy(tq: &TruncatedProfile, psi: &ProfileError) -> Result<(f64, f64)> {
    if psi.b != tq.b {
        return Err(Error::Precondition(format!("profile error for b = {} used with b = {}", psi.b, tq.b)));
    }
    let e = radial_integral(tq, |_, s| 0.5 * s.dq.norm_sqr() - 0.25 * s.q.norm_sqr().powi(2));
    // Psi' jumps at both ends of the cutoff interval, so integrate over it alone
    let rhs = if tq.b == 0.0 {
        0.0
    } else {
        let f = |r: f64| {
            let (p, dp) = tq.psi(r);
            -0.5 * ((p + dp * r) * tq.sample(r).q.conj()).re * r
        };
        2.0 * std::f64::consts::PI * simpson_pieces(f, &[tq.r_b_minus, tq.r_b], tq.spacing())
    };
    Ok((e, (e - rhs).abs()))
}

/// `|Im int grad Q~_b conj Q~_b|` (vector norm, on a symmetric 2D grid) and
/// `|Im int y . grad Q~_b conj Q~_b + (b/2) ||R Q~_b||^2|` (radially).
pub fn momentum_degeneracy_check(tq: &TruncatedProfile) -> (f64, f64) {
    let h = 0.05;
    let g = RescaledGrid2D::new(h, tq.support() + 2.0 * h).expect("valid grid");
    let (mut px, mut py) = (0.0, 0.0);
    for i in 0..g.n_rt {
        let x = g.coord(i);
        for j in 0..g.n_zt {
            let y = g.coord(j);
            let r = x.hypot(y);
            if r == 0.0 || r >= tq.support() {
                continue;
            }
            let s = tq.sample(r);
            let m = (s.dq * s.q.conj()).im / r;
            px += g.weight(i, j) * m * x;
            py += g.weight(i, j) * m * y;
        }
    }
    let gap1 = px.hypot(py);
    let b = tq.b;
    let gap2 = radial_integral(tq, |r, s| (s.dq * s.q.conj()).im * r + 0.5 * b * r * r * s.q.norm_sqr()).abs();
    (gap1, gap2)
}

/// A stencil identity residual with the truncation-error scale of the
/// stencils involved.
#[derive(Debug, Clone, Copy)]
pub struct Qp5Check {
    pub residual: f64,
    pub truncation_estimate: f64,
}

fn samples_on(tq: &TruncatedProfile, g: &RescaledGrid2D) -> Vec<super::ProfileSample> {
    g.sample(|x, y| tq.sample(x.hypot(y)))
}

/// Sup norm of `Delta Q~ - Q~ + i b Lambda Q~ + Q~|Q~|^2 + Psi` with
/// second-order stencils for Delta and Lambda; the truncation estimate is
/// the sup difference between second- and fourth-order stencils.
pub fn qb_residual(tq: &TruncatedProfile, spacing: f64) -> Qp5Check {
    let g = RescaledGrid2D::new(spacing, tq.support() + 4.0 * spacing).expect("valid grid");
    let s = samples_on(tq, &g);
    let q: Vec<C64> = s.iter().map(|v| v.q).collect();
    let lap2 = laplacian_2d(&g, &q, Stencil::Second);
    let lap4 = laplacian_2d(&g, &q, Stencil::Fourth);
    let lam2 = apply_scaling_generator(&g, &q, Stencil::Second);
    let lam4 = apply_scaling_generator(&g, &q, Stencil::Fourth);
    let ib = C64::new(0.0, tq.b);
    let (mut res, mut est) = (0.0f64, 0.0f64);
    for i in 2..g.n_rt - 2 {
        for j in 2..g.n_zt - 2 {
            let k = g.idx(i, j);
            let r = g.coord(i).hypot(g.coord(j));
            let psi = tq.psi(r).0;
            let v = lap2[k] - q[k] + ib * lam2[k] + q[k] * q[k].norm_sqr() + psi;
            res = res.max(v.norm());
            est = est.max((lap2[k] - lap4[k]).norm() + tq.b * (lam2[k] - lam4[k]).norm());
        }
    }
    Qp5Check { residual: res, truncation_estimate: est }
}

/// Scaling identity: `Delta(Lambda Q~) - Lambda Q~ + Lambda Q~ |Q~|^2 +
/// 2 Q~ (Sigma Lambda Sigma + Theta Lambda Theta)` against
/// `2(Q~ - i b Lambda Q~ - Psi) - Lambda Psi - i b Lambda^2 Q~`, with Delta
/// from the stencil and Lambda-derivatives analytic.
pub fn qp5_residual(tq: &TruncatedProfile, spacing: f64, order: Stencil) -> Qp5Check {
    let g = RescaledGrid2D::new(spacing, tq.support() + 4.0 * spacing).expect("valid grid");
    let s = samples_on(tq, &g);
    let lq: Vec<C64> = (0..g.len())
        .map(|k| {
            let (i, j) = (k / g.n_zt, k % g.n_zt);
            s[k].lambda(g.coord(i).hypot(g.coord(j)))
        })
        .collect();
    let lap = laplacian_2d(&g, &lq, order);
    let lap2 = laplacian_2d(&g, &lq, Stencil::Second);
    let lap4 = laplacian_2d(&g, &lq, Stencil::Fourth);
    let ib = C64::new(0.0, tq.b);
    let (mut res, mut est) = (0.0f64, 0.0f64);
    for i in 2..g.n_rt - 2 {
        for j in 2..g.n_zt - 2 {
            let k = g.idx(i, j);
            let r = g.coord(i).hypot(g.coord(j));
            let q = s[k].q;
            let l = lq[k];
            let (psi, dpsi) = tq.psi(r);
            let lpsi = psi + dpsi * r;
            let lhs = lap[k] - l + l * q.norm_sqr() + q * (2.0 * (q.re * l.re + q.im * l.im));
            let rhs = (q - ib * l - psi) * 2.0 - lpsi - ib * s[k].lambda2(r);
            res = res.max((lhs - rhs).norm());
            est = est.max((lap2[k] - lap4[k]).norm());
        }
    }
    Qp5Check { residual: res, truncation_estimate: est }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::solve_ground_state;

    fn tq(b: f64) -> (TruncatedProfile, ProfileError) {
        let gs = solve_ground_state(0.01, 1e-12).unwrap();
        truncate(Arc::new(solve_qb(b, 0.1, 1e-13, gs.q0).unwrap()))
    }

    #[test]
    fn energy_identity_and_decay() {
        let (t2, p2) = tq(0.2);
        let (e2, gap) = profile_energy(&t2, &p2).unwrap();
        assert!(gap <= 1e-3 * e2.abs(), "E = {e2}, gap = {gap}");
        let (t15, p15) = tq(0.15);
        let (t25, p25) = tq(0.25);
        let e15 = profile_energy(&t15, &p15).unwrap().0;
        let e25 = profile_energy(&t25, &p25).unwrap().0;
        assert!(e15.abs() * 10.0 <= e25.abs(), "{e15} vs {e25}");
    }

    #[test]
    fn flat_energy_vanishes() {
        let gs = Arc::new(solve_ground_state(0.01, 1e-12).unwrap());
        let g = gs.grad_norm_sq();
        let flat = TruncatedProfile::flat(gs);
        let psi = ProfileError { b: 0.0, h: 0.01, samples: vec![], sup_norms: [[0.0; 2]; 3] };
        let (e, _) = profile_energy(&flat, &psi).unwrap();
        assert!(e.abs() <= 1e-6 * g, "E(Q) = {e}");
        let (g1, g2) = momentum_degeneracy_check(&flat);
        assert_eq!(g2, 0.0);
        assert!(g1 < 1e-14);
    }

    #[test]
    fn momentum_gaps_small() {
        let (t, _) = tq(0.2);
        let (g1, g2) = momentum_degeneracy_check(&t);
        assert!(g1 < 1e-10 && g2 < 1e-10, "{g1} {g2}");
    }

    #[test]
    fn psi_shrinks_with_b() {
        let (_, p3) = tq(0.3);
        let (_, p15) = tq(0.15);
        assert!(p3.sup_norms[2][0] >= 5.0 * p15.sup_norms[2][0]);
    }

    #[test]
    fn stencil_identities_hold() {
        for &b in &[0.1, 0.2] {
            let (t, _) = tq(b);
            let c = qb_residual(&t, 0.05);
            assert!(c.residual <= 10.0 * c.truncation_estimate, "b = {b}: {c:?}");
            let c5 = qp5_residual(&t, 0.05, Stencil::Second);
            assert!(c5.residual <= 10.0 * c5.truncation_estimate, "b = {b}: {c5:?}");
        }
    }

    #[test]
    fn mass_excess_is_supercritical() {
        let gs = solve_ground_state(0.01, 1e-12).unwrap();
        let fit = mass_excess_derivative(0.1, &[0.1, 0.15, 0.2], &gs).unwrap();
        assert!(fit.d0 > 0.0);
        assert!(fit.relative_residual <= 0.05, "{fit:?}");
        assert!(fit.samples.iter().all(|(_, m)| *m > 0.0));
        assert!(mass_excess_derivative(0.1, &[0.1, 0.2], &gs).is_err());
    }
}
