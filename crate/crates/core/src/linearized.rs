//! Linearized operators around the truncated profile and the ground state,
//! and a sampled check of the coercivity of the quadratic form `H` under
//! the six orthogonality conditions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::{gradient_2d, laplacian_2d, EpsilonField, LocalFrame, RescaledGrid2D, Stencil};
use crate::profiles::{GroundState, RadialProfile, TruncatedProfile};

const STENCIL: Stencil = Stencil::Fourth;

/// Profile samples on a rescaled grid, with the frame supplying the
/// `lambda / mu` curvature coefficient.
#[derive(Clone)]
pub struct LinearizedContext {
    pub tq: Arc<TruncatedProfile>,
    pub frame: LocalFrame,
    pub grid: RescaledGrid2D,
    sigma: Vec<f64>,
    theta: Vec<f64>,
    curvature: Vec<f64>,
}

impl LinearizedContext {
    pub fn new(tq: Arc<TruncatedProfile>, frame: LocalFrame, grid: RescaledGrid2D) -> Result<Self> {
        if grid.extent < tq.support() + 2.0 {
            return Err(Error::Extent { extent: grid.extent, required: tq.support() + 2.0 });
        }
        let q = grid.sample(|x, y| tq.sample(x.hypot(y)).q);
        let curvature = grid.sample(|x, _| {
            let mu = frame.mu(x);
            if frame.lambda == 0.0 || mu <= 0.0 {
                0.0
            } else {
                frame.lambda / mu
            }
        });
        Ok(Self {
            sigma: q.iter().map(|v| v.re).collect(),
            theta: q.iter().map(|v| v.im).collect(),
            tq,
            frame,
            grid,
            curvature,
        })
    }

    fn check(&self, eps: &EpsilonField) -> Result<()> {
        if eps.grid != self.grid {
            return Err(Error::Shape("epsilon grid differs from the linearization grid".into()));
        }
        Ok(())
    }

    /// `u - Delta u - (lambda/mu) d_r~ u` for a real field.
    fn kinetic(&self, u: &[f64]) -> Vec<f64> {
        let lap = laplacian_2d(&self.grid, u, STENCIL);
        let (dr, _) = gradient_2d(&self.grid, u, STENCIL);
        (0..u.len()).map(|k| u[k] - lap[k] - self.curvature[k] * dr[k]).collect()
    }
}

/// `M+(eps) = e1 - Delta e1 - (lambda/mu) d_r~ e1 - (2 Sigma^2 + |Q~|^2) e1 - 2 Sigma Theta e2`.
pub fn apply_m_plus(eps: &EpsilonField, ctx: &LinearizedContext) -> Result<Vec<f64>> {
    ctx.check(eps)?;
    let (e1, e2) = (eps.real_part(), eps.imag_part());
    let mut out = ctx.kinetic(&e1);
    for k in 0..out.len() {
        let (s, t) = (ctx.sigma[k], ctx.theta[k]);
        out[k] -= (3.0 * s * s + t * t) * e1[k] + 2.0 * s * t * e2[k];
    }
    Ok(out)
}

/// `M-(eps) = e2 - Delta e2 - (lambda/mu) d_r~ e2 - (2 Theta^2 + |Q~|^2) e2 - 2 Sigma Theta e1`.
pub fn apply_m_minus(eps: &EpsilonField, ctx: &LinearizedContext) -> Result<Vec<f64>> {
    ctx.check(eps)?;
    let (e1, e2) = (eps.real_part(), eps.imag_part());
    let mut out = ctx.kinetic(&e2);
    for k in 0..out.len() {
        let (s, t) = (ctx.sigma[k], ctx.theta[k]);
        out[k] -= (s * s + 3.0 * t * t) * e2[k] + 2.0 * s * t * e1[k];
    }
    Ok(out)
}

/// Ground-state data on a rescaled grid: Q, y.grad Q and the orthogonality
/// directions.
struct QData {
    q: Vec<f64>,
    ydq: Vec<f64>,
    weight: Vec<f64>,
    dirs1: Vec<Vec<f64>>,
    dirs2: Vec<Vec<f64>>,
}

impl QData {
    fn new(q: &GroundState, grid: &RescaledGrid2D) -> Self {
        let n = grid.len();
        let mut d = QData {
            q: Vec::with_capacity(n),
            ydq: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            dirs1: (0..4).map(|_| Vec::with_capacity(n)).collect(),
            dirs2: (0..4).map(|_| Vec::with_capacity(n)).collect(),
        };
        for i in 0..grid.n_rt {
            let x = grid.coord(i);
            for j in 0..grid.n_zt {
                let y = grid.coord(j);
                let r = x.hypot(y);
                let (v, dv, d2v) = q.eval(r);
                let lam = v + r * dv;
                let lam2 = v + 3.0 * r * dv + r * r * d2v;
                let (gx, gy) = if r > 0.0 { (dv * x / r, dv * y / r) } else { (0.0, 0.0) };
                d.q.push(v);
                d.ydq.push(r * dv);
                d.weight.push((-r).exp());
                for (dst, val) in d.dirs1.iter_mut().zip([v, lam, x * v, y * v]) {
                    dst.push(val);
                }
                for (dst, val) in d.dirs2.iter_mut().zip([lam, lam2, gx, gy]) {
                    dst.push(val);
                }
            }
        }
        d
    }
}

fn neg_laplacian(grid: &RescaledGrid2D, u: &[f64]) -> Vec<f64> {
    laplacian_2d(grid, u, STENCIL).into_iter().map(|v| -v).collect()
}

fn form(grid: &RescaledGrid2D, u: &[f64], pot: impl Fn(usize) -> f64) -> f64 {
    let lap = neg_laplacian(grid, u);
    let v: Vec<f64> = (0..u.len()).map(|k| (lap[k] + pot(k) * u[k]) * u[k]).collect();
    grid.integrate(&v)
}

fn h_form(grid: &RescaledGrid2D, d: &QData, e1: &[f64], e2: &[f64]) -> f64 {
    form(grid, e1, |k| 3.0 * d.q[k] * d.ydq[k]) + form(grid, e2, |k| d.q[k] * d.ydq[k])
}

/// `H(eps, eps) = (L1 e1, e1) + (L2 e2, e2)` with `L1 = -Delta + 3 Q (y.grad Q)`
/// and `L2 = -Delta + Q (y.grad Q)`.
pub fn quadratic_form_h(eps: &EpsilonField, q: &GroundState) -> f64 {
    let d = QData::new(q, &eps.grid);
    h_form(&eps.grid, &d, &eps.real_part(), &eps.imag_part())
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub min_rayleigh: f64,
    pub n_samples: usize,
    /// Largest `|(e, d)| / (|e| |d|)` over samples and directions after
    /// projection (0 when projection is off).
    pub projection_residual: f64,
    pub seed: u64,
    pub projected: bool,
    /// Running minimum after each sample.
    pub min_trace: Vec<f64>,
}

/// Orthonormal basis of the directions in the plain inner product.
fn orthonormalize(grid: &RescaledGrid2D, dirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for d in dirs {
        let n0 = grid.inner_real(d, d).sqrt();
        let mut v = d.clone();
        for _ in 0..2 {
            for e in &basis {
                let c = grid.inner_real(&v, e);
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = grid.inner_real(&v, &v).sqrt();
        if !(n > 1e-8 * n0) {
            return Err(Error::Resolution("Gram matrix of the orthogonality directions is singular".into()));
        }
        v.iter_mut().for_each(|a| *a /= n);
        basis.push(v);
    }
    Ok(basis)
}

fn project(grid: &RescaledGrid2D, u: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for e in basis {
            let c = grid.inner_real(u, e);
            u.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
        }
    }
}

fn max_overlap(grid: &RescaledGrid2D, u: &[f64], dirs: &[Vec<f64>]) -> f64 {
    let nu = grid.inner_real(u, u).sqrt();
    if nu == 0.0 {
        return 0.0;
    }
    dirs.iter().map(|d| grid.inner_real(u, d).abs() / (nu * grid.inner_real(d, d).sqrt())).fold(0.0, f64::max)
}

/// Random smooth field: a Gaussian window of width sigma around a random
/// centre times a sum of 12 random cosines with decaying amplitudes.
/// Separable in (y1, y2), so it is assembled from 1D factors.
fn random_field(grid: &RescaledGrid2D, rng: &mut ChaCha8Rng, sigma: f64, centre: (f64, f64)) -> Vec<f64> {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let kd = Normal::new(0.0, 1.5 / sigma).expect("finite width");
    let n = grid.n_rt;
    let xs: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
    let wx: Vec<f64> = xs.iter().map(|x| (-(x - centre.0).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let wy: Vec<f64> = xs.iter().map(|y| (-(y - centre.1).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let mut out = vec![0.0; grid.len()];
    for _ in 0..12 {
        let (k1, k2): (f64, f64) = (kd.sample(rng), kd.sample(rng));
        let amp = std.sample(rng) * (-(k1 * k1 + k2 * k2) * sigma * sigma / 8.0).exp();
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        // cos(a + b + phase) = Re(e^{ia} e^{i(b + phase)})
        let ex: Vec<(f64, f64)> = xs.iter().map(|x| (k1 * (x - centre.0)).sin_cos()).collect();
        let ey: Vec<(f64, f64)> = xs.iter().map(|y| (k2 * (y - centre.1) + phase).sin_cos()).collect();
        for i in 0..n {
            let (sa, ca) = ex[i];
            for j in 0..n {
                let (sb, cb) = ey[j];
                out[i * n + j] += amp * (ca * cb - sa * sb);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] *= wx[i] * wy[j];
        }
    }
    out
}

/// Samples random fields, optionally projects them off
/// `{Q, Lambda Q, y Q}` (real part) and `{Lambda Q, Lambda^2 Q, grad Q}`
/// (imaginary part), and records the minimum of
/// `H(e, e) / (int |grad e|^2 + int |e|^2 e^{-|y|})`.
pub fn verify_spectral_property(
    n_samples: usize,
    grid: &RescaledGrid2D,
    seed: u64,
    q: &GroundState,
    projected: bool,
) -> Result<SpectralReport> {
    if n_samples < 100 {
        return Err(Error::Precondition(format!("spectral check needs at least 100 samples, got {n_samples}")));
    }
    let d = QData::new(q, grid);
    let b1 = orthonormalize(grid, &d.dirs1)?;
    let b2 = orthonormalize(grid, &d.dirs2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre_d = Normal::new(0.0, 0.5).expect("finite width");
    let mut min_r = f64::INFINITY;
    let mut trace = Vec::with_capacity(n_samples);
    let mut residual = 0.0f64;
    for _ in 0..n_samples {
        let sigma = rng.random_range(0.5..3.0);
        let c1 = (centre_d.sample(&mut rng), centre_d.sample(&mut rng));
        let c2 = (centre_d.sample(&mut rng), centre_d.sample(&mut rng));
        let mut e1 = random_field(grid, &mut rng, sigma, c1);
        let mut e2 = random_field(grid, &mut rng, sigma, c2);
        if projected {
            project(grid, &mut e1, &b1);
            project(grid, &mut e2, &b2);
            residual = residual.max(max_overlap(grid, &e1, &d.dirs1)).max(max_overlap(grid, &e2, &d.dirs2));
        }
        let r = rayleigh(grid, &d, &e1, &e2);
        if r.is_finite() {
            min_r = min_r.min(r);
        }
        trace.push(min_r);
    }
    Ok(SpectralReport {
        min_rayleigh: min_r,
        n_samples,
        projection_residual: residual,
        seed,
        projected,
        min_trace: trace,
    })
}

fn rayleigh(grid: &RescaledGrid2D, d: &QData, e1: &[f64], e2: &[f64]) -> f64 {
    let num = h_form(grid, d, e1, e2);
    let den = form(grid, e1, |k| d.weight[k]) + form(grid, e2, |k| d.weight[k]);
    num / den
}

/// Rayleigh quotient of a single field, for callers that bring their own.
pub fn rayleigh_quotient(eps: &EpsilonField, q: &GroundState) -> f64 {
    let d = QData::new(q, &eps.grid);
    rayleigh(&eps.grid, &d, &eps.real_part(), &eps.imag_part())
}
