use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::decompose::{core_value, WEIGHT_CUTOFF};
use super::{FamilyMember, ModulationState};
use crate::cutoffs::{chi1, phi3, phi4, smoothstep};
use crate::error::{Error, Result};
use crate::field::{gradient_2d, sample_lab, AxialField, EpsilonField, Grid2D, Stencil};
use crate::profiles::{radial_integral, GroundState, RadialProfile, Radiation};
use std::f64::consts::PI;

/// `int |grad eps|^2 mu dr~ dz~ + int_{R~ < 10/b} |eps|^2 e^{-R~} dr~ dz~`.
/// The exponentially weighted disc is capped at R~ = 40 (weight < 1e-17).
pub fn epsilon_energy(eps: &EpsilonField) -> Result<f64> {
    let g = &eps.grid;
    let disc = if eps.b == 0.0 { WEIGHT_CUTOFF } else { (10.0 / eps.b.abs()).min(WEIGHT_CUTOFF) };
    if g.extent < disc * (1.0 - 1e-12) {
        return Err(Error::Extent { extent: g.extent, required: disc });
    }
    let (gx, gy) = gradient_2d(g, &eps.values, Stencil::Fourth);
    let mut v = Vec::with_capacity(g.len());
    for i in 0..g.n_rt {
        let x = g.coord(i);
        let mu = eps.frame.mu(x);
        for j in 0..g.n_zt {
            let k = g.idx(i, j);
            let rr = x.hypot(g.coord(j));
            let local = if rr < disc { eps.values[k].norm_sqr() * (-rr).exp() } else { 0.0 };
            v.push((gx[k].norm_sqr() + gy[k].norm_sqr()) * mu + local);
        }
    }
    Ok(g.integrate(&v))
}

/// Constants of the Lyapunov functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    /// `A = e^{2 a / b}`.
    pub a_param: f64,
    pub delta1: f64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        Self { a_param: 0.05, delta1: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    pub value: f64,
    /// `int |Q~_b|^2 - int Q^2`.
    pub mass_excess: f64,
    /// `2 (eps1, Sigma) + 2 (eps2, Theta)`.
    pub linear: f64,
    /// `r^{-1} int (1 - phi4(R~/A)) |eps|^2 mu`.
    pub local_mass: f64,
    /// The bracket multiplied by `-delta1 / 800`.
    pub radiative: f64,
    pub a: f64,
    /// A was reduced to fit the grid.
    pub clipped: bool,
}

/// `f~1(b)` without the integral over v: `(b/4)||R Q~_b||^2 +
/// (1/2) Im int R zeta~' conj(zeta~)` with `zeta~ = phi3(R/A) zeta_b`.
fn f1_tilde(member: &FamilyMember, radiation: Option<&Radiation>, a: f64) -> f64 {
    let b = member.b;
    let moment = radial_integral(member, |r, s| r * r * s.q.norm_sqr());
    let mut flux = 0.0;
    if let Some(rad) = radiation {
        let hi = (2.0 * a).min(rad.r_outer);
        flux = 2.0
            * std::f64::consts::PI
            * crate::numerics::simpson(
                |r| {
                    let (z, dz) = zeta_tilde(rad, a, r);
                    r * r * (dz * z.conj()).im
                },
                0.0,
                hi,
                2 * ((hi / 0.005).ceil() as usize).max(16),
            );
    }
    0.25 * b * moment + 0.5 * flux
}

fn zeta_tilde(rad: &Radiation, a: f64, r: f64) -> (C64, C64) {
    let (z, dz) = rad.eval(r);
    let x = r / a;
    let s = smoothstep(x - 1.0);
    let c = phi3(x);
    (z * c, dz * c - z * (s[1] / a))
}

/// The Lyapunov functional at (eps, b); see [`LyapunovReport`] for the
/// terms. `int_0^b f~1` uses `f~1(v) ~ (v/4)||R Q||^2`, dropping the
/// `O(v^3)` profile correction and the `e^{-pi/v}` radiation flux.
pub fn lyapunov(
    eps: &EpsilonField,
    member: &FamilyMember,
    radiation: Option<&Radiation>,
    ground: &GroundState,
    params: &LyapunovParams,
) -> Result<LyapunovReport> {
    let b = member.b;
    if (eps.b - b).abs() > 1e-14 * b.abs().max(1.0) {
        return Err(Error::Precondition(format!("epsilon split at b = {} used with b = {b}", eps.b)));
    }
    let needs_rad = b.abs() >= super::family::BLEND_B;
    let radiation = if needs_rad {
        let rad = radiation.ok_or_else(|| Error::Dependency(format!("radiation at b = {b}")))?;
        if (rad.b - b.abs()).abs() > 1e-14 {
            return Err(Error::Precondition(format!("radiation solved at b = {} used with b = {b}", rad.b)));
        }
        Some(rad)
    } else {
        None
    };
    let g = &eps.grid;
    let mut a = if b == 0.0 { f64::INFINITY } else { (2.0 * params.a_param / b.abs()).exp() };
    let mut clipped = false;
    if 3.0 * a > g.extent {
        a = g.extent / 3.0;
        clipped = true;
    }
    let mass_excess = radial_integral(member, |_, s| s.q.norm_sqr()) - radial_integral(ground, |_, s| s.q.norm_sqr());

    let r_c = eps.frame.r_c;
    let (mut linear, mut local, mut pair) = (0.0, 0.0, 0.0);
    for i in 0..g.n_rt {
        let x = g.coord(i);
        let mu = eps.frame.mu(x);
        for j in 0..g.n_zt {
            let k = g.idx(i, j);
            let w = g.weight(i, j);
            let e = eps.values[k];
            let rr = x.hypot(g.coord(j));
            if rr <= member.support() {
                linear += w * (e * member.sample(rr).q.conj()).re;
            }
            local += w * (1.0 - phi4(rr / a)) * e.norm_sqr() * mu;
            if let Some(rad) = radiation {
                if rr < 2.0 * a {
                    let (z, dz) = zeta_tilde(rad, a, rr);
                    let lz = z + dz * rr;
                    pair += w * (e * (C64::new(0.0, 1.0) * lz).conj()).re;
                }
            }
        }
    }
    let linear = 2.0 * linear;
    let local_mass = if r_c > 0.0 { local / r_c } else { 0.0 };
    let moment_q = radial_integral(ground, |r, s| r * r * s.q.norm_sqr());
    let bracket = b * f1_tilde(member, radiation, a) - 0.125 * b * b * moment_q + b * pair;
    let radiative = -params.delta1 / 800.0 * bracket;
    Ok(LyapunovReport {
        value: mass_excess + linear + local_mass + radiative,
        mass_excess,
        linear,
        local_mass,
        radiative,
        a,
        clipped,
    })
}

/// Exterior norms of `chi1 (u - core)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExteriorNorms {
    /// L2 norm in the `r dr dz` measure.
    pub l2: f64,
    /// `<v, (-Delta)^{1/2} v>^{1/2}` with the discrete Dirichlet Laplacian.
    pub h_half: f64,
    /// `<v, -Delta v>^{1/2}`.
    pub h1: f64,
}

/// Spectral data of the discrete axial Laplacian on a band of radial rows
/// `[i0, i1)` times the interior z rows, Dirichlet outside the band (the axis
/// row keeps its symmetric stencil).
#[derive(Debug, Clone)]
pub struct ExteriorOperator {
    grid: Grid2D,
    bands: Vec<Band>,
    z_vecs: DMatrix<f64>,
    z_vals: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Band {
    i0: usize,
    /// Square roots of the radial cell weights.
    sqrt_w: Vec<f64>,
    vecs: DMatrix<f64>,
    vals: Vec<f64>,
}

fn radial_band(g: &Grid2D, i0: usize, i1: usize) -> Band {
    let n = i1 - i0;
    let w: Vec<f64> = (i0..i1).map(|i| g.radial_weight(i)).collect();
    // symmetric stiffness S with -L = W^{-1} S; edge (i, i+1) has r_{i+1/2}/dr
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in i0.saturating_sub(1)..i1 {
        if i + 1 >= g.n_r {
            break;
        }
        let c = (g.r(i) + 0.5 * g.dr) / g.dr;
        let (a, b) = (i as i64 - i0 as i64, i as i64 + 1 - i0 as i64);
        for (p, q) in [(a, b), (b, a)] {
            if p >= 0 && (p as usize) < n {
                s[(p as usize, p as usize)] += c;
                if q >= 0 && (q as usize) < n {
                    s[(p as usize, q as usize)] -= c;
                }
            }
        }
    }
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |p, q| s[(p, q)] / (sqrt_w[p] * sqrt_w[q]));
    let eig = SymmetricEigen::new(m);
    Band { i0, sqrt_w, vecs: eig.eigenvectors, vals: eig.eigenvalues.iter().copied().collect() }
}

impl ExteriorOperator {
    /// Bands where `chi1(., r_c)` is nonzero: `r < r_c/2` and `r > 2 r_c`.
    pub fn new(grid: Grid2D, r_c: f64) -> Self {
        Self::with_gap(grid, 0.5 * r_c, 2.0 * r_c)
    }

    /// Bands `r < lo` and `r > hi`, Dirichlet across the gap.
    pub fn with_gap(grid: Grid2D, lo: f64, hi: f64) -> Self {
        let bands = Self::band_rows(&grid, lo, hi).into_iter().map(|(i0, n)| radial_band(&grid, i0, i0 + n)).collect();
        // the Dirichlet second difference in z is diagonalized by the sine basis
        let nz = grid.n_z - 2;
        let n1 = (nz + 1) as f64;
        let norm = (2.0 / n1).sqrt();
        let z_vecs = DMatrix::from_fn(nz, nz, |j, p| norm * (PI * ((j + 1) * (p + 1)) as f64 / n1).sin());
        let z_vals = (1..=nz).map(|p| (2.0 * (0.5 * PI * p as f64 / n1).sin() / grid.dz).powi(2)).collect();
        Self { grid, bands, z_vecs, z_vals }
    }

    /// Whether this operator is the chi1 operator for (grid, r_c).
    pub fn covers(&self, grid: &Grid2D, r_c: f64) -> bool {
        self.grid.same_shape(grid)
            && Self::band_rows(grid, 0.5 * r_c, 2.0 * r_c)
                == self.bands.iter().map(|b| (b.i0, b.vals.len())).collect::<Vec<_>>()
    }

    fn band_rows(grid: &Grid2D, lo: f64, hi: f64) -> Vec<(usize, usize)> {
        let inner = (0..grid.n_r - 1).take_while(|&i| grid.r(i) < lo).count();
        let outer0 = (0..grid.n_r - 1).find(|&i| grid.r(i) > hi).unwrap_or(grid.n_r - 1);
        let mut out = Vec::new();
        if inner > 0 {
            out.push((0, inner));
        }
        if outer0 < grid.n_r - 1 {
            out.push((outer0, grid.n_r - 1 - outer0));
        }
        out
    }

    /// (L2, H^{1/2}, H^1) of v, which must vanish outside the bands.
    pub fn norms(&self, v: &AxialField) -> ExteriorNorms {
        let g = &self.grid;
        let nz = g.n_z - 2;
        let sqrt_wz = g.dz.sqrt();
        let (mut l2, mut hh, mut h1) = (0.0, 0.0, 0.0);
        for band in &self.bands {
            let n = band.vals.len();
            for part in 0..2 {
                // weighted coefficients: F = W_r^{1/2} v W_z^{1/2}
                let f = DMatrix::from_fn(n, nz, |p, q| {
                    let x = v.at(band.i0 + p, q + 1);
                    band.sqrt_w[p] * sqrt_wz * if part == 0 { x.re } else { x.im }
                });
                let c = band.vecs.transpose() * f * &self.z_vecs;
                for p in 0..n {
                    for q in 0..nz {
                        let e = band.vals[p].max(0.0) + self.z_vals[q].max(0.0);
                        let c2 = c[(p, q)] * c[(p, q)];
                        l2 += c2;
                        hh += e.sqrt() * c2;
                        h1 += e * c2;
                    }
                }
            }
        }
        ExteriorNorms { l2: l2.sqrt(), h_half: hh.sqrt(), h1: h1.sqrt() }
    }
}

/// `chi1(r; r_c) (u - core)` on the lab grid.
pub fn exterior_field(u: &AxialField, state: &ModulationState, member: &FamilyMember) -> AxialField {
    let frame = state.frame();
    let g = u.grid;
    let mut out = AxialField::zeros(g);
    out.time = u.time;
    for i in 0..g.n_r {
        let c = chi1(g.r(i), state.r_c);
        if c == 0.0 {
            continue;
        }
        for j in 0..g.n_z {
            let k = g.idx(i, j);
            out.values[k] = (u.values[k] - core_value(member, &frame, g.r(i), g.z(j))) * c;
        }
    }
    out
}

/// Nodes per direction above which exterior norms are taken on a coarser grid.
pub const EXTERIOR_MAX_NODES: usize = 400;

/// Grid on which exterior norms of fields on `g` are evaluated: `g` itself,
/// or the same box at an integer multiple of the spacing with at most
/// `EXTERIOR_MAX_NODES` nodes per direction.
pub fn exterior_grid(g: &Grid2D) -> Grid2D {
    let k = g.n_r.max(g.n_z).div_ceil(EXTERIOR_MAX_NODES);
    if k <= 1 {
        return *g;
    }
    let h = k as f64 * g.dr.max(g.dz);
    Grid2D::with_spacing(g.r_max, g.z_half_width, h).unwrap_or(*g)
}

/// Moves `v` onto `target` by bicubic sampling (identity if the shapes agree).
pub fn restrict_to(v: AxialField, target: &Grid2D) -> AxialField {
    if v.grid.same_shape(target) {
        return v;
    }
    let mut out = AxialField::from_fn(*target, |r, z| sample_lab(&v, r, z));
    out.time = v.time;
    out
}

/// Exterior L2 and H^{1/2} norms of `u~ = u - core` cut off by chi1.
pub fn exterior_norms(u: &AxialField, state: &ModulationState, member: &FamilyMember) -> ExteriorNorms {
    let grid = exterior_grid(&u.grid);
    let op = ExteriorOperator::new(grid, state.r_c);
    op.norms(&restrict_to(exterior_field(u, state, member), &grid))
}
