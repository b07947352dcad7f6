//! Grids, complex fields, axial differential operators and the rescaled frame.
//!
//! Lab-frame fields live on the (r, z) half-plane with an axis row at r = 0
//! and homogeneous Dirichlet values on the three outer edges. Rescaled fields
//! live on a square grid centred at the origin of (r~, z~).

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Scalar types the 2D stencils operate on.
pub trait Scalar:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
}
impl Scalar for f64 {}
impl Scalar for C64 {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub n_r: usize,
    pub n_z: usize,
    pub dr: f64,
    pub dz: f64,
    pub r_max: f64,
    pub z_half_width: f64,
}

impl Grid2D {
    pub fn new(n_r: usize, n_z: usize, r_max: f64, z_half_width: f64) -> Result<Self> {
        if n_r < 4 || n_z < 4 {
            return Err(Error::Config(format!("grid too small: n_r = {n_r}, n_z = {n_z}")));
        }
        if !(r_max > 0.0) || !(z_half_width > 0.0) || !r_max.is_finite() || !z_half_width.is_finite() {
            return Err(Error::Config(format!(
                "grid extents must be positive: r_max = {r_max}, z_half_width = {z_half_width}"
            )));
        }
        Ok(Self {
            n_r,
            n_z,
            dr: r_max / (n_r - 1) as f64,
            dz: 2.0 * z_half_width / (n_z - 1) as f64,
            r_max,
            z_half_width,
        })
    }

    /// Grid with spacing as close to `h` as the extents allow (rounded to
    /// whole cells).
    pub fn with_spacing(r_max: f64, z_half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        let n_r = (r_max / h).round() as usize + 1;
        let n_z = (2.0 * z_half_width / h).round() as usize + 1;
        Self::new(n_r, n_z, r_max, z_half_width)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        -self.z_half_width + j as f64 * self.dz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_z + j
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Radial cell weight for the measure r dr. The axis cell [0, dr/2] has
    /// volume dr^2/8, which makes the discrete Laplacian self-adjoint.
    #[inline]
    pub fn radial_weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.dr * self.dr / 8.0
        } else if i == self.n_r - 1 {
            0.5 * self.r(i) * self.dr
        } else {
            self.r(i) * self.dr
        }
    }

    #[inline]
    pub fn z_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_z - 1 {
            0.5 * self.dz
        } else {
            self.dz
        }
    }

    /// Quadrature weight of node (i, j) for the 3D measure r dr dz.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.radial_weight(i) * self.z_weight(j)
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.n_r == other.n_r && self.n_z == other.n_z && self.dr == other.dr && self.dz == other.dz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxialField {
    pub grid: Grid2D,
    pub values: Vec<C64>,
    pub time: f64,
}

impl AxialField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()], time: 0.0 }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> C64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r {
            let r = grid.r(i);
            for j in 0..grid.n_z {
                values.push(f(r, grid.z(j)));
            }
        }
        Self { grid, values, time: 0.0 }
    }

    pub fn from_values(grid: Grid2D, values: Vec<C64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("{} samples for a {}x{} grid", values.len(), grid.n_r, grid.n_z)));
        }
        Ok(Self { grid, values, time })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Integral of `f(u)` against r dr dz.
    pub fn integrate(&self, f: impl Fn(C64) -> f64) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for i in 0..g.n_r {
            let wr = g.radial_weight(i);
            let mut row = 0.0;
            for j in 0..g.n_z {
                row += g.z_weight(j) * f(self.values[g.idx(i, j)]);
            }
            total += wr * row;
        }
        total
    }

    /// sum of w |u - v|^2 in the 3D measure.
    pub fn l2_distance(&self, other: &AxialField) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for i in 0..g.n_r {
            for j in 0..g.n_z {
                let k = g.idx(i, j);
                total += g.weight(i, j) * (self.values[k] - other.values[k]).norm_sqr();
            }
        }
        total.sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.integrate(|v| v.norm_sqr()).sqrt()
    }
}

/// Axial Laplacian `u_rr + u_r / r + u_zz` with the L'Hopital row
/// `2 u_rr + u_zz` on the axis. Outer-boundary nodes are Dirichlet nodes and
/// get 0.
pub fn axial_laplacian(u: &AxialField) -> Result<AxialField> {
    let g = u.grid;
    if g.n_r < 4 || g.n_z < 4 {
        return Err(Error::Config(format!("grid too small: {}x{}", g.n_r, g.n_z)));
    }
    let mut out = AxialField::zeros(g);
    out.time = u.time;
    let idr2 = 1.0 / (g.dr * g.dr);
    let idz2 = 1.0 / (g.dz * g.dz);
    for i in 0..g.n_r - 1 {
        for j in 1..g.n_z - 1 {
            let c = u.at(i, j);
            let zz = (u.at(i, j + 1) - c * 2.0 + u.at(i, j - 1)) * idz2;
            let rr = if i == 0 {
                (u.at(1, j) - c) * (4.0 * idr2)
            } else {
                let rp = g.r(i) + 0.5 * g.dr;
                let rm = g.r(i) - 0.5 * g.dr;
                ((u.at(i + 1, j) - c) * rp - (c - u.at(i - 1, j)) * rm) * (idr2 / g.r(i))
            };
            out.values[g.idx(i, j)] = rr + zz;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub lambda: f64,
    pub r_c: f64,
    pub z_c: f64,
    pub gamma: f64,
}

impl LocalFrame {
    pub fn identity() -> Self {
        Self { lambda: 1.0, r_c: 0.0, z_c: 0.0, gamma: 0.0 }
    }

    /// The weight `lambda r~ + r_c` clamped at zero.
    #[inline]
    pub fn mu(&self, rt: f64) -> f64 {
        (self.lambda * rt + self.r_c).max(0.0)
    }

    #[inline]
    pub fn to_lab(&self, rt: f64, zt: f64) -> (f64, f64) {
        (self.lambda * rt + self.r_c, self.lambda * zt + self.z_c)
    }

    #[inline]
    pub fn to_rescaled(&self, r: f64, z: f64) -> (f64, f64) {
        ((r - self.r_c) / self.lambda, (z - self.z_c) / self.lambda)
    }
}

/// Square grid on [-extent, extent]^2 in (r~, z~) with `n_rt = n_zt` nodes
/// per side, index `i_rt * n_zt + i_zt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledGrid2D {
    pub n_rt: usize,
    pub n_zt: usize,
    pub spacing: f64,
    pub extent: f64,
}

impl RescaledGrid2D {
    /// Smallest symmetric grid with the given spacing whose half-width is at
    /// least `min_extent`.
    pub fn new(spacing: f64, min_extent: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(min_extent > 0.0) {
            return Err(Error::Config(format!(
                "rescaled grid needs positive spacing and extent, got {spacing}, {min_extent}"
            )));
        }
        let half = (min_extent / spacing - 1e-9).ceil().max(2.0) as usize;
        let n = 2 * half + 1;
        Ok(Self { n_rt: n, n_zt: n, spacing, extent: half as f64 * spacing })
    }

    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        k as f64 * self.spacing - self.extent
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_zt + j
    }

    pub fn len(&self) -> usize {
        self.n_rt * self.n_zt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trapezoid weight of node (i, j) for dr~ dz~.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let h = self.spacing;
        let wi = if i == 0 || i == self.n_rt - 1 { 0.5 * h } else { h };
        let wj = if j == 0 || j == self.n_zt - 1 { 0.5 * h } else { h };
        wi * wj
    }

    pub fn sample<T>(&self, f: impl Fn(f64, f64) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n_rt {
            let x = self.coord(i);
            for j in 0..self.n_zt {
                out.push(f(x, self.coord(j)));
            }
        }
        out
    }

    /// Trapezoid integral of nodal values.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_rt {
            for j in 0..self.n_zt {
                total += self.weight(i, j) * v[self.idx(i, j)];
            }
        }
        total
    }

    /// Plain real inner product `int Re(f conj g)`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_rt {
            for j in 0..self.n_zt {
                let k = self.idx(i, j);
                total += self.weight(i, j) * (f[k] * g[k].conj()).re;
            }
        }
        total
    }

    pub fn inner_real(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_rt {
            for j in 0..self.n_zt {
                let k = self.idx(i, j);
                total += self.weight(i, j) * f[k] * g[k];
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledField {
    pub grid: RescaledGrid2D,
    pub values: Vec<C64>,
}

/// The remainder `e^{i gamma} lambda u(lambda y + (r_c, z_c)) - Q~_b` on the
/// rescaled grid, with the frame and b it was split against.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonField {
    pub grid: RescaledGrid2D,
    pub values: Vec<C64>,
    pub frame: LocalFrame,
    pub b: f64,
}

impl EpsilonField {
    pub fn zeros(grid: RescaledGrid2D, frame: LocalFrame, b: f64) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()], frame, b }
    }

    pub fn from_parts(grid: RescaledGrid2D, re: &[f64], im: &[f64], frame: LocalFrame, b: f64) -> Self {
        let values = re.iter().zip(im).map(|(&a, &c)| C64::new(a, c)).collect();
        Self { grid, values, frame, b }
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }
}

/// Finite-difference order for the rescaled-grid stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    #[default]
    Second,
    Fourth,
}

/// Five-point (or nine-point cross) Laplacian. The outermost ring gets 0;
/// the fourth-order stencil falls back to second order one node in.
pub fn laplacian_2d<T: Scalar>(grid: &RescaledGrid2D, v: &[T], order: Stencil) -> Vec<T> {
    let n = grid.n_rt;
    let m = grid.n_zt;
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    let mut out = vec![T::default(); v.len()];
    for i in 1..n - 1 {
        for j in 1..m - 1 {
            let k = i * m + j;
            let c = v[k];
            let wide = order == Stencil::Fourth && i >= 2 && j >= 2 && i + 2 < n && j + 2 < m;
            out[k] = if wide {
                let s = (v[k + m] + v[k - m] + v[k + 1] + v[k - 1]) * 16.0
                    - (v[k + 2 * m] + v[k - 2 * m] + v[k + 2] + v[k - 2])
                    - c * 60.0;
                s * (ih2 / 12.0)
            } else {
                (v[k + m] + v[k - m] + v[k + 1] + v[k - 1] - c * 4.0) * ih2
            };
        }
    }
    out
}

/// Centred gradient (d/dr~, d/dz~); 0 on the outermost ring.
pub fn gradient_2d<T: Scalar>(grid: &RescaledGrid2D, v: &[T], order: Stencil) -> (Vec<T>, Vec<T>) {
    let n = grid.n_rt;
    let m = grid.n_zt;
    let ih = 1.0 / grid.spacing;
    let mut gx = vec![T::default(); v.len()];
    let mut gy = vec![T::default(); v.len()];
    for i in 1..n - 1 {
        for j in 1..m - 1 {
            let k = i * m + j;
            let wide = order == Stencil::Fourth && i >= 2 && j >= 2 && i + 2 < n && j + 2 < m;
            if wide {
                gx[k] = ((v[k + m] - v[k - m]) * 8.0 - (v[k + 2 * m] - v[k - 2 * m])) * (ih / 12.0);
                gy[k] = ((v[k + 1] - v[k - 1]) * 8.0 - (v[k + 2] - v[k - 2])) * (ih / 12.0);
            } else {
                gx[k] = (v[k + m] - v[k - m]) * (0.5 * ih);
                gy[k] = (v[k + 1] - v[k - 1]) * (0.5 * ih);
            }
        }
    }
    (gx, gy)
}

/// `f + r~ f_r~ + z~ f_z~`.
pub fn apply_scaling_generator<T: Scalar>(grid: &RescaledGrid2D, f: &[T], order: Stencil) -> Vec<T> {
    let (gx, gy) = gradient_2d(grid, f, order);
    let mut out = Vec::with_capacity(f.len());
    for i in 0..grid.n_rt {
        let x = grid.coord(i);
        for j in 0..grid.n_zt {
            let k = grid.idx(i, j);
            out.push(f[k] + gx[k] * x + gy[k] * grid.coord(j));
        }
    }
    out
}

/// `int Re(f conj g) mu(r~) dr~ dz~` by the trapezoid rule.
pub fn weighted_inner(grid: &RescaledGrid2D, f: &[C64], g: &[C64], frame: &LocalFrame) -> Result<f64> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::Shape(format!(
            "inner product of {} and {} samples on a grid of {}",
            f.len(),
            g.len(),
            grid.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..grid.n_rt {
        let mu = frame.mu(grid.coord(i));
        if mu == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..grid.n_zt {
            let k = grid.idx(i, j);
            row += grid.weight(i, j) * (f[k] * g[k].conj()).re;
        }
        total += mu * row;
    }
    Ok(total)
}

/// What to do with mapped points that fall outside the source domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfBounds {
    #[default]
    Error,
    ZeroExtend,
}

#[inline]
fn keys(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

#[inline]
fn keys_weights(t: f64) -> [f64; 4] {
    [keys(t + 1.0), keys(t), keys(1.0 - t), keys(2.0 - t)]
}

/// Bicubic (Keys) sample of a lab field at (r, z), using the even extension
/// across the axis and zero outside the Dirichlet walls.
pub fn sample_lab(u: &AxialField, r: f64, z: f64) -> C64 {
    let g = &u.grid;
    let x = r.abs() / g.dr;
    let y = (z + g.z_half_width) / g.dz;
    let i0 = x.floor();
    let j0 = y.floor();
    let wx = keys_weights(x - i0);
    let wy = keys_weights(y - j0);
    let i0 = i0 as i64;
    let j0 = j0 as i64;
    let mut acc = C64::new(0.0, 0.0);
    for (a, wa) in wx.iter().enumerate() {
        if *wa == 0.0 {
            continue;
        }
        let i = (i0 - 1 + a as i64).abs();
        if i >= g.n_r as i64 {
            continue;
        }
        let mut row = C64::new(0.0, 0.0);
        for (b, wb) in wy.iter().enumerate() {
            let j = j0 - 1 + b as i64;
            if j < 0 || j >= g.n_z as i64 || *wb == 0.0 {
                continue;
            }
            row += u.values[g.idx(i as usize, j as usize)] * *wb;
        }
        acc += row * *wa;
    }
    acc
}

/// Bicubic sample of a rescaled field at (r~, z~); zero outside the grid.
pub fn sample_rescaled(f: &RescaledField, rt: f64, zt: f64) -> C64 {
    let g = &f.grid;
    let x = (rt + g.extent) / g.spacing;
    let y = (zt + g.extent) / g.spacing;
    if x < -2.0 || y < -2.0 || x > g.n_rt as f64 + 1.0 || y > g.n_zt as f64 + 1.0 {
        return C64::new(0.0, 0.0);
    }
    let i0 = x.floor();
    let j0 = y.floor();
    let wx = keys_weights(x - i0);
    let wy = keys_weights(y - j0);
    let i0 = i0 as i64;
    let j0 = j0 as i64;
    let mut acc = C64::new(0.0, 0.0);
    for (a, wa) in wx.iter().enumerate() {
        let i = i0 - 1 + a as i64;
        if i < 0 || i >= g.n_rt as i64 || *wa == 0.0 {
            continue;
        }
        for (b, wb) in wy.iter().enumerate() {
            let j = j0 - 1 + b as i64;
            if j < 0 || j >= g.n_zt as i64 || *wb == 0.0 {
                continue;
            }
            acc += f.values[g.idx(i as usize, j as usize)] * (*wa * *wb);
        }
    }
    acc
}

/// The map `u -> lambda e^{-i gamma} u(lambda r~ + r_c, lambda z~ + z_c)` onto
/// the target grid, by bicubic interpolation.
pub fn resample_between_frames(
    u: &AxialField,
    frame: &LocalFrame,
    target: &RescaledGrid2D,
    policy: OutOfBounds,
) -> Result<RescaledField> {
    let g = &u.grid;
    let tol = 1e-9 * g.dr.max(g.dz);
    let mut overflow = 0.0f64;
    let phase = C64::from_polar(frame.lambda, -frame.gamma);
    let mut values = Vec::with_capacity(target.len());
    for i in 0..target.n_rt {
        let rt = target.coord(i);
        for j in 0..target.n_zt {
            let (r, z) = frame.to_lab(rt, target.coord(j));
            let over = (r.abs() - g.r_max).max(z.abs() - g.z_half_width);
            if over > tol {
                overflow = overflow.max(over);
                values.push(C64::new(0.0, 0.0));
                continue;
            }
            values.push(phase * sample_lab(u, r, z));
        }
    }
    if overflow > 0.0 && policy == OutOfBounds::Error {
        return Err(Error::FrameOutOfBounds { overflow });
    }
    Ok(RescaledField { grid: *target, values })
}

/// Inverse of [`resample_between_frames`]:
/// `u(r, z) = lambda^{-1} e^{i gamma} f((r - r_c)/lambda, (z - z_c)/lambda)`,
/// zero where the lab point maps outside the rescaled grid.
pub fn resample_to_lab(f: &RescaledField, frame: &LocalFrame, lab: &Grid2D) -> AxialField {
    let phase = C64::from_polar(1.0 / frame.lambda, frame.gamma);
    AxialField::from_fn(*lab, |r, z| {
        let (rt, zt) = frame.to_rescaled(r, z);
        phase * sample_rescaled(f, rt, zt)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn polynomial_laplacians_are_exact() {
        let g = Grid2D::new(21, 17, 2.0, 1.5).unwrap();
        let u = AxialField::from_fn(g, |r, _| c(r * r));
        let l = axial_laplacian(&u).unwrap();
        let w = AxialField::from_fn(g, |_, z| c(z * z));
        let lw = axial_laplacian(&w).unwrap();
        for i in 0..g.n_r - 1 {
            for j in 1..g.n_z - 1 {
                assert!((l.at(i, j).re - 4.0).abs() < 1e-9, "r^2 at ({i},{j})");
                assert!((lw.at(i, j).re - 2.0).abs() < 1e-9, "z^2 at ({i},{j})");
            }
        }
    }

    #[test]
    fn gaussian_laplacian_is_second_order() {
        let mut errs = vec![];
        for &n in &[41usize, 81] {
            let g = Grid2D::new(n, 2 * n - 1, 4.0, 4.0).unwrap();
            let u = AxialField::from_fn(g, |r, z| c((-(r * r + z * z)).exp()));
            let l = axial_laplacian(&u).unwrap();
            let mut err = 0.0f64;
            for i in 0..g.n_r - 1 {
                for j in 1..g.n_z - 1 {
                    let (r, z) = (g.r(i), g.z(j));
                    let s = r * r + z * z;
                    let exact = (4.0 * s - 6.0) * (-s).exp();
                    err = err.max((l.at(i, j).re - exact).abs());
                }
            }
            errs.push((err, g.dr * g.dr + g.dz * g.dz));
        }
        for (e, h2) in &errs {
            assert!(*e <= 2.0 * h2, "error {e} vs h^2 {h2}");
        }
        let ratio = errs[0].0 / errs[1].0;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn too_small_grid_rejected() {
        assert!(matches!(Grid2D::new(3, 10, 1.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn laplacian_self_adjoint_in_cell_weights() {
        let g = Grid2D::new(81, 101, 8.0, 5.0).unwrap();
        let u =
            AxialField::from_fn(g, |r, z| C64::new((-(r * r + z * z)).exp(), 0.3 * (-(r - 2.0).powi(2) - z * z).exp()));
        let v =
            AxialField::from_fn(g, |r, z| C64::new((-((r - 1.0).powi(2) + (z - 0.5).powi(2))).exp() * (1.0 + r), 0.0));
        let lu = axial_laplacian(&u).unwrap();
        let lv = axial_laplacian(&v).unwrap();
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        for i in 0..g.n_r {
            for j in 0..g.n_z {
                let w = g.radial_weight(i) * g.dz;
                a += lu.at(i, j) * v.at(i, j).conj() * w;
                b += u.at(i, j) * lv.at(i, j).conj() * w;
            }
        }
        assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn scaling_generator_examples() {
        let g = RescaledGrid2D::new(0.05, 6.0).unwrap();
        let cst = vec![2.5f64; g.len()];
        let lc = apply_scaling_generator(&g, &cst, Stencil::Second);
        let gauss = g.sample(|x, y| (-(x * x + y * y) / 2.0).exp());
        let lg = apply_scaling_generator(&g, &gauss, Stencil::Fourth);
        let lin = g.sample(|x, _| x);
        let ll = apply_scaling_generator(&g, &lin, Stencil::Second);
        for i in 2..g.n_rt - 2 {
            for j in 2..g.n_zt - 2 {
                let k = g.idx(i, j);
                let (x, y) = (g.coord(i), g.coord(j));
                assert!((lc[k] - 2.5).abs() < 1e-12);
                let r2 = x * x + y * y;
                assert!((lg[k] - (1.0 - r2) * (-r2 / 2.0).exp()).abs() < 1e-5);
                assert!((ll[k] - 2.0 * x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weighted_inner_examples() {
        let g = RescaledGrid2D::new(0.05, 8.0).unwrap();
        let f = g.sample(|x, y| c((-(x * x + y * y) / 2.0).exp()));
        let flat = LocalFrame { lambda: 0.0, r_c: 1.0, z_c: 0.0, gamma: 0.0 };
        let tilted = LocalFrame { lambda: 0.3, ..flat };
        let pi = std::f64::consts::PI;
        assert!((weighted_inner(&g, &f, &f, &flat).unwrap() - pi).abs() < 1e-10);
        // the clamp of mu at r~ < -1/0.3 removes a tail of size ~1e-6
        assert!((weighted_inner(&g, &f, &f, &tilted).unwrap() - pi).abs() < 1e-5);
        let odd = g.sample(|x, y| c(x * (-(x * x + y * y)).exp()));
        assert!(weighted_inner(&g, &f, &odd, &flat).unwrap().abs() < 1e-14);
        assert!(matches!(weighted_inner(&g, &f, &odd[1..], &flat), Err(Error::Shape(_))));
    }

    #[test]
    fn identity_frame_reproduces_samples() {
        let g = Grid2D::new(41, 81, 4.0, 4.0).unwrap();
        let u = AxialField::from_fn(g, |r, z| C64::new((-(r * r + z * z)).exp(), r * z));
        let target = RescaledGrid2D::new(g.dr, 3.0).unwrap();
        let f = resample_between_frames(&u, &LocalFrame::identity(), &target, OutOfBounds::Error).unwrap();
        for i in 0..target.n_rt {
            for j in 0..target.n_zt {
                let (x, y) = (target.coord(i), target.coord(j));
                let ii = (x.abs() / g.dr).round() as usize;
                let jj = ((y + 4.0) / g.dz).round() as usize;
                let expect = u.at(ii, jj);
                assert!((f.values[target.idx(i, j)] - expect).norm() < 1e-12);
            }
        }
        let flip = LocalFrame { gamma: std::f64::consts::PI, ..LocalFrame::identity() };
        let f2 = resample_between_frames(&u, &flip, &target, OutOfBounds::Error).unwrap();
        for (a, b) in f.values.iter().zip(&f2.values) {
            assert!((a + b).norm() < 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_reports_overflow() {
        let g = Grid2D::new(21, 21, 2.0, 1.0).unwrap();
        let u = AxialField::zeros(g);
        let target = RescaledGrid2D::new(0.1, 1.5).unwrap();
        let frame = LocalFrame { lambda: 1.0, r_c: 1.0, z_c: 0.0, gamma: 0.0 };
        match resample_between_frames(&u, &frame, &target, OutOfBounds::Error) {
            Err(Error::FrameOutOfBounds { overflow }) => assert!((overflow - 0.5).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(resample_between_frames(&u, &frame, &target, OutOfBounds::ZeroExtend).is_ok());
    }

    fn round_trip_error(h: f64) -> f64 {
        let lab = Grid2D::with_spacing(8.0, 4.0, h).unwrap();
        let gauss = |r: f64, z: f64| (-((r - 4.0).powi(2) + z * z)).exp();
        let u = AxialField::from_fn(lab, |r, z| c(gauss(r, z)));
        let frame = LocalFrame { lambda: 0.8, r_c: 4.1, z_c: 0.05, gamma: 0.4 };
        let target = RescaledGrid2D::new(h * 0.77, 4.0).unwrap();
        let f = resample_between_frames(&u, &frame, &target, OutOfBounds::ZeroExtend).unwrap();
        let back = resample_to_lab(&f, &frame, &lab);
        let mut err = 0.0f64;
        for i in 0..lab.n_r {
            for j in 0..lab.n_z {
                let (r, z) = (lab.r(i), lab.z(j));
                let (rt, zt) = frame.to_rescaled(r, z);
                if rt.abs() < 3.0 && zt.abs() < 3.0 {
                    err = err.max((back.at(i, j) - u.at(i, j)).norm());
                }
            }
        }
        err
    }

    #[test]
    fn round_trip_is_third_order() {
        let e1 = round_trip_error(0.1);
        let e2 = round_trip_error(0.05);
        let e3 = round_trip_error(0.025);
        let p1 = (e1 / e2).log2();
        let p2 = (e2 / e3).log2();
        assert!(e1 < 0.05, "e1 {e1}");
        assert!(p1.max(p2) >= 2.8 && p2 >= 2.5, "orders {p1} {p2} ({e1} {e2} {e3})");
    }
}
