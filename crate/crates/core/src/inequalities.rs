//! Quadrature checks of the axially symmetric Gagliardo-Nirenberg
//! inequality `|f|_4^4 <= (1/eps) |f|_2^2 |grad f|_2^2` on `r > eps`, and of
//! its interpolation family, plus a seeded fuzz campaign.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{AxialField, Grid2D};

#[derive(Debug, Clone, PartialEq)]
pub struct GNCheckResult {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs / rhs, 0 when rhs = 0.
    pub ratio: f64,
    pub field_id: String,
    /// The field was not decayed to 1e-8 of its peak at the outer walls.
    pub truncated: bool,
}

/// Integrals over `r > eps` in the measure r dr dz.
struct Restricted {
    weights: Vec<f64>,
    mass: f64,
    grad: f64,
    truncated: bool,
}

impl Restricted {
    fn new(f: &AxialField, eps: f64) -> Result<Self> {
        let g = &f.grid;
        if !(eps > 2.0 * g.dr) {
            return Err(Error::Precondition(format!("eps_radius = {eps} must exceed 2 dr = {}", 2.0 * g.dr)));
        }
        if eps >= g.r_max {
            return Err(Error::Precondition(format!("eps_radius = {eps} beyond r_max = {}", g.r_max)));
        }
        // row weight r_i |[r_i - dr/2, r_i + dr/2] n [eps, r_max]|
        let row: Vec<f64> = (0..g.n_r)
            .map(|i| {
                let r = g.r(i);
                let lo = (r - 0.5 * g.dr).max(eps);
                let hi = (r + 0.5 * g.dr).min(g.r_max);
                r * (hi - lo).max(0.0)
            })
            .collect();
        let mut weights = vec![0.0; g.len()];
        for i in 0..g.n_r {
            for j in 0..g.n_z {
                weights[g.idx(i, j)] = row[i] * g.z_weight(j);
            }
        }
        let (dr, dz) = gradient(f);
        let mut mass = 0.0;
        let mut grad = 0.0;
        for k in 0..g.len() {
            mass += weights[k] * f.values[k].norm_sqr();
            grad += weights[k] * (dr[k].norm_sqr() + dz[k].norm_sqr());
        }
        Ok(Self { weights, mass, grad, truncated: !decayed(f) })
    }

    fn power(&self, f: &AxialField, q: f64) -> f64 {
        let half = 0.5 * q;
        f.values.iter().zip(&self.weights).map(|(v, w)| w * v.norm_sqr().powf(half)).sum()
    }
}

fn decayed(f: &AxialField) -> bool {
    let g = &f.grid;
    let peak = f.max_abs();
    let tol = 1e-8 * peak;
    let edge_r = (0..g.n_z).all(|j| f.at(g.n_r - 1, j).norm() <= tol);
    let edge_z = (0..g.n_r).all(|i| f.at(i, 0).norm() <= tol && f.at(i, g.n_z - 1).norm() <= tol);
    edge_r && edge_z
}

/// Fourth-order centred (d/dr, d/dz), second order next to the walls; the
/// axis row has d/dr = 0 by symmetry.
fn gradient(f: &AxialField) -> (Vec<C64>, Vec<C64>) {
    let g = &f.grid;
    let d = |n: usize, h: f64, at: &dyn Fn(usize) -> C64, k: usize, even_mirror: bool| -> C64 {
        let get = |m: isize| -> C64 {
            if m < 0 {
                if even_mirror {
                    at((-m) as usize)
                } else {
                    C64::new(0.0, 0.0)
                }
            } else if m as usize >= n {
                C64::new(0.0, 0.0)
            } else {
                at(m as usize)
            }
        };
        let k = k as isize;
        if (k >= 2 || even_mirror) && (k as usize) + 2 < n {
            (get(k + 1) - get(k - 1)) * (8.0 / (12.0 * h)) - (get(k + 2) - get(k - 2)) / (12.0 * h)
        } else {
            (get(k + 1) - get(k - 1)) / (2.0 * h)
        }
    };
    let mut dr = vec![C64::new(0.0, 0.0); g.len()];
    let mut dz = vec![C64::new(0.0, 0.0); g.len()];
    for i in 0..g.n_r {
        for j in 0..g.n_z {
            let k = g.idx(i, j);
            dr[k] = if i == 0 { C64::new(0.0, 0.0) } else { d(g.n_r, g.dr, &|m| f.at(m, j), i, true) };
            dz[k] = d(g.n_z, g.dz, &|m| f.at(i, m), j, false);
        }
    }
    (dr, dz)
}

fn result(lhs: f64, rhs: f64, field_id: &str, truncated: bool) -> GNCheckResult {
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    GNCheckResult { lhs, rhs, ratio, field_id: field_id.to_string(), truncated }
}

/// `|f|_4^4` against `(1/eps) |f|_2^2 |grad f|_2^2`, all on `r > eps`.
pub fn axial_gn_check(f: &AxialField, eps_radius: f64) -> Result<GNCheckResult> {
    let ri = Restricted::new(f, eps_radius)?;
    let lhs = ri.power(f, 4.0);
    Ok(result(lhs, ri.mass * ri.grad / eps_radius, "", ri.truncated))
}

/// `|f|_{p+1}^{p+1}` against `2^{p-1} eps^{-(p-1)/2} |f|_2^2 |grad f|_2^{p-1}`.
pub fn interpolation_check(f: &AxialField, p: f64, eps_radius: f64) -> Result<GNCheckResult> {
    if !(1.0..=3.0).contains(&p) {
        return Err(Error::Precondition(format!("interpolation exponent p = {p} outside [1, 3]")));
    }
    let ri = Restricted::new(f, eps_radius)?;
    Ok(interp(&ri, f, p, eps_radius, ""))
}

fn interp(ri: &Restricted, f: &AxialField, p: f64, eps: f64, id: &str) -> GNCheckResult {
    let lhs = if p == 1.0 { ri.mass } else { ri.power(f, p + 1.0) };
    let c = 2f64.powf(p - 1.0) / eps.powf(0.5 * (p - 1.0));
    let rhs = if p == 1.0 { ri.mass } else { c * ri.mass * ri.grad.powf(0.5 * (p - 1.0)) };
    result(lhs, rhs, id, ri.truncated)
}

/// Worst case of one inequality over a campaign.
#[derive(Debug, Clone)]
pub struct FuzzOutcome {
    /// None for the Gagliardo-Nirenberg inequality, Some(p) for the
    /// interpolation family.
    pub exponent: Option<f64>,
    pub worst: GNCheckResult,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct FuzzReport {
    pub samples: usize,
    pub seed: u64,
    pub eps_radius: f64,
    pub outcomes: Vec<FuzzOutcome>,
}

/// Allowed quadrature slack on the ratio.
pub const RATIO_SLACK: f64 = 1e-3;

/// Random axially symmetric test field: one to three complex Gaussian
/// bumps in (r, z) times plane waves, on a fixed grid with spacing 0.1.
pub fn fuzz_field(seed: u64, index: u64) -> (AxialField, String) {
    let grid = Grid2D::with_spacing(16.0, 10.0, 0.1).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let n = rng.random_range(1..=3);
    let mut bumps = Vec::with_capacity(n);
    for _ in 0..n {
        let amp = C64::from_polar(rng.random_range(0.2..2.0), rng.random_range(0.0..std::f64::consts::TAU));
        let r0 = rng.random_range(0.0..6.0);
        let z0 = rng.random_range(-1.5..1.5);
        let wr = rng.random_range(0.3..1.2);
        let wz = rng.random_range(0.3..1.2);
        let kr = rng.random_range(-3.0..3.0);
        let kz = rng.random_range(-3.0..3.0);
        bumps.push((amp, r0, z0, wr, wz, kr, kz));
    }
    // even in r so the field is smooth through the axis
    let mut values = vec![C64::new(0.0, 0.0); grid.len()];
    for &(amp, r0, z0, wr, wz, kr, kz) in &bumps {
        let fr: Vec<C64> = (0..grid.n_r)
            .map(|i| {
                let r = grid.r(i);
                let e = |x: f64| (-(x - r0).powi(2) / (2.0 * wr * wr)).exp();
                C64::from_polar(e(r), kr * r) + C64::from_polar(e(-r), -kr * r)
            })
            .collect();
        let fz: Vec<C64> = (0..grid.n_z)
            .map(|j| {
                let z = grid.z(j);
                C64::from_polar((-(z - z0).powi(2) / (2.0 * wz * wz)).exp(), kz * z)
            })
            .collect();
        for i in 0..grid.n_r {
            for j in 0..grid.n_z {
                values[grid.idx(i, j)] += amp * fr[i] * fz[j];
            }
        }
    }
    let id = format!("seed={seed} index={index} bumps={n}");
    (AxialField::from_values(grid, values, 0.0).expect("matching length"), id)
}

/// Runs `samples` random fields through the Gagliardo-Nirenberg check and
/// the interpolation checks at each exponent in `exponents`.
pub fn fuzz_campaign(samples: usize, seed: u64, eps_radius: f64, exponents: &[f64]) -> Result<FuzzReport> {
    let mut outcomes: Vec<FuzzOutcome> = std::iter::once(None)
        .chain(exponents.iter().map(|&p| Some(p)))
        .map(|exponent| FuzzOutcome { exponent, worst: result(0.0, 0.0, "", false), violations: 0 })
        .collect();
    if samples == 0 {
        return Err(Error::Precondition("fuzz campaign needs at least one sample".into()));
    }
    for &p in exponents {
        if !(1.0..=3.0).contains(&p) {
            return Err(Error::Precondition(format!("interpolation exponent p = {p} outside [1, 3]")));
        }
    }
    for index in 0..samples as u64 {
        let (f, id) = fuzz_field(seed, index);
        let ri = Restricted::new(&f, eps_radius)?;
        for o in outcomes.iter_mut() {
            let r = match o.exponent {
                None => result(ri.power(&f, 4.0), ri.mass * ri.grad / eps_radius, &id, ri.truncated),
                Some(p) => interp(&ri, &f, p, eps_radius, &id),
            };
            if r.ratio > 1.0 + RATIO_SLACK {
                o.violations += 1;
            }
            if r.ratio > o.worst.ratio {
                o.worst = r;
            }
        }
    }
    Ok(FuzzReport { samples, seed, eps_radius, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(h: f64) -> AxialField {
        let g = Grid2D::with_spacing(10.0, 6.0, h).unwrap();
        AxialField::from_fn(g, |r, z| C64::new((-((r - 2.0).powi(2) + z * z)).exp(), 0.0))
    }

    #[test]
    fn zero_field() {
        let f = AxialField::zeros(Grid2D::with_spacing(5.0, 5.0, 0.1).unwrap());
        let r = axial_gn_check(&f, 0.5).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ring_gaussian_below_one() {
        let f = ring(0.02);
        let gn = axial_gn_check(&f, 1.0).unwrap();
        assert!(gn.ratio < 1.0 && gn.ratio > 0.0 && !gn.truncated, "{gn:?}");
        let p2 = interpolation_check(&f, 2.0, 1.0).unwrap();
        assert!(p2.ratio < 1.0, "{p2:?}");
    }

    #[test]
    fn gn_lhs_matches_quadrature_oracle() {
        // int_{r>1} e^{-4((r-2)^2+z^2)} r dr dz with the z integral exact
        let f = ring(0.01);
        let gn = axial_gn_check(&f, 1.0).unwrap();
        let zpart = (std::f64::consts::PI / 4.0).sqrt();
        let n = 200_000;
        let h = 9.0 / n as f64;
        let rpart: f64 = (0..n)
            .map(|k| {
                let r = 1.0 + (k as f64 + 0.5) * h;
                (-4.0 * (r - 2.0) * (r - 2.0)).exp() * r * h
            })
            .sum();
        assert!((gn.lhs / (zpart * rpart) - 1.0).abs() < 1e-3, "{} vs {}", gn.lhs, zpart * rpart);
    }

    #[test]
    fn degenerate_and_endpoint_exponents() {
        let f = ring(0.05);
        let p1 = interpolation_check(&f, 1.0, 1.0).unwrap();
        assert_eq!(p1.ratio, 1.0);
        let p3 = interpolation_check(&f, 3.0, 1.0).unwrap();
        let gn = axial_gn_check(&f, 1.0).unwrap();
        assert!((p3.lhs / gn.lhs - 1.0).abs() < 1e-12);
        // the interpolation constant at p = 3 is 4/eps against 1/eps
        assert!((p3.ratio * 4.0 / gn.ratio - 1.0).abs() < 1e-12);
        assert!(interpolation_check(&f, 3.5, 1.0).is_err());
        assert!(axial_gn_check(&f, 0.05).is_err());
    }

    #[test]
    fn scaling_and_truncation_flag() {
        let f = ring(0.05);
        let a = 3.7;
        let g = AxialField { values: f.values.iter().map(|v| v * a).collect(), ..f.clone() };
        let (r1, r2) = (axial_gn_check(&f, 1.0).unwrap(), axial_gn_check(&g, 1.0).unwrap());
        assert!((r2.lhs / (a.powi(4) * r1.lhs) - 1.0).abs() < 1e-12);
        assert!((r2.ratio / r1.ratio - 1.0).abs() < 1e-12);
        let wide = AxialField::from_fn(Grid2D::with_spacing(4.0, 4.0, 0.05).unwrap(), |r, z| {
            C64::new((-((r - 2.0).powi(2) + z * z) / 4.0).exp(), 0.0)
        });
        assert!(axial_gn_check(&wide, 1.0).unwrap().truncated);
    }

    #[test]
    fn rhs_non_increasing_in_eps_for_outer_support() {
        let g = Grid2D::with_spacing(10.0, 5.0, 0.02).unwrap();
        let f = AxialField::from_fn(g, |r, z| {
            let x = ((r - 3.0).powi(2) + z * z) / 0.5;
            C64::new(if x < 1.0 { (1.0 - x).powi(4) } else { 0.0 }, 0.0)
        });
        let mut prev = f64::INFINITY;
        for k in 1..=10 {
            let rhs = axial_gn_check(&f, 0.1 * k as f64).unwrap().rhs;
            assert!(rhs <= prev);
            prev = rhs;
        }
    }

    #[test]
    fn small_campaign_has_no_violations() {
        let rep = fuzz_campaign(50, 7, 0.5, &[1.5, 2.0, 2.5]).unwrap();
        assert_eq!(rep.outcomes.len(), 4);
        for o in &rep.outcomes {
            assert_eq!(o.violations, 0, "{o:?}");
            assert!(o.worst.ratio > 0.0);
        }
    }
}
