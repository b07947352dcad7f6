//! Strang-split Crank-Nicolson integrator for `i u_t + Delta u + |u|^2 u = 0`
//! in (r, z) with Dirichlet walls, and the conserved quantities.
//!
//! The linear step is the Peaceman-Rachford factorization of Crank-Nicolson
//! with the finite-volume radial operator. Both one-dimensional operators
//! are self-adjoint in the grid's r dr dz weights and commute, so the step
//! is unitary in the discrete mass up to round-off.

use num_complex::Complex64 as C64;

use crate::cutoffs;
use crate::error::{Error, Result};
use crate::field::{AxialField, Grid2D};
use crate::tridiag::TriFactor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    /// Shrink dt so that `dt max|u|^2 <= theta_max`.
    pub adapt: bool,
    pub theta_max: f64,
    /// Off for the free Schrodinger equation.
    pub nonlinear: bool,
    /// The tridiagonal solves are direct; kept for reporting.
    pub linear_solver_tol: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self { dt: 1e-3, adapt: true, theta_max: 0.1, nonlinear: true, linear_solver_tol: 1e-10 }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= 0.1) {
            return Err(Error::Config(format!("theta_max must lie in (0, 0.1], got {}", self.theta_max)));
        }
        Ok(())
    }

    /// Step size for the current field.
    pub fn step_size(&self, max_abs: f64) -> Result<f64> {
        let m2 = if self.nonlinear { max_abs * max_abs } else { 0.0 };
        if self.adapt {
            if m2 == 0.0 {
                return Ok(self.dt);
            }
            return Ok(self.dt.min(self.theta_max / m2).max(MIN_DT));
        }
        if self.dt * m2 > self.theta_max {
            return Err(Error::Stability { rotation: self.dt * m2, theta_max: self.theta_max });
        }
        Ok(self.dt)
    }
}

pub const MIN_DT: f64 = 1e-10;

/// Cached factorizations of `1 - i tau A_r` and `1 - i tau A_z`.
struct Factors {
    dt: f64,
    radial: TriFactor,
    axial: TriFactor,
}

/// Integrator for one grid; keeps the factorizations for the last dt.
pub struct Stepper {
    pub grid: Grid2D,
    pub cfg: StepperConfig,
    factors: Option<Factors>,
    scratch: Vec<C64>,
}

/// Off-diagonal and diagonal coefficients of the radial operator on rows
/// 0..n_r-1 (the last row is a Dirichlet node).
fn radial_coeffs(g: &Grid2D) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = g.n_r - 1;
    let idr2 = 1.0 / (g.dr * g.dr);
    let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    lo[0] = 0.0;
    di[0] = -4.0 * idr2;
    up[0] = 4.0 * idr2;
    for i in 1..n {
        let r = g.r(i);
        let rp = (r + 0.5 * g.dr) / r;
        let rm = (r - 0.5 * g.dr) / r;
        lo[i] = rm * idr2;
        di[i] = -(rp + rm) * idr2;
        up[i] = rp * idr2;
    }
    (lo, di, up)
}

impl Stepper {
    pub fn new(grid: Grid2D, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        if grid.n_r < 4 || grid.n_z < 5 {
            return Err(Error::Shape(format!("grid {}x{} too small to step", grid.n_r, grid.n_z)));
        }
        Ok(Self { grid, cfg, factors: None, scratch: vec![C64::new(0.0, 0.0); grid.len()] })
    }

    fn factors(&mut self, dt: f64) -> &Factors {
        if self.factors.as_ref().map(|f| f.dt) != Some(dt) {
            let g = self.grid;
            let tau = C64::new(0.0, 0.5 * dt);
            let (lo, di, up) = radial_coeffs(&g);
            let a: Vec<C64> = lo.iter().map(|v| -tau * v).collect();
            let b: Vec<C64> = di.iter().map(|v| C64::new(1.0, 0.0) - tau * v).collect();
            let c: Vec<C64> = up.iter().map(|v| -tau * v).collect();
            let radial = TriFactor::new(&a, &b, &c).expect("Cayley factor is non-singular");
            let m = g.n_z - 2;
            let idz2 = 1.0 / (g.dz * g.dz);
            let a = vec![-tau * idz2; m];
            let b = vec![C64::new(1.0, 0.0) + tau * (2.0 * idz2); m];
            let axial = TriFactor::new(&a, &b, &a).expect("Cayley factor is non-singular");
            self.factors = Some(Factors { dt, radial, axial });
        }
        self.factors.as_ref().expect("just set")
    }

    /// One Strang step of size dt; returns the new field.
    pub fn step_with(&mut self, u: &AxialField, dt: f64) -> Result<AxialField> {
        if !self.grid.same_shape(&u.grid) {
            return Err(Error::Shape("field grid differs from the stepper grid".into()));
        }
        let mut v = u.values.clone();
        if self.cfg.nonlinear {
            phase(&mut v, 0.5 * dt);
        }
        self.linear(&mut v, dt);
        if self.cfg.nonlinear {
            phase(&mut v, 0.5 * dt);
        }
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Divergence { last_time: u.time });
        }
        Ok(AxialField { grid: u.grid, values: v, time: u.time + dt })
    }

    /// One step with the configured (possibly adapted) dt.
    pub fn step(&mut self, u: &AxialField) -> Result<AxialField> {
        if !u.is_finite() {
            return Err(Error::Divergence { last_time: u.time });
        }
        let dt = self.cfg.step_size(u.max_abs())?;
        self.step_with(u, dt)
    }

    /// `(1 - i tau A_z)^-1 (1 + i tau A_r) (1 - i tau A_r)^-1 (1 + i tau A_z)`.
    fn linear(&mut self, v: &mut [C64], dt: f64) {
        let g = self.grid;
        let (nr, nz) = (g.n_r, g.n_z);
        let tau = C64::new(0.0, 0.5 * dt);
        let idz2 = 1.0 / (g.dz * g.dz);
        let (lo, di, up) = radial_coeffs(&g);
        let mut w = std::mem::take(&mut self.scratch);
        w.resize(v.len(), C64::new(0.0, 0.0));
        // w = (1 + i tau A_z) v on interior nodes
        for i in 0..nr - 1 {
            let row = &v[i * nz..(i + 1) * nz];
            let out = &mut w[i * nz..(i + 1) * nz];
            out[0] = C64::new(0.0, 0.0);
            out[nz - 1] = C64::new(0.0, 0.0);
            for j in 1..nz - 1 {
                out[j] = row[j] + tau * ((row[j + 1] + row[j - 1] - row[j] * 2.0) * idz2);
            }
        }
        w[(nr - 1) * nz..].iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        // radial implicit solve, all columns at once
        {
            let f = self.factors(dt);
            f.radial.solve_rows(&mut w, nz, 1, nz - 2);
        }
        // v = (1 + i tau A_r) w
        for i in 0..nr - 1 {
            for j in 1..nz - 1 {
                let k = i * nz + j;
                let mut a = w[k] * di[i];
                if i > 0 {
                    a += w[k - nz] * lo[i];
                }
                if i + 1 < nr - 1 {
                    a += w[k + nz] * up[i];
                }
                v[k] = w[k] + tau * a;
            }
            v[i * nz] = C64::new(0.0, 0.0);
            v[i * nz + nz - 1] = C64::new(0.0, 0.0);
        }
        v[(nr - 1) * nz..].iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        // axial implicit solve row by row
        let f = self.factors.as_ref().expect("factored above");
        for i in 0..nr - 1 {
            f.axial.solve(&mut v[i * nz + 1..(i + 1) * nz - 1]);
        }
        self.scratch = w;
    }
}

/// `u <- u e^{i |u|^2 t}`.
fn phase(v: &mut [C64], t: f64) {
    for z in v.iter_mut() {
        let th = z.norm_sqr() * t;
        let (s, c) = if th.abs() < 1e-3 {
            let t2 = th * th;
            (th * (1.0 - t2 / 6.0 * (1.0 - t2 / 20.0)), 1.0 - t2 / 2.0 * (1.0 - t2 / 12.0))
        } else {
            th.sin_cos()
        };
        *z *= C64::new(c, s);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedSet {
    pub mass: f64,
    pub energy: f64,
    pub momentum_psi: f64,
    /// `int |grad u|^2`, consistent with the stepper's operator.
    pub grad_sq: f64,
}

/// Mass, energy and the psi-localized momentum in the r dr dz measure.
/// The kinetic term is the edge sum matching the finite-volume operator,
/// which makes it the quantity Crank-Nicolson conserves.
pub fn conserved(u: &AxialField, psi_ref: f64) -> ConservedSet {
    let g = &u.grid;
    let (nr, nz) = (g.n_r, g.n_z);
    let mass = u.integrate(|v| v.norm_sqr());
    let quartic = u.integrate(|v| v.norm_sqr() * v.norm_sqr());
    let mut grad = 0.0;
    for i in 0..nr - 1 {
        let rp = g.r(i) + 0.5 * g.dr;
        let mut s = 0.0;
        for j in 0..nz {
            s += g.z_weight(j) * (u.at(i + 1, j) - u.at(i, j)).norm_sqr();
        }
        grad += rp * s / g.dr;
    }
    for i in 0..nr {
        let mut s = 0.0;
        for j in 0..nz - 1 {
            s += (u.at(i, j + 1) - u.at(i, j)).norm_sqr();
        }
        grad += g.radial_weight(i) * s / g.dz;
    }
    let mut mom = 0.0;
    if psi_ref > 0.0 {
        for i in 1..nr - 1 {
            let (_, dpsi) = cutoffs::psi(g.r(i), psi_ref);
            if dpsi == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for j in 0..nz {
                let du = (u.at(i + 1, j) - u.at(i - 1, j)) / (2.0 * g.dr);
                s += g.z_weight(j) * (du * u.at(i, j).conj()).im;
            }
            mom += g.radial_weight(i) * dpsi * s;
        }
    }
    ConservedSet { mass, energy: 0.5 * grad - 0.25 * quartic, momentum_psi: mom, grad_sq: grad }
}

/// One row of the evolution time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub conserved: ConservedSet,
    pub max_abs: f64,
}

impl StepRecord {
    pub fn grad_norm(&self) -> f64 {
        self.conserved.grad_sq.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HaltReason {
    EndTime,
    MaxSteps,
    /// The core width proxy fell below the resolution floor.
    ResolutionFloor,
    Hook(String),
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HaltReason::EndTime => write!(f, "end time"),
            HaltReason::MaxSteps => write!(f, "max steps"),
            HaltReason::ResolutionFloor => write!(f, "resolution floor"),
            HaltReason::Hook(why) => write!(f, "{why}"),
        }
    }
}

/// What a hook asks the driver to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Control {
    Continue,
    Halt(String),
}

#[derive(Debug, Clone, Copy)]
pub struct RunLimits {
    pub t_end: f64,
    pub max_steps: usize,
    /// Record (and call the hook) every this many steps.
    pub stride: usize,
    /// Reference ring radius for the psi cutoff of the localized momentum.
    pub psi_ref: f64,
    /// Halt when `q0 / max|u| < floor_cells * dr`; 0 disables.
    pub floor_cells: f64,
    /// Ground-state peak used by the width proxy.
    pub q0: f64,
    /// Initial rescaled time.
    pub s0: f64,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            max_steps: usize::MAX,
            stride: 10,
            psi_ref: 0.0,
            floor_cells: 0.0,
            q0: 2.206_200_853_2,
            s0: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_field: AxialField,
    pub records: Vec<StepRecord>,
    pub halt: HaltReason,
    pub steps: usize,
    /// max |M(t) - M(0)| / M(0) over the records.
    pub mass_drift: f64,
    /// max |E(t) - E(0)| over the records, relative to the initial
    /// `1/2 int |grad u|^2`.
    pub energy_drift: f64,
}

/// Steps `u0` (with its wall nodes zeroed) until `t_end`, `max_steps`, the
/// resolution floor, or a hook halt. The hook sees the field and record at every stride.
pub fn run(
    u0: &AxialField,
    cfg: StepperConfig,
    limits: RunLimits,
    mut hook: impl FnMut(&AxialField, &StepRecord) -> Result<Control>,
) -> Result<Trajectory> {
    if !u0.is_finite() {
        return Err(Error::Precondition("initial field is not finite".into()));
    }
    let mut stepper = Stepper::new(u0.grid, cfg)?;
    let stride = limits.stride.max(1);
    // wall nodes are Dirichlet nodes; the first step would zero them anyway
    let mut u = u0.clone();
    let g = u.grid;
    for i in 0..g.n_r {
        for j in 0..g.n_z {
            if i == g.n_r - 1 || j == 0 || j == g.n_z - 1 {
                u.values[g.idx(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    let mut s = limits.s0;
    let mut records = Vec::new();
    let record = |u: &AxialField, step: usize, s: f64| StepRecord {
        step,
        t: u.time,
        s,
        conserved: conserved(u, limits.psi_ref),
        max_abs: u.max_abs(),
    };
    let first = record(&u, 0, s);
    let c0 = first.conserved;
    records.push(first);
    let mut halt = HaltReason::EndTime;
    if let Control::Halt(why) = hook(&u, &first)? {
        halt = HaltReason::Hook(why);
    }
    let mut steps = 0;
    let floor = limits.floor_cells * u0.grid.dr;
    while halt == HaltReason::EndTime && limits.t_end - u.time > 1e-6 * cfg.dt {
        if steps >= limits.max_steps {
            halt = HaltReason::MaxSteps;
            break;
        }
        let m = u.max_abs();
        if floor > 0.0 && m > 0.0 && limits.q0 / m < floor {
            halt = HaltReason::ResolutionFloor;
            break;
        }
        let dt = cfg.step_size(m)?.min(limits.t_end - u.time);
        let next = stepper.step_with(&u, dt)?;
        // rescaled time with the width proxy lambda = q0 / max|u|
        let m1 = next.max_abs();
        s += 0.5 * dt * (m * m + m1 * m1) / (limits.q0 * limits.q0);
        u = next;
        steps += 1;
        if steps % stride == 0 {
            let rec = record(&u, steps, s);
            records.push(rec);
            if let Control::Halt(why) = hook(&u, &rec)? {
                halt = HaltReason::Hook(why);
            }
        }
    }
    if records.last().map(|r| r.step) != Some(steps) {
        records.push(record(&u, steps, s));
    }
    let kin0 = 0.5 * c0.grad_sq;
    let mass_drift = if c0.mass > 0.0 {
        records.iter().map(|r| (r.conserved.mass - c0.mass).abs() / c0.mass).fold(0.0, f64::max)
    } else {
        0.0
    };
    let energy_drift = if kin0 > 0.0 {
        records.iter().map(|r| (r.conserved.energy - c0.energy).abs() / kin0).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(Trajectory { final_field: u, records, halt, steps, mass_drift, energy_drift })
}
