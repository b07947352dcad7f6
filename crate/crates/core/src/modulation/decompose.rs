use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64 as C64;

use super::{FamilyMember, ModulationState, ProfileFamily};
use crate::error::{Error, Result};
use crate::field::{
    gradient_2d, resample_between_frames, AxialField, EpsilonField, LocalFrame, OutOfBounds, RescaledGrid2D, Stencil,
};
use crate::profiles::RadialProfile;

/// Radius beyond which `e^{-R}` weights are below 1e-17 and windows stop.
pub const WEIGHT_CUTOFF: f64 = 40.0;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Half-width of the rescaled grid carrying epsilon; `None` picks
    /// `max(min(10/|b|, 40), R_b + 2)`.
    pub eps_extent: Option<f64>,
    /// Rescaled spacing; `None` uses the lab spacing over lambda, clamped
    /// to [0.1, 0.25].
    pub eps_spacing: Option<f64>,
    /// Reject guesses whose core-window `||eps|| / ||Q~_b||` exceeds this.
    pub basin_gate: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-10, max_iter: 50, eps_extent: None, eps_spacing: None, basin_gate: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub state: ModulationState,
    pub eps: EpsilonField,
    /// ORTH 1, ORTH 2 (r~, z~), ORTH 3, ORTH 4, each divided by the L2 norm
    /// of its profile direction.
    pub orth: [f64; 5],
    pub iterations: usize,
    /// `||eps||_{L2}` over the profile support, by lab quadrature.
    pub eps_core_l2: f64,
    /// `||eps||_{H1}` on the rescaled grid.
    pub eps_h1: f64,
}

struct OrthEval {
    f: [f64; 5],
    norms: [f64; 5],
    eps_l2: f64,
    q_l2: f64,
}

impl OrthEval {
    fn scaled(&self) -> [f64; 5] {
        std::array::from_fn(|k| if self.norms[k] > 0.0 { self.f[k] / self.norms[k] } else { self.f[k] })
    }

    fn merit(&self) -> f64 {
        self.scaled().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `lambda^{-1} e^{i gamma} Q~_b((r - r_c)/lambda, (z - z_c)/lambda)`.
#[inline]
pub fn core_value(member: &FamilyMember, frame: &LocalFrame, r: f64, z: f64) -> C64 {
    let (rt, zt) = frame.to_rescaled(r, z);
    let big_r = rt.hypot(zt);
    if big_r > member.support() {
        return C64::new(0.0, 0.0);
    }
    C64::from_polar(1.0 / frame.lambda, frame.gamma) * member.sample(big_r).q
}

/// Lab node index ranges covering the disc of rescaled radius `radius`.
fn window(u: &AxialField, frame: &LocalFrame, radius: f64) -> (usize, usize, usize, usize) {
    let g = &u.grid;
    let half = frame.lambda * radius;
    let clamp_r = |x: f64| (x / g.dr).clamp(0.0, (g.n_r - 1) as f64);
    let clamp_z = |x: f64| ((x + g.z_half_width) / g.dz).clamp(0.0, (g.n_z - 1) as f64);
    (
        clamp_r(frame.r_c - half).floor() as usize,
        clamp_r(frame.r_c + half).ceil() as usize,
        clamp_z(frame.z_c - half).floor() as usize,
        clamp_z(frame.z_c + half).ceil() as usize,
    )
}

/// The ORTH functionals `Re int eps conj(g)` for
/// `g in {R^2 Q~, r~ Q~, z~ Q~, i Lambda^2 Q~, i Lambda Q~}` in the 2D
/// measure, summed over lab nodes (`dr~ dz~ = dr dz / lambda^2`), with
/// `eps = lambda e^{-i gamma} u - Q~_b` evaluated at the nodes.
fn orth_eval(u: &AxialField, member: &FamilyMember, frame: &LocalFrame) -> OrthEval {
    let g = &u.grid;
    let support = member.support();
    let (i0, i1, j0, j1) = window(u, frame, support);
    let w = g.dr * g.dz / (frame.lambda * frame.lambda);
    let rot = C64::from_polar(frame.lambda, -frame.gamma);
    let mut f = [0.0; 5];
    let mut norms = [0.0; 5];
    let (mut e2, mut q2) = (0.0, 0.0);
    for i in i0..=i1 {
        let r = g.r(i);
        for j in j0..=j1 {
            let (rt, zt) = frame.to_rescaled(r, g.z(j));
            let big_r = rt.hypot(zt);
            if big_r > support {
                continue;
            }
            let s = member.sample(big_r);
            let eps = rot * u.values[g.idx(i, j)] - s.q;
            let i_unit = C64::new(0.0, 1.0);
            let dirs = [s.q * (big_r * big_r), s.q * rt, s.q * zt, i_unit * s.lambda2(big_r), i_unit * s.lambda(big_r)];
            for k in 0..5 {
                f[k] += w * (eps * dirs[k].conj()).re;
                norms[k] += w * dirs[k].norm_sqr();
            }
            e2 += w * eps.norm_sqr();
            q2 += w * s.q.norm_sqr();
        }
    }
    OrthEval { f, norms: norms.map(f64::sqrt), eps_l2: e2.sqrt(), q_l2: q2.sqrt() }
}

fn frame_of(x: &[f64; 5]) -> LocalFrame {
    LocalFrame { lambda: x[0], gamma: x[1], r_c: x[2], z_c: x[3] }
}

fn evaluate(u: &AxialField, family: &ProfileFamily, x: &[f64; 5]) -> Result<(OrthEval, FamilyMember)> {
    let member = family.member(x[4])?;
    Ok((orth_eval(u, &member, &frame_of(x)), member))
}

/// Solves the four orthogonality conditions (five scalars) for
/// `(lambda, gamma, r_c, z_c, b)` by Newton's method with a forward
/// difference Jacobian, starting from `guess`; builds epsilon on a rescaled
/// grid. The returned state keeps the guess's `s` and takes `t` from `u`.
pub fn decompose(
    u: &AxialField,
    guess: &ModulationState,
    family: &ProfileFamily,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    if !(guess.lambda > 0.0) {
        return Err(Error::Precondition(format!("decomposition needs lambda > 0, got {}", guess.lambda)));
    }
    let mut x = [guess.lambda, guess.gamma, guess.r_c, guess.z_c, guess.b];
    let (mut cur, _) = evaluate(u, family, &x)?;
    if cur.eps_l2 > opts.basin_gate * cur.q_l2 {
        return Err(Error::Precondition(format!(
            "guess outside the decomposition basin: ||eps|| / ||Q~_b|| = {:.3e}",
            cur.eps_l2 / cur.q_l2
        )));
    }
    let converged = |e: &OrthEval| {
        let r = e.scaled().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        r <= opts.newton_tol * e.eps_l2.max(1.0)
    };
    let mut iterations = 0;
    while !converged(&cur) {
        if iterations >= opts.max_iter {
            return Err(Error::Decomposition { iterations, residuals: cur.scaled() });
        }
        iterations += 1;
        let typical = [x[0], 1.0, x[0], x[0], 0.01];
        let mut jac = Matrix5::zeros();
        for c in 0..5 {
            let h = FD_STEP * x[c].abs().max(typical[c]);
            let mut xp = x;
            xp[c] += h;
            let (e, _) = evaluate(u, family, &xp)?;
            for k in 0..5 {
                jac[(k, c)] = (e.f[k] - cur.f[k]) / h;
            }
        }
        let rhs = Vector5::from_iterator(cur.f.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs).ok_or_else(|| Error::Decomposition { iterations, residuals: cur.scaled() })?;
        let m0 = cur.merit();
        let mut t = 1.0;
        let accepted = loop {
            let mut xn = x;
            for c in 0..5 {
                xn[c] += t * step[c];
            }
            if xn[0] > 0.0 {
                let (e, _) = evaluate(u, family, &xn)?;
                if e.merit() < m0 || t < 1e-3 {
                    break Some((xn, e));
                }
            }
            t *= 0.5;
            if t < 1e-3 {
                break None;
            }
        };
        let Some((xn, e)) = accepted else {
            return Err(Error::Decomposition { iterations, residuals: cur.scaled() });
        };
        let moved = (0..5).map(|c| (xn[c] - x[c]).abs() / x[c].abs().max(typical[c])).fold(0.0, f64::max);
        x = xn;
        cur = e;
        // stagnation at round-off level counts as converged
        if moved < 1e-14 && cur.merit() < 1e-8 {
            break;
        }
    }
    let (cur, member) = evaluate(u, family, &x)?;
    let frame = frame_of(&x);
    let eps = build_epsilon(u, &member, &frame, opts)?;
    let eps_h1 = h1_norm(&eps);
    let state = ModulationState { lambda: x[0], gamma: x[1], r_c: x[2], z_c: x[3], b: x[4], t: u.time, s: guess.s };
    Ok(Decomposition { state, eps, orth: cur.scaled(), iterations, eps_core_l2: cur.eps_l2, eps_h1 })
}

/// Starting point for Newton from a lone snapshot: the ring centre at the
/// peak of |u|, `lambda = q0 / max|u|`, the phase of u there, and the given
/// b (the peak fixes no b). The rescaled time is the one b would start at.
pub fn guess_from_peak(u: &AxialField, b: f64, q0: f64) -> Result<ModulationState> {
    let (k, peak) = u
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(kb, mb), (k, v)| if v.norm() > mb { (k, v.norm()) } else { (kb, mb) });
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Precondition("field has no finite nonzero peak".into()));
    }
    let g = &u.grid;
    let (i, j) = (k / g.n_z, k % g.n_z);
    Ok(ModulationState {
        lambda: q0 / peak,
        gamma: u.values[k].arg(),
        r_c: g.r(i),
        z_c: g.z(j),
        b,
        t: u.time,
        s: super::initial_rescaled_time(b),
    })
}

/// Default rescaled grid for epsilon at this frame and member.
pub fn epsilon_grid(
    u: &AxialField,
    member: &FamilyMember,
    lambda: f64,
    opts: &DecomposeOptions,
) -> Result<RescaledGrid2D> {
    let extent = opts.eps_extent.unwrap_or_else(|| {
        let tail = if member.b == 0.0 { WEIGHT_CUTOFF } else { (10.0 / member.b.abs()).min(WEIGHT_CUTOFF) };
        tail.max(member.support() + 2.0)
    });
    let spacing = opts.eps_spacing.unwrap_or_else(|| (u.grid.dr.max(u.grid.dz) / lambda).clamp(0.1, 0.25));
    RescaledGrid2D::new(spacing, extent)
}

/// `eps = lambda e^{-i gamma} (u - core)` sampled on the rescaled grid: the
/// core is subtracted at the lab nodes first, so only the smooth remainder is
/// interpolated (an exact core gives eps = 0 identically).
fn build_epsilon(
    u: &AxialField,
    member: &FamilyMember,
    frame: &LocalFrame,
    opts: &DecomposeOptions,
) -> Result<EpsilonField> {
    let grid = epsilon_grid(u, member, frame.lambda, opts)?;
    let mut w = u.clone();
    let (i0, i1, j0, j1) = window(u, frame, member.support());
    let g = u.grid;
    for i in i0..=i1 {
        for j in j0..=j1 {
            w.values[g.idx(i, j)] -= core_value(member, frame, g.r(i), g.z(j));
        }
    }
    let eps = resample_between_frames(&w, frame, &grid, OutOfBounds::ZeroExtend)?;
    Ok(EpsilonField { grid, values: eps.values, frame: *frame, b: member.b })
}

/// `(int |grad eps|^2 + |eps|^2)^{1/2}` on the rescaled grid.
pub fn h1_norm(eps: &EpsilonField) -> f64 {
    let (gx, gy) = gradient_2d(&eps.grid, &eps.values, Stencil::Fourth);
    let v: Vec<f64> =
        (0..eps.values.len()).map(|k| gx[k].norm_sqr() + gy[k].norm_sqr() + eps.values[k].norm_sqr()).collect();
    eps.grid.integrate(&v).sqrt()
}

/// A lab node under the core with the five ORTH
/// directions there.
pub(crate) struct CoreNode {
    pub k: usize,
    pub dirs: [C64; 5],
}

/// The nodes used by the ORTH quadrature and its weight `dr dz / lambda^2`.
pub(crate) fn core_nodes(u: &AxialField, member: &FamilyMember, frame: &LocalFrame) -> (Vec<CoreNode>, f64) {
    let g = &u.grid;
    let support = member.support();
    let (i0, i1, j0, j1) = window(u, frame, support);
    let i_unit = C64::new(0.0, 1.0);
    let mut out = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let (rt, zt) = frame.to_rescaled(g.r(i), g.z(j));
            let big_r = rt.hypot(zt);
            if big_r > support {
                continue;
            }
            let s = member.sample(big_r);
            out.push(CoreNode {
                k: g.idx(i, j),
                dirs: [s.q * (big_r * big_r), s.q * rt, s.q * zt, i_unit * s.lambda2(big_r), i_unit * s.lambda(big_r)],
            });
        }
    }
    (out, g.dr * g.dz / (frame.lambda * frame.lambda))
}
