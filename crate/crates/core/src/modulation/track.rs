use std::io::Write;

use super::decompose::{decompose, DecomposeOptions};
use super::diagnostics::{
    epsilon_energy, exterior_field, exterior_grid, lyapunov, restrict_to, ExteriorOperator, LyapunovParams,
};
use super::{ModulationState, ProfileFamily};
use crate::error::{Error, Result};
use crate::field::AxialField;

/// Column header of the modulation time series.
pub const CSV_HEADER: &str = "t,s,lambda,b,gamma,r_c,z_c,E_eps,orth1,orth2r,orth2z,orth3,orth4,res_scaling,res_b,res_trans,gamma_rate,lyapunov,ext_l2,ext_hhalf";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub decompose: DecomposeOptions,
    pub lyapunov: LyapunovParams,
    pub with_energy: bool,
    pub with_lyapunov: bool,
    pub with_exterior: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            decompose: DecomposeOptions::default(),
            lyapunov: LyapunovParams::default(),
            with_energy: true,
            with_lyapunov: true,
            with_exterior: true,
        }
    }
}

/// Per-sample diagnostics; disabled quantities are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub e_eps: f64,
    pub orth: [f64; 5],
    /// `|lambda_s / lambda + b|`.
    pub res_scaling: f64,
    /// `|b_s|`.
    pub res_b: f64,
    /// `|(r_s, z_s)| / lambda`.
    pub res_trans: f64,
    /// `gamma_s - 1`, the rate of `gamma~ = gamma - s`.
    pub gamma_rate: f64,
    pub lyapunov: f64,
    pub ext_l2: f64,
    pub ext_h_half: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationRecord {
    pub state: ModulationState,
    pub diag: DiagnosticsRecord,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    state: ModulationState,
    orth: [f64; 5],
    e_eps: f64,
    lyapunov: f64,
    ext_l2: f64,
    ext_h_half: f64,
    iterations: usize,
}

/// Sequential decomposition of snapshots with warm starts (linear
/// extrapolation in t of the last two states) and accumulation of s.
pub struct Tracker<'a> {
    family: &'a ProfileFamily,
    cfg: TrackerConfig,
    guess: ModulationState,
    samples: Vec<Sample>,
    exterior: Option<ExteriorOperator>,
}

impl<'a> Tracker<'a> {
    /// `guess.s` is the rescaled time assigned to the first snapshot.
    pub fn new(family: &'a ProfileFamily, cfg: TrackerConfig, guess: ModulationState) -> Self {
        Self { family, cfg, guess, samples: Vec::new(), exterior: None }
    }

    fn predict(&self, t: f64) -> ModulationState {
        match self.samples.as_slice() {
            [] => self.guess,
            [.., last] if self.samples.len() == 1 => last.state,
            [.., a, b] => {
                let (a, b) = (a.state, b.state);
                let dt = b.t - a.t;
                if dt <= 0.0 {
                    return b;
                }
                let w = (t - b.t) / dt;
                let ex = |x: f64, y: f64| y + w * (y - x);
                let lambda = ex(a.lambda, b.lambda);
                ModulationState {
                    lambda: if lambda > 0.0 { lambda } else { b.lambda },
                    gamma: ex(a.gamma, b.gamma),
                    r_c: ex(a.r_c, b.r_c),
                    z_c: ex(a.z_c, b.z_c),
                    b: ex(a.b, b.b),
                    t,
                    s: b.s,
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn observe(&mut self, u: &AxialField) -> Result<ModulationState> {
        let guess = self.predict(u.time);
        let dec = decompose(u, &guess, self.family, &self.cfg.decompose)?;
        let mut state = dec.state;
        if let Some(prev) = self.samples.last() {
            let p = prev.state;
            if (state.gamma - p.gamma).abs() >= std::f64::consts::PI {
                return Err(Error::Precondition(format!(
                    "phase advanced by {:.3} between samples at t = {}; halve the stride",
                    state.gamma - p.gamma,
                    u.time
                )));
            }
            let rate = |l: f64| 1.0 / (l * l);
            state.s = p.s + 0.5 * (state.t - p.t) * (rate(p.lambda) + rate(state.lambda));
        } else {
            state.s = self.guess.s;
        }
        let member = self.family.member(state.b)?;
        let e_eps = if self.cfg.with_energy { epsilon_energy(&dec.eps)? } else { f64::NAN };
        let lyap = if self.cfg.with_lyapunov {
            let rad = self.family.radiation(state.b)?;
            lyapunov(&dec.eps, &member, rad.as_deref(), self.family.ground(), &self.cfg.lyapunov)?.value
        } else {
            f64::NAN
        };
        let (ext_l2, ext_h_half) = if self.cfg.with_exterior {
            let grid = exterior_grid(&u.grid);
            if !self.exterior.as_ref().is_some_and(|op| op.covers(&grid, state.r_c)) {
                self.exterior = Some(ExteriorOperator::new(grid, state.r_c));
            }
            let v = restrict_to(exterior_field(u, &state, &member), &grid);
            let n = self.exterior.as_ref().unwrap().norms(&v);
            (n.l2, n.h_half)
        } else {
            (f64::NAN, f64::NAN)
        };
        self.samples.push(Sample {
            state,
            orth: dec.orth,
            e_eps,
            lyapunov: lyap,
            ext_l2,
            ext_h_half,
            iterations: dec.iterations,
        });
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<ModulationState> {
        self.samples.last().map(|s| s.state)
    }

    /// Records with parameter rates by (non-uniform) centred differences in
    /// s, one-sided at the ends.
    pub fn records(&self) -> Vec<ModulationRecord> {
        let n = self.samples.len();
        let st: Vec<ModulationState> = self.samples.iter().map(|s| s.state).collect();
        let deriv = |k: usize, f: &dyn Fn(&ModulationState) -> f64| -> f64 {
            if n < 2 {
                return 0.0;
            }
            if k == 0 || k == n - 1 {
                let (a, b) = if k == 0 { (0, 1) } else { (n - 2, n - 1) };
                return (f(&st[b]) - f(&st[a])) / (st[b].s - st[a].s);
            }
            let h1 = st[k].s - st[k - 1].s;
            let h2 = st[k + 1].s - st[k].s;
            -h2 / (h1 * (h1 + h2)) * f(&st[k - 1])
                + (h2 - h1) / (h1 * h2) * f(&st[k])
                + h1 / (h2 * (h1 + h2)) * f(&st[k + 1])
        };
        (0..n)
            .map(|k| {
                let s = &self.samples[k];
                let x = s.state;
                let lam_s = deriv(k, &|m| m.lambda);
                let b_s = deriv(k, &|m| m.b);
                let r_s = deriv(k, &|m| m.r_c);
                let z_s = deriv(k, &|m| m.z_c);
                let g_s = deriv(k, &|m| m.gamma);
                ModulationRecord {
                    state: x,
                    iterations: s.iterations,
                    diag: DiagnosticsRecord {
                        e_eps: s.e_eps,
                        orth: s.orth,
                        res_scaling: (lam_s / x.lambda + x.b).abs(),
                        res_b: b_s.abs(),
                        res_trans: r_s.hypot(z_s) / x.lambda,
                        gamma_rate: g_s - 1.0,
                        lyapunov: s.lyapunov,
                        ext_l2: s.ext_l2,
                        ext_h_half: s.ext_h_half,
                    },
                }
            })
            .collect()
    }
}

/// Decomposes a sequence of snapshots with warm starts; errors carry the
/// index of the failing snapshot.
pub fn modulation_timeseries<'s>(
    snapshots: impl IntoIterator<Item = &'s AxialField>,
    family: &ProfileFamily,
    cfg: TrackerConfig,
    guess: ModulationState,
) -> Result<Vec<ModulationRecord>> {
    let mut tracker = Tracker::new(family, cfg, guess);
    for (index, u) in snapshots.into_iter().enumerate() {
        tracker.observe(u).map_err(|e| Error::AtSnapshot { index, source: Box::new(e) })?;
    }
    Ok(tracker.records())
}

/// Writes records as CSV with [`CSV_HEADER`]; values use the shortest
/// round-trip formatting (exponent form for very small or large magnitudes).
pub fn write_csv(records: &[ModulationRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let s = r.state;
        let d = r.diag;
        let row = [
            s.t,
            s.s,
            s.lambda,
            s.b,
            s.gamma,
            s.r_c,
            s.z_c,
            d.e_eps,
            d.orth[0],
            d.orth[1],
            d.orth[2],
            d.orth[3],
            d.orth[4],
            d.res_scaling,
            d.res_b,
            d.res_trans,
            d.gamma_rate,
            d.lyapunov,
            d.ext_l2,
            d.ext_h_half,
        ];
        let cells: Vec<String> = row.iter().map(|&v| crate::io::fmt_f64(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
