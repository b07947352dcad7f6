use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::profiles::{
    solve_qb, solve_radiation, truncate, GroundState, ProfileError, ProfileSample, RadialProfile, Radiation,
    TruncatedProfile,
};

/// Below this |b| the family blends Q with the member at `BLEND_B` instead
/// of shooting (R_b ~ 2/b makes direct solves long and pointless there).
pub const BLEND_B: f64 = 0.01;
const CACHE_LIMIT: usize = 64;
const SHOT_TOL: f64 = 1e-13;

#[derive(Debug)]
struct Shot {
    tq: Arc<TruncatedProfile>,
    psi: Arc<ProfileError>,
}

/// `b -> Q~_b` for all real b, with solved members cached by the bit
/// pattern of b.
#[derive(Debug)]
pub struct ProfileFamily {
    ground: Arc<GroundState>,
    flat: Arc<TruncatedProfile>,
    pub eta: f64,
    cache: Mutex<HashMap<u64, Arc<Shot>>>,
    radiation: Mutex<HashMap<u64, Arc<Radiation>>>,
}

#[derive(Debug, Clone)]
enum Kind {
    Flat,
    Shot(Arc<TruncatedProfile>),
    /// Amplitude `(1 - w) Q + w phi P_{BLEND_B}`, w = (b / BLEND_B)^2, with
    /// the phase `e^{-i b R^2 / 4}`; `P_b - Q = O(b^2)`.
    Blend {
        shot: Arc<TruncatedProfile>,
        w: f64,
    },
}

/// One member `Q~_b` of the family. Negative b is the complex conjugate of
/// the member at |b|.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub b: f64,
    flat: Arc<TruncatedProfile>,
    kind: Kind,
}

impl ProfileFamily {
    pub fn new(ground: Arc<GroundState>, eta: f64) -> Self {
        Self {
            flat: Arc::new(TruncatedProfile::flat(ground.clone())),
            ground,
            eta,
            cache: Mutex::new(HashMap::new()),
            radiation: Mutex::new(HashMap::new()),
        }
    }

    pub fn ground(&self) -> &Arc<GroundState> {
        &self.ground
    }

    fn shot(&self, b: f64) -> Result<Arc<Shot>> {
        let key = b.to_bits();
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let p = Arc::new(solve_qb(b, self.eta, SHOT_TOL, self.ground.q0)?);
        let (tq, psi) = truncate(p);
        let shot = Arc::new(Shot { tq: Arc::new(tq), psi: Arc::new(psi) });
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, shot.clone());
        Ok(shot)
    }

    pub fn member(&self, b: f64) -> Result<FamilyMember> {
        let a = b.abs();
        let kind = if a == 0.0 {
            Kind::Flat
        } else if a < BLEND_B {
            Kind::Blend { shot: self.shot(BLEND_B)?.tq.clone(), w: (a / BLEND_B).powi(2) }
        } else {
            Kind::Shot(self.shot(a)?.tq.clone())
        };
        Ok(FamilyMember { b, flat: self.flat.clone(), kind })
    }

    /// Outgoing radiation at b (on `[0, 3 R_b]`, spacing 0.005); `None` for
    /// |b| < BLEND_B, where it is of size `e^{-pi/b}`.
    pub fn radiation(&self, b: f64) -> Result<Option<Arc<Radiation>>> {
        if b.abs() < BLEND_B {
            return Ok(None);
        }
        let a = b.abs();
        let key = a.to_bits();
        if let Some(r) = self.radiation.lock().unwrap().get(&key) {
            return Ok(Some(r.clone()));
        }
        let shot = self.shot(a)?;
        let rad = Arc::new(solve_radiation(&shot.tq, &shot.psi, 3.0 * shot.tq.r_b, 0.005)?);
        let mut cache = self.radiation.lock().unwrap();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, rad.clone());
        Ok(Some(rad))
    }
}

fn with_phase(a: (f64, f64, f64), b: f64, r: f64) -> ProfileSample {
    let (a, da, d2a) = a;
    let e = C64::from_polar(1.0, -0.25 * b * r * r);
    let t1 = -0.5 * b * r;
    let t2 = -0.5 * b;
    ProfileSample {
        q: e * a,
        dq: e * C64::new(da, t1 * a),
        d2q: e * C64::new(d2a - t1 * t1 * a, 2.0 * t1 * da + t2 * a),
    }
}

impl FamilyMember {
    /// The solved truncated profile behind this member, if any.
    pub fn truncated(&self) -> Option<&TruncatedProfile> {
        match &self.kind {
            Kind::Shot(t) => Some(t),
            _ => None,
        }
    }
}

impl RadialProfile for FamilyMember {
    fn sample(&self, r: f64) -> ProfileSample {
        let s = match &self.kind {
            Kind::Flat => self.flat.sample(r),
            Kind::Shot(t) => t.sample(r),
            Kind::Blend { shot, w } => {
                if r > self.flat.r_b {
                    return ProfileSample::default();
                }
                let q = self.flat.amplitude(r);
                let p = shot.amplitude(r);
                let mix = |x: f64, y: f64| (1.0 - w) * x + w * y;
                with_phase((mix(q.0, p.0), mix(q.1, p.1), mix(q.2, p.2)), self.b.abs(), r)
            }
        };
        if self.b < 0.0 {
            s.conj()
        } else {
            s
        }
    }

    fn support(&self) -> f64 {
        match &self.kind {
            Kind::Shot(t) => t.r_b,
            _ => self.flat.r_b,
        }
    }

    fn b(&self) -> f64 {
        self.b
    }

    fn spacing(&self) -> f64 {
        match &self.kind {
            Kind::Shot(t) => t.base_spacing(),
            _ => self.flat.base_spacing(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Shot(t) => t.breakpoints(),
            _ => self.flat.breakpoints(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::solve_ground_state;

    fn family() -> ProfileFamily {
        ProfileFamily::new(Arc::new(solve_ground_state(0.01, 1e-12).unwrap()), 0.1)
    }

    #[test]
    fn members_across_regimes() {
        let f = family();
        let zero = f.member(0.0).unwrap();
        let q = f.ground().clone();
        for r in [0.0, 1.0, 3.0] {
            assert_eq!(zero.sample(r).q.re, q.eval(r).0);
        }
        // conjugation symmetry
        let p = f.member(0.2).unwrap();
        let m = f.member(-0.2).unwrap();
        for r in [0.5, 2.0, 7.0] {
            assert_eq!(p.sample(r).q.conj(), m.sample(r).q);
        }
        // the blend is continuous at the switch and tends to Q
        let below = f.member(BLEND_B * (1.0 - 1e-9)).unwrap();
        let at = f.member(BLEND_B).unwrap();
        for r in [0.0, 1.5, 4.0] {
            assert!((below.sample(r).q - at.sample(r).q).norm() < 1e-8);
        }
        let tiny = f.member(1e-5).unwrap();
        assert!((tiny.sample(1.0).q - zero.sample(1.0).q).norm() < 1e-5);
        assert!(f.radiation(0.005).unwrap().is_none());
        assert!(f.radiation(0.2).unwrap().is_some());
    }
}
