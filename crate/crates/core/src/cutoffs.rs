//! Smooth transition functions: the quintic smoothstep and the ring cutoffs
//! built from it.
//!
//! Ring cutoffs are written for a ring at radius 1 and rescaled by the
//! reference radius `r_ref` (the ring radius of the run).

/// Quintic smoothstep `6x^5 - 15x^4 + 10x^3` clamped to [0, 1], with its first
/// three derivatives.
pub fn smoothstep(x: f64) -> [f64; 4] {
    if x <= 0.0 {
        return [0.0; 4];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    smoothstep_poly(x)
}

/// The quintic of `smoothstep` without clamping; at 0 and 1 the third
/// derivative is the one-sided limit from inside.
pub fn smoothstep_poly(x: f64) -> [f64; 4] {
    let x2 = x * x;
    let x3 = x2 * x;
    [
        x3 * (10.0 + x * (-15.0 + 6.0 * x)),
        30.0 * x2 * (1.0 - x) * (1.0 - x),
        60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
        60.0 * (1.0 - 6.0 * x + 6.0 * x2),
    ]
}

/// Rises from 0 at `a` to 1 at `b`.
pub fn rise(x: f64, a: f64, b: f64) -> f64 {
    smoothstep((x - a) / (b - a))[0]
}

fn rise_d(x: f64, a: f64, b: f64) -> (f64, f64) {
    let w = b - a;
    let s = smoothstep((x - a) / w);
    (s[0], s[1] / w)
}

/// Tight external cutoff: 1 on [0, 13/14] and [14/13, inf), 0 on [15/16, 16/15].
pub fn chi0(r: f64, r_ref: f64) -> f64 {
    let x = r / r_ref;
    1.0 - rise(x, 13.0 / 14.0, 15.0 / 16.0) + rise(x, 16.0 / 15.0, 14.0 / 13.0)
}

/// Wide external cutoff: 1 on [0, 1/4] and [4, inf), 0 on [1/2, 2].
pub fn chi1(r: f64, r_ref: f64) -> f64 {
    let x = r / r_ref;
    1.0 - rise(x, 0.25, 0.5) + rise(x, 2.0, 4.0)
}

/// Internal cutoff: 0 on [0, 1/4] and [3, inf), equal to r on [1/2, 2].
/// Returns (psi, d psi / dr).
pub fn psi(r: f64, r_ref: f64) -> (f64, f64) {
    let x = r / r_ref;
    let (s1, d1) = rise_d(x, 0.25, 0.5);
    let (s2, d2) = rise_d(x, 2.0, 3.0);
    let g = s1 * (1.0 - s2);
    let dg = d1 * (1.0 - s2) - s1 * d2;
    (r_ref * x * g, g + x * dg)
}

/// 1 on [0, 1], 0 on [2, inf).
pub fn phi3(x: f64) -> f64 {
    1.0 - rise(x, 1.0, 2.0)
}

/// Monotone profile with phi4 = 0 on [0, 1/2], phi4 = 1 on [3, inf) and
/// phi4' = 1/3 on [1, 2], glued with C^1 cubic pieces.
pub fn phi4(x: f64) -> f64 {
    if x <= 0.5 {
        0.0
    } else if x <= 1.0 {
        let t = 2.0 * (x - 0.5);
        (5.0 / 6.0) * t * t - 0.5 * t * t * t
    } else if x <= 2.0 {
        1.0 / 3.0 + (x - 1.0) / 3.0
    } else if x <= 3.0 {
        let t = x - 2.0;
        2.0 / 3.0 + t / 3.0 + t * t / 3.0 - t * t * t / 3.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0)[0], 0.0);
        assert_eq!(smoothstep(1.0)[0], 1.0);
        assert!((smoothstep(0.5)[0] - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for &x in &[0.1, 0.37, 0.8] {
            let s = smoothstep(x);
            let p = smoothstep(x + h);
            let m = smoothstep(x - h);
            assert!(((p[0] - m[0]) / (2.0 * h) - s[1]).abs() < 1e-7);
            assert!(((p[1] - m[1]) / (2.0 * h) - s[2]).abs() < 1e-6);
            assert!(((p[2] - m[2]) / (2.0 * h) - s[3]).abs() < 1e-5);
        }
    }

    #[test]
    fn ring_cutoffs_take_prescribed_values() {
        for &r_ref in &[1.0, 10.0] {
            for &x in &[0.0, 0.1, 0.25, 4.0, 9.0] {
                assert_eq!(chi1(x * r_ref, r_ref), 1.0);
            }
            for &x in &[0.5, 1.0, 2.0] {
                assert_eq!(chi1(x * r_ref, r_ref), 0.0);
            }
            for &x in &[0.5, 0.9, 14.0 / 13.0 + 1e-9, 2.0] {
                assert_eq!(chi0(x * r_ref, r_ref), 1.0);
            }
            for &x in &[15.0 / 16.0, 1.0, 16.0 / 15.0] {
                assert!(chi0(x * r_ref, r_ref).abs() < 1e-15);
            }
            for &x in &[0.5, 1.0, 1.7, 2.0] {
                assert!((psi(x * r_ref, r_ref).0 - x * r_ref).abs() < 1e-12);
                assert!((psi(x * r_ref, r_ref).1 - 1.0).abs() < 1e-12);
            }
            for &x in &[0.1, 3.0, 5.0] {
                assert_eq!(psi(x * r_ref, r_ref).0, 0.0);
            }
        }
    }

    #[test]
    fn phi4_is_c1_and_monotone() {
        let pts = [0.5, 1.0, 2.0, 3.0];
        for &p in &pts {
            let l = phi4(p - 1e-9);
            let r = phi4(p + 1e-9);
            assert!((l - r).abs() < 1e-8);
            let dl = (phi4(p - 1e-7) - phi4(p - 2e-7)) / 1e-7;
            let dr = (phi4(p + 2e-7) - phi4(p + 1e-7)) / 1e-7;
            assert!((dl - dr).abs() < 1e-5, "kink at {p}");
        }
        let mut prev = 0.0;
        for k in 0..400 {
            let v = phi4(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!((phi4(1.5) - 0.5).abs() < 1e-15);
    }
}
