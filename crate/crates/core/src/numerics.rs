//! Small numerical helpers: Simpson and Gauss-Legendre quadrature, Hermite
//! interpolation, Bessel K asymptotics and an RK4 step for radial ODEs.

/// Composite Simpson on [a, b] with at least `n_min` (rounded up to even)
/// panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n_min: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = (n_min.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Simpson over consecutive pieces between sorted breakpoints, each piece
/// with spacing close to `h`.
pub fn simpson_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], h: f64) -> f64 {
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let n = ((w[1] - w[0]) / h).ceil() as usize;
        total += simpson(&f, w[0], w[1], n);
    }
    total
}

/// Simpson on samples with uniform spacing; an odd panel count closes with
/// the 3/8 rule on the last three panels.
pub fn simpson_samples(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (v[0] + v[1]),
        3 => h / 3.0 * (v[0] + 4.0 * v[1] + v[2]),
        _ => {
            let panels = n - 1;
            let even = if panels.is_multiple_of(2) { panels } else { panels - 3 };
            let mut s = v[0] + v[even];
            for (k, x) in v.iter().enumerate().take(even).skip(1) {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * x;
            }
            let mut total = s * h / 3.0;
            if even < panels {
                let k = even;
                total += 3.0 * h / 8.0 * (v[k] + 3.0 * v[k + 1] + 3.0 * v[k + 2] + v[k + 3]);
            }
            total
        }
    }
}

/// Six-point Gauss-Legendre nodes and weights on [-1, 1].
pub const GL6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152, 0.171_324_492_379_170),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152, 0.171_324_492_379_170),
];

/// Cubic Hermite interpolation on a uniform grid of (value, derivative)
/// samples starting at 0. Returns (value, derivative). Outside the grid the
/// end sample is returned with zero slope.
#[inline]
pub fn hermite<T>(vals: &[T], ders: &[T], h: f64, x: f64) -> (T, T)
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = vals.len();
    let s = x / h;
    if s <= 0.0 {
        return (vals[0], ders[0]);
    }
    if s >= (n - 1) as f64 {
        return (vals[n - 1], ders[n - 1]);
    }
    let k = s.floor() as usize;
    let t = s - k as f64;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = vals[k] * h00 + ders[k] * (h10 * h) + vals[k + 1] * h01 + ders[k + 1] * (h11 * h);
    let d00 = (6.0 * t2 - 6.0 * t) / h;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / h;
    let d11 = 3.0 * t2 - 2.0 * t;
    let d = vals[k] * d00 + ders[k] * d10 + vals[k + 1] * d01 + ders[k + 1] * d11;
    (v, d)
}

/// Modified Bessel function K_nu(x) for x > 0, by the trapezoid rule on
/// `int_0^inf exp(-x cosh t) cosh(nu t) dt` (relative error ~1e-14).
pub fn bessel_k(nu: u32, x: f64) -> f64 {
    let h = (0.6 / x.sqrt()).min(0.2);
    let nu = nu as f64;
    let mut sum = 0.5;
    for k in 1.. {
        let t = k as f64 * h;
        let a = x * (t.cosh() - 1.0);
        if a > 40.0 {
            break;
        }
        sum += (-a).exp() * (nu * t).cosh();
    }
    sum * h * (-x).exp()
}

/// Bessel J0 by the trapezoid rule on `(1/pi) int_0^pi cos(x sin t) dt`,
/// which converges geometrically once the node count exceeds |x|.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 40 + 2 * x.abs().ceil() as usize;
    let h = std::f64::consts::PI / n as f64;
    let mut s = 0.5 * (1.0 + 1.0);
    for k in 1..n {
        s += (x * (k as f64 * h).sin()).cos();
    }
    s / n as f64
}

/// Classical RK4 step for y' = f(x, y) with y = (P, P').
#[inline]
pub fn rk4(f: impl Fn(f64, [f64; 2]) -> [f64; 2], x: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}
