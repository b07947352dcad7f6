//! Complex tridiagonal solves (Thomas algorithm) with an LU factorization that
//! can be reused across many right-hand sides.

use num_complex::Complex64 as C64;

/// LU factors of a tridiagonal matrix with sub-diagonal `a`, diagonal `b`,
/// super-diagonal `c` (a[0] and c[n-1] unused).
#[derive(Debug, Clone)]
pub struct TriFactor {
    a: Vec<C64>,
    c_mod: Vec<C64>,
    inv_piv: Vec<C64>,
}

impl TriFactor {
    pub fn new(a: &[C64], b: &[C64], c: &[C64]) -> Option<Self> {
        let n = b.len();
        let mut c_mod = vec![C64::new(0.0, 0.0); n];
        let mut inv_piv = vec![C64::new(0.0, 0.0); n];
        let mut piv = b[0];
        for i in 0..n {
            if i > 0 {
                piv = b[i] - a[i] * c_mod[i - 1];
            }
            if piv.norm() == 0.0 || !piv.is_finite() {
                return None;
            }
            inv_piv[i] = piv.inv();
            if i + 1 < n {
                c_mod[i] = c[i] * inv_piv[i];
            }
        }
        Some(Self { a: a.to_vec(), c_mod, inv_piv })
    }

    pub fn len(&self) -> usize {
        self.inv_piv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_piv.is_empty()
    }

    /// Solves in place for a single right-hand side.
    pub fn solve(&self, x: &mut [C64]) {
        let n = self.len();
        x[0] *= self.inv_piv[0];
        for i in 1..n {
            x[i] = (x[i] - self.a[i] * x[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.c_mod[i] * next;
        }
    }

    /// Solves for `m` interleaved right-hand sides stored row-major as
    /// `x[i * stride + k]`, `k < m`; rows are the matrix index.
    pub fn solve_rows(&self, x: &mut [C64], stride: usize, offset: usize, m: usize) {
        let n = self.len();
        {
            let p = self.inv_piv[0];
            for v in &mut x[offset..offset + m] {
                *v *= p;
            }
        }
        for i in 1..n {
            let (head, tail) = x.split_at_mut(i * stride + offset);
            let prev = &head[(i - 1) * stride + offset..(i - 1) * stride + offset + m];
            let cur = &mut tail[..m];
            let a = self.a[i];
            let p = self.inv_piv[i];
            for (v, w) in cur.iter_mut().zip(prev) {
                *v = (*v - a * w) * p;
            }
        }
        for i in (0..n - 1).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * stride + offset);
            let next = &tail[..m];
            let cur = &mut head[i * stride + offset..i * stride + offset + m];
            let c = self.c_mod[i];
            for (v, w) in cur.iter_mut().zip(next) {
                *v -= c * w;
            }
        }
    }
}

/// One-shot solve; returns None on a zero pivot.
pub fn solve(a: &[C64], b: &[C64], c: &[C64], rhs: &[C64]) -> Option<Vec<C64>> {
    let f = TriFactor::new(a, b, c)?;
    let mut x = rhs.to_vec();
    f.solve(&mut x);
    Some(x)
}
