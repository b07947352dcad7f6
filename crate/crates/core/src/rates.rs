//! Blow-up rate fits and law checks on modulation time series.

use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 30;
const MIN_FALL: f64 = 3.0;

/// Candidate rate laws for lambda(t) near the blow-up time T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateLaw {
    /// `lambda = C ((T - t) / log|log(T - t)|)^{1/2}`.
    LogLog,
    /// `lambda = C (T - t)^{1/2}`.
    SquareRoot,
}

impl RateLaw {
    /// `log lambda - log C` and its derivative in T, at `x = T - t`.
    fn shape(self, x: f64) -> Option<(f64, f64)> {
        if !(x > 0.0) {
            return None;
        }
        match self {
            RateLaw::SquareRoot => Some((0.5 * x.ln(), 0.5 / x)),
            RateLaw::LogLog => {
                let l = x.ln();
                let ll = l.abs();
                if !(ll > 1.0) {
                    return None;
                }
                let lll = ll.ln();
                // d/dx log|log x| = 1 / (x log x)
                Some((0.5 * (l - lll), 0.5 / x - 0.5 / (x * l * lll)))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateLaw::LogLog => "loglog",
            RateLaw::SquareRoot => "sqrt",
        }
    }

    /// lambda(t) for given (T, C).
    pub fn eval(self, t_blow: f64, c: f64, t: f64) -> f64 {
        self.shape(t_blow - t).map_or(f64::NAN, |(f, _)| c * f.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub law: RateLaw,
    pub t_est: f64,
    pub prefactor: f64,
    /// RMS misfit of log lambda.
    pub residual: f64,
    pub window: (f64, f64),
    pub n_samples: usize,
}

/// Both candidate fits on the same window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateComparison {
    pub loglog: RateFit,
    pub sqrt: RateFit,
}

/// Fits both rate laws to `(t, lambda)` samples with lambda >= `floor`
/// (samples below are resolution-contaminated and dropped).
pub fn fit_loglog(t: &[f64], lambda: &[f64], floor: f64) -> Result<RateComparison> {
    if t.len() != lambda.len() {
        return Err(Error::Shape(format!("{} times and {} lambdas", t.len(), lambda.len())));
    }
    let (ts, ls): (Vec<f64>, Vec<f64>) =
        t.iter().zip(lambda).filter(|(_, &l)| l >= floor).map(|(a, b)| (*a, *b)).unzip();
    let n = ts.len();
    if n < MIN_SAMPLES {
        return Err(Error::Precondition(format!("{n} samples above the resolution floor; need {MIN_SAMPLES}")));
    }
    if ls.iter().any(|l| !(l > &0.0)) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("samples need lambda > 0 and increasing times".into()));
    }
    let rises = ls.windows(2).filter(|w| w[1] > w[0]).count();
    if rises as f64 > 0.1 * (n - 1) as f64 {
        return Err(Error::NotInBlowupRegime(format!("lambda increases on {rises} of {} intervals", n - 1)));
    }
    let (lmax, lmin) = ls.iter().fold((0.0f64, f64::INFINITY), |(a, b), &l| (a.max(l), b.min(l)));
    if lmax / lmin < MIN_FALL {
        return Err(Error::Precondition(format!(
            "lambda falls by {:.3} over the window; need {MIN_FALL}",
            lmax / lmin
        )));
    }
    // work relative to the last sample time so a time shift is exact
    let t_ref = ts[n - 1];
    let tau: Vec<f64> = ts.iter().map(|v| v - t_ref).collect();
    let y: Vec<f64> = ls.iter().map(|l| l.ln()).collect();
    let t0 = richardson_guess(&tau, &ls);
    let window = (ts[0], ts[n - 1]);
    let fit = |law| -> Result<RateFit> {
        let (tb, logc, res) = levenberg_marquardt(law, &tau, &y, t0)?;
        Ok(RateFit { law, t_est: tb + t_ref, prefactor: logc.exp(), residual: res, window, n_samples: n })
    };
    Ok(RateComparison { loglog: fit(RateLaw::LogLog)?, sqrt: fit(RateLaw::SquareRoot)? })
}

/// Root of the least-squares line through lambda^2 over the last half of
/// the window (lambda^2 is close to linear in t under both laws).
fn richardson_guess(tau: &[f64], l: &[f64]) -> f64 {
    let n = tau.len();
    let k0 = n / 2;
    let m = (n - k0) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for k in k0..n {
        let (x, v) = (tau[k], l[k] * l[k]);
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let icpt = (sy - slope * sx) / m;
    let root = -icpt / slope;
    let span = tau[n - 1] - tau[0];
    if slope < 0.0 && root.is_finite() && root > 0.0 {
        root
    } else {
        0.05 * span
    }
}

/// Residual vector, with the optimal log C profiled out, at blow-up time tb.
fn profile_residual(law: RateLaw, tau: &[f64], y: &[f64], tb: f64) -> Option<(f64, f64)> {
    let mut f = Vec::with_capacity(tau.len());
    for &t in tau {
        f.push(law.shape(tb - t)?.0);
    }
    let logc = y.iter().zip(&f).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64;
    let ss = y.iter().zip(&f).map(|(a, b)| (a - b - logc).powi(2)).sum::<f64>();
    Some((logc, (ss / y.len() as f64).sqrt()))
}

/// Levenberg-Marquardt over (T, log C) in log variables; returns
/// (T, log C, rms residual). T stays beyond the last sample.
fn levenberg_marquardt(law: RateLaw, tau: &[f64], y: &[f64], t0: f64) -> Result<(f64, f64, f64)> {
    let span = tau[tau.len() - 1] - tau[0];
    let mut tb = t0.max(1e-9 * span.max(1e-300));
    // start from a T where the model is defined
    let mut tries = 0;
    while profile_residual(law, tau, y, tb).is_none() {
        tb = if law == RateLaw::LogLog && tb - tau[0] >= (-1.0f64).exp() { 0.5 * tb } else { 2.0 * tb };
        tries += 1;
        if tries > 200 {
            return Err(Error::NotInBlowupRegime(format!("no admissible blow-up time for the {} law", law.name())));
        }
    }
    let mut logc = profile_residual(law, tau, y, tb).unwrap().0;
    let cost = |tb: f64, logc: f64| -> Option<f64> {
        let mut s = 0.0;
        for (&t, &v) in tau.iter().zip(y) {
            s += (law.shape(tb - t)?.0 + logc - v).powi(2);
        }
        Some(s)
    };
    let mut c = cost(tb, logc).unwrap();
    let mut mu = 1e-3;
    for _ in 0..500 {
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &v) in tau.iter().zip(y) {
            let (f, df) = law.shape(tb - t).unwrap();
            let r = f + logc - v;
            a11 += df * df;
            a12 += df;
            a22 += 1.0;
            g1 += df * r;
            g2 += r;
        }
        let mut improved = false;
        for _ in 0..60 {
            let (d11, d22) = (a11 * (1.0 + mu), a22 * (1.0 + mu));
            let det = d11 * d22 - a12 * a12;
            let st = -(d22 * g1 - a12 * g2) / det;
            let sc = -(-a12 * g1 + d11 * g2) / det;
            let (nt, nc) = (tb + st, logc + sc);
            if let Some(cn) = cost(nt, nc).filter(|_| nt > 0.0) {
                if cn <= c {
                    let small = st.abs() <= 1e-15 * nt.abs().max(1e-300) && sc.abs() <= 1e-15;
                    tb = nt;
                    logc = nc;
                    c = cn;
                    mu = (mu * 0.3).max(1e-15);
                    improved = !small;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok((tb, logc, (c / y.len() as f64).sqrt()))
}

/// Summary statistics of a monitored combination over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct LawCheck {
    pub law: String,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub n: usize,
}

impl LawCheck {
    fn of(law: &str, v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Precondition(format!("empty window for {law}")));
        }
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { law: law.into(), min: s[0], max: s[s.len() - 1], median: median_sorted(&s), n: s.len() })
    }
}

fn median_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Median of unsorted values (NaN-free).
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    median_sorted(&s)
}

/// Largest rise `v[j] - v[i]` (i < j) of a series expected to be
/// non-increasing, as a fraction of its range `max - min`; 0 for monotone
/// non-increasing or constant series.
pub fn max_relative_rise(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        return 0.0;
    }
    let mut running_min = f64::INFINITY;
    let mut rise = 0.0f64;
    for &x in v {
        rise = rise.max(x - running_min);
        running_min = running_min.min(x);
    }
    rise / range
}

/// Statistics of `b log|log lambda|`; every lambda must be below 1/e.
pub fn check_b_lambda_law(b: &[f64], lambda: &[f64]) -> Result<LawCheck> {
    if b.len() != lambda.len() {
        return Err(Error::Shape(format!("{} b values and {} lambdas", b.len(), lambda.len())));
    }
    if let Some(l) = lambda.iter().find(|&&l| !(l > 0.0 && l < (-1.0f64).exp())) {
        return Err(Error::Precondition(format!("b log|log lambda| needs 0 < lambda < 1/e, got {l}")));
    }
    let v: Vec<f64> = b.iter().zip(lambda).map(|(b, l)| b * l.ln().abs().ln()).collect();
    LawCheck::of("b*log|log lambda|", &v)
}

/// Motion of the ring centre over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleCheck {
    pub r: LawCheck,
    pub z: LawCheck,
    /// Total variation `sum |r_c(k+1) - r_c(k)|`.
    pub tv_r: f64,
    pub tv_z: f64,
    /// `|r_c(end) - r_c(start)|`.
    pub drift_r: f64,
    pub drift_z: f64,
    /// `drift_r / r_c(start)`.
    pub relative_drift: f64,
    /// `int |r_s| ds` by the trapezoid rule from supplied rates, if any.
    pub ledger_r: Option<f64>,
}

/// Drift and total variation of `(r_c, z_c)`; `rates` optionally supplies
/// `(s, r_s)` samples for the integrated-rate ledger.
pub fn check_singular_circle(r_c: &[f64], z_c: &[f64], rates: Option<(&[f64], &[f64])>) -> Result<CircleCheck> {
    if r_c.len() != z_c.len() {
        return Err(Error::Shape(format!("{} r values and {} z values", r_c.len(), z_c.len())));
    }
    let r = LawCheck::of("r_c", r_c)?;
    let z = LawCheck::of("z_c", z_c)?;
    let tv = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    let n = r_c.len();
    let drift_r = (r_c[n - 1] - r_c[0]).abs();
    let ledger_r = rates.map(|(s, rs)| {
        s.windows(2).zip(rs.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0].abs() + b[1].abs())).sum()
    });
    Ok(CircleCheck {
        r,
        z,
        tv_r: tv(r_c),
        tv_z: tv(z_c),
        drift_r,
        drift_z: (z_c[n - 1] - z_c[0]).abs(),
        relative_drift: drift_r / r_c[0].abs(),
        ledger_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_rise() {
        assert_eq!(max_relative_rise(&[3.0, 2.0, 2.0, 1.0]), 0.0);
        assert_eq!(max_relative_rise(&[5.0]), 0.0);
        assert_eq!(max_relative_rise(&[1.0, 2.0]), 1.0);
        // dip to 1 then back up to 1.5 over a range of 4
        assert!((max_relative_rise(&[5.0, 1.0, 1.5, 1.2]) - 0.125).abs() < 1e-15);
    }

    fn series(law: RateLaw, tb: f64, c: f64, t0: f64, t1: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect();
        let l = t.iter().map(|&x| law.eval(tb, c, x)).collect();
        (t, l)
    }

    #[test]
    fn inverse_crime_loglog() {
        let (t, l) = series(RateLaw::LogLog, 1.0, 0.7, 0.7, 0.9999, 60);
        let fit = fit_loglog(&t, &l, 0.0).unwrap();
        assert!((fit.loglog.t_est - 1.0).abs() < 1e-6, "{}", fit.loglog.t_est);
        assert!((fit.loglog.prefactor - 0.7).abs() < 1e-5);
        assert!(fit.loglog.residual <= 1e-8, "{}", fit.loglog.residual);
        assert!(fit.sqrt.residual > fit.loglog.residual);
        assert!(fit.loglog.t_est > fit.loglog.window.1);
    }

    #[test]
    fn discrimination_both_ways_with_noise() {
        let mut state = 12345u64;
        let mut noise = |amp: f64| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            amp * (((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5)
        };
        for amp in [0.0, 1e-3] {
            for law in [RateLaw::LogLog, RateLaw::SquareRoot] {
                let (t, mut l) = series(law, 1.0, 0.7, 0.7, 0.99999, 80);
                l.iter_mut().for_each(|v| *v *= (noise(amp)).exp());
                let fit = fit_loglog(&t, &l, 0.0).unwrap();
                let (own, other) = match law {
                    RateLaw::LogLog => (fit.loglog, fit.sqrt),
                    RateLaw::SquareRoot => (fit.sqrt, fit.loglog),
                };
                assert!(own.residual < other.residual, "{law:?} amp {amp}: {} vs {}", own.residual, other.residual);
            }
        }
    }

    #[test]
    fn time_translation_covariance() {
        let (t, l) = series(RateLaw::LogLog, 1.0, 0.7, 0.7, 0.999, 50);
        let a = fit_loglog(&t, &l, 0.0).unwrap();
        let shifted: Vec<f64> = t.iter().map(|x| x + 3.25).collect();
        let b = fit_loglog(&shifted, &l, 0.0).unwrap();
        assert!((b.loglog.t_est - a.loglog.t_est - 3.25).abs() < 1e-9);
        assert!((b.sqrt.t_est - a.sqrt.t_est - 3.25).abs() < 1e-9);
    }

    #[test]
    fn window_and_regime_checks() {
        let (t, l) = series(RateLaw::SquareRoot, 1.0, 0.7, 0.7, 0.999, 60);
        // the floor drops the last samples
        let fit = fit_loglog(&t, &l, 0.05).unwrap();
        assert!(fit.sqrt.n_samples < 60);
        assert!(l[..fit.sqrt.n_samples].iter().all(|&v| v >= 0.05));
        assert!(matches!(fit_loglog(&t[..20], &l[..20], 0.0), Err(Error::Precondition(_))));
        let wobbly: Vec<f64> = l.iter().enumerate().map(|(k, v)| if k % 3 == 0 { v * 1.5 } else { *v }).collect();
        assert!(matches!(fit_loglog(&t, &wobbly, 0.0), Err(Error::NotInBlowupRegime(_))));
        let flat = vec![0.5; 60];
        assert!(fit_loglog(&t, &flat, 0.0).is_err());
        // the log-log law is undefined where T - t crosses 1
        let (t, l) = series(RateLaw::SquareRoot, 1.0, 0.7, 0.0, 0.999, 60);
        assert!(matches!(fit_loglog(&t, &l, 0.0), Err(Error::NotInBlowupRegime(_))));
    }

    #[test]
    fn b_lambda_law() {
        let lambda: Vec<f64> = (1..40).map(|k| 1e-3 / k as f64).collect();
        let b: Vec<f64> = lambda.iter().map(|l| std::f64::consts::PI / l.ln().abs().ln()).collect();
        let c = check_b_lambda_law(&b, &lambda).unwrap();
        assert!((c.min - std::f64::consts::PI).abs() < 1e-12 && (c.max - std::f64::consts::PI).abs() < 1e-12);
        assert!(matches!(check_b_lambda_law(&[0.1], &[0.5]), Err(Error::Precondition(_))));
    }

    #[test]
    fn circle_drift() {
        let frozen = check_singular_circle(&[10.0; 5], &[0.0; 5], None).unwrap();
        assert_eq!((frozen.tv_r, frozen.drift_r, frozen.relative_drift), (0.0, 0.0, 0.0));
        let r = [10.0, 10.1, 10.05, 10.2];
        let c = check_singular_circle(&r, &[0.0, 0.1, -0.1, 0.0], Some((&[0.0, 1.0, 2.0, 3.0], &[0.1, 0.1, 0.1, 0.1])))
            .unwrap();
        let sum: f64 = r.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert_eq!(c.tv_r, sum);
        assert!(c.drift_r <= c.tv_r);
        assert!((c.ledger_r.unwrap() - 0.3).abs() < 1e-12);
        assert!(matches!(check_singular_circle(&[], &[], None), Err(Error::Precondition(_))));
    }
}
