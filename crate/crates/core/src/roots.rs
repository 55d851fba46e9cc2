//! Bracketed scalar root finding (Brent's method).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("f({a}) = {fa:e} and f({b}) = {fb:e} do not bracket a root")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("function evaluation failed: {0}")]
    Eval(String),
}

/// Finds a root of `f` in `[a, b]` to absolute tolerance `tol`. `f` may fail,
/// in which case the error is propagated as [`RootError::Eval`].
pub fn brent<E: std::fmt::Display>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, RootError> {
    let mut eval = |x: f64| f(x).map_err(|e| RootError::Eval(e.to_string()));
    let (mut a, mut b) = (a, b);
    let mut fa = eval(a)?;
    let mut fb = eval(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { a, b, fa, fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb = eval(b)?;
    }
    Err(RootError::NoConvergence(200))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_roots() {
        let r = brent(|x| Ok::<_, Infallible>(x.cos() - x), 0.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.739_085_133_215_160_6).abs() < 1e-13);
        let r = brent(|x| Ok::<_, Infallible>(x.powi(3) - 2.0), 2.0, 0.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn reports_bad_brackets_and_failures() {
        assert!(matches!(
            brent(|x| Ok::<_, Infallible>(x * x + 1.0), -1.0, 1.0, 1e-12),
            Err(RootError::NotBracketed { .. })
        ));
        assert!(matches!(
            brent(|_| Err::<f64, _>("boom"), -1.0, 1.0, 1e-12),
            Err(RootError::Eval(_))
        ));
    }
}
