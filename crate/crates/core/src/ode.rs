//! Adaptive Bulirsch-Stoer integration (Gragg's modified midpoint rule with
//! polynomial extrapolation in `h^2`) for small fixed-size systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepUnderflow { x: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("non-finite state at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-300,
            h_max: 0.5,
            max_steps: 100_000,
        }
    }
}

const KMAX: usize = 10;

fn midpoint<const D: usize, F>(f: &F, x: f64, y: &[f64; D], h: f64, n: usize) -> [f64; D]
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let sub = h / n as f64;
    let mut z0 = *y;
    let d = f(x, y);
    let mut z1 = [0.0; D];
    for i in 0..D {
        z1[i] = y[i] + sub * d[i];
    }
    for m in 1..n {
        let d = f(x + m as f64 * sub, &z1);
        for i in 0..D {
            let t = z0[i] + 2.0 * sub * d[i];
            z0[i] = z1[i];
            z1[i] = t;
        }
    }
    let d = f(x + h, &z1);
    let mut out = [0.0; D];
    for i in 0..D {
        out[i] = 0.5 * (z0[i] + z1[i] + sub * d[i]);
    }
    out
}

/// One extrapolated step of size `h`. Returns the new state and the order
/// index used, or `None` if the tolerance was not met.
fn bs_step<const D: usize, F>(
    f: &F,
    x: f64,
    y: &[f64; D],
    h: f64,
    opts: &OdeOptions,
) -> Option<([f64; D], usize, f64)>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut table: Vec<[f64; D]> = Vec::with_capacity(KMAX);
    let seq = |k: usize| 2 * (k + 1);
    for k in 0..KMAX {
        let mut row = vec![midpoint(f, x, y, h, seq(k))];
        for j in 1..=k {
            let ratio = (seq(k) as f64 / seq(k - j) as f64).powi(2) - 1.0;
            let mut t = [0.0; D];
            for i in 0..D {
                t[i] = row[j - 1][i] + (row[j - 1][i] - table[j - 1][i]) / ratio;
            }
            row.push(t);
        }
        if k >= 2 {
            let a = &row[k];
            let b = &row[k - 1];
            let mut diff = 0.0f64;
            let mut size = 0.0f64;
            for i in 0..D {
                diff = diff.max((a[i] - b[i]).abs());
                size = size.max(a[i].abs()).max(y[i].abs());
            }
            let err = diff / (opts.atol + opts.rtol * size);
            if !err.is_finite() {
                return None;
            }
            if err <= 1.0 {
                return Some((*a, k, err));
            }
        }
        // keep only the latest row: entry j of the previous row is needed at
        // level j of the next one
        table.clear();
        table.extend(row);
    }
    None
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction) and calls
/// `on_step(x, y)` after every accepted step, including the final one.
pub fn integrate<const D: usize, F, S>(
    f: F,
    x0: f64,
    y0: [f64; D],
    x1: f64,
    opts: &OdeOptions,
    mut on_step: S,
) -> Result<[f64; D], OdeError>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    S: FnMut(f64, &[f64; D]),
{
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut y = y0;
    let mut h = dir * opts.h_max.min((x1 - x0).abs()).max(f64::MIN_POSITIVE);
    let span = (x1 - x0).abs();
    let mut steps = 0;
    while (x1 - x) * dir > 1e-14 * (1.0 + span) {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        steps += 1;
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        match bs_step(&f, x, &y, h, opts) {
            Some((ynew, k, err)) => {
                x = if ((x + h) - x1).abs() < 1e-14 * (1.0 + span) {
                    x1
                } else {
                    x + h
                };
                y = ynew;
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFinite(x));
                }
                on_step(x, &y);
                let grow: f64 = if k <= 4 {
                    1.6
                } else if k <= 6 {
                    1.2
                } else if k >= 8 {
                    0.7
                } else {
                    1.0
                };
                let grow = if err < 1e-3 { grow.max(1.3) } else { grow };
                h = dir * (h.abs() * grow).min(opts.h_max);
            }
            None => {
                h *= 0.35;
                if h.abs() < 1e-12 * (1.0 + x.abs()) {
                    return Err(OdeError::StepUnderflow { x, h });
                }
            }
        }
    }
    Ok(y)
}
