//! Lowest eigenpairs of a symmetric [`StarMatrix`] by shift-invert block Lanczos.
//!
//! The shift is placed below the spectrum using inertia counts, so the wanted
//! eigenvalues become the largest ones of the inverted operator. Ritz pairs are
//! then polished by a few steps of inverse subspace iteration with Rayleigh-Ritz
//! on the original matrix, and the final count is cross-checked against the
//! inertia of `A - t I`.

use super::dense::symmetric_eigen;
use super::star::StarMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenSolveError {
    #[error("requested {count} eigenpairs of a {dim}-dimensional matrix")]
    TooMany { count: usize, dim: usize },
    #[error("shifted matrix could not be factorized: {0}")]
    Factorization(String),
    #[error("dense projected eigenproblem failed: {0}")]
    Dense(String),
    #[error("eigenpairs did not converge: worst residual {residual:e} > {tol:e}")]
    NoConvergence { residual: f64, tol: f64 },
    #[error("inertia reports {inertia} eigenvalues below {bound}, solver found {found}")]
    MissedEigenvalues {
        bound: f64,
        inertia: usize,
        found: usize,
    },
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Number of eigenpairs wanted.
    pub count: usize,
    /// Block size; must exceed the largest multiplicity among the wanted values.
    pub block: usize,
    /// Cap on the Krylov subspace dimension.
    pub max_dim: usize,
    /// Bound on `||A v - lambda v||` for unit `v`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            count: 6,
            block: 6,
            max_dim: 400,
            tol: 1e-9,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gram-Schmidt (twice) against `basis`, then within the block; columns that
/// collapse are dropped.
pub(crate) fn orthonormalize(basis: &[Vec<f64>], block: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut w in block {
        let start = norm(&w);
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in basis.iter().chain(out.iter()) {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let nw = norm(&w);
        if nw > 1e-10 * start {
            w.iter_mut().for_each(|x| *x /= nw);
            out.push(w);
        }
    }
    out
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

/// Rayleigh-Ritz of `a` on the orthonormal set `v`.
fn rayleigh_ritz(a: &StarMatrix<f64>, v: &[Vec<f64>]) -> Result<Ritz, EigenSolveError> {
    let n = a.dim();
    let k = v.len();
    let av: Vec<Vec<f64>> = v
        .iter()
        .map(|x| {
            let mut y = vec![0.0; n];
            a.matvec(x, &mut y);
            y
        })
        .collect();
    let mut h = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let s = 0.5 * (dot(&v[i], &av[j]) + dot(&v[j], &av[i]));
            h[i * k + j] = s;
            h[j * k + i] = s;
        }
    }
    let eig = symmetric_eigen(k, &h).map_err(|e| EigenSolveError::Dense(e.to_string()))?;
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (lam, s) in eig.values.iter().zip(&eig.vectors) {
        let mut x = vec![0.0; n];
        let mut ax = vec![0.0; n];
        for (c, (vi, avi)) in s.iter().zip(v.iter().zip(&av)) {
            for r in 0..n {
                x[r] += c * vi[r];
                ax[r] += c * avi[r];
            }
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|t| *t /= nx);
        ax.iter_mut().for_each(|t| *t /= nx);
        let res = ax
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - lam * q).powi(2))
            .sum::<f64>()
            .sqrt();
        vectors.push(x);
        residuals.push(res);
    }
    Ok(Ritz {
        values: eig.values,
        vectors,
        residuals,
    })
}

/// Smallest `t` bracket with no eigenvalue below it, close to the bottom of the spectrum.
fn shift_below_spectrum(a: &StarMatrix<f64>) -> f64 {
    let mut lo = a.gershgorin_lower();
    let mut hi = lo.abs().max(1.0);
    while a.count_below(hi) == 0 {
        hi = hi * 2.0 + 1.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if a.count_below(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 * (1.0 + hi.abs()) {
            break;
        }
    }
    lo - (0.25 * (1.0 + lo.abs())).min(1.0)
}

/// The `opts.count` lowest eigenpairs of `a`.
pub fn lowest_eigenpairs(
    a: &StarMatrix<f64>,
    opts: &LanczosOptions,
) -> Result<EigenPairs, EigenSolveError> {
    let n = a.dim();
    let count = opts.count;
    if count == 0 || count > n {
        return Err(EigenSolveError::TooMany { count, dim: n });
    }
    let block = opts.block.max(1).min(n);
    let max_dim = opts.max_dim.max(count + 2 * block).min(n);
    let sigma = shift_below_spectrum(a);
    let factor = a
        .affine(-sigma, 1.0)
        .factorize()
        .map_err(|e| EigenSolveError::Factorization(e.to_string()))?;
    let apply_inv = |x: &[f64]| {
        let mut y = vec![0.0; n];
        factor.solve(x, &mut y);
        y
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut q: Vec<Vec<f64>> = orthonormalize(&[], start);
    let mut y: Vec<Vec<f64>> = q.iter().map(|x| apply_inv(x)).collect();
    let keep = (count + block).min(n);
    let mut last_block = 0;

    // Krylov phase on the inverse.
    loop {
        let k = q.len();
        let enough = k >= keep;
        if enough {
            let mut h = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..=i {
                    let s = 0.5 * (dot(&q[i], &y[j]) + dot(&q[j], &y[i]));
                    h[i * k + j] = s;
                    h[j * k + i] = s;
                }
            }
            let eig = symmetric_eigen(k, &h).map_err(|e| EigenSolveError::Dense(e.to_string()))?;
            // Largest theta are the lowest eigenvalues of a.
            let mut converged = true;
            for idx in (k - count..k).rev() {
                let theta = eig.values[idx];
                let s = &eig.vectors[idx];
                let mut r = vec![0.0; n];
                for (c, (qi, yi)) in s.iter().zip(q.iter().zip(&y)) {
                    for t in 0..n {
                        r[t] += c * (yi[t] - theta * qi[t]);
                    }
                }
                if norm(&r) > 1e-10 * theta.abs() {
                    converged = false;
                    break;
                }
            }
            if converged || k >= max_dim {
                let vectors: Vec<Vec<f64>> = (k - keep..k)
                    .rev()
                    .map(|idx| {
                        let s = &eig.vectors[idx];
                        let mut x = vec![0.0; n];
                        for (c, qi) in s.iter().zip(&q) {
                            for t in 0..n {
                                x[t] += c * qi[t];
                            }
                        }
                        x
                    })
                    .collect();
                q = orthonormalize(&[], vectors);
                break;
            }
        }
        let next: Vec<Vec<f64>> = y[last_block..].to_vec();
        last_block = q.len();
        let fresh = orthonormalize(&q, next);
        if fresh.is_empty() {
            // invariant subspace: restart from random directions
            let extra: Vec<Vec<f64>> = (0..block)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let fresh = orthonormalize(&q, extra);
            if fresh.is_empty() {
                break;
            }
            for f in fresh {
                y.push(apply_inv(&f));
                q.push(f);
            }
            continue;
        }
        for f in fresh {
            y.push(apply_inv(&f));
            q.push(f);
        }
    }

    // Polish by inverse subspace iteration.
    let mut ritz = rayleigh_ritz(a, &q)?;
    for _ in 0..30 {
        let worst = ritz.residuals[..count].iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol {
            break;
        }
        let images: Vec<Vec<f64>> = ritz.vectors.iter().map(|x| apply_inv(x)).collect();
        let basis = orthonormalize(&[], images);
        ritz = rayleigh_ritz(a, &basis)?;
    }
    let worst = ritz.residuals[..count].iter().cloned().fold(0.0, f64::max);
    if worst > opts.tol {
        return Err(EigenSolveError::NoConvergence {
            residual: worst,
            tol: opts.tol,
        });
    }

    // Nothing below the returned values may be missing.
    let last = ritz.values[count - 1];
    let bound = match ritz.values.get(count) {
        Some(&next) if next - last > 2.0 * opts.tol => 0.5 * (last + next),
        _ => last + opts.tol.max(1e-12),
    };
    let inertia = a.count_below(bound);
    let found = ritz.values.iter().filter(|&&v| v < bound).count();
    if inertia != found {
        return Err(EigenSolveError::MissedEigenvalues {
            bound,
            inertia,
            found,
        });
    }

    ritz.values.truncate(count);
    ritz.vectors.truncate(count);
    ritz.residuals.truncate(count);
    Ok(EigenPairs {
        values: ritz.values,
        vectors: ritz.vectors,
        residuals: ritz.residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Star of `n_edges` Dirichlet segments glued with a Kirchhoff vertex: the
    /// graph Laplacian with step `h` on every edge.
    fn laplacian_star(n_edges: usize, m: usize) -> StarMatrix<f64> {
        let h = 1.0 / (m + 1) as f64;
        let c = 1.0 / (h * h);
        StarMatrix {
            vertex_diag: n_edges as f64 * c,
            coupling: vec![-c / (n_edges as f64).sqrt(); n_edges],
            diag: vec![vec![2.0 * c; m]; n_edges],
            off: vec![vec![-c; m - 1]; n_edges],
        }
    }

    #[test]
    fn finds_degenerate_lowest_values() {
        // Dirichlet star: antisymmetric modes vanish at the vertex and are
        // (N-1)-fold degenerate, with values 4/h^2 sin^2(k pi h / 2) on an
        // interval of length 2 discretized by m+1+m+... points.
        let n_edges = 4;
        let m = 60;
        let a = laplacian_star(n_edges, m);
        let h = 1.0 / (m + 1) as f64;
        let opts = LanczosOptions {
            count: 8,
            block: n_edges + 1,
            ..Default::default()
        };
        let pairs = lowest_eigenpairs(&a, &opts).unwrap();
        let mut dense = vec![0.0; a.dim() * a.dim()];
        for (r, c, v) in a.triplets() {
            dense[r * a.dim() + c] = v;
        }
        let all = symmetric_eigen(a.dim(), &dense).unwrap();
        for (got, want) in pairs.values.iter().zip(&all.values) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        let dirichlet = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let degenerate = pairs
            .values
            .iter()
            .filter(|v| (*v - dirichlet).abs() < 1e-8)
            .count();
        assert_eq!(degenerate, n_edges - 1);
        assert!(pairs.residuals.iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn indefinite_matrix() {
        let mut a = laplacian_star(3, 40);
        for d in a.diag.iter_mut() {
            for (i, x) in d.iter_mut().enumerate() {
                *x -= 3000.0 * (-(i as f64) / 5.0).exp();
            }
        }
        let pairs = lowest_eigenpairs(
            &a,
            &LanczosOptions {
                count: 5,
                block: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let negatives = pairs.values.iter().filter(|&&v| v < 0.0).count();
        assert_eq!(negatives.min(5), a.count_below(0.0).min(5));
        for w in pairs.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn rejects_bad_count() {
        let a = laplacian_star(2, 3);
        let opts = LanczosOptions {
            count: 100,
            ..Default::default()
        };
        assert!(matches!(
            lowest_eigenpairs(&a, &opts),
            Err(EigenSolveError::TooMany { .. })
        ));
    }
}
