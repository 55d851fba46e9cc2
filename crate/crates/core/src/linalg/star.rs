//! Sparse symmetric matrices with star-graph ("arrow") structure.
//!
//! Unknown 0 is the shared vertex value; edge `j` owns the contiguous block
//! `1 + j*m .. 1 + (j+1)*m`, ordered from the vertex outward. Each edge block is
//! tridiagonal and couples to the vertex only through its first unknown.
//! Eliminating every edge from its far end toward the vertex gives an exact
//! `LDL^T` factorization with no fill-in.

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

/// Field operations needed by the factorization; implemented for `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarMatrixError {
    #[error("zero pivot at unknown {index} (|pivot| = {pivot:e}); shift the matrix")]
    SingularPivot { index: usize, pivot: f64 },
    #[error("vector length {got} does not match matrix dimension {want}")]
    Length { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarMatrix<T: Scalar> {
    pub vertex_diag: T,
    /// Vertex to first interior unknown of each edge.
    pub coupling: Vec<T>,
    /// Per-edge diagonal, length `m`.
    pub diag: Vec<Vec<T>>,
    /// Per-edge superdiagonal, length `m - 1`.
    pub off: Vec<Vec<T>>,
}

impl<T: Scalar> StarMatrix<T> {
    pub fn n_edges(&self) -> usize {
        self.diag.len()
    }

    pub fn edge_len(&self) -> usize {
        self.diag.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        1 + self.n_edges() * self.edge_len()
    }

    #[inline]
    pub fn index(&self, edge: usize, i: usize) -> usize {
        1 + edge * self.edge_len() + i
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        let m = self.edge_len();
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let mut yv = self.vertex_diag * x[0];
        for j in 0..self.n_edges() {
            let base = 1 + j * m;
            let d = &self.diag[j];
            let o = &self.off[j];
            let xe = &x[base..base + m];
            let ye = &mut y[base..base + m];
            yv = yv + self.coupling[j] * xe[0];
            for i in 0..m {
                let mut acc = d[i] * xe[i];
                if i > 0 {
                    acc = acc + o[i - 1] * xe[i - 1];
                }
                if i + 1 < m {
                    acc = acc + o[i] * xe[i + 1];
                }
                ye[i] = acc;
            }
            ye[0] = ye[0] + self.coupling[j] * x[0];
        }
        y[0] = yv;
    }

    /// `shift * I + scale * A`, possibly in a wider scalar type.
    pub fn affine<U: Scalar + From<T>>(&self, shift: U, scale: U) -> StarMatrix<U> {
        let lift = |t: &T| scale * U::from(*t);
        StarMatrix {
            vertex_diag: shift + lift(&self.vertex_diag),
            coupling: self.coupling.iter().map(lift).collect(),
            diag: self
                .diag
                .iter()
                .map(|d| d.iter().map(|t| shift + lift(t)).collect())
                .collect(),
            off: self
                .off
                .iter()
                .map(|o| o.iter().map(lift).collect())
                .collect(),
        }
    }

    /// Exact `LDL^T` factorization (no pivoting).
    pub fn factorize(&self) -> Result<StarFactor<T>, StarMatrixError> {
        let m = self.edge_len();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let tiny = 1e-14 * scale;
        let mut pivots = Vec::with_capacity(self.n_edges());
        let mut vertex = self.vertex_diag;
        for j in 0..self.n_edges() {
            let mut p = vec![T::from(0.0); m];
            p[m - 1] = self.diag[j][m - 1];
            for i in (0..m).rev() {
                if i + 1 < m {
                    let e = self.off[j][i];
                    p[i] = self.diag[j][i] - e * e / p[i + 1];
                }
                if p[i].modulus() <= tiny || !p[i].modulus().is_finite() {
                    return Err(StarMatrixError::SingularPivot {
                        index: self.index(j, i),
                        pivot: p[i].modulus(),
                    });
                }
            }
            let c = self.coupling[j];
            vertex = vertex - c * c / p[0];
            pivots.push(p);
        }
        if vertex.modulus() <= tiny || !vertex.modulus().is_finite() {
            return Err(StarMatrixError::SingularPivot {
                index: 0,
                pivot: vertex.modulus(),
            });
        }
        let one = T::from(1.0);
        let inverse: Vec<Vec<T>> = pivots
            .iter()
            .map(|p| p.iter().map(|&v| one / v).collect())
            .collect();
        let lower = (0..self.n_edges())
            .map(|j| {
                (0..m.saturating_sub(1))
                    .map(|i| self.off[j][i] * inverse[j][i + 1])
                    .collect()
            })
            .collect();
        let vertex_lower = (0..self.n_edges())
            .map(|j| self.coupling[j] * inverse[j][0])
            .collect();
        Ok(StarFactor {
            matrix: self.clone(),
            pivots,
            inverse,
            lower,
            vertex_lower,
            vertex_pivot: vertex,
        })
    }

    pub fn max_abs(&self) -> f64 {
        let mut s = self.vertex_diag.modulus();
        for c in &self.coupling {
            s = s.max(c.modulus());
        }
        for (d, o) in self.diag.iter().zip(&self.off) {
            for t in d.iter().chain(o.iter()) {
                s = s.max(t.modulus());
            }
        }
        s
    }

    /// Coordinate listing `(row, col, value)` with both triangles written out.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let m = self.edge_len();
        let mut out = vec![(0, 0, self.vertex_diag)];
        for j in 0..self.n_edges() {
            let first = self.index(j, 0);
            out.push((0, first, self.coupling[j]));
            out.push((first, 0, self.coupling[j]));
            for i in 0..m {
                let r = self.index(j, i);
                out.push((r, r, self.diag[j][i]));
                if i + 1 < m {
                    out.push((r, r + 1, self.off[j][i]));
                    out.push((r + 1, r, self.off[j][i]));
                }
            }
        }
        out.sort_by_key(|&(r, c, _)| (r, c));
        out
    }
}

impl StarMatrix<f64> {
    /// `y = A x` for a complex `x`.
    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.edge_len();
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let mut yv = self.vertex_diag * x[0];
        for j in 0..self.n_edges() {
            let base = 1 + j * m;
            let d = &self.diag[j];
            let o = &self.off[j];
            let xe = &x[base..base + m];
            let ye = &mut y[base..base + m];
            yv += self.coupling[j] * xe[0];
            ye[0] = d[0] * xe[0] + self.coupling[j] * x[0];
            if m > 1 {
                ye[0] += o[0] * xe[1];
            }
            for i in 1..m {
                let mut acc = d[i] * xe[i] + o[i - 1] * xe[i - 1];
                if i + 1 < m {
                    acc += o[i] * xe[i + 1];
                }
                ye[i] = acc;
            }
        }
        y[0] = yv;
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        let m = self.edge_len();
        let mut lo = self.vertex_diag - self.coupling.iter().map(|c| c.abs()).sum::<f64>();
        for j in 0..self.n_edges() {
            for i in 0..m {
                let mut r = 0.0;
                if i > 0 {
                    r += self.off[j][i - 1].abs();
                } else {
                    r += self.coupling[j].abs();
                }
                if i + 1 < m {
                    r += self.off[j][i].abs();
                }
                lo = lo.min(self.diag[j][i] - r);
            }
        }
        lo
    }

    /// Number of eigenvalues strictly below `shift`, from the signs of the
    /// `LDL^T` pivots of `A - shift I` (Sylvester's law of inertia).
    pub fn count_below(&self, shift: f64) -> usize {
        let m = self.edge_len();
        let guard = f64::EPSILON * self.max_abs().max(1.0);
        let fix = |p: f64| if p.abs() < guard { -guard } else { p };
        let mut negatives = 0;
        let mut vertex = self.vertex_diag - shift;
        for j in 0..self.n_edges() {
            let mut p = fix(self.diag[j][m - 1] - shift);
            if p < 0.0 {
                negatives += 1;
            }
            for i in (0..m - 1).rev() {
                let e = self.off[j][i];
                p = fix(self.diag[j][i] - shift - e * e / p);
                if p < 0.0 {
                    negatives += 1;
                }
            }
            let c = self.coupling[j];
            vertex -= c * c / p;
        }
        if fix(vertex) < 0.0 {
            negatives += 1;
        }
        negatives
    }
}

/// Factorization produced by [`StarMatrix::factorize`].
#[derive(Debug, Clone)]
pub struct StarFactor<T: Scalar> {
    matrix: StarMatrix<T>,
    pivots: Vec<Vec<T>>,
    inverse: Vec<Vec<T>>,
    /// `off[i] / pivot[i + 1]` per edge.
    lower: Vec<Vec<T>>,
    /// `coupling / pivot[0]` per edge.
    vertex_lower: Vec<T>,
    vertex_pivot: T,
}

impl<T: Scalar> StarFactor<T> {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Solves `A x = rhs` into `x`.
    pub fn solve(&self, rhs: &[T], x: &mut [T]) {
        let a = &self.matrix;
        let m = a.edge_len();
        debug_assert_eq!(rhs.len(), a.dim());
        debug_assert_eq!(x.len(), a.dim());
        // Forward sweep from the far ends toward the vertex, then back out.
        // The edge chains are independent, so they advance in lockstep to
        // overlap the latency of the recurrences.
        let ne = a.n_edges();
        for j in 0..ne {
            let k = 1 + j * m + m - 1;
            x[k] = rhs[k];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            for j in 0..ne {
                let k = 1 + j * m + i;
                x[k] = rhs[k] - self.lower[j][i] * x[k + 1];
            }
        }
        let mut rv = rhs[0];
        for j in 0..ne {
            rv = rv - self.vertex_lower[j] * x[1 + j * m];
        }
        let xv = rv / self.vertex_pivot;
        x[0] = xv;
        for j in 0..ne {
            let k = 1 + j * m;
            x[k] = (x[k] - a.coupling[j] * xv) * self.inverse[j][0];
        }
        for i in 1..m {
            for j in 0..ne {
                let k = 1 + j * m + i;
                x[k] = (x[k] - a.off[j][i - 1] * x[k - 1]) * self.inverse[j][i];
            }
        }
    }

    pub fn negative_pivots(&self) -> usize
    where
        T: Into<f64>,
    {
        let neg = |t: &T| Into::<f64>::into(*t) < 0.0;
        self.pivots.iter().flatten().filter(|t| neg(t)).count()
            + usize::from(neg(&self.vertex_pivot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::symmetric_eigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_star(n_edges: usize, m: usize, seed: u64) -> StarMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StarMatrix {
            vertex_diag: rng.gen_range(-2.0..2.0),
            coupling: (0..n_edges).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            diag: (0..n_edges)
                .map(|_| (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
            off: (0..n_edges)
                .map(|_| (0..m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        }
    }

    fn dense(a: &StarMatrix<f64>) -> Vec<f64> {
        let n = a.dim();
        let mut out = vec![0.0; n * n];
        for (r, c, v) in a.triplets() {
            out[r * n + c] = v;
        }
        out
    }

    #[test]
    fn matvec_matches_dense() {
        let a = random_star(3, 5, 1);
        let n = a.dim();
        let d = dense(&a);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; n];
        a.matvec(&x, &mut y);
        for r in 0..n {
            let want: f64 = (0..n).map(|c| d[r * n + c] * x[c]).sum();
            assert!((y[r] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn solve_inverts_real_and_complex() {
        let a = random_star(4, 7, 2).affine(6.0, 1.0);
        let n = a.dim();
        let f = a.factorize().unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut x = vec![0.0; n];
        f.solve(&b, &mut x);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }

        let c: StarMatrix<Complex64> =
            random_star(3, 6, 3).affine(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.3));
        let fc = c.factorize().unwrap();
        let bc: Vec<Complex64> = (0..c.dim())
            .map(|i| Complex64::new(i as f64, 1.0))
            .collect();
        let mut xc = vec![Complex64::new(0.0, 0.0); c.dim()];
        fc.solve(&bc, &mut xc);
        let mut axc = vec![Complex64::new(0.0, 0.0); c.dim()];
        c.matvec(&xc, &mut axc);
        for (u, v) in axc.iter().zip(&bc) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn inertia_counts_match_dense_spectrum() {
        let a = random_star(3, 8, 4);
        let eig = symmetric_eigen(a.dim(), &dense(&a)).unwrap();
        for shift in [-3.0, -1.0, 0.0, 0.5, 2.0, 4.0] {
            let want = eig.values.iter().filter(|&&l| l < shift).count();
            assert_eq!(a.count_below(shift), want, "shift {shift}");
        }
        assert!(eig.values[0] >= a.gershgorin_lower() - 1e-12);
    }

    #[test]
    fn singular_pivot_is_reported() {
        let a = StarMatrix {
            vertex_diag: 1.0,
            coupling: vec![0.0, 0.0],
            diag: vec![vec![1.0, 0.0], vec![1.0, 1.0]],
            off: vec![vec![0.0], vec![0.0]],
        };
        assert!(matches!(
            a.factorize(),
            Err(StarMatrixError::SingularPivot { .. })
        ));
    }
}
