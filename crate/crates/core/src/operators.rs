//! Discretized Hessians `L_+` and `L_-` on the truncated star graph.
//!
//! Piecewise-linear elements with lumped mass on each edge, Dirichlet data at
//! `x = L`, and one shared vertex unknown `gamma` with `U_j(0) = alpha_j^{-1/p} gamma`.
//! Weighted continuity is built into the unknowns and the weighted Kirchhoff
//! condition is the natural boundary condition of the quadratic form.
//!
//! Operators are stored in the symmetric scaled form `M^{-1/2} K M^{-1/2}`, so
//! vectors live in "scaled" coordinates `y = M^{1/2} u` whose Euclidean inner
//! product is the lumped `L^2(Gamma)` inner product. Interior rows reduce to
//! `(-U_{i-1} + 2 U_i - U_{i+1}) / h^2 + (1 - c V) U_i`.

use crate::graph::{EdgeGrid, StarGraph};
use crate::linalg::lanczos::{dot, norm, orthonormalize};
use crate::linalg::{
    lowest_eigenpairs as lanczos, symmetric_eigen, EigenSolveError, LanczosOptions, Scalar,
    StarMatrix,
};
use crate::stationary::ShiftedState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("at most 12 eigenpairs may be requested, got {0}")]
    TooManyEigenpairs(usize),
    #[error(transparent)]
    Eigen(#[from] EigenSolveError),
    #[error(
        "projected L_- has eigenvalue {value:e} below -{tol:e} outside its kernel; refine the grid"
    )]
    NonPositiveLminusBeyondKernel { value: f64, tol: f64 },
    #[error("operators do not share a grid and state")]
    Incompatible,
    #[error("factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    Lplus,
    Lminus,
}

impl OperatorKind {
    /// Coefficient `c` multiplying `alpha^2 Phi^{2p}`.
    pub fn coefficient(self, power: f64) -> f64 {
        match self {
            OperatorKind::Lplus => (2.0 * power + 1.0) * (power + 1.0),
            OperatorKind::Lminus => power + 1.0,
        }
    }
}

/// Map between grid samples on the edges and scaled unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    grid: EdgeGrid,
    n_edges: usize,
    /// `alpha_j^{-1/p}`.
    factors: Vec<f64>,
    /// Lumped vertex mass `(h/2) sum_j alpha_j^{-2/p}`.
    vertex_mass: f64,
}

impl DofMap {
    pub fn new(graph: &StarGraph, grid: EdgeGrid) -> Self {
        let factors: Vec<f64> = (0..graph.n_edges())
            .map(|j| graph.vertex_factor(j))
            .collect();
        let weight: f64 = factors.iter().map(|c| c * c).sum();
        DofMap {
            grid,
            n_edges: graph.n_edges(),
            vertex_mass: 0.5 * grid.spacing() * weight,
            factors,
        }
    }

    pub fn grid(&self) -> &EdgeGrid {
        &self.grid
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Interior unknowns per edge (the vertex and the Dirichlet end excluded).
    pub fn edge_len(&self) -> usize {
        self.grid.n_points() - 2
    }

    pub fn dim(&self) -> usize {
        1 + self.n_edges * self.edge_len()
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn vertex_mass(&self) -> f64 {
        self.vertex_mass
    }

    /// Scaled unknowns from edge samples; the vertex value is the weighted
    /// least-squares fit of `psi_j(0) / alpha_j^{-1/p}`.
    pub fn to_dofs<T: Scalar>(&self, edges: &[Vec<T>]) -> Vec<T> {
        let m = self.edge_len();
        let sh = self.grid.spacing().sqrt();
        let weight: f64 = self.factors.iter().map(|c| c * c).sum();
        let mut gamma = T::from(0.0);
        for (c, e) in self.factors.iter().zip(edges) {
            gamma = gamma + T::from(*c) * e[0];
        }
        gamma = gamma / T::from(weight);
        let mut y = Vec::with_capacity(self.dim());
        y.push(gamma * T::from(self.vertex_mass.sqrt()));
        for e in edges {
            y.extend(e[1..=m].iter().map(|&v| v * T::from(sh)));
        }
        y
    }

    /// Edge samples (vertex and Dirichlet end included) from scaled unknowns.
    pub fn to_edges<T: Scalar>(&self, y: &[T]) -> Vec<Vec<T>> {
        let m = self.edge_len();
        let inv = 1.0 / self.grid.spacing().sqrt();
        let gamma = y[0] / T::from(self.vertex_mass.sqrt());
        (0..self.n_edges)
            .map(|j| {
                let mut e = Vec::with_capacity(m + 2);
                e.push(gamma * T::from(self.factors[j]));
                e.extend(
                    y[1 + j * m..1 + (j + 1) * m]
                        .iter()
                        .map(|&v| v * T::from(inv)),
                );
                e.push(T::from(0.0));
                e
            })
            .collect()
    }

    /// Common vertex value `gamma` of scaled unknowns.
    pub fn vertex_value<T: Scalar>(&self, y: &[T]) -> T {
        y[0] / T::from(self.vertex_mass.sqrt())
    }

    /// Scaled free operator `-Delta` (no mass term, no potential).
    pub fn laplacian(&self) -> StarMatrix<f64> {
        self.assemble(|_, _| 0.0)
    }

    /// Scaled `-Delta + q`, with `q(j, i)` the potential at node `i` of edge `j`.
    pub fn assemble(&self, q: impl Fn(usize, usize) -> f64) -> StarMatrix<f64> {
        let h = self.grid.spacing();
        let m = self.edge_len();
        let weight: f64 = self.factors.iter().map(|c| c * c).sum();
        let mut vertex = 0.0;
        let mut coupling = Vec::with_capacity(self.n_edges);
        let mut diag = Vec::with_capacity(self.n_edges);
        let mut off = Vec::with_capacity(self.n_edges);
        for (j, &c) in self.factors.iter().enumerate() {
            vertex += c * c * (1.0 / h + 0.5 * h * q(j, 0));
            coupling.push(-c / h / (self.vertex_mass * h).sqrt());
            diag.push((1..=m).map(|i| 2.0 / (h * h) + q(j, i)).collect());
            off.push(vec![-1.0 / (h * h); m - 1]);
        }
        StarMatrix {
            vertex_diag: vertex / (0.5 * h * weight),
            coupling,
            diag,
            off,
        }
    }
}

/// A discretized `L_+` or `L_-`.
#[derive(Debug, Clone)]
pub struct GraphOperator {
    kind: OperatorKind,
    dofs: DofMap,
    matrix: StarMatrix<f64>,
    potential_max: f64,
    potential_floor: f64,
    /// Shift `a` of the state the operator was built at, for compatibility checks.
    shift: f64,
}

/// Assembles `L_+` or `L_-` at a stationary state.
pub fn assemble(
    graph: &StarGraph,
    state: &ShiftedState,
    kind: OperatorKind,
) -> Result<GraphOperator, OperatorError> {
    if state.graph().n_edges() != graph.n_edges() || state.graph().alphas() != graph.alphas() {
        return Err(OperatorError::GridMismatch(
            "state was built on a different graph".into(),
        ));
    }
    let edges = state.real_edges();
    let op = assemble_with_profile(graph, *state.grid(), &edges, state.omega(), kind)?;
    Ok(GraphOperator {
        shift: state.shift(),
        ..op
    })
}

/// Assembles `-Delta + omega - c alpha^2 |u|^{2p}` for real edge samples `u`.
pub fn assemble_with_profile(
    graph: &StarGraph,
    grid: EdgeGrid,
    edges: &[Vec<f64>],
    omega: f64,
    kind: OperatorKind,
) -> Result<GraphOperator, OperatorError> {
    if edges.len() != graph.n_edges() || edges.iter().any(|e| e.len() != grid.n_points()) {
        return Err(OperatorError::GridMismatch(format!(
            "expected {} edges of {} samples",
            graph.n_edges(),
            grid.n_points()
        )));
    }
    let p = graph.power();
    let c = kind.coefficient(p);
    let pot: Vec<Vec<f64>> = edges
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let a2 = graph.alphas()[j].powi(2);
            e.iter().map(|u| a2 * u.abs().powf(2.0 * p)).collect()
        })
        .collect();
    let potential_max = pot.iter().flatten().fold(0.0f64, |m, v| m.max(c * v));
    let dofs = DofMap::new(graph, grid);
    let matrix = dofs.assemble(|j, i| omega - c * pot[j][i]);
    Ok(GraphOperator {
        kind,
        dofs,
        matrix,
        potential_max,
        potential_floor: omega - potential_max,
        shift: f64::NAN,
    })
}

/// `-Delta + 1` with no potential.
pub fn free_operator(graph: &StarGraph, grid: EdgeGrid) -> GraphOperator {
    let dofs = DofMap::new(graph, grid);
    let matrix = dofs.assemble(|_, _| 1.0);
    GraphOperator {
        kind: OperatorKind::Lminus,
        dofs,
        matrix,
        potential_max: 0.0,
        potential_floor: 1.0,
        shift: f64::NAN,
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit vector in scaled coordinates.
    pub vector: Vec<f64>,
    pub residual: f64,
}

impl GraphOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn matrix(&self) -> &StarMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.dofs.grid.spacing()
    }

    /// `10 h^2 (1 + max |c V|)`.
    pub fn tol_zero(&self) -> f64 {
        let h = self.spacing();
        10.0 * h * h * (1.0 + self.potential_max)
    }

    /// `min(omega - c V)` bound from below on the spectrum.
    pub fn lower_bound(&self) -> f64 {
        self.potential_floor
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.matrix.matvec(x, &mut y);
        y
    }

    /// `(row, col, value)` lines, both triangles, 0-based, scaled form.
    pub fn write_coordinates<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# {} x {} symmetric, {:?}",
            self.dim(),
            self.dim(),
            self.kind
        )?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}

/// The `k <= 12` lowest eigenpairs.
pub fn lowest_eigenpairs(op: &GraphOperator, k: usize) -> Result<Vec<EigenPair>, OperatorError> {
    lowest_eigenpairs_seeded(op, k, 0x5eed)
}

pub fn lowest_eigenpairs_seeded(
    op: &GraphOperator,
    k: usize,
    seed: u64,
) -> Result<Vec<EigenPair>, OperatorError> {
    if k > 12 {
        return Err(OperatorError::TooManyEigenpairs(k));
    }
    let opts = LanczosOptions {
        count: k,
        block: op.dofs.n_edges() + 1,
        max_dim: 400,
        tol: 1e-9,
        seed,
    };
    let pairs = lanczos(&op.matrix, &opts)?;
    Ok(pairs
        .values
        .into_iter()
        .zip(pairs.vectors)
        .zip(pairs.residuals)
        .map(|((lambda, vector), residual)| EigenPair {
            lambda,
            vector,
            residual,
        })
        .collect())
}

/// `(negatives, zeros)`: eigenvalues below `-tol_zero` and within `tol_zero`,
/// counted exactly by the inertia of `A -+ tol_zero I`.
pub fn morse_index(op: &GraphOperator) -> (usize, usize) {
    let tol = op.tol_zero();
    let neg = op.matrix.count_below(-tol);
    let upto = op.matrix.count_below(tol);
    (neg, upto - neg)
}

/// Real positive eigenvalue of the linearized problem with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealEigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub real_positive: Vec<RealEigenvalue>,
    pub max_growth_rate: f64,
    /// Pairs `+-i w` with `0 < w < 1`, i.e. below the continuous spectrum.
    pub purely_imaginary_count: usize,
    /// Largest full-space residual of `(-lambda, [U; -W])` over the real
    /// eigenvalues, relative to `|lambda| + ||L_+|| + ||L_-||` and the vector norm.
    pub quartet_residual: f64,
    /// Same for `(lambda, [U; W])`.
    pub residual: f64,
    /// Dimension of the final Galerkin space.
    pub basis_dim: usize,
    /// Projected `L_-` eigenvalue removed as the kernel.
    pub kernel_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    /// Krylov vectors taken from each operator for the initial space.
    pub per_operator: usize,
    pub seed: u64,
    /// Relative gap below which real eigenvalues are clustered.
    pub cluster_tol: f64,
    /// Residual-correction sweeps after the initial projection.
    pub max_refinements: usize,
    /// Target relative residual of the real eigenpairs.
    pub residual_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            per_operator: 80,
            seed: 0x5eed,
            cluster_tol: 1e-6,
            max_refinements: 12,
            residual_tol: 1e-12,
        }
    }
}

/// `A - sigma` factorized with `sigma` below the spectrum.
fn shifted_factor(op: &GraphOperator) -> Result<crate::linalg::StarFactor<f64>, OperatorError> {
    // -Delta is nonnegative, so the potential alone bounds the spectrum below
    let sigma = op.lower_bound() - 1.0;
    op.matrix
        .affine(-sigma, 1.0)
        .factorize()
        .map_err(|e| OperatorError::Factorization(e.to_string()))
}

fn solve_with(factor: &crate::linalg::StarFactor<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    factor.solve(x, &mut y);
    y
}

/// Shift-inverted block Krylov vectors: low-frequency directions of `op`.
fn krylov_vectors(
    op: &GraphOperator,
    factor: &crate::linalg::StarFactor<f64>,
    size: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = op.dofs.n_edges() + 1;
    let mut current: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    // a few inverse iterations first so the start block is already smooth
    for _ in 0..3 {
        current = current
            .iter()
            .map(|x| {
                let mut y = solve_with(factor, x);
                let s = norm(&y);
                y.iter_mut().for_each(|t| *t /= s);
                y
            })
            .collect();
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < size {
        let fresh = orthonormalize(&out, current);
        if fresh.is_empty() {
            break;
        }
        current = fresh.iter().map(|x| solve_with(factor, x)).collect();
        let room = size - out.len();
        out.extend(fresh.into_iter().take(room));
    }
    out
}

/// Orthonormal basis with cached images and projections of both operators.
struct Galerkin<'a> {
    lp: &'a GraphOperator,
    lm: &'a GraphOperator,
    basis: Vec<Vec<f64>>,
    img_p: Vec<Vec<f64>>,
    img_m: Vec<Vec<f64>>,
    /// Lower-triangular rows of the projections.
    ap: Vec<Vec<f64>>,
    am: Vec<Vec<f64>>,
}

struct Unstable {
    lambda: f64,
    u: Vec<f64>,
    w: Vec<f64>,
}

struct Reduced {
    unstable: Vec<Unstable>,
    imaginary: usize,
    kernel_eigenvalue: f64,
}

impl<'a> Galerkin<'a> {
    fn new(lp: &'a GraphOperator, lm: &'a GraphOperator) -> Self {
        Galerkin {
            lp,
            lm,
            basis: Vec::new(),
            img_p: Vec::new(),
            img_m: Vec::new(),
            ap: Vec::new(),
            am: Vec::new(),
        }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn extend(&mut self, vectors: Vec<Vec<f64>>) -> usize {
        let fresh = orthonormalize(&self.basis, vectors);
        let added = fresh.len();
        for q in fresh {
            let qp = self.lp.apply(&q);
            let qm = self.lm.apply(&q);
            let k = self.basis.len();
            let mut row_p = Vec::with_capacity(k + 1);
            let mut row_m = Vec::with_capacity(k + 1);
            for i in 0..k {
                let b = &self.basis[i];
                row_p.push(0.5 * (dot(b, &qp) + dot(&q, &self.img_p[i])));
                row_m.push(0.5 * (dot(b, &qm) + dot(&q, &self.img_m[i])));
            }
            row_p.push(dot(&q, &qp));
            row_m.push(dot(&q, &qm));
            self.ap.push(row_p);
            self.am.push(row_m);
            self.basis.push(q);
            self.img_p.push(qp);
            self.img_m.push(qm);
        }
        added
    }

    fn dense(rows: &[Vec<f64>]) -> Vec<f64> {
        let d = rows.len();
        let mut out = vec![0.0; d * d];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        out
    }

    /// Reduced problem on the current space; the first basis vector is taken
    /// as the `L_-` kernel direction when `pinned`.
    fn solve(&self, pinned: bool) -> Result<Reduced, OperatorError> {
        let d = self.dim();
        let am = Self::dense(&self.am);
        let ap = Self::dense(&self.ap);
        let dense_err = |e: crate::linalg::DenseEigenError| EigenSolveError::Dense(e.to_string());
        let em = symmetric_eigen(d, &am).map_err(dense_err)?;
        let kernel_idx = if pinned {
            (0..d)
                .max_by(|&i, &j| em.vectors[i][0].abs().total_cmp(&em.vectors[j][0].abs()))
                .unwrap_or(0)
        } else {
            0
        };
        let tol = self.lm.tol_zero();
        let keep: Vec<usize> = (0..d).filter(|&i| i != kernel_idx).collect();
        if let Some(&bad) = keep.iter().find(|&&i| em.values[i] < -tol) {
            return Err(OperatorError::NonPositiveLminusBeyondKernel {
                value: em.values[bad],
                tol,
            });
        }
        // S = D^{1/2} V^T A_+ V D^{1/2} on the complement of the kernel
        let r = keep.len();
        let sqrt_d: Vec<f64> = keep.iter().map(|&i| em.values[i].max(0.0).sqrt()).collect();
        let apv: Vec<Vec<f64>> = keep
            .iter()
            .map(|&i| dense_apply(&ap, &em.vectors[i]))
            .collect();
        let mut s = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..=a {
                let val = sqrt_d[a] * sqrt_d[b] * dot(&apv[a], &em.vectors[keep[b]]);
                s[a * r + b] = val;
                s[b * r + a] = val;
            }
        }
        let es = symmetric_eigen(r, &s).map_err(dense_err)?;
        let tol_plus = self.lp.tol_zero();
        let mut unstable = Vec::new();
        let mut imaginary = 0;
        for (mu, z) in es.values.iter().zip(&es.vectors) {
            if *mu < -tol_plus {
                let lambda = (-mu).sqrt();
                // U = V D^{1/2} z, W = -L_+ U / lambda
                let mut u = vec![0.0; d];
                for (a, &i) in keep.iter().enumerate() {
                    let c = sqrt_d[a] * z[a];
                    for (ui, vi) in u.iter_mut().zip(&em.vectors[i]) {
                        *ui += c * vi;
                    }
                }
                let w: Vec<f64> = dense_apply(&ap, &u).iter().map(|x| -x / lambda).collect();
                unstable.push(Unstable { lambda, u, w });
            } else if *mu > tol_plus && *mu < 1.0 {
                imaginary += 1;
            }
        }
        Ok(Reduced {
            unstable,
            imaginary,
            kernel_eigenvalue: em.values[kernel_idx],
        })
    }

    fn combine(&self, coef: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; vectors[0].len()];
        for (c, v) in coef.iter().zip(vectors) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }

    /// Full-space residual blocks of `(sign lambda, [U; sign W])`.
    fn residual(&self, e: &Unstable, sign: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let u = self.combine(&e.u, &self.basis);
        let w = self.combine(&e.w, &self.basis);
        let lmw = self.combine(&e.w, &self.img_m);
        let lpu = self.combine(&e.u, &self.img_p);
        let l = sign * e.lambda;
        let r1: Vec<f64> = lmw.iter().zip(&u).map(|(a, b)| sign * a - l * b).collect();
        let r2: Vec<f64> = lpu.iter().zip(&w).map(|(a, b)| -a - l * sign * b).collect();
        let size = (norm(&u).powi(2) + norm(&w).powi(2)).sqrt();
        let scale = e.lambda + self.lp.matrix.max_abs() + self.lm.matrix.max_abs();
        let rel = (norm(&r1).powi(2) + norm(&r2).powi(2)).sqrt() / (size * scale);
        (r1, r2, rel)
    }
}

fn dense_apply(a: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|row| dot(&a[row * d..(row + 1) * d], x))
        .collect()
}

/// Spectrum of `lambda [U; W] = [[0, L_-], [-L_+, 0]] [U; W]` near the origin.
pub fn stability_spectrum(
    lp: &GraphOperator,
    lm: &GraphOperator,
) -> Result<StabilityReport, OperatorError> {
    stability_spectrum_with(lp, lm, None, &StabilityOptions::default())
}

/// As [`stability_spectrum`]; `kernel` (scaled coordinates) identifies the
/// `L_-` kernel direction, defaulting to the lowest projected direction of `L_-`.
///
/// The initial space holds low-frequency Krylov vectors of both operators.
/// Each real eigenpair is then improved by adding shift-inverted full-space
/// residuals until its residual drops below `residual_tol`.
pub fn stability_spectrum_with(
    lp: &GraphOperator,
    lm: &GraphOperator,
    kernel: Option<&[f64]>,
    opts: &StabilityOptions,
) -> Result<StabilityReport, OperatorError> {
    if lp.dofs != lm.dofs
        || lp.kind != OperatorKind::Lplus
        || lm.kind != OperatorKind::Lminus
        || !(lp.shift == lm.shift || (lp.shift.is_nan() && lm.shift.is_nan()))
    {
        return Err(OperatorError::Incompatible);
    }
    let fp = shifted_factor(lp)?;
    let fm = shifted_factor(lm)?;
    let mut space = Galerkin::new(lp, lm);
    if let Some(k) = kernel {
        space.extend(vec![k.to_vec()]);
    }
    space.extend(krylov_vectors(lm, &fm, opts.per_operator, opts.seed));
    space.extend(krylov_vectors(
        lp,
        &fp,
        opts.per_operator,
        opts.seed ^ 0x9e37_79b9,
    ));

    let mut reduced = space.solve(kernel.is_some())?;
    for _ in 0..opts.max_refinements {
        let mut corrections = Vec::new();
        let mut worst = 0.0f64;
        for e in &reduced.unstable {
            let (r1, r2, rel) = space.residual(e, 1.0);
            worst = worst.max(rel);
            for r in [&r1, &r2] {
                corrections.push(solve_with(&fp, r));
                corrections.push(solve_with(&fm, r));
            }
        }
        if worst <= opts.residual_tol || space.extend(corrections) == 0 {
            break;
        }
        reduced = space.solve(kernel.is_some())?;
    }

    let mut residual = 0.0f64;
    let mut quartet = 0.0f64;
    for e in &reduced.unstable {
        residual = residual.max(space.residual(e, 1.0).2);
        quartet = quartet.max(space.residual(e, -1.0).2);
    }
    let mut reals: Vec<f64> = reduced.unstable.iter().map(|e| e.lambda).collect();
    reals.sort_by(|a, b| b.total_cmp(a));
    let mut real_positive: Vec<RealEigenvalue> = Vec::new();
    for l in reals {
        match real_positive.last_mut() {
            Some(last) if (last.lambda - l).abs() <= opts.cluster_tol * last.lambda.max(1.0) => {
                last.multiplicity += 1
            }
            _ => real_positive.push(RealEigenvalue {
                lambda: l,
                multiplicity: 1,
            }),
        }
    }
    Ok(StabilityReport {
        max_growth_rate: real_positive.first().map_or(0.0, |r| r.lambda),
        real_positive,
        purely_imaginary_count: reduced.imaginary,
        quartet_residual: quartet,
        residual,
        basis_dim: space.dim(),
        kernel_eigenvalue: reduced.kernel_eigenvalue,
    })
}

/// Cosine similarity of two grid functions in the lumped `L^2` inner product.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).abs() / (norm(a) * norm(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shooting::lambda1_closed_form;
    use crate::stationary::{half_soliton, shifted_state};

    fn sym_error(a: &StarMatrix<f64>) -> bool {
        let t = a.triplets();
        t.iter().all(|&(r, c, v)| {
            t.iter()
                .find(|&&(r2, c2, _)| r2 == c && c2 == r)
                .is_some_and(|&(_, _, w)| w.to_bits() == v.to_bits())
        })
    }

    #[test]
    fn assembly_is_symmetric_and_reduces_to_fd_rows() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let grid = EdgeGrid::new(1.0, 11).unwrap();
        let s = shifted_state(&g, grid, 0.3, g.canonical_pattern()).unwrap();
        let op = assemble(&g, &s, OperatorKind::Lplus).unwrap();
        assert!(sym_error(op.matrix()));
        let h = grid.spacing();
        let d = &op.matrix().diag[2];
        let v = s.field().edge(2)[3].re;
        assert!((d[2] - (2.0 / (h * h) + 1.0 - 6.0 * v * v)).abs() < 1e-10);
    }

    #[test]
    fn free_operator_bottom() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let grid = EdgeGrid::with_spacing(25.0, 0.05).unwrap();
        let op = free_operator(&g, grid);
        let e = lowest_eigenpairs(&op, 3).unwrap();
        assert!(e[0].lambda >= 1.0 - 1e-3 && e[0].lambda < 1.01);
    }

    #[test]
    fn half_soliton_kernel_multiplicity() {
        let g = StarGraph::uniform(3, 1.0);
        assert!(g.is_err());
        let g = StarGraph::new_unconstrained(3, 1, &[1.0; 3], 1.0).unwrap();
        let grid = EdgeGrid::for_states(1.0, 0.0, 0.02).unwrap();
        let s = half_soliton(&g, grid);
        let op = assemble(&g, &s, OperatorKind::Lplus).unwrap();
        assert_eq!(morse_index(&op), (1, 2));
        let e = lowest_eigenpairs(&op, 4).unwrap();
        assert!((e[0].lambda + 3.0).abs() < 1e-2);
        assert!(e[1].lambda.abs() < op.tol_zero() && e[2].lambda.abs() < op.tol_zero());
    }

    #[test]
    fn lplus_matches_shooting_at_n4() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let grid = EdgeGrid::for_states(1.0, 0.7, 0.02).unwrap();
        let s = shifted_state(&g, grid, 0.7, g.canonical_pattern()).unwrap();
        let op = assemble(&g, &s, OperatorKind::Lplus).unwrap();
        let e = lowest_eigenpairs(&op, 4).unwrap();
        assert!((e[0].lambda + 3.0).abs() < 5e-3);
        assert!((e[1].lambda - lambda1_closed_form(0.7)).abs() < 5e-3);
        assert!(e[2].lambda.abs() < op.tol_zero());
        assert!(e.iter().all(|p| p.residual <= 1e-9));
        assert_eq!(morse_index(&op), (2, 1));
        // translation mode
        let t = op.dofs().to_dofs(&s.translation_mode());
        assert!(cosine_similarity(&t, &e[2].vector) > 1.0 - 1e-6);
    }

    #[test]
    fn lminus_kernel_is_the_state() {
        let s2 = 2f64.sqrt();
        let g = StarGraph::new(3, 1, &[1.0, s2, s2], 1.0).unwrap();
        let grid = EdgeGrid::for_states(1.0, 0.7, 0.02).unwrap();
        let s = shifted_state(&g, grid, -0.7, g.canonical_pattern()).unwrap();
        let op = assemble(&g, &s, OperatorKind::Lminus).unwrap();
        let e = lowest_eigenpairs(&op, 2).unwrap();
        assert!(e[0].lambda.abs() < op.tol_zero());
        let phi = op.dofs().to_dofs(&s.real_edges());
        assert!(cosine_similarity(&phi, &e[0].vector) > 1.0 - 1e-6);
        assert_eq!(morse_index(&op), (0, 1));
    }

    #[test]
    fn dof_round_trip() {
        let s2 = 2f64.sqrt();
        let g = StarGraph::new(3, 1, &[1.0, s2, s2], 1.0).unwrap();
        let grid = EdgeGrid::new(2.0, 9).unwrap();
        let map = DofMap::new(&g, grid);
        let y: Vec<f64> = (0..map.dim()).map(|i| (i as f64).sin()).collect();
        let back = map.to_dofs(&map.to_edges(&y));
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn stability(g: &StarGraph, a: f64, per: usize) -> StabilityReport {
        let grid = EdgeGrid::for_states(1.0, a, 0.02).unwrap();
        let s = shifted_state(g, grid, a, g.canonical_pattern()).unwrap();
        let lp = assemble(g, &s, OperatorKind::Lplus).unwrap();
        let lm = assemble(g, &s, OperatorKind::Lminus).unwrap();
        let phi = lm.dofs().to_dofs(&s.real_edges());
        let opts = StabilityOptions {
            per_operator: per,
            ..Default::default()
        };
        stability_spectrum_with(&lp, &lm, Some(&phi), &opts).unwrap()
    }

    #[test]
    fn stability_n4_one_real_pair() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let r = stability(&g, 0.7, 60);
        assert_eq!(r.real_positive.len(), 1);
        assert_eq!(r.real_positive[0].multiplicity, 1);
        assert!(r.quartet_residual < 1e-10 && r.residual < 1e-10);
        assert_eq!(r.max_growth_rate, r.real_positive[0].lambda);
        // independent of the initial space
        let r2 = stability(&g, 0.7, 120);
        assert!((r2.max_growth_rate - r.max_growth_rate).abs() < 1e-9);
    }

    #[test]
    fn stable_branch_has_no_real_pair() {
        let s2 = 2f64.sqrt();
        let g = StarGraph::new(3, 1, &[1.0, s2, s2], 1.0).unwrap();
        let r = stability(&g, -0.7, 60);
        assert!(r.real_positive.is_empty());
        assert_eq!(r.max_growth_rate, 0.0);
    }

    #[test]
    fn incompatible_operators() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let grid = EdgeGrid::for_states(1.0, 0.7, 0.05).unwrap();
        let s = shifted_state(&g, grid, 0.7, g.canonical_pattern()).unwrap();
        let lp = assemble(&g, &s, OperatorKind::Lplus).unwrap();
        assert!(matches!(
            stability_spectrum(&lp, &lp),
            Err(OperatorError::Incompatible)
        ));
        assert!(matches!(
            lowest_eigenpairs(&lp, 13),
            Err(OperatorError::TooManyEigenpairs(13))
        ));
    }
}
