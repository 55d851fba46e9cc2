//! Time evolution of the graph NLS `i psi_t = -psi'' - (p+1) alpha_j^2 |psi|^{2p} psi`.
//!
//! The spatial discretization is the lumped piecewise-linear one of
//! [`crate::operators`]: one vertex unknown with weighted continuity built in,
//! Dirichlet data at `x = L`. Time stepping is the conservative Crank-Nicolson
//! scheme in which the nonlinearity is the divided difference
//! `alpha^2 (F(s1) - F(s0)) / (s1 - s0)`, `F(s) = s^{p+1}`, `s = |u|^2`, applied to
//! the step average. Both the lumped mass and the lumped energy are invariants
//! of the discrete map.
//!
//! Each step solves `(I + i tau/2 A) y1 = (I - i tau/2 A) y0 + i tau/2 G(y0, y1)(y1 + y0)`
//! by fixed-point iteration with the left-hand side factorized once. If that
//! stalls, the step is retried with `G` lagged into the left-hand side and the
//! matrix refactorized every iteration.

use crate::graph::{trapezoid, EdgeGrid, GraphError, GraphField, SignPattern, StarGraph};
use crate::linalg::{StarFactor, StarMatrix};
use crate::operators::{assemble_with_profile, DofMap, OperatorError, OperatorKind};
use crate::stationary::{
    shifted_state_with_omega, soliton_profile, soliton_profile_derivative, ShiftedState,
    StationaryError,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("nonlinear solve diverged at step {step} (t = {t}) after {iterations} iterations")]
    NonlinearSolveDiverged {
        step: usize,
        t: f64,
        iterations: usize,
    },
    #[error("initial data violates weighted continuity at the vertex by {0:e}")]
    ContinuityViolatedAtInput(f64),
    #[error(
        "no exponential growth detected up to t = {t_end} (largest deviation {max_deviation:e})"
    )]
    NoGrowthDetected { max_deviation: f64, t_end: f64 },
    #[error("p = {0} is not subcritical; need 0 < p < 2")]
    SupercriticalP(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field does not match the graph: {0}")]
    GridMismatch(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("stationary Newton iteration did not converge (residual {0:e})")]
    NewtonFailed(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

/// `(s1^{p+1} - s0^{p+1}) / (s1 - s0)`, continuous across `s0 = s1`.
pub fn divided_power(s0: f64, s1: f64, p: f64) -> f64 {
    if p == 1.0 {
        return s0 + s1;
    }
    let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
    if hi == 0.0 {
        return 0.0;
    }
    let r = lo / hi;
    if r == 1.0 {
        return (p + 1.0) * hi.powf(p);
    }
    let t = r.ln();
    hi.powf(p) * (((p + 1.0) * t).exp_m1() / t.exp_m1())
}

/// Outcome of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub iterations: usize,
    pub fallback: bool,
}

/// Crank-Nicolson stepper in scaled coordinates `y = M^{1/2} u`.
#[derive(Debug, Clone)]
pub struct Stepper {
    dofs: DofMap,
    power: f64,
    tau: f64,
    lap: StarMatrix<f64>,
    lhs: StarMatrix<Complex64>,
    factor: StarFactor<Complex64>,
    /// Lumped mass of each unknown.
    mass: Vec<f64>,
    /// `alpha^2` of each unknown (1 at the vertex, where the weights cancel).
    coef: Vec<f64>,
    y: Vec<Complex64>,
    prev: Option<Vec<Complex64>>,
    pub tol: f64,
    pub max_iterations: usize,
    t: f64,
    steps: usize,
}

impl Stepper {
    /// `tau` may be negative for backward runs.
    pub fn new(graph: &StarGraph, grid: EdgeGrid, tau: f64) -> Result<Self, DynamicsError> {
        if !(tau.is_finite() && tau != 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("tau = {tau}")));
        }
        let dofs = DofMap::new(graph, grid);
        let lap = dofs.laplacian();
        let lhs = lap.affine(Complex64::new(1.0, 0.0), I * (0.5 * tau));
        let factor = lhs
            .factorize()
            .map_err(|e| DynamicsError::Factorization(e.to_string()))?;
        let m = dofs.edge_len();
        let h = grid.spacing();
        let mut mass = vec![dofs.vertex_mass()];
        let mut coef = vec![1.0];
        for a in graph.alphas() {
            mass.extend(std::iter::repeat_n(h, m));
            coef.extend(std::iter::repeat_n(a * a, m));
        }
        let dim = dofs.dim();
        Ok(Stepper {
            dofs,
            power: graph.power(),
            tau,
            lap,
            lhs,
            factor,
            mass,
            coef,
            y: vec![Complex64::new(0.0, 0.0); dim],
            prev: None,
            tol: 1e-14,
            max_iterations: 60,
            t: 0.0,
            steps: 0,
        })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> &[Complex64] {
        &self.y
    }

    pub fn set_state(&mut self, y: Vec<Complex64>, t: f64) {
        assert_eq!(y.len(), self.dofs.dim());
        self.y = y;
        self.prev = None;
        self.t = t;
    }

    pub fn field(&self) -> GraphField {
        GraphField::new(*self.dofs.grid(), self.dofs.to_edges(&self.y))
            .expect("dof map produces matching edges")
    }

    /// Lumped mass `sum |y|^2`.
    pub fn mass(&self) -> f64 {
        self.y.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Lumped energy `<A y, y> - sum_k m_k alpha_k^2 |u_k|^{2p+2}`, conserved by the scheme.
    pub fn energy(&self) -> f64 {
        let mut ay = vec![Complex64::new(0.0, 0.0); self.y.len()];
        self.lap.matvec_complex(&self.y, &mut ay);
        let kinetic: f64 = ay.iter().zip(&self.y).map(|(a, y)| (a * y.conj()).re).sum();
        let potential: f64 = self
            .y
            .iter()
            .zip(&self.mass)
            .zip(&self.coef)
            .map(|((y, m), c)| c * m * (y.norm_sqr() / m).powf(self.power + 1.0))
            .sum();
        kinetic - potential
    }

    /// Same value as [`crate::graph::momentum`] on [`Stepper::field`], without building the field.
    pub fn momentum(&self, pattern: &SignPattern) -> f64 {
        let h = self.dofs.grid().spacing();
        let m = self.dofs.edge_len();
        let gamma = self.dofs.vertex_value(&self.y);
        let inv = 1.0 / h.sqrt();
        let zero = Complex64::new(0.0, 0.0);
        let mut total = 0.0;
        for (j, &c) in self.dofs.factors().iter().enumerate() {
            let ye = &self.y[1 + j * m..1 + (j + 1) * m];
            // samples 0..=m+1: vertex, interior, Dirichlet end
            let u = |i: usize| -> Complex64 {
                if i == 0 {
                    c * gamma
                } else if i <= m {
                    ye[i - 1] * inv
                } else {
                    zero
                }
            };
            let last = m + 1;
            let d0 = (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h);
            let dl = (3.0 * u(last) - 4.0 * u(last - 1) + u(last - 2)) / (2.0 * h);
            let mut sum = 0.5 * ((d0 * u(0).conj()).im + (dl * u(last).conj()).im);
            for i in 1..last {
                let d = (u(i + 1) - u(i - 1)) / (2.0 * h);
                sum += (d * u(i).conj()).im;
            }
            total += pattern.sign(j) * sum * h;
        }
        total
    }

    fn nonlinear(&self, y0: &[Complex64], y1: &[Complex64]) -> Vec<f64> {
        y0.iter()
            .zip(y1)
            .zip(self.mass.iter().zip(&self.coef))
            .map(|((a, b), (m, c))| {
                c * divided_power(a.norm_sqr() / m, b.norm_sqr() / m, self.power)
            })
            .collect()
    }

    /// Advances one step; on failure the state is left unchanged.
    pub fn step(&mut self) -> Result<StepInfo, DynamicsError> {
        let n = self.y.len();
        let half = I * (0.5 * self.tau);
        let mut ay = vec![Complex64::new(0.0, 0.0); n];
        self.lap.matvec_complex(&self.y, &mut ay);
        let base: Vec<Complex64> = self.y.iter().zip(&ay).map(|(y, a)| y - half * a).collect();
        let mut y1: Vec<Complex64> = match &self.prev {
            Some(p) => self.y.iter().zip(p).map(|(y, q)| 2.0 * y - q).collect(),
            None => self.y.clone(),
        };
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        let s0: Vec<f64> = self
            .y
            .iter()
            .zip(&self.mass)
            .map(|(z, m)| z.norm_sqr() / m)
            .collect();
        let mut converged = None;
        let mut last = f64::INFINITY;
        for it in 1..=self.max_iterations {
            for k in 0..n {
                let s1 = y1[k].norm_sqr() / self.mass[k];
                let g = self.coef[k] * divided_power(s0[k], s1, self.power);
                rhs[k] = base[k] + half * g * (y1[k] + self.y[k]);
            }
            self.factor.solve(&rhs, &mut next);
            let (diff, size) = change(&next, &y1);
            std::mem::swap(&mut y1, &mut next);
            if self.converged(diff, last, size) {
                converged = Some(it);
                break;
            }
            if !diff.is_finite() {
                break;
            }
            last = diff;
        }
        let info = match converged {
            Some(iterations) => StepInfo {
                iterations,
                fallback: false,
            },
            None => {
                let (y, iterations) = self.lagged_step(&base)?;
                y1 = y;
                StepInfo {
                    iterations,
                    fallback: true,
                }
            }
        };
        self.prev = Some(std::mem::replace(&mut self.y, y1));
        self.t += self.tau;
        self.steps += 1;
        Ok(info)
    }

    /// Converged to `tol`, or stalled at round-off.
    fn converged(&self, diff: f64, last: f64, size: f64) -> bool {
        size.is_finite()
            && (diff <= self.tol * size || (diff > 0.5 * last && diff <= 1e3 * f64::EPSILON * size))
    }

    /// Fixed point with `G` moved into the matrix.
    fn lagged_step(&self, base: &[Complex64]) -> Result<(Vec<Complex64>, usize), DynamicsError> {
        let n = self.y.len();
        let half = I * (0.5 * self.tau);
        let m = self.dofs.edge_len();
        let mut y1 = self.y.clone();
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        let mut last = f64::INFINITY;
        for it in 1..=self.max_iterations {
            let g = self.nonlinear(&self.y, &y1);
            let mut mat = self.lhs.clone();
            mat.vertex_diag -= half * g[0];
            for (j, d) in mat.diag.iter_mut().enumerate() {
                for (i, v) in d.iter_mut().enumerate() {
                    *v -= half * g[1 + j * m + i];
                }
            }
            let rhs: Vec<Complex64> = (0..n).map(|k| base[k] + half * g[k] * self.y[k]).collect();
            mat.factorize()
                .map_err(|e| DynamicsError::Factorization(e.to_string()))?
                .solve(&rhs, &mut next);
            let (diff, size) = change(&next, &y1);
            std::mem::swap(&mut y1, &mut next);
            if self.converged(diff, last, size) {
                return Ok((y1, it));
            }
            if !diff.is_finite() {
                break;
            }
            last = diff;
        }
        Err(DynamicsError::NonlinearSolveDiverged {
            step: self.steps + 1,
            t: self.t + self.tau,
            iterations: self.max_iterations,
        })
    }

    /// Vertex fluxes `psi_j'(0)` at the midpoint of the last step.
    ///
    /// Recovered from the vertex row of the scheme, so that the weighted
    /// Kirchhoff sum `sum_j alpha_j^{-1/p} psi_j'(0)` vanishes to solver precision.
    pub fn midpoint_fluxes(&self) -> Option<Vec<Complex64>> {
        let prev = self.prev.as_ref()?;
        let mv = self.dofs.vertex_mass();
        let h = self.dofs.grid().spacing();
        let m = self.dofs.edge_len();
        let g0 = divided_power(
            prev[0].norm_sqr() / mv,
            self.y[0].norm_sqr() / mv,
            self.power,
        );
        let gamma = 0.5 * (prev[0] + self.y[0]) / mv.sqrt();
        let gamma_t = (self.y[0] - prev[0]) / (self.tau * mv.sqrt());
        let curvature = -I * gamma_t - g0 * gamma;
        Some(
            self.dofs
                .factors()
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let k = 1 + j * m;
                    let u1 = 0.5 * (prev[k] + self.y[k]) / h.sqrt();
                    (u1 - c * gamma) / h - 0.5 * h * c * curvature
                })
                .collect(),
        )
    }
}

/// `(max |a - b|, max |a|)` in the max norm.
/// `(max |a - b|, max |a|)`; the size is NaN if any entry of `a` is not finite.
fn change(a: &[Complex64], b: &[Complex64]) -> (f64, f64) {
    let (mut d, mut s) = (0.0f64, 0.0f64);
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let n = x.norm_sqr();
        d = d.max((x - y).norm_sqr());
        s = s.max(n);
        sum += n;
    }
    if !f64::is_finite(sum) {
        return (f64::NAN, f64::NAN);
    }
    (d.sqrt(), s.sqrt().max(1e-300))
}

/// Momentum balance `sum_j (-1)^{m_j} |psi_j'(0)|^2` from vertex fluxes.
pub fn balance_rhs(pattern: &SignPattern, fluxes: &[Complex64]) -> f64 {
    fluxes
        .iter()
        .enumerate()
        .map(|(j, f)| pattern.sign(j) * f.norm_sqr())
        .sum()
}

/// For one incoming edge: the pairwise form
/// `(-1)^{m_1+1} (alpha_1^{2/p}/2) sum_{i != j} |alpha_j^{1/p} psi_j' - alpha_i^{1/p} psi_i'|^2 / (alpha_i alpha_j)^{2/p}`
/// over the outgoing edges. `None` unless the graph has exactly one incoming edge.
pub fn balance_rhs_pairwise(
    graph: &StarGraph,
    pattern: &SignPattern,
    fluxes: &[Complex64],
) -> Option<f64> {
    if graph.n_incoming() != 1 {
        return None;
    }
    let first = (0..graph.n_edges()).find(|&j| graph.is_incoming(j))?;
    let p = graph.power();
    let a = graph.alphas();
    let sign = -pattern.sign(first);
    let rest: Vec<usize> = (0..graph.n_edges()).filter(|&j| j != first).collect();
    let mut sum = 0.0;
    for &i in &rest {
        for &j in &rest {
            if i != j {
                let d = a[j].powf(1.0 / p) * fluxes[j] - a[i].powf(1.0 / p) * fluxes[i];
                sum += d.norm_sqr() / (a[i] * a[j]).powf(2.0 / p);
            }
        }
    }
    Some(sign * 0.5 * a[first].powf(2.0 / p) * sum)
}

/// Largest `|| alpha_i^{1/p} psi_i - alpha_j^{1/p} psi_j ||` over pairs within a group.
pub fn group_deviation(graph: &StarGraph, field: &GraphField) -> f64 {
    let h = field.grid().spacing();
    let n = graph.n_edges();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            if graph.is_incoming(i) != graph.is_incoming(j) {
                continue;
            }
            let (fi, fj) = (1.0 / graph.vertex_factor(i), 1.0 / graph.vertex_factor(j));
            let d = trapezoid(
                h,
                field
                    .edge(i)
                    .iter()
                    .zip(field.edge(j))
                    .map(|(a, b)| (fi * a - fj * b).norm_sqr()),
            );
            worst = worst.max(d.sqrt());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub tau: f64,
    pub t_end: f64,
    /// Series rows are kept every `record_every` steps.
    pub record_every: usize,
    /// Snapshots every `k` steps (plus the initial one).
    pub snapshot_every: Option<usize>,
    /// Signs for the momentum; the canonical pattern by default.
    pub pattern: Option<SignPattern>,
    pub tol: f64,
    pub max_iterations: usize,
}

impl EvolveOptions {
    pub fn new(tau: f64, t_end: f64) -> Self {
        EvolveOptions {
            tau,
            t_end,
            record_every: 1,
            snapshot_every: None,
            pattern: None,
            tol: 1e-14,
            max_iterations: 60,
        }
    }
}

/// Functionals at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    /// Lumped mass.
    pub mass: f64,
    /// Lumped energy (the scheme invariant).
    pub energy: f64,
    /// Momentum from centered differences.
    pub momentum: f64,
    /// [`group_deviation`].
    pub deviation: f64,
    /// Mean of the balance right-hand side over the adjacent half steps.
    pub rhs_dpdt: f64,
}

/// Momentum balance across one step, evaluated at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceRow {
    pub t: f64,
    /// `(P(t + tau) - P(t)) / tau`.
    pub dpdt: f64,
    pub rhs: f64,
    pub rhs_pairwise: Option<f64>,
    /// `|sum_j alpha_j^{-1/p} psi_j'(0)|` of the recovered fluxes.
    pub kirchhoff: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: f64,
    pub pattern: SignPattern,
    pub series: Vec<SeriesRow>,
    /// One row per step.
    pub balance: Vec<BalanceRow>,
    pub snapshots: Vec<(f64, GraphField)>,
    pub final_field: GraphField,
    pub max_iterations: usize,
    pub fallback_steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.t).collect()
    }

    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.series.iter().map(|r| r.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.series.iter().map(|r| r.energy))
    }

    /// `t,Q,E,P,deviation,rhs_dPdt` with `# key=value` header lines.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        header: &[(String, String)],
    ) -> std::io::Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "t,Q,E,P,deviation,rhs_dPdt")?;
        for r in &self.series {
            writeln!(
                w,
                "{:.6},{:.16e},{:.16e},{:.16e},{:.6e},{:.16e}",
                r.t, r.mass, r.energy, r.momentum, r.deviation, r.rhs_dpdt
            )?;
        }
        Ok(())
    }
}

/// `max_t |f(t) - f(0)| / |f(0)|` (absolute when `f(0) = 0`).
fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else {
        return 0.0;
    };
    let scale = if first == 0.0 { 1.0 } else { first.abs() };
    values.fold(0.0f64, |m, v| m.max((v - first).abs() / scale))
}

/// Evolves `initial` to `t_end` with step `tau`.
pub fn evolve(
    graph: &StarGraph,
    initial: &GraphField,
    tau: f64,
    t_end: f64,
) -> Result<Trajectory, DynamicsError> {
    evolve_with(graph, initial, &EvolveOptions::new(tau, t_end))
}

fn check_initial(graph: &StarGraph, initial: &GraphField) -> Result<(), DynamicsError> {
    if initial.n_edges() != graph.n_edges() {
        return Err(DynamicsError::GridMismatch(format!(
            "{} edges for a graph with {}",
            initial.n_edges(),
            graph.n_edges()
        )));
    }
    let res = crate::graph::vertex_residuals(graph, initial).continuity;
    let size = initial
        .edges()
        .iter()
        .fold(1.0f64, |m, e| m.max(e[0].norm()));
    if !(res <= 1e-8 * size) {
        return Err(DynamicsError::ContinuityViolatedAtInput(res));
    }
    Ok(())
}

pub fn evolve_with(
    graph: &StarGraph,
    initial: &GraphField,
    opts: &EvolveOptions,
) -> Result<Trajectory, DynamicsError> {
    if !(opts.tau > 0.0 && opts.t_end > 0.0 && opts.t_end.is_finite()) {
        return Err(DynamicsError::InvalidParameter(format!(
            "tau = {}, t_end = {}",
            opts.tau, opts.t_end
        )));
    }
    check_initial(graph, initial)?;
    let pattern = opts
        .pattern
        .clone()
        .unwrap_or_else(|| graph.canonical_pattern());
    if pattern.len() != graph.n_edges() {
        return Err(DynamicsError::InvalidParameter(format!(
            "pattern of length {} for {} edges",
            pattern.len(),
            graph.n_edges()
        )));
    }
    let mut stepper = Stepper::new(graph, *initial.grid(), opts.tau)?;
    stepper.tol = opts.tol;
    stepper.max_iterations = opts.max_iterations;
    let y0 = stepper.dofs().to_dofs(initial.edges());
    stepper.set_state(y0, 0.0);

    let steps = (opts.t_end / opts.tau).round().max(1.0) as usize;
    let every = opts.record_every.max(1);
    let row = |s: &Stepper, momentum: f64| SeriesRow {
        t: s.time(),
        mass: s.mass(),
        energy: s.energy(),
        momentum,
        deviation: group_deviation(graph, &s.field()),
        rhs_dpdt: f64::NAN,
    };
    let mut series = vec![row(&stepper, stepper.momentum(&pattern))];
    let mut snapshots = Vec::new();
    if opts.snapshot_every.is_some() {
        snapshots.push((0.0, stepper.field()));
    }
    let mut balance = Vec::with_capacity(steps);
    let mut p_prev = series[0].momentum;
    let mut max_iterations = 0;
    let mut fallback_steps = 0;
    for n in 1..=steps {
        let info = stepper.step()?;
        max_iterations = max_iterations.max(info.iterations);
        fallback_steps += usize::from(info.fallback);
        // the step counter is the time base: t_n = n tau exactly
        stepper.t = n as f64 * opts.tau;
        let p_now = stepper.momentum(&pattern);
        let fluxes = stepper.midpoint_fluxes().expect("a step was taken");
        let kirchhoff: Complex64 = fluxes
            .iter()
            .zip(stepper.dofs().factors())
            .map(|(f, c)| c * f)
            .sum();
        balance.push(BalanceRow {
            t: (n as f64 - 0.5) * opts.tau,
            dpdt: (p_now - p_prev) / opts.tau,
            rhs: balance_rhs(&pattern, &fluxes),
            rhs_pairwise: balance_rhs_pairwise(graph, &pattern, &fluxes),
            kirchhoff: kirchhoff.norm(),
        });
        p_prev = p_now;
        if n % every == 0 || n == steps {
            series.push(row(&stepper, p_now));
        }
        if let Some(k) = opts.snapshot_every {
            if k > 0 && n % k == 0 {
                snapshots.push((stepper.time(), stepper.field()));
            }
        }
    }
    // series rows sit on time levels; average the neighbouring half steps
    for r in series.iter_mut() {
        let n = (r.t / opts.tau).round() as usize;
        let before = n.checked_sub(1).and_then(|k| balance.get(k)).map(|b| b.rhs);
        let after = balance.get(n).map(|b| b.rhs);
        r.rhs_dpdt = match (before, after) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => f64::NAN,
        };
    }
    Ok(Trajectory {
        tau: opts.tau,
        pattern,
        series,
        balance,
        snapshots,
        final_field: stepper.field(),
        max_iterations,
        fallback_steps,
    })
}

/// The group-deviation time series of a trajectory.
pub fn reduction_deviation(traj: &Trajectory) -> Vec<f64> {
    traj.series.iter().map(|r| r.deviation).collect()
}

/// Momentum-balance comparison over a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumBalance {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub rhs_pairwise: Option<Vec<f64>>,
    pub max_mismatch: f64,
    /// Smallest value of `(-1)^{m_1+1} rhs` (the sign-definite combination);
    /// `None` unless there is one incoming edge.
    pub min_signed_rhs: Option<f64>,
}

/// Compares `dP/dt` with the vertex-flux formula for `pattern`.
pub fn momentum_balance(
    graph: &StarGraph,
    traj: &Trajectory,
    pattern: &SignPattern,
) -> MomentumBalance {
    if pattern == &traj.pattern {
        let lhs: Vec<f64> = traj.balance.iter().map(|b| b.dpdt).collect();
        let rhs: Vec<f64> = traj.balance.iter().map(|b| b.rhs).collect();
        let pair: Option<Vec<f64>> = traj.balance.iter().map(|b| b.rhs_pairwise).collect();
        let max_mismatch = lhs
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let min_signed_rhs = (graph.n_incoming() == 1).then(|| {
            let first = (0..graph.n_edges())
                .find(|&j| graph.is_incoming(j))
                .unwrap_or(0);
            let sign = -pattern.sign(first);
            rhs.iter().fold(f64::INFINITY, |m, r| m.min(sign * r))
        });
        MomentumBalance {
            lhs,
            rhs,
            rhs_pairwise: pair,
            max_mismatch,
            min_signed_rhs,
        }
    } else {
        // the complementary pattern flips every sign
        let flipped = traj.pattern.complement();
        assert_eq!(
            &flipped, pattern,
            "balance rows are stored for the trajectory's pattern or its complement"
        );
        let mut b = momentum_balance(graph, traj, &traj.pattern);
        b.lhs.iter_mut().for_each(|v| *v = -*v);
        b.rhs.iter_mut().for_each(|v| *v = -*v);
        if let Some(p) = b.rhs_pairwise.as_mut() {
            p.iter_mut().for_each(|v| *v = -*v);
        }
        b
    }
}

/// Stationary state of the discrete equations near a continuous one.
#[derive(Debug, Clone)]
pub struct DiscreteState {
    /// Real scaled unknowns.
    pub y: Vec<f64>,
    pub omega: f64,
    /// Final max-norm residual of `A y + omega y - N(y)`.
    pub residual: f64,
    /// Multiplier of the translation constraint (zero for an exact discrete family).
    pub multiplier: f64,
    pub iterations: usize,
}

fn stationary_residual_dofs(stepper: &Stepper, y: &[f64], omega: f64) -> Vec<f64> {
    let m = stepper.dofs.laplacian();
    let mut r = vec![0.0; y.len()];
    m.matvec(y, &mut r);
    let p = stepper.power;
    for k in 0..y.len() {
        let s = y[k] * y[k] / stepper.mass[k];
        r[k] += omega * y[k] - (p + 1.0) * stepper.coef[k] * s.powf(p) * y[k];
    }
    r
}

/// Newton's method on the discrete stationary equations, bordered by the
/// constraint that the correction is orthogonal to the translation mode.
pub fn discrete_stationary(
    graph: &StarGraph,
    state: &ShiftedState,
) -> Result<DiscreteState, DynamicsError> {
    let grid = *state.grid();
    let stepper = Stepper::new(graph, grid, 1.0)?;
    let dofs = stepper.dofs.clone();
    let mut y = dofs.to_dofs(&state.real_edges());
    let t = dofs.to_dofs(&state.translation_mode());
    let omega = state.omega();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut residual = f64::INFINITY;
    let mut multiplier = 0.0;
    for it in 0..30 {
        let r = stationary_residual_dofs(&stepper, &y, omega);
        residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residual <= 1e-11 * scale.max(1.0) {
            return Ok(DiscreteState {
                y,
                omega,
                residual,
                multiplier,
                iterations: it,
            });
        }
        let jac =
            assemble_with_profile(graph, grid, &dofs.to_edges(&y), omega, OperatorKind::Lplus)?;
        let f = jac
            .matrix()
            .factorize()
            .map_err(|e| DynamicsError::Factorization(e.to_string()))?;
        let mut jr = vec![0.0; y.len()];
        let mut jt = vec![0.0; y.len()];
        f.solve(&r, &mut jr);
        f.solve(&t, &mut jt);
        // delta = -J^{-1}(r + sigma t) with <t, delta> = 0
        let sigma = -dot(&t, &jr) / dot(&t, &jt);
        multiplier = sigma;
        for k in 0..y.len() {
            y[k] -= jr[k] + sigma * jt[k];
        }
    }
    Err(DynamicsError::NewtonFailed(residual))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

/// How the growth run is perturbed.
#[derive(Debug, Clone)]
pub enum Perturbation {
    /// Seeded smooth random bumps on every edge, complex coefficients.
    Random { seed: u64 },
    /// Explicit edge samples.
    Custom(Vec<Vec<Complex64>>),
}

#[derive(Debug, Clone)]
pub struct GrowthOptions {
    pub perturbation: Perturbation,
    /// Perturbation norm relative to the state norm.
    pub amplitude: f64,
    pub tau: f64,
    pub t_max: f64,
    /// Deviation window used for the fit; the lower end is raised to `10 d(0)`
    /// when the perturbation starts above it.
    pub window: (f64, f64),
    pub min_r_squared: f64,
}

impl GrowthOptions {
    pub fn new(seed: u64, t_max: f64) -> Self {
        GrowthOptions {
            perturbation: Perturbation::Random { seed },
            amplitude: 1e-6,
            tau: 2e-3,
            t_max,
            window: (1e-5, 1e-2),
            min_r_squared: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub r_squared: f64,
    /// Fit interval.
    pub t_start: f64,
    pub t_stop: f64,
    pub points: usize,
    pub max_deviation: f64,
    /// `(t, d(t))` sampled every step.
    pub samples: Vec<(f64, f64)>,
}

fn random_perturbation(dofs: &DofMap, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *dofs.grid();
    (0..dofs.n_edges())
        .map(|_| {
            let bumps: Vec<(Complex64, f64, f64)> = (0..4)
                .map(|_| {
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    (c, rng.gen_range(0.0..4.0), rng.gen_range(0.7..1.5))
                })
                .collect();
            grid.points()
                .map(|x| {
                    bumps
                        .iter()
                        .map(|(c, x0, w)| c / ((x - x0) / w).cosh())
                        .sum::<Complex64>()
                        * (1.0 - x / grid.length())
                })
                .collect()
        })
        .collect()
}

/// Removes the components along `directions` (orthonormalized here) in the
/// real inner product `Re <u, v>`.
fn project_off(v: &mut [Complex64], directions: &[Vec<Complex64>]) {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for d in directions {
        let mut q = d.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = cdot(b, &q);
                q.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = cdot(&q, &q).sqrt();
        if n > 0.0 {
            q.iter_mut().for_each(|x| *x /= n);
            basis.push(q);
        }
    }
    for _ in 0..2 {
        for b in &basis {
            let c = cdot(b, v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Measures exponential growth of `d(t) = || |Psi(t)| - |Phi| ||` from a
/// perturbed discrete stationary state.
pub fn growth_rate(
    graph: &StarGraph,
    state: &ShiftedState,
    perturbation_seed: u64,
    t_window: f64,
) -> Result<GrowthFit, DynamicsError> {
    growth_rate_with(
        graph,
        state,
        &GrowthOptions::new(perturbation_seed, t_window),
    )
}

pub fn growth_rate_with(
    graph: &StarGraph,
    state: &ShiftedState,
    opts: &GrowthOptions,
) -> Result<GrowthFit, DynamicsError> {
    let base = discrete_stationary(graph, state)?;
    let mut stepper = Stepper::new(graph, *state.grid(), opts.tau)?;
    let dofs = stepper.dofs().clone();
    let phi: Vec<Complex64> = base.y.iter().map(|&v| v.into()).collect();
    let edges = match &opts.perturbation {
        Perturbation::Random { seed } => random_perturbation(&dofs, *seed),
        Perturbation::Custom(e) => e.clone(),
    };
    let mut eta = dofs.to_dofs(&edges);
    // neutral directions: phase, translation, and frequency scaling
    let phase: Vec<Complex64> = phi.iter().map(|v| I * v).collect();
    let translation: Vec<Complex64> = dofs
        .to_dofs(&state.translation_mode())
        .into_iter()
        .map(Complex64::from)
        .collect();
    let eps = 1e-4 * state.omega();
    let up = shifted_state_with_omega(
        graph,
        *state.grid(),
        state.shift(),
        state.pattern().clone(),
        state.omega() + eps,
    )?;
    let down = shifted_state_with_omega(
        graph,
        *state.grid(),
        state.shift(),
        state.pattern().clone(),
        state.omega() - eps,
    )?;
    let (yu, yd) = (
        dofs.to_dofs(&up.real_edges()),
        dofs.to_dofs(&down.real_edges()),
    );
    let scaling: Vec<Complex64> = yu
        .iter()
        .zip(&yd)
        .map(|(a, b)| ((a - b) / (2.0 * eps)).into())
        .collect();
    project_off(&mut eta, &[phase, translation, scaling]);
    let size = cdot(&eta, &eta).sqrt();
    if size == 0.0 {
        return Err(DynamicsError::InvalidParameter(
            "perturbation vanishes after projection".into(),
        ));
    }
    let target = opts.amplitude * cdot(&phi, &phi).sqrt();
    let y0: Vec<Complex64> = phi
        .iter()
        .zip(&eta)
        .map(|(p, e)| p + e * (target / size))
        .collect();
    stepper.set_state(y0, 0.0);

    let modulus: Vec<f64> = base.y.iter().map(|v| v.abs()).collect();
    let deviation = |y: &[Complex64]| -> f64 {
        y.iter()
            .zip(&modulus)
            .map(|(z, m)| (z.norm() - m).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut samples = vec![(0.0, deviation(stepper.state()))];
    let steps = (opts.t_max / opts.tau).ceil() as usize;
    for n in 1..=steps {
        stepper.step()?;
        let d = deviation(stepper.state());
        samples.push((n as f64 * opts.tau, d));
        if d > 2.0 * opts.window.1 {
            break;
        }
    }
    let max_deviation = samples.iter().fold(0.0f64, |m, s| m.max(s.1));
    let t_end = samples.last().map_or(0.0, |s| s.0);
    // fit from the first entry into the window to the first exit above it; the
    // entry level sits a decade above d(0) so the initial transient is skipped
    let floor = opts.window.0.max(10.0 * samples[0].1);
    let start = samples.iter().position(|s| s.1 > floor);
    let stop = samples.iter().position(|s| s.1 >= opts.window.1);
    let fit = match (start, stop) {
        (Some(a), Some(b)) if b > a + 2 => linear_fit(
            &samples[a..b]
                .iter()
                .map(|&(t, d)| (t, d.ln()))
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    match fit {
        Some((rate, r2)) if rate > 0.0 && r2 >= opts.min_r_squared => {
            let (a, b) = (start.unwrap_or(0), stop.unwrap_or(0));
            Ok(GrowthFit {
                rate,
                r_squared: r2,
                t_start: samples[a].0,
                t_stop: samples[b - 1].0,
                points: b - a,
                max_deviation,
                samples,
            })
        }
        _ => Err(DynamicsError::NoGrowthDetected {
            max_deviation,
            t_end,
        }),
    }
}

/// Least-squares slope and `r^2` of `y` against `t`.
fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if n < 3.0 {
        return None;
    }
    let (st, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in points {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    if stt == 0.0 || syy == 0.0 {
        return None;
    }
    let slope = sty / stt;
    Some((slope, sty * sty / (stt * syy)))
}

#[derive(Debug, Clone, Copy)]
pub struct TransitOptions {
    pub tau: f64,
    pub h: f64,
    /// Edge length; by default `|x_start| + 20`.
    pub length: Option<f64>,
}

impl Default for TransitOptions {
    fn default() -> Self {
        TransitOptions {
            tau: 1e-3,
            h: 0.01,
            length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitReport {
    pub profile_error: f64,
    pub transmitted_mass_fraction: f64,
    pub t_end: f64,
    pub max_group_deviation: f64,
    pub mass_drift: f64,
}

/// Line soliton of frequency 1 moving with speed `c`, centered at `x0` at `t = 0`.
pub fn traveling_soliton(p: f64, c: f64, x0: f64, x: f64, t: f64) -> Complex64 {
    let phase = 0.5 * c * x + (1.0 - 0.25 * c * c) * t;
    soliton_profile(p, x - x0 - c * t) * Complex64::from_polar(1.0, phase)
}

/// The line function `U` on the graph: `alpha^{-1/p} U(-x)` on incoming
/// edges and `alpha^{-1/p} U(x)` on outgoing ones.
pub fn line_to_graph(
    graph: &StarGraph,
    grid: EdgeGrid,
    u: impl Fn(f64) -> Complex64,
) -> Result<GraphField, GraphError> {
    GraphField::from_fn(grid, graph.n_edges(), |j, x| {
        let s = if graph.is_incoming(j) { -x } else { x };
        graph.vertex_factor(j) * u(s)
    })
}

/// Sends a soliton from `x_start < 0` on the incoming group through the
/// vertex and compares with the exact line solution at `t = -2 x_start / c`.
pub fn transit_test(
    graph: &StarGraph,
    c: f64,
    x_start: f64,
) -> Result<TransitReport, DynamicsError> {
    transit_test_with(graph, c, x_start, &TransitOptions::default())
}

pub fn transit_test_with(
    graph: &StarGraph,
    c: f64,
    x_start: f64,
    opts: &TransitOptions,
) -> Result<TransitReport, DynamicsError> {
    if !(c > 0.0 && x_start < 0.0) {
        return Err(DynamicsError::InvalidParameter(format!(
            "need c > 0 and x_start < 0, got c = {c}, x_start = {x_start}"
        )));
    }
    let p = graph.power();
    let length = opts.length.unwrap_or(x_start.abs() + 20.0);
    let grid = EdgeGrid::with_spacing(length, opts.h)?;
    let initial = line_to_graph(graph, grid, |x| traveling_soliton(p, c, x_start, x, 0.0))?;
    let t_end = -2.0 * x_start / c;
    let steps = (t_end / opts.tau).round();
    let mut eo = EvolveOptions::new(t_end / steps, t_end);
    eo.record_every = 50;
    let traj = evolve_with(graph, &initial, &eo)?;
    let exact = line_to_graph(graph, grid, |x| traveling_soliton(p, c, x_start, x, t_end))?;
    let h = grid.spacing();
    let (mut err, mut norm, mut out_mass, mut total) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..graph.n_edges() {
        let (num, ex) = (traj.final_field.edge(j), exact.edge(j));
        err += trapezoid(h, num.iter().zip(ex).map(|(a, b)| (a - b).norm_sqr()));
        norm += trapezoid(h, ex.iter().map(|z| z.norm_sqr()));
        let m = trapezoid(h, num.iter().map(|z| z.norm_sqr()));
        total += m;
        if !graph.is_incoming(j) {
            out_mass += m;
        }
    }
    Ok(TransitReport {
        profile_error: (err / norm).sqrt(),
        transmitted_mass_fraction: out_mass / total,
        t_end,
        max_group_deviation: reduction_deviation(&traj).into_iter().fold(0.0, f64::max),
        mass_drift: traj.mass_drift(),
    })
}

/// Composite Simpson rule on `[a, b]` with `n` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `(||phi||^2, ||phi'||^2, ||phi||_{2p+2}^{2p+2})` of the unit line soliton.
pub fn line_soliton_norms(p: f64) -> (f64, f64, f64) {
    // the profile decays like exp(-|x|) for every p
    let x_max = 45.0 + std::f64::consts::LN_2 / p;
    let n = 90_000;
    let mass = 2.0 * simpson(|x| soliton_profile(p, x).powi(2), 0.0, x_max, n);
    let kinetic = 2.0 * simpson(|x| soliton_profile_derivative(p, x).powi(2), 0.0, x_max, n);
    let potential = 2.0 * simpson(|x| soliton_profile(p, x).powf(2.0 * p + 2.0), 0.0, x_max, n);
    (mass, kinetic, potential)
}

/// Energy of the line soliton `alpha^{-1/p} Phi_omega` whose mass is `mu`.
pub fn free_wave_energy(alpha: f64, p: f64, mu: f64) -> Result<f64, DynamicsError> {
    if !(p > 0.0 && p < 2.0) {
        return Err(DynamicsError::SupercriticalP(p));
    }
    if !(alpha > 0.0 && mu > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!(
            "alpha = {alpha}, mu = {mu}"
        )));
    }
    let (mass, kinetic, potential) = line_soliton_norms(p);
    // mass of alpha^{-1/p} w^{1/(2p)} phi(sqrt(w) x) is alpha^{-2/p} w^{1/p - 1/2} ||phi||^2
    let omega = (mu * alpha.powf(2.0 / p) / mass).powf(2.0 * p / (2.0 - p));
    Ok(alpha.powf(-2.0 / p) * omega.powf(1.0 / p + 0.5) * (kinetic - potential))
}

/// Mass and energy of a shifted state from its closed form (Simpson, fine step).
pub fn exact_mass_energy(state: &ShiftedState) -> (f64, f64) {
    let g = state.graph();
    let p = g.power();
    let length = state.grid().length();
    let n = (length / 2e-3).ceil() as usize;
    let (mut q, mut e) = (0.0, 0.0);
    for j in 0..g.n_edges() {
        let a2 = g.alphas()[j].powi(2);
        q += simpson(|x| state.exact(j, x).powi(2), 0.0, length, n);
        e += simpson(
            |x| {
                state.exact_derivative(j, x).powi(2)
                    - a2 * state.exact(j, x).abs().powf(2.0 * p + 2.0)
            },
            0.0,
            length,
            n,
        );
    }
    (q, e)
}
