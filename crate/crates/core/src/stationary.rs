//! Half-soliton and shifted stationary states.
//!
//! On edge `j` the state is `alpha_j^{-1/p} omega^{1/(2p)} phi(sqrt(omega) (x + s_j a))`
//! with `phi(x) = sech^{1/p}(p x)` and `s_j = +1` where `m_j = 1`, `-1` where
//! `m_j = 0`. With the canonical pattern (`m_j = 1` on incoming edges) incoming
//! edges carry `phi(x + a)` and outgoing edges carry `phi(x - a)`.

use crate::graph::{vertex_residuals, EdgeGrid, GraphError, GraphField, SignPattern, StarGraph};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StationaryError {
    #[error("pattern {bits:?} is not admissible: relative imbalance {imbalance:e}")]
    InadmissiblePattern { bits: Vec<u8>, imbalance: f64 },
    #[error("pattern has {got} entries, graph has {want} edges")]
    PatternLength { got: usize, want: usize },
    #[error("frequency omega = {0} must be positive")]
    NonpositiveOmega(f64),
    #[error("family count needs an even number of edges, got {0}")]
    OddN(usize),
    #[error("pattern enumeration is limited to 20 edges, got {0}")]
    TooManyEdges(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// `sech^{1/p}(p x)`.
pub fn soliton_profile(power: f64, x: f64) -> f64 {
    (1.0 / (power * x).cosh()).powf(1.0 / power)
}

/// Derivative of [`soliton_profile`]: `-sech^{1/p}(p x) tanh(p x)`.
pub fn soliton_profile_derivative(power: f64, x: f64) -> f64 {
    -soliton_profile(power, x) * (power * x).tanh()
}

/// A stationary state of the graph NLS together with its construction data.
#[derive(Debug, Clone)]
pub struct ShiftedState {
    graph: StarGraph,
    shift: f64,
    pattern: SignPattern,
    omega: f64,
    field: GraphField,
}

/// Metadata written next to a state's CSV samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSidecar {
    pub a: f64,
    pub omega: f64,
    pub pattern: SignPattern,
}

impl ShiftedState {
    fn build(
        graph: &StarGraph,
        grid: EdgeGrid,
        shift: f64,
        pattern: SignPattern,
        omega: f64,
    ) -> Result<Self, StationaryError> {
        if pattern.len() != graph.n_edges() {
            return Err(StationaryError::PatternLength {
                got: pattern.len(),
                want: graph.n_edges(),
            });
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(StationaryError::NonpositiveOmega(omega));
        }
        let mut state = ShiftedState {
            graph: graph.clone(),
            shift,
            pattern,
            omega,
            field: GraphField::zeros(grid, graph.n_edges()),
        };
        state.field = GraphField::from_real(grid, graph.n_edges(), |j, x| state.exact(j, x))?;
        Ok(state)
    }

    pub fn graph(&self) -> &StarGraph {
        &self.graph
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn pattern(&self) -> &SignPattern {
        &self.pattern
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn field(&self) -> &GraphField {
        &self.field
    }

    pub fn grid(&self) -> &EdgeGrid {
        self.field.grid()
    }

    /// `+1` where the profile is `phi(x + a)`, `-1` where it is `phi(x - a)`.
    pub fn direction(&self, j: usize) -> f64 {
        if self.pattern.is_set(j) {
            1.0
        } else {
            -1.0
        }
    }

    fn amplitude(&self, j: usize) -> f64 {
        self.graph.vertex_factor(j) * self.omega.powf(0.5 / self.graph.power())
    }

    /// Analytic value on edge `j` at `x`.
    pub fn exact(&self, j: usize, x: f64) -> f64 {
        let z = self.omega.sqrt() * (x + self.direction(j) * self.shift);
        self.amplitude(j) * soliton_profile(self.graph.power(), z)
    }

    /// Analytic `d/dx` on edge `j`.
    pub fn exact_derivative(&self, j: usize, x: f64) -> f64 {
        let s = self.omega.sqrt();
        let z = s * (x + self.direction(j) * self.shift);
        self.amplitude(j) * s * soliton_profile_derivative(self.graph.power(), z)
    }

    /// Derivative of the state with respect to the shift `a`, sampled on the
    /// grid. It spans the kernel of `L_+` for `a != 0`.
    pub fn translation_mode(&self) -> Vec<Vec<f64>> {
        (0..self.graph.n_edges())
            .map(|j| {
                self.grid()
                    .points()
                    .map(|x| self.direction(j) * self.exact_derivative(j, x))
                    .collect()
            })
            .collect()
    }

    /// Real samples per edge.
    pub fn real_edges(&self) -> Vec<Vec<f64>> {
        self.field
            .edges()
            .iter()
            .map(|v| v.iter().map(|z| z.re).collect())
            .collect()
    }

    pub fn sidecar(&self) -> StateSidecar {
        StateSidecar {
            a: self.shift,
            omega: self.omega,
            pattern: self.pattern.clone(),
        }
    }

    /// Rebuilds a state from its sidecar on a given graph and grid.
    pub fn from_sidecar(
        graph: &StarGraph,
        grid: EdgeGrid,
        s: &StateSidecar,
    ) -> Result<Self, StationaryError> {
        shifted_state_with_omega(graph, grid, s.a, s.pattern.clone(), s.omega)
    }
}

/// The `a = 0` member: `alpha_j^{-1/p} phi(x)` on every edge.
pub fn half_soliton(graph: &StarGraph, grid: EdgeGrid) -> ShiftedState {
    ShiftedState::build(graph, grid, 0.0, graph.canonical_pattern(), 1.0)
        .expect("canonical pattern and omega = 1 are always valid")
}

/// Shifted state at frequency 1.
pub fn shifted_state(
    graph: &StarGraph,
    grid: EdgeGrid,
    a: f64,
    pattern: SignPattern,
) -> Result<ShiftedState, StationaryError> {
    shifted_state_with_omega(graph, grid, a, pattern, 1.0)
}

pub fn shifted_state_with_omega(
    graph: &StarGraph,
    grid: EdgeGrid,
    a: f64,
    pattern: SignPattern,
    omega: f64,
) -> Result<ShiftedState, StationaryError> {
    if pattern.len() != graph.n_edges() {
        return Err(StationaryError::PatternLength {
            got: pattern.len(),
            want: graph.n_edges(),
        });
    }
    if a != 0.0 && !pattern.is_admissible(graph) {
        return Err(StationaryError::InadmissiblePattern {
            imbalance: pattern.imbalance(graph),
            bits: pattern.bits().to_vec(),
        });
    }
    ShiftedState::build(graph, grid, a, pattern, omega)
}

/// The same state at frequency `omega`.
pub fn scale_state(state: &ShiftedState, omega: f64) -> Result<ShiftedState, StationaryError> {
    ShiftedState::build(
        &state.graph,
        *state.grid(),
        state.shift,
        state.pattern.clone(),
        omega,
    )
}

/// Interior residual of `-u'' + omega u - (p+1) alpha^2 |u|^{2p} u` (three-point
/// Laplacian), plus the vertex continuity and Kirchhoff residuals.
pub fn field_residual(graph: &StarGraph, field: &GraphField, omega: f64) -> f64 {
    let h = field.grid().spacing();
    let p = graph.power();
    let mut worst = 0.0f64;
    for (j, v) in field.edges().iter().enumerate() {
        let a2 = graph.alphas()[j].powi(2);
        for i in 1..v.len() - 1 {
            let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            let r: Complex64 =
                -lap + omega * v[i] - (p + 1.0) * a2 * v[i].norm_sqr().powf(p) * v[i];
            worst = worst.max(r.norm());
        }
    }
    let vr = vertex_residuals(graph, field);
    worst + vr.continuity + vr.kirchhoff
}

pub fn stationary_residual(state: &ShiftedState) -> f64 {
    field_residual(&state.graph, &state.field, state.omega)
}

/// `N! / (2 ((N/2)!)^2)`: the number of shift families for unit weights.
pub fn count_families(n_edges: usize) -> Result<u128, StationaryError> {
    if n_edges < 2 || n_edges % 2 == 1 {
        return Err(StationaryError::OddN(n_edges));
    }
    let k = (n_edges / 2) as u128;
    let n = n_edges as u128;
    // binomial(n, k) built incrementally stays integral at every step
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    Ok(c / 2)
}

/// All admissible sign patterns, found by brute force. Patterns are listed in
/// lexicographic order of `(m_1, ..., m_N)`.
pub fn enumerate_patterns(graph: &StarGraph) -> Result<Vec<SignPattern>, StationaryError> {
    let n = graph.n_edges();
    if n > 20 {
        return Err(StationaryError::TooManyEdges(n));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let bits: Vec<u8> = (0..n).map(|j| ((mask >> (n - 1 - j)) & 1) as u8).collect();
        let pat = SignPattern::new(bits)?;
        if pat.is_admissible(graph) {
            out.push(pat);
        }
    }
    Ok(out)
}
