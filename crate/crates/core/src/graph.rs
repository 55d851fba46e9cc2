//! Star graphs with weighted Kirchhoff vertex conditions, fields sampled on a
//! truncated uniform grid per edge, and the conserved functionals.
//!
//! Every edge is parameterized by `x in [0, L]` with `x = 0` at the vertex. The
//! vertex conditions are weighted continuity of `alpha_j^{1/p} psi_j(0)` and
//! `sum_j alpha_j^{-1/p} psi_j'(0) = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Relative tolerance on the weight constraint.
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid topology: need 0 < K < N, got N = {n_edges}, K = {n_incoming}")]
    InvalidTopology { n_edges: usize, n_incoming: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight alpha_{index} = {value} is not positive")]
    NonpositiveWeight { index: usize, value: f64 },
    #[error("nonlinearity power p = {0} must be positive and finite")]
    InvalidPower(f64),
    #[error("weight constraint violated: relative residual {residual:e} (incoming {incoming}, outgoing {outgoing})")]
    ConstraintViolated {
        residual: f64,
        incoming: f64,
        outgoing: f64,
    },
    #[error("invalid grid: length {length}, points {points}")]
    InvalidGrid { length: f64, points: usize },
    #[error("field does not match the grid: {0}")]
    GridMismatch(String),
    #[error("field has a non-finite entry on edge {edge} at index {index}")]
    NonFinite { edge: usize, index: usize },
    #[error("sign pattern entries must be 0 or 1, got {0:?}")]
    InvalidPattern(Vec<u8>),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `N` half-lines joined at one vertex; edges `0..K` are incoming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpec", into = "GraphSpec")]
pub struct StarGraph {
    n_edges: usize,
    n_incoming: usize,
    alphas: Vec<f64>,
    power: f64,
}

/// JSON form of a graph: `{"edges": N, "incoming": K, "alphas": [...], "p": p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub edges: usize,
    pub incoming: usize,
    pub alphas: Vec<f64>,
    pub p: f64,
}

impl TryFrom<GraphSpec> for StarGraph {
    type Error = GraphError;
    fn try_from(s: GraphSpec) -> Result<Self, GraphError> {
        validate_graph(s.edges, s.incoming, &s.alphas, s.p)
    }
}

impl From<StarGraph> for GraphSpec {
    fn from(g: StarGraph) -> Self {
        GraphSpec {
            edges: g.n_edges,
            incoming: g.n_incoming,
            alphas: g.alphas,
            p: g.power,
        }
    }
}

/// Builds a graph, checking topology, weights and the weight constraint.
pub fn validate_graph(
    n_edges: usize,
    n_incoming: usize,
    alphas: &[f64],
    power: f64,
) -> Result<StarGraph, GraphError> {
    let g = StarGraph::new_unconstrained(n_edges, n_incoming, alphas, power)?;
    let residual = g.constraint_residual();
    if !(residual <= CONSTRAINT_TOL) {
        let (incoming, outgoing) = g.group_weights();
        return Err(GraphError::ConstraintViolated {
            residual,
            incoming,
            outgoing,
        });
    }
    Ok(g)
}

impl StarGraph {
    pub fn new(
        n_edges: usize,
        n_incoming: usize,
        alphas: &[f64],
        power: f64,
    ) -> Result<Self, GraphError> {
        validate_graph(n_edges, n_incoming, alphas, power)
    }

    /// Like [`StarGraph::new`] but skips the weight constraint. Used for control
    /// experiments on graphs without the reduction to the line.
    pub fn new_unconstrained(
        n_edges: usize,
        n_incoming: usize,
        alphas: &[f64],
        power: f64,
    ) -> Result<Self, GraphError> {
        if n_incoming == 0 || n_incoming >= n_edges {
            return Err(GraphError::InvalidTopology {
                n_edges,
                n_incoming,
            });
        }
        if alphas.len() != n_edges {
            return Err(GraphError::WeightCount {
                expected: n_edges,
                got: alphas.len(),
            });
        }
        if let Some((index, &value)) = alphas
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0))
        {
            return Err(GraphError::NonpositiveWeight { index, value });
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(GraphError::InvalidPower(power));
        }
        Ok(StarGraph {
            n_edges,
            n_incoming,
            alphas: alphas.to_vec(),
            power,
        })
    }

    /// `N` edges with unit weights, `N/2` incoming.
    pub fn uniform(n_edges: usize, power: f64) -> Result<Self, GraphError> {
        validate_graph(n_edges, n_edges / 2, &vec![1.0; n_edges], power)
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_incoming(&self) -> usize {
        self.n_incoming
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `alpha_j^{-1/p}`: the factor relating the common vertex value to `psi_j(0)`.
    pub fn vertex_factor(&self, j: usize) -> f64 {
        self.alphas[j].powf(-1.0 / self.power)
    }

    /// `alpha_j^{-2/p}`.
    pub fn edge_weight(&self, j: usize) -> f64 {
        self.alphas[j].powf(-2.0 / self.power)
    }

    /// Sums of `alpha_j^{-2/p}` over incoming and outgoing edges.
    pub fn group_weights(&self) -> (f64, f64) {
        let k = self.n_incoming;
        let inc = (0..k).map(|j| self.edge_weight(j)).sum();
        let out = (k..self.n_edges).map(|j| self.edge_weight(j)).sum();
        (inc, out)
    }

    pub fn constraint_residual(&self) -> f64 {
        let (inc, out) = self.group_weights();
        (inc - out).abs() / inc
    }

    pub fn is_incoming(&self, j: usize) -> bool {
        j < self.n_incoming
    }

    /// `m_j = 1` on incoming edges, 0 on outgoing ones.
    pub fn canonical_pattern(&self) -> SignPattern {
        SignPattern {
            m: (0..self.n_edges)
                .map(|j| u8::from(self.is_incoming(j)))
                .collect(),
        }
    }

    /// Same graph with edges reordered: edge `i` of the result is edge `perm[i]`
    /// of `self`. Permutations that mix the groups are rejected.
    pub fn permuted(&self, perm: &[usize]) -> Option<StarGraph> {
        if perm.len() != self.n_edges {
            return None;
        }
        let mut seen = vec![false; self.n_edges];
        for (i, &p) in perm.iter().enumerate() {
            if p >= self.n_edges || seen[p] || self.is_incoming(i) != self.is_incoming(p) {
                return None;
            }
            seen[p] = true;
        }
        Some(StarGraph {
            alphas: perm.iter().map(|&p| self.alphas[p]).collect(),
            ..self.clone()
        })
    }

    pub fn spec(&self) -> GraphSpec {
        self.clone().into()
    }
}

/// Per-edge bits `m_j` selecting the direction of the shift.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct SignPattern {
    m: Vec<u8>,
}

impl TryFrom<Vec<u8>> for SignPattern {
    type Error = GraphError;
    fn try_from(m: Vec<u8>) -> Result<Self, GraphError> {
        SignPattern::new(m)
    }
}

impl From<SignPattern> for Vec<u8> {
    fn from(s: SignPattern) -> Self {
        s.m
    }
}

impl SignPattern {
    pub fn new(m: Vec<u8>) -> Result<Self, GraphError> {
        if m.iter().any(|&b| b > 1) {
            return Err(GraphError::InvalidPattern(m));
        }
        Ok(SignPattern { m })
    }

    pub fn bits(&self) -> &[u8] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn is_set(&self, j: usize) -> bool {
        self.m[j] == 1
    }

    /// `(-1)^{m_j}`.
    pub fn sign(&self, j: usize) -> f64 {
        if self.is_set(j) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn ones(&self) -> usize {
        self.m.iter().filter(|&&b| b == 1).count()
    }

    pub fn complement(&self) -> SignPattern {
        SignPattern {
            m: self.m.iter().map(|b| 1 - b).collect(),
        }
    }

    /// `sum_j (-1)^{m_j} alpha_j^{-2/p}` relative to `sum_j alpha_j^{-2/p}`.
    pub fn imbalance(&self, graph: &StarGraph) -> f64 {
        let mut signed = 0.0;
        let mut total = 0.0;
        for j in 0..graph.n_edges() {
            let w = graph.edge_weight(j);
            signed += self.sign(j) * w;
            total += w;
        }
        signed.abs() / total
    }

    pub fn is_admissible(&self, graph: &StarGraph) -> bool {
        self.len() == graph.n_edges() && self.imbalance(graph) <= CONSTRAINT_TOL
    }

    pub fn permuted(&self, perm: &[usize]) -> SignPattern {
        SignPattern {
            m: perm.iter().map(|&p| self.m[p]).collect(),
        }
    }
}

/// Uniform grid `x_i = i h`, `i = 0..n_points`, shared by all edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeGrid {
    length: f64,
    n_points: usize,
}

/// JSON form of a grid: `{"length": L, "points": n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub points: usize,
}

impl EdgeGrid {
    pub fn new(length: f64, n_points: usize) -> Result<Self, GraphError> {
        if !(length.is_finite() && length > 0.0) || n_points < 4 {
            return Err(GraphError::InvalidGrid {
                length,
                points: n_points,
            });
        }
        Ok(EdgeGrid { length, n_points })
    }

    /// Grid with spacing exactly `h` and length at least `min_length`.
    pub fn with_spacing(min_length: f64, h: f64) -> Result<Self, GraphError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(GraphError::InvalidGrid {
                length: min_length,
                points: 0,
            });
        }
        let cells = (min_length / h - 1e-9).ceil().max(3.0) as usize;
        EdgeGrid::new(cells as f64 * h, cells + 1)
    }

    /// Shortest truncation keeping `sech^{1/p}(p(x - |a|))` below `1e-12` at the
    /// far end, and never shorter than `max(20, |a| + 20) / min(1, p)`.
    pub fn default_length(power: f64, max_shift: f64) -> f64 {
        let a = max_shift.abs();
        let base = (a + 20.0).max(20.0) / power.min(1.0);
        let decay = a + 1e12f64.ln() + std::f64::consts::LN_2 / power + 0.1;
        base.max(decay)
    }

    /// Default-length grid with spacing `h`.
    pub fn for_states(power: f64, max_shift: f64, h: f64) -> Result<Self, GraphError> {
        EdgeGrid::with_spacing(Self::default_length(power, max_shift), h)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            length: self.length,
            points: self.n_points,
        }
    }
}

impl TryFrom<GridSpec> for EdgeGrid {
    type Error = GraphError;
    fn try_from(s: GridSpec) -> Result<Self, GraphError> {
        EdgeGrid::new(s.length, s.points)
    }
}

/// Complex samples of `(psi_1, ..., psi_N)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphField {
    grid: EdgeGrid,
    values: Vec<Vec<Complex64>>,
}

impl GraphField {
    pub fn new(grid: EdgeGrid, values: Vec<Vec<Complex64>>) -> Result<Self, GraphError> {
        if values.is_empty() {
            return Err(GraphError::GridMismatch("no edges".into()));
        }
        for (edge, v) in values.iter().enumerate() {
            if v.len() != grid.n_points() {
                return Err(GraphError::GridMismatch(format!(
                    "edge {edge} has {} samples, grid has {}",
                    v.len(),
                    grid.n_points()
                )));
            }
            if let Some(index) = v
                .iter()
                .position(|z| !(z.re.is_finite() && z.im.is_finite()))
            {
                return Err(GraphError::NonFinite { edge, index });
            }
        }
        Ok(GraphField { grid, values })
    }

    pub fn zeros(grid: EdgeGrid, n_edges: usize) -> Self {
        GraphField {
            grid,
            values: vec![vec![Complex64::new(0.0, 0.0); grid.n_points()]; n_edges],
        }
    }

    /// Samples `f(edge, x)`.
    pub fn from_fn(
        grid: EdgeGrid,
        n_edges: usize,
        mut f: impl FnMut(usize, f64) -> Complex64,
    ) -> Result<Self, GraphError> {
        let values = (0..n_edges)
            .map(|j| grid.points().map(|x| f(j, x)).collect())
            .collect();
        GraphField::new(grid, values)
    }

    pub fn from_real(
        grid: EdgeGrid,
        n_edges: usize,
        mut f: impl FnMut(usize, f64) -> f64,
    ) -> Result<Self, GraphError> {
        GraphField::from_fn(grid, n_edges, |j, x| Complex64::new(f(j, x), 0.0))
    }

    pub fn grid(&self) -> &EdgeGrid {
        &self.grid
    }

    pub fn n_edges(&self) -> usize {
        self.values.len()
    }

    pub fn edge(&self, j: usize) -> &[Complex64] {
        &self.values[j]
    }

    pub fn edges(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn into_edges(self) -> Vec<Vec<Complex64>> {
        self.values
    }

    /// Pointwise map over all samples.
    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> GraphField {
        GraphField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|&z| f(z)).collect())
                .collect(),
        }
    }

    /// Edge `i` of the result is edge `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> GraphField {
        GraphField {
            grid: self.grid,
            values: perm.iter().map(|&p| self.values[p].clone()).collect(),
        }
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().flatten().all(|z| z.im.abs() <= tol)
    }

    /// Writes `edge,x,re,im` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "edge,x,re,im")?;
        for (j, v) in self.values.iter().enumerate() {
            for (i, z) in v.iter().enumerate() {
                writeln!(w, "{},{},{},{}", j, self.grid.x(i), z.re, z.im)?;
            }
        }
        Ok(())
    }

    /// Reads the format produced by [`GraphField::write_csv`]. Edges must be
    /// listed in order with their samples ascending in `x`.
    pub fn read_csv<R: BufRead>(r: R) -> Result<GraphField, GraphError> {
        let mut values: Vec<Vec<Complex64>> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = n + 1;
            let t = line.trim();
            if t.is_empty() || (n == 0 && t.starts_with("edge")) {
                continue;
            }
            let cols: Vec<&str> = t.split(',').collect();
            if cols.len() != 4 {
                return Err(GraphError::Csv {
                    line: line_no,
                    msg: format!("expected 4 columns, found {}", cols.len()),
                });
            }
            let err = |msg: String| GraphError::Csv { line: line_no, msg };
            let edge: usize = cols[0]
                .trim()
                .parse()
                .map_err(|e| err(format!("edge: {e}")))?;
            let parse = |s: &str, name: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("{name}: {e}")))
            };
            let x = parse(cols[1], "x")?;
            let re = parse(cols[2], "re")?;
            let im = parse(cols[3], "im")?;
            if edge == values.len() {
                values.push(Vec::new());
            } else if edge + 1 != values.len() {
                return Err(err(format!("edge {edge} out of order")));
            }
            if edge == 0 {
                xs.push(x);
            }
            values[edge].push(Complex64::new(re, im));
        }
        if xs.len() < 4 {
            return Err(GraphError::Csv {
                line: 0,
                msg: "need at least 4 samples per edge".into(),
            });
        }
        let grid = EdgeGrid::new(*xs.last().unwrap(), xs.len())?;
        let h = grid.spacing();
        if let Some(i) = xs
            .iter()
            .enumerate()
            .position(|(i, &x)| (x - i as f64 * h).abs() > 1e-9 * (1.0 + x.abs()))
        {
            return Err(GraphError::Csv {
                line: 0,
                msg: format!("grid is not uniform from 0 at sample {i}"),
            });
        }
        GraphField::new(grid, values)
    }
}

/// Composite trapezoid rule on the uniform grid.
pub(crate) fn trapezoid(h: f64, f: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = f.len();
    let mut s = 0.0;
    for (i, v) in f.enumerate() {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        s += w * v;
    }
    s * h
}

/// Second-order derivative samples: one-sided three-point stencils at the ends.
pub(crate) fn derivative(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h));
    for i in 1..n - 1 {
        d.push((v[i + 1] - v[i - 1]) / (2.0 * h));
    }
    d.push((3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h));
    d
}

/// `psi_j'(0)` by the one-sided three-point stencil.
pub fn vertex_derivative(field: &GraphField, j: usize) -> Complex64 {
    let v = field.edge(j);
    let h = field.grid().spacing();
    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
}

/// `sum_j int |psi_j|^2`.
pub fn mass(field: &GraphField) -> f64 {
    let h = field.grid().spacing();
    field
        .edges()
        .iter()
        .map(|v| trapezoid(h, v.iter().map(|z| z.norm_sqr())))
        .sum()
}

/// `sum_j int |psi_j'|^2 - alpha_j^2 |psi_j|^{2p+2}`.
pub fn energy(graph: &StarGraph, field: &GraphField) -> f64 {
    let h = field.grid().spacing();
    let p = graph.power();
    field
        .edges()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let a2 = graph.alphas()[j].powi(2);
            let d = derivative(v, h);
            let kinetic = trapezoid(h, d.iter().map(|z| z.norm_sqr()));
            let potential = trapezoid(h, v.iter().map(|z| z.norm_sqr().powf(p + 1.0)));
            kinetic - a2 * potential
        })
        .sum()
}

/// `sum_j (-1)^{m_j} int Im(psi_j' conj(psi_j))`.
pub fn momentum(field: &GraphField, pattern: &SignPattern) -> f64 {
    let h = field.grid().spacing();
    field
        .edges()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let d = derivative(v, h);
            pattern.sign(j) * trapezoid(h, d.iter().zip(v).map(|(dz, z)| (dz * z.conj()).im))
        })
        .sum()
}

/// Deviation from weighted continuity and the Kirchhoff sum at the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexResiduals {
    /// Largest pairwise difference of `alpha_j^{1/p} psi_j(0)`.
    pub continuity: f64,
    /// `|sum_j alpha_j^{-1/p} psi_j'(0)|`.
    pub kirchhoff: f64,
}

pub fn vertex_residuals(graph: &StarGraph, field: &GraphField) -> VertexResiduals {
    let n = field.n_edges();
    let weighted: Vec<Complex64> = (0..n)
        .map(|j| field.edge(j)[0] / graph.vertex_factor(j))
        .collect();
    let mut continuity = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            continuity = continuity.max((weighted[i] - weighted[j]).norm());
        }
    }
    let flux: Complex64 = (0..n)
        .map(|j| graph.vertex_factor(j) * vertex_derivative(field, j))
        .sum();
    VertexResiduals {
        continuity,
        kirchhoff: flux.norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn validation_examples() {
        assert!(validate_graph(4, 2, &[1.0; 4], 1.0).is_ok());
        let s = 2f64.sqrt();
        let g = validate_graph(3, 1, &[1.0, s, s], 1.0).unwrap();
        assert!(g.constraint_residual() < 1e-15);
        match validate_graph(4, 2, &[1.0, 1.0, 1.0, 2.0], 1.0) {
            Err(GraphError::ConstraintViolated {
                incoming, outgoing, ..
            }) => {
                assert_relative_eq!(incoming, 2.0);
                assert_relative_eq!(outgoing, 1.25);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            validate_graph(3, 0, &[1.0; 3], 1.0),
            Err(GraphError::InvalidTopology { .. })
        ));
        assert!(matches!(
            validate_graph(3, 3, &[1.0; 3], 1.0),
            Err(GraphError::InvalidTopology { .. })
        ));
        assert!(matches!(
            validate_graph(2, 1, &[1.0, -1.0], 1.0),
            Err(GraphError::NonpositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            validate_graph(2, 1, &[1.0, 1.0], 0.0),
            Err(GraphError::InvalidPower(_))
        ));
        assert!(StarGraph::new_unconstrained(3, 1, &[1.0; 3], 1.0).is_ok());
    }

    #[test]
    fn graph_json_round_trip() {
        let g: StarGraph =
            serde_json::from_str(r#"{"edges": 4, "incoming": 2, "alphas": [1,1,1,1], "p": 1}"#)
                .unwrap();
        assert_eq!(g.n_edges(), 4);
        let back: StarGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
        assert!(serde_json::from_str::<StarGraph>(
            r#"{"edges": 4, "incoming": 2, "alphas": [1,1,1,2], "p": 1}"#
        )
        .is_err());
    }

    #[test]
    fn default_length_controls_tails() {
        for p in [0.5, 1.0, 1.5] {
            for a in [0.0, 0.7, 3.0] {
                let l = EdgeGrid::default_length(p, a);
                let tail = sech(p * (l - a)).powf(1.0 / p);
                assert!(tail < 1e-12, "p {p} a {a}: {tail:e}");
            }
        }
        let g = EdgeGrid::with_spacing(25.0, 0.01).unwrap();
        assert_eq!(g.n_points(), 2501);
        assert!((g.spacing() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn half_line_sech_mass_and_energy() {
        let g = StarGraph::new(3, 1, &[1.0; 3], 1.0);
        assert!(g.is_err());
        let g = StarGraph::new_unconstrained(3, 1, &[1.0; 3], 1.0).unwrap();
        let grid = EdgeGrid::for_states(1.0, 0.0, 0.01).unwrap();
        let f = GraphField::from_real(grid, 3, |_, x| sech(x)).unwrap();
        assert!((mass(&f) - 3.0).abs() < 1e-4);
        // int_0^inf sech^2 tanh^2 = 1/3, int_0^inf sech^4 = 2/3
        assert!((energy(&g, &f) - 3.0 * (1.0 / 3.0 - 2.0 / 3.0)).abs() < 1e-4);
        let r = vertex_residuals(&g, &f);
        assert!(r.continuity < 1e-15);
        assert!(r.kirchhoff < 1e-4);
        assert_eq!(momentum(&f, &g.canonical_pattern()), 0.0);
    }

    #[test]
    fn doubled_edge_breaks_continuity() {
        let g = StarGraph::new_unconstrained(3, 1, &[1.0; 3], 1.0).unwrap();
        let grid = EdgeGrid::for_states(1.0, 0.0, 0.02).unwrap();
        let f = GraphField::from_real(grid, 3, |j, x| if j == 0 { 2.0 } else { 1.0 } * sech(x))
            .unwrap();
        assert!((vertex_residuals(&g, &f).continuity - 1.0).abs() < 1e-14);
    }

    #[test]
    fn plane_wave_momentum() {
        // psi = sech(x) e^{i k x} on every edge: int Im(psi' conj psi) = k
        let grid = EdgeGrid::for_states(1.0, 0.0, 0.005).unwrap();
        let k = 0.3;
        let f = GraphField::from_fn(grid, 2, |_, x| Complex64::from_polar(sech(x), k * x)).unwrap();
        let pat = SignPattern::new(vec![1, 0]).unwrap();
        assert!(momentum(&f, &pat).abs() < 1e-12);
        let pat = SignPattern::new(vec![0, 0]).unwrap();
        assert!((momentum(&f, &pat) - 2.0 * k).abs() < 1e-4);
    }

    #[test]
    fn csv_round_trip() {
        let grid = EdgeGrid::new(3.0, 7).unwrap();
        let f = GraphField::from_fn(grid, 2, |j, x| Complex64::new(x.sin() + j as f64, -x / 3.0))
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GraphField::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert!(GraphField::read_csv(&b"edge,x,re,im\n0,0,1\n"[..]).is_err());
    }

    #[test]
    fn patterns() {
        let s = 2f64.sqrt();
        let g = StarGraph::new(3, 1, &[1.0, s, s], 1.0).unwrap();
        let c = g.canonical_pattern();
        assert_eq!(c.bits(), &[1, 0, 0]);
        assert!(c.is_admissible(&g));
        assert!(c.complement().is_admissible(&g));
        assert!(!SignPattern::new(vec![1, 1, 0]).unwrap().is_admissible(&g));
        assert!(SignPattern::new(vec![2, 0]).is_err());
        let p: SignPattern = serde_json::from_str("[0,1,1]").unwrap();
        assert_eq!(p, c.complement());
    }
}
