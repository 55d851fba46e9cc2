//! Half-line spectral machinery for `L_+` at shifted states.
//!
//! `v(x; lambda)` is the solution of `-v'' + v - (2p+1)(p+1) sech^2(p x) v = lambda v`
//! with `v(x) e^{sqrt(1-lambda) x} -> 1` as `x -> +inf`. It is computed through
//! `w = v e^{kappa x}`, which satisfies `w'' = 2 kappa w' - V w` and stays bounded,
//! integrating leftward from a point where the potential has decayed.
//!
//! An eigenvalue of `L_+` below 1 is a root of one of
//! * case A: `v(a) = 0`, multiplicity `n_+ - 1`,
//! * case B: `v(-a) = 0`, multiplicity `n_- - 1`,
//! * case C: `v(-a) v'(a) + v(a) v'(-a) = 0`, simple,
//!
//! where `n_+` counts edges carrying `phi(x + a)` and `n_-` those carrying `phi(x - a)`.

use crate::graph::{SignPattern, StarGraph};
use crate::ode::{integrate, OdeError, OdeOptions};
use crate::roots::{brent, RootError};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Distance below the continuum edge that `lambda` must keep.
pub const CONTINUUM_GAP: f64 = 1e-6;
/// Eigenvalues with `|lambda|` below this are reported as zero modes.
pub const ZERO_TOL: f64 = 1e-7;
/// Roots closer than this are merged.
pub const MERGE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error("lambda = {0} is too close to the continuous spectrum at 1")]
    LambdaTooCloseToContinuum(f64),
    #[error("integrator failure: {0}")]
    IntegratorFailure(#[from] OdeError),
    #[error("x = {x} lies outside the solution window [{lo}, {hi}]")]
    OutsideWindow { x: f64, lo: f64, hi: f64 },
    #[error("invalid lambda window [{lo}, {hi}]")]
    WindowInvalid { lo: f64, hi: f64 },
    #[error("root refinement failed: {0}")]
    RootRefinementFailure(#[from] RootError),
    #[error("no zero of v(.; {lambda}) in the window")]
    NoZeroFound { lambda: f64 },
    #[error("pattern has {got} entries, graph has {want} edges")]
    PatternLength { got: usize, want: usize },
}

/// Right end of the integration window: the potential is below `1e-14` there.
pub fn default_x_max(power: f64, a: f64) -> f64 {
    (20.0f64).max(a.abs() + 15.0) / power.min(1.0)
}

fn potential(power: f64, x: f64) -> f64 {
    let s = 1.0 / (power * x).cosh();
    (2.0 * power + 1.0) * (power + 1.0) * s * s
}

/// The decaying solution on `[x_min, x_max]`, stored as accepted integrator knots.
#[derive(Debug, Clone)]
pub struct DecayingSolution {
    power: f64,
    lambda: f64,
    kappa: f64,
    x_min: f64,
    x_max: f64,
    /// `(x, [w, w'])`, descending in `x`.
    knots: Vec<(f64, [f64; 2])>,
    opts: OdeOptions,
}

fn ode_options() -> OdeOptions {
    OdeOptions {
        rtol: 1e-13,
        ..OdeOptions::default()
    }
}

/// Decaying solution on the symmetric window `[-x_max, x_max]`.
pub fn decaying_solution(power: f64, lambda: f64) -> Result<DecayingSolution, ShootingError> {
    let xm = default_x_max(power, 0.0);
    decaying_solution_on(power, lambda, -xm, xm)
}

pub fn decaying_solution_on(
    power: f64,
    lambda: f64,
    x_min: f64,
    x_max: f64,
) -> Result<DecayingSolution, ShootingError> {
    if !(lambda < 1.0 - CONTINUUM_GAP) {
        return Err(ShootingError::LambdaTooCloseToContinuum(lambda));
    }
    let kappa = (1.0 - lambda).sqrt();
    let opts = ode_options();
    let mut knots = vec![(x_max, [1.0, 0.0])];
    integrate(
        |x, y: &[f64; 2]| [y[1], 2.0 * kappa * y[1] - potential(power, x) * y[0]],
        x_max,
        [1.0, 0.0],
        x_min,
        &opts,
        |x, y| knots.push((x, *y)),
    )?;
    Ok(DecayingSolution {
        power,
        lambda,
        kappa,
        x_min,
        x_max,
        knots,
        opts,
    })
}

impl DecayingSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn window(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    /// `(w, w')` at `x`, with `w = v e^{kappa x}`.
    pub fn scaled(&self, x: f64) -> Result<[f64; 2], ShootingError> {
        if x < self.x_min - 1e-12 || x > self.x_max + 1e-12 {
            return Err(ShootingError::OutsideWindow {
                x,
                lo: self.x_min,
                hi: self.x_max,
            });
        }
        // knots are descending; pick the nearest one
        let idx = self.knots.partition_point(|(xk, _)| *xk > x);
        let best = [idx.saturating_sub(1), idx.min(self.knots.len() - 1)]
            .into_iter()
            .min_by(|&i, &j| {
                (self.knots[i].0 - x)
                    .abs()
                    .total_cmp(&(self.knots[j].0 - x).abs())
            })
            .unwrap();
        let (xk, yk) = self.knots[best];
        if xk == x {
            return Ok(yk);
        }
        let (p, kappa) = (self.power, self.kappa);
        Ok(integrate(
            |s, y: &[f64; 2]| [y[1], 2.0 * kappa * y[1] - potential(p, s) * y[0]],
            xk,
            yk,
            x,
            &self.opts,
            |_, _| {},
        )?)
    }

    /// `(v(x), v'(x))`.
    pub fn evaluate(&self, x: f64) -> Result<(f64, f64), ShootingError> {
        let [w, dw] = self.scaled(x)?;
        let e = (-self.kappa * x).exp();
        Ok((w * e, (dw - self.kappa * w) * e))
    }

    /// Sign changes of `v` between stored knots, as `(x_right, x_left)` brackets.
    fn zero_brackets(&self) -> Vec<(f64, f64)> {
        self.knots
            .windows(2)
            .filter(|w| w[0].1[0].signum() != w[1].1[0].signum() || w[1].1[0] == 0.0)
            .map(|w| (w[0].0, w[1].0))
            .collect()
    }
}

/// `v(+-a)`, `v'(+-a)` and the case-C combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingValues {
    pub v_a: f64,
    pub v_ma: f64,
    pub dv_a: f64,
    pub dv_ma: f64,
    pub case_c: f64,
}

fn matching_raw(power: f64, a: f64, lambda: f64) -> Result<MatchingValues, ShootingError> {
    let sol = decaying_solution_on(power, lambda, -a.abs() - 0.5, default_x_max(power, a))?;
    let (v_a, dv_a) = sol.evaluate(a)?;
    let (v_ma, dv_ma) = sol.evaluate(-a)?;
    Ok(MatchingValues {
        v_a,
        v_ma,
        dv_a,
        dv_ma,
        case_c: v_ma * dv_a + v_a * dv_ma,
    })
}

pub fn matching_values(
    graph: &StarGraph,
    a: f64,
    lambda: f64,
) -> Result<MatchingValues, ShootingError> {
    matching_raw(graph.power(), a, lambda)
}

fn group_sizes(graph: &StarGraph, pattern: &SignPattern) -> Result<(usize, usize), ShootingError> {
    if pattern.len() != graph.n_edges() {
        return Err(ShootingError::PatternLength {
            got: pattern.len(),
            want: graph.n_edges(),
        });
    }
    let plus = pattern.ones();
    Ok((plus, graph.n_edges() - plus))
}

/// Matching determinant for the canonical pattern.
pub fn determinant(graph: &StarGraph, a: f64, lambda: f64) -> Result<f64, ShootingError> {
    determinant_for(graph, &graph.canonical_pattern(), a, lambda)
}

/// `prod alpha_j^{1/p} * W_+ * v(a)^{n_+ - 1} v(-a)^{n_- - 1} * caseC`, with
/// `W_+ = sum over m_j = 1 of alpha_j^{-2/p}`.
pub fn determinant_for(
    graph: &StarGraph,
    pattern: &SignPattern,
    a: f64,
    lambda: f64,
) -> Result<f64, ShootingError> {
    let (plus, minus) = group_sizes(graph, pattern)?;
    let m = matching_values(graph, a, lambda)?;
    let prod: f64 = (0..graph.n_edges())
        .map(|j| 1.0 / graph.vertex_factor(j))
        .product();
    let w_plus: f64 = (0..graph.n_edges())
        .filter(|&j| pattern.is_set(j))
        .map(|j| graph.edge_weight(j))
        .sum();
    Ok(prod * w_plus * m.v_a.powi(plus as i32 - 1) * m.v_ma.powi(minus as i32 - 1) * m.case_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    A,
    B,
    C,
    #[serde(rename = "combined")]
    Combined,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::A => "A",
            CaseTag::B => "B",
            CaseTag::C => "C",
            CaseTag::Combined => "combined",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntry {
    pub lambda: f64,
    pub mult: usize,
    pub case: CaseTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub entries: Vec<SpectralEntry>,
    pub morse_index: usize,
    pub zero_multiplicity: usize,
}

impl SpectralReport {
    fn from_entries(entries: Vec<SpectralEntry>) -> Self {
        let morse_index = entries
            .iter()
            .filter(|e| e.lambda < -ZERO_TOL)
            .map(|e| e.mult)
            .sum();
        let zero_multiplicity = entries
            .iter()
            .filter(|e| e.lambda.abs() <= ZERO_TOL)
            .map(|e| e.mult)
            .sum();
        SpectralReport {
            entries,
            morse_index,
            zero_multiplicity,
        }
    }

    /// Eigenvalues repeated by multiplicity, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.mult))
            .collect()
    }
}

/// Scan settings for [`find_point_spectrum`].
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Absolute tolerance of the root refinement.
    pub root_tol: f64,
}

impl ScanOptions {
    pub fn for_power(power: f64) -> Self {
        ScanOptions {
            lo: -(1.0 + (2.0 * power + 1.0) * (power + 1.0)),
            hi: 1.0 - 1e-4,
            points: 2000,
            root_tol: 1e-12,
        }
    }
}

/// Uniform grid on `[lo, hi]` with refinement ×10 around adjacent bracket cells.
fn bracket_roots<F>(f: &F, grid: &[f64], values: &[f64]) -> Result<Vec<(f64, f64)>, ShootingError>
where
    F: Fn(f64) -> Result<f64, ShootingError>,
{
    let cells: Vec<usize> = (0..grid.len() - 1)
        .filter(|&i| values[i] == 0.0 || values[i].signum() != values[i + 1].signum())
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let c = cells[i];
        let adjacent =
            (i + 1 < cells.len() && cells[i + 1] == c + 1) || (i > 0 && cells[i - 1] + 1 == c);
        if adjacent {
            let (l, r) = (grid[c], grid[c + 1]);
            let mut prev = (l, values[c]);
            for s in 1..=10 {
                let x = if s == 10 {
                    r
                } else {
                    l + (r - l) * s as f64 / 10.0
                };
                let fx = if s == 10 { values[c + 1] } else { f(x)? };
                if prev.1 == 0.0 || prev.1.signum() != fx.signum() {
                    out.push((prev.0, x));
                }
                prev = (x, fx);
            }
        } else {
            out.push((grid[c], grid[c + 1]));
        }
        i += 1;
    }
    Ok(out)
}

/// Point spectrum of `L_+` in the window, for the canonical pattern.
pub fn find_point_spectrum(
    graph: &StarGraph,
    a: f64,
    window: Option<(f64, f64)>,
) -> Result<SpectralReport, ShootingError> {
    let mut opts = ScanOptions::for_power(graph.power());
    if let Some((lo, hi)) = window {
        opts.lo = lo;
        opts.hi = hi;
    }
    find_point_spectrum_with(graph, &graph.canonical_pattern(), a, &opts)
}

pub fn find_point_spectrum_with(
    graph: &StarGraph,
    pattern: &SignPattern,
    a: f64,
    opts: &ScanOptions,
) -> Result<SpectralReport, ShootingError> {
    let (lo, hi) = (opts.lo, opts.hi);
    if !(lo < hi && hi < 1.0 - CONTINUUM_GAP) || opts.points < 2 {
        return Err(ShootingError::WindowInvalid { lo, hi });
    }
    let (plus, minus) = group_sizes(graph, pattern)?;
    let p = graph.power();
    let grid: Vec<f64> = (0..opts.points)
        .map(|i| lo + (hi - lo) * i as f64 / (opts.points - 1) as f64)
        .collect();
    let samples = grid
        .iter()
        .map(|&l| matching_raw(p, a, l))
        .collect::<Result<Vec<_>, _>>()?;

    type Pick = fn(&MatchingValues) -> f64;
    let cases: [(CaseTag, usize, Pick); 3] = [
        (CaseTag::A, plus.saturating_sub(1), |m| m.v_a),
        (CaseTag::B, minus.saturating_sub(1), |m| m.v_ma),
        (CaseTag::C, 1, |m| m.case_c),
    ];
    let mut roots: Vec<SpectralEntry> = Vec::new();
    for (tag, mult, pick) in cases {
        if mult == 0 {
            continue;
        }
        let f = |l: f64| matching_raw(p, a, l).map(|m| pick(&m));
        let values: Vec<f64> = samples.iter().map(pick).collect();
        for (l, r) in bracket_roots(&f, &grid, &values)? {
            let root = brent(&f, l, r, opts.root_tol)?;
            roots.push(SpectralEntry {
                lambda: root,
                mult,
                case: tag,
            });
        }
    }
    roots.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    let mut merged: Vec<SpectralEntry> = Vec::new();
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r.lambda - last.lambda).abs() <= MERGE_TOL => {
                last.mult += r.mult;
                if last.case != r.case {
                    last.case = CaseTag::Combined;
                }
            }
            _ => merged.push(r),
        }
    }
    Ok(SpectralReport::from_entries(merged))
}

/// Roots of the full determinant found by a sign scan (roots of even-power
/// factors are invisible to it).
pub fn determinant_sign_roots(
    graph: &StarGraph,
    a: f64,
    opts: &ScanOptions,
) -> Result<Vec<f64>, ShootingError> {
    let f = |l: f64| determinant(graph, a, l);
    let grid: Vec<f64> = (0..opts.points)
        .map(|i| opts.lo + (opts.hi - opts.lo) * i as f64 / (opts.points - 1) as f64)
        .collect();
    let values = grid.iter().map(|&l| f(l)).collect::<Result<Vec<_>, _>>()?;
    bracket_roots(&f, &grid, &values)?
        .into_iter()
        .map(|(l, r)| brent(&f, l, r, opts.root_tol).map_err(ShootingError::from))
        .collect()
}

/// Predicted `(negatives, zeros)` of `L_+`: `(n_+, 1)` for `a < 0`, `(n_-, 1)` for
/// `a > 0`, `(1, N - 1)` at the half-soliton. `n_+` counts edges with `m_j = 1`.
pub fn predicted_morse(pattern: &SignPattern, a: f64) -> (usize, usize) {
    let plus = pattern.ones();
    let minus = pattern.len() - plus;
    if a < 0.0 {
        (plus, 1)
    } else if a > 0.0 {
        (minus, 1)
    } else {
        (1, pattern.len() - 1)
    }
}

/// `lambda_1(a)` for `p = 1`.
pub fn lambda1_closed_form(a: f64) -> f64 {
    let t = a.abs().tanh();
    let s2 = 1.0 / (a.cosh() * a.cosh());
    -1.5 * t * (t + (1.0 + 3.0 * s2).sqrt())
}

/// `v(x; lambda)` for `p = 1` in closed form.
pub fn closed_form_p1(x: f64, lambda: f64) -> f64 {
    let k = (1.0 - lambda).sqrt();
    let s2 = 1.0 / (x.cosh() * x.cosh());
    (-k * x).exp() * (3.0 - lambda + 3.0 * k * x.tanh() - 3.0 * s2) / (3.0 - lambda + 3.0 * k)
}

/// Eigenvalues of the scalar operator `-d^2 + 1 - (2p+1)(p+1) sech^2(p x)` on
/// the line below 1: `1 - (p + 1 - n p)^2`.
pub fn scalar_eigenvalues(power: f64) -> Vec<f64> {
    (0..)
        .map(|n| power + 1.0 - n as f64 * power)
        .take_while(|s| *s > 0.0)
        .map(|s| 1.0 - s * s)
        .collect()
}

pub fn scalar_ground_state(power: f64) -> f64 {
    1.0 - (power + 1.0).powi(2)
}

/// The zero `x0(lambda)` of `v` for each `lambda` (all must lie in `(lambda_0, 0]`).
pub fn zero_path(power: f64, lambdas: &[f64]) -> Result<Vec<(f64, f64)>, ShootingError> {
    lambdas
        .iter()
        .map(|&l| {
            let sol = decaying_solution(power, l)?;
            let brackets = sol.zero_brackets();
            let &(r, lft) = brackets
                .last()
                .ok_or(ShootingError::NoZeroFound { lambda: l })?;
            let x0 = brent(|x| sol.scaled(x).map(|y| y[0]), lft, r, 1e-13)?;
            Ok((l, x0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_oracle() {
        let mut worst = 0.0f64;
        for l in [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5] {
            let sol = decaying_solution(1.0, l).unwrap();
            for i in 0..=160 {
                let x = -8.0 + 0.1 * i as f64;
                let (v, _) = sol.evaluate(x).unwrap();
                worst = worst.max((v - closed_form_p1(x, l)).abs());
            }
        }
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn ground_state_and_odd_mode_values() {
        let (v, dv) = decaying_solution(1.0, -3.0).unwrap().evaluate(0.0).unwrap();
        assert!((v - 0.25).abs() < 1e-12 && dv.abs() < 1e-12);
        let (v, _) = decaying_solution(1.0, 0.0).unwrap().evaluate(0.0).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(matches!(
            decaying_solution(1.0, 1.0),
            Err(ShootingError::LambdaTooCloseToContinuum(_))
        ));
    }

    #[test]
    fn asymptotic_normalization() {
        let sol = decaying_solution(1.0, -1.2).unwrap();
        let (_, xm) = sol.window();
        let [w, _] = sol.scaled(xm - 1.0).unwrap();
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wronskian_is_constant() {
        let (p, l): (f64, f64) = (1.3, -0.7);
        let k = (1.0 - l).sqrt();
        let rhs = |x: f64, y: &[f64; 4]| {
            let q = 1.0 - l - potential(p, x);
            [y[1], q * y[0], y[3], q * y[2]]
        };
        let x0 = 6.0;
        let y0 = [(-k * x0).exp(), -k * (-k * x0).exp(), 1.0, 0.3];
        let w = |y: &[f64; 4]| y[0] * y[3] - y[1] * y[2];
        let w0 = w(&y0);
        let mut worst = 0.0f64;
        integrate(rhs, x0, y0, -6.0, &OdeOptions::default(), |_, y| {
            // relative to the size of the terms that cancel in the determinant
            let scale = (y[0] * y[3]).abs() + (y[1] * y[2]).abs();
            worst = worst.max((w(y) - w0).abs() / scale);
        })
        .unwrap();
        assert!(worst < 1e-11, "{worst:e}");
    }

    #[test]
    fn scalar_spectrum() {
        assert_eq!(scalar_eigenvalues(1.0), vec![-3.0, 0.0]);
        let half = scalar_eigenvalues(0.5);
        assert_eq!(half.len(), 3);
        assert!((half[0] + 1.25).abs() < 1e-15 && half[1].abs() < 1e-15);
        assert!((half[2] - 0.75).abs() < 1e-15);
        assert_eq!(scalar_ground_state(2.0), -8.0);
    }

    #[test]
    fn matching_at_eigenfunctions() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let m = matching_values(&g, 0.5, -3.0).unwrap();
        assert!(m.v_a > 0.0 && m.v_ma > 0.0 && m.case_c.abs() < 1e-9);
        let m = matching_values(&g, 0.5, 0.0).unwrap();
        assert!(m.case_c.abs() < 1e-9);
        let m = matching_values(&g, 0.0, -1.0).unwrap();
        assert!((m.case_c - 2.0 * m.v_a * m.dv_a).abs() < 1e-15);
    }

    #[test]
    fn lambda1_values() {
        assert_eq!(lambda1_closed_form(0.0), 0.0);
        // tanh(0.5) = 0.46211715726, sech^2(0.5) = 0.78644773296
        assert!((lambda1_closed_form(0.5) + 1.590_816_318_914_663).abs() < 1e-14);
        assert!((lambda1_closed_form(20.0) + 3.0).abs() < 1e-8);
        assert_eq!(lambda1_closed_form(0.3), lambda1_closed_form(-0.3));
    }

    #[test]
    fn spectrum_n4() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let r = find_point_spectrum(&g, 0.7, None).unwrap();
        assert_eq!((r.morse_index, r.zero_multiplicity), (2, 1));
        let neg: Vec<&SpectralEntry> = r.entries.iter().filter(|e| e.lambda < 0.5).collect();
        assert!((neg[0].lambda + 3.0).abs() < 1e-10 && neg[0].case == CaseTag::C);
        assert!((neg[1].lambda - lambda1_closed_form(0.7)).abs() < 1e-10);
        assert_eq!(neg[1].case, CaseTag::B);
        assert!(neg[2].lambda.abs() < 1e-10 && neg[2].case == CaseTag::C);
    }

    #[test]
    fn half_soliton_zero_multiplicity() {
        let g = StarGraph::uniform(4, 1.0).unwrap();
        let r = find_point_spectrum(&g, 0.0, None).unwrap();
        assert_eq!((r.morse_index, r.zero_multiplicity), (1, 3));
        assert_eq!(predicted_morse(&g.canonical_pattern(), 0.0), (1, 3));
    }

    #[test]
    fn determinant_roots_are_case_roots() {
        let s = 2f64.sqrt();
        let g = StarGraph::new(3, 1, &[1.0, s, s], 1.0).unwrap();
        let opts = ScanOptions {
            points: 400,
            ..ScanOptions::for_power(1.0)
        };
        let r = find_point_spectrum_with(&g, &g.canonical_pattern(), 0.7, &opts).unwrap();
        let det = determinant_sign_roots(&g, 0.7, &opts).unwrap();
        assert!(!det.is_empty());
        for d in det {
            assert!(r.entries.iter().any(|e| (e.lambda - d).abs() < 1e-8), "{d}");
        }
    }

    #[test]
    fn zero_path_monotone() {
        let l0 = scalar_ground_state(1.0);
        let ls: Vec<f64> = (1..=20).map(|k| l0 - l0 * k as f64 / 21.0).collect();
        let path = zero_path(1.0, &ls).unwrap();
        assert!(path.windows(2).all(|w| w[1].1 > w[0].1));
        let z = zero_path(1.0, &[0.0]).unwrap();
        assert!(z[0].1.abs() < 1e-10);
        let l1 = lambda1_closed_form(0.5);
        let z = zero_path(1.0, &[l1]).unwrap();
        assert!((z[0].1 + 0.5).abs() < 1e-9);
        assert!(matches!(
            zero_path(1.0, &[-3.5]),
            Err(ShootingError::NoZeroFound { .. })
        ));
    }
}
