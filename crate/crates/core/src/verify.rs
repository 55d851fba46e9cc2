//! The acceptance suite: self-contained numerical checks against closed forms,
//! the predicted Morse indices and instability counts, and the invariants of
//! the time stepper.
//!
//! Every check is a plain function returning a [`CheckOutcome`]. The `verify`
//! subcommand runs them in order; the `acceptance` test target runs one test
//! per check.

use crate::dynamics::{
    evolve_with, exact_mass_energy, free_wave_energy, growth_rate_with, line_to_graph,
    momentum_balance, transit_test, traveling_soliton, DynamicsError, EvolveOptions, GrowthOptions,
};
use crate::graph::{validate_graph, EdgeGrid, GraphError, StarGraph};
use crate::operators::{
    assemble, cosine_similarity, lowest_eigenpairs, morse_index, stability_spectrum_with,
    OperatorKind, StabilityOptions,
};
use crate::roots::brent;
use crate::shooting::{
    closed_form_p1, decaying_solution, find_point_spectrum, lambda1_closed_form, matching_values,
    scalar_ground_state, zero_path, CaseTag,
};
use crate::stationary::{count_families, enumerate_patterns, half_soliton, shifted_state};
use num_complex::Complex64;
use serde::Serialize;
use std::error::Error;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckGroup {
    Graph,
    Shooting,
    Spectrum,
    Dynamics,
    Families,
}

impl CheckGroup {
    pub fn name(self) -> &'static str {
        match self {
            CheckGroup::Graph => "graph",
            CheckGroup::Shooting => "shooting",
            CheckGroup::Spectrum => "spectrum",
            CheckGroup::Dynamics => "dynamics",
            CheckGroup::Families => "families",
        }
    }
}

impl fmt::Display for CheckGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub group: CheckGroup,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<3} [{}] {} ({:.2} s): {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.group,
            self.title,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Seed of the random perturbations in the growth check.
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 7 }
    }
}

type Verdict = Result<(bool, String), Box<dyn Error>>;

pub struct Check {
    pub id: &'static str,
    pub group: CheckGroup,
    pub title: &'static str,
    run: fn(&VerifyOptions) -> Verdict,
}

impl Check {
    pub fn run(&self, opts: &VerifyOptions) -> CheckOutcome {
        let start = Instant::now();
        let (pass, detail) = match (self.run)(opts) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        CheckOutcome {
            id: self.id,
            group: self.group,
            title: self.title,
            pass,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    /// `filter` is a group name or a check id, case-insensitive.
    pub fn matches(&self, filter: &str) -> bool {
        filter.eq_ignore_ascii_case(self.id) || filter.eq_ignore_ascii_case(self.group.name())
    }
}

const CHECKS: &[Check] = &[
    Check {
        id: "A1",
        group: CheckGroup::Graph,
        title: "weight constraint gate",
        run: a1,
    },
    Check {
        id: "A2",
        group: CheckGroup::Shooting,
        title: "closed-form decaying solution",
        run: a2,
    },
    Check {
        id: "A3",
        group: CheckGroup::Spectrum,
        title: "ground state of L+",
        run: a3,
    },
    Check {
        id: "A4",
        group: CheckGroup::Shooting,
        title: "lambda_1 root and limits",
        run: a4,
    },
    Check {
        id: "A5",
        group: CheckGroup::Spectrum,
        title: "Morse indices",
        run: a5,
    },
    Check {
        id: "A6",
        group: CheckGroup::Spectrum,
        title: "unstable eigenvalue counts",
        run: a6,
    },
    Check {
        id: "A7",
        group: CheckGroup::Spectrum,
        title: "L- nonnegative with kernel Phi",
        run: a7,
    },
    Check {
        id: "A8",
        group: CheckGroup::Shooting,
        title: "zero path monotone",
        run: a8,
    },
    Check {
        id: "A9",
        group: CheckGroup::Dynamics,
        title: "conservation",
        run: a9,
    },
    Check {
        id: "A10",
        group: CheckGroup::Dynamics,
        title: "reflectionless transit",
        run: a10,
    },
    Check {
        id: "A11",
        group: CheckGroup::Dynamics,
        title: "growth rate",
        run: a11,
    },
    Check {
        id: "A12",
        group: CheckGroup::Dynamics,
        title: "momentum balance",
        run: a12,
    },
    Check {
        id: "A13",
        group: CheckGroup::Families,
        title: "family count",
        run: a13,
    },
    Check {
        id: "A14",
        group: CheckGroup::Families,
        title: "energy ordering",
        run: a14,
    },
];

pub fn checks() -> &'static [Check] {
    CHECKS
}

pub fn find(id: &str) -> Option<&'static Check> {
    CHECKS.iter().find(|c| c.id.eq_ignore_ascii_case(id))
}

/// Runs the checks selected by `filter` (all when `None`), calling `report`
/// after each one.
pub fn run_checks(
    filter: Option<&str>,
    opts: &VerifyOptions,
    mut report: impl FnMut(&CheckOutcome),
) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .filter(|c| filter.is_none_or(|f| c.matches(f)))
        .map(|c| {
            let out = c.run(opts);
            report(&out);
            out
        })
        .collect()
}

fn y_graph() -> StarGraph {
    let s = 2f64.sqrt();
    StarGraph::new(3, 1, &[1.0, s, s], 1.0).expect("valid weights")
}

fn uniform(n: usize) -> StarGraph {
    StarGraph::uniform(n, 1.0).expect("even edge count")
}

/// A configuration of the Morse-index table with its predicted counts.
struct Case {
    name: &'static str,
    graph: StarGraph,
    a: f64,
    /// `(negatives, zeros)` of `L_+`.
    morse: (usize, usize),
    /// Real positive eigenvalues of the linearization, with multiplicity.
    unstable: usize,
}

fn cases() -> Vec<Case> {
    let case = |name, graph: StarGraph, a: f64, morse| {
        let (n, k) = (graph.n_edges(), graph.n_incoming());
        let unstable = if a > 0.0 { n - k - 1 } else { k - 1 };
        Case {
            name,
            graph,
            a,
            morse,
            unstable,
        }
    };
    vec![
        case("N=4 a=+0.7", uniform(4), 0.7, (2, 1)),
        case("N=4 a=-0.7", uniform(4), -0.7, (2, 1)),
        case("N=6 a=+1.0", uniform(6), 1.0, (3, 1)),
        case("Y a=-0.7", y_graph(), -0.7, (1, 1)),
        case("Y a=+0.7", y_graph(), 0.7, (2, 1)),
    ]
}

const H: f64 = 0.01;

fn a1(_: &VerifyOptions) -> Verdict {
    a1_with(validate_graph)
}

fn a1_with(
    validate: impl Fn(usize, usize, &[f64], f64) -> Result<StarGraph, GraphError>,
) -> Verdict {
    let start = Instant::now();
    let s = 2f64.sqrt();
    let uniform = validate(4, 2, &[1.0; 4], 1.0).is_ok();
    let y = validate(3, 1, &[1.0, s, s], 1.0).is_ok();
    let rejected = matches!(
        validate(4, 2, &[1.0, 1.0, 1.0, 2.0], 1.0),
        Err(GraphError::ConstraintViolated { .. })
    );
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        uniform && y && rejected && elapsed < 1e-3,
        format!(
            "valid {uniform}/{y}, violated rejected {rejected}, {:.1} us",
            elapsed * 1e6
        ),
    ))
}

fn a2(_: &VerifyOptions) -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for l in [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5] {
        let sol = decaying_solution(1.0, l)?;
        for i in 0..=320 {
            let x = -8.0 + 0.05 * i as f64;
            worst = worst.max((sol.evaluate(x)?.0 - closed_form_p1(x, l)).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-8 && elapsed < 5.0,
        format!("max |v - v_closed| = {worst:.2e}"),
    ))
}

fn a3(_: &VerifyOptions) -> Verdict {
    let g = y_graph();
    let report = find_point_spectrum(&g, 0.7, None)?;
    let l0 = report.entries.first().map_or(f64::NAN, |e| e.lambda);
    let shoot_err = (l0 + 3.0).abs();
    let mut errs = Vec::new();
    for h in [0.04, 0.02, 0.01] {
        let grid = EdgeGrid::for_states(1.0, 0.0, h)?;
        let op = assemble(&g, &half_soliton(&g, grid), OperatorKind::Lplus)?;
        errs.push((lowest_eigenpairs(&op, 1)?[0].lambda + 3.0).abs());
    }
    let orders = [(errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2()];
    let pass = shoot_err < 1e-8 && errs[2] < 5e-3 && orders.iter().all(|o| (1.8..=2.2).contains(o));
    Ok((
        pass,
        format!(
            "shooting |l0 + 3| = {shoot_err:.1e}; discrete errors {:.2e} {:.2e} {:.2e}, orders {:.3} {:.3}",
            errs[0], errs[1], errs[2], orders[0], orders[1]
        ),
    ))
}

/// `lambda_1(a)`: the root of `v(-|a|; lambda)` in `(lambda_0, 0)`.
fn lambda1_shooting(g: &StarGraph, a: f64) -> Result<f64, Box<dyn Error>> {
    let l0 = scalar_ground_state(g.power());
    Ok(brent(
        |l| matching_values(g, a.abs(), l).map(|m| m.v_ma),
        l0,
        0.0,
        1e-13,
    )?)
}

fn a4(_: &VerifyOptions) -> Verdict {
    let g = uniform(4);
    let closed = lambda1_closed_form(0.5);
    let report = find_point_spectrum(&g, 0.5, None)?;
    let root = report
        .entries
        .iter()
        .filter(|e| matches!(e.case, CaseTag::A | CaseTag::B))
        .map(|e| e.lambda)
        .min_by(|x, y| (x - closed).abs().total_cmp(&(y - closed).abs()))
        .unwrap_or(f64::NAN);
    let err = (root - closed).abs();
    let small: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&a| lambda1_shooting(&g, a))
        .collect::<Result<_, _>>()?;
    let to_zero = small.windows(2).all(|w| w[1].abs() < w[0].abs()) && small[2].abs() < 1e-2;
    let far = (lambda1_shooting(&g, 20.0)? + 3.0).abs();
    Ok((
        err < 1e-8 && to_zero && far < 1e-8,
        format!(
            "|lambda1(0.5) - closed| = {err:.1e}; lambda1 at a = 1e-1, 1e-2, 1e-3: {:.2e} {:.2e} {:.2e}; |lambda1(20) + 3| = {far:.1e}",
            small[0], small[1], small[2]
        ),
    ))
}

fn a5(_: &VerifyOptions) -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in cases() {
        let r = find_point_spectrum(&c.graph, c.a, None)?;
        let shoot = (r.morse_index, r.zero_multiplicity);
        let grid = EdgeGrid::for_states(1.0, c.a.abs(), H)?;
        let state = shifted_state(&c.graph, grid, c.a, c.graph.canonical_pattern())?;
        let disc = morse_index(&assemble(&c.graph, &state, OperatorKind::Lplus)?);
        pass &= shoot == c.morse && disc == c.morse;
        parts.push(format!("{}: {:?}/{:?}", c.name, shoot, disc));
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        pass && elapsed < 60.0,
        format!("shooting/discrete {}", parts.join(", ")),
    ))
}

fn a6(_: &VerifyOptions) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in cases() {
        let grid = EdgeGrid::for_states(1.0, c.a.abs(), H)?;
        let state = shifted_state(&c.graph, grid, c.a, c.graph.canonical_pattern())?;
        let lp = assemble(&c.graph, &state, OperatorKind::Lplus)?;
        let lm = assemble(&c.graph, &state, OperatorKind::Lminus)?;
        let kernel = lp.dofs().to_dofs(&state.real_edges());
        let r = stability_spectrum_with(&lp, &lm, Some(&kernel), &StabilityOptions::default())?;
        let count: usize = r.real_positive.iter().map(|e| e.multiplicity).sum();
        pass &= count == c.unstable && r.quartet_residual < 1e-8;
        parts.push(format!(
            "{}: {count} (want {}, lambda {:.6}, quartet {:.0e})",
            c.name, c.unstable, r.max_growth_rate, r.quartet_residual
        ));
    }
    Ok((pass, parts.join(", ")))
}

fn a7(_: &VerifyOptions) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in cases() {
        let grid = EdgeGrid::for_states(1.0, c.a.abs(), H)?;
        let state = shifted_state(&c.graph, grid, c.a, c.graph.canonical_pattern())?;
        let lm = assemble(&c.graph, &state, OperatorKind::Lminus)?;
        let low = &lowest_eigenpairs(&lm, 1)?[0];
        let phi = lm.dofs().to_dofs(&state.real_edges());
        let cos = cosine_similarity(&low.vector, &phi);
        let (neg, _) = morse_index(&lm);
        pass &= low.lambda.abs() <= lm.tol_zero() && cos > 1.0 - 1e-6 && neg == 0;
        parts.push(format!(
            "{}: lowest {:.1e} (tol {:.1e}), 1 - cos {:.1e}, below -tol {neg}",
            c.name,
            low.lambda,
            lm.tol_zero(),
            1.0 - cos
        ));
    }
    Ok((pass, parts.join(", ")))
}

fn a8(_: &VerifyOptions) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [0.5, 1.0, 1.5] {
        let l0 = scalar_ground_state(p);
        let ls: Vec<f64> = (1..=50).map(|i| l0 - l0 * i as f64 / 51.0).collect();
        let path = zero_path(p, &ls)?;
        let gap = path
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::INFINITY, f64::min);
        pass &= gap > 0.0;
        parts.push(format!("p = {p}: min increment {gap:.2e}"));
    }
    Ok((pass, parts.join(", ")))
}

/// Relative drifts below this are at the accumulated round-off level of the
/// long runs, where an observed order carries no information.
const DRIFT_FLOOR: f64 = 1e-10;

fn a9(_: &VerifyOptions) -> Verdict {
    let start = Instant::now();
    let g = y_graph();
    let grid = EdgeGrid::for_states(1.0, 0.7, H)?;
    let state = shifted_state(&g, grid, -0.7, g.canonical_pattern())?;
    let init = state.field().map(|z| z * Complex64::from_polar(1.0, 0.3));
    let mut drifts = Vec::new();
    for tau in [1e-3, 2e-3] {
        let mut opts = EvolveOptions::new(tau, 20.0);
        opts.record_every = 10;
        let traj = evolve_with(&g, &init, &opts)?;
        drifts.push((traj.mass_drift(), traj.energy_drift()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let (q, e) = drifts[0];
    let order = |fine: f64, coarse: f64| (coarse / fine).log2();
    let (oq, oe) = (order(q, drifts[1].0), order(e, drifts[1].1));
    let ordered = oq >= 1.8 && oe >= 1.8;
    let at_floor = drifts
        .iter()
        .all(|&(a, b)| a <= DRIFT_FLOOR && b <= DRIFT_FLOOR);
    let note = if ordered {
        "order clause met"
    } else if at_floor {
        "drifts at round-off floor; order clause vacuous"
    } else {
        "order clause failed"
    };
    Ok((
        q < 1e-8 && e < 1e-6 && (ordered || at_floor) && elapsed < 180.0,
        format!(
            "tau=1e-3: Q {q:.1e}, E {e:.1e}; tau=2e-3: Q {:.1e}, E {:.1e}; orders {oq:.2} {oe:.2} ({note})",
            drifts[1].0, drifts[1].1
        ),
    ))
}

fn a10(_: &VerifyOptions) -> Verdict {
    let g = y_graph();
    let r = transit_test(&g, 1.0, -10.0)?;
    let control = StarGraph::new_unconstrained(3, 1, &[1.0, 1.0, 1.0], 1.0)?;
    let c = transit_test(&control, 1.0, -10.0)?;
    Ok((
        r.profile_error < 1e-2
            && r.transmitted_mass_fraction > 0.999
            && c.transmitted_mass_fraction < r.transmitted_mass_fraction,
        format!(
            "profile error {:.2e}, transmitted {:.8}; unit-weight control transmitted {:.4}",
            r.profile_error, r.transmitted_mass_fraction, c.transmitted_mass_fraction
        ),
    ))
}

/// Deviation below which a 50-unit run counts as not growing: two decades
/// above the initial perturbation.
const NOISE_CEILING: f64 = 1e-4;

fn a11(opts: &VerifyOptions) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, g, a) in [
        ("N=4 a=+0.7", uniform(4), 0.7),
        ("Y a=+0.7", y_graph(), 0.7),
    ] {
        let grid = EdgeGrid::for_states(1.0, a, H)?;
        let state = shifted_state(&g, grid, a, g.canonical_pattern())?;
        let lp = assemble(&g, &state, OperatorKind::Lplus)?;
        let lm = assemble(&g, &state, OperatorKind::Lminus)?;
        let kernel = lp.dofs().to_dofs(&state.real_edges());
        let spectral =
            stability_spectrum_with(&lp, &lm, Some(&kernel), &StabilityOptions::default())?
                .max_growth_rate;
        let fit = growth_rate_with(&g, &state, &GrowthOptions::new(opts.seed, 50.0))?;
        let gap = (fit.rate - spectral).abs() / spectral;
        pass &= gap < 0.05;
        parts.push(format!(
            "{name}: fitted {:.5} vs {spectral:.5} (gap {:.2}%, r2 {:.5})",
            fit.rate,
            100.0 * gap,
            fit.r_squared
        ));
    }
    let g = y_graph();
    let grid = EdgeGrid::for_states(1.0, 0.7, H)?;
    let state = shifted_state(&g, grid, -0.7, g.canonical_pattern())?;
    match growth_rate_with(&g, &state, &GrowthOptions::new(opts.seed, 50.0)) {
        Err(DynamicsError::NoGrowthDetected {
            max_deviation,
            t_end,
        }) => {
            pass &= max_deviation < NOISE_CEILING;
            parts.push(format!(
                "Y a=-0.7: no growth, max deviation {max_deviation:.2e} up to t = {t_end}"
            ));
        }
        Ok(fit) => {
            pass = false;
            parts.push(format!("Y a=-0.7: growth rate {:.4} detected", fit.rate));
        }
        Err(e) => return Err(e.into()),
    }
    Ok((pass, parts.join("; ")))
}

fn a12(_: &VerifyOptions) -> Verdict {
    let g = y_graph();
    let length = 40.0;
    let grid = EdgeGrid::with_spacing(length, H)?;
    // a soliton crossing the vertex, with an asymmetric bump on one outgoing
    // edge so that the vertex fluxes do not cancel; the bump is wide and flat to
    // fourth order at the vertex, so little radiation reaches x = L
    let mut edges =
        line_to_graph(&g, grid, |x| traveling_soliton(1.0, 1.0, -1.0, x, 0.0))?.into_edges();
    for (i, x) in grid.points().enumerate() {
        edges[1][i] += 2e-4 * x.powi(4) * (-(x - 4.0) * (x - 4.0) / 4.0).exp();
    }
    let init = crate::graph::GraphField::new(grid, edges)?;
    let mut opts = EvolveOptions::new(1e-3, 2.0);
    opts.snapshot_every = Some(100);
    let traj = evolve_with(&g, &init, &opts)?;
    let pattern = g.canonical_pattern();
    let b = momentum_balance(&g, &traj, &pattern);
    let scale = b.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_signed = b.min_signed_rhs.unwrap_or(f64::NAN);
    let tail_from = grid.n_points() - (1.0 / H).round() as usize;
    let tail = traj
        .snapshots
        .iter()
        .map(|(_, f)| f)
        .chain(std::iter::once(&traj.final_field))
        .flat_map(|f| f.edges().iter().flat_map(|e| e[tail_from..].iter()))
        .fold(0.0f64, |m, z| m.max(z.norm()));
    Ok((
        b.max_mismatch < 1e-4 && min_signed >= -1e-8 && tail < 1e-8,
        format!(
            "max |dP/dt - flux sum| = {:.2e} (flux sum up to {scale:.2e}), min signed flux sum {min_signed:.2e}, tail at L {tail:.1e}",
            b.max_mismatch
        ),
    ))
}

fn a13(_: &VerifyOptions) -> Verdict {
    let counts: Vec<u128> = [2, 4, 6]
        .iter()
        .map(|&n| count_families(n))
        .collect::<Result<_, _>>()?;
    let mut pass = counts == [1, 3, 10];
    let mut parts = vec![format!("C_2, C_4, C_6 = {counts:?}")];
    for n in 2..=8 {
        let g = StarGraph::new_unconstrained(n, n / 2, &vec![1.0; n], 1.0)?;
        let pats = enumerate_patterns(&g)?;
        let closed = pats.iter().all(|p| pats.contains(&p.complement()));
        let agrees = match count_families(n) {
            Ok(c) => pats.len() as u128 == 2 * c && closed,
            Err(_) => pats.is_empty(),
        };
        pass &= agrees;
        parts.push(format!("N={n}: {} patterns", pats.len()));
    }
    Ok((pass, parts.join(", ")))
}

fn a14(_: &VerifyOptions) -> Verdict {
    let g = y_graph();
    let grid = EdgeGrid::for_states(1.0, 0.7, 0.05)?;
    let state = shifted_state(&g, grid, -0.7, g.canonical_pattern())?;
    let (q, e) = exact_mass_energy(&state);
    let e2 = free_wave_energy(g.alphas()[1], 1.0, q)?;
    let ratio = e2 / e;
    Ok((
        e2 < e && ((ratio - 4.0) / 4.0).abs() < 1e-6,
        format!("Q = {q:.10}, E = {e:.10}, E_2 = {e2:.10}, ratio {ratio:.10}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_select_groups_and_ids() {
        let spectral: Vec<&str> = checks()
            .iter()
            .filter(|c| c.matches("Spectrum"))
            .map(|c| c.id)
            .collect();
        assert_eq!(spectral, ["A3", "A5", "A6", "A7"]);
        assert!(find("a13").is_some_and(|c| c.matches("A13")));
        assert!(find("A15").is_none());
    }

    #[test]
    fn constraint_gate_catches_a_sign_error() {
        let mutated = |n: usize, k: usize, alphas: &[f64], p: f64| {
            let g = StarGraph::new_unconstrained(n, k, alphas, p)?;
            let (inc, out) = g.group_weights();
            let residual = (inc + out) / inc;
            if residual > 1e-12 {
                return Err(GraphError::ConstraintViolated {
                    residual,
                    incoming: inc,
                    outgoing: out,
                });
            }
            Ok(g)
        };
        assert!(!a1_with(mutated).unwrap().0);
        assert!(a1_with(validate_graph).unwrap().0);
    }

    #[test]
    fn family_checks_pass() {
        let o = find("A13").unwrap().run(&VerifyOptions::default());
        assert!(o.pass, "{o}");
        assert!(o.to_string().starts_with("PASS A13"));
    }
}
