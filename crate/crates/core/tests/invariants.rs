//! Symmetry and conservation properties over randomly drawn graphs and data.

use num_complex::Complex64;
use proptest::prelude::*;
use star_nls::dynamics::{
    divided_power, evolve_with, group_deviation, line_to_graph, EvolveOptions,
};
use star_nls::graph::{EdgeGrid, GraphField, SignPattern, StarGraph};
use star_nls::operators::{assemble, lowest_eigenpairs, morse_index, OperatorKind};
use star_nls::shooting::{determinant, predicted_morse};
use star_nls::stationary::{count_families, enumerate_patterns, shifted_state};

/// A graph satisfying the weight constraint: the outgoing weights split the
/// incoming total in the drawn proportions.
fn constrained_graph() -> impl Strategy<Value = StarGraph> {
    (1usize..4, 1usize..4, prop_oneof![Just(1.0), 0.5..1.5f64]).prop_flat_map(|(k, out, p)| {
        (
            prop::collection::vec(0.3..3.0f64, k),
            prop::collection::vec(0.2..1.0f64, out),
        )
            .prop_map(move |(w_in, split)| {
                let total: f64 = w_in.iter().sum();
                let norm: f64 = split.iter().sum();
                let alphas: Vec<f64> = w_in
                    .iter()
                    .copied()
                    .chain(split.iter().map(|s| total * s / norm))
                    .map(|w| w.powf(-p / 2.0))
                    .collect();
                StarGraph::new(k + out, k, &alphas, p).expect("weights balance by construction")
            })
    })
}

/// Random permutation of `0..n` that keeps the incoming block `0..k` in place as a set.
fn group_permutation(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed;
    let mut next = move || {
        rng = rng
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (rng >> 33) as usize
    };
    let mut perm: Vec<usize> = (0..n).collect();
    for block in [0..k, k..n] {
        let slice = &mut perm[block];
        for i in (1..slice.len()).rev() {
            slice.swap(i, next() % (i + 1));
        }
    }
    perm
}

fn coarse_grid() -> EdgeGrid {
    EdgeGrid::with_spacing(12.0, 0.05).unwrap()
}

/// Smooth continuous data of order one after the `alpha_j^{-1/p}` scaling: a
/// common vertex part plus bumps vanishing at the vertex.
fn random_field(graph: &StarGraph, grid: EdgeGrid, coeffs: &[(f64, f64)]) -> GraphField {
    let gamma = Complex64::new(coeffs[0].0, coeffs[0].1);
    GraphField::from_fn(grid, graph.n_edges(), |j, x| {
        let (re, im) = coeffs[1 + j % (coeffs.len() - 1)];
        let c = 2.0 + j as f64;
        let bump = Complex64::new(re, im) * (x / c).powi(2) * (-(x - c).powi(2)).exp();
        graph.vertex_factor(j) * (gamma * (-x * x / 2.0).exp() + bump)
    })
    .unwrap()
}

fn max_diff(a: &GraphField, b: &GraphField) -> f64 {
    a.edges()
        .iter()
        .flatten()
        .zip(b.edges().iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.8..0.8f64, -0.8..0.8f64), 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn canonical_pattern_is_admissible_and_complement_too(g in constrained_graph()) {
        let m = g.canonical_pattern();
        prop_assert!(m.is_admissible(&g));
        prop_assert!(m.complement().is_admissible(&g));
        prop_assert!((m.imbalance(&g) - m.complement().imbalance(&g)).abs() < 1e-14);
    }

    #[test]
    fn enumeration_is_closed_under_complement(g in constrained_graph()) {
        let all = enumerate_patterns(&g).unwrap();
        prop_assert!(all.contains(&g.canonical_pattern()));
        for m in &all {
            prop_assert!(m.is_admissible(&g));
            prop_assert!(all.contains(&m.complement()));
        }
    }

    #[test]
    fn predicted_morse_is_complement_symmetric(
        bits in prop::collection::vec(0u8..2, 2..9),
        a in -2.0..2.0f64,
    ) {
        let m = SignPattern::new(bits).unwrap();
        prop_assert_eq!(predicted_morse(&m, a), predicted_morse(&m.complement(), -a));
    }

    #[test]
    fn divided_power_matches_the_quotient(
        s0 in 1e-3..4.0f64,
        s1 in 1e-3..4.0f64,
        p in 0.2..1.9f64,
    ) {
        let d = divided_power(s0, s1, p);
        if (s1 - s0).abs() > 1e-3 {
            let q = (s1.powf(p + 1.0) - s0.powf(p + 1.0)) / (s1 - s0);
            prop_assert!((d - q).abs() <= 1e-9 * q.abs().max(1.0));
        }
        prop_assert!((d - divided_power(s1, s0, p)).abs() <= 1e-14 * d.abs());
        let near = divided_power(s0, s0 * (1.0 + 1e-12), p);
        prop_assert!((near - (p + 1.0) * s0.powf(p)).abs() <= 1e-8 * near);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn spectra_are_invariant_under_group_permutations(
        g in constrained_graph(),
        a in -1.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let perm = group_permutation(g.n_edges(), g.n_incoming(), seed);
        let gp = g.permuted(&perm).unwrap();
        let m = g.canonical_pattern();
        let mp = m.permuted(&perm);
        prop_assert_eq!(&mp, &gp.canonical_pattern());
        let s = shifted_state(&g, coarse_grid(), a, m).unwrap();
        let sp = shifted_state(&gp, coarse_grid(), a, mp).unwrap();
        for kind in [OperatorKind::Lplus, OperatorKind::Lminus] {
            let op = assemble(&g, &s, kind).unwrap();
            let opp = assemble(&gp, &sp, kind).unwrap();
            let e: Vec<f64> = lowest_eigenpairs(&op, 3).unwrap().iter().map(|p| p.lambda).collect();
            let ep: Vec<f64> = lowest_eigenpairs(&opp, 3).unwrap().iter().map(|p| p.lambda).collect();
            for (x, y) in e.iter().zip(&ep) {
                prop_assert!((x - y).abs() < 1e-10, "{kind:?}: {e:?} vs {ep:?}");
            }
            prop_assert_eq!(morse_index(&op), morse_index(&opp));
        }
        let lambda = -0.37;
        let d = determinant(&g, a, lambda).unwrap();
        let dp = determinant(&gp, a, lambda).unwrap();
        prop_assert!((d.abs() - dp.abs()).abs() <= 1e-10 * d.abs().max(1e-12));
    }

    #[test]
    fn complement_with_opposite_shift_is_the_same_state(
        g in constrained_graph(),
        a in -1.5..1.5f64,
    ) {
        let m = g.canonical_pattern();
        let s = shifted_state(&g, coarse_grid(), a, m.clone()).unwrap();
        let c = shifted_state(&g, coarse_grid(), -a, m.complement()).unwrap();
        prop_assert!(max_diff(s.field(), c.field()) < 1e-14);
    }

    #[test]
    fn scheme_conserves_mass_and_energy(g in constrained_graph(), c in coeffs()) {
        let u0 = random_field(&g, coarse_grid(), &c);
        let t = evolve_with(&g, &u0, &EvolveOptions::new(0.02, 0.4)).unwrap();
        prop_assert!(t.mass_drift() < 1e-11, "mass drift {}", t.mass_drift());
        prop_assert!(t.energy_drift() < 1e-9, "energy drift {}", t.energy_drift());
    }

    #[test]
    fn evolution_commutes_with_phase_rotation(
        g in constrained_graph(),
        c in coeffs(),
        theta in 0.0..std::f64::consts::TAU,
    ) {
        let u0 = random_field(&g, coarse_grid(), &c);
        let rot = Complex64::from_polar(1.0, theta);
        let opts = EvolveOptions::new(0.02, 0.2);
        let a = evolve_with(&g, &u0, &opts).unwrap().final_field;
        let b = evolve_with(&g, &u0.map(|z| rot * z), &opts).unwrap().final_field;
        prop_assert!(max_diff(&a.map(|z| rot * z), &b) < 1e-11);
    }

    #[test]
    fn conjugated_run_returns_to_the_start(g in constrained_graph(), c in coeffs()) {
        let u0 = random_field(&g, coarse_grid(), &c);
        let opts = EvolveOptions::new(0.02, 0.3);
        let forward = evolve_with(&g, &u0, &opts).unwrap().final_field;
        let back = evolve_with(&g, &forward.map(|z| z.conj()), &opts).unwrap().final_field;
        prop_assert!(max_diff(&back.map(|z| z.conj()), &u0) < 1e-10);
    }

    #[test]
    fn scheme_keeps_group_symmetric_data_symmetric(g in constrained_graph(), c in coeffs()) {
        let (w, v) = (Complex64::new(c[1].0, c[1].1), Complex64::new(c[2].0, c[2].1));
        // different profiles on the two sides, continuous at the origin
        let u = move |s: f64| {
            let side = if s < 0.0 { w } else { v };
            (-s * s / 2.0).exp() + side * (s / 2.0).powi(2) * (-(s.abs() - 2.0).powi(2)).exp()
        };
        let u0 = line_to_graph(&g, coarse_grid(), u).unwrap();
        prop_assert!(group_deviation(&g, &u0) < 1e-14);
        let t = evolve_with(&g, &u0, &EvolveOptions::new(0.02, 0.4)).unwrap();
        prop_assert!(group_deviation(&g, &t.final_field) < 1e-11);
    }
}

#[test]
fn family_counts_match_enumeration_for_uniform_even_graphs() {
    for n in [2usize, 4, 6, 8] {
        let g = StarGraph::uniform(n, 1.0).unwrap();
        let all = enumerate_patterns(&g).unwrap();
        assert_eq!(all.len() as u128, 2 * count_families(n).unwrap(), "N = {n}");
    }
}
