//! One test per acceptance criterion. Each prints a single PASS/FAIL line;
//! run with `--nocapture` to see them.

use star_nls::verify::{find, VerifyOptions};

fn criterion(id: &str) {
    let outcome = find(id)
        .expect("known check")
        .run(&VerifyOptions::default());
    println!("{outcome}");
    assert!(outcome.pass, "{outcome}");
}

#[test]
fn a01_weight_constraint_gate() {
    criterion("A1");
}

#[test]
fn a02_closed_form_decaying_solution() {
    criterion("A2");
}

#[test]
fn a03_ground_state() {
    criterion("A3");
}

#[test]
fn a04_lambda1_root_and_limits() {
    criterion("A4");
}

#[test]
fn a05_morse_indices() {
    criterion("A5");
}

#[test]
fn a06_unstable_eigenvalue_counts() {
    criterion("A6");
}

#[test]
fn a07_lminus_kernel() {
    criterion("A7");
}

#[test]
fn a08_zero_path_monotone() {
    criterion("A8");
}

#[test]
fn a09_conservation() {
    criterion("A9");
}

#[test]
fn a10_reflectionless_transit() {
    criterion("A10");
}

#[test]
fn a11_growth_rate() {
    criterion("A11");
}

#[test]
fn a12_momentum_balance() {
    criterion("A12");
}

#[test]
fn a13_family_count() {
    criterion("A13");
}

#[test]
fn a14_energy_ordering() {
    criterion("A14");
}
