//! Acceptance suite: every criterion at its stated tolerance, one line each.

use bcm::cli::selftest::{
    blagovestchenskii, distance_reconstruction, epsilon_scaling, forward_solver, hull,
    operator_algebra, unknown_background, volume_identity, CriterionReport,
};

use std::io::Write;

const SEED: u64 = 42;

// Written to the stderr handle rather than through `println!` so the line
// shows up even when the harness captures output.
fn report(r: bcm::Result<CriterionReport>) {
    let r = r.expect("criterion ran");
    let _ = writeln!(std::io::stderr(), "{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_1_operator_algebra() {
    report(operator_algebra(SEED));
}

#[test]
fn criterion_2_forward_solver() {
    report(forward_solver(SEED));
}

#[test]
fn criterion_3_blagovestchenskii_identity() {
    report(blagovestchenskii(SEED));
}

#[test]
fn criterion_4_volume_identity_and_convergence() {
    report(volume_identity());
}

#[test]
fn criterion_5_epsilon_scaling() {
    report(epsilon_scaling());
}

#[test]
fn criterion_6_distance_reconstruction() {
    report(distance_reconstruction());
}

#[test]
fn criterion_7_unknown_background() {
    report(unknown_background());
}

#[test]
fn criterion_8_hull() {
    let dir = std::env::temp_dir().join("bcm-acceptance");
    report(hull(Some(&dir)));
}
