mod common;

use common::*;

fn check(s: Suite) {
    println!("{}", s.line());
    assert!(s.passed(), "{}", s.line());
}

#[test]
fn legendre_involution_holds() {
    check(legendre_involution());
}

#[test]
fn hessian_inverse_pairing_holds() {
    check(hessian_inverse_pairing());
}

#[test]
fn elementary_symmetric_matches_subsets() {
    check(elementary_symmetric_brute_force());
}

#[test]
fn jacobian_matches_finite_differences() {
    check(jacobian_fd_consistency());
}

#[test]
fn solutions_are_monotone_in_sigma() {
    check(sigma_monotonicity());
}

#[test]
fn blowdown_is_a_semigroup() {
    check(blowdown_semigroup());
}

#[test]
fn classifier_is_rotation_equivariant() {
    check(classifier_rotation_equivariance());
}
