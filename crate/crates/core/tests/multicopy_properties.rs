mod common;

use common::*;
use convex_approx::linalg::{trace_norm, DensityMatrix};
use convex_approx::multicopy::{
    correlated_minimize, factorized_minimize, inequality_chain_report, product_of_single_opt,
    tensor_set, MultiCopyProblem,
};
use convex_approx::qubit::{pauli_b1, pauli_b3, QubitParams};
use convex_approx::solver::{minimize, SolverOptions};
use convex_approx::Weights;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn psi_problem(copies: usize) -> MultiCopyProblem {
    MultiCopyProblem::new(
        QubitParams::new(0.25, 1.0, 0.0).unwrap().density(),
        pauli_b1(),
        copies,
    )
    .unwrap()
}

#[test]
fn chain_is_ordered_for_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let opts = SolverOptions::default();
    for i in 0..50 {
        let set = if i % 2 == 0 { pauli_b1() } else { pauli_b3() };
        let prob = MultiCopyProblem::new(random_params(&mut rng).density(), set, 2).unwrap();
        let r = inequality_chain_report(&prob, &opts).unwrap();
        assert!(r.ordered(2e-3), "{r:?}");
    }
}

#[test]
fn correlated_never_exceeds_factorized_over_b1() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let opts = SolverOptions::default();
    for _ in 0..10 {
        let prob = MultiCopyProblem::new(random_params(&mut rng).density(), pauli_b1(), 2).unwrap();
        let c = correlated_minimize(&prob, &opts).unwrap();
        let f = factorized_minimize(&prob, &opts).unwrap();
        assert!(c.distance <= f.distance + 1e-6);
        assert!(f.grid_checked);
        assert!(f.distance <= f.grid_distance.unwrap() + 1e-12);
    }
}

#[test]
fn correlated_optimum_is_exchange_symmetric() {
    let r = correlated_minimize(&psi_problem(2), &SolverOptions::default()).unwrap();
    assert!((r.weights[1] - r.weights[2]).abs() < 1e-3);
}

#[test]
fn tensor_elements_are_products() {
    // Every element of the tensor set equals the product of its labelled factors,
    // so any mixture of them is separable.
    let base = pauli_b3();
    let two = tensor_set(&base, 2).unwrap();
    assert_eq!(two.len(), 36);
    for (label, m) in two.labels().iter().zip(two.elements()) {
        let (i, j) = label.split_at(1);
        let expect = base
            .get(i.parse().unwrap())
            .tensor(base.get(j.parse().unwrap()));
        assert!(m.matrix().max_abs_diff(expect.matrix()) < 1e-15);
    }
}

#[test]
fn one_copy_degenerates() {
    let opts = SolverOptions::default();
    let prob = psi_problem(1);
    let single = minimize(&prob.base_state, &prob.base_set, &opts).unwrap();
    let r = inequality_chain_report(&prob, &opts).unwrap();
    assert_eq!(r.d_corr, single.distance);
    assert!((r.d_fact - single.distance).abs() < 1e-9);
    assert!((r.d_prod - single.distance).abs() < 1e-9);
}

#[test]
fn maximally_mixed_collapses() {
    let prob = MultiCopyProblem::new(DensityMatrix::maximally_mixed(2), pauli_b1(), 2).unwrap();
    let r = inequality_chain_report(&prob, &SolverOptions::default()).unwrap();
    assert!(r.d_corr < 1e-8 && r.d_fact < 1e-8 && r.d_prod < 1e-8);
    for w in r.weights_corr.iter() {
        assert!((w - 0.25).abs() < 1e-6);
    }
}

#[test]
fn diagonal_targets_for_three_copies() {
    let rho = QubitParams::new(0.2, 0.0, 0.0).unwrap().density();
    let prob = MultiCopyProblem::new(rho, pauli_b1(), 3).unwrap();
    let opts = SolverOptions::default();
    assert!(product_of_single_opt(&prob, &opts).unwrap() < 1e-8);
    let f = factorized_minimize(&prob, &opts).unwrap();
    assert!(f.distance < 1e-8);
}

#[test]
fn factorized_objective_is_copy_symmetric() {
    let prob = psi_problem(2);
    let p = Weights::new(vec![0.8, 0.2]).unwrap();
    let q = Weights::new(vec![0.6, 0.4]).unwrap();
    let pq = prob.factorized_objective(&[p.clone(), q.clone()]).unwrap();
    let qp = prob.factorized_objective(&[q, p]).unwrap();
    assert!((pq - qp).abs() < 1e-12);
}

#[test]
fn product_value_is_a_plain_trace_norm() {
    let prob = psi_problem(2);
    let sigma = DensityMatrix::new(convex_approx::ComplexMatrix::diag(&[0.75, 0.25])).unwrap();
    let direct = trace_norm(&prob.target().difference(&sigma.tensor_power(2)).unwrap()).unwrap();
    let d = product_of_single_opt(&prob, &SolverOptions::default()).unwrap();
    assert!((d - direct).abs() < 1e-4);
}
