mod common;

use common::{qubits, random_state};
use proptest::prelude::*;
use qbp::info::{
    conditional_mutual_information, entropy, markov_operator, markov_reconstruction, mutual_information, relative_entropy, Tripartition,
};
use qbp::model::{build_hamiltonian, chain, Couplings, ModelSpec};
use qbp::operator::{trace_distance, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn split() -> Tripartition {
    Tripartition::new(vec![0], vec![1], vec![2])
}

#[test]
fn relative_entropy_to_the_product_of_marginals_is_mutual_information() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, qubits(&[0, 1, 2]));
        let product = rho.reduce_to(&[0]).unwrap().kron(&rho.reduce_to(&[1, 2]).unwrap()).unwrap();
        let d = relative_entropy(&rho, &product).unwrap();
        let i = mutual_information(&rho, &[0], &[1, 2]).unwrap();
        assert!(!d.infinite);
        assert!((d.value - i).abs() < 1e-9, "seed {seed}: {} vs {i}", d.value);
    }
}

#[test]
fn divergence_from_the_markov_operator_is_conditional_mutual_information() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let rho = random_state(&mut rng, qubits(&[0, 1, 2]));
        let sigma = markov_operator(&rho, &split()).unwrap();
        assert!(sigma.trace().re <= 1.0 + 1e-12);
        let d = relative_entropy(&rho, &sigma).unwrap().value;
        let cmi = conditional_mutual_information(&rho, &split()).unwrap();
        assert!((d - cmi).abs() < 1e-7, "seed {seed}: D {d}, I {cmi}");
    }
}

#[test]
fn markov_reconstruction_bounds_conditional_mutual_information() {
    // D(ρ‖σ) = I(A:C|B) + log₂ Tr exp(...) and the trace is at most one
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let rho = random_state(&mut rng, qubits(&[0, 1, 2]));
        let sigma = markov_reconstruction(&rho, &split()).unwrap();
        let d = relative_entropy(&rho, &sigma).unwrap().value;
        let cmi = conditional_mutual_information(&rho, &split()).unwrap();
        assert!(d <= cmi + 1e-9 && d >= -1e-12, "seed {seed}: D {d}, I {cmi}");
    }
}

#[test]
fn markov_states_are_reconstructed_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = random_state(&mut rng, qubits(&[0, 1])).kron(&random_state(&mut rng, qubits(&[2]))).unwrap();
    assert!(conditional_mutual_information(&rho, &split()).unwrap().abs() < 1e-10);
    let sigma = markov_reconstruction(&rho, &split()).unwrap();
    assert!(trace_distance(&rho, &sigma).unwrap() < 1e-10);
}

#[test]
fn cold_classical_chain_shares_one_bit_end_to_end() {
    let spec = ModelSpec::Ising { g: [0.0, 0.0, 0.0], j: Couplings::Uniform(1.0) };
    let h = build_hamiltonian(&chain(3).unwrap(), &spec).unwrap().dense().unwrap();
    let rho = h.scale(C64::new(-30.0, 0.0)).exp().unwrap().normalized().unwrap();
    let i = mutual_information(&rho, &[0], &[2]).unwrap();
    let cmi = conditional_mutual_information(&rho, &split()).unwrap();
    assert!((i - 1.0).abs() < 1e-3, "{i}");
    assert!(cmi < 1e-6, "{cmi}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn strong_subadditivity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, qubits(&[0, 1, 2]));
        prop_assert!(conditional_mutual_information(&rho, &split()).unwrap() >= -1e-10);
    }

    #[test]
    fn entropy_is_bounded_by_dimension(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, qubits(&[0, 1, 2]));
        let s = entropy(&rho).unwrap();
        prop_assert!((-1e-12..=3.0 + 1e-12).contains(&s));
        // conditioning on B cannot exceed the unconditioned bound 2 min(S_A, S_C)
        let cmi = conditional_mutual_information(&rho, &split()).unwrap();
        prop_assert!(cmi <= 2.0 + 1e-9);
    }
}
