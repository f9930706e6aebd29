#![allow(dead_code)]

use std::collections::BTreeMap;

use qbp::model::{BifactorModel, Graph, Order};
use qbp::operator::{LabeledOperator, Matrix, Subsystem, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn qubits(labels: &[usize]) -> Vec<Subsystem> {
    labels.iter().map(|&l| Subsystem::qubit(l)).collect()
}

/// Full-rank density operator `AA† + εI`, normalized.
pub fn random_state(rng: &mut ChaCha8Rng, support: Vec<Subsystem>) -> LabeledOperator {
    let d: usize = support.iter().map(|s| s.dim).product();
    let a = Matrix::from_shape_fn((d, d), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = a.dot(&a.t().mapv(|x| x.conj())) + Matrix::eye(d).mapv(|x| x * 0.05);
    LabeledOperator::new(support, m).unwrap().normalized().unwrap()
}

/// Positive diagonal operator with entries in `[lo, hi)`.
pub fn random_diagonal(rng: &mut ChaCha8Rng, support: Vec<Subsystem>, lo: f64, hi: f64) -> LabeledOperator {
    let d: usize = support.iter().map(|s| s.dim).product();
    let entries: Vec<C64> = (0..d).map(|_| C64::new(rng.gen_range(lo..hi), 0.0)).collect();
    LabeledOperator::diagonal(support, &entries).unwrap()
}

/// Random tree on `n` vertices: vertex `v > 0` hangs off a uniform earlier vertex.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    Graph::new(n, &edges).unwrap()
}

/// 1-bifactor model on a graph with random full-rank vertex operators and
/// random positive diagonal (hence commuting) edge operators.
pub fn random_order_one_model(rng: &mut ChaCha8Rng, g: &Graph) -> BifactorModel {
    let n = g.num_vertices();
    let mu: Vec<LabeledOperator> = (0..n).map(|v| random_state(rng, qubits(&[v]))).collect();
    let nu: BTreeMap<(usize, usize), LabeledOperator> =
        g.edges().iter().map(|&(u, v)| ((u, v), random_diagonal(rng, qubits(&[u, v]), 0.2, 2.0))).collect();
    BifactorModel::new(g.clone(), Order::Finite(1), mu, nu, None).unwrap()
}
