//! Graphs, spin Hamiltonians and bifactor models.

pub mod bifactor;
pub mod graph;
pub mod hamiltonian;

pub use bifactor::{
    assemble_exact_state, assemble_with_order, check_nu_commutativity, merge_vertices, pair_partition,
    thermal_bifactor, BifactorModel, CommutativityReport, Order,
};
pub use graph::{chain, complete, ladder, parse_edge_list, read_edge_list, ring, torus, EdgeList, Graph};
pub use hamiltonian::{build_hamiltonian, Couplings, HamiltonianDecomposition, ModelSpec};
