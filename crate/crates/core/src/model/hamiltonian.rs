//! Local Hamiltonian decompositions `H = Σ h_v + Σ h_uv`.

use std::collections::BTreeMap;

use super::graph::Graph;
use crate::error::{Error, Result};
use crate::operator::{spin, LabeledOperator, Matrix, Subsystem, C64};

/// Per-edge coupling strengths.
#[derive(Debug, Clone, PartialEq)]
pub enum Couplings {
    Uniform(f64),
    PerEdge(BTreeMap<(usize, usize), f64>),
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings::Uniform(1.0)
    }
}

impl Couplings {
    /// Coupling on edge `(u, v)`; per-edge maps default to 1 for missing
    /// edges.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        match self {
            Couplings::Uniform(j) => *j,
            Couplings::PerEdge(map) => {
                let key = if u < v { (u, v) } else { (v, u) };
                map.get(&key).copied().unwrap_or(1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// `Σ g·σ_v + Σ J_uv σ^z_u σ^z_v`.
    Ising { g: [f64; 3], j: Couplings },
    /// `Σ σ_u·σ_v`.
    Heisenberg,
}

impl ModelSpec {
    /// Transverse-field Ising model at the critical field of the chain.
    pub fn critical_ising() -> Self {
        ModelSpec::Ising { g: [0.5, 0.0, 0.0], j: Couplings::Uniform(1.0) }
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianDecomposition {
    pub graph: Graph,
    /// Qubit subsystems labelled by vertex index.
    pub sites: Vec<Subsystem>,
    pub single_site: Vec<LabeledOperator>,
    pub two_site: BTreeMap<(usize, usize), LabeledOperator>,
}

fn kron2(a: &Matrix, b: &Matrix) -> Matrix {
    ndarray::linalg::kron(a, b)
}

pub fn build_hamiltonian(graph: &Graph, spec: &ModelSpec) -> Result<HamiltonianDecomposition> {
    let n = graph.num_vertices();
    let sites: Vec<Subsystem> = (0..n).map(Subsystem::qubit).collect();
    let (sx, sy, sz) = (spin::sx(), spin::sy(), spin::sz());
    let mut single_site = Vec::with_capacity(n);
    let mut two_site = BTreeMap::new();
    match spec {
        ModelSpec::Ising { g, j } => {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("non-finite field {g:?}")));
            }
            if let Couplings::PerEdge(map) = j {
                for &(u, v) in map.keys() {
                    if !graph.has_edge(u, v) {
                        return Err(Error::InvalidModel(format!("coupling given for missing edge ({u}, {v})")));
                    }
                }
            }
            let hv = sx.mapv(|x| x * g[0]) + sy.mapv(|x| x * g[1]) + sz.mapv(|x| x * g[2]);
            for &s in &sites {
                single_site.push(LabeledOperator::new(vec![s], hv.clone())?);
            }
            let zz = kron2(&sz, &sz);
            for &(u, v) in graph.edges() {
                let juv = j.get(u, v);
                if !juv.is_finite() {
                    return Err(Error::InvalidModel(format!("non-finite coupling on ({u}, {v})")));
                }
                two_site.insert((u, v), LabeledOperator::new(vec![sites[u], sites[v]], zz.mapv(|x| x * juv))?);
            }
        }
        ModelSpec::Heisenberg => {
            for &s in &sites {
                single_site.push(LabeledOperator::new(vec![s], Matrix::zeros((2, 2)))?);
            }
            let dot = kron2(&sx, &sx) + kron2(&sy, &sy) + kron2(&sz, &sz);
            for &(u, v) in graph.edges() {
                two_site.insert((u, v), LabeledOperator::new(vec![sites[u], sites[v]], dot.clone())?);
            }
        }
    }
    Ok(HamiltonianDecomposition { graph: graph.clone(), sites, single_site, two_site })
}

impl HamiltonianDecomposition {
    /// Dense `H` on all sites in vertex order.
    pub fn dense(&self) -> Result<LabeledOperator> {
        let d = crate::cap::total_dim(self.sites.iter().map(|s| s.dim));
        crate::cap::check_dense(d)?;
        let mut m = Matrix::zeros((d, d));
        for t in self.single_site.iter().chain(self.two_site.values()) {
            m += t.tensor_embed(&self.sites)?.matrix();
        }
        LabeledOperator::new(self.sites.clone(), m)
    }

    /// `h_u/2 + h_v/2 + h_uv`, the per-edge share of the energy.
    pub fn edge_energy(&self, u: usize, v: usize) -> Result<LabeledOperator> {
        let key = if u < v { (u, v) } else { (v, u) };
        let huv = self
            .two_site
            .get(&key)
            .ok_or_else(|| Error::InvalidArgument(format!("no edge ({u}, {v})")))?;
        let half = C64::new(0.5, 0.0);
        huv.add(&self.single_site[u].scale(half))?.add(&self.single_site[v].scale(half))
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }
}
