//! Bifactor states `ρ ∝ (∏ μ_v) ⋆ⁿ (⊙ ν_uv)` on a graph.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::hamiltonian::HamiltonianDecomposition;
use crate::error::{Error, Result};
use crate::operator::{commutator_norm, odot, star_n, LabeledOperator, Subsystem, C64};

/// Product order `n` of a bifactor state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(n) => write!(f, "{n}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

/// Commutator norms above this (relative to the operator scale) break the
/// finite-order requirement.
pub const NU_COMMUTE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BifactorModel {
    graph: Graph,
    order: Order,
    sites: Vec<Vec<Subsystem>>,
    mu: Vec<LabeledOperator>,
    nu: BTreeMap<(usize, usize), LabeledOperator>,
    beta: Option<f64>,
    groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutativityReport {
    pub max_norm: f64,
    pub offending: Vec<((usize, usize), (usize, usize))>,
}

impl CommutativityReport {
    pub fn commuting(&self) -> bool {
        self.offending.is_empty()
    }
}

fn check_positive(op: &LabeledOperator, what: &str) -> Result<()> {
    if !op.is_hermitian() {
        return Err(Error::InvalidModel(format!("{what} is not Hermitian")));
    }
    let min = op.min_eigenvalue()?;
    let scale = op.max_abs().max(1.0);
    if min < -1e-10 * scale {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(())
}

fn canonical_union(a: &[Subsystem], b: &[Subsystem]) -> Vec<Subsystem> {
    let mut out: Vec<Subsystem> = a.iter().chain(b).copied().collect();
    out.sort();
    out
}

impl BifactorModel {
    /// Validated model. Every `μ_v` and `ν_uv` must be positive; `ν_uv` is
    /// embedded on the sites of `u` and `v`. Finite orders additionally
    /// require mutually commuting `ν`.
    pub fn new(
        graph: Graph,
        order: Order,
        mu: Vec<LabeledOperator>,
        nu: BTreeMap<(usize, usize), LabeledOperator>,
        beta: Option<f64>,
    ) -> Result<Self> {
        for (v, m) in mu.iter().enumerate() {
            check_positive(m, &format!("mu[{v}]"))?;
        }
        for (e, n) in &nu {
            check_positive(n, &format!("nu{e:?}"))?;
        }
        let model = Self::unchecked(graph, order, mu, nu, beta)?;
        if let Order::Finite(_) = order {
            let report = check_nu_commutativity(&model)?;
            if !report.commuting() {
                return Err(Error::NonCommutingEdges { max_norm: report.max_norm });
            }
        }
        Ok(model)
    }

    /// Structural checks only: used for models whose factors are not
    /// Hermitian (replicas) or whose validity follows from construction.
    pub(crate) fn unchecked(
        graph: Graph,
        order: Order,
        mu: Vec<LabeledOperator>,
        nu: BTreeMap<(usize, usize), LabeledOperator>,
        beta: Option<f64>,
    ) -> Result<Self> {
        let n = graph.num_vertices();
        if let Order::Finite(0) = order {
            return Err(Error::InvalidModel("product order must be positive".into()));
        }
        if mu.len() != n {
            return Err(Error::InvalidModel(format!("{} vertex operators for {n} vertices", mu.len())));
        }
        if let Some(b) = beta {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::InvalidModel(format!("beta must be finite and non-negative, got {b}")));
            }
        }
        let sites: Vec<Vec<Subsystem>> = mu.iter().map(|m| m.support().to_vec()).collect();
        let mut all: Vec<Subsystem> = sites.iter().flatten().copied().collect();
        all.sort();
        if all.windows(2).any(|w| w[0].label == w[1].label) {
            return Err(Error::InvalidModel("vertex operators share a subsystem".into()));
        }
        let mut embedded = BTreeMap::new();
        for &(u, v) in graph.edges() {
            let op = nu.get(&(u, v)).ok_or_else(|| Error::InvalidModel(format!("missing edge operator for ({u}, {v})")))?;
            let joint = canonical_union(&sites[u], &sites[v]);
            if !op.support().iter().all(|s| joint.contains(s)) {
                return Err(Error::InvalidModel(format!("edge operator ({u}, {v}) acts outside its endpoints")));
            }
            embedded.insert((u, v), op.tensor_embed(&joint)?);
        }
        if let Some(extra) = nu.keys().find(|(u, v)| !graph.has_edge(*u, *v) || u > v) {
            return Err(Error::InvalidModel(format!("edge operator given for non-edge {extra:?}")));
        }
        let groups = (0..n).map(|v| vec![v]).collect();
        Ok(BifactorModel { graph, order, sites, mu, nu: embedded, beta, groups })
    }

    /// Copy with `μ_v` replaced by an operator on the same sites; no
    /// positivity check.
    pub fn with_vertex_operator(&self, v: usize, op: LabeledOperator) -> Result<Self> {
        if v >= self.mu.len() {
            return Err(Error::InvalidModel(format!("vertex {v} out of range")));
        }
        let op = op.reorder(&self.sites[v])?;
        let mut out = self.clone();
        out.mu[v] = op;
        Ok(out)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn mu(&self, v: usize) -> &LabeledOperator {
        &self.mu[v]
    }

    /// `ν_uv` on the canonical joint support of `u` and `v`, either
    /// orientation.
    pub fn nu(&self, u: usize, v: usize) -> &LabeledOperator {
        let key = if u < v { (u, v) } else { (v, u) };
        &self.nu[&key]
    }

    pub fn nus(&self) -> &BTreeMap<(usize, usize), LabeledOperator> {
        &self.nu
    }

    pub fn sites(&self, v: usize) -> &[Subsystem] {
        &self.sites[v]
    }

    pub fn site_dim(&self, v: usize) -> usize {
        self.sites[v].iter().map(|s| s.dim).product()
    }

    pub fn joint_support(&self, u: usize, v: usize) -> Vec<Subsystem> {
        canonical_union(&self.sites[u], &self.sites[v])
    }

    /// All subsystems in ascending label order.
    pub fn full_support(&self) -> Vec<Subsystem> {
        let mut all: Vec<Subsystem> = self.sites.iter().flatten().copied().collect();
        all.sort();
        all
    }

    /// Vertices of the originating model absorbed into each vertex.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// The vertex whose sites contain the subsystem `label`.
    pub fn vertex_of(&self, label: usize) -> Option<usize> {
        self.sites.iter().position(|s| s.iter().any(|x| x.label == label))
    }

    pub fn with_order(&self, order: Order) -> Result<Self> {
        let mut m = self.clone();
        m.order = order;
        if let Order::Finite(0) = order {
            return Err(Error::InvalidModel("product order must be positive".into()));
        }
        if let Order::Finite(_) = order {
            let report = check_nu_commutativity(&m)?;
            if !report.commuting() {
                return Err(Error::NonCommutingEdges { max_norm: report.max_norm });
            }
        }
        Ok(m)
    }
}

/// `μ_v = e^{−βh_v}`, `ν_uv = e^{−βh_uv}` with `n = ∞`.
pub fn thermal_bifactor(h: &HamiltonianDecomposition, beta: f64) -> Result<BifactorModel> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidModel(format!("beta must be finite and non-negative, got {beta}")));
    }
    let s = C64::new(-beta, 0.0);
    let mu = h.single_site.iter().map(|t| t.scale(s).exp()).collect::<Result<Vec<_>>>()?;
    let mut nu = BTreeMap::new();
    for (&e, t) in &h.two_site {
        nu.insert(e, t.scale(s).exp()?);
    }
    BifactorModel::new(h.graph.clone(), Order::Infinite, mu, nu, Some(beta))
}

/// Largest commutator among edge operators sharing a vertex; edges with
/// disjoint supports commute trivially.
pub fn check_nu_commutativity(model: &BifactorModel) -> Result<CommutativityReport> {
    let edges: Vec<(usize, usize)> = model.nu.keys().copied().collect();
    let mut max_norm = 0.0f64;
    let mut offending = Vec::new();
    for (i, &e) in edges.iter().enumerate() {
        for &f in &edges[i + 1..] {
            let shares = e.0 == f.0 || e.0 == f.1 || e.1 == f.0 || e.1 == f.1;
            if !shares {
                continue;
            }
            let (a, b) = (&model.nu[&e], &model.nu[&f]);
            let norm = commutator_norm(a, b)?;
            max_norm = max_norm.max(norm);
            if norm > NU_COMMUTE_TOL * (a.max_abs() * b.max_abs()).max(1.0) {
                offending.push((e, f));
            }
        }
    }
    Ok(CommutativityReport { max_norm, offending })
}

/// Dense normalized state of the model.
pub fn assemble_exact_state(model: &BifactorModel) -> Result<LabeledOperator> {
    assemble_with_order(model, model.order())
}

/// Dense normalized state built from the model's factors with the product
/// order replaced by `order`. Finite orders require commuting `ν`.
pub fn assemble_with_order(model: &BifactorModel, order: Order) -> Result<LabeledOperator> {
    let all = model.full_support();
    crate::cap::check_dense(crate::cap::total_dim(all.iter().map(|s| s.dim)))?;
    match order {
        Order::Infinite => {
            let d = crate::cap::total_dim(all.iter().map(|s| s.dim));
            let mut m = crate::operator::Matrix::zeros((d, d));
            let mut reg = false;
            for op in model.mu.iter().chain(model.nu.values()) {
                let l = op.log()?;
                reg |= l.regularized();
                m += l.tensor_embed(&all)?.matrix();
            }
            let sum = LabeledOperator::new(all.clone(), m)?.mark_regularized(reg);
            let reg = sum.regularized();
            Ok(sum.exp()?.mark_regularized(reg).normalized()?)
        }
        Order::Finite(n) => {
            if n == 0 {
                return Err(Error::InvalidModel("product order must be positive".into()));
            }
            if model.order() == Order::Infinite {
                let report = check_nu_commutativity(model)?;
                if !report.commuting() {
                    return Err(Error::NonCommutingEdges { max_norm: report.max_norm });
                }
            }
            // commuting ν: (∏ν)^{1/n} = ∏ ν^{1/n}; the μ_v act on disjoint sites
            let mut a = LabeledOperator::identity(all.clone())?;
            for nu in model.nu.values() {
                a = a.mul(&nu.powf(1.0 / n as f64)?)?;
            }
            for mu in &model.mu {
                let half = mu.powf(1.0 / (2.0 * n as f64))?;
                a = half.mul(&a)?.mul(&half)?;
            }
            let a = a.reorder(&all)?;
            let rho = if n == 1 { a } else { a.powi(n)? };
            rho.normalized()
        }
    }
}

/// Merges each group of vertices into a single vertex. Groups must cover
/// every vertex exactly once and induce connected subgraphs.
pub fn merge_vertices(model: &BifactorModel, partition: &[Vec<usize>]) -> Result<BifactorModel> {
    let g = model.graph();
    let n = g.num_vertices();
    let mut owner = vec![usize::MAX; n];
    for (k, group) in partition.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::InvalidPartition(format!("group {k} is empty")));
        }
        for &v in group {
            if v >= n {
                return Err(Error::InvalidPartition(format!("vertex {v} does not exist")));
            }
            if owner[v] != usize::MAX {
                return Err(Error::InvalidPartition(format!("vertex {v} appears twice")));
            }
            owner[v] = k;
        }
        if !g.induces_connected(group) {
            return Err(Error::InvalidPartition(format!("group {k} is not connected")));
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::InvalidPartition(format!("vertex {v} is not covered")));
    }
    if partition.iter().all(|grp| grp.len() == 1) && partition.iter().enumerate().all(|(k, grp)| grp[0] == k) {
        return Ok(model.clone());
    }

    let k = partition.len();
    let mut internal: Vec<Vec<&LabeledOperator>> = vec![Vec::new(); k];
    let mut cross: BTreeMap<(usize, usize), Vec<&LabeledOperator>> = BTreeMap::new();
    for (&(u, v), op) in &model.nu {
        let (a, b) = (owner[u], owner[v]);
        if a == b {
            internal[a].push(op);
        } else {
            cross.entry(if a < b { (a, b) } else { (b, a) }).or_default().push(op);
        }
    }
    let edges: Vec<(usize, usize)> = cross.keys().copied().collect();
    let graph = Graph::new(k, &edges)?;

    let mut mu = Vec::with_capacity(k);
    let mut nu: BTreeMap<(usize, usize), LabeledOperator> = BTreeMap::new();
    match model.order() {
        Order::Infinite => {
            for (a, group) in partition.iter().enumerate() {
                let mut ops: Vec<&LabeledOperator> = group.iter().map(|&v| &model.mu[v]).collect();
                ops.extend(internal[a].iter().copied());
                mu.push(odot(&ops)?);
            }
            for (e, ops) in &cross {
                nu.insert(*e, odot(ops)?);
            }
        }
        Order::Finite(order) => {
            let mut vint: Vec<Option<LabeledOperator>> = vec![None; k];
            for (a, group) in partition.iter().enumerate() {
                let mut m = model.mu[group[0]].clone();
                for &v in &group[1..] {
                    m = m.mul(&model.mu[v])?;
                }
                let mut sites: Vec<Subsystem> = m.support().to_vec();
                sites.sort();
                let m = m.reorder(&sites)?;
                if !internal[a].is_empty() {
                    let mut p = internal[a][0].clone();
                    for op in &internal[a][1..] {
                        p = p.mul(op)?;
                    }
                    vint[a] = Some(p.tensor_embed(&sites)?);
                }
                mu.push(m);
            }
            for (e, ops) in &cross {
                let mut p = ops[0].clone();
                for op in &ops[1..] {
                    p = p.mul(op)?;
                }
                nu.insert(*e, p);
            }
            // Internal ν commute with everything else, so they can ride on
            // any incident super-edge without changing the state.
            for a in 0..k {
                let Some(p) = vint[a].take() else { continue };
                if let Some(e) = edges.iter().find(|(x, y)| *x == a || *y == a) {
                    let cur = nu.remove(e).unwrap();
                    nu.insert(*e, cur.mul(&p)?);
                } else {
                    mu[a] = star_n(&mu[a], &p, order)?;
                }
            }
        }
    }
    let mut merged = BifactorModel::new(graph, model.order(), mu, nu, model.beta())?;
    merged.groups = partition
        .iter()
        .map(|grp| {
            let mut orig: Vec<usize> = grp.iter().flat_map(|&v| model.groups[v].iter().copied()).collect();
            orig.sort();
            orig
        })
        .collect();
    Ok(merged)
}

/// Consecutive pairs along a Hamiltonian path (a trailing singleton when the
/// vertex count is odd). `None` when no Hamiltonian path is found.
pub fn pair_partition(graph: &Graph) -> Option<Vec<Vec<usize>>> {
    let path = graph.hamiltonian_path()?;
    Some(path.chunks(2).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::graph::{chain, ring};
    use crate::model::hamiltonian::{build_hamiltonian, Couplings, ModelSpec};
    use crate::operator::trace_distance;

    #[test]
    fn beta_zero_gives_maximally_mixed() {
        let g = ring(4).unwrap();
        let h = build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap();
        let m = thermal_bifactor(&h, 0.0).unwrap();
        let rho = assemble_exact_state(&m).unwrap();
        let mm = LabeledOperator::maximally_mixed(m.full_support()).unwrap();
        assert!(rho.max_abs_diff(&mm).unwrap() < 1e-14);
    }

    #[test]
    fn single_vertex_state() {
        let g = Graph::new(1, &[]).unwrap();
        let mu = LabeledOperator::from_real(vec![Subsystem::qubit(0)], &[&[3.0, 1.0], &[1.0, 1.0]]).unwrap();
        for order in [Order::Infinite, Order::Finite(1), Order::Finite(3)] {
            let m = BifactorModel::new(g.clone(), order, vec![mu.clone()], BTreeMap::new(), None).unwrap();
            let rho = assemble_exact_state(&m).unwrap();
            assert!(rho.max_abs_diff(&mu.scale(C64::new(0.25, 0.0))).unwrap() < 1e-13);
        }
    }

    #[test]
    fn heisenberg_commutativity_and_pair_merge() {
        let g = chain(4).unwrap();
        let h = build_hamiltonian(&g, &ModelSpec::Heisenberg).unwrap();
        let m = thermal_bifactor(&h, 1.0).unwrap();
        let r = check_nu_commutativity(&m).unwrap();
        assert!(!r.commuting());
        assert!(r.max_norm > 1e-3);
        let part = pair_partition(&g).unwrap();
        assert_eq!(part, vec![vec![0, 1], vec![2, 3]]);
        let merged = merge_vertices(&m, &part).unwrap();
        assert!(check_nu_commutativity(&merged).unwrap().commuting());
        let before = assemble_exact_state(&m).unwrap();
        let after = assemble_exact_state(&merged).unwrap();
        assert!(trace_distance(&before, &after.reorder(before.support()).unwrap()).unwrap() < 1e-10);
        assert_eq!(merged.groups(), &[vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn finite_order_rejects_noncommuting_edges() {
        let g = chain(3).unwrap();
        let h = build_hamiltonian(&g, &ModelSpec::Heisenberg).unwrap();
        let m = thermal_bifactor(&h, 1.0).unwrap();
        assert!(matches!(m.with_order(Order::Finite(2)).unwrap_err(), Error::NonCommutingEdges { .. }));
        let ising = thermal_bifactor(&build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap(), 1.0).unwrap();
        let r = check_nu_commutativity(&ising).unwrap();
        assert!(r.max_norm < 1e-12);
    }

    #[test]
    fn trivial_partition_is_identity() {
        let g = chain(3).unwrap();
        let h = build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap();
        let m = thermal_bifactor(&h, 0.7).unwrap();
        let same = merge_vertices(&m, &[vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(same.graph(), m.graph());
        assert!(merge_vertices(&m, &[vec![0, 2], vec![1]]).is_err());
        assert!(merge_vertices(&m, &[vec![0, 1]]).is_err());
        assert!(merge_vertices(&m, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn finite_order_merge_preserves_state() {
        let g = ring(4).unwrap();
        let h = build_hamiltonian(&g, &ModelSpec::Ising { g: [0.4, 0.1, 0.2], j: Couplings::Uniform(0.8) }).unwrap();
        let m = thermal_bifactor(&h, 1.3).unwrap().with_order(Order::Finite(3)).unwrap();
        let before = assemble_exact_state(&m).unwrap();
        for part in [vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1, 2, 3]], vec![vec![1, 2], vec![3], vec![0]]] {
            let merged = merge_vertices(&m, &part).unwrap();
            let after = assemble_exact_state(&merged).unwrap();
            assert!(trace_distance(&before, &after.reorder(before.support()).unwrap()).unwrap() < 1e-10, "{part:?}");
        }
    }
}
