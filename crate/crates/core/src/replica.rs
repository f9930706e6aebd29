//! Replica mapping of a Trotter-decomposed thermal state onto a 1-bifactor
//! model on `N_τ`-fold replicated sites.
//!
//! With `A = M^{1/2N} V^{1/N} M^{1/2N}`, `M = ∏ μ_v` and `V = ∏ ν_uv`,
//! `Tr{O A^N} = Tr{∏_v T_v P_v Õ_v P_v · ∏ ν̃_uv}` where `P_v = (μ_v^{1/2N})^{⊗N}`,
//! `T_v` cyclically permutes the replicas, `Õ_v` acts on replica 1 and
//! `ν̃_uv = (ν_uv^{1/N})^{⊗N}`. The replica vertex operator is
//! `μ̃_v = P_v² T_v`; observables enter through the dressed operators
//! `T_v P_v Õ_v P_v`.

use std::collections::{BTreeMap, HashMap};

use ndarray::linalg::kron;

use crate::engine::{contract_towards, incoming, local_product, BeliefReducer, MessageSet, QbpOptions, QbpRun};
use crate::error::{Error, Result};
use crate::model::{assemble_with_order, check_nu_commutativity, BifactorModel, Order};
use crate::operator::{LabeledOperator, Matrix, Subsystem, C64};
use crate::oracle::CorrelationProfile;

use serde::Serialize;

/// Matrix of `T|i₁ … i_N⟩ = |i_N i₁ … i_{N−1}⟩` on `N` copies of a
/// `d`-dimensional space, replica 1 most significant.
pub fn cyclic_permutation(n: usize, d: usize) -> Result<Matrix> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("permutation needs n ≥ 1 and d ≥ 1".into()));
    }
    let dim = crate::cap::total_dim(std::iter::repeat(d).take(n));
    crate::cap::check_dense(dim)?;
    let top = dim / d;
    let mut t = Matrix::zeros((dim, dim));
    for col in 0..dim {
        // the last digit moves to the front
        let row = (col % d) * top + col / d;
        t[[row, col]] = C64::new(1.0, 0.0);
    }
    Ok(t)
}

/// Symmetric Trotter state `(M^{1/2N} V^{1/N} M^{1/2N})^N / Z`.
pub fn trotter_state(base: &BifactorModel, n_tau: u32) -> Result<LabeledOperator> {
    assemble_with_order(base, Order::Finite(n_tau))
}

#[derive(Debug, Clone)]
pub struct ReplicaModel {
    base: BifactorModel,
    n_tau: u32,
    model: BifactorModel,
    half: Vec<Matrix>,
    perm: Vec<Matrix>,
    /// Dressed `|a⟩⟨b|` at index `a·d + b` for every vertex.
    units: Vec<Vec<LabeledOperator>>,
}

fn replicated_site(v: usize, d: usize, n: u32) -> Subsystem {
    Subsystem::new(v, d.pow(n))
}

/// `(ν^{1/N})^{⊗N}` with the replicas of `u` grouped before those of `v`.
fn replicate_edge(root: &LabeledOperator, du: usize, dv: usize, n: u32, u: usize, v: usize) -> Result<LabeledOperator> {
    let support = vec![replicated_site(u, du, n), replicated_site(v, dv, n)];
    let dim = crate::cap::total_dim(support.iter().map(|s| s.dim));
    crate::cap::check_dense(dim)?;
    let n = n as usize;
    let r = root.matrix();
    if root.is_diagonal() {
        let (su, sv) = (du.pow(n as u32), dv.pow(n as u32));
        let mut diag = vec![C64::new(0.0, 0.0); dim];
        for (iu, chunk) in diag.chunks_mut(sv).enumerate() {
            for (iv, x) in chunk.iter_mut().enumerate() {
                let (mut a, mut b) = (iu, iv);
                let mut acc = C64::new(1.0, 0.0);
                for _ in 0..n {
                    let k = (a % du) * dv + b % dv;
                    acc *= r[[k, k]];
                    a /= du;
                    b /= dv;
                }
                *x = acc;
            }
        }
        debug_assert_eq!(su * sv, dim);
        return LabeledOperator::diagonal(support, &diag);
    }
    // replica k occupies temporary labels 2k (u) and 2k + 1 (v)
    let mut m = r.clone();
    for _ in 1..n {
        m = kron(&m, r);
    }
    let interleaved: Vec<Subsystem> =
        (0..n).flat_map(|k| [Subsystem::new(2 * k, du), Subsystem::new(2 * k + 1, dv)]).collect();
    let grouped: Vec<Subsystem> = (0..n)
        .map(|k| Subsystem::new(2 * k, du))
        .chain((0..n).map(|k| Subsystem::new(2 * k + 1, dv)))
        .collect();
    let op = LabeledOperator::new(interleaved, m)?.reorder(&grouped)?;
    LabeledOperator::new(support, op.into_matrix())
}

/// Builds the replica model of `base` at Trotter number `n_tau`. The edge
/// operators of `base` must commute.
pub fn replicate_model(base: &BifactorModel, n_tau: u32) -> Result<ReplicaModel> {
    if n_tau == 0 {
        return Err(Error::InvalidArgument("Trotter number must be positive".into()));
    }
    let report = check_nu_commutativity(base)?;
    if !report.commuting() {
        return Err(Error::NonCommutingEdges { max_norm: report.max_norm });
    }
    let g = base.graph();
    let n = g.num_vertices();
    let inv = 1.0 / n_tau as f64;
    let mut half = Vec::with_capacity(n);
    let mut perm = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    for v in 0..n {
        let d = base.site_dim(v);
        let site = replicated_site(v, d, n_tau);
        crate::cap::check_dense(site.dim)?;
        let root = base.mu(v).powf(0.5 * inv)?;
        let mut p = root.matrix().clone();
        for _ in 1..n_tau {
            p = kron(&p, root.matrix());
        }
        let t = cyclic_permutation(n_tau as usize, d)?;
        mu.push(LabeledOperator::new(vec![site], p.dot(&p).dot(&t))?);
        half.push(p);
        perm.push(t);
    }
    let mut cache: HashMap<(Vec<u64>, usize, usize), LabeledOperator> = HashMap::new();
    let mut nu = BTreeMap::new();
    for &(u, v) in g.edges() {
        let (du, dv) = (base.site_dim(u), base.site_dim(v));
        let order: Vec<Subsystem> = base.sites(u).iter().chain(base.sites(v)).copied().collect();
        let local = base.nu(u, v).reorder(&order)?;
        let key: Vec<u64> = local.matrix().iter().flat_map(|x| [x.re.to_bits(), x.im.to_bits()]).collect();
        let support = vec![replicated_site(u, du, n_tau), replicated_site(v, dv, n_tau)];
        let op = match cache.get(&(key.clone(), du, dv)) {
            Some(op) => op.relabel(support)?,
            None => {
                let op = replicate_edge(&local.powf(inv)?, du, dv, n_tau, u, v)?;
                cache.insert((key, du, dv), op.clone());
                op
            }
        };
        nu.insert((u, v), op);
    }
    let model = BifactorModel::unchecked(g.clone(), Order::Finite(1), mu, nu, base.beta())?;
    let mut rm = ReplicaModel { base: base.clone(), n_tau, model, half, perm, units: Vec::new() };
    rm.units = (0..n)
        .map(|v| {
            let d = base.site_dim(v);
            (0..d * d)
                .map(|k| {
                    let mut e = Matrix::zeros((d, d));
                    e[[k / d, k % d]] = C64::new(1.0, 0.0);
                    rm.dress_matrix(v, &e)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rm)
}

impl ReplicaModel {
    pub fn base(&self) -> &BifactorModel {
        &self.base
    }

    /// The 1-bifactor model on replicated sites.
    pub fn model(&self) -> &BifactorModel {
        &self.model
    }

    pub fn n_tau(&self) -> u32 {
        self.n_tau
    }

    fn dress_matrix(&self, v: usize, o: &Matrix) -> Result<LabeledOperator> {
        let d = self.base.site_dim(v);
        if o.nrows() != d || o.ncols() != d {
            return Err(Error::ShapeMismatch { rows: o.nrows(), cols: o.ncols(), expected: d });
        }
        let rest = d.pow(self.n_tau - 1);
        let tilde = kron(o, &Matrix::eye(rest));
        let p = &self.half[v];
        let m = self.perm[v].dot(&p.dot(&tilde).dot(p));
        LabeledOperator::new(self.model.sites(v).to_vec(), m)
    }

    /// `T_v P_v Õ P_v` for an operator on some of the physical sites of `v`.
    pub fn dressed(&self, v: usize, op: &LabeledOperator) -> Result<LabeledOperator> {
        let full = op.tensor_embed(self.base.sites(v))?;
        self.dress_matrix(v, full.matrix())
    }

    /// Physical two-vertex belief on the joint sites of `u` and `v` in the
    /// base model.
    pub fn physical_belief(&self, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator> {
        self.physical_belief_in(&self.model, msgs, u, v)
    }

    /// As [`ReplicaModel::physical_belief`] for a model derived from
    /// [`ReplicaModel::model`] by replacing vertex operators.
    pub fn physical_belief_in(&self, model: &BifactorModel, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator> {
        let inner = || -> Result<LabeledOperator> {
            let (du, dv) = (self.base.site_dim(u), self.base.site_dim(v));
            let rv = local_product(&incoming(model, msgs, v, &[u])?)?;
            let right: Vec<LabeledOperator> = self.units[v]
                .iter()
                .map(|y| match &rv {
                    Some(r) => y.mul(r),
                    None => Ok(y.clone()),
                })
                .collect::<Result<_>>()?;
            let mut rho = Matrix::zeros((du * dv, du * dv));
            for a in 0..du {
                for b in 0..du {
                    // ⟨a c|ρ|b d⟩ = Tr{ρ |b⟩⟨a| ⊗ |d⟩⟨c|}
                    let w = contract_towards(model, msgs, &self.units[u][b * du + a], u, v)?;
                    for c in 0..dv {
                        for d in 0..dv {
                            rho[[a * dv + c, b * dv + d]] = right[d * dv + c].trace_product(&w)?;
                        }
                    }
                }
            }
            let order: Vec<Subsystem> = self.base.sites(u).iter().chain(self.base.sites(v)).copied().collect();
            LabeledOperator::new(order, rho)?.reorder(&self.base.joint_support(u, v))?.normalized()
        };
        inner().map_err(|e| e.in_belief(u, v))
    }

    /// `⟨O_u O_v⟩` from the messages, propagated along `path` from `u` to `v`.
    /// `o_u` and `o_v` act on physical sites of the end vertices. Exact on
    /// trees at the fixed point.
    pub fn correlation_along(
        &self,
        msgs: &MessageSet,
        path: &[usize],
        o_u: &LabeledOperator,
        o_v: &LabeledOperator,
    ) -> Result<C64> {
        let (&u, &v) = match (path.first(), path.last()) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::InvalidArgument("empty path".into())),
        };
        let g = self.model.graph();
        if path.windows(2).any(|w| !g.has_edge(w[0], w[1])) {
            return Err(Error::InvalidArgument(format!("{path:?} is not a path in the graph")));
        }
        if path.len() == 1 {
            let sites = self.base.sites(u);
            let prod = o_u.tensor_embed(sites)?.mul(&o_v.tensor_embed(sites)?)?;
            let x = self.dressed(u, &prod)?;
            let l = local_product(&incoming(&self.model, msgs, u, &[])?)?;
            let close = |x: &LabeledOperator| -> Result<C64> {
                match &l {
                    Some(l) => x.trace_product(l),
                    None => Ok(x.trace()),
                }
            };
            return Ok(close(&x)? / close(self.model.mu(u))?);
        }
        let mut num = contract_towards(&self.model, msgs, &self.dressed(u, o_u)?, u, path[1])?;
        let mut den = contract_towards(&self.model, msgs, self.model.mu(u), u, path[1])?;
        for k in 1..path.len() - 1 {
            let (prev, here, next) = (path[k - 1], path[k], path[k + 1]);
            let s = C64::new(1.0, 0.0) / den.trace();
            let rest = local_product(&incoming(&self.model, msgs, here, &[prev, next])?)?;
            let step = |carried: &LabeledOperator| -> Result<LabeledOperator> {
                let mut f = self.model.mu(here).mul(&carried.scale(s))?;
                if let Some(r) = &rest {
                    f = f.mul(r)?;
                }
                self.model.nu(here, next).contract_local(&f)?.reorder(self.model.sites(next))
            };
            num = step(&num)?;
            den = step(&den)?;
        }
        let last = path[path.len() - 2];
        let rest = local_product(&incoming(&self.model, msgs, v, &[last])?)?;
        let close = |x: &LabeledOperator, carried: &LabeledOperator| -> Result<C64> {
            let f = x.mul(carried)?;
            match &rest {
                Some(r) => f.trace_product(r),
                None => Ok(f.trace()),
            }
        };
        Ok(close(&self.dressed(v, o_v)?, &num)? / close(self.model.mu(v), &den)?)
    }

    /// `⟨σ^z_a σ^z_j⟩` for physical qubit labels, along shortest paths.
    pub fn zz_profile(&self, msgs: &MessageSet, anchor: usize, targets: &[usize]) -> Result<CorrelationProfile> {
        let sz = |l: usize| LabeledOperator::new(vec![Subsystem::qubit(l)], crate::operator::spin::sz());
        let locate = |l: usize| self.base.vertex_of(l).ok_or(Error::UnknownLabel(l));
        let u = locate(anchor)?;
        let mut values = BTreeMap::new();
        for &j in targets {
            let v = locate(j)?;
            let path = self
                .model
                .graph()
                .shortest_path(u, v)
                .ok_or_else(|| Error::InvalidGraph(format!("no path from {u} to {v}")))?;
            values.insert(j, self.correlation_along(msgs, &path, &sz(anchor)?, &sz(j)?)?.re);
        }
        Ok(CorrelationProfile {
            anchor,
            beta: self.base.beta().unwrap_or(f64::NAN),
            values,
            descriptor: format!("replica N_tau={}", self.n_tau),
        })
    }
}

/// How replica correlations `⟨σ^z_a σ^z_j⟩` are read off the messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Operator insertion along a shortest path through the converged
    /// messages. Exact on trees; blind to other paths on loopy graphs.
    Path,
    /// The anchor is conditioned on each `σ^z` eigenstate and message
    /// passing is rerun on the whole graph; exact on trees.
    #[default]
    Clamped,
}

/// Correlation profile together with the message-passing runs behind it.
#[derive(Debug, Clone)]
pub struct ReplicaProfile {
    pub profile: CorrelationProfile,
    /// Conditioned runs, one per anchor eigenstate; empty for [`Estimator::Path`].
    pub conditioned: Vec<QbpRun>,
}

impl ReplicaProfile {
    /// Largest fluctuation magnitude over `base` and the conditioned runs.
    pub fn fluctuation_magnitude(&self, base: &QbpRun) -> Option<f64> {
        std::iter::once(base)
            .chain(&self.conditioned)
            .map(|r| r.report.fluctuation_magnitude)
            .try_fold(0.0f64, |acc, f| f.map(|f| acc.max(f)))
    }

    /// Every run involved converged.
    pub fn converged(&self, base: &QbpRun) -> bool {
        base.report.converged && self.conditioned.iter().all(|r| r.report.converged)
    }
}

impl ReplicaModel {
    /// `Tr{X L}/Tr{μ̃_v L}` with `X` the dressed `op` and `L` the product of
    /// all messages into `v`.
    pub fn vertex_expectation(
        &self,
        model: &BifactorModel,
        msgs: &MessageSet,
        v: usize,
        op: &LabeledOperator,
    ) -> Result<C64> {
        let x = self.dressed(v, op)?;
        let l = local_product(&incoming(model, msgs, v, &[])?)?;
        let close = |x: &LabeledOperator| -> Result<C64> {
            match &l {
                Some(l) => x.trace_product(l),
                None => Ok(x.trace()),
            }
        };
        Ok(close(&x)? / close(model.mu(v))?)
    }

    /// Replica model with the operator `op` of vertex `v` inserted into its
    /// vertex factor.
    pub fn conditioned_model(&self, v: usize, op: &LabeledOperator) -> Result<BifactorModel> {
        self.model.with_vertex_operator(v, self.dressed(v, op)?)
    }

    /// `⟨σ^z_a σ^z_j⟩ = Σ_± p_± (±½) ⟨σ^z_j⟩_±`, where `p_±` are the anchor
    /// eigenstate weights from `msgs` and `⟨·⟩_±` comes from message passing
    /// with the anchor projected onto the eigenstate.
    pub fn clamped_zz_profile(
        &self,
        msgs: &MessageSet,
        anchor: usize,
        targets: &[usize],
        opts: &QbpOptions,
    ) -> Result<ReplicaProfile> {
        let sz = |l: usize| LabeledOperator::new(vec![Subsystem::qubit(l)], crate::operator::spin::sz());
        let locate = |l: usize| self.base.vertex_of(l).ok_or(Error::UnknownLabel(l));
        let u = locate(anchor)?;
        let located: Vec<(usize, usize)> = targets.iter().map(|&j| Ok((j, locate(j)?))).collect::<Result<_>>()?;
        let half_id = LabeledOperator::identity(vec![Subsystem::qubit(anchor)])?.scale(C64::new(0.5, 0.0));
        let mut values: BTreeMap<usize, f64> = BTreeMap::new();
        let mut conditioned = Vec::new();
        for sign in [1.0, -1.0] {
            let proj = half_id.add(&sz(anchor)?.scale(C64::new(sign, 0.0)))?;
            let weight = self.vertex_expectation(&self.model, msgs, u, &proj)?.re;
            let model = self.conditioned_model(u, &proj)?;
            let run = crate::engine::run_qbp_with(&model, opts, &PhysicalBelief(self))?;
            for &(j, v) in &located {
                if v == u {
                    continue;
                }
                let e = self.vertex_expectation(&model, &run.messages, v, &sz(j)?)?.re;
                *values.entry(j).or_insert(0.0) += weight * sign * 0.5 * e;
            }
            conditioned.push(run);
        }
        for &(j, v) in &located {
            if v == u {
                let c = self.correlation_along(msgs, &[u], &sz(anchor)?, &sz(j)?)?.re;
                values.insert(j, c);
            }
        }
        let profile = CorrelationProfile {
            anchor,
            beta: self.base.beta().unwrap_or(f64::NAN),
            values,
            descriptor: format!("replica N_tau={} clamped", self.n_tau),
        };
        Ok(ReplicaProfile { profile, conditioned })
    }

    /// Profile with the chosen estimator.
    pub fn profile(
        &self,
        estimator: Estimator,
        msgs: &MessageSet,
        anchor: usize,
        targets: &[usize],
        opts: &QbpOptions,
    ) -> Result<ReplicaProfile> {
        match estimator {
            Estimator::Path => Ok(ReplicaProfile { profile: self.zz_profile(msgs, anchor, targets)?, conditioned: vec![] }),
            Estimator::Clamped => self.clamped_zz_profile(msgs, anchor, targets, opts),
        }
    }
}

/// Reduces replica messages to physical pair beliefs.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalBelief<'a>(pub &'a ReplicaModel);

impl BeliefReducer for PhysicalBelief<'_> {
    fn edge_belief(&self, model: &BifactorModel, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator> {
        self.0.physical_belief_in(model, msgs, u, v)
    }
}

/// Message passing on the replica model; beliefs and history are physical.
pub fn run_replica(rm: &ReplicaModel, opts: &QbpOptions) -> Result<QbpRun> {
    crate::engine::run_qbp_with(rm.model(), opts, &PhysicalBelief(rm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, chain, merge_vertices, thermal_bifactor, ModelSpec};
    use crate::operator::trace_distance;
    use crate::oracle::zz_profile_from_state;

    #[test]
    fn permutation_moves_last_digit_first() {
        let t = cyclic_permutation(3, 2).unwrap();
        // |011> -> |101>
        assert_eq!(t[[0b101, 0b011]], C64::new(1.0, 0.0));
        // T^3 = I
        let t3 = t.dot(&t).dot(&t);
        assert_eq!(t3, Matrix::eye(8));
    }

    #[test]
    fn chain_matches_trotter_state() {
        let h = build_hamiltonian(&chain(3).unwrap(), &ModelSpec::critical_ising()).unwrap();
        let base = thermal_bifactor(&h, 1.0).unwrap();
        let ts = trotter_state(&base, 3).unwrap();
        let rm = replicate_model(&base, 3).unwrap();
        let run = run_replica(&rm, &QbpOptions { tolerance: 1e-13, ..Default::default() }).unwrap();
        assert!(run.report.converged);
        for (&(u, v), b) in run.beliefs.iter() {
            let exact = ts.reduce_to(&[u, v]).unwrap();
            assert!(trace_distance(b, &exact).unwrap() < 1e-10, "edge ({u}, {v})");
        }
        let exact = zz_profile_from_state(&ts, 0, &[0, 1, 2], 1.0, "trotter").unwrap();
        let rep = rm.zz_profile(&run.messages, 0, &[0, 1, 2]).unwrap();
        for j in 0..3 {
            assert!((exact.get(j).unwrap() - rep.get(j).unwrap()).abs() < 1e-10, "j = {j}");
        }
        assert!((rep.get(0).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn merged_heisenberg_pairs_match_trotter_state() {
        let h = build_hamiltonian(&chain(4).unwrap(), &ModelSpec::Heisenberg).unwrap();
        let base = thermal_bifactor(&h, 0.7).unwrap();
        let merged = merge_vertices(&base, &[vec![0, 1], vec![2, 3]]).unwrap();
        let ts = trotter_state(&merged, 2).unwrap();
        let rm = replicate_model(&merged, 2).unwrap();
        let run = run_replica(&rm, &QbpOptions::default()).unwrap();
        let b = run.beliefs.get(0, 1).unwrap();
        assert!(trace_distance(b, &ts).unwrap() < 1e-10);
        let exact = zz_profile_from_state(&ts, 0, &[1, 2, 3], 0.7, "trotter").unwrap();
        let rep = rm.zz_profile(&run.messages, 0, &[1, 2, 3]).unwrap();
        for j in 1..4 {
            assert!((exact.get(j).unwrap() - rep.get(j).unwrap()).abs() < 1e-10, "j = {j}");
        }
    }

    #[test]
    fn clamped_estimator_is_exact_on_a_chain() {
        let h = build_hamiltonian(&chain(4).unwrap(), &ModelSpec::critical_ising()).unwrap();
        let base = thermal_bifactor(&h, 1.5).unwrap();
        let ts = trotter_state(&base, 2).unwrap();
        let rm = replicate_model(&base, 2).unwrap();
        let opts = QbpOptions { tolerance: 1e-12, ..Default::default() };
        let run = run_replica(&rm, &opts).unwrap();
        let exact = zz_profile_from_state(&ts, 1, &[0, 1, 2, 3], 1.5, "trotter").unwrap();
        let rp = rm.profile(Estimator::Clamped, &run.messages, 1, &[0, 1, 2, 3], &opts).unwrap();
        assert_eq!(rp.conditioned.len(), 2);
        assert!(rp.converged(&run));
        for j in 0..4 {
            assert!((exact.get(j).unwrap() - rp.profile.get(j).unwrap()).abs() < 1e-10, "j = {j}");
        }
    }

    #[test]
    fn clamped_estimator_sees_both_ways_round_a_ring() {
        let h = build_hamiltonian(&crate::model::ring(6).unwrap(), &ModelSpec::critical_ising()).unwrap();
        let base = thermal_bifactor(&h, 2.0).unwrap();
        let ts = trotter_state(&base, 3).unwrap();
        let rm = replicate_model(&base, 3).unwrap();
        let opts = QbpOptions { max_rounds: Some(100), ..Default::default() };
        let run = run_replica(&rm, &opts).unwrap();
        let targets: Vec<usize> = (0..6).collect();
        let exact = zz_profile_from_state(&ts, 0, &targets, 2.0, "trotter").unwrap();
        let path = rm.profile(Estimator::Path, &run.messages, 0, &targets, &opts).unwrap();
        let clamped = rm.profile(Estimator::Clamped, &run.messages, 0, &targets, &opts).unwrap();
        let e_path = crate::oracle::error_metric(&exact, &path.profile).unwrap();
        let e_clamped = crate::oracle::error_metric(&exact, &clamped.profile).unwrap();
        assert!(e_clamped < e_path / 10.0, "clamped {e_clamped}, path {e_path}");
    }

    #[test]
    fn single_replica_is_the_thermal_model_at_order_one() {
        let h = build_hamiltonian(&chain(2).unwrap(), &ModelSpec::critical_ising()).unwrap();
        let base = thermal_bifactor(&h, 2.0).unwrap();
        let rm = replicate_model(&base, 1).unwrap();
        let run = run_replica(&rm, &QbpOptions::default()).unwrap();
        let ts = trotter_state(&base, 1).unwrap();
        assert!(trace_distance(run.beliefs.get(0, 1).unwrap(), &ts).unwrap() < 1e-12);
    }
}
