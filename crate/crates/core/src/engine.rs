//! Message passing: initialization, flooding updates, beliefs and the
//! halting rule.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BifactorModel, Graph, Order};
use crate::operator::{odot, star_n, trace_distance, LabeledOperator, C64};

/// Operator-valued messages on every directed edge.
#[derive(Debug, Clone)]
pub struct MessageSet {
    pub round: usize,
    messages: BTreeMap<(usize, usize), LabeledOperator>,
}

impl MessageSet {
    /// Message `from → to`, supported on the sites of `to`.
    pub fn get(&self, from: usize, to: usize) -> Option<&LabeledOperator> {
        self.messages.get(&(from, to))
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &LabeledOperator)> {
        self.messages.iter()
    }

    /// Builds a message set from explicit operators, e.g. to restart from a
    /// perturbed state.
    pub fn from_map(round: usize, messages: BTreeMap<(usize, usize), LabeledOperator>) -> Self {
        MessageSet { round, messages }
    }

    /// Largest trace distance between corresponding messages.
    pub fn distance(&self, other: &MessageSet) -> Result<f64> {
        let mut worst = 0.0f64;
        for (k, m) in &self.messages {
            let o = other.messages.get(k).ok_or(Error::SupportMismatch)?;
            worst = worst.max(trace_distance(m, o)?);
        }
        Ok(worst)
    }
}

/// Unit-trace pair beliefs on every edge `(u, v)` with `u < v`.
#[derive(Debug, Clone)]
pub struct BeliefSet {
    pub round: usize,
    beliefs: BTreeMap<(usize, usize), LabeledOperator>,
}

impl BeliefSet {
    pub fn new(round: usize, beliefs: BTreeMap<(usize, usize), LabeledOperator>) -> Self {
        BeliefSet { round, beliefs }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<&LabeledOperator> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.beliefs.get(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &LabeledOperator)> {
        self.beliefs.iter()
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// Largest edge-wise trace distance to `other`.
    pub fn distance(&self, other: &BeliefSet) -> Result<f64> {
        let mut worst = 0.0f64;
        for (k, b) in &self.beliefs {
            let o = other.beliefs.get(k).ok_or(Error::SupportMismatch)?;
            worst = worst.max(trace_distance(b, &o.reorder(b.support())?)?);
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub rounds_executed: usize,
    pub converged: bool,
    /// Max trace distance between the last two belief sets.
    pub final_delta: f64,
    /// See [`fluctuation_diagnostic`]; `None` when fewer than two rounds ran.
    pub fluctuation_magnitude: Option<f64>,
    pub delta_history: Vec<f64>,
    /// Some matrix function floored a near-zero eigenvalue.
    pub regularized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbpOptions {
    pub tolerance: f64,
    /// `None` means four times the graph diameter.
    pub max_rounds: Option<usize>,
    pub damping: f64,
}

impl Default for QbpOptions {
    fn default() -> Self {
        QbpOptions { tolerance: 1e-8, max_rounds: None, damping: 0.0 }
    }
}

impl QbpOptions {
    pub fn rounds_for(&self, model: &BifactorModel) -> usize {
        self.rounds_for_graph(model.graph())
    }

    pub fn rounds_for_graph(&self, graph: &Graph) -> usize {
        self.max_rounds.unwrap_or_else(|| (4 * graph.diameter().unwrap_or(0)).max(2))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!("damping must lie in [0, 1), got {}", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Maximally mixed messages on every directed edge.
pub fn init_messages(model: &BifactorModel) -> Result<MessageSet> {
    let mut messages = BTreeMap::new();
    for (u, v) in model.graph().directed_edges() {
        messages.insert((u, v), LabeledOperator::maximally_mixed(model.sites(v).to_vec())?);
    }
    Ok(MessageSet { round: 0, messages })
}

/// Messages into `u` from every neighbor not listed in `except`, in
/// neighbor order.
pub fn incoming<'a>(
    model: &BifactorModel,
    msgs: &'a MessageSet,
    u: usize,
    except: &[usize],
) -> Result<Vec<&'a LabeledOperator>> {
    model
        .graph()
        .neighbors(u)
        .iter()
        .filter(|w| !except.contains(w))
        .map(|&w| msgs.get(w, u).ok_or_else(|| Error::InvalidArgument(format!("missing message {w}->{u}"))))
        .collect()
}

/// Ordinary product of local operators on one vertex; `None` when empty.
pub(crate) fn local_product(ops: &[&LabeledOperator]) -> Result<Option<LabeledOperator>> {
    let Some(first) = ops.first() else {
        return Ok(None);
    };
    let mut acc = (*first).clone();
    for op in &ops[1..] {
        acc = acc.mul(op)?;
    }
    Ok(Some(acc))
}

/// `Tr_u{X (L ⊗ I) ν_uv}` for an operator `X` on the sites of `u`, where `L`
/// multiplies the messages into `u` other than from `v`. Valid for 1-bifactor
/// models, whose messages commute with every edge operator.
pub fn contract_towards(
    model: &BifactorModel,
    msgs: &MessageSet,
    x: &LabeledOperator,
    u: usize,
    v: usize,
) -> Result<LabeledOperator> {
    let ins = incoming(model, msgs, u, &[v])?;
    let factor = match local_product(&ins)? {
        Some(l) => x.mul(&l)?,
        None => x.clone(),
    };
    model.nu(u, v).contract_local(&factor)?.reorder(model.sites(v))
}

/// Unnormalized message `u → v`, with `μ_u` replaced by `mu`.
pub fn compute_message_with(
    model: &BifactorModel,
    msgs: &MessageSet,
    u: usize,
    v: usize,
    mu: &LabeledOperator,
) -> Result<LabeledOperator> {
    match model.order() {
        Order::Finite(1) => contract_towards(model, msgs, mu, u, v),
        Order::Finite(n) => {
            let ins = incoming(model, msgs, u, &[v])?;
            let mut ops = vec![model.nu(u, v)];
            ops.extend(ins);
            let z = odot(&ops)?;
            let x = star_n(mu, &z, n)?;
            x.partial_trace(&labels(model.sites(u)))?.reorder(model.sites(v))
        }
        Order::Infinite => {
            let ins = incoming(model, msgs, u, &[v])?;
            let mut ops = vec![mu, model.nu(u, v)];
            ops.extend(ins);
            let z = odot(&ops)?;
            z.partial_trace(&labels(model.sites(u)))?.reorder(model.sites(v))
        }
    }
}

fn labels(sites: &[crate::operator::Subsystem]) -> Vec<usize> {
    sites.iter().map(|s| s.label).collect()
}

/// Trace-normalized message `u → v` computed from `msgs`.
pub fn compute_message(model: &BifactorModel, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator> {
    compute_message_with(model, msgs, u, v, model.mu(u))
        .and_then(|m| m.normalized())
        .map_err(|e| e.in_message(u, v))
}

/// One flooding round: every new message depends only on `msgs`.
/// Damping `d` mixes `(1 − d)·new + d·old` before normalizing.
pub fn update_round(model: &BifactorModel, msgs: &MessageSet, damping: f64) -> Result<MessageSet> {
    let keys: Vec<(usize, usize)> = msgs.messages.keys().copied().collect();
    let results: Vec<Result<LabeledOperator>> = keys
        .par_iter()
        .map(|&(u, v)| {
            let new = compute_message(model, msgs, u, v)?;
            if damping == 0.0 {
                return Ok(new);
            }
            let old = &msgs.messages[&(u, v)];
            new.scale(C64::new(1.0 - damping, 0.0))
                .add(&old.scale(C64::new(damping, 0.0)))
                .and_then(|m| m.normalized())
                .map_err(|e| e.in_message(u, v))
        })
        .collect();
    let mut messages = BTreeMap::new();
    for (k, r) in keys.into_iter().zip(results) {
        messages.insert(k, r?);
    }
    Ok(MessageSet { round: msgs.round + 1, messages })
}

/// Computes per-edge beliefs from a message set.
pub trait BeliefReducer: Sync {
    fn edge_belief(&self, model: &BifactorModel, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator>;
}

/// Belief on the full pair space.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullBelief;

impl BeliefReducer for FullBelief {
    fn edge_belief(&self, model: &BifactorModel, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator> {
        belief(model, msgs, u, v)
    }
}

/// Unit-trace belief on edge `(u, v)`.
pub fn belief(model: &BifactorModel, msgs: &MessageSet, u: usize, v: usize) -> Result<LabeledOperator> {
    let inner = || -> Result<LabeledOperator> {
        let joint = model.joint_support(u, v);
        let into_u = incoming(model, msgs, u, &[v])?;
        let into_v = incoming(model, msgs, v, &[u])?;
        let mu_uv = model.mu(u).kron(model.mu(v))?.reorder(&joint)?;
        let b = match model.order() {
            Order::Finite(1) => {
                let mut z = model.nu(u, v).clone();
                for m in into_u.iter().chain(&into_v) {
                    z = z.mul(m)?;
                }
                let half = model.mu(u).sqrt()?.kron(&model.mu(v).sqrt()?)?.reorder(&joint)?;
                half.mul(&z)?.mul(&half)?
            }
            Order::Finite(n) => {
                let mut ops = vec![model.nu(u, v)];
                ops.extend(into_u.iter().copied());
                ops.extend(into_v.iter().copied());
                star_n(&mu_uv, &odot(&ops)?, n)?
            }
            Order::Infinite => {
                let mut ops = vec![&mu_uv, model.nu(u, v)];
                ops.extend(into_u.iter().copied());
                ops.extend(into_v.iter().copied());
                odot(&ops)?
            }
        };
        b.reorder(&joint)?.normalized()
    };
    inner().map_err(|e| e.in_belief(u, v))
}

/// Beliefs on every edge, computed in parallel.
pub fn beliefs_with(model: &BifactorModel, msgs: &MessageSet, reducer: &dyn BeliefReducer) -> Result<BeliefSet> {
    let edges = model.graph().edges().to_vec();
    let results: Vec<Result<LabeledOperator>> =
        edges.par_iter().map(|&(u, v)| reducer.edge_belief(model, msgs, u, v)).collect();
    let mut beliefs = BTreeMap::new();
    for (e, r) in edges.into_iter().zip(results) {
        beliefs.insert(e, r?);
    }
    Ok(BeliefSet { round: msgs.round, beliefs })
}

pub fn beliefs(model: &BifactorModel, msgs: &MessageSet) -> Result<BeliefSet> {
    beliefs_with(model, msgs, &FullBelief)
}

/// Output of a message-passing run.
#[derive(Debug, Clone)]
pub struct QbpRun {
    pub beliefs: BeliefSet,
    pub messages: MessageSet,
    pub report: RunReport,
    /// Beliefs after every round, round 0 included.
    pub history: Vec<BeliefSet>,
}

pub fn run_qbp(model: &BifactorModel, opts: &QbpOptions) -> Result<QbpRun> {
    run_qbp_with(model, opts, &FullBelief)
}

/// Iterates flooding rounds until consecutive beliefs differ by less than
/// the tolerance or the round budget is spent. Non-convergence is reported,
/// not raised.
pub fn run_qbp_with(model: &BifactorModel, opts: &QbpOptions, reducer: &dyn BeliefReducer) -> Result<QbpRun> {
    opts.validate()?;
    let max_rounds = opts.rounds_for(model);
    let msgs = init_messages(model)?;
    run_from(model, msgs, opts, max_rounds, reducer)
}

pub(crate) fn run_from(
    model: &BifactorModel,
    mut msgs: MessageSet,
    opts: &QbpOptions,
    max_rounds: usize,
    reducer: &dyn BeliefReducer,
) -> Result<QbpRun> {
    let mut current = beliefs_with(model, &msgs, reducer)?;
    let mut history = vec![current.clone()];
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut regularized = false;
    for _ in 0..max_rounds {
        msgs = update_round(model, &msgs, opts.damping)?;
        regularized |= msgs.iter().any(|(_, m)| m.regularized());
        let next = beliefs_with(model, &msgs, reducer)?;
        let delta = next.distance(&current)?;
        deltas.push(delta);
        current = next;
        history.push(current.clone());
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    let fluctuation_magnitude = fluctuation_diagnostic(&history[1..]).ok();
    let report = RunReport {
        rounds_executed: deltas.len(),
        converged,
        final_delta: deltas.last().copied().unwrap_or(0.0),
        fluctuation_magnitude,
        delta_history: deltas,
        regularized,
    };
    Ok(QbpRun { beliefs: current, messages: msgs, report, history })
}

/// Time-fluctuation size of a belief history: over the retained rounds, the
/// largest trace distance of a belief to its time average, maximized over
/// edges. The last quarter of the rounds (at least two) is retained. When
/// every round-to-round distance in the later half of that window is below
/// every one in the earlier half, the run is relaxing rather than
/// fluctuating and only the last two rounds are kept.
pub fn fluctuation_diagnostic(history: &[BeliefSet]) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory(format!("{} rounds recorded, need at least 2", history.len())));
    }
    let mut keep = history.len().div_ceil(4).max(2);
    if keep > 2 {
        let tail = &history[history.len() - keep..];
        let deltas: Vec<f64> = tail.windows(2).map(|w| w[1].distance(&w[0])).collect::<Result<_>>()?;
        let (early, late) = deltas.split_at(deltas.len() / 2);
        let late_max = late.iter().fold(0.0f64, |a, &d| a.max(d));
        if early.iter().all(|&d| late_max < d) {
            keep = 2;
        }
    }
    let retained = &history[history.len() - keep..];
    let mut worst = 0.0f64;
    for (key, first) in retained[0].iter() {
        let support = first.support().to_vec();
        let ops: Vec<LabeledOperator> = retained
            .iter()
            .map(|b| {
                b.beliefs
                    .get(key)
                    .ok_or(Error::SupportMismatch)
                    .and_then(|o| o.reorder(&support))
            })
            .collect::<Result<_>>()?;
        let mut avg = ops[0].matrix().clone();
        for o in &ops[1..] {
            avg += o.matrix();
        }
        avg.mapv_inplace(|x| x / keep as f64);
        let avg = LabeledOperator::new(support.clone(), avg)?;
        for o in &ops {
            worst = worst.max(trace_distance(o, &avg)?);
        }
    }
    Ok(worst)
}

/// Expectation value extracted from a belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expectation {
    pub value: f64,
    /// Imaginary part of the normalized trace.
    pub imaginary: f64,
    /// `|Im| > 1e−8·|Re| + 1e−12`.
    pub flagged: bool,
}

/// `Re Tr{obs · belief} / Tr{belief}` for an observable supported inside the
/// belief's support.
pub fn expectation(belief: &LabeledOperator, obs: &LabeledOperator) -> Result<Expectation> {
    let inside = obs.support().iter().all(|s| belief.support().contains(s));
    if !inside {
        return Err(Error::SupportMismatch);
    }
    let num = belief.trace_with_local(obs)?;
    let den = belief.trace();
    if den.norm() == 0.0 {
        return Err(Error::InvalidArgument("belief has zero trace".into()));
    }
    let z = num / den;
    Ok(Expectation { value: z.re, imaginary: z.im, flagged: z.im.abs() > 1e-8 * z.re.abs() + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_exact_state, build_hamiltonian, chain, ring, thermal_bifactor, Graph, ModelSpec};
    use crate::operator::{spin, Subsystem};

    fn sz(l: usize) -> LabeledOperator {
        LabeledOperator::new(vec![Subsystem::qubit(l)], spin::sz()).unwrap()
    }

    #[test]
    fn init_counts_and_normalization() {
        let h = build_hamiltonian(&ring(5).unwrap(), &ModelSpec::critical_ising()).unwrap();
        let m = thermal_bifactor(&h, 1.0).unwrap();
        let msgs = init_messages(&m).unwrap();
        assert_eq!(msgs.len(), 10);
        for (_, op) in msgs.iter() {
            assert!((op.trace().re - 1.0).abs() < 1e-15);
            assert!((op.matrix()[[0, 0]].re - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn beta_zero_is_stationary() {
        let h = build_hamiltonian(&ring(4).unwrap(), &ModelSpec::critical_ising()).unwrap();
        let m = thermal_bifactor(&h, 0.0).unwrap();
        let run = run_qbp(&m, &QbpOptions::default()).unwrap();
        assert!(run.report.converged);
        assert_eq!(run.report.rounds_executed, 1);
        let mm = LabeledOperator::maximally_mixed(vec![Subsystem::qubit(0), Subsystem::qubit(1)]).unwrap();
        assert!(run.beliefs.get(0, 1).unwrap().max_abs_diff(&mm).unwrap() < 1e-15);
    }

    #[test]
    fn two_vertex_beliefs_are_exact_for_any_order() {
        let h = build_hamiltonian(&chain(2).unwrap(), &ModelSpec::Ising { g: [0.3, 0.2, 0.1], j: crate::model::Couplings::Uniform(1.0) })
            .unwrap();
        let base = thermal_bifactor(&h, 1.5).unwrap();
        for order in [Order::Infinite, Order::Finite(1), Order::Finite(3)] {
            let m = base.with_order(order).unwrap();
            let exact = assemble_exact_state(&m).unwrap();
            let run = run_qbp(&m, &QbpOptions::default()).unwrap();
            let b = run.beliefs.get(0, 1).unwrap();
            assert!(trace_distance(b, &exact).unwrap() < 1e-12, "{order}");
        }
    }

    #[test]
    fn expectation_basics() {
        let q = vec![Subsystem::qubit(0), Subsystem::qubit(1)];
        let mm = LabeledOperator::maximally_mixed(q.clone()).unwrap();
        let id = LabeledOperator::identity(q.clone()).unwrap();
        assert!((expectation(&mm, &id).unwrap().value - 1.0).abs() < 1e-15);
        let zz = sz(0).kron(&sz(1)).unwrap();
        assert!(expectation(&mm, &zz).unwrap().value.abs() < 1e-15);
        assert!(expectation(&mm, &sz(2)).is_err());
    }

    #[test]
    fn fluctuation_of_period_two_sequence() {
        let q = vec![Subsystem::qubit(0), Subsystem::qubit(1)];
        let a = LabeledOperator::maximally_mixed(q.clone()).unwrap();
        let d = |x: f64| {
            LabeledOperator::diagonal(q.clone(), &[C64::new(x, 0.0), C64::new(0.25, 0.0), C64::new(0.25, 0.0), C64::new(0.5 - x, 0.0)])
                .unwrap()
        };
        let b = d(0.35);
        let amplitude = trace_distance(&a, &b).unwrap();
        let history: Vec<BeliefSet> = (0..8)
            .map(|t| {
                let mut map = BTreeMap::new();
                map.insert((0, 1), if t % 2 == 0 { a.clone() } else { b.clone() });
                BeliefSet::new(t, map)
            })
            .collect();
        let f = fluctuation_diagnostic(&history).unwrap();
        assert!((f - amplitude / 2.0).abs() < 1e-14);
        assert!(fluctuation_diagnostic(&history[..1]).is_err());
    }

    #[test]
    fn relaxing_sequence_keeps_only_the_last_rounds() {
        let q = vec![Subsystem::qubit(0), Subsystem::qubit(1)];
        let d = |x: f64| {
            LabeledOperator::diagonal(q.clone(), &[C64::new(x, 0.0), C64::new(0.25, 0.0), C64::new(0.25, 0.0), C64::new(0.5 - x, 0.0)])
                .unwrap()
        };
        let history: Vec<BeliefSet> = (0..16)
            .map(|t| {
                let mut map = BTreeMap::new();
                map.insert((0, 1), d(0.25 + 0.1 * 0.5f64.powi(t)));
                BeliefSet::new(t as usize, map)
            })
            .collect();
        let last = history[15].distance(&history[14]).unwrap();
        let f = fluctuation_diagnostic(&history).unwrap();
        assert!((f - last / 2.0).abs() < 1e-15);
    }

    #[test]
    fn leaf_message_matches_definition() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let mu0 = LabeledOperator::from_real(vec![Subsystem::qubit(0)], &[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let mu1 = LabeledOperator::identity(vec![Subsystem::qubit(1)]).unwrap();
        let nu = LabeledOperator::from_real(
            vec![Subsystem::qubit(0), Subsystem::qubit(1)],
            &[&[1.0, 0.2, 0.1, 0.0], &[0.2, 2.0, 0.0, 0.1], &[0.1, 0.0, 1.5, 0.3], &[0.0, 0.1, 0.3, 1.0]],
        )
        .unwrap();
        let mut nus = BTreeMap::new();
        nus.insert((0, 1), nu.clone());
        let m = BifactorModel::new(g, Order::Finite(1), vec![mu0.clone(), mu1], nus, None).unwrap();
        let msgs = init_messages(&m).unwrap();
        let out = compute_message(&m, &msgs, 0, 1).unwrap();
        let expected = star_n(&mu0, &nu, 1).unwrap().partial_trace(&[0]).unwrap().normalized().unwrap();
        assert!(out.max_abs_diff(&expected).unwrap() < 1e-14);
    }
}
