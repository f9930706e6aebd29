//! Sliding-window message passing on chains and rings: each site receives
//! one message from the `ℓ` sites on its left and one from the `ℓ` sites on
//! its right, computed with the `n = ∞` rule on the whole block.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{fluctuation_diagnostic, BeliefSet, QbpOptions, RunReport};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, chain, Couplings, HamiltonianDecomposition, ModelSpec};
use crate::operator::{spin, trace_distance, LabeledOperator, Subsystem, C64};
use crate::oracle::CorrelationProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    /// Travels towards increasing positions; summarizes the sites on the left.
    Right,
    /// Travels towards decreasing positions; summarizes the sites on the right.
    Left,
}

/// Message into a run of `ℓ` consecutive sites from everything beyond its
/// far end.
#[derive(Debug, Clone)]
pub struct WindowMessage {
    pub direction: Direction,
    /// The site of the run nearest the direction of travel; keys the message.
    pub head: usize,
    /// Sites the message acts on, in travel order.
    pub sites: Vec<usize>,
    /// The site traced out when the message is computed.
    pub traced: usize,
    /// Unit-trace positive operator on `sites`.
    pub operator: LabeledOperator,
}

#[derive(Debug, Clone)]
pub struct WindowMessages {
    pub round: usize,
    messages: BTreeMap<(Direction, usize), WindowMessage>,
}

impl WindowMessages {
    pub fn get(&self, direction: Direction, head: usize) -> Option<&WindowMessage> {
        self.messages.get(&(direction, head))
    }

    pub fn iter(&self) -> impl Iterator<Item = &WindowMessage> {
        self.messages.values()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    fn operator(&self, direction: Direction, head: usize) -> Option<&LabeledOperator> {
        self.messages.get(&(direction, head)).map(|m| &m.operator)
    }
}

#[derive(Debug, Clone)]
struct Plan {
    direction: Direction,
    head: usize,
    sites: Vec<usize>,
    traced: usize,
    /// `−β` times the terms of the window except the field on the head.
    window: LabeledOperator,
    /// The part of `window` acting inside `sites` only.
    overlap: LabeledOperator,
    incoming: Option<(Direction, usize)>,
}

/// Sliding-window solver for a thermal state on a chain or ring.
///
/// The message heading right into the run `{j−ℓ+1, …, j}` is
/// `exp(log Tr_{j−ℓ} exp(W + log m_in) − W_S)`, where `W` collects `−β` times
/// the terms on `{j−ℓ, …, j}` other than `h_j`, `W_S` is the part of `W`
/// inside the run and `m_in` is the message into `{j−ℓ, …, j−1}`. For `ℓ = 1`
/// this is the nearest-neighbor `n = ∞` rule.
///
/// Each vertex sees `ℓ` sites on either side. When the windows of a pair of
/// vertices jointly cover a ring, their reduced state is taken from the
/// closed ring, bond included; otherwise from the run joining them, fed by
/// the messages at both ends.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    h: HamiltonianDecomposition,
    beta: f64,
    ell: usize,
    /// Vertices along the chain or around the ring.
    order: Vec<usize>,
    position: Vec<usize>,
    cyclic: bool,
    plans: Vec<Plan>,
    closed: OnceLock<LabeledOperator>,
}

fn qubits(vertices: &[usize]) -> Vec<Subsystem> {
    let mut s: Vec<Subsystem> = vertices.iter().map(|&v| Subsystem::qubit(v)).collect();
    s.sort();
    s
}

fn add_log(g: LabeledOperator, msg: Option<&LabeledOperator>) -> Result<LabeledOperator> {
    match msg {
        Some(m) => {
            let l = m.log()?;
            let reg = l.regularized();
            Ok(g.add(&l)?.mark_regularized(reg))
        }
        None => Ok(g),
    }
}

fn expm(g: &LabeledOperator) -> Result<LabeledOperator> {
    let reg = g.regularized();
    Ok(g.exp()?.mark_regularized(reg))
}

/// `exp(log Tr_traced exp(window + log m_in) − overlap)`, unit trace.
fn window_message(
    window: &LabeledOperator,
    overlap: &LabeledOperator,
    incoming: Option<&LabeledOperator>,
    traced: usize,
) -> Result<LabeledOperator> {
    let reduced = expm(&add_log(window.clone(), incoming)?)?.partial_trace(&[traced])?.normalized()?;
    let l = reduced.log()?;
    let reg = l.regularized();
    expm(&l.sub(overlap)?.mark_regularized(reg))?.normalized()
}

impl SlidingWindow {
    /// `ℓ ≥ 1`; rings additionally need `ℓ ≤ L − 2` so a window never closes
    /// the loop.
    pub fn new(h: &HamiltonianDecomposition, beta: f64, ell: usize) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be finite and non-negative, got {beta}")));
        }
        if ell == 0 {
            return Err(Error::InvalidArgument("window length must be at least 1".into()));
        }
        let g = &h.graph;
        let n = g.num_vertices();
        let (order, cyclic) = match (g.path_order(), g.cycle_order()) {
            (Some(o), _) => (o, false),
            (None, Some(o)) => (o, true),
            _ => return Err(Error::InvalidGraph("sliding windows need a chain or a ring".into())),
        };
        if cyclic && ell + 2 > n {
            return Err(Error::InvalidArgument(format!("window length {ell} too large for a ring of {n} sites")));
        }
        let span = if cyclic { ell + 1 } else { (ell + 1).min(n) };
        crate::cap::check_dense(crate::cap::total_dim(std::iter::repeat(2).take(span)))?;
        let mut position = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        let mut sw =
            SlidingWindow { h: h.clone(), beta, ell, order, position, cyclic, plans: Vec::new(), closed: OnceLock::new() };
        let mut plans = Vec::new();
        for p in 0..n {
            for direction in [Direction::Right, Direction::Left] {
                if let Some(plan) = sw.plan(direction, p)? {
                    plans.push(plan);
                }
            }
        }
        sw.plans = plans;
        Ok(sw)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hamiltonian(&self) -> &HamiltonianDecomposition {
        &self.h
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    /// Position `p + step` along the order, `None` past a chain end.
    fn shift(&self, p: usize, step: isize) -> Option<usize> {
        let n = self.len() as isize;
        let q = p as isize + step;
        if self.cyclic {
            Some(q.rem_euclid(n) as usize)
        } else if (0..n).contains(&q) {
            Some(q as usize)
        } else {
            None
        }
    }

    fn sign(direction: Direction) -> isize {
        match direction {
            Direction::Right => 1,
            Direction::Left => -1,
        }
    }

    /// The message with head at position `p`; `None` when the run or its
    /// traced site falls off a chain end.
    fn plan(&self, direction: Direction, p: usize) -> Result<Option<Plan>> {
        let back = -Self::sign(direction);
        let ell = self.ell as isize;
        // traced site first, head last
        let Some(window) = (0..=ell).rev().map(|k| self.shift(p, back * k)).collect::<Option<Vec<usize>>>() else {
            return Ok(None);
        };
        let vertices: Vec<usize> = window.iter().map(|&q| self.order[q]).collect();
        let traced = vertices[0];
        let head = self.order[p];
        let sites = vertices[1..].to_vec();
        let fields: Vec<usize> = vertices[..vertices.len() - 1].to_vec();
        let window_gen = self.generator(&vertices, &fields)?;
        let overlap = self.generator(&sites, &fields[1..])?;
        let incoming = self.shift(p, back).and_then(|q| self.shift(q, back * ell)).map(|_| (direction, vertices[vertices.len() - 2]));
        Ok(Some(Plan { direction, head, sites, traced, window: window_gen, overlap, incoming }))
    }

    /// `−β (Σ_{v ∈ fields} h_v + Σ h_uv)` over edges inside `vertices`.
    fn generator(&self, vertices: &[usize], fields: &[usize]) -> Result<LabeledOperator> {
        let support = qubits(vertices);
        let d = crate::cap::total_dim(support.iter().map(|s| s.dim));
        let mut m = crate::operator::Matrix::zeros((d, d));
        for &v in fields {
            m += self.h.single_site[v].tensor_embed(&support)?.matrix();
        }
        for (&(u, v), t) in &self.h.two_site {
            if vertices.contains(&u) && vertices.contains(&v) {
                m += t.tensor_embed(&support)?.matrix();
            }
        }
        Ok(LabeledOperator::new(support, m)?.scale(C64::new(-self.beta, 0.0)))
    }

    fn wrap(plan: &Plan, operator: LabeledOperator) -> WindowMessage {
        WindowMessage {
            direction: plan.direction,
            head: plan.head,
            sites: plan.sites.clone(),
            traced: plan.traced,
            operator,
        }
    }

    /// Maximally mixed messages.
    pub fn init_messages(&self) -> Result<WindowMessages> {
        let mut messages = BTreeMap::new();
        for plan in &self.plans {
            let operator = LabeledOperator::maximally_mixed(qubits(&plan.sites))?;
            messages.insert((plan.direction, plan.head), Self::wrap(plan, operator));
        }
        Ok(WindowMessages { round: 0, messages })
    }

    fn message(&self, plan: &Plan, msgs: &WindowMessages) -> Result<LabeledOperator> {
        let incoming = plan.incoming.and_then(|(d, t)| msgs.operator(d, t));
        window_message(&plan.window, &plan.overlap, incoming, plan.traced)
    }

    /// Recomputes every window message from `msgs`; damping as in the
    /// nearest-neighbor engine.
    pub fn window_update(&self, msgs: &WindowMessages, damping: f64) -> Result<WindowMessages> {
        let results: Vec<Result<LabeledOperator>> = self
            .plans
            .par_iter()
            .map(|plan| {
                let new = self.message(plan, msgs)?;
                if damping == 0.0 {
                    return Ok(new);
                }
                let old = msgs
                    .operator(plan.direction, plan.head)
                    .ok_or_else(|| Error::InvalidArgument(format!("missing window message at {}", plan.head)))?;
                new.scale(C64::new(1.0 - damping, 0.0)).add(&old.scale(C64::new(damping, 0.0)))?.normalized()
            })
            .collect();
        let mut messages = BTreeMap::new();
        for (plan, r) in self.plans.iter().zip(results) {
            messages.insert((plan.direction, plan.head), Self::wrap(plan, r?));
        }
        Ok(WindowMessages { round: msgs.round + 1, messages })
    }

    /// Positions of a run of `len` consecutive sites starting at `start`.
    fn positions(&self, start: usize, len: usize) -> Vec<usize> {
        (0..len).filter_map(|k| self.shift(start, k as isize)).collect()
    }

    /// Start of a run of at least `max(len, ℓ + 1)` sites containing the run
    /// `[start, start + len)`, centred and clipped to chain ends.
    fn padded(&self, start: usize, len: usize) -> (usize, usize) {
        let n = self.len();
        let want = len.max(self.ell + 1);
        let want = if self.cyclic { want.min(n - 1).max(len) } else { want.min(n) };
        let extra = (want - len) as isize;
        let s = start as isize - extra / 2;
        let s = if self.cyclic { s.rem_euclid(n as isize) } else { s.clamp(0, (n - want) as isize) };
        (s as usize, want)
    }

    /// Normalized state of a run of at least `ℓ` sites, with the messages
    /// into its first and last `ℓ` sites.
    pub fn block_state(&self, msgs: &WindowMessages, start: usize, len: usize) -> Result<LabeledOperator> {
        if len < self.ell {
            return Err(Error::InvalidArgument(format!("block of {len} sites is shorter than the window {}", self.ell)));
        }
        let positions = self.positions(start, len);
        let vertices: Vec<usize> = positions.iter().map(|&q| self.order[q]).collect();
        let mut g = self.generator(&vertices, &vertices)?;
        let (first, last) = (positions[0], positions[positions.len() - 1]);
        if self.shift(first, -1).is_some() {
            g = add_log(g, msgs.operator(Direction::Right, self.order[positions[self.ell - 1]]))?;
        }
        if self.shift(last, 1).is_some() {
            g = add_log(g, msgs.operator(Direction::Left, self.order[positions[len - self.ell]]))?;
        }
        expm(&g)?.normalized()
    }

    /// Run of positions joining `a` and `b` the short way round.
    fn arc(&self, a: usize, b: usize) -> (usize, usize) {
        let (pa, pb) = (self.position[a], self.position[b]);
        let n = self.len();
        if !self.cyclic {
            return (pa.min(pb), pa.abs_diff(pb) + 1);
        }
        let fwd = (pb + n - pa) % n;
        if fwd <= n - fwd {
            (pa, fwd + 1)
        } else {
            (pb, n - fwd + 1)
        }
    }

    /// Normalized thermal state of the whole ring.
    fn closed_state(&self) -> Result<&LabeledOperator> {
        if let Some(rho) = self.closed.get() {
            return Ok(rho);
        }
        crate::cap::check_dense(crate::cap::total_dim(std::iter::repeat(2).take(self.len())))?;
        let g = self.generator(&self.order, &self.order)?;
        let rho = expm(&g)?.normalized()?;
        Ok(self.closed.get_or_init(|| rho))
    }

    /// Reduced state of the vertices `a` and `b` (or of `a` alone).
    pub fn pair_state(&self, msgs: &WindowMessages, a: usize, b: usize) -> Result<LabeledOperator> {
        let (start, len) = self.arc(a, b);
        let keep: Vec<usize> = if a == b { vec![a] } else { vec![a.min(b), a.max(b)] };
        if self.cyclic && len + 2 * self.ell >= self.len() {
            return self.closed_state()?.reduce_to(&keep);
        }
        let (start, len) = self.padded(start, len);
        self.block_state(msgs, start, len)?.reduce_to(&keep)
    }

    /// Beliefs on every nearest-neighbor edge.
    pub fn beliefs(&self, msgs: &WindowMessages) -> Result<BeliefSet> {
        let edges: Vec<(usize, usize)> = self.h.graph.edges().to_vec();
        if self.cyclic && 2 + 2 * self.ell >= self.len() {
            self.closed_state()?;
        }
        let results: Vec<Result<LabeledOperator>> = edges.par_iter().map(|&(u, v)| self.pair_state(msgs, u, v)).collect();
        let mut beliefs = BTreeMap::new();
        for (e, r) in edges.into_iter().zip(results) {
            beliefs.insert(e, r.map_err(|err| err.in_belief(e.0, e.1))?);
        }
        Ok(BeliefSet::new(msgs.round, beliefs))
    }

    /// `⟨σ^z_anchor σ^z_j⟩` for each target.
    pub fn zz_profile(&self, msgs: &WindowMessages, anchor: usize, targets: &[usize]) -> Result<CorrelationProfile> {
        let sz = |l: usize| LabeledOperator::new(vec![Subsystem::qubit(l)], spin::sz());
        let mut values = BTreeMap::new();
        for &j in targets {
            if j >= self.len() {
                return Err(Error::UnknownLabel(j));
            }
            let rho = self.pair_state(msgs, anchor, j)?;
            let obs = if j == anchor { sz(j)?.mul(&sz(j)?)? } else { sz(anchor)?.kron(&sz(j)?)? };
            values.insert(j, rho.trace_with_local(&obs)?.re);
        }
        Ok(CorrelationProfile { anchor, beta: self.beta, values, descriptor: format!("sliding ell={}", self.ell) })
    }

    /// Iterates window updates until consecutive nearest-neighbor beliefs
    /// differ by less than the tolerance.
    pub fn run(&self, opts: &QbpOptions) -> Result<SlidingRun> {
        opts.validate()?;
        let max_rounds = opts.rounds_for_graph(&self.h.graph);
        let mut msgs = self.init_messages()?;
        let mut current = self.beliefs(&msgs)?;
        let mut history = vec![current.clone()];
        let mut deltas = Vec::new();
        let mut converged = false;
        let mut regularized = false;
        for _ in 0..max_rounds {
            msgs = self.window_update(&msgs, opts.damping)?;
            regularized |= msgs.iter().any(|m| m.operator.regularized());
            let next = self.beliefs(&msgs)?;
            let delta = next.distance(&current)?;
            deltas.push(delta);
            current = next;
            history.push(current.clone());
            if delta < opts.tolerance {
                converged = true;
                break;
            }
        }
        let report = RunReport {
            rounds_executed: deltas.len(),
            converged,
            final_delta: deltas.last().copied().unwrap_or(0.0),
            fluctuation_magnitude: fluctuation_diagnostic(&history[1..]).ok(),
            delta_history: deltas,
            regularized,
        };
        Ok(SlidingRun { beliefs: current, messages: msgs, report, history })
    }
}

#[derive(Debug, Clone)]
pub struct SlidingRun {
    pub beliefs: BeliefSet,
    pub messages: WindowMessages,
    pub report: RunReport,
    pub history: Vec<BeliefSet>,
}

/// Sliding-window run on a chain or ring.
pub fn run_sliding(h: &HamiltonianDecomposition, beta: f64, ell: usize, opts: &QbpOptions) -> Result<(SlidingWindow, SlidingRun)> {
    let sw = SlidingWindow::new(h, beta, ell)?;
    let run = sw.run(opts)?;
    Ok((sw, run))
}

/// Energy density of the translation-invariant infinite line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineEnergy {
    pub energy: f64,
    pub iterations: usize,
    pub damping: f64,
    pub final_delta: f64,
}

/// Iteration budget of the infinite-line fixed point when none is given.
pub const LINE_MAX_ITERATIONS: usize = 2000;

/// Energy density on the infinite line: one right-moving and one
/// left-moving window message are iterated to a fixed point, then the bulk
/// pair belief is read off a block of `ℓ + 1` sites. Undamped
/// iteration is retried with damping ½ if it fails to converge.
pub fn infinite_line_energy(spec: &ModelSpec, beta: f64, ell: usize, opts: &QbpOptions) -> Result<LineEnergy> {
    if let ModelSpec::Ising { j: Couplings::PerEdge(_), .. } = spec {
        return Err(Error::InvalidModel("the infinite line needs uniform couplings".into()));
    }
    opts.validate()?;
    let len = (ell + 1).max(2);
    let h = build_hamiltonian(&chain(len)?, spec)?;
    let sw = SlidingWindow::new(&h, beta, ell)?;
    let budget = opts.max_rounds.unwrap_or(LINE_MAX_ITERATIONS);
    let mut last = None;
    for damping in [opts.damping, 0.5] {
        match line_fixed_point(&sw, len, budget, damping, opts.tolerance) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
        if opts.damping == 0.5 {
            break;
        }
    }
    Err(last.expect("at least one attempt"))
}

fn line_fixed_point(sw: &SlidingWindow, len: usize, budget: usize, damping: f64, tol: f64) -> Result<LineEnergy> {
    let ell = sw.ell;
    let all: Vec<usize> = (0..=ell).collect();
    // right-moving: 0 traced, run 1..=ℓ; left-moving: ℓ traced, run 0..ℓ
    let right_run: Vec<usize> = (1..=ell).collect();
    let left_run: Vec<usize> = (0..ell).collect();
    let wr = sw.generator(&all, &all[..ell])?;
    let or = sw.generator(&right_run, &right_run[..ell - 1])?;
    let wl = sw.generator(&all, &all[1..])?;
    let ol = sw.generator(&left_run, &left_run[1..])?;
    let shifted = |m: &LabeledOperator, run: &[usize]| m.relabel(qubits(run));
    let step = |w: &LabeledOperator, o: &LabeledOperator, m: &LabeledOperator, feed: &[usize], traced: usize| {
        let new = window_message(w, o, Some(&shifted(m, feed)?), traced)?;
        if damping == 0.0 {
            Ok::<_, Error>(new)
        } else {
            new.scale(C64::new(1.0 - damping, 0.0)).add(&m.scale(C64::new(damping, 0.0)))?.normalized()
        }
    };
    let mut mr = LabeledOperator::maximally_mixed(qubits(&right_run))?;
    let mut ml = LabeledOperator::maximally_mixed(qubits(&left_run))?;
    let mut delta = f64::INFINITY;
    for k in 1..=budget {
        let nr = step(&wr, &or, &mr, &left_run, 0)?;
        let nl = step(&wl, &ol, &ml, &right_run, ell)?;
        delta = trace_distance(&nr, &mr)?.max(trace_distance(&nl, &ml)?);
        mr = nr;
        ml = nl;
        if delta < tol {
            let block: Vec<usize> = (0..len).collect();
            let mut g = sw.generator(&block, &block)?;
            g = add_log(g, Some(&shifted(&mr, &block[..ell])?))?;
            g = add_log(g, Some(&shifted(&ml, &block[len - ell..])?))?;
            let state = expm(&g)?.normalized()?;
            let c = (len - 2) / 2;
            let b = state.reduce_to(&[c, c + 1])?;
            let e = b.trace_with_local(&sw.h.edge_energy(c, c + 1)?)?.re;
            return Ok(LineEnergy { energy: e, iterations: k, damping, final_delta: delta });
        }
    }
    Err(Error::FixedPoint { rounds: budget, delta })
}
