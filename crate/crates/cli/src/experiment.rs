//! Resolution of configs into runnable experiments and evaluation of one
//! grid point.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use qbp::engine::{BeliefSet, QbpOptions, RunReport};
use qbp::model::{
    build_hamiltonian, chain, complete, ladder, merge_vertices, pair_partition, read_edge_list, ring, thermal_bifactor,
    torus, BifactorModel, Couplings, Graph, HamiltonianDecomposition, ModelSpec,
};
use qbp::operator::LabeledOperator;
use qbp::oracle::{error_metric, zz_profile_from_state, CorrelationProfile, GibbsOracle, MAX_ORACLE_SPINS};
use qbp::replica::{replicate_model, run_replica, trotter_state, Estimator};
use qbp::sliding::{infinite_line_energy, run_sliding, LineEnergy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigError, CouplingConfig, EstimatorKind, ExperimentConfig, GraphConfig, MethodKind, ModelKind};

#[derive(Debug, Clone)]
pub enum Lattice {
    Finite(Graph),
    InfiniteChain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    PlainQbp(QbpOptions),
    Replica { n_tau: u32, estimator: Estimator, opts: QbpOptions },
    Sliding { ell: usize, opts: QbpOptions },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::PlainQbp(_) => "plain_qbp",
            Method::Replica { .. } => "replica",
            Method::Sliding { .. } => "sliding",
        }
    }

    pub fn n_tau(&self) -> Option<u32> {
        match self {
            Method::Replica { n_tau, .. } => Some(*n_tau),
            _ => None,
        }
    }

    pub fn ell(&self) -> Option<usize> {
        match self {
            Method::Sliding { ell, .. } => Some(*ell),
            _ => None,
        }
    }
}

/// A validated experiment at unspecified `β`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model_kind: ModelKind,
    pub spec: ModelSpec,
    pub lattice: Lattice,
    pub graph_id: String,
    pub method: Method,
    pub correlation: Option<(usize, Vec<usize>)>,
    pub energy_density: bool,
    /// Vertex groups merged before message passing, if any.
    pub merge: Option<Vec<Vec<usize>>>,
}

/// Numerical failure of a grid point.
#[derive(Debug, thiserror::Error)]
#[error("{context}: {source}")]
pub struct RunError {
    pub context: String,
    #[source]
    pub source: qbp::Error,
}

fn options(c: &crate::config::MethodConfig) -> QbpOptions {
    let d = QbpOptions::default();
    QbpOptions {
        tolerance: c.tolerance.unwrap_or(d.tolerance),
        max_rounds: c.max_rounds.or(d.max_rounds),
        damping: c.damping.unwrap_or(d.damping),
    }
}

fn random_tree(n: usize, seed: u64) -> qbp::Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    Graph::new(n, &edges)
}

/// Edges leaving a merged group towards different groups touch disjoint
/// sites of it, so the merged edge operators commute.
fn pairs_commute(graph: &Graph, partition: &[Vec<usize>]) -> bool {
    let mut group = vec![0; graph.num_vertices()];
    for (k, p) in partition.iter().enumerate() {
        for &v in p {
            group[v] = k;
        }
    }
    partition.iter().enumerate().all(|(k, members)| {
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        members.iter().all(|&v| {
            graph.neighbors(v).iter().filter(|&&w| group[w] != k).all(|&w| *owner.entry(v).or_insert(group[w]) == group[w])
        })
    })
}

impl Experiment {
    /// Builds the graph and checks everything that depends on it.
    pub fn from_config(c: &ExperimentConfig) -> Result<Self, Vec<ConfigError>> {
        let graph_err = |e: qbp::Error| vec![ConfigError::new("graph", e.to_string())];
        let mut file_couplings = None;
        let (lattice, graph_id) = match &c.graph {
            GraphConfig::Chain { n } => (Lattice::Finite(chain(*n).map_err(graph_err)?), format!("chain({n})")),
            GraphConfig::Ring { n } => (Lattice::Finite(ring(*n).map_err(graph_err)?), format!("ring({n})")),
            GraphConfig::Ladder { rows, cols } => {
                (Lattice::Finite(ladder(*rows, *cols).map_err(graph_err)?), format!("ladder({rows}x{cols})"))
            }
            GraphConfig::Torus { rows, cols } => {
                (Lattice::Finite(torus(*rows, *cols).map_err(graph_err)?), format!("torus({rows}x{cols})"))
            }
            GraphConfig::Complete { n } => (Lattice::Finite(complete(*n).map_err(graph_err)?), format!("complete({n})")),
            GraphConfig::RandomTree { n } => {
                if *n == 0 {
                    return Err(vec![ConfigError::new("graph.n", "must be at least 1")]);
                }
                (Lattice::Finite(random_tree(*n, c.seed).map_err(graph_err)?), format!("random_tree({n};seed={})", c.seed))
            }
            GraphConfig::EdgeList { path } => {
                let el = read_edge_list(path).map_err(|e| vec![ConfigError::new("graph.path", e.to_string())])?;
                file_couplings = Some(el.couplings);
                let stem = path.file_stem().map(|s| s.to_string_lossy().replace(',', "_")).unwrap_or_default();
                (Lattice::Finite(el.graph), format!("edge_list({stem})"))
            }
            GraphConfig::InfiniteChain => (Lattice::InfiniteChain, "infinite_chain".to_string()),
        };

        let spec = match c.model.kind {
            ModelKind::Heisenberg => ModelSpec::Heisenberg,
            ModelKind::Ising => {
                let g = c.model.g.unwrap_or([0.5, 0.0, 0.0]);
                let j = match (&c.model.j, file_couplings) {
                    (Some(CouplingConfig::Uniform(j)), _) => Couplings::Uniform(*j),
                    (Some(CouplingConfig::PerEdge(list)), _) => {
                        let Lattice::Finite(graph) = &lattice else { unreachable!("rejected by validation") };
                        let mut map = BTreeMap::new();
                        for (k, &(u, v, j)) in list.iter().enumerate() {
                            if !graph.has_edge(u, v) {
                                return Err(vec![ConfigError::new(format!("model.J[{k}]"), format!("({u}, {v}) is not an edge"))]);
                            }
                            map.insert((u.min(v), u.max(v)), j);
                        }
                        Couplings::PerEdge(map)
                    }
                    (None, Some(map)) => Couplings::PerEdge(map),
                    (None, None) => Couplings::Uniform(1.0),
                };
                ModelSpec::Ising { g, j }
            }
        };

        let m = &c.method;
        let method = match m.kind {
            MethodKind::Exact => Method::Exact,
            MethodKind::PlainQbp => Method::PlainQbp(options(m)),
            MethodKind::Replica => Method::Replica {
                n_tau: m.n_tau.unwrap_or(1),
                estimator: match m.estimator.unwrap_or_default() {
                    EstimatorKind::Path => Estimator::Path,
                    EstimatorKind::Clamped => Estimator::Clamped,
                },
                opts: options(m),
            },
            MethodKind::Sliding => Method::Sliding { ell: m.ell.unwrap_or(1), opts: options(m) },
        };

        let mut errs = Vec::new();
        let mut correlation = None;
        let mut merge = None;
        if let Lattice::Finite(graph) = &lattice {
            let n = graph.num_vertices();
            if !graph.is_connected() {
                errs.push(ConfigError::new("graph", "the graph must be connected"));
            }
            if let Some(corr) = &c.observables.correlation {
                let targets = corr.targets.clone().unwrap_or_else(|| (0..n).collect());
                if corr.anchor >= n {
                    errs.push(ConfigError::new("observables.correlation.anchor", format!("vertex {} out of range 0..{n}", corr.anchor)));
                }
                for (k, &t) in targets.iter().enumerate() {
                    if t >= n {
                        errs.push(ConfigError::new(
                            format!("observables.correlation.targets[{k}]"),
                            format!("vertex {t} out of range 0..{n}"),
                        ));
                    } else if matches!(method, Method::PlainQbp(_)) && t != corr.anchor && !graph.has_edge(corr.anchor, t) {
                        errs.push(ConfigError::new(
                            format!("observables.correlation.targets[{k}]"),
                            format!("plain_qbp reads correlations off pair beliefs; {t} is not a neighbour of the anchor"),
                        ));
                    }
                }
                correlation = Some((corr.anchor, targets));
            }
            if let Method::Sliding { ell, .. } = method {
                if matches!(c.graph, GraphConfig::Ring { .. }) && ell + 2 > n {
                    errs.push(ConfigError::new("method.ell", format!("ell = {ell} needs a ring of at least {} sites", ell + 2)));
                }
            }
            if matches!(method, Method::Replica { .. }) && c.model.kind == ModelKind::Heisenberg {
                match pair_partition(graph).filter(|p| pairs_commute(graph, p)) {
                    Some(p) => merge = Some(p),
                    None => errs.push(ConfigError::new(
                        "graph",
                        "Heisenberg replicas merge consecutive vertex pairs, and the merged edges must touch disjoint \
                         sites of each pair; this graph has no such pairing (chains, even rings and complete(4) do)",
                    )),
                }
            }
        }
        if !errs.is_empty() {
            return Err(errs);
        }
        Ok(Experiment {
            model_kind: c.model.kind,
            spec,
            lattice,
            graph_id,
            method,
            correlation,
            energy_density: c.observables.energy_density,
            merge,
        })
    }

    pub fn num_sites(&self) -> Option<usize> {
        match &self.lattice {
            Lattice::Finite(g) => Some(g.num_vertices()),
            Lattice::InfiniteChain => None,
        }
    }

    /// The dense oracle fits the cap.
    pub fn oracle_feasible(&self) -> bool {
        self.num_sites().is_some_and(|n| n <= MAX_ORACLE_SPINS && (1usize << n) <= qbp::cap::dense_cap())
    }

    fn cache_key(&self) -> String {
        format!("{}|{:?}", self.graph_id, self.spec)
    }
}

/// Dense oracles shared across grid points of the same system.
#[derive(Default)]
pub struct OracleCache {
    slots: Mutex<HashMap<String, Arc<OnceLock<Arc<GibbsOracle>>>>>,
}

impl OracleCache {
    fn get(&self, exp: &Experiment, h: &HamiltonianDecomposition) -> qbp::Result<Arc<GibbsOracle>> {
        let slot = self.slots.lock().expect("oracle cache poisoned").entry(exp.cache_key()).or_default().clone();
        if let Some(o) = slot.get() {
            return Ok(o.clone());
        }
        let oracle = Arc::new(GibbsOracle::new(h)?);
        Ok(slot.get_or_init(|| oracle).clone())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    /// Error metric of the method against the Gibbs state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
    /// Gibbs state against the Trotter state (replica only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_only: Option<f64>,
    /// Trotter state against replica message passing (replica only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_only: Option<f64>,
    /// Absolute energy-density error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

/// Everything computed at one `β`.
#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub beta: f64,
    pub converged: bool,
    /// Telemetry of the main message-passing run.
    pub run: Option<RunReport>,
    /// For clamped replica profiles, the maximum over all runs involved.
    pub fluctuation_magnitude: Option<f64>,
    pub correlations: Option<CorrelationProfile>,
    pub exact_correlations: Option<CorrelationProfile>,
    pub energy_density: Option<f64>,
    pub exact_energy_density: Option<f64>,
    pub error: Option<ErrorReport>,
    pub line: Option<LineEnergy>,
}

impl PointResult {
    fn new(beta: f64) -> Self {
        PointResult {
            beta,
            converged: true,
            run: None,
            fluctuation_magnitude: None,
            correlations: None,
            exact_correlations: None,
            energy_density: None,
            exact_energy_density: None,
            error: None,
            line: None,
        }
    }
}

/// Energy per site from pair beliefs that jointly cover every edge.
pub fn energy_from_beliefs(h: &HamiltonianDecomposition, beliefs: &BeliefSet) -> qbp::Result<f64> {
    let containing = |labels: &[usize]| -> qbp::Result<LabeledOperator> {
        let b = beliefs
            .iter()
            .map(|(_, b)| b)
            .find(|b| labels.iter().all(|l| b.support().iter().any(|s| s.label == *l)))
            .ok_or_else(|| qbp::Error::InvalidArgument(format!("no belief covers sites {labels:?}")))?;
        b.reduce_to(labels)
    };
    let expect = |term: &LabeledOperator| -> qbp::Result<f64> {
        let rho = containing(&term.labels())?;
        Ok(rho.trace_product(term)?.re / rho.trace().re)
    };
    let mut e = 0.0;
    for term in h.two_site.values() {
        e += expect(term)?;
    }
    for term in &h.single_site {
        if term.max_abs() > 0.0 {
            e += expect(term)?;
        }
    }
    Ok(e / h.num_sites() as f64)
}

fn pair_profile(beliefs: &BeliefSet, anchor: usize, targets: &[usize], beta: f64) -> qbp::Result<CorrelationProfile> {
    let mut values = BTreeMap::new();
    for &t in targets {
        let labels: Vec<usize> = if t == anchor { vec![anchor] } else { vec![anchor, t] };
        let b = beliefs
            .iter()
            .map(|(_, b)| b)
            .find(|b| labels.iter().all(|l| b.support().iter().any(|s| s.label == *l)))
            .ok_or_else(|| qbp::Error::InvalidArgument(format!("no belief covers sites {labels:?}")))?;
        let rho = b.reduce_to(&labels)?;
        let p = zz_profile_from_state(&rho, anchor, &[t], beta, "")?;
        values.insert(t, p.values[&t]);
    }
    Ok(CorrelationProfile { anchor, beta, values, descriptor: "plain_qbp".into() })
}

fn numerical(exp: &Experiment, beta: f64, what: &str) -> impl Fn(qbp::Error) -> RunError {
    let context = format!("{} on {} at beta = {beta} ({what})", exp.method.name(), exp.graph_id);
    move |source| RunError { context: context.clone(), source }
}

/// Evaluates one grid point. Non-convergence is reported, not an error.
pub fn run_point(exp: &Experiment, beta: f64, cache: &OracleCache) -> Result<PointResult, RunError> {
    let mut out = PointResult::new(beta);
    let Lattice::Finite(graph) = &exp.lattice else {
        return run_line(exp, beta);
    };
    let h = build_hamiltonian(graph, &exp.spec).map_err(numerical(exp, beta, "model"))?;
    let oracle = if exp.oracle_feasible() || matches!(exp.method, Method::Exact) {
        Some(cache.get(exp, &h).map_err(numerical(exp, beta, "dense oracle"))?)
    } else {
        None
    };
    if let Some(o) = &oracle {
        if let Some((a, t)) = &exp.correlation {
            out.exact_correlations = Some(o.correlations(beta, *a, t).map_err(numerical(exp, beta, "dense oracle"))?);
        }
        if exp.energy_density {
            out.exact_energy_density = Some(o.energy(beta) / graph.num_vertices() as f64);
        }
    }

    let base = || -> Result<BifactorModel, RunError> {
        let m = thermal_bifactor(&h, beta).map_err(numerical(exp, beta, "thermal model"))?;
        match &exp.merge {
            Some(p) => merge_vertices(&m, p).map_err(numerical(exp, beta, "pair merge")),
            None => Ok(m),
        }
    };
    let mut ts_profile = None;
    match exp.method {
        Method::Exact => {
            out.correlations = out.exact_correlations.clone();
            out.energy_density = out.exact_energy_density;
        }
        Method::PlainQbp(opts) => {
            let run = qbp::engine::run_qbp(&base()?, &opts).map_err(numerical(exp, beta, "message passing"))?;
            if let Some((a, t)) = &exp.correlation {
                out.correlations = Some(pair_profile(&run.beliefs, *a, t, beta).map_err(numerical(exp, beta, "beliefs"))?);
            }
            if exp.energy_density {
                out.energy_density = Some(energy_from_beliefs(&h, &run.beliefs).map_err(numerical(exp, beta, "energy"))?);
            }
            out.converged = run.report.converged;
            out.fluctuation_magnitude = run.report.fluctuation_magnitude;
            out.run = Some(run.report);
        }
        Method::Replica { n_tau, estimator, opts } => {
            let base = base()?;
            let rm = replicate_model(&base, n_tau).map_err(numerical(exp, beta, "replication"))?;
            let run = run_replica(&rm, &opts).map_err(numerical(exp, beta, "message passing"))?;
            out.converged = run.report.converged;
            out.fluctuation_magnitude = run.report.fluctuation_magnitude;
            if let Some((a, t)) = &exp.correlation {
                let rp = rm.profile(estimator, &run.messages, *a, t, &opts).map_err(numerical(exp, beta, "correlations"))?;
                out.converged = rp.converged(&run);
                out.fluctuation_magnitude = rp.fluctuation_magnitude(&run);
                out.correlations = Some(rp.profile);
                if oracle.is_some() {
                    let ts = trotter_state(&base, n_tau).map_err(numerical(exp, beta, "Trotter state"))?;
                    ts_profile = Some(zz_profile_from_state(&ts, *a, t, beta, "trotter").map_err(numerical(exp, beta, "Trotter state"))?);
                }
            }
            if exp.energy_density {
                out.energy_density = Some(energy_from_beliefs(&h, &run.beliefs).map_err(numerical(exp, beta, "energy"))?);
            }
            out.run = Some(run.report);
        }
        Method::Sliding { ell, opts } => {
            let (sw, run) = run_sliding(&h, beta, ell, &opts).map_err(numerical(exp, beta, "sliding window"))?;
            if let Some((a, t)) = &exp.correlation {
                out.correlations = Some(sw.zz_profile(&run.messages, *a, t).map_err(numerical(exp, beta, "correlations"))?);
            }
            if exp.energy_density {
                let beliefs = sw.beliefs(&run.messages).map_err(numerical(exp, beta, "beliefs"))?;
                out.energy_density = Some(energy_from_beliefs(&h, &beliefs).map_err(numerical(exp, beta, "energy"))?);
            }
            out.converged = run.report.converged;
            out.fluctuation_magnitude = run.report.fluctuation_magnitude;
            out.run = Some(run.report);
        }
    }

    if oracle.is_some() && !matches!(exp.method, Method::Exact) {
        let metric = |a: &Option<CorrelationProfile>, b: &Option<CorrelationProfile>| match (a, b) {
            (Some(a), Some(b)) => error_metric(a, b).ok(),
            _ => None,
        };
        out.error = Some(ErrorReport {
            total: metric(&out.exact_correlations, &out.correlations),
            ts_only: metric(&out.exact_correlations, &ts_profile),
            loop_only: metric(&ts_profile, &out.correlations),
            energy: out.energy_density.zip(out.exact_energy_density).map(|(a, b)| (a - b).abs()),
        });
    }
    Ok(out)
}

fn run_line(exp: &Experiment, beta: f64) -> Result<PointResult, RunError> {
    let mut out = PointResult::new(beta);
    let Method::Sliding { ell, opts } = exp.method else {
        unreachable!("rejected by validation")
    };
    match infinite_line_energy(&exp.spec, beta, ell, &opts) {
        Ok(line) => {
            out.energy_density = Some(line.energy);
            out.line = Some(line);
        }
        Err(qbp::Error::FixedPoint { .. }) => out.converged = false,
        Err(e) => return Err(numerical(exp, beta, "infinite line")(e)),
    }
    if let ModelSpec::Ising { g: [gx, 0.0, 0.0], j: Couplings::Uniform(j) } = exp.spec {
        let exact = qbp::oracle::free_fermion_energy(gx, j, beta).map_err(numerical(exp, beta, "free fermions"))?;
        out.exact_energy_density = Some(exact);
        out.error = Some(ErrorReport {
            total: None,
            ts_only: None,
            loop_only: None,
            energy: out.energy_density.map(|e| (e - exact).abs()),
        });
    }
    Ok(out)
}
