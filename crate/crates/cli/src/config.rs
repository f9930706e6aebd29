//! Declarative experiment description and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub graph: GraphConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("qbp-out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ising,
    Heisenberg,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Field vector `(g_x, g_y, g_z)`; Ising only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<[f64; 3]>,
    /// Uniform coupling or a list of `[u, v, J]`; Ising only.
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CouplingConfig {
    Uniform(f64),
    PerEdge(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Chain { n: usize },
    Ring { n: usize },
    Ladder { rows: usize, cols: usize },
    Torus { rows: usize, cols: usize },
    Complete { n: usize },
    /// Edge-list file, relative paths resolved against the config file.
    EdgeList { path: PathBuf },
    /// Uniform tree drawn from the experiment seed.
    RandomTree { n: usize },
    /// Translation-invariant infinite line; sliding-window energy only.
    InfiniteChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Replica,
    Sliding,
    PlainQbp,
    Exact,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Replica => "replica",
            MethodKind::Sliding => "sliding",
            MethodKind::PlainQbp => "plain_qbp",
            MethodKind::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Path,
    #[default]
    Clamped,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tau: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorKind>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub anchor: usize,
    /// Defaults to every vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
    #[serde(default)]
    pub energy_density: bool,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        ObservablesConfig { correlation: Some(CorrelationConfig { anchor: 0, targets: None }), energy_density: false }
    }
}

/// A config problem tied to a field path such as `method.n_tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into(), line: None, column: None }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

/// Errors of one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors {
    pub source: String,
    pub errors: Vec<ConfigError>,
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.errors.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {e}", self.source)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Parses JSON text; type errors carry the field path and position.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." { String::new() } else { path };
        ConfigError { field, message: strip_position(&inner.to_string()), line: Some(inner.line()), column: Some(inner.column()) }
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}

/// Reads, parses and validates a config file. Relative edge-list paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigErrors> {
    let source = path.display().to_string();
    let fail = |errors| ConfigErrors { source: source.clone(), errors };
    let text = std::fs::read_to_string(path).map_err(|e| fail(vec![ConfigError::new("", format!("cannot read: {e}"))]))?;
    let mut config = parse_config(&text).map_err(|e| fail(vec![e]))?;
    if let GraphConfig::EdgeList { path: p } = &mut config.graph {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    let mut errors = config.validate();
    for e in &mut errors {
        if e.line.is_none() {
            e.line = locate_field(&text, &e.field);
        }
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(fail(errors))
    }
}

/// Line of the first occurrence of the last key of a field path.
fn locate_field(text: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next().filter(|k| !k.is_empty())?;
    let key = key.split('[').next()?;
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|k| k + 1)
}

impl ExperimentConfig {
    pub fn betas(&self) -> Vec<f64> {
        match (&self.model.beta, &self.model.beta_sweep) {
            (Some(b), _) => vec![*b],
            (None, Some(s)) => s.clone(),
            (None, None) => vec![],
        }
    }

    /// Structural checks; an empty list means the config is runnable.
    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let mut err = |f: &str, m: String| errs.push(ConfigError::new(f, m));
        let m = &self.model;
        let method = &self.method;
        let kind = method.kind;

        match (&m.beta, &m.beta_sweep) {
            (Some(_), Some(_)) => err("model.beta_sweep", "give either model.beta or model.beta_sweep, not both".into()),
            (None, None) => err("model.beta", "one of model.beta or model.beta_sweep is required".into()),
            (None, Some(s)) if s.is_empty() => err("model.beta_sweep", "must not be empty".into()),
            _ => {}
        }
        for (k, b) in self.betas().iter().enumerate() {
            if !(b.is_finite() && *b >= 0.0) {
                let f = if m.beta.is_some() { "model.beta".to_string() } else { format!("model.beta_sweep[{k}]") };
                err(&f, format!("beta must be finite and >= 0, got {b}"));
            }
        }
        if m.kind == ModelKind::Heisenberg {
            if m.g.is_some() {
                err("model.g", "only valid with model.kind = \"ising\"".into());
            }
            if m.j.is_some() {
                err("model.J", "only valid with model.kind = \"ising\"".into());
            }
        }
        if let Some(g) = &m.g {
            if g.iter().any(|x| !x.is_finite()) {
                err("model.g", "entries must be finite".into());
            }
        }
        match &m.j {
            Some(CouplingConfig::Uniform(j)) if !j.is_finite() => err("model.J", "must be finite".into()),
            Some(CouplingConfig::PerEdge(list)) => {
                if list.iter().any(|(_, _, j)| !j.is_finite()) {
                    err("model.J", "couplings must be finite".into());
                }
                if matches!(self.graph, GraphConfig::InfiniteChain) {
                    err("model.J", "the infinite chain needs a uniform coupling".into());
                }
            }
            _ => {}
        }

        let conflict = |field: &str, wanted: &str| {
            format!("{field} is only valid with method.kind = \"{wanted}\" (method.kind is \"{}\")", kind.name())
        };
        if method.n_tau.is_some() && kind != MethodKind::Replica {
            err("method.n_tau", conflict("method.n_tau", "replica"));
        }
        if method.estimator.is_some() && kind != MethodKind::Replica {
            err("method.estimator", conflict("method.estimator", "replica"));
        }
        if method.ell.is_some() && kind != MethodKind::Sliding {
            err("method.ell", conflict("method.ell", "sliding"));
        }
        match kind {
            MethodKind::Replica => match method.n_tau {
                None => err("method.n_tau", "required with method.kind = \"replica\"".into()),
                Some(0) => err("method.n_tau", "must be at least 1".into()),
                _ => {}
            },
            MethodKind::Sliding => match method.ell {
                None => err("method.ell", "required with method.kind = \"sliding\"".into()),
                Some(0) => err("method.ell", "must be at least 1".into()),
                _ => {}
            },
            MethodKind::Exact => {
                for (f, set) in [
                    ("method.tolerance", method.tolerance.is_some()),
                    ("method.max_rounds", method.max_rounds.is_some()),
                    ("method.damping", method.damping.is_some()),
                ] {
                    if set {
                        err(f, "not used by method.kind = \"exact\"".into());
                    }
                }
            }
            MethodKind::PlainQbp => {}
        }
        if let Some(t) = method.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                err("method.tolerance", format!("must be positive, got {t}"));
            }
        }
        if let Some(d) = method.damping {
            if !(0.0..1.0).contains(&d) {
                err("method.damping", format!("must lie in [0, 1), got {d}"));
            }
        }
        if method.max_rounds == Some(0) {
            err("method.max_rounds", "must be at least 1".into());
        }

        let obs = &self.observables;
        if obs.correlation.is_none() && !obs.energy_density {
            err("observables", "request a correlation profile or energy_density".into());
        }
        match &self.graph {
            GraphConfig::InfiniteChain => {
                if kind != MethodKind::Sliding {
                    err("graph.kind", "graph.kind = \"infinite_chain\" needs method.kind = \"sliding\"".into());
                }
                if obs.correlation.is_some() {
                    err("observables.correlation", "the infinite chain reports energy_density only".into());
                }
            }
            GraphConfig::Chain { .. } | GraphConfig::Ring { .. } => {}
            _ if kind == MethodKind::Sliding => {
                err("graph.kind", "method.kind = \"sliding\" needs a chain, ring or infinite_chain graph".into())
            }
            _ => {}
        }
        errs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> &'static str {
        r#"{
  "model": {"kind": "ising", "g": [0.5, 0, 0], "J": 1, "beta": 1},
  "graph": {"kind": "ring", "n": 5},
  "method": {"kind": "exact"},
  "observables": {"correlation": {"anchor": 0, "targets": [0, 1, 2]}}
}"#
    }

    #[test]
    fn parses_a_minimal_config() {
        let c = parse_config(base()).unwrap();
        assert_eq!(c.graph, GraphConfig::Ring { n: 5 });
        assert_eq!(c.model.j, Some(CouplingConfig::Uniform(1.0)));
        assert_eq!(c.output, PathBuf::from("qbp-out"));
        assert!(c.validate().is_empty());
    }

    #[test]
    fn per_edge_couplings_parse() {
        let text = base().replace("\"J\": 1", "\"J\": [[0, 1, 0.5], [1, 2, -1]]");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.model.j, Some(CouplingConfig::PerEdge(vec![(0, 1, 0.5), (1, 2, -1.0)])));
    }

    #[test]
    fn type_errors_name_the_field_and_line() {
        let text = base().replace("\"n\": 5", "\"n\": \"five\"");
        let e = parse_config(&text).unwrap_err();
        // tagged enums are buffered, so the path stops at the enum
        assert_eq!(e.field, "graph");
        assert!(e.message.contains("five"), "{}", e.message);
        assert_eq!(e.line, Some(3));
        let e = parse_config(&base().replace("\"beta\"", "\"betta\"")).unwrap_err();
        assert!(e.message.contains("unknown field `betta`"), "{}", e.message);
        assert_eq!(e.field, "model.betta");
    }

    #[test]
    fn n_tau_with_sliding_names_both_fields() {
        let text = base().replace("{\"kind\": \"exact\"}", "{\"kind\": \"sliding\", \"ell\": 2, \"n_tau\": 3}");
        let errs = parse_config(&text).unwrap().validate();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "method.n_tau");
        assert!(errs[0].message.contains("method.kind"));
        assert!(locate_field(&text, &errs[0].field) == Some(4));
    }

    #[test]
    fn negative_beta_and_missing_parameters_are_rejected() {
        let text = base().replace("\"beta\": 1", "\"beta_sweep\": [1, -2]");
        let errs = parse_config(&text).unwrap().validate();
        assert_eq!(errs[0].field, "model.beta_sweep[1]");
        let text = base().replace("{\"kind\": \"exact\"}", "{\"kind\": \"replica\"}");
        assert_eq!(parse_config(&text).unwrap().validate()[0].field, "method.n_tau");
        let text = base().replace("\"ring\", \"n\": 5", "\"ladder\", \"rows\": 2, \"cols\": 3").replace(
            "{\"kind\": \"exact\"}",
            "{\"kind\": \"sliding\", \"ell\": 2}",
        );
        assert_eq!(parse_config(&text).unwrap().validate()[0].field, "graph.kind");
    }

    #[test]
    fn heisenberg_takes_no_field_or_coupling() {
        let text = base().replace("\"ising\"", "\"heisenberg\"");
        let fields: Vec<String> = parse_config(&text).unwrap().validate().into_iter().map(|e| e.field).collect();
        assert_eq!(fields, ["model.g", "model.J"]);
    }
}
