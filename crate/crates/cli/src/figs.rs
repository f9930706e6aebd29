//! Figure sweeps at desk scale.
//!
//! | name | sweep |
//! |---|---|
//! | `line` | infinite critical Ising line, sliding windows `ℓ ∈ {2, 4, 6}` and the free-fermion energy, `β ∈ {0.5, 1, …, 3}` |
//! | `circle` | `ring(11)`, `β ∈ {1, …, 6}`: exact, sliding `ℓ = 5`, replica `N_τ ∈ {2, …, 5}` |
//! | `loopsize` | rings of 3 to 11 sites, replica `N_τ = 4`, one curve per `β ∈ {1, 2, 3}` |
//! | `graphs` | Ising on `ladder(2x3)`, `torus(3x3)`, `complete(4)` with `N_τ ∈ {3, 4}` at `β = 2`; Heisenberg on `ring(6)`, `complete(4)` with merged pairs and `N_τ ∈ {2, 3}` at `β = 1` |
//!
//! `--beta-max` drops grid values above it; fixed-`β` sweeps use
//! `min(β, beta_max)`.

use std::path::Path;

use clap::ValueEnum;
use qbp::engine::QbpOptions;
use qbp::model::{complete, ladder, pair_partition, ring, torus, Graph, ModelSpec};
use qbp::oracle::free_fermion_energy;
use qbp::replica::Estimator;
use serde::Serialize;

use crate::config::ModelKind;
use crate::experiment::{Experiment, Lattice, Method};
use crate::output::{self, Row};
use crate::{evaluate, CliError, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FigName {
    Line,
    Circle,
    Loopsize,
    Graphs,
}

/// Points sharing one CSV.
pub struct Curve {
    pub file: String,
    pub description: String,
    pub points: Vec<(Experiment, f64)>,
}

fn ising(graph: Graph, id: String, method: Method, energy: bool) -> Experiment {
    let n = graph.num_vertices();
    Experiment {
        model_kind: ModelKind::Ising,
        spec: ModelSpec::critical_ising(),
        lattice: Lattice::Finite(graph),
        graph_id: id,
        method,
        correlation: Some((0, (0..n).collect())),
        energy_density: energy,
        merge: None,
    }
}

fn replica(n_tau: u32) -> Method {
    Method::Replica { n_tau, estimator: Estimator::Clamped, opts: QbpOptions::default() }
}

fn grid(values: &[f64], beta_max: Option<f64>) -> Vec<f64> {
    values.iter().copied().filter(|&b| beta_max.is_none_or(|m| b <= m)).collect()
}

fn fixed(beta: f64, beta_max: Option<f64>) -> f64 {
    beta_max.map_or(beta, |m| beta.min(m))
}

/// Curves of a figure; the `line` figure's free-fermion reference is added
/// separately by [`run_fig`].
pub fn curves(name: FigName, beta_max: Option<f64>) -> qbp::Result<Vec<Curve>> {
    let mut out = Vec::new();
    match name {
        FigName::Line => {
            let betas = grid(&[0.5, 1.0, 1.5, 2.0, 2.5, 3.0], beta_max);
            for ell in [2, 4, 6] {
                let exp = Experiment {
                    model_kind: ModelKind::Ising,
                    spec: ModelSpec::critical_ising(),
                    lattice: Lattice::InfiniteChain,
                    graph_id: "infinite_chain".into(),
                    method: Method::Sliding { ell, opts: QbpOptions::default() },
                    correlation: None,
                    energy_density: true,
                    merge: None,
                };
                out.push(Curve {
                    file: format!("line_ell{ell}.csv"),
                    description: format!("sliding window l = {ell}, energy density of the infinite line"),
                    points: betas.iter().map(|&b| (exp.clone(), b)).collect(),
                });
            }
        }
        FigName::Circle => {
            let betas = grid(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], beta_max);
            let mut add = |file: String, description: String, method: Method| {
                let exp = ising(ring(11)?, "ring(11)".into(), method, false);
                out.push(Curve { file, description, points: betas.iter().map(|&b| (exp.clone(), b)).collect() });
                Ok::<(), qbp::Error>(())
            };
            add("circle_exact.csv".into(), "dense Gibbs correlations C(0, j)".into(), Method::Exact)?;
            add(
                "circle_sliding_ell5.csv".into(),
                "sliding window l = 5".into(),
                Method::Sliding { ell: 5, opts: QbpOptions::default() },
            )?;
            for n in 2..=5 {
                add(format!("circle_replica_ntau{n}.csv"), format!("replica N_tau = {n}"), replica(n))?;
            }
        }
        FigName::Loopsize => {
            for beta in grid(&[1.0, 2.0, 3.0], beta_max) {
                let points = (3..=11)
                    .map(|n| Ok((ising(ring(n)?, format!("ring({n})"), replica(4), false), beta)))
                    .collect::<qbp::Result<_>>()?;
                out.push(Curve {
                    file: format!("loopsize_beta{beta}.csv"),
                    description: format!("replica N_tau = 4 error against ring size at beta = {beta}"),
                    points,
                });
            }
        }
        FigName::Graphs => {
            let beta = fixed(2.0, beta_max);
            let graphs = [
                (ladder(2, 3)?, "ladder(2x3)"),
                (torus(3, 3)?, "torus(3x3)"),
                (complete(4)?, "complete(4)"),
            ];
            for (g, id) in graphs {
                let points = [3, 4].iter().map(|&n| (ising(g.clone(), id.into(), replica(n), true), beta)).collect();
                out.push(Curve {
                    file: format!("graphs_ising_{}.csv", file_id(id)),
                    description: format!("critical Ising on {id}, replica N_tau = 3, 4"),
                    points,
                });
            }
            let beta = fixed(1.0, beta_max);
            for (g, id) in [(ring(6)?, "ring(6)"), (complete(4)?, "complete(4)")] {
                let merge = pair_partition(&g);
                let points = [2, 3]
                    .iter()
                    .map(|&n| {
                        let mut e = ising(g.clone(), id.into(), replica(n), true);
                        e.model_kind = ModelKind::Heisenberg;
                        e.spec = ModelSpec::Heisenberg;
                        e.merge = merge.clone();
                        (e, beta)
                    })
                    .collect();
                out.push(Curve {
                    file: format!("graphs_heisenberg_{}.csv", file_id(id)),
                    description: format!("Heisenberg on {id}, merged pairs, replica N_tau = 2, 3"),
                    points,
                });
            }
        }
    }
    Ok(out)
}

fn file_id(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect::<String>().trim_end_matches('_').into()
}

#[derive(Debug, Serialize)]
struct CurveRecord {
    file: String,
    description: String,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct MergeRecord {
    graph: String,
    groups: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize)]
struct FigManifest {
    version: &'static str,
    command: &'static str,
    fig: FigName,
    beta_max: Option<f64>,
    curves: Vec<CurveRecord>,
    merged_pairs: Vec<MergeRecord>,
}

/// Runs a figure sweep and writes one CSV per curve plus `manifest.json`.
pub fn run_fig(name: FigName, beta_max: Option<f64>, out_dir: &Path, workers: usize) -> Result<usize, CliError> {
    let curves = curves(name, beta_max).map_err(|source| crate::RunError { context: format!("building {name:?}"), source })?;
    if curves.iter().all(|c| c.points.is_empty()) {
        return Err(CliError::Config(crate::config::ConfigErrors {
            source: "--beta-max".into(),
            errors: vec![crate::config::ConfigError::new("beta_max", "no grid point left")],
        }));
    }
    let points: Vec<(&Experiment, f64)> = curves.iter().flat_map(|c| c.points.iter().map(|(e, b)| (e, *b))).collect();
    let results = evaluate(points, workers)?;

    let io = |what: String| move |source| CliError::Io { context: what, source };
    std::fs::create_dir_all(out_dir).map_err(io(format!("creating {}", out_dir.display())))?;
    let mut records = Vec::new();
    let mut merges: Vec<MergeRecord> = Vec::new();
    let mut next = results.iter();
    for curve in &curves {
        let mut rows = Vec::new();
        for (exp, _) in &curve.points {
            let r = next.next().expect("one result per point");
            rows.extend(output::rows(exp, r));
            if let Some(groups) = &exp.merge {
                if !merges.iter().any(|m| m.graph == exp.graph_id) {
                    merges.push(MergeRecord { graph: exp.graph_id.clone(), groups: groups.clone() });
                }
            }
        }
        records.push(write_curve(out_dir, &curve.file, &curve.description, name, &rows)?);
    }
    if name == FigName::Line {
        let betas = grid(&[0.5, 1.0, 1.5, 2.0, 2.5, 3.0], beta_max);
        let rows = betas
            .iter()
            .map(|&b| {
                let value = free_fermion_energy(0.5, 1.0, b)
                    .map_err(|source| crate::RunError { context: format!("free fermions at beta = {b}"), source })?;
                Ok(Row {
                    method: "free_fermion".into(),
                    graph: "infinite_chain".into(),
                    beta: b,
                    n_tau: None,
                    ell: None,
                    converged: true,
                    quantity: "energy_density",
                    anchor: None,
                    target: None,
                    value,
                })
            })
            .collect::<Result<Vec<_>, crate::RunError>>()?;
        records.push(write_curve(out_dir, "free_fermion.csv", "free-fermion energy density of the infinite line", name, &rows)?);
    }
    let manifest = FigManifest { version: VERSION, command: "fig", fig: name, beta_max, curves: records, merged_pairs: merges };
    let path = out_dir.join("manifest.json");
    output::write_json(&path, &manifest).map_err(io(format!("writing {}", path.display())))?;
    Ok(results.len())
}

fn write_curve(out_dir: &Path, file: &str, description: &str, name: FigName, rows: &[Row]) -> Result<CurveRecord, CliError> {
    let metadata = vec![
        ("qbp".to_string(), VERSION.to_string()),
        ("fig".to_string(), format!("{name:?}").to_lowercase()),
        ("curve".to_string(), description.to_string()),
    ];
    let path = out_dir.join(file);
    std::fs::write(&path, output::render_csv(&metadata, rows))
        .map_err(|source| CliError::Io { context: format!("writing {}", path.display()), source })?;
    Ok(CurveRecord { file: file.into(), description: description.into(), rows: rows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_max_trims_the_grids() {
        let c = curves(FigName::Circle, Some(2.5)).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(|c| c.points.iter().map(|p| p.1).eq([1.0, 2.0])));
        let c = curves(FigName::Loopsize, Some(1.0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].points.len(), 9);
        let c = curves(FigName::Graphs, Some(0.5)).unwrap();
        assert!(c.iter().all(|c| c.points.iter().all(|p| p.1 == 0.5)));
        assert_eq!(c.iter().filter(|c| c.points[0].0.merge.is_some()).count(), 2);
    }

    #[test]
    fn line_figure_writes_every_curve() {
        let dir = tempfile::tempdir().unwrap();
        let n = run_fig(FigName::Line, Some(0.5), dir.path(), 1).unwrap();
        assert_eq!(n, 3);
        for f in ["line_ell2.csv", "line_ell4.csv", "line_ell6.csv", "free_fermion.csv", "manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let ell6 = std::fs::read_to_string(dir.path().join("line_ell6.csv")).unwrap();
        assert!(ell6.contains("sliding,infinite_chain,0.5,,6,true,error_energy,"));
    }
}
