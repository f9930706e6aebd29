use qbp::model::{build_hamiltonian, chain, ring, thermal_bifactor, Graph, ModelSpec};
use qbp::oracle::{error_metric, zz_profile_from_state, GibbsOracle};
use qbp::replica::{replicate_model, run_replica, trotter_state, Estimator};
use qbp::engine::QbpOptions;

fn graph_targets(g: &Graph) -> Vec<usize> {
    (0..g.num_vertices()).collect()
}

#[test]
fn replica_messages_reproduce_the_trotter_state_on_trees() {
    let tree = Graph::new(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]).unwrap();
    for (g, beta, n_tau) in [(chain(5).unwrap(), 1.0, 2), (tree, 2.0, 3)] {
        let base = thermal_bifactor(&build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap(), beta).unwrap();
        let targets = graph_targets(&g);
        let ts = zz_profile_from_state(&trotter_state(&base, n_tau).unwrap(), 0, &targets, beta, "ts").unwrap();
        let rm = replicate_model(&base, n_tau).unwrap();
        let opts = QbpOptions::default();
        let run = run_replica(&rm, &opts).unwrap();
        assert!(run.report.converged);
        for estimator in [Estimator::Path, Estimator::Clamped] {
            let p = rm.profile(estimator, &run.messages, 0, &targets, &opts).unwrap();
            for &j in &targets {
                let d = (p.profile.get(j).unwrap() - ts.get(j).unwrap()).abs();
                assert!(d < 1e-9, "{estimator:?} j={j}: {d}");
            }
        }
    }
}

#[test]
fn infinite_temperature_is_a_paramagnet() {
    let g = ring(4).unwrap();
    let base = thermal_bifactor(&build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap(), 0.0).unwrap();
    let rm = replicate_model(&base, 2).unwrap();
    let opts = QbpOptions::default();
    let run = run_replica(&rm, &opts).unwrap();
    let p = rm.profile(Estimator::Clamped, &run.messages, 0, &[0, 1, 2, 3], &opts).unwrap().profile;
    assert!((p.get(0).unwrap() - 0.25).abs() < 1e-12);
    for j in 1..4 {
        assert!(p.get(j).unwrap().abs() < 1e-12);
    }
}

#[test]
fn trotter_error_falls_as_the_inverse_square_of_the_replica_count() {
    let g = ring(4).unwrap();
    let h = build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap();
    let beta = 2.0;
    let base = thermal_bifactor(&h, beta).unwrap();
    let targets = graph_targets(&g);
    let exact = GibbsOracle::new(&h).unwrap().correlations(beta, 0, &targets).unwrap();
    let err = |n: u32| {
        let ts = zz_profile_from_state(&trotter_state(&base, n).unwrap(), 0, &targets, beta, "ts").unwrap();
        error_metric(&exact, &ts).unwrap()
    };
    let ratio = err(2) / err(4);
    assert!((3.2..4.8).contains(&ratio), "{ratio}");
}
