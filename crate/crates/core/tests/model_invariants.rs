use std::collections::VecDeque;

use qbp::model::{
    assemble_exact_state, build_hamiltonian, chain, check_nu_commutativity, complete, ladder, merge_vertices,
    pair_partition, parse_edge_list, ring, thermal_bifactor, torus, Couplings, Graph, ModelSpec,
};
use qbp::operator::{trace_distance, C64};

fn dense_gibbs(g: &Graph, spec: &ModelSpec, beta: f64) -> qbp::operator::LabeledOperator {
    let h = build_hamiltonian(g, spec).unwrap().dense().unwrap();
    h.scale(C64::new(-beta, 0.0)).exp().unwrap().normalized().unwrap()
}

fn bfs_diameter(g: &Graph) -> usize {
    let n = g.num_vertices();
    let mut best = 0;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        best = best.max(*dist.iter().max().unwrap());
    }
    best
}

#[test]
fn thermal_models_assemble_to_the_gibbs_state() {
    let cases = [
        (chain(3).unwrap(), ModelSpec::critical_ising(), 1.0),
        (ring(5).unwrap(), ModelSpec::critical_ising(), 2.0),
        (ring(4).unwrap(), ModelSpec::Heisenberg, 1.3),
        (complete(4).unwrap(), ModelSpec::Ising { g: [0.3, 0.2, 0.1], j: Couplings::Uniform(-0.7) }, 0.8),
    ];
    for (g, spec, beta) in cases {
        let model = thermal_bifactor(&build_hamiltonian(&g, &spec).unwrap(), beta).unwrap();
        let rho = assemble_exact_state(&model).unwrap();
        let d = trace_distance(&rho, &dense_gibbs(&g, &spec, beta)).unwrap();
        assert!(d < 1e-10, "{spec:?} on {} vertices: {d}", g.num_vertices());
    }
}

#[test]
fn merging_preserves_the_exact_state() {
    for (g, spec) in [(chain(6).unwrap(), ModelSpec::Heisenberg), (ladder(2, 3).unwrap(), ModelSpec::critical_ising())] {
        let model = thermal_bifactor(&build_hamiltonian(&g, &spec).unwrap(), 1.1).unwrap();
        let partition = pair_partition(&g).unwrap();
        let merged = merge_vertices(&model, &partition).unwrap();
        let a = assemble_exact_state(&model).unwrap();
        let b = assemble_exact_state(&merged).unwrap();
        assert!(trace_distance(&a, &b).unwrap() < 1e-10);
    }
}

#[test]
fn edge_operator_commutativity() {
    for g in [ring(6).unwrap(), torus(3, 3).unwrap(), complete(4).unwrap()] {
        let m = thermal_bifactor(&build_hamiltonian(&g, &ModelSpec::critical_ising()).unwrap(), 2.0).unwrap();
        let report = check_nu_commutativity(&m).unwrap();
        assert!(report.commuting() && report.max_norm < 1e-12);
    }
    let g = chain(4).unwrap();
    let m = thermal_bifactor(&build_hamiltonian(&g, &ModelSpec::Heisenberg).unwrap(), 1.0).unwrap();
    assert!(!check_nu_commutativity(&m).unwrap().commuting());
    let merged = merge_vertices(&m, &pair_partition(&g).unwrap()).unwrap();
    assert!(check_nu_commutativity(&merged).unwrap().commuting());
}

#[test]
fn library_diameters_match_breadth_first_search() {
    let graphs = [
        chain(7).unwrap(),
        ring(11).unwrap(),
        ring(4).unwrap(),
        ladder(2, 4).unwrap(),
        torus(3, 3).unwrap(),
        torus(3, 4).unwrap(),
        complete(4).unwrap(),
    ];
    for g in &graphs {
        assert_eq!(g.diameter().unwrap(), bfs_diameter(g));
    }
    let r = ring(11).unwrap();
    assert_eq!((r.num_vertices(), r.edges().len(), r.diameter()), (11, 11, Some(5)));
    let t = torus(3, 3).unwrap();
    assert_eq!((t.num_vertices(), t.edges().len(), t.girth()), (9, 18, Some(3)));
    assert_eq!(chain(5).unwrap().diameter(), Some(4));
    assert_eq!(chain(5).unwrap().girth(), None);
}

#[test]
fn edge_lists_carry_couplings() {
    let el = parse_edge_list("# triangle\na b 0.5\nb c\nc a -1\n").unwrap();
    assert_eq!(el.graph.num_vertices(), 3);
    assert_eq!(el.graph.names(), ["a", "b", "c"]);
    assert_eq!(el.couplings[&(0, 1)], 0.5);
    assert_eq!(el.couplings[&(1, 2)], 1.0);
    assert_eq!(el.couplings[&(0, 2)], -1.0);
    assert!(parse_edge_list("a a\n").is_err());
    assert!(parse_edge_list("a b\nb a\n").is_err());
    assert!(parse_edge_list("a b x\n").is_err());
}
