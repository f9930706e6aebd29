//! Undirected simple graphs and the named graph library.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};

/// Simple undirected graph on vertices `0..n`, with optional display names.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

fn canonical(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_names((0..n).map(|v| v.to_string()).collect(), edges)
    }

    pub fn with_names(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let mut list = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) refers to a missing vertex")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            let e = canonical(u, v);
            if list.contains(&e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            list.push(e);
        }
        list.sort();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &list {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for a in &mut adjacency {
            a.sort();
        }
        Ok(Graph { names, edges: list, adjacency })
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_vertices() && self.adjacency[u].contains(&v)
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Directed edges `(u, v)` in both orientations, sorted.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
        out.sort();
        out
    }

    /// Breadth-first distances from `source`; `None` marks unreachable vertices.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_vertices()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// A shortest path from `u` to `v`, endpoints included.
    pub fn shortest_path(&self, u: usize, v: usize) -> Option<Vec<usize>> {
        let n = self.num_vertices();
        if u >= n || v >= n {
            return None;
        }
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        seen[u] = true;
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            if x == v {
                break;
            }
            for &w in &self.adjacency[x] {
                if !seen[w] {
                    seen[w] = true;
                    prev[w] = x;
                    queue.push_back(w);
                }
            }
        }
        if !seen[v] {
            return None;
        }
        let mut path = vec![v];
        while *path.last().unwrap() != u {
            path.push(prev[*path.last().unwrap()]);
        }
        path.reverse();
        Some(path)
    }

    pub fn is_connected(&self) -> bool {
        self.num_vertices() == 0 || self.distances_from(0).iter().all(Option::is_some)
    }

    /// Largest shortest-path distance; `None` for disconnected graphs.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for v in 0..self.num_vertices() {
            for d in self.distances_from(v) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    /// Length of the shortest cycle; `None` for forests.
    pub fn girth(&self) -> Option<usize> {
        let n = self.num_vertices();
        let mut best: Option<usize> = None;
        for s in 0..n {
            let mut dist = vec![usize::MAX; n];
            let mut parent = vec![usize::MAX; n];
            let mut queue = VecDeque::new();
            dist[s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        queue.push_back(w);
                    } else if parent[u] != w {
                        let len = dist[u] + dist[w] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edges.len() + 1 == self.num_vertices()
    }

    /// Vertex order along a path graph, starting from the lower-numbered end.
    pub fn path_order(&self) -> Option<Vec<usize>> {
        let n = self.num_vertices();
        if n == 1 {
            return Some(vec![0]);
        }
        if !self.is_tree() || self.adjacency.iter().any(|a| a.len() > 2) {
            return None;
        }
        let start = (0..n).find(|&v| self.degree(v) == 1)?;
        self.walk(start, n)
    }

    /// Vertex order around a cycle graph, starting at 0 towards its smaller
    /// neighbor.
    pub fn cycle_order(&self) -> Option<Vec<usize>> {
        let n = self.num_vertices();
        if n < 3 || self.edges.len() != n || !self.is_connected() || self.adjacency.iter().any(|a| a.len() != 2) {
            return None;
        }
        self.walk(0, n)
    }

    fn walk(&self, start: usize, n: usize) -> Option<Vec<usize>> {
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while order.len() < n {
            let next = *self.adjacency[cur].iter().find(|&&w| w != prev && !order.contains(&w))?;
            prev = cur;
            cur = next;
            order.push(cur);
        }
        Some(order)
    }

    /// Some Hamiltonian path, found by depth-first search. Intended for the
    /// small graphs handled densely.
    pub fn hamiltonian_path(&self) -> Option<Vec<usize>> {
        if let Some(p) = self.path_order() {
            return Some(p);
        }
        if let Some(c) = self.cycle_order() {
            return Some(c);
        }
        let n = self.num_vertices();
        if n == 0 {
            return Some(vec![]);
        }
        fn dfs(g: &Graph, path: &mut Vec<usize>, used: &mut [bool], budget: &mut usize) -> bool {
            if path.len() == g.num_vertices() {
                return true;
            }
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            let last = *path.last().unwrap();
            for &w in g.neighbors(last) {
                if !used[w] {
                    used[w] = true;
                    path.push(w);
                    if dfs(g, path, used, budget) {
                        return true;
                    }
                    path.pop();
                    used[w] = false;
                }
            }
            false
        }
        let mut budget = 1_000_000usize;
        for s in 0..n {
            let mut path = vec![s];
            let mut used = vec![false; n];
            used[s] = true;
            if dfs(self, &mut path, &mut used, &mut budget) {
                return Some(path);
            }
        }
        None
    }

    /// Whether the vertex set induces a connected subgraph.
    pub fn induces_connected(&self, vertices: &[usize]) -> bool {
        let Some(&first) = vertices.first() else {
            return false;
        };
        let mut seen = vec![first];
        let mut stack = vec![first];
        while let Some(u) = stack.pop() {
            for &w in &self.adjacency[u] {
                if vertices.contains(&w) && !seen.contains(&w) {
                    seen.push(w);
                    stack.push(w);
                }
            }
        }
        seen.len() == vertices.len()
    }
}

pub fn chain(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidGraph("chain needs at least one vertex".into()));
    }
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
    Graph::new(n, &edges)
}

pub fn ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("ring needs at least 3 vertices, got {n}")));
    }
    let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    Graph::new(n, &edges)
}

/// `rows × cols` grid with open boundaries. Vertex `r * cols + c`.
pub fn ladder(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::InvalidGraph(format!("ladder {rows}x{cols} is too small")));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Graph::new(rows * cols, &edges)
}

/// `rows × cols` grid with periodic boundaries in both directions.
pub fn torus(rows: usize, cols: usize) -> Result<Graph> {
    if rows < 3 || cols < 3 {
        return Err(Error::InvalidGraph(format!("torus needs both sides at least 3, got {rows}x{cols}")));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            edges.push((v, r * cols + (c + 1) % cols));
            edges.push((v, ((r + 1) % rows) * cols + c));
        }
    }
    Graph::new(rows * cols, &edges)
}

pub fn complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidGraph(format!("complete graph needs at least 2 vertices, got {n}")));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v));
        }
    }
    Graph::new(n, &edges)
}

/// Graph parsed from an edge list together with the per-edge couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub graph: Graph,
    pub couplings: BTreeMap<(usize, usize), f64>,
}

/// Parses "u v [J]" lines. `#` starts a comment; vertex labels are arbitrary
/// tokens numbered in order of first appearance.
pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut names: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut couplings = BTreeMap::new();
    let index = |tok: &str, names: &mut Vec<String>| -> usize {
        if let Some(i) = names.iter().position(|n| n == tok) {
            i
        } else {
            names.push(tok.to_string());
            names.len() - 1
        }
    };
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 2 || toks.len() > 3 {
            return Err(Error::Parse { line: k + 1, message: format!("expected \"u v [J]\", found {:?}", raw.trim()) });
        }
        let j = match toks.get(2) {
            Some(t) => t
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse { line: k + 1, message: format!("invalid coupling {t:?}") })?,
            None => 1.0,
        };
        let u = index(toks[0], &mut names);
        let v = index(toks[1], &mut names);
        if u == v {
            return Err(Error::Parse { line: k + 1, message: format!("self-loop at {:?}", toks[0]) });
        }
        let e = canonical(u, v);
        if couplings.insert(e, j).is_some() {
            return Err(Error::Parse { line: k + 1, message: format!("duplicate edge {} {}", toks[0], toks[1]) });
        }
        edges.push(e);
    }
    if names.is_empty() {
        return Err(Error::Parse { line: 0, message: "edge list is empty".into() });
    }
    let graph = Graph::with_names(names, &edges)?;
    Ok(EdgeList { graph, couplings })
}

pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
    parse_edge_list(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_eleven() {
        let g = ring(11).unwrap();
        assert_eq!(g.num_vertices(), 11);
        assert_eq!(g.edges().len(), 11);
        assert_eq!(g.diameter(), Some(5));
        assert_eq!(g.girth(), Some(11));
        assert_eq!(g.cycle_order().unwrap(), (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn chain_diameter_and_order() {
        for n in 1..8 {
            let g = chain(n).unwrap();
            assert_eq!(g.diameter(), Some(n - 1));
            assert_eq!(g.girth(), None);
            assert_eq!(g.path_order().unwrap(), (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn torus_counts() {
        let g = torus(3, 3).unwrap();
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.edges().len(), 18);
        assert_eq!(g.girth(), Some(3));
        assert_eq!(g.diameter(), Some(2));
    }

    #[test]
    fn ladder_and_complete() {
        let l = ladder(2, 4).unwrap();
        assert_eq!(l.edges().len(), 10);
        assert_eq!(l.girth(), Some(4));
        assert_eq!(l.diameter(), Some(4));
        let k = complete(4).unwrap();
        assert_eq!(k.edges().len(), 6);
        assert_eq!(k.girth(), Some(3));
        assert!(k.hamiltonian_path().is_some());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::new(3, &[(0, 0)]).is_err());
        assert!(Graph::new(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, &[(0, 2)]).is_err());
        assert!(ring(2).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let el = parse_edge_list("# square\na b 0.5\nb c\nc d -1 # trailing\n\nd a\n").unwrap();
        assert_eq!(el.graph.num_vertices(), 4);
        assert_eq!(el.graph.name(2), "c");
        assert_eq!(el.couplings[&(0, 1)], 0.5);
        assert_eq!(el.couplings[&(1, 2)], 1.0);
        assert_eq!(el.couplings[&(2, 3)], -1.0);
        assert_eq!(el.graph.girth(), Some(4));
        let err = parse_edge_list("a b\nb c x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(parse_edge_list("a a\n").unwrap_err(), Error::Parse { line: 1, .. }));
    }

    #[test]
    fn shortest_paths() {
        let g = ring(6).unwrap();
        assert_eq!(g.shortest_path(0, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.shortest_path(0, 3).unwrap().len(), 4);
        assert_eq!(g.shortest_path(4, 4).unwrap(), vec![4]);
    }
}
