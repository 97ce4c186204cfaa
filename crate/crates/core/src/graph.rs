//! Locally finite graphs, boundaries, 2-cliques and truncation.
//!
//! Vertices are `i64` so the integer line keeps its negative labels. Infinite
//! graphs are only described by a neighbour function and get materialised
//! through [`truncate`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::drift::DriftFunctional;
use crate::error::{Error, Result};

pub type Vertex = i64;
pub type VertexSet = BTreeSet<Vertex>;

/// Neighbour access for graphs that may be infinite.
pub trait LocallyFinite {
    fn root(&self) -> Vertex;
    fn neighbors_of(&self, v: Vertex) -> Vec<Vertex>;
}

/// A finite simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adj: BTreeMap<Vertex, VertexSet>,
    root: Vertex,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(vs: impl IntoIterator<Item = Vertex>) -> Self {
        let mut g = Graph::new();
        for v in vs {
            g.add_vertex(v);
        }
        if let Some(&first) = g.adj.keys().next() {
            g.root = first;
        }
        g
    }

    pub fn add_vertex(&mut self, v: Vertex) {
        self.adj.entry(v).or_default();
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<()> {
        if u == v {
            return Err(Error::Graph(format!("self-loop at {u}")));
        }
        self.adj.entry(u).or_default().insert(v);
        self.adj.entry(v).or_default().insert(u);
        Ok(())
    }

    pub fn set_root(&mut self, root: Vertex) {
        self.add_vertex(root);
        self.root = root;
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.adj.keys().copied()
    }

    pub fn vertex_set(&self) -> VertexSet {
        self.adj.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn neighbors(&self, v: Vertex) -> &VertexSet {
        static EMPTY: VertexSet = BTreeSet::new();
        self.adj.get(&v).unwrap_or(&EMPTY)
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.neighbors(u).contains(&v)
    }

    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        self.adj.iter().flat_map(|(&u, ns)| ns.iter().filter(move |&&v| u < v).map(move |&v| (u, v))).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.values().map(|n| n.len()).max().unwrap_or(0)
    }

    /// Vertices `0..k` joined in a line.
    pub fn path(k: usize) -> Self {
        let mut g = Graph::with_vertices(0..k as Vertex);
        for v in 1..k as Vertex {
            g.add_edge(v - 1, v).unwrap();
        }
        g
    }

    pub fn cycle(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::Graph(format!("a cycle needs at least 3 vertices, got {k}")));
        }
        let mut g = Graph::path(k);
        g.add_edge(k as Vertex - 1, 0)?;
        Ok(g)
    }

    /// Full `b`-ary tree of depth `d`, root 0, children of `v` numbered
    /// `b v + 1 ..= b v + b`.
    pub fn tree(b: usize, d: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::Graph("tree branching must be positive".into()));
        }
        let mut g = Graph::with_vertices([0]);
        let mut frontier = vec![0 as Vertex];
        for _ in 0..d {
            let mut next = Vec::new();
            for &v in &frontier {
                for c in 1..=b as Vertex {
                    let child = v * b as Vertex + c;
                    g.add_edge(v, child)?;
                    next.push(child);
                }
            }
            frontier = next;
        }
        Ok(g)
    }

    /// One `u v` pair per line; blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut g = Graph::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| s.parse::<Vertex>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)));
            match parts.as_slice() {
                [u] => g.add_vertex(parse(u)?),
                [u, v] => g.add_edge(parse(u)?, parse(v)?)?,
                _ => return Err(Error::Parse(format!("line {}: expected 'u v'", lineno + 1))),
            }
        }
        if let Some(&first) = g.adj.keys().next() {
            g.root = first;
        }
        Ok(g)
    }

    /// Graph distances from `sources`, cut off at `radius`.
    pub fn distances(&self, sources: &VertexSet, radius: usize) -> BTreeMap<Vertex, usize> {
        bfs(sources, radius, |v| self.neighbors(v).iter().copied().collect())
    }
}

impl LocallyFinite for Graph {
    fn root(&self) -> Vertex {
        self.root
    }

    fn neighbors_of(&self, v: Vertex) -> Vec<Vertex> {
        self.neighbors(v).iter().copied().collect()
    }
}

/// The integer line with root 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZLine;

impl LocallyFinite for ZLine {
    fn root(&self) -> Vertex {
        0
    }

    fn neighbors_of(&self, v: Vertex) -> Vec<Vertex> {
        vec![v - 1, v + 1]
    }
}

fn bfs(sources: &VertexSet, radius: usize, nbrs: impl Fn(Vertex) -> Vec<Vertex>) -> BTreeMap<Vertex, usize> {
    let mut dist: BTreeMap<Vertex, usize> = sources.iter().map(|&v| (v, 0)).collect();
    let mut queue: VecDeque<Vertex> = sources.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        for u in nbrs(v) {
            if !dist.contains_key(&u) {
                dist.insert(u, d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// A graph given by name: `path:k`, `cycle:k`, `tree:b:d` or `zline`, or an
/// edge list read elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSpec {
    Finite(Graph),
    ZLine,
}

impl GraphSpec {
    pub fn presented(&self) -> &dyn LocallyFinite {
        match self {
            GraphSpec::Finite(g) => g,
            GraphSpec::ZLine => &ZLine,
        }
    }

    pub fn finite(&self) -> Result<&Graph> {
        match self {
            GraphSpec::Finite(g) => Ok(g),
            GraphSpec::ZLine => Err(Error::Graph("the integer line is infinite; truncate it first".into())),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<usize>().map_err(|e| Error::Parse(format!("graph '{s}': {e}")));
        match parts.as_slice() {
            ["zline"] => Ok(GraphSpec::ZLine),
            ["path", k] => Ok(GraphSpec::Finite(Graph::path(num(k)?))),
            ["cycle", k] => Ok(GraphSpec::Finite(Graph::cycle(num(k)?)?)),
            ["tree", b, d] => Ok(GraphSpec::Finite(Graph::tree(num(b)?, num(d)?)?)),
            _ => Err(Error::Parse(format!("unknown graph '{s}'"))),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::ZLine => write!(f, "zline"),
            GraphSpec::Finite(g) => write!(f, "finite({} vertices, {} edges)", g.len(), g.edges().len()),
        }
    }
}

/// `∂A = {u ∉ A : u ~ v for some v ∈ A}`.
pub fn boundary(g: &dyn LocallyFinite, a: &VertexSet) -> VertexSet {
    a.iter().flat_map(|&v| g.neighbors_of(v)).filter(|u| !a.contains(u)).collect()
}

/// `∂²A = ∂A ∪ ∂(A ∪ ∂A)`.
pub fn boundary2(g: &dyn LocallyFinite, a: &VertexSet) -> VertexSet {
    let b1 = boundary(g, a);
    let closed: VertexSet = a.union(&b1).copied().collect();
    b1.union(&boundary(g, &closed)).copied().collect()
}

/// `∂²A` as the vertices at distance 1 or 2 from `A`.
pub fn boundary2_bfs(g: &dyn LocallyFinite, a: &VertexSet) -> VertexSet {
    bfs(a, 2, |v| g.neighbors_of(v)).into_iter().filter(|&(_, d)| d > 0).map(|(v, _)| v).collect()
}

/// `{u} ∪ N_u`.
pub fn closed_neighborhood(g: &Graph, u: Vertex) -> VertexSet {
    let mut s = g.neighbors(u).clone();
    s.insert(u);
    s
}

/// Maximal vertex sets of pairwise distance at most 2, together with every
/// closed neighbourhood (the sets that carry factorization weights).
pub fn two_cliques(g: &Graph) -> Vec<VertexSet> {
    let square: BTreeMap<Vertex, VertexSet> = g
        .vertices()
        .map(|v| {
            let near: VertexSet = g.distances(&[v].into(), 2).into_keys().filter(|&u| u != v).collect();
            (v, near)
        })
        .collect();
    let mut out: BTreeSet<VertexSet> = BTreeSet::new();
    bron_kerbosch(&square, VertexSet::new(), g.vertex_set(), VertexSet::new(), &mut out);
    for v in g.vertices() {
        out.insert(closed_neighborhood(g, v));
    }
    out.into_iter().collect()
}

fn bron_kerbosch(
    adj: &BTreeMap<Vertex, VertexSet>,
    r: VertexSet,
    mut p: VertexSet,
    mut x: VertexSet,
    out: &mut BTreeSet<VertexSet>,
) {
    if p.is_empty() && x.is_empty() {
        if !r.is_empty() {
            out.insert(r);
        }
        return;
    }
    let pivot = p.union(&x).max_by_key(|u| adj[u].intersection(&p).count()).copied();
    let candidates: Vec<Vertex> = match pivot {
        Some(u) => p.difference(&adj[&u]).copied().collect(),
        None => p.iter().copied().collect(),
    };
    for v in candidates {
        let nv = &adj[&v];
        let mut r2 = r.clone();
        r2.insert(v);
        bron_kerbosch(adj, r2, p.intersection(nv).copied().collect(), x.intersection(nv).copied().collect(), out);
        p.remove(&v);
        x.insert(v);
    }
}

/// Largest pairwise graph distance within `set` (distances measured in `g`).
pub fn diameter_in(g: &Graph, set: &VertexSet) -> Option<usize> {
    let mut worst = 0;
    for &v in set {
        let d = g.distances(&[v].into(), g.len());
        for u in set {
            worst = worst.max(*d.get(u)?);
        }
    }
    Some(worst)
}

/// `G_n`: the radius-`n` ball around the root with the outer shell
/// `U_n = V_n \ V_{n-2}` completed into a clique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedGraph {
    pub graph: Graph,
    pub root: Vertex,
    pub n: usize,
    pub depth: BTreeMap<Vertex, usize>,
    pub shell: VertexSet,
}

impl TruncatedGraph {
    /// `V_k` for `k ≤ n`.
    pub fn ball(&self, k: usize) -> VertexSet {
        self.depth.iter().filter(|&(_, &d)| d <= k).map(|(&v, _)| v).collect()
    }
}

pub fn truncate(g: &dyn LocallyFinite, n: usize) -> Result<TruncatedGraph> {
    if n < 4 {
        return Err(Error::Graph(format!("truncation level must be at least 4, got {n}")));
    }
    let root = g.root();
    let depth = bfs(&[root].into(), n, |v| g.neighbors_of(v));
    let mut graph = Graph::with_vertices(depth.keys().copied());
    graph.set_root(root);
    for &v in depth.keys() {
        for u in g.neighbors_of(v) {
            if depth.contains_key(&u) {
                graph.add_edge(v, u)?;
            }
        }
    }
    let shell: VertexSet = depth.iter().filter(|&(_, &d)| d + 2 > n).map(|(&v, _)| v).collect();
    let shell_vec: Vec<Vertex> = shell.iter().copied().collect();
    for (i, &u) in shell_vec.iter().enumerate() {
        for &v in &shell_vec[i + 1..] {
            graph.add_edge(u, v)?;
        }
    }
    Ok(TruncatedGraph { graph, root, n, depth, shell })
}

/// Per-vertex drifts: a default plus overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexDrifts {
    pub default: DriftFunctional,
    pub overrides: BTreeMap<Vertex, DriftFunctional>,
}

impl VertexDrifts {
    pub fn uniform(d: DriftFunctional) -> Self {
        VertexDrifts { default: d, overrides: BTreeMap::new() }
    }

    pub fn with(mut self, v: Vertex, d: DriftFunctional) -> Self {
        self.overrides.insert(v, d);
        self
    }

    pub fn get(&self, v: Vertex) -> DriftFunctional {
        self.overrides.get(&v).copied().unwrap_or(self.default)
    }

    /// Largest certificate among the vertices of `vs`.
    pub fn certificate(&self, vs: impl IntoIterator<Item = Vertex>) -> f64 {
        vs.into_iter().map(|v| self.get(v).certificate()).fold(0.0, f64::max)
    }
}

/// `b^n_u = b_u` on `V_{n-2}` and `0` on the shell.
pub fn truncated_drift(drifts: &VertexDrifts, t: &TruncatedGraph) -> VertexDrifts {
    let mut out = drifts.clone();
    for &v in &t.shell {
        out.overrides.insert(v, DriftFunctional::Zero);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vs: &[Vertex]) -> VertexSet {
        vs.iter().copied().collect()
    }

    #[test]
    fn path_boundaries() {
        let g = Graph::path(5);
        assert_eq!(boundary(&g, &set(&[0])), set(&[1]));
        assert_eq!(boundary2(&g, &set(&[0])), set(&[1, 2]));
        assert!(boundary(&g, &g.vertex_set()).is_empty());
    }

    #[test]
    fn zline_boundary2() {
        assert_eq!(boundary2(&ZLine, &set(&[0])), set(&[-2, -1, 1, 2]));
        assert_eq!(boundary2_bfs(&ZLine, &set(&[0, 5])), boundary2(&ZLine, &set(&[0, 5])));
    }

    #[test]
    fn small_two_cliques() {
        let cl = two_cliques(&Graph::path(3));
        assert!(cl.contains(&set(&[0, 1, 2])));
        let empty = Graph::with_vertices(0..3);
        assert_eq!(two_cliques(&empty), vec![set(&[0]), set(&[1]), set(&[2])]);
        let mut star = Graph::new();
        for v in 1..=3 {
            star.add_edge(0, v).unwrap();
        }
        let cl = two_cliques(&star);
        assert!(cl.contains(&set(&[0, 1, 2, 3])));
        for c in &cl {
            assert!(diameter_in(&star, c).unwrap() <= 2);
        }
        assert_eq!(cl.len(), 4);
    }

    #[test]
    fn zline_truncation_edges() {
        let t = truncate(&ZLine, 5).unwrap();
        assert_eq!(t.graph.vertex_set(), (-5..=5).collect());
        assert_eq!(t.shell, set(&[-5, -4, 4, 5]));
        for (u, v) in [(-5, 4), (-5, 5), (-4, 4), (-4, 5), (-5, -4), (4, 5)] {
            assert!(t.graph.has_edge(u, v), "{u}-{v}");
        }
        assert!(!t.graph.has_edge(-3, 4));
        assert!(truncate(&ZLine, 3).is_err());
    }

    #[test]
    fn truncation_keeps_inner_boundaries() {
        for n in 4..8 {
            let t = truncate(&ZLine, n).unwrap();
            assert_eq!(boundary2(&t.graph, &set(&[0])), boundary2(&ZLine, &set(&[0])));
        }
    }

    #[test]
    fn truncated_drift_vanishes_on_shell() {
        let t = truncate(&ZLine, 4).unwrap();
        let d = VertexDrifts::uniform(DriftFunctional::Constant { theta: 1.0 });
        let dn = truncated_drift(&d, &t);
        for v in t.graph.vertices() {
            if t.shell.contains(&v) {
                assert!(dn.get(v).is_zero());
            } else {
                assert_eq!(dn.get(v), d.get(v));
            }
        }
    }

    #[test]
    fn generators_and_edge_lists() {
        assert_eq!(Graph::cycle(4).unwrap().edges().len(), 4);
        assert_eq!(Graph::tree(2, 2).unwrap().len(), 7);
        let g = Graph::parse_edge_list("# demo\n0 1\n1 2\n\n7\n").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        assert!(Graph::parse_edge_list("1 1").is_err());
        assert!(Graph::parse_edge_list("1 2 3").is_err());
        assert!(matches!("zline".parse::<GraphSpec>(), Ok(GraphSpec::ZLine)));
        assert!("path:x".parse::<GraphSpec>().is_err());
    }
}
