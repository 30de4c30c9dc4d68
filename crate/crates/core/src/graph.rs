//! Partial ancestral graphs (discovery output) and acyclic directed mixed
//! graphs (the resolved causal model), with JSON and DOT export.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Role, VariableMeta};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge between `{0}` and `{1}`")]
    DuplicateEdge(String, String),
    #[error("directed part contains a cycle")]
    Cycle,
}

/// Endpoint mark of a PAG edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMark {
    Tail,
    Arrow,
    Circle,
}

impl EdgeMark {
    fn dot_shape(self) -> &'static str {
        match self {
            EdgeMark::Tail => "none",
            EdgeMark::Arrow => "normal",
            EdgeMark::Circle => "odot",
        }
    }

    fn glyph_left(self) -> char {
        match self {
            EdgeMark::Tail => '-',
            EdgeMark::Arrow => '<',
            EdgeMark::Circle => 'o',
        }
    }

    fn glyph_right(self) -> char {
        match self {
            EdgeMark::Tail => '-',
            EdgeMark::Arrow => '>',
            EdgeMark::Circle => 'o',
        }
    }
}

/// Edge as it appears in JSON: `mark_u` sits at `u`, `mark_v` at `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PagEdge {
    pub u: String,
    pub v: String,
    pub mark_u: EdgeMark,
    pub mark_v: EdgeMark,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SepsetEntry {
    pub pair: [String; 2],
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PagJson {
    vertices: Vec<VariableMeta>,
    edges: Vec<PagEdge>,
    sepsets: Vec<SepsetEntry>,
}

/// Partial ancestral graph over indexed vertices.
///
/// `marks[a][b]` holds the mark at `b` on the edge `a *-* b`, or `None` when
/// `a` and `b` are not adjacent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PagJson", try_from = "PagJson")]
pub struct Pag {
    vertices: Vec<VariableMeta>,
    marks: Vec<Vec<Option<EdgeMark>>>,
    sepsets: BTreeMap<(usize, usize), Vec<usize>>,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Pag {
    /// Graph with no edges.
    pub fn empty(vertices: Vec<VariableMeta>) -> Self {
        let n = vertices.len();
        Pag { vertices, marks: vec![vec![None; n]; n], sepsets: BTreeMap::new() }
    }

    pub fn vertices(&self) -> &[VariableMeta] {
        &self.vertices
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.vertices[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.marks[a][b].is_some()
    }

    /// Mark at `b` on the edge between `a` and `b`.
    pub fn mark_at(&self, a: usize, b: usize) -> Option<EdgeMark> {
        self.marks[a][b]
    }

    /// Sets the mark at `b` on an existing edge `a *-* b`.
    pub fn set_mark_at(&mut self, a: usize, b: usize, mark: EdgeMark) {
        debug_assert!(self.marks[a][b].is_some());
        self.marks[a][b] = Some(mark);
    }

    /// Inserts `a *-* b` with `mark_a` at `a` and `mark_b` at `b`.
    pub fn add_edge(&mut self, a: usize, b: usize, mark_a: EdgeMark, mark_b: EdgeMark) {
        assert_ne!(a, b, "self-loop");
        self.marks[a][b] = Some(mark_b);
        self.marks[b][a] = Some(mark_a);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.marks[a][b] = None;
        self.marks[b][a] = None;
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&b| self.marks[a][b].is_some()).collect()
    }

    /// Edges as `(a, b, mark at a, mark at b)` with `a < b`, in index order.
    pub fn edges(&self) -> Vec<(usize, usize, EdgeMark, EdgeMark)> {
        let mut out = Vec::new();
        for a in 0..self.n() {
            for b in (a + 1)..self.n() {
                if let (Some(mb), Some(ma)) = (self.marks[a][b], self.marks[b][a]) {
                    out.push((a, b, ma, mb));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sepsets.get(&ordered(a, b)).map(Vec::as_slice)
    }

    pub fn set_sepset(&mut self, a: usize, b: usize, set: Vec<usize>) {
        let mut set = set;
        set.sort_unstable();
        self.sepsets.insert(ordered(a, b), set);
    }

    pub fn sepsets(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.sepsets
    }

    /// Whether any endpoint still carries a circle.
    pub fn has_circles(&self) -> bool {
        self.edges()
            .iter()
            .any(|&(_, _, ma, mb)| ma == EdgeMark::Circle || mb == EdgeMark::Circle)
    }

    /// Unordered skeleton pairs.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|(a, b, _, _)| (a, b)).collect()
    }

    /// Graphviz rendering. Endpoint marks map to arrowtail/arrowhead shapes:
    /// circle `odot`, arrow `normal`, tail `none`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph pag {\n");
        for v in &self.vertices {
            let _ = writeln!(s, "  \"{}\" [role=\"{}\"];", v.name, v.role.as_str());
        }
        for (a, b, ma, mb) in self.edges() {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [dir=both, arrowtail={}, arrowhead={}, label=\"{}-{}\"];",
                self.name(a),
                self.name(b),
                ma.dot_shape(),
                mb.dot_shape(),
                ma.glyph_left(),
                mb.glyph_right()
            );
        }
        s.push_str("}\n");
        s
    }
}

impl From<Pag> for PagJson {
    fn from(p: Pag) -> Self {
        let edges = p
            .edges()
            .into_iter()
            .map(|(a, b, ma, mb)| PagEdge { u: p.name(a).into(), v: p.name(b).into(), mark_u: ma, mark_v: mb })
            .collect();
        let sepsets = p
            .sepsets
            .iter()
            .map(|(&(a, b), set)| SepsetEntry {
                pair: [p.name(a).into(), p.name(b).into()],
                set: set.iter().map(|&c| p.name(c).to_string()).collect(),
            })
            .collect();
        PagJson { vertices: p.vertices, edges, sepsets }
    }
}

impl TryFrom<PagJson> for Pag {
    type Error = GraphError;

    fn try_from(j: PagJson) -> Result<Self, Self::Error> {
        let mut pag = Pag::empty(j.vertices);
        let idx = |pag: &Pag, name: &str| pag.index_of(name).ok_or_else(|| GraphError::UnknownVertex(name.into()));
        for e in &j.edges {
            let (a, b) = (idx(&pag, &e.u)?, idx(&pag, &e.v)?);
            if a == b {
                return Err(GraphError::SelfLoop(e.u.clone()));
            }
            if pag.adjacent(a, b) {
                return Err(GraphError::DuplicateEdge(e.u.clone(), e.v.clone()));
            }
            pag.add_edge(a, b, e.mark_u, e.mark_v);
        }
        for s in &j.sepsets {
            let (a, b) = (idx(&pag, &s.pair[0])?, idx(&pag, &s.pair[1])?);
            let set = s.set.iter().map(|c| idx(&pag, c)).collect::<Result<Vec<_>, _>>()?;
            pag.set_sepset(a, b, set);
        }
        Ok(pag)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdmgJson {
    vertices: Vec<VariableMeta>,
    directed: Vec<[String; 2]>,
    bidirected: Vec<[String; 2]>,
}

/// Acyclic directed mixed graph: `u -> v` edges plus `u <-> v` latent
/// confounding edges. The same pair may carry both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "AdmgJson", try_from = "AdmgJson")]
pub struct Admg {
    vertices: Vec<VariableMeta>,
    directed: BTreeSet<(usize, usize)>,
    bidirected: BTreeSet<(usize, usize)>,
}

impl Admg {
    pub fn new(vertices: Vec<VariableMeta>) -> Self {
        Admg { vertices, directed: BTreeSet::new(), bidirected: BTreeSet::new() }
    }

    pub fn vertices(&self) -> &[VariableMeta] {
        &self.vertices
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.vertices[i].name
    }

    pub fn role(&self, i: usize) -> Role {
        self.vertices[i].role
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name).ok_or_else(|| GraphError::UnknownVertex(name.into()))
    }

    pub fn directed(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    /// Bidirected pairs stored as `(min, max)`.
    pub fn bidirected(&self) -> &BTreeSet<(usize, usize)> {
        &self.bidirected
    }

    pub fn add_directed(&mut self, u: usize, v: usize) {
        assert_ne!(u, v, "self-loop");
        self.directed.insert((u, v));
    }

    pub fn add_bidirected(&mut self, u: usize, v: usize) {
        assert_ne!(u, v, "self-loop");
        self.bidirected.insert(ordered(u, v));
    }

    pub fn remove_directed(&mut self, u: usize, v: usize) -> bool {
        self.directed.remove(&(u, v))
    }

    pub fn has_directed(&self, u: usize, v: usize) -> bool {
        self.directed.contains(&(u, v))
    }

    pub fn has_bidirected(&self, u: usize, v: usize) -> bool {
        self.bidirected.contains(&ordered(u, v))
    }

    pub fn edge_count(&self) -> usize {
        self.directed.len() + self.bidirected.len()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.directed.iter().filter(|&&(_, b)| b == v).map(|&(a, _)| a).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.directed.iter().filter(|&&(a, _)| a == v).map(|&(_, b)| b).collect()
    }

    pub fn spouses(&self, v: usize) -> Vec<usize> {
        self.bidirected
            .iter()
            .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
            .collect()
    }

    /// Unordered adjacency pairs from either edge type.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.directed
            .iter()
            .map(|&(a, b)| ordered(a, b))
            .chain(self.bidirected.iter().copied())
            .collect()
    }

    /// Kahn's algorithm over the directed part; `None` when cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.directed {
            indeg[b] += 1;
            out[a].push(b);
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &out[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Whether `to` is reachable from `from` along directed edges.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in self.directed.range((v, 0)..(v + 1, 0)) {
                debug_assert_eq!(a, v);
                if b == to {
                    return true;
                }
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }

    /// Adding `u -> v` would close a directed cycle.
    pub fn would_create_cycle(&self, u: usize, v: usize) -> bool {
        self.reaches(v, u)
    }

    /// Ancestors of `seeds`, seeds included.
    pub fn ancestors(&self, seeds: &[usize]) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = seeds.iter().copied().collect();
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            for p in self.parents(v) {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Descendants of `v`, `v` included.
    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([v]);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for c in self.children(u) {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// m-separation of `xs` and `ys` given `zs`, by separation in the
    /// augmented (moralized) graph of the ancestral closure. Within the
    /// closure every district is joined to its parents into a clique, which
    /// connects exactly the endpoints of collider paths.
    pub fn m_separated(&self, xs: &[usize], ys: &[usize], zs: &[usize]) -> bool {
        let seeds: Vec<usize> = xs.iter().chain(ys).chain(zs).copied().collect();
        let anc = self.ancestors(&seeds);
        let n = self.n();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let connect = |adj: &mut Vec<BTreeSet<usize>>, a: usize, b: usize| {
            if a != b {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        };
        for &(a, b) in &self.directed {
            if anc.contains(&a) && anc.contains(&b) {
                connect(&mut adj, a, b);
            }
        }
        // districts restricted to the ancestral set
        let mut district = vec![usize::MAX; n];
        let mut next = 0;
        for &v in &anc {
            if district[v] != usize::MAX {
                continue;
            }
            let mut stack = vec![v];
            district[v] = next;
            while let Some(u) = stack.pop() {
                for s in self.spouses(u) {
                    if anc.contains(&s) && district[s] == usize::MAX {
                        district[s] = next;
                        stack.push(s);
                    }
                }
            }
            next += 1;
        }
        for d in 0..next {
            let members: Vec<usize> = anc.iter().copied().filter(|&v| district[v] == d).collect();
            let mut clique: BTreeSet<usize> = members.iter().copied().collect();
            for &m in &members {
                clique.extend(self.parents(m).into_iter().filter(|p| anc.contains(p)));
            }
            let clique: Vec<usize> = clique.into_iter().collect();
            for i in 0..clique.len() {
                for j in (i + 1)..clique.len() {
                    connect(&mut adj, clique[i], clique[j]);
                }
            }
        }
        let blocked: BTreeSet<usize> = zs.iter().copied().collect();
        let targets: BTreeSet<usize> = ys.iter().copied().collect();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = xs.iter().copied().filter(|x| !blocked.contains(x)).collect();
        for &x in &stack {
            seen[x] = true;
        }
        while let Some(v) = stack.pop() {
            if targets.contains(&v) {
                return false;
            }
            for &w in &adj[v] {
                if !seen[w] && !blocked.contains(&w) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        true
    }

    /// Graphviz rendering: directed edges solid, bidirected edges dashed with
    /// `dir=both`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph admg {\n");
        for v in &self.vertices {
            let _ = writeln!(s, "  \"{}\" [role=\"{}\"];", v.name, v.role.as_str());
        }
        for &(a, b) in &self.directed {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", self.name(a), self.name(b));
        }
        for &(a, b) in &self.bidirected {
            let _ = writeln!(s, "  \"{}\" -> \"{}\" [dir=both, style=dashed];", self.name(a), self.name(b));
        }
        s.push_str("}\n");
        s
    }
}

impl From<Admg> for AdmgJson {
    fn from(g: Admg) -> Self {
        let pair = |&(a, b): &(usize, usize)| [g.name(a).to_string(), g.name(b).to_string()];
        AdmgJson {
            directed: g.directed.iter().map(pair).collect(),
            bidirected: g.bidirected.iter().map(pair).collect(),
            vertices: g.vertices.clone(),
        }
    }
}

impl TryFrom<AdmgJson> for Admg {
    type Error = GraphError;

    fn try_from(j: AdmgJson) -> Result<Self, Self::Error> {
        let mut g = Admg::new(j.vertices);
        for [u, v] in &j.directed {
            let (a, b) = (g.require(u)?, g.require(v)?);
            if a == b {
                return Err(GraphError::SelfLoop(u.clone()));
            }
            g.add_directed(a, b);
        }
        for [u, v] in &j.bidirected {
            let (a, b) = (g.require(u)?, g.require(v)?);
            if a == b {
                return Err(GraphError::SelfLoop(u.clone()));
            }
            g.add_bidirected(a, b);
        }
        if !g.is_acyclic() {
            return Err(GraphError::Cycle);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Kind;

    fn verts(names: &[&str]) -> Vec<VariableMeta> {
        names
            .iter()
            .map(|n| VariableMeta::new(*n, Role::NonManipulableMetric, Kind::Continuous))
            .collect()
    }

    #[test]
    fn pag_json_round_trip() {
        let mut p = Pag::empty(verts(&["a", "b", "c"]));
        p.add_edge(0, 1, EdgeMark::Circle, EdgeMark::Arrow);
        p.add_edge(1, 2, EdgeMark::Tail, EdgeMark::Arrow);
        p.set_sepset(0, 2, vec![1]);
        let s = serde_json::to_string(&p).unwrap();
        let back: Pag = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(p.to_dot().contains("arrowtail=odot, arrowhead=normal"));
    }

    #[test]
    fn admg_cycle_detection_and_json() {
        let mut g = Admg::new(verts(&["a", "b", "c"]));
        g.add_directed(0, 1);
        g.add_directed(1, 2);
        g.add_bidirected(2, 0);
        assert!(g.would_create_cycle(2, 0));
        assert!(!g.would_create_cycle(0, 2));
        assert_eq!(g.topological_order(), Some(vec![0, 1, 2]));
        let back: Admg = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(g.to_dot().contains("[dir=both, style=dashed]"));

        let bad = r#"{"vertices":[{"name":"a","role":"metric","kind":"continuous"},
            {"name":"b","role":"metric","kind":"continuous"}],
            "directed":[["a","b"],["b","a"]],"bidirected":[]}"#;
        assert!(serde_json::from_str::<Admg>(bad).is_err());
    }

    #[test]
    fn m_separation_on_collider_paths() {
        // a -> c <-> d <- b : a, b m-connected given {c, d} only
        let mut g = Admg::new(verts(&["a", "b", "c", "d"]));
        g.add_directed(0, 2);
        g.add_directed(1, 3);
        g.add_bidirected(2, 3);
        assert!(g.m_separated(&[0], &[1], &[]));
        assert!(g.m_separated(&[0], &[1], &[2]));
        assert!(!g.m_separated(&[0], &[1], &[2, 3]));
    }

    #[test]
    fn m_separation_chain_and_fork() {
        let mut g = Admg::new(verts(&["o", "m", "y"]));
        g.add_directed(0, 1);
        g.add_directed(1, 2);
        assert!(!g.m_separated(&[0], &[2], &[]));
        assert!(g.m_separated(&[0], &[2], &[1]));
    }
}
