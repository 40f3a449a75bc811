//! Mixed observed/latent directed graphs and the combinatorial primitives
//! built on them: latent subgraph, semi-direct parents, descendants,
//! (extended) latent reachability, trek enumeration and trek separation,
//! and canonicalization.
//!
//! Nodes are indexed in declaration order with all observed nodes first,
//! followed by the latent nodes. Every set-valued result is a [`NodeSet`]
//! over these indices, so iteration order is always declaration order.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Set of node indices of a graph.
pub type NodeSet = FixedBitSet;

/// Default node bound for exhaustive trek enumeration.
pub const DEFAULT_TREK_BOUND: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Malformed(String),
    #[error("empty node identifier")]
    EmptyName,
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node `{0}` is declared both observed and latent")]
    ObservedLatentOverlap(String),
    #[error("edge endpoint `{0}` is not a declared node")]
    UnknownEndpoint(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` is not observed")]
    NotObserved(String),
    #[error("node `{0}` is not latent")]
    NotLatent(String),
    #[error("graph contains a directed cycle")]
    Cyclic,
    #[error("graph has {size} nodes but the enumeration bound is {bound}")]
    TooLarge { size: usize, bound: usize },
}

/// On-disk JSON form of a [`LatentDigraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub observed: Vec<String>,
    #[serde(default)]
    pub latent: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

/// Directed graph whose nodes are partitioned into observed and latent nodes.
#[derive(Clone, PartialEq, Eq)]
pub struct LatentDigraph {
    names: Vec<String>,
    n_observed: usize,
    edges: Vec<(usize, usize)>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl fmt::Debug for LatentDigraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatentDigraph")
            .field("observed", &&self.names[..self.n_observed])
            .field("latent", &&self.names[self.n_observed..])
            .field(
                "edges",
                &self
                    .edges
                    .iter()
                    .map(|&(u, v)| format!("{}->{}", self.names[u], self.names[v]))
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl LatentDigraph {
    pub fn new<S: AsRef<str>>(
        observed: &[S],
        latent: &[S],
        edges: &[(S, S)],
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(observed.len() + latent.len());
        for name in observed.iter().map(AsRef::as_ref) {
            if name.is_empty() {
                return Err(GraphError::EmptyName);
            }
            if index.insert(name.to_string(), names.len()).is_some() {
                return Err(GraphError::DuplicateNode(name.to_string()));
            }
            names.push(name.to_string());
        }
        for name in latent.iter().map(AsRef::as_ref) {
            if name.is_empty() {
                return Err(GraphError::EmptyName);
            }
            match index.get(name) {
                Some(&i) if i < observed.len() => {
                    return Err(GraphError::ObservedLatentOverlap(name.to_string()))
                }
                Some(_) => return Err(GraphError::DuplicateNode(name.to_string())),
                None => {}
            }
            index.insert(name.to_string(), names.len());
            names.push(name.to_string());
        }
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (tail, head) in edges {
            let (tail, head) = (tail.as_ref(), head.as_ref());
            let u = *index
                .get(tail)
                .ok_or_else(|| GraphError::UnknownEndpoint(tail.to_string()))?;
            let v = *index
                .get(head)
                .ok_or_else(|| GraphError::UnknownEndpoint(head.to_string()))?;
            idx_edges.push((u, v));
        }
        Self::from_indexed(names, observed.len(), idx_edges)
    }

    /// Builds a graph from node names (observed first) and index edges.
    pub fn from_indexed(
        names: Vec<String>,
        n_observed: usize,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        assert!(n_observed <= names.len());
        let n = names.len();
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(GraphError::EmptyName);
            }
            if let Some(j) = index.insert(name.clone(), i) {
                return Err(if (j < n_observed) != (i < n_observed) {
                    GraphError::ObservedLatentOverlap(name.clone())
                } else {
                    GraphError::DuplicateNode(name.clone())
                });
            }
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut children = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for &(u, v) in &edges {
            assert!(u < n && v < n, "edge endpoint out of range");
            if u == v {
                return Err(GraphError::SelfLoop(names[u].clone()));
            }
            if !seen.insert((u, v)) {
                return Err(GraphError::DuplicateEdge(names[u].clone(), names[v].clone()));
            }
            children[u].push(v);
            parents[v].push(u);
        }
        Ok(Self { names, n_observed, edges, children, parents, index })
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self, GraphError> {
        let edges: Vec<(&str, &str)> =
            doc.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let observed: Vec<&str> = doc.observed.iter().map(String::as_str).collect();
        let latent: Vec<&str> = doc.latent.iter().map(String::as_str).collect();
        Self::new(&observed, &latent, &edges)
    }

    /// Parses the graph JSON schema
    /// `{"observed": [...], "latent": [...], "edges": [[tail, head], ...]}`.
    pub fn parse_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            observed: self.names[..self.n_observed].to_vec(),
            latent: self.names[self.n_observed..].to_vec(),
            edges: self
                .edges
                .iter()
                .map(|&(u, v)| (self.names[u].clone(), self.names[v].clone()))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("graph serialization cannot fail")
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn n_observed(&self) -> usize {
        self.n_observed
    }

    pub fn n_latent(&self) -> usize {
        self.names.len() - self.n_observed
    }

    pub fn observed(&self) -> std::ops::Range<usize> {
        0..self.n_observed
    }

    pub fn latent(&self) -> std::ops::Range<usize> {
        self.n_observed..self.names.len()
    }

    pub fn is_observed(&self, v: usize) -> bool {
        v < self.n_observed
    }

    pub fn is_latent(&self, v: usize) -> bool {
        v >= self.n_observed && v < self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn node_or_err(&self, name: &str) -> Result<usize, GraphError> {
        self.node(name).ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.children[u].contains(&v)
    }

    /// Index of edge `u -> v` in [`Self::edges`].
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (u, v))
    }

    /// Whether `u -> v` belongs to the latent subgraph.
    pub fn is_latent_edge(&self, u: usize) -> bool {
        self.is_latent(u)
    }

    pub fn empty_set(&self) -> NodeSet {
        FixedBitSet::with_capacity(self.n_nodes())
    }

    pub fn set_of(&self, nodes: impl IntoIterator<Item = usize>) -> NodeSet {
        let mut s = self.empty_set();
        for v in nodes {
            s.insert(v);
        }
        s
    }

    pub fn observed_set(&self) -> NodeSet {
        self.set_of(self.observed())
    }

    /// Resolves node names to a set.
    pub fn named_set<S: AsRef<str>>(&self, names: &[S]) -> Result<NodeSet, GraphError> {
        let mut s = self.empty_set();
        for n in names {
            s.insert(self.node_or_err(n.as_ref())?);
        }
        Ok(s)
    }

    pub fn set_names(&self, set: &NodeSet) -> Vec<String> {
        set.ones().map(|v| self.names[v].clone()).collect()
    }

    fn check_latent(&self, set: &NodeSet) -> Result<(), GraphError> {
        match set.ones().find(|&v| !self.is_latent(v)) {
            Some(v) => Err(GraphError::NotLatent(self.names[v].clone())),
            None => Ok(()),
        }
    }

    /// Subgraph keeping only the edges with a latent tail.
    pub fn latent_subgraph(&self) -> LatentDigraph {
        let edges = self.edges.iter().copied().filter(|&(u, _)| self.is_latent(u)).collect();
        LatentDigraph::from_indexed(self.names.clone(), self.n_observed, edges)
            .expect("edge subset of a valid graph is valid")
    }

    /// Observed `w` with `w ⇝ v`: a direct edge, or a directed path whose
    /// intermediate nodes are all latent.
    pub fn semi_direct_parents(&self, v: usize) -> Result<NodeSet, GraphError> {
        if !self.is_observed(v) {
            return Err(GraphError::NotObserved(self.names[v].clone()));
        }
        Ok(self.semi_direct_parents_of(v))
    }

    pub(crate) fn semi_direct_parents_of(&self, v: usize) -> NodeSet {
        let mut result = self.empty_set();
        let mut seen = self.empty_set();
        let mut queue = VecDeque::new();
        for &u in &self.parents[v] {
            if self.is_observed(u) {
                result.insert(u);
            } else if !seen.put(u) {
                queue.push_back(u);
            }
        }
        while let Some(h) = queue.pop_front() {
            for &u in &self.parents[h] {
                if self.is_observed(u) {
                    result.insert(u);
                } else if !seen.put(u) {
                    queue.push_back(u);
                }
            }
        }
        result
    }

    /// Nodes reachable from `v` by a directed path, including `v`.
    pub fn descendants(&self, v: usize) -> NodeSet {
        let mut start = self.empty_set();
        start.insert(v);
        self.descendants_of_set(&start)
    }

    pub fn descendants_of_set(&self, sources: &NodeSet) -> NodeSet {
        let mut seen = sources.clone();
        let mut stack: Vec<usize> = sources.ones().collect();
        while let Some(u) = stack.pop() {
            for &w in &self.children[u] {
                if !seen.put(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Nodes that reach `v` by a directed path, including `v`.
    pub fn ancestors(&self, v: usize) -> NodeSet {
        let mut seen = self.empty_set();
        seen.insert(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for &w in &self.parents[u] {
                if !seen.put(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Right-side endpoints of treks whose left side ends in `starts`.
    ///
    /// Walks the doubled trek graph: up against edges on the left side while
    /// avoiding `avoid_left`, crossing at a top not in `avoid_right`, then
    /// down along edges avoiding `avoid_right`. With `latent_edges_only` the
    /// walk uses only edges with a latent tail.
    fn trek_closure(
        &self,
        starts: &NodeSet,
        avoid_left: &NodeSet,
        avoid_right: &NodeSet,
        latent_edges_only: bool,
    ) -> NodeSet {
        let n = self.n_nodes();
        let mut left = FixedBitSet::with_capacity(n);
        let mut right = FixedBitSet::with_capacity(n);
        let mut stack: Vec<(usize, bool)> = Vec::new();
        for a in starts.ones() {
            if !avoid_left.contains(a) && !left.put(a) {
                stack.push((a, false));
            }
        }
        while let Some((u, on_right)) = stack.pop() {
            if on_right {
                if latent_edges_only && !self.is_latent(u) {
                    continue;
                }
                for &w in &self.children[u] {
                    if !avoid_right.contains(w) && !right.put(w) {
                        stack.push((w, true));
                    }
                }
            } else {
                if !avoid_right.contains(u) && !right.put(u) {
                    stack.push((u, true));
                }
                for &p in &self.parents[u] {
                    if latent_edges_only && !self.is_latent(p) {
                        continue;
                    }
                    if !avoid_left.contains(p) && !left.put(p) {
                        stack.push((p, false));
                    }
                }
            }
        }
        right
    }

    /// Observed nodes `w` reachable from `sources` by a latent trek whose
    /// left part avoids `h1` and whose right part avoids `h2`.
    pub fn latent_reachable(
        &self,
        h1: &NodeSet,
        h2: &NodeSet,
        sources: &NodeSet,
    ) -> Result<NodeSet, GraphError> {
        self.check_latent(h1)?;
        self.check_latent(h2)?;
        Ok(self.lr(h1, h2, sources))
    }

    pub(crate) fn lr(&self, h1: &NodeSet, h2: &NodeSet, sources: &NodeSet) -> NodeSet {
        let mut r = self.trek_closure(sources, h1, h2, true);
        for v in self.latent() {
            r.set(v, false);
        }
        r
    }

    /// Observed descendants of the nodes latent reachable from `sources`.
    pub fn extended_latent_reachable(
        &self,
        h1: &NodeSet,
        h2: &NodeSet,
        sources: &NodeSet,
    ) -> Result<NodeSet, GraphError> {
        self.check_latent(h1)?;
        self.check_latent(h2)?;
        Ok(self.elr(h1, h2, sources))
    }

    pub(crate) fn elr(&self, h1: &NodeSet, h2: &NodeSet, sources: &NodeSet) -> NodeSet {
        let mut r = self.descendants_of_set(&self.lr(h1, h2, sources));
        for v in self.latent() {
            r.set(v, false);
        }
        r
    }

    /// Observed nodes `w` with a latent trek from some node of `sources`
    /// to `w` (sources may be latent).
    pub fn latent_trek_reach(&self, sources: &NodeSet) -> NodeSet {
        let none = self.empty_set();
        let mut r = self.trek_closure(sources, &none, &none, true);
        for v in self.latent() {
            r.set(v, false);
        }
        r
    }

    /// Observed nodes reached by a directed path in the latent subgraph
    /// from some node of `sources`.
    pub fn latent_path_reach(&self, sources: &NodeSet) -> NodeSet {
        let mut r = self.empty_set();
        for h in sources.ones() {
            r.union_with(&self.latent_descendants(h));
        }
        for v in self.latent() {
            r.set(v, false);
        }
        r
    }

    /// Whether a latent trek connects `a` and `b` (in either orientation;
    /// treks are symmetric under swapping the two parts).
    pub(crate) fn has_latent_trek(&self, a: usize, b: usize) -> bool {
        let none = self.empty_set();
        let mut s = self.empty_set();
        s.insert(a);
        self.trek_closure(&s, &none, &none, true).contains(b)
    }

    /// Whether `(ca, cb)` trek separates `a` from `b`: every trek from a node
    /// of `a` to a node of `b` meets `ca` on its left part or `cb` on its
    /// right part. Decided by reachability, so cyclic graphs are fine.
    pub fn trek_separates(&self, a: &NodeSet, b: &NodeSet, ca: &NodeSet, cb: &NodeSet) -> bool {
        let reached = self.trek_closure(a, ca, cb, false);
        reached.is_disjoint(b)
    }

    /// Topological order of all nodes, or `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n_nodes();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &w in &self.children[u] {
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

    /// Acyclic, and no observed pair `u ⇝ v` is also joined by a trek in the
    /// latent subgraph.
    pub fn is_confounding_free_acyclic(&self) -> bool {
        if !self.is_acyclic() {
            return false;
        }
        self.observed().all(|v| {
            self.semi_direct_parents_of(v).ones().all(|u| !self.has_latent_trek(u, v))
        })
    }

    /// Canonical graph: observed `v -> w` iff `v ⇝ w`, latent `h -> w`
    /// (w observed) iff a directed path from `h` to `w` exists in the latent
    /// subgraph. Latent nodes become sources.
    ///
    /// A latent-mediated cycle `v ⇝ v` would map to a self-loop; such pairs
    /// are dropped.
    pub fn canonicalize(&self) -> LatentDigraph {
        let mut edges = Vec::new();
        let sdp: Vec<NodeSet> = self.observed().map(|v| self.semi_direct_parents_of(v)).collect();
        for tail in self.observed() {
            for head in self.observed() {
                if tail != head && sdp[head].contains(tail) {
                    edges.push((tail, head));
                }
            }
        }
        for tail in self.latent() {
            let reach = self.latent_descendants(tail);
            for head in self.observed() {
                if reach.contains(head) {
                    edges.push((tail, head));
                }
            }
        }
        LatentDigraph::from_indexed(self.names.clone(), self.n_observed, edges)
            .expect("canonical edges are valid")
    }

    /// Nodes reachable from `h` along edges of the latent subgraph.
    fn latent_descendants(&self, h: usize) -> NodeSet {
        let mut seen = self.empty_set();
        let mut stack = vec![h];
        while let Some(u) = stack.pop() {
            if !self.is_latent(u) {
                continue;
            }
            for &w in &self.children[u] {
                if !seen.put(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Every trek from `v` to `w`, trivial ones included. Order: by top in
    /// declaration order, then by depth-first path order.
    pub fn enumerate_treks(&self, v: usize, w: usize, bound: usize) -> Result<Vec<Trek>, GraphError> {
        if self.n_nodes() > bound {
            return Err(GraphError::TooLarge { size: self.n_nodes(), bound });
        }
        if !self.is_acyclic() {
            return Err(GraphError::Cyclic);
        }
        let anc_v = self.ancestors(v);
        let anc_w = self.ancestors(w);
        let mut treks = Vec::new();
        for top in 0..self.n_nodes() {
            if !(anc_v.contains(top) && anc_w.contains(top)) {
                continue;
            }
            let lefts = self.directed_paths(top, v);
            let rights = self.directed_paths(top, w);
            for l in &lefts {
                for r in &rights {
                    treks.push(Trek { left: l.clone(), right: r.clone() });
                }
            }
        }
        Ok(treks)
    }

    /// All directed paths from `from` to `to` (acyclic graphs).
    pub fn directed_paths(&self, from: usize, to: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![from];
        self.paths_dfs(to, &mut path, &mut out);
        out
    }

    fn paths_dfs(&self, to: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if u == to {
            out.push(path.clone());
            return;
        }
        for &w in &self.children[u] {
            if path.contains(&w) {
                continue;
            }
            path.push(w);
            self.paths_dfs(to, path, out);
            path.pop();
        }
    }
}

/// Pair of directed paths sharing their first node (the top). `left` runs
/// from the top to the left endpoint, `right` from the top to the right one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trek {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Trek {
    pub fn top(&self) -> usize {
        self.left[0]
    }

    pub fn left_end(&self) -> usize {
        *self.left.last().unwrap()
    }

    pub fn right_end(&self) -> usize {
        *self.right.last().unwrap()
    }

    /// Edges of both parts, left part first; an edge used by both parts
    /// appears twice.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.left
            .windows(2)
            .chain(self.right.windows(2))
            .map(|w| (w[0], w[1]))
    }

    pub fn is_valid_in(&self, g: &LatentDigraph) -> bool {
        !self.left.is_empty()
            && !self.right.is_empty()
            && self.left[0] == self.right[0]
            && self.edges().all(|(u, v)| g.has_edge(u, v))
    }

    pub fn display(&self, g: &LatentDigraph) -> String {
        let mut s = String::new();
        for (i, &v) in self.left.iter().rev().enumerate() {
            if i > 0 {
                s.push_str(" <- ");
            }
            s.push_str(g.name(v));
        }
        for &v in &self.right[1..] {
            s.push_str(" -> ");
            s.push_str(g.name(v));
        }
        s
    }
}

/// Set of treks with distinct starts and distinct ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrekSystem {
    pub treks: Vec<Trek>,
}

impl TrekSystem {
    pub fn new(treks: Vec<Trek>) -> Self {
        Self { treks }
    }

    pub fn sources(&self) -> Vec<usize> {
        self.treks.iter().map(Trek::left_end).collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        self.treks.iter().map(Trek::right_end).collect()
    }

    /// Distinct sources and distinct sinks.
    pub fn is_system(&self) -> bool {
        let s: HashSet<usize> = self.sources().into_iter().collect();
        let t: HashSet<usize> = self.sinks().into_iter().collect();
        s.len() == self.treks.len() && t.len() == self.treks.len()
    }

    /// Two left parts or two right parts share a node.
    pub fn has_sided_intersection(&self) -> bool {
        fn overlapping<'a>(paths: impl Iterator<Item = &'a Vec<usize>>) -> bool {
            let mut seen = HashSet::new();
            for p in paths {
                for &v in p {
                    if !seen.insert(v) {
                        return true;
                    }
                }
            }
            false
        }
        overlapping(self.treks.iter().map(|t| &t.left)) || overlapping(self.treks.iter().map(|t| &t.right))
    }
}
