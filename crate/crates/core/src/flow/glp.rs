//! The doubled graph `G^lp` that turns trek systems into path systems.
//!
//! Nodes `0..n` are the original nodes and `n..2n` their primed copies.
//! Edges: `v -> h` for every latent edge `h -> v`, bridges `v -> v'`, and
//! `u' -> v'` for every edge `u -> v`. The subgraph keeps the same reversed
//! edges and bridges but only the primed copies of latent edges. A path
//! from `y` to `w'` reads as a trek: the unprimed part reversed is the left
//! part, the primed part is the right part.

use crate::graph::{LatentDigraph, NodeSet, Trek, TrekSystem};

use super::{has_path_system, Decision, Digraph, FlowError, IlpStats, PathSystemOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlpGraph {
    pub digraph: Digraph,
    /// Marks the edges of the subgraph `G^lp_lat`.
    pub lat_mask: Vec<bool>,
    n: usize,
}

pub fn build_glp(g: &LatentDigraph) -> GlpGraph {
    let n = g.n_nodes();
    let mut names: Vec<String> = g.names().to_vec();
    names.extend(g.names().iter().map(|s| format!("{s}'")));
    let mut edges = Vec::new();
    let mut mask = Vec::new();
    for &(h, v) in g.edges() {
        if g.is_latent(h) {
            edges.push((v, h));
            mask.push(true);
        }
    }
    for v in 0..n {
        edges.push((v, n + v));
        mask.push(true);
    }
    for &(u, v) in g.edges() {
        edges.push((n + u, n + v));
        mask.push(g.is_latent(u));
    }
    GlpGraph { digraph: Digraph::new(names, edges), lat_mask: mask, n }
}

#[derive(Debug, Clone)]
pub struct TrekSystemOutcome {
    pub found: bool,
    /// Witness treks, `Z` sinks first, then `P`, each in node order.
    pub system: Option<TrekSystem>,
    pub decided_by: Decision,
    pub ilp_stats: Option<IlpStats>,
    pub budget_exhausted: bool,
}

impl GlpGraph {
    pub fn n_original(&self) -> usize {
        self.n
    }

    pub fn primed(&self, v: usize) -> usize {
        self.n + v
    }

    pub fn subgraph_edges(&self) -> Vec<(usize, usize)> {
        self.digraph.edges.iter().zip(&self.lat_mask).filter(|(_, &m)| m).map(|(&e, _)| e).collect()
    }

    fn path_to_trek(&self, path: &[usize]) -> Trek {
        let k = path.iter().position(|&v| v >= self.n).expect("path ends in a primed node");
        let left: Vec<usize> = path[..k].iter().rev().copied().collect();
        let right: Vec<usize> = path[k..].iter().map(|&v| v - self.n).collect();
        Trek { left, right }
    }

    /// Trek system from some `Y ⊆ ya` to `z ∪ p` with no sided
    /// intersection, left parts in `G_lat`, and right parts ending in `z`
    /// in `G_lat`.
    pub fn trek_system(
        &self,
        z: &NodeSet,
        p: &NodeSet,
        ya: &NodeSet,
        opts: &PathSystemOptions,
    ) -> Result<TrekSystemOutcome, FlowError> {
        let zs: Vec<usize> = z.ones().map(|v| self.primed(v)).collect();
        let ps: Vec<usize> = p.ones().map(|v| self.primed(v)).collect();
        let ys: Vec<usize> = ya.ones().collect();
        if let Some(v) = z.ones().find(|&v| p.contains(v)) {
            return Err(FlowError::OverlappingSinks(self.digraph.names[v].clone()));
        }
        let out = has_path_system(&self.digraph, &self.lat_mask, &zs, &ps, &ys, opts)?;
        let system = out
            .found
            .then(|| TrekSystem::new(out.paths.iter().map(|path| self.path_to_trek(path)).collect()));
        Ok(TrekSystemOutcome {
            found: out.found,
            system,
            decided_by: out.decided_by,
            ilp_stats: out.ilp_stats,
            budget_exhausted: out.budget_exhausted,
        })
    }
}

pub fn has_trek_system(
    g: &LatentDigraph,
    z: &NodeSet,
    p: &NodeSet,
    ya: &NodeSet,
    opts: &PathSystemOptions,
) -> Result<TrekSystemOutcome, FlowError> {
    build_glp(g).trek_system(z, p, ya, opts)
}

/// Whether `sys` is a valid witness for [`GlpGraph::trek_system`].
pub fn is_valid_trek_system(g: &LatentDigraph, sys: &TrekSystem, z: &NodeSet, p: &NodeSet, ya: &NodeSet) -> bool {
    let lat = |path: &[usize]| path.windows(2).all(|w| g.is_latent(w[0]));
    let mut sinks = g.empty_set();
    for t in &sys.treks {
        if !t.is_valid_in(g) || !ya.contains(t.left_end()) || !lat(&t.left) {
            return false;
        }
        let w = t.right_end();
        if z.contains(w) {
            if !lat(&t.right) {
                return false;
            }
        } else if !p.contains(w) {
            return false;
        }
        sinks.insert(w);
    }
    let mut want = z.clone();
    want.union_with(p);
    sys.is_system() && !sys.has_sided_intersection() && sinks == want && sys.treks.len() == want.count_ones(..)
}
