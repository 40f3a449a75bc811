//! Exhaustive searches used as independent oracles for the flow program.

use crate::graph::{GraphError, LatentDigraph, NodeSet, Trek};

use super::{Digraph, FlowError};

pub const DEFAULT_BRUTE_FORCE_BOUND: usize = 10;

/// Backtracking search over simple-path tuples: some `Y ⊆ ya` with
/// node-disjoint paths onto `z ∪ p`, `z`-paths inside the subgraph.
pub fn brute_force_path_system(
    g: &Digraph,
    g1_mask: &[bool],
    z: &[usize],
    p: &[usize],
    ya: &[usize],
) -> Result<bool, FlowError> {
    let n = g.n_nodes();
    if n > DEFAULT_BRUTE_FORCE_BOUND {
        return Err(FlowError::TooLarge { size: n, bound: DEFAULT_BRUTE_FORCE_BOUND });
    }
    if let Some(&v) = z.iter().find(|v| p.contains(v)) {
        return Err(FlowError::OverlappingSinks(g.names[v].clone()));
    }
    if let Some(&v) = z.iter().chain(p).chain(ya).find(|&&v| v >= n) {
        return Err(FlowError::UnknownNode(v));
    }
    let sinks: Vec<(usize, bool)> = z.iter().map(|&v| (v, true)).chain(p.iter().map(|&v| (v, false))).collect();
    let mut preds: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for (&(u, v), &m) in g.edges.iter().zip(g1_mask) {
        preds[v].push((u, m));
    }
    let mut is_ya = vec![false; n];
    for &y in ya {
        is_ya[y] = true;
    }
    let mut used = vec![false; n];
    for &(s, _) in &sinks {
        used[s] = true;
    }
    Ok(assign(0, &sinks, &preds, &is_ya, &mut used))
}

fn assign(i: usize, sinks: &[(usize, bool)], preds: &[Vec<(usize, bool)>], is_ya: &[bool], used: &mut [bool]) -> bool {
    if i == sinks.len() {
        return true;
    }
    let (sink, sub) = sinks[i];
    let mut path = vec![sink];
    extend_back(&mut path, sub, preds, is_ya, used, &mut |used: &mut [bool]| {
        assign(i + 1, sinks, preds, is_ya, used)
    })
}

/// Grows `path` backwards (its last element is the current source
/// candidate); calls `k` with the path's nodes marked used.
fn extend_back(
    path: &mut Vec<usize>,
    sub: bool,
    preds: &[Vec<(usize, bool)>],
    is_ya: &[bool],
    used: &mut [bool],
    k: &mut dyn FnMut(&mut [bool]) -> bool,
) -> bool {
    let u = *path.last().unwrap();
    if is_ya[u] {
        for &v in path.iter() {
            used[v] = true;
        }
        let ok = k(used);
        for &v in &path[1..] {
            used[v] = false;
        }
        if ok {
            return true;
        }
    }
    for &(w, m) in &preds[u] {
        if (sub && !m) || used[w] || path.contains(&w) {
            continue;
        }
        path.push(w);
        if extend_back(path, sub, preds, is_ya, used, k) {
            return true;
        }
        path.pop();
    }
    false
}

/// Exhaustive search over trek systems built from [`LatentDigraph::enumerate_treks`]:
/// some `Y ⊆ ya` with treks onto `z ∪ p`, no sided intersection, left parts
/// in `G_lat`, and right parts ending in `z` in `G_lat`.
pub fn brute_force_trek_system(g: &LatentDigraph, z: &NodeSet, p: &NodeSet, ya: &NodeSet) -> Result<bool, GraphError> {
    let lat = |path: &[usize]| path.windows(2).all(|w| g.is_latent(w[0]));
    let sinks: Vec<(usize, bool)> = z.ones().map(|v| (v, true)).chain(p.ones().map(|v| (v, false))).collect();
    let mut candidates: Vec<Vec<Trek>> = Vec::with_capacity(sinks.len());
    for &(w, in_z) in &sinks {
        let mut c = Vec::new();
        for y in ya.ones() {
            for t in g.enumerate_treks(y, w, DEFAULT_BRUTE_FORCE_BOUND)? {
                if lat(&t.left) && (!in_z || lat(&t.right)) {
                    c.push(t);
                }
            }
        }
        candidates.push(c);
    }
    let n = g.n_nodes();
    let mut left = vec![false; n];
    let mut right = vec![false; n];
    Ok(pick_treks(0, &candidates, &mut left, &mut right))
}

fn pick_treks(i: usize, candidates: &[Vec<Trek>], left: &mut [bool], right: &mut [bool]) -> bool {
    if i == candidates.len() {
        return true;
    }
    for t in &candidates[i] {
        if t.left.iter().any(|&v| left[v]) || t.right.iter().any(|&v| right[v]) {
            continue;
        }
        t.left.iter().for_each(|&v| left[v] = true);
        t.right.iter().for_each(|&v| right[v] = true);
        if pick_treks(i + 1, candidates, left, right) {
            return true;
        }
        t.left.iter().for_each(|&v| left[v] = false);
        t.right.iter().for_each(|&v| right[v] = false);
    }
    false
}
