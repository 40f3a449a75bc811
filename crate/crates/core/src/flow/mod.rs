//! Subgraph-restricted flow integer program and the path/trek system
//! decisions built on it.
//!
//! Given a digraph `G = (V, D)`, a subgraph edge set `D1 ⊆ D` and node sets
//! `Z`, `P`, `Ya` with `Z ∩ P = ∅`, the question is whether some `Y ⊆ Ya`
//! admits node-disjoint paths onto `Z ∪ P` where the paths ending in `Z`
//! only use `D1` edges. The exact decision is the 0/1 program built by
//! [`build_lp`] and solved by [`solve_ilp`]; [`has_path_system`] wraps it
//! with max-flow bounds that settle most instances without branching.

mod glp;
mod ilp;
mod maxflow;
mod oracle;
pub mod simplex;

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

pub use glp::{build_glp, has_trek_system, is_valid_trek_system, GlpGraph, TrekSystemOutcome};
pub use ilp::{solve_ilp, IlpOptions, IlpSolution, IlpStats};
pub use maxflow::DisjointPaths;
pub use oracle::{brute_force_path_system, brute_force_trek_system, DEFAULT_BRUTE_FORCE_BOUND};
pub use simplex::{LinearProgram, LpRow, Sense};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("node `{0}` is in both Z and P")]
    OverlappingSinks(String),
    #[error("node index {0} is out of range")]
    UnknownNode(usize),
    #[error("subgraph edge {0} -> {1} is not an edge of the graph")]
    NotAnEdge(usize, usize),
    #[error("graph has {size} nodes but the brute-force bound is {bound}")]
    TooLarge { size: usize, bound: usize },
}

/// Plain directed graph with named nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Digraph {
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize)>) -> Self {
        assert!(edges.iter().all(|&(u, v)| u < names.len() && v < names.len()));
        Self { names, edges }
    }

    /// Builds from names; panics on unknown endpoints (fixture helper).
    pub fn from_names(nodes: &[&str], edges: &[(&str, &str)]) -> Self {
        let names: Vec<String> = nodes.iter().map(|s| s.to_string()).collect();
        let idx = |s: &str| names.iter().position(|n| n == s).unwrap_or_else(|| panic!("unknown node {s}"));
        let edges = edges.iter().map(|&(a, b)| (idx(a), idx(b))).collect();
        Self::new(names, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Mask over [`Self::edges`] from an explicit subgraph edge list.
    pub fn subgraph_mask(&self, g1: &[(usize, usize)]) -> Result<Vec<bool>, FlowError> {
        let mut mask = vec![false; self.edges.len()];
        for &(u, v) in g1 {
            let i = self
                .edges
                .iter()
                .position(|&e| e == (u, v))
                .ok_or(FlowError::NotAnEdge(u, v))?;
            mask[i] = true;
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowEdgeKind {
    /// Edge `i` of the input graph.
    Original(usize),
    Source,
    ZSink,
    PSink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowEdge {
    pub tail: usize,
    pub head: usize,
    /// Whether `f¹` may use this edge.
    pub in_subgraph: bool,
    pub kind: FlowEdgeKind,
}

/// `G_flow(Z, P, Ya)`: original nodes `0..n`, then `s = n`, `t = n + 1`.
/// Edge order: input edges, `s -> y` (Ya order), `z -> t`, `p -> t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowGraph {
    pub n_original: usize,
    pub edges: Vec<FlowEdge>,
    pub z: Vec<usize>,
    pub p: Vec<usize>,
    pub ya: Vec<usize>,
}

impl FlowGraph {
    pub fn s(&self) -> usize {
        self.n_original
    }

    pub fn t(&self) -> usize {
        self.n_original + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_original + 2
    }
}

fn sorted_unique(v: &[usize], n: usize) -> Result<Vec<usize>, FlowError> {
    if let Some(&bad) = v.iter().find(|&&x| x >= n) {
        return Err(FlowError::UnknownNode(bad));
    }
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

pub fn build_flow_graph(
    g: &Digraph,
    g1_mask: &[bool],
    z: &[usize],
    p: &[usize],
    ya: &[usize],
) -> Result<FlowGraph, FlowError> {
    assert_eq!(g1_mask.len(), g.edges.len(), "subgraph mask length");
    let n = g.n_nodes();
    let (z, p, ya) = (sorted_unique(z, n)?, sorted_unique(p, n)?, sorted_unique(ya, n)?);
    if let Some(&both) = z.iter().find(|x| p.contains(x)) {
        return Err(FlowError::OverlappingSinks(g.names[both].clone()));
    }
    let (s, t) = (n, n + 1);
    let mut edges: Vec<FlowEdge> = g
        .edges
        .iter()
        .enumerate()
        .map(|(i, &(u, v))| FlowEdge { tail: u, head: v, in_subgraph: g1_mask[i], kind: FlowEdgeKind::Original(i) })
        .collect();
    edges.extend(ya.iter().map(|&y| FlowEdge { tail: s, head: y, in_subgraph: true, kind: FlowEdgeKind::Source }));
    edges.extend(z.iter().map(|&v| FlowEdge { tail: v, head: t, in_subgraph: true, kind: FlowEdgeKind::ZSink }));
    edges.extend(p.iter().map(|&v| FlowEdge { tail: v, head: t, in_subgraph: false, kind: FlowEdgeKind::PSink }));
    Ok(FlowGraph { n_original: n, edges, z, p, ya })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Conservation { node: usize, subgraph: bool },
    Capacity { node: usize, subgraph: bool },
    ForcedZero { edge: usize },
    Joint { node: usize },
}

/// `Lp(G, G1, Z, P, Ya)`. Variable `e` is `f_e`, variable `|D_f| + e` is
/// `f¹_e`. Nonnegativity is the variable domain of [`LinearProgram`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowProgram {
    pub graph: FlowGraph,
    pub lp: LinearProgram,
    pub row_kinds: Vec<RowKind>,
}

impl FlowProgram {
    pub fn n_edges(&self) -> usize {
        self.graph.edges.len()
    }

    pub fn f(&self, e: usize) -> usize {
        e
    }

    pub fn f1(&self, e: usize) -> usize {
        self.graph.edges.len() + e
    }

    /// `|Z| + |P|`, the largest attainable objective.
    pub fn target(&self) -> usize {
        self.graph.z.len() + self.graph.p.len()
    }

    /// CPLEX LP text for cross-checking with external solvers.
    pub fn to_lp_text(&self) -> String {
        let m = self.n_edges();
        let var = |j: usize| if j < m { format!("f_{j}") } else { format!("g_{}", j - m) };
        let term_list = |coeffs: &[(usize, i64)]| {
            let mut s = String::new();
            for (k, &(j, c)) in coeffs.iter().enumerate() {
                let sign = match (c < 0, k > 0) {
                    (true, true) => " - ",
                    (true, false) => "-",
                    (false, true) => " + ",
                    (false, false) => "",
                };
                let mag = c.abs();
                let coef = if mag == 1 { String::new() } else { format!("{mag} ") };
                let _ = write!(s, "{sign}{coef}{}", var(j));
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };
        let mut out = String::from("\\ f_e: full flow, g_e: subgraph flow\nMaximize\n obj: ");
        let obj: Vec<(usize, i64)> =
            self.lp.objective.iter().enumerate().filter(|(_, &c)| c != 0).map(|(j, &c)| (j, c)).collect();
        out.push_str(&term_list(&obj));
        out.push_str("\nSubject To\n");
        for (i, row) in self.lp.rows.iter().enumerate() {
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " r{i}: {} {op} {}", term_list(&row.coeffs), row.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.lp.n_vars {
            let _ = writeln!(out, " 0 <= {} <= 1", var(j));
        }
        out.push_str("General\n");
        for j in 0..self.lp.n_vars {
            let _ = write!(out, " {}", var(j));
        }
        out.push_str("\nEnd\n");
        out
    }
}

pub fn build_lp(fg: &FlowGraph) -> FlowProgram {
    let m = fg.edges.len();
    let n_vars = 2 * m;
    let mut objective = vec![0i64; n_vars];
    for (e, edge) in fg.edges.iter().enumerate() {
        match edge.kind {
            FlowEdgeKind::ZSink => objective[m + e] = 1,
            FlowEdgeKind::PSink => objective[e] = 1,
            _ => {}
        }
    }
    let n = fg.n_original;
    let mut incoming = vec![Vec::new(); n];
    let mut outgoing = vec![Vec::new(); n];
    for (e, edge) in fg.edges.iter().enumerate() {
        if edge.head < n {
            incoming[edge.head].push(e);
        }
        if edge.tail < n {
            outgoing[edge.tail].push(e);
        }
    }
    let mut rows = Vec::new();
    let mut kinds = Vec::new();
    for (subgraph, offset) in [(false, 0), (true, m)] {
        for v in 0..n {
            let mut coeffs: Vec<(usize, i64)> = incoming[v].iter().map(|&e| (offset + e, 1)).collect();
            coeffs.extend(outgoing[v].iter().map(|&e| (offset + e, -1)));
            rows.push(LpRow { coeffs, sense: Sense::Eq, rhs: 0 });
            kinds.push(RowKind::Conservation { node: v, subgraph });
            rows.push(LpRow {
                coeffs: incoming[v].iter().map(|&e| (offset + e, 1)).collect(),
                sense: Sense::Le,
                rhs: 1,
            });
            kinds.push(RowKind::Capacity { node: v, subgraph });
        }
    }
    for (e, edge) in fg.edges.iter().enumerate() {
        if !edge.in_subgraph {
            rows.push(LpRow { coeffs: vec![(m + e, 1)], sense: Sense::Eq, rhs: 0 });
            kinds.push(RowKind::ForcedZero { edge: e });
        }
    }
    for (v, inc) in incoming.iter().enumerate().take(n) {
        let mut coeffs: Vec<(usize, i64)> = inc.iter().map(|&e| (e, 1)).collect();
        coeffs.extend(inc.iter().map(|&e| (m + e, 1)));
        rows.push(LpRow { coeffs, sense: Sense::Le, rhs: 1 });
        kinds.push(RowKind::Joint { node: v });
    }
    FlowProgram { graph: fg.clone(), lp: LinearProgram { n_vars, objective, rows }, row_kinds: kinds }
}

/// Splits an integral flow into node sequences, one per unit leaving `s`
/// in each family. Only paths that reach `t` through a sink edge of the
/// family's objective are kept; cycles are never reached from `s`.
pub fn decompose_paths(prog: &FlowProgram, values: &[num_rational::BigRational]) -> Vec<Vec<usize>> {
    use num_traits::One;
    let fg = &prog.graph;
    let m = fg.edges.len();
    let mut out = Vec::new();
    for (offset, wanted) in [(m, FlowEdgeKind::ZSink), (0, FlowEdgeKind::PSink)] {
        let carries = |e: usize| values[offset + e].is_one();
        let mut out_edges = vec![Vec::new(); fg.n_nodes()];
        for (e, edge) in fg.edges.iter().enumerate() {
            if carries(e) {
                out_edges[edge.tail].push(e);
            }
        }
        for &e0 in &out_edges[fg.s()] {
            let mut path = vec![fg.edges[e0].head];
            let mut seen: HashSet<usize> = HashSet::from([fg.edges[e0].head]);
            let mut last_kind = None;
            loop {
                let u = *path.last().unwrap();
                let Some(&e) = out_edges[u].first() else { break };
                let w = fg.edges[e].head;
                if w == fg.t() {
                    last_kind = Some(fg.edges[e].kind);
                    break;
                }
                if !seen.insert(w) {
                    break;
                }
                path.push(w);
            }
            if last_kind == Some(wanted) {
                out.push(path);
            }
        }
    }
    out
}

/// How [`has_path_system`] reached its verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// A max-flow bound rules the system out.
    FlowBound,
    /// Sequential max-flow routing produced a witness.
    Greedy,
    /// The integer program decided.
    Ilp,
}

#[derive(Debug, Clone)]
pub struct PathSystemOutcome {
    pub found: bool,
    /// Witness paths as node sequences from source to sink, `Z` sinks first.
    pub paths: Vec<Vec<usize>>,
    pub decided_by: Decision,
    /// Set when the integer program ran.
    pub ilp_stats: Option<IlpStats>,
    /// The branch-and-bound budget ran out before optimality was proven.
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSystemOptions {
    /// Settle instances by max-flow bounds and greedy routing before
    /// solving the integer program.
    pub use_fast_paths: bool,
    pub ilp: IlpOptions,
}

impl Default for PathSystemOptions {
    fn default() -> Self {
        Self { use_fast_paths: true, ilp: IlpOptions::default() }
    }
}

fn order_paths(mut paths: Vec<Vec<usize>>, z: &[usize], p: &[usize]) -> Vec<Vec<usize>> {
    let rank = |v: usize| z.iter().chain(p).position(|&x| x == v).unwrap_or(usize::MAX);
    paths.sort_by_key(|path| rank(*path.last().unwrap()));
    paths
}

/// Decides whether some `Y ⊆ Ya` has node-disjoint paths onto `Z ∪ P` with
/// the `Z`-paths inside the subgraph. `g1_mask` flags the subgraph edges.
pub fn has_path_system(
    g: &Digraph,
    g1_mask: &[bool],
    z: &[usize],
    p: &[usize],
    ya: &[usize],
    opts: &PathSystemOptions,
) -> Result<PathSystemOutcome, FlowError> {
    let fg = build_flow_graph(g, g1_mask, z, p, ya)?;
    let (z, p, ya) = (&fg.z, &fg.p, &fg.ya);
    let n = g.n_nodes();
    let quick = |found, paths: Vec<Vec<usize>>, decided_by| PathSystemOutcome {
        found,
        paths,
        decided_by,
        ilp_stats: None,
        budget_exhausted: false,
    };
    if opts.use_fast_paths {
        let sub_edges = || g.edges.iter().zip(g1_mask).filter(|(_, &m)| m).map(|(&e, _)| e);
        let no_block = vec![false; n];
        let (nz, z_paths) = DisjointPaths::new(n, sub_edges(), &no_block).max_paths(ya, z);
        if nz < z.len() {
            return Ok(quick(false, Vec::new(), Decision::FlowBound));
        }
        let (np, p_paths) = DisjointPaths::new(n, g.edges.iter().copied(), &no_block).max_paths(ya, p);
        if np < p.len() {
            return Ok(quick(false, Vec::new(), Decision::FlowBound));
        }
        let sinks: Vec<usize> = z.iter().chain(p).copied().collect();
        let (nj, _) = DisjointPaths::new(n, g.edges.iter().copied(), &no_block).max_paths(ya, &sinks);
        if nj < sinks.len() {
            return Ok(quick(false, Vec::new(), Decision::FlowBound));
        }
        // route one family, then the other around it
        let blocked_by = |paths: &[Vec<usize>], others: &[usize]| {
            let mut b = vec![false; n];
            for &v in paths.iter().flatten().chain(others) {
                b[v] = true;
            }
            b
        };
        let (np2, p_rest) =
            DisjointPaths::new(n, g.edges.iter().copied(), &blocked_by(&z_paths, z)).max_paths(ya, p);
        if np2 == p.len() {
            let paths = order_paths(z_paths.into_iter().chain(p_rest).collect(), z, p);
            return Ok(quick(true, paths, Decision::Greedy));
        }
        let (nz2, z_rest) = DisjointPaths::new(n, sub_edges(), &blocked_by(&p_paths, p)).max_paths(ya, z);
        if nz2 == z.len() {
            let paths = order_paths(z_rest.into_iter().chain(p_paths).collect(), z, p);
            return Ok(quick(true, paths, Decision::Greedy));
        }
    }
    let prog = build_lp(&fg);
    let sol = solve_ilp(&prog, &opts.ilp);
    let target = num_rational::BigRational::from_integer(prog.target().into());
    let found = sol.objective == target;
    let paths = if found { order_paths(decompose_paths(&prog, &sol.values), z, p) } else { Vec::new() };
    Ok(PathSystemOutcome {
        found,
        paths,
        decided_by: Decision::Ilp,
        budget_exhausted: sol.stats.budget_exhausted,
        ilp_stats: Some(sol.stats),
    })
}

/// Checks that `paths` is a valid witness: node-disjoint, sources in `ya`,
/// sinks exactly `Z ∪ P`, `Z`-paths inside the subgraph.
pub fn is_valid_path_system(
    g: &Digraph,
    g1_mask: &[bool],
    z: &[usize],
    p: &[usize],
    ya: &[usize],
    paths: &[Vec<usize>],
) -> bool {
    let edge_ok = |u: usize, v: usize, sub: bool| {
        g.edges.iter().zip(g1_mask).any(|(&e, &m)| e == (u, v) && (m || !sub))
    };
    let mut seen = HashSet::new();
    let mut sinks = HashSet::new();
    for path in paths {
        let (Some(&first), Some(&last)) = (path.first(), path.last()) else { return false };
        if !ya.contains(&first) {
            return false;
        }
        let sub = z.contains(&last);
        if !sub && !p.contains(&last) {
            return false;
        }
        if !path.windows(2).all(|w| edge_ok(w[0], w[1], sub)) {
            return false;
        }
        if !path.iter().all(|&v| seen.insert(v)) {
            return false;
        }
        sinks.insert(last);
    }
    let want: HashSet<usize> = z.iter().chain(p).copied().collect();
    sinks == want && paths.len() == want.len()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn fig7() -> (Digraph, Vec<bool>) {
        let g = Digraph::from_names(
            &["y1", "y2", "v", "w", "z", "p"],
            &[
                ("y1", "v"),
                ("y1", "w"),
                ("y2", "v"),
                ("v", "z"),
                ("v", "p"),
                ("y2", "p"),
                ("w", "z"),
            ],
        );
        let mask = vec![true, true, true, true, true, false, false];
        (g, mask)
    }

    #[test]
    fn fig7_flow_graph_shape() {
        let (g, mask) = fig7();
        let fg = build_flow_graph(&g, &mask, &[4], &[5], &[0, 1]).unwrap();
        assert_eq!(fg.edges.len(), 11);
        let added: Vec<(usize, usize)> = fg.edges[7..].iter().map(|e| (e.tail, e.head)).collect();
        assert_eq!(added, vec![(6, 0), (6, 1), (4, 7), (5, 7)]);
        assert!(fg.edges[9].in_subgraph && !fg.edges[10].in_subgraph);
        let prog = build_lp(&fg);
        assert_eq!(prog.lp.n_vars, 22);
        let joint = prog.row_kinds.iter().filter(|k| matches!(k, RowKind::Joint { .. })).count();
        assert_eq!(joint, 6);
        let forced = prog.row_kinds.iter().filter(|k| matches!(k, RowKind::ForcedZero { .. })).count();
        assert_eq!(forced, 3);
        let ones: Vec<usize> = (0..22).filter(|&j| prog.lp.objective[j] == 1).collect();
        assert_eq!(ones, vec![prog.f(10), prog.f1(9)]);
    }

    #[test]
    fn empty_flow_graph() {
        let (g, mask) = fig7();
        let fg = build_flow_graph(&g, &mask, &[], &[], &[]).unwrap();
        assert_eq!(fg.edges.len(), g.edges.len());
        let prog = build_lp(&fg);
        let sol = solve_ilp(&prog, &IlpOptions::default());
        assert_eq!(sol.objective, num_rational::BigRational::from_integer(0.into()));
        let fg = build_flow_graph(&g, &mask, &[], &[], &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(fg.edges.len() - g.edges.len(), 6);
    }

    #[test]
    fn overlapping_sinks_rejected() {
        let (g, mask) = fig7();
        assert_eq!(
            build_flow_graph(&g, &mask, &[4], &[4], &[0]).unwrap_err(),
            FlowError::OverlappingSinks("z".into())
        );
        assert_eq!(build_flow_graph(&g, &mask, &[9], &[], &[0]).unwrap_err(), FlowError::UnknownNode(9));
    }

    #[test]
    fn fig7_ilp_optimum_and_witness() {
        let (g, mask) = fig7();
        let fg = build_flow_graph(&g, &mask, &[4], &[5], &[0, 1]).unwrap();
        let prog = build_lp(&fg);
        let sol = solve_ilp(&prog, &IlpOptions::default());
        assert_eq!(sol.objective, num_rational::BigRational::from_integer(2.into()));
        assert!(sol.integral && sol.optimal);
        assert!(simplex::is_feasible(&prog.lp, &sol.values));
        let paths = order_paths(decompose_paths(&prog, &sol.values), &[4], &[5]);
        assert_eq!(paths, vec![vec![0, 2, 4], vec![1, 5]]);
        for fast in [false, true] {
            let opts = PathSystemOptions { use_fast_paths: fast, ..Default::default() };
            let out = has_path_system(&g, &mask, &[4], &[5], &[0, 1], &opts).unwrap();
            assert!(out.found);
            assert_eq!(out.paths, vec![vec![0, 2, 4], vec![1, 5]]);
        }
    }

    #[test]
    fn no_sources_no_system() {
        let (g, mask) = fig7();
        for fast in [false, true] {
            let opts = PathSystemOptions { use_fast_paths: fast, ..Default::default() };
            assert!(!has_path_system(&g, &mask, &[4], &[], &[], &opts).unwrap().found);
            assert!(has_path_system(&g, &mask, &[], &[], &[], &opts).unwrap().found);
        }
    }

    #[test]
    fn lp_text_mentions_every_row() {
        let (g, mask) = fig7();
        let prog = build_lp(&build_flow_graph(&g, &mask, &[4], &[5], &[0, 1]).unwrap());
        let text = prog.to_lp_text();
        assert!(text.starts_with("\\ f_e"));
        assert!(text.contains(&format!(" r{}:", prog.lp.rows.len() - 1)));
        assert!(text.contains("obj: f_10 + g_9"));
    }
}
