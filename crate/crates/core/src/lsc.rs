//! The latent-subgraph criterion: tuple checks, the fixpoint decision
//! procedure and certificates.
//!
//! A tuple `(Y, Z, H1, H2)` satisfies the criterion for an observed node
//! `v` when
//! 1. `|Y| = |pa̅(v)| + |Z|`, `|Z| = |H1| + |H2|`, `Z ∩ pa̅(v) = ∅`,
//!    `v ∉ Y ∪ Z`;
//! 2. `Y ∩ (Z ∪ {v}) = ∅` and `(H1, H2)` trek separates `Y` from
//!    `Z ∪ {v}` in the latent subgraph;
//! 3. there is a trek system from `Y` to `pa̅(v) ∪ Z` with no sided
//!    intersection whose left parts, and whose right parts ending in `Z`,
//!    use only latent-subgraph edges.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{build_glp, FlowError, GlpGraph, PathSystemOptions};
use crate::graph::{GraphError, LatentDigraph, NodeSet, TrekSystem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LscError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LscTuple {
    pub v: usize,
    pub y: NodeSet,
    pub z: NodeSet,
    pub h1: NodeSet,
    pub h2: NodeSet,
}

impl LscTuple {
    /// `(∅, ∅, ∅, ∅)` for `v`.
    pub fn trivial(g: &LatentDigraph, v: usize) -> Self {
        Self { v, y: g.empty_set(), z: g.empty_set(), h1: g.empty_set(), h2: g.empty_set() }
    }

    pub fn from_names<S: AsRef<str>>(
        g: &LatentDigraph,
        v: &str,
        y: &[S],
        z: &[S],
        h1: &[S],
        h2: &[S],
    ) -> Result<Self, GraphError> {
        let v = g.node_or_err(v)?;
        if !g.is_observed(v) {
            return Err(GraphError::NotObserved(g.name(v).to_string()));
        }
        let observed = |names: &[S]| -> Result<NodeSet, GraphError> {
            let s = g.named_set(names)?;
            match s.ones().find(|&u| !g.is_observed(u)) {
                Some(u) => Err(GraphError::NotObserved(g.name(u).to_string())),
                None => Ok(s),
            }
        };
        let latent = |names: &[S]| -> Result<NodeSet, GraphError> {
            let s = g.named_set(names)?;
            match s.ones().find(|&u| !g.is_latent(u)) {
                Some(u) => Err(GraphError::NotLatent(g.name(u).to_string())),
                None => Ok(s),
            }
        };
        Ok(Self { v, y: observed(y)?, z: observed(z)?, h1: latent(h1)?, h2: latent(h2)? })
    }

    /// `Z ∪ {v}`.
    pub fn z_and_v(&self) -> NodeSet {
        let mut s = self.z.clone();
        s.insert(self.v);
        s
    }

    /// `Y ∩ elr_{H2,H1}(Z ∪ {v})`: the rows of `Y` that need earlier
    /// recovered effects.
    pub fn y_elr(&self, g: &LatentDigraph) -> NodeSet {
        let mut s = g.elr(&self.h2, &self.h1, &self.z_and_v());
        s.intersect_with(&self.y);
        s
    }

    /// Nodes that must be solved before this tuple applies:
    /// `Z ∪ (Y ∩ elr_{H2,H1}(Z ∪ {v}))`.
    pub fn prerequisites(&self, g: &LatentDigraph) -> NodeSet {
        let mut s = self.y_elr(g);
        s.union_with(&self.z);
        s
    }

    pub fn display(&self, g: &LatentDigraph) -> String {
        let set = |s: &NodeSet| format!("{{{}}}", g.set_names(s).join(","));
        format!(
            "{}: ({}, {}, {}, {})",
            g.name(self.v),
            set(&self.y),
            set(&self.z),
            set(&self.h1),
            set(&self.h2)
        )
    }
}

/// First failing condition of a tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TupleFailure {
    /// `|Y| ≠ |pa̅(v)| + |Z|`.
    SizeY { expected: usize, actual: usize },
    /// `|Z| ≠ |H1| + |H2|`.
    SizeZ { expected: usize, actual: usize },
    ZMeetsParents(String),
    VInYOrZ,
    YMeetsZv(String),
    NotTrekSeparated,
    NoTrekSystem,
}

impl fmt::Display for TupleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SizeY { expected, actual } => write!(f, "condition (i): |Y| = {actual}, expected {expected}"),
            Self::SizeZ { expected, actual } => write!(f, "condition (i): |Z| = {actual}, expected |H1|+|H2| = {expected}"),
            Self::ZMeetsParents(n) => write!(f, "condition (i): {n} is in Z and a semi-direct parent of v"),
            Self::VInYOrZ => write!(f, "condition (i): v is in Y or Z"),
            Self::YMeetsZv(n) => write!(f, "condition (ii): {n} is in Y and in Z ∪ {{v}}"),
            Self::NotTrekSeparated => write!(f, "condition (ii): (H1, H2) does not trek separate Y from Z ∪ {{v}} in the latent subgraph"),
            Self::NoTrekSystem => write!(f, "condition (iii): no admissible trek system from Y to pa(v) ∪ Z"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TupleCheck {
    pub failure: Option<TupleFailure>,
    /// Condition (iii) witness when all conditions hold.
    pub trek_system: Option<TrekSystem>,
}

impl TupleCheck {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

fn validate_tuple(g: &LatentDigraph, t: &LscTuple) -> Result<(), GraphError> {
    let n = g.n_nodes();
    if t.v >= n {
        return Err(GraphError::UnknownNode(format!("#{}", t.v)));
    }
    if !g.is_observed(t.v) {
        return Err(GraphError::NotObserved(g.name(t.v).to_string()));
    }
    for s in [&t.y, &t.z, &t.h1, &t.h2] {
        if s.len() != n {
            return Err(GraphError::UnknownNode("node set of the wrong graph".into()));
        }
    }
    for s in [&t.y, &t.z] {
        if let Some(u) = s.ones().find(|&u| !g.is_observed(u)) {
            return Err(GraphError::NotObserved(g.name(u).to_string()));
        }
    }
    for s in [&t.h1, &t.h2] {
        if let Some(u) = s.ones().find(|&u| !g.is_latent(u)) {
            return Err(GraphError::NotLatent(g.name(u).to_string()));
        }
    }
    Ok(())
}

/// Conditions (i) and (ii) only.
fn check_structure(g: &LatentDigraph, g_lat: &LatentDigraph, t: &LscTuple) -> Option<TupleFailure> {
    let pa = g.semi_direct_parents_of(t.v);
    let (ny, nz) = (t.y.count_ones(..), t.z.count_ones(..));
    let (npa, nh) = (pa.count_ones(..), t.h1.count_ones(..) + t.h2.count_ones(..));
    if nz != nh {
        return Some(TupleFailure::SizeZ { expected: nh, actual: nz });
    }
    if ny != npa + nz {
        return Some(TupleFailure::SizeY { expected: npa + nz, actual: ny });
    }
    if let Some(u) = t.z.ones().find(|&u| pa.contains(u)) {
        return Some(TupleFailure::ZMeetsParents(g.name(u).to_string()));
    }
    if t.y.contains(t.v) || t.z.contains(t.v) {
        return Some(TupleFailure::VInYOrZ);
    }
    let zv = t.z_and_v();
    if let Some(u) = t.y.ones().find(|&u| zv.contains(u)) {
        return Some(TupleFailure::YMeetsZv(g.name(u).to_string()));
    }
    if !g_lat.trek_separates(&t.y, &zv, &t.h1, &t.h2) {
        return Some(TupleFailure::NotTrekSeparated);
    }
    None
}

fn check_with(g: &LatentDigraph, g_lat: &LatentDigraph, glp: &GlpGraph, t: &LscTuple, opts: &PathSystemOptions) -> Result<TupleCheck, LscError> {
    validate_tuple(g, t)?;
    if let Some(f) = check_structure(g, g_lat, t) {
        return Ok(TupleCheck { failure: Some(f), trek_system: None });
    }
    let pa = g.semi_direct_parents_of(t.v);
    let out = glp.trek_system(&t.z, &pa, &t.y, opts)?;
    if !out.found {
        return Ok(TupleCheck { failure: Some(TupleFailure::NoTrekSystem), trek_system: None });
    }
    Ok(TupleCheck { failure: None, trek_system: out.system })
}

/// Checks conditions (i)–(iii) for `t`.
pub fn check_tuple(g: &LatentDigraph, t: &LscTuple) -> Result<TupleCheck, LscError> {
    check_with(g, &g.latent_subgraph(), &build_glp(g), t, &PathSystemOptions::default())
}

/// Allowed `Z` nodes: solved `w ∉ {v} ∪ pa̅(v)` reached by a latent trek
/// from `H1` or by a latent-subgraph directed path from `H2`.
pub fn allowed_z(g: &LatentDigraph, v: usize, h1: &NodeSet, h2: &NodeSet, solved: &NodeSet) -> NodeSet {
    let mut reach = g.latent_trek_reach(h1);
    reach.union_with(&g.latent_path_reach(h2));
    reach.intersect_with(solved);
    reach.difference_with(&g.semi_direct_parents_of(v));
    reach.set(v, false);
    reach
}

/// Allowed `Y` nodes:
/// `O ∖ ({w ∈ elr_{H2,H1}(Z ∪ {v}) : w ∉ solved} ∪ lr_{H2,H1}(Z ∪ {v}))`.
pub fn allowed_y(g: &LatentDigraph, v: usize, z: &NodeSet, h1: &NodeSet, h2: &NodeSet, solved: &NodeSet) -> NodeSet {
    let mut zv = z.clone();
    zv.insert(v);
    let mut excluded = g.elr(h2, h1, &zv);
    excluded.difference_with(solved);
    excluded.union_with(&g.lr(h2, h1, &zv));
    let mut ya = g.observed_set();
    ya.difference_with(&excluded);
    ya
}

/// Ordered list of tuples; the first steps are the trivial tuples of the
/// nodes without semi-direct parents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LscCertificate {
    pub steps: Vec<LscTuple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    v: String,
    #[serde(rename = "Y")]
    y: Vec<String>,
    #[serde(rename = "Z")]
    z: Vec<String>,
    #[serde(rename = "H1")]
    h1: Vec<String>,
    #[serde(rename = "H2")]
    h2: Vec<String>,
}

impl LscCertificate {
    pub fn to_json(&self, g: &LatentDigraph) -> String {
        let docs: Vec<StepDoc> = self
            .steps
            .iter()
            .map(|t| StepDoc {
                v: g.name(t.v).to_string(),
                y: g.set_names(&t.y),
                z: g.set_names(&t.z),
                h1: g.set_names(&t.h1),
                h2: g.set_names(&t.h2),
            })
            .collect();
        serde_json::to_string_pretty(&docs).expect("certificate serialization cannot fail")
    }

    pub fn from_json(g: &LatentDigraph, text: &str) -> Result<Self, LscError> {
        let docs: Vec<StepDoc> =
            serde_json::from_str(text).map_err(|e| LscError::MalformedCertificate(e.to_string()))?;
        let steps = docs
            .iter()
            .map(|d| LscTuple::from_names(g, &d.v, &d.y, &d.z, &d.h1, &d.h2))
            .collect::<Result<_, _>>()?;
        Ok(Self { steps })
    }

    /// Nodes solved after the first `i` steps.
    pub fn solved_before(&self, g: &LatentDigraph, i: usize) -> NodeSet {
        g.set_of(self.steps[..i].iter().map(|t| t.v))
    }

    /// Every observed node has a step.
    pub fn is_complete(&self, g: &LatentDigraph) -> bool {
        let covered = g.set_of(self.steps.iter().map(|t| t.v));
        g.observed().all(|v| covered.contains(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    DuplicateStep(String),
    Tuple { v: String, failure: TupleFailure },
    Order { v: String, missing: String },
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateStep(v) => write!(f, "node {v} has more than one step"),
            Self::Tuple { v, failure } => write!(f, "step for {v}: {failure}"),
            Self::Order { v, missing } => write!(f, "step for {v} needs {missing}, which is not solved earlier"),
        }
    }
}

/// Checks every step and the ordering of prerequisites. Returns the first
/// problem found.
pub fn verify_certificate(g: &LatentDigraph, cert: &LscCertificate) -> Result<Result<(), VerifyFailure>, LscError> {
    let g_lat = g.latent_subgraph();
    let glp = build_glp(g);
    let opts = PathSystemOptions::default();
    let mut solved = g.empty_set();
    for t in &cert.steps {
        let name = g.name(t.v).to_string();
        if solved.contains(t.v) {
            return Ok(Err(VerifyFailure::DuplicateStep(name)));
        }
        let check = check_with(g, &g_lat, &glp, t, &opts)?;
        if let Some(failure) = check.failure {
            return Ok(Err(VerifyFailure::Tuple { v: name, failure }));
        }
        for w in t.prerequisites(g).ones() {
            if !solved.contains(w) && g.semi_direct_parents_of(w).count_ones(..) > 0 {
                return Ok(Err(VerifyFailure::Order { v: name, missing: g.name(w).to_string() }));
            }
        }
        solved.insert(t.v);
    }
    Ok(Ok(()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecideOptions {
    pub path: PathSystemOptions,
    /// Skip repeated trek-system queries that failed before.
    pub cache: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        Self { path: PathSystemOptions::default(), cache: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsolvedNode {
    pub v: usize,
    /// `(H1, H2, Z)` combinations examined across all passes.
    pub combinations_tried: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecideStats {
    pub passes: u64,
    pub trek_system_queries: u64,
    pub ilp_calls: u64,
    pub ilp_nodes: u64,
    pub cache_hits: u64,
    /// Root relaxation reached the target but no integral solution did.
    pub integrality_gaps: u64,
    /// Root relaxation reached the target and so did an integral solution.
    pub integrality_confirmations: u64,
}

#[derive(Debug, Clone)]
pub struct DecideOutcome {
    /// Steps for every solved node, in solving order.
    pub certificate: LscCertificate,
    /// Trek-system witnesses aligned with `certificate.steps`.
    pub witnesses: Vec<Option<TrekSystem>>,
    pub unsolved: Vec<UnsolvedNode>,
    /// Some integer program hit its node budget, so a "no" may be an
    /// undercount.
    pub budget_exhausted: bool,
    pub stats: DecideStats,
}

impl DecideOutcome {
    pub fn identifiable(&self) -> bool {
        self.unsolved.is_empty()
    }
}

/// Pairs `(H1, H2)` of latent sets with `|H1| + |H2| = size`, ordered
/// lexicographically by the sorted index lists of `H1`, then `H2`.
fn latent_pairs(g: &LatentDigraph, size: usize) -> Vec<(NodeSet, NodeSet)> {
    let latent: Vec<usize> = g.latent().collect();
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for s1 in 0..=size.min(latent.len()) {
        let s2 = size - s1;
        if s2 > latent.len() {
            continue;
        }
        for a in subsets(&latent, s1) {
            for b in subsets(&latent, s2) {
                out.push((a.clone(), b));
            }
        }
    }
    out.sort();
    out.into_iter()
        .map(|(a, b)| (g.set_of(a), g.set_of(b)))
        .collect()
}

/// Size-`k` subsets of `items` in lexicographic order.
pub(crate) fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

/// Fixpoint search for criterion tuples. `k_bound = None` allows any
/// `|H1| + |H2|`.
pub fn decide(g: &LatentDigraph, k_bound: Option<usize>, opts: &DecideOptions) -> DecideOutcome {
    let g_lat = g.latent_subgraph();
    let glp = build_glp(g);
    let parents: Vec<NodeSet> = g.observed().map(|v| g.semi_direct_parents_of(v)).collect();
    let mut solved = g.empty_set();
    let mut steps = Vec::new();
    let mut witnesses = Vec::new();
    for v in g.observed() {
        if parents[v].count_ones(..) == 0 {
            solved.insert(v);
            steps.push(LscTuple::trivial(g, v));
            witnesses.push(Some(TrekSystem::new(Vec::new())));
        }
    }
    let max_size = k_bound.unwrap_or(usize::MAX).min(2 * g.n_latent());
    let pairs: Vec<Vec<(NodeSet, NodeSet)>> = (0..=max_size).map(|s| latent_pairs(g, s)).collect();
    let mut tried = vec![0u64; g.n_observed()];
    let mut failed: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut stats = DecideStats::default();
    let mut budget_exhausted = false;
    loop {
        stats.passes += 1;
        let mut changed = false;
        for v in g.observed() {
            if solved.contains(v) {
                continue;
            }
            let npa = parents[v].count_ones(..);
            'search: for (size, group) in pairs.iter().enumerate() {
                for (h1, h2) in group {
                    let za = allowed_z(g, v, h1, h2, &solved);
                    let za_list: Vec<usize> = za.ones().collect();
                    if za_list.len() < size {
                        continue;
                    }
                    for zl in subsets(&za_list, size) {
                        tried[v] += 1;
                        let z = g.set_of(zl);
                        let ya = allowed_y(g, v, &z, h1, h2, &solved);
                        if ya.count_ones(..) < npa + size {
                            continue;
                        }
                        let key = (v, [&z, h1, h2, &ya].iter().flat_map(|s| s.as_slice().iter().copied()).collect());
                        if opts.cache && failed.contains(&key) {
                            stats.cache_hits += 1;
                            continue;
                        }
                        stats.trek_system_queries += 1;
                        let out = glp
                            .trek_system(&z, &parents[v], &ya, &opts.path)
                            .expect("Z and pa(v) are disjoint by construction");
                        if let Some(s) = &out.ilp_stats {
                            stats.ilp_calls += 1;
                            stats.ilp_nodes += s.nodes;
                            if s.is_integrality_gap() {
                                stats.integrality_gaps += 1;
                            } else if s.lp_reaches_target && s.integral_reaches_target {
                                stats.integrality_confirmations += 1;
                            }
                        }
                        budget_exhausted |= out.budget_exhausted;
                        if out.found {
                            let system = out.system.expect("found implies a witness");
                            let y = g.set_of(system.sources());
                            let tuple = LscTuple { v, y, z, h1: h1.clone(), h2: h2.clone() };
                            debug_assert!(check_structure(g, &g_lat, &tuple).is_none(), "{}", tuple.display(g));
                            steps.push(tuple);
                            witnesses.push(Some(system));
                            solved.insert(v);
                            changed = true;
                            break 'search;
                        }
                        if opts.cache {
                            failed.insert(key);
                        }
                    }
                }
            }
        }
        if !changed || g.observed().all(|v| solved.contains(v)) {
            break;
        }
    }
    let unsolved = g
        .observed()
        .filter(|&v| !solved.contains(v))
        .map(|v| UnsolvedNode { v, combinations_tried: tried[v] })
        .collect();
    DecideOutcome { certificate: LscCertificate { steps }, witnesses, unsolved, budget_exhausted, stats }
}
