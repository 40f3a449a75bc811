//! Branch and bound over the 0/1 flow program.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::simplex::{self, LinearProgram, LpOutcome, LpRow, Sense};
use super::FlowProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IlpOptions {
    /// Maximum number of branch-and-bound nodes.
    pub node_budget: u64,
}

impl Default for IlpOptions {
    fn default() -> Self {
        Self { node_budget: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IlpStats {
    pub nodes: u64,
    pub pivots: u64,
    /// LP solves that overflowed `i128` and were redone with big rationals.
    pub big_rational_solves: u64,
    pub budget_exhausted: bool,
    /// Root relaxation reaches `|Z| + |P|`.
    pub lp_reaches_target: bool,
    /// An integral solution reaches `|Z| + |P|`.
    pub integral_reaches_target: bool,
}

impl IlpStats {
    /// The relaxation reaches `|Z| + |P|` but the completed search found
    /// no integral solution that does.
    pub fn is_integrality_gap(&self) -> bool {
        self.lp_reaches_target && !self.integral_reaches_target && !self.budget_exhausted
    }
}

#[derive(Debug, Clone)]
pub struct IlpSolution {
    /// One value per program variable.
    pub values: Vec<BigRational>,
    pub objective: BigRational,
    /// Optimum of the root relaxation.
    pub lp_bound: BigRational,
    /// All values are 0 or 1.
    pub integral: bool,
    /// The search completed, so `objective` is the integral optimum.
    pub optimal: bool,
    pub stats: IlpStats,
}

/// Relevance presolve: keeps, per family, the edges that lie on some `s–t`
/// walk of that family ending in a sink edge the objective counts. Flow on
/// other variables never adds to the objective and can be removed, so they
/// are fixed to zero. Capacity rows of each family are implied by the
/// joint rows and are dropped. Returns the reduced program and the map
/// from reduced to original variable indices.
fn presolve(prog: &FlowProgram) -> (LinearProgram, Vec<usize>) {
    let fg = &prog.graph;
    let m = fg.edges.len();
    let nn = fg.n_nodes();
    let mut keep = vec![false; 2 * m];
    for (offset, subgraph_only) in [(0usize, false), (m, true)] {
        // f on z -> t never counts; any flow using it can be removed
        let usable = |e: usize| {
            let edge = &fg.edges[e];
            if subgraph_only {
                edge.in_subgraph
            } else {
                edge.kind != super::FlowEdgeKind::ZSink
            }
        };
        let mut fwd = vec![false; nn];
        fwd[fg.s()] = true;
        let mut stack = vec![fg.s()];
        while let Some(u) = stack.pop() {
            for (e, edge) in fg.edges.iter().enumerate() {
                if edge.tail == u && usable(e) && !fwd[edge.head] {
                    fwd[edge.head] = true;
                    stack.push(edge.head);
                }
            }
        }
        let mut bwd = vec![false; nn];
        bwd[fg.t()] = true;
        let mut stack = vec![fg.t()];
        while let Some(u) = stack.pop() {
            for (e, edge) in fg.edges.iter().enumerate() {
                if edge.head == u && usable(e) && !bwd[edge.tail] {
                    bwd[edge.tail] = true;
                    stack.push(edge.tail);
                }
            }
        }
        for (e, edge) in fg.edges.iter().enumerate() {
            if usable(e) && fwd[edge.tail] && bwd[edge.head] {
                keep[offset + e] = true;
            }
        }
    }
    let map: Vec<usize> = (0..2 * m).filter(|&j| keep[j]).collect();
    let mut new_index = vec![usize::MAX; 2 * m];
    for (k, &j) in map.iter().enumerate() {
        new_index[j] = k;
    }
    let n = fg.n_original;
    let mut rows = Vec::new();
    for offset in [0, m] {
        for v in 0..n {
            let mut coeffs = Vec::new();
            for (e, edge) in fg.edges.iter().enumerate() {
                let j = new_index[offset + e];
                if j == usize::MAX {
                    continue;
                }
                if edge.head == v {
                    coeffs.push((j, 1));
                }
                if edge.tail == v {
                    coeffs.push((j, -1));
                }
            }
            if !coeffs.is_empty() {
                rows.push(LpRow { coeffs, sense: Sense::Eq, rhs: 0 });
            }
        }
    }
    for v in 0..n {
        let coeffs: Vec<(usize, i64)> = fg
            .edges
            .iter()
            .enumerate()
            .filter(|(_, edge)| edge.head == v)
            .flat_map(|(e, _)| [new_index[e], new_index[m + e]])
            .filter(|&j| j != usize::MAX)
            .map(|j| (j, 1))
            .collect();
        if !coeffs.is_empty() {
            rows.push(LpRow { coeffs, sense: Sense::Le, rhs: 1 });
        }
    }
    let objective = map.iter().map(|&j| prog.lp.objective[j]).collect();
    (LinearProgram { n_vars: map.len(), objective, rows }, map)
}

fn floor_i64(x: &BigRational) -> i64 {
    x.floor().to_integer().to_i64().expect("objective fits in i64")
}

/// Most fractional variable, ties broken by smallest index.
fn branching_variable(x: &[BigRational]) -> Option<usize> {
    let half = BigRational::new(1.into(), 2.into());
    let mut best: Option<(usize, BigRational)> = None;
    for (j, v) in x.iter().enumerate() {
        if v.is_integer() {
            continue;
        }
        let dist = (v - &half).abs();
        if best.as_ref().is_none_or(|(_, d)| dist < *d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Depth-first branch and bound (branch value 1 first) over exact LP
/// relaxations. Starts from the all-zero incumbent, which is always
/// feasible.
pub fn solve_ilp(prog: &FlowProgram, opts: &IlpOptions) -> IlpSolution {
    let (lp, map) = presolve(prog);
    let n = lp.n_vars;
    let target = prog.target() as i64;
    let mut stats = IlpStats::default();
    let mut incumbent_val = 0i64;
    let mut incumbent_x = vec![BigRational::zero(); n];
    let mut root_bound: Option<BigRational> = None;
    let mut stack: Vec<Vec<Option<bool>>> = vec![vec![None; n]];
    while let Some(fixed) = stack.pop() {
        if stats.nodes >= opts.node_budget {
            stats.budget_exhausted = true;
            break;
        }
        stats.nodes += 1;
        let (outcome, pivots, big) = simplex::solve_exact(&lp, &fixed);
        stats.pivots += pivots;
        stats.big_rational_solves += big as u64;
        let (value, x) = match outcome {
            LpOutcome::Optimal { value, x } => (value, x),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => unreachable!("flow programs are bounded"),
        };
        let bound = floor_i64(&value);
        if root_bound.is_none() {
            root_bound = Some(value.clone());
        }
        if bound <= incumbent_val {
            continue;
        }
        match branching_variable(&x) {
            None => {
                incumbent_val = bound;
                incumbent_x = x;
                if incumbent_val == floor_i64(root_bound.as_ref().unwrap()) {
                    break;
                }
            }
            Some(j) => {
                let mut zero = fixed.clone();
                zero[j] = Some(false);
                let mut one = fixed;
                one[j] = Some(true);
                stack.push(zero);
                stack.push(one);
            }
        }
    }
    let lp_bound = root_bound.unwrap_or_else(BigRational::zero);
    let mut values = vec![BigRational::zero(); prog.lp.n_vars];
    for (k, &j) in map.iter().enumerate() {
        values[j] = incumbent_x[k].clone();
    }
    stats.lp_reaches_target = lp_bound == BigRational::from_integer(target.into());
    stats.integral_reaches_target = incumbent_val == target;
    let integral = values.iter().all(|v| v.is_zero() || v.is_one());
    IlpSolution {
        values,
        objective: BigRational::from_integer(incumbent_val.into()),
        lp_bound,
        integral,
        optimal: !stats.budget_exhausted,
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::fig7;
    use super::super::*;
    use super::*;

    #[test]
    fn presolve_drops_irrelevant_variables() {
        let (g, mask) = fig7();
        let prog = build_lp(&build_flow_graph(&g, &mask, &[4], &[5], &[0, 1]).unwrap());
        let (lp, map) = presolve(&prog);
        assert!(lp.n_vars < prog.lp.n_vars);
        // f¹ never appears on the blue edges or on p -> t
        let m = prog.n_edges();
        for &j in &map {
            if j >= m {
                assert!(prog.graph.edges[j - m].in_subgraph);
            }
        }
    }

    #[test]
    fn solution_is_feasible_for_full_program() {
        let (g, mask) = fig7();
        for (z, p, ya) in [(vec![4], vec![5], vec![0, 1]), (vec![4], vec![], vec![1]), (vec![], vec![5], vec![0])] {
            let prog = build_lp(&build_flow_graph(&g, &mask, &z, &p, &ya).unwrap());
            let sol = solve_ilp(&prog, &IlpOptions::default());
            assert!(simplex::is_feasible(&prog.lp, &sol.values));
            assert_eq!(simplex::objective_value(&prog.lp, &sol.values), sol.objective);
            assert!(sol.lp_bound >= sol.objective);
        }
    }

    #[test]
    fn z_path_must_stay_in_subgraph() {
        // a single source cannot serve both sinks
        let (g, mask) = fig7();
        let prog = build_lp(&build_flow_graph(&g, &mask, &[4], &[5], &[1]).unwrap());
        let sol = solve_ilp(&prog, &IlpOptions::default());
        assert_eq!(sol.objective, BigRational::from_integer(1.into()));
        assert!(sol.optimal);
    }
}
