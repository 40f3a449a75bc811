//! Random acyclic graphs and identifiability counts per edge probability.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::flow::{IlpOptions, PathSystemOptions};
use crate::graph::LatentDigraph;
use crate::lsc::{decide, DecideOptions, LscCertificate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed configuration: {0}")]
    Malformed(String),
}

fn default_budget() -> u64 {
    IlpOptions::default().node_budget
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_observed: usize,
    pub n_latent: usize,
    pub edge_probs: Vec<f64>,
    pub graphs_per_prob: usize,
    pub k_bounds: Vec<usize>,
    pub seed: u64,
    pub parallelism: usize,
    /// Branch-and-bound node budget per integer program.
    #[serde(default = "default_budget")]
    pub ilp_node_budget: u64,
    /// Write wall-clock seconds to the CSV; off gives byte-identical
    /// output across runs.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl ExperimentConfig {
    /// 100 graphs per probability on 10 observed and 5 latent nodes,
    /// `p ∈ {0.15, 0.20, …, 0.45}`, `k ∈ {1, 2}`.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            n_observed: 10,
            n_latent: 5,
            edge_probs: vec![0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45],
            graphs_per_prob: 100,
            k_bounds: vec![1, 2],
            seed,
            parallelism: 1,
            ilp_node_budget: default_budget(),
            record_timing: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Malformed(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_observed == 0 {
            return Err(ExperimentError::Config("n_observed must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(ExperimentError::Config("parallelism must be positive".into()));
        }
        if self.k_bounds.is_empty() {
            return Err(ExperimentError::Config("k_bounds is empty".into()));
        }
        if let Some(p) = self.edge_probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(ExperimentError::Config(format!("edge probability {p} is not in (0, 1)")));
        }
        Ok(())
    }

    fn sorted_ks(&self) -> Vec<usize> {
        let mut ks = self.k_bounds.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// Acyclic graph with edges `i -> j` (`i < j` in generation order) drawn
/// independently with probability `p`, and a uniform choice of which
/// `n_latent` nodes are latent. Observed nodes are named `v1, v2, …` and
/// latent ones `h1, h2, …`, both in generation order.
pub fn random_graph<R: Rng + ?Sized>(n_observed: usize, n_latent: usize, p: f64, rng: &mut R) -> LatentDigraph {
    let n = n_observed + n_latent;
    let mut generated = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                generated.push((i, j));
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut latent = vec![false; n];
    for &v in &order[..n_latent] {
        latent[v] = true;
    }
    let mut index = vec![0; n];
    let (mut no, mut nl) = (0, 0);
    for v in 0..n {
        if latent[v] {
            index[v] = n_observed + nl;
            nl += 1;
        } else {
            index[v] = no;
            no += 1;
        }
    }
    let mut names = vec![String::new(); n];
    for &i in &index {
        names[i] = if i < n_observed { format!("v{}", i + 1) } else { format!("h{}", i - n_observed + 1) };
    }
    let edges = generated.iter().map(|&(a, b)| (index[a], index[b])).collect();
    LatentDigraph::from_indexed(names, n_observed, edges).expect("generated graphs are valid")
}

/// Graph `j` of probability index `i`; independent of scheduling.
pub fn experiment_graph(cfg: &ExperimentConfig, i: usize, j: usize) -> LatentDigraph {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((i as u64) << 32) | j as u64);
    random_graph(cfg.n_observed, cfg.n_latent, cfg.edge_probs[i], &mut rng)
}

#[derive(Debug, Clone)]
pub struct GraphRecord {
    pub prob_index: usize,
    pub graph_index: usize,
    pub graph: LatentDigraph,
    /// Per sorted `k`: certified for `G`.
    pub lsc: Vec<bool>,
    /// Per sorted `k`: certified for the canonical graph.
    pub lsc_can: Vec<bool>,
    /// Per sorted `k`: not certified for `G` and some integer program ran
    /// out of budget.
    pub timeout: Vec<bool>,
    /// Certificate for `G` at the largest `k`, if certified.
    pub certificate: Option<LscCertificate>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCounts {
    pub edge_prob: f64,
    pub k: usize,
    pub n_total: usize,
    pub n_lsc: usize,
    pub n_lsc_can: usize,
    pub n_g_not_can: usize,
    pub n_can_not_g: usize,
    pub n_timeout: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Sorted by edge probability, then `k`.
    pub cells: Vec<CellCounts>,
    pub graphs: Vec<GraphRecord>,
    pub record_timing: bool,
}

fn certify(g: &LatentDigraph, ks: &[usize], opts: &DecideOptions) -> (Vec<bool>, Vec<bool>, Option<LscCertificate>) {
    let mut ok = Vec::with_capacity(ks.len());
    let mut timeout = Vec::with_capacity(ks.len());
    let mut cert = None;
    for &k in ks {
        // a certificate for a smaller bound is valid for every larger one
        if cert.is_some() {
            ok.push(true);
            timeout.push(false);
            continue;
        }
        let out = decide(g, Some(k), opts);
        ok.push(out.identifiable());
        timeout.push(!out.identifiable() && out.budget_exhausted);
        if out.identifiable() {
            cert = Some(out.certificate);
        }
    }
    (ok, timeout, cert)
}

fn run_graph(cfg: &ExperimentConfig, ks: &[usize], i: usize, j: usize) -> GraphRecord {
    let start = Instant::now();
    let g = experiment_graph(cfg, i, j);
    let opts = DecideOptions {
        path: PathSystemOptions { ilp: IlpOptions { node_budget: cfg.ilp_node_budget }, ..Default::default() },
        cache: true,
    };
    let (lsc, timeout, certificate) = certify(&g, ks, &opts);
    let (lsc_can, _, _) = certify(&g.canonicalize(), ks, &opts);
    GraphRecord {
        prob_index: i,
        graph_index: j,
        graph: g,
        lsc,
        lsc_can,
        timeout,
        certificate,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Certifies every generated graph and its canonicalization for each `k`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let ks = cfg.sorted_ks();
    let jobs: Vec<(usize, usize)> =
        (0..cfg.edge_probs.len()).flat_map(|i| (0..cfg.graphs_per_prob).map(move |j| (i, j))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut graphs: Vec<GraphRecord> = pool.install(|| jobs.par_iter().map(|&(i, j)| run_graph(cfg, &ks, i, j)).collect());
    graphs.sort_by_key(|r| (r.prob_index, r.graph_index));
    let mut cells = Vec::new();
    for (i, &p) in cfg.edge_probs.iter().enumerate() {
        for (ki, &k) in ks.iter().enumerate() {
            let rs = graphs.iter().filter(|r| r.prob_index == i);
            let mut c = CellCounts {
                edge_prob: p,
                k,
                n_total: 0,
                n_lsc: 0,
                n_lsc_can: 0,
                n_g_not_can: 0,
                n_can_not_g: 0,
                n_timeout: 0,
                seconds: 0.0,
            };
            for r in rs {
                c.n_total += 1;
                c.n_lsc += r.lsc[ki] as usize;
                c.n_lsc_can += r.lsc_can[ki] as usize;
                c.n_g_not_can += (r.lsc[ki] && !r.lsc_can[ki]) as usize;
                c.n_can_not_g += (!r.lsc[ki] && r.lsc_can[ki]) as usize;
                c.n_timeout += r.timeout[ki] as usize;
                c.seconds += r.seconds;
            }
            cells.push(c);
        }
    }
    cells.sort_by(|a, b| a.edge_prob.total_cmp(&b.edge_prob).then(a.k.cmp(&b.k)));
    Ok(ExperimentResult { cells, graphs, record_timing: cfg.record_timing })
}

pub const CSV_HEADER: &str = "edge_prob,k,n_total,n_lsc,n_lsc_can,n_G_not_can,n_can_not_G,n_timeout,seconds";

impl ExperimentResult {
    /// One row per `(edge_prob, k)`; `seconds` sums the per-graph time of
    /// the probability, or is 0 when timing is off.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let secs = if self.record_timing { c.seconds } else { 0.0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.3}",
                c.edge_prob, c.k, c.n_total, c.n_lsc, c.n_lsc_can, c.n_g_not_can, c.n_can_not_g, c.n_timeout, secs
            );
        }
        out
    }

    pub fn cell(&self, edge_prob: f64, k: usize) -> Option<&CellCounts> {
        self.cells.iter().find(|c| c.edge_prob == edge_prob && c.k == k)
    }
}

/// Exact (Clopper–Pearson) two-sided confidence interval for a binomial
/// proportion with `x` successes out of `n`.
pub fn clopper_pearson(x: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(x <= n && n > 0, "need 0 <= x <= n and n > 0");
    let alpha = 1.0 - confidence;
    let (xf, nf) = (x as f64, n as f64);
    let lo = if x == 0 { 0.0 } else { Beta::new(xf, nf - xf + 1.0).unwrap().inverse_cdf(alpha / 2.0) };
    let hi = if x == n { 1.0 } else { Beta::new(xf + 1.0, nf - xf).unwrap().inverse_cdf(1.0 - alpha / 2.0) };
    (lo, hi)
}

/// Counts out of 1000 graphs per edge probability for `k = 1, 2, 3`.
pub const REFERENCE_COUNTS: [(f64, [u32; 3]); 7] = [
    (0.15, [849, 850, 850]),
    (0.20, [727, 734, 734]),
    (0.25, [599, 607, 608]),
    (0.30, [423, 441, 442]),
    (0.35, [270, 287, 287]),
    (0.40, [164, 180, 180]),
    (0.45, [103, 109, 109]),
];

/// Reference proportion for `(edge_prob, k)`, if tabulated.
pub fn reference_proportion(edge_prob: f64, k: usize) -> Option<f64> {
    let (_, counts) = REFERENCE_COUNTS.iter().find(|(p, _)| (p - edge_prob).abs() < 1e-9)?;
    (1..=3).contains(&k).then(|| counts[k - 1] as f64 / 1000.0)
}
