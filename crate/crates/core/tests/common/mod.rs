//! Shared generators and fixture loaders for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsc::flow::{
    brute_force_path_system, brute_force_trek_system, has_path_system, has_trek_system, is_valid_path_system,
    is_valid_trek_system, Digraph, PathSystemOptions,
};
use lsc::graph::{LatentDigraph, NodeSet};

pub const DENSITIES: [f64; 3] = [0.2, 0.35, 0.5];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> LatentDigraph {
    LatentDigraph::parse_json(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One path-system query on a small digraph.
#[derive(Debug, Clone)]
pub struct PathInstance {
    pub graph: Digraph,
    pub mask: Vec<bool>,
    pub z: Vec<usize>,
    pub p: Vec<usize>,
    pub ya: Vec<usize>,
}

/// Random digraph on `n` nodes; with `acyclic` only edges `i -> j`, `i < j`.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64, acyclic: bool) -> Digraph {
    let names = (0..n).map(|i| format!("n{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && (!acyclic || i < j) && rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    Digraph::new(names, edges)
}

pub fn random_path_instance<R: Rng>(rng: &mut R, density: f64) -> PathInstance {
    let n = rng.random_range(1..=7);
    let acyclic = rng.random_bool(0.5);
    let graph = random_digraph(rng, n, density, acyclic);
    let mask = graph.edges.iter().map(|_| rng.random_bool(0.6)).collect();
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let nz = rng.random_range(0..=n.min(3));
    let np = rng.random_range(0..=(n - nz).min(3));
    let z = nodes[..nz].to_vec();
    let p = nodes[nz..nz + np].to_vec();
    let ya = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    PathInstance { graph, mask, z, p, ya }
}

/// Runs the flow program with and without fast paths against the
/// exhaustive search. Returns a description of the first disagreement.
pub fn check_path_instance(inst: &PathInstance) -> Result<(), String> {
    let want = brute_force_path_system(&inst.graph, &inst.mask, &inst.z, &inst.p, &inst.ya).unwrap();
    for fast in [true, false] {
        let opts = PathSystemOptions { use_fast_paths: fast, ..Default::default() };
        let out = has_path_system(&inst.graph, &inst.mask, &inst.z, &inst.p, &inst.ya, &opts).unwrap();
        if out.found != want {
            return Err(format!("fast={fast} flow={} exhaustive={want} on {inst:?}", out.found));
        }
        if out.found && !is_valid_path_system(&inst.graph, &inst.mask, &inst.z, &inst.p, &inst.ya, &out.paths) {
            return Err(format!("fast={fast} invalid witness {:?} on {inst:?}", out.paths));
        }
    }
    Ok(())
}

/// Random acyclic graph with a random observed/latent split.
pub fn random_latent_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> LatentDigraph {
    let n_latent = rng.random_range(0..=n / 2);
    lsc::experiment::random_graph(n - n_latent, n_latent, density, rng)
}

#[derive(Debug, Clone)]
pub struct TrekInstance {
    pub graph: LatentDigraph,
    pub z: NodeSet,
    pub p: NodeSet,
    pub ya: NodeSet,
}

pub fn random_trek_instance<R: Rng>(rng: &mut R, density: f64) -> TrekInstance {
    let n = rng.random_range(2..=7);
    let graph = random_latent_dag(rng, n, density);
    let mut obs: Vec<usize> = graph.observed().collect();
    obs.shuffle(rng);
    let nz = rng.random_range(0..=obs.len().min(2));
    let np = rng.random_range(0..=(obs.len() - nz).min(2));
    let z = graph.set_of(obs[..nz].iter().copied());
    let p = graph.set_of(obs[nz..nz + np].iter().copied());
    let ya = graph.set_of(graph.observed().filter(|_| rng.random_bool(0.6)));
    TrekInstance { graph, z, p, ya }
}

pub fn check_trek_instance(inst: &TrekInstance) -> Result<(), String> {
    let want = brute_force_trek_system(&inst.graph, &inst.z, &inst.p, &inst.ya).unwrap();
    for fast in [true, false] {
        let opts = PathSystemOptions { use_fast_paths: fast, ..Default::default() };
        let out = has_trek_system(&inst.graph, &inst.z, &inst.p, &inst.ya, &opts).unwrap();
        if out.found != want {
            return Err(format!("fast={fast} flow={} exhaustive={want} on {:?}", out.found, inst.graph));
        }
        if let Some(sys) = &out.system {
            if !is_valid_trek_system(&inst.graph, sys, &inst.z, &inst.p, &inst.ya) {
                return Err(format!("fast={fast} invalid trek witness on {:?}", inst.graph));
            }
        }
    }
    Ok(())
}

/// Runs `count` instances per density and returns (instances, mismatches).
pub fn path_oracle_sweep(seed: u64, count: usize) -> (usize, Vec<String>) {
    let mut r = rng(seed);
    let mut bad = Vec::new();
    let mut total = 0;
    for d in DENSITIES {
        for _ in 0..count {
            total += 1;
            if let Err(e) = check_path_instance(&random_path_instance(&mut r, d)) {
                bad.push(e);
            }
        }
    }
    (total, bad)
}

pub fn trek_oracle_sweep(seed: u64, count: usize) -> (usize, Vec<String>) {
    let mut r = rng(seed);
    let mut bad = Vec::new();
    let mut total = 0;
    for d in DENSITIES {
        for _ in 0..count {
            total += 1;
            if let Err(e) = check_trek_instance(&random_trek_instance(&mut r, d)) {
                bad.push(e);
            }
        }
    }
    (total, bad)
}

/// Random acyclic graph in which no observed pair has both a semi-direct
/// effect and a latent-subgraph trek, by rejection sampling.
pub fn random_confounding_free<R: Rng>(rng: &mut R, n_observed: usize, n_latent: usize) -> LatentDigraph {
    loop {
        let p = rng.random_range(0.1..0.5);
        let g = lsc::experiment::random_graph(n_observed, n_latent, p, rng);
        if g.is_confounding_free_acyclic() {
            return g;
        }
    }
}
