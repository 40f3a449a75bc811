//! Unit node-capacity max flow (vertex-disjoint paths) by augmenting paths
//! on the split graph.

use std::collections::VecDeque;

/// Residual network over split nodes `v_in = 2v`, `v_out = 2v + 1`, plus a
/// super source and super sink.
pub struct DisjointPaths {
    n: usize,
    head: Vec<usize>,
    cap: Vec<i32>,
    adj: Vec<Vec<usize>>,
    blocked: Vec<bool>,
}

impl DisjointPaths {
    /// Nodes flagged in `blocked` are unusable.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, blocked: &[bool]) -> Self {
        let mut g = Self {
            n,
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); 2 * n + 2],
            blocked: blocked.to_vec(),
        };
        for (v, &b) in blocked.iter().enumerate().take(n) {
            if !b {
                g.arc(2 * v, 2 * v + 1);
            }
        }
        for (u, v) in edges {
            if !blocked[u] && !blocked[v] {
                g.arc(2 * u + 1, 2 * v);
            }
        }
        g
    }

    fn arc(&mut self, a: usize, b: usize) {
        self.adj[a].push(self.head.len());
        self.head.push(b);
        self.cap.push(1);
        self.adj[b].push(self.head.len());
        self.head.push(a);
        self.cap.push(0);
    }

    /// Maximum number of vertex-disjoint paths from `sources` to `sinks`,
    /// with one maximum system of paths (source first).
    pub fn max_paths(mut self, sources: &[usize], sinks: &[usize]) -> (usize, Vec<Vec<usize>>) {
        let s = 2 * self.n;
        let t = s + 1;
        for &y in sources {
            if !self.blocked[y] {
                self.arc(s, 2 * y);
            }
        }
        for &z in sinks {
            if !self.blocked[z] {
                self.arc(2 * z + 1, t);
            }
        }
        let mut flow = 0;
        loop {
            let mut prev = vec![usize::MAX; 2 * self.n + 2];
            prev[s] = usize::MAX - 1;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let w = self.head[e];
                    if self.cap[e] > 0 && prev[w] == usize::MAX {
                        prev[w] = e;
                        queue.push_back(w);
                    }
                }
            }
            if prev[t] == usize::MAX {
                break;
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                v = self.head[e ^ 1];
            }
            flow += 1;
        }
        // decompose: follow saturated forward arcs from s
        let mut paths = Vec::with_capacity(flow);
        let saturated = |g: &Self, e: usize| e.is_multiple_of(2) && g.cap[e] == 0;
        for &e0 in &self.adj[s] {
            if !saturated(&self, e0) {
                continue;
            }
            let mut path = Vec::new();
            let mut u = self.head[e0];
            loop {
                if u.is_multiple_of(2) {
                    path.push(u / 2);
                }
                if u == t {
                    break;
                }
                let next = self.adj[u].iter().copied().find(|&e| saturated(&self, e));
                match next {
                    Some(e) => {
                        u = self.head[e];
                        if u == t {
                            break;
                        }
                    }
                    None => break,
                }
            }
            paths.push(path);
        }
        (flow, paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_disjoint_paths() {
        // 0 -> 2 -> 3, 1 -> 2, 1 -> 4 -> 3
        let edges = [(0, 2), (2, 3), (1, 2), (1, 4), (4, 3), (2, 5), (4, 5)];
        let g = DisjointPaths::new(6, edges, &[false; 6]);
        let (f, paths) = g.max_paths(&[0, 1], &[3, 5]);
        assert_eq!(f, 2);
        assert_eq!(paths.len(), 2);
        let mut seen = std::collections::HashSet::new();
        for p in &paths {
            for &v in p {
                assert!(seen.insert(v));
            }
        }
    }

    #[test]
    fn bottleneck_node() {
        let edges = [(0, 2), (1, 2), (2, 3), (2, 4)];
        let g = DisjointPaths::new(5, edges, &[false; 5]);
        assert_eq!(g.max_paths(&[0, 1], &[3, 4]).0, 1);
        let mut blocked = [false; 5];
        blocked[2] = true;
        let g = DisjointPaths::new(5, edges, &blocked);
        assert_eq!(g.max_paths(&[0, 1], &[3, 4]).0, 0);
    }

    #[test]
    fn trivial_path_when_source_is_sink() {
        let g = DisjointPaths::new(2, [], &[false; 2]);
        let (f, paths) = g.max_paths(&[0], &[0]);
        assert_eq!(f, 1);
        assert_eq!(paths, vec![vec![0]]);
    }
}
