//! Integer model of the interval3 graphs shared by the test targets.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

/// Offset `m` of the interval3 cylinder `[m, m + 2] / 2^n`.
pub fn offset(w: &[u8]) -> i64 {
    w.iter().fold(0, |m, &s| 2 * m + s as i64)
}

/// Integer model of interval3: level `n` holds `m = 0 ..= 2^{n+1} - 2`.
pub struct IntervalModel {
    pub depth: usize,
    pub ids: HashMap<(usize, i64), usize>,
    pub nodes: Vec<(usize, i64)>,
    pub adj_e: Vec<BTreeSet<usize>>,
    pub adj_d: Vec<BTreeSet<usize>>,
}

impl IntervalModel {
    pub fn new(depth: usize) -> Self {
        let mut nodes = Vec::new();
        let mut ids = HashMap::new();
        for n in 0..=depth {
            for m in 0..=(1i64 << (n + 1)) - 2 {
                ids.insert((n, m), nodes.len());
                nodes.push((n, m));
            }
        }
        let mut adj_e = vec![BTreeSet::new(); nodes.len()];
        let mut adj_d = vec![BTreeSet::new(); nodes.len()];
        let link = |adj: &mut Vec<BTreeSet<usize>>, a: usize, b: usize| {
            adj[a].insert(b);
            adj[b].insert(a);
        };
        for (i, &(n, m)) in nodes.iter().enumerate() {
            for d in 1..=2 {
                if let Some(&j) = ids.get(&(n, m + d)) {
                    link(&mut adj_e, i, j);
                }
            }
            if n < depth {
                for c in 2 * m - 2..=2 * m + 4 {
                    let Some(&j) = ids.get(&(n + 1, c)) else { continue };
                    if (0..=2).contains(&(c - 2 * m)) {
                        link(&mut adj_e, i, j);
                        link(&mut adj_d, i, j);
                    } else {
                        link(&mut adj_d, i, j);
                    }
                }
            }
        }
        IntervalModel { depth, ids, nodes, adj_e, adj_d }
    }

    pub fn bfs(adj: &[BTreeSet<usize>], s: usize) -> Vec<u32> {
        let mut d = vec![u32::MAX; adj.len()];
        d[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if d[w] == u32::MAX {
                    d[w] = d[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        d
    }

    pub fn all_pairs(adj: &[BTreeSet<usize>]) -> Vec<Vec<u32>> {
        (0..adj.len()).map(|s| Self::bfs(adj, s)).collect()
    }
}

/// `max_{x,y,z} min(|x∧z|, |z∧y|) - |x∧y|`, doubled, on a BFS matrix.
pub fn brute_delta_twice(d: &[Vec<u32>], level: &[usize]) -> i64 {
    let n = d.len();
    let gp = |x: usize, y: usize| level[x] as i64 + level[y] as i64 - d[x][y] as i64;
    let mut best = 0;
    for x in 0..n {
        for y in 0..n {
            let base = gp(x, y);
            for z in 0..n {
                best = best.max(gp(x, z).min(gp(z, y)) - base);
            }
        }
    }
    best
}

/// Longest same-level pair whose horizontal distance `ceil(|m - m'| / 2)` is a geodesic.
pub fn brute_l(model: &IntervalModel) -> Vec<u32> {
    let d = IntervalModel::all_pairs(&model.adj_e);
    (0..=model.depth)
        .map(|n| {
            let last = (1i64 << (n + 1)) - 2;
            let mut best = 0;
            for a in 0..=last {
                for b in a..=last {
                    let h = ((b - a + 1) / 2) as u32;
                    if h == d[model.ids[&(n, a)]][model.ids[&(n, b)]] {
                        best = best.max(h);
                    }
                }
            }
            best
        })
        .collect()
}

/// Largest E◇ distance between two level-`i` vertices lying on geodesics from the root to a common `z`.
pub fn brute_fan(model: &IntervalModel) -> u32 {
    let d = IntervalModel::all_pairs(&model.adj_d);
    let root = model.ids[&(0, 0)];
    let mut best = 0;
    for z in 0..model.nodes.len() {
        let dz = d[root][z];
        for i in 1..dz {
            let slice: Vec<usize> = (0..model.nodes.len())
                .filter(|&a| d[root][a] == i && d[a][z] == dz - i)
                .collect();
            for &a in &slice {
                for &b in &slice {
                    best = best.max(d[a][b]);
                }
            }
        }
    }
    best
}
