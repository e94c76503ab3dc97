#![allow(dead_code)]

use std::collections::VecDeque;

use aggamg::aggregation::{NON_ROOT, ROOT};
use aggamg::strength::StrengthGraph;
use aggamg::Aggregation;
use aggamg::{CsrMatrix, TripletList};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random sparse matrix; duplicates from the triplet stage are folded.
pub fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> CsrMatrix {
    let mut t = TripletList::new(m, n);
    for i in 0..m {
        for j in 0..n {
            if rng.gen_bool(density) {
                t.push(i, j, rng.gen_range(-1.0..1.0)).unwrap();
            }
        }
    }
    t.to_csr()
}

/// Symmetric, strictly diagonally dominant, negative off-diagonals.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CsrMatrix {
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(density) {
                let v = -rng.gen_range(0.1..1.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| d[i * n + j].abs()).sum();
        d[i * n + i] = off + rng.gen_range(0.1..1.0);
    }
    CsrMatrix::from_dense(n, n, &d)
}

/// Directed random graph without self-loops, random positive weights.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, avg_degree: f64) -> StrengthGraph {
    let p = (avg_degree / n.max(2) as f64).min(1.0);
    let mut t = TripletList::new(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(p) {
                t.push(i, j, rng.gen_range(0.1..1.0)).unwrap();
            }
        }
    }
    StrengthGraph::from_pattern(t.to_csr()).unwrap()
}

pub fn dense_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let x = a[i * k + l];
            if x != 0.0 {
                for j in 0..n {
                    c[i * n + j] += x * b[l * n + j];
                }
            }
        }
    }
    c
}

pub fn dense_matvec(a: &[f64], x: &[f64], m: usize, n: usize) -> Vec<f64> {
    (0..m)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

pub fn dense_transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            t[j * m + i] = a[i * n + j];
        }
    }
    t
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))
            .unwrap();
        for j in 0..n {
            m.swap(k * n + j, p * n + j);
        }
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k * n + j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k * n + k];
    }
    x
}

/// Max-norm relative difference.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.spmv(x).unwrap();
    b.iter().zip(&ax).map(|(u, v)| u - v).collect()
}

/// Adjacency lists of C ∪ Cᵀ.
pub fn symmetric_adjacency(c: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = c.n_rows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in c.row(i) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// BFS distances from `src`, cut off beyond `max_depth`.
pub fn bfs(adj: &[Vec<usize>], src: usize, max_depth: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let d = dist[u].unwrap();
        if d == max_depth {
            continue;
        }
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

/// Random aggregation of `n` nodes into `m <= n` nonempty aggregates.
pub fn random_aggregation(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Aggregation {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut agg = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        agg[i] = if k < m { k } else { rng.gen_range(0..m) };
    }
    Aggregation::from_assignment(agg).unwrap()
}

/// The eight-node example graph with three aggregates: its 28 listed
/// nonzeros (1-based (i, j)) and the 1-based aggregate of every node.
pub const EXAMPLE_ENTRIES: [(usize, usize); 28] = [
    (1, 1), (1, 2), (1, 6), (2, 1), (2, 2), (2, 4), (2, 7), (3, 3), (3, 5), (3, 8),
    (4, 2), (4, 4), (4, 5), (4, 6), (4, 7), (5, 3), (5, 4), (5, 5), (5, 8), (6, 1),
    (6, 4), (6, 6), (7, 2), (7, 4), (7, 7), (8, 3), (8, 5), (8, 8),
];
pub const EXAMPLE_AGGREGATES: [usize; 8] = [2, 1, 3, 1, 3, 2, 1, 3];

/// Expected coarse entries: 1-based (I, J) and the fine entries summed into it.
pub fn example_groups() -> Vec<((usize, usize), Vec<(usize, usize)>)> {
    vec![
        ((1, 1), vec![(2, 2), (2, 4), (2, 7), (4, 2), (4, 4), (4, 7), (7, 2), (7, 4), (7, 7)]),
        ((1, 2), vec![(2, 1), (4, 6)]),
        ((1, 3), vec![(4, 5)]),
        ((2, 1), vec![(1, 2), (6, 4)]),
        ((2, 2), vec![(1, 1), (1, 6), (6, 1), (6, 6)]),
        ((3, 1), vec![(5, 4)]),
        ((3, 3), vec![(3, 3), (3, 5), (3, 8), (5, 3), (5, 5), (5, 8), (8, 3), (8, 5), (8, 8)]),
    ]
}

/// Example matrix with a distinct power of two per entry, so every sum of
/// entries is exact and identifies its terms.
pub fn example_matrix() -> (CsrMatrix, Aggregation) {
    let mut t = TripletList::new(8, 8);
    for (k, &(i, j)) in EXAMPLE_ENTRIES.iter().enumerate() {
        t.push(i - 1, j - 1, example_value(i, j).unwrap_or_else(|| panic!("{k}"))).unwrap();
    }
    let agg = EXAMPLE_AGGREGATES.iter().map(|a| a - 1).collect();
    (t.to_csr(), Aggregation::from_assignment(agg).unwrap())
}

pub fn example_value(i: usize, j: usize) -> Option<f64> {
    EXAMPLE_ENTRIES
        .iter()
        .position(|&e| e == (i, j))
        .map(|k| 2f64.powi(k as i32))
}

/// Checks the MIS(2) and aggregation post-conditions by BFS on the
/// symmetrized graph of competing nodes. Returns a description of the first
/// violation.
pub fn verify_mis2(c: &StrengthGraph, state: &[i8], agg: &Aggregation) -> Result<(), String> {
    let n = c.n();
    let competing: Vec<bool> = (0..n).map(|i| c.c.row_nnz(i) > 0).collect();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in c.c.row(i) {
            if competing[i] && competing[j] {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    if state.iter().any(|&s| s != ROOT && s != NON_ROOT) {
        return Err("undecided node after termination".into());
    }
    for i in 0..n {
        if !competing[i] && state[i] != ROOT {
            return Err(format!("node {i} has no strong row but is not a root"));
        }
    }
    let roots: Vec<usize> = (0..n).filter(|&i| state[i] == ROOT).collect();
    let mut near_root = vec![false; n];
    for &r in &roots {
        let d = bfs(&adj, r, 2);
        for (j, dj) in d.iter().enumerate() {
            if let Some(dj) = dj {
                if j != r && state[j] == ROOT {
                    return Err(format!("roots {r} and {j} at distance {dj}"));
                }
                near_root[j] = true;
            }
        }
    }
    if let Some(i) = (0..n).find(|&i| !near_root[i]) {
        return Err(format!("node {i} is not within distance 2 of a root"));
    }

    if agg.n_fine() != n {
        return Err("aggregation size mismatch".into());
    }
    if agg.roots != roots {
        return Err("aggregate roots differ from MIS roots".into());
    }
    for (k, &r) in agg.roots.iter().enumerate() {
        if agg.agg[r] != k {
            return Err(format!("root {r} not in its own aggregate"));
        }
    }
    for i in 0..n {
        let r = agg.roots[agg.agg[i]];
        let d = bfs(&adj, r, 2);
        if d[i].is_none() {
            return Err(format!("node {i} is farther than 2 from its root {r}"));
        }
    }
    Ok(())
}
