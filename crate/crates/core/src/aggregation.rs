//! MIS(2) root selection and aggregation around the roots.
//!
//! Neighbourhoods are taken on the symmetrized strength pattern `C ∪ Cᵀ`.
//! Nodes with no outgoing strong connection do not take part in the
//! competition: they are their own roots and end up as singleton aggregates.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;
use crate::strength::{influence_counts, StrengthGraph};

const BLOCK: usize = 4096;

pub const UNDECIDED: i8 = 0;
pub const ROOT: i8 = 1;
pub const NON_ROOT: i8 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct MisState {
    /// -1 non-root, 0 undecided, 1 root.
    pub state: Vec<i8>,
    /// Influence count plus the node's random value.
    pub weight: Vec<f64>,
    /// Random values in (0, 1).
    pub random: Vec<f64>,
    /// Number of sweeps until no node was undecided.
    pub sweeps: usize,
}

impl MisState {
    pub fn roots(&self) -> Vec<usize> {
        (0..self.state.len())
            .filter(|&i| self.state[i] == ROOT)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregation {
    /// Aggregate index of every fine node.
    pub agg: Vec<usize>,
    /// Root node of every aggregate, indexed by aggregate.
    pub roots: Vec<usize>,
}

impl Aggregation {
    /// Validate an explicit assignment. Roots must belong to their aggregate.
    pub fn new(agg: Vec<usize>, roots: Vec<usize>) -> Result<Self> {
        let n_coarse = roots.len();
        if let Some(i) = agg.iter().position(|&a| a >= n_coarse) {
            return Err(AmgError::InvalidStructure(format!(
                "node {i} assigned to aggregate {} of {n_coarse}",
                agg[i]
            )));
        }
        let mut seen = vec![false; n_coarse];
        agg.iter().for_each(|&a| seen[a] = true);
        if let Some(a) = seen.iter().position(|s| !s) {
            return Err(AmgError::InvalidStructure(format!("aggregate {a} is empty")));
        }
        for (a, &r) in roots.iter().enumerate() {
            if r >= agg.len() || agg[r] != a {
                return Err(AmgError::InvalidStructure(format!(
                    "root {r} is not a member of aggregate {a}"
                )));
            }
        }
        Ok(Aggregation { agg, roots })
    }

    /// Aggregates from a contiguous assignment, rooting each at its smallest node.
    pub fn from_assignment(agg: Vec<usize>) -> Result<Self> {
        let n_coarse = agg.iter().max().map_or(0, |m| m + 1);
        let mut roots = vec![usize::MAX; n_coarse];
        for (i, &a) in agg.iter().enumerate().rev() {
            roots[a] = i;
        }
        Aggregation::new(agg, roots)
    }

    pub fn identity(n: usize) -> Self {
        Aggregation {
            agg: (0..n).collect(),
            roots: (0..n).collect(),
        }
    }

    pub fn n_fine(&self) -> usize {
        self.agg.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.roots.len()
    }

    /// Members of every aggregate in increasing node order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_coarse()];
        for (i, &a) in self.agg.iter().enumerate() {
            m[a].push(i);
        }
        m
    }
}

/// Symmetrized strength pattern restricted to competing nodes. Edge values
/// are the larger `|a_ij|` of the two directions.
pub fn competition_graph(c: &StrengthGraph) -> CsrMatrix {
    let n = c.n();
    let competing: Vec<bool> = (0..n).map(|i| c.out_degree(i) > 0).collect();
    let t = c.c.transpose();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !competing[i] {
                return Vec::new();
            }
            // sorted merge of row i of C and row i of Cᵀ
            let mut out = Vec::with_capacity(c.c.row_nnz(i) + t.row_nnz(i));
            let mut a = c.c.row(i).peekable();
            let mut b = t.row(i).peekable();
            loop {
                let next = match (a.peek(), b.peek()) {
                    (None, None) => break,
                    (Some(_), None) => a.next().unwrap(),
                    (None, Some(_)) => b.next().unwrap(),
                    (Some(&(ja, va)), Some(&(jb, vb))) => {
                        if ja < jb {
                            a.next().unwrap()
                        } else if jb < ja {
                            b.next().unwrap()
                        } else {
                            a.next();
                            b.next();
                            (ja, va.max(vb))
                        }
                    }
                };
                if competing[next.0] {
                    out.push(next);
                }
            }
            out
        })
        .collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for r in rows {
        for (j, v) in r {
            cols.push(j);
            vals.push(v);
        }
        row_offsets.push(cols.len());
    }
    CsrMatrix::from_parts_unchecked(n, n, row_offsets, cols, vals)
}

/// Per-node uniform value in (0, 1) keyed by (seed, node), independent of
/// evaluation order.
pub fn node_randoms(seed: u64, n: usize) -> Vec<f64> {
    let mut r = vec![0.0; n];
    r.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(2 * (b * BLOCK) as u128);
        for v in chunk {
            let bits = rng.next_u64() >> 11;
            *v = (bits as f64 + 0.5) / (1u64 << 53) as f64;
        }
    });
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tuple {
    s: i8,
    v: f64,
    i: usize,
}

impl Tuple {
    /// Lexicographic on (s, v, i).
    fn gt(&self, o: &Tuple) -> bool {
        self.s
            .cmp(&o.s)
            .then(self.v.total_cmp(&o.v))
            .then(self.i.cmp(&o.i))
            .is_gt()
    }
}

/// Parallel MIS(2) with weights `influence count + random`.
pub fn mis2(c: &StrengthGraph, seed: u64) -> MisState {
    let graph = competition_graph(c);
    mis2_on(c, &graph, seed)
}

fn mis2_on(c: &StrengthGraph, graph: &CsrMatrix, seed: u64) -> MisState {
    let n = c.n();
    let counts = influence_counts(c);
    let random = node_randoms(seed, n);
    let weight: Vec<f64> = counts
        .iter()
        .zip(&random)
        .map(|(&k, &r)| k as f64 + r)
        .collect();
    let mut state: Vec<i8> = (0..n)
        .map(|i| if c.out_degree(i) == 0 { ROOT } else { UNDECIDED })
        .collect();

    let mut tuples = vec![
        Tuple {
            s: 0,
            v: 0.0,
            i: 0
        };
        n
    ];
    let mut next = tuples.clone();
    let mut sweeps = 0;
    while state.contains(&UNDECIDED) {
        sweeps += 1;
        tuples
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, t)| {
                *t = Tuple {
                    s: state[i],
                    v: weight[i],
                    i,
                }
            });
        for _ in 0..2 {
            next.par_chunks_mut(BLOCK)
                .enumerate()
                .for_each(|(b, chunk)| {
                    for (k, out) in chunk.iter_mut().enumerate() {
                        let i = b * BLOCK + k;
                        let mut t = tuples[i];
                        for &j in &graph.col_indices()[graph.row_range(i)] {
                            if tuples[j].gt(&t) {
                                t = tuples[j];
                            }
                        }
                        *out = t;
                    }
                });
            std::mem::swap(&mut tuples, &mut next);
        }
        state.par_iter_mut().enumerate().for_each(|(i, s)| {
            if *s == UNDECIDED {
                let t = tuples[i];
                if t.i == i {
                    *s = ROOT;
                } else if t.s == ROOT {
                    *s = NON_ROOT;
                }
            }
        });
    }
    MisState {
        state,
        weight,
        random,
        sweeps,
    }
}

/// Group every node with a root: roots seed aggregates, their neighbours
/// join them, then remaining nodes join the aggregate of their strongest
/// already-aggregated neighbour (lowest aggregate on ties). Leftovers become
/// singletons. Aggregates are numbered by root node index.
pub fn aggregate(c: &StrengthGraph, mis: &MisState) -> Aggregation {
    let graph = competition_graph(c);
    aggregate_on(&graph, mis)
}

fn aggregate_on(graph: &CsrMatrix, mis: &MisState) -> Aggregation {
    const NONE: usize = usize::MAX;
    let n = mis.state.len();
    let is_root = |i: usize| mis.state[i] == ROOT;

    // owning root node per fine node
    let pass1: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            if is_root(i) {
                return i;
            }
            graph.col_indices()[graph.row_range(i)]
                .iter()
                .copied()
                .find(|&j| is_root(j))
                .unwrap_or(NONE)
        })
        .collect();

    let owner: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            if pass1[i] != NONE {
                return pass1[i];
            }
            let mut best: Option<(f64, usize)> = None;
            for (j, w) in graph.row(i) {
                let r = pass1[j];
                if r == NONE {
                    continue;
                }
                best = match best {
                    Some((bw, br)) if bw > w || (bw == w && br <= r) => Some((bw, br)),
                    _ => Some((w, r)),
                };
            }
            best.map_or(i, |(_, r)| r)
        })
        .collect();

    // every owner is its own owner; number them in node order
    let roots: Vec<usize> = (0..n).filter(|&i| owner[i] == i).collect();
    let mut index = vec![NONE; n];
    for (k, &r) in roots.iter().enumerate() {
        index[r] = k;
    }
    let agg = owner.iter().map(|&r| index[r]).collect();
    Aggregation { agg, roots }
}

/// MIS(2) followed by aggregation, sharing one competition graph.
pub fn coarsen(c: &StrengthGraph, seed: u64) -> (MisState, Aggregation) {
    let graph = competition_graph(c);
    let mis = mis2_on(c, &graph, seed);
    let agg = aggregate_on(&graph, &mis);
    (mis, agg)
}
