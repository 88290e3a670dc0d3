//! Undirected communication graphs between threads: construction, Laplacian,
//! algebraic connectivity, and the spectral quadratic-form bound used by the
//! cohesion analysis.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const EIG_TOL: f64 = 1e-9;
const MAX_REDRAWS: usize = 100;

/// Undirected simple graph on `n` vertices with 0/1 adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Array2<u8>,
}

/// Requested graph family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Complete,
    Ring,
    /// Every vertex picks `k` distinct partners uniformly; edges are
    /// symmetrized, so degrees can exceed `k`. Redrawn if disconnected.
    RandomKNeighbors { k: usize, seed: u64 },
}

/// Laplacian matrix together with the spectral quantities the bounds consume.
#[derive(Debug, Clone)]
pub struct LaplacianSummary {
    pub laplacian: Array2<f64>,
    /// Second-smallest eigenvalue (algebraic connectivity).
    pub lambda2: f64,
    /// |Tr(L)| = sum of degrees.
    pub trace: f64,
    pub connected: bool,
}

impl Graph {
    /// Builds a graph from an explicit adjacency matrix, checking symmetry,
    /// zero diagonal and 0/1 entries.
    pub fn from_adjacency(adj: Array2<u8>) -> Result<Self> {
        let n = adj.nrows();
        if adj.ncols() != n {
            return Err(Error::Topology(format!(
                "adjacency must be square, got {}x{}",
                n,
                adj.ncols()
            )));
        }
        for i in 0..n {
            if adj[[i, i]] != 0 {
                return Err(Error::Topology(format!("self-edge at vertex {i}")));
            }
            for j in 0..n {
                if adj[[i, j]] > 1 {
                    return Err(Error::Topology(format!(
                        "adjacency entries must be 0/1, got {} at ({i},{j})",
                        adj[[i, j]]
                    )));
                }
                if adj[[i, j]] != adj[[j, i]] {
                    return Err(Error::Topology(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Graph { n, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[[i, j]] == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.adj[[i, j]] == 1).count()
    }

    /// Neighbor lists, used by the engines' hot loops.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.adj[[i, j]] == 1).collect())
            .collect()
    }

    /// Breadth-first connectivity check (independent of the eigensolver).
    pub fn is_connected_bfs(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for (j, s) in seen.iter_mut().enumerate() {
                if self.adj[[v, j]] == 1 && !*s {
                    *s = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Serializes as an edge list: one `i j` pair per line, 0-indexed, i < j.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.adj[[i, j]] == 1 {
                    out.push_str(&format!("{i} {j}\n"));
                }
            }
        }
        out
    }

    /// Parses the edge-list format written by [`Graph::to_edge_list`].
    pub fn from_edge_list(n: usize, text: &str) -> Result<Self> {
        let mut adj = Array2::<u8>::zeros((n, n));
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::Topology(format!("edge list line {lineno}: missing vertex")))?
                    .parse::<usize>()
                    .map_err(|e| Error::Topology(format!("edge list line {lineno}: {e}")))
            };
            let i = parse(it.next())?;
            let j = parse(it.next())?;
            if i >= n || j >= n || i == j {
                return Err(Error::Topology(format!(
                    "edge list line {lineno}: bad edge ({i},{j}) for n={n}"
                )));
            }
            adj[[i, j]] = 1;
            adj[[j, i]] = 1;
        }
        Graph::from_adjacency(adj)
    }
}

/// Builds a graph of the requested family on `n >= 2` vertices.
pub fn make_topology(kind: TopologyKind, n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Topology(format!("need n >= 2 vertices, got {n}")));
    }
    match kind {
        TopologyKind::Complete => {
            let mut adj = Array2::<u8>::ones((n, n));
            for i in 0..n {
                adj[[i, i]] = 0;
            }
            Graph::from_adjacency(adj)
        }
        TopologyKind::Ring => {
            let mut adj = Array2::<u8>::zeros((n, n));
            for i in 0..n {
                let j = (i + 1) % n;
                adj[[i, j]] = 1;
                adj[[j, i]] = 1;
            }
            Graph::from_adjacency(adj)
        }
        TopologyKind::RandomKNeighbors { k, seed } => {
            if k >= n {
                return Err(Error::Topology(format!(
                    "random_k_neighbors needs k < n, got k={k}, n={n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..MAX_REDRAWS {
                let mut adj = Array2::<u8>::zeros((n, n));
                for i in 0..n {
                    // Pick k distinct partners among the other n-1 vertices.
                    for idx in sample(&mut rng, n - 1, k) {
                        let j = if idx >= i { idx + 1 } else { idx };
                        adj[[i, j]] = 1;
                        adj[[j, i]] = 1;
                    }
                }
                let g = Graph::from_adjacency(adj)?;
                if g.is_connected_bfs() {
                    return Ok(g);
                }
            }
            Err(Error::TopologyRetries {
                retries: MAX_REDRAWS,
            })
        }
    }
}

/// Computes L = D - A, its algebraic connectivity lambda2 (second-smallest
/// eigenvalue, ascending order), |Tr(L)| and the connectivity flag.
pub fn laplacian(g: &Graph) -> LaplacianSummary {
    let n = g.n();
    let mut lap = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut deg = 0.0;
        for j in 0..n {
            if g.adjacency()[[i, j]] == 1 {
                deg += 1.0;
                lap[[i, j]] = -1.0;
            }
        }
        lap[[i, i]] = deg;
    }
    let eig = symmetric_eigenvalues(&lap, EIG_TOL);
    let lambda2 = if n >= 2 { eig[1].max(0.0) } else { 0.0 };
    let trace = (0..n).map(|i| lap[[i, i]]).sum::<f64>().abs();
    LaplacianSummary {
        laplacian: lap,
        lambda2,
        trace,
        connected: lambda2 > EIG_TOL,
    }
}

/// Checks the spectral lower bound on the Laplacian quadratic form for a
/// deviation matrix `e` (n rows of m-dimensional deviations, zero column
/// sums): e'(L (x) I_m) e >= lambda2 * sum_i ||e_i||^2, up to a small
/// tolerance. Rejects `e` whose column sums exceed 1e-9.
pub fn quadratic_form_lower_bound_check(lap: &LaplacianSummary, e: &Array2<f64>) -> Result<bool> {
    let n = lap.laplacian.nrows();
    if e.nrows() != n {
        return Err(Error::Parameter(format!(
            "deviation matrix has {} rows, graph has {n} vertices",
            e.nrows()
        )));
    }
    for c in 0..e.ncols() {
        let s: f64 = e.column(c).sum();
        if s.abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "column {c} of e sums to {s:.3e}, expected 0"
            )));
        }
    }
    // e'(L (x) I_m) e = sum over columns c of e_c' L e_c.
    let mut quad = 0.0;
    for c in 0..e.ncols() {
        let col = e.column(c);
        let lcol = lap.laplacian.dot(&col);
        quad += col.dot(&lcol);
    }
    let norm2: f64 = e.iter().map(|x| x * x).sum();
    let tol = 1e-9 * (1.0 + lap.lambda2 * norm2);
    Ok(quad >= lap.lambda2 * norm2 - tol)
}
