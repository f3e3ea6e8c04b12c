use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Undirected, connected communication graph with nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CommGraph {
    adjacency: DMatrix<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl CommGraph {
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::InvalidGraph("adjacency must be square and nonempty".into()));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidGraph(format!("weight a[{i},{j}] = {a} is not a nonnegative number")));
                }
                if a != adjacency[(j, i)] {
                    return Err(Error::InvalidGraph(format!("a[{i},{j}] != a[{j},{i}]; graph must be undirected")));
                }
            }
        }
        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| adjacency[(i, j)] > 0.0)
                    .map(|j| (j, adjacency[(i, j)]))
                    .collect()
            })
            .collect();
        let graph = Self { adjacency, neighbors };
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    /// Unit-weight graph from an undirected edge list (0-based node indices).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("edge ({i}, {j}) references a node outside 0..{n}")));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        Self::new(a)
    }

    /// `0 - 1 - ... - (n-1) - 0`.
    pub fn ring(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).filter(|(i, j)| i != j).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut l = -self.adjacency.clone();
        for i in 0..n {
            l[(i, i)] = self.adjacency.row(i).sum();
        }
        l
    }

    /// `L v` computed from neighbor lists.
    pub fn laplacian_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.node_count(),
            (0..self.node_count()).map(|i| {
                self.neighbors[i]
                    .iter()
                    .map(|&(j, a)| a * (v[i] - v[j]))
                    .sum::<f64>()
            }),
        )
    }

    /// Second-smallest Laplacian eigenvalue; `None` for a single node.
    pub fn algebraic_connectivity(&self) -> Option<f64> {
        if self.node_count() < 2 {
            return None;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(ev[1])
    }

    /// Minimum-norm solution of `L x = rhs` for `rhs` orthogonal to the all-ones vector.
    pub fn laplacian_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let eig = SymmetricEigen::new(self.laplacian());
        let scale = eig.eigenvalues.amax().max(1.0);
        let mut out = DVector::zeros(rhs.len());
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            if *lam > 1e-10 * scale {
                let v = eig.eigenvectors.column(k);
                out += v * (v.dot(rhs) / lam);
            }
        }
        out
    }

    fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
