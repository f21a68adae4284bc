use nalgebra::DMatrix;

/// Simple undirected graph stored as a dense symmetric 0/1 adjacency matrix
/// with zero diagonal.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<u8>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adj: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v] != 0
    }

    /// Sets or clears the edge `{u, v}`. Self-loops are ignored.
    #[inline]
    pub fn set_edge(&mut self, u: usize, v: usize, present: bool) {
        if u == v {
            return;
        }
        let b = present as u8;
        self.adj[u * self.n + v] = b;
        self.adj[v * self.n + u] = b;
    }

    pub fn row(&self, u: usize) -> &[u8] {
        &self.adj[u * self.n..(u + 1) * self.n]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row(u).iter().map(|&b| b as usize).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(u)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(v, _)| v)
    }

    /// Edges `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            ((u + 1)..self.n)
                .filter(move |&v| self.has_edge(u, v))
                .map(move |v| (u, v))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|&b| b as usize).sum::<usize>() / 2
    }

    /// Removes every edge incident to `u`.
    pub fn isolate(&mut self, u: usize) {
        for v in 0..self.n {
            self.set_edge(u, v, false);
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.adj[i * self.n + j] as f64)
    }

    /// Checks symmetry, zero diagonal and 0/1 entries.
    pub fn is_well_formed(&self) -> bool {
        (0..self.n).all(|i| {
            self.adj[i * self.n + i] == 0
                && (0..self.n).all(|j| {
                    let x = self.adj[i * self.n + j];
                    x <= 1 && x == self.adj[j * self.n + i]
                })
        })
    }

    /// Nodes whose adjacency rows differ between `self` and `other`.
    pub fn changed_nodes(&self, other: &Graph) -> Vec<usize> {
        assert_eq!(self.n, other.n);
        (0..self.n)
            .filter(|&u| self.row(u) != other.row(u))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_edge_keeps_symmetry_and_ignores_loops() {
        let mut g = Graph::empty(4);
        g.set_edge(0, 2, true);
        g.set_edge(3, 3, true);
        assert!(g.has_edge(2, 0));
        assert!(!g.has_edge(3, 3));
        assert_eq!(g.edge_count(), 1);
        assert!(g.is_well_formed());
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2)]);
    }

    #[test]
    fn isolate_clears_row_and_column() {
        let mut g = Graph::empty(5);
        for v in 1..5 {
            g.set_edge(0, v, true);
        }
        g.set_edge(1, 2, true);
        g.isolate(0);
        assert_eq!(g.degree(0), 0);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.changed_nodes(&Graph::empty(5)), vec![1, 2]);
    }
}
