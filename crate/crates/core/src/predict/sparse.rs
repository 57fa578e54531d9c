use ndarray::Array2;

use crate::graph::{Adjacency, Edge};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut r in rows {
            r.sort_by_key(|(j, _)| *j);
            for (j, v) in r {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    /// `self * x`.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, x.ncols()));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for (j, v) in self.row(i) {
                row.scaled_add(v, &x.row(j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// `D^-1/2 (A + I) D^-1/2` over the given edges, `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(edges: &[Edge], n: usize) -> Csr {
    let adj = Adjacency::from_edges(n, edges);
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((adj.degree(i) + 1) as f64).sqrt()).collect();
    let rows = (0..n)
        .map(|i| {
            std::iter::once(i)
                .chain(adj.neighbors(i).iter().copied())
                .map(|j| (j, inv_sqrt[i] * inv_sqrt[j]))
                .collect()
        })
        .collect();
    Csr::from_rows(rows)
}

/// Row-normalized neighbor averaging without self loops; isolated rows are empty.
pub fn mean_aggregator(adj: &Adjacency) -> Csr {
    let rows = (0..adj.n())
        .map(|i| {
            let nb = adj.neighbors(i);
            let w = 1.0 / nb.len().max(1) as f64;
            nb.iter().map(|&j| (j, w)).collect()
        })
        .collect();
    Csr::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_examples() {
        let single = normalized_adjacency(&[], 1);
        assert_eq!(single.to_dense(), ndarray::arr2(&[[1.0]]));
        let k2 = normalized_adjacency(&[Edge::new(0, 1)], 2);
        let d = k2.to_dense();
        for v in d.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_is_symmetric_with_bounded_spectrum() {
        let edges: Vec<Edge> = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 5)]
            .iter()
            .map(|&(a, b)| Edge::new(a, b))
            .collect();
        let a = normalized_adjacency(&edges, 7).to_dense();
        assert_eq!(a, a.t().to_owned());
        assert!(a.iter().all(|&x| x >= 0.0));
        // power iteration for the spectral radius
        let mut v = ndarray::Array1::from_elem(7, 1.0);
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = a.dot(&v);
            lambda = w.dot(&w).sqrt() / v.dot(&v).sqrt();
            v = &w / w.dot(&w).sqrt();
        }
        assert!(lambda <= 1.0 + 1e-9, "spectral radius {lambda}");
    }

    #[test]
    fn mean_aggregator_rows() {
        let adj = Adjacency::from_edges(4, &[Edge::new(0, 1), Edge::new(0, 2)]);
        let m = mean_aggregator(&adj);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.row(3).count(), 0);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 0.5);
    }
}
