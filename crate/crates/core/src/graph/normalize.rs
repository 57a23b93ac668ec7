use ndarray::{Array2, ArrayView2};

use super::{InteractionGraph, SocialGraph};

/// Anything with sparse rows over a column index space.
pub trait Adjacency {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    fn row(&self, r: usize) -> &[usize];
}

impl Adjacency for InteractionGraph {
    fn num_rows(&self) -> usize {
        self.num_users()
    }

    fn num_cols(&self) -> usize {
        self.num_items()
    }

    fn row(&self, r: usize) -> &[usize] {
        self.items_of(r)
    }
}

impl Adjacency for SocialGraph {
    fn num_rows(&self) -> usize {
        self.num_users()
    }

    fn num_cols(&self) -> usize {
        self.num_users()
    }

    fn row(&self, r: usize) -> &[usize] {
        self.neighbors(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct SparseRows {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseRows {
    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    fn num_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn multiply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_rows(), x.ncols()));
        for (r, mut dst) in out.rows_mut().into_iter().enumerate() {
            for (c, w) in self.row(r) {
                dst.scaled_add(w, &x.row(c));
            }
        }
        out
    }
}

/// Degree-normalized sparse adjacency. Edge `(a, b)` carries
/// `1 / sqrt(out_deg(a) * in_deg(b))`, which reduces to `1 / sqrt(|N_a| |N_b|)`
/// for bipartite and undirected graphs.
///
/// Both orientations are kept so the forward map and its transpose run in
/// O(edges).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    num_rows: usize,
    num_cols: usize,
    forward: SparseRows,
    transpose: SparseRows,
    isolated_rows: Vec<usize>,
    isolated_cols: Vec<usize>,
}

/// Symmetric degree normalization of any row-adjacency.
///
/// Zero-degree nodes never divide by zero: their rows stay empty and they are
/// listed in [`NormalizedAdjacency::isolated_rows`] / [`NormalizedAdjacency::isolated_cols`].
pub fn symmetric_normalize<G: Adjacency + ?Sized>(graph: &G) -> NormalizedAdjacency {
    let num_rows = graph.num_rows();
    let num_cols = graph.num_cols();
    let mut in_degree = vec![0usize; num_cols];
    for r in 0..num_rows {
        for &c in graph.row(r) {
            in_degree[c] += 1;
        }
    }

    let mut row_ptr = Vec::with_capacity(num_rows + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    let mut isolated_rows = Vec::new();
    row_ptr.push(0);
    for r in 0..num_rows {
        let row = graph.row(r);
        if row.is_empty() {
            isolated_rows.push(r);
        }
        let out_degree = row.len() as f64;
        for &c in row {
            cols.push(c);
            weights.push(1.0 / (out_degree * in_degree[c] as f64).sqrt());
        }
        row_ptr.push(cols.len());
    }
    let forward = SparseRows {
        row_ptr,
        cols,
        weights,
    };

    // Counting-sort transpose; rows of the transpose come out sorted.
    let mut t_ptr = vec![0usize; num_cols + 1];
    for &c in &forward.cols {
        t_ptr[c + 1] += 1;
    }
    for c in 0..num_cols {
        t_ptr[c + 1] += t_ptr[c];
    }
    let mut fill = t_ptr.clone();
    let mut t_cols = vec![0usize; forward.cols.len()];
    let mut t_weights = vec![0.0; forward.cols.len()];
    for r in 0..num_rows {
        for (c, w) in forward.row(r) {
            t_cols[fill[c]] = r;
            t_weights[fill[c]] = w;
            fill[c] += 1;
        }
    }
    let transpose = SparseRows {
        row_ptr: t_ptr,
        cols: t_cols,
        weights: t_weights,
    };
    let isolated_cols = (0..num_cols).filter(|&c| in_degree[c] == 0).collect();

    NormalizedAdjacency {
        num_rows,
        num_cols,
        forward,
        transpose,
        isolated_rows,
        isolated_cols,
    }
}

impl NormalizedAdjacency {
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_entries(&self) -> usize {
        self.forward.cols.len()
    }

    /// Rows with no outgoing edge.
    pub fn isolated_rows(&self) -> &[usize] {
        &self.isolated_rows
    }

    /// Columns with no incoming edge.
    pub fn isolated_cols(&self) -> &[usize] {
        &self.isolated_cols
    }

    pub fn weight(&self, r: usize, c: usize) -> Option<f64> {
        self.forward
            .row(r)
            .find(|&(col, _)| col == c)
            .map(|(_, w)| w)
    }

    /// Stored `(row, col, weight)` triples in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_rows).flat_map(move |r| self.forward.row(r).map(move |(c, w)| (r, c, w)))
    }

    /// `A x` for `x` of shape `num_cols x d`.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        debug_assert_eq!(x.nrows(), self.num_cols);
        self.forward.multiply(x)
    }

    /// `A^T y` for `y` of shape `num_rows x d`.
    pub fn apply_transpose(&self, y: ArrayView2<'_, f64>) -> Array2<f64> {
        debug_assert_eq!(y.nrows(), self.num_rows);
        self.transpose.multiply(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn single_edge_has_unit_weight() {
        let g = InteractionGraph::from_edges(1, 1, [(0, 0)]).unwrap();
        let adj = symmetric_normalize(&g);
        assert_eq!(adj.weight(0, 0), Some(1.0));
    }

    #[test]
    fn weights_follow_degree_products() {
        // deg(u0)=2, deg(u1)=1, deg(i0)=2, deg(i1)=1
        let g = InteractionGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        let adj = symmetric_normalize(&g);
        assert!(close(adj.weight(0, 0).unwrap(), 0.5));
        assert!(close(adj.weight(0, 1).unwrap(), 1.0 / 2f64.sqrt()));
        assert!(close(adj.weight(1, 0).unwrap(), 1.0 / 2f64.sqrt()));
        assert_eq!(adj.weight(1, 1), None);
    }

    #[test]
    fn isolated_nodes_are_flagged_with_empty_rows() {
        let g = InteractionGraph::from_edges(6, 3, [(0, 0), (1, 1)]).unwrap();
        let adj = symmetric_normalize(&g);
        assert_eq!(adj.isolated_rows(), &[2, 3, 4, 5]);
        assert_eq!(adj.isolated_cols(), &[2]);
        assert!(adj.entries().all(|(r, _, w)| r != 5 && w > 0.0));
    }

    #[test]
    fn undirected_social_normalization_is_symmetric() {
        let g = SocialGraph::undirected(4, [(0, 1), (0, 2), (2, 3), (1, 3), (0, 3)]).unwrap();
        let adj = symmetric_normalize(&g);
        for (r, c, w) in adj.entries() {
            assert_eq!(adj.weight(c, r), Some(w));
        }
    }

    #[test]
    fn normalization_is_structurally_idempotent() {
        let g = SocialGraph::undirected(4, [(0, 1), (0, 2), (2, 3)]).unwrap();
        assert_eq!(symmetric_normalize(&g), symmetric_normalize(&g.clone()));
    }

    #[test]
    fn transpose_matches_dense_product() {
        let g = InteractionGraph::from_edges(2, 3, [(0, 0), (0, 2), (1, 1), (1, 2)]).unwrap();
        let adj = symmetric_normalize(&g);
        let mut dense = Array2::<f64>::zeros((2, 3));
        for (r, c, w) in adj.entries() {
            dense[[r, c]] = w;
        }
        let y = array![[1.0, -2.0], [0.5, 3.0]];
        let x = array![[1.0, 0.0], [2.0, 1.0], [-1.0, 4.0]];
        assert_eq!(adj.apply_transpose(y.view()), dense.t().dot(&y));
        assert_eq!(adj.apply(x.view()), dense.dot(&x));
    }

    #[test]
    fn directed_rows_use_in_degree_of_target() {
        // 0 -> 1, 2 -> 1: in_deg(1) = 2, out_deg(0) = out_deg(2) = 1
        let g = SocialGraph::directed(vec![vec![1], vec![], vec![1]]).unwrap();
        let adj = symmetric_normalize(&g);
        assert!(close(adj.weight(0, 1).unwrap(), 1.0 / 2f64.sqrt()));
        assert_eq!(adj.isolated_rows(), &[1]);
    }
}
