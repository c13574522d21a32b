//! Weighted undirected communication graphs.
//!
//! Nodes are indexed `0..n`. Edges carry strictly positive weights; the
//! graph Laplacian, the (unit-weight) incidence matrix, connectivity, and
//! the algebraic connectivity `lambda_2` are derived from the edge list.
//! Eigenvalues of symmetric matrices are computed with a dependency-free
//! cyclic Jacobi sweep, which is plenty for the small matrices that arise
//! here.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scenario::rng::SplitMix64;

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
const JACOBI_TOLERANCE: f64 = 1e-12;

/// Eigenvalues with magnitude at or below this count as zero when deciding
/// connectivity from a spectrum.
pub const ZERO_EIGENVALUE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a graph needs at least two nodes, got {n}")]
    TooFewNodes { n: usize },
    #[error("edge ({i}, {j}) references a node outside 0..{n}")]
    NodeOutOfRange { i: usize, j: usize, n: usize },
    #[error("self loop at node {i}")]
    SelfLoop { i: usize },
    #[error("duplicate edge between {i} and {j}")]
    DuplicateEdge { i: usize, j: usize },
    #[error("edge ({i}, {j}) has non-positive weight {weight}")]
    NonPositiveWeight { i: usize, j: usize, weight: f64 },
    #[error("matrix is not symmetric (asymmetry {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("graph is not connected")]
    Disconnected,
}

/// Undirected edge between nodes `i` and `j` with positive weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Validated undirected weighted graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    edges: Vec<Edge>,
}

impl Topology {
    /// Builds a graph, rejecting self loops, duplicate (unordered) edges,
    /// non-positive weights, and out-of-range node ids.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes { n });
        }
        let mut seen = std::collections::HashSet::new();
        let mut list = Vec::with_capacity(edges.len());
        for &(i, j, weight) in edges {
            if i >= n || j >= n {
                return Err(GraphError::NodeOutOfRange { i, j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop { i });
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(GraphError::DuplicateEdge { i, j });
            }
            if !(weight > 0.0) {
                return Err(GraphError::NonPositiveWeight { i, j, weight });
            }
            list.push(Edge { i, j, weight });
        }
        Ok(Topology { n, edges: list })
    }

    /// Path graph 0-1-2-...-(n-1) with unit weights.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
        Topology::new(n, &edges).expect("path construction is always valid")
    }

    /// Complete graph on `n` nodes with unit weights.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j, 1.0));
            }
        }
        Topology::new(n, &edges).expect("complete construction is always valid")
    }

    /// Random connected graph: a random spanning tree plus `extra` random
    /// additional edges, all with unit weights.
    pub fn random_connected(n: usize, extra: usize, rng: &mut SplitMix64) -> Self {
        assert!(n >= 2);
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for j in 1..n {
            let i = (rng.next_u64() % j as u64) as usize;
            edges.push((i, j, 1.0));
        }
        let mut seen: std::collections::HashSet<(usize, usize)> = edges
            .iter()
            .map(|&(i, j, _)| (i.min(j), i.max(j)))
            .collect();
        let mut budget = extra;
        let mut attempts = 0;
        while budget > 0 && attempts < 20 * extra + 20 {
            attempts += 1;
            let i = (rng.next_u64() % n as u64) as usize;
            let j = (rng.next_u64() % n as u64) as usize;
            if i != j && seen.insert((i.min(j), i.max(j))) {
                edges.push((i, j, 1.0));
                budget -= 1;
            }
        }
        Topology::new(n, &edges).expect("sampled edges are valid by construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weighted degree of node `i`.
    pub fn degree(&self, i: usize) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.i == i || e.j == i)
            .map(|e| e.weight)
            .sum()
    }

    /// Number of edges incident to node `i`.
    pub fn degree_count(&self, i: usize) -> usize {
        self.edges.iter().filter(|e| e.i == i || e.j == i).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.i == i {
                Some((e.j, e.weight))
            } else if e.j == i {
                Some((e.i, e.weight))
            } else {
                None
            }
        })
    }

    /// Weighted adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.weight;
            a[(e.j, e.i)] = e.weight;
        }
        a
    }

    /// Graph Laplacian `L = Delta - A`; symmetric with zero row sums.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            l[(e.i, e.i)] += e.weight;
            l[(e.j, e.j)] += e.weight;
            l[(e.i, e.j)] -= e.weight;
            l[(e.j, e.i)] -= e.weight;
        }
        l
    }

    /// Incidence matrix for unit weights: column k has +1 at the first node
    /// of edge k and -1 at the second, in edge-list order. For unit weights
    /// `B B^T` equals the Laplacian.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n, self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            b[(e.i, k)] = 1.0;
            b[(e.j, k)] = -1.0;
        }
        b
    }

    /// Breadth-first reachability of every node from node 0.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let mut visited = vec![false; self.n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        visited[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Second-smallest Laplacian eigenvalue; strictly positive exactly when
    /// the graph is connected.
    pub fn algebraic_connectivity(&self) -> Result<f64, GraphError> {
        if !self.is_connected() {
            return Err(GraphError::Disconnected);
        }
        let eigs = symmetric_eigenvalues(&self.laplacian())?;
        Ok(eigs[1])
    }
}

/// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi rotations
/// run until the off-diagonal Frobenius norm drops below 1e-12.
///
/// Rejects matrices whose entrywise asymmetry exceeds 1e-12.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>, GraphError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(GraphError::NotSymmetric {
            defect: f64::INFINITY,
        });
    }
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if defect > 1e-12 {
        return Err(GraphError::NotSymmetric { defect });
    }
    let mut a = m.clone();
    for _sweep in 0..100 {
        if off_diagonal_norm(&a) < JACOBI_TOLERANCE {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::SymmetricEigen;

    /// Union-find connectivity oracle, independent of the BFS route.
    fn union_find_connected(topo: &Topology) -> bool {
        let mut parent: Vec<usize> = (0..topo.n()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in topo.edges() {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        (1..topo.n()).all(|i| find(&mut parent, i) == root)
    }

    #[test]
    fn path_laplacian_entries() {
        let l = Topology::path(3).laplacian();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn weighted_single_edge_laplacian() {
        let topo = Topology::new(2, &[(0, 1, 2.5)]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.5, -2.5, -2.5, 2.5]);
        assert_eq!(topo.laplacian(), expected);
    }

    #[test]
    fn laplacian_annihilates_constants_and_is_psd() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..30 {
            let n = 2 + (rng.next_u64() % 9) as usize;
            let topo = Topology::random_connected(n, (rng.next_u64() % 5) as usize, &mut rng);
            let l = topo.laplacian();
            let ones = nalgebra::DVector::from_element(n, 1.0);
            assert!((l.clone() * ones).norm() < 1e-12);
            let eigs = symmetric_eigenvalues(&l).unwrap();
            assert!(eigs[0] > -1e-12);
        }
    }

    #[test]
    fn path_incidence_and_laplacian_factorization() {
        let topo = Topology::path(3);
        let b = topo.incidence();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0]);
        assert_eq!(b, expected);
        assert_abs_diff_eq!(&b * b.transpose(), topo.laplacian(), epsilon = 1e-14);
    }

    #[test]
    fn incidence_factorization_on_random_unit_graphs() {
        let mut rng = SplitMix64::new(32);
        for _ in 0..30 {
            let n = 2 + (rng.next_u64() % 9) as usize;
            let topo = Topology::random_connected(n, (rng.next_u64() % 6) as usize, &mut rng);
            let b = topo.incidence();
            assert_abs_diff_eq!(&b * b.transpose(), topo.laplacian(), epsilon = 1e-13);
        }
    }

    #[test]
    fn connectivity_matches_union_find_oracle() {
        let mut rng = SplitMix64::new(33);
        for _ in 0..50 {
            let n = 2 + (rng.next_u64() % 10) as usize;
            // random graph that may or may not be connected
            let mut edges = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for _ in 0..(rng.next_u64() % (2 * n as u64 + 1)) {
                let i = (rng.next_u64() % n as u64) as usize;
                let j = (rng.next_u64() % n as u64) as usize;
                if i != j && seen.insert((i.min(j), i.max(j))) {
                    edges.push((i, j, 1.0));
                }
            }
            if let Ok(topo) = Topology::new(n, &edges) {
                assert_eq!(topo.is_connected(), union_find_connected(&topo));
            }
        }
    }

    #[test]
    fn disconnected_graph_detected() {
        let topo = Topology::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(!topo.is_connected());
        assert_eq!(topo.algebraic_connectivity(), Err(GraphError::Disconnected));
        let eigs = symmetric_eigenvalues(&topo.laplacian()).unwrap();
        let zeros = eigs
            .iter()
            .filter(|e| e.abs() <= ZERO_EIGENVALUE_THRESHOLD)
            .count();
        assert_eq!(zeros, 2);
    }

    #[test]
    fn zero_eigenvalue_count_matches_component_count() {
        // three components: a triangle, an edge, an isolated pair
        let topo = Topology::new(
            7,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (5, 6, 1.0),
            ],
        )
        .unwrap();
        let eigs = symmetric_eigenvalues(&topo.laplacian()).unwrap();
        let zeros = eigs
            .iter()
            .filter(|e| e.abs() <= ZERO_EIGENVALUE_THRESHOLD)
            .count();
        assert_eq!(zeros, 3);
    }

    #[test]
    fn path_and_complete_connectivity_eigenvalues() {
        assert_relative_eq!(
            Topology::path(3).algebraic_connectivity().unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            Topology::complete(3).algebraic_connectivity().unwrap(),
            3.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn path3_spectrum_from_characteristic_polynomial() {
        // det(L - t I) for the 3-path expands to -t (t - 1) (t - 3)
        let eigs = symmetric_eigenvalues(&Topology::path(3).laplacian()).unwrap();
        for (got, expected) in eigs.iter().zip([0.0, 1.0, 3.0]) {
            assert_abs_diff_eq!(*got, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobi_matches_library_eigensolver() {
        let mut rng = SplitMix64::new(34);
        for _ in 0..25 {
            let n = 2 + (rng.next_u64() % 11) as usize;
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.uniform() * 4.0 - 2.0;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let ours = symmetric_eigenvalues(&m).unwrap();
            let mut reference: Vec<f64> = SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in ours.iter().zip(reference.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(GraphError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn adding_edges_does_not_decrease_connectivity() {
        let mut rng = SplitMix64::new(35);
        for _ in 0..20 {
            let n = 3 + (rng.next_u64() % 6) as usize;
            let sparse = Topology::random_connected(n, 0, &mut rng);
            let mut edges: Vec<(usize, usize, f64)> = sparse
                .edges()
                .iter()
                .map(|e| (e.i, e.j, e.weight))
                .collect();
            let before = sparse.algebraic_connectivity().unwrap();
            for i in 0..n {
                for j in (i + 1)..n {
                    if !edges
                        .iter()
                        .any(|&(a, b, _)| (a.min(b), a.max(b)) == (i, j))
                    {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            let complete = Topology::new(n, &edges).unwrap();
            let after = complete.algebraic_connectivity().unwrap();
            assert!(after >= before - 1e-9);
        }
    }

    #[test]
    fn invalid_topologies_are_rejected() {
        assert!(matches!(
            Topology::new(1, &[]),
            Err(GraphError::TooFewNodes { .. })
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 0, 1.0)]),
            Err(GraphError::SelfLoop { .. })
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(GraphError::DuplicateEdge { .. })
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 1, 0.0)]),
            Err(GraphError::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            Topology::new(3, &[(0, 3, 1.0)]),
            Err(GraphError::NodeOutOfRange { .. })
        ));
    }
}
