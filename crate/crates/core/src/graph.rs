//! The measurement network: vertices, directed relative-pose measurements,
//! incidence matrices, and weight-graph Laplacians.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::pose::{check_special_orthogonal, Pose, ROTATION_TOL};
use crate::sparse::CsrMatrix;
use crate::Result;

/// One directed relative-pose measurement on the edge `tail → head`.
///
/// `rotation` and `translation` express the head frame in the tail frame;
/// `tau` is the translational precision (1/length²) and `kappa` the rotational
/// concentration of the noise model.
#[derive(Debug, Clone)]
pub struct RelativePoseMeasurement {
    pub tail: usize,
    pub head: usize,
    pub translation: DVector<f64>,
    pub rotation: DMatrix<f64>,
    pub tau: f64,
    pub kappa: f64,
}

impl RelativePoseMeasurement {
    pub fn new(
        tail: usize,
        head: usize,
        translation: DVector<f64>,
        rotation: DMatrix<f64>,
        tau: f64,
        kappa: f64,
    ) -> Result<Self> {
        if tail == head {
            return Err(Error::InvalidMeasurement(format!(
                "self-loop measurement on vertex {tail}"
            )));
        }
        check_special_orthogonal(&rotation, ROTATION_TOL)?;
        if translation.len() != rotation.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "translation length {} does not match rotation dimension {}",
                translation.len(),
                rotation.nrows()
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidMeasurement(format!("tau = {tau} must be > 0")));
        }
        if !(kappa >= 0.0) {
            return Err(Error::InvalidMeasurement(format!("kappa = {kappa} must be ≥ 0")));
        }
        Ok(RelativePoseMeasurement {
            tail,
            head,
            translation,
            rotation,
            tau,
            kappa,
        })
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }
}

/// Which edge weights a graph Laplacian is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Translational precisions `τ`.
    Translational,
    /// Rotational concentrations `κ`.
    Rotational,
}

/// A connected directed measurement graph.
///
/// Vertex ids are contiguous `0..n`; the stored edge direction is the chosen
/// orientation of the underlying undirected graph (the noise model is not
/// symmetric under edge reversal, so direction matters). Parallel edges are
/// allowed and contribute additively to every matrix built from the graph.
#[derive(Debug, Clone)]
pub struct MeasurementGraph {
    n: usize,
    dim: usize,
    edges: Vec<RelativePoseMeasurement>,
    /// Original file ids for each internal vertex index, when constructed from
    /// a file whose ids are not contiguous.
    external_ids: Vec<i64>,
    /// Initial pose estimates from VERTEX records, when present.
    initial_guesses: Vec<Option<Pose>>,
}

impl MeasurementGraph {
    /// Builds a graph from measurements over vertices `0..n`.
    pub fn new(n: usize, edges: Vec<RelativePoseMeasurement>) -> Result<Self> {
        Self::with_metadata(n, edges, (0..n as i64).collect(), vec![None; n])
    }

    pub(crate) fn with_metadata(
        n: usize,
        edges: Vec<RelativePoseMeasurement>,
        external_ids: Vec<i64>,
        initial_guesses: Vec<Option<Pose>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMeasurement("graph has no vertices".into()));
        }
        let dim = match edges.first() {
            Some(e) => e.dim(),
            None => {
                return Err(Error::InvalidMeasurement("graph has no measurements".into()));
            }
        };
        if !(dim == 2 || dim == 3) {
            return Err(Error::DimensionMismatch(format!("dimension {dim} not in {{2, 3}}")));
        }
        for e in &edges {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch(
                    "mixed measurement dimensions in one graph".into(),
                ));
            }
            if e.tail >= n || e.head >= n {
                return Err(Error::InvalidMeasurement(format!(
                    "edge ({}, {}) references a vertex outside 0..{n}",
                    e.tail, e.head
                )));
            }
        }
        let components = count_components(n, &edges);
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(MeasurementGraph {
            n,
            dim,
            edges,
            external_ids,
            initial_guesses,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> &[RelativePoseMeasurement] {
        &self.edges
    }

    pub fn external_ids(&self) -> &[i64] {
        &self.external_ids
    }

    pub fn initial_guesses(&self) -> &[Option<Pose>] {
        &self.initial_guesses
    }

    /// Oriented incidence matrix `A(G⃗) ∈ ℝ^{n×m}`: column `e` has `+1` at the
    /// head of `e` and `−1` at its tail.
    pub fn incidence_matrix(&self) -> CsrMatrix {
        let triplets = self.edges.iter().enumerate().flat_map(|(e, m)| {
            [(m.head, e, 1.0), (m.tail, e, -1.0)]
        });
        CsrMatrix::from_triplets(self.n, self.edges.len(), triplets)
    }

    /// Reduced incidence matrix: the incidence matrix with its final row
    /// removed; full row rank `n − 1` for a connected graph.
    pub fn reduced_incidence_matrix(&self) -> CsrMatrix {
        let last = self.n - 1;
        let triplets = self.edges.iter().enumerate().flat_map(|(e, m)| {
            let mut out = Vec::with_capacity(2);
            if m.head != last {
                out.push((m.head, e, 1.0));
            }
            if m.tail != last {
                out.push((m.tail, e, -1.0));
            }
            out
        });
        CsrMatrix::from_triplets(self.n - 1, self.edges.len(), triplets)
    }

    /// Laplacian of the translational (`τ`) or rotational (`κ`) weight graph.
    pub fn weight_graph_laplacian(&self, which: WeightKind) -> CsrMatrix {
        let triplets = self.edges.iter().flat_map(|m| {
            let w = match which {
                WeightKind::Translational => m.tau,
                WeightKind::Rotational => m.kappa,
            };
            [
                (m.tail, m.tail, w),
                (m.head, m.head, w),
                (m.tail, m.head, -w),
                (m.head, m.tail, -w),
            ]
        });
        CsrMatrix::from_triplets(self.n, self.n, triplets)
    }

    /// Edge weights as a vector, in edge order.
    pub fn weights(&self, which: WeightKind) -> Vec<f64> {
        self.edges
            .iter()
            .map(|m| match which {
                WeightKind::Translational => m.tau,
                WeightKind::Rotational => m.kappa,
            })
            .collect()
    }
}

fn count_components(n: usize, edges: &[RelativePoseMeasurement]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut components = n;
    for e in edges {
        let (a, b) = (find(&mut parent, e.tail), find(&mut parent, e.head));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{random_connected_graph, unit_measurement};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_self_loops_and_bad_weights() {
        let d = 2;
        assert!(RelativePoseMeasurement::new(
            1,
            1,
            DVector::zeros(d),
            DMatrix::identity(d, d),
            1.0,
            1.0
        )
        .is_err());
        assert!(RelativePoseMeasurement::new(
            0,
            1,
            DVector::zeros(d),
            DMatrix::identity(d, d),
            0.0,
            1.0
        )
        .is_err());
        assert!(RelativePoseMeasurement::new(
            0,
            1,
            DVector::zeros(d),
            DMatrix::identity(d, d),
            1.0,
            -0.5
        )
        .is_err());
    }

    #[test]
    fn rejects_non_rotation() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 0)] = -1.0; // determinant −1
        assert!(RelativePoseMeasurement::new(0, 1, DVector::zeros(2), m, 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_disconnected() {
        let edges = vec![unit_measurement(0, 1, 2), unit_measurement(2, 3, 2)];
        match MeasurementGraph::new(4, edges) {
            Err(Error::Disconnected { components }) => assert_eq!(components, 2),
            other => panic!("expected Disconnected, got {other:?}"),
        }
    }

    #[test]
    fn incidence_single_edge() {
        let g = MeasurementGraph::new(2, vec![unit_measurement(0, 1, 2)]).unwrap();
        let a = g.incidence_matrix().to_dense();
        assert_eq!(a.nrows(), 2);
        assert_eq!(a.ncols(), 1);
        assert_relative_eq!(a[(0, 0)], -1.0);
        assert_relative_eq!(a[(1, 0)], 1.0);
        let ar = g.reduced_incidence_matrix().to_dense();
        assert_eq!((ar.nrows(), ar.ncols()), (1, 1));
        assert_relative_eq!(ar[(0, 0)], -1.0);
    }

    #[test]
    fn incidence_path_graph() {
        let g = MeasurementGraph::new(
            3,
            vec![unit_measurement(0, 1, 2), unit_measurement(1, 2, 2)],
        )
        .unwrap();
        let a = g.incidence_matrix().to_dense();
        let expected = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 1.0, -1.0, 0.0, 1.0]);
        assert_relative_eq!((a - expected).norm(), 0.0);
        let ar = g.reduced_incidence_matrix().to_dense();
        let expected_r = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
        assert_relative_eq!((ar - expected_r).norm(), 0.0);
    }

    #[test]
    fn incidence_columns_sum_to_zero_and_reduced_has_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..10 {
            let n = 4 + trial;
            let g = random_connected_graph(n, 2 * trial, 2, &mut rng);
            let a = g.incidence_matrix().to_dense();
            let ones = DVector::from_element(n, 1.0);
            assert_relative_eq!((a.transpose() * ones).norm(), 0.0);
            let ar = g.reduced_incidence_matrix().to_dense();
            assert_eq!(ar.rank(1e-9), n - 1);
        }
    }

    #[test]
    fn laplacian_single_edge() {
        let mut m = unit_measurement(0, 1, 2);
        m.tau = 2.0;
        let g = MeasurementGraph::new(2, vec![m]).unwrap();
        let l = g.weight_graph_laplacian(WeightKind::Translational).to_dense();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]);
        assert_relative_eq!((l - expected).norm(), 0.0);
    }

    #[test]
    fn laplacian_equals_weighted_incidence_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..10 {
            let g = random_connected_graph(5 + trial, trial, 3, &mut rng);
            for which in [WeightKind::Translational, WeightKind::Rotational] {
                let l = g.weight_graph_laplacian(which).to_dense();
                let a = g.incidence_matrix().to_dense();
                let w = DMatrix::from_diagonal(&DVector::from_vec(g.weights(which)));
                assert_relative_eq!((&l - &a * w * a.transpose()).norm(), 0.0, epsilon = 1e-12);
                // symmetric, zero row sums
                assert_relative_eq!((&l - l.transpose()).norm(), 0.0);
                let ones = DVector::from_element(g.num_vertices(), 1.0);
                assert_relative_eq!((&l * ones).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_psd_with_positive_fiedler_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let g = random_connected_graph(20, 15, 2, &mut rng);
        let l = g.weight_graph_laplacian(WeightKind::Rotational).to_dense();
        let eig = l.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(vals[0] >= -1e-10 * l.norm());
        assert!(vals[1] > 1e-8, "algebraic connectivity must be positive");
    }

    #[test]
    fn laplacians_are_orientation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = random_connected_graph(8, 5, 2, &mut rng);
        // flip every other edge
        let flipped: Vec<RelativePoseMeasurement> = g
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if i % 2 == 0 {
                    let p = Pose::new(e.translation.clone(), e.rotation.clone()).unwrap();
                    let inv = crate::pose::pose_inverse(&p);
                    RelativePoseMeasurement::new(e.head, e.tail, inv.t, inv.r, e.tau, e.kappa)
                        .unwrap()
                } else {
                    e.clone()
                }
            })
            .collect();
        let g2 = MeasurementGraph::new(g.num_vertices(), flipped).unwrap();
        for which in [WeightKind::Translational, WeightKind::Rotational] {
            let l1 = g.weight_graph_laplacian(which).to_dense();
            let l2 = g2.weight_graph_laplacian(which).to_dense();
            assert_relative_eq!((l1 - l2).norm(), 0.0);
        }
    }

    #[test]
    fn parallel_edges_accumulate() {
        let edges = vec![unit_measurement(0, 1, 2), unit_measurement(0, 1, 2)];
        let g = MeasurementGraph::new(2, edges).unwrap();
        let l = g.weight_graph_laplacian(WeightKind::Translational).to_dense();
        assert_relative_eq!(l[(0, 0)], 2.0);
        assert_relative_eq!(l[(0, 1)], -2.0);
    }
}
