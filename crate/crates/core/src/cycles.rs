//! Cycle-space construction of the translational projector, used as an
//! independent cross-check of the factorization-based evaluation in
//! [`crate::data`].
//!
//! The kernel of a connected graph's incidence matrix is its cycle space; a
//! fundamental cycle basis (one circuit per non-tree edge of a spanning tree)
//! spans it, which yields the projector onto the kernel directly as `Γ Γ†`.
//! For the weighted kernel `ker(A Ω^{1/2})` the columns of `Ω^{-1/2} Γ` span
//! the kernel instead, since `A Ω^{1/2} · Ω^{-1/2} Γ = A Γ = 0`; this weighted
//! form is an extension of the unweighted identity.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::graph::MeasurementGraph;
use crate::Result;

/// A fundamental cycle basis: `ν = m − n + 1` integer circuits, each a vector
/// in `{−1, 0, +1}^m` satisfying flow conservation at every vertex.
#[derive(Debug, Clone)]
pub struct CycleBasis {
    /// Sparse circuits as (edge index, ±1) pairs.
    pub circuits: Vec<Vec<(usize, i8)>>,
    pub num_edges: usize,
}

impl CycleBasis {
    pub fn count(&self) -> usize {
        self.circuits.len()
    }

    /// Dense `m × ν` cycle matrix Γ.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut gamma = DMatrix::zeros(self.num_edges, self.circuits.len());
        for (c, circuit) in self.circuits.iter().enumerate() {
            for &(e, sign) in circuit {
                gamma[(e, c)] = sign as f64;
            }
        }
        gamma
    }
}

/// Fundamental cycle basis of a spanning tree: each non-tree edge closes one
/// circuit with its tree path. `A · Γ = 0` holds exactly in integer
/// arithmetic.
pub fn fundamental_cycle_basis(g: &MeasurementGraph) -> CycleBasis {
    let n = g.num_vertices();
    let m = g.num_edges();

    // BFS spanning tree from vertex 0 over the underlying undirected graph.
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (neighbor, edge idx)
    for (e, meas) in g.edges().iter().enumerate() {
        adjacency[meas.tail].push((meas.head, e));
        adjacency[meas.head].push((meas.tail, e));
    }
    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut parent: Vec<usize> = (0..n).collect();
    let mut depth = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut tree_edge = vec![false; m];
    let mut queue = std::collections::VecDeque::from([0usize]);
    visited[0] = true;
    while let Some(v) = queue.pop_front() {
        for &(u, e) in &adjacency[v] {
            if !visited[u] {
                visited[u] = true;
                parent[u] = v;
                parent_edge[u] = Some(e);
                depth[u] = depth[v] + 1;
                tree_edge[e] = true;
                queue.push_back(u);
            }
        }
    }

    // Sign of traversing tree edge `e` away from vertex `from`: +1 when the
    // traversal runs tail → head.
    let step_sign = |e: usize, from: usize| -> i8 {
        if g.edges()[e].tail == from {
            1
        } else {
            -1
        }
    };

    let mut circuits = Vec::with_capacity(m.saturating_sub(n - 1));
    for (e, meas) in g.edges().iter().enumerate() {
        if tree_edge[e] {
            continue;
        }
        // Circuit: the chord itself plus the tree path head → tail.
        let mut coeffs: Vec<(usize, i8)> = vec![(e, 1)];
        let (mut a, mut b) = (meas.head, meas.tail); // climb both endpoints to their LCA
        let mut from_head: Vec<(usize, i8)> = Vec::new();
        let mut from_tail: Vec<(usize, i8)> = Vec::new();
        while depth[a] > depth[b] {
            let pe = parent_edge[a].expect("non-root has a parent edge");
            from_head.push((pe, step_sign(pe, a)));
            a = parent[a];
        }
        while depth[b] > depth[a] {
            let pe = parent_edge[b].expect("non-root has a parent edge");
            from_tail.push((pe, step_sign(pe, b)));
            b = parent[b];
        }
        while a != b {
            let pea = parent_edge[a].expect("non-root has a parent edge");
            from_head.push((pea, step_sign(pea, a)));
            a = parent[a];
            let peb = parent_edge[b].expect("non-root has a parent edge");
            from_tail.push((peb, step_sign(peb, b)));
            b = parent[b];
        }
        // head → LCA traverses forward; LCA → tail is the tail-side walk
        // reversed with flipped signs.
        coeffs.extend(from_head);
        coeffs.extend(from_tail.into_iter().map(|(pe, s)| (pe, -s)));
        circuits.push(coeffs);
    }

    CycleBasis {
        circuits,
        num_edges: m,
    }
}

/// Dense `m × m` projector onto `ker(A Ω^{1/2})` built from a fundamental
/// cycle basis: `Γ_w Γ_w†` with `Γ_w = Ω^{-1/2} Γ`.
///
/// With unit weights this is the cycle-space projector `Γ Γ†`. Guarded to
/// small graphs; this is an oracle, not a production path.
pub fn projector_via_cycles(g: &MeasurementGraph, weights: &[f64]) -> Result<DMatrix<f64>> {
    let m = g.num_edges();
    if m > 500 {
        return Err(Error::SizeGuard(format!(
            "projector_via_cycles is limited to m ≤ 500 edges, got {m}"
        )));
    }
    if weights.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {m} edges",
            weights.len()
        )));
    }
    let basis = fundamental_cycle_basis(g);
    if basis.count() == 0 {
        return Ok(DMatrix::zeros(m, m));
    }
    let mut gamma_w = basis.to_dense();
    for e in 0..m {
        let s = 1.0 / weights[e].sqrt();
        for c in 0..gamma_w.ncols() {
            gamma_w[(e, c)] *= s;
        }
    }
    // Γ_w has full column rank, so Γ_w† = (Γ_wᵀ Γ_w)⁻¹ Γ_wᵀ.
    let gram = gamma_w.transpose() * &gamma_w;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("cycle basis Gram matrix is singular".into()))?;
    Ok(&gamma_w * gram_inv * gamma_w.transpose())
}

/// Dense Moore-Penrose pseudoinverse of the incidence matrix via the reduced
/// incidence matrix:
/// `A† = A̲ᵀ (A̲ A̲ᵀ)⁻¹ [I_{n−1} − (1/n) 𝟙𝟙ᵀ, −(1/n) 𝟙]`.
pub fn incidence_pseudoinverse(g: &MeasurementGraph) -> Result<DMatrix<f64>> {
    let n = g.num_vertices();
    if n > 500 {
        return Err(Error::SizeGuard(format!(
            "incidence_pseudoinverse is limited to n ≤ 500 vertices, got {n}"
        )));
    }
    let reduced = g.reduced_incidence_matrix().to_dense();
    let gram = &reduced * reduced.transpose();
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("reduced incidence Gram matrix is singular".into()))?;
    let mut tail_block = DMatrix::zeros(n - 1, n);
    let inv_n = 1.0 / n as f64;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            tail_block[(i, j)] = if i == j { 1.0 - inv_n } else { -inv_n };
        }
        tail_block[(i, n - 1)] = -inv_n;
    }
    Ok(reduced.transpose() * gram_inv * tail_block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{random_connected_graph, unit_measurement};
    use crate::MeasurementGraph;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> MeasurementGraph {
        MeasurementGraph::new(
            3,
            vec![
                unit_measurement(0, 1, 2),
                unit_measurement(1, 2, 2),
                unit_measurement(2, 0, 2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn spanning_tree_has_empty_basis() {
        let g = MeasurementGraph::new(
            4,
            vec![
                unit_measurement(0, 1, 2),
                unit_measurement(1, 2, 2),
                unit_measurement(1, 3, 2),
            ],
        )
        .unwrap();
        let basis = fundamental_cycle_basis(&g);
        assert_eq!(basis.count(), 0);
        let pi = projector_via_cycles(&g, &[1.0; 3]).unwrap();
        assert_relative_eq!(pi.norm(), 0.0);
    }

    #[test]
    fn triangle_has_one_conserving_circuit() {
        let g = triangle();
        let basis = fundamental_cycle_basis(&g);
        assert_eq!(basis.count(), 1);
        let gamma = basis.to_dense();
        assert!(gamma.iter().all(|&v| v == 1.0 || v == -1.0));
        let a = g.incidence_matrix().to_dense();
        assert_relative_eq!((a * &gamma).norm(), 0.0);
    }

    #[test]
    fn circuits_lie_in_incidence_kernel_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..15 {
            let n = 4 + trial % 7;
            let g = random_connected_graph(n, 1 + trial, 2, &mut rng);
            let basis = fundamental_cycle_basis(&g);
            assert_eq!(basis.count(), g.num_edges() - n + 1);
            let gamma = basis.to_dense();
            let a = g.incidence_matrix().to_dense();
            let product = a * &gamma;
            assert!(product.iter().all(|&v| v == 0.0), "AΓ must vanish exactly");
            if basis.count() > 0 {
                assert_eq!(gamma.rank(1e-9), basis.count(), "circuits must be independent");
            }
        }
    }

    #[test]
    fn unweighted_projector_matches_pseudoinverse_formula() {
        let g = triangle();
        let pi_cycles = projector_via_cycles(&g, &[1.0; 3]).unwrap();
        // Π = I − A†A
        let a = g.incidence_matrix().to_dense();
        let a_pinv = incidence_pseudoinverse(&g).unwrap();
        let pi_formula = DMatrix::identity(3, 3) - a_pinv * a;
        assert_relative_eq!((pi_cycles - pi_formula).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn pseudoinverse_satisfies_moore_penrose_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..10 {
            let g = random_connected_graph(5 + trial, 2 + trial, 2, &mut rng);
            let a = g.incidence_matrix().to_dense();
            let ap = incidence_pseudoinverse(&g).unwrap();
            assert_relative_eq!((&a * &ap * &a - &a).norm(), 0.0, epsilon = 1e-9);
            assert_relative_eq!((&ap * &a * &ap - &ap).norm(), 0.0, epsilon = 1e-9);
            // agrees with the SVD pseudoinverse
            let svd_pinv = a.clone().pseudo_inverse(1e-12).unwrap();
            assert_relative_eq!((&ap - svd_pinv).norm(), 0.0, epsilon = 1e-9);
            // rows of A† are orthogonal to 𝟙 (A†𝟙 = 0)
            let ones = nalgebra::DVector::from_element(g.num_vertices(), 1.0);
            assert_relative_eq!((&ap * ones).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn weighted_projector_matches_dense_kernel_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..10 {
            let g = random_connected_graph(5 + trial, 3, 2, &mut rng);
            let m = g.num_edges();
            let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..3.0)).collect();
            let pi_cycles = projector_via_cycles(&g, &weights).unwrap();
            // dense I − (AΩ^{1/2})† (AΩ^{1/2})
            let a = g.incidence_matrix().to_dense();
            let mut aw = a.clone();
            for e in 0..m {
                let s = weights[e].sqrt();
                for r in 0..g.num_vertices() {
                    aw[(r, e)] *= s;
                }
            }
            let pinv = aw.clone().pseudo_inverse(1e-12).unwrap();
            let pi_dense = DMatrix::identity(m, m) - pinv * aw;
            assert_relative_eq!((pi_cycles - pi_dense).norm(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn weight_vector_length_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_connected_graph(10, 0, 2, &mut rng);
        assert!(projector_via_cycles(&g, &vec![1.0; 5]).is_err());
    }
}
