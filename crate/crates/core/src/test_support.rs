//! Shared fixtures for unit tests: random connected graphs, random
//! measurements, and small helpers used by several test modules.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::graph::{MeasurementGraph, RelativePoseMeasurement};
use crate::pose::{pose_between, random_rotation, Pose};

pub(crate) fn unit_measurement(tail: usize, head: usize, d: usize) -> RelativePoseMeasurement {
    RelativePoseMeasurement::new(
        tail,
        head,
        DVector::zeros(d),
        DMatrix::identity(d, d),
        1.0,
        1.0,
    )
    .unwrap()
}

pub(crate) fn random_measurement(
    tail: usize,
    head: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> RelativePoseMeasurement {
    RelativePoseMeasurement::new(
        tail,
        head,
        DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
        random_rotation(d, rng),
        rng.random_range(0.5..4.0),
        rng.random_range(0.5..4.0),
    )
    .unwrap()
}

/// Random connected graph: a random spanning tree plus `extra_edges` chords.
pub(crate) fn random_connected_graph(
    n: usize,
    extra_edges: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> MeasurementGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push(random_measurement(u, v, d, rng));
    }
    let mut added = 0;
    while added < extra_edges {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push(random_measurement(i, j, d, rng));
            added += 1;
        }
    }
    MeasurementGraph::new(n, edges).unwrap()
}

/// Random ground-truth poses over `0..n`.
pub(crate) fn random_poses(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Pose> {
    (0..n)
        .map(|_| Pose {
            t: DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0)),
            r: random_rotation(d, rng),
        })
        .collect()
}

/// Graph whose measurements are the exact relative transforms of `truth`,
/// over a random spanning tree plus `extra_edges` chords: the noiseless case.
pub(crate) fn noiseless_graph_from_truth(
    truth: &[Pose],
    extra_edges: usize,
    tau: f64,
    kappa: f64,
    rng: &mut ChaCha8Rng,
) -> MeasurementGraph {
    let n = truth.len();
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let mut added = 0;
    while added < extra_edges {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            pairs.push((i, j));
            added += 1;
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let rel = pose_between(&truth[i], &truth[j]);
            RelativePoseMeasurement::new(i, j, rel.t, rel.r, tau, kappa).unwrap()
        })
        .collect();
    MeasurementGraph::new(n, edges).unwrap()
}
