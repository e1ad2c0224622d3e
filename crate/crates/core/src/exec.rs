//! Column-parallel execution of the hot kernels.
//!
//! Every data-parallel loop in this crate runs through [`for_each_column`] so
//! the `parallel` feature is the single switch between the rayon and the
//! sequential code paths. Each column of the column-major output buffer is
//! computed independently and written exactly once, with a fixed summation
//! order inside the column, so results are bit-identical across thread counts
//! and across the two code paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Columns handled per work item; keeps rayon task granularity coarse enough
/// that small matrices do not drown in scheduling overhead.
const COLUMN_CHUNK: usize = 64;

/// Applies `f(j, col_j)` to every `col_len`-sized column of `out`.
pub(crate) fn for_each_column<F>(out: &mut [f64], col_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(out.len() % col_len.max(1), 0);

    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(col_len * COLUMN_CHUNK)
            .enumerate()
            .for_each(|(chunk_idx, chunk)| {
                for (i, col) in chunk.chunks_mut(col_len).enumerate() {
                    f(chunk_idx * COLUMN_CHUNK + i, col);
                }
            });
    }

    #[cfg(not(feature = "parallel"))]
    {
        for (j, col) in out.chunks_mut(col_len).enumerate() {
            f(j, col);
        }
    }
}

/// Sequential reference implementation of [`for_each_column`]; used by the
/// benchmark suite to compare the rayon path against plain loops within a
/// single binary.
#[doc(hidden)]
pub fn for_each_column_seq<F>(out: &mut [f64], col_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    for (j, col) in out.chunks_mut(col_len).enumerate() {
        f(j, col);
    }
}

/// Maps `f` over items, collecting results in input order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
