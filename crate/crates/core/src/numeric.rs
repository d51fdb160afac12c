//! Deterministic floating-point reductions.
//!
//! Every aggregate in the crate is reduced in a fixed key order with
//! pairwise summation, so results do not depend on thread count.

const BLOCK: usize = 32;

/// Pairwise (cascade) summation. Error grows as O(log n) rather than O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of squares.
pub fn pairwise_sum_sq(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().map(|v| v * v).sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_sq(&values[..mid]) + pairwise_sum_sq(&values[mid..])
}

/// Pairwise sum of `a[i] * b[i]`.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= BLOCK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}
