use std::cmp::Ordering;

use ndarray::{ArrayBase, Data, Dimension};

use super::Real;

/// Indices of the `k` largest entries, largest first. Ties go to the lower index.
pub fn top_k_indices<F: Real>(x: &[F], k: usize) -> Vec<usize> {
    assert!(
        k >= 1 && k <= x.len(),
        "top-k: k = {k} outside 1..={}",
        x.len()
    );
    let mut idx: Vec<usize> = (0..x.len()).collect();
    let by_value_desc = |a: &usize, b: &usize| {
        x[*b]
            .partial_cmp(&x[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < x.len() {
        idx.select_nth_unstable_by(k - 1, by_value_desc);
        idx.truncate(k);
    }
    idx.sort_by(by_value_desc);
    idx
}

/// Binary mask with exactly `k` ones at the `k` largest entries of `x`.
pub fn top_k_mask<F: Real>(x: &[F], k: usize) -> Vec<F> {
    let mut mask = vec![F::zero(); x.len()];
    for i in top_k_indices(x, k) {
        mask[i] = F::one();
    }
    mask
}

/// Mean of squared elementwise differences.
pub fn mse_slices<F: Real>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len(), "mse: length mismatch");
    assert!(!a.is_empty(), "mse: empty input");
    let sum = a
        .iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    sum / F::from_usize(a.len()).unwrap()
}

pub fn mse<F, S1, S2, D>(a: &ArrayBase<S1, D>, b: &ArrayBase<S2, D>) -> F
where
    F: Real,
    S1: Data<Elem = F>,
    S2: Data<Elem = F>,
    D: Dimension,
{
    assert_eq!(a.shape(), b.shape(), "mse: shape mismatch");
    assert!(!a.is_empty(), "mse: empty input");
    let sum = a
        .iter()
        .zip(b.iter())
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    sum / F::from_usize(a.len()).unwrap()
}
