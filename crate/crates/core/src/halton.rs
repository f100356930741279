//! Halton low-discrepancy sequences.

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

/// First `n` points of the 2-D Halton sequence in bases (2, 3), skipping the origin.
pub fn halton_2d(n: usize) -> Vec<[f64; 2]> {
    (1..=n as u64)
        .map(|i| [radical_inverse(i, 2), radical_inverse(i, 3)])
        .collect()
}
