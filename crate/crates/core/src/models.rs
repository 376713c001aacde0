//! Reference noise models for the bound comparisons, the validation suite and tests.
//!
//! State order is always `(0, ..., q-1, e)`.

use crate::process::NoiseModel;

pub fn pi1_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.4, 0.4, 0.2],
        vec![0.7, 0.1, 0.2],
        vec![0.2, 0.7, 0.1],
    ]
}

pub fn pi2_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.4, 0.4, 0.2],
        vec![0.7, 0.2, 0.1],
        vec![0.2, 0.7, 0.1],
    ]
}

pub fn pi3_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.45, 0.35, 0.2],
        vec![0.7, 0.2, 0.1],
        vec![0.2, 0.7, 0.1],
    ]
}

/// Binary Markov noise whose state-0 row is uniform on data symbols and whose
/// erasure column is constant.
pub fn pi1() -> NoiseModel {
    NoiseModel::markov(2, &pi1_rows()).expect("valid chain")
}

pub fn pi2() -> NoiseModel {
    NoiseModel::markov(2, &pi2_rows()).expect("valid chain")
}

pub fn pi3() -> NoiseModel {
    NoiseModel::markov(2, &pi3_rows()).expect("valid chain")
}

/// Memoryless binary noise with marginal `(0.5, 0.3, 0.2)`.
pub fn binary_memoryless_a() -> NoiseModel {
    NoiseModel::memoryless(2, vec![0.5, 0.3, 0.2]).expect("valid marginal")
}

/// Memoryless binary noise with marginal `(0.6, 0.25, 0.15)`.
pub fn binary_memoryless_b() -> NoiseModel {
    NoiseModel::memoryless(2, vec![0.6, 0.25, 0.15]).expect("valid marginal")
}

/// Ternary Markov noise with a non-constant erasure column.
pub fn ternary_markov() -> NoiseModel {
    NoiseModel::markov(
        3,
        &[
            vec![0.5, 0.2, 0.1, 0.2],
            vec![0.3, 0.4, 0.2, 0.1],
            vec![0.2, 0.2, 0.3, 0.3],
            vec![0.25, 0.25, 0.25, 0.25],
        ],
    )
    .expect("valid chain")
}

pub fn ternary_memoryless_a() -> NoiseModel {
    NoiseModel::memoryless(3, vec![0.4, 0.3, 0.2, 0.1]).expect("valid marginal")
}

pub fn ternary_memoryless_b() -> NoiseModel {
    NoiseModel::memoryless(3, vec![0.55, 0.2, 0.15, 0.1]).expect("valid marginal")
}

/// Pure burst-erasure process on `{0, e}`: symbol 1 is never visited, so the
/// channel only erases.
pub fn erasure_only() -> NoiseModel {
    NoiseModel::markov(
        2,
        &[
            vec![0.9, 0.0, 0.1],
            vec![0.9, 0.0, 0.1],
            vec![0.3, 0.0, 0.7],
        ],
    )
    .expect("valid chain")
}

/// Binary Markov noise without erasures; `e` is never visited.
pub fn no_erasure() -> NoiseModel {
    NoiseModel::markov(
        2,
        &[
            vec![0.9, 0.1, 0.0],
            vec![0.4, 0.6, 0.0],
            vec![0.5, 0.5, 0.0],
        ],
    )
    .expect("valid chain")
}
