//! Exact n-fold transition matrices, their erasure-pattern partition, and
//! three independent routes to the block capacity `C_n`.
//!
//! Rows are input blocks `x^n` and columns output blocks `y^n`, both in
//! lexicographic order with the first symbol most significant; the output
//! symbol order is `(0, ..., q-1, e)`.

use serde::Serialize;

use crate::blahut::{self, BlahutOptions, TransitionMatrix};
use crate::channel::ChannelFunction;
use crate::entropy::{self, entropy_unchecked};
use crate::error::{NecError, Result};
use crate::process::{ErasurePattern, NoiseModel};

/// Resource caps for dense block computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest number of matrix entries (`q^n (q+1)^n`) that may be built.
    pub max_matrix_entries: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_matrix_entries: 50_000_000,
        }
    }
}

impl Limits {
    pub fn check_block(&self, q: usize, n: usize) -> Result<()> {
        let needed = (q as u128)
            .checked_pow(n as u32)
            .and_then(|r| ((q + 1) as u128).checked_pow(n as u32).and_then(|c| r.checked_mul(c)))
            .unwrap_or(u128::MAX);
        if n == 0 {
            return Err(NecError::InvalidArgument("block length must be at least 1".into()));
        }
        if needed > self.max_matrix_entries {
            return Err(NecError::ResourceCap {
                what: "n-fold matrix entries",
                needed,
                cap: self.max_matrix_entries,
            });
        }
        Ok(())
    }
}

/// Digits of `index` in base `base`, most significant first.
pub(crate) fn digits(mut index: usize, base: usize, n: usize, out: &mut [usize]) {
    for slot in out[..n].iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

pub(crate) fn index_of(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// Probabilities of every noise block of length `n`, lexicographic.
pub(crate) fn noise_block_probs(model: &NoiseModel, n: usize) -> Vec<f64> {
    let k = model.alphabet().extended_len();
    let mut probs = model.marginal().to_vec();
    for _ in 1..n {
        let mut next = Vec::with_capacity(probs.len() * k);
        for (idx, &p) in probs.iter().enumerate() {
            let last = idx % k;
            for z in 0..k {
                next.push(p * model.transition(last, z));
            }
        }
        probs = next;
    }
    probs
}

#[derive(Debug, Clone, PartialEq)]
pub struct NFoldMatrix {
    n: usize,
    q: usize,
    matrix: TransitionMatrix,
}

/// Builds `W^n(y^n | x^n)`; every `(x^n, y^n)` has exactly one noise
/// preimage, whose block probability is the entry.
pub fn build_nfold(cf: &ChannelFunction, model: &NoiseModel, n: usize, limits: &Limits) -> Result<NFoldMatrix> {
    let q = cf.q();
    if model.q() != q {
        return Err(NecError::InvalidArgument(format!(
            "channel has q = {q} but noise model has q = {}",
            model.q()
        )));
    }
    limits.check_block(q, n)?;
    let k = q + 1;
    let rows = q.pow(n as u32);
    let cols = k.pow(n as u32);
    let probs = noise_block_probs(model, n);
    let mut data = vec![0.0; rows * cols];
    let mut xd = vec![0; n];
    let mut zd = vec![0; n];
    let mut yd = vec![0; n];
    for x in 0..rows {
        digits(x, q, n, &mut xd);
        let row = &mut data[x * cols..(x + 1) * cols];
        for (z, &p) in probs.iter().enumerate() {
            digits(z, k, n, &mut zd);
            for i in 0..n {
                yd[i] = cf.theta_unchecked(xd[i], zd[i]);
            }
            row[index_of(&yd, k)] = p;
        }
    }
    Ok(NFoldMatrix {
        n,
        q,
        matrix: TransitionMatrix::from_raw(rows, cols, data),
    })
}

impl NFoldMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.matrix.get(x, y)
    }

    /// Overwrites one entry. Used for negative controls.
    pub fn set_entry(&mut self, x: usize, y: usize, value: f64) {
        self.matrix.set(x, y, value);
    }

    /// Label of a row or column index as a symbol string (`e` for erasure).
    pub fn label(&self, index: usize, output: bool) -> String {
        let base = if output { self.q + 1 } else { self.q };
        let mut d = vec![0; self.n];
        digits(index, base, self.n, &mut d);
        let sep = if self.q > 10 { "." } else { "" };
        d.iter()
            .map(|&s| if s == self.q { "e".to_string() } else { s.to_string() })
            .collect::<Vec<_>>()
            .join(sep)
    }
}

/// Groups output columns by erasure pattern, patterns ordered by mask.
/// Pattern `S` owns `q^{n-|S|}` columns.
pub fn partition_columns(n: usize, q: usize) -> Result<Vec<(ErasurePattern, Vec<usize>)>> {
    if n == 0 || n > 20 {
        return Err(NecError::InvalidArgument(format!("block length {n} outside 1..=20")));
    }
    let k = q + 1;
    let cols = k.pow(n as u32);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); 1 << n];
    let mut d = vec![0; n];
    for y in 0..cols {
        digits(y, k, n, &mut d);
        let mask = d
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == q)
            .fold(0usize, |m, (i, _)| m | (1 << i));
        groups[mask].push(y);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(mask, cols)| Ok((ErasurePattern::from_mask(n, mask as u64)?, cols)))
        .collect()
}

/// Tolerance of the permutation and column-sum checks.
pub const QUASI_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternCheck {
    pub erased_positions: Vec<usize>,
    pub columns: usize,
    /// Sorted entries of the expected row multiset.
    pub fingerprint: Vec<f64>,
    /// Row sum of the sub-matrix (identical for every row).
    pub row_mass: f64,
    pub common_column_sum: f64,
    pub max_row_deviation: f64,
    pub max_column_deviation: f64,
    pub rows_are_permutations: bool,
    pub column_sums_equal: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiSymmetryReport {
    pub n: usize,
    pub q: usize,
    pub patterns: Vec<PatternCheck>,
    pub pass: bool,
}

impl QuasiSymmetryReport {
    pub fn failed(&self) -> usize {
        self.patterns.iter().filter(|p| !p.pass).count()
    }
}

/// Checks that each erasure-pattern sub-matrix has rows that are
/// permutations of the pattern's noise-block probabilities, and column sums
/// all equal to `q^{|S|} P(Z~^n = z~(n, S))`.
pub fn check_quasi_symmetry(m: &NFoldMatrix, model: &NoiseModel) -> Result<QuasiSymmetryReport> {
    let (n, q) = (m.n, m.q);
    let alphabet = model.alphabet();
    let probs = noise_block_probs(model, n);
    let mut by_pattern: Vec<Vec<f64>> = vec![Vec::new(); 1 << n];
    let mut zd = vec![0; n];
    for (z, &p) in probs.iter().enumerate() {
        digits(z, q + 1, n, &mut zd);
        by_pattern[ErasurePattern::of_block(alphabet, &zd).mask() as usize].push(p);
    }

    let mut patterns = Vec::with_capacity(1 << n);
    let rows = m.matrix.rows();
    for (pattern, cols) in partition_columns(n, q)? {
        let mut expected = std::mem::take(&mut by_pattern[pattern.mask() as usize]);
        expected.sort_by(f64::total_cmp);

        let mut max_row_dev: f64 = 0.0;
        let mut buf = Vec::with_capacity(cols.len());
        for x in 0..rows {
            buf.clear();
            buf.extend(cols.iter().map(|&y| m.entry(x, y)));
            buf.sort_by(f64::total_cmp);
            let dev = buf
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_row_dev = max_row_dev.max(dev);
        }

        let target = (q as f64).powi(pattern.erased_count() as i32)
            * model.auxiliary_block_prob(&pattern.auxiliary_block(alphabet))?;
        let mut max_col_dev: f64 = 0.0;
        for &y in &cols {
            let s: f64 = (0..rows).map(|x| m.entry(x, y)).sum();
            max_col_dev = max_col_dev.max((s - target).abs());
        }

        let rows_ok = max_row_dev <= QUASI_SYMMETRY_TOL;
        let cols_ok = max_col_dev <= QUASI_SYMMETRY_TOL;
        patterns.push(PatternCheck {
            erased_positions: pattern.positions(),
            columns: cols.len(),
            row_mass: expected.iter().sum(),
            fingerprint: expected,
            common_column_sum: target,
            max_row_deviation: max_row_dev,
            max_column_deviation: max_col_dev,
            rows_are_permutations: rows_ok,
            column_sums_equal: cols_ok,
            pass: rows_ok && cols_ok,
        });
    }
    let pass = patterns.iter().all(|p| p.pass);
    Ok(QuasiSymmetryReport { n, q, patterns, pass })
}

/// `C_n` from the weakly-symmetric decomposition: each pattern contributes
/// its mass times `log2(#columns) - H(normalized row)`.
pub fn capacity_quasi_symmetric(m: &NFoldMatrix, model: &NoiseModel) -> Result<f64> {
    let report = check_quasi_symmetry(m, model)?;
    if !report.pass {
        return Err(NecError::NotQuasiSymmetric {
            failed: report.failed(),
            total: report.patterns.len(),
        });
    }
    let mut total = 0.0;
    for (_, cols) in partition_columns(m.n, m.q)? {
        let row: Vec<f64> = cols.iter().map(|&y| m.entry(0, y)).collect();
        let mass: f64 = row.iter().sum();
        if mass > 0.0 {
            let normalized: Vec<f64> = row.iter().map(|v| v / mass).collect();
            total += mass * ((cols.len() as f64).log2() - entropy_unchecked(&normalized));
        }
    }
    Ok(total / m.n as f64)
}

/// `(1 - eps) log2 q - (H(Z^n) - H(Z~^n)) / n`.
pub fn cn_closed_form(model: &NoiseModel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(NecError::InvalidArgument("block length must be at least 1".into()));
    }
    let q = model.q() as f64;
    let hz = entropy::block_entropy_z(model, n);
    let hzt = entropy::block_entropy_ztilde(model, n)?;
    Ok((1.0 - model.erasure_prob()) * q.log2() - (hz - hzt) / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCapacity {
    /// Achieved `I(X^n;Y^n) / n` in bits per use.
    pub capacity: f64,
    /// `max_x D(W_x || P_Y) / n`, an upper bound on the true value.
    pub certified_upper: f64,
    pub input: Vec<f64>,
    pub tv_from_uniform: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest certified gap (bits per use) the oracle accepts.
pub const ORACLE_MAX_GAP: f64 = 1e-7;

/// Generic maximization of `I(X^n;Y^n)/n` by Blahut-Arimoto, started from a
/// deterministic non-uniform input.
pub fn capacity_oracle_uniformity(m: &NFoldMatrix) -> Result<OracleCapacity> {
    let rows = m.matrix.rows();
    // Deterministic weights in [1, 1.5).
    let init: Vec<f64> = (0..rows)
        .map(|i| 1.0 + 0.5 * ((i * 7919 + 13) % rows) as f64 / rows as f64)
        .collect();
    let r = blahut::capacity(&m.matrix, Some(&init), &BlahutOptions::default())?;
    let n = m.n as f64;
    let gap = r.gap() / n;
    if gap > ORACLE_MAX_GAP {
        return Err(NecError::NoConvergence {
            iterations: r.iterations,
            gap,
        });
    }
    let uniform = vec![1.0 / rows as f64; rows];
    Ok(OracleCapacity {
        capacity: r.mutual_information / n,
        certified_upper: r.lagrangian_upper / n,
        tv_from_uniform: blahut::total_variation(&r.input, &uniform),
        iterations: r.iterations,
        converged: r.converged,
        input: r.input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use approx::assert_abs_diff_eq;

    fn mod2() -> ChannelFunction {
        ChannelFunction::mod_add(2).unwrap()
    }

    #[test]
    fn single_letter_rows() {
        let m = build_nfold(&mod2(), &models::pi1(), 1, &Limits::default()).unwrap();
        let pi = [67.0 / 143.0, 50.0 / 143.0, 26.0 / 143.0];
        for y in 0..3 {
            assert_abs_diff_eq!(m.entry(0, y), pi[y], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(m.entry(1, 0), pi[1], epsilon = 1e-14);
        assert_abs_diff_eq!(m.entry(1, 1), pi[0], epsilon = 1e-14);
        assert_abs_diff_eq!(m.entry(1, 2), pi[2], epsilon = 1e-14);
    }

    #[test]
    fn memoryless_double_erasure() {
        let model = models::binary_memoryless_a();
        let m = build_nfold(&mod2(), &model, 2, &Limits::default()).unwrap();
        // column (e, e) = 2 * 3 + 2 = 8
        assert_abs_diff_eq!(m.entry(0, 8), 0.04, epsilon = 1e-15);
        assert_eq!(m.label(8, true), "ee");
        assert_eq!(m.label(3, false), "11");
    }

    #[test]
    fn resource_cap() {
        let tight = Limits {
            max_matrix_entries: 100,
        };
        assert!(matches!(
            build_nfold(&mod2(), &models::pi1(), 3, &tight),
            Err(NecError::ResourceCap { .. })
        ));
        assert!(build_nfold(&mod2(), &models::pi1(), 2, &tight).is_ok());
    }

    #[test]
    fn partition_counts() {
        let p = partition_columns(1, 2).unwrap();
        assert_eq!(p[0].1, vec![0, 1]);
        assert_eq!(p[1].1, vec![2]);
        let mut counts: Vec<usize> = partition_columns(2, 2).unwrap().iter().map(|g| g.1.len()).collect();
        counts.sort_unstable();
        assert_eq!(counts, vec![1, 2, 2, 4]);
        for n in 1..=5 {
            for q in 2..=4 {
                let total: usize = partition_columns(n, q).unwrap().iter().map(|g| g.1.len()).sum();
                assert_eq!(total, (q + 1).pow(n as u32));
                for (s, cols) in partition_columns(n, q).unwrap() {
                    assert_eq!(cols.len(), q.pow((n - s.erased_count()) as u32));
                }
            }
        }
    }

    #[test]
    fn corrupted_entry_fails_its_pattern() {
        let model = models::pi1();
        let mut m = build_nfold(&mod2(), &model, 2, &Limits::default()).unwrap();
        // column (0, e) belongs to the pattern {2}
        let v = m.entry(1, 2);
        m.set_entry(1, 2, v + 1e-6);
        let r = check_quasi_symmetry(&m, &model).unwrap();
        assert!(!r.pass);
        let failed: Vec<_> = r.patterns.iter().filter(|p| !p.pass).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].erased_positions, vec![2]);
        assert!(!failed[0].rows_are_permutations);
        assert!(matches!(
            capacity_quasi_symmetric(&m, &model),
            Err(NecError::NotQuasiSymmetric { failed: 1, total: 4 })
        ));
    }

    #[test]
    fn all_erased_column_sum() {
        let model = models::pi2();
        let m = build_nfold(&mod2(), &model, 3, &Limits::default()).unwrap();
        let last = m.matrix().cols() - 1;
        let brute: f64 = (0..8).map(|x| m.entry(x, last)).sum();
        let aux = model.auxiliary_block_prob(&[2, 2, 2]).unwrap();
        assert_abs_diff_eq!(brute, 8.0 * aux, epsilon = 1e-15);
    }

    #[test]
    fn single_letter_capacity_memoryless() {
        let model = models::binary_memoryless_a();
        let m = build_nfold(&mod2(), &model, 1, &Limits::default()).unwrap();
        let c = capacity_quasi_symmetric(&m, &model).unwrap();
        let expected = 0.8 - entropy::first_symbol_conditional_entropy(&model);
        assert_abs_diff_eq!(c, expected, epsilon = 1e-14);
    }

    #[test]
    fn no_erasure_block_capacity() {
        let model = models::no_erasure();
        for n in 1..=4 {
            let m = build_nfold(&mod2(), &model, n, &Limits::default()).unwrap();
            let c = capacity_quasi_symmetric(&m, &model).unwrap();
            assert_abs_diff_eq!(
                c,
                1.0 - entropy::block_entropy_z(&model, n) / n as f64,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn erasure_only_capacity() {
        let model = models::erasure_only();
        for n in 1..=5 {
            assert_abs_diff_eq!(
                cn_closed_form(&model, n).unwrap(),
                1.0 - model.erasure_prob(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn oracle_on_small_cases() {
        let model = models::pi1();
        let m = build_nfold(&mod2(), &model, 1, &Limits::default()).unwrap();
        let o = capacity_oracle_uniformity(&m).unwrap();
        assert_abs_diff_eq!(o.capacity, capacity_quasi_symmetric(&m, &model).unwrap(), epsilon = 1e-6);
        assert!(o.certified_upper >= o.capacity);
    }
}
