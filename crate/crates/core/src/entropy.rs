//! Exact entropies of the noise-erasure process and of its auxiliary
//! erasure process. All values are in bits.
//!
//! The auxiliary process is in general a hidden Markov process. Its block
//! entropy is computed by walking every erasure history depth-first while
//! carrying the predictive belief `Pr(Z_i = . | history)`; each node
//! contributes `P(history) * h_b(Pr(next is erased | history))`.

use serde::Serialize;

use crate::error::{NecError, Result};
use crate::process::NoiseModel;

/// Longest auxiliary history the enumeration accepts (2^24 leaves).
pub const MAX_HISTORY_LEN: usize = 24;
/// Block length used for entropy-rate bounds when none is given.
pub const DEFAULT_HISTORY_LEN: usize = 16;

const PRUNE_BELOW: f64 = 1e-300;
const NORMALIZATION_TOL: f64 = 1e-10;

/// Shannon entropy of a probability vector, `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(NecError::InvalidProbability(
            "entropy of a vector with negative or non-finite entries".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(NecError::InvalidProbability(format!(
            "entropy of a vector summing to {total}"
        )));
    }
    Ok(entropy_unchecked(p))
}

#[inline]
pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    p.iter().map(|&v| plogp(v)).sum()
}

#[inline]
pub(crate) fn plogp(v: f64) -> f64 {
    if v > 0.0 {
        -v * v.log2()
    } else {
        0.0
    }
}

/// Binary entropy `h_b(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

/// `H(Z_2 | Z_1)` for a stationary Markov model.
pub fn markov_conditional_entropy(model: &NoiseModel) -> Result<f64> {
    if !model.is_markov() {
        return Err(NecError::NotMarkov);
    }
    Ok(conditional_entropy(model))
}

fn conditional_entropy(model: &NoiseModel) -> f64 {
    let k = model.alphabet().extended_len();
    (0..k)
        .map(|z| model.marginal()[z] * entropy_unchecked(model.transition_row(z)))
        .sum()
}

/// Entropy rate of the noise-erasure process.
pub fn entropy_rate_z(model: &NoiseModel) -> f64 {
    if model.is_markov() {
        conditional_entropy(model)
    } else {
        entropy_unchecked(model.marginal())
    }
}

/// `H(Z^n)` by the chain rule.
pub fn block_entropy_z(model: &NoiseModel, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let h1 = entropy_unchecked(model.marginal());
    if model.is_markov() {
        h1 + (n - 1) as f64 * conditional_entropy(model)
    } else {
        n as f64 * h1
    }
}

/// `H(Z_1 | Z~_1) = H(Z_1) - h_b(eps)`.
pub fn first_symbol_conditional_entropy(model: &NoiseModel) -> f64 {
    entropy_unchecked(model.marginal()) - binary_entropy(model.erasure_prob())
}

/// Per-step conditional entropies `H(Z~_i | Z~^{i-1})`, `i = 1..=len`, of
/// the auxiliary process when the predictive belief for the first symbol is
/// `initial`.
pub fn auxiliary_step_entropies(model: &NoiseModel, initial: &[f64], len: usize) -> Result<Vec<f64>> {
    if len > MAX_HISTORY_LEN {
        return Err(NecError::ResourceCap {
            what: "auxiliary history length",
            needed: len as u128,
            cap: MAX_HISTORY_LEN as u128,
        });
    }
    let k = model.alphabet().extended_len();
    if initial.len() != k {
        return Err(NecError::InvalidArgument(format!(
            "initial belief has length {}, expected {k}",
            initial.len()
        )));
    }
    let mut walker = HistoryWalker::new(model, len);
    if len > 0 {
        walker.descend(0, 1.0, initial);
    }
    Ok(walker.step_entropy)
}

struct HistoryWalker<'a> {
    model: &'a NoiseModel,
    k: usize,
    e: usize,
    len: usize,
    step_entropy: Vec<f64>,
    // scratch beliefs, one per depth
    scratch: Vec<Vec<f64>>,
}

impl<'a> HistoryWalker<'a> {
    fn new(model: &'a NoiseModel, len: usize) -> Self {
        let k = model.alphabet().extended_len();
        Self {
            model,
            k,
            e: model.alphabet().erasure(),
            len,
            step_entropy: vec![0.0; len],
            scratch: vec![vec![0.0; k]; len + 1],
        }
    }

    /// `belief` is `Pr(Z_{depth+1} = . | history of length depth)` and
    /// `prob` the probability of that history.
    fn descend(&mut self, depth: usize, prob: f64, belief: &[f64]) {
        let p_erased = belief[self.e];
        let p_data: f64 = (0..self.k).filter(|&z| z != self.e).map(|z| belief[z]).sum();
        self.step_entropy[depth] += prob * (plogp(p_erased) + plogp(p_data));
        if depth + 1 == self.len {
            return;
        }

        // Branch 0: condition on a data symbol, then predict.
        let joint = prob * p_data;
        if joint > PRUNE_BELOW && p_data > 0.0 {
            let mut next = std::mem::take(&mut self.scratch[depth + 1]);
            for (to, slot) in next.iter_mut().enumerate() {
                *slot = (0..self.k)
                    .filter(|&z| z != self.e)
                    .map(|z| belief[z] * self.model.transition(z, to))
                    .sum::<f64>()
                    / p_data;
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            self.descend(depth + 1, joint, &next);
            self.scratch[depth + 1] = next;
        }

        // Branch e: the current state is known to be e.
        let joint = prob * p_erased;
        if joint > PRUNE_BELOW && p_erased > 0.0 {
            let row = self.model.transition_row(self.e);
            self.descend(depth + 1, joint, row);
        }
    }
}

/// `H(Z~^l)` computed by the history recursion.
pub fn block_entropy_ztilde(model: &NoiseModel, l: usize) -> Result<f64> {
    Ok(auxiliary_step_entropies(model, model.marginal(), l)?.iter().sum())
}

/// `H(Z~^l)` from the two-step closed form; valid only when the auxiliary
/// process is Markov (see [`NoiseModel::auxiliary_is_markov`]).
pub fn block_entropy_ztilde_markov(model: &NoiseModel, l: usize) -> Result<f64> {
    if l == 0 {
        return Ok(0.0);
    }
    let steps = auxiliary_step_entropies(model, model.marginal(), 2)?;
    Ok(steps[0] + (l - 1) as f64 * steps.get(1).copied().unwrap_or(0.0))
}

/// `H(Z~_2 | Z~_1)`.
pub fn auxiliary_conditional_entropy(model: &NoiseModel) -> f64 {
    auxiliary_step_entropies(model, model.marginal(), 2).expect("length 2 is under the cap")[1]
}

/// Bounds on the auxiliary entropy rate from blocks of length `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBounds {
    pub l: usize,
    /// `H(Z~_l | Z~^{l-1}, Z_1)`, a diagnostic lower bound.
    pub lower: f64,
    /// `H(Z~^l) / l`.
    pub upper: f64,
    /// The exact rate `H(Z~_2 | Z~_1)` when the auxiliary process is Markov.
    pub exact: Option<f64>,
}

pub fn auxiliary_rate_bounds(model: &NoiseModel, l: usize) -> Result<RateBounds> {
    if l == 0 {
        return Err(NecError::InvalidArgument("block length must be at least 1".into()));
    }
    let steps = auxiliary_step_entropies(model, model.marginal(), l)?;
    let upper = steps.iter().sum::<f64>() / l as f64;
    let lower = if l == 1 {
        0.0
    } else {
        let k = model.alphabet().extended_len();
        let mut acc = 0.0;
        for z1 in 0..k {
            let w = model.marginal()[z1];
            if w > 0.0 {
                let tail = auxiliary_step_entropies(model, model.transition_row(z1), l - 1)?;
                acc += w * tail[l - 2];
            }
        }
        acc
    };
    let exact = model
        .auxiliary_is_markov()
        .then(|| auxiliary_conditional_entropy(model));
    Ok(RateBounds {
        l,
        lower,
        upper,
        exact,
    })
}

/// `H_n = (H(Z^n) - H(Z~^n)) / n` for `n = 1..=n_max`.
pub fn hn_sequence(model: &NoiseModel, n_max: usize) -> Result<Vec<f64>> {
    let steps = auxiliary_step_entropies(model, model.marginal(), n_max)?;
    let mut ztilde = 0.0;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, g)| {
            ztilde += g;
            let n = i + 1;
            (block_entropy_z(model, n) - ztilde) / n as f64
        })
        .collect())
}

/// `(I(Z_1; Z_2), I(Z~_1; Z~_2))` from the exact pair distributions.
pub fn adjacent_mutual_information(model: &NoiseModel) -> (f64, f64) {
    let h1 = entropy_unchecked(model.marginal());
    let i_z = 2.0 * h1 - block_entropy_z(model, 2);
    let hb = binary_entropy(model.erasure_prob());
    let steps = auxiliary_step_entropies(model, model.marginal(), 2).expect("under cap");
    let i_zt = 2.0 * hb - (steps[0] + steps[1]);
    (i_z, i_zt)
}

/// How much memory raises capacity over the memoryless counterpart channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryGain {
    /// Interval for `C - C_DMC = H(Z_1|Z~_1) - (rate(Z) - rate(Z~))`.
    pub gain_lower: f64,
    pub gain_upper: f64,
    /// Markov row-difference criterion guaranteeing a strictly positive gain.
    pub strict: bool,
}

pub fn memory_gain(model: &NoiseModel, l: usize) -> Result<MemoryGain> {
    let base = first_symbol_conditional_entropy(model) - entropy_rate_z(model);
    let (lo, hi) = if !model.is_markov() {
        let hb = binary_entropy(model.erasure_prob());
        (hb, hb)
    } else {
        let b = auxiliary_rate_bounds(model, l)?;
        match b.exact {
            Some(x) => (x, x),
            None => (b.lower, b.upper),
        }
    };
    Ok(MemoryGain {
        gain_lower: base + lo,
        gain_upper: base + hi,
        strict: model.is_markov() && rows_differ_on_data(model),
    })
}

fn rows_differ_on_data(model: &NoiseModel) -> bool {
    let q = model.q();
    let support: Vec<usize> = (0..q).filter(|&z| model.marginal()[z] > 0.0).collect();
    support.iter().enumerate().any(|(i, &a)| {
        support[i + 1..].iter().any(|&b| {
            (0..q).any(|z2| (model.transition(a, z2) - model.transition(b, z2)).abs() > 1e-12)
        })
    })
}

/// Block and rate entropies of one model at block length `n`, with rate
/// bounds for the auxiliary process at length `l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub n: usize,
    pub h_z_block: f64,
    pub h_ztilde_block: f64,
    pub h_n: f64,
    pub entropy_rate_z: f64,
    pub ztilde_rate_upper: f64,
    pub ztilde_rate_lower: f64,
    pub ztilde_rate_exact: Option<f64>,
}

pub fn entropy_report(model: &NoiseModel, n: usize, l: usize) -> Result<EntropyReport> {
    if n == 0 {
        return Err(NecError::InvalidArgument("block length must be at least 1".into()));
    }
    let h_z_block = block_entropy_z(model, n);
    let h_ztilde_block = block_entropy_ztilde(model, n)?;
    let bounds = auxiliary_rate_bounds(model, l)?;
    Ok(EntropyReport {
        n,
        h_z_block,
        h_ztilde_block,
        h_n: (h_z_block - h_ztilde_block) / n as f64,
        entropy_rate_z: entropy_rate_z(model),
        ztilde_rate_upper: bounds.upper,
        ztilde_rate_lower: bounds.lower,
        ztilde_rate_exact: bounds.exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use approx::assert_abs_diff_eq;

    // Frozen with an independent float evaluation of -sum p log2 p.
    const H_04_04_02: f64 = 1.521_928_094_887_362_3;
    const HB_02: f64 = 0.721_928_094_887_362_3;

    #[test]
    fn basic_entropies() {
        assert_abs_diff_eq!(entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_abs_diff_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy(&[0.4, 0.4, 0.2]).unwrap(), H_04_04_02, epsilon = 1e-14);
        assert!(entropy(&[0.5, 0.4]).is_err());
        assert!(entropy(&[1.5, -0.5]).is_err());
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.2), HB_02, epsilon = 1e-14);
    }

    #[test]
    fn conditional_entropy_cases() {
        assert_eq!(
            markov_conditional_entropy(&models::binary_memoryless_a()).unwrap_err(),
            NecError::NotMarkov
        );
        let flat = NoiseModel::markov_with_flag(
            2,
            &[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0]],
            true,
        )
        .unwrap();
        assert_abs_diff_eq!(markov_conditional_entropy(&flat).unwrap(), 1.0, epsilon = 1e-15);
        let cycle = NoiseModel::markov_with_flag(
            2,
            &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            false,
        )
        .unwrap();
        assert_eq!(markov_conditional_entropy(&cycle).unwrap(), 0.0);
        assert_eq!(entropy_rate_z(&cycle), 0.0);
    }

    #[test]
    fn memoryless_block_entropies() {
        let m = models::binary_memoryless_a();
        let h1 = entropy(&[0.5, 0.3, 0.2]).unwrap();
        assert_abs_diff_eq!(block_entropy_z(&m, 3), 3.0 * h1, epsilon = 1e-14);
        for l in 1..=10 {
            assert_abs_diff_eq!(
                block_entropy_ztilde(&m, l).unwrap(),
                l as f64 * binary_entropy(0.2),
                epsilon = 1e-12
            );
        }
        let hn = hn_sequence(&m, 6).unwrap();
        for h in hn {
            assert_abs_diff_eq!(h, first_symbol_conditional_entropy(&m), epsilon = 1e-12);
        }
    }

    #[test]
    fn first_auxiliary_symbol() {
        let pi1 = models::pi1();
        assert_abs_diff_eq!(
            block_entropy_ztilde(&pi1, 1).unwrap(),
            binary_entropy(2.0 / 11.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            block_entropy_ztilde(&models::pi1(), MAX_HISTORY_LEN + 1),
            Err(NecError::ResourceCap { .. })
        ));
    }

    #[test]
    fn memory_gain_cases() {
        let g = memory_gain(&models::binary_memoryless_a(), 8).unwrap();
        assert_abs_diff_eq!(g.gain_lower, 0.0, epsilon = 1e-12);
        assert!(!g.strict);
        let g = memory_gain(&models::pi1(), 8).unwrap();
        assert!(g.strict);
        assert!(g.gain_lower > 0.0);
        assert_abs_diff_eq!(g.gain_lower, g.gain_upper, epsilon = 1e-15);
        let g = memory_gain(&models::erasure_only(), 8).unwrap();
        assert_abs_diff_eq!(g.gain_lower, 0.0, epsilon = 1e-12);
        assert!(!g.strict);
    }

    #[test]
    fn rate_bounds_bracket() {
        let m = models::pi2();
        let b = auxiliary_rate_bounds(&m, 10).unwrap();
        assert!(b.exact.is_none());
        assert!(b.lower <= b.upper);
        let mut prev = f64::INFINITY;
        for l in 1..=12 {
            let u = auxiliary_rate_bounds(&m, l).unwrap().upper;
            assert!(u <= prev + 1e-12);
            prev = u;
        }
    }
}
