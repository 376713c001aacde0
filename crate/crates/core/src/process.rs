//! Stationary noise-erasure processes and their auxiliary erasure projection.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::Alphabet;
use crate::error::{NecError, Result};

/// Tolerance on row sums of stochastic vectors and matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Tolerance on `pi * P - pi` for a supplied stationary distribution.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Entrywise tolerance of the structural checks on transition rows.
pub const STRUCTURE_TOL: f64 = 1e-12;

const RANK_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Memoryless,
    Markov,
}

/// A stationary noise-erasure process over `(0, ..., q-1, e)`.
///
/// Memoryless processes are stored with every transition row equal to the
/// marginal, so all block computations share one code path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseModel {
    alphabet: Alphabet,
    kind: NoiseKind,
    marginal: Vec<f64>,
    transition: Vec<f64>,
    ergodic: bool,
}

impl NoiseModel {
    pub fn memoryless(q: usize, marginal: Vec<f64>) -> Result<Self> {
        let alphabet = Alphabet::new(q)?;
        let k = alphabet.extended_len();
        check_distribution(&marginal, k, "marginal")?;
        let transition = marginal.iter().copied().cycle().take(k * k).collect();
        Ok(Self {
            alphabet,
            kind: NoiseKind::Memoryless,
            marginal,
            transition,
            ergodic: true,
        })
    }

    /// First-order Markov process started in its stationary distribution.
    /// Irreducibility and aperiodicity are checked on the states with
    /// positive stationary mass.
    pub fn markov(q: usize, transition: &[Vec<f64>]) -> Result<Self> {
        Self::markov_with_flag(q, transition, true)
    }

    /// As [`NoiseModel::markov`]; the ergodicity check only runs when
    /// `ergodic` is set.
    pub fn markov_with_flag(q: usize, transition: &[Vec<f64>], ergodic: bool) -> Result<Self> {
        let alphabet = Alphabet::new(q)?;
        let k = alphabet.extended_len();
        if transition.len() != k {
            return Err(NecError::InvalidProbability(format!(
                "transition matrix has {} rows, expected {k}",
                transition.len()
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            check_distribution(row, k, &format!("transition row {i}"))?;
        }
        let marginal = stationary_distribution(transition)?;
        let flat: Vec<f64> = transition.iter().flatten().copied().collect();
        if ergodic {
            check_ergodic_on_support(&flat, &marginal, k)?;
        }
        Ok(Self {
            alphabet,
            kind: NoiseKind::Markov,
            marginal,
            transition: flat,
            ergodic,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn q(&self) -> usize {
        self.alphabet.q()
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn is_markov(&self) -> bool {
        self.kind == NoiseKind::Markov
    }

    pub fn is_ergodic_asserted(&self) -> bool {
        self.ergodic
    }

    /// Stationary marginal over `(0, ..., q-1, e)`.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    /// `P(Z_{i+1} = to | Z_i = from)`.
    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.alphabet.extended_len() + to]
    }

    pub fn transition_row(&self, from: usize) -> &[f64] {
        let k = self.alphabet.extended_len();
        &self.transition[from * k..(from + 1) * k]
    }

    pub fn transition_rows(&self) -> Vec<Vec<f64>> {
        let k = self.alphabet.extended_len();
        self.transition.chunks(k).map(|r| r.to_vec()).collect()
    }

    /// Erasure probability `P(Z = e)`.
    pub fn erasure_prob(&self) -> f64 {
        self.marginal[self.alphabet.erasure()]
    }

    /// Memoryless process with the same marginal.
    pub fn memoryless_counterpart(&self) -> Self {
        Self::memoryless(self.q(), self.marginal.clone())
            .expect("marginal of a valid model is a valid distribution")
    }

    /// States carrying positive stationary mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.alphabet.extended_len())
            .filter(|&z| self.marginal[z] > SUPPORT_TOL)
            .collect()
    }

    /// Probability of a noise block.
    pub fn block_prob(&self, block: &[usize]) -> Result<f64> {
        for &z in block {
            self.alphabet.check_extended(z)?;
        }
        Ok(self.block_prob_unchecked(block))
    }

    pub(crate) fn block_prob_unchecked(&self, block: &[usize]) -> f64 {
        let Some((&first, rest)) = block.split_first() else {
            return 1.0;
        };
        let mut p = self.marginal[first];
        let mut prev = first;
        for &z in rest {
            if p == 0.0 {
                return 0.0;
            }
            p *= self.transition(prev, z);
            prev = z;
        }
        p
    }

    /// Probability of an auxiliary block (entries `0` or `e`), summed over
    /// all noise blocks projecting onto it by a forward pass over the
    /// `(q+1)`-state chain.
    pub fn auxiliary_block_prob(&self, aux: &[usize]) -> Result<f64> {
        let e = self.alphabet.erasure();
        for &s in aux {
            if s != 0 && s != e {
                return Err(NecError::InvalidSymbol { symbol: s, q: self.q() });
            }
        }
        let k = self.alphabet.extended_len();
        let consistent = |z: usize, s: usize| (z == e) == (s == e);
        let Some((&first, rest)) = aux.split_first() else {
            return Ok(1.0);
        };
        let mut alpha: Vec<f64> = (0..k)
            .map(|z| if consistent(z, first) { self.marginal[z] } else { 0.0 })
            .collect();
        let mut next = vec![0.0; k];
        for &s in rest {
            for (to, slot) in next.iter_mut().enumerate() {
                *slot = if consistent(to, s) {
                    (0..k).map(|from| alpha[from] * self.transition(from, to)).sum()
                } else {
                    0.0
                };
            }
            std::mem::swap(&mut alpha, &mut next);
        }
        Ok(alpha.iter().sum())
    }

    /// True when the erasure column is the same for every non-erasure state
    /// of positive mass; the auxiliary process is then itself Markov.
    pub fn auxiliary_is_markov(&self) -> bool {
        let e = self.alphabet.erasure();
        let data_support: Vec<usize> = self.support().into_iter().filter(|&z| z != e).collect();
        match data_support.split_first() {
            None => true,
            Some((&z0, rest)) => {
                let eps = self.transition(z0, e);
                rest.iter()
                    .all(|&z| (self.transition(z, e) - eps).abs() <= STRUCTURE_TOL)
            }
        }
    }

    /// Checks the structure under which the fixed feedback rule provably
    /// lowers the cost of reaching capacity: row `s_tilde` is uniform over
    /// data symbols with erasure probability `eps'`, and every data row
    /// has erasure probability `eps'`.
    pub fn check_feedback_gain_conditions(&self, s_tilde: usize) -> Result<FeedbackConditionReport> {
        if !self.is_markov() {
            return Err(NecError::NotMarkov);
        }
        self.alphabet.check_input(s_tilde)?;
        let q = self.q();
        let e = self.alphabet.erasure();
        let eps_prime = self.transition(s_tilde, e);
        let uniform = (1.0 - eps_prime) / q as f64;
        let mut violations = Vec::new();
        for z in 0..q {
            let p = self.transition(s_tilde, z);
            if (p - uniform).abs() > STRUCTURE_TOL {
                violations.push(format!(
                    "row {s_tilde} entry {z} is {p}, expected (1 - {eps_prime})/{q} = {uniform}"
                ));
            }
        }
        for z in 0..q {
            let p = self.transition(z, e);
            if (p - eps_prime).abs() > STRUCTURE_TOL {
                violations.push(format!(
                    "erasure column entry for row {z} is {p}, expected {eps_prime}"
                ));
            }
        }
        let holds = violations.is_empty();
        Ok(FeedbackConditionReport {
            s_tilde,
            holds,
            eps_prime: holds.then_some(eps_prime),
            violations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackConditionReport {
    pub s_tilde: usize,
    pub holds: bool,
    pub eps_prime: Option<f64>,
    pub violations: Vec<String>,
}

/// Position-wise projection: `e` stays `e`, every data symbol becomes `0`.
pub fn auxiliary_block(alphabet: Alphabet, block: &[usize]) -> Vec<usize> {
    let e = alphabet.erasure();
    block.iter().map(|&z| if z == e { e } else { 0 }).collect()
}

/// Set of erased positions within a block of length `n`.
///
/// Positions are 1-based in the public API; internally the pattern is a
/// bit mask with bit `i - 1` set for an erased position `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ErasurePattern {
    n: usize,
    mask: u64,
}

impl ErasurePattern {
    pub fn from_mask(n: usize, mask: u64) -> Result<Self> {
        if n == 0 || n > 63 || mask >> n != 0 {
            return Err(NecError::InvalidArgument(format!(
                "mask {mask:#b} does not fit a block of length {n}"
            )));
        }
        Ok(Self { n, mask })
    }

    pub fn from_positions(n: usize, positions: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &i in positions {
            if i == 0 || i > n {
                return Err(NecError::InvalidArgument(format!(
                    "position {i} outside 1..={n}"
                )));
            }
            let bit = 1u64 << (i - 1);
            if mask & bit != 0 {
                return Err(NecError::InvalidArgument(format!("duplicate position {i}")));
            }
            mask |= bit;
        }
        Self::from_mask(n, mask)
    }

    /// Pattern of the erasures in a block over the extended alphabet.
    pub fn of_block(alphabet: Alphabet, block: &[usize]) -> Self {
        let e = alphabet.erasure();
        let mask = block
            .iter()
            .enumerate()
            .filter(|(_, &z)| z == e)
            .fold(0u64, |m, (i, _)| m | (1 << i));
        Self { n: block.len(), mask }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn positions(&self) -> Vec<usize> {
        (1..=self.n).filter(|&i| self.is_erased(i)).collect()
    }

    pub fn is_erased(&self, position: usize) -> bool {
        self.mask >> (position - 1) & 1 == 1
    }

    pub fn erased_count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// The auxiliary block `z~(n, S)`.
    pub fn auxiliary_block(&self, alphabet: Alphabet) -> Vec<usize> {
        (1..=self.n)
            .map(|i| if self.is_erased(i) { alphabet.erasure() } else { 0 })
            .collect()
    }
}

/// Draws noise blocks from a model with a locally owned, seeded generator.
pub struct NoiseSampler<'a> {
    model: &'a NoiseModel,
    rng: ChaCha8Rng,
    initial: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl<'a> NoiseSampler<'a> {
    pub fn new(model: &'a NoiseModel, seed: u64) -> Self {
        let k = model.alphabet.extended_len();
        let initial = WeightedIndex::new(model.marginal.iter().copied())
            .expect("marginal has positive total mass");
        let rows = (0..k)
            .map(|z| {
                WeightedIndex::new(model.transition_row(z).iter().copied())
                    .expect("transition rows have positive total mass")
            })
            .collect();
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            initial,
            rows,
        }
    }

    pub fn model(&self) -> &NoiseModel {
        self.model
    }

    /// A fresh block of length `n` started from the stationary marginal.
    pub fn block(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        self.fill_block(&mut out, n);
        out
    }

    pub fn fill_block(&mut self, out: &mut Vec<usize>, n: usize) {
        out.clear();
        if n == 0 {
            return;
        }
        let mut z = self.initial.sample(&mut self.rng);
        out.push(z);
        for _ in 1..n {
            z = self.rows[z].sample(&mut self.rng);
            out.push(z);
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Single stationary path of length `n`, reproducible from `seed`.
pub fn sample_path(model: &NoiseModel, n: usize, seed: u64) -> Vec<usize> {
    NoiseSampler::new(model, seed).block(n)
}

/// Unique stationary distribution of a row-stochastic matrix.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = transition.len();
    if k == 0 {
        return Err(NecError::InvalidProbability("empty transition matrix".into()));
    }
    for (i, row) in transition.iter().enumerate() {
        check_distribution(row, k, &format!("transition row {i}"))?;
    }
    // (P^T - I) pi = 0
    let a = DMatrix::from_fn(k, k, |i, j| transition[j][i] - if i == j { 1.0 } else { 0.0 });
    let sv = a.clone().svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&s| s > RANK_TOL).count();
    if rank + 1 != k {
        return Err(NecError::DegenerateChain(format!(
            "stationary distribution is not unique (rank of P^T - I is {rank}, need {})",
            k - 1
        )));
    }
    let mut system = DMatrix::zeros(k + 1, k);
    system.view_mut((0, 0), (k, k)).copy_from(&a);
    system.row_mut(k).fill(1.0);
    let mut rhs = nalgebra::DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let svd = system.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| NecError::DegenerateChain(e.to_string()))?;

    let mut pi: Vec<f64> = sol.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);

    // One multiplication by P polishes the residual left by the solve.
    let polished: Vec<f64> = (0..k).map(|j| (0..k).map(|i| pi[i] * transition[i][j]).sum()).collect();
    let total: f64 = polished.iter().sum();
    let pi: Vec<f64> = polished.iter().map(|v| v / total).collect();

    let residual = (0..k)
        .map(|j| ((0..k).map(|i| pi[i] * transition[i][j]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > STOCHASTIC_TOL {
        return Err(NecError::DegenerateChain(format!(
            "stationary residual {residual:e} exceeds {STOCHASTIC_TOL:e}"
        )));
    }
    Ok(pi)
}

fn check_distribution(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(NecError::InvalidProbability(format!(
            "{what} has length {}, expected {len}",
            p.len()
        )));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(NecError::InvalidProbability(format!("{what} has entry {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(NecError::InvalidProbability(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Irreducible and aperiodic on the positive-mass states.
fn check_ergodic_on_support(flat: &[f64], pi: &[f64], k: usize) -> Result<()> {
    let support: Vec<usize> = (0..k).filter(|&z| pi[z] > SUPPORT_TOL).collect();
    let m = support.len();
    let edge = |a: usize, b: usize| flat[support[a] * k + support[b]] > 0.0;

    // BFS levels from the first support state.
    let mut level = vec![usize::MAX; m];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            if edge(u, v) && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if level.contains(&usize::MAX) {
        return Err(NecError::DegenerateChain(
            "chain is not irreducible on its support".into(),
        ));
    }
    // Period = gcd over edges of level(u) + 1 - level(v).
    let mut period = 0usize;
    for u in 0..m {
        for v in 0..m {
            if edge(u, v) {
                let d = (level[u] + 1).abs_diff(level[v]);
                period = gcd(period, d);
            }
        }
    }
    if period != 1 {
        return Err(NecError::DegenerateChain(format!(
            "chain has period {period} on its support"
        )));
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
