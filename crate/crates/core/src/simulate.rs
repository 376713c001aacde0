//! Monte Carlo checks of the exact channel matrices.
//!
//! Every sample is an independent trajectory: a fresh message block drawn
//! uniformly and a fresh noise block started from the stationary marginal.

use rand::Rng;
use serde::Serialize;

use crate::blahut::TransitionMatrix;
use crate::channel::ChannelFunction;
use crate::curve::CostSpec;
use crate::error::{NecError, Result};
use crate::feedback;
use crate::nfold;
use crate::process::{NoiseModel, NoiseSampler};

/// Counts of `(input block, output block)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalChannel {
    pub rows: usize,
    pub cols: usize,
    pub samples: u64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    /// Largest `|p_hat - p| / sqrt(p (1 - p) / N_row)` over cells with `0 < p < 1`.
    pub max_z: f64,
    /// Number of cells whose exact probability is zero but were observed.
    pub impossible_hits: u64,
    pub cells: usize,
}

impl Agreement {
    pub fn within(&self, sigmas: f64) -> bool {
        self.impossible_hits == 0 && self.max_z <= sigmas
    }
}

impl EmpiricalChannel {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            samples: 0,
            counts: vec![0; rows * cols],
        }
    }

    pub fn row_total(&self, x: usize) -> u64 {
        self.counts[x * self.cols..(x + 1) * self.cols].iter().sum()
    }

    /// Cell-wise z-scores of the conditional frequencies against `exact`.
    pub fn compare(&self, exact: &TransitionMatrix) -> Result<Agreement> {
        self.compare_with(exact, 0.0)
    }

    /// As [`EmpiricalChannel::compare`], scoring only cells whose expected
    /// count `N_row p` is at least `min_expected`. Impossible cells are
    /// always checked.
    pub fn compare_with(&self, exact: &TransitionMatrix, min_expected: f64) -> Result<Agreement> {
        if exact.rows() != self.rows || exact.cols() != self.cols {
            return Err(NecError::InvalidArgument("matrix shapes differ".into()));
        }
        let mut max_z: f64 = 0.0;
        let mut impossible_hits = 0;
        let mut cells = 0;
        for x in 0..self.rows {
            let total = self.row_total(x);
            if total == 0 {
                continue;
            }
            for y in 0..self.cols {
                let c = self.counts[x * self.cols + y];
                let p = exact.get(x, y);
                if p <= 0.0 {
                    impossible_hits += c;
                    continue;
                }
                if p >= 1.0 || (total as f64) * p < min_expected {
                    continue;
                }
                cells += 1;
                let phat = c as f64 / total as f64;
                let sigma = (p * (1.0 - p) / total as f64).sqrt();
                max_z = max_z.max((phat - p).abs() / sigma);
            }
        }
        Ok(Agreement {
            max_z,
            impossible_hits,
            cells,
        })
    }
}

/// Samples the feedback channel under the fixed encoding rule (without
/// feedback when `s_tilde` is `None`, i.e. `x^n = v^n`).
pub fn simulate_channel(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    s_tilde: Option<usize>,
    samples: u64,
    seed: u64,
) -> Result<EmpiricalChannel> {
    let q = cf.q();
    nfold::Limits::default().check_block(q, n)?;
    if let Some(s) = s_tilde {
        cf.alphabet().check_input(s)?;
    }
    let k = q + 1;
    let mut emp = EmpiricalChannel::new(q.pow(n as u32), k.pow(n as u32));
    let mut sampler = NoiseSampler::new(model, seed);
    let (mut v, mut z, mut x, mut y) = (vec![0; n], Vec::with_capacity(n), vec![0; n], vec![0; n]);
    for _ in 0..samples {
        for slot in v.iter_mut() {
            *slot = sampler.rng().gen_range(0..q);
        }
        sampler.fill_block(&mut z, n);
        match s_tilde {
            Some(s) => feedback::trajectory(cf, s, &v, &z, &mut x, &mut y),
            None => {
                for i in 0..n {
                    y[i] = cf.theta_unchecked(v[i], z[i]);
                }
            }
        }
        let row = nfold::index_of(&v, q);
        let col = nfold::index_of(&y, k);
        emp.counts[row * emp.cols + col] += 1;
    }
    emp.samples = samples;
    Ok(emp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Trajectory average of the block cost `b(X^n)` when `V^n ~ message_dist`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_block_cost(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    s_tilde: usize,
    cost: &CostSpec,
    message_dist: &[f64],
    samples: u64,
    seed: u64,
) -> Result<CostEstimate> {
    let q = cf.q();
    if message_dist.len() != q.pow(n as u32) {
        return Err(NecError::InvalidArgument("message distribution has the wrong length".into()));
    }
    let picker = rand::distributions::WeightedIndex::new(message_dist.iter().copied())
        .map_err(|e| NecError::InvalidProbability(e.to_string()))?;
    let mut sampler = NoiseSampler::new(model, seed);
    let (mut v, mut z, mut x, mut y) = (vec![0; n], Vec::with_capacity(n), vec![0; n], vec![0; n]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let idx = rand::distributions::Distribution::sample(&picker, sampler.rng());
        nfold::digits(idx, q, n, &mut v);
        sampler.fill_block(&mut z, n);
        feedback::trajectory(cf, s_tilde, &v, &z, &mut x, &mut y);
        let b: f64 = x.iter().map(|&s| cost.cost(s)).sum();
        sum += b;
        sum_sq += b * b;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    Ok(CostEstimate {
        mean,
        std_error: (var / m).sqrt(),
    })
}

/// Fraction of erased symbols along one long stationary path.
pub fn path_erasure_rate(model: &NoiseModel, length: usize, seed: u64) -> f64 {
    let e = model.alphabet().erasure();
    let path = crate::process::sample_path(model, length, seed);
    path.iter().filter(|&&z| z == e).count() as f64 / length as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn simulation_is_reproducible() {
        let cf = ChannelFunction::mod_add(2).unwrap();
        let a = simulate_channel(&cf, &models::pi1(), 2, Some(0), 5_000, 11).unwrap();
        let b = simulate_channel(&cf, &models::pi1(), 2, Some(0), 5_000, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>(), 5_000);
    }

    #[test]
    fn impossible_cells_are_reported() {
        let cf = ChannelFunction::mod_add(2).unwrap();
        let model = models::erasure_only();
        let emp = simulate_channel(&cf, &model, 1, None, 2_000, 3).unwrap();
        let exact = nfold::build_nfold(&cf, &model, 1, &nfold::Limits::default()).unwrap();
        let agreement = emp.compare(exact.matrix()).unwrap();
        assert_eq!(agreement.impossible_hits, 0);
        // a matrix claiming y = 1 is impossible from x = 1 while it is the
        // only non-erased output must be rejected
        let mut wrong = exact.matrix().clone();
        wrong.set(1, 1, 0.0);
        assert!(emp.compare(&wrong).unwrap().impossible_hits > 0);
    }
}
