//! Capacity-cost curves traced in the Lagrangian (slope) parametrization.
//!
//! For a channel `W` and per-symbol input costs `c`, each slope `s` gives a
//! point `(E[c], I/n)` on the block capacity-cost curve. A requested cost
//! `beta` is hit by bracketing it between two slopes and refining until a
//! sample lands within `BETA_TOL` of it; the rate is read off the tangent
//! line at that sample. When the curve is linear around `beta` the slope
//! bracket collapses instead, and the chord between its ends is exact.

use serde::Serialize;

use crate::blahut::{self, BlahutOptions, BlahutResult, TransitionMatrix};
use crate::channel::ChannelFunction;
use crate::entropy;
use crate::error::{NecError, Result};
use crate::nfold::{self, Limits};
use crate::process::NoiseModel;

/// Largest distance between a requested `beta` and the sample used for it.
pub const BETA_TOL: f64 = 1e-7;
const MAX_SLOPE: f64 = 1e7;
const MAX_REFINE_STEPS: usize = 200;

/// Per-symbol input cost `b(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSpec {
    costs: Vec<f64>,
}

impl CostSpec {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.len() < 2 {
            return Err(NecError::InvalidAlphabet(costs.len()));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(NecError::InvalidArgument("costs must be finite".into()));
        }
        Ok(Self { costs })
    }

    /// `b(x) = x`.
    pub fn linear(q: usize) -> Result<Self> {
        Self::new((0..q).map(|x| x as f64).collect())
    }

    pub fn q(&self) -> usize {
        self.costs.len()
    }

    pub fn cost(&self, x: usize) -> f64 {
        self.costs[x]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn beta_min(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Average cost of the uniform input, `(q-1)/2` for linear costs.
    pub fn beta_max(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }

    /// Per-symbol cost `(1/n) sum_i b(x_i)` of every block, lexicographic.
    pub fn block_costs(&self, n: usize) -> Vec<f64> {
        let q = self.q();
        let mut d = vec![0; n];
        (0..q.pow(n as u32))
            .map(|x| {
                nfold::digits(x, q, n, &mut d);
                d.iter().map(|&s| self.costs[s]).sum::<f64>() / n as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// `C_n(beta)` without feedback.
    Nonfeedback,
    /// `C_n(beta) - rate(Z) + H(Z^n)/n`, an upper bound on `C(beta)`.
    Upper,
    /// Feedback lower bound under the fixed encoding rule.
    Lower,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Nonfeedback => "nonfeedback",
            BoundKind::Upper => "upper",
            BoundKind::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub beta: f64,
    /// Bits per channel use.
    pub rate: f64,
    /// `dR/dbeta` at this point (infinite at the cheapest-input corner).
    pub slope: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCurve {
    pub n: usize,
    pub kind: BoundKind,
    pub points: Vec<CurvePoint>,
    /// Constant added to the non-feedback curve (upper kind only).
    pub offset: Option<f64>,
}

impl BoundCurve {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    /// Checks monotonicity and concavity of the sampled rates within `slack`
    /// (points must be sorted by `beta`).
    pub fn is_concave_nondecreasing(&self, slack: f64) -> bool {
        let p = &self.points;
        let monotone = p.windows(2).all(|w| w[1].rate >= w[0].rate - slack);
        let concave = p.windows(3).all(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            if c.beta - a.beta <= 0.0 {
                return true;
            }
            let t = (b.beta - a.beta) / (c.beta - a.beta);
            b.rate >= a.rate + t * (c.rate - a.rate) - slack
        });
        monotone && concave
    }
}

/// One Lagrangian sample.
#[derive(Debug, Clone)]
struct Sample {
    slope: f64,
    beta: f64,
    rate: f64,
    converged: bool,
    iterations: usize,
}

/// Traces the capacity-cost curve of one channel and caches every slope it
/// evaluates.
pub struct CurveTracer<'a> {
    channel: &'a TransitionMatrix,
    cost: Vec<f64>,
    n: usize,
    options: BlahutOptions,
    samples: Vec<Sample>,
    corner: Option<(f64, f64, bool, usize)>,
}

impl<'a> CurveTracer<'a> {
    /// `cost` holds per-symbol costs of each input row; rates are block
    /// mutual informations divided by `n`.
    pub fn new(channel: &'a TransitionMatrix, cost: Vec<f64>, n: usize, options: BlahutOptions) -> Result<Self> {
        if cost.len() != channel.rows() {
            return Err(NecError::InvalidArgument("cost vector does not match channel".into()));
        }
        Ok(Self {
            channel,
            cost,
            n,
            options,
            samples: Vec::new(),
            corner: None,
        })
    }

    pub fn beta_min(&self) -> f64 {
        self.cost.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn evaluate(&mut self, slope: f64) -> Result<Sample> {
        if let Some(s) = self.samples.iter().find(|s| s.slope == slope) {
            return Ok(s.clone());
        }
        let r: BlahutResult = blahut::blahut_cost(self.channel, &self.cost, slope, None, &self.options)?;
        let sample = Sample {
            slope,
            beta: r.expected_cost,
            rate: r.mutual_information / self.n as f64,
            converged: r.converged,
            iterations: r.iterations,
        };
        let pos = self.samples.partition_point(|s| s.slope < slope);
        self.samples.insert(pos, sample.clone());
        Ok(sample)
    }

    /// Rate of the sub-channel made of the cheapest inputs.
    fn corner(&mut self) -> Result<(f64, f64, bool, usize)> {
        if let Some(c) = self.corner {
            return Ok(c);
        }
        let beta_min = self.beta_min();
        let rows: Vec<usize> = (0..self.cost.len())
            .filter(|&x| self.cost[x] <= beta_min + 1e-12)
            .collect();
        let sub = self.channel.select_rows(&rows);
        let r = blahut::capacity(&sub, None, &self.options)?;
        let c = (beta_min, r.mutual_information / self.n as f64, r.converged, r.iterations);
        self.corner = Some(c);
        Ok(c)
    }

    /// Unconstrained point (slope zero).
    pub fn unconstrained(&mut self) -> Result<CurvePoint> {
        let s = self.evaluate(0.0)?;
        Ok(CurvePoint {
            beta: s.beta,
            rate: s.rate,
            slope: 0.0,
            converged: s.converged,
            iterations: s.iterations,
        })
    }

    /// Curve value at `beta`.
    pub fn point(&mut self, beta: f64) -> Result<CurvePoint> {
        let beta_min = self.beta_min();
        if beta < beta_min - 1e-12 {
            return Err(NecError::InvalidArgument(format!(
                "beta = {beta} is below the cheapest input cost {beta_min}"
            )));
        }
        let top = self.evaluate(0.0)?;
        if beta >= top.beta - 1e-12 {
            return Ok(CurvePoint {
                beta,
                rate: top.rate,
                slope: 0.0,
                converged: top.converged,
                iterations: top.iterations,
            });
        }
        if beta <= beta_min + 1e-12 {
            let (_, rate, converged, iterations) = self.corner()?;
            return Ok(CurvePoint {
                beta,
                rate,
                slope: f64::INFINITY,
                converged,
                iterations,
            });
        }

        // lo: largest slope with cost >= beta; hi: smallest slope with cost <= beta.
        let mut lo = self
            .samples
            .iter()
            .rev()
            .find(|s| s.beta >= beta)
            .cloned()
            .expect("slope zero sample has cost above beta");
        let mut hi = self.samples.iter().find(|s| s.beta <= beta && s.slope > lo.slope).cloned();
        let mut iterations = lo.iterations;
        let mut converged = lo.converged;

        if hi.is_none() {
            let mut s = (2.0 * lo.slope).max(1.0);
            while s <= MAX_SLOPE {
                let cand = self.evaluate(s)?;
                iterations += cand.iterations;
                converged &= cand.converged;
                if cand.beta <= beta {
                    hi = Some(cand);
                    break;
                }
                lo = cand;
                s *= 2.0;
            }
        }

        // Upper end of the bracket: a sample, or the cheapest-input corner.
        let mut hi_point = match &hi {
            Some(h) => (h.slope, h.beta, h.rate),
            None => {
                let (b, r, c, it) = self.corner()?;
                converged &= c;
                iterations += it;
                (f64::INFINITY, b, r)
            }
        };

        // Illinois-modified false position on beta(s) - beta, which is
        // non-increasing in s. Stops once a sample lands within BETA_TOL.
        let mut best = if lo.beta - beta <= beta - hi_point.1 || hi.is_none() {
            lo.clone()
        } else {
            hi.clone().unwrap()
        };
        let (mut f_lo, mut f_hi) = (lo.beta - beta, hi_point.1 - beta);
        let mut last_side = 0i8;
        let mut steps = 0;
        while (best.beta - beta).abs() > BETA_TOL && steps < MAX_REFINE_STEPS {
            let mid = if hi_point.0.is_finite() {
                let width = hi_point.0 - lo.slope;
                if width <= 1e-13 * hi_point.0.max(1.0) {
                    break;
                }
                let guess = lo.slope + width * f_lo / (f_lo - f_hi);
                if guess > lo.slope + 1e-3 * width && guess < hi_point.0 - 1e-3 * width {
                    guess
                } else {
                    0.5 * (lo.slope + hi_point.0)
                }
            } else {
                let m = 2.0 * lo.slope.max(1.0);
                if m > MAX_SLOPE * 1e3 {
                    break;
                }
                m
            };
            let s = self.evaluate(mid)?;
            iterations += s.iterations;
            converged &= s.converged;
            if (s.beta - beta).abs() < (best.beta - beta).abs() {
                best = s.clone();
            }
            if s.beta >= beta {
                f_lo = s.beta - beta;
                if last_side == 1 {
                    f_hi *= 0.5;
                }
                last_side = 1;
                lo = s;
            } else {
                f_hi = s.beta - beta;
                if last_side == -1 {
                    f_lo *= 0.5;
                }
                last_side = -1;
                hi_point = (s.slope, s.beta, s.rate);
            }
            steps += 1;
        }

        let n = self.n as f64;
        let (rate, slope) = if (best.beta - beta).abs() <= BETA_TOL {
            // tangent line through the nearest sample
            (best.rate + best.slope / n * (beta - best.beta), best.slope / n)
        } else {
            // linear stretch of the curve: chord between the bracket ends
            let (hs, hb, hr) = hi_point;
            let rate = if lo.beta - hb > 0.0 {
                hr + (beta - hb) / (lo.beta - hb) * (lo.rate - hr)
            } else {
                lo.rate
            };
            let slope = if hs.is_finite() { 0.5 * (lo.slope + hs) } else { lo.slope };
            (rate, slope / n)
        };
        Ok(CurvePoint {
            beta,
            rate,
            slope,
            converged,
            iterations,
        })
    }

    pub fn trace(&mut self, grid: &[f64]) -> Result<Vec<CurvePoint>> {
        grid.iter().map(|&b| self.point(b)).collect()
    }
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn check_cost(cf: &ChannelFunction, cost: &CostSpec) -> Result<()> {
    if cost.q() != cf.q() {
        return Err(NecError::InvalidArgument(format!(
            "cost table has {} entries for q = {}",
            cost.q(),
            cf.q()
        )));
    }
    Ok(())
}

/// `C_n(beta)` on the grid.
pub fn curve_nonfeedback(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    cost: &CostSpec,
    grid: &[f64],
    limits: &Limits,
) -> Result<BoundCurve> {
    check_cost(cf, cost)?;
    let m = nfold::build_nfold(cf, model, n, limits)?;
    let mut tracer = CurveTracer::new(m.matrix(), cost.block_costs(n), n, BlahutOptions::default())?;
    Ok(BoundCurve {
        n,
        kind: BoundKind::Nonfeedback,
        points: tracer.trace(grid)?,
        offset: None,
    })
}

/// `Delta_n = H(Z^n)/n - rate(Z)`.
pub fn upper_bound_gap(model: &NoiseModel, n: usize) -> f64 {
    entropy::block_entropy_z(model, n) / n as f64 - entropy::entropy_rate_z(model)
}

/// Shifts a non-feedback curve by `Delta_n`.
pub fn upper_from_nonfeedback(model: &NoiseModel, nonfeedback: &BoundCurve) -> BoundCurve {
    let gap = upper_bound_gap(model, nonfeedback.n);
    BoundCurve {
        n: nonfeedback.n,
        kind: BoundKind::Upper,
        points: nonfeedback
            .points
            .iter()
            .map(|p| CurvePoint {
                rate: p.rate + gap,
                ..*p
            })
            .collect(),
        offset: Some(gap),
    }
}

/// `C_n^ub(beta) = C_n(beta) - rate(Z) + H(Z^n)/n` on the grid.
pub fn curve_upper(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    cost: &CostSpec,
    grid: &[f64],
    limits: &Limits,
) -> Result<BoundCurve> {
    let nf = curve_nonfeedback(cf, model, n, cost, grid, limits)?;
    Ok(upper_from_nonfeedback(model, &nf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cost_spec_basics() {
        let c = CostSpec::linear(2).unwrap();
        assert_eq!(c.beta_min(), 0.0);
        assert_eq!(c.beta_max(), 0.5);
        assert_eq!(c.block_costs(2), vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(CostSpec::linear(3).unwrap().beta_max(), 1.0);
        assert!(CostSpec::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = linear_grid(0.0, 0.5, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[49], 0.5);
    }

    #[test]
    fn noiseless_binary_curve_is_binary_entropy() {
        let id = TransitionMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut t = CurveTracer::new(&id, vec![0.0, 1.0], 1, BlahutOptions::default()).unwrap();
        for beta in [0.05, 0.1, 0.25, 0.4, 0.5, 0.7] {
            let p = t.point(beta).unwrap();
            let expected = entropy::binary_entropy(beta.min(0.5));
            assert_abs_diff_eq!(p.rate, expected, epsilon = 1e-8);
        }
        assert_eq!(t.point(0.0).unwrap().rate, 0.0);
        assert!(t.point(-0.1).is_err());
    }

    #[test]
    fn constraint_inactive_above_beta_max() {
        let cf = ChannelFunction::mod_add(2).unwrap();
        let model = models::pi1();
        let cost = CostSpec::linear(2).unwrap();
        let curve = curve_nonfeedback(&cf, &model, 2, &cost, &[0.5, 0.6], &Limits::default()).unwrap();
        let cn = nfold::cn_closed_form(&model, 2).unwrap();
        for p in &curve.points {
            assert_abs_diff_eq!(p.rate, cn, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_usable_input_has_zero_rate() {
        let cf = ChannelFunction::mod_add(2).unwrap();
        let curve = curve_nonfeedback(
            &cf,
            &models::pi1(),
            3,
            &CostSpec::linear(2).unwrap(),
            &[0.0],
            &Limits::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(curve.points[0].rate, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn upper_gap_cases() {
        assert_eq!(upper_bound_gap(&models::binary_memoryless_a(), 4), 0.0);
        let m = models::pi1();
        let h1 = entropy::entropy(m.marginal()).unwrap();
        let h = entropy::entropy_rate_z(&m);
        let mut prev = f64::INFINITY;
        for n in 1..=8 {
            let g = upper_bound_gap(&m, n);
            assert_abs_diff_eq!(g, (h1 - h) / n as f64, epsilon = 1e-14);
            assert!(g > 0.0 && g < prev);
            prev = g;
        }
    }
}
