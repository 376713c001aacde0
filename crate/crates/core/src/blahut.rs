//! Blahut-Arimoto iteration for the capacity-cost Lagrangian
//! `max_p I(p) - s * E_p[c]`.
//!
//! Every iteration produces the usual pair of bounds on the Lagrangian
//! optimum: `log2 sum_x p(x) 2^{D(x) - s c(x)}` from below and
//! `max_x (D(x) - s c(x))` from above, where `D(x)` is the divergence of
//! row `x` from the current output distribution. The run stops once the
//! two agree to the configured relative tolerance.
//!
//! The default options add a squared extrapolation step and, after a short
//! burn-in, Newton steps on the active inputs. Both are safeguarded by the
//! objective, and the stopping rule is the same certificate either way.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{NecError, Result};
use crate::process::STOCHASTIC_TOL;

/// Dense row-stochastic matrix `W[x][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(NecError::InvalidArgument(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        let m = Self { rows, cols, data };
        for x in 0..rows {
            let row = m.row(x);
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(NecError::InvalidProbability(format!("row {x} has a bad entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(NecError::InvalidProbability(format!("row {x} sums to {s}")));
            }
        }
        Ok(m)
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.cols + y]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[x * self.cols + y] = v;
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.cols..(x + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Keeps only the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let data = rows.iter().flat_map(|&x| self.row(x).iter().copied()).collect();
        Self::from_raw(rows.len(), self.cols, data)
    }

    /// Output distribution `sum_x p(x) W[x][.]`.
    pub fn output_distribution(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (x, &p) in input.iter().enumerate() {
            if p > 0.0 {
                for (o, &w) in out.iter_mut().zip(self.row(x)) {
                    *o += p * w;
                }
            }
        }
        out
    }

    /// `I(X;Y)` in bits for the given input distribution.
    pub fn mutual_information(&self, input: &[f64]) -> f64 {
        let out = self.output_distribution(input);
        input
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(x, &p)| {
                p * self
                    .row(x)
                    .iter()
                    .zip(&out)
                    .filter(|(&w, _)| w > 0.0)
                    .map(|(&w, &o)| w * (w / o).log2())
                    .sum::<f64>()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlahutOptions {
    /// Relative tolerance on `upper - achieved`.
    pub tolerance: f64,
    /// Cap on the number of objective evaluations.
    pub max_iterations: usize,
    /// Extrapolation and Newton steps on top of the multiplicative update.
    pub accelerate: bool,
}

impl Default for BlahutOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            accelerate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlahutResult {
    pub slope: f64,
    pub input: Vec<f64>,
    /// `I(X;Y)` in bits under `input`.
    pub mutual_information: f64,
    /// `E[c(X)]` under `input`.
    pub expected_cost: f64,
    /// Certified upper bound on `max_p I(p) - s E_p[c]`.
    pub lagrangian_upper: f64,
    /// `I - s E[c]` achieved by `input`.
    pub lagrangian_achieved: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BlahutResult {
    /// Duality gap certificate `upper - achieved`.
    pub fn gap(&self) -> f64 {
        self.lagrangian_upper - self.lagrangian_achieved
    }
}

/// Runs the cost-penalized iteration from `init` (uniform when `None`).
///
/// Columns that no row can reach are dropped up front. Non-convergence is
/// not an error: the last iterate is returned with `converged = false`.
pub fn blahut_cost(
    w: &TransitionMatrix,
    cost: &[f64],
    slope: f64,
    init: Option<&[f64]>,
    options: &BlahutOptions,
) -> Result<BlahutResult> {
    let rows = w.rows();
    if cost.len() != rows {
        return Err(NecError::InvalidArgument(format!(
            "cost vector has {} entries for {rows} inputs",
            cost.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) || !slope.is_finite() || slope < 0.0 {
        return Err(NecError::InvalidArgument("costs and slope must be finite, slope >= 0".into()));
    }
    let mut p: Vec<f64> = match init {
        Some(p0) => {
            if p0.len() != rows || p0.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(NecError::InvalidArgument("bad initial distribution".into()));
            }
            let mut p = p0.to_vec();
            flush_and_normalize(&mut p);
            p
        }
        None => vec![1.0 / rows as f64; rows],
    };

    let compact = Compact::new(w);
    let mut work = Workspace::new(rows, compact.cols);
    let done = |e: &Eval| e.upper - e.achieved <= options.tolerance * e.upper.abs().max(1.0);

    let mut iterations = 0;
    let mut converged = false;
    let mut step_max = 4.0;
    let mut next_polish = if options.accelerate { POLISH_AFTER } else { usize::MAX };
    'outer: loop {
        if iterations >= next_polish {
            next_polish = iterations + POLISH_EVERY;
            if compact.newton_polish(&mut p, slope, cost, &mut work, &mut iterations, options.max_iterations, &done) {
                converged = true;
                break;
            }
        }
        let e0 = compact.eval(&p, slope, cost, &mut work);
        if done(&e0) {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        iterations += 1;
        let p1 = update(&p, &work.score, &e0);
        if !options.accelerate {
            p = p1;
            continue;
        }

        let e1 = compact.eval(&p1, slope, cost, &mut work);
        if done(&e1) || iterations >= options.max_iterations {
            converged = done(&e1);
            p = p1;
            break;
        }
        iterations += 1;
        let p2 = update(&p1, &work.score, &e1);

        // Extrapolate log p along the last two steps.
        let (mut rr, mut vv) = (0.0, 0.0);
        for i in 0..rows {
            if p[i] > 0.0 && p1[i] > 0.0 && p2[i] > 0.0 {
                let (l0, l1, l2) = (p[i].log2(), p1[i].log2(), p2[i].log2());
                rr += (l1 - l0) * (l1 - l0);
                vv += (l2 - 2.0 * l1 + l0) * (l2 - 2.0 * l1 + l0);
            }
        }
        if vv <= 0.0 || !rr.is_finite() || !vv.is_finite() {
            p = p2;
            continue;
        }
        let alpha = -(rr / vv).sqrt().clamp(1.0, step_max);
        let mut logs: Vec<f64> = (0..rows)
            .map(|i| {
                if p[i] > 0.0 && p1[i] > 0.0 && p2[i] > 0.0 {
                    let (l0, l1, l2) = (p[i].log2(), p1[i].log2(), p2[i].log2());
                    let l = l0 - 2.0 * alpha * (l1 - l0) + alpha * alpha * (l2 - 2.0 * l1 + l0);
                    l.clamp(l2 - MAX_LOG_JUMP, l2 + MAX_LOG_JUMP)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        logs.iter_mut().for_each(|l| *l = (*l - top).exp2());
        flush_and_normalize(&mut logs);
        let jumped = logs;

        let ej = compact.eval(&jumped, slope, cost, &mut work);
        iterations += 1;
        if ej.achieved >= e1.achieved {
            if done(&ej) {
                converged = true;
                p = jumped;
                break 'outer;
            }
            if -alpha >= step_max {
                step_max *= 4.0;
            }
            p = update(&jumped, &work.score, &ej);
        } else {
            step_max = (step_max / 4.0).max(1.0);
            p = p2;
        }
        if iterations >= options.max_iterations {
            break;
        }
    }

    // Final bookkeeping against the returned input.
    let e = compact.eval(&p, slope, cost, &mut work);
    let expected_cost: f64 = p.iter().zip(cost).map(|(a, b)| a * b).sum();
    Ok(BlahutResult {
        slope,
        mutual_information: e.achieved + slope * expected_cost,
        expected_cost,
        lagrangian_upper: e.upper,
        lagrangian_achieved: e.achieved,
        input: p,
        iterations,
        converged,
    })
}

/// Capacity of `w` (no cost term), started from `init`.
pub fn capacity(w: &TransitionMatrix, init: Option<&[f64]>, options: &BlahutOptions) -> Result<BlahutResult> {
    blahut_cost(w, &vec![0.0; w.rows()], 0.0, init, options)
}

/// The matrix restricted to reachable columns, with `sum_y W log2 W` per row.
struct Compact {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    neg_entropy: Vec<f64>,
}

impl Compact {
    fn new(w: &TransitionMatrix) -> Self {
        let keep: Vec<usize> = (0..w.cols())
            .filter(|&y| (0..w.rows()).any(|x| w.get(x, y) > 0.0))
            .collect();
        let cols = keep.len();
        let mut data = Vec::with_capacity(w.rows() * cols);
        let mut neg_entropy = Vec::with_capacity(w.rows());
        for x in 0..w.rows() {
            let row = w.row(x);
            let mut acc = 0.0;
            for &y in &keep {
                let v = row[y];
                data.push(v);
                if v > 0.0 {
                    acc += v * v.log2();
                }
            }
            neg_entropy.push(acc);
        }
        Self {
            rows: w.rows(),
            cols,
            data,
            neg_entropy,
        }
    }

    /// Fills `work.score[x] = D(W_x || p W) - s c(x)` and summarizes it.
    fn eval(&self, p: &[f64], slope: f64, cost: &[f64], work: &mut Workspace) -> Eval {
        let out = &mut work.out;
        out.iter_mut().for_each(|o| *o = 0.0);
        for x in 0..self.rows {
            let px = p[x];
            if px > 0.0 {
                let row = &self.data[x * self.cols..(x + 1) * self.cols];
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += px * w;
                }
            }
        }
        for (l, &o) in work.log_out.iter_mut().zip(out.iter()) {
            *l = if o > 0.0 { o.log2() } else { f64::MIN_POSITIVE.log2() };
        }
        let mut upper = f64::NEG_INFINITY;
        let mut achieved = 0.0;
        for x in 0..self.rows {
            let row = &self.data[x * self.cols..(x + 1) * self.cols];
            let sc = self.neg_entropy[x] - dot(row, &work.log_out) - slope * cost[x];
            work.score[x] = sc;
            upper = upper.max(sc);
            if p[x] > 0.0 {
                achieved += p[x] * sc;
            }
        }
        let log_norm = p
            .iter()
            .zip(&work.score)
            .map(|(&px, &a)| px * (a - upper).exp2())
            .sum::<f64>()
            .log2();
        Eval {
            upper,
            achieved,
            log_norm,
        }
    }
}

const POLISH_AFTER: usize = 200;
const POLISH_EVERY: usize = 2_000;
const NEWTON_STEPS: usize = 30;
/// Masses at or below this count as sitting on the simplex boundary.
const BOUNDARY_MASS: f64 = 1e-12;

impl Compact {
    /// Maximizer of the local quadratic model over `sum d = 0` on `active`.
    fn newton_direction(&self, active: &[usize], inv_sqrt: &[f64], score: &[f64]) -> Option<DVector<f64>> {
        let k = active.len();
        let b = DMatrix::from_fn(k, self.cols, |i, y| self.data[active[i] * self.cols + y] * inv_sqrt[y]);
        let mut m = (&b * b.transpose()) / std::f64::consts::LN_2;
        let ridge = 1e-13 * m.diagonal().max();
        for i in 0..k {
            m[(i, i)] += ridge;
        }
        let chol = m.cholesky()?;
        let g = DVector::from_iterator(k, active.iter().map(|&x| score[x]));
        let mg = chol.solve(&g);
        let m1 = chol.solve(&DVector::from_element(k, 1.0));
        let mu = mg.sum() / m1.sum();
        Some(mg - m1 * mu)
    }

    /// Newton steps for the Lagrangian restricted to the simplex face of the
    /// active inputs, with a ratio test and backtracking on the objective.
    /// Returns whether the certificate was met.
    #[allow(clippy::too_many_arguments)]
    fn newton_polish(
        &self,
        p: &mut Vec<f64>,
        slope: f64,
        cost: &[f64],
        work: &mut Workspace,
        iterations: &mut usize,
        cap: usize,
        done: &dyn Fn(&Eval) -> bool,
    ) -> bool {
        let mut e = self.eval(p, slope, cost, work);
        *iterations += 1;
        for _ in 0..NEWTON_STEPS {
            if done(&e) {
                return true;
            }
            if *iterations >= cap {
                return false;
            }
            let mut active: Vec<usize> = (0..self.rows)
                .filter(|&x| p[x] > 1e-10 || work.score[x] > e.achieved)
                .collect();
            let inv_sqrt: Vec<f64> = work
                .out
                .iter()
                .map(|&r| if r > 0.0 { r.sqrt().recip() } else { 0.0 })
                .collect();
            // Inputs at the boundary that the step would push outward are
            // held at zero and the step is recomputed without them.
            let d = loop {
                let Some(d) = self.newton_direction(&active, &inv_sqrt, &work.score) else {
                    return false;
                };
                let before = active.len();
                let mut i = 0;
                active.retain(|&x| {
                    let keep = !(p[x] <= BOUNDARY_MASS && d[i] < 0.0);
                    i += 1;
                    keep
                });
                if active.len() == before {
                    break d;
                }
                if active.is_empty() {
                    return false;
                }
            };

            let mut t: f64 = 1.0;
            for (i, &x) in active.iter().enumerate() {
                if d[i] < 0.0 {
                    t = t.min(p[x] / -d[i]);
                }
            }
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = p.clone();
                for (i, &x) in active.iter().enumerate() {
                    cand[x] = (p[x] + t * d[i]).max(0.0);
                }
                flush_and_normalize(&mut cand);
                let ec = self.eval(&cand, slope, cost, work);
                *iterations += 1;
                if ec.achieved >= e.achieved {
                    *p = cand;
                    e = ec;
                    accepted = true;
                    break;
                }
                if *iterations >= cap {
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return false;
            }
        }
        done(&e)
    }
}

struct Workspace {
    out: Vec<f64>,
    log_out: Vec<f64>,
    score: Vec<f64>,
}

impl Workspace {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            out: vec![0.0; cols],
            log_out: vec![0.0; cols],
            score: vec![0.0; rows],
        }
    }
}

struct Eval {
    /// `max_x score[x]`.
    upper: f64,
    /// `sum_x p[x] score[x]`.
    achieved: f64,
    /// `log2 sum_x p[x] 2^(score[x] - upper)`.
    log_norm: f64,
}

/// One multiplicative step `p[x] 2^score[x]`, renormalized.
fn update(p: &[f64], score: &[f64], e: &Eval) -> Vec<f64> {
    let mut next: Vec<f64> = p
        .iter()
        .zip(score)
        .map(|(&px, &a)| px * (a - e.upper - e.log_norm).exp2())
        .collect();
    flush_and_normalize(&mut next);
    next
}

/// Floor on every input mass. Far below any reported digit, it keeps the
/// arithmetic out of the subnormal range and lets every input recover.
const MASS_FLOOR: f64 = 1e-250;

/// Largest change of `log2 p[x]` one extrapolation may make.
const MAX_LOG_JUMP: f64 = 30.0;

fn flush_and_normalize(p: &mut [f64]) {
    let mut total = 0.0;
    for v in p.iter_mut() {
        *v = v.max(MASS_FLOOR);
        total += *v;
    }
    p.iter_mut().for_each(|v| *v /= total);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Total-variation distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bsc(p: f64) -> TransitionMatrix {
        TransitionMatrix::new(2, 2, vec![1.0 - p, p, p, 1.0 - p]).unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(TransitionMatrix::new(2, 2, vec![0.5, 0.5, 0.5]).is_err());
        assert!(TransitionMatrix::new(2, 2, vec![0.5, 0.6, 0.5, 0.5]).is_err());
        assert!(TransitionMatrix::new(1, 2, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn bsc_capacity() {
        let r = capacity(&bsc(0.11), Some(&[0.9, 0.1]), &BlahutOptions::default()).unwrap();
        assert!(r.converged);
        let expected = 1.0 - crate::entropy::binary_entropy(0.11);
        assert_abs_diff_eq!(r.mutual_information, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(r.input[0], 0.5, epsilon = 1e-4);
        assert!(r.gap() < 1e-9);
    }

    #[test]
    fn noiseless_with_inactive_cost() {
        let id = TransitionMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = blahut_cost(&id, &[0.0, 1.0], 0.0, None, &BlahutOptions::default()).unwrap();
        assert_abs_diff_eq!(r.expected_cost, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mutual_information, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn large_slope_drives_cost_down() {
        let id = TransitionMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = blahut_cost(&id, &[0.0, 1.0], 40.0, None, &BlahutOptions::default()).unwrap();
        assert!(r.expected_cost < 1e-9);
        assert!(r.mutual_information < 1e-6);
    }

    #[test]
    fn noiseless_lagrangian_matches_closed_form() {
        // For the noiseless binary channel with c = (0, 1), the optimum is
        // p(1) = 1 / (1 + 2^s), giving I = h_b(p(1)).
        let id = TransitionMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        for s in [0.5, 1.0, 2.0, 3.5] {
            let r = blahut_cost(&id, &[0.0, 1.0], s, None, &BlahutOptions::default()).unwrap();
            let p1 = 1.0 / (1.0 + f64::exp2(s));
            assert_abs_diff_eq!(r.expected_cost, p1, epsilon = 1e-8);
            assert_abs_diff_eq!(
                r.mutual_information,
                crate::entropy::binary_entropy(p1),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn dropped_columns_do_not_matter() {
        let w = TransitionMatrix::new(2, 3, vec![0.9, 0.0, 0.1, 0.2, 0.0, 0.8]).unwrap();
        let r = capacity(&w, None, &BlahutOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.mutual_information.is_finite());
        assert_abs_diff_eq!(
            r.mutual_information,
            w.mutual_information(&r.input),
            epsilon = 1e-12
        );
    }

    #[test]
    fn non_convergence_is_flagged() {
        let opts = BlahutOptions {
            tolerance: 1e-15,
            max_iterations: 3,
            accelerate: false,
        };
        let r = capacity(&bsc(0.2), Some(&[0.95, 0.05]), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
