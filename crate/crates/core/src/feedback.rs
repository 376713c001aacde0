//! Feedback under the fixed encoding rule that sends the zero symbol
//! whenever the previous noise state was the preselected state `s_tilde`,
//! and the lower bound `C_n^lb(beta)` it induces.

use serde::Serialize;

use crate::blahut::{BlahutOptions, TransitionMatrix};
use crate::channel::ChannelFunction;
use crate::curve::{self, BoundCurve, BoundKind, CostSpec, CurvePoint, CurveTracer};
use crate::entropy;
use crate::error::{NecError, Result};
use crate::nfold::{self, Limits};
use crate::process::{FeedbackConditionReport, NoiseModel};

/// Encoder output at time `i > 1` given the message symbol and the noise
/// state observed through feedback at time `i - 1`.
#[inline]
pub fn encode(v: usize, previous_noise: usize, s_tilde: usize) -> usize {
    if previous_noise == s_tilde {
        0
    } else {
        v
    }
}

/// Applies the encoding rule and the channel along one noise block.
pub fn trajectory(cf: &ChannelFunction, s_tilde: usize, v: &[usize], z: &[usize], x: &mut [usize], y: &mut [usize]) {
    for i in 0..v.len() {
        x[i] = if i == 0 { v[0] } else { encode(v[i], z[i - 1], s_tilde) };
        y[i] = cf.theta_unchecked(x[i], z[i]);
    }
}

fn check_inputs(cf: &ChannelFunction, model: &NoiseModel, s_tilde: usize) -> Result<()> {
    if model.q() != cf.q() {
        return Err(NecError::InvalidArgument(format!(
            "channel has q = {} but noise model has q = {}",
            cf.q(),
            model.q()
        )));
    }
    cf.alphabet().check_input(s_tilde)
}

/// `P(y^n | v^n)` by enumerating every noise block.
pub fn induced_feedback_channel(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    s_tilde: usize,
    limits: &Limits,
) -> Result<TransitionMatrix> {
    check_inputs(cf, model, s_tilde)?;
    let q = cf.q();
    limits.check_block(q, n)?;
    let k = q + 1;
    let rows = q.pow(n as u32);
    let cols = k.pow(n as u32);
    let probs = nfold::noise_block_probs(model, n);
    let mut data = vec![0.0; rows * cols];
    let (mut vd, mut zd, mut xd, mut yd) = (vec![0; n], vec![0; n], vec![0; n], vec![0; n]);
    for v in 0..rows {
        nfold::digits(v, q, n, &mut vd);
        let row = &mut data[v * cols..(v + 1) * cols];
        for (z, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            nfold::digits(z, k, n, &mut zd);
            trajectory(cf, s_tilde, &vd, &zd, &mut xd, &mut yd);
            row[nfold::index_of(&yd, k)] += p;
        }
    }
    TransitionMatrix::new(rows, cols, data)
}

/// Expected block cost `E[b(X^n) | V^n = v^n]` for every `v^n`.
pub fn effective_cost_vector(model: &NoiseModel, n: usize, s_tilde: usize, cost: &CostSpec) -> Result<Vec<f64>> {
    if cost.q() != model.q() {
        return Err(NecError::InvalidArgument("cost table does not match q".into()));
    }
    model.alphabet().check_input(s_tilde)?;
    if n == 0 {
        return Err(NecError::InvalidArgument("block length must be at least 1".into()));
    }
    let q = cost.q();
    let k = q + 1;
    // expected cost of a later symbol given v_i
    let later: Vec<f64> = (0..q)
        .map(|v| (0..k).map(|z| model.marginal()[z] * cost.cost(encode(v, z, s_tilde))).sum())
        .collect();
    let mut d = vec![0; n];
    Ok((0..q.pow(n as u32))
        .map(|v| {
            nfold::digits(v, q, n, &mut d);
            cost.cost(d[0]) + d[1..].iter().map(|&s| later[s]).sum::<f64>()
        })
        .collect())
}

/// `C_n^lb(beta)` on the grid.
#[allow(clippy::too_many_arguments)]
pub fn curve_lower(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    s_tilde: usize,
    cost: &CostSpec,
    grid: &[f64],
    limits: &Limits,
) -> Result<BoundCurve> {
    let w = induced_feedback_channel(cf, model, n, s_tilde, limits)?;
    let per_symbol: Vec<f64> = effective_cost_vector(model, n, s_tilde, cost)?
        .into_iter()
        .map(|c| c / n as f64)
        .collect();
    let mut tracer = CurveTracer::new(&w, per_symbol, n, BlahutOptions::default())?;
    Ok(BoundCurve {
        n,
        kind: BoundKind::Lower,
        points: tracer.trace(grid)?,
        offset: None,
    })
}

/// `[1 - P_Z(s_tilde)] (q - 1) / 2`.
pub fn beta_lb(model: &NoiseModel, s_tilde: usize) -> Result<f64> {
    model.alphabet().check_input(s_tilde)?;
    Ok((1.0 - model.marginal()[s_tilde]) * (model.q() - 1) as f64 / 2.0)
}

/// `[1 - (n-1)/n P_Z(s_tilde)] (q - 1) / 2`, the per-symbol cost of a
/// uniform message block under the encoding rule.
pub fn beta_lb_block(model: &NoiseModel, s_tilde: usize, n: usize) -> Result<f64> {
    model.alphabet().check_input(s_tilde)?;
    let frac = (n as f64 - 1.0) / n as f64;
    Ok((1.0 - frac * model.marginal()[s_tilde]) * (model.q() - 1) as f64 / 2.0)
}

/// `I(V^n;Y^n)/n` and the per-symbol input cost for a uniform `V^n`.
pub fn uniform_message_point(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    s_tilde: usize,
    cost: &CostSpec,
    limits: &Limits,
) -> Result<(f64, f64)> {
    let w = induced_feedback_channel(cf, model, n, s_tilde, limits)?;
    let rows = w.rows();
    let uniform = vec![1.0 / rows as f64; rows];
    let rate = w.mutual_information(&uniform) / n as f64;
    let costs = effective_cost_vector(model, n, s_tilde, cost)?;
    let beta = costs.iter().sum::<f64>() / (rows * n) as f64;
    Ok((rate, beta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntropyMax {
    pub value: f64,
    pub note: &'static str,
}

/// `max_{P_X} H(Y) = (1 - eps) log2 q + h_b(eps)` for a single use with
/// input independent of the noise.
pub fn max_output_entropy(q: usize, eps: f64) -> Result<OutputEntropyMax> {
    if q < 2 {
        return Err(NecError::InvalidAlphabet(q));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(NecError::InvalidProbability(format!("erasure probability {eps}")));
    }
    Ok(OutputEntropyMax {
        value: (1.0 - eps) * (q as f64).log2() + entropy::binary_entropy(eps),
        note: "sign of the binary-entropy term is +: H(Y) = h_b(eps) + (1 - eps) H(Y | Y != e), \
               maximized by a uniform input",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictBasis {
    /// The structural conditions hold, so the gain is also guaranteed analytically.
    Analytic,
    NumericalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginPoint {
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    pub margin: f64,
    /// `beta` lies in `[beta_lb, (q-1)/2)`.
    pub in_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackVerdict {
    pub n: usize,
    pub s_tilde: usize,
    pub basis: VerdictBasis,
    pub conditions: Option<FeedbackConditionReport>,
    pub beta_lb: f64,
    pub beta_lb_block: f64,
    pub gap: f64,
    pub margins: Vec<MarginPoint>,
    /// Smallest and largest grid `beta` with a positive margin.
    pub positive_range: Option<(f64, f64)>,
    /// The same, restricted to `[beta_lb, beta_max)`.
    pub positive_range_above_lb: Option<(f64, f64)>,
    pub max_margin: f64,
    #[serde(skip)]
    pub curves: [BoundCurve; 3],
}

impl FeedbackVerdict {
    pub fn nonfeedback(&self) -> &BoundCurve {
        &self.curves[0]
    }

    pub fn upper(&self) -> &BoundCurve {
        &self.curves[1]
    }

    pub fn lower(&self) -> &BoundCurve {
        &self.curves[2]
    }

    /// Margins above `threshold` on in-range points.
    pub fn positive_in_range(&self, threshold: f64) -> Vec<&MarginPoint> {
        self.margins
            .iter()
            .filter(|m| m.in_range && m.margin > threshold)
            .collect()
    }
}

/// Compares `C_n^lb` with `C_n^ub` on the grid. Requires `b(0) = 0`.
#[allow(clippy::too_many_arguments)]
pub fn feedback_gain_verdict(
    cf: &ChannelFunction,
    model: &NoiseModel,
    n: usize,
    s_tilde: usize,
    cost: &CostSpec,
    grid: &[f64],
    limits: &Limits,
) -> Result<FeedbackVerdict> {
    if cost.cost(0) != 0.0 {
        return Err(NecError::InvalidArgument(
            "the feedback comparison needs b(0) = 0".into(),
        ));
    }
    let conditions = if model.is_markov() {
        Some(model.check_feedback_gain_conditions(s_tilde)?)
    } else {
        None
    };
    let basis = match &conditions {
        Some(c) if c.holds => VerdictBasis::Analytic,
        _ => VerdictBasis::NumericalOnly,
    };
    let nonfeedback = curve::curve_nonfeedback(cf, model, n, cost, grid, limits)?;
    let upper = curve::upper_from_nonfeedback(model, &nonfeedback);
    let lower = curve_lower(cf, model, n, s_tilde, cost, grid, limits)?;
    let lb = beta_lb(model, s_tilde)?;
    let beta_max = cost.beta_max();
    let margins: Vec<MarginPoint> = lower
        .points
        .iter()
        .zip(&upper.points)
        .map(|(l, u): (&CurvePoint, &CurvePoint)| MarginPoint {
            beta: l.beta,
            lower: l.rate,
            upper: u.rate,
            margin: l.rate - u.rate,
            in_range: l.beta >= lb && l.beta < beta_max,
        })
        .collect();
    let span = |only_in_range: bool| {
        let betas: Vec<f64> = margins
            .iter()
            .filter(|m| m.margin > 0.0 && (m.in_range || !only_in_range))
            .map(|m| m.beta)
            .collect();
        betas.first().map(|&a| (a, *betas.last().unwrap()))
    };
    let positive_range = span(false);
    let positive_range_above_lb = span(true);
    let max_margin = margins.iter().map(|m| m.margin).fold(f64::NEG_INFINITY, f64::max);
    Ok(FeedbackVerdict {
        n,
        s_tilde,
        basis,
        conditions,
        beta_lb: lb,
        beta_lb_block: beta_lb_block(model, s_tilde, n)?,
        gap: upper.offset.unwrap_or(0.0),
        margins,
        positive_range,
        positive_range_above_lb,
        max_margin,
        curves: [nonfeedback, upper, lower],
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
    fn encoding_rule() {
        assert_eq!(encode(1, 0, 0), 0);
        assert_eq!(encode(1, 1, 0), 1);
        assert_eq!(encode(1, 2, 0), 1);
        let cf = mod2();
        let (mut x, mut y) = ([0; 2], [0; 2]);
        // s_tilde = 0 visited at time 1 routes x_2 to 0
        trajectory(&cf, 0, &[1, 1], &[0, 1], &mut x, &mut y);
        assert_eq!(x, [1, 0]);
        assert_eq!(y, [1, 1]);
    }

    #[test]
    fn single_use_matches_nfold() {
        let model = models::pi1();
        let w = induced_feedback_channel(&mod2(), &model, 1, 0, &Limits::default()).unwrap();
        let m = nfold::build_nfold(&mod2(), &model, 1, &Limits::default()).unwrap();
        assert_eq!(w.data(), m.matrix().data());
    }

    #[test]
    fn effective_costs() {
        let model = models::pi1();
        let cost = CostSpec::linear(2).unwrap();
        assert_eq!(effective_cost_vector(&model, 1, 0, &cost).unwrap(), vec![0.0, 1.0]);
        let c2 = effective_cost_vector(&model, 2, 0, &cost).unwrap();
        assert_abs_diff_eq!(c2[3], 1.0 + (1.0 - 67.0 / 143.0), epsilon = 1e-15);
        assert_abs_diff_eq!(c2[3], 1.531_468_531_468_531_5, epsilon = 1e-15);
        for n in 1..=5 {
            let c = effective_cost_vector(&model, n, 0, &cost).unwrap();
            let mean = c.iter().sum::<f64>() / (c.len() * n) as f64;
            assert_abs_diff_eq!(mean, beta_lb_block(&model, 0, n).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn beta_lb_values() {
        assert_abs_diff_eq!(beta_lb(&models::pi1(), 0).unwrap(), 0.265_734_265_734_265_7, epsilon = 1e-15);
        let never = models::erasure_only();
        assert_eq!(beta_lb(&never, 1).unwrap(), 0.5);
        let ternary = NoiseModel::memoryless(3, vec![0.5, 0.2, 0.2, 0.1]).unwrap();
        assert_abs_diff_eq!(beta_lb(&ternary, 0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(beta_lb(&ternary, 3).is_err());
    }

    #[test]
    fn output_entropy_maximum() {
        assert_abs_diff_eq!(max_output_entropy(4, 0.0).unwrap().value, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(max_output_entropy(2, 1.0).unwrap().value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            max_output_entropy(2, 0.2).unwrap().value,
            0.8 + entropy::binary_entropy(0.2),
            epsilon = 1e-15
        );
        assert!(max_output_entropy(2, 1.2).is_err());
    }

    #[test]
    fn verdict_needs_zero_cost_symbol() {
        let cost = CostSpec::new(vec![1.0, 2.0]).unwrap();
        assert!(feedback_gain_verdict(&mod2(), &models::pi1(), 2, 0, &cost, &[1.5], &Limits::default()).is_err());
    }
}
