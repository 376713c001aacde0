//! Capacity of the channel with and without feedback.
//!
//! `C = C_FB = (1 - eps) log2 q - (rate(Z) - rate(Z~))`. The auxiliary rate
//! is exact when the erasure indicator is itself Markov; otherwise `C` is
//! bracketed by the block-`l` quantities `C_l <= C <= (1 - eps) log2 q -
//! rate(Z) + H(Z~^l)/l`.

use serde::Serialize;

use crate::entropy::{self, MemoryGain};
use crate::error::Result;
use crate::process::NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Self { lower: v, upper: v }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport {
    pub q: usize,
    pub l: usize,
    pub erasure_prob: f64,
    /// `(1 - eps) log2 q`.
    pub erasure_term: f64,
    pub entropy_rate_z: f64,
    /// Exact, or the `[H(Z~_l | Z~^{l-1}, Z_1), H(Z~^l)/l]` bracket.
    pub entropy_rate_ztilde: Interval,
    pub capacity: Interval,
    pub feedback_capacity: Interval,
    /// Capacity of the memoryless counterpart, `(1 - eps) log2 q - H(Z_1|Z~_1)`.
    pub capacity_dmc: f64,
    pub memory_gain: MemoryGain,
    pub exact: bool,
}

pub fn capacity_report(model: &NoiseModel, l: usize) -> Result<CapacityReport> {
    let q = model.q();
    let eps = model.erasure_prob();
    let erasure_term = (1.0 - eps) * (q as f64).log2();
    let rate_z = entropy::entropy_rate_z(model);
    let bounds = entropy::auxiliary_rate_bounds(model, l)?;
    let exact_rate = if model.is_markov() {
        bounds.exact
    } else {
        Some(entropy::binary_entropy(eps))
    };
    let (rate_zt, capacity) = match exact_rate {
        Some(r) => (Interval::point(r), Interval::point(erasure_term - rate_z + r)),
        None => {
            let hn = entropy::hn_sequence(model, l)?;
            let c_l = erasure_term - hn[l - 1];
            (
                Interval {
                    lower: bounds.lower,
                    upper: bounds.upper,
                },
                Interval {
                    lower: c_l,
                    upper: erasure_term - rate_z + bounds.upper,
                },
            )
        }
    };
    let capacity_dmc = erasure_term - entropy::first_symbol_conditional_entropy(model);
    Ok(CapacityReport {
        q,
        l,
        erasure_prob: eps,
        erasure_term,
        entropy_rate_z: rate_z,
        entropy_rate_ztilde: rate_zt,
        capacity,
        feedback_capacity: capacity,
        capacity_dmc,
        memory_gain: entropy::memory_gain(model, l)?,
        exact: exact_rate.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use approx::assert_abs_diff_eq;

    // Brute-force evaluation over all blocks of length <= 2, computed
    // independently of this crate.
    const C_PI1: f64 = 0.166_258_998_739_261_87;

    #[test]
    fn pi1_is_exact() {
        let r = capacity_report(&models::pi1(), 16).unwrap();
        assert!(r.exact);
        assert_abs_diff_eq!(r.capacity.lower, C_PI1, epsilon = 1e-13);
        assert_eq!(r.capacity, r.feedback_capacity);
        assert!(r.capacity.lower > r.capacity_dmc);
    }

    #[test]
    fn pi2_is_an_interval() {
        let r = capacity_report(&models::pi2(), 12).unwrap();
        assert!(!r.exact);
        assert!(r.capacity.lower <= r.capacity.upper);
        assert!(r.entropy_rate_ztilde.lower <= r.entropy_rate_ztilde.upper);
    }

    #[test]
    fn special_cases() {
        let ec = models::erasure_only();
        let r = capacity_report(&ec, 8).unwrap();
        assert_abs_diff_eq!(r.capacity.lower, 1.0 - ec.erasure_prob(), epsilon = 1e-12);
        let anc = models::no_erasure();
        let r = capacity_report(&anc, 8).unwrap();
        assert_abs_diff_eq!(
            r.capacity.lower,
            1.0 - entropy::markov_conditional_entropy(&anc).unwrap(),
            epsilon = 1e-12
        );
    }
}
