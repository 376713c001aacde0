//! Invariants checked against direct enumeration written independently of
//! the library internals.

use nec_core::blahut::{self, BlahutOptions};
use nec_core::capacity::capacity_report;
use nec_core::curve::{self, CostSpec};
use nec_core::feedback;
use nec_core::models;
use nec_core::nfold::{self, Limits};
use nec_core::simulate;
use nec_core::{entropy, ChannelFunction, NoiseModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h(p: impl IntoIterator<Item = f64>) -> f64 {
    -p.into_iter().filter(|&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

/// Stationary distribution by normalized power iteration from uniform.
fn power_stationary(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.len();
    let mut v = vec![1.0 / k as f64; k];
    for _ in 0..5_000 {
        let next: Vec<f64> = (0..k).map(|j| (0..k).map(|i| v[i] * rows[i][j]).sum()).collect();
        let s: f64 = next.iter().sum();
        v = next.into_iter().map(|x| x / s).collect();
    }
    v
}

fn block_prob(pi: &[f64], rows: &[Vec<f64>], block: &[usize]) -> f64 {
    block.windows(2).fold(pi[block[0]], |p, w| p * rows[w[0]][w[1]])
}

fn all_blocks(k: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..k.pow(n as u32)).map(move |mut i| {
        let mut b = vec![0; n];
        for slot in b.iter_mut().rev() {
            *slot = i % k;
            i /= k;
        }
        b
    })
}

fn markov_rows(q: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.02f64..1.0, q + 1), q + 1).prop_map(|raw| {
        raw.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn stationary_marginal_matches_power_iteration(rows in markov_rows(2)) {
        let m = NoiseModel::markov(2, &rows).unwrap();
        for (a, b) in m.marginal().iter().zip(power_stationary(&rows)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn block_probabilities_marginalize(rows in markov_rows(2), n in 1usize..5) {
        let m = NoiseModel::markov(2, &rows).unwrap();
        for prefix in all_blocks(3, n) {
            let total: f64 = (0..3)
                .map(|z| {
                    let mut b = prefix.clone();
                    b.push(z);
                    m.block_prob(&b).unwrap()
                })
                .sum();
            prop_assert!((total - m.block_prob(&prefix).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn relabelling_data_symbols_permutes_the_marginal(rows in markov_rows(3)) {
        // swap symbols 0 and 2, keep the erasure last
        let perm = [2usize, 1, 0, 3];
        let permuted: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| rows[perm[i]][perm[j]]).collect())
            .collect();
        let a = NoiseModel::markov(3, &rows).unwrap();
        let b = NoiseModel::markov(3, &permuted).unwrap();
        for i in 0..4 {
            prop_assert!((b.marginal()[i] - a.marginal()[perm[i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn nfold_entries_are_noise_block_probabilities(rows in markov_rows(2), n in 1usize..4) {
        let m = NoiseModel::markov(2, &rows).unwrap();
        let pi = power_stationary(&rows);
        let cf = ChannelFunction::mod_add(2).unwrap();
        let w = nfold::build_nfold(&cf, &m, n, &Limits::default()).unwrap();
        for (xi, x) in all_blocks(2, n).enumerate() {
            for z in all_blocks(3, n) {
                let y: Vec<usize> = x.iter().zip(&z).map(|(&a, &b)| if b == 2 { 2 } else { (a + b) % 2 }).collect();
                let yi = y.iter().fold(0, |acc, &d| acc * 3 + d);
                prop_assert!((w.entry(xi, yi) - block_prob(&pi, &rows, &z)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn blahut_result_is_bracketed(rows in markov_rows(2)) {
        let m = NoiseModel::markov(2, &rows).unwrap();
        let cf = ChannelFunction::mod_add(2).unwrap();
        let w = nfold::build_nfold(&cf, &m, 2, &Limits::default()).unwrap();
        let r = blahut::capacity(w.matrix(), None, &BlahutOptions::default()).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.lagrangian_achieved <= r.lagrangian_upper + 1e-12);
        let c2 = nfold::cn_closed_form(&m, 2).unwrap() * 2.0;
        prop_assert!((r.mutual_information - c2).abs() < 1e-8);
    }
}

fn stationary_models() -> Vec<(&'static str, NoiseModel)> {
    vec![
        ("pi1", models::pi1()),
        ("pi2", models::pi2()),
        ("pi3", models::pi3()),
        ("memoryless-a", models::binary_memoryless_a()),
        ("ternary-markov", models::ternary_markov()),
    ]
}

#[test]
fn block_capacity_is_nondecreasing() {
    for (label, m) in stationary_models() {
        let cf = ChannelFunction::mod_add(m.q()).unwrap();
        let n_max = if m.q() == 2 { 6 } else { 4 };
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=n_max {
            let w = nfold::build_nfold(&cf, &m, n, &Limits::default()).unwrap();
            let c = nfold::capacity_quasi_symmetric(&w, &m).unwrap();
            assert!(c >= prev - 1e-12, "{label}: C_{n} = {c} < {prev}");
            prev = c;
        }
    }
}

#[test]
fn second_order_term_is_below_memoryless_term() {
    for (label, m) in stationary_models() {
        let rows = m.transition_rows();
        let pi = m.marginal().to_vec();
        let k = m.q() + 1;
        let e = m.q();
        // pair distributions enumerated here
        let pair: Vec<f64> = all_blocks(k, 2).map(|b| block_prob(&pi, &rows, &b)).collect();
        let mut tpair = [0.0; 4];
        for (b, p) in all_blocks(k, 2).zip(&pair) {
            tpair[2 * usize::from(b[0] == e) + usize::from(b[1] == e)] += p;
        }
        let eps = pi[e];
        let i_z = 2.0 * h(pi.iter().copied()) - h(pair.iter().copied());
        let i_zt = 2.0 * h([eps, 1.0 - eps]) - h(tpair);
        let h2 = (h(pair.iter().copied()) - h(tpair)) / 2.0;
        let memoryless_term = h(pi.iter().copied()) - h([eps, 1.0 - eps]);
        assert!(h2 <= memoryless_term + 1e-12, "{label}");
        let lib = entropy::hn_sequence(&m, 2).unwrap();
        assert!((lib[1] - h2).abs() < 1e-12, "{label}");
        assert!((entropy::first_symbol_conditional_entropy(&m) - memoryless_term).abs() < 1e-12);
        let equal = (h2 - memoryless_term).abs() < 1e-12;
        assert_eq!(equal, (i_z - i_zt).abs() < 1e-12, "{label}");
        let (a, b) = entropy::adjacent_mutual_information(&m);
        assert!((a - i_z).abs() < 1e-12 && (b - i_zt).abs() < 1e-12, "{label}");
    }
}

#[test]
fn effective_cost_matches_simulated_trajectories() {
    let m = models::pi1();
    let cf = ChannelFunction::mod_add(2).unwrap();
    let cost = CostSpec::linear(2).unwrap();
    let n = 3;
    let b = feedback::effective_cost_vector(&m, n, 0, &cost).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let raw: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let pv: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let exact: f64 = pv.iter().zip(&b).map(|(p, c)| p * c).sum();
        let est = simulate::simulate_block_cost(&cf, &m, n, 0, &cost, &pv, 100_000, 1_000 + trial).unwrap();
        let z = (est.mean - exact).abs() / est.std_error;
        worst = worst.max(z);
        assert!(z <= 3.0, "trial {trial}: |z| = {z}");
    }
    assert!(worst > 0.0);
}

#[test]
fn bound_curves_are_ordered_and_shaped() {
    let grid = curve::linear_grid(0.0, 0.5, 26);
    let cost = CostSpec::linear(2).unwrap();
    let limits = Limits::default();
    for (label, m) in [("pi1", models::pi1()), ("pi3", models::pi3()), ("iid", models::binary_memoryless_b())] {
        let cf = ChannelFunction::mod_add(2).unwrap();
        let c = capacity_report(&m, 16).unwrap().capacity.upper;
        for n in [1, 3] {
            let nf = curve::curve_nonfeedback(&cf, &m, n, &cost, &grid, &limits).unwrap();
            let up = curve::upper_from_nonfeedback(&m, &nf);
            let lo = feedback::curve_lower(&cf, &m, n, 0, &cost, &grid, &limits).unwrap();
            for curve in [&nf, &up, &lo] {
                assert!(curve.all_converged(), "{label} n={n}");
                assert!(curve.is_concave_nondecreasing(1e-9), "{label} n={n} {:?}", curve.kind);
            }
            for i in 0..grid.len() {
                assert!(lo.points[i].rate <= c + 1e-9, "{label} n={n}");
                assert!(nf.points[i].rate <= up.points[i].rate);
                if n == 1 {
                    assert!((nf.points[i].rate - lo.points[i].rate).abs() < 1e-9, "{label} beta={}", grid[i]);
                }
            }
        }
    }
}
