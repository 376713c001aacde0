//! Consistency checks on one model. Every line of the report is a pure
//! function of the model, the block length and the seed.

use std::fmt::Write as _;

use nec_core::config::ModelConfig;
use nec_core::export;
use nec_core::process::NoiseKind;
use nec_core::{entropy, feedback, nfold, simulate, Limits, NoiseModel, Result};
use serde::Serialize;

use crate::commands::{setup, Setup, MAX_Z, MIN_EXPECTED};
use crate::{Common, Format, Outcome};

/// Largest block length used by the Monte Carlo checks.
const MC_MAX_N: usize = 3;
const AGREEMENT_TOL: f64 = 1e-6;
const SUBADDITIVITY_LEN: usize = 10;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn quasi_symmetry(s: &Setup, n_max: usize) -> Result<(bool, String)> {
    let mut failed = Vec::new();
    for n in 1..=n_max {
        let m = nfold::build_nfold(&s.channel, &s.model, n, &Limits::default())?;
        if !nfold::check_quasi_symmetry(&m, &s.model)?.pass {
            failed.push(n);
        }
    }
    Ok((failed.is_empty(), format!("n = 1..={n_max}, failing n: {failed:?}")))
}

fn capacity_agreement(s: &Setup, n_max: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        let m = nfold::build_nfold(&s.channel, &s.model, n, &Limits::default())?;
        let qs = nfold::capacity_quasi_symmetric(&m, &s.model)?;
        let closed = nfold::cn_closed_form(&s.model, n)?;
        let oracle = nfold::capacity_oracle_uniformity(&m)?;
        worst = worst
            .max((qs - closed).abs())
            .max((qs - oracle.capacity).abs())
            .max((closed - oracle.capacity).abs());
    }
    Ok((
        worst <= AGREEMENT_TOL,
        format!("n = 1..={n_max}, max pairwise difference {worst:.3e} (tolerance {AGREEMENT_TOL:e})"),
    ))
}

fn subadditivity(model: &NoiseModel) -> Result<(bool, String)> {
    let h = entropy::hn_sequence(model, SUBADDITIVITY_LEN)?;
    let mut worst = f64::NEG_INFINITY;
    for m in 1..SUBADDITIVITY_LEN {
        for n in 1..=(SUBADDITIVITY_LEN - m) {
            worst = worst.max((m + n) as f64 * h[m + n - 1] - m as f64 * h[m - 1] - n as f64 * h[n - 1]);
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max (m+n)H_(m+n) - mH_m - nH_n = {worst:.3e} for m + n <= {SUBADDITIVITY_LEN}"),
    ))
}

fn monte_carlo(s: &Setup, n: usize, samples: u64, seed: u64) -> Result<(bool, String)> {
    let limits = Limits::default();
    let plain = nfold::build_nfold(&s.channel, &s.model, n, &limits)?;
    let a = simulate::simulate_channel(&s.channel, &s.model, n, None, samples, seed)?
        .compare_with(plain.matrix(), MIN_EXPECTED)?;
    let w = feedback::induced_feedback_channel(&s.channel, &s.model, n, 0, &limits)?;
    let b = simulate::simulate_channel(&s.channel, &s.model, n, Some(0), samples, seed.wrapping_add(1))?
        .compare_with(&w, MIN_EXPECTED)?;
    Ok((
        a.within(MAX_Z) && b.within(MAX_Z),
        format!(
            "n = {n}, {samples} samples each: without feedback max |z| {:.3} ({} cells), \
             with feedback max |z| {:.3} ({} cells), impossible hits {}",
            a.max_z,
            a.cells,
            b.max_z,
            b.cells,
            a.impossible_hits + b.impossible_hits
        ),
    ))
}

fn round_trips(s: &Setup, n: usize) -> Result<(bool, String)> {
    let m = nfold::build_nfold(&s.channel, &s.model, n, &Limits::default())?;
    let (rows, cols, data) = export::parse_nfold_csv(&export::nfold_csv(&m)?)?;
    let matrix_ok = rows == m.matrix().rows() && cols == m.matrix().cols() && data == m.matrix().data();
    let json = match s.model.kind() {
        NoiseKind::Markov => serde_json::json!({
            "q": s.model.q(),
            "kind": "markov",
            "transition": s.model.transition_rows(),
            "initial": s.model.marginal(),
        }),
        NoiseKind::Memoryless => serde_json::json!({
            "q": s.model.q(),
            "kind": "memoryless",
            "marginal": s.model.marginal(),
        }),
    };
    let back = ModelConfig::from_json(&json.to_string())?.build_model()?;
    let model_ok = back == s.model;
    Ok((
        matrix_ok && model_ok,
        format!("n-fold CSV (n = {n}) exact: {matrix_ok}, model JSON exact: {model_ok}"),
    ))
}

fn capacity_ordering(s: &Setup, l: usize) -> Result<(bool, String)> {
    let r = nec_core::capacity::capacity_report(&s.model, l)?;
    let ok = r.capacity.lower <= r.capacity.upper
        && r.capacity.lower >= r.capacity_dmc - 1e-12
        && r.capacity.upper <= r.erasure_term + 1e-12;
    Ok((
        ok,
        format!(
            "C_DMC {} <= C in [{}, {}] <= (1 - eps) log q {}",
            r.capacity_dmc, r.capacity.lower, r.capacity.upper, r.erasure_term
        ),
    ))
}

pub fn run(c: &Common) -> Result<Outcome> {
    let s = setup(c)?;
    let n = c.n;
    let mc_n = n.min(MC_MAX_N);
    let checks = vec![
        check("quasi-symmetry", || quasi_symmetry(&s, n)),
        check("block capacity agreement", || capacity_agreement(&s, n)),
        check("subadditivity", || subadditivity(&s.model)),
        check("capacity ordering", || capacity_ordering(&s, c.l)),
        check("monte carlo", || monte_carlo(&s, mc_n, c.samples, c.seed)),
        check("round trips", || round_trips(&s, mc_n)),
    ];
    let failed = checks.iter().filter(|c| !c.pass).count();
    let text = match c.format.unwrap_or(Format::Text) {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&checks)
                .map_err(|e| nec_core::NecError::InvalidArgument(e.to_string()))?;
            t.push('\n');
            t
        }
        Format::Text | Format::Csv => {
            let mut out = String::new();
            for ch in &checks {
                let _ = writeln!(out, "{} {}: {}", if ch.pass { "PASS" } else { "FAIL" }, ch.name, ch.detail);
            }
            let _ = writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len());
            out
        }
        Format::Svg => return Err(nec_core::NecError::Config("validate does not support --format svg".into())),
    };
    Ok(Outcome {
        text,
        flagged: failed > 0,
    })
}
