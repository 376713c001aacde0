use std::fmt::Write as _;
use std::path::Path;

use nec_core::capacity::{self, CapacityReport, Interval};
use nec_core::config::{self, ModelConfig};
use nec_core::curve::{self, BoundCurve, CostSpec, CurvePoint};
use nec_core::entropy::{self, MemoryGain};
use nec_core::export::{self, Units};
use nec_core::feedback::{self, FeedbackVerdict};
use nec_core::simulate;
use nec_core::{nfold, ChannelFunction, Limits, NecError, NoiseModel, Result};
use serde::Serialize;

use crate::{Common, Format, Outcome};

/// Expected count below which a Monte Carlo cell is not scored.
pub const MIN_EXPECTED: f64 = 5.0;
/// Largest accepted `|z|` over scored cells.
pub const MAX_Z: f64 = 6.0;

pub struct Setup {
    pub model: NoiseModel,
    pub channel: ChannelFunction,
    pub cost: CostSpec,
    pub units: Units,
}

fn config_err(msg: impl Into<String>) -> NecError {
    NecError::Config(msg.into())
}

pub fn setup(c: &Common) -> Result<Setup> {
    let (model, mut channel, cost) = match &c.model {
        Some(path) => {
            let loaded = ModelConfig::from_path(path)?.load()?;
            (loaded.model, loaded.channel, loaded.cost)
        }
        None => {
            let model = nec_core::models::pi1();
            let q = model.q();
            (model, ChannelFunction::mod_add(q)?, CostSpec::linear(q)?)
        }
    };
    if let Some(spec) = &c.channel {
        channel = match spec.split_once(':') {
            None if spec == "mod_add" => ChannelFunction::mod_add(model.q())?,
            Some(("table", path)) => config::channel_table_from_path(Path::new(path), model.q())?,
            _ => return Err(config_err(format!("--channel `{spec}` is neither mod_add nor table:PATH"))),
        };
    }
    if c.n == 0 {
        return Err(config_err("--n must be at least 1"));
    }
    if c.l == 0 || c.l > entropy::MAX_HISTORY_LEN {
        return Err(config_err(format!("--l must lie in 1..={}", entropy::MAX_HISTORY_LEN)));
    }
    if let Some(s) = c.s_tilde {
        if s >= model.q() {
            return Err(config_err(format!("--s-tilde must be a noise symbol below q = {}", model.q())));
        }
    }
    Limits::default()
        .check_block(model.q(), c.n)
        .map_err(|e| config_err(e.to_string()))?;
    let units = if c.nats { Units::Nats } else { Units::Bits };
    Ok(Setup {
        model,
        channel,
        cost,
        units,
    })
}

fn reject_format(command: &str, f: Format) -> NecError {
    config_err(format!("{command} does not support --format {f:?}").to_lowercase())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| NecError::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn scale_interval(i: Interval, f: f64) -> Interval {
    Interval {
        lower: i.lower * f,
        upper: i.upper * f,
    }
}

fn scale_report(r: &CapacityReport, units: Units) -> CapacityReport {
    let f = units.factor();
    CapacityReport {
        erasure_term: r.erasure_term * f,
        entropy_rate_z: r.entropy_rate_z * f,
        entropy_rate_ztilde: scale_interval(r.entropy_rate_ztilde, f),
        capacity: scale_interval(r.capacity, f),
        feedback_capacity: scale_interval(r.feedback_capacity, f),
        capacity_dmc: r.capacity_dmc * f,
        memory_gain: MemoryGain {
            gain_lower: r.memory_gain.gain_lower * f,
            gain_upper: r.memory_gain.gain_upper * f,
            strict: r.memory_gain.strict,
        },
        ..r.clone()
    }
}

fn show(i: Interval) -> String {
    if i.is_exact() {
        format!("{}", i.lower)
    } else {
        format!("[{}, {}]", i.lower, i.upper)
    }
}

#[derive(Serialize)]
struct CapacityOutput<'a> {
    units: Units,
    kind: nec_core::process::NoiseKind,
    #[serde(flatten)]
    report: &'a CapacityReport,
}

pub fn capacity(c: &Common) -> Result<Outcome> {
    let s = setup(c)?;
    let report = scale_report(&capacity::capacity_report(&s.model, c.l)?, s.units);
    let u = s.units.suffix();
    let text = match c.format.unwrap_or(Format::Text) {
        Format::Json => to_json(&CapacityOutput {
            units: s.units,
            kind: s.model.kind(),
            report: &report,
        })?,
        Format::Csv => {
            let mut out = format!("quantity,lower_{u},upper_{u}\n");
            let rows = [
                ("erasure_term", Interval::point(report.erasure_term)),
                ("entropy_rate_z", Interval::point(report.entropy_rate_z)),
                ("entropy_rate_ztilde", report.entropy_rate_ztilde),
                ("capacity", report.capacity),
                ("feedback_capacity", report.feedback_capacity),
                ("capacity_dmc", Interval::point(report.capacity_dmc)),
                (
                    "memory_gain",
                    Interval {
                        lower: report.memory_gain.gain_lower,
                        upper: report.memory_gain.gain_upper,
                    },
                ),
            ];
            for (name, i) in rows {
                let _ = writeln!(out, "{name},{},{}", i.lower, i.upper);
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "noise: {:?}, q = {}", s.model.kind(), report.q);
            let _ = writeln!(out, "erasure probability eps = {}", report.erasure_prob);
            let _ = writeln!(out, "(1 - eps) log q = {} {u}", report.erasure_term);
            let _ = writeln!(out, "entropy rate of Z = {} {u}", report.entropy_rate_z);
            let note = if report.exact {
                String::new()
            } else {
                format!(" (bounds at l = {})", report.l)
            };
            let _ = writeln!(
                out,
                "entropy rate of the erasure process = {} {u}{note}",
                show(report.entropy_rate_ztilde)
            );
            let _ = writeln!(out, "C = {} {u}", show(report.capacity));
            let _ = writeln!(out, "C_FB = {} {u}", show(report.feedback_capacity));
            let _ = writeln!(out, "C_DMC = {} {u}", report.capacity_dmc);
            let _ = writeln!(
                out,
                "memory gain C - C_DMC = {} {u} (strict: {})",
                show(Interval {
                    lower: report.memory_gain.gain_lower,
                    upper: report.memory_gain.gain_upper
                }),
                report.memory_gain.strict
            );
            out
        }
        f => return Err(reject_format("capacity", f)),
    };
    Ok(Outcome { text, flagged: false })
}

fn scale_curve(curve: &BoundCurve, units: Units) -> BoundCurve {
    let f = units.factor();
    BoundCurve {
        points: curve
            .points
            .iter()
            .map(|p| CurvePoint {
                rate: p.rate * f,
                slope: p.slope * f,
                ..*p
            })
            .collect(),
        offset: curve.offset.map(|o| o * f),
        ..curve.clone()
    }
}

#[derive(Serialize)]
struct BoundsOutput<'a> {
    units: Units,
    verdict: Option<&'a FeedbackVerdict>,
    curves: Vec<BoundCurve>,
}

pub fn grid(c: &Common, cost: &CostSpec) -> Result<Vec<f64>> {
    match &c.beta_grid {
        Some(g) => config::parse_grid(g),
        None => Ok(curve::linear_grid(0.0, cost.beta_max(), 50)),
    }
}

pub fn bounds(c: &Common) -> Result<Outcome> {
    let s = setup(c)?;
    let grid = grid(c, &s.cost)?;
    let s_tilde = c.s_tilde.unwrap_or(0);
    let limits = Limits::default();
    let (curves, verdict) = if s.cost.cost(0) == 0.0 {
        let v = feedback::feedback_gain_verdict(&s.channel, &s.model, c.n, s_tilde, &s.cost, &grid, &limits)?;
        (v.curves.to_vec(), Some(v))
    } else {
        let nf = curve::curve_nonfeedback(&s.channel, &s.model, c.n, &s.cost, &grid, &limits)?;
        let up = curve::upper_from_nonfeedback(&s.model, &nf);
        let lo = feedback::curve_lower(&s.channel, &s.model, c.n, s_tilde, &s.cost, &grid, &limits)?;
        (vec![nf, up, lo], None)
    };
    let flagged = !curves.iter().all(|c| c.all_converged());
    let margins = verdict.as_ref().map(|v| v.margins.as_slice());
    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv | Format::Text => export::bounds_csv(&curves, margins, s.units)?,
        Format::Svg => export::svg_from_csv(&export::bounds_csv(&curves, margins, s.units)?)?,
        Format::Json => {
            let scaled_verdict = verdict.as_ref().map(|v| {
                let f = s.units.factor();
                let mut v = v.clone();
                v.gap *= f;
                v.max_margin *= f;
                for m in &mut v.margins {
                    m.lower *= f;
                    m.upper *= f;
                    m.margin *= f;
                }
                v
            });
            to_json(&BoundsOutput {
                units: s.units,
                verdict: scaled_verdict.as_ref(),
                curves: curves.iter().map(|c| scale_curve(c, s.units)).collect(),
            })?
        }
    };
    Ok(Outcome { text, flagged })
}

#[derive(Serialize)]
struct NfoldOutput<'a> {
    n: usize,
    q: usize,
    rows: usize,
    cols: usize,
    index_convention: &'a str,
    data: &'a [f64],
}

pub fn nfold_export(c: &Common) -> Result<Outcome> {
    let s = setup(c)?;
    let m = nfold::build_nfold(&s.channel, &s.model, c.n, &Limits::default())?;
    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv | Format::Text => export::nfold_csv(&m)?,
        Format::Json => to_json(&NfoldOutput {
            n: m.n(),
            q: m.q(),
            rows: m.matrix().rows(),
            cols: m.matrix().cols(),
            index_convention: "row-major; row = sum_i x_i q^(n-i), column = sum_i y_i (q+1)^(n-i), erasure = q",
            data: m.matrix().data(),
        })?,
        f => return Err(reject_format("nfold-export", f)),
    };
    Ok(Outcome { text, flagged: false })
}

#[derive(Serialize)]
struct SimulateOutput {
    n: usize,
    s_tilde: Option<usize>,
    samples: u64,
    seed: u64,
    max_z: f64,
    scored_cells: usize,
    impossible_hits: u64,
    min_expected: f64,
    max_z_allowed: f64,
    agrees: bool,
}

pub fn simulate(c: &Common) -> Result<Outcome> {
    let s = setup(c)?;
    let limits = Limits::default();
    let exact = match c.s_tilde {
        Some(st) => feedback::induced_feedback_channel(&s.channel, &s.model, c.n, st, &limits)?,
        None => nfold::build_nfold(&s.channel, &s.model, c.n, &limits)?.matrix().clone(),
    };
    let emp = simulate::simulate_channel(&s.channel, &s.model, c.n, c.s_tilde, c.samples, c.seed)?;
    let a = emp.compare_with(&exact, MIN_EXPECTED)?;
    let agrees = a.within(MAX_Z);
    let summary = SimulateOutput {
        n: c.n,
        s_tilde: c.s_tilde,
        samples: c.samples,
        seed: c.seed,
        max_z: a.max_z,
        scored_cells: a.cells,
        impossible_hits: a.impossible_hits,
        min_expected: MIN_EXPECTED,
        max_z_allowed: MAX_Z,
        agrees,
    };
    let text = match c.format.unwrap_or(Format::Text) {
        Format::Json => to_json(&summary)?,
        Format::Csv => {
            let mut out = String::from("x,y,count,empirical,exact\n");
            for x in 0..emp.rows {
                let total = emp.row_total(x);
                for y in 0..emp.cols {
                    let count = emp.counts[x * emp.cols + y];
                    let p = exact.get(x, y);
                    if count == 0 && p == 0.0 {
                        continue;
                    }
                    let phat = if total == 0 { 0.0 } else { count as f64 / total as f64 };
                    let _ = writeln!(out, "{x},{y},{count},{phat},{p}");
                }
            }
            out
        }
        Format::Text => format!(
            "n = {}, feedback s_tilde = {}, samples = {}, seed = {}\n\
             max |z| = {:.4} over {} cells with expected count >= {MIN_EXPECTED}\n\
             observations in impossible cells: {}\n\
             agreement (|z| <= {MAX_Z}): {}\n",
            c.n,
            c.s_tilde.map_or("none".to_string(), |v| v.to_string()),
            c.samples,
            c.seed,
            a.max_z,
            a.cells,
            a.impossible_hits,
            if agrees { "yes" } else { "no" }
        ),
        f => return Err(reject_format("simulate", f)),
    };
    Ok(Outcome {
        text,
        flagged: !agrees,
    })
}
