//! Scenario documents, the bundled drifting-line example, and report
//! orchestration.
//!
//! A scenario is a single JSON document with top-level sections
//! `space`, `partition`, `phi`, `u`, `p`, `schedules`, `analyses`, and an
//! optional `horizon`. Atoms are referenced by id string everywhere, so a
//! document is self-contained and relocatable. Canonical serialization is
//! bit-exact: keys sorted, two-space indent, and floats printed with C's
//! `%.17g` rule, so `serialize(parse(file))` is byte-identical for files
//! this crate writes.
//!
//! [`build_line_example`] discretizes a drifting shift on a symmetric
//! window of the real line: atoms at cell midpoints `±(j−½)δ`, uniform
//! weight `δ`, the partition pairing `x` with `−x` (block averages are
//! even functions), `φ` the right shift by `t/δ` cells with the overflow
//! absorbed at the right edge, and a three-piece polynomial weight. The
//! builder emits shrinking scheduled sets `V_k ⊂ F = [−a, a]` kept inside
//! the `n_k`-safe core of the window so edge absorption cannot touch any
//! scheduled quantity.
//!
//! [`run_scenario`] executes the requested analyses in declared order and
//! writes `decay_<analysis>.csv`, `kitai_check.csv`, `orbit.csv`, and a
//! canonical `summary.json`. Analysis-level findings (unsupported maps,
//! zero divisors, cap overruns) are recorded in the summary and never
//! abort the run; only I/O, parse, and referential-integrity problems are
//! hard errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::conditional::{cond_exp, verify_ce_axioms};
use crate::dynamics::{
    kitai_check, necessary_quantities, orbit, sufficient_quantities, topmix_quantities,
    CriterionSchedule, DecayReport,
};
use crate::error::{Error, Result};
use crate::measure_space::{
    simple_net_on_blocks, AtomSet, FiniteMeasureSpace, MeasFn, Partition,
};
use crate::operators::ConditionalWCO;
use crate::sampling::rng_from_seed;
use crate::transform::Transformation;

/// Function samples drawn by the projection-axiom verifier per scenario.
pub const CE_SAMPLES: usize = 8;

/// Candidate functions tried by the norm lower-bound search per scenario.
pub const NORM_TRIALS: usize = 64;

/// Ceiling on the simple-function net enumerated for the three-bullet
/// check.
pub const NET_CAP: u128 = 4096;

/// Prints a finite double exactly as C's `printf("%.17g", x)` would:
/// 17 significant digits, trailing zeros removed, fixed notation when the
/// decimal exponent lies in `[−4, 17)` and scientific notation (with a
/// sign and at least two exponent digits) otherwise.
///
/// Seventeen digits round-trip every double, so `parse(format_g17(x))`
/// recovers `x` bit-for-bit, including the sign of zero.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".to_string() } else { "0".to_string() };
    }
    assert!(x.is_finite(), "canonical floats must be finite, got {x}");
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponential format always has an 'e'");
    let exp: i32 = exp.parse().expect("float exponent is a small integer");
    let all: Vec<u8> = mant.bytes().filter(u8::is_ascii_digit).collect();
    let mut keep = all.len();
    while keep > 1 && all[keep - 1] == b'0' {
        keep -= 1;
    }
    let digits = std::str::from_utf8(&all[..keep]).expect("digits are ascii");
    let mut out = String::new();
    if x < 0.0 {
        out.push('-');
    }
    if (-4..17).contains(&exp) {
        if exp >= 0 {
            let point = exp as usize + 1;
            if digits.len() > point {
                out.push_str(&digits[..point]);
                out.push('.');
                out.push_str(&digits[point..]);
            } else {
                out.push_str(digits);
                for _ in digits.len()..point {
                    out.push('0');
                }
            }
        } else {
            out.push_str("0.");
            for _ in 0..(-exp - 1) {
                out.push('0');
            }
            out.push_str(digits);
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push('e');
        out.push(if exp >= 0 { '+' } else { '-' });
        out.push_str(&format!("{:02}", exp.unsigned_abs()));
    }
    out
}

/// Renders a JSON value in the canonical layout: object keys sorted,
/// two-space indentation, scalar-only arrays inline, floats via
/// [`format_g17`]. Deterministic down to the byte.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_g17(n.as_f64().expect("number is integral or f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always encode"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|x| !matches!(x, Value::Array(_) | Value::Object(_))) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, x) in items.iter().enumerate() {
                    push_indent(indent + 1, out);
                    write_value(x, indent + 1, out);
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                push_indent(indent, out);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(k).expect("keys always encode"));
                out.push_str(": ");
                write_value(x, indent + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// The `space` section: parallel id and weight lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    /// Atom ids, unique, in atom order.
    pub ids: Vec<String>,
    /// Nonnegative masses, parallel to `ids`.
    pub weights: Vec<f64>,
}

/// One scheduled evaluation: the reference set `F`, exponents `n_k`, and
/// per-step subsets `V_k` (all by atom id).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Ids forming `F`.
    pub f: Vec<String>,
    /// Strictly increasing exponents `n_k ≥ 1`.
    pub n: Vec<usize>,
    /// Ids forming each `V_k`, parallel to `n`.
    pub v: Vec<Vec<String>>,
}

/// A complete scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Analyses to run, in order (see [`Analysis`] for the names).
    pub analyses: Vec<String>,
    /// Optional cap on every `n` sweep; the CLI flag caps it further.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Norm exponent, `1 ≤ p < ∞`.
    pub p: f64,
    /// Partition blocks as id lists; must cover every atom exactly once.
    pub partition: Vec<Vec<String>>,
    /// Image of each atom under `φ`, by id, in atom order.
    pub phi: Vec<String>,
    /// Scheduled evaluations (may be empty when no analysis needs one).
    pub schedules: Vec<ScheduleSpec>,
    /// Weight-function values in atom order.
    pub u: Vec<f64>,
    /// The measure space.
    pub space: SpaceSpec,
}

impl ScenarioSpec {
    /// Parses a scenario document, rejecting unknown fields.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical serialization (byte-deterministic; round-trips).
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario specs always serialize");
        let mut text = canonical_json(&value);
        text.push('\n');
        text
    }
}

/// An analysis a scenario can request by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    /// Randomized projection-axiom verification on the scenario's space
    /// and partition.
    CeVerify,
    /// Fiber-mass upper bound, search lower bound, and (at p = 2) the
    /// exact spectral norm.
    Norms,
    /// Power-norm sweep of the constant-one function; writes `orbit.csv`.
    Orbit,
    /// Necessary-side decay quantities along each schedule.
    NecessaryQuantities,
    /// Sufficient-side decay quantities plus hypothesis flags.
    SufficientQuantities,
    /// Three-bullet criterion check over a small measurable net.
    KitaiCheck,
    /// Sufficient-side quantities along the full sequence `n = 1, 2, …`.
    TopmixQuantities,
}

impl Analysis {
    /// Every analysis, in documentation order.
    pub const ALL: [Analysis; 7] = [
        Analysis::CeVerify,
        Analysis::Norms,
        Analysis::Orbit,
        Analysis::NecessaryQuantities,
        Analysis::SufficientQuantities,
        Analysis::KitaiCheck,
        Analysis::TopmixQuantities,
    ];

    /// The scenario-file name of this analysis.
    pub fn name(self) -> &'static str {
        match self {
            Analysis::CeVerify => "ce_verify",
            Analysis::Norms => "norms",
            Analysis::Orbit => "orbit",
            Analysis::NecessaryQuantities => "necessary_quantities",
            Analysis::SufficientQuantities => "sufficient_quantities",
            Analysis::KitaiCheck => "kitai_check",
            Analysis::TopmixQuantities => "topmix_quantities",
        }
    }

    /// Parses a scenario-file analysis name.
    pub fn parse(s: &str) -> Result<Analysis> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Analysis::ALL.iter().map(|a| a.name()).collect();
                Error::Scenario(format!(
                    "unknown analysis '{s}' (expected one of: {})",
                    known.join(", ")
                ))
            })
    }

    /// Whether this analysis consumes the scenario's schedules.
    pub fn needs_schedule(self) -> bool {
        matches!(
            self,
            Analysis::NecessaryQuantities
                | Analysis::SufficientQuantities
                | Analysis::KitaiCheck
                | Analysis::TopmixQuantities
        )
    }
}

/// A scenario resolved into live objects, ready to run.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    /// The operator under study.
    pub operator: ConditionalWCO,
    /// Resolved schedules, in document order.
    pub schedules: Vec<CriterionSchedule>,
    /// Parsed analysis list, in document order.
    pub analyses: Vec<Analysis>,
    /// The document's own sweep cap, if any.
    pub horizon: Option<usize>,
}

/// Resolves every id reference, validates all cross-references, and
/// builds the operator. Every failure names the offending section and
/// atom.
pub fn compile(spec: &ScenarioSpec) -> Result<CompiledScenario> {
    let space = FiniteMeasureSpace::new(spec.space.ids.clone(), spec.space.weights.clone())
        .map_err(|e| Error::Scenario(format!("space: {e}")))?;
    let resolve = |section: String, id: &str| -> Result<usize> {
        space
            .index_of(id)
            .ok_or_else(|| Error::Scenario(format!("{section}: unknown atom id '{id}'")))
    };
    let resolve_set = |section: &str, ids: &[String]| -> Result<AtomSet> {
        ids.iter().map(|id| resolve(section.to_string(), id)).collect()
    };

    if spec.phi.len() != space.len() {
        return Err(Error::Scenario(format!(
            "phi: expected {} entries (one per atom), got {}",
            space.len(),
            spec.phi.len()
        )));
    }
    let image = spec
        .phi
        .iter()
        .enumerate()
        .map(|(i, id)| resolve(format!("phi[{i}]"), id))
        .collect::<Result<Vec<usize>>>()?;
    let phi = Transformation::new(image).map_err(|e| Error::Scenario(format!("phi: {e}")))?;

    let blocks = spec
        .partition
        .iter()
        .enumerate()
        .map(|(b, ids)| {
            ids.iter()
                .map(|id| resolve(format!("partition[{b}]"), id))
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    let a = Partition::new(space.len(), blocks)
        .map_err(|e| Error::Scenario(format!("partition: {e}")))?;

    if spec.u.len() != space.len() {
        return Err(Error::Scenario(format!(
            "u: expected {} values, got {}",
            space.len(),
            spec.u.len()
        )));
    }
    let u = MeasFn::new(spec.u.clone()).map_err(|e| Error::Scenario(format!("u: {e}")))?;

    let mut schedules = Vec::with_capacity(spec.schedules.len());
    for (i, s) in spec.schedules.iter().enumerate() {
        let f_set = resolve_set(&format!("schedules[{i}].f"), &s.f)?;
        let v_sets = s
            .v
            .iter()
            .enumerate()
            .map(|(k, ids)| resolve_set(&format!("schedules[{i}].v[{k}]"), ids))
            .collect::<Result<Vec<AtomSet>>>()?;
        let sched = CriterionSchedule::new(f_set, s.n.clone(), v_sets)
            .map_err(|e| Error::Scenario(format!("schedules[{i}]: {e}")))?;
        schedules.push(sched);
    }

    let analyses = spec
        .analyses
        .iter()
        .map(|s| Analysis::parse(s))
        .collect::<Result<Vec<Analysis>>>()?;
    for an in &analyses {
        if an.needs_schedule() && schedules.is_empty() {
            return Err(Error::Scenario(format!(
                "analysis '{}' needs at least one schedule",
                an.name()
            )));
        }
    }

    let operator = ConditionalWCO::new(space, a, phi, u, spec.p)
        .map_err(|e| Error::Scenario(format!("operator: {e}")))?;
    Ok(CompiledScenario { operator, schedules, analyses, horizon: spec.horizon })
}

/// Distinguishes findings (recorded in the summary, run continues) from
/// hard failures (abort). Domain-level refusals are findings; anything
/// about the document, the filesystem, or internal consistency is hard.
fn record_or_raise(e: Error) -> Result<Value> {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Scenario(_) | Error::InvalidInput(_) => Err(e),
        other => Ok(json!({ "error": other.to_string() })),
    }
}

/// Restricts a schedule to the steps with `n_k ≤ horizon`.
fn capped_schedule(sched: &CriterionSchedule, horizon: usize) -> Result<CriterionSchedule> {
    if sched.max_n() <= horizon {
        return Ok(sched.clone());
    }
    let mut n = Vec::new();
    let mut v = Vec::new();
    for (k, &n_k) in sched.n().iter().enumerate() {
        if n_k <= horizon {
            n.push(n_k);
            v.push(sched.v(k).clone());
        }
    }
    if n.is_empty() {
        return Err(Error::Unsupported(format!(
            "every scheduled exponent exceeds the horizon {horizon}"
        )));
    }
    CriterionSchedule::new(sched.f_set().clone(), n, v)
}

/// The `{verdict, rate1, rate2, hypothesis_flags}` summary entry of a
/// decay report; the flags gain a derived `all_pass` field.
fn decay_summary(report: &DecayReport) -> Value {
    let flags = match &report.hypotheses {
        None => Value::Null,
        Some(h) => {
            let mut v = serde_json::to_value(h).expect("hypothesis reports serialize");
            v.as_object_mut()
                .expect("hypothesis report is an object")
                .insert("all_pass".to_string(), json!(h.all_pass()));
            v
        }
    };
    json!({
        "verdict": report.verdict,
        "rate1": report.rate1.rate,
        "rate2": report.rate2.rate,
        "hypothesis_flags": flags,
    })
}

/// The shared `{0, ±χ_B}` net over the partition blocks lying inside `F`.
pub fn schedule_net(t: &ConditionalWCO, sched: &CriterionSchedule) -> Result<Vec<MeasFn>> {
    let a = t.partition();
    let f = sched.f_set();
    let blocks: Vec<usize> = (0..a.block_count())
        .filter(|&b| a.block(b).iter().all(|x| f.contains(x)))
        .collect();
    simple_net_on_blocks(a, &blocks, &[-1.0, 0.0, 1.0], 1, NET_CAP)
}

/// Key for per-schedule outputs: the first schedule keeps the bare name,
/// later ones get an `_s<i>` suffix.
fn schedule_key(name: &str, i: usize) -> String {
    if i == 0 {
        name.to_string()
    } else {
        format!("{name}_s{i}")
    }
}

/// Executes the scenario's analyses in declared order, writing CSV
/// artifacts and a canonical `summary.json` into `out_dir`, and returns
/// the summary value.
///
/// Randomized analyses draw from a stream seeded by `seed` plus the
/// analysis position, so runs are reproducible and insertion-order
/// independent. `horizon_cap` (the CLI flag) bounds every sweep; a
/// scenario's own `horizon` may lower it further. Per-analysis findings —
/// unsupported transformations, zero divisors, schedule/horizon
/// mismatches — land in the summary under an `"error"` key; the run keeps
/// going and still exits successfully.
pub fn run_scenario(
    spec: &ScenarioSpec,
    out_dir: &Path,
    seed: u64,
    horizon_cap: usize,
) -> Result<Value> {
    let compiled = compile(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let t = &compiled.operator;
    let horizon = compiled.horizon.unwrap_or(horizon_cap).min(horizon_cap);
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }

    let mut entries = Map::new();
    for (idx, an) in compiled.analyses.iter().enumerate() {
        let mut rng = rng_from_seed(seed.wrapping_add(idx as u64));
        match an {
            Analysis::CeVerify => {
                let report = verify_ce_axioms(t.space(), t.partition(), CE_SAMPLES, &mut rng);
                entries.insert(
                    an.name().to_string(),
                    json!({
                        "all_pass": report.all_passed(),
                        "worst": report.worst_violation(),
                        "samples": report.sample_count,
                        "checks": serde_json::to_value(&report.checks)?,
                    }),
                );
            }
            Analysis::Norms => {
                let entry = match t.bound_j() {
                    Ok((_, upper)) => {
                        let lower = t.norm_lower_bound(NORM_TRIALS, &mut rng);
                        let spectral = if t.p() == 2.0 {
                            match t.p2_norm_exact() {
                                Ok(s) => json!(s),
                                Err(e) => json!({ "error": e.to_string() }),
                            }
                        } else {
                            Value::Null
                        };
                        json!({
                            "fiber_upper": upper,
                            "lower_bound": lower,
                            "spectral_p2": spectral,
                        })
                    }
                    Err(e) => record_or_raise(e)?,
                };
                entries.insert(an.name().to_string(), entry);
            }
            Analysis::Orbit => {
                let one = MeasFn::constant(1.0, t.space().len())
                    .expect("the constant one is a valid function");
                let orb = orbit(t, &one, horizon);
                std::fs::write(out_dir.join("orbit.csv"), orb.to_csv())?;
                let max_norm = orb.norms.iter().copied().fold(0.0f64, f64::max);
                entries.insert(
                    an.name().to_string(),
                    json!({
                        "final_norm": orb.norms.last().copied().unwrap_or(0.0),
                        "max_norm": max_norm,
                        "n_max": horizon,
                    }),
                );
            }
            Analysis::NecessaryQuantities
            | Analysis::SufficientQuantities
            | Analysis::TopmixQuantities => {
                for (i, sched) in compiled.schedules.iter().enumerate() {
                    let key = schedule_key(an.name(), i);
                    let outcome = capped_schedule(sched, horizon).and_then(|capped| match an {
                        Analysis::NecessaryQuantities => necessary_quantities(t, &capped),
                        Analysis::SufficientQuantities => sufficient_quantities(t, &capped),
                        Analysis::TopmixQuantities => {
                            topmix_quantities(t, capped.f_set(), horizon)
                        }
                        _ => unreachable!("outer match restricts to decay analyses"),
                    });
                    let entry = match outcome {
                        Ok(report) => {
                            std::fs::write(
                                out_dir.join(format!("decay_{key}.csv")),
                                report.to_csv(),
                            )?;
                            decay_summary(&report)
                        }
                        Err(e) => record_or_raise(e)?,
                    };
                    entries.insert(key, entry);
                }
            }
            Analysis::KitaiCheck => {
                for (i, sched) in compiled.schedules.iter().enumerate() {
                    let key = schedule_key(an.name(), i);
                    let outcome = capped_schedule(sched, horizon)
                        .and_then(|capped| Ok((schedule_net(t, &capped)?, capped)));
                    let entry = match outcome {
                        Ok((net, capped)) => {
                            let report = kitai_check(t, &net, &capped);
                            std::fs::write(
                                out_dir.join(format!("{key}.csv")),
                                report.to_csv(),
                            )?;
                            json!({
                                "net_size": report.net_size,
                                "verdict": report.verdict,
                                "violations": report.violations.len(),
                            })
                        }
                        Err(e) => record_or_raise(e)?,
                    };
                    entries.insert(key, entry);
                }
            }
        }
    }

    let summary = json!({
        "analyses": Value::Object(entries),
        "horizon": horizon,
        "p": t.p(),
        "seed": seed,
        "space_atoms": t.space().len(),
        "total_mass": t.space().total_mass(),
        "valid": t.is_valid(),
    });
    let mut text = canonical_json(&summary);
    text.push('\n');
    std::fs::write(out_dir.join("summary.json"), text)?;
    Ok(summary)
}

/// Parameters of the drifting-line discretization.
#[derive(Debug, Clone, Copy)]
pub struct LineExampleParams {
    /// Atoms per half-line; the grid covers `(−L, L)` with `L = half_atoms·delta`.
    pub half_atoms: usize,
    /// Grid step `δ > 0`; atoms sit at `±(j − ½)δ` with weight `δ`.
    pub delta: f64,
    /// Drift per application; must be an integer multiple of `δ`.
    pub t: f64,
    /// Weight-shape parameter, `r > 1`.
    pub r: f64,
    /// Norm exponent.
    pub p: f64,
    /// Radius of the reference set `F = [−a, a]`.
    pub a: f64,
    /// Number of schedule steps; `n_k = k` for `k = 1..=k_max`.
    pub k_max: usize,
}

impl Default for LineExampleParams {
    fn default() -> Self {
        LineExampleParams {
            half_atoms: 4096,
            delta: 0.0625,
            t: 1.0,
            r: 2.0,
            p: 2.0,
            a: 1.0,
            k_max: 20,
        }
    }
}

/// One grid atom's block-averaged weight next to the simple piecewise
/// model `(r; 2 − x²/2; 1/r)`, with the absolute deviation. The model is
/// shipped for comparison precisely because it does **not** match the
/// computed average — the deviation column quantifies by how much.
#[derive(Debug, Clone, Copy)]
pub struct EuTableRow {
    /// Atom coordinate.
    pub x: f64,
    /// `E(u | A)` at this atom, computed from the pair average.
    pub even_part: f64,
    /// The piecewise model value at `x`.
    pub piecewise_model: f64,
    /// `|even_part − piecewise_model|`.
    pub abs_dev: f64,
}

/// CSV rendering of the block-average comparison table.
pub fn eu_table_csv(rows: &[EuTableRow]) -> String {
    let mut out = String::from("x,even_part,piecewise_model,abs_dev\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_g17(r.x),
            format_g17(r.even_part),
            format_g17(r.piecewise_model),
            format_g17(r.abs_dev)
        ));
    }
    out
}

/// A built line example: the scenario document plus the block-average
/// comparison table.
#[derive(Debug, Clone)]
pub struct LineExample {
    /// Ready-to-run scenario.
    pub spec: ScenarioSpec,
    /// Per-atom comparison rows, in atom order.
    pub eu_rows: Vec<EuTableRow>,
}

/// The three-piece weight: `2x + r` for `x ≥ 1`, `x³ + 1/r` for
/// `x ≤ −1`, and `−x² − x/2 + 2` between.
pub fn line_weight(x: f64, r: f64) -> f64 {
    if x >= 1.0 {
        2.0 * x + r
    } else if x <= -1.0 {
        x * x * x + 1.0 / r
    } else {
        -x * x - x / 2.0 + 2.0
    }
}

/// The piecewise comparison model: `r` for `x ≥ 1`, `1/r` for `x ≤ −1`,
/// `2 − x²/2` between.
pub fn line_model(x: f64, r: f64) -> f64 {
    if x >= 1.0 {
        r
    } else if x <= -1.0 {
        1.0 / r
    } else {
        2.0 - x * x / 2.0
    }
}

/// Discretizes the drifting line: midpoint atoms `±(j−½)δ` with uniform
/// weight `δ`, mirror-pair partition, right shift by `t/δ` cells with the
/// right edge absorbing, the three-piece weight sampled at midpoints, and
/// a schedule with `F = [−a, a]`, `n_k = k`, and `V_k` the pairs strictly
/// inside radius `a − 1/k` whose forward orbits stay in the window and
/// meet no exact zero of the averaged weight.
///
/// Fails when `t` is not an integer multiple of `δ` or when the window
/// cannot contain `F` drifted `k_max` times (the error names the needed
/// half-width).
pub fn build_line_example(params: &LineExampleParams) -> Result<LineExample> {
    let LineExampleParams { half_atoms, delta, t, r, p, a, k_max } = *params;
    if half_atoms < 2 {
        return Err(Error::InvalidInput("need at least two atoms per half-line".into()));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {delta}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(format!("drift must be positive, got {t}")));
    }
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::InvalidInput(format!("weight parameter must exceed 1, got {r}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidInput(format!("reference radius must be positive, got {a}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidInput("need at least one schedule step".into()));
    }
    let s_real = t / delta;
    let s = s_real.round();
    if (s_real - s).abs() > 1e-9 * s_real.max(1.0) || s < 1.0 {
        return Err(Error::InvalidInput(format!(
            "drift must be a whole number of grid cells, got t/delta = {s_real}"
        )));
    }
    let s = s as usize;
    let big_l = half_atoms as f64 * delta;
    let needed = a + k_max as f64 * t;
    if needed > big_l {
        return Err(Error::InvalidInput(format!(
            "window half-width {big_l} too small: the schedule needs at least {needed} \
             (reference radius plus {k_max} drifts); increase the atom count or the step"
        )));
    }

    let total = 2 * half_atoms;
    let positions: Vec<f64> = (0..total)
        .map(|i| (2 * (i as i64 - half_atoms as i64) + 1) as f64 * (delta / 2.0))
        .collect();
    let ids: Vec<String> = positions.iter().map(|&x| format_g17(x)).collect();
    let space = FiniteMeasureSpace::new(ids.clone(), vec![delta; total])?;
    let u_vals: Vec<f64> = positions.iter().map(|&x| line_weight(x, r)).collect();
    let u = MeasFn::new(u_vals.clone())?;
    let blocks: Vec<Vec<usize>> = (0..half_atoms).map(|i| vec![i, total - 1 - i]).collect();
    let a_part = Partition::new(total, blocks.clone())?;
    let image: Vec<usize> = (0..total).map(|i| (i + s).min(total - 1)).collect();
    let eu = cond_exp(&u, &a_part, &space);

    let f_atoms: Vec<usize> = (0..total).filter(|&i| positions[i].abs() <= a).collect();
    let mut n_list = Vec::with_capacity(k_max);
    let mut v_lists = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let cutoff = a - 1.0 / k as f64;
        let reach = k as f64 * t;
        let mut v_ids = Vec::new();
        for i in 0..half_atoms {
            let hi = total - 1 - i;
            let radius = positions[hi];
            if !(radius < cutoff && radius + reach <= big_l) {
                continue;
            }
            let orbit_zero_free = [i, hi].iter().all(|&start| {
                let mut cur = start;
                (0..k).all(|_| {
                    let ok = eu.get(cur) != 0.0;
                    cur = (cur + s).min(total - 1);
                    ok
                })
            });
            if orbit_zero_free {
                v_ids.push(ids[i].clone());
                v_ids.push(ids[hi].clone());
            }
        }
        n_list.push(k);
        v_lists.push(v_ids);
    }

    let spec = ScenarioSpec {
        analyses: vec!["sufficient_quantities".to_string(), "kitai_check".to_string()],
        horizon: None,
        p,
        partition: blocks
            .iter()
            .map(|b| b.iter().map(|&i| ids[i].clone()).collect())
            .collect(),
        phi: image.iter().map(|&j| ids[j].clone()).collect(),
        schedules: vec![ScheduleSpec {
            f: f_atoms.iter().map(|&i| ids[i].clone()).collect(),
            n: n_list,
            v: v_lists,
        }],
        u: u_vals,
        space: SpaceSpec { ids, weights: vec![delta; total] },
    };

    let eu_rows: Vec<EuTableRow> = (0..total)
        .map(|i| {
            let x = positions[i];
            let even_part = eu.get(i);
            let piecewise_model = line_model(x, r);
            EuTableRow { x, even_part, piecewise_model, abs_dev: (even_part - piecewise_model).abs() }
        })
        .collect();

    Ok(LineExample { spec, eu_rows })
}
