//! Command-line front end: validate and run scenario documents, generate
//! the bundled drifting-line example, and query single reports.
//!
//! Exit status reflects hard errors only — unreadable files, malformed
//! documents, broken references, I/O failures. Analysis verdicts (stalls,
//! violations, unsupported instances) are findings printed and recorded
//! in `summary.json`, and the process still exits 0.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use cwco::conditional::verify_ce_axioms;
use cwco::sampling::rng_from_seed;
use cwco::scenarios::{
    build_line_example, canonical_json, compile, eu_table_csv, format_g17, run_scenario,
    LineExampleParams, ScenarioSpec,
};
use cwco::Result;

/// Conditional weighted composition operators on finite atomic measure
/// spaces: scenario runner and report tool.
#[derive(Debug, Parser)]
#[command(name = "cwco", version, about)]
struct Cli {
    /// Seed for every randomized sampling step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Cap on every exponent sweep (orbits, schedules, full sequences).
    #[arg(long, global = true, default_value_t = 200)]
    horizon: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a scenario document and resolve every reference.
    Validate {
        /// Scenario document (canonical JSON).
        file: PathBuf,
    },
    /// Run a scenario's analyses and write CSV/JSON reports.
    Run {
        /// Scenario document (canonical JSON).
        file: PathBuf,
        /// Directory for the report artifacts.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the drifting-line scenario and its block-average
    /// comparison table.
    LineExample {
        /// Atoms per half-line.
        #[arg(long = "N", default_value_t = 4096)]
        n: usize,
        /// Grid step δ.
        #[arg(long, default_value_t = 0.0625)]
        delta: f64,
        /// Drift per application (an integer multiple of δ).
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Weight-shape parameter (> 1).
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        /// Norm exponent.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Radius of the reference set F = [−a, a].
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Schedule steps (n_k = k).
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        /// Directory for scenario.json and eu_table_comparison.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the projection axioms on a scenario's space and partition.
    CeVerify {
        /// Scenario document (canonical JSON).
        file: PathBuf,
        /// Random function samples to draw.
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Report norm bounds for a scenario's operator.
    Norms {
        /// Scenario document (canonical JSON).
        file: PathBuf,
        /// Candidate functions for the lower-bound search.
        #[arg(long, default_value_t = 64)]
        trials: usize,
        /// Also write the dense operator matrix (row-major text) here.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

/// Prints to stdout, treating a closed pipe as a normal early exit.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let outcome = out.write_all(text.as_bytes()).and_then(|()| out.write_all(b"\n"));
    if let Err(e) = outcome {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn load(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)?;
    ScenarioSpec::from_json(&text)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { file } => {
            let spec = load(&file)?;
            let compiled = compile(&spec)?;
            let t = &compiled.operator;
            emit(&format!(
                "ok: {} atoms ({} positive), {} blocks, p = {}, {} schedule(s), \
                 {} analysis step(s), pullback-invariant = {}",
                t.space().len(),
                t.space().positive_atoms().count(),
                t.partition().block_count(),
                format_g17(t.p()),
                compiled.schedules.len(),
                compiled.analyses.len(),
                t.is_valid()
            ));
        }
        Command::Run { file, out } => {
            let spec = load(&file)?;
            let summary = run_scenario(&spec, &out, cli.seed, cli.horizon)?;
            if let Some(entries) = summary["analyses"].as_object() {
                for (name, entry) in entries {
                    emit(&format!("{name}: {}", describe(entry)));
                }
            }
            emit(&format!("wrote {}", out.join("summary.json").display()));
        }
        Command::LineExample { n, delta, t, r, p, a, kmax, out } => {
            let params = LineExampleParams {
                half_atoms: n,
                delta,
                t,
                r,
                p,
                a,
                k_max: kmax,
            };
            let line = build_line_example(&params)?;
            std::fs::create_dir_all(&out)?;
            let scenario_path = out.join("scenario.json");
            std::fs::write(&scenario_path, line.spec.to_canonical_json())?;
            let table_path = out.join("eu_table_comparison.csv");
            std::fs::write(&table_path, eu_table_csv(&line.eu_rows))?;
            let worst = line.eu_rows.iter().fold(0.0f64, |m, r| m.max(r.abs_dev));
            emit(&format!("wrote {}", scenario_path.display()));
            emit(&format!("wrote {}", table_path.display()));
            emit(&format!(
                "block average vs piecewise model: worst |deviation| = {}",
                format_g17(worst)
            ));
        }
        Command::CeVerify { file, samples } => {
            let spec = load(&file)?;
            let compiled = compile(&spec)?;
            let t = &compiled.operator;
            let mut rng = rng_from_seed(cli.seed);
            let report = verify_ce_axioms(t.space(), t.partition(), samples, &mut rng);
            let value = json!({
                "all_pass": report.all_passed(),
                "worst": report.worst_violation(),
                "samples": report.sample_count,
                "checks": serde_json::to_value(&report.checks)?,
            });
            emit(&canonical_json(&value));
        }
        Command::Norms { file, trials, matrix } => {
            let spec = load(&file)?;
            let compiled = compile(&spec)?;
            let t = &compiled.operator;
            if let Some(path) = matrix {
                std::fs::write(&path, matrix_text(t))?;
                emit(&format!("wrote {}", path.display()));
            }
            let value = match t.bound_j() {
                Ok((_, upper)) => {
                    let mut rng = rng_from_seed(cli.seed);
                    let lower = t.norm_lower_bound(trials, &mut rng);
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
                Err(e) => json!({ "error": e.to_string() }),
            };
            emit(&canonical_json(&value));
        }
    }
    Ok(())
}

/// Dense row-major text form of the operator matrix, one row per line.
fn matrix_text(t: &cwco::operators::ConditionalWCO) -> String {
    let m = t.matrix();
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&format_g17(m[(r, c)]));
        }
        out.push('\n');
    }
    out
}

/// One-line rendering of a summary entry.
fn describe(entry: &Value) -> String {
    if let Some(msg) = entry["error"].as_str() {
        return format!("error — {msg}");
    }
    if entry.get("verdict").is_some() && entry.get("net_size").is_some() {
        return format!(
            "{} (net {}, {} violation(s))",
            verdict_text(&entry["verdict"]),
            entry["net_size"],
            entry["violations"]
        );
    }
    if entry.get("verdict").is_some() {
        return format!(
            "verdict {}; rate1 {}, rate2 {}",
            verdict_text(&entry["verdict"]),
            rate_text(&entry["rate1"]),
            rate_text(&entry["rate2"])
        );
    }
    if entry.get("all_pass").is_some() {
        return format!("all_pass {}, worst {}", entry["all_pass"], entry["worst"]);
    }
    if entry.get("fiber_upper").is_some() {
        return format!(
            "upper {}, lower {}, spectral {}",
            entry["fiber_upper"], entry["lower_bound"], entry["spectral_p2"]
        );
    }
    if entry.get("final_norm").is_some() {
        return format!("final norm {}, max {}", entry["final_norm"], entry["max_norm"]);
    }
    serde_json::to_string(entry).unwrap_or_else(|_| "<unprintable>".to_string())
}

/// Compact text for a verdict value (a string or a tagged variant).
fn verdict_text(v: &Value) -> String {
    if let Some(s) = v.as_str() {
        return s.to_string();
    }
    if let Some(obj) = v.as_object() {
        if let Some(k) = obj.get("undefined_at") {
            return format!("undefined-at {k}");
        }
        if let Some(viol) = obj.get("violated") {
            return format!(
                "violated (bullet {}: {})",
                viol["bullet"],
                viol["witness"].as_str().unwrap_or("?")
            );
        }
    }
    v.to_string()
}

/// Fitted rate or a dash when no fit exists.
fn rate_text(v: &Value) -> String {
    v.as_f64().map_or_else(|| "—".to_string(), format_g17)
}
