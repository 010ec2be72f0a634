//! Result files: `fields/*.csv`, `trace.csv`, `sweep.csv`, `gradcheck.txt` and `summary.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adjoint::GradCheckReport;
use crate::config::RunConfig;
use crate::discrete::io::field_csv;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::optimize::OptimizationTrace;
use crate::real::Real;
use crate::run::{Device, OptimizeOutcome, SolveOutcome};
use crate::state::StateTriple;
use crate::sweep::SweepReport;

/// What a run produced.
#[derive(Clone, Copy, Debug)]
pub enum RunResults<'a, T> {
    Solve(&'a SolveOutcome<T>),
    Optimize(&'a OptimizeOutcome<T>),
    Sweep(&'a SweepReport<T>),
    GradCheck(&'a GradCheckReport),
}

impl<T> RunResults<'_, T> {
    pub fn command(&self) -> &'static str {
        match self {
            RunResults::Solve(_) => "solve",
            RunResults::Optimize(_) => "optimize",
            RunResults::Sweep(_) => "sweep",
            RunResults::GradCheck(_) => "gradcheck",
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn num<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

fn opt<T: Real>(x: Option<T>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

/// Trace as CSV; the `seconds` column is `nan` unless timing is recorded.
pub fn trace_csv<T: Real>(trace: &OptimizationTrace<T>, record_timing: bool) -> String {
    let mut s = String::from("k,cost,grad_norm,alpha,current,seconds\n");
    for r in &trace.records {
        let secs = if record_timing { format!("{:.6e}", r.seconds) } else { "nan".into() };
        let _ = writeln!(s, "{},{},{},{},{},{}", r.k, num(r.cost), num(r.grad_norm), num(r.alpha), opt(r.current), secs);
    }
    s
}

/// One line per ladder row and one for the classical baseline.
pub fn sweep_csv<T: Real>(report: &SweepReport<T>) -> String {
    let mut s = String::from("label,epsilon2,cost,dist_c,dist_n,dist_s,cost_gap,iterations,reason,min_rho,max_rho,peak_current,current,status\n");
    for row in &report.rows {
        let _ = write!(s, "{},{},", row.label(), num(row.eps2));
        match (&row.outcome, &row.distances) {
            (Ok(run), Some(d)) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},ok",
                    num(run.cost),
                    num(d.c),
                    num(d.n),
                    num(d.s),
                    num(d.cost_gap),
                    run.iterations,
                    run.reason,
                    num(run.min_rho()),
                    num(run.max_rho()),
                    num(run.peak_current),
                    opt(run.current),
                );
            }
            (outcome, _) => {
                let msg = outcome.as_ref().err().map_or("missing distances".to_string(), |e| e.replace([',', '\n'], ";"));
                let _ = writeln!(s, "nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,failed: {msg}");
            }
        }
    }
    s
}

/// Flattens the config into `config.section.key: value` lines.
fn config_echo(cfg: &RunConfig) -> String {
    fn walk(prefix: &str, v: &toml::Value, out: &mut String) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    walk(&format!("{prefix}.{k}"), v, out);
                }
            }
            toml::Value::Array(a) if a.iter().any(|x| x.is_table()) => {
                for (i, v) in a.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), v, out);
                }
            }
            other => {
                let _ = writeln!(out, "{prefix}: {other}");
            }
        }
    }
    let value = toml::Value::try_from(cfg).expect("config converts to a TOML value");
    let mut out = String::new();
    walk("config", &value, &mut out);
    out
}

fn fields_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join("fields");
    fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    Ok(dir)
}

fn dump_state<T: Real>(dir: &Path, mesh: &Mesh<T>, prefix: &str, state: &StateTriple<T>, c: &[T]) -> Result<()> {
    let density: Vec<T> = state.rho.iter().map(|&r| r * r).collect();
    for (name, values) in [("rho", &state.rho[..]), ("n", &density[..]), ("v", &state.v[..]), ("s", &state.s[..]), ("c", c)] {
        write(&dir.join(format!("{prefix}{name}.csv")), &field_csv(mesh, values))?;
    }
    Ok(())
}

/// Writes the deterministic file set of a run into `out`.
pub fn emit_results<T: Real>(out: &Path, cfg: &RunConfig, dev: &Device<T>, results: RunResults<'_, T>) -> Result<()> {
    fs::create_dir_all(out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
    let mut summary = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(summary, "{k}: {v}");
    };
    kv("command", results.command().into());
    kv("grid", format!("{}x{}", dev.mesh.nx, dev.mesh.ny));
    kv("epsilon2", num(dev.phys.eps2));
    match results {
        RunResults::Solve(s) => {
            let dir = fields_dir(out)?;
            dump_state(&dir, &dev.mesh, "", &s.state, &dev.profile.c)?;
            kv("iterations", s.state.iterations.to_string());
            kv("residual", num(s.state.residual));
            for (name, i) in &s.currents {
                kv(&format!("current_{name}"), num(*i));
            }
            kv("peak_current_density", num(s.peak_current));
            kv("min_rho", num(s.state.rho.min()));
            kv("max_rho", num(s.state.rho.max()));
        }
        RunResults::Optimize(o) => {
            let dir = fields_dir(out)?;
            dump_state(&dir, &dev.mesh, "ref_", &o.reference, &dev.profile.c)?;
            dump_state(&dir, &dev.mesh, "opt_", &o.trace.state, &o.trace.c)?;
            write(&out.join("trace.csv"), &trace_csv(&o.trace, cfg.output.record_timing))?;
            kv("iterations", o.trace.iterations().to_string());
            kv("terminal_reason", o.trace.reason.to_string());
            if let crate::optimize::TerminalReason::LineSearchFailure(msg) = &o.trace.reason {
                kv("line_search", msg.clone());
            }
            kv("cost_initial", num(o.trace.records[0].cost));
            kv("cost_final", num(o.trace.final_cost()));
            kv("current_reference", opt(o.current_ref));
            kv("current_optimized", opt(o.current_opt));
            if let crate::adjoint::CostKind::CurrentTracking { target, .. } = &o.cost.kind {
                kv("current_target", num(*target));
            }
            kv("peak_current_density_reference", num(o.peak_ref));
            kv("peak_current_density_optimized", num(o.peak_opt));
        }
        RunResults::Sweep(r) => {
            let dir = fields_dir(out)?;
            for row in &r.rows {
                if let Ok(run) = &row.outcome {
                    dump_state(&dir, &dev.mesh, &format!("{}_", row.label()), &run.state, &run.c)?;
                }
            }
            write(&out.join("sweep.csv"), &sweep_csv(r))?;
            kv("rows", r.rows.len().to_string());
            kv("failed_rows", r.rows.iter().filter(|x| x.outcome.is_err()).count().to_string());
            for row in &r.rows {
                if let Ok(run) = &row.outcome {
                    kv(&format!("{}_cost", row.label()), num(run.cost));
                    kv(&format!("{}_iterations", row.label()), run.iterations.to_string());
                    kv(&format!("{}_peak_current_density", row.label()), num(run.peak_current));
                    kv(&format!("{}_current", row.label()), opt(run.current));
                }
            }
        }
        RunResults::GradCheck(g) => {
            write(&out.join("gradcheck.txt"), &g.to_string())?;
            kv("directions", g.best_errors().len().to_string());
            kv("worst_best_rel_error", format!("{:.6e}", g.worst_best_error()));
        }
    }
    summary.push_str(&config_echo(cfg));
    write(&out.join("summary.txt"), &summary)
}
