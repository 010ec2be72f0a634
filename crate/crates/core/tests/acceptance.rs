//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use qdd_core::config::{parse_config, RunConfig};
use qdd_core::discrete::contact_currents;
use qdd_core::output::{emit_results, RunResults};
use qdd_core::run::{run_gradcheck, run_optimize, run_solve, OptimizeOutcome};
use qdd_core::state::{gummel_solve, SolverConfig};
use qdd_core::sweep::{run_epsilon_sweep, SweepReport};
use qdd_core::Device;

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn equilibrium() -> Verdict {
    let su = flat_equilibrium(80);
    let mut worst_res = 0.0f64;
    let mut worst_dev = 0.0f64;
    let mut slowest = 0.0f64;
    for eps2 in [EPS2, 0.0] {
        let t = Instant::now();
        let st = gummel_solve(&su.mesh, &su.profile.c, &su.physics(eps2), &su.bd, &SolverConfig::default(), None).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        worst_res = worst_res.max(st.residual);
        let dev = st.rho.iter().map(|r| (r - 1.0).abs()).fold(st.v.max_abs().max(st.s.max_abs()), f64::max);
        worst_dev = worst_dev.max(dev);
    }
    verdict(
        worst_res <= 1e-10 && worst_dev <= 1e-10 && slowest < 1.0,
        format!("residual {worst_res:.2e}, |state - (1,0,0)| {worst_dev:.2e}, slowest solve {slowest:.3} s"),
    )
}

fn manufactured_order() -> Verdict {
    let e: Vec<(f64, f64)> = [20, 40, 80].iter().map(|&n| manufactured_error(n)).collect();
    let orders: Vec<f64> = e.windows(2).map(|w| (w[0].0 / w[1].0).ln() / (w[0].1 / w[1].1).ln()).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(min >= 1.9, format!("errors {:.3e} {:.3e} {:.3e}, observed orders {:.3} {:.3}", e[0].0, e[1].0, e[2].0, orders[0], orders[1]))
}

fn conservation(dev: &Device, opt: &OptimizeOutcome<f64>) -> Verdict {
    let currents = contact_currents(&dev.mesh, &opt.reference.rho, &opt.reference.s).unwrap();
    let sum: f64 = currents.iter().map(|(_, i)| i).sum();
    let scale = currents.iter().map(|(_, i)| i.abs()).fold(0.0, f64::max);
    let rel = sum.abs() / scale;
    verdict(rel <= 1e-8, format!("|sum I| / max|I| = {rel:.2e}, currents {currents:?}"))
}

fn gradient_check() -> Verdict {
    let mut cfg = config("mesfet.cfg");
    cfg.apply_overrides(Some(20), None).unwrap();
    let t = Instant::now();
    let (_, rep) = run_gradcheck::<f64>(&cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let worst = rep.worst_best_error();
    let n = rep.best_errors().len();
    verdict(worst <= 1e-4 && n == 5 && secs < 120.0, format!("{n} directions, worst best relative error {worst:.2e}, {secs:.1} s"))
}

fn optimization(dev: &Device, opt: &OptimizeOutcome<f64>) -> Verdict {
    let tr = &opt.trace;
    let decreasing = tr.records.windows(2).all(|w| w[1].cost < w[0].cost);
    let target = match opt.cost.kind {
        qdd_core::adjoint::CostKind::CurrentTracking { target, .. } => target,
        _ => unreachable!("mesfet.cfg tracks a current"),
    };
    let (i_ref, i_opt) = (opt.current_ref.unwrap(), opt.current_opt.unwrap());
    let closed = (i_opt - target).abs() < 0.5 * (i_ref - target).abs();

    let m = &dev.mesh;
    let in_nplus = |p: usize| dev.geometry.nplus_regions.iter().any(|r| r.contains(m.x(p), m.y(p)));
    let rel: Vec<f64> = (0..m.len()).map(|p| (tr.c[p] - dev.profile.c[p]) / dev.profile.c[p]).collect();
    let argmax = (0..m.len()).max_by(|&a, &b| rel[a].total_cmp(&rel[b])).unwrap();
    let channel_peak = !in_nplus(argmax) && rel[argmax] > 0.0;
    let nplus_change = (0..m.len()).filter(|&p| in_nplus(p)).map(|p| rel[p].abs()).fold(0.0, f64::max);

    verdict(
        decreasing && closed && channel_peak && nplus_change < 0.25,
        format!(
            "{} steps ({}), strict decrease {decreasing}, I {i_ref:.4e} -> {i_opt:.4e} vs target {target:.4e} (gap {:.1}% closed), \
             max relative increase {:.2e} at ({:.3}, {:.3}) in channel {channel_peak}, max n+ change {nplus_change:.2e}",
            tr.iterations(),
            tr.reason,
            100.0 * (1.0 - (i_opt - target).abs() / (i_ref - target).abs()),
            rel[argmax],
            m.x(argmax),
            m.y(argmax),
        ),
    )
}

fn peak_current(opt: &OptimizeOutcome<f64>) -> Verdict {
    let (a, b) = (opt.peak_ref, opt.peak_opt);
    verdict(
        (0.45..=0.67).contains(&a) && b >= 1.15 * a,
        format!("reference {a:.4}, optimized {b:.4} (ratio {:.4})", b / a),
    )
}

fn semiclassical_limit(rep: &SweepReport<f64>, secs: f64) -> Verdict {
    let mut failures = Vec::new();
    let rows: Vec<_> = rep.ladder().iter().map(|r| (r.outcome.is_ok(), r.distances)).collect();
    if rows.len() != 6 || rows.iter().any(|(ok, d)| !ok || d.is_none()) || rep.baseline().outcome.is_err() {
        return verdict(false, format!("sweep rows failed or missing: {} ladder rows", rows.len()));
    }
    let d: Vec<_> = rows.iter().map(|(_, d)| d.unwrap()).collect();
    let series: [(&str, Vec<f64>); 4] = [
        ("C", d.iter().map(|x| x.c).collect()),
        ("n", d.iter().map(|x| x.n).collect()),
        ("S", d.iter().map(|x| x.s).collect()),
        ("cost", d.iter().map(|x| x.cost_gap).collect()),
    ];
    for (name, v) in &series {
        if v[1..].windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("{name} increases for n >= 1"));
        }
        if v[5] > 0.1 * v[0] {
            failures.push(format!("{name}: n5 {:.2e} > 0.1 * n0 {:.2e}", v[5], v[0]));
        }
    }
    let summary: Vec<String> = series.iter().map(|(name, v)| format!("{name} {:.2e} -> {:.2e}", v[0], v[5])).collect();
    verdict(failures.is_empty() && secs < 1800.0, format!("{} ({secs:.1} s) {}", summary.join(", "), failures.join("; ")))
}

fn uniform_bounds(rep: &SweepReport<f64>) -> Verdict {
    let Ok(dd) = &rep.baseline().outcome else {
        return verdict(false, "classical baseline failed".into());
    };
    let (lo, hi) = (dd.min_rho(), dd.max_rho());
    let mut ok = lo > 0.0;
    let (mut qlo, mut qhi) = (f64::INFINITY, 0.0f64);
    for row in rep.ladder() {
        match &row.outcome {
            Ok(r) => {
                qlo = qlo.min(r.min_rho());
                qhi = qhi.max(r.max_rho());
            }
            Err(_) => ok = false,
        }
    }
    ok &= qlo >= 0.5 * lo && qhi <= 2.0 * hi;
    verdict(ok, format!("classical rho in [{lo:.4e}, {hi:.4e}], quantum rows in [{qlo:.4e}, {qhi:.4e}]"))
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(opt: (&Device, &OptimizeOutcome<f64>), mesfet: &RunConfig, sweep: (&Device, &SweepReport<f64>), sweep_cfg: &RunConfig) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let mut compared = 0;
    let mut differing = Vec::new();
    let mut check = |label: &str, a: &Path, b: &Path| {
        let (fa, fb) = (csv_files(a), csv_files(b));
        compared += fa.len();
        if fa.is_empty() || fa != fb {
            differing.push(label.to_string());
        }
    };

    let eq = config("equilibrium.cfg");
    for run in ["a", "b"] {
        let (dev, res) = run_solve::<f64>(&eq).unwrap();
        emit_results(&dir(&format!("eq_{run}")), &eq, &dev, RunResults::Solve(&res)).unwrap();
    }
    check("equilibrium.cfg", &dir("eq_a"), &dir("eq_b"));

    emit_results(&dir("opt_a"), mesfet, opt.0, RunResults::Optimize(opt.1)).unwrap();
    let (dev, again) = run_optimize::<f64>(mesfet).unwrap();
    emit_results(&dir("opt_b"), mesfet, &dev, RunResults::Optimize(&again)).unwrap();
    check("mesfet.cfg", &dir("opt_a"), &dir("opt_b"));

    emit_results(&dir("sw_a"), sweep_cfg, sweep.0, RunResults::Sweep(sweep.1)).unwrap();
    let (dev, again) = run_epsilon_sweep::<f64>(sweep_cfg).unwrap();
    emit_results(&dir("sw_b"), sweep_cfg, &dev, RunResults::Sweep(&again)).unwrap();
    check("sweep_fast.cfg", &dir("sw_a"), &dir("sw_b"));

    verdict(differing.is_empty(), format!("{compared} CSV files compared across 3 configs, differing: {differing:?}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |k: u32, name: &'static str, v: Verdict| {
        println!("criterion {k} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((k, name, v));
    };

    report(1, "trivial equilibrium", equilibrium());
    report(2, "manufactured-solution order", manufactured_order());

    let mesfet = config("mesfet.cfg");
    let (opt_dev, opt) = run_optimize::<f64>(&mesfet).unwrap();
    report(3, "current conservation", conservation(&opt_dev, &opt));
    report(4, "adjoint gradient check", gradient_check());
    report(5, "optimization behavior", optimization(&opt_dev, &opt));
    report(6, "peak current density", peak_current(&opt));

    let sweep_cfg = config("sweep_fast.cfg");
    let t = Instant::now();
    let (sweep_dev, sweep) = run_epsilon_sweep::<f64>(&sweep_cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    report(7, "semiclassical limit", semiclassical_limit(&sweep, secs));
    report(8, "uniform bounds", uniform_bounds(&sweep));
    report(9, "determinism", determinism((&opt_dev, &opt), &mesfet, (&sweep_dev, &sweep), &sweep_cfg));

    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
