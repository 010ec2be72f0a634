//! Semiclassical limit study: optimize along a ladder of decreasing `ε²` and compare with
//! the classical optimum.

use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::discrete::{norm_l2, ScalarField};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::optimize::{gradient_descent, TerminalReason};
use crate::real::Real;
use crate::run::{build_cost, Device};
use crate::state::StateTriple;

/// Optimum of one row.
#[derive(Clone, Debug)]
pub struct SweepRun<T> {
    pub cost: T,
    pub c: ScalarField<T>,
    pub state: StateTriple<T>,
    pub iterations: usize,
    pub reason: TerminalReason,
    pub current: Option<T>,
    pub peak_current: T,
}

impl<T: Real> SweepRun<T> {
    pub fn min_rho(&self) -> T {
        self.state.rho.min()
    }

    pub fn max_rho(&self) -> T {
        self.state.rho.max()
    }
}

/// Relative L² distances to the classical optimum and the optimal-cost gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distances<T> {
    pub c: T,
    pub n: T,
    pub s: T,
    pub cost_gap: T,
}

#[derive(Clone, Debug)]
pub struct SweepRow<T> {
    /// Ladder index; `None` for the classical baseline.
    pub n: Option<usize>,
    pub eps2: T,
    /// The optimum, or the failure message of this row.
    pub outcome: std::result::Result<SweepRun<T>, String>,
    pub distances: Option<Distances<T>>,
}

impl<T> SweepRow<T> {
    pub fn label(&self) -> String {
        self.n.map_or_else(|| "dd".to_string(), |n| format!("n{n}"))
    }
}

/// Ladder rows in order of increasing `n`, followed by the classical baseline.
#[derive(Clone, Debug)]
pub struct SweepReport<T> {
    pub rows: Vec<SweepRow<T>>,
}

impl<T: Real> SweepReport<T> {
    pub fn baseline(&self) -> &SweepRow<T> {
        self.rows.last().expect("report holds the baseline row")
    }

    pub fn ladder(&self) -> &[SweepRow<T>] {
        &self.rows[..self.rows.len() - 1]
    }
}

fn relative_distance<T: Real>(mesh: &Mesh<T>, a: &ScalarField<T>, b: &ScalarField<T>) -> Result<T> {
    let d = norm_l2(mesh, &a.sub(b))?;
    let r = norm_l2(mesh, b)?;
    Ok(if r > T::zero() { d / r } else { d })
}

fn distances<T: Real>(mesh: &Mesh<T>, run: &SweepRun<T>, base: &SweepRun<T>) -> Result<Distances<T>> {
    let density = |s: &StateTriple<T>| s.rho.map(|r| r * r);
    Ok(Distances {
        c: relative_distance(mesh, &run.c, &base.c)?,
        n: relative_distance(mesh, &density(&run.state), &density(&base.state))?,
        s: relative_distance(mesh, &run.state.s, &base.state.s)?,
        cost_gap: (run.cost - base.cost).abs(),
    })
}

fn optimize_row<T: Real>(
    cfg: &RunConfig,
    dev: &Device<T>,
    cost: &crate::adjoint::CostConfig<T>,
    warm: Option<&StateTriple<T>>,
) -> Result<SweepRun<T>> {
    let trace = gradient_descent(&dev.reduced(cost), &dev.profile.c, &cfg.armijo(), warm)?;
    let current = match &cost.kind {
        crate::adjoint::CostKind::CurrentTracking { contact, .. } => Some(dev.current(&trace.state, *contact)?),
        _ => None,
    };
    Ok(SweepRun {
        cost: trace.final_cost(),
        iterations: trace.iterations(),
        peak_current: dev.peak_current(&trace.state),
        current,
        reason: trace.reason,
        c: trace.c,
        state: trace.state,
    })
}

/// Runs the optimizer at `ε² · 10^(−2n)` for `n = 0..=n_max` and at `ε = 0`.
///
/// The cost targets are fixed by the quantum reference state at the base `ε²`, so every row
/// minimizes the same functional. A failed ladder row is recorded and the sweep continues;
/// failure of the classical baseline is an error.
pub fn run_epsilon_sweep<T: Real>(cfg: &RunConfig) -> Result<(Device<T>, SweepReport<T>)> {
    let (nx, ny) = cfg.sweep_grid();
    let base_eps2 = T::lit(cfg.sweep_epsilon2());
    let dev = Device::<T>::from_config(cfg, nx, ny, base_eps2)?;
    let reference = dev.solve(&dev.profile.c, None)?;
    let cost = build_cost(cfg, &dev, &reference)?;

    let dd = dev.with_eps2(T::zero());
    let dd_ref = dd.solve(&dev.profile.c, None)?;
    let baseline = optimize_row(cfg, &dd, &cost, Some(&dd_ref))?;
    info!("sweep baseline: cost {:e}, {} iterations", baseline.cost, baseline.iterations);

    let ladder: Vec<(usize, T)> = (0..=cfg.sweep.n_max)
        .map(|n| (n, base_eps2 * T::lit(10f64.powi(-2 * n as i32))))
        .collect();
    let outcomes: Vec<std::result::Result<SweepRun<T>, String>> = if cfg.sweep.warm_start {
        let mut warm = reference.clone();
        ladder
            .iter()
            .map(|&(n, eps2)| {
                let r = optimize_row(cfg, &dev.with_eps2(eps2), &cost, Some(&warm));
                match &r {
                    Ok(run) => warm = run.state.clone(),
                    Err(e) => warn!("sweep row n{n} failed: {e}"),
                }
                r.map_err(|e| e.to_string())
            })
            .collect()
    } else {
        ladder
            .par_iter()
            .map(|&(_, eps2)| optimize_row(cfg, &dev.with_eps2(eps2), &cost, None).map_err(|e| e.to_string()))
            .collect()
    };

    let report = assemble(&dev.mesh, &ladder, outcomes, baseline)?;
    Ok((dev, report))
}

/// Attaches distances to every successful row; failed rows stay as they are.
fn assemble<T: Real>(
    mesh: &Mesh<T>,
    ladder: &[(usize, T)],
    outcomes: Vec<std::result::Result<SweepRun<T>, String>>,
    baseline: SweepRun<T>,
) -> Result<SweepReport<T>> {
    let mut rows = Vec::with_capacity(ladder.len() + 1);
    for (&(n, eps2), outcome) in ladder.iter().zip(outcomes) {
        let distances = match &outcome {
            Ok(run) => Some(distances(mesh, run, &baseline)?),
            Err(_) => None,
        };
        rows.push(SweepRow { n: Some(n), eps2, outcome, distances });
    }
    let zero = distances(mesh, &baseline, &baseline)?;
    rows.push(SweepRow { n: None, eps2: T::zero(), outcome: Ok(baseline), distances: Some(zero) });
    Ok(SweepReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn failed_row_does_not_touch_others() {
        let cfg = parse_config_str("[geometry]\nnx = 10\nny = 10\n[physics]\nlambda2 = 0.0017\nepsilon2 = 1.88e-4\n[optimizer]\ntol = 0.0\nmax_iters = 1\n").unwrap();
        let dev = Device::<f64>::primary(&cfg).unwrap();
        let reference = dev.solve(&dev.profile.c, None).unwrap();
        let cost = build_cost(&cfg, &dev, &reference).unwrap();
        let run = |eps2: f64| optimize_row(&cfg, &dev.with_eps2(eps2), &cost, None).unwrap();
        let baseline = run(0.0);
        let ladder = [(0, 1.88e-4), (1, 1.88e-6), (2, 1.88e-8)];
        let outcomes = vec![Ok(run(1.88e-4)), Err("injected".to_string()), Ok(run(1.88e-8))];
        let rep = assemble(&dev.mesh, &ladder, outcomes, baseline.clone()).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.rows[1].outcome.is_err() && rep.rows[1].distances.is_none());
        let alone = distances(&dev.mesh, &run(1.88e-8), &baseline).unwrap();
        assert_eq!(rep.rows[2].distances, Some(alone));
        assert!(rep.rows[0].distances.unwrap().n > alone.n);
        assert_eq!(rep.baseline().distances.unwrap().c, 0.0);
        assert_eq!(rep.ladder().len(), 3);
    }
}
