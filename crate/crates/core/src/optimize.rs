//! Steepest descent with Armijo backtracking on the reduced cost.

use std::fmt;
use std::time::Instant;

use log::info;

use crate::adjoint::{GradientInfo, ReducedProblem};
use crate::discrete::{norm_h1, ScalarField};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::state::StateTriple;

/// Line-search and stopping parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmijoConfig<T> {
    /// Sufficient-decrease constant.
    pub c1: T,
    /// Backtracking factor.
    pub beta: T,
    /// First trial step; later searches start from twice the last accepted step.
    pub alpha0: T,
    pub max_backtracks: usize,
    /// Stop once `‖g‖_{H¹}` drops to this value.
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Real> Default for ArmijoConfig<T> {
    fn default() -> Self {
        ArmijoConfig {
            c1: T::lit(1e-4),
            beta: T::lit(0.5),
            alpha0: T::one(),
            max_backtracks: 30,
            tol: T::lit(1e-6),
            max_iters: 100,
        }
    }
}

impl<T: Real> ArmijoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > T::zero() && self.c1 < T::one()) {
            return Err(Error::Config("optimizer.c1 must lie in (0, 1)".into()));
        }
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(Error::Config("optimizer.beta must lie in (0, 1)".into()));
        }
        if !(self.alpha0 > T::zero()) || !self.alpha0.is_finite() {
            return Err(Error::Config("optimizer.alpha0 must be > 0".into()));
        }
        if !(self.tol >= T::zero()) {
            return Err(Error::Config("optimizer.tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Accepted Armijo step.
#[derive(Clone, Debug)]
pub struct ArmijoStep<T> {
    pub alpha: T,
    pub c: ScalarField<T>,
    pub cost: T,
    pub state: StateTriple<T>,
    pub backtracks: usize,
}

/// Backtracks from `alpha_init` until `Ĵ(C − αg) ≤ J₀ − c₁ α slope`.
///
/// Trial points where the doping turns nonpositive or the forward solve fails count as
/// insufficient decrease.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search<T: Real>(
    rp: &ReducedProblem<'_, T>,
    c: &ScalarField<T>,
    g: &ScalarField<T>,
    j0: T,
    slope: T,
    alpha_init: T,
    cfg: &ArmijoConfig<T>,
    warm: Option<&StateTriple<T>>,
) -> Result<ArmijoStep<T>> {
    if !(slope > T::zero()) {
        return Err(Error::InvalidInput(format!("search direction is not a descent direction (slope {slope:e})")));
    }
    let mut alpha = alpha_init;
    let mut last = T::nan();
    for m in 0..=cfg.max_backtracks {
        let trial = c.axpy(-alpha, g);
        if trial.iter().all(|&v| v > T::zero()) {
            match rp.reduced_cost(&trial, warm) {
                Ok((j, state)) => {
                    last = j;
                    if j <= j0 - cfg.c1 * alpha * slope && j < j0 {
                        return Ok(ArmijoStep { alpha, c: trial, cost: j, state, backtracks: m });
                    }
                }
                Err(e) if e.is_solver_failure() => {}
                Err(e) => return Err(e),
            }
        }
        alpha *= cfg.beta;
    }
    Err(Error::LineSearch {
        backtracks: cfg.max_backtracks,
        alpha: (alpha / cfg.beta).to_f64_lossy(),
        cost: last.to_f64_lossy(),
        target: (j0 - cfg.c1 * (alpha / cfg.beta) * slope).to_f64_lossy(),
    })
}

/// Why the descent loop stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum TerminalReason {
    Tolerance,
    MaxIterations,
    LineSearchFailure(String),
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalReason::Tolerance => f.write_str("tolerance"),
            TerminalReason::MaxIterations => f.write_str("max_iters"),
            TerminalReason::LineSearchFailure(_) => f.write_str("line_search_failure"),
        }
    }
}

/// One row of the optimization history; `alpha` is the step that led to this iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub cost: T,
    pub grad_norm: T,
    pub alpha: T,
    pub current: Option<T>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub c: ScalarField<T>,
    pub state: StateTriple<T>,
    pub reason: TerminalReason,
}

impl<T: Real> OptimizationTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_cost(&self) -> T {
        self.records.last().map(|r| r.cost).unwrap_or_else(T::nan)
    }
}

/// Steepest descent in the H¹ seminorm geometry, starting from `c_init`.
pub fn gradient_descent<T: Real>(
    rp: &ReducedProblem<'_, T>,
    c_init: &ScalarField<T>,
    cfg: &ArmijoConfig<T>,
    warm: Option<&StateTriple<T>>,
) -> Result<OptimizationTrace<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let mesh = rp.mesh;
    let mut c = c_init.clone();
    let mut state = rp.forward(&c, warm)?;
    let mut info: GradientInfo<T> = rp.gradient(&state, &c)?;
    let mut gnorm = norm_h1(mesh, &info.gradient)?;
    let mut records = vec![IterationRecord {
        k: 0,
        cost: info.cost.total,
        grad_norm: gnorm,
        alpha: T::zero(),
        current: info.cost.current,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut alpha_next = cfg.alpha0;
    let wrap = |k: usize, e: Error| Error::Optimizer { iteration: k, source: Box::new(e) };
    let reason = loop {
        let k = records.len();
        if gnorm <= cfg.tol {
            break TerminalReason::Tolerance;
        }
        if k > cfg.max_iters {
            break TerminalReason::MaxIterations;
        }
        // Slope ⟨Ĵ'(C), g⟩ = ∫|∇g|² by construction of the Riesz representative.
        let slope: T = info.dual.iter().zip(info.gradient.iter()).map(|(&a, &b)| a * b).sum();
        let step = match armijo_search(rp, &c, &info.gradient, info.cost.total, slope, alpha_next, cfg, Some(&state)) {
            Ok(s) => s,
            Err(e) if e.is_line_search_failure() => break TerminalReason::LineSearchFailure(e.to_string()),
            Err(e) => return Err(wrap(k, e)),
        };
        alpha_next = step.alpha * T::lit(2.0);
        c = step.c;
        state = step.state;
        info = rp.gradient(&state, &c).map_err(|e| wrap(k, e))?;
        gnorm = norm_h1(mesh, &info.gradient)?;
        info!("iter {k}: J = {:e}, |g| = {:e}, alpha = {:e}", info.cost.total, gnorm, step.alpha);
        records.push(IterationRecord {
            k,
            cost: info.cost.total,
            grad_norm: gnorm,
            alpha: step.alpha,
            current: info.cost.current,
            seconds: start.elapsed().as_secs_f64(),
        });
    };
    Ok(OptimizationTrace { records, c, state, reason })
}
