//! Cost functionals, the discrete adjoint and the H¹-Riesz gradient of the reduced cost.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discrete::current::{contact_mask, current_form};
use crate::discrete::field::{inner_l2_raw, stiffness_form};
use crate::discrete::operator::{assemble_weighted_laplacian, lumped_load, Trace};
use crate::discrete::{BcRole, ScalarField};
use crate::doping::BoundaryData;
use crate::error::{Error, Result};
use crate::mesh::{ContactName, Mesh};
use crate::real::Real;
use crate::state::residual::{jacobian, Fields, Problem};
use crate::state::{gummel_solve, Physics, SolverConfig, StateTriple};

/// What the tracking term of the cost measures.
#[derive(Clone, Debug, PartialEq)]
pub enum CostKind<T> {
    /// `½ |I − I_d|²` for the current through `contact`.
    CurrentTracking { target: T, contact: ContactName },
    /// `½ ‖ρ² − n_d‖²`.
    DensityTracking { target: ScalarField<T> },
}

/// Weighted tracking term plus the regularization `γ/2 ‖∇(C − C_ref)‖²`.
#[derive(Clone, Debug)]
pub struct CostConfig<T> {
    pub kind: CostKind<T>,
    pub gamma: T,
    pub c_ref: ScalarField<T>,
    /// Multiplies the tracking term; 1 for the plain cost, 0 leaves only the penalty.
    pub tracking_weight: T,
}

impl<T: Real> CostConfig<T> {
    pub fn current_tracking(target: T, contact: ContactName, gamma: T, c_ref: ScalarField<T>) -> Self {
        CostConfig { kind: CostKind::CurrentTracking { target, contact }, gamma, c_ref, tracking_weight: T::one() }
    }

    pub fn density_tracking(target: ScalarField<T>, gamma: T, c_ref: ScalarField<T>) -> Self {
        CostConfig { kind: CostKind::DensityTracking { target }, gamma, c_ref, tracking_weight: T::one() }
    }

    pub fn validate(&self, mesh: &Mesh<T>) -> Result<()> {
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::Config("cost.gamma must be > 0".into()));
        }
        if !(self.tracking_weight >= T::zero()) || !self.tracking_weight.is_finite() {
            return Err(Error::Config("cost.tracking_weight must be >= 0".into()));
        }
        self.c_ref.check_mesh(mesh)?;
        match &self.kind {
            CostKind::CurrentTracking { target, .. } if !target.is_finite() => {
                Err(Error::Config("cost.target_current must be finite".into()))
            }
            CostKind::DensityTracking { target } => target.check_mesh(mesh),
            _ => Ok(()),
        }
    }
}

/// Value of the cost split into its parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostValue<T> {
    pub total: T,
    pub tracking: T,
    pub penalty: T,
    /// Tracked contact current, for current tracking.
    pub current: Option<T>,
}

/// Adjoint variables; all vanish on the contacts.
#[derive(Clone, Debug)]
pub struct AdjointTriple<T> {
    pub xi_rho: ScalarField<T>,
    pub xi_v: ScalarField<T>,
    pub xi_s: ScalarField<T>,
}

fn penalty<T: Real>(mesh: &Mesh<T>, c: &[T], cfg: &CostConfig<T>) -> T {
    let d: Vec<T> = c.iter().zip(cfg.c_ref.iter()).map(|(&a, &b)| a - b).collect();
    T::lit(0.5) * cfg.gamma * stiffness_form(mesh, &d, &d)
}

/// Evaluates the cost at a (converged) state.
pub fn cost_eval<T: Real>(mesh: &Mesh<T>, state: &StateTriple<T>, c: &ScalarField<T>, cfg: &CostConfig<T>) -> Result<CostValue<T>> {
    cfg.validate(mesh)?;
    c.check_mesh(mesh)?;
    state.rho.check_mesh(mesh)?;
    let half = T::lit(0.5);
    let (tracking, current) = match &cfg.kind {
        CostKind::CurrentTracking { target, contact } => {
            let w = contact_mask(mesh, *contact)?;
            let i = current_form(mesh, &state.rho, &state.s, &w);
            (half * (i - *target) * (i - *target), Some(i))
        }
        CostKind::DensityTracking { target } => {
            let d: Vec<T> = state.rho.iter().zip(target.iter()).map(|(&r, &n)| r * r - n).collect();
            (half * inner_l2_raw(mesh, &d, &d), None)
        }
    };
    let tracking = cfg.tracking_weight * tracking;
    let pen = penalty(mesh, c, cfg);
    Ok(CostValue { total: tracking + pen, tracking, penalty: pen, current })
}

/// Partial derivatives of the tracking term with respect to `ρ` and `S` on free nodes.
fn state_derivative<T: Real>(mesh: &Mesh<T>, state: &StateTriple<T>, cfg: &CostConfig<T>) -> Result<(Vec<T>, Vec<T>)> {
    let n = mesh.len();
    let (rho, s) = (&state.rho, &state.s);
    let mut d_rho = vec![T::zero(); n];
    let mut d_s = vec![T::zero(); n];
    match &cfg.kind {
        CostKind::CurrentTracking { target, contact } => {
            let w = contact_mask(mesh, *contact)?;
            let i = current_form(mesh, rho, s, &w);
            let f = cfg.tracking_weight * (i - *target);
            let half = T::lit(0.5);
            mesh.for_each_edge(|p, q, k| {
                let g = k * (s[q] - s[p]) * (w[q] - w[p]);
                d_rho[p] += f * g * rho[p];
                d_rho[q] += f * g * rho[q];
                let m = k * half * (rho[p] * rho[p] + rho[q] * rho[q]) * (w[q] - w[p]);
                d_s[q] += f * m;
                d_s[p] -= f * m;
            });
        }
        CostKind::DensityTracking { target } => {
            for p in 0..n {
                d_rho[p] = cfg.tracking_weight * mesh.area(p) * (rho[p] * rho[p] - target[p]) * T::lit(2.0) * rho[p];
            }
        }
    }
    for p in 0..n {
        if mesh.is_dirichlet(p) {
            d_rho[p] = T::zero();
            d_s[p] = T::zero();
        }
    }
    Ok((d_rho, d_s))
}

/// Solves the transposed linearized state system with the cost derivative as load.
pub fn solve_adjoint<T: Real>(
    mesh: &Mesh<T>,
    state: &StateTriple<T>,
    c: &ScalarField<T>,
    phys: &Physics<T>,
    bd: &BoundaryData<T>,
    cfg: &CostConfig<T>,
) -> Result<AdjointTriple<T>> {
    cfg.validate(mesh)?;
    c.check_mesh(mesh)?;
    let (d_rho, d_s) = state_derivative(mesh, state, cfg)?;
    let n = mesh.len();
    let mut rhs = Vec::with_capacity(3 * n);
    for p in 0..n {
        rhs.extend([d_rho[p], T::zero(), d_s[p]]);
    }
    if rhs.iter().all(|&x| x == T::zero()) {
        let z = ScalarField::zeros(mesh, BcRole::Homogeneous);
        return Ok(AdjointTriple { xi_rho: z.clone(), xi_v: z.clone(), xi_s: z });
    }
    let pb = Problem { mesh, c, bd, eps2: phys.eps2, lambda2: phys.lambda2, v_ext: &phys.v_ext };
    let jt = jacobian(&pb, &state.rho, &state.v, &state.s, Fields::Full).transpose();
    let lu = jt.clone().factor()?;
    let mut xi = lu.solve(&rhs);
    // One step of iterative refinement guards against pivot growth.
    let r: Vec<T> = jt.matvec(&xi).iter().zip(&rhs).map(|(&a, &b)| b - a).collect();
    let dx = lu.solve(&r);
    xi.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
    let mut f = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
    for p in 0..n {
        for k in 0..3 {
            f[k][p] = if mesh.is_dirichlet(p) { T::zero() } else { xi[3 * p + k] };
        }
    }
    let [xr, xv, xs] = f;
    Ok(AdjointTriple {
        xi_rho: ScalarField::new(mesh, xr, BcRole::Homogeneous)?,
        xi_v: ScalarField::new(mesh, xv, BcRole::Homogeneous)?,
        xi_s: ScalarField::new(mesh, xs, BcRole::Homogeneous)?,
    })
}

/// Relative residual `‖Jᵀξ − b‖∞ / ‖b‖∞` of an adjoint triple in the transposed linearized system.
pub fn adjoint_residual<T: Real>(
    mesh: &Mesh<T>,
    state: &StateTriple<T>,
    c: &ScalarField<T>,
    phys: &Physics<T>,
    bd: &BoundaryData<T>,
    cfg: &CostConfig<T>,
    xi: &AdjointTriple<T>,
) -> Result<T> {
    xi.xi_rho.check_mesh(mesh)?;
    let (d_rho, d_s) = state_derivative(mesh, state, cfg)?;
    let n = mesh.len();
    let (mut rhs, mut x) = (Vec::with_capacity(3 * n), Vec::with_capacity(3 * n));
    for p in 0..n {
        rhs.extend([d_rho[p], T::zero(), d_s[p]]);
        x.extend([xi.xi_rho[p], xi.xi_v[p], xi.xi_s[p]]);
    }
    let pb = Problem { mesh, c, bd, eps2: phys.eps2, lambda2: phys.lambda2, v_ext: &phys.v_ext };
    let jt = jacobian(&pb, &state.rho, &state.v, &state.s, Fields::Full).transpose();
    let r = jt.matvec(&x).iter().zip(&rhs).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
    let scale = rhs.iter().fold(T::zero(), |m, &b| m.max(b.abs()));
    Ok(if scale > T::zero() { r / scale } else { r })
}

/// Derivative of the reduced cost as a nodal dual vector: `γ K (C − C_ref) − M ξ_V`, zero on contacts.
pub fn cost_derivative<T: Real>(mesh: &Mesh<T>, xi_v: &ScalarField<T>, c: &ScalarField<T>, cfg: &CostConfig<T>) -> Result<Vec<T>> {
    xi_v.check_mesh(mesh)?;
    c.check_mesh(mesh)?;
    let n = mesh.len();
    let mut d = vec![T::zero(); n];
    mesh.for_each_edge(|p, q, k| {
        let diff = (c[p] - cfg.c_ref[p]) - (c[q] - cfg.c_ref[q]);
        d[p] += cfg.gamma * k * diff;
        d[q] -= cfg.gamma * k * diff;
    });
    for p in 0..n {
        d[p] = if mesh.is_dirichlet(p) { T::zero() } else { d[p] - mesh.area(p) * xi_v[p] };
    }
    Ok(d)
}

/// Riesz representative `g` of the derivative in the `∫∇g·∇φ` inner product, `g = 0` on contacts.
pub fn riesz_gradient<T: Real>(mesh: &Mesh<T>, xi_v: &ScalarField<T>, c: &ScalarField<T>, cfg: &CostConfig<T>) -> Result<ScalarField<T>> {
    cfg.validate(mesh)?;
    let d = cost_derivative(mesh, xi_v, c, cfg)?;
    riesz_from_dual(mesh, &d)
}

pub(crate) fn riesz_from_dual<T: Real>(mesh: &Mesh<T>, d: &[T]) -> Result<ScalarField<T>> {
    let op = assemble_weighted_laplacian(mesh, &vec![T::one(); mesh.len()], Trace::Homogeneous)?;
    let g = op.solve(d)?;
    ScalarField::new(mesh, g, BcRole::Homogeneous)
}

/// Forward model, cost and gradient bundled for the optimizer and the gradient check.
#[derive(Clone, Copy, Debug)]
pub struct ReducedProblem<'a, T> {
    pub mesh: &'a Mesh<T>,
    pub phys: &'a Physics<T>,
    pub bd: &'a BoundaryData<T>,
    pub solver: &'a SolverConfig<T>,
    pub cost: &'a CostConfig<T>,
}

/// Cost, derivative and gradient at one doping.
#[derive(Clone, Debug)]
pub struct GradientInfo<T> {
    pub cost: CostValue<T>,
    pub dual: Vec<T>,
    pub gradient: ScalarField<T>,
    pub adjoint: AdjointTriple<T>,
}

impl<'a, T: Real> ReducedProblem<'a, T> {
    pub fn forward(&self, c: &ScalarField<T>, warm: Option<&StateTriple<T>>) -> Result<StateTriple<T>> {
        gummel_solve(self.mesh, c, self.phys, self.bd, self.solver, warm)
    }

    pub fn cost(&self, state: &StateTriple<T>, c: &ScalarField<T>) -> Result<CostValue<T>> {
        cost_eval(self.mesh, state, c, self.cost)
    }

    /// Reduced cost: forward solve followed by cost evaluation.
    pub fn reduced_cost(&self, c: &ScalarField<T>, warm: Option<&StateTriple<T>>) -> Result<(T, StateTriple<T>)> {
        let st = self.forward(c, warm)?;
        Ok((self.cost(&st, c)?.total, st))
    }

    pub fn gradient(&self, state: &StateTriple<T>, c: &ScalarField<T>) -> Result<GradientInfo<T>> {
        let cost = self.cost(state, c)?;
        let adjoint = solve_adjoint(self.mesh, state, c, self.phys, self.bd, self.cost)?;
        let dual = cost_derivative(self.mesh, &adjoint.xi_v, c, self.cost)?;
        let gradient = riesz_from_dual(self.mesh, &dual)?;
        Ok(GradientInfo { cost, dual, gradient, adjoint })
    }
}

/// One row of the gradient check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckRow {
    pub direction: usize,
    pub tau: f64,
    pub adjoint: f64,
    pub fd: f64,
    pub rel_error: f64,
}

/// Adjoint directional derivatives against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
}

impl GradCheckReport {
    /// Smallest relative error per direction.
    pub fn best_errors(&self) -> Vec<f64> {
        let ndir = self.rows.iter().map(|r| r.direction + 1).max().unwrap_or(0);
        (0..ndir)
            .map(|d| {
                self.rows
                    .iter()
                    .filter(|r| r.direction == d)
                    .map(|r| r.rel_error)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn worst_best_error(&self) -> f64 {
        self.best_errors().into_iter().fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>9} {:>10} {:>24} {:>24} {:>12}", "direction", "tau", "adjoint", "fd", "rel_error")?;
        for r in &self.rows {
            writeln!(f, "{:>9} {:>10.1e} {:>24.16e} {:>24.16e} {:>12.3e}", r.direction, r.tau, r.adjoint, r.fd, r.rel_error)?;
        }
        for (d, e) in self.best_errors().iter().enumerate() {
            writeln!(f, "best[{d}] = {e:.3e}")?;
        }
        Ok(())
    }
}

/// Smooth random directions with zero contact trace and unit max-norm.
pub fn random_directions<T: Real>(mesh: &Mesh<T>, count: usize, seed: u64) -> Result<Vec<ScalarField<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = assemble_weighted_laplacian(mesh, &vec![T::one(); mesh.len()], Trace::Homogeneous)?;
    (0..count)
        .map(|_| {
            let r: Vec<T> = (0..mesh.len()).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
            let d = op.solve(&lumped_load(mesh, &r))?;
            let scale = d.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            ScalarField::new(mesh, d.iter().map(|&x| x / scale).collect(), BcRole::Homogeneous)
        })
        .collect()
}

/// Compares `⟨Ĵ'(C), d⟩` with `(Ĵ(C + τd) − Ĵ(C − τd)) / 2τ` along `directions` random directions.
pub fn fd_gradient_check<T: Real>(
    rp: &ReducedProblem<'_, T>,
    c: &ScalarField<T>,
    directions: usize,
    taus: &[T],
    seed: u64,
) -> Result<GradCheckReport> {
    let base = rp.forward(c, None)?;
    let info = rp.gradient(&base, c)?;
    let dirs = random_directions(rp.mesh, directions, seed)?;
    let mut rows = Vec::new();
    for (k, d) in dirs.iter().enumerate() {
        let adj: T = info.dual.iter().zip(d.iter()).map(|(&a, &b)| a * b).sum();
        for &tau in taus {
            let plus = c.axpy(tau, d);
            let minus = c.axpy(-tau, d);
            let (jp, _) = rp.reduced_cost(&plus, Some(&base))?;
            let (jm, _) = rp.reduced_cost(&minus, Some(&base))?;
            let fd = (jp - jm) / (T::lit(2.0) * tau);
            let rel = ((adj - fd).abs() / adj.abs().max(T::min_positive_value())).to_f64_lossy();
            rows.push(GradCheckRow {
                direction: k,
                tau: tau.to_f64_lossy(),
                adjoint: adj.to_f64_lossy(),
                fd: fd.to_f64_lossy(),
                rel_error: rel,
            });
        }
    }
    Ok(GradCheckReport { rows })
}
