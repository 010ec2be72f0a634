//! Drivers that turn a [`RunConfig`] into forward solves, optimizations and gradient checks.

use log::info;

use crate::adjoint::{fd_gradient_check, CostConfig, GradCheckReport, ReducedProblem};
use crate::config::RunConfig;
use crate::discrete::{boundary_current, contact_currents, contact_mask, peak_current_density, BcRole, ScalarField};
use crate::doping::{build_boundary_data, build_reference_doping, BoundaryData, DopingProfile};
use crate::error::Result;
use crate::mesh::{build_mesh, ContactName, DeviceGeometry, Mesh};
use crate::optimize::{gradient_descent, OptimizationTrace};
use crate::real::Real;
use crate::state::{gummel_solve, Physics, SolverConfig, StateTriple};

/// Mesh, reference doping, contact data and physics of one device at one resolution.
#[derive(Clone, Debug)]
pub struct Device<T> {
    pub geometry: DeviceGeometry<T>,
    pub mesh: Mesh<T>,
    pub profile: DopingProfile<T>,
    pub bd: BoundaryData<T>,
    pub phys: Physics<T>,
    pub solver: SolverConfig<T>,
}

impl<T: Real> Device<T> {
    /// Builds the device of `cfg` on an `nx × ny` grid with quantum parameter `eps2`.
    pub fn from_config(cfg: &RunConfig, nx: usize, ny: usize, eps2: T) -> Result<Self> {
        let geometry = cfg.device::<T>();
        let mesh = build_mesh(&geometry, nx, ny)?;
        let profile = build_reference_doping(&geometry, &mesh, T::lit(cfg.geometry.smoothing_length))?;
        let bd = build_boundary_data(&mesh, &profile, &geometry.contacts, T::lit(cfg.physics.delta_c))?;
        let v_ext = ScalarField::constant(&mesh, T::lit(cfg.physics.external_potential), BcRole::Free);
        let phys = Physics { eps2, lambda2: T::lit(cfg.physics.lambda2), v_ext };
        Ok(Device { geometry, mesh, profile, bd, phys, solver: cfg.solver_config()? })
    }

    /// Device on the configured geometry grid and `physics.epsilon2`.
    pub fn primary(cfg: &RunConfig) -> Result<Self> {
        Self::from_config(cfg, cfg.geometry.nx, cfg.geometry.ny, T::lit(cfg.physics.epsilon2))
    }

    pub fn with_eps2(&self, eps2: T) -> Self {
        Device { phys: self.phys.with_eps2(eps2), ..self.clone() }
    }

    pub fn solve(&self, c: &ScalarField<T>, warm: Option<&StateTriple<T>>) -> Result<StateTriple<T>> {
        gummel_solve(&self.mesh, c, &self.phys, &self.bd, &self.solver, warm)
    }

    pub fn current(&self, state: &StateTriple<T>, contact: ContactName) -> Result<T> {
        let w = contact_mask(&self.mesh, contact)?;
        boundary_current(&self.mesh, &state.rho, &state.s, &w)
    }

    pub fn peak_current(&self, state: &StateTriple<T>) -> T {
        peak_current_density(&self.mesh, &state.rho, &state.s)
    }

    pub fn reduced<'a>(&'a self, cost: &'a CostConfig<T>) -> ReducedProblem<'a, T> {
        ReducedProblem { mesh: &self.mesh, phys: &self.phys, bd: &self.bd, solver: &self.solver, cost }
    }
}

/// Cost of `cfg` with targets taken relative to `reference`, the state at the reference doping.
pub fn build_cost<T: Real>(cfg: &RunConfig, dev: &Device<T>, reference: &StateTriple<T>) -> Result<CostConfig<T>> {
    let c = &cfg.cost;
    let mut cost = if c.kind == "density" {
        let target = reference.rho.map(|r| T::lit(c.target_factor) * r * r).with_role(BcRole::Free);
        CostConfig::density_tracking(target, T::lit(c.gamma), dev.profile.c_ref.clone())
    } else {
        let contact = cfg.tracked_contact();
        let target = match c.target_current {
            Some(i) => T::lit(i),
            None => T::lit(c.target_factor) * dev.current(reference, contact)?,
        };
        CostConfig::current_tracking(target, contact, T::lit(c.gamma), dev.profile.c_ref.clone())
    };
    cost.tracking_weight = T::lit(c.tracking_weight);
    cost.validate(&dev.mesh)?;
    Ok(cost)
}

/// Forward solve at the reference doping.
#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub state: StateTriple<T>,
    pub currents: Vec<(ContactName, T)>,
    pub peak_current: T,
}

pub fn run_solve<T: Real>(cfg: &RunConfig) -> Result<(Device<T>, SolveOutcome<T>)> {
    let dev = Device::<T>::primary(cfg)?;
    let state = dev.solve(&dev.profile.c, None)?;
    info!("solve: {} iterations, residual {:e}", state.iterations, state.residual);
    let currents = contact_currents(&dev.mesh, &state.rho, &state.s)?;
    let peak_current = dev.peak_current(&state);
    Ok((dev, SolveOutcome { state, currents, peak_current }))
}

/// Gradient descent from the reference doping.
#[derive(Clone, Debug)]
pub struct OptimizeOutcome<T> {
    pub reference: StateTriple<T>,
    pub cost: CostConfig<T>,
    /// Tracked current at the reference and at the optimum (current tracking only).
    pub current_ref: Option<T>,
    pub current_opt: Option<T>,
    pub peak_ref: T,
    pub peak_opt: T,
    pub trace: OptimizationTrace<T>,
}

/// Optimizes `dev` from its reference doping, warm-starting from `reference`.
pub fn optimize_device<T: Real>(
    cfg: &RunConfig,
    dev: &Device<T>,
    reference: StateTriple<T>,
    cost: CostConfig<T>,
) -> Result<OptimizeOutcome<T>> {
    let rp = dev.reduced(&cost);
    let trace = gradient_descent(&rp, &dev.profile.c, &cfg.armijo(), Some(&reference))?;
    let (current_ref, current_opt) = match cost.kind {
        crate::adjoint::CostKind::CurrentTracking { contact, .. } => {
            (Some(dev.current(&reference, contact)?), Some(dev.current(&trace.state, contact)?))
        }
        _ => (None, None),
    };
    Ok(OptimizeOutcome {
        peak_ref: dev.peak_current(&reference),
        peak_opt: dev.peak_current(&trace.state),
        reference,
        cost,
        current_ref,
        current_opt,
        trace,
    })
}

pub fn run_optimize<T: Real>(cfg: &RunConfig) -> Result<(Device<T>, OptimizeOutcome<T>)> {
    let dev = Device::<T>::primary(cfg)?;
    let reference = dev.solve(&dev.profile.c, None)?;
    let cost = build_cost(cfg, &dev, &reference)?;
    let out = optimize_device(cfg, &dev, reference, cost)?;
    info!("optimize: {} iterations, reason {}", out.trace.iterations(), out.trace.reason);
    Ok((dev, out))
}

/// Adjoint versus finite-difference directional derivatives at the reference doping.
pub fn run_gradcheck<T: Real>(cfg: &RunConfig) -> Result<(Device<T>, GradCheckReport)> {
    let dev = Device::<T>::primary(cfg)?;
    let reference = dev.solve(&dev.profile.c, None)?;
    let cost = build_cost(cfg, &dev, &reference)?;
    let taus: Vec<T> = cfg.gradcheck.taus.iter().map(|&t| T::lit(t)).collect();
    let report = fd_gradient_check(&dev.reduced(&cost), &dev.profile.c, cfg.gradcheck.directions, &taus, cfg.gradcheck.seed)?;
    Ok((dev, report))
}
