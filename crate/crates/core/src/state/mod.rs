//! Forward solvers for the coupled `(ρ, V, S)` system.

pub mod energy;
pub mod residual;
pub mod solve;

pub use energy::{classical_energy, energy_eval};
pub use residual::Problem;
pub use solve::{
    boltzmann_density, gummel_solve, solve_continuity_s, solve_dd, solve_density_rho, solve_poisson_v, state_residual,
};

use crate::discrete::{LinearSolverKind, ScalarField};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::real::Real;

/// Logarithmic enthalpy `h(t) = log t`, valid below the cap `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnthalpyModel<T> {
    /// Densities `ρ² ≥ cap` trigger a warning; the log model is meant for low densities.
    pub cap: T,
}

impl<T: Real> Default for EnthalpyModel<T> {
    fn default() -> Self {
        EnthalpyModel { cap: T::lit(100.0) }
    }
}

/// Iteration controls for the nonlinear solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Max-norm of the strong residual of all three equations at convergence.
    pub nonlinear_tol: T,
    pub max_gummel: usize,
    /// Initial relaxation of the `S` update; halved whenever the residual grows.
    pub damping: T,
    pub damping_floor: T,
    /// Residual target of the inner Newton solves.
    pub newton_tol: T,
    pub max_newton: usize,
    /// Lower bound on `ρ` that a converged state must respect.
    pub rho_floor: T,
    pub enthalpy: EnthalpyModel<T>,
    /// Finish with Newton on the fully coupled system once Gummel is below `polish_below`.
    pub newton_polish: bool,
    pub polish_below: T,
    pub linear_solver: LinearSolverKind,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            nonlinear_tol: T::lit(1e-8),
            max_gummel: 500,
            damping: T::one(),
            damping_floor: T::lit(1.0 / 16.0),
            newton_tol: T::lit(1e-10),
            max_newton: 50,
            rho_floor: T::lit(1e-10),
            enthalpy: EnthalpyModel::default(),
            newton_polish: true,
            polish_below: T::lit(1e-3),
            linear_solver: LinearSolverKind::Auto,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("solver.{name} must be > 0")))
            }
        };
        pos(self.nonlinear_tol, "nonlinear_tol")?;
        pos(self.newton_tol, "newton_tol")?;
        pos(self.rho_floor, "rho_floor")?;
        pos(self.polish_below, "polish_below")?;
        pos(self.enthalpy.cap, "enthalpy_cap")?;
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::Config("solver.damping must lie in (0, 1]".into()));
        }
        if !(self.damping_floor > T::zero() && self.damping_floor <= self.damping) {
            return Err(Error::Config("solver.damping_floor must lie in (0, damping]".into()));
        }
        if self.max_gummel == 0 || self.max_newton == 0 {
            return Err(Error::Config("solver iteration caps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Model parameters: Bohm coefficient `ε²`, Debye length `λ²` and external potential.
#[derive(Clone, Debug)]
pub struct Physics<T> {
    pub eps2: T,
    pub lambda2: T,
    pub v_ext: ScalarField<T>,
}

impl<T: Real> Physics<T> {
    /// Physics without external potential.
    pub fn new(mesh: &Mesh<T>, eps2: T, lambda2: T) -> Self {
        Physics { eps2, lambda2, v_ext: ScalarField::zeros(mesh, crate::discrete::BcRole::Free) }
    }

    pub fn with_eps2(&self, eps2: T) -> Self {
        Physics { eps2, ..self.clone() }
    }
}

/// Converged solution of the state system.
#[derive(Clone, Debug)]
pub struct StateTriple<T> {
    pub rho: ScalarField<T>,
    pub v: ScalarField<T>,
    pub s: ScalarField<T>,
    pub eps2: T,
    /// Max-norm of the strong residual at return.
    pub residual: T,
    /// Outer iterations used.
    pub iterations: usize,
}

impl<T: Real> StateTriple<T> {
    /// Electron density `n = ρ²`.
    pub fn density(&self) -> ScalarField<T> {
        self.rho.map(|r| r * r)
    }
}
