//! Five-point finite-volume discretization of `−div(w ∇u)` with pinned
//! Dirichlet rows and natural (zero-flux) Neumann boundaries.

use crate::discrete::field::{BcRole, ScalarField};
use crate::discrete::linalg::{pcg_ic0, FivePoint};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::real::Real;

/// Grids with more nodes than this switch from banded Cholesky to PCG.
pub const DIRECT_SOLVE_MAX_NODES: usize = 160 * 160;

/// Dirichlet data for an operator: read only on contact nodes.
#[derive(Clone, Copy, Debug)]
pub enum Trace<'a, T> {
    Homogeneous,
    Values(&'a [T]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Banded Cholesky up to [`DIRECT_SOLVE_MAX_NODES`], PCG above.
    #[default]
    Auto,
    Direct,
    Iterative,
}

/// Symmetric operator over all grid nodes. Rows of contact nodes are identity
/// rows; their couplings to free nodes move to the right-hand side on solve.
#[derive(Clone, Debug)]
pub struct SparseOperator<T> {
    full: FivePoint<T>,
    pinned: Vec<bool>,
    trace: Vec<T>,
    areas: Vec<T>,
    pub solver: LinearSolverKind,
    pub linear_tol: T,
}

/// Assembles the weak form of `−div(w ∇·)` with edge weights `(w_p + w_q)/2`.
pub fn assemble_weighted_laplacian<T: Real>(mesh: &Mesh<T>, weight: &[T], bc: Trace<'_, T>) -> Result<SparseOperator<T>> {
    if weight.len() != mesh.len() {
        return Err(Error::MeshMismatch("weight length differs from node count".into()));
    }
    if let Some(p) = weight.iter().position(|&w| !(w > T::zero()) || !w.is_finite()) {
        return Err(Error::LinearSolver {
            reason: format!("nonpositive weight {} at node {p}", weight[p].to_f64_lossy()),
            residual: f64::NAN,
        });
    }
    let mut full = FivePoint::zeros(mesh.nx, mesh.ny);
    let half = T::lit(0.5);
    mesh.for_each_edge(|p, q, k| {
        let c = k * half * (weight[p] + weight[q]);
        full.diag[p] += c;
        full.diag[q] += c;
        if q == p + 1 {
            full.east[p] = -c;
        } else {
            full.north[p] = -c;
        }
    });
    let pinned = mesh.dirichlet_mask();
    let trace = match bc {
        Trace::Homogeneous => vec![T::zero(); mesh.len()],
        Trace::Values(v) => {
            if v.len() != mesh.len() {
                return Err(Error::MeshMismatch("trace length differs from node count".into()));
            }
            (0..mesh.len()).map(|p| if pinned[p] { v[p] } else { T::zero() }).collect()
        }
    };
    Ok(SparseOperator {
        full,
        pinned,
        trace,
        areas: (0..mesh.len()).map(|p| mesh.area(p)).collect(),
        solver: LinearSolverKind::Auto,
        linear_tol: T::lit(1e-12),
    })
}

impl<T: Real> SparseOperator<T> {
    /// Identity on every node, no pinned rows.
    pub fn identity(mesh: &Mesh<T>) -> Self {
        let mut full = FivePoint::zeros(mesh.nx, mesh.ny);
        full.diag.iter_mut().for_each(|d| *d = T::one());
        SparseOperator {
            full,
            pinned: vec![false; mesh.len()],
            trace: vec![T::zero(); mesh.len()],
            areas: vec![T::one(); mesh.len()],
            solver: LinearSolverKind::Auto,
            linear_tol: T::lit(1e-12),
        }
    }

    /// Same operator without any pinned rows (pure Neumann).
    pub fn unpinned(mut self) -> Self {
        self.pinned.iter_mut().for_each(|p| *p = false);
        self
    }

    /// Multiplies the differential part by `s` (e.g. `λ²`, `ε²`).
    pub fn scaled(mut self, s: T) -> Self {
        for v in self.full.diag.iter_mut().chain(self.full.east.iter_mut()).chain(self.full.north.iter_mut()) {
            *v *= s;
        }
        self
    }

    /// Adds the lumped reaction term `area_p · coef_p` to the diagonal.
    pub fn add_reaction(&mut self, coef: &[T]) {
        for (p, d) in self.full.diag.iter_mut().enumerate() {
            *d += self.areas[p] * coef[p];
        }
    }

    pub fn with_solver(mut self, kind: LinearSolverKind) -> Self {
        self.solver = kind;
        self
    }

    pub fn is_pinned(&self, p: usize) -> bool {
        self.pinned[p]
    }

    pub fn len(&self) -> usize {
        self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
    }

    /// Matrix with pinned rows/columns decoupled and identity on pinned rows.
    fn reduced(&self) -> FivePoint<T> {
        let mut a = self.full.clone();
        let nx = a.nx;
        for p in 0..a.len() {
            if self.pinned[p] {
                a.diag[p] = T::one();
            }
            if a.east[p] != T::zero() && (self.pinned[p] || self.pinned[p + 1]) {
                a.east[p] = T::zero();
            }
            if a.north[p] != T::zero() && (self.pinned[p] || self.pinned[p + nx]) {
                a.north[p] = T::zero();
            }
        }
        a
    }

    /// Applies the pinned operator (identity on contact nodes, decoupled elsewhere).
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        self.reduced().matvec(u)
    }

    /// Applies the operator without pinning; for free rows this is the weak residual operator.
    pub fn apply_full(&self, u: &[T]) -> Vec<T> {
        self.full.matvec(u)
    }

    /// Right-hand side of the pinned system for the load `rhs`.
    fn system_rhs(&self, rhs: &[T]) -> Vec<T> {
        let nx = self.full.nx;
        let mut b: Vec<T> = (0..self.len()).map(|p| if self.pinned[p] { self.trace[p] } else { rhs[p] }).collect();
        for p in 0..self.len() {
            let e = self.full.east[p];
            if e != T::zero() && self.pinned[p] != self.pinned[p + 1] {
                if self.pinned[p] {
                    b[p + 1] -= e * self.trace[p];
                } else {
                    b[p] -= e * self.trace[p + 1];
                }
            }
            let no = self.full.north[p];
            if no != T::zero() && self.pinned[p] != self.pinned[p + nx] {
                if self.pinned[p] {
                    b[p + nx] -= no * self.trace[p];
                } else {
                    b[p] -= no * self.trace[p + nx];
                }
            }
        }
        b
    }

    /// Solves `A u = rhs` on free nodes with `u = trace` on contacts.
    /// `rhs` is the integrated load (use [`lumped_load`] for a pointwise source).
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        if rhs.len() != self.len() {
            return Err(Error::MeshMismatch("rhs length differs from operator size".into()));
        }
        if let Some(p) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite right-hand side at node {p}")));
        }
        let a = self.reduced();
        let b = self.system_rhs(rhs);
        let bnorm = b.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
        let target = self.linear_tol * (T::one() + bnorm);
        let direct = match self.solver {
            LinearSolverKind::Direct => true,
            LinearSolverKind::Iterative => false,
            LinearSolverKind::Auto => self.len() <= DIRECT_SOLVE_MAX_NODES,
        };
        let residual = |x: &[T]| -> Vec<T> {
            let ax = a.matvec(x);
            b.iter().zip(ax).map(|(&bi, axi)| bi - axi).collect()
        };
        let norm = |r: &[T]| r.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
        let x = if direct {
            let chol = a.to_sym_band().factor()?;
            let mut x = b.clone();
            chol.solve_in_place(&mut x);
            // Iterative refinement for badly scaled weights.
            for _ in 0..2 {
                let mut r = residual(&x);
                if norm(&r) <= target {
                    break;
                }
                chol.solve_in_place(&mut r);
                x.iter_mut().zip(r).for_each(|(xi, di)| *xi += di);
            }
            x
        } else {
            pcg_ic0(&a, &b, None, self.linear_tol, 20 * self.len())?
        };
        let res = norm(&residual(&x));
        if !(res <= target) {
            return Err(Error::LinearSolver {
                reason: "residual above tolerance".into(),
                residual: res.to_f64_lossy(),
            });
        }
        Ok(x)
    }
}

/// Integrated load `area_p · f_p`.
pub fn lumped_load<T: Real>(mesh: &Mesh<T>, f: &[T]) -> Vec<T> {
    (0..mesh.len()).map(|p| mesh.area(p) * f[p]).collect()
}

/// Solves `op u = rhs` and wraps the result; `rhs` is an integrated load.
pub fn solve_linear<T: Real>(mesh: &Mesh<T>, op: &SparseOperator<T>, rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
    rhs.check_mesh(mesh)?;
    let u = op.solve(rhs)?;
    let role = if op.pinned.iter().any(|&p| p) {
        if op.trace.iter().all(|&t| t == T::zero()) {
            BcRole::Homogeneous
        } else {
            BcRole::DirichletLifted
        }
    } else {
        BcRole::Free
    };
    Ok(ScalarField::from_raw(mesh, u, role))
}
