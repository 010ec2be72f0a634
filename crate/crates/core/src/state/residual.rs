//! Discrete residuals of the coupled system and their Jacobians.
//!
//! On free nodes, with `a_p` the control-volume area and `K` the five-point stiffness,
//!
//! ```text
//! R_ρ = ε² (Kρ)_p + a_p ρ_p (log ρ_p² + V_p + V_ext,p − S_p)
//! R_V = λ² (KV)_p − a_p (ρ_p² − C_p)
//! R_S = Σ_q k_pq m_pq (S_p − S_q),   m_pq = (ρ_p² + ρ_q²) / 2
//! ```
//!
//! Contact rows are pinned to the Dirichlet traces.

use crate::discrete::linalg::BandMatrix;
use crate::doping::BoundaryData;
use crate::mesh::Mesh;
use crate::real::Real;

/// Everything the residual needs besides the unknowns.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a, T> {
    pub mesh: &'a Mesh<T>,
    pub c: &'a [T],
    pub bd: &'a BoundaryData<T>,
    pub eps2: T,
    pub lambda2: T,
    pub v_ext: &'a [T],
}

/// Weak residuals `(R_ρ, R_V, R_S)`, zero on contact nodes.
pub(crate) struct Residual<T> {
    pub rho: Vec<T>,
    pub v: Vec<T>,
    pub s: Vec<T>,
}

impl<T: Real> Residual<T> {
    /// Max-norm of the strong-form residual (weak residual over area).
    pub fn max_strong(&self, mesh: &Mesh<T>, which: Fields) -> T {
        let mut m = T::zero();
        for p in 0..mesh.len() {
            let a = mesh.area(p);
            m = m.max(self.rho[p].abs() / a).max(self.v[p].abs() / a);
            if which == Fields::Full {
                m = m.max(self.s[p].abs() / a);
            }
        }
        m
    }

    /// Area-weighted two-norm of the strong residual, used as a line-search merit.
    pub fn merit(&self, mesh: &Mesh<T>, which: Fields) -> T {
        let mut m = T::zero();
        for p in 0..mesh.len() {
            let a = mesh.area(p);
            let mut r = self.rho[p] * self.rho[p] + self.v[p] * self.v[p];
            if which == Fields::Full {
                r += self.s[p] * self.s[p];
            }
            m += r / a;
        }
        m.sqrt()
    }
}

/// Which unknowns a Newton system couples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Fields {
    /// `(ρ, V)` at frozen `S`.
    RhoV,
    /// `(ρ, V, S)`.
    Full,
}

impl Fields {
    pub fn count(self) -> usize {
        match self {
            Fields::RhoV => 2,
            Fields::Full => 3,
        }
    }
}

pub(crate) fn residual<T: Real>(pb: &Problem<'_, T>, rho: &[T], v: &[T], s: &[T]) -> Residual<T> {
    let mesh = pb.mesh;
    let n = mesh.len();
    let (mut rr, mut rv, mut rs) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let half = T::lit(0.5);
    mesh.for_each_edge(|p, q, k| {
        let dr = pb.eps2 * k * (rho[p] - rho[q]);
        rr[p] += dr;
        rr[q] -= dr;
        let dv = pb.lambda2 * k * (v[p] - v[q]);
        rv[p] += dv;
        rv[q] -= dv;
        let ds = k * half * (rho[p] * rho[p] + rho[q] * rho[q]) * (s[p] - s[q]);
        rs[p] += ds;
        rs[q] -= ds;
    });
    for p in 0..n {
        if mesh.is_dirichlet(p) {
            rr[p] = T::zero();
            rv[p] = T::zero();
            rs[p] = T::zero();
            continue;
        }
        let a = mesh.area(p);
        let r2 = rho[p] * rho[p];
        rr[p] += a * rho[p] * (r2.ln() + v[p] + pb.v_ext[p] - s[p]);
        rv[p] -= a * (r2 - pb.c[p]);
    }
    Residual { rho: rr, v: rv, s: rs }
}

/// Jacobian of the selected residual block in node-interleaved ordering `f·p + field`.
///
/// Contact rows are identity rows and contact columns are dropped, so the matrix acts on
/// increments that vanish on the contacts.
pub(crate) fn jacobian<T: Real>(pb: &Problem<'_, T>, rho: &[T], v: &[T], s: &[T], which: Fields) -> BandMatrix<T> {
    let mesh = pb.mesh;
    let n = mesh.len();
    let f = which.count();
    let bw = f * mesh.nx + f - 1;
    let mut jac = BandMatrix::new(f * n, bw, bw);
    let free = |p: usize| !mesh.is_dirichlet(p);
    let (ir, iv, is) = (0, 1, 2);
    let half = T::lit(0.5);
    mesh.for_each_edge(|p, q, k| {
        let m = half * (rho[p] * rho[p] + rho[q] * rho[q]);
        let ds = s[p] - s[q];
        for (a, b, sgn) in [(p, q, T::one()), (q, p, -T::one())] {
            if !free(a) {
                continue;
            }
            let (ra, rb) = (f * a, f * b);
            jac.add(ra + ir, ra + ir, pb.eps2 * k);
            jac.add(ra + iv, ra + iv, pb.lambda2 * k);
            if free(b) {
                jac.add(ra + ir, rb + ir, -pb.eps2 * k);
                jac.add(ra + iv, rb + iv, -pb.lambda2 * k);
            }
            if which == Fields::Full {
                // R_S[a] gets sgn·k·m·(S_p − S_q).
                jac.add(ra + is, ra + is, k * m);
                jac.add(ra + is, ra + ir, sgn * k * rho[a] * ds);
                if free(b) {
                    jac.add(ra + is, rb + is, -k * m);
                    jac.add(ra + is, rb + ir, sgn * k * rho[b] * ds);
                }
            }
        }
    });
    for p in 0..n {
        let r = f * p;
        if !free(p) {
            for fld in 0..f {
                jac.add(r + fld, r + fld, T::one());
            }
            continue;
        }
        let a = mesh.area(p);
        let l = (rho[p] * rho[p]).ln() + v[p] + pb.v_ext[p] - s[p];
        jac.add(r + ir, r + ir, a * (l + T::lit(2.0)));
        jac.add(r + ir, r + iv, a * rho[p]);
        jac.add(r + iv, r + ir, -T::lit(2.0) * a * rho[p]);
        if which == Fields::Full {
            jac.add(r + ir, r + is, -a * rho[p]);
        }
    }
    jac
}
