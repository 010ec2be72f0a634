use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::real::Real;

/// How a field relates to the Dirichlet contacts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcRole {
    /// Carries a nonzero contact trace (ρ, V, S).
    DirichletLifted,
    /// Vanishes on every contact node (adjoints, gradients, search directions).
    Homogeneous,
    /// No boundary constraint (C, V_ext, masks).
    Free,
}

/// One real value per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    nx: usize,
    ny: usize,
    values: Vec<T>,
    role: BcRole,
}

impl<T: Real> ScalarField<T> {
    /// Wraps `values`, checking length, finiteness and the role's trace constraint.
    pub fn new(mesh: &Mesh<T>, values: Vec<T>, role: BcRole) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch(format!(
                "field has {} values, mesh has {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value at node {p}")));
        }
        if role == BcRole::Homogeneous {
            if let Some(p) = (0..mesh.len()).find(|&p| mesh.is_dirichlet(p) && values[p] != T::zero()) {
                return Err(Error::InvalidInput(format!("homogeneous field is nonzero on contact node {p}")));
            }
        }
        Ok(ScalarField { nx: mesh.nx, ny: mesh.ny, values, role })
    }

    /// Wraps without validation; used internally where the invariants hold by construction.
    pub(crate) fn from_raw(mesh: &Mesh<T>, values: Vec<T>, role: BcRole) -> Self {
        debug_assert_eq!(values.len(), mesh.len());
        ScalarField { nx: mesh.nx, ny: mesh.ny, values, role }
    }

    pub fn constant(mesh: &Mesh<T>, c: T, role: BcRole) -> Self {
        ScalarField { nx: mesh.nx, ny: mesh.ny, values: vec![c; mesh.len()], role }
    }

    pub fn zeros(mesh: &Mesh<T>, role: BcRole) -> Self {
        Self::constant(mesh, T::zero(), role)
    }

    pub fn from_fn(mesh: &Mesh<T>, role: BcRole, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..mesh.len()).map(|p| f(mesh.x(p), mesh.y(p))).collect();
        ScalarField { nx: mesh.nx, ny: mesh.ny, values, role }
    }

    pub fn role(&self) -> BcRole {
        self.role
    }

    pub fn with_role(mut self, role: BcRole) -> Self {
        self.role = role;
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Errors unless the field lives on `mesh`.
    pub fn check_mesh(&self, mesh: &Mesh<T>) -> Result<()> {
        if self.nx != mesh.nx || self.ny != mesh.ny {
            return Err(Error::MeshMismatch(format!(
                "field is {}×{}, mesh is {}×{}",
                self.nx, self.ny, mesh.nx, mesh.ny
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// `self − other`, keeping `self`'s role.
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        ScalarField { values, ..self.clone() }
    }

    /// `self + s · other`, keeping `self`'s role.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + s * b).collect();
        ScalarField { values, ..self.clone() }
    }
}

impl<T> Deref for ScalarField<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for ScalarField<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

fn same_mesh<T: Real>(mesh: &Mesh<T>, a: &ScalarField<T>, b: &ScalarField<T>) -> Result<()> {
    a.check_mesh(mesh)?;
    b.check_mesh(mesh)
}

/// Trapezoidal L² inner product.
pub fn inner_l2<T: Real>(mesh: &Mesh<T>, a: &ScalarField<T>, b: &ScalarField<T>) -> Result<T> {
    same_mesh(mesh, a, b)?;
    Ok(inner_l2_raw(mesh, a, b))
}

pub(crate) fn inner_l2_raw<T: Real>(mesh: &Mesh<T>, a: &[T], b: &[T]) -> T {
    (0..mesh.len()).fold(T::zero(), |acc, p| acc + mesh.area(p) * a[p] * b[p])
}

pub fn norm_l2<T: Real>(mesh: &Mesh<T>, a: &ScalarField<T>) -> Result<T> {
    Ok(inner_l2(mesh, a, a)?.sqrt())
}

/// `‖∇a‖²_{L²}` from edge differences, consistent with the five-point stiffness.
pub fn grad_seminorm_sq<T: Real>(mesh: &Mesh<T>, a: &ScalarField<T>) -> Result<T> {
    a.check_mesh(mesh)?;
    Ok(stiffness_form(mesh, a, a))
}

/// Unweighted stiffness bilinear form `∫ ∇a·∇b` on the grid.
pub(crate) fn stiffness_form<T: Real>(mesh: &Mesh<T>, a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    mesh.for_each_edge(|p, q, k| s += k * (a[q] - a[p]) * (b[q] - b[p]));
    s
}

/// `sqrt(‖a‖²_{L²} + ‖∇a‖²_{L²})`.
pub fn norm_h1<T: Real>(mesh: &Mesh<T>, a: &ScalarField<T>) -> Result<T> {
    a.check_mesh(mesh)?;
    Ok((inner_l2_raw(mesh, a, a) + stiffness_form(mesh, a, a)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DeviceGeometry};
    use proptest::prelude::*;

    fn mesh(n: usize) -> Mesh<f64> {
        build_mesh(&DeviceGeometry::mesfet(), n, n).unwrap()
    }

    #[test]
    fn unit_mass() {
        let m = mesh(17);
        let one = ScalarField::constant(&m, 1.0, BcRole::Free);
        assert!((inner_l2(&m, &one, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_gradient_exact() {
        let m = mesh(13);
        let x = ScalarField::from_fn(&m, BcRole::Free, |x, _| x);
        assert!((grad_seminorm_sq(&m, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_role_checked() {
        let m = mesh(10);
        let err = ScalarField::new(&m, vec![1.0; m.len()], BcRole::Homogeneous).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(ScalarField::new(&m, vec![f64::NAN; m.len()], BcRole::Free).is_err());
        assert!(ScalarField::new(&m, vec![0.0; 3], BcRole::Free).is_err());
    }

    #[test]
    fn mesh_mismatch_detected() {
        let a = ScalarField::constant(&mesh(10), 1.0, BcRole::Free);
        assert!(matches!(inner_l2(&mesh(11), &a, &a), Err(Error::MeshMismatch(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let m: Mesh<f32> = build_mesh(&DeviceGeometry::mesfet(), 9, 9).unwrap();
        let x = ScalarField::from_fn(&m, BcRole::Free, |x, _| x);
        assert!((grad_seminorm_sq(&m, &x).unwrap() - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn h1_dominates_l2(vals in proptest::collection::vec(-10.0f64..10.0, 100)) {
            let m = mesh(10);
            let a = ScalarField::new(&m, vals, BcRole::Free).unwrap();
            let l2 = norm_l2(&m, &a).unwrap();
            prop_assert!(norm_h1(&m, &a).unwrap() >= l2);
        }
    }
}
