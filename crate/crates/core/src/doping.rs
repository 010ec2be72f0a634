//! Reference doping profile and contact boundary data.

use crate::discrete::operator::{assemble_weighted_laplacian, lumped_load, Trace};
use crate::discrete::{BcRole, ScalarField};
use crate::error::{Error, Result};
use crate::mesh::{ContactSpec, DeviceGeometry, Mesh, NodeKind};
use crate::real::Real;

/// Doping `C` together with the reference profile it is penalized against.
#[derive(Clone, Debug)]
pub struct DopingProfile<T> {
    pub c: ScalarField<T>,
    pub c_ref: ScalarField<T>,
    /// Mollification length in grid cells.
    pub smoothing_length: T,
}

impl<T: Real> DopingProfile<T> {
    /// Flat doping `C ≡ C_ref ≡ value`.
    pub fn uniform(mesh: &Mesh<T>, value: T) -> Result<Self> {
        if !(value > T::zero()) {
            return Err(Error::InvalidInput(format!("doping must be positive, got {value}")));
        }
        let c = ScalarField::constant(mesh, value, BcRole::Free);
        Ok(DopingProfile { c: c.clone(), c_ref: c, smoothing_length: T::zero() })
    }

    /// Replaces `C`, checking positivity and that it matches `C_ref` on every contact node.
    pub fn with_doping(&self, mesh: &Mesh<T>, c: ScalarField<T>) -> Result<Self> {
        c.check_mesh(mesh)?;
        if let Some(p) = c.iter().position(|&v| !(v > T::zero())) {
            return Err(Error::Positivity(format!("doping is not positive at node {p}")));
        }
        if let Some(p) = (0..mesh.len()).find(|&p| mesh.is_dirichlet(p) && c[p] != self.c_ref[p]) {
            return Err(Error::InvalidInput(format!("doping differs from the reference on contact node {p}")));
        }
        Ok(DopingProfile { c, c_ref: self.c_ref.clone(), smoothing_length: self.smoothing_length })
    }
}

/// Piecewise-constant doping: `nplus_doping` inside the n⁺ rectangles, `channel_doping` elsewhere.
pub fn piecewise_doping<T: Real>(geom: &DeviceGeometry<T>, mesh: &Mesh<T>) -> ScalarField<T> {
    ScalarField::from_fn(mesh, BcRole::Free, |x, y| {
        if geom.nplus_regions.iter().any(|r| r.contains(x, y)) {
            geom.nplus_doping
        } else {
            geom.channel_doping
        }
    })
}

/// Piecewise doping mollified by `(I − σ²Δ) C_ref = C₀` with Neumann conditions everywhere.
///
/// `smoothing_length` is in grid cells; `σ = smoothing_length · max(hx, hy)`.
pub fn build_reference_doping<T: Real>(
    geom: &DeviceGeometry<T>,
    mesh: &Mesh<T>,
    smoothing_length: T,
) -> Result<DopingProfile<T>> {
    if !(smoothing_length >= T::zero()) || !smoothing_length.is_finite() {
        return Err(Error::InvalidInput(format!("smoothing length must be finite and >= 0, got {smoothing_length}")));
    }
    let c0 = piecewise_doping(geom, mesh);
    if smoothing_length == T::zero() {
        return Ok(DopingProfile { c: c0.clone(), c_ref: c0, smoothing_length });
    }
    let sigma = smoothing_length * mesh.hx.max(mesh.hy);
    let mut op = assemble_weighted_laplacian(mesh, &vec![sigma * sigma; mesh.len()], Trace::Homogeneous)?.unpinned();
    op.add_reaction(&vec![T::one(); mesh.len()]);
    let c_ref = op.solve(&lumped_load(mesh, &c0))?;
    let c_ref = ScalarField::new(mesh, c_ref, BcRole::Free)?;
    Ok(DopingProfile { c: c_ref.clone(), c_ref, smoothing_length })
}

/// Dirichlet traces of `ρ`, `V` and `S`, stored per node (zero away from contacts).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData<T> {
    pub rho_d: Vec<T>,
    pub v_d: Vec<T>,
    pub s_d: Vec<T>,
    pub delta_c: T,
}

impl<T: Real> BoundaryData<T> {
    pub fn len(&self) -> usize {
        self.rho_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_d.is_empty()
    }
}

/// Thermal-equilibrium, charge-neutral traces:
/// `ρ_D = α_V √C_ref`, `V_D = −log(ρ_D²/δ_c²) + U`, `S_D = log(ρ_D²/δ_c²) + U`.
pub fn build_boundary_data<T: Real>(
    mesh: &Mesh<T>,
    profile: &DopingProfile<T>,
    contacts: &[ContactSpec<T>],
    delta_c: T,
) -> Result<BoundaryData<T>> {
    if !(delta_c > T::zero()) {
        return Err(Error::InvalidInput(format!("delta_c must be > 0, got {delta_c}")));
    }
    profile.c_ref.check_mesh(mesh)?;
    let n = mesh.len();
    let (mut rho_d, mut v_d, mut s_d) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    for p in 0..n {
        let NodeKind::Dirichlet(id) = mesh.kind(p) else { continue };
        let name = mesh.contacts()[id];
        let spec = contacts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("no contact data for `{name}`")))?;
        let c = profile.c_ref[p];
        if !(c > T::zero()) {
            return Err(Error::Positivity(format!("reference doping is not positive on contact node {p}")));
        }
        let rho = spec.schottky_factor * c.sqrt();
        let l = (rho * rho / (delta_c * delta_c)).ln();
        rho_d[p] = rho;
        v_d[p] = -l + spec.applied_voltage;
        s_d[p] = l + spec.applied_voltage;
    }
    Ok(BoundaryData { rho_d, v_d, s_d, delta_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundarySelector, ContactName, Rect};
    use proptest::prelude::*;

    fn mesfet(n: usize) -> (DeviceGeometry<f64>, Mesh<f64>) {
        let g = DeviceGeometry::mesfet();
        let m = build_mesh(&g, n, n).unwrap();
        (g, m)
    }

    #[test]
    fn zero_smoothing_is_identity() {
        let (g, m) = mesfet(20);
        let p = build_reference_doping(&g, &m, 0.0).unwrap();
        assert_eq!(p.c_ref, piecewise_doping(&g, &m));
        assert_eq!(p.c, p.c_ref);
    }

    #[test]
    fn constants_are_invariant() {
        let (mut g, _) = mesfet(20);
        g.nplus_regions.clear();
        g.channel_doping = 1.0;
        g.nplus_doping = 2.0;
        let m = build_mesh(&g, 20, 20).unwrap();
        let p = build_reference_doping(&g, &m, 3.0).unwrap();
        assert!(p.c_ref.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn smoothed_profile_obeys_bounds() {
        let (g, m) = mesfet(80);
        let p = build_reference_doping(&g, &m, 2.0).unwrap();
        let (lo, hi) = (p.c_ref.min(), p.c_ref.max());
        assert!(hi < 1.0 && hi > 0.8, "max {hi}");
        assert!(lo >= 0.01 * (1.0 - 1e-12), "min {lo}");
        // Monotone across the lower edge of the source n⁺ block along x = 0.1.
        let i = (0.1 / m.hx).round() as usize;
        let col: Vec<f64> = (0..m.ny).map(|j| p.c_ref[m.index(i, j)]).collect();
        assert!(col.windows(2).all(|w| w[1] >= w[0] - 1e-14));
    }

    #[test]
    fn ohmic_unit_trace() {
        let (mut g, m) = mesfet(20);
        for c in &mut g.contacts {
            c.schottky_factor = 1.0;
            c.applied_voltage = 0.0;
        }
        let p = DopingProfile::uniform(&m, 1.0).unwrap();
        let bd = build_boundary_data(&m, &p, &g.contacts, 1.0).unwrap();
        for q in m.boundary_nodes(BoundarySelector::Dirichlet) {
            assert_eq!((bd.rho_d[q], bd.v_d[q], bd.s_d[q]), (1.0, 0.0, 0.0));
        }
    }

    #[test]
    fn default_voltages() {
        let g = DeviceGeometry::<f64>::mesfet();
        let u = |n| g.contact(n).unwrap().applied_voltage;
        assert!((u(ContactName::Drain) - 0.015).abs() < 1e-15);
        assert!((u(ContactName::Source) - 0.00375).abs() < 1e-15);
        assert!((u(ContactName::Gate) - 0.0075).abs() < 1e-15);
    }

    #[test]
    fn schottky_gate_trace() {
        let (g, m) = mesfet(20);
        let p = DopingProfile::uniform(&m, 1.0).unwrap();
        let bd = build_boundary_data(&m, &p, &g.contacts, 1.0).unwrap();
        let q = m.boundary_nodes(BoundarySelector::Contact(ContactName::Gate))[0];
        assert!((bd.rho_d[q] - 0.1).abs() < 1e-15);
        assert!((bd.v_d[q] - (-(0.01f64).ln() + 0.0075)).abs() < 1e-14);
        assert!((bd.s_d[q] - ((0.01f64).ln() + 0.0075)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (g, m) = mesfet(10);
        assert!(build_reference_doping(&g, &m, -1.0).is_err());
        let p = DopingProfile::uniform(&m, 1.0).unwrap();
        assert!(build_boundary_data(&m, &p, &g.contacts, 0.0).is_err());
        let mut c = p.c.clone();
        let q = m.boundary_nodes(BoundarySelector::Dirichlet)[0];
        c[q] = 2.0;
        assert!(p.with_doping(&m, c).is_err());
    }

    proptest! {
        #[test]
        fn trace_identities(c_src in 0.01f64..2.0, c_gate in 0.01f64..2.0, alpha in 0.05f64..1.0, delta in 0.2f64..3.0, u in -0.2f64..0.2) {
            let (mut g, m) = mesfet(16);
            for c in &mut g.contacts {
                c.applied_voltage = u;
                if c.name == ContactName::Gate { c.schottky_factor = alpha; }
            }
            g.nplus_regions = vec![Rect::new(0.0, 0.3, 0.9, 1.0)];
            let mut prof = DopingProfile::uniform(&m, c_gate).unwrap();
            for q in m.boundary_nodes(BoundarySelector::Contact(ContactName::Source)) {
                prof.c_ref[q] = c_src;
            }
            let bd = build_boundary_data(&m, &prof, &g.contacts, delta).unwrap();
            for q in m.boundary_nodes(BoundarySelector::Dirichlet) {
                let l = (bd.rho_d[q] * bd.rho_d[q] / (delta * delta)).ln();
                prop_assert!((bd.v_d[q] + bd.s_d[q] - 2.0 * u).abs() < 1e-12);
                prop_assert!((bd.v_d[q] - bd.s_d[q] + 2.0 * l).abs() < 1e-12);
            }
        }
    }
}
