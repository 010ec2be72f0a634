//! Contact currents of the electron flux `ρ² ∇S`.
//!
//! The current through a contact is evaluated in volume form,
//! `I = ∫ ρ² ∇S · ∇w dx`, where `w` is one on the contact, zero on the other
//! contacts and discrete-harmonic inside. For `S` solving the discrete
//! continuity equation this equals the boundary flux `∫ ρ² ∂_ν S ds`, and the
//! currents of all contacts sum to zero.

use crate::discrete::operator::{assemble_weighted_laplacian, Trace};
use crate::error::{Error, Result};
use crate::mesh::{BoundarySelector, ContactName, Mesh, NodeKind};
use crate::real::Real;

/// Extension of the indicator of contact `name`: 1 there, 0 on other contacts, harmonic elsewhere.
pub fn contact_mask<T: Real>(mesh: &Mesh<T>, name: ContactName) -> Result<Vec<T>> {
    let id = mesh
        .contact_id(name)
        .ok_or_else(|| Error::InvalidInput(format!("mesh has no `{name}` contact")))?;
    let trace: Vec<T> = (0..mesh.len())
        .map(|p| if mesh.kind(p) == NodeKind::Dirichlet(id) { T::one() } else { T::zero() })
        .collect();
    let op = assemble_weighted_laplacian(mesh, &vec![T::one(); mesh.len()], Trace::Values(&trace))?;
    op.solve(&vec![T::zero(); mesh.len()])
}

fn check_mask<T: Real>(mesh: &Mesh<T>, mask: &[T]) -> Result<()> {
    if mask.len() != mesh.len() {
        return Err(Error::MeshMismatch("mask length differs from node count".into()));
    }
    let mut seen_one = None;
    for p in 0..mesh.len() {
        if let NodeKind::Dirichlet(id) = mesh.kind(p) {
            let v = mask[p];
            if v == T::one() {
                match seen_one {
                    None => seen_one = Some(id),
                    Some(s) if s != id => {
                        return Err(Error::InvalidInput("mask is one on more than one contact".into()))
                    }
                    _ => {}
                }
            } else if v != T::zero() {
                return Err(Error::InvalidInput(format!("mask is neither 0 nor 1 on contact node {p}")));
            }
        }
    }
    // All nodes of the selected contact must carry 1.
    if let Some(id) = seen_one {
        if (0..mesh.len()).any(|p| mesh.kind(p) == NodeKind::Dirichlet(id) && mask[p] != T::one()) {
            return Err(Error::InvalidInput("mask does not cover its whole contact".into()));
        }
    }
    Ok(())
}

/// Volume-form current `∫ ρ² ∇S · ∇w` for the contact selected by `mask`.
pub fn boundary_current<T: Real>(mesh: &Mesh<T>, rho: &[T], s: &[T], mask: &[T]) -> Result<T> {
    check_mask(mesh, mask)?;
    if rho.len() != mesh.len() || s.len() != mesh.len() {
        return Err(Error::MeshMismatch("field length differs from node count".into()));
    }
    Ok(current_form(mesh, rho, s, mask))
}

pub(crate) fn current_form<T: Real>(mesh: &Mesh<T>, rho: &[T], s: &[T], w: &[T]) -> T {
    let half = T::lit(0.5);
    let mut total = T::zero();
    mesh.for_each_edge(|p, q, k| {
        let m = half * (rho[p] * rho[p] + rho[q] * rho[q]);
        total += k * m * (s[q] - s[p]) * (w[q] - w[p]);
    });
    total
}

/// Currents of every contact, in mesh contact order.
pub fn contact_currents<T: Real>(mesh: &Mesh<T>, rho: &[T], s: &[T]) -> Result<Vec<(ContactName, T)>> {
    mesh.contacts()
        .iter()
        .map(|&name| {
            let w = contact_mask(mesh, name)?;
            Ok((name, current_form(mesh, rho, s, &w)))
        })
        .collect()
}

/// Diagnostic: trapezoidal boundary integral of `ρ² ∂_ν S` with one-sided normal differences.
pub fn direct_flux<T: Real>(mesh: &Mesh<T>, rho: &[T], s: &[T], name: ContactName) -> T {
    let nodes = mesh.boundary_nodes(BoundarySelector::Contact(name));
    let nx = mesh.nx;
    let half = T::lit(0.5);
    let mut total = T::zero();
    if nodes.len() < 2 {
        return T::zero();
    }
    // A contact run shares its row (top/bottom edge) or its column (left/right edge).
    let horizontal = mesh.ij(nodes[0]).1 == mesh.ij(nodes[1]).1;
    for (k, &p) in nodes.iter().enumerate() {
        let (i, j) = mesh.ij(p);
        let (inner, h, ds) = if horizontal {
            (if j == 0 { p + nx } else { p - nx }, mesh.hy, mesh.hx)
        } else {
            (if i == 0 { p + 1 } else { p - 1 }, mesh.hx, mesh.hy)
        };
        let w = if k == 0 || k + 1 == nodes.len() { half * ds } else { ds };
        total += w * rho[p] * rho[p] * (s[p] - s[inner]) / h;
    }
    total
}

/// `max_p |ρ_p² ∇S_p|`, central differences inside and one-sided on the boundary.
pub fn peak_current_density<T: Real>(mesh: &Mesh<T>, rho: &[T], s: &[T]) -> T {
    let (nx, ny) = (mesh.nx, mesh.ny);
    let two = T::lit(2.0);
    let mut peak = T::zero();
    for j in 0..ny {
        for i in 0..nx {
            let p = i + j * nx;
            let dx = if i == 0 {
                (s[p + 1] - s[p]) / mesh.hx
            } else if i == nx - 1 {
                (s[p] - s[p - 1]) / mesh.hx
            } else {
                (s[p + 1] - s[p - 1]) / (two * mesh.hx)
            };
            let dy = if j == 0 {
                (s[p + nx] - s[p]) / mesh.hy
            } else if j == ny - 1 {
                (s[p] - s[p - nx]) / mesh.hy
            } else {
                (s[p + nx] - s[p - nx]) / (two * mesh.hy)
            };
            let j_mag = rho[p] * rho[p] * (dx * dx + dy * dy).sqrt();
            peak = peak.max(j_mag);
        }
    }
    peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, ContactSpec, DeviceGeometry, Edge};

    fn strip(width: f64, nx: usize) -> Mesh<f64> {
        let c = |name, edge| ContactSpec { name, edge, span: (0.0, 1.0), applied_voltage: 0.0, schottky_factor: 1.0 };
        let g = DeviceGeometry {
            width,
            height: 1.0,
            contacts: vec![c(ContactName::Source, Edge::Left), c(ContactName::Drain, Edge::Right)],
            nplus_regions: vec![],
            channel_doping: 0.01,
            nplus_doping: 1.0,
        };
        build_mesh(&g, nx, 3).unwrap()
    }

    #[test]
    fn no_current_for_constant_potential() {
        let m: Mesh<f64> = build_mesh(&DeviceGeometry::mesfet(), 12, 12).unwrap();
        let w = contact_mask(&m, ContactName::Drain).unwrap();
        let i = boundary_current(&m, &vec![0.7; m.len()], &vec![3.0; m.len()], &w).unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn one_dimensional_resistor() {
        // Unit-height strip of width 2 with S = x/2: flux 1/2 leaves through the right contact.
        let m = strip(2.0, 21);
        let s: Vec<f64> = (0..m.len()).map(|p| m.x(p) / 2.0).collect();
        let w = contact_mask(&m, ContactName::Drain).unwrap();
        let i = boundary_current(&m, &vec![1.0; m.len()], &s, &w).unwrap();
        assert!((i - 0.5).abs() < 1e-10, "{i}");
        let d = direct_flux(&m, &vec![1.0; m.len()], &s, ContactName::Drain);
        assert!((d - 0.5).abs() < 1e-10, "{d}");
    }

    #[test]
    fn mask_must_match_contacts() {
        let m = strip(1.0, 8);
        let bad = vec![0.5; m.len()];
        assert!(boundary_current(&m, &vec![1.0; m.len()], &vec![0.0; m.len()], &bad).is_err());
        let mut both = vec![0.0; m.len()];
        for p in m.boundary_nodes(BoundarySelector::Dirichlet) {
            both[p] = 1.0;
        }
        assert!(boundary_current(&m, &vec![1.0; m.len()], &vec![0.0; m.len()], &both).is_err());
    }

    #[test]
    fn masks_partition_unity_on_contacts() {
        let m: Mesh<f64> = build_mesh(&DeviceGeometry::mesfet(), 16, 16).unwrap();
        let sum: Vec<f64> = ContactName::ALL
            .iter()
            .map(|&c| contact_mask(&m, c).unwrap())
            .fold(vec![0.0; m.len()], |acc, w| acc.iter().zip(&w).map(|(a, b)| a + b).collect());
        for p in m.boundary_nodes(BoundarySelector::Dirichlet) {
            assert!((sum[p] - 1.0).abs() < 1e-14);
        }
    }
}
