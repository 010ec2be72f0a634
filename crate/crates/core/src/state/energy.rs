use crate::discrete::field::{inner_l2_raw, stiffness_form};
use crate::discrete::operator::{assemble_weighted_laplacian, lumped_load, Trace};
use crate::discrete::ScalarField;
use crate::doping::BoundaryData;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::real::Real;

/// `H(t) = t log t − t + 1`, the primitive of `log` with `H(1) = 0`.
fn enthalpy_primitive<T: Real>(t: T) -> T {
    t * t.ln() - t + T::one()
}

/// Classical energy `∫ H(ρ²) + ∫ (Φ_e + V_ext − S) ρ² + λ²/2 ∫ |∇Φ[ρ² − C]|²`.
///
/// `Φ_e` is the harmonic lifting of `V_D` and `Φ` the zero-trace solution operator of
/// `−λ²Δ`, so `V = Φ[ρ² − C] + Φ_e`. With this splitting the ρ-derivative of the energy is
/// exactly twice the density residual, also for nonzero contact potentials.
#[allow(clippy::too_many_arguments)]
pub fn classical_energy<T: Real>(
    mesh: &Mesh<T>,
    rho: &ScalarField<T>,
    s: &ScalarField<T>,
    c: &ScalarField<T>,
    lambda2: T,
    v_ext: &ScalarField<T>,
    bd: &BoundaryData<T>,
) -> Result<T> {
    for f in [rho, s, c, v_ext] {
        f.check_mesh(mesh)?;
    }
    let n = mesh.len();
    let lap = |trace: Trace<'_, T>| assemble_weighted_laplacian(mesh, &vec![lambda2; n], trace);
    let phi_e = lap(Trace::Values(&bd.v_d))?.solve(&vec![T::zero(); n])?;
    let charge: Vec<T> = (0..n).map(|p| rho[p] * rho[p] - c[p]).collect();
    let w = lap(Trace::Homogeneous)?.solve(&lumped_load(mesh, &charge))?;
    let dens: Vec<T> = rho.iter().map(|&r| enthalpy_primitive(r * r)).collect();
    let pot: Vec<T> = (0..n).map(|p| (phi_e[p] + v_ext[p] - s[p]) * rho[p] * rho[p]).collect();
    let ones = vec![T::one(); n];
    Ok(inner_l2_raw(mesh, &dens, &ones) + inner_l2_raw(mesh, &pot, &ones) + T::lit(0.5) * lambda2 * stiffness_form(mesh, &w, &w))
}

/// Quantum energy: `ε² ∫ |∇ρ|²` plus [`classical_energy`].
#[allow(clippy::too_many_arguments)]
pub fn energy_eval<T: Real>(
    mesh: &Mesh<T>,
    rho: &ScalarField<T>,
    s: &ScalarField<T>,
    c: &ScalarField<T>,
    eps2: T,
    lambda2: T,
    v_ext: &ScalarField<T>,
    bd: &BoundaryData<T>,
) -> Result<T> {
    Ok(eps2 * stiffness_form(mesh, rho, rho) + classical_energy(mesh, rho, s, c, lambda2, v_ext, bd)?)
}
