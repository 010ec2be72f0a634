#![allow(dead_code)]

use qdd_core::doping::{build_boundary_data, build_reference_doping, BoundaryData, DopingProfile};
use qdd_core::mesh::{build_mesh, ContactName, ContactSpec, DeviceGeometry, Edge, Mesh};
use qdd_core::state::{Physics, SolverConfig};

pub const LAMBDA2: f64 = 0.0017;
pub const EPS2: f64 = 1.88e-4;

pub struct Setup {
    pub geom: DeviceGeometry<f64>,
    pub mesh: Mesh<f64>,
    pub profile: DopingProfile<f64>,
    pub bd: BoundaryData<f64>,
}

impl Setup {
    pub fn physics(&self, eps2: f64) -> Physics<f64> {
        Physics::new(&self.mesh, eps2, LAMBDA2)
    }
}

/// Default MESFET with the reference doping smoothed over two cells.
pub fn mesfet(n: usize) -> Setup {
    let geom = DeviceGeometry::mesfet();
    let mesh = build_mesh(&geom, n, n).unwrap();
    let profile = build_reference_doping(&geom, &mesh, 2.0).unwrap();
    let bd = build_boundary_data(&mesh, &profile, &geom.contacts, 1.0).unwrap();
    Setup { geom, mesh, profile, bd }
}

/// MESFET contacts with flat doping `C ≡ 1`, Ohmic gate and zero bias.
pub fn flat_equilibrium(n: usize) -> Setup {
    let mut geom = DeviceGeometry::mesfet();
    for c in &mut geom.contacts {
        c.applied_voltage = 0.0;
        c.schottky_factor = 1.0;
    }
    let mesh = build_mesh(&geom, n, n).unwrap();
    let profile = DopingProfile::uniform(&mesh, 1.0).unwrap();
    let bd = build_boundary_data(&mesh, &profile, &geom.contacts, 1.0).unwrap();
    Setup { geom, mesh, profile, bd }
}

/// `width × 1` strip with Ohmic contacts covering the left and right edges.
pub fn strip_geometry(width: f64) -> DeviceGeometry<f64> {
    let c = |name, edge| ContactSpec { name, edge, span: (0.0, 1.0), applied_voltage: 0.0, schottky_factor: 1.0 };
    DeviceGeometry {
        width,
        height: 1.0,
        contacts: vec![c(ContactName::Source, Edge::Left), c(ContactName::Drain, Edge::Right)],
        nplus_regions: vec![],
        channel_doping: 1.0,
        nplus_doping: 2.0,
    }
}

pub fn tight() -> SolverConfig<f64> {
    SolverConfig { nonlinear_tol: 1e-11, ..SolverConfig::default() }
}

/// Max-norm error of the weighted Laplacian solve for `u = eˣ cos(πy)` with `w = 1 + x + y`
/// on an `n × n` unit strip, and the grid spacing.
pub fn manufactured_error(n: usize) -> (f64, f64) {
    use qdd_core::discrete::operator::{assemble_weighted_laplacian, lumped_load, Trace};
    use std::f64::consts::PI;
    let g = strip_geometry(1.0);
    let m = build_mesh(&g, n, n).unwrap();
    let u = |x: f64, y: f64| x.exp() * (PI * y).cos();
    // −div(w∇u) with ∇w = (1, 1), u_x = u, u_y = −π eˣ sin(πy), Δu = (1 − π²) u.
    let f = |x: f64, y: f64| {
        let w = 1.0 + x + y;
        -(u(x, y) - PI * x.exp() * (PI * y).sin() + w * (1.0 - PI * PI) * u(x, y))
    };
    let w: Vec<f64> = (0..m.len()).map(|p| 1.0 + m.x(p) + m.y(p)).collect();
    let exact: Vec<f64> = (0..m.len()).map(|p| u(m.x(p), m.y(p))).collect();
    let op = assemble_weighted_laplacian(&m, &w, Trace::Values(&exact)).unwrap();
    let load: Vec<f64> = (0..m.len()).map(|p| f(m.x(p), m.y(p))).collect();
    let sol = op.solve(&lumped_load(&m, &load)).unwrap();
    let err = (0..m.len()).map(|p| (sol[p] - exact[p]).abs()).fold(0.0, f64::max);
    (err, m.hx)
}
