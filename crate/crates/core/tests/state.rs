mod common;

use common::*;
use qdd_core::discrete::{grad_seminorm_sq, BcRole, ScalarField};
use qdd_core::doping::{build_boundary_data, BoundaryData, DopingProfile};
use qdd_core::mesh::{build_mesh, BoundarySelector};
use qdd_core::state::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn flat_equilibrium_is_exact_for_both_models() {
    let su = flat_equilibrium(30);
    for eps2 in [EPS2, 0.0] {
        let st = gummel_solve(&su.mesh, &su.profile.c, &su.physics(eps2), &su.bd, &SolverConfig::default(), None).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(st.residual <= 1e-10);
        assert!(st.rho.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert!(st.v.max_abs() < 1e-12 && st.s.max_abs() < 1e-12);
    }
}

#[test]
fn poisson_neutral_and_linear() {
    let su = mesfet(24);
    let m = &su.mesh;
    let zero_bd = BoundaryData { v_d: vec![0.0; m.len()], ..su.bd.clone() };
    let rho = su.profile.c.map(f64::sqrt);
    let v = solve_poisson_v(m, &rho, &su.profile.c, LAMBDA2, &zero_bd).unwrap();
    assert!(v.max_abs() < 1e-12);

    // Φ_V[f] − Φ_V[0] = Φ[f]: the lifting cancels.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = ScalarField::new(m, (0..m.len()).map(|_| rng.gen_range(0.1..1.0)).collect(), BcRole::Free).unwrap();
    let c0 = r.map(|x| x * x);
    let with = solve_poisson_v(m, &r, &su.profile.c, LAMBDA2, &su.bd).unwrap();
    let base = solve_poisson_v(m, &r, &c0, LAMBDA2, &su.bd).unwrap();
    let hom = solve_poisson_v(m, &r, &su.profile.c, LAMBDA2, &zero_bd).unwrap();
    for p in 0..m.len() {
        assert!((with[p] - base[p] - hom[p]).abs() < 1e-12);
    }
}

#[test]
fn continuity_constant_and_laplace() {
    let su = mesfet(20);
    let m = &su.mesh;
    let const_bd = BoundaryData { s_d: vec![0.3; m.len()], ..su.bd.clone() };
    let rho = su.profile.c.map(f64::sqrt);
    let s = solve_continuity_s(m, &rho, &const_bd, 1e-10).unwrap();
    assert!(s.iter().all(|&x| (x - 0.3).abs() < 1e-12));

    let ones = ScalarField::constant(m, 1.0, BcRole::Free);
    let s = solve_continuity_s(m, &ones, &su.bd, 1e-10).unwrap();
    let op = qdd_core::discrete::assemble_weighted_laplacian(m, &vec![1.0; m.len()], qdd_core::discrete::Trace::Values(&su.bd.s_d)).unwrap();
    let lap = op.solve(&vec![0.0; m.len()]).unwrap();
    for p in 0..m.len() {
        assert!((s[p] - lap[p]).abs() < 1e-12);
    }
    let low = rho.map(|_| 1e-12);
    assert!(matches!(solve_continuity_s(m, &low, &su.bd, 1e-10), Err(qdd_core::Error::Positivity(_))));
}

#[test]
fn continuity_one_dimensional_profile() {
    // ρ² = 1 + x on [0, 1] with S = 0 left and 1 right has S = log(1 + x) / log 2.
    let err = |nx: usize| {
        let g = strip_geometry(1.0);
        let m = build_mesh(&g, nx, 3).unwrap();
        let prof = DopingProfile::uniform(&m, 1.0).unwrap();
        let mut bd = build_boundary_data(&m, &prof, &g.contacts, 1.0).unwrap();
        for p in m.boundary_nodes(BoundarySelector::Dirichlet) {
            bd.s_d[p] = if m.x(p) > 0.5 { 1.0 } else { 0.0 };
        }
        let rho = ScalarField::from_fn(&m, BcRole::Free, |x, _| (1.0 + x).sqrt());
        let s = solve_continuity_s(&m, &rho, &bd, 1e-10).unwrap();
        (0..m.len()).map(|p| (s[p] - (1.0 + m.x(p)).ln() / 2f64.ln()).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(21), err(41));
    assert!(e1 < 1e-3, "{e1}");
    assert!(e1 / e2 > 3.5, "{e1} {e2}");
}

#[test]
fn density_solve_constant_and_minimal() {
    let su = flat_equilibrium(16);
    let m = &su.mesh;
    let z = ScalarField::zeros(m, BcRole::Free);
    let rho = solve_density_rho(m, &z, &z, EPS2, &z, &su.bd, &SolverConfig::default(), None).unwrap();
    assert!(rho.iter().all(|&r| (r - 1.0).abs() < 1e-12));

    // Frozen-field energy ε²∫|∇ρ|² + ∫H(ρ²) + ∫(V − S)ρ² is minimal at the solution.
    let su = mesfet(16);
    let m = &su.mesh;
    let st = gummel_solve(m, &su.profile.c, &su.physics(EPS2), &su.bd, &tight(), None).unwrap();
    let rho = solve_density_rho(m, &st.v, &st.s, EPS2, &z, &su.bd, &tight(), None).unwrap();
    let frozen = |r: &ScalarField<f64>| {
        let pot: Vec<f64> = (0..m.len())
            .map(|p| {
                let t = r[p] * r[p];
                t * t.ln() - t + 1.0 + (st.v[p] - st.s[p]) * t
            })
            .collect();
        EPS2 * grad_seminorm_sq(m, r).unwrap() + (0..m.len()).map(|p| m.area(p) * pot[p]).sum::<f64>()
    };
    let e0 = frozen(&rho);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let mut pert = rho.clone();
        for p in 0..m.len() {
            if !m.is_dirichlet(p) {
                pert[p] += 1e-2 * rng.gen_range(-1.0..1.0) * rho[p];
            }
        }
        assert!(frozen(&pert) > e0);
    }
}

#[test]
fn density_approaches_classical_profile() {
    // Away from the contacts, small ε gives ρ ≈ exp((S − V)/2).
    let g = strip_geometry(1.0);
    let m = build_mesh(&g, 81, 3).unwrap();
    let prof = DopingProfile::uniform(&m, 1.0).unwrap();
    let bd = build_boundary_data(&m, &prof, &g.contacts, 1.0).unwrap();
    let v = ScalarField::from_fn(&m, BcRole::Free, |x, _| 0.5 * x);
    let s = ScalarField::from_fn(&m, BcRole::Free, |x, _| -0.3 * x);
    let z = ScalarField::zeros(&m, BcRole::Free);
    let rho = solve_density_rho(&m, &v, &s, 1e-4, &z, &bd, &SolverConfig::default(), None).unwrap();
    for p in 0..m.len() {
        let x = m.x(p);
        if (0.25..=0.75).contains(&x) {
            let classical = ((s[p] - v[p]) / 2.0).exp();
            assert!((rho[p] - classical).abs() < 1e-3 * classical, "x={x}: {} vs {classical}", rho[p]);
        }
    }
}

#[test]
fn mesfet_reference_states() {
    let su = mesfet(40);
    let m = &su.mesh;
    let z = ScalarField::zeros(m, BcRole::Free);
    let cfg = SolverConfig::default();
    let dd = solve_dd(m, &su.profile.c, LAMBDA2, &z, &su.bd, &cfg, None).unwrap();
    let qdd = gummel_solve(m, &su.profile.c, &su.physics(EPS2), &su.bd, &cfg, None).unwrap();
    let (smin, smax) = m
        .boundary_nodes(BoundarySelector::Dirichlet)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(su.bd.s_d[p]), b.max(su.bd.s_d[p])));
    for st in [&dd, &qdd] {
        assert!(st.residual <= 1e-8);
        assert!(st.rho.min() > 0.0);
        assert!(st.s.iter().all(|&s| s >= smin - 1e-12 && s <= smax + 1e-12));
        assert!(st.v.max_abs().is_finite());
        for p in m.boundary_nodes(BoundarySelector::Dirichlet) {
            assert_eq!((st.rho[p], st.v[p], st.s[p]), (su.bd.rho_d[p], su.bd.v_d[p], su.bd.s_d[p]));
        }
    }
    // Boltzmann relation of the classical solve.
    for p in (0..m.len()).filter(|&p| !m.is_dirichlet(p)) {
        assert!((dd.rho[p] * dd.rho[p] - (dd.s[p] - dd.v[p]).exp()).abs() <= 1e-8);
    }
    // Warm start from a neighbouring ε needs fewer outer iterations.
    let near = gummel_solve(m, &su.profile.c, &su.physics(EPS2 * 0.5), &su.bd, &cfg, Some(&qdd)).unwrap();
    let cold = gummel_solve(m, &su.profile.c, &su.physics(EPS2 * 0.5), &su.bd, &cfg, None).unwrap();
    assert!(near.iterations < cold.iterations, "{} vs {}", near.iterations, cold.iterations);
    let res = state_residual(m, &su.profile.c, &su.physics(EPS2 * 0.5), &su.bd, &near).unwrap();
    assert_eq!(res, near.residual);
}

#[test]
fn quantum_density_is_smoother_than_classical_at_same_potential() {
    let su = mesfet(30);
    let m = &su.mesh;
    let z = ScalarField::zeros(m, BcRole::Free);
    let cfg = tight();
    for eps2 in [EPS2 * 1e-8, EPS2 * 1e-10] {
        let st = gummel_solve(m, &su.profile.c, &su.physics(eps2), &su.bd, &cfg, None).unwrap();
        let (rho_cl, _) = boltzmann_density(m, &st.s, &su.profile.c, LAMBDA2, &z, &su.bd, &cfg).unwrap();
        assert!(grad_seminorm_sq(m, &st.rho).unwrap() <= grad_seminorm_sq(m, &rho_cl).unwrap());
    }
}

#[test]
fn energy_identities_and_minimality() {
    let su = flat_equilibrium(12);
    let m = &su.mesh;
    let z = ScalarField::zeros(m, BcRole::Free);
    let one = ScalarField::constant(m, 1.0, BcRole::Free);
    let e = energy_eval(m, &one, &z, &su.profile.c, EPS2, LAMBDA2, &z, &su.bd).unwrap();
    assert!(e.abs() < 1e-14);

    let su = mesfet(20);
    let m = &su.mesh;
    let z = ScalarField::zeros(m, BcRole::Free);
    let st = gummel_solve(m, &su.profile.c, &su.physics(EPS2), &su.bd, &tight(), None).unwrap();
    let eq = energy_eval(m, &st.rho, &st.s, &su.profile.c, EPS2, LAMBDA2, &z, &su.bd).unwrap();
    let ec = classical_energy(m, &st.rho, &st.s, &su.profile.c, LAMBDA2, &z, &su.bd).unwrap();
    let diff = EPS2 * grad_seminorm_sq(m, &st.rho).unwrap();
    assert!((eq - ec - diff).abs() <= 1e-14 * eq.abs().max(1.0));
    assert!(diff >= 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mut pert = st.rho.clone();
        for p in 0..m.len() {
            if !m.is_dirichlet(p) {
                pert[p] *= 1.0 + 1e-2 * rng.gen_range(-1.0..1.0);
            }
        }
        let ep = energy_eval(m, &pert, &st.s, &su.profile.c, EPS2, LAMBDA2, &z, &su.bd).unwrap();
        assert!(ep > eq, "{ep} <= {eq}");
    }
}

#[test]
fn rejects_invalid_inputs() {
    let su = mesfet(12);
    let m = &su.mesh;
    let bad = SolverConfig { damping: 0.0, ..SolverConfig::default() };
    let err = gummel_solve(m, &su.profile.c, &su.physics(EPS2), &su.bd, &bad, None).unwrap_err();
    assert!(matches!(err, qdd_core::Error::Config(_)));
    let neg = su.profile.c.map(|c| -c);
    assert!(gummel_solve(m, &neg, &su.physics(EPS2), &su.bd, &SolverConfig::default(), None).is_err());
    let other = build_mesh(&su.geom, 13, 12).unwrap();
    let c = ScalarField::constant(&other, 1.0, BcRole::Free);
    assert!(matches!(
        gummel_solve(m, &c, &su.physics(EPS2), &su.bd, &SolverConfig::default(), None),
        Err(qdd_core::Error::MeshMismatch(_))
    ));
    let capped = SolverConfig { max_gummel: 1, newton_polish: false, ..SolverConfig::default() };
    assert!(matches!(
        gummel_solve(m, &su.profile.c, &su.physics(EPS2), &su.bd, &capped, None),
        Err(qdd_core::Error::NonConvergence { .. })
    ));
}

mod properties {
    use super::*;
    use proptest::prelude::*;
    use qdd_core::adjoint::random_directions;
    use qdd_core::discrete::contact_currents;

    proptest! {
        #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

        #[test]
        fn states_obey_bounds_and_conservation(seed in 0u64..10_000, amp in 0.0f64..0.5, quantum in any::<bool>()) {
            let su = mesfet(14);
            let m = &su.mesh;
            let d = &random_directions(m, 1, seed).unwrap()[0];
            let c = ScalarField::new(m, (0..m.len()).map(|p| su.profile.c[p] * (1.0 + amp * d[p])).collect(), BcRole::Free).unwrap();
            let eps2 = if quantum { EPS2 } else { 0.0 };
            let st = gummel_solve(m, &c, &su.physics(eps2), &su.bd, &tight(), None).unwrap();
            let sd: Vec<f64> = m.boundary_nodes(BoundarySelector::Dirichlet).iter().map(|&p| su.bd.s_d[p]).collect();
            let (lo, hi) = (sd.iter().copied().fold(f64::INFINITY, f64::min), sd.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            prop_assert!(st.s.iter().all(|&s| s >= lo - 1e-12 && s <= hi + 1e-12));
            prop_assert!(st.rho.min() > 0.0);
            let currents = contact_currents(m, &st.rho, &st.s).unwrap();
            let total: f64 = currents.iter().map(|x| x.1).sum();
            let scale = currents.iter().map(|x| x.1.abs()).fold(0.0, f64::max);
            prop_assert!(total.abs() <= 1e-8 * scale);
        }
    }
}
