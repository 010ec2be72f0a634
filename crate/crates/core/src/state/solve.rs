use log::{debug, warn};

use super::residual::{jacobian, residual, Fields, Problem};
use super::{Physics, SolverConfig, StateTriple};
use crate::discrete::linalg::BandMatrix;
use crate::discrete::operator::{assemble_weighted_laplacian, lumped_load, Trace};
use crate::discrete::{BcRole, ScalarField};
use crate::doping::BoundaryData;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::real::Real;

/// Solves `−λ²ΔV = ρ² − C` with `V = V_D` on the contacts.
pub fn solve_poisson_v<T: Real>(
    mesh: &Mesh<T>,
    rho: &ScalarField<T>,
    c: &ScalarField<T>,
    lambda2: T,
    bd: &BoundaryData<T>,
) -> Result<ScalarField<T>> {
    rho.check_mesh(mesh)?;
    c.check_mesh(mesh)?;
    if !(lambda2 > T::zero()) {
        return Err(Error::InvalidInput(format!("lambda2 must be > 0, got {lambda2}")));
    }
    let f: Vec<T> = rho.iter().zip(c.iter()).map(|(&r, &c)| r * r - c).collect();
    let v = poisson(mesh, &f, lambda2, &bd.v_d)?;
    Ok(ScalarField::from_raw(mesh, v, BcRole::DirichletLifted))
}

fn poisson<T: Real>(mesh: &Mesh<T>, f: &[T], lambda2: T, trace: &[T]) -> Result<Vec<T>> {
    let op = assemble_weighted_laplacian(mesh, &vec![lambda2; mesh.len()], Trace::Values(trace))?;
    op.solve(&lumped_load(mesh, f))
}

/// Solves `−div(ρ²∇S) = 0` with `S = S_D` on the contacts.
pub fn solve_continuity_s<T: Real>(
    mesh: &Mesh<T>,
    rho: &ScalarField<T>,
    bd: &BoundaryData<T>,
    rho_floor: T,
) -> Result<ScalarField<T>> {
    rho.check_mesh(mesh)?;
    Ok(ScalarField::from_raw(mesh, continuity(mesh, rho, &bd.s_d, rho_floor)?, BcRole::DirichletLifted))
}

fn continuity<T: Real>(mesh: &Mesh<T>, rho: &[T], s_d: &[T], rho_floor: T) -> Result<Vec<T>> {
    if let Some(p) = rho.iter().position(|&r| !(r >= rho_floor)) {
        return Err(Error::Positivity(format!("rho = {:e} below the floor at node {p}", rho[p])));
    }
    let w: Vec<T> = rho.iter().map(|&r| r * r).collect();
    let op = assemble_weighted_laplacian(mesh, &w, Trace::Values(s_d))?;
    op.solve(&vec![T::zero(); mesh.len()])
}

/// Damped Newton for `−ε²Δρ + ρ(log ρ² + V + V_ext − S) = 0` with `V` and `S` frozen.
#[allow(clippy::too_many_arguments)]
pub fn solve_density_rho<T: Real>(
    mesh: &Mesh<T>,
    v: &ScalarField<T>,
    s: &ScalarField<T>,
    eps2: T,
    v_ext: &ScalarField<T>,
    bd: &BoundaryData<T>,
    cfg: &SolverConfig<T>,
    init: Option<&ScalarField<T>>,
) -> Result<ScalarField<T>> {
    for f in [v, s, v_ext] {
        f.check_mesh(mesh)?;
    }
    if !(eps2 > T::zero()) {
        return Err(Error::InvalidInput(format!("eps2 must be > 0 for the density solve, got {eps2}")));
    }
    let n = mesh.len();
    let mut rho: Vec<T> = match init {
        Some(r) => {
            r.check_mesh(mesh)?;
            r.to_vec()
        }
        None => (0..n).map(|p| ((s[p] - v[p] - v_ext[p]) * T::lit(0.5)).exp()).collect(),
    };
    pin(mesh, &mut rho, &bd.rho_d);
    // Frozen-field residual: the coupled residual's ρ row does not depend on C or λ².
    let zeros = vec![T::zero(); n];
    let pb = Problem { mesh, c: &zeros, bd, eps2, lambda2: T::one(), v_ext };
    let res = |rho: &[T]| -> (T, T) {
        let r = residual(&pb, rho, v, s).rho;
        let mut max = T::zero();
        let mut merit = T::zero();
        for p in 0..n {
            let a = mesh.area(p);
            max = max.max(r[p].abs() / a);
            merit += r[p] * r[p] / a;
        }
        (max, merit.sqrt())
    };
    let (mut rmax, mut merit) = res(&rho);
    let tol = cfg.newton_tol;
    let mut it = 0;
    while rmax > tol {
        if it == cfg.max_newton {
            return Err(Error::NonConvergence { solver: "density Newton", iterations: it, residual: rmax.to_f64_lossy() });
        }
        it += 1;
        let r = residual(&pb, &rho, v, s).rho;
        let mut jac = BandMatrix::new(n, mesh.nx, mesh.nx);
        let full = jacobian(&pb, &rho, v, s, Fields::RhoV);
        for row in 0..n {
            for col in row.saturating_sub(mesh.nx)..=(row + mesh.nx).min(n - 1) {
                let val = full.get(2 * row, 2 * col);
                if val != T::zero() {
                    jac.add(row, col, val);
                }
            }
        }
        let mut d: Vec<T> = r.iter().map(|&x| -x).collect();
        jac.factor()?.solve_in_place(&mut d);
        match line_search(&rho, &d, merit, cfg, |trial| {
            let (m, me) = res(trial);
            Some((m, me))
        }) {
            Some((next, m, me)) => {
                rho = next;
                rmax = m;
                merit = me;
            }
            None if rmax <= cfg.nonlinear_tol => break,
            None => {
                return Err(Error::NonConvergence { solver: "density Newton", iterations: it, residual: rmax.to_f64_lossy() })
            }
        }
    }
    check_floor(&rho, cfg.rho_floor)?;
    Ok(ScalarField::from_raw(mesh, rho, BcRole::DirichletLifted))
}

fn pin<T: Real>(mesh: &Mesh<T>, x: &mut [T], trace: &[T]) {
    for p in 0..mesh.len() {
        if mesh.is_dirichlet(p) {
            x[p] = trace[p];
        }
    }
}

fn check_floor<T: Real>(rho: &[T], floor: T) -> Result<()> {
    match rho.iter().position(|&r| !(r >= floor)) {
        Some(p) => Err(Error::Positivity(format!("rho = {:e} below the floor at node {p}", rho[p]))),
        None => Ok(()),
    }
}

/// Backtracking on a merit value. The first field of `x` (every `stride`-th entry from 0) is `ρ`
/// and is kept above a tenth of its current value.
fn line_search<T: Real>(
    x: &[T],
    d: &[T],
    merit: T,
    cfg: &SolverConfig<T>,
    mut eval: impl FnMut(&[T]) -> Option<(T, T)>,
) -> Option<(Vec<T>, T, T)> {
    line_search_strided(x, d, merit, 1, cfg, &mut eval)
}

fn line_search_strided<T: Real>(
    x: &[T],
    d: &[T],
    merit: T,
    stride: usize,
    _cfg: &SolverConfig<T>,
    eval: &mut impl FnMut(&[T]) -> Option<(T, T)>,
) -> Option<(Vec<T>, T, T)> {
    // Fraction to the boundary: ρ may shrink by at most a factor of ten per step.
    let mut alpha = T::one();
    let tenth = T::lit(0.9);
    for k in (0..x.len()).step_by(stride) {
        if d[k] < T::zero() {
            alpha = alpha.min(-tenth * x[k] / d[k]);
        }
    }
    for _ in 0..40 {
        let trial: Vec<T> = x.iter().zip(d).map(|(&a, &b)| a + alpha * b).collect();
        if let Some((m, me)) = eval(&trial) {
            if me.is_finite() && me < merit {
                return Some((trial, m, me));
            }
        }
        alpha *= T::lit(0.5);
    }
    None
}

/// Interleaves `fields` node by node.
fn pack<T: Real>(fields: &[&[T]]) -> Vec<T> {
    let n = fields[0].len();
    let mut out = Vec::with_capacity(n * fields.len());
    for p in 0..n {
        for f in fields {
            out.push(f[p]);
        }
    }
    out
}

fn unpack<T: Real>(x: &[T], fields: &mut [&mut Vec<T>]) {
    let f = fields.len();
    for (p, chunk) in x.chunks(f).enumerate() {
        for (k, v) in chunk.iter().enumerate() {
            fields[k][p] = *v;
        }
    }
}

fn strong<T: Real>(mesh: &Mesh<T>, pb: &Problem<'_, T>, rho: &[T], v: &[T], s: &[T], which: Fields) -> (T, T) {
    let r = residual(pb, rho, v, s);
    (r.max_strong(mesh, which), r.merit(mesh, which))
}

/// Newton on the `(ρ, V)` block at frozen `S` (or on all three fields).
fn newton<T: Real>(
    pb: &Problem<'_, T>,
    rho: &mut Vec<T>,
    v: &mut Vec<T>,
    s: &mut Vec<T>,
    which: Fields,
    tol: T,
    cfg: &SolverConfig<T>,
) -> Result<T> {
    let mesh = pb.mesh;
    let f = which.count();
    let (mut rmax, mut merit) = strong(mesh, pb, rho, v, s, which);
    let mut it = 0;
    while rmax > tol {
        if it == cfg.max_newton {
            return Err(Error::NonConvergence { solver: "coupled Newton", iterations: it, residual: rmax.to_f64_lossy() });
        }
        it += 1;
        let r = residual(pb, rho, v, s);
        let mut d: Vec<T> = match which {
            Fields::RhoV => pack(&[&r.rho, &r.v]),
            Fields::Full => pack(&[&r.rho, &r.v, &r.s]),
        };
        d.iter_mut().for_each(|x| *x = -*x);
        jacobian(pb, rho, v, s, which).factor()?.solve_in_place(&mut d);
        let x = match which {
            Fields::RhoV => pack(&[rho, v]),
            Fields::Full => pack(&[rho, v, s]),
        };
        let mut eval = |t: &[T]| {
            let (mut tr, mut tv, mut ts) = (rho.clone(), v.clone(), s.clone());
            match which {
                Fields::RhoV => unpack(t, &mut [&mut tr, &mut tv]),
                Fields::Full => unpack(t, &mut [&mut tr, &mut tv, &mut ts]),
            }
            if tr.iter().any(|&q| !(q > T::zero())) {
                return None;
            }
            Some(strong(mesh, pb, &tr, &tv, &ts, which))
        };
        match line_search_strided(&x, &d, merit, f, cfg, &mut eval) {
            Some((next, m, me)) => {
                match which {
                    Fields::RhoV => unpack(&next, &mut [rho, v]),
                    Fields::Full => unpack(&next, &mut [rho, v, s]),
                }
                rmax = m;
                merit = me;
            }
            // Stagnation at rounding level is acceptable; the caller judges the residual.
            None if rmax <= cfg.nonlinear_tol => break,
            None => {
                return Err(Error::NonConvergence { solver: "coupled Newton", iterations: it, residual: rmax.to_f64_lossy() })
            }
        }
    }
    Ok(rmax)
}

/// Newton for the classical nonlinear Poisson equation `−λ²ΔV = exp(S − V − V_ext) − C` at frozen `S`.
fn dd_poisson<T: Real>(pb: &Problem<'_, T>, rho: &mut [T], v: &mut [T], s: &[T], cfg: &SolverConfig<T>) -> Result<T> {
    let mesh = pb.mesh;
    let n = mesh.len();
    let density = |v: &[T], p: usize| (s[p] - v[p] - pb.v_ext[p]).exp();
    let eval = |v: &[T]| -> (Vec<T>, T, T) {
        let mut f = vec![T::zero(); n];
        mesh.for_each_edge(|p, q, k| {
            let d = pb.lambda2 * k * (v[p] - v[q]);
            f[p] += d;
            f[q] -= d;
        });
        let (mut max, mut merit) = (T::zero(), T::zero());
        for p in 0..n {
            if mesh.is_dirichlet(p) {
                f[p] = T::zero();
                continue;
            }
            let a = mesh.area(p);
            f[p] -= a * (density(v, p) - pb.c[p]);
            max = max.max(f[p].abs() / a);
            merit += f[p] * f[p] / a;
        }
        (f, max, merit.sqrt())
    };
    let (mut f, mut rmax, mut merit) = eval(v);
    let tol = cfg.newton_tol;
    let mut it = 0;
    while rmax > tol {
        if it == cfg.max_newton {
            return Err(Error::NonConvergence { solver: "nonlinear Poisson", iterations: it, residual: rmax.to_f64_lossy() });
        }
        it += 1;
        let react: Vec<T> = (0..n).map(|p| density(v, p)).collect();
        let mut op = assemble_weighted_laplacian(mesh, &vec![pb.lambda2; n], Trace::Homogeneous)?
            .with_solver(cfg.linear_solver);
        op.add_reaction(&react);
        let rhs: Vec<T> = f.iter().map(|&x| -x).collect();
        let mut d = op.solve(&rhs)?;
        // Limit the potential update; the exponential makes long steps unreliable.
        let big = d.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let cap = T::lit(2.0);
        if big > cap {
            d.iter_mut().for_each(|x| *x = *x * cap / big);
        }
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<T> = v.iter().zip(&d).map(|(&a, &b)| a + alpha * b).collect();
            let (tf, tm, tme) = eval(&trial);
            if tme.is_finite() && tme < merit {
                v.copy_from_slice(&trial);
                f = tf;
                rmax = tm;
                merit = tme;
                accepted = true;
                break;
            }
            alpha *= T::lit(0.5);
        }
        if !accepted {
            if rmax <= cfg.nonlinear_tol {
                break;
            }
            return Err(Error::NonConvergence { solver: "nonlinear Poisson", iterations: it, residual: rmax.to_f64_lossy() });
        }
    }
    for p in 0..n {
        rho[p] = if mesh.is_dirichlet(p) { pb.bd.rho_d[p] } else { (density(v, p)).sqrt() };
    }
    Ok(rmax)
}

/// Initial guess: `S` harmonic with trace `S_D`, `V` from local charge neutrality, `ρ = √C`.
fn initial_guess<T: Real>(pb: &Problem<'_, T>) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let mesh = pb.mesh;
    let n = mesh.len();
    let op = assemble_weighted_laplacian(mesh, &vec![T::one(); n], Trace::Values(&pb.bd.s_d))?;
    let s = op.solve(&vec![T::zero(); n])?;
    let mut v: Vec<T> = (0..n).map(|p| s[p] - pb.v_ext[p] - pb.c[p].ln()).collect();
    pin(mesh, &mut v, &pb.bd.v_d);
    let mut rho: Vec<T> = pb.c.iter().map(|c| c.sqrt()).collect();
    pin(mesh, &mut rho, &pb.bd.rho_d);
    Ok((rho, v, s))
}

fn validate_inputs<T: Real>(mesh: &Mesh<T>, c: &ScalarField<T>, phys: &Physics<T>, bd: &BoundaryData<T>) -> Result<()> {
    c.check_mesh(mesh)?;
    phys.v_ext.check_mesh(mesh)?;
    if bd.len() != mesh.len() {
        return Err(Error::MeshMismatch("boundary data length differs from node count".into()));
    }
    if !(phys.lambda2 > T::zero()) {
        return Err(Error::InvalidInput(format!("lambda2 must be > 0, got {}", phys.lambda2)));
    }
    if !(phys.eps2 >= T::zero()) || !phys.eps2.is_finite() {
        return Err(Error::InvalidInput(format!("eps2 must be finite and >= 0, got {}", phys.eps2)));
    }
    if let Some(p) = c.iter().position(|&x| !(x > T::zero())) {
        return Err(Error::Positivity(format!("doping is not positive at node {p}")));
    }
    if let Some(p) = (0..mesh.len()).find(|&p| mesh.is_dirichlet(p) && !(bd.rho_d[p] > T::zero())) {
        return Err(Error::Positivity(format!("rho_D is not positive at contact node {p}")));
    }
    Ok(())
}

/// Max-norm of the strong residual of a state.
pub fn state_residual<T: Real>(
    mesh: &Mesh<T>,
    c: &ScalarField<T>,
    phys: &Physics<T>,
    bd: &BoundaryData<T>,
    state: &StateTriple<T>,
) -> Result<T> {
    validate_inputs(mesh, c, phys, bd)?;
    let pb = Problem { mesh, c, bd, eps2: phys.eps2, lambda2: phys.lambda2, v_ext: &phys.v_ext };
    Ok(residual(&pb, &state.rho, &state.v, &state.s).max_strong(mesh, Fields::Full))
}

/// Damped Gummel iteration: the `(ρ, V)` block is solved by Newton at frozen `S`
/// (nonlinear Poisson with the Boltzmann relation when `ε = 0`), then `S` is relaxed
/// towards the solution of the continuity equation.
pub fn gummel_solve<T: Real>(
    mesh: &Mesh<T>,
    c: &ScalarField<T>,
    phys: &Physics<T>,
    bd: &BoundaryData<T>,
    cfg: &SolverConfig<T>,
    warm_start: Option<&StateTriple<T>>,
) -> Result<StateTriple<T>> {
    cfg.validate()?;
    validate_inputs(mesh, c, phys, bd)?;
    let classical = phys.eps2 == T::zero();
    let pb = Problem { mesh, c, bd, eps2: phys.eps2, lambda2: phys.lambda2, v_ext: &phys.v_ext };
    // Cold quantum solves start from the classical state; its sweeps count towards the total.
    let mut spent = 0;
    let (mut rho, mut v, mut s) = match warm_start {
        Some(w) => {
            w.rho.check_mesh(mesh)?;
            let (mut r, mut v, mut s) = (w.rho.to_vec(), w.v.to_vec(), w.s.to_vec());
            pin(mesh, &mut r, &bd.rho_d);
            pin(mesh, &mut v, &bd.v_d);
            pin(mesh, &mut s, &bd.s_d);
            (r, v, s)
        }
        None if classical => initial_guess(&pb)?,
        None => {
            let guess = initial_guess(&pb)?;
            if residual(&pb, &guess.0, &guess.1, &guess.2).max_strong(mesh, Fields::Full) <= cfg.nonlinear_tol {
                guess
            } else {
                let dd = gummel_solve(mesh, c, &phys.with_eps2(T::zero()), bd, cfg, None)?;
                spent = dd.iterations;
                (dd.rho.into_values(), dd.v.into_values(), dd.s.into_values())
            }
        }
    };
    let inner_tol = cfg.newton_tol.min(cfg.nonlinear_tol * T::lit(0.1));
    let inner_cfg = SolverConfig { newton_tol: inner_tol, ..cfg.clone() };
    let mut theta = cfg.damping;
    let mut prev = T::infinity();
    for k in 1..=cfg.max_gummel {
        if classical {
            dd_poisson(&pb, &mut rho, &mut v, &s, &inner_cfg)?;
        } else {
            newton(&pb, &mut rho, &mut v, &mut s, Fields::RhoV, inner_tol, &inner_cfg)?;
        }
        let mut res = residual(&pb, &rho, &v, &s).max_strong(mesh, Fields::Full);
        debug!("gummel {k}: residual {res:e}, damping {theta}");
        if res > cfg.nonlinear_tol && cfg.newton_polish && res <= cfg.polish_below {
            let (mut pr, mut pv, mut ps) = (rho.clone(), v.clone(), s.clone());
            if let Ok(r) = newton(&pb, &mut pr, &mut pv, &mut ps, Fields::Full, cfg.nonlinear_tol, &inner_cfg) {
                if r <= cfg.nonlinear_tol && pr.iter().all(|&q| q >= cfg.rho_floor) {
                    (rho, v, s, res) = (pr, pv, ps, r);
                }
            }
        }
        if res <= cfg.nonlinear_tol {
            check_floor(&rho, cfg.rho_floor)?;
            let cap = cfg.enthalpy.cap;
            if rho.iter().any(|&r| r * r >= cap) {
                warn!("density reaches the enthalpy cap {cap}; the logarithmic model is outside its regime");
            }
            return Ok(StateTriple {
                rho: ScalarField::from_raw(mesh, rho, BcRole::DirichletLifted),
                v: ScalarField::from_raw(mesh, v, BcRole::DirichletLifted),
                s: ScalarField::from_raw(mesh, s, BcRole::DirichletLifted),
                eps2: phys.eps2,
                residual: res,
                iterations: spent + k,
            });
        }
        if res > prev {
            theta = (theta * T::lit(0.5)).max(cfg.damping_floor);
        }
        prev = res;
        let s_new = continuity(mesh, &rho, &bd.s_d, cfg.rho_floor)?;
        for p in 0..mesh.len() {
            s[p] = s[p] + theta * (s_new[p] - s[p]);
        }
    }
    Err(Error::NonConvergence { solver: "Gummel", iterations: cfg.max_gummel, residual: prev.to_f64_lossy() })
}

/// Classical drift-diffusion limit `ε = 0`.
pub fn solve_dd<T: Real>(
    mesh: &Mesh<T>,
    c: &ScalarField<T>,
    lambda2: T,
    v_ext: &ScalarField<T>,
    bd: &BoundaryData<T>,
    cfg: &SolverConfig<T>,
    warm_start: Option<&StateTriple<T>>,
) -> Result<StateTriple<T>> {
    let phys = Physics { eps2: T::zero(), lambda2, v_ext: v_ext.clone() };
    gummel_solve(mesh, c, &phys, bd, cfg, warm_start)
}

/// Classical density at a prescribed quasi-Fermi potential: solves the nonlinear Poisson
/// equation with the Boltzmann relation and returns `(ρ, V)`.
#[allow(clippy::too_many_arguments)]
pub fn boltzmann_density<T: Real>(
    mesh: &Mesh<T>,
    s: &ScalarField<T>,
    c: &ScalarField<T>,
    lambda2: T,
    v_ext: &ScalarField<T>,
    bd: &BoundaryData<T>,
    cfg: &SolverConfig<T>,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    s.check_mesh(mesh)?;
    let phys = Physics { eps2: T::zero(), lambda2, v_ext: v_ext.clone() };
    validate_inputs(mesh, c, &phys, bd)?;
    let pb = Problem { mesh, c, bd, eps2: T::zero(), lambda2, v_ext };
    let (mut rho, mut v, _) = initial_guess(&pb)?;
    let mut v_neutral: Vec<T> = (0..mesh.len()).map(|p| s[p] - v_ext[p] - c[p].ln()).collect();
    pin(mesh, &mut v_neutral, &bd.v_d);
    v.copy_from_slice(&v_neutral);
    dd_poisson(&pb, &mut rho, &mut v, s, cfg)?;
    Ok((
        ScalarField::from_raw(mesh, rho, BcRole::DirichletLifted),
        ScalarField::from_raw(mesh, v, BcRole::DirichletLifted),
    ))
}
