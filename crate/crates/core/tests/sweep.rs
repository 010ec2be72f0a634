use qdd_core::config::parse_config_str;
use qdd_core::sweep::run_epsilon_sweep;

const BASE: &str = "[geometry]\nnx = 14\nny = 14\n[physics]\nlambda2 = 0.0017\nepsilon2 = 1.88e-4\n[solver]\nnonlinear_tol = 1e-12\n[optimizer]\ntol = 0.0\nmax_iters = 2\n";

#[test]
fn classical_ladder_has_zero_distances() {
    let cfg = parse_config_str(&format!("{BASE}[sweep]\nn_max = 0\nepsilon2 = 0.0\n")).unwrap();
    let (_, rep) = run_epsilon_sweep::<f64>(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 2);
    for row in &rep.rows {
        let d = row.distances.unwrap();
        assert_eq!((d.c, d.n, d.s, d.cost_gap), (0.0, 0.0, 0.0, 0.0));
    }
}

#[test]
fn ladder_approaches_classical_optimum() {
    for warm in [true, false] {
        let cfg = parse_config_str(&format!("{BASE}[sweep]\nn_max = 3\nwarm_start = {warm}\n")).unwrap();
        let (_, rep) = run_epsilon_sweep::<f64>(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 5);
        assert_eq!(rep.baseline().n, None);
        let d: Vec<_> = rep.ladder().iter().map(|r| r.distances.unwrap()).collect();
        for w in d.windows(2) {
            assert!(w[1].c <= w[0].c && w[1].n <= w[0].n && w[1].s <= w[0].s && w[1].cost_gap <= w[0].cost_gap, "{w:?}");
        }
        assert!(d[3].n <= 0.1 * d[0].n);
        for (k, r) in rep.ladder().iter().enumerate() {
            assert_eq!(r.n, Some(k));
            assert!((r.eps2 - 1.88e-4 * 10f64.powi(-2 * k as i32)).abs() <= 1e-30);
        }
    }
}

#[test]
fn sweep_is_deterministic() {
    let cfg = parse_config_str(&format!("{BASE}[sweep]\nn_max = 1\n")).unwrap();
    let (_, a) = run_epsilon_sweep::<f64>(&cfg).unwrap();
    let (_, b) = run_epsilon_sweep::<f64>(&cfg).unwrap();
    assert_eq!(qdd_core::output::sweep_csv(&a), qdd_core::output::sweep_csv(&b));
}
