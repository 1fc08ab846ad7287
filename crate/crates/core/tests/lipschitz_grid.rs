use lorentz_synth::lipschitz_grid::{ConeSampling, GridGeometry, MetricGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geom(nt: usize, nx: usize, h: f64, t0: f64) -> GridGeometry {
    GridGeometry::new(vec![nt, nx], vec![h, h], vec![t0, 0.0]).unwrap()
}

fn center(g: &MetricGrid) -> usize {
    let s = &g.geometry().shape;
    (s[0] / 2) * s[1] + s[1] / 2
}

fn kinked() -> MetricGrid {
    MetricGrid::warped(geom(161, 81, 0.0125, -1.0), |t| 1.0 - t.abs() / 4.0).unwrap()
}

#[test]
fn warped_christoffels_match_closed_form() {
    let g = MetricGrid::warped(geom(41, 9, 0.01, 0.1), f64::cosh).unwrap();
    let f = g.christoffels().unwrap();
    let mut checked = 0;
    for idx in 0..g.len() {
        if !f.christoffel_valid[idx] {
            continue;
        }
        let t = g.geometry().position(idx)[0];
        assert!((f.gamma(idx, 0, 1, 1) - t.cosh() * t.sinh()).abs() < 1e-4);
        assert!((f.gamma(idx, 1, 0, 1) - t.tanh()).abs() < 1e-4);
        assert_eq!(f.gamma(idx, 1, 0, 1), f.gamma(idx, 1, 1, 0));
        assert!(f.gamma(idx, 0, 0, 0).abs() < 1e-12);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn cosh_ricci_and_convergence_order() {
    let mut errs = Vec::new();
    for h in [0.04f64, 0.02, 0.01] {
        let n = (0.4 / h).round() as usize + 1;
        let g = MetricGrid::warped(geom(n, 5, h, 0.3), f64::cosh).unwrap();
        let f = g.ricci().unwrap();
        let idx = center(&g);
        assert!(f.valid[idx]);
        errs.push((f.ricci_at(idx, 0, 0) + 1.0).abs());
    }
    assert!(errs[2] < 1e-3, "{errs:?}");
    let order1 = (errs[0] / errs[1]).log2();
    let order2 = (errs[1] / errs[2]).log2();
    assert!(order1 >= 1.8 && order2 >= 1.8, "{errs:?}");
    let k = MetricGrid::warped(geom(21, 5, 0.01, 0.3), f64::cosh).unwrap();
    let field = k.ricci().unwrap();
    let kf = k.timelike_lower_bound_fn(&field, &ConeSampling::default()).unwrap();
    assert!((kf.min() + 1.0).abs() < 1e-3 && (kf.max() + 1.0).abs() < 1e-3);
}

#[test]
fn minkowski_is_flat() {
    let g = MetricGrid::minkowski(GridGeometry::new(vec![7, 7, 7], vec![0.1; 3], vec![0.0; 3]).unwrap()).unwrap();
    let f = g.ricci().unwrap();
    assert!(f.ricci.iter().all(|r| r.abs() < 1e-8));
    let k = g.timelike_lower_bound_fn(&f, &ConeSampling::default()).unwrap();
    assert!(k.min().abs() < 1e-8 && k.max().abs() < 1e-8);
    assert!(g.timelike_lower_bound_fn(&f, &ConeSampling { directions: 0, speeds: vec![0.5] }).is_err());
}

#[test]
fn bakry_emery_with_quadratic_weight() {
    let g = MetricGrid::minkowski(geom(21, 7, 0.05, -0.5)).unwrap().with_weight(|x| -x[0] * x[0] / 2.0).unwrap();
    let n = 3.0;
    let f = g.bakry_emery(n).unwrap();
    let mut checked = 0;
    for idx in 0..g.len() {
        if !f.valid[idx] {
            continue;
        }
        let t = g.geometry().position(idx)[0];
        assert!((f.bakry_emery_at(idx, 0, 0) - (-1.0 - t * t / (n - 2.0))).abs() < 1e-9);
        assert!((f.bakry_emery_at(idx, 0, 1) - f.bakry_emery_at(idx, 1, 0)).abs() < 1e-10);
        checked += 1;
    }
    assert!(checked > 10);
    let plain = MetricGrid::warped(geom(21, 7, 0.05, 0.0), f64::cosh).unwrap();
    let be = plain.bakry_emery(4.0).unwrap();
    assert_eq!(be.bakry_emery, be.ricci);
}

#[test]
fn kink_mollifies_to_negative_bump() {
    let g = kinked();
    let eps = 0.1;
    let m = g.mollify(eps).unwrap();
    let l = g.lipschitz_bound();
    assert!(m.sup_distance(&g) <= l * eps, "{} vs {}", m.sup_distance(&g), l * eps);
    // a_ε = √(−g_xx) along the middle x column; ∫ a_ε'' = a_ε'(t1) − a_ε'(t0)
    let nx = 81;
    let col: Vec<(f64, f64, bool)> = (0..161)
        .map(|i| {
            let idx = i * nx + 40;
            (g.geometry().position(idx)[0], (-m.coefficient(idx, 1, 1)).sqrt(), m.valid()[idx])
        })
        .collect();
    let valid: Vec<_> = col.iter().filter(|c| c.2).collect();
    let h = 0.0125;
    let d_lo = (valid[1].1 - valid[0].1) / h;
    let n = valid.len();
    let d_hi = (valid[n - 1].1 - valid[n - 2].1) / h;
    assert!(((d_hi - d_lo) + 0.5).abs() < 0.02, "mass {}", d_hi - d_lo);
    let peak = valid.iter().map(|c| c.1).fold(0.0, f64::max);
    assert!(peak < 1.0 && peak > 1.0 - eps / 4.0);
}

#[test]
fn narrowed_cones_sit_inside_input_cones() {
    let g = kinked();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for eps in [0.2, 0.05] {
        let m = g.mollify(eps).unwrap();
        let c = m.narrowing_constant();
        let narrowed = m.cone_narrowed(c).unwrap();
        let mut causal = 0;
        for _ in 0..1000 {
            let idx = loop {
                let i = rng.gen_range(0..g.len());
                if narrowed.valid()[i] {
                    break i;
                }
            };
            let v = [1.0, rng.gen_range(-1.5..1.5)];
            if narrowed.quadratic_form(idx, &v) >= 0.0 {
                causal += 1;
                assert!(g.quadratic_form(idx, &v) > 0.0);
            }
        }
        assert!(causal > 300);
    }
}

#[test]
fn kink_deficits_shrink() {
    let g = kinked();
    let eps = [0.4, 0.2, 0.1, 0.05];
    for p in [1.0, 2.0] {
        let curve = g.lp_deficit_curve(0.0, p, &eps, 2.0).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].deficit < w[0].deficit, "{curve:?}");
        }
        assert!(curve[3].deficit <= 0.1 * curve[0].deficit, "{curve:?}");
        let rho = curve.iter().map(|c| -c.min_k).fold(0.0, f64::max);
        assert!(rho < 1.0, "{curve:?}");
    }
    let smooth = MetricGrid::warped(geom(81, 41, 0.0125, -0.5), f64::cosh).unwrap();
    let curve = smooth.lp_deficit_curve(-1.1, 1.0, &[0.1, 0.05], 2.0).unwrap();
    assert!(curve.iter().all(|c| c.deficit <= 1e-6), "{curve:?}");
}
