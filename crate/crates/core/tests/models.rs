use lorentz_synth::models::{lattice_maximizer_1p1, Event, LatticeConfig, ModelSpacetime, SampledFn};
use lorentz_synth::numerics::GAUSS4;
use lorentz_synth::ExtReal;

fn ev(t: f64, x: f64) -> Event {
    Event::new(vec![t, x])
}

/// Integrates dx/dt and dτ/dt along the geodesic with x-momentum p.
fn shoot(a: &dyn Fn(f64) -> f64, t0: f64, t1: f64, p: f64) -> (f64, f64) {
    let n = 4000;
    let h = (t1 - t0) / n as f64;
    let (mut dx, mut tau) = (0.0, 0.0);
    for i in 0..n {
        for (u, w) in GAUSS4 {
            let t = t0 + (i as f64 + u) * h;
            let av = a(t);
            let root = (av * av + p * p).sqrt();
            dx += w * h * p / (av * root);
            tau += w * h * av / root;
        }
    }
    (dx, tau)
}

fn oracle_separation(a: &dyn Fn(f64) -> f64, x: (f64, f64), y: (f64, f64)) -> f64 {
    let target = y.1 - x.1;
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shoot(a, x.0, y.0, mid).0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shoot(a, x.0, y.0, 0.5 * (lo + hi)).1
}

#[test]
fn cosh_warp_matches_shooting() {
    let s = ModelSpacetime::cosh_warp((-1.5, 1.5), (-3.0, 3.0)).unwrap();
    let pairs = [((0.0, 0.0), (1.0, 0.3)), ((-1.0, 0.2), (1.0, -0.4)), ((-0.5, 0.0), (1.2, 0.8)), ((0.0, 0.0), (1.0, 0.0))];
    for (x, y) in pairs {
        let l = s.time_separation(&ev(x.0, x.1), &ev(y.0, y.1)).unwrap().to_f64();
        let want = oracle_separation(&f64::cosh, x, y);
        assert!((l - want).abs() < 2e-4, "{x:?} {y:?}: {l} vs {want}");
    }
}

#[test]
fn lattice_refinement_increases_from_below() {
    let s = ModelSpacetime::cosh_warp((-1.5, 1.5), (-3.0, 3.0)).unwrap();
    let (x, y) = (ev(-0.5, 0.0), ev(1.2, 0.8));
    let want = oracle_separation(&f64::cosh, (-0.5, 0.0), (1.2, 0.8));
    let mut prev = f64::NEG_INFINITY;
    for level in 0..3 {
        let l = s.lattice_time_separation(&x, &y, level).unwrap().to_f64();
        assert!(l >= prev - 1e-9, "level {level}: {l} < {prev}");
        assert!(l <= want + 1e-9);
        prev = l;
    }
}

#[test]
fn kinked_warp_matches_shooting() {
    let a = |t: f64| 1.0 - t.abs() / 4.0;
    let f = SampledFn::new(vec![(-2.0, 0.5), (0.0, 1.0), (2.0, 0.5)]).unwrap();
    let s = ModelSpacetime::lipschitz_1p1(f, vec![(-2.0, 2.0), (-3.0, 3.0)]).unwrap();
    let (x, y) = ((-1.0, 0.0), (1.0, 0.6));
    let l = s.time_separation(&ev(x.0, x.1), &ev(y.0, y.1)).unwrap().to_f64();
    let want = oracle_separation(&a, x, y);
    assert!((l - want).abs() < 5e-4, "{l} vs {want}");
}

#[test]
fn warped_causality_and_geodesic_points() {
    let s = ModelSpacetime::cosh_warp((-1.5, 1.5), (-3.0, 3.0)).unwrap();
    // null reach from t=0 to t=1 is 2·atan(tanh(1/2)) ≈ 0.8658
    assert_eq!(s.time_separation(&ev(0.0, 0.0), &ev(1.0, 0.9)).unwrap(), ExtReal::NegInf);
    assert!(s.time_separation(&ev(0.0, 0.0), &ev(1.0, 0.85)).unwrap().to_f64() >= 0.0);
    assert_eq!(s.time_separation(&ev(1.0, 0.0), &ev(0.0, 0.0)).unwrap(), ExtReal::NegInf);
    let (x, y) = (ev(-1.0, 0.2), ev(1.0, -0.4));
    let total = s.time_separation(&x, &y).unwrap().to_f64();
    let mid = s.geodesic_point(&x, &y, 0.5).unwrap();
    let a = s.time_separation(&x, &mid).unwrap().to_f64();
    let b = s.time_separation(&mid, &y).unwrap().to_f64();
    assert!((a - 0.5 * total).abs() < 5e-3 && (b - 0.5 * total).abs() < 5e-3, "{a} {b} {total}");
    assert!(!s.maximizer(&x, &y).unwrap().multiple_maximizers);
}

fn valley(bumps: [f64; 2]) -> impl Fn(&Event, &Event) -> f64 {
    move |p, q| {
        let dt = q.t() - p.t();
        let dx = q.0[1] - p.0[1];
        if dx.abs() > dt {
            return f64::NEG_INFINITY;
        }
        let omega = |x: f64| 1.0 + bumps[0] * (-(x - 0.5f64).powi(2) * 40.0).exp() + bumps[1] * (-(x + 0.5f64).powi(2) * 40.0).exp();
        GAUSS4.iter().map(|(u, w)| w * omega(p.0[1] + u * dx)).sum::<f64>() * (dt * dt - dx * dx).sqrt()
    }
}

#[test]
fn tie_detector_on_symmetric_valley() {
    let cfg = LatticeConfig::default();
    let (x, y) = (ev(0.0, 0.0), ev(4.0, 0.0));
    let sym = lattice_maximizer_1p1(&x, &y, cfg, 1.0, valley([1.0, 1.0])).unwrap();
    assert!(sym.multiple_maximizers);
    let mid = sym.point_at(0.5);
    assert!(mid.0[1].abs() > 0.3, "path stays near the axis: {:?}", mid.0);
    let lop = lattice_maximizer_1p1(&x, &y, cfg, 1.0, valley([1.0, 0.8])).unwrap();
    assert!(!lop.multiple_maximizers);
    assert!(lop.point_at(0.5).0[1] > 0.3);
}

#[test]
fn minkowski_ball_volume() {
    use lorentz_synth::models::FnRegion;
    let s = ModelSpacetime::minkowski(2, vec![(0.0, 2.0), (-2.0, 2.0)]).unwrap();
    let o = ev(0.0, 0.0);
    let e = FnRegion { predicate: |p: &Event| p.t() > 0.0 && p.0[1].abs() <= 0.5 * p.t(), lo: vec![0.0, -1.0], hi: vec![2.0, 1.0] };
    let (v, area) = s.ball_volume_area(&o, 1.0, &e, 1e-3, 64).unwrap();
    let exact = 0.5f64.atanh();
    assert!((v - exact).abs() < 2e-3, "{v} vs {exact}");
    assert!((area - 2.0 * exact).abs() < 0.1, "{area}");
    s.assert_star_shaped(&o, &e, 6).unwrap();
}

#[test]
fn lattice_diameter_of_focusing_warp() {
    let s = ModelSpacetime::cos_warp(0.05, (-1.0, 1.0)).unwrap();
    let d = s.timelike_diameter(5).unwrap();
    let span = std::f64::consts::PI - 0.1;
    assert!(d > 0.9 * span && d <= span + 1e-9, "{d}");
}

#[test]
fn minkowski_closed_forms() {
    let s = ModelSpacetime::minkowski(2, vec![(-3.0, 3.0), (-3.0, 3.0)]).unwrap();
    assert_eq!(s.time_separation(&ev(0.0, 0.0), &ev(1.0, 0.0)).unwrap(), ExtReal::Finite(1.0));
    assert_eq!(s.time_separation(&ev(0.0, 0.0), &ev(1.0, 2.0)).unwrap(), ExtReal::NegInf);
    let o = ev(0.0, 0.0);
    let l = s.lorentz_distance(&o);
    assert!((l(&ev(2.0, 1.0)).unwrap().to_f64() - 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(l(&o).unwrap(), ExtReal::Finite(0.0));
    let mid = s.geodesic_point(&o, &ev(2.0, 1.0), 0.5).unwrap();
    assert_eq!(mid.0, vec![1.0, 0.5]);
}

#[test]
fn unit_warp_reproduces_minkowski() {
    let f = SampledFn::constant(-2.0, 2.0, 1.0).unwrap();
    let s = ModelSpacetime::lipschitz_1p1(f, vec![(-2.0, 2.0), (-3.0, 3.0)]).unwrap();
    for (x, y) in [((-1.0, 0.0), (1.0, 0.5)), ((-1.5, -0.3), (1.2, 1.1)), ((0.0, 0.0), (1.0, 0.0))] {
        let l = s.time_separation(&ev(x.0, x.1), &ev(y.0, y.1)).unwrap().to_f64();
        let want = ((y.0 - x.0) * (y.0 - x.0) - (y.1 - x.1) * (y.1 - x.1)).sqrt();
        assert!((l - want).abs() < 1e-3, "{l} vs {want}");
    }
}

fn random_pairs(seed: u64, n: usize) -> Vec<((f64, f64), (f64, f64))> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let x = (rng.gen_range(-1.2..0.0), rng.gen_range(-1.0..1.0));
        let dt = rng.gen_range(0.3..1.2);
        let y = (x.0 + dt, x.1 + rng.gen_range(-0.5..0.5) * dt);
        out.push((x, y));
    }
    out
}

#[test]
fn cosh_warp_twenty_random_pairs() {
    let s = ModelSpacetime::cosh_warp((-1.5, 1.5), (-3.0, 3.0)).unwrap();
    for (x, y) in random_pairs(21, 20) {
        let l = s.time_separation(&ev(x.0, x.1), &ev(y.0, y.1)).unwrap().to_f64();
        let want = oracle_separation(&f64::cosh, x, y);
        assert!((l - want).abs() < 2e-4, "{x:?} {y:?}: {l} vs {want}");
    }
}

#[test]
fn warped_reverse_triangle_and_affine_parametrization() {
    let s = ModelSpacetime::cosh_warp((-1.5, 1.5), (-3.0, 3.0)).unwrap();
    for (x, y) in random_pairs(8, 4) {
        let (x, y) = (ev(x.0, x.1), ev(y.0, y.1));
        let total = s.time_separation(&x, &y).unwrap().to_f64();
        let path = s.maximizer(&x, &y).unwrap();
        let mut prev = x.clone();
        let mut sum = 0.0;
        for t in [0.25, 0.5, 0.75] {
            let p = path.point_at(t);
            let from_x = s.time_separation(&x, &p).unwrap().to_f64();
            assert!((from_x - t * total).abs() < 5e-3, "t={t}: {from_x} vs {}", t * total);
            sum += s.time_separation(&prev, &p).unwrap().to_f64();
            prev = p;
        }
        sum += s.time_separation(&prev, &y).unwrap().to_f64();
        // additivity along the maximizer, and the reverse triangle inequality
        assert!((sum - total).abs() < 5e-3, "{sum} vs {total}");
        assert!(sum <= total + 5e-4);
    }
}

#[test]
fn region_measures() {
    use lorentz_synth::models::BoxRegion;
    let unit = BoxRegion { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
    let flat = ModelSpacetime::minkowski(2, vec![(-1.0, 2.0), (-1.0, 2.0)]).unwrap();
    assert!((flat.region_measure(&unit, 8) - 1.0).abs() < 1e-12);
    let wide = ModelSpacetime::warped(2, SampledFn::constant(-1.0, 2.0, 2.0).unwrap(), vec![(-1.0, 2.0), (-1.0, 2.0)]).unwrap();
    assert!((wide.region_measure(&unit, 8) - 2.0).abs() < 1e-12);
    let halved = flat.clone().with_weight(SampledFn::constant(-1.0, 2.0, 2f64.ln()).unwrap()).unwrap();
    assert!((halved.region_measure(&unit, 8) - 0.5).abs() < 1e-12);
}

#[test]
fn ball_volume_monotone_with_nonnegative_area() {
    use lorentz_synth::models::FnRegion;
    let s = ModelSpacetime::minkowski(2, vec![(0.0, 2.0), (-2.0, 2.0)]).unwrap();
    let e = FnRegion { predicate: |p: &Event| p.t() > 0.0 && p.0[1].abs() <= 0.8 * p.t(), lo: vec![0.0, -1.6], hi: vec![2.0, 1.6] };
    let mut prev = 0.0;
    for r in [0.2, 0.4, 0.6, 0.8] {
        let (v, area) = s.ball_volume_area(&ev(0.0, 0.0), r, &e, 0.01, 32).unwrap();
        assert!(v >= prev && area >= 0.0);
        prev = v;
    }
}

#[test]
fn minkowski_slab_diameter_and_monotonicity() {
    let s = ModelSpacetime::minkowski(2, vec![(0.0, 1.5), (-1.0, 1.0)]).unwrap();
    assert!((s.timelike_diameter(7).unwrap() - 1.5).abs() < 1e-12);
    let small = ModelSpacetime::cos_warp(0.3, (-1.0, 1.0)).unwrap();
    let big = ModelSpacetime::cos_warp(0.1, (-1.0, 1.0)).unwrap();
    assert!(small.timelike_diameter(5).unwrap() <= big.timelike_diameter(5).unwrap() + 1e-12);
}

#[test]
fn time_reversal_swaps_arguments() {
    let s = ModelSpacetime::cosh_warp((-1.0, 1.5), (-2.0, 2.0)).unwrap();
    let r = s.time_reversed().unwrap();
    let (x, y) = (ev(-0.5, 0.1), ev(0.9, -0.2));
    let fwd = s.time_separation(&x, &y).unwrap().to_f64();
    let back = r.time_separation(&ev(-0.9, -0.2), &ev(0.5, 0.1)).unwrap().to_f64();
    assert!((fwd - back).abs() < 1e-9, "{fwd} vs {back}");
}

#[test]
fn json_round_trip() {
    let s = ModelSpacetime::cosh_warp((-1.0, 1.0), (-2.0, 2.0))
        .unwrap()
        .with_weight(SampledFn::from_fn(-1.0, 1.0, 11, |t| 0.1 * t).unwrap())
        .unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let back: ModelSpacetime = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    assert!(serde_json::from_str::<ModelSpacetime>(r#"{"dim":2,"kind":"warped","bounds":[[0,1],[0,1]]}"#).is_err());
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn minkowski_reverse_triangle(
            a in (-2.0..2.0f64, -1.0..1.0f64),
            s1 in (0.0..1.0f64, -1.0..1.0f64),
            s2 in (0.0..1.0f64, -1.0..1.0f64),
        ) {
            let m = ModelSpacetime::minkowski(2, vec![(-3.0, 6.0), (-6.0, 6.0)]).unwrap();
            let x = ev(a.0, a.1);
            let y = ev(a.0 + s1.0, a.1 + s1.1 * s1.0);
            let z = ev(y.t() + s2.0, y.0[1] + s2.1 * s2.0);
            let xy = m.time_separation(&x, &y).unwrap();
            let yz = m.time_separation(&y, &z).unwrap();
            let xz = m.time_separation(&x, &z).unwrap();
            prop_assert!(xz.to_f64() + 1e-12 >= xy.to_f64() + yz.to_f64());
        }
    }
}
