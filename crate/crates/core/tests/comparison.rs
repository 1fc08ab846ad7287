use lorentz_synth::comparison::*;
use lorentz_synth::models::{BoxRegion, Event, FnRegion, ModelSpacetime, Region, SampledFn};
use lorentz_synth::transport::DiscreteMeasure;
use lorentz_synth::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mink() -> ModelSpacetime {
    ModelSpacetime::minkowski(2, vec![(-5.0, 5.0), (-5.0, 5.0)]).unwrap()
}

fn ev(t: f64, x: f64) -> Event {
    Event::new(vec![t, x])
}

fn eighths() -> Vec<f64> {
    (1..8).map(|k| k as f64 / 8.0).collect()
}

fn tmcp_cfg(k: f64, n: f64, n_primes: Vec<f64>) -> TmcpConfig {
    TmcpConfig { k, n, q: 0.5, t_grid: eighths(), n_primes, tolerance: 1e-3 }
}

fn row<'a>(r: &'a InequalityReport, label: &str) -> &'a ReportRow {
    r.rows.iter().find(|x| x.label == label).unwrap_or_else(|| panic!("no row {label}"))
}

#[test]
fn tmcp_flat_intro_form_and_sharpness() {
    let s = mink();
    let mu1 = DiscreteMeasure::uniform_on_box(&s, &[1.5, -0.4], &[2.3, 0.4], 6).unwrap();
    let r = check_tmcp(&s, &ev(0.0, 0.0), &mu1, &tmcp_cfg(0.0, 2.0, vec![2.0, 3.0, 4.0])).unwrap();
    assert!(r.passed, "min margin {}", r.min_margin());
    for t in eighths() {
        for np in [2.0, 3.0, 4.0] {
            let lin = row(&r, &format!("t={t};N'={np};linear"));
            assert!(lin.margin >= -1e-3);
            if np == 2.0 {
                assert!(lin.margin.abs() <= 2e-3, "t={t}: {lin:?}");
            }
        }
    }
}

#[test]
fn tmcp_endpoints() {
    let s = mink();
    let mu1 = DiscreteMeasure::uniform_on_box(&s, &[1.5, -0.4], &[2.3, 0.4], 4).unwrap();
    let mut cfg = tmcp_cfg(0.0, 2.0, vec![2.0]);
    cfg.t_grid = vec![0.0, 1.0];
    let r = check_tmcp(&s, &ev(0.0, 0.0), &mu1, &cfg).unwrap();
    let one = row(&r, "t=1;N'=2");
    assert!((one.lhs - one.rhs).abs() < 1e-12);
    let zero = row(&r, "t=0;N'=2");
    assert!(zero.lhs.abs() < 1e-12 && zero.rhs.abs() < 1e-12);
}

#[test]
fn tmcp_rejects_target_outside_future() {
    let s = mink();
    let mu1 = DiscreteMeasure::uniform_on_box(&s, &[0.1, 0.5], &[0.3, 0.9], 3).unwrap();
    let err = check_tmcp(&s, &ev(0.0, 0.0), &mu1, &tmcp_cfg(0.0, 2.0, vec![2.0])).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn tmcp_future_variant() {
    let s = mink();
    let r = check_tmcp_future(&s, &ev(0.0, 0.0), &[-2.3, -0.4], &[-1.5, 0.4], 4, &tmcp_cfg(0.0, 2.0, vec![2.0, 4.0]))
        .unwrap();
    assert!(r.passed && r.name == "tmcp_future");
}

#[test]
fn tmcp_holds_on_curvature_certified_models() {
    // Weight −(1/2) log t: density t^{1/2}, Bakry–Émery Ricci ≥ 0 for N ≥ 2.5.
    let weighted = ModelSpacetime::minkowski(2, vec![(0.5, 4.0), (-3.0, 3.0)])
        .unwrap()
        .with_weight(SampledFn::from_fn(0.5, 4.0, 2001, |t| -0.5 * t.ln()).unwrap())
        .unwrap();
    let o = ev(0.6, 0.0);
    let mu1 = DiscreteMeasure::uniform_on_box(&weighted, &[2.1, -0.4], &[2.9, 0.4], 5).unwrap();
    let r = check_tmcp(&weighted, &o, &mu1, &tmcp_cfg(0.0, 3.0, vec![3.0, 4.0, 6.0])).unwrap();
    assert!(r.passed, "weighted: {}", r.min_margin());

    let cosh = ModelSpacetime::cosh_warp((-0.5, 1.5), (-2.0, 2.0)).unwrap();
    let o = ev(-0.3, 0.0);
    let mu1 = DiscreteMeasure::uniform_on_box(&cosh, &[0.8, -0.25], &[1.2, 0.25], 4).unwrap();
    let r = check_tmcp(&cosh, &o, &mu1, &tmcp_cfg(-1.0, 2.0, vec![2.0, 3.0, 4.0])).unwrap();
    assert!(r.passed, "cosh: {}", r.min_margin());
}

#[test]
fn tcd_flat_midpoint_and_endpoints() {
    let s = mink();
    let mu0 = DiscreteMeasure::uniform_on_box(&s, &[0.0, -0.2], &[0.4, 0.2], 4).unwrap();
    let mu1 = DiscreteMeasure::uniform_on_box(&s, &[2.0, -0.3], &[2.6, 0.3], 4).unwrap();
    let cfg = TmcpConfig { k: 0.0, n: 2.0, q: 0.5, t_grid: vec![0.0, 0.5, 1.0], n_primes: vec![2.0, 3.0], tolerance: 1e-3 };
    let r = check_tcd_semiconvexity(&s, &mu0, &mu1, &cfg).unwrap();
    assert!(r.passed, "{}", r.min_margin());
    for np in [2.0, 3.0] {
        for t in [0.0, 1.0] {
            let e = row(&r, &format!("t={t};N'={np}"));
            assert!((e.lhs - e.rhs).abs() < 1e-9, "{e:?}");
        }
    }
}

#[test]
fn tcd_rejects_non_chronological_supports() {
    let s = mink();
    let mu0 = DiscreteMeasure::uniform_on_box(&s, &[0.0, -0.2], &[0.4, 0.2], 2).unwrap();
    let mu1 = DiscreteMeasure::uniform_on_box(&s, &[0.2, 1.0], &[0.6, 1.4], 2).unwrap();
    let cfg = TmcpConfig { k: 0.0, n: 2.0, q: 0.5, t_grid: vec![0.5], n_primes: vec![2.0], tolerance: 1e-3 };
    assert!(matches!(check_tcd_semiconvexity(&s, &mu0, &mu1, &cfg), Err(Error::InvalidInput(_))));
}

#[test]
fn tcd_positive_curvature_model() {
    let s = ModelSpacetime::cos_warp(0.05, (-2.0, 2.0)).unwrap();
    let mu0 = DiscreteMeasure::equal_cells_on_box(&s, &[-0.9, -0.1], &[-0.7, 0.1], 3).unwrap();
    let mu1 = DiscreteMeasure::equal_cells_on_box(&s, &[0.5, -0.1], &[0.7, 0.1], 3).unwrap();
    let cfg = TmcpConfig { k: 1.0, n: 2.0, q: 0.5, t_grid: eighths(), n_primes: vec![2.0, 4.0], tolerance: 1e-3 };
    match check_tcd_semiconvexity(&s, &mu0, &mu1, &cfg) {
        Ok(r) => assert!(r.passed, "{}", r.min_margin()),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn brunn_minkowski_point_source_scaling() {
    let s = mink();
    let x1 = BoxRegion { lo: vec![1.5, -0.4], hi: vec![2.3, 0.4] };
    let src = BrunnSource::Point(ev(0.0, 0.0));
    let mut gaps = Vec::new();
    for n in [20, 40] {
        let r = brunn_minkowski(&s, &src, &x1, 0.0, 2.0, 0.5, n).unwrap();
        assert!(r.passed);
        let row = &r.rows[0];
        assert!((row.rhs - 0.5 * 0.64f64.sqrt()).abs() < 1e-9);
        let hit = r.diagnostics.iter().find(|d| d.0 == "hit_margin").unwrap().1;
        gaps.push(hit.abs());
    }
    assert!(gaps[1] < gaps[0] && gaps[0] < 0.05, "{gaps:?}");
    let r0 = brunn_minkowski(&s, &src, &x1, 0.0, 2.0, 0.0, 10).unwrap();
    assert!(r0.passed && r0.rows[0].rhs == 0.0);
    let r1 = brunn_minkowski(&s, &src, &x1, 0.0, 2.0, 1.0, 30).unwrap();
    assert!(r1.passed && (r1.rows[0].rhs - 0.8).abs() < 1e-9);
}

#[test]
fn brunn_minkowski_region_source() {
    let s = mink();
    let x0 = BoxRegion { lo: vec![-0.2, -0.2], hi: vec![0.2, 0.2] };
    let x1 = BoxRegion { lo: vec![1.6, -0.3], hi: vec![2.2, 0.3] };
    let r = brunn_minkowski(&s, &BrunnSource::Region(x0), &x1, 0.0, 2.0, 0.5, 12).unwrap();
    assert!(r.passed, "{:?}", r.rows);
}

fn sector() -> FnRegion<impl Fn(&Event) -> bool + Sync> {
    FnRegion { predicate: |p: &Event| p.0[0] > 0.0 && p.0[1].abs() <= 0.5 * p.0[0] && p.0[0] <= 1.3, lo: vec![0.0, -0.65], hi: vec![1.3, 0.65] }
}

#[test]
fn bishop_gromov_cone_equality() {
    let s = mink();
    let e = sector();
    let r = bishop_gromov(&s, &ev(0.0, 0.0), &e, 0.0, 2.0, &[0.25, 0.5, 0.75, 1.0], 0.05, 128, 1e-3).unwrap();
    for (rr, big) in [(0.5, 1.0), (0.25, 1.0), (0.5, 0.75)] {
        let v = row(&r, &format!("v;r={rr};R={big}"));
        assert!((v.lhs - (rr / big) * (rr / big)).abs() <= 1e-3, "{v:?}");
        assert!((v.rhs - (rr / big) * (rr / big)).abs() < 1e-9);
    }
    assert!(r.passed, "{:?}", r.rows);
    let same = bishop_gromov(&s, &ev(0.0, 0.0), &e, 0.0, 2.0, &[0.6], 0.01, 32, 1e-3).unwrap();
    assert!(same.rows.is_empty() && same.passed);
}

#[test]
fn bishop_gromov_weighted_is_strict() {
    // Density t^{1/2} grows toward the future; N = 3 > n.
    let s = ModelSpacetime::minkowski(2, vec![(1e-3, 3.0), (-2.0, 2.0)])
        .unwrap()
        .with_weight(SampledFn::from_fn(1e-3, 3.0, 4001, |t| -0.5 * t.ln()).unwrap())
        .unwrap();
    let r = bishop_gromov(&s, &ev(1e-3, 0.0), &sector(), 0.0, 3.0, &[0.5, 1.0], 0.05, 96, 1e-3).unwrap();
    assert!(r.passed);
    assert!(row(&r, "v;r=0.5;R=1").margin > 1e-2);
}

#[test]
fn bishop_gromov_rejects_bad_radii() {
    let s = mink();
    let e = sector();
    assert!(bishop_gromov(&s, &ev(0.0, 0.0), &e, 0.0, 2.0, &[0.5, 0.25], 0.01, 16, 1e-3).is_err());
    assert!(bishop_gromov(&s, &ev(0.0, 0.0), &e, 1.0, 2.0, &[0.5, 3.2], 0.01, 16, 1e-3).is_err());
}

#[test]
fn bonnet_myers_window_and_preconditions() {
    let s = ModelSpacetime::cos_warp(0.02, (-2.0, 2.0)).unwrap();
    let r = bonnet_myers(&s, 1.0, 2.0, 9, 0.05).unwrap();
    let diam = r.diagnostics.iter().find(|d| d.0 == "diameter").unwrap().1;
    let pi = std::f64::consts::PI;
    assert!(r.passed && diam >= pi - 0.1 && diam <= pi + 0.05, "{diam}");
    assert!(matches!(bonnet_myers(&mink(), 0.0, 2.0, 5, 0.05), Err(Error::InvalidInput(_))));
    let b1 = r.rows[0].rhs;
    let b2 = bonnet_myers(&s, 2.0, 2.0, 5, 0.05).unwrap().rows[0].rhs;
    assert!((b2 - b1 / 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn eikonal_minkowski_convergence() {
    let s = mink();
    let o = ev(0.0, 0.0);
    let mut devs = Vec::new();
    for h in [0.05, 0.025] {
        let r = eikonal_check(&s, &o, &[1.5, -0.3], &[2.5, 0.3], h, Stencil::Forward).unwrap();
        assert!(r.passed);
        assert_eq!(r.diagnostics.iter().find(|d| d.0 == "future_directed_fraction").unwrap().1, 1.0);
        devs.push(r.rows[0].lhs);
    }
    let order = (devs[0] / devs[1]).log2();
    assert!(order >= 0.9, "{devs:?}");
    let central = eikonal_check(&s, &o, &[1.5, -0.3], &[2.5, 0.3], 0.05, Stencil::Central).unwrap();
    assert!(central.rows[0].lhs < 1e-12);
}

#[test]
fn eikonal_axis_gradient() {
    // l_o = √(t² − x²) on x = 0: ∂l = (1, 0).
    let s = mink();
    let r = eikonal_check(&s, &ev(0.0, 0.0), &[1.0, 0.0], &[3.0, 0.0], 0.5, Stencil::Central).unwrap();
    assert!(r.rows[0].lhs < 1e-12);
}

#[test]
fn brenier_single_endpoint() {
    let s = mink();
    let mu1 = DiscreteMeasure::dirac(ev(2.0, 0.0));
    let r = brenier_mccann_check(&s, &ev(0.0, 0.0), &mu1, 0.5, 0.01, Stencil::Forward).unwrap();
    assert!((r.rows[0].rhs - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(r.passed);
}

#[test]
fn brenier_random_endpoints_converge() {
    let s = mink();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Event> = (0..50).map(|_| ev(rng.gen_range(1.0..2.5), rng.gen_range(-0.5..0.5))).collect();
    let mu1 = DiscreteMeasure::uniform_points(pts).unwrap();
    let mut worst = Vec::new();
    for h in [0.02, 0.01] {
        let r = brenier_mccann_check(&s, &ev(0.0, 0.0), &mu1, 0.5, h, Stencil::Forward).unwrap();
        assert!(r.passed);
        worst.push(r.diagnostics[0].1);
    }
    assert!(worst[1] < 0.6 * worst[0], "{worst:?}");
}

fn bumps() -> Vec<Bump> {
    vec![
        Bump::new(vec![2.0, 0.0], vec![0.4, 0.4]).unwrap(),
        Bump::new(vec![1.5, 0.3], vec![0.3, 0.2]).unwrap(),
        Bump::new(vec![3.0, -0.8], vec![0.5, 0.5]).unwrap(),
    ]
}

#[test]
fn dalembert_flat_equality() {
    let s = mink();
    let o = ev(0.0, 0.0);
    for phi in bumps() {
        for variant in [DalembertVariant::Distance, DalembertVariant::Power { q: 0.5 }] {
            let mut gaps = Vec::new();
            for h in [0.02, 0.01] {
                let r = dalembert_check(&s, &o, &phi, 0.0, 2.0, variant, h, 10.0 * h).unwrap();
                let g = (r.rows[0].lhs - r.rows[0].rhs).abs();
                assert!(g <= 10.0 * h, "{variant:?} {g}");
                assert!(r.passed);
                gaps.push(g);
            }
            assert!(gaps[1] <= gaps[0], "{variant:?} {gaps:?}");
        }
    }
}

#[test]
fn dalembert_power_rhs_is_n_times_mass() {
    let s = mink();
    let phi = &bumps()[0];
    let r = dalembert_check(&s, &ev(0.0, 0.0), phi, 0.0, 2.0, DalembertVariant::Power { q: 0.5 }, 0.02, 1e-3).unwrap();
    let mass = r.diagnostics[0].1;
    assert!((r.rows[0].rhs - 2.0 * mass).abs() < 1e-12);
}

#[test]
fn dalembert_rejects_support_outside_future() {
    let s = mink();
    let phi = Bump::new(vec![0.5, 0.0], vec![0.6, 0.6]).unwrap();
    let err = dalembert_check(&s, &ev(0.0, 0.0), &phi, 0.0, 2.0, DalembertVariant::Distance, 0.05, 1e-3).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn tau_tilde_branches() {
    assert_eq!(tau_tilde(0.0, 3.0, 1.2), 1.0);
    assert!((tau_tilde(1.0, 2.0, 1e-9) - 1.0).abs() < 1e-9);
    assert!((tau_tilde(-1.0, 2.0, 1e-9) - 1.0).abs() < 1e-9);
    // N = 2, K = 1: 1/2 + (θ/2) cot θ.
    let th = 0.7f64;
    assert!((tau_tilde(1.0, 2.0, th) - (0.5 + 0.5 * th / th.tan())).abs() < 1e-14);
    assert!((tau_tilde(-1.0, 2.0, th) - (0.5 + 0.5 * th / th.tanh())).abs() < 1e-14);
}

#[test]
fn needles_minkowski() {
    let s = mink();
    let o = ev(0.0, 0.0);
    let w = NeedleWindow { alpha: (-0.6, 0.6), tau: (0.5, 3.0) };
    let dec = needle_decomposition(&s, &o, w, 64, 65, 2.0).unwrap();
    assert_eq!(dec.rays.len(), 64);
    assert!((dec.quotient_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(dec.verify(64, 1e-6).unwrap().iter().all(|c| c.passed));
    let (lo, hi) = ([1.2, -0.3], [2.0, 0.4]);
    let reassembled = dec.reassemble_box(&lo, &hi);
    let region = dec.region();
    let clipped = FnRegion {
        predicate: |p: &Event| region.contains(p) && p.0[0] >= lo[0] && p.0[0] <= hi[0] && p.0[1] >= lo[1] && p.0[1] <= hi[1],
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    };
    let direct = s.region_measure(&clipped, 96);
    assert!(((reassembled - direct) / direct).abs() <= 1e-3, "{reassembled} vs {direct}");
}

#[test]
fn needles_need_flat_chart() {
    let s = ModelSpacetime::cosh_warp((-1.0, 1.0), (-1.0, 1.0)).unwrap();
    let w = NeedleWindow { alpha: (-0.2, 0.2), tau: (0.1, 0.5) };
    assert!(matches!(needle_decomposition(&s, &ev(-0.9, 0.0), w, 4, 9, 2.0), Err(Error::UnsupportedModel(_))));
}

#[test]
fn aubry_dip_within_bound() {
    let model = AubryModel::default();
    let r = aubry_spacetime_check(&model, 2.0, 10.0, 9, 0.05).unwrap();
    assert!(r.passed, "{:?}", r.rows);
    let deficit = r.diagnostics.iter().find(|d| d.0 == "deficit").unwrap().1;
    assert!(deficit > 0.0 && deficit <= 0.1);
}

#[test]
fn aubry_without_dip_is_bonnet_myers() {
    let model = AubryModel { dip: 0.0, ..AubryModel::default() };
    let r = aubry_spacetime_check(&model, 2.0, 10.0, 5, 0.05).unwrap();
    assert!((r.rows[0].rhs - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn aubry_large_deficit_is_hypothesis_violation() {
    let model = AubryModel { dip: 0.8, slab: (-0.5, 0.5), ..AubryModel::default() };
    let r = aubry_spacetime_check(&model, 2.0, 10.0, 5, 0.05).unwrap();
    assert_eq!(r.status, ReportStatus::HypothesisViolated);
    assert!(!r.passed);
}
