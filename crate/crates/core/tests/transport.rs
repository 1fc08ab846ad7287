use lorentz_synth::models::{Event, ModelSpacetime};
use lorentz_synth::reference::brute_force_transport;
use lorentz_synth::transport::*;
use lorentz_synth::ExtReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mink() -> ModelSpacetime {
    ModelSpacetime::minkowski(2, vec![(-5.0, 5.0), (-5.0, 5.0)]).unwrap()
}

fn ev(t: f64, x: f64) -> Event {
    Event::new(vec![t, x])
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, t: (f64, f64)) -> DiscreteMeasure {
    let pts: Vec<Event> = (0..n).map(|_| ev(rng.gen_range(t.0..t.1), rng.gen_range(-1.0..1.0))).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let last = 1.0 - w[..n - 1].iter().sum::<f64>();
    w[n - 1] = last;
    DiscreteMeasure::new(pts, w, None).unwrap()
}

#[test]
fn lp_matches_brute_force() {
    let s = mink();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let mu = random_measure(&mut rng, n, (-1.0, 0.0));
        let nu = random_measure(&mut rng, m, (0.0, 1.5));
        let q = rng.gen_range(0.2..0.9);
        let out = lq_distance(&s, &mu, &nu, q).unwrap();
        let costs = lq_costs(&separation_matrix(&s, &mu, &nu).unwrap(), q);
        let oracle = brute_force_transport(&costs, mu.weights(), nu.weights());
        match (out.objective, oracle) {
            (ExtReal::Finite(v), Some(o)) => {
                assert!((v - o).abs() <= 1e-10, "{v} vs {o}");
                let plan = out.plan.unwrap();
                assert!(plan.marginal_error(&mu, &nu) <= 1e-10);
                let cert = out.certificate.unwrap();
                assert!(cert.max_dual_violation < 1e-9 && cert.duality_gap < 1e-9, "{cert:?}");
                compared += 1;
            }
            (ExtReal::NegInf, None) => {}
            other => panic!("mismatch {other:?}"),
        }
    }
    assert!(compared > 25);
}

#[test]
fn dirac_source_gives_product_plan() {
    let s = mink();
    let o = ev(0.0, 0.0);
    let nu = DiscreteMeasure::new(vec![ev(1.0, 0.2), ev(2.0, -0.5), ev(1.5, 0.0)], vec![0.2, 0.3, 0.5], None).unwrap();
    let q = 0.5;
    let out = lq_distance(&s, &DiscreteMeasure::dirac(o.clone()), &nu, q).unwrap();
    let expect: f64 = nu.support().iter().zip(nu.weights()).map(|(y, w)| s.time_separation(&o, y).unwrap().to_f64().powf(q) * w).sum::<f64>().powf(1.0 / q);
    assert!((out.value.to_f64() - expect).abs() < 1e-12);
    let row = &out.plan.as_ref().unwrap().matrix[0];
    assert!(row.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15));
    assert!(is_timelike_q_dualizable(&s, &DiscreteMeasure::dirac(o), &nu, out.plan.as_ref()).unwrap());
}

#[test]
fn restriction_property() {
    let s = mink();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mu = random_measure(&mut rng, 4, (-1.0, -0.5));
        let nu = random_measure(&mut rng, 4, (1.5, 2.0));
        let q = 0.5;
        let costs = lq_costs(&separation_matrix(&s, &mu, &nu).unwrap(), q);
        let plan = lq_distance(&s, &mu, &nu, q).unwrap().plan.unwrap();
        let (rows, cols) = ([0usize, 2, 3], [1usize, 2]);
        let sub: Vec<Vec<f64>> = rows.iter().map(|&i| cols.iter().map(|&j| plan.matrix[i][j]).collect()).collect();
        let mass: f64 = sub.iter().flatten().sum();
        if mass < 1e-9 {
            continue;
        }
        let supply: Vec<f64> = sub.iter().map(|r| r.iter().sum::<f64>() / mass).collect();
        let demand: Vec<f64> = (0..cols.len()).map(|j| sub.iter().map(|r| r[j]).sum::<f64>() / mass).collect();
        let sub_costs: Vec<Vec<Option<f64>>> = rows.iter().map(|&i| cols.iter().map(|&j| costs[i][j]).collect()).collect();
        let restricted: f64 = sub.iter().flatten().zip(sub_costs.iter().flatten()).map(|(p, c)| p / mass * c.unwrap()).sum();
        let (_, _, best) = solve_transport(&sub_costs, &supply, &demand).unwrap();
        assert!((restricted - best).abs() < 1e-9, "{restricted} vs {best}");
    }
}

fn dirac_to_square(s: &ModelSpacetime, per_axis: usize) -> (DynamicalCoupling, UniformBox) {
    let o = ev(0.0, 0.0);
    let b = DiscreteMeasure::uniform_on_box(s, &[1.5, -0.4], &[2.3, 0.4], per_axis).unwrap();
    let mu0 = DiscreteMeasure::dirac(o);
    let plan = lq_distance(s, &mu0, &b.measure, 0.5).unwrap().plan.unwrap();
    let dc = dynamical_coupling(s, &mu0, &b.measure, &plan, 5).unwrap().with_grid(b.grid.clone()).unwrap();
    (dc, b)
}

#[test]
fn pushforwards_and_q_geodesic() {
    let s = mink();
    let (dc, b) = dirac_to_square(&s, 4);
    assert_eq!(dc.curves.len(), 16);
    assert!((dc.total_mass() - 1.0).abs() < 1e-12);
    let mu1 = eval_pushforward(&s, &dc, 1.0).unwrap();
    assert_eq!(mu1.support(), b.measure.support());
    let mu0 = eval_pushforward(&s, &dc, 0.0).unwrap();
    assert_eq!(mu0.support(), &[ev(0.0, 0.0)]);
    let half = eval_pushforward(&s, &dc, 0.5).unwrap();
    for (p, q) in half.support().iter().zip(b.measure.support()) {
        assert!((p.0[0] - 0.5 * q.0[0]).abs() < 1e-14 && (p.0[1] - 0.5 * q.0[1]).abs() < 1e-14);
    }
    let (ok, gap) = verify_q_geodesic(&s, &dc, 0.5, &[0.0, 0.25, 0.5, 1.0], 1e-6).unwrap();
    assert!(ok, "gap {gap}");
    let (_, cells) = pushforward_with_cells(&s, &dc, 0.5).unwrap();
    let cells = cells.unwrap();
    for (c, m) in cells.iter().zip(&b.cell_masses) {
        assert!((c - 0.25 * m).abs() < 1e-12);
    }
}

#[test]
fn corrupted_coupling_breaks_geodesic_property() {
    let s = mink();
    let (mut dc, _) = dirac_to_square(&s, 2);
    let c = &mut dc.curves[0];
    let (x, y) = (c.path.points[0].clone(), c.path.points[1].clone());
    let detour = ev(0.5 * (x.0[0] + y.0[0]), 0.5 * (x.0[1] + y.0[1]) + 0.6);
    let a = s.time_separation(&x, &detour).unwrap().to_f64();
    let b = s.time_separation(&detour, &y).unwrap().to_f64();
    c.path.points = vec![x, detour, y];
    c.path.cumulative = vec![0.0, a, a + b];
    c.path.length = a + b;
    let (ok, gap) = verify_q_geodesic(&s, &dc, 0.5, &[0.0, 0.5, 1.0], 1e-6).unwrap();
    assert!(!ok && gap > 1e-4, "{gap}");
}

#[test]
fn warped_dynamical_coupling_is_affine() {
    let s = ModelSpacetime::cosh_warp((-1.0, 1.5), (-2.0, 2.0)).unwrap();
    let mu = DiscreteMeasure::uniform_points(vec![ev(-0.5, 0.0), ev(-0.4, 0.3)]).unwrap();
    let nu = DiscreteMeasure::uniform_points(vec![ev(0.8, 0.1), ev(1.0, 0.5)]).unwrap();
    let out = lq_distance(&s, &mu, &nu, 0.5).unwrap();
    let dc = dynamical_coupling(&s, &mu, &nu, out.plan.as_ref().unwrap(), 9).unwrap();
    assert!(dc.affine_defect(&s).unwrap() < 2e-3);
}
