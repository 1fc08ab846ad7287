//! The fifteen-item acceptance matrix, shared by the `suite` CLI command and
//! the acceptance test target. Every check is deterministic given the seed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::{
    bishop_gromov, bonnet_myers, brenier_mccann_check, check_tmcp, dalembert_check, eikonal_check,
    needle_decomposition, Bump, DalembertVariant, NeedleWindow, Stencil, TmcpConfig,
};
use crate::distortion::{
    defect_bound, first_zero, generalized_sine, pi_const, tau_coeff, tau_const, GeneralizedSine, KappaProfile,
    TauCoefficients,
};
use crate::error::{invalid, Result};
use crate::ext::ExtReal;
use crate::lipschitz_grid::{GridGeometry, MetricGrid};
use crate::models::{Event, FnRegion, ModelSpacetime, Region};
use crate::onedim::{model_density, tmcp_delta, verify_cd_density, CdDensity};
use crate::reference::{brute_force_transport, closed_form_sine, tmcp_delta_formula};
use crate::transport::{
    dynamical_coupling, lq_costs, lq_distance, separation_matrix, verify_q_geodesic, DiscreteMeasure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteLevel {
    Quick,
    Full,
}

/// (id, name, runtime budget in seconds)
pub const CRITERIA: [(u8, &str, f64); 15] = [
    (1, "distortion closed forms", 1.0),
    (2, "distortion monotonicity and ordering", 10.0),
    (3, "distortion defect estimate", 30.0),
    (4, "CD densities", 10.0),
    (5, "TMCP delta formula", 1.0),
    (6, "transport exactness", 10.0),
    (7, "q-geodesic property", 5.0),
    (8, "TMCP flat sharpness", 30.0),
    (9, "Bishop-Gromov equality", 10.0),
    (10, "Bonnet-Myers sharpness", 60.0),
    (11, "eikonal equation", 10.0),
    (12, "d'Alembert equality", 20.0),
    (13, "Lp deficit convergence", 60.0),
    (14, "needle decomposition", 30.0),
    (15, "Brenier-McCann", 20.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    /// Numerical criterion met.
    pub passed: bool,
    pub summary: String,
    pub metrics: Vec<(String, f64)>,
    /// Wall-clock data; excluded from the deterministic payload.
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    pub budget_seconds: f64,
}

impl CriterionOutcome {
    pub fn within_budget(&self) -> bool {
        self.seconds < self.budget_seconds
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<38} {:>7.2}s/{:<4} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.summary
        )
    }
}

struct Verdict {
    passed: bool,
    summary: String,
    metrics: Vec<(String, f64)>,
}

impl Verdict {
    fn new(passed: bool, summary: String) -> Self {
        Verdict { passed, summary, metrics: Vec::new() }
    }
    fn metric(mut self, key: &str, v: f64) -> Self {
        self.metrics.push((key.into(), v));
        self
    }
}

pub fn run_criterion(id: u8, level: SuiteLevel, seed: u64) -> Result<CriterionOutcome> {
    let &(_, name, budget) = CRITERIA.iter().find(|c| c.0 == id).ok_or_else(|| {
        crate::Error::InvalidInput(format!("no acceptance criterion {id}"))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(id as u64));
    let start = Instant::now();
    let v = match id {
        1 => closed_forms(),
        2 => monotonicity(&mut rng),
        3 => defect(&mut rng),
        4 => cd_densities(),
        5 => delta_formula(&mut rng),
        6 => transport_exactness(&mut rng),
        7 => q_geodesic(level),
        8 => tmcp_flat(level),
        9 => bishop_gromov_equality(level),
        10 => bonnet_myers_sharpness(level),
        11 => eikonal(),
        12 => dalembert(),
        13 => lp_deficit(),
        14 => needles(),
        15 => brenier(&mut rng),
        _ => unreachable!(),
    }?;
    Ok(CriterionOutcome {
        id,
        name: name.into(),
        passed: v.passed,
        summary: v.summary,
        metrics: v.metrics,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds: budget,
    })
}

pub fn run_suite(level: SuiteLevel, seed: u64) -> Vec<Result<CriterionOutcome>> {
    CRITERIA.iter().map(|c| run_criterion(c.0, level, seed)).collect()
}

/// label,passed,metric,value rows for every outcome.
pub fn outcomes_csv(outcomes: &[CriterionOutcome]) -> String {
    let mut out = String::from("id,name,passed,metric,value\n");
    for o in outcomes {
        for (k, v) in &o.metrics {
            out.push_str(&format!("{},{},{},{},{:e}\n", o.id, o.name.replace(',', ";"), o.passed, k, v));
        }
    }
    out
}

fn closed_forms() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for k in [-4.0, -1.0, 0.0, 1.0, 4.0] {
        let len = 3.0;
        let sine = generalized_sine(&KappaProfile::constant(len, k)?);
        let upper = match pi_const(k) {
            ExtReal::Finite(p) => (p - 0.01).min(len),
            _ => len,
        };
        for i in 0..=2000 {
            let th = upper * i as f64 / 2000.0;
            worst = worst.max((sine.eval(th) - closed_form_sine(k, th)).abs());
        }
    }
    let zero = first_zero(&KappaProfile::constant(3.0, 4.0)?).to_f64();
    let zero_err = (zero - std::f64::consts::FRAC_PI_2).abs();
    Ok(Verdict::new(worst <= 1e-8 && zero_err <= 1e-8, format!("sup error {worst:.2e}, |π_4 − π/2| = {zero_err:.2e}"))
        .metric("sup_error", worst)
        .metric("first_zero_error", zero_err))
}

fn random_profile(rng: &mut ChaCha8Rng, len: f64, nodes: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    (0..nodes).map(|i| (len * i as f64 / (nodes - 1) as f64, rng.gen_range(lo..hi))).collect()
}

/// Amount by which a ≤ b fails.
fn excess(a: ExtReal, b: ExtReal) -> f64 {
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => (x - y).max(0.0),
        (ExtReal::PosInf, ExtReal::Finite(_)) => f64::INFINITY,
        _ => 0.0,
    }
}

fn monotonicity(rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(0.5..3.0);
        let upper = random_profile(rng, len, 6, -3.0, 3.0);
        let lower: Vec<(f64, f64)> = upper.iter().map(|&(th, k)| (th, k - rng.gen_range(0.0..2.0))).collect();
        let (hi_p, lo_p) = (KappaProfile::new(len, upper)?, KappaProfile::new(len, lower)?);
        let n = rng.gen_range(1.5..6.0);
        let (hi_tau, lo_tau) = (TauCoefficients::new(&hi_p, n)?, TauCoefficients::new(&lo_p, n)?);
        let hi_sigma = GeneralizedSine::new(&hi_p.scaled(1.0 / n));
        let lo_sigma = GeneralizedSine::new(&lo_p.scaled(1.0 / n));
        for _ in 0..4 {
            let (t, th) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=len));
            let e = [
                excess(lo_sigma.sigma(t, th), hi_sigma.sigma(t, th)),
                excess(lo_tau.tau(t, th), hi_tau.tau(t, th)),
                excess(hi_sigma.sigma(t, th), hi_tau.tau(t, th)),
            ];
            for x in e {
                worst = worst.max(x);
                if x > 1e-10 {
                    violations += 1;
                }
            }
        }
    }
    Ok(Verdict::new(violations == 0, format!("{violations} violations over 1000 pairs, worst excess {worst:.2e}"))
        .metric("violations", violations as f64)
        .metric("worst_excess", worst))
}

fn defect(rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(-2.0..3.0);
        let n = rng.gen_range(2.0..6.0);
        let p = n / 2.0 + rng.gen_range(0.05..3.0);
        let pi = pi_const(k / (n - 1.0));
        let eta = match pi {
            ExtReal::Finite(v) => v * rng.gen_range(0.05..0.45),
            _ => rng.gen_range(0.05..1.0),
        };
        let len = rng.gen_range(0.5..4.0);
        let profile = KappaProfile::new(len, random_profile(rng, len, 5, k - 2.0, k + 0.5))?;
        let t = rng.gen_range(0.02..0.98);
        let theta_max = match pi {
            ExtReal::Finite(v) => len.min(v - eta),
            _ => len,
        };
        let theta = theta_max * rng.gen_range(0.02..0.98);
        let bound = defect_bound(k, n, p, eta, &profile, t, theta)?;
        let actual = match tau_coeff(&profile, n, t, theta)? {
            ExtReal::Finite(v) => tau_const(k, n, t, theta).to_f64() - v,
            _ => f64::NEG_INFINITY,
        };
        let gap = actual - bound;
        worst = worst.max(gap);
        if gap > 1e-8 {
            violations += 1;
        }
    }
    Ok(Verdict::new(violations == 0, format!("{violations} violations over 1000 instances, max(defect − bound) = {worst:.2e}"))
        .metric("violations", violations as f64)
        .metric("max_defect_minus_bound", worst))
}

fn cd_densities() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for k in [-1.0, 0.0, 1.0, 4.0] {
        for n in [2.0, 3.0, 4.5] {
            let len = match pi_const(k / (n - 1.0)) {
                ExtReal::Finite(p) => 0.95 * p,
                _ => 2.0,
            };
            let r = verify_cd_density(&model_density(k, n, len)?, 64, 1e-6)?;
            worst = worst.max(r.worst_violation);
            if !r.passed {
                failed += 1;
            }
        }
    }
    let flat = KappaProfile::constant(0.9, 0.0)?;
    let convex = verify_cd_density(&CdDensity::from_fn(0.1, 1.0, 1009, |x| x * x, flat, 2.0)?, 64, 1e-6)?;
    let ok = failed == 0 && !convex.passed && convex.worst_violation > 1e-3;
    Ok(Verdict::new(
        ok,
        format!("{failed}/12 model densities fail (worst {worst:.2e}); convex counterexample violation {:.2e}", convex.worst_violation),
    )
    .metric("model_worst_violation", worst)
    .metric("convex_violation", convex.worst_violation))
}

fn delta_formula(rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (k, n) = (rng.gen_range(0.1..5.0), rng.gen_range(1.5..6.0));
        let (eps, c) = (rng.gen_range(0.01..5.0), rng.gen_range(1.0..20.0));
        let p = rng.gen_range(1.0..4.0);
        let lib = tmcp_delta(k, n, p, eps, c)?;
        let want = tmcp_delta_formula(k, n, eps, c);
        worst = worst.max((lib - want).abs() / want.abs().max(f64::MIN_POSITIVE));
    }
    Ok(Verdict::new(worst <= 1e-14, format!("max relative difference {worst:.2e} over 100 tuples")).metric("max_rel_diff", worst))
}

fn flat_chart() -> Result<ModelSpacetime> {
    ModelSpacetime::minkowski(2, vec![(-5.0, 5.0), (-5.0, 5.0)])
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, t: (f64, f64)) -> Result<DiscreteMeasure> {
    let pts: Vec<Event> = (0..n).map(|_| Event::new(vec![rng.gen_range(t.0..t.1), rng.gen_range(-1.0..1.0)])).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    w[n - 1] = 1.0 - w[..n - 1].iter().sum::<f64>();
    DiscreteMeasure::new(pts, w, None)
}

fn transport_exactness(rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let s = flat_chart()?;
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let mu = random_measure(rng, n, (-1.0, 0.0))?;
        let nu = random_measure(rng, m, (0.0, 1.5))?;
        let q = rng.gen_range(0.2..0.9);
        let out = lq_distance(&s, &mu, &nu, q)?;
        let oracle = brute_force_transport(&lq_costs(&separation_matrix(&s, &mu, &nu)?, q), mu.weights(), nu.weights());
        match (out.objective, oracle) {
            (ExtReal::Finite(v), Some(o)) => worst = worst.max((v - o).abs()),
            (ExtReal::NegInf, None) => {}
            _ => mismatched += 1,
        }
    }
    Ok(Verdict::new(worst <= 1e-10 && mismatched == 0, format!("max |LP − brute force| = {worst:.2e}, {mismatched} feasibility mismatches"))
        .metric("max_abs_diff", worst)
        .metric("feasibility_mismatches", mismatched as f64))
}

fn q_geodesic(level: SuiteLevel) -> Result<Verdict> {
    let s = flat_chart()?;
    let per_axis = if level == SuiteLevel::Quick { 3 } else { 4 };
    let b = DiscreteMeasure::uniform_on_box(&s, &[1.5, -0.4], &[2.3, 0.4], per_axis)?;
    let mu0 = DiscreteMeasure::dirac(Event::new(vec![0.0, 0.0]));
    let plan = lq_distance(&s, &mu0, &b.measure, 0.5)?.plan.ok_or_else(|| crate::Error::NoGeodesic("no plan".into()))?;
    let dc = dynamical_coupling(&s, &mu0, &b.measure, &plan, 5)?.with_grid(b.grid.clone())?;
    let mut worst: f64 = 0.0;
    for (a, c) in [(0.0, 0.25), (0.25, 0.5), (0.5, 1.0), (0.2, 0.8), (0.0, 1.0)] {
        worst = worst.max(verify_q_geodesic(&s, &dc, 0.5, &[a, c], 1e-6)?.1);
    }
    Ok(Verdict::new(worst <= 1e-6, format!("max gap {worst:.2e} over 5 (s, t) pairs")).metric("max_gap", worst))
}

fn tmcp_flat(level: SuiteLevel) -> Result<Verdict> {
    let s = flat_chart()?;
    let per_axis = if level == SuiteLevel::Quick { 5 } else { 6 };
    let mu1 = DiscreteMeasure::uniform_on_box(&s, &[1.5, -0.4], &[2.3, 0.4], per_axis)?;
    let cfg = TmcpConfig {
        k: 0.0,
        n: 2.0,
        q: 0.5,
        t_grid: (1..8).map(|k| k as f64 / 8.0).collect(),
        n_primes: vec![2.0, 3.0, 4.0],
        tolerance: 1e-3,
    };
    let r = check_tmcp(&s, &Event::new(vec![0.0, 0.0]), &mu1, &cfg)?;
    let linear: Vec<_> = r.rows.iter().filter(|x| x.label.ends_with("linear")).collect();
    let min_margin = linear.iter().map(|x| x.margin).fold(f64::INFINITY, f64::min);
    let sharp = linear.iter().filter(|x| x.label.contains("N'=2;")).map(|x| x.margin.abs()).fold(0.0, f64::max);
    let ok = min_margin >= -1e-3 && sharp <= 2e-3 && r.passed;
    Ok(Verdict::new(ok, format!("min margin {min_margin:.2e}, N'=2 max |margin| {sharp:.2e}"))
        .metric("min_linear_margin", min_margin)
        .metric("n2_max_abs_margin", sharp)
        .metric("min_tau_margin", r.min_margin()))
}

fn bishop_gromov_equality(level: SuiteLevel) -> Result<Verdict> {
    let s = flat_chart()?;
    let e = FnRegion {
        predicate: |p: &Event| p.0[0] > 0.0 && p.0[1].abs() <= 0.5 * p.0[0] && p.0[0] <= 1.3,
        lo: vec![0.0, -0.65],
        hi: vec![1.3, 0.65],
    };
    let res = if level == SuiteLevel::Quick { 96 } else { 128 };
    let r = bishop_gromov(&s, &Event::new(vec![0.0, 0.0]), &e, 0.0, 2.0, &[0.25, 0.5, 0.75, 1.0], 0.05, res, 1e-3)?;
    let mut worst: f64 = 0.0;
    for (a, b) in [(0.5, 1.0), (0.25, 1.0), (0.5, 0.75)] {
        let label = format!("v;r={a};R={b}");
        let row = r.rows.iter().find(|x| x.label == label).ok_or_else(|| crate::Error::InvalidInput(label.clone()))?;
        worst = worst.max((row.lhs - (a / b) * (a / b)).abs());
    }
    Ok(Verdict::new(worst <= 1e-3, format!("max |v(r)/v(R) − (r/R)²| = {worst:.2e}")).metric("max_ratio_error", worst))
}

fn bonnet_myers_sharpness(level: SuiteLevel) -> Result<Verdict> {
    let s = ModelSpacetime::cos_warp(0.02, (-2.0, 2.0))?;
    let grid = if level == SuiteLevel::Quick { 9 } else { 17 };
    let r = bonnet_myers(&s, 1.0, 2.0, grid, 0.05)?;
    let diam = r.rows[0].lhs;
    let pi = std::f64::consts::PI;
    Ok(Verdict::new(
        diam >= pi - 0.1 && diam <= pi + 0.05,
        format!("diameter {diam:.5} in [π − 0.1, π + 0.05]"),
    )
    .metric("diameter", diam))
}

fn eikonal() -> Result<Verdict> {
    let s = flat_chart()?;
    let o = Event::new(vec![0.0, 0.0]);
    let mut devs = Vec::new();
    let mut within = true;
    for h in [0.05, 0.025] {
        let r = eikonal_check(&s, &o, &[1.5, -0.3], &[2.5, 0.3], h, Stencil::Forward)?;
        within &= r.passed;
        devs.push(r.rows[0].lhs);
    }
    let order = (devs[0] / devs[1]).log2();
    Ok(Verdict::new(within && order >= 0.9, format!("deviations {:.2e}, {:.2e}; order {order:.2}", devs[0], devs[1]))
        .metric("dev_coarse", devs[0])
        .metric("dev_fine", devs[1])
        .metric("order", order))
}

fn dalembert() -> Result<Verdict> {
    let s = flat_chart()?;
    let o = Event::new(vec![0.0, 0.0]);
    let bumps = [
        Bump::new(vec![2.0, 0.0], vec![0.4, 0.4])?,
        Bump::new(vec![1.5, 0.3], vec![0.3, 0.2])?,
        Bump::new(vec![3.0, -0.8], vec![0.5, 0.5])?,
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for phi in &bumps {
        let mut gaps = Vec::new();
        for h in [0.02, 0.01] {
            let r = dalembert_check(&s, &o, phi, 0.0, 2.0, DalembertVariant::Distance, h, 10.0 * h)?;
            let g = (r.rows[0].lhs - r.rows[0].rhs).abs();
            ok &= g <= 10.0 * h;
            gaps.push(g);
        }
        ok &= gaps[1] <= gaps[0];
        worst = worst.max(gaps[1]);
    }
    Ok(Verdict::new(ok, format!("fine-grid max |lhs − rhs| = {worst:.2e}, all decreasing: {ok}")).metric("max_gap_fine", worst))
}

fn lp_deficit() -> Result<Verdict> {
    let geom = GridGeometry::new(vec![161, 81], vec![0.0125, 0.0125], vec![-1.0, 0.0])?;
    let g = MetricGrid::warped(geom, |t| 1.0 - t.abs() / 4.0)?;
    let eps = [0.4, 0.2, 0.1, 0.05];
    let mut ok = true;
    let mut v = Verdict::new(true, String::new());
    let mut parts = Vec::new();
    for p in [1.0, 2.0] {
        let curve = g.lp_deficit_curve(0.0, p, &eps, 2.0)?;
        ok &= curve.windows(2).all(|w| w[1].deficit < w[0].deficit);
        let ratio = curve[3].deficit / curve[0].deficit;
        ok &= ratio <= 0.1;
        parts.push(format!("p={p}: ratio {ratio:.3}"));
        for c in &curve {
            v = v.metric(&format!("p={p};eps={}", c.eps), c.deficit);
        }
    }
    v.passed = ok;
    v.summary = parts.join(", ");
    Ok(v)
}

fn needles() -> Result<Verdict> {
    let s = flat_chart()?;
    let w = NeedleWindow { alpha: (-0.6, 0.6), tau: (0.5, 3.0) };
    let dec = needle_decomposition(&s, &Event::new(vec![0.0, 0.0]), w, 64, 65, 2.0)?;
    let passing = dec.verify(64, 1e-6)?.iter().filter(|c| c.passed).count();
    let (lo, hi) = ([1.2, -0.3], [2.0, 0.4]);
    let region = dec.region();
    let clipped = FnRegion {
        predicate: |p: &Event| region.contains(p) && (0..2).all(|k| p.0[k] >= lo[k] && p.0[k] <= hi[k]),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    };
    let direct = s.region_measure(&clipped, 96);
    let err = ((dec.reassemble_box(&lo, &hi) - direct) / direct).abs();
    let weights: f64 = dec.quotient_weights.iter().sum();
    if (weights - 1.0).abs() > 1e-12 {
        return invalid("quotient weights do not sum to one");
    }
    Ok(Verdict::new(passing == 64 && err <= 1e-3, format!("{passing}/64 rays CD, reassembly error {err:.2e}"))
        .metric("rays_passing", passing as f64)
        .metric("reassembly_rel_error", err))
}

fn brenier(rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let s = flat_chart()?;
    let pts: Vec<Event> = (0..50).map(|_| Event::new(vec![rng.gen_range(1.0..2.5), rng.gen_range(-0.5..0.5)])).collect();
    let mu1 = DiscreteMeasure::uniform_points(pts)?;
    let mut worst = Vec::new();
    let mut within = true;
    for h in [0.02, 0.01] {
        let r = brenier_mccann_check(&s, &Event::new(vec![0.0, 0.0]), &mu1, 0.5, h, Stencil::Forward)?;
        within &= r.passed;
        worst.push(r.diagnostics[0].1);
    }
    let order = (worst[0] / worst[1]).log2();
    Ok(Verdict::new(within && order >= 0.9, format!("max deviations {:.2e}, {:.2e}; order {order:.2}", worst[0], worst[1]))
        .metric("dev_coarse", worst[0])
        .metric("dev_fine", worst[1])
        .metric("order", order))
}
