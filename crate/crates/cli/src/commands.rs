use std::path::PathBuf;

use lorentz_synth::comparison::{
    aubry_spacetime_check, bishop_gromov, bonnet_myers, brenier_mccann_check, brunn_minkowski, check_tcd_semiconvexity,
    check_tmcp, check_tmcp_future, dalembert_check, eikonal_check, needle_decomposition, AubryModel, BrunnSource, Bump,
    DalembertVariant, InequalityReport, NeedleWindow, ReportRow, ReportStatus, Stencil, TmcpConfig,
};
use lorentz_synth::distortion::{defect_bound, pi_const, sigma_coeff, tau_coeff, tau_const, KappaProfile};
use lorentz_synth::lipschitz_grid::{GridGeometry, MetricGrid};
use lorentz_synth::models::{BoxRegion, Event, FnRegion, ModelSpacetime, Region};
use lorentz_synth::onedim::{diameter_report, model_density, verify_cd_density, CdDensity};
use lorentz_synth::suite::{outcomes_csv, run_suite, SuiteLevel};
use lorentz_synth::transport::{lq_distance, DiscreteMeasure};
use lorentz_synth::ExtReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{model_from, resolve};
use crate::error::{io_err, CliError, CliResult};
use crate::output::{Outcome, Plot};

/// Everything a runner needs besides its own parameters.
pub struct Context {
    pub model: Option<Value>,
    pub overrides: Map<String, Value>,
    pub seed: u64,
    pub quick: bool,
    pub eps_list: Option<Vec<f64>>,
}

type Resolved = (Outcome, Value);

fn row(label: impl Into<String>, lhs: f64, rhs: f64, margin: f64) -> ReportRow {
    ReportRow { label: label.into(), lhs, rhs, margin }
}

fn flat_chart() -> CliResult<ModelSpacetime> {
    Ok(ModelSpacetime::minkowski(2, vec![(-5.0, 5.0), (-5.0, 5.0)])?)
}

fn chart(ctx: &Context) -> CliResult<ModelSpacetime> {
    model_from(&ctx.model, flat_chart)
}

fn ext(v: ExtReal) -> f64 {
    v.to_f64()
}

/// Overrides the margin-based verdict and keeps the status consistent.
fn with_verdict(mut r: InequalityReport, passed: bool) -> InequalityReport {
    r.passed = passed;
    r.status = if passed { ReportStatus::Passed } else { ReportStatus::Failed };
    r
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

// ---------------------------------------------------------------- distortion

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistortionParams {
    k: f64,
    n: f64,
    length: f64,
    /// Curvature profile along the geodesic; constant K when absent.
    profile: Option<KappaProfile>,
    t_grid: Vec<f64>,
    theta_samples: usize,
    /// Both set: also check the distortion defect estimate.
    p: Option<f64>,
    eta: Option<f64>,
    tolerance: f64,
}

fn distortion(ctx: &Context) -> CliResult<Resolved> {
    let defaults = DistortionParams {
        k: 1.0,
        n: 3.0,
        length: 3.0,
        profile: None,
        t_grid: vec![0.25, 0.5, 0.75],
        theta_samples: 64,
        p: None,
        eta: None,
        tolerance: 1e-9,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let profile = match &p.profile {
        Some(pr) => pr.clone(),
        None => KappaProfile::constant(p.length, p.k)?,
    };
    let kmin = profile.min_value();
    let kmax = profile.samples().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut upper = profile.length();
    for kk in [kmax, kmax / (p.n - 1.0)] {
        if let ExtReal::Finite(z) = pi_const(kk) {
            upper = upper.min(0.98 * z);
        }
    }
    if let (Some(_), Some(eta), ExtReal::Finite(z)) = (p.p, p.eta, pi_const(p.k / (p.n - 1.0))) {
        upper = upper.min(z - eta);
    }
    let m = p.theta_samples.max(2);
    let mut rows = Vec::new();
    let mut defect_rows = Vec::new();
    let mut plots = Vec::new();
    for &t in &p.t_grid {
        let (mut sig, mut tau) = (Vec::new(), Vec::new());
        for i in 1..=m {
            let th = upper * i as f64 / (m + 1) as f64;
            let tv = ext(tau_coeff(&profile, p.n, t, th)?);
            let lower = ext(tau_const(kmin, p.n, t, th));
            rows.push(row(format!("tau;t={t};theta={th:.6}"), tv, lower, tv - lower));
            sig.push((th, ext(sigma_coeff(&profile, t, th)?)));
            tau.push((th, tv));
            if let (Some(pp), Some(eta)) = (p.p, p.eta) {
                if t > 0.0 && t < 1.0 {
                    let bound = defect_bound(p.k, p.n, pp, eta, &profile, t, th)?;
                    let gap = (ext(tau_const(p.k, p.n, t, th)) - tv).max(0.0);
                    defect_rows.push(row(format!("defect;t={t};theta={th:.6}"), gap, bound, bound - gap));
                }
            }
        }
        plots.push(Plot::new(format!("sigma_t{t}"), "theta", "sigma", sig));
        plots.push(Plot::new(format!("tau_t{t}"), "theta", "tau", tau));
    }
    let prov = json!({"check": "tau coefficients dominate the constant-curvature ones at the profile minimum"});
    let mut reports = vec![InequalityReport::new("tau_monotonicity", rows, p.tolerance, prov)];
    if !defect_rows.is_empty() {
        reports.push(InequalityReport::new("distortion_defect", defect_rows, p.tolerance, json!({"k": p.k})));
    }
    Ok((Outcome { reports, plots, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- cd-verify

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CdParams {
    /// Density to check; the model density of (k, n, length) when absent.
    density: Option<CdDensity>,
    k: f64,
    n: f64,
    length: f64,
    line_samples: usize,
    tolerance: f64,
    /// Set to also run the integral-curvature diameter bound.
    p: Option<f64>,
    c_const: f64,
}

fn cd_verify(ctx: &Context) -> CliResult<Resolved> {
    let defaults = CdParams {
        density: None,
        k: 1.0,
        n: 3.0,
        length: 3.0,
        line_samples: 64,
        tolerance: 1e-6,
        p: None,
        c_const: 10.0,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let d = match &p.density {
        Some(d) => d.clone(),
        None => model_density(p.k, p.n, p.length)?,
    };
    let check = verify_cd_density(&d, p.line_samples, p.tolerance)?;
    let report = InequalityReport::new(
        "cd_density",
        vec![row("worst_violation", check.worst_violation, 0.0, -check.worst_violation)],
        p.tolerance,
        json!({"status": check.status, "witness": check.witness}),
    );
    let mut reports = vec![with_verdict(report, check.passed)];
    let mut extra = json!({"cd": check});
    if let Some(pp) = p.p {
        let dr = diameter_report(&d, p.k, pp, p.c_const, p.tolerance)?;
        let r = InequalityReport::new(
            "diameter_bound",
            vec![row("diameter", dr.diameter, dr.bound, dr.bound - dr.diameter)],
            p.tolerance,
            json!({"params": dr.params}),
        )
        .with_diagnostic("deficit", dr.deficit);
        reports.push(with_verdict(r, dr.passed));
        extra["diameter"] = serde_json::to_value(&dr).expect("serializes");
    }
    let (a, b) = d.interval();
    let pts = (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).map(|x| (x, d.eval(x))).collect();
    let plots = vec![Plot::new("density", "x", "h", pts)];
    Ok((Outcome { reports, plots, extra, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- transport

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportParams {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    q: f64,
    tolerance: f64,
}

fn transport(ctx: &Context) -> CliResult<Resolved> {
    let ev = |t: f64, x: f64| Event::new(vec![t, x]);
    let defaults = TransportParams {
        mu: DiscreteMeasure::uniform_points(vec![ev(0.0, -0.5), ev(0.0, 0.5)])?,
        nu: DiscreteMeasure::uniform_points(vec![ev(1.5, -0.2), ev(2.0, 0.7)])?,
        q: 0.5,
        tolerance: 1e-9,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let out = lq_distance(&s, &p.mu, &p.nu, p.q)?;
    let mut rows = Vec::new();
    if let (Some(plan), Some(cert)) = (&out.plan, &out.certificate) {
        let err = plan.marginal_error(&p.mu, &p.nu);
        rows.push(row("marginal_error", err, 0.0, -err));
        rows.push(row("dual_violation", cert.max_dual_violation, 0.0, -cert.max_dual_violation));
        rows.push(row("complementary_slackness", cert.max_slackness_violation, 0.0, -cert.max_slackness_violation));
        rows.push(row("duality_gap", cert.duality_gap, 0.0, -cert.duality_gap));
    }
    let report = InequalityReport::new("lq_transport", rows, p.tolerance, json!({"q": p.q}))
        .with_diagnostic("value", ext(out.value));
    let extra = serde_json::to_value(&out).expect("serializes");
    Ok((Outcome { reports: vec![report], extra, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- tmcp / tcd

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TmcpParams {
    o: Vec<f64>,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    per_axis: usize,
    /// Check the future variant: the box lies in the past of o.
    future: bool,
    k: f64,
    n: f64,
    q: f64,
    t_grid: Vec<f64>,
    n_primes: Vec<f64>,
    tolerance: f64,
}

fn eighths() -> Vec<f64> {
    (1..8).map(|k| k as f64 / 8.0).collect()
}

fn tmcp(ctx: &Context) -> CliResult<Resolved> {
    let defaults = TmcpParams {
        o: vec![0.0, 0.0],
        box_lo: vec![1.5, -0.4],
        box_hi: vec![2.3, 0.4],
        per_axis: if ctx.quick { 5 } else { 6 },
        future: false,
        k: 0.0,
        n: 2.0,
        q: 0.5,
        t_grid: eighths(),
        n_primes: vec![2.0, 3.0, 4.0],
        tolerance: 1e-3,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let cfg = TmcpConfig { k: p.k, n: p.n, q: p.q, t_grid: p.t_grid, n_primes: p.n_primes, tolerance: p.tolerance };
    let o = Event::new(p.o);
    let report = if p.future {
        check_tmcp_future(&s, &o, &p.box_lo, &p.box_hi, p.per_axis, &cfg)?
    } else {
        let mu1 = DiscreteMeasure::uniform_on_box(&s, &p.box_lo, &p.box_hi, p.per_axis)?;
        check_tmcp(&s, &o, &mu1, &cfg)?
    };
    let plots = entropy_plots(&report);
    Ok((Outcome { reports: vec![report], plots, ..Default::default() }, resolved))
}

/// Entropy against its bound along t, one plot per N'.
fn entropy_plots(r: &InequalityReport) -> Vec<Plot> {
    type Series = Vec<(f64, f64)>;
    let mut by_np: Vec<(String, Series, Series)> = Vec::new();
    for row in r.rows.iter().filter(|x| !x.label.ends_with("linear")) {
        let mut parts = row.label.split(';');
        let t = parts.next().and_then(|s| s.strip_prefix("t=")).and_then(|s| s.parse::<f64>().ok());
        let np = parts.next().and_then(|s| s.strip_prefix("N'=")).map(str::to_owned);
        let (Some(t), Some(np)) = (t, np) else { continue };
        match by_np.iter_mut().find(|e| e.0 == np) {
            Some(e) => {
                e.1.push((t, row.lhs));
                e.2.push((t, row.rhs));
            }
            None => by_np.push((np, vec![(t, row.lhs)], vec![(t, row.rhs)])),
        }
    }
    by_np
        .into_iter()
        .flat_map(|(np, lhs, rhs)| {
            [
                Plot::new(format!("{}_entropy_np{np}", r.name), "t", "entropy", lhs),
                Plot::new(format!("{}_bound_np{np}", r.name), "t", "bound", rhs),
            ]
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TcdParams {
    mu0_lo: Vec<f64>,
    mu0_hi: Vec<f64>,
    mu1_lo: Vec<f64>,
    mu1_hi: Vec<f64>,
    per_axis: usize,
    k: f64,
    n: f64,
    q: f64,
    t_grid: Vec<f64>,
    n_primes: Vec<f64>,
    tolerance: f64,
}

fn tcd(ctx: &Context) -> CliResult<Resolved> {
    let defaults = TcdParams {
        mu0_lo: vec![-0.2, -0.2],
        mu0_hi: vec![0.2, 0.2],
        mu1_lo: vec![1.5, -0.3],
        mu1_hi: vec![1.9, 0.3],
        per_axis: 3,
        k: 0.0,
        n: 2.0,
        q: 0.5,
        t_grid: eighths(),
        n_primes: vec![2.0, 3.0],
        tolerance: 1e-3,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let mu0 = DiscreteMeasure::equal_cells_on_box(&s, &p.mu0_lo, &p.mu0_hi, p.per_axis)?;
    let mu1 = DiscreteMeasure::equal_cells_on_box(&s, &p.mu1_lo, &p.mu1_hi, p.per_axis)?;
    let cfg = TmcpConfig { k: p.k, n: p.n, q: p.q, t_grid: p.t_grid, n_primes: p.n_primes, tolerance: p.tolerance };
    let report = check_tcd_semiconvexity(&s, &mu0, &mu1, &cfg)?;
    let plots = entropy_plots(&report);
    Ok((Outcome { reports: vec![report], plots, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- volume

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrunnParams {
    source: BrunnSource,
    x1: BoxRegion,
    k: f64,
    n: f64,
    t_grid: Vec<f64>,
    resolution: usize,
}

fn brunn(ctx: &Context) -> CliResult<Resolved> {
    let defaults = BrunnParams {
        source: BrunnSource::Point(Event::new(vec![0.0, 0.0])),
        x1: BoxRegion { lo: vec![1.6, -0.4], hi: vec![2.4, 0.4] },
        k: 0.0,
        n: 2.0,
        t_grid: vec![0.25, 0.5, 0.75],
        resolution: if ctx.quick { 24 } else { 48 },
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let mut reports = Vec::new();
    let mut curve = Vec::new();
    for &t in &p.t_grid {
        let r = brunn_minkowski(&s, &p.source, &p.x1, p.k, p.n, t, p.resolution)?;
        curve.push((t, r.rows[0].lhs - r.rows[0].rhs));
        reports.push(r);
    }
    let plots = vec![Plot::new("brunn_margin", "t", "margin", curve)];
    Ok((Outcome { reports, plots, ..Default::default() }, resolved))
}

/// Star-shaped sets for the volume comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
enum StarRegion {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// {0 < t − o_t ≤ t_max, |x − o_x| ≤ slope·(t − o_t)} in 1+1.
    Cone { slope: f64, t_max: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BishopParams {
    o: Vec<f64>,
    region: StarRegion,
    k: f64,
    n: f64,
    radii: Vec<f64>,
    dr: f64,
    resolution: usize,
    tolerance: f64,
}

fn bishop(ctx: &Context) -> CliResult<Resolved> {
    let defaults = BishopParams {
        o: vec![0.0, 0.0],
        region: StarRegion::Cone { slope: 0.5, t_max: 1.3 },
        k: 0.0,
        n: 2.0,
        radii: vec![0.25, 0.5, 0.75, 1.0],
        dr: 0.05,
        resolution: if ctx.quick { 96 } else { 128 },
        tolerance: 1e-3,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let o = Event::new(p.o.clone());
    let report = match &p.region {
        StarRegion::Box { lo, hi } => {
            let e = BoxRegion { lo: lo.clone(), hi: hi.clone() };
            bishop_gromov(&s, &o, &e, p.k, p.n, &p.radii, p.dr, p.resolution, p.tolerance)?
        }
        StarRegion::Cone { slope, t_max } => {
            if p.o.len() != 2 {
                return Err(bad("cone regions are 1+1 only"));
            }
            let (ot, ox) = (p.o[0], p.o[1]);
            let (slope, t_max) = (*slope, *t_max);
            let e = FnRegion {
                predicate: move |q: &Event| {
                    let dt = q.0[0] - ot;
                    dt > 0.0 && dt <= t_max && (q.0[1] - ox).abs() <= slope * dt
                },
                lo: vec![ot, ox - slope * t_max],
                hi: vec![ot + t_max, ox + slope * t_max],
            };
            bishop_gromov(&s, &o, &e, p.k, p.n, &p.radii, p.dr, p.resolution, p.tolerance)?
        }
    };
    let volumes = report
        .diagnostics
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("v(")?.strip_suffix(')')?.parse::<f64>().ok().map(|r| (r, *v)))
        .collect();
    let plots = vec![Plot::new("ball_volume", "r", "v", volumes)];
    Ok((Outcome { reports: vec![report], plots, ..Default::default() }, resolved))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MyersParams {
    k: f64,
    n: f64,
    sample_grid: usize,
    tolerance: f64,
}

fn myers(ctx: &Context) -> CliResult<Resolved> {
    let defaults = MyersParams { k: 1.0, n: 2.0, sample_grid: if ctx.quick { 9 } else { 17 }, tolerance: 0.05 };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = model_from(&ctx.model, || Ok(ModelSpacetime::cos_warp(0.02, (-2.0, 2.0))?))?;
    let report = bonnet_myers(&s, p.k, p.n, p.sample_grid, p.tolerance)?;
    Ok((Outcome { reports: vec![report], ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- calculus

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DalembertParams {
    o: Vec<f64>,
    center: Vec<f64>,
    radius: Vec<f64>,
    k: f64,
    n: f64,
    variant: DalembertVariant,
    h_list: Vec<f64>,
    /// Allowed excess as a multiple of h.
    tolerance_factor: f64,
}

fn dalembert(ctx: &Context) -> CliResult<Resolved> {
    let defaults = DalembertParams {
        o: vec![0.0, 0.0],
        center: vec![2.0, 0.0],
        radius: vec![0.4, 0.4],
        k: 0.0,
        n: 2.0,
        variant: DalembertVariant::Distance,
        h_list: vec![0.02, 0.01],
        tolerance_factor: 10.0,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let phi = Bump::new(p.center.clone(), p.radius.clone())?;
    let o = Event::new(p.o.clone());
    let mut reports = Vec::new();
    let mut gaps = Vec::new();
    for &h in &p.h_list {
        let mut r = dalembert_check(&s, &o, &phi, p.k, p.n, p.variant, h, p.tolerance_factor * h)?;
        r.name = format!("dalembert;h={h}");
        gaps.push((h, (r.rows[0].lhs - r.rows[0].rhs).abs()));
        reports.push(r);
    }
    let plots = vec![Plot::new("dalembert_gap", "h", "abs_gap", gaps)];
    Ok((Outcome { reports, plots, ..Default::default() }, resolved))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EikonalParams {
    o: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    h_list: Vec<f64>,
    stencil: Stencil,
}

fn eikonal(ctx: &Context) -> CliResult<Resolved> {
    let defaults = EikonalParams {
        o: vec![0.0, 0.0],
        lo: vec![1.5, -0.3],
        hi: vec![2.5, 0.3],
        h_list: vec![0.05, 0.025],
        stencil: Stencil::Forward,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let o = Event::new(p.o.clone());
    let mut reports = Vec::new();
    let mut devs = Vec::new();
    for &h in &p.h_list {
        let mut r = eikonal_check(&s, &o, &p.lo, &p.hi, h, p.stencil)?;
        r.name = format!("eikonal;h={h}");
        devs.push((h, r.rows[0].lhs));
        reports.push(r);
    }
    let extra = json!({"observed_order": observed_order(&devs)});
    let plots = vec![Plot::new("eikonal_deviation", "h", "max_deviation", devs)];
    Ok((Outcome { reports, plots, extra, ..Default::default() }, resolved))
}

fn observed_order(pts: &[(f64, f64)]) -> Option<f64> {
    let (a, b) = (pts.first()?, pts.last()?);
    (pts.len() >= 2 && b.1 > 0.0).then(|| (a.1 / b.1).ln() / (a.0 / b.0).ln())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrenierParams {
    o: Vec<f64>,
    /// Target measure; `n_random` seeded uniform points in the sample box when absent.
    mu1: Option<DiscreteMeasure>,
    n_random: usize,
    sample_lo: Vec<f64>,
    sample_hi: Vec<f64>,
    q: f64,
    h_list: Vec<f64>,
    stencil: Stencil,
}

fn brenier(ctx: &Context) -> CliResult<Resolved> {
    let defaults = BrenierParams {
        o: vec![0.0, 0.0],
        mu1: None,
        n_random: 50,
        sample_lo: vec![1.0, -0.5],
        sample_hi: vec![2.5, 0.5],
        q: 0.5,
        h_list: vec![0.02, 0.01],
        stencil: Stencil::Forward,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let mu1 = match &p.mu1 {
        Some(m) => m.clone(),
        None => {
            if p.sample_lo.len() != p.sample_hi.len() || p.sample_lo.iter().zip(&p.sample_hi).any(|(a, b)| !(a < b)) {
                return Err(bad("sample box needs lo < hi on every axis"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let pts = (0..p.n_random)
                .map(|_| Event::new(p.sample_lo.iter().zip(&p.sample_hi).map(|(a, b)| rng.gen_range(*a..*b)).collect()))
                .collect();
            DiscreteMeasure::uniform_points(pts)?
        }
    };
    let o = Event::new(p.o.clone());
    let mut reports = Vec::new();
    let mut devs = Vec::new();
    for &h in &p.h_list {
        let mut r = brenier_mccann_check(&s, &o, &mu1, p.q, h, p.stencil)?;
        r.name = format!("brenier;h={h}");
        let dev = r.diagnostics.iter().find(|d| d.0 == "max_deviation").map_or(f64::NAN, |d| d.1);
        devs.push((h, dev));
        reports.push(r);
    }
    let extra = json!({"observed_order": observed_order(&devs)});
    let plots = vec![Plot::new("brenier_deviation", "h", "max_deviation", devs)];
    Ok((Outcome { reports, plots, extra, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- needles

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeedleParams {
    o: Vec<f64>,
    window: NeedleWindow,
    n_rays: usize,
    samples_per_ray: usize,
    n: f64,
    line_samples: usize,
    tolerance: f64,
    /// Box on which the disintegration is reassembled against the direct measure.
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    reassembly_tolerance: f64,
}

fn needles(ctx: &Context) -> CliResult<Resolved> {
    let defaults = NeedleParams {
        o: vec![0.0, 0.0],
        window: NeedleWindow { alpha: (-0.6, 0.6), tau: (0.5, 3.0) },
        n_rays: 64,
        samples_per_ray: 65,
        n: 2.0,
        line_samples: 64,
        tolerance: 1e-6,
        box_lo: vec![1.2, -0.3],
        box_hi: vec![2.0, 0.4],
        reassembly_tolerance: 1e-3,
    };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let s = chart(ctx)?;
    let dec = needle_decomposition(&s, &Event::new(p.o.clone()), p.window, p.n_rays, p.samples_per_ray, p.n)?;
    let checks = dec.verify(p.line_samples, p.tolerance)?;
    let rows = dec
        .rays
        .iter()
        .zip(&checks)
        .map(|(r, c)| row(format!("alpha={:.6}", r.alpha), c.worst_violation, 0.0, -c.worst_violation))
        .collect();
    let cd = InequalityReport::new("needle_cd", rows, p.tolerance, json!({"n": p.n}));
    let cd = with_verdict(cd, checks.iter().all(|c| c.passed));
    let region = dec.region();
    let (lo, hi) = (p.box_lo.clone(), p.box_hi.clone());
    if lo.len() != 2 || hi.len() != 2 {
        return Err(bad("reassembly box must be 1+1"));
    }
    let clipped = FnRegion {
        predicate: |q: &Event| region.contains(q) && (0..2).all(|k| q.0[k] >= lo[k] && q.0[k] <= hi[k]),
        lo: lo.clone(),
        hi: hi.clone(),
    };
    let direct = s.region_measure(&clipped, 96);
    let glued = dec.reassemble_box(&lo, &hi);
    let rel = if direct > 0.0 { ((glued - direct) / direct).abs() } else { (glued - direct).abs() };
    let reassembly = InequalityReport::new(
        "needle_reassembly",
        vec![row("relative_error", rel, p.reassembly_tolerance, p.reassembly_tolerance - rel)],
        0.0,
        json!({"direct": direct, "reassembled": glued}),
    );
    let weights = dec.rays.iter().zip(&dec.quotient_weights).map(|(r, w)| (r.alpha, *w)).collect();
    let plots = vec![Plot::new("quotient_weights", "alpha", "weight", weights)];
    Ok((Outcome { reports: vec![cd, reassembly], plots, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- rough metrics

/// A 1+1 grid: "kinked" (a = 1 − |t|/4), "cosh" (a = cosh t), or a path to a binary grid file.
fn load_grid(source: &str) -> CliResult<MetricGrid> {
    let geom = || GridGeometry::new(vec![161, 81], vec![0.0125, 0.0125], vec![-1.0, 0.0]);
    match source {
        "kinked" => Ok(MetricGrid::warped(geom()?, |t| 1.0 - t.abs() / 4.0)?),
        "cosh" => Ok(MetricGrid::warped(geom()?, f64::cosh)?),
        path => {
            let path = PathBuf::from(path);
            let f = std::fs::File::open(&path).map_err(io_err(&path))?;
            Ok(MetricGrid::read_binary(std::io::BufReader::new(f))?)
        }
    }
}

fn eps_override(ctx: &Context, mut default: Vec<f64>) -> Vec<f64> {
    if let Some(e) = &ctx.eps_list {
        default = e.clone();
    }
    default
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MollifyParams {
    grid: String,
    eps_list: Vec<f64>,
    /// Write the mollified grid for the last ε.
    write_grid: bool,
}

fn with_eps(ctx: &Context) -> Map<String, Value> {
    let mut o = ctx.overrides.clone();
    if let Some(e) = &ctx.eps_list {
        o.insert("eps_list".into(), json!(e));
    }
    o
}

fn mollify(ctx: &Context) -> CliResult<Resolved> {
    let defaults = MollifyParams { grid: "kinked".into(), eps_list: eps_override(ctx, vec![0.4, 0.2, 0.1, 0.05]), write_grid: false };
    let (p, resolved) = resolve(defaults, &with_eps(ctx))?;
    let g = load_grid(&p.grid)?;
    let lip = g.lipschitz_bound();
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    let mut last = None;
    for &eps in &p.eps_list {
        let m = g.mollify(eps)?;
        let dist = m.sup_distance(&g);
        // A Lipschitz coefficient moves by at most L·ε under a radius-ε average.
        let bound = lip * eps * (g.dims() as f64).sqrt();
        rows.push(row(format!("eps={eps}"), dist, bound, bound - dist));
        curve.push((eps, dist));
        last = Some(m);
    }
    let report = InequalityReport::new("mollifier_sup_error", rows, 1e-12, json!({"lipschitz_bound": lip}));
    let mut files = Vec::new();
    let mut extra = json!({"source": g.manifest()});
    if let (true, Some(m)) = (p.write_grid, last) {
        let mut bytes = Vec::new();
        m.write_binary(&mut bytes).map_err(|source| CliError::Io { path: "mollified.bin".into(), source })?;
        files.push(("mollified.bin".into(), bytes));
        extra["mollified"] = serde_json::to_value(m.manifest()).expect("serializes");
    }
    let plots = vec![Plot::new("sup_error", "eps", "sup_distance", curve)];
    Ok((Outcome { reports: vec![report], plots, extra, files }, resolved))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LpParams {
    grid: String,
    k: f64,
    n: f64,
    p_list: Vec<f64>,
    eps_list: Vec<f64>,
}

fn lp_deficit(ctx: &Context) -> CliResult<Resolved> {
    let defaults = LpParams {
        grid: "kinked".into(),
        k: 0.0,
        n: 2.0,
        p_list: vec![1.0, 2.0],
        eps_list: eps_override(ctx, vec![0.4, 0.2, 0.1, 0.05]),
    };
    let (p, resolved) = resolve(defaults, &with_eps(ctx))?;
    let g = load_grid(&p.grid)?;
    let mut reports = Vec::new();
    let mut plots = Vec::new();
    let mut curves = Vec::new();
    for &pp in &p.p_list {
        let curve = g.lp_deficit_curve(p.k, pp, &p.eps_list, p.n)?;
        let rows = curve
            .windows(2)
            .map(|w| row(format!("eps={}->{}", w[0].eps, w[1].eps), w[1].deficit, w[0].deficit, w[0].deficit - w[1].deficit))
            .collect();
        reports.push(InequalityReport::new(&format!("lp_deficit_decreasing;p={pp}"), rows, 0.0, json!({"k": p.k, "n": p.n})));
        plots.push(Plot::new(format!("lp_deficit_p{pp}"), "eps", "deficit", curve.iter().map(|c| (c.eps, c.deficit)).collect()));
        curves.push(json!({"p": pp, "points": curve}));
    }
    Ok((Outcome { reports, plots, extra: json!({"curves": curves}), ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- aubry

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AubryParams {
    p: f64,
    c_const: f64,
    sample_grid: usize,
    tolerance: f64,
}

fn aubry(ctx: &Context) -> CliResult<Resolved> {
    let defaults = AubryParams { p: 2.0, c_const: 10.0, sample_grid: if ctx.quick { 5 } else { 9 }, tolerance: 0.05 };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let model: AubryModel = model_from(&ctx.model, || Ok(AubryModel::default()))?;
    let report = aubry_spacetime_check(&model, p.p, p.c_const, p.sample_grid, p.tolerance)?;
    let (t0, t1) = model.warp()?.domain();
    let ks = (0..=400).map(|i| t0 + (t1 - t0) * i as f64 / 400.0).map(|t| (t, model.curvature(t))).collect();
    let plots = vec![Plot::new("curvature", "t", "k", ks)];
    Ok((Outcome { reports: vec![report], plots, ..Default::default() }, resolved))
}

// ---------------------------------------------------------------- suite

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteParams {
    level: SuiteLevel,
}

fn suite(ctx: &Context) -> CliResult<Resolved> {
    let defaults = SuiteParams { level: if ctx.quick { SuiteLevel::Quick } else { SuiteLevel::Full } };
    let (p, resolved) = resolve(defaults, &ctx.overrides)?;
    let mut outcomes = Vec::new();
    for r in run_suite(p.level, ctx.seed) {
        let o = r?;
        println!("{}", o.line());
        outcomes.push(o);
    }
    let reports = outcomes
        .iter()
        .map(|o| {
            let rows = o.metrics.iter().map(|(k, v)| row(k.clone(), *v, f64::NAN, 0.0)).collect();
            let r = InequalityReport::new(&format!("criterion_{:02}_{}", o.id, o.name), rows, 0.0, json!({"summary": o.summary}));
            with_verdict(r, o.passed)
        })
        .collect();
    let files = vec![
        ("suite.csv".to_string(), outcomes_csv(&outcomes).into_bytes()),
        ("suite.json".to_string(), serde_json::to_vec_pretty(&outcomes).expect("serializes")),
    ];
    Ok((Outcome { reports, files, ..Default::default() }, resolved))
}

pub fn dispatch(command: &str, ctx: &Context) -> CliResult<Resolved> {
    match command {
        "distortion" => distortion(ctx),
        "cd-verify" => cd_verify(ctx),
        "transport" => transport(ctx),
        "tmcp" => tmcp(ctx),
        "tcd" => tcd(ctx),
        "brunn-minkowski" => brunn(ctx),
        "bishop-gromov" => bishop(ctx),
        "bonnet-myers" => myers(ctx),
        "dalembert" => dalembert(ctx),
        "eikonal" => eikonal(ctx),
        "brenier" => brenier(ctx),
        "needles" => needles(ctx),
        "mollify" => mollify(ctx),
        "lp-deficit" => lp_deficit(ctx),
        "aubry" => aubry(ctx),
        "suite" => suite(ctx),
        other => Err(bad(format!("unknown command `{other}`"))),
    }
}
