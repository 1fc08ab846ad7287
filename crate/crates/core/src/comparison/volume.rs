//! Volume-type comparisons: Brunn–Minkowski, Bishop–Gromov, Bonnet–Myers.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{row, InequalityReport};
use crate::distortion::{pi_const, sin_const, tau_const};
use crate::error::{invalid, Result};
use crate::ext::ExtReal;
use crate::models::{BoxRegion, Event, ModelSpacetime, Region};
use crate::numerics::simpson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrunnSource {
    Point(Event),
    Region(BoxRegion),
}

fn tau_f64(k: f64, n: f64, t: f64, theta: f64) -> f64 {
    match tau_const(k, n, t, theta) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => f64::INFINITY,
        ExtReal::NegInf => 0.0,
    }
}

/// Cell-centre samples of a region on an `n`-per-axis grid of its box.
fn region_samples(region: &dyn Region, n: usize) -> Vec<Event> {
    let (lo, hi) = region.bounding_box();
    let d = lo.len();
    let mut out = Vec::new();
    for c in 0..n.pow(d as u32) {
        let mut idx = c;
        let mut p = vec![0.0; d];
        for k in (0..d).rev() {
            p[k] = lo[k] + (hi[k] - lo[k]) * ((idx % n) as f64 + 0.5) / n as f64;
            idx /= n;
        }
        let p = Event(p);
        if region.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Measures of the hit cells of a raster, its one-cell erosion and its
/// one-cell dilation.
struct Raster {
    lo: Vec<f64>,
    h: Vec<f64>,
    n: usize,
    hit: Vec<bool>,
}

impl Raster {
    fn cover(points: &[Event], n: usize) -> Raster {
        let d = points[0].dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in points {
            for k in 0..d {
                lo[k] = lo[k].min(p.0[k]);
                hi[k] = hi[k].max(p.0[k]);
            }
        }
        let h: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / n as f64).max(1e-12)).collect();
        // One spare cell on every side so the dilation stays inside.
        let lo: Vec<f64> = lo.iter().zip(&h).map(|(a, w)| a - w).collect();
        let m = n + 2;
        let mut hit = vec![false; m.pow(d as u32)];
        for p in points {
            let idx = (0..d).fold(0, |acc, k| {
                let i = (((p.0[k] - lo[k]) / h[k]).floor() as usize).min(m - 1);
                acc * m + i
            });
            hit[idx] = true;
        }
        Raster { lo, h, n: m, hit }
    }

    fn neighbours(&self, c: usize) -> Vec<usize> {
        let d = self.h.len();
        let mut mi = vec![0usize; d];
        let mut idx = c;
        for k in (0..d).rev() {
            mi[k] = idx % self.n;
            idx /= self.n;
        }
        let mut out = Vec::new();
        for k in 0..d {
            for delta in [-1i64, 1] {
                let j = mi[k] as i64 + delta;
                if j < 0 || j >= self.n as i64 {
                    continue;
                }
                let mut nb = mi.clone();
                nb[k] = j as usize;
                out.push(nb.iter().fold(0, |acc, &i| acc * self.n + i));
            }
        }
        out
    }

    fn mass(&self, s: &ModelSpacetime, keep: impl Fn(usize) -> bool) -> f64 {
        let d = self.h.len();
        let vol: f64 = self.h.iter().product();
        let mut total = 0.0;
        for c in 0..self.hit.len() {
            if !keep(c) {
                continue;
            }
            let mut idx = c;
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = self.lo[k] + ((idx % self.n) as f64 + 0.5) * self.h[k];
                idx /= self.n;
            }
            total += s.density(&Event(p)) * vol;
        }
        total
    }

    fn estimates(&self, s: &ModelSpacetime) -> (f64, f64, f64) {
        let hit = self.mass(s, |c| self.hit[c]);
        let inner = self.mass(s, |c| self.hit[c] && self.neighbours(c).iter().all(|&j| self.hit[j]));
        let upper = self.mass(s, |c| self.hit[c] || self.neighbours(c).iter().any(|&j| self.hit[j]));
        (inner, hit, upper)
    }
}

/// m[eval_t(G(X0, X1))]^{1/N} against the τ-weighted Brunn–Minkowski
/// combination. The intermediate set is rasterized at `resolution` cells per
/// axis from geodesics through 3× denser samples of X1 (and of X0).
pub fn brunn_minkowski(
    s: &ModelSpacetime,
    source: &BrunnSource,
    x1: &dyn Region,
    k: f64,
    n: f64,
    t: f64,
    resolution: usize,
) -> Result<InequalityReport> {
    if !(0.0..=1.0).contains(&t) || !(n > 1.0) || resolution < 2 {
        return invalid("need t in [0, 1], N > 1 and resolution ≥ 2");
    }
    let dense = 3 * resolution;
    let targets = region_samples(x1, dense);
    let (sources, m0) = match source {
        BrunnSource::Point(o) => (vec![o.clone()], 0.0),
        BrunnSource::Region(b) => (region_samples(b, resolution), s.region_measure(b, resolution)),
    };
    if targets.is_empty() || sources.is_empty() {
        return invalid("regions contain no sample points");
    }
    let m1 = s.region_measure(x1, resolution);
    let (mut lmin, mut lmax) = (f64::INFINITY, 0.0f64);
    let mut image = Vec::with_capacity(sources.len() * targets.len());
    for x in &sources {
        for y in &targets {
            let l = match s.time_separation(x, y)? {
                ExtReal::Finite(v) if v > 0.0 => v,
                _ => return invalid("X1 is not in the chronological future of the source"),
            };
            lmin = lmin.min(l);
            lmax = lmax.max(l);
            image.push(s.geodesic_point(x, y, t)?);
        }
    }
    let (inner, hit, upper) = Raster::cover(&image, resolution).estimates(s);
    let inf_tau = |tt: f64| tau_f64(k, n, tt, lmin).min(tau_f64(k, n, tt, lmax));
    let e = 1.0 / n;
    let first = if m0 > 0.0 { inf_tau(1.0 - t) * m0.powf(e) } else { 0.0 };
    let rhs = first + inf_tau(t) * m1.powf(e);
    let lhs = upper.powf(e);
    let rows = vec![row(format!("t={t}"), lhs, rhs, lhs - rhs)];
    Ok(InequalityReport::new(
        "brunn_minkowski",
        rows,
        1e-9,
        json!({"K": k, "N": n, "t": t, "resolution": resolution, "l_range": [lmin, lmax]}),
    )
    .with_diagnostic("inner_measure", inner)
    .with_diagnostic("hit_measure", hit)
    .with_diagnostic("upper_measure", upper)
    .with_diagnostic("hit_margin", hit.powf(e) - rhs)
    .with_diagnostic("m_x1", m1))
}

/// ∫_0^r sin_{K/(N−1)}^{N−1}.
fn model_volume(k: f64, n: f64, r: f64) -> f64 {
    let kk = k / (n - 1.0);
    simpson(|th| sin_const(kk, th).max(0.0).powf(n - 1.0), 0.0, r, 2000)
}

/// Volume and area ratios v(r)/v(R), s(r)/s(R) over every pair r < R of
/// `radii`, against the model ratios. Areas are central differences of the
/// volume with step `dr`.
#[allow(clippy::too_many_arguments)]
pub fn bishop_gromov(
    s: &ModelSpacetime,
    o: &Event,
    e: &dyn Region,
    k: f64,
    n: f64,
    radii: &[f64],
    dr: f64,
    resolution: usize,
    tolerance: f64,
) -> Result<InequalityReport> {
    if !(n > 1.0) || radii.is_empty() {
        return invalid("need N > 1 and at least one radius");
    }
    let limit = pi_const(k / (n - 1.0));
    if radii.iter().any(|&r| !(r > dr) || ExtReal::Finite(r + dr) >= limit)
        || radii.windows(2).any(|w| !(w[0] < w[1]))
    {
        return invalid("radii must increase inside (dr, π_{K/(N−1)} − dr)");
    }
    s.assert_star_shaped(o, e, 8)?;
    let mut vs = Vec::new();
    let mut areas = Vec::new();
    for &r in radii {
        vs.push(s.ball_volume_area(o, r, e, dr, resolution)?.0);
        areas.push(s.ball_volume_area(o, r - dr, e, 2.0 * dr, resolution)?.1);
    }
    let kk = k / (n - 1.0);
    let mut rows = Vec::new();
    for i in 0..radii.len() {
        for j in i + 1..radii.len() {
            let (r, big_r) = (radii[i], radii[j]);
            let model_v = model_volume(k, n, r) / model_volume(k, n, big_r);
            let v = vs[i] / vs[j];
            rows.push(row(format!("v;r={r};R={big_r}"), v, model_v, v - model_v));
            let model_s = (sin_const(kk, r) / sin_const(kk, big_r)).powf(n - 1.0);
            let a = areas[i] / areas[j];
            rows.push(row(format!("s;r={r};R={big_r}"), a, model_s, a - model_s));
        }
    }
    let mut report = InequalityReport::new(
        "bishop_gromov",
        rows,
        tolerance,
        json!({"K": k, "N": n, "radii": radii, "dr": dr, "resolution": resolution}),
    );
    for (r, v) in radii.iter().zip(&vs) {
        report = report.with_diagnostic(&format!("v({r})"), *v);
    }
    Ok(report)
}

/// Lattice timelike diameter against π√((N−1)/K); `tolerance` absorbs the
/// lattice error.
pub fn bonnet_myers(s: &ModelSpacetime, k: f64, n: f64, sample_grid: usize, tolerance: f64) -> Result<InequalityReport> {
    if !(k > 0.0) || !(n > 1.0) {
        return invalid("Bonnet–Myers needs K > 0 and N > 1");
    }
    let bound = std::f64::consts::PI * ((n - 1.0) / k).sqrt();
    let diameter = s.timelike_diameter(sample_grid)?;
    Ok(InequalityReport::new(
        "bonnet_myers",
        vec![row("diameter", diameter, bound, bound - diameter)],
        tolerance,
        json!({"K": k, "N": n, "sample_grid": sample_grid}),
    )
    .with_diagnostic("diameter", diameter)
    .with_diagnostic("bound", bound))
}
