//! Radial needle decompositions and the Aubry-type diameter check.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{row, InequalityReport};
use crate::distortion::KappaProfile;
use crate::error::{invalid, Error, Result};
use crate::models::{Event, FnRegion, ModelSpacetime, SampledFn};
use crate::numerics::{linspace, simpson};
use crate::onedim::{aubry_diameter_bound, curvature_deficit_sup, diameter_report, verify_cd_density, CdCheck, CdDensity};

/// Rapidity and proper-time window of the radial family from `o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedleWindow {
    pub alpha: (f64, f64),
    pub tau: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Needle {
    pub alpha: f64,
    /// Crossing with the level set of l_o at the middle of the τ window.
    pub base: Event,
    pub curve: Vec<Event>,
    /// Conditional density in proper time, normalized to unit mass.
    pub density: CdDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleDecomposition {
    pub origin: Event,
    pub window: NeedleWindow,
    pub rays: Vec<Needle>,
    pub quotient_weights: Vec<f64>,
    /// Reference measure of the swept region.
    pub total_mass: f64,
}

fn ray(o: &Event, alpha: f64, tau: f64) -> Event {
    Event(vec![o.0[0] + tau * alpha.cosh(), o.0[1] + tau * alpha.sinh()])
}

/// Splits the sector of I⁺(o) swept by `window` into `n_rays` radial
/// geodesics with their conditional densities h(τ) = τ·dm/dvol. Only flat
/// 1+1 charts (optionally weighted) are supported.
pub fn needle_decomposition(
    s: &ModelSpacetime,
    o: &Event,
    window: NeedleWindow,
    n_rays: usize,
    samples_per_ray: usize,
    n: f64,
) -> Result<NeedleDecomposition> {
    if !s.is_minkowski() || s.dim() != 2 {
        return Err(Error::UnsupportedModel("radial needles need a flat 1+1 chart".into()));
    }
    let NeedleWindow { alpha: (a0, a1), tau: (t0, t1) } = window;
    if !(a0 < a1) || !(0.0 < t0 && t0 < t1) || n_rays == 0 || samples_per_ray < 3 {
        return invalid("window needs α0 < α1, 0 < τ0 < τ1, and at least one ray with three samples");
    }
    let d_alpha = (a1 - a0) / n_rays as f64;
    let taus = linspace(t0, t1, samples_per_ray);
    let kappa = KappaProfile::constant(t1 - t0, 0.0)?;
    let mut rays = Vec::with_capacity(n_rays);
    let mut masses = Vec::with_capacity(n_rays);
    for i in 0..n_rays {
        let alpha = a0 + (i as f64 + 0.5) * d_alpha;
        let curve: Vec<Event> = taus.iter().map(|&t| ray(o, alpha, t)).collect();
        if curve.iter().any(|p| !s.in_chart(p)) {
            return invalid("window leaves the chart");
        }
        let h = |t: f64| t * s.density(&ray(o, alpha, t));
        let mass = simpson(h, t0, t1, 256);
        let samples: Vec<f64> = taus.iter().map(|&t| h(t) / mass).collect();
        let density = CdDensity::new(t0, t1, samples, kappa.clone(), n)?;
        rays.push(Needle { alpha, base: ray(o, alpha, 0.5 * (t0 + t1)), curve, density });
        masses.push(mass * d_alpha);
    }
    let total: f64 = masses.iter().sum();
    Ok(NeedleDecomposition {
        origin: o.clone(),
        window,
        rays,
        quotient_weights: masses.iter().map(|m| m / total).collect(),
        total_mass: total,
    })
}

impl NeedleDecomposition {
    /// The swept sector as a region of the chart.
    pub fn region(&self) -> FnRegion<impl Fn(&Event) -> bool + Sync + '_> {
        let o = self.origin.clone();
        let w = self.window;
        let corners: Vec<Event> = [w.alpha.0, w.alpha.1]
            .iter()
            .flat_map(|&a| [w.tau.0, w.tau.1].map(|t| ray(&o, a, t)))
            .collect();
        let t_lo = corners.iter().map(|p| p.0[0]).fold(f64::INFINITY, f64::min).min(o.0[0] + w.tau.0);
        let t_hi = corners.iter().map(|p| p.0[0]).fold(f64::NEG_INFINITY, f64::max);
        let x_lo = corners.iter().map(|p| p.0[1]).fold(f64::INFINITY, f64::min);
        let x_hi = corners.iter().map(|p| p.0[1]).fold(f64::NEG_INFINITY, f64::max);
        FnRegion {
            predicate: move |p: &Event| {
                let (dt, dx) = (p.0[0] - o.0[0], p.0[1] - o.0[1]);
                if dt <= dx.abs() {
                    return false;
                }
                let tau = (dt * dt - dx * dx).sqrt();
                let alpha = (dx / dt).atanh();
                tau >= w.tau.0 && tau <= w.tau.1 && alpha >= w.alpha.0 && alpha <= w.alpha.1
            },
            lo: vec![t_lo, x_lo],
            hi: vec![t_hi, x_hi],
        }
    }

    /// Measure of box ∩ sector reassembled from the rays. Each needle carries
    /// the mass of its rapidity cell; the box is intersected with sub-rays of
    /// the cell, which all use that needle's conditional density.
    pub fn reassemble_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        const SUB: usize = 16;
        let (t0, t1) = self.window.tau;
        let o = &self.origin;
        let width = self.ray_spacing();
        let chord = |alpha: f64| -> Option<(f64, f64)> {
            let dir = [alpha.cosh(), alpha.sinh()];
            let (mut a, mut b) = (t0, t1);
            for k in 0..2 {
                if dir[k] == 0.0 {
                    if o.0[k] < lo[k] || o.0[k] > hi[k] {
                        return None;
                    }
                    continue;
                }
                let (u, v) = ((lo[k] - o.0[k]) / dir[k], (hi[k] - o.0[k]) / dir[k]);
                a = a.max(u.min(v));
                b = b.min(u.max(v));
            }
            (a < b).then_some((a, b))
        };
        self.rays
            .iter()
            .zip(&self.quotient_weights)
            .map(|(needle, q)| {
                let frac: f64 = (0..SUB)
                    .filter_map(|j| chord(needle.alpha + width * ((j as f64 + 0.5) / SUB as f64 - 0.5)))
                    .map(|(a, b)| simpson(|t| needle.density.eval(t), a, b, 64))
                    .sum::<f64>()
                    / SUB as f64;
                q * self.total_mass * frac
            })
            .sum()
    }

    pub fn verify(&self, line_samples: usize, tolerance: f64) -> Result<Vec<CdCheck>> {
        self.rays.iter().map(|r| verify_cd_density(&r.density, line_samples, tolerance)).collect()
    }

    /// Rapidity width of the cell around each ray.
    pub fn ray_spacing(&self) -> f64 {
        (self.window.alpha.1 - self.window.alpha.0) / self.rays.len() as f64
    }
}

/// 1+1 warped model dt² − a(t)² dx² whose curvature k(t) = −a″/a equals K
/// except for a dip k = K − `dip` on `slab`; a solves a″ = −k a from a(0) = 1,
/// a′(0) = 0 and the chart stops `margin` short of the zeros of a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AubryModel {
    pub k: f64,
    pub n: f64,
    pub dip: f64,
    pub slab: (f64, f64),
    pub margin: f64,
    pub x_half_width: f64,
}

impl Default for AubryModel {
    fn default() -> Self {
        AubryModel { k: 1.0, n: 2.0, dip: 0.05, slab: (0.3, 0.4), margin: 0.02, x_half_width: 2.0 }
    }
}

const AUBRY_STEPS: usize = 4096;

impl AubryModel {
    pub fn curvature(&self, t: f64) -> f64 {
        if t >= self.slab.0 && t <= self.slab.1 {
            self.k - self.dip
        } else {
            self.k
        }
    }

    /// Integrates the warp outward from t = 0 until it reaches zero.
    fn half_branch(&self, dir: f64) -> Result<Vec<(f64, f64)>> {
        let h = 1e-4 * dir;
        let (mut t, mut a, mut da) = (0.0f64, 1.0f64, 0.0f64);
        let mut out = vec![(0.0, 1.0)];
        let f = |t: f64, a: f64, da: f64| (da, -self.curvature(t) * a);
        while a > 0.0 {
            let (k1a, k1v) = f(t, a, da);
            let (k2a, k2v) = f(t + h / 2.0, a + h / 2.0 * k1a, da + h / 2.0 * k1v);
            let (k3a, k3v) = f(t + h / 2.0, a + h / 2.0 * k2a, da + h / 2.0 * k2v);
            let (k4a, k4v) = f(t + h, a + h * k3a, da + h * k3v);
            a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            da += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            t += h;
            out.push((t, a));
            if t.abs() > 1e3 {
                return invalid("warp has no zero; the model needs K > 0");
            }
        }
        Ok(out)
    }

    /// Warp samples on the chart's time interval.
    pub fn warp(&self) -> Result<SampledFn> {
        if !(self.k > 0.0) || !(self.margin > 0.0) {
            return invalid("Aubry model needs K > 0 and a positive margin");
        }
        let mut back = self.half_branch(-1.0)?;
        let fwd = self.half_branch(1.0)?;
        let t_lo = back.last().map(|p| p.0).unwrap_or(0.0) + self.margin;
        let t_hi = fwd.last().map(|p| p.0).unwrap_or(0.0) - self.margin;
        if !(t_lo < t_hi) {
            return invalid("margin exceeds the lifetime of the model");
        }
        back.reverse();
        back.pop();
        back.extend(fwd);
        let ts: Vec<f64> = back.iter().map(|p| p.0).collect();
        let vs: Vec<f64> = back.iter().map(|p| p.1).collect();
        let grid = linspace(t_lo, t_hi, AUBRY_STEPS + 1);
        SampledFn::new(grid.iter().map(|&t| (t, crate::numerics::interp(&ts, &vs, t))).collect())
    }

    pub fn spacetime(&self) -> Result<ModelSpacetime> {
        let warp = self.warp()?;
        let (t0, t1) = warp.domain();
        ModelSpacetime::warped(2, warp, vec![(t0, t1), (-self.x_half_width, self.x_half_width)])
    }
}

/// Sup-deficit over a family of time windows, the Aubry bound against the
/// lattice diameter, and the same pipeline on the vertical needles x = const
/// (conditional density a(t), curvature k(t)).
pub fn aubry_spacetime_check(
    model: &AubryModel,
    p: f64,
    c_const: f64,
    sample_grid: usize,
    tolerance: f64,
) -> Result<InequalityReport> {
    let s = model.spacetime()?;
    let warp = model.warp()?;
    let (t0, t1) = warp.domain();
    let ts = linspace(t0, t1, AUBRY_STEPS + 1);
    let ht = (t1 - t0) / AUBRY_STEPS as f64;
    let ks: Vec<f64> = ts.iter().map(|&t| model.curvature(t)).collect();
    let mut regions = Vec::new();
    let span = t1 - t0;
    for frac in [1.0, 0.5, 0.25, 0.125] {
        let len = frac * span;
        let starts = ((1.0 - frac) / frac * 2.0).round() as usize;
        for j in 0..=starts {
            let a = t0 + if starts > 0 { j as f64 * (span - len) / starts as f64 } else { 0.0 };
            let w: Vec<f64> =
                ts.iter().map(|&t| if t >= a && t <= a + len { warp.eval(t) * ht } else { 0.0 }).collect();
            regions.push(w);
        }
    }
    let deficit = curvature_deficit_sup(&ks, model.k, p, &regions)?;
    let prov = json!({"model": model, "p": p, "c_const": c_const, "sample_grid": sample_grid, "deficit": deficit});
    let bound = match aubry_diameter_bound(model.k, model.n, p, deficit, c_const) {
        Ok(b) => b,
        Err(Error::HypothesisViolated(msg)) => return Ok(InequalityReport::hypothesis_violated("aubry", &msg, prov)),
        Err(e) => return Err(e),
    };
    let diameter = s.timelike_diameter(sample_grid)?;
    let kappa = KappaProfile::from_fn(span, 2049, |th| model.curvature(t0 + th))?;
    let needle = CdDensity::from_fn(t0, t1, 2049, |t| warp.eval(t), kappa, model.n)?;
    let needle_report = match diameter_report(&needle, model.k, p, c_const, tolerance) {
        Ok(r) => r,
        Err(Error::HypothesisViolated(msg)) => return Ok(InequalityReport::hypothesis_violated("aubry", &msg, prov)),
        Err(e) => return Err(e),
    };
    let cd = verify_cd_density(&needle, 64, 1e-6)?;
    Ok(InequalityReport::new(
        "aubry",
        vec![
            row("spacetime", diameter, bound, bound - diameter),
            row("needle", needle_report.diameter, needle_report.bound, needle_report.bound - needle_report.diameter),
        ],
        tolerance,
        prov,
    )
    .with_diagnostic("deficit", deficit)
    .with_diagnostic("needle_deficit", needle_report.deficit)
    .with_diagnostic("bonnet_myers_bound", std::f64::consts::PI * ((model.n - 1.0) / model.k).sqrt())
    .with_diagnostic("needle_cd_worst_violation", cd.worst_violation))
}
