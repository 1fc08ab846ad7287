//! Model spacetimes: Minkowski, warped products dt² − a(t)²|dx|², and
//! 1+1 metrics with a Lipschitz coefficient a(t).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::numerics::{interp, linspace, GAUSS4};

/// Chart coordinates, time first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Event(pub Vec<f64>);

impl Event {
    pub fn new(coords: Vec<f64>) -> Self {
        Event(coords)
    }

    pub fn t(&self) -> f64 {
        self.0[0]
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn spatial(&self) -> &[f64] {
        &self.0[1..]
    }

    pub fn lerp(&self, other: &Event, s: f64) -> Event {
        Event(self.0.iter().zip(&other.0).map(|(a, b)| a + s * (b - a)).collect())
    }
}

/// A function of the time coordinate, linear between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct SampledFn {
    ts: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for SampledFn {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        SampledFn::new(points)
    }
}

impl From<SampledFn> for Vec<(f64, f64)> {
    fn from(f: SampledFn) -> Self {
        f.ts.into_iter().zip(f.values).collect()
    }
}

impl SampledFn {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("sampled function needs two points");
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return invalid("non-finite sample");
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return invalid("sample times must increase strictly");
        }
        let (ts, values) = points.into_iter().unzip();
        Ok(SampledFn { ts, values })
    }

    pub fn from_fn(t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(linspace(t0, t1, n.max(2)).into_iter().map(|t| (t, f(t))).collect())
    }

    pub fn constant(t0: f64, t1: f64, v: f64) -> Result<Self> {
        Self::new(vec![(t0, v), (t1, v)])
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        interp(&self.ts, &self.values, t)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.ts[0], self.ts[self.ts.len() - 1])
    }

    fn extreme_on(&self, t0: f64, t1: f64, pick: fn(f64, f64) -> f64) -> f64 {
        let mut acc = pick(self.eval(t0), self.eval(t1));
        let lo = self.ts.partition_point(|&s| s <= t0);
        let hi = self.ts.partition_point(|&s| s < t1);
        for v in &self.values[lo..hi.max(lo)] {
            acc = pick(acc, *v);
        }
        acc
    }

    pub fn max_on(&self, t0: f64, t1: f64) -> f64 {
        self.extreme_on(t0, t1, f64::max)
    }

    pub fn min_on(&self, t0: f64, t1: f64) -> f64 {
        self.extreme_on(t0, t1, f64::min)
    }

    /// Largest difference quotient between neighbouring samples.
    pub fn lipschitz_bound(&self) -> f64 {
        self.ts
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacetimeKind {
    Minkowski,
    /// dt² − a(t)²|dx|² in any dimension.
    WarpedProduct { warp: SampledFn },
    /// dt² − a(t)² dx² with a merely Lipschitz, 1+1 only.
    PiecewiseLipschitz1p1 { a: SampledFn },
}

/// Resolution of the causal lattice used for non-Minkowski kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeConfig {
    /// Time slices between the two events at the coarse level.
    pub time_steps: usize,
    /// Velocity resolution (spatial node spacing over time step).
    pub slope_resolution: f64,
    /// Combine the coarse level with its 2× refinement.
    pub richardson: bool,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { time_steps: 16, slope_resolution: 1.0 / 16.0, richardson: true }
    }
}

impl LatticeConfig {
    pub fn refined(&self, level: u32) -> LatticeConfig {
        let f = 2usize.pow(level);
        LatticeConfig {
            time_steps: self.time_steps * f,
            slope_resolution: self.slope_resolution / f as f64,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ModelSpacetime {
    dim: usize,
    kind: SpacetimeKind,
    weight: Option<SampledFn>,
    bounds: Vec<(f64, f64)>,
    weight_lipschitz: f64,
    lattice: LatticeConfig,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    dim: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warp: Option<SampledFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<SampledFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<SampledFn>,
    bounds: Vec<(f64, f64)>,
    #[serde(default)]
    lattice: LatticeConfig,
}

impl TryFrom<RawModel> for ModelSpacetime {
    type Error = Error;
    fn try_from(r: RawModel) -> Result<Self> {
        let kind = match r.kind.as_str() {
            "minkowski" => SpacetimeKind::Minkowski,
            "warped" | "warped_product" => SpacetimeKind::WarpedProduct {
                warp: r.warp.ok_or_else(|| Error::InvalidInput("warped model needs \"warp\"".into()))?,
            },
            "piecewise_lipschitz" | "piecewise_lipschitz_1p1" => SpacetimeKind::PiecewiseLipschitz1p1 {
                a: r.a.ok_or_else(|| Error::InvalidInput("lipschitz model needs \"a\"".into()))?,
            },
            other => return invalid(format!("unknown model kind {other:?}")),
        };
        let mut m = ModelSpacetime::new(r.dim, kind, r.bounds)?;
        if let Some(w) = r.weight {
            m = m.with_weight(w)?;
        }
        Ok(m.with_lattice(r.lattice))
    }
}

impl From<ModelSpacetime> for RawModel {
    fn from(m: ModelSpacetime) -> Self {
        let (kind, warp, a) = match m.kind {
            SpacetimeKind::Minkowski => ("minkowski", None, None),
            SpacetimeKind::WarpedProduct { warp } => ("warped", Some(warp), None),
            SpacetimeKind::PiecewiseLipschitz1p1 { a } => ("piecewise_lipschitz", None, Some(a)),
        };
        RawModel { dim: m.dim, kind: kind.into(), warp, a, weight: m.weight, bounds: m.bounds, lattice: m.lattice }
    }
}

/// A region of the chart: membership predicate plus a bounding box.
pub trait Region: Sync {
    fn contains(&self, p: &Event) -> bool;
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region for BoxRegion {
    fn contains(&self, p: &Event) -> bool {
        p.0.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (lo, hi))| x >= lo && x <= hi)
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
}

/// A predicate region with an explicit bounding box.
pub struct FnRegion<F> {
    pub predicate: F,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl<F: Fn(&Event) -> bool + Sync> Region for FnRegion<F> {
    fn contains(&self, p: &Event) -> bool {
        (self.predicate)(p)
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
}

/// A maximizing lattice path with its cumulative proper time.
#[derive(Debug, Clone)]
pub struct Maximizer {
    pub points: Vec<Event>,
    pub cumulative: Vec<f64>,
    pub length: f64,
    /// Another lattice path through different nodes matched the length within 1e-6.
    pub multiple_maximizers: bool,
}

impl Maximizer {
    /// The point at proper-time fraction `t` along the path.
    pub fn point_at(&self, t: f64) -> Event {
        let target = t.clamp(0.0, 1.0) * self.length;
        let n = self.cumulative.len();
        if self.length <= 0.0 || n < 2 {
            return self.points[0].lerp(&self.points[n - 1], t);
        }
        let k = self.cumulative.partition_point(|&c| c < target).clamp(1, n - 1);
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        self.points[k - 1].lerp(&self.points[k], w)
    }
}

pub const TIE_TOLERANCE: f64 = 1e-6;

impl ModelSpacetime {
    pub fn new(dim: usize, kind: SpacetimeKind, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if dim < 2 {
            return invalid("dimension must be at least 2");
        }
        if bounds.len() != dim || bounds.iter().any(|b| !(b.0 < b.1)) {
            return invalid("bounds must give lo < hi for every axis");
        }
        let (t0, t1) = bounds[0];
        match &kind {
            SpacetimeKind::Minkowski => {}
            SpacetimeKind::WarpedProduct { warp: f } | SpacetimeKind::PiecewiseLipschitz1p1 { a: f } => {
                let (d0, d1) = f.domain();
                if d0 > t0 || d1 < t1 {
                    return invalid("coefficient must cover the time range of the chart");
                }
                if f.min_on(t0, t1) <= 0.0 {
                    return invalid("coefficient must be positive on the chart");
                }
            }
        }
        if matches!(kind, SpacetimeKind::PiecewiseLipschitz1p1 { .. }) && dim != 2 {
            return invalid("piecewise-Lipschitz models are 1+1 dimensional");
        }
        Ok(ModelSpacetime { dim, kind, weight: None, bounds, weight_lipschitz: 0.0, lattice: LatticeConfig::default() })
    }

    pub fn minkowski(dim: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(dim, SpacetimeKind::Minkowski, bounds)
    }

    pub fn warped(dim: usize, warp: SampledFn, bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(dim, SpacetimeKind::WarpedProduct { warp }, bounds)
    }

    pub fn lipschitz_1p1(a: SampledFn, bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(2, SpacetimeKind::PiecewiseLipschitz1p1 { a }, bounds)
    }

    /// dt² − cosh²(t) dx²; timelike Ricci curvature ≡ −1.
    pub fn cosh_warp(t_range: (f64, f64), x_range: (f64, f64)) -> Result<Self> {
        let warp = SampledFn::from_fn(t_range.0, t_range.1, 4097, f64::cosh)?;
        Self::warped(2, warp, vec![t_range, x_range])
    }

    /// dt² − cos²(t) dx² on |t| ≤ π/2 − margin; timelike Ricci curvature ≡ +1.
    pub fn cos_warp(margin: f64, x_range: (f64, f64)) -> Result<Self> {
        let h = std::f64::consts::FRAC_PI_2 - margin;
        let warp = SampledFn::from_fn(-h, h, 4097, f64::cos)?;
        Self::warped(2, warp, vec![(-h, h), x_range])
    }

    /// Weight is −log(dm/dvol) as a function of time.
    pub fn with_weight(mut self, weight: SampledFn) -> Result<Self> {
        let (d0, d1) = weight.domain();
        if d0 > self.bounds[0].0 || d1 < self.bounds[0].1 {
            return invalid("weight must cover the time range of the chart");
        }
        self.weight_lipschitz = weight.lipschitz_bound();
        self.weight = Some(weight);
        Ok(self)
    }

    pub fn with_lattice(mut self, lattice: LatticeConfig) -> Self {
        self.lattice = lattice;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let kind = self.kind.clone();
        let fresh = ModelSpacetime::new(self.dim, kind, bounds)?;
        self.bounds = fresh.bounds;
        Ok(self)
    }

    /// The same spacetime with the time coordinate negated.
    pub fn time_reversed(&self) -> Result<Self> {
        let flip = |f: &SampledFn| -> Result<SampledFn> {
            let mut pts: Vec<(f64, f64)> = f.ts.iter().zip(&f.values).map(|(t, v)| (-t, *v)).collect();
            pts.reverse();
            SampledFn::new(pts)
        };
        let kind = match &self.kind {
            SpacetimeKind::Minkowski => SpacetimeKind::Minkowski,
            SpacetimeKind::WarpedProduct { warp } => SpacetimeKind::WarpedProduct { warp: flip(warp)? },
            SpacetimeKind::PiecewiseLipschitz1p1 { a } => SpacetimeKind::PiecewiseLipschitz1p1 { a: flip(a)? },
        };
        let mut bounds = self.bounds.clone();
        bounds[0] = (-self.bounds[0].1, -self.bounds[0].0);
        let mut out = ModelSpacetime::new(self.dim, kind, bounds)?.with_lattice(self.lattice);
        if let Some(w) = &self.weight {
            out = out.with_weight(flip(w)?)?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SpacetimeKind {
        &self.kind
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn lattice(&self) -> LatticeConfig {
        self.lattice
    }

    pub fn weight_lipschitz(&self) -> f64 {
        self.weight_lipschitz
    }

    pub fn is_minkowski(&self) -> bool {
        matches!(self.kind, SpacetimeKind::Minkowski)
    }

    fn coefficient(&self) -> Option<&SampledFn> {
        match &self.kind {
            SpacetimeKind::Minkowski => None,
            SpacetimeKind::WarpedProduct { warp } => Some(warp),
            SpacetimeKind::PiecewiseLipschitz1p1 { a } => Some(a),
        }
    }

    /// Spatial scale factor a(t).
    pub fn scale_factor(&self, t: f64) -> f64 {
        self.coefficient().map_or(1.0, |f| f.eval(t))
    }

    pub fn weight_at(&self, p: &Event) -> f64 {
        self.weight.as_ref().map_or(0.0, |w| w.eval(p.t()))
    }

    /// exp(−weight)·√|det g| in chart coordinates.
    pub fn density(&self, p: &Event) -> f64 {
        (-self.weight_at(p)).exp() * self.scale_factor(p.t()).powi(self.dim as i32 - 1)
    }

    /// Metric tensor at `p` (diagonal in these models).
    pub fn metric_diag(&self, p: &Event) -> Vec<f64> {
        let a2 = self.scale_factor(p.t()).powi(2);
        (0..self.dim).map(|i| if i == 0 { 1.0 } else { -a2 }).collect()
    }

    pub fn in_chart(&self, p: &Event) -> bool {
        p.dim() == self.dim
            && p.0.iter().zip(&self.bounds).all(|(x, b)| *x >= b.0 - 1e-12 && *x <= b.1 + 1e-12)
    }

    fn check_events(&self, x: &Event, y: &Event) -> Result<()> {
        if !self.in_chart(x) || !self.in_chart(y) {
            return invalid("event outside the chart");
        }
        Ok(())
    }

    fn spatial_offset(x: &Event, y: &Event) -> f64 {
        x.spatial().iter().zip(y.spatial()).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    /// Causal reach ∫ dt / a(t) between two times.
    fn null_reach(&self, t0: f64, t1: f64) -> f64 {
        match self.coefficient() {
            None => t1 - t0,
            Some(f) => {
                let n = 512;
                let h = (t1 - t0) / n as f64;
                (0..n)
                    .map(|i| {
                        let s = t0 + i as f64 * h;
                        GAUSS4.iter().map(|(u, w)| w / f.eval(s + u * h)).sum::<f64>() * h
                    })
                    .sum()
            }
        }
    }

    /// Whether `y` lies in the causal future of `x`.
    pub fn causal(&self, x: &Event, y: &Event) -> bool {
        let dt = y.t() - x.t();
        let dx = Self::spatial_offset(x, y);
        if dt < 0.0 {
            return false;
        }
        if dt == 0.0 {
            return dx == 0.0;
        }
        dx <= self.null_reach(x.t(), y.t()) * (1.0 + 1e-12)
    }

    pub fn time_separation(&self, x: &Event, y: &Event) -> Result<ExtReal> {
        self.check_events(x, y)?;
        if x == y {
            return Ok(ExtReal::ZERO);
        }
        let dt = y.t() - x.t();
        let dx = Self::spatial_offset(x, y);
        if self.is_minkowski() {
            return Ok(if dt > 0.0 && dt >= dx {
                ExtReal::Finite((dt * dt - dx * dx).max(0.0).sqrt())
            } else {
                ExtReal::NegInf
            });
        }
        if !self.causal(x, y) {
            return Ok(ExtReal::NegInf);
        }
        let cfg = self.lattice;
        let coarse = self.pair_lattice(x, y, cfg.refined(0))?.solve(false);
        let Some(coarse) = coarse else {
            return Ok(ExtReal::ZERO);
        };
        if !cfg.richardson {
            return Ok(ExtReal::Finite(coarse.length));
        }
        let fine = self.pair_lattice(x, y, cfg.refined(1))?.solve(false).map_or(coarse.length, |m| m.length);
        Ok(ExtReal::Finite((fine + (fine - coarse.length) / 3.0).max(0.0)))
    }

    /// Raw lattice value at refinement `level` (no extrapolation).
    pub fn lattice_time_separation(&self, x: &Event, y: &Event, level: u32) -> Result<ExtReal> {
        self.check_events(x, y)?;
        if self.is_minkowski() {
            return self.time_separation(x, y);
        }
        if !self.causal(x, y) {
            return Ok(ExtReal::NegInf);
        }
        Ok(self
            .pair_lattice(x, y, self.lattice.refined(level))?
            .solve(false)
            .map_or(ExtReal::ZERO, |m| ExtReal::Finite(m.length)))
    }

    pub fn lorentz_distance<'a>(&'a self, o: &'a Event) -> impl Fn(&Event) -> Result<ExtReal> + 'a {
        move |y| self.time_separation(o, y)
    }

    /// Maximizing geodesic from `x` to `y`: the straight segment in
    /// Minkowski, the fine-level lattice path otherwise.
    pub fn maximizer(&self, x: &Event, y: &Event) -> Result<Maximizer> {
        self.check_events(x, y)?;
        let l = self.time_separation(x, y)?;
        if !matches!(l, ExtReal::Finite(v) if v > 0.0) {
            return Err(Error::NoGeodesic("events are not chronologically related".into()));
        }
        if self.is_minkowski() {
            let length = l.to_f64();
            return Ok(Maximizer {
                points: vec![x.clone(), y.clone()],
                cumulative: vec![0.0, length],
                length,
                multiple_maximizers: false,
            });
        }
        let level = if self.lattice.richardson { 1 } else { 0 };
        self.pair_lattice(x, y, self.lattice.refined(level))?
            .solve(true)
            .ok_or_else(|| Error::NoGeodesic("no causal lattice path".into()))
    }

    pub fn geodesic_point(&self, x: &Event, y: &Event, t: f64) -> Result<Event> {
        if !(0.0..=1.0).contains(&t) {
            return invalid("t must lie in [0, 1]");
        }
        if self.is_minkowski() {
            self.maximizer(x, y)?;
            return Ok(x.lerp(y, t));
        }
        Ok(self.maximizer(x, y)?.point_at(t))
    }

    /// Maximizing geodesic used for transport curves: straight in Minkowski,
    /// otherwise integrated from the conserved spatial momentum
    /// (dx/dt = p / (a√(a² + p²)), dτ/dt = a / √(a² + p²)) with p found by
    /// bisection, falling back to the lattice path.
    pub fn transport_geodesic(&self, x: &Event, y: &Event) -> Result<Maximizer> {
        if self.is_minkowski() {
            return self.maximizer(x, y);
        }
        self.check_events(x, y)?;
        match self.momentum_geodesic(x, y) {
            Some(m) => Ok(m),
            None => self.maximizer(x, y),
        }
    }

    fn momentum_geodesic(&self, x: &Event, y: &Event) -> Option<Maximizer> {
        const INTERVALS: usize = 512;
        let f = self.coefficient()?;
        let (t0, t1) = (x.t(), y.t());
        if !(t1 > t0) {
            return None;
        }
        let dist = Self::spatial_offset(x, y);
        let h = (t1 - t0) / INTERVALS as f64;
        let a: Vec<f64> = (0..INTERVALS)
            .flat_map(|i| GAUSS4.iter().map(move |(u, _)| t0 + (i as f64 + u) * h))
            .map(|t| f.eval(t))
            .collect();
        let reach = |p: f64| -> f64 {
            a.chunks(4).map(|c| c.iter().zip(&GAUSS4).map(|(av, (_, w))| w * p / (av * (av * av + p * p).sqrt())).sum::<f64>() * h).sum()
        };
        let mut hi = 1.0;
        while reach(hi) < dist {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if reach(mid) < dist {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        let dir: Vec<f64> = if dist > 0.0 {
            x.spatial().iter().zip(y.spatial()).map(|(a, b)| (b - a) / dist).collect()
        } else {
            vec![0.0; self.dim - 1]
        };
        let mut along = 0.0;
        let mut tau = 0.0;
        let mut points = Vec::with_capacity(INTERVALS + 1);
        let mut cumulative = Vec::with_capacity(INTERVALS + 1);
        let place = |t: f64, s: f64| {
            let mut c = vec![t];
            c.extend(x.spatial().iter().zip(&dir).map(|(xi, e)| xi + s * e));
            Event(c)
        };
        points.push(x.clone());
        cumulative.push(0.0);
        for (i, c) in a.chunks(4).enumerate() {
            for (av, (_, w)) in c.iter().zip(&GAUSS4) {
                let root = (av * av + p * p).sqrt();
                along += w * h * p / (av * root);
                tau += w * h * av / root;
            }
            let t = if i + 1 == INTERVALS { t1 } else { t0 + (i + 1) as f64 * h };
            points.push(place(t, along));
            cumulative.push(tau);
        }
        *points.last_mut().expect("nonempty") = y.clone();
        Some(Maximizer { points, cumulative, length: tau, multiple_maximizers: false })
    }

    fn pair_lattice(&self, x: &Event, y: &Event, cfg: LatticeConfig) -> Result<PairLattice> {
        let f = self.coefficient().expect("lattice only for non-Minkowski kinds");
        if cfg.time_steps == 0 || !(cfg.slope_resolution > 0.0) {
            return invalid("lattice resolution must be positive");
        }
        let (t0, t1) = (x.t(), y.t());
        let dt = t1 - t0;
        let dx = Self::spatial_offset(x, y);
        let dir: Vec<f64> = if dx > 0.0 {
            x.spatial().iter().zip(y.spatial()).map(|(a, b)| (b - a) / dx).collect()
        } else {
            let mut e = vec![0.0; self.dim - 1];
            e[0] = 1.0;
            e
        };
        let steps = cfg.time_steps;
        let ht = dt / steps as f64;
        let hs = ht * cfg.slope_resolution;
        let v0 = dx / dt;
        let vmax = 1.0 / f.min_on(t0, t1);
        let half = (0.5 * dt * (vmax + v0.abs()) / hs).ceil() as i64 + 1;
        let m_lo = ((-vmax - v0) / cfg.slope_resolution).ceil() as i64;
        let m_hi = ((vmax - v0) / cfg.slope_resolution).floor() as i64;
        let mut table = Vec::with_capacity(steps);
        for i in 0..steps {
            let s = t0 + i as f64 * ht;
            let amax = f.max_on(s, s + ht);
            let row: Vec<f64> = (m_lo..=m_hi)
                .map(|m| {
                    let v = v0 + m as f64 * cfg.slope_resolution;
                    if amax * v.abs() > 1.0 + 1e-12 {
                        return f64::NEG_INFINITY;
                    }
                    GAUSS4
                        .iter()
                        .map(|(u, w)| {
                            let a = f.eval(s + u * ht);
                            w * (1.0 - a * a * v * v).max(0.0).sqrt()
                        })
                        .sum::<f64>()
                        * ht
                })
                .collect();
            table.push(row);
        }
        let spatial_bounds = (self.dim == 2).then(|| self.bounds[1]);
        Ok(PairLattice {
            origin: x.clone(),
            dir,
            t0,
            ht,
            steps,
            v0,
            hs,
            half,
            m_lo,
            m_hi,
            table,
            spatial_bounds,
        })
    }

    /// Total measure of `region ∩ chart` by midpoint cells, refining cells
    /// whose corners disagree on membership up to `depth` times.
    pub fn region_measure(&self, region: &dyn Region, resolution: usize) -> f64 {
        self.region_measure_with(region, resolution, 5)
    }

    pub fn region_measure_with(&self, region: &dyn Region, resolution: usize, depth: u32) -> f64 {
        let (lo, hi) = region.bounding_box();
        let lo: Vec<f64> = lo.iter().zip(&self.bounds).map(|(a, b)| a.max(b.0)).collect();
        let hi: Vec<f64> = hi.iter().zip(&self.bounds).map(|(a, b)| a.min(b.1)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return 0.0;
        }
        let d = self.dim;
        let n = resolution.max(1);
        let h: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / n as f64).collect();
        let cells = n.pow(d as u32);
        let cell_mass = |c: usize| {
            let mut idx = c;
            let mut corner = vec![0.0; d];
            for k in (0..d).rev() {
                corner[k] = lo[k] + (idx % n) as f64 * h[k];
                idx /= n;
            }
            self.cell_measure(region, &corner, &h, depth)
        };
        crate::par::map_indices(cells, cell_mass).iter().sum()
    }

    fn cell_measure(&self, region: &dyn Region, corner: &[f64], h: &[f64], depth: u32) -> f64 {
        let d = corner.len();
        let center = Event(corner.iter().zip(h).map(|(c, w)| c + 0.5 * w).collect());
        let vol: f64 = h.iter().product();
        let inside_center = region.contains(&center);
        if depth == 0 {
            return if inside_center { self.density(&center) * vol } else { 0.0 };
        }
        let mut uniform = true;
        for mask in 0..(1usize << d) {
            let p = Event((0..d).map(|k| corner[k] + if mask >> k & 1 == 1 { h[k] } else { 0.0 }).collect());
            if region.contains(&p) != inside_center {
                uniform = false;
                break;
            }
        }
        if uniform {
            return if inside_center { self.density(&center) * vol } else { 0.0 };
        }
        let half: Vec<f64> = h.iter().map(|w| 0.5 * w).collect();
        (0..(1usize << d))
            .map(|mask| {
                let sub: Vec<f64> = (0..d).map(|k| corner[k] + if mask >> k & 1 == 1 { half[k] } else { 0.0 }).collect();
                self.cell_measure(region, &sub, &half, depth - 1)
            })
            .sum()
    }

    /// Volume v(r) of E ∩ {l_o ≤ r} and the difference quotient s(r).
    pub fn ball_volume_area(&self, o: &Event, r: f64, e: &dyn Region, dr: f64, resolution: usize) -> Result<(f64, f64)> {
        if !(r > 0.0) || !(dr > 0.0) {
            return invalid("r and dr must be positive");
        }
        let v_at = |rad: f64| -> Result<f64> {
            let ball = BallInRegion { model: self, o, r: rad, e };
            Ok(self.region_measure(&ball, resolution))
        };
        let v = v_at(r)?;
        let v2 = v_at(r + dr)?;
        Ok((v, ((v2 - v) / dr).max(0.0)))
    }

    /// Checks that p ∈ E implies γ_s ∈ E along the geodesic from `o` for a
    /// few s, over a grid of sample points of E.
    pub fn assert_star_shaped(&self, o: &Event, e: &dyn Region, samples_per_axis: usize) -> Result<()> {
        let (lo, hi) = e.bounding_box();
        let n = samples_per_axis.max(2);
        let d = self.dim;
        for c in 0..n.pow(d as u32) {
            let mut idx = c;
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = lo[k] + (hi[k] - lo[k]) * ((idx % n) as f64 + 0.5) / n as f64;
                idx /= n;
            }
            let p = Event(p);
            if !e.contains(&p) || !self.in_chart(&p) {
                continue;
            }
            for s in [0.25, 0.5, 0.75] {
                let q = self.geodesic_point(o, &p, s)?;
                if !e.contains(&q) {
                    return invalid(format!("region is not star-shaped: {:?} leaves it", q.0));
                }
            }
        }
        Ok(())
    }

    /// Largest time separation between pairs of a uniform grid of events
    /// (chronological pairs only).
    pub fn timelike_diameter(&self, sample_grid: usize) -> Result<f64> {
        let n = sample_grid.max(2);
        if self.is_minkowski() {
            let axes: Vec<Vec<f64>> = self.bounds.iter().map(|b| linspace(b.0, b.1, n)).collect();
            let events = grid_events(&axes);
            let mut best: f64 = 0.0;
            for x in &events {
                for y in &events {
                    if let ExtReal::Finite(v) = self.time_separation(x, y)? {
                        best = best.max(v);
                    }
                }
            }
            return Ok(best);
        }
        if self.dim != 2 {
            return Err(Error::UnsupportedModel("lattice diameter is implemented for 1+1 charts".into()));
        }
        let field = ChartLattice::new(self, self.lattice.refined(0), n)?;
        let sources: Vec<(usize, i64)> = field.sample_nodes(n);
        let per_source = |&(i, j): &(usize, i64)| field.longest_from(i, j, &sources);
        let results = crate::par::map_slice(&sources, per_source);
        Ok(results.into_iter().fold(0.0, f64::max))
    }
}

struct BallInRegion<'a> {
    model: &'a ModelSpacetime,
    o: &'a Event,
    r: f64,
    e: &'a dyn Region,
}

impl Region for BallInRegion<'_> {
    fn contains(&self, p: &Event) -> bool {
        self.e.contains(p)
            && match self.model.time_separation(self.o, p) {
                Ok(ExtReal::Finite(v)) => v <= self.r,
                _ => false,
            }
    }
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.e.bounding_box()
    }
}

fn grid_events(axes: &[Vec<f64>]) -> Vec<Event> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Event).collect()
}

/// Longest lattice path from `x` to `y` in a 1+1 chart for an arbitrary
/// segment length (−∞ for acausal segments), with velocities up to `vmax`.
pub fn lattice_maximizer_1p1(
    x: &Event,
    y: &Event,
    cfg: LatticeConfig,
    vmax: f64,
    segment: impl Fn(&Event, &Event) -> f64,
) -> Result<Maximizer> {
    if x.dim() != 2 || y.dim() != 2 || y.t() <= x.t() {
        return invalid("need two 1+1 events with increasing time");
    }
    let dt = y.t() - x.t();
    let ht = dt / cfg.time_steps as f64;
    let hs = ht * cfg.slope_resolution;
    let v0 = (y.0[1] - x.0[1]) / dt;
    let lat = PairLattice {
        origin: x.clone(),
        dir: vec![1.0],
        t0: x.t(),
        ht,
        steps: cfg.time_steps,
        v0,
        hs,
        half: (0.5 * dt * (vmax + v0.abs()) / hs).ceil() as i64 + 1,
        m_lo: ((-vmax - v0) / cfg.slope_resolution).ceil() as i64,
        m_hi: ((vmax - v0) / cfg.slope_resolution).floor() as i64,
        table: Vec::new(),
        spatial_bounds: None,
    };
    lat.solve_with(|i, j, m| segment(&lat.position(i, j), &lat.position(i + 1, j + m)), true)
        .ok_or_else(|| Error::NoGeodesic("no causal lattice path".into()))
}

/// Lattice sheared along the chord from `origin` to the target: node
/// (i, j) sits at time t0 + i·ht and distance v0·(t − t0) + j·hs along `dir`.
struct PairLattice {
    origin: Event,
    dir: Vec<f64>,
    t0: f64,
    ht: f64,
    steps: usize,
    v0: f64,
    hs: f64,
    half: i64,
    m_lo: i64,
    m_hi: i64,
    /// Edge length by (slice, stencil offset); −∞ marks an acausal edge.
    table: Vec<Vec<f64>>,
    spatial_bounds: Option<(f64, f64)>,
}

impl PairLattice {
    fn position(&self, i: usize, j: i64) -> Event {
        let along = self.v0 * self.ht * i as f64 + j as f64 * self.hs;
        let mut c = Vec::with_capacity(self.origin.dim());
        c.push(self.t0 + i as f64 * self.ht);
        c.extend(self.origin.spatial().iter().zip(&self.dir).map(|(x, e)| x + along * e));
        Event(c)
    }

    fn node_ok(&self, i: usize, j: i64) -> bool {
        match self.spatial_bounds {
            None => true,
            Some((lo, hi)) => {
                let x = self.position(i, j).0[1];
                x >= lo - 1e-12 && x <= hi + 1e-12
            }
        }
    }

    /// Longest path from node (0, 0) to node (steps, 0), tracking the best
    /// path through different nodes for the tie test.
    fn solve(&self, want_path: bool) -> Option<Maximizer> {
        let table = &self.table;
        let m_lo = self.m_lo;
        self.solve_with(|i, _, m| table[i][(m - m_lo) as usize], want_path)
    }

    /// `edge(i, j, m)` is the length of the edge from node (i, j) to
    /// (i + 1, j + m), −∞ when acausal.
    fn solve_with<E: Fn(usize, i64, i64) -> f64>(&self, edge: E, want_path: bool) -> Option<Maximizer> {
        let width = (2 * self.half + 1) as usize;
        let idx = |j: i64| (j + self.half) as usize;
        let mut best = vec![f64::NEG_INFINITY; width];
        let mut second = vec![f64::NEG_INFINITY; width];
        best[idx(0)] = 0.0;
        let mut back: Vec<Vec<i32>> = Vec::with_capacity(self.steps);
        let stencil = self.m_hi - self.m_lo + 1;
        for i in 0..self.steps {
            let mut nb = vec![f64::NEG_INFINITY; width];
            let mut ns = vec![f64::NEG_INFINITY; width];
            let mut nback = vec![i32::MIN; width];
            for (jn, slot) in (0..width).enumerate() {
                let j = jn as i64 - self.half;
                if !self.node_ok(i + 1, j) {
                    continue;
                }
                let (mut b1, mut b2, mut arg) = (f64::NEG_INFINITY, f64::NEG_INFINITY, i32::MIN);
                for s in 0..stencil {
                    let jp = j - (self.m_lo + s);
                    if jp < -self.half || jp > self.half {
                        continue;
                    }
                    let pb = best[idx(jp)];
                    if pb == f64::NEG_INFINITY {
                        continue;
                    }
                    let e = edge(i, jp, self.m_lo + s);
                    if e == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = pb + e;
                    let cand2 = second[idx(jp)] + e;
                    if cand > b1 {
                        b2 = b1.max(cand2);
                        b1 = cand;
                        arg = (self.m_lo + s) as i32;
                    } else {
                        b2 = b2.max(cand).max(cand2);
                    }
                }
                nb[slot] = b1;
                ns[slot] = b2;
                nback[slot] = arg;
            }
            best = nb;
            second = ns;
            if want_path {
                back.push(nback);
            }
        }
        let length = best[idx(0)];
        if length == f64::NEG_INFINITY {
            return None;
        }
        let multiple_maximizers = length - second[idx(0)] <= TIE_TOLERANCE;
        if !want_path {
            return Some(Maximizer { points: Vec::new(), cumulative: Vec::new(), length, multiple_maximizers });
        }
        let mut js = vec![0i64; self.steps + 1];
        for i in (0..self.steps).rev() {
            let m = back[i][idx(js[i + 1])] as i64;
            js[i] = js[i + 1] - m;
        }
        let points: Vec<Event> = (0..=self.steps).map(|i| self.position(i, js[i])).collect();
        let mut cumulative = vec![0.0];
        for i in 0..self.steps {
            let e = edge(i, js[i], js[i + 1] - js[i]);
            cumulative.push(cumulative[i] + e);
        }
        Some(Maximizer { points, cumulative, length, multiple_maximizers })
    }
}

/// Unsheared lattice covering a whole 1+1 chart, for single-source sweeps.
struct ChartLattice {
    steps: usize,
    nodes: i64,
    table: Vec<Vec<f64>>,
    m_max: i64,
}

impl ChartLattice {
    fn new(s: &ModelSpacetime, cfg: LatticeConfig, grid: usize) -> Result<Self> {
        let f = s.coefficient().expect("lattice model");
        let (t0, t1) = s.bounds[0];
        let (x0, x1) = s.bounds[1];
        let mut steps = cfg.time_steps.max(grid - 1);
        steps = steps.div_ceil(grid - 1) * (grid - 1);
        let ht = (t1 - t0) / steps as f64;
        let mut hs = ht * cfg.slope_resolution;
        let mut cells = ((x1 - x0) / hs).ceil() as i64;
        cells = (cells + grid as i64 - 2) / (grid as i64 - 1) * (grid as i64 - 1);
        hs = (x1 - x0) / cells as f64;
        let vmax = 1.0 / f.min_on(t0, t1);
        let m_max = ((vmax * ht / hs).floor() as i64).min(cells);
        let mut table = Vec::with_capacity(steps);
        for i in 0..steps {
            let s0 = t0 + i as f64 * ht;
            let amax = f.max_on(s0, s0 + ht);
            table.push(
                (-m_max..=m_max)
                    .map(|m| {
                        let v = m as f64 * hs / ht;
                        if amax * v.abs() > 1.0 + 1e-12 {
                            return f64::NEG_INFINITY;
                        }
                        GAUSS4
                            .iter()
                            .map(|(u, w)| {
                                let a = f.eval(s0 + u * ht);
                                w * (1.0 - a * a * v * v).max(0.0).sqrt()
                            })
                            .sum::<f64>()
                            * ht
                    })
                    .collect(),
            );
        }
        Ok(ChartLattice { steps, nodes: cells + 1, table, m_max })
    }

    fn sample_nodes(&self, grid: usize) -> Vec<(usize, i64)> {
        let ti = self.steps / (grid - 1);
        let xj = (self.nodes - 1) / (grid as i64 - 1);
        let mut out = Vec::new();
        for a in 0..grid {
            for b in 0..grid as i64 {
                out.push((a * ti, b * xj));
            }
        }
        out
    }

    fn longest_from(&self, i0: usize, j0: i64, targets: &[(usize, i64)]) -> f64 {
        let w = self.nodes as usize;
        let mut cur = vec![f64::NEG_INFINITY; w];
        cur[j0 as usize] = 0.0;
        let mut best: f64 = 0.0;
        for i in i0..self.steps {
            let mut next = vec![f64::NEG_INFINITY; w];
            let row = &self.table[i];
            for (jp, &v) in cur.iter().enumerate() {
                if v == f64::NEG_INFINITY {
                    continue;
                }
                let lo = (jp as i64 - self.m_max).max(0);
                let hi = (jp as i64 + self.m_max).min(self.nodes - 1);
                for j in lo..=hi {
                    let e = row[(j - jp as i64 + self.m_max) as usize];
                    if e == f64::NEG_INFINITY {
                        continue;
                    }
                    let c = v + e;
                    if c > next[j as usize] {
                        next[j as usize] = c;
                    }
                }
            }
            cur = next;
            for &(ti, tj) in targets {
                if ti == i + 1 && cur[tj as usize] > best {
                    best = cur[tj as usize];
                }
            }
        }
        best
    }
}
