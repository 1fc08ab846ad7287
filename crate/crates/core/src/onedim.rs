//! One-dimensional CD(κ, N) densities and diameter estimates.

use serde::{Deserialize, Serialize};

use crate::distortion::{pi_const, sin_const, GeneralizedSine, KappaProfile};
use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::numerics::{linspace, simpson_samples};

/// Default endpoint-grid size for line sampling.
pub const LINE_NODES: usize = 64;
/// The t-grid is k/T_STEPS for k = 0..=T_STEPS.
pub const T_STEPS: usize = 16;
/// Sample count used by [`model_density`]; every point probed by the
/// default line grid is a sample node.
pub const MODEL_SAMPLES: usize = (LINE_NODES - 1) * T_STEPS * 2 + 1;
pub const DEFAULT_C_CONST: f64 = 10.0;

/// A sampled nonnegative density on `[a, b]` together with (κ, N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct CdDensity {
    a: f64,
    b: f64,
    h: Vec<f64>,
    kappa: KappaProfile,
    n: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDensity {
    a: f64,
    b: f64,
    h: Vec<f64>,
    kappa: KappaProfile,
    #[serde(rename = "N")]
    n: f64,
}

impl TryFrom<RawDensity> for CdDensity {
    type Error = Error;
    fn try_from(r: RawDensity) -> Result<Self> {
        CdDensity::new(r.a, r.b, r.h, r.kappa, r.n)
    }
}

impl From<CdDensity> for RawDensity {
    fn from(d: CdDensity) -> Self {
        RawDensity { a: d.a, b: d.b, h: d.h, kappa: d.kappa, n: d.n }
    }
}

impl CdDensity {
    /// `h` holds equally spaced samples on `[a, b]`, endpoints included;
    /// `kappa` is parametrized by `x − a`.
    pub fn new(a: f64, b: f64, h: Vec<f64>, kappa: KappaProfile, n: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return invalid("interval must satisfy a < b");
        }
        if h.len() < 2 {
            return invalid("density needs at least two samples");
        }
        if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("density samples must be finite and nonnegative");
        }
        if (kappa.length() - (b - a)).abs() > 1e-9 * (b - a) {
            return invalid("kappa profile length must equal b - a");
        }
        if !(n > 1.0) {
            return invalid("N must exceed 1");
        }
        Ok(CdDensity { a, b, h, kappa, n })
    }

    /// Samples `f` at `samples` equally spaced nodes.
    pub fn from_fn(a: f64, b: f64, samples: usize, f: impl Fn(f64) -> f64, kappa: KappaProfile, n: f64) -> Result<Self> {
        let h = linspace(a, b, samples.max(2)).into_iter().map(f).collect();
        Self::new(a, b, h, kappa, n)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn samples(&self) -> &[f64] {
        &self.h
    }

    pub fn kappa(&self) -> &KappaProfile {
        &self.kappa
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.h.len() - 1) as f64
    }

    /// Linear interpolation of the samples.
    pub fn eval(&self, x: f64) -> f64 {
        let s = ((x - self.a) / self.spacing()).clamp(0.0, (self.h.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.h.len() - 2);
        let w = s - i as f64;
        if w < 1e-9 {
            return self.h[i];
        }
        if w > 1.0 - 1e-9 {
            return self.h[i + 1];
        }
        self.h[i] * (1.0 - w) + self.h[i + 1] * w
    }

    pub fn total_mass(&self) -> f64 {
        simpson_samples(&self.h, self.spacing())
    }

    /// The same density rescaled to unit mass.
    pub fn normalized(&self) -> Result<CdDensity> {
        let mass = self.total_mass();
        if !(mass > 0.0) {
            return invalid("density has zero mass");
        }
        let h = self.h.iter().map(|v| v / mass).collect();
        CdDensity::new(self.a, self.b, h, self.kappa.clone(), self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineWitness {
    pub x0: f64,
    pub x1: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdStatus {
    Checked,
    IdenticallyZero,
    /// Vanishes at an interior node without vanishing everywhere.
    InteriorZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdCheck {
    pub passed: bool,
    pub worst_violation: f64,
    pub witness: Option<LineWitness>,
    pub status: CdStatus,
}

struct LineResult {
    violation: f64,
    witness: LineWitness,
}

fn check_line(d: &CdDensity, x0: f64, x1: f64, shared: Option<&GeneralizedSine>) -> Result<LineResult> {
    let len = x1 - x0;
    let e = 1.0 / (d.n - 1.0);
    let scale = |p: KappaProfile| GeneralizedSine::new(&p.scaled(e));
    let (fwd, bwd);
    let (plus, minus) = match shared {
        Some(s) => (s, s),
        None => {
            fwd = scale(d.kappa.window(x0 - d.a, len, false)?);
            bwd = scale(d.kappa.window(x0 - d.a, len, true)?);
            (&fwd, &bwd)
        }
    };
    let h0 = ExtReal::Finite(d.eval(x0).powf(e));
    let h1 = ExtReal::Finite(d.eval(x1).powf(e));
    let mut worst = LineResult { violation: f64::NEG_INFINITY, witness: LineWitness { x0, x1, t: 0.0 } };
    for k in 0..=T_STEPS {
        let t = k as f64 / T_STEPS as f64;
        let lhs = d.eval(x0 + t * len).powf(e);
        let rhs = minus.sigma(1.0 - t, len).mul(h0).add(plus.sigma(t, len).mul(h1));
        let violation = match rhs {
            ExtReal::Finite(r) => r - lhs,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::NegInf => f64::NEG_INFINITY,
        };
        if violation > worst.violation {
            worst = LineResult { violation, witness: LineWitness { x0, x1, t } };
        }
    }
    Ok(worst)
}

/// Checks the CD(κ, N) inequality along every straight line between
/// `line_samples` equally spaced endpoint nodes at t = k/16.
pub fn verify_cd_density(d: &CdDensity, line_samples: usize, tolerance: f64) -> Result<CdCheck> {
    if line_samples < 10 {
        return invalid("line_samples must be at least 10");
    }
    let interior = &d.h[1..d.h.len() - 1];
    if d.h.iter().all(|&v| v == 0.0) {
        return Ok(CdCheck { passed: true, worst_violation: 0.0, witness: None, status: CdStatus::IdenticallyZero });
    }
    if interior.iter().any(|&v| v <= 0.0) {
        return Ok(CdCheck { passed: false, worst_violation: f64::INFINITY, witness: None, status: CdStatus::InteriorZero });
    }
    let shared = d
        .kappa
        .constant_value()
        .map(|k| GeneralizedSine::new(&KappaProfile::constant(d.b - d.a, k / (d.n - 1.0)).expect("valid length")));
    let nodes = linspace(d.a, d.b, line_samples);
    let lines: Vec<(usize, usize)> =
        (0..line_samples).flat_map(|i| (i + 1..line_samples).map(move |j| (i, j))).collect();
    let per_line = |&(i, j): &(usize, usize)| check_line(d, nodes[i], nodes[j], shared.as_ref());
    let results = crate::par::map_slice(&lines, per_line);

    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for r in results {
        let r = r?;
        if r.violation > worst {
            worst = r.violation;
            witness = Some(r.witness);
        }
    }
    let worst_violation = worst.max(0.0);
    Ok(CdCheck {
        passed: worst_violation <= tolerance,
        worst_violation,
        witness: if worst > 0.0 { witness } else { None },
        status: CdStatus::Checked,
    })
}

/// h(t) = sin_{K/(N−1)}(t)^{N−1} on `[0, length]` with κ ≡ K.
pub fn model_density(k: f64, n: f64, length: f64) -> Result<CdDensity> {
    if !(n > 1.0) {
        return invalid("N must exceed 1");
    }
    let kn = k / (n - 1.0);
    if !(length > 0.0) || ExtReal::Finite(length) >= pi_const(kn) {
        return invalid("length must lie in (0, pi_{K/(N-1)})");
    }
    let kappa = KappaProfile::constant(length, k)?;
    CdDensity::from_fn(0.0, length, MODEL_SAMPLES, |t| sin_const(kn, t).max(0.0).powf(n - 1.0), kappa, n)
}

/// ∫_I |(κ − K)_−|^p h by Simpson on a grid at least as fine as the samples.
pub fn integral_deficit(d: &CdDensity, k: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid("p must be at least 1");
    }
    let n = d.h.len().max(2049) | 1;
    let xs = linspace(d.a, d.b, n);
    let values: Vec<f64> = xs
        .iter()
        .map(|&x| (k - d.kappa.eval(x - d.a)).max(0.0).powf(p) * d.eval(x))
        .collect();
    Ok(simpson_samples(&values, (d.b - d.a) / (n - 1) as f64).max(0.0))
}

/// π√((N−1)/K)·(1 + c·deficit^{1/5}), valid under deficit ≤ 1/c.
pub fn aubry_diameter_bound(k: f64, n: f64, p: f64, deficit: f64, c_const: f64) -> Result<f64> {
    if !(k > 0.0) {
        return invalid("K must be positive");
    }
    if !(n > 1.0) || !(p > n / 2.0) {
        return invalid("need N > 1 and p > N/2");
    }
    if !(c_const > 0.0) || !(deficit >= 0.0) {
        return invalid("c_const must be positive and deficit nonnegative");
    }
    if deficit > 1.0 / c_const {
        return Err(Error::HypothesisViolated(format!(
            "deficit {deficit} exceeds 1/c_const = {}",
            1.0 / c_const
        )));
    }
    Ok(std::f64::consts::PI * ((n - 1.0) / k).sqrt() * (1.0 + c_const * deficit.powf(0.2)))
}

/// The explicit smallness threshold min{[ε√(K/(N−1))/(πc)]^5, 1/c}.
pub fn tmcp_delta(k: f64, n: f64, _p: f64, eps: f64, c_const: f64) -> Result<f64> {
    if !(k > 0.0 && n > 1.0 && eps > 0.0 && c_const > 0.0) {
        return invalid("need K > 0, N > 1, eps > 0 and c_const > 0");
    }
    let first = (eps * (k / (n - 1.0)).sqrt() / (std::f64::consts::PI * c_const)).powi(5);
    Ok(first.min(1.0 / c_const))
}

/// sup over regions W of (1/m[W]) ∫_W |(k − K)_−|^p dm. Each region is a
/// vector of nonnegative measure weights aligned with `k`.
pub fn curvature_deficit_sup(k: &[f64], big_k: f64, p: f64, regions: &[Vec<f64>]) -> Result<f64> {
    if regions.is_empty() {
        return invalid("no regions given");
    }
    let mut sup: f64 = 0.0;
    for w in regions {
        if w.len() != k.len() {
            return invalid("region weights must align with the sampled function");
        }
        let mass: f64 = w.iter().sum();
        if !(mass > 0.0) {
            return invalid("region has zero measure");
        }
        let integral: f64 = k
            .iter()
            .zip(w)
            .map(|(&kv, &wv)| wv * (big_k - kv).max(0.0).powf(p))
            .sum();
        sup = sup.max(integral / mass);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterParams {
    pub k: f64,
    pub n: f64,
    pub p: f64,
    pub c_const: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub diameter: f64,
    pub bound: f64,
    pub deficit: f64,
    pub passed: bool,
    pub params: DiameterParams,
}

/// Diameter of the support interval against the deficit bound, with the
/// density normalized to unit mass first.
pub fn diameter_report(d: &CdDensity, k: f64, p: f64, c_const: f64, tolerance: f64) -> Result<DiameterReport> {
    let prob = d.normalized()?;
    let deficit = integral_deficit(&prob, k, p)?;
    let bound = aubry_diameter_bound(k, d.n, p, deficit, c_const)?;
    let diameter = d.b - d.a;
    Ok(DiameterReport {
        diameter,
        bound,
        deficit,
        passed: diameter <= bound + tolerance,
        params: DiameterParams { k, n: d.n, p, c_const },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(len: f64) -> KappaProfile {
        KappaProfile::constant(len, 0.0).unwrap()
    }

    #[test]
    fn constant_density_is_cd() {
        let d = CdDensity::from_fn(0.0, 1.0, 101, |_| 1.0, flat(1.0), 2.0).unwrap();
        let r = verify_cd_density(&d, 64, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn convex_density_fails() {
        let d = CdDensity::from_fn(0.1, 1.0, 1009, |x| x * x, flat(0.9), 2.0).unwrap();
        let r = verify_cd_density(&d, 64, 1e-6).unwrap();
        assert!(!r.passed && r.worst_violation > 1e-3);
        assert!(r.witness.is_some());
    }

    #[test]
    fn negative_samples_rejected() {
        assert!(CdDensity::new(0.0, 1.0, vec![1.0, -0.1], flat(1.0), 2.0).is_err());
    }

    #[test]
    fn model_density_shapes() {
        let d = model_density(0.0, 3.0, 2.0).unwrap();
        assert!((d.eval(1.5) - 2.25).abs() < 1e-12);
        let d = model_density(1.0, 2.0, 3.0).unwrap();
        assert!((d.eval(1.0) - 1.0f64.sin()).abs() < 1e-6);
        assert!(model_density(1.0, 2.0, PI).is_err());
    }

    #[test]
    fn deficits() {
        let d = CdDensity::from_fn(0.0, 1.0, 11, |_| 1.0, KappaProfile::constant(1.0, -1.0).unwrap(), 2.0).unwrap();
        assert!((integral_deficit(&d, 0.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(integral_deficit(&d, -1.0, 2.0).unwrap(), 0.0);
        let slope = KappaProfile::new(1.0, vec![(0.0, 0.0), (1.0, -1.0)]).unwrap();
        let d = CdDensity::from_fn(0.0, 1.0, 11, |_| 1.0, slope, 2.0).unwrap();
        assert!((integral_deficit(&d, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aubry_bounds() {
        assert!((aubry_diameter_bound(1.0, 2.0, 2.0, 0.0, 10.0).unwrap() - PI).abs() < 1e-15);
        assert!((aubry_diameter_bound(4.0, 5.0, 3.0, 0.0, 10.0).unwrap() - PI).abs() < 1e-15);
        let v = aubry_diameter_bound(1.0, 2.0, 2.0, 1e-5, 2.0).unwrap();
        assert!((v - PI * 1.2).abs() < 1e-12, "{v}");
        assert!(matches!(aubry_diameter_bound(1.0, 2.0, 2.0, 0.6, 2.0), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn delta_values() {
        assert_eq!(tmcp_delta(1.0, 2.0, 2.0, PI, 1.0).unwrap(), 1.0);
        let v = tmcp_delta(1.0, 2.0, 2.0, 0.1, 2.0).unwrap();
        assert!((v - (0.1 / (2.0 * PI)).powi(5)).abs() < 1e-22);
        assert!((v - 1.0211e-9).abs() < 1e-12);
    }

    #[test]
    fn deficit_sup() {
        let k = vec![-1.0; 4];
        assert_eq!(curvature_deficit_sup(&k, 0.0, 3.0, &[vec![1.0; 4]]).unwrap(), 1.0);
        assert_eq!(curvature_deficit_sup(&k, -2.0, 3.0, &[vec![1.0; 4]]).unwrap(), 0.0);
        assert!(curvature_deficit_sup(&k, 0.0, 1.0, &[]).is_err());
        let k = vec![-0.2, -0.7];
        let v = curvature_deficit_sup(&k, 0.0, 1.0, &[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let d = model_density(1.0, 2.0, 1.0).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"N\":2.0"));
        let back: CdDensity = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
