//! Generalized sine functions and the σ/τ distortion coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::numerics::simpson;

/// Number of fixed RK4 steps across the profile domain.
pub const ODE_STEPS: usize = 4096;
const BISECTION_TOL: f64 = 1e-10;
const DEFECT_PANELS: usize = 512;

/// A continuous curvature function on `[0, L]`, linear between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct KappaProfile {
    length: f64,
    thetas: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    #[serde(rename = "L")]
    length: f64,
    samples: Vec<(f64, f64)>,
}

impl TryFrom<RawProfile> for KappaProfile {
    type Error = Error;
    fn try_from(raw: RawProfile) -> Result<Self> {
        KappaProfile::new(raw.length, raw.samples)
    }
}

impl From<KappaProfile> for RawProfile {
    fn from(p: KappaProfile) -> Self {
        RawProfile {
            length: p.length,
            samples: p.thetas.into_iter().zip(p.values).collect(),
        }
    }
}

impl KappaProfile {
    pub fn new(length: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return invalid("profile length must be positive and finite");
        }
        if samples.len() < 2 {
            return invalid("profile needs at least two samples");
        }
        if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return invalid("non-finite kappa sample");
        }
        if samples[0].0 != 0.0 || (samples[samples.len() - 1].0 - length).abs() > 1e-12 * length {
            return invalid("samples must start at 0 and end at L");
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return invalid("sample parameters must be strictly increasing");
        }
        let (mut thetas, values): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        *thetas.last_mut().unwrap() = length;
        Ok(KappaProfile { length, thetas, values })
    }

    pub fn constant(length: f64, kappa: f64) -> Result<Self> {
        Self::new(length, vec![(0.0, kappa), (length, kappa)])
    }

    /// Samples `f` at `n` equally spaced parameters.
    pub fn from_fn(length: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = n.max(2);
        let samples = crate::numerics::linspace(0.0, length, n)
            .into_iter()
            .map(|s| (s, f(s)))
            .collect();
        Self::new(length, samples)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thetas.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at `theta`, clamped to the domain.
    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        if self.values.len() == 2 {
            let w = (theta / self.length).clamp(0.0, 1.0);
            return self.values[0] + w * (self.values[1] - self.values[0]);
        }
        crate::numerics::interp(&self.thetas, &self.values, theta)
    }

    pub fn scaled(&self, factor: f64) -> KappaProfile {
        KappaProfile {
            length: self.length,
            thetas: self.thetas.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn shifted(&self, delta: f64) -> KappaProfile {
        KappaProfile {
            length: self.length,
            thetas: self.thetas.clone(),
            values: self.values.iter().map(|v| v + delta).collect(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first).then_some(first)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The profile seen along `[start, start + len]`, optionally run backwards.
    /// Breakpoints inside the window are kept, so the result is exact.
    pub fn window(&self, start: f64, len: f64, reversed: bool) -> Result<KappaProfile> {
        let end = start + len;
        if start < -1e-12 || end > self.length * (1.0 + 1e-12) || len <= 0.0 {
            return invalid("window outside the profile domain");
        }
        let mut pts = vec![start];
        pts.extend(self.thetas.iter().copied().filter(|&s| s > start && s < end));
        pts.push(end);
        let mut samples: Vec<(f64, f64)> = pts.iter().map(|&s| (s - start, self.eval(s))).collect();
        if reversed {
            samples = samples.iter().rev().map(|&(s, v)| (len - s, v)).collect();
        }
        samples[0].0 = 0.0;
        samples.dedup_by(|b, a| b.0 <= a.0);
        let last = samples.len() - 1;
        samples[last].0 = len;
        KappaProfile::new(len, samples)
    }
}

/// Solution of u'' + κu = 0, u(0) = 0, u'(0) = 1, sampled at the RK4 nodes.
#[derive(Debug, Clone)]
pub struct GeneralizedSine {
    profile: KappaProfile,
    step: f64,
    values: Vec<f64>,
    derivative_values: Vec<f64>,
    first_zero: ExtReal,
}

#[inline]
fn rk4_step(profile: &KappaProfile, s: f64, u: f64, v: f64, h: f64) -> (f64, f64) {
    let k0 = profile.eval(s);
    let km = profile.eval(s + 0.5 * h);
    let k1 = profile.eval(s + h);
    let (a1, b1) = (v, -k0 * u);
    let (a2, b2) = (v + 0.5 * h * b1, -km * (u + 0.5 * h * a1));
    let (a3, b3) = (v + 0.5 * h * b2, -km * (u + 0.5 * h * a2));
    let (a4, b4) = (v + h * b3, -k1 * (u + h * a3));
    (
        u + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        v + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
}

impl GeneralizedSine {
    pub fn new(profile: &KappaProfile) -> Self {
        let step = profile.length / ODE_STEPS as f64;
        let mut values = Vec::with_capacity(ODE_STEPS + 1);
        let mut derivative_values = Vec::with_capacity(ODE_STEPS + 1);
        let (mut u, mut v) = (0.0, 1.0);
        values.push(u);
        derivative_values.push(v);
        for i in 0..ODE_STEPS {
            (u, v) = rk4_step(profile, i as f64 * step, u, v, step);
            values.push(u);
            derivative_values.push(v);
        }
        let mut sine = GeneralizedSine {
            profile: profile.clone(),
            step,
            values,
            derivative_values,
            first_zero: ExtReal::PosInf,
        };
        sine.first_zero = sine.locate_zero();
        sine
    }

    fn locate_zero(&self) -> ExtReal {
        let Some(i) = (1..=ODE_STEPS).find(|&i| self.values[i] <= 0.0) else {
            return ExtReal::PosInf;
        };
        if self.values[i] == 0.0 {
            return ExtReal::Finite(i as f64 * self.step);
        }
        let (mut lo, mut hi) = ((i - 1) as f64 * self.step, i as f64 * self.step);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ExtReal::Finite(0.5 * (lo + hi))
    }

    pub fn profile(&self) -> &KappaProfile {
        &self.profile
    }

    pub fn first_zero(&self) -> ExtReal {
        self.first_zero
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_derivatives(&self) -> &[f64] {
        &self.derivative_values
    }

    /// u(θ) by a partial RK4 step from the nearest node below θ.
    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_with_derivative(theta).0
    }

    pub fn eval_with_derivative(&self, theta: f64) -> (f64, f64) {
        let theta = theta.clamp(0.0, self.profile.length);
        let i = ((theta / self.step) as usize).min(ODE_STEPS);
        let s = i as f64 * self.step;
        let h = theta - s;
        if h <= 0.0 {
            return (self.values[i], self.derivative_values[i]);
        }
        rk4_step(&self.profile, s, self.values[i], self.derivative_values[i], h)
    }

    /// σ^{(t)}(θ) for this sine's curvature.
    pub fn sigma(&self, t: f64, theta: f64) -> ExtReal {
        if theta == 0.0 {
            return ExtReal::Finite(t);
        }
        if ExtReal::Finite(theta + BISECTION_TOL) >= self.first_zero {
            return ExtReal::PosInf;
        }
        let den = self.eval(theta);
        if den <= 0.0 {
            return ExtReal::PosInf;
        }
        ExtReal::Finite(self.eval(t * theta) / den)
    }
}

fn check_unit(t: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("{name} must lie in [0, 1], got {t}"));
    }
    Ok(())
}

fn check_theta(profile: &KappaProfile, theta: f64) -> Result<()> {
    if !(theta >= 0.0 && theta <= profile.length * (1.0 + 1e-12)) {
        return invalid(format!("theta {theta} outside [0, {}]", profile.length));
    }
    Ok(())
}

pub fn generalized_sine(profile: &KappaProfile) -> GeneralizedSine {
    GeneralizedSine::new(profile)
}

pub fn first_zero(profile: &KappaProfile) -> ExtReal {
    GeneralizedSine::new(profile).first_zero()
}

pub fn sigma_coeff(profile: &KappaProfile, t: f64, theta: f64) -> Result<ExtReal> {
    check_unit(t, "t")?;
    check_theta(profile, theta)?;
    Ok(GeneralizedSine::new(profile).sigma(t, theta))
}

pub fn tau_coeff(profile: &KappaProfile, n: f64, t: f64, theta: f64) -> Result<ExtReal> {
    check_unit(t, "t")?;
    check_theta(profile, theta)?;
    Ok(TauCoefficients::new(profile, n)?.tau(t, theta))
}

/// Cached τ_{κ,N} evaluator: one ODE solve for κ/(N−1), many (t, θ) queries.
#[derive(Debug, Clone)]
pub struct TauCoefficients {
    n: f64,
    sine: GeneralizedSine,
}

impl TauCoefficients {
    pub fn new(profile: &KappaProfile, n: f64) -> Result<Self> {
        if !(n > 1.0) {
            return invalid("dimension parameter N must exceed 1");
        }
        Ok(TauCoefficients {
            n,
            sine: GeneralizedSine::new(&profile.scaled(1.0 / (n - 1.0))),
        })
    }

    pub fn sine(&self) -> &GeneralizedSine {
        &self.sine
    }

    pub fn tau(&self, t: f64, theta: f64) -> ExtReal {
        let sigma = self.sine.sigma(t, theta);
        ExtReal::Finite(t.powf(1.0 / self.n)).mul(sigma.powf(1.0 - 1.0 / self.n))
    }
}

/// sin_k for a constant k.
pub fn sin_const(k: f64, theta: f64) -> f64 {
    if k > 0.0 {
        let r = k.sqrt();
        (r * theta).sin() / r
    } else if k < 0.0 {
        let r = (-k).sqrt();
        (r * theta).sinh() / r
    } else {
        theta
    }
}

/// π_k for a constant k.
pub fn pi_const(k: f64) -> ExtReal {
    if k > 0.0 {
        ExtReal::Finite(std::f64::consts::PI / k.sqrt())
    } else {
        ExtReal::PosInf
    }
}

/// σ_k^{(t)}(θ) for a constant k.
pub fn sigma_const(k: f64, t: f64, theta: f64) -> ExtReal {
    if theta == 0.0 {
        return ExtReal::Finite(t);
    }
    if ExtReal::Finite(theta) >= pi_const(k) {
        return ExtReal::PosInf;
    }
    ExtReal::Finite(sin_const(k, t * theta) / sin_const(k, theta))
}

/// τ_{K,N}^{(t)}(θ) for a constant K.
pub fn tau_const(k: f64, n: f64, t: f64, theta: f64) -> ExtReal {
    let sigma = sigma_const(k / (n - 1.0), t, theta);
    ExtReal::Finite(t.powf(1.0 / n)).mul(sigma.powf(1.0 - 1.0 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectParams {
    pub k: f64,
    pub n: f64,
    pub p: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectConstants {
    pub c_np: f64,
    /// Only defined for K > 0.
    pub d_const: Option<f64>,
    pub omega: f64,
    pub lambda: f64,
    pub params: DefectParams,
}

pub fn defect_constants(k: f64, n: f64, p: f64, eta: f64) -> Result<DefectConstants> {
    if !(n >= 2.0 && n.is_finite()) {
        return invalid("N must be finite and at least 2");
    }
    if !(p > n / 2.0 && p.is_finite()) {
        return invalid("p must exceed N/2");
    }
    let kn = k / (n - 1.0);
    if !(eta > 0.0) || ExtReal::Finite(2.0 * eta) >= pi_const(kn) {
        return invalid("eta must lie in (0, pi_{K/(N-1)}/2)");
    }
    let c_np = (2.0 * p - 1.0).powf(p) * ((n - 1.0) / (2.0 * p - n)).powf(p - 1.0);
    let (d_const, omega, lambda) = if k > 0.0 {
        let pi = std::f64::consts::PI / kn.sqrt();
        let (lo, hi) = (pi / 2.0, pi - eta);
        let grid = 4096;
        let max = (0..=grid)
            .map(|i| sin_const(kn, lo + (hi - lo) * i as f64 / grid as f64).powf(1.0 - n))
            .fold(f64::NEG_INFINITY, f64::max);
        let d = 1.0 + max;
        let omega = c_np.max(sin_const(kn, eta).powf(n + 1.0 - 4.0 * p));
        (Some(d), omega, d)
    } else {
        (None, c_np, 1.0)
    };
    Ok(DefectConstants {
        c_np,
        d_const,
        omega,
        lambda,
        params: DefectParams { k, n, p, eta },
    })
}

/// Right-hand side of the distortion defect estimate.
pub fn defect_bound(
    k: f64,
    n: f64,
    p: f64,
    eta: f64,
    profile: &KappaProfile,
    t: f64,
    theta: f64,
) -> Result<f64> {
    let consts = defect_constants(k, n, p, eta)?;
    if !(t > 0.0 && t < 1.0) {
        return invalid("t must lie in (0, 1)");
    }
    let upper = ExtReal::Finite(profile.length()).min_ext(pi_const(k / (n - 1.0)).add(ExtReal::Finite(-eta)));
    if !(theta > 0.0) || ExtReal::Finite(theta) >= upper {
        return invalid("theta outside (0, min{L, pi_{K/(N-1)} - eta})");
    }
    let taus = TauCoefficients::new(profile, n)?;
    let sine = taus.sine();
    let prefactor = (consts.lambda * consts.omega.powf(1.0 / (2.0 * p - 1.0))).powf(1.0 / n);

    let tau_pow = |r: f64| taus.tau(r, theta).powf(n).to_f64();
    let first = simpson(tau_pow, t, 1.0, DEFECT_PANELS);
    if !first.is_finite() {
        return Ok(f64::INFINITY);
    }
    let deficit = |r: f64| {
        let neg = (k - profile.eval(r * theta)).max(0.0);
        if neg == 0.0 {
            return 0.0;
        }
        neg * sine.sigma(r, theta).powf(n - 1.0).to_f64()
    };
    let second = simpson(deficit, 0.0, 1.0, DEFECT_PANELS);
    let bound = prefactor
        * first.max(0.0).powf(2.0 * (p - 1.0) / (n * (2.0 * p - 1.0)))
        * (t * theta.powf(2.0 * p) * second.max(0.0)).powf(1.0 / (n * (2.0 * p - 1.0)));
    Ok(bound)
}

impl ExtReal {
    pub(crate) fn min_ext(self, other: ExtReal) -> ExtReal {
        if self <= other {
            self
        } else {
            other
        }
    }
}
