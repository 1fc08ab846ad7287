//! First-order checks on the time separation l_o: eikonal equation,
//! Brenier–McCann gradient identity, and the weak d'Alembert comparison.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{row, InequalityReport};
use crate::distortion::pi_const;
use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::models::{Event, ModelSpacetime};
use crate::transport::{dynamical_coupling, lq_distance, DiscreteMeasure};

/// Tensor-product bump Π_k b((p_k − c_k)/r_k), b(s) = exp(−1/(1 − s²)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

fn b(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let u = 1.0 - s * s;
    let v = (-1.0 / u).exp();
    (v, v * (-2.0 * s / (u * u)))
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: Vec<f64>) -> Result<Self> {
        if center.len() != radius.len() || radius.iter().any(|r| !(*r > 0.0)) {
            return invalid("bump needs one positive radius per axis");
        }
        Ok(Bump { center, radius })
    }

    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().zip(&self.radius).map(|(c, r)| c - r).collect();
        let hi = self.center.iter().zip(&self.radius).map(|(c, r)| c + r).collect();
        (lo, hi)
    }

    pub fn eval(&self, p: &Event) -> f64 {
        self.eval_with_gradient(p).0
    }

    pub fn eval_with_gradient(&self, p: &Event) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, f64)> =
            (0..self.center.len()).map(|k| b((p.0[k] - self.center[k]) / self.radius[k])).collect();
        let value: f64 = parts.iter().map(|x| x.0).product();
        let grad = (0..parts.len())
            .map(|k| {
                let others: f64 = parts.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x.0).product();
                parts[k].1 / self.radius[k] * others
            })
            .collect();
        (value, grad)
    }
}

/// τ̃_{K,N}(θ), the mean-curvature coefficient of the model comparison.
pub fn tau_tilde(k: f64, n: f64, theta: f64) -> f64 {
    if k == 0.0 || theta == 0.0 {
        return 1.0;
    }
    let scale = (k.abs() / (n - 1.0)).sqrt();
    let x = theta * scale;
    let trig = if k > 0.0 { x.tan().recip() } else { x.tanh().recip() };
    1.0 / n + theta / n * (k.abs() * (n - 1.0)).sqrt() * trig
}

fn separation(s: &ModelSpacetime, o: &Event, p: &Event) -> Result<f64> {
    match s.time_separation(o, p)? {
        ExtReal::Finite(v) if v > 0.0 => Ok(v),
        _ => invalid(format!("{:?} is not in the chronological future of o", p.0)),
    }
}

/// Finite-difference stencil for gradients of l_o.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// First order, one step up each axis.
    #[default]
    Forward,
    /// Second order. On flat charts the central quotients of l_o satisfy the
    /// eikonal equation to rounding, so no convergence rate is observable.
    Central,
}

/// Gradient (lower indices) of f ∘ l_o at `p`.
fn fd_gradient_with(
    s: &ModelSpacetime,
    o: &Event,
    p: &Event,
    h: f64,
    stencil: Stencil,
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let at_p = match stencil {
        Stencil::Forward => f(separation(s, o, p)?),
        Stencil::Central => 0.0,
    };
    (0..p.dim())
        .map(|k| {
            let mut a = p.clone();
            a.0[k] += h;
            let up = f(separation(s, o, &a)?);
            match stencil {
                Stencil::Forward => Ok((up - at_p) / h),
                Stencil::Central => {
                    let mut c = p.clone();
                    c.0[k] -= h;
                    Ok((up - f(separation(s, o, &c)?)) / (2.0 * h))
                }
            }
        })
        .collect()
}

fn fd_gradient(s: &ModelSpacetime, o: &Event, p: &Event, h: f64, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    fd_gradient_with(s, o, p, h, Stencil::Central, f)
}

fn norm_sq(s: &ModelSpacetime, p: &Event, grad: &[f64]) -> f64 {
    s.metric_diag(p).iter().zip(grad).map(|(g, d)| d * d / g).sum()
}

fn box_nodes(lo: &[f64], hi: &[f64], h: f64) -> Vec<Event> {
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(a, b)| ((b - a) / h).round() as usize + 1).collect();
    let total: usize = counts.iter().product();
    (0..total)
        .map(|c| {
            let mut idx = c;
            let mut p = vec![0.0; lo.len()];
            for k in (0..lo.len()).rev() {
                p[k] = lo[k] + (idx % counts[k]) as f64 * h;
                idx /= counts[k];
            }
            Event(p)
        })
        .collect()
}

/// max |g(∇l_o, ∇l_o) − 1| over the nodes of the box with spacing `h`,
/// asserted against 5h. Also records the fraction of nodes where the raised
/// gradient points to the future.
pub fn eikonal_check(
    s: &ModelSpacetime,
    o: &Event,
    lo: &[f64],
    hi: &[f64],
    h: f64,
    stencil: Stencil,
) -> Result<InequalityReport> {
    if lo.len() != s.dim() || hi.len() != s.dim() || !(h > 0.0) {
        return invalid("box must match the dimension and h must be positive");
    }
    let nodes = box_nodes(lo, hi, h);
    let mut worst: f64 = 0.0;
    let mut future = 0usize;
    for p in &nodes {
        let grad = fd_gradient_with(s, o, p, h, stencil, |l| l)?;
        worst = worst.max((norm_sq(s, p, &grad) - 1.0).abs());
        if grad[0] / s.metric_diag(p)[0] > 0.0 {
            future += 1;
        }
    }
    Ok(InequalityReport::new(
        "eikonal",
        vec![row("max_deviation", worst, 5.0 * h, 5.0 * h - worst)],
        0.0,
        json!({"h": h, "nodes": nodes.len(), "lo": lo, "hi": hi, "stencil": stencil}),
    )
    .with_diagnostic("max_deviation", worst)
    .with_diagnostic("future_directed_fraction", future as f64 / nodes.len() as f64))
}

/// |∇(l_o^q/q)|(γ_1) against l(γ_0, γ_1)^{q−1} at every endpoint of the
/// dynamical coupling from δ_o to μ1; asserted against 10h.
pub fn brenier_mccann_check(
    s: &ModelSpacetime,
    o: &Event,
    mu1: &DiscreteMeasure,
    q: f64,
    h: f64,
    stencil: Stencil,
) -> Result<InequalityReport> {
    if !(q > 0.0 && q < 1.0) || !(h > 0.0) {
        return invalid("need q in (0, 1) and h > 0");
    }
    let mu0 = DiscreteMeasure::dirac(o.clone());
    let out = lq_distance(s, &mu0, mu1, q)?;
    let plan = out.plan.ok_or_else(|| Error::InvalidInput("μ1 is not in the causal future of o".into()))?;
    let dc = dynamical_coupling(s, &mu0, mu1, &plan, 2)?;
    let mut rows = Vec::with_capacity(dc.curves.len());
    let mut worst: f64 = 0.0;
    for c in &dc.curves {
        let end = c.path.point_at(1.0);
        let grad = fd_gradient_with(s, o, &end, h, stencil, |l| l.powf(q) / q)?;
        let norm = norm_sq(s, &end, &grad).max(0.0).sqrt();
        let target = separation(s, &c.path.point_at(0.0), &end)?.powf(q - 1.0);
        let dev = (norm - target).abs();
        worst = worst.max(dev);
        rows.push(row(format!("y={:?}", end.0), norm, target, 10.0 * h - dev));
    }
    Ok(InequalityReport::new("brenier_mccann", rows, 0.0, json!({"q": q, "h": h, "endpoints": mu1.len(), "stencil": stencil}))
        .with_diagnostic("max_deviation", worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum DalembertVariant {
    /// −∫ dφ(∇l_o) dm ≤ ∫ φ (N τ̃ ∘ l_o − 1)/l_o dm.
    Distance,
    /// −∫ dφ(∇f)|∇f|^{q′−2} dm ≤ ∫ φ N τ̃ ∘ l_o dm with f = l_o^q/q and q′
    /// the conjugate exponent.
    Power { q: f64 },
}

/// Weak d'Alembert comparison against a bump test function, by nodal
/// quadrature with spacing `h` over the bump's support box.
#[allow(clippy::too_many_arguments)]
pub fn dalembert_check(
    s: &ModelSpacetime,
    o: &Event,
    phi: &Bump,
    k: f64,
    n: f64,
    variant: DalembertVariant,
    h: f64,
    tolerance: f64,
) -> Result<InequalityReport> {
    if phi.center.len() != s.dim() || !(h > 0.0) || !(n > 1.0) {
        return invalid("bump must match the dimension, h > 0 and N > 1");
    }
    if let DalembertVariant::Power { q } = variant {
        if !(q > 0.0 && q < 1.0) {
            return invalid("q must lie in (0, 1)");
        }
    }
    let (lo, hi) = phi.support_box();
    let d = s.dim();
    let limit = pi_const(k / (n - 1.0));
    for mask in 0..(1usize << d) {
        let corner = Event((0..d).map(|a| if mask >> a & 1 == 1 { hi[a] } else { lo[a] }).collect());
        let grown = Event(corner.0.iter().zip(&phi.center).map(|(c, m)| c + (c - m) * 1e-6 + (c - m).signum() * h).collect());
        if !s.in_chart(&grown) {
            return invalid("test function support touches the chart boundary");
        }
        match s.time_separation(o, &grown)? {
            ExtReal::Finite(l) if l > 0.0 && ExtReal::Finite(l) < limit => {}
            _ => return invalid("test function support leaves I⁺(o) ∩ {l_o < π_{K/(N−1)}}"),
        }
    }
    let nodes = box_nodes(&lo, &hi, h);
    let cell = h.powi(d as i32);
    let (mut lhs, mut rhs, mut mass) = (0.0, 0.0, 0.0);
    for p in &nodes {
        let (value, dphi) = phi.eval_with_gradient(p);
        if value == 0.0 && dphi.iter().all(|x| *x == 0.0) {
            continue;
        }
        let dm = s.density(p) * cell;
        let l = separation(s, o, p)?;
        let g = s.metric_diag(p);
        let (grad, factor) = match variant {
            DalembertVariant::Distance => (fd_gradient(s, o, p, h, |x| x)?, 1.0),
            DalembertVariant::Power { q } => {
                let grad = fd_gradient(s, o, p, h, |x| x.powf(q) / q)?;
                let qd = q / (q - 1.0);
                (grad.clone(), norm_sq(s, p, &grad).max(0.0).sqrt().powf(qd - 2.0))
            }
        };
        let pairing: f64 = (0..d).map(|a| dphi[a] * grad[a] / g[a]).sum();
        lhs -= pairing * factor * dm;
        let tt = tau_tilde(k, n, l);
        rhs += value
            * dm
            * match variant {
                DalembertVariant::Distance => (n * tt - 1.0) / l,
                DalembertVariant::Power { .. } => n * tt,
            };
        mass += value * dm;
    }
    Ok(InequalityReport::new(
        "dalembert",
        vec![row("weak", lhs, rhs, rhs - lhs)],
        tolerance,
        json!({"K": k, "N": n, "variant": variant, "h": h, "bump": phi}),
    )
    .with_diagnostic("phi_mass", mass))
}
