//! Discrete ℓ_q optimal transport between finitely supported measures on a
//! model spacetime, dynamical couplings and Rényi entropy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::models::{Event, Maximizer, ModelSpacetime};
use crate::par::map_indices;

pub const WEIGHT_TOLERANCE: f64 = 1e-12;
pub const MARGINAL_TOLERANCE: f64 = 1e-10;
/// Coincident push-forward points closer than this are merged.
pub const MERGE_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    support: Vec<Event>,
    weights: Vec<f64>,
    reference_density: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    support: Vec<Event>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_density: Option<Vec<f64>>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(r.support, r.weights, r.reference_density)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure { support: m.support, weights: m.weights, reference_density: m.reference_density }
    }
}

impl DiscreteMeasure {
    pub fn new(support: Vec<Event>, weights: Vec<f64>, reference_density: Option<Vec<f64>>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return invalid("support and weights must be nonempty and of equal length");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE * support.len().max(1) as f64 {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        if let Some(rho) = &reference_density {
            if rho.len() != support.len() || rho.iter().any(|r| !(*r >= 0.0)) {
                return invalid("reference density must be nonnegative with one value per support point");
            }
        }
        let d = support[0].dim();
        if support.iter().any(|p| p.dim() != d) {
            return invalid("support points have mixed dimensions");
        }
        for i in 0..support.len() {
            for j in 0..i {
                if support[i] == support[j] {
                    return invalid("support points must be distinct");
                }
            }
        }
        Ok(DiscreteMeasure { support, weights, reference_density })
    }

    pub fn dirac(p: Event) -> Self {
        DiscreteMeasure { support: vec![p], weights: vec![1.0], reference_density: None }
    }

    /// Equal weights on the given points.
    pub fn uniform_points(points: Vec<Event>) -> Result<Self> {
        let n = points.len() as f64;
        let w = vec![1.0 / n; points.len()];
        Self::new(points, w, None)
    }

    /// The normalized reference measure restricted to a box, discretized on
    /// `per_axis` cells per axis (support at cell centres).
    pub fn uniform_on_box(s: &ModelSpacetime, lo: &[f64], hi: &[f64], per_axis: usize) -> Result<UniformBox> {
        let d = s.dim();
        if lo.len() != d || hi.len() != d || lo.iter().zip(hi).any(|(a, b)| !(a < b)) || per_axis == 0 {
            return invalid("box needs lo < hi on every axis and a positive resolution");
        }
        let grid = IndexGrid {
            shape: vec![per_axis; d],
            spacing: lo.iter().zip(hi).map(|(a, b)| (b - a) / per_axis as f64).collect(),
        };
        let n = per_axis.pow(d as u32);
        let mut support = Vec::with_capacity(n);
        let mut masses = Vec::with_capacity(n);
        let vol: f64 = grid.spacing.iter().product();
        for c in 0..n {
            let mi = grid.multi_index(c);
            let p = Event((0..d).map(|k| lo[k] + (mi[k] as f64 + 0.5) * grid.spacing[k]).collect());
            if !s.in_chart(&p) {
                return invalid("box leaves the chart");
            }
            masses.push(s.density(&p) * vol);
            support.push(p);
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return invalid("box has zero reference measure");
        }
        let weights: Vec<f64> = renormalize(masses.iter().map(|m| m / total).collect());
        let measure = DiscreteMeasure::new(support, weights, Some(vec![1.0 / total; n]))?;
        Ok(UniformBox { measure, cell_masses: masses, grid })
    }

    /// Equal weight 1/n on each cell of the box, i.e. density 1/(n·m_i)
    /// against the reference cells. Optimal plans between two such measures
    /// of equal size are permutations.
    pub fn equal_cells_on_box(s: &ModelSpacetime, lo: &[f64], hi: &[f64], per_axis: usize) -> Result<UniformBox> {
        let mut b = Self::uniform_on_box(s, lo, hi, per_axis)?;
        let n = b.cell_masses.len();
        let density = b.cell_masses.iter().map(|m| 1.0 / (n as f64 * m)).collect();
        b.measure = DiscreteMeasure::new(b.measure.support.clone(), vec![1.0 / n as f64; n], Some(density))?;
        Ok(b)
    }

    pub fn support(&self) -> &[Event] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reference_density(&self) -> Option<&[f64]> {
        self.reference_density.as_deref()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Flips the time coordinate of every support point.
    pub fn time_reversed(&self) -> DiscreteMeasure {
        let support = self
            .support
            .iter()
            .map(|p| {
                let mut c = p.0.clone();
                c[0] = -c[0];
                Event(c)
            })
            .collect();
        DiscreteMeasure { support, ..self.clone() }
    }
}

fn renormalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Row-major layout of a support laid out on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexGrid {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
}

impl IndexGrid {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            out[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        out
    }

    fn flat(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    pub measure: DiscreteMeasure,
    /// Reference mass of each cell (density at the centre × cell volume).
    pub cell_masses: Vec<f64>,
    pub grid: IndexGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub matrix: Vec<Vec<f64>>,
    pub causal: bool,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let m = self.matrix.first().map_or(0, |r| r.len());
        (0..m).map(|j| self.matrix.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let r = self.row_sums().iter().zip(mu.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let c = self.col_sums().iter().zip(nu.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.max(c)
    }

    pub fn positive_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.matrix
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, &v)| v > 0.0).map(move |(j, &v)| (i, j, v)))
    }
}

/// Dual certificate for the maximization: u_i + v_j ≥ c_ij on allowed
/// cells, with equality where the plan is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub max_dual_violation: f64,
    pub max_slackness_violation: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqOutcome {
    /// (max Σ l^q π)^{1/q}, −∞ if no causal coupling exists.
    pub value: ExtReal,
    /// The maximal Σ l^q π itself.
    pub objective: ExtReal,
    pub plan: Option<Coupling>,
    pub certificate: Option<OptimalityCertificate>,
}

/// Time separations between supports, row-major.
pub fn separation_matrix(s: &ModelSpacetime, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Vec<Vec<ExtReal>>> {
    let rows = map_indices(mu.len(), |i| {
        nu.support().iter().map(|y| s.time_separation(&mu.support()[i], y)).collect::<Result<Vec<_>>>()
    });
    rows.into_iter().collect()
}

/// l^q on causal pairs, None where l = −∞.
pub fn lq_costs(sep: &[Vec<ExtReal>], q: f64) -> Vec<Vec<Option<f64>>> {
    sep.iter()
        .map(|r| r.iter().map(|l| l.finite().map(|v| if v > 0.0 { v.powf(q) } else { 0.0 })).collect())
        .collect()
}

pub fn lq_distance(s: &ModelSpacetime, mu: &DiscreteMeasure, nu: &DiscreteMeasure, q: f64) -> Result<LqOutcome> {
    if !(q > 0.0 && q < 1.0) {
        return invalid("q must lie in (0, 1)");
    }
    let sep = separation_matrix(s, mu, nu)?;
    Ok(solve_lq(&lq_costs(&sep, q), mu.weights(), nu.weights(), q))
}

pub fn solve_lq(costs: &[Vec<Option<f64>>], supply: &[f64], demand: &[f64], q: f64) -> LqOutcome {
    match solve_transport(costs, supply, demand) {
        None => LqOutcome { value: ExtReal::NegInf, objective: ExtReal::NegInf, plan: None, certificate: None },
        Some((plan, cert, objective)) => LqOutcome {
            value: ExtReal::Finite(objective.max(0.0).powf(1.0 / q)),
            objective: ExtReal::Finite(objective),
            plan: Some(plan),
            certificate: Some(cert),
        },
    }
}

enum Step {
    Forward(usize, usize),
    Backward(usize, usize),
}

/// Maximizes Σ c_ij π_ij over couplings supported on allowed cells by
/// successive shortest paths with Dijkstra potentials.
pub fn solve_transport(
    costs: &[Vec<Option<f64>>],
    supply: &[f64],
    demand: &[f64],
) -> Option<(Coupling, OptimalityCertificate, f64)> {
    let n = supply.len();
    let m = demand.len();
    let cmax = costs.iter().flatten().flatten().cloned().fold(0.0, f64::max);
    // shifted costs ≥ 0 for minimization
    let shifted = |i: usize, j: usize| costs[i][j].map(|c| cmax - c);
    let eps = MARGINAL_TOLERANCE * 0.1;
    let mut flow = vec![vec![0.0; m]; n];
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut pot_r = vec![0.0; n];
    let mut pot_c = vec![0.0; m];
    for _ in 0..(4 * (n + m) * (n + m) + 16) {
        if rem_s.iter().all(|&r| r <= eps) {
            break;
        }
        // Dijkstra over rows and columns of the residual graph.
        let mut dist_r: Vec<f64> = rem_s.iter().map(|&r| if r > eps { 0.0 } else { f64::INFINITY }).collect();
        let mut dist_c = vec![f64::INFINITY; m];
        let mut prev_c = vec![usize::MAX; m];
        let mut prev_r = vec![usize::MAX; n];
        let mut done_r = vec![false; n];
        let mut done_c = vec![false; m];
        loop {
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..n {
                if !done_r[i] && dist_r[i] < best {
                    best = dist_r[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_c[j] && dist_c[j] < best {
                    best = dist_c[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_row, k)) = pick else { break };
            if is_row {
                done_r[k] = true;
                for j in 0..m {
                    if let Some(c) = shifted(k, j) {
                        let nd = dist_r[k] + c + pot_r[k] - pot_c[j];
                        if nd < dist_c[j] - 1e-15 {
                            dist_c[j] = nd.max(dist_r[k]);
                            prev_c[j] = k;
                        }
                    }
                }
            } else {
                done_c[k] = true;
                for i in 0..n {
                    if flow[i][k] > eps {
                        let c = shifted(i, k).expect("flow only on allowed cells");
                        let nd = dist_c[k] - c + pot_c[k] - pot_r[i];
                        if nd < dist_r[i] - 1e-15 {
                            dist_r[i] = nd.max(dist_c[k]);
                            prev_r[i] = k;
                        }
                    }
                }
            }
        }
        let target = (0..m).filter(|&j| rem_d[j] > eps && dist_c[j].is_finite()).min_by(|&a, &b| {
            dist_c[a].partial_cmp(&dist_c[b]).expect("finite distances").then(a.cmp(&b))
        })?;
        let dt = dist_c[target];
        for i in 0..n {
            pot_r[i] += dist_r[i].min(dt);
        }
        for j in 0..m {
            pot_c[j] += dist_c[j].min(dt);
        }
        // trace the augmenting path back to a source row
        let mut path = Vec::new();
        let mut j = target;
        let mut bottleneck = rem_d[target];
        let start = loop {
            let i = prev_c[j];
            path.push(Step::Forward(i, j));
            if prev_r[i] == usize::MAX {
                break i;
            }
            let jb = prev_r[i];
            bottleneck = bottleneck.min(flow[i][jb]);
            path.push(Step::Backward(i, jb));
            j = jb;
        };
        bottleneck = bottleneck.min(rem_s[start]);
        for step in &path {
            match *step {
                Step::Forward(i, j) => flow[i][j] += bottleneck,
                Step::Backward(i, j) => flow[i][j] -= bottleneck,
            }
        }
        rem_s[start] -= bottleneck;
        rem_d[target] -= bottleneck;
    }
    if rem_s.iter().any(|&r| r > MARGINAL_TOLERANCE) || rem_d.iter().any(|&r| r > MARGINAL_TOLERANCE) {
        return None;
    }
    for row in &mut flow {
        for v in row.iter_mut() {
            if *v < eps {
                *v = 0.0;
            }
        }
    }
    let objective: f64 = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter_map(|(i, j)| costs[i][j].map(|c| c * flow[i][j]))
        .sum();
    let row_duals: Vec<f64> = pot_r.iter().map(|p| cmax + p).collect();
    let col_duals: Vec<f64> = pot_c.iter().map(|p| -p).collect();
    let mut max_dual_violation: f64 = 0.0;
    let mut max_slack: f64 = 0.0;
    for i in 0..n {
        for j in 0..m {
            if let Some(c) = costs[i][j] {
                let red = row_duals[i] + col_duals[j] - c;
                max_dual_violation = max_dual_violation.max(-red);
                if flow[i][j] > 0.0 {
                    max_slack = max_slack.max(red.abs());
                }
            }
        }
    }
    let dual_obj: f64 =
        row_duals.iter().zip(supply).map(|(u, a)| u * a).sum::<f64>() + col_duals.iter().zip(demand).map(|(v, b)| v * b).sum::<f64>();
    let cert = OptimalityCertificate {
        row_duals,
        col_duals,
        max_dual_violation,
        max_slackness_violation: max_slack,
        duality_gap: (dual_obj - objective).abs(),
    };
    Some((Coupling { matrix: flow, causal: true }, cert, objective))
}

/// True iff every positive entry pairs chronologically related points.
pub fn is_timelike_q_dualizable(
    s: &ModelSpacetime,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: Option<&Coupling>,
) -> Result<bool> {
    let Some(plan) = plan else { return Ok(false) };
    for (i, j, _) in plan.positive_entries() {
        match s.time_separation(&mu.support()[i], &nu.support()[j])? {
            ExtReal::Finite(v) if v > 0.0 => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

#[derive(Debug, Clone)]
pub struct TransportCurve {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
    pub path: Maximizer,
    /// Uniform samples in the affine parameter.
    pub samples: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct DynamicalCoupling {
    pub curves: Vec<TransportCurve>,
    /// Set when curves correspond one-to-one, in order, to the nodes of a grid.
    pub grid: Option<IndexGrid>,
}

/// Tolerance for the maximizing and affine checks on lattice curves.
pub const CURVE_TOLERANCE: f64 = 2e-3;

pub fn dynamical_coupling(
    s: &ModelSpacetime,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &Coupling,
    samples_per_curve: usize,
) -> Result<DynamicalCoupling> {
    let entries: Vec<(usize, usize, f64)> = plan.positive_entries().collect();
    let n = samples_per_curve.max(2);
    let curves = map_indices(entries.len(), |k| -> Result<TransportCurve> {
        let (i, j, mass) = entries[k];
        let (x, y) = (&mu.support()[i], &nu.support()[j]);
        let path = s.transport_geodesic(x, y)?;
        let l = s.time_separation(x, y)?.to_f64();
        if (path.length - l).abs() > CURVE_TOLERANCE * (1.0 + l) {
            return Err(Error::NoGeodesic(format!("curve {i}→{j} is not maximizing ({} vs {l})", path.length)));
        }
        let samples = (0..n).map(|k| path.point_at(k as f64 / (n - 1) as f64)).collect();
        Ok(TransportCurve { from: i, to: j, mass, path, samples })
    });
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DynamicalCoupling { curves, grid: None })
}

impl DynamicalCoupling {
    pub fn with_grid(mut self, grid: IndexGrid) -> Result<Self> {
        if grid.len() != self.curves.len() {
            return invalid("grid size does not match the number of curves");
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn total_mass(&self) -> f64 {
        self.curves.iter().map(|c| c.mass).sum()
    }

    pub fn point(&self, k: usize, t: f64) -> Event {
        self.curves[k].path.point_at(t)
    }

    /// Affine check at t = 1/2 for every curve; returns the worst relative gap.
    pub fn affine_defect(&self, s: &ModelSpacetime) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.curves {
            let x = c.path.point_at(0.0);
            let y = c.path.point_at(1.0);
            let mid = c.path.point_at(0.5);
            let l = s.time_separation(&x, &y)?.to_f64();
            let a = s.time_separation(&x, &mid)?.to_f64();
            worst = worst.max((a - 0.5 * l).abs());
        }
        Ok(worst)
    }
}

/// Push-forward under eval_t; coincident points are merged. When the
/// coupling carries a grid and nothing merged, the result carries a density
/// relative to the transported cell masses.
pub fn eval_pushforward(s: &ModelSpacetime, dc: &DynamicalCoupling, t: f64) -> Result<DiscreteMeasure> {
    Ok(pushforward_with_cells(s, dc, t)?.0)
}

pub fn pushforward_with_cells(s: &ModelSpacetime, dc: &DynamicalCoupling, t: f64) -> Result<(DiscreteMeasure, Option<Vec<f64>>)> {
    if !(0.0..=1.0).contains(&t) {
        return invalid("t must lie in [0, 1]");
    }
    let pts: Vec<Event> = dc.curves.iter().map(|c| c.path.point_at(t)).collect();
    let mut support: Vec<Event> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut owner = Vec::with_capacity(pts.len());
    for (k, p) in pts.iter().enumerate() {
        let hit = support.iter().position(|q| q == p || q.0.iter().zip(&p.0).all(|(a, b)| (a - b).abs() <= MERGE_SNAP));
        match hit {
            Some(h) => {
                weights[h] += dc.curves[k].mass;
                owner.push(h);
            }
            None => {
                owner.push(support.len());
                support.push(p.clone());
                weights.push(dc.curves[k].mass);
            }
        }
    }
    let merged = support.len() < pts.len();
    let weights = renormalize(weights);
    let cells = match (&dc.grid, merged) {
        (Some(grid), false) => Some(transported_cell_masses(s, dc, grid, t)?),
        _ => None,
    };
    let density = cells.as_ref().map(|m| weights.iter().zip(m).map(|(w, c)| if *c > 0.0 { w / c } else { 0.0 }).collect());
    Ok((DiscreteMeasure { support, weights, reference_density: density }, cells))
}

/// |det DΦ_t| × grid cell volume × reference density at γ_t, with DΦ_t by
/// finite differences across neighbouring grid curves.
fn transported_cell_masses(s: &ModelSpacetime, dc: &DynamicalCoupling, grid: &IndexGrid, t: f64) -> Result<Vec<f64>> {
    let d = grid.shape.len();
    if d != s.dim() {
        return invalid("grid dimension must equal the spacetime dimension");
    }
    let vol: f64 = grid.spacing.iter().product();
    let pos: Vec<Event> = (0..grid.len()).map(|k| dc.point(k, t)).collect();
    let masses = (0..grid.len())
        .map(|k| {
            let mi = grid.multi_index(k);
            let mut jac = DMatrix::<f64>::zeros(d, d);
            for a in 0..d {
                if grid.shape[a] < 2 {
                    return Err(Error::InvalidInput("grid axes need two nodes for the Jacobian".into()));
                }
                let mut lo = mi.clone();
                let mut hi = mi.clone();
                if mi[a] > 0 {
                    lo[a] -= 1;
                }
                if mi[a] + 1 < grid.shape[a] {
                    hi[a] += 1;
                }
                let steps = (hi[a] - lo[a]) as f64 * grid.spacing[a];
                let (p, q) = (&pos[grid.flat(&lo)], &pos[grid.flat(&hi)]);
                for r in 0..d {
                    jac[(r, a)] = (q.0[r] - p.0[r]) / steps;
                }
            }
            Ok(jac.determinant().abs() * vol * s.density(&pos[k]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(masses)
}

/// max |ℓ_q(μ_s, μ_t) − (t − s) ℓ_q(μ_0, μ_1)| over grid pairs s < t.
pub fn verify_q_geodesic(s: &ModelSpacetime, dc: &DynamicalCoupling, q: f64, t_grid: &[f64], tol: f64) -> Result<(bool, f64)> {
    let mu0 = eval_pushforward(s, dc, 0.0)?;
    let mu1 = eval_pushforward(s, dc, 1.0)?;
    let full = lq_distance(s, &mu0, &mu1, q)?.value.to_f64();
    let mut worst: f64 = 0.0;
    for (a, &ta) in t_grid.iter().enumerate() {
        for &tb in &t_grid[a + 1..] {
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            let ms = eval_pushforward(s, dc, lo)?;
            let mt = eval_pushforward(s, dc, hi)?;
            let v = lq_distance(s, &ms, &mt, q)?.value;
            let gap = match v {
                ExtReal::Finite(v) => (v - (hi - lo) * full).abs(),
                _ => f64::INFINITY,
            };
            worst = worst.max(gap);
        }
    }
    Ok((worst <= tol, worst))
}

/// S_{N'}(μ|m) = −Σ ρ^{1−1/N'} m over cells; 0 for a measure without a
/// density.
pub fn renyi_entropy(mu: &DiscreteMeasure, reference_cell_masses: &[f64], n_prime: f64) -> Result<f64> {
    if !(n_prime > 1.0) {
        return invalid("N' must exceed 1");
    }
    if mu.reference_density().is_none() {
        return Ok(0.0);
    }
    if reference_cell_masses.len() != mu.len() {
        return invalid("one reference cell mass per support point is required");
    }
    let e = 1.0 / n_prime;
    Ok(-mu
        .weights()
        .iter()
        .zip(reference_cell_masses)
        .filter(|(_, &m)| m > 0.0)
        .map(|(w, m)| w.powf(1.0 - e) * m.powf(e))
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mink() -> ModelSpacetime {
        ModelSpacetime::minkowski(2, vec![(-5.0, 5.0), (-5.0, 5.0)]).unwrap()
    }

    fn ev(t: f64, x: f64) -> Event {
        Event(vec![t, x])
    }

    #[test]
    fn dirac_to_dirac() {
        let s = mink();
        let out = lq_distance(&s, &DiscreteMeasure::dirac(ev(0.0, 0.0)), &DiscreteMeasure::dirac(ev(2.0, 0.0)), 0.5).unwrap();
        assert!((out.value.to_f64() - 2.0).abs() < 1e-14);
        assert_eq!(out.plan.unwrap().matrix, vec![vec![1.0]]);
        let bad = lq_distance(&s, &DiscreteMeasure::dirac(ev(0.0, 0.0)), &DiscreteMeasure::dirac(ev(1.0, 2.0)), 0.5).unwrap();
        assert_eq!(bad.value, ExtReal::NegInf);
        assert!(!is_timelike_q_dualizable(&s, &DiscreteMeasure::dirac(ev(0.0, 0.0)), &DiscreteMeasure::dirac(ev(1.0, 2.0)), None).unwrap());
    }

    #[test]
    fn null_pair_is_not_dualizable() {
        let s = mink();
        let (mu, nu) = (DiscreteMeasure::dirac(ev(0.0, 0.0)), DiscreteMeasure::dirac(ev(1.0, 1.0)));
        let out = lq_distance(&s, &mu, &nu, 0.5).unwrap();
        assert_eq!(out.value, ExtReal::ZERO);
        assert!(!is_timelike_q_dualizable(&s, &mu, &nu, out.plan.as_ref()).unwrap());
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![ev(0.0, 0.0)], vec![0.5], None).is_err());
        assert!(DiscreteMeasure::new(vec![ev(0.0, 0.0), ev(0.0, 0.0)], vec![0.5, 0.5], None).is_err());
        let m = DiscreteMeasure::uniform_points(vec![ev(0.0, 0.0), ev(1.0, 0.0)]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<DiscreteMeasure>(&text).unwrap(), m);
    }

    #[test]
    fn entropy_identities() {
        let s = mink();
        let b = DiscreteMeasure::uniform_on_box(&s, &[1.0, -0.5], &[2.0, 0.5], 4).unwrap();
        let v: f64 = b.cell_masses.iter().sum();
        for n in [1.5, 2.0, 5.0] {
            let e = renyi_entropy(&b.measure, &b.cell_masses, n).unwrap();
            assert!((e + v.powf(1.0 / n)).abs() < 1e-12);
            let scaled: Vec<f64> = b.cell_masses.iter().map(|m| 3.0 * m).collect();
            let es = renyi_entropy(&b.measure, &scaled, n).unwrap();
            assert!((es - 3f64.powf(1.0 / n) * e).abs() < 1e-12);
        }
        assert_eq!(renyi_entropy(&DiscreteMeasure::dirac(ev(0.0, 0.0)), &[1.0], 2.0).unwrap(), 0.0);
    }
}
