//! Lorentzian metrics sampled on a regular chart grid: mollification, cone
//! narrowing, finite-difference curvature and L^p curvature deficits.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par::map_indices;

pub const GRID_MAGIC: &[u8; 8] = b"LSGRID01";
/// Largest nodal condition number accepted when inverting g.
pub const MAX_CONDITION: f64 = 1e12;

/// Axis layout of a regular grid; node index is row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
}

impl GridGeometry {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        let d = shape.len();
        if d < 2 || spacing.len() != d || origin.len() != d {
            return invalid("grid needs at least two axes with matching spacing and origin");
        }
        if shape.iter().any(|&n| n < 3) || spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return invalid("every axis needs ≥ 3 nodes and positive spacing");
        }
        Ok(GridGeometry { shape, spacing, origin })
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dims();
        let mut s = vec![1; d];
        for k in (0..d - 1).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for k in (0..self.dims()).rev() {
            out[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        out
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.origin[k] + i as f64 * self.spacing[k])
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Mask of nodes whose ±`r` neighbours along every axis exist and are set.
    fn shrink(&self, mask: &[bool], r: usize) -> Vec<bool> {
        let strides = self.strides();
        map_indices(self.len(), |idx| {
            if !mask[idx] {
                return false;
            }
            let mi = self.multi_index(idx);
            (0..self.dims()).all(|k| {
                mi[k] >= r
                    && mi[k] + r < self.shape[k]
                    && (1..=r).all(|o| mask[idx - o * strides[k]] && mask[idx + o * strides[k]])
            })
        })
    }
}

/// Per-node symmetric Lorentzian matrices and a log-density weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGrid {
    geometry: GridGeometry,
    /// d×d row-major matrix per node.
    coeffs: Vec<f64>,
    /// −log(dm/dvol_g) per node.
    weight: Vec<f64>,
    valid: Vec<bool>,
    lipschitz_bound: f64,
    /// Sup-norm change recorded by the last mollification.
    mollification_error: Option<f64>,
}

fn check_signature(m: &[f64], d: usize) -> bool {
    let mat = DMatrix::from_row_slice(d, d, m);
    let scale = mat.abs().max().max(1e-300);
    let eig = SymmetricEigen::new(mat).eigenvalues;
    let pos = eig.iter().filter(|&&l| l > 1e-12 * scale).count();
    let neg = eig.iter().filter(|&&l| l < -1e-12 * scale).count();
    pos == 1 && neg == d - 1
}

impl MetricGrid {
    pub fn new(geometry: GridGeometry, coeffs: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        let d = geometry.dims();
        let n = geometry.len();
        if coeffs.len() != n * d * d || weight.len() != n {
            return invalid("coefficient or weight array has the wrong length");
        }
        if weight.iter().chain(&coeffs).any(|v| !v.is_finite()) {
            return invalid("non-finite coefficient or weight");
        }
        for node in 0..n {
            let m = &coeffs[node * d * d..(node + 1) * d * d];
            for i in 0..d {
                for j in 0..i {
                    if (m[i * d + j] - m[j * d + i]).abs() > 1e-12 * (1.0 + m[i * d + j].abs()) {
                        return invalid(format!("node {node} is not symmetric"));
                    }
                }
            }
        }
        let mut grid = MetricGrid {
            geometry,
            coeffs,
            weight,
            valid: vec![true; n],
            lipschitz_bound: 0.0,
            mollification_error: None,
        };
        grid.revalidate()?;
        grid.lipschitz_bound = grid.measure_lipschitz();
        Ok(grid)
    }

    /// Samples `metric(x)` (d×d row-major) and `weight(x)` at every node.
    pub fn from_fn(
        geometry: GridGeometry,
        metric: impl Fn(&[f64]) -> Vec<f64> + Sync,
        weight: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        let n = geometry.len();
        let per_node = map_indices(n, |i| {
            let x = geometry.position(i);
            (metric(&x), weight(&x))
        });
        let mut coeffs = Vec::with_capacity(n * geometry.dims().pow(2));
        let mut w = Vec::with_capacity(n);
        for (m, wi) in per_node {
            coeffs.extend(m);
            w.push(wi);
        }
        Self::new(geometry, coeffs, w)
    }

    /// dt² − a(t)² Σ dx_i².
    pub fn warped(geometry: GridGeometry, a: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        let d = geometry.dims();
        Self::from_fn(
            geometry,
            |x| {
                let a2 = a(x[0]).powi(2);
                let mut m = vec![0.0; d * d];
                m[0] = 1.0;
                for i in 1..d {
                    m[i * d + i] = -a2;
                }
                m
            },
            |_| 0.0,
        )
    }

    pub fn minkowski(geometry: GridGeometry) -> Result<Self> {
        Self::warped(geometry, |_| 1.0)
    }

    pub fn with_weight(mut self, weight: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let w = map_indices(self.len(), |i| weight(&self.geometry.position(i)));
        if w.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite weight");
        }
        self.weight = w;
        self.lipschitz_bound = self.measure_lipschitz();
        Ok(self)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> usize {
        self.geometry.dims()
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        let dd = self.dims().pow(2);
        &self.coeffs[idx * dd..(idx + 1) * dd]
    }

    pub fn coefficient(&self, idx: usize, i: usize, j: usize) -> f64 {
        self.node(idx)[i * self.dims() + j]
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn mollification_error(&self) -> Option<f64> {
        self.mollification_error
    }

    fn revalidate(&self) -> Result<()> {
        let d = self.dims();
        let bad = map_indices(self.len(), |i| self.valid[i] && !check_signature(self.node(i), d));
        if let Some(idx) = bad.iter().position(|&b| b) {
            return Err(Error::DegenerateMetric(format!(
                "node {idx} at {:?} lost Lorentzian signature",
                self.geometry.position(idx)
            )));
        }
        Ok(())
    }

    /// Largest neighbour difference quotient over coefficients and weight.
    fn measure_lipschitz(&self) -> f64 {
        let d = self.dims();
        let dd = d * d;
        let strides = self.geometry.strides();
        let per_node = map_indices(self.len(), |idx| {
            let mi = self.geometry.multi_index(idx);
            let mut q: f64 = 0.0;
            for k in 0..d {
                if mi[k] + 1 >= self.geometry.shape[k] {
                    continue;
                }
                let nb = idx + strides[k];
                if !(self.valid[idx] && self.valid[nb]) {
                    continue;
                }
                let h = self.geometry.spacing[k];
                for c in 0..dd {
                    q = q.max((self.coeffs[nb * dd + c] - self.coeffs[idx * dd + c]).abs() / h);
                }
                q = q.max((self.weight[nb] - self.weight[idx]).abs() / h);
            }
            q
        });
        per_node.into_iter().fold(0.0, f64::max)
    }

    /// Convolution with a tensor-product bump of radius ε. Nodes whose
    /// kernel leaves the grid (or touches an invalid node) become invalid.
    pub fn mollify(&self, eps: f64) -> Result<MetricGrid> {
        let g = &self.geometry;
        if g.spacing.iter().any(|&h| eps < 2.0 * h - 1e-12) {
            return invalid("ε must be at least twice the grid spacing");
        }
        let d = g.dims();
        let dd = d * d;
        let mut coeffs = self.coeffs.clone();
        let mut weight = self.weight.clone();
        let mut valid = self.valid.clone();
        let strides = g.strides();
        #[allow(clippy::needless_range_loop)]
        for axis in 0..d {
            let h = g.spacing[axis];
            let r = (eps / h).floor() as usize;
            let kernel: Vec<f64> = {
                let raw: Vec<f64> = (-(r as i64)..=r as i64)
                    .map(|o| {
                        let s = o as f64 * h / eps;
                        if s.abs() < 1.0 {
                            (-1.0 / (1.0 - s * s)).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            };
            let stride = strides[axis];
            let n_axis = g.shape[axis];
            let rows = map_indices(g.len(), |idx| {
                let i = g.multi_index(idx)[axis];
                if !valid[idx] || i < r || i + r >= n_axis {
                    return None;
                }
                let mut acc = vec![0.0; dd + 1];
                for (o, kw) in kernel.iter().enumerate() {
                    let nb = idx + o * stride - r * stride;
                    if !valid[nb] {
                        return None;
                    }
                    for c in 0..dd {
                        acc[c] += kw * coeffs[nb * dd + c];
                    }
                    acc[dd] += kw * weight[nb];
                }
                Some(acc)
            });
            for (idx, row) in rows.into_iter().enumerate() {
                match row {
                    Some(acc) => {
                        coeffs[idx * dd..(idx + 1) * dd].copy_from_slice(&acc[..dd]);
                        weight[idx] = acc[dd];
                    }
                    None => valid[idx] = false,
                }
            }
        }
        let mut sup_err: f64 = 0.0;
        for idx in 0..g.len() {
            if valid[idx] {
                for c in 0..dd {
                    sup_err = sup_err.max((coeffs[idx * dd + c] - self.coeffs[idx * dd + c]).abs());
                }
            }
        }
        let out = MetricGrid {
            geometry: g.clone(),
            coeffs,
            weight,
            valid,
            lipschitz_bound: self.lipschitz_bound,
            mollification_error: Some(sup_err),
        };
        out.revalidate()?;
        Ok(out)
    }

    /// Sup-norm distance of coefficients to `other` over nodes valid in both.
    pub fn sup_distance(&self, other: &MetricGrid) -> f64 {
        let dd = self.dims().pow(2);
        (0..self.len())
            .filter(|&i| self.valid[i] && other.valid[i])
            .flat_map(|i| (0..dd).map(move |c| (i, c)))
            .map(|(i, c)| (self.coeffs[i * dd + c] - other.coeffs[i * dd + c]).abs())
            .fold(0.0, f64::max)
    }

    /// Subtracts c·dt⊗dt at every node.
    pub fn cone_narrowed(&self, c: f64) -> Result<MetricGrid> {
        if !(c >= 0.0) {
            return invalid("narrowing constant must be nonnegative");
        }
        let dd = self.dims().pow(2);
        let mut out = self.clone();
        for idx in 0..self.len() {
            out.coeffs[idx * dd] -= c;
        }
        out.revalidate()?;
        Ok(out)
    }

    /// c(ε) = 2·(mollification sup-error) + spacing.
    pub fn narrowing_constant(&self) -> f64 {
        2.0 * self.mollification_error.unwrap_or(0.0) + self.geometry.min_spacing()
    }

    pub fn quadratic_form(&self, idx: usize, v: &[f64]) -> f64 {
        let d = self.dims();
        let m = self.node(idx);
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += m[i * d + j] * v[i] * v[j];
            }
        }
        s
    }

    /// Central difference along `axis` of per-node vectors of width `w`.
    fn central_diff(&self, field: &[f64], w: usize, idx: usize, axis: usize) -> Vec<f64> {
        let s = self.geometry.strides()[axis];
        let h2 = 2.0 * self.geometry.spacing[axis];
        let (lo, hi) = (idx - s, idx + s);
        (0..w).map(|c| (field[hi * w + c] - field[lo * w + c]) / h2).collect()
    }

    fn inverse_at(&self, idx: usize) -> Result<DMatrix<f64>> {
        let d = self.dims();
        let m = DMatrix::from_row_slice(d, d, self.node(idx));
        let sv = m.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            return Err(Error::DegenerateMetric(format!("node {idx} is near-singular")));
        }
        m.try_inverse().ok_or_else(|| Error::DegenerateMetric(format!("node {idx} is singular")))
    }

    /// Christoffel symbols Γ^k_{ij} (k-major, d³ per node) on nodes whose
    /// neighbours are valid.
    pub fn christoffels(&self) -> Result<CurvatureField> {
        let d = self.dims();
        let d3 = d * d * d;
        let mask = self.geometry.shrink(&self.valid, 1);
        let per_node: Vec<Result<Vec<f64>>> = map_indices(self.len(), |idx| {
            if !mask[idx] {
                return Ok(vec![0.0; d3]);
            }
            let ginv = self.inverse_at(idx)?;
            // dg[a][i*d+j] = ∂_a g_ij
            let dg: Vec<Vec<f64>> = (0..d).map(|a| self.central_diff_coeffs(idx, a)).collect();
            let mut gam = vec![0.0; d3];
            for k in 0..d {
                for i in 0..d {
                    for j in i..d {
                        let mut s = 0.0;
                        for l in 0..d {
                            s += ginv[(k, l)] * (dg[i][j * d + l] + dg[j][i * d + l] - dg[l][i * d + j]);
                        }
                        gam[k * d * d + i * d + j] = 0.5 * s;
                        gam[k * d * d + j * d + i] = 0.5 * s;
                    }
                }
            }
            Ok(gam)
        });
        let mut christoffel = Vec::with_capacity(self.len() * d3);
        for r in per_node {
            christoffel.extend(r?);
        }
        Ok(CurvatureField {
            dims: d,
            christoffel,
            christoffel_valid: mask,
            ricci: Vec::new(),
            bakry_emery: Vec::new(),
            hessian_weight: Vec::new(),
            n: None,
            valid: Vec::new(),
        })
    }

    fn central_diff_coeffs(&self, idx: usize, axis: usize) -> Vec<f64> {
        self.central_diff(&self.coeffs, self.dims().pow(2), idx, axis)
    }

    /// Ricci tensor R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik.
    pub fn ricci(&self) -> Result<CurvatureField> {
        let mut field = self.christoffels()?;
        let d = self.dims();
        let dd = d * d;
        let d3 = dd * d;
        let mask = self.geometry.shrink(&field.christoffel_valid, 1);
        let gam = &field.christoffel;
        let ricci = map_indices(self.len(), |idx| {
            if !mask[idx] {
                return vec![0.0; dd];
            }
            let g = |k: usize, i: usize, j: usize| gam[idx * d3 + k * dd + i * d + j];
            // dgam[a][k*dd + i*d + j] = ∂_a Γ^k_ij
            let dgam: Vec<Vec<f64>> = (0..d).map(|a| self.central_diff(gam, d3, idx, a)).collect();
            let mut r = vec![0.0; dd];
            for i in 0..d {
                for j in i..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += dgam[k][k * dd + i * d + j] - dgam[j][k * dd + i * d + k];
                        for l in 0..d {
                            s += g(k, k, l) * g(l, i, j) - g(k, j, l) * g(l, i, k);
                        }
                    }
                    r[i * d + j] = s;
                    r[j * d + i] = s;
                }
            }
            r
        });
        field.ricci = ricci.concat();
        field.valid = mask;
        Ok(field)
    }

    /// Ric − Hess f − df⊗df/(N − d) with f = log(dm/dvol) = −weight.
    pub fn bakry_emery(&self, n: f64) -> Result<CurvatureField> {
        let d = self.dims();
        let dd = d * d;
        let d3 = dd * d;
        let constant_weight = {
            let w0 = self.weight.iter().zip(&self.valid).find(|(_, &v)| v).map_or(0.0, |(w, _)| *w);
            self.weight.iter().zip(&self.valid).all(|(w, &v)| !v || (w - w0).abs() <= 1e-14 * (1.0 + w0.abs()))
        };
        if n < d as f64 || (n == d as f64 && !constant_weight) {
            return invalid("need N > dims, or N = dims with constant weight");
        }
        let mut field = self.ricci()?;
        let f: Vec<f64> = self.weight.iter().map(|w| -w).collect();
        let df: Vec<f64> = map_indices(self.len(), |idx| {
            if field.christoffel_valid[idx] {
                (0..d).map(|a| self.central_diff(&f, 1, idx, a)[0]).collect()
            } else {
                vec![0.0; d]
            }
        })
        .concat();
        let mask = &field.valid;
        let gam = &field.christoffel;
        let hess = map_indices(self.len(), |idx| {
            if !mask[idx] {
                return vec![0.0; dd];
            }
            let ddf: Vec<Vec<f64>> = (0..d).map(|a| self.central_diff(&df, d, idx, a)).collect();
            let mut h = vec![0.0; dd];
            for i in 0..d {
                for j in i..d {
                    let mut s = 0.5 * (ddf[i][j] + ddf[j][i]);
                    for k in 0..d {
                        s -= gam[idx * d3 + k * dd + i * d + j] * df[idx * d + k];
                    }
                    h[i * d + j] = s;
                    h[j * d + i] = s;
                }
            }
            h
        })
        .concat();
        let inv = if constant_weight { 0.0 } else { 1.0 / (n - d as f64) };
        let be: Vec<f64> = (0..self.len() * dd)
            .map(|c| {
                let (idx, ij) = (c / dd, c % dd);
                let (i, j) = (ij / d, ij % d);
                field.ricci[c] - hess[c] - inv * df[idx * d + i] * df[idx * d + j]
            })
            .collect();
        field.hessian_weight = hess;
        field.bakry_emery = be;
        field.n = Some(n);
        Ok(field)
    }

    /// Nodal measure exp(−weight)·√|det g|·cell volume.
    pub fn nodal_measure(&self, idx: usize) -> f64 {
        let d = self.dims();
        let det = DMatrix::from_row_slice(d, d, self.node(idx)).determinant();
        (-self.weight[idx]).exp() * det.abs().sqrt() * self.geometry.cell_volume()
    }

    /// Future-directed g-orthonormal frame at a node, built from the chart basis.
    fn orthonormal_frame(&self, idx: usize) -> Result<Vec<Vec<f64>>> {
        let d = self.dims();
        let gtt = self.coefficient(idx, 0, 0);
        if !(gtt > 0.0) {
            return Err(Error::DegenerateMetric(format!("∂t is not timelike at node {idx}")));
        }
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            let m = self.node(idx);
            (0..d).map(|i| (0..d).map(|j| m[i * d + j] * u[i] * v[j]).sum::<f64>()).sum()
        };
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut e0 = vec![0.0; d];
        e0[0] = 1.0 / gtt.sqrt();
        frame.push(e0);
        for a in 1..d {
            let mut v = vec![0.0; d];
            v[a] = 1.0;
            for (b, e) in frame.iter().enumerate() {
                let sign = if b == 0 { 1.0 } else { -1.0 };
                let proj = sign * inner(&v, e);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= proj * ei;
                }
            }
            let norm2 = -inner(&v, &v);
            if !(norm2 > 0.0) {
                return Err(Error::DegenerateMetric(format!("frame construction failed at node {idx}")));
            }
            let norm = norm2.sqrt();
            frame.push(v.into_iter().map(|x| x / norm).collect());
        }
        Ok(frame)
    }

    /// Timelike cone samples at a node: e0 + s·u for unit spatial u.
    pub fn cone_vectors(&self, idx: usize, cone: &ConeSampling) -> Result<Vec<Vec<f64>>> {
        let d = self.dims();
        let frame = self.orthonormal_frame(idx)?;
        let dirs = spatial_directions(d - 1, cone.directions);
        let mut out = Vec::with_capacity(dirs.len() * cone.speeds.len());
        for &s in &cone.speeds {
            for u in &dirs {
                let mut v = frame[0].clone();
                for (a, ua) in u.iter().enumerate() {
                    for (vi, ei) in v.iter_mut().zip(&frame[a + 1]) {
                        *vi += s * ua * ei;
                    }
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    /// k(x) = min over the cone samples of BE(v,v)/g(v,v).
    pub fn timelike_lower_bound_fn(&self, field: &CurvatureField, cone: &ConeSampling) -> Result<NodeFunction> {
        if cone.directions == 0 || cone.speeds.is_empty() {
            return invalid("empty cone sample");
        }
        if cone.speeds.iter().any(|&s| !(0.0..1.0).contains(&s)) {
            return invalid("cone speeds must lie in [0, 1)");
        }
        let tensor = if field.bakry_emery.is_empty() { &field.ricci } else { &field.bakry_emery };
        if tensor.is_empty() {
            return invalid("curvature field has no Ricci data");
        }
        let d = self.dims();
        let dd = d * d;
        let per_node: Vec<Result<f64>> = map_indices(self.len(), |idx| {
            if !field.valid[idx] {
                return Ok(f64::NAN);
            }
            let t = &tensor[idx * dd..(idx + 1) * dd];
            let mut kmin = f64::INFINITY;
            for v in self.cone_vectors(idx, cone)? {
                let q: f64 = (0..d).map(|i| (0..d).map(|j| t[i * d + j] * v[i] * v[j]).sum::<f64>()).sum();
                kmin = kmin.min(q / self.quadratic_form(idx, &v));
            }
            Ok(kmin)
        });
        let mut values = Vec::with_capacity(self.len());
        for r in per_node {
            values.push(r?);
        }
        Ok(NodeFunction { values, valid: field.valid.clone() })
    }

    /// Curvature-deficit curve along a decreasing list of mollification radii.
    pub fn lp_deficit_curve(&self, k: f64, p: f64, eps_list: &[f64], n: f64) -> Result<Vec<DeficitPoint>> {
        self.lp_deficit_curve_with(k, p, eps_list, n, &ConeSampling::default())
    }

    pub fn lp_deficit_curve_with(
        &self,
        k: f64,
        p: f64,
        eps_list: &[f64],
        n: f64,
        cone: &ConeSampling,
    ) -> Result<Vec<DeficitPoint>> {
        if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return invalid("eps list must be nonempty and strictly decreasing");
        }
        if !(p >= 1.0) {
            return invalid("p must be at least 1");
        }
        let mut region: Option<Vec<bool>> = None;
        let mut out = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let smooth = self.mollify(eps)?;
            let c = smooth.narrowing_constant();
            let narrowed = smooth.cone_narrowed(c)?;
            let field = narrowed.bakry_emery(n)?;
            let kfun = narrowed.timelike_lower_bound_fn(&field, cone)?;
            let region = region.get_or_insert_with(|| kfun.valid.clone());
            let mut deficit = 0.0;
            let mut min_k = f64::INFINITY;
            for idx in (0..self.len()).filter(|&i| region[i]) {
                let kv = kfun.values[idx];
                min_k = min_k.min(kv);
                let neg = (k - kv).max(0.0);
                if neg > 0.0 {
                    deficit += neg.powf(p) * smooth.nodal_measure(idx);
                }
            }
            out.push(DeficitPoint { eps, deficit, min_k, cone_shift: c, sup_error: smooth.mollification_error.unwrap_or(0.0) });
        }
        Ok(out)
    }

    /// Writes the binary grid: magic, dims, shape, spacing, origin, the
    /// upper-triangular coefficient blocks and the weight block, all
    /// little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.geometry;
        let d = g.dims();
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(d as u64).to_le_bytes())?;
        for &n in &g.shape {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in g.spacing.iter().chain(&g.origin) {
            w.write_all(&v.to_le_bytes())?;
        }
        for i in 0..d {
            for j in i..d {
                for idx in 0..g.len() {
                    w.write_all(&self.coefficient(idx, i, j).to_le_bytes())?;
                }
            }
        }
        for v in &self.weight {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<MetricGrid> {
        let io = |e: std::io::Error| Error::InvalidInput(format!("grid read failed: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != GRID_MAGIC {
            return invalid("not a grid file (bad magic)");
        }
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(io)?;
            Ok(u64::from_le_bytes(b))
        };
        let d = read_u64(&mut r)? as usize;
        if !(2..=8).contains(&d) {
            return invalid("unsupported grid dimension");
        }
        let mut shape = Vec::with_capacity(d);
        for _ in 0..d {
            shape.push(read_u64(&mut r)? as usize);
        }
        let read_f64s = |r: &mut R, n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(io)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let spacing = read_f64s(&mut r, d)?;
        let origin = read_f64s(&mut r, d)?;
        let geometry = GridGeometry::new(shape, spacing, origin)?;
        let n = geometry.len();
        let mut coeffs = vec![0.0; n * d * d];
        for i in 0..d {
            for j in i..d {
                let block = read_f64s(&mut r, n)?;
                for (idx, v) in block.into_iter().enumerate() {
                    coeffs[idx * d * d + i * d + j] = v;
                    coeffs[idx * d * d + j * d + i] = v;
                }
            }
        }
        let weight = read_f64s(&mut r, n)?;
        MetricGrid::new(geometry, coeffs, weight)
    }

    pub fn manifest(&self) -> GridManifest {
        let d = self.dims();
        let mut blocks: Vec<String> = Vec::new();
        for i in 0..d {
            for j in i..d {
                blocks.push(format!("g{i}{j}"));
            }
        }
        blocks.push("weight".into());
        GridManifest {
            format: String::from_utf8_lossy(GRID_MAGIC).into_owned(),
            dims: d,
            shape: self.geometry.shape.clone(),
            spacing: self.geometry.spacing.clone(),
            origin: self.geometry.origin.clone(),
            blocks,
            lipschitz_bound: self.lipschitz_bound,
        }
    }
}

/// JSON description stored next to a binary grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub format: String,
    pub dims: usize,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub blocks: Vec<String>,
    pub lipschitz_bound: f64,
}

/// Per-node tensors; entries on nodes outside `valid` are zero.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub dims: usize,
    pub christoffel: Vec<f64>,
    pub christoffel_valid: Vec<bool>,
    pub ricci: Vec<f64>,
    pub bakry_emery: Vec<f64>,
    pub hessian_weight: Vec<f64>,
    pub n: Option<f64>,
    pub valid: Vec<bool>,
}

impl CurvatureField {
    pub fn gamma(&self, idx: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dims;
        self.christoffel[idx * d * d * d + k * d * d + i * d + j]
    }

    pub fn ricci_at(&self, idx: usize, i: usize, j: usize) -> f64 {
        self.ricci[idx * self.dims * self.dims + i * self.dims + j]
    }

    pub fn bakry_emery_at(&self, idx: usize, i: usize, j: usize) -> f64 {
        self.bakry_emery[idx * self.dims * self.dims + i * self.dims + j]
    }
}

/// A sampled function on grid nodes (NaN off `valid`).
#[derive(Debug, Clone)]
pub struct NodeFunction {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl NodeFunction {
    pub fn min(&self) -> f64 {
        self.values.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(x, _)| *x).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitPoint {
    pub eps: f64,
    pub deficit: f64,
    pub min_k: f64,
    pub cone_shift: f64,
    pub sup_error: f64,
}

/// Directions and speeds for sampling the timelike cone in an orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSampling {
    pub directions: usize,
    pub speeds: Vec<f64>,
}

impl Default for ConeSampling {
    /// 32 directions; speeds √3/4 and √3/2, so g(v,v) ≥ 1/4.
    fn default() -> Self {
        let s = 3f64.sqrt() / 4.0;
        ConeSampling { directions: 32, speeds: vec![s, 2.0 * s] }
    }
}

/// Unit vectors in ℝ^m: alternating ± for m = 1, a uniform circle for
/// m = 2, a Fibonacci sphere with zero-padding beyond.
fn spatial_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    match m {
        0 => vec![Vec::new()],
        1 => (0..count.max(2)).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    let mut v = vec![0.0; m];
                    v[0] = r * a.cos();
                    v[1] = r * a.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize, h: f64) -> GridGeometry {
        GridGeometry::new(vec![n, n], vec![h, h], vec![-(n as f64 - 1.0) * h / 2.0; 2]).unwrap()
    }

    #[test]
    fn constant_grid_is_fixed_by_mollification() {
        let g = MetricGrid::minkowski(geom(21, 0.1)).unwrap();
        let m = g.mollify(0.3).unwrap();
        assert!(m.sup_distance(&g) < 1e-14);
        assert!(!m.valid()[0] && m.valid()[10 * 21 + 10]);
        assert!(g.mollify(0.1).is_err());
    }

    #[test]
    fn narrowing_and_signature() {
        let g = MetricGrid::minkowski(geom(5, 0.1)).unwrap();
        let n = g.cone_narrowed(0.1).unwrap();
        assert!((n.coefficient(7, 0, 0) - 0.9).abs() < 1e-15);
        assert_eq!(g.cone_narrowed(0.0).unwrap(), g);
        assert!(matches!(g.cone_narrowed(1.5), Err(Error::DegenerateMetric(_))));
    }

    #[test]
    fn binary_round_trip() {
        let g = MetricGrid::warped(geom(7, 0.05), |t| 1.0 + 0.1 * t).unwrap().with_weight(|x| 0.3 * x[1]).unwrap();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], GRID_MAGIC);
        let back = MetricGrid::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert_eq!(g.manifest().blocks, vec!["g00", "g01", "g11", "weight"]);
    }

    #[test]
    fn n_equal_dims_needs_constant_weight() {
        let g = MetricGrid::minkowski(geom(7, 0.1)).unwrap();
        assert!(g.bakry_emery(2.0).is_ok());
        let w = g.with_weight(|x| x[0]).unwrap();
        assert!(w.bakry_emery(2.0).is_err());
        assert!(w.bakry_emery(1.5).is_err());
    }
}
