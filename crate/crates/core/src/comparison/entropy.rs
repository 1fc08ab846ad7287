//! Entropic checks: timelike measure contraction and displacement
//! semiconvexity along discrete q-geodesics.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{row, InequalityReport};
use crate::distortion::tau_const;
use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::models::{Event, ModelSpacetime};
use crate::transport::{
    dynamical_coupling, lq_distance, pushforward_with_cells, renyi_entropy, DiscreteMeasure, UniformBox,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmcpConfig {
    pub k: f64,
    pub n: f64,
    pub q: f64,
    pub t_grid: Vec<f64>,
    pub n_primes: Vec<f64>,
    pub tolerance: f64,
}

impl TmcpConfig {
    fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return invalid("q must lie in (0, 1)");
        }
        if self.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return invalid("t grid must lie in [0, 1]");
        }
        if self.n_primes.is_empty() || self.n_primes.iter().any(|&np| np < self.n || np <= 1.0) {
            return invalid("every N' must satisfy N' ≥ N and N' > 1");
        }
        Ok(())
    }
}

fn tau(k: f64, n: f64, t: f64, theta: f64) -> f64 {
    match tau_const(k, n, t, theta) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => f64::INFINITY,
        ExtReal::NegInf => f64::NEG_INFINITY,
    }
}

fn entropy_at(s: &ModelSpacetime, dc: &crate::transport::DynamicalCoupling, t: f64, np: f64) -> Result<f64> {
    let (mu_t, cells) = pushforward_with_cells(s, dc, t)?;
    match cells {
        Some(c) => renyi_entropy(&mu_t, &c, np),
        None => Ok(0.0),
    }
}

/// Past TMCP from δ_o to the box measure μ1: S_{N'}(μ_t) against
/// −Σ τ^{(t)}_{K,N'}(l(o, y)) ρ_1(y)^{−1/N'} μ_1(y).
pub fn check_tmcp(s: &ModelSpacetime, o: &Event, mu1: &UniformBox, cfg: &TmcpConfig) -> Result<InequalityReport> {
    cfg.validate()?;
    let nu = &mu1.measure;
    let mut ls = Vec::with_capacity(nu.len());
    for y in nu.support() {
        match s.time_separation(o, y)? {
            ExtReal::Finite(v) if v > 0.0 => ls.push(v),
            _ => return invalid("μ1 is not concentrated in the chronological future of o"),
        }
    }
    let mu0 = DiscreteMeasure::dirac(o.clone());
    let out = lq_distance(s, &mu0, nu, cfg.q)?;
    let plan = out.plan.ok_or_else(|| Error::InvalidInput("no causal coupling".into()))?;
    let dc = dynamical_coupling(s, &mu0, nu, &plan, 3)?.with_grid(mu1.grid.clone())?;
    let mut rows = Vec::new();
    for &np in &cfg.n_primes {
        let e = 1.0 / np;
        let s1 = entropy_at(s, &dc, 1.0, np)?;
        for &t in &cfg.t_grid {
            let st = entropy_at(s, &dc, t, np)?;
            let rhs: f64 = -ls
                .iter()
                .zip(nu.weights())
                .zip(&mu1.cell_masses)
                .map(|((&l, &w), &m)| tau(cfg.k, np, t, l) * w.powf(1.0 - e) * m.powf(e))
                .sum::<f64>();
            rows.push(row(format!("t={t};N'={np}"), st, rhs, rhs - st));
            if cfg.k == 0.0 {
                rows.push(row(format!("t={t};N'={np};linear"), st, t * s1, t * s1 - st));
            }
        }
    }
    Ok(InequalityReport::new(
        "tmcp",
        rows,
        cfg.tolerance,
        json!({"K": cfg.k, "N": cfg.n, "q": cfg.q, "t_grid": cfg.t_grid, "n_primes": cfg.n_primes, "cells": nu.len()}),
    ))
}

/// Future TMCP: μ0 on the box `lo..hi` in the past of o, checked by running
/// the past verifier on the time-reversed chart.
pub fn check_tmcp_future(
    s: &ModelSpacetime,
    o: &Event,
    lo: &[f64],
    hi: &[f64],
    per_axis: usize,
    cfg: &TmcpConfig,
) -> Result<InequalityReport> {
    let rev = s.time_reversed()?;
    let flip = |p: &[f64]| -> Vec<f64> {
        let mut c = p.to_vec();
        c[0] = -c[0];
        c
    };
    let (mut lo_r, mut hi_r) = (flip(lo), flip(hi));
    std::mem::swap(&mut lo_r[0], &mut hi_r[0]);
    let mu = DiscreteMeasure::uniform_on_box(&rev, &lo_r, &hi_r, per_axis)?;
    let mut report = check_tmcp(&rev, &Event(flip(&o.0)), &mu, cfg)?;
    report.name = "tmcp_future".into();
    Ok(report)
}

/// Two-τ displacement semiconvexity between two box measures whose optimal
/// plan is a transport map.
pub fn check_tcd_semiconvexity(
    s: &ModelSpacetime,
    mu0: &UniformBox,
    mu1: &UniformBox,
    cfg: &TmcpConfig,
) -> Result<InequalityReport> {
    cfg.validate()?;
    let (a, b) = (&mu0.measure, &mu1.measure);
    let mut ls = vec![vec![0.0; b.len()]; a.len()];
    for (i, x) in a.support().iter().enumerate() {
        for (j, y) in b.support().iter().enumerate() {
            match s.time_separation(x, y)? {
                ExtReal::Finite(v) if v > 0.0 => ls[i][j] = v,
                _ => return invalid("supports are not chronologically related"),
            }
        }
    }
    let out = lq_distance(s, a, b, cfg.q)?;
    let plan = out.plan.ok_or_else(|| Error::InvalidInput("no causal coupling".into()))?;
    let per_row: Vec<usize> = plan.matrix.iter().map(|r| r.iter().filter(|&&v| v > 0.0).count()).collect();
    if per_row.iter().any(|&c| c != 1) {
        return Err(Error::UnsupportedModel(
            "optimal plan splits mass; intermediate densities need a transport map".into(),
        ));
    }
    let dc = dynamical_coupling(s, a, b, &plan, 3)?.with_grid(mu0.grid.clone())?;
    let rho0: Vec<f64> = a.weights().iter().zip(&mu0.cell_masses).map(|(w, m)| w / m).collect();
    let rho1: Vec<f64> = b.weights().iter().zip(&mu1.cell_masses).map(|(w, m)| w / m).collect();
    let mut rows = Vec::new();
    for &np in &cfg.n_primes {
        let e = 1.0 / np;
        for &t in &cfg.t_grid {
            let st = entropy_at(s, &dc, t, np)?;
            let rhs: f64 = -plan
                .positive_entries()
                .map(|(i, j, pi)| {
                    let l = ls[i][j];
                    pi * (tau(cfg.k, np, 1.0 - t, l) * rho0[i].powf(-e) + tau(cfg.k, np, t, l) * rho1[j].powf(-e))
                })
                .sum::<f64>();
            rows.push(row(format!("t={t};N'={np}"), st, rhs, rhs - st));
        }
    }
    Ok(InequalityReport::new(
        "tcd",
        rows,
        cfg.tolerance,
        json!({"K": cfg.k, "N": cfg.n, "q": cfg.q, "t_grid": cfg.t_grid, "n_primes": cfg.n_primes}),
    ))
}
