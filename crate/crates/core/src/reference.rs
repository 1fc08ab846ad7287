//! Slow independent oracles shared by the test suites and the CLI suite.

/// Maximum of Σ c_ij π_ij over the vertices of the transportation polytope
/// restricted to allowed cells, by enumerating acyclic cell sets and
/// solving each by leaf elimination. Exponential; meant for ≤ 4×4.
pub fn brute_force_transport(costs: &[Vec<Option<f64>>], supply: &[f64], demand: &[f64]) -> Option<f64> {
    let n = supply.len();
    let m = demand.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|&(i, j)| costs[i][j].is_some()).collect();
    assert!(cells.len() <= 20, "brute force is limited to 20 allowed cells");
    let max_edges = n + m - 1;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << cells.len()) {
        if mask.count_ones() as usize > max_edges {
            continue;
        }
        let chosen: Vec<(usize, usize)> = (0..cells.len()).filter(|k| mask >> k & 1 == 1).map(|k| cells[k]).collect();
        if let Some(plan) = leaf_elimination(&chosen, supply, demand) {
            let v: f64 = chosen.iter().zip(&plan).map(|(&(i, j), x)| costs[i][j].expect("allowed") * x).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

/// Unique flow on a forest of cells matching the marginals, if it exists
/// and is nonnegative.
fn leaf_elimination(edges: &[(usize, usize)], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let n = supply.len();
    let tol = 1e-12;
    // nodes 0..n rows, n.. columns
    let mut rem: Vec<f64> = supply.iter().chain(demand).cloned().collect();
    let mut alive = vec![true; edges.len()];
    let mut flow = vec![0.0; edges.len()];
    let ends = |e: (usize, usize)| (e.0, n + e.1);
    loop {
        let mut degree = vec![0usize; rem.len()];
        for (k, &e) in edges.iter().enumerate() {
            if alive[k] {
                let (a, b) = ends(e);
                degree[a] += 1;
                degree[b] += 1;
            }
        }
        let Some(k) = (0..edges.len()).find(|&k| {
            let (a, b) = ends(edges[k]);
            alive[k] && (degree[a] == 1 || degree[b] == 1)
        }) else {
            if alive.iter().any(|&a| a) {
                return None; // a cycle remains
            }
            break;
        };
        let (a, b) = ends(edges[k]);
        let (leaf, other) = if degree[a] == 1 { (a, b) } else { (b, a) };
        let x = rem[leaf];
        if x < -tol {
            return None;
        }
        flow[k] = x;
        rem[leaf] = 0.0;
        rem[other] -= x;
        alive[k] = false;
    }
    if rem.iter().any(|r| r.abs() > 1e-10) || flow.iter().any(|&x| x < -tol) {
        return None;
    }
    Some(flow)
}

/// sin(√k θ)/√k, θ, or sinh(√−k θ)/√−k, written out from the series-free
/// closed forms without going through the library sine.
pub fn closed_form_sine(k: f64, theta: f64) -> f64 {
    match k.partial_cmp(&0.0) {
        Some(std::cmp::Ordering::Greater) => (k.sqrt() * theta).sin() / k.sqrt(),
        Some(std::cmp::Ordering::Less) => {
            let r = (-k).sqrt();
            0.5 * ((r * theta).exp() - (-r * theta).exp()) / r
        }
        _ => theta,
    }
}

/// min{[ε√(K/(N−1))/(πc)]^5, 1/c}, re-evaluated term by term.
pub fn tmcp_delta_formula(k: f64, n: f64, eps: f64, c: f64) -> f64 {
    let base = eps * (k / (n - 1.0)).sqrt() / (std::f64::consts::PI * c);
    let fifth = base * base * base * base * base;
    if fifth < 1.0 / c {
        fifth
    } else {
        1.0 / c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let c = vec![vec![Some(1.0), Some(0.0)], vec![Some(0.0), Some(1.0)]];
        assert_eq!(brute_force_transport(&c, &[0.5, 0.5], &[0.5, 0.5]), Some(1.0));
        let blocked = vec![vec![None, Some(0.0)], vec![None, Some(1.0)]];
        assert_eq!(brute_force_transport(&blocked, &[0.5, 0.5], &[0.5, 0.5]), None);
    }
}
