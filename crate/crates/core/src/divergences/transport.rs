//! Exact optimal transport between finite measures.
//!
//! The transportation LP is solved by successive shortest augmenting paths
//! with Dijkstra on reduced costs. Node potentials give Kantorovich
//! potentials; after a c-transform they are exactly dual feasible, so the
//! reported duality gap certifies the primal value.

use super::FiniteDist;
use crate::error::{FbError, Result};
use crate::numeric::pairwise_sum;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest support accepted on either side.
pub const MAX_SUPPORT: usize = 512;

const MASS_EPS: f64 = 1e-15;

/// A transportation problem with ground cost `cost[i][j]`.
#[derive(Clone, Debug)]
pub struct TransportProblem {
    pub source: FiniteDist,
    pub target: FiniteDist,
    pub cost: Vec<Vec<f64>>,
    /// 1 for W₁, 2 for W₂ (cost squared internally).
    pub order: u8,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportSolution {
    /// W_p value (square root of the optimal squared cost when p = 2).
    pub value: f64,
    /// Optimal expected (possibly squared) cost.
    pub primal: f64,
    /// Dual objective of the certified feasible potentials.
    pub dual: f64,
    /// primal − dual.
    pub gap: f64,
    pub coupling: Vec<Vec<f64>>,
    pub potential_source: Vec<f64>,
    pub potential_target: Vec<f64>,
    /// Largest deviation of the coupling marginals from the inputs.
    pub marginal_error: f64,
}

impl TransportProblem {
    pub fn new(source: FiniteDist, target: FiniteDist, cost: Vec<Vec<f64>>, order: u8) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(FbError::Invalid(format!("order must be 1 or 2, got {order}")));
        }
        if cost.len() != source.len() {
            return Err(FbError::Dimension(cost.len(), source.len()));
        }
        for row in &cost {
            if row.len() != target.len() {
                return Err(FbError::Dimension(row.len(), target.len()));
            }
            if row.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
                return Err(FbError::Invalid("ground cost must be finite and nonnegative".into()));
            }
        }
        Ok(TransportProblem {
            source,
            target,
            cost,
            order,
        })
    }

    /// Problem with ground cost |x_i − y_j| between points on the line.
    pub fn on_line(xs: &[f64], p: FiniteDist, ys: &[f64], q: FiniteDist, order: u8) -> Result<Self> {
        let cost = xs
            .iter()
            .map(|x| ys.iter().map(|y| (x - y).abs()).collect())
            .collect();
        Self::new(p, q, cost, order)
    }

    /// Problem with 0/1 (Hamming) ground cost on a common alphabet.
    pub fn hamming(p: FiniteDist, q: FiniteDist) -> Result<Self> {
        let n = p.len();
        let cost = (0..n)
            .map(|i| (0..q.len()).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(p, q, cost, 1)
    }
}

/// Exact W₁ or W₂ with certified duality gap.
pub fn wasserstein(prob: &TransportProblem) -> Result<TransportSolution> {
    let m = prob.source.len();
    let n = prob.target.len();
    if m > MAX_SUPPORT || n > MAX_SUPPORT {
        return Err(FbError::Guard {
            needed: m.max(n) as u128,
            guard: MAX_SUPPORT as u64,
        });
    }
    let c: Vec<Vec<f64>> = if prob.order == 2 {
        prob.cost
            .iter()
            .map(|r| r.iter().map(|d| d * d).collect())
            .collect()
    } else {
        prob.cost.clone()
    };
    let a = prob.source.masses();
    let b = prob.target.masses();
    let (flow, pot_src, pot_snk) = ssp(a, b, &c)?;

    // c-transforms make the potentials exactly feasible
    let mut u: Vec<f64> = pot_src.iter().map(|p| -p).collect();
    let mut v = pot_snk;
    for j in 0..n {
        v[j] = (0..m).map(|i| c[i][j] - u[i]).fold(f64::INFINITY, f64::min);
    }
    for i in 0..m {
        u[i] = (0..n).map(|j| c[i][j] - v[j]).fold(f64::INFINITY, f64::min);
    }
    let dual = pairwise_sum(&a.iter().zip(&u).map(|(x, y)| x * y).collect::<Vec<_>>())
        + pairwise_sum(&b.iter().zip(&v).map(|(x, y)| x * y).collect::<Vec<_>>());
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if flow[i][j] > 0.0 {
                terms.push(flow[i][j] * c[i][j]);
            }
        }
    }
    let primal = pairwise_sum(&terms);
    let mut merr: f64 = 0.0;
    for i in 0..m {
        merr = merr.max((flow[i].iter().sum::<f64>() - a[i]).abs());
    }
    for j in 0..n {
        merr = merr.max(((0..m).map(|i| flow[i][j]).sum::<f64>() - b[j]).abs());
    }
    let value = if prob.order == 2 {
        primal.max(0.0).sqrt()
    } else {
        primal
    };
    Ok(TransportSolution {
        value,
        primal,
        dual,
        gap: primal - dual,
        coupling: flow,
        potential_source: u,
        potential_target: v,
        marginal_error: merr,
    })
}

type Flow = Vec<Vec<f64>>;

/// Successive shortest paths on the bipartite transportation network.
fn ssp(a: &[f64], b: &[f64], c: &[Vec<f64>]) -> Result<(Flow, Vec<f64>, Vec<f64>)> {
    let m = a.len();
    let n = b.len();
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![vec![0.0; n]; m];
    let mut ps = vec![0.0; m];
    let mut pt: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| c[i][j]).fold(f64::INFINITY, f64::min))
        .collect();
    const NONE: usize = usize::MAX;
    let max_rounds = 50 * (m + n) * (m + n) + 1000;
    for _ in 0..max_rounds {
        if supply.iter().all(|&s| s <= MASS_EPS) || demand.iter().all(|&d| d <= MASS_EPS) {
            return Ok((flow, ps, pt));
        }
        let mut ds = vec![f64::INFINITY; m];
        let mut dt = vec![f64::INFINITY; n];
        let mut done_s = vec![false; m];
        let mut done_t = vec![false; n];
        let mut pred_t = vec![NONE; n];
        let mut pred_s = vec![NONE; m];
        for i in 0..m {
            if supply[i] > MASS_EPS {
                ds[i] = 0.0;
            }
        }
        let mut target = NONE;
        loop {
            // select the closest unfinished node
            let mut best = f64::INFINITY;
            let mut pick = (false, NONE);
            for i in 0..m {
                if !done_s[i] && ds[i] < best {
                    best = ds[i];
                    pick = (true, i);
                }
            }
            for j in 0..n {
                if !done_t[j] && dt[j] < best {
                    best = dt[j];
                    pick = (false, j);
                }
            }
            if pick.1 == NONE {
                break;
            }
            if pick.0 {
                let i = pick.1;
                done_s[i] = true;
                for j in 0..n {
                    if done_t[j] {
                        continue;
                    }
                    let rc = (c[i][j] + ps[i] - pt[j]).max(0.0);
                    if best + rc < dt[j] {
                        dt[j] = best + rc;
                        pred_t[j] = i;
                    }
                }
            } else {
                let j = pick.1;
                done_t[j] = true;
                if demand[j] > MASS_EPS {
                    target = j;
                    break;
                }
                for i in 0..m {
                    if done_s[i] || flow[i][j] <= 0.0 {
                        continue;
                    }
                    let rc = (-c[i][j] + pt[j] - ps[i]).max(0.0);
                    if best + rc < ds[i] {
                        ds[i] = best + rc;
                        pred_s[i] = j;
                    }
                }
            }
        }
        if target == NONE {
            return Err(FbError::Infeasible("no augmenting path".into()));
        }
        let dmax = dt[target];
        for i in 0..m {
            ps[i] += ds[i].min(dmax);
        }
        for j in 0..n {
            pt[j] += dt[j].min(dmax);
        }
        // bottleneck along the path
        let mut theta = demand[target];
        let mut j = target;
        let root;
        loop {
            let i = pred_t[j];
            match pred_s[i] {
                NONE => {
                    root = i;
                    break;
                }
                jp => {
                    theta = theta.min(flow[i][jp]);
                    j = jp;
                }
            }
        }
        theta = theta.min(supply[root]);
        let mut j = target;
        loop {
            let i = pred_t[j];
            flow[i][j] += theta;
            match pred_s[i] {
                NONE => break,
                jp => {
                    flow[i][jp] -= theta;
                    if flow[i][jp] < MASS_EPS {
                        flow[i][jp] = 0.0;
                    }
                    j = jp;
                }
            }
        }
        supply[root] -= theta;
        demand[target] -= theta;
    }
    Err(FbError::NoConvergence {
        iters: max_rounds,
        gap: f64::NAN,
    })
}

/// Equal-mass quantization of N(0, var) into `m` cells, each represented by
/// its conditional mean.
pub fn quantize_gaussian(var: f64, m: usize) -> (Vec<f64>, FiniteDist) {
    let sd = var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let edges: Vec<f64> = (0..=m)
        .map(|k| match k {
            0 => f64::NEG_INFINITY,
            k if k == m => f64::INFINITY,
            k => std.inverse_cdf(k as f64 / m as f64),
        })
        .collect();
    let pts = (0..m)
        .map(|k| {
            let (lo, hi) = (edges[k], edges[k + 1]);
            let dens = |z: f64| if z.is_finite() { phi(z) } else { 0.0 };
            sd * (dens(lo) - dens(hi)) * m as f64
        })
        .collect();
    (pts, FiniteDist::uniform(m))
}

/// Rate-distortion lower bound on W₂²(P_{X^n}, N(0, P I_n)) for any code
/// with M equiprobable codewords: n·P·exp(−2 ln M / n).
pub fn w2_rate_distortion_floor(n: usize, m: usize, power: f64) -> f64 {
    n as f64 * power * (-2.0 * (m as f64).ln() / n as f64).exp()
}

/// Illustrative W₂ between equiprobable scalar points and a quantized
/// N(0, P). Never used for assertions.
pub fn w2_to_gaussian_1d(points: &[f64], power: f64, m: usize) -> Result<f64> {
    let (g, gq) = quantize_gaussian(power, m);
    let p = FiniteDist::uniform(points.len());
    Ok(wasserstein(&TransportProblem::on_line(points, p, &g, gq, 2)?)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::tv;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_dist(rng: &mut ChaCha8Rng, k: usize) -> FiniteDist {
        let w: Vec<f64> = (0..k)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        FiniteDist::from_weights(w).unwrap_or_else(|_| FiniteDist::uniform(k))
    }

    /// Sorted-quantile coupling on the line: exact for convex costs.
    fn quantile_oracle(xs: &[f64], p: &[f64], ys: &[f64], q: &[f64], order: i32) -> f64 {
        let mut a: Vec<(f64, f64)> = xs.iter().cloned().zip(p.iter().cloned()).collect();
        let mut b: Vec<(f64, f64)> = ys.iter().cloned().zip(q.iter().cloned()).collect();
        a.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
        b.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0].1, b[0].1);
        let mut cost = 0.0;
        while i < a.len() && j < b.len() {
            let t = ra.min(rb);
            cost += t * (a[i].0 - b[j].0).abs().powi(order);
            ra -= t;
            rb -= t;
            if ra <= 1e-15 {
                i += 1;
                if i < a.len() {
                    ra = a[i].1;
                }
            }
            if rb <= 1e-15 {
                j += 1;
                if j < b.len() {
                    rb = b[j].1;
                }
            }
        }
        if order == 2 {
            cost.sqrt()
        } else {
            cost
        }
    }

    #[test]
    fn identical_measures_give_zero() {
        let p = FiniteDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let s = wasserstein(&TransportProblem::on_line(&[0.0, 1.0, 2.0], p.clone(), &[0.0, 1.0, 2.0], p, 1).unwrap())
            .unwrap();
        assert!(s.value.abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(s.coupling[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn hamming_two_point_equals_tv() {
        let p = FiniteDist::new(vec![0.3, 0.7]).unwrap();
        let q = FiniteDist::new(vec![0.6, 0.4]).unwrap();
        let s = wasserstein(&TransportProblem::hamming(p.clone(), q.clone()).unwrap()).unwrap();
        assert!((s.value - tv(&p, &q).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn line_matches_quantile_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.gen_range(1..9);
            let n = rng.gen_range(1..9);
            let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = rand_dist(&mut rng, m);
            let q = rand_dist(&mut rng, n);
            for order in [1u8, 2] {
                let s = wasserstein(&TransportProblem::on_line(&xs, p.clone(), &ys, q.clone(), order).unwrap())
                    .unwrap();
                let o = quantile_oracle(&xs, p.masses(), &ys, q.masses(), order as i32);
                assert!((s.value - o).abs() < 1e-9, "{} vs {}", s.value, o);
                assert!(s.gap.abs() < 1e-9);
                assert!(s.marginal_error < 1e-9);
            }
        }
    }

    #[test]
    fn quantile_pair_example() {
        // {0,1} uniform vs point masses shifted by 0.5
        let p = FiniteDist::uniform(2);
        let s = wasserstein(&TransportProblem::on_line(&[0.0, 1.0], p.clone(), &[0.5, 1.5], p, 1).unwrap()).unwrap();
        assert!((s.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn guard_enforced() {
        let p = FiniteDist::uniform(600);
        let q = FiniteDist::uniform(2);
        let cost = vec![vec![1.0; 2]; 600];
        assert!(wasserstein(&TransportProblem::new(p, q, cost, 1).unwrap()).is_err());
    }

    #[test]
    fn rate_distortion_floor_grows_linearly() {
        let a = w2_rate_distortion_floor(100, 1 << 20, 1.0);
        let b = w2_rate_distortion_floor(200, 1 << 40, 1.0);
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_quantization_moments() {
        let (pts, q) = quantize_gaussian(2.0, 256);
        let mean: f64 = pts.iter().zip(q.masses()).map(|(x, w)| x * w).sum();
        let var: f64 = pts.iter().zip(q.masses()).map(|(x, w)| x * x * w).sum();
        assert!(mean.abs() < 1e-9);
        assert!(var < 2.0 && var > 1.95);
        let w = w2_to_gaussian_1d(&[-1.0, 1.0], 1.0, 64).unwrap();
        assert!(w > 0.0 && w < 1.0);
    }
}
