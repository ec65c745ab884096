//! Channel models, capacity and caod solvers, dispersion and information
//! density.

use crate::divergences::{kl_slices, FiniteDist};
use crate::error::{invalid, FbError, Result};
use crate::numeric::{pairwise_sum, ExtReal};
use crate::report::{BoundReport, Dim};
use crate::space::Space;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Row-sum tolerance for stochastic matrices.
pub const ROW_TOL: f64 = 1e-12;

/// Mass threshold used to call an input letter part of the support.
pub const SUPPORT_MASS: f64 = 1e-6;

/// Discrete memoryless channel W[x][y], optionally with a per-letter cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmcSpec {
    w: Vec<Vec<f64>>,
    cost: Option<Vec<f64>>,
    budget: Option<f64>,
}

impl DmcSpec {
    pub fn new(w: Vec<Vec<f64>>, cost: Option<Vec<f64>>, budget: Option<f64>) -> Result<Self> {
        if w.is_empty() || w[0].is_empty() {
            return invalid("channel matrix is empty");
        }
        let ny = w[0].len();
        for (x, row) in w.iter().enumerate() {
            if row.len() != ny {
                return invalid(format!("row {x} has {} entries, expected {ny}", row.len()));
            }
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return invalid(format!("negative probability in row {x}"));
            }
            if (pairwise_sum(row) - 1.0).abs() > ROW_TOL {
                return invalid(format!("row {x} not stochastic"));
            }
        }
        match (&cost, budget) {
            (None, None) => {}
            (Some(c), Some(b)) => {
                if c.len() != w.len() {
                    return Err(FbError::Dimension(c.len(), w.len()));
                }
                if c.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return invalid("costs must be finite and nonnegative");
                }
                if !(b >= 0.0) || !b.is_finite() {
                    return invalid("budget must be finite and nonnegative");
                }
            }
            (None, Some(_)) => return invalid("budget without cost"),
            (Some(_), None) => return invalid("cost without budget"),
        }
        Ok(DmcSpec { w, cost, budget })
    }

    /// Binary symmetric channel with crossover `delta`.
    pub fn bsc(delta: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - delta, delta], vec![delta, 1.0 - delta]], None, None)
    }

    /// Binary erasure channel; output 2 is the erasure.
    pub fn bec(e: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]], None, None)
    }

    /// Identity channel on k letters.
    pub fn noiseless(k: usize) -> Self {
        let w = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        DmcSpec {
            w,
            cost: None,
            budget: None,
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.len()
    }

    pub fn output_size(&self) -> usize {
        self.w[0].len()
    }

    pub fn w(&self, x: usize, y: usize) -> f64 {
        self.w[x][y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn cost(&self) -> Option<&[f64]> {
        self.cost.as_deref()
    }

    pub fn budget(&self) -> Option<f64> {
        self.budget
    }

    pub fn row_dist(&self, x: usize) -> FiniteDist {
        FiniteDist::from_trusted(self.w[x].clone())
    }

    /// Output distribution induced by input masses `px`.
    pub fn output_of(&self, px: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.output_size()];
        for (x, &p) in px.iter().enumerate() {
            if p > 0.0 {
                for (y, &w) in self.w[x].iter().enumerate() {
                    q[y] += p * w;
                }
            }
        }
        q
    }

    /// True if some reachable output has zero probability under some input
    /// (C₁ = ∞ in the Lipschitz sense).
    pub fn has_zero_in_used_column(&self) -> bool {
        (0..self.output_size()).any(|y| {
            let col: Vec<f64> = self.w.iter().map(|r| r[y]).collect();
            col.iter().any(|&p| p > 0.0) && col.iter().any(|&p| p == 0.0)
        })
    }

    /// Same transition matrix without cost constraint.
    pub fn unconstrained(&self) -> DmcSpec {
        DmcSpec {
            w: self.w.clone(),
            cost: None,
            budget: None,
        }
    }
}

/// AWGN channel with per-dimension power `power` and unit noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AwgnSpec {
    pub power: f64,
}

impl AwgnSpec {
    pub fn new(power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return invalid("AWGN power must be finite and positive");
        }
        Ok(AwgnSpec { power })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Channel {
    Dmc(DmcSpec),
    Awgn(AwgnSpec),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ChannelFile {
    Dmc {
        #[serde(rename = "W")]
        w: Vec<Vec<f64>>,
        cost: Option<Vec<f64>>,
        budget: Option<f64>,
    },
    Awgn {
        power: f64,
    },
    Bsc {
        delta: f64,
    },
    Bec {
        erasure: f64,
    },
}

impl Channel {
    /// Parse the JSON channel format.
    pub fn from_json(s: &str) -> Result<Self> {
        let f: ChannelFile = serde_json::from_str(s)?;
        match f {
            ChannelFile::Dmc { w, cost, budget } => Ok(Channel::Dmc(DmcSpec::new(w, cost, budget)?)),
            ChannelFile::Awgn { power } => Ok(Channel::Awgn(AwgnSpec::new(power)?)),
            ChannelFile::Bsc { delta } => {
                if !(0.0..=1.0).contains(&delta) {
                    return invalid("delta must lie in [0,1]");
                }
                Ok(Channel::Dmc(DmcSpec::bsc(delta)?))
            }
            ChannelFile::Bec { erasure } => {
                if !(0.0..=1.0).contains(&erasure) {
                    return invalid("erasure must lie in [0,1]");
                }
                Ok(Channel::Dmc(DmcSpec::bec(erasure)?))
            }
        }
    }

    pub fn as_dmc(&self) -> Result<&DmcSpec> {
        match self {
            Channel::Dmc(d) => Ok(d),
            Channel::Awgn(_) => invalid("operation requires a DMC"),
        }
    }

    pub fn as_awgn(&self) -> Result<&AwgnSpec> {
        match self {
            Channel::Awgn(a) => Ok(a),
            Channel::Dmc(_) => invalid("operation requires an AWGN channel"),
        }
    }
}

/// Load and validate a channel file.
pub fn load_channel(path: &Path) -> Result<Channel> {
    Channel::from_json(&std::fs::read_to_string(path)?)
}

/// Capacity-achieving output distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Caod {
    Finite { masses: FiniteDist },
    Gaussian { variance: f64 },
}

/// Result of a capacity computation; all log quantities in nats.
#[derive(Clone, Debug, Serialize)]
pub struct CapacitySolution {
    pub capacity: f64,
    pub input_dist: Option<FiniteDist>,
    pub caod: Caod,
    /// Dispersion V (nats²).
    pub dispersion: f64,
    /// d(x) = D(W_x ‖ P_Y*).
    pub d_per_input: Vec<f64>,
    /// a₁ = max_x Var[i(x;Y) | X = x].
    pub a1: f64,
    /// Certified optimality gap (upper − lower sandwich).
    pub gap: f64,
    pub iterations: usize,
    /// Lagrange multiplier of the cost constraint, if active.
    pub lambda: Option<f64>,
}

impl CapacitySolution {
    /// Finite caod masses (DMC only).
    pub fn caod_masses(&self) -> Result<&[f64]> {
        match &self.caod {
            Caod::Finite { masses } => Ok(masses.masses()),
            Caod::Gaussian { .. } => invalid("Gaussian caod has no finite masses"),
        }
    }
}

struct BaState {
    p: Vec<f64>,
    q: Vec<f64>,
    d: Vec<f64>,
    iters: usize,
}

fn divergences_to(dmc: &DmcSpec, q: &[f64]) -> Vec<f64> {
    (0..dmc.input_size())
        .map(|x| kl_slices(dmc.row(x), q).value())
        .collect()
}

/// Blahut–Arimoto for max_p Σ p_x (d_x − λ c_x), started from `p0`.
fn ba_inner(
    dmc: &DmcSpec,
    weights: &[f64],
    p0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<BaState> {
    let mut p = p0;
    let mut iters = 0;
    loop {
        let q = dmc.output_of(&p);
        let d = divergences_to(dmc, &q);
        let score: Vec<f64> = d.iter().zip(weights).map(|(a, b)| a - b).collect();
        let lower = pairwise_sum(&p.iter().zip(&score).map(|(a, b)| a * b).collect::<Vec<_>>());
        let upper = score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tol {
            return Ok(BaState { p, q, d, iters });
        }
        if iters >= max_iter {
            return Err(FbError::NoConvergence {
                iters,
                gap: upper - lower,
            });
        }
        let m = upper;
        let mut z = 0.0;
        for (px, s) in p.iter_mut().zip(&score) {
            *px *= (s - m).exp();
            z += *px;
        }
        for px in p.iter_mut() {
            *px /= z;
        }
        iters += 1;
    }
}

/// Capacity by Blahut–Arimoto with a certified sandwich gap.
///
/// Cost-constrained channels use bisection on the Lagrange multiplier; the
/// multiplier is reported in the solution.
pub fn blahut_arimoto(dmc: &DmcSpec, tol: f64, max_iter: usize) -> Result<CapacitySolution> {
    if !(tol > 0.0) {
        return invalid("tol must be positive");
    }
    let k = dmc.input_size();
    let uniform = vec![1.0 / k as f64; k];
    let zero = vec![0.0; k];
    let (state, lambda, gap) = match (dmc.cost(), dmc.budget()) {
        (Some(cost), Some(budget)) => {
            let cmin = cost.iter().cloned().fold(f64::INFINITY, f64::min);
            if budget < cmin - 1e-12 {
                return Err(FbError::Infeasible(format!(
                    "budget {budget} below minimum cost {cmin}"
                )));
            }
            constrained(dmc, cost, budget, tol, max_iter)?
        }
        _ => {
            let s = ba_inner(dmc, &zero, uniform, tol, max_iter)?;
            let lower = dot(&s.p, &s.d);
            let upper = s.d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let gap = upper - lower;
            (s, None, gap)
        }
    };
    let capacity = dot(&state.p, &state.d);
    let variances = conditional_variances(dmc, &state.q);
    let dispersion = dot(&state.p, &variances);
    let a1 = variances.iter().cloned().fold(0.0, f64::max);
    Ok(CapacitySolution {
        capacity,
        input_dist: Some(FiniteDist::from_trusted(state.p)),
        caod: Caod::Finite {
            masses: FiniteDist::from_trusted(state.q),
        },
        dispersion,
        d_per_input: state.d,
        a1,
        gap,
        iterations: state.iters,
        lambda,
    })
}

/// Σ a_i b_i over a_i > 0 (so 0·∞ terms vanish).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum(
        &a.iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * y)
            .collect::<Vec<_>>(),
    )
}

type Constrained = (BaState, Option<f64>, f64);

fn constrained(dmc: &DmcSpec, cost: &[f64], budget: f64, tol: f64, max_iter: usize) -> Result<Constrained> {
    let k = dmc.input_size();
    let cmin = cost.iter().cloned().fold(f64::INFINITY, f64::min);
    if budget <= cmin + 1e-12 {
        // only minimum-cost letters are admissible
        let allowed: Vec<usize> = (0..k).filter(|&x| cost[x] <= cmin + 1e-12).collect();
        let mut p0 = vec![0.0; k];
        for &x in &allowed {
            p0[x] = 1.0 / allowed.len() as f64;
        }
        let weights: Vec<f64> = (0..k)
            .map(|x| if p0[x] > 0.0 { 0.0 } else { f64::INFINITY })
            .collect();
        let s = ba_restricted(dmc, &weights, p0, tol, max_iter)?;
        let upper = allowed.iter().map(|&x| s.d[x]).fold(f64::NEG_INFINITY, f64::max);
        let gap = upper - dot(&s.p, &s.d);
        return Ok((s, None, gap));
    }
    let zero = vec![0.0; k];
    let uniform = vec![1.0 / k as f64; k];
    let free = ba_inner(dmc, &zero, uniform.clone(), tol, max_iter)?;
    if dot(&free.p, cost) <= budget {
        let upper = free.d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gap = upper - dot(&free.p, &free.d);
        return Ok((free, Some(0.0), gap));
    }
    let solve = |lam: f64, p0: Vec<f64>| {
        let w: Vec<f64> = cost.iter().map(|c| lam * c).collect();
        ba_inner(dmc, &w, p0, tol, max_iter)
    };
    let mut hi = 1.0;
    let mut s_hi = solve(hi, uniform.clone())?;
    while dot(&s_hi.p, cost) > budget {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(FbError::Infeasible("Lagrange multiplier diverged".into()));
        }
        s_hi = solve(hi, s_hi.p.clone())?;
    }
    let mut lo = 0.0;
    let mut best = s_hi;
    let mut lam = hi;
    for _ in 0..200 {
        let ec = dot(&best.p, cost);
        if ec <= budget && budget - ec <= 1e-9 * budget.max(1e-300) {
            break;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let s = solve(mid, best.p.clone())?;
        if dot(&s.p, cost) > budget {
            lo = mid;
        } else {
            hi = mid;
            lam = mid;
            best = s;
        }
    }
    let upper = (0..k)
        .map(|x| best.d[x] - lam * cost[x])
        .fold(f64::NEG_INFINITY, f64::max)
        + lam * budget;
    let gap = upper - dot(&best.p, &best.d);
    Ok((best, Some(lam), gap))
}

/// BA on a subset of letters (weights +∞ exclude a letter).
fn ba_restricted(dmc: &DmcSpec, weights: &[f64], p0: Vec<f64>, tol: f64, max_iter: usize) -> Result<BaState> {
    let mut p = p0;
    let mut iters = 0;
    loop {
        let q = dmc.output_of(&p);
        let d = divergences_to(dmc, &q);
        let active: Vec<usize> = (0..p.len()).filter(|&x| weights[x].is_finite()).collect();
        let lower: f64 = active.iter().map(|&x| p[x] * d[x]).sum();
        let upper = active.iter().map(|&x| d[x]).fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tol {
            return Ok(BaState { p, q, d, iters });
        }
        if iters >= max_iter {
            return Err(FbError::NoConvergence {
                iters,
                gap: upper - lower,
            });
        }
        let mut z = 0.0;
        for &x in &active {
            p[x] *= (d[x] - upper).exp();
            z += p[x];
        }
        for &x in &active {
            p[x] /= z;
        }
        iters += 1;
    }
}

/// Var[log W(Y|x)/q(Y) | X = x] for each input letter.
pub fn conditional_variances(dmc: &DmcSpec, q: &[f64]) -> Vec<f64> {
    (0..dmc.input_size())
        .map(|x| {
            let row = dmc.row(x);
            let lr: Vec<f64> = row
                .iter()
                .zip(q)
                .map(|(&w, &qy)| if w > 0.0 { (w / qy).ln() } else { 0.0 })
                .collect();
            let mean: f64 = row.iter().zip(&lr).map(|(w, l)| w * l).sum();
            row.iter()
                .zip(&lr)
                .map(|(w, l)| w * (l - mean) * (l - mean))
                .sum::<f64>()
                .max(0.0)
        })
        .collect()
}

/// Conditional-variance dispersion Σ_x P_X*(x) Var[i(x;Y)|X=x] (nats²).
pub fn dmc_dispersion(dmc: &DmcSpec, sol: &CapacitySolution) -> Result<f64> {
    let q = sol.caod_masses()?;
    let p = sol
        .input_dist
        .as_ref()
        .ok_or_else(|| FbError::Invalid("solution has no input distribution".into()))?;
    Ok(dot(p.masses(), &conditional_variances(dmc, q)))
}

/// AWGN capacity ½ln(1+P) and dispersion P(P+2)/(2(P+1)²), in nats.
pub fn awgn_capacity_dispersion(spec: &AwgnSpec) -> (f64, f64) {
    let p = spec.power;
    let c = 0.5 * p.ln_1p();
    let v = p * (p + 2.0) / (2.0 * (p + 1.0) * (p + 1.0));
    (c, v)
}

/// Capacity solution for an AWGN channel.
pub fn awgn_solution(spec: &AwgnSpec) -> CapacitySolution {
    let (c, v) = awgn_capacity_dispersion(spec);
    CapacitySolution {
        capacity: c,
        input_dist: None,
        caod: Caod::Gaussian {
            variance: 1.0 + spec.power,
        },
        dispersion: v,
        d_per_input: Vec::new(),
        a1: v,
        gap: 0.0,
        iterations: 0,
        lambda: None,
    }
}

/// Solve any channel: BA for a DMC, closed form for AWGN.
pub fn solve(channel: &Channel, tol: f64, max_iter: usize) -> Result<CapacitySolution> {
    match channel {
        Channel::Dmc(d) => blahut_arimoto(d, tol, max_iter),
        Channel::Awgn(a) => Ok(awgn_solution(a)),
    }
}

/// D(N(x, I_n) ‖ N(0, (1+P) I_n)) in nats.
pub fn awgn_conditional_kl(x: &[f64], power: f64) -> f64 {
    let n = x.len() as f64;
    let s: f64 = x.iter().map(|v| v * v).sum();
    0.5 * n * power.ln_1p() + 0.5 * (s + n) / (1.0 + power) - 0.5 * n
}

/// Information density Σ_j log W(y_j|x_j)/P_Y*(y_j) for a DMC.
pub fn information_density_dmc(dmc: &DmcSpec, caod: &[f64], x: &[usize], y: &[usize]) -> Result<ExtReal> {
    if x.len() != y.len() {
        return Err(FbError::Dimension(x.len(), y.len()));
    }
    let mut acc = ExtReal::ZERO;
    for (&a, &b) in x.iter().zip(y) {
        if a >= dmc.input_size() || b >= dmc.output_size() {
            return invalid("symbol out of range");
        }
        let w = dmc.w(a, b);
        if w == 0.0 {
            return Ok(ExtReal::NegInf);
        }
        if caod[b] <= 0.0 {
            return Err(FbError::Precondition(format!("output {b} has zero caod mass")));
        }
        acc = acc + ExtReal::Finite((w / caod[b]).ln());
    }
    Ok(acc)
}

/// Gaussian information density log N(y; x, I)/N(y; 0, (1+P)I).
pub fn information_density_awgn(spec: &AwgnSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(FbError::Dimension(x.len(), y.len()));
    }
    let p = spec.power;
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| 0.5 * p.ln_1p() - 0.5 * (b - a) * (b - a) + 0.5 * b * b / (1.0 + p))
        .sum())
}

/// Checks d(x) ≤ C (plus the Lagrangian correction under a cost) and reports
/// the KKT equality slack on the support and a₁.
pub fn caod_audit(channel: &Channel, sol: &CapacitySolution, tol: f64) -> Result<BoundReport> {
    match channel {
        Channel::Dmc(dmc) => {
            let lam = sol.lambda.unwrap_or(0.0);
            let (cost, budget) = match (dmc.cost(), dmc.budget()) {
                (Some(c), Some(b)) => (c.to_vec(), b),
                _ => (vec![0.0; dmc.input_size()], 0.0),
            };
            let adj: Vec<f64> = (0..dmc.input_size())
                .map(|x| sol.d_per_input[x] - lam * (cost[x] - budget))
                .collect();
            let maxd = adj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let px = sol.input_dist.as_ref().map(|p| p.masses().to_vec()).unwrap_or_default();
            let kkt = (0..dmc.input_size())
                .filter(|&x| px.get(x).copied().unwrap_or(0.0) >= SUPPORT_MASS)
                .map(|x| (adj[x] - sol.capacity).abs())
                .fold(0.0, f64::max);
            Ok(BoundReport::le("caod-property", maxd, sol.capacity + tol, Dim::Log)
                .with("C", sol.capacity, Dim::Log)
                .with("max_d_minus_C", maxd - sol.capacity, Dim::Log)
                .with("kkt_equality_slack", kkt, Dim::Log)
                .with("support_mass_threshold", SUPPORT_MASS, Dim::Plain)
                .with("a1", sol.a1, Dim::LogSq)
                .with("lambda", lam, Dim::Plain)
                .with("gap", sol.gap, Dim::Log))
        }
        Channel::Awgn(a) => {
            // worst admissible input sits on the power sphere; per letter
            let d = awgn_conditional_kl(&[a.power.sqrt()], a.power);
            Ok(BoundReport::le("caod-property", d, sol.capacity + tol, Dim::Log)
                .with("C", sol.capacity, Dim::Log)
                .with("max_d_minus_C", d - sol.capacity, Dim::Log)
                .with("a1", sol.a1, Dim::LogSq))
        }
    }
}

/// Lazily evaluated n-fold product of a finite distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductDist {
    pub base: FiniteDist,
    pub n: usize,
}

impl ProductDist {
    pub fn new(base: FiniteDist, n: usize) -> Self {
        ProductDist { base, n }
    }

    /// Mass of the word `ys`.
    pub fn mass(&self, ys: &[usize]) -> f64 {
        ys.iter().map(|&y| self.base.mass(y)).product()
    }

    /// Materialize over the mixed-radix space.
    pub fn enumerate(&self, guard: u64) -> Result<FiniteDist> {
        let sp = Space::new(self.base.len(), self.n, guard)?;
        Ok(FiniteDist::from_trusted(product_masses(self.base.masses(), self.n, sp.size)))
    }
}

/// Masses of the n-fold product in little-endian mixed-radix order.
pub fn product_masses(base: &[f64], n: usize, size: usize) -> Vec<f64> {
    let mut v = vec![1.0];
    v.reserve(size);
    for _ in 0..n {
        // new coordinate is the most significant
        let mut next = Vec::with_capacity(v.len() * base.len());
        for &b in base {
            for &x in &v {
                next.push(x * b);
            }
        }
        v = next;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::h2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn load_examples() {
        let ch = Channel::from_json(r#"{"type":"bsc","delta":0.11}"#).unwrap();
        assert_eq!(ch.as_dmc().unwrap().matrix(), &[vec![0.89, 0.11], vec![0.11, 0.89]]);
        let ch = Channel::from_json(r#"{"type":"awgn","power":1.0}"#).unwrap();
        assert_eq!(ch, Channel::Awgn(AwgnSpec { power: 1.0 }));
        let e = Channel::from_json(r#"{"type":"dmc","W":[[0.5,0.47],[0.5,0.5]]}"#).unwrap_err();
        assert!(e.to_string().contains("row 0 not stochastic"), "{e}");
        let e = Channel::from_json(r#"{"type":"dmc","W":[[1.5,-0.5],[0.5,0.5]]}"#).unwrap_err();
        assert!(e.to_string().contains("negative probability"));
        let e = Channel::from_json(r#"{"type":"dmc","W":[[1,0],[0,1]],"budget":1}"#).unwrap_err();
        assert!(e.to_string().contains("budget without cost"));
        assert!(Channel::from_json("{not json").is_err());
    }

    #[test]
    fn bsc_capacity_and_dispersion() {
        let d = 0.11;
        let sol = blahut_arimoto(&DmcSpec::bsc(d).unwrap(), 1e-9, 100_000).unwrap();
        let c = 1.0 - h2(d) / LN2;
        assert!((sol.capacity / LN2 - c).abs() < 1e-8);
        assert!((c - 0.500084).abs() < 1e-6);
        let q = sol.caod_masses().unwrap();
        assert!((q[0] - 0.5).abs() < 1e-12);
        let v = d * (1.0 - d) * ((1.0 - d) / d).log2().powi(2);
        assert!((sol.dispersion / (LN2 * LN2) - v).abs() < 1e-9);
        assert!((v - 0.8907).abs() < 1e-4);
        assert!((sol.a1 / (LN2 * LN2) - v).abs() < 1e-9);
    }

    #[test]
    fn noiseless_and_bec() {
        let sol = blahut_arimoto(&DmcSpec::noiseless(2), 1e-9, 1000).unwrap();
        assert!((sol.capacity / LN2 - 1.0).abs() < 1e-9);
        assert!(sol.dispersion.abs() < 1e-15);
        let p = sol.input_dist.unwrap();
        assert!((p.mass(0) - 0.5).abs() < 1e-12);
        let sol = blahut_arimoto(&DmcSpec::bec(0.5).unwrap(), 1e-9, 1000).unwrap();
        assert!((sol.capacity / LN2 - 0.5).abs() < 1e-8);
        assert!((sol.dispersion / (LN2 * LN2) - 0.25).abs() < 1e-8);
    }

    #[test]
    fn awgn_values() {
        let (c, v) = awgn_capacity_dispersion(&AwgnSpec::new(1.0).unwrap());
        assert!((c / LN2 - 0.5).abs() < 1e-15);
        let want = std::f64::consts::LOG2_E.powi(2) / 2.0 * 0.75;
        assert!((v / (LN2 * LN2) - want).abs() < 1e-12);
        assert!((v / (LN2 * LN2) - 0.78051).abs() < 1e-5);
        let (c, v) = awgn_capacity_dispersion(&AwgnSpec::new(1e-6).unwrap());
        assert!((c / LN2 - std::f64::consts::LOG2_E / 2.0 * 1e-6).abs() < 1e-12);
        assert!(v < 1e-5);
    }

    #[test]
    fn awgn_closed_form_kl() {
        let p = 1.0;
        let n = 16;
        let c = 0.5 * (1.0f64 + p).ln();
        let x = vec![1.0; n];
        assert!((awgn_conditional_kl(&x, p) - n as f64 * c).abs() < 1e-12);
        assert!(awgn_conditional_kl(&vec![0.5; n], p) < n as f64 * c);
    }

    #[test]
    fn information_density_examples() {
        let dmc = DmcSpec::bsc(0.11).unwrap();
        let q = [0.5, 0.5];
        let i = information_density_dmc(&dmc, &q, &[0], &[0]).unwrap().value() / LN2;
        assert!((i - 1.78f64.log2()).abs() < 1e-14);
        assert!((i - 0.8319).abs() < 1e-4);
        let i = information_density_dmc(&dmc, &q, &[0], &[1]).unwrap().value() / LN2;
        assert!((i - (-2.1844)).abs() < 1e-4);
        assert_eq!(information_density_dmc(&dmc, &q, &[], &[]).unwrap(), ExtReal::ZERO);
        let bec = DmcSpec::bec(0.5).unwrap();
        let i = information_density_dmc(&bec, &[0.25, 0.25, 0.5], &[0], &[1]).unwrap();
        assert_eq!(i, ExtReal::NegInf);
    }

    #[test]
    fn expected_density_equals_divergence() {
        let dmc = DmcSpec::new(
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.6, 0.3], vec![0.3, 0.3, 0.4]],
            None,
            None,
        )
        .unwrap();
        let sol = blahut_arimoto(&dmc, 1e-10, 100_000).unwrap();
        let q = sol.caod_masses().unwrap().to_vec();
        for x in 0..3 {
            let e: f64 = (0..3)
                .map(|y| dmc.w(x, y) * information_density_dmc(&dmc, &q, &[x], &[y]).unwrap().value())
                .sum();
            assert!((e - sol.d_per_input[x]).abs() < 1e-9);
        }
    }

    #[test]
    fn audit_passes_with_unused_letter() {
        // third letter is a strictly worse mixture
        let dmc = DmcSpec::new(
            vec![vec![0.95, 0.05], vec![0.05, 0.95], vec![0.5, 0.5]],
            None,
            None,
        )
        .unwrap();
        let sol = blahut_arimoto(&dmc, 1e-10, 100_000).unwrap();
        assert!(sol.d_per_input[2] < sol.capacity - 1e-3);
        let r = caod_audit(&Channel::Dmc(dmc), &sol, 1e-9).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn caod_unique_from_different_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w: Vec<Vec<f64>> = (0..3)
                .map(|_| {
                    let r: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.01).collect();
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect();
            let dmc = DmcSpec::new(w, None, None).unwrap();
            let tol = 1e-10;
            let a = ba_inner(&dmc, &[0.0; 3], vec![1.0 / 3.0; 3], tol, 1_000_000).unwrap();
            let b = ba_inner(&dmc, &[0.0; 3], vec![0.6, 0.3, 0.1], tol, 1_000_000).unwrap();
            let t: f64 = a.q.iter().zip(&b.q).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
            // caod is unique; a gap of tol pins it down to O(sqrt(tol))
            assert!(t < 1e-4, "tv {t}");
        }
    }

    #[test]
    fn cost_constrained_binary() {
        // binary noiseless channel with cost on symbol 1: C(P) = h(P) for P ≤ 1/2
        let dmc = DmcSpec::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![0.0, 1.0]),
            Some(0.2),
        )
        .unwrap();
        let sol = blahut_arimoto(&dmc, 1e-10, 1_000_000).unwrap();
        assert!((sol.capacity - h2(0.2)).abs() < 1e-7, "{}", sol.capacity);
        assert!(sol.gap < 1e-7);
        let r = caod_audit(&Channel::Dmc(dmc.clone()), &sol, 1e-7).unwrap();
        assert!(r.passed());
        // inactive budget
        let loose = DmcSpec::new(dmc.matrix().to_vec(), Some(vec![0.0, 1.0]), Some(0.9)).unwrap();
        let s = blahut_arimoto(&loose, 1e-10, 100_000).unwrap();
        assert!((s.capacity - LN2).abs() < 1e-9);
        // budget at the minimum cost
        let tight = DmcSpec::new(dmc.matrix().to_vec(), Some(vec![0.0, 1.0]), Some(0.0)).unwrap();
        let s = blahut_arimoto(&tight, 1e-10, 100_000).unwrap();
        assert!(s.capacity.abs() < 1e-12);
        let bad = DmcSpec::new(dmc.matrix().to_vec(), Some(vec![0.5, 1.0]), Some(0.1)).unwrap();
        assert!(matches!(blahut_arimoto(&bad, 1e-9, 100), Err(FbError::Infeasible(_))));
    }

    #[test]
    fn product_dist_masses() {
        let base = FiniteDist::new(vec![0.3, 0.7]).unwrap();
        let pd = ProductDist::new(base, 3);
        let e = pd.enumerate(1 << 20).unwrap();
        let sp = Space::new(2, 3, 1 << 20).unwrap();
        let mut buf = [0usize; 3];
        for idx in 0..8 {
            sp.decode(idx, &mut buf);
            assert!((e.mass(idx) - pd.mass(&buf)).abs() < 1e-15);
        }
    }
}
