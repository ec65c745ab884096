//! Exact Neyman–Pearson β_α, its standard lower estimate, the
//! meta-converse and the Stein-exponent scan.

use crate::channels::{product_masses, AwgnSpec, CapacitySolution, DmcSpec};
use crate::codes::awgn::{clopper_pearson_upper, gaussian_vec, McEstimate};
use crate::codes::{exact_error, ml_decode, word_row, CodeKernel, DiscreteCode};
use crate::converses::chain_remainder;
use crate::divergences::FiniteDist;
use crate::error::{invalid, FbError, Result};
use crate::numeric::ExtReal;
use crate::report::{BoundReport, Dim, Verdict};
use crate::rng::sample_rng;
use crate::space::Space;
use rayon::prelude::*;
use serde::Serialize;

/// Relative tolerance under which two likelihood ratios are one atom.
pub const TIE_RTOL: f64 = 1e-12;
/// Largest output space for the exact branch of [`product_beta_bound`].
pub const PRODUCT_EXACT_LIMIT: usize = 4096;

/// Likelihood-ratio test: accept outcomes with log dP/dQ above
/// `threshold`, and those equal to it with probability `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NpTest {
    pub threshold: ExtReal,
    pub tau: f64,
    /// Number of merged ratio atoms accepted with probability one.
    pub atoms_accepted: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaValue {
    pub alpha: f64,
    pub beta: f64,
    pub test: NpTest,
}

#[derive(Clone, Copy, Debug)]
struct Atom {
    p: f64,
    q: f64,
    ratio: f64,
}

/// The Neyman–Pearson trade-off of a pair (P, Q): outcomes with P > 0
/// merged into equal-ratio atoms, sorted by decreasing dP/dQ.
#[derive(Clone, Debug)]
pub struct NpCurve {
    atoms: Vec<Atom>,
}

impl NpCurve {
    /// Build from (P-mass, Q-mass) pairs; pairs with zero P-mass are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Self {
        let mut v: Vec<Atom> = pairs
            .into_iter()
            .filter(|&(p, _)| p > 0.0)
            .map(|(p, q)| Atom {
                p,
                q,
                ratio: if q > 0.0 { p / q } else { f64::INFINITY },
            })
            .collect();
        v.par_sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
        let mut atoms: Vec<Atom> = Vec::with_capacity(v.len());
        for a in v {
            match atoms.last_mut() {
                Some(last) if same_ratio(last.ratio, a.ratio) => {
                    last.p += a.p;
                    last.q += a.q;
                }
                _ => atoms.push(a),
            }
        }
        NpCurve { atoms }
    }

    pub fn new(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(FbError::Dimension(p.len(), q.len()));
        }
        Ok(Self::from_pairs(p.iter().copied().zip(q.iter().copied())))
    }

    pub fn atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Breakpoints (α, β) of the piecewise-linear curve, starting at (0, 0).
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0)];
        let (mut cp, mut cq) = (0.0, 0.0);
        for a in &self.atoms {
            cp += a.p;
            cq += a.q;
            out.push((cp, cq));
        }
        out
    }

    /// β_α for α ∈ [0, 1].
    pub fn beta(&self, alpha: f64) -> BetaValue {
        let (mut cp, mut cq) = (0.0, 0.0);
        if alpha <= 0.0 {
            return BetaValue {
                alpha,
                beta: 0.0,
                test: NpTest {
                    threshold: ExtReal::PosInf,
                    tau: 0.0,
                    atoms_accepted: 0,
                },
            };
        }
        for (k, a) in self.atoms.iter().enumerate() {
            // the last atom also absorbs a rounding shortfall in the P-mass
            if cp + a.p >= alpha || k + 1 == self.atoms.len() {
                let need = alpha - cp;
                let beta = if a.q == 0.0 { cq } else { cq + need * (a.q / a.p) };
                return BetaValue {
                    alpha,
                    beta,
                    test: NpTest {
                        threshold: log_ratio(a.ratio),
                        tau: (need / a.p).min(1.0),
                        atoms_accepted: k,
                    },
                };
            }
            cp += a.p;
            cq += a.q;
        }
        // α beyond the accumulated P-mass (rounding): accept the whole support
        BetaValue {
            alpha,
            beta: cq,
            test: NpTest {
                threshold: self.atoms.last().map_or(ExtReal::NegInf, |a| log_ratio(a.ratio)),
                tau: 1.0,
                atoms_accepted: self.atoms.len(),
            },
        }
    }
}

fn same_ratio(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= TIE_RTOL * a.abs().max(b.abs()))
}

fn log_ratio(r: f64) -> ExtReal {
    if r == f64::INFINITY {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(r.ln())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha = {alpha} outside (0, 1]"));
    }
    Ok(())
}

/// Exact β_α(P, Q) with its randomized optimal test.
pub fn beta_alpha(alpha: f64, p: &FiniteDist, q: &FiniteDist) -> Result<BetaValue> {
    check_alpha(alpha)?;
    Ok(NpCurve::new(p.masses(), q.masses())?.beta(alpha))
}

/// β_{1−ε}(P,Q) ≥ (P[log dP/dQ ≤ ρ] − ε)·exp(−ρ) with ε = 1 − α.
pub fn beta_lower_bound_rho(alpha: f64, p: &FiniteDist, q: &FiniteDist, rho: f64) -> Result<BoundReport> {
    let exact = beta_alpha(alpha, p, q)?;
    let prob = rho_probability(p.masses(), q.masses(), rho);
    let eps = 1.0 - alpha;
    let bound = if rho == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        (prob - eps) * (-rho).exp()
    };
    Ok(BoundReport::ge("beta-rho-estimate", exact.beta, bound, Dim::Plain)
        .with("P[log dP/dQ <= rho]", prob, Dim::Plain)
        .with("rho", rho, Dim::Log)
        .with("eps", eps, Dim::Plain))
}

/// P[log dP/dQ(Z) ≤ ρ] for Z ~ P; outcomes with Q = 0 have ratio +∞.
pub fn rho_probability(p: &[f64], q: &[f64], rho: f64) -> f64 {
    p.iter()
        .zip(q)
        .filter(|&(&pp, &qq)| pp > 0.0 && qq > 0.0 && (pp / qq).ln() <= rho)
        .map(|(pp, _)| pp)
        .sum()
}

/// β_α(P_{Y^n|X^n=x}, P*_{Y^n}) ≥ (α/2)·exp{−nC − √(2a₁n/α)}, with the
/// exact β when the output space has at most [`PRODUCT_EXACT_LIMIT`] points.
pub fn product_beta_bound(alpha: f64, dmc: &DmcSpec, sol: &CapacitySolution, x: &[usize]) -> Result<BoundReport> {
    check_alpha(alpha)?;
    if x.iter().any(|&s| s >= dmc.input_size()) {
        return invalid("input symbol out of range");
    }
    let n = x.len();
    let rhs = product_rhs(alpha, sol.capacity, sol.a1, n);
    let exact = Space::new(dmc.output_size(), n, PRODUCT_EXACT_LIMIT as u64).ok();
    match exact {
        Some(sp) => {
            let p = word_row(dmc, x);
            let q = product_masses(sol.caod_masses()?, n, sp.size);
            let b = NpCurve::new(&p, &q)?.beta(alpha);
            Ok(BoundReport::ge("product-beta", b.beta, rhs, Dim::Plain)
                .with("n", n as f64, Dim::Plain)
                .with("C", sol.capacity, Dim::Log)
                .with("a1", sol.a1, Dim::LogSq))
        }
        None => Ok(BoundReport::ge("product-beta", f64::NAN, rhs, Dim::Plain)
            .verdict(Verdict::FormulaOnly)
            .with("n", n as f64, Dim::Plain)
            .note("output space above the exact limit; bound only")),
    }
}

fn product_rhs(alpha: f64, c: f64, a1: f64, n: usize) -> f64 {
    let n = n as f64;
    alpha / 2.0 * (-n * c - (2.0 * a1 * n / alpha).sqrt()).exp()
}

/// Monte Carlo version of [`product_beta_bound`] for AWGN. Draws under
/// P_{Y^n|X^n=x} pick a threshold γ whose 99.5% upper power limit is at
/// most α; an independent stream then estimates Q[log dP/dQ ≥ γ] by
/// importance weighting exp(−log dP/dQ). Since β_α is non-decreasing, the
/// lower confidence limit of that estimate is a lower limit for β_α.
pub fn product_beta_bound_awgn(alpha: f64, spec: &AwgnSpec, x: &[f64], samples: usize, seed: u64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    if samples < 1000 {
        return invalid("at least 1000 samples required");
    }
    let n = x.len();
    let pw = spec.power;
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy > n as f64 * pw * (1.0 + 1e-9) {
        return invalid("input violates the power constraint");
    }
    let (c, v) = crate::channels::awgn_capacity_dispersion(spec);
    let rhs = product_rhs(alpha, c, v, n);
    let llr = |stream: u64| -> Vec<f64> {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = sample_rng(seed, stream, i as u64);
                let z = gaussian_vec(&mut rng, n);
                let zz: f64 = z.iter().map(|t| t * t).sum();
                let yy: f64 = x.iter().zip(&z).map(|(a, b)| (a + b) * (a + b)).sum();
                -zz / 2.0 + yy / (2.0 * (1.0 + pw)) + 0.5 * n as f64 * (1.0 + pw).ln()
            })
            .collect()
    };
    let mut first = llr(0);
    first.sort_by(|a, b| b.total_cmp(a));
    // largest k with upper power limit ≤ α
    let mut k = 0;
    while k < samples && clopper_pearson_upper(k + 1, samples, 0.005) <= alpha {
        k += 1;
    }
    if k == 0 {
        return Ok(BoundReport::ge("product-beta-mc", f64::NAN, rhs, Dim::Plain)
            .verdict(Verdict::Inconclusive)
            .note("too few samples to fix a threshold"));
    }
    let gamma = first[k - 1];
    let second = llr(1);
    let w: Vec<f64> = second.iter().map(|&l| if l >= gamma { (-l).exp() } else { 0.0 }).collect();
    let est = McEstimate::of_mean(&w);
    let lo = est.ci_lo;
    let verdict = if lo >= rhs { Verdict::Pass } else { Verdict::Inconclusive };
    Ok(BoundReport::ge("product-beta-mc", lo, rhs, Dim::Plain)
        .verdict(verdict)
        .with("beta_estimate", est.mean, Dim::Plain)
        .with("beta_ci_hi", est.ci_hi, Dim::Plain)
        .with("gamma", gamma, Dim::Log)
        .with("power_upper", clopper_pearson_upper(k, samples, 0.005), Dim::Plain)
        .with("samples", samples as f64, Dim::Plain)
        .note("lhs is the 99% lower confidence limit of beta"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Avg,
    Max,
}

/// Everything the meta-converse needs about one code.
pub struct MetaInput<'a> {
    pub kernel: &'a CodeKernel,
    /// Induced output P_Y.
    pub output: &'a [f64],
    pub q: &'a [f64],
    pub eps_avg: f64,
    pub eps_max: f64,
}

/// β_α(P_Y,Q_Y) ≥ M·β_{α−ε}(P_{XY}, P_X Q_Y) (avg) or
/// β_α(P_Y,Q_Y) ≥ δ/(1−α+δ)·M·min_i β_{α−ε−δ}(P_{Y|X=c_i}, Q_Y) (max).
pub fn metaconverse_exact(inp: &MetaInput, alpha: f64, variant: Variant, delta: f64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    let m = inp.kernel.m();
    let mf = m as f64;
    let lhs = NpCurve::new(inp.output, inp.q)?.beta(alpha).beta;
    match variant {
        Variant::Avg => {
            let eps = inp.eps_avg;
            if alpha < eps - 1e-15 {
                return invalid("alpha below the code error");
            }
            let joint = NpCurve::from_pairs(
                inp.kernel
                    .rows
                    .iter()
                    .flat_map(|r| r.iter().zip(inp.q).map(|(&p, &q)| (p / mf, q / mf))),
            );
            let inner = joint.beta((alpha - eps).max(0.0)).beta;
            Ok(BoundReport::ge("metaconverse-avg", lhs, mf * inner, Dim::Plain)
                .with("eps", eps, Dim::Plain)
                .with("alpha", alpha, Dim::Plain)
                .with("M", mf, Dim::Plain)
                .with("beta_joint", inner, Dim::Plain))
        }
        Variant::Max => {
            let eps = inp.eps_max;
            if !(delta > 0.0) {
                return invalid("delta must be positive");
            }
            if alpha < eps + delta - 1e-15 {
                return invalid("alpha below eps + delta");
            }
            let a = (alpha - eps - delta).max(0.0);
            let inner = inp
                .kernel
                .rows
                .iter()
                .map(|r| NpCurve::from_pairs(r.iter().copied().zip(inp.q.iter().copied())).beta(a).beta)
                .fold(f64::INFINITY, f64::min);
            let pref = delta / (1.0 - alpha + delta);
            Ok(BoundReport::ge("metaconverse-max", lhs, pref * mf * inner, Dim::Plain)
                .with("eps", eps, Dim::Plain)
                .with("alpha", alpha, Dim::Plain)
                .with("delta", delta, Dim::Plain)
                .with("M", mf, Dim::Plain)
                .with("prefactor", pref, Dim::Plain)
                .with("min_beta_row", inner, Dim::Plain))
        }
    }
}

/// Meta-converse for a DMC code against an auxiliary Q over Y^n; ε is the
/// exact ML error of the code.
pub fn metaconverse(
    dmc: &DmcSpec,
    code: &DiscreteCode,
    q: &[f64],
    alpha: f64,
    variant: Variant,
    delta: f64,
    guard: u64,
) -> Result<BoundReport> {
    let kernel = CodeKernel::new(dmc, code, guard)?;
    if q.len() != kernel.space.size {
        return Err(FbError::Dimension(q.len(), kernel.space.size));
    }
    let dec = ml_decode(dmc, code, guard)?;
    let (eps_avg, eps_max) = exact_error(&kernel, &dec);
    let output = kernel.output();
    metaconverse_exact(
        &MetaInput {
            kernel: &kernel,
            output: &output,
            q,
            eps_avg,
            eps_max,
        },
        alpha,
        variant,
        delta,
    )
}

/// β_α(P_{Y^n}, P*_{Y^n}) against (M/2)^{1/α}·exp{−(nC + a√n)/α}, where a√n
/// is the explicit output-divergence remainder at the code's exact max
/// error. Reports −(1/n)log β and the a₂ that would make
/// β ≥ M·exp{−nC − a₂√n} tight.
pub fn stein_scan(dmc: &DmcSpec, sol: &CapacitySolution, code: &DiscreteCode, alpha: f64, guard: u64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    let kernel = CodeKernel::new(dmc, code, guard)?;
    let dec = ml_decode(dmc, code, guard)?;
    let (_, eps) = exact_error(&kernel, &dec);
    let py = kernel.output();
    let q = product_masses(sol.caod_masses()?, code.n, kernel.space.size);
    let beta = NpCurve::new(&py, &q)?.beta(alpha).beta;
    let n = code.n as f64;
    let m = code.m() as f64;
    let proxy = if n > 0.0 { -beta.ln() / n } else { 0.0 };
    let a2_req = if n > 0.0 { (m.ln() - n * sol.capacity - beta.ln()) / n.sqrt() } else { f64::NAN };
    let base = BoundReport::ge("stein-beta-weak", beta, f64::NAN, Dim::Plain);
    let rep = match chain_remainder(dmc, code.n, eps) {
        Ok(rem) if eps < 1.0 => {
            let rhs = ((m / 2.0).ln() / alpha - (n * sol.capacity + rem) / alpha).exp();
            BoundReport::ge("stein-beta-weak", beta, rhs, Dim::Plain).with("a_sqrt_n", rem, Dim::Log)
        }
        _ => base.verdict(Verdict::FormulaOnly).note("remainder unavailable (zero transition or eps = 1)"),
    };
    Ok(rep
        .with("eps_max", eps, Dim::Plain)
        .with("alpha", alpha, Dim::Plain)
        .with("stein_proxy", proxy, Dim::Log)
        .with("a2_required", a2_req, Dim::Log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(v: &[f64]) -> FiniteDist {
        FiniteDist::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_hypotheses() {
        let p = fd(&[0.2, 0.3, 0.5]);
        for a in [0.1, 0.5, 0.9, 1.0] {
            assert_eq!(beta_alpha(a, &p, &p).unwrap().beta, a);
        }
    }

    #[test]
    fn two_point_example() {
        let b = beta_alpha(0.5, &fd(&[0.5, 0.5]), &fd(&[0.25, 0.75])).unwrap();
        assert_eq!(b.beta, 0.25);
        assert_eq!(b.test.tau, 1.0);
        let r = beta_lower_bound_rho(0.5, &fd(&[0.5, 0.5]), &fd(&[0.25, 0.75]), 2f64.ln()).unwrap();
        // the ratio-2 atom sits exactly at rho, so the probability is 1
        assert!(r.passed());
        assert!((r.rhs - 0.25).abs() < 1e-15);
        let r = beta_lower_bound_rho(0.5, &fd(&[0.5, 0.5]), &fd(&[0.25, 0.75]), 0.5).unwrap();
        assert!(r.rhs.abs() < 1e-15 && r.passed());
    }

    #[test]
    fn disjoint_and_q_null() {
        let p = fd(&[0.5, 0.5, 0.0]);
        let q = fd(&[0.0, 0.0, 1.0]);
        for a in [0.1, 0.7, 1.0] {
            assert_eq!(beta_alpha(a, &p, &q).unwrap().beta, 0.0);
        }
        // Q-null outcome is consumed first
        let b = beta_alpha(0.4, &fd(&[0.4, 0.6]), &fd(&[0.0, 1.0])).unwrap();
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.test.threshold, ExtReal::PosInf);
        assert!(beta_alpha(0.0, &p, &q).is_err());
    }

    #[test]
    fn ties_merge() {
        let c = NpCurve::new(&[0.1, 0.2, 0.3, 0.4], &[0.05, 0.1, 0.6, 0.25]).unwrap();
        // ratios 2, 2, 0.5, 1.6
        assert_eq!(c.atoms(), 3);
        let bp = c.breakpoints();
        assert!((bp[1].0 - 0.3).abs() < 1e-15 && (bp[1].1 - 0.15).abs() < 1e-15);
    }

    #[test]
    fn repetition_metaconverse() {
        let dmc = DmcSpec::bsc(0.2).unwrap();
        let code = DiscreteCode::new(3, vec![vec![0; 3], vec![1; 3]]).unwrap();
        let q = vec![0.125; 8];
        let r = metaconverse(&dmc, &code, &q, 0.9, Variant::Avg, 0.0, 1 << 20).unwrap();
        assert!(r.passed());
        let r = metaconverse(&dmc, &code, &q, 0.9, Variant::Max, 0.1, 1 << 20).unwrap();
        assert!(r.passed());
        let eps = 0.104;
        let r = metaconverse(&dmc, &code, &q, eps + 1e-16, Variant::Avg, 0.0, 1 << 20).unwrap();
        assert!(r.rhs.abs() < 1e-12);
    }

    #[test]
    fn empty_product() {
        let dmc = DmcSpec::bsc(0.11).unwrap();
        let sol = crate::channels::blahut_arimoto(&dmc, 1e-12, 10_000).unwrap();
        let r = product_beta_bound(0.5, &dmc, &sol, &[]).unwrap();
        assert_eq!(r.lhs, 0.5);
        assert!(r.rhs <= 0.25 && r.passed());
        let r = product_beta_bound(0.5, &dmc, &sol, &[0; 8]).unwrap();
        assert!(r.passed());
        let r = product_beta_bound(0.5, &dmc, &sol, &[0; 13]).unwrap();
        assert_eq!(r.verdict, Verdict::FormulaOnly);
    }

    #[test]
    fn stein_single_word() {
        let dmc = DmcSpec::bsc(0.11).unwrap();
        let sol = crate::channels::blahut_arimoto(&dmc, 1e-12, 10_000).unwrap();
        let code = DiscreteCode::new(6, vec![vec![0; 6]]).unwrap();
        let r = stein_scan(&dmc, &sol, &code, 1.0, 1 << 20).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!(r.passed());
    }
}
