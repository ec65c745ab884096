//! Codebook geometry for the AWGN channel: generators, quadratic forms,
//! ℓq-norm profiles and scaling fits.

use crate::channels::{awgn_capacity_dispersion, AwgnSpec};
use crate::codes::awgn::gaussian_vec;
use crate::codes::RealCode;
use crate::error::{invalid, FbError, Result};
use crate::numeric::pairwise_sum;
use crate::report::{BoundReport, Dim, Verdict};
use crate::rng::stream_rng;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Spectral slack when certifying −I ≼ A ≼ I.
pub const SPECTRAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    IidGaussian,
    Spherical,
    Peaky,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianGenSpec {
    pub kind: GenKind,
    pub n: usize,
    pub m: usize,
    pub power: f64,
    pub seed: u64,
    /// Fraction of energy in the first coordinate (peaky only).
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Generated {
    pub code: RealCode,
    /// Rows pulled back onto the power sphere (iid only).
    pub rescaled: usize,
}

fn on_sphere(mut v: Vec<f64>, radius: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let k = if norm > 0.0 { radius / norm } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= k);
    v
}

/// Row i is drawn from stream i of the seed, so output is thread-count free.
pub fn generate(spec: &GaussianGenSpec) -> Result<Generated> {
    let (n, p) = (spec.n, spec.power);
    if n == 0 || spec.m == 0 || !(p > 0.0) {
        return invalid("generator needs n, M >= 1 and P > 0");
    }
    let delta = match spec.kind {
        GenKind::Peaky => match spec.delta {
            Some(d) if d > 0.0 && d < 1.0 && n >= 2 => d,
            _ => return invalid("peaky generator needs delta in (0,1) and n >= 2"),
        },
        _ => 0.0,
    };
    let radius = (n as f64 * p).sqrt();
    let rows: Vec<(Vec<f64>, bool)> = (0..spec.m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(spec.seed, i as u64);
            match spec.kind {
                GenKind::IidGaussian => {
                    let x: Vec<f64> = gaussian_vec(&mut rng, n).into_iter().map(|z| z * p.sqrt()).collect();
                    let e: f64 = x.iter().map(|v| v * v).sum();
                    if e > n as f64 * p {
                        (on_sphere(x, radius), true)
                    } else {
                        (x, false)
                    }
                }
                GenKind::Spherical => (on_sphere(gaussian_vec(&mut rng, n), radius), false),
                GenKind::Peaky => {
                    let rest = on_sphere(gaussian_vec(&mut rng, n - 1), ((n - 1) as f64 * (1.0 - delta) * p).sqrt());
                    let mut x = Vec::with_capacity(n);
                    x.push((n as f64 * delta * p).sqrt());
                    x.extend(rest);
                    (x, false)
                }
            }
        })
        .collect();
    let rescaled = rows.iter().filter(|r| r.1).count();
    let code = RealCode::new(n, rows.into_iter().map(|r| r.0).collect())?;
    Ok(Generated { code, rescaled })
}

/// Extreme eigenvalues of a symmetric matrix; errors if asymmetric.
pub fn spectrum_range(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !a.is_square() {
        return invalid("matrix must be square");
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return invalid("matrix is not symmetric");
    }
    let ev = SymmetricEigen::new(a.clone()).eigenvalues;
    Ok((ev.min(), ev.max()))
}

/// (1/M) Σ x xᵀ.
pub fn second_moment(code: &RealCode) -> DMatrix<f64> {
    let n = code.n;
    let x = DMatrix::from_fn(n, code.m(), |i, j| code.words[j][i]);
    (&x * x.transpose()) / code.m() as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticFormReport {
    pub a_eig_min: f64,
    pub a_eig_max: f64,
    pub sigma_eig_min: f64,
    pub sigma_eig_max: f64,
    pub b: f64,
    pub report: BoundReport,
    /// Sharper bound, present when A = I.
    pub identity: Option<BoundReport>,
}

/// b = √(2(9/4+3P)/(1−ε)) + log(2/(1−ε)).
pub fn qform_constant(power: f64, eps: f64) -> f64 {
    (2.0 * (2.25 + 3.0 * power) / (1.0 - eps)).sqrt() + (2.0 / (1.0 - eps)).ln()
}

/// |E(AX,X) − P tr A| ≤ 2(1+P)√n·√(nC − log M + b√n), with `eps` an upper
/// bound on the code's maximal error.
pub fn quadratic_form_report(code: &RealCode, spec: &AwgnSpec, a: &DMatrix<f64>, eps: f64) -> Result<QuadraticFormReport> {
    let n = code.n;
    if a.nrows() != n {
        return Err(FbError::Dimension(a.nrows(), n));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return invalid("eps must lie in (0,1)");
    }
    let (lo, hi) = spectrum_range(a)?;
    if lo < -1.0 - SPECTRAL_TOL || hi > 1.0 + SPECTRAL_TOL {
        return invalid(format!("spectrum [{lo}, {hi}] outside [-1, 1]"));
    }
    let p = spec.power;
    let sigma = second_moment(code);
    let (slo, shi) = spectrum_range(&sigma)?;
    let lhs = ((&sigma * a).trace() - p * a.trace()).abs();
    let (c, _) = awgn_capacity_dispersion(spec);
    let nf = n as f64;
    let b = qform_constant(p, eps);
    let budget = nf * c - (code.m() as f64).ln() + b * nf.sqrt();
    let rhs = 2.0 * (1.0 + p) * nf.sqrt() * budget.max(0.0).sqrt();
    let report = BoundReport::le("quadratic-form", lhs, rhs, Dim::Plain)
        .with("b", b, Dim::Log)
        .with("budget", budget, Dim::Log)
        .with("eps", eps, Dim::Plain);
    let identity = if a == &DMatrix::identity(n, n) {
        Some(
            BoundReport::le("quadratic-form-identity", lhs, 2.0 * (1.0 + p) * budget, Dim::Plain)
                .with("b", b, Dim::Log)
                .with("eps", eps, Dim::Plain),
        )
    } else {
        None
    };
    Ok(QuadraticFormReport {
        a_eig_min: lo,
        a_eig_max: hi,
        sigma_eig_min: slo,
        sigma_eig_max: shi,
        b,
        report,
        identity,
    })
}

/// Symmetric matrix with spectrum uniform in [−1,1] and a Haar eigenbasis.
pub fn random_bounded_form(n: usize, seed: u64) -> DMatrix<f64> {
    let q = random_rotation(n, seed);
    let mut rng = stream_rng(seed, 1);
    use rand::Rng;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0)));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed).
pub fn random_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let g = gaussian_vec(&mut rng, n * n);
    let qr = DMatrix::from_vec(n, n, g).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn rotate_code(code: &RealCode, rot: &DMatrix<f64>) -> Result<RealCode> {
    let words = code
        .words
        .iter()
        .map(|w| (rot * nalgebra::DVector::from_column_slice(w)).iter().cloned().collect())
        .collect();
    RealCode::new(code.n, words)
}

/// ‖x‖_q for q ∈ [1, ∞].
pub fn lq_norm(x: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return x.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let big = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if big == 0.0 {
        return 0.0;
    }
    big * x.iter().map(|v| (v.abs() / big).powf(q)).sum::<f64>().powf(1.0 / q)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LqRow {
    pub q: f64,
    pub median: f64,
    pub mean: f64,
    /// 75% quantile (median of the upper half).
    pub upper_half_quantile: f64,
    pub fraction_above: Option<f64>,
    pub norms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FourthMoment {
    pub mean: f64,
    /// Sample standard deviation of ‖x‖₄⁴ across codewords.
    pub sample_sigma: f64,
    pub std_err: f64,
    pub gaussian_value: f64,
    /// Constant (6/(1+ε))^{1/4} + 6^{1/4}√(1+P), reported only.
    pub b0: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LqProfile {
    pub rows: Vec<LqRow>,
    pub fourth: FourthMoment,
}

pub fn lq_profile(code: &RealCode, qs: &[f64], power: f64, threshold: Option<f64>, eps: Option<f64>) -> Result<LqProfile> {
    if qs.iter().any(|&q| !(q >= 1.0)) {
        return invalid("q must lie in [1, inf]");
    }
    let rows = qs
        .iter()
        .map(|&q| {
            let norms: Vec<f64> = code.words.par_iter().map(|w| lq_norm(w, q)).collect();
            let mut s = norms.clone();
            s.sort_by(f64::total_cmp);
            LqRow {
                q,
                median: quantile(&s, 0.5),
                mean: pairwise_sum(&norms) / norms.len() as f64,
                upper_half_quantile: quantile(&s, 0.75),
                fraction_above: threshold.map(|t| norms.iter().filter(|&&v| v > t).count() as f64 / norms.len() as f64),
                norms,
            }
        })
        .collect();
    let f4: Vec<f64> = code.words.iter().map(|w| w.iter().map(|v| v.powi(4)).sum()).collect();
    let m = f4.len() as f64;
    let mean = pairwise_sum(&f4) / m;
    let var = pairwise_sum(&f4.iter().map(|v| (v - mean).powi(2)).collect::<Vec<_>>()) / (m - 1.0).max(1.0);
    Ok(LqProfile {
        rows,
        fourth: FourthMoment {
            mean,
            sample_sigma: var.sqrt(),
            std_err: (var / m).sqrt(),
            gaussian_value: 3.0 * code.n as f64 * power * power,
            b0: eps.map(|e| (6.0 / (1.0 + e)).powf(0.25) + 6f64.powf(0.25) * (1.0 + power).sqrt()),
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Slope against log log n (q = ∞ only).
    pub slope_loglog: Option<f64>,
    pub points: Vec<(f64, f64)>,
}

fn ls_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if xs.len() < 3 || sxx <= 0.0 {
        return invalid("degenerate fit");
    }
    let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    Ok((slope, icpt, (rss / (k - 2.0) / sxx).sqrt()))
}

/// Least-squares slope of log value against log n (95% normal CI).
pub fn fit_exponent(points: &[(f64, f64)], loglog: bool) -> Result<ScalingFit> {
    if points.iter().any(|&(n, v)| !(n > 1.0) || !(v > 0.0)) {
        return invalid("scaling fit needs n > 1 and positive values");
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, se) = ls_fit(&xs, &ys)?;
    let slope_loglog = if loglog {
        let ll: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        Some(ls_fit(&ll, &ys)?.0)
    } else {
        None
    };
    Ok(ScalingFit {
        slope,
        intercept,
        std_err: se,
        ci_lo: slope - 1.96 * se,
        ci_hi: slope + 1.96 * se,
        slope_loglog,
        points: points.to_vec(),
    })
}

/// How δ_n is chosen across an n-grid for peaky codes.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum DeltaRule {
    Const(f64),
    /// δ_n = n^{−1/2}.
    InvSqrt,
}

/// Median ‖x‖_q across the n-grid, then the log-log slope.
pub fn scaling_exponent_fit(
    kind: GenKind,
    power: f64,
    m: usize,
    n_grid: &[usize],
    q: f64,
    delta: Option<DeltaRule>,
    seed: u64,
) -> Result<ScalingFit> {
    if n_grid.len() < 5 {
        return invalid("n-grid needs at least 5 points");
    }
    let mut pts = Vec::new();
    for (k, &n) in n_grid.iter().enumerate() {
        let d = delta.map(|r| match r {
            DeltaRule::Const(d) => d,
            DeltaRule::InvSqrt => 1.0 / (n as f64).sqrt(),
        });
        let g = generate(&GaussianGenSpec {
            kind,
            n,
            m,
            power,
            seed: crate::rng::mix(seed, k as u64),
            delta: d,
        })?;
        let prof = lq_profile(&g.code, &[q], power, None, None)?;
        pts.push((n as f64, prof.rows[0].median));
    }
    fit_exponent(&pts, q.is_infinite())
}

#[derive(Clone, Debug, Serialize)]
pub struct LinfTail {
    /// (λ, fraction of codewords with ‖x‖∞ ≥ √(λn)).
    pub table: Vec<(f64, f64)>,
    pub bracket: BoundReport,
}

/// nC − √(nV)Q⁻¹(ε) + 2 log n − log(M/2), without the unspecified log b.
pub fn linf_bracket(spec: &AwgnSpec, n: usize, log_m: f64, eps: f64) -> f64 {
    let (c, v) = awgn_capacity_dispersion(spec);
    let nf = n as f64;
    let qinv = Normal::new(0.0, 1.0).map(|d| d.inverse_cdf(1.0 - eps)).unwrap_or(f64::NAN);
    nf * c - (nf * v).sqrt() * qinv + 2.0 * nf.ln() - (log_m - std::f64::consts::LN_2)
}

pub fn linf_excess_tail(code: &RealCode, spec: &AwgnSpec, lambdas: &[f64], eps: f64) -> Result<LinfTail> {
    if lambdas.iter().any(|&l| !(0.0..=spec.power).contains(&l)) {
        return invalid("lambda must lie in [0, P]");
    }
    let nf = code.n as f64;
    let sup: Vec<f64> = code.words.iter().map(|w| lq_norm(w, f64::INFINITY)).collect();
    let table = lambdas
        .iter()
        .map(|&l| {
            let t = (l * nf).sqrt() * (1.0 - 1e-12);
            (l, sup.iter().filter(|&&s| s >= t).count() as f64 / sup.len() as f64)
        })
        .collect();
    let br = linf_bracket(spec, code.n, (code.m() as f64).ln(), eps);
    let bracket = BoundReport::ge("linf-bracket", br, 0.0, Dim::Log)
        .verdict(Verdict::FormulaOnly)
        .note("nonnegative only after adding the unspecified log b");
    Ok(LinfTail { table, bracket })
}

/// Largest relative violation of the three norm interpolation inequalities
/// over all pairs q, p from `qs` (≤ 0 when all hold).
pub fn interpolation_violation(x: &[f64], qs: &[f64]) -> f64 {
    let n = x.len() as f64;
    let inf = lq_norm(x, f64::INFINITY);
    let mut worst = f64::NEG_INFINITY;
    let mut rel = |lhs: f64, rhs: f64| worst = worst.max((lhs - rhs) / rhs.abs().max(1e-300) - 1e-12);
    for &q in qs {
        for &p in qs {
            let (nq, np) = (lq_norm(x, q), lq_norm(x, p));
            if np == 0.0 {
                continue;
            }
            if q <= p {
                let e = if p.is_infinite() { 1.0 / q } else { 1.0 / q - 1.0 / p };
                rel(nq, n.powf(e) * np);
            } else {
                if !q.is_infinite() {
                    rel(nq, inf.powf(1.0 - p / q) * np.powf(p / q));
                }
                rel(nq, np);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(kind: GenKind, n: usize, m: usize, delta: Option<f64>) -> Generated {
        generate(&GaussianGenSpec {
            kind,
            n,
            m,
            power: 1.0,
            seed: 7,
            delta,
        })
        .unwrap()
    }

    #[test]
    fn generators_respect_power() {
        let s = gen(GenKind::Spherical, 32, 50, None);
        for w in &s.code.words {
            assert!((w.iter().map(|v| v * v).sum::<f64>() - 32.0).abs() < 1e-9);
        }
        let g = gen(GenKind::IidGaussian, 32, 200, None);
        assert!(g.rescaled > 40 && g.rescaled < 160);
        g.code.validate_power(1.0).unwrap();
        let p = gen(GenKind::Peaky, 64, 20, Some(0.125));
        for w in &p.code.words {
            assert!((w[0] - 8f64.sqrt()).abs() < 1e-12);
            assert!(lq_norm(w, 4.0) >= 8f64.sqrt());
        }
        p.code.validate_power(1.0).unwrap();
        assert!(generate(&GaussianGenSpec {
            kind: GenKind::Peaky,
            n: 4,
            m: 1,
            power: 1.0,
            seed: 0,
            delta: Some(1.5)
        })
        .is_err());
        let again = gen(GenKind::IidGaussian, 32, 200, None);
        assert_eq!(again.code.words, g.code.words);
    }

    #[test]
    fn norms_and_interpolation() {
        assert_eq!(lq_norm(&[0.0, 0.0], 3.0), 0.0);
        assert!((lq_norm(&[3.0, 4.0], 2.0) - 5.0).abs() < 1e-15);
        assert_eq!(lq_norm(&[3.0, -4.0], f64::INFINITY), 4.0);
        let g = gen(GenKind::IidGaussian, 40, 30, None);
        let qs = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, f64::INFINITY];
        for w in &g.code.words {
            assert!(interpolation_violation(w, &qs) <= 0.0);
        }
    }

    #[test]
    fn quadratic_forms() {
        let spec = AwgnSpec::new(1.0).unwrap();
        let s = gen(GenKind::Spherical, 16, 64, None);
        let zero = DMatrix::zeros(16, 16);
        let r = quadratic_form_report(&s.code, &spec, &zero, 0.1).unwrap();
        assert_eq!(r.report.lhs, 0.0);
        let id = DMatrix::identity(16, 16);
        let r = quadratic_form_report(&s.code, &spec, &id, 0.1).unwrap();
        assert!(r.report.lhs < 1e-9 && r.identity.unwrap().passed());
        let big = DMatrix::identity(16, 16) * 2.0;
        assert!(quadratic_form_report(&s.code, &spec, &big, 0.1).is_err());
        let a = random_bounded_form(16, 3);
        let (lo, hi) = spectrum_range(&a).unwrap();
        assert!(lo >= -1.0 - 1e-9 && hi <= 1.0 + 1e-9);
        // independent identity lhs
        let g = gen(GenKind::IidGaussian, 16, 64, None);
        let direct = (g.code.words.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / 64.0 - 16.0).abs();
        let r = quadratic_form_report(&g.code, &spec, &id, 0.1).unwrap();
        assert!((r.report.lhs - direct).abs() < 1e-9);
    }

    #[test]
    fn rotation_invariance() {
        let spec = AwgnSpec::new(1.0).unwrap();
        let g = gen(GenKind::Spherical, 12, 20, None);
        let rot = random_rotation(12, 5);
        let orth = (&rot * rot.transpose() - DMatrix::identity(12, 12)).amax();
        assert!(orth < 1e-12);
        let r = rotate_code(&g.code, &rot).unwrap();
        for (a, b) in g.code.words.iter().zip(&r.words) {
            assert!((lq_norm(a, 2.0) - lq_norm(b, 2.0)).abs() < 1e-9);
        }
        let id = DMatrix::identity(12, 12);
        let x = quadratic_form_report(&g.code, &spec, &id, 0.1).unwrap().report.lhs;
        let y = quadratic_form_report(&r, &spec, &id, 0.1).unwrap().report.lhs;
        assert!((x - y).abs() < 1e-9);
    }

    #[test]
    fn profile_and_tail() {
        let spec = AwgnSpec::new(1.0).unwrap();
        let z = RealCode::new(4, vec![vec![0.0; 4]]).unwrap();
        let p = lq_profile(&z, &[1.0, 4.0, f64::INFINITY], 1.0, Some(0.5), Some(0.1)).unwrap();
        assert!(p.rows.iter().all(|r| r.median == 0.0 && r.fraction_above == Some(0.0)));
        let pk = gen(GenKind::Peaky, 64, 10, Some(0.25));
        let t = linf_excess_tail(&pk.code, &spec, &[0.25], 0.1).unwrap();
        assert_eq!(t.table[0].1, 1.0);
        assert_eq!(t.bracket.verdict, Verdict::FormulaOnly);
        let sp = gen(GenKind::Spherical, 8, 10, None);
        let t = linf_excess_tail(&sp.code, &spec, &[1.0], 0.1).unwrap();
        assert_eq!(t.table[0].1, 0.0);
    }

    #[test]
    fn fits() {
        let pts: Vec<(f64, f64)> = [16.0, 32.0, 64.0, 128.0, 256.0].iter().map(|&n: &f64| (n, 2.0 * n.powf(0.3))).collect();
        let f = fit_exponent(&pts, false).unwrap();
        assert!((f.slope - 0.3).abs() < 1e-12);
        assert!(fit_exponent(&pts[..2], false).is_err());
        let s = scaling_exponent_fit(GenKind::Spherical, 1.0, 16, &[16, 32, 64, 128, 256], 2.0, None, 1).unwrap();
        assert!((s.slope - 0.5).abs() < 1e-9);
    }
}
