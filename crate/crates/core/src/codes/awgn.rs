//! Monte Carlo statistics of AWGN codes under nearest-neighbor decoding.

use super::RealCode;
use crate::channels::AwgnSpec;
use crate::error::{invalid, Result};
use crate::numeric::{log_sum_exp, pairwise_sum};
use crate::rng::sample_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;
/// Samples per RNG shard.
pub const SHARD: usize = 1024;
pub const MIN_SAMPLES: usize = 10_000;
pub const MAX_CODEWORDS: usize = 1 << 16;

/// Point estimate with a 99% confidence interval.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Normal-approximation interval for the mean of `xs`.
    pub fn of_mean(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
        let se = (var / n).sqrt();
        McEstimate {
            mean,
            std_err: se,
            ci_lo: mean - Z99 * se,
            ci_hi: mean + Z99 * se,
            samples: xs.len(),
        }
    }

    /// Sample variance of `xs` with a fourth-moment normal interval.
    pub fn of_variance(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let d4: Vec<f64> = d2.iter().map(|d| d * d).collect();
        let m2 = pairwise_sum(&d2) / n;
        let m4 = pairwise_sum(&d4) / n;
        let s2 = m2 * n / (n - 1.0).max(1.0);
        let se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
        McEstimate {
            mean: s2,
            std_err: se,
            ci_lo: (s2 - Z99 * se).max(0.0),
            ci_hi: s2 + Z99 * se,
            samples: xs.len(),
        }
    }

    /// Wilson score interval for `k` successes out of `n`.
    pub fn of_proportion(k: usize, n: usize) -> Self {
        let nf = n as f64;
        let p = k as f64 / nf;
        let z2 = Z99 * Z99;
        let den = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / den;
        let half = Z99 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
        McEstimate {
            mean: p,
            std_err: (p * (1.0 - p) / nf).sqrt(),
            ci_lo: (centre - half).max(0.0),
            ci_hi: (centre + half).min(1.0),
            samples: n,
        }
    }
}

/// One-sided Clopper–Pearson upper confidence limit at level 1−`level`.
pub fn clopper_pearson_upper(k: usize, n: usize, level: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if k == 0 {
        return 1.0 - level.powf(1.0 / n as f64);
    }
    match Beta::new((k + 1) as f64, (n - k) as f64) {
        Ok(b) => b.inverse_cdf(1.0 - level),
        Err(_) => 1.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AwgnMcReport {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub eps_avg: McEstimate,
    /// Largest per-message error frequency.
    pub eps_max_observed: f64,
    /// Bonferroni-corrected (over messages) 99% Clopper–Pearson upper
    /// limit on the maximal error probability.
    pub eps_max_upper: f64,
    /// E[log p_{Y^n}/p*_{Y^n}] under the code mixture (nats).
    pub d_out: McEstimate,
    /// Var[log p_{Y^n}(Y^n)] (nats²).
    pub var_log_p: McEstimate,
    /// h(Y^n) = E[−log p_{Y^n}(Y^n)] (nats).
    pub h_out: McEstimate,
}

struct Draw {
    err: bool,
    msg: u32,
    log_ratio: f64,
    log_p: f64,
}

/// Standard normal vector of length `n`.
pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// MC estimates of the error probability, output divergence and output
/// AEP variance. Sample g (shard g/SHARD, index g%SHARD) transmits
/// message g mod M, so every message is drawn equally often.
pub fn awgn_mc_report(spec: &AwgnSpec, code: &RealCode, samples: usize, seed: u64) -> Result<AwgnMcReport> {
    if samples < MIN_SAMPLES {
        return invalid(format!("at least {MIN_SAMPLES} samples required"));
    }
    if code.m() > MAX_CODEWORDS {
        return invalid("codebook too large for mixture-density evaluation");
    }
    code.validate_power(spec.power)?;
    let n = code.n;
    let m = code.m();
    let p = spec.power;
    let half_n_ln2pi = 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let ln_m = (m as f64).ln();
    let shards = samples.div_ceil(SHARD);
    let draws: Vec<Draw> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let lo = s * SHARD;
            let hi = (lo + SHARD).min(samples);
            let mut dist = vec![0.0; m];
            (lo..hi)
                .map(|g| {
                    let mut rng = sample_rng(seed, s as u64, (g - lo) as u64);
                    let msg = g % m;
                    let z = gaussian_vec(&mut rng, n);
                    let y: Vec<f64> = code.words[msg].iter().zip(&z).map(|(c, z)| c + z).collect();
                    let mut best = f64::INFINITY;
                    let mut arg = 0;
                    for (j, c) in code.words.iter().enumerate() {
                        let d: f64 = c.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                        dist[j] = -0.5 * d;
                        if d < best {
                            best = d;
                            arg = j;
                        }
                    }
                    let log_p = log_sum_exp(&dist) - ln_m - half_n_ln2pi;
                    let yy: f64 = y.iter().map(|v| v * v).sum();
                    let log_star = -yy / (2.0 * (1.0 + p)) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI * (1.0 + p)).ln();
                    Draw {
                        err: arg != msg,
                        msg: msg as u32,
                        log_ratio: log_p - log_star,
                        log_p,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let errors = draws.iter().filter(|d| d.err).count();
    let mut per_err = vec![0usize; m];
    let mut per_cnt = vec![0usize; m];
    for d in &draws {
        per_cnt[d.msg as usize] += 1;
        if d.err {
            per_err[d.msg as usize] += 1;
        }
    }
    let level = 0.01 / m as f64;
    let mut eps_max_observed: f64 = 0.0;
    let mut eps_max_upper: f64 = 0.0;
    for i in 0..m {
        eps_max_observed = eps_max_observed.max(per_err[i] as f64 / per_cnt[i] as f64);
        eps_max_upper = eps_max_upper.max(clopper_pearson_upper(per_err[i], per_cnt[i], level));
    }
    let lr: Vec<f64> = draws.iter().map(|d| d.log_ratio).collect();
    let lp: Vec<f64> = draws.iter().map(|d| d.log_p).collect();
    let neg: Vec<f64> = lp.iter().map(|v| -v).collect();
    Ok(AwgnMcReport {
        n,
        m,
        seed,
        eps_avg: McEstimate::of_proportion(errors, samples),
        eps_max_observed,
        eps_max_upper,
        d_out: McEstimate::of_mean(&lr),
        var_log_p: McEstimate::of_variance(&lp),
        h_out: McEstimate::of_mean(&neg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_codeword_at_origin() {
        let spec = AwgnSpec::new(1.0).unwrap();
        let n = 16;
        let code = RealCode::new(n, vec![vec![0.0; n]]).unwrap();
        let r = awgn_mc_report(&spec, &code, 20_000, 3).unwrap();
        let exact = n as f64 * (0.5 * 2f64.ln() - 0.25);
        assert!(r.d_out.ci_lo <= exact && exact <= r.d_out.ci_hi);
        assert_eq!(r.eps_avg.mean, 0.0);
        // log p of a standard Gaussian: variance n/2
        assert!(r.var_log_p.ci_lo <= 8.0 && 8.0 <= r.var_log_p.ci_hi);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = AwgnSpec::new(1.0).unwrap();
        let code = RealCode::new(4, vec![vec![1.0, -1.0, 0.5, 0.0], vec![-1.0, 1.0, 0.0, 0.5]]).unwrap();
        let a = awgn_mc_report(&spec, &code, 10_000, 9).unwrap();
        let b = awgn_mc_report(&spec, &code, 10_000, 9).unwrap();
        assert_eq!(a.d_out.mean.to_bits(), b.d_out.mean.to_bits());
        assert_eq!(a.eps_avg.mean.to_bits(), b.eps_avg.mean.to_bits());
    }

    #[test]
    fn proportion_and_cp_limits() {
        let e = McEstimate::of_proportion(0, 100);
        assert_eq!(e.ci_lo, 0.0);
        assert!(e.ci_hi > 0.0 && e.ci_hi < 0.1);
        let u = clopper_pearson_upper(0, 100, 0.01);
        assert!((u - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-15);
        let u5 = clopper_pearson_upper(5, 100, 0.01);
        assert!(u5 > 0.05 && u5 < 0.2);
        assert_eq!(clopper_pearson_upper(3, 3, 0.01), 1.0);
    }

    #[test]
    fn rejects_small_runs() {
        let spec = AwgnSpec::new(1.0).unwrap();
        let code = RealCode::new(1, vec![vec![0.0]]).unwrap();
        assert!(awgn_mc_report(&spec, &code, 100, 1).is_err());
        let loud = RealCode::new(1, vec![vec![2.0]]).unwrap();
        assert!(awgn_mc_report(&spec, &loud, 10_000, 1).is_err());
    }
}
