//! Small exhaustive suites run by `fblab selftest`. The payload depends
//! only on the seed.

use crate::channels::{awgn_capacity_dispersion, blahut_arimoto, product_masses, AwgnSpec, DmcSpec};
use crate::codes::{
    counterexample_extend, enumerate_codebooks, exact_error, ml_decode, random_code, CodeKernel, DiscreteCode,
};
use crate::concentration as conc;
use crate::converses::{self as cv, ConverseInput, OutKlMode, RhoMode};
use crate::divergences::transport::{wasserstein, TransportProblem};
use crate::divergences::{kl, tv, FiniteDist};
use crate::error::Result;
use crate::gaussian_norms as gn;
use crate::numeric::h2;
use crate::report::{BoundReport, Verdict};
use crate::rng::stream_rng;
use crate::space::Space;
use crate::testing::{beta_alpha, metaconverse_exact, MetaInput, Variant};
use rand::Rng;
use serde::Serialize;
use serde_json::Value;

const GUARD: u64 = 1 << 20;

#[derive(Serialize, Default)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub instances: usize,
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub min_slack: f64,
}

impl SuiteResult {
    fn new(suite: &'static str) -> Self {
        SuiteResult {
            suite,
            min_slack: f64::INFINITY,
            ..Default::default()
        }
    }

    fn add(&mut self, r: &BoundReport) {
        self.instances += 1;
        match r.verdict {
            Verdict::Pass | Verdict::FormulaOnly => self.pass += 1,
            Verdict::Fail => self.fail += 1,
            Verdict::Inconclusive => self.inconclusive += 1,
        }
        if r.verdict != Verdict::Inconclusive && r.slack.is_finite() {
            self.min_slack = self.min_slack.min(r.slack);
        }
    }

    fn check(&mut self, ok: bool, slack: f64) {
        self.instances += 1;
        if ok {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
        self.min_slack = self.min_slack.min(slack);
    }
}

fn random_dist<R: Rng>(rng: &mut R, k: usize) -> FiniteDist {
    let w: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    FiniteDist::from_weights(w).expect("positive weights")
}

fn capacity_suite() -> Result<SuiteResult> {
    let mut s = SuiteResult::new("capacity");
    let c = blahut_arimoto(&DmcSpec::bsc(0.11)?, 1e-12, 100_000)?.capacity;
    let want = std::f64::consts::LN_2 - h2(0.11);
    s.check((c - want).abs() < 1e-9, 1e-9 - (c - want).abs());
    let c = blahut_arimoto(&DmcSpec::bec(0.5)?, 1e-12, 100_000)?.capacity;
    s.check((c - 0.5 * std::f64::consts::LN_2).abs() < 1e-9, 1e-9 - (c - 0.5 * std::f64::consts::LN_2).abs());
    let (c, v) = awgn_capacity_dispersion(&AwgnSpec::new(1.0)?);
    let ln2 = std::f64::consts::LN_2;
    s.check((c / ln2 - 0.5).abs() < 1e-12, 0.0);
    s.check((v / (ln2 * ln2) - 0.78051).abs() < 1e-5, 1e-5 - (v / (ln2 * ln2) - 0.78051).abs());
    Ok(s)
}

fn np_suite(seed: u64) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("neyman-pearson");
    let mut rng = stream_rng(seed, 1);
    for _ in 0..200 {
        let k = rng.gen_range(2..=8);
        let p = random_dist(&mut rng, k);
        let q = random_dist(&mut rng, k);
        let a: f64 = rng.gen();
        let same = beta_alpha(a, &p, &p)?.beta;
        s.check(same == a, -(same - a).abs());
        let b1 = beta_alpha(a, &p, &q)?.beta;
        let b2 = beta_alpha((a + 0.1).min(1.0), &p, &q)?.beta;
        s.check(b1 <= b2 + 1e-15 && (0.0..=1.0 + 1e-12).contains(&b1), b2 - b1);
    }
    Ok(s)
}

struct Prepared {
    kernel: CodeKernel,
    output: Vec<f64>,
    star: Vec<f64>,
    eps_avg: f64,
    eps_max: f64,
}

fn prepare(dmc: &DmcSpec, caod: &[f64], code: &DiscreteCode) -> Result<Prepared> {
    let kernel = CodeKernel::new(dmc, code, GUARD)?;
    let dec = ml_decode(dmc, code, GUARD)?;
    let (eps_avg, eps_max) = exact_error(&kernel, &dec);
    let output = kernel.output();
    let star = product_masses(caod, code.n, kernel.space.size);
    Ok(Prepared {
        kernel,
        output,
        star,
        eps_avg,
        eps_max,
    })
}

fn converse_sweep() -> Result<(SuiteResult, SuiteResult)> {
    let mut meta = SuiteResult::new("metaconverse");
    let mut aug = SuiteResult::new("augustin-sfvar");
    let dmc = DmcSpec::bsc(0.2)?;
    let caod = [0.5, 0.5];
    for n in 1..=3 {
        for m in 1..=4usize {
            if m > 1 << n {
                continue;
            }
            for code in enumerate_codebooks(2, n, m)? {
                let pr = prepare(&dmc, &caod, &code)?;
                let inp = MetaInput {
                    kernel: &pr.kernel,
                    output: &pr.output,
                    q: &pr.star,
                    eps_avg: pr.eps_avg,
                    eps_max: pr.eps_max,
                };
                for variant in [Variant::Avg, Variant::Max] {
                    let eps = if variant == Variant::Avg { pr.eps_avg } else { pr.eps_max };
                    for delta in [0.05, 0.1] {
                        let mut a = eps;
                        while a <= 1.0 + 1e-12 {
                            let alpha = a.min(1.0);
                            if alpha > 0.0 && (variant == Variant::Avg || alpha >= eps + delta) {
                                meta.add(&metaconverse_exact(&inp, alpha, variant, delta)?);
                            }
                            a += 0.1;
                        }
                        if variant == Variant::Avg {
                            break;
                        }
                    }
                }
                if pr.eps_max < 1.0 {
                    let ci = ConverseInput {
                        rows: &pr.kernel.rows,
                        q: &pr.star,
                        eps: pr.eps_max,
                    };
                    aug.add(&cv::augustin_bound(&ci, RhoMode::Default)?);
                    aug.add(&cv::kl_lower_bound(&ci, cv::KlMode::Sfvar { s_m: None })?);
                }
            }
        }
    }
    Ok((meta, aug))
}

fn outkl_and_conc(seed: u64) -> Result<(SuiteResult, SuiteResult)> {
    let mut okl = SuiteResult::new("output-kl");
    let mut cc = SuiteResult::new("concentration");
    let dmc = DmcSpec::bsc(0.11)?;
    let ch = crate::channels::Channel::Dmc(dmc.clone());
    let caod = [0.5, 0.5];
    let cap = std::f64::consts::LN_2 - h2(0.11);
    for (i, n) in [6usize, 8].into_iter().enumerate() {
        let sp = Space::new(2, n, GUARD)?;
        let weight = conc::LipschitzFn::hamming_weight(&sp, 0);
        let cert = conc::azuma_cert(n, 1.0);
        for j in 0..10u64 {
            let m = 2 + (j as usize % 6);
            let code = random_code(2, n, m, crate::rng::mix(seed, (i as u64) << 8 | j), true)?;
            let pr = prepare(&dmc, &caod, &code)?;
            if pr.eps_max >= 1.0 {
                continue;
            }
            let py = FiniteDist::with_tol(pr.output.clone(), 1e-10)?;
            let ps = FiniteDist::with_tol(pr.star.clone(), 1e-10)?;
            let d = kl(&py, &ps)?.value();
            okl.add(&cv::output_kl_upper(
                &ch,
                cap,
                n,
                (m as f64).ln(),
                pr.eps_max,
                Some(d),
                OutKlMode::Auto,
            )?);
            cc.add(&conc::expectation_transfer_exact(&weight.table, &py, &ps, &cert)?);
            let tt = conc::tail_transfer(&weight.table, &dmc, &caod, cap, &code, &cert, &[0.0, 2.0, 4.0], GUARD)?;
            tt.tails.iter().for_each(|r| cc.add(r));
            cc.add(&tt.variance);
        }
    }
    Ok((okl, cc))
}

fn counterexample_suite() -> Result<SuiteResult> {
    let mut s = SuiteResult::new("counterexample");
    let dmc = DmcSpec::bsc(0.11)?;
    let base = DiscreteCode::new(8, vec![vec![0; 8], vec![1; 8], [0, 1].repeat(4), [1, 0].repeat(4)])?;
    let ce = counterexample_extend(&dmc, &[0.5, 0.5], &base, 0, 0.3, GUARD)?;
    s.add(&ce.report);
    s.check(ce.eps_avg <= 0.3 + 1e-12, 0.3 - ce.eps_avg);
    Ok(s)
}

fn transport_suite(seed: u64) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("transport");
    let mut rng = stream_rng(seed, 2);
    for _ in 0..100 {
        let k = rng.gen_range(2..=8);
        let p = random_dist(&mut rng, k);
        let q = random_dist(&mut rng, k);
        let t = tv(&p, &q)?;
        let sol = wasserstein(&TransportProblem::hamming(p, q)?)?;
        let err = (sol.value - t).abs().max(sol.gap.abs());
        s.check(err <= 1e-10, 1e-10 - err);
    }
    Ok(s)
}

fn norms_suite(seed: u64) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("norms");
    let g = gn::generate(&gn::GaussianGenSpec {
        kind: gn::GenKind::IidGaussian,
        n: 32,
        m: 64,
        power: 1.0,
        seed,
        delta: None,
    })?;
    let qs = [1.0, 2.0, 3.0, 4.0, 8.0, f64::INFINITY];
    for w in &g.code.words {
        let v = gn::interpolation_violation(w, &qs);
        s.check(v <= 0.0, -v);
    }
    let spec = AwgnSpec::new(1.0)?;
    let id = nalgebra::DMatrix::identity(32, 32);
    let r = gn::quadratic_form_report(&g.code, &spec, &id, 0.1)?;
    s.add(&r.report);
    Ok(s)
}

/// Runs every suite; the payload is a list of per-suite tallies.
pub fn selftest_payload(seed: u64) -> Result<(Value, Verdict)> {
    let mut suites = vec![capacity_suite()?, np_suite(seed)?];
    let (meta, aug) = converse_sweep()?;
    suites.push(meta);
    suites.push(aug);
    let (okl, cc) = outkl_and_conc(seed)?;
    suites.push(okl);
    suites.push(cc);
    suites.push(counterexample_suite()?);
    suites.push(transport_suite(seed)?);
    suites.push(norms_suite(seed)?);
    let verdict = if suites.iter().any(|s| s.fail > 0) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok((serde_json::to_value(&suites)?, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_are_seed_deterministic() {
        let (a, v) = selftest_payload(11).unwrap();
        assert_eq!(v, Verdict::Pass);
        let (b, _) = selftest_payload(11).unwrap();
        assert_eq!(a, b);
        let suites = a.as_array().unwrap();
        assert_eq!(suites.len(), 9);
        assert!(suites.iter().all(|s| s["fail"] == 0 && s["instances"].as_u64().unwrap() > 0));
    }

    #[test]
    fn tally_counts_verdicts() {
        let mut s = SuiteResult::new("t");
        s.add(&BoundReport::le("x", 1.0, 2.0, crate::report::Dim::Plain));
        s.add(&BoundReport::le("x", 3.0, 2.0, crate::report::Dim::Plain));
        s.add(&BoundReport::le("x", 1.0, 2.0, crate::report::Dim::Plain).verdict(Verdict::Inconclusive));
        assert_eq!((s.instances, s.pass, s.fail, s.inconclusive), (3, 1, 1, 1));
        assert_eq!(s.min_slack, -1.0);
    }
}
