//! Codebooks, maximum-likelihood decoding and exact code-induced output
//! statistics over the enumerated output space Y^n.

pub mod awgn;

use crate::channels::{product_masses, DmcSpec};
use crate::divergences::{kl_slices, FiniteDist};
use crate::error::{invalid, FbError, Result};
use crate::numeric::{pairwise_sum, par_sum, par_sum_vec, ExtReal};
use crate::report::{BoundReport, Dim};
use crate::rng::stream_rng;
use crate::space::{count_states, Space};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest number of stored conditional probabilities (M·|Y|^n).
pub const KERNEL_CELLS: u128 = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Max,
    Avg,
}

/// Code over a finite input alphabet; repeated codewords are allowed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteCode {
    pub n: usize,
    pub words: Vec<Vec<usize>>,
    pub criterion: Criterion,
}

/// Code over the reals (AWGN).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealCode {
    pub n: usize,
    pub words: Vec<Vec<f64>>,
    pub criterion: Criterion,
}

impl DiscreteCode {
    pub fn new(n: usize, words: Vec<Vec<usize>>) -> Result<Self> {
        if words.is_empty() {
            return invalid("codebook is empty");
        }
        if let Some(w) = words.iter().find(|w| w.len() != n) {
            return invalid(format!("codeword of length {} in a length-{n} code", w.len()));
        }
        Ok(DiscreteCode {
            n,
            words,
            criterion: Criterion::Max,
        })
    }

    pub fn m(&self) -> usize {
        self.words.len()
    }

    /// Check symbols against the channel and the per-block cost budget.
    pub fn validate_for(&self, dmc: &DmcSpec) -> Result<()> {
        for w in &self.words {
            if w.iter().any(|&s| s >= dmc.input_size()) {
                return invalid("codeword symbol out of range");
            }
            if let (Some(c), Some(b)) = (dmc.cost(), dmc.budget()) {
                let tot: f64 = w.iter().map(|&s| c[s]).sum();
                if tot > self.n as f64 * b * (1.0 + 1e-12) + 1e-12 {
                    return invalid("codeword violates the cost budget");
                }
            }
        }
        Ok(())
    }
}

impl RealCode {
    pub fn new(n: usize, words: Vec<Vec<f64>>) -> Result<Self> {
        if words.is_empty() {
            return invalid("codebook is empty");
        }
        if words.iter().any(|w| w.len() != n || w.iter().any(|v| !v.is_finite())) {
            return invalid("codeword of wrong length or non-finite entry");
        }
        Ok(RealCode {
            n,
            words,
            criterion: Criterion::Max,
        })
    }

    pub fn m(&self) -> usize {
        self.words.len()
    }

    /// Check ‖x‖² ≤ nP (relative slack 1e-9).
    pub fn validate_power(&self, power: f64) -> Result<()> {
        let lim = self.n as f64 * power * (1.0 + 1e-9);
        for (i, w) in self.words.iter().enumerate() {
            let e: f64 = w.iter().map(|v| v * v).sum();
            if e > lim {
                return invalid(format!("codeword {i} exceeds the power constraint"));
            }
        }
        Ok(())
    }
}

/// Either kind of codebook, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum Codebook {
    Dmc(DiscreteCode),
    Awgn(RealCode),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeFile {
    n: usize,
    #[serde(rename = "M")]
    m: Option<usize>,
    alphabet: String,
    words: Vec<Vec<serde_json::Value>>,
    #[serde(default)]
    criterion: Criterion,
}

impl Codebook {
    pub fn from_json(s: &str) -> Result<Self> {
        let f: CodeFile = serde_json::from_str(s)?;
        if let Some(m) = f.m {
            if m != f.words.len() {
                return invalid(format!("M = {m} but {} words given", f.words.len()));
            }
        }
        match f.alphabet.as_str() {
            "dmc" => {
                let words = f
                    .words
                    .iter()
                    .map(|w| {
                        w.iter()
                            .map(|v| {
                                v.as_u64()
                                    .map(|u| u as usize)
                                    .ok_or_else(|| FbError::Parse("dmc symbols must be nonnegative integers".into()))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut c = DiscreteCode::new(f.n, words)?;
                c.criterion = f.criterion;
                Ok(Codebook::Dmc(c))
            }
            "awgn" => {
                let words = f
                    .words
                    .iter()
                    .map(|w| {
                        w.iter()
                            .map(|v| v.as_f64().ok_or_else(|| FbError::Parse("awgn entries must be numbers".into())))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut c = RealCode::new(f.n, words)?;
                c.criterion = f.criterion;
                Ok(Codebook::Awgn(c))
            }
            other => invalid(format!("unknown alphabet {other:?}")),
        }
    }

    pub fn to_json(&self) -> String {
        let (n, m, alphabet, words, crit) = match self {
            Codebook::Dmc(c) => (c.n, c.m(), "dmc", serde_json::to_value(&c.words), c.criterion),
            Codebook::Awgn(c) => (c.n, c.m(), "awgn", serde_json::to_value(&c.words), c.criterion),
        };
        serde_json::json!({
            "n": n, "M": m, "alphabet": alphabet,
            "words": words.unwrap_or_default(), "criterion": crit
        })
        .to_string()
    }
}

pub fn load_code(path: &Path) -> Result<Codebook> {
    Codebook::from_json(&std::fs::read_to_string(path)?)
}

/// Conditional law P_{Y^n|X^n=word} over the mixed-radix output space.
pub fn word_row(dmc: &DmcSpec, word: &[usize]) -> Vec<f64> {
    let ny = dmc.output_size();
    let mut v = vec![1.0];
    for &x in word {
        let row = dmc.row(x);
        let mut next = Vec::with_capacity(v.len() * ny);
        for &w in row.iter().take(ny) {
            for &p in &v {
                next.push(p * w);
            }
        }
        v = next;
    }
    v
}

/// The code's conditional output laws, materialized over Y^n.
#[derive(Clone, Debug)]
pub struct CodeKernel {
    pub space: Space,
    pub rows: Vec<Vec<f64>>,
}

impl CodeKernel {
    pub fn new(dmc: &DmcSpec, code: &DiscreteCode, guard: u64) -> Result<Self> {
        code.validate_for(dmc)?;
        let space = Space::new(dmc.output_size(), code.n, guard)?;
        let cells = space.size as u128 * code.m() as u128;
        if cells > KERNEL_CELLS {
            return Err(FbError::Guard {
                needed: cells,
                guard: KERNEL_CELLS as u64,
            });
        }
        let rows = code.words.par_iter().map(|w| word_row(dmc, w)).collect();
        Ok(CodeKernel { space, rows })
    }

    /// Kernel from explicit conditional laws on a common finite space.
    pub fn from_rows(space: Space, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != space.size) {
            return invalid("row length does not match the space");
        }
        Ok(CodeKernel { space, rows })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Induced output P_{Y^n}(y) = (1/M) Σ_i P_{Y^n|X^n=c_i}(y).
    pub fn output(&self) -> Vec<f64> {
        let m = self.m() as f64;
        (0..self.space.size)
            .into_par_iter()
            .map(|y| self.rows.iter().map(|r| r[y]).sum::<f64>() / m)
            .collect()
    }
}

/// Log-likelihood of `word` at `y` from its joint type, so that equal
/// likelihoods compare exactly equal regardless of symbol order.
fn type_loglik(logw: &[Vec<f64>], counts: &mut [Vec<u32>], word: &[usize], y: &[usize]) -> f64 {
    for r in counts.iter_mut() {
        r.iter_mut().for_each(|c| *c = 0);
    }
    for (&a, &b) in word.iter().zip(y) {
        counts[a][b] += 1;
    }
    let mut s = 0.0;
    for (a, r) in counts.iter().enumerate() {
        for (b, &c) in r.iter().enumerate() {
            if c > 0 {
                let l = logw[a][b];
                if l == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                s += c as f64 * l;
            }
        }
    }
    s
}

/// ML decoder table: for each output index, the most likely codeword with
/// ties broken to the lowest index.
pub fn ml_decode(dmc: &DmcSpec, code: &DiscreteCode, guard: u64) -> Result<Vec<u32>> {
    code.validate_for(dmc)?;
    let space = Space::new(dmc.output_size(), code.n, guard)?;
    let logw: Vec<Vec<f64>> = dmc
        .matrix()
        .iter()
        .map(|r| r.iter().map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect())
        .collect();
    let nx = dmc.input_size();
    let ny = dmc.output_size();
    Ok((0..space.size)
        .into_par_iter()
        .map_init(
            || (vec![0usize; code.n], vec![vec![0u32; ny]; nx]),
            |(buf, counts), y| {
                space.decode(y, buf);
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0u32;
                for (i, w) in code.words.iter().enumerate() {
                    let l = type_loglik(&logw, counts, w, buf);
                    if l > best {
                        best = l;
                        arg = i as u32;
                    }
                }
                arg
            },
        )
        .collect())
}

/// Exact per-codeword error probabilities under a decoder table.
pub fn error_profile(kernel: &CodeKernel, decoder: &[u32]) -> Vec<f64> {
    kernel
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            par_sum(r.len(), |y| if decoder[y] as usize != i { r[y] } else { 0.0 }).min(1.0)
        })
        .collect()
}

/// Exact (ε_avg, ε_max).
pub fn exact_error(kernel: &CodeKernel, decoder: &[u32]) -> (f64, f64) {
    let e = error_profile(kernel, decoder);
    let avg = pairwise_sum(&e) / e.len() as f64;
    let max = e.iter().cloned().fold(0.0, f64::max);
    (avg, max)
}

/// Induced output distribution over Y^n.
pub fn induced_output(dmc: &DmcSpec, code: &DiscreteCode, guard: u64) -> Result<FiniteDist> {
    let k = CodeKernel::new(dmc, code, guard)?;
    FiniteDist::with_tol(k.output(), 1e-10)
}

/// Masses of (P_Y*)^n over the output space.
pub fn caod_power(caod: &[f64], space: &Space) -> Vec<f64> {
    product_masses(caod, space.n, space.size)
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalK {
    pub k: usize,
    /// P̄^{(k)} over Y^k.
    pub masses: Vec<f64>,
    /// D(P̄^{(k)} ‖ (P_Y*)^k).
    pub divergence: f64,
    /// k/(n−k+1) · D_out.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AepSplit {
    /// Var[log P_{Y^n}(Y^n)].
    pub var: f64,
    /// E[Var[log P_{Y^n}(Y^n) | X^n]].
    pub e_cond_var: f64,
    /// Var[v(X^n)], v(x) = E[−log P_{Y^n}(Y^n) | X^n = x].
    pub var_v: f64,
    pub discrepancy: f64,
}

/// Exact output statistics of a DMC code; log quantities in nats.
#[derive(Clone, Debug, Serialize)]
pub struct CodeMetrics {
    pub n: usize,
    pub m: usize,
    pub eps_avg: f64,
    pub eps_max: f64,
    /// D(P_{Y^n} ‖ P*_{Y^n}).
    pub d_out: f64,
    /// D(P_{Y^n|X^n} ‖ P*_{Y^n} | P_{X^n}).
    pub d_cond: f64,
    /// I(X^n; Y^n) = D_cond − D_out.
    pub i_code: f64,
    /// Direct double-sum mutual information.
    pub i_direct: f64,
    pub h_out: f64,
    pub empirical_k: Vec<EmpiricalK>,
    pub aep: AepSplit,
    /// |I_direct − (D_cond − D_out)|.
    pub identity_discrepancy: f64,
    /// |D_cond enumerated − Σ_j d(c_j) closed form|.
    pub d_cond_discrepancy: f64,
    /// Largest difference between first and reverse-order second passes.
    pub second_pass_discrepancy: f64,
    pub dconvk_holds: bool,
}

fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p > 0.0 {
        p * (p / q).ln()
    } else {
        0.0
    }
}

/// All exact metrics for a DMC code against the caod `caod`.
pub fn code_metrics(dmc: &DmcSpec, code: &DiscreteCode, caod: &[f64], guard: u64) -> Result<CodeMetrics> {
    let kernel = CodeKernel::new(dmc, code, guard)?;
    let decoder = ml_decode(dmc, code, guard)?;
    metrics_from_kernel(dmc, code, &kernel, &decoder, caod)
}

pub fn metrics_from_kernel(
    dmc: &DmcSpec,
    code: &DiscreteCode,
    kernel: &CodeKernel,
    decoder: &[u32],
    caod: &[f64],
) -> Result<CodeMetrics> {
    let sp = kernel.space;
    let m = kernel.m();
    let n = code.n;
    let (eps_avg, eps_max) = exact_error(kernel, decoder);
    let py = kernel.output();
    let pstar = caod_power(caod, &sp);
    if (0..sp.size).any(|y| py[y] > 0.0 && pstar[y] <= 0.0) {
        return Err(FbError::Precondition("code output not dominated by the caod".into()));
    }
    let d_out = par_sum(sp.size, |y| xlogy_ratio(py[y], pstar[y])).max(0.0);
    let h_out = par_sum(sp.size, |y| if py[y] > 0.0 { -py[y] * py[y].ln() } else { 0.0 });
    let d_rows: Vec<f64> = kernel
        .rows
        .iter()
        .map(|r| par_sum(sp.size, |y| xlogy_ratio(r[y], pstar[y])))
        .collect();
    let d_cond = pairwise_sum(&d_rows) / m as f64;
    let d_letters: Vec<f64> = (0..dmc.input_size())
        .map(|x| kl_slices(dmc.row(x), caod).value())
        .collect();
    let d_closed: f64 = code
        .words
        .iter()
        .map(|w| w.iter().map(|&x| d_letters[x]).sum::<f64>())
        .sum::<f64>()
        / m as f64;
    let i_rows: Vec<f64> = kernel
        .rows
        .iter()
        .map(|r| par_sum(sp.size, |y| xlogy_ratio(r[y], py[y])))
        .collect();
    let i_direct = pairwise_sum(&i_rows) / m as f64;
    let i_code = d_cond - d_out;

    // reverse-order sequential second pass
    let mut d2 = 0.0;
    let mut h2 = 0.0;
    let mut i2 = 0.0;
    for y in (0..sp.size).rev() {
        d2 += xlogy_ratio(py[y], pstar[y]);
        if py[y] > 0.0 {
            h2 -= py[y] * py[y].ln();
        }
        let mut t = 0.0;
        for r in kernel.rows.iter().rev() {
            t += xlogy_ratio(r[y], py[y]);
        }
        i2 += t / m as f64;
    }
    let second = (d2 - d_out).abs().max((h2 - h_out).abs()).max((i2 - i_direct).abs());

    let mut empirical_k = Vec::new();
    for k in 1..=2usize.min(n) {
        let spk = Space::new(sp.radix, k, u64::MAX)?;
        let windows = n - k + 1;
        let masses = par_sum_vec(sp.size, spk.size, |y, acc| {
            if py[y] == 0.0 {
                return;
            }
            for j in 0..windows {
                let mut idx = 0;
                let mut mul = 1;
                for t in 0..k {
                    idx += sp.coord(y, j + t) * mul;
                    mul *= sp.radix;
                }
                acc[idx] += py[y] / windows as f64;
            }
        });
        let refk = product_masses(caod, k, spk.size);
        let divergence = kl_slices(&masses, &refk).value();
        let bound = k as f64 / windows as f64 * d_out;
        empirical_k.push(EmpiricalK {
            k,
            masses,
            divergence,
            bound,
        });
    }
    let dconvk_holds = empirical_k.iter().all(|e| e.divergence <= e.bound + 1e-9);
    let aep = aep_from(kernel, &py, h_out);
    Ok(CodeMetrics {
        n,
        m,
        eps_avg,
        eps_max,
        d_out,
        d_cond,
        i_code,
        i_direct,
        h_out,
        empirical_k,
        aep,
        identity_discrepancy: (i_direct - i_code).abs(),
        d_cond_discrepancy: (d_cond - d_closed).abs(),
        second_pass_discrepancy: second,
        dconvk_holds,
    })
}

fn aep_from(kernel: &CodeKernel, py: &[f64], h: f64) -> AepSplit {
    let sp = kernel.space;
    let m = kernel.m() as f64;
    let nl = |y: usize| if py[y] > 0.0 { -py[y].ln() } else { 0.0 };
    let var = par_sum(sp.size, |y| {
        let d = nl(y) - h;
        py[y] * d * d
    });
    let v: Vec<f64> = kernel.rows.iter().map(|r| par_sum(sp.size, |y| r[y] * nl(y))).collect();
    let cond: Vec<f64> = kernel
        .rows
        .iter()
        .zip(&v)
        .map(|(r, &vi)| {
            par_sum(sp.size, |y| {
                let d = nl(y) - vi;
                r[y] * d * d
            })
        })
        .collect();
    let e_cond_var = pairwise_sum(&cond) / m;
    let var_v = pairwise_sum(&v.iter().map(|vi| (vi - h) * (vi - h)).collect::<Vec<_>>()) / m;
    AepSplit {
        var,
        e_cond_var,
        var_v,
        discrepancy: (var - e_cond_var - var_v).abs(),
    }
}

/// Output AEP variance Var[log P_{Y^n}(Y^n)] with its total-variance split.
pub fn aep_variance(dmc: &DmcSpec, code: &DiscreteCode, guard: u64) -> Result<AepSplit> {
    let kernel = CodeKernel::new(dmc, code, guard)?;
    let py = kernel.output();
    let h = par_sum(kernel.space.size, |y| if py[y] > 0.0 { -py[y] * py[y].ln() } else { 0.0 });
    Ok(aep_from(&kernel, &py, h))
}

/// Result of [`counterexample_extend`].
#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub code: DiscreteCode,
    pub appended: usize,
    /// ⌈(ε−ε′)/(1−ε)·M′⌉ before any reduction needed to meet the target.
    pub appended_formula: usize,
    pub eps_base_max: f64,
    pub eps_avg: f64,
    pub eps_max: f64,
    pub p_s1: f64,
    /// D(P_{Y^n} ‖ P*).
    pub d_total: f64,
    /// D(P_{Y|X=x₀} ‖ P_Y*).
    pub d_x0: f64,
    /// D(P′_{Y^n} ‖ P*) for the codewords other than x₀ⁿ.
    pub d_rest: f64,
    pub report: BoundReport,
}

/// Average-error code: append copies of the constant word
/// x₀ⁿ to a max-error base code and check the exact decomposition
/// D(P_{Y^n}‖P*) ≥ P_S(1)·n·D(W_{x₀}‖P_Y*) + P_S(0)·D(P′_{Y^n}‖P*) − log 2.
pub fn counterexample_extend(
    dmc: &DmcSpec,
    caod: &[f64],
    base: &DiscreteCode,
    x0: usize,
    eps_target: f64,
    guard: u64,
) -> Result<Counterexample> {
    if x0 >= dmc.input_size() {
        return invalid("x0 out of range");
    }
    let d_x0 = kl_slices(dmc.row(x0), caod).value();
    if !(d_x0 > 0.0) {
        return Err(FbError::Precondition("D(P_{Y|X=x0} || P_Y*) must be positive".into()));
    }
    let kb = CodeKernel::new(dmc, base, guard)?;
    let db = ml_decode(dmc, base, guard)?;
    let (_, eps_b) = exact_error(&kb, &db);
    if eps_b >= eps_target {
        return Err(FbError::Precondition(format!(
            "base max error {eps_b} is not below the target {eps_target}"
        )));
    }
    let mp = base.m() as f64;
    let formula = ((eps_target - eps_b) / (1.0 - eps_target) * mp - 1e-12).ceil().max(0.0) as usize;
    let mut k = formula;
    let (code, kernel, dec, eps_avg, eps_max) = loop {
        let mut words = base.words.clone();
        words.extend(std::iter::repeat(vec![x0; base.n]).take(k));
        let mut code = DiscreteCode::new(base.n, words)?;
        code.criterion = Criterion::Avg;
        let kernel = CodeKernel::new(dmc, &code, guard)?;
        let dec = ml_decode(dmc, &code, guard)?;
        let (ea, em) = exact_error(&kernel, &dec);
        if ea <= eps_target || k == 0 {
            break (code, kernel, dec, ea, em);
        }
        k -= 1;
    };
    let _ = dec;
    let sp = kernel.space;
    let pstar = caod_power(caod, &sp);
    let py = kernel.output();
    let d_total = par_sum(sp.size, |y| xlogy_ratio(py[y], pstar[y]));
    let is_x0: Vec<bool> = code.words.iter().map(|w| w.iter().all(|&s| s == x0)).collect();
    let s1 = is_x0.iter().filter(|&&b| b).count();
    let m = code.m();
    let p_s1 = s1 as f64 / m as f64;
    let rest: Vec<&Vec<f64>> = kernel
        .rows
        .iter()
        .zip(&is_x0)
        .filter(|(_, &b)| !b)
        .map(|(r, _)| r)
        .collect();
    let d_rest = if rest.is_empty() {
        0.0
    } else {
        let mr = rest.len() as f64;
        par_sum(sp.size, |y| {
            let p = rest.iter().map(|r| r[y]).sum::<f64>() / mr;
            xlogy_ratio(p, pstar[y])
        })
    };
    let rhs = p_s1 * code.n as f64 * d_x0 + (1.0 - p_s1) * d_rest - std::f64::consts::LN_2;
    let report = BoundReport::ge("avg-error-decomposition", d_total, rhs, Dim::Log)
        .with("P_S(1)", p_s1, Dim::Plain)
        .with("D_x0", d_x0, Dim::Log)
        .with("D_rest", d_rest, Dim::Log)
        .with("eps_base_max", eps_b, Dim::Plain)
        .with("eps_avg", eps_avg, Dim::Plain)
        .with("appended", k as f64, Dim::Plain)
        .with("D_per_n", d_total / code.n as f64, Dim::Log);
    Ok(Counterexample {
        appended: k,
        appended_formula: formula,
        eps_base_max: eps_b,
        eps_avg,
        eps_max,
        p_s1,
        d_total,
        d_x0,
        d_rest,
        report,
        code,
    })
}

/// Random code with i.i.d. uniform symbols from `alphabet` letters.
/// With `distinct`, codewords are sampled without replacement.
pub fn random_code(alphabet: usize, n: usize, m: usize, seed: u64, distinct: bool) -> Result<DiscreteCode> {
    let total = count_states(alphabet, n);
    if distinct && (m as u128) > total {
        return invalid("more distinct codewords requested than exist");
    }
    let mut rng = stream_rng(seed, 0);
    let words = if distinct && total <= 1 << 24 {
        let sp = Space::new(alphabet, n, u64::MAX)?;
        let mut idx = sample(&mut rng, total as usize, m).into_vec();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| {
                let mut w = vec![0; n];
                sp.decode(i, &mut w);
                w
            })
            .collect()
    } else {
        let mut words: Vec<Vec<usize>> = Vec::with_capacity(m);
        while words.len() < m {
            let w: Vec<usize> = (0..n).map(|_| rng.gen_range(0..alphabet)).collect();
            if !distinct || !words.contains(&w) {
                words.push(w);
            }
        }
        words
    };
    DiscreteCode::new(n, words)
}

/// Every codebook of `m` distinct words from the binary (or q-ary) cube of
/// length `n`, as increasing word-index combinations.
pub fn enumerate_codebooks(alphabet: usize, n: usize, m: usize) -> Result<Vec<DiscreteCode>> {
    let total = count_states(alphabet, n);
    if total > 1 << 16 {
        return invalid("input space too large to enumerate codebooks");
    }
    let total = total as usize;
    let sp = Space::new(alphabet, n, u64::MAX)?;
    let word = |i: usize| {
        let mut w = vec![0; n];
        sp.decode(i, &mut w);
        w
    };
    let mut out = Vec::new();
    if m > total {
        return Ok(out);
    }
    let mut comb: Vec<usize> = (0..m).collect();
    loop {
        out.push(DiscreteCode::new(n, comb.iter().map(|&i| word(i)).collect())?);
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if comb[i] < total - m + i {
                comb[i] += 1;
                for j in i + 1..m {
                    comb[j] = comb[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Code merging constant-composition subcodes: `k` words of weight `wa`
/// followed by `k` words of weight `wb` (binary input).
pub fn merged_composition_code(n: usize, wa: usize, wb: usize, k: usize, seed: u64) -> Result<DiscreteCode> {
    let mut rng = stream_rng(seed, 1);
    let mut words = Vec::new();
    for &w in &[wa, wb] {
        if w > n {
            return invalid("weight exceeds blocklength");
        }
        for _ in 0..k {
            let pos = sample(&mut rng, n, w).into_vec();
            let mut word = vec![0; n];
            for p in pos {
                word[p] = 1;
            }
            words.push(word);
        }
    }
    DiscreteCode::new(n, words)
}

/// Information density of every (codeword, output) pair is finite?
pub fn all_densities_finite(dmc: &DmcSpec, code: &DiscreteCode) -> bool {
    code.words
        .iter()
        .all(|w| w.iter().all(|&x| dmc.row(x).iter().all(|&p| p > 0.0)))
}

/// Log-likelihood ratio log P_{Y|X=c}(y)/Q(y) for every output y.
pub fn log_ratio_row(row: &[f64], q: &[f64]) -> Vec<ExtReal> {
    row.iter()
        .zip(q)
        .map(|(&p, &qq)| {
            if p == 0.0 {
                ExtReal::NegInf
            } else if qq == 0.0 {
                ExtReal::PosInf
            } else {
                ExtReal::Finite((p / qq).ln())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::blahut_arimoto;
    use crate::space::DEFAULT_GUARD;

    fn rep(n: usize) -> DiscreteCode {
        DiscreteCode::new(n, vec![vec![0; n], vec![1; n]]).unwrap()
    }

    #[test]
    fn repetition_majority_table() {
        let dmc = DmcSpec::bsc(0.2).unwrap();
        let dec = ml_decode(&dmc, &rep(3), DEFAULT_GUARD).unwrap();
        let sp = Space::new(2, 3, DEFAULT_GUARD).unwrap();
        for y in 0..8 {
            let w = sp.count_symbol(y, 1);
            assert_eq!(dec[y], if w >= 2 { 1 } else { 0 });
        }
    }

    #[test]
    fn repetition_error() {
        let d: f64 = 0.2;
        let dmc = DmcSpec::bsc(d).unwrap();
        let k = CodeKernel::new(&dmc, &rep(3), DEFAULT_GUARD).unwrap();
        let dec = ml_decode(&dmc, &rep(3), DEFAULT_GUARD).unwrap();
        let (a, m) = exact_error(&k, &dec);
        let want = 3.0 * d * d * (1.0 - d) + d.powi(3);
        assert!((a - want).abs() < 1e-15 && (m - want).abs() < 1e-15);
        assert!((want - 0.104).abs() < 1e-12);
    }

    #[test]
    fn trivial_decoders() {
        let dmc = DmcSpec::bsc(0.2).unwrap();
        let one = DiscreteCode::new(2, vec![vec![0, 1]]).unwrap();
        assert!(ml_decode(&dmc, &one, DEFAULT_GUARD).unwrap().iter().all(|&d| d == 0));
        let nl = DmcSpec::noiseless(2);
        let code = DiscreteCode::new(2, vec![vec![0, 1], vec![1, 1], vec![0, 0]]).unwrap();
        let k = CodeKernel::new(&nl, &code, DEFAULT_GUARD).unwrap();
        let (a, m) = exact_error(&k, &ml_decode(&nl, &code, DEFAULT_GUARD).unwrap());
        assert_eq!((a, m), (0.0, 0.0));
        let twins = DiscreteCode::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap();
        let k = CodeKernel::new(&dmc, &twins, DEFAULT_GUARD).unwrap();
        let (a, m) = exact_error(&k, &ml_decode(&dmc, &twins, DEFAULT_GUARD).unwrap());
        assert!((a - 0.5).abs() < 1e-15);
        assert_eq!(m, 1.0);
    }

    #[test]
    fn ties_are_canonical() {
        // permuted words have equal likelihood at symmetric outputs
        let dmc = DmcSpec::new(vec![vec![0.7, 0.3], vec![0.1, 0.9]], None, None).unwrap();
        let code = DiscreteCode::new(3, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        let dec = ml_decode(&dmc, &code, DEFAULT_GUARD).unwrap();
        // y = 000 and y = 111 are symmetric in all three codewords
        assert_eq!(dec[0], 0);
        assert_eq!(dec[7], 0);
    }

    #[test]
    fn induced_output_examples() {
        let dmc = DmcSpec::bsc(0.2).unwrap();
        let p = induced_output(&dmc, &rep(2), DEFAULT_GUARD).unwrap();
        let want = [0.34, 0.16, 0.16, 0.34];
        for (a, b) in p.masses().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let full = DiscreteCode::new(3, (0..8).map(|i| (0..3).map(|j| (i >> j) & 1).collect()).collect()).unwrap();
        let p = induced_output(&DmcSpec::bsc(0.11).unwrap(), &full, DEFAULT_GUARD).unwrap();
        assert!(p.masses().iter().all(|&m| (m - 0.125).abs() < 1e-15));
    }

    #[test]
    fn metrics_invariants() {
        let dmc = DmcSpec::bsc(0.11).unwrap();
        let sol = blahut_arimoto(&dmc, 1e-12, 100_000).unwrap();
        let q = sol.caod_masses().unwrap().to_vec();
        let m = code_metrics(&dmc, &rep(3), &q, DEFAULT_GUARD).unwrap();
        assert!(m.identity_discrepancy < 1e-9);
        assert!(m.second_pass_discrepancy < 1e-9);
        assert!(m.d_cond_discrepancy < 1e-9);
        assert!(m.dconvk_holds);
        assert!(m.empirical_k[0].divergence <= m.d_out / 3.0 + 1e-12);
        assert!(m.eps_max >= m.eps_avg);
        assert!(m.aep.discrepancy < 1e-9);

        let code = random_code(2, 8, 16, 5, false).unwrap();
        let m = code_metrics(&dmc, &code, &q, DEFAULT_GUARD).unwrap();
        assert!(m.identity_discrepancy < 1e-9 && m.dconvk_holds && m.second_pass_discrepancy < 1e-9);

        // caod-matched full code
        let full = DiscreteCode::new(3, (0..8).map(|i| (0..3).map(|j| (i >> j) & 1).collect()).collect()).unwrap();
        let m = code_metrics(&dmc, &full, &q, DEFAULT_GUARD).unwrap();
        assert!(m.d_out.abs() < 1e-12);
        assert!((m.empirical_k[0].masses[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aep_single_codeword_is_iid_sum() {
        let dmc = DmcSpec::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]], None, None).unwrap();
        let code = DiscreteCode::new(5, vec![vec![0; 5]]).unwrap();
        let a = aep_variance(&dmc, &code, DEFAULT_GUARD).unwrap();
        let l = [0.8f64.ln(), 0.2f64.ln()];
        let mean = 0.8 * l[0] + 0.2 * l[1];
        let v1 = 0.8 * (l[0] - mean).powi(2) + 0.2 * (l[1] - mean).powi(2);
        assert!((a.var - 5.0 * v1).abs() < 1e-12);
        assert!(a.var_v.abs() < 1e-15);
    }

    #[test]
    fn counterexample_zero_append() {
        let dmc = DmcSpec::bsc(0.11).unwrap();
        let q = [0.5, 0.5];
        let base = random_code(2, 6, 2, 1, true).unwrap();
        let kb = CodeKernel::new(&dmc, &base, DEFAULT_GUARD).unwrap();
        let (_, em) = exact_error(&kb, &ml_decode(&dmc, &base, DEFAULT_GUARD).unwrap());
        let r = counterexample_extend(&dmc, &q, &base, 0, em + 1e-13, DEFAULT_GUARD).unwrap();
        assert_eq!(r.appended, 0);
        assert!(r.report.passed());
        // BSC symmetric: D(W_0 || caod) = C
        let c = std::f64::consts::LN_2 - crate::numeric::h2(0.11);
        assert!((r.d_x0 - c).abs() < 1e-12);
    }

    #[test]
    fn codebook_enumeration_counts() {
        assert_eq!(enumerate_codebooks(2, 4, 2).unwrap().len(), 120);
        assert_eq!(enumerate_codebooks(2, 1, 3).unwrap().len(), 0);
        let all = enumerate_codebooks(2, 3, 4).unwrap();
        assert_eq!(all.len(), 70);
        assert!(all.iter().all(|c| {
            let mut w = c.words.clone();
            w.dedup();
            w.len() == 4
        }));
    }

    #[test]
    fn code_file_roundtrip() {
        let s = r#"{"n":3,"M":2,"alphabet":"dmc","words":[[0,0,0],[1,1,1]],"criterion":"max"}"#;
        let c = Codebook::from_json(s).unwrap();
        assert_eq!(c, Codebook::Dmc(rep(3)));
        assert_eq!(Codebook::from_json(&c.to_json()).unwrap(), c);
        let bad = r#"{"n":3,"M":3,"alphabet":"dmc","words":[[0,0,0],[1,1,1]]}"#;
        assert!(Codebook::from_json(bad).is_err());
        let a = r#"{"n":2,"alphabet":"awgn","words":[[0.5,-1.0]]}"#;
        assert!(matches!(Codebook::from_json(a).unwrap(), Codebook::Awgn(_)));
    }
}
