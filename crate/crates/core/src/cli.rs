//! Command-line front end: argument parsing, report envelopes, exit codes.

use crate::channels::{load_channel, product_masses, solve, Channel, DmcSpec};
use crate::codes::awgn::awgn_mc_report;
use crate::codes::{code_metrics, load_code, Codebook, DiscreteCode, RealCode};
use crate::concentration as conc;
use crate::converses::{self as cv, ConverseInput, KlMode, OutKlMode, RhoMode};
use crate::divergences::transport::{wasserstein, TransportProblem};
use crate::divergences::{kl, tv, FiniteDist};
use crate::error::{invalid, FbError, Result};
use crate::gaussian_norms as gn;
use crate::numeric::{round_sig, LogBase};
use crate::report::{BoundReport, Dim, Verdict};
use crate::space::{Space, DEFAULT_GUARD, MIN_GUARD};
use crate::testing::{self, Variant};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

mod selftest;
mod sweep;

pub use selftest::selftest_payload;

#[derive(Parser, Debug)]
#[command(name = "fblab", version, about = "Finite-blocklength bounds and code statistics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalOpts {
    /// Write the report envelope here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, env = "FBLAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = DEFAULT_GUARD)]
    pub guard: u64,
    /// Log base of reported values: 2 or e.
    #[arg(long, global = true, default_value = "2")]
    pub base: String,
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum DivOp {
    Kl,
    Tv,
    W1,
    W2,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum BoundName {
    Augustin,
    Sf,
    Sfvar,
    Outkl,
    Tilt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenArg {
    Iid,
    Sphere,
    Peaky,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Capacity, caod and dispersion of a channel.
    Capacity {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
    /// Divergence or transport distance between two distributions.
    Div {
        #[arg(long, value_enum)]
        op: DivOp,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        cost: Option<PathBuf>,
    },
    /// Neyman–Pearson β_α(P, Q).
    Beta {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
    },
    /// Meta-converse against the caod product (or a supplied Q over Y^n).
    Metaconverse {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "avg")]
        variant: VariantArg,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long = "Q")]
        q: Option<PathBuf>,
    },
    /// Converse-type bounds for a code.
    Bound {
        #[arg(long, value_enum)]
        name: BoundName,
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        code: PathBuf,
        /// Maximal error used by the bound: a number or `auto` (exact / MC).
        #[arg(long, default_value = "auto")]
        eps: String,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long = "F")]
        f: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        delta_prime: Option<f64>,
        /// Monte Carlo samples for AWGN codes.
        #[arg(long, default_value_t = 100_000)]
        mc: usize,
    },
    /// Error probabilities and output statistics of a code.
    Analyze {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Concentration transfers from the caod to the code output.
    Conc {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        prop: u8,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
    },
    /// Generate a Gaussian-type codebook and report its ℓq norms.
    Norms {
        #[arg(long, value_enum)]
        gen: GenArg,
        #[arg(long)]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "P", default_value_t = 1.0)]
        p: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value = "1,2,4,inf")]
        q: String,
        /// Also write the generated codebook here.
        #[arg(long)]
        save_code: Option<PathBuf>,
    },
    /// Quadratic-form deviation of an AWGN code.
    Qform {
        #[arg(long)]
        code: PathBuf,
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long = "P", default_value_t = 1.0)]
        p: f64,
    },
    /// Metric series over an n-grid, from a sweep spec file.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exhaustive small-instance self checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Avg,
    Max,
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct ReportEnvelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: GlobalOpts,
    pub inputs: Vec<InputDigest>,
    pub timestamp: u64,
    pub verdict: Verdict,
    pub payload: Value,
}

/// Command output before wrapping.
pub struct Outcome {
    pub payload: Value,
    pub verdict: Verdict,
    pub inputs: Vec<PathBuf>,
}

fn computed(payload: Value, inputs: Vec<PathBuf>) -> Outcome {
    Outcome {
        payload,
        verdict: Verdict::Pass,
        inputs,
    }
}

/// Round every float in a JSON tree to 12 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN), 12);
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Parse, run and print; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(v) => v.exit_code(),
        Err(e) => {
            eprintln!("fblab: {e}");
            1
        }
    }
}

fn run_cli(cli: &Cli) -> Result<Verdict> {
    let g = &cli.global;
    if g.guard < MIN_GUARD {
        return invalid(format!("guard must be at least {MIN_GUARD}"));
    }
    if !(g.tol > 0.0) {
        return invalid("tol must be positive");
    }
    let base = LogBase::parse(&g.base).ok_or_else(|| FbError::Invalid(format!("unknown base {}", g.base)))?;
    let threads = g.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FbError::Invalid(e.to_string()))?;
    let out = pool.install(|| execute(&cli.cmd, g, base))?;
    let inputs = out.inputs.iter().map(|p| digest(p)).collect::<Result<Vec<_>>>()?;
    let env = ReportEnvelope {
        tool: "fblab",
        version: env!("CARGO_PKG_VERSION"),
        command: command_name(&cli.cmd).into(),
        config: g.clone(),
        inputs,
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        verdict: out.verdict,
        payload: round_json(out.payload),
    };
    let text = serde_json::to_string_pretty(&env)? + "\n";
    match &g.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(out.verdict)
}

fn command_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Capacity { .. } => "capacity",
        Cmd::Div { .. } => "div",
        Cmd::Beta { .. } => "beta",
        Cmd::Metaconverse { .. } => "metaconverse",
        Cmd::Bound { .. } => "bound",
        Cmd::Analyze { .. } => "analyze",
        Cmd::Conc { .. } => "conc",
        Cmd::Norms { .. } => "norms",
        Cmd::Qform { .. } => "qform",
        Cmd::Sweep { .. } => "sweep",
        Cmd::Selftest => "selftest",
    }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

/// Convert the listed top-level fields of a JSON object from nats.
fn convert_fields(mut v: Value, fields: &[(&str, Dim)], base: LogBase) -> Value {
    if let Value::Object(o) = &mut v {
        for (name, dim) in fields {
            if let Some(x) = o.get_mut(*name) {
                *x = convert_value(x.take(), *dim, base);
            }
        }
        o.insert("units".into(), Value::String(base.unit().into()));
    }
    v
}

fn convert_value(v: Value, dim: Dim, base: LogBase) -> Value {
    match v {
        Value::Number(n) => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(dim.convert(x, base)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.into_iter().map(|x| convert_value(x, dim, base)).collect()),
        other => other,
    }
}

fn report_outcome(reports: Vec<BoundReport>, base: LogBase, inputs: Vec<PathBuf>) -> Result<Outcome> {
    let verdict = reports.iter().fold(Verdict::Pass, |v, r| v.worst(r.verdict));
    let conv: Vec<BoundReport> = reports.iter().map(|r| r.in_base(base)).collect();
    let payload = if conv.len() == 1 { to_value(&conv[0])? } else { to_value(&conv)? };
    Ok(Outcome {
        payload,
        verdict,
        inputs,
    })
}

/// Distribution file: a JSON array of masses or {"masses": [...], "points": [...]}.
pub fn load_dist(path: &Path) -> Result<(FiniteDist, Option<Vec<f64>>)> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let nums = |v: &Value| -> Result<Vec<f64>> {
        v.as_array()
            .ok_or_else(|| FbError::Parse("expected an array of numbers".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| FbError::Parse("expected a number".into())))
            .collect()
    };
    match &v {
        Value::Array(_) => Ok((FiniteDist::new(nums(&v)?)?, None)),
        Value::Object(o) => {
            let m = o.get("masses").ok_or_else(|| FbError::Parse("missing masses".into()))?;
            let pts = o.get("points").map(nums).transpose()?;
            Ok((FiniteDist::new(nums(m)?)?, pts))
        }
        _ => Err(FbError::Parse("distribution must be an array or object".into())),
    }
}

/// Numeric CSV matrix (comma or whitespace separated, `#` comments).
pub fn load_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| FbError::Parse(format!("{s}: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(FbError::Parse("ragged matrix".into()));
    }
    Ok(rows)
}

/// Function file for F: an array over Y^n, an array over Y (extended
/// additively), or {"weight": symbol} for the Hamming distance to symbol^n.
pub fn load_function(path: &Path, space: &Space) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if let Some(s) = v.get("weight").and_then(Value::as_u64) {
        return Ok((conc::LipschitzFn::hamming_weight(space, s as usize).table, None));
    }
    let arr: Vec<f64> = serde_json::from_value(v)?;
    if arr.len() == space.size {
        Ok((arr, None))
    } else if arr.len() == space.radix {
        Ok((conc::LipschitzFn::additive(space, &arr, 1.0)?.table, Some(arr)))
    } else {
        Err(FbError::Dimension(arr.len(), space.size))
    }
}

fn dmc_code(ch: &Channel, code: &Codebook) -> Result<(DmcSpec, DiscreteCode)> {
    match (ch, code) {
        (Channel::Dmc(d), Codebook::Dmc(c)) => {
            c.validate_for(d)?;
            Ok((d.clone(), c.clone()))
        }
        _ => invalid("this command needs a DMC channel and a DMC code"),
    }
}

fn parse_eps(s: &str) -> Result<Option<f64>> {
    if s == "auto" {
        return Ok(None);
    }
    let e: f64 = s.parse().map_err(|_| FbError::Invalid(format!("bad eps {s}")))?;
    if !(0.0..1.0).contains(&e) {
        return invalid("eps must lie in [0, 1)");
    }
    Ok(Some(e))
}

fn parse_qs(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| match t.trim() {
            "inf" => Ok(f64::INFINITY),
            x => x.parse().map_err(|_| FbError::Invalid(format!("bad q {x}"))),
        })
        .collect()
}

fn execute(cmd: &Cmd, g: &GlobalOpts, base: LogBase) -> Result<Outcome> {
    match cmd {
        Cmd::Capacity { channel, max_iter } => {
            let ch = load_channel(channel)?;
            let sol = solve(&ch, g.tol, *max_iter)?;
            let v = convert_fields(
                to_value(&sol)?,
                &[
                    ("capacity", Dim::Log),
                    ("dispersion", Dim::LogSq),
                    ("d_per_input", Dim::Log),
                    ("a1", Dim::LogSq),
                    ("gap", Dim::Log),
                    ("lambda", Dim::Log),
                ],
                base,
            );
            Ok(computed(v, vec![channel.clone()]))
        }
        Cmd::Div { op, p, q, cost } => {
            let (pd, pp) = load_dist(p)?;
            let (qd, qp) = load_dist(q)?;
            let mut inputs = vec![p.clone(), q.clone()];
            let v = match op {
                DivOp::Kl => json!({"op": "kl", "value": base.from_nats(kl(&pd, &qd)?.value()), "units": base.unit()}),
                DivOp::Tv => json!({"op": "tv", "value": tv(&pd, &qd)?}),
                DivOp::W1 | DivOp::W2 => {
                    let order = if matches!(op, DivOp::W1) { 1 } else { 2 };
                    let prob = match cost {
                        Some(c) => {
                            inputs.push(c.clone());
                            TransportProblem::new(pd, qd, load_matrix(c)?, order)?
                        }
                        None => {
                            let xs = pp.unwrap_or_else(|| (0..pd.len()).map(|i| i as f64).collect());
                            let ys = qp.unwrap_or_else(|| (0..qd.len()).map(|i| i as f64).collect());
                            TransportProblem::on_line(&xs, pd, &ys, qd, order)?
                        }
                    };
                    let sol = wasserstein(&prob)?;
                    json!({"op": if order == 1 {"w1"} else {"w2"}, "value": sol.value, "primal": sol.primal,
                           "dual": sol.dual, "gap": sol.gap, "marginal_error": sol.marginal_error,
                           "coupling": sol.coupling})
                }
            };
            Ok(computed(v, inputs))
        }
        Cmd::Beta { alpha, p, q } => {
            let (pd, _) = load_dist(p)?;
            let (qd, _) = load_dist(q)?;
            let b = testing::beta_alpha(*alpha, &pd, &qd)?;
            Ok(computed(to_value(&b)?, vec![p.clone(), q.clone()]))
        }
        Cmd::Metaconverse {
            channel,
            code,
            alpha,
            variant,
            delta,
            q,
        } => {
            let ch = load_channel(channel)?;
            let (dmc, c) = dmc_code(&ch, &load_code(code)?)?;
            let mut inputs = vec![channel.clone(), code.clone()];
            let sp = Space::new(dmc.output_size(), c.n, g.guard)?;
            let qv = match q {
                Some(path) => {
                    inputs.push(path.clone());
                    load_dist(path)?.0.into_masses()
                }
                None => {
                    let sol = solve(&ch, g.tol, 100_000)?;
                    product_masses(sol.caod_masses()?, c.n, sp.size)
                }
            };
            let var = match variant {
                VariantArg::Avg => Variant::Avg,
                VariantArg::Max => Variant::Max,
            };
            let r = testing::metaconverse(&dmc, &c, &qv, *alpha, var, *delta, g.guard)?;
            report_outcome(vec![r], base, inputs)
        }
        Cmd::Bound {
            name,
            channel,
            code,
            eps,
            t,
            f,
            delta,
            delta_prime,
            mc,
        } => {
            let ch = load_channel(channel)?;
            let cb = load_code(code)?;
            let mut inputs = vec![channel.clone(), code.clone()];
            let eps = parse_eps(eps)?;
            let sol = solve(&ch, g.tol, 100_000)?;
            let r = match (&ch, &cb) {
                (Channel::Awgn(spec), Codebook::Awgn(rc)) => bound_awgn(*name, spec, rc, sol.capacity, eps, *mc, g.seed)?,
                _ => {
                    let (dmc, c) = dmc_code(&ch, &cb)?;
                    let (kernel, eps_exact) = cv::dmc_converse_input(&dmc, &c, g.guard)?;
                    let e = eps.unwrap_or(eps_exact);
                    let star = product_masses(sol.caod_masses()?, c.n, kernel.space.size);
                    let inp = ConverseInput {
                        rows: &kernel.rows,
                        q: &star,
                        eps: e,
                    };
                    match name {
                        BoundName::Augustin => cv::augustin_bound(&inp, RhoMode::Default)?,
                        BoundName::Sfvar => cv::kl_lower_bound(&inp, KlMode::Sfvar { s_m: None })?,
                        BoundName::Sf => {
                            let s = cv::exact_s_m(&inp)?;
                            let dp = delta_prime.unwrap_or((1.0 - e) / 2.0);
                            let dl = delta.unwrap_or((s / dp.max(1e-300)).sqrt());
                            cv::kl_lower_bound(&inp, KlMode::Sf { delta: dl, delta_prime: dp })?
                        }
                        BoundName::Outkl => {
                            let d = kl(&FiniteDist::with_tol(kernel.output(), 1e-10)?, &FiniteDist::with_tol(star.clone(), 1e-10)?)?;
                            let mode = if dmc.has_zero_in_used_column() { OutKlMode::ZeroEntries } else { OutKlMode::Auto };
                            cv::output_kl_upper(&ch, sol.capacity, c.n, (c.m() as f64).ln(), e, Some(d.value()), mode)?
                        }
                        BoundName::Tilt => {
                            let path = f.as_ref().ok_or_else(|| FbError::Invalid("tilt needs --F".into()))?;
                            inputs.push(path.clone());
                            let (table, _) = load_function(path, &kernel.space)?;
                            cv::tilted_bound(&inp, &table, *t)?
                        }
                    }
                }
            };
            report_outcome(vec![r], base, inputs)
        }
        Cmd::Analyze { channel, code, mc } => {
            let ch = load_channel(channel)?;
            let cb = load_code(code)?;
            let inputs = vec![channel.clone(), code.clone()];
            match (&ch, &cb) {
                (Channel::Awgn(spec), Codebook::Awgn(rc)) => {
                    let r = awgn_mc_report(spec, rc, mc.unwrap_or(100_000), g.seed)?;
                    Ok(computed(to_value(&r)?, inputs))
                }
                _ => {
                    let (dmc, c) = dmc_code(&ch, &cb)?;
                    let sol = solve(&ch, g.tol, 100_000)?;
                    let m = code_metrics(&dmc, &c, sol.caod_masses()?, g.guard)?;
                    let v = convert_fields(
                        to_value(&m)?,
                        &[
                            ("d_out", Dim::Log),
                            ("d_cond", Dim::Log),
                            ("i_code", Dim::Log),
                            ("i_direct", Dim::Log),
                            ("h_out", Dim::Log),
                        ],
                        base,
                    );
                    Ok(computed(v, inputs))
                }
            }
        }
        Cmd::Conc {
            channel,
            code,
            f,
            prop,
            theta,
        } => {
            let ch = load_channel(channel)?;
            let (dmc, c) = dmc_code(&ch, &load_code(code)?)?;
            let inputs = vec![channel.clone(), code.clone(), f.clone()];
            let sol = solve(&ch, g.tol, 100_000)?;
            let caod = sol.caod_masses()?.to_vec();
            let sp = Space::new(dmc.output_size(), c.n, g.guard)?;
            let (table, single) = load_function(f, &sp)?;
            let reports = match prop {
                3 => {
                    let s = single.ok_or_else(|| FbError::Invalid("the Cramér transfer needs a single-letter f".into()))?;
                    vec![conc::cramer_transfer(&s, *theta, &dmc, &caod, &c, g.guard)?]
                }
                _ => {
                    let lip = conc::lipschitz_constant(&table, &sp)?;
                    let cert = conc::azuma_cert(c.n, lip);
                    if *prop == 1 {
                        let p_out = crate::codes::induced_output(&dmc, &c, g.guard)?;
                        let star = FiniteDist::with_tol(product_masses(&caod, c.n, sp.size), 1e-10)?;
                        vec![conc::expectation_transfer_exact(&table, &p_out, &star, &cert)?.with("lipschitz", lip, Dim::Plain)]
                    } else {
                        let grid: Vec<f64> = (0..=8).map(|k| k as f64 * c.n as f64 / 8.0).collect();
                        let tt = conc::tail_transfer(&table, &dmc, &caod, sol.capacity, &c, &cert, &grid, g.guard)?;
                        let mut v = tt.tails;
                        v.push(tt.variance);
                        v
                    }
                }
            };
            report_outcome(reports, base, inputs)
        }
        Cmd::Norms {
            gen,
            n,
            m,
            p,
            delta,
            q,
            save_code,
        } => {
            let kind = match gen {
                GenArg::Iid => gn::GenKind::IidGaussian,
                GenArg::Sphere => gn::GenKind::Spherical,
                GenArg::Peaky => gn::GenKind::Peaky,
            };
            let out = gn::generate(&gn::GaussianGenSpec {
                kind,
                n: *n,
                m: *m,
                power: *p,
                seed: g.seed,
                delta: *delta,
            })?;
            if let Some(path) = save_code {
                std::fs::write(path, Codebook::Awgn(out.code.clone()).to_json())?;
            }
            let prof = gn::lq_profile(&out.code, &parse_qs(q)?, *p, None, None)?;
            let rows: Vec<Value> = prof
                .rows
                .iter()
                .map(|r| json!({"q": if r.q.is_infinite() { json!("inf") } else { json!(r.q) },
                                "median": r.median, "mean": r.mean, "upper_half_quantile": r.upper_half_quantile}))
                .collect();
            Ok(computed(json!({"rescaled": out.rescaled, "norms": rows, "fourth_moment": prof.fourth}), vec![]))
        }
        Cmd::Qform { code, a, eps, p } => {
            let rc: RealCode = match load_code(code)? {
                Codebook::Awgn(r) => r,
                _ => return invalid("qform needs an AWGN code"),
            };
            let rows = load_matrix(a)?;
            let mat = nalgebra::DMatrix::from_fn(rows.len(), rows.first().map_or(0, |r| r.len()), |i, j| rows[i][j]);
            let spec = crate::channels::AwgnSpec::new(*p)?;
            let rep = gn::quadratic_form_report(&rc, &spec, &mat, *eps)?;
            let mut reports = vec![rep.report.clone()];
            reports.extend(rep.identity.clone());
            let mut o = report_outcome(reports, base, vec![code.clone(), a.clone()])?;
            o.payload = json!({"a_eig_min": rep.a_eig_min, "a_eig_max": rep.a_eig_max,
                               "sigma_eig_min": rep.sigma_eig_min, "sigma_eig_max": rep.sigma_eig_max,
                               "reports": o.payload});
            Ok(o)
        }
        Cmd::Sweep { spec, csv } => {
            let (payload, text, verdict) = sweep::run_sweep(spec, g)?;
            if let Some(path) = csv {
                std::fs::write(path, text)?;
            }
            Ok(Outcome {
                payload,
                verdict,
                inputs: vec![spec.clone()],
            })
        }
        Cmd::Selftest => {
            let (payload, verdict) = selftest_payload(g.seed)?;
            Ok(Outcome {
                payload,
                verdict,
                inputs: vec![],
            })
        }
    }
}

fn bound_awgn(
    name: BoundName,
    spec: &crate::channels::AwgnSpec,
    rc: &RealCode,
    capacity: f64,
    eps: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    let log_m = (rc.m() as f64).ln();
    match name {
        BoundName::Sfvar => {
            let e = match eps {
                Some(e) => e,
                None => awgn_mc_report(spec, rc, samples, seed)?.eps_max_upper,
            };
            if e >= 1.0 {
                return Ok(BoundReport::ge("kl-sfvar-awgn", f64::NAN, f64::NAN, Dim::Log).verdict(Verdict::Inconclusive));
            }
            cv::kl_lower_bound_awgn(spec, rc, e)
        }
        BoundName::Outkl => {
            let mc = awgn_mc_report(spec, rc, samples, seed)?;
            let e = eps.unwrap_or(mc.eps_max_upper);
            if e >= 1.0 {
                return Ok(BoundReport::le("outkl-awgn", mc.d_out.mean, f64::INFINITY, Dim::Log).verdict(Verdict::Inconclusive));
            }
            let r = cv::output_kl_upper(&Channel::Awgn(*spec), capacity, rc.n, log_m, e, None, OutKlMode::Auto)?;
            Ok(cv::with_mc_lhs(r, &mc.d_out))
        }
        _ => invalid("only sfvar and outkl are available for AWGN codes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tmp(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("fblab-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn rounding_is_recursive() {
        let v = round_json(json!({"a": [0.1234567890123456, 1], "b": {"c": 2.0000000000001}}));
        assert_eq!(v["a"][0], json!(0.123456789012));
        assert_eq!(v["a"][1], json!(1));
        assert_eq!(v["b"]["c"], json!(2.0));
    }

    #[test]
    fn eps_and_q_parsing() {
        assert_eq!(parse_eps("auto").unwrap(), None);
        assert_eq!(parse_eps("0.25").unwrap(), Some(0.25));
        assert!(parse_eps("1").is_err() && parse_eps("x").is_err());
        assert_eq!(parse_qs("1, 4,inf").unwrap(), vec![1.0, 4.0, f64::INFINITY]);
        assert!(parse_qs("2,z").is_err());
    }

    #[test]
    fn file_loaders() {
        let (d, pts) = load_dist(&tmp("d.json", r#"{"masses": [0.5, 0.5], "points": [-1, 1]}"#)).unwrap();
        assert_eq!(d.masses(), &[0.5, 0.5]);
        assert_eq!(pts, Some(vec![-1.0, 1.0]));
        assert!(load_dist(&tmp("bad.json", "[0.5, 0.6]")).is_err());
        let m = load_matrix(&tmp("m.csv", "# cost\n0, 1\n1 0\n")).unwrap();
        assert_eq!(m, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(load_matrix(&tmp("r.csv", "0 1\n1\n")).is_err());
        let sp = Space::new(2, 3, 1 << 10).unwrap();
        let (w, _) = load_function(&tmp("w.json", r#"{"weight": 0}"#), &sp).unwrap();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[7], 3.0);
        let (add, per) = load_function(&tmp("f.json", "[0, 1]"), &sp).unwrap();
        assert_eq!(add, w);
        assert_eq!(per, Some(vec![0.0, 1.0]));
        assert!(load_function(&tmp("g.json", "[0, 1, 2]"), &sp).is_err());
    }

    #[test]
    fn digest_is_sha256() {
        let d = digest(&tmp("e.txt", "")).unwrap();
        assert_eq!(d.sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn run_exit_codes() {
        assert_eq!(run(["fblab", "--bogus"]), 1);
        assert_eq!(run(["fblab", "--guard", "5", "selftest"]), 1);
        let ch = tmp("bec.json", r#"{"type": "bec", "erasure": 0.5}"#);
        let out = std::env::temp_dir().join(format!("fblab-cli-{}/cap.json", std::process::id()));
        let args = ["fblab", "--out", out.to_str().unwrap(), "capacity", "--channel", ch.to_str().unwrap()];
        assert_eq!(run(args), 0);
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["payload"]["capacity"], json!(0.5));
        assert_eq!(v["payload"]["units"], json!("bits"));
    }
}
