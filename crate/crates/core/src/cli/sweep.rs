//! n-grid sweeps driven by a JSON spec, emitted as CSV and a JSON series.

use super::GlobalOpts;
use crate::channels::{solve, Channel};
use crate::codes::{aep_variance, code_metrics, random_code};
use crate::error::{invalid, Result};
use crate::gaussian_norms as gn;
use crate::numeric::fmt12;
use crate::report::Verdict;
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::Path;

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SweepSpec {
    /// Random DMC codes at a fixed fraction of capacity.
    Aep {
        channel: Value,
        n_grid: Vec<usize>,
        #[serde(default = "default_rate")]
        rate_fraction: f64,
        metrics: Vec<String>,
    },
    /// Generated AWGN codebooks and their ℓq norms.
    Norms {
        gen: gn::GenKind,
        #[serde(rename = "M")]
        m: usize,
        #[serde(rename = "P", default = "one")]
        power: f64,
        #[serde(default = "four")]
        q: f64,
        n_grid: Vec<usize>,
        /// Constant δ, or omitted for δ_n = n^{−1/2} (peaky only).
        delta: Option<f64>,
        metrics: Vec<String>,
    },
}

fn default_rate() -> f64 {
    0.8
}
fn one() -> f64 {
    1.0
}
fn four() -> f64 {
    4.0
}

const AEP_METRICS: &[&str] = &["var", "var_over_n", "var_over_n2", "eps_avg", "eps_max", "d_out", "M"];
const NORM_METRICS: &[&str] = &["median", "mean", "upper_half_quantile", "fourth_mean", "fourth_sigma", "rescaled"];

fn check_metrics(ms: &[String], allowed: &[&str]) -> Result<()> {
    match ms.iter().find(|m| !allowed.contains(&m.as_str())) {
        Some(m) => invalid(format!("unknown metric {m}; expected one of {}", allowed.join(", "))),
        None => Ok(()),
    }
}

fn aep_row(ch: &Channel, n: usize, rate: f64, seed: u64, guard: u64, metrics: &[String]) -> Result<Vec<f64>> {
    let dmc = ch.as_dmc()?;
    let sol = solve(ch, 1e-12, 100_000)?;
    let k = dmc.input_size();
    let cap = (k as f64).powi(n as i32);
    let m = ((rate * n as f64 * sol.capacity).exp().round()).clamp(2.0, cap) as usize;
    let code = random_code(k, n, m, seed, true)?;
    let aep = aep_variance(dmc, &code, guard)?;
    let cm = if metrics.iter().any(|x| x.starts_with("eps") || x == "d_out") {
        Some(code_metrics(dmc, &code, sol.caod_masses()?, guard)?)
    } else {
        None
    };
    let nf = n as f64;
    Ok(metrics
        .iter()
        .map(|x| match x.as_str() {
            "var" => aep.var,
            "var_over_n" => aep.var / nf,
            "var_over_n2" => aep.var / (nf * nf),
            "eps_avg" => cm.as_ref().map_or(f64::NAN, |c| c.eps_avg),
            "eps_max" => cm.as_ref().map_or(f64::NAN, |c| c.eps_max),
            "d_out" => cm.as_ref().map_or(f64::NAN, |c| c.d_out),
            _ => m as f64,
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn norm_row(kind: gn::GenKind, m: usize, p: f64, q: f64, n: usize, delta: Option<f64>, seed: u64, metrics: &[String]) -> Result<Vec<f64>> {
    let d = match kind {
        gn::GenKind::Peaky => Some(delta.unwrap_or(1.0 / (n as f64).sqrt())),
        _ => None,
    };
    let g = gn::generate(&gn::GaussianGenSpec {
        kind,
        n,
        m,
        power: p,
        seed,
        delta: d,
    })?;
    let prof = gn::lq_profile(&g.code, &[q], p, None, None)?;
    let r = &prof.rows[0];
    Ok(metrics
        .iter()
        .map(|x| match x.as_str() {
            "median" => r.median,
            "mean" => r.mean,
            "upper_half_quantile" => r.upper_half_quantile,
            "fourth_mean" => prof.fourth.mean,
            "fourth_sigma" => prof.fourth.sample_sigma,
            _ => g.rescaled as f64,
        })
        .collect())
}

/// Returns (JSON series, CSV text, verdict).
pub fn run_sweep(path: &Path, g: &GlobalOpts) -> Result<(Value, String, Verdict)> {
    let spec: SweepSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let (grid, metrics) = match &spec {
        SweepSpec::Aep { n_grid, metrics, .. } => {
            check_metrics(metrics, AEP_METRICS)?;
            (n_grid.clone(), metrics.clone())
        }
        SweepSpec::Norms { n_grid, metrics, .. } => {
            check_metrics(metrics, NORM_METRICS)?;
            (n_grid.clone(), metrics.clone())
        }
    };
    let mut csv = String::from("n");
    if metrics.is_empty() {
        csv.push('\n');
        return Ok((json!({"metrics": metrics, "rows": []}), csv, Verdict::Pass));
    }
    csv.push_str(",status");
    for m in &metrics {
        csv.push(',');
        csv.push_str(m);
    }
    csv.push('\n');
    let channel = match &spec {
        SweepSpec::Aep { channel, .. } => Some(match channel {
            Value::String(p) => crate::channels::load_channel(Path::new(p))?,
            v => Channel::from_json(&v.to_string())?,
        }),
        _ => None,
    };
    let mut rows = Vec::new();
    let mut verdict = Verdict::Pass;
    for (i, &n) in grid.iter().enumerate() {
        let seed = crate::rng::mix(g.seed, i as u64);
        let res = match &spec {
            SweepSpec::Aep { rate_fraction, .. } => {
                aep_row(channel.as_ref().expect("aep channel"), n, *rate_fraction, seed, g.guard, &metrics)
            }
            SweepSpec::Norms {
                gen, m, power, q, delta, ..
            } => norm_row(*gen, *m, *power, *q, n, *delta, seed, &metrics),
        };
        csv.push_str(&n.to_string());
        match res {
            Ok(vals) => {
                csv.push_str(",ok");
                for v in &vals {
                    csv.push(',');
                    csv.push_str(&fmt12(*v));
                }
                let obj: serde_json::Map<String, Value> =
                    metrics.iter().cloned().zip(vals.iter().map(|v| json!(v))).collect();
                rows.push(json!({"n": n, "status": "ok", "values": obj}));
            }
            Err(e) => {
                verdict = Verdict::Inconclusive;
                csv.push_str(",failed");
                for _ in &metrics {
                    csv.push(',');
                }
                rows.push(json!({"n": n, "status": "failed", "error": e.to_string()}));
            }
        }
        csv.push('\n');
    }
    Ok((json!({"metrics": metrics, "rows": rows}), csv, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn opts() -> GlobalOpts {
        super::super::Cli::parse_from(["fblab", "selftest"]).global
    }

    fn spec(name: &str, body: &str) -> std::path::PathBuf {
        let p = std::env::temp_dir().join(format!("fblab-sweep-{}-{name}", std::process::id()));
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn norms_rows_and_csv() {
        let p = spec("n.json", r#"{"kind": "norms", "gen": "peaky", "M": 8, "n_grid": [16, 64], "metrics": ["median", "rescaled"]}"#);
        let (v, csv, verdict) = run_sweep(&p, &opts()).unwrap();
        assert_eq!(verdict, Verdict::Pass);
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,status,median,rescaled");
        assert!(lines[2].starts_with("64,ok,"));
    }

    #[test]
    fn failed_rows_are_marked() {
        // M above the input-space size is clamped, so n = 1 still runs
        let p = spec("f.json", r#"{"kind": "aep", "channel": {"type": "bsc", "delta": 0.11}, "n_grid": [1, 4], "rate_fraction": 3.0, "metrics": ["var"]}"#);
        let (v, csv, verdict) = run_sweep(&p, &opts()).unwrap();
        assert_eq!(verdict, Verdict::Pass, "{csv}");
        assert_eq!(v["rows"][0]["status"], "ok");
        let p = spec("g.json", r#"{"kind": "norms", "gen": "iid-gaussian", "M": 8, "n_grid": [0, 8], "metrics": ["mean"]}"#);
        let (v, csv, verdict) = run_sweep(&p, &opts()).unwrap();
        assert_eq!(verdict, Verdict::Inconclusive);
        assert_eq!(v["rows"][0]["status"], "failed");
        assert!(csv.lines().nth(1).unwrap().starts_with("0,failed"));
    }

    #[test]
    fn rejects_unknown_metrics_and_fields() {
        let p = spec("u.json", r#"{"kind": "norms", "gen": "spherical", "M": 8, "n_grid": [8], "metrics": ["var"]}"#);
        assert!(run_sweep(&p, &opts()).is_err());
        let p = spec("x.json", r#"{"kind": "norms", "gen": "spherical", "M": 8, "n_grid": [8], "metrics": [], "extra": 1}"#);
        assert!(run_sweep(&p, &opts()).is_err());
    }
}
