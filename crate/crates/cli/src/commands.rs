use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;

use serde_json::{json, Value};

use dnarate::channel_sim::{read_dump, write_dump, InstanceDims};
use dnarate::decoder_sim::{
    decode_output, run_pipeline, simulate_trial, ClusteringConfig, DecodeReport, PipelineConfig, DEFAULT_EPSILON_PRIME,
    DEFAULT_WORK_BUDGET,
};
use dnarate::rates::{
    achievable_outer_rate_exact, achievable_outer_rate_mc, channel_capacity, expected_gated_capacity, optimize_scheme,
    r_max, rate_profiles, EstimateMethod, IndexRateChoice, OptimizeConfig, RateEstimate, RateMethod,
    DEFAULT_ENUMERATION_CAP, DEFAULT_INDEX_EPSILON,
};
use dnarate::{ChannelParams, SchemeParams};

use crate::error::CliError;
use crate::settings::{Flags, Method, SweepVar};

pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;
pub const DEFAULT_TRIALS: usize = 10;

/// What a command prints: `text` on stdout in CSV mode, `csv` in files,
/// `json` in JSON mode.
pub struct Output {
    pub text: String,
    pub csv: String,
    pub json: Value,
    /// Goes to stderr regardless of format.
    pub note: Option<String>,
}

impl Output {
    fn table(csv: String, json: Value) -> Self {
        Self {
            text: csv.clone(),
            csv,
            json,
            note: None,
        }
    }
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::missing(flag))
}

fn channel(f: &Flags) -> Result<ChannelParams, CliError> {
    Ok(ChannelParams::new(
        need(f.c, "c")?,
        need(f.beta, "beta")?,
        need(f.p, "p")?,
    )?)
}

fn samples(f: &Flags) -> Result<u64, CliError> {
    match f.samples.unwrap_or(DEFAULT_SAMPLES) {
        0 => Err(CliError::validation("--samples: must be at least 1")),
        s => Ok(s),
    }
}

fn tail_eps(f: &Flags) -> Result<f64, CliError> {
    match f.tail_eps.unwrap_or(DEFAULT_TAIL_EPS) {
        t if t > 0.0 && t < 1.0 => Ok(t),
        t => Err(CliError::validation(format!("--tail-eps: {t} is not in (0, 1)"))),
    }
}

fn block_size(f: &Flags) -> Result<usize, CliError> {
    match need(f.k, "K")? {
        0 => Err(CliError::validation("--K: must be at least 1")),
        k => Ok(k),
    }
}

fn method_name(m: EstimateMethod) -> &'static str {
    m.as_str()
}

fn optimize_config(f: &Flags) -> Result<OptimizeConfig, CliError> {
    let epsilon = f.epsilon.unwrap_or(DEFAULT_INDEX_EPSILON);
    let index_rate = match f.rix {
        Some(r) => IndexRateChoice::Fixed(r),
        None => IndexRateChoice::Sweep {
            d_cap: f.d_cap.unwrap_or(8),
            epsilon,
        },
    };
    let method = match f.method.unwrap_or(Method::Auto) {
        Method::Exact => RateMethod::Exact,
        Method::Mc => RateMethod::MonteCarlo,
        Method::Auto => RateMethod::Auto,
    };
    Ok(OptimizeConfig {
        rin_grid: f.rin_grid.unwrap_or(512),
        samples: samples(f)?,
        seed: f.seed.unwrap_or(0),
        index_rate,
        method,
        tail_eps: tail_eps(f)?,
        ..OptimizeConfig::default()
    })
}

pub fn capacity(f: &Flags) -> Result<Output, CliError> {
    let params = channel(f)?;
    let cap = channel_capacity(&params, tail_eps(f)?);
    let best = r_max(&params, f.epsilon.unwrap_or(DEFAULT_INDEX_EPSILON))?;
    Ok(Output {
        text: format!("{cap:.6}\n"),
        csv: format!(
            "c,beta,p,capacity,r_max,d_star\n{},{},{},{cap:.6},{:.6},{}\n",
            params.c,
            params.beta,
            params.p.value(),
            best.r_max,
            best.d_star
        ),
        json: json!({
            "c": params.c, "beta": params.beta, "p": params.p.value(),
            "capacity": cap, "r_max": best.r_max, "d_star": best.d_star, "r_ix_used": best.r_ix_used,
        }),
        note: None,
    })
}

pub fn rate(f: &Flags) -> Result<Output, CliError> {
    let params = channel(f)?;
    let k = block_size(f)?;
    let scheme = SchemeParams::new(k, need(f.rix, "rix")?, need(f.rin, "rin")?, 1.0)?;
    let eps = tail_eps(f)?;
    let (seed, samples) = (f.seed.unwrap_or(0), samples(f)?);
    let exact = || achievable_outer_rate_exact(&params, k, scheme.r_ix, scheme.r_in, eps, DEFAULT_ENUMERATION_CAP);
    let mc = || achievable_outer_rate_mc(&params, k, scheme.r_ix, scheme.r_in, samples, seed);
    let est: RateEstimate = match f.method.unwrap_or(Method::Auto) {
        Method::Exact => exact()?,
        Method::Mc => mc()?,
        Method::Auto => match exact() {
            Err(dnarate::Error::EnumerationTooLarge { .. }) => mc()?,
            other => other?,
        },
    };
    let r = dnarate::rates::overall_rate(scheme.r_in, est.value, scheme.r_ix, params.beta)?;
    let csv = format!(
        "K,R_ix,R_in,R_out,R,stderr,method,samples,truncation_mass\n{k},{:.6},{:.6},{:.6},{r:.6},{:.6},{},{},{:.3e}\n",
        scheme.r_ix,
        scheme.r_in,
        est.value,
        est.stderr,
        method_name(est.method),
        est.samples,
        est.truncation_mass
    );
    let json = json!({ "K": k, "R_ix": scheme.r_ix, "R_in": scheme.r_in, "R": r, "estimate": est });
    Ok(Output::table(csv, json))
}

pub fn optimize(f: &Flags) -> Result<Output, CliError> {
    let params = channel(f)?;
    let k = block_size(f)?;
    let best = optimize_scheme(&params, k, &optimize_config(f)?)?;
    let s = &best.scheme;
    let d = best.d_candidate.map_or(String::new(), |d| d.to_string());
    let csv = format!(
        "K,R_ix,R_in,R_out,R,stderr,method,d_candidate,valid\n{k},{:.6},{:.6},{:.6},{:.6},{:.6},{},{d},{}\n",
        s.r_ix,
        s.r_in,
        s.r_out,
        best.rate,
        best.rate_stderr,
        method_name(best.estimate.method),
        best.validity.is_valid()
    );
    Ok(Output::table(csv, serde_json::to_value(&best).expect("plain data")))
}

fn sweep_values(f: &Flags, var: SweepVar) -> Result<Vec<f64>, CliError> {
    let raw = f.values.as_deref().ok_or_else(|| CliError::missing("values"))?;
    let values = raw
        .split(',')
        .map(|v| {
            let v = v.trim();
            let x: f64 = v
                .parse()
                .map_err(|_| CliError::validation(format!("--values: cannot parse `{v}`")))?;
            if var == SweepVar::K && (x.fract() != 0.0 || x < 1.0) {
                return Err(CliError::validation(format!(
                    "--values: K = {v} is not a positive integer"
                )));
            }
            Ok(x)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    if values.is_empty() || values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::validation(
            "--values: must be nonempty and strictly increasing",
        ));
    }
    Ok(values)
}

struct CurveRow {
    x: f64,
    r_ix: f64,
    r_in: f64,
    r_out: f64,
    r: f64,
    stderr: f64,
    method: &'static str,
}

fn asymptotic_row(params: &ChannelParams, x: f64, epsilon: f64) -> Result<CurveRow, CliError> {
    let best = r_max(params, epsilon)?;
    let e = expected_gated_capacity(params, best.r_ix_used, DEFAULT_TAIL_EPS);
    Ok(CurveRow {
        x,
        r_ix: best.r_ix_used,
        r_in: e,
        r_out: 1.0,
        r: dnarate::rates::overall_rate(e, 1.0, best.r_ix_used, params.beta)?,
        stderr: 0.0,
        method: "asymptotic",
    })
}

fn optimized_row(params: &ChannelParams, k: usize, x: f64, config: &OptimizeConfig) -> Result<CurveRow, CliError> {
    let best = optimize_scheme(params, k, config)?;
    Ok(CurveRow {
        x,
        r_ix: best.scheme.r_ix,
        r_in: best.scheme.r_in,
        r_out: best.scheme.r_out,
        r: best.rate,
        stderr: best.estimate.stderr,
        method: method_name(best.estimate.method),
    })
}

pub fn curve(f: &Flags) -> Result<Output, CliError> {
    let var = need(f.sweep, "sweep")?;
    let values = sweep_values(f, var)?;
    let config = optimize_config(f)?;
    let epsilon = f.epsilon.unwrap_or(DEFAULT_INDEX_EPSILON);
    let base = || channel(f);
    let rows: Vec<CurveRow> = match var {
        SweepVar::K => {
            if f.asymptotic {
                return Err(CliError::validation(
                    "--asymptotic: a K sweep has no K -> infinity mode",
                ));
            }
            let params = base()?;
            values
                .iter()
                .map(|&k| optimized_row(&params, k as usize, k, &config))
                .collect::<Result<_, _>>()?
        }
        SweepVar::C | SweepVar::P => values
            .iter()
            .map(|&x| {
                let params = if var == SweepVar::C {
                    ChannelParams::new(x, need(f.beta, "beta")?, need(f.p, "p")?)?
                } else {
                    ChannelParams::new(need(f.c, "c")?, need(f.beta, "beta")?, x)?
                };
                if f.asymptotic {
                    asymptotic_row(&params, x, epsilon)
                } else {
                    optimized_row(&params, block_size(f)?, x, &config)
                }
            })
            .collect::<Result<_, _>>()?,
        SweepVar::RIn => {
            let params = base()?;
            let r_ix = match f.rix {
                Some(r) => r,
                None => r_max(&params, epsilon)?.r_ix_used,
            };
            if f.asymptotic {
                let e = expected_gated_capacity(&params, r_ix, tail_eps(f)?);
                values
                    .iter()
                    .map(|&r_in| {
                        let r_out = if e > r_in { 1.0 } else { 0.0 };
                        Ok(CurveRow {
                            x: r_in,
                            r_ix,
                            r_in,
                            r_out,
                            r: dnarate::rates::overall_rate(r_in, r_out, r_ix, params.beta)?,
                            stderr: 0.0,
                            method: "asymptotic",
                        })
                    })
                    .collect::<Result<_, CliError>>()?
            } else {
                let k = block_size(f)?;
                let profile = &rate_profiles(&params, k, &[r_ix], &config)?[0];
                values
                    .iter()
                    .map(|&r_in| {
                        let est = profile.estimate(r_in);
                        Ok(CurveRow {
                            x: r_in,
                            r_ix,
                            r_in,
                            r_out: est.value,
                            r: dnarate::rates::overall_rate(r_in, est.value, r_ix, params.beta)?,
                            stderr: est.stderr,
                            method: method_name(est.method),
                        })
                    })
                    .collect::<Result<_, CliError>>()?
            }
        }
    };

    // Full precision so that every row re-evaluates exactly.
    let mut csv = String::from("sweep_var,R_ix,R_in,R_out,R,stderr,method\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.x, row.r_ix, row.r_in, row.r_out, row.r, row.stderr, row.method
        )
        .expect("writing to a String");
    }
    let json = json!({
        "sweep": var.name(),
        "rows": rows.iter().map(|r| json!({
            "value": r.x, "R_ix": r.r_ix, "R_in": r.r_in, "R_out": r.r_out,
            "R": r.r, "stderr": r.stderr, "method": r.method,
        })).collect::<Vec<_>>(),
    });
    Ok(Output::table(csv, json))
}

fn scheme(f: &Flags) -> Result<SchemeParams, CliError> {
    Ok(SchemeParams::new(
        block_size(f)?,
        need(f.rix, "rix")?,
        need(f.rin, "rin")?,
        need(f.rout, "rout")?,
    )?)
}

fn clustering(f: &Flags, p: f64) -> Result<ClusteringConfig, CliError> {
    Ok(match f.rho {
        Some(rho) => ClusteringConfig::new(rho)?,
        None => ClusteringConfig::for_crossover(p, DEFAULT_EPSILON_PRIME)?,
    })
}

fn report_rows(reports: &[DecodeReport]) -> String {
    let mut csv = String::from("trial,M_C,M_Ix,M_In,s,t,success\n");
    for (i, r) in reports.iter().enumerate() {
        writeln!(
            csv,
            "{i},{},{},{},{},{},{}",
            r.m_wrong_clusters,
            r.m_wrong_index,
            r.m_wrong_inner,
            r.erasures,
            r.errors,
            u8::from(r.outer_success)
        )
        .expect("writing to a String");
    }
    csv
}

pub fn simulate(f: &Flags) -> Result<Output, CliError> {
    let params = channel(f)?;
    let scheme = scheme(f)?;
    let trials = f.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::validation("--trials: must be at least 1"));
    }
    let config = PipelineConfig {
        m: need(f.m, "M")?,
        trials,
        seed: f.seed.unwrap_or(0),
        clustering: clustering(f, params.p.value())?,
        work_budget: f.budget.unwrap_or(DEFAULT_WORK_BUDGET),
    };
    let result = run_pipeline(&params, &scheme, &config)?;
    if let Some(path) = &f.dump {
        let output = simulate_trial(&params, result.dims, config.seed, 0);
        let file = File::create(path).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        write_dump(&output, BufWriter::new(file))?;
    }
    let d = result.dims;
    let mut note = format!(
        "success_rate={:.6} trials={trials} M={} L={} N={} blocks={}",
        result.success_rate,
        d.m,
        d.l,
        d.n,
        d.m / scheme.k
    );
    for v in &result.validity.violations {
        write!(
            note,
            "\nwarning: scheme violates {}",
            serde_json::to_string(v).expect("plain data")
        )
        .expect("writing to a String");
    }
    let csv = report_rows(&result.reports);
    Ok(Output {
        text: csv.clone(),
        csv,
        json: serde_json::to_value(&result).expect("plain data"),
        note: Some(note),
    })
}

pub fn replay(f: &Flags) -> Result<Output, CliError> {
    let path = f.input.as_ref().ok_or_else(|| CliError::missing("input"))?;
    let file = File::open(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let output = read_dump(std::io::BufReader::new(file))?;
    let dims = InstanceDims::new(output.m, output.len, output.n())?;
    let beta = f.beta.unwrap_or((dims.m as f64).log2() / dims.l as f64);
    let c = f.c.unwrap_or(dims.n as f64 / dims.m as f64);
    let params = ChannelParams::new(c, beta, need(f.p, "p")?)?;
    let scheme = scheme(f)?;
    let report = decode_output(&output, &params, &scheme, &clustering(f, params.p.value())?)?;
    let csv = report_rows(std::slice::from_ref(&report));
    Ok(Output::table(csv, serde_json::to_value(&report).expect("plain data")))
}
