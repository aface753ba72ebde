use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Mc,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    #[value(name = "K")]
    K,
    #[value(name = "R_in")]
    RIn,
    #[value(name = "c")]
    C,
    #[value(name = "p")]
    P,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::K => "K",
            SweepVar::RIn => "R_in",
            SweepVar::C => "c",
            SweepVar::P => "p",
        }
    }
}

/// Flags shared by every subcommand. Each one can also be set in the file
/// given by `--config` under the same name without the dashes.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Reading rate, N = cM reads.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Strand density log2(M)/L.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Crossover probability of the BSC.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Strands per inner block.
    #[arg(long = "K", global = true)]
    pub k: Option<usize>,
    /// Index code rate.
    #[arg(long, global = true)]
    pub rix: Option<f64>,
    /// Inner code rate.
    #[arg(long, global = true)]
    pub rin: Option<f64>,
    /// Outer code rate.
    #[arg(long, global = true)]
    pub rout: Option<f64>,
    /// Monte-Carlo samples [default: 10000].
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Master seed [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Poisson tail mass left out of truncated sums [default: 1e-12].
    #[arg(long = "tail-eps", global = true)]
    pub tail_eps: Option<f64>,
    /// Worker threads; 0 or unset uses every core.
    #[arg(long, global = true, env = "DNARATE_THREADS")]
    pub threads: Option<usize>,
    /// Also write the result to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format [default: csv].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// File of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Outer-rate estimator [default: auto].
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// R_in grid points for optimization [default: 512].
    #[arg(long = "rin-grid", global = true)]
    pub rin_grid: Option<usize>,
    /// Largest d in the candidates R_ix = (1 - epsilon) C_d [default: 8].
    #[arg(long = "d-cap", global = true)]
    pub d_cap: Option<u64>,
    /// epsilon in R_ix = (1 - epsilon) C_d [default: 0.001].
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Input strands for simulation.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,
    /// Simulation trials [default: 10].
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Clustering diameter as a fraction of L [default: 2p + 0.05].
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Ceiling on N^2 L for simulation [default: 1e12].
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    /// Write the first trial's channel output here.
    #[arg(long, global = true)]
    pub dump: Option<PathBuf>,
    /// Channel dump to decode.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Variable swept by `curve`.
    #[arg(long, global = true, value_enum)]
    pub sweep: Option<SweepVar>,
    /// Comma-separated, strictly increasing sweep values.
    #[arg(long, global = true)]
    pub values: Option<String>,
    /// Use the K -> infinity rate in curves.
    #[arg(long, global = true)]
    pub asymptotic: bool,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::validation(format!("config key `{key}`: cannot parse `{value}`")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, false).map_err(|_| CliError::validation(format!("config key `{key}`: unknown value `{value}`")))
}

impl Flags {
    /// Fills every unset flag from the config file, if one was given.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_config(&path)?;
        self.merge_under(file);
        Ok(self)
    }

    fn merge_under(&mut self, file: Flags) {
        macro_rules! fill {
            ($($field:ident),*) => { $( if self.$field.is_none() { self.$field = file.$field; } )* };
        }
        fill!(
            c, beta, p, k, rix, rin, rout, samples, seed, tail_eps, threads, out, format, method, rin_grid, d_cap,
            epsilon, m, trials, rho, budget, dump, input, sweep, values
        );
        self.asymptotic |= file.asymptotic;
    }
}

pub fn read_config(path: &Path) -> Result<Flags, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Flags, CliError> {
    let mut f = Flags::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::validation(format!(
                "config line {}: expected `key = value`",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "c" => f.c = Some(parse(key, value)?),
            "beta" => f.beta = Some(parse(key, value)?),
            "p" => f.p = Some(parse(key, value)?),
            "K" => f.k = Some(parse(key, value)?),
            "rix" => f.rix = Some(parse(key, value)?),
            "rin" => f.rin = Some(parse(key, value)?),
            "rout" => f.rout = Some(parse(key, value)?),
            "samples" => f.samples = Some(parse(key, value)?),
            "seed" => f.seed = Some(parse(key, value)?),
            "tail-eps" => f.tail_eps = Some(parse(key, value)?),
            "threads" => f.threads = Some(parse(key, value)?),
            "out" => f.out = Some(PathBuf::from(value)),
            "format" => f.format = Some(parse_enum(key, value)?),
            "method" => f.method = Some(parse_enum(key, value)?),
            "rin-grid" => f.rin_grid = Some(parse(key, value)?),
            "d-cap" => f.d_cap = Some(parse(key, value)?),
            "epsilon" => f.epsilon = Some(parse(key, value)?),
            "M" => f.m = Some(parse(key, value)?),
            "trials" => f.trials = Some(parse(key, value)?),
            "rho" => f.rho = Some(parse(key, value)?),
            "budget" => f.budget = Some(parse(key, value)?),
            "dump" => f.dump = Some(PathBuf::from(value)),
            "input" => f.input = Some(PathBuf::from(value)),
            "sweep" => f.sweep = Some(parse_enum(key, value)?),
            "values" => f.values = Some(value.to_string()),
            "asymptotic" => f.asymptotic = parse(key, value)?,
            _ => return Err(CliError::validation(format!("unknown config key `{key}`"))),
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let f = parse_config("# channel\nc = 2\nbeta=0.05 # density\n\nK = 3\nmethod = mc\nsweep = R_in\n").unwrap();
        assert_eq!(f.c, Some(2.0));
        assert_eq!(f.beta, Some(0.05));
        assert_eq!(f.k, Some(3));
        assert_eq!(f.method, Some(Method::Mc));
        assert_eq!(f.sweep, Some(SweepVar::RIn));
    }

    #[test]
    fn rejects_unknown_keys_and_garbage() {
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("c 2").is_err());
        assert!(parse_config("c = two").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let mut flags = Flags {
            c: Some(4.0),
            ..Flags::default()
        };
        flags.merge_under(parse_config("c = 2\np = 0.1").unwrap());
        assert_eq!(flags.c, Some(4.0));
        assert_eq!(flags.p, Some(0.1));
    }
}
