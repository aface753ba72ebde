use serde::Serialize;

use super::profile::OuterRateProfile;
use super::{
    exact_profiles, mc_profiles, overall_rate, validate_scheme, RateEstimate, SchemeValidity, DEFAULT_ENUMERATION_CAP,
    DEFAULT_INDEX_EPSILON, DEFAULT_TAIL_EPS,
};
use crate::error::{Error, Result};
use crate::multidraw::multi_draw_capacity;
use crate::params::{ChannelParams, SchemeParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Exact,
    MonteCarlo,
    /// Exact when the enumeration fits `exact_cap`, Monte-Carlo otherwise.
    Auto,
}

/// Which index rates `optimize_scheme` tries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexRateChoice<T = f64> {
    /// `R_ix = (1 - epsilon) C_d` for `d = 1..=d_cap`.
    Sweep {
        d_cap: u64,
        epsilon: T,
    },
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeConfig<T = f64> {
    pub rin_grid: usize,
    pub samples: u64,
    pub seed: u64,
    pub index_rate: IndexRateChoice<T>,
    pub method: RateMethod,
    pub tail_eps: T,
    pub exact_cap: u128,
}

impl<T: Real> Default for OptimizeConfig<T> {
    fn default() -> Self {
        Self {
            rin_grid: 512,
            samples: 10_000,
            seed: 0,
            index_rate: IndexRateChoice::Sweep {
                d_cap: 8,
                epsilon: T::of(DEFAULT_INDEX_EPSILON),
            },
            method: RateMethod::Auto,
            tail_eps: T::of(DEFAULT_TAIL_EPS),
            exact_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedScheme<T = f64> {
    pub scheme: SchemeParams<T>,
    /// Outer rate at the chosen `(R_ix, R_in)`.
    pub estimate: RateEstimate<T>,
    pub rate: T,
    pub rate_stderr: T,
    /// `d` of the winning candidate `R_ix = (1 - epsilon) C_d`, if swept.
    pub d_candidate: Option<u64>,
    pub validity: SchemeValidity,
}

/// `j / (n + 1)` for `j = 1..=n`.
pub fn rin_grid<T: Real>(n: usize) -> Vec<T> {
    let denom = T::of_count(n as u64 + 1);
    (1..=n as u64).map(|j| T::of_count(j) / denom).collect()
}

/// Index-rate candidates paired with the draw count they come from.
fn candidates<T: Real>(params: &ChannelParams<T>, choice: IndexRateChoice<T>) -> Result<Vec<(T, Option<u64>)>> {
    let out = match choice {
        IndexRateChoice::Fixed(r_ix) => {
            if !(r_ix > params.beta && r_ix < T::one()) {
                return Err(Error::IndexOverhead {
                    beta: params.beta.to_f64_lossy(),
                    r_ix: r_ix.to_f64_lossy(),
                });
            }
            vec![(r_ix, None)]
        }
        IndexRateChoice::Sweep { d_cap, epsilon } => {
            let mut out: Vec<(T, Option<u64>)> = Vec::new();
            for d in 1..=d_cap {
                let r = (T::one() - epsilon) * multi_draw_capacity(d, params.p);
                if r > params.beta && out.last().is_none_or(|&(prev, _)| prev != r) {
                    out.push((r, Some(d)));
                }
            }
            out
        }
    };
    if out.is_empty() {
        return Err(Error::NoIndexRateCandidate);
    }
    Ok(out)
}

/// Outer-rate profiles for the given index rates with the requested method.
pub fn rate_profiles<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    r_ix: &[T],
    config: &OptimizeConfig<T>,
) -> Result<Vec<OuterRateProfile<T>>> {
    match config.method {
        RateMethod::Exact => exact_profiles(params, k, r_ix, config.tail_eps, DEFAULT_ENUMERATION_CAP),
        RateMethod::MonteCarlo => mc_profiles(params, k, r_ix, config.samples, config.seed),
        RateMethod::Auto => match exact_profiles(params, k, r_ix, config.tail_eps, config.exact_cap) {
            Err(Error::EnumerationTooLarge { .. }) => mc_profiles(params, k, r_ix, config.samples, config.seed),
            other => other,
        },
    }
}

/// Largest `R_in` in `[lo, lo + width]` that keeps the same set of
/// recovered blocks as `lo`.
fn push_right<T: Real>(profile: &OuterRateProfile<T>, lo: T, width: T) -> T {
    let index = profile.atom_index(lo);
    let (mut lo, mut hi) = (lo, lo + width);
    for _ in 0..16 {
        let mid = (lo + hi) / T::of(2.0);
        if profile.atom_index(mid) == index {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Best `(R_ix, R_in, R_out)` for block size `k`: grid search over `R_in` for
/// every index-rate candidate, then a bisection pass next to the best point.
pub fn optimize_scheme<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    config: &OptimizeConfig<T>,
) -> Result<OptimizedScheme<T>> {
    if config.rin_grid < 2 {
        return Err(Error::OutOfRange {
            name: "rin_grid",
            value: config.rin_grid as f64,
            expected: "{2, 3, ...}",
        });
    }
    let cands = candidates(params, config.index_rate)?;
    let r_ix: Vec<T> = cands.iter().map(|&(r, _)| r).collect();
    let profiles = rate_profiles(params, k, &r_ix, config)?;
    let grid: Vec<T> = rin_grid(config.rin_grid);
    let step = T::one() / T::of_count(config.rin_grid as u64 + 1);
    let beta = params.beta;

    let rate_at = |profile: &OuterRateProfile<T>, r_in: T| -> Result<T> {
        overall_rate(r_in, profile.estimate(r_in).value, profile.r_ix(), beta)
    };

    // (rate, candidate, r_in)
    let mut best: Option<(T, usize, T)> = None;
    for (ci, profile) in profiles.iter().enumerate() {
        let mut local: Option<(T, usize)> = None;
        for (gi, &r_in) in grid.iter().enumerate() {
            let rate = rate_at(profile, r_in)?;
            if local.is_none_or(|(r, _)| rate > r) {
                local = Some((rate, gi));
            }
        }
        let (_, gi) = local.expect("grid has at least two points");
        let mut starts = vec![grid[gi]];
        if gi > 0 {
            starts.push(grid[gi - 1]);
        }
        let mut points = vec![grid[gi]];
        points.extend(starts.iter().map(|&s| push_right(profile, s, step)));
        for r_in in points {
            let rate = rate_at(profile, r_in)?;
            if best.is_none_or(|(r, _, _)| rate > r) {
                best = Some((rate, ci, r_in));
            }
        }
    }

    let (rate, ci, r_in) = best.expect("at least one candidate");
    let profile = &profiles[ci];
    let estimate = profile.estimate(r_in);
    let scheme = SchemeParams::new(k, profile.r_ix(), r_in, estimate.value)?;
    let validity = validate_scheme(params, &scheme);
    Ok(OptimizedScheme {
        scheme,
        estimate,
        rate,
        rate_stderr: estimate.stderr * r_in * (T::one() - beta / profile.r_ix()),
        d_candidate: cands[ci].1,
        validity,
    })
}
