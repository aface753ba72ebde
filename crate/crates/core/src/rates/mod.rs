//! Capacity of the DNA storage channel and achievable rates of the
//! concatenated scheme with inner blocks of `K` strands.
//!
//! An inner block whose strands were drawn `d = (d_1, ..., d_K)` times sees
//! the mean gated capacity `C_d(R_ix) = (1/K) sum_i C_{d_i}(R_ix)` and is
//! recovered iff that exceeds `R_in`. The outer rate is achievable when it is
//! below the probability of recovery under a K-variate Poisson(c) draw vector.
//! [`OuterRateProfile`] holds the distribution of `C_d(R_ix)` so that the
//! recovery probability can be read off for any `R_in`.

mod exact;
mod monte_carlo;
mod optimize;
mod profile;

use serde::Serialize;

pub use exact::{achievable_outer_rate_exact, exact_profiles, multiset_count, DEFAULT_ENUMERATION_CAP};
pub use monte_carlo::{achievable_outer_rate_mc, mc_profiles, PoissonSampler, MC_CHUNK};
pub use optimize::{
    optimize_scheme, rate_profiles, rin_grid, IndexRateChoice, OptimizeConfig, OptimizedScheme, RateMethod,
};
pub use profile::OuterRateProfile;

use crate::error::{Error, Result};
use crate::multidraw::{binary_entropy, gate, ln_poisson_pmf, CapacityTable, CrossoverProb};
use crate::params::{ChannelParams, DrawVector, SchemeParams};
use crate::scalar::Real;

/// Tail mass used wherever a Poisson sum has to be truncated internally.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// Default `epsilon` in `R_ix = (1 - epsilon) C_d`.
pub const DEFAULT_INDEX_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Exact,
    MonteCarlo,
}

impl EstimateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateMethod::Exact => "exact",
            EstimateMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// An achievable outer rate together with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate<T = f64> {
    pub value: T,
    /// `sqrt(v (1 - v) / samples)` for Monte-Carlo, 0 for exact sums.
    pub stderr: T,
    pub method: EstimateMethod,
    pub samples: u64,
    /// Probability mass of the draw vectors left out of an exact sum.
    pub truncation_mass: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RMaxResult<T = f64> {
    pub r_max: T,
    pub d_star: u64,
    pub r_ix_used: T,
}

/// Smallest `d_max` with `P(Poisson(mean) > d_max) < tail_eps`, and that tail mass.
///
/// Evaluated in `f64` from the top down, so the tail is never formed as
/// `1 - cdf`.
pub(crate) fn poisson_truncation(mean: f64, tail_eps: f64) -> (u64, f64) {
    let top = (mean + 40.0 * mean.sqrt() + 60.0).ceil() as u64;
    let mut tail = 0.0;
    let mut d = top;
    while d > 0 {
        let next = tail + ln_poisson_pmf(mean, d).exp();
        if next >= tail_eps {
            break;
        }
        tail = next;
        d -= 1;
    }
    (d, tail)
}

/// Weights `p_c(d) C_d` for `d = 0..=d_max`.
fn weighted_capacities<T: Real>(params: &ChannelParams<T>, d_max: u64) -> (Vec<T>, CapacityTable<T>) {
    let table = CapacityTable::new(params.p, d_max);
    let terms = (0..=d_max)
        .map(|d| ln_poisson_pmf(params.c, d).exp() * table.get(d))
        .collect();
    (terms, table)
}

/// Capacity of the DNA storage channel, `sum_d p_c(d) C_d - beta (1 - e^{-c})`,
/// truncated where the Poisson tail falls below `tail_eps`.
pub fn channel_capacity<T: Real>(params: &ChannelParams<T>, tail_eps: T) -> T {
    let (d_max, _) = poisson_truncation(params.c.to_f64_lossy(), tail_eps.to_f64_lossy());
    let (terms, _) = weighted_capacities(params, d_max);
    let expected: T = terms.into_iter().rev().sum();
    expected + params.beta * (-params.c).exp_m1()
}

/// Mean gated capacity of one block, `(1/K) sum_i C_{d_i}(R_ix)`.
pub fn block_capacity<T: Real>(draws: &DrawVector, p: CrossoverProb<T>, r_ix: T) -> T {
    if draws.is_empty() {
        return T::zero();
    }
    let counts = draws.counts();
    let gated: Vec<T> = (0..counts.len() as u64)
        .map(|d| gate(crate::multidraw::multi_draw_capacity(d, p), r_ix))
        .collect();
    profile::gated_mean(&counts, &gated, draws.len())
}

/// `R = R_out R_in (1 - beta / R_ix)`.
pub fn overall_rate<T: Real>(r_in: T, r_out: T, r_ix: T, beta: T) -> Result<T> {
    if !(beta < r_ix) || !(r_ix <= T::one()) {
        return Err(Error::IndexOverhead {
            beta: beta.to_f64_lossy(),
            r_ix: r_ix.to_f64_lossy(),
        });
    }
    Ok(r_out * r_in * (T::one() - beta / r_ix))
}

/// `E[C_d(R_ix)] = sum_d p_c(d) C_d(R_ix)`.
pub fn expected_gated_capacity<T: Real>(params: &ChannelParams<T>, r_ix: T, tail_eps: T) -> T {
    let (d_max, _) = poisson_truncation(params.c.to_f64_lossy(), tail_eps.to_f64_lossy());
    let table = CapacityTable::new(params.p, d_max);
    (0..=d_max)
        .rev()
        .map(|d| ln_poisson_pmf(params.c, d).exp() * gate(table.get(d), r_ix))
        .sum()
}

/// Rate achievable for `K -> infinity` at index rate `R_ix`:
/// `E[C_d(R_ix)] (1 - beta / R_ix)`.
pub fn asymptotic_rate<T: Real>(params: &ChannelParams<T>, r_ix: T) -> Result<T> {
    let expected = expected_gated_capacity(params, r_ix, T::of(DEFAULT_TAIL_EPS));
    overall_rate(T::one(), expected, r_ix, params.beta)
}

/// Best `K -> infinity` rate over the threshold draw count `d*`, realized with
/// `R_ix = (1 - epsilon) C_{d*}`.
pub fn r_max<T: Real>(params: &ChannelParams<T>, epsilon: T) -> Result<RMaxResult<T>> {
    if !(epsilon > T::zero() && epsilon <= T::of(0.1)) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon.to_f64_lossy(),
            expected: "(0, 0.1]",
        });
    }
    let (d_max, _) = poisson_truncation(params.c.to_f64_lossy(), DEFAULT_TAIL_EPS);
    let (terms, table) = weighted_capacities(params, d_max);
    // tails[d] = sum_{j >= d} p_c(j) C_j
    let mut tails = vec![T::zero(); terms.len() + 1];
    for d in (0..terms.len()).rev() {
        tails[d] = tails[d + 1] + terms[d];
    }

    let mut best = RMaxResult {
        r_max: T::zero(),
        d_star: 1,
        r_ix_used: (T::one() - epsilon) * table.get(1),
    };
    for d_star in 1..=d_max.max(1) {
        // No later threshold can beat the tail sum, since 1 - beta/R_ix < 1.
        if tails[d_star as usize] <= best.r_max {
            break;
        }
        let r_ix = (T::one() - epsilon) * table.get(d_star);
        if !(r_ix > params.beta) {
            continue;
        }
        let value = asymptotic_rate(params, r_ix)?;
        if value > best.r_max {
            best = RMaxResult {
                r_max: value,
                d_star,
                r_ix_used: r_ix,
            };
        }
    }
    Ok(best)
}

/// `C - R_max`; tends to 0 as `p -> 0` or `c -> infinity`.
pub fn gap_to_capacity<T: Real>(params: &ChannelParams<T>, epsilon: T) -> Result<T> {
    Ok(channel_capacity(params, T::of(DEFAULT_TAIL_EPS)) - r_max(params, epsilon)?.r_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `beta >= R_ix`: the index alone fills the strand.
    IndexOverhead {
        beta: f64,
        r_ix: f64,
    },
    /// `beta < R_in (1 - beta/R_ix) (1 - h(2p))` fails.
    ClusteringCondition {
        beta: f64,
        bound: f64,
    },
    RateOutOfRange {
        name: &'static str,
        value: f64,
    },
}

/// Every condition a scheme violates; empty means valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SchemeValidity {
    pub violations: Vec<Violation>,
}

impl SchemeValidity {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_scheme<T: Real>(params: &ChannelParams<T>, scheme: &SchemeParams<T>) -> SchemeValidity {
    let mut violations = Vec::new();
    let in_open_unit = |x: T| x > T::zero() && x < T::one();
    for (name, value) in [("R_ix", scheme.r_ix), ("R_in", scheme.r_in)] {
        if !in_open_unit(value) {
            violations.push(Violation::RateOutOfRange {
                name,
                value: value.to_f64_lossy(),
            });
        }
    }
    if !(scheme.r_out > T::zero() && scheme.r_out <= T::one()) {
        violations.push(Violation::RateOutOfRange {
            name: "R_out",
            value: scheme.r_out.to_f64_lossy(),
        });
    }
    let beta = params.beta;
    if !(beta < scheme.r_ix) {
        violations.push(Violation::IndexOverhead {
            beta: beta.to_f64_lossy(),
            r_ix: scheme.r_ix.to_f64_lossy(),
        });
    }
    // Past p = 1/4 two reads of one strand are no closer than unrelated
    // strands, so h(2p) is held at its maximum there.
    let two_p = (T::of(2.0) * params.p.value()).min(T::of(0.5));
    let entropy = binary_entropy(two_p).expect("2p is within [0, 1/2]");
    let bound = scheme.r_in * (T::one() - beta / scheme.r_ix) * (T::one() - entropy);
    if !(beta < bound) {
        violations.push(Violation::ClusteringCondition {
            beta: beta.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    SchemeValidity { violations }
}
