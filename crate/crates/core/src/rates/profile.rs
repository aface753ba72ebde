use serde::Serialize;

use super::{EstimateMethod, RateEstimate};
use crate::scalar::Real;

/// `(1/K) sum_d counts[d] g[d]`, accumulated from the largest draw count down.
///
/// Every route to a block capacity goes through here, so the same multiset
/// of draws always gives the same bits.
pub(crate) fn gated_mean<T: Real>(counts: &[u32], gated: &[T], k: usize) -> T {
    let mut acc = T::zero();
    for d in (0..counts.len()).rev() {
        if counts[d] != 0 {
            acc = acc + T::of_count(u64::from(counts[d])) * gated[d];
        }
    }
    acc / T::of_count(k as u64)
}

/// Distribution of the block capacity `C_d(R_ix)` for one index rate.
///
/// Stored as sorted atoms with tail sums, so `P(C_d(R_ix) > R_in)` costs a
/// binary search for any `R_in`.
#[derive(Debug, Clone, Serialize)]
pub struct OuterRateProfile<T = f64> {
    r_ix: T,
    values: Vec<T>,
    /// `above[i]`: mass of atoms `i..`. One longer than `values`.
    above: Vec<T>,
    counts_above: Option<Vec<u64>>,
    method: EstimateMethod,
    samples: u64,
    truncation_mass: T,
}

impl<T: Real> OuterRateProfile<T> {
    pub(crate) fn from_weighted(r_ix: T, mut atoms: Vec<(T, T)>, truncation_mass: T) -> Self {
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("block capacities are finite"));
        let mut values: Vec<T> = Vec::new();
        let mut weights: Vec<T> = Vec::new();
        for (v, w) in atoms {
            if values.last() == Some(&v) {
                let last = weights.len() - 1;
                weights[last] = weights[last] + w;
            } else {
                values.push(v);
                weights.push(w);
            }
        }
        let mut above = vec![T::zero(); values.len() + 1];
        for i in (0..values.len()).rev() {
            above[i] = above[i + 1] + weights[i];
        }
        Self {
            r_ix,
            values,
            above,
            counts_above: None,
            method: EstimateMethod::Exact,
            samples: 0,
            truncation_mass,
        }
    }

    pub(crate) fn from_samples(r_ix: T, mut samples: Vec<T>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).expect("block capacities are finite"));
        let n = samples.len() as u64;
        let mut values: Vec<T> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for v in samples {
            if values.last() == Some(&v) {
                *counts.last_mut().unwrap() += 1;
            } else {
                values.push(v);
                counts.push(1);
            }
        }
        let mut counts_above = vec![0u64; values.len() + 1];
        for i in (0..values.len()).rev() {
            counts_above[i] = counts_above[i + 1] + counts[i];
        }
        let total = T::of_count(n.max(1));
        let above = counts_above.iter().map(|&c| T::of_count(c) / total).collect();
        Self {
            r_ix,
            values,
            above,
            counts_above: Some(counts_above),
            method: EstimateMethod::MonteCarlo,
            samples: n,
            truncation_mass: T::zero(),
        }
    }

    pub fn r_ix(&self) -> T {
        self.r_ix
    }

    pub fn method(&self) -> EstimateMethod {
        self.method
    }

    /// Distinct block capacities, ascending.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Index of the first atom strictly above `r_in`. Constant between atoms.
    pub fn atom_index(&self, r_in: T) -> usize {
        self.values.partition_point(|&v| v <= r_in)
    }

    /// `P(C_d(R_ix) > R_in)`.
    pub fn estimate(&self, r_in: T) -> RateEstimate<T> {
        let i = self.atom_index(r_in);
        let value = self.above[i].min(T::one());
        let stderr = match self.method {
            EstimateMethod::Exact => T::zero(),
            EstimateMethod::MonteCarlo => {
                let n = T::of_count(self.samples.max(1));
                (value * (T::one() - value) / n).sqrt()
            }
        };
        RateEstimate {
            value,
            stderr,
            method: self.method,
            samples: self.samples,
            truncation_mass: self.truncation_mass,
        }
    }

    /// Number of samples strictly above `r_in` (Monte-Carlo profiles only).
    pub fn count_above(&self, r_in: T) -> Option<u64> {
        let i = self.atom_index(r_in);
        self.counts_above.as_ref().map(|c| c[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_profile_is_a_survival_function() {
        let p = OuterRateProfile::from_weighted(0.5, vec![(0.0, 0.25), (0.7, 0.5), (0.3, 0.25), (0.7, 0.0)], 0.0);
        assert_eq!(p.values(), &[0.0, 0.3, 0.7]);
        assert_eq!(p.estimate(-0.1).value, 1.0);
        assert_eq!(p.estimate(0.0).value, 0.75);
        assert_eq!(p.estimate(0.5).value, 0.5);
        assert_eq!(p.estimate(0.7).value, 0.0);
        assert_eq!(p.estimate(0.5).stderr, 0.0);
    }

    #[test]
    fn sample_profile_counts() {
        let p = OuterRateProfile::from_samples(0.5, vec![0.2, 0.0, 0.2, 0.9]);
        assert_eq!(p.count_above(0.1), Some(3));
        assert_eq!(p.estimate(0.1).value, 0.75);
        assert!((p.estimate(0.1).stderr - (0.75f64 * 0.25 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gated_mean_ignores_order() {
        let g = [0.0, 0.5, 0.8];
        assert_eq!(gated_mean(&[1, 2, 1], &g, 4), (0.8 + 2.0 * 0.5) / 4.0);
    }
}
