use rayon::prelude::*;

use super::profile::OuterRateProfile;
use super::{poisson_truncation, EstimateMethod, RateEstimate};
use crate::error::{Error, Result};
use crate::multidraw::{ln_factorial, ln_poisson_pmf, CapacityTable};
use crate::params::ChannelParams;
use crate::scalar::Real;

/// Largest number of draw multisets the exact route enumerates by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// Number of multisets of `k` draw counts with total at most `d_max`.
///
/// Exact while it does not exceed `cap`. Past that the count stops early and
/// only a value above `cap` is returned.
pub fn multiset_count(k: usize, d_max: u64, cap: u128) -> u128 {
    // Multisets of k counts summing to n are partitions of n into at most k
    // parts, equivalently into parts no larger than k.
    let d = d_max as usize;
    let mut ways = vec![0u128; d + 1];
    ways[0] = 1;
    let mut total = 1u128;
    for part in 1..=k.min(d) {
        for n in part..=d {
            ways[n] = ways[n].saturating_add(ways[n - part]);
        }
        total = ways.iter().fold(0u128, |acc, &w| acc.saturating_add(w));
        if total > cap {
            return total;
        }
    }
    total
}

#[derive(Default, Clone, Copy)]
struct Compensated<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Compensated<T> {
    fn add(&mut self, x: T) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Walks every multiset of `k` draw counts with total at most `d_max`,
/// reporting its block capacity under each gating table and its probability.
struct Enumerator<'a, T> {
    k: usize,
    ln_pmf: &'a [T],
    ln_int: &'a [T],
    ln_fact: &'a [T],
    ln_k_fact: T,
    gated: &'a [Vec<T>],
}

impl<T: Real> Enumerator<'_, T> {
    /// All multisets whose largest count is `first`.
    fn subtree<F: FnMut(&[T], T)>(&self, first: u64, d_max: u64, sink: &mut F) {
        let j = self.gated.len();
        let depth_cap = self.k.min(d_max as usize) + 1;
        let mut completed = vec![T::zero(); depth_cap * j];
        let mut values = vec![T::zero(); j];
        if first == 0 {
            self.leaf(0, 0, 0, T::zero(), &completed[..j], &mut values, sink);
            return;
        }
        self.node(
            1,
            first,
            1,
            d_max - first,
            self.ln_pmf[first as usize],
            &mut completed,
            &mut values,
            sink,
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn node<F: FnMut(&[T], T)>(
        &self,
        depth: usize,
        run_part: u64,
        run_len: u64,
        remaining: u64,
        ln_w: T,
        completed: &mut [T],
        values: &mut [T],
        sink: &mut F,
    ) {
        let j = self.gated.len();
        self.leaf(
            depth,
            run_part,
            run_len,
            ln_w,
            &completed[depth * j..(depth + 1) * j],
            values,
            sink,
        );
        if depth == self.k {
            return;
        }
        for a in (1..=run_part.min(remaining)).rev() {
            let (head, tail) = completed.split_at_mut((depth + 1) * j);
            let parent = &head[depth * j..];
            let child = &mut tail[..j];
            let (next_len, ln_step) = if a == run_part {
                child.copy_from_slice(parent);
                (
                    run_len + 1,
                    self.ln_pmf[a as usize] - self.ln_int[(run_len + 1) as usize],
                )
            } else {
                let n = T::of_count(run_len);
                for (c, (p, g)) in child.iter_mut().zip(parent.iter().zip(self.gated)) {
                    *c = *p + n * g[run_part as usize];
                }
                (1, self.ln_pmf[a as usize])
            };
            self.node(
                depth + 1,
                a,
                next_len,
                remaining - a,
                ln_w + ln_step,
                completed,
                values,
                sink,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn leaf<F: FnMut(&[T], T)>(
        &self,
        depth: usize,
        run_part: u64,
        run_len: u64,
        ln_w: T,
        completed: &[T],
        values: &mut [T],
        sink: &mut F,
    ) {
        let zeros = self.k - depth;
        let kt = T::of_count(self.k as u64);
        let n_run = T::of_count(run_len);
        let n_zero = T::of_count(zeros as u64);
        for (v, (c, g)) in values.iter_mut().zip(completed.iter().zip(self.gated)) {
            *v = (*c + n_run * g[run_part as usize] + n_zero * g[0]) / kt;
        }
        let ln_weight = self.ln_k_fact + ln_w + n_zero * self.ln_pmf[0] - ln_zero_fact(self.ln_fact, zeros);
        sink(values, ln_weight.exp());
    }
}

fn ln_zero_fact<T: Real>(table: &[T], n: usize) -> T {
    match table.get(n) {
        Some(&v) => v,
        None => ln_factorial(n as u64),
    }
}

struct Setup<T> {
    d_max: u64,
    tail_mass: T,
    ln_pmf: Vec<T>,
    ln_int: Vec<T>,
    ln_fact: Vec<T>,
    ln_k_fact: T,
    gated: Vec<Vec<T>>,
}

fn setup<T: Real>(params: &ChannelParams<T>, k: usize, r_ix: &[T], tail_eps: T, cap: u128) -> Result<Setup<T>> {
    if k == 0 {
        return Err(Error::OutOfRange {
            name: "K",
            value: 0.0,
            expected: "{1, 2, ...}",
        });
    }
    let mean = params.c.to_f64_lossy() * k as f64;
    let (d_max, tail_mass) = poisson_truncation(mean, tail_eps.to_f64_lossy());
    let needed = multiset_count(k, d_max, cap);
    if needed > cap {
        return Err(Error::EnumerationTooLarge { needed, cap });
    }
    let table = CapacityTable::new(params.p, d_max);
    let small = (k as u64).min(d_max) + 1;
    Ok(Setup {
        d_max,
        tail_mass: T::of(tail_mass),
        ln_pmf: (0..=d_max).map(|d| ln_poisson_pmf(params.c, d)).collect(),
        ln_int: (0..=small).map(|n| T::of_count(n.max(1)).ln()).collect(),
        ln_fact: (0..=small).map(ln_factorial).collect(),
        ln_k_fact: ln_factorial(k as u64),
        gated: r_ix.iter().map(|&r| table.gated(r, d_max)).collect(),
    })
}

impl<T: Real> Setup<T> {
    fn enumerator(&self, k: usize) -> Enumerator<'_, T> {
        Enumerator {
            k,
            ln_pmf: &self.ln_pmf,
            ln_int: &self.ln_int,
            ln_fact: &self.ln_fact,
            ln_k_fact: self.ln_k_fact,
            gated: &self.gated,
        }
    }
}

/// `P((1/K) sum_i C_{d_i}(R_ix) > R_in)` by summing over every draw multiset
/// with total at most the point where the Poisson(Kc) tail drops below
/// `tail_eps`.
pub fn achievable_outer_rate_exact<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    r_ix: T,
    r_in: T,
    tail_eps: T,
    cap: u128,
) -> Result<RateEstimate<T>> {
    let s = setup(params, k, &[r_ix], tail_eps, cap)?;
    let e = s.enumerator(k);
    let partial: Vec<Compensated<T>> = (0..=s.d_max)
        .into_par_iter()
        .map(|first| {
            let mut acc = Compensated::default();
            e.subtree(first, s.d_max, &mut |values: &[T], w| {
                if values[0] > r_in {
                    acc.add(w);
                }
            });
            acc
        })
        .collect();
    let mut total = Compensated::default();
    for p in partial {
        total.add(p.sum);
    }
    Ok(RateEstimate {
        value: total.sum.min(T::one()),
        stderr: T::zero(),
        method: EstimateMethod::Exact,
        samples: 0,
        truncation_mass: s.tail_mass,
    })
}

/// Exact distribution of the block capacity for each index rate in `r_ix`,
/// from a single enumeration.
pub fn exact_profiles<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    r_ix: &[T],
    tail_eps: T,
    cap: u128,
) -> Result<Vec<OuterRateProfile<T>>> {
    let s = setup(params, k, r_ix, tail_eps, cap)?;
    let e = s.enumerator(k);
    let j = r_ix.len();
    let parts: Vec<Vec<Vec<(T, T)>>> = (0..=s.d_max)
        .into_par_iter()
        .map(|first| {
            let mut atoms = vec![Vec::new(); j];
            e.subtree(first, s.d_max, &mut |values: &[T], w| {
                for (a, &v) in atoms.iter_mut().zip(values) {
                    a.push((v, w));
                }
            });
            atoms
        })
        .collect();
    Ok((0..j)
        .map(|i| {
            let atoms = parts.iter().flat_map(|p| p[i].iter().copied()).collect();
            OuterRateProfile::from_weighted(r_ix[i], atoms, s.tail_mass)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multidraw::{multi_draw_capacity, poisson_pmf_vec, CrossoverProb};
    use crate::params::DrawVector;
    use crate::rates::block_capacity;
    use approx::assert_abs_diff_eq;

    fn channel(c: f64) -> ChannelParams {
        ChannelParams::new(c, 0.05, 0.1).unwrap()
    }

    /// Brute force over ordered vectors in `[0, d_max]^k`.
    fn brute_force(c: f64, k: usize, r_ix: f64, r_in: f64, d_max: u32) -> f64 {
        let p = CrossoverProb::new(0.1).unwrap();
        let gated: Vec<f64> = (0..=d_max as u64)
            .map(|d| {
                let cap = multi_draw_capacity(d, p);
                if cap > r_ix {
                    cap
                } else {
                    0.0
                }
            })
            .collect();
        let pmf: Vec<f64> = (0..=d_max as u64).map(|d| poisson_pmf_vec(c, &[d as u32])).collect();
        let mut total = 0.0;
        let mut v = vec![0usize; k];
        loop {
            let mean = v.iter().map(|&d| gated[d]).sum::<f64>() / k as f64;
            if mean > r_in {
                total += v.iter().map(|&d| pmf[d]).product::<f64>();
            }
            let mut i = 0;
            loop {
                if i == k {
                    return total;
                }
                v[i] += 1;
                if v[i] <= d_max as usize {
                    break;
                }
                v[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn block_capacity_matches_enumeration_order() {
        let p = CrossoverProb::new(0.1).unwrap();
        let profiles = exact_profiles(&channel(1.0), 2, &[0.5], 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        let v = block_capacity(&DrawVector::new(vec![3, 1]), p, 0.5);
        assert!(profiles[0].values().contains(&v));
    }

    #[test]
    fn counts_partitions() {
        // Partitions of 0..=5 into at most 2 parts: 1,1,2,2,3,3.
        assert_eq!(multiset_count(2, 5, u128::MAX), 12);
        assert_eq!(multiset_count(1, 7, u128::MAX), 8);
        // p(0) + ... + p(6) with unrestricted parts.
        assert_eq!(multiset_count(10, 6, u128::MAX), 1 + 1 + 2 + 3 + 5 + 7 + 11);
        assert!(multiset_count(10_000, 100_000, 1_000_000) > 1_000_000);
    }

    #[test]
    fn single_strand_closed_forms() {
        let c1 = multi_draw_capacity(1, CrossoverProb::new(0.1).unwrap());
        let r_ix = 0.999 * c1;
        let all =
            achievable_outer_rate_exact(&channel(1.0), 1, r_ix, c1 - 1e-6, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_abs_diff_eq!(all.value, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        let c2 = multi_draw_capacity(2, CrossoverProb::new(0.1).unwrap());
        let two =
            achievable_outer_rate_exact(&channel(1.0), 1, r_ix, c2 - 1e-6, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_abs_diff_eq!(two.value, 1.0 - 2.0 * (-1.0f64).exp(), epsilon = 1e-12);
        assert!(all.truncation_mass < 1e-12);
    }

    #[test]
    fn matches_brute_force() {
        for &(c, k, r_in) in &[(1.0, 2, 0.3), (2.0, 3, 0.45), (0.5, 4, 0.2), (3.0, 2, 0.7)] {
            let r_ix = 0.5;
            let exact =
                achievable_outer_rate_exact(&channel(c), k, r_ix, r_in, 1e-14, DEFAULT_ENUMERATION_CAP).unwrap();
            let brute = brute_force(c, k, r_ix, r_in, 25);
            assert_abs_diff_eq!(exact.value, brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn profiles_agree_with_direct_sum() {
        let params = channel(2.0);
        let r_ix = [0.5, 0.74];
        let profiles = exact_profiles(&params, 3, &r_ix, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        for (profile, &r) in profiles.iter().zip(&r_ix) {
            for &r_in in &[0.1, 0.3, 0.55, 0.8] {
                let direct = achievable_outer_rate_exact(&params, 3, r, r_in, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
                assert_abs_diff_eq!(profile.estimate(r_in).value, direct.value, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn total_mass_is_one() {
        let params = channel(1.5);
        let profiles = exact_profiles(&params, 5, &[0.5], 1e-13, DEFAULT_ENUMERATION_CAP).unwrap();
        let est = profiles[0].estimate(-1.0);
        assert_abs_diff_eq!(est.value + est.truncation_mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn refuses_oversized_enumeration() {
        let err = achievable_outer_rate_exact(&channel(10.0), 1000, 0.5, 0.5, 1e-12, 1000).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { .. }));
    }

    #[test]
    fn single_precision_agrees() {
        let p32 = ChannelParams::new(2.0f32, 0.05, 0.1).unwrap();
        let a = achievable_outer_rate_exact(&p32, 3, 0.5, 0.45, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        let b = achievable_outer_rate_exact(&channel(2.0), 3, 0.5, 0.45, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((f64::from(a.value) - b.value).abs() < 1e-5);
    }
}
