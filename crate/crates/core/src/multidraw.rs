//! Elementary pmfs and the capacity of the d-multi-draw binary symmetric channel.
//!
//! A d-multi-draw channel maps one input bit to `d` independent BSC(p)
//! observations of it. Its capacity `C_d` is reached by the uniform input and
//! is the quantity every rate computation in this crate is built on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-bit flip probability `p` of the BSC, restricted to `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct CrossoverProb<T = f64>(T);

impl<T: Real> CrossoverProb<T> {
    pub fn new(p: T) -> Result<Self> {
        if p >= T::zero() && p <= T::of(0.5) {
            Ok(Self(p))
        } else {
            Err(Error::CrossoverOutOfRange(p.to_f64_lossy()))
        }
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// `ln(n!)`: summed directly for small `n`, Stirling series above 30.
pub fn ln_factorial<T: Real>(n: u64) -> T {
    if n <= 30 {
        return (2..=n).map(|k| T::of_count(k).ln()).sum();
    }
    let x = T::of_count(n);
    let inv = x.recip();
    let inv2 = inv * inv;
    // 1/(12n) - 1/(360n^3) + 1/(1260n^5); truncation error below 1/(1680 n^7).
    let series = inv * (T::of(1.0 / 12.0) - inv2 * (T::of(1.0 / 360.0) - inv2 * T::of(1.0 / 1260.0)));
    x * x.ln() - x + T::of(0.5) * (T::TAU() * x).ln() + series
}

fn ln_binomial_coefficient<T: Real>(d: u64, i: u64) -> T {
    ln_factorial::<T>(d) - ln_factorial::<T>(i) - ln_factorial::<T>(d - i)
}

/// Binomial pmf `B_{d,p}(i) = C(d,i) p^i (1-p)^(d-i)`.
pub fn binom_pmf<T: Real>(d: u64, p: CrossoverProb<T>, i: u64) -> Result<T> {
    if i > d {
        return Err(Error::IndexExceedsDraws { i, d });
    }
    let p = p.value();
    if p == T::zero() {
        return Ok(if i == 0 { T::one() } else { T::zero() });
    }
    let ln = ln_binomial_coefficient::<T>(d, i) + T::of_count(i) * p.ln() + T::of_count(d - i) * (-p).ln_1p();
    Ok(ln.exp())
}

/// `ln p_c(d)` for the Poisson pmf `p_c(d) = e^{-c} c^d / d!`.
pub fn ln_poisson_pmf<T: Real>(c: T, d: u64) -> T {
    -c + T::of_count(d) * c.ln() - ln_factorial::<T>(d)
}

/// Poisson pmf, evaluated in log space. Values below the smallest subnormal
/// come back as `0`, never NaN or infinity; use [`ln_poisson_pmf`] when the
/// magnitude matters.
pub fn poisson_pmf<T: Real>(c: T, d: u64) -> T {
    ln_poisson_pmf(c, d).exp()
}

/// K-variate Poisson pmf: the product of the component pmfs, summed in log space.
pub fn poisson_pmf_vec<T: Real>(c: T, draws: &[u32]) -> T {
    draws
        .iter()
        .map(|&d| ln_poisson_pmf(c, u64::from(d)))
        .fold(T::zero(), |acc, x| acc + x)
        .exp()
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::OutOfRange {
            name: "x",
            value: x.to_f64_lossy(),
            expected: "[0, 1]",
        });
    }
    let term = |q: T| if q > T::zero() { -q * q.log2() } else { T::zero() };
    Ok(term(x) + term(T::one() - x))
}

/// `log2(1 + e^t)` without overflow for large `t`.
fn log2_one_plus_exp<T: Real>(t: T) -> T {
    let nat = if t > T::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    };
    nat * T::LOG2_E()
}

/// Capacity `C_d` of the d-multi-draw BSC(p).
///
/// Uses `B(d-i)/B(i) = (p/(1-p))^(d-2i)`, so each summand of
/// `sum_i B(i) log2(B(i) / (B(i) + B(d-i)))` becomes `-B(i) log2(1 + r^(d-2i))`
/// and no ratio of tiny pmfs is ever formed. Summands with `B(i) = 0` count as 0.
pub fn multi_draw_capacity<T: Real>(d: u64, p: CrossoverProb<T>) -> T {
    if d == 0 {
        return T::zero();
    }
    let pv = p.value();
    if pv == T::zero() {
        return T::one();
    }
    let ln_odds = pv.ln() - (-pv).ln_1p();
    let mut loss = T::zero();
    for i in 0..=d {
        let b = binom_pmf(d, p, i).expect("i <= d");
        if b == T::zero() {
            continue;
        }
        let exponent = T::of(d as f64 - 2.0 * i as f64);
        loss = loss + b * log2_one_plus_exp(exponent * ln_odds);
    }
    (T::one() - loss).max(T::zero()).min(T::one())
}

/// Index-gated capacity `C_d(R_ix)`: `C_d` when `C_d > R_ix`, else 0.
pub fn gated_capacity<T: Real>(d: u64, p: CrossoverProb<T>, r_ix: T) -> T {
    gate(multi_draw_capacity(d, p), r_ix)
}

pub(crate) fn gate<T: Real>(capacity: T, r_ix: T) -> T {
    if capacity > r_ix {
        capacity
    } else {
        T::zero()
    }
}

/// Memoized `C_0, C_1, ...` for one crossover probability.
#[derive(Debug, Clone)]
pub struct CapacityTable<T = f64> {
    p: CrossoverProb<T>,
    values: Vec<T>,
}

impl<T: Real> CapacityTable<T> {
    pub fn new(p: CrossoverProb<T>, max_draws: u64) -> Self {
        let values = (0..=max_draws).map(|d| multi_draw_capacity(d, p)).collect();
        Self { p, values }
    }

    pub fn crossover(&self) -> CrossoverProb<T> {
        self.p
    }

    pub fn get(&self, d: u64) -> T {
        match self.values.get(d as usize) {
            Some(&v) => v,
            None => multi_draw_capacity(d, self.p),
        }
    }

    /// Gated capacities for `d = 0..=max_draws`.
    pub fn gated(&self, r_ix: T, max_draws: u64) -> Vec<T> {
        (0..=max_draws).map(|d| gate(self.get(d), r_ix)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p64(p: f64) -> CrossoverProb<f64> {
        CrossoverProb::new(p).unwrap()
    }

    /// The capacity sum evaluated literally with exact binomial coefficients.
    fn capacity_oracle(d: u64, p: f64) -> f64 {
        let choose = |n: u64, k: u64| (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
        let b = |i: u64| choose(d, i) * p.powi(i as i32) * (1.0 - p).powi((d - i) as i32);
        1.0 + (0..=d)
            .filter(|&i| b(i) > 0.0)
            .map(|i| b(i) * (b(i) / (b(i) + b(d - i))).log2())
            .sum::<f64>()
    }

    #[test]
    fn crossover_domain() {
        assert!(CrossoverProb::new(0.0).is_ok());
        assert!(CrossoverProb::new(0.5).is_ok());
        assert!(CrossoverProb::new(0.6).is_err());
        assert!(CrossoverProb::new(-0.01).is_err());
        assert!(CrossoverProb::new(f64::NAN).is_err());
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binom_pmf(0, p64(0.1), 0).unwrap(), 1.0);
        assert_abs_diff_eq!(binom_pmf(2, p64(0.1), 1).unwrap(), 0.18, epsilon = 1e-14);
        for i in 0..=2 {
            assert_abs_diff_eq!(
                binom_pmf(2, p64(0.5), i).unwrap(),
                binom_pmf(2, p64(0.5), 2 - i).unwrap(),
                epsilon = 1e-15
            );
        }
        assert!(matches!(
            binom_pmf(2, p64(0.1), 3),
            Err(Error::IndexExceedsDraws { i: 3, d: 2 })
        ));
    }

    #[test]
    fn binomial_normalization() {
        for &p in &[0.0, 0.05, 0.1, 0.25, 0.5] {
            for d in 0..=64 {
                let total: f64 = (0..=d).map(|i| binom_pmf(d, p64(p), i).unwrap()).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ln_factorial_matches_direct_sum_across_the_switch() {
        for n in 25..60u64 {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            assert_abs_diff_eq!(ln_factorial::<f64>(n), direct, epsilon = 1e-11);
        }
    }

    #[test]
    fn poisson_examples() {
        assert_abs_diff_eq!(poisson_pmf(1.0, 0), 0.367_879_441_171_442_3, epsilon = 1e-15);
        assert_abs_diff_eq!(poisson_pmf(2.0, 2), 0.270_670_566_473_225_4, epsilon = 1e-15);
        let far = poisson_pmf(1.0_f64, 200);
        assert!(far.is_finite() && (0.0..1e-300).contains(&far));
        // -1 - ln(200!), high-precision reference.
        assert_abs_diff_eq!(ln_poisson_pmf(1.0_f64, 200), -864.231_987_192_405_5, epsilon = 1e-9);
    }

    #[test]
    fn multivariate_poisson() {
        assert_abs_diff_eq!(poisson_pmf_vec(1.0, &[0, 0]), 0.135_335_283_236_612_7, epsilon = 1e-15);
        assert_abs_diff_eq!(
            poisson_pmf_vec(2.0, &[1, 1, 1]),
            0.019_830_017_413_330_87,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            poisson_pmf_vec(3.0, &[0, 2, 5]),
            poisson_pmf_vec(3.0, &[5, 0, 2]),
            epsilon = 1e-17
        );
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_entropy(0.1).unwrap(), 0.468_996, epsilon = 1e-6);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(multi_draw_capacity(0, p64(0.1)), 0.0);
        assert_eq!(multi_draw_capacity(0, p64(0.0)), 0.0);
        assert_abs_diff_eq!(multi_draw_capacity(1, p64(0.1)), 0.531_004, epsilon = 1e-6);
        // 0.999 * C_1 is the index rate quoted for the c = 2 rate curves (0.5304).
        assert_abs_diff_eq!(0.999 * multi_draw_capacity(1, p64(0.1)), 0.5304, epsilon = 1e-4);
        assert_abs_diff_eq!(multi_draw_capacity(2, p64(0.1)), 0.742_085_858_549_717, epsilon = 1e-12);
    }

    #[test]
    fn capacity_agrees_with_literal_formula() {
        for &p in &[0.01, 0.05, 0.1, 0.2, 0.3, 0.45] {
            for d in 0..=30 {
                assert_abs_diff_eq!(multi_draw_capacity(d, p64(p)), capacity_oracle(d, p), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn capacity_boundaries() {
        for d in 1..=64 {
            assert_eq!(multi_draw_capacity(d, p64(0.0)), 1.0);
        }
        for d in 0..=64 {
            assert_abs_diff_eq!(multi_draw_capacity(d, p64(0.5)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn capacity_is_monotone_in_draws() {
        for &p in &[0.001, 0.05, 0.1, 0.25, 0.49] {
            for d in 0..64 {
                assert!(multi_draw_capacity(d + 1, p64(p)) >= multi_draw_capacity(d, p64(p)));
            }
        }
    }

    #[test]
    fn single_draw_is_bsc_capacity() {
        for k in 0..=50 {
            let p = k as f64 / 100.0;
            let expected = 1.0 - binary_entropy(p).unwrap();
            assert_abs_diff_eq!(multi_draw_capacity(1, p64(p)), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn gating() {
        let p = p64(0.1);
        assert_eq!(gated_capacity(0, p, 0.5), 0.0);
        assert_abs_diff_eq!(gated_capacity(1, p, 0.5304), 0.531_004, epsilon = 1e-6);
        assert_eq!(gated_capacity(1, p, 0.532), 0.0);
        // Equality is not enough.
        let c1 = multi_draw_capacity(1, p);
        assert_eq!(gated_capacity(1, p, c1), 0.0);
        for d in 0..20 {
            for &r in &[0.1, 0.5, 0.6, 0.9] {
                let g = gated_capacity(d, p, r);
                assert!(g == 0.0 || g == multi_draw_capacity(d, p));
            }
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let p32 = CrossoverProb::new(0.1_f32).unwrap();
        for d in 0..40 {
            let lo = multi_draw_capacity(d, p32) as f64;
            assert_abs_diff_eq!(lo, multi_draw_capacity(d, p64(0.1)), epsilon = 1e-5);
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let t = CapacityTable::new(p64(0.1), 10);
        for d in 0..20 {
            assert_eq!(t.get(d), multi_draw_capacity(d, p64(0.1)));
        }
        let g = t.gated(0.6, 5);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], t.get(2));
    }
}
