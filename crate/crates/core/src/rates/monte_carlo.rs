use rand::Rng;
use rayon::prelude::*;

use super::profile::{gated_mean, OuterRateProfile};
use super::RateEstimate;
use crate::error::{Error, Result};
use crate::multidraw::{gate, ln_poisson_pmf, CapacityTable};
use crate::params::ChannelParams;
use crate::scalar::Real;
use crate::seed::{substream, StreamTag};

/// Samples per RNG substream. Fixed so results do not depend on the thread count.
pub const MC_CHUNK: u64 = 4096;

/// Poisson variates by inversion against a tabulated CDF.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    mean: f64,
    cdf: Vec<f64>,
}

impl PoissonSampler {
    pub fn new(mean: f64) -> Self {
        let top = (mean + 12.0 * mean.sqrt() + 30.0).ceil() as u64;
        let mut acc = 0.0;
        let cdf = (0..=top)
            .map(|d| {
                acc += ln_poisson_pmf(mean, d).exp();
                acc
            })
            .collect();
        Self { mean, cdf }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let last = *self.cdf.last().expect("table is never empty");
        if u >= last {
            let mut d = self.cdf.len() as u64;
            let mut acc = last;
            loop {
                let pmf = ln_poisson_pmf(self.mean, d).exp();
                acc += pmf;
                if acc > u || pmf == 0.0 {
                    return d as u32;
                }
                d += 1;
            }
        }
        if self.mean <= 30.0 {
            self.cdf.iter().position(|&f| f > u).expect("u is below the last entry") as u32
        } else {
            self.cdf.partition_point(|&f| f <= u) as u32
        }
    }
}

/// Block capacities of `samples` draw vectors, one column per index rate.
fn sample_block_capacities<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    r_ix: &[T],
    samples: u64,
    seed: u64,
) -> Vec<Vec<T>> {
    let sampler = PoissonSampler::new(params.c.to_f64_lossy());
    let table_len = sampler.cdf.len() as u64;
    let table = CapacityTable::new(params.p, table_len);
    let gated: Vec<Vec<T>> = r_ix.iter().map(|&r| table.gated(r, table_len)).collect();
    let chunks = samples.div_ceil(MC_CHUNK);

    let per_chunk: Vec<Vec<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = substream(seed, StreamTag::MonteCarlo, chunk);
            let n = MC_CHUNK.min(samples - chunk * MC_CHUNK) as usize;
            let mut out = vec![Vec::with_capacity(n); r_ix.len()];
            let mut counts = vec![0u32; table_len as usize + 1];
            let mut extra: Vec<Vec<T>> = gated.clone();
            for _ in 0..n {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..k {
                    let d = sampler.sample(&mut rng) as usize;
                    if d >= counts.len() {
                        counts.resize(d + 1, 0);
                        for (g, &r) in extra.iter_mut().zip(r_ix) {
                            let start = g.len() as u64;
                            g.extend((start..=d as u64).map(|x| gate(table.get(x), r)));
                        }
                    }
                    counts[d] += 1;
                }
                for (o, g) in out.iter_mut().zip(&extra) {
                    o.push(gated_mean(&counts, g, k));
                }
            }
            out
        })
        .collect();

    (0..r_ix.len())
        .map(|j| per_chunk.iter().flat_map(|c| c[j].iter().copied()).collect())
        .collect()
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            expected: "{1, 2, ...}",
        });
    }
    Ok(())
}

/// Monte-Carlo estimate of `P((1/K) sum_i C_{d_i}(R_ix) > R_in)`.
///
/// Deterministic in `seed` regardless of the number of threads.
pub fn achievable_outer_rate_mc<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    r_ix: T,
    r_in: T,
    samples: u64,
    seed: u64,
) -> Result<RateEstimate<T>> {
    let profile = mc_profiles(params, k, &[r_ix], samples, seed)?;
    Ok(profile[0].estimate(r_in))
}

/// Sampled distribution of the block capacity for each index rate in `r_ix`,
/// all evaluated on the same draw vectors.
pub fn mc_profiles<T: Real>(
    params: &ChannelParams<T>,
    k: usize,
    r_ix: &[T],
    samples: u64,
    seed: u64,
) -> Result<Vec<OuterRateProfile<T>>> {
    check_samples(samples)?;
    if k == 0 {
        return Err(Error::OutOfRange {
            name: "K",
            value: 0.0,
            expected: "{1, 2, ...}",
        });
    }
    Ok(sample_block_capacities(params, k, r_ix, samples, seed)
        .into_iter()
        .zip(r_ix)
        .map(|(values, &r)| OuterRateProfile::from_samples(r, values))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{achievable_outer_rate_exact, DEFAULT_ENUMERATION_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampler_moments() {
        for &mean in &[0.3, 2.0, 10.0, 45.0, 500.0] {
            let s = PoissonSampler::new(mean);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| f64::from(s.sample(&mut rng))).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            assert!((m - mean).abs() < 5.0 * (mean / n as f64).sqrt(), "mean {mean}: {m}");
            assert!((v / mean - 1.0).abs() < 0.03, "mean {mean}: var {v}");
        }
    }

    #[test]
    fn reproducible_and_within_error() {
        let params: ChannelParams = ChannelParams::new(2.0, 0.05, 0.1).unwrap();
        let a = achievable_outer_rate_mc(&params, 3, 0.5, 0.45, 50_000, 11).unwrap();
        let b = achievable_outer_rate_mc(&params, 3, 0.5, 0.45, 50_000, 11).unwrap();
        assert_eq!(a, b);
        let exact = achievable_outer_rate_exact(&params, 3, 0.5, 0.45, 1e-12, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((a.value - exact.value).abs() < 4.0 * a.stderr, "{a:?} vs {exact:?}");
        assert!((a.stderr - (a.value * (1.0 - a.value) / 50_000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn independent_of_thread_count() {
        let params = ChannelParams::new(4.0, 0.05, 0.1).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| achievable_outer_rate_mc(&params, 10, 0.7, 0.6, 30_000, 5).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(2));
        assert_eq!(one, run(8));
    }

    #[test]
    fn rejects_zero_samples() {
        let params = ChannelParams::new(1.0, 0.05, 0.1).unwrap();
        assert!(achievable_outer_rate_mc(&params, 1, 0.5, 0.5, 0, 0).is_err());
    }
}
