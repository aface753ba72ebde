//! Channel and coding-scheme parameters.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::multidraw::CrossoverProb;
use crate::scalar::Real;

fn check_open<T: Real>(name: &'static str, value: T, lo: T, hi: T, expected: &'static str) -> Result<T> {
    if value > lo && value < hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value: value.to_f64_lossy(),
            expected,
        })
    }
}

/// The channel triple: reading rate `c` (`N = cM` reads), strand density
/// `beta = log2(M) / L` and crossover probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams<T = f64> {
    pub c: T,
    pub beta: T,
    pub p: CrossoverProb<T>,
}

impl<T: Real> ChannelParams<T> {
    pub fn new(c: T, beta: T, p: T) -> Result<Self> {
        let c = check_open("c", c, T::zero(), T::infinity(), "(0, inf)")?;
        let beta = check_open("beta", beta, T::zero(), T::one(), "(0, 1)")?;
        Ok(Self {
            c,
            beta,
            p: CrossoverProb::new(p)?,
        })
    }

    pub fn with_c(self, c: T) -> Result<Self> {
        Self::new(c, self.beta, self.p.value())
    }

    pub fn with_p(self, p: T) -> Result<Self> {
        Self::new(self.c, self.beta, p)
    }
}

/// The code quadruple `(K, R_ix, R_in, R_out)`.
///
/// Construction only checks ranges. The coupling with the channel
/// (`beta < R_ix` and the clustering condition) is reported by
/// [`crate::rates::validate_scheme`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams<T = f64> {
    /// Strands per inner block.
    pub k: usize,
    pub r_ix: T,
    pub r_in: T,
    pub r_out: T,
}

impl<T: Real> SchemeParams<T> {
    pub fn new(k: usize, r_ix: T, r_in: T, r_out: T) -> Result<Self> {
        if k == 0 {
            return Err(Error::OutOfRange {
                name: "K",
                value: 0.0,
                expected: "{1, 2, ...}",
            });
        }
        let r_ix = check_open("R_ix", r_ix, T::zero(), T::one(), "(0, 1)")?;
        let r_in = check_open("R_in", r_in, T::zero(), T::one(), "(0, 1)")?;
        if !(r_out >= T::zero() && r_out <= T::one()) {
            return Err(Error::OutOfRange {
                name: "R_out",
                value: r_out.to_f64_lossy(),
                expected: "[0, 1]",
            });
        }
        Ok(Self { k, r_ix, r_in, r_out })
    }

    /// `R = R_out R_in (1 - beta / R_ix)`.
    pub fn overall_rate(&self, beta: T) -> Result<T> {
        crate::rates::overall_rate(self.r_in, self.r_out, self.r_ix, beta)
    }
}

/// Draw counts `(d_1, ..., d_K)` of the strands of one inner block.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct DrawVector(Vec<u32>);

impl DrawVector {
    pub fn new(draws: Vec<u32>) -> Self {
        Self(draws)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }

    /// Checks the length against the block size of a scheme.
    pub fn for_block_size(draws: Vec<u32>, k: usize) -> Result<Self> {
        if draws.len() == k {
            Ok(Self(draws))
        } else {
            Err(Error::DrawVectorLength {
                got: draws.len(),
                expected: k,
            })
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&d| u64::from(d)).sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Multiplicity of each draw count: `counts[d]` strands were drawn `d` times.
    pub fn counts(&self) -> Vec<u32> {
        let max = self.0.iter().copied().max().unwrap_or(0) as usize;
        let mut counts = vec![0u32; max + 1];
        for &d in &self.0 {
            counts[d as usize] += 1;
        }
        counts
    }
}

impl fmt::Display for DrawVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}
