//! Generative model of the DNA storage channel: a pool of `M` strands of `L`
//! bits is read `N = round(cM)` times uniformly with replacement, each read
//! passing through a BSC(p).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multidraw::ln_poisson_pmf;
use crate::params::{ChannelParams, DrawVector};
use crate::seed::{substream, StreamTag};

/// A bit string packed into 64-bit words, bit `i` in word `i / 64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Strand {
    words: Vec<u64>,
    len: usize,
}

impl Strand {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = Self::zeros(len);
        for w in &mut s.words {
            *w = rng.next_u64();
        }
        s.mask_tail();
        s
    }

    /// Parses `"0101..."`, first character is bit 0.
    pub fn from_bits(bits: &str) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, ch) in bits.chars().enumerate() {
            if ch == '1' {
                s.flip(i);
            }
        }
        s
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn hamming(&self, other: &Strand) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// `ceil(L/8)` bytes, least significant bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        let mut s = Self::zeros(len);
        for (i, chunk) in bytes.chunks(8).enumerate().take(s.words.len()) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            s.words[i] = u64::from_le_bytes(buf);
        }
        s.mask_tail();
        s
    }
}

/// Sizes of one simulated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstanceDims {
    pub m: usize,
    pub l: usize,
    pub n: usize,
}

impl InstanceDims {
    pub fn new(m: usize, l: usize, n: usize) -> Result<Self> {
        for (name, v) in [("M", m), ("L", l)] {
            if v == 0 {
                return Err(Error::OutOfRange {
                    name,
                    value: 0.0,
                    expected: "{1, 2, ...}",
                });
            }
        }
        Ok(Self { m, l, n })
    }

    /// `L = ceil(log2(M) / beta)` (at least 1) and `N = round(cM)`.
    pub fn from_params(params: &ChannelParams, m: usize) -> Result<Self> {
        let l = ((m as f64).log2() / params.beta).ceil().max(1.0) as usize;
        let n = (params.c * m as f64).round() as usize;
        Self::new(m, l, n)
    }

    pub fn check_block_size(&self, k: usize) -> Result<()> {
        if k == 0 || !self.m.is_multiple_of(k) {
            return Err(Error::BlockSizeMismatch { k, m: self.m });
        }
        Ok(())
    }

    pub fn blocks(&self, k: usize) -> Result<usize> {
        self.check_block_size(k)?;
        Ok(self.m / k)
    }

    /// Payload bits per strand, `L (1 - beta / R_ix)`.
    pub fn payload_len(&self, beta: f64, r_ix: f64) -> f64 {
        self.l as f64 * (1.0 - beta / r_ix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandPool {
    pub strands: Vec<Strand>,
    pub len: usize,
}

impl StrandPool {
    pub fn new(strands: Vec<Strand>) -> Result<Self> {
        let len = strands.first().map_or(0, Strand::len);
        if strands.iter().any(|s| s.len() != len) {
            return Err(Error::OutOfRange {
                name: "strand length",
                value: f64::NAN,
                expected: "identical lengths",
            });
        }
        Ok(Self { strands, len })
    }

    pub fn m(&self) -> usize {
        self.strands.len()
    }
}

/// Reads with their hidden origins. Origins are 0-based strand indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelOutput {
    pub m: usize,
    pub len: usize,
    pub reads: Vec<Strand>,
    pub origins: Vec<usize>,
    /// Hamming weight of each error pattern; not kept in dumps.
    pub flip_counts: Option<Vec<u32>>,
}

impl ChannelOutput {
    pub fn n(&self) -> usize {
        self.reads.len()
    }
}

/// `M` uniform strands of length `L`, each from its own substream.
pub fn random_pool(dims: InstanceDims, seed: u64) -> StrandPool {
    let strands = (0..dims.m)
        .into_par_iter()
        .map(|i| Strand::random(dims.l, &mut substream(seed, StreamTag::Pool, i as u64)))
        .collect();
    StrandPool { strands, len: dims.l }
}

/// `n` strand indices drawn uniformly with replacement from `0..m`; the
/// origins `simulate_channel` uses for the same seed.
pub fn sample_origins(m: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = substream(seed, StreamTag::Origins, 0);
    (0..n).map(|_| rng.random_range(0..m)).collect()
}

/// Draws `N = round(cM)` reads uniformly with replacement and flips each bit
/// with probability `p`.
pub fn simulate_channel(pool: &StrandPool, params: &ChannelParams, seed: u64) -> ChannelOutput {
    let m = pool.m();
    let n = (params.c * m as f64).round() as usize;
    let origins = sample_origins(m, n, seed);
    let p = params.p.value();
    let (reads, flips): (Vec<Strand>, Vec<u32>) = origins
        .par_iter()
        .enumerate()
        .map(|(j, &o)| {
            let mut read = pool.strands[o].clone();
            let mut flips = 0;
            if p > 0.0 {
                let mut rng = substream(seed, StreamTag::Noise, j as u64);
                for i in 0..read.len() {
                    if rng.random::<f64>() < p {
                        read.flip(i);
                        flips += 1;
                    }
                }
            }
            (read, flips)
        })
        .unzip();
    ChannelOutput {
        m,
        len: pool.len,
        reads,
        origins,
        flip_counts: Some(flips),
    }
}

/// Draw counts per strand and the number of blocks with each draw vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DrawHistogram {
    pub per_strand: Vec<u32>,
    pub per_block: BTreeMap<DrawVector, u64>,
    pub block_size: usize,
}

impl DrawHistogram {
    pub fn from_origins(m: usize, origins: &[usize], k: usize) -> Result<Self> {
        if k == 0 || !m.is_multiple_of(k) {
            return Err(Error::BlockSizeMismatch { k, m });
        }
        let mut per_strand = vec![0u32; m];
        for &o in origins {
            per_strand[o] += 1;
        }
        let mut per_block = BTreeMap::new();
        for block in per_strand.chunks(k) {
            *per_block.entry(DrawVector::new(block.to_vec())).or_insert(0) += 1;
        }
        Ok(Self {
            per_strand,
            per_block,
            block_size: k,
        })
    }

    pub fn blocks(&self) -> u64 {
        self.per_block.values().sum()
    }
}

pub fn draw_histogram(output: &ChannelOutput, k: usize) -> Result<DrawHistogram> {
    DrawHistogram::from_origins(output.m, &output.origins, k)
}

/// `(1/M) sum_d |Q_d - (M/K) p_c(d)|` over observed draw vectors and every
/// vector whose expected count exceeds `1e-12 / M`.
pub fn poisson_deviation(hist: &DrawHistogram, params: &ChannelParams) -> f64 {
    let k = hist.block_size;
    let m = hist.per_strand.len() as f64;
    let blocks = m / k as f64;
    let c = params.c;
    let ln_pmf = |d: u32| ln_poisson_pmf(c, u64::from(d));
    let expected = |d: &DrawVector| blocks * d.as_slice().iter().map(|&x| ln_pmf(x)).sum::<f64>().exp();

    let mut total: f64 = hist
        .per_block
        .iter()
        .map(|(d, &q)| (q as f64 - expected(d)).abs())
        .sum();

    let threshold = 1e-12 / m;
    let ln_threshold = (threshold / blocks).ln();
    let mode = c.floor() as u32;
    let mut unobserved = 0.0;
    let mut visit = |draws: &[u32], ln_w: f64| {
        if !hist.per_block.contains_key(&DrawVector::new(draws.to_vec())) {
            unobserved += blocks * ln_w.exp();
        }
    };
    let walk = OrderedWalk {
        k,
        mode,
        ln_peak: ln_pmf(mode),
        ln_threshold,
        ln_pmf: &ln_pmf,
    };
    walk.run(0, 0.0, &mut vec![0u32; k], &mut visit);
    total += unobserved;
    total / m
}

/// Ordered draw vectors whose log-probability exceeds `ln_threshold`.
struct OrderedWalk<'a> {
    k: usize,
    mode: u32,
    ln_peak: f64,
    ln_threshold: f64,
    ln_pmf: &'a dyn Fn(u32) -> f64,
}

impl OrderedWalk<'_> {
    fn run(&self, pos: usize, ln_acc: f64, stack: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32], f64)) {
        if pos == self.k {
            if ln_acc > self.ln_threshold {
                visit(stack, ln_acc);
            }
            return;
        }
        let rest = (self.k - pos - 1) as f64 * self.ln_peak;
        for d in 0.. {
            let ln_d = (self.ln_pmf)(d);
            if ln_acc + ln_d + rest > self.ln_threshold {
                stack[pos] = d;
                self.run(pos + 1, ln_acc + ln_d, stack, visit);
            } else if d >= self.mode {
                // Past the mode the pmf only decreases.
                break;
            }
        }
    }
}

const DUMP_MAGIC: &[u8; 4] = b"DNAC";
const DUMP_VERSION: u16 = 1;

/// Little-endian dump: magic, version, M, L, N, packed reads, 0-based origins.
pub fn write_dump<W: Write>(output: &ChannelOutput, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    for v in [output.m, output.len, output.n()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for read in &output.reads {
        w.write_all(&read.to_bytes())?;
    }
    for &o in &output.origins {
        w.write_all(&(o as u64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<ChannelOutput> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "header")?;
    if &magic != DUMP_MAGIC {
        return Err(Error::MalformedDump("bad magic".into()));
    }
    let mut version = [0u8; 2];
    read_exact(&mut r, &mut version, "header")?;
    if u16::from_le_bytes(version) != DUMP_VERSION {
        return Err(Error::MalformedDump(format!(
            "unsupported version {}",
            u16::from_le_bytes(version)
        )));
    }
    let mut field = || -> Result<usize> {
        let mut b = [0u8; 8];
        read_exact(&mut r, &mut b, "header")?;
        usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::MalformedDump("size overflow".into()))
    };
    let (m, len, n) = (field()?, field()?, field()?);
    if m == 0 || len == 0 {
        return Err(Error::MalformedDump("M and L must be positive".into()));
    }
    let bytes = len.div_ceil(8);
    let mut buf = vec![0u8; bytes];
    let mut reads = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        read_exact(&mut r, &mut buf, "reads")?;
        reads.push(Strand::from_bytes(&buf, len));
    }
    let mut origins = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let mut b = [0u8; 8];
        read_exact(&mut r, &mut b, "origins")?;
        let o = u64::from_le_bytes(b) as usize;
        if o >= m {
            return Err(Error::MalformedDump(format!("origin {o} out of range for M = {m}")));
        }
        origins.push(o);
    }
    Ok(ChannelOutput {
        m,
        len,
        reads,
        origins,
        flip_counts: None,
    })
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::MalformedDump(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}
