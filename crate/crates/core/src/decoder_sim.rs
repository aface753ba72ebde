//! The four decoding stages at desk scale: greedy clustering of the reads,
//! index decoding, inner decoding with erasures, and the MDS outer test.
//!
//! Index and inner decoders are oracles. A cluster decodes to its origin when
//! it is exactly one origin's reads and `C_size > R_ix`; a block decodes when
//! its mean gated capacity exceeds `R_in`.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel_sim::{draw_histogram, random_pool, simulate_channel, ChannelOutput, InstanceDims};
use crate::error::{Error, Result};
use crate::multidraw::{CapacityTable, CrossoverProb};
use crate::params::{ChannelParams, SchemeParams};
use crate::rates::{block_capacity, validate_scheme, SchemeValidity};
use crate::seed::{derive_seed, StreamTag};

pub const DEFAULT_EPSILON_PRIME: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusteringConfig {
    pub rho: f64,
    pub epsilon_prime: f64,
}

impl ClusteringConfig {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::OutOfRange {
                name: "rho",
                value: rho,
                expected: "(0, 1)",
            });
        }
        Ok(Self {
            rho,
            epsilon_prime: 0.0,
        })
    }

    /// `rho = 2p + epsilon_prime`.
    pub fn for_crossover(p: f64, epsilon_prime: f64) -> Result<Self> {
        let mut config = Self::new(2.0 * p + epsilon_prime)?;
        config.epsilon_prime = epsilon_prime;
        Ok(config)
    }

    /// Largest admissible pairwise distance, `floor(rho L)`.
    pub fn threshold(&self, len: usize) -> Result<u32> {
        let t = self.rho * len as f64;
        if t < 1.0 {
            return Err(Error::OutOfRange {
                name: "rho * L",
                value: t,
                expected: "[1, L)",
            });
        }
        Ok((t + 1e-9).floor() as u32)
    }
}

/// Indices of the reads in one cluster, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn diameter(&self, output: &ChannelOutput) -> u32 {
        let mut max = 0;
        for (i, &a) in self.members.iter().enumerate() {
            for &b in &self.members[i + 1..] {
                max = max.max(output.reads[a].hamming(&output.reads[b]));
            }
        }
        max
    }
}

/// Greedy clustering in read order. A cluster starts at the first unassigned
/// read and takes every later unassigned read within `floor(rho L)` of all
/// members accepted so far.
pub fn greedy_cluster(output: &ChannelOutput, config: &ClusteringConfig) -> Result<Vec<Cluster>> {
    if output.n() == 0 {
        return Ok(Vec::new());
    }
    let threshold = config.threshold(output.len)?;
    let reads = &output.reads;
    let mut remaining: Vec<usize> = (0..output.n()).collect();
    let mut clusters = Vec::new();
    while let Some((&seed, rest)) = remaining.split_first() {
        let near: Vec<usize> = rest
            .par_iter()
            .copied()
            .filter(|&j| reads[seed].hamming(&reads[j]) <= threshold)
            .collect();
        // Later members only add constraints, so one ordered pass is a fixpoint.
        let mut members = vec![seed];
        for j in near {
            if members[1..].iter().all(|&m| reads[m].hamming(&reads[j]) <= threshold) {
                members.push(j);
            }
        }
        let mut taken = members.iter().copied().peekable();
        remaining.retain(|&j| {
            if taken.peek() == Some(&j) {
                taken.next();
                false
            } else {
                true
            }
        });
        clusters.push(Cluster { members });
    }
    Ok(clusters)
}

/// Read indices per origin.
fn fibers(output: &ChannelOutput) -> Vec<Vec<usize>> {
    let mut fibers = vec![Vec::new(); output.m];
    for (j, &o) in output.origins.iter().enumerate() {
        fibers[o].push(j);
    }
    fibers
}

/// The origin of a cluster that consists of exactly that origin's reads.
fn exact_origin(cluster: &Cluster, output: &ChannelOutput, fibers: &[Vec<usize>]) -> Option<usize> {
    let origin = output.origins[*cluster.members.first()?];
    (fibers[origin] == cluster.members).then_some(origin)
}

/// Number of clusters that are not exactly the reads of one input strand.
pub fn count_wrong_clusters(clusters: &[Cluster], output: &ChannelOutput) -> usize {
    let fibers = fibers(output);
    clusters
        .iter()
        .filter(|c| exact_origin(c, output, &fibers).is_none())
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexAssignment {
    /// Cluster size assigned to each strand index, 0 when none.
    pub sizes: Vec<u32>,
    /// Impure clusters that passed the capacity threshold (`M_Ix`).
    pub m_wrong_index: usize,
    /// Clusters dropped because `C_size <= R_ix`.
    pub below_threshold: usize,
    /// Clusters dropped because another cluster claimed the same index.
    pub duplicates: usize,
}

/// Genie index decoding; impure clusters are never assigned.
pub fn oracle_index_decode(
    clusters: &[Cluster],
    output: &ChannelOutput,
    p: CrossoverProb,
    r_ix: f64,
) -> IndexAssignment {
    let fibers = fibers(output);
    let table = CapacityTable::new(p, 64);
    let mut claims: Vec<Vec<u32>> = vec![Vec::new(); output.m];
    let mut m_wrong_index = 0;
    let mut below_threshold = 0;
    for cluster in clusters {
        if !(table.get(cluster.size() as u64) > r_ix) {
            below_threshold += 1;
            continue;
        }
        match exact_origin(cluster, output, &fibers) {
            Some(origin) => claims[origin].push(cluster.size() as u32),
            None => m_wrong_index += 1,
        }
    }
    let mut duplicates = 0;
    let sizes = claims
        .into_iter()
        .map(|c| match c.as_slice() {
            [size] => *size,
            [] => 0,
            many => {
                duplicates += many.len();
                0
            }
        })
        .collect();
    IndexAssignment {
        sizes,
        m_wrong_index,
        below_threshold,
        duplicates,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InnerDecode {
    /// `true` where the block decoded.
    pub decoded: Vec<bool>,
    pub erased_blocks: usize,
    /// Blocks decoded from corrupted assignments (`M_In`).
    pub m_wrong_inner: usize,
}

/// Decodes block `b` iff `(1/K) sum_j C_{d_j}(R_ix) > R_in` over its assigned
/// cluster sizes.
pub fn oracle_inner_decode(
    assignment: &IndexAssignment,
    p: CrossoverProb,
    scheme: &SchemeParams,
) -> Result<InnerDecode> {
    let k = scheme.k;
    let m = assignment.sizes.len();
    if k == 0 || !m.is_multiple_of(k) {
        return Err(Error::BlockSizeMismatch { k, m });
    }
    let decoded: Vec<bool> = assignment
        .sizes
        .chunks(k)
        .map(|block| {
            let d = crate::params::DrawVector::new(block.to_vec());
            block_capacity(&d, p, scheme.r_ix) > scheme.r_in
        })
        .collect();
    let erased_blocks = decoded.iter().filter(|&&ok| !ok).count();
    Ok(InnerDecode {
        decoded,
        erased_blocks,
        // Impure clusters are discarded, so no block sees a corrupted assignment.
        m_wrong_inner: 0,
    })
}

/// MDS unique decoding of a length-`n` code: `s + 2t <= n (1 - R_out)`.
pub fn outer_success(s: usize, t: usize, n: usize, r_out: f64) -> bool {
    // n - n R_out keeps boundary cases like 100 (1 - 0.9) = 10 exact.
    let n = n as f64;
    (s + 2 * t) as f64 <= n - n * r_out
}

/// One trial. Erasures `s` and errors `t` are counted in inner blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeReport {
    pub m_wrong_clusters: usize,
    pub m_wrong_index: usize,
    pub m_wrong_inner: usize,
    pub erasures: usize,
    pub errors: usize,
    pub outer_success: bool,
    pub blocks: usize,
    /// Blocks the inner decoder actually erased.
    pub true_erasures: usize,
    /// Blocks actually decoded to a wrong codeword.
    pub true_errors: usize,
    /// Blocks whose true draw vector already falls below `R_in`.
    pub threshold_erasures: usize,
    pub genie_success: bool,
}

/// Runs clustering, index, inner and outer decoding on one channel output.
pub fn decode_output(
    output: &ChannelOutput,
    params: &ChannelParams,
    scheme: &SchemeParams,
    clustering: &ClusteringConfig,
) -> Result<DecodeReport> {
    let hist = draw_histogram(output, scheme.k)?;
    let blocks = output.m / scheme.k;
    let clusters = greedy_cluster(output, clustering)?;
    let m_wrong_clusters = count_wrong_clusters(&clusters, output);
    let assignment = oracle_index_decode(&clusters, output, params.p, scheme.r_ix);
    let inner = oracle_inner_decode(&assignment, params.p, scheme)?;

    let erasures = (inner.erased_blocks + 2 * m_wrong_clusters + 2 * assignment.m_wrong_index).min(blocks);
    let errors = inner.m_wrong_inner.min(blocks);
    let threshold_erasures = hist
        .per_block
        .iter()
        .filter(|(d, _)| !(block_capacity(d, params.p, scheme.r_ix) > scheme.r_in))
        .map(|(_, &q)| q as usize)
        .sum();
    let true_erasures = inner.erased_blocks;
    let true_errors = inner.m_wrong_inner;
    Ok(DecodeReport {
        m_wrong_clusters,
        m_wrong_index: assignment.m_wrong_index,
        m_wrong_inner: inner.m_wrong_inner,
        erasures,
        errors,
        outer_success: outer_success(erasures, errors, blocks, scheme.r_out),
        blocks,
        true_erasures,
        true_errors,
        threshold_erasures,
        genie_success: outer_success(true_erasures, true_errors, blocks, scheme.r_out),
    })
}

/// Default ceiling on `N^2 L`, the cost of clustering.
pub const DEFAULT_WORK_BUDGET: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub clustering: ClusteringConfig,
    pub work_budget: f64,
}

impl PipelineConfig {
    pub fn new(params: &ChannelParams, m: usize, trials: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            m,
            trials,
            seed,
            clustering: ClusteringConfig::for_crossover(params.p.value(), DEFAULT_EPSILON_PRIME)?,
            work_budget: DEFAULT_WORK_BUDGET,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub dims: InstanceDims,
    pub reports: Vec<DecodeReport>,
    pub success_rate: f64,
    /// Scheme conditions that fail; the run proceeds regardless.
    pub validity: SchemeValidity,
}

/// Largest power of two `M` whose clustering cost fits the budget.
fn suggest_m(params: &ChannelParams, budget: f64) -> usize {
    let mut m = 1usize << 30;
    while m > 2 {
        let d = InstanceDims::from_params(params, m).expect("m and L positive");
        if (d.n as f64).powi(2) * d.l as f64 <= budget {
            break;
        }
        m /= 2;
    }
    m
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, StreamTag::Trial, trial as u64)
}

/// Simulates one channel use for `trial`, deterministic in `(seed, trial)`.
pub fn simulate_trial(params: &ChannelParams, dims: InstanceDims, seed: u64, trial: usize) -> ChannelOutput {
    let s = trial_seed(seed, trial);
    let pool = random_pool(dims, s);
    simulate_channel(&pool, params, s)
}

/// Independent end-to-end trials at `M = config.m`.
pub fn run_pipeline(params: &ChannelParams, scheme: &SchemeParams, config: &PipelineConfig) -> Result<PipelineResult> {
    let dims = InstanceDims::from_params(params, config.m)?;
    dims.check_block_size(scheme.k)?;
    if config.trials == 0 {
        return Err(Error::OutOfRange {
            name: "trials",
            value: 0.0,
            expected: "{1, 2, ...}",
        });
    }
    let work = (dims.n as f64).powi(2) * dims.l as f64;
    if work > config.work_budget {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: config.work_budget,
            suggested_m: suggest_m(params, config.work_budget),
        });
    }
    let reports = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let output = simulate_trial(params, dims, config.seed, t);
            decode_output(&output, params, scheme, &config.clustering)
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = reports.iter().filter(|r| r.outer_success).count();
    Ok(PipelineResult {
        dims,
        success_rate: successes as f64 / reports.len() as f64,
        reports,
        validity: validate_scheme(params, scheme),
    })
}
