//! Exact Monte Carlo successive-cancellation simulation over erasure
//! channels for arbitrary kernel trees, including packaged power vertices.
//!
//! Over an erasure channel the successive decoder either decodes a symbol
//! or flags an erasure, so "some information-leaf use erased" is exactly a
//! block error — no genie needed. Each trial samples the base erasures,
//! then propagates them rootward-to-leafward: a kernel vertex feeds each
//! use of synthetic child `i` from one disjoint group of ℓ parent uses and
//! erases it iff the group's realized pattern leaves index `i`
//! undetermined; a power vertex erases a packaged use iff any of its `k`
//! constituent uses is erased. Trials draw from per-trial ChaCha streams,
//! so reports are bit-identical for any shard count.

use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::tree::{ChannelTree, NodeId, Transform};

/// Default ceiling on base-channel uses across a whole simulation.
pub const DEFAULT_TRIAL_BUDGET: u64 = 1 << 33;

/// Two-sided 99% normal quantile used for the reported intervals.
const Z_99: f64 = 2.5758293035489004;

/// How a vertex's parent uses are partitioned into child groups. Both
/// choices partition i.i.d. uses, so they are statistically equivalent;
/// `Stride` is the default, `Block` exists to test that equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// Group `j` takes parent uses `{j + t·(M/ℓ)}`.
    #[default]
    Stride,
    /// Group `j` takes parent uses `{j·ℓ + t}`.
    Block,
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Sample base erasures at this rate instead of the tree's own ε.
    /// The analytic columns keep the tree's values, so expect mismatches
    /// when probing sensitivity.
    pub eps_override: Option<f64>,
    /// Worker count; 0 lets the thread pool decide. Results do not depend
    /// on this.
    pub shards: usize,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            trials: 10_000,
            seed: 0,
            eps_override: None,
            shards: 0,
        }
    }
}

/// Empirical erasure statistics of one leaf.
#[derive(Debug, Clone)]
pub struct LeafStat {
    pub leaf: NodeId,
    /// ln Z of the leaf's synthetic channel.
    pub analytic_ln_z: f64,
    /// Uses of this leaf per transmitted block.
    pub uses_per_trial: u64,
    /// Bernoulli samples observed: trials × uses.
    pub samples: u64,
    /// Erased samples.
    pub erased: u64,
    pub empirical_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Full report of a simulation run.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub trials: u64,
    /// Normal quantile behind every reported interval.
    pub z_quantile: f64,
    /// One row per tree leaf, in leaf order.
    pub leaves: Vec<LeafStat>,
    /// Trials in which some information-leaf use was erased.
    pub block_errors: u64,
    pub bler: f64,
    pub bler_ci: (f64, f64),
    /// ln of the weighted union bound over the information set.
    pub union_bound_ln: f64,
}

impl SimReport {
    /// The union bound in linear scale.
    pub fn union_bound(&self) -> f64 {
        self.union_bound_ln.exp()
    }
}

/// Outcome of checking the simulated block error rate against the bound.
#[derive(Debug, Clone)]
pub struct UnionCheck {
    pub bler: f64,
    pub bound: f64,
    /// Monte Carlo slack: four binomial standard deviations.
    pub slack: f64,
    /// True when `bler ≤ bound + slack`; a violation is flagged here, not
    /// raised as an error.
    pub ok: bool,
    pub report: SimReport,
}

fn binomial_ci(erased: u64, samples: u64, z: f64) -> (f64, f64, f64) {
    if samples == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = erased as f64 / samples as f64;
    let half = z * (p * (1.0 - p) / samples as f64).sqrt();
    (p, (p - half).max(0.0), (p + half).min(1.0))
}

#[inline]
fn bit_get(buf: &[u64], base: usize, j: u64) -> bool {
    buf[base + (j >> 6) as usize] >> (j & 63) & 1 == 1
}

#[inline]
fn bit_set(buf: &mut [u64], base: usize, j: u64) {
    buf[base + (j >> 6) as usize] |= 1 << (j & 63);
}

/// Precomputed per-node layout and per-kernel pattern tables.
struct SimPlan {
    /// Uses of each node per transmitted block.
    uses: Vec<u64>,
    /// Word offset of each node's bit run in the trial buffer.
    offsets: Vec<usize>,
    words: usize,
    /// `masks[kernel id][pattern]` = bitmask of undetermined child indices.
    masks: Vec<Vec<u32>>,
    /// Membership of the information set, indexed by node id.
    in_a: Vec<bool>,
}

fn plan(tree: &ChannelTree, a: &[NodeId]) -> Result<SimPlan> {
    let n = tree
        .block_length()
        .to_u64()
        .ok_or(CoreError::BudgetExceeded {
            need: u64::MAX,
            budget: DEFAULT_TRIAL_BUDGET,
        })?;
    let mut uses = vec![0u64; tree.len()];
    let mut offsets = vec![0usize; tree.len()];
    uses[tree.root() as usize] = n;
    let mut words = 0usize;
    for v in 0..tree.len() {
        offsets[v] = words;
        words += (uses[v] as usize).div_ceil(64);
        let m = uses[v];
        let node = tree.node(v as NodeId);
        let per_child = match node.transform {
            Transform::Leaf => continue,
            Transform::Kernel(_) => m / tree.arity(v as NodeId) as u64,
            Transform::Power(k) => m / k as u64,
        };
        debug_assert!(per_child > 0, "block length must cover every vertex");
        for c in tree.children(v as NodeId) {
            uses[c as usize] = per_child;
        }
    }
    let masks = tree
        .kernels()
        .iter()
        .map(|k| {
            k.erasure_table()?;
            Ok((0..1u32 << k.ell()).map(|s| k.erased_indices(s)).collect())
        })
        .collect::<Result<Vec<Vec<u32>>>>()?;
    let mut in_a = vec![false; tree.len()];
    for &w in a {
        if w as usize >= tree.len() {
            return Err(CoreError::UnknownNode(w as usize));
        }
        if !tree.is_leaf(w) {
            return Err(CoreError::NotALeaf(w as usize));
        }
        in_a[w as usize] = true;
    }
    Ok(SimPlan {
        uses,
        offsets,
        words,
        masks,
        in_a,
    })
}

/// Run one shard of trials; returns per-leaf erased counts and the number
/// of block-error trials.
#[allow(clippy::too_many_arguments)]
fn run_shard(
    tree: &ChannelTree,
    plan: &SimPlan,
    grouping: Grouping,
    seed: u64,
    thresh: u64,
    trials: std::ops::Range<u64>,
) -> (Vec<u64>, u64) {
    let mut buf = vec![0u64; plan.words];
    let mut erased = vec![0u64; tree.leaves().len()];
    let mut block_errors = 0u64;
    let root = tree.root() as usize;
    for trial in trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        buf.fill(0);
        for j in 0..plan.uses[root] {
            if (rng.next_u32() as u64) < thresh {
                bit_set(&mut buf, plan.offsets[root], j);
            }
        }
        for v in 0..tree.len() {
            let node = tree.node(v as NodeId);
            let m = plan.uses[v];
            let base = plan.offsets[v];
            match node.transform {
                Transform::Leaf => {}
                Transform::Kernel(id) => {
                    let ell = tree.arity(v as NodeId) as u64;
                    let groups = m / ell;
                    let child_bases: Vec<usize> = tree
                        .children(v as NodeId)
                        .map(|c| plan.offsets[c as usize])
                        .collect();
                    let table = &plan.masks[id as usize];
                    for j in 0..groups {
                        let mut s = 0u32;
                        for t in 0..ell {
                            let src = match grouping {
                                Grouping::Stride => j + t * groups,
                                Grouping::Block => j * ell + t,
                            };
                            if bit_get(&buf, base, src) {
                                s |= 1 << t;
                            }
                        }
                        let flags = table[s as usize];
                        debug_assert_eq!(
                            flags.count_ones(),
                            s.count_ones(),
                            "per-group erasure conservation"
                        );
                        for (t, &cb) in child_bases.iter().enumerate() {
                            if flags >> t & 1 == 1 {
                                bit_set(&mut buf, cb, j);
                            }
                        }
                    }
                }
                Transform::Power(k) => {
                    let k = k as u64;
                    let groups = m / k;
                    let cb = plan.offsets[tree
                        .children(v as NodeId)
                        .next()
                        .expect("power vertex has a child")
                        as usize];
                    for j in 0..groups {
                        let hit = (0..k).any(|t| {
                            let src = match grouping {
                                Grouping::Stride => j + t * groups,
                                Grouping::Block => j * k + t,
                            };
                            bit_get(&buf, base, src)
                        });
                        if hit {
                            bit_set(&mut buf, cb, j);
                        }
                    }
                }
            }
        }
        let mut block_error = false;
        for (i, &w) in tree.leaves().iter().enumerate() {
            let base = plan.offsets[w as usize];
            let words = (plan.uses[w as usize] as usize).div_ceil(64);
            let mut count = 0u64;
            for word in &buf[base..base + words] {
                count += word.count_ones() as u64;
            }
            erased[i] += count;
            block_error |= plan.in_a[w as usize] && count > 0;
        }
        block_errors += block_error as u64;
    }
    (erased, block_errors)
}

/// Simulate with an explicit grouping scheme. `simulate` uses `Stride`;
/// `Block` exists so tests can confirm the partition choice is immaterial.
pub fn simulate_grouped(
    tree: &ChannelTree,
    a: &[NodeId],
    cfg: &SimConfig,
    budget: u64,
    grouping: Grouping,
) -> Result<SimReport> {
    if cfg.trials == 0 {
        return Err(CoreError::NoTrials);
    }
    let plan = plan(tree, a)?;
    let n = plan.uses[tree.root() as usize];
    let need = n as u128 * cfg.trials as u128;
    if need > budget as u128 {
        return Err(CoreError::BudgetExceeded {
            need: need.min(u64::MAX as u128) as u64,
            budget,
        });
    }
    let eps = match cfg.eps_override {
        Some(e) => {
            if !(0.0..=1.0).contains(&e) {
                return Err(CoreError::EpsilonOutOfRange(e));
            }
            e
        }
        None => tree.node(tree.root()).channel.z(),
    };
    let thresh = (eps * 4294967296.0) as u64;

    let shards = match cfg.shards {
        0 => rayon::current_num_threads(),
        s => s,
    }
    .clamp(1, cfg.trials.min(1 << 16) as usize) as u64;
    let partials: Vec<(Vec<u64>, u64)> = (0..shards)
        .into_par_iter()
        .map(|i| {
            let lo = i * cfg.trials / shards;
            let hi = (i + 1) * cfg.trials / shards;
            run_shard(tree, &plan, grouping, cfg.seed, thresh, lo..hi)
        })
        .collect();
    let mut erased = vec![0u64; tree.leaves().len()];
    let mut block_errors = 0u64;
    for (part, errs) in partials {
        for (acc, e) in erased.iter_mut().zip(part) {
            *acc += e;
        }
        block_errors += errs;
    }

    let leaves = tree
        .leaves()
        .iter()
        .zip(&erased)
        .map(|(&w, &err)| {
            let uses = plan.uses[w as usize];
            let samples = uses * cfg.trials;
            let (rate, lo, hi) = binomial_ci(err, samples, Z_99);
            LeafStat {
                leaf: w,
                analytic_ln_z: tree.node(w).channel.eps().ln(),
                uses_per_trial: uses,
                samples,
                erased: err,
                empirical_rate: rate,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    let (bler, lo, hi) = binomial_ci(block_errors, cfg.trials, Z_99);
    Ok(SimReport {
        trials: cfg.trials,
        z_quantile: Z_99,
        leaves,
        block_errors,
        bler,
        bler_ci: (lo, hi),
        union_bound_ln: tree.error_bound_ln(a)?,
    })
}

/// Monte Carlo estimate of per-leaf erasure rates and the block error rate
/// of the code `(tree, a)`.
pub fn simulate(
    tree: &ChannelTree,
    a: &[NodeId],
    cfg: &SimConfig,
    budget: u64,
) -> Result<SimReport> {
    simulate_grouped(tree, a, cfg, budget, Grouping::Stride)
}

/// Simulate and compare the block error rate against the weighted union
/// bound, with four standard deviations of Monte Carlo slack.
pub fn verify_union_bound(
    tree: &ChannelTree,
    a: &[NodeId],
    cfg: &SimConfig,
    budget: u64,
) -> Result<UnionCheck> {
    let report = simulate(tree, a, cfg, budget)?;
    let bound = report.union_bound();
    let slack = 4.0 * (report.bler * (1.0 - report.bler) / report.trials as f64).sqrt();
    Ok(UnionCheck {
        bler: report.bler,
        bound,
        slack,
        ok: report.bler <= bound + slack,
        report,
    })
}
