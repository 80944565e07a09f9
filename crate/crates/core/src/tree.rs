//! Channel trees: synthetic channels arranged by repeated kernel application.
//!
//! A tree node is a synthetic channel; applying a kernel to a node's channel
//! yields its children, and a power node packages `k` uses of its channel as
//! one use over the degree-`k` extension field. A leaf set `A` then defines
//! a block code whose length, rate, and union-bound error probability are
//! computed here with exact integer/rational arithmetic where the quantities
//! are exact by construction.
//!
//! Depth counts kernel applications only: a power node's child keeps its
//! parent's depth, so a grafted tree is balanced when every leaf sits at
//! kernel-depth `n`.

use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ErasureChannel;
use crate::error::{CoreError, Result};
use crate::kernel::Kernel;
use crate::prob::LogSumAcc;

/// Node index within one tree.
pub type NodeId = u32;

const NO_PARENT: u32 = u32::MAX;

/// Hard cap on explicit tree size; builders reject anything larger.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 22;

/// What a node applies to produce its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Apply the registered kernel with this registry index; arity = its size.
    Kernel(u32),
    /// Package `k` uses as one extension-field use; arity = 1.
    Power(u32),
    /// No children.
    Leaf,
}

/// One synthetic channel in the tree.
#[derive(Debug, Clone)]
pub struct Node {
    pub channel: ErasureChannel,
    pub transform: Transform,
    child_start: u32,
    child_count: u32,
    parent: u32,
    /// Kernel-depth: number of kernel edges from the root.
    pub depth: u32,
    /// Index of this node among its parent's children.
    pub branch: u32,
}

/// A finalized channel tree. Immutable after construction, safe to share.
#[derive(Debug, Clone)]
pub struct ChannelTree {
    nodes: Vec<Node>,
    kernels: Vec<Arc<Kernel>>,
    leaves: Vec<NodeId>,
    /// The common packaging parameter when power nodes are present, else 1.
    k_power: u32,
}

impl ChannelTree {
    pub fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v as usize]
    }

    pub fn try_node(&self, v: NodeId) -> Result<&Node> {
        self.nodes
            .get(v as usize)
            .ok_or(CoreError::UnknownNode(v as usize))
    }

    pub fn kernels(&self) -> &[Arc<Kernel>] {
        &self.kernels
    }

    /// The kernel a node applies, if its transform is a kernel.
    pub fn kernel_of(&self, v: NodeId) -> Option<&Arc<Kernel>> {
        match self.node(v).transform {
            Transform::Kernel(id) => Some(&self.kernels[id as usize]),
            _ => None,
        }
    }

    pub fn k_power(&self) -> u32 {
        self.k_power
    }

    /// Leaves in construction (left-to-right) order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.node(v).child_count == 0
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        let p = self.node(v).parent;
        (p != NO_PARENT).then_some(p)
    }

    pub fn children(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let n = self.node(v);
        n.child_start..n.child_start + n.child_count
    }

    /// Number of children (kernel size, 1 for power nodes, 0 for leaves).
    pub fn arity(&self, v: NodeId) -> u32 {
        self.node(v).child_count
    }

    /// Root-to-node path, inclusive of both ends.
    pub fn path_from_root(&self, v: NodeId) -> Vec<NodeId> {
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Mixed-radix index of a leaf: branch digits from the root down.
    pub fn path_index(&self, v: NodeId) -> u128 {
        let mut idx = 0u128;
        for &u in &self.path_from_root(v)[1..] {
            let p = self.parent(u).unwrap();
            idx = idx * self.node(p).child_count as u128 + self.node(u).branch as u128;
        }
        idx
    }

    /// Exact vertex probability: 1 over the product of branch arities along
    /// the root path (power nodes contribute a factor of one).
    pub fn vertex_prob(&self, v: NodeId) -> Result<BigRational> {
        self.try_node(v)?;
        Ok(BigRational::new(1.into(), self.prob_denominator(v).into()))
    }

    fn prob_denominator(&self, v: NodeId) -> u64 {
        let mut den = 1u64;
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            den *= self.node(p).child_count as u64;
            cur = p;
        }
        den
    }

    /// `ln P(v)`.
    pub fn vertex_prob_ln(&self, v: NodeId) -> f64 {
        -(self.prob_denominator(v) as f64).ln()
    }

    /// Block length: least `N` making every leaf's use count `N * P(w)` a
    /// positive integer, with every use worth `k_power` base-channel symbols.
    pub fn block_length(&self) -> BigUint {
        let k = BigUint::from(self.k_power);
        let mut n = BigUint::one();
        for &w in &self.leaves {
            n = n.lcm(&(BigUint::from(self.prob_denominator(w)) * &k));
        }
        n
    }

    /// Exact code rate of a leaf set: the probability mass of `A`.
    pub fn code_rate(&self, a: &[NodeId]) -> Result<BigRational> {
        let mut r = BigRational::zero();
        for &w in a {
            if self.try_node(w).is_err() || !self.is_leaf(w) {
                return Err(CoreError::NotALeaf(w as usize));
            }
            r += self.vertex_prob(w)?;
        }
        Ok(r)
    }

    /// Union-bound error probability of `(tree, A)` in log domain:
    /// `ln sum_{w in A} N P(w) Z(w)`. Empty `A` gives `-inf` (bound zero).
    pub fn error_bound_ln(&self, a: &[NodeId]) -> Result<f64> {
        let n = self.block_length();
        let mut acc = LogSumAcc::new();
        for &w in a {
            if self.try_node(w).is_err() || !self.is_leaf(w) {
                return Err(CoreError::NotALeaf(w as usize));
            }
            // N / den is exact here by the lcm construction.
            let uses = (&n / BigUint::from(self.prob_denominator(w)))
                .to_f64()
                .expect("leaf use count fits f64 for explicit trees");
            acc.add(uses.ln() + self.node(w).channel.eps().ln());
        }
        Ok(acc.value())
    }

    /// Capacity in q-ary symbol units carried by a leaf set, `sum P(w) I(w)`.
    pub fn leaf_capacity(&self, a: &[NodeId]) -> f64 {
        a.iter()
            .map(|&w| {
                let node = self.node(w);
                node.channel.capacity() / self.prob_denominator(w) as f64
            })
            .sum()
    }
}

/// Incremental tree under construction.
struct Builder {
    nodes: Vec<Node>,
    kernels: Vec<Arc<Kernel>>,
    budget: usize,
    k_power: u32,
}

impl Builder {
    fn new(root_channel: ErasureChannel, budget: usize) -> Builder {
        Builder {
            nodes: vec![Node {
                channel: root_channel,
                transform: Transform::Leaf,
                child_start: 0,
                child_count: 0,
                parent: NO_PARENT,
                depth: 0,
                branch: 0,
            }],
            kernels: Vec::new(),
            budget,
            k_power: 1,
        }
    }

    fn register(&mut self, kernel: &Arc<Kernel>) -> u32 {
        if let Some(i) = self.kernels.iter().position(|k| Arc::ptr_eq(k, kernel)) {
            return i as u32;
        }
        self.kernels.push(Arc::clone(kernel));
        (self.kernels.len() - 1) as u32
    }

    fn reserve(&mut self, extra: usize) -> Result<()> {
        let need = self.nodes.len() + extra;
        if need > self.budget {
            return Err(CoreError::BudgetExceeded {
                need: need as u64,
                budget: self.budget as u64,
            });
        }
        Ok(())
    }

    /// Expand `v` with the kernel, returning the new children ids.
    fn apply_kernel(&mut self, v: NodeId, kernel_id: u32) -> Result<Vec<NodeId>> {
        let kernel = Arc::clone(&self.kernels[kernel_id as usize]);
        self.reserve(kernel.ell())?;
        let parent_channel = self.nodes[v as usize].channel.clone();
        let depth = self.nodes[v as usize].depth;
        let children = kernel.synthetic_children(&parent_channel)?;
        let start = self.nodes.len() as u32;
        self.nodes[v as usize].transform = Transform::Kernel(kernel_id);
        self.nodes[v as usize].child_start = start;
        self.nodes[v as usize].child_count = children.len() as u32;
        for (b, channel) in children.into_iter().enumerate() {
            self.nodes.push(Node {
                channel,
                transform: Transform::Leaf,
                child_start: 0,
                child_count: 0,
                parent: v,
                depth: depth + 1,
                branch: b as u32,
            });
        }
        Ok((start..self.nodes.len() as u32).collect())
    }

    /// Expand `v` with a power node; the child keeps `v`'s kernel-depth.
    fn apply_power(&mut self, v: NodeId, k: u32) -> Result<NodeId> {
        self.reserve(1)?;
        let child_channel = self.nodes[v as usize].channel.power(k)?;
        let depth = self.nodes[v as usize].depth;
        let id = self.nodes.len() as u32;
        self.nodes[v as usize].transform = Transform::Power(k);
        self.nodes[v as usize].child_start = id;
        self.nodes[v as usize].child_count = 1;
        self.nodes.push(Node {
            channel: child_channel,
            transform: Transform::Leaf,
            child_start: 0,
            child_count: 0,
            parent: v,
            depth,
            branch: 0,
        });
        self.k_power = k;
        Ok(id)
    }

    /// Grow a perfect kernel subtree of the given depth below `v`.
    fn grow_perfect(&mut self, v: NodeId, kernel_id: u32, depth: u32) -> Result<()> {
        let mut level = vec![v];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * 2);
            for u in level {
                next.extend(self.apply_kernel(u, kernel_id)?);
            }
            level = next;
        }
        Ok(())
    }

    fn finish(self) -> ChannelTree {
        let leaves = (0..self.nodes.len() as u32)
            .filter(|&v| self.nodes[v as usize].child_count == 0)
            .collect();
        ChannelTree {
            nodes: self.nodes,
            kernels: self.kernels,
            leaves,
            k_power: self.k_power,
        }
    }
}

/// Complete depth-`n` tree applying one kernel at every level.
pub fn perfect_tree(
    w: &ErasureChannel,
    kernel: &Arc<Kernel>,
    n: u32,
    budget: usize,
) -> Result<ChannelTree> {
    let schedule: Vec<Arc<Kernel>> = (0..n).map(|_| Arc::clone(kernel)).collect();
    if n == 0 {
        return Ok(Builder::new(w.clone(), budget).finish());
    }
    multi_tree(w, &schedule, budget)
}

/// Tree applying `schedule[d]` to every depth-`d` vertex.
pub fn multi_tree(
    w: &ErasureChannel,
    schedule: &[Arc<Kernel>],
    budget: usize,
) -> Result<ChannelTree> {
    if schedule.is_empty() {
        return Err(CoreError::EmptySchedule);
    }
    // Budget precheck so a hopeless request fails before allocating.
    let mut need = 1u64;
    let mut width = 1u64;
    for k in schedule {
        width = width.saturating_mul(k.ell() as u64);
        need = need.saturating_add(width);
    }
    if need > budget as u64 {
        return Err(CoreError::BudgetExceeded {
            need,
            budget: budget as u64,
        });
    }
    let mut b = Builder::new(w.clone(), budget);
    let mut level = vec![0u32];
    for kernel in schedule {
        let id = b.register(kernel);
        let mut next = Vec::with_capacity(level.len() * kernel.ell());
        for v in level {
            next.extend(b.apply_kernel(v, id)?);
        }
        level = next;
    }
    Ok(b.finish())
}

/// One recruit round recorded while building a grafted tree: the stock
/// vertices cut at depth `m`. The final entry (`survivors` set) holds the
/// rated-depth vertices that were never recruited by a threshold.
#[derive(Debug, Clone)]
pub struct GraftRound {
    pub m: u32,
    pub recruits: Vec<NodeId>,
    /// True for the final round of rated-depth survivors, which carry no
    /// threshold certificate.
    pub survivors: bool,
}

/// A grafted tree plus the bookkeeping the selection stage needs.
#[derive(Debug, Clone)]
pub struct GraftedTree {
    pub tree: ChannelTree,
    pub rat_kernel: Arc<Kernel>,
    pub err_kernel: Arc<Kernel>,
    pub k: u32,
    pub n: u32,
    pub n_rat: u32,
    pub s: u32,
    pub rounds: Vec<GraftRound>,
}

/// Stock-prune-graft construction. The stock kernel grows to the rated
/// depth `n_rat = round(n * mu_star_rat / mu_p)`; at each round depth
/// `m = s, 2s, ...` the stock vertices with `Z < exp(-exp(m^(1/3)))` are cut
/// (keeping no stock descendants); every cut vertex and every rated-depth
/// survivor gains a power node followed by a perfect error-kernel subtree
/// reaching total kernel-depth `n`.
#[allow(clippy::too_many_arguments)]
pub fn build_grafted_tree(
    w: &ErasureChannel,
    t_rat: &Arc<Kernel>,
    t_err: &Arc<Kernel>,
    k: u32,
    n: u32,
    mu_star_rat: f64,
    mu_p: f64,
    budget: usize,
) -> Result<GraftedTree> {
    if k == 0 {
        return Err(CoreError::BadPowerExponent);
    }
    let want = (t_rat.q() as u64)
        .checked_pow(k)
        .ok_or(CoreError::FieldTooLarge(u64::MAX))?;
    if t_err.q() as u64 != want {
        return Err(CoreError::GraftFieldMismatch {
            want,
            got: t_err.q() as u64,
            k,
        });
    }
    let n_rat_f = (n as f64 * mu_star_rat / mu_p).round();
    if !(1.0..=n as f64).contains(&n_rat_f) {
        return Err(CoreError::RatedDepthOutOfRange {
            n_rat: n_rat_f as i64,
            n: n as i64,
        });
    }
    let n_rat = n_rat_f as u32;
    let s = (n as f64).sqrt().ceil() as u32;

    let mut b = Builder::new(w.clone(), budget);
    let rat_id = b.register(t_rat);
    let err_id = b.register(t_err);

    // Stock phase with pruning at round depths (the rated depth itself is a
    // threshold round when the step divides it).
    let mut active = vec![0u32];
    let mut rounds: Vec<GraftRound> = Vec::new();
    for depth in 0..=n_rat {
        if depth >= s && depth % s == 0 {
            let threshold = -(depth as f64).cbrt().exp();
            let (cut, kept): (Vec<u32>, Vec<u32>) = active
                .iter()
                .partition(|&&v| b.nodes[v as usize].channel.eps().ln() < threshold);
            rounds.push(GraftRound {
                m: depth,
                recruits: cut,
                survivors: false,
            });
            active = kept;
        }
        if depth < n_rat {
            let mut next = Vec::with_capacity(active.len() * t_rat.ell());
            for v in active {
                next.extend(b.apply_kernel(v, rat_id)?);
            }
            active = next;
        }
    }
    // Rated-depth survivors form the final, threshold-free round.
    rounds.push(GraftRound {
        m: n_rat,
        recruits: active,
        survivors: true,
    });

    // Graft phase: power node + perfect error subtree under every recruit.
    for round in &rounds {
        let graft_depth = n - round.m;
        for &v in &round.recruits {
            let u = b.apply_power(v, k)?;
            b.grow_perfect(u, err_id, graft_depth)?;
        }
    }
    Ok(GraftedTree {
        tree: b.finish(),
        rat_kernel: Arc::clone(t_rat),
        err_kernel: Arc::clone(t_err),
        k,
        n,
        n_rat,
        s,
        rounds,
    })
}

/// A block code: a tree, an information leaf set, and the derived
/// parameters (exact block length, rate, log-domain union bound).
#[derive(Debug, Clone)]
pub struct CodeSpec {
    pub tree: ChannelTree,
    pub a: Vec<NodeId>,
    pub n: BigUint,
    pub rate: f64,
    pub p_bound_ln: f64,
}

impl CodeSpec {
    pub fn new(tree: ChannelTree, mut a: Vec<NodeId>) -> Result<CodeSpec> {
        a.sort_unstable();
        a.dedup();
        let rate = tree
            .code_rate(&a)?
            .to_f64()
            .expect("rate is a small rational");
        let p_bound_ln = tree.error_bound_ln(&a)?;
        let n = tree.block_length();
        Ok(CodeSpec {
            tree,
            a,
            n,
            rate,
            p_bound_ln,
        })
    }
}

/// One step of a sampled root-to-leaf walk.
#[derive(Debug, Clone, Copy)]
pub struct PathStep {
    pub node: NodeId,
    pub depth: u32,
    pub ln_z: f64,
    /// Branch taken from the previous step's node (0 for the root entry).
    pub branch: u32,
    /// `ln(ln Z_i / ln Z_{i-1})`; absent when either endpoint makes the
    /// ratio degenerate (Z of 0 or 1).
    pub empirical_increment: Option<f64>,
}

/// A sampled walk: uniform child at every step until a leaf.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub steps: Vec<PathStep>,
    pub tau: u32,
}

/// Sample the vertex process once; deterministic per seed.
pub fn z_process_sample(tree: &ChannelTree, seed: u64) -> PathRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = vec![PathStep {
        node: tree.root(),
        depth: 0,
        ln_z: tree.node(tree.root()).channel.eps().ln(),
        branch: 0,
        empirical_increment: None,
    }];
    let mut cur = tree.root();
    while !tree.is_leaf(cur) {
        let arity = tree.arity(cur);
        let branch = rng.gen_range(0..arity);
        let prev_ln = tree.node(cur).channel.eps().ln();
        cur = tree.node(cur).child_start + branch;
        let node = tree.node(cur);
        let ln_z = node.channel.eps().ln();
        let ratio = ln_z / prev_ln;
        let inc = ratio.ln();
        steps.push(PathStep {
            node: cur,
            depth: node.depth,
            ln_z,
            branch,
            empirical_increment: inc.is_finite().then_some(inc),
        });
    }
    PathRecord {
        tau: (steps.len() - 1) as u32,
        steps,
    }
}

/// Parsed tree recipe: root channel, per-depth kernel files, optional graft.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecipe {
    pub q: u64,
    pub epsilon: f64,
    /// `(depth, kernel file path)` pairs, contiguous from depth 0.
    pub schedule: Vec<(u32, String)>,
    pub graft: Option<GraftRecipe>,
}

/// Graft section of a recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct GraftRecipe {
    pub k: u32,
    pub n: u32,
    pub mu_star_rat: f64,
    pub mu_prime: f64,
    pub err_kernel: String,
}

impl TreeRecipe {
    /// Parse the sectioned text format:
    ///
    /// ```text
    /// # comment
    /// 2 0.5                          root channel: q epsilon
    /// 0 kernels/arikan.kt            schedule: depth kernel-file
    /// 1 kernels/arikan.kt
    /// graft 2 8 2.1 4.2 rs16.kt     optional: k n mu_star_rat mu_prime file
    /// ```
    pub fn parse(text: &str) -> Result<TreeRecipe> {
        let err = |line: usize, msg: &str| CoreError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut header: Option<(u64, f64)> = None;
        let mut schedule = Vec::new();
        let mut graft = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if header.is_none() {
                if tok.len() != 2 {
                    return Err(err(line_no, "expected root channel line: q epsilon"));
                }
                let q = tok[0]
                    .parse()
                    .map_err(|_| err(line_no, "bad field order"))?;
                let eps: f64 = tok[1]
                    .parse()
                    .map_err(|_| err(line_no, "bad erasure rate"))?;
                if !(0.0..=1.0).contains(&eps) {
                    return Err(err(line_no, "erasure rate outside [0, 1]"));
                }
                header = Some((q, eps));
            } else if tok[0] == "graft" {
                if tok.len() != 6 {
                    return Err(err(
                        line_no,
                        "expected: graft k n mu_star_rat mu_prime kernel-file",
                    ));
                }
                if graft.is_some() {
                    return Err(err(line_no, "duplicate graft section"));
                }
                graft = Some(GraftRecipe {
                    k: tok[1].parse().map_err(|_| err(line_no, "bad k"))?,
                    n: tok[2].parse().map_err(|_| err(line_no, "bad n"))?,
                    mu_star_rat: tok[3]
                        .parse()
                        .map_err(|_| err(line_no, "bad mu_star_rat"))?,
                    mu_prime: tok[4].parse().map_err(|_| err(line_no, "bad mu_prime"))?,
                    err_kernel: tok[5].to_string(),
                });
            } else {
                if tok.len() != 2 {
                    return Err(err(line_no, "expected schedule line: depth kernel-file"));
                }
                let depth: u32 = tok[0].parse().map_err(|_| err(line_no, "bad depth"))?;
                if depth as usize != schedule.len() {
                    return Err(err(line_no, "schedule depths must be contiguous from 0"));
                }
                schedule.push((depth, tok[1].to_string()));
            }
        }
        let (q, epsilon) = header.ok_or(err(0, "empty recipe"))?;
        if schedule.is_empty() {
            return Err(CoreError::EmptySchedule);
        }
        Ok(TreeRecipe {
            q,
            epsilon,
            schedule,
            graft,
        })
    }
}
