//! Channel selection: thresholding, the recruit-train-retain templates
//! (recyclable and disposable), selection on grafted trees, and the
//! empirical scaling-exponent estimators.
//!
//! Both templates work in rounds `m = s, 2s, ...` with step `s = ⌈√n⌉`.
//! A round recruits vertices whose erasure parameter has dropped below a
//! depth-dependent threshold, trains their descendants over a window, and
//! retains exactly those whose window avoids the clipping level δ and whose
//! theoretical dice-sum (read off the branch indices) is large enough to
//! certify the target. Every per-round measure is kept as an exact rational
//! so the partition identities can be checked with no tolerance at all.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::channel::ErasureChannel;
use crate::constants::{DisposableConstants, RecyclableConstants};
use crate::error::{CoreError, Result};
use crate::kernel::Kernel;
use crate::prob::Prob;
use crate::profile::Profile;
use crate::tradeoff::{feasible_thm5, feasible_thm6};
use crate::tree::{perfect_tree, ChannelTree, GraftedTree, NodeId, Transform};

/// π-grid density used when templates re-verify target feasibility.
const FEASIBILITY_GRID: usize = 1024;

/// Per-round measures of the recruit-train-retain bookkeeping, exact.
#[derive(Debug, Clone)]
pub struct RoundStats {
    pub m: u32,
    /// Measure of the recruit set A_m.
    pub a: BigRational,
    /// Cumulative recruit measure A_0^m.
    pub a0: BigRational,
    /// Measure of the trained window-end set B_m.
    pub b: BigRational,
    /// Measure of C_m: windows that hit the clipping level δ.
    pub c: BigRational,
    /// Measure of D_m: δ-clean windows with insufficient dice-sum.
    pub d: BigRational,
    /// Measure of E_m: the retained remainder.
    pub e: BigRational,
    /// Cumulative retained measure E_0^m.
    pub e0: BigRational,
    /// Capacity-gap proxy I(W) − a0 (can go negative transiently).
    pub f: f64,
    /// Capacity-gap proxy I(W) − e0.
    pub g: f64,
    /// True for the rated-depth survivor round of a grafted run.
    pub survivors: bool,
}

/// Bookkeeping of a whole selection run.
#[derive(Debug, Clone, Default)]
pub struct SelectionDiagnostics {
    pub rounds: Vec<RoundStats>,
    /// Rounding decisions and degenerate-round remarks.
    pub notes: Vec<String>,
}

impl SelectionDiagnostics {
    /// Check the partition identities exactly; names the first violation.
    pub fn check_identities(&self, capacity: f64) -> Result<()> {
        let fail = |m: u32, what: &str| {
            Err(CoreError::Precondition(format!(
                "round {m}: diagnostics identity violated: {what}"
            )))
        };
        let mut prev_a0 = BigRational::zero();
        let mut prev_e0 = BigRational::zero();
        for r in &self.rounds {
            if r.b != r.a {
                return fail(r.m, "b != a");
            }
            if &(&r.c + &r.d) + &r.e != r.b {
                return fail(r.m, "c + d + e != b");
            }
            if &prev_a0 + &r.a != r.a0 {
                return fail(r.m, "a0 does not telescope");
            }
            if &prev_e0 + &r.e != r.e0 {
                return fail(r.m, "e0 does not telescope");
            }
            let g = capacity - r.e0.to_f64().expect("measure fits f64");
            if (r.g - g).abs() > 1e-12 {
                return fail(r.m, "g != I(W) - e0");
            }
            let f = capacity - r.a0.to_f64().expect("measure fits f64");
            if (r.f - f).abs() > 1e-12 {
                return fail(r.m, "f != I(W) - a0");
            }
            prev_a0 = r.a0.clone();
            prev_e0 = r.e0.clone();
        }
        Ok(())
    }

    /// Total retained measure after the last round.
    pub fn retained_measure(&self) -> BigRational {
        self.rounds
            .last()
            .map(|r| r.e0.clone())
            .unwrap_or_else(BigRational::zero)
    }
}

/// One retained leaf with the ancestry needed to recheck its certificate.
#[derive(Debug, Clone, Copy)]
pub struct RetainedLeaf {
    pub leaf: NodeId,
    /// Window end: the retained vertex (a mid-depth vertex for the
    /// recyclable template, the leaf itself otherwise).
    pub member: NodeId,
    /// The vertex the recruit threshold was applied to.
    pub threshold_vertex: NodeId,
    /// Window start: equals `threshold_vertex` except on grafted trees,
    /// where it is the packaged child.
    pub window_start: NodeId,
    pub round_m: u32,
    /// True when recruited by the rated-depth survivor round (grafted
    /// trees only): no threshold rule applies.
    pub survivor: bool,
}

/// Output of a template run that builds its own perfect tree.
#[derive(Debug)]
pub struct TemplateRun {
    pub tree: ChannelTree,
    /// Retained leaves, ascending by node id.
    pub a_n: Vec<NodeId>,
    pub retained: Vec<RetainedLeaf>,
    pub diagnostics: SelectionDiagnostics,
}

/// Output of selection on a prebuilt grafted tree.
#[derive(Debug)]
pub struct GraftSelection {
    pub a_n: Vec<NodeId>,
    pub retained: Vec<RetainedLeaf>,
    pub diagnostics: SelectionDiagnostics,
}

/// All leaves with `ln Z` strictly below the cutoff.
pub fn select_threshold(tree: &ChannelTree, ln_z_cutoff: f64) -> Vec<NodeId> {
    tree.leaves()
        .iter()
        .copied()
        .filter(|&w| tree.node(w).channel.eps().ln() < ln_z_cutoff)
        .collect()
}

/// ln of every kernel's partial distances, indexed by kernel registry id.
fn ln_distances(tree: &ChannelTree) -> Result<Vec<Vec<f64>>> {
    tree.kernels()
        .iter()
        .map(|k| {
            Ok(k.partial_distances()?
                .iter()
                .map(|&d| (d as f64).ln())
                .collect())
        })
        .collect()
}

/// True when `v` or any ancestor is marked.
fn marked_on_root_path(tree: &ChannelTree, v: NodeId, marked: &[bool]) -> bool {
    let mut cur = Some(v);
    while let Some(u) = cur {
        if marked[u as usize] {
            return true;
        }
        cur = tree.parent(u);
    }
    false
}

/// Node ids grouped by kernel-depth, in construction order.
fn nodes_by_depth(tree: &ChannelTree, max_depth: u32) -> Vec<Vec<NodeId>> {
    let mut by_depth = vec![Vec::new(); max_depth as usize + 1];
    for v in 0..tree.len() as u32 {
        let d = tree.node(v).depth;
        if d <= max_depth {
            by_depth[d as usize].push(v);
        }
    }
    by_depth
}

/// One trained window, ended at `member`.
struct WindowOutcome {
    member: NodeId,
    dice_sum: f64,
    delta_hit: bool,
    steps: u32,
}

/// Walk every path from `start` down to `target_depth`, accumulating the
/// theoretical dice increments (branch partial distances) and tracking
/// whether any vertex from `start` down reached the clipping level.
fn classify_windows(
    tree: &ChannelTree,
    ln_d: &[Vec<f64>],
    start: NodeId,
    target_depth: u32,
    delta_ln: f64,
    initial_hit: bool,
    out: &mut Vec<WindowOutcome>,
) {
    let start_hit = initial_hit || tree.node(start).channel.eps().ln() >= delta_ln;
    let mut stack = vec![(start, 0.0f64, 0u32, start_hit)];
    while let Some((v, dice, steps, hit)) = stack.pop() {
        let node = tree.node(v);
        if node.depth == target_depth {
            out.push(WindowOutcome {
                member: v,
                dice_sum: dice,
                delta_hit: hit,
                steps,
            });
            continue;
        }
        for c in tree.children(v) {
            let child = tree.node(c);
            let child_hit = hit || child.channel.eps().ln() >= delta_ln;
            let (step_dice, step_inc) = match node.transform {
                Transform::Kernel(id) => (ln_d[id as usize][child.branch as usize], 1),
                Transform::Power(_) => (0.0, 0),
                Transform::Leaf => unreachable!("leaf cannot have children"),
            };
            stack.push((c, dice + step_dice, steps + step_inc, child_hit));
        }
    }
}

/// All depth-`depth` descendants of `v` (kernel-depth), construction order.
fn descendants_at_depth(tree: &ChannelTree, v: NodeId, depth: u32, out: &mut Vec<NodeId>) {
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if tree.node(u).depth == depth {
            out.push(u);
            continue;
        }
        stack.extend(tree.children(u));
    }
}

/// Recyclable recruit-train-retain on a freshly built perfect tree.
///
/// Rounds `m = s, ..., ≤ n−s` recruit depth-`m` vertices with
/// `Z ≤ exp(−m^{2/3})` that are not at-or-below a previously retained
/// vertex, train them over an `s`-step window, and retain window ends whose
/// path stayed below δ with mean dice increment above 2ε. The returned set
/// holds every depth-`n` descendant of a retained vertex.
pub fn select_recyclable(
    w: &ErasureChannel,
    kernel: &Arc<Kernel>,
    n: u32,
    constants: &RecyclableConstants,
    budget: usize,
) -> Result<TemplateRun> {
    let s = (n as f64).sqrt().ceil() as u32;
    if n < 2 * s {
        return Err(CoreError::Precondition(format!(
            "depth {n} leaves no room for a training round of step {s}"
        )));
    }
    let tree = perfect_tree(w, kernel, n, budget)?;
    let ln_d = ln_distances(&tree)?;
    let capacity = tree.node(tree.root()).channel.capacity();
    let delta_ln = constants.delta.ln();
    let by_depth = nodes_by_depth(&tree, n - s);

    let mut diagnostics = SelectionDiagnostics::default();
    let last = (n - s) / s * s;
    if last != n - s {
        diagnostics.notes.push(format!(
            "last round clipped to m = {last} (n−s = {})",
            n - s
        ));
    }
    let mut e_marked = vec![false; tree.len()];
    let mut e_members: Vec<(NodeId, NodeId, u32)> = Vec::new();
    let mut a0 = BigRational::zero();
    let mut e0 = BigRational::zero();
    let mut windows = Vec::new();

    for m in (s..=last).step_by(s as usize) {
        let recruit_ln = -(m as f64).powf(2.0 / 3.0);
        let recruits: Vec<NodeId> = by_depth[m as usize]
            .iter()
            .copied()
            .filter(|&v| {
                tree.node(v).channel.eps().ln() <= recruit_ln
                    && !marked_on_root_path(&tree, v, &e_marked)
            })
            .collect();
        if recruits.is_empty() {
            diagnostics.notes.push(format!("round {m}: no recruits"));
        }
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        let mut c = BigRational::zero();
        let mut d = BigRational::zero();
        let mut e = BigRational::zero();
        for &v in &recruits {
            a += tree.vertex_prob(v)?;
            windows.clear();
            classify_windows(&tree, &ln_d, v, m + s, delta_ln, false, &mut windows);
            for win in &windows {
                let p = tree.vertex_prob(win.member)?;
                b += &p;
                if win.delta_hit {
                    c += &p;
                } else if win.dice_sum <= 2.0 * constants.eps * win.steps as f64 {
                    d += &p;
                } else {
                    e += &p;
                    e_marked[win.member as usize] = true;
                    e_members.push((win.member, v, m));
                }
            }
        }
        a0 += &a;
        e0 += &e;
        diagnostics.rounds.push(RoundStats {
            m,
            a,
            a0: a0.clone(),
            b,
            c,
            d,
            e,
            e0: e0.clone(),
            f: capacity - a0.to_f64().expect("measure fits f64"),
            g: capacity - e0.to_f64().expect("measure fits f64"),
            survivors: false,
        });
    }

    let mut retained = Vec::new();
    let mut a_n = Vec::new();
    let mut leaves = Vec::new();
    for &(member, recruit, m) in &e_members {
        leaves.clear();
        descendants_at_depth(&tree, member, n, &mut leaves);
        for &leaf in &leaves {
            a_n.push(leaf);
            retained.push(RetainedLeaf {
                leaf,
                member,
                threshold_vertex: recruit,
                window_start: recruit,
                round_m: m,
                survivor: false,
            });
        }
    }
    a_n.sort_unstable();
    Ok(TemplateRun {
        tree,
        a_n,
        retained,
        diagnostics,
    })
}

/// Disposable recruit-train-retain on a freshly built perfect tree.
///
/// Rounds `m = s, ..., ≤ n_rat` recruit depth-`m` vertices with
/// `Z < exp(−exp(m^{1/3}))` not at-or-below a previous recruit, train them
/// all the way to depth `n`, and retain leaves whose window stayed below δ
/// with mean dice increment above `β′ ln ℓ / (1 − m/n) + ε`.
#[allow(clippy::too_many_arguments)]
pub fn select_disposable(
    w: &ErasureChannel,
    kernel: &Arc<Kernel>,
    n: u32,
    constants: &DisposableConstants,
    beta_p: f64,
    mu_p: f64,
    mu_star: f64,
    budget: usize,
) -> Result<TemplateRun> {
    let dice = kernel.dice()?;
    let feas = feasible_thm5(
        &dice,
        kernel.ell() as u64,
        mu_star,
        beta_p,
        mu_p,
        FEASIBILITY_GRID,
    );
    if !feas.feasible {
        return Err(CoreError::Precondition(format!(
            "target (beta' = {beta_p}, 1/mu' = {}) is infeasible for this kernel at mu* = \
             {mu_star} (margin {:.3e})",
            1.0 / mu_p,
            feas.margin
        )));
    }
    let n_rat_f = (n as f64 * mu_star / mu_p).round();
    if !(1.0..=n as f64).contains(&n_rat_f) {
        return Err(CoreError::RatedDepthOutOfRange {
            n_rat: n_rat_f as i64,
            n: n as i64,
        });
    }
    let n_rat = n_rat_f as u32;
    let s = (n as f64).sqrt().ceil() as u32;
    let tree = perfect_tree(w, kernel, n, budget)?;

    let run = disposable_rounds(
        &tree,
        DisposableRoundSpec {
            n,
            n_rat,
            s,
            ln_ell: (kernel.ell() as f64).ln(),
            constants,
            beta_p,
        },
        |m| {
            // Threshold rounds only; each recruit is its own window start.
            RoundSource::Thresholded {
                depth: m,
                survivors: false,
            }
        },
    )?;
    Ok(TemplateRun {
        tree,
        a_n: run.a_n,
        retained: run.retained,
        diagnostics: run.diagnostics,
    })
}

/// Disposable retain machinery on a prebuilt grafted tree.
///
/// Recruits are the stock vertices cut while building the tree (plus the
/// rated-depth survivors, which carry no threshold rule); training runs
/// through the grafted error-kernel subtrees with the error kernel's dice.
pub fn select_on_grafted(
    g: &GraftedTree,
    constants: &DisposableConstants,
    beta_p: f64,
    mu_p: f64,
    mu_star_rat: f64,
) -> Result<GraftSelection> {
    let dice = g.err_kernel.dice()?;
    let feas = feasible_thm6(
        &dice,
        g.err_kernel.ell() as u64,
        mu_star_rat,
        beta_p,
        mu_p,
        true,
    );
    if !feas.feasible {
        return Err(CoreError::Precondition(format!(
            "target (beta' = {beta_p}, 1/mu' = {}) is infeasible for the error kernel at \
             mu*_rat = {mu_star_rat} (margin {:.3e})",
            1.0 / mu_p,
            feas.margin
        )));
    }

    let tree = &g.tree;
    let ln_d = ln_distances(tree)?;
    let capacity = tree.node(tree.root()).channel.capacity();
    let delta_ln = constants.delta.ln();
    let ln_ell = (g.err_kernel.ell() as f64).ln();

    let mut diagnostics = SelectionDiagnostics::default();
    let mut a0 = BigRational::zero();
    let mut e0 = BigRational::zero();
    let mut retained = Vec::new();
    let mut a_n = Vec::new();
    let mut windows = Vec::new();

    for round in &g.rounds {
        let m = round.m;
        let dice_cut = window_dice_cut(beta_p, ln_ell, constants.eps, m, g.n);
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        let mut c = BigRational::zero();
        let mut d = BigRational::zero();
        let mut e = BigRational::zero();
        for &v in &round.recruits {
            a += tree.vertex_prob(v)?;
            let start = tree
                .children(v)
                .next()
                .expect("grafted recruit has a packaged child");
            let initial_hit = tree.node(v).channel.eps().ln() >= delta_ln;
            windows.clear();
            classify_windows(tree, &ln_d, start, g.n, delta_ln, initial_hit, &mut windows);
            for win in &windows {
                let p = tree.vertex_prob(win.member)?;
                b += &p;
                if win.delta_hit {
                    c += &p;
                } else if win.steps == 0 || win.dice_sum <= dice_cut * win.steps as f64 {
                    d += &p;
                } else {
                    e += &p;
                    a_n.push(win.member);
                    retained.push(RetainedLeaf {
                        leaf: win.member,
                        member: win.member,
                        threshold_vertex: v,
                        window_start: start,
                        round_m: m,
                        survivor: round.survivors,
                    });
                }
            }
        }
        a0 += &a;
        e0 += &e;
        diagnostics.rounds.push(RoundStats {
            m,
            a,
            a0: a0.clone(),
            b,
            c,
            d,
            e,
            e0: e0.clone(),
            f: capacity - a0.to_f64().expect("measure fits f64"),
            g: capacity - e0.to_f64().expect("measure fits f64"),
            survivors: round.survivors,
        });
    }
    a_n.sort_unstable();
    Ok(GraftSelection {
        a_n,
        retained,
        diagnostics,
    })
}

/// The disposable D-vs-E dice cutoff for a round at depth `m`.
fn window_dice_cut(beta_p: f64, ln_ell: f64, eps: f64, m: u32, n: u32) -> f64 {
    beta_p * ln_ell / (1.0 - m as f64 / n as f64) + eps
}

struct DisposableRoundSpec<'a> {
    n: u32,
    n_rat: u32,
    s: u32,
    ln_ell: f64,
    constants: &'a DisposableConstants,
    beta_p: f64,
}

enum RoundSource {
    Thresholded { depth: u32, survivors: bool },
}

struct RoundsOutput {
    a_n: Vec<NodeId>,
    retained: Vec<RetainedLeaf>,
    diagnostics: SelectionDiagnostics,
}

/// Shared round loop of the perfect-tree disposable template.
fn disposable_rounds(
    tree: &ChannelTree,
    spec: DisposableRoundSpec<'_>,
    source: impl Fn(u32) -> RoundSource,
) -> Result<RoundsOutput> {
    let ln_d = ln_distances(tree)?;
    let capacity = tree.node(tree.root()).channel.capacity();
    let delta_ln = spec.constants.delta.ln();
    let by_depth = nodes_by_depth(tree, spec.n_rat);

    let mut diagnostics = SelectionDiagnostics::default();
    diagnostics.notes.push(format!(
        "rated depth n_rat = {} (n = {}, step s = {})",
        spec.n_rat, spec.n, spec.s
    ));
    let last = spec.n_rat / spec.s * spec.s;
    if last != spec.n_rat {
        diagnostics.notes.push(format!(
            "last round clipped to m = {last} (n_rat = {})",
            spec.n_rat
        ));
    }
    if last < spec.s {
        diagnostics
            .notes
            .push("no rounds fit below the rated depth".to_string());
    }

    let mut recruit_marked = vec![false; tree.len()];
    let mut a0 = BigRational::zero();
    let mut e0 = BigRational::zero();
    let mut retained = Vec::new();
    let mut a_n = Vec::new();
    let mut windows = Vec::new();

    let mut m = spec.s;
    while m <= last {
        let RoundSource::Thresholded { depth, survivors } = source(m);
        let recruit_ln = -(depth as f64).cbrt().exp();
        let recruits: Vec<NodeId> = by_depth[depth as usize]
            .iter()
            .copied()
            .filter(|&v| {
                tree.node(v).channel.eps().ln() < recruit_ln
                    && !marked_on_root_path(tree, v, &recruit_marked)
            })
            .collect();
        for &v in &recruits {
            recruit_marked[v as usize] = true;
        }
        if recruits.is_empty() {
            diagnostics.notes.push(format!("round {m}: no recruits"));
        }
        let dice_cut = window_dice_cut(spec.beta_p, spec.ln_ell, spec.constants.eps, m, spec.n);
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        let mut c = BigRational::zero();
        let mut d = BigRational::zero();
        let mut e = BigRational::zero();
        for &v in &recruits {
            a += tree.vertex_prob(v)?;
            windows.clear();
            classify_windows(tree, &ln_d, v, spec.n, delta_ln, false, &mut windows);
            for win in &windows {
                let p = tree.vertex_prob(win.member)?;
                b += &p;
                if win.delta_hit {
                    c += &p;
                } else if win.steps == 0 || win.dice_sum <= dice_cut * win.steps as f64 {
                    d += &p;
                } else {
                    e += &p;
                    a_n.push(win.member);
                    retained.push(RetainedLeaf {
                        leaf: win.member,
                        member: win.member,
                        threshold_vertex: v,
                        window_start: v,
                        round_m: m,
                        survivor: survivors,
                    });
                }
            }
        }
        a0 += &a;
        e0 += &e;
        diagnostics.rounds.push(RoundStats {
            m,
            a,
            a0: a0.clone(),
            b,
            c,
            d,
            e,
            e0: e0.clone(),
            f: capacity - a0.to_f64().expect("measure fits f64"),
            g: capacity - e0.to_f64().expect("measure fits f64"),
            survivors,
        });
        m += spec.s;
    }
    a_n.sort_unstable();
    Ok(RoundsOutput {
        a_n,
        retained,
        diagnostics,
    })
}

/// Certificate rules: what to recheck for every retained leaf.
#[derive(Debug, Clone, Copy)]
pub enum CertificateRules {
    /// δ-avoidance plus window dice-sum > 2εs plus telescoping.
    Recyclable { delta: f64, eps: f64 },
    /// δ-avoidance plus dice-sum above the disposable cutoff (hence above
    /// β′ n ln ℓ) plus telescoping.
    Disposable {
        delta: f64,
        eps: f64,
        beta_p: f64,
        n: u32,
    },
}

/// Recompute every retained leaf's defining inequalities from the raw path
/// (erasure parameters and branch indices), independent of the set
/// construction. Returns the number of verified leaves.
pub fn verify_certificates(
    tree: &ChannelTree,
    retained: &[RetainedLeaf],
    rules: CertificateRules,
) -> Result<usize> {
    let ln_d = ln_distances(tree)?;
    for rl in retained {
        verify_one(tree, &ln_d, rl, rules)?;
    }
    Ok(retained.len())
}

struct WindowFacts {
    steps: u32,
    dice_sum: f64,
    delta_hit: bool,
    ln_z_start: f64,
    ln_z_end: f64,
    ln_ell: f64,
}

fn recompute_window(
    tree: &ChannelTree,
    ln_d: &[Vec<f64>],
    start: NodeId,
    end: NodeId,
    delta_ln: f64,
) -> Result<WindowFacts> {
    let path = tree.path_from_root(end);
    let pos = path.iter().position(|&v| v == start).ok_or_else(|| {
        CoreError::Precondition("certificate: window start is not an ancestor".into())
    })?;
    let mut hit = tree.node(start).channel.eps().ln() >= delta_ln;
    let mut dice = 0.0;
    let mut steps = 0u32;
    let mut ln_ell = None;
    for pair in path[pos..].windows(2) {
        let child = tree.node(pair[1]);
        hit |= child.channel.eps().ln() >= delta_ln;
        match tree.node(pair[0]).transform {
            Transform::Kernel(id) => {
                dice += ln_d[id as usize][child.branch as usize];
                steps += 1;
                let ell = (tree.arity(pair[0]) as f64).ln();
                if *ln_ell.get_or_insert(ell) != ell {
                    return Err(CoreError::Precondition(
                        "certificate: mixed kernel sizes inside one window".into(),
                    ));
                }
            }
            Transform::Power(_) => {}
            Transform::Leaf => unreachable!("path step out of a leaf"),
        }
    }
    Ok(WindowFacts {
        steps,
        dice_sum: dice,
        delta_hit: hit,
        ln_z_start: tree.node(start).channel.eps().ln(),
        ln_z_end: tree.node(end).channel.eps().ln(),
        ln_ell: ln_ell.unwrap_or(0.0),
    })
}

fn verify_one(
    tree: &ChannelTree,
    ln_d: &[Vec<f64>],
    rl: &RetainedLeaf,
    rules: CertificateRules,
) -> Result<()> {
    let fail = |what: String| {
        Err(CoreError::Precondition(format!(
            "certificate for leaf {}: {what}",
            rl.leaf
        )))
    };
    let m = rl.round_m as f64;
    let (delta, eps) = match rules {
        CertificateRules::Recyclable { delta, eps } => (delta, eps),
        CertificateRules::Disposable { delta, eps, .. } => (delta, eps),
    };
    let facts = recompute_window(tree, ln_d, rl.window_start, rl.member, delta.ln())?;

    // Threshold rule on the recruited vertex.
    let tv_ln = tree.node(rl.threshold_vertex).channel.eps().ln();
    match rules {
        CertificateRules::Recyclable { .. } => {
            if tv_ln > -m.powf(2.0 / 3.0) {
                return fail(format!("recruit rule: ln Z = {tv_ln} > -m^(2/3)"));
            }
        }
        CertificateRules::Disposable { .. } if rl.survivor => {}
        CertificateRules::Disposable { .. } => {
            if tv_ln >= -m.cbrt().exp() {
                return fail(format!("recruit rule: ln Z = {tv_ln} >= -exp(m^(1/3))"));
            }
        }
    }
    // δ-avoidance over the whole window, including a packaging vertex.
    if facts.delta_hit {
        return fail("window hit the clipping level".into());
    }
    if rl.threshold_vertex != rl.window_start
        && tree.node(rl.threshold_vertex).channel.eps().ln() >= delta.ln()
    {
        return fail("stock recruit sits at or above the clipping level".into());
    }
    // Dice-sum inequality.
    match rules {
        CertificateRules::Recyclable { eps, .. } => {
            if facts.dice_sum <= 2.0 * eps * facts.steps as f64 {
                return fail(format!(
                    "dice-sum {} fails the 2εs bound over {} steps",
                    facts.dice_sum, facts.steps
                ));
            }
        }
        CertificateRules::Disposable { beta_p, n, .. } => {
            let cut = window_dice_cut(beta_p, facts.ln_ell, eps, rl.round_m, n);
            if facts.steps == 0 || facts.dice_sum <= cut * facts.steps as f64 {
                return fail(format!(
                    "dice-sum {} fails the window cutoff {cut} over {} steps",
                    facts.dice_sum, facts.steps
                ));
            }
            if facts.dice_sum <= beta_p * n as f64 * facts.ln_ell - 1e-9 {
                return fail(format!(
                    "dice-sum {} fails the global β'·n·ln ℓ bound",
                    facts.dice_sum
                ));
            }
        }
    }
    // Telescoping: each δ-clean step multiplies −ln Z by at least
    // d·exp(−ε), so the window gains at least the dice-sum minus εs.
    let lhs = (-facts.ln_z_end).ln();
    let rhs = (-facts.ln_z_start).ln() + facts.dice_sum - eps * facts.steps as f64;
    if lhs < rhs - 1e-9 {
        return fail(format!("telescoping failed: {lhs} < {rhs}"));
    }
    // The leaf must sit below the retained member.
    if rl.leaf != rl.member {
        let on_path = tree.path_from_root(rl.leaf).contains(&rl.member);
        if !on_path {
            return fail("leaf is not a descendant of the retained member".into());
        }
    }
    Ok(())
}

/// One estimator row: a channel, a depth, and the clamped gap estimate.
#[derive(Debug, Clone, Copy)]
pub struct MuStarRow {
    pub eps: f64,
    pub n: u32,
    /// Measure of the threshold selection at `exp(−n^{2/3})`.
    pub rate: f64,
    /// `ln N / (−ln max(I(W) − rate, N^{−1/2}))`, always ≥ 2.
    pub estimate: f64,
}

/// Scaling-exponent estimate table over a channel grid and depth range.
#[derive(Debug, Clone)]
pub struct MuStarEstimate {
    pub rows: Vec<MuStarRow>,
    /// Max over channels of the deepest-level estimate. This is a
    /// finite-depth stand-in for a limsup: advisory, not a certified value.
    pub summary: f64,
}

/// Empirical scaling-exponent estimator: threshold-select at
/// `exp(−n^{2/3})` on merged profiles and report the clamped gap exponent.
pub fn estimate_mu_star(
    kernel: &Kernel,
    eps_grid: &[f64],
    n_lo: u32,
    n_hi: u32,
) -> Result<MuStarEstimate> {
    if n_lo < 1 || n_lo > n_hi {
        return Err(CoreError::Precondition(format!(
            "bad depth range {n_lo}..{n_hi}"
        )));
    }
    for &eps in eps_grid {
        if !(0.0..=1.0).contains(&eps) {
            return Err(CoreError::EpsilonOutOfRange(eps));
        }
    }
    let ln_ell = (kernel.ell() as f64).ln();
    let mut rows = Vec::new();
    let mut summary = f64::NEG_INFINITY;
    for &eps in eps_grid {
        let capacity = 1.0 - eps;
        let mut profile = Profile::root(Prob::from_lin(eps));
        for n in 1..=n_hi {
            profile = profile.evolve(kernel)?;
            if n < n_lo {
                continue;
            }
            let sel = profile.threshold_stats(-(n as f64).powf(2.0 / 3.0));
            let ln_n = n as f64 * ln_ell;
            let clamp = (-0.5 * ln_n).exp();
            let gap = (capacity - sel.rate).max(clamp);
            let estimate = ln_n / -gap.ln();
            rows.push(MuStarRow {
                eps,
                n,
                rate: sel.rate,
                estimate,
            });
            if n == n_hi {
                summary = summary.max(estimate);
            }
        }
    }
    Ok(MuStarEstimate { rows, summary })
}

/// Per-point empirical exponents of a code series, with running minima as
/// finite-sample liminf proxies.
#[derive(Debug, Clone)]
pub struct ExponentSeries {
    /// `ln(−ln P)/ln N` per point.
    pub beta_hat: Vec<f64>,
    /// `(−ln(I−R))/ln N` per point; `None` where R ≥ I (skipped).
    pub inv_mu_hat: Vec<Option<f64>>,
    /// Running minima of `beta_hat`.
    pub beta_floor: Vec<f64>,
    /// Running minima of the present `inv_mu_hat` values.
    pub inv_mu_floor: Vec<f64>,
    /// Number of skipped gap points.
    pub skipped: usize,
}

/// Compute empirical exponents for `(N, R, ln P)` points against a known
/// capacity. P is taken in log domain so doubly-small bounds survive.
pub fn empirical_exponents(points: &[(f64, f64, f64)], capacity: f64) -> Result<ExponentSeries> {
    if points.len() < 2 {
        return Err(CoreError::Precondition(
            "need at least two (N, R, ln P) points".into(),
        ));
    }
    let mut out = ExponentSeries {
        beta_hat: Vec::new(),
        inv_mu_hat: Vec::new(),
        beta_floor: Vec::new(),
        inv_mu_floor: Vec::new(),
        skipped: 0,
    };
    let mut beta_min = f64::INFINITY;
    let mut inv_mu_min = f64::INFINITY;
    for &(n, r, ln_p) in points {
        if n <= 1.0 || ln_p >= 0.0 || ln_p.is_nan() {
            return Err(CoreError::Precondition(format!(
                "bad point (N = {n}, ln P = {ln_p}): need N > 1 and P in (0,1)"
            )));
        }
        let beta = (-ln_p).ln() / n.ln();
        beta_min = beta_min.min(beta);
        out.beta_hat.push(beta);
        out.beta_floor.push(beta_min);
        let gap = capacity - r;
        if gap <= 0.0 {
            out.inv_mu_hat.push(None);
            out.skipped += 1;
        } else {
            let inv_mu = -gap.ln() / n.ln();
            inv_mu_min = inv_mu_min.min(inv_mu);
            out.inv_mu_hat.push(Some(inv_mu));
        }
        out.inv_mu_floor.push(inv_mu_min);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{pick_constants_disposable, pick_constants_recyclable};
    use crate::field::Field;
    use crate::tree::{build_grafted_tree, DEFAULT_NODE_BUDGET};

    fn bec(eps: f64) -> ErasureChannel {
        let f2 = Arc::new(Field::prime(2).unwrap());
        ErasureChannel::new(f2, eps).unwrap()
    }

    #[test]
    fn threshold_selection_examples() {
        let arikan = Arc::new(Kernel::arikan());
        let tree = perfect_tree(&bec(0.5), &arikan, 2, DEFAULT_NODE_BUDGET).unwrap();
        let a = select_threshold(&tree, 0.3f64.ln());
        assert_eq!(a.len(), 1);
        assert!((tree.node(a[0]).channel.z() - 0.0625).abs() < 1e-15);
        assert_eq!(select_threshold(&tree, f64::INFINITY).len(), 4);
        assert!(select_threshold(&tree, f64::NEG_INFINITY).is_empty());
    }

    #[test]
    fn recyclable_partition_and_certificates() {
        let arikan = Arc::new(Kernel::arikan());
        let constants = pick_constants_recyclable(&arikan, 3.627).unwrap();
        let run =
            select_recyclable(&bec(0.5), &arikan, 16, &constants, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(
            run.diagnostics
                .rounds
                .iter()
                .map(|r| r.m)
                .collect::<Vec<_>>(),
            vec![4, 8, 12]
        );
        run.diagnostics.check_identities(0.5).unwrap();
        assert!(!run.a_n.is_empty(), "expected a nonempty retained set");
        assert_eq!(run.retained.len(), run.a_n.len());
        // Retained measure matches the diagnostics total exactly.
        assert_eq!(
            run.tree.code_rate(&run.a_n).unwrap(),
            run.diagnostics.retained_measure()
        );
        let verified = verify_certificates(
            &run.tree,
            &run.retained,
            CertificateRules::Recyclable {
                delta: constants.delta,
                eps: constants.eps,
            },
        )
        .unwrap();
        assert_eq!(verified, run.retained.len());
        // Retained members are ancestor-free of one another.
        let mut marked = vec![false; run.tree.len()];
        let mut members: Vec<NodeId> = run.retained.iter().map(|r| r.member).collect();
        members.sort_unstable();
        members.dedup();
        for &v in &members {
            assert!(
                !marked_on_root_path(&run.tree, run.tree.parent(v).unwrap(), &marked),
                "nested retained members"
            );
            marked[v as usize] = true;
        }
    }

    #[test]
    fn recyclable_degenerate_thresholds() {
        let arikan = Arc::new(Kernel::arikan());
        let constants = pick_constants_recyclable(&arikan, 3.627).unwrap();
        let run =
            select_recyclable(&bec(0.999), &arikan, 16, &constants, DEFAULT_NODE_BUDGET).unwrap();
        assert!(run.a_n.is_empty());
        run.diagnostics.check_identities(0.001).unwrap();
        for r in &run.diagnostics.rounds {
            assert!(r.a.is_zero(), "no vertex should reach the recruit rule");
        }
    }

    #[test]
    fn disposable_partition_and_certificates() {
        let arikan = Arc::new(Kernel::arikan());
        let constants = pick_constants_disposable(&arikan, 3.627, 0.05, 5.0).unwrap();
        let run = select_disposable(
            &bec(0.1),
            &arikan,
            12,
            &constants,
            0.05,
            5.0,
            3.627,
            DEFAULT_NODE_BUDGET,
        )
        .unwrap();
        // n_rat = round(12·3.627/5) = 9, s = 4, rounds {4, 8}.
        assert_eq!(
            run.diagnostics
                .rounds
                .iter()
                .map(|r| r.m)
                .collect::<Vec<_>>(),
            vec![4, 8]
        );
        run.diagnostics.check_identities(0.9).unwrap();
        assert!(!run.a_n.is_empty(), "expected retained leaves at eps = 0.1");
        assert_eq!(
            run.tree.code_rate(&run.a_n).unwrap(),
            run.diagnostics.retained_measure()
        );
        let verified = verify_certificates(
            &run.tree,
            &run.retained,
            CertificateRules::Disposable {
                delta: constants.delta,
                eps: constants.eps,
                beta_p: 0.05,
                n: 12,
            },
        )
        .unwrap();
        assert_eq!(verified, run.retained.len());
        // Recruits across rounds are ancestor-free by construction: check
        // via the recorded threshold vertices.
        let mut marked = vec![false; run.tree.len()];
        let mut recruits: Vec<NodeId> = run.retained.iter().map(|r| r.threshold_vertex).collect();
        recruits.sort_unstable();
        recruits.dedup();
        for &v in &recruits {
            assert!(!marked_on_root_path(
                &run.tree,
                run.tree.parent(v).unwrap(),
                &marked
            ));
            marked[v as usize] = true;
        }
    }

    #[test]
    fn disposable_rejects_infeasible_targets() {
        let arikan = Arc::new(Kernel::arikan());
        let constants = pick_constants_disposable(&arikan, 3.627, 0.05, 5.0).unwrap();
        let err = select_disposable(
            &bec(0.5),
            &arikan,
            12,
            &constants,
            0.6,
            5.0,
            3.627,
            DEFAULT_NODE_BUDGET,
        );
        assert!(matches!(err, Err(CoreError::Precondition(_))));
    }

    #[test]
    fn disposable_degenerate_depth() {
        let arikan = Arc::new(Kernel::arikan());
        let constants = pick_constants_disposable(&arikan, 3.627, 0.05, 5.0).unwrap();
        let run = select_disposable(
            &bec(0.5),
            &arikan,
            4,
            &constants,
            0.05,
            5.0,
            3.627,
            DEFAULT_NODE_BUDGET,
        )
        .unwrap();
        // n_rat = 3, s = 2, single round at m = 2 whose threshold
        // exp(−exp(2^{1/3})) is unreachable from eps = 0.5 at depth 2.
        assert!(run.a_n.is_empty());
        run.diagnostics.check_identities(0.5).unwrap();
    }

    #[test]
    fn grafted_selection_matches_disposable_at_k1() {
        let arikan = Arc::new(Kernel::arikan());
        let constants = pick_constants_disposable(&arikan, 3.627, 0.05, 5.0).unwrap();
        let w = bec(0.1);
        let n = 12;
        let g = build_grafted_tree(&w, &arikan, &arikan, 1, n, 3.627, 5.0, DEFAULT_NODE_BUDGET)
            .unwrap();
        let gsel = select_on_grafted(&g, &constants, 0.05, 5.0, 3.627).unwrap();
        gsel.diagnostics.check_identities(0.9).unwrap();
        let run = select_disposable(
            &w,
            &arikan,
            n,
            &constants,
            0.05,
            5.0,
            3.627,
            DEFAULT_NODE_BUDGET,
        )
        .unwrap();

        // Threshold-round retention agrees leaf-for-leaf (path indices are
        // insensitive to the pass-through packaging vertices).
        let key = |tree: &ChannelTree, rl: &RetainedLeaf| tree.path_index(rl.leaf);
        let mut from_graft: Vec<u128> = gsel
            .retained
            .iter()
            .filter(|rl| !rl.survivor)
            .map(|rl| key(&g.tree, rl))
            .collect();
        let mut from_perfect: Vec<u128> =
            run.retained.iter().map(|rl| key(&run.tree, rl)).collect();
        from_graft.sort_unstable();
        from_perfect.sort_unstable();
        assert_eq!(from_graft, from_perfect);
        assert!(!from_perfect.is_empty());

        // Certificates hold on the grafted side too.
        let verified = verify_certificates(
            &g.tree,
            &gsel.retained,
            CertificateRules::Disposable {
                delta: constants.delta,
                eps: constants.eps,
                beta_p: 0.05,
                n,
            },
        )
        .unwrap();
        assert_eq!(verified, gsel.retained.len());
    }

    #[test]
    fn grafted_selection_k2_smoke() {
        let f4 = Arc::new(Field::of_order(4).unwrap());
        let stock = Arc::new(Kernel::arikan().kronecker(&Kernel::arikan()).unwrap());
        let rs4 = Arc::new(Kernel::reed_solomon(Arc::clone(&f4)));
        let constants = pick_constants_disposable(&rs4, 2.1, 0.1, 4.2).unwrap();
        let w = bec(0.5);
        let g = build_grafted_tree(&w, &stock, &rs4, 2, 8, 2.1, 4.2, DEFAULT_NODE_BUDGET).unwrap();
        let sel = select_on_grafted(&g, &constants, 0.1, 4.2, 2.1).unwrap();
        sel.diagnostics.check_identities(w.capacity()).unwrap();
        assert!(!sel.a_n.is_empty(), "expected retained grafted leaves");
        let verified = verify_certificates(
            &g.tree,
            &sel.retained,
            CertificateRules::Disposable {
                delta: constants.delta,
                eps: constants.eps,
                beta_p: 0.1,
                n: 8,
            },
        )
        .unwrap();
        assert_eq!(verified, sel.retained.len());
        // Retained measure matches diagnostics.
        assert_eq!(
            g.tree.code_rate(&sel.a_n).unwrap(),
            sel.diagnostics.retained_measure()
        );
    }

    #[test]
    fn estimator_bands() {
        let arikan = Kernel::arikan();
        let est = estimate_mu_star(&arikan, &[0.3, 0.5, 0.7], 10, 16).unwrap();
        for row in &est.rows {
            assert!(
                row.estimate >= 2.0 - 1e-12 && row.estimate <= 6.0,
                "estimate {} out of band at eps {} n {}",
                row.estimate,
                row.eps,
                row.n
            );
        }
        assert!(est.summary >= 2.0 && est.summary <= 6.0);

        // No polarization: the gap stays at I(W), and with I(W) tiny the
        // clamp pins the estimate at 2.
        let f2 = Arc::new(Field::prime(2).unwrap());
        let identity = Kernel::new(Arc::clone(&f2), vec![vec![1, 0], vec![0, 1]], "id").unwrap();
        let est = estimate_mu_star(&identity, &[0.999], 4, 18).unwrap();
        for row in &est.rows {
            assert!((2.0..=2.1).contains(&row.estimate), "{}", row.estimate);
        }
        // Clamp arithmetic: gap below N^{−1/2} gives exactly 2.
        let est = estimate_mu_star(&arikan, &[1.0], 4, 8).unwrap();
        for row in &est.rows {
            assert!(row.rate == 0.0 && (row.estimate - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponent_series_algebra() {
        // P = exp(−N^{1/2}) exactly → beta_hat = 1/2 everywhere.
        let pts: Vec<(f64, f64, f64)> = (10..=20)
            .map(|n| {
                let big_n = (1u64 << n) as f64;
                (big_n, 0.2, -big_n.sqrt())
            })
            .collect();
        let s = empirical_exponents(&pts, 0.5).unwrap();
        for b in &s.beta_hat {
            assert!((b - 0.5).abs() < 1e-12);
        }
        // R = I − N^{−1/3} exactly → 1/mu_hat = 1/3 everywhere.
        let pts: Vec<(f64, f64, f64)> = (10..=20)
            .map(|n| {
                let big_n = (1u64 << n) as f64;
                (big_n, 0.5 - big_n.powf(-1.0 / 3.0), -1.0)
            })
            .collect();
        let s = empirical_exponents(&pts, 0.5).unwrap();
        for im in &s.inv_mu_hat {
            assert!((im.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((s.inv_mu_floor.last().unwrap() - 1.0 / 3.0).abs() < 1e-12);

        // R at capacity is skipped with a flag, not an error.
        let pts = vec![(1024.0, 0.5, -1.0), (2048.0, 0.4, -1.0)];
        let s = empirical_exponents(&pts, 0.5).unwrap();
        assert_eq!(s.skipped, 1);
        assert!(s.inv_mu_hat[0].is_none() && s.inv_mu_hat[1].is_some());

        assert!(empirical_exponents(&[(1024.0, 0.2, -1.0)], 0.5).is_err());
        assert!(empirical_exponents(&[(1024.0, 0.2, 0.0), (2.0, 0.2, -1.0)], 0.5).is_err());
    }
}
