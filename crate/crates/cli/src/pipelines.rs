//! One function per subcommand: resolve inputs, run the core pipeline,
//! write artifacts, and report whether any checked invariant was violated.

use std::path::{Path, PathBuf};

use polarforge_core::{
    estimate_mu_star, feasible_thm5, pick_constants_disposable, pick_constants_recyclable,
    region_boundary, region_hull, select_disposable, select_on_grafted, select_recyclable,
    select_threshold, verify_certificates, verify_union_bound, CertificateRules, ChannelTree,
    Kernel, LogMgf, NodeId, RetainedLeaf, RsDice, SelectionDiagnostics, SimConfig,
};

use crate::emit::{render_region_svg, write_csv, write_file, Meta, Series};
use crate::error::{CliError, Result};
use crate::presets::{mu_preset, resolve_kernel, resolve_mu_star};
use crate::recipes::{load_recipe, TreeKind};

/// Exit disposition of a pipeline: `Flagged` means every artifact was
/// written but a checked invariant did not hold (exit status 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Flagged(String),
}

/// Settings shared by every subcommand.
pub struct Globals {
    pub seed: u64,
    pub budget_nodes: usize,
    pub budget_trials: u64,
    pub out_dir: PathBuf,
}

impl Globals {
    /// Artifacts with relative paths land in the output directory.
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }
}

fn fmt_csv_f64(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------- kernel

/// `kernel analyze`: print the kernel's figures of merit as one CSV row.
pub fn kernel_analyze(spec: &str, out: Option<&Path>, g: &Globals) -> Result<Outcome> {
    let kernel = resolve_kernel(spec, Path::new("."))?;
    let header = "name,q,ell,partial_distances,beta_star,op_norm,dice_support,powerful,bounded";
    let row = kernel_row(&kernel)?;
    println!("{header}");
    println!("{row}");
    if let Some(out) = out {
        let meta = Meta::new("kernel analyze", g.seed);
        write_csv(&g.resolve(out), &meta, &[], header, &[row])?;
    }
    Ok(Outcome::Clean)
}

fn kernel_row(kernel: &Kernel) -> Result<String> {
    let distances = kernel
        .partial_distances()?
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let dice = kernel.dice()?;
    let support = dice
        .support()
        .iter()
        .map(|(y, p)| format!("{y}:{p}"))
        .collect::<Vec<_>>()
        .join(";");
    let op_norm = kernel.op_norm()?;
    Ok(format!(
        "{},{},{},{},{},{},{},{},{}",
        kernel.name(),
        kernel.q(),
        kernel.ell(),
        distances,
        fmt_csv_f64(kernel.beta_star()?),
        fmt_csv_f64(op_norm),
        support,
        kernel.is_powerful()?,
        op_norm.is_finite()
    ))
}

// -------------------------------------------------------------- construct

/// `construct`: build the recipe's tree and emit one row per leaf.
pub fn construct(recipe: &Path, out: &Path, g: &Globals) -> Result<Outcome> {
    let built = load_recipe(recipe, g.budget_nodes)?;
    let tree = built.tree();
    let meta = Meta::new("construct", g.seed);
    let mut rows = Vec::with_capacity(tree.leaves().len());
    for &w in tree.leaves() {
        rows.push(format!(
            "{},{},{},{}",
            tree.path_index(w),
            tree.node(w).depth,
            fmt_csv_f64(tree.node(w).channel.eps().ln()),
            tree.vertex_prob(w)?
        ));
    }
    write_csv(
        &g.resolve(out),
        &meta,
        &[],
        "path_index,depth,ln_z,prob",
        &rows,
    )?;
    Ok(Outcome::Clean)
}

// ----------------------------------------------------------------- select

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SelectMode {
    Threshold,
    Recyclable,
    Disposable,
    Graft,
}

pub struct SelectArgs {
    pub recipe: PathBuf,
    pub mode: SelectMode,
    pub ln_z_cutoff: Option<f64>,
    pub beta_p: Option<f64>,
    pub inv_mu_p: Option<f64>,
    pub mu_star: Option<String>,
    pub out_a: PathBuf,
    pub out_diag: PathBuf,
}

fn require<T: Copy>(v: Option<T>, flag: &str, mode: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Invalid(format!("--{flag} is required in {mode} mode")))
}

/// `select`: pick an information set by the requested rule and emit it
/// with the per-round bookkeeping.
pub fn select(args: &SelectArgs, g: &Globals) -> Result<Outcome> {
    let built = load_recipe(&args.recipe, g.budget_nodes)?;
    let mut meta = Meta::new("select", g.seed);
    let capacity = built.channel.capacity();

    match args.mode {
        SelectMode::Threshold => {
            let cutoff = args
                .ln_z_cutoff
                .unwrap_or_else(|| -(built.depth() as f64).powf(2.0 / 3.0));
            let a = select_threshold(built.tree(), cutoff);
            let mut diag = SelectionDiagnostics::default();
            diag.notes
                .push(format!("threshold rule: ln Z < {cutoff}; no rounds"));
            write_selection(args, g, &meta, built.tree(), &a, &diag)?;
            Ok(Outcome::Clean)
        }
        SelectMode::Recyclable => {
            let kernel = built.uniform_kernel()?;
            let (mu_star, preset) = resolve_mu_star(
                args.mu_star
                    .as_deref()
                    .ok_or_else(|| CliError::Invalid("--mu-star is required".into()))?,
            )?;
            if let Some(p) = preset {
                meta.cite(p.citation);
            }
            let constants = pick_constants_recyclable(kernel, mu_star)?;
            let run = select_recyclable(
                &built.channel,
                kernel,
                built.depth(),
                &constants,
                g.budget_nodes,
            )?;
            let flag = check_run(
                &run.tree,
                &run.retained,
                &run.diagnostics,
                capacity,
                CertificateRules::Recyclable {
                    delta: constants.delta,
                    eps: constants.eps,
                },
            );
            write_selection(args, g, &meta, &run.tree, &run.a_n, &run.diagnostics)?;
            Ok(flag_outcome(flag))
        }
        SelectMode::Disposable => {
            let kernel = built.uniform_kernel()?;
            let (mu_star, preset) = resolve_mu_star(
                args.mu_star
                    .as_deref()
                    .ok_or_else(|| CliError::Invalid("--mu-star is required".into()))?,
            )?;
            if let Some(p) = preset {
                meta.cite(p.citation);
            }
            let beta_p = require(args.beta_p, "beta-p", "disposable")?;
            let inv = require(args.inv_mu_p, "inv-mu-p", "disposable")?;
            if inv <= 0.0 || inv.is_nan() {
                return Err(CliError::Invalid("--inv-mu-p must be positive".into()));
            }
            let mu_p = 1.0 / inv;
            let constants = pick_constants_disposable(kernel, mu_star, beta_p, mu_p)?;
            let n = built.depth();
            let run = select_disposable(
                &built.channel,
                kernel,
                n,
                &constants,
                beta_p,
                mu_p,
                mu_star,
                g.budget_nodes,
            )?;
            let flag = check_run(
                &run.tree,
                &run.retained,
                &run.diagnostics,
                capacity,
                CertificateRules::Disposable {
                    delta: constants.delta,
                    eps: constants.eps,
                    beta_p,
                    n,
                },
            );
            write_selection(args, g, &meta, &run.tree, &run.a_n, &run.diagnostics)?;
            Ok(flag_outcome(flag))
        }
        SelectMode::Graft => {
            let (grafted, recipe_graft) = match (&built.tree, &built.graft) {
                (TreeKind::Grafted(t), Some(r)) => (t, r),
                _ => {
                    return Err(CliError::Invalid(
                        "graft mode needs a recipe with a graft line".into(),
                    ))
                }
            };
            let beta_p = require(args.beta_p, "beta-p", "graft")?;
            let mu_p = recipe_graft.mu_prime;
            if let Some(inv) = args.inv_mu_p {
                if (inv - 1.0 / mu_p).abs() > 1e-9 {
                    return Err(CliError::Invalid(format!(
                        "--inv-mu-p {} conflicts with the recipe's mu_prime {}",
                        inv, mu_p
                    )));
                }
            }
            let mu_star_rat = recipe_graft.mu_star_rat;
            let constants =
                pick_constants_disposable(&grafted.err_kernel, mu_star_rat, beta_p, mu_p)?;
            let sel = select_on_grafted(grafted, &constants, beta_p, mu_p, mu_star_rat)?;
            let flag = check_run(
                &grafted.tree,
                &sel.retained,
                &sel.diagnostics,
                capacity,
                CertificateRules::Disposable {
                    delta: constants.delta,
                    eps: constants.eps,
                    beta_p,
                    n: grafted.n,
                },
            );
            write_selection(args, g, &meta, &grafted.tree, &sel.a_n, &sel.diagnostics)?;
            Ok(flag_outcome(flag))
        }
    }
}

fn flag_outcome(flag: Option<String>) -> Outcome {
    match flag {
        None => Outcome::Clean,
        Some(msg) => Outcome::Flagged(msg),
    }
}

/// Re-verify the bookkeeping identities and every retained leaf's
/// certificate; a failure is reported, not raised.
fn check_run(
    tree: &ChannelTree,
    retained: &[RetainedLeaf],
    diag: &SelectionDiagnostics,
    capacity: f64,
    rules: CertificateRules,
) -> Option<String> {
    if let Err(e) = diag.check_identities(capacity) {
        return Some(e.to_string());
    }
    if let Err(e) = verify_certificates(tree, retained, rules) {
        return Some(e.to_string());
    }
    None
}

fn write_selection(
    args: &SelectArgs,
    g: &Globals,
    meta: &Meta,
    tree: &ChannelTree,
    a: &[NodeId],
    diag: &SelectionDiagnostics,
) -> Result<()> {
    let a_rows: Vec<String> = a
        .iter()
        .map(|&w| format!("{},{}", w, fmt_csv_f64(tree.node(w).channel.eps().ln())))
        .collect();
    write_csv(&g.resolve(&args.out_a), meta, &[], "leaf,ln_z", &a_rows)?;

    let notes: Vec<String> = diag.notes.iter().map(|n| format!("note: {n}")).collect();
    let diag_rows: Vec<String> = diag
        .rounds
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.m,
                r.a,
                r.a0,
                r.b,
                r.c,
                r.d,
                r.e,
                r.e0,
                fmt_csv_f64(r.f),
                fmt_csv_f64(r.g),
                r.survivors
            )
        })
        .collect();
    write_csv(
        &g.resolve(&args.out_diag),
        meta,
        &notes,
        "m,a,a0,b,c,d,e,e0,f,g,survivors",
        &diag_rows,
    )
}

// --------------------------------------------------------------- simulate

pub struct SimulateArgs {
    pub recipe: PathBuf,
    pub a: PathBuf,
    pub trials: u64,
    pub eps: Option<f64>,
    pub shards: usize,
    pub out: PathBuf,
}

/// Parse an information set written by `select` (or by hand): the first
/// comma-separated field of each non-comment row is a leaf id.
fn read_a_csv(path: &Path) -> Result<Vec<NodeId>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut ids = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let first = line.split(',').next().unwrap_or("").trim();
        if first == "leaf" {
            continue; // header row
        }
        let id: u32 = first.parse().map_err(|_| {
            CliError::Invalid(format!(
                "{}:{}: expected a leaf id, found '{first}'",
                path.display(),
                idx + 1
            ))
        })?;
        ids.push(id);
    }
    Ok(ids)
}

/// `simulate`: Monte Carlo the code the recipe and the information set
/// describe, then check the union bound. A violated bound flags the run.
pub fn simulate(args: &SimulateArgs, g: &Globals) -> Result<Outcome> {
    let built = load_recipe(&args.recipe, g.budget_nodes)?;
    let a = read_a_csv(&args.a)?;
    let cfg = SimConfig {
        trials: args.trials,
        seed: g.seed,
        eps_override: args.eps,
        shards: args.shards,
    };
    let check = verify_union_bound(built.tree(), &a, &cfg, g.budget_trials)?;
    let report = &check.report;
    let meta = Meta::new("simulate", g.seed);
    let mut rows: Vec<String> = report
        .leaves
        .iter()
        .map(|l| {
            format!(
                "{},{},{},{},{}",
                l.leaf,
                fmt_csv_f64(l.analytic_ln_z),
                fmt_csv_f64(l.empirical_rate),
                fmt_csv_f64(l.ci_low),
                fmt_csv_f64(l.ci_high)
            )
        })
        .collect();
    rows.push(format!("bler,{},,,", fmt_csv_f64(report.bler)));
    rows.push(format!(
        "bler_ci,{},{},,",
        fmt_csv_f64(report.bler_ci.0),
        fmt_csv_f64(report.bler_ci.1)
    ));
    rows.push(format!("union_bound,{},,,", fmt_csv_f64(check.bound)));
    write_csv(
        &g.resolve(&args.out),
        &meta,
        &[],
        "leaf,analytic_lnZ,empirical_rate,ci_low,ci_high",
        &rows,
    )?;
    if check.ok {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Flagged(format!(
            "simulated block error rate {} exceeds the union bound {} plus slack {}",
            check.bler, check.bound, check.slack
        )))
    }
}

// --------------------------------------------------------------- tradeoff

pub struct TradeoffArgs {
    pub kernel: Option<String>,
    pub mu_star: Option<String>,
    pub preset: Option<String>,
    pub grid: usize,
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
    pub hull_check: bool,
}

/// Feasibility margin at one boundary point, with `1/mu' = 0` handled by
/// a large finite surrogate.
fn point_margin(dice: &(impl LogMgf + Sync), ell: u64, mu_star: f64, beta: f64, y: f64) -> f64 {
    let mu_p = if y > 1e-12 { 1.0 / y } else { 1e12 };
    feasible_thm5(dice, ell, mu_star, beta, mu_p, 256).margin
}

/// `tradeoff`: map the achievable (β′, 1/μ′) region for one kernel.
pub fn tradeoff(args: &TradeoffArgs, g: &Globals) -> Result<Outcome> {
    let mut meta = Meta::new("tradeoff", g.seed);
    let (kernel, mu_star, label) = match (&args.preset, &args.kernel, &args.mu_star) {
        (Some(name), None, None) => {
            let p = mu_preset(name).ok_or_else(|| {
                CliError::Invalid(format!(
                    "unknown preset '{name}' (presets: arikan-bec, arikan-bdmc)"
                ))
            })?;
            meta.cite(p.citation);
            (
                resolve_kernel(p.kernel, Path::new("."))?,
                p.mu_star,
                name.clone(),
            )
        }
        (None, Some(kspec), Some(mspec)) => {
            let kernel = resolve_kernel(kspec, Path::new("."))?;
            let (mu_star, preset) = resolve_mu_star(mspec)?;
            if let Some(p) = preset {
                meta.cite(p.citation);
            }
            let label = format!("{} mu*={mu_star}", kernel.name());
            (kernel, mu_star, label)
        }
        _ => {
            return Err(CliError::Invalid(
                "pass either --preset, or both --kernel and --mu-star".into(),
            ))
        }
    };
    if args.grid < 2 {
        return Err(CliError::Invalid("--grid needs at least 2 points".into()));
    }
    let dice = kernel.dice()?;
    let ell = kernel.ell() as u64;
    let beta_star = kernel.beta_star()?;
    let grid: Vec<f64> = (0..=args.grid)
        .map(|j| j as f64 / args.grid as f64 * beta_star)
        .collect();
    let region = region_boundary(&dice, ell, mu_star, &grid)?;

    let mut rows = Vec::new();
    for &(beta, y) in &region.points {
        rows.push(format!(
            "{label},{},{},{}",
            fmt_csv_f64(beta),
            fmt_csv_f64(y),
            fmt_csv_f64(point_margin(&dice, ell, mu_star, beta, y))
        ));
    }

    let mut outcome = Outcome::Clean;
    let mut series = vec![Series {
        label: label.clone(),
        points: region.points.clone(),
        dashed: false,
    }];
    if args.hull_check {
        let hull = region_hull(&dice, ell, mu_star, &grid)?;
        let sup = region
            .points
            .iter()
            .map(|&(beta, y)| (y - hull.eval(beta)).abs())
            .fold(0.0f64, f64::max);
        meta.cite(&format!("hull cross-check sup distance: {sup}"));
        for &(beta, y) in &hull.points {
            rows.push(format!(
                "{label}-hull,{},{},",
                fmt_csv_f64(beta),
                fmt_csv_f64(y)
            ));
        }
        series.push(Series {
            label: format!("{label}-hull"),
            points: hull.points.clone(),
            dashed: true,
        });
        if sup > 1e-3 {
            outcome = Outcome::Flagged(format!(
                "scan and hull boundaries disagree: sup distance {sup} > 1e-3"
            ));
        }
    }
    write_csv(
        &g.resolve(&args.out),
        &meta,
        &[],
        "label,beta_p,inv_mu_p,margin",
        &rows,
    )?;
    if let Some(svg) = &args.svg {
        let title = format!("achievable (beta', 1/mu') region: {label}");
        write_file(&g.resolve(svg), &render_region_svg(&title, &series, &meta))?;
    }
    Ok(outcome)
}

// ------------------------------------------------------------ estimate-mu

pub struct EstimateMuArgs {
    pub kernel: String,
    pub eps_grid: String,
    pub n_lo: u32,
    pub n_hi: u32,
    pub out: PathBuf,
}

/// `estimate-mu`: finite-depth scaling-exponent estimates from merged
/// erasure profiles.
pub fn estimate_mu(args: &EstimateMuArgs, g: &Globals) -> Result<Outcome> {
    let kernel = resolve_kernel(&args.kernel, Path::new("."))?;
    let eps: Vec<f64> = args
        .eps_grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("bad erasure rate '{s}' in --eps-grid")))
        })
        .collect::<Result<_>>()?;
    let est = estimate_mu_star(&kernel, &eps, args.n_lo, args.n_hi)?;
    let meta = Meta::new("estimate-mu", g.seed);
    let mut rows: Vec<String> = est
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{}",
                fmt_csv_f64(r.eps),
                r.n,
                fmt_csv_f64(r.rate),
                fmt_csv_f64(r.estimate)
            )
        })
        .collect();
    rows.push(format!("summary,,,{}", fmt_csv_f64(est.summary)));
    write_csv(
        &g.resolve(&args.out),
        &meta,
        &[],
        "eps,n,rate,estimate",
        &rows,
    )?;
    Ok(Outcome::Clean)
}

// ---------------------------------------------------------------- figures

/// `figures`: reproduce the standard region-figure set into the output
/// directory.
pub fn figures(g: &Globals) -> Result<Outcome> {
    // 41 boundary points per curve: enough for a smooth 640-px polyline
    // while each point still costs a full bisection on the feasibility
    // predicate.
    let grid_of =
        |beta_star: f64| -> Vec<f64> { (0..=40).map(|j| j as f64 / 40.0 * beta_star).collect() };

    // Arıkan kernel over the BEC, against the published comparison curve.
    for name in ["arikan-bec", "arikan-bdmc"] {
        let p = mu_preset(name).expect("built-in preset");
        let kernel = resolve_kernel(p.kernel, Path::new("."))?;
        let dice = kernel.dice()?;
        let ell = kernel.ell() as u64;
        let mut meta = Meta::new("figures", g.seed);
        meta.cite(p.citation);
        meta.cite(p.reference_citation);
        let region = region_boundary(&dice, ell, p.mu_star, &grid_of(kernel.beta_star()?))?;
        let reference = vec![(0.0, 1.0 / p.reference_mu), (0.5, 0.0)];
        let mut rows = Vec::new();
        for &(beta, y) in &region.points {
            rows.push(format!(
                "{name},{},{},{}",
                fmt_csv_f64(beta),
                fmt_csv_f64(y),
                fmt_csv_f64(point_margin(&dice, ell, p.mu_star, beta, y))
            ));
        }
        for &(beta, y) in &reference {
            rows.push(format!(
                "reference-{},{},{},",
                p.reference_mu,
                fmt_csv_f64(beta),
                fmt_csv_f64(y)
            ));
        }
        let series = vec![
            Series {
                label: format!("{name} (mu*={})", p.mu_star),
                points: region.points.clone(),
                dashed: false,
            },
            Series {
                label: format!("reference (mu={})", p.reference_mu),
                points: reference,
                dashed: true,
            },
        ];
        let stem = format!("figure-{name}");
        write_csv(
            &g.out_dir.join(format!("{stem}.csv")),
            &meta,
            &[],
            "label,beta_p,inv_mu_p,margin",
            &rows,
        )?;
        write_file(
            &g.out_dir.join(format!("{stem}.svg")),
            &render_region_svg(&format!("achievable region: {name}"), &series, &meta),
        )?;
    }

    // Reed-Solomon dice family over GF(2^k), k = 1..4, sharing the stock
    // kernel's scaling exponent.
    let p = mu_preset("arikan-bec").expect("built-in preset");
    let mut meta = Meta::new("figures", g.seed);
    meta.cite(p.citation);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for k in 1u32..=4 {
        let ell = 1u64 << k;
        let dice = RsDice::new(ell);
        let beta_star = dice.mean() / (ell as f64).ln();
        let region = region_boundary(&dice, ell, p.mu_star, &grid_of(beta_star))?;
        let label = format!("rs{ell}");
        for &(beta, y) in &region.points {
            rows.push(format!(
                "{label},{},{},{}",
                fmt_csv_f64(beta),
                fmt_csv_f64(y),
                fmt_csv_f64(point_margin(&dice, ell, p.mu_star, beta, y))
            ));
        }
        series.push(Series {
            label,
            points: region.points,
            dashed: false,
        });
    }
    write_csv(
        &g.out_dir.join("figure-rs-family.csv"),
        &meta,
        &[],
        "label,beta_p,inv_mu_p,margin",
        &rows,
    )?;
    write_file(
        &g.out_dir.join("figure-rs-family.svg"),
        &render_region_svg(
            "achievable regions: Reed-Solomon dice over GF(2^k)",
            &series,
            &meta,
        ),
    )?;
    Ok(Outcome::Clean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_surrogate_handles_zero_ordinate() {
        let kernel = resolve_kernel("arikan", Path::new(".")).unwrap();
        let dice = kernel.dice().unwrap();
        let m = point_margin(&dice, 2, 3.627, 0.25, 0.0);
        assert!(m.is_finite());
    }
}
