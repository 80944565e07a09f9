//! Recipe loading: resolve kernel references (files or presets) and build
//! the described channel tree.

use std::path::Path;
use std::sync::Arc;

use polarforge_core::{
    build_grafted_tree, multi_tree, ChannelTree, ErasureChannel, Field, GraftRecipe, GraftedTree,
    Kernel, TreeRecipe,
};

use crate::error::{CliError, Result};
use crate::presets::resolve_kernel;

/// A recipe realized into a tree.
#[derive(Debug)]
pub struct BuiltRecipe {
    pub channel: ErasureChannel,
    /// One kernel per schedule depth.
    pub schedule: Vec<Arc<Kernel>>,
    pub graft: Option<GraftRecipe>,
    pub tree: TreeKind,
}

#[derive(Debug)]
pub enum TreeKind {
    Plain(ChannelTree),
    Grafted(GraftedTree),
}

impl BuiltRecipe {
    pub fn tree(&self) -> &ChannelTree {
        match &self.tree {
            TreeKind::Plain(t) => t,
            TreeKind::Grafted(g) => &g.tree,
        }
    }

    /// Kernel-depth of the leaves (uniform by construction).
    pub fn depth(&self) -> u32 {
        let t = self.tree();
        t.leaves().first().map(|&w| t.node(w).depth).unwrap_or(0)
    }

    /// The single schedule kernel, required by the selection templates.
    pub fn uniform_kernel(&self) -> Result<&Arc<Kernel>> {
        let first = &self.schedule[0];
        if self.schedule.iter().all(|k| Arc::ptr_eq(k, first)) {
            Ok(first)
        } else {
            Err(CliError::Invalid(
                "this mode needs a uniform schedule (every depth the same kernel file)".into(),
            ))
        }
    }
}

/// Read, parse, and build a recipe file. Kernel references resolve
/// relative to the recipe's directory, falling back to preset names.
pub fn load_recipe(path: &Path, budget: usize) -> Result<BuiltRecipe> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let recipe = TreeRecipe::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));

    let field = Arc::new(Field::of_order(recipe.q)?);
    let channel = ErasureChannel::new(field, recipe.epsilon)?;

    // Share one kernel instance per distinct reference string so equal
    // entries compare by pointer downstream.
    let mut cache: Vec<(String, Arc<Kernel>)> = Vec::new();
    let mut resolve = |spec: &str, base: &Path| -> Result<Arc<Kernel>> {
        if let Some((_, k)) = cache.iter().find(|(s, _)| s == spec) {
            return Ok(Arc::clone(k));
        }
        let k = resolve_kernel(spec, base)?;
        cache.push((spec.to_string(), Arc::clone(&k)));
        Ok(k)
    };
    let schedule = recipe
        .schedule
        .iter()
        .map(|(_, spec)| resolve(spec, base))
        .collect::<Result<Vec<_>>>()?;

    let tree = match &recipe.graft {
        None => TreeKind::Plain(multi_tree(&channel, &schedule, budget)?),
        Some(g) => {
            let first = &schedule[0];
            if !schedule.iter().all(|k| Arc::ptr_eq(k, first)) {
                return Err(CliError::Invalid(
                    "a grafted recipe needs a uniform stock schedule".into(),
                ));
            }
            let err_kernel = resolve(&g.err_kernel, base)?;
            TreeKind::Grafted(build_grafted_tree(
                &channel,
                first,
                &err_kernel,
                g.k,
                g.n,
                g.mu_star_rat,
                g.mu_prime,
                budget,
            )?)
        }
    };
    Ok(BuiltRecipe {
        channel,
        schedule,
        graft: recipe.graft,
        tree,
    })
}
