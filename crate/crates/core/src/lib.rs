//! Construction and analysis of polar-like codes over erasure channels.
//!
//! The library builds channel trees from arbitrary invertible kernels over
//! finite fields, tracks the exact erasure parameter of every synthetic
//! channel, selects information sets by recruit-train-retain schedules, and
//! maps out the achievable tradeoff between error exponent and capacity-gap
//! exponent with large-deviations tools. Everything is deterministic: the
//! same inputs produce bit-identical outputs regardless of thread count.

pub mod channel;
pub mod constants;
pub mod dice;
pub mod error;
pub mod field;
pub mod kernel;
pub mod prob;
pub mod profile;
pub mod select;
pub mod simulate;
pub mod tradeoff;
pub mod tree;

pub use channel::ErasureChannel;
pub use constants::{
    pick_constants_disposable, pick_constants_recyclable, DisposableConstants, RecyclableConstants,
};
pub use dice::{DiceDistribution, LogMgf};
pub use error::{CoreError, Result};
pub use field::Field;
pub use kernel::{ErasureCountTable, Kernel};
pub use prob::{log_sum_exp, LogSumAcc, Prob};
pub use profile::{Profile, ProfileClass, ProfileSelection};
pub use select::{
    empirical_exponents, estimate_mu_star, select_disposable, select_on_grafted, select_recyclable,
    select_threshold, verify_certificates, CertificateRules, ExponentSeries, GraftSelection,
    MuStarEstimate, MuStarRow, RetainedLeaf, RoundStats, SelectionDiagnostics, TemplateRun,
};
pub use simulate::{
    simulate, simulate_grouped, verify_union_bound, Grouping, LeafStat, SimConfig, SimReport,
    UnionCheck, DEFAULT_TRIAL_BUDGET,
};
pub use tradeoff::{
    chernoff_tail, choose_rs_parameters, cramer_closed_arikan, cramer_eval, feasible_thm5,
    feasible_thm6, q_point, region_boundary, region_hull, rs_bound, rs_ystar, Feasibility,
    RegionMethod, RsDice, TradeoffRegion, PI_GRID_DEFAULT,
};
pub use tree::{
    build_grafted_tree, multi_tree, perfect_tree, z_process_sample, ChannelTree, CodeSpec,
    GraftRecipe, GraftRound, GraftedTree, Node, NodeId, PathRecord, PathStep, Transform,
    TreeRecipe, DEFAULT_NODE_BUDGET,
};
