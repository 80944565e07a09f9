//! Merged channel profiles: level-by-level evolution of equal-channel
//! classes for perfect trees too deep to materialize node-per-node.
//!
//! Every synthetic channel of a perfect tree is determined by its erasure
//! parameter alone, so channels at one depth with identical parameters can
//! be merged into a counted class. All aggregate quantities used here
//! (rates, union bounds, capacity gaps, threshold statistics) depend only
//! on `(depth, eps, multiplicity)`, hence survive merging exactly.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::Result;
use crate::kernel::Kernel;
use crate::prob::{LogSumAcc, Prob};

/// One equivalence class at a fixed depth.
#[derive(Debug, Clone, Copy)]
pub struct ProfileClass {
    pub eps: Prob,
    pub count: u128,
}

/// All synthetic channels of one level of a perfect tree, merged.
#[derive(Debug, Clone)]
pub struct Profile {
    pub depth: u32,
    /// Sorted by ascending `ln Z`.
    pub classes: Vec<ProfileClass>,
}

/// Aggregate statistics of a chosen leaf subset.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSelection {
    /// Number of leaves selected.
    pub count: u128,
    /// Exact measure of the selection as an f64 (count / leaf total).
    pub rate: f64,
    /// Union bound of the selection in log domain (`N P(w) = 1` per leaf
    /// of a perfect tree, so this is `ln sum Z`).
    pub p_bound_ln: f64,
}

impl Profile {
    /// The depth-0 profile: the base channel alone.
    pub fn root(eps: Prob) -> Profile {
        Profile {
            depth: 0,
            classes: vec![ProfileClass { eps, count: 1 }],
        }
    }

    /// Total leaf count at this depth.
    pub fn leaf_total(&self) -> u128 {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Apply one kernel level: every class spawns `ell` children which are
    /// then re-merged on exact bit-equality of the dual representation.
    pub fn evolve(&self, kernel: &Kernel) -> Result<Profile> {
        let ell = kernel.ell();
        let mut merged: HashMap<(u64, u64), (Prob, u128)> =
            HashMap::with_capacity(self.classes.len() * ell);
        for class in &self.classes {
            for i in 0..ell {
                let child = kernel.child_eps(i, class.eps)?;
                let key = (child.ln().to_bits(), child.lin().to_bits());
                merged
                    .entry(key)
                    .and_modify(|(_, c)| *c += class.count)
                    .or_insert((child, class.count));
            }
        }
        let mut classes: Vec<ProfileClass> = merged
            .into_values()
            .map(|(eps, count)| ProfileClass { eps, count })
            .collect();
        classes.sort_by(|a, b| a.eps.cmp_ln(b.eps));
        Ok(Profile {
            depth: self.depth + 1,
            classes,
        })
    }

    /// Evolve `steps` levels with one kernel.
    pub fn evolve_n(&self, kernel: &Kernel, steps: u32) -> Result<Profile> {
        let mut p = self.clone();
        for _ in 0..steps {
            p = p.evolve(kernel)?;
        }
        Ok(p)
    }

    /// Statistics of `{w : ln Z(w) < ln_threshold}`.
    pub fn threshold_stats(&self, ln_threshold: f64) -> ProfileSelection {
        let total = self.leaf_total();
        let mut count = 0u128;
        let mut acc = LogSumAcc::new();
        for class in &self.classes {
            if class.eps.ln() < ln_threshold {
                count += class.count;
                acc.add_scaled(class.eps.ln(), class.count as f64);
            }
        }
        ProfileSelection {
            count,
            rate: ratio_f64(count, total),
            p_bound_ln: acc.value(),
        }
    }

    /// Largest whole-class prefix (ascending `ln Z`) whose union bound stays
    /// within `ln_p_budget`; equivalently the best threshold selection
    /// meeting the error budget.
    pub fn budget_stats(&self, ln_p_budget: f64) -> ProfileSelection {
        let total = self.leaf_total();
        let mut count = 0u128;
        let mut acc = LogSumAcc::new();
        for class in &self.classes {
            let mut candidate = acc;
            candidate.add_scaled(class.eps.ln(), class.count as f64);
            if candidate.value() > ln_p_budget {
                break;
            }
            acc = candidate;
            count += class.count;
        }
        ProfileSelection {
            count,
            rate: ratio_f64(count, total),
            p_bound_ln: acc.value(),
        }
    }

    /// The `k` smallest-Z leaves, splitting the boundary class if needed
    /// (class members are identical channels, so any members serve).
    pub fn rate_stats(&self, k: u128) -> ProfileSelection {
        let total = self.leaf_total();
        let k = k.min(total);
        let mut remaining = k;
        let mut acc = LogSumAcc::new();
        for class in &self.classes {
            if remaining == 0 {
                break;
            }
            let take = class.count.min(remaining);
            acc.add_scaled(class.eps.ln(), take as f64);
            remaining -= take;
        }
        ProfileSelection {
            count: k,
            rate: ratio_f64(k, total),
            p_bound_ln: acc.value(),
        }
    }

    /// Exact selection measure as a rational.
    pub fn rate_rational(&self, count: u128) -> BigRational {
        BigRational::new(
            BigUint::from(count).into(),
            BigUint::from(self.leaf_total()).into(),
        )
    }

    /// Probability-weighted mean of `(Z ∧ delta)^eps` at this level,
    /// computed in log domain.
    pub fn clipped_moment(&self, delta_ln: f64, eps: f64) -> f64 {
        let total_ln = (self.leaf_total() as f64).ln();
        let mut acc = LogSumAcc::new();
        for class in &self.classes {
            let z_ln = class.eps.ln().min(delta_ln);
            acc.add_scaled(eps * z_ln, class.count as f64);
        }
        (acc.value() - total_ln).exp()
    }
}

fn ratio_f64(num: u128, den: u128) -> f64 {
    BigRational::new(BigUint::from(num).into(), BigUint::from(den).into())
        .to_f64()
        .expect("profile ratios are finite")
}
