//! Log-distance dice.
//!
//! A kernel's polarization behavior is summarized by a random variable `Y`:
//! pick a synthetic index uniformly and read off the log of its partial
//! distance. Everything downstream (rate functions, feasibility predicates,
//! retention thresholds) consumes `Y` through its moments, so the interface
//! here is the mean, the point masses near zero, and a numerically stable
//! `ln E[exp(lambda Y)]`.

/// Finitely supported dice with merged atoms, sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiceDistribution {
    /// `(y, p)` pairs, strictly increasing in `y`, probabilities summing to 1.
    support: Vec<(f64, f64)>,
    mean: f64,
}

impl DiceDistribution {
    /// Build from raw `(y, p)` atoms; equal values are merged.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> DiceDistribution {
        assert!(!atoms.is_empty(), "dice need at least one atom");
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<(f64, f64)> = vec![];
        for (y, p) in atoms {
            assert!(p >= 0.0 && y.is_finite());
            match support.last_mut() {
                Some(last) if last.0 == y => last.1 += p,
                _ => support.push((y, p)),
            }
        }
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9, "dice masses sum to {total}");
        let mean = support.iter().map(|&(y, p)| y * p).sum();
        DiceDistribution { support, mean }
    }

    /// The dice of a kernel: `Y = ln d_X` with `X` uniform over indices.
    pub fn from_log_distances(distances: &[usize]) -> DiceDistribution {
        let n = distances.len() as f64;
        DiceDistribution::from_atoms(
            distances
                .iter()
                .map(|&d| ((d as f64).ln(), 1.0 / n))
                .collect(),
        )
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// `P{Y < t}`.
    pub fn prob_below(&self, t: f64) -> f64 {
        self.support
            .iter()
            .take_while(|&&(y, _)| y < t)
            .map(|&(_, p)| p)
            .sum()
    }
}

/// The moment interface consumed by rate functions and feasibility scans.
pub trait LogMgf {
    /// `ln E[exp(lambda Y)]`, stable for arbitrarily negative `lambda`.
    fn ln_mgf(&self, lambda: f64) -> f64;
    fn mean(&self) -> f64;
    /// `P{Y = 0}` (every kernel dice has an atom at zero).
    fn p_zero(&self) -> f64;
    /// Smallest support point.
    fn y_min(&self) -> f64;
    /// `ln E[exp(lambda (Y - y_min))]`. Rate-function searches drive lambda
    /// to -1e10 and beyond, where forming `ln_mgf - lambda*y_min` would
    /// cancel catastrophically; implementors should compute the shifted sum
    /// directly.
    fn ln_mgf_shifted(&self, lambda: f64) -> f64 {
        self.ln_mgf(lambda) - lambda * self.y_min()
    }
    /// `E[exp(-t Y)]` in linear scale, for threshold checks.
    fn moment_neg(&self, t: f64) -> f64 {
        self.ln_mgf(-t).exp()
    }
}

impl LogMgf for DiceDistribution {
    fn ln_mgf(&self, lambda: f64) -> f64 {
        lambda * self.support[0].0 + self.ln_mgf_shifted(lambda)
    }

    fn ln_mgf_shifted(&self, lambda: f64) -> f64 {
        // The y_min term is 1 exactly, so the sum stays O(1) no matter how
        // negative lambda gets.
        let y0 = self.support[0].0;
        let sum: f64 = self
            .support
            .iter()
            .map(|&(y, p)| p * (lambda * (y - y0)).exp())
            .sum();
        sum.ln()
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn p_zero(&self) -> f64 {
        self.support
            .iter()
            .find(|&&(y, _)| y == 0.0)
            .map_or(0.0, |&(_, p)| p)
    }

    fn y_min(&self) -> f64 {
        self.support[0].0
    }
}
