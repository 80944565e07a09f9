//! Probabilities carried in both linear and log scale.
//!
//! Erasure rates of synthesized channels collapse doubly exponentially with
//! depth, far below `f64::MIN_POSITIVE`. Every probability in this crate is
//! therefore a [`Prob`]: the linear value (which may underflow to zero) plus
//! the natural log (which stays meaningful down to `ln p ≈ -1.7e308`).
//! Ordering, thresholds and products are done on the log field; printable
//! output and moderate-scale arithmetic use the linear field.

/// A probability in `[0, 1]` stored as `(linear, ln)`.
///
/// Invariant: `ln <= 0` and `lin == ln.exp()` up to rounding (with `lin == 0`
/// once `ln` is below the underflow threshold). `Prob::zero()` has
/// `ln == -inf`; `Prob::one()` has `ln == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prob {
    lin: f64,
    ln: f64,
}

impl Prob {
    pub const ZERO: Prob = Prob {
        lin: 0.0,
        ln: f64::NEG_INFINITY,
    };
    pub const ONE: Prob = Prob { lin: 1.0, ln: 0.0 };

    /// Build from a linear value in `[0, 1]`.
    pub fn from_lin(p: f64) -> Prob {
        assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
        Prob { lin: p, ln: p.ln() }
    }

    /// Build from a log value in `[-inf, 0]`.
    pub fn from_ln(l: f64) -> Prob {
        assert!(
            l <= 0.0 && !l.is_nan(),
            "ln-probability {l} outside [-inf, 0]"
        );
        Prob {
            lin: l.exp(),
            ln: l,
        }
    }

    pub fn lin(self) -> f64 {
        self.lin
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    /// `ln(1 - p)`, accurate for small `p`.
    pub fn ln_one_minus(self) -> f64 {
        (-self.lin).ln_1p()
    }

    /// `1 - p` as a plain probability (linear scale is adequate: the result
    /// is near 1 exactly when `p` is tiny).
    pub fn one_minus(self) -> Prob {
        if self.lin < 0.5 {
            // ln(1-p) via ln_1p keeps the log field accurate.
            Prob {
                lin: 1.0 - self.lin,
                ln: self.ln_one_minus(),
            }
        } else {
            Prob::from_lin(1.0 - self.lin)
        }
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    pub fn is_one(self) -> bool {
        self.ln == 0.0
    }

    /// Total order on the log field (zero sorts first).
    pub fn cmp_ln(self, other: Prob) -> std::cmp::Ordering {
        self.ln.total_cmp(&other.ln)
    }
}

/// `ln(sum exp(terms))` with the usual max-shift for stability.
///
/// Empty input and all-`-inf` input both return `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
    m + s.ln()
}

/// Streaming variant of [`log_sum_exp`] for accumulations too large to buffer.
#[derive(Debug, Clone, Copy)]
pub struct LogSumAcc {
    max: f64,
    sum: f64, // sum of exp(term - max)
}

impl LogSumAcc {
    pub fn new() -> LogSumAcc {
        LogSumAcc {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term <= self.max {
            self.sum += (term - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - term).exp() + 1.0;
            self.max = term;
        }
    }

    /// Add `count` copies of `term`.
    pub fn add_scaled(&mut self, term: f64, count: f64) {
        if count == 0.0 {
            return;
        }
        self.add(term + count.ln());
    }

    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

impl Default for LogSumAcc {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_moderate_values() {
        for &p in &[0.0, 1e-12, 0.25, 0.5, 0.9999, 1.0] {
            let x = Prob::from_lin(p);
            assert_eq!(x.lin(), p);
            if p > 0.0 {
                assert!((x.ln() - p.ln()).abs() <= 1e-15 * p.ln().abs().max(1.0));
            }
        }
    }

    #[test]
    fn survives_linear_underflow() {
        let x = Prob::from_ln(-1e6);
        assert_eq!(x.lin(), 0.0);
        assert_eq!(x.ln(), -1e6);
        assert!(!x.is_zero());
        assert!(x.cmp_ln(Prob::from_ln(-10.0)) == std::cmp::Ordering::Less);
    }

    #[test]
    fn one_minus_is_accurate_near_both_ends() {
        let tiny = Prob::from_lin(1e-300);
        let c = tiny.one_minus();
        assert_eq!(c.lin(), 1.0);
        assert!((c.ln() - (-1e-300)).abs() < 1e-315);

        let big = Prob::from_lin(0.9375);
        assert!((big.one_minus().lin() - 0.0625).abs() < 1e-16);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let terms = [(0.3f64).ln(), (0.25f64).ln(), (0.0125f64).ln()];
        let got = log_sum_exp(&terms).exp();
        assert!((got - 0.5625).abs() < 1e-14);

        let mut acc = LogSumAcc::new();
        for t in terms {
            acc.add(t);
        }
        assert!((acc.value().exp() - 0.5625).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_handles_tiny_terms() {
        // Two terms around e^-5000: representable only in log scale.
        let got = log_sum_exp(&[-5000.0, -5000.0]);
        assert!((got - (-5000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn capacity_identity_is_exact_in_ieee() {
        // (1 - e) + e rounds back to exactly 1.0 for any e in [0, 1]:
        // the sum is within 2^-54 of 1, inside the rounding interval of 1.0.
        for &e in &[0.1, 0.3, 1e-7, 0.9999999, 0.5625, 1e-300] {
            let cap = 1.0 - e;
            assert_eq!(cap + e, 1.0);
        }
    }
}
