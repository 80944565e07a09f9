//! q-ary erasure channels.
//!
//! A channel is an alphabet (a finite field) plus an erasure rate. Capacity
//! and the Bhattacharyya-style fidelity parameter are measured in q-ary
//! symbol units, so `capacity + z = 1` holds exactly: a symbol either
//! arrives (probability `1 - eps`) or is erased.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::prob::Prob;

#[derive(Debug, Clone)]
pub struct ErasureChannel {
    field: Arc<Field>,
    eps: Prob,
}

impl ErasureChannel {
    pub fn new(field: Arc<Field>, eps: f64) -> Result<ErasureChannel> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(CoreError::EpsilonOutOfRange(eps));
        }
        Ok(ErasureChannel {
            field,
            eps: Prob::from_lin(eps),
        })
    }

    pub fn from_prob(field: Arc<Field>, eps: Prob) -> ErasureChannel {
        ErasureChannel { field, eps }
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn q(&self) -> u32 {
        self.field.q()
    }

    pub fn eps(&self) -> Prob {
        self.eps
    }

    /// Erasure probability, linear scale (0.0 once underflowed).
    pub fn z(&self) -> f64 {
        self.eps.lin()
    }

    /// Capacity in q-ary symbol units; `capacity() + z() == 1.0` exactly.
    pub fn capacity(&self) -> f64 {
        1.0 - self.eps.lin()
    }

    /// Package `k` uses as one use over the degree-`k` extension alphabet:
    /// the packaged symbol is erased when any component use is erased, so
    /// `eps' = 1 - (1 - eps)^k`. Capacity per base-field symbol is lost
    /// unless `eps = 0` or `k = 1`.
    pub fn power(&self, k: u32) -> Result<ErasureChannel> {
        if k == 0 {
            return Err(CoreError::BadPowerExponent);
        }
        let field = Arc::new(self.field.extension(k)?);
        Ok(ErasureChannel {
            field,
            eps: power_eps(self.eps, k),
        })
    }
}

/// `1 - (1 - eps)^k` in dual representation, accurate at both ends.
pub fn power_eps(eps: Prob, k: u32) -> Prob {
    if eps.is_one() {
        return Prob::ONE;
    }
    if eps.ln() < -40.0 {
        // (1-eps)^k = 1 - k eps + O(eps^2): the complement is k*eps to
        // machine precision, and only the log field survives underflow.
        return Prob::from_ln((k as f64).ln() + eps.ln());
    }
    let t = k as f64 * eps.ln_one_minus();
    Prob::from_lin(-t.exp_m1())
}
