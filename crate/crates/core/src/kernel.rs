//! Polarization kernels and their erasure behavior.
//!
//! A kernel is an invertible `l x l` matrix over a finite field. Applied to
//! `l` uses of an erasure channel, it synthesizes `l` child channels: under
//! successive decoding with known later inputs, synthetic index `i` is
//! undetermined by an erasure pattern `S` exactly when row `g_i` restricted
//! to the surviving columns falls in the span of the rows below it. Counting
//! those patterns by size gives the erasure count table, from which every
//! analytic quantity here (child rates, partial distances, dice, operator
//! norm) is derived.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::ErasureChannel;
use crate::dice::DiceDistribution;
use crate::error::{CoreError, Result};
use crate::field::{mat_rank, Field, SpanTracker};
use crate::prob::{log_sum_exp, Prob};

/// Largest kernel size for which the `2^l` subset enumeration is attempted.
pub const MAX_ENUM_ELL: usize = 20;

/// Erasure rate below which child evaluation switches to log scale.
const LOG_EVAL_THRESHOLD: f64 = 1e-6;

/// Multiplicative safety factor on the operator-norm grid supremum.
const OP_NORM_SAFETY: f64 = 1.0 + 1e-9;

/// `counts[i][s]`: number of size-`s` erasure patterns that leave synthetic
/// index `i` (0-based, `i = 0` decoded first) undetermined.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasureCountTable {
    ell: usize,
    counts: Vec<Vec<u64>>,
}

impl ErasureCountTable {
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Counts for synthetic index `i`, indexed by pattern size `0..=l`.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i]
    }

    /// Smallest pattern size that can erase index `i` (its partial distance).
    pub fn min_pattern(&self, i: usize) -> usize {
        self.counts[i]
            .iter()
            .position(|&c| c > 0)
            .expect("every index is erased by the full pattern")
    }
}

#[derive(Debug)]
pub struct Kernel {
    field: Arc<Field>,
    ell: usize,
    rows: Vec<Vec<u32>>,
    name: String,
    table: OnceLock<ErasureCountTable>,
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.rows == other.rows
    }
}

impl Kernel {
    /// Validate and wrap an invertible square matrix.
    pub fn new(field: Arc<Field>, rows: Vec<Vec<u32>>, name: impl Into<String>) -> Result<Kernel> {
        let ell = rows.len();
        if ell < 2 {
            return Err(CoreError::EllTooSmall(ell));
        }
        if rows.iter().any(|r| r.len() != ell) {
            return Err(CoreError::RaggedRows);
        }
        if mat_rank(&field, &rows)? != ell {
            return Err(CoreError::SingularKernel);
        }
        Ok(Kernel {
            field,
            ell,
            rows,
            name: name.into(),
            table: OnceLock::new(),
        })
    }

    /// The classic 2x2 kernel `[[1,0],[1,1]]` over GF(2).
    pub fn arikan() -> Kernel {
        let f = Arc::new(Field::prime(2).expect("2 is prime"));
        Kernel::new(f, vec![vec![1, 0], vec![1, 1]], "arikan").expect("invertible")
    }

    /// Reed-Solomon kernel over `field`: `l = q`, row `j` evaluates the
    /// monomial `x^(l-1-j)` at every field point, so later rows span the
    /// low-degree polynomials and the partial distances are `1..=l`.
    pub fn reed_solomon(field: Arc<Field>) -> Kernel {
        let q = field.q() as usize;
        let rows: Vec<Vec<u32>> = (0..q)
            .map(|j| {
                let deg = (q - 1 - j) as u64;
                (0..q as u32).map(|x| field.pow(x, deg)).collect()
            })
            .collect();
        let name = format!("rs{q}");
        Kernel::new(field, rows, name).expect("evaluation matrix is invertible")
    }

    /// Uniformly random invertible kernel (rejection sampling, deterministic
    /// in `seed`).
    pub fn random(field: Arc<Field>, ell: usize, seed: u64) -> Result<Kernel> {
        if ell < 2 {
            return Err(CoreError::EllTooSmall(ell));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = field.q();
        loop {
            let rows: Vec<Vec<u32>> = (0..ell)
                .map(|_| (0..ell).map(|_| rng.gen_range(0..q)).collect())
                .collect();
            if mat_rank(&field, &rows)? == ell {
                let name = format!("rand-q{}-l{}-s{}", q, ell, seed);
                return Kernel::new(field, rows, name);
            }
        }
    }

    /// Kronecker product `self (x) other` (same field), e.g. repeated
    /// squaring of the 2x2 kernel.
    pub fn kronecker(&self, other: &Kernel) -> Result<Kernel> {
        if self.field != other.field {
            return Err(CoreError::FieldMismatch(
                self.field.q() as u64,
                other.field.q() as u64,
            ));
        }
        let (la, lb) = (self.ell, other.ell);
        let f = &self.field;
        let rows: Vec<Vec<u32>> = (0..la * lb)
            .map(|r| {
                let (ra, rb) = (r / lb, r % lb);
                (0..la * lb)
                    .map(|c| {
                        let (ca, cb) = (c / lb, c % lb);
                        f.mul(self.rows[ra][ca], other.rows[rb][cb])
                    })
                    .collect()
            })
            .collect();
        let name = format!("{}x{}", self.name, other.name);
        Kernel::new(self.field.clone(), rows, name)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn q(&self) -> u32 {
        self.field.q()
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The erasure count table (computed once, cached).
    pub fn erasure_table(&self) -> Result<&ErasureCountTable> {
        if self.ell > MAX_ENUM_ELL {
            return Err(CoreError::EllTooLarge(self.ell, MAX_ENUM_ELL));
        }
        Ok(self.table.get_or_init(|| self.compute_table()))
    }

    fn compute_table(&self) -> ErasureCountTable {
        let ell = self.ell;
        let subsets = 1u64 << ell;
        let zero = || vec![vec![0u64; ell + 1]; ell];
        let counts = (0..subsets)
            .into_par_iter()
            .fold(zero, |mut counts, s| {
                let flags = self.erased_indices(s as u32);
                let size = (s as u32).count_ones() as usize;
                let mut erased = 0usize;
                for (i, row) in counts.iter_mut().enumerate() {
                    if flags >> i & 1 == 1 {
                        row[size] += 1;
                        erased += 1;
                    }
                }
                // Invertibility forces exactly |S| undetermined indices
                // per pattern; this is the per-subset conservation law.
                assert_eq!(erased, size, "conservation violated for pattern {s:#b}");
                counts
            })
            .reduce(zero, |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (ca, cb) in ra.iter_mut().zip(rb) {
                        *ca += cb;
                    }
                }
                a
            });
        ErasureCountTable { ell, counts }
    }

    /// Bitmask of synthetic indices undetermined by erasure pattern `s`
    /// (bit `c` of `s` marks column `c` erased).
    pub fn erased_indices(&self, s: u32) -> u32 {
        if self.field.p() == 2 && self.field.e() == 1 {
            self.erased_indices_gf2(s)
        } else {
            self.erased_indices_generic(s)
        }
    }

    fn erased_indices_gf2(&self, s: u32) -> u32 {
        let comp = !s & ((1u32 << self.ell) - 1);
        let mut basis = [0u32; MAX_ENUM_ELL + 1];
        let mut flags = 0u32;
        for i in (0..self.ell).rev() {
            let mut v = 0u32;
            for (c, &x) in self.rows[i].iter().enumerate() {
                v |= (x & 1) << c;
            }
            v &= comp;
            loop {
                if v == 0 {
                    flags |= 1 << i;
                    break;
                }
                let lead = 31 - v.leading_zeros() as usize;
                if basis[lead] == 0 {
                    basis[lead] = v;
                    break;
                }
                v ^= basis[lead];
            }
        }
        flags
    }

    fn erased_indices_generic(&self, s: u32) -> u32 {
        let keep: Vec<usize> = (0..self.ell).filter(|c| s >> c & 1 == 0).collect();
        let mut tracker = SpanTracker::new(&self.field);
        let mut flags = 0u32;
        for i in (0..self.ell).rev() {
            let v: Vec<u32> = keep.iter().map(|&c| self.rows[i][c]).collect();
            if tracker.contains(&v) {
                flags |= 1 << i;
            } else {
                tracker.insert(&v);
            }
        }
        flags
    }

    /// Erasure rate of synthetic child `i` at parent rate `eps`:
    /// `sum_s counts[i][s] eps^s (1-eps)^(l-s)`, evaluated in log scale for
    /// tiny rates so doubly-small children stay meaningful.
    pub fn child_eps(&self, i: usize, eps: Prob) -> Result<Prob> {
        let table = self.erasure_table()?;
        let ell = self.ell;
        let counts = table.row(i);
        if eps.lin() >= LOG_EVAL_THRESHOLD {
            let e = eps.lin();
            let c = 1.0 - e;
            let mut e_pow = vec![1.0f64; ell + 1];
            let mut c_pow = vec![1.0f64; ell + 1];
            for s in 1..=ell {
                e_pow[s] = e_pow[s - 1] * e;
                c_pow[s] = c_pow[s - 1] * c;
            }
            let mut sum = 0.0;
            for s in 0..=ell {
                if counts[s] > 0 {
                    sum += counts[s] as f64 * e_pow[s] * c_pow[ell - s];
                }
            }
            Ok(Prob::from_lin(sum.clamp(0.0, 1.0)))
        } else {
            let ln_e = eps.ln();
            let ln_c = eps.ln_one_minus();
            let terms: Vec<f64> = (0..=ell)
                .filter(|&s| counts[s] > 0)
                .map(|s| (counts[s] as f64).ln() + s as f64 * ln_e + (ell - s) as f64 * ln_c)
                .collect();
            Ok(Prob::from_ln(log_sum_exp(&terms).min(0.0)))
        }
    }

    /// All `l` synthetic children of `ch`, decode order first to last.
    pub fn synthetic_children(&self, ch: &ErasureChannel) -> Result<Vec<ErasureChannel>> {
        if ch.q() != self.q() {
            return Err(CoreError::FieldMismatch(ch.q() as u64, self.q() as u64));
        }
        (0..self.ell)
            .map(|i| {
                Ok(ErasureChannel::from_prob(
                    self.field.clone(),
                    self.child_eps(i, ch.eps())?,
                ))
            })
            .collect()
    }

    /// Partial distances `d_i = min |S|` erasing index `i`; equal to the
    /// minimum weight in the coset of row `i` over the rows below it.
    pub fn partial_distances(&self) -> Result<Vec<usize>> {
        let table = self.erasure_table()?;
        Ok((0..self.ell).map(|i| table.min_pattern(i)).collect())
    }

    /// The log-distance dice `Y = ln d_X`, `X` uniform.
    pub fn dice(&self) -> Result<DiceDistribution> {
        Ok(DiceDistribution::from_log_distances(
            &self.partial_distances()?,
        ))
    }

    /// Polarization rate exponent `E[Y] / ln l`.
    pub fn beta_star(&self) -> Result<f64> {
        use crate::dice::LogMgf;
        Ok(self.dice()?.mean() / (self.ell as f64).ln())
    }

    /// Operator norm `sup_eps max_i child_eps(i, eps)/eps`: a grid supremum
    /// over (0,1) refined toward both ends, the exact limits at 0 (the
    /// single-erasure counts) and at 1 (ratio 1), all times a safety factor.
    pub fn op_norm(&self) -> Result<f64> {
        let table = self.erasure_table()?;
        let mut grid: Vec<f64> = (1..10_000).map(|j| j as f64 / 10_000.0).collect();
        for k in 1..=12 {
            let t = 10f64.powi(-k);
            grid.push(t);
            grid.push(1.0 - t);
        }
        let mut sup = 1.0f64; // eps -> 1 limit
        for i in 0..self.ell {
            sup = sup.max(table.row(i)[1] as f64); // eps -> 0 limit
        }
        for &e in &grid {
            let eps = Prob::from_lin(e);
            for i in 0..self.ell {
                let ratio = self.child_eps(i, eps)?.lin() / e;
                sup = sup.max(ratio);
            }
        }
        Ok(sup * OP_NORM_SAFETY)
    }

    /// Whether some synthetic index has partial distance at least 2 (the
    /// kernel polarizes at all).
    pub fn is_powerful(&self) -> Result<bool> {
        Ok(self.partial_distances()?.iter().any(|&d| d >= 2))
    }

    /// Parse the kernel text format: a header `q ell name`, then `ell` rows
    /// of `ell` element codes. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Kernel> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hn, header) = lines.next().ok_or_else(|| CoreError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(CoreError::Parse {
                line: hn,
                msg: "header must be `q ell name`".into(),
            });
        }
        let q: u64 = toks[0].parse().map_err(|_| CoreError::Parse {
            line: hn,
            msg: "bad field order".into(),
        })?;
        let ell: usize = toks[1].parse().map_err(|_| CoreError::Parse {
            line: hn,
            msg: "bad kernel size".into(),
        })?;
        let name = toks[2].to_string();
        let field = Arc::new(Field::of_order(q)?);
        let mut rows = Vec::with_capacity(ell);
        for _ in 0..ell {
            let (rn, line) = lines.next().ok_or_else(|| CoreError::Parse {
                line: hn,
                msg: format!("expected {ell} rows"),
            })?;
            let row: Vec<u32> = line
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| CoreError::Parse {
                        line: rn,
                        msg: "bad element".into(),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != ell {
                return Err(CoreError::Parse {
                    line: rn,
                    msg: format!("expected {ell} entries"),
                });
            }
            if let Some(&bad) = row.iter().find(|&&x| x as u64 >= q) {
                return Err(CoreError::ElementOutOfRange(bad as u64, q));
            }
            rows.push(row);
        }
        Kernel::new(field, rows, name)
    }

    /// Inverse of [`Kernel::parse_str`].
    pub fn file_string(&self) -> String {
        let mut s = format!("{} {} {}\n", self.q(), self.ell, self.name);
        for row in &self.rows {
            let toks: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            s.push_str(&toks.join(" "));
            s.push('\n');
        }
        s
    }
}
