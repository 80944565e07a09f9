//! Finite fields GF(p^e) with dense integer element codes.
//!
//! An element is an integer in `0..q` whose base-`p` digits (least significant
//! first) are the coefficients of a polynomial over GF(p); the field is the
//! quotient by a monic irreducible polynomial of degree `e`. Multiplication
//! and inversion go through log/antilog tables over a generator of the
//! multiplicative group, so `q` is capped at 65536. Addition is digit-wise
//! mod `p` (XOR when `p = 2`), with a full table for `q <= 256`.
//!
//! Irreducibility of the defining polynomial is verified exhaustively (trial
//! division by every monic polynomial of degree at most `e/2`) for `e <= 4`;
//! for larger degrees a user-supplied polynomial is trusted with a warning,
//! while the canonical constructors always verify.

use crate::error::{CoreError, Result};

pub const MAX_Q: u64 = 1 << 16;

/// A concrete finite field. Equality compares `(p, e, irreducible)`.
#[derive(Debug)]
pub struct Field {
    p: u32,
    e: u32,
    q: u32,
    /// Coefficients `c_0..c_{e-1}` of the monic irreducible, low-to-high
    /// (the leading coefficient 1 is implicit). Empty for prime fields.
    irreducible: Vec<u32>,
    /// `log[a]` for `a != 0`: discrete log base the chosen generator.
    log: Vec<u32>,
    /// `alog[k] = g^k` for `k in 0..q-1`.
    alog: Vec<u32>,
    /// Full addition table for small fields, flattened `q*q`.
    add_table: Option<Vec<u32>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.e == other.e && self.irreducible == other.irreducible
    }
}
impl Eq for Field {}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Digits of `x` base `p`, least significant first, padded to `len`.
fn digits(mut x: u64, p: u64, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for slot in out.iter_mut() {
        *slot = (x % p) as u32;
        x /= p;
    }
    out
}

/// Polynomial arithmetic over GF(p), coefficients low-to-high, no implicit
/// leading term. Used only while bootstrapping field tables.
mod poly {
    pub fn trim(v: &mut Vec<u32>) {
        while v.last() == Some(&0) {
            v.pop();
        }
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return vec![];
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                out[i + j] += ai as u64 * bj as u64;
            }
        }
        let mut out: Vec<u32> = out.iter().map(|&c| (c % p as u64) as u32).collect();
        trim(&mut out);
        out
    }

    /// Remainder of `a` divided by monic `m` (leading coefficient of `m`
    /// must be nonzero; it need not be 1 — we normalize).
    pub fn rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        let mut r: Vec<u32> = a.to_vec();
        trim(&mut r);
        let dm = m.len() - 1;
        let lead = m[dm];
        let lead_inv = mod_inv(lead, p);
        while r.len() > dm {
            let dr = r.len() - 1;
            let coef = (r[dr] as u64 * lead_inv as u64 % p as u64) as u32;
            for (mk, rk) in m.iter().zip(&mut r[dr - dm..]) {
                let sub = coef as u64 * *mk as u64 % p as u64;
                *rk = ((*rk as u64 + p as u64 - sub) % p as u64) as u32;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mod_inv(a: u32, p: u32) -> u32 {
        // p is prime and a != 0: Fermat.
        let mut result = 1u64;
        let mut base = a as u64 % p as u64;
        let mut exp = p as u64 - 2;
        while exp > 0 {
            if exp & 1 == 1 {
                result = result * base % p as u64;
            }
            base = base * base % p as u64;
            exp >>= 1;
        }
        result as u32
    }
}

/// Trial-division irreducibility test for a monic polynomial over GF(p),
/// given as low-to-high coefficients including the leading 1.
fn poly_is_irreducible(full: &[u32], p: u32) -> bool {
    let deg = full.len() - 1;
    if deg == 0 {
        return false;
    }
    if full[0] == 0 {
        // Divisible by x.
        return deg == 1;
    }
    for d in 1..=deg / 2 {
        // All monic divisors of degree d: low digits from a counter.
        let count = (p as u64).pow(d as u32);
        for c in 0..count {
            let mut m = digits(c, p as u64, d);
            m.push(1);
            if poly::rem(full, &m, p).is_empty() {
                return false;
            }
        }
    }
    true
}

impl Field {
    /// The prime field GF(p).
    pub fn prime(p: u64) -> Result<Field> {
        Field::new(p, 1, &[])
    }

    /// GF(p^e) with an explicit monic irreducible: `coeffs` are
    /// `c_0..c_{e-1}` (the `x^e` term is implicit).
    pub fn new(p: u64, e: u32, coeffs: &[u32]) -> Result<Field> {
        if !is_prime(p) {
            return Err(CoreError::NotPrime(p));
        }
        if e == 0 {
            return Err(CoreError::DegreeMismatch { want: 1, got: 0 });
        }
        let q = p.checked_pow(e).filter(|&q| q <= MAX_Q);
        let q = q.ok_or(CoreError::FieldTooLarge(p.saturating_pow(e)))? as u32;
        if e > 1 {
            if coeffs.len() != e as usize {
                return Err(CoreError::DegreeMismatch {
                    want: e as usize,
                    got: coeffs.len(),
                });
            }
            if coeffs.iter().any(|&c| c >= p as u32) {
                return Err(CoreError::ElementOutOfRange(
                    *coeffs.iter().max().unwrap() as u64,
                    p,
                ));
            }
            let mut full = coeffs.to_vec();
            full.push(1);
            if e <= 4 {
                if !poly_is_irreducible(&full, p as u32) {
                    return Err(CoreError::ReduciblePolynomial(
                        format!("{coeffs:?} + x^{e}"),
                        p,
                    ));
                }
            } else if !poly_is_irreducible(&full, p as u32) {
                // Degrees above 4 are accepted on trust; still flag the
                // cases the cheap check happens to catch.
                eprintln!(
                    "warning: degree-{e} polynomial over GF({p}) not verified irreducible; \
                     field arithmetic may be inconsistent"
                );
            }
        } else if !coeffs.is_empty() {
            return Err(CoreError::DegreeMismatch {
                want: 0,
                got: coeffs.len(),
            });
        }

        let mut field = Field {
            p: p as u32,
            e,
            q,
            irreducible: coeffs.to_vec(),
            log: vec![],
            alog: vec![],
            add_table: None,
        };
        field.build_tables();
        Ok(field)
    }

    /// The canonical field of order `q = p^e`: the lexicographically first
    /// (by element code of the low coefficients) monic irreducible is used,
    /// so equal orders always produce equal fields.
    pub fn of_order(q: u64) -> Result<Field> {
        if q < 2 {
            return Err(CoreError::NotPrimePower(q));
        }
        if q > MAX_Q {
            return Err(CoreError::FieldTooLarge(q));
        }
        let mut p = 2u64;
        while p * p <= q {
            if q.is_multiple_of(p) {
                let mut e = 0u32;
                let mut m = q;
                while m.is_multiple_of(p) {
                    m /= p;
                    e += 1;
                }
                if m != 1 {
                    return Err(CoreError::NotPrimePower(q));
                }
                if e == 1 {
                    return Field::prime(p);
                }
                for c in 0..q {
                    let coeffs = digits(c, p, e as usize);
                    let mut full = coeffs.clone();
                    full.push(1);
                    if poly_is_irreducible(&full, p as u32) {
                        return Field::new(p, e, &coeffs);
                    }
                }
                unreachable!("an irreducible of every degree exists");
            }
            p += 1;
        }
        Field::prime(q)
    }

    /// The canonical degree-`k` extension: GF(p^(e*k)) with the canonical
    /// polynomial. Used to package `k` uses of this field's channel.
    pub fn extension(&self, k: u32) -> Result<Field> {
        if k == 0 {
            return Err(CoreError::BadPowerExponent);
        }
        let q = (self.p as u64)
            .checked_pow(self.e * k)
            .ok_or(CoreError::FieldTooLarge(u64::MAX))?;
        Field::of_order(q)
    }

    fn build_tables(&mut self) {
        let q = self.q as usize;
        // Multiplication while bootstrapping: polynomial product mod the
        // irreducible (mod x for prime fields is just integer mod p).
        let raw_mul = |a: u32, b: u32| -> u32 {
            if self.e == 1 {
                ((a as u64 * b as u64) % self.p as u64) as u32
            } else {
                let pa = digits(a as u64, self.p as u64, self.e as usize);
                let pb = digits(b as u64, self.p as u64, self.e as usize);
                let prod = poly::mul(&pa, &pb, self.p);
                let mut full = self.irreducible.clone();
                full.push(1);
                let r = poly::rem(&prod, &full, self.p);
                self.encode(&r)
            }
        };

        // Find a generator: order of g is q-1 iff g^((q-1)/f) != 1 for every
        // prime factor f of q-1.
        let group = self.q as u64 - 1;
        let mut factors = vec![];
        let mut m = group;
        let mut d = 2u64;
        while d * d <= m {
            if m.is_multiple_of(d) {
                factors.push(d);
                while m.is_multiple_of(d) {
                    m /= d;
                }
            }
            d += 1;
        }
        if m > 1 {
            factors.push(m);
        }
        let pow = |mut base: u32, mut exp: u64| -> u32 {
            let mut acc = 1u32;
            while exp > 0 {
                if exp & 1 == 1 {
                    acc = raw_mul(acc, base);
                }
                base = raw_mul(base, base);
                exp >>= 1;
            }
            acc
        };
        let mut gen = 0u32;
        for g in 1..self.q {
            if group == 1 || factors.iter().all(|&f| pow(g, group / f) != 1) {
                gen = g;
                break;
            }
        }

        let mut alog = vec![0u32; group.max(1) as usize];
        let mut log = vec![u32::MAX; q];
        let mut acc = 1u32;
        for (k, slot) in alog.iter_mut().enumerate() {
            *slot = acc;
            log[acc as usize] = k as u32;
            acc = raw_mul(acc, gen);
        }
        self.log = log;
        self.alog = alog;

        if q <= 256 {
            let mut table = vec![0u32; q * q];
            for a in 0..q as u32 {
                for b in 0..q as u32 {
                    table[(a as usize) * q + b as usize] = self.add_slow(a, b);
                }
            }
            self.add_table = Some(table);
        }
    }

    fn encode(&self, coeffs: &[u32]) -> u32 {
        let mut x = 0u64;
        for &c in coeffs.iter().rev() {
            x = x * self.p as u64 + c as u64;
        }
        x as u32
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        if self.e == 1 {
            return ((a as u64 + b as u64) % self.p as u64) as u32;
        }
        let mut x = a as u64;
        let mut y = b as u64;
        let p = self.p as u64;
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.e {
            out += (x % p + y % p) % p * place;
            x /= p;
            y /= p;
            place *= p;
        }
        out as u32
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn irreducible(&self) -> &[u32] {
        &self.irreducible
    }

    pub fn contains(&self, a: u32) -> bool {
        a < self.q
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        debug_assert!(a < self.q && b < self.q);
        if self.p == 2 {
            a ^ b
        } else if let Some(t) = &self.add_table {
            t[a as usize * self.q as usize + b as usize]
        } else {
            self.add_slow(a, b)
        }
    }

    pub fn neg(&self, a: u32) -> u32 {
        debug_assert!(a < self.q);
        if self.p == 2 {
            return a;
        }
        if self.e == 1 {
            return if a == 0 { 0 } else { self.p - a };
        }
        let mut x = a as u64;
        let p = self.p as u64;
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.e {
            let d = x % p;
            out += if d == 0 { 0 } else { p - d } * place;
            x /= p;
            place *= p;
        }
        out as u32
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        debug_assert!(a < self.q && b < self.q);
        if a == 0 || b == 0 {
            return 0;
        }
        let group = self.q as u64 - 1;
        let k = (self.log[a as usize] as u64 + self.log[b as usize] as u64) % group;
        self.alog[k as usize]
    }

    /// Multiplicative inverse; panics on zero (callers check pivots first).
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a != 0, "zero has no inverse");
        debug_assert!(a < self.q);
        let group = self.q as u64 - 1;
        let k = (group - self.log[a as usize] as u64) % group;
        self.alog[k as usize]
    }

    pub fn pow(&self, a: u32, mut n: u64) -> u32 {
        if a == 0 {
            return if n == 0 { 1 } else { 0 };
        }
        let group = self.q as u64 - 1;
        n %= group;
        let k = (self.log[a as usize] as u64 * n) % group;
        self.alog[k as usize]
    }

    /// Parse the one-line field format `p e c_0 .. c_{e-1}`
    /// (prime fields are just `p 1`).
    pub fn parse_spec_line(line: &str) -> Result<Field> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| CoreError::Parse {
            line: 1,
            msg: msg.to_string(),
        };
        if toks.len() < 2 {
            return Err(bad("expected at least `p e`"));
        }
        let p: u64 = toks[0].parse().map_err(|_| bad("bad prime"))?;
        let e: u32 = toks[1].parse().map_err(|_| bad("bad extension degree"))?;
        let coeffs: Vec<u32> = toks[2..]
            .iter()
            .map(|t| t.parse().map_err(|_| bad("bad coefficient")))
            .collect::<Result<_>>()?;
        if e > 1 && coeffs.len() != e as usize {
            return Err(bad("coefficient count must equal the extension degree"));
        }
        Field::new(p, e, &coeffs)
    }

    /// Inverse of [`Field::parse_spec_line`].
    pub fn spec_line(&self) -> String {
        let mut s = format!("{} {}", self.p, self.e);
        for c in &self.irreducible {
            s.push_str(&format!(" {c}"));
        }
        s
    }
}

/// Rank of a matrix over `field` by Gaussian elimination.
/// Rows may be empty (rank 0 of a 0-column matrix).
pub fn mat_rank(field: &Field, rows: &[Vec<u32>]) -> Result<usize> {
    if rows.is_empty() {
        return Ok(0);
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CoreError::RaggedRows);
    }
    for r in rows {
        for &x in r {
            if !field.contains(x) {
                return Err(CoreError::ElementOutOfRange(x as u64, field.q() as u64));
            }
        }
    }
    let mut m: Vec<Vec<u32>> = rows.to_vec();
    Ok(echelon_rank(field, &mut m))
}

fn echelon_rank(field: &Field, m: &mut [Vec<u32>]) -> usize {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = field.inv(m[rank][c]);
        for x in m[rank].iter_mut() {
            *x = field.mul(*x, inv);
        }
        let pivot_row = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank && row[c] != 0 {
                let f = row[c];
                for (x, pr) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                    *x = field.sub(*x, field.mul(f, *pr));
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Whether `v` lies in the row span of `rows` over `field`.
/// True for the zero vector and for zero-length vectors.
pub fn in_span(field: &Field, v: &[u32], rows: &[Vec<u32>]) -> Result<bool> {
    if rows.iter().any(|r| r.len() != v.len()) {
        return Err(CoreError::RaggedRows);
    }
    if v.is_empty() {
        return Ok(true);
    }
    let base = mat_rank(field, rows)?;
    let mut aug: Vec<Vec<u32>> = rows.to_vec();
    aug.push(v.to_vec());
    let joined = mat_rank(field, &aug)?;
    Ok(joined == base)
}

/// Incremental span tracker over a fixed column count: rows are inserted one
/// at a time and membership queries run against the rows added so far.
/// This is the O(l^2) inner loop of subset enumeration.
pub struct SpanTracker<'f> {
    field: &'f Field,
    /// Reduced rows in echelon form, tagged with their pivot column.
    basis: Vec<(usize, Vec<u32>)>,
}

impl<'f> SpanTracker<'f> {
    pub fn new(field: &'f Field) -> SpanTracker<'f> {
        SpanTracker {
            field,
            basis: vec![],
        }
    }

    /// Reduce `v` against the current basis; returns the residue.
    fn reduce(&self, v: &mut [u32]) {
        for (pivot, row) in &self.basis {
            let c = v[*pivot];
            if c != 0 {
                for (x, r) in v.iter_mut().zip(row.iter()) {
                    let sub = self.field.mul(c, *r);
                    *x = self.field.sub(*x, sub);
                }
            }
        }
    }

    /// True iff `v` is in the span of the rows inserted so far.
    pub fn contains(&self, v: &[u32]) -> bool {
        let mut v = v.to_vec();
        self.reduce(&mut v);
        v.iter().all(|&x| x == 0)
    }

    /// Insert a row (no-op if already in the span).
    pub fn insert(&mut self, v: &[u32]) {
        let mut v = v.to_vec();
        self.reduce(&mut v);
        if let Some(pivot) = v.iter().position(|&x| x != 0) {
            let inv = self.field.inv(v[pivot]);
            for x in v.iter_mut() {
                *x = self.field.mul(*x, inv);
            }
            self.basis.push((pivot, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Check the full field axioms by brute force.
    fn assert_field_axioms(f: &Field) {
        let q = f.q();
        for a in 0..q {
            assert_eq!(f.add(a, 0), a);
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.add(a, f.neg(a)), 0);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a)), 1, "inverse failed for {a} in GF({q})");
            }
            for b in 0..q {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in 0..q {
                    assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(
                        f.mul(a, f.add(b, c)),
                        f.add(f.mul(a, b), f.mul(a, c)),
                        "distributivity failed in GF({q})"
                    );
                }
            }
        }
    }

    #[test]
    fn axioms_hold_for_all_orders_up_to_16() {
        for q in [2u64, 3, 4, 5, 7, 8, 9, 11, 13, 16] {
            let f = Field::of_order(q).unwrap();
            assert_eq!(f.q() as u64, q);
            assert_field_axioms(&f);
        }
    }

    #[test]
    fn canonical_polynomials_are_the_standard_ones() {
        // GF(4): x^2 + x + 1 is the only monic irreducible quadratic.
        assert_eq!(Field::of_order(4).unwrap().irreducible(), &[1, 1]);
        // GF(8): lexicographic search lands on x^3 + x + 1.
        assert_eq!(Field::of_order(8).unwrap().irreducible(), &[1, 1, 0]);
        // GF(16): x^4 + x + 1.
        assert_eq!(Field::of_order(16).unwrap().irreducible(), &[1, 1, 0, 0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Field::prime(6), Err(CoreError::NotPrime(6))));
        assert!(matches!(
            Field::of_order(12),
            Err(CoreError::NotPrimePower(12))
        ));
        // x^2 + 1 = (x+1)^2 over GF(2).
        assert!(matches!(
            Field::new(2, 2, &[1, 0]),
            Err(CoreError::ReduciblePolynomial(..))
        ));
        assert!(Field::of_order(1 << 17).is_err());
    }

    #[test]
    fn gf4_multiplication_matches_hand_table() {
        // Elements 0,1,2=x,3=x+1 with x^2 = x + 1.
        let f = Field::of_order(4).unwrap();
        assert_eq!(f.mul(2, 2), 3);
        assert_eq!(f.mul(2, 3), 1);
        assert_eq!(f.mul(3, 3), 2);
        assert_eq!(f.inv(2), 3);
        assert_eq!(f.inv(3), 2);
    }

    #[test]
    fn extension_matches_of_order() {
        let gf2 = Field::prime(2).unwrap();
        let gf4 = gf2.extension(2).unwrap();
        assert_eq!(gf4, Field::of_order(4).unwrap());
        let gf16 = gf2.extension(4).unwrap();
        assert_eq!(gf16.q(), 16);
    }

    #[test]
    fn rank_matches_span_enumeration_oracle() {
        // Independent oracle: rank r  <=>  the set of all linear
        // combinations has size q^r. Enumerate all combinations directly.
        let f = Field::prime(2).unwrap();
        let rows = vec![vec![1, 0], vec![1, 1]];
        let mut span = std::collections::HashSet::new();
        for a in 0..2u32 {
            for b in 0..2u32 {
                let v: Vec<u32> = (0..2)
                    .map(|c| f.add(f.mul(a, rows[0][c]), f.mul(b, rows[1][c])))
                    .collect();
                span.insert(v);
            }
        }
        assert_eq!(span.len(), 4); // q^2 -> rank 2
        assert_eq!(mat_rank(&f, &rows).unwrap(), 2);

        let dep = vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]];
        assert_eq!(mat_rank(&f, &dep).unwrap(), 2);
    }

    #[test]
    fn rank_over_gf4() {
        let f = Field::of_order(4).unwrap();
        // Row 3 = 2 * row 1 + row 2: rank 2.
        let r1 = vec![1u32, 2, 3];
        let r2 = vec![0u32, 1, 1];
        let r3: Vec<u32> = (0..3).map(|c| f.add(f.mul(2, r1[c]), r2[c])).collect();
        assert_eq!(mat_rank(&f, [r1, r2, r3.clone()].as_ref()).unwrap(), 2);
    }

    #[test]
    fn in_span_examples() {
        let f = Field::prime(2).unwrap();
        assert!(!in_span(&f, &[1, 0], &[vec![1, 1]]).unwrap());
        assert!(in_span(&f, &[0, 1], &[vec![1, 1], vec![1, 0]]).unwrap());
        assert!(in_span(&f, &[0, 0], &[vec![1, 1]]).unwrap());
        assert!(in_span(&f, &[], &[]).unwrap());
    }

    #[test]
    fn span_tracker_agrees_with_in_span() {
        let f = Field::of_order(4).unwrap();
        let rows = [vec![1u32, 2, 0, 3], vec![2, 2, 1, 0], vec![3, 0, 1, 3]];
        let mut tracker = SpanTracker::new(&f);
        for i in (0..rows.len()).rev() {
            let below: Vec<Vec<u32>> = rows[i + 1..].to_vec();
            assert_eq!(
                tracker.contains(&rows[i]),
                in_span(&f, &rows[i], &below).unwrap(),
                "mismatch inserting row {i}"
            );
            tracker.insert(&rows[i]);
        }
    }

    #[test]
    fn spec_line_roundtrip() {
        for line in ["2 1", "7 1", "2 4 1 1 0 0", "3 2 2 1"] {
            let f = Field::parse_spec_line(line).unwrap();
            assert_eq!(f.spec_line(), line);
            assert_eq!(Field::parse_spec_line(&f.spec_line()).unwrap(), f);
        }
        assert!(Field::parse_spec_line("4 1").is_err());
        assert!(Field::parse_spec_line("2 2 1").is_err());
    }

    #[test]
    fn pow_cycles_through_the_group() {
        let f = Field::of_order(9).unwrap();
        for a in 1..9u32 {
            assert_eq!(f.pow(a, 8), 1); // a^(q-1) = 1
            let mut acc = 1u32;
            for n in 0..5u64 {
                assert_eq!(f.pow(a, n), acc);
                acc = f.mul(acc, a);
            }
        }
    }
}
