//! Arithmetic over finite fields GF(p^k).
//!
//! Elements are stored by their canonical integer encoding: the coefficient
//! vector `c_0 + c_1 x + ... + c_{k-1} x^{k-1}` of the polynomial
//! representative maps to `c_0 + c_1 p + ... + c_{k-1} p^{k-1}`. Every
//! downstream vertex ordering is derived from this encoding.
//!
//! Multiplication goes through exponent/logarithm tables built from the
//! least primitive element, so a [`Field`] costs `O(q)` memory.

use std::fmt;

use thiserror::Error;

/// Largest field order supported.
pub const MAX_ORDER: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("NotPrimePower: {0} is not a prime power")]
    NotPrimePower(u32),
    #[error("NotPrimePower: field order {0} is outside the supported range [2, 65536]")]
    OrderOutOfRange(u32),
    #[error("DivisionByZero: zero has no multiplicative inverse")]
    DivisionByZero,
}

/// An element of some [`Field`], identified by its canonical encoding in `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElement(pub u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn encoding(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The finite field of order `q = p^k`.
#[derive(Clone)]
pub struct Field {
    p: u32,
    k: u32,
    q: u32,
    /// Monic irreducible modulus, little-endian, `k + 1` coefficients.
    modulus: Vec<u32>,
    primitive: FieldElement,
    /// `exp[i] = primitive^i` for `i in 0..2(q-1)`.
    exp: Vec<u32>,
    /// `log[a]` for nonzero `a`; `log[0]` is unused.
    log: Vec<u32>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("p", &self.p)
            .field("k", &self.k)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.modulus == other.modulus
    }
}

impl Eq for Field {}

/// Returns `(p, k)` with `q = p^k`, or `None` when `q` is not a prime power.
pub fn prime_power_decomposition(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = smallest_prime_factor(q);
    let mut rest = q;
    let mut k = 0;
    while rest % p == 0 {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

pub fn is_prime_power(q: u32) -> bool {
    prime_power_decomposition(q).is_some()
}

fn smallest_prime_factor(n: u32) -> u32 {
    if n % 2 == 0 {
        return 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return d;
        }
        d += 2;
    }
    n
}

fn distinct_prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    while n > 1 {
        let p = smallest_prime_factor(n);
        out.push(p);
        while n % p == 0 {
            n /= p;
        }
    }
    out
}

// Dense polynomial helpers over GF(p), little-endian, no trailing zeros.

fn poly_trim(a: &mut Vec<u32>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn inv_mod_prime(a: u32, p: u32) -> u32 {
    // a^(p-2) mod p
    let mut base = a as u64 % p as u64;
    let mut e = p - 2;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        e >>= 1;
    }
    acc as u32
}

/// Remainder of `a` modulo `b` over GF(p). `b` must be nonzero.
fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    let lead_inv = inv_mod_prime(b[db], p) as u64;
    while r.len() > db {
        let shift = r.len() - 1 - db;
        let factor = r[r.len() - 1] as u64 * lead_inv % p as u64;
        for (i, &bc) in b.iter().enumerate() {
            let sub = factor * bc as u64 % p as u64;
            let slot = &mut r[shift + i];
            *slot = ((*slot as u64 + p as u64 - sub) % p as u64) as u32;
        }
        poly_trim(&mut r);
    }
    r
}

fn poly_mul_mod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
        }
    }
    let out: Vec<u32> = out.into_iter().map(|c| c as u32).collect();
    poly_rem(&out, modulus, p)
}

/// Decodes the base-`p` digits of `enc` into `len` little-endian coefficients.
fn digits(mut enc: u32, p: u32, len: u32) -> Vec<u32> {
    (0..len)
        .map(|_| {
            let d = enc % p;
            enc /= p;
            d
        })
        .collect()
}

fn undigits(coeffs: &[u32], p: u32) -> u32 {
    coeffs.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// True iff the monic polynomial `f` of degree `k >= 1` has no monic factor
/// of degree `1..=k/2` over GF(p).
fn is_irreducible(f: &[u32], p: u32) -> bool {
    let k = f.len() as u32 - 1;
    for deg in 1..=k / 2 {
        for low in 0..p.pow(deg) {
            let mut g = digits(low, p, deg);
            g.push(1);
            if poly_rem(f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// Lowest-encoding monic irreducible of degree `k` over GF(p).
fn find_modulus(p: u32, k: u32) -> Vec<u32> {
    if k == 1 {
        return vec![0, 1];
    }
    (0..p.pow(k))
        .map(|low| {
            let mut f = digits(low, p, k);
            f.push(1);
            f
        })
        .find(|f| is_irreducible(f, p))
        .expect("an irreducible polynomial of every degree exists")
}

impl Field {
    /// Builds GF(q). The modulus is the monic irreducible polynomial with
    /// the lowest canonical encoding, so all constructions agree run to run.
    pub fn new(q: u32) -> Result<Field, FieldError> {
        if !(2..=MAX_ORDER).contains(&q) {
            return Err(FieldError::OrderOutOfRange(q));
        }
        let (p, k) = prime_power_decomposition(q).ok_or(FieldError::NotPrimePower(q))?;
        let modulus = find_modulus(p, k);

        let slow_mul = |a: u32, b: u32| -> u32 {
            let pa = digits(a, p, k);
            let pb = digits(b, p, k);
            let mut r = poly_mul_mod(&pa, &pb, &modulus, p);
            r.resize(k as usize, 0);
            undigits(&r, p)
        };
        let slow_pow = |a: u32, mut e: u32| -> u32 {
            let mut base = a;
            let mut acc = 1;
            while e > 0 {
                if e & 1 == 1 {
                    acc = slow_mul(acc, base);
                }
                base = slow_mul(base, base);
                e >>= 1;
            }
            acc
        };

        let order = q - 1;
        let factors = distinct_prime_factors(order);
        let primitive = if q == 2 {
            1
        } else {
            (2..q)
                .find(|&g| factors.iter().all(|&r| slow_pow(g, order / r) != 1))
                .expect("the multiplicative group of a finite field is cyclic")
        };

        let mut exp = Vec::with_capacity(2 * order as usize);
        let mut log = vec![0u32; q as usize];
        let mut acc = 1u32;
        for i in 0..order {
            exp.push(acc);
            log[acc as usize] = i;
            acc = slow_mul(acc, primitive);
        }
        exp.extend_from_within(..);

        Ok(Field {
            p,
            k,
            q,
            modulus,
            primitive: FieldElement(primitive),
            exp,
            log,
        })
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    /// Monic irreducible modulus, little-endian (`[0, 1]` for prime fields).
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }

    pub fn element(&self, encoding: u32) -> FieldElement {
        assert!(encoding < self.q, "encoding {encoding} out of range for GF({})", self.q);
        FieldElement(encoding)
    }

    /// Reduces an integer into the prime subfield.
    pub fn from_int(&self, n: i64) -> FieldElement {
        FieldElement(n.rem_euclid(self.p as i64) as u32)
    }

    /// Little-endian polynomial coefficients of `a`, each in `[0, p)`.
    pub fn coeffs(&self, a: FieldElement) -> Vec<u32> {
        digits(a.0, self.p, self.k)
    }

    pub fn from_coeffs(&self, coeffs: &[u32]) -> FieldElement {
        assert!(coeffs.len() <= self.k as usize && coeffs.iter().all(|&c| c < self.p));
        FieldElement(undigits(coeffs, self.p))
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if self.k == 1 {
            return FieldElement((a.0 + b.0) % self.p);
        }
        if self.p == 2 {
            return FieldElement(a.0 ^ b.0);
        }
        let (mut x, mut y) = (a.0, b.0);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.k {
            out += ((x % self.p + y % self.p) % self.p) * place;
            x /= self.p;
            y /= self.p;
            place *= self.p;
        }
        FieldElement(out)
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if self.k == 1 {
            return FieldElement((self.p - a.0) % self.p);
        }
        if self.p == 2 {
            return a;
        }
        let mut x = a.0;
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.k {
            out += ((self.p - x % self.p) % self.p) * place;
            x /= self.p;
            place *= self.p;
        }
        FieldElement(out)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        let e = self.log[a.0 as usize] + self.log[b.0 as usize];
        FieldElement(self.exp[e as usize])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        let order = self.q - 1;
        let e = (order - self.log[a.0 as usize]) % order;
        Ok(FieldElement(self.exp[e as usize]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        if e == 0 {
            return FieldElement::ONE;
        }
        if a.0 == 0 {
            return FieldElement::ZERO;
        }
        let order = (self.q - 1) as u64;
        let idx = (self.log[a.0 as usize] as u64 * (e % order)) % order;
        FieldElement(self.exp[idx as usize])
    }

    /// True iff `a = b^2` for some `b`; zero counts as a square.
    pub fn is_square(&self, a: FieldElement) -> bool {
        a.0 == 0 || self.p == 2 || self.log[a.0 as usize] % 2 == 0
    }

    /// The nonzero element of least encoding that generates the multiplicative group.
    pub fn primitive_root(&self) -> FieldElement {
        self.primitive
    }

    /// Multiplicative order of a nonzero element.
    pub fn multiplicative_order(&self, a: FieldElement) -> Option<u32> {
        if a.0 == 0 {
            return None;
        }
        let order = self.q - 1;
        let l = self.log[a.0 as usize];
        Some(order / gcd(order, l))
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Schoolbook multiplication on coefficient vectors, independent of the log tables.
    fn oracle_mul(f: &Field, a: FieldElement, b: FieldElement) -> FieldElement {
        let r = poly_mul_mod(&f.coeffs(a), &f.coeffs(b), f.modulus(), f.characteristic());
        let mut r = r;
        r.resize(f.degree() as usize, 0);
        f.from_coeffs(&r)
    }

    #[test]
    fn prime_field_construction() {
        let f = Field::new(7).unwrap();
        assert_eq!((f.characteristic(), f.degree(), f.order()), (7, 1, 7));
    }

    #[test]
    fn rejects_non_prime_powers() {
        assert_eq!(Field::new(6).unwrap_err(), FieldError::NotPrimePower(6));
        assert_eq!(Field::new(12).unwrap_err(), FieldError::NotPrimePower(12));
        assert!(matches!(Field::new(1), Err(FieldError::OrderOutOfRange(1))));
    }

    #[test]
    fn gf9_modulus_is_least_irreducible_quadratic() {
        let f = Field::new(9).unwrap();
        assert_eq!(f.degree(), 2);
        // Exhaustive over the 9 monic quadratics x^2 + bx + c: irreducible iff no root.
        let irreducible: Vec<u32> = (0..9)
            .filter(|&low| {
                let (c, b) = (low % 3, low / 3);
                (0..3).all(|x| (x * x + b * x + c) % 3 != 0)
            })
            .collect();
        assert_eq!(irreducible, vec![1, 5, 8]);
        assert_eq!(f.modulus(), &[1, 0, 1]);
    }

    #[test]
    fn small_products_and_inverses() {
        let f = Field::new(7).unwrap();
        assert_eq!(f.mul(FieldElement(3), FieldElement(5)), FieldElement(1));
        assert_eq!(f.inv(FieldElement(3)).unwrap(), FieldElement(5));
        assert_eq!(f.inv(FieldElement::ZERO), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn extension_field_axioms_exhaustive() {
        for q in [4u32, 8, 9, 16, 25, 27] {
            let f = Field::new(q).unwrap();
            for a in f.elements() {
                if !a.is_zero() {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE, "q={q} a={a}");
                }
                assert_eq!(f.add(a, f.neg(a)), FieldElement::ZERO);
                for b in f.elements() {
                    assert_eq!(f.mul(a, b), oracle_mul(&f, a, b), "q={q} {a}*{b}");
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.sub(f.add(a, b), b), a);
                }
            }
        }
    }

    #[test]
    fn squares_match_enumeration() {
        let f5 = Field::new(5).unwrap();
        assert!(f5.is_square(FieldElement(4)));
        assert!(!f5.is_square(FieldElement(2)));
        for q in [5u32, 9, 13, 25, 27, 49] {
            let f = Field::new(q).unwrap();
            let mut squares = vec![false; q as usize];
            for b in f.elements() {
                squares[f.mul(b, b).0 as usize] = true;
            }
            for a in f.elements() {
                assert_eq!(f.is_square(a), squares[a.0 as usize], "q={q} a={a}");
            }
            let nonzero = squares.iter().skip(1).filter(|&&s| s).count();
            assert_eq!(nonzero as u32, (q - 1) / 2);
        }
    }

    #[test]
    fn gf13_has_six_nonzero_squares() {
        let f = Field::new(13).unwrap();
        let count = (1..13).filter(|&a| f.is_square(FieldElement(a))).count();
        assert_eq!(count, 6);
    }

    #[test]
    fn primitive_roots_are_least_generators() {
        for (q, expect) in [(5u32, 2u32), (13, 2), (7, 3)] {
            let f = Field::new(q).unwrap();
            assert_eq!(f.primitive_root(), FieldElement(expect));
        }
        // Brute-force orbit check for every field up to 256.
        for q in (3..=256).filter(|&q| is_prime_power(q)) {
            let f = Field::new(q).unwrap();
            let z = f.primitive_root();
            let mut seen = vec![false; q as usize];
            let mut acc = FieldElement::ONE;
            for _ in 0..q - 1 {
                acc = oracle_mul(&f, acc, z);
                seen[acc.0 as usize] = true;
            }
            assert!(seen.iter().skip(1).all(|&s| s), "q={q}");
            for g in 2..z.0 {
                assert_ne!(f.multiplicative_order(FieldElement(g)), Some(q - 1));
            }
        }
    }

    #[test]
    fn frobenius_is_additive() {
        for q in [8u32, 9, 25, 27, 125, 243] {
            let f = Field::new(q).unwrap();
            let p = f.characteristic() as u64;
            for a in f.elements().step_by(3) {
                for b in f.elements().step_by(5) {
                    let lhs = f.pow(f.add(a, b), p);
                    let rhs = f.add(f.pow(a, p), f.pow(b, p));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn supports_largest_order() {
        let f = Field::new(MAX_ORDER).unwrap();
        assert_eq!((f.characteristic(), f.degree()), (2, 16));
        let a = FieldElement(12345);
        assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
    }

    proptest::proptest! {
        #[test]
        fn encoding_round_trips(q_idx in 0usize..8, raw in 0u32..65536) {
            let q = [4u32, 8, 9, 25, 27, 49, 121, 243][q_idx];
            let f = Field::new(q).unwrap();
            let a = FieldElement(raw % q);
            proptest::prop_assert_eq!(f.from_coeffs(&f.coeffs(a)), a);
        }
    }
}
