//! Exact coefficient arithmetic: arbitrary-precision rationals, odd prime
//! fields, Bernoulli numbers, and the reduction map between the two domains.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive
/// denominator (the `num-rational` type maintains both invariants).
pub type BigRational = num_rational::BigRational;

/// Convenience constructor from an integer pair; panics on zero denominator.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Returns true for odd primes. Trial division; moduli here are small.
pub fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Element of F_p for an odd prime p, stored as the least residue.
///
/// Arithmetic between elements of different fields is a programming error
/// and panics; series-level operations check domains before descending here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpElement {
    residue: u64,
    p: u64,
}

// Arithmetic stays inherent rather than via std::ops: every element carries
// its modulus at runtime and mixing moduli must assert, which the operator
// traits cannot express without hiding the check.
#[allow(clippy::should_implement_trait)]
impl FpElement {
    pub fn new(value: i64, p: u64) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::InvalidModulus(p));
        }
        Ok(Self::reduce(value, p))
    }

    /// Reduces an integer into [0, p). The caller vouches for p.
    pub fn reduce(value: i64, p: u64) -> Self {
        let m = value.rem_euclid(p as i64) as u64;
        FpElement { residue: m, p }
    }

    pub fn zero(p: u64) -> Self {
        FpElement { residue: 0, p }
    }

    pub fn one(p: u64) -> Self {
        FpElement { residue: 1, p }
    }

    pub fn residue(&self) -> u64 {
        self.residue
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.residue == 0
    }

    fn check(self, other: Self) -> Self {
        assert_eq!(self.p, other.p, "mixed prime fields: {} vs {}", self.p, other.p);
        other
    }

    pub fn add(self, other: Self) -> Self {
        let other = self.check(other);
        FpElement { residue: (self.residue + other.residue) % self.p, p: self.p }
    }

    pub fn sub(self, other: Self) -> Self {
        let other = self.check(other);
        FpElement { residue: (self.p + self.residue - other.residue) % self.p, p: self.p }
    }

    pub fn mul(self, other: Self) -> Self {
        let other = self.check(other);
        let wide = self.residue as u128 * other.residue as u128;
        FpElement { residue: (wide % self.p as u128) as u64, p: self.p }
    }

    pub fn neg(self) -> Self {
        FpElement { residue: (self.p - self.residue) % self.p, p: self.p }
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = FpElement::one(self.p);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; zero has none.
    pub fn inv(self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NoSolution(format!("0 has no inverse in F_{}", self.p)));
        }
        Ok(self.pow(self.p - 2))
    }
}

impl std::fmt::Display for FpElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.residue)
    }
}

/// The two coefficient domains a series can live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffDomain {
    ExactRational,
    PrimeField(u64),
}

impl CoeffDomain {
    pub fn prime_field(p: u64) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::InvalidModulus(p));
        }
        Ok(CoeffDomain::PrimeField(p))
    }

    /// Characteristic, if positive.
    pub fn characteristic(&self) -> Option<u64> {
        match self {
            CoeffDomain::ExactRational => None,
            CoeffDomain::PrimeField(p) => Some(*p),
        }
    }
}

impl std::fmt::Display for CoeffDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoeffDomain::ExactRational => write!(f, "Q"),
            CoeffDomain::PrimeField(p) => write!(f, "Fp:{p}"),
        }
    }
}

/// A single series coefficient: exact rational or prime-field element.
///
/// Mixing domains inside one series is impossible by construction; the
/// arithmetic here therefore panics on a mismatch rather than returning an
/// error the caller could never act on.
#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    Rational(BigRational),
    Fp(FpElement),
}

impl Coeff {
    pub fn domain(&self) -> CoeffDomain {
        match self {
            Coeff::Rational(_) => CoeffDomain::ExactRational,
            Coeff::Fp(x) => CoeffDomain::PrimeField(x.modulus()),
        }
    }

    pub fn zero(domain: CoeffDomain) -> Self {
        match domain {
            CoeffDomain::ExactRational => Coeff::Rational(BigRational::zero()),
            CoeffDomain::PrimeField(p) => Coeff::Fp(FpElement::zero(p)),
        }
    }

    pub fn one(domain: CoeffDomain) -> Self {
        match domain {
            CoeffDomain::ExactRational => Coeff::Rational(BigRational::one()),
            CoeffDomain::PrimeField(p) => Coeff::Fp(FpElement::one(p)),
        }
    }

    pub fn from_integer(n: i64, domain: CoeffDomain) -> Self {
        match domain {
            CoeffDomain::ExactRational => Coeff::Rational(BigRational::from(BigInt::from(n))),
            CoeffDomain::PrimeField(p) => Coeff::Fp(FpElement::reduce(n, p)),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Rational(x) => x.is_zero(),
            Coeff::Fp(x) => x.is_zero(),
        }
    }

    fn pair<'a>(&'a self, other: &'a Coeff) -> (&'a Coeff, &'a Coeff) {
        assert_eq!(self.domain(), other.domain(), "mixed coefficient domains");
        (self, other)
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Rational(a), Coeff::Rational(b)) => Coeff::Rational(a + b),
            (Coeff::Fp(a), Coeff::Fp(b)) => Coeff::Fp(a.add(*b)),
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Rational(a), Coeff::Rational(b)) => Coeff::Rational(a - b),
            (Coeff::Fp(a), Coeff::Fp(b)) => Coeff::Fp(a.sub(*b)),
            _ => unreachable!(),
        }
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match self.pair(other) {
            (Coeff::Rational(a), Coeff::Rational(b)) => Coeff::Rational(a * b),
            (Coeff::Fp(a), Coeff::Fp(b)) => Coeff::Fp(a.mul(*b)),
            _ => unreachable!(),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Rational(a) => Coeff::Rational(-a),
            Coeff::Fp(a) => Coeff::Fp(a.neg()),
        }
    }

    pub fn inv(&self) -> Result<Coeff> {
        match self {
            Coeff::Rational(a) => {
                if a.is_zero() {
                    Err(Error::NoSolution("0 has no inverse".into()))
                } else {
                    Ok(Coeff::Rational(a.recip()))
                }
            }
            Coeff::Fp(a) => Ok(Coeff::Fp(a.inv()?)),
        }
    }

    /// Multiplies by an integer scalar (Hecke weights, matrix entries).
    pub fn scale_int(&self, n: i64) -> Coeff {
        self.mul(&Coeff::from_integer(n, self.domain()))
    }

    /// Multiplies by an exact rational; in F_p the fraction is reduced first
    /// and fails if p divides the denominator.
    pub fn scale_rational(&self, r: &BigRational) -> Result<Coeff> {
        match self {
            Coeff::Rational(a) => Ok(Coeff::Rational(a * r)),
            Coeff::Fp(a) => {
                let rp = reduce_mod_p(r, a.modulus())?;
                Ok(Coeff::Fp(a.mul(rp)))
            }
        }
    }

    /// Canonical text rendering used by the file format: `num/den` in lowest
    /// terms for rationals, the least residue for prime fields.
    pub fn render(&self) -> String {
        match self {
            Coeff::Rational(a) => format!("{}/{}", a.numer(), a.denom()),
            Coeff::Fp(a) => a.to_string(),
        }
    }

    /// Parses what `render` produces, for the given domain.
    pub fn parse(text: &str, domain: CoeffDomain) -> Option<Coeff> {
        match domain {
            CoeffDomain::ExactRational => {
                let (n, d) = text.split_once('/')?;
                let n: BigInt = n.parse().ok()?;
                let d: BigInt = d.parse().ok()?;
                if d.is_zero() || !d.is_positive() {
                    return None;
                }
                Some(Coeff::Rational(BigRational::new(n, d)))
            }
            CoeffDomain::PrimeField(p) => {
                let r: u64 = text.parse().ok()?;
                if r >= p {
                    return None;
                }
                Some(Coeff::Fp(FpElement::reduce(r as i64, p)))
            }
        }
    }
}

/// Bernoulli number B_n with the convention B_1 = -1/2, computed from the
/// defining recurrence sum_{k=0}^{n} C(n+1,k) B_k = 0.
///
/// Odd indices above 1 are rejected rather than silently returned as zero.
pub fn bernoulli(n: u32) -> Result<BigRational> {
    if n % 2 == 1 && n > 1 {
        return Err(Error::OddBernoulliIndex(n));
    }
    let table = bernoulli_table(n);
    Ok(table[n as usize].clone())
}

/// B_0 .. B_n by the defining recurrence; quadratic in n, exact throughout.
fn bernoulli_table(n: u32) -> Vec<BigRational> {
    let n = n as usize;
    let mut b: Vec<BigRational> = Vec::with_capacity(n + 1);
    b.push(BigRational::one());
    for m in 1..=n {
        // sum_{k=0}^{m-1} C(m+1, k) B_k, then B_m = -sum / (m+1)
        let mut sum = BigRational::zero();
        let mut binom = BigInt::one(); // C(m+1, 0)
        for (k, bk) in b.iter().enumerate().take(m) {
            if !bk.is_zero() {
                sum += bk * BigRational::from(binom.clone());
            }
            // C(m+1, k+1) from C(m+1, k)
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        let divisor = BigRational::from(BigInt::from(m as i64 + 1));
        b.push(-sum / divisor);
    }
    b
}

/// Reduces a rational mod p; fails with `NonIntegralAtP` when p divides the
/// denominator (the von Staudt-Clausen obstruction in practice).
pub fn reduce_mod_p(x: &BigRational, p: u64) -> Result<FpElement> {
    if !is_odd_prime(p) {
        return Err(Error::InvalidModulus(p));
    }
    let pb = BigInt::from(p);
    let den = x.denom() % &pb;
    if den.is_zero() {
        return Err(Error::NonIntegralAtP { p, location: String::new() });
    }
    let num = x.numer() % &pb;
    let to_fp = |r: &BigInt| -> FpElement {
        let mut r = r.clone() % &pb;
        if r.is_negative() {
            r += &pb;
        }
        let digits = r.to_u64_digits().1;
        FpElement { residue: *digits.first().unwrap_or(&0), p }
    };
    let den_inv = to_fp(&den).inv()?;
    Ok(to_fp(&num).mul(den_inv))
}
