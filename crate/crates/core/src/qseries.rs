//! Sparse truncated q-expansions indexed by half-integral forms.
//!
//! Monomial convention: q^T = prod_i q_ii^{T_ii} * prod_{i<j} q_ij^{2 T_ij},
//! so every exponent actually stored is an entry of the scaled integer
//! matrix M = 2dT divided by 2d on the diagonal and by d off it. The trace
//! of T is additive under multiplication, hence truncating every series to
//! trace(T) <= B makes ring operations exact below B.
//!
//! Weight is carried as metadata with denominator 1 or 2 and is enforced on
//! addition; inhomogeneous sums must go through `add_inhomogeneous`, and
//! genuinely graded data is better kept as explicit lists of homogeneous
//! series. Zero coefficients are never stored.
//!
//! The module also owns the `SMFP v1` text format: one header line, then
//! one `form ; coefficient` line per stored key in canonical order, LF
//! endings, no trailing whitespace.

use std::collections::BTreeMap;

use crate::coeff::{reduce_mod_p, Coeff, CoeffDomain};
use crate::error::{Error, Result};
use crate::quadform::{HalfIntegralForm, UnimodularMatrix};

/// Series weight: a rational with denominator 1 or 2, stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight {
    twice: i64,
}

impl Weight {
    pub const ZERO: Weight = Weight { twice: 0 };

    pub fn integer(k: i64) -> Self {
        Weight { twice: 2 * k }
    }

    /// Weight num/2 for odd num (half-integral weights, theta constants).
    pub fn half(num: i64) -> Self {
        Weight { twice: num }
    }

    pub fn twice(&self) -> i64 {
        self.twice
    }

    /// The weight as an integer, when it is one.
    pub fn as_integer(&self) -> Option<i64> {
        (self.twice % 2 == 0).then_some(self.twice / 2)
    }

    pub fn add(&self, other: Weight) -> Weight {
        Weight { twice: self.twice + other.twice }
    }

    pub fn scale_by(&self, n: i64) -> Weight {
        Weight { twice: self.twice * n }
    }

    /// Canonical `num/den` rendering with den in {1, 2}.
    pub fn render(&self) -> String {
        if self.twice % 2 == 0 {
            format!("{}/1", self.twice / 2)
        } else {
            format!("{}/2", self.twice)
        }
    }

    pub fn parse(text: &str) -> Option<Weight> {
        let (num, den) = text.split_once('/')?;
        let num: i64 = num.parse().ok()?;
        match den {
            "1" => Some(Weight::integer(num)),
            "2" => Some(Weight { twice: num }),
            _ => None,
        }
    }
}

impl std::fmt::Display for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// A scalar q-expansion truncated at a trace bound.
#[derive(Debug, Clone, PartialEq)]
pub struct QSeries {
    genus: usize,
    domain: CoeffDomain,
    weight: Weight,
    bound: i64,
    scale: i64,
    coeffs: BTreeMap<HalfIntegralForm, Coeff>,
}

impl QSeries {
    pub fn new(
        genus: usize,
        domain: CoeffDomain,
        weight: Weight,
        bound: i64,
        scale: i64,
    ) -> Result<Self> {
        if genus == 0 {
            return Err(Error::Unsupported("genus must be at least 1".into()));
        }
        if bound < 0 {
            return Err(Error::Unsupported("negative trace bound".into()));
        }
        // Scale validity is owned by the form type.
        let _probe = HalfIntegralForm::new(genus, scale, &vec![0; genus * genus])?;
        Ok(QSeries { genus, domain, weight, bound, scale, coeffs: BTreeMap::new() })
    }

    /// The constant series with the given value at T = 0.
    pub fn constant(
        genus: usize,
        domain: CoeffDomain,
        weight: Weight,
        bound: i64,
        scale: i64,
        value: Coeff,
    ) -> Result<Self> {
        let mut s = QSeries::new(genus, domain, weight, bound, scale)?;
        s.insert(HalfIntegralForm::zero(genus, scale), value)?;
        Ok(s)
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn domain(&self) -> CoeffDomain {
        self.domain
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Stored keys and coefficients in canonical (trace, lex) order.
    pub fn iter(&self) -> impl Iterator<Item = (&HalfIntegralForm, &Coeff)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &HalfIntegralForm> {
        self.coeffs.keys()
    }

    /// Coefficient at a key, zero when absent.
    pub fn coefficient(&self, t: &HalfIntegralForm) -> Coeff {
        self.coeffs.get(t).cloned().unwrap_or_else(|| Coeff::zero(self.domain))
    }

    /// Genus-1 convenience: coefficient of q^n.
    pub fn coefficient_g1(&self, n: i64) -> Coeff {
        self.coefficient(&HalfIntegralForm::genus1(n, self.scale))
    }

    /// Inserts a coefficient, enforcing every series invariant. Zero values
    /// erase the key instead of being stored.
    pub fn insert(&mut self, t: HalfIntegralForm, c: Coeff) -> Result<()> {
        if t.genus() != self.genus {
            return Err(Error::GenusMismatch { left: self.genus, right: t.genus() });
        }
        if t.scale() != self.scale {
            return Err(Error::InvalidForm(format!(
                "key at scale {} inserted into series at scale {}",
                t.scale(),
                self.scale
            )));
        }
        if c.domain() != self.domain {
            return Err(Error::DomainMismatch {
                left: self.domain.to_string(),
                right: c.domain().to_string(),
            });
        }
        if !t.within_trace(self.bound) {
            return Err(Error::InvalidForm(format!(
                "key {} exceeds trace bound {}",
                t.render(),
                self.bound
            )));
        }
        if c.is_zero() {
            self.coeffs.remove(&t);
        } else {
            self.coeffs.insert(t, c);
        }
        Ok(())
    }

    /// Adds into a key (convolution accumulator); drops the key when the
    /// sum cancels to zero.
    fn accumulate(&mut self, t: HalfIntegralForm, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(t) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_compatible(&self, other: &QSeries) -> Result<()> {
        if self.genus != other.genus {
            return Err(Error::GenusMismatch { left: self.genus, right: other.genus });
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch {
                left: self.domain.to_string(),
                right: other.domain.to_string(),
            });
        }
        Ok(())
    }

    /// Rewrites the series at a larger or equal scale (semantic identity).
    pub fn rescaled(&self, new_scale: i64) -> Result<QSeries> {
        if new_scale == self.scale {
            return Ok(self.clone());
        }
        let mut out = QSeries::new(self.genus, self.domain, self.weight, self.bound, new_scale)?;
        for (t, c) in &self.coeffs {
            out.coeffs.insert(t.at_scale(new_scale)?, c.clone());
        }
        Ok(out)
    }

    /// Rewrites at the smallest scale representing every stored key.
    pub fn normalize_scale(&self) -> QSeries {
        let d = self.coeffs.keys().map(|t| t.minimal_scale()).max().unwrap_or(1);
        if d >= self.scale {
            return self.clone();
        }
        self.rescaled(d).expect("minimal scale is always reachable")
    }

    /// Restricts to trace(T) <= bound (never raises the bound).
    pub fn truncate(&self, bound: i64) -> QSeries {
        let bound = bound.min(self.bound);
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(t, _)| t.within_trace(bound))
            .map(|(t, c)| (t.clone(), c.clone()))
            .collect();
        QSeries { bound, coeffs, ..self.clone() }
    }

    fn merge(&self, other: &QSeries, check_weight: bool) -> Result<QSeries> {
        self.check_compatible(other)?;
        if check_weight && self.weight != other.weight {
            return Err(Error::WeightMismatch {
                left: self.weight.render(),
                right: other.weight.render(),
            });
        }
        let scale = self.scale.max(other.scale);
        let a = self.rescaled(scale)?;
        let b = other.rescaled(scale)?;
        let bound = a.bound.min(b.bound);
        let mut out = QSeries::new(self.genus, self.domain, self.weight, bound, scale)?;
        for (t, c) in a.coeffs.into_iter().chain(b.coeffs) {
            if t.within_trace(bound) {
                out.accumulate(t, c);
            }
        }
        Ok(out)
    }

    /// Sum of two series of equal weight; the result keeps the smaller
    /// bound and the coarser common scale.
    pub fn add(&self, other: &QSeries) -> Result<QSeries> {
        self.merge(other, true)
    }

    /// Sum without the weight check, for deliberately inhomogeneous data
    /// such as (weight p-1 constant) minus (weight 0 constant). The left
    /// operand's weight tag is kept and is not meaningful.
    pub fn add_inhomogeneous(&self, other: &QSeries) -> Result<QSeries> {
        self.merge(other, false)
    }

    /// Multiplies every coefficient by a constant from the same domain.
    pub fn scaled(&self, c: &Coeff) -> Result<QSeries> {
        if c.domain() != self.domain {
            return Err(Error::DomainMismatch {
                left: self.domain.to_string(),
                right: c.domain().to_string(),
            });
        }
        let mut out = QSeries { coeffs: BTreeMap::new(), ..self.clone() };
        if c.is_zero() {
            return Ok(out);
        }
        for (t, v) in &self.coeffs {
            out.coeffs.insert(t.clone(), v.mul(c));
        }
        Ok(out)
    }

    pub fn scaled_int(&self, n: i64) -> QSeries {
        self.scaled(&Coeff::from_integer(n, self.domain))
            .expect("integer scalar is always in-domain")
    }

    pub fn neg(&self) -> QSeries {
        self.scaled_int(-1)
    }

    pub fn sub(&self, other: &QSeries) -> Result<QSeries> {
        self.add(&other.neg())
    }

    /// Product; weights add, bounds take the minimum, scales the lcm.
    /// Truncation by trace keeps every kept coefficient exact.
    pub fn mul(&self, other: &QSeries) -> Result<QSeries> {
        self.check_compatible(other)?;
        let scale = self.scale.max(other.scale);
        let a = self.rescaled(scale)?;
        let b = other.rescaled(scale)?;
        let bound = a.bound.min(b.bound);
        let cap = 2 * scale * bound;
        let mut out =
            QSeries::new(self.genus, self.domain, self.weight.add(other.weight), bound, scale)?;
        // BTreeMap iterates by ascending trace, so both loops can stop early.
        for (t1, c1) in &a.coeffs {
            let tr1 = t1.trace_scaled();
            if tr1 > cap {
                break;
            }
            for (t2, c2) in &b.coeffs {
                if tr1 + t2.trace_scaled() > cap {
                    break;
                }
                out.accumulate(t1.add_key(t2), c1.mul(c2));
            }
        }
        Ok(out)
    }

    /// n-th power for n >= 1 by repeated multiplication; with truncation the
    /// dense-times-small pattern beats repeated squaring.
    pub fn pow(&self, n: u32) -> Result<QSeries> {
        if n == 0 {
            return Err(Error::Unsupported("pow expects a positive exponent".into()));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Reduction mod p of an exact-rational series; names the offending key
    /// when a denominator is divisible by p.
    pub fn reduce_series(&self, p: u64) -> Result<QSeries> {
        if self.domain != CoeffDomain::ExactRational {
            return Err(Error::DomainMismatch { left: "Q".into(), right: self.domain.to_string() });
        }
        let domain = CoeffDomain::prime_field(p)?;
        let mut out = QSeries::new(self.genus, domain, self.weight, self.bound, self.scale)?;
        for (t, c) in &self.coeffs {
            let Coeff::Rational(x) = c else { unreachable!() };
            let r = reduce_mod_p(x, p).map_err(|e| match e {
                Error::NonIntegralAtP { p, .. } => {
                    Error::NonIntegralAtP { p, location: t.render() }
                }
                other => other,
            })?;
            if !r.is_zero() {
                out.coeffs.insert(t.clone(), Coeff::Fp(r));
            }
        }
        Ok(out)
    }

    /// Exact comparison up to a trace bound; errors when either side is not
    /// stored that far. Scales are aligned first, so the same series stored
    /// at d = 1 and d = 2 compare equal.
    pub fn eq_upto(&self, other: &QSeries, bound: i64) -> Result<bool> {
        self.check_compatible(other)?;
        let available = self.bound.min(other.bound);
        if bound > available {
            return Err(Error::InsufficientPrecision { needed: bound, available });
        }
        let scale = self.scale.max(other.scale);
        let a = self.rescaled(scale)?.truncate(bound);
        let b = other.rescaled(scale)?.truncate(bound);
        Ok(a.coeffs == b.coeffs)
    }

    /// First stored nonzero coefficient in canonical order.
    pub fn leading(&self) -> Option<(&HalfIntegralForm, &Coeff)> {
        self.coeffs.iter().next()
    }

    /// Header plus one row per key; the exact `SMFP v1` text format.
    pub fn serialize(&self) -> String {
        let mut out = format!(
            "SMFP v1 kind=scalar g={} domain={} k={} B={} d={}\n",
            self.genus,
            self.domain,
            self.weight.render(),
            self.bound,
            self.scale
        );
        for (t, c) in &self.coeffs {
            out.push_str(&format!("{} ; {}\n", t.render(), c.render()));
        }
        out
    }

    pub fn deserialize(text: &str) -> Result<QSeries> {
        match deserialize(text)? {
            SeriesFile::Scalar(s) => Ok(s),
            SeriesFile::Matrix(_) => Err(Error::ParseError {
                line: 1,
                message: "expected kind=scalar, found kind=matrix".into(),
            }),
        }
    }
}

/// Symmetric g x g matrix over F_p, the coefficient type of matrix series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    genus: usize,
    p: u64,
    /// Upper triangle, row-major, least residues.
    upper: Vec<u64>,
}

impl FpMatrix {
    pub fn zero(genus: usize, p: u64) -> Self {
        FpMatrix { genus, p, upper: vec![0; genus * (genus + 1) / 2] }
    }

    /// Builds from integer entries of the upper triangle, reducing mod p.
    pub fn from_upper(genus: usize, p: u64, entries: &[i64]) -> Result<Self> {
        if entries.len() != genus * (genus + 1) / 2 {
            return Err(Error::InvalidForm("wrong upper-triangle length".into()));
        }
        let upper = entries.iter().map(|&x| x.rem_euclid(p as i64) as u64).collect();
        Ok(FpMatrix { genus, p, upper })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.genus - i * (i + 1) / 2 + j
    }

    pub fn entry(&self, i: usize, j: usize) -> u64 {
        self.upper[self.index(i, j)]
    }

    pub fn upper_triangle(&self) -> &[u64] {
        &self.upper
    }

    pub fn is_zero(&self) -> bool {
        self.upper.iter().all(|&x| x == 0)
    }

    pub fn add(&self, other: &FpMatrix) -> FpMatrix {
        assert_eq!((self.genus, self.p), (other.genus, other.p));
        let upper = self.upper.iter().zip(&other.upper).map(|(a, b)| (a + b) % self.p).collect();
        FpMatrix { genus: self.genus, p: self.p, upper }
    }

    pub fn scale(&self, s: u64) -> FpMatrix {
        let upper = self.upper.iter().map(|&x| x * (s % self.p) % self.p).collect();
        FpMatrix { genus: self.genus, p: self.p, upper }
    }

    /// The substituted matrix U^t A U with U reduced mod p; symmetric in,
    /// symmetric out.
    pub fn conjugate(&self, u: &UnimodularMatrix) -> FpMatrix {
        assert_eq!(self.genus, u.genus());
        let g = self.genus;
        let p = self.p as i128;
        let ue: Vec<i128> = u.entries().iter().map(|&x| (x as i128).rem_euclid(p)).collect();
        let a: Vec<i128> = {
            let mut full = vec![0i128; g * g];
            for i in 0..g {
                for j in 0..g {
                    full[i * g + j] = self.entry(i, j) as i128;
                }
            }
            full
        };
        let mut au = vec![0i128; g * g];
        for i in 0..g {
            for j in 0..g {
                au[i * g + j] = (0..g).map(|k| a[i * g + k] * ue[k * g + j] % p).sum::<i128>() % p;
            }
        }
        let mut upper = Vec::with_capacity(g * (g + 1) / 2);
        for i in 0..g {
            for j in i..g {
                let v = (0..g).map(|k| ue[k * g + i] * au[k * g + j] % p).sum::<i128>();
                upper.push(v.rem_euclid(p) as u64);
            }
        }
        FpMatrix { genus: g, p: self.p, upper }
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.upper.iter().map(|x| x.to_string()).collect();
        parts.join(",")
    }

    pub fn parse(text: &str, genus: usize, p: u64) -> Option<FpMatrix> {
        let upper: Vec<u64> = text.split(',').map(|s| s.parse().ok()).collect::<Option<_>>()?;
        if upper.len() != genus * (genus + 1) / 2 || upper.iter().any(|&x| x >= p) {
            return None;
        }
        Some(FpMatrix { genus, p, upper })
    }
}

/// A q-expansion with symmetric-matrix coefficients over F_p; the shape of
/// the logarithmic-derivative data the Cartier operator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixQSeries {
    genus: usize,
    p: u64,
    bound: i64,
    scale: i64,
    coeffs: BTreeMap<HalfIntegralForm, FpMatrix>,
}

impl MatrixQSeries {
    pub fn new(genus: usize, p: u64, bound: i64, scale: i64) -> Result<Self> {
        if !crate::coeff::is_odd_prime(p) {
            return Err(Error::InvalidModulus(p));
        }
        if bound < 0 {
            return Err(Error::Unsupported("negative trace bound".into()));
        }
        let _probe = HalfIntegralForm::new(genus, scale, &vec![0; genus * genus])?;
        Ok(MatrixQSeries { genus, p, bound, scale, coeffs: BTreeMap::new() })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HalfIntegralForm, &FpMatrix)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, t: &HalfIntegralForm) -> FpMatrix {
        self.coeffs.get(t).cloned().unwrap_or_else(|| FpMatrix::zero(self.genus, self.p))
    }

    pub fn insert(&mut self, t: HalfIntegralForm, m: FpMatrix) -> Result<()> {
        if t.genus() != self.genus || m.genus() != self.genus {
            return Err(Error::GenusMismatch { left: self.genus, right: t.genus() });
        }
        if t.scale() != self.scale {
            return Err(Error::InvalidForm(format!(
                "key at scale {} inserted into series at scale {}",
                t.scale(),
                self.scale
            )));
        }
        if m.modulus() != self.p {
            return Err(Error::DomainMismatch {
                left: format!("Fp:{}", self.p),
                right: format!("Fp:{}", m.modulus()),
            });
        }
        if !t.within_trace(self.bound) {
            return Err(Error::InvalidForm(format!(
                "key {} exceeds trace bound {}",
                t.render(),
                self.bound
            )));
        }
        if m.is_zero() {
            self.coeffs.remove(&t);
        } else {
            self.coeffs.insert(t, m);
        }
        Ok(())
    }

    /// Matrix-series text format; the weight field is fixed at `0/1` since
    /// these carry a one-form role, not a modular weight.
    pub fn serialize(&self) -> String {
        let mut out = format!(
            "SMFP v1 kind=matrix g={} domain=Fp:{} k=0/1 B={} d={}\n",
            self.genus, self.p, self.bound, self.scale
        );
        for (t, m) in &self.coeffs {
            out.push_str(&format!("{} ; {}\n", t.render(), m.render()));
        }
        out
    }

    pub fn deserialize(text: &str) -> Result<MatrixQSeries> {
        match deserialize(text)? {
            SeriesFile::Matrix(s) => Ok(s),
            SeriesFile::Scalar(_) => Err(Error::ParseError {
                line: 1,
                message: "expected kind=matrix, found kind=scalar".into(),
            }),
        }
    }
}

/// Either kind of series file.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesFile {
    Scalar(QSeries),
    Matrix(MatrixQSeries),
}

impl SeriesFile {
    pub fn serialize(&self) -> String {
        match self {
            SeriesFile::Scalar(s) => s.serialize(),
            SeriesFile::Matrix(s) => s.serialize(),
        }
    }
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> Result<&'a str> {
    let parse_err = |m: String| Error::ParseError { line: 1, message: m };
    let tok = token.ok_or_else(|| parse_err(format!("missing {key}= field")))?;
    tok.strip_prefix(&format!("{key}="))
        .ok_or_else(|| parse_err(format!("expected {key}= field, found '{tok}'")))
}

/// Parses the `SMFP v1` format, dispatching on the kind field.
pub fn deserialize(text: &str) -> Result<SeriesFile> {
    let mut lines = text.lines();
    let header =
        lines.next().ok_or(Error::ParseError { line: 1, message: "empty input".into() })?;
    let mut tok = header.split_whitespace();
    let parse_err = |m: String| Error::ParseError { line: 1, message: m };
    if tok.next() != Some("SMFP") || tok.next() != Some("v1") {
        return Err(parse_err("missing SMFP v1 magic".into()));
    }
    let kind = header_field(tok.next(), "kind")?;
    let genus: usize =
        header_field(tok.next(), "g")?.parse().map_err(|_| parse_err("bad genus".into()))?;
    let domain_text = header_field(tok.next(), "domain")?;
    let domain = if domain_text == "Q" {
        CoeffDomain::ExactRational
    } else if let Some(p) = domain_text.strip_prefix("Fp:") {
        let p: u64 = p.parse().map_err(|_| parse_err("bad characteristic".into()))?;
        CoeffDomain::prime_field(p).map_err(|_| parse_err(format!("{p} is not an odd prime")))?
    } else {
        return Err(parse_err(format!("bad domain '{domain_text}'")));
    };
    let weight = Weight::parse(header_field(tok.next(), "k")?)
        .ok_or_else(|| parse_err("bad weight".into()))?;
    let bound: i64 =
        header_field(tok.next(), "B")?.parse().map_err(|_| parse_err("bad bound".into()))?;
    let scale: i64 =
        header_field(tok.next(), "d")?.parse().map_err(|_| parse_err("bad scale".into()))?;
    if let Some(extra) = tok.next() {
        return Err(parse_err(format!("unexpected token '{extra}'")));
    }

    enum Target {
        Scalar(QSeries),
        Matrix(MatrixQSeries),
    }
    let mut target = match kind {
        "scalar" => Target::Scalar(QSeries::new(genus, domain, weight, bound, scale)?),
        "matrix" => {
            let CoeffDomain::PrimeField(p) = domain else {
                return Err(parse_err("matrix series require an Fp domain".into()));
            };
            Target::Matrix(MatrixQSeries::new(genus, p, bound, scale)?)
        }
        other => return Err(parse_err(format!("unknown kind '{other}'"))),
    };

    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let row_err = |m: String| Error::ParseError { line: line_no, message: m };
        let (form_text, coeff_text) = line
            .split_once(" ; ")
            .ok_or_else(|| row_err("expected '<form> ; <coefficient>'".into()))?;
        let form =
            HalfIntegralForm::parse(form_text).map_err(|e| row_err(format!("bad form: {e}")))?;
        match &mut target {
            Target::Scalar(s) => {
                let c = Coeff::parse(coeff_text, domain)
                    .ok_or_else(|| row_err(format!("bad coefficient '{coeff_text}'")))?;
                s.insert(form, c).map_err(|e| row_err(e.to_string()))?;
            }
            Target::Matrix(s) => {
                let m = FpMatrix::parse(coeff_text, genus, s.modulus())
                    .ok_or_else(|| row_err(format!("bad matrix '{coeff_text}'")))?;
                s.insert(form, m).map_err(|e| row_err(e.to_string()))?;
            }
        }
    }
    Ok(match target {
        Target::Scalar(s) => SeriesFile::Scalar(s),
        Target::Matrix(s) => SeriesFile::Matrix(s),
    })
}

/// One Fourier-Jacobi layer of a genus-2 series: the part with fixed corner
/// index nu, holding coefficients at (t0, t1) in scaled integer units
/// (m11 = 2d*t0, m12 = 2d*t1).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSlice {
    nu: i64,
    domain: CoeffDomain,
    scale: i64,
    t0_bound: i64,
    coeffs: BTreeMap<(i64, i64), Coeff>,
}

impl JacobiSlice {
    pub fn new(nu: i64, domain: CoeffDomain, scale: i64, t0_bound: i64) -> Result<Self> {
        if nu <= 0 {
            return Err(Error::Unsupported("slice index nu must be positive".into()));
        }
        Ok(JacobiSlice { nu, domain, scale, t0_bound, coeffs: BTreeMap::new() })
    }

    pub fn nu(&self) -> i64 {
        self.nu
    }

    pub fn domain(&self) -> CoeffDomain {
        self.domain
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn t0_bound(&self) -> i64 {
        self.t0_bound
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Keys are scaled pairs (m11, m12); the underlying genus-2 form is
    /// [[m11, m12], [m12, 2d*nu]].
    pub fn iter(&self) -> impl Iterator<Item = (&(i64, i64), &Coeff)> {
        self.coeffs.iter()
    }

    pub fn insert(&mut self, m11: i64, m12: i64, c: Coeff) -> Result<()> {
        if c.domain() != self.domain {
            return Err(Error::DomainMismatch {
                left: self.domain.to_string(),
                right: c.domain().to_string(),
            });
        }
        let m22 = 2 * self.scale * self.nu;
        if m11 < 0 || m11 * m22 < m12 * m12 {
            return Err(Error::InvalidForm(format!(
                "slice key ({m11},{m12}) is not semidefinite at nu={}",
                self.nu
            )));
        }
        if m11 % 2 != 0 {
            return Err(Error::InvalidForm(format!("slice key m11={m11} is odd")));
        }
        if m11 > 2 * self.scale * self.t0_bound {
            return Err(Error::InvalidForm(format!(
                "slice key m11={m11} exceeds the t0 bound {}",
                self.t0_bound
            )));
        }
        if !c.is_zero() {
            self.coeffs.insert((m11, m12), c);
        }
        Ok(())
    }
}

/// Theta components of a Fourier-Jacobi slice: coefficients re-indexed by
/// the residue r = 2 t1 mod 2 nu and the discriminant D = 4 nu t0 - (2 t1)^2,
/// which are exactly the invariants of the upper-triangular substitution
/// orbit on slice keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaComponents {
    nu: i64,
    domain: CoeffDomain,
    components: BTreeMap<i64, BTreeMap<i64, Coeff>>,
}

impl ThetaComponents {
    pub fn new(nu: i64, domain: CoeffDomain) -> Result<Self> {
        if nu <= 0 {
            return Err(Error::Unsupported("component index nu must be positive".into()));
        }
        Ok(ThetaComponents { nu, domain, components: BTreeMap::new() })
    }

    pub fn nu(&self) -> i64 {
        self.nu
    }

    pub fn domain(&self) -> CoeffDomain {
        self.domain
    }

    pub fn insert(&mut self, r: i64, d: i64, c: Coeff) -> Result<()> {
        if !(0..2 * self.nu).contains(&r) {
            return Err(Error::InvalidForm(format!("residue {r} out of range for nu={}", self.nu)));
        }
        if d < 0 || (d + r * r) % (4 * self.nu) != 0 {
            return Err(Error::InvalidForm(format!(
                "discriminant {d} incompatible with residue {r} at nu={}",
                self.nu
            )));
        }
        if !c.is_zero() {
            self.components.entry(r).or_default().insert(d, c);
        }
        Ok(())
    }

    pub fn component(&self, r: i64) -> Option<&BTreeMap<i64, Coeff>> {
        self.components.get(&r)
    }

    pub fn residues(&self) -> impl Iterator<Item = i64> + '_ {
        self.components.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, &Coeff)> {
        self.components.iter().flat_map(|(r, by_d)| by_d.iter().map(move |(d, c)| (*r, *d, c)))
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rational;
    use proptest::prelude::*;

    fn q() -> CoeffDomain {
        CoeffDomain::ExactRational
    }

    fn fp(p: u64) -> CoeffDomain {
        CoeffDomain::prime_field(p).unwrap()
    }

    /// Genus-1 series from (exponent, numerator, denominator) triples.
    fn g1(domain: CoeffDomain, weight: i64, bound: i64, rows: &[(i64, i64, i64)]) -> QSeries {
        let mut s = QSeries::new(1, domain, Weight::integer(weight), bound, 1).unwrap();
        for &(n, num, den) in rows {
            let c = match domain {
                CoeffDomain::ExactRational => Coeff::Rational(rational(num, den)),
                CoeffDomain::PrimeField(_) => {
                    assert_eq!(den, 1);
                    Coeff::from_integer(num, domain)
                }
            };
            s.insert(HalfIntegralForm::genus1(n, 1), c).unwrap();
        }
        s
    }

    #[test]
    fn add_and_cancellation() {
        let a = g1(q(), 0, 10, &[(0, 1, 1), (1, 1, 1)]);
        let b = g1(q(), 0, 10, &[(0, 1, 1), (1, -1, 1)]);
        let sum = a.add(&b).unwrap();
        assert_eq!(sum, g1(q(), 0, 10, &[(0, 2, 1)]));
        assert_eq!(sum.len(), 1, "cancelled keys must not be stored");
    }

    #[test]
    fn weight_check_is_strict() {
        let a = g1(q(), 0, 10, &[(0, 1, 1)]);
        let b = g1(q(), 2, 10, &[(0, 1, 1)]);
        assert_eq!(a.add(&b).unwrap_err().name(), "WeightMismatch");
        // The escape hatch works and keeps the left weight tag.
        let s = a.add_inhomogeneous(&b).unwrap();
        assert_eq!(s.coefficient_g1(0), Coeff::Rational(rational(2, 1)));
    }

    #[test]
    fn square_of_one_plus_q() {
        let f = g1(q(), 0, 10, &[(0, 1, 1), (1, 1, 1)]);
        let sq = f.mul(&f).unwrap();
        assert_eq!(sq, g1(q(), 0, 10, &[(0, 1, 1), (1, 2, 1), (2, 1, 1)]));
    }

    #[test]
    fn frobenius_collapse_mod_5() {
        let f = g1(fp(5), 0, 10, &[(0, 1, 1), (1, 1, 1)]);
        let fifth = f.pow(5).unwrap();
        assert_eq!(fifth, g1(fp(5), 0, 10, &[(0, 1, 1), (5, 1, 1)]));
    }

    #[test]
    fn frobenius_support_law() {
        // pow(f, p) = sum a(T) q^{pT} for any F_p series.
        let f = g1(fp(7), 3, 21, &[(0, 2, 1), (1, 5, 1), (2, 3, 1), (3, 6, 1)]);
        let seventh = f.pow(7).unwrap();
        let mut expected = QSeries::new(1, fp(7), Weight::integer(21), 21, 1).unwrap();
        for (t, c) in f.iter() {
            let pt = t.mul_index(7);
            if pt.within_trace(21) {
                expected.insert(pt, c.clone()).unwrap();
            }
        }
        assert_eq!(seventh, expected);
    }

    #[test]
    fn genus2_single_key_product() {
        let t1 = HalfIntegralForm::new(2, 1, &[2, 1, 1, 2]).unwrap();
        let t2 = HalfIntegralForm::new(2, 1, &[2, 0, 0, 0]).unwrap();
        let mut a = QSeries::new(2, q(), Weight::integer(4), 8, 1).unwrap();
        a.insert(t1.clone(), Coeff::from_integer(3, q())).unwrap();
        let mut b = QSeries::new(2, q(), Weight::integer(6), 8, 1).unwrap();
        b.insert(t2.clone(), Coeff::from_integer(5, q())).unwrap();
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod.weight(), Weight::integer(10));
        assert_eq!(prod.coefficient(&t1.add_key(&t2)), Coeff::from_integer(15, q()));
        assert_eq!(prod.len(), 1);
    }

    #[test]
    fn bounds_take_the_minimum() {
        let a = g1(q(), 0, 10, &[(0, 1, 1), (1, 1, 1)]);
        let b = g1(q(), 0, 4, &[(0, 1, 1)]);
        assert_eq!(a.mul(&b).unwrap().bound(), 4);
        assert_eq!(a.add(&b).unwrap().bound(), 4);
    }

    #[test]
    fn eq_upto_and_precision() {
        let a = g1(q(), 0, 10, &[(1, 1, 1)]);
        let b = g1(q(), 0, 6, &[(1, 1, 1)]);
        assert!(a.eq_upto(&b, 6).unwrap());
        assert_eq!(
            a.eq_upto(&b, 8).unwrap_err(),
            Error::InsufficientPrecision { needed: 8, available: 6 }
        );
        // Differences above the comparison bound are invisible below it.
        let c = g1(q(), 0, 6, &[(1, 1, 1), (5, 9, 1)]);
        assert!(!a.eq_upto(&c, 6).unwrap());
        assert!(a.eq_upto(&c, 4).unwrap());
    }

    #[test]
    fn eq_upto_across_scales() {
        let a = g1(q(), 0, 8, &[(1, 1, 1), (2, 5, 1)]);
        let b = a.rescaled(2).unwrap();
        assert_eq!(b.scale(), 2);
        assert!(a.eq_upto(&b, 8).unwrap());
        assert_eq!(b.normalize_scale().scale(), 1);
    }

    #[test]
    fn reduce_series_names_the_key() {
        let s = g1(q(), 0, 10, &[(0, 1, 1), (3, 1, 5)]);
        let err = s.reduce_series(5).unwrap_err();
        assert_eq!(err, Error::NonIntegralAtP { p: 5, location: "1;1;6".into() });
        let ok = s.reduce_series(7).unwrap();
        // 1/5 mod 7 = 3.
        assert_eq!(ok.coefficient_g1(3), Coeff::from_integer(3, fp(7)));
    }

    #[test]
    fn serialization_golden_scalar() {
        let s = g1(q(), 4, 3, &[(0, 1, 1), (1, 240, 1), (2, -24, 1)]);
        let expected = "SMFP v1 kind=scalar g=1 domain=Q k=4/1 B=3 d=1\n\
                        1;1;0 ; 1/1\n\
                        1;1;2 ; 240/1\n\
                        1;1;4 ; -24/1\n";
        assert_eq!(s.serialize(), expected);
        let back = QSeries::deserialize(expected).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.serialize(), expected, "byte-exact round trip");
    }

    #[test]
    fn serialization_golden_matrix() {
        let mut s = MatrixQSeries::new(2, 5, 4, 1).unwrap();
        let t = HalfIntegralForm::new(2, 1, &[2, 1, 1, 2]).unwrap();
        s.insert(t, FpMatrix::from_upper(2, 5, &[1, 4, 2]).unwrap()).unwrap();
        let expected = "SMFP v1 kind=matrix g=2 domain=Fp:5 k=0/1 B=4 d=1\n\
                        2;1;2,1,2 ; 1,4,2\n";
        assert_eq!(s.serialize(), expected);
        let back = MatrixQSeries::deserialize(expected).unwrap();
        assert_eq!(back.serialize(), expected);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = QSeries::deserialize("nonsense\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 1, .. }));
        let text = "SMFP v1 kind=scalar g=1 domain=Q k=0/1 B=3 d=1\n1;1;2 ; zzz\n";
        let err = QSeries::deserialize(text).unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 2, .. }));
        let text = "SMFP v1 kind=scalar g=1 domain=Q k=0/1 B=3 d=1\n1;1;3 ; 1/1\n";
        let err = QSeries::deserialize(text).unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 2, .. }), "odd diagonal: {err}");
    }

    #[test]
    fn slice_and_component_invariants() {
        let mut slice = JacobiSlice::new(1, q(), 1, 6).unwrap();
        slice.insert(2, 1, Coeff::from_integer(4, q())).unwrap();
        assert!(slice.insert(0, 1, Coeff::from_integer(1, q())).is_err());

        let mut comps = ThetaComponents::new(1, q()).unwrap();
        comps.insert(1, 3, Coeff::from_integer(4, q())).unwrap();
        assert!(comps.insert(1, 4, Coeff::from_integer(1, q())).is_err());
        assert!(comps.insert(2, 0, Coeff::from_integer(1, q())).is_err());
        assert_eq!(comps.iter().count(), 1);
    }

    /// Strategy: a random genus-2 series over Q at bound 3.
    fn arb_series() -> impl Strategy<Value = QSeries> {
        let forms = crate::quadform::enumerate(2, 3, 1).unwrap();
        let n = forms.len();
        proptest::collection::vec((-20i64..20, 1i64..9), 0..n).prop_map(move |vals| {
            let mut s = QSeries::new(2, q(), Weight::integer(2), 3, 1).unwrap();
            for (i, (num, den)) in vals.into_iter().enumerate() {
                s.insert(forms[i].clone(), Coeff::Rational(rational(num, den))).unwrap();
            }
            s
        })
    }

    proptest! {
        #[test]
        fn serialization_round_trip(s in arb_series()) {
            let text = s.serialize();
            let back = QSeries::deserialize(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.serialize(), text);
        }

        #[test]
        fn mul_commutes(a in arb_series(), b in arb_series()) {
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        }
    }
}
