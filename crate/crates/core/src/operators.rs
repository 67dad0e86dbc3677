//! The operator calculus on q-expansions.
//!
//! Scalar operators: U (coefficient pullback a(T) -> a(pT)), V (support
//! dilation T -> pT, the expansion-level Frobenius), the Siegel corner map
//! to lower genus, and the classical genus-1 Hecke action. Matrix-series
//! operators: the Cartier map on one-form coefficients and the two theta
//! operators (multiply by det(T), multiply by T). Genus-2 slicing: the
//! Fourier-Jacobi layer extraction, its decomposition into residue and
//! discriminant components, both embeddings back, and the rank-1 lattice
//! sums f_a with their derivative identity.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Pow};

use crate::coeff::{rational, BigRational, Coeff, CoeffDomain, FpElement};
use crate::error::{Error, Result};
use crate::qseries::{FpMatrix, JacobiSlice, MatrixQSeries, QSeries, ThetaComponents, Weight};
use crate::quadform::HalfIntegralForm;

/// Audit record of one operator application: how weight labels and trace
/// bounds moved. Kept because U carries its weight label unchanged while
/// weight arithmetic downstream may reinterpret it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorLog {
    pub name: String,
    pub input_weight: Weight,
    pub output_weight: Weight,
    pub input_bound: i64,
    pub output_bound: i64,
}

impl OperatorLog {
    pub fn describe(name: &str, before: &QSeries, after: &QSeries) -> Self {
        OperatorLog {
            name: name.to_string(),
            input_weight: before.weight(),
            output_weight: after.weight(),
            input_bound: before.bound(),
            output_bound: after.bound(),
        }
    }
}

impl std::fmt::Display for OperatorLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "op={} k_in={} k_out={} B_in={} B_out={}",
            self.name,
            self.input_weight.render(),
            self.output_weight.render(),
            self.input_bound,
            self.output_bound
        )
    }
}

fn modulus_of(f: &QSeries) -> Result<u64> {
    match f.domain() {
        CoeffDomain::PrimeField(p) => Ok(p),
        CoeffDomain::ExactRational => {
            Err(Error::DomainMismatch { left: "prime field".into(), right: "Q".into() })
        }
    }
}

/// U operator: the output coefficient at T is a(pT). Exact on the bound
/// floor(B/p); the weight label is carried unchanged.
pub fn op_u(f: &QSeries) -> Result<QSeries> {
    let p = modulus_of(f)?;
    let bound = f.bound().div_euclid(p as i64);
    let mut out = QSeries::new(f.genus(), f.domain(), f.weight(), bound, f.scale())?;
    for (t, c) in f.iter() {
        if let Some(s) = t.div_index(p) {
            if s.within_trace(bound) {
                out.insert(s, c.clone())?;
            }
        }
    }
    Ok(out)
}

/// V operator: moves support T -> pT and multiplies the weight by p. Over
/// F_p this equals the p-th power, which the tests pin down.
pub fn op_v(f: &QSeries) -> Result<QSeries> {
    let p = modulus_of(f)?;
    let bound = p as i64 * f.bound();
    let mut out =
        QSeries::new(f.genus(), f.domain(), f.weight().scale_by(p as i64), bound, f.scale())?;
    for (t, c) in f.iter() {
        out.insert(t.mul_index(p), c.clone())?;
    }
    Ok(out)
}

/// Siegel corner operator to genus g-1: keeps exactly the coefficients at
/// indices whose last diagonal entry vanishes (semidefiniteness then forces
/// the whole last row to vanish) and drops that row and column.
pub fn op_phi(f: &QSeries) -> Result<QSeries> {
    if f.genus() < 2 {
        return Err(Error::Unsupported("the corner operator needs genus at least 2".into()));
    }
    let mut out = QSeries::new(f.genus() - 1, f.domain(), f.weight(), f.bound(), f.scale())?;
    for (t, c) in f.iter() {
        if let Some(s) = t.corner_restrict() {
            out.insert(s, c.clone())?;
        }
    }
    Ok(out)
}

fn is_prime(n: u64) -> bool {
    n == 2 || crate::coeff::is_odd_prime(n)
}

/// l^e in the given domain, with negative exponents via inversion.
fn scalar_power(l: u64, e: i64, domain: CoeffDomain) -> Result<Coeff> {
    match domain {
        CoeffDomain::ExactRational => {
            let mag = Pow::pow(BigInt::from(l), e.unsigned_abs());
            let r =
                if e >= 0 { BigRational::from(mag) } else { BigRational::new(BigInt::one(), mag) };
            Ok(Coeff::Rational(r))
        }
        CoeffDomain::PrimeField(p) => {
            let base =
                FpElement::reduce(i64::try_from(l).map_err(|_| Error::InvalidModulus(l))?, p);
            let v =
                if e >= 0 { base.pow(e.unsigned_abs()) } else { base.inv()?.pow(e.unsigned_abs()) };
            Ok(Coeff::Fp(v))
        }
    }
}

/// Classical genus-1 Hecke operator T(l): the output coefficient at n is
/// a(ln) + l^(k-1) a(n/l), the division term present only when l | n. The
/// declared weight k must match the series label. l = p is rejected in
/// characteristic p; that comparison lives with the p-singularity checks.
pub fn hecke_tl_g1(f: &QSeries, l: u64, k: i64) -> Result<QSeries> {
    if f.genus() != 1 {
        return Err(Error::GenusMismatch { left: 1, right: f.genus() });
    }
    if !is_prime(l) {
        return Err(Error::Unsupported(format!("Hecke index {l} is not prime")));
    }
    if let CoeffDomain::PrimeField(p) = f.domain() {
        if l == p {
            return Err(Error::HeckeAtCharacteristic { l });
        }
    }
    if f.weight() != Weight::integer(k) {
        return Err(Error::WeightMismatch {
            left: f.weight().render(),
            right: Weight::integer(k).render(),
        });
    }
    let step = 2 * f.scale();
    for t in f.support() {
        if t.entry(0, 0) % step != 0 {
            return Err(Error::Unsupported(format!(
                "Hecke action needs integer exponents, found key {}",
                t.render()
            )));
        }
    }
    let li = l as i64;
    let lk1 = scalar_power(l, k - 1, f.domain())?;
    let bound = f.bound().div_euclid(li);
    let mut out = QSeries::new(1, f.domain(), f.weight(), bound, f.scale())?;
    for n in 0..=bound {
        let mut c = f.coefficient_g1(li * n);
        if n % li == 0 {
            c = c.add(&lk1.mul(&f.coefficient_g1(n / li)));
        }
        out.insert(HalfIntegralForm::genus1(n, f.scale()), c)?;
    }
    Ok(out)
}

/// Cartier operator on one-form coefficient series: keeps the p-divisible
/// support with indices divided by p; the p-th root on coefficients is the
/// identity map of F_p.
pub fn cartier(eta: &MatrixQSeries) -> Result<MatrixQSeries> {
    let p = eta.modulus();
    let bound = eta.bound().div_euclid(p as i64);
    let mut out = MatrixQSeries::new(eta.genus(), eta.modulus(), bound, eta.scale())?;
    for (t, m) in eta.iter() {
        if let Some(s) = t.div_index(p) {
            if s.within_trace(bound) {
                out.insert(s, m.clone())?;
            }
        }
    }
    Ok(out)
}

/// First theta operator: multiply the coefficient at T by det(T), computed
/// as an exact rational det(M)/(2d)^g and pushed into the domain. Since 2d
/// is a power of two and the characteristic is odd, the push always lands.
pub fn op_theta_det(f: &QSeries) -> Result<QSeries> {
    let mut out = QSeries::new(f.genus(), f.domain(), f.weight(), f.bound(), f.scale())?;
    let denom: BigInt = Pow::pow(BigInt::from(2 * f.scale()), f.genus() as u64);
    for (t, c) in f.iter() {
        let det = BigRational::new(BigInt::from(t.det_scaled()), denom.clone());
        let scaled = c.scale_rational(&det).map_err(|e| match e {
            Error::NonIntegralAtP { p, .. } => Error::NonIntegralAtP { p, location: t.render() },
            other => other,
        })?;
        out.insert(t.clone(), scaled)?;
    }
    Ok(out)
}

/// Second theta operator: the value at T is the matrix T a(T) over F_p,
/// with T = M/(2d) pushed into F_p through the inverse of 2d.
pub fn op_theta_matrix(f: &QSeries) -> Result<MatrixQSeries> {
    let p = modulus_of(f)?;
    let inv2d = FpElement::reduce(2 * f.scale(), p)
        .inv()
        .map_err(|_| Error::ScaleModulusClash { p, two_d: 2 * f.scale() })?;
    let g = f.genus();
    let mut out = MatrixQSeries::new(g, p, f.bound(), f.scale())?;
    for (t, c) in f.iter() {
        let Coeff::Fp(a) = c else { unreachable!() };
        let mut upper = Vec::with_capacity(g * (g + 1) / 2);
        for i in 0..g {
            for j in i..g {
                let entry = FpElement::reduce(t.entry(i, j), p);
                upper.push((entry.mul(inv2d).mul(*a)).residue() as i64);
            }
        }
        out.insert(t.clone(), FpMatrix::from_upper(g, p, &upper)?)?;
    }
    Ok(out)
}

/// Extracts the Fourier-Jacobi layer of a genus-2 series at corner index
/// nu: all coefficients whose index has T_22 = nu, keyed by the remaining
/// scaled entries (m11, m12).
pub fn fourier_jacobi(f: &QSeries, nu: i64) -> Result<JacobiSlice> {
    if f.genus() != 2 {
        return Err(Error::GenusMismatch { left: 2, right: f.genus() });
    }
    if nu < 1 {
        return Err(Error::Unsupported("layer index nu must be positive".into()));
    }
    let t0_bound = (f.bound() - nu).max(0);
    let mut slice = JacobiSlice::new(nu, f.domain(), f.scale(), t0_bound)?;
    let m22 = 2 * f.scale() * nu;
    for (t, c) in f.iter() {
        if t.entry(1, 1) == m22 {
            slice.insert(t.entry(0, 0), t.entry(0, 1), c.clone())?;
        }
    }
    Ok(slice)
}

/// Rebuilds the genus-2 series of one Fourier-Jacobi layer.
pub fn embed_slice(s: &JacobiSlice, weight: Weight) -> Result<QSeries> {
    let d = s.scale();
    let bound = s.t0_bound() + s.nu();
    let mut out = QSeries::new(2, s.domain(), weight, bound, d)?;
    let m22 = 2 * d * s.nu();
    for (&(m11, m12), c) in s.iter() {
        let t = HalfIntegralForm::new(2, d, &[m11, m12, m12, m22])?;
        out.insert(t, c.clone())?;
    }
    Ok(out)
}

/// Decomposes a layer by the invariants of upper-triangular substitutions:
/// residue r = 2 t1 mod 2 nu and discriminant D = 4 nu t0 - (2 t1)^2. Keys
/// sharing (r, D) lie in one substitution orbit, so an invariant layer must
/// carry equal coefficients there; a mismatch is reported as undecomposable.
pub fn theta_decompose(s: &JacobiSlice) -> Result<ThetaComponents> {
    let nu = s.nu();
    let d = s.scale();
    let mut out = ThetaComponents::new(nu, s.domain())?;
    for (&(m11, m12), c) in s.iter() {
        if m11 % (2 * d) != 0 || m12 % d != 0 {
            return Err(Error::Unsupported(format!(
                "layer key ({m11},{m12}) at scale {d} has fractional indices"
            )));
        }
        let t0 = m11 / (2 * d);
        let two_t1 = m12 / d;
        let r = two_t1.rem_euclid(2 * nu);
        let disc = 4 * nu * t0 - two_t1 * two_t1;
        if let Some(prev) = out.component(r).and_then(|by_d| by_d.get(&disc)) {
            if prev != c {
                return Err(Error::NotThetaDecomposable(format!(
                    "keys with r={r}, D={disc} carry {} and {}",
                    prev.render(),
                    c.render()
                )));
            }
            continue;
        }
        out.insert(r, disc, c.clone())?;
    }
    Ok(out)
}

/// Rebuilds the canonical layer from components: each (r, D) becomes the
/// orbit representative with 2 t1 = r, t0 = (D + r^2)/(4 nu).
pub fn embed_components(c: &ThetaComponents, scale: i64) -> Result<JacobiSlice> {
    let nu = c.nu();
    let mut t0_bound = 0;
    let mut keys = Vec::new();
    for (r, disc, coeff) in c.iter() {
        let t0 = (disc + r * r) / (4 * nu);
        t0_bound = t0_bound.max(t0);
        keys.push((2 * scale * t0, scale * r, coeff.clone()));
    }
    let mut out = JacobiSlice::new(nu, c.domain(), scale, t0_bound)?;
    for (m11, m12, coeff) in keys {
        out.insert(m11, m12, coeff)?;
    }
    Ok(out)
}

/// The rank-1 lattice-sum family underlying the layer decomposition, with
/// the coset parameter given as a_num = 2a in [0, 2 nu). Indices are stored
/// nu-fold dilated and completed by the corner entry nu^2 (the dilation of
/// the q22^nu carrier), which keeps them half-integral at scale 4 and
/// semidefinite; the derivative identity below uses the same convention on
/// both sides, so the dilation cancels from every comparison.
///
/// Term for g: coefficient g^i at the dilated index
/// [[w^2/4, nu w/2], [nu w/2, nu^2]] with w = 2 nu g + a_num, summed over
/// all g with w^2 <= 4 nu B.
pub fn theta_fa(nu: i64, a_num: i64, i: u32, bound: i64) -> Result<QSeries> {
    if nu < 1 {
        return Err(Error::Unsupported("coset modulus nu must be positive".into()));
    }
    if i > 2 {
        return Err(Error::Unsupported("derivative order must be 0, 1 or 2".into()));
    }
    if bound < 0 {
        return Err(Error::Unsupported("negative trace bound".into()));
    }
    let alpha = a_num.rem_euclid(2 * nu);
    let mut out = QSeries::new(2, CoeffDomain::ExactRational, Weight::ZERO, nu * (bound + nu), 4)?;
    for (g, t) in theta_lattice_terms(nu, alpha, bound) {
        let c = match i {
            0 => 1,
            1 => g,
            _ => g * g,
        };
        out.insert(t, Coeff::Rational(rational(c, 1)))?;
    }
    Ok(out)
}

/// The lattice terms (g, dilated index) shared by the f_a family and the
/// matrix-valued sum of the derivative identity.
fn theta_lattice_terms(nu: i64, alpha: i64, bound: i64) -> Vec<(i64, HalfIntegralForm)> {
    let cap = 4 * nu * bound;
    let s = crate::quadform::isqrt(cap);
    let g_min = Integer::div_floor(&(-s - alpha), &(2 * nu));
    let g_max = Integer::div_floor(&(s - alpha), &(2 * nu));
    let mut terms = Vec::new();
    for g in g_min..=g_max {
        let w = 2 * nu * g + alpha;
        if w * w > cap {
            continue;
        }
        // M = 8 * (nu-dilated index) at scale 4.
        let m11 = 2 * w * w;
        let m12 = 4 * nu * w;
        let m22 = 8 * nu * nu;
        let t = HalfIntegralForm::new(2, 4, &[m11, m12, m12, m22])
            .expect("rank-1 dilated indices are half-integral at scale 4");
        terms.push((g, t));
    }
    terms
}

/// Checks the derivative identity for the matrix-valued lattice sum with
/// polynomial weights A = [[a0, a1], [a1, a2]]: the sum with per-term
/// matrix [[a0 + 2g a1 + g^2 a2, a1 + g a2], [a1 + g a2, a2]] must equal
/// A f_a + [[2a1, a2], [a2, 0]] f_a' + [[a2, 0], [0, 0]] f_a''. Both sides
/// are compared entrywise as scalar series up to the stored bound.
pub fn verify_theta_identity(a: &[i64; 3], a_num: i64, nu: i64, bound: i64) -> Result<bool> {
    if nu < 1 {
        return Err(Error::Unsupported("coset modulus nu must be positive".into()));
    }
    let [a0, a1, a2] = *a;
    let alpha = a_num.rem_euclid(2 * nu);
    let domain = CoeffDomain::ExactRational;
    let stored = nu * (bound + nu);

    let mut lhs = [
        QSeries::new(2, domain, Weight::ZERO, stored, 4)?,
        QSeries::new(2, domain, Weight::ZERO, stored, 4)?,
        QSeries::new(2, domain, Weight::ZERO, stored, 4)?,
    ];
    for (g, t) in theta_lattice_terms(nu, alpha, bound) {
        let entries = [a0 + 2 * g * a1 + g * g * a2, a1 + g * a2, a2];
        for (series, value) in lhs.iter_mut().zip(entries) {
            series.insert(t.clone(), Coeff::Rational(rational(value, 1)))?;
        }
    }

    let f0 = theta_fa(nu, alpha, 0, bound)?;
    let f1 = theta_fa(nu, alpha, 1, bound)?;
    let f2 = theta_fa(nu, alpha, 2, bound)?;
    let rhs = [
        f0.scaled_int(a0).add(&f1.scaled_int(2 * a1))?.add(&f2.scaled_int(a2))?,
        f0.scaled_int(a1).add(&f1.scaled_int(a2))?,
        f0.scaled_int(a2),
    ];

    for (l, r) in lhs.iter().zip(&rhs) {
        if !l.eq_upto(r, stored)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64) -> CoeffDomain {
        CoeffDomain::prime_field(p).unwrap()
    }

    fn q() -> CoeffDomain {
        CoeffDomain::ExactRational
    }

    fn g1_series(domain: CoeffDomain, weight: i64, bound: i64, rows: &[(i64, i64)]) -> QSeries {
        let mut s = QSeries::new(1, domain, Weight::integer(weight), bound, 1).unwrap();
        for &(n, v) in rows {
            s.insert(HalfIntegralForm::genus1(n, 1), Coeff::from_integer(v, domain)).unwrap();
        }
        s
    }

    fn g2_key(upper: [i64; 3]) -> HalfIntegralForm {
        HalfIntegralForm::new(2, 1, &[upper[0], upper[1], upper[1], upper[2]]).unwrap()
    }

    #[test]
    fn u_picks_p_divisible_support() {
        let f = g1_series(fp(5), 0, 10, &[(0, 1), (5, 2), (6, 3)]);
        let u = op_u(&f).unwrap();
        assert_eq!(u.bound(), 2);
        assert_eq!(u, g1_series(fp(5), 0, 2, &[(0, 1), (1, 2)]));
    }

    #[test]
    fn u_after_v_is_identity() {
        let f = g1_series(fp(5), 2, 4, &[(0, 3), (1, 1), (3, 4)]);
        let back = op_u(&op_v(&f).unwrap()).unwrap();
        assert_eq!(back.bound(), f.bound());
        assert!(back.eq_upto(&f, 4).unwrap());
        // The weight label survives the round trip unchanged through U.
        assert_eq!(back.weight(), Weight::integer(10));
    }

    #[test]
    fn u_transports_genus2_keys() {
        let mut f = QSeries::new(2, fp(3), Weight::ZERO, 6, 1).unwrap();
        f.insert(g2_key([6, 0, 0]), Coeff::from_integer(2, fp(3))).unwrap();
        let u = op_u(&f).unwrap();
        assert_eq!(u.coefficient(&g2_key([2, 0, 0])), Coeff::from_integer(2, fp(3)));
    }

    #[test]
    fn v_moves_support_and_weight() {
        let f = g1_series(fp(5), 1, 3, &[(0, 1), (1, 2)]);
        let v = op_v(&f).unwrap();
        assert_eq!(v.bound(), 15);
        assert_eq!(v.weight(), Weight::integer(5));
        assert_eq!(v, {
            let mut e = QSeries::new(1, fp(5), Weight::integer(5), 15, 1).unwrap();
            e.insert(HalfIntegralForm::genus1(0, 1), Coeff::from_integer(1, fp(5))).unwrap();
            e.insert(HalfIntegralForm::genus1(5, 1), Coeff::from_integer(2, fp(5))).unwrap();
            e
        });
    }

    #[test]
    fn v_equals_pth_power() {
        let f = g1_series(fp(3), 2, 4, &[(0, 2), (1, 1), (2, 2), (4, 1)]);
        let v = op_v(&f).unwrap();
        let cube = f.pow(3).unwrap();
        assert!(v.eq_upto(&cube, 4).unwrap());
    }

    #[test]
    fn corner_map_restricts_support() {
        let mut f = QSeries::new(2, q(), Weight::integer(4), 6, 1).unwrap();
        f.insert(g2_key([2, 0, 0]), Coeff::from_integer(7, q())).unwrap();
        f.insert(g2_key([2, 2, 2]), Coeff::from_integer(9, q())).unwrap();
        let phi = op_phi(&f).unwrap();
        assert_eq!(phi.genus(), 1);
        assert_eq!(phi.len(), 1);
        assert_eq!(phi.coefficient_g1(1), Coeff::from_integer(7, q()));
        assert_eq!(op_phi(&phi).unwrap_err().name(), "Unsupported");
    }

    #[test]
    fn corner_map_is_multiplicative() {
        let mut f = QSeries::new(2, q(), Weight::integer(4), 4, 1).unwrap();
        f.insert(g2_key([0, 0, 0]), Coeff::from_integer(1, q())).unwrap();
        f.insert(g2_key([2, 0, 0]), Coeff::from_integer(3, q())).unwrap();
        f.insert(g2_key([2, 1, 2]), Coeff::from_integer(5, q())).unwrap();
        let mut g = QSeries::new(2, q(), Weight::integer(6), 4, 1).unwrap();
        g.insert(g2_key([2, 0, 0]), Coeff::from_integer(2, q())).unwrap();
        g.insert(g2_key([0, 0, 2]), Coeff::from_integer(4, q())).unwrap();
        let lhs = op_phi(&f.mul(&g).unwrap()).unwrap();
        let rhs = op_phi(&f).unwrap().mul(&op_phi(&g).unwrap()).unwrap();
        assert!(lhs.eq_upto(&rhs, 4).unwrap());
    }

    #[test]
    fn hecke_constant_series() {
        // T(l) on the constant 1 of weight k has a(0) = 1 + l^{k-1}.
        let one = g1_series(q(), 4, 20, &[(0, 1)]);
        let t2 = hecke_tl_g1(&one, 2, 4).unwrap();
        assert_eq!(t2.coefficient_g1(0), Coeff::from_integer(9, q()));
        assert_eq!(t2.bound(), 10);
    }

    #[test]
    fn hecke_rejections() {
        let f = g1_series(fp(5), 4, 20, &[(0, 1), (1, 2)]);
        assert_eq!(hecke_tl_g1(&f, 5, 4).unwrap_err(), Error::HeckeAtCharacteristic { l: 5 });
        assert_eq!(hecke_tl_g1(&f, 4, 4).unwrap_err().name(), "Unsupported");
        assert_eq!(hecke_tl_g1(&f, 2, 6).unwrap_err().name(), "WeightMismatch");
    }

    #[test]
    fn hecke_division_term() {
        // f = q: T(2) f has a(1) = a(2) + 2^{k-1} a(1/2 -> absent) = 0 and
        // a(2) = a(4) + 2^{k-1} a(1) = 2^{k-1}.
        let f = g1_series(q(), 2, 8, &[(1, 1)]);
        let t2 = hecke_tl_g1(&f, 2, 2).unwrap();
        assert_eq!(t2.coefficient_g1(1), Coeff::zero(q()));
        assert_eq!(t2.coefficient_g1(2), Coeff::from_integer(2, q()));
    }

    #[test]
    fn cartier_moves_keys_and_terminates() {
        let p = 3;
        let mut eta = MatrixQSeries::new(2, p, 9, 1).unwrap();
        let m = FpMatrix::from_upper(2, p, &[1, 2, 1]).unwrap();
        eta.insert(g2_key([6, 3, 6]), m.clone()).unwrap();
        eta.insert(g2_key([2, 1, 2]), FpMatrix::from_upper(2, p, &[1, 0, 0]).unwrap()).unwrap();
        let once = cartier(&eta).unwrap();
        assert_eq!(once.len(), 1);
        assert_eq!(once.coefficient(&g2_key([2, 1, 2])), m);
        // Iterating ceil(log_p B) + 1 times must land in support {0}.
        let mut cur = eta;
        for _ in 0..3 {
            cur = cartier(&cur).unwrap();
        }
        assert!(cur.iter().all(|(t, _)| t.is_zero()));
    }

    #[test]
    fn cartier_kills_prime_to_p_support() {
        let mut eta = MatrixQSeries::new(2, 5, 8, 1).unwrap();
        eta.insert(g2_key([2, 1, 2]), FpMatrix::from_upper(2, 5, &[1, 1, 1]).unwrap()).unwrap();
        assert!(cartier(&eta).unwrap().is_empty());
    }

    #[test]
    fn theta_det_is_index_multiplication() {
        let f = g1_series(fp(7), 2, 8, &[(0, 1), (1, 1), (3, 2), (7, 1)]);
        let out = op_theta_det(&f).unwrap();
        assert_eq!(out.coefficient_g1(0), Coeff::zero(fp(7)));
        assert_eq!(out.coefficient_g1(1), Coeff::from_integer(1, fp(7)));
        assert_eq!(out.coefficient_g1(3), Coeff::from_integer(6, fp(7)));
        assert_eq!(out.coefficient_g1(7), Coeff::zero(fp(7)), "7 = 0 in F_7");
    }

    #[test]
    fn theta_det_genus2_multipliers() {
        let mut f = QSeries::new(2, q(), Weight::ZERO, 6, 1).unwrap();
        f.insert(g2_key([2, 0, 2]), Coeff::from_integer(1, q())).unwrap();
        f.insert(g2_key([2, 1, 2]), Coeff::from_integer(1, q())).unwrap();
        let out = op_theta_det(&f).unwrap();
        // det of the identity index is 1; det [[1,1/2],[1/2,1]] = 3/4.
        assert_eq!(out.coefficient(&g2_key([2, 0, 2])), Coeff::from_integer(1, q()));
        assert_eq!(out.coefficient(&g2_key([2, 1, 2])), Coeff::Rational(rational(3, 4)));
    }

    #[test]
    fn theta_matrix_values() {
        let mut f = QSeries::new(2, fp(5), Weight::ZERO, 6, 1).unwrap();
        f.insert(g2_key([0, 0, 0]), Coeff::from_integer(4, fp(5))).unwrap();
        f.insert(g2_key([2, 1, 2]), Coeff::from_integer(2, fp(5))).unwrap();
        let out = op_theta_matrix(&f).unwrap();
        // T = 0 contributes the zero matrix, so it is not stored.
        assert_eq!(out.len(), 1);
        // T = [[1,1/2],[1/2,1]]: 2T = [[2,1],[1,2]], T a(T) = 2 * M/2 mod 5.
        let m = out.coefficient(&g2_key([2, 1, 2]));
        assert_eq!(m.entry(0, 0), 2);
        assert_eq!(m.entry(0, 1), 1);
        assert_eq!(m.entry(1, 1), 2);
    }

    #[test]
    fn layer_extraction_and_reassembly() {
        let mut f = QSeries::new(2, q(), Weight::integer(10), 4, 1).unwrap();
        f.insert(g2_key([2, 1, 2]), Coeff::from_integer(3, q())).unwrap();
        f.insert(g2_key([2, 0, 4]), Coeff::from_integer(5, q())).unwrap();
        f.insert(g2_key([2, 0, 0]), Coeff::from_integer(7, q())).unwrap();
        let s1 = fourier_jacobi(&f, 1).unwrap();
        assert_eq!(s1.len(), 1);
        assert_eq!(s1.iter().next().unwrap().0, &(2, 1));
        assert!(fourier_jacobi(&f, 3).unwrap().is_empty());

        // Reassembly: corner-zero part plus embedded layers equals f.
        let mut rebuilt = QSeries::new(2, q(), Weight::integer(10), 4, 1).unwrap();
        for (t, c) in f.iter() {
            if t.entry(1, 1) == 0 {
                rebuilt.insert(t.clone(), c.clone()).unwrap();
            }
        }
        for nu in 1..=4 {
            let layer = embed_slice(&fourier_jacobi(&f, nu).unwrap(), f.weight()).unwrap();
            rebuilt = rebuilt.add(&layer.truncate(4)).unwrap();
        }
        assert!(rebuilt.eq_upto(&f, 4).unwrap());
    }

    #[test]
    fn decomposition_invariants_and_collisions() {
        let mut s = JacobiSlice::new(1, q(), 1, 8).unwrap();
        s.insert(2, 1, Coeff::from_integer(4, q())).unwrap();
        let comps = theta_decompose(&s).unwrap();
        assert_eq!(comps.component(1).and_then(|m| m.get(&3)), Some(&Coeff::from_integer(4, q())));

        // (t0,t1) = (1,1/2) and (3,3/2) share r=1, D=3 (one orbit). Equal
        // values pass, unequal values are rejected.
        let mut ok = JacobiSlice::new(1, q(), 1, 8).unwrap();
        ok.insert(2, 1, Coeff::from_integer(4, q())).unwrap();
        ok.insert(6, 3, Coeff::from_integer(4, q())).unwrap();
        assert_eq!(theta_decompose(&ok).unwrap().iter().count(), 1);

        let mut bad = JacobiSlice::new(1, q(), 1, 8).unwrap();
        bad.insert(2, 1, Coeff::from_integer(4, q())).unwrap();
        bad.insert(6, 3, Coeff::from_integer(5, q())).unwrap();
        assert_eq!(theta_decompose(&bad).unwrap_err().name(), "NotThetaDecomposable");
    }

    #[test]
    fn decompose_embed_round_trip() {
        let mut comps = ThetaComponents::new(2, q()).unwrap();
        comps.insert(1, 7, Coeff::from_integer(2, q())).unwrap();
        comps.insert(3, 7, Coeff::from_integer(5, q())).unwrap();
        comps.insert(0, 8, Coeff::from_integer(1, q())).unwrap();
        let slice = embed_components(&comps, 1).unwrap();
        let back = theta_decompose(&slice).unwrap();
        assert_eq!(back, comps);
    }

    #[test]
    fn lattice_sum_coefficients() {
        let f0 = theta_fa(1, 0, 0, 9).unwrap();
        assert_eq!(f0.scale(), 4);
        // Terms at w = 2g with w^2 <= 36: g in [-3, 3], seven keys.
        assert_eq!(f0.len(), 7);
        for (_, c) in f0.iter() {
            assert_eq!(c, &Coeff::from_integer(1, q()));
        }
        let f1 = theta_fa(1, 0, 1, 9).unwrap();
        // g = 0 contributes 0 and is dropped; the others are g itself.
        assert_eq!(f1.len(), 6);
        let f2 = theta_fa(1, 0, 2, 9).unwrap();
        let w_key = |g: i64| {
            let w = 2 * g;
            HalfIntegralForm::new(2, 4, &[2 * w * w, 4 * w, 4 * w, 8]).unwrap()
        };
        for g in 1..=3 {
            assert_eq!(f2.coefficient(&w_key(g)), f2.coefficient(&w_key(-g)));
            assert_eq!(f2.coefficient(&w_key(g)), Coeff::from_integer(g * g, q()));
            assert_eq!(f1.coefficient(&w_key(-g)), Coeff::from_integer(-g, q()));
        }
    }

    #[test]
    fn derivative_identity_examples() {
        assert!(verify_theta_identity(&[0, 0, 0], 0, 1, 6).unwrap());
        assert!(verify_theta_identity(&[1, 0, 0], 0, 1, 6).unwrap());
        assert!(verify_theta_identity(&[0, 0, 1], 0, 1, 8).unwrap());
        assert!(verify_theta_identity(&[2, -1, 1], 1, 2, 6).unwrap());
        assert!(verify_theta_identity(&[1, 2, -2], 3, 3, 5).unwrap());
    }
}
