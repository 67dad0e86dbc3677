//! Structural verification algorithms: total p-singularity and p-th roots
//! with their weight arithmetic, weight congruences, expression of genus-1
//! forms in the E4/E6 generators, the exhaustive graded irreducibility
//! search for A - 1, the quadratic-constraint kernel solver, the rank-1
//! index classification, matrix-series equivariance, section singularity,
//! and the T(p)-versus-V comparison on integral lifts.

use std::collections::BTreeMap;

use crate::coeff::{Coeff, CoeffDomain, FpElement};
use crate::error::{Error, Result};
use crate::operators::{hecke_tl_g1, op_u, op_v};
use crate::qseries::{FpMatrix, MatrixQSeries, QSeries, ThetaComponents, Weight};
use crate::quadform::{HalfIntegralForm, UnimodularMatrix};

/// True iff every stored coefficient sits at an index divisible by p, in
/// the sense that T/p is again half-integral at the same scale. Requires
/// p prime to 2d so that divisibility of T and of M = 2dT agree.
pub fn is_p_singular(f: &QSeries) -> Result<bool> {
    let CoeffDomain::PrimeField(p) = f.domain() else {
        return Err(Error::DomainMismatch { left: "prime field".into(), right: "Q".into() });
    };
    let two_d = 2 * f.scale();
    if two_d % p as i64 == 0 {
        return Err(Error::ScaleModulusClash { p, two_d });
    }
    Ok(f.support().all(|t| t.div_index(p).is_some()))
}

/// Outcome of extracting a p-th root from a totally p-singular series.
#[derive(Debug, Clone, PartialEq)]
pub struct PRoot {
    /// Exponent of the weight-(p-1) constant-1 factor.
    pub r: i64,
    /// Weight of the root.
    pub k_prime: i64,
    /// Expansion of the root, exact up to floor(B/p).
    pub root: QSeries,
}

/// Solves f = (constant-1 factor)^r h^p at expansion level: the root is
/// the U-image (p-th roots are the identity on F_p coefficients), and the
/// exponents solve k = r(p-1) + p k' with 0 <= r < p. No such split with
/// k' >= 0 exists exactly when a nonzero form of this weight cannot be
/// totally p-singular.
pub fn p_root(f: &QSeries, k: i64) -> Result<PRoot> {
    let CoeffDomain::PrimeField(p) = f.domain() else {
        return Err(Error::DomainMismatch { left: "prime field".into(), right: "Q".into() });
    };
    if f.weight() != Weight::integer(k) {
        return Err(Error::WeightMismatch {
            left: f.weight().render(),
            right: Weight::integer(k).render(),
        });
    }
    if k < 0 {
        return Err(Error::WeightInfeasible { k, p });
    }
    if !is_p_singular(f)? {
        return Err(Error::NotPSingular(p));
    }
    let pi = p as i64;
    let r = (-k).rem_euclid(pi);
    let k_prime_num = k - r * (pi - 1);
    if k_prime_num < 0 || k_prime_num % pi != 0 {
        return Err(Error::WeightInfeasible { k, p });
    }
    let k_prime = k_prime_num / pi;
    let mut root = op_u(f)?;
    // Relabel: the root is a genuine form of weight k'.
    let mut relabeled = QSeries::new(
        root.genus(),
        root.domain(),
        Weight::integer(k_prime),
        root.bound(),
        root.scale(),
    )?;
    for (t, c) in root.iter() {
        relabeled.insert(t.clone(), c.clone())?;
    }
    root = relabeled;
    // The recomposition must reproduce f on the exact window.
    let recomposed = op_v(&root)?;
    let window = pi * f.bound().div_euclid(pi);
    if !recomposed.eq_upto(&f.truncate(window), window)? {
        return Err(Error::NoSolution(
            "root recomposition failed; input is not a dilated series".into(),
        ));
    }
    Ok(PRoot { r, k_prime, root })
}

/// True iff k1 and k2 agree modulo p - 1, the weight ambiguity left by a
/// constant-1 form of weight p - 1.
pub fn weight_congruence(k1: i64, k2: i64, p: u64) -> bool {
    (k1 - k2).rem_euclid(p as i64 - 1) == 0
}

/// Monomials x4^a x6^b of weight 4a + 6b = k, ordered by ascending b.
fn monomials_of_weight(k: i64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    if k < 0 {
        return out;
    }
    for b in 0..=(k / 6) {
        let rest = k - 6 * b;
        if rest % 4 == 0 {
            out.push(((rest / 4) as u32, b as u32));
        }
    }
    out
}

/// Writes a genus-1 series of weight k as a linear combination of the
/// monomials E4^a E6^b, solving on initial coefficients and verifying the
/// solution against every stored coefficient. Works in the series' own
/// domain; over a prime field the generator series are reduced first.
pub fn express_in_generators_g1(f: &QSeries, k: i64) -> Result<BTreeMap<(u32, u32), Coeff>> {
    if f.genus() != 1 {
        return Err(Error::GenusMismatch { left: 1, right: f.genus() });
    }
    if f.weight() != Weight::integer(k) {
        return Err(Error::WeightMismatch {
            left: f.weight().render(),
            right: Weight::integer(k).render(),
        });
    }
    let monomials = monomials_of_weight(k);
    let m = monomials.len();
    if m == 0 {
        return if f.is_empty() {
            Ok(BTreeMap::new())
        } else {
            Err(Error::NoSolution(format!("no generator monomials exist in weight {k}")))
        };
    }
    if f.bound() < m as i64 {
        return Err(Error::InsufficientPrecision { needed: m as i64, available: f.bound() });
    }
    let bound = f.bound();
    let domain = f.domain();
    let basis: Vec<QSeries> = {
        let e4 = crate::generators::eisenstein_g1(4, bound)?;
        let e6 = crate::generators::eisenstein_g1(6, bound)?;
        let mut out = Vec::with_capacity(m);
        for &(a, b) in &monomials {
            let mut s = QSeries::constant(
                1,
                CoeffDomain::ExactRational,
                Weight::integer(k),
                bound,
                1,
                Coeff::one(CoeffDomain::ExactRational),
            )?;
            for _ in 0..a {
                s = s.mul(&e4)?;
            }
            for _ in 0..b {
                s = s.mul(&e6)?;
            }
            // Restamp the weight: powers of the constant carry weight 0.
            let mut fixed = QSeries::new(1, domain, Weight::integer(k), bound, 1)?;
            let s = match domain {
                CoeffDomain::ExactRational => s,
                CoeffDomain::PrimeField(p) => s.reduce_series(p)?,
            };
            for (t, c) in s.iter() {
                fixed.insert(t.clone(), c.clone())?;
            }
            out.push(fixed);
        }
        out
    };

    // Augmented system: one row per q-power up to the bound.
    let rows = (bound + 1) as usize;
    let mut matrix: Vec<Vec<Coeff>> = Vec::with_capacity(rows);
    for n in 0..=bound {
        let mut row: Vec<Coeff> = basis.iter().map(|s| s.coefficient_g1(n)).collect();
        row.push(f.coefficient_g1(n));
        matrix.push(row);
    }

    // Gaussian elimination with full residual verification.
    let mut pivot_rows: Vec<usize> = Vec::new();
    let mut next_row = 0;
    for col in 0..m {
        let Some(pr) = (next_row..rows).find(|&r| !matrix[r][col].is_zero()) else {
            return Err(Error::NoSolution(
                "generator monomials are dependent at this precision".into(),
            ));
        };
        matrix.swap(next_row, pr);
        let inv = matrix[next_row][col].inv()?;
        for x in matrix[next_row].iter_mut() {
            *x = x.mul(&inv);
        }
        let pivot_row = matrix[next_row].clone();
        for (r, row) in matrix.iter_mut().enumerate() {
            if r != next_row && !row[col].is_zero() {
                let factor = row[col].clone();
                for (x, pv) in row.iter_mut().zip(&pivot_row) {
                    *x = x.sub(&factor.mul(pv));
                }
            }
        }
        pivot_rows.push(next_row);
        next_row += 1;
    }
    // Any nonzero residual row means f lies outside the monomial span.
    if matrix[next_row..].iter().any(|row| !row[m].is_zero()) {
        return Err(Error::NoSolution("series does not match any generator combination".into()));
    }
    let mut out = BTreeMap::new();
    for (col, &(a, b)) in monomials.iter().enumerate() {
        let value = matrix[pivot_rows[col]][m].clone();
        if !value.is_zero() {
            out.insert((a, b), value);
        }
    }
    Ok(out)
}

/// A polynomial in the graded ring F_p[x4, x6], keyed by exponent pairs
/// (a, b) with the weight 4a + 6b implicit; coefficients are least residues.
pub type PolyFp = BTreeMap<(u32, u32), u64>;

fn poly_mul(lhs: &PolyFp, rhs: &PolyFp, p: u64) -> PolyFp {
    let mut out = PolyFp::new();
    for (&(a1, b1), &c1) in lhs {
        for (&(a2, b2), &c2) in rhs {
            let key = (a1 + a2, b1 + b2);
            let add = (c1 as u128 * c2 as u128 % p as u128) as u64;
            let slot = out.entry(key).or_insert(0);
            *slot = (*slot + add) % p;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Outcome of the graded factorization search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Irreducible,
    Factorization { left: PolyFp, right: PolyFp },
}

/// Exhaustive search for a factorization target = F G in F_p[x4, x6] with
/// F = 1 + (positive-weight pieces up to s), G = -1 + (pieces up to t),
/// over all splits s + t = total with nonzero top pieces. Any factorization
/// into nonunits can be normalized to this shape, since the weight-0 piece
/// of the target is a unit and the graded ring is an integral domain.
fn search_split_factorizations(target: &PolyFp, total: i64, p: u64) -> SearchOutcome {
    let weights: Vec<i64> = (4..total).filter(|w| !monomials_of_weight(*w).is_empty()).collect();
    for &s in &weights {
        let t = total - s;
        if !weights.contains(&t) {
            continue;
        }
        // Unknowns: every monomial of positive weight at most s (resp. t).
        let vars_f: Vec<(u32, u32)> = (4..=s).flat_map(monomials_of_weight).collect();
        let vars_g: Vec<(u32, u32)> = (4..=t).flat_map(monomials_of_weight).collect();
        let nf = vars_f.len();
        let nvars = nf + vars_g.len();
        let mut assignment = vec![0u64; nvars];
        loop {
            let top_f_nonzero = vars_f
                .iter()
                .enumerate()
                .any(|(i, &(a, b))| 4 * a as i64 + 6 * b as i64 == s && assignment[i] != 0);
            let top_g_nonzero = vars_g
                .iter()
                .enumerate()
                .any(|(i, &(a, b))| 4 * a as i64 + 6 * b as i64 == t && assignment[nf + i] != 0);
            if top_f_nonzero && top_g_nonzero {
                let mut fpoly = PolyFp::from([((0, 0), 1u64)]);
                for (i, &key) in vars_f.iter().enumerate() {
                    if assignment[i] != 0 {
                        fpoly.insert(key, assignment[i]);
                    }
                }
                let mut gpoly = PolyFp::from([((0, 0), p - 1)]);
                for (i, &key) in vars_g.iter().enumerate() {
                    if assignment[nf + i] != 0 {
                        gpoly.insert(key, assignment[nf + i]);
                    }
                }
                if poly_mul(&fpoly, &gpoly, p) == *target {
                    return SearchOutcome::Factorization { left: fpoly, right: gpoly };
                }
            }
            // Mixed-radix increment over F_p assignments.
            let mut pos = 0;
            while pos < nvars {
                assignment[pos] += 1;
                if assignment[pos] < p {
                    break;
                }
                assignment[pos] = 0;
                pos += 1;
            }
            if pos == nvars {
                break;
            }
        }
    }
    SearchOutcome::Irreducible
}

/// Decides whether A - 1 factors in F_p[x4, x6], where A is the expression
/// of the weight-(p-1) Eisenstein series reduced mod p. The search space is
/// documented feasible for p in {5, 7, 11, 13}.
pub fn irreducibility_search_g1(p: u64) -> Result<SearchOutcome> {
    if ![5, 7, 11, 13].contains(&p) {
        return Err(Error::Unsupported(format!(
            "factorization search is sized for p in {{5,7,11,13}}, got {p}"
        )));
    }
    let k = p as i64 - 1;
    let e = crate::generators::eisenstein_g1(k, k)?.reduce_series(p)?;
    let a_map = express_in_generators_g1(&e, k)?;
    let mut target = PolyFp::new();
    for (&key, c) in &a_map {
        let Coeff::Fp(x) = c else { unreachable!() };
        target.insert(key, x.residue());
    }
    // Subtract the weight-0 unit: the target is A - 1.
    target.insert((0, 0), p - 1);
    Ok(search_split_factorizations(&target, k, p))
}

/// Basis of the space of symmetric 2x2 matrices S over F_p annihilated by
/// every vector on which tbar is anisotropic: v^t S v = 0 whenever
/// v^t tbar v != 0. Returned as symmetric matrices.
pub fn star_star_solver(p: u64, tbar: &FpMatrix) -> Result<Vec<FpMatrix>> {
    if tbar.genus() != 2 || tbar.modulus() != p {
        return Err(Error::DomainMismatch {
            left: format!("Fp:{p} genus 2"),
            right: format!("Fp:{} genus {}", tbar.modulus(), tbar.genus()),
        });
    }
    let quad = |m: &FpMatrix, v1: u64, v2: u64| -> u64 {
        let terms = m.entry(0, 0) as u128 * (v1 * v1) as u128
            + 2 * m.entry(0, 1) as u128 * (v1 * v2) as u128
            + m.entry(1, 1) as u128 * (v2 * v2) as u128;
        (terms % p as u128) as u64
    };
    // Rows constrain (s11, s12, s22) via v1^2 s11 + 2 v1 v2 s12 + v2^2 s22.
    let mut rows: Vec<[FpElement; 3]> = Vec::new();
    for v1 in 0..p {
        for v2 in 0..p {
            if (v1, v2) == (0, 0) || quad(tbar, v1, v2) == 0 {
                continue;
            }
            rows.push([
                FpElement::reduce((v1 * v1) as i64, p),
                FpElement::reduce((2 * v1 * v2) as i64, p),
                FpElement::reduce((v2 * v2) as i64, p),
            ]);
        }
    }
    // Gauss-reduce the constraint rows, then read off the kernel.
    let mut pivots: Vec<(usize, [FpElement; 3])> = Vec::new();
    for mut row in rows {
        for &(col, ref prow) in &pivots {
            if !row[col].is_zero() {
                let factor = row[col];
                for i in 0..3 {
                    row[i] = row[i].sub(factor.mul(prow[i]));
                }
            }
        }
        if let Some(col) = (0..3).find(|&i| !row[i].is_zero()) {
            let inv = row[col].inv()?;
            for x in row.iter_mut() {
                *x = x.mul(inv);
            }
            pivots.push((col, row));
        }
        if pivots.len() == 3 {
            break;
        }
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(c, _)| c).collect();
    let mut basis = Vec::new();
    for free in (0..3).filter(|c| !pivot_cols.contains(c)) {
        let mut vec = [FpElement::zero(p); 3];
        vec[free] = FpElement::one(p);
        // Back-substitute pivot coordinates against the free choice.
        for &(col, ref prow) in pivots.iter().rev() {
            let mut value = FpElement::zero(p);
            for i in 0..3 {
                if i != col {
                    value = value.sub(prow[i].mul(vec[i]));
                }
            }
            vec[col] = value;
        }
        let entries = [vec[0].residue() as i64, vec[1].residue() as i64, vec[2].residue() as i64];
        basis.push(FpMatrix::from_upper(2, p, &entries)?);
    }
    Ok(basis)
}

/// All symmetric 2x2 matrices over F_p of rank at most 1 with lower-right
/// entry nu != 0. The enumeration is checked against the parametric family
/// [[x^2 nu, x nu], [x nu, nu]] and always has exactly p members.
pub fn rank1_classify(p: u64, nu: u64) -> Result<Vec<FpMatrix>> {
    let nu = nu % p;
    if nu == 0 {
        return Err(Error::Unsupported("corner entry nu must be nonzero".into()));
    }
    let mut found = Vec::new();
    for t11 in 0..p {
        for t12 in 0..p {
            // Rank <= 1 for a 2x2 is exactly det = 0.
            if (t11 as u128 * nu as u128) % p as u128 == (t12 as u128 * t12 as u128) % p as u128 {
                found.push(FpMatrix::from_upper(2, p, &[t11 as i64, t12 as i64, nu as i64])?);
            }
        }
    }
    let family: Vec<FpMatrix> = (0..p)
        .map(|x| {
            let xn = FpElement::reduce((x * nu % p) as i64, p);
            let xxn = FpElement::reduce(x as i64, p).mul(xn);
            FpMatrix::from_upper(2, p, &[xxn.residue() as i64, xn.residue() as i64, nu as i64])
        })
        .collect::<Result<_>>()?;
    let mut sorted_family = family;
    sorted_family.sort_by_key(|m| (m.entry(0, 0), m.entry(0, 1)));
    assert_eq!(found, sorted_family, "rank-1 classification disagrees with the family");
    assert_eq!(found.len(), p as usize);
    Ok(found)
}

/// True iff the matrix series obeys the substitution law
/// a(U^t T U) = Ubar^t a(T) Ubar for every stored index and supplied U with
/// the moved index in bound, and its value at T = 0 vanishes.
pub fn equivariance_check(eta: &MatrixQSeries, us: &[UnimodularMatrix]) -> bool {
    let zero = HalfIntegralForm::zero(eta.genus(), eta.scale());
    if !eta.coefficient(&zero).is_zero() {
        return false;
    }
    for (t, a) in eta.iter() {
        for u in us {
            let moved = t.act(u);
            if moved.within_trace(eta.bound()) && eta.coefficient(&moved) != a.conjugate(u) {
                return false;
            }
        }
    }
    true
}

/// True iff every stored component coefficient sits at a discriminant
/// divisible by p. The section exponents are D divided by a fixed scale
/// prime to p (the caller's level-scale integer m_level certifies this),
/// so p-divisibility of the exponent is exactly p | D.
pub fn section_p_singularity_check(
    components: &ThetaComponents,
    p: u64,
    m_level: i64,
) -> Result<bool> {
    if m_level % p as i64 == 0 {
        return Err(Error::Unsupported(format!("level scale {m_level} must be prime to p = {p}")));
    }
    Ok(components.iter().all(|(_, d, _)| d % p as i64 == 0))
}

/// Compares the classical T(p)-image of an integral lift, reduced mod p,
/// against the V-image of the lift's reduction, on the window where both
/// are stored. The caller supplies the lift; weights below 2 are rejected.
pub fn tp_equals_v_check(lift: &QSeries, p: u64, k: i64) -> Result<bool> {
    if k < 2 {
        return Err(Error::Unsupported("the comparison is stated for weights at least 2".into()));
    }
    if lift.domain() != CoeffDomain::ExactRational {
        return Err(Error::DomainMismatch { left: "Q".into(), right: lift.domain().to_string() });
    }
    let tp = hecke_tl_g1(lift, p, k)?.reduce_series(p)?;
    let v = op_v(&lift.reduce_series(p)?)?;
    let window = tp.bound().min(v.bound());
    tp.eq_upto(&v, window)
}
