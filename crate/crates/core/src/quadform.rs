//! Half-integral symmetric matrices and the unimodular action on them.
//!
//! A form T is stored through the integer matrix M = 2dT for a scale
//! d in {1, 2, 4, 8}. Diagonal entries of M are even (so dT has integral
//! diagonal) and off-diagonal entries are arbitrary integers (so T is
//! (1/2d)-integral off the diagonal); at d = 1 this is the classical
//! half-integral shape. All stored forms are positive semidefinite.
//!
//! The exponent convention tying forms to monomials lives in `qseries`:
//! q^T means prod q_ii^{T_ii} * prod_{i<j} q_ij^{2 T_ij}, so the trace of T
//! is additive under multiplication and truncation by trace is exact.

use crate::error::{Error, Result};

const SCALES: [i64; 4] = [1, 2, 4, 8];

/// Symmetric positive semidefinite half-integral form at a power-of-two
/// scale. Ordering is by trace first, then lexicographic on the upper
/// triangle, which is the canonical enumeration order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HalfIntegralForm {
    genus: usize,
    scale: i64,
    /// Upper triangle of M = 2dT, row-major: M11, M12, .., M1g, M22, ..
    upper: Vec<i64>,
}

fn tri_len(g: usize) -> usize {
    g * (g + 1) / 2
}

fn tri_index(g: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Row i starts after g + (g-1) + .. + (g-i+1) entries.
    i * g - i * (i + 1) / 2 + j
}

/// Integer square root, rounding down. Plain Newton iteration.
pub(crate) fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut x = n;
    let mut y = (x + 1) / 2;
    while y < x {
        x = y;
        y = (x + n / x) / 2;
    }
    x
}

fn det_full(g: usize, a: &[i128]) -> i128 {
    match g {
        0 => 1,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            // Laplace along the first row; fine for the tiny g used here.
            let mut det = 0i128;
            for col in 0..g {
                let mut minor = Vec::with_capacity((g - 1) * (g - 1));
                for r in 1..g {
                    for c in 0..g {
                        if c != col {
                            minor.push(a[r * g + c]);
                        }
                    }
                }
                let sign = if col % 2 == 0 { 1 } else { -1 };
                det += sign * a[col] * det_full(g - 1, &minor);
            }
            det
        }
    }
}

impl HalfIntegralForm {
    /// Builds a form from the full scaled matrix M = 2dT, validating every
    /// invariant: supported scale, symmetry, even diagonal, semidefiniteness.
    pub fn new(genus: usize, scale: i64, full: &[i64]) -> Result<Self> {
        if !SCALES.contains(&scale) {
            return Err(Error::InvalidForm(format!("unsupported scale d={scale}")));
        }
        if genus == 0 || full.len() != genus * genus {
            return Err(Error::InvalidForm(format!(
                "expected {genus}x{genus} entries, got {}",
                full.len()
            )));
        }
        for i in 0..genus {
            if full[i * genus + i] % 2 != 0 {
                return Err(Error::InvalidForm(format!(
                    "diagonal entry M{}{} = {} is odd",
                    i + 1,
                    i + 1,
                    full[i * genus + i]
                )));
            }
            for j in (i + 1)..genus {
                if full[i * genus + j] != full[j * genus + i] {
                    return Err(Error::InvalidForm("matrix is not symmetric".into()));
                }
            }
        }
        let mut upper = Vec::with_capacity(tri_len(genus));
        for i in 0..genus {
            for j in i..genus {
                upper.push(full[i * genus + j]);
            }
        }
        let form = HalfIntegralForm { genus, scale, upper };
        if !form.is_psd() {
            return Err(Error::InvalidForm("matrix is not positive semidefinite".into()));
        }
        Ok(form)
    }

    /// Builds from the upper triangle without re-validating; internal fast
    /// path for enumeration and arithmetic that preserve the invariants.
    pub(crate) fn from_upper_unchecked(genus: usize, scale: i64, upper: Vec<i64>) -> Self {
        debug_assert_eq!(upper.len(), tri_len(genus));
        HalfIntegralForm { genus, scale, upper }
    }

    pub fn zero(genus: usize, scale: i64) -> Self {
        HalfIntegralForm { genus, scale, upper: vec![0; tri_len(genus)] }
    }

    /// Genus-1 form with q-exponent t, i.e. M = [2dt].
    pub fn genus1(t: i64, scale: i64) -> Self {
        HalfIntegralForm { genus: 1, scale, upper: vec![2 * scale * t] }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    /// Entry of the scaled matrix M = 2dT.
    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.upper[tri_index(self.genus, i, j)]
    }

    pub fn upper_triangle(&self) -> &[i64] {
        &self.upper
    }

    /// Trace of M; the q-trace of T is this over 2d.
    pub fn trace_scaled(&self) -> i64 {
        (0..self.genus).map(|i| self.entry(i, i)).sum()
    }

    /// True when trace(T) <= bound, computed without leaving the integers.
    pub fn within_trace(&self, bound: i64) -> bool {
        self.trace_scaled() <= 2 * self.scale * bound
    }

    pub fn is_zero(&self) -> bool {
        self.upper.iter().all(|&x| x == 0)
    }

    fn full_matrix(&self) -> Vec<i64> {
        let g = self.genus;
        let mut full = vec![0i64; g * g];
        for i in 0..g {
            for j in 0..g {
                full[i * g + j] = self.entry(i, j);
            }
        }
        full
    }

    /// Determinant of the scaled matrix M; det(T) = det(M) / (2d)^g.
    pub fn det_scaled(&self) -> i128 {
        let full: Vec<i128> = self.full_matrix().iter().map(|&x| x as i128).collect();
        det_full(self.genus, &full)
    }

    /// Positive semidefiniteness via all principal minors (not only the
    /// leading ones; semidefinite matrices need the full set).
    pub fn is_psd(&self) -> bool {
        let g = self.genus;
        let full: Vec<i128> = self.full_matrix().iter().map(|&x| x as i128).collect();
        for subset in 1u32..(1 << g) {
            let idx: Vec<usize> = (0..g).filter(|i| subset >> i & 1 == 1).collect();
            let k = idx.len();
            let mut sub = Vec::with_capacity(k * k);
            for &r in &idx {
                for &c in &idx {
                    sub.push(full[r * g + c]);
                }
            }
            if det_full(k, &sub) < 0 {
                return false;
            }
        }
        true
    }

    /// The substituted form U^t M U for unimodular U; same scale, and all
    /// invariants are preserved (even diagonal survives because M is
    /// integral with even diagonal).
    pub fn act(&self, u: &UnimodularMatrix) -> HalfIntegralForm {
        assert_eq!(self.genus, u.genus(), "genus mismatch in unimodular action");
        let g = self.genus;
        let m = self.full_matrix();
        let ue = u.entries();
        // mu = M * U
        let mut mu = vec![0i64; g * g];
        for i in 0..g {
            for j in 0..g {
                mu[i * g + j] = (0..g).map(|k| m[i * g + k] * ue[k * g + j]).sum();
            }
        }
        // out = U^t * mu
        let mut upper = Vec::with_capacity(tri_len(g));
        for i in 0..g {
            for j in i..g {
                upper.push((0..g).map(|k| ue[k * g + i] * mu[k * g + j]).sum());
            }
        }
        HalfIntegralForm { genus: g, scale: self.scale, upper }
    }

    /// Re-expresses the form at a larger (or equal) scale; injective on keys.
    pub fn rescale(&self, new_scale: i64) -> Result<HalfIntegralForm> {
        if !SCALES.contains(&new_scale) {
            return Err(Error::InvalidForm(format!("unsupported scale d={new_scale}")));
        }
        if new_scale % self.scale != 0 {
            return Err(Error::InvalidForm(format!(
                "cannot rescale d={} to d={new_scale}",
                self.scale
            )));
        }
        let f = new_scale / self.scale;
        Ok(HalfIntegralForm {
            genus: self.genus,
            scale: new_scale,
            upper: self.upper.iter().map(|&x| x * f).collect(),
        })
    }

    /// Smallest supported scale that still represents this form exactly.
    pub fn minimal_scale(&self) -> i64 {
        let g = self.genus;
        let mut d = self.scale;
        let mut upper = self.upper.clone();
        while d > 1 {
            // Halving d halves M; all entries must stay integral and the
            // diagonal must stay even.
            let halvable = upper.iter().all(|&x| x % 2 == 0)
                && (0..g).all(|i| upper[tri_index(g, i, i)] % 4 == 0);
            if !halvable {
                break;
            }
            for x in upper.iter_mut() {
                *x /= 2;
            }
            d /= 2;
        }
        d
    }

    /// Rewrites at exactly `new_scale`, halving as needed; errors when the
    /// entries are not representable there.
    pub fn at_scale(&self, new_scale: i64) -> Result<HalfIntegralForm> {
        if new_scale >= self.scale {
            return self.rescale(new_scale);
        }
        if self.scale % new_scale != 0 {
            return Err(Error::InvalidForm(format!(
                "cannot rescale d={} to d={new_scale}",
                self.scale
            )));
        }
        let f = self.scale / new_scale;
        let mut upper = Vec::with_capacity(self.upper.len());
        for &x in &self.upper {
            if x % f != 0 {
                return Err(Error::InvalidForm(format!(
                    "entry {x} not divisible by {f} while rescaling to d={new_scale}"
                )));
            }
            upper.push(x / f);
        }
        let out = HalfIntegralForm { genus: self.genus, scale: new_scale, upper };
        for i in 0..out.genus {
            if out.entry(i, i) % 2 != 0 {
                return Err(Error::InvalidForm(format!(
                    "diagonal becomes odd while rescaling to d={new_scale}"
                )));
            }
        }
        Ok(out)
    }

    /// Key sum for series multiplication; both operands at the same scale.
    pub fn add_key(&self, other: &HalfIntegralForm) -> HalfIntegralForm {
        assert_eq!(self.genus, other.genus);
        assert_eq!(self.scale, other.scale);
        let upper = self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect();
        HalfIntegralForm { genus: self.genus, scale: self.scale, upper }
    }

    /// T/p when every entry of M is divisible by p; the key move behind U.
    pub fn div_index(&self, p: u64) -> Option<HalfIntegralForm> {
        let p = p as i64;
        if self.upper.iter().any(|&x| x % p != 0) {
            return None;
        }
        Some(HalfIntegralForm {
            genus: self.genus,
            scale: self.scale,
            upper: self.upper.iter().map(|&x| x / p).collect(),
        })
    }

    /// pT; the key move behind V.
    pub fn mul_index(&self, p: u64) -> HalfIntegralForm {
        let p = p as i64;
        HalfIntegralForm {
            genus: self.genus,
            scale: self.scale,
            upper: self.upper.iter().map(|&x| x * p).collect(),
        }
    }

    /// Drops the last row and column, provided the corner entry vanishes
    /// (semidefiniteness then forces the whole last row to vanish). This is
    /// the key move behind the Siegel operator.
    pub fn corner_restrict(&self) -> Option<HalfIntegralForm> {
        let g = self.genus;
        if g < 2 || self.entry(g - 1, g - 1) != 0 {
            return None;
        }
        debug_assert!((0..g).all(|i| self.entry(i, g - 1) == 0));
        let mut upper = Vec::with_capacity(tri_len(g - 1));
        for i in 0..g - 1 {
            for j in i..g - 1 {
                upper.push(self.entry(i, j));
            }
        }
        Some(HalfIntegralForm { genus: g - 1, scale: self.scale, upper })
    }

    /// Canonical text rendering `g;d;M11,M12,..,Mgg` (upper triangle,
    /// row-major), shared by the file format and reports.
    pub fn render(&self) -> String {
        let entries: Vec<String> = self.upper.iter().map(|x| x.to_string()).collect();
        format!("{};{};{}", self.genus, self.scale, entries.join(","))
    }

    /// Parses what `render` produces.
    pub fn parse(text: &str) -> Result<HalfIntegralForm> {
        let bad = |m: &str| Error::InvalidForm(format!("{m}: {text}"));
        let mut parts = text.splitn(3, ';');
        let genus: usize =
            parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing genus"))?;
        let scale: i64 =
            parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing scale"))?;
        let entries = parts.next().ok_or_else(|| bad("missing entries"))?;
        let upper: Vec<i64> = entries
            .split(',')
            .map(|s| s.parse::<i64>().map_err(|_| bad("bad entry")))
            .collect::<Result<_>>()?;
        if genus == 0 || upper.len() != tri_len(genus) {
            return Err(bad("wrong entry count"));
        }
        let mut full = vec![0i64; genus * genus];
        let mut it = upper.iter();
        for i in 0..genus {
            for j in i..genus {
                let v = *it.next().unwrap();
                full[i * genus + j] = v;
                full[j * genus + i] = v;
            }
        }
        HalfIntegralForm::new(genus, scale, &full)
    }
}

impl PartialOrd for HalfIntegralForm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HalfIntegralForm {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.genus
            .cmp(&other.genus)
            .then(self.scale.cmp(&other.scale))
            .then(self.trace_scaled().cmp(&other.trace_scaled()))
            .then(self.upper.cmp(&other.upper))
    }
}

impl std::fmt::Display for HalfIntegralForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// Integer matrix with determinant +-1, acting on forms by substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnimodularMatrix {
    genus: usize,
    entries: Vec<i64>,
}

impl UnimodularMatrix {
    pub fn new(genus: usize, entries: Vec<i64>) -> Result<Self> {
        if genus == 0 || entries.len() != genus * genus {
            return Err(Error::InvalidForm("wrong unimodular matrix shape".into()));
        }
        let as128: Vec<i128> = entries.iter().map(|&x| x as i128).collect();
        let det = det_full(genus, &as128);
        if det != 1 && det != -1 {
            return Err(Error::NotUnimodular(det as i64));
        }
        Ok(UnimodularMatrix { genus, entries })
    }

    pub fn identity(genus: usize) -> Self {
        let mut entries = vec![0i64; genus * genus];
        for i in 0..genus {
            entries[i * genus + i] = 1;
        }
        UnimodularMatrix { genus, entries }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.genus + j]
    }

    pub fn det(&self) -> i64 {
        let as128: Vec<i128> = self.entries.iter().map(|&x| x as i128).collect();
        det_full(self.genus, &as128) as i64
    }

    pub fn mul(&self, other: &UnimodularMatrix) -> UnimodularMatrix {
        assert_eq!(self.genus, other.genus);
        let g = self.genus;
        let mut entries = vec![0i64; g * g];
        for i in 0..g {
            for j in 0..g {
                entries[i * g + j] = (0..g).map(|k| self.entry(i, k) * other.entry(k, j)).sum();
            }
        }
        UnimodularMatrix { genus: g, entries }
    }

    pub fn transpose(&self) -> UnimodularMatrix {
        let g = self.genus;
        let mut entries = vec![0i64; g * g];
        for i in 0..g {
            for j in 0..g {
                entries[i * g + j] = self.entry(j, i);
            }
        }
        UnimodularMatrix { genus: g, entries }
    }

    /// Exact integer inverse: adjugate over the +-1 determinant.
    pub fn inverse(&self) -> UnimodularMatrix {
        let g = self.genus;
        let det = self.det();
        let full: Vec<i128> = self.entries.iter().map(|&x| x as i128).collect();
        let mut inv = vec![0i64; g * g];
        for i in 0..g {
            for j in 0..g {
                // Cofactor C_ji for the (i,j) entry of the inverse.
                let mut minor = Vec::with_capacity((g - 1) * (g - 1));
                for r in 0..g {
                    if r == j {
                        continue;
                    }
                    for c in 0..g {
                        if c != i {
                            minor.push(full[r * g + c]);
                        }
                    }
                }
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                inv[i * g + j] = (sign * det_full(g - 1, &minor) * det as i128) as i64;
            }
        }
        UnimodularMatrix { genus: g, entries: inv }
    }
}

/// Gauss-reduces a genus-2 form, returning the reduced representative and a
/// witness U with `t.act(&u)` equal to the representative. The reduced shape
/// is 0 <= 2*M12 <= M11 <= M22 (the sign of M12 is normalised last, using a
/// determinant -1 substitution).
pub fn reduce_g2(t: &HalfIntegralForm) -> Result<(HalfIntegralForm, UnimodularMatrix)> {
    if t.genus() != 2 {
        return Err(Error::Unsupported(format!(
            "reduction implemented for genus 2, got genus {}",
            t.genus()
        )));
    }
    let swap = UnimodularMatrix::new(2, vec![0, 1, 1, 0]).unwrap();
    let flip = UnimodularMatrix::new(2, vec![1, 0, 0, -1]).unwrap();
    let mut cur = t.clone();
    let mut witness = UnimodularMatrix::identity(2);
    fn apply(cur: &mut HalfIntegralForm, witness: &mut UnimodularMatrix, step: &UnimodularMatrix) {
        *cur = cur.act(step);
        *witness = witness.mul(step);
    }
    loop {
        if cur.entry(0, 0) > cur.entry(1, 1) {
            apply(&mut cur, &mut witness, &swap);
        }
        let m11 = cur.entry(0, 0);
        let m12 = cur.entry(0, 1);
        if m11 > 0 && 2 * m12.abs() > m11 {
            // Column substitution x -> x + t*y moving M12 into [-M11/2, M11/2].
            let mut r = m12.rem_euclid(m11);
            let mut shift = (r - m12) / m11;
            if 2 * r > m11 {
                r -= m11;
                shift -= 1;
            }
            debug_assert!(2 * r.abs() <= m11);
            let step = UnimodularMatrix::new(2, vec![1, shift, 0, 1]).unwrap();
            apply(&mut cur, &mut witness, &step);
            continue;
        }
        break;
    }
    if cur.entry(0, 1) < 0 {
        apply(&mut cur, &mut witness, &flip);
    }
    debug_assert!(0 <= 2 * cur.entry(0, 1));
    debug_assert!(2 * cur.entry(0, 1) <= cur.entry(0, 0));
    debug_assert!(cur.entry(0, 0) <= cur.entry(1, 1));
    debug_assert_eq!(t.act(&witness), cur);
    Ok((cur, witness))
}

/// All semidefinite forms at scale d with trace(T) <= bound, in canonical
/// order (trace, then lexicographic upper triangle). Genus 1 and 2 only;
/// storage and the action support higher genus, enumeration does not.
pub fn enumerate(genus: usize, bound: i64, scale: i64) -> Result<Vec<HalfIntegralForm>> {
    if !SCALES.contains(&scale) {
        return Err(Error::InvalidForm(format!("unsupported scale d={scale}")));
    }
    if bound < 0 {
        return Err(Error::Unsupported("negative trace bound".into()));
    }
    let cap = 2 * scale * bound;
    let mut out = Vec::new();
    match genus {
        1 => {
            let mut m11 = 0;
            while m11 <= cap {
                out.push(HalfIntegralForm::from_upper_unchecked(1, scale, vec![m11]));
                m11 += 2;
            }
        }
        2 => {
            let mut m11 = 0;
            while m11 <= cap {
                let mut m22 = 0;
                while m11 + m22 <= cap {
                    let lim = isqrt(m11 * m22);
                    for m12 in -lim..=lim {
                        if m12 * m12 <= m11 * m22 {
                            out.push(HalfIntegralForm::from_upper_unchecked(
                                2,
                                scale,
                                vec![m11, m12, m22],
                            ));
                        }
                    }
                    m22 += 2;
                }
                m11 += 2;
            }
            out.sort();
        }
        g => {
            return Err(Error::Unsupported(format!(
                "enumeration implemented for genus 1 and 2, got genus {g}"
            )));
        }
    }
    Ok(out)
}
