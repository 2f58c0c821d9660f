//! Complex spherical codes: storage, normalization, coherence and the
//! generalized potential used as a convergence diagnostic.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::math;
use crate::seed;
use crate::{Error, Result};

/// Columns of a [`SphericalCode`] must have unit norm to this tolerance.
pub const UNIT_NORM_TOL: f64 = 1e-12;

const ZERO_NORM: f64 = 1e-300;

/// A unit-norm complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    entries: Vec<Complex64>,
}

impl Codeword {
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }
}

impl AsRef<[Complex64]> for Codeword {
    fn as_ref(&self) -> &[Complex64] {
        &self.entries
    }
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &[Complex64]) -> Result<Codeword> {
    let mut entries = v.to_vec();
    normalize_in_place(&mut entries)?;
    Ok(Codeword { entries })
}

pub(crate) fn normalize_in_place(v: &mut [Complex64]) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = math::sqrt(math::norm_sqr(v));
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    for z in v.iter_mut() {
        *z /= norm;
    }
    Ok(())
}

/// `n` unit-norm codewords in `C^m`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCode {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl SphericalCode {
    /// Wraps column-major data whose columns are already unit-norm.
    pub fn from_column_major(m: usize, n: usize, data: Vec<Complex64>) -> Result<Self> {
        check_shape(m, n, data.len())?;
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (column, c) in data.chunks_exact(m).enumerate() {
            let norm = math::sqrt(math::norm_sqr(c));
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm { column, norm });
            }
        }
        Ok(SphericalCode { m, n, data })
    }

    /// Normalizes every column of arbitrary (nonzero) column-major data.
    pub fn normalized(m: usize, n: usize, mut data: Vec<Complex64>) -> Result<Self> {
        check_shape(m, n, data.len())?;
        for c in data.chunks_exact_mut(m) {
            normalize_in_place(c)?;
        }
        Ok(SphericalCode { m, n, data })
    }

    pub fn from_columns(columns: Vec<Codeword>) -> Result<Self> {
        let n = columns.len();
        let m = columns.first().map_or(0, Codeword::m);
        let mut data = Vec::with_capacity(m * n);
        for c in &columns {
            if c.m() != m {
                return Err(Error::DimensionMismatch { expected: m, found: c.m() });
            }
            data.extend_from_slice(c.entries());
        }
        check_shape(m, n, data.len())?;
        Ok(SphericalCode { m, n, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, u: usize) -> &[Complex64] {
        &self.data[u * self.m..(u + 1) * self.m]
    }

    pub(crate) fn column_mut(&mut self, u: usize) -> &mut [Complex64] {
        &mut self.data[u * self.m..(u + 1) * self.m]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[Complex64]> + '_ {
        self.data.chunks_exact(self.m)
    }

    pub fn codeword(&self, u: usize) -> Codeword {
        Codeword { entries: self.column(u).to_vec() }
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Entry in row `row` of column `col`.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.m + row]
    }
}

fn check_shape(m: usize, n: usize, len: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig("code dimensions must be positive"));
    }
    if len != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, found: len });
    }
    Ok(())
}

/// Largest absolute inner product between distinct columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport {
    pub mu: f64,
    /// First pair `(u, v)`, `u < v`, attaining `mu`.
    pub argmax_pair: (usize, usize),
}

/// Mutual coherence of a unit-norm code.
pub fn coherence(code: &SphericalCode) -> Result<CoherenceReport> {
    if code.n() < 2 {
        return Err(Error::TooFewCodewords(code.n()));
    }
    let mut best = CoherenceReport { mu: -1.0, argmax_pair: (0, 1) };
    for u in 0..code.n() {
        let cu = code.column(u);
        for v in u + 1..code.n() {
            let g = math::abs(math::inner(cu, code.column(v)));
            if g > best.mu {
                best = CoherenceReport { mu: g, argmax_pair: (u, v) };
            }
        }
    }
    // rounding can push |<c_u, c_v>| a hair above 1 for parallel columns
    best.mu = best.mu.min(1.0);
    Ok(best)
}

/// Generalized potential `sum_{u<v} ||c_u - c_v||^{2 - nu}`.
pub fn potential_energy(code: &SphericalCode, nu: u32) -> Result<f64> {
    if nu < 2 {
        return Err(Error::InvalidExponent(nu));
    }
    let exponent = (2.0 - f64::from(nu)) / 2.0;
    let mut total = 0.0;
    for u in 0..code.n() {
        let cu = code.column(u);
        for v in u + 1..code.n() {
            let d2: f64 = cu
                .iter()
                .zip(code.column(v))
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            if d2 < 1e-24 {
                return Err(Error::CoincidentCodewords(u, v));
            }
            total += math::powf(d2, exponent);
        }
    }
    Ok(total)
}

/// Code with i.i.d. standard complex Gaussian entries (real and imaginary
/// parts each `N(0, 1)`), columns normalized.
pub fn random_spherical_code(m: usize, n: usize, seed: u64) -> Result<SphericalCode> {
    check_shape(m, n, m * n)?;
    let mut rng = seed::rng(seed);
    let data: Vec<Complex64> = (0..m * n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    SphericalCode::normalized(m, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basis(m: usize, n: usize) -> SphericalCode {
        let mut data = vec![c(0.0, 0.0); m * n];
        for u in 0..n {
            data[u * m + u] = c(1.0, 0.0);
        }
        SphericalCode::from_column_major(m, n, data).unwrap()
    }

    #[test]
    fn normalize_scales_three_four_five() {
        let w = normalize(&[c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert!((w.entries()[0] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((w.entries()[1] - c(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn normalize_is_idempotent_on_unit_vectors() {
        let v = [c(0.6, 0.0), c(0.0, 0.8)];
        let w = normalize(&v).unwrap();
        for (a, b) in w.entries().iter().zip(&v) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_zero() {
        assert_eq!(normalize(&[c(0.0, 0.0); 3]), Err(Error::ZeroVector));
        assert_eq!(normalize(&[c(f64::NAN, 0.0)]), Err(Error::NonFinite));
    }

    #[test]
    fn coherence_of_identity_is_zero() {
        assert_eq!(coherence(&basis(4, 4)).unwrap().mu, 0.0);
    }

    #[test]
    fn coherence_of_repeated_column_is_one() {
        let cw = normalize(&[c(1.0, 2.0), c(-0.5, 0.25)]).unwrap();
        let other = normalize(&[c(0.3, 0.0), c(1.0, 1.0)]).unwrap();
        let code = SphericalCode::from_columns(vec![other, cw.clone(), cw]).unwrap();
        let r = coherence(&code).unwrap();
        assert!((r.mu - 1.0).abs() < 1e-12);
        assert_eq!(r.argmax_pair, (1, 2));
    }

    #[test]
    fn coherence_of_three_vectors_in_c2() {
        // <e1,e2> = 0, <e1,(e1+e2)/sqrt2> = <e2,(e1+e2)/sqrt2> = 1/sqrt2
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let data = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(s, 0.0), c(s, 0.0)];
        let code = SphericalCode::from_column_major(2, 3, data).unwrap();
        let r = coherence(&code).unwrap();
        assert!((r.mu - s).abs() < 1e-12);
        assert_eq!(r.argmax_pair, (0, 2));
    }

    #[test]
    fn coherence_needs_two_columns() {
        assert_eq!(coherence(&basis(3, 1)), Err(Error::TooFewCodewords(1)));
    }

    #[test]
    fn potential_of_orthogonal_pair() {
        let e = potential_energy(&basis(2, 2), 4).unwrap();
        assert!((e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn potential_with_nu_two_counts_pairs() {
        let code = random_spherical_code(3, 7, 11).unwrap();
        assert!((potential_energy(&code, 2).unwrap() - 21.0).abs() < 1e-12);
    }

    #[test]
    fn potential_rejects_duplicates() {
        let cw = normalize(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let code = SphericalCode::from_columns(vec![cw.clone(), cw]).unwrap();
        assert_eq!(potential_energy(&code, 4), Err(Error::CoincidentCodewords(0, 1)));
    }

    #[test]
    fn potential_drops_when_closest_pair_separates() {
        // c0 = (1, 0), c1 = (cos t, sin t), c2 = (0, i): both distances to c2
        // are sqrt(2) for every t, so only the closest pair (0, 1) changes
        let build = |t: f64| {
            let data = vec![
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(libm::cos(t), 0.0),
                c(libm::sin(t), 0.0),
                c(0.0, 0.0),
                c(0.0, 1.0),
            ];
            SphericalCode::from_column_major(2, 3, data).unwrap()
        };
        for nu in [3, 4, 8] {
            let tight = potential_energy(&build(0.3), nu).unwrap();
            let loose = potential_energy(&build(0.5), nu).unwrap();
            assert!(loose < tight);
        }
    }

    #[test]
    fn random_code_is_deterministic_and_unit_norm() {
        let a = random_spherical_code(2, 3, 7).unwrap();
        let b = random_spherical_code(2, 3, 7).unwrap();
        assert_eq!(a, b);
        for col in a.columns() {
            assert!((math::norm_sqr(col) - 1.0).abs() < 1e-12);
        }
        assert_ne!(a, random_spherical_code(2, 3, 8).unwrap());
    }

    #[test]
    fn from_column_major_rejects_non_unit_columns() {
        let r = SphericalCode::from_column_major(1, 2, vec![c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(r, Err(Error::NotUnitNorm { column: 1, .. })));
    }
}
