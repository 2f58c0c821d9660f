//! Baseline measurement matrices.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::codes::{self, SphericalCode};
use crate::math;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MatrixKind {
    Gaussian,
    Fourier,
    AnnBcasc,
    ReferenceBcasc,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 4] =
        [MatrixKind::Gaussian, MatrixKind::Fourier, MatrixKind::AnnBcasc, MatrixKind::ReferenceBcasc];

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Fourier => "fourier",
            MatrixKind::AnnBcasc => "ann-bcasc",
            MatrixKind::ReferenceBcasc => "reference-bcasc",
        }
    }

    pub fn from_name(name: &str) -> Option<MatrixKind> {
        MatrixKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// I.i.d. complex Gaussian entries, columns normalized.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<SphericalCode> {
    codes::random_spherical_code(m, n, seed)
}

/// `m` distinct rows of the `n x n` DFT drawn uniformly at random.
pub fn fourier_rows(m: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidConfig("Fourier ensemble needs 1 <= m <= n"));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed);
    let (chosen, _) = rows.partial_shuffle(&mut rng, m);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// DFT submatrix with entries `e^{-2 pi i j k / n} / sqrt(m)` on rows `rows`.
pub fn dft_rows(rows: &[usize], n: usize) -> Result<SphericalCode> {
    let m = rows.len();
    if m == 0 || rows.iter().any(|&j| j >= n) {
        return Err(Error::InvalidConfig("row index out of range"));
    }
    let scale = 1.0 / math::sqrt(m as f64);
    let mut data = vec![Complex64::new(0.0, 0.0); m * n];
    for k in 0..n {
        for (w, &j) in rows.iter().enumerate() {
            let r = (j * k) % n;
            let theta = -2.0 * core::f64::consts::PI * r as f64 / n as f64;
            data[k * m + w] = math::cis(theta) * scale;
        }
    }
    SphericalCode::from_column_major(m, n, data)
}

pub fn fourier_ensemble(m: usize, n: usize, seed: u64) -> Result<SphericalCode> {
    dft_rows(&fourier_rows(m, n, seed)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_deterministic_and_normalized() {
        let a = gaussian_matrix(8, 64, 3).unwrap();
        assert_eq!(a, gaussian_matrix(8, 64, 3).unwrap());
        assert_ne!(a, gaussian_matrix(8, 64, 4).unwrap());
        for c in a.columns() {
            assert!((math::norm_sqr(c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_dft_is_orthogonal() {
        let f = fourier_ensemble(16, 16, 1).unwrap();
        assert!(codes::coherence(&f).unwrap().mu < 1e-12);
    }

    #[test]
    fn rows_are_distinct_sorted_and_seeded() {
        let rows = fourier_rows(10, 64, 9).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rows, fourier_rows(10, 64, 9).unwrap());
        assert!(fourier_rows(0, 4, 0).is_err());
        assert!(fourier_rows(5, 4, 0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in MatrixKind::ALL {
            assert_eq!(MatrixKind::from_name(k.name()), Some(k));
        }
        assert_eq!(MatrixKind::from_name("dct"), None);
    }
}
