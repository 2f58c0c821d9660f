//! Normalized repulsive force on one codeword.
//!
//! The force on `c_u` sums `(c_u - x) / |c_u - x|^nu` over the rotations `x`
//! of the other codewords. Weights are evaluated relative to the nearest
//! rotation, `w = (d_min / d)^nu`, so huge exponents neither overflow nor
//! underflow; the common factor disappears when the sum is normalized.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::ann::{unpack_real, NeighborList, RotationSet};
use crate::codes::SphericalCode;
use crate::math;
use crate::{Error, Result};

/// Weights below this are dropped.
pub const MIN_WEIGHT: f64 = 1e-300;
/// Distances below this make the force undefined.
pub const COINCIDENT_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Force {
    /// Unit vector in `C^m`.
    pub direction: Vec<Complex64>,
    /// `ln` of the magnitude of the unnormalized sum. Diagnostic only.
    pub raw_scale_log: f64,
}

fn check_nu(nu: u32) -> Result<u32> {
    if nu < 2 || nu % 2 != 0 {
        return Err(Error::InvalidExponent(nu));
    }
    Ok(nu / 2)
}

fn finish(mut sum: Vec<Complex64>, nu: u32, d2_min: f64) -> Result<Force> {
    let norm = math::sqrt(math::norm_sqr(&sum));
    if !(norm >= MIN_WEIGHT) {
        return Err(Error::DegenerateForce);
    }
    let raw_scale_log = math::ln(norm) - 0.5 * nu as f64 * math::ln(d2_min);
    for z in sum.iter_mut() {
        *z /= norm;
    }
    Ok(Force { direction: sum, raw_scale_log })
}

/// Force on codeword `u` from every rotation of every other codeword.
pub fn force_full(code: &SphericalCode, u: usize, nu: u32, n_rot: usize) -> Result<Force> {
    if n_rot < 2 {
        return Err(Error::InvalidConfig("n_rot must be at least 2"));
    }
    if u >= code.n() {
        return Err(Error::InvalidConfig("codeword index out of range"));
    }
    let phases = crate::ann::rotation_phases(n_rot);
    let pairs: Vec<(usize, usize)> =
        (0..code.n()).filter(|&v| v != u).flat_map(|v| (0..n_rot).map(move |k| (v, k))).collect();
    let mut scratch = ForceScratch::default();
    force_from_pairs(code.column(u), code, &phases, &pairs, nu, &mut scratch)
}

/// Force on `c_u` restricted to `neighbors`, whose points are read from `set`.
pub fn force_ann(c_u: &[Complex64], neighbors: &NeighborList, set: &RotationSet, nu: u32) -> Result<Force> {
    let vectors: Vec<Vec<Complex64>> = neighbors.iter().map(|nb| unpack_real(set.coords(nb.id))).collect();
    force_from_vectors(c_u, &vectors, nu).map_err(|e| match e {
        Error::CoincidentRotation { other, .. } => {
            let nb = neighbors.entries()[other];
            Error::CoincidentRotation { other: nb.owner, rotation: nb.rotation }
        }
        e => e,
    })
}

/// Force on `c_u` from explicit neighbor vectors. A coincidence error names
/// the offending vector by its position in `neighbors`.
pub fn force_from_vectors(c_u: &[Complex64], neighbors: &[Vec<Complex64>], nu: u32) -> Result<Force> {
    let half = check_nu(nu)?;
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let mut d2 = Vec::with_capacity(neighbors.len());
    for (j, v) in neighbors.iter().enumerate() {
        if v.len() != c_u.len() {
            return Err(Error::DimensionMismatch { expected: c_u.len(), found: v.len() });
        }
        let dist2: f64 = c_u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum();
        if !(dist2 >= COINCIDENT_DISTANCE * COINCIDENT_DISTANCE) {
            return Err(Error::CoincidentRotation { other: j, rotation: 0 });
        }
        d2.push(dist2);
    }
    let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sum = vec![Complex64::new(0.0, 0.0); c_u.len()];
    for (v, &dist2) in neighbors.iter().zip(&d2) {
        let w = math::powu(d2_min / dist2, half);
        if w < MIN_WEIGHT {
            continue;
        }
        for ((s, a), b) in sum.iter_mut().zip(c_u).zip(v) {
            *s += (a - b) * w;
        }
    }
    finish(sum, nu, d2_min)
}

/// Reusable buffers for [`force_from_pairs`].
#[derive(Debug, Default)]
pub(crate) struct ForceScratch {
    d2: Vec<f64>,
    groups: Vec<(usize, Complex64)>,
}

/// Force on `c_u` from rotations `(v, k)` of columns of `code`, `pairs` sorted
/// by `(v, k)`. Rotations of one codeword share a single inner product, so
/// `d^2 = |c_u|^2 + |c_v|^2 - 2 Re(e^{i phi_k} <c_u, c_v>)`, and their terms
/// are combined as `W_v c_u - Z_v c_v` with `W_v = sum w`, `Z_v = sum w e^{i phi_k}`.
pub(crate) fn force_from_pairs(
    c_u: &[Complex64],
    code: &SphericalCode,
    phases: &[Complex64],
    pairs: &[(usize, usize)],
    nu: u32,
    scratch: &mut ForceScratch,
) -> Result<Force> {
    let half = check_nu(nu)?;
    if pairs.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let nu_norm = math::norm_sqr(c_u);
    scratch.d2.clear();
    scratch.groups.clear();
    let mut d2_min = f64::INFINITY;
    let mut current = usize::MAX;
    let mut g = Complex64::new(0.0, 0.0);
    let mut cv_norm = 0.0;
    for &(v, k) in pairs {
        if v != current {
            current = v;
            let c_v = code.column(v);
            g = math::inner(c_u, c_v);
            cv_norm = math::norm_sqr(c_v);
            scratch.groups.push((v, g));
        }
        let p = phases[k];
        let re = p.re * g.re - p.im * g.im;
        let dist2 = nu_norm + cv_norm - 2.0 * re;
        if !(dist2 >= COINCIDENT_DISTANCE * COINCIDENT_DISTANCE) {
            return Err(Error::CoincidentRotation { other: v, rotation: k });
        }
        d2_min = d2_min.min(dist2);
        scratch.d2.push(dist2);
    }

    let mut sum = vec![Complex64::new(0.0, 0.0); c_u.len()];
    let mut i = 0;
    for &(v, _) in &scratch.groups {
        let mut w_sum = 0.0;
        let mut z_sum = Complex64::new(0.0, 0.0);
        while i < pairs.len() && pairs[i].0 == v {
            let w = math::powu(d2_min / scratch.d2[i], half);
            if w >= MIN_WEIGHT {
                w_sum += w;
                z_sum += phases[pairs[i].1] * w;
            }
            i += 1;
        }
        if w_sum == 0.0 {
            continue;
        }
        for ((s, a), b) in sum.iter_mut().zip(c_u).zip(code.column(v)) {
            *s += a * w_sum - z_sum * b;
        }
    }
    finish(sum, nu, d2_min)
}
