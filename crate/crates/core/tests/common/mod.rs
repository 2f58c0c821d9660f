// Independent reference implementations used by the integration tests and
// the acceptance harness. Everything here is written the slow, obvious way.
#![allow(dead_code)]

use bcasc_core::ann::RotationSet;
use bcasc_core::codes::SphericalCode;
use bcasc_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0xa11ce)
}

pub fn random_complex(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

pub fn unit(v: Vec<Complex64>) -> Vec<Complex64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn dist2_complex(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

pub fn dist2_real(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let t = a[i] - b[i];
        s += t * t;
    }
    s
}

/// `(id, dist2)` of the `k` nearest points of `set`, sorted by distance then id.
pub fn brute_knn(set: &RotationSet, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut all = brute_all(set, q, exclude);
    all.truncate(k);
    all
}

pub fn brute_radius(set: &RotationSet, q: &[f64], r: f64, exclude: Option<usize>) -> Vec<(usize, f64)> {
    brute_all(set, q, exclude).into_iter().filter(|&(_, d2)| d2 <= r * r).collect()
}

fn brute_all(set: &RotationSet, q: &[f64], exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..set.len())
        .filter(|&id| Some(id / set.n_rot()) != exclude)
        .map(|id| (id, dist2_real(q, set.coords(id))))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

/// Rotation `k` of column `v`, computed with std trigonometry.
pub fn rotation(code: &SphericalCode, v: usize, k: usize, n_rot: usize) -> Vec<Complex64> {
    let phi = 2.0 * std::f64::consts::PI * k as f64 / n_rot as f64;
    let p = Complex64::new(phi.cos(), phi.sin());
    code.column(v).iter().map(|z| z * p).collect()
}

/// Unscaled double sum `sum_{v != u} sum_k (c_u - x) / |c_u - x|^nu`, normalized.
pub fn naive_force(code: &SphericalCode, u: usize, nu: u32, n_rot: usize) -> Vec<Complex64> {
    let cu = code.column(u);
    let mut sum = vec![Complex64::new(0.0, 0.0); code.m()];
    for v in 0..code.n() {
        if v == u {
            continue;
        }
        for k in 0..n_rot {
            let x = rotation(code, v, k, n_rot);
            let d = dist2_complex(cu, &x).sqrt();
            let w = d.powi(-(nu as i32));
            for i in 0..code.m() {
                sum[i] += (cu[i] - x[i]) * w;
            }
        }
    }
    unit(sum)
}

pub fn naive_coherence(code: &SphericalCode) -> f64 {
    let mut mu: f64 = 0.0;
    for u in 0..code.n() {
        for v in 0..code.n() {
            if u != v {
                let g: Complex64 = (0..code.m()).map(|i| code.get(i, u).conj() * code.get(i, v)).sum();
                mu = mu.max(g.norm());
            }
        }
    }
    mu
}

/// `y_i = sum_j A_ij x_j`.
pub fn naive_matvec(a: &SphericalCode, x: &[Complex64]) -> Vec<Complex64> {
    (0..a.m()).map(|i| (0..a.n()).map(|j| a.get(i, j) * x[j]).sum()).collect()
}

/// Partial DFT entry `e^{-2 pi i j k / n} / sqrt(m)` by direct evaluation.
pub fn dft_entry(j: usize, k: usize, n: usize, m: usize) -> Complex64 {
    let theta = -2.0 * std::f64::consts::PI * (j as f64) * (k as f64) / n as f64;
    Complex64::new(theta.cos(), theta.sin()) / (m as f64).sqrt()
}

/// Indices of the `s` largest magnitudes, ascending.
pub fn top_support(x: &[Complex64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].norm().partial_cmp(&x[a].norm()).unwrap().then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
