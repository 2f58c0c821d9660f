//! Sparse recovery experiments.
//!
//! Signals are `s`-sparse complex vectors of unit norm, measured as `y = A x`
//! and recovered by basis pursuit (`min |x|_1` subject to `A x = y`) solved
//! with a primal-dual (Chambolle-Pock) iteration. A phase diagram sweeps
//! `delta = m / n` and `rho = s / m` over a regular grid.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::codes::{self, SphericalCode};
use crate::constructor::{self, ConstructionConfig};
use crate::ensembles::{self, MatrixKind};
use crate::math;
use crate::seed;
use crate::{Error, Result};

/// Errors below this count as exact recovery.
pub const EXACT_RECOVERY: f64 = 1e-6;
/// Floor applied before taking `-log10` of an error.
pub const ERROR_FLOOR: f64 = 1e-16;
pub const BIN_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub x: Vec<Complex64>,
    /// Sorted ascending.
    pub support: Vec<usize>,
}

impl SparseSignal {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }
}

/// Uniformly random support of size `s`, complex Gaussian values, unit norm.
/// `s = 0` gives the zero vector.
pub fn sparse_signal(n: usize, s: usize, seed: u64) -> Result<SparseSignal> {
    if s > n {
        return Err(Error::InvalidConfig("sparsity exceeds signal length"));
    }
    let mut rng = seed::rng(seed);
    let mut support = rand::seq::index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for &j in &support {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        x[j] = Complex64::new(re, im);
    }
    if s > 0 {
        codes::normalize_in_place(&mut x)?;
    }
    Ok(SparseSignal { x, support })
}

/// `y = A x`.
pub fn measure(a: &SphericalCode, x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: x.len() });
    }
    let mut y = vec![Complex64::new(0.0, 0.0); a.m()];
    apply(a, x, &mut y);
    Ok(y)
}

fn apply(a: &SphericalCode, x: &[Complex64], y: &mut [Complex64]) {
    y.fill(Complex64::new(0.0, 0.0));
    for (col, &xk) in a.columns().zip(x) {
        if xk.re == 0.0 && xk.im == 0.0 {
            continue;
        }
        for (yi, &aik) in y.iter_mut().zip(col) {
            *yi += aik * xk;
        }
    }
}

fn apply_adjoint(a: &SphericalCode, z: &[Complex64], out: &mut [Complex64]) {
    for (o, col) in out.iter_mut().zip(a.columns()) {
        *o = math::inner(col, z);
    }
}

fn norm(v: &[Complex64]) -> f64 {
    math::sqrt(math::norm_sqr(v))
}

/// Largest singular value of `a` by power iteration on `A^H A`.
pub fn operator_norm(a: &SphericalCode, max_iters: usize, tol: f64) -> f64 {
    let mut rng = seed::rng(0x5eed);
    let mut v: Vec<Complex64> = (0..a.n())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let mut av = vec![Complex64::new(0.0, 0.0); a.m()];
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|z| *z /= nv);
        apply(a, &v, &mut av);
        let next = norm(&av);
        apply_adjoint(a, &av, &mut v);
        let done = (next - estimate).abs() <= tol * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverParams {
    pub max_iters: usize,
    pub stop_tol: f64,
    /// Primal and dual step sizes are `step_factor / |A|`.
    pub step_factor: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { max_iters: 20_000, stop_tol: 1e-10, step_factor: 0.99 }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryTask<'a> {
    pub a: &'a SphericalCode,
    pub y: Vec<Complex64>,
    pub params: SolverParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub x: Vec<Complex64>,
    /// Both stopping criteria met before `max_iters`.
    pub converged: bool,
    pub iterations: usize,
    /// `|A x - y|`.
    pub residual: f64,
}

fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    let r = math::abs(z);
    if r <= t {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((r - t) / r)
    }
}

/// Basis pursuit by primal-dual iteration.
///
/// Stops once `|A x - y| < stop_tol` and the relative change of `x` is below
/// `stop_tol`; otherwise returns the last iterate with `converged = false`.
pub fn recover_l1(task: &RecoveryTask<'_>) -> Result<Recovery> {
    let a = task.a;
    let (m, n) = (a.m(), a.n());
    if task.y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: task.y.len() });
    }
    let p = task.params;
    if !(p.step_factor > 0.0 && p.step_factor <= 1.0) {
        return Err(Error::InvalidConfig("step factor must lie in (0, 1]"));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    if norm(&task.y) == 0.0 {
        return Ok(Recovery { x, converged: true, iterations: 0, residual: 0.0 });
    }
    let l = operator_norm(a, 100, 1e-8);
    let step = p.step_factor / l;
    let (sigma, tau) = (step, step);

    let mut z = vec![zero; m];
    let mut ax = vec![zero; m];
    let mut ax_bar = vec![zero; m];
    let mut ax_new = vec![zero; m];
    let mut x_new = vec![zero; n];
    let mut grad = vec![zero; n];
    let mut residual = norm(&task.y);
    for it in 1..=p.max_iters {
        for ((zi, abi), yi) in z.iter_mut().zip(&ax_bar).zip(&task.y) {
            *zi += (abi - yi) * sigma;
        }
        apply_adjoint(a, &z, &mut grad);
        for ((xn, xo), g) in x_new.iter_mut().zip(&x).zip(&grad) {
            *xn = soft_threshold(xo - g * tau, tau);
        }
        apply(a, &x_new, &mut ax_new);
        let mut r2 = 0.0;
        for (i, (an, yi)) in ax_new.iter().zip(&task.y).enumerate() {
            r2 += (an - yi).norm_sqr();
            ax_bar[i] = an * 2.0 - ax[i];
        }
        residual = math::sqrt(r2);
        let mut change2 = 0.0;
        for (xn, xo) in x_new.iter().zip(&x) {
            change2 += (xn - xo).norm_sqr();
        }
        let change = math::sqrt(change2);
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut ax, &mut ax_new);
        if residual < p.stop_tol && change < p.stop_tol * norm(&x).max(f64::MIN_POSITIVE) {
            return Ok(Recovery { x, converged: true, iterations: it, residual });
        }
    }
    Ok(Recovery { x, converged: false, iterations: p.max_iters, residual })
}

/// `|xhat - x| / |x|`, or `|xhat|` when `x = 0`.
pub fn recovery_error(xhat: &[Complex64], x: &[Complex64]) -> Result<f64> {
    if xhat.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: xhat.len() });
    }
    let diff: f64 = xhat.iter().zip(x).map(|(a, b)| (a - b).norm_sqr()).sum();
    let nx = norm(x);
    if nx == 0.0 {
        Ok(norm(xhat))
    } else {
        Ok(math::sqrt(diff) / nx)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseDiagramConfig {
    pub grid_steps: usize,
    pub seed: u64,
    pub solver: SolverParams,
    /// Used for the constructed matrix kinds.
    pub construction: ConstructionConfig,
}

impl Default for PhaseDiagramConfig {
    fn default() -> Self {
        PhaseDiagramConfig {
            grid_steps: 16,
            seed: 0,
            solver: SolverParams::default(),
            construction: ConstructionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub delta_index: usize,
    pub rho_index: usize,
    pub delta: f64,
    pub rho: f64,
    pub m: usize,
    pub s: usize,
    pub matrix_seed: u64,
    pub signal_seed: u64,
    /// Normalized recovery error; `Err` if the cell could not be evaluated.
    pub outcome: core::result::Result<CellResult, Error>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub error: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Cell {
    pub fn error(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub n: usize,
    pub kind: MatrixKind,
    pub grid_steps: usize,
    /// Row-major in `(delta_index, rho_index)`.
    pub cells: Vec<Cell>,
    /// Coherence of each delta column's matrix, if it was built.
    pub column_coherence: Vec<Option<f64>>,
}

impl PhaseDiagram {
    pub fn cell(&self, delta_index: usize, rho_index: usize) -> &Cell {
        &self.cells[delta_index * self.grid_steps + rho_index]
    }

    pub fn exact_recoveries(&self) -> usize {
        self.cells.iter().filter(|c| c.error().is_some_and(|e| e < EXACT_RECOVERY)).count()
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

/// `k / steps` for `k = 1..=steps`.
pub fn grid_values(steps: usize) -> Vec<f64> {
    (1..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// `m = round(delta n)` clamped to `[1, n]`.
pub fn rows_for(delta: f64, n: usize) -> usize {
    (math::round(delta * n as f64) as usize).clamp(1, n)
}

/// `s = round(rho m)` clamped to `[0, m]`.
pub fn sparsity_for(rho: f64, m: usize) -> usize {
    (math::round(rho * m as f64) as usize).min(m)
}

/// Builds the measurement matrix of one delta column. Constructed kinds start
/// from the Gaussian matrix of the same seed.
pub fn build_matrix(kind: MatrixKind, m: usize, n: usize, seed: u64, construction: &ConstructionConfig) -> Result<SphericalCode> {
    match kind {
        MatrixKind::Gaussian => ensembles::gaussian_matrix(m, n, seed),
        MatrixKind::Fourier => ensembles::fourier_ensemble(m, n, seed),
        MatrixKind::AnnBcasc => {
            let initial = ensembles::gaussian_matrix(m, n, seed)?;
            Ok(constructor::construct(construction, &initial)?.0)
        }
        MatrixKind::ReferenceBcasc => {
            let initial = ensembles::gaussian_matrix(m, n, seed)?;
            Ok(constructor::construct_reference(construction, &initial)?.0)
        }
    }
}

/// Solves one cell: fresh signal, measurement, recovery, error.
pub fn evaluate_cell(a: &SphericalCode, s: usize, signal_seed: u64, solver: SolverParams) -> Result<CellResult> {
    let signal = sparse_signal(a.n(), s, signal_seed)?;
    let y = measure(a, &signal.x)?;
    let rec = recover_l1(&RecoveryTask { a, y, params: solver })?;
    Ok(CellResult {
        error: recovery_error(&rec.x, &signal.x)?,
        converged: rec.converged,
        iterations: rec.iterations,
    })
}

/// One delta column of a phase diagram: the matrix for `delta_index` and the
/// `grid_steps` cells evaluated with it, plus the matrix coherence.
pub fn phase_column(
    n: usize,
    kind: MatrixKind,
    config: &PhaseDiagramConfig,
    delta_index: usize,
) -> Result<(Vec<Cell>, Option<f64>)> {
    let steps = config.grid_steps;
    if steps == 0 || n < steps {
        return Err(Error::InvalidConfig("need n >= grid_steps >= 1"));
    }
    if delta_index >= steps {
        return Err(Error::InvalidConfig("delta index out of range"));
    }
    let grid = grid_values(steps);
    let (di, delta) = (delta_index, grid[delta_index]);
    let m = rows_for(delta, n);
    let matrix_seed = seed::derive(config.seed, &[di as u64]);
    let matrix = build_matrix(kind, m, n, matrix_seed, &config.construction);
    let coherence = matrix.as_ref().ok().and_then(|a| codes::coherence(a).ok()).map(|r| r.mu);
    let cells = grid
        .iter()
        .enumerate()
        .map(|(ri, &rho)| {
            let s = sparsity_for(rho, m);
            let signal_seed = seed::derive(config.seed, &[di as u64, ri as u64]);
            let outcome = match &matrix {
                Ok(a) => evaluate_cell(a, s, signal_seed, config.solver),
                Err(e) => Err(e.clone()),
            };
            Cell { delta_index: di, rho_index: ri, delta, rho, m, s, matrix_seed, signal_seed, outcome }
        })
        .collect();
    Ok((cells, coherence))
}

/// Full `grid_steps x grid_steps` sweep. One matrix per delta column with seed
/// `derive(seed, [delta_index])`; one signal per cell with seed
/// `derive(seed, [delta_index, rho_index])`. Failures are recorded per cell.
pub fn phase_diagram(n: usize, kind: MatrixKind, config: &PhaseDiagramConfig) -> Result<PhaseDiagram> {
    let steps = config.grid_steps;
    if steps == 0 || n < steps {
        return Err(Error::InvalidConfig("need n >= grid_steps >= 1"));
    }
    let mut cells = Vec::with_capacity(steps * steps);
    let mut column_coherence = Vec::with_capacity(steps);
    for di in 0..steps {
        let (column, mu) = phase_column(n, kind, config, di)?;
        cells.extend(column);
        column_coherence.push(mu);
    }
    Ok(PhaseDiagram { n, kind, grid_steps: steps, cells, column_coherence })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStatistics {
    pub bin_width: f64,
    /// `counts.len() + 1` bin edges; bin `i` is `[edges[i], edges[i + 1])`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `S(edges[i])`: fraction of samples strictly above the edge.
    pub survivor: Vec<f64>,
    pub samples: usize,
}

/// `-log10(max(error, 1e-16))`.
pub fn neg_log_error(error: f64) -> f64 {
    -math::log10(error.max(ERROR_FLOOR))
}

/// Histogram of `-log10` errors in bins of width 0.5 and the survivor
/// function at the bin edges. The edges run from one bin below the lowest
/// sample to one bin above the highest, so `S` starts at 1 and ends at 0.
pub fn error_statistics_from(errors: &[f64]) -> Result<ErrorStatistics> {
    if errors.is_empty() {
        return Err(Error::InvalidConfig("no errors to summarize"));
    }
    let xs: Vec<f64> = errors.iter().map(|&e| neg_log_error(e)).collect();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let bin = |x: f64| math::floor(x / BIN_WIDTH) as i64;
    let lo = xs.iter().map(|&x| bin(x)).min().unwrap_or(0) - 1;
    let hi = xs.iter().map(|&x| bin(x)).max().unwrap_or(0) + 1;
    let nbins = (hi - lo + 1) as usize;
    let mut counts = vec![0usize; nbins];
    for &x in &xs {
        counts[(bin(x) - lo) as usize] += 1;
    }
    let edges: Vec<f64> = (0..=nbins).map(|i| (lo + i as i64) as f64 * BIN_WIDTH).collect();
    let total = xs.len() as f64;
    let survivor = edges.iter().map(|&e| xs.iter().filter(|&&x| x > e).count() as f64 / total).collect();
    Ok(ErrorStatistics { bin_width: BIN_WIDTH, edges, counts, survivor, samples: xs.len() })
}

/// Statistics over the evaluated cells of `diagram`.
pub fn error_statistics(diagram: &PhaseDiagram) -> Result<ErrorStatistics> {
    let errors: Vec<f64> = diagram.cells.iter().filter_map(Cell::error).collect();
    error_statistics_from(&errors)
}

impl ErrorStatistics {
    /// Survivor function at an arbitrary `xi`.
    pub fn survivor_at(&self, xi: f64) -> f64 {
        // S is a step function constant on (edge_i, edge_{i+1}] only at bin
        // resolution; use the value at the greatest edge <= xi
        match self.edges.iter().rposition(|&e| e <= xi) {
            Some(i) => self.survivor[i],
            None => 1.0,
        }
    }

    /// Longest run of empty bins lying between two non-empty bins.
    pub fn largest_interior_gap(&self) -> usize {
        let occupied: Vec<usize> = (0..self.counts.len()).filter(|&i| self.counts[i] > 0).collect();
        occupied.windows(2).map(|w| w[1] - w[0] - 1).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_shape() {
        let z = sparse_signal(10, 0, 1).unwrap();
        assert!(z.x.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        let d = sparse_signal(10, 10, 1).unwrap();
        assert!((norm(&d.x) - 1.0).abs() < 1e-12);
        let s = sparse_signal(50, 4, 3).unwrap();
        assert_eq!(s.support.len(), 4);
        assert_eq!(s.x.iter().filter(|v| v.norm_sqr() > 0.0).count(), 4);
        assert!(s.support.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, sparse_signal(50, 4, 3).unwrap());
        assert!(sparse_signal(3, 4, 0).is_err());
    }

    #[test]
    fn measure_basics() {
        let a = ensembles::gaussian_matrix(3, 5, 2).unwrap();
        let mut e = vec![Complex64::new(0.0, 0.0); 5];
        assert!(measure(&a, &e).unwrap().iter().all(|v| v.norm_sqr() == 0.0));
        e[2] = Complex64::new(1.0, 0.0);
        assert_eq!(measure(&a, &e).unwrap(), a.column(2).to_vec());
        assert_eq!(measure(&a, &e[..4]), Err(Error::DimensionMismatch { expected: 5, found: 4 }));
    }

    #[test]
    fn error_definition() {
        let x = sparse_signal(8, 3, 4).unwrap().x;
        assert_eq!(recovery_error(&x, &x).unwrap(), 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        assert!((recovery_error(&zero, &x).unwrap() - 1.0).abs() < 1e-12);
        let twice: Vec<Complex64> = x.iter().map(|v| v * 2.0).collect();
        assert!((recovery_error(&twice, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((recovery_error(&x, &zero).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_measurement_recovers_zero() {
        let a = ensembles::gaussian_matrix(4, 8, 1).unwrap();
        let rec = recover_l1(&RecoveryTask { a: &a, y: vec![Complex64::new(0.0, 0.0); 4], params: SolverParams::default() }).unwrap();
        assert!(rec.converged);
        assert!(rec.x.iter().all(|v| v.norm_sqr() == 0.0));
    }

    #[test]
    fn square_dft_is_inverted() {
        let a = ensembles::fourier_ensemble(16, 16, 0).unwrap();
        assert!((operator_norm(&a, 100, 1e-8) - 1.0).abs() < 1e-6);
        let x = sparse_signal(16, 16, 7).unwrap().x;
        let y = measure(&a, &x).unwrap();
        let rec = recover_l1(&RecoveryTask { a: &a, y, params: SolverParams::default() }).unwrap();
        assert!(recovery_error(&rec.x, &x).unwrap() < 1e-8);
    }

    #[test]
    fn sparse_recovery_with_gaussian_matrix() {
        let a = ensembles::gaussian_matrix(20, 40, 5).unwrap();
        let sig = sparse_signal(40, 3, 6).unwrap();
        let y = measure(&a, &sig.x).unwrap();
        let rec = recover_l1(&RecoveryTask { a: &a, y, params: SolverParams::default() }).unwrap();
        assert!(rec.converged, "{rec:?}");
        assert!(rec.residual < 1e-9);
        assert!(recovery_error(&rec.x, &sig.x).unwrap() < 1e-6);
    }

    #[test]
    fn statistics_of_constant_errors() {
        let st = error_statistics_from(&[1.0; 5]).unwrap();
        let i0 = st.edges.iter().position(|&e| e == 0.0).unwrap();
        assert_eq!(st.counts.iter().sum::<usize>(), 5);
        assert_eq!(st.counts[i0], 5);
        assert_eq!(st.survivor[0], 1.0);
        assert_eq!(st.survivor[i0], 0.0);
        assert_eq!(*st.survivor.last().unwrap(), 0.0);
        assert_eq!(st.survivor_at(-0.2), 1.0);
        assert_eq!(st.survivor_at(0.0), 0.0);
    }

    #[test]
    fn statistics_shape() {
        let st = error_statistics_from(&[1e-15, 1e-14, 0.3, 0.5, 0.0]).unwrap();
        assert_eq!(st.survivor[0], 1.0);
        assert_eq!(*st.survivor.last().unwrap(), 0.0);
        assert!(st.survivor.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(st.edges.len(), st.counts.len() + 1);
        assert!(st.largest_interior_gap() >= 2);
        assert_eq!(st.survivor_at(16.0), 0.0);
        assert!((st.survivor_at(6.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn grid_conventions() {
        assert_eq!(grid_values(4), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(rows_for(0.0625, 128), 8);
        assert_eq!(rows_for(0.001, 128), 1);
        assert_eq!(sparsity_for(1.0 / 16.0, 8), 1);
        assert_eq!(sparsity_for(1.0, 8), 8);
    }
}
