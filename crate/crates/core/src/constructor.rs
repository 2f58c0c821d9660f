//! The damped fixed-point construction.
//!
//! Each outer stage fixes the force exponent `nu` and iterates
//! `c_u <- normalize(c_u + alpha_u f_u)` until every codeword satisfies
//! `|f_u - c_u| < eps_fixed` or `tau_max` iterations pass; then `nu` doubles.
//! `alpha_u` doubles while the force direction stays put (up to `2 alpha_u < 1`)
//! and otherwise falls back to `alpha0 / (nu - 1)`.
//!
//! Per iteration the rotation set and neighbor lists are built once from the
//! code as it stood at the start of the iteration. The force on `c_u` then
//! depends only on that snapshot, so updates of different codewords commute.

use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use num_complex::Complex64;

use crate::ann::{rotation_phases, Neighbor, NnIndex, RotationSet, SearchScratch, DEFAULT_LEAF_CAPACITY};
use crate::codes::{self, SphericalCode};
use crate::forces::{self, Force, ForceScratch};
use crate::math;
use crate::{Error, Result};

/// Minimum rotation distance between two seed codewords.
pub const DEGENERATE_SEED_DISTANCE: f64 = 1e-9;

/// Which rotations contribute to each force.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NeighborPolicy {
    /// The `k` nearest rotations.
    Knn { k: usize },
    /// Every rotation within Euclidean distance `r`; an empty ball falls back
    /// to the single nearest rotation.
    Radius { r: f64 },
    /// Every rotation of every other codeword, without an index.
    Full,
}

impl Default for NeighborPolicy {
    fn default() -> Self {
        NeighborPolicy::Knn { k: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstructionConfig {
    pub alpha0: f64,
    pub nu0: u32,
    pub nu_max: u32,
    pub tau_max: u64,
    pub eps_fixed: f64,
    pub eps_df: f64,
    pub n_rot: usize,
    pub neighbor_policy: NeighborPolicy,
    /// Leaf budget for K-NN queries; `None` searches exactly.
    pub search_budget: Option<usize>,
    pub leaf_capacity: usize,
    /// Seed of the random initial code used by [`construct_from_seed`].
    pub seed: u64,
    /// Record one [`IterationRecord`] per inner iteration.
    pub record_iterations: bool,
    /// Evaluate forces concurrently (needs the `parallel` feature; otherwise ignored).
    pub parallel: bool,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            alpha0: 0.9,
            nu0: 2,
            nu_max: 16384,
            tau_max: 100_000,
            eps_fixed: 1e-6,
            eps_df: 1e-4,
            n_rot: 16,
            neighbor_policy: NeighborPolicy::default(),
            search_budget: None,
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            seed: 0,
            record_iterations: false,
            parallel: false,
        }
    }
}

impl ConstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::InvalidConfig("alpha0 must lie in (0, 1)"));
        }
        if self.nu0 < 2 || self.nu0 % 2 != 0 {
            return Err(Error::InvalidExponent(self.nu0));
        }
        if self.nu_max <= self.nu0 {
            return Err(Error::InvalidConfig("nu_max must exceed nu0"));
        }
        if self.tau_max == 0 {
            return Err(Error::InvalidConfig("tau_max must be at least 1"));
        }
        if !(self.eps_fixed >= 0.0) || !(self.eps_df >= 0.0) {
            return Err(Error::InvalidConfig("thresholds must be non-negative"));
        }
        if self.n_rot < 2 {
            return Err(Error::InvalidConfig("n_rot must be at least 2"));
        }
        if self.leaf_capacity == 0 {
            return Err(Error::InvalidConfig("leaf capacity must be positive"));
        }
        match self.neighbor_policy {
            NeighborPolicy::Knn { k: 0 } => Err(Error::InvalidConfig("k must be at least 1")),
            NeighborPolicy::Radius { r } if !(r > 0.0) => Err(Error::InvalidConfig("radius must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageRecord {
    pub nu: u32,
    pub inner_iterations: u64,
    pub all_fixed: bool,
    pub coherence: f64,
    /// Wall time of the stage; `None` without the `std` feature.
    pub elapsed: Option<Duration>,
    /// Codeword updates whose radius ball was empty.
    pub radius_fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub nu: u32,
    pub tau: u64,
    /// `max_u |f_u - c_u|` after the update.
    pub max_residual: f64,
    pub fixed_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstructionTrace {
    pub stages: Vec<StageRecord>,
    pub iterations: Vec<IterationRecord>,
}

impl ConstructionTrace {
    pub fn total_iterations(&self) -> u64 {
        self.stages.iter().map(|s| s.inner_iterations).sum()
    }

    pub fn radius_fallbacks(&self) -> u64 {
        self.stages.iter().map(|s| s.radius_fallbacks).sum()
    }

    pub fn elapsed(&self) -> Option<Duration> {
        self.stages.iter().map(|s| s.elapsed).sum()
    }
}

/// Per-codeword iteration state.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordState {
    pub alpha_u: f64,
    pub prev_force: Option<Force>,
    pub fixed: bool,
}

#[cfg(feature = "std")]
struct Clock(std::time::Instant);

#[cfg(feature = "std")]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }
    fn elapsed(&self) -> Option<Duration> {
        Some(self.0.elapsed())
    }
}

#[cfg(not(feature = "std"))]
struct Clock;

#[cfg(not(feature = "std"))]
impl Clock {
    fn start() -> Self {
        Clock
    }
    fn elapsed(&self) -> Option<Duration> {
        None
    }
}

fn check_seed(code: &SphericalCode) -> Result<()> {
    for u in 0..code.n() {
        for v in u + 1..code.n() {
            let (cu, cv) = (code.column(u), code.column(v));
            let g = math::inner(cu, cv);
            let r = math::abs(g);
            // the closest rotation of c_v is conj(g)/|g| c_v; measure it directly
            // rather than through 2 - 2|g|, which cancels
            let phase = if r > 0.0 { g.conj() / r } else { Complex64::new(1.0, 0.0) };
            let d2: f64 = cu.iter().zip(cv).map(|(a, b)| (a - b * phase).norm_sqr()).sum();
            if math::sqrt(d2) < DEGENERATE_SEED_DISTANCE {
                return Err(Error::DegenerateSeed(u, v));
            }
        }
    }
    Ok(())
}

/// Buffers reused across inner iterations.
struct Workspace {
    set: Option<RotationSet>,
    index: NnIndex,
    search: SearchScratch,
    hits: Vec<Neighbor>,
    /// Per codeword, `(owner, rotation)` pairs sorted by owner then rotation.
    pairs: Vec<Vec<(usize, usize)>>,
    forces: ForceScratch,
}

impl Workspace {
    fn new(config: &ConstructionConfig, n: usize) -> Result<Self> {
        let mut pairs = vec![Vec::new(); n];
        if config.neighbor_policy == NeighborPolicy::Full {
            for (u, p) in pairs.iter_mut().enumerate() {
                p.extend((0..n).filter(|&v| v != u).flat_map(|v| (0..config.n_rot).map(move |k| (v, k))));
            }
        }
        Ok(Workspace {
            set: None,
            index: NnIndex::new(config.leaf_capacity)?,
            search: SearchScratch::default(),
            hits: Vec::new(),
            pairs,
            forces: ForceScratch::default(),
        })
    }

    /// Fills `pairs` from the current code; returns the number of radius fallbacks.
    fn neighborhoods(&mut self, config: &ConstructionConfig, code: &SphericalCode) -> Result<u64> {
        let (k, radius) = match config.neighbor_policy {
            NeighborPolicy::Full => return Ok(0),
            NeighborPolicy::Knn { k } => (k, None),
            NeighborPolicy::Radius { r } => (1, Some(r)),
        };
        let set = match &mut self.set {
            Some(set) => {
                set.rebuild(code);
                set
            }
            None => self.set.insert(RotationSet::build(code, config.n_rot)?),
        };
        self.index.rebuild(set)?;
        let mut fallbacks = 0;
        for (u, pairs) in self.pairs.iter_mut().enumerate() {
            let query = set.coords(set.id(u, 0));
            pairs.clear();
            if let Some(r) = radius {
                let ball = self.index.radius_search(query, r, Some(u))?;
                pairs.extend(ball.iter().map(|h| (h.owner, h.rotation)));
            }
            if pairs.is_empty() {
                if radius.is_some() {
                    fallbacks += 1;
                }
                self.index.knn_into(query, k, Some(u), config.search_budget, &mut self.search, &mut self.hits)?;
                pairs.extend(self.hits.iter().map(|h| (h.owner, h.rotation)));
            }
            pairs.sort_unstable();
        }
        Ok(fallbacks)
    }

    fn forces(&mut self, config: &ConstructionConfig, code: &SphericalCode, phases: &[Complex64], nu: u32) -> Result<Vec<Force>> {
        #[cfg(feature = "parallel")]
        if config.parallel {
            use rayon::prelude::*;
            let pairs = &self.pairs;
            return (0..code.n())
                .into_par_iter()
                .map_init(ForceScratch::default, |scratch, u| {
                    forces::force_from_pairs(code.column(u), code, phases, &pairs[u], nu, scratch)
                })
                .collect();
        }
        let _ = config;
        (0..code.n())
            .map(|u| forces::force_from_pairs(code.column(u), code, phases, &self.pairs[u], nu, &mut self.forces))
            .collect()
    }
}

/// Runs the construction from `initial`.
pub fn construct(config: &ConstructionConfig, initial: &SphericalCode) -> Result<(SphericalCode, ConstructionTrace)> {
    config.validate()?;
    let n = initial.n();
    if n < 2 {
        return Err(Error::TooFewCodewords(n));
    }
    if let NeighborPolicy::Knn { k } = config.neighbor_policy {
        let available = (n - 1) * config.n_rot;
        if k > available {
            return Err(Error::InsufficientCandidates { requested: k, available });
        }
    }
    check_seed(initial)?;

    let phases = rotation_phases(config.n_rot);
    let mut code = initial.clone();
    let mut trace = ConstructionTrace::default();
    let mut states: Vec<CodewordState> = Vec::with_capacity(n);
    let mut work = Workspace::new(config, n)?;
    let mut nu = config.nu0;
    let mut alpha = config.alpha0;

    while nu < config.nu_max {
        let clock = Clock::start();
        states.clear();
        states.extend((0..n).map(|_| CodewordState { alpha_u: alpha, prev_force: None, fixed: false }));
        let reset = config.alpha0 / (nu as f64 - 1.0);
        let mut tau = 0;
        let mut fallbacks = 0;
        let mut fixed_count = 0;
        while tau < config.tau_max && fixed_count < n {
            // every force sees the code as it stood before this iteration
            fallbacks += work.neighborhoods(config, &code)?;
            let forces = work.forces(config, &code, &phases, nu)?;
            let mut max_residual: f64 = 0.0;
            for (u, (force, state)) in forces.into_iter().zip(states.iter_mut()).enumerate() {
                let f = &force.direction;
                let steady = state.prev_force.as_ref().is_some_and(|p| {
                    let df2: f64 = f.iter().zip(&p.direction).map(|(a, b)| (a - b).norm_sqr()).sum();
                    math::sqrt(df2) < config.eps_df
                });
                if steady && 2.0 * state.alpha_u < 1.0 {
                    state.alpha_u *= 2.0;
                } else {
                    state.alpha_u = reset;
                }
                let c_u = code.column_mut(u);
                for (c, d) in c_u.iter_mut().zip(f) {
                    *c += d * state.alpha_u;
                }
                codes::normalize_in_place(c_u)?;
                debug_assert!((math::norm_sqr(c_u) - 1.0).abs() < 1e-12);
                let residual2: f64 = f.iter().zip(c_u.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
                let residual = math::sqrt(residual2);
                max_residual = max_residual.max(residual);
                if !state.fixed && residual < config.eps_fixed {
                    state.fixed = true;
                    fixed_count += 1;
                }
                state.prev_force = Some(force);
            }
            tau += 1;
            if config.record_iterations {
                trace.iterations.push(IterationRecord { nu, tau, max_residual, fixed_count });
            }
        }
        trace.stages.push(StageRecord {
            nu,
            inner_iterations: tau,
            all_fixed: fixed_count == n,
            coherence: codes::coherence(&code)?.mu,
            elapsed: clock.elapsed(),
            radius_fallbacks: fallbacks,
        });
        nu = nu.saturating_mul(2);
        alpha = config.alpha0 / (nu as f64 - 1.0);
    }
    Ok((code, trace))
}

/// [`construct`] with forces from every rotation of every other codeword.
pub fn construct_reference(
    config: &ConstructionConfig,
    initial: &SphericalCode,
) -> Result<(SphericalCode, ConstructionTrace)> {
    let config = ConstructionConfig { neighbor_policy: NeighborPolicy::Full, ..config.clone() };
    construct(&config, initial)
}

/// [`construct`] from a random `m x n` code drawn with `config.seed`.
pub fn construct_from_seed(config: &ConstructionConfig, m: usize, n: usize) -> Result<(SphericalCode, ConstructionTrace)> {
    let initial = codes::random_spherical_code(m, n, config.seed)?;
    construct(config, &initial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    /// Final coherence, or the error that aborted the run.
    pub result: core::result::Result<f64, Error>,
    pub elapsed: Option<Duration>,
    pub iterations: u64,
}

#[derive(Debug, Clone)]
pub struct BestOfRuns {
    pub code: SphericalCode,
    pub trace: ConstructionTrace,
    pub best_seed: u64,
    pub runs: Vec<RunOutcome>,
}

impl BestOfRuns {
    pub fn coherences(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.result.as_ref().ok().copied()).collect()
    }
}

/// Index of the smallest value; ties go to the earliest.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

/// One construction per seed from `random_spherical_code(m, n, seed)`; keeps
/// the lowest final coherence, ties to the earlier seed. Failed runs are
/// recorded and skipped; if every run fails the first error is returned.
pub fn best_of_runs(config: &ConstructionConfig, m: usize, n: usize, seeds: &[u64]) -> Result<BestOfRuns> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required"));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    let mut best: Option<(f64, u64, SphericalCode, ConstructionTrace)> = None;
    let mut first_error = None;
    for &seed in seeds {
        let clock = Clock::start();
        let outcome = construct_from_seed(&ConstructionConfig { seed, ..config.clone() }, m, n)
            .and_then(|(code, trace)| Ok((codes::coherence(&code)?.mu, code, trace)));
        let elapsed = clock.elapsed();
        match outcome {
            Ok((mu, code, trace)) => {
                runs.push(RunOutcome { seed, result: Ok(mu), elapsed, iterations: trace.total_iterations() });
                if best.as_ref().is_none_or(|b| mu < b.0) {
                    best = Some((mu, seed, code, trace));
                }
            }
            Err(e) => {
                runs.push(RunOutcome { seed, result: Err(e.clone()), elapsed, iterations: 0 });
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some((_, best_seed, code, trace)) => Ok(BestOfRuns { code, trace, best_seed, runs }),
        None => Err(first_error.unwrap_or(Error::InvalidConfig("no runs"))),
    }
}

/// `count` run seeds starting at `base`: `base, base + 1, ...`.
pub fn run_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::random_spherical_code;

    fn quick() -> ConstructionConfig {
        ConstructionConfig { tau_max: 300, nu_max: 64, ..Default::default() }
    }

    #[test]
    fn orthogonal_pair_is_fixed_immediately() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let code = SphericalCode::from_column_major(2, 2, vec![one, zero, zero, one]).unwrap();
        for policy in [NeighborPolicy::Knn { k: 16 }, NeighborPolicy::Full] {
            let config = ConstructionConfig { neighbor_policy: policy, ..quick() };
            let (out, trace) = construct(&config, &code).unwrap();
            assert_eq!(trace.stages[0].inner_iterations, 1);
            assert!(trace.stages[0].all_fixed);
            for u in 0..2 {
                let g = math::abs(math::inner(out.column(u), code.column(u)));
                assert!((g - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn validation() {
        let code = random_spherical_code(3, 6, 1).unwrap();
        let bad = ConstructionConfig { alpha0: 1.0, ..quick() };
        assert!(construct(&bad, &code).is_err());
        let bad = ConstructionConfig { nu0: 3, ..quick() };
        assert_eq!(construct(&bad, &code).unwrap_err(), Error::InvalidExponent(3));
        let bad = ConstructionConfig { neighbor_policy: NeighborPolicy::Knn { k: 81 }, n_rot: 16, ..quick() };
        assert_eq!(
            construct(&bad, &code).unwrap_err(),
            Error::InsufficientCandidates { requested: 81, available: 80 }
        );
        let single = random_spherical_code(3, 1, 1).unwrap();
        assert_eq!(construct(&quick(), &single).unwrap_err(), Error::TooFewCodewords(1));
    }

    #[test]
    fn rotated_duplicate_seed_is_rejected() {
        let mut data = random_spherical_code(3, 3, 2).unwrap().into_vec();
        let phase = math::cis(0.7);
        for w in 0..3 {
            data[6 + w] = data[w] * phase;
        }
        let code = SphericalCode::from_column_major(3, 3, data).unwrap();
        assert_eq!(construct(&quick(), &code).unwrap_err(), Error::DegenerateSeed(0, 2));
    }

    #[test]
    fn unit_norm_and_stage_schedule() {
        let code = random_spherical_code(3, 8, 5).unwrap();
        let config = ConstructionConfig { record_iterations: true, ..quick() };
        let (out, trace) = construct(&config, &code).unwrap();
        for c in out.columns() {
            assert!((math::norm_sqr(c) - 1.0).abs() < 1e-12);
        }
        let nus: Vec<u32> = trace.stages.iter().map(|s| s.nu).collect();
        assert_eq!(nus, vec![2, 4, 8, 16, 32]);
        assert!(trace.stages.iter().all(|s| s.inner_iterations <= 300));
        assert_eq!(trace.iterations.len() as u64, trace.total_iterations());
        let last = trace.stages.last().unwrap();
        assert!((last.coherence - codes::coherence(&out).unwrap().mu).abs() < 1e-12);
    }

    #[test]
    fn saturated_knn_equals_reference() {
        let code = random_spherical_code(3, 6, 11).unwrap();
        let config = ConstructionConfig { n_rot: 8, neighbor_policy: NeighborPolicy::Knn { k: 40 }, ..quick() };
        let (a, ta) = construct(&config, &code).unwrap();
        let (b, tb) = construct_reference(&config, &code).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.total_iterations(), tb.total_iterations());
    }

    #[test]
    fn construction_reduces_coherence() {
        let code = random_spherical_code(4, 8, 3).unwrap();
        let before = codes::coherence(&code).unwrap().mu;
        let (out, _) = construct(&quick(), &code).unwrap();
        let after = codes::coherence(&out).unwrap().mu;
        assert!(after < before);
        assert!(after >= crate::bounds::composite_bound_complex(4, 8).value - 1e-12);
    }

    #[test]
    fn radius_fallback_is_counted() {
        let code = random_spherical_code(3, 6, 8).unwrap();
        let config = ConstructionConfig { neighbor_policy: NeighborPolicy::Radius { r: 0.05 }, tau_max: 5, nu_max: 4, ..quick() };
        let (_, trace) = construct(&config, &code).unwrap();
        assert!(trace.radius_fallbacks() > 0);
    }

    #[test]
    fn best_of_runs_picks_minimum() {
        assert_eq!(argmin(&[0.45, 0.449, 0.451]), Some(1));
        assert_eq!(argmin(&[0.3, 0.3]), Some(0));
        assert_eq!(argmin(&[]), None);
        let seeds = run_seeds(40, 3);
        let best = best_of_runs(&quick(), 3, 6, &seeds).unwrap();
        let mus = best.coherences();
        assert_eq!(mus.len(), 3);
        let i = argmin(&mus).unwrap();
        assert_eq!(best.best_seed, seeds[i]);
        assert_eq!(codes::coherence(&best.code).unwrap().mu, mus[i]);
        let single = best_of_runs(&quick(), 3, 6, &[41]).unwrap();
        let direct = construct_from_seed(&ConstructionConfig { seed: 41, ..quick() }, 3, 6).unwrap().0;
        assert_eq!(single.code, direct);
    }
}
