//! Experiment drivers and their CSV tables.
//!
//! Tables written by `construct` and `phase-diagram` hold no timings, so the
//! same flags reproduce them byte for byte. Wall times go to the manifest,
//! except in the sweep table where they are the point.

use std::time::Instant;

use bcasc_core::bounds::composite_bound_complex;
use bcasc_core::codes::{self, SphericalCode};
use bcasc_core::constructor::{self, ConstructionConfig, ConstructionTrace, NeighborPolicy};
use bcasc_core::cs::{self, ErrorStatistics, PhaseDiagram, PhaseDiagramConfig, EXACT_RECOVERY};
use bcasc_core::ensembles::MatrixKind;
use rayon::prelude::*;

use crate::table::{fmt_f64, fmt_opt, Table};
use crate::{Error, Result};

pub const RUNS_COLUMNS: [&str; 6] = ["seed", "status", "coherence", "iterations", "radius_fallbacks", "error"];
pub const STAGES_COLUMNS: [&str; 6] = ["stage", "nu", "inner_iterations", "all_fixed", "coherence", "radius_fallbacks"];
pub const ITERATIONS_COLUMNS: [&str; 4] = ["nu", "tau", "max_residual", "fixed_count"];

/// One seeded construction.
#[derive(Debug, Clone)]
pub struct Run {
    pub seed: u64,
    pub outcome: std::result::Result<(SphericalCode, ConstructionTrace, f64), bcasc_core::Error>,
    pub wall_time_s: f64,
}

impl Run {
    pub fn coherence(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.2)
    }

    pub fn radius_fallbacks(&self) -> u64 {
        self.outcome.as_ref().map(|o| o.1.radius_fallbacks()).unwrap_or(0)
    }
}

/// Runs one construction per seed from `random_spherical_code(m, n, seed)`.
pub fn construct_runs(config: &ConstructionConfig, m: usize, n: usize, seeds: &[u64]) -> Vec<Run> {
    seeds
        .iter()
        .map(|&seed| {
            let start = Instant::now();
            let outcome = constructor::construct_from_seed(&ConstructionConfig { seed, ..config.clone() }, m, n)
                .and_then(|(code, trace)| {
                    let mu = codes::coherence(&code)?.mu;
                    Ok((code, trace, mu))
                });
            Run { seed, outcome, wall_time_s: start.elapsed().as_secs_f64() }
        })
        .collect()
}

/// Index of the run with the lowest coherence; ties go to the earlier seed.
pub fn best_run(runs: &[Run]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if let Some(mu) = r.coherence() {
            if best.is_none_or(|b| mu < runs[b].coherence().unwrap_or(f64::INFINITY)) {
                best = Some(i);
            }
        }
    }
    best
}

pub fn runs_table(runs: &[Run]) -> Table {
    let mut t = Table::new(&RUNS_COLUMNS);
    for r in runs {
        let row = match &r.outcome {
            Ok((_, trace, mu)) => vec![
                r.seed.to_string(),
                "ok".into(),
                fmt_f64(*mu),
                trace.total_iterations().to_string(),
                trace.radius_fallbacks().to_string(),
                String::new(),
            ],
            Err(e) => vec![r.seed.to_string(), "failed".into(), String::new(), String::new(), String::new(), e.to_string()],
        };
        t.push(row);
    }
    t
}

pub fn stages_table(trace: &ConstructionTrace) -> Table {
    let mut t = Table::new(&STAGES_COLUMNS);
    for (i, s) in trace.stages.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            s.nu.to_string(),
            s.inner_iterations.to_string(),
            s.all_fixed.to_string(),
            fmt_f64(s.coherence),
            s.radius_fallbacks.to_string(),
        ]);
    }
    t
}

pub fn iterations_table(trace: &ConstructionTrace) -> Table {
    let mut t = Table::new(&ITERATIONS_COLUMNS);
    for it in &trace.iterations {
        t.push(vec![it.nu.to_string(), it.tau.to_string(), fmt_f64(it.max_residual), it.fixed_count.to_string()]);
    }
    t
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    K,
    Radius,
    Nrot,
    M,
    N,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::K, Axis::Radius, Axis::Nrot, Axis::M, Axis::N];

    pub fn name(self) -> &'static str {
        match self {
            Axis::K => "k",
            Axis::Radius => "radius",
            Axis::Nrot => "nrot",
            Axis::M => "m",
            Axis::N => "n",
        }
    }

    pub fn from_name(name: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(name))
    }

    /// The configuration and code size for one axis value.
    pub fn apply(self, value: f64, base: &ConstructionConfig, m: usize, n: usize) -> Result<(ConstructionConfig, usize, usize)> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Format(format!("{} must be a non-negative integer, got {value}", self.name())))
            }
        };
        let mut config = base.clone();
        let (mut m, mut n) = (m, n);
        match self {
            Axis::K => config.neighbor_policy = NeighborPolicy::Knn { k: count()? },
            Axis::Radius => config.neighbor_policy = NeighborPolicy::Radius { r: value },
            Axis::Nrot => config.n_rot = count()?,
            Axis::M => m = count()?,
            Axis::N => n = count()?,
        }
        Ok((config, m, n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub m: usize,
    pub n: usize,
    pub coherences: Vec<f64>,
    pub times_s: Vec<f64>,
    pub runs_failed: usize,
    pub radius_fallbacks: u64,
    pub first_error: Option<String>,
    pub composite_bound: f64,
}

impl SweepRow {
    /// A row fails when any run errors or any radius ball came up empty.
    pub fn failed(&self) -> bool {
        self.runs_failed > 0 || self.radius_fallbacks > 0
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn min(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::min)
}

fn max(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::max)
}

pub fn sweep_case(axis: Axis, value: f64, base: &ConstructionConfig, m: usize, n: usize, seeds: &[u64]) -> Result<SweepRow> {
    let (config, m, n) = axis.apply(value, base, m, n)?;
    let runs = construct_runs(&config, m, n, seeds);
    let mut row = SweepRow {
        axis,
        value,
        m,
        n,
        coherences: Vec::new(),
        times_s: Vec::new(),
        runs_failed: 0,
        radius_fallbacks: 0,
        first_error: None,
        composite_bound: composite_bound_complex(m, n).value,
    };
    for r in &runs {
        match &r.outcome {
            Ok((_, trace, mu)) => {
                row.coherences.push(*mu);
                row.times_s.push(r.wall_time_s);
                row.radius_fallbacks += trace.radius_fallbacks();
            }
            Err(e) => {
                row.runs_failed += 1;
                row.first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    Ok(row)
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "axis",
    "value",
    "m",
    "n",
    "status",
    "runs_ok",
    "runs_failed",
    "radius_fallbacks",
    "mean_coherence",
    "min_coherence",
    "max_coherence",
    "mean_time_s",
    "min_time_s",
    "max_time_s",
    "composite_bound",
    "error",
    "coherences",
];

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for r in rows {
        let error = match (&r.first_error, r.radius_fallbacks) {
            (Some(e), _) => e.clone(),
            (None, 0) => String::new(),
            (None, k) => format!("{k} empty radius neighborhoods"),
        };
        t.push(vec![
            r.axis.name().into(),
            fmt_f64(r.value),
            r.m.to_string(),
            r.n.to_string(),
            if r.failed() { "failed" } else { "ok" }.into(),
            r.coherences.len().to_string(),
            r.runs_failed.to_string(),
            r.radius_fallbacks.to_string(),
            fmt_opt(mean(&r.coherences)),
            fmt_opt(min(&r.coherences)),
            fmt_opt(max(&r.coherences)),
            fmt_opt(mean(&r.times_s)),
            fmt_opt(min(&r.times_s)),
            fmt_opt(max(&r.times_s)),
            fmt_f64(r.composite_bound),
            error,
            r.coherences.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" "),
        ]);
    }
    t
}

/// Least-squares line `y = slope x + intercept` and its R^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r2 })
}

/// Runs every delta column; columns are independent, so the parallel mode
/// gives the same cells as the serial one.
pub fn run_phase_diagram(n: usize, kind: MatrixKind, config: &PhaseDiagramConfig, parallel: bool) -> Result<PhaseDiagram> {
    if !parallel {
        return Ok(cs::phase_diagram(n, kind, config)?);
    }
    let columns = (0..config.grid_steps)
        .into_par_iter()
        .map(|di| cs::phase_column(n, kind, config, di))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut cells = Vec::with_capacity(config.grid_steps * config.grid_steps);
    let mut column_coherence = Vec::with_capacity(config.grid_steps);
    for (column, mu) in columns {
        cells.extend(column);
        column_coherence.push(mu);
    }
    Ok(PhaseDiagram { n, kind, grid_steps: config.grid_steps, cells, column_coherence })
}

pub const CELLS_COLUMNS: [&str; 11] =
    ["delta_index", "rho_index", "delta", "rho", "m", "s", "error", "converged", "iterations", "exact", "status"];

pub fn cells_table(diagram: &PhaseDiagram) -> Table {
    let mut t = Table::new(&CELLS_COLUMNS);
    for c in &diagram.cells {
        let (error, converged, iterations, exact, status) = match &c.outcome {
            Ok(r) => (
                fmt_f64(r.error),
                r.converged.to_string(),
                r.iterations.to_string(),
                (r.error < EXACT_RECOVERY).to_string(),
                "ok".to_string(),
            ),
            Err(e) => (String::new(), String::new(), String::new(), String::new(), e.to_string()),
        };
        t.push(vec![
            c.delta_index.to_string(),
            c.rho_index.to_string(),
            fmt_f64(c.delta),
            fmt_f64(c.rho),
            c.m.to_string(),
            c.s.to_string(),
            error,
            converged,
            iterations,
            exact,
            status,
        ]);
    }
    t
}

pub fn columns_table(diagram: &PhaseDiagram) -> Table {
    let mut t = Table::new(&["delta_index", "delta", "m", "coherence"]);
    for (di, mu) in diagram.column_coherence.iter().enumerate() {
        let c = diagram.cell(di, 0);
        t.push(vec![di.to_string(), fmt_f64(c.delta), c.m.to_string(), fmt_opt(*mu)]);
    }
    t
}

pub fn histogram_table(stats: &ErrorStatistics) -> Table {
    let mut t = Table::new(&["bin_lo", "bin_hi", "count"]);
    for (i, &count) in stats.counts.iter().enumerate() {
        t.push(vec![fmt_f64(stats.edges[i]), fmt_f64(stats.edges[i + 1]), count.to_string()]);
    }
    t
}

pub fn survivor_table(stats: &ErrorStatistics) -> Table {
    let mut t = Table::new(&["xi", "survivor"]);
    for (&xi, &s) in stats.edges.iter().zip(&stats.survivor) {
        t.push(vec![fmt_f64(xi), fmt_f64(s)]);
    }
    t
}

/// Errors of the evaluated cells in a `cells.csv` table.
pub fn errors_from_cells(table: &Table) -> Result<Vec<f64>> {
    Ok(table.floats("error")?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn axis_values() {
        let base = ConstructionConfig::default();
        let (c, _, _) = Axis::K.apply(12.0, &base, 4, 8).unwrap();
        assert_eq!(c.neighbor_policy, NeighborPolicy::Knn { k: 12 });
        let (_, m, n) = Axis::N.apply(32.0, &base, 4, 8).unwrap();
        assert_eq!((m, n), (4, 32));
        assert!(Axis::Nrot.apply(2.5, &base, 4, 8).is_err());
        assert_eq!(Axis::from_name("K"), Some(Axis::K));
    }

    #[test]
    fn small_radius_rows_fail() {
        let base = ConstructionConfig { tau_max: 20, nu_max: 16, n_rot: 8, ..Default::default() };
        let row = sweep_case(Axis::Radius, 0.05, &base, 3, 12, &[0, 1]).unwrap();
        assert!(row.radius_fallbacks > 0);
        assert!(row.failed());
        let row = sweep_case(Axis::Radius, 2.0, &base, 3, 12, &[0, 1]).unwrap();
        assert!(!row.failed());
        let t = sweep_table(&[row]);
        assert_eq!(t.rows[0][4], "ok");
    }
}
