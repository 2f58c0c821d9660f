use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use bcasc::codefile::{read_code, write_code};
use bcasc::experiments::{self, Axis};
use bcasc::manifest::RunManifest;
use bcasc::table::Table;
use bcasc::{DEFAULT_OUT_DIR, OUT_DIR_ENV};
use bcasc_core::bounds::composite_bound_complex;
use bcasc_core::codes::coherence;
use bcasc_core::constructor::{run_seeds, ConstructionConfig, NeighborPolicy};
use bcasc_core::cs::{self, PhaseDiagramConfig, SolverParams, EXACT_RECOVERY};
use bcasc_core::ensembles::MatrixKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "bcasc", version, about = "Complex antipodal spherical codes and compressive-sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print a JSON summary instead of text.
    #[arg(long)]
    json: bool,
    /// Worker threads; more than one waives bit-exactness.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Clone)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Neighbor {
    Knn,
    Radius,
    Full,
}

#[derive(Args, Clone)]
struct Construction {
    /// Neighbors per codeword for the knn policy.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Ball radius for the radius policy.
    #[arg(long, default_value_t = 1.2)]
    radius: f64,
    #[arg(long, value_enum, default_value = "knn")]
    neighbor: Neighbor,
    /// Rotations per codeword.
    #[arg(long, default_value_t = 16)]
    nrot: usize,
    #[arg(long, default_value_t = 0.9)]
    alpha0: f64,
    #[arg(long, default_value_t = 2)]
    nu0: u32,
    #[arg(long, default_value_t = 16384)]
    nu_max: u32,
    /// Inner iterations per stage.
    #[arg(long, default_value_t = 100_000)]
    tau_max: u64,
    #[arg(long, default_value_t = 1e-6)]
    eps_fixed: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_df: f64,
    /// Leaf visits per knn query; exact search when absent.
    #[arg(long)]
    search_budget: Option<usize>,
    #[arg(long, default_value_t = bcasc_core::ann::DEFAULT_LEAF_CAPACITY)]
    leaf_capacity: usize,
}

impl Construction {
    fn config(&self, seed: u64, threads: usize) -> ConstructionConfig {
        ConstructionConfig {
            alpha0: self.alpha0,
            nu0: self.nu0,
            nu_max: self.nu_max,
            tau_max: self.tau_max,
            eps_fixed: self.eps_fixed,
            eps_df: self.eps_df,
            n_rot: self.nrot,
            neighbor_policy: match self.neighbor {
                Neighbor::Knn => NeighborPolicy::Knn { k: self.k },
                Neighbor::Radius => NeighborPolicy::Radius { r: self.radius },
                Neighbor::Full => NeighborPolicy::Full,
            },
            search_budget: self.search_budget,
            leaf_capacity: self.leaf_capacity,
            seed,
            record_iterations: false,
            parallel: threads > 1,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Composite coherence lower bound for n unit vectors in C^m.
    Bounds {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Best of several seeded constructions; writes code.json, runs.csv, stages.csv.
    Construct {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Also write iterations.csv for the best run.
        #[arg(long)]
        trace_iterations: bool,
        #[command(flatten)]
        construction: Construction,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        common: Common,
    },
    /// Coherence of a code file.
    Coherence {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated constructions over a range of one parameter; writes sweep.csv.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: Axis,
        /// Comma-separated list `a,b,c` or inclusive range `start:stop:step`.
        #[arg(long, value_parser = parse_values)]
        values: Values,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[command(flatten)]
        construction: Construction,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        common: Common,
    },
    /// Sparse-recovery phase diagram; writes cells.csv, columns.csv, histogram.csv, survivor.csv.
    PhaseDiagram {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, value_parser = parse_kind)]
        kind: MatrixKind,
        /// Grid points per axis.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        stop_tol: f64,
        #[command(flatten)]
        construction: Construction,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        common: Common,
    },
    /// Histogram and survivor function of the errors in a cells.csv.
    Stats {
        cells: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone)]
struct Values(Vec<f64>);

fn parse_axis(s: &str) -> Result<Axis, String> {
    Axis::from_name(s).ok_or_else(|| format!("unknown axis {s:?} (k, radius, nrot, m, n)"))
}

fn parse_kind(s: &str) -> Result<MatrixKind, String> {
    MatrixKind::from_name(s).ok_or_else(|| {
        let names: Vec<_> = MatrixKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown kind {s:?} ({})", names.join(", "))
    })
}

fn parse_values(s: &str) -> Result<Values, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    if let Some((a, rest)) = s.split_once(':') {
        let (b, step) = rest.split_once(':').ok_or("range must be start:stop:step")?;
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || !(b >= a) {
            return Err("range needs start <= stop and step > 0".into());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        return Ok(Values((0..count).map(|i| a + i as f64 * step).collect()));
    }
    let v = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("no values".into());
    }
    Ok(Values(v))
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<bcasc::Error> for Failure {
    fn from(e: bcasc::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(threads: usize) -> Outcome {
    if threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("thread pool")?;
    Ok(())
}

fn validate(config: &ConstructionConfig) -> Outcome {
    config.validate().map_err(|e| Failure::Usage(e.to_string()))
}

fn prepare_out(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(command: Command) -> Outcome {
    let started = Instant::now();
    match command {
        Command::Bounds { m, n, common } => {
            if m == 0 || n == 0 {
                return Err(Failure::Usage("m and n must be positive".into()));
            }
            let r = composite_bound_complex(m, n);
            if common.json {
                print_json(&serde_json::to_value(r).context("bound report")?);
            } else {
                println!("m            {m}");
                println!("n            {n}");
                println!("value        {:.4}", r.value);
                println!("regime       {}", r.regime.name());
                println!("welch        {:.6}", r.welch);
                println!("orthoplex    {:.6}", r.orthoplex);
                println!("levenshtein  {:.6}", r.levenshtein);
                println!("mukkavilli   {:.6}", r.mukkavilli);
                if n <= m {
                    println!("note         n <= m: an orthonormal basis has coherence 0");
                }
            }
            Ok(())
        }
        Command::Construct { m, n, runs, trace_iterations, construction, out, common } => {
            init_threads(common.threads)?;
            let mut config = construction.config(common.seed, common.threads);
            config.record_iterations = trace_iterations;
            validate(&config)?;
            if runs == 0 {
                return Err(Failure::Usage("--runs must be at least 1".into()));
            }
            prepare_out(&out.out)?;
            let seeds = run_seeds(common.seed, runs);
            let results = experiments::construct_runs(&config, m, n, &seeds);
            let mut manifest = RunManifest::new(
                "construct",
                json!({ "m": m, "n": n, "runs": runs, "construction": config }),
                seeds.clone(),
                common.threads,
            );
            manifest.write_output(&out.out, "runs.csv", &experiments::runs_table(&results).to_bytes()?)?;
            let Some(best) = experiments::best_run(&results) else {
                let first = results.iter().find_map(|r| r.outcome.as_ref().err()).map(|e| e.to_string());
                manifest.finish(started.elapsed());
                manifest.write(&out.out)?;
                return Err(anyhow::anyhow!("every run failed: {}", first.unwrap_or_default()).into());
            };
            let run = &results[best];
            let (code, trace, mu) = run.outcome.as_ref().expect("best run succeeded");
            let bound = composite_bound_complex(m, n);
            let mut meta = Map::new();
            meta.insert("seed".into(), run.seed.into());
            meta.insert("coherence".into(), (*mu).into());
            meta.insert("composite_bound".into(), bound.value.into());
            meta.insert("construction".into(), serde_json::to_value(&config).context("config")?);
            let code_path = out.out.join("code.json");
            write_code(&code_path, code, meta)?;
            let code_bytes = std::fs::read(&code_path).with_context(|| format!("reading {}", code_path.display()))?;
            manifest.write_output(&out.out, "code.json", &code_bytes)?;
            manifest.write_output(&out.out, "stages.csv", &experiments::stages_table(trace).to_bytes()?)?;
            if trace_iterations {
                manifest.write_output(&out.out, "iterations.csv", &experiments::iterations_table(trace).to_bytes()?)?;
            }
            manifest.finish(started.elapsed());
            manifest.write(&out.out)?;
            let failed = results.iter().filter(|r| r.outcome.is_err()).count();
            for r in results.iter().filter(|r| r.outcome.is_err()) {
                eprintln!("run with seed {} failed: {}", r.seed, r.outcome.as_ref().unwrap_err());
            }
            let coherences: Vec<_> = results.iter().map(|r| r.coherence()).collect();
            if common.json {
                print_json(&json!({
                    "m": m, "n": n, "best_seed": run.seed, "best_coherence": mu,
                    "composite_bound": bound.value, "coherences": coherences,
                    "runs_failed": failed, "out": out.out, "artifact_hash": manifest.artifact_hash,
                }));
            } else {
                println!("best coherence  {mu:.6} (seed {})", run.seed);
                println!("composite bound {:.6}", bound.value);
                println!("runs ok/failed  {}/{failed}", results.len() - failed);
                println!("written to      {}", out.out.display());
            }
            Ok(())
        }
        Command::Coherence { file, common } => {
            let (code, _) = read_code(&file)?;
            let r = coherence(&code).context("coherence")?;
            let bound = composite_bound_complex(code.m(), code.n());
            if common.json {
                print_json(&json!({
                    "m": code.m(), "n": code.n(), "coherence": r.mu,
                    "argmax_pair": [r.argmax_pair.0, r.argmax_pair.1],
                    "composite_bound": bound.value, "regime": bound.regime.name(),
                }));
            } else {
                println!("m x n           {} x {}", code.m(), code.n());
                println!("coherence       {:.6} (columns {}, {})", r.mu, r.argmax_pair.0, r.argmax_pair.1);
                println!("composite bound {:.6} ({})", bound.value, bound.regime.name());
            }
            Ok(())
        }
        Command::Sweep { axis, values, m, n, runs, construction, out, common } => {
            init_threads(common.threads)?;
            let config = construction.config(common.seed, common.threads);
            validate(&config)?;
            if runs == 0 {
                return Err(Failure::Usage("--runs must be at least 1".into()));
            }
            for &v in &values.0 {
                let (c, m, n) = axis.apply(v, &config, m, n).map_err(|e| Failure::Usage(e.to_string()))?;
                validate(&c)?;
                if m == 0 || n < 2 {
                    return Err(Failure::Usage(format!("invalid size {m} x {n}")));
                }
            }
            prepare_out(&out.out)?;
            let seeds = run_seeds(common.seed, runs);
            let mut rows = Vec::new();
            for &v in &values.0 {
                let row = experiments::sweep_case(axis, v, &config, m, n, &seeds)?;
                if row.failed() {
                    eprintln!("{} = {v}: failed ({} runs failed, {} radius fallbacks)", axis.name(), row.runs_failed, row.radius_fallbacks);
                }
                rows.push(row);
            }
            let mut manifest = RunManifest::new(
                "sweep",
                json!({ "axis": axis.name(), "values": values.0, "m": m, "n": n, "runs": runs, "construction": config }),
                seeds,
                common.threads,
            );
            manifest.write_output(&out.out, "sweep.csv", &experiments::sweep_table(&rows).to_bytes()?)?;
            manifest.finish(started.elapsed());
            manifest.write(&out.out)?;
            let fit = (axis == Axis::N)
                .then(|| {
                    let ok: Vec<_> = rows.iter().filter(|r| !r.times_s.is_empty()).collect();
                    let xs: Vec<f64> = ok.iter().map(|r| r.n as f64).collect();
                    let ys: Vec<f64> = ok.iter().map(|r| r.times_s.iter().sum::<f64>() / r.times_s.len() as f64).collect();
                    experiments::linear_fit(&xs, &ys)
                })
                .flatten();
            if common.json {
                let summary: Vec<_> = rows
                    .iter()
                    .map(|r| json!({ "value": r.value, "failed": r.failed(), "coherences": r.coherences, "times_s": r.times_s }))
                    .collect();
                let fit = fit.map(|f| json!({ "slope": f.slope, "intercept": f.intercept, "r2": f.r2 }));
                print_json(&json!({ "axis": axis.name(), "rows": summary, "time_vs_n_fit": fit, "out": out.out }));
            } else {
                for r in &rows {
                    let mean = r.coherences.iter().sum::<f64>() / r.coherences.len().max(1) as f64;
                    let status = if r.failed() { "failed" } else { "ok" };
                    println!("{} = {:<10} {status:<6} mean coherence {mean:.6}", axis.name(), r.value);
                }
                if let Some(f) = fit {
                    println!("time vs n: slope {:.3e} s per codeword, R^2 {:.4}", f.slope, f.r2);
                }
                println!("written to {}", out.out.display());
            }
            Ok(())
        }
        Command::PhaseDiagram { n, kind, grid, max_iters, stop_tol, construction, out, common } => {
            init_threads(common.threads)?;
            let config = PhaseDiagramConfig {
                grid_steps: grid,
                seed: common.seed,
                solver: SolverParams { max_iters, stop_tol, ..SolverParams::default() },
                construction: construction.config(common.seed, common.threads),
            };
            validate(&config.construction)?;
            if grid == 0 || n < grid {
                return Err(Failure::Usage("need n >= grid >= 1".into()));
            }
            prepare_out(&out.out)?;
            let diagram = experiments::run_phase_diagram(n, kind, &config, common.threads > 1)?;
            let mut manifest = RunManifest::new(
                "phase-diagram",
                json!({ "n": n, "kind": kind.name(), "config": config }),
                vec![common.seed],
                common.threads,
            );
            manifest.write_output(&out.out, "cells.csv", &experiments::cells_table(&diagram).to_bytes()?)?;
            manifest.write_output(&out.out, "columns.csv", &experiments::columns_table(&diagram).to_bytes()?)?;
            let stats = cs::error_statistics(&diagram).ok();
            if let Some(stats) = &stats {
                manifest.write_output(&out.out, "histogram.csv", &experiments::histogram_table(stats).to_bytes()?)?;
                manifest.write_output(&out.out, "survivor.csv", &experiments::survivor_table(stats).to_bytes()?)?;
            }
            manifest.finish(started.elapsed());
            manifest.write(&out.out)?;
            let not_converged = diagram.cells.iter().filter(|c| c.outcome.as_ref().is_ok_and(|r| !r.converged)).count();
            if common.json {
                print_json(&json!({
                    "n": n, "kind": kind.name(), "cells": diagram.cells.len(),
                    "exact_recoveries": diagram.exact_recoveries(), "failed_cells": diagram.failed_cells(),
                    "not_converged": not_converged, "column_coherence": diagram.column_coherence,
                    "largest_interior_gap": stats.as_ref().map(|s| s.largest_interior_gap()), "out": out.out,
                }));
            } else {
                println!("kind             {}", kind.name());
                println!("exact recoveries {} of {} (error < {EXACT_RECOVERY:e})", diagram.exact_recoveries(), diagram.cells.len());
                println!("failed cells     {}", diagram.failed_cells());
                println!("not converged    {not_converged}");
                println!("written to       {}", out.out.display());
            }
            Ok(())
        }
        Command::Stats { cells, out, common } => {
            let table = Table::read(&cells)?;
            let errors = experiments::errors_from_cells(&table)?;
            let stats = cs::error_statistics_from(&errors).context("statistics")?;
            prepare_out(&out.out)?;
            let mut manifest = RunManifest::new("stats", json!({ "cells": cells }), vec![common.seed], 1);
            manifest.write_output(&out.out, "histogram.csv", &experiments::histogram_table(&stats).to_bytes()?)?;
            manifest.write_output(&out.out, "survivor.csv", &experiments::survivor_table(&stats).to_bytes()?)?;
            manifest.finish(started.elapsed());
            manifest.write(&out.out)?;
            let exact = errors.iter().filter(|&&e| e < EXACT_RECOVERY).count();
            if common.json {
                print_json(&json!({
                    "samples": stats.samples, "exact_recoveries": exact,
                    "largest_interior_gap": stats.largest_interior_gap(),
                    "edges": stats.edges, "counts": stats.counts, "survivor": stats.survivor,
                }));
            } else {
                println!("samples              {}", stats.samples);
                println!("exact recoveries     {exact}");
                println!("largest interior gap {} bins of {}", stats.largest_interior_gap(), stats.bin_width);
                for (i, c) in stats.counts.iter().enumerate() {
                    println!("[{:5.1}, {:5.1})  {c}", stats.edges[i], stats.edges[i + 1]);
                }
            }
            Ok(())
        }
    }
}
