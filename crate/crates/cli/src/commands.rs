use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fta_core::dqn::{self, HeadKind};
use fta_core::metrics::MetricRecord;
use fta_core::supervised::{self, SweepRun};
use fta_core::tiling::{fta_backward, fta_forward};
use fta_core::TilingConfig;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Returns are averaged over this many final steps in the RL summary.
const FINAL_WINDOW: usize = 50_000;

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// CSV writer whose first line records the config hash.
fn csv_file(path: &Path, hash: &str, header: &str) -> Result<BufWriter<File>, CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_error(path))?);
    writeln!(w, "# config_hash={hash}").map_err(io_error(path))?;
    writeln!(w, "{header}").map_err(io_error(path))?;
    Ok(w)
}

fn write_rows(path: &Path, hash: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    let mut w = csv_file(path, hash, header)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

fn runtime(e: fta_core::Error) -> CliError {
    match e {
        fta_core::Error::Config(m) => CliError::Usage(m),
        e => CliError::Runtime(e.to_string()),
    }
}

pub fn supervised(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let hash = cfg.hash();
    let every = cfg.output.curve_every;
    let runs = supervised::sweep_runs(&cfg.supervised).map_err(runtime)?;

    let curve_rows = runs.iter().enumerate().flat_map(|(id, r)| {
        let prefix = format!("{id},{},{},{},{}", r.kind, r.difficulty, r.learning_rate, r.seed);
        (0..r.run.eq_loss.len())
            .filter(move |i| (i + 1) % every == 0)
            .map(move |i| {
                format!("{prefix},{},{},{}", i + 1, r.run.train_loss[i], r.run.eq_loss[i])
            })
    });
    write_rows(
        &out.join("curves.csv"),
        &hash,
        "run_id,kind,d,lambda,seed,iteration,train_loss,eq_loss",
        curve_rows,
    )?;

    write_rows(
        &out.join("finals.csv"),
        &hash,
        "run_id,kind,d,lambda,seed,final_score,diverged",
        runs.iter().enumerate().map(|(id, r)| {
            format!(
                "{id},{},{},{},{},{},{}",
                r.kind,
                r.difficulty,
                r.learning_rate,
                r.seed,
                r.run.final_score(),
                r.run.diverged as u8
            )
        }),
    )?;

    let diverged_in = |row: &supervised::SweepRow| {
        runs.iter()
            .filter(|r| r.kind == row.kind && r.difficulty == row.difficulty && r.run.diverged)
            .count()
    };
    write_rows(
        &out.join("summary.csv"),
        &hash,
        "kind,d,best_lambda,mean_final,std_error,n_seeds,diverged_runs",
        supervised::summarize(&runs).iter().map(|row| {
            format!(
                "{},{},{},{},{},{},{}",
                row.kind,
                row.difficulty,
                row.best_learning_rate,
                row.mean_score,
                row.std_error,
                row.seed_scores.len(),
                diverged_in(row)
            )
        }),
    )?;

    let diverged = runs.iter().filter(|r: &&SweepRun| r.run.diverged).count();
    if diverged > 0 {
        return Err(CliError::Runtime(format!(
            "{diverged} of {} runs diverged (see finals.csv)",
            runs.len()
        )));
    }
    Ok(())
}

struct RlJob {
    head: HeadKind,
    boundary_penalty: f64,
    seed: u64,
    file: String,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Mean evaluation return over the final [`FINAL_WINDOW`] steps.
fn final_return(records: &[MetricRecord], total_steps: usize) -> f64 {
    let from = total_steps.saturating_sub(FINAL_WINDOW);
    mean(records.iter().filter(|r| r.step > from).filter_map(|r| r.episodic_return))
}

pub fn rl(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let hash = cfg.hash();
    let rl = &cfg.rl;
    let mut jobs = Vec::new();
    for &head in &rl.variants {
        let sweep_penalty = head == HeadKind::Fta && !rl.boundary_penalties.is_empty();
        let penalties = if sweep_penalty {
            rl.boundary_penalties.clone()
        } else {
            vec![rl.agent.boundary_penalty]
        };
        for &bp in &penalties {
            for &seed in &rl.seeds {
                let tag = if sweep_penalty { format!("_bp{bp}") } else { String::new() };
                jobs.push(RlJob {
                    head,
                    boundary_penalty: bp,
                    seed,
                    file: format!("{}_{}{tag}_seed{seed}.csv", rl.env, head.as_str()),
                });
            }
        }
    }

    let results: Vec<Result<Vec<MetricRecord>, CliError>> = jobs
        .par_iter()
        .map(|job| {
            let agent = dqn::DqnConfig {
                head: job.head,
                boundary_penalty: job.boundary_penalty,
                ..rl.agent.clone()
            };
            let records = dqn::run(&agent, rl.env, rl.total_steps, job.seed).map_err(runtime)?;
            write_rows(
                &out.join(&job.file),
                &hash,
                MetricRecord::CSV_HEADER,
                records.iter().map(MetricRecord::to_csv_row),
            )?;
            eprintln!("finished {}", job.file);
            Ok(records)
        })
        .collect();

    let mut failures = Vec::new();
    let rows: Vec<String> = jobs
        .iter()
        .zip(&results)
        .map(|(job, result)| {
            let prefix = format!("{},{},{},{}", rl.env, job.head.as_str(), job.boundary_penalty, job.seed);
            match result {
                Ok(records) => {
                    let best = records
                        .iter()
                        .filter_map(|r| r.episodic_return)
                        .fold(f64::NEG_INFINITY, f64::max);
                    format!("{prefix},{},{best},ok", final_return(records, rl.total_steps))
                }
                Err(e) => {
                    failures.push(format!("{}: {e}", job.file));
                    format!("{prefix},,,failed")
                }
            }
        })
        .collect();
    write_rows(
        &out.join("rl_summary.csv"),
        &hash,
        "env,variant,boundary_penalty,seed,final_return,best_return,status",
        rows,
    )?;
    if let Some(usage) = results.iter().find_map(|r| match r {
        Err(CliError::Usage(m)) => Some(m.clone()),
        _ => None,
    }) {
        return Err(CliError::Usage(usage));
    }
    if !failures.is_empty() {
        return Err(CliError::Runtime(failures.join("; ")));
    }
    Ok(())
}

pub fn grid(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let hash = cfg.hash();
    let g = &cfg.grid;
    let mut jobs = Vec::new();
    for &eta in &g.etas {
        for &width in &g.tile_widths {
            let tiling = TilingConfig::covering(g.lower, g.upper, width, eta)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            for &seed in &g.seeds {
                jobs.push((eta, width, tiling, seed));
            }
        }
    }
    let results: Vec<Result<f64, fta_core::Error>> = jobs
        .par_iter()
        .map(|&(_, _, tiling, seed)| {
            let agent = dqn::DqnConfig {
                head: HeadKind::Fta,
                fta: tiling,
                ..g.agent.clone()
            };
            let records = dqn::run(&agent, g.env, g.total_steps, seed)?;
            Ok(mean(records.iter().filter_map(|r| r.episodic_return)))
        })
        .collect();

    let mut failures = 0;
    let mut run_rows = Vec::new();
    let mut cells: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); g.tile_widths.len()]; g.etas.len()];
    for (i, ((eta, width, tiling, seed), result)) in jobs.iter().zip(&results).enumerate() {
        let value = match result {
            Ok(v) => *v,
            Err(_) => {
                failures += 1;
                f64::NAN
            }
        };
        run_rows.push(format!("{eta},{width},{},{seed},{value}", tiling.bins()));
        let per_eta = g.tile_widths.len() * g.seeds.len();
        cells[i / per_eta][(i % per_eta) / g.seeds.len()].push(value);
    }
    write_rows(
        &out.join("grid_runs.csv"),
        &hash,
        "eta,delta,bins,seed,mean_return",
        run_rows,
    )?;
    let header = std::iter::once("eta".to_string())
        .chain(g.tile_widths.iter().map(|w| format!("delta={w}")))
        .collect::<Vec<_>>()
        .join(",");
    write_rows(
        &out.join("grid.csv"),
        &hash,
        &header,
        g.etas.iter().zip(&cells).map(|(eta, row)| {
            std::iter::once(eta.to_string())
                .chain(row.iter().map(|seeds| mean(seeds.iter().copied()).to_string()))
                .collect::<Vec<_>>()
                .join(",")
        }),
    )?;
    if failures > 0 {
        return Err(CliError::Runtime(format!(
            "{failures} of {} grid runs failed (NaN in grid_runs.csv)",
            jobs.len()
        )));
    }
    Ok(())
}

/// Evenly spaced points on `[l - η, u + η]`.
pub fn demo_grid(tiling: &TilingConfig, points: usize) -> Vec<f64> {
    let a = tiling.lower() - tiling.eta();
    let b = tiling.upper() + tiling.eta();
    (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn activation_demo(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let tiling = &cfg.activation.tiling;
    let rows = demo_grid(tiling, cfg.activation.points).into_iter().flat_map(|z| {
        let value = fta_forward(z, tiling).into_inner();
        let slope = fta_backward(z, tiling);
        (0..tiling.bins()).map(move |j| format!("{z},{j},{},{}", value[j], slope[j]))
    });
    write_rows(
        &out.join("activation.csv"),
        &cfg.hash(),
        "z,bin,activation,derivative",
        rows,
    )
}
