//! Command-line front end: one subcommand per invocation, a one-line
//! summary on success, and exit codes 0 (success), 1 (usage), 2 (invalid
//! model or dataset), 3 (numerical refusal in strict mode).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use ivregime_cli::io;
use ivregime_cli::runner::{regret_parallel, sweep_parallel};
use ivregime_cli::AppError;
use ivregime_core::analysis::{RegretConfig, SweepDirection};
use ivregime_core::bounds::{
    bounds_result, cell_observables_from_dataset, cell_observables_from_model, BoundsConfig,
};
use ivregime_core::estimator::{argmax_regime, fit_nuisances, EstimatorConfig};
use ivregime_core::model::DEFAULT_ASSUMPTION_TOL;
use ivregime_core::{sampler, Objective};

/// Seed used when none is given; documented so runs stay reproducible.
const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Parser)]
#[command(
    name = "ivregime",
    version,
    about = "Individualized treatment regimes under a binary instrument: \
             simulation, estimation, bounds, and sensitivity sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Id1,
    Id2,
}

impl From<ObjectiveArg> for Objective {
    fn from(arg: ObjectiveArg) -> Self {
        match arg {
            ObjectiveArg::Id1 => Objective::Id1,
            ObjectiveArg::Id2 => Objective::Id2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    /// Shift the last latent type's treated-outcome mean by -eps.
    #[value(name = "violate-aa")]
    ViolateAa,
    /// Tilt take-up contrasts until their covariance with the outcome
    /// contrasts equals eps.
    #[value(name = "violate-7")]
    Violate7,
    /// Rescale take-up contrasts until their variance equals eps.
    #[value(name = "violate-8")]
    Violate8,
}

impl From<DirectionArg> for SweepDirection {
    fn from(arg: DirectionArg) -> Self {
        match arg {
            DirectionArg::ViolateAa => SweepDirection::ShiftOutcomeContrast,
            DirectionArg::Violate7 => SweepDirection::TiltContrastCovariance,
            DirectionArg::Violate8 => SweepDirection::ScaleTakeupVariance,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset from a model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Number of rows.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the objective-maximizing regime from a dataset.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Minimum rows per instrument arm for a cell to be usable.
        #[arg(long, default_value_t = 5)]
        min_arm_count: usize,
        /// Fail instead of degrading on unusable or weak cells.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical diagnostics of the identifying conditions for a model.
    Check {
        #[arg(long)]
        model: PathBuf,
        /// Tolerance for sign and zero checks.
        #[arg(long, default_value_t = DEFAULT_ASSUMPTION_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Counterfactual-mean bounds per cell and the maximin regime, from a
    /// model (exact) or a dataset (frequencies).
    Bounds {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fail on infeasible cells instead of projecting them.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo regret of estimated regimes against the model's oracle.
    Regret {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Rows per replication.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        min_arm_count: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one CSV row per replication.
        #[arg(long)]
        per_rep: Option<PathBuf>,
    },
    /// Perturb a model along one assumption surface and tabulate regret
    /// across the grid.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Comma-separated perturbation sizes, e.g. `0,0.05,0.1`.
        /// Negative values are allowed (covariance targets can be signed).
        #[arg(long, allow_hyphen_values = true)]
        eps_grid: String,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        min_arm_count: usize,
        #[arg(long, default_value_t = DEFAULT_ASSUMPTION_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        per_rep: Option<PathBuf>,
    },
    /// Exact population argmax regimes and values for a model.
    Oracle {
        #[arg(long)]
        model: PathBuf,
        /// Fail when the weighted objectives are unavailable (weak
        /// instrument) instead of reporting them as null.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// Writes the payload to `out` (summary goes to stdout) or to stdout
/// itself (summary goes to stderr so stdout stays machine-readable).
fn emit(payload: &str, out: Option<&Path>, summary: &str) -> Result<(), AppError> {
    match out {
        Some(path) => {
            io::write_text(path, payload)?;
            println!("{summary}");
        }
        None => {
            print!("{payload}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn regime_display(actions: &[i8]) -> String {
    let parts: Vec<String> = actions.iter().map(|a| format!("{a:+}")).collect();
    format!("[{}]", parts.join(" "))
}

fn parse_grid(text: &str) -> Result<Vec<f64>, AppError> {
    text.split(',')
        .map(|field| {
            field.trim().parse::<f64>().map_err(|_| {
                AppError::Usage(format!("eps grid entry `{field}` is not a number"))
            })
        })
        .collect()
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Simulate { model, n, seed, out } => {
            let model = io::load_model(&model)?;
            let dataset = sampler::sample(&model, n, seed)?;
            io::write_dataset_csv(&dataset, &out)?;
            println!(
                "simulated {} rows over {} cells (seed {seed}) -> {}",
                dataset.len(),
                dataset.cell_count,
                out.display()
            );
            Ok(())
        }
        Command::Estimate { data, objective, min_arm_count, strict, out } => {
            let dataset = io::read_dataset_csv(&data)?;
            let config = EstimatorConfig {
                min_arm_count,
                strict,
                ..EstimatorConfig::default()
            };
            let objective: Objective = objective.into();
            let estimates = fit_nuisances(&dataset, &config)?;
            let fit = argmax_regime(&dataset, &estimates, objective)?;
            let summary = format!(
                "selected regime {} with sample objective {} ({} diagnostics)",
                regime_display(fit.regime.actions()),
                fit.objective_value,
                fit.diagnostics.len()
            );
            emit(&io::json_string(&fit)?, out.as_deref(), &summary)
        }
        Command::Check { model, tol, out } => {
            let model = io::load_model(&model)?;
            let report = model.check_assumptions(tol)?;
            let summary = format!(
                "checked {} cells: outcome signs uniform = {}, take-up signs uniform = {}",
                report.cells.len(),
                report.all_outcome_signs_uniform(),
                report.all_takeup_signs_uniform()
            );
            emit(&io::json_string(&report)?, out.as_deref(), &summary)
        }
        Command::Bounds { model, data, strict, out } => {
            let observables = match (model, data) {
                (Some(path), None) => cell_observables_from_model(&io::load_model(&path)?)?,
                (None, Some(path)) => cell_observables_from_dataset(&io::read_dataset_csv(&path)?)?,
                _ => {
                    return Err(AppError::Usage(
                        "bounds needs exactly one of --model or --data".into(),
                    ));
                }
            };
            let result = bounds_result(&observables, BoundsConfig { strict })?;
            let projected = result.cells.iter().filter(|c| c.projected).count();
            let summary = format!(
                "maximin regime {} with value bounds [{}, {}] ({} of {} cells projected)",
                regime_display(result.maximin_regime.actions()),
                result.maximin_bounds.lb,
                result.maximin_bounds.ub,
                projected,
                result.cells.len()
            );
            emit(&io::json_string(&result)?, out.as_deref(), &summary)
        }
        Command::Regret { model, objective, n, reps, seed, min_arm_count, threads, out, per_rep } => {
            let model = io::load_model(&model)?;
            let config = RegretConfig {
                objective: objective.into(),
                n,
                reps,
                master_seed: seed,
                estimator: EstimatorConfig { min_arm_count, ..EstimatorConfig::default() },
            };
            let summary = regret_parallel(&model, &config, threads)?;
            if let Some(path) = per_rep {
                io::write_text(&path, &io::replication_csv_string(&summary.records))?;
            }
            let line = format!(
                "match rate {} mean regret {} over {} reps ({} failures)",
                summary.match_rate.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into()),
                summary.mean_regret.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into()),
                summary.reps,
                summary.failures
            );
            emit(&io::json_string(&summary)?, out.as_deref(), &line)
        }
        Command::Sweep {
            model,
            direction,
            eps_grid,
            objective,
            n,
            reps,
            seed,
            min_arm_count,
            tol,
            threads,
            out,
            per_rep,
        } => {
            let model = io::load_model(&model)?;
            let grid = parse_grid(&eps_grid)?;
            let config = RegretConfig {
                objective: objective.into(),
                n,
                reps,
                master_seed: seed,
                estimator: EstimatorConfig { min_arm_count, ..EstimatorConfig::default() },
            };
            let outcome =
                sweep_parallel(&model, direction.into(), &grid, &config, tol, threads)?;
            if let Some(path) = per_rep {
                io::write_text(&path, &io::sweep_replication_csv_string(&outcome.replications))?;
            }
            let line = format!("swept {} grid points", outcome.rows.len());
            emit(&io::sweep_csv_string(&outcome.rows), out.as_deref(), &line)
        }
        Command::Oracle { model, strict, out } => {
            let model = io::load_model(&model)?;
            let k = model.cell_count();
            let cate: Vec<f64> = (0..k).map(|l| model.cate(l).unwrap()).collect();
            let strength: Vec<f64> =
                (0..k).map(|l| model.instrument_strength(l).unwrap()).collect();
            let oracle = model.oracle_regime();
            let oracle_value = model.regime_value(&oracle)?;
            let mut weighted = serde_json::Map::new();
            let mut diagnostics = Vec::new();
            for objective in [Objective::Id1, Objective::Id2] {
                let key = match objective {
                    Objective::Id1 => "id1",
                    Objective::Id2 => "id2",
                };
                match model.population_argmax(objective) {
                    Ok(regime) => {
                        let entry = serde_json::json!({
                            "regime": regime.actions(),
                            "objective": model.population_objective(objective, &regime)?,
                            "value": model.regime_value(&regime)?,
                        });
                        weighted.insert(key.into(), entry);
                    }
                    Err(err) if !strict => {
                        weighted.insert(key.into(), serde_json::Value::Null);
                        diagnostics.push(format!("{key}: {err}"));
                    }
                    Err(err) => return Err(err.into()),
                }
            }
            let payload = serde_json::json!({
                "cells": k,
                "cate": cate,
                "instrument_strength": strength,
                "oracle": { "regime": oracle.actions(), "value": oracle_value },
                "id1": weighted["id1"],
                "id2": weighted["id2"],
                "diagnostics": diagnostics,
            });
            let line = format!(
                "oracle regime {} with value {}",
                regime_display(oracle.actions()),
                oracle_value
            );
            emit(&io::json_string(&payload)?, out.as_deref(), &line)
        }
    }
}
