//! Thread-pooled drivers for replication-heavy experiments.
//!
//! Each replication depends only on `(master seed, replication index)`, so
//! the drivers fan replications out over a local rayon pool, collect them
//! back in index order, and reuse the core aggregation. Output is
//! byte-identical to the serial path at every worker count.

use ivregime_core::analysis::{
    assemble_sweep_row, misspecification_sweep, perturb_model, regret_experiment,
    run_replication, summarize, RegretConfig, RegretSummary, SweepDirection, SweepOutcome,
    SweepRow,
};
use ivregime_core::{Error, StructuralModel};
use rayon::prelude::*;

use crate::AppError;

fn pool(threads: usize) -> Result<rayon::ThreadPool, AppError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|err| AppError::Validation(format!("cannot build thread pool: {err}")))
}

/// Regret experiment on `threads` workers; `threads <= 1` falls through to
/// the serial core implementation.
pub fn regret_parallel(
    model: &StructuralModel,
    config: &RegretConfig,
    threads: usize,
) -> Result<RegretSummary, AppError> {
    if threads <= 1 {
        return Ok(regret_experiment(model, config)?);
    }
    if config.n == 0 {
        return Err(Error::EmptySample.into());
    }
    if config.reps == 0 {
        return Err(Error::InvalidArgument { reason: "reps must be at least 1".into() }.into());
    }
    model.validate()?;
    let oracle = model.oracle_regime();
    let oracle_value = model.regime_value(&oracle)?;
    let records = pool(threads)?.install(|| {
        (0..config.reps as u32)
            .into_par_iter()
            .map(|rep| run_replication(model, &oracle, oracle_value, config, rep))
            .collect::<Vec<_>>()
    });
    Ok(summarize(oracle, oracle_value, config.reps, records))
}

/// Misspecification sweep with parallel replications inside each grid
/// point. Grid points run in order; rows are identical to the serial
/// sweep's.
pub fn sweep_parallel(
    base: &StructuralModel,
    direction: SweepDirection,
    eps_grid: &[f64],
    config: &RegretConfig,
    assumption_tol: f64,
    threads: usize,
) -> Result<SweepOutcome, AppError> {
    if threads <= 1 {
        return Ok(misspecification_sweep(base, direction, eps_grid, config, assumption_tol)?);
    }
    if eps_grid.is_empty() {
        return Err(Error::InvalidArgument { reason: "eps grid must be nonempty".into() }.into());
    }
    base.validate()?;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(eps_grid.len());
    let mut replications = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let model = perturb_model(base, direction, eps)?;
        let summary = regret_parallel(&model, config, threads)?;
        rows.push(assemble_sweep_row(&model, eps, &summary, assumption_tol)?);
        replications.push((eps, summary.records));
    }
    Ok(SweepOutcome { rows, replications })
}
