//! Sensitivity analysis: covariance algebra for binary latent types,
//! regret experiments against simulation ground truth, and misspecification
//! sweeps.
//!
//! Regret here is always measured against the generating model — the value
//! of its oracle regime minus the value of the estimated regime — because
//! no data-only regret estimate is available under the sign-homogeneity
//! conditions alone. Sweeps perturb one identifying surface at a time,
//! re-run the regret experiment, and report the realized assumption
//! diagnostics next to each perturbation size so rows stay interpretable
//! even when the perturbation parameterization is a modeling choice.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::Serialize;

use crate::bounds::{bounds_result, cell_observables_from_model, BoundsConfig};
use crate::error::Error;
use crate::estimator::{argmax_regime, fit_nuisances, EstimatorConfig};
use crate::model::{CellSpec, Objective, Regime, StructuralModel};
use crate::sampler::{child_seed, sample};
use crate::Result;

// ── Binary latent type covariance algebra ─────────────────────────────

/// A two-point latent type with generic per-type values `delta` and
/// `gamma` (take-up and outcome contrasts, in the intended reading).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryUSpec {
    /// Probability of the first latent type, strictly inside `(0, 1)`.
    pub p1: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl BinaryUSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p1 > 0.0 && self.p1 < 1.0) {
            return Err(Error::InvalidArgument {
                reason: alloc::format!("p1 = {} is not strictly inside (0, 1)", self.p1),
            });
        }
        for v in [self.delta1, self.delta2, self.gamma1, self.gamma2] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument {
                    reason: "contrast values must be finite".to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Covariance of the two functions over the two-point distribution, in
/// factorized form: `p1 (1 - p1) (delta1 - delta2) (gamma1 - gamma2)`.
///
/// The factorization makes the zero set visible: the covariance vanishes
/// exactly when one of the two functions is constant.
pub fn binary_u_cov(spec: &BinaryUSpec) -> f64 {
    let factorized =
        spec.p1 * (1.0 - spec.p1) * (spec.delta1 - spec.delta2) * (spec.gamma1 - spec.gamma2);
    debug_assert!({
        let scale = [spec.delta1, spec.delta2, spec.gamma1, spec.gamma2]
            .into_iter()
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        (factorized - binary_u_cov_definitional(spec)).abs() <= 1e-12 * scale * scale
    });
    factorized
}

/// Same covariance computed from its definition, `E[dg] - E[d] E[g]`.
/// Kept as an independent route for cross-checking the factorization.
pub fn binary_u_cov_definitional(spec: &BinaryUSpec) -> f64 {
    let p2 = 1.0 - spec.p1;
    let mean_delta = spec.p1 * spec.delta1 + p2 * spec.delta2;
    let mean_gamma = spec.p1 * spec.gamma1 + p2 * spec.gamma2;
    let mean_product = spec.p1 * spec.delta1 * spec.gamma1 + p2 * spec.delta2 * spec.gamma2;
    mean_product - mean_delta * mean_gamma
}

/// Checks the equivalence "covariance below `tol`" if and only if "at
/// least one contrast below the derived threshold", where the threshold is
/// `tol / (p1 (1-p1) * larger contrast)` (or the square-root form when both
/// contrasts are small). Returns whether the two sides agree for this spec.
pub fn binary_u_iff_check(spec: &BinaryUSpec, tol: f64) -> Result<bool> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument {
            reason: alloc::format!("tolerance must be positive, got {tol}"),
        });
    }
    spec.validate()?;
    let weight = spec.p1 * (1.0 - spec.p1);
    let d_contrast = (spec.delta1 - spec.delta2).abs();
    let g_contrast = (spec.gamma1 - spec.gamma2).abs();
    let cov_is_zero = (weight * d_contrast * g_contrast).abs() < tol;
    let (small, large) = if d_contrast <= g_contrast {
        (d_contrast, g_contrast)
    } else {
        (g_contrast, d_contrast)
    };
    let some_constant = if weight * large * large <= tol {
        // Both contrasts below sqrt(tol / weight); the product is then
        // automatically below tol / weight.
        small <= large
    } else {
        weight * small * large < tol
    };
    Ok(cov_is_zero == some_constant)
}

// ── Regret experiments ────────────────────────────────────────────────

/// Configuration of one regret experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegretConfig {
    /// Objective the estimator maximizes.
    pub objective: Objective,
    /// Rows per replication.
    pub n: usize,
    /// Number of replications.
    pub reps: usize,
    /// Master seed; replication `r` samples under `child_seed(master, r)`.
    pub master_seed: u64,
    /// Estimator knobs.
    pub estimator: EstimatorConfig,
}

/// What happened in one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ReplicationOutcome {
    /// The estimator produced a regime.
    Fit {
        regime: Regime,
        /// Oracle value minus estimated-regime value under the generating
        /// model; nonnegative up to float rounding.
        regret: f64,
        /// Whether the estimated regime equals the oracle regime.
        matched: bool,
    },
    /// The estimator refused (recorded, excluded from aggregates).
    Failed { reason: String },
}

/// One replication's record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep: u32,
    pub outcome: ReplicationOutcome,
}

/// Aggregates of a regret experiment. Aggregate fields are `None` when
/// every replication failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretSummary {
    pub reps: usize,
    pub failures: usize,
    pub match_rate: Option<f64>,
    pub mean_regret: Option<f64>,
    pub median_regret: Option<f64>,
    pub q90_regret: Option<f64>,
    pub oracle_regime: Regime,
    pub oracle_value: f64,
    #[serde(skip)]
    pub records: Vec<ReplicationRecord>,
}

/// Runs replication `rep`: sample, fit, compare against the oracle regime.
/// Pure in all arguments, so replications can run on any schedule.
pub fn run_replication(
    model: &StructuralModel,
    oracle: &Regime,
    oracle_value: f64,
    config: &RegretConfig,
    rep: u32,
) -> ReplicationRecord {
    let outcome = (|| -> Result<ReplicationOutcome> {
        let dataset = sample(model, config.n, child_seed(config.master_seed, u64::from(rep)))?;
        let estimates = fit_nuisances(&dataset, &config.estimator)?;
        let fit = argmax_regime(&dataset, &estimates, config.objective)?;
        let regret = oracle_value - model.regime_value(&fit.regime)?;
        debug_assert!(regret >= -1e-12);
        let matched = fit.regime == *oracle;
        Ok(ReplicationOutcome::Fit { regime: fit.regime, regret, matched })
    })()
    .unwrap_or_else(|err| ReplicationOutcome::Failed { reason: err.to_string() });
    ReplicationRecord { rep, outcome }
}

/// Folds replication records into a summary. Records must be keyed by
/// replication index; order does not affect the aggregates because they
/// are sorted internally where order matters.
pub fn summarize(
    oracle: Regime,
    oracle_value: f64,
    reps: usize,
    records: Vec<ReplicationRecord>,
) -> RegretSummary {
    let mut regrets = Vec::with_capacity(records.len());
    let mut matches = 0usize;
    let mut failures = 0usize;
    for record in &records {
        match &record.outcome {
            ReplicationOutcome::Fit { regret, matched, .. } => {
                regrets.push(*regret);
                matches += usize::from(*matched);
            }
            ReplicationOutcome::Failed { .. } => failures += 1,
        }
    }
    let successes = regrets.len();
    let (match_rate, mean, median, q90) = if successes == 0 {
        (None, None, None, None)
    } else {
        regrets.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite regret"));
        let mean = regrets.iter().sum::<f64>() / successes as f64;
        let median = if successes % 2 == 1 {
            regrets[successes / 2]
        } else {
            0.5 * (regrets[successes / 2 - 1] + regrets[successes / 2])
        };
        // Nearest-rank upper quantile.
        let rank = libm::ceil(0.9 * successes as f64) as usize;
        let q90 = regrets[rank.clamp(1, successes) - 1];
        (Some(matches as f64 / successes as f64), Some(mean), Some(median), Some(q90))
    };
    RegretSummary {
        reps,
        failures,
        match_rate,
        mean_regret: mean,
        median_regret: median,
        q90_regret: q90,
        oracle_regime: oracle,
        oracle_value,
        records,
    }
}

/// Samples `reps` datasets from the model, estimates a regime from each,
/// and aggregates regret against the model's oracle regime.
pub fn regret_experiment(model: &StructuralModel, config: &RegretConfig) -> Result<RegretSummary> {
    if config.n == 0 {
        return Err(Error::EmptySample);
    }
    if config.reps == 0 {
        return Err(Error::InvalidArgument { reason: "reps must be at least 1".into() });
    }
    model.validate()?;
    let oracle = model.oracle_regime();
    let oracle_value = model.regime_value(&oracle)?;
    let records = (0..config.reps as u32)
        .map(|rep| run_replication(model, &oracle, oracle_value, config, rep))
        .collect();
    Ok(summarize(oracle, oracle_value, config.reps, records))
}

// ── Misspecification sweeps ───────────────────────────────────────────

/// Which identifying surface a sweep perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepDirection {
    /// Shift the last latent type's treated-outcome mean by `-eps`, pushing
    /// its outcome contrast across zero while the others keep their sign.
    ShiftOutcomeContrast,
    /// Tilt take-up contrasts along the centered outcome contrasts until
    /// their covariance equals `eps`. Leaves the mean take-up contrast (and
    /// so the instrument strength) unchanged.
    TiltContrastCovariance,
    /// Rescale take-up contrasts around their mean until their variance
    /// equals `eps`. Also preserves the instrument strength.
    ScaleTakeupVariance,
}

const DEGENERATE_TOL: f64 = 1e-12;

/// Applies the perturbation at size `eps` to every cell, rejecting any
/// probability pushed outside `[0, 1]`. A perturbation that is exactly
/// null returns the base model unchanged.
pub fn perturb_model(
    base: &StructuralModel,
    direction: SweepDirection,
    eps: f64,
) -> Result<StructuralModel> {
    if !eps.is_finite() {
        return Err(Error::InvalidPerturbation {
            path: "eps".to_string(),
            reason: alloc::format!("{eps} is not finite"),
        });
    }
    let mut model = base.clone();
    for (l, cell) in model.cells.iter_mut().enumerate() {
        match direction {
            SweepDirection::ShiftOutcomeContrast => {
                if eps != 0.0 {
                    let last = cell.latent_count() - 1;
                    cell.m_plus[last] -= eps;
                }
            }
            SweepDirection::TiltContrastCovariance => {
                let stats = contrast_stats(cell);
                if (eps - stats.covariance).abs() > DEGENERATE_TOL {
                    if stats.outcome_variance < DEGENERATE_TOL {
                        return Err(Error::InvalidPerturbation {
                            path: alloc::format!("cells[{l}]"),
                            reason: "outcome contrasts are degenerate; the covariance \
                                     cannot be tilted"
                                .to_string(),
                        });
                    }
                    let tilt = (eps - stats.covariance) / stats.outcome_variance;
                    let outcome: Vec<f64> =
                        (0..cell.latent_count()).map(|u| cell.outcome_contrast(u)).collect();
                    retarget_takeup(cell, |u, takeup| {
                        takeup + tilt * (outcome[u] - stats.outcome_mean)
                    });
                }
            }
            SweepDirection::ScaleTakeupVariance => {
                if eps < 0.0 {
                    return Err(Error::InvalidPerturbation {
                        path: "eps".to_string(),
                        reason: "a variance target cannot be negative".to_string(),
                    });
                }
                let stats = contrast_stats(cell);
                if (eps - stats.takeup_variance).abs() > DEGENERATE_TOL {
                    if stats.takeup_variance < DEGENERATE_TOL {
                        return Err(Error::InvalidPerturbation {
                            path: alloc::format!("cells[{l}]"),
                            reason: "take-up contrasts are constant; their variance \
                                     cannot be rescaled"
                                .to_string(),
                        });
                    }
                    let scale = libm::sqrt(eps / stats.takeup_variance);
                    retarget_takeup(cell, |_, takeup| {
                        stats.takeup_mean + scale * (takeup - stats.takeup_mean)
                    });
                }
            }
        }
    }
    model.validate().map_err(|err| match err {
        Error::InvalidModel { path, reason } => Error::InvalidPerturbation { path, reason },
        other => other,
    })?;
    Ok(model)
}

struct ContrastStats {
    outcome_mean: f64,
    outcome_variance: f64,
    takeup_mean: f64,
    takeup_variance: f64,
    covariance: f64,
}

fn contrast_stats(cell: &CellSpec) -> ContrastStats {
    let m = cell.latent_count();
    let outcome: Vec<f64> = (0..m).map(|u| cell.outcome_contrast(u)).collect();
    let takeup: Vec<f64> = (0..m).map(|u| cell.takeup_contrast(u)).collect();
    let outcome_mean: f64 = cell.u_probs.iter().zip(&outcome).map(|(w, v)| w * v).sum();
    let takeup_mean: f64 = cell.u_probs.iter().zip(&takeup).map(|(w, v)| w * v).sum();
    let mut outcome_variance = 0.0;
    let mut takeup_variance = 0.0;
    let mut covariance = 0.0;
    for ((&w, &o), &t) in cell.u_probs.iter().zip(&outcome).zip(&takeup) {
        outcome_variance += w * (o - outcome_mean) * (o - outcome_mean);
        takeup_variance += w * (t - takeup_mean) * (t - takeup_mean);
        covariance += w * (o - outcome_mean) * (t - takeup_mean);
    }
    ContrastStats { outcome_mean, outcome_variance, takeup_mean, takeup_variance, covariance }
}

/// Rewrites the take-up surfaces so that type `u`'s contrast becomes
/// `new_contrast(u, old_contrast)` while the midpoint
/// `(q_plus + q_minus) / 2` stays put.
fn retarget_takeup(cell: &mut CellSpec, new_contrast: impl Fn(usize, f64) -> f64) {
    for u in 0..cell.latent_count() {
        let midpoint = 0.5 * (cell.q_plus[u] + cell.q_minus[u]);
        let contrast = new_contrast(u, cell.takeup_contrast(u));
        cell.q_plus[u] = midpoint + 0.5 * contrast;
        cell.q_minus[u] = midpoint - 0.5 * contrast;
    }
}

/// One row of a sweep table: the perturbation size, the realized
/// assumption diagnostics of the perturbed model, the regret aggregates,
/// and the regret of the bound-based maximin regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    /// Cell-weighted mean covariance of outcome and take-up contrasts.
    pub cov7: f64,
    /// Cell-weighted mean variance of take-up contrasts.
    pub var8: f64,
    /// All cells have sign-homogeneous outcome contrasts.
    pub aa_holds: bool,
    /// All cells have sign-homogeneous take-up contrasts.
    pub ab_holds: bool,
    pub match_rate: Option<f64>,
    pub mean_regret: Option<f64>,
    pub q90_regret: Option<f64>,
    /// Oracle value minus the value of the maximin regime computed from the
    /// perturbed model's exact observables.
    pub maximin_regret: f64,
    pub failures: usize,
}

/// A sweep table plus the per-replication records behind each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// `(eps, records)` pairs, parallel to `rows`.
    pub replications: Vec<(f64, Vec<ReplicationRecord>)>,
}

/// Builds the diagnostics-plus-maximin part of a sweep row around an
/// already-computed regret summary. Shared by the serial sweep here and
/// any parallel driver so both produce identical rows.
pub fn assemble_sweep_row(
    model: &StructuralModel,
    eps: f64,
    summary: &RegretSummary,
    assumption_tol: f64,
) -> Result<SweepRow> {
    let report = model.check_assumptions(assumption_tol)?;
    let observables = cell_observables_from_model(model)?;
    let bounds = bounds_result(&observables, BoundsConfig::default())?;
    let maximin_value = model.regime_value(&bounds.maximin_regime)?;
    Ok(SweepRow {
        eps,
        cov7: report.mean_contrast_covariance(),
        var8: report.mean_takeup_variance(),
        aa_holds: report.all_outcome_signs_uniform(),
        ab_holds: report.all_takeup_signs_uniform(),
        match_rate: summary.match_rate,
        mean_regret: summary.mean_regret,
        q90_regret: summary.q90_regret,
        maximin_regret: summary.oracle_value - maximin_value,
        failures: summary.failures,
    })
}

/// Perturbs the base model at every grid point and re-runs the regret
/// experiment, emitting one row per `eps`. Every row uses the same master
/// seed, so rows differ only through the perturbed model.
pub fn misspecification_sweep(
    base: &StructuralModel,
    direction: SweepDirection,
    eps_grid: &[f64],
    config: &RegretConfig,
    assumption_tol: f64,
) -> Result<SweepOutcome> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidArgument { reason: "eps grid must be nonempty".into() });
    }
    base.validate()?;
    let mut rows = Vec::with_capacity(eps_grid.len());
    let mut replications = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let model = perturb_model(base, direction, eps)?;
        let summary = regret_experiment(&model, config)?;
        rows.push(assemble_sweep_row(&model, eps, &summary, assumption_tol)?);
        replications.push((eps, summary.records));
    }
    Ok(SweepOutcome { rows, replications })
}
