//! Plug-in regime estimation from observed data alone.
//!
//! Cells are finite, so all nuisances are saturated frequency estimates:
//! per-cell take-up rates by instrument arm, their difference (the
//! estimated instrument strength), and the instrument propensity. The two
//! weighted sample objectives are evaluated with those plug-ins, and the
//! maximizing regime is found cell by cell — both objectives are additive
//! across cells, so the cell-wise choice equals the global argmax over all
//! `2^K` regimes.
//!
//! The reported objective value ranks regimes; it is *not* an estimate of
//! the welfare `E[Y(d(L))]` and must not be read as one. Welfare under
//! these identifying conditions is only partially identified; see the
//! `bounds` module for that.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::error::Error;
use crate::model::{Objective, Regime};
use crate::sampler::Dataset;
use crate::Result;

/// Knobs for nuisance fitting and objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// A cell is usable only if both instrument arms hold at least this
    /// many rows. Guards against exploding inverse-propensity weights.
    pub min_arm_count: usize,
    /// In strict mode, unusable or weak-instrument cells abort the run; in
    /// lenient mode they are excluded from objectives and assigned the
    /// reference arm with a diagnostic.
    pub strict: bool,
    /// Estimated instrument strengths below this mark the cell weak.
    pub weak_instrument_tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { min_arm_count: 5, strict: false, weak_instrument_tol: 1e-9 }
    }
}

/// Frequency estimates for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellEstimate {
    /// Cell id.
    pub cell: usize,
    /// Rows observed in the cell.
    pub rows: usize,
    /// Rows in the `z = -1` arm.
    pub rows_minus: usize,
    /// Rows in the `z = +1` arm.
    pub rows_plus: usize,
    /// Estimated `P(A=1 | Z=+1, l)`.
    pub take_up_plus: f64,
    /// Estimated `P(A=1 | Z=-1, l)`.
    pub take_up_minus: f64,
    /// Estimated instrument strength `take_up_plus - take_up_minus`.
    pub delta_hat: f64,
    /// Estimated instrument propensity `P(Z=+1 | l)`.
    pub f_hat_plus: f64,
    /// Both arms meet the minimum count.
    pub usable: bool,
    /// `|delta_hat|` fell below the weak-instrument tolerance.
    pub weak: bool,
}

impl CellEstimate {
    fn fit_for_objective(&self) -> bool {
        self.usable && !self.weak
    }

    /// Estimated instrument propensity of arm `z`.
    pub fn f_hat(&self, z: i8) -> f64 {
        if z == 1 { self.f_hat_plus } else { 1.0 - self.f_hat_plus }
    }
}

/// Per-cell plug-in nuisances for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PluginEstimates {
    /// One entry per cell id.
    pub cells: Vec<CellEstimate>,
    /// Total number of rows in the dataset the estimates were fit on.
    pub n: usize,
    /// Configuration the estimates were fit under.
    pub config: EstimatorConfig,
}

/// A fitted regime with its sample objective and per-cell evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeFit {
    /// The selected regime.
    pub regime: Regime,
    /// Sample objective evaluated at the selected regime. A ranking score,
    /// not a welfare estimate.
    #[serde(rename = "objective")]
    pub objective_value: f64,
    /// Per-cell contrast statistics.
    pub per_cell: Vec<PerCellFit>,
    /// Human-readable notes about dropped cells and other degradations.
    pub diagnostics: Vec<String>,
}

/// Evidence behind one cell's action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerCellFit {
    /// Cell id.
    pub cell: usize,
    /// Rows observed in the cell.
    pub rows: usize,
    /// Estimated instrument strength.
    pub delta_hat: f64,
    /// Estimated instrument propensity of the `+1` arm.
    pub f_hat_plus: f64,
    /// The cell's n-normalized objective contribution if assigned `+1`.
    pub contribution_plus: f64,
    /// The cell's n-normalized objective contribution if assigned `-1`.
    pub contribution_minus: f64,
    /// Action the fit assigned.
    pub action: i8,
    /// Whether the cell participated in the objective.
    pub usable: bool,
}

/// Fits saturated frequency nuisances per cell.
///
/// In strict mode a cell with an empty or under-populated instrument arm is
/// an error; otherwise such cells are merely marked unusable.
pub fn fit_nuisances(dataset: &Dataset, config: &EstimatorConfig) -> Result<PluginEstimates> {
    if config.min_arm_count == 0 {
        return Err(Error::InvalidArgument {
            reason: "min_arm_count must be at least 1".into(),
        });
    }
    let k = dataset.cell_count;
    let mut rows_arm = alloc::vec![[0usize; 2]; k];
    let mut takes_arm = alloc::vec![[0usize; 2]; k];
    for row in &dataset.rows {
        let arm = if row.z == 1 { 1 } else { 0 };
        rows_arm[row.l][arm] += 1;
        if row.a == 1 {
            takes_arm[row.l][arm] += 1;
        }
    }
    let mut cells = Vec::with_capacity(k);
    for l in 0..k {
        let [n_minus, n_plus] = rows_arm[l];
        let n_cell = n_minus + n_plus;
        let usable = n_minus >= config.min_arm_count && n_plus >= config.min_arm_count;
        if config.strict && !usable {
            let arm = if n_plus < config.min_arm_count { 1 } else { -1 };
            return Err(Error::MissingArm { cell: l, arm });
        }
        let take_up_plus = if n_plus > 0 { takes_arm[l][1] as f64 / n_plus as f64 } else { 0.0 };
        let take_up_minus = if n_minus > 0 { takes_arm[l][0] as f64 / n_minus as f64 } else { 0.0 };
        let delta_hat = take_up_plus - take_up_minus;
        let weak = delta_hat.abs() < config.weak_instrument_tol;
        if config.strict && weak {
            return Err(Error::WeakInstrument { cell: l, strength: delta_hat });
        }
        cells.push(CellEstimate {
            cell: l,
            rows: n_cell,
            rows_minus: n_minus,
            rows_plus: n_plus,
            take_up_plus,
            take_up_minus,
            delta_hat,
            f_hat_plus: if n_cell > 0 { n_plus as f64 / n_cell as f64 } else { 0.0 },
            usable,
            weak,
        });
    }
    Ok(PluginEstimates { cells, n: dataset.len(), config: *config })
}

fn check_shapes(dataset: &Dataset, estimates: &PluginEstimates, regime_len: usize) -> Result<()> {
    if estimates.cells.len() != dataset.cell_count {
        return Err(Error::InvalidArgument {
            reason: format!(
                "estimates cover {} cells but the dataset has {}",
                estimates.cells.len(),
                dataset.cell_count
            ),
        });
    }
    if regime_len != dataset.cell_count {
        return Err(Error::RegimeLengthMismatch {
            expected: dataset.cell_count,
            got: regime_len,
        });
    }
    Ok(())
}

fn check_cells_fit(estimates: &PluginEstimates) -> Result<()> {
    for cell in &estimates.cells {
        if !cell.usable {
            let arm = if cell.rows_plus < estimates.config.min_arm_count { 1 } else { -1 };
            return Err(Error::MissingArm { cell: cell.cell, arm });
        }
        if cell.weak {
            return Err(Error::WeakInstrument { cell: cell.cell, strength: cell.delta_hat });
        }
    }
    Ok(())
}

/// Per-row objective term, given the action assigned to the row's cell.
/// `Id2` never reads the treatment column.
fn row_term(objective: Objective, z: i8, a: i8, y: f64, action: i8, est: &CellEstimate) -> f64 {
    match objective {
        Objective::Id1 => {
            if a != action {
                return 0.0;
            }
            f64::from(z) * y * f64::from(a) / (est.delta_hat * est.f_hat(z))
        }
        Objective::Id2 => {
            if z != action {
                return 0.0;
            }
            y / (est.delta_hat * est.f_hat(z))
        }
    }
}

/// Evaluates a weighted sample objective at a regime.
///
/// In lenient mode, rows in unusable or weak cells are excluded while the
/// normalization stays `1/n` over all rows; in strict mode such cells are
/// errors.
pub fn sample_objective(
    dataset: &Dataset,
    estimates: &PluginEstimates,
    objective: Objective,
    regime: &Regime,
) -> Result<f64> {
    check_shapes(dataset, estimates, regime.len())?;
    if estimates.config.strict {
        check_cells_fit(estimates)?;
    }
    let mut sum = 0.0;
    for row in &dataset.rows {
        let est = &estimates.cells[row.l];
        if !est.fit_for_objective() {
            continue;
        }
        sum += row_term(objective, row.z, row.a, row.y, regime.action(row.l), est);
    }
    Ok(sum / dataset.len() as f64)
}

/// Selects the objective-maximizing regime cell by cell.
///
/// Each cell's summed contribution under action `+1` is compared with its
/// contribution under `-1`; ties resolve to `-1`. Unusable cells are
/// assigned `-1` with a diagnostic (lenient) or abort the run (strict).
/// The reported objective value is `sample_objective` at the selected
/// regime.
pub fn argmax_regime(
    dataset: &Dataset,
    estimates: &PluginEstimates,
    objective: Objective,
) -> Result<RegimeFit> {
    check_shapes(dataset, estimates, dataset.cell_count)?;
    if estimates.config.strict {
        check_cells_fit(estimates)?;
    }
    let k = dataset.cell_count;
    let mut plus = alloc::vec![0.0f64; k];
    let mut minus = alloc::vec![0.0f64; k];
    for row in &dataset.rows {
        let est = &estimates.cells[row.l];
        if !est.fit_for_objective() {
            continue;
        }
        plus[row.l] += row_term(objective, row.z, row.a, row.y, 1, est);
        minus[row.l] += row_term(objective, row.z, row.a, row.y, -1, est);
    }
    let n = dataset.len() as f64;
    let mut actions = Vec::with_capacity(k);
    let mut per_cell = Vec::with_capacity(k);
    let mut diagnostics = Vec::new();
    for (l, est) in estimates.cells.iter().enumerate() {
        let usable = est.fit_for_objective();
        let action = if usable && plus[l] > minus[l] { 1 } else { -1 };
        if !usable {
            if !est.usable {
                diagnostics.push(format!(
                    "cell {l}: instrument arms hold {} / {} rows (minimum {}); \
                     excluded from the objective, assigned -1",
                    est.rows_minus, est.rows_plus, estimates.config.min_arm_count
                ));
            } else {
                diagnostics.push(format!(
                    "cell {l}: estimated instrument strength {:e} is below {:e}; \
                     excluded from the objective, assigned -1",
                    est.delta_hat, estimates.config.weak_instrument_tol
                ));
            }
        }
        per_cell.push(PerCellFit {
            cell: l,
            rows: est.rows,
            delta_hat: est.delta_hat,
            f_hat_plus: est.f_hat_plus,
            contribution_plus: plus[l] / n,
            contribution_minus: minus[l] / n,
            action,
            usable,
        });
        actions.push(action);
    }
    let regime = Regime::new(actions).expect("actions constructed in domain");
    let objective_value = sample_objective(dataset, estimates, objective, &regime)?;
    Ok(RegimeFit { regime, objective_value, per_cell, diagnostics })
}
