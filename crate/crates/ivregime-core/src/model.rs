//! Structural model over finite covariate cells and the exact population
//! quantities it induces.
//!
//! A [`StructuralModel`] specifies, for each covariate cell `l`, a latent
//! type distribution `p(u|l)`, conditional outcome means under each
//! treatment arm, take-up probabilities under each instrument arm, and the
//! instrument propensity. Every population quantity — conditional treatment
//! effects, instrument strength, regime values, and the two identification
//! objectives — is computed by exact enumeration over `(l, u, z, a)`; there
//! is no sampling anywhere in this module.
//!
//! Conventions used throughout the crate:
//!
//! * treatments and instruments take values in `{-1, +1}`;
//! * ties in any argmax resolve to `-1`, the reference arm;
//! * the instrument-strength denominator is used with its sign, never
//!   assumed positive.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Probability vectors must sum to one within this slack.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Weighted objectives refuse to divide by instrument strengths smaller
/// than this.
pub const WEAK_INSTRUMENT_TOL: f64 = 1e-12;

/// Default tolerance for sign-agreement and zero checks in
/// [`StructuralModel::check_assumptions`].
pub const DEFAULT_ASSUMPTION_TOL: f64 = 1e-9;

/// Per-cell objective contributions within this distance count as tied.
/// The `+1` and `-1` contributions travel different float paths, so an
/// algebraically exact tie (a zero-effect cell, say) lands within rounding
/// of zero rather than at zero.
pub const POPULATION_TIE_TOL: f64 = 1e-12;

/// One covariate cell: latent type distribution and the conditional
/// response surfaces attached to it.
///
/// All vectors are indexed by latent type `u = 0..M-1` and must share a
/// length. The instrument is drawn from `pi_z` independently of `u`, which
/// encodes instrument randomization within the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    /// Latent type distribution `p(u|l)`.
    pub u_probs: Vec<f64>,
    /// Outcome mean under treatment `+1`, per latent type.
    pub m_plus: Vec<f64>,
    /// Outcome mean under treatment `-1`, per latent type.
    pub m_minus: Vec<f64>,
    /// Take-up probability `P(A=1 | Z=+1, l, u)`, per latent type.
    pub q_plus: Vec<f64>,
    /// Take-up probability `P(A=1 | Z=-1, l, u)`, per latent type.
    pub q_minus: Vec<f64>,
    /// Instrument propensity `P(Z=+1 | l)`, strictly inside `(0, 1)`.
    pub pi_z: f64,
}

impl CellSpec {
    /// Number of latent types in this cell.
    pub fn latent_count(&self) -> usize {
        self.u_probs.len()
    }

    /// Outcome contrast `E[Y(+1) - Y(-1) | l, u]` for latent type `u`.
    pub fn outcome_contrast(&self, u: usize) -> f64 {
        self.m_plus[u] - self.m_minus[u]
    }

    /// Take-up contrast `P(A=1|Z=+1,l,u) - P(A=1|Z=-1,l,u)` for type `u`.
    pub fn takeup_contrast(&self, u: usize) -> f64 {
        self.q_plus[u] - self.q_minus[u]
    }

    fn validate(&self, path: &str) -> Result<()> {
        let m = self.u_probs.len();
        if m == 0 {
            return Err(Error::InvalidModel {
                path: format!("{path}.u_probs"),
                reason: "at least one latent type is required".to_string(),
            });
        }
        for (name, field) in [
            ("m_plus", &self.m_plus),
            ("m_minus", &self.m_minus),
            ("q_plus", &self.q_plus),
            ("q_minus", &self.q_minus),
        ] {
            if field.len() != m {
                return Err(Error::InvalidModel {
                    path: format!("{path}.{name}"),
                    reason: format!("length {} does not match u_probs length {m}", field.len()),
                });
            }
            for (u, &v) in field.iter().enumerate() {
                if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidModel {
                        path: format!("{path}.{name}[{u}]"),
                        reason: format!("{v} is outside [0, 1]"),
                    });
                }
            }
        }
        validate_prob_vec(&self.u_probs, &format!("{path}.u_probs"))?;
        if !(self.pi_z.is_finite() && self.pi_z > 0.0 && self.pi_z < 1.0) {
            return Err(Error::InvalidModel {
                path: format!("{path}.pi_z"),
                reason: format!("{} is outside the open interval (0, 1)", self.pi_z),
            });
        }
        Ok(())
    }
}

fn validate_prob_vec(probs: &[f64], path: &str) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidModel {
                path: format!("{path}[{i}]"),
                reason: format!("{p} is not a nonnegative probability"),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidModel {
            path: path.to_string(),
            reason: format!("probabilities sum to {sum}, expected 1"),
        });
    }
    Ok(())
}

/// Full data-generating specification over `K` covariate cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralModel {
    /// Per-cell specifications, indexed by cell id `l = 0..K-1`.
    pub cells: Vec<CellSpec>,
    /// Cell distribution `p(l)`.
    pub cell_probs: Vec<f64>,
}

/// The two estimable weighted objectives.
///
/// Both rank regimes identically to the true value `E[Y(d(L))]` whenever
/// outcome and take-up contrasts are sign-homogeneous across latent types
/// within every cell, but neither one estimates that value itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Weights the outcome by instrument, observed treatment, and the
    /// indicator that the observed treatment matches the regime:
    /// `Z * 1{A = d(L)} * Y * A / (delta(L) * f(Z|L))`.
    Id1,
    /// Weights the outcome by the indicator that the instrument matches
    /// the regime: `1{Z = d(L)} * Y / (delta(L) * f(Z|L))`. Never reads
    /// the treatment.
    Id2,
}

/// A deterministic rule assigning a treatment in `{-1, +1}` to every cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Regime {
    actions: Vec<i8>,
}

impl Regime {
    /// Builds a regime from per-cell actions, each `-1` or `+1`.
    pub fn new(actions: Vec<i8>) -> Result<Self> {
        for (l, &a) in actions.iter().enumerate() {
            if a != 1 && a != -1 {
                return Err(Error::InvalidArgument {
                    reason: format!("regime action {a} at cell {l} is not in {{-1, +1}}"),
                });
            }
        }
        Ok(Regime { actions })
    }

    /// The regime treating every cell.
    pub fn all_plus(cell_count: usize) -> Self {
        Regime { actions: alloc::vec![1; cell_count] }
    }

    /// The regime withholding treatment everywhere.
    pub fn all_minus(cell_count: usize) -> Self {
        Regime { actions: alloc::vec![-1; cell_count] }
    }

    /// Action assigned to cell `l`.
    pub fn action(&self, l: usize) -> i8 {
        self.actions[l]
    }

    /// Number of cells covered.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// True when the regime covers no cells.
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Per-cell actions.
    pub fn actions(&self) -> &[i8] {
        &self.actions
    }

    /// Iterates over all `2^cell_count` regimes, in the order induced by
    /// treating cell `l` when bit `l` of the counter is set. Intended for
    /// exhaustive checks over small cell counts.
    pub fn enumerate(cell_count: usize) -> impl Iterator<Item = Regime> {
        assert!(cell_count < usize::BITS as usize, "cell count too large to enumerate");
        (0..1usize << cell_count).map(move |mask| Regime {
            actions: (0..cell_count)
                .map(|l| if mask >> l & 1 == 1 { 1 } else { -1 })
                .collect(),
        })
    }
}

impl TryFrom<Vec<i8>> for Regime {
    type Error = Error;

    fn try_from(actions: Vec<i8>) -> Result<Self> {
        Regime::new(actions)
    }
}

impl From<Regime> for Vec<i8> {
    fn from(regime: Regime) -> Self {
        regime.actions
    }
}

/// Numerical diagnostics for one cell's identifying conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDiagnostics {
    /// Cell id.
    pub cell: usize,
    /// Cell probability `p(l)`.
    pub weight: f64,
    /// Instrument strength `delta(l)`, the mean take-up contrast.
    pub instrument_strength: f64,
    /// Conditional average treatment effect, the mean outcome contrast.
    pub cate: f64,
    /// Whether all per-type outcome contrasts share one weak sign.
    pub uniform_outcome_sign: bool,
    /// Whether all per-type take-up contrasts share one weak sign.
    pub uniform_takeup_sign: bool,
    /// Covariance, over latent types, of outcome and take-up contrasts.
    pub contrast_covariance: f64,
    /// Variance, over latent types, of the take-up contrasts.
    pub takeup_variance: f64,
}

/// Per-cell assumption diagnostics for a whole model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Tolerance used for the sign-agreement checks.
    pub tol: f64,
    /// One entry per cell.
    pub cells: Vec<CellDiagnostics>,
}

impl AssumptionReport {
    /// True when every cell's outcome contrasts are sign-homogeneous.
    pub fn all_outcome_signs_uniform(&self) -> bool {
        self.cells.iter().all(|c| c.uniform_outcome_sign)
    }

    /// True when every cell's take-up contrasts are sign-homogeneous.
    pub fn all_takeup_signs_uniform(&self) -> bool {
        self.cells.iter().all(|c| c.uniform_takeup_sign)
    }

    /// Cell-probability-weighted mean of the contrast covariances.
    pub fn mean_contrast_covariance(&self) -> f64 {
        self.cells.iter().map(|c| c.weight * c.contrast_covariance).sum()
    }

    /// Cell-probability-weighted mean of the take-up contrast variances.
    pub fn mean_takeup_variance(&self) -> f64 {
        self.cells.iter().map(|c| c.weight * c.takeup_variance).sum()
    }
}

impl StructuralModel {
    /// Builds and validates a model.
    pub fn new(cells: Vec<CellSpec>, cell_probs: Vec<f64>) -> Result<Self> {
        let model = StructuralModel { cells, cell_probs };
        model.validate()?;
        Ok(model)
    }

    /// Checks every structural invariant, reporting the offending path on
    /// failure. Deserialized models must pass through here before use.
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidModel {
                path: "cells".to_string(),
                reason: "at least one cell is required".to_string(),
            });
        }
        if self.cell_probs.len() != self.cells.len() {
            return Err(Error::InvalidModel {
                path: "cell_probs".to_string(),
                reason: format!(
                    "length {} does not match cell count {}",
                    self.cell_probs.len(),
                    self.cells.len()
                ),
            });
        }
        validate_prob_vec(&self.cell_probs, "cell_probs")?;
        for (l, cell) in self.cells.iter().enumerate() {
            cell.validate(&format!("cells[{l}]"))?;
        }
        Ok(())
    }

    /// Number of covariate cells `K`.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    fn cell(&self, l: usize) -> Result<&CellSpec> {
        self.cells.get(l).ok_or(Error::CellOutOfRange {
            cell: l,
            cell_count: self.cells.len(),
        })
    }

    /// Conditional average treatment effect in cell `l`:
    /// the `p(u|l)`-weighted mean outcome contrast.
    pub fn cate(&self, l: usize) -> Result<f64> {
        let cell = self.cell(l)?;
        Ok((0..cell.latent_count())
            .map(|u| cell.u_probs[u] * cell.outcome_contrast(u))
            .sum())
    }

    /// Instrument strength in cell `l`: the `p(u|l)`-weighted mean take-up
    /// contrast. May be negative; it is used with its sign everywhere.
    pub fn instrument_strength(&self, l: usize) -> Result<f64> {
        let cell = self.cell(l)?;
        Ok((0..cell.latent_count())
            .map(|u| cell.u_probs[u] * cell.takeup_contrast(u))
            .sum())
    }

    /// True welfare of a regime, `E[Y(d(L))]`, by enumeration over `(l, u)`.
    pub fn regime_value(&self, regime: &Regime) -> Result<f64> {
        self.check_regime_len(regime)?;
        let mut value = 0.0;
        for (l, cell) in self.cells.iter().enumerate() {
            let means = if regime.action(l) == 1 { &cell.m_plus } else { &cell.m_minus };
            let cell_mean: f64 = (0..cell.latent_count())
                .map(|u| cell.u_probs[u] * means[u])
                .sum();
            value += self.cell_probs[l] * cell_mean;
        }
        Ok(value)
    }

    fn check_regime_len(&self, regime: &Regime) -> Result<()> {
        if regime.len() != self.cells.len() {
            return Err(Error::RegimeLengthMismatch {
                expected: self.cells.len(),
                got: regime.len(),
            });
        }
        Ok(())
    }

    fn check_instrument_strengths(&self) -> Result<Vec<f64>> {
        let mut strengths = Vec::with_capacity(self.cells.len());
        for l in 0..self.cells.len() {
            let s = self.instrument_strength(l)?;
            if s.abs() < WEAK_INSTRUMENT_TOL {
                return Err(Error::WeakInstrument { cell: l, strength: s });
            }
            strengths.push(s);
        }
        Ok(strengths)
    }

    /// Exact population value of a weighted objective at a regime, by
    /// enumeration over `(l, u, z, a)` with the outcome replaced by its
    /// conditional mean.
    ///
    /// This is a ranking criterion, not welfare: it orders regimes like
    /// [`regime_value`](Self::regime_value) does under sign-homogeneous
    /// contrasts, but its level is not `E[Y(d(L))]`.
    pub fn population_objective(&self, objective: Objective, regime: &Regime) -> Result<f64> {
        self.check_regime_len(regime)?;
        let strengths = self.check_instrument_strengths()?;
        let mut total = 0.0;
        for (l, &strength) in strengths.iter().enumerate() {
            total += self.cell_probs[l]
                * self.cell_contribution(l, strength, objective, regime.action(l));
        }
        Ok(total)
    }

    /// Contribution of cell `l` to the population objective (conditional on
    /// the cell, so weighting by `p(l)` is the caller's job).
    fn cell_contribution(&self, l: usize, strength: f64, objective: Objective, action: i8) -> f64 {
        let cell = &self.cells[l];
        let mut sum = 0.0;
        for u in 0..cell.latent_count() {
            let w_u = cell.u_probs[u];
            for z in [1i8, -1i8] {
                let f_z = if z == 1 { cell.pi_z } else { 1.0 - cell.pi_z };
                let q_z = if z == 1 { cell.q_plus[u] } else { cell.q_minus[u] };
                for a in [1i8, -1i8] {
                    let p_a = if a == 1 { q_z } else { 1.0 - q_z };
                    let mean = if a == 1 { cell.m_plus[u] } else { cell.m_minus[u] };
                    let weight = match objective {
                        Objective::Id1 => {
                            if a != action {
                                continue;
                            }
                            f64::from(z) * mean * f64::from(a) / (strength * f_z)
                        }
                        Objective::Id2 => {
                            if z != action {
                                continue;
                            }
                            mean / (strength * f_z)
                        }
                    };
                    sum += w_u * f_z * p_a * weight;
                }
            }
        }
        sum
    }

    /// The regime treating exactly the cells with a strictly positive
    /// conditional treatment effect. Ties at zero resolve to `-1`.
    pub fn oracle_regime(&self) -> Regime {
        let actions = (0..self.cells.len())
            .map(|l| {
                let cate = self.cate(l).expect("cell id in range");
                if cate > 0.0 { 1 } else { -1 }
            })
            .collect();
        Regime { actions }
    }

    /// Maximizes a weighted objective cell by cell, which equals the global
    /// argmax over all `2^K` regimes because both objectives are additive
    /// across cells. Ties resolve to `-1`.
    pub fn population_argmax(&self, objective: Objective) -> Result<Regime> {
        let strengths = self.check_instrument_strengths()?;
        let actions = (0..self.cells.len())
            .map(|l| {
                let plus = self.cell_contribution(l, strengths[l], objective, 1);
                let minus = self.cell_contribution(l, strengths[l], objective, -1);
                if plus > minus + POPULATION_TIE_TOL { 1 } else { -1 }
            })
            .collect();
        Ok(Regime { actions })
    }

    /// Computes per-cell assumption diagnostics. Sign agreement uses weak
    /// inequalities with tolerance `tol` on the per-type contrasts.
    pub fn check_assumptions(&self, tol: f64) -> Result<AssumptionReport> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::InvalidArgument {
                reason: format!("assumption tolerance must be positive, got {tol}"),
            });
        }
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(l, cell)| {
                let outcome: Vec<f64> =
                    (0..cell.latent_count()).map(|u| cell.outcome_contrast(u)).collect();
                let takeup: Vec<f64> =
                    (0..cell.latent_count()).map(|u| cell.takeup_contrast(u)).collect();
                let (cov, var) = weighted_cov_var(&cell.u_probs, &outcome, &takeup);
                CellDiagnostics {
                    cell: l,
                    weight: self.cell_probs[l],
                    instrument_strength: weighted_mean(&cell.u_probs, &takeup),
                    cate: weighted_mean(&cell.u_probs, &outcome),
                    uniform_outcome_sign: sign_uniform(&outcome, tol),
                    uniform_takeup_sign: sign_uniform(&takeup, tol),
                    contrast_covariance: cov,
                    takeup_variance: var,
                }
            })
            .collect();
        Ok(AssumptionReport { tol, cells })
    }
}

fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Returns `(Cov(x, y), Var(y))` under the given weights.
fn weighted_cov_var(weights: &[f64], x: &[f64], y: &[f64]) -> (f64, f64) {
    let mean_x = weighted_mean(weights, x);
    let mean_y = weighted_mean(weights, y);
    let mut cov = 0.0;
    let mut var = 0.0;
    for ((&w, &xi), &yi) in weights.iter().zip(x).zip(y) {
        cov += w * (xi - mean_x) * (yi - mean_y);
        var += w * (yi - mean_y) * (yi - mean_y);
    }
    (cov, var)
}

fn sign_uniform(contrasts: &[f64], tol: f64) -> bool {
    contrasts.iter().all(|&c| c >= -tol) || contrasts.iter().all(|&c| c <= tol)
}
