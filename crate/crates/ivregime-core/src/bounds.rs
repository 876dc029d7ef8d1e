//! Sharp partial identification of counterfactual means for binary
//! outcomes.
//!
//! Within one covariate cell, a subject's latent behavior is one of 16
//! canonical response types: a compliance type (always-taker, never-taker,
//! complier, defier) crossed with an outcome type, the pair of potential
//! outcomes `(Y(+1), Y(-1))`. The instrument assumptions pin the observable
//! distribution `p(y, a | z)` to a linear image of the distribution over
//! those 16 types, so the sharp lower and upper bounds on a counterfactual
//! mean `P(Y(a) = 1)` are the optima of a linear program over the
//! response-type simplex. That program *is* the definition of the bounds
//! here; no closed-form bound formulas are hard-coded anywhere.
//!
//! Bounds are computed per cell and aggregated additively across cells,
//! which preserves sharpness because the cells partition the population.
//! The regime maximizing the aggregated lower bound ("maximin") is the
//! bound-based counterpart of the point-identified argmax.
//!
//! Observed frequencies can be infeasible under sampling noise (the
//! instrument model has testable implications). Unless strict mode is
//! requested, such cells are projected to a nearby feasible point — the
//! approximate least-squares projection onto the image of the type simplex
//! — and flagged; the projected point is exactly feasible by construction.

use alloc::vec::Vec;
use serde::Serialize;

use crate::error::Error;
use crate::model::{Regime, StructuralModel};
use crate::sampler::Dataset;
use crate::simplex::{solve_min, LpFailure, StandardForm};
use crate::Result;

const N_TYPES: usize = 16;
const N_CONSTRAINTS: usize = 7;

/// How a bound query treats infeasible observed frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundsConfig {
    /// Error out on infeasible cells instead of projecting them.
    pub strict: bool,
}

/// Observed joint frequencies `p(y, a | z)` for one cell, plus the cell's
/// population weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellObservables {
    /// Cell id.
    pub cell: usize,
    /// Cell weight `p(l)`; weights across a cell list sum to one.
    pub weight: f64,
    probs: [f64; 8],
}

fn obs_index(z: i8, a: i8, y: u8) -> usize {
    let zi = usize::from(z != 1);
    let ai = usize::from(a != 1);
    zi * 4 + ai * 2 + usize::from(y)
}

impl CellObservables {
    /// Builds observables, checking that each instrument slice is a
    /// distribution.
    pub fn new(cell: usize, weight: f64, probs: [f64; 8]) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidArgument {
                    reason: alloc::format!("observable {i} of cell {cell} is {p}"),
                });
            }
        }
        for z in [1i8, -1i8] {
            let base = if z == 1 { 0 } else { 4 };
            let slice: f64 = probs[base..base + 4].iter().sum();
            if (slice - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument {
                    reason: alloc::format!(
                        "cell {cell}: frequencies for instrument arm {z} sum to {slice}"
                    ),
                });
            }
        }
        Ok(CellObservables { cell, weight, probs })
    }

    /// Observed probability `p(y, a | z)`.
    pub fn prob(&self, z: i8, a: i8, y: u8) -> f64 {
        self.probs[obs_index(z, a, y)]
    }
}

/// Whether compliance type `c` takes treatment under instrument `z`.
fn takes_treatment(compliance: usize, z: i8) -> bool {
    match compliance {
        0 => true,     // always-taker
        1 => false,    // never-taker
        2 => z == 1,   // complier
        _ => z == -1,  // defier
    }
}

/// Potential outcome of outcome type `r` under treatment `a`.
fn potential_outcome(outcome_type: usize, a: i8) -> u8 {
    if a == 1 {
        (outcome_type >> 1 & 1) as u8
    } else {
        (outcome_type & 1) as u8
    }
}

/// Indicator that response type `t` lands in observable cell `(y, a)` when
/// the instrument is `z`.
fn maps_to(t: usize, z: i8, a: i8, y: u8) -> bool {
    let compliance = t / 4;
    let outcome_type = t % 4;
    let realized_a = if takes_treatment(compliance, z) { 1 } else { -1 };
    realized_a == a && potential_outcome(outcome_type, realized_a) == y
}

/// The linear program whose optima are the sharp bounds for one arm:
/// 16 nonnegative type masses, six independent observable-matching
/// equalities plus normalization, and an objective selecting the types
/// whose potential outcome under the queried arm is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTypeLp {
    cell: usize,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    objective: Vec<f64>,
}

/// Constraint slots kept per instrument slice; the fourth cell `(0, -1)`
/// of each slice is implied by normalization.
const KEPT_CELLS: [(u8, i8); 3] = [(1, 1), (0, 1), (1, -1)];

impl ResponseTypeLp {
    /// Builds the program bounding `P(Y(arm) = 1)` for this cell.
    pub fn for_arm(obs: &CellObservables, arm: i8) -> Self {
        let mut matrix = Vec::with_capacity(N_CONSTRAINTS * N_TYPES);
        let mut rhs = Vec::with_capacity(N_CONSTRAINTS);
        for z in [1i8, -1i8] {
            for &(y, a) in &KEPT_CELLS {
                for t in 0..N_TYPES {
                    matrix.push(if maps_to(t, z, a, y) { 1.0 } else { 0.0 });
                }
                rhs.push(obs.prob(z, a, y));
            }
        }
        matrix.extend(core::iter::repeat_n(1.0, N_TYPES));
        rhs.push(1.0);
        let objective = (0..N_TYPES)
            .map(|t| f64::from(potential_outcome(t % 4, arm)))
            .collect();
        ResponseTypeLp { cell: obs.cell, matrix, rhs, objective }
    }

    fn standard_form(&self, sense: Sense) -> StandardForm {
        let c = match sense {
            Sense::Min => self.objective.clone(),
            Sense::Max => self.objective.iter().map(|v| -v).collect(),
        };
        StandardForm {
            m: N_CONSTRAINTS,
            n: N_TYPES,
            a: self.matrix.clone(),
            b: self.rhs.clone(),
            c,
        }
    }
}

/// Optimization direction for [`solve_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// Optimal objective value of the response-type program.
pub fn solve_lp(lp: &ResponseTypeLp, sense: Sense) -> Result<f64> {
    match solve_min(&lp.standard_form(sense)) {
        Ok(solution) => Ok(match sense {
            Sense::Min => solution.value,
            Sense::Max => -solution.value,
        }),
        Err(LpFailure::Infeasible { residual }) => {
            Err(Error::Infeasible { cell: lp.cell, residual })
        }
        Err(other) => Err(Error::NumericalFailure {
            detail: alloc::format!("simplex failed on cell {}: {other:?}", lp.cell),
        }),
    }
}

/// A lower/upper bound pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lb: f64,
    pub ub: f64,
}

/// Bounds on both counterfactual means for one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellBounds {
    /// Cell id.
    pub cell: usize,
    /// Cell weight `p(l)`.
    pub weight: f64,
    /// Bounds on `P(Y(+1) = 1 | l)`.
    pub treated: Interval,
    /// Bounds on `P(Y(-1) = 1 | l)`.
    pub control: Interval,
    /// Whether the observables had to be projected to feasibility first.
    pub projected: bool,
    /// Euclidean distance moved by the projection (zero when unused).
    pub projection_distance: f64,
}

impl CellBounds {
    /// Bounds for the queried arm.
    pub fn arm(&self, action: i8) -> Interval {
        if action == 1 { self.treated } else { self.control }
    }
}

/// Per-cell bounds along with the lower-bound-maximizing regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResult {
    /// One entry per cell.
    pub cells: Vec<CellBounds>,
    /// Regime maximizing the aggregated lower value bound.
    pub maximin_regime: Regime,
    /// Value bounds of the maximin regime.
    pub maximin_bounds: Interval,
}

fn solve_cell(obs: &CellObservables) -> Result<(Interval, Interval)> {
    let mut intervals = [Interval { lb: 0.0, ub: 0.0 }; 2];
    for (slot, arm) in [1i8, -1i8].into_iter().enumerate() {
        let lp = ResponseTypeLp::for_arm(obs, arm);
        let lb = solve_lp(&lp, Sense::Min)?;
        let ub = solve_lp(&lp, Sense::Max)?;
        let lb = lb.clamp(0.0, 1.0);
        let ub = ub.clamp(lb, 1.0);
        intervals[slot] = Interval { lb, ub };
    }
    Ok((intervals[0], intervals[1]))
}

/// Sharp bounds on both counterfactual means of one cell, projecting
/// infeasible frequencies first unless strict mode forbids it.
pub fn counterfactual_bounds(obs: &CellObservables, config: BoundsConfig) -> Result<CellBounds> {
    match solve_cell(obs) {
        Ok((treated, control)) => Ok(CellBounds {
            cell: obs.cell,
            weight: obs.weight,
            treated,
            control,
            projected: false,
            projection_distance: 0.0,
        }),
        Err(Error::Infeasible { .. }) if !config.strict => {
            let (projected, distance) = project_to_feasible(obs);
            let (treated, control) = solve_cell(&projected)?;
            Ok(CellBounds {
                cell: obs.cell,
                weight: obs.weight,
                treated,
                control,
                projected: true,
                projection_distance: distance,
            })
        }
        Err(err) => Err(err),
    }
}

/// Bounds for every cell in a list.
pub fn compute_bounds(cells: &[CellObservables], config: BoundsConfig) -> Result<Vec<CellBounds>> {
    cells.iter().map(|obs| counterfactual_bounds(obs, config)).collect()
}

/// Weighted aggregation of per-cell bounds at the regime's chosen arms.
pub fn regime_value_bounds(bounds: &[CellBounds], regime: &Regime) -> Result<Interval> {
    if regime.len() != bounds.len() {
        return Err(Error::RegimeLengthMismatch { expected: bounds.len(), got: regime.len() });
    }
    let mut lb = 0.0;
    let mut ub = 0.0;
    for (l, cell) in bounds.iter().enumerate() {
        let interval = cell.arm(regime.action(l));
        lb += cell.weight * interval.lb;
        ub += cell.weight * interval.ub;
    }
    Ok(Interval { lb, ub })
}

/// The regime whose aggregated lower bound weakly dominates every other
/// regime's: per cell, pick the arm with the larger lower bound, ties to
/// `-1`.
pub fn maximin_regime(bounds: &[CellBounds]) -> Regime {
    let actions = bounds
        .iter()
        .map(|cell| if cell.treated.lb > cell.control.lb { 1 } else { -1 })
        .collect();
    Regime::new(actions).expect("actions constructed in domain")
}

/// Bounds plus the maximin regime, packaged for serialization.
pub fn bounds_result(cells: &[CellObservables], config: BoundsConfig) -> Result<BoundsResult> {
    let cells = compute_bounds(cells, config)?;
    let regime = maximin_regime(&cells);
    let maximin_bounds = regime_value_bounds(&cells, &regime)?;
    Ok(BoundsResult { cells, maximin_regime: regime, maximin_bounds })
}

/// Exact observables of every cell, by enumeration over latent types.
pub fn cell_observables_from_model(model: &StructuralModel) -> Result<Vec<CellObservables>> {
    model.validate()?;
    let mut out = Vec::with_capacity(model.cell_count());
    for (l, cell) in model.cells.iter().enumerate() {
        let mut probs = [0.0f64; 8];
        for u in 0..cell.latent_count() {
            let w = cell.u_probs[u];
            for z in [1i8, -1i8] {
                let take_up = if z == 1 { cell.q_plus[u] } else { cell.q_minus[u] };
                for a in [1i8, -1i8] {
                    let p_a = if a == 1 { take_up } else { 1.0 - take_up };
                    let mean = if a == 1 { cell.m_plus[u] } else { cell.m_minus[u] };
                    probs[obs_index(z, a, 1)] += w * p_a * mean;
                    probs[obs_index(z, a, 0)] += w * p_a * (1.0 - mean);
                }
            }
        }
        out.push(CellObservables::new(l, model.cell_probs[l], probs)?);
    }
    Ok(out)
}

/// Empirical observables of every cell. Outcomes must be exactly `0` or
/// `1`, and every cell needs rows in both instrument arms.
pub fn cell_observables_from_dataset(dataset: &Dataset) -> Result<Vec<CellObservables>> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument { reason: "dataset has no rows".into() });
    }
    let k = dataset.cell_count;
    let mut counts = alloc::vec![[0usize; 8]; k];
    let mut arm_totals = alloc::vec![[0usize; 2]; k];
    for (i, row) in dataset.rows.iter().enumerate() {
        if row.y != 0.0 && row.y != 1.0 {
            return Err(Error::NonBinaryOutcome { row: i, value: row.y });
        }
        counts[row.l][obs_index(row.z, row.a, row.y as u8)] += 1;
        arm_totals[row.l][usize::from(row.z != 1)] += 1;
    }
    let n = dataset.len() as f64;
    let mut out = Vec::with_capacity(k);
    for l in 0..k {
        let [plus_total, minus_total] = [arm_totals[l][0], arm_totals[l][1]];
        if plus_total == 0 {
            return Err(Error::MissingArm { cell: l, arm: 1 });
        }
        if minus_total == 0 {
            return Err(Error::MissingArm { cell: l, arm: -1 });
        }
        let mut probs = [0.0f64; 8];
        for idx in 0..8 {
            let total = if idx < 4 { plus_total } else { minus_total };
            probs[idx] = counts[l][idx] as f64 / total as f64;
        }
        let weight = (plus_total + minus_total) as f64 / n;
        out.push(CellObservables::new(l, weight, probs)?);
    }
    Ok(out)
}

// ── Feasibility projection ────────────────────────────────────────────

/// Full 8-row observation map from type masses to `p(y, a | z)`.
fn observation_matrix() -> [[f64; N_TYPES]; 8] {
    let mut a = [[0.0; N_TYPES]; 8];
    for z in [1i8, -1i8] {
        for arm in [1i8, -1i8] {
            for y in [0u8, 1u8] {
                let row = obs_index(z, arm, y);
                for (t, slot) in a[row].iter_mut().enumerate() {
                    if maps_to(t, z, arm, y) {
                        *slot = 1.0;
                    }
                }
            }
        }
    }
    a
}

/// Euclidean projection of `v` onto the probability simplex.
fn project_onto_simplex(v: &[f64; N_TYPES]) -> [f64; N_TYPES] {
    let mut sorted = *v;
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cum = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let candidate = (cum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    let mut out = [0.0; N_TYPES];
    for (o, &vi) in out.iter_mut().zip(v.iter()) {
        *o = (vi - threshold).max(0.0);
    }
    out
}

/// Approximate least-squares projection of infeasible frequencies onto the
/// image of the response-type simplex, via accelerated projected gradient
/// with a fixed step. The returned point is exactly the image of a simplex
/// point, so the subsequent programs are feasible by construction; only the
/// "nearest" part is approximate.
fn project_to_feasible(obs: &CellObservables) -> (CellObservables, f64) {
    let a = observation_matrix();
    let target = obs.probs;
    let apply = |pi: &[f64; N_TYPES]| -> [f64; 8] {
        let mut out = [0.0; 8];
        for (row, out_v) in a.iter().zip(out.iter_mut()) {
            *out_v = row.iter().zip(pi).map(|(c, p)| c * p).sum();
        }
        out
    };

    // Lipschitz constant of the gradient: |A|_1 * |A|_inf = 2 * 4.
    let step = 1.0 / 8.0;
    let mut x = [1.0 / N_TYPES as f64; N_TYPES];
    let mut y = x;
    let mut t = 1.0f64;
    let mut residual = {
        let image = apply(&x);
        image.iter().zip(&target).map(|(q, p)| (q - p) * (q - p)).sum::<f64>()
    };
    for _ in 0..200_000 {
        let image = apply(&y);
        let mut grad = [0.0; N_TYPES];
        for (row, (q, p)) in a.iter().zip(image.iter().zip(&target)) {
            let r = q - p;
            if r != 0.0 {
                for (g, c) in grad.iter_mut().zip(row) {
                    *g += c * r;
                }
            }
        }
        let mut candidate = [0.0; N_TYPES];
        for i in 0..N_TYPES {
            candidate[i] = y[i] - step * grad[i];
        }
        let next = project_onto_simplex(&candidate);
        let next_image = apply(&next);
        let next_residual =
            next_image.iter().zip(&target).map(|(q, p)| (q - p) * (q - p)).sum::<f64>();
        let shift = next
            .iter()
            .zip(&x)
            .map(|(nx, ox)| (nx - ox).abs())
            .fold(0.0f64, f64::max);
        if next_residual > residual {
            // Monotone restart.
            t = 1.0;
            y = x;
            continue;
        }
        let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
        let momentum = (t - 1.0) / t_next;
        for i in 0..N_TYPES {
            y[i] = next[i] + momentum * (next[i] - x[i]);
        }
        x = next;
        t = t_next;
        residual = next_residual;
        if shift < 1e-15 {
            break;
        }
    }
    let image = apply(&x);
    let distance = libm::sqrt(
        image.iter().zip(&target).map(|(q, p)| (q - p) * (q - p)).sum::<f64>(),
    );
    let projected = CellObservables { cell: obs.cell, weight: obs.weight, probs: image };
    (projected, distance)
}

// ── Exhaustive reference ──────────────────────────────────────────────

/// Brute-force cross-check for the simplex path: enumerates every basic
/// solution of the constraint system and scans the feasible ones. Exact but
/// far too slow for sweeps; nothing in the production paths calls it.
pub mod reference {
    use super::{ResponseTypeLp, N_CONSTRAINTS, N_TYPES};
    use alloc::vec::Vec;

    /// `(min, max)` of the program's objective over all feasible basic
    /// solutions, or `None` when no basis is feasible.
    pub fn enumerate_bounds(lp: &ResponseTypeLp) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        let mut combo: [usize; N_CONSTRAINTS] = core::array::from_fn(|i| i);
        loop {
            if let Some(x) = solve_basis(lp, &combo) {
                let value: f64 =
                    combo.iter().zip(&x).map(|(&col, &mass)| lp.objective[col] * mass).sum();
                best = Some(match best {
                    None => (value, value),
                    Some((lo, hi)) => (lo.min(value), hi.max(value)),
                });
            }
            if !advance(&mut combo, N_TYPES) {
                break;
            }
        }
        best
    }

    /// Solves the 7x7 system restricted to `cols`; `None` when the basis is
    /// singular or the solution leaves the nonnegative orthant.
    fn solve_basis(lp: &ResponseTypeLp, cols: &[usize; N_CONSTRAINTS]) -> Option<Vec<f64>> {
        const TOL: f64 = 1e-9;
        let n = N_CONSTRAINTS;
        let mut a = [[0.0f64; N_CONSTRAINTS + 1]; N_CONSTRAINTS];
        for (r, row) in a.iter_mut().enumerate() {
            for (c, &col) in cols.iter().enumerate() {
                row[c] = lp.matrix[r * N_TYPES + col];
            }
            row[n] = lp.rhs[r];
        }
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
            if a[pivot_row][col].abs() < TOL {
                return None;
            }
            a.swap(col, pivot_row);
            let pivot = a[col];
            for (r, row) in a.iter_mut().enumerate() {
                if r != col {
                    let factor = row[col] / pivot[col];
                    if factor != 0.0 {
                        for (slot, coef) in row[col..].iter_mut().zip(&pivot[col..]) {
                            *slot -= factor * coef;
                        }
                    }
                }
            }
        }
        let mut x = Vec::with_capacity(n);
        for (r, row) in a.iter().enumerate() {
            let v = row[n] / row[r];
            if v < -TOL {
                return None;
            }
            x.push(v.max(0.0));
        }
        Some(x)
    }

    fn advance(combo: &mut [usize; N_CONSTRAINTS], n: usize) -> bool {
        let k = combo.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if combo[i] + (k - i) < n {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
}
