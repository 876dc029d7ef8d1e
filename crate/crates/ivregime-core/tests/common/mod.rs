//! Shared fixtures and generators for the integration suites. Each test
//! target uses its own subset, so unused-item lints are off.
#![allow(dead_code)]

use ivregime_core::bounds::CellObservables;
use ivregime_core::estimator::{
    argmax_regime, fit_nuisances, sample_objective, EstimatorConfig, PluginEstimates,
};
use ivregime_core::{CellSpec, Dataset, Objective, Regime, StructuralModel};
use rand::rngs::StdRng;
use rand::Rng;

/// Two latent types, sign-homogeneous contrasts, strength 0.4.
pub fn aligned_model() -> StructuralModel {
    StructuralModel::new(
        vec![CellSpec {
            u_probs: vec![0.5, 0.5],
            m_plus: vec![0.9, 0.5],
            m_minus: vec![0.5, 0.3],
            q_plus: vec![0.9, 0.7],
            q_minus: vec![0.3, 0.5],
            pi_z: 0.5,
        }],
        vec![1.0],
    )
    .unwrap()
}

/// Same structure, but the second latent type's outcome contrast flips
/// sign, so the weighted objectives rank the arms against the oracle.
pub fn misaligned_model() -> StructuralModel {
    StructuralModel::new(
        vec![CellSpec {
            u_probs: vec![0.5, 0.5],
            m_plus: vec![0.9, 0.3],
            m_minus: vec![0.5, 0.5],
            q_plus: vec![0.6, 0.9],
            q_minus: vec![0.5, 0.2],
            pi_z: 0.5,
        }],
        vec![1.0],
    )
    .unwrap()
}

fn random_probs(rng: &mut StdRng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = probs[..len - 1].iter().sum();
    probs[len - 1] = 1.0 - head;
    probs
}

/// A pair `(low, high)` with `low <= high`, both in `[0, 1]`.
fn ordered_pair(rng: &mut StdRng) -> (f64, f64) {
    let a = rng.random_range(0.0..1.0);
    let b = rng.random_range(0.0..1.0);
    if a <= b { (a, b) } else { (b, a) }
}

/// Model with unrestricted contrast signs. `min_strength` filters cells by
/// rejection until every instrument strength clears it.
pub fn random_model(
    rng: &mut StdRng,
    max_cells: usize,
    max_types: usize,
    min_strength: f64,
) -> StructuralModel {
    let k = rng.random_range(1..=max_cells);
    let cells = (0..k)
        .map(|_| loop {
            let m = rng.random_range(1..=max_types);
            let cell = CellSpec {
                u_probs: random_probs(rng, m),
                m_plus: (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
                m_minus: (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
                q_plus: (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
                q_minus: (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
                pi_z: rng.random_range(0.15..0.85),
            };
            let strength: f64 =
                (0..m).map(|u| cell.u_probs[u] * cell.takeup_contrast(u)).sum();
            if strength.abs() >= min_strength {
                break cell;
            }
        })
        .collect();
    StructuralModel::new(cells, random_probs(rng, k)).unwrap()
}

/// Model whose outcome and take-up contrasts are sign-homogeneous within
/// every cell (each cell draws its own signs), with instrument strengths
/// at least `min_strength` in magnitude.
pub fn random_sign_homogeneous_model(
    rng: &mut StdRng,
    max_cells: usize,
    max_types: usize,
    min_strength: f64,
) -> StructuralModel {
    let k = rng.random_range(1..=max_cells);
    let cells = (0..k)
        .map(|_| loop {
            let m = rng.random_range(1..=max_types);
            let outcome_sign = rng.random_bool(0.5);
            let takeup_sign = rng.random_bool(0.5);
            let mut cell = CellSpec {
                u_probs: random_probs(rng, m),
                m_plus: Vec::with_capacity(m),
                m_minus: Vec::with_capacity(m),
                q_plus: Vec::with_capacity(m),
                q_minus: Vec::with_capacity(m),
                pi_z: rng.random_range(0.15..0.85),
            };
            for _ in 0..m {
                let (low, high) = ordered_pair(rng);
                let (plus, minus) = if outcome_sign { (high, low) } else { (low, high) };
                cell.m_plus.push(plus);
                cell.m_minus.push(minus);
                let (low, high) = ordered_pair(rng);
                let (plus, minus) = if takeup_sign { (high, low) } else { (low, high) };
                cell.q_plus.push(plus);
                cell.q_minus.push(minus);
            }
            let strength: f64 =
                (0..m).map(|u| cell.u_probs[u] * cell.takeup_contrast(u)).sum();
            if strength.abs() >= min_strength {
                break cell;
            }
        })
        .collect();
    StructuralModel::new(cells, random_probs(rng, k)).unwrap()
}

/// Compliance behavior of canonical type `t / 4` under instrument `z`,
/// written independently of the library's internal tables.
pub fn reference_realized_arm(t: usize, z: i8) -> i8 {
    match t / 4 {
        0 => 1,
        1 => -1,
        2 => z,
        _ => -z,
    }
}

/// Potential outcome of canonical type `t % 4` under arm `a`.
pub fn reference_potential_outcome(t: usize, a: i8) -> u8 {
    let r = t % 4;
    if a == 1 { (r >> 1 & 1) as u8 } else { (r & 1) as u8 }
}

/// Random exactly-feasible cell: draws a point of the response-type
/// simplex and pushes it through an independently written observation map.
pub fn random_feasible_cell(rng: &mut StdRng, cell: usize) -> CellObservables {
    let masses = random_probs(rng, 16);
    let mut probs = [0.0f64; 8];
    for (t, &mass) in masses.iter().enumerate() {
        for z in [1i8, -1i8] {
            let a = reference_realized_arm(t, z);
            let y = reference_potential_outcome(t, a);
            let zi = usize::from(z != 1);
            let ai = usize::from(a != 1);
            probs[zi * 4 + ai * 2 + usize::from(y)] += mass;
        }
    }
    CellObservables::new(cell, 1.0, probs).unwrap()
}

/// Exhaustive argmax over every regime, scanning in `Regime::enumerate`
/// order (all `-1` first) and keeping the first maximum, which reproduces
/// the tie-to-reference-arm rule.
pub fn exhaustive_sample_argmax(
    dataset: &Dataset,
    estimates: &PluginEstimates,
    objective: Objective,
) -> (Regime, f64) {
    let mut best: Option<(Regime, f64)> = None;
    for regime in Regime::enumerate(dataset.cell_count) {
        let value = sample_objective(dataset, estimates, objective, &regime).unwrap();
        match &best {
            Some((_, incumbent)) if value <= *incumbent => {}
            _ => best = Some((regime, value)),
        }
    }
    best.expect("at least one regime")
}

/// Fits with `min_arm_count = 1` and returns the cell-separable argmax.
pub fn fit_and_argmax(dataset: &Dataset, objective: Objective) -> (Regime, f64) {
    let config = EstimatorConfig { min_arm_count: 1, ..EstimatorConfig::default() };
    let estimates = fit_nuisances(dataset, &config).unwrap();
    let fit = argmax_regime(dataset, &estimates, objective).unwrap();
    (fit.regime, fit.objective_value)
}
