//! Seeded generation of observed datasets from a structural model.
//!
//! Sampling is counter-based rather than stream-based: every row draws its
//! randomness from a dedicated generator seeded by a fixed 64-bit mixing
//! function of `(seed, row index)`, and replication harnesses derive their
//! per-replication seeds through the same function. Identical inputs
//! therefore produce identical datasets on every platform and under any
//! scheduling of work.

use alloc::format;
use alloc::vec::Vec;

use crate::error::Error;
use crate::model::StructuralModel;
use crate::Result;

/// One observed record. Instruments and treatments take values in
/// `{-1, +1}`; outcomes generated by [`sample`] are `0.0` or `1.0`, but any
/// finite outcome is a valid record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedRow {
    /// Covariate cell id.
    pub l: usize,
    /// Instrument arm.
    pub z: i8,
    /// Treatment arm.
    pub a: i8,
    /// Outcome.
    pub y: f64,
}

/// A collection of observed records over `cell_count` covariate cells.
///
/// This is the only input estimators ever see; nothing in it identifies the
/// latent types that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Observed records.
    pub rows: Vec<ObservedRow>,
    /// Number of covariate cells `K`; every row satisfies `l < K`.
    pub cell_count: usize,
}

impl Dataset {
    /// Builds a dataset, checking every row against the record domain.
    pub fn new(rows: Vec<ObservedRow>, cell_count: usize) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.l >= cell_count {
                return Err(Error::InvalidRecord {
                    row: i,
                    reason: format!("cell id {} outside 0..{cell_count}", row.l),
                });
            }
            if row.z != 1 && row.z != -1 {
                return Err(Error::InvalidRecord {
                    row: i,
                    reason: format!("instrument {} is not in {{-1, +1}}", row.z),
                });
            }
            if row.a != 1 && row.a != -1 {
                return Err(Error::InvalidRecord {
                    row: i,
                    reason: format!("treatment {} is not in {{-1, +1}}", row.a),
                });
            }
            if !row.y.is_finite() {
                return Err(Error::InvalidRecord {
                    row: i,
                    reason: format!("outcome {} is not finite", row.y),
                });
            }
        }
        Ok(Dataset { rows, cell_count })
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// True when the dataset holds no records.
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; bijective on `u64`.
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

/// Derives the seed for stream `index` under `seed`.
///
/// This is the fixed mixing function behind all reproducibility contracts:
/// replication `r` of an experiment samples with `child_seed(master, r)`,
/// and row `i` of a dataset draws from a generator seeded with
/// `child_seed(dataset_seed, i)`. For a fixed `seed` the map is injective
/// in `index`, so streams are never reused.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// SplitMix64 sequence over unit-interval doubles.
struct UnitStream {
    state: u64,
}

impl UnitStream {
    fn new(seed: u64) -> Self {
        UnitStream { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// Smallest index whose cumulative probability exceeds `unit`; falls back
/// to the last index so float residue in the total never escapes the range.
fn draw_categorical(probs: &[f64], unit: f64) -> usize {
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if unit < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Draws `n` independent records from the model.
///
/// Per row, in this fixed order: the cell from `cell_probs`, the latent
/// type from `u_probs`, the instrument from `pi_z` (independently of the
/// latent type), the treatment from the take-up probability of the realized
/// instrument arm, and a Bernoulli outcome from the mean of the realized
/// treatment arm. Identical `(model, n, seed)` yield identical datasets.
pub fn sample(model: &StructuralModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    model.validate()?;
    let rows = (0..n)
        .map(|i| {
            let mut stream = UnitStream::new(child_seed(seed, i as u64));
            let l = draw_categorical(&model.cell_probs, stream.next_unit());
            let cell = &model.cells[l];
            let u = draw_categorical(&cell.u_probs, stream.next_unit());
            let z = if stream.next_unit() < cell.pi_z { 1 } else { -1 };
            let take_up = if z == 1 { cell.q_plus[u] } else { cell.q_minus[u] };
            let a = if stream.next_unit() < take_up { 1 } else { -1 };
            let mean = if a == 1 { cell.m_plus[u] } else { cell.m_minus[u] };
            let y = if stream.next_unit() < mean { 1.0 } else { 0.0 };
            ObservedRow { l, z, a, y }
        })
        .collect();
    Ok(Dataset { rows, cell_count: model.cell_count() })
}
