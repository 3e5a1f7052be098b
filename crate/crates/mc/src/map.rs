//! Loss and scattering rates over a grid of saturation parameters and
//! repumper detunings.

use std::io::Write;

use ramanlab_core::phys::{angular_to_hz, AtomSpecies, LatticeParams};
use serde::{Deserialize, Serialize};

use crate::atom::MCConfig;
use crate::ensemble::{run_ensemble, EnsembleResult};
use crate::error::{MonteCarloError, Result};
use crate::field::DressedField;

pub const RATE_MAP_HEADER: [&str; 8] = [
    "s",
    "detuning_hz",
    "loss_rate_per_s",
    "loss_rate_err",
    "scatter_rate_per_s",
    "scatter_rate_err",
    "n_atoms",
    "n_lost",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    /// Index into the sorted saturation grid.
    pub i: usize,
    /// Index into the sorted detuning grid.
    pub j: usize,
    pub s: f64,
    /// Free-space detuning Δ̃, rad/s.
    pub detuning: f64,
    pub seed: u64,
    pub loss_rate: f64,
    pub loss_rate_err: f64,
    pub loss_rate_lower_bound: bool,
    pub scatter_rate: f64,
    pub scatter_rate_err: f64,
    pub n_atoms: usize,
    pub n_lost: usize,
}

impl RateCell {
    pub fn from_result(i: usize, j: usize, s: f64, detuning: f64, seed: u64, r: &EnsembleResult) -> Self {
        Self {
            i,
            j,
            s,
            detuning,
            seed,
            loss_rate: r.loss_rate,
            loss_rate_err: r.loss_rate_err,
            loss_rate_lower_bound: r.loss_rate_lower_bound,
            scatter_rate: r.scatter_rate,
            scatter_rate_err: r.scatter_rate_err,
            n_atoms: r.n_atoms,
            n_lost: r.n_lost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMap {
    /// Sorted, de-duplicated saturation parameters.
    pub s_grid: Vec<f64>,
    /// Sorted, de-duplicated free-space detunings, rad/s.
    pub detuning_grid: Vec<f64>,
    /// Row-major over (s, detuning).
    pub cells: Vec<RateCell>,
}

impl RateMap {
    pub fn cell(&self, i: usize, j: usize) -> &RateCell {
        &self.cells[i * self.detuning_grid.len() + j]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_cells_csv(&self.cells, out)
    }
}

pub fn write_cells_csv<W: Write>(cells: &[RateCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_MAP_HEADER)?;
    for c in cells {
        w.write_record([
            c.s.to_string(),
            angular_to_hz(c.detuning).to_string(),
            c.loss_rate.to_string(),
            c.loss_rate_err.to_string(),
            c.scatter_rate.to_string(),
            c.scatter_rate_err.to_string(),
            c.n_atoms.to_string(),
            c.n_lost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of grid cell (i, j), indices taken in the sorted grids.
pub fn cell_seed(seed: u64, i: usize, j: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ i as u64) ^ (j as u64).rotate_left(32))
}

/// Sorts a grid ascending and drops exact duplicates.
pub fn canonical_grid(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(MonteCarloError::Config("grids must be non-empty".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MonteCarloError::Config("grid values must be finite".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Runs one grid cell: an ensemble at (s, Δ̃) with the cell's derived seed.
pub fn run_cell(
    cfg: &MCConfig,
    lattice: LatticeParams,
    atom: AtomSpecies,
    (i, s): (usize, f64),
    (j, detuning): (usize, f64),
) -> Result<(RateCell, EnsembleResult)> {
    let field = DressedField::from_saturation(lattice, atom, s, detuning)?;
    let seed = cell_seed(cfg.seed, i, j);
    let cell_cfg = MCConfig { seed, ..*cfg };
    let r = run_ensemble(&cell_cfg, &field)?;
    Ok((RateCell::from_result(i, j, s, detuning, seed, &r), r))
}

/// Independent ensembles over the (s, Δ̃) grid. Grids are sorted first so
/// a cell's seed, and therefore its values, do not depend on the order the
/// grid was given in.
pub fn sweep_map(
    cfg: &MCConfig,
    lattice: LatticeParams,
    atom: AtomSpecies,
    s_grid: &[f64],
    detuning_grid: &[f64],
) -> Result<RateMap> {
    let s_grid = canonical_grid(s_grid)?;
    let detuning_grid = canonical_grid(detuning_grid)?;
    let mut cells = Vec::with_capacity(s_grid.len() * detuning_grid.len());
    for (i, s) in s_grid.iter().enumerate() {
        for (j, d) in detuning_grid.iter().enumerate() {
            cells.push(run_cell(cfg, lattice, atom, (i, *s), (j, *d))?.0);
        }
    }
    Ok(RateMap {
        s_grid,
        detuning_grid,
        cells,
    })
}
