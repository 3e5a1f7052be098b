//! Ensemble runs and the statistics extracted from them: survival, photon
//! scattering rate, energy growth, and bootstrap error bars.

use ramanlab_core::optim::{exponential_fit, linear_fit};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{atom_rng, run_atom, AtomOutcome, MCConfig, RateBounds};
use crate::error::Result;
use crate::field::DressedField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// (atom id, photon time) pairs; empty unless events were recorded.
    pub photon_events: Vec<(u32, f64)>,
    /// Sample times t_k = k·t_max/n_bins, k = 0..=n_bins.
    pub time_grid: Vec<f64>,
    pub survival: Vec<f64>,
    /// Cumulative photons per surviving atom.
    pub cumulative_photons: Vec<f64>,
    /// Mean mechanical energy above the occupied well minimum over the
    /// survivors, J; NaN where no atom survives.
    pub mean_energy: Vec<f64>,
    /// 1/s, from an exponential fit to the survival curve.
    pub loss_rate: f64,
    pub loss_rate_err: f64,
    /// Every atom was gone by the first sample time; `loss_rate` is then the
    /// maximum-likelihood rate from the escape times and only a lower bound
    /// of what the time grid could resolve.
    pub loss_rate_lower_bound: bool,
    /// Photons per second per surviving atom.
    pub scatter_rate: f64,
    pub scatter_rate_err: f64,
    /// Rate of an exponential fit to `mean_energy`, 1/s; reported as a
    /// diagnostic only.
    pub energy_growth_rate: Option<f64>,
    pub escape_times: Vec<Option<f64>>,
    pub n_atoms: usize,
    pub n_lost: usize,
    pub total_photons: u64,
    /// Accepted positions where the local rate exceeded the thinning
    /// envelope (should be zero).
    pub rate_bound_violations: u64,
}

/// Runs `cfg.ensemble_n` independent atoms, in parallel on the current
/// rayon pool. Atom i uses stream i of the ChaCha8 generator seeded with
/// `cfg.seed`, so the result does not depend on scheduling.
pub fn run_ensemble(cfg: &MCConfig, field: &DressedField) -> Result<EnsembleResult> {
    cfg.validate(field)?;
    let bounds = RateBounds::new(field, cfg.boundary_x);
    let outcomes: Vec<AtomOutcome> = (0..cfg.ensemble_n as u64)
        .into_par_iter()
        .map(|id| run_atom(cfg, field, &bounds, &mut atom_rng(cfg.seed, id)))
        .collect();
    Ok(summarize(cfg, &outcomes))
}

/// Per-bin totals used by both the point estimates and the bootstrap.
struct Tallies {
    alive_at: Vec<f64>,
    alive_time: Vec<f64>,
    photons: Vec<f64>,
    energy_sum: Vec<f64>,
    energy_count: Vec<f64>,
}

fn tally<'a>(cfg: &MCConfig, atoms: impl Iterator<Item = &'a AtomOutcome>) -> Tallies {
    let n_bins = cfg.n_time_bins;
    let dt = cfg.t_max / n_bins as f64;
    let mut t = Tallies {
        alive_at: vec![0.0; n_bins + 1],
        alive_time: vec![0.0; n_bins],
        photons: vec![0.0; n_bins],
        energy_sum: vec![0.0; n_bins + 1],
        energy_count: vec![0.0; n_bins + 1],
    };
    for a in atoms {
        let end = a.escape_time.unwrap_or(f64::INFINITY);
        for k in 0..=n_bins {
            if end > k as f64 * dt {
                t.alive_at[k] += 1.0;
            }
            let e = a.energy_at_grid[k];
            if e.is_finite() && end > k as f64 * dt {
                t.energy_sum[k] += e;
                t.energy_count[k] += 1.0;
            }
        }
        for k in 0..n_bins {
            let lo = k as f64 * dt;
            t.alive_time[k] += (end.min(lo + dt) - lo).max(0.0);
            t.photons[k] += f64::from(a.photons_per_bin[k]);
        }
    }
    t
}

struct Estimates {
    survival: Vec<f64>,
    cumulative: Vec<f64>,
    loss_rate: f64,
    lower_bound: bool,
    scatter_rate: f64,
}

fn estimate<'a>(cfg: &MCConfig, atoms: impl Iterator<Item = &'a AtomOutcome> + Clone) -> Estimates {
    let t = tally(cfg, atoms.clone());
    let n = t.alive_at[0].max(1.0);
    let dt = cfg.t_max / cfg.n_time_bins as f64;
    let grid: Vec<f64> = (0..=cfg.n_time_bins).map(|k| k as f64 * dt).collect();
    let survival: Vec<f64> = t.alive_at.iter().map(|a| a / n).collect();

    let lower_bound = survival[1] == 0.0;
    let loss_rate = if lower_bound {
        let (lost, total): (f64, f64) = atoms
            .filter_map(|a| a.escape_time)
            .fold((0.0, 0.0), |(c, s), e| (c + 1.0, s + e));
        if total > 0.0 {
            lost / total
        } else {
            f64::INFINITY
        }
    } else if survival.iter().all(|s| *s == 1.0) {
        0.0
    } else {
        exponential_fit(&grid, &survival).map(|f| -f.rate).unwrap_or(f64::NAN)
    };

    let mut cumulative = vec![0.0; cfg.n_time_bins + 1];
    let mut last_valid = 0;
    for k in 0..cfg.n_time_bins {
        let rate = if t.alive_time[k] > 0.0 {
            last_valid = k + 1;
            t.photons[k] / t.alive_time[k]
        } else {
            0.0
        };
        cumulative[k + 1] = cumulative[k] + rate * dt;
    }
    let scatter_rate = if last_valid >= 2 {
        linear_fit(&grid[..=last_valid], &cumulative[..=last_valid])
            .map(|f| f.slope.max(0.0))
            .unwrap_or(0.0)
    } else {
        let alive: f64 = t.alive_time.iter().sum();
        let photons: f64 = t.photons.iter().sum();
        if alive > 0.0 {
            photons / alive
        } else {
            0.0
        }
    };
    Estimates {
        survival,
        cumulative,
        loss_rate,
        lower_bound,
        scatter_rate,
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let v: Vec<f64> = v.iter().cloned().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Aggregates per-atom outcomes into ensemble statistics. Error bars come
/// from a bootstrap over atoms with a generator derived from `cfg.seed`.
pub fn summarize(cfg: &MCConfig, outcomes: &[AtomOutcome]) -> EnsembleResult {
    let est = estimate(cfg, outcomes.iter());
    let t = tally(cfg, outcomes.iter());
    let dt = cfg.t_max / cfg.n_time_bins as f64;
    let time_grid: Vec<f64> = (0..=cfg.n_time_bins).map(|k| k as f64 * dt).collect();
    let mean_energy: Vec<f64> = t
        .energy_sum
        .iter()
        .zip(&t.energy_count)
        .map(|(s, c)| if *c > 0.0 { s / c } else { f64::NAN })
        .collect();

    let (tg, eg): (Vec<f64>, Vec<f64>) = time_grid
        .iter()
        .zip(&mean_energy)
        .filter(|(_, e)| e.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    let energy_growth_rate = exponential_fit(&tg, &eg).ok().map(|f| f.rate);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let n = outcomes.len();
    let mut loss_samples = Vec::with_capacity(cfg.bootstrap_resamples);
    let mut scatter_samples = Vec::with_capacity(cfg.bootstrap_resamples);
    if n > 1 {
        for _ in 0..cfg.bootstrap_resamples {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let e = estimate(cfg, idx.iter().map(|i| &outcomes[*i]));
            loss_samples.push(e.loss_rate);
            scatter_samples.push(e.scatter_rate);
        }
    }

    let photon_events = if cfg.record_events {
        outcomes
            .iter()
            .enumerate()
            .flat_map(|(i, o)| o.events.iter().map(move |t| (i as u32, *t)))
            .collect()
    } else {
        Vec::new()
    };

    EnsembleResult {
        photon_events,
        time_grid,
        survival: est.survival,
        cumulative_photons: est.cumulative,
        mean_energy,
        loss_rate: est.loss_rate,
        loss_rate_err: std_dev(&loss_samples),
        loss_rate_lower_bound: est.lower_bound,
        scatter_rate: est.scatter_rate,
        scatter_rate_err: std_dev(&scatter_samples),
        energy_growth_rate,
        escape_times: outcomes.iter().map(|o| o.escape_time).collect(),
        n_atoms: n,
        n_lost: outcomes.iter().filter(|o| o.escape_time.is_some()).count(),
        total_photons: outcomes.iter().map(|o| o.photons).sum(),
        rate_bound_violations: outcomes.iter().map(|o| o.bound_violations).sum(),
    }
}
