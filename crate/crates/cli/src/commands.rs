//! The six batch commands. Each writes its outputs into the run directory
//! and reports whether every fit it ran converged.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ramanlab_core::lightshift::{
    optimal_delta_prime, oscillation_averaged_shift, shift_exact, shift_linear, OscillatingAtom, ThreeLevelModel,
    TwoLevelModel,
};
use ramanlab_core::phys::{
    angular_to_hz, hz_to_angular, joule_to_microkelvin, microkelvin_to_joule, rabi_from_saturation, TrapOscillator,
};
use ramanlab_core::spectra::{fit_sidebands_with, thermometry, RamanSpectrum, SidebandFit};
use ramanlab_dsh::{fit_noise_amplitudes, simulate_dsh_psd, PsdSpectrum};
use ramanlab_mc::map::canonical_grid;
use ramanlab_mc::{run_cell, run_ensemble, DressedField, EnsembleResult, RateCell, RateMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::error::{io_context, CliError, Result};
use crate::manifest::code_version;

pub const LIGHTSHIFT_FILE: &str = "lightshift_scan.csv";
pub const LIGHTSHIFT_HEADER: [&str; 8] = [
    "detuning_hz",
    "s",
    "kinetic_energy_uk",
    "shift_linear_hz",
    "shift_exact_hz",
    "shift_three_level_hz",
    "shift_osc_avg_hz",
    "sideband_position_hz",
];
pub const MC_SUMMARY_FILE: &str = "mc_single.json";
pub const MC_CURVES_FILE: &str = "mc_single_curves.csv";
pub const MC_CURVES_HEADER: [&str; 4] = ["time_s", "survival", "cumulative_photons", "mean_energy_uk"];
pub const MC_EVENTS_FILE: &str = "mc_single_events.csv";
pub const MC_EVENTS_HEADER: [&str; 2] = ["atom", "time_s"];
pub const RATE_MAP_FILE: &str = "rate_map.csv";
pub const RATE_MAP_SIDECAR: &str = "rate_map.json";
pub const CHECKPOINT_DIR: &str = "cells";
pub const PROGRESS_LOG: &str = "progress.log";
pub const SPECTRUM_FIT_FILE: &str = "spectrum_fit.json";
pub const SPECTRUM_INPUT_HEADER: [&str; 3] = ["detuning_hz", "transfer_probability", "trials"];
pub const DSH_PSD_FILE: &str = "dsh_psd.csv";
pub const DSH_FIT_FILE: &str = "dsh_fit.json";

/// Linear power written as the floor of the dB column.
const PSD_DB_FLOOR: f64 = 1e-30;

pub struct RunContext {
    pub cfg: FileConfig,
    /// Base for relative input paths in the configuration.
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
    pub resume: bool,
    pub config_hash: String,
}

impl RunContext {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub converged: bool,
}

fn create_file(path: &Path) -> Result<fs::File> {
    io_context(fs::File::create(path), || format!("creating {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    io_context(fs::write(path, text), || format!("writing {}", path.display()))
}

pub fn lightshift_scan(ctx: &RunContext) -> Result<Outcome> {
    let sec = &ctx.cfg.lightshift;
    let lattice = ctx.cfg.physics.lattice()?;
    let species = ctx.cfg.physics.species()?;
    let trap = TrapOscillator::from_lattice(&lattice, species.mass)?;
    let s_values = sec.s.values("lightshift.s")?;
    let detunings = sec.detuning_hz.values("lightshift.detuning_hz")?;
    if sec.kinetic_energy_uk.is_empty() {
        return Err(CliError::Config("lightshift.kinetic_energy_uk: grid is empty".into()));
    }
    let nu_hz = angular_to_hz(trap.nu);

    let mut w = csv::Writer::from_writer(create_file(&ctx.out(LIGHTSHIFT_FILE))?);
    w.write_record(LIGHTSHIFT_HEADER)?;
    for &s in &s_values {
        let two = TwoLevelModel::new(species.gamma, s)?;
        let three = ThreeLevelModel::new(
            rabi_from_saturation(s, species.gamma)?,
            hz_to_angular(sec.raman_rabi_hz),
            species.full_linewidth(),
            sec.alpha,
        )?;
        for &det_hz in &detunings {
            let delta = hz_to_angular(det_hz);
            let linear = angular_to_hz(shift_linear(&two, delta));
            let exact = angular_to_hz(shift_exact(&two, delta));
            // the stationarity cubic uses the opposite detuning sign
            let three_level = -angular_to_hz(optimal_delta_prime(&three, delta)?);
            for &ek in &sec.kinetic_energy_uk {
                let atom = OscillatingAtom::new(microkelvin_to_joule(ek), trap, lattice)?;
                let osc = angular_to_hz(oscillation_averaged_shift(&two, delta, &atom));
                w.write_record([
                    det_hz.to_string(),
                    s.to_string(),
                    ek.to_string(),
                    linear.to_string(),
                    exact.to_string(),
                    three_level.to_string(),
                    osc.to_string(),
                    (osc + nu_hz).to_string(),
                ])?;
            }
        }
    }
    io_context(w.flush(), || format!("writing {LIGHTSHIFT_FILE}"))?;
    Ok(Outcome {
        outputs: vec![LIGHTSHIFT_FILE.into()],
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub s: f64,
    /// Free-space detuning Δ̃/2π.
    pub detuning_hz: f64,
    /// Δ̃ minus the trap-bottom resonance, /2π.
    pub detuning_from_resonance_hz: f64,
    pub seed: u64,
    pub n_atoms: usize,
    pub n_lost: usize,
    pub loss_rate_per_s: f64,
    pub loss_rate_err: f64,
    pub loss_rate_lower_bound: bool,
    pub scatter_rate_per_s: f64,
    pub scatter_rate_err: f64,
    /// Exponential growth rate of the mean energy, diagnostic only.
    pub energy_growth_rate_per_s: Option<f64>,
    pub total_photons: u64,
    pub rate_bound_violations: u64,
}

impl McSummary {
    fn new(field: &DressedField, seed: u64, r: &EnsembleResult) -> Self {
        let det = field.repumper.detuning_free_space;
        Self {
            s: field.repumper.saturation_s,
            detuning_hz: angular_to_hz(det),
            detuning_from_resonance_hz: angular_to_hz(det - field.lattice.trap_shift()),
            seed,
            n_atoms: r.n_atoms,
            n_lost: r.n_lost,
            loss_rate_per_s: r.loss_rate,
            loss_rate_err: r.loss_rate_err,
            loss_rate_lower_bound: r.loss_rate_lower_bound,
            scatter_rate_per_s: r.scatter_rate,
            scatter_rate_err: r.scatter_rate_err,
            energy_growth_rate_per_s: r.energy_growth_rate,
            total_photons: r.total_photons,
            rate_bound_violations: r.rate_bound_violations,
        }
    }
}

pub fn mc_single(ctx: &RunContext) -> Result<Outcome> {
    let sec = &ctx.cfg.mc;
    let lattice = ctx.cfg.physics.lattice()?;
    let species = ctx.cfg.physics.species()?;
    let field = DressedField::from_saturation(
        lattice,
        species,
        sec.s,
        sec.free_space_detuning(sec.detuning_hz, &lattice),
    )?;
    let cfg = sec.engine_config(&field, ctx.cfg.seed)?;
    let r = run_ensemble(&cfg, &field)?;

    write_json(&ctx.out(MC_SUMMARY_FILE), &McSummary::new(&field, cfg.seed, &r))?;
    let mut w = csv::Writer::from_writer(create_file(&ctx.out(MC_CURVES_FILE))?);
    w.write_record(MC_CURVES_HEADER)?;
    for k in 0..r.time_grid.len() {
        w.write_record([
            r.time_grid[k].to_string(),
            r.survival[k].to_string(),
            r.cumulative_photons[k].to_string(),
            joule_to_microkelvin(r.mean_energy[k]).to_string(),
        ])?;
    }
    io_context(w.flush(), || format!("writing {MC_CURVES_FILE}"))?;
    let mut outputs = vec![MC_SUMMARY_FILE.to_string(), MC_CURVES_FILE.to_string()];
    if cfg.record_events {
        let mut w = csv::Writer::from_writer(create_file(&ctx.out(MC_EVENTS_FILE))?);
        w.write_record(MC_EVENTS_HEADER)?;
        for (atom, t) in &r.photon_events {
            w.write_record([atom.to_string(), t.to_string()])?;
        }
        io_context(w.flush(), || format!("writing {MC_EVENTS_FILE}"))?;
        outputs.push(MC_EVENTS_FILE.into());
    }
    Ok(Outcome {
        outputs,
        converged: true,
    })
}

/// One finished map cell on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub cell: RateCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMapSidecar {
    pub seed: u64,
    pub s_grid: Vec<f64>,
    /// Free-space detunings Δ̃/2π, sorted.
    pub detuning_grid_hz: Vec<f64>,
    pub trap_bottom_resonance_hz: f64,
    pub atoms_per_cell: usize,
    pub t_max_s: f64,
    pub init_temperature_k: f64,
    pub config_hash: String,
    pub code_version: String,
}

pub fn checkpoint_path(out_dir: &Path, i: usize, j: usize) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(format!("cell_{i:04}_{j:04}.json"))
}

fn load_checkpoint(path: &Path, hash: &str) -> Option<RateCell> {
    let text = fs::read_to_string(path).ok()?;
    let cp: Checkpoint = serde_json::from_str(&text).ok()?;
    (cp.config_hash == hash).then_some(cp.cell)
}

pub fn mc_map(ctx: &RunContext) -> Result<Outcome> {
    let sec = &ctx.cfg.mc;
    let lattice = ctx.cfg.physics.lattice()?;
    let species = ctx.cfg.physics.species()?;
    let s_grid = canonical_grid(&sec.s_grid.values("mc.s_grid")?)?;
    let det_in: Vec<f64> = sec
        .detuning_grid_hz
        .values("mc.detuning_grid_hz")?
        .iter()
        .map(|d| sec.free_space_detuning(*d, &lattice))
        .collect();
    let det_grid = canonical_grid(&det_in)?;

    let cp_dir = ctx.out(CHECKPOINT_DIR);
    io_context(fs::create_dir_all(&cp_dir), || format!("creating {}", cp_dir.display()))?;
    let log_path = ctx.out(PROGRESS_LOG);
    let mut log = io_context(fs::OpenOptions::new().create(true).append(true).open(&log_path), || {
        format!("opening {}", log_path.display())
    })?;
    let total = s_grid.len() * det_grid.len();
    let mut cells = Vec::with_capacity(total);
    for (i, &s) in s_grid.iter().enumerate() {
        for (j, &det) in det_grid.iter().enumerate() {
            let path = checkpoint_path(&ctx.out_dir, i, j);
            let started = Instant::now();
            let resumed = ctx.resume.then(|| load_checkpoint(&path, &ctx.config_hash)).flatten();
            let (cell, note) = match resumed {
                Some(c) => (c, "resumed"),
                None => {
                    let field = DressedField::from_saturation(lattice, species, s, det)?;
                    let cfg = sec.engine_config(&field, ctx.cfg.seed)?;
                    let (cell, _) = run_cell(&cfg, lattice, species, (i, s), (j, det))?;
                    let cp = Checkpoint {
                        config_hash: ctx.config_hash.clone(),
                        cell: cell.clone(),
                    };
                    // write then rename so an interrupted run never leaves a
                    // truncated checkpoint behind
                    let tmp = path.with_extension("json.tmp");
                    write_json(&tmp, &cp)?;
                    io_context(fs::rename(&tmp, &path), || format!("renaming {}", tmp.display()))?;
                    (cell, "computed")
                }
            };
            let line = format!(
                "cell {}/{total} i={i} j={j} s={s} detuning_hz={} loss={:.4e} scatter={:.4e} {note} in {:.2} s",
                cells.len() + 1,
                angular_to_hz(det),
                cell.loss_rate,
                cell.scatter_rate,
                started.elapsed().as_secs_f64()
            );
            eprintln!("{line}");
            io_context(writeln!(log, "{line}"), || format!("writing {}", log_path.display()))?;
            cells.push(cell);
        }
    }
    let map = RateMap {
        s_grid: s_grid.clone(),
        detuning_grid: det_grid.clone(),
        cells,
    };
    map.write_csv(create_file(&ctx.out(RATE_MAP_FILE))?)?;

    let probe = DressedField::from_saturation(lattice, species, s_grid[0], det_grid[0])?;
    let engine = sec.engine_config(&probe, ctx.cfg.seed)?;
    let sidecar = RateMapSidecar {
        seed: ctx.cfg.seed,
        s_grid,
        detuning_grid_hz: det_grid.iter().map(|d| angular_to_hz(*d)).collect(),
        trap_bottom_resonance_hz: angular_to_hz(lattice.trap_shift()),
        atoms_per_cell: engine.ensemble_n,
        t_max_s: engine.t_max,
        init_temperature_k: engine.init_temperature,
        config_hash: ctx.config_hash.clone(),
        code_version: code_version(),
    };
    write_json(&ctx.out(RATE_MAP_SIDECAR), &sidecar)?;
    Ok(Outcome {
        outputs: vec![
            RATE_MAP_FILE.into(),
            RATE_MAP_SIDECAR.into(),
            PROGRESS_LOG.into(),
            CHECKPOINT_DIR.into(),
        ],
        converged: true,
    })
}

/// Reads a Raman spectrum CSV, reporting problems by file row.
pub fn read_spectrum_csv(path: &Path) -> Result<RamanSpectrum> {
    let bad = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let file = io_context(fs::File::open(path), || format!("opening {}", path.display()))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let mut cols = [0usize; 3];
    for (c, name) in cols.iter_mut().zip(SPECTRUM_INPUT_HEADER) {
        *c = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column `{name}` in header")))?;
    }
    let (mut det, mut p, mut n) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        // row 1 is the header
        let row = k + 2;
        let rec = rec.map_err(|e| bad(format!("row {row}: {e}")))?;
        let field = |c: usize, name: &str| {
            rec.get(c)
                .map(str::trim)
                .ok_or_else(|| bad(format!("row {row}: missing `{name}`")))
        };
        let parse_f = |c: usize, name: &str| -> Result<f64> {
            let v = field(c, name)?;
            v.parse::<f64>()
                .map_err(|_| bad(format!("row {row}: `{name}` is not a number: {v:?}")))
        };
        det.push(parse_f(cols[0], "detuning_hz")?);
        let prob = parse_f(cols[1], "transfer_probability")?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(bad(format!("row {row}: transfer_probability {prob} outside [0, 1]")));
        }
        p.push(prob);
        let t = field(cols[2], "trials")?;
        n.push(
            t.parse::<u32>()
                .map_err(|_| bad(format!("row {row}: `trials` is not a non-negative integer: {t:?}")))?,
        );
    }
    RamanSpectrum::new(det, p, n).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakOut {
    pub center_hz: f64,
    pub fwhm_hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermometryOut {
    pub sideband_ratio: [f64; 3],
    pub nbar: [f64; 3],
    pub ground_fraction: [f64; 3],
    /// μK; null when infinite.
    pub temperature_uk: [Option<f64>; 3],
    pub infinite_temperature: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub detuning_hz: f64,
    pub transfer_probability: f64,
    pub trials: u32,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFitReport {
    pub peaks: Vec<PeakOut>,
    pub baseline: f64,
    pub residual: f64,
    pub converged: bool,
    pub n_evaluations: usize,
    pub thermometry: ThermometryOut,
    pub ci_level: f64,
    pub data: Vec<DataPoint>,
}

pub fn spectrum_fit(ctx: &RunContext) -> Result<Outcome> {
    let sec = &ctx.cfg.spectrum;
    let input = sec
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("spectrum.input is required for spectrum-fit".into()))?;
    let spec = read_spectrum_csv(&ctx.resolve(input))?;
    let init = SidebandFit::initial_guess(&spec, sec.nu_hz, sec.fwhm_hz)?;
    let fit = fit_sidebands_with(&spec, &init, sec.width_model)?;
    let th = thermometry(&fit, sec.nu_hz.map(hz_to_angular))?;
    let ci = spec.confidence_intervals(sec.ci_level)?;
    let finite = |v: f64| v.is_finite().then_some(v);
    let report = SpectrumFitReport {
        peaks: fit
            .peaks
            .iter()
            .map(|p| PeakOut {
                center_hz: p.center,
                fwhm_hz: p.fwhm,
                amplitude: p.amplitude,
            })
            .collect(),
        baseline: fit.baseline,
        residual: fit.residual,
        converged: fit.converged,
        n_evaluations: fit.n_evaluations,
        thermometry: ThermometryOut {
            sideband_ratio: th.sideband_ratio,
            nbar: th.nbar_per_axis,
            ground_fraction: th.ground_fraction_per_axis,
            temperature_uk: th.temperature_per_axis.map(|t| finite(t * 1e6)),
            infinite_temperature: th.infinite_temperature,
        },
        ci_level: sec.ci_level,
        data: (0..spec.len())
            .map(|k| DataPoint {
                detuning_hz: spec.detuning[k],
                transfer_probability: spec.transfer_probability[k],
                trials: spec.trials_per_point[k],
                ci_low: ci[k].0,
                ci_high: ci[k].1,
            })
            .collect(),
    };
    write_json(&ctx.out(SPECTRUM_FIT_FILE), &report)?;
    Ok(Outcome {
        outputs: vec![SPECTRUM_FIT_FILE.into()],
        converged: fit.converged,
    })
}

pub fn dsh_simulate(ctx: &RunContext) -> Result<Outcome> {
    let sec = &ctx.cfg.dsh;
    let cfg = sec.dsh_config()?;
    let amps = sec.amplitudes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let psd = simulate_dsh_psd(&amps, &cfg, &mut rng)?;
    psd.write_csv(create_file(&ctx.out(DSH_PSD_FILE))?, PSD_DB_FLOOR)?;
    Ok(Outcome {
        outputs: vec![DSH_PSD_FILE.into()],
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DshFitReport {
    pub a_white: f64,
    pub a_flicker: f64,
    pub a_randomwalk: f64,
    pub lorentzian_hz: f64,
    pub gaussian_flicker_hz: f64,
    pub randomwalk_hz: f64,
    pub lorentzian_spread_hz: Option<f64>,
    pub amplitude_spread: Option<[f64; 3]>,
    pub objective: f64,
    pub n_evaluations: usize,
    pub converged: bool,
    pub inner_seed: u64,
    pub config: ramanlab_dsh::DshConfig,
}

pub fn dsh_fit(ctx: &RunContext) -> Result<Outcome> {
    let sec = &ctx.cfg.dsh;
    let input = sec
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("dsh.input is required for dsh-fit".into()))?;
    let path = ctx.resolve(input);
    let file = io_context(fs::File::open(&path), || format!("opening {}", path.display()))?;
    let target = PsdSpectrum::read_csv(file).map_err(|e| CliError::Input {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let cfg = sec.dsh_config()?;
    let est = fit_noise_amplitudes(&target, &cfg, &sec.init_amplitudes()?, ctx.cfg.seed, &sec.fit_options())?;
    let report = DshFitReport {
        a_white: est.amplitudes.a_white,
        a_flicker: est.amplitudes.a_flicker,
        a_randomwalk: est.amplitudes.a_randomwalk,
        lorentzian_hz: est.lorentzian_hz,
        gaussian_flicker_hz: est.gaussian_flicker_hz,
        randomwalk_hz: est.randomwalk_hz,
        lorentzian_spread_hz: est.lorentzian_spread_hz,
        amplitude_spread: est.amplitude_spread.map(|a| a.as_array()),
        objective: est.fit.objective_value,
        n_evaluations: est.fit.n_evaluations,
        converged: est.fit.converged,
        inner_seed: ctx.cfg.seed,
        config: cfg,
    };
    write_json(&ctx.out(DSH_FIT_FILE), &report)?;
    Ok(Outcome {
        outputs: vec![DSH_FIT_FILE.into()],
        converged: est.fit.converged,
    })
}
