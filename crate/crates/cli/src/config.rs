//! The run configuration file.
//!
//! TOML, one table per command family. Frequencies are in Hz, energies and
//! temperatures in μK·kB, lengths in nm, times in the unit named by the
//! key. Everything is converted to SI and rad/s when a section is resolved.

use std::path::{Path, PathBuf};

use ramanlab_core::phys::{hz_to_angular, microkelvin_to_joule, AtomSpecies, LatticeParams};
use ramanlab_core::spectra::WidthModel;
use ramanlab_dsh::{DshConfig, FitOptions, NoiseAmplitudes};
use ramanlab_mc::{DressedField, MCConfig, RecoilModel};
use serde::{Deserialize, Serialize};

use crate::error::{io_context, CliError, Result};

/// Unified atomic mass unit, kg.
const AMU: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub physics: PhysicsSection,
    pub lightshift: LightshiftSection,
    pub mc: McSection,
    pub spectrum: SpectrumSection,
    pub dsh: DshSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io_context(std::fs::read_to_string(path), || format!("reading {}", path.display()))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// A grid given either as an explicit list or as an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        };
        if v.is_empty() {
            return Err(CliError::Config(format!("{name}: grid is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("{name}: grid values must be finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub lattice_wavelength_nm: f64,
    pub depth_uk: f64,
    pub chi: f64,
    /// Half-linewidth γ/2π of the repumping transition.
    pub gamma_hz: f64,
    pub repump_wavelength_nm: f64,
    pub mass_amu: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            lattice_wavelength_nm: 868.0,
            depth_uk: 500.0,
            chi: -0.59,
            gamma_hz: 3.0e6,
            repump_wavelength_nm: 794.978_851,
            mass_amu: 86.909_180_527,
        }
    }
}

impl PhysicsSection {
    pub fn lattice(&self) -> Result<LatticeParams> {
        Ok(LatticeParams::new(
            0.5 * self.lattice_wavelength_nm * 1e-9,
            microkelvin_to_joule(self.depth_uk),
            self.chi,
        )?)
    }

    pub fn species(&self) -> Result<AtomSpecies> {
        Ok(AtomSpecies::new(
            self.mass_amu * AMU,
            hz_to_angular(self.gamma_hz),
            self.repump_wavelength_nm * 1e-9,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightshiftSection {
    pub s: Grid,
    /// Repumper detuning Δ/2π from the trap-bottom resonance.
    pub detuning_hz: Grid,
    pub kinetic_energy_uk: Vec<f64>,
    /// Raman Rabi frequency Ω̃/2π of the three-level model.
    pub raman_rabi_hz: f64,
    /// Repumping branching ratio α = γ2/(γ1+γ2).
    pub alpha: f64,
}

impl Default for LightshiftSection {
    fn default() -> Self {
        Self {
            s: Grid::List(vec![0.057, 0.36, 0.5]),
            detuning_hz: Grid::Range {
                start: -15.0e6,
                stop: 15.0e6,
                points: 301,
            },
            kinetic_energy_uk: vec![0.0, 50.0, 100.0, 200.0],
            raman_rabi_hz: 20.0e3,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningReference {
    /// Detunings are Δ̃, from the free-space resonance.
    FreeSpace,
    /// Detunings are offsets from the resonance of an atom at rest at the
    /// trap bottom.
    TrapBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoilSetting {
    SingleKick,
    AbsorptionEmission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub atoms: usize,
    pub t_max_ms: f64,
    pub temperature_uk: f64,
    /// Integrator step cap; defaults to 1/(50ν).
    pub dt_max_ns: Option<f64>,
    /// Loss boundary; defaults to half a lattice period.
    pub boundary_nm: Option<f64>,
    pub time_bins: usize,
    pub bootstrap: usize,
    pub recoil: RecoilSetting,
    pub record_events: bool,
    pub detuning_reference: DetuningReference,
    /// Operating point of `mc-single`.
    pub s: f64,
    pub detuning_hz: f64,
    /// Grids of `mc-map`.
    pub s_grid: Grid,
    pub detuning_grid_hz: Grid,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            atoms: 500,
            t_max_ms: 20.0,
            temperature_uk: 100.0,
            dt_max_ns: None,
            boundary_nm: None,
            time_bins: 200,
            bootstrap: 100,
            recoil: RecoilSetting::SingleKick,
            record_events: false,
            detuning_reference: DetuningReference::FreeSpace,
            s: 0.057,
            detuning_hz: 35.0e6,
            s_grid: Grid::Range {
                start: 0.0,
                stop: 0.4,
                points: 5,
            },
            detuning_grid_hz: Grid::Range {
                start: 20.0e6,
                stop: 50.0e6,
                points: 7,
            },
        }
    }
}

impl McSection {
    /// Free-space detuning Δ̃ in rad/s for a configured value in Hz.
    pub fn free_space_detuning(&self, hz: f64, lattice: &LatticeParams) -> f64 {
        match self.detuning_reference {
            DetuningReference::FreeSpace => hz_to_angular(hz),
            DetuningReference::TrapBottom => lattice.trap_shift() + hz_to_angular(hz),
        }
    }

    /// Engine settings for `field` with the run seed.
    pub fn engine_config(&self, field: &DressedField, seed: u64) -> Result<MCConfig> {
        let mut cfg = MCConfig::for_field(field);
        cfg.ensemble_n = self.atoms;
        cfg.t_max = self.t_max_ms * 1e-3;
        cfg.init_temperature = self.temperature_uk * 1e-6;
        if let Some(dt) = self.dt_max_ns {
            cfg.dt_max = dt * 1e-9;
        }
        if let Some(b) = self.boundary_nm {
            cfg.boundary_x = b * 1e-9;
        }
        cfg.n_time_bins = self.time_bins;
        cfg.bootstrap_resamples = self.bootstrap;
        cfg.record_events = self.record_events;
        cfg.recoil = match self.recoil {
            RecoilSetting::SingleKick => RecoilModel::SingleKick,
            RecoilSetting::AbsorptionEmission => RecoilModel::AbsorptionEmission,
        };
        cfg.seed = seed;
        cfg.validate(field)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// CSV with columns detuning_hz, transfer_probability, trials.
    pub input: Option<PathBuf>,
    /// Trap frequencies ν/2π per axis, used as starting sideband positions
    /// and for the temperature scale.
    pub nu_hz: [f64; 3],
    pub fwhm_hz: f64,
    /// `independent` (one width per peak) or `shared-per-axis`.
    pub width_model: WidthModel,
    pub ci_level: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            input: None,
            nu_hz: [350.0e3; 3],
            fwhm_hz: 20.0e3,
            width_model: WidthModel::Independent,
            ci_level: 0.68,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DshSection {
    pub aom_offset_hz: f64,
    pub fiber_delay_us: f64,
    pub sample_rate_hz: f64,
    pub samples: usize,
    pub averages: usize,
    pub span_hz: f64,
    /// White-noise Lorentzian linewidth for `dsh-simulate`; overrides
    /// `a_white` when set.
    pub linewidth_hz: Option<f64>,
    pub a_white: f64,
    pub a_flicker: f64,
    pub a_randomwalk: f64,
    /// Target PSD for `dsh-fit`, CSV with columns freq_hz, power_db.
    pub input: Option<PathBuf>,
    /// Starting amplitudes (white, flicker, random walk) of the fit.
    pub init: [f64; 3],
    pub uncertainty_seeds: usize,
    pub max_eval: usize,
}

impl Default for DshSection {
    fn default() -> Self {
        let d = DshConfig::default();
        let f = FitOptions::default();
        Self {
            aom_offset_hz: d.aom_offset,
            fiber_delay_us: d.fiber_delay * 1e6,
            sample_rate_hz: d.sample_rate,
            samples: d.n_samples(),
            averages: d.n_averages,
            span_hz: d.analysis_span,
            linewidth_hz: None,
            a_white: 0.0,
            a_flicker: 0.0,
            a_randomwalk: 0.0,
            input: None,
            init: [25.0, 0.0, 0.0],
            uncertainty_seeds: f.uncertainty_seeds,
            max_eval: f.max_eval,
        }
    }
}

impl DshSection {
    pub fn dsh_config(&self) -> Result<DshConfig> {
        if !self.samples.is_power_of_two() || self.samples < 2 {
            return Err(CliError::Config(format!(
                "dsh.samples must be a power of two, got {}",
                self.samples
            )));
        }
        let cfg = DshConfig {
            aom_offset: self.aom_offset_hz,
            fiber_delay: self.fiber_delay_us * 1e-6,
            sample_rate: self.sample_rate_hz,
            duration: self.samples as f64 / self.sample_rate_hz,
            n_averages: self.averages,
            analysis_span: self.span_hz,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("dsh: {e}")))?;
        Ok(cfg)
    }

    pub fn amplitudes(&self) -> Result<NoiseAmplitudes> {
        let white = match self.linewidth_hz {
            Some(lw) if !(lw >= 0.0) => {
                return Err(CliError::Config(format!("dsh.linewidth_hz must be >= 0, got {lw}")))
            }
            Some(lw) => NoiseAmplitudes::white_for_linewidth(lw).a_white,
            None => self.a_white,
        };
        NoiseAmplitudes::new(white, self.a_flicker, self.a_randomwalk)
            .map_err(|e| CliError::Config(format!("dsh: {e}")))
    }

    pub fn init_amplitudes(&self) -> Result<NoiseAmplitudes> {
        let [w, f, r] = self.init;
        NoiseAmplitudes::new(w, f, r).map_err(|e| CliError::Config(format!("dsh.init: {e}")))
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            uncertainty_seeds: self.uncertainty_seeds,
            max_eval: self.max_eval,
            ..FitOptions::default()
        }
    }
}
