//! Fitting noise amplitudes so that a simulated DSH spectrum matches a
//! target spectrum, and turning the amplitudes into linewidths.

use ramanlab_core::optim::{FitResult, NelderMead};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::beat::DshConfig;
use crate::error::{DshError, Result};
use crate::noise::{unit_phases, NoiseAmplitudes};
use crate::psd::{empirical_fwhm, psd_welch, psd_welch_complex, PsdSpectrum};

/// Linear power floor before taking logarithms (normalized units).
pub const LOG_FLOOR: f64 = 1e-20;

/// Simplex step floors per component, used when the initial amplitude is
/// zero or tiny.
const SCALE_FLOOR: [f64; 3] = [2.0, 20.0, 200.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Extra fits with different inner simulation seeds used to estimate
    /// the spread of the result; 0 disables them.
    pub uncertainty_seeds: usize,
    pub max_eval: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            uncertainty_seeds: 8,
            max_eval: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinewidthEstimate {
    pub amplitudes: NoiseAmplitudes,
    /// δν from the white component, Hz.
    pub lorentzian_hz: f64,
    /// FWHM of the simulated laser line with flicker noise alone, Hz.
    pub gaussian_flicker_hz: f64,
    /// FWHM of the simulated laser line with random-walk noise alone, Hz.
    pub randomwalk_hz: f64,
    /// Standard deviation of δν over refits with other inner seeds.
    pub lorentzian_spread_hz: Option<f64>,
    pub amplitude_spread: Option<NoiseAmplitudes>,
    pub fit: FitResult,
}

/// Deterministic DSH simulator: unit phase differences for one inner seed,
/// combined linearly for any set of amplitudes.
pub struct DshSimulator {
    cfg: DshConfig,
    units: [Vec<f64>; 3],
    dphi: [Vec<f64>; 3],
}

impl DshSimulator {
    pub fn new(cfg: &DshConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_samples();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = unit_phases(n, cfg.sample_rate, &mut rng)?;
        let d = cfg.delay_samples();
        let dphi = [0, 1, 2].map(|c| (d..n).map(|k| units[c][k] - units[c][k - d]).collect());
        Ok(Self { cfg: *cfg, units, dphi })
    }

    /// Two-sided beat PSD around δ_f, linear power.
    pub fn psd(&self, amps: [f64; 3]) -> Result<PsdSpectrum> {
        let beat: Vec<Complex<f64>> = (0..self.dphi[0].len())
            .map(|k| {
                let ph = amps[0] * self.dphi[0][k] + amps[1] * self.dphi[1][k] + amps[2] * self.dphi[2][k];
                let (s, c) = ph.sin_cos();
                Complex::new(c, s)
            })
            .collect();
        let seg = self.cfg.segment_length();
        Ok(psd_welch_complex(&beat, self.cfg.sample_rate, seg, seg / 2)?.shifted(self.cfg.aom_offset))
    }

    /// δν from fitting S_φ(f) = δν/(πf²) to the PSD of the white phase
    /// component alone. The discrete-time phase integration is accounted for
    /// exactly: S_φ = (δν/π)·(π/fs)²/sin²(πf/fs).
    pub fn lorentzian_linewidth(&self, a_white: f64) -> Result<f64> {
        if a_white == 0.0 {
            return Ok(0.0);
        }
        let fs = self.cfg.sample_rate;
        let phase: Vec<f64> = self.units[0].iter().map(|v| a_white * v).collect();
        let seg = self.cfg.segment_length();
        let psd = psd_welch(&phase, fs, seg, seg / 2)?;
        let lo = 20.0 * psd.resolution_bw;
        let hi = 0.25 * fs;
        let (sum, count) = psd
            .freq
            .iter()
            .zip(&psd.power)
            .filter(|(f, p)| **f >= lo && **f <= hi && **p > 0.0)
            .fold((0.0, 0usize), |(s, c), (f, p)| {
                let shape = (std::f64::consts::PI / fs).powi(2) / (std::f64::consts::PI * f / fs).sin().powi(2);
                (s + (p / shape).ln(), c + 1)
            });
        if count == 0 {
            return Err(DshError::Config("no bins available for the white-noise fit".into()));
        }
        Ok(std::f64::consts::PI * (sum / count as f64).exp())
    }

    /// FWHM of the laser line exp(iAφ_c) for one component alone.
    pub fn component_fwhm(&self, component: usize, amplitude: f64) -> Result<f64> {
        if amplitude == 0.0 {
            return Ok(0.0);
        }
        let field: Vec<Complex<f64>> = self.units[component]
            .iter()
            .map(|p| {
                let (s, c) = (amplitude * p).sin_cos();
                Complex::new(c, s)
            })
            .collect();
        let seg = (field.len() / 8).max(2);
        let psd = psd_welch_complex(&field, self.cfg.sample_rate, seg, seg / 2)?;
        Ok(empirical_fwhm(&psd).unwrap_or(0.0))
    }
}

/// Bins of the simulation grid within the analysis span of δ_f. The flag
/// marks bins that enter the objective; the central bin only enters the
/// power normalization, so the carrier-to-pedestal ratio is still seen.
fn analysis_mask(sim: &PsdSpectrum, cfg: &DshConfig) -> Vec<(usize, bool)> {
    sim.freq
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let d = (*f - cfg.aom_offset).abs();
            (d <= cfg.analysis_span).then_some((i, d > 0.5 * sim.resolution_bw))
        })
        .collect()
}

/// dB values of the flagged bins, with power normalized to unit total over
/// all bins.
fn normalized_db(lin: &[f64], mask: &[(usize, bool)]) -> Vec<f64> {
    let total: f64 = lin.iter().sum();
    let norm = if total > 0.0 { 1.0 / total } else { 1.0 };
    lin.iter()
        .zip(mask)
        .filter(|(_, m)| m.1)
        .map(|(p, _)| 10.0 * (p * norm).max(LOG_FLOOR).log10())
        .collect()
}

struct Objective<'a> {
    sim: &'a DshSimulator,
    mask: Vec<(usize, bool)>,
    target_db: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(sim: &'a DshSimulator, target: &PsdSpectrum) -> Result<Self> {
        let probe = sim.psd([0.0; 3])?;
        let mask = analysis_mask(&probe, &sim.cfg);
        let lin: Vec<f64> = mask
            .iter()
            .map(|(i, _)| {
                target
                    .interpolate_db(probe.freq[*i], 1e-300)
                    .map(|db| 10f64.powf(db / 10.0))
                    .ok_or_else(|| {
                        DshError::Spectrum(format!(
                            "target does not cover {} Hz (analysis span around the beat note)",
                            probe.freq[*i]
                        ))
                    })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            sim,
            target_db: normalized_db(&lin, &mask),
            mask,
        })
    }

    fn value(&self, a: &[f64]) -> f64 {
        let amps = [a[0].abs(), a[1].abs(), a[2].abs()];
        let Ok(psd) = self.sim.psd(amps) else {
            return f64::INFINITY;
        };
        let lin: Vec<f64> = self.mask.iter().map(|(i, _)| psd.power[*i]).collect();
        let db = normalized_db(&lin, &self.mask);
        db.iter()
            .zip(&self.target_db)
            .map(|(s, t)| (s - t).powi(2))
            .sum::<f64>()
            / db.len() as f64
    }
}

fn fit_once(
    sim: &DshSimulator,
    target: &PsdSpectrum,
    x0: [f64; 3],
    scale: [f64; 3],
    opts: &FitOptions,
) -> Result<FitResult> {
    let obj = Objective::new(sim, target)?;
    let mut r = NelderMead::new(opts.tol, opts.max_eval).minimize_with_restarts(|a| obj.value(a), &x0, &scale, 2)?;
    r.params.iter_mut().for_each(|p| *p = p.abs());
    Ok(r)
}

/// Nelder-Mead fit of (A_w, A_f, A_r) to a target beat spectrum.
///
/// The objective is the mean squared difference of the normalized log-PSDs
/// over the analysis span, with the simulation driven by a fixed inner seed.
/// Running out of evaluations is not an error: the best point is returned
/// with `fit.converged = false`.
pub fn fit_noise_amplitudes(
    target: &PsdSpectrum,
    cfg: &DshConfig,
    init: &NoiseAmplitudes,
    seed: u64,
    opts: &FitOptions,
) -> Result<LinewidthEstimate> {
    let sim = DshSimulator::new(cfg, seed)?;
    let x0 = init.as_array();
    let scale = [0, 1, 2].map(|i| (0.3 * x0[i]).max(SCALE_FLOOR[i]));
    let fit = fit_once(&sim, target, x0, scale, opts)?;
    let amps = NoiseAmplitudes::from_array([fit.params[0], fit.params[1], fit.params[2]]);

    let lorentzian_hz = sim.lorentzian_linewidth(amps.a_white)?;
    let gaussian_flicker_hz = sim.component_fwhm(1, amps.a_flicker)?;
    let randomwalk_hz = sim.component_fwhm(2, amps.a_randomwalk)?;

    let (lorentzian_spread_hz, amplitude_spread) = if opts.uncertainty_seeds > 0 {
        let mut widths = Vec::new();
        let mut amp_sets = Vec::new();
        for k in 1..=opts.uncertainty_seeds as u64 {
            let s = DshSimulator::new(cfg, seed.wrapping_add(k))?;
            let r = fit_once(&s, target, amps.as_array(), scale, opts)?;
            widths.push(s.lorentzian_linewidth(r.params[0])?);
            amp_sets.push([r.params[0], r.params[1], r.params[2]]);
        }
        let spread = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let d = (v.len().max(2) - 1) as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d).sqrt()
        };
        let per = [0, 1, 2].map(|c| spread(&amp_sets.iter().map(|a| a[c]).collect::<Vec<_>>()));
        (Some(spread(&widths)), Some(NoiseAmplitudes::from_array(per)))
    } else {
        (None, None)
    };

    Ok(LinewidthEstimate {
        amplitudes: amps,
        lorentzian_hz,
        gaussian_flicker_hz,
        randomwalk_hz,
        lorentzian_spread_hz,
        amplitude_spread,
        fit,
    })
}
