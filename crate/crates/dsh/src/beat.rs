//! The delayed self-heterodyne interferometer: one arm frequency shifted by
//! an AOM, the other delayed by a fiber, beat on a photodiode.

use rand::Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{DshError, Result};
use crate::noise::{gen_phase_noise, NoiseAmplitudes};
use crate::psd::{psd_welch_complex, PsdSpectrum};

/// 4.9 km of fiber at a group index of 1.468.
pub const DEFAULT_FIBER_DELAY: f64 = 24.0e-6;
pub const DEFAULT_AOM_OFFSET: f64 = 80.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DshConfig {
    /// AOM frequency shift δ_f, Hz. The simulation works at baseband and
    /// only adds this to the frequency axis.
    pub aom_offset: f64,
    /// Fiber delay τ_d, s.
    pub fiber_delay: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Simulated record length, s; rounded up to a power-of-two sample count.
    pub duration: f64,
    /// Number of Welch segments (50% overlap) the record is split into.
    pub n_averages: usize,
    /// Half-width of the fitted region around the beat note, Hz.
    pub analysis_span: f64,
}

impl Default for DshConfig {
    fn default() -> Self {
        Self {
            aom_offset: DEFAULT_AOM_OFFSET,
            fiber_delay: DEFAULT_FIBER_DELAY,
            sample_rate: 5.0e6,
            duration: 65_536.0 / 5.0e6,
            n_averages: 127,
            analysis_span: 2.0e6,
        }
    }
}

impl DshConfig {
    pub fn n_samples(&self) -> usize {
        ((self.duration * self.sample_rate).round().max(2.0) as usize).next_power_of_two()
    }

    /// Power of two closest (in log) to the segment length that splits the
    /// record into `n_averages` half-overlapping segments, capped at the
    /// record length.
    pub fn segment_length(&self) -> usize {
        let n = self.n_samples() - self.delay_samples();
        let ideal = (2.0 * n as f64 / (self.n_averages + 1) as f64).max(2.0);
        let seg = 1usize << ideal.log2().round() as u32;
        let mut cap = 1usize;
        while cap * 2 <= n {
            cap *= 2;
        }
        seg.min(cap)
    }

    pub fn delay_samples(&self) -> usize {
        (self.fiber_delay * self.sample_rate).round() as usize
    }

    /// Difference between the requested delay and the integer-sample delay
    /// actually simulated, s.
    pub fn delay_residual(&self) -> f64 {
        self.fiber_delay - self.delay_samples() as f64 / self.sample_rate
    }

    pub fn resolution_bw(&self) -> f64 {
        self.sample_rate / self.segment_length() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DshError::Config(m));
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.fiber_delay >= 0.0 && self.fiber_delay < self.duration / 10.0) {
            return bad(format!(
                "fiber_delay must be in [0, duration/10), got {} s for a {} s record",
                self.fiber_delay, self.duration
            ));
        }
        if self.n_averages == 0 {
            return bad("n_averages must be at least 1".into());
        }
        if !(self.analysis_span > 0.0 && self.analysis_span <= 0.5 * self.sample_rate) {
            return bad(format!(
                "analysis_span must be in (0, fs/2], got {}",
                self.analysis_span
            ));
        }
        Ok(())
    }
}

/// Photodiode signal cos(2π δ_f t + φ(t) - φ(t - τ_d)), sampled from one
/// full delay onward. Needs fs > 4·δ_f.
pub fn dsh_beat_signal(phase: &[f64], cfg: &DshConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(cfg.sample_rate > 4.0 * cfg.aom_offset) {
        return Err(DshError::Config(format!(
            "a real beat at {} Hz needs sample_rate above {} Hz; use the baseband variant",
            cfg.aom_offset,
            4.0 * cfg.aom_offset
        )));
    }
    let d = cfg.delay_samples();
    if d >= phase.len() {
        return Err(DshError::Config("delay longer than the phase record".into()));
    }
    let w = 2.0 * std::f64::consts::PI * cfg.aom_offset / cfg.sample_rate;
    Ok((d..phase.len())
        .map(|k| (w * k as f64 + phase[k] - phase[k - d]).cos())
        .collect())
}

/// Complex baseband beat exp(i(φ(t) - φ(t - τ_d))), the real beat with the
/// carrier at δ_f removed.
pub fn dsh_beat_analytic(phase: &[f64], cfg: &DshConfig) -> Result<Vec<Complex<f64>>> {
    let d = cfg.delay_samples();
    if d >= phase.len() {
        return Err(DshError::Config("delay longer than the phase record".into()));
    }
    Ok((d..phase.len())
        .map(|k| {
            let (s, c) = (phase[k] - phase[k - d]).sin_cos();
            Complex::new(c, s)
        })
        .collect())
}

/// Beat-note PSD around δ_f from a phase record, using the configured
/// Welch segments with 50% overlap.
pub fn beat_psd(phase: &[f64], cfg: &DshConfig) -> Result<PsdSpectrum> {
    cfg.validate()?;
    let beat = dsh_beat_analytic(phase, cfg)?;
    let seg = cfg.segment_length();
    Ok(psd_welch_complex(&beat, cfg.sample_rate, seg, seg / 2)?.shifted(cfg.aom_offset))
}

/// Simulates a laser with the given noise and returns its DSH spectrum.
pub fn simulate_dsh_psd<R: Rng + ?Sized>(amps: &NoiseAmplitudes, cfg: &DshConfig, rng: &mut R) -> Result<PsdSpectrum> {
    cfg.validate()?;
    let phase = gen_phase_noise(amps, cfg.n_samples(), cfg.sample_rate, rng)?;
    beat_psd(&phase, cfg)
}
