//! Laser phase noise from white, flicker and random-walk frequency noise.
//!
//! Each component is a unit source scaled by its amplitude. With amplitude
//! A the one-sided frequency-noise PSD is
//!
//! * white:        S_ν(f) = A²        (Hz²/Hz)
//! * flicker:      S_ν(f) = A² · 1 Hz / f
//! * random walk:  S_ν(f) = A² · 1 Hz² / f²
//!
//! so a white amplitude A_w gives a Lorentzian linewidth δν = π·A_w².

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{DshError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseAmplitudes {
    pub a_white: f64,
    pub a_flicker: f64,
    pub a_randomwalk: f64,
}

impl NoiseAmplitudes {
    pub fn new(a_white: f64, a_flicker: f64, a_randomwalk: f64) -> Result<Self> {
        let a = Self {
            a_white,
            a_flicker,
            a_randomwalk,
        };
        if a.as_array().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(DshError::Config(format!(
                "noise amplitudes must be finite and >= 0, got {a:?}"
            )));
        }
        Ok(a)
    }

    /// White-noise amplitude giving a Lorentzian FWHM of `linewidth_hz`.
    pub fn white_for_linewidth(linewidth_hz: f64) -> Self {
        Self {
            a_white: (linewidth_hz / std::f64::consts::PI).sqrt(),
            ..Self::default()
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a_white, self.a_flicker, self.a_randomwalk]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            a_white: a[0],
            a_flicker: a[1],
            a_randomwalk: a[2],
        }
    }

    /// Lorentzian FWHM implied by the white component, π·A_w².
    pub fn lorentzian_linewidth(&self) -> f64 {
        std::f64::consts::PI * self.a_white * self.a_white
    }

    /// One-sided frequency-noise PSD of the sum at f > 0, Hz²/Hz.
    pub fn frequency_psd(&self, f: f64) -> f64 {
        self.a_white.powi(2) + self.a_flicker.powi(2) / f + self.a_randomwalk.powi(2) / (f * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    White,
    Flicker,
    RandomWalk,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::White, Component::Flicker, Component::RandomWalk];

    /// f-dependence of the unit PSD.
    fn shape(self, f: f64) -> f64 {
        match self {
            Component::White => 1.0,
            Component::Flicker => 1.0 / f,
            Component::RandomWalk => 1.0 / (f * f),
        }
    }
}

fn require_pow2(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(DshError::Config(format!(
            "sample count must be a power of two >= 2, got {n}"
        )));
    }
    Ok(())
}

/// Unit frequency-noise series (Hz) with one-sided PSD `component.shape(f)`.
/// Coloured components are shaped in the Fourier domain with the DC bin
/// zeroed.
pub fn unit_frequency_noise<R: Rng + ?Sized>(
    component: Component,
    n: usize,
    sample_rate: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    require_pow2(n)?;
    let white: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    // unit-variance white noise has one-sided PSD 2/fs
    let gain = (0.5 * sample_rate).sqrt();
    if component == Component::White {
        return Ok(white.into_iter().map(|v| v * gain).collect());
    }
    let mut buf: Vec<Complex<f64>> = white.into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    let df = sample_rate / n as f64;
    for (k, b) in buf.iter_mut().enumerate().skip(1) {
        let kk = if k <= n / 2 { k } else { n - k };
        let f = kk as f64 * df;
        *b *= gain * component.shape(f).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    Ok(buf.into_iter().map(|c| c.re * norm).collect())
}

/// Phase (rad) accumulated from a frequency series (Hz): φ_0 = 0,
/// φ_{k+1} = φ_k + 2π ν_k / fs.
pub fn integrate_phase(freq: &[f64], sample_rate: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(freq.len());
    let mut acc = 0.0;
    let scale = 2.0 * std::f64::consts::PI / sample_rate;
    for v in freq {
        out.push(acc);
        acc += v * scale;
    }
    out
}

/// The three unit phase series, in the order white, flicker, random walk.
pub fn unit_phases<R: Rng + ?Sized>(n: usize, sample_rate: f64, rng: &mut R) -> Result<[Vec<f64>; 3]> {
    let mut out: [Vec<f64>; 3] = Default::default();
    for (slot, c) in out.iter_mut().zip(Component::ALL) {
        *slot = integrate_phase(&unit_frequency_noise(c, n, sample_rate, rng)?, sample_rate);
    }
    Ok(out)
}

/// φ(t) = A_w φ_w(t) + A_f φ_f(t) + A_r φ_r(t).
pub fn gen_phase_noise<R: Rng + ?Sized>(
    amps: &NoiseAmplitudes,
    n_samples: usize,
    sample_rate: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let units = unit_phases(n_samples, sample_rate, rng)?;
    Ok(combine(&units, amps.as_array()))
}

pub fn combine(units: &[Vec<f64>; 3], a: [f64; 3]) -> Vec<f64> {
    (0..units[0].len())
        .map(|k| a[0] * units[0][k] + a[1] * units[1][k] + a[2] * units[2][k])
        .collect()
}
