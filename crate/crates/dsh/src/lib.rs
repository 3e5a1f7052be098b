//! Delayed self-heterodyne (DSH) linewidth analysis.
//!
//! A laser's phase noise is built from white, flicker and random-walk
//! frequency noise, pushed through a simulated DSH interferometer, and the
//! resulting beat spectrum is compared with a target. Fitting the three
//! noise amplitudes yields the Lorentzian linewidth and the widths of the
//! other noise contributions.

pub mod beat;
pub mod error;
pub mod fit;
pub mod noise;
pub mod psd;

pub use beat::{beat_psd, dsh_beat_analytic, dsh_beat_signal, simulate_dsh_psd, DshConfig};
pub use error::{DshError, Result};
pub use fit::{fit_noise_amplitudes, DshSimulator, FitOptions, LinewidthEstimate};
pub use noise::{gen_phase_noise, NoiseAmplitudes};
pub use psd::{empirical_fwhm, fit_lorentzian, psd_welch, psd_welch_complex, ripple_spacing, PowerScale, PsdSpectrum};
