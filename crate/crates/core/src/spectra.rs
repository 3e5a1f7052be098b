//! Raman sideband spectra: seven-Lorentzian fits, binomial error bars and
//! sideband-imbalance thermometry.
//!
//! Detunings here are in Hz (two-photon detuning δ/2π). The trap
//! frequencies passed to [`thermometry`] are angular, like everywhere else
//! in the physics code.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{require, Error, Result};
use crate::optim::{multi_lorentzian_eval, FitResult, LorentzianPeak, NelderMead};
use crate::phys::constants::{HBAR, KB};

pub const N_PEAKS: usize = 7;
pub const CARRIER: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanSpectrum {
    pub detuning: Vec<f64>,
    pub transfer_probability: Vec<f64>,
    pub trials_per_point: Vec<u32>,
}

impl RamanSpectrum {
    pub fn new(detuning: Vec<f64>, transfer_probability: Vec<f64>, trials_per_point: Vec<u32>) -> Result<Self> {
        if detuning.len() != transfer_probability.len() {
            return Err(Error::LengthMismatch(detuning.len(), transfer_probability.len()));
        }
        if detuning.len() != trials_per_point.len() {
            return Err(Error::LengthMismatch(detuning.len(), trials_per_point.len()));
        }
        require(
            transfer_probability.iter().all(|p| (0.0..=1.0).contains(p)),
            "transfer_probability",
            "must lie in [0, 1]",
        )?;
        require(
            detuning.windows(2).all(|w| w[1] > w[0]),
            "detuning",
            "must be strictly increasing",
        )?;
        Ok(Self {
            detuning,
            transfer_probability,
            trials_per_point,
        })
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    /// 68% (or `level`) Wilson intervals for every point.
    pub fn confidence_intervals(&self, level: f64) -> Result<Vec<(f64, f64)>> {
        self.transfer_probability
            .iter()
            .zip(&self.trials_per_point)
            .map(|(p, n)| {
                let k = (p * f64::from(*n)).round() as u32;
                binomial_ci(k.min(*n), *n, level)
            })
            .collect()
    }
}

/// Seven Lorentzians on a constant baseline. By convention peaks 0..3 are
/// the initial cooling guesses, 3..6 the heating guesses and peak 6 the
/// carrier, but [`thermometry`] re-pairs sidebands by their centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandFit {
    pub peaks: Vec<LorentzianPeak>,
    pub baseline: f64,
    /// Sum of squared residuals against the fitted spectrum.
    pub residual: f64,
    pub converged: bool,
    pub n_evaluations: usize,
}

impl SidebandFit {
    /// Builds a starting point from trap-frequency guesses: cooling peaks at
    /// +ν_i, heating peaks at -ν_i, the carrier at 0, amplitudes read off the
    /// data above its minimum.
    pub fn initial_guess(spec: &RamanSpectrum, nu_hz: [f64; 3], fwhm_hz: f64) -> Result<Self> {
        require(!spec.is_empty(), "spectrum", "must be non-empty")?;
        require(fwhm_hz > 0.0, "fwhm_hz", "must be positive")?;
        let baseline = spec.transfer_probability.iter().cloned().fold(f64::INFINITY, f64::min);
        let at = |x: f64| -> f64 {
            let i = spec
                .detuning
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            (spec.transfer_probability[i] - baseline).max(0.0)
        };
        let mut peaks = Vec::with_capacity(N_PEAKS);
        for nu in nu_hz {
            peaks.push(LorentzianPeak::new(nu, fwhm_hz, at(nu))?);
        }
        for nu in nu_hz {
            peaks.push(LorentzianPeak::new(-nu, fwhm_hz, at(-nu))?);
        }
        peaks.push(LorentzianPeak::new(0.0, fwhm_hz, at(0.0))?);
        let mut fit = Self {
            peaks,
            baseline,
            residual: 0.0,
            converged: false,
            n_evaluations: 0,
        };
        fit.residual = sum_squared_residuals(spec, &fit.peaks, fit.baseline);
        Ok(fit)
    }

    pub fn eval(&self, x: f64) -> f64 {
        multi_lorentzian_eval(&self.peaks, self.baseline, x)
    }
}

pub fn sum_squared_residuals(spec: &RamanSpectrum, peaks: &[LorentzianPeak], baseline: f64) -> f64 {
    spec.detuning
        .iter()
        .zip(&spec.transfer_probability)
        .map(|(x, y)| {
            let r = y - multi_lorentzian_eval(peaks, baseline, *x);
            r * r
        })
        .sum()
}

/// Noiseless spectrum of a peak model, clipped to [0, 1].
pub fn model_spectrum(peaks: &[LorentzianPeak], baseline: f64, detuning: &[f64], trials: u32) -> Result<RamanSpectrum> {
    let p = detuning
        .iter()
        .map(|x| multi_lorentzian_eval(peaks, baseline, *x).clamp(0.0, 1.0))
        .collect();
    RamanSpectrum::new(detuning.to_vec(), p, vec![trials; detuning.len()])
}

/// Spectrum with binomial sampling noise: each point is the observed
/// fraction of `trials` Bernoulli draws at the model probability.
pub fn synthesize_spectrum<R: Rng + ?Sized>(
    peaks: &[LorentzianPeak],
    baseline: f64,
    detuning: &[f64],
    trials: u32,
    rng: &mut R,
) -> Result<RamanSpectrum> {
    require(trials > 0, "trials", "must be positive")?;
    let p = detuning
        .iter()
        .map(|x| {
            let p = multi_lorentzian_eval(peaks, baseline, *x).clamp(0.0, 1.0);
            let k = Binomial::new(u64::from(trials), p)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng);
            Ok(k as f64 / f64::from(trials))
        })
        .collect::<Result<Vec<_>>>()?;
    RamanSpectrum::new(detuning.to_vec(), p, vec![trials; detuning.len()])
}

/// Lawson-Hanson non-negative least squares, min ‖Ax - b‖ s.t. x ≥ 0.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm().max(1e-300);
    let atb_scale = |x: &DVector<f64>| a.transpose() * (b - a * x);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|i| passive[*i]).collect();
        let mut out = DVector::zeros(n);
        if idx.is_empty() {
            return out;
        }
        let sub = a.select_columns(&idx);
        let sol = sub
            .clone()
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        for (k, i) in idx.iter().enumerate() {
            out[*i] = sol[k];
        }
        out
    };

    for _outer in 0..(3 * n + 10) {
        let w = atb_scale(&x);
        let next = (0..n).filter(|i| !passive[*i]).max_by(|i, j| w[*i].total_cmp(&w[*j]));
        match next {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        for _inner in 0..(3 * n + 10) {
            let s = solve_passive(&passive);
            if (0..n).filter(|i| passive[*i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = 1.0f64;
            for i in (0..n).filter(|i| passive[*i]) {
                if s[i] <= 0.0 {
                    let denom = x[i] - s[i];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            x = &x + (s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

/// How sideband widths enter a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthModel {
    /// Every peak has its own FWHM: 7×3 + baseline = 22 parameters.
    #[default]
    Independent,
    /// Cooling peak k and heating peak k+3 share one FWHM (19 parameters).
    /// Both sidebands of an axis drive the same motional mode with the same
    /// beams, and sharing the width removes most of the amplitude-width
    /// trade-off on the weak cooling peaks.
    SharedPerAxis,
}

impl WidthModel {
    fn n_widths(self) -> usize {
        match self {
            WidthModel::Independent => N_PEAKS,
            WidthModel::SharedPerAxis => N_PEAKS - 3,
        }
    }

    fn width_slot(self, k: usize) -> usize {
        match self {
            WidthModel::SharedPerAxis if k >= 3 => k - 3,
            _ => k,
        }
    }
}

struct Problem<'a> {
    spec: &'a RamanSpectrum,
    min_fwhm: f64,
    widths: WidthModel,
}

impl Problem<'_> {
    /// Maps free nonlinear parameters (7 centers, then the widths) onto
    /// feasible shapes: positive widths, carrier within one linewidth of δ = 0.
    fn shapes(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        (0..N_PEAKS)
            .map(|k| {
                let fwhm = theta[N_PEAKS + self.widths.width_slot(k)].abs().max(self.min_fwhm);
                let mut center = theta[k];
                if k == CARRIER {
                    center = center.clamp(-fwhm, fwhm);
                }
                (center, fwhm)
            })
            .collect()
    }

    fn pack_shapes(&self, peaks: &[LorentzianPeak]) -> Vec<f64> {
        let mut theta: Vec<f64> = peaks.iter().map(|p| p.center).collect();
        let mut w = vec![0.0; self.widths.n_widths()];
        let mut n = vec![0usize; w.len()];
        for (k, p) in peaks.iter().enumerate() {
            w[self.widths.width_slot(k)] += p.fwhm;
            n[self.widths.width_slot(k)] += 1;
        }
        theta.extend(w.iter().zip(&n).map(|(w, n)| w / *n as f64));
        theta
    }

    fn design(&self, shapes: &[(f64, f64)]) -> DMatrix<f64> {
        let m = self.spec.len();
        DMatrix::from_fn(m, N_PEAKS + 1, |i, j| {
            if j == N_PEAKS {
                1.0
            } else {
                let (c, w) = shapes[j];
                let hw = 0.5 * w;
                let d = self.spec.detuning[i] - c;
                hw * hw / (d * d + hw * hw)
            }
        })
    }

    fn linear_solution(&self, theta: &[f64]) -> (Vec<LorentzianPeak>, f64, f64) {
        let shapes = self.shapes(theta);
        let a = self.design(&shapes);
        let b = DVector::from_column_slice(&self.spec.transfer_probability);
        let coef = nnls(&a, &b);
        let resid = (&b - &a * &coef).norm_squared();
        let peaks = shapes
            .iter()
            .enumerate()
            .map(|(k, (c, w))| LorentzianPeak {
                center: *c,
                fwhm: *w,
                amplitude: coef[k].max(0.0),
            })
            .collect();
        (peaks, coef[N_PEAKS].max(0.0), resid)
    }

    /// Full parameter vector: shape parameters, then 7 amplitudes, then the
    /// baseline.
    fn pack_full(&self, peaks: &[LorentzianPeak], baseline: f64) -> Vec<f64> {
        let mut v = self.pack_shapes(peaks);
        v.extend(peaks.iter().map(|p| p.amplitude));
        v.push(baseline);
        v
    }

    fn unpack_full(&self, v: &[f64]) -> (Vec<LorentzianPeak>, f64) {
        let n_shape = N_PEAKS + self.widths.n_widths();
        let peaks = self
            .shapes(&v[..n_shape])
            .into_iter()
            .enumerate()
            .map(|(k, (center, fwhm))| LorentzianPeak {
                center,
                fwhm,
                amplitude: v[n_shape + k].abs(),
            })
            .collect();
        (peaks, v[n_shape + N_PEAKS].abs())
    }
}

/// Least-squares fit of seven Lorentzians plus a baseline (22 parameters).
///
/// Centers and widths are searched by Nelder-Mead while amplitudes and
/// baseline are profiled out by non-negative linear least squares at every
/// step; a final Nelder-Mead pass over all parameters polishes the result.
/// The returned residual never exceeds that of `init`.
pub fn fit_sidebands(spec: &RamanSpectrum, init: &SidebandFit) -> Result<SidebandFit> {
    fit_sidebands_with(spec, init, WidthModel::Independent)
}

/// [`fit_sidebands`] with a choice of width parametrization.
pub fn fit_sidebands_with(spec: &RamanSpectrum, init: &SidebandFit, widths: WidthModel) -> Result<SidebandFit> {
    if spec.len() < 15 {
        return Err(Error::NotEnoughData {
            needed: 15,
            got: spec.len(),
        });
    }
    if init.peaks.len() != N_PEAKS {
        return Err(Error::InvalidParameter {
            name: "init.peaks",
            reason: format!("expected {N_PEAKS} peaks, got {}", init.peaks.len()),
        });
    }
    let lo = spec.detuning[0];
    let hi = spec.detuning[spec.len() - 1];
    require(
        lo < 0.0 && hi > 0.0,
        "detuning",
        "must span both sidebands (δ < 0 and δ > 0)",
    )?;
    // A line narrower than the sampling can chase single noisy points.
    let mut steps: Vec<f64> = spec.detuning.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let problem = Problem {
        spec,
        min_fwhm: 2.0 * steps[steps.len() / 2],
        widths,
    };

    let init_resid = sum_squared_residuals(spec, &init.peaks, init.baseline);

    let theta0 = problem.pack_shapes(&init.peaks);
    let mean_fwhm = init.peaks.iter().map(|p| p.fwhm).sum::<f64>() / N_PEAKS as f64;
    let scale = vec![0.3 * mean_fwhm; theta0.len()];
    let nm = NelderMead::new(1e-10, 40_000);
    let profiled = nm.minimize_with_restarts(|th| problem.linear_solution(th).2, &theta0, &scale, 6)?;
    let (peaks, baseline, _) = problem.linear_solution(&profiled.params);

    let full0 = problem.pack_full(&peaks, baseline);
    let n_shape = theta0.len();
    let full_scale: Vec<f64> = (0..full0.len())
        .map(|i| {
            if i < n_shape {
                0.05 * mean_fwhm
            } else if i < n_shape + N_PEAKS {
                0.02 * peaks[i - n_shape].amplitude.max(0.01)
            } else {
                0.01
            }
        })
        .collect();
    let full_obj = |v: &[f64]| {
        let (p, b) = problem.unpack_full(v);
        sum_squared_residuals(spec, &p, b)
    };
    let polish: FitResult = nm.minimize_with_restarts(full_obj, &full0, &full_scale, 3)?;
    let (peaks, baseline) = problem.unpack_full(&polish.params);
    let resid = sum_squared_residuals(spec, &peaks, baseline);
    let n_evaluations = profiled.n_evaluations + polish.n_evaluations;
    let converged = profiled.converged && polish.converged;

    if resid <= init_resid {
        Ok(SidebandFit {
            peaks,
            baseline,
            residual: resid,
            converged,
            n_evaluations,
        })
    } else {
        // The start was already at least as good, e.g. an exact flat line.
        Ok(SidebandFit {
            residual: init_resid,
            converged,
            n_evaluations,
            ..init.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandPair {
    pub cooling: LorentzianPeak,
    pub heating: LorentzianPeak,
}

/// Pairs each cooling sideband (center > 0) with the heating sideband
/// (center < 0) of closest |center|, requiring agreement within 10%.
pub fn pair_sidebands(fit: &SidebandFit) -> Result<Vec<SidebandPair>> {
    let carrier_like = |p: &LorentzianPeak| p.center.abs() <= p.fwhm;
    let mut sidebands: Vec<LorentzianPeak> = fit
        .peaks
        .iter()
        .enumerate()
        .filter(|(k, p)| *k != CARRIER || !carrier_like(p))
        .map(|(_, p)| *p)
        .collect();
    if sidebands.len() == N_PEAKS {
        // no peak is flagged as carrier by index; drop the most central one
        let (i, _) = sidebands
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.center.abs().total_cmp(&b.1.center.abs()))
            .expect("non-empty");
        sidebands.remove(i);
    }
    let mut cooling: Vec<LorentzianPeak> = sidebands.iter().filter(|p| p.center > 0.0).cloned().collect();
    let mut heating: Vec<LorentzianPeak> = sidebands.iter().filter(|p| p.center < 0.0).cloned().collect();
    if cooling.len() != 3 || heating.len() != 3 {
        return Err(Error::Domain(format!(
            "expected three sidebands on each side, found {} cooling and {} heating",
            cooling.len(),
            heating.len()
        )));
    }
    cooling.sort_by(|a, b| a.center.total_cmp(&b.center));
    let mut pairs = Vec::with_capacity(3);
    for c in cooling {
        let (j, h) = heating
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.center.abs() - c.center)
                    .abs()
                    .total_cmp(&(b.1.center.abs() - c.center).abs())
            })
            .map(|(j, h)| (j, *h))
            .expect("non-empty");
        if (h.center.abs() - c.center).abs() > 0.1 * c.center {
            return Err(Error::Domain(format!(
                "no heating sideband within 10% of cooling sideband at {} Hz",
                c.center
            )));
        }
        heating.remove(j);
        pairs.push(SidebandPair { cooling: c, heating: h });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermometryResult {
    /// A_cooling / A_heating per axis.
    pub sideband_ratio: [f64; 3],
    pub nbar_per_axis: [f64; 3],
    pub ground_fraction_per_axis: [f64; 3],
    /// K; infinite when the axis shows no cooling signature.
    pub temperature_per_axis: [f64; 3],
    pub infinite_temperature: [bool; 3],
}

/// Thermal-state estimates from one cooling/heating pair.
pub fn axis_thermometry(cooling_amp: f64, heating_amp: f64, nu: f64) -> (f64, f64, f64, f64, bool) {
    if !(heating_amp > 0.0) {
        return (f64::NAN, f64::INFINITY, 0.0, f64::INFINITY, true);
    }
    let r = cooling_amp.max(0.0) / heating_amp;
    if r >= 1.0 {
        return (r, f64::INFINITY, 0.0, f64::INFINITY, true);
    }
    let nbar = r / (1.0 - r);
    let p0 = 1.0 / (1.0 + nbar);
    let temperature = if nbar == 0.0 {
        0.0
    } else {
        HBAR * nu / (KB * (1.0 + 1.0 / nbar).ln())
    };
    (r, nbar, p0, temperature, false)
}

/// Sideband-imbalance thermometry. Sideband pairs are assigned to the axis
/// whose trap frequency (rad/s) is closest to the pair's mean |center|.
pub fn thermometry(fit: &SidebandFit, nu_per_axis: [f64; 3]) -> Result<ThermometryResult> {
    let mut out = ThermometryResult {
        sideband_ratio: [f64::NAN; 3],
        nbar_per_axis: [f64::INFINITY; 3],
        ground_fraction_per_axis: [0.0; 3],
        temperature_per_axis: [f64::INFINITY; 3],
        infinite_temperature: [true; 3],
    };
    // A fit without any sideband signal cannot be paired; every axis is hot.
    let signal = fit.peaks.iter().any(|p| p.amplitude > 0.0);
    let pairs = match pair_sidebands(fit) {
        Ok(p) => p,
        Err(_) if !signal => return Ok(out),
        Err(e) => return Err(e),
    };
    let mut free: Vec<usize> = vec![0, 1, 2];
    for pair in pairs {
        let f_hz = 0.5 * (pair.cooling.center + pair.heating.center.abs());
        let w = 2.0 * std::f64::consts::PI * f_hz;
        let (k, axis) = free
            .iter()
            .enumerate()
            .min_by(|a, b| (nu_per_axis[*a.1] - w).abs().total_cmp(&(nu_per_axis[*b.1] - w).abs()))
            .map(|(k, a)| (k, *a))
            .expect("three axes");
        free.remove(k);
        let (r, nbar, p0, t, flag) =
            axis_thermometry(pair.cooling.amplitude, pair.heating.amplitude, nu_per_axis[axis]);
        out.sideband_ratio[axis] = r;
        out.nbar_per_axis[axis] = nbar;
        out.ground_fraction_per_axis[axis] = p0;
        out.temperature_per_axis[axis] = t;
        out.infinite_temperature[axis] = flag;
    }
    Ok(out)
}

/// Wilson score interval for `successes` out of `trials` at the given
/// two-sided confidence `level`.
pub fn binomial_ci(successes: u32, trials: u32, level: f64) -> Result<(f64, f64)> {
    require(trials > 0, "trials", "must be positive")?;
    require(successes <= trials, "successes", "must not exceed trials")?;
    require(level > 0.0 && level < 1.0, "level", "must lie in (0, 1)")?;
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    let n = f64::from(trials);
    let p = f64::from(successes) / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((low, high))
}
