//! Welch power spectral densities and the spectral measurements used on
//! heterodyne beat notes: linewidths, ripple spacing and CSV exchange.

use std::io::{Read, Write};

use ramanlab_core::optim::{LorentzianPeak, NelderMead};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{DshError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerScale {
    Linear,
    Decibel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSpectrum {
    /// Hz, strictly increasing.
    pub freq: Vec<f64>,
    pub power: Vec<f64>,
    pub scale: PowerScale,
    /// Hz.
    pub resolution_bw: f64,
}

impl PsdSpectrum {
    pub fn new(freq: Vec<f64>, power: Vec<f64>, scale: PowerScale, resolution_bw: f64) -> Result<Self> {
        if freq.len() != power.len() {
            return Err(DshError::Spectrum(format!(
                "{} frequencies but {} power values",
                freq.len(),
                power.len()
            )));
        }
        if freq.len() < 2 {
            return Err(DshError::Spectrum("need at least two points".into()));
        }
        if !freq.windows(2).all(|w| w[1] > w[0]) {
            return Err(DshError::Spectrum("frequencies must be strictly increasing".into()));
        }
        if power.iter().any(|p| !p.is_finite()) {
            return Err(DshError::Spectrum("power values must be finite".into()));
        }
        Ok(Self {
            freq,
            power,
            scale,
            resolution_bw,
        })
    }

    pub fn linear(&self) -> Vec<f64> {
        match self.scale {
            PowerScale::Linear => self.power.clone(),
            PowerScale::Decibel => self.power.iter().map(|p| 10f64.powf(p / 10.0)).collect(),
        }
    }

    /// dB values, with linear power floored at `floor` first.
    pub fn decibels(&self, floor: f64) -> Vec<f64> {
        match self.scale {
            PowerScale::Decibel => self.power.clone(),
            PowerScale::Linear => self.power.iter().map(|p| 10.0 * p.max(floor).log10()).collect(),
        }
    }

    pub fn to_db(&self, floor: f64) -> Self {
        Self {
            power: self.decibels(floor),
            scale: PowerScale::Decibel,
            ..self.clone()
        }
    }

    pub fn shifted(&self, offset_hz: f64) -> Self {
        Self {
            freq: self.freq.iter().map(|f| f + offset_hz).collect(),
            ..self.clone()
        }
    }

    /// ∫ PSD df (linear power), trapezoid-free bin sum.
    pub fn total_power(&self) -> f64 {
        let df = (self.freq[self.freq.len() - 1] - self.freq[0]) / (self.freq.len() - 1) as f64;
        self.linear().iter().sum::<f64>() * df
    }

    /// Linear interpolation of the dB spectrum; None outside the range.
    pub fn interpolate_db(&self, f: f64, floor: f64) -> Option<f64> {
        let n = self.freq.len();
        if f < self.freq[0] || f > self.freq[n - 1] {
            return None;
        }
        let db = self.decibels(floor);
        let i = self.freq.partition_point(|x| *x <= f).clamp(1, n - 1);
        let (x0, x1) = (self.freq[i - 1], self.freq[i]);
        let t = (f - x0) / (x1 - x0);
        Some(db[i - 1] + t * (db[i] - db[i - 1]))
    }

    pub fn write_csv<W: Write>(&self, out: W, floor: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["freq_hz", "power_db"])?;
        for (f, p) in self.freq.iter().zip(self.decibels(floor)) {
            w.write_record([f.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `freq_hz,power_db` table. The resolution bandwidth is taken
    /// as the median frequency step.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| DshError::Spectrum(format!("missing column `{name}`")))
        };
        let (fi, pi) = (col("freq_hz")?, col("power_db")?);
        let mut freq = Vec::new();
        let mut power = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| DshError::Spectrum(format!("bad number: {e}")))
            };
            freq.push(parse(fi)?);
            power.push(parse(pi)?);
        }
        let mut steps: Vec<f64> = freq.windows(2).map(|w| w[1] - w[0]).collect();
        steps.sort_by(f64::total_cmp);
        let rbw = steps.get(steps.len() / 2).copied().unwrap_or(0.0);
        Self::new(freq, power, PowerScale::Decibel, rbw)
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

fn check_segments(len: usize, segment_length: usize, n_overlap: usize) -> Result<usize> {
    if segment_length < 2 || segment_length > len {
        return Err(DshError::Config(format!(
            "segment length {segment_length} must be in [2, {len}]"
        )));
    }
    if n_overlap >= segment_length {
        return Err(DshError::Config("overlap must be shorter than the segment".into()));
    }
    let step = segment_length - n_overlap;
    Ok((len - segment_length) / step + 1)
}

/// Averaged Hann-windowed periodograms of a complex series. Returns the
/// two-sided density with the frequency axis running from -fs/2 upward.
pub fn psd_welch_complex(
    signal: &[Complex<f64>],
    sample_rate: f64,
    segment_length: usize,
    n_overlap: usize,
) -> Result<PsdSpectrum> {
    let n_seg = check_segments(signal.len(), segment_length, n_overlap)?;
    let step = segment_length - n_overlap;
    let w = hann(segment_length);
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_length);
    let mut acc = vec![0.0; segment_length];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_length];
    for s in 0..n_seg {
        let seg = &signal[s * step..s * step + segment_length];
        for ((b, x), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = x * wi;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = 1.0 / (sample_rate * wss * n_seg as f64);
    let df = sample_rate / segment_length as f64;
    let half = segment_length / 2;
    let mut freq = Vec::with_capacity(segment_length);
    let mut power = Vec::with_capacity(segment_length);
    for k in 0..segment_length {
        let idx = (k + segment_length - half) % segment_length;
        freq.push((k as f64 - half as f64) * df);
        power.push(acc[idx] * norm);
    }
    PsdSpectrum::new(freq, power, PowerScale::Linear, df)
}

/// One-sided Welch density of a real series; ∫ PSD df equals the mean
/// square of the signal up to windowing effects.
pub fn psd_welch(signal: &[f64], sample_rate: f64, segment_length: usize, n_overlap: usize) -> Result<PsdSpectrum> {
    let complex: Vec<Complex<f64>> = signal.iter().map(|v| Complex::new(*v, 0.0)).collect();
    let two = psd_welch_complex(&complex, sample_rate, segment_length, n_overlap)?;
    let df = two.resolution_bw;
    let half = segment_length / 2;
    let zero = half; // index of f = 0 in the shifted axis
    let mut freq = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let pos = two.power[(zero + k) % segment_length];
        let p = if k == 0 || (k == half && segment_length.is_multiple_of(2)) {
            pos
        } else {
            // real input: the negative-frequency bin mirrors the positive one
            pos + two.power[zero - k]
        };
        freq.push(k as f64 * df);
        power.push(p);
    }
    PsdSpectrum::new(freq, power, PowerScale::Linear, df)
}

/// Least-squares Lorentzian (center, FWHM, peak) with a zero baseline fitted
/// to the bins within `window` Hz of the strongest bin.
pub fn fit_lorentzian(psd: &PsdSpectrum, window: f64) -> Result<LorentzianPeak> {
    let lin = psd.linear();
    let (imax, pmax) = lin
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i, *p))
        .expect("non-empty spectrum");
    let f0 = psd.freq[imax];
    let pts: Vec<(f64, f64)> = psd
        .freq
        .iter()
        .zip(&lin)
        .filter(|(f, _)| (**f - f0).abs() <= window)
        .map(|(f, p)| (*f, *p))
        .collect();
    if pts.len() < 4 {
        return Err(DshError::Spectrum("too few bins in the Lorentzian fit window".into()));
    }
    let fwhm0 = empirical_fwhm(psd)
        .unwrap_or(4.0 * psd.resolution_bw)
        .max(psd.resolution_bw);
    let obj = |p: &[f64]| {
        let peak = LorentzianPeak {
            center: p[0],
            fwhm: p[1].abs(),
            amplitude: p[2],
        };
        pts.iter().map(|(f, y)| (peak.eval(*f) - y).powi(2)).sum::<f64>()
    };
    let r = NelderMead::new(1e-12, 20_000).minimize_with_restarts(
        obj,
        &[f0, fwhm0, pmax],
        &[0.2 * fwhm0, 0.2 * fwhm0, 0.1 * pmax],
        4,
    )?;
    Ok(LorentzianPeak {
        center: r.params[0],
        fwhm: r.params[1].abs(),
        amplitude: r.params[2],
    })
}

/// Full width at half maximum around the strongest bin, with linear
/// interpolation of the half-power crossings.
pub fn empirical_fwhm(psd: &PsdSpectrum) -> Option<f64> {
    let lin = psd.linear();
    let (imax, pmax) = lin
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i, *p))?;
    if !(pmax > 0.0) {
        return None;
    }
    let half = 0.5 * pmax;
    let mut lo = None;
    for i in (0..imax).rev() {
        if lin[i] < half {
            let t = (half - lin[i]) / (lin[i + 1] - lin[i]);
            lo = Some(psd.freq[i] + t * (psd.freq[i + 1] - psd.freq[i]));
            break;
        }
    }
    let mut hi = None;
    for i in imax + 1..lin.len() {
        if lin[i] < half {
            let t = (lin[i - 1] - half) / (lin[i - 1] - lin[i]);
            hi = Some(psd.freq[i - 1] + t * (psd.freq[i] - psd.freq[i - 1]));
            break;
        }
    }
    Some(hi? - lo?)
}

/// Period (Hz) of the ripple pattern on the wings of a beat spectrum.
///
/// The log-PSD on each wing between `inner` and `outer` Hz from `center` is
/// multiplied by f² to remove the 1/f² envelope, detrended, and Fourier
/// transformed (a cepstrum); the strongest quefrency, refined by parabolic
/// interpolation on an 8× zero-padded grid, gives the ripple period.
pub fn ripple_spacing(psd: &PsdSpectrum, center: f64, inner: f64, outer: f64) -> Option<f64> {
    let db = psd.decibels(1e-300);
    let df = psd.resolution_bw;
    let wing = |sign: f64| -> Vec<f64> {
        let mut v: Vec<(f64, f64)> = psd
            .freq
            .iter()
            .zip(&db)
            .filter_map(|(f, p)| {
                let d = sign * (f - center);
                (d >= inner && d <= outer).then(|| (d, p + 20.0 * d.log10()))
            })
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.into_iter().map(|(_, y)| y).collect()
    };
    let mut spectrum: Option<Vec<f64>> = None;
    let mut len = 0;
    let mut m_used = 0;
    for sign in [1.0, -1.0] {
        let y = wing(sign);
        if y.len() < 16 {
            continue;
        }
        let m = y.len();
        // remove a linear trend
        let xm = (m - 1) as f64 / 2.0;
        let ym = y.iter().sum::<f64>() / m as f64;
        let sxy: f64 = y.iter().enumerate().map(|(i, v)| (i as f64 - xm) * (v - ym)).sum();
        let sxx: f64 = (0..m).map(|i| (i as f64 - xm).powi(2)).sum();
        let slope = sxy / sxx;
        let w = hann(m);
        let pad = (8 * m).next_power_of_two();
        let mut buf = vec![Complex::new(0.0, 0.0); pad];
        for i in 0..m {
            buf[i] = Complex::new((y[i] - ym - slope * (i as f64 - xm)) * w[i], 0.0);
        }
        FftPlanner::new().plan_fft_forward(pad).process(&mut buf);
        let mag: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
        match spectrum.as_mut() {
            Some(s) if s.len() == pad => s.iter_mut().zip(&mag).for_each(|(a, b)| *a += b),
            Some(_) => {}
            None => {
                spectrum = Some(mag);
                len = pad;
                m_used = m;
            }
        }
    }
    let s = spectrum?;
    // at least three ripple periods per wing and four samples per period
    let kmin = (3 * len / m_used).max(2);
    let kmax = len / 4;
    let k = (kmin..kmax).max_by(|a, b| s[*a].total_cmp(&s[*b]))?;
    let (a, b, c) = (s[k - 1], s[k], s[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let kq = k as f64 + shift;
    // quefrency in units of 1/df samples: period = len·df / kq
    Some(len as f64 * df / kq)
}
