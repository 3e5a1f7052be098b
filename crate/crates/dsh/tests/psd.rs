use ramanlab_dsh::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FS: f64 = 1.0e6;

fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sigma).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

#[test]
fn parseval_for_white_noise() {
    let sigma = 1.7;
    let x = white(1 << 18, sigma, 1);
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let psd = psd_welch(&x, FS, 2048, 1024).unwrap();
    let total = psd.total_power();
    assert!(((total - var) / var).abs() < 0.01, "{total} vs sample variance {var}");
    assert!(((total - sigma * sigma) / (sigma * sigma)).abs() < 0.02);
    // flat at 2σ²/fs
    let level = 2.0 * sigma * sigma / FS;
    let mid: Vec<f64> = psd.power[10..1000].to_vec();
    let mean = mid.iter().sum::<f64>() / mid.len() as f64;
    assert!(((mean - level) / level).abs() < 0.02);
}

#[test]
fn tone_power_is_recovered() {
    let seg = 1024;
    let f0 = 100.0 * FS / seg as f64;
    let x: Vec<f64> = (0..64 * seg)
        .map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 / FS).cos())
        .collect();
    let psd = psd_welch(&x, FS, seg, seg / 2).unwrap();
    let (imax, _) = psd.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert!((psd.freq[imax] - f0).abs() < 0.5 * psd.resolution_bw);
    // Hann main lobe spans ±2 bins; the tone carries A²/2
    let lobe: f64 = psd.power[imax - 2..=imax + 2].iter().sum::<f64>() * psd.resolution_bw;
    assert!((lobe - 0.5).abs() < 0.005, "{lobe}");
    // peak density for a bin-centred tone: (A²/2)·(Σw)²/(fs·Σw²) = (A²/2)/(1.5·df)
    let peak = psd.power[imax] * psd.resolution_bw;
    assert!((peak - 0.5 / 1.5).abs() < 1e-3, "{peak}");
}

#[test]
fn doubling_averages_halves_estimator_variance() {
    let seg = 1024;
    let rel_var = |k: usize, seed: u64| {
        let x = white(k * seg, 1.0, seed);
        let psd = psd_welch(&x, FS, seg, 0).unwrap();
        let v = &psd.power[5..500];
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|p| (p / m - 1.0).powi(2)).sum::<f64>() / v.len() as f64
    };
    let mut ratios = Vec::new();
    for seed in 0..8 {
        ratios.push(rel_var(32, 10 + seed) / rel_var(64, 20 + seed));
    }
    let r = ratios.iter().sum::<f64>() / ratios.len() as f64;
    // χ² with 2K degrees of freedom: relative variance 1/K
    assert!((r - 2.0).abs() < 0.25, "ratio {r}");
    let v32 = (0..4).map(|s| rel_var(32, 30 + s)).sum::<f64>() / 4.0;
    assert!((v32 * 32.0 - 1.0).abs() < 0.15, "{}", v32 * 32.0);
}

#[test]
fn complex_welch_is_two_sided() {
    let seg = 256;
    let f0 = -20.0 * FS / seg as f64;
    let z: Vec<rustfft::num_complex::Complex<f64>> = (0..32 * seg)
        .map(|k| {
            let (s, c) = (2.0 * std::f64::consts::PI * f0 * k as f64 / FS).sin_cos();
            rustfft::num_complex::Complex::new(c, s)
        })
        .collect();
    let psd = psd_welch_complex(&z, FS, seg, seg / 2).unwrap();
    assert_eq!(psd.freq.len(), seg);
    assert!((psd.freq[0] + FS / 2.0).abs() < 1e-9);
    let imax = (0..seg).max_by(|a, b| psd.power[*a].total_cmp(&psd.power[*b])).unwrap();
    assert!((psd.freq[imax] - f0).abs() < 1e-6);
    assert!((psd.total_power() - 1.0).abs() < 1e-9);
}

#[test]
fn invalid_segments_are_rejected() {
    let x = vec![0.0; 100];
    assert!(psd_welch(&x, FS, 128, 0).is_err());
    assert!(psd_welch(&x, FS, 64, 64).is_err());
    assert!(PsdSpectrum::new(vec![1.0, 0.0], vec![1.0, 1.0], PowerScale::Linear, 1.0).is_err());
    assert!(PsdSpectrum::new(vec![0.0, 1.0], vec![1.0, f64::NAN], PowerScale::Linear, 1.0).is_err());
}

#[test]
fn lorentzian_fit_and_fwhm_on_an_exact_line() {
    let df = 10.0;
    let peak = ramanlab_core::optim::LorentzianPeak {
        center: 5000.0,
        fwhm: 400.0,
        amplitude: 2.0,
    };
    let freq: Vec<f64> = (0..1000).map(|k| k as f64 * df).collect();
    let power: Vec<f64> = freq.iter().map(|f| peak.eval(*f)).collect();
    let psd = PsdSpectrum::new(freq, power, PowerScale::Linear, df).unwrap();
    let fit = fit_lorentzian(&psd, 2000.0).unwrap();
    assert!((fit.fwhm - 400.0).abs() < 1e-3 * 400.0);
    assert!((fit.center - 5000.0).abs() < 1e-2);
    let w = empirical_fwhm(&psd).unwrap();
    assert!((w - 400.0).abs() < 2.0, "{w}");
}

#[test]
fn ripple_spacing_of_a_synthetic_pattern() {
    let df = 1000.0;
    let period = 41_666.7;
    let freq: Vec<f64> = (-2000..=2000).map(|k| k as f64 * df).collect();
    let power: Vec<f64> = freq
        .iter()
        .map(|f| {
            let f = f.abs().max(df);
            (1.2 - (2.0 * std::f64::consts::PI * f / period).cos()) / (f * f)
        })
        .collect();
    let psd = PsdSpectrum::new(freq, power, PowerScale::Linear, df).unwrap();
    let got = ripple_spacing(&psd, 0.0, 20e3, 1.9e6).unwrap();
    assert!(((got - period) / period).abs() < 0.01, "{got}");
}

#[test]
fn csv_round_trip() {
    let psd = PsdSpectrum::new(vec![-1.0, 0.5, 2.0], vec![1e-3, 2.0, 1e-9], PowerScale::Linear, 1.5).unwrap();
    let mut buf = Vec::new();
    psd.write_csv(&mut buf, 1e-30).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("freq_hz,power_db\n"));
    let back = PsdSpectrum::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.scale, PowerScale::Decibel);
    assert_eq!(back.freq, psd.freq);
    for (a, b) in back.linear().iter().zip(psd.power.iter()) {
        assert!(((a - b) / b).abs() < 1e-12);
    }
    assert!(PsdSpectrum::read_csv("f,p\n1,2\n".as_bytes()).is_err());
}
