use ramanlab_dsh::noise::{unit_frequency_noise, Component};
use ramanlab_dsh::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FS: f64 = 1.0e6;

/// Mean PSD in log-spaced bands between f_lo and f_hi, with the band
/// centre (geometric mean of the edges).
fn band_means(psd: &PsdSpectrum, f_lo: f64, f_hi: f64, bands: usize) -> Vec<(f64, f64)> {
    let r = (f_hi / f_lo).powf(1.0 / bands as f64);
    (0..bands)
        .map(|b| {
            let (lo, hi) = (f_lo * r.powi(b as i32), f_lo * r.powi(b as i32 + 1));
            let v: Vec<f64> = psd
                .freq
                .iter()
                .zip(&psd.power)
                .filter(|(f, _)| **f >= lo && **f < hi)
                .map(|(_, p)| *p)
                .collect();
            assert!(!v.is_empty());
            ((lo * hi).sqrt(), v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[test]
fn zero_amplitudes_give_zero_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phase = gen_phase_noise(&NoiseAmplitudes::default(), 1024, FS, &mut rng).unwrap();
    assert!(phase.iter().all(|p| *p == 0.0));
}

#[test]
fn non_power_of_two_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(gen_phase_noise(&NoiseAmplitudes::default(), 1000, FS, &mut rng).is_err());
    assert!(NoiseAmplitudes::new(-1.0, 0.0, 0.0).is_err());
}

#[test]
fn white_frequency_noise_is_flat_over_two_decades() {
    let seg = 4096;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let nu = unit_frequency_noise(Component::White, 64 * seg, FS, &mut rng).unwrap();
    let psd = psd_welch(&nu, FS, seg, 0).unwrap();
    for (f, p) in band_means(&psd, FS / 400.0, FS / 4.0, 10) {
        assert!(db(p).abs() < 1.0, "{f} Hz: {} dB", db(p));
    }
}

#[test]
fn coloured_frequency_noise_has_the_right_slopes() {
    let seg = 4096;
    for (c, k) in [(Component::Flicker, 1), (Component::RandomWalk, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nu = unit_frequency_noise(c, 64 * seg, FS, &mut rng).unwrap();
        let psd = psd_welch(&nu, FS, seg, 0).unwrap();
        for (f, p) in band_means(&psd, FS / 400.0, FS / 4.0, 10) {
            // unit PSD is f^-k with f in Hz
            let err = db(p * f.powi(k));
            assert!(err.abs() < 1.0, "{c:?} at {f} Hz: {err} dB");
        }
    }
}

#[test]
fn white_fm_gives_phase_psd_falling_as_f_squared() {
    let seg = 4096;
    let a = 30.0;
    let amps = NoiseAmplitudes::new(a, 0.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let phase = gen_phase_noise(&amps, 64 * seg, FS, &mut rng).unwrap();
    let psd = psd_welch(&phase, FS, seg, 0).unwrap();
    for (f, p) in band_means(&psd, FS / 400.0, FS / 40.0, 8) {
        let expect = a * a / (f * f);
        assert!(db(p / expect).abs() < 1.0, "{f} Hz: {} dB", db(p / expect));
    }
}

#[test]
fn amplitudes_scale_the_phase_linearly() {
    let amps = NoiseAmplitudes::new(2.0, 30.0, 400.0).unwrap();
    let a = gen_phase_noise(&amps, 4096, FS, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let units = noise::unit_phases(4096, FS, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = noise::combine(&units, amps.as_array());
    assert_eq!(a, b);
    assert!((amps.lorentzian_linewidth() - std::f64::consts::PI * 4.0).abs() < 1e-12);
    let back = NoiseAmplitudes::white_for_linewidth(amps.lorentzian_linewidth());
    assert!((back.a_white - 2.0).abs() < 1e-12);
}

#[test]
fn generator_is_deterministic() {
    let amps = NoiseAmplitudes::new(3.0, 100.0, 1000.0).unwrap();
    let a = gen_phase_noise(&amps, 8192, FS, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let b = gen_phase_noise(&amps, 8192, FS, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let c = gen_phase_noise(&amps, 8192, FS, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
