use proptest::prelude::*;
use ramanlab_core::optim::LorentzianPeak;
use ramanlab_core::spectra::{
    axis_thermometry, fit_sidebands_with, model_spectrum, synthesize_spectrum, thermometry, SidebandFit, WidthModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const HBAR: f64 = 1.054_571_817e-34;
const KB: f64 = 1.380_649e-23;
const NU_HZ: [f64; 3] = [280e3, 350e3, 420e3];

fn peaks(nbar: f64, widths: [f64; 3]) -> Vec<LorentzianPeak> {
    let r = nbar / (1.0 + nbar);
    let heat = [0.55, 0.6, 0.5];
    let mut p: Vec<LorentzianPeak> = (0..3)
        .map(|i| LorentzianPeak::new(NU_HZ[i], widths[i], r * heat[i]).unwrap())
        .collect();
    p.extend((0..3).map(|i| LorentzianPeak::new(-NU_HZ[i], widths[i], heat[i]).unwrap()));
    p.push(LorentzianPeak::new(0.0, 30e3, 0.02).unwrap());
    p
}

fn grid(step: f64) -> Vec<f64> {
    let n = (1.2e6 / step).round() as usize + 1;
    (0..n).map(|i| -600e3 + step * i as f64).collect()
}

fn angular(nu: [f64; 3]) -> [f64; 3] {
    nu.map(|f| 2.0 * std::f64::consts::PI * f)
}

#[test]
fn shared_widths_recover_noiseless_spectrum() {
    // broad third axis, as for an inhomogeneously broadened z mode
    let truth = peaks(0.17, [20e3, 25e3, 45e3]);
    let spec = model_spectrum(&truth, 0.05, &grid(5e3), 100).unwrap();
    let init = SidebandFit::initial_guess(&spec, [270e3, 360e3, 410e3], 30e3).unwrap();
    let fit = fit_sidebands_with(&spec, &init, WidthModel::SharedPerAxis).unwrap();
    assert!(fit.residual < 1e-10, "{}", fit.residual);
    for k in 0..3 {
        assert_eq!(fit.peaks[k].fwhm, fit.peaks[k + 3].fwhm);
    }
    for (g, w) in fit.peaks.iter().zip(&truth) {
        assert!((g.center - w.center).abs() < 350.0, "{g:?} vs {w:?}");
        assert!(((g.fwhm - w.fwhm) / w.fwhm).abs() < 1e-3, "{g:?} vs {w:?}");
        assert!(
            ((g.amplitude - w.amplitude) / w.amplitude).abs() < 1e-3,
            "{g:?} vs {w:?}"
        );
    }
    let th = thermometry(&fit, angular(NU_HZ)).unwrap();
    for p0 in th.ground_fraction_per_axis {
        assert!((p0 - 1.0 / 1.17).abs() < 1e-3, "{p0}");
    }
}

#[test]
fn noisy_round_trip_over_occupations() {
    for (seed, nbar) in [(1u64, 0.05), (2, 0.17), (3, 0.5)] {
        let truth = peaks(nbar, [25e3; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = synthesize_spectrum(&truth, 0.05, &grid(2e3), 100, &mut rng).unwrap();
        let init = SidebandFit::initial_guess(&spec, [270e3, 360e3, 410e3], 30e3).unwrap();
        let fit = fit_sidebands_with(&spec, &init, WidthModel::SharedPerAxis).unwrap();
        let th = thermometry(&fit, angular(NU_HZ)).unwrap();
        let mean_nbar = th.nbar_per_axis.iter().sum::<f64>() / 3.0;
        assert!(
            (mean_nbar - nbar).abs() < 0.03,
            "n̄ = {nbar}: got {:?}",
            th.nbar_per_axis
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn thermal_relations_hold(r in 0.0f64..0.95, nu_khz in 50.0f64..1000.0) {
        let nu = 2.0 * std::f64::consts::PI * nu_khz * 1e3;
        let (ratio, nbar, p0, t, inf) = axis_thermometry(r, 1.0, nu);
        prop_assert!(!inf);
        prop_assert!((ratio - r).abs() < 1e-15);
        prop_assert!((p0 * (1.0 + nbar) - 1.0).abs() < 1e-12);
        if nbar > 0.0 {
            // Bose occupation at the reported temperature
            let back = 1.0 / ((HBAR * nu / (KB * t)).exp() - 1.0);
            prop_assert!(((back - nbar) / nbar).abs() < 1e-9);
        }
    }

    #[test]
    fn temperature_increases_with_ratio(r1 in 0.0f64..0.9, dr in 1e-3f64..0.05) {
        let nu = 2.0 * std::f64::consts::PI * 350e3;
        let (_, _, _, t1, _) = axis_thermometry(r1, 1.0, nu);
        let (_, _, _, t2, _) = axis_thermometry(r1 + dr, 1.0, nu);
        prop_assert!(t2 > t1);
    }
}
