use ramanlab_core::phys::constants::KB;
use ramanlab_core::phys::{hz_to_angular, AtomSpecies, LatticeParams};
use ramanlab_mc::atom::{draw_initial_energy, evolve, Channel};
use ramanlab_mc::*;

fn field(s: f64, offset_mhz: f64, chi: f64) -> DressedField {
    let mut lattice = LatticeParams::rb87_868nm();
    lattice.chi = chi;
    let det = lattice.trap_shift() + hz_to_angular(offset_mhz * 1e6);
    DressedField::from_saturation(lattice, AtomSpecies::rubidium87(), s, det).unwrap()
}

/// Asymptotic Kolmogorov distribution tail, P(D_n > d).
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let d = samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let c = 1.0 - (-rate * x).exp();
            (c - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - c).abs())
        })
        .fold(0.0, f64::max);
    ks_p_value(d, n)
}

#[test]
fn ks_helper_rejects_wrong_rate() {
    let mut rng = atom_rng(1, 1);
    use rand_distr::{Distribution, Exp};
    let mut v: Vec<f64> = (0..5000).map(|_| Exp::new(2.0).unwrap().sample(&mut rng)).collect();
    assert!(ks_exponential(&mut v.clone(), 2.0) > 0.01);
    assert!(ks_exponential(&mut v, 2.5) < 1e-6);
}

#[test]
fn initial_energy_follows_truncated_boltzmann() {
    let u0 = LatticeParams::rb87_868nm().depth_u0;
    let kt = KB * 100e-6;
    let mut rng = atom_rng(2, 0);
    let n = 10_000;
    let mean = (0..n).map(|_| draw_initial_energy(100e-6, u0, &mut rng)).sum::<f64>() / n as f64;
    // mean of an exponential truncated at E_c
    let ec = 0.95 * u0;
    let q = (-ec / kt).exp();
    let truncated = kt - ec * q / (1.0 - q);
    assert!(((mean - truncated) / truncated).abs() < 0.05, "{mean} vs {truncated}");
    assert!(((mean - kt) / kt).abs() < 0.05);
}

#[test]
fn branch_coin_flip_frequencies() {
    let f = field(0.3, 1.0, -0.59);
    let mut cfg = MCConfig::for_field(&f);
    cfg.init_temperature = 0.0;
    let (c2, _) = f.mixing_weights(0.0);
    assert!(c2 > 0.05 && c2 < 0.95);
    let n = 10_000;
    let mut rng = atom_rng(3, 0);
    let minus = (0..n)
        .filter(|_| init_atom(&cfg, &f, &mut rng).branch == Branch::Minus)
        .count() as f64;
    let sigma = (n as f64 * c2 * (1.0 - c2)).sqrt();
    assert!(
        (minus - n as f64 * c2).abs() < 3.0 * sigma,
        "{minus} vs {}",
        n as f64 * c2
    );
}

#[test]
fn harmonic_limit_frequency() {
    let f = field(0.0, 30.0, 1.0);
    let nu = f.trap().nu;
    let dt = 1.0 / (100.0 * nu);
    let mut s = AtomTrajectoryState {
        x: 1e-9,
        p: 0.0,
        branch: Branch::Plus,
        t: 0.0,
        photons: 0,
        alive: true,
    };
    // downward zero crossings of x over ten periods
    let mut crossings = Vec::new();
    let steps = (10.5 * 2.0 * std::f64::consts::PI / nu / dt) as usize;
    for _ in 0..steps {
        let next = step_motion(&s, &f, dt);
        if s.x > 0.0 && next.x <= 0.0 {
            crossings.push(s.t + dt * s.x / (s.x - next.x));
        }
        s = next;
    }
    assert!(crossings.len() >= 10);
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let measured = 2.0 * std::f64::consts::PI / period;
    assert!(((measured - nu) / nu).abs() < 1e-3, "{measured} vs {nu}");
}

#[test]
fn energy_has_no_secular_drift() {
    for (s_param, off) in [(0.2, 20.0), (0.1, -5.0)] {
        let f = field(s_param, off, -0.59);
        let nu = f.trap().nu;
        let period = 2.0 * std::f64::consts::PI / nu;
        let dt = 1.0 / (100.0 * nu);
        let bounds = RateBounds::new(&f, 0.5 * f.lattice.period_a);
        let floor = bounds.table(Branch::Plus).well_minimum;
        let mut s = AtomTrajectoryState {
            x: 60e-9,
            p: 0.0,
            branch: Branch::Plus,
            t: 0.0,
            photons: 0,
            alive: true,
        };
        let per_period = (period / dt).round() as usize;
        let mut averages = Vec::new();
        for _ in 0..100 {
            let mut acc = 0.0;
            for _ in 0..per_period {
                s = step_motion(&s, &f, dt);
                acc += s.mechanical_energy(&f) - floor;
            }
            averages.push(acc / per_period as f64);
        }
        let e = averages[0];
        let drift_per_period = (averages[99] - averages[0]).abs() / 99.0 / e;
        assert!(drift_per_period < 1e-6, "drift {drift_per_period}");
    }
}

#[test]
fn frozen_atom_thinning_matches_poisson() {
    let f = field(0.3, -3.0, -0.59);
    let x = 40e-9;
    let mut state = AtomTrajectoryState {
        x,
        p: 0.0,
        branch: Branch::Minus,
        t: 0.0,
        photons: 0,
        alive: true,
    };
    let (rs, rc) = f.transition_rates(x).for_branch(Branch::Minus);
    // deliberately loose envelope to exercise rejections
    let envelope = (1.5 * rs, 2.0 * rc);
    let mut rng = atom_rng(4, 0);
    let mut waits = Vec::new();
    let mut change = 0usize;
    let mut since = 0.0;
    let n = 10_000;
    while waits.len() < n {
        let cand = sample_event(envelope, &mut rng).unwrap();
        since += cand.tau;
        let (ok, violated) = accept_event(&state, &f, &cand, &mut rng);
        assert!(!violated);
        if ok {
            waits.push(since);
            since = 0.0;
            change += usize::from(cand.channel == Channel::Change);
            state.photons += 1;
        }
    }
    let total = rs + rc;
    let p = ks_exponential(&mut waits, total);
    assert!(p > 0.01, "KS p = {p}");
    let mean = waits.iter().sum::<f64>() / n as f64;
    assert!((mean * total - 1.0).abs() < 3.0 / (n as f64).sqrt());
    let q = rc / total;
    let sigma = (n as f64 * q * (1.0 - q)).sqrt();
    assert!((change as f64 - n as f64 * q).abs() < 3.0 * sigma);
}

#[test]
fn zero_envelope_never_fires() {
    let mut rng = atom_rng(5, 0);
    assert!(sample_event((0.0, 0.0), &mut rng).is_none());
    for _ in 0..100 {
        assert_eq!(sample_event((1e6, 0.0), &mut rng).unwrap().channel, Channel::Stay);
    }
    // Without drive the ground-like branch has no rates at all.
    let f = field(0.0, 20.0, -0.59);
    let bounds = RateBounds::new(&f, 0.5 * f.lattice.period_a);
    let s = AtomTrajectoryState {
        x: 30e-9,
        p: 1e-28,
        branch: Branch::Plus,
        t: 0.0,
        photons: 0,
        alive: true,
    };
    assert_eq!(bounds.envelope(&s, &f), (0.0, 0.0));
}

#[test]
fn scatter_contract() {
    let f = field(0.1, 10.0, -0.59);
    let hk = f.atom.recoil_momentum;
    let mut rng = atom_rng(6, 0);
    let start = AtomTrajectoryState {
        x: 0.0,
        p: 0.0,
        branch: Branch::Minus,
        t: 1e-6,
        photons: 3,
        alive: true,
    };
    let mut s = start;
    apply_scatter(&mut s, &f, Channel::Stay, RecoilModel::SingleKick, &mut rng);
    assert_eq!((s.branch, s.photons), (Branch::Minus, 4));
    assert!((s.p.abs() - hk).abs() < 1e-12 * hk);
    let mut s = start;
    apply_scatter(&mut s, &f, Channel::Change, RecoilModel::SingleKick, &mut rng);
    assert_eq!(s.branch, Branch::Plus);
}

#[test]
fn recoil_random_walk_variance() {
    let f = field(0.1, 10.0, -0.59);
    let hk = f.atom.recoil_momentum;
    let walkers = 10_000;
    let kicks = 10_000;
    let mut rng = atom_rng(7, 0);
    let mut sum_sq = 0.0;
    for _ in 0..walkers {
        let mut s = AtomTrajectoryState {
            x: 0.0,
            p: 0.0,
            branch: Branch::Plus,
            t: 0.0,
            photons: 0,
            alive: true,
        };
        for _ in 0..kicks {
            apply_scatter(&mut s, &f, Channel::Stay, RecoilModel::SingleKick, &mut rng);
        }
        sum_sq += s.p * s.p;
    }
    let var = sum_sq / walkers as f64;
    let expect = kicks as f64 * hk * hk;
    assert!(((var - expect) / expect).abs() < 0.05, "{var} vs {expect}");
}

#[test]
fn escape_is_detected_at_the_boundary() {
    let f = field(0.0, 30.0, -0.59);
    let mut s = AtomTrajectoryState {
        x: 0.0,
        p: 2.0 * (2.0 * f.atom.mass * f.lattice.depth_u0).sqrt(),
        branch: Branch::Plus,
        t: 0.0,
        photons: 0,
        alive: true,
    };
    let out = evolve(&mut s, &f, 1e-6, 1e-9, 0.5 * f.lattice.period_a);
    assert_eq!(out, atom::MotionOutcome::Escaped);
    assert!(s.x.abs() > 0.5 * f.lattice.period_a);
    assert!(s.t < 1e-6);
}
