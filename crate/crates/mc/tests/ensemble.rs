use ramanlab_core::phys::{hz_to_angular, AtomSpecies, LatticeParams};
use ramanlab_mc::map::{canonical_grid, RATE_MAP_HEADER};
use ramanlab_mc::*;

fn field(s: f64, offset_mhz: f64) -> DressedField {
    let lattice = LatticeParams::rb87_868nm();
    let det = lattice.trap_shift() + hz_to_angular(offset_mhz * 1e6);
    DressedField::from_saturation(lattice, AtomSpecies::rubidium87(), s, det).unwrap()
}

fn short_cfg(f: &DressedField, n: usize) -> MCConfig {
    let mut cfg = MCConfig::for_field(f);
    cfg.ensemble_n = n;
    cfg.t_max = 1e-3;
    cfg.n_time_bins = 50;
    cfg.bootstrap_resamples = 20;
    cfg.seed = 42;
    cfg
}

#[test]
fn no_drive_no_scattering_no_loss() {
    let f = field(0.0, 10.0);
    let cfg = short_cfg(&f, 40);
    let r = run_ensemble(&cfg, &f).unwrap();
    assert_eq!(r.total_photons, 0);
    assert_eq!(r.scatter_rate, 0.0);
    assert_eq!(r.loss_rate, 0.0);
    assert_eq!(r.n_lost, 0);
    assert!(r.survival.iter().all(|s| *s == 1.0));
}

#[test]
fn statistics_are_monotone_and_consistent() {
    let f = field(0.4, -5.0);
    let mut cfg = short_cfg(&f, 40);
    cfg.record_events = true;
    let r = run_ensemble(&cfg, &f).unwrap();
    assert!(r.n_lost > 0, "expected losses near resonance");
    assert!(r.survival.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.cumulative_photons.windows(2).all(|w| w[1] >= w[0]));
    assert!(r.scatter_rate > 0.0 && r.loss_rate > 0.0);
    assert!(r.loss_rate_err > 0.0 && r.scatter_rate_err > 0.0);
    assert_eq!(r.photon_events.len() as u64, r.total_photons);
    assert_eq!(r.rate_bound_violations, 0);
    assert_eq!(r.time_grid.len(), cfg.n_time_bins + 1);
    let lost = r.escape_times.iter().filter(|e| e.is_some()).count();
    assert_eq!(lost, r.n_lost);
    for (k, t) in r.time_grid.iter().enumerate() {
        let alive = r.escape_times.iter().filter(|e| e.is_none_or(|e| e > *t)).count();
        assert_eq!(r.survival[k], alive as f64 / cfg.ensemble_n as f64);
    }
}

#[test]
fn events_not_kept_by_default() {
    let f = field(0.2, 10.0);
    let cfg = short_cfg(&f, 5);
    let r = run_ensemble(&cfg, &f).unwrap();
    assert!(r.photon_events.is_empty());
    assert!(r.total_photons > 0);
}

#[test]
fn bitwise_deterministic_across_thread_counts() {
    let f = field(0.2, 2.0);
    let cfg = short_cfg(&f, 24);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg, &f).unwrap())
    };
    let a = run(1);
    let b = run(3);
    let c = run_ensemble(&cfg, &f).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(format!("{a:?}"), format!("{c:?}"));
    let mut other = cfg;
    other.seed += 1;
    assert_ne!(run_ensemble(&other, &f).unwrap().total_photons, a.total_photons);
}

#[test]
fn invalid_config_is_rejected() {
    let f = field(0.2, 2.0);
    let mut cfg = short_cfg(&f, 2);
    cfg.dt_max = 1e-6;
    assert!(matches!(run_ensemble(&cfg, &f), Err(MonteCarloError::Config(_))));
}

#[test]
fn single_cell_map_matches_direct_run() {
    let f = field(0.2, 5.0);
    let cfg = short_cfg(&f, 10);
    let map = sweep_map(&cfg, f.lattice, f.atom, &[0.2], &[f.repumper.detuning_free_space]).unwrap();
    let seed = cell_seed(cfg.seed, 0, 0);
    let direct = run_ensemble(&MCConfig { seed, ..cfg }, &f).unwrap();
    let c = map.cell(0, 0);
    assert_eq!(c.loss_rate.to_bits(), direct.loss_rate.to_bits());
    assert_eq!(c.scatter_rate.to_bits(), direct.scatter_rate.to_bits());
    assert_eq!(c.n_lost, direct.n_lost);
}

#[test]
fn grid_order_does_not_matter() {
    let f = field(0.1, 0.0);
    let mut cfg = short_cfg(&f, 4);
    cfg.t_max = 0.2e-3;
    let d0 = f.repumper.detuning_free_space;
    let dets = [d0 + hz_to_angular(4e6), d0 - hz_to_angular(4e6)];
    let a = sweep_map(&cfg, f.lattice, f.atom, &[0.3, 0.1], &dets).unwrap();
    let b = sweep_map(&cfg, f.lattice, f.atom, &[0.1, 0.3], &[dets[1], dets[0]]).unwrap();
    assert_eq!(a, b);
    assert!(a.s_grid.windows(2).all(|w| w[0] < w[1]));
    assert!(canonical_grid(&[]).is_err());
}

#[test]
fn cell_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for i in 0..30 {
        for j in 0..30 {
            assert!(seen.insert(cell_seed(7, i, j)));
        }
    }
    assert_ne!(cell_seed(7, 0, 0), cell_seed(8, 0, 0));
}

#[test]
fn csv_header_is_stable() {
    let f = field(0.1, 0.0);
    let mut cfg = short_cfg(&f, 2);
    cfg.t_max = 0.1e-3;
    let map = sweep_map(&cfg, f.lattice, f.atom, &[0.1], &[hz_to_angular(30e6)]).unwrap();
    let mut buf = Vec::new();
    map.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "s,detuning_hz,loss_rate_per_s,loss_rate_err,scatter_rate_per_s,scatter_rate_err,n_atoms,n_lost"
    );
    assert_eq!(RATE_MAP_HEADER.len(), 8);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0.1");
    assert_eq!(row[1].parse::<f64>().unwrap().round(), 30e6);
    assert_eq!(row[6], "2");
}
