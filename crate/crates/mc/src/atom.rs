//! Single-atom trajectory: initial conditions, velocity-Verlet motion in the
//! occupied dressed potential and scattering events drawn by thinning.

use ramanlab_core::phys::constants::KB;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{MonteCarloError, Result};
use crate::field::{Branch, DressedField};

/// Number of samples in the per-field rate-bound tables.
pub const RATE_TABLE_POINTS: usize = 512;
/// Safety factor applied to tabulated rate maxima.
pub const RATE_BOUND_SAFETY: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RecoilModel {
    /// One kick of ħk with random sign per scattered photon.
    #[default]
    SingleKick,
    /// +ħk along the beam on absorption plus a random-sign ħk on emission.
    AbsorptionEmission,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    /// Integrator step cap, s.
    pub dt_max: f64,
    /// Simulation horizon, s.
    pub t_max: f64,
    /// An atom with |x| beyond this is lost, m.
    pub boundary_x: f64,
    pub ensemble_n: usize,
    pub seed: u64,
    /// K.
    pub init_temperature: f64,
    /// Number of bins of the statistics time grid.
    pub n_time_bins: usize,
    pub bootstrap_resamples: usize,
    /// Keep every photon time in the ensemble result.
    pub record_events: bool,
    pub recoil: RecoilModel,
}

impl MCConfig {
    /// Defaults for a given field: dt_max = 1/(50ν), 20 ms horizon, a
    /// single-well boundary at a/2, 500 atoms at 100 μK.
    pub fn for_field(field: &DressedField) -> Self {
        Self {
            dt_max: 1.0 / (50.0 * field.trap().nu),
            t_max: 20e-3,
            boundary_x: 0.5 * field.lattice.period_a,
            ensemble_n: 500,
            seed: 0,
            init_temperature: 100e-6,
            n_time_bins: 200,
            bootstrap_resamples: 100,
            record_events: false,
            recoil: RecoilModel::SingleKick,
        }
    }

    pub fn validate(&self, field: &DressedField) -> Result<()> {
        let cap = 1.0 / (50.0 * field.trap().nu);
        let bad = |m: String| Err(MonteCarloError::Config(m));
        if !(self.dt_max > 0.0 && self.dt_max <= cap * (1.0 + 1e-12)) {
            return bad(format!(
                "dt_max must be in (0, 1/(50ν)] = (0, {cap:e}] s, got {:e}",
                self.dt_max
            ));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.boundary_x > 0.0 && self.boundary_x <= 0.5 * field.lattice.period_a * (1.0 + 1e-12)) {
            return bad(format!("boundary_x must be in (0, a/2], got {:e}", self.boundary_x));
        }
        if self.ensemble_n == 0 {
            return bad("ensemble_n must be at least 1".into());
        }
        if !(self.init_temperature >= 0.0 && self.init_temperature.is_finite()) {
            return bad(format!("init_temperature must be >= 0, got {}", self.init_temperature));
        }
        if self.n_time_bins < 2 {
            return bad("n_time_bins must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomTrajectoryState {
    pub x: f64,
    pub p: f64,
    pub branch: Branch,
    pub t: f64,
    pub photons: u64,
    pub alive: bool,
}

impl AtomTrajectoryState {
    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        self.p * self.p / (2.0 * mass)
    }

    /// Kinetic plus occupied dressed potential, J.
    pub fn mechanical_energy(&self, field: &DressedField) -> f64 {
        self.kinetic_energy(field.atom.mass) + field.potential(self.x, self.branch)
    }
}

/// Independent RNG stream for one atom.
pub fn atom_rng(seed: u64, atom_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(atom_id);
    rng
}

/// Initial energy from a 1D Boltzmann (exponential) law with mean kB·T,
/// redrawn while it exceeds 0.95·U0.
pub fn draw_initial_energy<R: Rng + ?Sized>(temperature: f64, depth_u0: f64, rng: &mut R) -> f64 {
    if temperature == 0.0 {
        return 0.0;
    }
    let exp = Exp::new(1.0 / (KB * temperature)).expect("positive temperature");
    loop {
        let e = exp.sample(rng);
        if e <= 0.95 * depth_u0 {
            return e;
        }
    }
}

/// Draws the initial state: energy from the truncated Boltzmann law, launch
/// from the well bottom, free evolution in the bare ground potential for a
/// random fraction of a trap period, then projection onto a dressed state
/// with P- = cos²θ.
pub fn init_atom<R: Rng + ?Sized>(cfg: &MCConfig, field: &DressedField, rng: &mut R) -> AtomTrajectoryState {
    let m = field.atom.mass;
    let e0 = draw_initial_energy(cfg.init_temperature, field.lattice.depth_u0, rng);
    let mut x = 0.0;
    let mut p = (2.0 * m * e0).sqrt();
    let duration = rng.random::<f64>() * field.trap().period();
    if duration > 0.0 && p > 0.0 {
        let n = (duration / cfg.dt_max).ceil().max(1.0) as usize;
        let dt = duration / n as f64;
        let bare = |x: f64| -field.lattice.ground_potential_gradient(x);
        let mut f = bare(x);
        for _ in 0..n {
            p += 0.5 * dt * f;
            x += dt * p / m;
            f = bare(x);
            p += 0.5 * dt * f;
        }
    }
    let (c2, _) = field.mixing_weights(x);
    let branch = if rng.random::<f64>() < c2 {
        Branch::Minus
    } else {
        Branch::Plus
    };
    AtomTrajectoryState {
        x,
        p,
        branch,
        t: 0.0,
        photons: 0,
        alive: true,
    }
}

/// One velocity-Verlet step of length `dt` in the occupied potential.
pub fn step_motion(state: &AtomTrajectoryState, field: &DressedField, dt: f64) -> AtomTrajectoryState {
    let m = field.atom.mass;
    let mut s = *state;
    s.p += 0.5 * dt * field.force(s.x, s.branch);
    s.x += dt * s.p / m;
    s.p += 0.5 * dt * field.force(s.x, s.branch);
    s.t += dt;
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionOutcome {
    /// Reached the requested time.
    Arrived,
    /// Crossed |x| > boundary_x at `state.t`.
    Escaped,
}

/// Integrates for `duration` with equal Verlet substeps no longer than
/// `dt`, stopping early on escape.
pub fn evolve(
    state: &mut AtomTrajectoryState,
    field: &DressedField,
    duration: f64,
    dt: f64,
    boundary_x: f64,
) -> MotionOutcome {
    if duration <= 0.0 {
        return MotionOutcome::Arrived;
    }
    let n = (duration / dt).ceil().max(1.0);
    let h = duration / n;
    let n = n as u64;
    let m_inv = 1.0 / field.atom.mass;
    let t0 = state.t;
    let (mut x, mut p) = (state.x, state.p);
    let mut f = field.force(x, state.branch);
    for i in 1..=n {
        p += 0.5 * h * f;
        x += h * p * m_inv;
        f = field.force(x, state.branch);
        p += 0.5 * h * f;
        if x.abs() > boundary_x {
            state.x = x;
            state.p = p;
            state.t = t0 + i as f64 * h;
            return MotionOutcome::Escaped;
        }
    }
    state.x = x;
    state.p = p;
    state.t = t0 + duration;
    MotionOutcome::Arrived
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Stay,
    Change,
}

/// Upper bounds of the stay and change rates for one branch over every
/// position the atom can reach with its current energy.
///
/// Rates and potentials are tabulated on 512 points of the half-well
/// [0, boundary_x] (both are even in x). Table entries are sorted by
/// potential energy with running maxima of the rates, so the bound for a
/// given energy is a binary search. The energy cutoff is padded by the
/// largest potential step between neighbouring samples so that rates just
/// past a turning point are covered.
#[derive(Debug, Clone)]
pub struct RateBoundTable {
    potential_sorted: Vec<f64>,
    stay_prefix_max: Vec<f64>,
    change_prefix_max: Vec<f64>,
    energy_pad: f64,
    /// Minimum of the branch potential over the well, J.
    pub well_minimum: f64,
    /// Potential at the escape boundary, J.
    pub boundary_potential: f64,
}

impl RateBoundTable {
    pub fn new(field: &DressedField, branch: Branch, boundary_x: f64) -> Self {
        let n = RATE_TABLE_POINTS;
        let xs: Vec<f64> = (0..n).map(|k| boundary_x * k as f64 / (n - 1) as f64).collect();
        let u: Vec<f64> = xs.iter().map(|x| field.potential(*x, branch)).collect();
        let rates: Vec<(f64, f64)> = xs
            .iter()
            .map(|x| field.transition_rates(*x).for_branch(branch))
            .collect();
        let energy_pad = u.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| u[*a].total_cmp(&u[*b]).then(a.cmp(b)));
        let mut stay_prefix_max = Vec::with_capacity(n);
        let mut change_prefix_max = Vec::with_capacity(n);
        let (mut s_max, mut c_max) = (0.0f64, 0.0f64);
        for &i in &order {
            s_max = s_max.max(rates[i].0);
            c_max = c_max.max(rates[i].1);
            stay_prefix_max.push(s_max);
            change_prefix_max.push(c_max);
        }
        Self {
            potential_sorted: order.iter().map(|i| u[*i]).collect(),
            stay_prefix_max,
            change_prefix_max,
            energy_pad,
            well_minimum: u[order[0]],
            boundary_potential: u[n - 1],
        }
    }

    /// (stay, change) maxima over table points with potential ≤ energy
    /// (plus padding); not yet including the safety factor.
    pub fn bounds(&self, energy: f64) -> (f64, f64) {
        let idx = self
            .potential_sorted
            .partition_point(|u| *u <= energy + self.energy_pad);
        if idx == 0 {
            (0.0, 0.0)
        } else {
            (self.stay_prefix_max[idx - 1], self.change_prefix_max[idx - 1])
        }
    }
}

/// Both branches' bound tables for one field.
#[derive(Debug, Clone)]
pub struct RateBounds {
    pub minus: RateBoundTable,
    pub plus: RateBoundTable,
}

impl RateBounds {
    pub fn new(field: &DressedField, boundary_x: f64) -> Self {
        Self {
            minus: RateBoundTable::new(field, Branch::Minus, boundary_x),
            plus: RateBoundTable::new(field, Branch::Plus, boundary_x),
        }
    }

    pub fn table(&self, branch: Branch) -> &RateBoundTable {
        match branch {
            Branch::Minus => &self.minus,
            Branch::Plus => &self.plus,
        }
    }

    /// Thinning envelope (R_stay,max, R_change,max) for the atom's current
    /// energy, including the current position and the safety factor.
    pub fn envelope(&self, state: &AtomTrajectoryState, field: &DressedField) -> (f64, f64) {
        let energy = state.mechanical_energy(field);
        let (s, c) = self.table(state.branch).bounds(energy);
        let (s_here, c_here) = field.transition_rates(state.x).for_branch(state.branch);
        (RATE_BOUND_SAFETY * s.max(s_here), RATE_BOUND_SAFETY * c.max(c_here))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub tau: f64,
    pub channel: Channel,
    /// Envelope rate of the winning channel.
    pub rate_max: f64,
}

/// Draws a candidate event: the earlier of two exponential waiting times
/// with the stay and change envelope rates. Channels with zero envelope
/// never fire; `None` means neither can.
pub fn sample_event<R: Rng + ?Sized>(envelope: (f64, f64), rng: &mut R) -> Option<Candidate> {
    let draw = |rate: f64, rng: &mut R| -> f64 {
        if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(rng)
        } else {
            f64::INFINITY
        }
    };
    let ts = draw(envelope.0, rng);
    let tc = draw(envelope.1, rng);
    if ts.is_infinite() && tc.is_infinite() {
        return None;
    }
    Some(if ts <= tc {
        Candidate {
            tau: ts,
            channel: Channel::Stay,
            rate_max: envelope.0,
        }
    } else {
        Candidate {
            tau: tc,
            channel: Channel::Change,
            rate_max: envelope.1,
        }
    })
}

/// Acceptance step of the thinning: the candidate becomes a real event with
/// probability R(x)/R_max at the atom's new position. The second value
/// reports whether R(x) exceeded the envelope.
pub fn accept_event<R: Rng + ?Sized>(
    state: &AtomTrajectoryState,
    field: &DressedField,
    cand: &Candidate,
    rng: &mut R,
) -> (bool, bool) {
    let (s, c) = field.transition_rates(state.x).for_branch(state.branch);
    let rate = match cand.channel {
        Channel::Stay => s,
        Channel::Change => c,
    };
    let g = rate / cand.rate_max;
    (rng.random::<f64>() < g, g > 1.0)
}

/// Applies an accepted scattering event: one more photon, a branch flip on
/// change events and the photon recoil.
pub fn apply_scatter<R: Rng + ?Sized>(
    state: &mut AtomTrajectoryState,
    field: &DressedField,
    channel: Channel,
    recoil: RecoilModel,
    rng: &mut R,
) {
    state.photons += 1;
    if channel == Channel::Change {
        state.branch = state.branch.flipped();
    }
    let hk = field.atom.recoil_momentum;
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    match recoil {
        RecoilModel::SingleKick => state.p += sign * hk,
        RecoilModel::AbsorptionEmission => state.p += hk + sign * hk,
    }
}

/// What one atom did during the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomOutcome {
    pub escape_time: Option<f64>,
    pub photons: u64,
    /// Photon counts per statistics bin.
    pub photons_per_bin: Vec<u32>,
    /// Mechanical energy above the well minimum of the occupied branch at
    /// each grid time; NaN once the atom is lost.
    pub energy_at_grid: Vec<f64>,
    /// Photon times, only filled when events are recorded.
    pub events: Vec<f64>,
    /// Accepted positions whose rate exceeded the thinning envelope.
    pub bound_violations: u64,
    pub final_state: AtomTrajectoryState,
}

struct Recorder {
    grid_dt: f64,
    n_bins: usize,
    next_grid: usize,
    photons_per_bin: Vec<u32>,
    energy_at_grid: Vec<f64>,
    events: Option<Vec<f64>>,
}

impl Recorder {
    fn new(cfg: &MCConfig) -> Self {
        Self {
            grid_dt: cfg.t_max / cfg.n_time_bins as f64,
            n_bins: cfg.n_time_bins,
            next_grid: 0,
            photons_per_bin: vec![0; cfg.n_time_bins],
            energy_at_grid: vec![f64::NAN; cfg.n_time_bins + 1],
            events: cfg.record_events.then(Vec::new),
        }
    }

    /// Fills grid energies for all grid times up to and including `t`.
    fn fill_until(&mut self, t: f64, energy: f64) {
        while self.next_grid <= self.n_bins && self.next_grid as f64 * self.grid_dt <= t {
            self.energy_at_grid[self.next_grid] = energy;
            self.next_grid += 1;
        }
    }

    fn photon(&mut self, t: f64) {
        let bin = ((t / self.grid_dt) as usize).min(self.n_bins - 1);
        self.photons_per_bin[bin] += 1;
        if let Some(ev) = self.events.as_mut() {
            ev.push(t);
        }
    }
}

/// Runs one atom from its initial draw until it escapes the well or the
/// horizon is reached.
pub fn run_atom<R: Rng + ?Sized>(
    cfg: &MCConfig,
    field: &DressedField,
    bounds: &RateBounds,
    rng: &mut R,
) -> AtomOutcome {
    let mut state = init_atom(cfg, field, rng);
    let mut rec = Recorder::new(cfg);
    let mut violations = 0u64;
    let energy_above_min = |s: &AtomTrajectoryState| s.mechanical_energy(field) - bounds.table(s.branch).well_minimum;
    let mut escape_time = None;

    'events: loop {
        let envelope = bounds.envelope(&state, field);
        let energy = energy_above_min(&state);
        let trapped = state.mechanical_energy(field) < bounds.table(state.branch).boundary_potential
            && state.x.abs() < cfg.boundary_x;
        loop {
            let cand = sample_event(envelope, rng);
            let remaining = cfg.t_max - state.t;
            let tau = cand.map_or(f64::INFINITY, |c| c.tau);
            if tau >= remaining {
                // Nothing happens before the horizon. A trapped atom cannot
                // leave without another event, so its motion need not be
                // integrated.
                if !trapped
                    && evolve(&mut state, field, remaining, cfg.dt_max, cfg.boundary_x) == MotionOutcome::Escaped
                {
                    rec.fill_until(state.t, energy);
                    escape_time = Some(state.t);
                    state.alive = false;
                    break 'events;
                }
                state.t = cfg.t_max;
                rec.fill_until(state.t, energy);
                break 'events;
            }
            let cand = cand.expect("finite tau implies a candidate");
            let dt = cfg.dt_max.min(tau / 32.0);
            if evolve(&mut state, field, tau, dt, cfg.boundary_x) == MotionOutcome::Escaped {
                rec.fill_until(state.t, energy);
                escape_time = Some(state.t);
                state.alive = false;
                break 'events;
            }
            let (accepted, violated) = accept_event(&state, field, &cand, rng);
            violations += u64::from(violated);
            if accepted {
                rec.fill_until(state.t, energy);
                rec.photon(state.t);
                apply_scatter(&mut state, field, cand.channel, cfg.recoil, rng);
                continue 'events;
            }
        }
    }

    AtomOutcome {
        escape_time,
        photons: state.photons,
        photons_per_bin: rec.photons_per_bin,
        energy_at_grid: rec.energy_at_grid,
        events: rec.events.unwrap_or_default(),
        bound_violations: violations,
        final_state: state,
    }
}
