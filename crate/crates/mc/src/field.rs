//! Dressed-state potentials, mixing angle and spontaneous transition rates
//! for a two-level atom driven by the repumper inside the lattice.

use ramanlab_core::phys::constants::HBAR;
use ramanlab_core::phys::{AtomSpecies, LatticeParams, RepumperField, TrapOscillator};
use serde::{Deserialize, Serialize};

use crate::error::{MonteCarloError, Result};

/// Which dressed state the atom occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn flipped(self) -> Self {
        match self {
            Branch::Minus => Branch::Plus,
            Branch::Plus => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRates {
    pub stay_minus: f64,
    pub change_from_minus: f64,
    pub stay_plus: f64,
    pub change_from_plus: f64,
}

impl TransitionRates {
    /// (stay, change) rates for an atom in `branch`.
    pub fn for_branch(&self, branch: Branch) -> (f64, f64) {
        match branch {
            Branch::Minus => (self.stay_minus, self.change_from_minus),
            Branch::Plus => (self.stay_plus, self.change_from_plus),
        }
    }

    pub fn total(&self) -> f64 {
        self.stay_minus + self.change_from_minus + self.stay_plus + self.change_from_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedField {
    pub lattice: LatticeParams,
    pub repumper: RepumperField,
    pub atom: AtomSpecies,
}

impl DressedField {
    pub fn new(lattice: LatticeParams, repumper: RepumperField, atom: AtomSpecies) -> Result<Self> {
        if !(repumper.rabi_omega >= 0.0) || !repumper.rabi_omega.is_finite() {
            return Err(MonteCarloError::Config(format!(
                "Rabi frequency must be finite and >= 0, got {}",
                repumper.rabi_omega
            )));
        }
        Ok(Self {
            lattice,
            repumper,
            atom,
        })
    }

    /// Field from a saturation parameter and a free-space detuning (rad/s).
    pub fn from_saturation(
        lattice: LatticeParams,
        atom: AtomSpecies,
        s: f64,
        detuning_free_space: f64,
    ) -> Result<Self> {
        let repumper = RepumperField::from_saturation(s, atom.gamma, detuning_free_space, &lattice)?;
        Self::new(lattice, repumper, atom)
    }

    pub fn omega(&self) -> f64 {
        self.repumper.rabi_omega
    }

    pub fn trap(&self) -> TrapOscillator {
        TrapOscillator::from_lattice(&self.lattice, self.atom.mass).expect("lattice and atom are validated")
    }

    /// Local detuning Δ(x) = Δ̃ + (U_g(x) - U_e(x))/ħ.
    #[inline]
    pub fn local_detuning(&self, x: f64) -> f64 {
        let ug = self.lattice.ground_potential(x);
        self.repumper.detuning_free_space + (1.0 - self.lattice.chi) * ug / HBAR
    }

    /// (U_-, U_+) in J.
    pub fn potentials(&self, x: f64) -> (f64, f64) {
        let ug = self.lattice.ground_potential(x);
        let delta = self.repumper.detuning_free_space + (1.0 - self.lattice.chi) * ug / HBAR;
        let (lo, hi) = split(delta, self.omega());
        (ug + 0.5 * HBAR * lo, ug + 0.5 * HBAR * hi)
    }

    pub fn potential(&self, x: f64, branch: Branch) -> f64 {
        let (m, p) = self.potentials(x);
        match branch {
            Branch::Minus => m,
            Branch::Plus => p,
        }
    }

    /// θ(x) = ½·atan(-Ω/Δ) + (π/2)·H(Δ), with θ = π/4 at Δ = 0.
    pub fn mixing_angle(&self, x: f64) -> f64 {
        let delta = self.local_detuning(x);
        if delta == 0.0 {
            return std::f64::consts::FRAC_PI_4;
        }
        0.5 * self.omega().atan2(-delta)
    }

    /// (cos²θ, sin²θ) without trigonometry, stable for |Δ| ≫ Ω.
    #[inline]
    pub fn mixing_weights(&self, x: f64) -> (f64, f64) {
        weights(self.local_detuning(x), self.omega())
    }

    pub fn transition_rates(&self, x: f64) -> TransitionRates {
        rates_from_weights(self.mixing_weights(x), self.atom.full_linewidth())
    }

    /// Force -dU_branch/dx, N.
    #[inline]
    pub fn force(&self, x: f64, branch: Branch) -> f64 {
        let k = self.lattice.wavenumber();
        let (s2, c2) = (2.0 * k * x).sin_cos();
        let u0 = self.lattice.depth_u0;
        let ug = -0.5 * u0 * (1.0 + c2);
        let dug = u0 * k * s2;
        let delta = self.repumper.detuning_free_space + (1.0 - self.lattice.chi) * ug / HBAR;
        let w = (delta * delta + self.omega() * self.omega()).sqrt();
        let r = if w > 0.0 { delta / w } else { 0.0 };
        let sign = match branch {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        };
        -dug * (1.0 + 0.5 * (1.0 - self.lattice.chi) * (-1.0 + sign * r))
    }
}

/// Returns (-Δ - W, -Δ + W) with W = sqrt(Δ² + Ω²), avoiding cancellation.
#[inline]
fn split(delta: f64, omega: f64) -> (f64, f64) {
    let w = (delta * delta + omega * omega).sqrt();
    if delta >= 0.0 {
        let big = delta + w;
        (-big, if big > 0.0 { omega * omega / big } else { 0.0 })
    } else {
        let big = w - delta;
        (-omega * omega / big, big)
    }
}

#[inline]
fn weights(delta: f64, omega: f64) -> (f64, f64) {
    let w = (delta * delta + omega * omega).sqrt();
    if w == 0.0 {
        return (0.5, 0.5);
    }
    // cos²θ = (W - Δ)/2W, sin²θ = (W + Δ)/2W
    if delta >= 0.0 {
        let s2 = (w + delta) / (2.0 * w);
        let c2 = omega * omega / (2.0 * w * (w + delta));
        (c2, s2)
    } else {
        let c2 = (w - delta) / (2.0 * w);
        let s2 = omega * omega / (2.0 * w * (w - delta));
        (c2, s2)
    }
}

#[inline]
fn rates_from_weights((c2, s2): (f64, f64), gamma_full: f64) -> TransitionRates {
    let mixed = gamma_full * s2 * c2;
    TransitionRates {
        stay_minus: mixed,
        change_from_minus: gamma_full * s2 * s2,
        stay_plus: mixed,
        change_from_plus: gamma_full * c2 * c2,
    }
}
