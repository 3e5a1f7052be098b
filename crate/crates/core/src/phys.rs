//! Physical constants, parameter types and the derived quantities shared by
//! the light-shift models and the Monte Carlo engine.
//!
//! All angular frequencies are stored in rad/s. Conversion to and from Hz
//! (cycles) happens only at the I/O boundary, see [`hz_to_angular`] and
//! [`angular_to_hz`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

/// CODATA 2018 values; the SI-defining constants are exact.
pub mod constants {
    /// Planck constant, J·s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant, J/K.
    pub const KB: f64 = 1.380_649e-23;
    /// Atomic mass of 87Rb, kg.
    pub const RB87_MASS: f64 = 1.443_160_648e-25;
    /// 87Rb D1 line (5S1/2 -> 5P1/2) vacuum wavelength, m.
    pub const RB87_D1_WAVELENGTH: f64 = 794.978_851e-9;
    /// Half-linewidth of the repumping transition, rad/s (2γ = 2π·6 MHz).
    pub const RB87_D1_GAMMA: f64 = 2.0 * std::f64::consts::PI * 3.0e6;
    /// Wavelength of the red-detuned trapping lattice, m.
    pub const LATTICE_WAVELENGTH: f64 = 868.0e-9;
    /// Polarizability ratio α_e/α_g of 5P1/2 over 5S1/2 at 868 nm.
    pub const RB87_CHI_868NM: f64 = -0.59;
}

use constants::*;

#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

#[inline]
pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Converts a temperature-equivalent energy given in μK·kB to joules.
#[inline]
pub fn microkelvin_to_joule(t_uk: f64) -> f64 {
    t_uk * 1e-6 * KB
}

#[inline]
pub fn joule_to_microkelvin(e: f64) -> f64 {
    e / KB * 1e6
}

/// The atom: mass, half-linewidth of the repumping transition and the
/// photon recoil of the repumper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    pub mass: f64,
    /// Half-linewidth γ in rad/s; the full linewidth is 2γ.
    pub gamma: f64,
    pub repump_wavelength: f64,
    /// h / λ_repump.
    pub recoil_momentum: f64,
}

impl AtomSpecies {
    pub fn new(mass: f64, gamma: f64, repump_wavelength: f64) -> Result<Self> {
        require(mass > 0.0 && mass.is_finite(), "mass", "must be positive")?;
        require(gamma > 0.0 && gamma.is_finite(), "gamma", "must be positive")?;
        require(
            repump_wavelength > 0.0 && repump_wavelength.is_finite(),
            "repump_wavelength",
            "must be positive",
        )?;
        Ok(Self {
            mass,
            gamma,
            repump_wavelength,
            recoil_momentum: PLANCK / repump_wavelength,
        })
    }

    pub fn rubidium87() -> Self {
        Self::new(RB87_MASS, RB87_D1_GAMMA, RB87_D1_WAVELENGTH).expect("valid constants")
    }

    /// Full linewidth Γ = 2γ, the total spontaneous decay rate.
    pub fn full_linewidth(&self) -> f64 {
        2.0 * self.gamma
    }

    /// Kinetic energy gained from a single recoil kick at rest, (ħk)²/2m.
    pub fn recoil_energy(&self) -> f64 {
        self.recoil_momentum * self.recoil_momentum / (2.0 * self.mass)
    }
}

/// One-dimensional standing-wave lattice, U_g(x) = -U0·cos²(πx/a) and
/// U_e(x) = χ·U_g(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Lattice period a = λ_lattice / 2, m.
    pub period_a: f64,
    /// Ground-state trap depth U0, J.
    pub depth_u0: f64,
    /// Polarizability ratio α_e / α_g.
    pub chi: f64,
}

impl LatticeParams {
    pub fn new(period_a: f64, depth_u0: f64, chi: f64) -> Result<Self> {
        require(period_a > 0.0 && period_a.is_finite(), "period_a", "must be positive")?;
        require(depth_u0 > 0.0 && depth_u0.is_finite(), "depth_u0", "must be positive")?;
        require(chi.is_finite(), "chi", "must be finite")?;
        Ok(Self {
            period_a,
            depth_u0,
            chi,
        })
    }

    /// 868 nm lattice with U0 = kB·0.5 mK and χ = -0.59.
    pub fn rb87_868nm() -> Self {
        Self::new(LATTICE_WAVELENGTH / 2.0, microkelvin_to_joule(500.0), RB87_CHI_868NM).expect("valid constants")
    }

    #[inline]
    pub fn wavenumber(&self) -> f64 {
        PI / self.period_a
    }

    #[inline]
    pub fn ground_potential(&self, x: f64) -> f64 {
        let c = (self.wavenumber() * x).cos();
        -self.depth_u0 * c * c
    }

    #[inline]
    pub fn excited_potential(&self, x: f64) -> f64 {
        self.chi * self.ground_potential(x)
    }

    /// dU_g/dx.
    #[inline]
    pub fn ground_potential_gradient(&self, x: f64) -> f64 {
        let k = self.wavenumber();
        self.depth_u0 * k * (2.0 * k * x).sin()
    }

    /// Lattice-induced shift of the repumping transition at the trap bottom,
    /// U0·(1-χ)/ħ in rad/s. A free-space detuning equal to this value is
    /// resonant for an atom at rest at x = 0.
    pub fn trap_shift(&self) -> f64 {
        self.depth_u0 * (1.0 - self.chi) / HBAR
    }
}

/// Repumper drive. The saturation parameter is authoritative; the Rabi
/// frequency is derived through s = 2(Ω/2γ)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepumperField {
    pub saturation_s: f64,
    pub rabi_omega: f64,
    /// Δ̃, detuning from the free-space resonance, rad/s.
    pub detuning_free_space: f64,
    /// Δ, detuning from the trap-shifted resonance at the potential minimum, rad/s.
    pub detuning_at_bottom: f64,
}

impl RepumperField {
    pub fn from_saturation(
        saturation_s: f64,
        gamma: f64,
        detuning_free_space: f64,
        lattice: &LatticeParams,
    ) -> Result<Self> {
        let rabi_omega = rabi_from_saturation(saturation_s, gamma)?;
        require(detuning_free_space.is_finite(), "detuning_free_space", "must be finite")?;
        Ok(Self {
            saturation_s,
            rabi_omega,
            detuning_free_space,
            detuning_at_bottom: detuning_at_bottom(detuning_free_space, lattice),
        })
    }

    pub fn from_rabi(rabi_omega: f64, gamma: f64, detuning_free_space: f64, lattice: &LatticeParams) -> Result<Self> {
        let s = saturation_from_rabi(rabi_omega, gamma)?;
        Self::from_saturation(s, gamma, detuning_free_space, lattice).map(|mut f| {
            f.rabi_omega = rabi_omega;
            f
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapOscillator {
    /// Angular trap frequency ν, rad/s.
    pub nu: f64,
    pub mass: f64,
}

impl TrapOscillator {
    pub fn new(nu: f64, mass: f64) -> Result<Self> {
        require(nu > 0.0 && nu.is_finite(), "nu", "must be positive")?;
        require(mass > 0.0, "mass", "must be positive")?;
        Ok(Self { nu, mass })
    }

    pub fn from_lattice(lattice: &LatticeParams, mass: f64) -> Result<Self> {
        Self::new(trap_frequency_from_depth(lattice, mass), mass)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.nu
    }
}

/// Ω = 2γ·sqrt(s/2).
pub fn rabi_from_saturation(s: f64, gamma: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("saturation parameter must be >= 0, got {s}")));
    }
    require(gamma > 0.0, "gamma", "must be positive")?;
    Ok(2.0 * gamma * (s / 2.0).sqrt())
}

/// s = 2(Ω/2γ)².
pub fn saturation_from_rabi(omega: f64, gamma: f64) -> Result<f64> {
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("Rabi frequency must be >= 0, got {omega}")));
    }
    require(gamma > 0.0, "gamma", "must be positive")?;
    let r = omega / (2.0 * gamma);
    Ok(2.0 * r * r)
}

/// Harmonic frequency of the lattice well, ν = (π/a)·sqrt(2U0/m).
pub fn trap_frequency_from_depth(lattice: &LatticeParams, mass: f64) -> f64 {
    lattice.wavenumber() * (2.0 * lattice.depth_u0 / mass).sqrt()
}

/// Δ = Δ̃ + (U_g(0) - U_e(0))/ħ = Δ̃ - U0(1-χ)/ħ.
pub fn detuning_at_bottom(detuning_free_space: f64, lattice: &LatticeParams) -> f64 {
    detuning_free_space - lattice.trap_shift()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const GAMMA: f64 = 2.0 * PI * 3.0e6;

    #[test]
    fn rabi_examples() {
        assert_eq!(rabi_from_saturation(0.0, GAMMA).unwrap(), 0.0);
        assert_relative_eq!(
            rabi_from_saturation(0.5, GAMMA).unwrap(),
            2.0 * PI * 3.0e6,
            max_relative = 1e-14
        );
        // 2·3 MHz·sqrt(0.0285) = 1.01292 MHz
        let w = rabi_from_saturation(0.057, GAMMA).unwrap();
        assert_relative_eq!(angular_to_hz(w), 6.0e6 * (0.0285f64).sqrt(), max_relative = 1e-12);
        assert!((angular_to_hz(w) - 1.013e6).abs() < 1e3);
        assert_relative_eq!(saturation_from_rabi(w, GAMMA).unwrap(), 0.057, max_relative = 1e-12);
    }

    #[test]
    fn negative_saturation_is_domain_error() {
        assert!(matches!(rabi_from_saturation(-0.1, GAMMA), Err(Error::Domain(_))));
        assert!(matches!(saturation_from_rabi(-1.0, GAMMA), Err(Error::Domain(_))));
    }

    #[test]
    fn trap_frequency_of_the_868nm_lattice() {
        let lat = LatticeParams::rb87_868nm();
        let nu = trap_frequency_from_depth(&lat, RB87_MASS);
        let f = angular_to_hz(nu);
        assert!((f - 356e3).abs() < 1.5e3, "got {f}");
        assert!((f / 350e3 - 1.0).abs() < 0.05);

        let deeper = LatticeParams::new(lat.period_a, 4.0 * lat.depth_u0, lat.chi).unwrap();
        assert_relative_eq!(
            trap_frequency_from_depth(&deeper, RB87_MASS),
            2.0 * nu,
            max_relative = 1e-14
        );
        let wider = LatticeParams::new(2.0 * lat.period_a, lat.depth_u0, lat.chi).unwrap();
        assert_relative_eq!(
            trap_frequency_from_depth(&wider, RB87_MASS),
            0.5 * nu,
            max_relative = 1e-14
        );
    }

    #[test]
    fn trap_frequency_matches_curvature() {
        let lat = LatticeParams::rb87_868nm();
        let h = 1e-10;
        let curvature =
            (lat.ground_potential(h) - 2.0 * lat.ground_potential(0.0) + lat.ground_potential(-h)) / (h * h);
        let nu_fd = (curvature / RB87_MASS).sqrt();
        let nu = trap_frequency_from_depth(&lat, RB87_MASS);
        assert_relative_eq!(nu_fd, nu, max_relative = 1e-6);
    }

    #[test]
    fn bottom_detuning_examples() {
        let lat = LatticeParams::rb87_868nm();
        assert_eq!(detuning_at_bottom(lat.trap_shift(), &lat), 0.0);

        let equal = LatticeParams::new(lat.period_a, lat.depth_u0, 1.0).unwrap();
        assert_eq!(detuning_at_bottom(1.234e7, &equal), 1.234e7);

        let d = angular_to_hz(detuning_at_bottom(0.0, &lat));
        assert!((d + 16.56e6).abs() < 0.05e6, "got {d}");
    }

    #[test]
    fn species_recoil() {
        let rb = AtomSpecies::rubidium87();
        assert_relative_eq!(rb.recoil_momentum * rb.repump_wavelength, PLANCK, max_relative = 1e-15);
        assert!(AtomSpecies::new(-1.0, GAMMA, 795e-9).is_err());
        assert!(AtomSpecies::new(1e-25, 0.0, 795e-9).is_err());
    }

    #[test]
    fn repumper_from_rabi_keeps_rabi() {
        let lat = LatticeParams::rb87_868nm();
        let f = RepumperField::from_rabi(2.0 * PI * 1e6, GAMMA, 0.0, &lat).unwrap();
        assert_eq!(f.rabi_omega, 2.0 * PI * 1e6);
        assert_relative_eq!(
            rabi_from_saturation(f.saturation_s, GAMMA).unwrap(),
            f.rabi_omega,
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn saturation_round_trip(log_s in -4.0f64..1.0) {
            let s = 10f64.powf(log_s);
            let back = saturation_from_rabi(rabi_from_saturation(s, GAMMA).unwrap(), GAMMA).unwrap();
            prop_assert!(((back - s) / s).abs() < 1e-12);
        }

        #[test]
        fn bottom_detuning_is_affine(d in -1e9f64..1e9, u_uk in 10.0f64..2000.0) {
            let lat = LatticeParams::new(434e-9, microkelvin_to_joule(u_uk), -0.59).unwrap();
            let lat2 = LatticeParams::new(434e-9, 2.0 * microkelvin_to_joule(u_uk), -0.59).unwrap();
            let base = detuning_at_bottom(0.0, &lat);
            prop_assert!((detuning_at_bottom(d, &lat) - (d + base)).abs() <= 1e-6 * (d.abs() + base.abs()));
            prop_assert!((detuning_at_bottom(0.0, &lat2) - 2.0 * base).abs() <= 1e-9 * base.abs());
        }
    }
}
