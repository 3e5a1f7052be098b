//! Differential light shift of the Raman resonance induced by the repumper.
//!
//! Two-level model (exact non-Hermitian eigenvalue and its first-order
//! expansion), the three-level steady state with Raman coupling, and the
//! shift averaged over the harmonic oscillation of a trapped atom.
//!
//! Detunings and shifts are angular frequencies (rad/s); γ is the
//! half-linewidth of the repumping transition.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::phys::{constants::HBAR, LatticeParams, TrapOscillator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelModel {
    pub gamma: f64,
    pub saturation_s: f64,
}

impl TwoLevelModel {
    pub fn new(gamma: f64, saturation_s: f64) -> Result<Self> {
        require(gamma > 0.0 && gamma.is_finite(), "gamma", "must be positive")?;
        require(
            saturation_s >= 0.0 && saturation_s.is_finite(),
            "saturation_s",
            "must be non-negative",
        )?;
        Ok(Self { gamma, saturation_s })
    }
}

/// Closed three-level cycle: repumper (Ω, Δ) plus Raman coupling (Ω̃, δ').
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelModel {
    pub repump_rabi_omega: f64,
    pub raman_rabi: f64,
    /// Γ = 2(γ1 + γ2).
    pub atomic_linewidth: f64,
    /// α = γ2 / (γ1 + γ2).
    pub repump_efficiency_alpha: f64,
}

impl ThreeLevelModel {
    pub fn new(
        repump_rabi_omega: f64,
        raman_rabi: f64,
        atomic_linewidth: f64,
        repump_efficiency_alpha: f64,
    ) -> Result<Self> {
        require(repump_rabi_omega >= 0.0, "repump_rabi_omega", "must be non-negative")?;
        require(raman_rabi >= 0.0, "raman_rabi", "must be non-negative")?;
        require(atomic_linewidth > 0.0, "atomic_linewidth", "must be positive")?;
        require(
            repump_efficiency_alpha > 0.0 && repump_efficiency_alpha <= 1.0,
            "repump_efficiency_alpha",
            "must lie in (0, 1]",
        )?;
        Ok(Self {
            repump_rabi_omega,
            raman_rabi,
            atomic_linewidth,
            repump_efficiency_alpha,
        })
    }

    /// The steady-state expression assumes Γ ≫ Ω ≫ Ω̃. Outside that ordering
    /// results are still computed; callers may warn.
    pub fn in_validity_regime(&self) -> bool {
        self.atomic_linewidth > self.repump_rabi_omega && self.repump_rabi_omega > self.raman_rabi
    }
}

/// An atom oscillating in a lattice well with total oscillation energy E_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatingAtom {
    pub kinetic_energy: f64,
    pub trap: TrapOscillator,
    pub lattice: LatticeParams,
}

impl OscillatingAtom {
    pub fn new(kinetic_energy: f64, trap: TrapOscillator, lattice: LatticeParams) -> Result<Self> {
        require(
            kinetic_energy >= 0.0 && kinetic_energy.is_finite(),
            "kinetic_energy",
            "must be non-negative",
        )?;
        Ok(Self {
            kinetic_energy,
            trap,
            lattice,
        })
    }

    /// Harmonic amplitude sqrt(2E_k / mν²).
    pub fn amplitude(&self) -> f64 {
        (2.0 * self.kinetic_energy / (self.trap.mass * self.trap.nu * self.trap.nu)).sqrt()
    }

    pub fn position(&self, t: f64) -> f64 {
        self.amplitude() * (self.trap.nu * t).sin()
    }
}

/// First-order shift (Δ/2)·γ²/(Δ²+γ²)·s.
pub fn shift_linear(model: &TwoLevelModel, delta: f64) -> f64 {
    let g2 = model.gamma * model.gamma;
    0.5 * delta * g2 / (delta * delta + g2) * model.saturation_s
}

/// Real part of the light-shifted ground-state eigenvalue of
/// H = ħ[[-Δ-iγ, Ω/2], [Ω/2, 0]], divided by ħ.
///
/// The square root is taken on the branch with positive imaginary part,
/// which is the branch continuously connected to the uncoupled ground state
/// (root Δ+iγ at s = 0). For s > 1/2 the two eigenvalues cross at Δ = 0 and
/// the shift jumps between ±sqrt(2s-1)γ/2; there the odd-symmetric value 0
/// is returned.
pub fn shift_exact(model: &TwoLevelModel, delta: f64) -> f64 {
    let g = model.gamma;
    let s = model.saturation_s;
    if delta == 0.0 {
        return 0.0;
    }
    let z = Complex64::new((2.0 * s - 1.0) * g * g + delta * delta, 2.0 * g * delta);
    let mut w = z.sqrt();
    if w.im < 0.0 {
        w = -w;
    }
    // 0.5·Re(w - c) with c = Δ + iγ, rewritten as sγ²·Re(1/(w + c)) so
    // that it vanishes exactly at s = 0 instead of through cancellation.
    let c = Complex64::new(delta, g);
    s * g * g * (1.0 / (w + c)).re
}

/// Ω²Ω̃² / (2Ω̃²(Γ²+4Δ²) + 4αδ'²Γ² + α(Ω²+4δ'δ̃)²), δ̃ = Δ - δ'.
pub fn rho_ee_steady(model: &ThreeLevelModel, delta_big: f64, delta_prime: f64) -> f64 {
    let num = (model.repump_rabi_omega * model.raman_rabi).powi(2);
    if num == 0.0 {
        return 0.0;
    }
    num / three_level_denominator(model, delta_big, delta_prime)
}

fn three_level_denominator(model: &ThreeLevelModel, delta_big: f64, delta_prime: f64) -> f64 {
    let om2 = model.repump_rabi_omega * model.repump_rabi_omega;
    let omt2 = model.raman_rabi * model.raman_rabi;
    let gg = model.atomic_linewidth * model.atomic_linewidth;
    let a = model.repump_efficiency_alpha;
    let rel = delta_big - delta_prime;
    let inner = om2 + 4.0 * delta_prime * rel;
    2.0 * omt2 * (gg + 4.0 * delta_big * delta_big) + 4.0 * a * delta_prime * delta_prime * gg + a * inner * inner
}

/// Coefficients (b, c, d) of the monic stationarity cubic
/// δ'³ + bδ'² + cδ' + d = 0.
pub fn optimal_detuning_cubic(model: &ThreeLevelModel, delta_big: f64) -> (f64, f64, f64) {
    let om2 = model.repump_rabi_omega * model.repump_rabi_omega;
    let gg = model.atomic_linewidth * model.atomic_linewidth;
    (
        -1.5 * delta_big,
        0.5 * delta_big * delta_big - 0.25 * om2 + 0.125 * gg,
        0.125 * delta_big * om2,
    )
}

/// Real roots of x³ + bx² + cx + d, each polished with Newton steps.
pub fn real_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut roots = if disc < 0.0 {
        // three distinct real roots (p < 0 here)
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * PI * k as f64 / 3.0).cos() + shift)
            .collect::<Vec<_>>()
    } else {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v + shift]
    };
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((*r + b) * *r + c) * *r + d;
            let df = (3.0 * *r + 2.0 * b) * *r + c;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// Two-photon detuning δ'_m that maximizes the three-level excited-state
/// population. Solves the stationarity cubic and, among its real roots,
/// keeps the one with the smallest denominator of ρ_ee (equivalently the
/// largest ρ_ee, and well defined even when Ω̃ = 0).
pub fn optimal_delta_prime(model: &ThreeLevelModel, delta_big: f64) -> Result<f64> {
    // work in units of Γ to keep the cubic well scaled
    let g = model.atomic_linewidth;
    let (b, c, d) = optimal_detuning_cubic(model, delta_big);
    let roots = real_cubic_roots(b / g, c / (g * g), d / (g * g * g));
    roots
        .into_iter()
        .map(|r| r * g)
        .filter(|r| r.is_finite())
        .min_by(|x, y| {
            three_level_denominator(model, delta_big, *x)
                .total_cmp(&three_level_denominator(model, delta_big, *y))
                .then(x.abs().total_cmp(&y.abs()))
        })
        .ok_or_else(|| Error::NoConvergence(format!("no finite root for Δ = {delta_big}")))
}

/// Δ(x) = Δ + m·ν²·x²·(1-χ)/(2ħ) in the harmonic approximation.
pub fn position_detuning(x: f64, delta: f64, trap: &TrapOscillator, lattice: &LatticeParams) -> f64 {
    delta + trap.mass * trap.nu * trap.nu * x * x * (1.0 - lattice.chi) / (2.0 * HBAR)
}

/// Position |x| at which Δ(x) = 0, if the harmonic well reaches resonance.
pub fn resonance_crossing(delta: f64, trap: &TrapOscillator, lattice: &LatticeParams) -> Option<f64> {
    let curvature = trap.mass * trap.nu * trap.nu * (1.0 - lattice.chi) / (2.0 * HBAR);
    if curvature == 0.0 {
        return if delta == 0.0 { Some(0.0) } else { None };
    }
    let x2 = -delta / curvature;
    (x2 >= 0.0).then(|| x2.sqrt())
}

/// Light shift averaged over one oscillation period, closed form.
///
/// Averaging 1/(c + b·sin²νt) over a period gives 1/sqrt(c(c+b)) with
/// c = Δ+iγ and b = (1-χ)E_k/ħ, so the mean first-order shift is
/// (s/2)·γ²·Re[1/(sqrt(c)·sqrt(c+b))]. Both factors lie in the upper half
/// plane, so principal roots are continuous and reduce to c at E_k = 0.
pub fn oscillation_averaged_shift(model: &TwoLevelModel, delta: f64, atom: &OscillatingAtom) -> f64 {
    let c = Complex64::new(delta, model.gamma);
    let b = (1.0 - atom.lattice.chi) * atom.kinetic_energy / HBAR;
    let root = c.sqrt() * (c + b).sqrt();
    0.5 * model.gamma * model.gamma * root.inv().re * model.saturation_s
}

/// Light shift averaged over one oscillation period by direct time
/// averaging of `shift_linear(Δ(x(t)))` on `n_steps` equally spaced times.
/// The integrand is smooth and periodic, so the rectangle rule converges
/// geometrically.
pub fn oscillation_averaged_shift_numerical(
    model: &TwoLevelModel,
    delta: f64,
    atom: &OscillatingAtom,
    n_steps: usize,
) -> f64 {
    let n = n_steps.max(1);
    let period = atom.trap.period();
    let sum: f64 = (0..n)
        .map(|i| {
            let t = period * i as f64 / n as f64;
            let x = atom.position(t);
            shift_linear(model, position_detuning(x, delta, &atom.trap, &atom.lattice))
        })
        .sum();
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::{constants::RB87_MASS, microkelvin_to_joule, rabi_from_saturation};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const GAMMA: f64 = 2.0 * PI * 3.0e6;

    fn two(s: f64) -> TwoLevelModel {
        TwoLevelModel::new(GAMMA, s).unwrap()
    }

    fn atom(e_uk: f64) -> OscillatingAtom {
        let lat = LatticeParams::rb87_868nm();
        let trap = TrapOscillator::from_lattice(&lat, RB87_MASS).unwrap();
        OscillatingAtom::new(microkelvin_to_joule(e_uk), trap, lat).unwrap()
    }

    #[test]
    fn linear_shift_examples() {
        let m = two(0.36);
        assert_eq!(shift_linear(&m, 0.0), 0.0);
        assert_relative_eq!(shift_linear(&m, GAMMA), 0.36 * GAMMA / 4.0, max_relative = 1e-14);
        assert_relative_eq!(shift_linear(&m, -GAMMA), -0.36 * GAMMA / 4.0, max_relative = 1e-14);
        let far = 1e3 * GAMMA;
        assert!(shift_linear(&m, far) > 0.0);
        assert!(shift_linear(&m, far) <= 0.36 * GAMMA * GAMMA / (2.0 * far));
    }

    #[test]
    fn exact_shift_uncoupled_is_zero() {
        let m = two(0.0);
        for k in -50..=50 {
            let d = k as f64 * 0.17 * GAMMA;
            assert!(shift_exact(&m, d).abs() < 1e-9 * GAMMA, "Δ={d}");
        }
    }

    #[test]
    fn exact_shift_close_to_linear_at_low_saturation() {
        let m = two(0.01);
        for k in -200..=200 {
            let d = k as f64 * 0.05 * GAMMA;
            let diff = (shift_exact(&m, d) - shift_linear(&m, d)).abs();
            assert!(diff < 0.01 * 0.01 * GAMMA, "Δ={d} diff={diff}");
        }
    }

    #[test]
    fn exact_shift_is_odd() {
        for s in [0.05, 0.36, 0.5, 1.5] {
            let m = two(s);
            for k in 1..400 {
                let d = k as f64 * 0.013 * GAMMA;
                assert!((shift_exact(&m, -d) + shift_exact(&m, d)).abs() < 1e-10 * GAMMA);
            }
        }
    }

    #[test]
    fn exact_shift_matches_eigenvalue() {
        // direct 2x2 eigenvalues: λ = (-(Δ+iγ) ± sqrt((Δ+iγ)² + Ω²)) / 2
        let s = 0.3;
        let m = two(s);
        let om = rabi_from_saturation(s, GAMMA).unwrap();
        for d in [-2.0 * GAMMA, -0.4 * GAMMA, 0.9 * GAMMA, 3.0 * GAMMA] {
            let a = Complex64::new(d, GAMMA);
            let r = (a * a + om * om).sqrt();
            let l1 = (-a + r) * 0.5;
            let l2 = (-a - r) * 0.5;
            // the ground-like eigenvalue has the smaller decay rate
            let ground = if l1.im.abs() < l2.im.abs() { l1 } else { l2 };
            assert_relative_eq!(shift_exact(&m, d), ground.re, max_relative = 1e-10);
        }
    }

    #[test]
    fn rho_ee_examples() {
        let g = 2.0 * GAMMA;
        let m = ThreeLevelModel::new(0.2 * g, 0.0, g, 0.5).unwrap();
        assert_eq!(rho_ee_steady(&m, 0.3 * g, 0.01 * g), 0.0);
        let m = ThreeLevelModel::new(0.0, 0.01 * g, g, 0.5).unwrap();
        assert_eq!(rho_ee_steady(&m, 0.3 * g, 0.01 * g), 0.0);

        let (om, omt) = (0.2 * g, 0.02 * g);
        let m = ThreeLevelModel::new(om, omt, g, 1.0).unwrap();
        let expect = om * om * omt * omt / (2.0 * omt * omt * g * g + om.powi(4));
        assert_relative_eq!(rho_ee_steady(&m, 0.0, 0.0), expect, max_relative = 1e-14);
    }

    #[test]
    fn cubic_solver_handles_all_cases() {
        // (x-1)(x-2)(x-3)
        let mut r = real_cubic_roots(-6.0, 11.0, -6.0);
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // x³ + x + 1: one real root ≈ -0.6823278
        let r = real_cubic_roots(0.0, 1.0, 1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 0.682_327_803_828_019_3).abs() < 1e-12);
    }

    #[test]
    fn optimal_delta_prime_at_zero_detuning() {
        let g = 2.0 * GAMMA;
        let m = ThreeLevelModel::new(0.2 * g, 0.02 * g, g, 0.5).unwrap();
        assert_eq!(optimal_delta_prime(&m, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn optimal_delta_prime_matches_grid_argmax() {
        let g = 2.0 * GAMMA;
        let m = ThreeLevelModel::new(0.2 * g, 0.02 * g, g, 0.5).unwrap();
        let delta = 0.5 * g;
        let n = 100_001;
        let step = 2.0 * g / (n - 1) as f64;
        let (best, _) = (0..n)
            .map(|i| -g + i as f64 * step)
            .map(|dp| (dp, rho_ee_steady(&m, delta, dp)))
            .fold((0.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
        let dm = optimal_delta_prime(&m, delta).unwrap();
        assert!((dm - best).abs() <= step, "{dm} vs {best}");
    }

    #[test]
    fn position_detuning_examples() {
        let a = atom(100.0);
        let d = -2.0 * PI * 3e6;
        assert_eq!(position_detuning(0.0, d, &a.trap, &a.lattice), d);
        let eq = LatticeParams::new(a.lattice.period_a, a.lattice.depth_u0, 1.0).unwrap();
        assert_eq!(position_detuning(50e-9, d, &a.trap, &eq), d);

        let x = resonance_crossing(d, &a.trap, &a.lattice).unwrap();
        assert!(position_detuning(x, d, &a.trap, &a.lattice).abs() < 1e-6 * d.abs());
        assert!(resonance_crossing(-d, &a.trap, &a.lattice).is_none());
    }

    #[test]
    fn averaged_shift_branch_at_rest() {
        // Re[((Δ²-γ²)+2iγΔ)^(-1/2)] on the branch continuous from -(Δ+iγ)
        for k in -30..=30 {
            let d = k as f64 * 0.2 * GAMMA + 0.01 * GAMMA;
            let c = Complex64::new(d, GAMMA);
            let root = -(c.sqrt() * c.sqrt());
            assert_relative_eq!(root.inv().re, -d / (d * d + GAMMA * GAMMA), max_relative = 1e-12);
        }
        let m = two(0.36);
        let a = atom(0.0);
        for k in -30..=30 {
            let d = k as f64 * 0.2 * GAMMA;
            let closed = oscillation_averaged_shift(&m, d, &a);
            assert!((closed - shift_linear(&m, d)).abs() <= 1e-9 * GAMMA * 0.36);
        }
    }

    #[test]
    fn averaged_shift_matches_quadrature() {
        let m = two(0.36);
        for e in [5.0, 50.0, 200.0] {
            let a = atom(e);
            for k in -20..=20 {
                let d = k as f64 * 0.3 * GAMMA;
                let closed = oscillation_averaged_shift(&m, d, &a);
                let quad = oscillation_averaged_shift_numerical(&m, d, &a, 10_000);
                if closed.abs() > 1e-6 * GAMMA * 0.36 {
                    assert!(((closed - quad) / closed).abs() < 1e-4, "E={e} Δ={d}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn linear_shift_odd(d in -1e9f64..1e9, s in 0.0f64..2.0) {
            let m = two(s);
            prop_assert_eq!(shift_linear(&m, -d), -shift_linear(&m, d));
        }

        #[test]
        fn exact_minus_linear_is_second_order(d in -20.0f64..20.0, s in 0.0f64..0.1) {
            let m = two(s);
            let diff = (shift_exact(&m, d * GAMMA) - shift_linear(&m, d * GAMMA)).abs();
            prop_assert!(diff <= 0.25 * s * s * GAMMA * (1.0 + 1e-6) + 1e-9);
        }

        #[test]
        fn cubic_root_has_small_residual(om in 0.0f64..0.5, d in -3.0f64..3.0) {
            let g = 2.0 * GAMMA;
            let m = ThreeLevelModel::new(om * g, 0.01 * g, g, 0.5).unwrap();
            let x = optimal_delta_prime(&m, d * g).unwrap();
            let (b, c, dd) = optimal_detuning_cubic(&m, d * g);
            let p = ((x + b) * x + c) * x + dd;
            prop_assert!(p.abs() < 1e-6 * g * g * g);
        }
    }
}
