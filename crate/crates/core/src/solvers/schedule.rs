//! Scalar step-length/testing parameter schedules shared by the solvers.
//!
//! The testing weight φ is the primary state; derived quantities are
//! recomputed from it each step so the defining identities (τ = φ^{-1/2},
//! σ = φτ/ψ) hold by construction rather than by parallel recursions.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleRule {
    /// All parameters constant.
    Constant,
    /// τ_{i+1} = τ_i/√(1+2γτ_i), φ_{i+1} = φ_i(1+2γτ_i), τ_i = φ_i^{-1/2}.
    ProxAccel,
    /// Geometric step growth τ_{i+1} = c·τ_i with the same φ recursion;
    /// drives the superlinear regime of the proximal point method.
    ProxGrowing { factor: f64 },
    /// φ_{i+1} = φ_i(1 + τ_i(2γ - τ_iL²)); τ_i = φ_i^{-1/2} or constant τ₀.
    GdAccel { fixed_tau: bool },
    /// The variant recursion φ_{i+1} = φ_i(1 + τ_i(γ - τ_iL²)); also the
    /// rule of the function-value regime.
    GdAccelHalf { fixed_tau: bool },
    /// ω_i = 1/√(1+2γτ_i), τ_{i+1} = τ_iω_i, σ_{i+1} = σ_i/ω_i, ψ constant,
    /// σ_i = φ_iτ_i/ψ.
    CpAccel,
}

/// Scalar schedule state at iteration `i`.
#[derive(Clone, Debug)]
pub struct ScalarSchedule {
    pub rule: ScheduleRule,
    pub gamma: f64,
    pub l: f64,
    /// Constant dual testing weight ψ (primal-dual rules only).
    pub psi: f64,
    tau: f64,
    phi: f64,
    tau0: f64,
}

impl ScalarSchedule {
    pub fn constant(tau0: f64, phi0: f64) -> Self {
        ScalarSchedule { rule: ScheduleRule::Constant, gamma: 0.0, l: 0.0, psi: 1.0, tau: tau0, phi: phi0, tau0 }
    }

    pub fn prox_accel(tau0: f64, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::Precondition(format!(
                "acceleration undefined without strong monotonicity: gamma = {gamma}"
            )));
        }
        let phi0 = tau0.powi(-2);
        Ok(ScalarSchedule {
            rule: ScheduleRule::ProxAccel,
            gamma,
            l: 0.0,
            psi: 1.0,
            tau: phi0.powf(-0.5),
            phi: phi0,
            tau0,
        })
    }

    pub fn prox_growing(tau0: f64, gamma: f64, factor: f64) -> Result<Self> {
        if factor <= 1.0 {
            return Err(Error::Invalid(format!("growth factor must exceed 1, got {factor}")));
        }
        Ok(ScalarSchedule {
            rule: ScheduleRule::ProxGrowing { factor },
            gamma,
            l: 0.0,
            psi: 1.0,
            tau: tau0,
            phi: 1.0,
            tau0,
        })
    }

    pub fn gd_accel(tau0: f64, gamma: f64, l: f64, fixed_tau: bool, half: bool) -> Result<Self> {
        if !(tau0 * l * l < gamma) {
            return Err(Error::Precondition(format!(
                "accelerated-step initialization: tau0*L^2 = {} >= gamma = {}",
                tau0 * l * l,
                gamma
            )));
        }
        let phi0 = if fixed_tau { 1.0 } else { tau0.powi(-2) };
        let rule =
            if half { ScheduleRule::GdAccelHalf { fixed_tau } } else { ScheduleRule::GdAccel { fixed_tau } };
        Ok(ScalarSchedule {
            rule,
            gamma,
            l,
            psi: 1.0,
            tau: if fixed_tau { tau0 } else { phi0.powf(-0.5) },
            phi: phi0,
            tau0,
        })
    }

    /// Primal-dual schedule; ψ is pinned to 1/(σ₀τ₀) so that σ_i = φ_iτ_i/ψ
    /// reproduces σ₀ at i = 0. With γ = 0 everything stays constant.
    pub fn cp_accel(tau0: f64, sigma0: f64, gamma: f64) -> Self {
        let phi0 = tau0.powi(-2);
        ScalarSchedule {
            rule: ScheduleRule::CpAccel,
            gamma,
            l: 0.0,
            psi: 1.0 / (sigma0 * tau0),
            tau: phi0.powf(-0.5),
            phi: phi0,
            tau0,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// σ_i = φ_iτ_i/ψ (primal-dual rules).
    pub fn sigma(&self) -> f64 {
        self.phi * self.tau / self.psi
    }

    /// φ_{i+1} under the rule.
    pub fn phi_next(&self) -> f64 {
        match self.rule {
            ScheduleRule::Constant => self.phi,
            ScheduleRule::ProxAccel | ScheduleRule::ProxGrowing { .. } | ScheduleRule::CpAccel => {
                self.phi * (1.0 + 2.0 * self.gamma * self.tau)
            }
            ScheduleRule::GdAccel { .. } => {
                self.phi * (1.0 + self.tau * (2.0 * self.gamma - self.tau * self.l * self.l))
            }
            ScheduleRule::GdAccelHalf { .. } => {
                self.phi * (1.0 + self.tau * (self.gamma - self.tau * self.l * self.l))
            }
        }
    }

    /// τ_{i+1} under the rule.
    pub fn tau_next(&self) -> f64 {
        match self.rule {
            ScheduleRule::Constant => self.tau,
            ScheduleRule::ProxGrowing { factor } => self.tau * factor,
            ScheduleRule::GdAccel { fixed_tau } | ScheduleRule::GdAccelHalf { fixed_tau } => {
                if fixed_tau {
                    self.tau0
                } else {
                    self.phi_next().powf(-0.5)
                }
            }
            ScheduleRule::ProxAccel | ScheduleRule::CpAccel => self.phi_next().powf(-0.5),
        }
    }

    /// σ_{i+1} (primal-dual rules).
    pub fn sigma_next(&self) -> f64 {
        self.phi_next() * self.tau_next() / self.psi
    }

    /// Over-relaxation ω_i = τ_{i+1}/τ_i; equals 1/√(1+2γτ_i) under the
    /// primal-dual rule.
    pub fn omega(&self) -> f64 {
        self.tau_next() / self.tau
    }

    pub fn advance(&mut self) {
        let (tau, phi) = (self.tau_next(), self.phi_next());
        self.tau = tau;
        self.phi = phi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn prox_accel_recursions_hold_exactly() {
        let mut s = ScalarSchedule::prox_accel(1.0, 1.0).unwrap();
        for _ in 0..200 {
            let (tau, phi) = (s.tau(), s.phi());
            // τ_i = φ_i^{-1/2} bitwise by construction
            assert_eq!(tau.to_bits(), phi.powf(-0.5).to_bits());
            let tau_next = s.tau_next();
            assert!(rel(tau_next, tau / (1.0 + 2.0 * tau).sqrt()) <= 1e-14);
            assert!(rel(s.phi_next(), phi * (1.0 + 2.0 * tau)) <= 1e-14);
            s.advance();
        }
    }

    #[test]
    fn prox_accel_first_step_value() {
        // τ₁ = τ₀/√(1+2γτ₀) = 1/√3 at γ = 1, τ₀ = 1
        let mut s = ScalarSchedule::prox_accel(1.0, 1.0).unwrap();
        s.advance();
        assert!(rel(s.tau(), 1.0 / 3.0f64.sqrt()) <= 1e-14);
    }

    #[test]
    fn gd_accel_requires_initialization_bound() {
        assert!(ScalarSchedule::gd_accel(0.5, 1.0, 1.0, true, false).is_ok()); // 0.5 < 1
        let err = ScalarSchedule::gd_accel(0.6, 1.0, 2.0, true, false).unwrap_err(); // 2.4 >= 1
        assert!(err.to_string().contains("tau0*L^2"));
    }

    #[test]
    fn cp_accel_identities() {
        let mut s = ScalarSchedule::cp_accel(0.9, 0.9, 1.0);
        assert!(rel(s.sigma(), 0.9) <= 1e-14);
        for _ in 0..100 {
            let omega_direct = 1.0 / (1.0 + 2.0 * s.gamma * s.tau()).sqrt();
            assert!(rel(s.omega(), omega_direct) <= 1e-14);
            assert!(rel(s.sigma_next(), s.sigma() / s.omega()) <= 1e-13);
            assert!(rel(s.sigma(), s.phi() * s.tau() / s.psi) <= 1e-14);
            // σ_iτ_iψ = 1 under τ_i = φ_i^{-1/2}
            assert!(rel(s.sigma() * s.tau() * s.psi, 1.0) <= 1e-13);
            s.advance();
        }
    }

    #[test]
    fn cp_unaccelerated_is_constant() {
        let mut s = ScalarSchedule::cp_accel(0.35, 0.35, 0.0);
        let (t0, s0, p0) = (s.tau(), s.sigma(), s.phi());
        for _ in 0..50 {
            s.advance();
        }
        assert_eq!(s.tau().to_bits(), t0.to_bits());
        assert_eq!(s.sigma().to_bits(), s0.to_bits());
        assert_eq!(s.phi().to_bits(), p0.to_bits());
    }
}
