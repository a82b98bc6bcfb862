//! Numerical certification of the iteration-wise inequalities that the
//! convergence statements rest on.
//!
//! Each check evaluates, along a recorded trajectory, the residual
//! `LHS - RHS` of one inequality per iteration (positive means satisfied
//! with slack) and reports a verdict against a relative tolerance. The
//! lifted-map selections come from the step plans, so the checks are
//! independent of how a particular solver derived its update.

pub mod gap;
pub mod subspace;
pub mod threepoint;

use serde::Serialize;

use crate::engine::{InclusionWitness, TrajectoryLog};
use crate::error::{Error, Result};
use crate::linops::{pair, seminorm_sq, vsub, BlockVec, LinearMap};
use crate::problems::CompositeProblem;

pub use gap::{
    check_di_gap, ergodic_gap_series, ergodic_points, ergodic_value_gap_series, gap,
    h_gap_identity_defect, preliminary_gap, primal_objective, ErgodicMode,
};
pub use subspace::{subspace_chain, SubspaceReport};
pub use threepoint::{three_point_suite, ThreePointInequality, ThreePointReport};

/// Default relative tolerance of the certificate verdicts.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one inequality check along a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    /// Inequality identifier (`CI~`, `CI`, `QF`, `DI`, `CI-Γ`, `D𝓔`,
    /// `DI-𝒢`, `value-DI`).
    pub name: String,
    pub verdict: Verdict,
    pub min_residual: f64,
    /// Characteristic magnitude used for the relative tolerance.
    pub scale: f64,
    pub n_iterations: usize,
    pub worst_index: usize,
    #[serde(skip)]
    pub per_iteration_residuals: Vec<f64>,
}

impl CertificateReport {
    fn from_residuals(name: &str, residuals: Vec<f64>, scale: f64, tol: f64) -> Self {
        let (mut min_residual, mut worst_index) = (f64::INFINITY, 0);
        for (i, r) in residuals.iter().enumerate() {
            if *r < min_residual {
                min_residual = *r;
                worst_index = i;
            }
        }
        if residuals.is_empty() {
            min_residual = 0.0;
        }
        let verdict = if min_residual >= -tol * scale { Verdict::Pass } else { Verdict::Fail };
        CertificateReport {
            name: name.into(),
            verdict,
            min_residual,
            scale,
            n_iterations: residuals.len(),
            worst_index,
            per_iteration_residuals: residuals,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Characteristic magnitude: tested quantities grow with the test weights,
/// so tolerances scale as `max(1, ‖u⁰-u*‖²·φ_max)`.
pub(crate) fn trajectory_scale(traj: &TrajectoryLog, u_star: &BlockVec) -> f64 {
    let phi_max = traj
        .plans
        .iter()
        .filter_map(|p| p.scalars.phi)
        .fold(1.0f64, f64::max);
    let d0 = traj.iterates[0].sub(u_star).norm_sq();
    (d0 * phi_max).max(1.0)
}

fn require_u_star<'a>(traj: &'a TrajectoryLog, u_star: Option<&'a BlockVec>) -> Result<&'a BlockVec> {
    u_star
        .or(traj.u_star.as_ref())
        .ok_or_else(|| Error::Missing("certificate needs a solution point".into()))
}

/// Quantitative Féjer monotonicity: per step,
/// `½‖uⁱ-u*‖²_{Z_{i+1}M_{i+1}} + Δ_{i+1}(u*) ≥ ½‖uⁱ⁺¹-u*‖²_{Z_{i+2}M_{i+2}}`.
/// The terminal metric comes from the last plan's declared next metric.
pub fn check_qf(traj: &TrajectoryLog, u_star: Option<&BlockVec>, tol: f64) -> Result<CertificateReport> {
    let us = require_u_star(traj, u_star)?;
    let mut residuals = Vec::with_capacity(traj.n_steps());
    for (i, plan) in traj.plans.iter().enumerate() {
        let u_prev = &traj.iterates[i];
        let u_next = &traj.iterates[i + 1];
        let before = 0.5 * seminorm_sq(&plan.zm, u_prev.sub(us).as_slice());
        let after = 0.5 * seminorm_sq(&plan.zm_next, u_next.sub(us).as_slice());
        let delta = (plan.delta)(u_next, u_prev, us);
        residuals.push(before + delta - after);
    }
    Ok(CertificateReport::from_residuals("QF", residuals, trajectory_scale(traj, us), tol))
}

/// Which reconstruction the fundamental condition uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CiVariant {
    /// Lifted form: the selection is `H̃(u⁺) = -M(u⁺-uⁱ)`, exact by the
    /// step inclusion.
    Tilde,
    /// Structured form: `W[H(u⁺)-H(u*)] + V'(u⁺)` with the `H(u⁺)`
    /// selection recovered from prox residuals and `H(u*) ∋ 0`.
    Plain,
}

/// The fundamental condition: per step,
/// `⟨H̃(u⁺), u⁺-u*⟩_{Z_{i+1}} ≥ ½‖u⁺-u*‖²_{Z_{i+2}M_{i+2}-Z_{i+1}M_{i+1}}
///  - ½‖u⁺-uⁱ‖²_{Z_{i+1}M_{i+1}} - Δ_{i+1}(u*)`.
pub fn check_ci(
    traj: &TrajectoryLog,
    u_star: Option<&BlockVec>,
    variant: CiVariant,
    tol: f64,
) -> Result<CertificateReport> {
    let us = require_u_star(traj, u_star)?;
    let mut residuals = Vec::with_capacity(traj.n_steps());
    for (i, plan) in traj.plans.iter().enumerate() {
        let u_prev = &traj.iterates[i];
        let u_next = &traj.iterates[i + 1];
        let diff = u_next.sub(us);
        let h = match variant {
            CiVariant::Tilde => plan.h_tilde(u_next, u_prev),
            CiVariant::Plain => plan.wh_plus_vprime(u_next),
        };
        let lhs = pair(&plan.z, &h, diff.as_slice());
        let metric_growth =
            0.5 * (seminorm_sq(&plan.zm_next, diff.as_slice()) - seminorm_sq(&plan.zm, diff.as_slice()));
        let step = vsub(u_next.as_slice(), u_prev.as_slice());
        let step_term = 0.5 * seminorm_sq(&plan.zm, &step);
        let delta = (plan.delta)(u_next, u_prev, us);
        residuals.push(lhs - metric_growth + step_term + delta);
    }
    let name = match variant {
        CiVariant::Tilde => "CI~",
        CiVariant::Plain => "CI",
    };
    Ok(CertificateReport::from_residuals(name, residuals, trajectory_scale(traj, us), tol))
}

/// Descent inequality, evaluated as a running residual for every horizon:
/// `½‖u⁰-u*‖²_{Z₁M₁} + Σ_{i<N} Δ_{i+1}(u*) - ½‖u^N-u*‖²_{Z_{N+1}M_{N+1}} ≥ 0`.
pub fn check_di(traj: &TrajectoryLog, u_star: Option<&BlockVec>, tol: f64) -> Result<CertificateReport> {
    let us = require_u_star(traj, u_star)?;
    let initial = 0.5 * seminorm_sq(&traj.plans[0].zm, traj.iterates[0].sub(us).as_slice());
    let mut residuals = Vec::with_capacity(traj.n_steps());
    let mut delta_sum = 0.0;
    for (i, plan) in traj.plans.iter().enumerate() {
        let u_prev = &traj.iterates[i];
        let u_next = &traj.iterates[i + 1];
        delta_sum += (plan.delta)(u_next, u_prev, us);
        let end = 0.5 * seminorm_sq(&plan.zm_next, u_next.sub(us).as_slice());
        residuals.push(initial + delta_sum - end);
    }
    Ok(CertificateReport::from_residuals("DI", residuals, trajectory_scale(traj, us), tol))
}

/// The fundamental inequality for saddle-point problems: per step,
/// `½‖u⁺-uⁱ‖²_{Z(M-Q(L_i))} + ½‖u⁺-u*‖²_{Z(Γ̂(Γ̃)+M)-Z'M'}
///  + ⟨V'(u⁺)-V::J(u⁺), u⁺-u*⟩_Z + Δ ≥ 0`,
/// with the operator lift `Γ̂(Γ̃) = [[2T_iΓ̃, 2T_iK*], [-2Σ_{i+1}K, 0]]`
/// and the smoothness block `Q(L) = diag(L·T_i, 0)` assembled from the
/// plan's saddle data. `gamma_tilde` acts on the primal space; `l_factor`
/// scales the claimed co-coercivity constant (½ for the iterate regime,
/// 1 for the gap regime).
pub fn check_ci_gamma(
    traj: &TrajectoryLog,
    u_star: Option<&BlockVec>,
    gamma_tilde: &LinearMap,
    l_factor: f64,
    tol: f64,
) -> Result<CertificateReport> {
    let us = require_u_star(traj, u_star)?;
    let mut residuals = Vec::with_capacity(traj.n_steps());
    for (i, plan) in traj.plans.iter().enumerate() {
        let sad = plan
            .saddle
            .as_ref()
            .ok_or_else(|| Error::Missing("saddle certificate on a non-saddle plan".into()))?;
        let tau = plan.scalars.tau.ok_or_else(|| Error::Missing("scalar step missing".into()))?;
        let sigma = plan.scalars.sigma.ok_or_else(|| Error::Missing("scalar dual step missing".into()))?;
        let (nx, ny) = (sad.k.dim_in(), sad.k.dim_out());
        let u_prev = &traj.iterates[i];
        let u_next = &traj.iterates[i + 1];
        let diff = u_next.sub(us);
        let step = vsub(u_next.as_slice(), u_prev.as_slice());

        let q = LinearMap::block2(
            LinearMap::scaled_identity(nx, l_factor * sad.l_coco * tau),
            LinearMap::zero(nx, ny),
            LinearMap::zero(ny, nx),
            LinearMap::zero(ny, ny),
        );
        let glift = LinearMap::block2(
            gamma_tilde.scale(2.0 * tau),
            sad.k.adjoint().scale(2.0 * tau),
            sad.k.scale(-2.0 * sigma),
            LinearMap::zero(ny, ny),
        );
        let first = 0.5 * seminorm_sq(&plan.z.compose(&plan.m.sub(&q)), &step);
        let second_map = plan.z.compose(&glift.add(&plan.m)).sub(&plan.zm_next);
        let second = 0.5 * seminorm_sq(&second_map, diff.as_slice());
        let vp = plan
            .vprime
            .as_ref()
            .map(|f| f(u_next.as_slice()))
            .unwrap_or_else(|| vec![0.0; u_next.dim()]);
        let vj = sad
            .vj
            .as_ref()
            .map(|f| f(u_next.as_slice()))
            .unwrap_or_else(|| vec![0.0; u_next.dim()]);
        let third = pair(&plan.z, &vsub(&vp, &vj), diff.as_slice());
        let delta = (plan.delta)(u_next, u_prev, us);
        residuals.push(first + second + third + delta);
    }
    Ok(CertificateReport::from_residuals("CI-Γ", residuals, trajectory_scale(traj, us), tol))
}

/// Function-value descent: for every horizon `N`,
/// `φ_N/2·‖u^N-u*‖² + Σ_{i<N} φ_iτ_i([G+J](uⁱ⁺¹) - [G+J](u*)) ≤ φ₀/2·‖u⁰-u*‖²`.
pub fn check_value_di(
    traj: &TrajectoryLog,
    problem: &CompositeProblem,
    u_star: Option<&BlockVec>,
    tol: f64,
) -> Result<CertificateReport> {
    let us = require_u_star(traj, u_star)?;
    let v_star = problem.value(us.as_slice());
    let c0 = 0.5 * seminorm_sq(&traj.plans[0].zm, traj.iterates[0].sub(us).as_slice());
    let mut weighted_gaps = 0.0;
    let mut residuals = Vec::with_capacity(traj.n_steps());
    for (i, plan) in traj.plans.iter().enumerate() {
        let phi = plan.scalars.phi.ok_or_else(|| Error::Missing("test weight missing".into()))?;
        let tau = plan.scalars.tau.ok_or_else(|| Error::Missing("scalar step missing".into()))?;
        let u_next = &traj.iterates[i + 1];
        weighted_gaps += phi * tau * (problem.value(u_next.as_slice()) - v_star);
        let end = 0.5 * seminorm_sq(&plan.zm_next, u_next.sub(us).as_slice());
        residuals.push(c0 - end - weighted_gaps);
    }
    Ok(CertificateReport::from_residuals("value-DI", residuals, trajectory_scale(traj, us), tol))
}

/// Monotone-descent property of resolvent steps: per step, with the
/// subgradient selection of the prox,
/// `0 ≤ τ⁻¹‖u⁺-uⁱ‖² = ⟨∂G(u⁺), uⁱ-u⁺⟩ ≤ G(uⁱ) - G(u⁺)`.
/// Returns the per-step slack `G(uⁱ) - G(u⁺) - ⟨sel, uⁱ-u⁺⟩` after
/// asserting the inner identity.
pub fn check_prox_monotone(
    traj: &TrajectoryLog,
    problem: &CompositeProblem,
    tol: f64,
) -> Result<CertificateReport> {
    let mut residuals = Vec::with_capacity(traj.n_steps());
    for (i, plan) in traj.plans.iter().enumerate() {
        let tau = plan.scalars.tau.ok_or_else(|| Error::Missing("scalar step missing".into()))?;
        let u_prev = &traj.iterates[i];
        let u_next = &traj.iterates[i + 1];
        let sel = match &plan.witness {
            InclusionWitness::Forward { h_sel } => h_sel.clone(),
            _ => return Err(Error::Missing("prox monotonicity needs a forward witness".into())),
        };
        let back = vsub(u_prev.as_slice(), u_next.as_slice());
        let inner = crate::linops::dot(&sel, &back);
        let step_sq = crate::linops::dot(&back, &back) / tau;
        if (inner - step_sq).abs() > 1e-10 * (1.0 + inner.abs()) {
            return Err(Error::Invalid(format!(
                "selection identity broke at step {i}: {inner} vs {step_sq}"
            )));
        }
        let drop = problem.value(u_prev.as_slice()) - problem.value(u_next.as_slice());
        residuals.push(drop - inner);
    }
    let scale = traj
        .iterates
        .iter()
        .map(|u| problem.value(u.as_slice()).abs())
        .fold(1.0f64, f64::max);
    Ok(CertificateReport::from_residuals("value-DI", residuals, scale, tol).renamed("prox-monotone"))
}

impl CertificateReport {
    fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_plain, RunOptions};
    use crate::problems::catalog::{quadratic, QuadraticParams};
    use crate::solvers::{make_prox, ProxSchedule};
    use approx::assert_relative_eq;

    fn prox_toy_log(n: usize) -> TrajectoryLog {
        let p = quadratic(&QuadraticParams::default()).unwrap().as_composite().unwrap().clone();
        let mut s = make_prox(&p, 1.0, 0.0, ProxSchedule::Constant).unwrap();
        let opts = RunOptions { u_star: Some(BlockVec::from_vec(vec![0.0])), ..Default::default() };
        run_plain(&mut s, &BlockVec::from_vec(vec![1.0]), n, &opts).unwrap()
    }

    #[test]
    fn qf_hand_value_on_prox_toy() {
        // u¹ = ½, Δ = -½(u¹-u⁰)² = -⅛: residual ½·1 - ⅛ - ½·¼ = ¼
        let log = prox_toy_log(1);
        let rep = check_qf(&log, None, DEFAULT_TOL).unwrap();
        assert_relative_eq!(rep.per_iteration_residuals[0], 0.25);
        assert!(rep.passed());
    }

    #[test]
    fn ci_hand_value_on_prox_toy() {
        let log = prox_toy_log(1);
        for variant in [CiVariant::Tilde, CiVariant::Plain] {
            let rep = check_ci(&log, None, variant, DEFAULT_TOL).unwrap();
            assert_relative_eq!(rep.per_iteration_residuals[0], 0.25);
        }
    }

    #[test]
    fn qf_at_fixed_point_is_zero() {
        let p = quadratic(&QuadraticParams::default()).unwrap().as_composite().unwrap().clone();
        let mut s = make_prox(&p, 1.0, 0.0, ProxSchedule::Constant).unwrap();
        let opts = RunOptions { u_star: Some(BlockVec::from_vec(vec![0.0])), ..Default::default() };
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![0.0]), 3, &opts).unwrap();
        let rep = check_qf(&log, None, DEFAULT_TOL).unwrap();
        for r in &rep.per_iteration_residuals {
            assert_eq!(*r, 0.0);
        }
        let rep = check_ci(&log, None, CiVariant::Tilde, DEFAULT_TOL).unwrap();
        for r in &rep.per_iteration_residuals {
            assert_eq!(*r, 0.0);
        }
    }

    #[test]
    fn qf_telescopes_to_di() {
        let log = prox_toy_log(25);
        let qf = check_qf(&log, None, DEFAULT_TOL).unwrap();
        let di = check_di(&log, None, DEFAULT_TOL).unwrap();
        let mut running = 0.0;
        for (i, r) in qf.per_iteration_residuals.iter().enumerate() {
            running += r;
            assert!(
                (running - di.per_iteration_residuals[i]).abs() <= 1e-12 * (1.0 + running.abs()),
                "telescoping broke at {i}"
            );
        }
    }

    #[test]
    fn di_accumulates_positive_slack() {
        let log = prox_toy_log(3);
        let di = check_di(&log, None, DEFAULT_TOL).unwrap();
        assert!(di.passed());
        assert!(di.per_iteration_residuals.iter().all(|r| *r > 0.0));
    }

    #[test]
    fn prox_monotone_on_quadratic() {
        let log = prox_toy_log(10);
        let p = quadratic(&QuadraticParams::default()).unwrap().as_composite().unwrap().clone();
        let rep = check_prox_monotone(&log, &p, DEFAULT_TOL).unwrap();
        assert!(rep.passed());
        // strict decrease of values along the run
        let vals: Vec<f64> = log.iterates.iter().map(|u| p.value(u.as_slice())).collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn accelerated_di_keeps_weighted_error_bounded() {
        // with Δ = 0: φ_N/2‖u^N-u*‖² ≤ φ₀/2‖u⁰-u*‖²
        let p = quadratic(&QuadraticParams::default()).unwrap().as_composite().unwrap().clone();
        let mut s = make_prox(&p, 1.0, 1.0, ProxSchedule::Accelerated).unwrap();
        let opts = RunOptions { u_star: Some(BlockVec::from_vec(vec![0.0])), ..Default::default() };
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![1.0]), 200, &opts).unwrap();
        let di = check_di(&log, None, DEFAULT_TOL).unwrap();
        assert!(di.passed());
        let phi_n = log.plans.last().unwrap().scalars.phi.unwrap();
        let en = log.iterates.last().unwrap().as_slice()[0].powi(2);
        assert!(0.5 * phi_n * en <= 0.5 * 1.0 + 1e-12);
    }
}
