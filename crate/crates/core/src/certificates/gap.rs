//! Duality-gap machinery: the relaxed gap, the per-iteration preliminary
//! gap, ergodic averaging under the primal-dual coupling conditions, and
//! the ergodic gap descent certificate.

use crate::engine::TrajectoryLog;
use crate::error::{Error, Result};
use crate::linops::{dot, vsub, BlockVec};
use crate::problems::SaddleProblem;

use super::{CertificateReport, Verdict};

/// The relaxed duality gap against the stored saddle point:
/// `𝒢(x,y) = ([G+J](x) + ⟨y*,Kx⟩ - F*(y*)) - ([G+J](x*) + ⟨y,Kx*⟩ - F*(y))`.
/// Nonnegative, zero at the saddle point.
pub fn gap(problem: &SaddleProblem, x: &[f64], y: &[f64]) -> Result<f64> {
    let (xs, ys) = problem
        .known_solution
        .as_ref()
        .ok_or_else(|| Error::Missing("gap needs the saddle point".into()))?;
    if problem.f_conj.is_none() {
        return Err(Error::Missing("gap needs the explicit conjugate of F*".into()));
    }
    let kx = problem.k.apply(x);
    let kxs = problem.k.apply(xs);
    let lhs = problem.primal_value(x) + dot(ys, &kx) - problem.fstar.eval(ys);
    let rhs = problem.primal_value(xs) + dot(y, &kxs) - problem.fstar.eval(y);
    Ok(lhs - rhs)
}

/// Primal objective `[G+J](x) + F(Kx)` through the shipped conjugate.
pub fn primal_objective(problem: &SaddleProblem, x: &[f64]) -> Result<f64> {
    let f = problem
        .f_conj
        .as_ref()
        .ok_or_else(|| Error::Missing("primal objective needs the explicit conjugate of F*".into()))?;
    Ok(problem.primal_value(x) + f(&problem.k.apply(x)))
}

/// The preliminary gap `𝒢'_{i+1}(u⁺)` of one recorded step, with the
/// subdifferential selections taken from the iteration's prox residuals.
pub fn preliminary_gap(
    plan: &crate::engine::StepPlan,
    u_next: &BlockVec,
    u_star: &BlockVec,
) -> Result<f64> {
    let sad = plan
        .saddle
        .as_ref()
        .ok_or_else(|| Error::Missing("preliminary gap needs saddle-step data".into()))?;
    let tp = plan.scalars.phi.zip(plan.scalars.tau).map(|(p, t)| p * t);
    let sp = plan.scalars.psi.zip(plan.scalars.sigma).map(|(p, s)| p * s);
    let (phi_tau, psi_sigma) = tp
        .zip(sp)
        .ok_or_else(|| Error::Missing("preliminary gap needs scalar tests".into()))?;
    let (x, y) = (u_next.block(0), u_next.block(1));
    let (xs, ys) = (u_star.block(0), u_star.block(1));
    let kxs = sad.k.apply(xs);
    let kx = sad.k.apply(x);
    Ok(phi_tau * dot(&sad.gx_sel, &vsub(x, xs))
        + psi_sigma * dot(&sad.fy_sel, &vsub(y, ys))
        - (phi_tau - psi_sigma) * dot(ys, &kxs)
        - psi_sigma * dot(y, &kxs)
        + phi_tau * dot(ys, &kx))
}

/// Defect of the exact identity
/// `⟨H(u⁺), u⁺-u*⟩_{Z_{i+1}W_{i+1}} = 𝒢'_{i+1}(u⁺) + ½‖u⁺-u*‖²_{ZΓ̂(0)}`
/// that splits the tested operator pairing into gap and coupling parts.
pub fn h_gap_identity_defect(
    plan: &crate::engine::StepPlan,
    u_next: &BlockVec,
    u_star: &BlockVec,
) -> Result<f64> {
    let sad = plan
        .saddle
        .as_ref()
        .ok_or_else(|| Error::Missing("gap identity needs saddle-step data".into()))?;
    let phi_tau = plan.scalars.phi.unwrap() * plan.scalars.tau.unwrap();
    let psi_sigma = plan.scalars.psi.unwrap() * plan.scalars.sigma.unwrap();
    let (x, y) = (u_next.block(0), u_next.block(1));
    let (xs, ys) = (u_star.block(0), u_star.block(1));
    let hx = crate::linops::vadd(&sad.gx_sel, &sad.k.apply_adjoint(y));
    let hy = vsub(&sad.fy_sel, &sad.k.apply(x));
    let lhs = phi_tau * dot(&hx, &vsub(x, xs)) + psi_sigma * dot(&hy, &vsub(y, ys));
    let coupling = (phi_tau - psi_sigma) * dot(&sad.k.apply(&vsub(x, xs)), &vsub(y, ys));
    let prelim = preliminary_gap(plan, u_next, u_star)?;
    Ok(lhs - prelim - coupling)
}

/// Which ergodic average to form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErgodicMode {
    /// `ũ_N = ζ_N⁻¹ Σ_{i<N} φ_iτ_i uⁱ⁺¹` — function-value estimates.
    Value,
    /// Primal-dual averages under the coupling `φ_iτ_i = ψ_{i+1}σ_{i+1}`.
    PrimalDual,
    /// Index-shifted averages under the coupling `φ_iτ_i = ψ_iσ_i`
    /// (the dual average uses `yⁱ`, both sums start at i = 1).
    PrimalDualShifted,
}

impl std::fmt::Display for ErgodicMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ErgodicMode::Value => "value",
            ErgodicMode::PrimalDual => "primal-dual",
            ErgodicMode::PrimalDualShifted => "primal-dual-shifted",
        };
        write!(f, "{s}")
    }
}

/// An ergodic point with its weight mass.
#[derive(Clone, Debug)]
pub struct ErgodicPoint {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub zeta: f64,
}

const COUPLING_TOL: f64 = 1e-12;

fn phi_tau(traj: &TrajectoryLog, i: usize) -> Result<f64> {
    let s = &traj.plans[i].scalars;
    s.phi
        .zip(s.tau)
        .map(|(p, t)| p * t)
        .ok_or_else(|| Error::Missing(format!("step {i} lacks scalar test weights")))
}

fn psi_sigma(traj: &TrajectoryLog, i: usize) -> Result<f64> {
    let s = &traj.plans[i].scalars;
    s.psi
        .zip(s.sigma)
        .map(|(p, t)| p * t)
        .ok_or_else(|| Error::Missing(format!("step {i} lacks scalar dual weights")))
}

fn check_coupling(mode: ErgodicMode, i: usize, a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > COUPLING_TOL * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::Invalid(format!(
            "{mode} coupling condition violated at step {i}: {a} vs {b}"
        )));
    }
    Ok(())
}

/// The ergodic point at the full horizon of the trajectory.
pub fn ergodic_points(traj: &TrajectoryLog, mode: ErgodicMode) -> Result<ErgodicPoint> {
    let series = ergodic_series(traj, mode)?;
    series
        .into_iter()
        .last()
        .map(|(_, p)| p)
        .ok_or_else(|| Error::Invalid("trajectory too short for the requested average".into()))
}

/// Ergodic points at every admissible horizon, by running weighted sums.
pub fn ergodic_series(traj: &TrajectoryLog, mode: ErgodicMode) -> Result<Vec<(usize, ErgodicPoint)>> {
    let n = traj.n_steps();
    let mut out = Vec::new();
    match mode {
        ErgodicMode::Value => {
            let dim = traj.iterates[0].dim();
            let mut sum = vec![0.0; dim];
            let mut zeta = 0.0;
            for i in 0..n {
                let w = phi_tau(traj, i)?;
                crate::linops::axpy(w, traj.iterates[i + 1].as_slice(), &mut sum);
                zeta += w;
                out.push((i + 1, ErgodicPoint { x: crate::linops::vscale(1.0 / zeta, &sum), y: None, zeta }));
            }
        }
        ErgodicMode::PrimalDual => {
            let (nx, _) = traj.iterates[0].layout().extent(0);
            let _ = nx;
            let dx = traj.iterates[0].block(0).len();
            let dy = traj.iterates[0].block(1).len();
            let mut sx = vec![0.0; dx];
            let mut sy = vec![0.0; dy];
            let mut zeta = 0.0;
            for i in 0..n {
                let wp = phi_tau(traj, i)?;
                let wd = psi_sigma(traj, i)?;
                check_coupling(mode, i, wp, wd)?;
                crate::linops::axpy(wp, traj.iterates[i + 1].block(0), &mut sx);
                crate::linops::axpy(wd, traj.iterates[i + 1].block(1), &mut sy);
                zeta += wp;
                out.push((
                    i + 1,
                    ErgodicPoint {
                        x: crate::linops::vscale(1.0 / zeta, &sx),
                        y: Some(crate::linops::vscale(1.0 / zeta, &sy)),
                        zeta,
                    },
                ));
            }
        }
        ErgodicMode::PrimalDualShifted => {
            let dx = traj.iterates[0].block(0).len();
            let dy = traj.iterates[0].block(1).len();
            let mut sx = vec![0.0; dx];
            let mut sy = vec![0.0; dy];
            let mut zeta = 0.0;
            // ψ_iσ_i lives on the previous plan (it stores ψ_{i+1}, σ_{i+1})
            for i in 1..n {
                let wp = phi_tau(traj, i)?;
                let wd = psi_sigma(traj, i - 1)?;
                check_coupling(mode, i, wp, wd)?;
                crate::linops::axpy(wp, traj.iterates[i + 1].block(0), &mut sx);
                crate::linops::axpy(wd, traj.iterates[i].block(1), &mut sy);
                zeta += wp;
                out.push((
                    i + 1,
                    ErgodicPoint {
                        x: crate::linops::vscale(1.0 / zeta, &sx),
                        y: Some(crate::linops::vscale(1.0 / zeta, &sy)),
                        zeta,
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// `(N, 𝒢(x̃_N, ỹ_N))` for every admissible horizon.
pub fn ergodic_gap_series(
    traj: &TrajectoryLog,
    problem: &SaddleProblem,
    mode: ErgodicMode,
) -> Result<Vec<(usize, f64)>> {
    let pts = ergodic_series(traj, mode)?;
    let mut out = Vec::with_capacity(pts.len());
    for (n, p) in pts {
        let y = p.y.as_ref().ok_or_else(|| Error::Invalid("gap series needs dual averages".into()))?;
        out.push((n, gap(problem, &p.x, y)?));
    }
    Ok(out)
}

/// `(N, [G+J](ũ_N) - [G+J](u*))` for composite-problem value runs.
pub fn ergodic_value_gap_series(
    traj: &TrajectoryLog,
    problem: &crate::problems::CompositeProblem,
    u_star: &[f64],
) -> Result<Vec<(usize, f64)>> {
    let pts = ergodic_series(traj, ErgodicMode::Value)?;
    let v_star = problem.value(u_star);
    Ok(pts.into_iter().map(|(n, p)| (n, problem.value(&p.x) - v_star)).collect())
}

/// The ergodic gap descent certificate: for every admissible horizon,
/// `½‖u⁰-u*‖²_{Z₁M₁} + ΣΔ - ½‖u^N-u*‖²_{Z_{N+1}M_{N+1}} - ζ_N𝒢(x̃_N,ỹ_N) ≥ 0`.
pub fn check_di_gap(
    traj: &TrajectoryLog,
    problem: &SaddleProblem,
    mode: ErgodicMode,
    tol: f64,
) -> Result<CertificateReport> {
    let us = traj
        .u_star
        .as_ref()
        .ok_or_else(|| Error::Missing("ergodic gap certificate needs a solution point".into()))?;
    let initial = 0.5 * crate::linops::seminorm_sq(&traj.plans[0].zm, traj.iterates[0].sub(us).as_slice());
    let pts = ergodic_series(traj, mode)?;
    let mut delta_sum = vec![0.0; traj.n_steps()];
    let mut acc = 0.0;
    for (i, plan) in traj.plans.iter().enumerate() {
        acc += (plan.delta)(&traj.iterates[i + 1], &traj.iterates[i], us);
        delta_sum[i] = acc;
    }
    let mut residuals = Vec::with_capacity(pts.len());
    for (n, p) in pts {
        let y = p.y.as_ref().unwrap();
        let g = gap(problem, &p.x, y)?;
        let end = 0.5
            * crate::linops::seminorm_sq(&traj.plans[n - 1].zm_next, traj.iterates[n].sub(us).as_slice());
        residuals.push(initial + delta_sum[n - 1] - end - p.zeta * g);
    }
    let scale = super::trajectory_scale(traj, us);
    let mut rep = CertificateReport::from_residuals("DI-𝒢", residuals, scale, tol);
    if rep.per_iteration_residuals.is_empty() {
        rep.verdict = Verdict::Fail;
    }
    Ok(rep)
}

/// Sum of preliminary gaps versus the weighted ergodic gap: the
/// reorganization behind the gap certificate guarantees
/// `Σ_{i<N} 𝒢'_{i+1} ≥ ζ_{*,N} 𝒢(x̃_{*,N}, ỹ_{*,N})` in the shifted mode.
pub fn preliminary_gap_domination(
    traj: &TrajectoryLog,
    problem: &SaddleProblem,
) -> Result<(f64, f64)> {
    let us = traj
        .u_star
        .as_ref()
        .ok_or_else(|| Error::Missing("needs a solution point".into()))?;
    let mut sum = 0.0;
    for (i, plan) in traj.plans.iter().enumerate() {
        sum += preliminary_gap(plan, &traj.iterates[i + 1], us)?;
    }
    let p = ergodic_points(traj, ErgodicMode::PrimalDualShifted)?;
    let g = gap(problem, &p.x, p.y.as_ref().unwrap())?;
    Ok((sum, p.zeta * g))
}
