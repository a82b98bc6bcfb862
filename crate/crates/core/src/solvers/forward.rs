//! Gradient descent and forward-backward splitting
//! `u⁺ = (I + τ_i ∂G)⁻¹(uⁱ - τ_i ∇J(uⁱ))`, sharing one step plan: the
//! forward step is absorbed into the nonlinear correction
//! `V'(u) = τ_i(∇J(uⁱ) - ∇J(u))`.

use std::sync::Arc;

use crate::engine::{DeltaFn, InclusionWitness, PlanScalars, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{dot, vscale, vsub, BlockLayout, BlockVec, LinearMap};
use crate::problems::{CompositeProblem, StepSize};
use crate::solvers::schedule::ScalarSchedule;

/// Certification regime of the forward step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbMode {
    /// Iterate certificates; step bound τL < 2.
    Plain { accel: bool },
    /// Function-value certificates; stricter bound τL < 1 and the
    /// halved φ recursion.
    Value { accel: bool },
}

pub struct ForwardBackwardSolver {
    problem: CompositeProblem,
    sched: ScalarSchedule,
    mode: FbMode,
}

/// Forward-backward splitting on `H = ∂G + ∇J`.
///
/// `force` skips the step bound (for deliberately broken runs that the
/// certificates are expected to flag).
pub fn make_fb(problem: &CompositeProblem, tau0: f64, mode: FbMode, force: bool) -> Result<ForwardBackwardSolver> {
    if tau0 <= 0.0 {
        return Err(Error::Precondition(format!("step length must be positive: tau0 = {tau0}")));
    }
    let l = problem.j.l;
    if !l.is_finite() {
        return Err(Error::Invalid("forward steps need a finite gradient Lipschitz constant".into()));
    }
    let gamma = problem.j.gamma;
    let sched = match mode {
        FbMode::Plain { accel: false } => {
            if tau0 * l >= 2.0 && !force {
                return Err(Error::Precondition(format!(
                    "forward-step bound: tau*L = {} >= 2",
                    tau0 * l
                )));
            }
            ScalarSchedule::constant(tau0, 1.0)
        }
        FbMode::Value { accel: false } => {
            if tau0 * l >= 1.0 && !force {
                return Err(Error::Precondition(format!(
                    "value-regime forward-step bound: tau*L = {} >= 1",
                    tau0 * l
                )));
            }
            ScalarSchedule::constant(tau0, 1.0)
        }
        FbMode::Plain { accel: true } => ScalarSchedule::gd_accel(tau0, gamma, l, true, false)?,
        FbMode::Value { accel: true } => ScalarSchedule::gd_accel(tau0, gamma, l, true, true)?,
    };
    Ok(ForwardBackwardSolver { problem: problem.clone(), sched, mode })
}

/// Gradient descent: forward-backward splitting with no prox part.
pub fn make_graddesc(problem: &CompositeProblem, tau0: f64, mode: FbMode, force: bool) -> Result<ForwardBackwardSolver> {
    if problem.g.name != "zero" {
        return Err(Error::Invalid("gradient descent needs G = 0; use the forward-backward constructor".into()));
    }
    make_fb(problem, tau0, mode, force)
}

impl ForwardBackwardSolver {
    /// Switches the φ recursion to the variant appearing in the alternate
    /// derivation of the accelerated regime (factor γ instead of 2γ).
    pub fn with_half_phi_rule(mut self) -> Result<Self> {
        if let FbMode::Plain { accel: true } = self.mode {
            self.sched = ScalarSchedule::gd_accel(self.sched.tau(), self.sched.gamma, self.sched.l, true, true)?;
            Ok(self)
        } else {
            Err(Error::Invalid("the variant φ rule applies to the accelerated regime".into()))
        }
    }
}

impl Solver for ForwardBackwardSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::single(self.problem.dim())
    }

    fn step(&mut self, _i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let tau = self.sched.tau();
        let phi = self.sched.phi();
        let l = self.problem.j.l;
        let grad_prev = self.problem.j.grad(u.as_slice());
        let fwd = vsub(u.as_slice(), &vscale(tau, &grad_prev));
        let u_next = self.problem.g.prox(&StepSize::Scalar(tau), &fwd);
        // (uⁱ - τ∇J(uⁱ) - u⁺)/τ ∈ ∂G(u⁺); H(u⁺) selection adds ∇J(u⁺)
        let g_sel = vscale(1.0 / tau, &vsub(&fwd, &u_next));
        let h_sel = crate::linops::vadd(&g_sel, &self.problem.j.grad(&u_next));

        let vprime: crate::engine::VecFn = {
            let j = self.problem.j.clone();
            let gp = grad_prev.clone();
            Arc::new(move |v: &[f64]| vscale(tau, &vsub(&gp, &j.grad(v))))
        };

        let delta: DeltaFn = match self.mode {
            FbMode::Plain { accel: false } => Arc::new(move |un: &BlockVec, up: &BlockVec, _: &BlockVec| {
                let step = vsub(un.as_slice(), up.as_slice());
                -0.5 * phi * (1.0 - tau * l / 2.0) * dot(&step, &step)
            }),
            FbMode::Plain { accel: true } => StepPlan::zero_delta(),
            FbMode::Value { accel } => {
                let prob = self.problem.clone();
                Arc::new(move |un: &BlockVec, up: &BlockVec, us: &BlockVec| {
                    let gap = prob.value(un.as_slice()) - prob.value(us.as_slice());
                    let mut d = -phi * tau * gap;
                    if !accel {
                        let step = vsub(un.as_slice(), up.as_slice());
                        d -= 0.5 * phi * (1.0 - tau * l) * dot(&step, &step);
                    }
                    d
                })
            }
        };

        let dim = u.dim();
        let plan = StepPlan {
            m: LinearMap::identity(dim),
            w: LinearMap::scaled_identity(dim, tau),
            z: LinearMap::scaled_identity(dim, phi),
            zm: LinearMap::scaled_identity(dim, phi),
            zm_next: LinearMap::scaled_identity(dim, self.sched.phi_next()),
            vprime: Some(vprime),
            delta,
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars { tau: Some(tau), phi: Some(phi), ..Default::default() },
            saddle: None,
            certified: true,
        };
        self.sched.advance();
        Ok((u.with_data(u_next), plan))
    }

    fn objective(&self, u: &BlockVec) -> Option<f64> {
        Some(self.problem.value(u.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_plain, RunOptions};
    use crate::problems::catalog::{lasso, quadratic, LassoParams, QuadraticParams};
    use crate::problems::functions::{ProxFn, SmoothFn};
    use approx::assert_relative_eq;

    #[test]
    fn exact_minimizer_in_one_step() {
        let p = quadratic(&QuadraticParams { dim: 2, form: Some("smooth".into()), ..Default::default() })
            .unwrap()
            .as_composite()
            .unwrap()
            .clone();
        let mut s = make_graddesc(&p, 1.0, FbMode::Plain { accel: false }, false).unwrap();
        let log =
            run_plain(&mut s, &BlockVec::from_vec(vec![2.0, -3.0]), 1, &RunOptions::default()).unwrap();
        assert_eq!(log.iterates[1].as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn step_bound_arithmetic() {
        let p = quadratic(&QuadraticParams {
            dim: 2,
            diag: Some(vec![1.0, 4.0]),
            form: Some("smooth".into()),
            ..Default::default()
        })
        .unwrap()
        .as_composite()
        .unwrap()
        .clone();
        // τL = 2.4 >= 2 rejected; τL = 1.6 accepted
        assert!(make_graddesc(&p, 0.6, FbMode::Plain { accel: false }, false).is_err());
        assert!(make_graddesc(&p, 0.4, FbMode::Plain { accel: false }, false).is_ok());
        // accelerated: τ0 L² = 0.5·16 >= γ = 1 rejected
        assert!(make_graddesc(&p, 0.5, FbMode::Plain { accel: true }, false).is_err());
    }

    #[test]
    fn accelerated_bound_accepts_unit_curvature() {
        let p = quadratic(&QuadraticParams { dim: 1, form: Some("smooth".into()), ..Default::default() })
            .unwrap()
            .as_composite()
            .unwrap()
            .clone();
        // γ = L = 1: τ0 = 0.5 gives τ0L² = 0.5 < 1
        assert!(make_graddesc(&p, 0.5, FbMode::Plain { accel: true }, false).is_ok());
    }

    #[test]
    fn fb_single_step_soft_threshold() {
        // G = |·|, J = ½(x-3)²: from 0, x¹ = prox_{|·|}(3) = 2
        let g = ProxFn::l1(1, 1.0);
        let j = SmoothFn::least_squares(nalgebra::DMatrix::from_row_slice(1, 1, &[1.0]), vec![3.0]);
        let p = CompositeProblem::new(g, j);
        let mut s = make_fb(&p, 1.0, FbMode::Plain { accel: false }, false).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![0.0]), 1, &RunOptions::default()).unwrap();
        assert_relative_eq!(log.iterates[1].as_slice()[0], 2.0);
    }

    #[test]
    fn graddesc_and_fb_coincide_bitwise_on_zero_g() {
        let p = quadratic(&QuadraticParams {
            dim: 3,
            diag: Some(vec![0.5, 1.0, 2.0]),
            form: Some("smooth".into()),
            ..Default::default()
        })
        .unwrap()
        .as_composite()
        .unwrap()
        .clone();
        let u0 = BlockVec::from_vec(vec![1.0, -2.0, 0.7]);
        let mut gd = make_graddesc(&p, 0.3, FbMode::Plain { accel: false }, false).unwrap();
        let mut fb = make_fb(&p, 0.3, FbMode::Plain { accel: false }, false).unwrap();
        let la = run_plain(&mut gd, &u0, 25, &RunOptions::default()).unwrap();
        let lb = run_plain(&mut fb, &u0, 25, &RunOptions::default()).unwrap();
        for (a, b) in la.iterates.iter().zip(&lb.iterates) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn lasso_run_approaches_reference_solution() {
        let p = lasso(&LassoParams::default()).unwrap().as_composite().unwrap().clone();
        let tau = 1.0 / p.j.l;
        let mut s = make_fb(&p, tau, FbMode::Plain { accel: false }, false).unwrap();
        let u0 = BlockVec::from_vec(vec![0.0; p.dim()]);
        let log = run_plain(&mut s, &u0, 10_000, &RunOptions::default()).unwrap();
        let xs = p.known_solution.as_ref().unwrap();
        let err = crate::linops::norm(&vsub(log.iterates.last().unwrap().as_slice(), xs));
        assert!(err <= 1e-8, "error {err}");
    }
}
