//! The proximal point method `u⁺ = (I + τ_i ∂G)⁻¹(uⁱ)` with constant,
//! accelerated, and growing step schedules.

use std::sync::Arc;

use crate::engine::{InclusionWitness, PlanScalars, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{vscale, vsub, BlockLayout, BlockVec, LinearMap};
use crate::problems::{CompositeProblem, StepSize};
use crate::solvers::schedule::{ScalarSchedule, ScheduleRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxSchedule {
    Constant,
    Accelerated,
    /// Geometric step growth (superlinear regime under strong monotonicity).
    Growing,
}

pub struct ProxPointSolver {
    problem: CompositeProblem,
    sched: ScalarSchedule,
    /// Δ carries function-value gaps instead of the plain step penalty.
    value_mode: bool,
}

/// Builds the proximal point method on `H = ∂G`. The problem must not
/// carry a smooth part; `gamma` is the strong-monotonicity modulus used by
/// the accelerated and growing schedules.
pub fn make_prox(
    problem: &CompositeProblem,
    tau0: f64,
    gamma: f64,
    schedule: ProxSchedule,
) -> Result<ProxPointSolver> {
    make_prox_full(problem, tau0, gamma, schedule, 2.0, false)
}

pub fn make_prox_full(
    problem: &CompositeProblem,
    tau0: f64,
    gamma: f64,
    schedule: ProxSchedule,
    growth_factor: f64,
    value_mode: bool,
) -> Result<ProxPointSolver> {
    if tau0 <= 0.0 {
        return Err(Error::Precondition(format!("step length must be positive: tau0 = {tau0}")));
    }
    if problem.j.l != 0.0 {
        return Err(Error::Invalid(
            "proximal point method needs a prox-only problem (smooth part present)".into(),
        ));
    }
    if value_mode && schedule != ProxSchedule::Constant {
        return Err(Error::Invalid("value-mode prox point ships with constant steps only".into()));
    }
    let sched = match schedule {
        ProxSchedule::Constant => {
            if value_mode && gamma > 0.0 {
                // function-value regime under strong convexity: φ_{i+1} = φ_i(1+τγ)
                ScalarSchedule::gd_accel(tau0, gamma, 0.0, true, true)?
            } else {
                let mut s = ScalarSchedule::constant(tau0, 1.0);
                s.gamma = gamma;
                s
            }
        }
        ProxSchedule::Accelerated => ScalarSchedule::prox_accel(tau0, gamma)?,
        ProxSchedule::Growing => ScalarSchedule::prox_growing(tau0, gamma, growth_factor)?,
    };
    Ok(ProxPointSolver { problem: problem.clone(), sched, value_mode })
}

impl Solver for ProxPointSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::single(self.problem.dim())
    }

    fn step(&mut self, _i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let tau = self.sched.tau();
        let phi = self.sched.phi();
        let u_next = self.problem.g.prox(&StepSize::Scalar(tau), u.as_slice());
        // prox optimality: (uⁱ - u⁺)/τ ∈ ∂G(u⁺)
        let h_sel = vscale(1.0 / tau, &vsub(u.as_slice(), &u_next));
        let dim = u.dim();

        let delta: crate::engine::DeltaFn = if self.value_mode {
            let prob = self.problem.clone();
            Arc::new(move |un: &BlockVec, up: &BlockVec, us: &BlockVec| {
                let gap = prob.value(un.as_slice()) - prob.value(us.as_slice());
                let step = vsub(un.as_slice(), up.as_slice());
                -phi * tau * gap - 0.5 * phi * crate::linops::dot(&step, &step)
            })
        } else if matches!(self.sched.rule, ScheduleRule::Constant) && self.sched.gamma == 0.0 {
            Arc::new(move |un: &BlockVec, up: &BlockVec, _: &BlockVec| {
                let step = vsub(un.as_slice(), up.as_slice());
                -0.5 * phi * crate::linops::dot(&step, &step)
            })
        } else {
            // strongly monotone regimes keep Δ = 0 and grow φ instead
            StepPlan::zero_delta()
        };

        let plan = StepPlan {
            m: LinearMap::identity(dim),
            w: LinearMap::scaled_identity(dim, tau),
            z: LinearMap::scaled_identity(dim, phi),
            zm: LinearMap::scaled_identity(dim, phi),
            zm_next: LinearMap::scaled_identity(dim, self.sched.phi_next()),
            vprime: None,
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
