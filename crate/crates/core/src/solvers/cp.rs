//! The primal-dual method of Chambolle and Pock, with optional
//! acceleration under strong convexity of `G` and an optional forward step
//! with respect to a smooth `J`.
//!
//! As a preconditioned proximal point step the preconditioner is
//! `M_{i+1} = [[I, -τ_iK*], [-σ_iK, I]]` with the diagonal step operator
//! `W_{i+1} = diag(τ_iI, σ_{i+1}I)` and tests `Z_{i+1} = diag(φ_iI, ψI)`;
//! the engine verifies that equivalence at every step through the prox
//! optimality selections.

use std::sync::Arc;

use crate::engine::{DeltaFn, InclusionWitness, PlanScalars, SaddleInfo, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{op_norm, seminorm_sq, vadd, vscale, vsub, BlockLayout, BlockVec, LinearMap};
use crate::problems::{SaddleProblem, StepSize};
use crate::solvers::schedule::ScalarSchedule;

/// Which inequality family the run is meant to certify; the gap regime
/// halves the acceleration modulus and tightens the forward-step margin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpRegime {
    Iterate,
    Gap,
}

pub struct CpSolver {
    problem: SaddleProblem,
    sched: ScalarSchedule,
    forward_step: bool,
    /// Strong-convexity modulus of `G` claimed for certification.
    gamma: f64,
    /// Margin of the forward step; 1 when no forward step is taken.
    theta: f64,
    k_norm: f64,
}

pub struct CpConfig {
    pub tau0: f64,
    pub sigma0: f64,
    pub gamma: f64,
    pub forward_step: bool,
    pub regime: CpRegime,
    pub force: bool,
    pub seed: u64,
}

impl Default for CpConfig {
    fn default() -> Self {
        CpConfig {
            tau0: 0.9,
            sigma0: 0.9,
            gamma: 0.0,
            forward_step: false,
            regime: CpRegime::Iterate,
            force: false,
            seed: 0,
        }
    }
}

pub fn make_cp(problem: &SaddleProblem, cfg: &CpConfig) -> Result<CpSolver> {
    if cfg.tau0 <= 0.0 || cfg.sigma0 <= 0.0 {
        return Err(Error::Precondition(format!(
            "step lengths must be positive: tau0 = {}, sigma0 = {}",
            cfg.tau0, cfg.sigma0
        )));
    }
    let k_norm = op_norm(&problem.k, 1e-10, 10_000, cfg.seed)?;
    let coupling = cfg.tau0 * cfg.sigma0 * k_norm * k_norm;
    if coupling >= 1.0 && !cfg.force {
        return Err(Error::Precondition(format!(
            "step-size initialization: tau0*sigma0*|K|^2 = {coupling} >= 1 (|K| = {k_norm})"
        )));
    }
    let l = problem.j.l;
    let mut theta = 1.0;
    if cfg.forward_step {
        if !l.is_finite() {
            return Err(Error::Invalid("forward step needs a finite gradient Lipschitz constant".into()));
        }
        let factor = match cfg.regime {
            CpRegime::Iterate => 1.0,
            CpRegime::Gap => 2.0,
        };
        theta = 1.0 - factor * l * cfg.tau0 / (1.0 - coupling);
        if theta <= 0.0 && !cfg.force {
            return Err(Error::Precondition(format!(
                "forward-step margin: theta = 1 - {factor}*L*tau0/(1 - tau0*sigma0*|K|^2) = {theta} <= 0"
            )));
        }
    } else if l != 0.0 {
        return Err(Error::Invalid(
            "the smooth part is nonzero; enable the forward step to handle it".into(),
        ));
    }
    // the gap regime runs the schedule at the halved modulus
    let gamma_eff = match cfg.regime {
        CpRegime::Iterate => cfg.gamma,
        CpRegime::Gap => cfg.gamma / 2.0,
    };
    let sched = ScalarSchedule::cp_accel(cfg.tau0, cfg.sigma0, gamma_eff);
    Ok(CpSolver {
        problem: problem.clone(),
        sched,
        forward_step: cfg.forward_step,
        gamma: gamma_eff,
        theta,
        k_norm,
    })
}

impl CpSolver {
    pub fn k_norm(&self) -> f64 {
        self.k_norm
    }

    fn zm_at(&self, phi: f64, tau: f64, sigma: f64) -> LinearMap {
        let k = &self.problem.k;
        let (nx, ny) = (self.problem.dim_x(), self.problem.dim_y());
        LinearMap::block2(
            LinearMap::scaled_identity(nx, phi),
            k.adjoint().scale(-phi * tau),
            k.scale(-self.sched.psi * sigma),
            LinearMap::scaled_identity(ny, self.sched.psi),
        )
    }
}

impl Solver for CpSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::pair(self.problem.dim_x(), self.problem.dim_y())
    }

    fn step(&mut self, _i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let (x, y) = (u.block(0), u.block(1));
        let (nx, ny) = (x.len(), y.len());
        let k = self.problem.k.clone();
        let tau = self.sched.tau();
        let sigma = self.sched.sigma();
        let sigma_next = self.sched.sigma_next();
        let phi = self.sched.phi();
        let psi = self.sched.psi;
        let omega = self.sched.omega();

        let grad_x = if self.forward_step { self.problem.j.grad(x) } else { vec![0.0; nx] };
        let mut fwd = vsub(x, &vscale(tau, &k.apply_adjoint(y)));
        if self.forward_step {
            fwd = vsub(&fwd, &vscale(tau, &grad_x));
        }
        let x_next = self.problem.g.prox(&StepSize::Scalar(tau), &fwd);
        let x_bar = vadd(&x_next, &vscale(omega, &vsub(&x_next, x)));
        let dual_in = vadd(y, &vscale(sigma_next, &k.apply(&x_bar)));
        let y_next = self.problem.fstar.prox(&StepSize::Scalar(sigma_next), &dual_in);

        // prox optimality selections
        let g_sel = vscale(1.0 / tau, &vsub(&fwd, &x_next));
        let gx_sel = vadd(&g_sel, &self.problem.j.grad(&x_next));
        let fy_sel = vscale(1.0 / sigma_next, &vsub(&dual_in, &y_next));
        let mut h_sel = vadd(&gx_sel, &k.apply_adjoint(&y_next));
        h_sel.extend(vsub(&fy_sel, &k.apply(&x_next)));

        let m = LinearMap::block2(
            LinearMap::identity(nx),
            k.adjoint().scale(-tau),
            k.scale(-sigma),
            LinearMap::identity(ny),
        );
        let w = LinearMap::block2(
            LinearMap::scaled_identity(nx, tau),
            LinearMap::zero(nx, ny),
            LinearMap::zero(ny, nx),
            LinearMap::scaled_identity(ny, sigma_next),
        );
        let z = LinearMap::block2(
            LinearMap::scaled_identity(nx, phi),
            LinearMap::zero(nx, ny),
            LinearMap::zero(ny, nx),
            LinearMap::scaled_identity(ny, psi),
        );
        let zm = self.zm_at(phi, tau, sigma);
        self.sched.advance();
        let zm_next = self.zm_at(self.sched.phi(), self.sched.tau(), self.sched.sigma());

        let vprime: Option<crate::engine::VecFn> = if self.forward_step {
            let j = self.problem.j.clone();
            let gp = grad_x.clone();
            Some(Arc::new(move |v: &[f64]| {
                let mut out = vscale(tau, &vsub(&gp, &j.grad(&v[..gp.len()])));
                out.extend(vec![0.0; v.len() - gp.len()]);
                out
            }))
        } else {
            None
        };

        let theta = self.theta;
        let delta: DeltaFn = {
            let zm_c = zm.clone();
            Arc::new(move |un: &BlockVec, up: &BlockVec, _: &BlockVec| {
                let d = vsub(un.as_slice(), up.as_slice());
                -0.5 * theta * seminorm_sq(&zm_c, &d)
            })
        };

        let saddle = SaddleInfo {
            k: k.clone(),
            gamma: self.gamma,
            l_coco: if self.forward_step { self.problem.j.l } else { 0.0 },
            gx_sel,
            fy_sel,
            vj: vprime.clone(),
        };

        let mut data = x_next;
        data.extend(y_next);
        let plan = StepPlan {
            m,
            w,
            z,
            zm,
            zm_next,
            vprime,
            delta,
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars {
                tau: Some(tau),
                sigma: Some(sigma_next),
                phi: Some(phi),
                psi: Some(psi),
                omega: Some(omega),
            },
            saddle: Some(saddle),
            certified: true,
        };
        Ok((u.with_data(data), plan))
    }

    fn objective(&self, u: &BlockVec) -> Option<f64> {
        Some(self.problem.primal_value(u.block(0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_plain, RunOptions};
    use crate::linops::probe_self_adjoint;
    use crate::problems::catalog::{quadratic, QuadraticParams};

    fn toy() -> SaddleProblem {
        quadratic(&QuadraticParams { form: Some("saddle".into()), ..Default::default() })
            .unwrap()
            .as_saddle()
            .unwrap()
            .clone()
    }

    #[test]
    fn coupling_bound_arithmetic() {
        let p = toy();
        // 0.9·0.9·1 = 0.81 < 1 accepted
        assert!(make_cp(&p, &CpConfig::default()).is_ok());
        // 1.1·1.1·1 = 1.21 >= 1 rejected
        let cfg = CpConfig { tau0: 1.1, sigma0: 1.1, ..Default::default() };
        match make_cp(&p, &cfg) {
            Err(e) => assert!(e.to_string().contains("tau0*sigma0*|K|^2")),
            Ok(_) => panic!("expected the coupling bound to reject"),
        }
    }

    #[test]
    fn step_inclusion_verified_tightly() {
        let p = toy();
        let mut s = make_cp(&p, &CpConfig { gamma: 1.0, ..Default::default() }).unwrap();
        let u0 = BlockVec::new(vec![1.0, -0.5], BlockLayout::pair(1, 1));
        let opts = RunOptions { inclusion_tol: 1e-10, ..Default::default() };
        let log = run_plain(&mut s, &u0, 100, &opts).unwrap();
        // the local metric is self-adjoint under the schedule
        for plan in log.plans.iter().step_by(17) {
            assert!(probe_self_adjoint(&plan.zm, 20, 1e-9, 3).pass);
        }
    }

    #[test]
    fn decouples_into_prox_steps_when_k_vanishes() {
        let g = crate::problems::functions::ProxFn::quadratic(1, 1.0);
        let j = crate::problems::functions::SmoothFn::zero(1);
        let fstar = crate::problems::functions::ProxFn::quadratic(1, 1.0);
        let k = LinearMap::zero(1, 1);
        let p = crate::problems::assemble_saddle(g, j, fstar, k).unwrap();
        let mut s = make_cp(&p, &CpConfig::default()).unwrap();
        let u0 = BlockVec::new(vec![1.0, 1.0], BlockLayout::pair(1, 1));
        let log = run_plain(&mut s, &u0, 3, &RunOptions::default()).unwrap();
        // independent resolvent recursions u/(1+τ) and y/(1+σ)
        let mut ex = 1.0;
        let mut ey = 1.0;
        for it in &log.iterates[1..] {
            ex /= 1.0 + 0.9;
            ey /= 1.0 + 0.9;
            assert!((it.block(0)[0] - ex).abs() <= 1e-15);
            assert!((it.block(1)[0] - ey).abs() <= 1e-15);
        }
    }

    #[test]
    fn forward_step_margin_gate() {
        // G strongly convex toy with a nonzero J: L = 1
        let g = crate::problems::functions::ProxFn::quadratic(1, 1.0);
        let j = crate::problems::functions::SmoothFn::diag_quadratic(vec![1.0]);
        let fstar = crate::problems::functions::ProxFn::quadratic(1, 1.0);
        let k = LinearMap::identity(1);
        let p = crate::problems::assemble_saddle(g, j, fstar, k).unwrap();
        // τ0 = σ0 = 0.9: coupling 0.81, θ = 1 - 0.9/0.19 < 0 → rejected
        let cfg = CpConfig { forward_step: true, ..Default::default() };
        assert!(make_cp(&p, &cfg).is_err());
        // τ0 = σ0 = 0.3: coupling 0.09, θ = 1 - 0.3/0.91 > 0 → accepted
        let cfg = CpConfig { tau0: 0.3, sigma0: 0.3, forward_step: true, ..Default::default() };
        assert!(make_cp(&p, &cfg).is_ok());
    }

    #[test]
    fn accelerated_phi_grows_quadratically() {
        let p = toy();
        let mut s = make_cp(&p, &CpConfig { gamma: 1.0, ..Default::default() }).unwrap();
        let u0 = BlockVec::new(vec![1.0, -0.5], BlockLayout::pair(1, 1));
        let log = run_plain(&mut s, &u0, 400, &RunOptions::default()).unwrap();
        let phi = |i: usize| log.plans[i].scalars.phi.unwrap();
        // φ_N / N² roughly constant for N ≥ 50 (fitted positive constant)
        let c1 = phi(100) / (100.0 * 100.0);
        let c2 = phi(399) / (399.0 * 399.0);
        assert!(c1 > 0.0 && c2 > 0.0);
        assert!((c1 / c2 - 1.0).abs() < 0.25, "ratio {}", c1 / c2);
        for n in [50, 100, 200, 399] {
            assert!(phi(n) >= 0.5 * c1 * (n as f64) * (n as f64));
        }
    }
}
