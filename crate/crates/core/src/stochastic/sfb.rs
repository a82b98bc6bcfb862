//! Stochastic block-coordinate gradient descent and forward-backward
//! splitting: forward steps on the sampled weighted range,
//! `u⁺ = (I + τ_iΠ_S ∂G)⁻¹(uⁱ - τ_iΠ_S ∇J(uⁱ))`, updating only the drawn
//! blocks.

use std::sync::Arc;

use crate::engine::{InclusionWitness, PlanScalars, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{vsub, BlockLayout, BlockVec, LinearMap};
use crate::problems::{CompositeProblem, StepSize};
use crate::stochastic::sampler::{blockwise_l, BlockSampler};

pub struct StochasticFbSolver {
    problem: CompositeProblem,
    sampler: BlockSampler,
    tau: f64,
    /// Per-block declared smoothness constants, when the objective is not
    /// quadratic.
    declared_l: Option<Vec<f64>>,
    rejected_draws: u64,
}

/// Stochastic forward-backward splitting with separable `G`.
pub fn make_sfb(
    problem: &CompositeProblem,
    sampler: &BlockSampler,
    tau: f64,
) -> Result<StochasticFbSolver> {
    if tau <= 0.0 {
        return Err(Error::Precondition(format!("step length must be positive: tau = {tau}")));
    }
    if problem.g.name != "zero" {
        let layout = problem
            .g
            .separable_blocks
            .as_ref()
            .ok_or_else(|| Error::Invalid("stochastic splitting needs a separable prox part".into()))?;
        // the sampler's blocks must refine the separability structure
        if !layout_refines(&sampler.layout, layout) {
            return Err(Error::Invalid(
                "sampler blocks do not respect the separability structure of G".into(),
            ));
        }
    }
    if sampler.layout.dim() != problem.dim() {
        return Err(Error::Invalid("sampler layout does not cover the problem dimension".into()));
    }
    // conservative construction-time step gate over singleton draws; the
    // per-draw bound is re-checked at every step
    for j in 0..sampler.m() {
        let ls = blockwise_l(&problem.j, &sampler.layout, &[j], &sampler.pi, None)?;
        if tau * ls > sampler.pi[j] + 1e-12 {
            return Err(Error::Precondition(format!(
                "sampled-step bound on block {j}: tau*L_S = {} > pi_j = {}",
                tau * ls,
                sampler.pi[j]
            )));
        }
    }
    Ok(StochasticFbSolver {
        problem: problem.clone(),
        sampler: sampler.clone(),
        tau,
        declared_l: None,
        rejected_draws: 0,
    })
}

/// Stochastic block-coordinate gradient descent (`G = 0`).
pub fn make_sgd(
    problem: &CompositeProblem,
    sampler: &BlockSampler,
    tau: f64,
) -> Result<StochasticFbSolver> {
    if problem.g.name != "zero" {
        return Err(Error::Invalid("stochastic gradient descent needs G = 0".into()));
    }
    make_sfb(problem, sampler, tau)
}

/// True when every block of `coarse` is a union of blocks of `fine`.
fn layout_refines(coarse: &BlockLayout, fine: &BlockLayout) -> bool {
    let cuts: std::collections::BTreeSet<usize> =
        fine.extents().iter().map(|(off, _)| *off).collect();
    coarse.extents().iter().all(|(off, _)| cuts.contains(off))
}

impl Solver for StochasticFbSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::single(self.problem.dim())
    }

    fn step(&mut self, i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let tau = self.tau;
        let (draw, rejected) = self.sampler.sample(i);
        self.rejected_draws += rejected as u64;
        // per-draw step bound, naming the offending block
        let ls = blockwise_l(
            &self.problem.j,
            &self.sampler.layout,
            &draw.s,
            &self.sampler.pi,
            self.declared_l.as_deref(),
        )?;
        for &j in &draw.s {
            if tau * ls > self.sampler.pi[j] + 1e-12 {
                return Err(Error::StepFailed {
                    iteration: i,
                    message: format!(
                        "sampled-step bound on block {j}: tau*L_S = {} > pi_j = {}",
                        tau * ls,
                        self.sampler.pi[j]
                    ),
                });
            }
        }

        let grad_prev = self.problem.j.grad(u.as_slice());
        let dim = u.dim();
        // per-coordinate steps τ/π_j on the drawn blocks, zero elsewhere
        let mut step_diag = vec![0.0; dim];
        for &j in &draw.s {
            let (off, len) = self.sampler.layout.extent(j);
            for k in off..off + len {
                step_diag[k] = tau / self.sampler.pi[j];
            }
        }
        let mut fwd = u.as_slice().to_vec();
        for k in 0..dim {
            fwd[k] -= step_diag[k] * grad_prev[k];
        }
        let mut u_next = u.as_slice().to_vec();
        let mut g_sel = vec![0.0; dim];
        if self.problem.g.name == "zero" {
            for k in 0..dim {
                if step_diag[k] > 0.0 {
                    u_next[k] = fwd[k];
                }
            }
        } else {
            // prox with the diagonal step map; off-draw coordinates keep a
            // unit step but are overwritten right after
            let safe: Vec<f64> = step_diag.iter().map(|d| if *d > 0.0 { *d } else { 1.0 }).collect();
            let full = self.problem.g.prox(&StepSize::Diag(safe.clone()), &fwd);
            for k in 0..dim {
                if step_diag[k] > 0.0 {
                    u_next[k] = full[k];
                    g_sel[k] = (fwd[k] - full[k]) / step_diag[k];
                }
            }
        }
        let h_sel = {
            // S-supported selection of ∂G(u⁺) + ∇J(u⁺); the step operator
            // annihilates the unsampled blocks, so those entries are moot
            let gn = self.problem.j.grad(&u_next);
            let mut h = vec![0.0; dim];
            for k in 0..dim {
                if step_diag[k] > 0.0 {
                    h[k] = g_sel[k] + gn[k];
                }
            }
            h
        };

        let w = draw.pi_s.scale(tau);
        let vprime: crate::engine::VecFn = {
            let j = self.problem.j.clone();
            let gp = grad_prev.clone();
            let wmap = w.clone();
            Arc::new(move |v: &[f64]| wmap.apply(&vsub(&gp, &j.grad(v))))
        };

        let plan = StepPlan {
            m: LinearMap::identity(dim),
            w,
            z: LinearMap::identity(dim),
            zm: LinearMap::identity(dim),
            zm_next: LinearMap::identity(dim),
            vprime: Some(vprime),
            delta: StepPlan::zero_delta(),
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars { tau: Some(tau), phi: Some(1.0), ..Default::default() },
            saddle: None,
            certified: true,
        };
        Ok((u.with_data(u_next), plan))
    }

    fn objective(&self, u: &BlockVec) -> Option<f64> {
        Some(self.problem.value(u.as_slice()))
    }

    fn counters(&self) -> Vec<(String, f64)> {
        vec![("rejected_empty_draws".into(), self.rejected_draws as f64)]
    }
}

impl StochasticFbSolver {
    /// The sampled weighted iterate sum `Σ_{i<N} τ Π_{S(i)} uⁱ⁺¹` and mass
    /// `ζ_N = Σ τ` of the value-ergodic sequence, recomputed from a log.
    pub fn ergodic_weighted_sums(&self, log: &crate::engine::TrajectoryLog) -> (Vec<Vec<f64>>, Vec<f64>) {
        let dim = self.problem.dim();
        let mut acc = vec![0.0; dim];
        let mut sums = Vec::with_capacity(log.n_steps());
        let mut zetas = Vec::with_capacity(log.n_steps());
        let mut zeta = 0.0;
        for i in 0..log.n_steps() {
            let (draw, _) = self.sampler.sample(i);
            let w = draw.pi_s.scale(self.tau);
            crate::linops::axpy(1.0, &w.apply(log.iterates[i + 1].as_slice()), &mut acc);
            zeta += self.tau;
            sums.push(acc.clone());
            zetas.push(zeta);
        }
        (sums, zetas)
    }
}
