//! The abstract preconditioned proximal-point iteration.
//!
//! Every solver implements [`Solver`]: each step it returns the next iterate
//! together with a [`StepPlan`] — the tuple `(M, W, Z, V', Δ)` plus the
//! selections needed to verify the step inclusion
//! `0 ∈ W H(u⁺) + V'(u⁺) + M(u⁺ - uⁱ)` numerically. The engine drives the
//! iteration, verifies the inclusion residual from the solver's
//! prox-optimality selections, and records the trajectory for the
//! certificate and rate modules.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linops::{norm, vadd, vsub, BlockLayout, BlockVec, LinearMap, pair, seminorm_sq};

pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `(u_next, u_prev, u_star) -> Δ_{i+1}(u_star)`
pub type DeltaFn = Arc<dyn Fn(&BlockVec, &BlockVec, &BlockVec) -> f64 + Send + Sync>;

/// How the step inclusion is reconstructed for verification.
#[derive(Clone)]
pub enum InclusionWitness {
    /// `r = W h + V'(u⁺) + M(u⁺ - uⁱ)` with `h` a selection of `H(u⁺)`
    /// recovered from prox optimality or gradients.
    Forward { h_sel: Vec<f64> },
    /// `r = h̃ + M(u⁺ - uⁱ)` with `h̃` a selection of the lifted step map
    /// at `u⁺` (used where `V'` would have to be set-valued, e.g.
    /// Douglas-Rachford through its resolvent identities).
    Lifted { h_tilde_sel: Vec<f64> },
}

/// Scalar step/test parameters recorded by scalar-parameterized solvers.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlanScalars {
    pub tau: Option<f64>,
    /// σ_{i+1}
    pub sigma: Option<f64>,
    /// φ_i
    pub phi: Option<f64>,
    /// ψ_{i+1}
    pub psi: Option<f64>,
    pub omega: Option<f64>,
}

/// Saddle-point structure attached by primal-dual solvers, enough to
/// assemble the operator tests and the preliminary gap.
#[derive(Clone)]
pub struct SaddleInfo {
    pub k: LinearMap,
    /// Strong-convexity modulus claimed for `G` (Γ = γI).
    pub gamma: f64,
    /// Co-coercivity factor claimed for `J` (0 when `J = 0`).
    pub l_coco: f64,
    /// Selection of `∂[G+J](x⁺)` recovered from the primal prox step.
    pub gx_sel: Vec<f64>,
    /// Selection of `∂F*(y⁺)` recovered from the dual prox step.
    pub fy_sel: Vec<f64>,
    /// The forward-step preconditioner `u ↦ V::J(u)` of this iteration,
    /// when the solver takes a forward step with respect to `J`.
    pub vj: Option<VecFn>,
}

/// Per-iteration plan `(M, W, Z, V', Δ)` with the materialized local
/// metrics and the inclusion witness.
#[derive(Clone)]
pub struct StepPlan {
    pub m: LinearMap,
    pub w: LinearMap,
    pub z: LinearMap,
    /// `Z_{i+1} M_{i+1}` — the local metric of this step.
    pub zm: LinearMap,
    /// `Z_{i+2} M_{i+2}` — the next step's metric, materialized once the
    /// new iterate is known (second-order solvers need it there).
    pub zm_next: LinearMap,
    pub vprime: Option<VecFn>,
    pub delta: DeltaFn,
    pub witness: InclusionWitness,
    pub scalars: PlanScalars,
    pub saddle: Option<SaddleInfo>,
    /// Whether the solver claims certificate applicability for this step
    /// (in particular, that `Z_{i+1}M_{i+1}` is self-adjoint).
    pub certified: bool,
}

impl StepPlan {
    /// Zero-penalty Δ.
    pub fn zero_delta() -> DeltaFn {
        Arc::new(|_, _, _| 0.0)
    }

    /// The verification residual of the step inclusion.
    pub fn inclusion_residual(&self, u_next: &BlockVec, u_prev: &BlockVec) -> Vec<f64> {
        let md = self.m.apply(&vsub(u_next.as_slice(), u_prev.as_slice()));
        match &self.witness {
            InclusionWitness::Forward { h_sel } => {
                let mut r = self.w.apply(h_sel);
                if let Some(vp) = &self.vprime {
                    r = vadd(&r, &vp(u_next.as_slice()));
                }
                vadd(&r, &md)
            }
            InclusionWitness::Lifted { h_tilde_sel } => vadd(h_tilde_sel, &md),
        }
    }

    /// The exact selection of the lifted step map at `u⁺` implied by the
    /// inclusion: `H̃_{i+1}(u⁺) ∋ -M_{i+1}(u⁺ - uⁱ)`.
    pub fn h_tilde(&self, u_next: &BlockVec, u_prev: &BlockVec) -> Vec<f64> {
        crate::linops::vscale(-1.0, &self.m.apply(&vsub(u_next.as_slice(), u_prev.as_slice())))
    }

    /// The witnessed selection of `W H(u⁺) + V'(u⁺)` (falls back to the
    /// lifted selection where `V'` would be set-valued).
    pub fn wh_plus_vprime(&self, u_next: &BlockVec) -> Vec<f64> {
        match &self.witness {
            InclusionWitness::Forward { h_sel } => {
                let mut r = self.w.apply(h_sel);
                if let Some(vp) = &self.vprime {
                    r = vadd(&r, &vp(u_next.as_slice()));
                }
                r
            }
            InclusionWitness::Lifted { h_tilde_sel } => h_tilde_sel.clone(),
        }
    }
}

/// One solver step: supplier of iterates and plans.
pub trait Solver {
    fn layout(&self) -> BlockLayout;

    fn step(&mut self, i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)>;

    /// Objective value at a point, for value-gap logging, when meaningful.
    fn objective(&self, _u: &BlockVec) -> Option<f64> {
        None
    }

    /// Named counters accumulated over a run (e.g. rejected empty draws).
    fn counters(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
}

/// Per-iteration record of named residuals; absent values serialize empty.
#[derive(Clone, Debug, Default)]
pub struct IterRecord {
    pub err_sq: Option<f64>,
    pub metric_err_sq: Option<f64>,
    pub step_sq: f64,
    pub gap: Option<f64>,
    pub value_gap: Option<f64>,
    pub ci_residual: Option<f64>,
    pub qf_residual: Option<f64>,
}

/// Ordered iteration records of one run.
pub struct TrajectoryLog {
    /// `N + 1` iterates for `N` recorded steps.
    pub iterates: Vec<BlockVec>,
    pub plans: Vec<StepPlan>,
    pub records: Vec<IterRecord>,
    pub seed: u64,
    pub u_star: Option<BlockVec>,
    pub counters: BTreeMap<String, f64>,
}

impl TrajectoryLog {
    pub fn n_steps(&self) -> usize {
        self.plans.len()
    }

    pub fn iterate(&self, i: usize) -> &BlockVec {
        &self.iterates[i]
    }

    /// Squared-error series `‖uⁱ - u*‖²` for `i = 0..=N`.
    pub fn err_sq_series(&self) -> Option<Vec<f64>> {
        let us = self.u_star.as_ref()?;
        Some(self.iterates.iter().map(|u| u.sub(us).norm_sq()).collect())
    }

    /// Primal squared-error series over the first layout block (saddle runs).
    pub fn primal_err_sq_series(&self) -> Option<Vec<f64>> {
        let us = self.u_star.as_ref()?;
        Some(
            self.iterates
                .iter()
                .map(|u| {
                    let d = vsub(u.block(0), us.block(0));
                    crate::linops::dot(&d, &d)
                })
                .collect(),
        )
    }
}

/// Observers are pull-only: they read the log after each step and must not
/// perturb the trajectory.
pub trait Observer {
    fn after_step(&mut self, i: usize, log: &TrajectoryLog);
}

/// Options for a certified run.
#[derive(Clone)]
pub struct RunOptions {
    /// Verify the step inclusion each iteration (on by default).
    pub check_inclusion: bool,
    /// Relative tolerance of the inclusion residual.
    pub inclusion_tol: f64,
    pub seed: u64,
    pub u_star: Option<BlockVec>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { check_inclusion: true, inclusion_tol: 1e-7, seed: 0, u_star: None }
    }
}

/// Applies `solver` for `n` steps from `u0`, verifying the step inclusion
/// and invoking observers after each step.
pub fn run(
    solver: &mut dyn Solver,
    u0: &BlockVec,
    n: usize,
    opts: &RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectoryLog> {
    if n < 1 {
        return Err(Error::Invalid("run needs at least one iteration".into()));
    }
    if u0.layout() != &solver.layout() {
        return Err(Error::Invalid(format!(
            "starting point layout {:?} does not match the solver layout {:?}",
            u0.layout(),
            solver.layout()
        )));
    }
    let obj_star = opts.u_star.as_ref().and_then(|us| solver.objective(us));
    let mut log = TrajectoryLog {
        iterates: vec![u0.clone()],
        plans: Vec::with_capacity(n),
        records: Vec::with_capacity(n),
        seed: opts.seed,
        u_star: opts.u_star.clone(),
        counters: BTreeMap::new(),
    };
    for i in 0..n {
        let u_prev = log.iterates.last().unwrap().clone();
        let (u_next, plan) = solver.step(i, &u_prev).map_err(|e| match e {
            Error::Precondition(m) => Error::StepFailed { iteration: i, message: m },
            other => other,
        })?;
        if opts.check_inclusion {
            let r = norm(&plan.inclusion_residual(&u_next, &u_prev));
            let bound = opts.inclusion_tol * (1.0 + norm(u_next.as_slice()));
            if r > bound {
                return Err(Error::StepFailed {
                    iteration: i,
                    message: format!("step inclusion residual {r:.3e} exceeds {bound:.3e}"),
                });
            }
        }
        let step_sq = {
            let d = vsub(u_next.as_slice(), u_prev.as_slice());
            crate::linops::dot(&d, &d)
        };
        let mut rec = IterRecord { step_sq, ..Default::default() };
        if let Some(us) = &opts.u_star {
            let d = u_next.sub(us);
            rec.err_sq = Some(d.norm_sq());
            rec.metric_err_sq = Some(seminorm_sq(&plan.zm_next, d.as_slice()));
            if let (Some(f), Some(fs)) = (solver.objective(&u_next), obj_star) {
                rec.value_gap = Some(f - fs);
            }
        }
        log.iterates.push(u_next);
        log.plans.push(plan);
        log.records.push(rec);
        for obs in observers.iter_mut() {
            obs.after_step(i, &log);
        }
    }
    for (k, v) in solver.counters() {
        log.counters.insert(k, v);
    }
    Ok(log)
}

/// Convenience wrapper without observers.
pub fn run_plain(solver: &mut dyn Solver, u0: &BlockVec, n: usize, opts: &RunOptions) -> Result<TrajectoryLog> {
    run(solver, u0, n, opts, &mut [])
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const CSV_HEADER: &str =
    "iter,err_sq,metric_err_sq,step_sq,gap,value_gap,ci_residual,qf_residual,tau,sigma,phi,psi,omega";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl TrajectoryLog {
    /// CSV with one row per recorded step; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (i, (rec, plan)) in self.records.iter().zip(&self.plans).enumerate() {
            let s = &plan.scalars;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                i + 1,
                cell(rec.err_sq),
                cell(rec.metric_err_sq),
                cell(Some(rec.step_sq)),
                cell(rec.gap),
                cell(rec.value_gap),
                cell(rec.ci_residual),
                cell(rec.qf_residual),
                cell(s.tau),
                cell(s.sigma),
                cell(s.phi),
                cell(s.psi),
                cell(s.omega),
            ));
        }
        out
    }

    /// JSON document carrying the full-precision trajectory data.
    pub fn to_json(&self) -> serde_json::Value {
        let col = |f: &dyn Fn(&IterRecord) -> Option<f64>| -> Vec<Option<f64>> {
            self.records.iter().map(f).collect()
        };
        let scal = |f: &dyn Fn(&PlanScalars) -> Option<f64>| -> Vec<Option<f64>> {
            self.plans.iter().map(|p| f(&p.scalars)).collect()
        };
        serde_json::json!({
            "seed": self.seed,
            "n_steps": self.n_steps(),
            "iterates": self.iterates.iter().map(|u| u.as_slice().to_vec()).collect::<Vec<_>>(),
            "err_sq": col(&|r| r.err_sq),
            "metric_err_sq": col(&|r| r.metric_err_sq),
            "step_sq": self.records.iter().map(|r| r.step_sq).collect::<Vec<_>>(),
            "gap": col(&|r| r.gap),
            "value_gap": col(&|r| r.value_gap),
            "ci_residual": col(&|r| r.ci_residual),
            "qf_residual": col(&|r| r.qf_residual),
            "tau": scal(&|s| s.tau),
            "sigma": scal(&|s| s.sigma),
            "phi": scal(&|s| s.phi),
            "psi": scal(&|s| s.psi),
            "omega": scal(&|s| s.omega),
            "counters": self.counters,
        })
    }
}

/// Numerically checks the three-point identity
/// `⟨u⁺-u, u⁺-u*⟩_M = ½‖u⁺-u‖²_M - ½‖u-u*‖²_M + ½‖u⁺-u*‖²_M`
/// for a self-adjoint `M`; returns the defect.
pub fn three_point_identity_defect(m: &LinearMap, u_next: &[f64], u: &[f64], u_star: &[f64]) -> f64 {
    let lhs = pair(m, &vsub(u_next, u), &vsub(u_next, u_star));
    let rhs = 0.5 * seminorm_sq(m, &vsub(u_next, u)) - 0.5 * seminorm_sq(m, &vsub(u, u_star))
        + 0.5 * seminorm_sq(m, &vsub(u_next, u_star));
    lhs - rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, stream_rng};

    #[test]
    fn three_point_identity_random_selfadjoint() {
        let mut rng = stream_rng(3, 0);
        for trial in 0..20 {
            let n = 3 + (trial % 3);
            let raw = nalgebra::DMatrix::from_fn(n, n, |_, _| {
                use rand_distr::Distribution;
                rand_distr::StandardNormal.sample(&mut rng)
            });
            let sym = (&raw + raw.transpose()) * 0.5;
            let m = LinearMap::dense(sym);
            let a = normal_vec(&mut rng, n);
            let b = normal_vec(&mut rng, n);
            let c = normal_vec(&mut rng, n);
            let defect = three_point_identity_defect(&m, &a, &b, &c).abs();
            let scale = 1.0 + a.iter().chain(&b).chain(&c).map(|v| v * v).sum::<f64>();
            assert!(defect <= 1e-12 * scale, "defect {defect}");
        }
    }
}
