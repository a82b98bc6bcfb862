//! Generalised iterative soft thresholding: a primal-dual method with unit
//! steps whose preconditioner `M = diag(I, I - KK*)` absorbs the coupling,
//! for `G = 0` and a quadratic data term `J(x) = ½‖Ax - f‖²`.

use std::sync::Arc;

use crate::engine::{DeltaFn, InclusionWitness, PlanScalars, SaddleInfo, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{op_norm, vadd, vsub, BlockLayout, BlockVec, LinearMap};
use crate::problems::{SaddleProblem, StepSize};

/// Norm regime: the gap certificates need `‖A‖ ≤ 1`, the iterate
/// certificates only `‖A‖ < √2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GistRegime {
    Iterate,
    Gap,
}

pub struct GistSolver {
    problem: SaddleProblem,
    m: LinearMap,
    zm: LinearMap,
}

pub fn make_gist(problem: &SaddleProblem, regime: GistRegime, force: bool, seed: u64) -> Result<GistSolver> {
    if problem.g.name != "zero" {
        return Err(Error::Invalid("this method needs G = 0".into()));
    }
    let a_norm = problem.j.l.sqrt();
    if !a_norm.is_finite() {
        return Err(Error::Invalid("the data term must have a finite curvature bound".into()));
    }
    let bound_ok = match regime {
        GistRegime::Iterate => a_norm < 2.0f64.sqrt(),
        GistRegime::Gap => a_norm <= 1.0 + 1e-12,
    };
    if !bound_ok && !force {
        return Err(Error::Precondition(match regime {
            GistRegime::Iterate => format!("design-matrix bound: |A| = {a_norm} >= sqrt(2)"),
            GistRegime::Gap => format!("gap-regime design-matrix bound: |A| = {a_norm} > 1"),
        }));
    }
    let k_norm = op_norm(&problem.k, 1e-10, 10_000, seed)?;
    if k_norm > 1.0 + 1e-9 && !force {
        return Err(Error::Precondition(format!("coupling-operator bound: |K| = {k_norm} > 1")));
    }
    let (nx, ny) = (problem.dim_x(), problem.dim_y());
    let kk = problem.k.compose(&problem.k.adjoint());
    let m = LinearMap::block2(
        LinearMap::identity(nx),
        LinearMap::zero(nx, ny),
        LinearMap::zero(ny, nx),
        LinearMap::identity(ny).sub(&kk),
    );
    Ok(GistSolver { problem: problem.clone(), zm: m.clone(), m })
}

impl Solver for GistSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::pair(self.problem.dim_x(), self.problem.dim_y())
    }

    fn step(&mut self, _i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let (x, y) = (u.block(0), u.block(1));
        let k = &self.problem.k;
        let grad_x = self.problem.j.grad(x);
        let descent = vsub(x, &grad_x);
        // q = (I - KK*) yⁱ + K(xⁱ - ∇J(xⁱ))
        let ky = k.apply_adjoint(y);
        let q = vadd(&vsub(y, &k.apply(&ky)), &k.apply(&descent));
        let y_next = self.problem.fstar.prox(&StepSize::Scalar(1.0), &q);
        let x_next = vsub(&descent, &k.apply_adjoint(&y_next));

        let fy_sel = vsub(&q, &y_next);
        let gx_sel = self.problem.j.grad(&x_next);
        let mut h_sel = vadd(&gx_sel, &k.apply_adjoint(&y_next));
        h_sel.extend(vsub(&fy_sel, &k.apply(&x_next)));

        let vprime: crate::engine::VecFn = {
            let j = self.problem.j.clone();
            let gp = grad_x.clone();
            let nx = x.len();
            Arc::new(move |v: &[f64]| {
                let mut out = vsub(&gp, &j.grad(&v[..nx]));
                out.extend(vec![0.0; v.len() - nx]);
                out
            })
        };

        let delta: DeltaFn = StepPlan::zero_delta();
        let dim = u.dim();
        let saddle = SaddleInfo {
            k: k.clone(),
            gamma: 0.0,
            l_coco: self.problem.j.l,
            gx_sel,
            fy_sel,
            vj: Some(vprime.clone()),
        };
        let mut data = x_next;
        data.extend(y_next);
        let plan = StepPlan {
            m: self.m.clone(),
            w: LinearMap::identity(dim),
            z: LinearMap::identity(dim),
            zm: self.zm.clone(),
            zm_next: self.zm.clone(),
            vprime: Some(vprime),
            delta,
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars {
                tau: Some(1.0),
                sigma: Some(1.0),
                phi: Some(1.0),
                psi: Some(1.0),
                omega: None,
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
