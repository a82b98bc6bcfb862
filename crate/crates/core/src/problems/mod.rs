//! Assembled test problems: composite and saddle-point bundles plus the
//! named catalog consumed by the CLI.

pub mod catalog;
pub mod functions;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linops::{norm, vadd, vsub, LinearMap};

pub use catalog::{catalog, CatalogProblem, DrProblem, KmProblem, ResolventPair};
pub use functions::{
    grad_fd_worst, hess_fd_worst, prox_l1, prox_perturbation_worst, prox_quadratic, ProxFn,
    SmoothFn, StepSize,
};

/// `min_x G(x) + J(x)` with prox access to `G` and gradient access to `J`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub g: ProxFn,
    pub j: SmoothFn,
    pub known_solution: Option<Vec<f64>>,
}

impl CompositeProblem {
    pub fn new(g: ProxFn, j: SmoothFn) -> Self {
        assert_eq!(g.dim, j.dim, "composite problem: G and J dimensions differ");
        CompositeProblem { g, j, known_solution: None }
    }

    pub fn with_solution(mut self, x: Vec<f64>) -> Self {
        assert_eq!(x.len(), self.dim());
        self.known_solution = Some(x);
        self
    }

    pub fn dim(&self) -> usize {
        self.g.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.g.eval(x) + self.j.eval(x)
    }

    /// Forward-backward fixed-point residual `‖x - prox_{τG}(x - τ∇J(x))‖`
    /// at the default scale `τ = 1/max(L, 1)`.
    pub fn fb_residual(&self, x: &[f64]) -> f64 {
        let l = if self.j.l.is_finite() { self.j.l } else { 1.0 };
        let tau = 1.0 / l.max(1.0);
        let fwd = vsub(x, &crate::linops::vscale(tau, &self.j.grad(x)));
        let p = self.g.prox(&StepSize::Scalar(tau), &fwd);
        norm(&vsub(x, &p))
    }
}

/// `min_x max_y G(x) + J(x) + ⟨Kx, y⟩ - F*(y)` with prox access to `G`
/// and `F*`, gradient access to `J`, and the coupling operator `K`.
#[derive(Clone)]
pub struct SaddleProblem {
    pub g: ProxFn,
    pub j: SmoothFn,
    pub fstar: ProxFn,
    pub k: LinearMap,
    /// Explicit conjugate of `F*` (i.e. `F`), used by the conventional
    /// duality gap; the relaxed gap itself does not need it.
    pub f_conj: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
    pub known_solution: Option<(Vec<f64>, Vec<f64>)>,
}

impl SaddleProblem {
    pub fn dim_x(&self) -> usize {
        self.g.dim
    }

    pub fn dim_y(&self) -> usize {
        self.fstar.dim
    }

    pub fn primal_value(&self, x: &[f64]) -> f64 {
        self.g.eval(x) + self.j.eval(x)
    }

    /// Applies the optimality operator
    /// `H(u) = (∂[G+J](x) + K*y, ∂F*(y) - Kx)` where both
    /// subdifferentials are single-valued; errors otherwise.
    pub fn h_apply(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let gx = self
            .g
            .grad(x)
            .ok_or_else(|| Error::Missing("H application needs single-valued ∂G".into()))?;
        let fy = self
            .fstar
            .grad(y)
            .ok_or_else(|| Error::Missing("H application needs single-valued ∂F*".into()))?;
        let hx = vadd(&vadd(&gx, &self.j.grad(x)), &self.k.apply_adjoint(y));
        let hy = vsub(&fy, &self.k.apply(x));
        Ok((hx, hy))
    }

    /// First-order optimality residuals of the stored solution, via prox
    /// fixed points: `(‖x*-prox_{τG}(x*-τ(∇J+K*y*))‖, ‖y*-prox_{F*}(y*+Kx*)‖)`.
    pub fn solution_residual(&self) -> Option<(f64, f64)> {
        let (xs, ys) = self.known_solution.as_ref()?;
        let l = if self.j.l.is_finite() { self.j.l } else { 1.0 };
        let tau = 1.0 / l.max(1.0);
        let mut fwd = vsub(xs, &crate::linops::vscale(tau, &self.j.grad(xs)));
        fwd = vsub(&fwd, &crate::linops::vscale(tau, &self.k.apply_adjoint(ys)));
        let px = self.g.prox(&StepSize::Scalar(tau), &fwd);
        let rx = norm(&vsub(xs, &px));
        let dual_in = vadd(ys, &self.k.apply(xs));
        let py = self.fstar.prox(&StepSize::Scalar(1.0), &dual_in);
        let ry = norm(&vsub(ys, &py));
        Some((rx, ry))
    }
}

/// Bundles `G`, `J`, `F*`, `K` into a saddle problem after checking that
/// the dimensions conform.
pub fn assemble_saddle(g: ProxFn, j: SmoothFn, fstar: ProxFn, k: LinearMap) -> Result<SaddleProblem> {
    if g.dim != j.dim {
        return Err(Error::Invalid(format!(
            "saddle assembly: G dimension {} vs J dimension {}",
            g.dim, j.dim
        )));
    }
    if k.dim_in() != g.dim || k.dim_out() != fstar.dim {
        return Err(Error::Invalid(format!(
            "saddle assembly: K is {}x{} but X has dim {} and Y dim {}",
            k.dim_out(),
            k.dim_in(),
            g.dim,
            fstar.dim
        )));
    }
    Ok(SaddleProblem { g, j, fstar, k, f_conj: None, known_solution: None })
}

/// Forward-difference 2-D gradient with Neumann boundary on an
/// `ny`-rows by `nx`-columns grid (row-major pixels). Output stacks the
/// x-differences block then the y-differences block, `2·nx·ny` total.
pub fn grad_op_2d(nx: usize, ny: usize) -> LinearMap {
    assert!(nx >= 2 && ny >= 2, "grad_op_2d needs at least a 2x2 grid");
    let n = nx * ny;
    let mut m = nalgebra::DMatrix::zeros(2 * n, n);
    for r in 0..ny {
        for c in 0..nx {
            let p = r * nx + c;
            if c + 1 < nx {
                m[(p, p + 1)] = 1.0;
                m[(p, p)] = -1.0;
            }
            if r + 1 < ny {
                m[(n + p, p + nx)] = 1.0;
                m[(n + p, p)] = -1.0;
            }
        }
    }
    LinearMap::dense(m)
}
