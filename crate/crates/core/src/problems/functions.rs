//! Convex building blocks: prox-capable functions and smooth functions.
//!
//! All proxes here are closed form; there is no inner subproblem solver.

use std::sync::Arc;

use crate::linops::{dot, norm, vsub, BlockLayout, LinearMap};
use crate::rng::{normal_vec, stream_rng};

/// Step for a prox evaluation: one scalar, or one positive scalar per
/// coordinate (the diagonal of a positive step map).
#[derive(Clone, Debug)]
pub enum StepSize {
    Scalar(f64),
    Diag(Vec<f64>),
}

impl StepSize {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            StepSize::Scalar(t) => *t,
            StepSize::Diag(d) => d[k],
        }
    }
}

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ProxOp = Arc<dyn Fn(&StepSize, &[f64]) -> Vec<f64> + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> LinearMap + Send + Sync>;
/// `(ball_center, radius, eta) -> δ` such that
/// `(1-δ)∇²J(eta) ≤ ∇²J(ζ) ≤ (1+δ)∇²J(eta)` for all ζ in the closed ball.
type HessDeltaFn = Arc<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;
/// `(a, b) -> r`, the largest r with `r·∇²J(b) ≤ ∇²J(a)`.
type HessDomFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A convex function accessed through its value and its proximal map,
/// with an optional gradient where the subdifferential is single-valued.
#[derive(Clone)]
pub struct ProxFn {
    pub name: &'static str,
    pub dim: usize,
    /// Strong-convexity modulus; 0 is plain convexity.
    pub gamma: f64,
    /// Block layout under which the function separates, if any.
    pub separable_blocks: Option<BlockLayout>,
    eval: EvalFn,
    prox: ProxOp,
    grad: Option<GradFn>,
}

impl ProxFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// `argmin_u ½ Σ_k (u_k - x_k)²/step_k + f(u)`; for a scalar step this
    /// is the standard prox with parameter τ.
    pub fn prox(&self, step: &StepSize, x: &[f64]) -> Vec<f64> {
        if let StepSize::Scalar(t) = step {
            assert!(*t > 0.0, "prox step must be positive, got {t}");
        }
        (self.prox)(step, x)
    }

    pub fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(x))
    }

    pub fn zero(dim: usize) -> Self {
        ProxFn {
            name: "zero",
            dim,
            gamma: 0.0,
            separable_blocks: Some(BlockLayout::uniform(dim, 1)),
            eval: Arc::new(|_| 0.0),
            prox: Arc::new(|_, x| x.to_vec()),
            grad: Some(Arc::new(|x| vec![0.0; x.len()])),
        }
    }

    /// `λ‖x‖₁`, coordinate-separable.
    pub fn l1(dim: usize, lambda: f64) -> Self {
        ProxFn {
            name: "l1",
            dim,
            gamma: 0.0,
            separable_blocks: Some(BlockLayout::uniform(dim, 1)),
            eval: Arc::new(move |x| lambda * x.iter().map(|v| v.abs()).sum::<f64>()),
            prox: Arc::new(move |step, x| {
                x.iter().enumerate().map(|(k, &v)| soft_threshold(step.at(k) * lambda, v)).collect()
            }),
            grad: None,
        }
    }

    /// `(γ/2)‖x‖²`.
    pub fn quadratic(dim: usize, gamma: f64) -> Self {
        ProxFn {
            name: "quadratic",
            dim,
            gamma,
            separable_blocks: Some(BlockLayout::uniform(dim, 1)),
            eval: Arc::new(move |x| 0.5 * gamma * dot(x, x)),
            prox: Arc::new(move |step, x| {
                x.iter().enumerate().map(|(k, &v)| v / (1.0 + step.at(k) * gamma)).collect()
            }),
            grad: Some(Arc::new(move |x| x.iter().map(|v| gamma * v).collect())),
        }
    }

    /// `½‖x - f‖²` (strongly convex with modulus 1).
    pub fn sq_distance(f: Vec<f64>) -> Self {
        let dim = f.len();
        let f1 = f.clone();
        let f2 = f.clone();
        ProxFn {
            name: "sq_distance",
            dim,
            gamma: 1.0,
            separable_blocks: Some(BlockLayout::uniform(dim, 1)),
            eval: Arc::new(move |x| 0.5 * x.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
            prox: Arc::new(move |step, x| {
                x.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let t = step.at(k);
                        (v + t * f1[k]) / (1.0 + t)
                    })
                    .collect()
            }),
            grad: Some(Arc::new(move |x| vsub(x, &f2))),
        }
    }

    /// `½‖y‖² + ⟨f, y⟩` (dual of a shifted quadratic data term).
    pub fn quad_plus_linear(f: Vec<f64>) -> Self {
        let dim = f.len();
        let f1 = f.clone();
        let f2 = f.clone();
        ProxFn {
            name: "quad_plus_linear",
            dim,
            gamma: 1.0,
            separable_blocks: Some(BlockLayout::uniform(dim, 1)),
            eval: Arc::new(move |y| 0.5 * dot(y, y) + dot(&f, y)),
            prox: Arc::new(move |step, y| {
                y.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let t = step.at(k);
                        (v - t * f1[k]) / (1.0 + t)
                    })
                    .collect()
            }),
            grad: Some(Arc::new(move |y| y.iter().zip(&f2).map(|(a, b)| a + b).collect())),
        }
    }

    /// Indicator of the box `[-r, r]^dim`; prox is the clamp.
    pub fn box_indicator(dim: usize, r: f64) -> Self {
        ProxFn {
            name: "box_indicator",
            dim,
            gamma: 0.0,
            separable_blocks: Some(BlockLayout::uniform(dim, 1)),
            eval: Arc::new(move |y| {
                let slack = 1e-9 * (1.0 + r);
                if y.iter().all(|v| v.abs() <= r + slack) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }),
            prox: Arc::new(move |_, y| y.iter().map(|v| v.clamp(-r, r)).collect()),
            grad: None,
        }
    }

    /// Indicator of per-pixel 2-balls of radius `r`: the argument is the
    /// stacked pair `(z₁, z₂)` of length `2·n_pix` and each pair
    /// `(z₁ₚ, z₂ₚ)` is constrained to the disc. Prox is the pixelwise
    /// radial projection.
    pub fn pixel_ball_indicator(n_pix: usize, r: f64) -> Self {
        ProxFn {
            name: "pixel_ball_indicator",
            dim: 2 * n_pix,
            gamma: 0.0,
            separable_blocks: None,
            eval: Arc::new(move |y| {
                let slack = 1e-9 * (1.0 + r);
                for p in 0..n_pix {
                    if (y[p] * y[p] + y[n_pix + p] * y[n_pix + p]).sqrt() > r + slack {
                        return f64::INFINITY;
                    }
                }
                0.0
            }),
            prox: Arc::new(move |_, y| {
                let mut out = y.to_vec();
                for p in 0..n_pix {
                    let m = (y[p] * y[p] + y[n_pix + p] * y[n_pix + p]).sqrt();
                    if m > r {
                        let s = r / m;
                        out[p] *= s;
                        out[n_pix + p] *= s;
                    }
                }
                out
            }),
            grad: None,
        }
    }
}

/// Soft-thresholding scalar: `sign(v)·max(|v|-t, 0)`.
pub fn soft_threshold(t: f64, v: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Componentwise prox of `τ‖·‖₁`.
pub fn prox_l1(tau: f64, x: &[f64]) -> Vec<f64> {
    assert!(tau > 0.0, "prox_l1: step must be positive, got {tau}");
    x.iter().map(|&v| soft_threshold(tau, v)).collect()
}

/// Prox of `(γ/2)‖·‖²`: the resolvent `x/(1+τγ)` of the linear map `u ↦ γu`.
pub fn prox_quadratic(tau: f64, x: &[f64], gamma: f64) -> Vec<f64> {
    assert!(tau > 0.0, "prox_quadratic: step must be positive, got {tau}");
    x.iter().map(|&v| v / (1.0 + tau * gamma)).collect()
}

/// A differentiable convex function with Lipschitz gradient and optional
/// second-order access.
#[derive(Clone)]
pub struct SmoothFn {
    pub name: &'static str,
    pub dim: usize,
    /// Lipschitz constant of the gradient.
    pub l: f64,
    /// Strong-convexity modulus; 0 is plain convexity.
    pub gamma: f64,
    eval: EvalFn,
    grad: GradFn,
    hess: Option<HessFn>,
    hess_delta: Option<HessDeltaFn>,
    hess_dominance: Option<HessDomFn>,
}

impl SmoothFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn hess(&self, x: &[f64]) -> Option<LinearMap> {
        self.hess.as_ref().map(|h| h(x))
    }

    pub fn hess_apply(&self, x: &[f64], d: &[f64]) -> Option<Vec<f64>> {
        self.hess.as_ref().map(|h| h(x).apply(d))
    }

    /// Curvature uniformity over a ball: the smallest δ with
    /// `(1-δ)∇²J(eta) ≤ ∇²J(ζ) ≤ (1+δ)∇²J(eta)` on `B̄(radius, center)`.
    /// Closed form is shipped only where the catalog can do it exactly
    /// (constant Hessians and one-dimensional fixtures).
    pub fn hess_delta(&self, center: &[f64], radius: f64, eta: &[f64]) -> Option<f64> {
        self.hess_delta.as_ref().map(|f| f(center, radius, eta))
    }

    /// The largest `r` with `r·∇²J(b) ≤ ∇²J(a)`.
    pub fn hess_dominance(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        self.hess_dominance.as_ref().map(|f| f(a, b))
    }

    pub fn has_hess_delta(&self) -> bool {
        self.hess_delta.is_some()
    }

    pub fn zero(dim: usize) -> Self {
        SmoothFn {
            name: "zero",
            dim,
            l: 0.0,
            gamma: 0.0,
            eval: Arc::new(|_| 0.0),
            grad: Arc::new(|x| vec![0.0; x.len()]),
            hess: Some(Arc::new(move |x: &[f64]| LinearMap::zero(x.len(), x.len()))),
            hess_delta: Some(Arc::new(|_, _, _| 0.0)),
            hess_dominance: Some(Arc::new(|_, _| 1.0)),
        }
    }

    /// `½⟨x, Ax⟩ - ⟨c, x⟩` for a symmetric positive semidefinite dense `A`.
    pub fn quadratic_form(a: nalgebra::DMatrix<f64>, c: Vec<f64>) -> Self {
        let dim = a.nrows();
        assert_eq!(a.ncols(), dim);
        assert_eq!(c.len(), dim);
        let l = crate::linops::max_eig_sym(&a);
        let gamma = crate::linops::min_eig_sym(&a).max(0.0);
        let a1 = a.clone();
        let a2 = a.clone();
        let c1 = c.clone();
        SmoothFn {
            name: "quadratic_form",
            dim,
            l,
            gamma,
            eval: Arc::new(move |x| {
                let v = nalgebra::DVector::from_column_slice(x);
                0.5 * (&a1 * &v).dot(&v) - dot(&c, x)
            }),
            grad: Arc::new(move |x| {
                let v = nalgebra::DVector::from_column_slice(x);
                let mut g: Vec<f64> = (&a2 * &v).data.into();
                for (gi, ci) in g.iter_mut().zip(&c1) {
                    *gi -= ci;
                }
                g
            }),
            hess: Some({
                let hm = LinearMap::dense(a);
                Arc::new(move |_: &[f64]| hm.clone())
            }),
            hess_delta: Some(Arc::new(|_, _, _| 0.0)),
            hess_dominance: Some(Arc::new(|_, _| 1.0)),
        }
    }

    /// Diagonal quadratic `½ Σ λ_k x_k²`.
    pub fn diag_quadratic(lambdas: Vec<f64>) -> Self {
        let dim = lambdas.len();
        let a = nalgebra::DMatrix::from_fn(dim, dim, |i, j| if i == j { lambdas[i] } else { 0.0 });
        Self::quadratic_form(a, vec![0.0; dim])
    }

    /// `½‖Ax - f‖²` for a dense `A`.
    pub fn least_squares(a: nalgebra::DMatrix<f64>, f: Vec<f64>) -> Self {
        let dim = a.ncols();
        assert_eq!(a.nrows(), f.len());
        let gram = a.transpose() * &a;
        let l = crate::linops::max_eig_sym(&gram);
        let gamma = crate::linops::min_eig_sym(&gram).max(0.0);
        let a1 = a.clone();
        let a2 = a.clone();
        let f1 = f.clone();
        SmoothFn {
            name: "least_squares",
            dim,
            l,
            gamma,
            eval: Arc::new(move |x| {
                let v = nalgebra::DVector::from_column_slice(x);
                let r = &a1 * v - nalgebra::DVector::from_column_slice(&f);
                0.5 * r.dot(&r)
            }),
            grad: Arc::new(move |x| {
                let v = nalgebra::DVector::from_column_slice(x);
                let r = &a2 * v - nalgebra::DVector::from_column_slice(&f1);
                (a2.transpose() * r).data.into()
            }),
            hess: Some({
                let hm = LinearMap::dense(gram);
                Arc::new(move |_: &[f64]| hm.clone())
            }),
            hess_delta: Some(Arc::new(|_, _, _| 0.0)),
            hess_dominance: Some(Arc::new(|_, _| 1.0)),
        }
    }

    /// One-dimensional `cosh`; curvature ratios over intervals are closed
    /// form, which is what the second-order certificates need.
    pub fn cosh_1d() -> Self {
        SmoothFn {
            name: "cosh",
            dim: 1,
            // Not globally Lipschitz-gradient; finite constants are not
            // claimed (certificates use the second-order route instead).
            l: f64::INFINITY,
            gamma: 1.0,
            eval: Arc::new(|x| x[0].cosh()),
            grad: Arc::new(|x| vec![x[0].sinh()]),
            hess: Some(Arc::new(|x: &[f64]| LinearMap::scaled_identity(1, x[0].cosh()))),
            hess_delta: Some(Arc::new(|center: &[f64], radius: f64, eta: &[f64]| {
                let (lo, hi) = (center[0] - radius, center[0] + radius);
                let (hmin, hmax) = cosh_range(lo, hi);
                let h_eta = eta[0].cosh();
                (hmax / h_eta - 1.0).max(1.0 - hmin / h_eta).max(0.0)
            })),
            hess_dominance: Some(Arc::new(|a: &[f64], b: &[f64]| a[0].cosh() / b[0].cosh())),
        }
    }

    /// One-dimensional `log cosh`: gradient `tanh` is globally 1-Lipschitz.
    pub fn logcosh_1d() -> Self {
        SmoothFn {
            name: "logcosh",
            dim: 1,
            l: 1.0,
            gamma: 0.0,
            eval: Arc::new(|x| x[0].cosh().ln()),
            grad: Arc::new(|x| vec![x[0].tanh()]),
            hess: Some(Arc::new(|x: &[f64]| {
                let s = 1.0 / x[0].cosh();
                LinearMap::scaled_identity(1, s * s)
            })),
            hess_delta: None,
            hess_dominance: None,
        }
    }
}

/// Extrema of `cosh` over `[lo, hi]`.
fn cosh_range(lo: f64, hi: f64) -> (f64, f64) {
    let hmax = lo.cosh().max(hi.cosh());
    let hmin = if lo <= 0.0 && 0.0 <= hi { 1.0 } else { lo.abs().min(hi.abs()).cosh() };
    (hmin, hmax)
}

// ---------------------------------------------------------------------------
// Probe checks for the function invariants
// ---------------------------------------------------------------------------

/// Worst relative mismatch between `grad` and central finite differences of
/// `eval` over random probes.
pub fn grad_fd_worst(f: &SmoothFn, n_probes: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 0xfd);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let x = normal_vec(&mut rng, f.dim);
        let g = f.grad(&x);
        for k in 0..f.dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            let scale = g[k].abs().max(1.0);
            worst = worst.max((fd - g[k]).abs() / scale);
        }
    }
    worst
}

/// Worst relative mismatch between `hess_apply` and finite differences of
/// `grad`.
pub fn hess_fd_worst(f: &SmoothFn, n_probes: usize, seed: u64) -> Option<f64> {
    f.hess.as_ref()?;
    let mut rng = stream_rng(seed, 0xfd2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let x = normal_vec(&mut rng, f.dim);
        let d = normal_vec(&mut rng, f.dim);
        let hd = f.hess_apply(&x, &d).unwrap();
        let mut xp = x.clone();
        let mut xm = x.clone();
        for k in 0..f.dim {
            xp[k] += h * d[k];
            xm[k] -= h * d[k];
        }
        let gp = f.grad(&xp);
        let gm = f.grad(&xm);
        for k in 0..f.dim {
            let fd = (gp[k] - gm[k]) / (2.0 * h);
            let scale = hd[k].abs().max(1.0);
            worst = worst.max((fd - hd[k]).abs() / scale);
        }
    }
    Some(worst)
}

/// Verifies prox optimality by local perturbation: the prox output must
/// beat `n_perturb` random small perturbations on the prox objective.
/// Returns the worst objective violation (positive means a perturbation won).
pub fn prox_perturbation_worst(
    g: &ProxFn,
    step: &StepSize,
    x: &[f64],
    n_perturb: usize,
    seed: u64,
) -> f64 {
    let u = g.prox(step, x);
    let obj = |v: &[f64]| -> f64 {
        let q: f64 = v
            .iter()
            .zip(x)
            .enumerate()
            .map(|(k, (vk, xk))| 0.5 * (vk - xk) * (vk - xk) / step.at(k))
            .sum();
        q + g.eval(v)
    };
    let base = obj(&u);
    let mut rng = stream_rng(seed, 0x9e);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n_perturb {
        let scale = if i % 2 == 0 { 1e-4 } else { 1e-2 };
        let d = normal_vec(&mut rng, u.len());
        let nd = norm(&d).max(1e-300);
        let trial: Vec<f64> = u.iter().zip(&d).map(|(uk, dk)| uk + scale * dk / nd).collect();
        let val = obj(&trial);
        if val.is_finite() {
            worst = worst.max(base - val);
        } else {
            worst = worst.max(f64::NEG_INFINITY);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn prox_l1_matches_grid_search_oracle() {
        // grid-search oracle minimizing ½(u-x)² + |u| over [-5,5], step 1e-4
        let oracle = |tau: f64, x: f64| -> f64 {
            let mut best = (f64::INFINITY, 0.0);
            let mut u = -5.0;
            while u <= 5.0 {
                let v = 0.5 * (u - x) * (u - x) + tau * u.abs();
                if v < best.0 {
                    best = (v, u);
                }
                u += 1e-4;
            }
            best.1
        };
        assert!((prox_l1(1.0, &[3.0])[0] - oracle(1.0, 3.0)).abs() <= 2e-4);
        assert!((prox_l1(1.0, &[0.5])[0] - oracle(1.0, 0.5)).abs() <= 2e-4);
        assert_eq!(prox_l1(0.7, &[0.0])[0], 0.0);
        assert_relative_eq!(prox_l1(1.0, &[3.0])[0], 2.0);
    }

    #[test]
    fn prox_quadratic_first_order_condition() {
        // u + τγu = x solved by hand: (τ=1, x=2, γ=1) → 1
        assert_relative_eq!(prox_quadratic(1.0, &[2.0], 1.0)[0], 1.0);
        // small-step continuity
        assert_relative_eq!(prox_quadratic(1e-9, &[2.0], 1.0)[0], 2.0, max_relative = 1e-8);
        assert_eq!(prox_quadratic(1.0, &[0.0], 1.0)[0], 0.0);
    }

    #[test]
    #[should_panic(expected = "positive")]
    fn prox_quadratic_rejects_zero_step() {
        prox_quadratic(0.0, &[2.0], 1.0);
    }

    #[test]
    fn prox_optimality_perturbation() {
        let g = ProxFn::l1(4, 0.8);
        let x = [3.0, -0.2, 0.0, 1.4];
        let worst = prox_perturbation_worst(&g, &StepSize::Scalar(0.6), &x, 100, 5);
        assert!(worst <= 1e-10, "worst violation {worst}");

        let q = ProxFn::sq_distance(vec![1.0, -2.0]);
        let worst = prox_perturbation_worst(&q, &StepSize::Scalar(2.0), &[0.3, 0.4], 100, 6);
        assert!(worst <= 1e-10, "worst violation {worst}");
    }

    #[test]
    fn separable_prox_matches_blockwise_scalar() {
        let g = ProxFn::l1(3, 1.0);
        let x = [2.0, -3.0, 0.4];
        let d = StepSize::Diag(vec![0.5, 2.0, 1.0]);
        let got = g.prox(&d, &x);
        for k in 0..3 {
            let scalar = g.prox(&StepSize::Scalar(d.at(k)), &x);
            assert_eq!(got[k], scalar[k]);
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let fns = [
            SmoothFn::diag_quadratic(vec![1.0, 4.0]),
            SmoothFn::cosh_1d(),
            SmoothFn::logcosh_1d(),
            SmoothFn::least_squares(
                nalgebra::DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.2, 2.0, 0.0, 1.0]),
                vec![1.0, -1.0, 0.5],
            ),
        ];
        for f in &fns {
            assert!(grad_fd_worst(f, 20, 3) <= 1e-6, "{}", f.name);
            if let Some(w) = hess_fd_worst(f, 20, 4) {
                assert!(w <= 1e-5, "{}", f.name);
            }
        }
    }

    #[test]
    fn cosh_delta_is_exact_for_intervals() {
        let f = SmoothFn::cosh_1d();
        // ball [−0.5, 0.5] around 0, eta = 0: max ratio cosh(0.5)/1
        let d = f.hess_delta(&[0.0], 0.5, &[0.0]).unwrap();
        assert_relative_eq!(d, 0.5f64.cosh() - 1.0, max_relative = 1e-15);
        // interval not containing 0
        let d = f.hess_delta(&[2.0], 0.5, &[2.0]).unwrap();
        let expect = (2.5f64.cosh() / 2.0f64.cosh() - 1.0).max(1.0 - 1.5f64.cosh() / 2.0f64.cosh());
        assert_relative_eq!(d, expect, max_relative = 1e-15);
    }
}
