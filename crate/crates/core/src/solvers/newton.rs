//! Newton's method and its proximal variant as preconditioned proximal
//! point steps with `M_{i+1} = ∇²J(uⁱ)`, `W = I`, and the correction
//! `V'(u) = ∇J(uⁱ) - ∇J(u)`.
//!
//! The scaled prox of the proximal variant is supported where the metric
//! is diagonal (or the problem is one-dimensional), matching what the
//! closed-form catalog functions can deliver.

use std::sync::Arc;

use crate::engine::{InclusionWitness, PlanScalars, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{min_eig_sym, norm, vadd, vsub, BlockLayout, BlockVec, LinearMap, MapTag};
use crate::problems::{CompositeProblem, StepSize};

pub struct NewtonSolver {
    problem: CompositeProblem,
    proximal: bool,
    phi: f64,
    /// Root used by the certified test-weight update (δ needs the ball
    /// radius to the solution); without it φ stays constant and the plan
    /// is not marked certified.
    u_star: Option<Vec<f64>>,
}

pub fn make_newton(problem: &CompositeProblem, proximal: bool) -> Result<NewtonSolver> {
    if problem.j.hess(&vec![0.0; problem.dim()]).is_none() {
        return Err(Error::Invalid("Newton's method needs second-order access to J".into()));
    }
    if !proximal && problem.g.name != "zero" {
        return Err(Error::Invalid("plain Newton needs G = 0; use the proximal variant".into()));
    }
    let u_star = problem.known_solution.clone();
    Ok(NewtonSolver { problem: problem.clone(), proximal, phi: 1.0, u_star })
}

/// Extracts the diagonal of a diagonal-structured metric.
fn diag_of(map: &LinearMap) -> Option<Vec<f64>> {
    match map.tag() {
        MapTag::Diagonal | MapTag::ScaledIdentity | MapTag::Projection => {
            let n = map.dim_in();
            let mut d = vec![0.0; n];
            let mut e = vec![0.0; n];
            for k in 0..n {
                e[k] = 1.0;
                d[k] = map.apply(&e)[k];
                e[k] = 0.0;
            }
            Some(d)
        }
        _ => None,
    }
}

impl Solver for NewtonSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::single(self.problem.dim())
    }

    fn step(&mut self, i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let j = &self.problem.j;
        let hess = j.hess(u.as_slice()).expect("checked at construction");
        let g = j.grad(u.as_slice());
        let dim = u.dim();

        let hess_dense = hess.to_dense();
        let lam_min = min_eig_sym(&hess_dense);
        if lam_min <= 0.0 {
            return Err(Error::StepFailed {
                iteration: i,
                message: format!("non-positive Hessian: smallest eigenvalue {lam_min:.3e}"),
            });
        }

        let u_next: Vec<f64>;
        let g_sel: Vec<f64>;
        if let Some(d) = diag_of(&hess) {
            // diagonal metric: same arithmetic for both variants, so the
            // plain method and the proximal one with G = 0 agree bitwise
            let v: Vec<f64> = u.as_slice().iter().zip(&g).zip(&d).map(|((uk, gk), dk)| uk - gk / dk).collect();
            if self.proximal {
                let inv_d: Vec<f64> = d.iter().map(|dk| 1.0 / dk).collect();
                u_next = self.problem.g.prox(&StepSize::Diag(inv_d), &v);
            } else {
                u_next = v.clone();
            }
            // metric prox optimality: D(v - u⁺) ∈ ∂G(u⁺)
            g_sel = v.iter().zip(&u_next).zip(&d).map(|((vk, uk), dk)| dk * (vk - uk)).collect();
        } else if self.proximal {
            return Err(Error::StepFailed {
                iteration: i,
                message: "proximal Newton needs a diagonal metric (or a 1-D problem)".into(),
            });
        } else {
            let chol = nalgebra::Cholesky::new(hess_dense.clone()).ok_or_else(|| Error::StepFailed {
                iteration: i,
                message: "non-positive Hessian: factorization failed".into(),
            })?;
            let step = chol.solve(&nalgebra::DVector::from_column_slice(&g));
            u_next = u.as_slice().iter().zip(step.iter()).map(|(uk, sk)| uk - sk).collect();
            g_sel = vec![0.0; dim];
        }

        let h_sel = vadd(&g_sel, &j.grad(&u_next));
        let vprime: crate::engine::VecFn = {
            let jf = j.clone();
            let gp = g.clone();
            Arc::new(move |v: &[f64]| vsub(&gp, &jf.grad(v)))
        };

        // certified test-weight update: φ_{i+1} = φ_i (1 + (1-δ_i)²) r_i
        // with δ_i the curvature uniformity over the ball reaching uⁱ around
        // the root and r_i the largest r with r∇²J(u⁺) ≤ ∇²J(uⁱ).
        let phi = self.phi;
        let mut certified = false;
        let phi_next = match (&self.u_star, j.has_hess_delta()) {
            (Some(us), true) => {
                let radius = norm(&vsub(u.as_slice(), us));
                let delta_i = j.hess_delta(us, radius, u.as_slice()).unwrap();
                let r = j.hess_dominance(u.as_slice(), &u_next).unwrap_or(1.0);
                certified = true;
                phi * (1.0 + (1.0 - delta_i) * (1.0 - delta_i)) * r
            }
            _ => phi,
        };

        let hess_next = j.hess(&u_next).expect("checked at construction");
        let plan = StepPlan {
            m: hess.clone(),
            w: LinearMap::identity(dim),
            z: LinearMap::scaled_identity(dim, phi),
            zm: hess.scale(phi),
            zm_next: hess_next.scale(phi_next),
            vprime: Some(vprime),
            delta: StepPlan::zero_delta(),
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars { tau: Some(1.0), phi: Some(phi), ..Default::default() },
            saddle: None,
            certified,
        };
        self.phi = phi_next;
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
    use crate::problems::catalog::{cosh_newton, quadratic, CoshParams, QuadraticParams};
    use approx::assert_relative_eq;

    #[test]
    fn cosh_first_step_matches_high_precision_value() {
        let p = cosh_newton(&CoshParams::default()).unwrap().as_composite().unwrap().clone();
        let mut s = make_newton(&p, false).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![0.5]), 1, &RunOptions::default()).unwrap();
        // x₁ = 0.5 - tanh(0.5)
        assert_relative_eq!(log.iterates[1].as_slice()[0], 0.0378828427399902, max_relative = 1e-12);
    }

    #[test]
    fn quadratic_one_step_from_anywhere() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let j = crate::problems::functions::SmoothFn::quadratic_form(a, vec![1.0, -2.0]);
        let p = CompositeProblem::new(crate::problems::functions::ProxFn::zero(2), j);
        let mut s = make_newton(&p, false).unwrap();
        let log =
            run_plain(&mut s, &BlockVec::from_vec(vec![10.0, -7.0]), 1, &RunOptions::default()).unwrap();
        // solution of Ax = c
        let x = log.iterates[1].as_slice();
        assert_relative_eq!(3.0 * x[0] + x[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[0] + 2.0 * x[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn error_ratio_stays_bounded_on_cosh() {
        // |x_{i+1}|/|x_i|² stays bounded (the local model gives
        // x⁺ ≈ x³/3, so the quadratic ratio even decays)
        let p = cosh_newton(&CoshParams::default()).unwrap().as_composite().unwrap().clone();
        let mut s = make_newton(&p, false).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![0.5]), 4, &RunOptions::default()).unwrap();
        let mut prev = 0.5f64;
        for it in &log.iterates[1..] {
            let x = it.as_slice()[0].abs();
            if x < 1e-14 {
                break;
            }
            assert!(x / (prev * prev) <= 1.0 / 3.0 + 1e-6, "ratio {}", x / (prev * prev));
            assert!((x - prev * prev * prev / 3.0).abs() <= prev.powi(5), "cubic local model");
            prev = x;
        }
    }

    #[test]
    fn proximal_newton_reduces_to_newton_on_zero_g() {
        let p = cosh_newton(&CoshParams::default()).unwrap().as_composite().unwrap().clone();
        let u0 = BlockVec::from_vec(vec![0.4]);
        let mut plain = make_newton(&p, false).unwrap();
        let mut proxn = make_newton(&p, true).unwrap();
        let la = run_plain(&mut plain, &u0, 5, &RunOptions::default()).unwrap();
        let lb = run_plain(&mut proxn, &u0, 5, &RunOptions::default()).unwrap();
        for (a, b) in la.iterates.iter().zip(&lb.iterates) {
            assert_eq!(a.as_slice()[0].to_bits(), b.as_slice()[0].to_bits());
        }
    }

    #[test]
    fn proximal_newton_reaches_root_with_l1_term() {
        let p = cosh_newton(&CoshParams { lambda: 1e-3 }).unwrap().as_composite().unwrap().clone();
        let mut s = make_newton(&p, true).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![0.5]), 8, &RunOptions::default()).unwrap();
        assert_eq!(log.iterates.last().unwrap().as_slice()[0], 0.0);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        // maximize-like direction: J = cosh has positive curvature, so use
        // a hand-built concave quadratic to trigger the guard
        let a = nalgebra::DMatrix::from_row_slice(1, 1, &[-1.0]);
        let j = crate::problems::functions::SmoothFn::quadratic_form(a, vec![0.0]);
        let p = CompositeProblem::new(crate::problems::functions::ProxFn::zero(1), j);
        let mut s = make_newton(&p, false).unwrap();
        let err = run_plain(&mut s, &BlockVec::from_vec(vec![1.0]), 1, &RunOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn quadratic_catalog_prox_form_is_rejected() {
        let p = quadratic(&QuadraticParams::default()).unwrap().as_composite().unwrap().clone();
        // J = 0 has a Hessian (zero map), but it is not positive definite
        let mut s = make_newton(&p, false);
        match &mut s {
            Ok(solver) => {
                assert!(run_plain(solver, &BlockVec::from_vec(vec![1.0]), 1, &RunOptions::default())
                    .is_err());
            }
            Err(_) => {}
        }
    }
}
