//! Stochastic (proximal) Newton: second-order steps restricted to a
//! sampled block subset through the pseudo-inverse of the sampled
//! principal Hessian block, `u⁺ = uⁱ - [∇²J(uⁱ)]⁺_S ∇J(uⁱ)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::engine::{InclusionWitness, PlanScalars, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{max_eig_sym, vsub, BlockLayout, BlockVec, LinearMap, MapTag};
use crate::problems::{CompositeProblem, StepSize};
use crate::rng::{normal_vec, stream_rng};
use crate::stochastic::sampler::{BlockSampler, SamplingScheme};

const PINV_TOL: f64 = 1e-10;

pub struct SNewtonSolver {
    problem: CompositeProblem,
    sampler: BlockSampler,
    proximal: bool,
    phi: f64,
    kappa: f64,
    delta_j: f64,
    p_bar: f64,
    rejected_draws: u64,
}

pub fn make_snewton(
    problem: &CompositeProblem,
    sampler: &BlockSampler,
    proximal: bool,
) -> Result<SNewtonSolver> {
    let dim = problem.dim();
    if sampler.layout.dim() != dim {
        return Err(Error::Invalid("sampler layout does not cover the problem dimension".into()));
    }
    let hess0 = problem
        .j
        .hess(&vec![0.0; dim])
        .ok_or_else(|| Error::Invalid("stochastic Newton needs second-order access to J".into()))?;
    // the certificate constants are exact only for a constant Hessian;
    // for anything else the probe-based bound is inconclusive and we
    // refuse rather than claim the certificate
    let mut rng = stream_rng(101, 0);
    let probe = normal_vec(&mut rng, dim);
    let h_probe = problem.j.hess(&probe).unwrap().to_dense();
    let a = hess0.to_dense();
    let drift = (&h_probe - &a).amax();
    if drift > 1e-12 * (1.0 + a.amax()) {
        return Err(Error::Precondition(
            "curvature drift detected: the expected-certificate constants are only exact for quadratic objectives".into(),
        ));
    }
    let delta_j = 0.0;
    if proximal && problem.g.name != "zero" {
        let diag_like = matches!(hess0.tag(), MapTag::Diagonal | MapTag::ScaledIdentity) || dim == 1;
        if !diag_like {
            return Err(Error::Invalid(
                "stochastic proximal Newton needs a diagonal metric for the scaled prox".into(),
            ));
        }
    }

    let p_bar = expected_complement_bound(&a, sampler)?;
    let bound = (3.0 - (9.0 - 8.0 * p_bar).sqrt()) / 4.0;
    if !(delta_j < bound) {
        return Err(Error::Precondition(format!(
            "expected-contraction bound: delta_J = {delta_j} >= (3-sqrt(9-8*p))/4 = {bound} at p = {p_bar}"
        )));
    }
    let kappa = (1.0 + p_bar - 3.0 * delta_j + delta_j * delta_j) / (1.0 - delta_j * delta_j);
    Ok(SNewtonSolver {
        problem: problem.clone(),
        sampler: sampler.clone(),
        proximal,
        phi: 1.0 / (1.0 - delta_j),
        kappa,
        delta_j,
        p_bar,
        rejected_draws: 0,
    })
}

/// The largest `1 - p̄` with `𝓔[(I-P_S)A(I-P_S)] ≤ (1-p̄)A`, computed from
/// the sampler's distribution (exact for the full and single-block
/// schemes; entrywise unconditional probabilities otherwise).
fn expected_complement_bound(a: &DMatrix<f64>, sampler: &BlockSampler) -> Result<f64> {
    let dim = sampler.layout.dim();
    let m = sampler.m();
    let e = match sampler.scheme {
        SamplingScheme::Full => DMatrix::zeros(dim, dim),
        SamplingScheme::UniformSingleBlock => {
            let mut acc = DMatrix::zeros(dim, dim);
            for j in 0..m {
                let mask = sampler.layout.mask(&[j]);
                let mut t = a.clone();
                for r in 0..dim {
                    for c in 0..dim {
                        if mask[r] || mask[c] {
                            t[(r, c)] = 0.0;
                        }
                    }
                }
                acc += t;
            }
            acc / m as f64
        }
        SamplingScheme::IndependentInclusion => {
            let block_of: Vec<usize> = {
                let mut b = vec![0; dim];
                for j in 0..m {
                    let (off, len) = sampler.layout.extent(j);
                    for item in b.iter_mut().skip(off).take(len) {
                        *item = j;
                    }
                }
                b
            };
            // exact conditioning on nonempty draws:
            // P[k∉S ∧ l∉S | S≠∅] = (P[both out] - P[∅]) / (1 - P[∅])
            let raw = sampler.raw_pi();
            let p_empty: f64 = raw.iter().map(|p| 1.0 - p).product();
            DMatrix::from_fn(dim, dim, |r, c| {
                let (br, bc) = (block_of[r], block_of[c]);
                let both_out = if br == bc {
                    1.0 - raw[br]
                } else {
                    (1.0 - raw[br]) * (1.0 - raw[bc])
                };
                a[(r, c)] * ((both_out - p_empty) / (1.0 - p_empty)).max(0.0)
            })
        }
    };
    // p̄ = 1 - λ_max(A^{-1/2} E A^{-1/2})
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|l| *l <= 0.0) {
        return Err(Error::Precondition("the objective curvature must be positive definite".into()));
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let b = &inv_sqrt * e * &inv_sqrt;
    let sym = (&b + b.transpose()) * 0.5;
    let p = 1.0 - max_eig_sym(&sym);
    Ok(p.clamp(0.0, 1.0))
}

impl SNewtonSolver {
    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    pub fn delta_j(&self) -> f64 {
        self.delta_j
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Solver for SNewtonSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::single(self.problem.dim())
    }

    fn step(&mut self, i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let dim = u.dim();
        let j = &self.problem.j;
        let hess = j.hess(u.as_slice()).expect("checked at construction");
        let a = hess.to_dense();
        let g = j.grad(u.as_slice());
        let (draw, rejected) = self.sampler.sample(i);
        self.rejected_draws += rejected as u64;

        // sampled coordinates and the dense principal submatrix
        let mask = self.sampler.layout.mask(&draw.s);
        let idx: Vec<usize> = (0..dim).filter(|k| mask[*k]).collect();
        let ns = idx.len();
        let a_ss = DMatrix::from_fn(ns, ns, |r, c| a[(idx[r], idx[c])]);
        let chol = nalgebra::Cholesky::new(a_ss.clone()).ok_or_else(|| Error::StepFailed {
            iteration: i,
            message: format!("singular or indefinite sampled block {:?}", draw.s),
        })?;
        let inv_ss = chol.inverse();

        // pseudo-inverse identities, verified per step: Â⁺ = P Â⁺ P holds
        // by embedding; A_S Â⁺ = Â⁺ A_S = P_S is checked numerically
        let prod = &a_ss * &inv_ss;
        let defect = (&prod - DMatrix::identity(ns, ns)).amax();
        if defect > PINV_TOL {
            return Err(Error::StepFailed {
                iteration: i,
                message: format!("pseudo-inverse identity defect {defect:.3e} on block {:?}", draw.s),
            });
        }

        // d = -Â⁺_S g, supported on the sampled coordinates
        let g_s = nalgebra::DVector::from_fn(ns, |r, _| g[idx[r]]);
        let d_s = &inv_ss * &g_s;
        let mut u_next = u.as_slice().to_vec();
        let mut g_sel = vec![0.0; dim];
        if self.proximal && self.problem.g.name != "zero" {
            // diagonal metric (enforced at construction): coordinatewise
            // scaled prox on the sampled coordinates
            let mut steps = vec![1.0; dim];
            let mut v = u.as_slice().to_vec();
            for &k in &idx {
                let akk = a[(k, k)];
                steps[k] = 1.0 / akk;
                v[k] = u.as_slice()[k] - g[k] / akk;
            }
            let full = self.problem.g.prox(&StepSize::Diag(steps), &v);
            for &k in &idx {
                u_next[k] = full[k];
                g_sel[k] = a[(k, k)] * (v[k] - full[k]);
            }
        } else {
            for (r, &k) in idx.iter().enumerate() {
                u_next[k] -= d_s[r];
            }
        }

        let h_sel = {
            let gn = j.grad(&u_next);
            let mut h = vec![0.0; dim];
            for &k in &idx {
                h[k] = g_sel[k] + gn[k];
            }
            h
        };

        // V'(v) = P_S[∇J(uⁱ) - ∇J(v)] - (I-P_S)∇²J(uⁱ)P_S(v - uⁱ): the
        // correction that absorbs the cross-block curvature so the metric
        // stays the full (self-adjoint) Hessian
        let vprime: crate::engine::VecFn = {
            let jf = j.clone();
            let gp = g.clone();
            let up = u.as_slice().to_vec();
            let p_s = draw.p_s.clone();
            let hessc = hess.clone();
            Arc::new(move |v: &[f64]| {
                let mut out = p_s.apply(&vsub(&gp, &jf.grad(v)));
                let dv = p_s.apply(&vsub(v, &up));
                let adv = hessc.apply(&dv);
                let cross = vsub(&adv, &p_s.apply(&adv));
                for (o, c) in out.iter_mut().zip(&cross) {
                    *o -= c;
                }
                out
            })
        };

        let phi = self.phi;
        let phi_next = phi * self.kappa;
        let hess_next = j.hess(&u_next).expect("checked at construction");
        let plan = StepPlan {
            m: hess.clone(),
            w: draw.p_s.clone(),
            z: LinearMap::scaled_identity(dim, phi),
            zm: hess.scale(phi),
            zm_next: hess_next.scale(phi_next),
            vprime: Some(vprime),
            delta: StepPlan::zero_delta(),
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars { tau: Some(1.0), phi: Some(phi), ..Default::default() },
            saddle: None,
            certified: true,
        };
        self.phi = phi_next;
        Ok((u.with_data(u_next), plan))
    }

    fn objective(&self, u: &BlockVec) -> Option<f64> {
        Some(self.problem.value(u.as_slice()))
    }

    fn counters(&self) -> Vec<(String, f64)> {
        vec![("rejected_empty_draws".into(), self.rejected_draws as f64)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_plain, RunOptions};
    use crate::problems::functions::{ProxFn, SmoothFn};

    fn quad_problem(diag: Vec<f64>) -> CompositeProblem {
        let j = SmoothFn::diag_quadratic(diag);
        CompositeProblem::new(ProxFn::zero(j.dim), j).with_solution(vec![0.0; 2])
    }

    #[test]
    fn full_sampling_is_plain_newton_one_step() {
        let p = quad_problem(vec![1.0, 4.0]);
        let sampler =
            BlockSampler::new(SamplingScheme::Full, BlockLayout::uniform(2, 1), None, 3).unwrap();
        let mut s = make_snewton(&p, &sampler, false).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![3.0, -2.0]), 1, &RunOptions::default())
            .unwrap();
        assert_eq!(log.iterates[1].as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn p_bar_uniform_single_block_diag() {
        let p = quad_problem(vec![1.0, 4.0]);
        let sampler =
            BlockSampler::new(SamplingScheme::UniformSingleBlock, BlockLayout::uniform(2, 1), None, 3)
                .unwrap();
        let s = make_snewton(&p, &sampler, false).unwrap();
        // 𝓔[(I-P)A(I-P)] = A/2 for two blocks, so 1-p̄ = ½
        assert!((s.p_bar() - 0.5).abs() <= 1e-12);
        assert!(s.delta_j() == 0.0);
        assert!((s.kappa() - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn single_block_updates_converge_linearly_in_expectation() {
        let p = quad_problem(vec![1.0, 4.0]);
        let sampler =
            BlockSampler::new(SamplingScheme::UniformSingleBlock, BlockLayout::uniform(2, 1), None, 3)
                .unwrap();
        // per-replicate geometric decay of the squared error; each update
        // zeroes the drawn coordinate exactly, so after both coordinates
        // have been drawn the iterate is the solution
        let mut s = make_snewton(&p, &sampler, false).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![1.0, 1.0]), 20, &RunOptions::default())
            .unwrap();
        let last = log.iterates.last().unwrap();
        assert_eq!(last.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn cross_terms_need_the_correction() {
        // non-diagonal quadratic: single-coordinate updates still satisfy
        // the step inclusion thanks to the cross-curvature correction
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let j = SmoothFn::quadratic_form(a, vec![0.0, 0.0]);
        let p = CompositeProblem::new(ProxFn::zero(2), j).with_solution(vec![0.0, 0.0]);
        let sampler =
            BlockSampler::new(SamplingScheme::UniformSingleBlock, BlockLayout::uniform(2, 1), None, 5)
                .unwrap();
        let mut s = make_snewton(&p, &sampler, false).unwrap();
        let opts = RunOptions { inclusion_tol: 1e-9, ..Default::default() };
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![1.0, -2.0]), 50, &opts).unwrap();
        // contraction toward the solution in expectation is visible even
        // on one replicate here
        assert!(log.iterates.last().unwrap().norm_sq() < 1e-6);
    }

    #[test]
    fn non_quadratic_certificate_is_refused() {
        let j = SmoothFn::cosh_1d();
        let p = CompositeProblem::new(ProxFn::zero(1), j);
        let sampler =
            BlockSampler::new(SamplingScheme::Full, BlockLayout::uniform(1, 1), None, 3).unwrap();
        assert!(make_snewton(&p, &sampler, false).is_err());
    }

    #[test]
    fn proximal_variant_soft_thresholds_blocks() {
        let lam = 0.05;
        let j = SmoothFn::diag_quadratic(vec![1.0, 2.0]);
        let g = ProxFn::l1(2, lam);
        let p = CompositeProblem::new(g, j);
        let sampler =
            BlockSampler::new(SamplingScheme::Full, BlockLayout::uniform(2, 1), None, 3).unwrap();
        let mut s = make_snewton(&p, &sampler, true).unwrap();
        let log =
            run_plain(&mut s, &BlockVec::from_vec(vec![1.0, 1.0]), 1, &RunOptions::default()).unwrap();
        // coordinatewise: prox_{λ/a}(u - a u/a) = prox(0) = 0 ... u¹ solves
        // 0 ∈ λ∂|·| + a(u¹) exactly: u¹ = 0
        assert_eq!(log.iterates[1].as_slice(), &[0.0, 0.0]);
    }
}
