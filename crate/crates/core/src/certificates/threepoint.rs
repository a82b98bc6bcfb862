//! Sampled verification of the three-point inequalities that power the
//! forward-step and second-order certificates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linops::{dot, norm, seminorm_sq, vsub};
use crate::problems::SmoothFn;
use crate::rng::{normal_vec, stream_rng};

/// The eight inequality variants: first-order with a Lipschitz gradient,
/// their strongly convex refinements, and the second-order forms with the
/// curvature-uniformity factor δ over the reach ball (both the
/// step-weighted and the symmetric alternates).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreePointInequality {
    Hypomonotonicity,
    Smoothness,
    HypomonotonicityStronglyConvex,
    SmoothnessStronglyConvex,
    HypomonotonicityCurvature,
    SmoothnessCurvature,
    HypomonotonicityCurvatureAlt,
    SmoothnessCurvatureAlt,
}

impl ThreePointInequality {
    pub const ALL: [ThreePointInequality; 8] = [
        ThreePointInequality::Hypomonotonicity,
        ThreePointInequality::Smoothness,
        ThreePointInequality::HypomonotonicityStronglyConvex,
        ThreePointInequality::SmoothnessStronglyConvex,
        ThreePointInequality::HypomonotonicityCurvature,
        ThreePointInequality::SmoothnessCurvature,
        ThreePointInequality::HypomonotonicityCurvatureAlt,
        ThreePointInequality::SmoothnessCurvatureAlt,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "hypomonotonicity" => Self::Hypomonotonicity,
            "smoothness" => Self::Smoothness,
            "hypomonotonicity-sc" => Self::HypomonotonicityStronglyConvex,
            "smoothness-sc" => Self::SmoothnessStronglyConvex,
            "hypomonotonicity-c2" => Self::HypomonotonicityCurvature,
            "smoothness-c2" => Self::SmoothnessCurvature,
            "hypomonotonicity-c2-alt" => Self::HypomonotonicityCurvatureAlt,
            "smoothness-c2-alt" => Self::SmoothnessCurvatureAlt,
            other => return Err(Error::Invalid(format!("unknown three-point inequality {other:?}"))),
        })
    }

    fn needs_lipschitz(&self) -> bool {
        matches!(
            self,
            Self::Hypomonotonicity
                | Self::Smoothness
                | Self::HypomonotonicityStronglyConvex
                | Self::SmoothnessStronglyConvex
        )
    }

    fn needs_gamma(&self) -> bool {
        matches!(self, Self::HypomonotonicityStronglyConvex | Self::SmoothnessStronglyConvex)
    }

    fn needs_curvature(&self) -> bool {
        !self.needs_lipschitz()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThreePointReport {
    pub inequality: ThreePointInequality,
    pub n_samples: usize,
    pub n_violations: usize,
    /// Worst `(RHS - LHS)/scale` observed; nonpositive when everything held.
    pub worst_relative_violation: f64,
    pub pass: bool,
}

const VIOLATION_TOL: f64 = 1e-9;

/// Samples `(x*, z, x, η, τ)` over the inequality's quantifier ranges and
/// counts violations beyond the relative tolerance.
pub fn three_point_suite(
    j: &SmoothFn,
    which: ThreePointInequality,
    n_samples: usize,
    seed: u64,
) -> Result<ThreePointReport> {
    if which.needs_lipschitz() && !j.l.is_finite() {
        return Err(Error::Missing(format!(
            "{} needs a finite gradient Lipschitz constant ({} has none)",
            serde_json::to_string(&which).unwrap(),
            j.name
        )));
    }
    if which.needs_gamma() && j.gamma <= 0.0 {
        return Err(Error::Missing(format!("strongly convex variant needs gamma > 0 ({})", j.name)));
    }
    if which.needs_curvature() && (!j.has_hess_delta() || j.hess(&vec![0.0; j.dim]).is_none()) {
        return Err(Error::Missing(format!(
            "second-order variant needs curvature access with exact interval bounds ({})",
            j.name
        )));
    }

    let mut rng = stream_rng(seed, 0x3b);
    let mut n_violations = 0usize;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let xs = sample_box(&mut rng, j.dim);
        let z = sample_box(&mut rng, j.dim);
        let mut x = sample_box(&mut rng, j.dim);
        // the curvature value-forms quantify x over the reach ball around x*
        if matches!(
            which,
            ThreePointInequality::SmoothnessCurvature | ThreePointInequality::SmoothnessCurvatureAlt
        ) {
            let r = norm(&vsub(&z, &xs));
            let dir = normal_vec(&mut rng, j.dim);
            let nd = norm(&dir).max(1e-12);
            let t: f64 = rand::Rng::random_range(&mut rng, 0.0..1.0);
            x = xs.iter().zip(&dir).map(|(c, d)| c + t * r * d / nd).collect();
        }
        let (lhs, rhs) = evaluate(j, which, &xs, &z, &x, &mut rng)?;
        let scale = lhs.abs() + rhs.abs() + 1.0;
        let rel = (rhs - lhs) / scale;
        worst = worst.max(rel);
        if rel > VIOLATION_TOL {
            n_violations += 1;
        }
    }
    Ok(ThreePointReport {
        inequality: which,
        n_samples,
        n_violations,
        worst_relative_violation: worst,
        pass: n_violations == 0,
    })
}

fn sample_box(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rand::Rng::random_range(rng, -1.0..1.0)).collect()
}

/// Returns `(LHS, RHS)` of the inequality at one sample.
fn evaluate(
    j: &SmoothFn,
    which: ThreePointInequality,
    xs: &[f64],
    z: &[f64],
    x: &[f64],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(f64, f64)> {
    let gz = j.grad(z);
    let gxs = j.grad(xs);
    let dxxs = vsub(x, xs);
    let dxz = vsub(x, z);
    use ThreePointInequality::*;
    Ok(match which {
        Hypomonotonicity => {
            let lhs = dot(&vsub(&gz, &gxs), &dxxs);
            let rhs = -j.l / 4.0 * dot(&dxz, &dxz);
            (lhs, rhs)
        }
        Smoothness => {
            let lhs = dot(&gz, &dxxs);
            let rhs = j.eval(x) - j.eval(xs) - j.l / 2.0 * dot(&dxz, &dxz);
            (lhs, rhs)
        }
        HypomonotonicityStronglyConvex => {
            let tau = sample_tau(rng, 0.1, 10.0);
            let lhs = dot(&vsub(&gz, &gxs), &dxxs);
            let rhs = (2.0 * j.gamma - tau * j.l * j.l) / 2.0 * dot(&dxxs, &dxxs)
                - dot(&dxz, &dxz) / (2.0 * tau);
            (lhs, rhs)
        }
        SmoothnessStronglyConvex => {
            let tau = sample_tau(rng, 0.1, 10.0);
            let lhs = dot(&gz, &dxxs);
            let rhs = j.eval(x) - j.eval(xs)
                + (j.gamma - tau * j.l * j.l) / 2.0 * dot(&dxxs, &dxxs)
                - dot(&dxz, &dxz) / (2.0 * tau);
            (lhs, rhs)
        }
        HypomonotonicityCurvature | SmoothnessCurvature => {
            let eta = sample_box(rng, j.dim);
            let h_eta = j.hess(&eta).unwrap();
            let r = norm(&vsub(z, xs));
            let delta = j.hess_delta(xs, r, &eta).unwrap();
            let tau = sample_tau(rng, 0.05, 2.0).min(2.0);
            let quad_xxs = seminorm_sq(&h_eta, &dxxs);
            let quad_xz = seminorm_sq(&h_eta, &dxz);
            if which == HypomonotonicityCurvature {
                let lhs = dot(&vsub(&gz, &gxs), &dxxs);
                let rhs = (1.0 - delta) * (2.0 - tau) / 2.0 * quad_xxs
                    - (1.0 + delta) / (2.0 * tau) * quad_xz;
                (lhs, rhs)
            } else {
                let lhs = dot(&gz, &dxxs);
                let rhs = j.eval(x) - j.eval(xs)
                    + ((1.0 - delta) * (1.0 - tau) - 2.0 * delta) / 2.0 * quad_xxs
                    - (1.0 + delta) / (2.0 * tau) * quad_xz;
                (lhs, rhs)
            }
        }
        HypomonotonicityCurvatureAlt | SmoothnessCurvatureAlt => {
            let eta = sample_box(rng, j.dim);
            let h_eta = j.hess(&eta).unwrap();
            let r = norm(&vsub(z, xs));
            let delta = j.hess_delta(xs, r, &eta).unwrap();
            let dzxs = vsub(z, xs);
            let quad_xxs = seminorm_sq(&h_eta, &dxxs);
            let quad_zxs = seminorm_sq(&h_eta, &dzxs);
            let quad_xz = seminorm_sq(&h_eta, &dxz);
            if which == HypomonotonicityCurvatureAlt {
                let lhs = dot(&vsub(&gz, &gxs), &dxxs);
                let rhs = (1.0 - delta) / 2.0 * quad_xxs + (1.0 - delta) / 2.0 * quad_zxs
                    - 0.5 * quad_xz;
                (lhs, rhs)
            } else {
                let lhs = dot(&gz, &dxxs);
                let rhs = j.eval(x) - j.eval(xs) - delta * quad_xxs + (1.0 - delta) / 2.0 * quad_zxs
                    - 0.5 * quad_xz;
                (lhs, rhs)
            }
        }
    })
}

fn sample_tau(rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rand::Rng::random_range(rng, lo.ln()..hi.ln());
    u.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_boundary_case_is_tight() {
        // J = ½x², L = 1, x* = 0, z = -1, x = 1: LHS = -1 equals
        // RHS = -¼·‖x-z‖² = -1
        let j = SmoothFn::diag_quadratic(vec![1.0]);
        let lhs = dot(&vsub(&j.grad(&[-1.0]), &j.grad(&[0.0])), &[1.0]);
        let rhs = -j.l / 4.0 * 4.0;
        assert_relative_eq!(lhs, rhs);
        assert_relative_eq!(lhs, -1.0);
    }

    #[test]
    fn coincident_points_reduce_to_monotonicity() {
        // x = z: the penalty vanishes and the pairing is nonnegative
        let j = SmoothFn::diag_quadratic(vec![1.0, 3.0]);
        let mut rng = stream_rng(5, 0);
        for _ in 0..100 {
            let xs = sample_box(&mut rng, 2);
            let x = sample_box(&mut rng, 2);
            let lhs = dot(&vsub(&j.grad(&x), &j.grad(&xs)), &vsub(&x, &xs));
            assert!(lhs >= -1e-15);
        }
    }

    #[test]
    fn all_inequalities_hold_on_quadratic() {
        let j = SmoothFn::diag_quadratic(vec![0.5, 2.0]);
        for which in ThreePointInequality::ALL {
            let rep = three_point_suite(&j, which, 2000, 7).unwrap();
            assert!(rep.pass, "{which:?}: worst {v}", v = rep.worst_relative_violation);
        }
    }

    #[test]
    fn curvature_forms_hold_on_cosh() {
        let j = SmoothFn::cosh_1d();
        for which in [
            ThreePointInequality::HypomonotonicityCurvature,
            ThreePointInequality::SmoothnessCurvature,
            ThreePointInequality::HypomonotonicityCurvatureAlt,
            ThreePointInequality::SmoothnessCurvatureAlt,
        ] {
            let rep = three_point_suite(&j, which, 5000, 11).unwrap();
            assert!(rep.pass, "{which:?}: worst {v}", v = rep.worst_relative_violation);
        }
        // the Lipschitz forms are not claimed for cosh
        assert!(three_point_suite(&j, ThreePointInequality::Hypomonotonicity, 10, 1).is_err());
    }

    #[test]
    fn lipschitz_forms_hold_on_logcosh() {
        let j = SmoothFn::logcosh_1d();
        for which in [ThreePointInequality::Hypomonotonicity, ThreePointInequality::Smoothness] {
            let rep = three_point_suite(&j, which, 5000, 13).unwrap();
            assert!(rep.pass, "{which:?}: worst {v}", v = rep.worst_relative_violation);
        }
    }

    #[test]
    fn understated_lipschitz_constant_is_caught() {
        let mut j = SmoothFn::diag_quadratic(vec![4.0]);
        j.l = 1.0; // true curvature is 4
        j.gamma = 0.0;
        let rep = three_point_suite(&j, ThreePointInequality::Smoothness, 2000, 3).unwrap();
        assert!(!rep.pass);
        assert!(rep.n_violations > 0);
    }
}
