//! Sampled verification of the projected-gradient smoothness chain: the
//! five properties of relative smoothness along the range of a weighting
//! operator `P`, plus the implication structure between them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linops::{dot, norm, seminorm_sq, vadd, vsub, LinearMap};
use crate::problems::SmoothFn;
use crate::rng::{normal_vec, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceProperty {
    /// (i) `‖∇J(x)-∇J(y)‖_P ≤ L‖x-y‖_{P⁺}`
    RelativeLipschitz,
    /// (ii) `⟨∇J(x+Ph)-∇J(x), Ph⟩ ≤ L‖h‖_P²`
    DirectionalBound,
    /// (iii) `J(x+Ph) ≤ J(x) + ⟨∇J(x), Ph⟩ + (L/2)‖h‖_P²`
    RelativeSmoothness,
    /// (iv) `J(y) ≤ J(x) + ⟨∇J(y), y-x⟩ - (1/2L)‖∇J(x)-∇J(y)‖_P²`
    GradientSmoothness,
    /// (v) `(1/L)‖∇J(x)-∇J(y)‖_P² ≤ ⟨∇J(x)-∇J(y), x-y⟩`
    RelativeCocoercivity,
}

impl SubspaceProperty {
    pub const ALL: [SubspaceProperty; 5] = [
        SubspaceProperty::RelativeLipschitz,
        SubspaceProperty::DirectionalBound,
        SubspaceProperty::RelativeSmoothness,
        SubspaceProperty::GradientSmoothness,
        SubspaceProperty::RelativeCocoercivity,
    ];
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyOutcome {
    pub property: SubspaceProperty,
    pub n_violations: usize,
    pub worst_relative_violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceReport {
    pub n_samples: usize,
    pub outcomes: Vec<PropertyOutcome>,
    /// Empirical contradiction of the implication chain: relative
    /// smoothness held everywhere but co-coercivity failed somewhere.
    pub implication_failure: bool,
    pub pass: bool,
}

const VIOLATION_TOL: f64 = 1e-9;
const PINV_TOL: f64 = 1e-10;

/// Checks the five-property chain for `J` relative to a self-adjoint
/// positive semidefinite `P` with pseudo-inverse `p_pinv` and claimed
/// factor `l`.
pub fn subspace_chain(
    j: &SmoothFn,
    p: &LinearMap,
    p_pinv: &LinearMap,
    l: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SubspaceReport> {
    let n = j.dim;
    if p.dim_in() != n || p.dim_out() != n || p_pinv.dim_in() != n || p_pinv.dim_out() != n {
        return Err(Error::Invalid("weighting operator dimensions do not match the function".into()));
    }
    // P P⁺ P = P, self-adjointness, and positive semidefiniteness on probes
    let mut rng = stream_rng(seed, 0x5c);
    for _ in 0..32 {
        let x = normal_vec(&mut rng, n);
        let px = p.apply(&x);
        let papp = p.apply(&p_pinv.apply(&px));
        let dev = norm(&vsub(&papp, &px));
        if dev > PINV_TOL * (1.0 + norm(&px)) {
            return Err(Error::Invalid(format!("pseudo-inverse identity P P⁺ P = P fails: defect {dev}")));
        }
        if seminorm_sq(p, &x) < -PINV_TOL * (1.0 + dot(&x, &x)) {
            return Err(Error::Invalid("weighting operator is not positive semidefinite".into()));
        }
    }
    if !crate::linops::probe_self_adjoint(p, 32, 1e-10, seed).pass {
        return Err(Error::Invalid("weighting operator is not self-adjoint".into()));
    }

    let mut outcomes: Vec<PropertyOutcome> = SubspaceProperty::ALL
        .iter()
        .map(|p| PropertyOutcome { property: *p, n_violations: 0, worst_relative_violation: f64::NEG_INFINITY })
        .collect();

    let record = |idx: usize, lhs: f64, rhs: f64, outs: &mut Vec<PropertyOutcome>| {
        // all five are stated as LHS ≤ RHS here
        let scale = lhs.abs() + rhs.abs() + 1.0;
        let rel = (lhs - rhs) / scale;
        let o = &mut outs[idx];
        o.worst_relative_violation = o.worst_relative_violation.max(rel);
        if rel > VIOLATION_TOL {
            o.n_violations += 1;
        }
    };

    for _ in 0..n_samples {
        let x = normal_vec(&mut rng, n);
        let y = normal_vec(&mut rng, n);
        let h = normal_vec(&mut rng, n);
        let gx = j.grad(&x);
        let gy = j.grad(&y);
        let gdiff = vsub(&gx, &gy);
        let ph = p.apply(&h);
        let xph = vadd(&x, &ph);

        // (i)
        let lhs = seminorm_sq(p, &gdiff).max(0.0).sqrt();
        let rhs = l * seminorm_sq(p_pinv, &vsub(&x, &y)).max(0.0).sqrt();
        record(0, lhs, rhs, &mut outcomes);
        // (ii)
        let lhs = dot(&vsub(&j.grad(&xph), &gx), &ph);
        let rhs = l * seminorm_sq(p, &h);
        record(1, lhs, rhs, &mut outcomes);
        // (iii)
        let lhs = j.eval(&xph);
        let rhs = j.eval(&x) + dot(&gx, &ph) + 0.5 * l * seminorm_sq(p, &h);
        record(2, lhs, rhs, &mut outcomes);
        // (iv)
        let lhs = j.eval(&y);
        let rhs = j.eval(&x) + dot(&gy, &vsub(&y, &x)) - seminorm_sq(p, &gdiff) / (2.0 * l);
        record(3, lhs, rhs, &mut outcomes);
        // (v)
        let lhs = seminorm_sq(p, &gdiff) / l;
        let rhs = dot(&gdiff, &vsub(&x, &y));
        record(4, lhs, rhs, &mut outcomes);
    }

    let implication_failure = outcomes[2].n_violations == 0 && outcomes[4].n_violations > 0;
    let pass = outcomes.iter().all(|o| o.n_violations == 0) && !implication_failure;
    Ok(SubspaceReport { n_samples, outcomes, implication_failure, pass })
}

/// Pseudo-inverse of a diagonal weighting (zero entries stay zero).
pub fn diag_pseudo_inverse(d: &[f64]) -> LinearMap {
    LinearMap::diagonal(d.iter().map(|&v| if v != 0.0 { 1.0 / v } else { 0.0 }).collect())
}
