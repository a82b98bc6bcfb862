//! Fixed-point iteration `u⁺ = T(uⁱ)` for an α-averaged map, cast as a
//! preconditioned proximal point step on `H(u) = T(u) - u` with
//! `V'(u) = T(uⁱ) + uⁱ - T(u) - u`.

use std::sync::Arc;

use crate::engine::{InclusionWitness, PlanScalars, Solver, StepPlan};
use crate::error::{Error, Result};
use crate::linops::{dot, vsub, BlockLayout, BlockVec, LinearMap};
use crate::problems::catalog::KmProblem;

pub struct KmSolver {
    t: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    alpha: f64,
    dim: usize,
}

/// The averaging property is asserted by the caller; it is spot-checked on
/// probes by tests, not verified globally here.
pub fn make_km(problem: &KmProblem) -> Result<KmSolver> {
    if !(problem.alpha > 0.0 && problem.alpha < 1.0) {
        return Err(Error::Precondition(format!(
            "averaging parameter must lie in (0,1): alpha = {}",
            problem.alpha
        )));
    }
    Ok(KmSolver { t: problem.t.clone(), alpha: problem.alpha, dim: problem.dim })
}

impl Solver for KmSolver {
    fn layout(&self) -> BlockLayout {
        BlockLayout::single(self.dim)
    }

    fn step(&mut self, _i: usize, u: &BlockVec) -> Result<(BlockVec, StepPlan)> {
        let u_next = (self.t)(u.as_slice());
        let h_sel = vsub(&(self.t)(&u_next), &u_next);
        let vprime: crate::engine::VecFn = {
            let t = self.t.clone();
            let tu: Vec<f64> = u_next.clone();
            let up = u.as_slice().to_vec();
            Arc::new(move |v: &[f64]| {
                // T(uⁱ) + uⁱ - T(v) - v
                let tv = t(v);
                tu.iter().zip(&up).zip(&tv).zip(v).map(|(((a, b), c), d)| a + b - c - d).collect()
            })
        };
        let alpha = self.alpha;
        let beta = (0.5 - alpha).max(0.0);
        let coeff = (alpha + 2.0 * beta - 1.0) / (2.0 * (1.0 - alpha));
        let delta: crate::engine::DeltaFn = Arc::new(move |un: &BlockVec, up: &BlockVec, _: &BlockVec| {
            let d = vsub(un.as_slice(), up.as_slice());
            coeff * dot(&d, &d)
        });
        let id = LinearMap::identity(self.dim);
        let plan = StepPlan {
            m: id.clone(),
            w: id.clone(),
            z: id.clone(),
            zm: id.clone(),
            zm_next: id,
            vprime: Some(vprime),
            delta,
            witness: InclusionWitness::Forward { h_sel },
            scalars: PlanScalars { tau: Some(1.0), phi: Some(1.0), ..Default::default() },
            saddle: None,
            certified: true,
        };
        Ok((u.with_data(u_next), plan))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_plain, RunOptions};
    use crate::problems::catalog::{km_linear, CatalogProblem, KmLinearParams};

    fn km(kind: &str, alpha: f64) -> KmProblem {
        match km_linear(&KmLinearParams { alpha, dim: 1, kind: Some(kind.into()) }).unwrap() {
            CatalogProblem::FixedPoint(p) => p,
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_map_collapses_in_one_step() {
        let mut s = make_km(&km("scaled", 0.5)).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![7.0]), 3, &RunOptions::default()).unwrap();
        assert_eq!(log.iterates[1].as_slice(), &[0.0]);
        assert_eq!(log.iterates[3].as_slice(), &[0.0]);
    }

    #[test]
    fn fixed_point_input_is_stationary() {
        let mut s = make_km(&km("scaled", 0.75)).unwrap();
        let log = run_plain(&mut s, &BlockVec::from_vec(vec![0.0]), 5, &RunOptions::default()).unwrap();
        for it in &log.iterates {
            assert_eq!(it.as_slice(), &[0.0]);
        }
    }

    #[test]
    fn alpha_outside_unit_interval_rejected() {
        let p = km("scaled", 0.5);
        let bad = KmProblem { alpha: 1.0, ..p };
        assert!(make_km(&bad).is_err());
    }

    #[test]
    fn line_projection_distances_halve() {
        let p = match km_linear(&KmLinearParams { alpha: 0.5, dim: 2, kind: Some("line".into()) }).unwrap()
        {
            CatalogProblem::FixedPoint(p) => p,
            _ => unreachable!(),
        };
        let fp = p.fixed_point_for.clone().unwrap();
        let mut s = make_km(&p).unwrap();
        let u0 = BlockVec::from_vec(vec![3.0, -4.0]);
        let ustar = fp(u0.as_slice());
        let log = run_plain(&mut s, &u0, 10, &RunOptions::default()).unwrap();
        // projections are firmly nonexpansive; the normal component halves
        let mut dist = crate::linops::norm(&vsub(u0.as_slice(), &ustar));
        for it in &log.iterates[1..] {
            let d = crate::linops::norm(&vsub(it.as_slice(), &ustar));
            assert!((d - 0.5 * dist).abs() <= 1e-12 * (1.0 + dist));
            dist = d;
        }
    }
}
