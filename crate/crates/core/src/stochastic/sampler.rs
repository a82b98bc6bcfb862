//! Block sampling and the probability-weighted projection calculus.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linops::{max_eig_sym, BlockLayout, LinearMap};
use crate::problems::SmoothFn;
use crate::rng::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingScheme {
    /// Each block enters independently with its inclusion probability;
    /// empty draws are rejected and redrawn (counted by the caller).
    IndependentInclusion,
    /// Exactly one block, uniformly: inclusion probability 1/m.
    UniformSingleBlock,
    /// Every block, every iteration.
    Full,
}

/// Sampler of block subsets with per-block inclusion probabilities.
#[derive(Clone, Debug)]
pub struct BlockSampler {
    pub scheme: SamplingScheme,
    pub layout: BlockLayout,
    /// π_j = P[j ∈ S(i)] > 0 of the draws actually used. Empty draws are
    /// rejected and redrawn, so under independent inclusion these are the
    /// raw probabilities corrected by 1/(1 - P[∅]); the weighting built
    /// from them keeps `𝓔[Π_S] = I` exact.
    pub pi: Vec<f64>,
    /// Raw per-block probabilities driving the independent draws.
    raw_pi: Vec<f64>,
    pub seed: u64,
}

impl BlockSampler {
    pub fn new(
        scheme: SamplingScheme,
        layout: BlockLayout,
        pi: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        let m = layout.n_blocks();
        let raw_pi = match scheme {
            SamplingScheme::Full => vec![1.0; m],
            SamplingScheme::UniformSingleBlock => vec![1.0 / m as f64; m],
            SamplingScheme::IndependentInclusion => {
                let pi = pi.ok_or_else(|| {
                    Error::Invalid("independent inclusion needs per-block probabilities".into())
                })?;
                if pi.len() != m {
                    return Err(Error::Invalid(format!("{} probabilities for {m} blocks", pi.len())));
                }
                pi
            }
        };
        if raw_pi.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::Invalid("inclusion probabilities must lie in (0, 1]".into()));
        }
        let pi = match scheme {
            SamplingScheme::IndependentInclusion => {
                let p_empty: f64 = raw_pi.iter().map(|p| 1.0 - p).product();
                raw_pi.iter().map(|p| p / (1.0 - p_empty)).collect()
            }
            _ => raw_pi.clone(),
        };
        Ok(BlockSampler { scheme, layout, pi, raw_pi, seed })
    }

    pub fn m(&self) -> usize {
        self.layout.n_blocks()
    }

    /// Raw (pre-conditioning) inclusion probabilities of the draws.
    pub fn raw_pi(&self) -> &[f64] {
        &self.raw_pi
    }

    /// Draws the subset of iteration `i`; deterministic in `(seed, i)`
    /// regardless of call order. Returns the sampled-step operators and
    /// the number of rejected empty draws.
    pub fn sample(&self, i: usize) -> (SampledStep, usize) {
        let mut rng = stream_rng(self.seed, i as u64);
        let m = self.m();
        let mut rejected = 0;
        let s: Vec<usize> = loop {
            let draw: Vec<usize> = match self.scheme {
                SamplingScheme::Full => (0..m).collect(),
                SamplingScheme::UniformSingleBlock => vec![rng.random_range(0..m)],
                SamplingScheme::IndependentInclusion => (0..m)
                    .filter(|j| rng.random_range(0.0..1.0) < self.raw_pi[*j])
                    .collect(),
            };
            if !draw.is_empty() {
                break draw;
            }
            rejected += 1;
        };
        let dim = self.layout.dim();
        let mask = self.layout.mask(&s);
        let mut pid = vec![0.0; dim];
        for &j in &s {
            let (off, len) = self.layout.extent(j);
            for k in off..off + len {
                pid[k] = 1.0 / self.pi[j];
            }
        }
        let p_s = LinearMap::projection_mask(&mask);
        let pi_s = LinearMap::diagonal(pid);
        (SampledStep { s, p_s, pi_s }, rejected)
    }
}

/// One sampled step: the subset, its projection `P_S = Σ_{j∈S} P_j`, and
/// the unbiased weighting `Π_S = Σ_{j∈S} π_j⁻¹ P_j`.
#[derive(Clone)]
pub struct SampledStep {
    pub s: Vec<usize>,
    pub p_s: LinearMap,
    pub pi_s: LinearMap,
}

/// The smoothness factor of `J` relative to the weighting `Π_S`: the
/// largest eigenvalue of `Π_S^{1/2} ∇²J Π_S^{1/2}` on the sampled range
/// for quadratic objectives, or the declared per-block constants
/// (`max_j L_j/π_j` over the subset) otherwise.
pub fn blockwise_l(
    j: &SmoothFn,
    layout: &BlockLayout,
    s: &[usize],
    pi: &[f64],
    declared: Option<&[f64]>,
) -> Result<f64> {
    if let Some(ls) = declared {
        return Ok(s.iter().map(|&jx| ls[jx] / pi[jx]).fold(0.0f64, f64::max));
    }
    let hess = j
        .hess(&vec![0.0; j.dim])
        .ok_or_else(|| Error::Missing("blockwise smoothness needs a quadratic objective or declared per-block constants".into()))?;
    let a = hess.to_dense();
    let dim = layout.dim();
    let mut w = vec![0.0; dim];
    for &jx in s {
        let (off, len) = layout.extent(jx);
        for k in off..off + len {
            w[k] = 1.0 / pi[jx].sqrt();
        }
    }
    let mut b = nalgebra::DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            b[(r, c)] = w[r] * a[(r, c)] * w[c];
        }
    }
    Ok(max_eig_sym(&b).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{probe_projection, seminorm_sq};
    use approx::assert_relative_eq;

    #[test]
    fn full_scheme_is_identity_weighting() {
        let s = BlockSampler::new(SamplingScheme::Full, BlockLayout::uniform(3, 2), None, 1).unwrap();
        let (step, rejected) = s.sample(0);
        assert_eq!(step.s, vec![0, 1, 2]);
        assert_eq!(rejected, 0);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(step.pi_s.apply(&x), x.to_vec());
    }

    #[test]
    fn single_block_weighting_inverts_probability() {
        let s =
            BlockSampler::new(SamplingScheme::UniformSingleBlock, BlockLayout::uniform(3, 1), None, 2)
                .unwrap();
        let (step, _) = s.sample(5);
        assert_eq!(step.s.len(), 1);
        let mut e = vec![0.0; 3];
        e[step.s[0]] = 1.0;
        assert_relative_eq!(step.pi_s.apply(&e)[step.s[0]], 3.0);
    }

    #[test]
    fn sampled_projection_is_projection() {
        let s = BlockSampler::new(
            SamplingScheme::IndependentInclusion,
            BlockLayout::uniform(4, 2),
            Some(vec![0.5, 0.25, 0.75, 0.5]),
            3,
        )
        .unwrap();
        let (step, _) = s.sample(7);
        assert!(probe_projection(&step.p_s, 20, 1e-12, 9).pass);
    }

    #[test]
    fn sampling_deterministic_in_seed_and_iteration() {
        let s = BlockSampler::new(
            SamplingScheme::IndependentInclusion,
            BlockLayout::uniform(5, 1),
            Some(vec![0.5; 5]),
            11,
        )
        .unwrap();
        let (a, _) = s.sample(13);
        // draw other iterations in between; iteration 13 must not change
        let _ = s.sample(0);
        let _ = s.sample(99);
        let (b, _) = s.sample(13);
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn weighting_is_unbiased_monte_carlo() {
        // mean of Π over 10⁴ draws within 0.05 of the identity, entrywise
        let s = BlockSampler::new(
            SamplingScheme::IndependentInclusion,
            BlockLayout::uniform(2, 1),
            Some(vec![0.5, 0.5]),
            17,
        )
        .unwrap();
        let mut acc = vec![0.0; 2];
        let draws = 10_000;
        for i in 0..draws {
            let (step, _) = s.sample(i);
            let d0 = step.pi_s.apply(&[1.0, 0.0])[0];
            let d1 = step.pi_s.apply(&[0.0, 1.0])[1];
            acc[0] += d0;
            acc[1] += d1;
        }
        for a in &acc {
            assert!((a / draws as f64 - 1.0).abs() <= 0.05);
        }
    }

    #[test]
    fn inclusion_frequency_matches_pi() {
        let pi = vec![0.3, 0.7, 0.5];
        let s = BlockSampler::new(
            SamplingScheme::IndependentInclusion,
            BlockLayout::uniform(3, 1),
            Some(pi.clone()),
            23,
        )
        .unwrap();
        let reps = 20_000usize;
        let mut counts = vec![0usize; 3];
        for i in 0..reps {
            let (step, _) = s.sample(i);
            for &j in &step.s {
                counts[j] += 1;
            }
        }
        // the stored probabilities are the exact conditioned ones
        for j in 0..3 {
            let freq = counts[j] as f64 / reps as f64;
            let p = s.pi[j];
            let bound = 3.0 * (p * (1.0 - p) / reps as f64).sqrt();
            assert!((freq - p).abs() <= bound, "block {j}: freq {freq} vs pi {p}");
            assert!(s.pi[j] >= pi[j]); // conditioning only raises them
        }
    }

    #[test]
    fn blockwise_l_eigenvalue_of_sampled_block() {
        let j = SmoothFn::diag_quadratic(vec![1.0, 4.0]);
        let layout = BlockLayout::uniform(2, 1);
        // S = {0} with π₀ = 1 gives the plain block curvature 1
        let l = blockwise_l(&j, &layout, &[0], &[1.0, 1.0], None).unwrap();
        assert_relative_eq!(l, 1.0, epsilon = 1e-12);
        // full block with π = 1 recovers the global constant
        let l = blockwise_l(&j, &layout, &[0, 1], &[1.0, 1.0], None).unwrap();
        assert_relative_eq!(l, 4.0, epsilon = 1e-12);
        // π₀ = ½ scales the sampled curvature by 2
        let l = blockwise_l(&j, &layout, &[0], &[0.5, 1.0], None).unwrap();
        assert_relative_eq!(l, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn relative_smoothness_holds_on_probes() {
        // J(u+Πh) ≤ J(u) + ⟨∇J(u), h⟩_Π + (L_S/2)‖h‖²_Π on 10³ samples
        let a = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let j = SmoothFn::quadratic_form(a, vec![0.0; 3]);
        let layout = BlockLayout::uniform(3, 1);
        let pi = vec![0.5, 0.5, 0.5];
        let sampler =
            BlockSampler::new(SamplingScheme::IndependentInclusion, layout.clone(), Some(pi.clone()), 31)
                .unwrap();
        let mut rng = stream_rng(7, 0);
        for i in 0..1000 {
            let (step, _) = sampler.sample(i);
            let ls = blockwise_l(&j, &layout, &step.s, &pi, None).unwrap();
            let u = crate::rng::normal_vec(&mut rng, 3);
            let h = crate::rng::normal_vec(&mut rng, 3);
            let pih = step.pi_s.apply(&h);
            let lhs = j.eval(&crate::linops::vadd(&u, &pih));
            let rhs = j.eval(&u)
                + crate::linops::dot(&step.pi_s.apply(&j.grad(&u)), &h)
                + 0.5 * ls * seminorm_sq(&step.pi_s, &h);
            assert!(lhs <= rhs + 1e-10 * (1.0 + lhs.abs() + rhs.abs()), "{lhs} vs {rhs}");
            // co-coercivity relative to the weighting with the same factor
            let v = crate::rng::normal_vec(&mut rng, 3);
            let gd = crate::linops::vsub(&j.grad(&u), &j.grad(&v));
            let co_lhs = seminorm_sq(&step.pi_s, &gd) / ls;
            let co_rhs = crate::linops::dot(&gd, &crate::linops::vsub(&u, &v));
            assert!(co_lhs <= co_rhs + 1e-10 * (1.0 + co_rhs.abs()), "{co_lhs} vs {co_rhs}");
        }
    }
}
