//! Finite-dimensional vectors with block structure, linear operators with
//! adjoints, signed quadratic forms, and probe-based operator checks.
//!
//! Weights of the norm-like forms here are allowed to be indefinite and even
//! non-self-adjoint; [`seminorm_sq`] is a signed quadratic form, not a norm.
//! Callers that need a true metric must pass [`probe_self_adjoint`] first.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{normal_vec, stream_rng};

// ---------------------------------------------------------------------------
// Block layout and block vectors
// ---------------------------------------------------------------------------

/// Partition of `0..dim` into contiguous blocks (offset, length).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    extents: Vec<(usize, usize)>,
    dim: usize,
}

impl BlockLayout {
    /// Layout from block lengths; blocks are laid out consecutively.
    pub fn from_lens(lens: &[usize]) -> Self {
        let mut extents = Vec::with_capacity(lens.len());
        let mut off = 0;
        for &l in lens {
            extents.push((off, l));
            off += l;
        }
        BlockLayout { extents, dim: off }
    }

    pub fn single(dim: usize) -> Self {
        Self::from_lens(&[dim])
    }

    pub fn pair(a: usize, b: usize) -> Self {
        Self::from_lens(&[a, b])
    }

    /// `m` equal blocks of length `len`.
    pub fn uniform(m: usize, len: usize) -> Self {
        Self::from_lens(&vec![len; m])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_blocks(&self) -> usize {
        self.extents.len()
    }

    pub fn extent(&self, j: usize) -> (usize, usize) {
        self.extents[j]
    }

    pub fn extents(&self) -> &[(usize, usize)] {
        &self.extents
    }

    /// Coordinate mask of a subset of blocks.
    pub fn mask(&self, blocks: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for &j in blocks {
            let (off, len) = self.extents[j];
            for x in &mut m[off..off + len] {
                *x = true;
            }
        }
        m
    }
}

/// A point of the ambient space, optionally split into orthogonal blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVec {
    data: Vec<f64>,
    layout: BlockLayout,
}

impl BlockVec {
    pub fn new(data: Vec<f64>, layout: BlockLayout) -> Self {
        assert_eq!(
            data.len(),
            layout.dim(),
            "block layout (dim {}) does not cover the data (len {})",
            layout.dim(),
            data.len()
        );
        BlockVec { data, layout }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        let layout = BlockLayout::single(data.len());
        BlockVec { data, layout }
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        BlockVec { data: vec![0.0; layout.dim()], layout }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let (off, len) = self.layout.extent(j);
        &self.data[off..off + len]
    }

    /// Same layout, new data.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        BlockVec::new(data, self.layout.clone())
    }

    pub fn sub(&self, other: &BlockVec) -> BlockVec {
        self.with_data(vsub(&self.data, &other.data))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }
}

// Small slice helpers used throughout the crate.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: dimension mismatch {} vs {}", a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "vadd: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "vsub: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vscale(c: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// `y += c * x`
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy: dimension mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

// ---------------------------------------------------------------------------
// Linear maps
// ---------------------------------------------------------------------------

/// Structural classification of a [`LinearMap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapTag {
    Dense,
    Diagonal,
    BlockDiagonal,
    Composite,
    Projection,
    ScaledIdentity,
}

enum Node {
    Zero { rows: usize, cols: usize },
    ScaledIdentity { dim: usize, alpha: f64 },
    Diagonal { d: Vec<f64>, projection: bool },
    Dense { m: DMatrix<f64> },
    /// 2x2 block operator on a product space.
    Block2 { xx: LinearMap, xy: LinearMap, yx: LinearMap, yy: LinearMap },
    BlockDiag { layout: BlockLayout, blocks: Vec<LinearMap> },
    Scaled { c: f64, inner: LinearMap },
    Sum { a: LinearMap, b: LinearMap },
    /// a ∘ b
    Chain { a: LinearMap, b: LinearMap },
    Adjoint { inner: LinearMap },
}

/// Linear operator with forward and adjoint application.
///
/// Cheap to clone: composite structure is shared behind `Arc`s, so factored
/// forms like `Z (Γ + M) - Z' M'` stay symbolic and reuse the underlying
/// dense pieces (e.g. one shared discrete-gradient matrix).
#[derive(Clone)]
pub struct LinearMap {
    node: Arc<Node>,
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearMap({:?}, {}x{})", self.tag(), self.dim_out(), self.dim_in())
    }
}

impl LinearMap {
    fn from_node(node: Node) -> Self {
        LinearMap { node: Arc::new(node) }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self::from_node(Node::Zero { rows, cols })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, alpha: f64) -> Self {
        Self::from_node(Node::ScaledIdentity { dim, alpha })
    }

    pub fn diagonal(d: Vec<f64>) -> Self {
        Self::from_node(Node::Diagonal { d, projection: false })
    }

    /// Coordinate projection from a 0/1 mask.
    pub fn projection_mask(mask: &[bool]) -> Self {
        let d = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self::from_node(Node::Diagonal { d, projection: true })
    }

    pub fn dense(m: DMatrix<f64>) -> Self {
        Self::from_node(Node::Dense { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let m = DMatrix::from_fn(r, c, |i, j| rows[i][j]);
        Self::dense(m)
    }

    pub fn block2(xx: LinearMap, xy: LinearMap, yx: LinearMap, yy: LinearMap) -> Self {
        assert_eq!(xx.dim_out(), xy.dim_out(), "block2: top row output dims differ");
        assert_eq!(yx.dim_out(), yy.dim_out(), "block2: bottom row output dims differ");
        assert_eq!(xx.dim_in(), yx.dim_in(), "block2: left column input dims differ");
        assert_eq!(xy.dim_in(), yy.dim_in(), "block2: right column input dims differ");
        Self::from_node(Node::Block2 { xx, xy, yx, yy })
    }

    pub fn block_diag(layout: BlockLayout, blocks: Vec<LinearMap>) -> Self {
        assert_eq!(layout.n_blocks(), blocks.len(), "block_diag: layout/block count mismatch");
        for (j, b) in blocks.iter().enumerate() {
            let (_, len) = layout.extent(j);
            assert_eq!(b.dim_in(), len, "block_diag: block {j} input dim");
            assert_eq!(b.dim_out(), len, "block_diag: block {j} output dim");
        }
        Self::from_node(Node::BlockDiag { layout, blocks })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_node(Node::Scaled { c, inner: self.clone() })
    }

    pub fn add(&self, other: &LinearMap) -> Self {
        assert_eq!(self.dim_in(), other.dim_in(), "add: input dims differ");
        assert_eq!(self.dim_out(), other.dim_out(), "add: output dims differ");
        Self::from_node(Node::Sum { a: self.clone(), b: other.clone() })
    }

    pub fn sub(&self, other: &LinearMap) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &LinearMap) -> Self {
        assert_eq!(self.dim_in(), other.dim_out(), "compose: inner dims differ");
        Self::from_node(Node::Chain { a: self.clone(), b: other.clone() })
    }

    pub fn adjoint(&self) -> Self {
        Self::from_node(Node::Adjoint { inner: self.clone() })
    }

    pub fn dim_in(&self) -> usize {
        match &*self.node {
            Node::Zero { cols, .. } => *cols,
            Node::ScaledIdentity { dim, .. } => *dim,
            Node::Diagonal { d, .. } => d.len(),
            Node::Dense { m } => m.ncols(),
            Node::Block2 { xx, xy, .. } => xx.dim_in() + xy.dim_in(),
            Node::BlockDiag { layout, .. } => layout.dim(),
            Node::Scaled { inner, .. } => inner.dim_in(),
            Node::Sum { a, .. } => a.dim_in(),
            Node::Chain { b, .. } => b.dim_in(),
            Node::Adjoint { inner } => inner.dim_out(),
        }
    }

    pub fn dim_out(&self) -> usize {
        match &*self.node {
            Node::Zero { rows, .. } => *rows,
            Node::ScaledIdentity { dim, .. } => *dim,
            Node::Diagonal { d, .. } => d.len(),
            Node::Dense { m } => m.nrows(),
            Node::Block2 { xx, yx, .. } => xx.dim_out() + yx.dim_out(),
            Node::BlockDiag { layout, .. } => layout.dim(),
            Node::Scaled { inner, .. } => inner.dim_out(),
            Node::Sum { a, .. } => a.dim_out(),
            Node::Chain { a, .. } => a.dim_out(),
            Node::Adjoint { inner } => inner.dim_in(),
        }
    }

    pub fn tag(&self) -> MapTag {
        match &*self.node {
            Node::Zero { .. } | Node::ScaledIdentity { .. } => MapTag::ScaledIdentity,
            Node::Diagonal { projection, .. } => {
                if *projection {
                    MapTag::Projection
                } else {
                    MapTag::Diagonal
                }
            }
            Node::Dense { .. } => MapTag::Dense,
            Node::Block2 { .. } | Node::BlockDiag { .. } => MapTag::BlockDiagonal,
            Node::Scaled { .. } | Node::Sum { .. } | Node::Chain { .. } | Node::Adjoint { .. } => {
                MapTag::Composite
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim_in(), "apply: dimension mismatch");
        match &*self.node {
            Node::Zero { rows, .. } => vec![0.0; *rows],
            Node::ScaledIdentity { alpha, .. } => vscale(*alpha, x),
            Node::Diagonal { d, .. } => d.iter().zip(x).map(|(di, xi)| di * xi).collect(),
            Node::Dense { m } => {
                let v = nalgebra::DVector::from_column_slice(x);
                (m * v).data.into()
            }
            Node::Block2 { xx, xy, yx, yy } => {
                let nx = xx.dim_in();
                let (x1, x2) = x.split_at(nx);
                let mut top = xx.apply(x1);
                axpy_into(&mut top, &xy.apply(x2));
                let mut bot = yx.apply(x1);
                axpy_into(&mut bot, &yy.apply(x2));
                top.extend(bot);
                top
            }
            Node::BlockDiag { layout, blocks } => {
                let mut out = vec![0.0; layout.dim()];
                for (j, b) in blocks.iter().enumerate() {
                    let (off, len) = layout.extent(j);
                    out[off..off + len].copy_from_slice(&b.apply(&x[off..off + len]));
                }
                out
            }
            Node::Scaled { c, inner } => vscale(*c, &inner.apply(x)),
            Node::Sum { a, b } => vadd(&a.apply(x), &b.apply(x)),
            Node::Chain { a, b } => a.apply(&b.apply(x)),
            Node::Adjoint { inner } => inner.apply_adjoint(x),
        }
    }

    pub fn apply_adjoint(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim_out(), "apply_adjoint: dimension mismatch");
        match &*self.node {
            Node::Zero { cols, .. } => vec![0.0; *cols],
            Node::ScaledIdentity { alpha, .. } => vscale(*alpha, x),
            Node::Diagonal { d, .. } => d.iter().zip(x).map(|(di, xi)| di * xi).collect(),
            Node::Dense { m } => {
                let v = nalgebra::DVector::from_column_slice(x);
                (m.transpose() * v).data.into()
            }
            Node::Block2 { xx, xy, yx, yy } => {
                let nx = xx.dim_out();
                let (x1, x2) = x.split_at(nx);
                let mut top = xx.apply_adjoint(x1);
                axpy_into(&mut top, &yx.apply_adjoint(x2));
                let mut bot = xy.apply_adjoint(x1);
                axpy_into(&mut bot, &yy.apply_adjoint(x2));
                top.extend(bot);
                top
            }
            Node::BlockDiag { layout, blocks } => {
                let mut out = vec![0.0; layout.dim()];
                for (j, b) in blocks.iter().enumerate() {
                    let (off, len) = layout.extent(j);
                    out[off..off + len].copy_from_slice(&b.apply_adjoint(&x[off..off + len]));
                }
                out
            }
            Node::Scaled { c, inner } => vscale(*c, &inner.apply_adjoint(x)),
            Node::Sum { a, b } => vadd(&a.apply_adjoint(x), &b.apply_adjoint(x)),
            Node::Chain { a, b } => b.apply_adjoint(&a.apply_adjoint(x)),
            Node::Adjoint { inner } => inner.apply(x),
        }
    }

    /// Materializes the operator as a dense matrix (desk scale only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (r, c) = (self.dim_out(), self.dim_in());
        let mut m = DMatrix::zeros(r, c);
        let mut e = vec![0.0; c];
        for j in 0..c {
            e[j] = 1.0;
            let col = self.apply(&e);
            for i in 0..r {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

fn axpy_into(y: &mut [f64], x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

// ---------------------------------------------------------------------------
// Pairings and probe checks
// ---------------------------------------------------------------------------

/// `⟨Tx, z⟩`
pub fn pair(t: &LinearMap, x: &[f64], z: &[f64]) -> f64 {
    assert_eq!(z.len(), t.dim_out(), "pair: dimension mismatch");
    dot(&t.apply(x), z)
}

/// Signed quadratic form `⟨Mx, x⟩`.
///
/// May be negative: metric differences like `Z'M' - ZM` are routinely
/// indefinite, and some weights are not even self-adjoint.
pub fn seminorm_sq(m: &LinearMap, x: &[f64]) -> f64 {
    pair(m, x, x)
}

/// Outcome of a probe-based operator check.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub pass: bool,
    pub max_deviation: f64,
    /// Largest deviation/scale ratio observed.
    pub worst_ratio: f64,
    pub n_probes: usize,
}

/// Samples random pairs `(x, z)` and reports the worst self-adjointness
/// defect `|⟨Mx,z⟩ - ⟨x,Mz⟩|`, passed against `tol` times a per-probe scale.
pub fn probe_self_adjoint(m: &LinearMap, n_probes: usize, tol: f64, seed: u64) -> ProbeReport {
    assert_eq!(m.dim_in(), m.dim_out(), "probe_self_adjoint: map must be square");
    let n = m.dim_in();
    let mut rng = stream_rng(seed, 0x5e1f);
    let mut max_dev: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..n_probes {
        let x = normal_vec(&mut rng, n);
        let z = normal_vec(&mut rng, n);
        let mx = m.apply(&x);
        let mz = m.apply(&z);
        let dev = (dot(&mx, &z) - dot(&x, &mz)).abs();
        let scale = norm(&mx) * norm(&z) + norm(&x) * norm(&mz) + 1.0;
        max_dev = max_dev.max(dev);
        worst_ratio = worst_ratio.max(dev / scale);
    }
    ProbeReport { pass: worst_ratio <= tol, max_deviation: max_dev, worst_ratio, n_probes }
}

/// Adjoint consistency `⟨Ax,z⟩ = ⟨x,A*z⟩` on random probes.
pub fn probe_adjoint_consistency(a: &LinearMap, n_probes: usize, tol: f64, seed: u64) -> ProbeReport {
    let mut rng = stream_rng(seed, 0xad01);
    let mut max_dev: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..n_probes {
        let x = normal_vec(&mut rng, a.dim_in());
        let z = normal_vec(&mut rng, a.dim_out());
        let ax = a.apply(&x);
        let atz = a.apply_adjoint(&z);
        let dev = (dot(&ax, &z) - dot(&x, &atz)).abs();
        let scale = norm(&ax) * norm(&z) + 1.0;
        max_dev = max_dev.max(dev);
        worst_ratio = worst_ratio.max(dev / scale);
    }
    ProbeReport { pass: worst_ratio <= tol, max_deviation: max_dev, worst_ratio, n_probes }
}

/// Checks the projection laws `A² = A` and `A* = A` on random probes.
pub fn probe_projection(a: &LinearMap, n_probes: usize, tol: f64, seed: u64) -> ProbeReport {
    assert_eq!(a.dim_in(), a.dim_out(), "probe_projection: map must be square");
    let sa = probe_self_adjoint(a, n_probes, tol, seed);
    let mut rng = stream_rng(seed, 0x9107);
    let mut max_dev = sa.max_deviation;
    let mut worst_ratio = sa.worst_ratio;
    for _ in 0..n_probes {
        let x = normal_vec(&mut rng, a.dim_in());
        let ax = a.apply(&x);
        let aax = a.apply(&ax);
        let dev = norm(&vsub(&aax, &ax));
        let scale = norm(&ax) + 1.0;
        max_dev = max_dev.max(dev);
        worst_ratio = worst_ratio.max(dev / scale);
    }
    ProbeReport { pass: worst_ratio <= tol, max_deviation: max_dev, worst_ratio, n_probes }
}

/// Operator-norm estimate by power iteration on `K*K` from a seeded random
/// start. Returns when the Rayleigh quotient stagnates below `tol` relative
/// change; errors past `max_iter` carrying the last estimate.
pub fn op_norm(k: &LinearMap, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    let n = k.dim_in();
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = stream_rng(seed, 0xb0b);
    let mut v = normal_vec(&mut rng, n);
    let nv = norm(&v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    for x in &mut v {
        *x /= nv;
    }
    let mut lambda_prev = f64::NAN;
    for it in 0..max_iter {
        let w = k.apply_adjoint(&k.apply(&v));
        let lambda = dot(&w, &v).max(0.0);
        let nw = norm(&w);
        if nw == 0.0 {
            // v in the kernel of K*K; the zero operator (or an unlucky
            // start, which the normal start rules out almost surely).
            return Ok(0.0);
        }
        if !lambda_prev.is_nan() && (lambda - lambda_prev).abs() <= tol * lambda.max(1e-300) {
            return Ok(lambda.sqrt());
        }
        lambda_prev = lambda;
        if it + 1 < max_iter {
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, last_estimate: lambda_prev.max(0.0).sqrt() })
}

/// Largest eigenvalue of a symmetric matrix (dense eigensolve; test oracles
/// and desk-scale constructor checks).
pub fn max_eig_sym(m: &DMatrix<f64>) -> f64 {
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    sym.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    sym.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pair_identity_and_zero() {
        let i = LinearMap::identity(2);
        assert_relative_eq!(pair(&i, &[1.0, 1.0], &[1.0, 1.0]), 2.0);
        let z = LinearMap::zero(2, 2);
        assert_eq!(pair(&z, &[3.0, -1.0], &[2.0, 5.0]), 0.0);
    }

    #[test]
    fn pair_nilpotent_offdiagonal() {
        // Direct matrix-vector oracle: [[0,1],[0,0]](0,1) = (1,0), paired
        // with (1,0) gives 1.
        let t = LinearMap::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_relative_eq!(pair(&t, &[0.0, 1.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn seminorm_examples() {
        let i = LinearMap::identity(2);
        assert_relative_eq!(seminorm_sq(&i, &[3.0, 4.0]), 25.0);
        let m = LinearMap::diagonal(vec![2.0, 0.0]);
        // hand evaluation of the quadratic form 2*1^2 + 0*5^2
        assert_relative_eq!(seminorm_sq(&m, &[1.0, 5.0]), 2.0);
        assert_eq!(seminorm_sq(&i, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn seminorm_can_be_negative() {
        let m = LinearMap::diagonal(vec![1.0, -3.0]);
        assert!(seminorm_sq(&m, &[0.5, 2.0]) < 0.0);
    }

    #[test]
    fn self_adjoint_probes() {
        let sym = LinearMap::from_rows(&[
            vec![2.0, 1.0, 0.5],
            vec![1.0, 3.0, -1.0],
            vec![0.5, -1.0, 1.0],
        ]);
        let rep = probe_self_adjoint(&sym, 50, 1e-12, 42);
        assert!(rep.pass, "max dev {}", rep.max_deviation);
        assert!(rep.max_deviation <= 1e-13);

        let nil = LinearMap::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let rep = probe_self_adjoint(&nil, 50, 1e-10, 42);
        assert!(!rep.pass);
        // exhibited on x=(0,1), z=(1,0): ⟨Mx,z⟩-⟨x,Mz⟩ = 1
        let dev = pair(&nil, &[0.0, 1.0], &[1.0, 0.0]) - pair(&nil, &[1.0, 0.0], &[0.0, 1.0]);
        assert_relative_eq!(dev, 1.0);
    }

    #[test]
    fn op_norm_diagonal_and_zero() {
        let k = LinearMap::diagonal(vec![1.0, 2.0, 3.0]);
        let est = op_norm(&k, 1e-12, 10_000, 7).unwrap();
        assert_relative_eq!(est, 3.0, max_relative = 1e-6);
        let z = LinearMap::zero(4, 3);
        assert_eq!(op_norm(&z, 1e-10, 100, 7).unwrap(), 0.0);
    }

    #[test]
    fn adjoint_consistency_composites() {
        let a = LinearMap::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.5, -1.0, 3.0]]);
        let b = LinearMap::diagonal(vec![2.0, -1.0, 0.5]);
        let comp = a.compose(&b).scale(1.5).adjoint();
        let rep = probe_adjoint_consistency(&comp, 100, 1e-10, 3);
        assert!(rep.pass);
        let blk = LinearMap::block2(
            LinearMap::identity(3),
            a.adjoint(),
            a.clone(),
            LinearMap::scaled_identity(2, -2.0),
        );
        let rep = probe_adjoint_consistency(&blk, 100, 1e-10, 4);
        assert!(rep.pass);
    }

    #[test]
    fn to_dense_matches_apply() {
        let a = LinearMap::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let d = a.to_dense();
        let x = [1.5, -2.0];
        let via_dense = LinearMap::dense(d).apply(&x);
        assert_eq!(via_dense, a.apply(&x));
    }

    #[test]
    fn block_layout_mask() {
        let l = BlockLayout::from_lens(&[2, 3, 1]);
        assert_eq!(l.dim(), 6);
        assert_eq!(l.mask(&[0, 2]), vec![true, true, false, false, false, true]);
    }

    #[test]
    fn power_iteration_matches_dense_eig() {
        // modest random rectangular operator
        let mut rng = crate::rng::stream_rng(11, 0);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| crate::rng::normal_vec(&mut rng, 4)).collect();
        let k = LinearMap::from_rows(&rows);
        let est = op_norm(&k, 1e-12, 20_000, 1).unwrap();
        let gram = k.to_dense().transpose() * k.to_dense();
        let oracle = max_eig_sym(&gram).sqrt();
        assert_relative_eq!(est, oracle, max_relative = 1e-8);
    }
}
