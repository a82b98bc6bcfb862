//! Named, fully assembled test problems with documented solutions.
//!
//! Solutions are analytic where the instance permits (quadratics, the
//! two-level total-variation image, the affine splitting pair, fixed-point
//! maps, cosh); the lasso instances use the reference-run protocol: a long
//! forward-backward run whose final fixed-point residual must reach 1e-12.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linops::{norm, vscale, vsub, BlockLayout, LinearMap};
use crate::problems::functions::{ProxFn, SmoothFn, StepSize};
use crate::problems::{assemble_saddle, grad_op_2d, CompositeProblem, SaddleProblem};
use crate::rng::{normal_vec, stream_rng};

/// A monotone operator accessed through its resolvent, plus a direct
/// application where the operator is single-valued.
#[derive(Clone)]
pub struct ResolventPair {
    pub dim: usize,
    /// `(λ, v) ↦ (I + λA)⁻¹(v)`
    pub resolvent: Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>,
    pub apply: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
}

impl ResolventPair {
    /// The affine map `A(u) = u - shift`.
    pub fn affine(dim: usize, shift: f64) -> Self {
        ResolventPair {
            dim,
            resolvent: Arc::new(move |lambda, v| {
                v.iter().map(|&vi| (vi + lambda * shift) / (1.0 + lambda)).collect()
            }),
            apply: Some(Arc::new(move |u| u.iter().map(|&ui| ui - shift).collect())),
        }
    }

    /// The zero operator; its resolvent is the identity.
    pub fn zero(dim: usize) -> Self {
        ResolventPair {
            dim,
            resolvent: Arc::new(|_, v| v.to_vec()),
            apply: Some(Arc::new(|u| vec![0.0; u.len()])),
        }
    }
}

/// Two-operator splitting instance `0 ∈ A(u) + B(u)`.
#[derive(Clone)]
pub struct DrProblem {
    pub a: ResolventPair,
    pub b: ResolventPair,
    /// Root of `A + B`.
    pub known_root: Option<Vec<f64>>,
}

impl DrProblem {
    pub fn dim(&self) -> usize {
        self.a.dim
    }

    /// The shadow-point limit `v* = u* - λ A(u*)` for a given λ.
    pub fn v_star(&self, lambda: f64) -> Option<Vec<f64>> {
        let u = self.known_root.as_ref()?;
        let a = self.a.apply.as_ref()?;
        Some(vsub(u, &vscale(lambda, &a(u))))
    }
}

/// Fixed-point iteration instance for an α-averaged map.
#[derive(Clone)]
pub struct KmProblem {
    pub t: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub alpha: f64,
    pub dim: usize,
    /// Maps a starting point to the fixed point the iteration converges to.
    pub fixed_point_for: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
}

/// A fully assembled catalog entry.
#[derive(Clone)]
pub enum CatalogProblem {
    Composite(CompositeProblem),
    Saddle(SaddleProblem),
    Splitting(DrProblem),
    FixedPoint(KmProblem),
}

impl CatalogProblem {
    pub fn as_composite(&self) -> Result<&CompositeProblem> {
        match self {
            CatalogProblem::Composite(p) => Ok(p),
            _ => Err(Error::Invalid("expected a composite problem".into())),
        }
    }

    pub fn as_saddle(&self) -> Result<&SaddleProblem> {
        match self {
            CatalogProblem::Saddle(p) => Ok(p),
            _ => Err(Error::Invalid("expected a saddle problem".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Parameter records (strict parsing: unknown keys are rejected)
// ---------------------------------------------------------------------------

fn default_dim() -> usize {
    1
}
fn default_gamma() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticParams {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Per-coordinate curvatures for the smooth form; overrides `gamma`.
    #[serde(default)]
    pub diag: Option<Vec<f64>>,
    /// "prox" (default): G = (γ/2)‖·‖², J = 0.
    /// "smooth": G = 0, J the quadratic.
    /// "saddle": the scalar toy G = (γ/2)‖x‖², F* = ½‖y‖², K = κI.
    #[serde(default)]
    pub form: Option<String>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams { dim: 1, gamma: 1.0, diag: None, form: None, kappa: 1.0 }
    }
}

fn default_lasso_rows() -> usize {
    5
}
fn default_lasso_cols() -> usize {
    5
}
fn default_lambda() -> f64 {
    0.1
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoParams {
    #[serde(default = "default_lasso_rows")]
    pub rows: usize,
    #[serde(default = "default_lasso_cols")]
    pub cols: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// "composite" (default), "saddle", or "gist".
    #[serde(default)]
    pub form: Option<String>,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams { rows: 5, cols: 5, lambda: 0.1, seed: 1, form: None }
    }
}

fn default_grid() -> usize {
    16
}
fn default_rof_lambda() -> f64 {
    0.2
}
fn default_level_b() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RofParams {
    #[serde(default = "default_grid")]
    pub nx: usize,
    #[serde(default = "default_grid")]
    pub ny: usize,
    #[serde(default = "default_rof_lambda")]
    pub lambda: f64,
    /// Left level of the two-level image.
    #[serde(default)]
    pub a: f64,
    /// Right level; must exceed `a`.
    #[serde(default = "default_level_b")]
    pub b: f64,
    /// Number of left columns at level `a`; defaults to nx/2.
    #[serde(default)]
    pub split: Option<usize>,
}

impl Default for RofParams {
    fn default() -> Self {
        RofParams { nx: 16, ny: 16, lambda: 0.2, a: 0.0, b: 1.0, split: None }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CoshParams {
    /// Weight of the `λ|x|` term for the proximal variant; 0 keeps it smooth.
    #[serde(default)]
    pub lambda: f64,
}

fn default_dr_b() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrLinearParams {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_dr_b")]
    pub b: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

impl Default for DrLinearParams {
    fn default() -> Self {
        DrLinearParams { a: 0.0, b: 2.0, dim: 1 }
    }
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmLinearParams {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// "scaled" (default): T = (2α-1)I. "line": T = ½(I + proj onto a line).
    #[serde(default)]
    pub kind: Option<String>,
}

impl Default for KmLinearParams {
    fn default() -> Self {
        KmLinearParams { alpha: 0.5, dim: 1, kind: None }
    }
}

fn default_blocks() -> usize {
    8
}
fn default_block_len() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochLassoParams {
    #[serde(default = "default_blocks")]
    pub m: usize,
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Rows of the design matrix; defaults to total dimension + 2.
    #[serde(default)]
    pub rows: Option<usize>,
}

impl Default for StochLassoParams {
    fn default() -> Self {
        StochLassoParams { m: 8, block_len: 2, lambda: 0.1, seed: 1, rows: None }
    }
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

pub fn quadratic(p: &QuadraticParams) -> Result<CatalogProblem> {
    match p.form.as_deref().unwrap_or("prox") {
        "prox" => {
            let g = ProxFn::quadratic(p.dim, p.gamma);
            let j = SmoothFn::zero(p.dim);
            Ok(CatalogProblem::Composite(
                CompositeProblem::new(g, j).with_solution(vec![0.0; p.dim]),
            ))
        }
        "smooth" => {
            let lambdas = match &p.diag {
                Some(d) => {
                    if d.len() != p.dim {
                        return Err(Error::Invalid(format!(
                            "quadratic: diag length {} vs dim {}",
                            d.len(),
                            p.dim
                        )));
                    }
                    d.clone()
                }
                None => vec![p.gamma; p.dim],
            };
            let g = ProxFn::zero(p.dim);
            let j = SmoothFn::diag_quadratic(lambdas);
            Ok(CatalogProblem::Composite(
                CompositeProblem::new(g, j).with_solution(vec![0.0; p.dim]),
            ))
        }
        "saddle" => {
            let g = ProxFn::quadratic(p.dim, p.gamma);
            let j = SmoothFn::zero(p.dim);
            let fstar = ProxFn::quadratic(p.dim, 1.0);
            let k = LinearMap::scaled_identity(p.dim, p.kappa);
            let mut s = assemble_saddle(g, j, fstar, k)?;
            s.f_conj = Some(Arc::new(|z: &[f64]| 0.5 * crate::linops::dot(z, z)));
            s.known_solution = Some((vec![0.0; p.dim], vec![0.0; p.dim]));
            Ok(CatalogProblem::Saddle(s))
        }
        other => Err(Error::Invalid(format!("quadratic: unknown form {other:?}"))),
    }
}

/// Seeded lasso design: rows-by-cols normal matrix scaled by 1/√rows, data
/// from a sparse ground truth plus small noise.
fn lasso_instance(rows: usize, cols: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 0x1a550);
    let a = DMatrix::from_fn(rows, cols, |_, _| {
        use rand_distr::Distribution;
        let v: f64 = rand_distr::StandardNormal.sample(&mut rng);
        v / (rows as f64).sqrt()
    });
    let mut x_sharp = vec![0.0; cols];
    for k in 0..cols {
        if k % 3 == 0 {
            x_sharp[k] = if k % 2 == 0 { 1.0 } else { -1.5 };
        }
    }
    let noise = normal_vec(&mut rng, rows);
    let ax = &a * nalgebra::DVector::from_column_slice(&x_sharp);
    let f: Vec<f64> = ax.iter().zip(&noise).map(|(v, n)| v + 0.05 * n).collect();
    (a, f)
}

/// Long forward-backward reference run; errors unless the final fixed-point
/// residual reaches the protocol threshold.
fn reference_fb_solution(g: &ProxFn, j: &SmoothFn, iters: usize) -> Result<Vec<f64>> {
    let tau = 1.0 / j.l.max(1.0);
    let mut x = vec![0.0; g.dim];
    for _ in 0..iters {
        let fwd = vsub(&x, &vscale(tau, &j.grad(&x)));
        x = g.prox(&StepSize::Scalar(tau), &fwd);
    }
    let fwd = vsub(&x, &vscale(tau, &j.grad(&x)));
    let res = norm(&vsub(&x, &g.prox(&StepSize::Scalar(tau), &fwd)));
    if res > 1e-12 {
        return Err(Error::NoConvergence { iterations: iters, last_estimate: res });
    }
    Ok(x)
}

pub fn lasso(p: &LassoParams) -> Result<CatalogProblem> {
    let (a, f) = lasso_instance(p.rows, p.cols, p.seed);
    let g = ProxFn::l1(p.cols, p.lambda);
    let j = SmoothFn::least_squares(a.clone(), f.clone());
    let x_star = reference_fb_solution(&g, &j, 100_000)?;
    match p.form.as_deref().unwrap_or("composite") {
        "composite" => {
            Ok(CatalogProblem::Composite(CompositeProblem::new(g, j).with_solution(x_star)))
        }
        "saddle" => {
            // G = λ‖·‖₁, J = 0, F*(y) = ½‖y‖² + ⟨f, y⟩ (so F(z) = ½‖z-f‖²), K = A
            let fstar = ProxFn::quad_plus_linear(f.clone());
            let k = LinearMap::dense(a.clone());
            let y_star = {
                let ax = k.apply(&x_star);
                vsub(&ax, &f)
            };
            let mut s = assemble_saddle(ProxFn::l1(p.cols, p.lambda), SmoothFn::zero(p.cols), fstar, k)?;
            let fd = f.clone();
            s.f_conj = Some(Arc::new(move |z: &[f64]| {
                0.5 * z.iter().zip(&fd).map(|(zi, fi)| (zi - fi) * (zi - fi)).sum::<f64>()
            }));
            s.known_solution = Some((x_star, y_star));
            Ok(CatalogProblem::Saddle(s))
        }
        "gist" => {
            // G = 0, J = ½‖Ax-f‖² with ‖A‖ < 1 (rescaled), K = I,
            // F* the box indicator dual to λ‖·‖₁.
            let anorm = crate::linops::op_norm(&LinearMap::dense(a.clone()), 1e-12, 10_000, p.seed)?;
            let scale = 0.95 / anorm;
            let a_s = &a * scale;
            let f_s: Vec<f64> = f.iter().map(|v| v * scale).collect();
            let g0 = ProxFn::zero(p.cols);
            let j = SmoothFn::least_squares(a_s.clone(), f_s.clone());
            let x_star = reference_fb_solution(&ProxFn::l1(p.cols, p.lambda), &j, 200_000)?;
            let y_star = vscale(-1.0, &j.grad(&x_star));
            let fstar = ProxFn::box_indicator(p.cols, p.lambda);
            let k = LinearMap::identity(p.cols);
            let mut s = assemble_saddle(g0, j, fstar, k)?;
            let lam = p.lambda;
            s.f_conj =
                Some(Arc::new(move |z: &[f64]| lam * z.iter().map(|v| v.abs()).sum::<f64>()));
            s.known_solution = Some((x_star, y_star));
            Ok(CatalogProblem::Saddle(s))
        }
        other => Err(Error::Invalid(format!("lasso: unknown form {other:?}"))),
    }
}

/// Two-level total-variation denoising with the analytic solution: a
/// vertical edge between level `a` (left `split` columns) and level `b`.
/// The denoised levels move together by λ/split and λ/(nx-split), and the
/// x-part of the dual ramps linearly up to ±λ at the edge.
pub fn rof(p: &RofParams) -> Result<CatalogProblem> {
    let (nx, ny) = (p.nx, p.ny);
    if nx < 2 || ny < 2 {
        return Err(Error::Invalid("rof: grid must be at least 2x2".into()));
    }
    let split = p.split.unwrap_or(nx / 2);
    if split == 0 || split >= nx {
        return Err(Error::Invalid(format!("rof: split {split} outside 1..{}", nx - 1)));
    }
    let (a, b, lam) = (p.a, p.b, p.lambda);
    let k_left = split as f64;
    let m_right = (nx - split) as f64;
    if b - a <= lam / k_left + lam / m_right {
        return Err(Error::Invalid(
            "rof: jump too small, the two-level structure would collapse".into(),
        ));
    }
    let n = nx * ny;
    let mut f = vec![0.0; n];
    for r in 0..ny {
        for c in 0..nx {
            f[r * nx + c] = if c < split { a } else { b };
        }
    }
    // analytic solution
    let (a_new, b_new) = (a + lam / k_left, b - lam / m_right);
    let mut x_star = vec![0.0; n];
    let mut y_star = vec![0.0; 2 * n];
    for r in 0..ny {
        for c in 0..nx {
            let px = r * nx + c;
            x_star[px] = if c < split { a_new } else { b_new };
            // x-difference dual: ramp (c+1)λ/split on the left of the edge,
            // then back down to λ/(nx-split); zero in the Neumann column
            if c + 1 < nx {
                y_star[px] = if c < split {
                    (c as f64 + 1.0) * lam / k_left
                } else {
                    lam - (c as f64 + 1.0 - k_left) * lam / m_right
                };
            }
        }
    }
    let g = ProxFn::sq_distance(f);
    let j = SmoothFn::zero(n);
    let fstar = ProxFn::pixel_ball_indicator(n, lam);
    let k = grad_op_2d(nx, ny);
    let mut s = assemble_saddle(g, j, fstar, k)?;
    s.f_conj = Some(Arc::new(move |z: &[f64]| {
        let npix = z.len() / 2;
        lam * (0..npix).map(|p| (z[p] * z[p] + z[npix + p] * z[npix + p]).sqrt()).sum::<f64>()
    }));
    s.known_solution = Some((x_star, y_star));
    Ok(CatalogProblem::Saddle(s))
}

pub fn cosh_newton(p: &CoshParams) -> Result<CatalogProblem> {
    let g = if p.lambda > 0.0 { ProxFn::l1(1, p.lambda) } else { ProxFn::zero(1) };
    let j = SmoothFn::cosh_1d();
    Ok(CatalogProblem::Composite(CompositeProblem::new(g, j).with_solution(vec![0.0])))
}

pub fn dr_linear(p: &DrLinearParams) -> Result<CatalogProblem> {
    let a = ResolventPair::affine(p.dim, p.a);
    let b = ResolventPair::affine(p.dim, p.b);
    let root = vec![(p.a + p.b) / 2.0; p.dim];
    Ok(CatalogProblem::Splitting(DrProblem { a, b, known_root: Some(root) }))
}

pub fn km_linear(p: &KmLinearParams) -> Result<CatalogProblem> {
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(Error::Precondition(format!(
            "averaging parameter must lie in (0,1): alpha = {}",
            p.alpha
        )));
    }
    match p.kind.as_deref().unwrap_or("scaled") {
        "scaled" => {
            let c = 2.0 * p.alpha - 1.0;
            Ok(CatalogProblem::FixedPoint(KmProblem {
                t: Arc::new(move |u: &[f64]| vscale(c, u)),
                alpha: p.alpha,
                dim: p.dim,
                fixed_point_for: Some(Arc::new(|u: &[f64]| vec![0.0; u.len()])),
            }))
        }
        "line" => {
            // T = ½(I + proj onto the line spanned by (2,1)) in the plane;
            // projections are firmly nonexpansive, so T is ½-averaged.
            let d = [2.0, 1.0];
            let nn = d[0] * d[0] + d[1] * d[1];
            let proj = move |u: &[f64]| -> Vec<f64> {
                let t = (u[0] * d[0] + u[1] * d[1]) / nn;
                vec![t * d[0], t * d[1]]
            };
            Ok(CatalogProblem::FixedPoint(KmProblem {
                t: Arc::new(move |u: &[f64]| {
                    let pu = proj(u);
                    vec![0.5 * (u[0] + pu[0]), 0.5 * (u[1] + pu[1])]
                }),
                alpha: 0.5,
                dim: 2,
                fixed_point_for: Some(Arc::new(move |u: &[f64]| proj(u))),
            }))
        }
        other => Err(Error::Invalid(format!("km_linear: unknown kind {other:?}"))),
    }
}

pub fn stoch_lasso(p: &StochLassoParams) -> Result<CatalogProblem> {
    let cols = p.m * p.block_len;
    let rows = p.rows.unwrap_or(cols + 2);
    let (a, f) = lasso_instance(rows, cols, p.seed);
    let mut g = ProxFn::l1(cols, p.lambda);
    g.separable_blocks = Some(BlockLayout::uniform(p.m, p.block_len));
    let j = SmoothFn::least_squares(a, f);
    let x_star = reference_fb_solution(&g, &j, 150_000)?;
    Ok(CatalogProblem::Composite(CompositeProblem::new(g, j).with_solution(x_star)))
}

/// Dispatches a catalog entry by name with JSON parameters. Unknown names
/// and unknown parameter keys are rejected.
pub fn catalog(name: &str, params: &serde_json::Value) -> Result<CatalogProblem> {
    fn parse<T: for<'de> Deserialize<'de> + Default>(v: &serde_json::Value) -> Result<T> {
        if v.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(v.clone())
            .map_err(|e| Error::Invalid(format!("problem params: {e}")))
    }
    match name {
        "quadratic" => quadratic(&parse::<QuadraticParams>(params)?),
        "lasso" => lasso(&parse::<LassoParams>(params)?),
        "rof" => rof(&parse::<RofParams>(params)?),
        "cosh_newton" => cosh_newton(&parse::<CoshParams>(params)?),
        "dr_linear" => dr_linear(&parse::<DrLinearParams>(params)?),
        "km_linear" => km_linear(&parse::<KmLinearParams>(params)?),
        "stoch_lasso" => stoch_lasso(&parse::<StochLassoParams>(params)?),
        other => Err(Error::Invalid(format!("unknown catalog problem {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_solution_is_zero() {
        let p = quadratic(&QuadraticParams::default()).unwrap();
        let c = p.as_composite().unwrap();
        assert_eq!(c.known_solution.as_ref().unwrap(), &vec![0.0]);
        assert!(c.fb_residual(c.known_solution.as_ref().unwrap()) <= 1e-12);
    }

    #[test]
    fn cosh_newton_gradient_vanishes_at_solution() {
        let p = cosh_newton(&CoshParams::default()).unwrap();
        let c = p.as_composite().unwrap();
        assert_eq!(c.j.grad(&[0.0])[0], 0.0);
    }

    #[test]
    fn dr_linear_default_root() {
        let p = dr_linear(&DrLinearParams::default()).unwrap();
        if let CatalogProblem::Splitting(d) = p {
            assert_eq!(d.known_root.as_ref().unwrap(), &vec![1.0]);
            // v* = u* - λ A(u*) = 1 - 1·(1 - 0) = 0 at λ = 1
            assert_eq!(d.v_star(1.0).unwrap(), vec![0.0]);
        } else {
            panic!("expected splitting problem");
        }
    }

    #[test]
    fn lasso_reference_solution_is_consistent() {
        let p = lasso(&LassoParams::default()).unwrap();
        let c = p.as_composite().unwrap();
        let xs = c.known_solution.as_ref().unwrap();
        assert!(c.fb_residual(xs) <= 1e-10, "residual {}", c.fb_residual(xs));
        assert!(xs.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn lasso_saddle_solution_satisfies_optimality() {
        let p = lasso(&LassoParams { form: Some("saddle".into()), ..Default::default() }).unwrap();
        let s = p.as_saddle().unwrap();
        let (rx, ry) = s.solution_residual().unwrap();
        assert!(rx <= 1e-7 && ry <= 1e-7, "residuals {rx} {ry}");
    }

    #[test]
    fn gist_form_norm_bounds_hold() {
        let p = lasso(&LassoParams { rows: 8, cols: 8, form: Some("gist".into()), ..Default::default() })
            .unwrap();
        let s = p.as_saddle().unwrap();
        let anorm = (2.0 * s.j.l).sqrt() / 2.0f64.sqrt(); // ‖A‖ = √L
        assert!(anorm <= 1.0, "‖A‖ = {anorm}");
        let (rx, ry) = s.solution_residual().unwrap();
        assert!(rx <= 1e-7 && ry <= 1e-7, "residuals {rx} {ry}");
    }

    #[test]
    fn rof_analytic_solution_residuals() {
        let p = rof(&RofParams::default()).unwrap();
        let s = p.as_saddle().unwrap();
        let (rx, ry) = s.solution_residual().unwrap();
        assert!(rx <= 1e-10 && ry <= 1e-10, "residuals {rx} {ry}");
        // gap structure: dual stays inside the pixel balls
        let (_, ys) = s.known_solution.as_ref().unwrap();
        assert!(s.fstar.eval(ys).is_finite());
    }

    #[test]
    fn catalog_rejects_unknown_names_and_keys() {
        assert!(catalog("nope", &serde_json::Value::Null).is_err());
        let bad = serde_json::json!({"dim": 2, "typo_key": 1});
        assert!(catalog("quadratic", &bad).is_err());
    }

    #[test]
    fn km_scaled_is_zero_map_at_half() {
        let p = km_linear(&KmLinearParams::default()).unwrap();
        if let CatalogProblem::FixedPoint(k) = p {
            assert_eq!((k.t)(&[7.0]), vec![0.0]);
        } else {
            panic!("expected fixed-point problem");
        }
    }

    #[test]
    fn two_level_rof_solution_formula() {
        // 1-D structure check on a wide short grid
        let p = rof(&RofParams { nx: 8, ny: 2, lambda: 0.2, a: 0.0, b: 1.0, split: Some(4) }).unwrap();
        let s = p.as_saddle().unwrap();
        let (xs, _) = s.known_solution.as_ref().unwrap();
        assert_relative_eq!(xs[0], 0.05); // a + λ/k = 0 + 0.2/4
        assert_relative_eq!(xs[7], 0.95); // b - λ/m = 1 - 0.2/4
    }
}
