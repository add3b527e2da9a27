//! Accumulated conjugacy transformations and their numerical inversion.
//!
//! Each iteration step contributes a near-identity transformation; the engines
//! compose them into a chain `W = T_1 ∘ T_2 ∘ ... ∘ T_nu` (innermost last) and
//! repeatedly need both `W` and `W^{-1}` at grid points. Inversion is a small
//! Newton solve per point with finite-difference Jacobians; transforms close
//! to the identity converge in a handful of iterations and are required to
//! converge within 25.
//!
//! Angle-only transforms ([`AngleTransform`]) are Fourier vector fields; the
//! twist case ([`TwistTransform`]) additionally samples the action dependence
//! on a tensor of Chebyshev nodes and interpolates barycentrically.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

use crate::error::{KamError, Result};
use crate::fourier::FourierSeries;
use crate::frequency_solver::TranslationLedger;
use crate::l1_norm;

const NEWTON_MAX_ITER: usize = 25;
const NEWTON_TOL: f64 = 3e-14;
const FD_STEP: f64 = 1e-7;

/// Solve the dense system `a·x = b` in place (row-major `a`, size `n <= 4`),
/// with partial pivoting. Returns false when the pivot collapses.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-14 {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

/// Generic damped-free Newton inversion of `map(x) = y`, starting from `x = y`.
fn newton_invert(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    y: &[f64],
    dims: usize,
) -> Result<Vec<f64>> {
    let mut x = y.to_vec();
    let tol = NEWTON_TOL * (1.0 + l1_norm(y));
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let fx = map(&x);
        let mut r: Vec<f64> = (0..dims).map(|i| fx[i] - y[i]).collect();
        residual = l1_norm(&r);
        if residual <= tol {
            return Ok(x);
        }
        let mut jac = vec![0.0; dims * dims];
        for j in 0..dims {
            let mut xp = x.clone();
            xp[j] += FD_STEP;
            let fp = map(&xp);
            for i in 0..dims {
                jac[i * dims + j] = (fp[i] - fx[i]) / FD_STEP;
            }
        }
        if !solve_dense(&mut jac, &mut r, dims) {
            break;
        }
        for j in 0..dims {
            x[j] -= r[j];
        }
    }
    // One last residual check: quadratic convergence may land exactly on the
    // final iterate.
    let fx = map(&x);
    let r: Vec<f64> = (0..dims).map(|i| fx[i] - y[i]).collect();
    if l1_norm(&r) <= tol {
        Ok(x)
    } else {
        Err(KamError::InversionFailure { iterations: NEWTON_MAX_ITER, residual })
    }
}

/// Angle transformation `theta -> theta + U(theta)` on `T^n`.
#[derive(Debug, Clone)]
pub struct AngleTransform {
    /// Vector field `U` with `value_dim == dim`.
    pub displacement: FourierSeries,
}

impl AngleTransform {
    pub fn new(displacement: FourierSeries) -> Self {
        assert_eq!(displacement.value_dim(), displacement.dim());
        Self { displacement }
    }

    pub fn dim(&self) -> usize {
        self.displacement.dim()
    }

    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let u = self.displacement.eval_real(theta);
        theta.iter().zip(u).map(|(&t, ui)| t + ui).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        newton_invert(&|x: &[f64]| self.apply(x), y, n)
    }
}

/// Composition `T_1 ∘ T_2 ∘ ... ∘ T_nu` of angle transforms plus the
/// translation ledger accumulated alongside it.
#[derive(Debug, Clone)]
pub struct ConjugacyChain {
    pub parts: Vec<AngleTransform>,
    pub translations: TranslationLedger,
}

impl ConjugacyChain {
    pub fn identity(dim: usize) -> Self {
        Self { parts: Vec::new(), translations: TranslationLedger::new(dim) }
    }

    pub fn push(&mut self, t: AngleTransform) {
        self.parts.push(t);
    }

    /// `W(theta)`: innermost (latest) part first.
    pub fn forward(&self, theta: &[f64]) -> Vec<f64> {
        let mut x = theta.to_vec();
        for part in self.parts.iter().rev() {
            x = part.apply(&x);
        }
        x
    }

    /// `W^{-1}(y)`: earliest part inverted first.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = y.to_vec();
        for part in self.parts.iter() {
            x = part.invert(&x)?;
        }
        Ok(x)
    }

    /// Displacement of the conjugated map `W^{-1} ∘ F ∘ W` at `theta`.
    pub fn conjugated_displacement(
        &self,
        map: &dyn Fn(&[f64]) -> Vec<f64>,
        theta: &[f64],
    ) -> Result<Vec<f64>> {
        let x = self.forward(theta);
        let y = map(&x);
        let z = self.inverse(&y)?;
        Ok(z.iter().zip(theta).map(|(&zi, &ti)| zi - ti).collect())
    }
}

/// Barycentric weights for a set of pairwise distinct nodes.
fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for i in 0..n {
            if i != j {
                w[j] /= nodes[j] - nodes[i];
            }
        }
    }
    w
}

/// Chebyshev-Gauss-Lobatto nodes on `[center - half, center + half]`, ascending.
pub fn chebyshev_nodes(center: f64, half: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    let mut nodes: Vec<f64> = (0..count)
        .map(|j| center - half * (core::f64::consts::PI * j as f64 / (count - 1) as f64).cos())
        .collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes
}

/// A `theta`-Fourier, action-Chebyshev sampled field on `T^n x window`.
///
/// Node series are stored row-major over the action-node tensor; evaluation
/// synthesizes every node series at `theta` and contracts with the per-axis
/// barycentric coefficients of `r`.
#[derive(Debug, Clone)]
pub struct ActionSampledField {
    axes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    series: Vec<FourierSeries>,
    value_dim: usize,
}

impl ActionSampledField {
    pub fn new(axes: Vec<Vec<f64>>, series: Vec<FourierSeries>) -> Self {
        let count: usize = axes.iter().map(|a| a.len()).product();
        assert_eq!(series.len(), count, "node series count mismatch");
        let value_dim = series[0].value_dim();
        assert!(series.iter().all(|s| s.value_dim() == value_dim));
        let weights = axes.iter().map(|a| barycentric_weights(a)).collect();
        Self { axes, weights, series, value_dim }
    }

    pub fn action_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn series(&self) -> &[FourierSeries] {
        &self.series
    }

    /// Barycentric coefficient vector of coordinate `x` against one axis.
    fn axis_coefficients(nodes: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
        for (j, &nj) in nodes.iter().enumerate() {
            if x == nj {
                let mut c = vec![0.0; nodes.len()];
                c[j] = 1.0;
                return c;
            }
        }
        let terms: Vec<f64> =
            nodes.iter().zip(weights).map(|(&nj, &wj)| wj / (x - nj)).collect();
        let total: f64 = terms.iter().sum();
        terms.iter().map(|t| t / total).collect()
    }

    /// Evaluate the field at angles `theta` and action `r`.
    pub fn eval(&self, theta: &[f64], r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.axes.len());
        let coeffs: Vec<Vec<f64>> = self
            .axes
            .iter()
            .zip(&self.weights)
            .zip(r)
            .map(|((nodes, weights), &x)| Self::axis_coefficients(nodes, weights, x))
            .collect();
        let mut acc = vec![0.0; self.value_dim];
        let mut idx = vec![0usize; self.axes.len()];
        let mut flat = 0usize;
        loop {
            let mut weight = 1.0;
            for (a, &j) in idx.iter().enumerate() {
                weight *= coeffs[a][j];
            }
            if weight != 0.0 {
                let vals = self.series[flat].eval_real(theta);
                for (av, v) in acc.iter_mut().zip(vals) {
                    *av += weight * v;
                }
            }
            // Odometer over the node tensor.
            let mut a = self.axes.len();
            loop {
                if a == 0 {
                    return acc;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < self.axes[a].len() {
                    break;
                }
                idx[a] = 0;
            }
            flat = 0;
            for (a, &j) in idx.iter().enumerate() {
                flat = flat * self.axes[a].len() + j;
            }
        }
    }
}

/// Angle-action transformation `(theta, r) -> (theta + U(theta, r), r + V(theta, r))`.
///
/// `U` and `V` are stored fused (value components `0..n` are the angle
/// displacement, `n..2n` the action displacement) so one synthesis per node
/// serves both.
#[derive(Debug, Clone)]
pub struct TwistTransform {
    pub field: ActionSampledField,
    dim: usize,
}

impl TwistTransform {
    pub fn new(field: ActionSampledField, dim: usize) -> Self {
        assert_eq!(field.value_dim(), 2 * dim);
        Self { field, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, theta: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let uv = self.field.eval(theta, r);
        let th: Vec<f64> = theta.iter().zip(&uv[..self.dim]).map(|(&t, &u)| t + u).collect();
        let rr: Vec<f64> = r.iter().zip(&uv[self.dim..]).map(|(&x, &v)| x + v).collect();
        (th, rr)
    }

    pub fn invert(&self, y_theta: &[f64], y_r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim;
        let mut y = y_theta.to_vec();
        y.extend_from_slice(y_r);
        let joint = |z: &[f64]| -> Vec<f64> {
            let (th, rr) = self.apply(&z[..n], &z[n..]);
            let mut out = th;
            out.extend(rr);
            out
        };
        let x = newton_invert(&joint, &y, 2 * n)?;
        Ok((x[..n].to_vec(), x[n..].to_vec()))
    }
}

/// Composition of twist transforms with the translation ledger.
#[derive(Debug, Clone)]
pub struct TwistChain {
    pub parts: Vec<TwistTransform>,
    pub translations: TranslationLedger,
}

impl TwistChain {
    pub fn identity(dim: usize) -> Self {
        Self { parts: Vec::new(), translations: TranslationLedger::new(dim) }
    }

    pub fn push(&mut self, t: TwistTransform) {
        self.parts.push(t);
    }

    pub fn forward(&self, theta: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut th = theta.to_vec();
        let mut rr = r.to_vec();
        for part in self.parts.iter().rev() {
            let (a, b) = part.apply(&th, &rr);
            th = a;
            rr = b;
        }
        (th, rr)
    }

    pub fn inverse(&self, y_theta: &[f64], y_r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut th = y_theta.to_vec();
        let mut rr = y_r.to_vec();
        for part in self.parts.iter() {
            let (a, b) = part.invert(&th, &rr)?;
            th = a;
            rr = b;
        }
        Ok((th, rr))
    }

    /// The conjugated map `W^{-1} ∘ F ∘ W` at one point.
    pub fn conjugated_point(
        &self,
        map: &dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>),
        theta: &[f64],
        r: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = self.forward(theta, r);
        let (c, d) = map(&a, &b);
        self.inverse(&c, &d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::analyze_real;
    use crate::fourier::GridShape;
    use crate::TWO_PI;

    fn small_angle_transform(amp: f64) -> AngleTransform {
        let samples: Vec<f64> =
            (0..32).map(|j| amp * (TWO_PI * j as f64 / 32.0).sin()).collect();
        let u = analyze_real(&samples, GridShape::new(1, 32), 1, 4).unwrap();
        AngleTransform::new(u)
    }

    #[test]
    fn angle_transform_roundtrip() {
        let t = small_angle_transform(0.05);
        for j in 0..17 {
            let theta = [TWO_PI * j as f64 / 17.0];
            let y = t.apply(&theta);
            let back = t.invert(&y).unwrap();
            assert!((back[0] - theta[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_composes_in_order() {
        let mut chain = ConjugacyChain::identity(1);
        chain.push(small_angle_transform(0.05));
        chain.push(small_angle_transform(0.01));
        let theta = [1.3];
        // parts[0] is W_1 (outermost), parts[1] is W_2 (innermost).
        let manual = chain.parts[0].apply(&chain.parts[1].apply(&theta));
        let composed = chain.forward(&theta);
        assert!((manual[0] - composed[0]).abs() < 1e-14);
        let back = chain.inverse(&composed).unwrap();
        assert!((back[0] - theta[0]).abs() < 1e-12);
    }

    #[test]
    fn conjugating_rotation_by_identity_chain() {
        let chain = ConjugacyChain::identity(1);
        let omega = 0.7;
        let map = move |x: &[f64]| alloc::vec![x[0] + omega];
        let d = chain.conjugated_displacement(&map, &[0.2]).unwrap();
        assert!((d[0] - omega).abs() < 1e-15);
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let nodes = chebyshev_nodes(2.0, 0.5, 9);
        let series: Vec<FourierSeries> = nodes
            .iter()
            .map(|&r| {
                // constant-in-theta series with value r^3 - r
                let samples: Vec<f64> = (0..8).map(|_| r.powi(3) - r).collect();
                analyze_real(&samples, GridShape::new(1, 8), 1, 0).unwrap()
            })
            .collect();
        let field = ActionSampledField::new(alloc::vec![nodes], series);
        for k in 0..21 {
            let r = 1.55 + 0.9 * k as f64 / 20.0;
            let v = field.eval(&[0.0], &[r]);
            assert!((v[0] - (r.powi(3) - r)).abs() < 1e-11, "r = {r}");
        }
    }

    #[test]
    fn twist_transform_roundtrip() {
        let nodes = chebyshev_nodes(3.0, 0.4, 9);
        let series: Vec<FourierSeries> = nodes
            .iter()
            .map(|&r| {
                let samples: Vec<f64> = (0..32)
                    .flat_map(|j| {
                        let t = TWO_PI * j as f64 / 32.0;
                        [0.02 * t.sin() * (r - 3.0), 0.01 * t.cos() * (1.0 + 0.1 * r)]
                    })
                    .collect();
                analyze_real(&samples, GridShape::new(1, 32), 2, 4).unwrap()
            })
            .collect();
        let field = ActionSampledField::new(alloc::vec![nodes], series);
        let t = TwistTransform::new(field, 1);
        for j in 0..9 {
            let theta = [TWO_PI * j as f64 / 9.0];
            let r = [2.8 + 0.04 * j as f64];
            let (a, b) = t.apply(&theta, &r);
            let (th, rr) = t.invert(&a, &b).unwrap();
            assert!((th[0] - theta[0]).abs() < 1e-11);
            assert!((rr[0] - r[0]).abs() < 1e-11);
        }
    }
}
