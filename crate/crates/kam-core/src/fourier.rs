//! Truncated Fourier series on the n-torus.
//!
//! A [`FourierSeries`] stores complex coefficients for every multi-index `k`
//! with `|k|_1 <= K` (the cutoff), in a fixed lexicographic order, for scalar
//! or vector-valued functions. Everything downstream — the difference-equation
//! solver, the conjugacy chains, the engines — moves between uniform grid
//! samples and this representation.
//!
//! Conventions:
//! * the torus has period `2·pi` per axis, grids are `theta_j = 2·pi·j/N`;
//! * `|k|` always means the l1 multi-index norm;
//! * analysis of an `N`-point grid is exact for band-limited input whenever
//!   `N >= 2K + 2` (no aliasing);
//! * complex strips are sampled at the extreme imaginary corners
//!   `Im theta in {-h, +h}^n` only; for analytic functions the supremum over
//!   the strip is attained on its boundary.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

use crate::error::{KamError, Result};
use crate::TWO_PI;

/// Uniform tensor grid description: `points_per_axis` samples on each of the
/// `dim` axes, row-major with axis 0 slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub dim: usize,
    pub points_per_axis: usize,
}

impl GridShape {
    pub fn new(dim: usize, points_per_axis: usize) -> Self {
        Self { dim, points_per_axis }
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angles of the point with row-major index `idx`.
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        let mut out = vec![0.0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = TWO_PI * (idx % n) as f64 / n as f64;
            idx /= n;
        }
        out
    }
}

/// Which norm a strip evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormFlavor {
    /// Max of `|f|` over sampled grids at the extreme imaginary corners.
    GridSup,
    /// `sum_k |f_k| e^(|k|·h)`; an upper bound for `GridSup` on band-limited series.
    CoeffWeighted,
}

/// A strip half-width paired with a norm flavor.
#[derive(Debug, Clone, Copy)]
pub struct StripNorm {
    pub h: f64,
    pub flavor: NormFlavor,
}

impl StripNorm {
    pub fn new(h: f64, flavor: NormFlavor) -> Self {
        Self { h, flavor }
    }

    pub fn of(&self, f: &FourierSeries) -> f64 {
        strip_norm(f, self.h, self.flavor)
    }
}

/// Number of multi-indices `k` in `Z^dim` with `|k|_1 <= budget`.
fn l1_ball_count(dim: usize, budget: usize) -> usize {
    match dim {
        0 => 1,
        1 => 2 * budget + 1,
        _ => {
            let mut total = 0;
            for t in 0..=budget {
                let inner = l1_ball_count(dim - 1, budget - t);
                total += if t == 0 { inner } else { 2 * inner };
            }
            total
        }
    }
}

/// Lexicographic enumeration of the l1 ball `|k|_1 <= budget` in `Z^dim`.
fn enumerate_modes(dim: usize, budget: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(dim * l1_ball_count(dim, budget));
    let mut prefix = vec![0i64; dim];
    fill_modes(dim, budget, 0, &mut prefix, &mut out);
    out
}

fn fill_modes(dim: usize, budget: usize, axis: usize, prefix: &mut [i64], out: &mut Vec<i64>) {
    if axis == dim {
        out.extend_from_slice(prefix);
        return;
    }
    let b = budget as i64;
    for k in -b..=b {
        prefix[axis] = k;
        fill_modes(dim, budget - k.unsigned_abs() as usize, axis + 1, prefix, out);
    }
}

/// Truncated Fourier representation of a (possibly vector-valued) function on `T^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    dim: usize,
    cutoff: usize,
    value_dim: usize,
    real_valued: bool,
    /// Flat multi-index storage, stride `dim`, lexicographic order.
    modes: Vec<i64>,
    /// Mode-major coefficient storage, stride `value_dim`.
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    /// The zero series.
    pub fn zero(dim: usize, value_dim: usize, cutoff: usize) -> Self {
        assert!(dim >= 1 && value_dim >= 1);
        let modes = enumerate_modes(dim, cutoff);
        let n_modes = modes.len() / dim;
        Self {
            dim,
            cutoff,
            value_dim,
            real_valued: true,
            modes,
            coeffs: vec![Complex64::new(0.0, 0.0); n_modes * value_dim],
        }
    }

    /// Build from explicit coefficients in this crate's mode order.
    ///
    /// When `real_valued` is set, Hermitian symmetry `c(-k) = conj(c(k))` is
    /// asserted (to 1e-9 relative); violating it is a caller bug.
    pub fn from_coeffs(
        dim: usize,
        value_dim: usize,
        cutoff: usize,
        coeffs: Vec<Complex64>,
        real_valued: bool,
    ) -> Self {
        let modes = enumerate_modes(dim, cutoff);
        let n_modes = modes.len() / dim;
        assert_eq!(coeffs.len(), n_modes * value_dim, "coefficient count mismatch");
        let s = Self { dim, cutoff, value_dim, real_valued, modes, coeffs };
        if real_valued {
            s.assert_hermitian();
        }
        s
    }

    fn assert_hermitian(&self) {
        let scale = 1.0 + self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut neg = vec![0i64; self.dim];
        for (i, k) in self.modes().enumerate() {
            for (a, &ka) in k.iter().enumerate() {
                neg[a] = -ka;
            }
            let j = self.index_of(&neg).expect("mirror mode present by symmetry of the ball");
            for c in 0..self.value_dim {
                let d = (self.coeffs[i * self.value_dim + c]
                    - self.coeffs[j * self.value_dim + c].conj())
                .norm();
                assert!(
                    d <= 1e-9 * scale,
                    "series flagged real-valued violates Hermitian symmetry at k = {:?}",
                    k
                );
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len() / self.dim
    }

    /// Multi-indices in storage order.
    pub fn modes(&self) -> impl Iterator<Item = &[i64]> {
        self.modes.chunks_exact(self.dim)
    }

    pub fn mode_at(&self, i: usize) -> &[i64] {
        &self.modes[i * self.dim..(i + 1) * self.dim]
    }

    /// Coefficient vector (one entry per value component) of the i-th stored mode.
    pub fn coeff_at(&self, i: usize) -> &[Complex64] {
        &self.coeffs[i * self.value_dim..(i + 1) * self.value_dim]
    }

    pub fn coeff_at_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.coeffs[i * self.value_dim..(i + 1) * self.value_dim]
    }

    /// Position of multi-index `k` in storage order, if `|k|_1 <= cutoff`.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        assert_eq!(k.len(), self.dim);
        let l1: usize = k.iter().map(|x| x.unsigned_abs() as usize).sum();
        if l1 > self.cutoff {
            return None;
        }
        // Count modes lexicographically smaller than k.
        let mut idx = 0usize;
        let mut budget = self.cutoff;
        for (axis, &ka) in k.iter().enumerate() {
            let rem_dims = self.dim - axis - 1;
            for t in -(budget as i64)..ka {
                idx += l1_ball_count(rem_dims, budget - t.unsigned_abs() as usize);
            }
            budget -= ka.unsigned_abs() as usize;
        }
        Some(idx)
    }

    /// Coefficient vector of multi-index `k`, zero if outside the cutoff.
    pub fn coeff(&self, k: &[i64]) -> Vec<Complex64> {
        match self.index_of(k) {
            Some(i) => self.coeff_at(i).to_vec(),
            None => vec![Complex64::new(0.0, 0.0); self.value_dim],
        }
    }

    /// Mean (the `k = 0` coefficient vector).
    pub fn mean(&self) -> Vec<Complex64> {
        let zero = vec![0i64; self.dim];
        self.coeff(&zero)
    }

    /// Pointwise scale by a real factor.
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= a;
        }
        out
    }

    /// Coefficient-wise linear combination `a·self + b·other`.
    ///
    /// The result lives at the larger cutoff; dimensions must agree.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(KamError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.value_dim != other.value_dim {
            return Err(KamError::DimensionMismatch {
                expected: self.value_dim,
                got: other.value_dim,
            });
        }
        let cutoff = self.cutoff.max(other.cutoff);
        let mut out = Self::zero(self.dim, self.value_dim, cutoff);
        out.real_valued = self.real_valued && other.real_valued;
        let n_modes = out.mode_count();
        for i in 0..n_modes {
            let k: Vec<i64> = out.mode_at(i).to_vec();
            let ca = self.coeff(&k);
            let cb = other.coeff(&k);
            for c in 0..self.value_dim {
                out.coeffs[i * self.value_dim + c] = ca[c] * a + cb[c] * b;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Concatenate value components of two series over the same modes.
    pub fn stack(a: &Self, b: &Self) -> Self {
        assert_eq!(a.dim, b.dim);
        assert_eq!(a.cutoff, b.cutoff);
        let vd = a.value_dim + b.value_dim;
        let mut coeffs = Vec::with_capacity(a.mode_count() * vd);
        for i in 0..a.mode_count() {
            coeffs.extend_from_slice(a.coeff_at(i));
            coeffs.extend_from_slice(b.coeff_at(i));
        }
        Self {
            dim: a.dim,
            cutoff: a.cutoff,
            value_dim: vd,
            real_valued: a.real_valued && b.real_valued,
            modes: a.modes.clone(),
            coeffs,
        }
    }

    /// Copy with the `k = 0` coefficient removed.
    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        let zero = vec![0i64; self.dim];
        if let Some(i) = out.index_of(&zero) {
            for c in out.coeff_at_mut(i) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Sub-series of value components `from..to` (same modes).
    pub fn component_range(&self, from: usize, to: usize) -> Self {
        assert!(from < to && to <= self.value_dim);
        let vd = to - from;
        let mut coeffs = Vec::with_capacity(self.mode_count() * vd);
        for i in 0..self.mode_count() {
            coeffs.extend_from_slice(&self.coeffs[i * self.value_dim + from..i * self.value_dim + to]);
        }
        Self {
            dim: self.dim,
            cutoff: self.cutoff,
            value_dim: vd,
            real_valued: self.real_valued,
            modes: self.modes.clone(),
            coeffs,
        }
    }

    /// Partial derivative along `axis` (multiplies each coefficient by `i·k_axis`).
    pub fn differentiate(&self, axis: usize) -> Self {
        assert!(axis < self.dim);
        let mut out = self.clone();
        for i in 0..out.mode_count() {
            let ka = out.mode_at(i)[axis] as f64;
            let factor = Complex64::new(0.0, ka);
            for c in 0..out.value_dim {
                out.coeffs[i * out.value_dim + c] *= factor;
            }
        }
        out
    }

    /// Evaluate at one point with complex angles: `sum_k c_k e^{i<k,theta>}`.
    pub fn eval_complex(&self, theta: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(theta.len(), self.dim);
        let mut acc = vec![Complex64::new(0.0, 0.0); self.value_dim];
        for (i, k) in self.modes().enumerate() {
            let mut phase = Complex64::new(0.0, 0.0);
            for (a, &ka) in k.iter().enumerate() {
                phase += theta[a] * ka as f64;
            }
            // e^{i phase} with phase = x + i y  ->  e^{-y} (cos x + i sin x)
            let w = Complex64::from_polar((-phase.im).exp(), phase.re);
            for c in 0..self.value_dim {
                acc[c] += self.coeffs[i * self.value_dim + c] * w;
            }
        }
        acc
    }

    /// Evaluate at one real point; valid for series flagged real-valued.
    ///
    /// This is the hot path of the conjugacy chains: one `sin`/`cos` pair per
    /// axis block, phasor recurrences for the rest.
    pub fn eval_real(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.dim);
        let vd = self.value_dim;
        let mut acc = vec![Complex64::new(0.0, 0.0); vd];
        match self.dim {
            1 => {
                let z = Complex64::from_polar(1.0, theta[0]);
                let kmin = -(self.cutoff as i64);
                let mut w = Complex64::from_polar(1.0, kmin as f64 * theta[0]);
                for i in 0..self.mode_count() {
                    for c in 0..vd {
                        acc[c] += self.coeffs[i * vd + c] * w;
                    }
                    w *= z;
                }
            }
            2 => {
                let z2 = Complex64::from_polar(1.0, theta[1]);
                let mut i = 0usize;
                let b = self.cutoff as i64;
                for k1 in -b..=b {
                    let rem = b - k1.abs();
                    let w1 = Complex64::from_polar(1.0, k1 as f64 * theta[0]);
                    let mut w2 = Complex64::from_polar(1.0, -(rem as f64) * theta[1]);
                    for _k2 in -rem..=rem {
                        let w = w1 * w2;
                        for c in 0..vd {
                            acc[c] += self.coeffs[i * vd + c] * w;
                        }
                        w2 *= z2;
                        i += 1;
                    }
                }
            }
            _ => {
                for (i, k) in self.modes().enumerate() {
                    let mut phase = 0.0;
                    for (a, &ka) in k.iter().enumerate() {
                        phase += theta[a] * ka as f64;
                    }
                    let w = Complex64::from_polar(1.0, phase);
                    for c in 0..vd {
                        acc[c] += self.coeffs[i * vd + c] * w;
                    }
                }
            }
        }
        acc.iter().map(|v| v.re).collect()
    }

    /// Values on the uniform real grid, complex (exact for any series).
    pub fn synthesize_grid(&self, points_per_axis: usize) -> Vec<Complex64> {
        let shape = GridShape::new(self.dim, points_per_axis);
        let n = points_per_axis;
        let vd = self.value_dim;
        // e^{+2 pi i j / N} table
        let table: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, TWO_PI * j as f64 / n as f64))
            .collect();
        let idx = |j: usize, k: i64| -> usize { (j as i64 * k).rem_euclid(n as i64) as usize };
        let mut out = vec![Complex64::new(0.0, 0.0); shape.len() * vd];
        match self.dim {
            1 => {
                for (i, k) in self.modes().enumerate() {
                    let k0 = k[0];
                    for j in 0..n {
                        let w = table[idx(j, k0)];
                        for c in 0..vd {
                            out[j * vd + c] += self.coeffs[i * vd + c] * w;
                        }
                    }
                }
            }
            _ => {
                for (i, k) in self.modes().enumerate() {
                    for p in 0..shape.len() {
                        let mut rot = Complex64::new(1.0, 0.0);
                        let mut rest = p;
                        for a in (0..self.dim).rev() {
                            rot *= table[idx(rest % n, k[a])];
                            rest /= n;
                        }
                        for c in 0..vd {
                            out[p * vd + c] += self.coeffs[i * vd + c] * rot;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Trigonometric interpolation: coefficients of the interpolant restricted to
/// `|k|_1 <= cutoff` from samples on a uniform grid.
///
/// Requires `points_per_axis >= 2·cutoff + 2` so that band-limited input is
/// recovered without aliasing.
pub fn analyze(
    values: &[Complex64],
    shape: GridShape,
    value_dim: usize,
    cutoff: usize,
    real_valued: bool,
) -> Result<FourierSeries> {
    let n = shape.points_per_axis;
    if n < 2 * cutoff + 2 {
        return Err(KamError::GridTooCoarse { needed: 2 * cutoff + 2, got: n });
    }
    assert_eq!(values.len(), shape.len() * value_dim, "sample count mismatch");
    let mut out = FourierSeries::zero(shape.dim, value_dim, cutoff);
    out.real_valued = false;
    // e^{-2 pi i j / N} table
    let table: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -TWO_PI * j as f64 / n as f64))
        .collect();
    let idx = |j: usize, k: i64| -> usize { (j as i64 * k).rem_euclid(n as i64) as usize };
    let inv_n = 1.0 / n as f64;
    match shape.dim {
        1 => {
            for (i, ks) in out.modes.chunks_exact(1).enumerate() {
                let k = ks[0];
                let mut acc = vec![Complex64::new(0.0, 0.0); value_dim];
                for j in 0..n {
                    let w = table[idx(j, k)];
                    for c in 0..value_dim {
                        acc[c] += values[j * value_dim + c] * w;
                    }
                }
                for c in 0..value_dim {
                    out.coeffs[i * value_dim + c] = acc[c] * inv_n;
                }
            }
        }
        2 => {
            // Two-pass transform: inner axis first, then the outer axis.
            let b = cutoff as i64;
            let span = 2 * cutoff + 1;
            // partial[(k2 + b) as usize][j1][c]
            let mut partial = vec![Complex64::new(0.0, 0.0); span * n * value_dim];
            for (kk2, k2) in (-b..=b).enumerate() {
                for j1 in 0..n {
                    let mut acc = vec![Complex64::new(0.0, 0.0); value_dim];
                    for j2 in 0..n {
                        let w = table[idx(j2, k2)];
                        let base = (j1 * n + j2) * value_dim;
                        for c in 0..value_dim {
                            acc[c] += values[base + c] * w;
                        }
                    }
                    for c in 0..value_dim {
                        partial[(kk2 * n + j1) * value_dim + c] = acc[c] * inv_n;
                    }
                }
            }
            let n_modes = out.mode_count();
            for i in 0..n_modes {
                let k1 = out.mode_at(i)[0];
                let k2 = out.mode_at(i)[1];
                let kk2 = (k2 + b) as usize;
                let mut acc = vec![Complex64::new(0.0, 0.0); value_dim];
                for j1 in 0..n {
                    let w = table[idx(j1, k1)];
                    for c in 0..value_dim {
                        acc[c] += partial[(kk2 * n + j1) * value_dim + c] * w;
                    }
                }
                for c in 0..value_dim {
                    out.coeffs[i * value_dim + c] = acc[c] * inv_n;
                }
            }
        }
        _ => {
            let n_modes = out.mode_count();
            for i in 0..n_modes {
                let k: Vec<i64> = out.mode_at(i).to_vec();
                let mut acc = vec![Complex64::new(0.0, 0.0); value_dim];
                for p in 0..shape.len() {
                    let mut rot = Complex64::new(1.0, 0.0);
                    let mut rest = p;
                    for a in (0..shape.dim).rev() {
                        rot *= table[idx(rest % n, k[a])];
                        rest /= n;
                    }
                    for c in 0..value_dim {
                        acc[c] += values[p * value_dim + c] * rot;
                    }
                }
                let scale = inv_n.powi(shape.dim as i32);
                for c in 0..value_dim {
                    out.coeffs[i * value_dim + c] = acc[c] * scale;
                }
            }
        }
    }
    if real_valued {
        hermitian_symmetrize(&mut out);
        out.real_valued = true;
        out.assert_hermitian();
    }
    Ok(out)
}

/// Analyze real-valued samples (the engines' path).
pub fn analyze_real(
    values: &[f64],
    shape: GridShape,
    value_dim: usize,
    cutoff: usize,
) -> Result<FourierSeries> {
    let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    analyze(&complex, shape, value_dim, cutoff, true)
}

/// Replace `c_k` by `(c_k + conj(c_{-k}))/2`, removing rounding-level
/// asymmetry from the analysis of real data.
fn hermitian_symmetrize(f: &mut FourierSeries) {
    let vd = f.value_dim;
    let mut neg = vec![0i64; f.dim];
    for i in 0..f.mode_count() {
        for (a, &ka) in f.mode_at(i).iter().enumerate() {
            neg[a] = -ka;
        }
        let j = f.index_of(&neg).expect("mirror mode in ball");
        if j < i {
            continue;
        }
        for c in 0..vd {
            let avg = (f.coeffs[i * vd + c] + f.coeffs[j * vd + c].conj()) * 0.5;
            f.coeffs[i * vd + c] = avg;
            f.coeffs[j * vd + c] = avg.conj();
        }
    }
}

/// Result of splitting a series into mean, band and tail.
#[derive(Debug, Clone)]
pub struct Truncation {
    /// Modes `0 < |k|_1 <= K`, mean removed.
    pub truncated: FourierSeries,
    /// The `k = 0` coefficient vector.
    pub mean: Vec<Complex64>,
    /// Coefficient-weighted norm of the discarded tail at the given strip width.
    pub remainder_norm: f64,
}

/// Split `f` into its mean, the band `0 < |k| <= cutoff` and the tail norm at
/// strip half-width `h`.
pub fn truncate(f: &FourierSeries, cutoff: usize, h: f64) -> Truncation {
    assert!(cutoff <= f.cutoff(), "truncation cutoff exceeds stored cutoff");
    let vd = f.value_dim;
    let mut out = FourierSeries::zero(f.dim, vd, cutoff);
    out.real_valued = f.real_valued;
    let mut mean = vec![Complex64::new(0.0, 0.0); vd];
    let mut tail = 0.0;
    for (i, k) in f.modes().enumerate() {
        let l1: usize = k.iter().map(|x| x.unsigned_abs() as usize).sum();
        if l1 == 0 {
            mean.copy_from_slice(f.coeff_at(i));
        } else if l1 <= cutoff {
            let j = out.index_of(k).expect("mode inside cutoff");
            out.coeff_at_mut(j).copy_from_slice(f.coeff_at(i));
        } else {
            let mag: f64 = f.coeff_at(i).iter().map(|c| c.norm()).sum();
            tail += mag * (l1 as f64 * h).exp();
        }
    }
    Truncation { truncated: out, mean, remainder_norm: tail }
}

/// Norm of `f` on the strip `|Im theta| <= h`.
///
/// `GridSup` samples the extreme imaginary corners combined with a real grid
/// of at least `4·cutoff` points per axis; `CoeffWeighted` is the exponential
/// coefficient sum — always an upper bound for the former on stored modes.
pub fn strip_norm(f: &FourierSeries, h: f64, flavor: NormFlavor) -> f64 {
    assert!(h >= 0.0);
    match flavor {
        NormFlavor::CoeffWeighted => {
            let mut total = 0.0;
            for (i, k) in f.modes().enumerate() {
                let l1: usize = k.iter().map(|x| x.unsigned_abs() as usize).sum();
                let mag: f64 = f.coeff_at(i).iter().map(|c| c.norm()).sum();
                total += mag * (l1 as f64 * h).exp();
            }
            total
        }
        NormFlavor::GridSup => {
            let n = (4 * f.cutoff()).max(8);
            let corners = imaginary_corners(f.dim, h);
            let vd = f.value_dim;
            let mut best: f64 = 0.0;
            for corner in corners {
                // Absorb e^{-<k, y>} into the coefficients, then use the fast
                // real-grid synthesis.
                let mut adj = f.clone();
                adj.real_valued = false;
                for i in 0..adj.mode_count() {
                    let mut dot = 0.0;
                    for (a, &ka) in adj.mode_at(i).iter().enumerate() {
                        dot += ka as f64 * corner[a];
                    }
                    let w = (-dot).exp();
                    for c in 0..vd {
                        adj.coeffs[i * vd + c] *= w;
                    }
                }
                let values = adj.synthesize_grid(n);
                for point in values.chunks_exact(vd) {
                    let mag: f64 = point.iter().map(|v| v.norm()).sum();
                    best = best.max(mag);
                }
            }
            best
        }
    }
}

fn imaginary_corners(dim: usize, h: f64) -> Vec<Vec<f64>> {
    if h == 0.0 {
        return vec![vec![0.0; dim]];
    }
    let mut out = Vec::with_capacity(1 << dim);
    for mask in 0..(1usize << dim) {
        let corner: Vec<f64> =
            (0..dim).map(|a| if mask & (1 << a) != 0 { h } else { -h }).collect();
        out.push(corner);
    }
    out
}

/// Seminorm of a parameter-indexed family of series against a gauge:
/// `max over sample pairs of ||f(x') - f(x'')|| / gauge(|x' - x''|)` taken over
/// pairs at l1 distance in `(0, 1]`.
pub fn modulus_seminorm(
    family: &[(Vec<f64>, FourierSeries)],
    gauge: &crate::modulus::ModulusOfContinuity,
    h: f64,
    flavor: NormFlavor,
) -> Result<f64> {
    if family.len() < 2 {
        return Err(KamError::DegenerateSampleSet);
    }
    let mut best: f64 = 0.0;
    let mut found_pair = false;
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let dist: f64 =
                family[i].0.iter().zip(&family[j].0).map(|(a, b)| (a - b).abs()).sum();
            if dist <= 0.0 || dist > 1.0 {
                continue;
            }
            found_pair = true;
            let diff = family[i].1.sub(&family[j].1)?;
            best = best.max(strip_norm(&diff, h, flavor) / gauge.eval(dist));
        }
    }
    if !found_pair {
        return Err(KamError::DegenerateSampleSet);
    }
    Ok(best)
}
