//! Keeping the prescribed frequency.
//!
//! The translation step of the iteration solves the frequency equation
//! `omega(x) + drift(x) = target` for the next base action/parameter, where
//! `drift` accumulates the perturbation means collected so far. Solvability is
//! certified by a topological degree (n = 1 sign counting, n = 2 winding
//! numbers) or, when the parameter dimension differs from the frequency
//! dimension, by a range condition handled in [`solve_frequency_range_mode`].
//!
//! Weak convexity of `omega` near the base point (a lower gauge
//! `|omega(x) - omega(y)| >= gauge(|x - y|)`) makes the solved translations a
//! Cauchy sequence; [`cauchy_monitor`] watches the recorded shifts for
//! violations of that scaling.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

use crate::error::{KamError, Result};
use crate::l1_norm;
use crate::modulus::ModulusOfContinuity;

/// Shared callable from an `m`-dimensional region to `R^n`.
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A frequency map `omega` with its region and optional continuity gauges.
#[derive(Clone)]
pub struct FrequencyMap {
    pub domain_dim: usize,
    pub range_dim: usize,
    eval_fn: VectorFn,
    /// Axis-aligned box: `(lo, hi)` per domain axis.
    pub region: Vec<(f64, f64)>,
    /// Weak-convexity lower gauge near the base point, with its ball radius.
    pub modulus_lower: Option<(ModulusOfContinuity, f64)>,
    /// Upper continuity gauge (used for error accounting only).
    pub modulus_upper: Option<ModulusOfContinuity>,
}

impl core::fmt::Debug for FrequencyMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FrequencyMap")
            .field("domain_dim", &self.domain_dim)
            .field("range_dim", &self.range_dim)
            .field("region", &self.region)
            .finish()
    }
}

impl FrequencyMap {
    pub fn new(
        domain_dim: usize,
        range_dim: usize,
        region: Vec<(f64, f64)>,
        eval_fn: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(region.len(), domain_dim);
        Self {
            domain_dim,
            range_dim,
            eval_fn: Arc::new(eval_fn),
            region,
            modulus_lower: None,
            modulus_upper: None,
        }
    }

    pub fn with_lower_gauge(mut self, gauge: ModulusOfContinuity, ball: f64) -> Self {
        self.modulus_lower = Some((gauge, ball));
        self
    }

    pub fn with_upper_gauge(mut self, gauge: ModulusOfContinuity) -> Self {
        self.modulus_upper = Some(gauge);
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.domain_dim);
        let v = (self.eval_fn)(x);
        debug_assert_eq!(v.len(), self.range_dim);
        v
    }

    pub fn clamp_to_region(&self, x: &mut [f64]) {
        for (xi, &(lo, hi)) in x.iter_mut().zip(&self.region) {
            *xi = xi.max(lo).min(hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.region).all(|(&xi, &(lo, hi))| xi >= lo && xi <= hi)
    }
}

/// One recorded translation.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerStep {
    pub index: usize,
    pub shift: Vec<f64>,
    pub shift_norm: f64,
    /// Smallness proxy active at this step (schedule `mu` or a norm).
    pub mu: f64,
    /// Frequency-equation residual after the solve.
    pub residual: f64,
}

/// The list of translations taken so far and their running total.
#[derive(Debug, Clone, Default)]
pub struct TranslationLedger {
    pub steps: Vec<LedgerStep>,
    pub cumulative: Vec<f64>,
}

impl TranslationLedger {
    pub fn new(dim: usize) -> Self {
        Self { steps: Vec::new(), cumulative: vec![0.0; dim] }
    }

    pub fn push(&mut self, index: usize, shift: Vec<f64>, mu: f64, residual: f64) {
        if self.cumulative.len() != shift.len() {
            self.cumulative = vec![0.0; shift.len()];
            for s in &self.steps {
                for (c, v) in self.cumulative.iter_mut().zip(&s.shift) {
                    *c += v;
                }
            }
        }
        for (c, v) in self.cumulative.iter_mut().zip(&shift) {
            *c += v;
        }
        let shift_norm = l1_norm(&shift);
        self.steps.push(LedgerStep { index, shift, shift_norm, mu, residual });
    }

    /// Total translation accumulated so far.
    pub fn total(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_norm(&self) -> f64 {
        l1_norm(&self.cumulative)
    }

    /// Sum of per-step shift magnitudes.
    pub fn total_abs(&self) -> f64 {
        self.steps.iter().map(|s| s.shift_norm).sum()
    }
}

/// Sign-counting Brouwer degree of a continuous scalar map on `[a, b]`.
///
/// The mesh is refined until the number of sign changes of `omega - p`
/// stabilizes; each change contributes its orientation.
pub fn degree_1d(omega: &FrequencyMap, interval: (f64, f64), p: f64) -> Result<i32> {
    assert_eq!(omega.domain_dim, 1);
    assert_eq!(omega.range_dim, 1);
    let (a, b) = interval;
    assert!(a < b);
    if (omega.eval(&[a])[0] - p).abs() < 1e-12 || (omega.eval(&[b])[0] - p).abs() < 1e-12 {
        return Err(KamError::BoundaryHit);
    }
    let count_and_degree = |mesh: usize| -> (usize, i32) {
        let mut changes = 0usize;
        let mut degree = 0i32;
        // Samples landing exactly on zero count as positive; a crossing is a
        // strict sign flip and contributes its orientation.
        let sgn = |v: f64| if v >= 0.0 { 1i8 } else { -1i8 };
        let mut prev = omega.eval(&[a])[0] - p;
        for j in 1..=mesh {
            let x = a + (b - a) * j as f64 / mesh as f64;
            let cur = omega.eval(&[x])[0] - p;
            if sgn(prev) != sgn(cur) {
                changes += 1;
                degree += if cur > prev { 1 } else { -1 };
            }
            prev = cur;
        }
        (changes, degree)
    };
    let mut mesh = 64usize;
    let (mut changes, mut degree) = count_and_degree(mesh);
    let mut stable = 0;
    while mesh < (1 << 20) {
        mesh *= 2;
        let (c, d) = count_and_degree(mesh);
        if c == changes && d == degree {
            stable += 1;
            if stable >= 2 {
                break;
            }
        } else {
            stable = 0;
            changes = c;
            degree = d;
        }
    }
    Ok(degree)
}

/// Winding number of `omega - p` along the (counter-clockwise) boundary of a
/// planar box, by adaptive angle summation.
pub fn degree_2d(
    omega: &FrequencyMap,
    bx: (f64, f64),
    by: (f64, f64),
    p: (f64, f64),
    mesh: usize,
) -> Result<i32> {
    assert_eq!(omega.domain_dim, 2);
    assert_eq!(omega.range_dim, 2);
    let mut m = mesh.max(16);
    loop {
        let total_samples = 4 * m;
        if total_samples > (1 << 20) {
            return Err(KamError::MeshExhausted);
        }
        let mut angles = Vec::with_capacity(total_samples);
        let mut too_close = false;
        for s in 0..total_samples {
            let t = s as f64 / total_samples as f64 * 4.0;
            let (x, y) = boundary_point(bx, by, t);
            let v = omega.eval(&[x, y]);
            let (dx, dy) = (v[0] - p.0, v[1] - p.1);
            if (dx * dx + dy * dy).sqrt() < 1e-9 {
                too_close = true;
                break;
            }
            angles.push(dy.atan2(dx));
        }
        if too_close {
            return Err(KamError::BoundaryHit);
        }
        let mut total = 0.0;
        let mut max_step: f64 = 0.0;
        for s in 0..total_samples {
            let next = angles[(s + 1) % total_samples];
            let mut d = next - angles[s];
            while d > core::f64::consts::PI {
                d -= crate::TWO_PI;
            }
            while d <= -core::f64::consts::PI {
                d += crate::TWO_PI;
            }
            max_step = max_step.max(d.abs());
            total += d;
        }
        if max_step < core::f64::consts::FRAC_PI_2 {
            return Ok((total / crate::TWO_PI).round() as i32);
        }
        m *= 2;
    }
}

/// Walk the box boundary counter-clockwise; `t` in `[0, 4)` selects the edge.
fn boundary_point(bx: (f64, f64), by: (f64, f64), t: f64) -> (f64, f64) {
    let frac = t - t.floor();
    match t as usize {
        0 => (bx.0 + (bx.1 - bx.0) * frac, by.0),
        1 => (bx.1, by.0 + (by.1 - by.0) * frac),
        2 => (bx.1 - (bx.1 - bx.0) * frac, by.1),
        _ => (bx.0, by.1 - (by.1 - by.0) * frac),
    }
}

/// Solve `omega(x) + drift(x) = target` near `start`.
///
/// n = 1 uses an outward scan for a bracket followed by bisection, which
/// tolerates degenerate (weakly convex) frequency maps; n = 2 uses damped
/// Newton with a finite-difference Jacobian and falls back to a grid scan with
/// local contraction. Ties between roots break towards `start`.
pub fn solve_frequency_equation(
    omega: &FrequencyMap,
    drift: &dyn Fn(&[f64]) -> Vec<f64>,
    target: &[f64],
    start: &[f64],
    trust_radius: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let m = omega.domain_dim;
    let n = omega.range_dim;
    if m != n {
        return Err(KamError::DimensionMismatch { expected: n, got: m });
    }
    assert_eq!(target.len(), n);
    assert_eq!(start.len(), m);
    assert!(trust_radius > 0.0 && tol > 0.0);
    let f = |x: &[f64]| -> Vec<f64> {
        let w = omega.eval(x);
        let d = drift(x);
        (0..n).map(|i| w[i] + d[i] - target[i]).collect()
    };
    match m {
        1 => solve_1d(omega, &f, start[0], trust_radius, tol),
        2 => solve_2d(omega, &f, start, trust_radius, tol),
        _ => Err(KamError::DimensionMismatch { expected: 2, got: m }),
    }
}

fn solve_1d(
    omega: &FrequencyMap,
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    start: f64,
    trust_radius: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let (lo, hi) = omega.region[0];
    let lo = lo.max(start - trust_radius);
    let hi = hi.min(start + trust_radius);
    let g = |x: f64| f(&[x])[0];
    let g0 = g(start);
    if g0.abs() <= tol {
        return Ok(vec![start]);
    }
    // Outward scan for the nearest bracket on either side.
    let mut bracket: Option<(f64, f64, f64, f64)> = None;
    let mut step = (hi - lo).max(1e-12) / 1024.0;
    let (mut xl, mut gl) = (start, g0);
    let (mut xr, mut gr) = (start, g0);
    let mut left_open = start > lo;
    let mut right_open = start < hi;
    while left_open || right_open {
        if right_open {
            let x = (xr + step).min(hi);
            let gx = g(x);
            if gx == 0.0 || (gx > 0.0) != (gr > 0.0) {
                bracket = Some((xr, x, gr, gx));
                break;
            }
            right_open = x < hi;
            xr = x;
            gr = gx;
        }
        if left_open {
            let x = (xl - step).max(lo);
            let gx = g(x);
            if gx == 0.0 || (gx > 0.0) != (gl > 0.0) {
                bracket = Some((x, xl, gx, gl));
                break;
            }
            left_open = x > lo;
            xl = x;
            gl = gx;
        }
        step *= 1.6;
    }
    let (mut a, mut b, mut ga, _gb) = match bracket {
        Some(t) => t,
        None => return Err(KamError::NoRootInRegion),
    };
    let mut best = (ga.abs(), a);
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        let gm = g(mid);
        if gm.abs() < best.0 {
            best = (gm.abs(), mid);
        }
        if gm.abs() <= tol {
            return Ok(vec![mid]);
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
        if (b - a).abs() <= f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    if best.0 <= tol {
        Ok(vec![best.1])
    } else {
        Err(KamError::ToleranceUnreachable { best: best.0 })
    }
}

fn solve_2d(
    omega: &FrequencyMap,
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    trust_radius: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let res = |x: &[f64]| l1_norm(&f(x));
    let mut x = start.to_vec();
    // Damped Newton with finite-difference Jacobian.
    for _ in 0..60 {
        let fx = f(&x);
        if l1_norm(&fx) <= tol {
            return Ok(x);
        }
        let scale = 1.0f64.max(l1_norm(&x));
        let h = 1e-6 * scale;
        let mut jac = [[0.0f64; 2]; 2];
        for j in 0..2 {
            let mut xp = x.clone();
            xp[j] += h;
            let fp = f(&xp);
            for i in 0..2 {
                jac[i][j] = (fp[i] - fx[i]) / h;
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        let dx = [
            (-fx[0] * jac[1][1] + fx[1] * jac[0][1]) / det,
            (-fx[1] * jac[0][0] + fx[0] * jac[1][0]) / det,
        ];
        let mut lambda = 1.0;
        let current = l1_norm(&fx);
        let mut advanced = false;
        while lambda > 1e-4 {
            let cand = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            let inside = omega.contains(&cand)
                && (cand[0] - start[0]).abs() <= trust_radius
                && (cand[1] - start[1]).abs() <= trust_radius;
            if inside && res(&cand) < current {
                x = cand.to_vec();
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if res(&x) <= tol {
        return Ok(x);
    }
    // Degree certificate on the trust box, then grid scan + contraction.
    let bx = (
        omega.region[0].0.max(start[0] - trust_radius),
        omega.region[0].1.min(start[0] + trust_radius),
    );
    let by = (
        omega.region[1].0.max(start[1] - trust_radius),
        omega.region[1].1.min(start[1] + trust_radius),
    );
    let deg = degree_of_residual(&f, bx, by)?;
    if deg == 0 {
        return Err(KamError::NoRootInRegion);
    }
    let mut center = [0.5 * (bx.0 + bx.1), 0.5 * (by.0 + by.1)];
    let mut half = [0.5 * (bx.1 - bx.0), 0.5 * (by.1 - by.0)];
    let mut best = (res(start), start.to_vec());
    for _round in 0..80 {
        let g = 16usize;
        for i in 0..=g {
            for j in 0..=g {
                let cand = [
                    center[0] - half[0] + 2.0 * half[0] * i as f64 / g as f64,
                    center[1] - half[1] + 2.0 * half[1] * j as f64 / g as f64,
                ];
                let r = res(&cand);
                if r < best.0 {
                    best = (r, cand.to_vec());
                }
            }
        }
        if best.0 <= tol {
            return Ok(best.1);
        }
        center = [best.1[0], best.1[1]];
        half = [half[0] * 0.35, half[1] * 0.35];
        if half[0].max(half[1]) < 1e-15 {
            break;
        }
    }
    Err(KamError::ToleranceUnreachable { best: best.0 })
}

fn degree_of_residual(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    bx: (f64, f64),
    by: (f64, f64),
) -> Result<i32> {
    let mut m = 64usize;
    loop {
        let total = 4 * m;
        if total > (1 << 20) {
            return Err(KamError::MeshExhausted);
        }
        let mut angles = Vec::with_capacity(total);
        for s in 0..total {
            let t = s as f64 / total as f64 * 4.0;
            let (x, y) = boundary_point(bx, by, t);
            let v = f(&[x, y]);
            if l1_norm(&v) < 1e-13 {
                // Root on the boundary: count it as certifying solvability.
                return Ok(1);
            }
            angles.push(v[1].atan2(v[0]));
        }
        let mut sum = 0.0;
        let mut max_step: f64 = 0.0;
        for s in 0..total {
            let next = angles[(s + 1) % total];
            let mut d = next - angles[s];
            while d > core::f64::consts::PI {
                d -= crate::TWO_PI;
            }
            while d <= -core::f64::consts::PI {
                d += crate::TWO_PI;
            }
            max_step = max_step.max(d.abs());
            sum += d;
        }
        if max_step < core::f64::consts::FRAC_PI_2 {
            return Ok((sum / crate::TWO_PI).round() as i32);
        }
        m *= 2;
    }
}

/// Minimize `|omega(x) + drift(x) - target|_2` by a coarse grid scan followed
/// by local contraction; accepts `m != n`.
///
/// `clearance` is the declared margin of the target inside the frequency
/// range: a best residual above it means the target misses the range.
pub fn solve_frequency_range_mode(
    omega: &FrequencyMap,
    drift: &dyn Fn(&[f64]) -> Vec<f64>,
    target: &[f64],
    clearance: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let m = omega.domain_dim;
    let n = omega.range_dim;
    assert_eq!(target.len(), n);
    assert!(tol > 0.0 && clearance > 0.0);
    let res = |x: &[f64]| -> f64 {
        let w = omega.eval(x);
        let d = drift(x);
        let mut s = 0.0;
        for i in 0..n {
            let e = w[i] + d[i] - target[i];
            s += e * e;
        }
        s.sqrt()
    };
    let per_axis = match m {
        1 => 512usize,
        2 => 64,
        _ => 16,
    };
    let mut best = (f64::INFINITY, vec![0.0; m]);
    let mut idx = vec![0usize; m];
    loop {
        let x: Vec<f64> = (0..m)
            .map(|a| {
                let (lo, hi) = omega.region[a];
                lo + (hi - lo) * idx[a] as f64 / per_axis as f64
            })
            .collect();
        let r = res(&x);
        if r < best.0 {
            best = (r, x);
        }
        // Odometer increment.
        let mut a = 0;
        loop {
            if a == m {
                break;
            }
            idx[a] += 1;
            if idx[a] <= per_axis {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == m {
            break;
        }
    }
    // Local contraction around the best grid point: pattern search over the
    // 3^m stencil, halving the step whenever no neighbour improves.
    let mut half: Vec<f64> =
        omega.region.iter().map(|&(lo, hi)| (hi - lo) / per_axis as f64).collect();
    for _ in 0..200 {
        if best.0 <= tol {
            return Ok(best.1);
        }
        let center = best.1.clone();
        let mut improved = false;
        for stencil in 0..3usize.pow(m as u32) {
            let mut rest = stencil;
            let cand: Vec<f64> = (0..m)
                .map(|a| {
                    let offset = (rest % 3) as f64 - 1.0;
                    rest /= 3;
                    let (lo, hi) = omega.region[a];
                    (center[a] + offset * half[a]).max(lo).min(hi)
                })
                .collect();
            let r = res(&cand);
            if r < best.0 {
                best = (r, cand);
                improved = true;
            }
        }
        if !improved {
            for h in &mut half {
                *h *= 0.5;
            }
            if half.iter().all(|&h| h < 1e-16) {
                break;
            }
        }
    }
    if best.0 <= tol {
        Ok(best.1)
    } else if best.0 > clearance {
        Err(KamError::TargetOutsideRange { best: best.0, clearance })
    } else {
        Err(KamError::ToleranceUnreachable { best: best.0 })
    }
}

/// Per-step shift/smallness ratios and growth flags.
#[derive(Debug, Clone)]
pub struct CauchyReport {
    /// `|shift_nu| / mu_nu` per recorded step.
    pub ratios: Vec<f64>,
    /// True where a ratio grew by more than 10x from the previous step.
    pub flags: Vec<bool>,
    pub flagged: bool,
    /// The single run constant: the largest observed ratio.
    pub constant: f64,
}

/// Shifts at noise level are not meaningful; ratios below this floor never flag.
const CAUCHY_NOISE_FLOOR: f64 = 1e-9;

/// Compare recorded shifts against their smallness proxies.
///
/// A step flags when its ratio exceeds ten times every ratio seen before it:
/// that is a genuine escalation of the shift scale. Comparing against the
/// running maximum (rather than only the immediate predecessor) keeps
/// near-zero translations that dip to noise and recover from raising alarms.
pub fn cauchy_monitor(ledger: &TranslationLedger) -> CauchyReport {
    assert!(ledger.steps.len() >= 2, "cauchy monitor needs at least two steps");
    let ratios: Vec<f64> = ledger
        .steps
        .iter()
        .map(|s| if s.mu > 0.0 { s.shift_norm / s.mu } else { 0.0 })
        .collect();
    let mut flags = vec![false; ratios.len()];
    // Zero ratios carry no scale; the first nonzero one sets the baseline.
    let mut running_max = if ratios[0] > 0.0 { Some(ratios[0]) } else { None };
    for i in 1..ratios.len() {
        let grew = match running_max {
            Some(base) => ratios[i] > 10.0 * base,
            None => false,
        };
        let meaningful =
            ledger.steps[i].shift_norm > CAUCHY_NOISE_FLOOR * (1.0 + ledger.steps[i].mu);
        flags[i] = grew && meaningful;
        if ratios[i] > 0.0 {
            running_max = Some(running_max.map_or(ratios[i], |b| b.max(ratios[i])));
        }
    }
    let flagged = flags.iter().any(|&f| f);
    let constant = ratios.iter().cloned().fold(0.0, f64::max);
    CauchyReport { ratios, flags, flagged, constant }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_map_1d() -> FrequencyMap {
        FrequencyMap::new(1, 1, vec![(-1.0, 1.0)], |x| vec![x[0]])
    }

    #[test]
    fn degree_identity() {
        assert_eq!(degree_1d(&identity_map_1d(), (-1.0, 1.0), 0.0).unwrap(), 1);
    }

    #[test]
    fn degree_reversal() {
        let m = FrequencyMap::new(1, 1, vec![(-1.0, 1.0)], |x| vec![-x[0]]);
        assert_eq!(degree_1d(&m, (-1.0, 1.0), 0.0).unwrap(), -1);
    }

    #[test]
    fn degree_parabola() {
        // Two preimages of 0.5 with opposite slopes cancel.
        let m = FrequencyMap::new(1, 1, vec![(-1.0, 1.0)], |x| vec![x[0] * x[0]]);
        assert_eq!(degree_1d(&m, (-1.0, 1.0), 0.5).unwrap(), 0);
    }

    #[test]
    fn degree_boundary_hit() {
        assert_eq!(degree_1d(&identity_map_1d(), (-1.0, 1.0), 1.0).unwrap_err(), KamError::BoundaryHit);
    }

    fn identity_map_2d() -> FrequencyMap {
        FrequencyMap::new(2, 2, vec![(-1.0, 1.0), (-1.0, 1.0)], |x| vec![x[0], x[1]])
    }

    #[test]
    fn degree2d_identity() {
        assert_eq!(degree_2d(&identity_map_2d(), (-1.0, 1.0), (-1.0, 1.0), (0.0, 0.0), 64).unwrap(), 1);
    }

    #[test]
    fn degree2d_complex_square() {
        let m = FrequencyMap::new(2, 2, vec![(-1.0, 1.0), (-1.0, 1.0)], |x| {
            vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]]
        });
        // Brute-force oracle at a fixed fine mesh.
        let oracle = degree_2d(&m, (-1.0, 1.0), (-1.0, 1.0), (0.1, 0.0), 10_000).unwrap();
        assert_eq!(oracle, 2);
        assert_eq!(degree_2d(&m, (-1.0, 1.0), (-1.0, 1.0), (0.1, 0.0), 64).unwrap(), 2);
    }

    #[test]
    fn degree2d_point_outside_image() {
        assert_eq!(
            degree_2d(&identity_map_2d(), (-1.0, 1.0), (-1.0, 1.0), (10.0, 10.0), 64).unwrap(),
            0
        );
    }

    #[test]
    fn frequency_equation_linear() {
        let m = identity_map_1d();
        let drift = |_x: &[f64]| vec![0.01];
        let x = solve_frequency_equation(&m, &drift, &[0.5], &[0.5], 0.5, 1e-12).unwrap();
        assert!((x[0] - 0.49).abs() < 1e-10);
    }

    #[test]
    fn frequency_equation_degenerate_cubic() {
        // omega(x) = x^3 is weakly convex with gauge x^3/4; the solve still
        // brackets and bisects through the flat spot.
        let m = FrequencyMap::new(1, 1, vec![(-1.0, 1.0)], |x| vec![x[0] * x[0] * x[0]]);
        let drift = |_x: &[f64]| vec![0.000_999];
        let x = solve_frequency_equation(&m, &drift, &[0.001], &[0.1], 0.5, 1e-15).unwrap();
        // x^3 = 1e-6  =>  x = 1e-2
        assert!((x[0] - 0.01).abs() < 1e-9, "x = {}", x[0]);
    }

    #[test]
    fn frequency_equation_componentwise_2d() {
        let m = identity_map_2d();
        let drift = |_x: &[f64]| vec![0.01, -0.02];
        let x = solve_frequency_equation(&m, &drift, &[0.3, 0.7], &[0.3, 0.7], 0.5, 1e-12).unwrap();
        assert!((x[0] - 0.29).abs() < 1e-9);
        assert!((x[1] - 0.72).abs() < 1e-9);
    }

    #[test]
    fn frequency_equation_no_root() {
        let m = identity_map_1d();
        let drift = |_x: &[f64]| vec![0.0];
        let err = solve_frequency_equation(&m, &drift, &[5.0], &[0.0], 10.0, 1e-12).unwrap_err();
        assert_eq!(err, KamError::NoRootInRegion);
    }

    #[test]
    fn range_mode_consistent_overdetermined() {
        let m = FrequencyMap::new(1, 2, vec![(-1.0, 1.0)], |x| vec![x[0], 2.0 * x[0]]);
        let drift = |_x: &[f64]| vec![0.0, 0.0];
        let x = solve_frequency_range_mode(&m, &drift, &[0.3, 0.6], 1e-3, 1e-10).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn range_mode_inconsistent_target() {
        let m = FrequencyMap::new(1, 2, vec![(-1.0, 1.0)], |x| vec![x[0], 2.0 * x[0]]);
        let drift = |_x: &[f64]| vec![0.0, 0.0];
        // Oracle: distance of (0.3, 0.61) to the line (t, 2t) is 0.01/sqrt(5).
        let floor = 0.01 / 5f64.sqrt();
        let err = solve_frequency_range_mode(&m, &drift, &[0.3, 0.61], 1e-3, 1e-10).unwrap_err();
        match err {
            KamError::TargetOutsideRange { best, .. } => {
                assert!((best - floor).abs() < 1e-6, "best = {best}, floor = {floor}");
            }
            other => panic!("expected TargetOutsideRange, got {other:?}"),
        }
    }

    #[test]
    fn range_mode_underdetermined() {
        let m = FrequencyMap::new(2, 1, vec![(-1.0, 1.0), (-1.0, 1.0)], |x| vec![x[0] + x[1]]);
        let drift = |_x: &[f64]| vec![0.0];
        let x = solve_frequency_range_mode(&m, &drift, &[0.5], 1e-3, 1e-10).unwrap();
        assert!((x[0] + x[1] - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn cauchy_monitor_examples() {
        let mut ledger = TranslationLedger::new(1);
        for (i, (s, mu)) in [(1e-2, 1e-2), (1e-4, 1e-4), (1e-8, 1e-8)].iter().enumerate() {
            ledger.push(i, vec![*s], *mu, 0.0);
        }
        let report = cauchy_monitor(&ledger);
        assert!(!report.flagged);
        assert!(report.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));

        let mut zeros = TranslationLedger::new(1);
        zeros.push(0, vec![0.0], 1e-2, 0.0);
        zeros.push(1, vec![0.0], 1e-4, 0.0);
        assert!(!cauchy_monitor(&zeros).flagged);

        let mut bad = TranslationLedger::new(1);
        bad.push(0, vec![1e-2], 1e-2, 0.0);
        bad.push(1, vec![1e-2], 1e-4, 0.0);
        let report = cauchy_monitor(&bad);
        assert!(report.flagged);
        assert!(report.flags[1]);
        assert!((report.constant - 100.0).abs() < 1e-9);
    }

    #[test]
    fn degree_stable_under_small_drift() {
        // Perturbing below the boundary margin cannot change the degree.
        let m = FrequencyMap::new(1, 1, vec![(-1.0, 1.0)], |x| vec![x[0] + 0.1 * x[0].powi(3)]);
        let base = degree_1d(&m, (-1.0, 1.0), 0.2).unwrap();
        assert_eq!(base, 1);
        let margin = ((m.eval(&[-1.0])[0] - 0.2).abs()).min((m.eval(&[1.0])[0] - 0.2).abs());
        for s in 0..20 {
            let shift = (s as f64 / 19.0 - 0.5) * margin * 0.9;
            let pert = FrequencyMap::new(1, 1, vec![(-1.0, 1.0)], move |x| {
                vec![x[0] + 0.1 * x[0].powi(3) + shift]
            });
            assert_eq!(degree_1d(&pert, (-1.0, 1.0), 0.2).unwrap(), base);
        }
    }
}
