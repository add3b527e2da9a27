//! Independent oracles and iteration bookkeeping.
//!
//! Nothing here feeds back into the engines' construction: rotation numbers
//! come from long orbits of the *original* map, conjugacy residuals from
//! direct evaluation of `W ∘ Fhat - F ∘ W` on a grid, convergence orders from
//! a log-log fit of recorded norms. The [`KamSchedule`] carries the iteration
//! sequences (strip widths, action radii, smallness scales, cutoffs) and the
//! per-step smallness hypotheses H1-H6 are evaluated as indicative reports
//! with all intermediate constants set to one.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

use crate::conjugacy::{ConjugacyChain, TwistChain};
use crate::error::{KamError, Result};
use crate::fourier::GridShape;
use crate::modulus::ModulusOfContinuity;
use crate::wrap_centered;

/// Iteration sequences and exponents for one run.
///
/// `gamma0 = eps^(1/(4(n+m+2)))` and `mu0 = eps^(1/(8 eta (m+1)))` seed the
/// recursions
/// `h_{v+1} = h_v/2 + h0/4`, `s_{v+1} = s_v/2`, `mu_{v+1} = mu_v^(1+rho)`,
/// `K_{v+1} = (floor(ln(1/mu_v)) + 1)^(3 eta)`.
#[derive(Debug, Clone)]
pub struct KamSchedule {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub gamma0: f64,
    pub mu0: f64,
    pub h0: f64,
    pub s0: f64,
    pub tau: f64,
    /// Strip widths `h_v`, decreasing to `h0/2`.
    pub h: Vec<f64>,
    /// Action radii `s_v`.
    pub s: Vec<f64>,
    /// Smallness scales `mu_v`.
    pub mu: Vec<f64>,
    /// Cutoffs `K_v` (`K_0 = 0`).
    pub k: Vec<usize>,
}

/// Populate a schedule to `depth` steps.
pub fn schedule_init(
    epsilon: f64,
    n: usize,
    m: usize,
    rho: f64,
    eta: f64,
    h0: f64,
    s0: f64,
    tau: f64,
    depth: usize,
) -> Result<KamSchedule> {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    assert!(rho > 0.0 && rho < 1.0);
    assert!(h0 > 0.0 && s0 > 0.0);
    let growth = (1.0 + rho).powf(eta);
    if growth <= 2.0 {
        return Err(KamError::BadExponents { growth });
    }
    let gamma0 = epsilon.powf(1.0 / (4.0 * (n + m + 2) as f64));
    let mu0 = epsilon.powf(1.0 / (8.0 * eta * (m + 1) as f64));
    let mut h = vec![h0];
    let mut s = vec![s0];
    let mut mu = vec![mu0];
    let mut k = vec![0usize];
    for v in 0..depth {
        h.push(h[v] / 2.0 + h0 / 4.0);
        s.push(s[v] / 2.0);
        mu.push(mu[v].powf(1.0 + rho));
        k.push(cutoff_from_mu(mu[v], eta));
    }
    Ok(KamSchedule { n, m, rho, eta, epsilon, gamma0, mu0, h0, s0, tau, h, s, mu, k })
}

// The cutoff bracket reads `[x]` as floor and `log` as the natural log.
fn cutoff_from_mu(mu: f64, eta: f64) -> usize {
    let bracket = (1.0 / mu).ln().floor().max(0.0);
    let value = (bracket + 1.0).powf(3.0 * eta);
    if value >= (1u64 << 31) as f64 {
        1 << 31
    } else {
        value as usize
    }
}

impl KamSchedule {
    /// Working cutoff for step `v`, clamped to the engine's floor and cap.
    pub fn working_cutoff(&self, v: usize, floor: usize, cap: usize) -> usize {
        let raw = self.k.get(v).copied().unwrap_or(usize::MAX);
        raw.max(floor).min(cap)
    }
}

/// `Gamma(delta) = sum over 0 < |k|_1 <= cutoff of |k|^tau e^(-|k| delta / 4)`
/// for the lattice `Z^n`.
pub fn gamma_factor(cutoff: usize, delta: f64, tau: f64, n: usize) -> f64 {
    let mut total = 0.0;
    for l in 1..=cutoff {
        let shell = shell_count(n, l) as f64;
        total += shell * (l as f64).powf(tau) * (-(l as f64) * delta / 4.0).exp();
    }
    total
}

/// Closed-form bound for [`gamma_factor`].
///
/// Comparing the shell sum with the integral `int x^(tau+n-1) e^(-x delta/4)`
/// (plus the peak term, since sum <= integral + max for unimodal summands)
/// gives `Gamma(delta) <= 2n·3^(n-1) [ (tau+n-1)! (4/delta)^(tau+n)
/// + (4(tau+n-1)/(e delta))^(tau+n-1) ]` — note the exponent `tau + n`, not
/// `tau`: the weighted divisor sum scales like `delta^-(tau+n)`.
pub fn gamma_factor_bound(delta: f64, tau: f64, n: usize) -> f64 {
    let a = tau + n as f64;
    let shells = 2.0 * n as f64 * 3f64.powi(n as i32 - 1);
    let integral = libm::tgamma(a) * (4.0 / delta).powf(a);
    let peak = (4.0 * (a - 1.0) / (core::f64::consts::E * delta)).powf(a - 1.0);
    shells * (integral + peak)
}

/// Number of lattice points in `Z^n` with `|k|_1 = l` (`l >= 1`).
fn shell_count(n: usize, l: usize) -> usize {
    match n {
        1 => 2,
        2 => 4 * l,
        _ => ball_count(n, l) - ball_count(n, l - 1),
    }
}

fn ball_count(n: usize, b: usize) -> usize {
    match n {
        0 => 1,
        1 => 2 * b + 1,
        _ => {
            let mut total = ball_count(n - 1, b);
            for t in 1..=b {
                total += 2 * ball_count(n - 1, b - t);
            }
            total
        }
    }
}

/// `int_K^inf l^n e^(-l delta/4) dl` in closed form (integer `n`):
/// integration by parts gives `e^(-aK) sum_{j=0..n} (n!/j!) K^j / a^(n-j+1)`
/// with `a = delta/4`.
pub fn tail_integral(cutoff: f64, delta: f64, n: usize) -> f64 {
    let a = delta / 4.0;
    let mut factor = 1.0; // n!/j!, starting at j = n
    let mut sum = 0.0;
    for j in (0..=n).rev() {
        sum += factor * cutoff.powi(j as i32) / a.powi((n - j + 1) as i32);
        factor *= j as f64;
    }
    (-a * cutoff).exp() * sum
}

/// Orbit-averaged rotation number with an uncertainty estimate.
#[derive(Debug, Clone, Copy)]
pub struct RotationEstimate {
    pub value: f64,
    pub uncertainty: f64,
}

/// Rotation number of a lifted circle map by phase-averaged half-orbit
/// differencing.
///
/// The estimate is `mean over j < N/2 of (theta_{j+N/2} - theta_j) / (N/2)`;
/// averaging the window over all starting phases cancels the conjugacy
/// wiggle to second order in `1/N`. The uncertainty is the spread of eight
/// half-overlapping single-window estimates, which is deliberately
/// conservative.
pub fn rotation_number(
    mut map: impl FnMut(f64) -> f64,
    theta0: f64,
    iters: usize,
) -> RotationEstimate {
    assert!(iters >= 20, "need a meaningful orbit length");
    let n = iters - (iters % 10);
    let half = n / 2;
    let tenth = n / 10;
    let mut theta = theta0;
    let mut sum_first = 0.0;
    let mut sum_second = 0.0;
    let mut checkpoints = [0.0f64; 11];
    checkpoints[0] = theta;
    for j in 0..n {
        if j < half {
            sum_first += theta;
        } else {
            sum_second += theta;
        }
        theta = map(theta);
        if (j + 1) % tenth == 0 {
            checkpoints[(j + 1) / tenth] = theta;
        }
    }
    let value = (sum_second - sum_first) / (half as f64 * half as f64);
    // Eight half-overlapping windows of length n/5 starting at multiples of n/10.
    let mut window_estimates = [0.0f64; 8];
    for (w, est) in window_estimates.iter_mut().enumerate() {
        *est = (checkpoints[w + 2] - checkpoints[w]) / (2 * tenth) as f64;
    }
    let mean: f64 = window_estimates.iter().sum::<f64>() / 8.0;
    let var: f64 = window_estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / 8.0;
    RotationEstimate { value, uncertainty: var.sqrt() }
}

/// Rotation number of a one-degree-of-freedom twist-map orbit started at
/// `(theta0, r0)`, from the lifted angle sequence.
pub fn twist_orbit_rotation(
    model: &crate::kam_twist::TwistMapModel,
    theta0: f64,
    r0: f64,
    iters: usize,
) -> RotationEstimate {
    assert_eq!(model.dim(), 1);
    let mut r = r0;
    rotation_number(
        move |theta| {
            let (th1, r1) = model.apply(&[theta], &[r]);
            r = r1[0];
            th1[0]
        },
        theta0,
        iters,
    )
}

/// Max-grid residual of `W(theta + rotation) - F(W(theta))` on `T^n`
/// (angle components compared modulo 2 pi).
pub fn param_conjugacy_residual(
    chain: &ConjugacyChain,
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    rotation: &[f64],
    grid: usize,
) -> f64 {
    let dim = rotation.len();
    let shape = GridShape::new(dim, grid);
    let mut worst: f64 = 0.0;
    for p in 0..shape.len() {
        let theta = shape.point(p);
        let shifted: Vec<f64> = theta.iter().zip(rotation).map(|(&t, &q)| t + q).collect();
        let lhs = chain.forward(&shifted);
        let rhs = map(&chain.forward(&theta));
        let err: f64 = lhs.iter().zip(&rhs).map(|(&a, &b)| wrap_centered(a - b).abs()).sum();
        worst = worst.max(err);
    }
    worst
}

/// Max-grid residual of `W(theta + rotation, r - r_tilde) - F(W(theta, r))`
/// along the action slice `r = base`.
pub fn twist_conjugacy_residual(
    chain: &TwistChain,
    map: &dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>),
    rotation: &[f64],
    r_tilde: &[f64],
    base: &[f64],
    grid: usize,
) -> f64 {
    let dim = rotation.len();
    let shape = GridShape::new(dim, grid);
    let translated: Vec<f64> = base.iter().zip(r_tilde).map(|(&b, &rt)| b - rt).collect();
    let mut worst: f64 = 0.0;
    for p in 0..shape.len() {
        let theta = shape.point(p);
        let shifted: Vec<f64> = theta.iter().zip(rotation).map(|(&t, &q)| t + q).collect();
        let (lhs_th, lhs_r) = chain.forward(&shifted, &translated);
        let (wt, wr) = chain.forward(&theta, base);
        let (rhs_th, rhs_r) = map(&wt, &wr);
        let mut err: f64 =
            lhs_th.iter().zip(&rhs_th).map(|(&a, &b)| wrap_centered(a - b).abs()).sum();
        err += lhs_r.iter().zip(&rhs_r).map(|(&a, &b)| (a - b).abs()).sum::<f64>();
        worst = worst.max(err);
    }
    worst
}

/// Noise floor below which norms are not used by the order fit: 100 units of
/// the displacement-measurement noise of the conjugacy pipeline (chained
/// Newton inversions resolve displacements to about 1e-13), the pipeline's
/// effective machine epsilon. Points at the floor are measurement artifacts
/// and would flatten the fitted order.
pub const ORDER_FIT_FLOOR: f64 = 1e-11;

/// Least-squares slope of `log ||f_{v+1}||` against `log ||f_v||` over the
/// recorded norms above the noise floor.
pub fn fit_convergence_order(norms: &[f64]) -> Result<f64> {
    let usable: Vec<f64> = norms.iter().copied().take_while(|&x| x > ORDER_FIT_FLOOR).collect();
    if usable.len() < 3 {
        return Err(KamError::TooFewPoints);
    }
    let xs: Vec<f64> = usable[..usable.len() - 1].iter().map(|&x| x.ln()).collect();
    let ys: Vec<f64> = usable[1..].iter().map(|&x| x.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx < 1e-12 {
        return Err(KamError::TooFewPoints);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Per-step engine record consumed by reports and serialized to CSV.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Step index `v` (0 is the initial state).
    pub index: usize,
    /// Working cutoff used to produce this state.
    pub cutoff: usize,
    /// Grid-sup norm of the angular perturbation at strip 0.
    pub f_grid_norm: f64,
    /// Coefficient-weighted norm at the current strip width.
    pub f_coeff_norm: f64,
    /// Action-perturbation norms (zero for the parameter engine).
    pub g_grid_norm: f64,
    pub g_coeff_norm: f64,
    /// l1 norm of the translation taken at this step.
    pub shift_norm: f64,
    /// Frequency-equation residual after the translation.
    pub freq_residual: f64,
    /// `|sum f_{0,i}|` evaluated at the current base point.
    pub drift_norm: f64,
    /// Bracketing margin of the action displacement (twist only).
    pub intersection_margin: f64,
    /// Coefficient norm of the truncation tail discarded at this step.
    pub remainder_norm: f64,
}

impl StepRecord {
    pub fn initial(index: usize, cutoff: usize) -> Self {
        Self {
            index,
            cutoff,
            f_grid_norm: 0.0,
            f_coeff_norm: 0.0,
            g_grid_norm: 0.0,
            g_coeff_norm: 0.0,
            shift_norm: 0.0,
            freq_residual: 0.0,
            drift_norm: 0.0,
            intersection_margin: 0.0,
            remainder_norm: 0.0,
        }
    }

    pub fn total_norm(&self) -> f64 {
        self.f_grid_norm + self.g_grid_norm
    }
}

/// One row of hypothesis flags; each entry is `(holds, margin)` with
/// `margin = log10(allowed / observed)`.
#[derive(Debug, Clone)]
pub struct HypothesisRow {
    pub step: usize,
    pub h1: (bool, f64),
    pub h2: (bool, f64),
    pub h3: (bool, f64),
    pub h4: (bool, f64),
    pub h5: (bool, f64),
    pub h6: (bool, f64),
}

/// Hypothesis flags plus run-level summaries.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<HypothesisRow>,
    pub fitted_order: Option<f64>,
    pub final_norm: f64,
    pub final_freq_residual: f64,
}

fn margin(observed: f64, allowed: f64) -> (bool, f64) {
    let holds = observed <= allowed;
    let m = if observed <= 0.0 { 99.0 } else { (allowed / observed).log10().clamp(-99.0, 99.0) };
    (holds, m)
}

/// Evaluate the per-step smallness hypotheses for a completed (or aborted)
/// run. Intermediate constants the analysis leaves implicit are taken as one,
/// so the flags are indicative rather than rigorous.
pub fn hypothesis_report(
    schedule: &KamSchedule,
    records: &[StepRecord],
    upper_gauge: Option<&ModulusOfContinuity>,
) -> ConvergenceReport {
    let mut rows = Vec::new();
    let nm1 = (schedule.n + schedule.m + 1) as i32;
    let sqrt_mu0 = schedule.mu0.sqrt();
    for rec in records.iter().skip(1) {
        let v = rec.index - 1; // this step consumed (h_v, s_v, mu_v)
        if v + 2 >= schedule.h.len() {
            break;
        }
        let delta = schedule.h[v] - schedule.h[v + 1];
        let delta_next = schedule.h[v + 1] - schedule.h[v + 2];
        let mu = schedule.mu[v];
        let s = schedule.s[v];
        let gamma = gamma_factor(schedule.k[v + 1].min(1 << 12), delta, schedule.tau, schedule.n);
        let small = schedule.gamma0.powi(nm1) * s.powi(schedule.m as i32) * mu * gamma;

        let h1 = margin(tail_integral(schedule.k[v + 1] as f64, delta, schedule.n), mu);
        let h2 = margin(rec.drift_norm, sqrt_mu0);
        let h3 = margin(small, schedule.s[v + 1].min(delta / 4.0));
        let h4_rhs = {
            let arg = schedule.gamma0.powi(nm1) * s.powi(schedule.m as i32) * mu * mu;
            match upper_gauge {
                Some(g) => g.inverse_eval(arg),
                None => arg, // identity gauge inverts to itself
            }
        };
        let h4 = margin(small, h4_rhs);
        let h5_lhs = 2f64.powi(schedule.m as i32)
            * mu.powf(1.0 - schedule.rho)
            * (schedule.gamma0.powi(nm1) * s.powi(schedule.m as i32) * gamma / delta_next
                + schedule.gamma0.powi(nm1) * s.powi(schedule.m as i32 - 1) * gamma
                + 1.0);
        let h5 = margin(h5_lhs, 1.0);
        let h6 = h2;
        rows.push(HypothesisRow { step: rec.index, h1, h2, h3, h4, h5, h6 });
    }
    let norms: Vec<f64> = records.iter().map(|r| r.total_norm()).collect();
    // Row 0 measures the supplied map, not a scheme iterate; fit the
    // contraction over the scheme's own outputs.
    let fitted_order =
        if norms.len() > 1 { fit_convergence_order(&norms[1..]).ok() } else { None };
    ConvergenceReport {
        rows,
        fitted_order,
        final_norm: norms.last().copied().unwrap_or(0.0),
        final_freq_residual: records.last().map(|r| r.freq_residual).unwrap_or(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TWO_PI;

    #[test]
    fn schedule_zeroth_step_values() {
        let s = schedule_init(1e-8, 1, 1, 0.5, 2.0, 1.0, 0.25, 1.5, 8).unwrap();
        assert!((s.gamma0 - 0.316_227_766_016_837_94).abs() < 1e-15);
        assert!((s.mu0 - 0.562_341_325_190_349_1).abs() < 1e-15);
        assert!((s.mu[1] - 0.421_696_503_428_582_25).abs() < 1e-15);
        // ln(1/mu0) = 0.5756 -> bracket 0 -> K1 = 1
        assert_eq!(s.k[1], 1);
    }

    #[test]
    fn schedule_rejects_weak_exponents() {
        let err = schedule_init(1e-8, 1, 1, 0.5, 1.0, 1.0, 0.25, 1.5, 4).unwrap_err();
        assert!(matches!(err, KamError::BadExponents { growth } if (growth - 1.5).abs() < 1e-12));
    }

    #[test]
    fn schedule_strip_widths_contract_to_half() {
        let s = schedule_init(1e-6, 1, 1, 0.5, 2.0, 0.8, 0.25, 1.5, 20).unwrap();
        let target = s.h0 / 2.0;
        for v in 0..19 {
            let gap = (s.h[v] - target).abs();
            let next = (s.h[v + 1] - target).abs();
            assert!((next - gap / 2.0).abs() < 1e-15);
            assert!((s.s[v + 1] - s.s[v] / 2.0).abs() < 1e-16);
        }
    }

    #[test]
    fn gamma_factor_below_closed_form_bound() {
        for &(k, delta, tau, n) in
            &[(8usize, 0.25f64, 1.5f64, 1usize), (32, 0.1, 2.5, 2), (64, 0.4, 1.2, 1), (4096, 0.05, 1.5, 1)]
        {
            let g = gamma_factor(k, delta, tau, n);
            let bound = gamma_factor_bound(delta, tau, n);
            assert!(g <= bound, "Gamma = {g}, bound = {bound}");
        }
    }

    #[test]
    fn tail_integral_matches_quadrature() {
        // Midpoint-rule oracle on a long finite window.
        for &(k, delta, n) in &[(8.0f64, 0.3f64, 1usize), (20.0, 0.1, 2), (4.0, 0.9, 0)] {
            let a = delta / 4.0;
            let upper = k + 60.0 / a;
            let steps = 400_000usize;
            let dx = (upper - k) / steps as f64;
            let mut quad = 0.0;
            for i in 0..steps {
                let x = k + (i as f64 + 0.5) * dx;
                quad += x.powi(n as i32) * (-a * x).exp();
            }
            quad *= dx;
            let closed = tail_integral(k, delta, n);
            assert!((closed - quad).abs() <= 1e-6 * quad, "closed = {closed}, quad = {quad}");
        }
    }

    #[test]
    fn rotation_number_rigid() {
        let est = rotation_number(|t| t + 0.3, 0.0, 100_000);
        assert!((est.value - 0.3).abs() < 1e-12);
        assert!(est.uncertainty < 1e-12);
    }

    #[test]
    fn rotation_number_golden_rigid() {
        let omega = TWO_PI * 0.618_033_988_749_894_8;
        let est = rotation_number(|t| t + omega, 0.1, 1_000_000);
        assert!((est.value - omega).abs() < 1e-8);
    }

    #[test]
    fn rotation_number_conjugacy_invariant() {
        // Conjugating by a circle diffeomorphism must not move the rotation
        // number beyond twice the reported uncertainty.
        let omega = TWO_PI * 0.618_033_988_749_894_8;
        let eps = 0.05;
        let h = move |t: f64| t + eps * t.sin();
        let h_inv = move |y: f64| {
            let mut x = y;
            for _ in 0..50 {
                x = y - eps * x.sin();
            }
            x
        };
        let plain = rotation_number(|t| t + omega, 0.2, 200_000);
        let conj = rotation_number(move |t| h_inv(h(t) + omega), 0.2, 200_000);
        let tol = 2.0 * (plain.uncertainty + conj.uncertainty) + 1e-12;
        assert!(
            (plain.value - conj.value).abs() <= tol,
            "plain = {}, conj = {}, tol = {tol}",
            plain.value,
            conj.value
        );
    }

    #[test]
    fn fit_order_examples() {
        let quad = fit_convergence_order(&[1e-2, 1e-4, 1e-8, 1e-16]).unwrap();
        assert!((quad - 2.0).abs() < 1e-9);
        let mid = fit_convergence_order(&[1e-2, 1e-3, 10f64.powf(-4.5)]).unwrap();
        assert!((mid - 1.5).abs() < 1e-9);
        assert_eq!(fit_convergence_order(&[1e-2, 1e-4]), Err(KamError::TooFewPoints));
    }

    #[test]
    fn identity_chain_residual_is_zero() {
        let chain = ConjugacyChain::identity(1);
        let omega = 1.234;
        let map = move |theta: &[f64]| vec![theta[0] + omega];
        let r = param_conjugacy_residual(&chain, &map, &[omega], 128);
        assert!(r < 1e-15);
    }
}
