//! Diophantine verification and the spectral difference-equation solver.
//!
//! The difference (homological) equation
//! `U(theta + omega) - U(theta) = rhs(theta)` decouples mode by mode into
//! `U_k (e^{i<k,omega>} - 1) = rhs_k`; its divisors vanish exactly when
//! `<k, omega>` hits `2·pi·Z`, so solvability rests on a quantitative
//! non-resonance bound. [`check_diophantine`] verifies that bound by
//! exhaustive enumeration, [`golden_like_frequency`] produces badly
//! approximable test frequencies from continued fractions, and
//! [`solve_homological`] performs the mode-wise division.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

use crate::error::{KamError, Result};
use crate::fourier::FourierSeries;
use crate::TWO_PI;

/// Whether angles live on the `2·pi` torus (this crate's convention) or the
/// unit torus. Controls which lattice `<k, omega>` is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodConvention {
    TwoPi,
    One,
}

impl PeriodConvention {
    fn period(self) -> f64 {
        match self {
            PeriodConvention::TwoPi => TWO_PI,
            PeriodConvention::One => 1.0,
        }
    }
}

/// Parameters of the non-resonance bound `dist(<k,omega>, period·Z) >= gamma / |k|^tau`.
#[derive(Debug, Clone)]
pub struct DiophantineParams {
    pub gamma: f64,
    pub tau: f64,
    /// Upper bound for `|omega|` on the region; documents the implicit range
    /// of nearest lattice points (`|k0| <= m_bound·|k|`).
    pub m_bound: f64,
    /// Largest `|k|_1` enumerated.
    pub kmax: usize,
    pub convention: PeriodConvention,
}

impl DiophantineParams {
    pub fn new(gamma: f64, tau: f64, m_bound: f64, kmax: usize) -> Self {
        assert!(gamma > 0.0 && kmax >= 1);
        Self { gamma, tau, m_bound, kmax, convention: PeriodConvention::TwoPi }
    }

    pub fn with_convention(mut self, convention: PeriodConvention) -> Self {
        self.convention = convention;
        self
    }
}

/// Outcome of a Diophantine scan.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisorReport {
    /// Multi-index attaining the minimum of `|k|^tau · dist(<k,omega>, period·Z)`.
    pub worst_k: Vec<i64>,
    pub worst_value: f64,
    /// Distance to the lattice at the worst mode (before the `|k|^tau` weight).
    pub worst_distance: f64,
    pub gamma: f64,
    pub satisfied: bool,
}

fn dist_to_lattice(x: f64, period: f64) -> f64 {
    let y = x / period;
    period * (y - y.round()).abs()
}

/// Exhaustively scan `0 < |k|_1 <= kmax` and report the worst weighted divisor.
///
/// `tau` must exceed `n - 1`; `satisfied` holds iff the worst value stays at
/// or above `gamma`.
pub fn check_diophantine(omega: &[f64], params: &DiophantineParams) -> DivisorReport {
    let n = omega.len();
    assert!(n >= 1);
    assert!(params.tau > n as f64 - 1.0, "tau must exceed n - 1");
    let period = params.convention.period();
    let mut worst_value = f64::INFINITY;
    let mut worst_k = vec![0i64; n];
    let mut worst_distance = 0.0;
    let mut k = vec![0i64; n];
    scan_modes(&mut k, 0, params.kmax, &mut |k: &[i64]| {
        let l1: usize = k.iter().map(|x| x.unsigned_abs() as usize).sum();
        if l1 == 0 {
            return;
        }
        let dot: f64 = k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum();
        let dist = dist_to_lattice(dot, period);
        let value = (l1 as f64).powf(params.tau) * dist;
        if value < worst_value {
            worst_value = value;
            worst_k.copy_from_slice(k);
            worst_distance = dist;
        }
    });
    // The scan visits k and -k with equal values; report the representative
    // whose first nonzero component is positive.
    if worst_k.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        for x in &mut worst_k {
            *x = -*x;
        }
    }
    DivisorReport {
        worst_k,
        worst_value,
        worst_distance,
        gamma: params.gamma,
        satisfied: worst_value >= params.gamma,
    }
}

fn scan_modes(k: &mut Vec<i64>, axis: usize, budget: usize, visit: &mut impl FnMut(&[i64])) {
    if axis == k.len() {
        visit(k);
        return;
    }
    let b = budget as i64;
    for t in -b..=b {
        k[axis] = t;
        scan_modes(k, axis + 1, budget - t.unsigned_abs() as usize, visit);
    }
    k[axis] = 0;
}

/// Frequency `2·pi·alpha` where `alpha` has the purely periodic continued
/// fraction `[0; a_1, a_2, ...]` given by cycling `tail`.
///
/// Entries are restricted to `{1, 2}`, which keeps the partial quotients
/// bounded and hence `alpha` badly approximable: `[1]` is the golden mean
/// `(sqrt(5) - 1)/2`, `[2]` the silver mean `sqrt(2) - 1`.
pub fn golden_like_frequency(tail: &[u32]) -> Result<f64> {
    if tail.is_empty() || tail.iter().any(|&a| a == 0 || a > 2) {
        return Err(KamError::BadSeed);
    }
    // Backward evaluation with enough cycled terms to exhaust f64 precision:
    // convergents with bounded quotients gain at least the golden ratio per
    // term, so 200 terms are far beyond 1e-17.
    let terms = 200usize;
    let mut x = 0.0f64;
    for i in (0..terms).rev() {
        let a = tail[i % tail.len()] as f64;
        x = 1.0 / (a + x);
    }
    Ok(TWO_PI * x)
}

/// Solve `U(theta + omega) - U(theta) = rhs(theta)` for a zero-mean,
/// band-limited right-hand side, mode by mode.
///
/// Fails with [`KamError::NonzeroMean`] if the mean coefficient exceeds
/// `1e-14`, and with [`KamError::SmallDivisorBreach`] if any stored mode sees
/// `|e^{i<k,omega>} - 1| < guard`.
pub fn solve_homological(rhs: &FourierSeries, omega: &[f64], guard: f64) -> Result<FourierSeries> {
    if omega.len() != rhs.dim() {
        return Err(KamError::DimensionMismatch { expected: rhs.dim(), got: omega.len() });
    }
    assert!(guard > 0.0);
    let mean_mag: f64 = rhs.mean().iter().map(|c| c.norm()).sum();
    if mean_mag > 1e-14 {
        return Err(KamError::NonzeroMean { magnitude: mean_mag });
    }
    let mut out = rhs.clone();
    // Coefficients at rounding-noise level are treated as exact zeros: they
    // carry no signal, and dividing them by a near-resonant divisor would
    // inject garbage of order noise/guard.
    let scale: f64 =
        (0..rhs.mode_count()).map(|i| rhs.coeff_at(i).iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max);
    let noise_floor = 64.0 * f64::EPSILON * scale;
    for i in 0..rhs.mode_count() {
        let k = rhs.mode_at(i);
        let l1: usize = k.iter().map(|x| x.unsigned_abs() as usize).sum();
        let coeff_mag: f64 = rhs.coeff_at(i).iter().map(|c| c.norm()).sum();
        if l1 == 0 || coeff_mag <= noise_floor {
            for c in out.coeff_at_mut(i) {
                *c = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let dot: f64 = k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum();
        let divisor = Complex64::from_polar(1.0, dot) - 1.0;
        let mag = divisor.norm();
        if mag < guard {
            return Err(KamError::SmallDivisorBreach { mode: k.to_vec(), divisor: mag });
        }
        for c in out.coeff_at_mut(i) {
            *c /= divisor;
        }
    }
    Ok(out)
}

/// Default divisor guard: double precision keeps at least six significant
/// digits through the coefficient division at this floor.
pub const DEFAULT_GUARD: f64 = 1e-8;
