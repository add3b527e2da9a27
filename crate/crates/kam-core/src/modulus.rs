//! Continuity gauges.
//!
//! A [`ModulusOfContinuity`] is a named strictly increasing function
//! `(0, 1] -> (0, inf)` with `eval(x) -> 0` as `x -> 0+`, used two ways:
//!
//! * as an upper gauge bounding increments, `|f(x) - f(y)| <= C·eval(|x - y|)`
//!   (Lipschitz `x`, Hoelder `x^alpha`, logarithmic-Lipschitz `1/(1 - ln x)`,
//!   empirically tabulated gauges);
//! * as a lower gauge expressing weak convexity of a frequency map,
//!   `|omega(x) - omega(y)| >= eval(|x - y|)` near the base point.
//!
//! Upper gauges additionally satisfy the ratio condition
//! `limsup x/eval(x) < inf`; lower gauges such as `x^3/4` deliberately do not,
//! so the check is keyed off the constructor.
//!
//! A numeric inverse is tabulated on `[1e-12, 1]` and refined by bisection;
//! the translation-step analysis needs it.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

/// Smallest argument covered by the sample table and the inverse.
pub const GAUGE_DOMAIN_MIN: f64 = 1e-12;
/// Number of log-spaced table samples.
const TABLE_SIZE: usize = 49;
/// Generous cap for the sampled ratio `x / eval(x)` on upper gauges.
const RATIO_BOUND: f64 = 16.0;

type GaugeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A named monotone gauge with a tabulated numeric inverse on `[1e-12, 1]`.
#[derive(Clone)]
pub struct ModulusOfContinuity {
    name: String,
    eval_fn: GaugeFn,
    /// Ascending `(x, eval(x))` samples, log-spaced on the domain.
    table: Vec<(f64, f64)>,
}

impl core::fmt::Debug for ModulusOfContinuity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ModulusOfContinuity").field("name", &self.name).finish()
    }
}

impl ModulusOfContinuity {
    /// Build an upper gauge; checks monotonicity, decay at zero, and the
    /// sampled ratio bound `x/eval(x) <= 16` on the ten smallest samples.
    pub fn new(name: &str, eval_fn: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::build(name, Arc::new(eval_fn), true)
    }

    /// Build a lower (weak-convexity) gauge; the ratio condition is waived.
    pub fn lower_gauge(name: &str, eval_fn: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::build(name, Arc::new(eval_fn), false)
    }

    fn build(name: &str, eval_fn: GaugeFn, ratio_checked: bool) -> Self {
        let mut table = Vec::with_capacity(TABLE_SIZE);
        let log_min = GAUGE_DOMAIN_MIN.ln();
        for i in 0..TABLE_SIZE {
            let t = i as f64 / (TABLE_SIZE - 1) as f64;
            let x = (log_min * (1.0 - t)).exp();
            table.push((x, eval_fn(x)));
        }
        for w in table.windows(2) {
            assert!(
                w[1].1 > w[0].1,
                "gauge '{name}' is not strictly increasing between {} and {}",
                w[0].0,
                w[1].0
            );
            assert!(w[0].1 > 0.0, "gauge '{name}' must be positive");
        }
        // Decay at zero, sampled: the smallest sample must sit well below the
        // value at 1. Logarithmic gauges decay slowly, so the factor is loose.
        assert!(
            table[0].1 <= 0.5 * table[TABLE_SIZE - 1].1,
            "gauge '{name}' does not decay towards zero"
        );
        if ratio_checked {
            for &(x, y) in table.iter().take(10) {
                assert!(
                    x / y <= RATIO_BOUND,
                    "gauge '{name}' violates the ratio bound: x/eval(x) = {} at x = {x}",
                    x / y
                );
            }
        }
        Self { name: String::from(name), eval_fn, table }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval_fn)(x)
    }

    /// Range on which the inverse is defined: `[eval(1e-12), eval(1)]`.
    pub fn inverse_range(&self) -> (f64, f64) {
        (self.table[0].1, self.table[TABLE_SIZE - 1].1)
    }

    /// Numeric inverse by table bracket plus bisection; arguments outside the
    /// stated range clamp to the nearest endpoint.
    pub fn inverse_eval(&self, y: f64) -> f64 {
        let (lo_y, hi_y) = self.inverse_range();
        if y <= lo_y {
            return self.table[0].0;
        }
        if y >= hi_y {
            return self.table[TABLE_SIZE - 1].0;
        }
        let pos = self.table.partition_point(|&(_, ty)| ty < y);
        let (mut a, mut b) = (self.table[pos - 1].0, self.table[pos].0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.eval(mid) < y {
                a = mid;
            } else {
                b = mid;
            }
            if (b - a) <= 1e-14 * b {
                break;
            }
        }
        0.5 * (a + b)
    }

    /// Lipschitz-type gauge `x`.
    pub fn identity() -> Self {
        Self::new("identity", |x| x)
    }

    /// Hoelder gauge `x^alpha`, `0 < alpha < 1`.
    pub fn hoelder(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0);
        Self::new("hoelder", move |x| x.powf(alpha))
    }

    /// Logarithmic-Lipschitz gauge `1 / (1 - ln x)`, weaker than every Hoelder gauge.
    pub fn log_lipschitz() -> Self {
        Self::new("log-lipschitz", |x| 1.0 / (1.0 - x.ln()))
    }

    /// Weak-convexity gauge `x^beta / 4` for an odd power `beta >= 3`.
    pub fn power_lower(beta: u32) -> Self {
        assert!(beta >= 3 && beta % 2 == 1, "lower power gauge wants an odd beta >= 3");
        Self::lower_gauge("power-lower", move |x| x.powi(beta as i32) / 4.0)
    }

    /// Gauge interpolated from ascending `(x, value)` samples (log-log linear
    /// between samples, clamped outside). Used for empirically tabulated
    /// moduli.
    pub fn from_table(name: &str, samples: Vec<(f64, f64)>) -> Self {
        assert!(samples.len() >= 2);
        for w in samples.windows(2) {
            assert!(w[1].0 > w[0].0 && w[1].1 > w[0].1, "table must be strictly increasing");
        }
        let eval = move |x: f64| -> f64 {
            let first = samples[0];
            let last = samples[samples.len() - 1];
            if x <= first.0 {
                // continue the first segment's log-log slope towards zero
                let second = samples[1];
                let slope = (second.1.ln() - first.1.ln()) / (second.0.ln() - first.0.ln());
                return (first.1.ln() + slope * (x.ln() - first.0.ln())).exp();
            }
            if x >= last.0 {
                let prev = samples[samples.len() - 2];
                let slope = (last.1.ln() - prev.1.ln()) / (last.0.ln() - prev.0.ln());
                return (last.1.ln() + slope * (x.ln() - last.0.ln())).exp();
            }
            let pos = samples.partition_point(|&(sx, _)| sx < x);
            let (x0, y0) = samples[pos - 1];
            let (x1, y1) = samples[pos];
            let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
            (y0.ln() * (1.0 - t) + y1.ln() * t).exp()
        };
        Self::build(name, Arc::new(eval), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_roundtrip() {
        let g = ModulusOfContinuity::identity();
        for i in 0..40 {
            let x = (GAUGE_DOMAIN_MIN.ln() * (1.0 - i as f64 / 39.0)).exp();
            let back = g.inverse_eval(g.eval(x));
            assert!((back - x).abs() <= 1e-10 * x, "x = {x}, back = {back}");
        }
    }

    #[test]
    fn hoelder_and_log_lipschitz_roundtrip() {
        for g in [ModulusOfContinuity::hoelder(0.5), ModulusOfContinuity::log_lipschitz()] {
            for i in 1..30 {
                let x = (GAUGE_DOMAIN_MIN.ln() * (1.0 - i as f64 / 29.0)).exp();
                let back = g.inverse_eval(g.eval(x));
                assert!((back - x).abs() <= 1e-10 * x, "{}: x = {x}, back = {back}", g.name());
            }
        }
    }

    #[test]
    fn log_lipschitz_weaker_than_hoelder() {
        // x^alpha / (1/(1 - ln x)) -> 0, so the Hoelder gauge is the stronger one.
        let h = ModulusOfContinuity::hoelder(0.3);
        let ll = ModulusOfContinuity::log_lipschitz();
        let mut prev_ratio = f64::INFINITY;
        for i in 0..12 {
            let x = 10f64.powi(-(i as i32) - 1);
            let ratio = h.eval(x) / ll.eval(x);
            assert!(ratio < prev_ratio);
            prev_ratio = ratio;
        }
        assert!(prev_ratio < 1e-2);
    }

    #[test]
    fn cubic_lower_gauge_constructs() {
        let g = ModulusOfContinuity::power_lower(3);
        assert!((g.eval(0.1) - 2.5e-4).abs() < 1e-18);
        let back = g.inverse_eval(g.eval(0.2));
        assert!((back - 0.2).abs() < 1e-10);
    }

    #[test]
    #[should_panic(expected = "ratio bound")]
    fn cubic_as_upper_gauge_fails_ratio_check() {
        let _ = ModulusOfContinuity::new("cubic-upper", |x| x.powi(3) / 4.0);
    }

    #[test]
    fn tabulated_gauge_interpolates() {
        let samples: Vec<(f64, f64)> =
            (0..12).map(|i| {
                let x = 2f64.powi(i - 12);
                (x, x.sqrt())
            }).collect();
        let g = ModulusOfContinuity::from_table("empirical", samples);
        let x = 3.1e-3;
        assert!((g.eval(x) - x.sqrt()).abs() < 1e-3 * x.sqrt());
    }
}
