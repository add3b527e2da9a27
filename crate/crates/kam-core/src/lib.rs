//! Invariant tori with a prescribed, preserved frequency.
//!
//! This crate computes invariant tori for two kinds of discrete systems on the
//! torus `T^n = R^n / 2·pi·Z^n`:
//!
//! * analytic twist maps `(theta, r) -> (theta + omega(r) + eps·f, r + eps·g)`
//!   with the intersection property ([`kam_twist`]), and
//! * parameterized rigid-rotation perturbations
//!   `theta -> theta + omega(xi) + eps·f(theta, xi)` ([`kam_param`]).
//!
//! Both engines run a quadratically convergent conjugacy iteration built from
//! spectral solves of the difference equation `U(theta + omega) - U(theta) = rhs`
//! ([`small_divisors`]), numerical composition/inversion of the accumulated
//! transformation ([`conjugacy`]), and a translation of the action or parameter
//! that solves the frequency equation exactly at every step
//! ([`frequency_solver`]) so the rotation vector of the final torus is the one
//! asked for, not a nearby one.
//!
//! Independent orbit-based oracles (rotation numbers by averaged lifts,
//! conjugacy residuals, convergence-order fits) live in [`diagnostics`];
//! ready-made test systems in [`testbed_maps`].
//!
//! The crate is `no_std` (with `alloc`); all floating-point kernels route
//! through `libm`, so results are bit-reproducible across hosts.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conjugacy;
pub mod diagnostics;
pub mod error;
pub mod fourier;
pub mod frequency_solver;
pub mod kam_param;
pub mod kam_twist;
pub mod modulus;
pub mod small_divisors;
pub mod testbed_maps;

pub use error::{KamError, Result};
pub use fourier::{FourierSeries, GridShape, NormFlavor, StripNorm};
pub use modulus::ModulusOfContinuity;
pub use num_complex::Complex64;

/// One full turn; the torus has period `TWO_PI` on every axis.
pub const TWO_PI: f64 = core::f64::consts::TAU;

/// Reduce `x` to the representative of `x + TWO_PI·Z` inside `(-pi, pi]`.
pub fn wrap_centered(x: f64) -> f64 {
    let y = x - TWO_PI * Float::round(x / TWO_PI);
    // `round` can leave y == -pi for inputs on the branch cut.
    if y <= -core::f64::consts::PI {
        y + TWO_PI
    } else {
        y
    }
}

/// l1 norm of a real vector; the multi-index and vector norm used throughout.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| Float::abs(*x)).sum()
}

#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

#[cfg(test)]
mod tests {
    use super::{wrap_centered, TWO_PI};

    #[test]
    fn wrap_is_centered() {
        assert!((wrap_centered(TWO_PI + 0.25) - 0.25).abs() < 1e-15);
        assert!((wrap_centered(-TWO_PI - 0.25) + 0.25).abs() < 1e-15);
        assert!((wrap_centered(3.0 * TWO_PI) - 0.0).abs() < 1e-12);
        let y = wrap_centered(-core::f64::consts::PI);
        assert!(y > -core::f64::consts::PI && y <= core::f64::consts::PI);
    }
}
