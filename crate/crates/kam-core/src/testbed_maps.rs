//! Concrete model families for exercising the engines.
//!
//! The area-preserving twist members all share one construction:
//! `r^1 = r + eps·kick(theta)`, `theta^1 = theta + omega(r^1) + eps·b` with a
//! zero-mean kick and a constant angular drift `b`. The Jacobian determinant
//! of that family is exactly one for *any* frequency map, so the intersection
//! property holds by area preservation, and a nonzero `b` gives the
//! translation step real work to do.
//!
//! On the parameter side, the catalog carries analytic members and a
//! deliberately rough one whose parameter dependence defeats every Hoelder
//! exponent on the tested scale range (a lacunary cosine sum in the spirit of
//! Weierstrass-type constructions).

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // resolves float math when built without std
use num_traits::Float;

use crate::error::{KamError, Result};
use crate::frequency_solver::{degree_1d, FrequencyMap};
use crate::kam_param::ParamMapModel;
use crate::kam_twist::TwistMapModel;
use crate::modulus::ModulusOfContinuity;
use crate::TWO_PI;

/// Which engine a catalog member drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Twist,
    Param,
}

/// A named, buildable model with a summary for listings.
#[derive(Debug, Clone)]
pub struct MapCatalogEntry {
    pub name: &'static str,
    pub kind: ModelKind,
    pub summary: &'static str,
}

/// A built model, ready to hand to its engine.
#[derive(Debug, Clone)]
pub enum CatalogModel {
    Twist(TwistMapModel),
    Param(ParamMapModel),
}

pub fn catalog() -> Vec<MapCatalogEntry> {
    alloc::vec![
        MapCatalogEntry {
            name: "standard",
            kind: ModelKind::Twist,
            summary: "area-preserving kicked twist, omega(r) = r, zero-mean kick",
        },
        MapCatalogEntry {
            name: "standard-drift",
            kind: ModelKind::Twist,
            summary: "area-preserving kicked twist with constant angular drift b = 1",
        },
        MapCatalogEntry {
            name: "cubic",
            kind: ModelKind::Twist,
            summary: "weakly convex frequency omega(r) = p + (r - r*)^3, drift b = 1",
        },
        MapCatalogEntry {
            name: "monotone-cubic",
            kind: ModelKind::Twist,
            summary: "strictly monotone omega(r) = r + 0.1 r^3, drift b = 1",
        },
        MapCatalogEntry {
            name: "param-analytic",
            kind: ModelKind::Param,
            summary: "f = (1 + cos theta)(1 + 0.3 sin xi), omega = identity",
        },
        MapCatalogEntry {
            name: "param-cos",
            kind: ModelKind::Param,
            summary: "f = cos theta (zero mean, parameter independent)",
        },
        MapCatalogEntry {
            name: "param-rough",
            kind: ModelKind::Param,
            summary: "f = (1 + cos theta)(1 + rough(xi)), nowhere-Hoelder parameter field",
        },
        MapCatalogEntry {
            name: "param-2d",
            kind: ModelKind::Param,
            summary: "two-dimensional torus, f = (1 + cos t1, 1 + cos(t1 + t2))",
        },
    ]
}

/// Area-preserving kicked twist member (see the module docs).
fn kicked_twist(
    omega: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    region: (f64, f64),
    kick: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    drift_b: f64,
    epsilon: f64,
    r_star: f64,
) -> TwistMapModel {
    let freq = {
        let omega = omega.clone();
        FrequencyMap::new(1, 1, alloc::vec![region], move |r| alloc::vec![omega(r[0])])
    };
    let f = {
        let omega = omega.clone();
        let kick = kick.clone();
        move |t: &[f64], r: &[f64]| -> Vec<f64> {
            if epsilon == 0.0 {
                alloc::vec![drift_b]
            } else {
                alloc::vec![(omega(r[0] + epsilon * kick(t[0])) - omega(r[0])) / epsilon + drift_b]
            }
        }
    };
    let g = move |t: &[f64], _r: &[f64]| -> Vec<f64> { alloc::vec![kick(t[0])] };
    TwistMapModel {
        freq,
        f_pert: Arc::new(f),
        g_pert: Arc::new(g),
        epsilon,
        h0: 1.0,
        r_star: alloc::vec![r_star],
        intersection: true,
    }
}

/// The kicked twist with `omega(r) = r` and kick `sin theta`.
pub fn standard_family(epsilon: f64, p: f64) -> TwistMapModel {
    kicked_twist(
        Arc::new(|r| r),
        (p - 1.0, p + 1.0),
        Arc::new(|t: f64| t.sin()),
        0.0,
        epsilon,
        p,
    )
}

/// Standard family plus a constant angular drift, so the mean perturbation is
/// nonzero and the action translation carries an O(eps) total.
pub fn standard_drift_family(epsilon: f64, p: f64) -> TwistMapModel {
    kicked_twist(
        Arc::new(|r| r),
        (p - 1.0, p + 1.0),
        Arc::new(|t: f64| -t.sin()),
        1.0,
        epsilon,
        p,
    )
}

/// Frequency map `omega(r) = p + (r - r_star)^beta` for odd `beta >= 3`:
/// degenerate derivative at the base yet invertible, with the lower gauge
/// `x^beta / 4` on the ball `|r - r_star| <= delta`.
pub fn weakly_convex_frequency(beta: u32, p: f64, r_star: f64, delta: f64) -> FrequencyMap {
    assert!(beta >= 3 && beta % 2 == 1, "odd beta keeps the map monotone");
    FrequencyMap::new(1, 1, alloc::vec![(r_star - 1.0, r_star + 1.0)], move |r| {
        alloc::vec![p + (r[0] - r_star).powi(beta as i32)]
    })
    .with_lower_gauge(ModulusOfContinuity::power_lower(beta), delta)
    .with_upper_gauge(ModulusOfContinuity::identity())
}

/// Kicked twist on the weakly convex frequency map.
pub fn cubic_twist_family(epsilon: f64, p: f64) -> TwistMapModel {
    let r_star = 3.0;
    let freq = weakly_convex_frequency(3, p, r_star, 0.5);
    let omega = Arc::new(move |r: f64| p + (r - r_star).powi(3));
    let mut model = kicked_twist(
        omega,
        (r_star - 1.0, r_star + 1.0),
        Arc::new(|t: f64| t.sin()),
        1.0,
        epsilon,
        r_star,
    );
    model.freq = freq;
    model
}

/// Strictly monotone frequency `omega(r) = r + 0.1 r^3` (degree +-1 on any
/// interval around the preimage of `p`).
pub fn monotone_cubic_family(epsilon: f64, p: f64) -> TwistMapModel {
    // Base action from a few Newton steps on r + 0.1 r^3 = p.
    let mut r_star = p;
    for _ in 0..60 {
        let fval = r_star + 0.1 * r_star.powi(3) - p;
        let dval = 1.0 + 0.3 * r_star * r_star;
        r_star -= fval / dval;
    }
    kicked_twist(
        Arc::new(|r| r + 0.1 * r * r * r),
        (r_star - 1.0, r_star + 1.0),
        Arc::new(|t: f64| t.sin()),
        1.0,
        epsilon,
        r_star,
    )
}

fn identity_param_freq(q: f64) -> FrequencyMap {
    FrequencyMap::new(1, 1, alloc::vec![(q - 0.75, q + 0.75)], |x| alloc::vec![x[0]])
        .with_lower_gauge(ModulusOfContinuity::identity(), 0.5)
        .with_upper_gauge(ModulusOfContinuity::identity())
}

pub fn param_analytic_family(epsilon: f64, q: f64) -> ParamMapModel {
    ParamMapModel {
        freq: identity_param_freq(q),
        perturbation: Arc::new(|t: &[f64], x: &[f64]| {
            alloc::vec![(1.0 + t[0].cos()) * (1.0 + 0.3 * x[0].sin())]
        }),
        epsilon,
        h0: 1.0,
        xi_star: alloc::vec![q],
    }
}

pub fn param_cos_family(epsilon: f64, q: f64) -> ParamMapModel {
    ParamMapModel {
        freq: identity_param_freq(q),
        perturbation: Arc::new(|t: &[f64], _x: &[f64]| alloc::vec![t[0].cos()]),
        epsilon,
        h0: 1.0,
        xi_star: alloc::vec![q],
    }
}

/// Default seed of the rough parameter field.
pub const ROUGH_FIELD_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn param_rough_family(epsilon: f64, q: f64) -> ParamMapModel {
    let (field, _gauge) = nowhere_hoelder_parameter_field(ROUGH_FIELD_SEED, 0.5);
    ParamMapModel {
        freq: identity_param_freq(q),
        perturbation: Arc::new(move |t: &[f64], x: &[f64]| {
            alloc::vec![(1.0 + t[0].cos()) * (1.0 + field(x[0]))]
        }),
        epsilon,
        h0: 1.0,
        xi_star: alloc::vec![q],
    }
}

pub fn param_2d_family(epsilon: f64, q: &[f64]) -> ParamMapModel {
    assert_eq!(q.len(), 2);
    let region = alloc::vec![(q[0] - 0.75, q[0] + 0.75), (q[1] - 0.75, q[1] + 0.75)];
    ParamMapModel {
        freq: FrequencyMap::new(2, 2, region, |x| alloc::vec![x[0], x[1]]),
        perturbation: Arc::new(|t: &[f64], _x: &[f64]| {
            alloc::vec![1.0 + t[0].cos(), 1.0 + (t[0] + t[1]).cos()]
        }),
        epsilon,
        h0: 0.8,
        xi_star: q.to_vec(),
    }
}

/// Build a catalog member by name.
pub fn build(name: &str, epsilon: f64, target: &[f64]) -> Result<CatalogModel> {
    let scalar = target.first().copied().unwrap_or(0.0);
    match name {
        "standard" => Ok(CatalogModel::Twist(standard_family(epsilon, scalar))),
        "standard-drift" => Ok(CatalogModel::Twist(standard_drift_family(epsilon, scalar))),
        "cubic" => Ok(CatalogModel::Twist(cubic_twist_family(epsilon, scalar))),
        "monotone-cubic" => Ok(CatalogModel::Twist(monotone_cubic_family(epsilon, scalar))),
        "param-analytic" => Ok(CatalogModel::Param(param_analytic_family(epsilon, scalar))),
        "param-cos" => Ok(CatalogModel::Param(param_cos_family(epsilon, scalar))),
        "param-rough" => Ok(CatalogModel::Param(param_rough_family(epsilon, scalar))),
        "param-2d" => {
            if target.len() != 2 {
                return Err(KamError::DimensionMismatch { expected: 2, got: target.len() });
            }
            Ok(CatalogModel::Param(param_2d_family(epsilon, target)))
        }
        _ => Err(KamError::DimensionMismatch { expected: catalog().len(), got: 0 }),
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Frequencies beyond this stop being faithfully evaluable in f64 over the
/// parameter regions we use; the series is capped there so the field stays a
/// genuine (if violently oscillating) continuous function.
const ROUGH_FREQ_CAP: f64 = 1e8;

/// Frequencies below this leave the leading terms sub-oscillatory somewhere
/// inside the tested dyadic window `2^-4 .. 2^-20`, which would tilt the
/// increment fit away from the intended exponent collapse; every term must
/// wind at least a full turn at the finest tested scale.
const ROUGH_FREQ_FLOOR: f64 = 1e7;

/// A lacunary cosine field `amplitude · sum_j cos(b_j x + phase_j) / j!` with
/// `b_j = exp(j·j!)` (capped): continuous, but its increments stay O(1) down
/// to scale `1/max b_j`, defeating every fixed Hoelder exponent on the tested
/// dyadic range. Returns the field and an empirically tabulated upper gauge.
pub fn nowhere_hoelder_parameter_field(
    seed: u64,
    amplitude: f64,
) -> (Arc<dyn Fn(f64) -> f64 + Send + Sync>, ModulusOfContinuity) {
    assert!(amplitude >= 0.0);
    if amplitude == 0.0 {
        let zero: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|_x| 0.0);
        return (zero, ModulusOfContinuity::identity());
    }
    let mut state = seed;
    let mut terms: Vec<(f64, f64, f64)> = Vec::new(); // (a_j, b_j, phase_j)
    let mut factorial = 1.0f64;
    for j in 1..=8u32 {
        factorial *= j as f64;
        let b = (j as f64 * factorial).exp().clamp(ROUGH_FREQ_FLOOR, ROUGH_FREQ_CAP);
        let phase = (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64 * TWO_PI;
        terms.push((1.0 / factorial, b, phase));
    }
    let terms_for_field = terms.clone();
    let field = move |x: f64| -> f64 {
        let mut acc = 0.0;
        for &(a, b, phase) in &terms_for_field {
            acc += a * (b * x + phase).cos();
        }
        amplitude * acc
    };

    // Empirical upper gauge: max increment per dyadic scale, monotonized,
    // continued linearly (in log-log) below the finest measured scale where
    // the finite sum is plainly Lipschitz.
    let mut table: Vec<(f64, f64)> = Vec::new();
    let mut prev = 0.0f64;
    for k in (0..=40).rev() {
        let delta = 2f64.powi(-k);
        let mut worst = 0.0f64;
        for s in 0..256 {
            let x = s as f64 / 256.0;
            worst = worst.max((field(x + delta) - field(x)).abs());
        }
        let value = worst.max(prev * 1.000_001).max(1e-300);
        table.push((delta, value));
        prev = value;
    }
    let gauge = ModulusOfContinuity::from_table("rough-empirical", table);
    (Arc::new(field), gauge)
}

/// Fitted log-log slope of max increments over dyadic scales
/// `2^-coarse .. 2^-fine`; an empirical Hoelder exponent.
pub fn empirical_hoelder_exponent(
    field: &dyn Fn(f64) -> f64,
    coarse: i32,
    fine: i32,
) -> f64 {
    assert!(fine > coarse);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in coarse..=fine {
        let delta = 2f64.powi(-k);
        let mut worst = 0.0f64;
        for s in 0..512 {
            let x = s as f64 / 512.0;
            worst = worst.max((field(x + delta) - field(x)).abs());
        }
        if worst > 0.0 {
            xs.push(delta.ln());
            ys.push(worst.ln());
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

/// One checkable fact about a catalog member.
#[derive(Debug, Clone)]
pub struct FactReport {
    pub description: String,
    pub pass: bool,
}

/// Grid-estimated Jacobian determinant of a twist member at one point.
pub fn jacobian_determinant(model: &TwistMapModel, theta: f64, r: f64) -> f64 {
    let h = 1e-6;
    let fval = |t: f64, rr: f64| model.apply(&[t], &[rr]);
    let (tp, rp) = fval(theta + h, r);
    let (tm, rm) = fval(theta - h, r);
    let dth_dt = (tp[0] - tm[0]) / (2.0 * h);
    let dr_dt = (rp[0] - rm[0]) / (2.0 * h);
    let (tp, rp) = fval(theta, r + h);
    let (tm, rm) = fval(theta, r - h);
    let dth_dr = (tp[0] - tm[0]) / (2.0 * h);
    let dr_dr = (rp[0] - rm[0]) / (2.0 * h);
    dth_dt * dr_dr - dth_dr * dr_dt
}

/// Assert the machine-checkable facts of a member; the test suite runs this
/// for every entry, the CLI exposes it for inspection.
pub fn verify_known_facts(name: &str, epsilon: f64, target: &[f64]) -> Result<Vec<FactReport>> {
    use alloc::format;
    let model = build(name, epsilon, target)?;
    let mut out = Vec::new();
    match model {
        CatalogModel::Twist(m) => {
            // Sampled area preservation.
            let mut worst = 0.0f64;
            for i in 0..7 {
                for j in 0..5 {
                    let theta = TWO_PI * i as f64 / 7.0;
                    let r = m.r_star[0] - 0.4 + 0.2 * j as f64;
                    worst = worst.max((jacobian_determinant(&m, theta, r) - 1.0).abs());
                }
            }
            out.push(FactReport {
                description: format!("jacobian determinant = 1 (worst deviation {worst:.2e})"),
                pass: worst < 1e-8,
            });
            let deg = degree_1d(&m.freq, m.freq.region[0], target[0])?;
            out.push(FactReport {
                description: format!("degree of omega at target = {deg}"),
                pass: deg != 0,
            });
            let base_freq = m.freq.eval(&m.r_star)[0];
            out.push(FactReport {
                description: format!("omega(r*) hits the target ({:.2e} off)", (base_freq - target[0]).abs()),
                pass: (base_freq - target[0]).abs() < 1e-9,
            });
            // Zero-mean kick: the action displacement brackets zero.
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..64 {
                let theta = TWO_PI * i as f64 / 64.0;
                let gv = (m.g_pert)(&[theta], &m.r_star)[0];
                lo = lo.min(gv);
                hi = hi.max(gv);
            }
            out.push(FactReport {
                description: format!("kick brackets zero ([{lo:.3}, {hi:.3}])"),
                pass: lo <= 0.0 && hi >= 0.0,
            });
        }
        CatalogModel::Param(m) => {
            let base_freq = m.freq.eval(&m.xi_star);
            let off: f64 =
                base_freq.iter().zip(target).map(|(&a, &b)| (a - b).abs()).sum();
            out.push(FactReport {
                description: format!("omega(xi*) hits the target ({off:.2e} off)"),
                pass: off < 1e-9,
            });
            // Periodicity of the perturbation in every angle.
            let dim = m.dim();
            let mut worst = 0.0f64;
            for axis in 0..dim {
                for i in 0..5 {
                    let mut theta = alloc::vec![0.7; dim];
                    theta[axis] = TWO_PI * i as f64 / 5.0;
                    let v1 = (m.perturbation)(&theta, &m.xi_star);
                    theta[axis] += TWO_PI;
                    let v2 = (m.perturbation)(&theta, &m.xi_star);
                    for c in 0..dim {
                        worst = worst.max((v1[c] - v2[c]).abs());
                    }
                }
            }
            out.push(FactReport {
                description: format!("perturbation is 2 pi periodic (worst {worst:.2e})"),
                pass: worst < 1e-9,
            });
        }
    }
    Ok(out)
}
