//! Invariant-torus engine for parameterized rotation perturbations
//! `theta -> theta + omega(xi) + eps·f(theta, xi)` on `T^n`.
//!
//! Each step: truncate the current perturbation, solve the difference
//! equation for the next transformation part, translate the parameter so the
//! mean rotation of the conjugated map equals the prescribed `q` exactly, and
//! re-measure the perturbation at the new parameter by numerically conjugating
//! the original map through the accumulated chain. The parameter dependence of
//! `f` may be arbitrarily rough (merely continuous): the engine re-samples it,
//! never differentiates it.
//!
//! The running drift `sum_i f_{0,i}(xi)` that the frequency equation needs is
//! evaluated through the identity
//! `omega(xi) + sum_{i<=v} f_{0,i}(xi) = mean_theta[displacement of the
//! conjugated map at xi]`, which follows from unwinding the per-step
//! definitions of the `f_i`; this keeps the drift an honest function of the
//! parameter without storing per-step mean functions.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::conjugacy::{AngleTransform, ConjugacyChain};
use crate::diagnostics::{
    param_conjugacy_residual, schedule_init, KamSchedule, StepRecord,
};
use crate::error::{KamError, Result};
use crate::fourier::{analyze_real, strip_norm, truncate, FourierSeries, GridShape, NormFlavor};
use crate::frequency_solver::{solve_frequency_equation, FrequencyMap};
use crate::small_divisors::{check_diophantine, solve_homological, DiophantineParams};
use crate::{l1_norm, wrap_centered};

/// Perturbation callable `(theta, xi) -> R^n`.
pub type PerturbationFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// The parameterized map `theta -> theta + omega(xi) + eps·f(theta, xi)`.
#[derive(Clone)]
pub struct ParamMapModel {
    /// Frequency map over the parameter region (domain dim = range dim = n).
    pub freq: FrequencyMap,
    /// Analytic in `theta`; only continuous in `xi`.
    pub perturbation: PerturbationFn,
    pub epsilon: f64,
    /// Initial analyticity strip half-width in `theta`.
    pub h0: f64,
    /// Base parameter with `omega(xi_star) = q`.
    pub xi_star: Vec<f64>,
}

impl core::fmt::Debug for ParamMapModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ParamMapModel")
            .field("freq", &self.freq)
            .field("epsilon", &self.epsilon)
            .field("h0", &self.h0)
            .field("xi_star", &self.xi_star)
            .finish()
    }
}

impl ParamMapModel {
    pub fn dim(&self) -> usize {
        self.freq.range_dim
    }

    /// Full angular map at a fixed parameter, on lifted angles.
    pub fn apply(&self, theta: &[f64], xi: &[f64]) -> Vec<f64> {
        let w = self.freq.eval(xi);
        let p = (self.perturbation)(theta, xi);
        (0..theta.len()).map(|i| theta[i] + w[i] + self.epsilon * p[i]).collect()
    }
}

/// Knobs for one engine run.
#[derive(Debug, Clone)]
pub struct ParamRunConfig {
    /// Prescribed rotation vector `q`.
    pub target: Vec<f64>,
    /// Convergence threshold on the grid-sup perturbation norm.
    pub tol: f64,
    /// Frequency-equation tolerance.
    pub freq_tol: f64,
    /// Small-divisor guard.
    pub guard: f64,
    pub max_steps: usize,
    /// Working-cutoff clamp.
    pub kfloor: usize,
    pub kcap: usize,
    /// Schedule exponents.
    pub rho: f64,
    pub eta: f64,
    pub sched_m: usize,
    pub s0: f64,
    /// Diophantine verification of `q` before the run.
    pub dioph: DiophantineParams,
    /// Search radius of the translation step.
    pub trust_radius: f64,
    /// Skip the translation step (frequency drifts; used for ablation).
    pub ablation: bool,
}

impl ParamRunConfig {
    pub fn new(target: Vec<f64>) -> Self {
        Self {
            target,
            tol: 1e-12,
            freq_tol: 2e-12,
            guard: crate::small_divisors::DEFAULT_GUARD,
            max_steps: 24,
            kfloor: 8,
            kcap: 64,
            rho: 0.5,
            eta: 2.0,
            sched_m: 1,
            s0: 0.25,
            dioph: DiophantineParams::new(1.0, 1.5, 8.0, 50),
            trust_radius: 0.25,
            ablation: false,
        }
    }
}

/// Mutable state of a run between steps.
#[derive(Debug, Clone)]
pub struct ParamIterationState {
    pub nu: usize,
    pub xi: Vec<f64>,
    /// Conjugated displacement minus `q` at the current parameter.
    pub f: FourierSeries,
    pub chain: ConjugacyChain,
    pub records: Vec<StepRecord>,
}

/// Why a run was declared divergent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    /// Perturbation norms grew on two consecutive steps.
    NormGrowth,
    /// The accumulated transformation stopped being invertible on the grid.
    InversionFailure,
    /// The action displacement stopped bracketing zero.
    IntersectionLost,
    /// The frequency equation's root left the reachable region: the
    /// accumulated drift exceeds what a translation can absorb.
    TranslationOutOfReach,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Converged,
    MaxSteps,
    Diverged { step: usize, reason: DivergenceReason },
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct ParamRunResult {
    pub outcome: RunOutcome,
    pub xi_inf: Vec<f64>,
    pub chain: ConjugacyChain,
    pub records: Vec<StepRecord>,
    /// `|omega(xi_inf) + sum f_{0,i}(xi_inf) - q|` by final re-check.
    pub freq_residual: f64,
    /// Grid residual of the conjugacy identity at the final parameter.
    pub conjugacy_residual: f64,
    pub schedule: KamSchedule,
    pub target: Vec<f64>,
}

impl ParamRunResult {
    pub fn converged(&self) -> bool {
        self.outcome == RunOutcome::Converged
    }
}

fn analysis_grid(cutoff: usize) -> usize {
    (4 * cutoff).max(2 * cutoff + 2)
}

/// Conjugated displacement minus `q` sampled on the analysis grid.
fn displacement_values(
    model: &ParamMapModel,
    chain: &ConjugacyChain,
    xi: &[f64],
    target: &[f64],
    grid: usize,
) -> Result<Vec<f64>> {
    let dim = model.dim();
    let shape = GridShape::new(dim, grid);
    let map = |theta: &[f64]| model.apply(theta, xi);
    let mut out = Vec::with_capacity(shape.len() * dim);
    for p in 0..shape.len() {
        let theta = shape.point(p);
        let d = chain.conjugated_displacement(&map, &theta)?;
        for i in 0..dim {
            out.push(wrap_centered(d[i] - target[i]));
        }
    }
    Ok(out)
}

/// `mean_theta[conjugated displacement](xi) - q`, the drift plus
/// `omega(xi) - q`.
fn mean_displacement_minus_target(
    model: &ParamMapModel,
    chain: &ConjugacyChain,
    xi: &[f64],
    target: &[f64],
    grid: usize,
) -> Result<Vec<f64>> {
    let dim = model.dim();
    let values = displacement_values(model, chain, xi, target, grid)?;
    let count = (values.len() / dim) as f64;
    let mut mean = alloc::vec![0.0; dim];
    for point in values.chunks_exact(dim) {
        for (m, &v) in mean.iter_mut().zip(point) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    Ok(mean)
}

/// Sup over grid points of the l1 deviation from the grid mean.
///
/// The mean of the displacement is what the translation step controls (to
/// `freq_tol`); convergence of the spectral iteration is about the
/// oscillating part, so norms are measured mean-free.
fn oscillation_norm(values: &[f64], dim: usize) -> f64 {
    let count = (values.len() / dim) as f64;
    let mut mean = alloc::vec![0.0; dim];
    for point in values.chunks_exact(dim) {
        for (m, &v) in mean.iter_mut().zip(point) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    values
        .chunks_exact(dim)
        .map(|point| {
            point.iter().zip(&mean).map(|(&v, &m)| (v - m).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// One iteration: truncate, solve the difference equation, translate the
/// parameter, re-measure the perturbation at the new parameter.
pub fn param_kam_step(
    state: &ParamIterationState,
    model: &ParamMapModel,
    schedule: &KamSchedule,
    config: &ParamRunConfig,
) -> Result<ParamIterationState> {
    let v = state.nu;
    let dim = model.dim();
    let target = &config.target;
    // Composition roughly doubles the bandwidth per step, while the schedule
    // cutoff only tracks its worst-case smallness scale; take the larger.
    let k_prev = state.records.last().map(|r| r.cutoff).unwrap_or(config.kfloor);
    let k_next = schedule
        .working_cutoff(v + 1, config.kfloor, config.kcap)
        .max(2 * k_prev)
        .min(config.kcap);
    let h_next = schedule.h.get(v + 1).copied().unwrap_or(schedule.h0 / 2.0);
    let mu = schedule.mu.get(v).copied().unwrap_or(0.0);

    // Truncation at the working cutoff; the mean goes to the ledgered drift,
    // the band to the difference equation, the tail stays in the map and is
    // re-measured after conjugation.
    let eff_cut = k_next.min(state.f.cutoff());
    let split = truncate(&state.f, eff_cut, h_next);

    let u = solve_homological(&split.truncated, target, config.guard)?;

    // Translation: drive the conjugated mean rotation at the new parameter
    // back onto the target. The drift is evaluated through the chain built so
    // far (without the part added below).
    let mean_grid = analysis_grid(eff_cut).max(128);
    let (new_xi, freq_residual) = if config.ablation {
        let m = mean_displacement_minus_target(model, &state.chain, &state.xi, target, mean_grid)?;
        (state.xi.clone(), l1_norm(&m))
    } else {
        let drift = |xi: &[f64]| -> Vec<f64> {
            let m = mean_displacement_minus_target(model, &state.chain, xi, target, mean_grid)
                .expect("chain inversion inside the drift evaluation");
            let w = model.freq.eval(xi);
            (0..dim).map(|i| m[i] + target[i] - w[i]).collect()
        };
        let solved = solve_frequency_equation(
            &model.freq,
            &drift,
            target,
            &state.xi,
            config.trust_radius,
            config.freq_tol,
        )?;
        let residual =
            l1_norm(&mean_displacement_minus_target(model, &state.chain, &solved, target, mean_grid)?);
        (solved, residual)
    };
    let shift: Vec<f64> = new_xi.iter().zip(&state.xi).map(|(a, b)| a - b).collect();
    let drift_norm = {
        let w = model.freq.eval(&new_xi);
        let m = mean_displacement_minus_target(model, &state.chain, &new_xi, target, mean_grid)?;
        l1_norm(&(0..dim).map(|i| m[i] + target[i] - w[i]).collect::<Vec<f64>>())
    };

    let mut chain = state.chain.clone();
    chain.push(AngleTransform::new(u));
    chain.translations.push(v + 1, shift.clone(), mu, freq_residual);

    // Re-measure the perturbation at the new parameter through the new chain.
    let grid = analysis_grid(k_next);
    let values = displacement_values(model, &chain, &new_xi, target, grid)?;
    let f_next = analyze_real(&values, GridShape::new(dim, grid), dim, k_next)?;
    let f_grid_norm = oscillation_norm(&values, dim);
    // Mean-free, matching the grid-norm convention.
    let f_coeff_norm = strip_norm(&f_next.without_mean(), h_next, NormFlavor::CoeffWeighted);

    let mut records = state.records.clone();
    records.push(StepRecord {
        index: v + 1,
        cutoff: k_next,
        f_grid_norm,
        f_coeff_norm,
        g_grid_norm: 0.0,
        g_coeff_norm: 0.0,
        shift_norm: l1_norm(&shift),
        freq_residual,
        drift_norm,
        intersection_margin: 0.0,
        remainder_norm: split.remainder_norm,
    });

    Ok(ParamIterationState { nu: v + 1, xi: new_xi, f: f_next, chain, records })
}

/// Run the engine to convergence (or divergence / step cap).
pub fn param_kam_run(model: &ParamMapModel, config: &ParamRunConfig) -> Result<ParamRunResult> {
    let dim = model.dim();
    if config.target.len() != dim {
        return Err(KamError::DimensionMismatch { expected: dim, got: config.target.len() });
    }
    let report = check_diophantine(&config.target, &config.dioph);
    if !report.satisfied {
        return Err(KamError::NotDiophantine {
            worst_value: report.worst_value,
            gamma: report.gamma,
        });
    }

    let eps_eff = model.epsilon.max(1e-30).min(0.999_999);
    let schedule = schedule_init(
        eps_eff,
        dim,
        config.sched_m,
        config.rho,
        config.eta,
        model.h0,
        config.s0,
        config.dioph.tau,
        config.max_steps + 3,
    )?;

    // Initial state at the base parameter.
    let k0 = schedule.working_cutoff(1, config.kfloor, config.kcap);
    let grid = analysis_grid(k0);
    let chain = ConjugacyChain::identity(dim);
    let values = displacement_values(model, &chain, &model.xi_star, &config.target, grid)?;
    let f0 = analyze_real(&values, GridShape::new(dim, grid), dim, k0)?;
    let mut record0 = StepRecord::initial(0, k0);
    record0.f_grid_norm = oscillation_norm(&values, dim);
    record0.f_coeff_norm = strip_norm(&f0.without_mean(), schedule.h0, NormFlavor::CoeffWeighted);
    {
        let m =
            mean_displacement_minus_target(model, &chain, &model.xi_star, &config.target, grid)?;
        let w = model.freq.eval(&model.xi_star);
        record0.drift_norm =
            l1_norm(&(0..dim).map(|i| m[i] + config.target[i] - w[i]).collect::<Vec<f64>>());
        // No translation has happened yet; the whole mean offset is pending.
        record0.freq_residual = l1_norm(&m);
    }

    let mut state = ParamIterationState {
        nu: 0,
        xi: model.xi_star.clone(),
        f: f0,
        chain,
        records: alloc::vec![record0],
    };

    let outcome = loop {
        let last = state.records.last().expect("at least the initial record");
        // Chained Newton inversions resolve displacements only to about
        // 1e-13 each; below that floor the norms are measurement noise and
        // further steps cannot improve them.
        let noise_floor = 1e-13
            * (1.0 + l1_norm(&config.target))
            * (state.chain.parts.len() as f64 + 1.0);
        // Converged means: the oscillating part is below tolerance AND the
        // translation has pinned the mean rotation (unless ablated).
        if last.total_norm() < config.tol.max(noise_floor)
            && (config.ablation || last.freq_residual <= config.freq_tol.max(noise_floor))
        {
            break RunOutcome::Converged;
        }
        if state.nu >= config.max_steps {
            break RunOutcome::MaxSteps;
        }
        state = match param_kam_step(&state, model, &schedule, config) {
            Ok(next) => next,
            // Losing invertibility is how oversized perturbations surface
            // here: a controlled divergence, not a caller error.
            Err(KamError::InversionFailure { .. }) => {
                break RunOutcome::Diverged {
                    step: state.nu + 1,
                    reason: DivergenceReason::InversionFailure,
                };
            }
            Err(KamError::NoRootInRegion) | Err(KamError::ToleranceUnreachable { .. }) => {
                break RunOutcome::Diverged {
                    step: state.nu + 1,
                    reason: DivergenceReason::TranslationOutOfReach,
                };
            }
            Err(other) => return Err(other),
        };
        // Two consecutive norm increases abort the run.
        if !config.ablation && state.records.len() >= 3 {
            let r = &state.records;
            let (a, b, c) = (
                r[r.len() - 3].total_norm(),
                r[r.len() - 2].total_norm(),
                r[r.len() - 1].total_norm(),
            );
            if c > b && b > a {
                break RunOutcome::Diverged {
                    step: state.nu,
                    reason: DivergenceReason::NormGrowth,
                };
            }
        }
    };

    let mean_grid = analysis_grid(state.f.cutoff()).max(128);
    let freq_residual = l1_norm(&mean_displacement_minus_target(
        model,
        &state.chain,
        &state.xi,
        &config.target,
        mean_grid,
    )?);
    let xi_inf = state.xi.clone();
    let map_final = |theta: &[f64]| model.apply(theta, &xi_inf);
    let residual_grid = if dim == 1 { 1024 } else { 64 };
    let conjugacy_residual =
        param_conjugacy_residual(&state.chain, &map_final, &config.target, residual_grid);

    Ok(ParamRunResult {
        outcome,
        xi_inf,
        chain: state.chain,
        records: state.records,
        freq_residual,
        conjugacy_residual,
        schedule,
        target: config.target.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::small_divisors::golden_like_frequency;

    fn identity_freq(center: f64) -> FrequencyMap {
        FrequencyMap::new(1, 1, alloc::vec![(center - 1.0, center + 1.0)], |x| {
            alloc::vec![x[0]]
        })
    }

    fn model_with(
        f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        epsilon: f64,
        q: f64,
    ) -> ParamMapModel {
        ParamMapModel {
            freq: identity_freq(q),
            perturbation: Arc::new(f),
            epsilon,
            h0: 1.0,
            xi_star: alloc::vec![q],
        }
    }

    #[test]
    fn zero_epsilon_converges_immediately() {
        let q = golden_like_frequency(&[1]).unwrap();
        let model = model_with(|_t, _x| alloc::vec![0.0], 0.0, q);
        let config = ParamRunConfig::new(alloc::vec![q]);
        let result = param_kam_run(&model, &config).unwrap();
        assert!(result.converged());
        assert_eq!(result.records.len(), 1);
        assert!((result.xi_inf[0] - q).abs() < 1e-15);
        assert!(result.conjugacy_residual < 1e-12);
    }

    #[test]
    fn mean_drift_translates_parameter() {
        // f = 1 + cos(theta): the first translation must move xi by -eps.
        let q = golden_like_frequency(&[1]).unwrap();
        let eps = 1e-3;
        let model = model_with(|t, _x| alloc::vec![1.0 + t[0].cos()], eps, q);
        let config = ParamRunConfig::new(alloc::vec![q]);
        let schedule =
            schedule_init(eps, 1, 1, 0.5, 2.0, 1.0, 0.25, 1.5, 8).unwrap();
        let grid = analysis_grid(schedule.working_cutoff(1, 8, 64));
        let chain = ConjugacyChain::identity(1);
        let values = displacement_values(&model, &chain, &model.xi_star, &config.target, grid).unwrap();
        let f0 = analyze_real(&values, GridShape::new(1, grid), 1, schedule.working_cutoff(1, 8, 64)).unwrap();
        let mut rec = StepRecord::initial(0, f0.cutoff());
        rec.f_grid_norm = oscillation_norm(&values, 1);
        let state = ParamIterationState {
            nu: 0,
            xi: model.xi_star.clone(),
            f: f0,
            chain,
            records: alloc::vec![rec],
        };
        // Oracle: with identity frequency the equation xi + eps = q is exact.
        let next = param_kam_step(&state, &model, &schedule, &config).unwrap();
        assert!((next.xi[0] - (q - eps)).abs() < 1e-9, "xi1 = {}", next.xi[0]);
        // Mean removed: the next perturbation is quadratically smaller.
        assert!(next.records[1].f_grid_norm < 5.0 * eps * eps);
    }

    #[test]
    fn zero_mean_perturbation_keeps_parameter() {
        let q = golden_like_frequency(&[1]).unwrap();
        let eps = 1e-3;
        let model = model_with(|t, _x| alloc::vec![t[0].cos()], eps, q);
        let config = ParamRunConfig::new(alloc::vec![q]);
        let result = param_kam_run(&model, &config).unwrap();
        assert!(result.converged());
        // Drift is zero-mean at first order; shifts stay at the square scale.
        assert!((result.xi_inf[0] - q).abs() < 5.0 * eps * eps);
        assert!(result.records[1].f_grid_norm < 5.0 * eps * eps);
        assert!(result.conjugacy_residual <= 10.0 * config.tol);
    }

    #[test]
    fn analytic_family_run_converges() {
        let q = golden_like_frequency(&[1]).unwrap();
        let eps = 1e-4;
        let model = model_with(
            |t, x| alloc::vec![(1.0 + t[0].cos()) * (1.0 + 0.3 * x[0].sin())],
            eps,
            q,
        );
        let config = ParamRunConfig::new(alloc::vec![q]);
        let result = param_kam_run(&model, &config).unwrap();
        assert!(result.converged(), "records: {:?}", result.records.len());
        assert!(result.freq_residual <= config.freq_tol * 1.01);
        assert!(result.conjugacy_residual <= 10.0 * config.tol);
        // The parameter moved by O(eps) to hold the frequency.
        assert!(result.chain.translations.total_norm() > eps * 0.1);
        assert!(result.chain.translations.total_norm() < eps * 10.0);
    }
}
