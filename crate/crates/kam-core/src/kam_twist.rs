//! Invariant-torus engine for analytic twist maps
//! `(theta, r) -> (theta + omega(r) + eps·f, r + eps·g)` with the
//! intersection property.
//!
//! The angle and action perturbations are carried per action node (a
//! Chebyshev window around the current base action, re-centered after every
//! translation and halved in width per step) as fused Fourier series. Each
//! step solves the two difference equations with the *fixed* prescribed
//! rotation `p` — both share the same divisors — appends the resulting
//! near-identity transformation to the chain, translates the base action so
//! the conjugated map's mean rotation at the base is exactly `p`, and
//! re-measures both perturbations through the full chain on the new window.
//!
//! The intersection property is monitored through its measurable proxy: the
//! action displacement of the conjugated map must keep bracketing zero in
//! `theta` on every node. Bracketing also implies the oscillation bound
//! `sup|g| <= 2·osc(g)` that the contraction argument leans on, so one check
//! covers both.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::conjugacy::{chebyshev_nodes, ActionSampledField, TwistChain, TwistTransform};
use crate::diagnostics::{schedule_init, twist_conjugacy_residual, KamSchedule, StepRecord};
use crate::error::{KamError, Result};
use crate::fourier::{analyze_real, strip_norm, truncate, FourierSeries, GridShape, NormFlavor};
use crate::frequency_solver::{
    degree_1d, degree_2d, solve_frequency_equation, FrequencyMap,
};
use crate::small_divisors::{check_diophantine, solve_homological, DiophantineParams};
use crate::{l1_norm, wrap_centered};

/// Perturbation callable `(theta, r) -> R^n`.
pub type TwistPerturbationFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// The twist map `theta^1 = theta + omega(r) + eps·f(theta, r)`,
/// `r^1 = r + eps·g(theta, r)`.
#[derive(Clone)]
pub struct TwistMapModel {
    pub freq: FrequencyMap,
    pub f_pert: TwistPerturbationFn,
    pub g_pert: TwistPerturbationFn,
    pub epsilon: f64,
    /// Initial angular analyticity strip half-width.
    pub h0: f64,
    /// Base action with `omega(r_star) = p`.
    pub r_star: Vec<f64>,
    /// Whether the model asserts the intersection property (true for the
    /// area-preserving one-degree-of-freedom members).
    pub intersection: bool,
}

impl core::fmt::Debug for TwistMapModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TwistMapModel")
            .field("freq", &self.freq)
            .field("epsilon", &self.epsilon)
            .field("h0", &self.h0)
            .field("r_star", &self.r_star)
            .field("intersection", &self.intersection)
            .finish()
    }
}

impl TwistMapModel {
    pub fn dim(&self) -> usize {
        self.freq.range_dim
    }

    /// One application of the map on lifted angles.
    pub fn apply(&self, theta: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = self.freq.eval(r);
        let fv = (self.f_pert)(theta, r);
        let gv = (self.g_pert)(theta, r);
        let th1: Vec<f64> =
            (0..theta.len()).map(|i| theta[i] + w[i] + self.epsilon * fv[i]).collect();
        let r1: Vec<f64> = (0..r.len()).map(|i| r[i] + self.epsilon * gv[i]).collect();
        (th1, r1)
    }
}

/// Knobs for one twist run.
#[derive(Debug, Clone)]
pub struct TwistRunConfig {
    /// Prescribed rotation vector `p`.
    pub target: Vec<f64>,
    pub tol: f64,
    pub freq_tol: f64,
    pub guard: f64,
    pub max_steps: usize,
    pub kfloor: usize,
    pub kcap: usize,
    pub rho: f64,
    pub eta: f64,
    pub sched_m: usize,
    /// Initial action radius; the node window half-width starts at `2·s0`.
    pub s0: f64,
    /// Action nodes per axis.
    pub nodes_per_axis: usize,
    pub dioph: DiophantineParams,
    /// Skip the translation step (ablation runs).
    pub ablation: bool,
}

impl TwistRunConfig {
    pub fn new(target: Vec<f64>) -> Self {
        Self {
            target,
            tol: 1e-12,
            freq_tol: 2e-12,
            guard: crate::small_divisors::DEFAULT_GUARD,
            max_steps: 24,
            kfloor: 8,
            kcap: 48,
            rho: 0.5,
            eta: 2.0,
            sched_m: 1,
            s0: 0.25,
            nodes_per_axis: 9,
            dioph: DiophantineParams::new(1.0, 1.5, 8.0, 50),
            ablation: false,
        }
    }
}

/// Node windows never shrink below this half-width: placement accuracy stops
/// mattering once the shifts are tiny, while ever-closer nodes would starve
/// the finite-difference Jacobians used in the inversions.
const WINDOW_FLOOR: f64 = 1e-4;

/// Iteration state between steps.
#[derive(Debug, Clone)]
pub struct TwistIterationState {
    pub nu: usize,
    /// Current base action (the paper-facing translated point).
    pub base: Vec<f64>,
    /// Node window half-width.
    pub window: f64,
    /// Node coordinates per action axis.
    pub axes: Vec<Vec<f64>>,
    /// Fused per-node series: components `0..n` angle displacement minus `p`,
    /// `n..2n` action displacement. Row-major over the node tensor.
    pub node_series: Vec<FourierSeries>,
    pub chain: TwistChain,
    pub records: Vec<StepRecord>,
}

pub use crate::kam_param::{DivergenceReason, RunOutcome};

/// Result of a twist run.
#[derive(Debug, Clone)]
pub struct TwistRunResult {
    pub outcome: RunOutcome,
    pub r_hat_inf: Vec<f64>,
    /// Total translation `sum r*_i = r_hat_inf - r_star`.
    pub shift_total: Vec<f64>,
    pub chain: TwistChain,
    pub records: Vec<StepRecord>,
    pub freq_residual: f64,
    pub conjugacy_residual: f64,
    pub schedule: KamSchedule,
    pub target: Vec<f64>,
}

impl TwistRunResult {
    pub fn converged(&self) -> bool {
        self.outcome == RunOutcome::Converged
    }

    pub fn shift_total_norm(&self) -> f64 {
        l1_norm(&self.shift_total)
    }
}

fn analysis_grid(cutoff: usize) -> usize {
    (4 * cutoff).max(2 * cutoff + 2)
}

fn node_tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = alloc::vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &x in axis {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Fused displacement samples of the conjugated map at one action node.
struct NodeSamples {
    /// Point-major `[f components, g components]` values.
    values: Vec<f64>,
    f_osc_norm: f64,
    g_norm: f64,
    g_min: f64,
    g_max: f64,
}

fn sample_node(
    model: &TwistMapModel,
    chain: &TwistChain,
    node: &[f64],
    target: &[f64],
    grid: usize,
) -> Result<NodeSamples> {
    let dim = model.dim();
    let shape = GridShape::new(dim, grid);
    let map = |theta: &[f64], r: &[f64]| model.apply(theta, r);
    let count = shape.len();
    let mut values = Vec::with_capacity(count * 2 * dim);
    let mut f_mean = alloc::vec![0.0; dim];
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    let mut g_norm: f64 = 0.0;
    for pidx in 0..count {
        let theta = shape.point(pidx);
        let (th1, r1) = chain.conjugated_point(&map, &theta, node)?;
        let mut g_point = 0.0;
        for i in 0..dim {
            let fv = wrap_centered(th1[i] - theta[i] - target[i]);
            values.push(fv);
            f_mean[i] += fv;
        }
        for i in 0..dim {
            let gv = r1[i] - node[i];
            values.push(gv);
            g_point += gv.abs();
            g_min = g_min.min(gv);
            g_max = g_max.max(gv);
        }
        g_norm = g_norm.max(g_point);
    }
    for m in &mut f_mean {
        *m /= count as f64;
    }
    let mut f_osc_norm: f64 = 0.0;
    for pidx in 0..count {
        let mut dev = 0.0;
        for i in 0..dim {
            dev += (values[pidx * 2 * dim + i] - f_mean[i]).abs();
        }
        f_osc_norm = f_osc_norm.max(dev);
    }
    // Interleave as [f.., g..] per point already done above.
    Ok(NodeSamples { values, f_osc_norm, g_norm, g_min, g_max })
}

/// Mean angular displacement of the conjugated map at action `r`.
fn mean_rotation(
    model: &TwistMapModel,
    chain: &TwistChain,
    r: &[f64],
    target: &[f64],
    grid: usize,
) -> Result<Vec<f64>> {
    let dim = model.dim();
    let shape = GridShape::new(dim, grid);
    let map = |theta: &[f64], rr: &[f64]| model.apply(theta, rr);
    let mut mean = alloc::vec![0.0; dim];
    for pidx in 0..shape.len() {
        let theta = shape.point(pidx);
        let (th1, _) = chain.conjugated_point(&map, &theta, r)?;
        for i in 0..dim {
            mean[i] += wrap_centered(th1[i] - theta[i] - target[i]);
        }
    }
    for m in &mut mean {
        *m = *m / shape.len() as f64;
    }
    Ok((0..dim).map(|i| mean[i] + target[i]).collect())
}

struct WindowSamples {
    node_series: Vec<FourierSeries>,
    /// Oscillation / sup norms on the base slice: the convergence gate.
    ///
    /// Off-base nodes carry an irreducible `||dU||·|r - base|` mismatch from
    /// solving the difference equations at the fixed rotation `p`, so
    /// window-uniform sups would floor at the window scale; the invariant
    /// torus lives on the base slice.
    f_grid_norm: f64,
    g_grid_norm: f64,
    /// Window-wide coefficient norms (health of the whole node family).
    f_coeff_norm: f64,
    g_coeff_norm: f64,
    /// Worst-node bracketing margin `min(max g, -min g)`.
    intersection_margin: f64,
}

fn sample_window(
    model: &TwistMapModel,
    chain: &TwistChain,
    axes: &[Vec<f64>],
    base: &[f64],
    target: &[f64],
    cutoff: usize,
    h: f64,
) -> Result<WindowSamples> {
    let dim = model.dim();
    let grid = analysis_grid(cutoff);
    let shape = GridShape::new(dim, grid);
    let mut node_series = Vec::new();
    let mut f_coeff_norm: f64 = 0.0;
    let mut g_coeff_norm: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for node in node_tensor(axes) {
        let s = sample_node(model, chain, &node, target, grid)?;
        margin = margin.min((-s.g_min).min(s.g_max));
        let fused = analyze_real(&s.values, shape, 2 * dim, cutoff)?;
        // Mean-free, matching the grid-norm convention: node means carry the
        // rotation profile across the window, not the perturbation.
        f_coeff_norm = f_coeff_norm.max(strip_norm(
            &fused.component_range(0, dim).without_mean(),
            h,
            NormFlavor::CoeffWeighted,
        ));
        g_coeff_norm = g_coeff_norm.max(strip_norm(
            &fused.component_range(dim, 2 * dim),
            h,
            NormFlavor::CoeffWeighted,
        ));
        node_series.push(fused);
    }
    let at_base = sample_node(model, chain, base, target, grid)?;
    Ok(WindowSamples {
        node_series,
        f_grid_norm: at_base.f_osc_norm,
        g_grid_norm: at_base.g_norm,
        f_coeff_norm,
        g_coeff_norm,
        intersection_margin: margin.min((-at_base.g_min).min(at_base.g_max)),
    })
}

/// One iteration of the twist engine.
pub fn twist_kam_step(
    state: &TwistIterationState,
    model: &TwistMapModel,
    schedule: &KamSchedule,
    config: &TwistRunConfig,
) -> Result<TwistIterationState> {
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

    // Difference equations per node: the action part first, then the angle
    // part with the twist feedback `omega(r + V) - omega(r)` folded into its
    // right-hand side. The feedback is first order in the perturbation and
    // needs only evaluations of `omega`, so merely continuous frequency maps
    // are fine; skipping it would leave a first-order residual in the angle.
    let nodes = node_tensor(&state.axes);
    let mut solved = Vec::with_capacity(state.node_series.len());
    let mut remainder_norm: f64 = 0.0;
    for (series, node) in state.node_series.iter().zip(&nodes) {
        let eff_cut = k_next.min(series.cutoff());
        let split = truncate(series, eff_cut, h_next);
        remainder_norm = remainder_norm.max(split.remainder_norm);
        let g_band = split.truncated.component_range(dim, 2 * dim);
        let v = solve_homological(&g_band, target, config.guard)?;
        let grid = analysis_grid(eff_cut);
        let shape = GridShape::new(dim, grid);
        let w_node = model.freq.eval(node);
        let mut feedback = Vec::with_capacity(shape.len() * dim);
        for pidx in 0..shape.len() {
            let theta = shape.point(pidx);
            let vv = v.eval_real(&theta);
            let moved: Vec<f64> = node.iter().zip(&vv).map(|(&r, &dv)| r + dv).collect();
            let w_moved = model.freq.eval(&moved);
            for i in 0..dim {
                feedback.push(w_moved[i] - w_node[i]);
            }
        }
        let fb_series = analyze_real(&feedback, shape, dim, eff_cut)?;
        let f_band = split.truncated.component_range(0, dim);
        let rhs = f_band.linear_combination(1.0, &fb_series, 1.0)?.without_mean();
        let u = solve_homological(&rhs, target, config.guard)?;
        solved.push(FourierSeries::stack(&u, &v));
    }

    // Translation: move the base action so the conjugated mean rotation hits
    // the target exactly; evaluated through the chain built so far.
    let mean_grid = analysis_grid(k_next.min(state.node_series[0].cutoff())).max(128);
    let trust = state.window / 2.0;
    let (new_base, freq_residual) = if config.ablation {
        let a = mean_rotation(model, &state.chain, &state.base, target, mean_grid)?;
        let res: f64 = (0..dim).map(|i| (a[i] - target[i]).abs()).sum();
        (state.base.clone(), res)
    } else {
        let drift = |r: &[f64]| -> Vec<f64> {
            let a = mean_rotation(model, &state.chain, r, target, mean_grid)
                .expect("chain inversion inside the drift evaluation");
            let w = model.freq.eval(r);
            (0..dim).map(|i| a[i] - w[i]).collect()
        };
        let solved_base = solve_frequency_equation(
            &model.freq,
            &drift,
            target,
            &state.base,
            trust,
            config.freq_tol,
        )?;
        let a = mean_rotation(model, &state.chain, &solved_base, target, mean_grid)?;
        let res: f64 = (0..dim).map(|i| (a[i] - target[i]).abs()).sum();
        (solved_base, res)
    };
    let shift: Vec<f64> = new_base.iter().zip(&state.base).map(|(a, b)| a - b).collect();
    let drift_norm = {
        let a = mean_rotation(model, &state.chain, &new_base, target, mean_grid)?;
        let w = model.freq.eval(&new_base);
        l1_norm(&(0..dim).map(|i| a[i] - w[i]).collect::<Vec<f64>>())
    };

    let mut chain = state.chain.clone();
    chain.push(TwistTransform::new(ActionSampledField::new(state.axes.clone(), solved), dim));
    chain.translations.push(v + 1, shift.clone(), mu, freq_residual);

    // Re-center and shrink the node window, then re-measure both
    // perturbations through the extended chain.
    let window = (state.window / 2.0).max(WINDOW_FLOOR);
    let axes: Vec<Vec<f64>> = new_base
        .iter()
        .map(|&c| chebyshev_nodes(c, window, config.nodes_per_axis))
        .collect();
    let sampled = sample_window(model, &chain, &axes, &new_base, target, k_next, h_next)?;

    if model.intersection {
        let slack = 10.0 * config.tol + 1e-6 * sampled.g_grid_norm;
        if sampled.intersection_margin < -slack {
            return Err(KamError::IntersectionLost {
                step: v + 1,
                margin: sampled.intersection_margin,
            });
        }
    }

    let mut records = state.records.clone();
    records.push(StepRecord {
        index: v + 1,
        cutoff: k_next,
        f_grid_norm: sampled.f_grid_norm,
        f_coeff_norm: sampled.f_coeff_norm,
        g_grid_norm: sampled.g_grid_norm,
        g_coeff_norm: sampled.g_coeff_norm,
        shift_norm: l1_norm(&shift),
        freq_residual,
        drift_norm,
        intersection_margin: sampled.intersection_margin,
        remainder_norm,
    });

    Ok(TwistIterationState {
        nu: v + 1,
        base: new_base,
        window,
        axes,
        node_series: sampled.node_series,
        chain,
        records,
    })
}

/// Run the twist engine to convergence.
pub fn twist_kam_run(model: &TwistMapModel, config: &TwistRunConfig) -> Result<TwistRunResult> {
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
    // Degree certificate of the unperturbed frequency map up front.
    let degree = match dim {
        1 => degree_1d(&model.freq, model.freq.region[0], config.target[0])?,
        2 => degree_2d(
            &model.freq,
            model.freq.region[0],
            model.freq.region[1],
            (config.target[0], config.target[1]),
            64,
        )?,
        other => return Err(KamError::DimensionMismatch { expected: 2, got: other }),
    };
    if degree == 0 {
        return Err(KamError::NoRootInRegion);
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

    let k0 = schedule.working_cutoff(1, config.kfloor, config.kcap);
    let window = 2.0 * config.s0;
    let axes: Vec<Vec<f64>> = model
        .r_star
        .iter()
        .map(|&c| chebyshev_nodes(c, window, config.nodes_per_axis))
        .collect();
    let chain = TwistChain::identity(dim);
    let sampled = sample_window(model, &chain, &axes, &model.r_star, &config.target, k0, schedule.h0)?;
    let mut record0 = StepRecord::initial(0, k0);
    record0.f_grid_norm = sampled.f_grid_norm;
    record0.f_coeff_norm = sampled.f_coeff_norm;
    record0.g_grid_norm = sampled.g_grid_norm;
    record0.g_coeff_norm = sampled.g_coeff_norm;
    record0.intersection_margin = sampled.intersection_margin;
    {
        let a = mean_rotation(model, &chain, &model.r_star, &config.target, analysis_grid(k0))?;
        let w = model.freq.eval(&model.r_star);
        record0.drift_norm = l1_norm(&(0..dim).map(|i| a[i] - w[i]).collect::<Vec<f64>>());
        // No translation has happened yet; the whole mean offset is pending.
        record0.freq_residual = (0..dim).map(|i| (a[i] - config.target[i]).abs()).sum();
    }

    let mut state = TwistIterationState {
        nu: 0,
        base: model.r_star.clone(),
        window,
        axes,
        node_series: sampled.node_series,
        chain,
        records: alloc::vec![record0],
    };

    let outcome = loop {
        let last = state.records.last().expect("at least the initial record");
        // Chained Newton inversions resolve displacements only to about
        // 1e-13 each; below that floor the norms are measurement noise and
        // further steps cannot improve them.
        let noise_floor = 1e-13
            * (1.0 + crate::l1_norm(&config.target))
            * (state.chain.parts.len() as f64 + 1.0);
        // Converged means: the oscillating parts are below tolerance AND the
        // translation has pinned the mean rotation (unless ablated).
        if last.total_norm() < config.tol.max(noise_floor)
            && (config.ablation || last.freq_residual <= config.freq_tol.max(noise_floor))
        {
            break RunOutcome::Converged;
        }
        if state.nu >= config.max_steps {
            break RunOutcome::MaxSteps;
        }
        state = match twist_kam_step(&state, model, &schedule, config) {
            Ok(next) => next,
            // Oversized perturbations surface as lost invertibility or a
            // failed intersection proxy: controlled divergence.
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
            Err(KamError::IntersectionLost { step, .. }) => {
                break RunOutcome::Diverged { step, reason: DivergenceReason::IntersectionLost };
            }
            Err(other) => return Err(other),
        };
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

    let mean_grid = analysis_grid(state.node_series[0].cutoff()).max(128);
    let a = mean_rotation(model, &state.chain, &state.base, &config.target, mean_grid)?;
    let freq_residual: f64 = (0..dim).map(|i| (a[i] - config.target[i]).abs()).sum();
    let map = |theta: &[f64], r: &[f64]| model.apply(theta, r);
    let residual_grid = if dim == 1 { 1024 } else { 32 };
    let zero_shift = alloc::vec![0.0; dim];
    let conjugacy_residual = twist_conjugacy_residual(
        &state.chain,
        &map,
        &config.target,
        &zero_shift,
        &state.base,
        residual_grid,
    );
    let shift_total: Vec<f64> =
        state.base.iter().zip(&model.r_star).map(|(a, b)| a - b).collect();

    Ok(TwistRunResult {
        outcome,
        r_hat_inf: state.base,
        shift_total,
        chain: state.chain,
        records: state.records,
        freq_residual,
        conjugacy_residual,
        schedule,
        target: config.target.clone(),
    })
}
