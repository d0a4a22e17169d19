//! The alternating adversarial training loop: per-iteration resampling,
//! descent on the solution network, ascent on the adversary, metric
//! logging, and the evaluation-grid error.

use crate::error::{FwanError, Result};
use crate::lossgrad::{evaluate, EvalRequest, ExecMode, USource};
use crate::neural::{forward_many, init_params, NetworkParams, NetworkSpec};
use crate::optim::{AdamState, Direction};
use crate::problems::ProblemSpec;
use crate::sampling::{make_batch, BatchSizes, CollocationBatch};
use crate::weakform::{LossBreakdown, ObjectiveConfig};
use std::time::Instant;

/// Independent seeds for every random quantity of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Seeds {
    pub sampling: u64,
    pub init_u: u64,
    pub init_v: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { sampling: 1, init_u: 2, init_v: 3, noise: 4 }
    }
}

impl Seeds {
    /// Shifted seeds for repetition r of a sweep; the noise seed shifts
    /// with the repetition but never with the fractional order, so the
    /// same noise realization is shared across alpha values.
    pub fn offset(self, r: u64) -> Seeds {
        Seeds {
            sampling: self.sampling.wrapping_add(r),
            init_u: self.init_u.wrapping_add(r),
            init_v: self.init_v.wrapping_add(r),
            noise: self.noise.wrapping_add(r),
        }
    }
}

/// Training hyperparameters (collocation counts, inner update counts,
/// learning rates, boundary weight, budget, logging cadence).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub m_interior: usize,
    pub m_boundary: usize,
    pub n_inner: usize,
    pub k_u: usize,
    pub k_v: usize,
    pub lr_u: f64,
    pub lr_v: f64,
    pub beta: f64,
    pub max_outer_iters: usize,
    pub eval_every: usize,
    pub grid_resolution: usize,
    pub seeds: Seeds,
    pub deterministic: bool,
    pub squared_pairing: bool,
    pub early_stop: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_counts = self.m_interior >= 1
            && self.m_boundary >= 1
            && self.n_inner >= 1
            && self.k_u >= 1
            && self.k_v >= 1
            && self.max_outer_iters >= 1
            && self.eval_every >= 1;
        if !positive_counts {
            return Err(FwanError::Config(
                "all counts (M_I, M_B, N, K_u, K_v, max_outer_iters, eval_every) must be >= 1"
                    .into(),
            ));
        }
        if !(self.lr_u > 0.0 && self.lr_v > 0.0) {
            return Err(FwanError::Config("learning rates must be positive".into()));
        }
        if self.beta <= 0.0 {
            return Err(FwanError::Config("beta must be positive".into()));
        }
        if self.grid_resolution < 2 {
            return Err(FwanError::Config("grid resolution must be >= 2 per axis".into()));
        }
        Ok(())
    }
}

/// One logged metrics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub l_int: f64,
    pub l_bound: f64,
    pub l_total: f64,
    pub rel_l2_err: f64,
    /// Seconds since training started; written as 0 in deterministic mode
    /// so logs are byte-reproducible.
    pub wall_s: f64,
}

/// Append-only metric history.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
}

impl RunMetrics {
    pub fn final_rel_err(&self) -> Option<f64> {
        self.rows.last().map(|r| r.rel_l2_err)
    }
}

/// Noteworthy events during a run.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    /// The adversary collapsed below the norm floor and was reinitialized
    /// with a fresh seed; its optimizer state restarted.
    AdversaryReinit { iter: usize, seed: u64 },
    /// Early stop triggered after the evaluation error stagnated.
    EarlyStop { iter: usize },
}

/// Callback invoked at every logged evaluation (CSV streaming,
/// checkpointing).
pub trait TrainObserver {
    fn on_eval(
        &mut self,
        row: &MetricsRow,
        u_params: &NetworkParams,
        v_params: &NetworkParams,
    ) -> Result<()>;
}

/// Optional knobs for [`train_with`].
#[derive(Default)]
pub struct TrainOptions<'a> {
    pub initial_u: Option<&'a NetworkParams>,
    pub initial_v: Option<&'a NetworkParams>,
    pub observer: Option<&'a mut dyn TrainObserver>,
    pub exec: ExecMode,
}

pub struct TrainOutput {
    pub u_params: NetworkParams,
    pub v_params: NetworkParams,
    pub metrics: RunMetrics,
    pub events: Vec<TrainEvent>,
    /// Completed optimizer steps per network.
    pub u_steps: u64,
    pub v_steps: u64,
}

pub fn train(
    problem: &ProblemSpec,
    cfg: &TrainConfig,
    u_spec: &NetworkSpec,
    v_spec: &NetworkSpec,
) -> Result<TrainOutput> {
    train_with(problem, cfg, u_spec, v_spec, TrainOptions::default())
}

/// Run the alternating minimax loop.
///
/// Every outer iteration draws a fresh collocation batch, performs K_u
/// Adam descent steps on the solution parameters, then K_v Adam ascent
/// steps on the adversary, recomputing the loss and gradient from the
/// current parameters before each step. A collapsed adversary is
/// reinitialized (fresh seed, fresh optimizer moments) and the iteration
/// retries; a non-finite loss aborts with a diagnostic snapshot.
pub fn train_with(
    problem: &ProblemSpec,
    cfg: &TrainConfig,
    u_spec: &NetworkSpec,
    v_spec: &NetworkSpec,
    opts: TrainOptions<'_>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    u_spec.validate()?;
    v_spec.validate()?;
    if u_spec.input_dim != problem.dim() || v_spec.input_dim != problem.dim() {
        return Err(FwanError::Config(format!(
            "network input dims (u {}, v {}) must match the problem dimension {}",
            u_spec.input_dim,
            v_spec.input_dim,
            problem.dim()
        )));
    }
    let obj = ObjectiveConfig {
        beta: cfg.beta,
        p: problem.p.clone(),
        q: problem.q.clone(),
        squared_pairing: cfg.squared_pairing,
    };

    let mut theta = match opts.initial_u {
        Some(p) => p.clone(),
        None => init_params(u_spec, cfg.seeds.init_u),
    };
    let mut eta = match opts.initial_v {
        Some(p) => p.clone(),
        None => init_params(v_spec, cfg.seeds.init_v),
    };
    let mut adam_u = AdamState::new(theta.len(), cfg.lr_u);
    let mut adam_v = AdamState::new(eta.len(), cfg.lr_v);

    let mut metrics = RunMetrics::default();
    let mut events = Vec::new();
    let mut observer = opts.observer;
    let mut reinits = 0u64;
    let sizes = BatchSizes {
        m_interior: cfg.m_interior,
        m_boundary: cfg.m_boundary,
        n_inner: cfg.n_inner,
    };
    let started = Instant::now();
    let mut best: Option<(f64, usize)> = None; // (error, logged-row index)

    'outer: for iter in 0..cfg.max_outer_iters {
        let batch = make_batch(
            &problem.domain,
            sizes,
            |x| problem.g(x),
            problem.noise_delta,
            cfg.seeds.sampling,
            cfg.seeds.noise,
            iter as u64,
        )?;

        let mut logged_breakdown: Option<LossBreakdown> = None;
        for step in 0..cfg.k_u {
            let out = eval_with_reinit(
                problem, &obj, u_spec, &theta, v_spec, &mut eta, &mut adam_v, cfg, &batch, iter,
                EvalRequest { grad_u: true, grad_v: false },
                opts.exec, &mut events, &mut reinits,
            )?;
            check_finite(&out.breakdown, iter, &batch, &theta, &eta)?;
            if step == 0 {
                logged_breakdown = Some(out.breakdown);
            }
            let grad = out.grad_u.expect("requested gradient");
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(non_finite_error("solution gradient", iter, &batch, &theta, &eta));
            }
            adam_u.step(theta.as_mut_slice(), &grad, Direction::Descend)?;
        }
        for _ in 0..cfg.k_v {
            let out = eval_with_reinit(
                problem, &obj, u_spec, &theta, v_spec, &mut eta, &mut adam_v, cfg, &batch, iter,
                EvalRequest { grad_u: false, grad_v: true },
                opts.exec, &mut events, &mut reinits,
            )?;
            check_finite(&out.breakdown, iter, &batch, &theta, &eta)?;
            let grad = out.grad_v.expect("requested gradient");
            adam_v.step(eta.as_mut_slice(), &grad, Direction::Ascend)?;
        }

        let done = iter + 1 == cfg.max_outer_iters;
        if (iter + 1) % cfg.eval_every == 0 || done {
            let grid = evaluate_grid(u_spec, &theta, problem, cfg.grid_resolution)?;
            let bd = logged_breakdown.expect("K_u >= 1 guarantees one evaluation");
            let row = MetricsRow {
                iter: iter + 1,
                l_int: bd.l_int,
                l_bound: bd.l_bound,
                l_total: bd.l_total,
                rel_l2_err: grid.rel_l2,
                wall_s: if cfg.deterministic { 0.0 } else { started.elapsed().as_secs_f64() },
            };
            metrics.rows.push(row);
            if let Some(obs) = observer.as_deref_mut() {
                obs.on_eval(&row, &theta, &eta)?;
            }
            if cfg.early_stop {
                let improved = best.map_or(true, |(b, _)| grid.rel_l2 < b - 1e-4);
                if improved {
                    best = Some((grid.rel_l2, metrics.rows.len()));
                } else if let Some((_, at)) = best {
                    if metrics.rows.len() - at >= 200 {
                        events.push(TrainEvent::EarlyStop { iter: iter + 1 });
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(TrainOutput {
        u_params: theta,
        v_params: eta,
        metrics,
        events,
        u_steps: adam_u.t,
        v_steps: adam_v.t,
    })
}

/// Evaluate the objective, reinitializing a collapsed adversary (fresh
/// seed and optimizer state) and retrying, up to a small bound.
#[allow(clippy::too_many_arguments)]
fn eval_with_reinit(
    problem: &ProblemSpec,
    obj: &ObjectiveConfig,
    u_spec: &NetworkSpec,
    theta: &NetworkParams,
    v_spec: &NetworkSpec,
    eta: &mut NetworkParams,
    adam_v: &mut AdamState,
    cfg: &TrainConfig,
    batch: &CollocationBatch,
    iter: usize,
    req: EvalRequest,
    exec: ExecMode,
    events: &mut Vec<TrainEvent>,
    reinits: &mut u64,
) -> Result<crate::lossgrad::EvalOutput> {
    for _ in 0..5 {
        match evaluate(problem, obj, USource::Net(u_spec, theta), v_spec, eta, batch, req, exec) {
            Err(FwanError::DegenerateAdversary { .. }) => {
                *reinits += 1;
                let seed = cfg.seeds.init_v.wrapping_add(1000 * *reinits);
                *eta = init_params(v_spec, seed);
                *adam_v = AdamState::new(eta.len(), cfg.lr_v);
                events.push(TrainEvent::AdversaryReinit { iter, seed });
            }
            other => return other,
        }
    }
    Err(FwanError::Config(
        "adversary collapsed repeatedly despite reinitialization".into(),
    ))
}

fn check_finite(
    bd: &LossBreakdown,
    iter: usize,
    batch: &CollocationBatch,
    theta: &NetworkParams,
    eta: &NetworkParams,
) -> Result<()> {
    let all = [bd.pairing, bd.v_norm2, bd.l_int, bd.l_bound, bd.l_total];
    if all.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FwanError::NonFinite {
            context: "training loss",
            iteration: iter,
            batch_stream: batch.stream,
            theta_checksum: theta.checksum(),
            eta_checksum: eta.checksum(),
        })
    }
}

/// Relative l2 distance between two sampled fields.
pub fn relative_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    assert_eq!(pred.len(), truth.len());
    let norm_t: f64 = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm_t == 0.0 {
        return Err(FwanError::UndefinedMetric);
    }
    let diff: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>().sqrt();
    Ok(diff / norm_t)
}

pub struct GridEval {
    pub resolution: usize,
    /// Row-major grid points, last axis fastest.
    pub points: Vec<Vec<f64>>,
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
    pub rel_l2: f64,
}

/// Evaluate the network on a uniform grid (boundary nodes included) and
/// compute the relative l2 error against the manufactured solution.
pub fn evaluate_grid(
    u_spec: &NetworkSpec,
    u_params: &NetworkParams,
    problem: &ProblemSpec,
    resolution: usize,
) -> Result<GridEval> {
    if resolution < 2 {
        return Err(FwanError::Config("grid resolution must be >= 2 per axis".into()));
    }
    let n = problem.dim();
    if u_spec.input_dim != n {
        return Err(FwanError::Usage("network dimension does not match the problem".into()));
    }
    let total = resolution.pow(n as u32);
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    loop {
        let pt: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = problem.domain.axis(i);
                lo + (hi - lo) * idx[i] as f64 / (resolution - 1) as f64
            })
            .collect();
        points.push(pt);
        // odometer increment, last axis fastest
        let mut axis = n;
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < resolution {
                break;
            }
            idx[axis] = 0;
            if axis == 0 {
                break;
            }
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }
    debug_assert_eq!(points.len(), total);

    let pred = forward_many(u_spec, u_params, &points)?;
    let truth: Vec<f64> = points.iter().map(|p| problem.solution.value(p)).collect();
    let rel_l2 = relative_l2(&pred, &truth)?;
    Ok(GridEval { resolution, points, pred, truth, rel_l2 })
}

/// One sweep cell: a full training run at (alpha, repetition).
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub alpha: f64,
    pub rep: usize,
    pub sampling_seed: u64,
    /// None when the run failed (recorded, excluded from aggregation).
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepAggregate {
    pub alpha: f64,
    pub median: f64,
    pub mean: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    pub aggregate: Vec<SweepAggregate>,
}

/// Train once per (alpha, repetition) and aggregate the final relative
/// errors by median and mean. Failed runs are recorded and excluded.
pub fn alpha_sweep(
    problem: &ProblemSpec,
    alphas: &[f64],
    cfg: &TrainConfig,
    u_spec: &NetworkSpec,
    v_spec: &NetworkSpec,
    repetitions: usize,
    exec: ExecMode,
) -> Result<SweepTable> {
    if repetitions == 0 {
        return Err(FwanError::Config("sweep needs at least one repetition".into()));
    }
    let mut cells = Vec::new();
    for &alpha in alphas {
        let fa = crate::fraccalc::FracOrder::new(alpha)?;
        for rep in 0..repetitions {
            let mut run_cfg = cfg.clone();
            run_cfg.seeds = cfg.seeds.offset(rep as u64);
            let run_problem = problem.clone().with_alpha(fa);
            let rel_err = match train_with(
                &run_problem,
                &run_cfg,
                u_spec,
                v_spec,
                TrainOptions { exec, ..TrainOptions::default() },
            ) {
                Ok(out) => out.metrics.final_rel_err(),
                Err(_) => None,
            };
            cells.push(SweepCell { alpha, rep, sampling_seed: run_cfg.seeds.sampling, rel_err });
        }
    }
    let mut aggregate = Vec::new();
    for &alpha in alphas {
        let mut errs: Vec<f64> = cells
            .iter()
            .filter(|c| c.alpha == alpha)
            .filter_map(|c| c.rel_err)
            .collect();
        let failures = repetitions - errs.len();
        errs.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
        let (median, mean) = if errs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mid = errs.len() / 2;
            let median = if errs.len() % 2 == 1 {
                errs[mid]
            } else {
                0.5 * (errs[mid - 1] + errs[mid])
            };
            (median, errs.iter().sum::<f64>() / errs.len() as f64)
        };
        aggregate.push(SweepAggregate { alpha, median, mean, failures });
    }
    Ok(SweepTable { cells, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::{FracOrder, ManufacturedSolution};
    use crate::neural::Activation;
    use crate::sampling::Rect;

    fn tiny_specs(n: usize) -> (NetworkSpec, NetworkSpec) {
        let u = NetworkSpec {
            input_dim: n,
            widths: vec![4, 4],
            activations: vec![Activation::Tanh, Activation::Sinh],
            conv_layer: Some(2),
            conv_kernel: 3,
        };
        let v = NetworkSpec {
            input_dim: n,
            widths: vec![4, 4],
            activations: vec![Activation::Tanh, Activation::Softplus],
            conv_layer: None,
            conv_kernel: 3,
        };
        (u, v)
    }

    fn tiny_cfg(iters: usize) -> TrainConfig {
        TrainConfig {
            m_interior: 8,
            m_boundary: 6,
            n_inner: 3,
            k_u: 1,
            k_v: 1,
            lr_u: 1e-3,
            lr_v: 1e-2,
            beta: 10.0,
            max_outer_iters: iters,
            eval_every: 1,
            grid_resolution: 5,
            seeds: Seeds::default(),
            deterministic: true,
            squared_pairing: true,
            early_stop: false,
        }
    }

    fn tiny_problem() -> ProblemSpec {
        ProblemSpec::new(
            Rect::unit(2),
            FracOrder::new(0.5).unwrap(),
            ManufacturedSolution::ProductOfSquares,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_iteration_budget_is_rejected() {
        let problem = tiny_problem();
        let (u, v) = tiny_specs(2);
        let cfg = tiny_cfg(0);
        assert!(train(&problem, &cfg, &u, &v).is_err());
    }

    #[test]
    fn optimizer_step_ledger() {
        let problem = tiny_problem();
        let (u, v) = tiny_specs(2);
        let mut cfg = tiny_cfg(3);
        cfg.k_u = 2;
        cfg.k_v = 3;
        let out = train(&problem, &cfg, &u, &v).unwrap();
        assert_eq!(out.u_steps, 6);
        assert_eq!(out.v_steps, 9);

        // one iteration performs exactly k_u + k_v steps
        let mut cfg = tiny_cfg(1);
        cfg.k_u = 1;
        cfg.k_v = 1;
        let out = train(&problem, &cfg, &u, &v).unwrap();
        assert_eq!(out.u_steps + out.v_steps, 2);
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let problem = tiny_problem();
        let (u, v) = tiny_specs(2);
        let cfg = tiny_cfg(4);
        let a = train(&problem, &cfg, &u, &v).unwrap();
        let b = train(&problem, &cfg, &u, &v).unwrap();
        assert_eq!(a.metrics.rows.len(), b.metrics.rows.len());
        for (ra, rb) in a.metrics.rows.iter().zip(&b.metrics.rows) {
            assert_eq!(ra.l_total.to_bits(), rb.l_total.to_bits());
            assert_eq!(ra.rel_l2_err.to_bits(), rb.rel_l2_err.to_bits());
            assert_eq!(ra.wall_s, 0.0);
        }
        for (pa, pb) in a.u_params.as_slice().iter().zip(b.u_params.as_slice()) {
            assert_eq!(pa.to_bits(), pb.to_bits());
        }
    }

    #[test]
    fn logged_rows_are_consistent_and_monotone() {
        let problem = tiny_problem();
        let (u, v) = tiny_specs(2);
        let mut cfg = tiny_cfg(6);
        cfg.eval_every = 2;
        let out = train(&problem, &cfg, &u, &v).unwrap();
        assert_eq!(out.metrics.rows.len(), 3);
        let mut prev = 0;
        for row in &out.metrics.rows {
            assert!(row.iter > prev, "iterations strictly increasing");
            prev = row.iter;
            let recomputed = row.l_int + cfg.beta * row.l_bound;
            assert_eq!(row.l_total.to_bits(), recomputed.to_bits());
            assert!(row.l_total.is_finite());
        }
    }

    #[test]
    fn collapsed_adversary_recovers_with_logged_events() {
        let problem = tiny_problem();
        let (u, v) = tiny_specs(2);
        let cfg = tiny_cfg(2);
        // start the adversary at essentially zero output
        let near_zero = NetworkParams::new(vec![1e-13; v.param_count()]);
        let out = train_with(
            &problem,
            &cfg,
            &u,
            &v,
            TrainOptions {
                initial_v: Some(&near_zero),
                exec: ExecMode::Sequential,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        assert!(
            out.events.iter().any(|e| matches!(e, TrainEvent::AdversaryReinit { .. })),
            "expected a reinit event, got {:?}",
            out.events
        );
        for row in &out.metrics.rows {
            assert!(row.l_total.is_finite());
        }
    }

    #[test]
    fn relative_l2_examples() {
        let truth = vec![1.0, 2.0, -1.0];
        assert_eq!(relative_l2(&truth, &truth).unwrap(), 0.0);
        let double: Vec<f64> = truth.iter().map(|t| 2.0 * t).collect();
        assert!((relative_l2(&double, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            relative_l2(&truth, &[0.0, 0.0, 0.0]),
            Err(FwanError::UndefinedMetric)
        ));
    }

    #[test]
    fn relative_l2_constant_offset_closed_form() {
        // pred = truth + 0.01 on a 101x101 grid of x^2 y^2 samples:
        // error = 0.01 * sqrt(N) / ||truth||
        let res = 101;
        let mut truth = Vec::with_capacity(res * res);
        for i in 0..res {
            for j in 0..res {
                let x = i as f64 / (res - 1) as f64;
                let y = j as f64 / (res - 1) as f64;
                truth.push(x * x * y * y);
            }
        }
        let pred: Vec<f64> = truth.iter().map(|t| t + 0.01).collect();
        let norm: f64 = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
        let expect = 0.01 * ((res * res) as f64).sqrt() / norm;
        let got = relative_l2(&pred, &truth).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn grid_eval_on_constant_fields() {
        // a zero network with output bias c is the constant field c
        let (u, _) = tiny_specs(2);
        let layout = u.layout();
        let make_const = |c: f64| {
            let mut p = NetworkParams::zeros(&u);
            p.as_mut_slice()[layout.out_b] = c;
            p
        };
        let problem = ProblemSpec::new(
            Rect::unit(2),
            FracOrder::new(0.5).unwrap(),
            ManufacturedSolution::Constant(2.0),
            0.0,
        )
        .unwrap();
        let exact = evaluate_grid(&u, &make_const(2.0), &problem, 11).unwrap();
        assert_eq!(exact.rel_l2, 0.0);
        assert_eq!(exact.points.len(), 121);
        let doubled = evaluate_grid(&u, &make_const(4.0), &problem, 11).unwrap();
        assert!((doubled.rel_l2 - 1.0).abs() < 1e-14);
        assert!(evaluate_grid(&u, &make_const(1.0), &problem, 1).is_err());
    }

    #[test]
    fn grid_includes_boundary_nodes() {
        let (u, _) = tiny_specs(2);
        let problem = tiny_problem();
        let p = init_params(&u, 3);
        let grid = evaluate_grid(&u, &p, &problem, 3).unwrap();
        assert_eq!(grid.points.len(), 9);
        assert!(grid.points.contains(&vec![0.0, 0.0]));
        assert!(grid.points.contains(&vec![1.0, 1.0]));
        assert!(grid.points.contains(&vec![0.5, 1.0]));
        // last axis fastest
        assert_eq!(grid.points[0], vec![0.0, 0.0]);
        assert_eq!(grid.points[1], vec![0.0, 0.5]);
        assert_eq!(grid.points[3], vec![0.5, 0.0]);
    }

    #[test]
    fn sweep_determinism_and_degenerate_aggregation() {
        let problem = tiny_problem();
        let (u, v) = tiny_specs(2);
        let cfg = tiny_cfg(2);
        let t1 =
            alpha_sweep(&problem, &[0.3, 0.7], &cfg, &u, &v, 1, ExecMode::Sequential).unwrap();
        let t2 =
            alpha_sweep(&problem, &[0.3, 0.7], &cfg, &u, &v, 1, ExecMode::Sequential).unwrap();
        assert_eq!(t1.cells.len(), 2);
        for (a, b) in t1.cells.iter().zip(&t2.cells) {
            assert_eq!(a.rel_err, b.rel_err);
        }
        // repetitions = 1 means aggregates equal the raw cells
        for (cell, agg) in t1.cells.iter().zip(&t1.aggregate) {
            assert_eq!(cell.alpha, agg.alpha);
            assert_eq!(cell.rel_err.unwrap(), agg.median);
            assert_eq!(cell.rel_err.unwrap(), agg.mean);
            assert_eq!(agg.failures, 0);
        }
    }
}
