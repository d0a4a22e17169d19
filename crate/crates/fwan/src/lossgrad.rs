//! Production loss/gradient evaluation.
//!
//! The objective decomposes into per-point contributions that are linear
//! in per-evaluation network quantities:
//!
//!   pairing    P = s * sum_k [ sum_i coef_ki * g_ki - f_k * vm_k ]
//!   norm       V = s * sum_k vm_k^2
//!   L_int      = P^2 / V          (or |P| / V)
//!   L_bound    = (1/M_B) sum_b (u_b - g_b)^2
//!   L_total    = L_int + beta * L_bound
//!
//! with s = |domain| / M_I, coef_ki the weighted inner quadrature of
//! kernel * du/dw, g_ki the masked adversary's spatial derivative, and
//! vm_k the masked adversary value. Each network quantity and its
//! parameter gradient comes from the batched evaluator; the chain rule
//! through the scalar combinations above is applied by hand, so gradients
//! are exact (the tests pin them against the one-tape weak-form route).
//!
//! Points are processed in fixed-size chunks. Chunk results are reduced
//! in index order whether the chunks ran sequentially or on a thread
//! pool, so results are bit-identical across thread counts and between
//! the `parallel` feature being on or off.

use crate::error::{FwanError, Result};
use crate::fraccalc::{KernelEval, ManufacturedSolution};
use crate::neural::batch::BatchEvaluator;
use crate::neural::{NetworkParams, NetworkSpec};
use crate::problems::ProblemSpec;
use crate::sampling::CollocationBatch;
use crate::weakform::{
    zero_trace_mask, zero_trace_mask_partial, LossBreakdown, ObjectiveConfig, VNORM_CAP,
    VNORM_FLOOR,
};

/// Interior points per work item; fixed so the floating-point reduction
/// order never depends on the thread count.
const CHUNK: usize = 64;

/// How the per-chunk work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Rayon thread pool when the `parallel` feature is enabled; falls
    /// back to sequential otherwise.
    #[default]
    Parallel,
}

/// The solution field entering the interior terms: the trained network, or
/// the exact manufactured solution (consistency checks).
#[derive(Clone, Copy)]
pub enum USource<'a> {
    Net(&'a NetworkSpec, &'a NetworkParams),
    Exact(&'a ManufacturedSolution),
}

/// Which gradients to assemble.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalRequest {
    pub grad_u: bool,
    pub grad_v: bool,
}

pub struct EvalOutput {
    pub breakdown: LossBreakdown,
    pub grad_u: Option<Vec<f64>>,
    pub grad_v: Option<Vec<f64>>,
    pub skipped_inner: usize,
}

struct InteriorChunk {
    p_sum: f64,
    v_sum: f64,
    grad_p_u: Option<Vec<f64>>,
    grad_p_v: Option<Vec<f64>>,
    grad_v_v: Option<Vec<f64>>,
    skipped: usize,
}

struct BoundaryChunk {
    sq_sum: f64,
    grad_u: Option<Vec<f64>>,
}

/// Evaluate the loss breakdown and any requested gradients on one batch.
pub fn evaluate(
    problem: &ProblemSpec,
    cfg: &ObjectiveConfig,
    u: USource,
    v_spec: &NetworkSpec,
    v_params: &NetworkParams,
    batch: &CollocationBatch,
    req: EvalRequest,
    mode: ExecMode,
) -> Result<EvalOutput> {
    let n = problem.dim();
    let m_i = batch.interior.len();
    if m_i == 0 || batch.boundary.is_empty() {
        return Err(FwanError::Usage("batch must contain interior and boundary points".into()));
    }
    if cfg.p.len() != n || cfg.q.len() != n {
        return Err(FwanError::Usage("objective weights do not match the problem dimension".into()));
    }
    if req.grad_u && matches!(u, USource::Exact(_)) {
        return Err(FwanError::Usage("cannot differentiate the exact-solution adapter".into()));
    }

    // analytic source term per interior point
    let f_values: Vec<f64> = batch
        .interior
        .iter()
        .map(|x| problem.rhs_with_weights(&cfg.p, &cfg.q, x))
        .collect::<Result<_>>()?;

    let u_len = match u {
        USource::Net(spec, _) => spec.param_count(),
        USource::Exact(_) => 0,
    };
    let v_len = v_spec.param_count();

    let interior_job = |range: std::ops::Range<usize>| -> Result<InteriorChunk> {
        interior_chunk(problem, cfg, u, v_spec, v_params, batch, &f_values, req, range)
    };
    let ranges: Vec<std::ops::Range<usize>> =
        (0..m_i).step_by(CHUNK).map(|s| s..(s + CHUNK).min(m_i)).collect();
    let chunks: Vec<InteriorChunk> = run_jobs(mode, ranges, interior_job)?;

    // ordered reduction over chunks
    let mut p_raw = 0.0;
    let mut v_raw = 0.0;
    let mut skipped = 0usize;
    let mut gp_u = req.grad_u.then(|| vec![0.0; u_len]);
    let mut gp_v = req.grad_v.then(|| vec![0.0; v_len]);
    let mut gv_v = req.grad_v.then(|| vec![0.0; v_len]);
    for c in chunks {
        p_raw += c.p_sum;
        v_raw += c.v_sum;
        skipped += c.skipped;
        if let (Some(acc), Some(part)) = (gp_u.as_mut(), c.grad_p_u.as_ref()) {
            add_assign(acc, part);
        }
        if let (Some(acc), Some(part)) = (gp_v.as_mut(), c.grad_p_v.as_ref()) {
            add_assign(acc, part);
        }
        if let (Some(acc), Some(part)) = (gv_v.as_mut(), c.grad_v_v.as_ref()) {
            add_assign(acc, part);
        }
    }
    let scale = problem.domain.volume() / m_i as f64;
    let pairing = scale * p_raw;
    let v_norm2 = scale * v_raw;
    // collapse, explosion and overflow all make the adversary unusable;
    // the training loop responds by reinitializing it
    if !v_norm2.is_finite() || v_norm2 <= VNORM_FLOOR || v_norm2 > VNORM_CAP {
        return Err(FwanError::DegenerateAdversary { v_norm2, floor: VNORM_FLOOR });
    }

    // boundary term (only differentiable in u)
    let m_b = batch.boundary.len();
    let need_bgrad = req.grad_u;
    let branges: Vec<std::ops::Range<usize>> =
        (0..m_b).step_by(4 * CHUNK).map(|s| s..(s + 4 * CHUNK).min(m_b)).collect();
    let bchunks: Vec<BoundaryChunk> = run_jobs(mode, branges, |range| {
        boundary_chunk(u, batch, need_bgrad, range)
    })?;
    let mut b_sq = 0.0;
    let mut gb_u = need_bgrad.then(|| vec![0.0; u_len]);
    for c in bchunks {
        b_sq += c.sq_sum;
        if let (Some(acc), Some(part)) = (gb_u.as_mut(), c.grad_u.as_ref()) {
            add_assign(acc, part);
        }
    }
    let l_bound = b_sq / m_b as f64;

    let l_int = if cfg.squared_pairing {
        pairing * pairing / v_norm2
    } else {
        pairing.abs() / v_norm2
    };
    let l_total = l_int + cfg.beta * l_bound;

    // chain rule through the scalar head:
    //   dL/dP = 2P/V (squared) or sign(P)/V
    //   dL/dV = -P^2/V^2        or -|P|/V^2
    let dl_dp = if cfg.squared_pairing {
        2.0 * pairing / v_norm2
    } else {
        pairing.signum() / v_norm2
    };
    let dl_dv = -l_int / v_norm2;

    let grad_u = gp_u.map(|gp| {
        let mut g = gp;
        for (gi, bi) in g.iter_mut().zip(gb_u.as_ref().expect("boundary grad present")) {
            *gi = dl_dp * scale * *gi + cfg.beta * bi;
        }
        g
    });
    let grad_v = gp_v.map(|gp| {
        let gv = gv_v.as_ref().expect("norm grad present");
        let mut g = gp;
        for (gi, vi) in g.iter_mut().zip(gv) {
            *gi = dl_dp * scale * *gi + dl_dv * scale * vi;
        }
        g
    });
    // a finite norm with overflowing derivatives still means the adversary
    // left the trainable region
    if let Some(gv) = grad_v.as_ref() {
        if gv.iter().any(|g| !g.is_finite()) {
            return Err(FwanError::DegenerateAdversary { v_norm2, floor: VNORM_FLOOR });
        }
    }

    Ok(EvalOutput {
        breakdown: LossBreakdown { pairing, v_norm2, l_int, l_bound, l_total },
        grad_u,
        grad_v,
        skipped_inner: skipped,
    })
}

fn add_assign(acc: &mut [f64], part: &[f64]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

#[cfg(feature = "parallel")]
fn run_jobs<R: Send, F>(mode: ExecMode, ranges: Vec<std::ops::Range<usize>>, job: F) -> Result<Vec<R>>
where
    F: Fn(std::ops::Range<usize>) -> Result<R> + Send + Sync,
{
    use rayon::prelude::*;
    match mode {
        ExecMode::Sequential => ranges.into_iter().map(job).collect(),
        ExecMode::Parallel => ranges.into_par_iter().map(job).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<R: Send, F>(_mode: ExecMode, ranges: Vec<std::ops::Range<usize>>, job: F) -> Result<Vec<R>>
where
    F: Fn(std::ops::Range<usize>) -> Result<R> + Send + Sync,
{
    ranges.into_iter().map(job).collect()
}

#[allow(clippy::too_many_arguments)]
fn interior_chunk(
    problem: &ProblemSpec,
    cfg: &ObjectiveConfig,
    u: USource,
    v_spec: &NetworkSpec,
    v_params: &NetworkParams,
    batch: &CollocationBatch,
    f_values: &[f64],
    req: EvalRequest,
    range: std::ops::Range<usize>,
) -> Result<InteriorChunk> {
    let n = problem.dim();
    let domain = &problem.domain;
    let kernel = KernelEval::new(problem.alpha);
    let dirs: Vec<usize> = (0..n).collect();

    let mut v_ev = BatchEvaluator::new(v_spec);
    let mut u_ev = match u {
        USource::Net(spec, _) => Some(BatchEvaluator::new(spec)),
        USource::Exact(_) => None,
    };

    let mut out = InteriorChunk {
        p_sum: 0.0,
        v_sum: 0.0,
        grad_p_u: req.grad_u.then(|| vec![0.0; u_ev.as_ref().map_or(0, |e| e.spec().param_count())]),
        grad_p_v: req.grad_v.then(|| vec![0.0; v_spec.param_count()]),
        grad_v_v: req.grad_v.then(|| vec![0.0; v_spec.param_count()]),
        skipped: 0,
    };

    // scratch reused across points
    let mut xmat: Vec<f64> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut useeds: Vec<f64> = Vec::new();
    let mut coef = vec![0.0f64; n];
    let mut mask_partials = vec![0.0f64; n];

    for k in range {
        let x = &batch.interior[k];
        let mask = zero_trace_mask(domain, x);
        for i in 0..n {
            mask_partials[i] = zero_trace_mask_partial(domain, x, i);
        }

        v_ev.forward(v_params, x, 1, &dirs);
        let v_raw = v_ev.y()[0];
        let vm = v_raw * mask;
        out.v_sum += vm * vm;

        let mut point_term = -f_values[k] * vm;
        for i in 0..n {
            let pair = &batch.inner[k][i];
            let nl = pair.left.nodes.len();
            let nr = pair.right.nodes.len();
            if nl == 0 {
                out.skipped += 1;
            }
            if nr == 0 {
                out.skipped += 1;
            }
            let b = nl + nr;
            if b == 0 {
                coef[i] = 0.0;
                continue;
            }

            // columns: left nodes then right nodes, with the operator
            // weight and quadrature weight folded into each coefficient
            coeffs.clear();
            coeffs.extend(
                pair.left
                    .nodes
                    .iter()
                    .map(|&w| cfg.p[i] * pair.left.weight * kernel.left(x[i], w)),
            );
            coeffs.extend(
                pair.right
                    .nodes
                    .iter()
                    .map(|&w| cfg.q[i] * pair.right.weight * kernel.right(x[i], w)),
            );

            let g_i = {
                let dv = v_ev.ydot(i)[0];
                dv * mask + v_raw * mask_partials[i]
            };

            match u {
                USource::Exact(sol) => {
                    let mut scratch = x.clone();
                    let mut a = 0.0;
                    for (j, &w) in pair.left.nodes.iter().chain(&pair.right.nodes).enumerate() {
                        scratch[i] = w;
                        a += coeffs[j] * sol.partial(i, &scratch);
                    }
                    coef[i] = a;
                }
                USource::Net(_, params) => {
                    let ev = u_ev.as_mut().expect("u evaluator present");
                    // feature-major input block: row f holds coordinate f
                    // of every column
                    xmat.clear();
                    xmat.resize(n * b, 0.0);
                    for f in 0..n {
                        let row = &mut xmat[f * b..(f + 1) * b];
                        if f == i {
                            for (c, &w) in pair.left.nodes.iter().chain(&pair.right.nodes).enumerate()
                            {
                                row[c] = w;
                            }
                        } else {
                            row.fill(x[f]);
                        }
                    }
                    ev.forward(params, &xmat, b, &[i]);
                    let tans = ev.ydot(0);
                    let mut a = 0.0;
                    for (c, t) in coeffs.iter().zip(tans) {
                        a += c * t;
                    }
                    coef[i] = a;

                    if let Some(grad) = out.grad_p_u.as_mut() {
                        // d(point_term)/dtheta = g_i * sum_j coeff_j dT_j
                        useeds.clear();
                        useeds.extend(coeffs.iter().map(|c| c * g_i));
                        ev.reverse(params, None, &[Some(&useeds)], grad);
                    }
                }
            }
            point_term += coef[i] * g_i;
        }
        out.p_sum += point_term;

        if req.grad_v {
            // pairing functional: d/draw = sum_i coef_i dmask_i - f mask,
            // per-channel d/d(dv_i) = coef_i * mask
            let seed_y = [coef
                .iter()
                .zip(&mask_partials)
                .map(|(c, mp)| c * mp)
                .sum::<f64>()
                - f_values[k] * mask];
            let seed_rows: Vec<Vec<f64>> = (0..n).map(|i| vec![coef[i] * mask]).collect();
            let seeds: Vec<Option<&[f64]>> = seed_rows.iter().map(|s| Some(s.as_slice())).collect();
            v_ev.reverse(v_params, Some(&seed_y), &seeds, out.grad_p_v.as_mut().expect("grad"));

            // norm functional: d(vm^2)/draw = 2 raw mask^2
            let seed_norm = [2.0 * v_raw * mask * mask];
            let none_seeds: Vec<Option<&[f64]>> = (0..n).map(|_| None).collect();
            v_ev.reverse(
                v_params,
                Some(&seed_norm),
                &none_seeds,
                out.grad_v_v.as_mut().expect("grad"),
            );
        }
    }
    Ok(out)
}

fn boundary_chunk(
    u: USource,
    batch: &CollocationBatch,
    need_grad: bool,
    range: std::ops::Range<usize>,
) -> Result<BoundaryChunk> {
    let m_b = batch.boundary.len();
    let pts = &batch.boundary[range.start..range.end];
    let b = pts.len();
    match u {
        USource::Exact(sol) => {
            let sq_sum = pts
                .iter()
                .map(|bp| {
                    let d = sol.value(&bp.coords) - bp.g;
                    d * d
                })
                .sum();
            Ok(BoundaryChunk { sq_sum, grad_u: None })
        }
        USource::Net(spec, params) => {
            let n = spec.input_dim;
            let mut ev = BatchEvaluator::new(spec);
            let mut xmat = vec![0.0f64; n * b];
            for (c, bp) in pts.iter().enumerate() {
                for f in 0..n {
                    xmat[f * b + c] = bp.coords[f];
                }
            }
            ev.forward(params, &xmat, b, &[]);
            let mut sq_sum = 0.0;
            let mut seeds = Vec::with_capacity(b);
            for (c, bp) in pts.iter().enumerate() {
                let d = ev.y()[c] - bp.g;
                sq_sum += d * d;
                seeds.push(2.0 * d / m_b as f64);
            }
            let grad_u = if need_grad {
                let mut g = vec![0.0; spec.param_count()];
                ev.reverse(params, Some(&seeds), &[], &mut g);
                Some(g)
            } else {
                None
            };
            Ok(BoundaryChunk { sq_sum, grad_u })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::FracOrder;
    use crate::neural::init_params;
    use crate::sampling::{make_batch, BatchSizes, Rect};
    use crate::weakform::build_objective;

    fn tiny_problem(n: usize, alpha: f64) -> ProblemSpec {
        ProblemSpec::new(
            Rect::unit(n),
            FracOrder::new(alpha).unwrap(),
            ManufacturedSolution::ProductOfSquares,
            0.0,
        )
        .unwrap()
    }

    fn batch_for(problem: &ProblemSpec, m_i: usize, m_b: usize, n_in: usize, seed: u64) -> CollocationBatch {
        make_batch(
            &problem.domain,
            BatchSizes { m_interior: m_i, m_boundary: m_b, n_inner: n_in },
            |x| problem.g(x),
            problem.noise_delta,
            seed,
            seed + 1000,
            0,
        )
        .unwrap()
    }

    /// The fast path must agree with the one-tape weak-form route on both
    /// loss values and both gradients.
    #[test]
    fn fast_path_matches_tape_objective() {
        for (n, alpha, seed) in [(2usize, 0.5f64, 7u64), (3, 0.3, 8), (2, 0.8, 9)] {
            let problem = tiny_problem(n, alpha);
            let cfg = ObjectiveConfig::uniform(n, 100.0).unwrap();
            let batch = batch_for(&problem, 11, 2 * n + 2, 4, seed);

            let u_spec = NetworkSpec {
                input_dim: n,
                widths: vec![4, 4],
                activations: vec![crate::neural::Activation::Tanh, crate::neural::Activation::Sinh],
                conv_layer: Some(2),
                conv_kernel: 3,
            };
            let v_spec = NetworkSpec {
                input_dim: n,
                widths: vec![5, 5],
                activations: vec![
                    crate::neural::Activation::Tanh,
                    crate::neural::Activation::Softplus,
                ],
                conv_layer: None,
                conv_kernel: 3,
            };
            let u_params = init_params(&u_spec, seed * 3);
            let v_params = init_params(&v_spec, seed * 3 + 1);

            let out = evaluate(
                &problem,
                &cfg,
                USource::Net(&u_spec, &u_params),
                &v_spec,
                &v_params,
                &batch,
                EvalRequest { grad_u: true, grad_v: true },
                ExecMode::Sequential,
            )
            .unwrap();

            let f_vals: Vec<f64> = batch
                .interior
                .iter()
                .map(|x| problem.rhs(x).unwrap())
                .collect();
            let obj = build_objective(
                &u_spec,
                &u_params,
                &v_spec,
                &v_params,
                &batch,
                &problem.domain,
                problem.alpha,
                &f_vals,
                &cfg,
            )
            .unwrap();
            let bd = obj.breakdown();
            let (gu_tape, gv_tape) = obj.gradients().unwrap();

            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
            assert!(rel(out.breakdown.pairing, bd.pairing) < 1e-11, "pairing");
            assert!(rel(out.breakdown.v_norm2, bd.v_norm2) < 1e-12, "vnorm");
            assert!(rel(out.breakdown.l_int, bd.l_int) < 1e-10, "l_int");
            assert!(rel(out.breakdown.l_bound, bd.l_bound) < 1e-12, "l_bound");
            assert!(rel(out.breakdown.l_total, bd.l_total) < 1e-10, "l_total");

            let gu = out.grad_u.unwrap();
            let gmax = gu_tape.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-9);
            for (a, b) in gu.iter().zip(&gu_tape) {
                assert!((a - b).abs() < 1e-9 * gmax, "grad_u {a} vs {b}");
            }
            let gv = out.grad_v.unwrap();
            let gmax = gv_tape.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-9);
            for (a, b) in gv.iter().zip(&gv_tape) {
                assert!((a - b).abs() < 1e-9 * gmax, "grad_v {a} vs {b}");
            }
        }
    }

    /// Sequential and parallel execution share the chunking and reduction
    /// order, so their outputs are bit-identical.
    #[test]
    fn parallel_matches_sequential_bitwise() {
        let problem = tiny_problem(2, 0.6);
        let cfg = ObjectiveConfig::uniform(2, 1e3).unwrap();
        let batch = batch_for(&problem, 150, 16, 6, 42);
        let u_spec = NetworkSpec::default_u(2);
        let v_spec = NetworkSpec::default_v(2);
        let u_params = init_params(&u_spec, 1);
        let v_params = init_params(&v_spec, 2);

        let run = |mode| {
            evaluate(
                &problem,
                &cfg,
                USource::Net(&u_spec, &u_params),
                &v_spec,
                &v_params,
                &batch,
                EvalRequest { grad_u: true, grad_v: true },
                mode,
            )
            .unwrap()
        };
        let a = run(ExecMode::Sequential);
        let b = run(ExecMode::Parallel);
        assert_eq!(a.breakdown.l_total.to_bits(), b.breakdown.l_total.to_bits());
        assert_eq!(a.breakdown.pairing.to_bits(), b.breakdown.pairing.to_bits());
        for (x, y) in a.grad_u.unwrap().iter().zip(b.grad_u.unwrap().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.grad_v.unwrap().iter().zip(b.grad_v.unwrap().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn degenerate_adversary_is_reported() {
        let problem = tiny_problem(2, 0.5);
        let cfg = ObjectiveConfig::uniform(2, 1.0).unwrap();
        let batch = batch_for(&problem, 10, 6, 4, 3);
        let u_spec = NetworkSpec::default_u(2);
        let v_spec = NetworkSpec::default_v(2);
        let u_params = init_params(&u_spec, 1);
        let v_params = NetworkParams::zeros(&v_spec);
        let err = evaluate(
            &problem,
            &cfg,
            USource::Net(&u_spec, &u_params),
            &v_spec,
            &v_params,
            &batch,
            EvalRequest::default(),
            ExecMode::Sequential,
        );
        assert!(matches!(err, Err(FwanError::DegenerateAdversary { .. })));
    }

    #[test]
    fn exact_solution_adapter_rejects_gradient_requests() {
        let problem = tiny_problem(2, 0.5);
        let cfg = ObjectiveConfig::uniform(2, 1.0).unwrap();
        let batch = batch_for(&problem, 6, 6, 3, 3);
        let v_spec = NetworkSpec::default_v(2);
        let v_params = init_params(&v_spec, 2);
        let sol = ManufacturedSolution::ProductOfSquares;
        let err = evaluate(
            &problem,
            &cfg,
            USource::Exact(&sol),
            &v_spec,
            &v_params,
            &batch,
            EvalRequest { grad_u: true, grad_v: false },
            ExecMode::Sequential,
        );
        assert!(matches!(err, Err(FwanError::Usage(_))));
    }
}
