//! Gradient checks of the full objective on tiny networks and batches:
//! both parameter gradients against central finite differences of the
//! loss value, plus the ascent sign property of the adversary step.

use fwan::fraccalc::{FracOrder, ManufacturedSolution};
use fwan::lossgrad::{evaluate, EvalRequest, ExecMode, USource};
use fwan::neural::{init_params, Activation, NetworkParams, NetworkSpec};
use fwan::problems::ProblemSpec;
use fwan::sampling::{make_batch, BatchSizes, CollocationBatch, Rect};
use fwan::weakform::ObjectiveConfig;

fn tiny_setup(
    n: usize,
    alpha: f64,
) -> (ProblemSpec, ObjectiveConfig, NetworkSpec, NetworkSpec, CollocationBatch) {
    let problem = ProblemSpec::new(
        Rect::unit(n),
        FracOrder::new(alpha).unwrap(),
        ManufacturedSolution::ProductOfSquares,
        0.0,
    )
    .unwrap();
    let cfg = ObjectiveConfig::uniform(n, 3.7).unwrap();
    let u_spec = NetworkSpec {
        input_dim: n,
        widths: vec![4, 4],
        activations: vec![Activation::Tanh, Activation::Sinh],
        conv_layer: Some(2),
        conv_kernel: 3,
    };
    let v_spec = NetworkSpec {
        input_dim: n,
        widths: vec![4, 4],
        activations: vec![Activation::Tanh, Activation::Softplus],
        conv_layer: None,
        conv_kernel: 3,
    };
    let batch = make_batch(
        &problem.domain,
        BatchSizes { m_interior: 8, m_boundary: 4.max(2 * n), n_inner: 4 },
        |x| problem.g(x),
        0.0,
        11,
        12,
        0,
    )
    .unwrap();
    (problem, cfg, u_spec, v_spec, batch)
}

fn loss_at(
    problem: &ProblemSpec,
    cfg: &ObjectiveConfig,
    u_spec: &NetworkSpec,
    u: &NetworkParams,
    v_spec: &NetworkSpec,
    v: &NetworkParams,
    batch: &CollocationBatch,
) -> f64 {
    evaluate(
        problem,
        cfg,
        USource::Net(u_spec, u),
        v_spec,
        v,
        batch,
        EvalRequest::default(),
        ExecMode::Sequential,
    )
    .unwrap()
    .breakdown
    .l_total
}

/// Acceptance: total-loss gradients match central finite differences
/// within relative 1e-4 on tiny nets and batches.
#[test]
fn total_loss_gradients_match_finite_differences() {
    for (n, alpha) in [(2usize, 0.5f64), (2, 0.8), (3, 0.4)] {
        let (problem, cfg, u_spec, v_spec, batch) = tiny_setup(n, alpha);
        let u0 = init_params(&u_spec, 5);
        let v0 = init_params(&v_spec, 6);

        let out = evaluate(
            &problem,
            &cfg,
            USource::Net(&u_spec, &u0),
            &v_spec,
            &v0,
            &batch,
            EvalRequest { grad_u: true, grad_v: true },
            ExecMode::Sequential,
        )
        .unwrap();
        let gu = out.grad_u.unwrap();
        let gv = out.grad_v.unwrap();

        let h = 1e-5;
        let mut worst_u = 0.0f64;
        for i in 0..u0.len() {
            let mut hi = u0.clone();
            hi.as_mut_slice()[i] += h;
            let mut lo = u0.clone();
            lo.as_mut_slice()[i] -= h;
            let fd = (loss_at(&problem, &cfg, &u_spec, &hi, &v_spec, &v0, &batch)
                - loss_at(&problem, &cfg, &u_spec, &lo, &v_spec, &v0, &batch))
                / (2.0 * h);
            let err = (gu[i] - fd).abs() / fd.abs().max(1.0);
            worst_u = worst_u.max(err);
        }
        assert!(worst_u < 1e-4, "n={n} alpha={alpha}: grad_u max rel err {worst_u}");

        let mut worst_v = 0.0f64;
        for i in 0..v0.len() {
            let mut hi = v0.clone();
            hi.as_mut_slice()[i] += h;
            let mut lo = v0.clone();
            lo.as_mut_slice()[i] -= h;
            let fd = (loss_at(&problem, &cfg, &u_spec, &u0, &v_spec, &hi, &batch)
                - loss_at(&problem, &cfg, &u_spec, &u0, &v_spec, &lo, &batch))
                / (2.0 * h);
            let err = (gv[i] - fd).abs() / fd.abs().max(1.0);
            worst_v = worst_v.max(err);
        }
        assert!(worst_v < 1e-4, "n={n} alpha={alpha}: grad_v max rel err {worst_v}");
        println!(
            "n={n} alpha={alpha}: grad_u rel err {worst_u:.2e}, grad_v rel err {worst_v:.2e}"
        );
    }
}

/// A small plain-gradient ascent step on the adversary must not decrease
/// the interior loss on a fixed batch.
#[test]
fn eta_ascent_does_not_decrease_interior_loss() {
    let (problem, cfg, u_spec, v_spec, batch) = tiny_setup(2, 0.6);
    let u0 = init_params(&u_spec, 7);
    let v0 = init_params(&v_spec, 8);
    let out = evaluate(
        &problem,
        &cfg,
        USource::Net(&u_spec, &u0),
        &v_spec,
        &v0,
        &batch,
        EvalRequest { grad_u: false, grad_v: true },
        ExecMode::Sequential,
    )
    .unwrap();
    let l_int_before = out.breakdown.l_int;
    let gv = out.grad_v.unwrap();
    // L_bound does not depend on eta, so dL/deta = dL_int/deta
    let tau = 1e-6;
    let mut v1 = v0.clone();
    for (p, g) in v1.as_mut_slice().iter_mut().zip(&gv) {
        *p += tau * g;
    }
    let after = evaluate(
        &problem,
        &cfg,
        USource::Net(&u_spec, &u0),
        &v_spec,
        &v1,
        &batch,
        EvalRequest::default(),
        ExecMode::Sequential,
    )
    .unwrap();
    assert!(
        after.breakdown.l_int >= l_int_before,
        "ascent step decreased L_int: {} -> {}",
        l_int_before,
        after.breakdown.l_int
    );
}
