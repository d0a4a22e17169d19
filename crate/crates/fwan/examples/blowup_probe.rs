//! Scratch probe: per-iteration magnitudes to find what diverges.

use fwan::lossgrad::{evaluate, EvalRequest, ExecMode, USource};
use fwan::neural::init_params;
use fwan::optim::{AdamState, Direction};
use fwan::problems::preset;
use fwan::sampling::{make_batch, BatchSizes};
use fwan::weakform::ObjectiveConfig;

fn mag(v: &[f64]) -> (f64, f64) {
    let mx = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    (mx, rms)
}

fn main() {
    let bundle = preset("ex2d_smooth").unwrap();
    let cfg = bundle.train;
    let problem = bundle.problem;
    let obj = ObjectiveConfig {
        beta: cfg.beta,
        p: problem.p.clone(),
        q: problem.q.clone(),
        squared_pairing: true,
    };
    let mut theta = init_params(&bundle.u_spec, cfg.seeds.init_u);
    let mut eta = init_params(&bundle.v_spec, cfg.seeds.init_v);
    let mut adam_u = AdamState::new(theta.len(), cfg.lr_u);
    let mut adam_v = AdamState::new(eta.len(), cfg.lr_v);
    let sizes = BatchSizes { m_interior: 600, m_boundary: 400, n_inner: 20 };

    let mut reinits = 0u64;
    for iter in 0..300u64 {
        let batch = make_batch(
            &problem.domain,
            sizes,
            |x| problem.g(x),
            0.0,
            cfg.seeds.sampling,
            cfg.seeds.noise,
            iter,
        )
        .unwrap();
        let out_u = evaluate(
            &problem,
            &obj,
            USource::Net(&bundle.u_spec, &theta),
            &bundle.v_spec,
            &eta,
            &batch,
            EvalRequest { grad_u: true, grad_v: false },
            ExecMode::Sequential,
        );
        let Ok(out_u) = out_u else {
            reinits += 1;
            eta = init_params(&bundle.v_spec, cfg.seeds.init_v + 1000 * reinits);
            adam_v = AdamState::new(eta.len(), cfg.lr_v);
            println!("iter {iter}: reinit v (u-step eval failed)");
            continue;
        };
        let bd = out_u.breakdown;
        let gu = out_u.grad_u.unwrap();
        adam_u.step(theta.as_mut_slice(), &gu, Direction::Descend).unwrap();

        let out_v = evaluate(
            &problem,
            &obj,
            USource::Net(&bundle.u_spec, &theta),
            &bundle.v_spec,
            &eta,
            &batch,
            EvalRequest { grad_u: false, grad_v: true },
            ExecMode::Sequential,
        );
        let Ok(out_v) = out_v else {
            reinits += 1;
            eta = init_params(&bundle.v_spec, cfg.seeds.init_v + 1000 * reinits);
            adam_v = AdamState::new(eta.len(), cfg.lr_v);
            println!("iter {iter}: reinit v (v-step eval failed)");
            continue;
        };
        if out_v.breakdown.v_norm2 > 1e6 {
            reinits += 1;
            eta = init_params(&bundle.v_spec, cfg.seeds.init_v + 1000 * reinits);
            adam_v = AdamState::new(eta.len(), cfg.lr_v);
            println!("iter {iter}: reinit v (V = {:.2e} exploded)", out_v.breakdown.v_norm2);
            continue;
        }
        let gv = out_v.grad_v.unwrap();
        adam_v.step(eta.as_mut_slice(), &gv, Direction::Ascend).unwrap();

        let (tmax, trms) = mag(theta.as_slice());
        let (emax, erms) = mag(eta.as_slice());
        let (gumax, _) = mag(&gu);
        let (gvmax, _) = mag(&gv);
        if iter % 20 == 0 || iter + 1 == 300 {
            let grid = fwan::training::evaluate_grid(&bundle.u_spec, &theta, &problem, 41).unwrap();
            println!(
                "iter {iter:3} pair {:9.2e} V {:9.2e} Lint {:9.2e} Lb {:9.2e} | th {tmax:7.3}/{trms:6.3} et {emax:8.2}/{erms:6.3} | gu {gumax:8.2e} gv {gvmax:8.2e} | rel {:8.5}",
                bd.pairing, bd.v_norm2, bd.l_int, bd.l_bound, grid.rel_l2
            );
        }
    }
}
