//! Scratch probe: iteration timing and error trajectory on a downscaled
//! 2-D run. Not part of the deliverable surface.

use fwan::lossgrad::ExecMode;
use fwan::problems::preset;
use fwan::training::{train_with, TrainOptions};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let m_i: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(600);
    let n_inner: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);

    let mut bundle = preset("ex2d_smooth").unwrap();
    bundle.train.max_outer_iters = iters;
    bundle.train.m_interior = m_i;
    bundle.train.n_inner = n_inner;
    bundle.train.eval_every = (iters / 20).max(1);
    bundle.train.deterministic = false;

    let t = Instant::now();
    let out = train_with(
        &bundle.problem,
        &bundle.train,
        &bundle.u_spec,
        &bundle.v_spec,
        TrainOptions { exec: ExecMode::Sequential, ..TrainOptions::default() },
    )
    .unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("total {dt:.1}s  ({:.3} s/iter)", dt / iters as f64);
    for row in &out.metrics.rows {
        println!(
            "iter {:5}  l_int {:10.4e}  l_bound {:10.4e}  rel_err {:8.5}",
            row.iter, row.l_int, row.l_bound, row.rel_l2_err
        );
    }
}
