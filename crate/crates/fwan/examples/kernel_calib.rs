//! Rough single-core throughput probe for the inner evaluation kernels.
//! Not part of the library; used to size the training fast path.

use std::time::Instant;

fn main() {
    let b = 64usize;
    let width = 20usize;

    // axpy-style layer kernel: Z[o,:] += W[o,i] * H[i,:]
    let w: Vec<f64> = (0..width * width).map(|i| (i as f64 * 0.001).sin()).collect();
    let h: Vec<f64> = (0..width * b).map(|i| (i as f64 * 0.01).cos()).collect();
    let mut z = vec![0.0f64; width * b];
    let reps = 20_000usize;
    let t = Instant::now();
    for _ in 0..reps {
        for o in 0..width {
            let zrow = &mut z[o * b..(o + 1) * b];
            for i in 0..width {
                let wi = w[o * width + i];
                let hrow = &h[i * b..(i + 1) * b];
                for (zc, hc) in zrow.iter_mut().zip(hrow) {
                    *zc += wi * hc;
                }
            }
        }
    }
    let dt = t.elapsed().as_secs_f64();
    let flops = (reps * width * width * b * 2) as f64;
    println!("axpy kernel: {:.2} GFLOP/s (checksum {})", flops / dt / 1e9, z[0]);

    // transcendental throughput
    let xs: Vec<f64> = (0..4096).map(|i| (i as f64 / 4096.0) * 4.0 - 2.0).collect();
    let mut acc = 0.0f64;
    let reps = 20_000usize;

    let t = Instant::now();
    for _ in 0..reps {
        for &x in &xs {
            acc += x.tanh();
        }
    }
    println!("tanh: {:.1} ns/el (acc {acc})", t.elapsed().as_secs_f64() / (reps * xs.len()) as f64 * 1e9);

    let t = Instant::now();
    for _ in 0..reps {
        for &x in &xs {
            acc += x.exp();
        }
    }
    println!("exp:  {:.1} ns/el (acc {acc})", t.elapsed().as_secs_f64() / (reps * xs.len()) as f64 * 1e9);

    let t = Instant::now();
    for _ in 0..reps {
        for &x in &xs {
            acc += x.sinh();
        }
    }
    println!("sinh: {:.1} ns/el (acc {acc})", t.elapsed().as_secs_f64() / (reps * xs.len()) as f64 * 1e9);

    let t = Instant::now();
    for _ in 0..reps {
        for &x in &xs {
            acc += x.abs().max(1e-30).ln_1p();
        }
    }
    println!("ln1p: {:.1} ns/el (acc {acc})", t.elapsed().as_secs_f64() / (reps * xs.len()) as f64 * 1e9);
}
