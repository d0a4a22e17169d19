//! Batched network evaluation with tangent channels and a hand-derived
//! reverse pass.
//!
//! The training loop needs, per collocation point, the network value, its
//! spatial derivatives, and parameter gradients of weighted sums of those
//! quantities — across hundreds of thousands of evaluation points per
//! iteration. Recording each evaluation on a scalar tape is exact but far
//! too slow, so this evaluator propagates whole batches (activations stored
//! row-major, one row per feature, one column per point) and differentiates
//! the same computation with explicit layer rules. Unit tests pin it
//! against the tape path.
//!
//! Tangent channels: each channel carries d/dx_k for one input coordinate,
//! seeded as a unit vector shared by every column. Reverse accepts one
//! adjoint seed per column for the value output and for each tangent
//! output, and accumulates parameter gradients of the seeded sum.

use crate::fmath;
use crate::neural::{Activation, NetworkParams, NetworkSpec, ParamLayout};

/// Most tangent channels ever needed: one per spatial coordinate.
pub(crate) const MAX_CHANNELS: usize = 3;

pub(crate) struct BatchEvaluator {
    spec: NetworkSpec,
    layout: ParamLayout,
    b: usize,
    nch: usize,
    dirs: [usize; MAX_CHANNELS],
    x: Vec<f64>,
    /// Post-activation features per hidden layer.
    h: Vec<Vec<f64>>,
    /// Activation slope act'(z) per hidden layer.
    aux: Vec<Vec<f64>>,
    /// Pre-activation tangents, per layer per channel.
    zdot: Vec<Vec<Vec<f64>>>,
    /// Post-activation tangents, per layer per channel.
    hdot: Vec<Vec<Vec<f64>>>,
    conv_out: Vec<f64>,
    conv_dot: Vec<Vec<f64>>,
    y: Vec<f64>,
    ydot: Vec<Vec<f64>>,
    // reverse-pass scratch
    dh: Vec<f64>,
    dh_next: Vec<f64>,
    dz: Vec<f64>,
    dhdot: Vec<Vec<f64>>,
    dhdot_next: Vec<Vec<f64>>,
    dzdot: Vec<Vec<f64>>,
}

#[inline]
fn ensure(buf: &mut Vec<f64>, len: usize) {
    if buf.len() < len {
        buf.resize(len, 0.0);
    }
}

/// z_row += w * h_row
#[inline]
fn axpy(z: &mut [f64], w: f64, h: &[f64]) {
    for (zc, hc) in z.iter_mut().zip(h) {
        *zc += w * hc;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BatchEvaluator {
    pub fn new(spec: &NetworkSpec) -> Self {
        let layout = spec.layout();
        let nl = spec.widths.len();
        BatchEvaluator {
            spec: spec.clone(),
            layout,
            b: 0,
            nch: 0,
            dirs: [0; MAX_CHANNELS],
            x: Vec::new(),
            h: vec![Vec::new(); nl],
            aux: vec![Vec::new(); nl],
            zdot: vec![vec![Vec::new(); MAX_CHANNELS]; nl],
            hdot: vec![vec![Vec::new(); MAX_CHANNELS]; nl],
            conv_out: Vec::new(),
            conv_dot: vec![Vec::new(); MAX_CHANNELS],
            y: Vec::new(),
            ydot: vec![Vec::new(); MAX_CHANNELS],
            dh: Vec::new(),
            dh_next: Vec::new(),
            dz: Vec::new(),
            dhdot: vec![Vec::new(); MAX_CHANNELS],
            dhdot_next: vec![Vec::new(); MAX_CHANNELS],
            dzdot: vec![Vec::new(); MAX_CHANNELS],
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y[..self.b]
    }

    #[inline]
    pub fn ydot(&self, ch: usize) -> &[f64] {
        &self.ydot[ch][..self.b]
    }

    /// Forward pass over `b` columns. `x` is feature-major (`x[f*b + col]`);
    /// `dirs` lists the input coordinate differentiated by each tangent
    /// channel. Stores everything the reverse pass needs.
    pub fn forward(&mut self, params: &NetworkParams, x: &[f64], b: usize, dirs: &[usize]) {
        let p = params.as_slice();
        let n = self.spec.input_dim;
        assert_eq!(p.len(), self.layout.total, "parameter length mismatch");
        assert_eq!(x.len(), n * b, "input block size mismatch");
        assert!(dirs.len() <= MAX_CHANNELS);
        assert!(dirs.iter().all(|&d| d < n), "tangent direction out of range");
        self.b = b;
        self.nch = dirs.len();
        self.dirs[..dirs.len()].copy_from_slice(dirs);
        ensure(&mut self.x, n * b);
        self.x[..n * b].copy_from_slice(x);

        let nl = self.spec.widths.len();
        for l in 0..nl {
            let span = self.layout.layers[l].clone();
            let (in_w, out_w) = (span.in_dim, span.out_dim);
            ensure(&mut self.h[l], out_w * b);
            ensure(&mut self.aux[l], out_w * b);
            for t in 0..self.nch {
                ensure(&mut self.zdot[l][t], out_w * b);
                ensure(&mut self.hdot[l][t], out_w * b);
            }

            // z = W h_prev + bias, written into h[l] then activated in place
            {
                let w = &p[span.w.clone()];
                let bias = &p[span.b.clone()];
                let (prev_layers, cur) = self.h.split_at_mut(l);
                let h_cur = &mut cur[0];
                let h_prev: &[f64] = if l == 0 {
                    &self.x
                } else if self.spec.conv_layer == Some(l) {
                    &self.conv_out
                } else {
                    &prev_layers[l - 1]
                };
                for o in 0..out_w {
                    let z_row = &mut h_cur[o * b..(o + 1) * b];
                    z_row.fill(bias[o]);
                    for i in 0..in_w {
                        axpy(z_row, w[o * in_w + i], &h_prev[i * b..(i + 1) * b]);
                    }
                }
                // tangent pre-activations
                for t in 0..self.nch {
                    for o in 0..out_w {
                        let zd_row = &mut self.zdot[l][t][o * b..(o + 1) * b];
                        if l == 0 {
                            // input tangent is the unit vector e_dir
                            zd_row.fill(w[o * in_w + self.dirs[t]]);
                        } else {
                            zd_row.fill(0.0);
                            let prev: &Vec<f64> = if self.spec.conv_layer == Some(l) {
                                &self.conv_dot[t]
                            } else {
                                &self.hdot[l - 1][t]
                            };
                            for i in 0..in_w {
                                axpy(zd_row, w[o * in_w + i], &prev[i * b..(i + 1) * b]);
                            }
                        }
                    }
                }
            }

            // activation with slope: h = act(z), aux = act'(z)
            activate(self.spec.activations[l], &mut self.h[l][..out_w * b], &mut self.aux[l][..out_w * b]);
            for t in 0..self.nch {
                let (hd, zd, aux) = (&mut self.hdot[l][t], &self.zdot[l][t], &self.aux[l]);
                for idx in 0..out_w * b {
                    hd[idx] = aux[idx] * zd[idx];
                }
            }

            // optional convolution over the feature axis
            if self.spec.conv_layer == Some(l + 1) {
                let k = &p[self.layout.conv.clone().expect("conv span")];
                ensure(&mut self.conv_out, out_w * b);
                conv_rows(k, &self.h[l], &mut self.conv_out, out_w, b);
                for t in 0..self.nch {
                    ensure(&mut self.conv_dot[t], out_w * b);
                    conv_rows(k, &self.hdot[l][t], &mut self.conv_dot[t], out_w, b);
                }
            }
        }

        // affine output layer
        let out_in = *self.spec.widths.last().expect("non-empty widths");
        let last_is_conv = self.spec.conv_layer == Some(nl);
        ensure(&mut self.y, b);
        let w_out = &p[self.layout.out_w.clone()];
        self.y[..b].fill(p[self.layout.out_b]);
        for i in 0..out_in {
            let h_row = if last_is_conv {
                &self.conv_out[i * b..(i + 1) * b]
            } else {
                &self.h[nl - 1][i * b..(i + 1) * b]
            };
            axpy(&mut self.y[..b], w_out[i], h_row);
        }
        for t in 0..self.nch {
            ensure(&mut self.ydot[t], b);
            self.ydot[t][..b].fill(0.0);
            for i in 0..out_in {
                let hd_row = if last_is_conv {
                    &self.conv_dot[t][i * b..(i + 1) * b]
                } else {
                    &self.hdot[nl - 1][t][i * b..(i + 1) * b]
                };
                axpy(&mut self.ydot[t][..b], w_out[i], hd_row);
            }
        }
    }

    /// Reverse pass for the scalar functional
    /// `S = sum_col seed_y[col] * y[col] + sum_t sum_col seed_ydot[t][col] * ydot_t[col]`,
    /// accumulating dS/dparams into `grad`. Must follow a `forward` call.
    pub fn reverse(
        &mut self,
        params: &NetworkParams,
        seed_y: Option<&[f64]>,
        seed_ydot: &[Option<&[f64]>],
        grad: &mut [f64],
    ) {
        let p = params.as_slice();
        let b = self.b;
        let nch = self.nch;
        assert_eq!(grad.len(), self.layout.total, "gradient length mismatch");
        assert_eq!(seed_ydot.len(), nch, "one tangent seed slot per channel");
        let nl = self.spec.widths.len();
        let out_in = *self.spec.widths.last().expect("non-empty widths");
        let last_is_conv = self.spec.conv_layer == Some(nl);

        // output layer: d h_last = w_out * dy ; dW_out += dy . rows
        ensure(&mut self.dh, out_in * b);
        self.dh[..out_in * b].fill(0.0);
        for t in 0..nch {
            ensure(&mut self.dhdot[t], out_in * b);
            self.dhdot[t][..out_in * b].fill(0.0);
        }
        let w_out = &p[self.layout.out_w.clone()];
        if let Some(sy) = seed_y {
            assert_eq!(sy.len(), b);
            for i in 0..out_in {
                let h_row = if last_is_conv {
                    &self.conv_out[i * b..(i + 1) * b]
                } else {
                    &self.h[nl - 1][i * b..(i + 1) * b]
                };
                grad[self.layout.out_w.start + i] += dot(sy, h_row);
                axpy(&mut self.dh[i * b..(i + 1) * b], w_out[i], sy);
            }
            grad[self.layout.out_b] += sy.iter().sum::<f64>();
        }
        for t in 0..nch {
            if let Some(st) = seed_ydot[t] {
                assert_eq!(st.len(), b);
                for i in 0..out_in {
                    let hd_row = if last_is_conv {
                        &self.conv_dot[t][i * b..(i + 1) * b]
                    } else {
                        &self.hdot[nl - 1][t][i * b..(i + 1) * b]
                    };
                    grad[self.layout.out_w.start + i] += dot(st, hd_row);
                    axpy(&mut self.dhdot[t][i * b..(i + 1) * b], w_out[i], st);
                }
            }
        }

        // hidden layers, last to first; dh/dhdot hold adjoints of the
        // layer's *post-conv* output entering this step
        for l in (0..nl).rev() {
            let span = self.layout.layers[l].clone();
            let (in_w, out_w) = (span.in_dim, span.out_dim);

            // undo the convolution if this layer carries one
            if self.spec.conv_layer == Some(l + 1) {
                let conv_span = self.layout.conv.clone().expect("conv span");
                let k = &p[conv_span.clone()];
                ensure(&mut self.dz, out_w * b); // reuse dz as scratch for d(post-act)
                conv_rows_adjoint(k, &self.dh[..out_w * b], &mut self.dz, out_w, b);
                for (d, gk) in grad[conv_span.clone()].iter_mut().enumerate() {
                    *gk += conv_kernel_grad(d, self.spec.conv_kernel, &self.dh, &self.h[l], out_w, b);
                }
                self.dh[..out_w * b].copy_from_slice(&self.dz[..out_w * b]);
                for t in 0..nch {
                    conv_rows_adjoint(k, &self.dhdot[t][..out_w * b], &mut self.dz, out_w, b);
                    for (d, gk) in grad[conv_span.clone()].iter_mut().enumerate() {
                        *gk += conv_kernel_grad(
                            d,
                            self.spec.conv_kernel,
                            &self.dhdot[t],
                            &self.hdot[l][t],
                            out_w,
                            b,
                        );
                    }
                    self.dhdot[t][..out_w * b].copy_from_slice(&self.dz[..out_w * b]);
                }
            }

            // through the activation:
            //   dz    = act' . dh + act'' . sum_t zdot_t . dhdot_t
            //   dzdot = act' . dhdot
            ensure(&mut self.dz, out_w * b);
            let act = self.spec.activations[l];
            {
                let (h, aux) = (&self.h[l], &self.aux[l]);
                for idx in 0..out_w * b {
                    self.dz[idx] = aux[idx] * self.dh[idx];
                }
                for t in 0..nch {
                    ensure(&mut self.dzdot[t], out_w * b);
                    let (zd, dhd, dzd) = (&self.zdot[l][t], &self.dhdot[t], &mut self.dzdot[t]);
                    for idx in 0..out_w * b {
                        let a2 = act_curvature(act, h[idx], aux[idx]);
                        self.dz[idx] += a2 * zd[idx] * dhd[idx];
                        dzd[idx] = aux[idx] * dhd[idx];
                    }
                }
            }

            // parameter gradients and adjoint propagation to the previous layer
            let w = &p[span.w.clone()];
            let gw = &mut grad[span.w.clone()];
            for o in 0..out_w {
                let dz_row = &self.dz[o * b..(o + 1) * b];
                for i in 0..in_w {
                    let h_row: &[f64] = if l == 0 {
                        &self.x[i * b..(i + 1) * b]
                    } else if self.spec.conv_layer == Some(l) {
                        &self.conv_out[i * b..(i + 1) * b]
                    } else {
                        &self.h[l - 1][i * b..(i + 1) * b]
                    };
                    gw[o * in_w + i] += dot(dz_row, h_row);
                }
            }
            for t in 0..nch {
                for o in 0..out_w {
                    let dzd_row = &self.dzdot[t][o * b..(o + 1) * b];
                    if l == 0 {
                        // input tangent rows are the unit vector e_dir
                        gw[o * in_w + self.dirs[t]] += dzd_row.iter().sum::<f64>();
                    } else {
                        let prev: &Vec<f64> = if self.spec.conv_layer == Some(l) {
                            &self.conv_dot[t]
                        } else {
                            &self.hdot[l - 1][t]
                        };
                        for i in 0..in_w {
                            gw[o * in_w + i] += dot(dzd_row, &prev[i * b..(i + 1) * b]);
                        }
                    }
                }
            }
            {
                let gb = &mut grad[span.b.clone()];
                for o in 0..out_w {
                    gb[o] += self.dz[o * b..(o + 1) * b].iter().sum::<f64>();
                }
            }

            if l > 0 {
                ensure(&mut self.dh_next, in_w * b);
                self.dh_next[..in_w * b].fill(0.0);
                for o in 0..out_w {
                    let dz_row = &self.dz[o * b..(o + 1) * b];
                    for i in 0..in_w {
                        axpy(&mut self.dh_next[i * b..(i + 1) * b], w[o * in_w + i], dz_row);
                    }
                }
                std::mem::swap(&mut self.dh, &mut self.dh_next);
                for t in 0..nch {
                    ensure(&mut self.dhdot_next[t], in_w * b);
                    self.dhdot_next[t][..in_w * b].fill(0.0);
                    for o in 0..out_w {
                        let dzd_row = &self.dzdot[t][o * b..(o + 1) * b];
                        for i in 0..in_w {
                            axpy(
                                &mut self.dhdot_next[t][i * b..(i + 1) * b],
                                w[o * in_w + i],
                                dzd_row,
                            );
                        }
                    }
                    std::mem::swap(&mut self.dhdot[t], &mut self.dhdot_next[t]);
                }
            }
        }
    }
}

/// h = act(z) in place, slope act'(z) into aux.
fn activate(act: Activation, z_to_h: &mut [f64], aux: &mut [f64]) {
    match act {
        Activation::Tanh => {
            for (v, a) in z_to_h.iter_mut().zip(aux.iter_mut()) {
                let t = fmath::tanh(*v);
                *v = t;
                *a = 1.0 - t * t;
            }
        }
        Activation::Sinh => {
            for (v, a) in z_to_h.iter_mut().zip(aux.iter_mut()) {
                let e = fmath::exp(v.abs());
                let inv = 1.0 / e;
                let s = 0.5 * (e - inv);
                *v = if *v < 0.0 { -s } else { s };
                *a = 0.5 * (e + inv);
            }
        }
        Activation::Softplus => {
            for (v, a) in z_to_h.iter_mut().zip(aux.iter_mut()) {
                let x = *v;
                *v = fmath::softplus(x);
                *a = fmath::sigmoid(x);
            }
        }
        Activation::Identity => {
            aux.fill(1.0);
        }
    }
}

/// act''(z) from the stored value and slope.
#[inline]
fn act_curvature(act: Activation, h: f64, aux: f64) -> f64 {
    match act {
        Activation::Tanh => -2.0 * h * aux,
        Activation::Sinh => h,
        Activation::Softplus => aux * (1.0 - aux),
        Activation::Identity => 0.0,
    }
}

/// out[o,:] = sum_d k[d] * src[o + d - r, :] with zero padding.
fn conv_rows(k: &[f64], src: &[f64], out: &mut [f64], rows: usize, b: usize) {
    let r = (k.len() / 2) as isize;
    for o in 0..rows as isize {
        let out_row = &mut out[(o as usize) * b..(o as usize + 1) * b];
        out_row.fill(0.0);
        for (d, &kd) in k.iter().enumerate() {
            let s = o + d as isize - r;
            if s < 0 || s >= rows as isize {
                continue;
            }
            axpy(out_row, kd, &src[(s as usize) * b..(s as usize + 1) * b]);
        }
    }
}

/// Adjoint of `conv_rows` with respect to its input rows.
fn conv_rows_adjoint(k: &[f64], d_out: &[f64], d_src: &mut [f64], rows: usize, b: usize) {
    let r = (k.len() / 2) as isize;
    for s in 0..rows as isize {
        let row = &mut d_src[(s as usize) * b..(s as usize + 1) * b];
        row.fill(0.0);
        for (d, &kd) in k.iter().enumerate() {
            let o = s + r - d as isize;
            if o < 0 || o >= rows as isize {
                continue;
            }
            axpy(row, kd, &d_out[(o as usize) * b..(o as usize + 1) * b]);
        }
    }
}

/// dS/dk[d] contribution: sum over rows/cols of d_out[o,:] . src[o+d-r,:].
fn conv_kernel_grad(d: usize, klen: usize, d_out: &[f64], src: &[f64], rows: usize, b: usize) -> f64 {
    let r = (klen / 2) as isize;
    let mut acc = 0.0;
    for o in 0..rows as isize {
        let s = o + d as isize - r;
        if s < 0 || s >= rows as isize {
            continue;
        }
        acc += dot(
            &d_out[(o as usize) * b..(o as usize + 1) * b],
            &src[(s as usize) * b..(s as usize + 1) * b],
        );
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::neural::{init_params, TapeNet};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, b: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * b).map(|_| rng.gen_range(0.05..0.95)).collect()
    }

    fn col(x: &[f64], n: usize, b: usize, c: usize) -> Vec<f64> {
        (0..n).map(|f| x[f * b + c]).collect()
    }

    fn specs_under_test() -> Vec<NetworkSpec> {
        vec![
            NetworkSpec::default_u(2),
            NetworkSpec::default_u(3).with_uniform_width(40),
            NetworkSpec::default_v(2),
            NetworkSpec::default_v(3),
            NetworkSpec {
                input_dim: 2,
                widths: vec![4, 4],
                activations: vec![Activation::Tanh, Activation::Sinh],
                conv_layer: Some(1),
                conv_kernel: 3,
            },
        ]
    }

    #[test]
    fn forward_and_tangents_match_tape() {
        for (si, spec) in specs_under_test().into_iter().enumerate() {
            let params = init_params(&spec, 100 + si as u64);
            let n = spec.input_dim;
            let b = 7;
            let x = random_points(n, b, 55 + si as u64);
            let dirs: Vec<usize> = (0..n).collect();

            let mut ev = BatchEvaluator::new(&spec);
            ev.forward(&params, &x, b, &dirs);

            for c in 0..b {
                let pt = col(&x, n, b, c);
                let mut tape = Tape::new();
                let net = TapeNet::register(&mut tape, &spec, &params).unwrap();
                let (val, tans) = net.forward_multidual(&mut tape, &pt).unwrap();
                let scale = val.value().abs().max(1.0);
                assert!(
                    (ev.y()[c] - val.value()).abs() < 1e-12 * scale,
                    "spec {si} col {c}: value {} vs tape {}",
                    ev.y()[c],
                    val.value()
                );
                for t in 0..n {
                    let scale = tans[t].value().abs().max(1.0);
                    assert!(
                        (ev.ydot(t)[c] - tans[t].value()).abs() < 1e-11 * scale,
                        "spec {si} col {c} dir {t}: {} vs tape {}",
                        ev.ydot(t)[c],
                        tans[t].value()
                    );
                }
            }
        }
    }

    /// Gradient of S = sum_c sy_c y_c + sum_t sum_c st_tc ydot_tc against
    /// the tape's backward pass.
    #[test]
    fn reverse_matches_tape_backward() {
        for (si, spec) in specs_under_test().into_iter().enumerate() {
            let params = init_params(&spec, 200 + si as u64);
            let n = spec.input_dim;
            let b = 5;
            let x = random_points(n, b, 77 + si as u64);
            let dirs: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(321 + si as u64);
            let sy: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let st: Vec<Vec<f64>> =
                (0..n).map(|_| (0..b).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

            let mut ev = BatchEvaluator::new(&spec);
            ev.forward(&params, &x, b, &dirs);
            let mut grad = vec![0.0; spec.param_count()];
            let seeds: Vec<Option<&[f64]>> = st.iter().map(|s| Some(s.as_slice())).collect();
            ev.reverse(&params, Some(&sy), &seeds, &mut grad);

            // same functional on one tape
            let mut tape = Tape::new();
            let net = TapeNet::register(&mut tape, &spec, &params).unwrap();
            let mut total: Option<crate::autodiff::Var> = None;
            for c in 0..b {
                let pt = col(&x, n, b, c);
                let (val, tans) = net.forward_multidual(&mut tape, &pt).unwrap();
                let mut term = tape.scale(val, sy[c]);
                for t in 0..n {
                    let tt = tape.scale(tans[t], st[t][c]);
                    term = tape.add(term, tt);
                }
                total = Some(match total {
                    None => term,
                    Some(acc) => tape.add(acc, term),
                });
            }
            let adj = tape.backward(total.unwrap()).unwrap();
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1.0);
            for (i, pv) in net.param_vars().iter().enumerate() {
                let expect = adj[pv.index()];
                assert!(
                    (grad[i] - expect).abs() < 1e-10 * gmax,
                    "spec {si} param {i}: batch {} vs tape {}",
                    grad[i],
                    expect
                );
            }
        }
    }

    #[test]
    fn value_only_seed_skips_tangent_work() {
        let spec = NetworkSpec::default_u(2);
        let params = init_params(&spec, 9);
        let b = 4;
        let x = random_points(2, b, 13);
        let mut ev = BatchEvaluator::new(&spec);
        ev.forward(&params, &x, b, &[]);
        let sy = vec![1.0; b];
        let mut grad = vec![0.0; spec.param_count()];
        ev.reverse(&params, Some(&sy), &[], &mut grad);
        // d/d(out_bias) of sum of outputs is the batch size
        assert_eq!(grad[spec.layout().out_b], b as f64);
    }

    /// Buffers are reused across calls of different widths without stale
    /// state leaking through.
    #[test]
    fn buffer_reuse_across_batch_sizes() {
        let spec = NetworkSpec::default_u(2);
        let params = init_params(&spec, 17);
        let mut ev = BatchEvaluator::new(&spec);

        let big = random_points(2, 9, 1);
        ev.forward(&params, &big, 9, &[0]);
        let y_big: Vec<f64> = ev.y().to_vec();

        // feature-major layout of a single column coincides with the point itself
        let sx = col(&big, 2, 9, 3);
        ev.forward(&params, &sx, 1, &[0]);
        assert_eq!(ev.y()[0], y_big[3]);
    }
}
