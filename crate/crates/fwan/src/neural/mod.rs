//! Feed-forward networks for the solution field u and the adversarial test
//! function v: architecture specs, flat parameter vectors, Glorot
//! initialization, tape-recorded forward passes, and checkpoint I/O.
//!
//! The solution network carries a single-channel 1-D convolution over the
//! feature axis after one hidden layer; the adversary is a plain MLP. The
//! output layer is always affine.

pub(crate) mod batch;

use crate::autodiff::{Dual, MultiDual, Tape, Var};
use crate::error::{FwanError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sinh,
    Softplus,
    Identity,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Tanh => "tanh",
            Activation::Sinh => "sinh",
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Activation {
    type Err = FwanError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sinh" => Ok(Activation::Sinh),
            "softplus" => Ok(Activation::Softplus),
            "identity" => Ok(Activation::Identity),
            other => Err(FwanError::Usage(format!("unknown activation '{other}'"))),
        }
    }
}

/// Architecture description: hidden widths, per-layer activation schedule,
/// optional convolution placement. Output is always a single scalar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    /// 1-based hidden-layer index after whose activation the feature vector
    /// is convolved.
    pub conv_layer: Option<usize>,
    /// Odd kernel width; zero padding preserves the feature count.
    pub conv_kernel: usize,
}

/// Hidden-layer activation schedule used by both default architectures:
/// layers 1-2 tanh, then sinh on odd and softplus on even layers.
fn standard_schedule(hidden_layers: usize) -> Vec<Activation> {
    (1..=hidden_layers)
        .map(|l| {
            if l <= 2 {
                Activation::Tanh
            } else if l % 2 == 1 {
                Activation::Sinh
            } else {
                Activation::Softplus
            }
        })
        .collect()
}

impl NetworkSpec {
    /// Default solution-network architecture: 6 hidden layers of 20
    /// neurons, convolution (kernel 3) after layer 5.
    pub fn default_u(input_dim: usize) -> Self {
        NetworkSpec {
            input_dim,
            widths: vec![20; 6],
            activations: standard_schedule(6),
            conv_layer: Some(5),
            conv_kernel: 3,
        }
    }

    /// Default adversary architecture: 6 hidden layers of 50 neurons, no
    /// convolution.
    pub fn default_v(input_dim: usize) -> Self {
        NetworkSpec {
            input_dim,
            widths: vec![50; 6],
            activations: standard_schedule(6),
            conv_layer: None,
            conv_kernel: 3,
        }
    }

    /// Same architecture with every hidden layer resized.
    pub fn with_uniform_width(mut self, width: usize) -> Self {
        for w in &mut self.widths {
            *w = width;
        }
        self
    }

    pub fn hidden_layers(&self) -> usize {
        self.widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(FwanError::Config("network input_dim must be >= 1".into()));
        }
        if self.widths.is_empty() || self.widths.iter().any(|&w| w == 0) {
            return Err(FwanError::Config("network widths must be non-empty and positive".into()));
        }
        if self.activations.len() != self.widths.len() {
            return Err(FwanError::Config(format!(
                "activation schedule length {} != hidden layer count {}",
                self.activations.len(),
                self.widths.len()
            )));
        }
        if let Some(l) = self.conv_layer {
            if l == 0 || l > self.widths.len() {
                return Err(FwanError::Config(format!(
                    "conv_layer {} outside [1, {}]",
                    l,
                    self.widths.len()
                )));
            }
            if self.conv_kernel == 0 || self.conv_kernel % 2 == 0 {
                return Err(FwanError::Config(format!(
                    "conv_kernel {} must be odd and positive",
                    self.conv_kernel
                )));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

/// Span of each weight block inside the flat parameter vector. Order
/// follows the network: per hidden layer W then b, the convolution kernel
/// directly after its layer, then the output weights and bias.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub layers: Vec<LayerSpan>,
    pub conv: Option<std::ops::Range<usize>>,
    pub out_w: std::ops::Range<usize>,
    pub out_b: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct LayerSpan {
    pub w: std::ops::Range<usize>,
    pub b: std::ops::Range<usize>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ParamLayout {
    fn new(spec: &NetworkSpec) -> Self {
        let mut off = 0usize;
        let mut layers = Vec::with_capacity(spec.widths.len());
        let mut conv = None;
        let mut in_dim = spec.input_dim;
        for (i, &w) in spec.widths.iter().enumerate() {
            let wspan = off..off + w * in_dim;
            off = wspan.end;
            let bspan = off..off + w;
            off = bspan.end;
            layers.push(LayerSpan { w: wspan, b: bspan, in_dim, out_dim: w });
            if spec.conv_layer == Some(i + 1) {
                conv = Some(off..off + spec.conv_kernel);
                off += spec.conv_kernel;
            }
            in_dim = w;
        }
        let out_w = off..off + in_dim;
        off = out_w.end;
        let out_b = off;
        off += 1;
        ParamLayout { layers, conv, out_w, out_b, total: off }
    }
}

/// Flat trainable parameter vector for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    values: Vec<f64>,
}

impl NetworkParams {
    pub fn new(values: Vec<f64>) -> Self {
        NetworkParams { values }
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        NetworkParams { values: vec![0.0; spec.param_count()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// XOR-fold of the raw bit patterns; used in abort diagnostics.
    pub fn checksum(&self) -> u64 {
        self.values
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, v)| acc ^ v.to_bits().rotate_left((i % 64) as u32))
    }
}

/// Glorot-uniform weights, zero biases, deterministic in the seed. The
/// convolution kernel uses its receptive field as both fan-in and fan-out.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> NetworkParams {
    let layout = spec.layout();
    let mut values = vec![0.0f64; layout.total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &layout.layers {
        let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
        for v in &mut values[layer.w.clone()] {
            *v = rng.gen_range(-limit..limit);
        }
    }
    if let Some(conv) = &layout.conv {
        let limit = (6.0 / (2 * spec.conv_kernel) as f64).sqrt();
        for v in &mut values[conv.clone()] {
            *v = rng.gen_range(-limit..limit);
        }
    }
    let out_in = *spec.widths.last().expect("validated spec");
    let limit = (6.0 / (out_in + 1) as f64).sqrt();
    for v in &mut values[layout.out_w.clone()] {
        *v = rng.gen_range(-limit..limit);
    }
    NetworkParams { values }
}

// ---------------------------------------------------------------------------
// Tape-recorded forward passes.
// ---------------------------------------------------------------------------

/// A network whose parameters are registered as leaves on a tape, so that
/// backward passes yield parameter gradients.
pub struct TapeNet<'s> {
    spec: &'s NetworkSpec,
    layout: ParamLayout,
    param_vars: Vec<Var>,
}

impl<'s> TapeNet<'s> {
    pub fn register(tape: &mut Tape, spec: &'s NetworkSpec, params: &NetworkParams) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(FwanError::Usage(format!(
                "parameter vector length {} does not match spec ({} expected)",
                params.len(),
                spec.param_count()
            )));
        }
        let param_vars = params.as_slice().iter().map(|&p| tape.input(p)).collect();
        Ok(TapeNet { spec, layout: spec.layout(), param_vars })
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.spec
    }

    /// Leaf Vars of the flat parameter vector, in layout order.
    pub fn param_vars(&self) -> &[Var] {
        &self.param_vars
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(FwanError::Usage(format!(
                "input has {} coordinates, network expects {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Scalar output at x, fully recorded on the tape.
    pub fn forward(&self, tape: &mut Tape, x: &[f64]) -> Result<Var> {
        self.check_input(x)?;
        let mut h: Vec<Var> = x.iter().map(|&c| tape.constant(c)).collect();
        for (l, layer) in self.layout.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let mut acc = self.param_vars[layer.b.start + o];
                for (i, &hi) in h.iter().enumerate() {
                    let w = self.param_vars[layer.w.start + o * layer.in_dim + i];
                    let m = tape.mul(w, hi);
                    acc = tape.add(acc, m);
                }
                next.push(apply_activation(tape, self.spec.activations[l], acc));
            }
            h = next;
            if self.spec.conv_layer == Some(l + 1) {
                h = self.conv_plain(tape, &h);
            }
        }
        let mut acc = self.param_vars[self.layout.out_b];
        for (i, &hi) in h.iter().enumerate() {
            let w = self.param_vars[self.layout.out_w.start + i];
            let m = tape.mul(w, hi);
            acc = tape.add(acc, m);
        }
        Ok(acc)
    }

    /// Output and its derivative along coordinate `dir`, both tape values.
    ///
    /// The derivative is produced by a tangent pass recorded on the tape,
    /// so a subsequent backward pass differentiates it with respect to the
    /// parameters.
    pub fn forward_dual(&self, tape: &mut Tape, x: &[f64], dir: usize) -> Result<(Var, Var)> {
        self.check_input(x)?;
        if dir >= self.spec.input_dim {
            return Err(FwanError::Usage(format!("tangent direction {dir} out of range")));
        }
        let one = tape.one();
        let mut h: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let v = tape.constant(c);
                if j == dir {
                    Dual::seeded(v, one)
                } else {
                    Dual::constant(v)
                }
            })
            .collect();
        for (l, layer) in self.layout.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let mut acc = Dual::constant(self.param_vars[layer.b.start + o]);
                for (i, &hi) in h.iter().enumerate() {
                    let w = Dual::constant(self.param_vars[layer.w.start + o * layer.in_dim + i]);
                    let m = tape.dual_mul(w, hi);
                    acc = tape.dual_add(acc, m);
                }
                next.push(apply_activation_dual(tape, self.spec.activations[l], acc));
            }
            h = next;
            if self.spec.conv_layer == Some(l + 1) {
                h = self.conv_dual(tape, &h);
            }
        }
        let mut acc = Dual::constant(self.param_vars[self.layout.out_b]);
        for (i, &hi) in h.iter().enumerate() {
            let w = Dual::constant(self.param_vars[self.layout.out_w.start + i]);
            let m = tape.dual_mul(w, hi);
            acc = tape.dual_add(acc, m);
        }
        let tan = acc.tan.unwrap_or_else(|| tape.constant(0.0));
        Ok((acc.val, tan))
    }

    /// Output and all spatial derivatives in one pass.
    pub fn forward_multidual(&self, tape: &mut Tape, x: &[f64]) -> Result<(Var, Vec<Var>)> {
        self.check_input(x)?;
        let n = self.spec.input_dim;
        let one = tape.one();
        let mut h: Vec<MultiDual> = x
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let v = tape.constant(c);
                let mut tans = vec![None; n];
                tans[j] = Some(one);
                MultiDual { val: v, tans }
            })
            .collect();
        for (l, layer) in self.layout.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let bias = self.param_vars[layer.b.start + o];
                let mut acc = MultiDual::constant(bias, n);
                for (i, hi) in h.iter().enumerate() {
                    let w = self.param_vars[layer.w.start + o * layer.in_dim + i];
                    let m = tape.multidual_scale(hi, w);
                    acc = tape.multidual_add(&acc, &m);
                }
                next.push(tape.multidual_activate(&acc, self.spec.activations[l]));
            }
            h = next;
            if self.spec.conv_layer == Some(l + 1) {
                h = self.conv_multidual(tape, &h);
            }
        }
        let mut acc = MultiDual::constant(self.param_vars[self.layout.out_b], n);
        for (i, hi) in h.iter().enumerate() {
            let w = self.param_vars[self.layout.out_w.start + i];
            let m = tape.multidual_scale(hi, w);
            acc = tape.multidual_add(&acc, &m);
        }
        let tans = acc
            .tans
            .into_iter()
            .map(|t| t.unwrap_or_else(|| tape.constant(0.0)))
            .collect();
        Ok((acc.val, tans))
    }

    fn conv_vars(&self) -> &[Var] {
        let r = self.layout.conv.as_ref().expect("conv layout present");
        &self.param_vars[r.clone()]
    }

    fn conv_plain(&self, tape: &mut Tape, h: &[Var]) -> Vec<Var> {
        let k = self.conv_vars().to_vec();
        let r = (self.spec.conv_kernel / 2) as isize;
        (0..h.len() as isize)
            .map(|o| {
                let mut acc: Option<Var> = None;
                for (d, &kv) in k.iter().enumerate() {
                    let src = o + d as isize - r;
                    if src < 0 || src >= h.len() as isize {
                        continue;
                    }
                    let m = tape.mul(kv, h[src as usize]);
                    acc = Some(match acc {
                        None => m,
                        Some(a) => tape.add(a, m),
                    });
                }
                acc.expect("kernel covers at least the center tap")
            })
            .collect()
    }

    fn conv_dual(&self, tape: &mut Tape, h: &[Dual]) -> Vec<Dual> {
        let k = self.conv_vars().to_vec();
        let r = (self.spec.conv_kernel / 2) as isize;
        (0..h.len() as isize)
            .map(|o| {
                let mut acc: Option<Dual> = None;
                for (d, &kv) in k.iter().enumerate() {
                    let src = o + d as isize - r;
                    if src < 0 || src >= h.len() as isize {
                        continue;
                    }
                    let m = tape.dual_mul(Dual::constant(kv), h[src as usize]);
                    acc = Some(match acc {
                        None => m,
                        Some(a) => tape.dual_add(a, m),
                    });
                }
                acc.expect("kernel covers at least the center tap")
            })
            .collect()
    }

    fn conv_multidual(&self, tape: &mut Tape, h: &[MultiDual]) -> Vec<MultiDual> {
        let k = self.conv_vars().to_vec();
        let r = (self.spec.conv_kernel / 2) as isize;
        (0..h.len() as isize)
            .map(|o| {
                let mut acc: Option<MultiDual> = None;
                for (d, &kv) in k.iter().enumerate() {
                    let src = o + d as isize - r;
                    if src < 0 || src >= h.len() as isize {
                        continue;
                    }
                    let m = tape.multidual_scale(&h[src as usize], kv);
                    acc = Some(match acc {
                        None => m,
                        Some(a) => tape.multidual_add(&a, &m),
                    });
                }
                acc.expect("kernel covers at least the center tap")
            })
            .collect()
    }
}

fn apply_activation(tape: &mut Tape, act: Activation, z: Var) -> Var {
    match act {
        Activation::Tanh => tape.tanh(z),
        Activation::Sinh => tape.sinh(z),
        Activation::Softplus => tape.softplus(z),
        Activation::Identity => z,
    }
}

fn apply_activation_dual(tape: &mut Tape, act: Activation, z: Dual) -> Dual {
    match act {
        Activation::Tanh => tape.dual_tanh(z),
        Activation::Sinh => tape.dual_sinh(z),
        Activation::Softplus => tape.dual_softplus(z),
        Activation::Identity => z,
    }
}

/// Record `params` on the tape and evaluate the network at x.
pub fn forward(spec: &NetworkSpec, params: &NetworkParams, x: &[f64], tape: &mut Tape) -> Result<Var> {
    let net = TapeNet::register(tape, spec, params)?;
    net.forward(tape, x)
}

/// Plain values at many points, evaluated through the batched engine.
pub fn forward_many(spec: &NetworkSpec, params: &NetworkParams, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(FwanError::Usage("parameter vector does not match spec".into()));
    }
    let n = spec.input_dim;
    if let Some(bad) = points.iter().find(|p| p.len() != n) {
        return Err(FwanError::Usage(format!(
            "point has {} coordinates, network expects {n}",
            bad.len()
        )));
    }
    const CHUNK: usize = 256;
    let mut ev = batch::BatchEvaluator::new(spec);
    let mut out = Vec::with_capacity(points.len());
    let mut xmat = vec![0.0f64; n * CHUNK];
    for chunk in points.chunks(CHUNK) {
        let b = chunk.len();
        for (c, p) in chunk.iter().enumerate() {
            for f in 0..n {
                xmat[f * b + c] = p[f];
            }
        }
        ev.forward(params, &xmat[..n * b], b, &[]);
        out.extend_from_slice(ev.y());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Checkpoint format: one-line textual header, then raw little-endian f64s.
// ---------------------------------------------------------------------------

fn spec_header(spec: &NetworkSpec) -> String {
    let widths: Vec<String> = spec.widths.iter().map(|w| w.to_string()).collect();
    let acts: Vec<String> = spec.activations.iter().map(|a| a.to_string()).collect();
    let conv = match spec.conv_layer {
        Some(l) => l.to_string(),
        None => "none".into(),
    };
    format!(
        "fwan-checkpoint v1 input_dim={} widths={} activations={} conv_layer={} conv_kernel={} count={}",
        spec.input_dim,
        widths.join(","),
        acts.join(","),
        conv,
        spec.conv_kernel,
        spec.param_count()
    )
}

fn parse_spec_header(line: &str) -> Result<(NetworkSpec, usize)> {
    let bad = |m: &str| FwanError::CheckpointFormat(format!("{m} in header '{line}'"));
    let mut fields = std::collections::HashMap::new();
    let mut words = line.split_whitespace();
    if words.next() != Some("fwan-checkpoint") || words.next() != Some("v1") {
        return Err(bad("missing magic"));
    }
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| bad("malformed field"))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).cloned().ok_or_else(|| bad(&format!("missing {k}")));
    let input_dim: usize = get("input_dim")?.parse().map_err(|_| bad("bad input_dim"))?;
    let widths: Vec<usize> = get("widths")?
        .split(',')
        .map(|s| s.parse().map_err(|_| bad("bad widths")))
        .collect::<Result<_>>()?;
    let activations: Vec<Activation> = get("activations")?
        .split(',')
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let conv_layer = match get("conv_layer")?.as_str() {
        "none" => None,
        s => Some(s.parse().map_err(|_| bad("bad conv_layer"))?),
    };
    let conv_kernel: usize = get("conv_kernel")?.parse().map_err(|_| bad("bad conv_kernel"))?;
    let count: usize = get("count")?.parse().map_err(|_| bad("bad count"))?;
    let spec = NetworkSpec { input_dim, widths, activations, conv_layer, conv_kernel };
    spec.validate()?;
    if spec.param_count() != count {
        return Err(bad("count does not match architecture"));
    }
    Ok((spec, count))
}

pub fn write_checkpoint(path: &Path, spec: &NetworkSpec, params: &NetworkParams) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(FwanError::Usage("checkpoint params do not match spec".into()));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", spec_header(spec))?;
    for v in params.as_slice() {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(NetworkSpec, NetworkParams)> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (spec, count) = parse_spec_header(header.trim_end())?;
    let mut bytes = Vec::with_capacity(count * 8);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(FwanError::CheckpointFormat(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((spec, NetworkParams::new(values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;

    #[test]
    fn default_specs_follow_the_schedule() {
        let u = NetworkSpec::default_u(2);
        assert_eq!(u.widths, vec![20; 6]);
        assert_eq!(u.conv_layer, Some(5));
        assert_eq!(u.conv_kernel, 3);
        let v = NetworkSpec::default_v(3);
        assert_eq!(v.widths, vec![50; 6]);
        assert_eq!(v.conv_layer, None);
        use Activation::*;
        for spec in [&u, &v] {
            assert_eq!(spec.activations, vec![Tanh, Tanh, Sinh, Softplus, Sinh, Softplus]);
        }
        // dimension-independent schedule
        let u1 = NetworkSpec::default_u(1);
        assert_eq!(u1.input_dim, 1);
        assert_eq!(u1.activations, u.activations);
        // width override for the wider 3-D variant
        let u40 = NetworkSpec::default_u(3).with_uniform_width(40);
        assert_eq!(u40.widths, vec![40; 6]);
        assert!(u40.validate().is_ok());
    }

    #[test]
    fn param_count_matches_architecture() {
        let u = NetworkSpec::default_u(2);
        // 20*2+20 + 5*(20*20+20) + conv 3 + out 20+1
        assert_eq!(u.param_count(), 60 + 5 * 420 + 3 + 21);
        let v = NetworkSpec::default_v(2);
        assert_eq!(v.param_count(), 150 + 5 * 2550 + 51);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = NetworkSpec::default_u(2);
        let a = init_params(&spec, 7);
        let b = init_params(&spec, 7);
        assert_eq!(a, b);
        let c = init_params(&spec, 8);
        assert_ne!(a, c);

        let layout = spec.layout();
        // hidden layer 2 is 20 -> 20: entries within +-sqrt(6/40)
        let limit = (6.0f64 / 40.0).sqrt();
        for &w in &a.as_slice()[layout.layers[1].w.clone()] {
            assert!(w.abs() < limit);
        }
        // biases zero
        for layer in &layout.layers {
            for &b in &a.as_slice()[layer.b.clone()] {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = NetworkSpec::default_u(2);
        let params = NetworkParams::zeros(&spec);
        let mut tape = Tape::new();
        let out = forward(&spec, &params, &[0.3, 0.8], &mut tape).unwrap();
        assert_eq!(out.value(), 0.0);
    }

    #[test]
    fn single_tanh_layer_closed_form() {
        let spec = NetworkSpec {
            input_dim: 2,
            widths: vec![1],
            activations: vec![Activation::Tanh],
            conv_layer: None,
            conv_kernel: 3,
        };
        // W = [1, 0], b = 0, output weight 1, output bias 0
        let params = NetworkParams::new(vec![1.0, 0.0, 0.0, 1.0, 0.0]);
        let mut tape = Tape::new();
        let out = forward(&spec, &params, &[0.5, 0.9], &mut tape).unwrap();
        assert!((out.value() - 0.5f64.tanh()).abs() < 1e-12);
        assert!((out.value() - 0.462117).abs() < 1e-6);
    }

    #[test]
    fn identity_kernel_matches_conv_free_network() {
        let without = NetworkSpec { conv_layer: None, ..NetworkSpec::default_u(2) };
        let with = NetworkSpec::default_u(2);
        let base = init_params(&without, 3);

        // splice the identity kernel (0,1,0) into the conv slot
        let layout = with.layout();
        let conv = layout.conv.clone().unwrap();
        let mut values = base.as_slice().to_vec();
        values.splice(conv.start..conv.start, [0.0, 1.0, 0.0]);
        let params = NetworkParams::new(values);

        for x in [[0.1, 0.9], [0.5, 0.5], [0.77, 0.13]] {
            let mut t1 = Tape::new();
            let a = forward(&without, &base, &x, &mut t1).unwrap().value();
            let mut t2 = Tape::new();
            let b = forward(&with, &params, &x, &mut t2).unwrap().value();
            assert_eq!(a, b, "identity convolution must be exact");
        }
    }

    #[test]
    fn forward_dual_matches_spatial_finite_difference() {
        let spec = NetworkSpec::default_u(2);
        let params = init_params(&spec, 11);
        let x = [0.4, 0.7];
        for dir in 0..2 {
            let mut tape = Tape::new();
            let net = TapeNet::register(&mut tape, &spec, &params).unwrap();
            let (_, tan) = net.forward_dual(&mut tape, &x, dir).unwrap();

            let h = 1e-6;
            let eval = |x: &[f64]| {
                let mut t = Tape::new();
                forward(&spec, &params, x, &mut t).unwrap().value()
            };
            let mut hi = x;
            hi[dir] += h;
            let mut lo = x;
            lo[dir] -= h;
            let fd = (eval(&hi) - eval(&lo)) / (2.0 * h);
            assert!((tan.value() - fd).abs() < 1e-8, "dir {dir}: {} vs {fd}", tan.value());
        }
    }

    #[test]
    fn multidual_agrees_with_single_direction_duals() {
        let spec = NetworkSpec::default_v(3);
        let params = init_params(&spec, 5);
        let x = [0.2, 0.6, 0.9];
        let mut tape = Tape::new();
        let net = TapeNet::register(&mut tape, &spec, &params).unwrap();
        let (val, tans) = net.forward_multidual(&mut tape, &x).unwrap();
        for dir in 0..3 {
            let mut t2 = Tape::new();
            let net2 = TapeNet::register(&mut t2, &spec, &params).unwrap();
            let (v2, tan2) = net2.forward_dual(&mut t2, &x, dir).unwrap();
            assert_eq!(val.value(), v2.value());
            assert_eq!(tans[dir].value(), tan2.value());
        }
    }

    /// Gradient of the full default solution network with respect to every
    /// parameter, against central finite differences.
    #[test]
    fn full_network_parameter_gradient_check() {
        let spec = NetworkSpec::default_u(2);
        let params = init_params(&spec, 23);
        let x = [0.35, 0.62];
        let err = grad_check(
            |tape, vars| {
                let net = TapeNet {
                    spec: &spec,
                    layout: spec.layout(),
                    param_vars: vars.to_vec(),
                };
                net.forward(tape, &x)
            },
            params.as_slice(),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "max rel err {err}");
    }

    #[test]
    fn output_is_continuous_in_params() {
        let spec = NetworkSpec::default_u(2);
        let params = init_params(&spec, 31);
        let x = [0.5, 0.25];
        let eval = |p: &NetworkParams| {
            let mut t = Tape::new();
            forward(&spec, p, &x, &mut t).unwrap().value()
        };
        let base = eval(&params);

        // gradient norm bounds the local Lipschitz constant
        let mut tape = Tape::new();
        let net = TapeNet::register(&mut tape, &spec, &params).unwrap();
        let out = net.forward(&mut tape, &x).unwrap();
        let adj = tape.backward(out).unwrap();
        let grad_norm: f64 = net
            .param_vars()
            .iter()
            .map(|v| adj[v.index()] * adj[v.index()])
            .sum::<f64>()
            .sqrt();

        let eps = 1e-6;
        let mut perturbed = params.clone();
        for (i, v) in perturbed.as_mut_slice().iter_mut().enumerate() {
            *v += eps * if i % 2 == 0 { 1.0 } else { -1.0 } / (params.len() as f64).sqrt();
        }
        let moved = eval(&perturbed);
        assert!(
            (moved - base).abs() <= 10.0 * eps * grad_norm.max(1.0),
            "|df| = {} vs bound {}",
            (moved - base).abs(),
            10.0 * eps * grad_norm.max(1.0)
        );
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.ckpt");
        let spec = NetworkSpec::default_u(3);
        let params = init_params(&spec, 99);
        write_checkpoint(&path, &spec, &params).unwrap();
        let (spec2, params2) = read_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        for (a, b) in params.as_slice().iter().zip(params2.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // forward outputs identical to the last bit
        let x = [0.1, 0.2, 0.3];
        let mut t1 = Tape::new();
        let y1 = forward(&spec, &params, &x, &mut t1).unwrap().value();
        let mut t2 = Tape::new();
        let y2 = forward(&spec2, &params2, &x, &mut t2).unwrap().value();
        assert_eq!(y1.to_bits(), y2.to_bits());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = NetworkSpec::default_u(2);
        let params = init_params(&spec, 1);
        let mut tape = Tape::new();
        assert!(matches!(
            forward(&spec, &params, &[0.1], &mut tape),
            Err(FwanError::Usage(_))
        ));
    }
}
