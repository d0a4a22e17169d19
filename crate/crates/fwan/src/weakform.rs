//! Discretized weak form as differentiable tape computations: the pairing
//! <L[u], v>, the test-function norm, the interior/boundary losses, and
//! the total minimax objective.
//!
//! This is the reference route. The training loop reproduces the same
//! numbers through the batched evaluator (see `lossgrad`), and the two are
//! pinned against each other in tests. Building everything on one tape
//! keeps both gradients exact on small batches, which is what the gradient
//! acceptance suite runs.

use crate::autodiff::{Tape, Var};
use crate::error::{FwanError, Result};
use crate::fraccalc::{FracOrder, KernelEval, ManufacturedSolution};
use crate::neural::{NetworkParams, NetworkSpec, TapeNet};
use crate::sampling::{CollocationBatch, InnerRule, Rect};

/// Denominator floor below which the adversary counts as collapsed.
pub const VNORM_FLOOR: f64 = 1e-12;

/// Norm cap above which the adversary counts as exploded. The interior
/// loss is exactly scale-invariant in v, so an adversary whose magnitude
/// runs away carries no extra information but drives the unbounded
/// activations toward overflow; past this cap it is treated as degenerate
/// exactly like a collapsed one.
pub const VNORM_CAP: f64 = 1e6;

/// Weights and switches of the discretized objective.
#[derive(Debug, Clone)]
pub struct ObjectiveConfig {
    /// Boundary penalty weight.
    pub beta: f64,
    /// Per-coordinate left-integral weights.
    pub p: Vec<f64>,
    /// Per-coordinate right-integral weights.
    pub q: Vec<f64>,
    /// Squared pairing in the interior loss (the default); the unsquared
    /// variant exists for ablation.
    pub squared_pairing: bool,
}

impl ObjectiveConfig {
    /// Uniform weights p_i = q_i = 1/(2n).
    pub fn uniform(n: usize, beta: f64) -> Result<Self> {
        let w = 1.0 / (2 * n) as f64;
        ObjectiveConfig { beta, p: vec![w; n], q: vec![w; n], squared_pairing: true }.validated()
    }

    pub fn with_weights(beta: f64, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        ObjectiveConfig { beta, p, q, squared_pairing: true }.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.beta <= 0.0 {
            return Err(FwanError::Config(format!("beta = {} must be positive", self.beta)));
        }
        if self.p.len() != self.q.len() || self.p.is_empty() {
            return Err(FwanError::Config("weight vectors p, q must match and be non-empty".into()));
        }
        if self.p.iter().chain(&self.q).any(|&w| w <= 0.0) {
            return Err(FwanError::Config("all operator weights must be strictly positive".into()));
        }
        let total: f64 = self.p.iter().chain(&self.q).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FwanError::Config(format!(
                "operator weights must sum to 1 (got {total})"
            )));
        }
        Ok(self)
    }
}

/// Per-batch values of every objective component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub pairing: f64,
    pub v_norm2: f64,
    pub l_int: f64,
    pub l_bound: f64,
    pub l_total: f64,
}

/// Polynomial mask vanishing on the boundary: the product of
/// (x_i - lo_i)(hi_i - x_i) per axis, each factor normalized by the
/// squared axis length. Peaks at 4^-n in the domain center. Multiplying
/// the raw adversary by this mask enforces the zero trace.
pub fn zero_trace_mask(domain: &Rect, x: &[f64]) -> f64 {
    x.iter()
        .zip(domain.bounds())
        .map(|(&c, &(lo, hi))| (c - lo) * (hi - c) / ((hi - lo) * (hi - lo)))
        .product()
}

/// d(mask)/dx_i.
pub fn zero_trace_mask_partial(domain: &Rect, x: &[f64], i: usize) -> f64 {
    let (lo_i, hi_i) = domain.axis(i);
    let own = (lo_i + hi_i - 2.0 * x[i]) / ((hi_i - lo_i) * (hi_i - lo_i));
    let cross: f64 = x
        .iter()
        .zip(domain.bounds())
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, (&c, &(lo, hi)))| (c - lo) * (hi - c) / ((hi - lo) * (hi - lo)))
        .product();
    own * cross
}

/// Solution field entering the pairing: a network on the tape, or an exact
/// manufactured solution (the network-bypass adapter used by consistency
/// checks).
pub enum UField<'a, 't> {
    Net(&'a TapeNet<'t>),
    Exact(&'a ManufacturedSolution),
}

/// Everything the interior estimate produces on the tape.
pub struct InteriorTerms {
    pub pairing: Var,
    pub v_norm2: Var,
    /// Inner rules that came up empty and were skipped (diagnostic).
    pub skipped_inner: usize,
}

/// Monte Carlo estimate of the weak pairing and of |v|^2 over one batch,
/// recorded on the tape.
///
/// For each interior point and coordinate the inner midpoint rule weights
/// kernel-times-du/dw over the left and right intervals; the result
/// multiplies the masked adversary's spatial derivative. The source term
/// values `f_values` are supplied per interior point. Both sums carry the
/// volume-over-M_I Monte Carlo factor.
pub fn interior_terms(
    tape: &mut Tape,
    u: &UField,
    v: &TapeNet,
    batch: &CollocationBatch,
    domain: &Rect,
    alpha: FracOrder,
    f_values: &[f64],
    cfg: &ObjectiveConfig,
) -> Result<InteriorTerms> {
    let n = domain.dim();
    if f_values.len() != batch.interior.len() {
        return Err(FwanError::Usage("one source value per interior point required".into()));
    }
    if cfg.p.len() != n {
        return Err(FwanError::Usage("objective weights do not match the domain dimension".into()));
    }
    let kernel = KernelEval::new(alpha);
    let mut skipped = 0usize;

    let mut pairing_acc = tape.constant(0.0);
    let mut vnorm_acc = tape.constant(0.0);

    let mut scratch = Vec::with_capacity(n);
    for (k, x) in batch.interior.iter().enumerate() {
        let mask = zero_trace_mask(domain, x);
        let (v_raw, v_tans) = v.forward_multidual(tape, x)?;
        let mask_var = tape.constant(mask);
        let v_masked = tape.mul(v_raw, mask_var);

        // sum_i (p_i A_left + q_i A_right) * d(v * mask)/dx_i
        let mut point_term: Option<Var> = None;
        for i in 0..n {
            let pair = &batch.inner[k][i];
            let a_left = inner_sum(tape, u, x, i, &pair.left, |w| kernel.left(x[i], w), &mut scratch, &mut skipped)?;
            let a_right =
                inner_sum(tape, u, x, i, &pair.right, |w| kernel.right(x[i], w), &mut scratch, &mut skipped)?;

            let mut coef: Option<Var> = None;
            if let Some(al) = a_left {
                coef = Some(tape.scale(al, cfg.p[i]));
            }
            if let Some(ar) = a_right {
                let qr = tape.scale(ar, cfg.q[i]);
                coef = Some(match coef {
                    None => qr,
                    Some(c) => tape.add(c, qr),
                });
            }
            let Some(coef) = coef else { continue };

            // d(v*mask)/dx_i = mask * dv/dx_i + dmask/dx_i * v
            let dv_m = tape.scale(v_tans[i], mask);
            let dm_v = tape.scale(v_raw, zero_trace_mask_partial(domain, x, i));
            let g_i = tape.add(dv_m, dm_v);

            let term = tape.mul(coef, g_i);
            point_term = Some(match point_term {
                None => term,
                Some(acc) => tape.add(acc, term),
            });
        }

        // source contribution f(x) * v_masked
        let fv = tape.scale(v_masked, f_values[k]);
        let contribution = match point_term {
            None => tape.neg(fv),
            Some(t) => tape.sub(t, fv),
        };
        pairing_acc = tape.add(pairing_acc, contribution);
        vnorm_acc = tape.sq_acc(vnorm_acc, v_masked);
    }

    let scale = domain.volume() / batch.interior.len() as f64;
    Ok(InteriorTerms {
        pairing: tape.scale(pairing_acc, scale),
        v_norm2: tape.scale(vnorm_acc, scale),
        skipped_inner: skipped,
    })
}

/// Weighted inner quadrature sum of kernel * du/dw along coordinate `i`,
/// returning None if the rule is empty.
fn inner_sum(
    tape: &mut Tape,
    u: &UField,
    x: &[f64],
    i: usize,
    rule: &InnerRule,
    kernel_at: impl Fn(f64) -> f64,
    scratch: &mut Vec<f64>,
    skipped: &mut usize,
) -> Result<Option<Var>> {
    if rule.is_empty() {
        *skipped += 1;
        return Ok(None);
    }
    scratch.clear();
    scratch.extend_from_slice(x);
    let mut acc: Option<Var> = None;
    for &w in &rule.nodes {
        scratch[i] = w;
        let coeff = rule.weight * kernel_at(w);
        let du = match u {
            UField::Net(net) => net.forward_dual(tape, scratch, i)?.1,
            UField::Exact(sol) => tape.constant(sol.partial(i, scratch)),
        };
        let term = tape.scale(du, coeff);
        acc = Some(match acc {
            None => term,
            Some(a) => tape.add(a, term),
        });
    }
    Ok(acc)
}

/// The pairing alone (diagnostics and consistency checks).
pub fn pairing(
    tape: &mut Tape,
    u: &UField,
    v: &TapeNet,
    batch: &CollocationBatch,
    domain: &Rect,
    alpha: FracOrder,
    f_values: &[f64],
    cfg: &ObjectiveConfig,
) -> Result<(Var, usize)> {
    let terms = interior_terms(tape, u, v, batch, domain, alpha, f_values, cfg)?;
    Ok((terms.pairing, terms.skipped_inner))
}

/// |pairing|^2 / |v|^2 (or |pairing| / |v|^2 when squared_pairing is off).
pub fn interior_loss(tape: &mut Tape, pairing: Var, v_norm2: Var, cfg: &ObjectiveConfig) -> Result<Var> {
    if v_norm2.value() <= VNORM_FLOOR {
        return Err(FwanError::DegenerateAdversary { v_norm2: v_norm2.value(), floor: VNORM_FLOOR });
    }
    let numerator = if cfg.squared_pairing {
        tape.mul(pairing, pairing)
    } else {
        let sq = tape.mul(pairing, pairing);
        tape.powc(sq, 0.5)?
    };
    tape.div(numerator, v_norm2)
}

/// Mean squared Dirichlet mismatch over the boundary points.
pub fn boundary_loss(tape: &mut Tape, u: &TapeNet, batch: &CollocationBatch) -> Result<Var> {
    if batch.boundary.is_empty() {
        return Err(FwanError::Usage("boundary loss needs at least one boundary point".into()));
    }
    let mut acc = tape.constant(0.0);
    for bp in &batch.boundary {
        let u_val = u.forward(tape, &bp.coords)?;
        let g = tape.constant(bp.g);
        let diff = tape.sub(u_val, g);
        acc = tape.sq_acc(acc, diff);
    }
    Ok(tape.scale(acc, 1.0 / batch.boundary.len() as f64))
}

/// L_int + beta * L_bound.
pub fn total_loss(tape: &mut Tape, l_int: Var, l_bound: Var, beta: f64) -> Result<Var> {
    if beta <= 0.0 {
        return Err(FwanError::Config(format!("beta = {beta} must be positive")));
    }
    let scaled = tape.scale(l_bound, beta);
    Ok(tape.add(l_int, scaled))
}

/// The full objective on one tape, with both networks' parameters as
/// leaves so a single backward pass yields either gradient.
pub struct ObjectiveTape {
    pub tape: Tape,
    theta: Vec<Var>,
    eta: Vec<Var>,
    pub pairing: Var,
    pub v_norm2: Var,
    pub l_int: Var,
    pub l_bound: Var,
    pub l_total: Var,
    pub skipped_inner: usize,
}

impl ObjectiveTape {
    pub fn breakdown(&self) -> LossBreakdown {
        LossBreakdown {
            pairing: self.pairing.value(),
            v_norm2: self.v_norm2.value(),
            l_int: self.l_int.value(),
            l_bound: self.l_bound.value(),
            l_total: self.l_total.value(),
        }
    }

    /// (grad wrt u params, grad wrt v params) of the total loss.
    pub fn gradients(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let adj = self.tape.backward(self.l_total)?;
        let gu = self.theta.iter().map(|v| adj[v.index()]).collect();
        let gv = self.eta.iter().map(|v| adj[v.index()]).collect();
        Ok((gu, gv))
    }
}

/// Assemble the complete objective tape for one batch. `f_values` holds
/// the analytic source term at each interior point.
#[allow(clippy::too_many_arguments)]
pub fn build_objective(
    u_spec: &NetworkSpec,
    u_params: &NetworkParams,
    v_spec: &NetworkSpec,
    v_params: &NetworkParams,
    batch: &CollocationBatch,
    domain: &Rect,
    alpha: FracOrder,
    f_values: &[f64],
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveTape> {
    let mut tape = Tape::new();
    let u_net = TapeNet::register(&mut tape, u_spec, u_params)?;
    let v_net = TapeNet::register(&mut tape, v_spec, v_params)?;
    let theta = u_net.param_vars().to_vec();
    let eta = v_net.param_vars().to_vec();

    let terms = interior_terms(
        &mut tape,
        &UField::Net(&u_net),
        &v_net,
        batch,
        domain,
        alpha,
        f_values,
        cfg,
    )?;
    let l_int = interior_loss(&mut tape, terms.pairing, terms.v_norm2, cfg)?;
    let l_bound = boundary_loss(&mut tape, &u_net, batch)?;
    let l_total = total_loss(&mut tape, l_int, l_bound, cfg.beta)?;

    Ok(ObjectiveTape {
        tape,
        theta,
        eta,
        pairing: terms.pairing,
        v_norm2: terms.v_norm2,
        l_int,
        l_bound,
        l_total,
        skipped_inner: terms.skipped_inner,
    })
}
