//! Reverse-mode automatic differentiation over scalar operation tapes.
//!
//! A [`Tape`] records elementary scalar operations in topological order;
//! [`Tape::backward`] replays them in reverse to accumulate adjoints. Local
//! partial derivatives are cached when each node is recorded, so the
//! backward sweep is a single pass of fused multiply-adds independent of
//! the opcode.
//!
//! Spatial derivatives of a recorded function are obtained with a tangent
//! (forward-mode) pass whose intermediate values are themselves tape nodes
//! ([`Dual`], [`MultiDual`]); reverse mode then differentiates the tangent
//! output with respect to any leaf, which is how parameter gradients of
//! quantities like du/dx are computed.

use crate::error::{FwanError, Result};
use crate::fmath;
use std::sync::atomic::{AtomicU64, Ordering};

static TAPE_COUNTER: AtomicU64 = AtomicU64::new(1);

/// Elementary operations a tape can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    PowConst,
    Exp,
    Ln,
    Tanh,
    Sinh,
    Softplus,
    Neg,
    /// acc + x^2; the accumulator form keeps sum-of-squares reductions to
    /// one node per term.
    SqAcc,
}

/// An operation request for [`Tape::record`].
#[derive(Debug, Clone, Copy)]
pub enum OpCall {
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    PowConst(Var, f64),
    Exp(Var),
    Ln(Var),
    Tanh(Var),
    Sinh(Var),
    Softplus(Var),
    Neg(Var),
    SqAcc(Var, Var),
}

const NO_OPERAND: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
    /// d(node)/d(operand a), cached at record time.
    da: f64,
    /// d(node)/d(operand b).
    db: f64,
    val: f64,
}

/// Handle to a node on a specific tape. Copyable; only valid for the tape
/// that created it.
#[derive(Debug, Clone, Copy)]
pub struct Var {
    tape_id: u64,
    idx: u32,
    val: f64,
}

impl Var {
    /// Primal value cached at record time.
    #[inline]
    pub fn value(self) -> f64 {
        self.val
    }

    /// Node index on the owning tape.
    #[inline]
    pub fn index(self) -> usize {
        self.idx as usize
    }
}

/// Ordered record of scalar operations with cached primals and local
/// partials.
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    one: Option<Var>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            one: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Opcode of a recorded node.
    pub fn op(&self, v: Var) -> Op {
        self.nodes[v.idx as usize].op
    }

    #[inline]
    fn check(&self, v: Var) {
        assert_eq!(
            v.tape_id, self.id,
            "Var belongs to tape {} but was used on tape {}",
            v.tape_id, self.id
        );
    }

    #[inline]
    fn push(&mut self, op: Op, a: u32, b: u32, da: f64, db: f64, val: f64) -> Var {
        let idx = u32::try_from(self.nodes.len()).expect("tape exceeds u32 node capacity");
        self.nodes.push(Node { op, a, b, da, db, val });
        Var { tape_id: self.id, idx, val }
    }

    /// Register a differentiable leaf (an input or trainable parameter).
    pub fn input(&mut self, val: f64) -> Var {
        self.push(Op::Leaf, NO_OPERAND, NO_OPERAND, 0.0, 0.0, val)
    }

    /// Register a value that participates in arithmetic but is treated as
    /// constant. Identical to [`Tape::input`]; the distinct name documents
    /// intent at call sites.
    pub fn constant(&mut self, val: f64) -> Var {
        self.input(val)
    }

    /// Cached constant 1.0, shared by dual-arithmetic helpers.
    pub fn one(&mut self) -> Var {
        match self.one {
            Some(v) => v,
            None => {
                let v = self.constant(1.0);
                self.one = Some(v);
                v
            }
        }
    }

    #[inline]
    pub fn add(&mut self, x: Var, y: Var) -> Var {
        self.check(x);
        self.check(y);
        self.push(Op::Add, x.idx, y.idx, 1.0, 1.0, x.val + y.val)
    }

    #[inline]
    pub fn sub(&mut self, x: Var, y: Var) -> Var {
        self.check(x);
        self.check(y);
        self.push(Op::Sub, x.idx, y.idx, 1.0, -1.0, x.val - y.val)
    }

    #[inline]
    pub fn mul(&mut self, x: Var, y: Var) -> Var {
        self.check(x);
        self.check(y);
        self.push(Op::Mul, x.idx, y.idx, y.val, x.val, x.val * y.val)
    }

    #[inline]
    pub fn neg(&mut self, x: Var) -> Var {
        self.check(x);
        self.push(Op::Neg, x.idx, NO_OPERAND, -1.0, 0.0, -x.val)
    }

    /// acc + x^2.
    #[inline]
    pub fn sq_acc(&mut self, acc: Var, x: Var) -> Var {
        self.check(acc);
        self.check(x);
        self.push(Op::SqAcc, acc.idx, x.idx, 1.0, 2.0 * x.val, acc.val + x.val * x.val)
    }

    pub fn div(&mut self, x: Var, y: Var) -> Result<Var> {
        self.check(x);
        self.check(y);
        if y.val == 0.0 {
            return Err(FwanError::AutodiffDomain {
                node: self.nodes.len(),
                message: "division by zero".into(),
            });
        }
        let inv = 1.0 / y.val;
        Ok(self.push(Op::Div, x.idx, y.idx, inv, -x.val * inv * inv, x.val * inv))
    }

    /// x^c for a compile-time-unknown real exponent c.
    pub fn powc(&mut self, x: Var, c: f64) -> Result<Var> {
        self.check(x);
        if x.val <= 0.0 && c.fract() != 0.0 {
            return Err(FwanError::AutodiffDomain {
                node: self.nodes.len(),
                message: format!("pow of non-positive base {} with exponent {}", x.val, c),
            });
        }
        let val = x.val.powf(c);
        let da = if c == 0.0 { 0.0 } else { c * x.val.powf(c - 1.0) };
        Ok(self.push(Op::PowConst, x.idx, NO_OPERAND, da, 0.0, val))
    }

    #[inline]
    pub fn exp(&mut self, x: Var) -> Var {
        self.check(x);
        let val = fmath::exp(x.val);
        self.push(Op::Exp, x.idx, NO_OPERAND, val, 0.0, val)
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        self.check(x);
        if x.val <= 0.0 {
            return Err(FwanError::AutodiffDomain {
                node: self.nodes.len(),
                message: format!("ln of non-positive value {}", x.val),
            });
        }
        Ok(self.push(Op::Ln, x.idx, NO_OPERAND, 1.0 / x.val, 0.0, x.val.ln()))
    }

    #[inline]
    pub fn tanh(&mut self, x: Var) -> Var {
        self.check(x);
        let t = fmath::tanh(x.val);
        self.push(Op::Tanh, x.idx, NO_OPERAND, 1.0 - t * t, 0.0, t)
    }

    #[inline]
    pub fn sinh(&mut self, x: Var) -> Var {
        self.check(x);
        self.push(Op::Sinh, x.idx, NO_OPERAND, fmath::cosh(x.val), 0.0, fmath::sinh(x.val))
    }

    #[inline]
    pub fn softplus(&mut self, x: Var) -> Var {
        self.check(x);
        self.push(
            Op::Softplus,
            x.idx,
            NO_OPERAND,
            fmath::sigmoid(x.val),
            0.0,
            fmath::softplus(x.val),
        )
    }

    /// Record an operation described by an [`OpCall`].
    pub fn record(&mut self, call: OpCall) -> Result<Var> {
        Ok(match call {
            OpCall::Add(x, y) => self.add(x, y),
            OpCall::Sub(x, y) => self.sub(x, y),
            OpCall::Mul(x, y) => self.mul(x, y),
            OpCall::Div(x, y) => self.div(x, y)?,
            OpCall::PowConst(x, c) => self.powc(x, c)?,
            OpCall::Exp(x) => self.exp(x),
            OpCall::Ln(x) => self.ln(x)?,
            OpCall::Tanh(x) => self.tanh(x),
            OpCall::Sinh(x) => self.sinh(x),
            OpCall::Softplus(x) => self.softplus(x),
            OpCall::Neg(x) => self.neg(x),
            OpCall::SqAcc(acc, x) => self.sq_acc(acc, x),
        })
    }

    /// Multiply x by a constant factor (records the constant as a node).
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let cv = self.constant(c);
        self.mul(x, cv)
    }

    /// Sum a slice of Vars left to right. Returns the zero constant for an
    /// empty slice.
    pub fn sum(&mut self, xs: &[Var]) -> Var {
        match xs.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => {
                let mut acc = first;
                for &x in rest {
                    acc = self.add(acc, x);
                }
                acc
            }
        }
    }

    /// Adjoints of every node with respect to `output`:
    /// `gradient[i] = d(output)/d(node i)`.
    ///
    /// The adjoint of `output` itself is 1; nodes unreachable from it keep
    /// adjoint 0. Identical tapes give bit-identical results.
    pub fn backward(&self, output: Var) -> Result<Vec<f64>> {
        if output.tape_id != self.id {
            return Err(FwanError::Usage(format!(
                "backward: output Var from tape {} used on tape {}",
                output.tape_id, self.id
            )));
        }
        let k = output.idx as usize;
        let mut adj = vec![0.0f64; self.nodes.len()];
        adj[k] = 1.0;
        for i in (0..=k).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = self.nodes[i];
            if n.a != NO_OPERAND {
                adj[n.a as usize] += n.da * g;
            }
            if n.b != NO_OPERAND {
                adj[n.b as usize] += n.db * g;
            }
        }
        Ok(adj)
    }
}

// ---------------------------------------------------------------------------
// Forward-mode tangents recorded on the tape (forward-over-reverse).
// ---------------------------------------------------------------------------

/// Value plus tangent, both tape nodes. `None` tangent means structurally
/// zero, which elides most tangent arithmetic against parameters.
#[derive(Debug, Clone, Copy)]
pub struct Dual {
    pub val: Var,
    pub tan: Option<Var>,
}

impl Dual {
    pub fn constant(val: Var) -> Self {
        Dual { val, tan: None }
    }

    pub fn seeded(val: Var, tan: Var) -> Self {
        Dual { val, tan: Some(tan) }
    }
}

impl Tape {
    pub fn dual_add(&mut self, x: Dual, y: Dual) -> Dual {
        let val = self.add(x.val, y.val);
        let tan = match (x.tan, y.tan) {
            (None, None) => None,
            (Some(t), None) | (None, Some(t)) => Some(t),
            (Some(tx), Some(ty)) => Some(self.add(tx, ty)),
        };
        Dual { val, tan }
    }

    pub fn dual_mul(&mut self, x: Dual, y: Dual) -> Dual {
        let val = self.mul(x.val, y.val);
        let tan = match (x.tan, y.tan) {
            (None, None) => None,
            (Some(tx), None) => Some(self.mul(tx, y.val)),
            (None, Some(ty)) => Some(self.mul(x.val, ty)),
            (Some(tx), Some(ty)) => {
                let a = self.mul(tx, y.val);
                let b = self.mul(x.val, ty);
                Some(self.add(a, b))
            }
        };
        Dual { val, tan }
    }

    pub fn dual_tanh(&mut self, x: Dual) -> Dual {
        let t = self.tanh(x.val);
        let tan = x.tan.map(|tx| {
            // d tanh = (1 - t^2) dx
            let tt = self.mul(t, t);
            let one = self.one();
            let d = self.sub(one, tt);
            self.mul(d, tx)
        });
        Dual { val: t, tan }
    }

    pub fn dual_sinh(&mut self, x: Dual) -> Dual {
        let s = self.sinh(x.val);
        let tan = match x.tan {
            None => None,
            Some(tx) => {
                // cosh = sqrt(1 + sinh^2), positive branch
                let ss = self.mul(s, s);
                let one = self.one();
                let arg = self.add(one, ss);
                let c = self.powc(arg, 0.5).expect("1 + sinh^2 >= 1");
                Some(self.mul(c, tx))
            }
        };
        Dual { val: s, tan }
    }

    pub fn dual_softplus(&mut self, x: Dual) -> Dual {
        let sp = self.softplus(x.val);
        let tan = x.tan.map(|tx| {
            // sigma = 1 - e^{-softplus(x)}
            let nsp = self.neg(sp);
            let e = self.exp(nsp);
            let one = self.one();
            let sig = self.sub(one, e);
            self.mul(sig, tx)
        });
        Dual { val: sp, tan }
    }
}

/// Value with one tangent per spatial coordinate, all on the tape.
#[derive(Debug, Clone)]
pub struct MultiDual {
    pub val: Var,
    pub tans: Vec<Option<Var>>,
}

impl MultiDual {
    pub fn constant(val: Var, dims: usize) -> Self {
        MultiDual { val, tans: vec![None; dims] }
    }
}

impl Tape {
    pub fn multidual_add(&mut self, x: &MultiDual, y: &MultiDual) -> MultiDual {
        let val = self.add(x.val, y.val);
        let tans = x
            .tans
            .iter()
            .zip(&y.tans)
            .map(|(&tx, &ty)| match (tx, ty) {
                (None, None) => None,
                (Some(t), None) | (None, Some(t)) => Some(t),
                (Some(a), Some(b)) => Some(self.add(a, b)),
            })
            .collect();
        MultiDual { val, tans }
    }

    /// Multiply by a plain (tangent-free) factor such as a parameter.
    pub fn multidual_scale(&mut self, x: &MultiDual, f: Var) -> MultiDual {
        let val = self.mul(x.val, f);
        let tans = x.tans.iter().map(|&t| t.map(|t| self.mul(t, f))).collect();
        MultiDual { val, tans }
    }

    pub fn multidual_activate(&mut self, x: &MultiDual, act: crate::neural::Activation) -> MultiDual {
        use crate::neural::Activation::*;
        match act {
            Identity => x.clone(),
            Tanh => {
                let t = self.tanh(x.val);
                let deriv = x.tans.iter().any(Option::is_some).then(|| {
                    let tt = self.mul(t, t);
                    let one = self.one();
                    self.sub(one, tt)
                });
                let tans = x
                    .tans
                    .iter()
                    .map(|&tx| tx.map(|tx| self.mul(deriv.unwrap(), tx)))
                    .collect();
                MultiDual { val: t, tans }
            }
            Sinh => {
                let s = self.sinh(x.val);
                let deriv = x.tans.iter().any(Option::is_some).then(|| {
                    let ss = self.mul(s, s);
                    let one = self.one();
                    let arg = self.add(one, ss);
                    self.powc(arg, 0.5).expect("1 + sinh^2 >= 1")
                });
                let tans = x
                    .tans
                    .iter()
                    .map(|&tx| tx.map(|tx| self.mul(deriv.unwrap(), tx)))
                    .collect();
                MultiDual { val: s, tans }
            }
            Softplus => {
                let sp = self.softplus(x.val);
                let deriv = x.tans.iter().any(Option::is_some).then(|| {
                    let nsp = self.neg(sp);
                    let e = self.exp(nsp);
                    let one = self.one();
                    self.sub(one, e)
                });
                let tans = x
                    .tans
                    .iter()
                    .map(|&tx| tx.map(|tx| self.mul(deriv.unwrap(), tx)))
                    .collect();
                MultiDual { val: sp, tans }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

/// Compare the tape gradient of `f` at `point` against central finite
/// differences with the given step. Returns the maximum over coordinates of
/// |autodiff - fd| / max(1, |fd|).
///
/// `f` receives a fresh tape and one leaf Var per coordinate and must
/// return the scalar output recorded on that tape.
pub fn grad_check<F>(f: F, point: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(step > 0.0, "grad_check step must be positive");

    let eval = |coords: &[f64]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = coords.iter().map(|&c| tape.input(c)).collect();
        let out = f(&mut tape, &vars)?;
        Ok(out.value())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|&c| tape.input(c)).collect();
    let out = f(&mut tape, &vars)?;
    let adj = tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut shifted = point.to_vec();
    for (i, var) in vars.iter().enumerate() {
        shifted[i] = point[i] + step;
        let hi = eval(&shifted)?;
        shifted[i] = point[i] - step;
        let lo = eval(&shifted)?;
        shifted[i] = point[i];
        let fd = (hi - lo) / (2.0 * step);
        if !fd.is_finite() {
            return Err(FwanError::Domain {
                context: "grad_check",
                message: format!("non-finite finite-difference at coordinate {i}"),
            });
        }
        let ad = adj[var.index()];
        let err = (ad - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
