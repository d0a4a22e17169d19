//! Fractional-calculus primitives: the Gamma function, the singular
//! integral kernel, closed-form Riemann-Liouville integrals of monomials,
//! and the manufactured right-hand sides derived from them.
//!
//! The closed forms serve double duty: they are the validation oracle for
//! the midpoint quadrature used in training, and they make the source term
//! f = L[u_true] exact rather than sampled.

use crate::error::{FwanError, Result};

/// Fractional order constrained to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(FracOrder(alpha))
        } else {
            Err(FwanError::Config(format!("fractional order {alpha} must lie strictly in (0, 1)")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = FwanError;
    fn try_from(v: f64) -> Result<Self> {
        FracOrder::new(v)
    }
}

impl From<FracOrder> for f64 {
    fn from(a: FracOrder) -> f64 {
        a.0
    }
}

/// Gamma function for positive arguments, relative accuracy well under
/// 1e-12 on (0, 20].
pub fn gamma(x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(FwanError::Domain {
            context: "gamma",
            message: format!("argument {x} must be positive"),
        });
    }
    Ok(libm::tgamma(x))
}

/// Integration side of a Riemann-Liouville operator: left integrates from
/// the lower bound up to x, right from x up to the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Singular kernel with the 1/Gamma(alpha) normalization precomputed.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    alpha: f64,
    inv_gamma: f64,
}

impl KernelEval {
    pub fn new(alpha: FracOrder) -> Self {
        let inv_gamma = 1.0 / libm::tgamma(alpha.get());
        KernelEval { alpha: alpha.get(), inv_gamma }
    }

    /// (x - w)^(alpha-1) / Gamma(alpha) for w strictly below x.
    #[inline]
    pub fn left(&self, x: f64, w: f64) -> f64 {
        debug_assert!(w < x);
        (x - w).powf(self.alpha - 1.0) * self.inv_gamma
    }

    /// (w - x)^(alpha-1) / Gamma(alpha) for w strictly above x.
    #[inline]
    pub fn right(&self, x: f64, w: f64) -> f64 {
        debug_assert!(w > x);
        (w - x).powf(self.alpha - 1.0) * self.inv_gamma
    }
}

/// Checked kernel evaluation; the singularity guard rejects w >= x.
pub fn kernel_left(alpha: FracOrder, x: f64, w: f64) -> Result<f64> {
    if w >= x {
        return Err(FwanError::Domain {
            context: "kernel_left",
            message: format!("node w={w} must lie strictly below x={x}"),
        });
    }
    Ok(KernelEval::new(alpha).left(x, w))
}

pub fn kernel_right(alpha: FracOrder, x: f64, w: f64) -> Result<f64> {
    if w <= x {
        return Err(FwanError::Domain {
            context: "kernel_right",
            message: format!("node w={w} must lie strictly above x={x}"),
        });
    }
    Ok(KernelEval::new(alpha).right(x, w))
}

fn binomial(m: u32, k: u32) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c = c * (m - j) as f64 / (j + 1) as f64;
    }
    c
}

/// Closed-form Riemann-Liouville integral of w^m over (a, b), evaluated at
/// x, by binomial expansion about the integration endpoint:
///
///   left:  sum_k C(m,k) a^(m-k)        Gamma(k+1)/Gamma(k+1+alpha) (x-a)^(k+alpha)
///   right: sum_k C(m,k) b^(m-k) (-1)^k Gamma(k+1)/Gamma(k+1+alpha) (b-x)^(k+alpha)
pub fn rl_integral_monomial(
    alpha: FracOrder,
    m: u32,
    a: f64,
    x: f64,
    side: Side,
    b: f64,
) -> Result<f64> {
    if !(a <= x && x <= b) {
        return Err(FwanError::Domain {
            context: "rl_integral_monomial",
            message: format!("x={x} outside [{a}, {b}]"),
        });
    }
    let al = alpha.get();
    let mut total = 0.0;
    for k in 0..=m {
        let ratio = libm::tgamma((k + 1) as f64) / libm::tgamma((k + 1) as f64 + al);
        let term = match side {
            Side::Left => binomial(m, k) * a.powi((m - k) as i32) * ratio * (x - a).powf(k as f64 + al),
            Side::Right => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(m, k) * b.powi((m - k) as i32) * ratio * (b - x).powf(k as f64 + al)
            }
        };
        total += term;
    }
    Ok(total)
}

/// d/dx of [`rl_integral_monomial`]. Singular at the integration endpoint
/// itself; callers evaluate at interior points only.
pub fn rl_integral_monomial_deriv(
    alpha: FracOrder,
    m: u32,
    a: f64,
    x: f64,
    side: Side,
    b: f64,
) -> Result<f64> {
    if !(a <= x && x <= b) {
        return Err(FwanError::Domain {
            context: "rl_integral_monomial_deriv",
            message: format!("x={x} outside [{a}, {b}]"),
        });
    }
    let al = alpha.get();
    let mut total = 0.0;
    for k in 0..=m {
        // Gamma(k+1) (k+alpha) / Gamma(k+1+alpha) = Gamma(k+1)/Gamma(k+alpha)
        let ratio = libm::tgamma((k + 1) as f64) / libm::tgamma(k as f64 + al);
        let term = match side {
            Side::Left => {
                binomial(m, k) * a.powi((m - k) as i32) * ratio * (x - a).powf(k as f64 + al - 1.0)
            }
            Side::Right => {
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                sign * binomial(m, k) * b.powi((m - k) as i32) * ratio * (b - x).powf(k as f64 + al - 1.0)
            }
        };
        total += term;
    }
    Ok(total)
}

/// Polynomial manufactured solutions with analytically known source terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManufacturedSolution {
    /// Test-only constant field; its source term vanishes.
    Constant(f64),
    /// prod_i x_i^2 (x^2 y^2 in 2-D, x^2 y^2 z^2 in 3-D).
    ProductOfSquares,
    /// prod_i x_i (xy in 2-D).
    Product,
    /// sum_i x_i (1 - x_i).
    QuadraticBump,
}

impl ManufacturedSolution {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ManufacturedSolution::Constant(c) => *c,
            ManufacturedSolution::ProductOfSquares => x.iter().map(|&c| c * c).product(),
            ManufacturedSolution::Product => x.iter().product(),
            ManufacturedSolution::QuadraticBump => x.iter().map(|&c| c * (1.0 - c)).sum(),
        }
    }

    /// du/dx_i at the point.
    pub fn partial(&self, i: usize, x: &[f64]) -> f64 {
        let coeffs = self.partial_poly(i, x);
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            acc += c * x[i].powi(k as i32);
        }
        acc
    }

    /// du/dx_i as a polynomial in the i-th coordinate, with the remaining
    /// coordinates frozen at `x`. Coefficient k multiplies w^k.
    pub fn partial_poly(&self, i: usize, x: &[f64]) -> Vec<f64> {
        match self {
            ManufacturedSolution::Constant(_) => vec![],
            ManufacturedSolution::ProductOfSquares => {
                let cross: f64 =
                    x.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &c)| c * c).product();
                vec![0.0, 2.0 * cross]
            }
            ManufacturedSolution::Product => {
                let cross: f64 =
                    x.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &c)| c).product();
                vec![cross]
            }
            ManufacturedSolution::QuadraticBump => vec![1.0, -2.0],
        }
    }

    pub fn name(&self) -> String {
        match self {
            ManufacturedSolution::Constant(c) => format!("constant={c}"),
            ManufacturedSolution::ProductOfSquares => "product_of_squares".into(),
            ManufacturedSolution::Product => "product".into(),
            ManufacturedSolution::QuadraticBump => "quadratic_bump".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if let Some(v) = s.strip_prefix("constant=") {
            let c: f64 = v
                .parse()
                .map_err(|_| FwanError::Usage(format!("bad constant solution value '{v}'")))?;
            return Ok(ManufacturedSolution::Constant(c));
        }
        match s {
            "product_of_squares" => Ok(ManufacturedSolution::ProductOfSquares),
            "product" => Ok(ManufacturedSolution::Product),
            "quadratic_bump" => Ok(ManufacturedSolution::QuadraticBump),
            other => Err(FwanError::Usage(format!(
                "unknown manufactured solution '{other}' \
                 (expected product_of_squares, product, quadratic_bump, or constant=<v>)"
            ))),
        }
    }
}

/// Source term f(x) = L[u_true](x), assembled analytically per coordinate:
///
///   f = -sum_i d/dx_i ( p_i J_left + q_i J_right ) du/dx_i
///
/// with du/dx_i expanded as a polynomial in the i-th coordinate.
pub fn manufactured_rhs(
    solution: &ManufacturedSolution,
    bounds: &[(f64, f64)],
    alpha: FracOrder,
    p: &[f64],
    q: &[f64],
    x: &[f64],
) -> Result<f64> {
    let n = bounds.len();
    if x.len() != n || p.len() != n || q.len() != n {
        return Err(FwanError::Usage(format!(
            "manufactured_rhs: inconsistent dimensions (bounds {n}, x {}, p {}, q {})",
            x.len(),
            p.len(),
            q.len()
        )));
    }
    let mut f = 0.0;
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let coeffs = solution.partial_poly(i, x);
        for (m, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let dl = rl_integral_monomial_deriv(alpha, m as u32, lo, x[i], Side::Left, hi)?;
            let dr = rl_integral_monomial_deriv(alpha, m as u32, lo, x[i], Side::Right, hi)?;
            f -= c * (p[i] * dl + q[i] * dr);
        }
    }
    Ok(f)
}
