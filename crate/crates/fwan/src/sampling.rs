//! Seeded collocation sampling: interior points, boundary points with
//! Dirichlet data, boundary noise, and the per-point midpoint rules for
//! the inner fractional integrals.
//!
//! Inner nodes sit at midpoints of N equal sub-intervals rather than at
//! the partition endpoints, so the singular kernel is never evaluated at
//! the outer point itself; the node weight carries the interval length,
//! making each inner sum a consistent quadrature of its integral.

use crate::error::{FwanError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    bounds: Vec<(f64, f64)>,
}

impl Rect {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(FwanError::Config("domain needs at least one axis".into()));
        }
        for &(lo, hi) in &bounds {
            if !(lo < hi) {
                return Err(FwanError::Config(format!(
                    "degenerate domain axis: [{lo}, {hi}] is not strictly ordered"
                )));
            }
        }
        Ok(Rect { bounds })
    }

    /// Unit box (0,1)^n.
    pub fn unit(n: usize) -> Self {
        Rect { bounds: vec![(0.0, 1.0); n] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn axis(&self, i: usize) -> (f64, f64) {
        self.bounds[i]
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|&(lo, hi)| hi - lo).product()
    }

    /// Measure of one face (the product of the other axis lengths).
    fn face_measure(&self, axis: usize) -> f64 {
        self.bounds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != axis)
            .map(|(_, &(lo, hi))| hi - lo)
            .product()
    }

    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(&c, &(lo, hi))| c > lo && c < hi)
    }
}

/// Midpoint rule over one inner interval: nodes at the centers of N equal
/// sub-intervals, every node weighted by (length / N).
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRule {
    pub nodes: Vec<f64>,
    pub weight: f64,
}

impl InnerRule {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Midpoint partition of (x_lo, x_hi) into n cells. A zero-length interval
/// yields an empty rule with zero total weight.
pub fn inner_partition(x_lo: f64, x_hi: f64, n: usize) -> InnerRule {
    assert!(n >= 1, "inner_partition needs at least one cell");
    let len = x_hi - x_lo;
    if !(len > 0.0) {
        return InnerRule { nodes: Vec::new(), weight: 0.0 };
    }
    let h = len / n as f64;
    let nodes = (0..n).map(|j| x_lo + (j as f64 + 0.5) * h).collect();
    InnerRule { nodes, weight: h }
}

/// Left and right inner rules for one coordinate of one interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerPair {
    pub left: InnerRule,
    pub right: InnerRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub coords: Vec<f64>,
    /// 2*axis + (0 lower | 1 upper).
    pub face: usize,
    /// Dirichlet value, noisy when the batch was built with delta > 0.
    pub g: f64,
}

/// One resampling of every random quantity the discretized weak form
/// needs: interior points, boundary points with Dirichlet data, and the
/// inner quadrature rules per interior point and coordinate.
#[derive(Debug, Clone)]
pub struct CollocationBatch {
    pub interior: Vec<Vec<f64>>,
    pub boundary: Vec<BoundaryPoint>,
    /// inner[k][i] holds the rules for interior point k, coordinate i.
    pub inner: Vec<Vec<InnerPair>>,
    /// RNG stream the batch was drawn from (outer iteration index).
    pub stream: u64,
}

fn strict_interior_sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    // gen_range is half-open [lo, hi); reject the measure-zero lower edge
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// I.i.d. uniform points strictly inside the rectangle.
pub fn sample_interior(domain: &Rect, m_i: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m_i == 0 {
        return Err(FwanError::Config("M_I must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_interior_with(domain, m_i, &mut rng))
}

fn sample_interior_with(domain: &Rect, m_i: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..m_i)
        .map(|_| {
            domain
                .bounds()
                .iter()
                .map(|&(lo, hi)| strict_interior_sample(rng, lo, hi))
                .collect()
        })
        .collect()
}

/// Boundary points: faces drawn with probability proportional to face
/// measure, position uniform on the face. The returned points carry no
/// Dirichlet data yet.
pub fn sample_boundary(domain: &Rect, m_b: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
    if m_b < 2 * domain.dim() {
        return Err(FwanError::Config(format!(
            "M_B = {m_b} below the 2n = {} face count",
            2 * domain.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_boundary_with(domain, m_b, &mut rng))
}

fn sample_boundary_with(domain: &Rect, m_b: usize, rng: &mut ChaCha8Rng) -> Vec<BoundaryPoint> {
    let n = domain.dim();
    let mut cumulative = Vec::with_capacity(2 * n);
    let mut total = 0.0;
    for axis in 0..n {
        let fm = domain.face_measure(axis);
        total += fm; // lower face
        cumulative.push(total);
        total += fm; // upper face
        cumulative.push(total);
    }
    (0..m_b)
        .map(|_| {
            let u = rng.gen_range(0.0..total);
            let face = cumulative.iter().position(|&c| u < c).unwrap_or(2 * n - 1);
            let axis = face / 2;
            let upper = face % 2 == 1;
            let coords: Vec<f64> = domain
                .bounds()
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| {
                    if j == axis {
                        if upper {
                            hi
                        } else {
                            lo
                        }
                    } else {
                        strict_interior_sample(rng, lo, hi)
                    }
                })
                .collect();
            BoundaryPoint { coords, face, g: 0.0 }
        })
        .collect()
}

/// g_i + delta * max(g) * xi_i with standard normal xi. The noise RNG is
/// seeded independently of everything else so the same realization can be
/// reused across fractional orders.
pub fn apply_boundary_noise(g: &mut [f64], delta: f64, seed: u64, stream: u64) {
    if delta == 0.0 || g.is_empty() {
        return;
    }
    let max_g = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for v in g.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *v += delta * max_g * xi;
    }
}

/// Batch parameters independent of the problem being solved.
#[derive(Debug, Clone, Copy)]
pub struct BatchSizes {
    pub m_interior: usize,
    pub m_boundary: usize,
    pub n_inner: usize,
}

/// Draw a full collocation batch. `stream` separates outer iterations;
/// equal (seed, stream) pairs give equal batches. `g_fn` supplies the
/// clean Dirichlet trace; `noise_delta`/`noise_seed` optionally perturb it.
pub fn make_batch(
    domain: &Rect,
    sizes: BatchSizes,
    g_fn: impl Fn(&[f64]) -> f64,
    noise_delta: f64,
    sampling_seed: u64,
    noise_seed: u64,
    stream: u64,
) -> Result<CollocationBatch> {
    if sizes.m_interior == 0 || sizes.n_inner == 0 {
        return Err(FwanError::Config("M_I and N must be >= 1".into()));
    }
    if sizes.m_boundary < 2 * domain.dim() {
        return Err(FwanError::Config(format!(
            "M_B = {} below the 2n = {} face count",
            sizes.m_boundary,
            2 * domain.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling_seed);
    rng.set_stream(stream);
    let interior = sample_interior_with(domain, sizes.m_interior, &mut rng);
    let mut boundary = sample_boundary_with(domain, sizes.m_boundary, &mut rng);

    let mut g: Vec<f64> = boundary.iter().map(|b| g_fn(&b.coords)).collect();
    apply_boundary_noise(&mut g, noise_delta, noise_seed, stream);
    for (b, gv) in boundary.iter_mut().zip(g) {
        b.g = gv;
    }

    let inner = interior
        .iter()
        .map(|pt| {
            (0..domain.dim())
                .map(|i| {
                    let (lo, hi) = domain.axis(i);
                    InnerPair {
                        left: inner_partition(lo, pt[i], sizes.n_inner),
                        right: inner_partition(pt[i], hi, sizes.n_inner),
                    }
                })
                .collect()
        })
        .collect();

    Ok(CollocationBatch { interior, boundary, inner, stream })
}
