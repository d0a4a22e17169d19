//! Problem definitions and the ready-to-run experiment presets.

use crate::error::{FwanError, Result};
use crate::fraccalc::{manufactured_rhs, FracOrder, ManufacturedSolution};
use crate::neural::NetworkSpec;
use crate::sampling::Rect;
use crate::training::{Seeds, TrainConfig};

/// The Dirichlet problem being solved: domain, fractional order, operator
/// weights, manufactured true solution, and the boundary noise level.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: Rect,
    pub alpha: FracOrder,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub solution: ManufacturedSolution,
    pub noise_delta: f64,
}

impl ProblemSpec {
    /// Uniform operator weights p_i = q_i = 1/(2n).
    pub fn new(
        domain: Rect,
        alpha: FracOrder,
        solution: ManufacturedSolution,
        noise_delta: f64,
    ) -> Result<Self> {
        let n = domain.dim();
        let w = 1.0 / (2 * n) as f64;
        ProblemSpec { domain, alpha, p: vec![w; n], q: vec![w; n], solution, noise_delta }
            .validated()
    }

    pub fn with_weights(mut self, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        self.p = p;
        self.q = q;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        let n = self.domain.dim();
        if self.p.len() != n || self.q.len() != n {
            return Err(FwanError::Config("weight vectors must match the dimension".into()));
        }
        if self.p.iter().chain(&self.q).any(|&w| w <= 0.0) {
            return Err(FwanError::Config("operator weights must be strictly positive".into()));
        }
        let total: f64 = self.p.iter().chain(&self.q).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FwanError::Config(format!("operator weights must sum to 1 (got {total})")));
        }
        if self.noise_delta < 0.0 {
            return Err(FwanError::Config("noise level must be non-negative".into()));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Clean Dirichlet trace of the true solution.
    pub fn g(&self, x: &[f64]) -> f64 {
        self.solution.value(x)
    }

    /// Analytic source term at an interior point.
    pub fn rhs(&self, x: &[f64]) -> Result<f64> {
        self.rhs_with_weights(&self.p, &self.q, x)
    }

    pub fn rhs_with_weights(&self, p: &[f64], q: &[f64], x: &[f64]) -> Result<f64> {
        manufactured_rhs(&self.solution, self.domain.bounds(), self.alpha, p, q, x)
    }

    pub fn with_alpha(mut self, alpha: FracOrder) -> Self {
        self.alpha = alpha;
        self
    }
}

/// A preset bundles the problem, training settings, both network specs,
/// and the fractional orders the original experiment sweeps over.
#[derive(Debug, Clone)]
pub struct PresetBundle {
    pub name: &'static str,
    pub problem: ProblemSpec,
    pub train: TrainConfig,
    pub u_spec: NetworkSpec,
    pub v_spec: NetworkSpec,
    pub alpha_choices: Vec<f64>,
}

pub const PRESET_NAMES: [&str; 5] =
    ["ex2d_smooth", "ex2d_noise", "ex2d_xy", "ex3d_smooth", "ex3d_less_smooth"];

/// Look up one of the experiment presets by name.
pub fn preset(name: &str) -> Result<PresetBundle> {
    let base_train = |n: usize| TrainConfig {
        m_interior: 2500,
        m_boundary: 400,
        n_inner: 50,
        k_u: 1,
        k_v: 1,
        lr_u: 0.0015,
        lr_v: 0.04,
        beta: 1e6,
        max_outer_iters: 2000,
        eval_every: 100,
        grid_resolution: if n == 2 { 101 } else { 51 },
        seeds: Seeds::default(),
        deterministic: true,
        squared_pairing: true,
        early_stop: false,
    };

    match name {
        "ex2d_smooth" => {
            let problem = ProblemSpec::new(
                Rect::unit(2),
                FracOrder::new(0.6)?,
                ManufacturedSolution::ProductOfSquares,
                0.0,
            )?;
            Ok(PresetBundle {
                name: "ex2d_smooth",
                problem,
                train: base_train(2),
                u_spec: NetworkSpec::default_u(2),
                v_spec: NetworkSpec::default_v(2),
                alpha_choices: vec![0.3, 0.6, 0.9],
            })
        }
        "ex2d_noise" => {
            let problem = ProblemSpec::new(
                Rect::unit(2),
                FracOrder::new(0.6)?,
                ManufacturedSolution::ProductOfSquares,
                0.05,
            )?;
            Ok(PresetBundle {
                name: "ex2d_noise",
                problem,
                train: base_train(2),
                u_spec: NetworkSpec::default_u(2),
                v_spec: NetworkSpec::default_v(2),
                alpha_choices: vec![0.3, 0.6, 0.9],
            })
        }
        "ex2d_xy" => {
            let problem = ProblemSpec::new(
                Rect::unit(2),
                FracOrder::new(0.4)?,
                ManufacturedSolution::Product,
                0.0,
            )?;
            let mut train = base_train(2);
            train.lr_u = 0.0001;
            train.lr_v = 0.001;
            Ok(PresetBundle {
                name: "ex2d_xy",
                problem,
                train,
                u_spec: NetworkSpec::default_u(2),
                v_spec: NetworkSpec::default_v(2),
                alpha_choices: vec![0.2, 0.4, 0.8],
            })
        }
        "ex3d_smooth" => {
            let problem = ProblemSpec::new(
                Rect::unit(3),
                FracOrder::new(0.5)?,
                ManufacturedSolution::ProductOfSquares,
                0.0,
            )?;
            Ok(PresetBundle {
                name: "ex3d_smooth",
                problem,
                train: base_train(3),
                u_spec: NetworkSpec::default_u(3),
                v_spec: NetworkSpec::default_v(3),
                alpha_choices: vec![0.1, 0.5, 0.9],
            })
        }
        "ex3d_less_smooth" => {
            let problem = ProblemSpec::new(
                Rect::unit(3),
                FracOrder::new(0.5)?,
                ManufacturedSolution::QuadraticBump,
                0.0,
            )?;
            Ok(PresetBundle {
                name: "ex3d_less_smooth",
                problem,
                train: base_train(3),
                u_spec: NetworkSpec::default_u(3).with_uniform_width(40),
                v_spec: NetworkSpec::default_v(3),
                alpha_choices: vec![0.5],
            })
        }
        other => Err(FwanError::Usage(format!(
            "unknown preset '{other}'; valid presets: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values_pin_the_experiment_settings() {
        let b = preset("ex2d_smooth").unwrap();
        assert_eq!(b.train.beta, 1e6);
        assert_eq!(b.train.m_interior, 2500);
        assert_eq!(b.train.m_boundary, 400);
        assert_eq!(b.train.n_inner, 50);
        assert_eq!(b.train.lr_u, 0.0015);
        assert_eq!(b.train.lr_v, 0.04);
        assert_eq!(b.train.max_outer_iters, 2000);
        assert_eq!(b.u_spec.widths, vec![20; 6]);
        assert_eq!(b.v_spec.widths, vec![50; 6]);
        assert_eq!(b.alpha_choices, vec![0.3, 0.6, 0.9]);

        let b = preset("ex2d_xy").unwrap();
        assert_eq!(b.train.lr_u, 0.0001);
        assert_eq!(b.train.lr_v, 0.001);
        assert_eq!(b.alpha_choices, vec![0.2, 0.4, 0.8]);

        let b = preset("ex2d_noise").unwrap();
        assert_eq!(b.problem.noise_delta, 0.05);

        let b = preset("ex3d_smooth").unwrap();
        assert_eq!(b.problem.dim(), 3);
        assert_eq!(b.train.grid_resolution, 51);
        assert_eq!(b.alpha_choices, vec![0.1, 0.5, 0.9]);

        let b = preset("ex3d_less_smooth").unwrap();
        assert_eq!(b.u_spec.widths, vec![40; 6]);
        assert_eq!(b.problem.solution, ManufacturedSolution::QuadraticBump);
    }

    #[test]
    fn unknown_preset_lists_the_valid_names() {
        let err = preset("nope").unwrap_err();
        let msg = err.to_string();
        for name in PRESET_NAMES {
            assert!(msg.contains(name), "error should list {name}: {msg}");
        }
    }

    #[test]
    fn preset_weights_are_uniform_and_traces_match() {
        for name in PRESET_NAMES {
            let b = preset(name).unwrap();
            let n = b.problem.dim();
            for (&p, &q) in b.problem.p.iter().zip(&b.problem.q) {
                assert_eq!(p, 1.0 / (2 * n) as f64);
                assert_eq!(q, 1.0 / (2 * n) as f64);
            }
            // the boundary trace is the solution itself on faces
            let mut x = vec![0.37; n];
            x[0] = 0.0;
            assert_eq!(b.problem.g(&x), b.problem.solution.value(&x));
        }
    }
}
