//! Objective functions with analytic gradients and the declared regularity
//! constants consumed by the bound calculators.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which analytic objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// f(x) = ln(||x||^2 + 1).
    LogNorm,
    /// f(x) = (kappa/2) ||x - center||^2 (center stored separately).
    Quadratic,
    /// The 2-d Ackley benchmark.
    Ackley,
    /// f(y) = (y^2 - 1)^2, one-dimensional.
    DoubleWell,
}

/// A differentiable objective together with its declared constants.
///
/// The constants are declarations (checked by sampling in tests), not proofs;
/// the bound calculators consume them as given.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    dim: usize,
    center: Vec<f64>,
    kappa_param: f64,
    /// Gradient bound, if one holds globally.
    pub eta: Option<f64>,
    /// Strong-convexity constant, if the objective is strongly convex.
    pub kappa: Option<f64>,
    /// Lipschitz constant of the gradient, if declared.
    pub mu: Option<f64>,
    /// Known minimizer.
    pub optimum: Option<Vec<f64>>,
    /// Box used by sampling-based checks.
    pub test_box: (f64, f64),
}

/// f(x) = ln(||x||^2 + 1) on R^m; gradient bound eta = 1, Lipschitz mu = 2.
pub fn lognorm_objective(m: usize) -> Objective {
    assert!(m >= 1, "dimension must be >= 1");
    Objective {
        kind: ObjectiveKind::LogNorm,
        dim: m,
        center: vec![0.0; m],
        kappa_param: 0.0,
        eta: Some(1.0),
        kappa: None,
        mu: Some(2.0),
        optimum: Some(vec![0.0; m]),
        test_box: (-20.0, 20.0),
    }
}

/// f(x) = (kappa/2)||x - center||^2; kappa = mu = the given curvature.
pub fn quadratic_objective(m: usize, kappa: f64, center: Vec<f64>) -> Result<Objective> {
    if kappa <= 0.0 {
        return Err(Error::Parameter(format!("quadratic needs kappa > 0, got {kappa}")));
    }
    if center.len() != m {
        return Err(Error::Parameter(format!(
            "center has dimension {}, expected {m}",
            center.len()
        )));
    }
    Ok(Objective {
        kind: ObjectiveKind::Quadratic,
        dim: m,
        center: center.clone(),
        kappa_param: kappa,
        eta: None,
        kappa: Some(kappa),
        mu: Some(kappa),
        optimum: Some(center),
        test_box: (-10.0, 10.0),
    })
}

/// The 2-d Ackley benchmark with global minimum 0 at the origin.
///
/// The radial term is not differentiable at the origin; the gradient is
/// defined as 0 there (the symmetric subgradient at the global minimum).
pub fn ackley_objective() -> Objective {
    Objective {
        kind: ObjectiveKind::Ackley,
        dim: 2,
        center: vec![0.0; 2],
        kappa_param: 0.0,
        eta: None,
        kappa: None,
        mu: None,
        optimum: Some(vec![0.0; 2]),
        test_box: (-15.0, 15.0),
    }
}

/// Symmetric 1-d double well f(y) = (y^2 - 1)^2, minima at +/-1.
pub fn double_well_objective() -> Objective {
    Objective {
        kind: ObjectiveKind::DoubleWell,
        dim: 1,
        center: vec![0.0],
        kappa_param: 0.0,
        eta: None,
        kappa: None,
        mu: None,
        optimum: None,
        test_box: (-2.5, 2.5),
    }
}

impl Objective {
    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match self.kind {
            ObjectiveKind::LogNorm => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (r2 + 1.0).ln()
            }
            ObjectiveKind::Quadratic => {
                let r2: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                0.5 * self.kappa_param * r2
            }
            ObjectiveKind::Ackley => {
                let (a, b) = (x[0], x[1]);
                let s = (0.5 * (a * a + b * b)).sqrt();
                let c = 0.5 * ((std::f64::consts::TAU * a).cos() + (std::f64::consts::TAU * b).cos());
                -20.0 * (-0.2 * s).exp() - c.exp() + std::f64::consts::E + 20.0
            }
            ObjectiveKind::DoubleWell => {
                let y = x[0];
                let w = y * y - 1.0;
                w * w
            }
        }
    }

    /// Writes the analytic gradient into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match self.kind {
            ObjectiveKind::LogNorm => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let scale = 2.0 / (r2 + 1.0);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = scale * v;
                }
            }
            ObjectiveKind::Quadratic => {
                for ((o, v), c) in out.iter_mut().zip(x).zip(&self.center) {
                    *o = self.kappa_param * (v - c);
                }
            }
            ObjectiveKind::Ackley => {
                let (a, b) = (x[0], x[1]);
                let s = (0.5 * (a * a + b * b)).sqrt();
                let c = 0.5 * ((std::f64::consts::TAU * a).cos() + (std::f64::consts::TAU * b).cos());
                let radial = if s > 0.0 { 2.0 * (-0.2 * s).exp() / s } else { 0.0 };
                let ec = c.exp();
                out[0] = radial * a + std::f64::consts::PI * (std::f64::consts::TAU * a).sin() * ec;
                out[1] = radial * b + std::f64::consts::PI * (std::f64::consts::TAU * b).sin() * ec;
            }
            ObjectiveKind::DoubleWell => {
                let y = x[0];
                out[0] = 4.0 * y * (y * y - 1.0);
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        g
    }
}

/// Compares the analytic gradient against central finite differences at the
/// given points and returns the worst relative error. Component errors are
/// normalized by max(1, |gradient|), so near-critical points are compared
/// absolutely. Errors out on non-finite values.
pub fn gradient_check(obj: &Objective, points: &[Vec<f64>], h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::Parameter(format!("step h must be > 0, got {h}")));
    }
    let m = obj.dim();
    let mut worst: f64 = 0.0;
    for p in points {
        let ana = obj.gradient(p);
        let scale = ana.iter().fold(1.0f64, |acc, g| acc.max(g.abs()));
        let mut xp = p.clone();
        for i in 0..m {
            let x0 = p[i];
            xp[i] = x0 + h;
            let fp = obj.value(&xp);
            xp[i] = x0 - h;
            let fm = obj.value(&xp);
            xp[i] = x0;
            let num = (fp - fm) / (2.0 * h);
            if !num.is_finite() || !ana[i].is_finite() {
                return Err(Error::Parameter(format!(
                    "non-finite gradient at {p:?}, component {i}"
                )));
            }
            worst = worst.max((ana[i] - num).abs() / scale);
        }
    }
    Ok(worst)
}
