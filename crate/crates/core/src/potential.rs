//! Attraction/repulsion interaction g(x) = -x [g_a(||x||) - g_r(||x||)] with
//! linear attraction g_a = a and optional Gaussian-bounded repulsion
//! g_r(r) = c exp(-r^2), plus the scalar potential J with grad J = -g.

use serde::{Deserialize, Serialize};

/// Repulsion family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repulsion {
    None,
    /// g_r(r) = c exp(-r^2), c > 0.
    Gaussian(f64),
}

/// Interaction between two threads, parameterized by the linear attraction
/// strength `a` and the repulsion family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub a: f64,
    pub repulsion: Repulsion,
}

impl Potential {
    pub fn new(a: f64, repulsion: Repulsion) -> Self {
        Potential { a, repulsion }
    }

    pub fn linear(a: f64) -> Self {
        Potential { a, repulsion: Repulsion::None }
    }

    fn g_r(&self, r2: f64) -> f64 {
        match self.repulsion {
            Repulsion::None => 0.0,
            Repulsion::Gaussian(c) => c * (-r2).exp(),
        }
    }

    /// Uniform bound b on g_r(r) r^2: the maximum of c r^2 e^{-r^2} is c/e
    /// (attained at r^2 = 1); zero without repulsion.
    pub fn repulsion_bound(&self) -> f64 {
        match self.repulsion {
            Repulsion::None => 0.0,
            Repulsion::Gaussian(c) => c / std::f64::consts::E,
        }
    }

    /// Equilibrium distance rho where g_a(rho) = g_r(rho), i.e. a = c e^{-rho^2}.
    /// Present only when the repulsion dominates at short range (c > a > 0).
    pub fn equilibrium_distance(&self) -> Option<f64> {
        match self.repulsion {
            Repulsion::None => None,
            Repulsion::Gaussian(c) => {
                if self.a > 0.0 && c > self.a {
                    Some((c / self.a).ln().sqrt())
                } else {
                    None
                }
            }
        }
    }

    /// g(x) = -x [a - g_r(||x||)]; odd, g(0) = 0.
    pub fn eval_g_into(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mag = self.a - self.g_r(r2);
        for (o, v) in out.iter_mut().zip(x) {
            *o = -v * mag;
        }
    }

    pub fn eval_g(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_g_into(x, &mut out);
        out
    }

    /// Scalar potential J = J_a + J_r with grad J = -g:
    /// J_a = (a/2)||x||^2 and J_r = (c/2) e^{-||x||^2} for Gaussian repulsion.
    ///
    /// The repulsion part decays to 0 at infinity; the additive constant is
    /// irrelevant to the dynamics and cancels in Gibbs normalization.
    pub fn eval_j(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let j_a = 0.5 * self.a * r2;
        let j_r = match self.repulsion {
            Repulsion::None => 0.0,
            Repulsion::Gaussian(c) => 0.5 * c * (-r2).exp(),
        };
        j_a + j_r
    }
}
