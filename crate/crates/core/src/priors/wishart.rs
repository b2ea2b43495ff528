//! Wishart prior for 2x2 precision matrices.
//!
//! Follows the Bernardo-Smith parameterization: density proportional to
//! |Omega|^(v - 3/2) exp(-tr(B Omega)) with mean v B^{-1}. Equivalently a
//! standard Wishart with 2v degrees of freedom and scale (2B)^{-1}, which is
//! how the Bartlett sampler below is set up.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::priors::PriorError;
use crate::torus::PrecisionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WishartPrior {
    dof: f64,
    scale: PrecisionMatrix,
}

impl WishartPrior {
    /// `dof` is v >= 1; `scale` is the SPD matrix B.
    pub fn new(dof: f64, scale: PrecisionMatrix) -> Result<Self, PriorError> {
        if !dof.is_finite() || dof < 1.0 {
            return Err(PriorError::InvalidWishartDof(dof));
        }
        Ok(Self { dof, scale })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn scale(&self) -> &PrecisionMatrix {
        &self.scale
    }

    /// Prior mean v B^{-1}.
    pub fn mean(&self) -> PrecisionMatrix {
        let inv = self.scale.inverse();
        PrecisionMatrix {
            omega11: self.dof * inv.omega11,
            omega12: self.dof * inv.omega12,
            omega22: self.dof * inv.omega22,
        }
    }

    /// Bartlett draw: standard Wishart with 2v degrees of freedom and scale
    /// (2B)^{-1}, valid for non-integer v >= 1.
    pub fn sample(&self, rng: &mut impl Rng) -> PrecisionMatrix {
        let n = 2.0 * self.dof;
        let b2 = PrecisionMatrix {
            omega11: 2.0 * self.scale.omega11,
            omega12: 2.0 * self.scale.omega12,
            omega22: 2.0 * self.scale.omega22,
        };
        let [l11, l21, l22] = b2.inverse().cholesky_lower();
        let c1 = ChiSquared::new(n).expect("dof > 0").sample(rng).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        let c2 = ChiSquared::new(n - 1.0)
            .expect("dof > 1")
            .sample(rng)
            .sqrt();
        // M = L * [[c1, 0], [z, c2]]; Omega = M M^T.
        let m11 = l11 * c1;
        let m21 = l21 * c1 + l22 * z;
        let m22 = l22 * c2;
        PrecisionMatrix {
            omega11: m11 * m11,
            omega12: m11 * m21,
            omega22: m21 * m21 + m22 * m22,
        }
    }

    /// log h2(Omega) up to an additive constant that is fixed for a given
    /// prior: (v - 3/2) ln|Omega| - tr(B Omega).
    pub fn log_density(&self, omega: &PrecisionMatrix) -> f64 {
        (self.dof - 1.5) * omega.det().ln() - self.scale.trace_product(omega)
    }

    /// Conjugate update under a bivariate-normal likelihood with known mean:
    /// `n_obs` observations with scatter S = sum d d^T give the posterior
    /// Wishart(v + n/2, B + S/2). Used as the independence-sampler proposal
    /// for the precision updates.
    pub fn posterior_given_normal(
        &self,
        n_obs: usize,
        s11: f64,
        s12: f64,
        s22: f64,
    ) -> WishartPrior {
        WishartPrior {
            dof: self.dof + 0.5 * n_obs as f64,
            scale: PrecisionMatrix {
                omega11: self.scale.omega11 + 0.5 * s11,
                omega12: self.scale.omega12 + 0.5 * s12,
                omega22: self.scale.omega22 + 0.5 * s22,
            },
        }
    }
}
