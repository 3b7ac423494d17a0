//! Problem instances, parameter regimes and closed-form constants for
//! `u'' + (N-1)/r u' + mu/(R-r)^2 u = u^p` on the ball of radius `R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hardy constant of a ball.
pub const HARDY_CONSTANT_BALL: f64 = 0.25;

/// One instance `(N, R, mu, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub dim_n: u32,
    pub radius: f64,
    pub mu: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `0 < p < 1`
    Sublinear,
    /// `p > 1`
    Superlinear,
}

/// Closed-form constants of a problem. Fields that only make sense in one
/// regime are `None` in the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub mu_star: f64,
    /// `2/(p-1)`
    pub blowup_exponent: Option<f64>,
    /// `(mu + mu*)^(1/(p-1))`, boundary amplitude of the maximal solution.
    pub blowup_amplitude: Option<f64>,
    /// `(mu*)^(1/(p-1))`, amplitude of an interior blowup.
    pub interior_blowup_amplitude: Option<f64>,
    /// `2/(1-p)`
    pub deadcore_exponent: Option<f64>,
    /// `(mu* + 2(N-1)/(1-p))^(1/(p-1))`, amplitude at the origin of the
    /// solution vanishing only at `r = 0`.
    pub origin_amplitude: Option<f64>,
    /// `[(1-p)^2 / (2(1+p))]^(1/(1-p))`, amplitude at a dead-core edge.
    pub deadcore_edge_amplitude: Option<f64>,
}

/// Roots `(beta_minus, beta_plus)` of `beta(beta-1) + mu = 0` for `mu <= 1/4`.
///
/// The smaller root is taken as `mu / beta_plus` so it stays accurate when
/// `mu` is close to zero.
pub fn indicial_roots(mu: f64) -> (f64, f64) {
    let disc = (0.25 - mu).max(0.0).sqrt();
    let beta_plus = 0.5 + disc;
    (mu / beta_plus, beta_plus)
}

/// `mu* = 2(p+1)/(p-1)^2`.
pub fn mu_star(power: f64) -> f64 {
    2.0 * (power + 1.0) / ((power - 1.0) * (power - 1.0))
}

impl Problem {
    pub fn new(dim_n: u32, radius: f64, mu: f64, power: f64) -> Self {
        Self {
            dim_n,
            radius,
            mu,
            power,
        }
    }

    /// Checks every hypothesis under which the radial solution set is
    /// described and returns the regime.
    pub fn validate(&self) -> Result<Regime> {
        if self.dim_n < 1 {
            return Err(Error::NonPositive(format!("dim_n = {}", self.dim_n)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::NonPositive(format!("radius = {}", self.radius)));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(Error::NonPositive(format!("power = {}", self.power)));
        }
        if !self.mu.is_finite() {
            return Err(Error::NonPositive(format!("mu = {}", self.mu)));
        }
        if self.mu == 0.0 {
            return Err(Error::MuZero);
        }
        if self.power == 1.0 {
            return Err(Error::PowerOne);
        }
        if self.mu >= HARDY_CONSTANT_BALL {
            return Err(Error::MuAboveHardy(self.mu));
        }
        if self.power > 1.0 {
            let ms = mu_star(self.power);
            if self.mu <= -ms {
                return Err(Error::NoSolutionRegime {
                    mu: self.mu,
                    power: self.power,
                    neg_mu_star: -ms,
                });
            }
            Ok(Regime::Superlinear)
        } else {
            Ok(Regime::Sublinear)
        }
    }

    pub fn regime(&self) -> Result<Regime> {
        self.validate()
    }

    pub fn exponents(&self) -> Result<Exponents> {
        let regime = self.validate()?;
        let p = self.power;
        let (beta_minus, beta_plus) = indicial_roots(self.mu);
        let ms = mu_star(p);
        let mut e = Exponents {
            beta_minus,
            beta_plus,
            mu_star: ms,
            blowup_exponent: None,
            blowup_amplitude: None,
            interior_blowup_amplitude: None,
            deadcore_exponent: None,
            origin_amplitude: None,
            deadcore_edge_amplitude: None,
        };
        match regime {
            Regime::Superlinear => {
                let inv = 1.0 / (p - 1.0);
                e.blowup_exponent = Some(2.0 * inv);
                e.blowup_amplitude = Some((self.mu + ms).powf(inv));
                e.interior_blowup_amplitude = Some(ms.powf(inv));
            }
            Regime::Sublinear => {
                let n1 = f64::from(self.dim_n - 1);
                e.deadcore_exponent = Some(2.0 / (1.0 - p));
                e.origin_amplitude = Some((ms + 2.0 * n1 / (1.0 - p)).powf(1.0 / (p - 1.0)));
                e.deadcore_edge_amplitude = Some(((1.0 - p) * (1.0 - p) / (2.0 * (1.0 + p))).powf(1.0 / (1.0 - p)));
            }
        }
        Ok(e)
    }

    pub(crate) fn operator(&self) -> Operator {
        Operator {
            dim_n: self.dim_n,
            radius: self.radius,
            mu: self.mu,
        }
    }
}

/// Linear part `Δ + mu/(R-r)^2` of the radial equation, shared by the
/// nonlinear problem and the linear comparison problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    pub dim_n: u32,
    pub radius: f64,
    pub mu: f64,
}

impl Operator {
    pub fn validate(&self) -> Result<()> {
        if self.dim_n < 1 {
            return Err(Error::NonPositive(format!("dim_n = {}", self.dim_n)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::NonPositive(format!("radius = {}", self.radius)));
        }
        if !self.mu.is_finite() {
            return Err(Error::NonPositive(format!("mu = {}", self.mu)));
        }
        if self.mu >= HARDY_CONSTANT_BALL {
            return Err(Error::MuAboveHardy(self.mu));
        }
        Ok(())
    }
}
