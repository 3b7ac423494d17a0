//! Local series launches away from the singular points of the radial
//! equation: the regular center, a dead-core edge, and the origin of the
//! solution that vanishes only at `r = 0`.

use super::State;
use crate::error::{Error, Result};
use crate::model::{Operator, Problem, Regime};

/// Taylor coefficients `u0 + a2 r^2 + a3 r^3 + a4 r^4` of the solution with
/// `u(0) = u0`, `u'(0) = 0`.
///
/// The potential `mu/(R-r)^2 = mu/R^2 (1 + 2r/R + 3r^2/R^2 + ...)` carries odd
/// powers of `r`, so a cubic term appears as soon as `mu != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterCoefficients {
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

/// `power = None` drops the `u^p` term (the linear harmonic).
pub(crate) fn center_coefficients(op: &Operator, power: Option<f64>, u0: f64) -> CenterCoefficients {
    let n = f64::from(op.dim_n);
    let r2 = op.radius * op.radius;
    let (s0, s1) = match power {
        Some(p) => (u0.powf(p), p * u0.powf(p - 1.0)),
        None => (0.0, 0.0),
    };
    let a2 = (s0 - op.mu * u0 / r2) / (2.0 * n);
    let a3 = -2.0 * op.mu * u0 / (3.0 * (n + 1.0) * r2 * op.radius);
    let a4 = (s1 * a2 - op.mu / r2 * (a2 + 3.0 * u0 / r2)) / (4.0 * (n + 2.0));
    CenterCoefficients { a2, a3, a4 }
}

pub(crate) fn center_launch(op: &Operator, power: Option<f64>, u0: f64, h: f64, tol: f64) -> Result<State> {
    if !(u0 > 0.0) || !u0.is_finite() {
        return Err(Error::NonPositive(format!("u0 = {u0}")));
    }
    if !(h > 0.0) {
        return Err(Error::NonPositive(format!("h = {h}")));
    }
    if h > op.radius / 100.0 {
        return Err(Error::HTooLarge {
            h,
            estimate: h,
            limit: op.radius / 100.0,
        });
    }
    let c = center_coefficients(op, power, u0);
    let remainder = c.a4.abs() * h.powi(4);
    let limit = tol * u0;
    if remainder > limit {
        return Err(Error::HTooLarge {
            h,
            estimate: remainder,
            limit,
        });
    }
    let u = u0 + h * h * (c.a2 + c.a3 * h);
    let du = h * (2.0 * c.a2 + 3.0 * c.a3 * h);
    Ok(State::new(op.radius, h, u, du))
}

/// Launch from the regular center at `r = h`. The `(N-1)/r` term is never
/// evaluated at `r = 0`; it is absorbed into the `2N a2` balance.
///
/// `tol` bounds the neglected quartic term relative to `u0`.
pub fn center_series(problem: &Problem, u0: f64, h: f64, tol: f64) -> Result<State> {
    problem.validate()?;
    center_launch(&problem.operator(), Some(problem.power), u0, h, tol)
}

/// Launch at `r = rho + h` next to a dead core `(0, rho]` (sublinear only),
/// from `u = C s^k + D s^(k+1)` with `s = r - rho`, `k = 2/(1-p)`.
///
/// `C` balances `u'' = u^p`; `D = -(N-1) C / (rho (3+p))` balances the
/// `(N-1)/r u'` term. The remainder estimate covers the next order of both
/// the curvature and the Hardy term and is compared with `tol`, relative.
pub fn dead_core_edge_series(problem: &Problem, rho: f64, h: f64, tol: f64) -> Result<State> {
    let regime = problem.validate()?;
    if regime != Regime::Sublinear {
        return Err(Error::WrongRegime("dead cores exist only for 0 < p < 1".into()));
    }
    let radius = problem.radius;
    if !(rho > 0.0) || !(rho < radius) {
        return Err(Error::NonPositive(format!("rho = {rho} must lie in (0, R)")));
    }
    if !(h > 0.0) || !(rho + h < radius) {
        return Err(Error::NonPositive(format!("h = {h} must satisfy 0 < rho + h < R")));
    }
    let p = problem.power;
    let ex = problem.exponents()?;
    let k = ex.deadcore_exponent.expect("sublinear");
    let c = ex.deadcore_edge_amplitude.expect("sublinear");
    let n1 = f64::from(problem.dim_n - 1);
    let d = -n1 * c / (rho * (3.0 + p));

    let gap = (radius - rho) - h;
    let estimate = (n1 * h / rho).powi(2) + problem.mu.abs() * h * h / (gap * gap * k * (k - 1.0));
    if estimate > tol {
        return Err(Error::HTooLarge {
            h,
            estimate,
            limit: tol,
        });
    }
    let u = h.powf(k) * (c + d * h);
    let du = h.powf(k - 1.0) * (k * c + (k + 1.0) * d * h);
    Ok(State {
        r: rho + h,
        delta: gap,
        u,
        du,
    })
}

/// Launch at `r = h` on the solution vanishing only at the origin,
/// `u = c'' r^k (1 + w(r))`, `w(0) = 0`, truncated at leading order.
///
/// The first neglected term is `b2 r^2` with
/// `b2 = -mu / (R^2 [(k+2)(k+N) - p k(k+N-2)])`; `|b2| h^2` is compared with
/// `tol`.
pub fn origin_touch_series(problem: &Problem, h: f64, tol: f64) -> Result<State> {
    let regime = problem.validate()?;
    if regime != Regime::Sublinear {
        return Err(Error::WrongRegime(
            "the origin-touching solution exists only for 0 < p < 1".into(),
        ));
    }
    let radius = problem.radius;
    if !(h > 0.0) {
        return Err(Error::NonPositive(format!("h = {h}")));
    }
    if h > radius / 100.0 {
        return Err(Error::HTooLarge {
            h,
            estimate: h,
            limit: radius / 100.0,
        });
    }
    let p = problem.power;
    let n = f64::from(problem.dim_n);
    let ex = problem.exponents()?;
    let k = ex.deadcore_exponent.expect("sublinear");
    let c = ex.origin_amplitude.expect("sublinear");
    let denom = (k + 2.0) * (k + n) - p * k * (k + n - 2.0);
    let b2 = -problem.mu / (radius * radius * denom);
    let estimate = b2.abs() * h * h;
    if estimate > tol {
        return Err(Error::HTooLarge {
            h,
            estimate,
            limit: tol,
        });
    }
    Ok(State::new(radius, h, c * h.powf(k), k * c * h.powf(k - 1.0)))
}
