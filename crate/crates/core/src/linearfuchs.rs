//! Linear comparison problems: the radial `L_mu`-harmonic of the ball, the
//! profile `eta` on a shell next to the boundary, and perturbed indicial
//! exponents.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{default_correction, ladder_fit, FitResult};
use crate::error::{Error, Result};
use crate::model::{indicial_roots, Operator, HARDY_CONSTANT_BALL};
use crate::stepper::{
    center_coefficients, center_launch, run, IntegratorOptions, RadialOde, Source, State, Trajectory, SERIES_TOL,
};

/// Tolerance of the coefficient fit stored in [`LinearTrajectory`].
pub const HINT_FIT_TOL: f64 = 1e-6;

/// Trajectory of a linear problem; samples are `(r, h, h')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTrajectory {
    pub trajectory: Trajectory,
    /// `lim h/(R-r)^(beta-)`, when the fit converges
    pub coefficient_hint: Option<f64>,
    pub fit: Option<FitResult>,
}

fn fit_hint(traj: &Trajectory, mu: f64) -> (Option<f64>, Option<FitResult>) {
    let bm = indicial_roots(mu).0;
    match ladder_fit(traj, bm, default_correction(bm), HINT_FIT_TOL) {
        Ok(fit) => (fit.converged.then_some(fit.coefficient), Some(fit)),
        Err(_) => (None, None),
    }
}

/// Radial solution of `h'' + (N-1)/r h' + mu/(R-r)^2 h = 0` with
/// `h(0) = h0`, `h'(0) = 0`, launched by the center series without the
/// nonlinear term. The absolute tolerance is scaled by `h0` so that the
/// computation is equivariant under `h0 -> lambda h0`.
pub fn integrate_linear(op: &Operator, h0: f64, opts: &IntegratorOptions) -> Result<LinearTrajectory> {
    op.validate()?;
    if !(h0 > 0.0) {
        return Err(Error::NonPositive(format!("h0 = {h0}")));
    }
    let a4 = center_coefficients(op, None, 1.0).a4.abs();
    let h = if a4 > 0.0 {
        (1e-2 * SERIES_TOL / a4).powf(0.25).min(1e-3 * op.radius)
    } else {
        1e-3 * op.radius
    };
    let start = center_launch(op, None, h0, h, SERIES_TOL)?;
    let opts = IntegratorOptions {
        abs_tol: opts.abs_tol * h0,
        ..*opts
    };
    let trajectory = run(
        RadialOde {
            op: *op,
            source: Source::Linear,
        },
        start,
        &opts,
    )?;
    let (coefficient_hint, fit) = fit_hint(&trajectory, op.mu);
    Ok(LinearTrajectory {
        trajectory,
        coefficient_hint,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaProfile {
    pub profile: LinearTrajectory,
    /// `C_eta = lim eta/(delta0 - r)^(beta-)`
    pub c_eta: FitResult,
    /// `eta' >= 0` at every sample
    pub increasing: bool,
}

/// `eta'' + (N-1)/r eta' + mu/(delta0 - r)^2 eta = 0` on `(delta0/2, delta0)`
/// with `eta(delta0/2) = 1`, `eta'(delta0/2) = 0`, for `mu < 0`.
pub fn eta_profile(dim_n: u32, mu: f64, delta0: f64, opts: &IntegratorOptions) -> Result<EtaProfile> {
    if !(mu < 0.0) {
        return Err(Error::WrongSign(mu));
    }
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::NonPositive(format!("delta0 = {delta0}")));
    }
    let op = Operator {
        dim_n,
        radius: delta0,
        mu,
    };
    op.validate()?;
    let start = State::new(delta0, 0.5 * delta0, 1.0, 0.0);
    let trajectory = run(
        RadialOde {
            op,
            source: Source::Linear,
        },
        start,
        opts,
    )?;
    let increasing = trajectory.samples.iter().all(|s| s.du >= 0.0);
    if !increasing {
        log::warn!("eta decreases somewhere on (delta0/2, delta0)");
    }
    let bm = indicial_roots(mu).0;
    let c_eta = ladder_fit(&trajectory, bm, default_correction(bm), HINT_FIT_TOL)?;
    let coefficient_hint = c_eta.converged.then_some(c_eta.coefficient);
    Ok(EtaProfile {
        profile: LinearTrajectory {
            trajectory,
            coefficient_hint,
            fit: Some(c_eta.clone()),
        },
        c_eta,
        increasing,
    })
}

/// Smaller root `1/2 - sqrt(1/4 - mu + eps^(p-1))` of
/// `b(b-1) + mu - eps^(p-1) = 0`.
pub fn perturbed_exponent(mu: f64, p: f64, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::NonPositive(format!("eps = {eps}")));
    }
    let shift = if eps == 0.0 { 0.0 } else { eps.powf(p - 1.0) };
    let disc = HARDY_CONSTANT_BALL - mu + shift;
    if !(disc > 0.0) {
        return Err(Error::Degenerate(disc));
    }
    if shift == 0.0 {
        return Ok(indicial_roots(mu).0);
    }
    Ok(0.5 - disc.sqrt())
}

/// Discrete check of `(sigma eta')' <= 0`, `sigma = delta^(2 beta)
/// (delta0 - delta)^(N-1)`, written in `delta = delta0 - r`. Returns the
/// largest positive excess relative to the local flux scale.
pub fn eta_flux_excess(profile: &EtaProfile, dim_n: u32, mu: f64) -> f64 {
    let traj = &profile.profile.trajectory;
    let delta0 = traj.radius;
    let beta = indicial_roots(mu).0;
    let n1 = f64::from(dim_n - 1);
    // with v = eta delta^(-beta) and sigma as above the equation reads
    // (sigma v_delta)_delta = sigma beta (N-1) v / ((delta0 - delta) delta)
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| {
            let d = s.delta;
            let scale = d.powf(-beta);
            let dv = scale * (-s.du - beta * s.u / d);
            let sigma = d.powf(2.0 * beta) * (delta0 - d).powf(n1);
            (s.r, sigma * dv)
        })
        .collect();
    // samples run toward delta = 0, so a flux decreasing in delta must not
    // decrease from one sample to the next
    let mut worst: f64 = 0.0;
    for w in pts.windows(2) {
        let (fa, fb) = (w[0].1, w[1].1);
        let scale = fa.abs().max(fb.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((fa - fb) / scale);
    }
    worst
}
