//! Boundary asymptotics of computed trajectories: power-law coefficients,
//! the limit of `w = u (R-r)^(2/(p-1))`, the `v`-form of the equation, and
//! the envelope and certificate formulas of the superlinear problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{indicial_roots, mu_star, Problem, Regime};
use crate::stepper::{hermite, Event, Trajectory, SWITCH_FRACTION};

/// Number of ladder points; the ladder spans `2^(LADDER_LEN - 1)`.
const LADDER_LEN: usize = 7;
/// Fits use the samples in `[delta_stop, FIT_WINDOW * delta_stop]`.
const FIT_WINDOW: f64 = 100.0;
const MIN_WINDOW_SAMPLES: usize = 6;

/// An extrapolated asymptotic coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficient: f64,
    /// exponent `beta` of the fitted law `u ~ coefficient * delta^beta`
    pub exponent: f64,
    /// relative difference of the last two history entries
    pub residual: f64,
    /// extrapolated estimates, coarse to fine
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Next-order exponent for a fit of `u ~ c delta^exponent`: the distance to
/// the other indicial root `1 - 2 exponent` or the regular correction 1,
/// whichever decays slower.
pub fn default_correction(exponent: f64) -> f64 {
    let gap = 1.0 - 2.0 * exponent;
    if gap > 0.05 {
        gap.min(1.0)
    } else {
        1.0
    }
}

fn delta_stop_of(traj: &Trajectory) -> Result<f64> {
    match traj.event {
        Event::ReachedBoundaryWindow { delta_stop } => Ok(delta_stop),
        ev => Err(Error::NoBoundaryReached(ev.to_string())),
    }
}

/// One-level Richardson extrapolation of `q_k = c + a x_k^g` on a ladder
/// with ratio `x_{k+1} / x_k = 1/2`.
fn richardson(q: &[f64], correction: f64) -> Vec<f64> {
    let f = 0.5f64.powf(correction);
    q.windows(2).map(|w| (w[1] - f * w[0]) / (1.0 - f)).collect()
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / b.abs()
    }
}

/// Ladder fit of `q = u delta^(-exponent)` on `delta_k = 100 delta_stop 2^-k`
/// with one Richardson level in `correction`. Never fails on poor
/// convergence; the result carries the flag instead.
pub fn ladder_fit(traj: &Trajectory, exponent: f64, correction: f64, tol: f64) -> Result<FitResult> {
    let delta_stop = delta_stop_of(traj)?;
    let top = FIT_WINDOW * delta_stop;
    let found = traj
        .samples
        .iter()
        .filter(|s| s.delta >= delta_stop && s.delta <= top)
        .count();
    if found < MIN_WINDOW_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_WINDOW_SAMPLES,
            found,
        });
    }
    let mut q = Vec::with_capacity(LADDER_LEN);
    for k in 0..LADDER_LEN {
        let delta = top * 0.5f64.powi(k as i32);
        let (qk, _) = traj.scaled_at(delta, exponent).ok_or(Error::TooFewSamples {
            needed: MIN_WINDOW_SAMPLES,
            found,
        })?;
        q.push(qk);
    }
    let history = richardson(&q, correction);
    let n = history.len();
    let coefficient = history[n - 1];
    let residual = relative_change(history[n - 2], coefficient);
    let converged = residual.is_finite() && coefficient.is_finite() && residual < tol;
    Ok(FitResult {
        coefficient,
        exponent,
        residual,
        history,
        converged,
    })
}

/// Coefficient `c` of `u ~ c (R-r)^exponent` at the boundary, with the
/// default correction exponent.
pub fn fit_power_coefficient(traj: &Trajectory, exponent: f64, tol: f64) -> Result<FitResult> {
    fit_power_coefficient_with(traj, exponent, default_correction(exponent), tol)
}

pub fn fit_power_coefficient_with(traj: &Trajectory, exponent: f64, correction: f64, tol: f64) -> Result<FitResult> {
    let fit = ladder_fit(traj, exponent, correction, tol)?;
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged { history: fit.history })
    }
}

/// `w = u delta^(2/(p-1))` at every sample, as `(r, w)`.
pub fn w_samples(traj: &Trajectory, problem: &Problem) -> Result<Vec<(f64, f64)>> {
    let g = blowup_exponent(problem)?;
    Ok(traj.samples.iter().map(|s| (s.r, s.u * s.delta.powf(g))).collect())
}

fn blowup_exponent(problem: &Problem) -> Result<f64> {
    match problem.validate()? {
        Regime::Superlinear => Ok(2.0 / (problem.power - 1.0)),
        Regime::Sublinear => Err(Error::WrongRegime("w-transform needs p > 1".into())),
    }
}

/// Boundary limit of `w = u (R-r)^(2/(p-1))`.
///
/// The ladder `delta_k = min(R/4, delta_0) 2^-k` runs down to the last
/// sample and is extrapolated with correction exponent 1. A shot at the
/// numerical threshold follows the maximal solution only down to some depth,
/// so the window whose two extrapolants agree best is reported. A
/// trajectory without such a window whose tail has decayed below
/// `tol` times the maximal amplitude has limit 0.
pub fn w_transform_limit(traj: &Trajectory, problem: &Problem, tol: f64) -> Result<FitResult> {
    let g = blowup_exponent(problem)?;
    let exponent = -g;
    let amplitude = (problem.mu + mu_star(problem.power)).powf(1.0 / (problem.power - 1.0));
    let first = traj.samples[0].delta;
    let last = traj.last().delta;
    let mut q = Vec::new();
    let mut delta = (problem.radius / 4.0).min(first);
    while delta >= last {
        match traj.scaled_at(delta, exponent) {
            Some((v, _)) => q.push(v),
            None => break,
        }
        delta *= 0.5;
    }
    if q.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: q.len(),
        });
    }
    let ext = richardson(&q, 1.0);
    let mut best: Option<(usize, f64)> = None;
    for k in 0..ext.len() - 1 {
        let (a, b) = (ext[k], ext[k + 1]);
        if !(a > 0.0 && b > 0.0) {
            continue;
        }
        let res = relative_change(a, b);
        if best.is_none_or(|(_, r)| res < r) {
            best = Some((k + 1, res));
        }
    }
    if let Some((k, residual)) = best {
        if residual < tol {
            return Ok(FitResult {
                coefficient: ext[k],
                exponent,
                residual,
                history: ext[..=k].to_vec(),
                converged: true,
            });
        }
    }
    let tail = traj.last().u * last.powf(g);
    if traj.reached_boundary() && tail < tol * amplitude {
        return Ok(FitResult {
            coefficient: 0.0,
            exponent,
            residual: tail / amplitude,
            history: ext,
            converged: true,
        });
    }
    Err(Error::NotConverged { history: ext })
}

/// One sample of `v = u delta^(-beta-)`; `dv` is `dv/d delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VSample {
    pub delta: f64,
    pub v: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VTransform {
    pub beta: f64,
    /// samples with `delta <= R/100`, ordered by decreasing `delta`
    pub samples: Vec<VSample>,
    /// `(delta, relative residual)` of
    /// `(sigma v')' = sigma (v^p delta^(beta(p-1)) + beta (N-1) v / ((R-delta) delta))`,
    /// `sigma = delta^(2 beta) (R-delta)^(N-1)`, at interior samples
    pub residuals: Vec<(f64, f64)>,
}

impl VTransform {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Derivative at the middle of three points on a nonuniform grid.
fn centered(x: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// `v`-form of the boundary layer samples with the discrete residual of the
/// divergence form equation.
pub fn v_transform(traj: &Trajectory, problem: &Problem) -> Result<VTransform> {
    problem.validate()?;
    let beta = indicial_roots(problem.mu).0;
    let radius = problem.radius;
    let p = problem.power;
    let n1 = f64::from(problem.dim_n - 1);
    let samples: Vec<VSample> = traj
        .samples
        .iter()
        .filter(|s| s.delta <= SWITCH_FRACTION * radius * (1.0 + 1e-12))
        .map(|s| {
            let scale = s.delta.powf(-beta);
            VSample {
                delta: s.delta,
                v: s.u * scale,
                dv: scale * (-s.du - beta * s.u / s.delta),
            }
        })
        .collect();
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: samples.len(),
        });
    }
    let sigma = |d: f64| d.powf(2.0 * beta) * (radius - d).powf(n1);
    let flux: Vec<f64> = samples.iter().map(|s| sigma(s.delta) * s.dv).collect();
    let residuals = samples
        .windows(3)
        .zip(flux.windows(3))
        .map(|(s, f)| {
            let d = s[1].delta;
            let lhs = centered([s[0].delta, s[1].delta, s[2].delta], [f[0], f[1], f[2]]);
            let v = s[1].v;
            let rhs = sigma(d) * (v.max(0.0).powf(p) * d.powf(beta * (p - 1.0)) + beta * n1 * v / ((radius - d) * d));
            let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            (d, (lhs - rhs).abs() / scale)
        })
        .collect();
    Ok(VTransform {
        beta,
        samples,
        residuals,
    })
}

/// `w0(r) = (mu* + mu + 2(N-1)(R-r)/((p-1) r))^(1/(p-1))`, the nonzero root
/// of the right-hand side of the `w` equation.
pub fn w0_profile(problem: &Problem, r: f64) -> Result<f64> {
    blowup_exponent(problem)?;
    let p = problem.power;
    let n1 = f64::from(problem.dim_n - 1);
    let eta = if n1 == 0.0 {
        0.0
    } else {
        2.0 * n1 * (problem.radius - r) / ((p - 1.0) * r)
    };
    Ok((mu_star(p) + problem.mu + eta).powf(1.0 / (p - 1.0)))
}

/// `m = mu* + mu - c+^(p-1) + 2(N-1)(R-r)/((p-1) r)`. `m < 0` on `[r0, R)`
/// certifies `c+ (R-r)^(-2/(p-1))` as a supersolution on `(r0, R)`.
pub fn supersolution_margin(problem: &Problem, c_plus: f64, r: f64) -> Result<f64> {
    blowup_exponent(problem)?;
    let p = problem.power;
    let n1 = f64::from(problem.dim_n - 1);
    let eta = 2.0 * n1 * (problem.radius - r) / ((p - 1.0) * r);
    Ok(mu_star(p) + problem.mu - c_plus.powf(p - 1.0) + eta)
}

/// Whether `c- (R-r)^(-2/(p-1))` is a subsolution on `(0, R)`, i.e.
/// `c-^(p-1) <= mu + mu*`.
pub fn subsolution_check(problem: &Problem, c_minus: f64) -> Result<bool> {
    blowup_exponent(problem)?;
    let p = problem.power;
    Ok(c_minus.powf(p - 1.0) <= problem.mu + mu_star(p))
}

/// A local extremum of `w` that sits on the wrong side of `w0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub r: f64,
    pub w: f64,
    pub w0: f64,
    pub maximum: bool,
}

/// Local extrema of `w`, located by the sign changes of `w'` between
/// samples and evaluated by Hermite interpolation, as `(r, w, is_max)`.
pub fn w_extrema(traj: &Trajectory, problem: &Problem) -> Result<Vec<(f64, f64, bool)>> {
    let g = blowup_exponent(problem)?;
    let pts: Vec<(f64, f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.r > 0.0 && s.delta > 0.0)
        .map(|s| {
            let scale = s.delta.powf(g);
            (s.r, s.u * scale, scale * (s.du - g * s.u / s.delta))
        })
        .collect();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((ra, wa, da), (rb, wb, db)) = (w[0], w[1]);
        if da == 0.0 || db == 0.0 || da.signum() == db.signum() {
            continue;
        }
        let r = ra + (rb - ra) * da / (da - db);
        let (value, _) = hermite(ra, wa, da, rb, wb, db, r);
        out.push((r, value, da > 0.0));
    }
    Ok(out)
}

/// Extrema of `w` violating "maxima below `w0`, minima above `w0`" by more
/// than `tol` relative.
pub fn envelope_violations(traj: &Trajectory, problem: &Problem, tol: f64) -> Result<Vec<EnvelopeViolation>> {
    let mut out = Vec::new();
    for (r, w, maximum) in w_extrema(traj, problem)? {
        let w0 = w0_profile(problem, r)?;
        let bad = if maximum {
            w > w0 * (1.0 + tol)
        } else {
            w < w0 * (1.0 - tol)
        };
        if bad {
            out.push(EnvelopeViolation { r, w, w0, maximum });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepper::State;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> (f64, f64), delta_stop: f64) -> Trajectory {
        let radius = 1.0;
        let mut samples = Vec::new();
        let mut d = 0.5;
        while d > delta_stop * 1.0001 {
            let (u, du) = f(d);
            samples.push(State {
                r: radius - d,
                delta: d,
                u,
                du,
            });
            d *= 0.5f64.powf(0.25);
        }
        let (u, du) = f(delta_stop);
        samples.push(State {
            r: radius - delta_stop,
            delta: delta_stop,
            u,
            du,
        });
        Trajectory {
            radius,
            samples,
            event: Event::ReachedBoundaryWindow { delta_stop },
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    fn power_law(c: f64, b: f64) -> impl Fn(f64) -> (f64, f64) {
        move |d: f64| (c * d.powf(b), -c * b * d.powf(b - 1.0))
    }

    #[test]
    fn exact_power_law() {
        let bm = indicial_roots(0.125).0;
        let t = synthetic(power_law(3.0, bm), 1e-10);
        let fit = fit_power_coefficient(&t, bm, 1e-10).unwrap();
        assert!((fit.coefficient - 3.0).abs() < 3e-12, "{fit:?}");
        assert!(fit.converged);
        assert_eq!(fit.history.len(), LADDER_LEN - 1);
    }

    #[test]
    fn two_mode_law_is_extrapolated() {
        let (bm, bp) = indicial_roots(0.125);
        let f = move |d: f64| {
            let (a, da) = power_law(3.0, bm)(d);
            let (b, db) = power_law(5.0, bp)(d);
            (a + b, da + db)
        };
        let t = synthetic(f, 1e-6);
        let fit = fit_power_coefficient_with(&t, bm, bp - bm, 1e-6).unwrap();
        assert!((fit.coefficient - 3.0).abs() < 1e-8, "{fit:?}");
        // without extrapolation the ladder is visibly biased
        let raw = t.scaled_at(1.5625e-6, bm).unwrap().0;
        assert!((raw - 3.0).abs() > 1e-4);
    }

    #[test]
    fn wrong_exponent_does_not_converge() {
        let t = synthetic(power_law(1.4, -1.0), 1e-10);
        let bm = indicial_roots(0.125).0;
        assert!(matches!(
            fit_power_coefficient(&t, bm, 1e-3),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn too_few_samples() {
        let mut t = synthetic(power_law(1.0, 0.2), 1e-10);
        t.samples.retain(|s| s.delta > 1e-8 || s.delta == 1e-10);
        assert!(matches!(
            fit_power_coefficient(&t, 0.2, 1e-3),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn blowup_trajectory_is_not_fitted() {
        let mut t = synthetic(power_law(1.0, 0.2), 1e-10);
        t.event = Event::BlowupDetected { r_blow: 0.9 };
        assert!(matches!(
            fit_power_coefficient(&t, 0.2, 1e-3),
            Err(Error::NoBoundaryReached(_))
        ));
    }

    proptest! {
        #[test]
        fn exact_for_any_exponent(b in -5.0f64..5.0, c in 0.1f64..10.0) {
            let t = synthetic(power_law(c, b), 1e-8);
            let fit = ladder_fit(&t, b, default_correction(b), 1e-6).unwrap();
            prop_assert!(((fit.coefficient - c) / c).abs() <= 1e-12, "{:?}", fit);
        }
    }

    #[test]
    fn w_limit_of_synthetic_maximal_profile() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        let a = 2.125f64.sqrt();
        let f = move |d: f64| {
            let u = a / d * (1.0 + 0.3 * d);
            (u, a / (d * d))
        };
        let t = synthetic(f, 1e-10);
        let fit = w_transform_limit(&t, &pr, 1e-6).unwrap();
        assert!((fit.coefficient - a).abs() < 1e-9, "{fit:?}");
    }

    #[test]
    fn w_limit_of_decaying_profile_is_zero() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        let bm = indicial_roots(0.125).0;
        let t = synthetic(power_law(0.7, bm), 1e-10);
        let fit = w_transform_limit(&t, &pr, 1e-2).unwrap();
        assert_eq!(fit.coefficient, 0.0);
        assert!(matches!(
            w_transform_limit(&t, &Problem::new(3, 1.0, 0.125, 0.5), 1e-2),
            Err(Error::WrongRegime(_))
        ));
    }

    #[test]
    fn v_of_pure_power_is_one() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        let bm = indicial_roots(0.125).0;
        let t = synthetic(power_law(1.0, bm), 1e-10);
        let vt = v_transform(&t, &pr).unwrap();
        assert!(vt
            .samples
            .iter()
            .all(|s| (s.v - 1.0).abs() < 1e-14 && s.dv.abs() < 1e-6 / s.delta));
    }

    #[test]
    fn w0_examples() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        assert!((w0_profile(&pr, 1.0).unwrap() - 1.4577380).abs() < 1e-7);
        assert!(w0_profile(&pr, 1e-300).unwrap() > 1e100);
        assert!(w0_profile(&pr, 0.0).unwrap().is_infinite());
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let w = w0_profile(&pr, i as f64 / 100.0).unwrap();
            assert!(w < prev);
            prev = w;
        }
        let one = Problem::new(1, 1.0, 0.125, 3.0);
        assert_eq!(w0_profile(&one, 0.1).unwrap(), w0_profile(&one, 0.9).unwrap());
    }

    #[test]
    fn supersolution_margin_examples() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        assert!(supersolution_margin(&pr, 2.125f64.sqrt(), 1.0).unwrap().abs() < 1e-15);
        // at r0 = 1/2: eta = 2 * 2 * (1/2) / (2 * 1/2) = 2, threshold 2.125 + 2
        let threshold = 4.125f64.sqrt();
        assert!(supersolution_margin(&pr, threshold * 1.001, 0.5).unwrap() < 0.0);
        assert!(supersolution_margin(&pr, threshold * 0.999, 0.5).unwrap() > 0.0);
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let m = supersolution_margin(&pr, 0.1 * i as f64, 0.5).unwrap();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn subsolution_examples() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        let a = 2.125f64.sqrt();
        assert!(subsolution_check(&pr, a).unwrap());
        assert!(!subsolution_check(&pr, 2.0 * a).unwrap());
        // admissible c- shrinks to zero as mu approaches -mu*
        let near = Problem::new(3, 1.0, -1.999999, 3.0);
        assert!(subsolution_check(&near, 0.9e-3).unwrap());
        assert!(!subsolution_check(&near, 1.1e-3).unwrap());
    }

    fn shot(pr: &Problem, u0: f64, samples_per_octave: u32) -> Trajectory {
        use crate::stepper::{default_launch_offset, shoot, IntegratorOptions, Launch};
        let launch = Launch::Center { u0 };
        // loose enough that the forced grid, not the step size, sets the
        // sample density in the layer
        let o = IntegratorOptions {
            samples_per_octave,
            rel_tol: 1e-9,
            abs_tol: 1e-13,
            ..Default::default()
        };
        shoot(pr, &launch, default_launch_offset(pr, &launch), &o).unwrap()
    }

    #[test]
    fn v_residual_shrinks_with_sampling_density() {
        let pr = Problem::new(3, 1.0, 0.125, 0.5);
        let coarse = v_transform(&shot(&pr, 1.0, 8), &pr).unwrap();
        let fine = v_transform(&shot(&pr, 1.0, 16), &pr).unwrap();
        let worst = |vt: &VTransform| {
            vt.residuals
                .iter()
                .filter(|r| r.0 < 1e-3 && r.0 > 1e-9)
                .map(|r| r.1)
                .fold(0.0, f64::max)
        };
        let ratio = worst(&coarse) / worst(&fine);
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn v_is_monotone_for_positive_beta() {
        let pr = Problem::new(3, 1.0, 0.125, 3.0);
        let vt = v_transform(&shot(&pr, 0.5, 4), &pr).unwrap();
        assert!(vt.beta > 0.0);
        // samples run toward the boundary, v increases toward its limit
        assert!(vt.samples.windows(2).all(|w| w[1].v >= w[0].v));
        assert!(vt.samples.iter().all(|s| s.dv < 0.0));
    }

    #[test]
    fn envelope_holds_on_computed_shots() {
        let mut extrema = 0;
        for (n, mu, p, u0) in [
            (3, 0.125, 3.0, 1.0),
            (3, -1.5, 3.0, 0.5),
            (1, -1.0, 2.0, 3.0),
            (5, 0.2, 2.0, 0.3),
            (2, -0.3, 5.0, 2.0),
        ] {
            let pr = Problem::new(n, 1.0, mu, p);
            let t = shot(&pr, u0, 4);
            extrema += w_extrema(&t, &pr).unwrap().len();
            assert!(envelope_violations(&t, &pr, 1e-6).unwrap().is_empty(), "{pr:?}");
        }
        assert!(extrema > 0);
    }
}
