//! Shooting on the radial problem: classification of single shots, the
//! blowup threshold `u*`, the blowup radius map and the inverse problem of
//! prescribing the boundary coefficient.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{default_correction, ladder_fit, FitResult};
use crate::error::{Error, Result};
use crate::model::{indicial_roots, Problem, Regime};
use crate::stepper::{default_launch_offset, hermite, shoot, Event, IntegratorOptions, Launch, Trajectory};

/// Relative tolerance of the boundary fits used for classification.
pub const CLASSIFY_FIT_TOL: f64 = 1e-3;
/// Blowup amplitudes farther than this from `(mu*)^(1/(p-1))` are not
/// accepted as blowups.
pub const AMPLITUDE_TOL: f64 = 0.25;
/// Range of the shot parameter during bracketing.
pub const SHOT_RANGE: (f64, f64) = (1e-12, 1e12);
/// Number of refinements of an indeterminate shot.
pub const TIGHTEN_BUDGET: usize = 3;
/// Factor applied to `delta_stop` at each refinement of an indeterminate
/// shot. Near `u*` with `beta- + 2/(p-1)` small the decaying and the
/// maximal behaviour separate only slowly in `delta`.
pub const DEEPEN_FACTOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    GlobalPositive {
        coefficient: FitResult,
    },
    Blowup {
        r_blow: f64,
        amplitude_check: FitResult,
    },
    /// `band` is the range of the scaled amplitude over the last decade of
    /// the shot
    Indeterminate {
        band: (f64, f64),
    },
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::GlobalPositive { .. } => "GlobalPositive",
            Classification::Blowup { .. } => "Blowup",
            Classification::Indeterminate { .. } => "Indeterminate",
        }
    }

    /// Boundary coefficient of a globally positive shot.
    pub fn coefficient(&self) -> Option<f64> {
        match self {
            Classification::GlobalPositive { coefficient } => Some(coefficient.coefficient),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub u_star: f64,
    /// final bracket: `low` is globally positive, `high` blows up
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// A shot together with its classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub launch: Launch,
    pub classification: Classification,
    pub trajectory: Trajectory,
}

/// Interior blowup amplitude `A` in `u ~ A (r_blow - r)^(-2/(p-1))`, by a
/// ladder in `s = r_blow - r` with Hermite interpolation of `u s^g` in
/// `ln s` and one Richardson level for the `O(s)` correction.
///
/// `s` is measured as `delta - delta_blow`, with `delta_blow` placed at the
/// distance estimate `g u/u'` beyond the last sample, so that blowups
/// within rounding of `R` in `r` are still resolved.
pub fn blowup_amplitude_fit(traj: &Trajectory, problem: &Problem, r_blow: f64) -> FitResult {
    let g = 2.0 / (problem.power - 1.0);
    let exponent = -g;
    let last = traj.last();
    let reach = if last.du > 0.0 {
        g * last.u / last.du
    } else {
        (r_blow - last.r).max(0.0)
    };
    let delta_blow = last.delta - reach;
    let pts: Vec<(f64, f64, f64)> = traj
        .samples
        .iter()
        .filter(|st| st.delta > delta_blow)
        .map(|st| {
            let s = st.delta - delta_blow;
            let q = st.u * s.powf(g);
            // d/d(ln s) of u s^g with du/ds = -u'
            let dq = (g * st.u - st.du * s) * s.powf(g);
            (s.ln(), q, dq)
        })
        .collect();
    let failed = |history: Vec<f64>| FitResult {
        coefficient: f64::NAN,
        exponent,
        residual: f64::INFINITY,
        history,
        converged: false,
    };
    if pts.len() < 4 {
        return failed(Vec::new());
    }
    let s_last = pts[pts.len() - 1].0.exp();
    let mut s = 0.1 * r_blow.min(delta_blow).min(traj.samples[0].delta);
    let mut q = Vec::new();
    while s > 2.0 * s_last && q.len() < 24 {
        let x = s.ln();
        // pts are ordered by decreasing s
        let idx = pts.partition_point(|p| p.0 > x);
        if idx == 0 || idx == pts.len() {
            break;
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        q.push(hermite(a.0, a.1, a.2, b.0, b.1, b.2, x).0);
        s *= 0.5;
    }
    if q.len() < 3 {
        // the cap was hit too far from the singularity for a ladder; fall
        // back to the amplitude at the last sample
        let (_, q_last, _) = pts[pts.len() - 1];
        return FitResult {
            coefficient: q_last,
            exponent,
            residual: f64::INFINITY,
            history: vec![q_last],
            converged: false,
        };
    }
    let history: Vec<f64> = q.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let n = history.len();
    let coefficient = history[n - 1];
    let residual = ((coefficient - history[n - 2]) / coefficient).abs();
    FitResult {
        coefficient,
        exponent,
        residual,
        history,
        converged: residual < CLASSIFY_FIT_TOL,
    }
}

fn scaled_band(traj: &Trajectory, exponent: f64) -> (f64, f64) {
    let last = traj.last();
    let floor = last.delta * 10.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in traj
        .samples
        .iter()
        .rev()
        .take_while(|s| s.delta <= floor || std::ptr::eq(*s, last))
    {
        let w = s.u * s.delta.powf(-exponent);
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (lo, hi)
}

/// Classifies a finished trajectory.
///
/// Sublinear shots are always globally positive. A superlinear shot is
/// globally positive when the `beta-` fit converges, or when its scaled
/// amplitude `w` has dropped below half the maximal amplitude and is still
/// decreasing at the last sample; it is a blowup when the blowup amplitude
/// is within 25% of `(mu*)^(1/(p-1))`. Everything else is indeterminate.
pub fn classify_trajectory(problem: &Problem, traj: &Trajectory) -> Result<Classification> {
    let regime = problem.validate()?;
    let ex = problem.exponents()?;
    let bm = ex.beta_minus;
    let fit = |t: &Trajectory| ladder_fit(t, bm, default_correction(bm), CLASSIFY_FIT_TOL);
    match regime {
        Regime::Sublinear => match traj.event {
            Event::ReachedBoundaryWindow { .. } => Ok(Classification::GlobalPositive {
                coefficient: fit(traj)?,
            }),
            _ => Ok(Classification::Indeterminate {
                band: scaled_band(traj, bm),
            }),
        },
        Regime::Superlinear => {
            let g = ex.blowup_exponent.expect("superlinear");
            let band = scaled_band(traj, -g);
            match traj.event {
                Event::BlowupDetected { r_blow } => {
                    let check = blowup_amplitude_fit(traj, problem, r_blow);
                    let target = ex.interior_blowup_amplitude.expect("superlinear");
                    if ((check.coefficient - target) / target).abs() <= AMPLITUDE_TOL {
                        Ok(Classification::Blowup {
                            r_blow,
                            amplitude_check: check,
                        })
                    } else {
                        log::debug!("blowup at {r_blow} rejected: amplitude {}", check.coefficient);
                        Ok(Classification::Indeterminate { band })
                    }
                }
                Event::ReachedBoundaryWindow { .. } => {
                    let coefficient = fit(traj)?;
                    let last = traj.last();
                    let w = last.u * last.delta.powf(g);
                    let dw = last.du - g * last.u / last.delta;
                    let amplitude = ex.blowup_amplitude.expect("superlinear");
                    if coefficient.converged || (w <= 0.5 * amplitude && dw < 0.0) {
                        Ok(Classification::GlobalPositive { coefficient })
                    } else {
                        Ok(Classification::Indeterminate { band })
                    }
                }
                _ => Ok(Classification::Indeterminate { band }),
            }
        }
    }
}

/// Launch, integrate and classify.
pub fn classify_launch(problem: &Problem, launch: &Launch, opts: &IntegratorOptions) -> Result<Shot> {
    let h = default_launch_offset(problem, launch);
    let trajectory = shoot(problem, launch, h, opts)?;
    let classification = classify_trajectory(problem, &trajectory)?;
    Ok(Shot {
        launch: *launch,
        classification,
        trajectory,
    })
}

/// Classification of the shot from the center value `u0`.
pub fn classify(problem: &Problem, u0: f64, opts: &IntegratorOptions) -> Result<Classification> {
    if !(u0 > 0.0) {
        return Err(Error::NonPositive(format!("u0 = {u0}")));
    }
    Ok(classify_launch(problem, &Launch::Center { u0 }, opts)?.classification)
}

/// Like [`classify_launch`], refining indeterminate outcomes up to
/// [`TIGHTEN_BUDGET`] times: each retry divides the tolerances by ten and
/// moves `delta_stop` closer to the boundary by [`DEEPEN_FACTOR`].
pub fn classify_resolved(problem: &Problem, launch: &Launch, opts: &IntegratorOptions) -> Result<(Shot, usize)> {
    let mut o = *opts;
    let mut evaluations = 0;
    loop {
        let shot = classify_launch(problem, launch, &o)?;
        evaluations += 1;
        let indeterminate = matches!(shot.classification, Classification::Indeterminate { .. });
        if !indeterminate || evaluations > TIGHTEN_BUDGET {
            return Ok((shot, evaluations));
        }
        log::debug!("indeterminate shot {launch:?}, refining");
        let delta_stop = DEEPEN_FACTOR * o.delta_stop_for(problem.radius);
        o = IntegratorOptions {
            delta_stop: Some(delta_stop),
            ..o.tightened(10.0)
        };
    }
}

fn require_superlinear(problem: &Problem) -> Result<()> {
    match problem.validate()? {
        Regime::Superlinear => Ok(()),
        Regime::Sublinear => Err(Error::WrongRegime("the blowup threshold exists only for p > 1".into())),
    }
}

/// Threshold `u*` separating globally positive shots from interior blowup.
///
/// The bracket is found by doubling or halving from `u0 = 1` within
/// [`SHOT_RANGE`] and refined by bisection until its relative width is at
/// most `tol`.
pub fn find_ustar(problem: &Problem, tol: f64, opts: &IntegratorOptions) -> Result<ThresholdResult> {
    require_superlinear(problem)?;
    if !(tol > 0.0) {
        return Err(Error::NonPositive(format!("tol = {tol}")));
    }
    let mut evaluations = 0;
    let mut above = |u0: f64, lo: f64, hi: f64| -> Result<bool> {
        let (shot, n) = classify_resolved(problem, &Launch::Center { u0 }, opts)?;
        evaluations += n;
        match shot.classification {
            Classification::Blowup { .. } => Ok(true),
            Classification::GlobalPositive { .. } => Ok(false),
            Classification::Indeterminate { .. } => Err(Error::Unresolved {
                low: lo.min(u0),
                high: hi.max(u0),
            }),
        }
    };
    let (mut lo, mut hi);
    if above(1.0, 1.0, 1.0)? {
        hi = 1.0;
        lo = 0.5;
        while above(lo, lo, hi)? {
            hi = lo;
            lo *= 0.5;
            if lo < SHOT_RANGE.0 {
                return Err(Error::BracketFailure {
                    low: SHOT_RANGE.0,
                    high: SHOT_RANGE.1,
                });
            }
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        while !above(hi, lo, hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > SHOT_RANGE.1 {
                return Err(Error::BracketFailure {
                    low: SHOT_RANGE.0,
                    high: SHOT_RANGE.1,
                });
            }
        }
    }
    while (hi - lo) > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid, lo, hi)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        u_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        evaluations,
    })
}

/// Blowup radius of the shot from `u0`.
pub fn blowup_radius(problem: &Problem, u0: f64, opts: &IntegratorOptions) -> Result<f64> {
    require_superlinear(problem)?;
    if !(u0 > 0.0) {
        return Err(Error::NonPositive(format!("u0 = {u0}")));
    }
    let (shot, _) = classify_resolved(problem, &Launch::Center { u0 }, opts)?;
    match shot.classification {
        Classification::Blowup { r_blow, .. } => Ok(r_blow),
        _ => Err(Error::NotBlowup(u0)),
    }
}

/// Which member of the radial solution set a solution is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// positive everywhere, `u(0) = u0`
    Center,
    /// vanishing on `[0, rho]`
    DeadCore,
    /// vanishing only at `r = 0`
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySolution {
    pub family: Family,
    /// `u0` for the center family, `rho` for dead cores, 0 for the origin
    /// solution
    pub parameter: f64,
    pub coefficient: f64,
    pub evaluations: usize,
    /// final bracket in the shot parameter
    pub bracket: (f64, f64),
    pub trajectory: Trajectory,
}

fn launch_for(family: Family, parameter: f64) -> Launch {
    match family {
        Family::Center => Launch::Center { u0: parameter },
        Family::DeadCore => Launch::DeadCore { rho: parameter },
        Family::Origin => Launch::Origin,
    }
}

struct CoefficientMap<'a> {
    problem: &'a Problem,
    opts: &'a IntegratorOptions,
    evaluations: usize,
}

impl CoefficientMap<'_> {
    /// Boundary coefficient of a family member; `None` when the shot is not
    /// globally positive with a converged fit.
    fn eval(&mut self, family: Family, parameter: f64) -> Result<(Option<f64>, Trajectory)> {
        let (shot, n) = classify_resolved(self.problem, &launch_for(family, parameter), self.opts)?;
        self.evaluations += n;
        let c = match &shot.classification {
            Classification::GlobalPositive { coefficient } if coefficient.converged => Some(coefficient.coefficient),
            _ => None,
        };
        Ok((c, shot.trajectory))
    }

    fn must(&mut self, family: Family, parameter: f64) -> Result<(f64, Trajectory)> {
        let (c, t) = self.eval(family, parameter)?;
        match c {
            Some(c) => Ok((c, t)),
            None => Err(Error::NoBoundaryReached(format!(
                "{family:?} shot with parameter {parameter}"
            ))),
        }
    }

    /// Bisection for `c(x) = target` on `[lo, hi]` where `c(lo) - target`
    /// has sign `rising` inverted.
    #[allow(clippy::too_many_arguments)]
    fn bisect(
        &mut self,
        family: Family,
        mut lo: f64,
        mut hi: f64,
        increasing: bool,
        target: f64,
        tol: f64,
        geometric: bool,
    ) -> Result<BoundarySolution> {
        loop {
            let mid = if geometric { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            let (c, traj) = self.must(family, mid)?;
            let stalled = mid <= lo || mid >= hi || (hi - lo) <= 4.0 * f64::EPSILON * hi;
            let hit = (c - target).abs() <= tol * target;
            if stalled && !hit {
                log::warn!("bisection stalled at {mid} with coefficient {c}, target {target}");
                return Err(Error::TargetUnreachable(target));
            }
            if hit {
                return Ok(BoundarySolution {
                    family,
                    parameter: mid,
                    coefficient: c,
                    evaluations: self.evaluations,
                    bracket: (lo, hi),
                    trajectory: traj,
                });
            }
            if (c < target) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
}

/// Solution whose boundary coefficient `lim u/(R-r)^(beta-)` equals
/// `c_target` to relative accuracy `tol`.
///
/// For `p > 1` the center values below `u*` are searched. For `p < 1` the
/// families are ordered by the comparison principle: dead cores with radius
/// decreasing from `R` give the smallest coefficients, the origin solution
/// sits at the interface, and center values increasing from 0 give the
/// larger ones.
pub fn solve_for_boundary_coefficient(
    problem: &Problem,
    c_target: f64,
    tol: f64,
    opts: &IntegratorOptions,
) -> Result<BoundarySolution> {
    let regime = problem.validate()?;
    if !(c_target > 0.0) || !c_target.is_finite() {
        return Err(Error::NonPositiveTarget(c_target));
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositive(format!("tol = {tol}")));
    }
    let mut map = CoefficientMap {
        problem,
        opts,
        evaluations: 0,
    };
    match regime {
        Regime::Superlinear => {
            let th = find_ustar(problem, 1e-8, opts)?;
            map.evaluations = th.evaluations;
            // largest sub-threshold shot with a converged fit
            let mut hi = None;
            for j in 1..=8 {
                let u0 = th.bracket.0 * (1.0 - 10f64.powi(-j));
                match map.eval(Family::Center, u0)?.0 {
                    Some(c) => hi = Some((u0, c)),
                    None => break,
                }
            }
            let (mut hi, c_hi) = hi.ok_or(Error::TargetUnreachable(c_target))?;
            if c_target > c_hi * (1.0 + tol) {
                return Err(Error::TargetUnreachable(c_target));
            }
            let mut lo = hi;
            loop {
                lo *= 0.5;
                if lo < SHOT_RANGE.0 {
                    return Err(Error::TargetUnreachable(c_target));
                }
                let (c, _) = map.must(Family::Center, lo)?;
                if c <= c_target {
                    break;
                }
                hi = lo;
            }
            map.bisect(Family::Center, lo, hi, true, c_target, tol, true)
        }
        Regime::Sublinear => {
            let (c_origin, traj) = map.must(Family::Origin, 0.0)?;
            if (c_origin - c_target).abs() <= tol * c_target {
                return Ok(BoundarySolution {
                    family: Family::Origin,
                    parameter: 0.0,
                    coefficient: c_origin,
                    evaluations: map.evaluations,
                    bracket: (0.0, 0.0),
                    trajectory: traj,
                });
            }
            let radius = problem.radius;
            if c_target > c_origin {
                let mut lo = 1.0;
                let mut hi = 1.0;
                let (c1, _) = map.must(Family::Center, 1.0)?;
                if c1 < c_target {
                    loop {
                        hi *= 2.0;
                        if hi > SHOT_RANGE.1 {
                            return Err(Error::TargetUnreachable(c_target));
                        }
                        let (c, _) = map.must(Family::Center, hi)?;
                        if c >= c_target {
                            break;
                        }
                        lo = hi;
                    }
                } else {
                    loop {
                        lo *= 0.5;
                        if lo < SHOT_RANGE.0 {
                            log::warn!(
                                "coefficient of center shots stays above {c_target} down to u0 = {lo}, \
                                 while the origin solution has {c_origin}"
                            );
                            return Err(Error::TargetUnreachable(c_target));
                        }
                        let (c, _) = map.must(Family::Center, lo)?;
                        if c <= c_target {
                            break;
                        }
                        hi = lo;
                    }
                }
                map.bisect(Family::Center, lo, hi, true, c_target, tol, true)
            } else {
                let lo = 1e-6 * radius;
                let hi = (1.0 - 1e-6) * radius;
                let (c_lo, _) = map.must(Family::DeadCore, lo)?;
                if ((c_lo - c_origin) / c_origin).abs() > 1e-2 {
                    log::warn!(
                        "dead-core coefficient {c_lo} at rho = {lo} does not approach the origin value {c_origin}"
                    );
                }
                let (c_hi, _) = map.must(Family::DeadCore, hi)?;
                if c_target > c_lo || c_target < c_hi {
                    return Err(Error::TargetUnreachable(c_target));
                }
                map.bisect(Family::DeadCore, lo, hi, false, c_target, tol, false)
            }
        }
    }
}

/// A point where a trajectory that should lie below another does not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// index of the lower trajectory in the input
    pub index: usize,
    pub r: f64,
    /// `(u_lower - u_upper) / u_upper`
    pub excess: f64,
}

/// Checks `u_i < u_{i+1}` for consecutive trajectories at every sample of
/// the lower one that lies within the range of the upper one. Values are
/// compared after interpolating the upper trajectory in `ln(R-r)` and
/// normalising by the upper value; excesses above `tol` are reported.
pub fn ordering_violations(trajs: &[Trajectory], mu: f64, tol: f64) -> Vec<Crossing> {
    let bm = indicial_roots(mu).0;
    let mut out = Vec::new();
    for (i, pair) in trajs.windows(2).enumerate() {
        let (low, up) = (&pair[0], &pair[1]);
        for s in &low.samples {
            let Some((q_up, _)) = up.scaled_at(s.delta, bm) else {
                continue;
            };
            let q_low = s.u * s.delta.powf(-bm);
            let excess = (q_low - q_up) / q_up;
            if !(excess < tol) {
                out.push(Crossing {
                    index: i,
                    r: s.r,
                    excess,
                });
            }
        }
    }
    out
}
