//! Adaptive integration of the radial equation
//!
//! `u'' + (N-1)/r u' + mu/(R-r)^2 u = S(r, u)`
//!
//! from a launch point toward the boundary `r = R`. Away from the boundary
//! the system `(u, u')` is advanced in `r` with an embedded 5(4) pair. Inside
//! the layer `R - r < R/100` the independent variable becomes
//! `t = ln(delta_switch / delta)` with `delta = R - r`, and the unknown is
//! rescaled as `u = delta^kappa y`. In these variables the Hardy term turns
//! into a constant coefficient and both boundary behaviours `delta^beta-`
//! and `delta^(-2/(p-1))` become bounded, slowly varying `y`.

mod dopri;
mod io;
mod series;

pub use io::{read_csv, trajectory_csv, trajectory_json, CsvTable};
pub(crate) use series::{center_coefficients, center_launch};
pub use series::{center_series, dead_core_edge_series, origin_touch_series, CenterCoefficients};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{indicial_roots, mu_star, Operator, Problem};
use dopri::Vec2;

/// Fraction of the radius below which the boundary variables are used.
pub const SWITCH_FRACTION: f64 = 0.01;
/// Default closest approach to the boundary, as a fraction of the radius.
pub const DEFAULT_DELTA_STOP_FRACTION: f64 = 1e-10;
/// A blowup is also declared once the predicted distance to the singularity
/// drops below this fraction of `min(r, R - r)`.
const BLOWUP_DISTANCE_FRACTION: f64 = 1e-8;

/// One point of a trajectory. `delta = R - r` is carried separately because
/// it cannot be recovered from `r` without cancellation near the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub r: f64,
    pub delta: f64,
    pub u: f64,
    pub du: f64,
}

impl State {
    pub fn new(radius: f64, r: f64, u: f64, du: f64) -> Self {
        Self {
            r,
            delta: radius - r,
            u,
            du,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Event {
    ReachedBoundaryWindow {
        delta_stop: f64,
    },
    BlowupDetected {
        r_blow: f64,
    },
    /// `anomalous` marks zeros in the superlinear regime, where positivity
    /// is guaranteed and a crossing can only be a tolerance failure.
    HitZero {
        r_zero: f64,
        anomalous: bool,
    },
    StepFailure {
        r_fail: f64,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::ReachedBoundaryWindow { .. } => "ReachedBoundaryWindow",
            Event::BlowupDetected { .. } => "BlowupDetected",
            Event::HitZero { .. } => "HitZero",
            Event::StepFailure { .. } => "StepFailure",
        }
    }

    pub fn location(&self, radius: f64) -> f64 {
        match *self {
            Event::ReachedBoundaryWindow { delta_stop } => radius - delta_stop,
            Event::BlowupDetected { r_blow } => r_blow,
            Event::HitZero { r_zero, .. } => r_zero,
            Event::StepFailure { r_fail } => r_fail,
        }
    }
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Event::ReachedBoundaryWindow { delta_stop } => {
                write!(f, "ReachedBoundaryWindow({delta_stop:.16e})")
            }
            Event::BlowupDetected { r_blow } => write!(f, "BlowupDetected({r_blow:.16e})"),
            Event::HitZero { r_zero, anomalous } => {
                write!(
                    f,
                    "HitZero({r_zero:.16e}{})",
                    if anomalous { ", anomalous" } else { "" }
                )
            }
            Event::StepFailure { r_fail } => write!(f, "StepFailure({r_fail:.16e})"),
        }
    }
}

/// Which rescaling `u = delta^kappa y` is used inside the boundary layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BoundaryBranch {
    /// Blowup-scaled when a superlinear shot enters the layer near the
    /// maximal amplitude, Hardy-scaled otherwise; demotes to Hardy-scaled
    /// once the scaled amplitude collapses.
    #[default]
    Auto,
    /// `kappa = beta-`, `y = v = u delta^(-beta-)`.
    Hardy,
    /// `kappa = -2/(p-1)`, `y = w = u delta^(2/(p-1))`; superlinear only.
    BlowupScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Blowup proxy threshold; `None` means `1e8 max(1, u(start))`.
    pub u_cap: Option<f64>,
    /// Closest approach to the boundary; `None` means `1e-10 R`.
    pub delta_stop: Option<f64>,
    pub max_steps: usize,
    pub boundary_branch: BoundaryBranch,
    /// Forced samples per halving of `delta` in the boundary layer; 0 turns
    /// the forced grid off.
    pub samples_per_octave: u32,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            u_cap: None,
            delta_stop: None,
            max_steps: 200_000,
            boundary_branch: BoundaryBranch::Auto,
            samples_per_octave: 4,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidOptions(format!(
                "tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if let Some(cap) = self.u_cap {
            if !(cap > 1.0) {
                return Err(Error::InvalidOptions(format!("u_cap = {cap} must exceed 1")));
            }
        }
        if let Some(d) = self.delta_stop {
            if !(d > 0.0) {
                return Err(Error::InvalidOptions(format!("delta_stop = {d} must be positive")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidOptions("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn delta_stop_for(&self, radius: f64) -> f64 {
        self.delta_stop.unwrap_or(DEFAULT_DELTA_STOP_FRACTION * radius)
    }

    /// Both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }

    pub(crate) fn with_abs_scale(&self, scale: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * scale,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub radius: f64,
    pub samples: Vec<State>,
    pub event: Event,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.samples.last().expect("trajectories are never empty")
    }

    pub fn reached_boundary(&self) -> bool {
        matches!(self.event, Event::ReachedBoundaryWindow { .. })
    }

    /// `q = u delta^(-exponent)` and `dq/dx`, `x = ln delta`, at an arbitrary
    /// `delta` inside the sampled range, by cubic Hermite interpolation of
    /// `q` in `x`. Exact for pure power laws with the given exponent.
    pub fn scaled_at(&self, delta: f64, exponent: f64) -> Option<(f64, f64)> {
        let s = &self.samples;
        if s.len() < 2 || !(delta > 0.0) {
            return None;
        }
        // samples are ordered by decreasing delta
        let idx = s.partition_point(|st| st.delta > delta);
        if idx == s.len() {
            return None;
        }
        if s[idx].delta == delta {
            return Some(scaled_pair(&s[idx], exponent));
        }
        if idx == 0 {
            return None;
        }
        let (a, b) = (&s[idx - 1], &s[idx]);
        let (xa, xb) = (a.delta.ln(), b.delta.ln());
        let (qa, ga) = scaled_pair(a, exponent);
        let (qb, gb) = scaled_pair(b, exponent);
        Some(hermite(xa, qa, ga, xb, qb, gb, delta.ln()))
    }

    /// State at radius `r` by cubic Hermite interpolation in `r`.
    pub fn interpolate_r(&self, r: f64) -> Option<State> {
        let s = &self.samples;
        let idx = s.partition_point(|st| st.r < r);
        if idx == s.len() {
            return None;
        }
        if s[idx].r == r {
            return Some(s[idx]);
        }
        if idx == 0 {
            return None;
        }
        let (a, b) = (&s[idx - 1], &s[idx]);
        let (u, du) = hermite(a.r, a.u, a.du, b.r, b.u, b.du, r);
        Some(State {
            r,
            delta: self.radius - r,
            u,
            du,
        })
    }
}

pub(crate) fn scaled_pair(s: &State, exponent: f64) -> (f64, f64) {
    let scale = s.delta.powf(-exponent);
    let q = s.u * scale;
    // du/dx = du/ddelta * delta = -u' delta
    let dq = (-s.du * s.delta - exponent * s.u) * scale;
    (q, dq)
}

/// Cubic Hermite value and derivative on `[xa, xb]` (either orientation).
pub(crate) fn hermite(xa: f64, ya: f64, ga: f64, xb: f64, yb: f64, gb: f64, x: f64) -> (f64, f64) {
    let h = xb - xa;
    let t = (x - xa) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let y = h00 * ya + h10 * h * ga + h01 * yb + h11 * h * gb;
    let d00 = (6.0 * t2 - 6.0 * t) / h;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / h;
    let d11 = 3.0 * t2 - 2.0 * t;
    let g = d00 * ya + d10 * ga + d01 * yb + d11 * gb;
    (y, g)
}

/// Right-hand side `S(r, u)` of the radial equation.
#[derive(Clone, Copy)]
pub(crate) enum Source<'a> {
    Power(f64),
    Linear,
    Forcing(&'a (dyn Fn(f64) -> f64 + Sync)),
}

#[derive(Clone, Copy)]
pub(crate) struct RadialOde<'a> {
    pub op: Operator,
    pub source: Source<'a>,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    delta_switch: f64,
    kappa: f64,
    /// `kappa (kappa - 1) + mu`, kept exact for the two standard branches.
    kappa_poly: f64,
    blowup_scaled: bool,
}

impl<'a> RadialOde<'a> {
    fn n1(&self) -> f64 {
        f64::from(self.op.dim_n - 1)
    }

    fn source(&self, r: f64, u: f64) -> f64 {
        match self.source {
            Source::Power(p) => u.max(0.0).powf(p),
            Source::Linear => 0.0,
            Source::Forcing(f) => f(r),
        }
    }

    fn interior_rhs(&self, r: f64, y: &Vec2) -> Vec2 {
        let d = self.op.radius - r;
        let mut acc = self.source(r, y[0]) - self.op.mu / (d * d) * y[0];
        if self.op.dim_n > 1 {
            acc -= self.n1() / r * y[1];
        }
        [y[1], acc]
    }

    fn boundary_rhs(&self, frame: &Frame, t: f64, y: &Vec2) -> Vec2 {
        let delta = frame.delta_switch * (-t).exp();
        let eps = if self.op.dim_n > 1 {
            self.n1() * delta / (self.op.radius - delta)
        } else {
            0.0
        };
        let k = frame.kappa;
        let src = match self.source {
            Source::Power(p) => {
                let e = 2.0 + k * (p - 1.0);
                let scale = if e == 0.0 { 1.0 } else { delta.powf(e) };
                scale * y[0].max(0.0).powf(p)
            }
            Source::Linear => 0.0,
            Source::Forcing(f) => delta.powf(2.0 - k) * f(self.op.radius - delta),
        };
        let damping = 1.0 + eps - 2.0 * k;
        let stiffness = frame.kappa_poly - eps * k;
        [y[1], src - damping * y[1] - stiffness * y[0]]
    }

    /// `2/(p-1)` when blowup is possible.
    fn blowup_exponent(&self) -> Option<f64> {
        match self.source {
            Source::Power(p) if p > 1.0 => Some(2.0 / (p - 1.0)),
            _ => None,
        }
    }

    fn maximal_amplitude(&self) -> Option<f64> {
        match self.source {
            Source::Power(p) if p > 1.0 => Some((self.op.mu + mu_star(p)).powf(1.0 / (p - 1.0))),
            _ => None,
        }
    }

    fn frame(&self, delta_switch: f64, blowup_scaled: bool) -> Frame {
        match (blowup_scaled, self.source) {
            (true, Source::Power(p)) if p > 1.0 => Frame {
                delta_switch,
                kappa: -2.0 / (p - 1.0),
                kappa_poly: self.op.mu + mu_star(p),
                blowup_scaled: true,
            },
            _ => Frame {
                delta_switch,
                kappa: indicial_roots(self.op.mu).0,
                kappa_poly: 0.0,
                blowup_scaled: false,
            },
        }
    }
}

fn to_scaled(frame: &Frame, s: &State) -> Vec2 {
    let y0 = s.u * s.delta.powf(-frame.kappa);
    let y1 = s.delta.powf(1.0 - frame.kappa) * s.du + frame.kappa * y0;
    [y0, y1]
}

fn from_scaled(frame: &Frame, radius: f64, delta: f64, y: &Vec2) -> State {
    let u = delta.powf(frame.kappa) * y[0];
    let du = delta.powf(frame.kappa - 1.0) * (y[1] - frame.kappa * y[0]);
    State {
        r: radius - delta,
        delta,
        u,
        du,
    }
}

enum Check {
    Continue,
    Stop(Event, bool),
}

struct Run<'o> {
    ode: RadialOde<'o>,
    opts: IntegratorOptions,
    u_cap: f64,
    delta_switch: f64,
    samples: Vec<State>,
    accepted: usize,
    rejected: usize,
}

impl<'o> Run<'o> {
    fn budget(&self) -> Result<()> {
        if self.accepted + self.rejected >= self.opts.max_steps {
            Err(Error::MaxSteps(self.opts.max_steps))
        } else {
            Ok(())
        }
    }

    /// Event checks on an accepted state. The returned flag says whether the
    /// state itself is recorded.
    fn check(&self, prev: &State, s: &State) -> Check {
        if !(s.u > 0.0) {
            let r_zero = if prev.u > s.u {
                prev.r + (s.r - prev.r) * prev.u / (prev.u - s.u)
            } else {
                s.r
            };
            let anomalous = self.ode.blowup_exponent().is_some();
            return Check::Stop(
                Event::HitZero {
                    r_zero: r_zero.max(prev.r),
                    anomalous,
                },
                false,
            );
        }
        if let Some(g) = self.ode.blowup_exponent() {
            // inside the layer u exceeds any fixed cap on the maximal
            // profile, so only the distance test applies there
            let capped = s.delta >= self.delta_switch && s.u >= self.u_cap;
            let distance = if s.du > 0.0 { g * s.u / s.du } else { f64::INFINITY };
            if capped || distance < BLOWUP_DISTANCE_FRACTION * s.r.min(s.delta) {
                let r_blow = if distance.is_finite() { s.r + distance } else { s.r };
                return Check::Stop(Event::BlowupDetected { r_blow }, true);
            }
        }
        Check::Continue
    }

    fn interior(&mut self, start: State, r_end: f64) -> Result<Option<Event>> {
        let radius = self.ode.op.radius;
        let ode = self.ode;
        let f = move |r: f64, y: &Vec2| ode.interior_rhs(r, y);
        let (rtol, atol) = (self.opts.rel_tol, self.opts.abs_tol);
        let mut r = start.r;
        let mut y = [start.u, start.du];
        let mut k1 = f(r, &y);
        let mut h = dopri::initial_step(&f, r, &y, &k1, rtol, atol).min(r_end - r);
        let mut rejected_last = false;
        let mut prev = start;
        while r < r_end {
            self.budget()?;
            let landing = r + h * 1.000_001 >= r_end;
            let h_try = if landing { r_end - r } else { h };
            let trial = dopri::step(&f, r, &y, &k1, h_try);
            let err = dopri::error_norm(&trial.err, &y, &trial.y, rtol, atol);
            if err > 1.0 {
                self.rejected += 1;
                h = h_try * dopri::step_factor(err, true);
                rejected_last = true;
                if h < 16.0 * f64::EPSILON * r.abs().max(f64::MIN_POSITIVE) {
                    return Ok(Some(Event::StepFailure { r_fail: r }));
                }
                continue;
            }
            self.accepted += 1;
            r = if landing { r_end } else { r + h_try };
            y = trial.y;
            k1 = trial.dy;
            let state = State {
                r,
                delta: if landing { radius - r_end } else { radius - r },
                u: y[0],
                du: y[1],
            };
            match self.check(&prev, &state) {
                Check::Stop(ev, keep) => {
                    if keep {
                        self.samples.push(state);
                    }
                    return Ok(Some(ev));
                }
                Check::Continue => self.samples.push(state),
            }
            prev = state;
            h = h_try * dopri::step_factor(err, rejected_last);
            rejected_last = false;
        }
        Ok(None)
    }

    fn boundary(&mut self, start: State, delta_stop: f64) -> Result<Event> {
        let radius = self.ode.op.radius;
        let ds = self.delta_switch;
        let (rtol, atol) = (self.opts.rel_tol, self.opts.abs_tol);
        let amplitude = self.ode.maximal_amplitude();
        let blowup_scaled = match (self.opts.boundary_branch, amplitude, self.ode.blowup_exponent()) {
            (BoundaryBranch::Hardy, _, _) => false,
            (BoundaryBranch::BlowupScaled, Some(_), _) => true,
            (BoundaryBranch::Auto, Some(a), Some(g)) => start.u * start.delta.powf(g) >= 0.5 * a,
            _ => false,
        };
        let mut frame = self.ode.frame(ds, blowup_scaled);
        let t_end = (ds / delta_stop).ln();
        let mut t = (ds / start.delta).ln().max(0.0);
        let grid = if self.opts.samples_per_octave > 0 {
            Some(std::f64::consts::LN_2 / f64::from(self.opts.samples_per_octave))
        } else {
            None
        };
        let next_target = |t: f64| -> f64 {
            match grid {
                Some(dt) => {
                    let j = (t / dt).floor() + 1.0;
                    let mut tg = j * dt;
                    if tg <= t * (1.0 + 1e-14) {
                        tg += dt;
                    }
                    tg.min(t_end)
                }
                None => t_end,
            }
        };

        let mut y = to_scaled(&frame, &start);
        let ode = self.ode;
        let mut k1 = ode.boundary_rhs(&frame, t, &y);
        let mut h = {
            let fr = frame;
            let f = move |t: f64, y: &Vec2| ode.boundary_rhs(&fr, t, y);
            dopri::initial_step(&f, t, &y, &k1, rtol, atol)
        };
        let mut rejected_last = false;
        let mut prev = start;
        let mut target = next_target(t);
        loop {
            self.budget()?;
            let fr = frame;
            let f = move |t: f64, y: &Vec2| ode.boundary_rhs(&fr, t, y);
            let landing = t + h * 1.000_001 >= target;
            let h_try = if landing { target - t } else { h };
            let trial = dopri::step(&f, t, &y, &k1, h_try);
            let err = dopri::error_norm(&trial.err, &y, &trial.y, rtol, atol);
            if err > 1.0 {
                self.rejected += 1;
                h = h_try * dopri::step_factor(err, true);
                rejected_last = true;
                if h < 16.0 * f64::EPSILON * t.max(1.0) {
                    return Ok(Event::StepFailure { r_fail: prev.r });
                }
                continue;
            }
            self.accepted += 1;
            let h_next = h_try * dopri::step_factor(err, rejected_last);
            rejected_last = false;
            t = if landing { target } else { t + h_try };
            y = trial.y;
            k1 = trial.dy;
            let at_end = landing && target == t_end;
            let delta = if at_end { delta_stop } else { ds * (-t).exp() };
            let state = from_scaled(&frame, radius, delta, &y);
            match self.check(&prev, &state) {
                Check::Stop(ev, keep) => {
                    if keep {
                        self.samples.push(state);
                    }
                    return Ok(ev);
                }
                Check::Continue => self.samples.push(state),
            }
            if at_end {
                return Ok(Event::ReachedBoundaryWindow { delta_stop });
            }
            prev = state;
            // keep the unclipped proposal after a forced landing
            h = if landing { h.max(h_next) } else { h_next };
            if landing {
                target = next_target(t);
            }
            if frame.blowup_scaled && self.opts.boundary_branch == BoundaryBranch::Auto {
                if let Some(a) = amplitude {
                    if y[0] < 1e-3 * a {
                        frame = ode.frame(ds, false);
                        y = to_scaled(&frame, &state);
                        k1 = ode.boundary_rhs(&frame, t, &y);
                    }
                }
            }
        }
    }
}

pub(crate) fn run(ode: RadialOde<'_>, start: State, opts: &IntegratorOptions) -> Result<Trajectory> {
    opts.validate()?;
    ode.op.validate()?;
    let radius = ode.op.radius;
    let delta_stop = opts.delta_stop_for(radius);
    if !(start.delta > delta_stop) || !(start.r >= 0.0) {
        return Err(Error::NonPositive(format!(
            "start r = {} must satisfy 0 <= r < R - delta_stop",
            start.r
        )));
    }
    if !(start.u >= 0.0) || !start.u.is_finite() || !start.du.is_finite() {
        return Err(Error::NonPositive(format!("start u = {}", start.u)));
    }
    if start.r == 0.0 && ode.op.dim_n > 1 {
        return Err(Error::NonPositive("launch at r = 0 needs a series start".into()));
    }
    let delta_switch = SWITCH_FRACTION * radius;
    let mut run = Run {
        ode,
        opts: *opts,
        u_cap: opts.u_cap.unwrap_or(1e8 * start.u.max(1.0)),
        delta_switch,
        samples: vec![start],
        accepted: 0,
        rejected: 0,
    };
    let interior_end_delta = delta_switch.max(delta_stop);
    let mut event = None;
    let mut boundary_start = start;
    if start.delta > interior_end_delta {
        event = run.interior(start, radius - interior_end_delta)?;
        if event.is_none() {
            let last = run.samples.last_mut().expect("non-empty");
            last.delta = interior_end_delta;
            boundary_start = *last;
            if interior_end_delta == delta_stop {
                event = Some(Event::ReachedBoundaryWindow { delta_stop });
            }
        }
    }
    let event = match event {
        Some(ev) => ev,
        None => run.boundary(boundary_start, delta_stop)?,
    };
    Ok(Trajectory {
        radius,
        samples: run.samples,
        event,
        accepted_steps: run.accepted,
        rejected_steps: run.rejected,
    })
}

/// Integrates the nonlinear radial equation from `start` toward `R`.
pub fn integrate(problem: &Problem, start: State, opts: &IntegratorOptions) -> Result<Trajectory> {
    problem.validate()?;
    run(
        RadialOde {
            op: problem.operator(),
            source: Source::Power(problem.power),
        },
        start,
        opts,
    )
}

/// Same integrator with the nonlinearity replaced by a prescribed forcing
/// `F(r)`. Used for manufactured-solution checks.
pub fn integrate_forced(
    op: &Operator,
    forcing: &(dyn Fn(f64) -> f64 + Sync),
    start: State,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    run(
        RadialOde {
            op: *op,
            source: Source::Forcing(forcing),
        },
        start,
        opts,
    )
}

/// Series start used by [`shoot`] and [`refine_until`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Launch {
    Center { u0: f64 },
    DeadCore { rho: f64 },
    Origin,
}

/// Tolerance handed to the series launches.
pub const SERIES_TOL: f64 = 1e-6;

/// Default launch offset for a given launch.
pub fn default_launch_offset(problem: &Problem, launch: &Launch) -> f64 {
    let radius = problem.radius;
    match *launch {
        Launch::Center { u0 } => {
            let power = (problem.power != 1.0).then_some(problem.power);
            let a4 = center_coefficients(&problem.operator(), power, u0).a4.abs();
            // keep the series remainder two orders below the launch tolerance
            let h = (1e-2 * SERIES_TOL * u0 / a4).powf(0.25);
            if h.is_finite() {
                h.min(1e-3 * radius)
            } else {
                1e-3 * radius
            }
        }
        Launch::Origin => 1e-4 * radius,
        Launch::DeadCore { rho } => {
            // half of what the remainder estimate of the dead-core series allows
            let n1 = f64::from(problem.dim_n.max(2) - 1);
            let k = 2.0 / (1.0 - problem.power);
            let mu = problem.mu.abs().max(f64::MIN_POSITIVE);
            let gap = radius - rho;
            let by_curvature = 0.5 * SERIES_TOL.sqrt() * rho / n1;
            let by_hardy = 0.5 * gap * (SERIES_TOL * (k * (k - 1.0)).abs() / mu).sqrt();
            (1e-4 * radius).min(gap / 100.0).min(by_curvature).min(by_hardy)
        }
    }
}

pub fn launch_state(problem: &Problem, launch: &Launch, h: f64) -> Result<State> {
    match *launch {
        Launch::Center { u0 } => center_series(problem, u0, h, SERIES_TOL),
        Launch::DeadCore { rho } => dead_core_edge_series(problem, rho, h, SERIES_TOL),
        Launch::Origin => origin_touch_series(problem, h, SERIES_TOL),
    }
}

/// Series launch followed by integration. The absolute tolerance is scaled
/// down with tiny launch values so that error control stays relative.
pub fn shoot(problem: &Problem, launch: &Launch, h: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    let start = launch_state(problem, launch, h)?;
    let scale = start.u.clamp(f64::MIN_POSITIVE, 1.0);
    integrate(problem, start, &opts.with_abs_scale(scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub trajectory: Trajectory,
    /// `(h, target value)` per launch offset tried
    pub history: Vec<(f64, f64)>,
}

/// Repeats launch-and-integrate with `h, h/2, h/4, ...` until the target
/// functional changes by less than `tol` (relative) between two
/// refinements.
pub fn refine_until<F>(
    problem: &Problem,
    launch: &Launch,
    h0: f64,
    target: F,
    tol: f64,
    opts: &IntegratorOptions,
    budget: usize,
) -> Result<Refinement>
where
    F: Fn(&Trajectory) -> Result<f64>,
{
    let mut h = h0;
    let mut history = Vec::new();
    let mut last_change = f64::INFINITY;
    for _ in 0..=budget {
        let traj = shoot(problem, launch, h, opts)?;
        let value = target(&traj)?;
        if let Some(&(_, prev)) = history.last() {
            let prev: f64 = prev;
            last_change = (value - prev).abs() / value.abs().max(f64::MIN_POSITIVE);
            history.push((h, value));
            if last_change < tol {
                return Ok(Refinement {
                    trajectory: traj,
                    history,
                });
            }
        } else {
            history.push((h, value));
        }
        h /= 2.0;
    }
    Err(Error::NoConvergence {
        refinements: budget,
        last_change,
    })
}

#[cfg(test)]
mod tests;
