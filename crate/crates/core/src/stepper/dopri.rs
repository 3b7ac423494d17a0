//! Dormand–Prince 5(4) pair for two-component first order systems.

pub(crate) type Vec2 = [f64; 2];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy(y: &Vec2, h: f64, terms: &[(f64, &Vec2)]) -> Vec2 {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

pub(crate) struct StepResult {
    pub y: Vec2,
    /// derivative at the new point (first stage of the next step)
    pub dy: Vec2,
    pub err: Vec2,
}

/// One trial step from `(t, y)` with `k1 = f(t, y)` supplied.
pub(crate) fn step<F>(f: &F, t: f64, y: &Vec2, k1: &Vec2, h: f64) -> StepResult
where
    F: Fn(f64, &Vec2) -> Vec2,
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y_new);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    StepResult { y: y_new, dy: k7, err }
}

/// Scaled RMS error; non-finite inputs map to infinity so the step is
/// rejected.
pub(crate) fn error_norm(err: &Vec2, y0: &Vec2, y1: &Vec2, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let sc = abs_tol + rel_tol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    let n = (acc / 2.0).sqrt();
    if n.is_finite() && y1.iter().all(|v| v.is_finite()) {
        n
    } else {
        f64::INFINITY
    }
}

/// Step-size factor of the standard controller.
pub(crate) fn step_factor(err: f64, after_reject: bool) -> f64 {
    let max_fac = if after_reject { 1.0 } else { 5.0 };
    if err == 0.0 {
        return max_fac;
    }
    (0.9 * err.powf(-0.2)).clamp(0.2, max_fac)
}

/// Initial step guess (Hairer, Nørsett & Wanner, II.4).
pub(crate) fn initial_step<F>(f: &F, t: f64, y: &Vec2, k1: &Vec2, rel_tol: f64, abs_tol: f64) -> f64
where
    F: Fn(f64, &Vec2) -> Vec2,
{
    let norm = |v: &Vec2| {
        let mut acc = 0.0;
        for i in 0..2 {
            let sc = abs_tol + rel_tol * y[i].abs();
            acc += (v[i] / sc).powi(2);
        }
        (acc / 2.0).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, k1)]);
    let k2 = f(t + h0, &y1);
    let diff = [k2[0] - k1[0], k2[1] - k1[1]];
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_fixed<F: Fn(f64, &Vec2) -> Vec2>(f: &F, y0: Vec2, t1: f64, n: usize) -> Vec2 {
        let h = t1 / n as f64;
        let mut y = y0;
        let mut t = 0.0;
        let mut k1 = f(t, &y);
        for _ in 0..n {
            let s = step(f, t, &y, &k1, h);
            y = s.y;
            k1 = s.dy;
            t += h;
        }
        y
    }

    #[test]
    fn fifth_order_on_harmonic_oscillator() {
        let f = |_t: f64, y: &Vec2| [y[1], -y[0]];
        let exact = [2f64.cos(), -2f64.sin()];
        let e1 = {
            let y = integrate_fixed(&f, [1.0, 0.0], 2.0, 20);
            (y[0] - exact[0]).abs()
        };
        let e2 = {
            let y = integrate_fixed(&f, [1.0, 0.0], 2.0, 40);
            (y[0] - exact[0]).abs()
        };
        let order = (e1 / e2).log2();
        assert!(order > 4.5 && order < 6.5, "order {order}");
    }

    #[test]
    fn error_estimate_vanishes_on_polynomials() {
        // y'' = 6t has the cubic solution; the 4th order embedded method
        // integrates it exactly as well.
        let f = |t: f64, y: &Vec2| [y[1], 6.0 * t];
        let y = [0.0, 0.0];
        let k1 = f(0.0, &y);
        let s = step(&f, 0.0, &y, &k1, 0.5);
        assert!((s.y[0] - 0.125).abs() < 1e-15);
        assert!(s.err[0].abs() < 1e-15 && s.err[1].abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_rejected() {
        let e = error_norm(&[f64::NAN, 0.0], &[1.0, 1.0], &[1.0, 1.0], 1e-6, 1e-9);
        assert!(e.is_infinite());
    }
}
