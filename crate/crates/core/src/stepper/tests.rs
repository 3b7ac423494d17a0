use super::*;

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn check_invariants(t: &Trajectory) {
    for w in t.samples.windows(2) {
        assert!(w[1].r > w[0].r, "r not increasing: {:?}", w);
        assert!(w[1].delta < w[0].delta, "delta not decreasing: {:?}", w);
    }
    assert!(t.samples.iter().all(|s| s.u >= 0.0));
    assert!(t.event.location(t.radius) >= t.last().r);
}

#[test]
fn large_center_value_blows_up() {
    let pr = Problem::new(3, 1.0, 0.125, 3.0);
    let t = shoot(&pr, &Launch::Center { u0: 100.0 }, 1e-4, &opts()).unwrap();
    check_invariants(&t);
    match t.event {
        Event::BlowupDetected { r_blow } => assert!(r_blow < 1.0 && r_blow > 0.0),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn sublinear_shots_stay_positive() {
    let pr = Problem::new(3, 1.0, 0.125, 0.5);
    for u0 in [0.01, 1.0, 30.0] {
        let t = shoot(&pr, &Launch::Center { u0 }, 1e-3, &opts()).unwrap();
        check_invariants(&t);
        assert!(t.reached_boundary(), "u0 = {u0}: {:?}", t.event);
        assert!(t.samples.iter().all(|s| s.u > 0.0));
        assert_eq!(t.last().delta, 1e-10);
    }
}

#[test]
fn tolerance_halving_changes_final_value_little() {
    let pr = Problem::new(3, 1.0, 0.125, 0.5);
    let base = IntegratorOptions {
        rel_tol: 1e-8,
        abs_tol: 1e-12,
        ..opts()
    };
    let a = shoot(&pr, &Launch::Center { u0: 1.0 }, 1e-3, &base).unwrap();
    let b = shoot(&pr, &Launch::Center { u0: 1.0 }, 1e-3, &base.tightened(2.0)).unwrap();
    let (ua, ub) = (a.last().u, b.last().u);
    assert!(((ua - ub) / ub).abs() < 10.0 * base.rel_tol, "{ua} vs {ub}");
}

#[test]
fn deterministic() {
    let pr = Problem::new(2, 1.5, -0.4, 2.0);
    let a = shoot(&pr, &Launch::Center { u0: 0.3 }, 1e-3, &opts()).unwrap();
    let b = shoot(&pr, &Launch::Center { u0: 0.3 }, 1e-3, &opts()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn blowup_suffix_is_monotone() {
    for (p, u0) in [(3.0, 20.0), (2.0, 80.0), (5.0, 4.0), (7.0, 5.0)] {
        let pr = Problem::new(3, 1.0, 0.125, p);
        let launch = Launch::Center { u0 };
        let t = shoot(&pr, &launch, default_launch_offset(&pr, &launch), &opts()).unwrap();
        assert!(matches!(t.event, Event::BlowupDetected { .. }), "p={p}: {:?}", t.event);
        let us: Vec<f64> = t.samples.iter().map(|s| s.u).collect();
        let last_min = (1..us.len() - 1)
            .rfind(|&i| us[i] < us[i - 1] && us[i] <= us[i + 1])
            .unwrap_or(0);
        assert!(us[last_min..].windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn one_dimensional_branch() {
    let pr = Problem::new(1, 1.0, -0.3, 3.0);
    let t = shoot(&pr, &Launch::Center { u0: 0.2 }, 1e-3, &opts()).unwrap();
    assert!(t.reached_boundary());
    check_invariants(&t);
}

#[test]
fn step_budget() {
    let pr = Problem::new(3, 1.0, 0.125, 0.5);
    let o = IntegratorOptions { max_steps: 5, ..opts() };
    assert_eq!(
        shoot(&pr, &Launch::Center { u0: 1.0 }, 1e-3, &o),
        Err(Error::MaxSteps(5))
    );
}

#[test]
fn invalid_options() {
    let pr = Problem::new(3, 1.0, 0.125, 0.5);
    let start = center_series(&pr, 1.0, 1e-3, 1e-6).unwrap();
    for o in [
        IntegratorOptions { rel_tol: 0.0, ..opts() },
        IntegratorOptions {
            u_cap: Some(0.5),
            ..opts()
        },
        IntegratorOptions {
            delta_stop: Some(-1.0),
            ..opts()
        },
    ] {
        assert!(matches!(integrate(&pr, start, &o), Err(Error::InvalidOptions(_))));
    }
}

#[test]
fn boundary_branches_agree() {
    let pr = Problem::new(3, 1.0, 0.125, 3.0);
    let start = center_series(&pr, 0.5, 1e-3, 1e-6).unwrap();
    let a = integrate(
        &pr,
        start,
        &IntegratorOptions {
            boundary_branch: BoundaryBranch::Hardy,
            ..opts()
        },
    )
    .unwrap();
    let b = integrate(
        &pr,
        start,
        &IntegratorOptions {
            boundary_branch: BoundaryBranch::BlowupScaled,
            ..opts()
        },
    )
    .unwrap();
    assert!(a.reached_boundary() && b.reached_boundary());
    let beta = crate::model::indicial_roots(0.125).0;
    let (qa, _) = a.scaled_at(1e-9, beta).unwrap();
    let (qb, _) = b.scaled_at(1e-9, beta).unwrap();
    assert!(((qa - qb) / qa).abs() < 1e-6, "{qa} {qb}");
}

#[test]
fn manufactured_solution_converges_fast() {
    let op = Operator {
        dim_n: 3,
        radius: 1.0,
        mu: 0.125,
    };
    let beta = 0.3;
    let exact = |r: f64| (1.0 - r).powf(beta);
    let forcing = move |r: f64| {
        let d: f64 = 1.0 - r;
        let u = d.powf(beta);
        let du = -beta * d.powf(beta - 1.0);
        let d2u = beta * (beta - 1.0) * d.powf(beta - 2.0);
        d2u + 2.0 / r * du + 0.125 / (d * d) * u
    };
    let r0 = 0.25;
    let start = State::new(1.0, r0, exact(r0), -beta * (1.0 - r0).powf(beta - 1.0));
    let mut pts = Vec::new();
    for tol in [1e-6, 1e-7, 1e-8, 1e-9] {
        let o = IntegratorOptions {
            rel_tol: tol,
            abs_tol: tol * 1e-3,
            delta_stop: Some(1e-3),
            samples_per_octave: 0,
            ..opts()
        };
        let t = integrate_forced(&op, &forcing, start, &o).unwrap();
        assert!(t.reached_boundary());
        let err = t
            .samples
            .iter()
            .map(|s| ((s.u - s.delta.powf(beta)) / s.delta.powf(beta)).abs())
            .fold(0.0, f64::max);
        pts.push(((t.accepted_steps as f64).ln(), err.ln()));
    }
    for w in pts.windows(2) {
        let order = -(w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        eprintln!("observed order {order}");
        assert!(order >= 4.0, "order {order}");
    }
}

#[test]
fn refine_origin_launch() {
    let pr = Problem::new(3, 1.0, 0.125, 0.5);
    let target = |t: &Trajectory| Ok(t.interpolate_r(0.5).unwrap().u);
    let r = refine_until(&pr, &Launch::Origin, 1e-2, target, 1e-7, &opts(), 12).unwrap();
    let vals: Vec<f64> = r.history.iter().map(|h| h.1).collect();
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    eprintln!("{vals:?}");
    for w in diffs.windows(2) {
        assert!(w[1] <= w[0] * 1.01 || w[1] < 1e-13, "{diffs:?}");
    }
    let zero = refine_until(&pr, &Launch::Origin, 1e-2, target, 0.0, &opts(), 4);
    assert!(matches!(zero, Err(Error::NoConvergence { .. })));
}

#[test]
fn csv_matches_json() {
    let pr = Problem::new(3, 1.0, 0.125, 3.0);
    let t = shoot(&pr, &Launch::Center { u0: 0.7 }, 1e-3, &opts()).unwrap();
    let csv = trajectory_csv(&t, ["r", "u", "du"]);
    let table = read_csv(&csv).unwrap();
    assert_eq!(table.header, vec!["r", "u", "du"]);
    assert!(table.comments[0].starts_with("event: ReachedBoundaryWindow"));
    let doc = trajectory_json(&pr, &opts(), &t);
    let back: Vec<State> = serde_json::from_value(doc["samples"].clone()).unwrap();
    assert_eq!(back.len(), table.rows.len());
    for (s, row) in back.iter().zip(&table.rows) {
        assert_eq!([s.r, s.u, s.du], *row);
    }
}

#[test]
fn scaled_interpolation_exact_on_power_law() {
    let radius = 1.0;
    let samples: Vec<State> = (0..30)
        .map(|i| {
            let d = 0.01 * 0.63f64.powi(i);
            State {
                r: radius - d,
                delta: d,
                u: 3.0 * d.powf(-0.7),
                du: 3.0 * 0.7 * d.powf(-1.7),
            }
        })
        .collect();
    let t = Trajectory {
        radius,
        samples,
        event: Event::ReachedBoundaryWindow { delta_stop: 1e-8 },
        accepted_steps: 0,
        rejected_steps: 0,
    };
    for d in [3e-3, 1.234e-5, 7e-7] {
        let (q, g) = t.scaled_at(d, -0.7).unwrap();
        assert!((q - 3.0).abs() < 1e-13 && g.abs() < 1e-10, "{q} {g}");
    }
}
