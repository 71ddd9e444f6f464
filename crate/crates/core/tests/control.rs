use hybridnav_core::kinematics::{
    control_law, desired_velocities, integrate_unicycle, tracking_error, ControlGains, LawVariant, Limits, Pose, TrackingError, VelocityCommand,
};
use hybridnav_core::scalar::normalize_angle;
use hybridnav_oracles::{euler_unicycle, SplitMix};
use proptest::prelude::*;

#[test]
fn zero_error_returns_feedforward_exactly() {
    let mut rng = SplitMix::new(1);
    let gains = ControlGains::<f64>::default();
    let limits = Limits::default();
    for _ in 0..1000 {
        let v_d = rng.range(0.0, 0.5);
        let w_d = rng.range(-1.5, 1.5);
        let cmd = control_law(&TrackingError::default(), v_d, w_d, &gains, &limits, LawVariant::LateralFactor);
        assert_eq!(cmd, VelocityCommand::new(v_d, w_d));
    }
}

#[test]
fn printed_law_is_biased_at_zero_error() {
    let gains = ControlGains::<f64>::default();
    let cmd = control_law(&TrackingError::default(), 0.2, 0.0, &gains, &Limits::default(), LawVariant::AsPrinted);
    assert!((cmd.omega - gains.k2 * 0.2).abs() < 1e-15);
}

#[test]
fn exact_arc_matches_fine_euler_integration() {
    let mut rng = SplitMix::new(2);
    for _ in 0..200 {
        let p = Pose::new(rng.range(-5.0, 5.0), rng.range(-5.0, 5.0), rng.range(-3.0, 3.0));
        let (v, w, dt) = (rng.range(-0.5, 0.5), rng.range(-1.5, 1.5), rng.range(0.01, 0.2));
        let got = integrate_unicycle(&p, &VelocityCommand::new(v, w), dt);
        let want = euler_unicycle((p.x, p.y, p.theta), v, w, dt, 100_000);
        assert!((got.x - want.0).abs() < 1e-6 && (got.y - want.1).abs() < 1e-6 && normalize_angle(got.theta - want.2).abs() < 1e-9, "{got:?} vs {want:?}");
    }
}

#[test]
fn zero_command_leaves_pose_unchanged() {
    let p = Pose::new(1.25, -0.5, 0.3);
    assert_eq!(integrate_unicycle(&p, &VelocityCommand::zero(), 0.05), p);
}

fn track(reference: impl Fn(f64) -> (Pose<f64>, f64, f64), start: Pose<f64>, seconds: f64) -> TrackingError<f64> {
    let (gains, limits, dt) = (ControlGains::default(), Limits::default(), 0.01);
    let mut pose = start;
    let mut e = TrackingError::default();
    for k in 0..(seconds / dt) as usize {
        let (r, v_d, w_d) = reference(k as f64 * dt);
        e = tracking_error(&pose, &r);
        let cmd = control_law(&e, v_d, w_d, &gains, &limits, LawVariant::LateralFactor);
        pose = integrate_unicycle(&pose, &cmd, dt);
    }
    e
}

#[test]
fn closed_loop_converges_on_line_and_circle() {
    let line = |t: f64| (Pose::new(0.3 * t, 0.0, 0.0), 0.3, 0.0);
    let e = track(line, Pose::new(-0.1, 0.2, 0.3), 50.0);
    assert!(e.position_norm() < 1e-3 && e.e3.abs() < 1e-3, "{e:?}");

    // circle of radius 1 m at 0.3 m/s, reference derivatives from the
    // closed form (x, y) = (sin wt, 1 - cos wt)
    let w = 0.3;
    let circle = |t: f64| {
        let (xd, yd) = ((w * t).cos() * w, (w * t).sin() * w);
        let (xdd, ydd) = (-(w * t).sin() * w * w, (w * t).cos() * w * w);
        let (v_d, w_d) = desired_velocities(xd, yd, xdd, ydd, 1e-3).unwrap();
        (Pose::new((w * t).sin(), 1.0 - (w * t).cos(), normalize_angle(w * t)), v_d, w_d)
    };
    let e = track(circle, Pose::new(0.0, -0.15, -0.2), 30.0);
    assert!(e.position_norm() < 1e-3 && e.e3.abs() < 1e-3, "{e:?}");
}

#[test]
fn small_lateral_offset_settles_within_ten_seconds() {
    let line = |t: f64| (Pose::new(0.4 * t, 0.0, 0.0), 0.4, 0.0);
    let e = track(line, Pose::new(0.0, 0.1, 0.0), 10.0);
    assert!(e.position_norm() < 0.01, "{e:?}");
}

#[test]
fn desired_velocities_of_a_circle() {
    // speed r w and curvature 1 / r give w_d = w
    let (r, w, t) = (2.0f64, 0.4f64, 1.7f64);
    let (xd, yd) = (-r * w * (w * t).sin(), r * w * (w * t).cos());
    let (xdd, ydd) = (-r * w * w * (w * t).cos(), -r * w * w * (w * t).sin());
    let (v_d, w_d) = desired_velocities(xd, yd, xdd, ydd, 1e-3).unwrap();
    assert!((v_d - r * w).abs() < 1e-12 && (w_d - w).abs() < 1e-12);
    assert!(desired_velocities(1e-4, 0.0, 1.0, 1.0, 1e-3).is_err());
}

proptest! {
    #[test]
    fn arc_length_equals_speed_times_dt(v in -0.5..0.5f64, w in -1.5..1.5f64, dt in 0.001..0.5f64, th in -3.0..3.0f64) {
        // chord of an arc of length |v| dt and turn w dt is 2 |v/w| sin(|w| dt / 2)
        let p = Pose::new(0.3, -0.2, th);
        let q = integrate_unicycle(&p, &VelocityCommand::new(v, w), dt);
        let chord = p.position().distance(&q.position());
        let half = (w * dt / 2.0).abs();
        let arc = if half < 1e-9 { chord } else { chord * half / half.sin() };
        prop_assert!((arc - v.abs() * dt).abs() < 1e-9);
    }

    #[test]
    fn saturated_command_respects_limits(
        e1 in -5.0..5.0f64, e2 in -5.0..5.0f64, e3 in -3.14..3.14f64,
        v_d in 0.0..2.0f64, w_d in -5.0..5.0f64,
    ) {
        let limits = Limits::default();
        let e = TrackingError { e1, e2, e3 };
        let cmd = control_law(&e, v_d, w_d, &ControlGains::default(), &limits, LawVariant::LateralFactor);
        prop_assert!(cmd.v.abs() <= limits.v_max && cmd.omega.abs() <= limits.omega_max);
    }

    #[test]
    fn tracking_error_is_invariant_under_rigid_motion(
        px in -5.0..5.0f64, py in -5.0..5.0f64, pt in -3.0..3.0f64,
        rx in -5.0..5.0f64, ry in -5.0..5.0f64, rt in -3.0..3.0f64,
        tx in -10.0..10.0f64, ty in -10.0..10.0f64, phi in -3.0..3.0f64,
    ) {
        let moved = |p: Pose<f64>| {
            let (s, c) = phi.sin_cos();
            Pose::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, normalize_angle(p.theta + phi))
        };
        let (pose, reference) = (Pose::new(px, py, pt), Pose::new(rx, ry, rt));
        let a = tracking_error(&pose, &reference);
        let b = tracking_error(&moved(pose), &moved(reference));
        prop_assert!((a.e1 - b.e1).abs() < 1e-9 && (a.e2 - b.e2).abs() < 1e-9);
        prop_assert!(normalize_angle(a.e3 - b.e3).abs() < 1e-9);
    }
}
