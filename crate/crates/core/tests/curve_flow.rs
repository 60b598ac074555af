use soliton_forge::curve_flow::{area_law_check, csf_run, gage_hamilton_decay, normalize_and_roundness, SupportCurve};

#[test]
fn perturbed_circle_rounds_out() {
    let w0 = SupportCurve::from_fn(256, |t| 1.0 + 0.05 * (3.0 * t).cos()).unwrap();
    let traj = csf_run(&w0, 0.45, 1e-3).unwrap();
    let law = area_law_check(&traj).unwrap();
    assert!(law.relative_deviation < 5e-3, "{law:?}");
    let round = normalize_and_roundness(&traj).unwrap();
    assert!(round.decreasing_from.is_some(), "{:?}", round.delta);
    let decay = gage_hamilton_decay(&traj).unwrap();
    let ellipse = gage_hamilton_decay(&csf_run(&SupportCurve::ellipse(2.0, 1.0, 256).unwrap(), 0.9, 1e-3).unwrap()).unwrap();
    let (p, e) = (decay.slope.unwrap(), ellipse.slope.unwrap());
    println!("energy slopes: perturbed circle {p:.3}, ellipse {e:.3}");
    assert!(p < 0.0 && p < e);
}

#[test]
fn circle_shrinks_self_similarly() {
    let traj = csf_run(&SupportCurve::circle(1.0, 128).unwrap(), 0.4, 1e-3).unwrap();
    for (t, c) in traj.times.iter().zip(&traj.curves) {
        let r = (1.0 - 2.0 * t).sqrt();
        let err = c.radius_of_curvature().iter().map(|v| (v - r).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "t = {t}: {err}");
    }
}
