use qrepeater::effective::{self, EffectiveScenario, PropagatorKind, StepControl};
use qrepeater::Error;

#[test]
fn no_cavity_coupling_leaves_the_field_alone() {
    let mut s = EffectiveScenario::default_displacement();
    s.g = 0.0;
    s.duration = Some(300.0);
    let r = effective::validate(&s).unwrap();
    assert!((r.comparisons[0].field_fidelity - 1.0).abs() < 1e-9);
    assert!(r.j1 == 0.0);
}

#[test]
fn no_laser_freezes_the_ring() {
    let mut s = EffectiveScenario::default_xy();
    s.omega = 0.0;
    s.duration = Some(1000.0);
    let r = effective::validate(&s).unwrap();
    assert!(r.final_state_fidelity >= 1.0 - 1e-6);
    assert!(r.comparisons[0].fidelity_as_written >= 1.0 - 1e-6);
}

#[test]
fn vanishing_coupling_needs_a_duration() {
    let mut s = EffectiveScenario::default_xy();
    s.omega = 0.0;
    assert!(matches!(effective::validate(&s), Err(Error::InvalidParameter(_))));
}

#[test]
fn xy_sign_matters() {
    let r = effective::validate(&EffectiveScenario::default_xy()).unwrap();
    let c = &r.comparisons[0];
    assert!(c.fidelity_corrected >= 0.99, "{}", c.fidelity_corrected);
    assert!(c.fidelity_as_written < c.fidelity_corrected);
}

#[test]
fn excited_population_tracks_estimate() {
    let mut s = EffectiveScenario::default_displacement();
    s.propagator = PropagatorKind::RotatingFrame;
    let r = effective::validate(&s).unwrap();
    let ratio = r.max_excited_population / r.excited_population_estimate;
    assert!((0.25..=4.0).contains(&ratio), "{ratio}");
}

#[test]
fn fit_error_shrinks_with_stronger_driving() {
    // strong-driving ratio 4Ω/g: 20, 40, 80
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&g| {
            let mut s = EffectiveScenario::default_displacement();
            s.g = g;
            s.alpha_targets = vec![0.25];
            s.propagator = PropagatorKind::RotatingFrame;
            effective::validate(&s).unwrap().fitted_displacement.unwrap().relative_error
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn hierarchy_violation_reported() {
    let mut s = EffectiveScenario::default_displacement();
    s.omega = 0.5;
    assert!(matches!(effective::validate(&s), Err(Error::HierarchyViolated(_))));
}

#[test]
fn small_cutoff_rejected() {
    let mut s = EffectiveScenario::default_displacement();
    s.fock_cutoff = 3;
    assert!(matches!(effective::validate(&s), Err(Error::FockTail { .. })));
}

#[test]
fn midpoint_agrees_with_exact_propagation() {
    let mut s = EffectiveScenario::default_xy();
    s.fock_cutoff = 2;
    let psi0 = effective::initial_state(&s);
    let t = 400.0;
    let (mid, stats) = effective::propagate(&s, &psi0, t, StepControl::new(1e-10)).unwrap();
    let exact = effective::propagate_exact(&s, &psi0, t).unwrap();
    assert!((mid - exact).norm() < 1e-7);
    assert!(stats.norm_drift < 1e-9);
}
