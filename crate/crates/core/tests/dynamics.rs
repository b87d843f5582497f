use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use pulse_reduction::dynamics::{
    drift_pulse, form_pulse, step, DriftParams, EnvelopeSchedule, FormationPolicy, RampKind,
};
use pulse_reduction::state::{
    make_gaussian_pulse, BrainFactor, BrainGrid, BrainKind, BrainState, ObserverId, SystemState,
    Term,
};
use pulse_reduction::Error;

const OBS: ObserverId = ObserverId(0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn grid() -> BrainGrid {
    BrainGrid::unit(256).unwrap()
}

/// `A₁ {B₁}` fully populated, `A₂ {B₂}` empty. The second factor starts out
/// tagged conscious so that ramping it in exercises the ready tagging.
fn interaction_state() -> SystemState {
    let g = grid();
    let b1 = make_gaussian_pulse(g, 0.3, 0.05, BrainKind::Conscious).unwrap();
    let b2 = make_gaussian_pulse(g, 0.7, 0.05, BrainKind::Conscious).unwrap();
    let terms = vec![
        Term::new(0, c(1.0), BrainFactor::pulse(b1, OBS)),
        Term::new(1, c(0.0), BrainFactor::pulse(b2, OBS)),
    ];
    SystemState::new(g, terms, 0.0).unwrap()
}

fn ramp(st: &SystemState, kind: RampKind, fraction: f64) -> EnvelopeSchedule {
    EnvelopeSchedule::ramp(kind, st, 0.0, 1.0, fraction, &[(0, 1)]).unwrap()
}

fn run(mut st: SystemState, sch: &EnvelopeSchedule, dt: f64, n: usize) -> (SystemState, f64) {
    let mut fed = 0.0;
    for _ in 0..n {
        let (next, report) = step(&st, sch, dt).unwrap();
        fed += report.total_positive * dt;
        st = next;
    }
    (st, fed)
}

#[test]
fn hold_changes_nothing() {
    let st = interaction_state();
    let (next, report) = step(&st, &EnvelopeSchedule::hold(), 0.01).unwrap();
    assert_eq!(next.terms, st.terms);
    assert!(report.per_term.iter().all(|j| *j == 0.0));
    assert_eq!(report.total_positive, 0.0);
}

#[test]
fn trig_ramp_halfway_is_balanced() {
    let st = interaction_state();
    let sch = ramp(&st, RampKind::TrigRamp, 1.0);
    let (mid, _) = run(st, &sch, 0.01, 50);
    let expected = std::f64::consts::FRAC_PI_4.cos();
    assert_abs_diff_eq!(mid.terms[0].coefficient.re, expected, epsilon = 1e-9);
    assert_abs_diff_eq!(mid.terms[1].coefficient.re, expected, epsilon = 1e-9);
}

#[test]
fn full_ramp_feeds_unit_modulus() {
    let st = interaction_state();
    let sch = ramp(&st, RampKind::TrigRamp, 1.0);
    let (end, fed) = run(st, &sch, 1e-3, 1000);
    assert!((fed - 1.0).abs() <= 1e-3, "fed {fed}");
    assert_abs_diff_eq!(end.terms[1].coefficient.norm_sqr(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(end.total_square_modulus(), 1.0, epsilon = 1e-12);
}

#[test]
fn linear_ramp_has_constant_current() {
    let st = interaction_state();
    let sch = ramp(&st, RampKind::LinearRamp, 0.5);
    let mut cur = st;
    for _ in 0..100 {
        let (next, report) = step(&cur, &sch, 0.01).unwrap();
        assert_abs_diff_eq!(report.per_term[1], 0.5, epsilon = 1e-9);
        cur = next;
    }
}

#[test]
fn ramped_in_components_are_ready() {
    let st = interaction_state();
    assert!(st.terms[1].brain.is_conscious());
    let sch = ramp(&st, RampKind::TrigRamp, 1.0);
    let (next, report) = step(&st, &sch, 0.01).unwrap();
    assert!(next.terms[1].brain.is_ready());
    assert!(next.terms[0].brain.is_conscious());
    let site = report.site_currents(1).expect("ready term reports site currents");
    assert_abs_diff_eq!(site.sum(), report.per_term[1], epsilon = 1e-12);
}

#[test]
fn coarse_steps_are_rejected() {
    let st = interaction_state();
    let sch = ramp(&st, RampKind::TrigRamp, 1.0);
    assert!(matches!(step(&st, &sch, 0.5), Err(Error::StepTooCoarse { .. })));
    assert!(matches!(step(&st, &sch, 0.0), Err(Error::InvalidSchedule(_))));
}

fn post_reduction(site: usize, coefficient: f64) -> SystemState {
    let g = grid();
    let terms = vec![
        Term::new(0, c(0.0), BrainFactor::single(BrainKind::Ready, site + 3, OBS)),
        Term::new(1, c(coefficient), BrainFactor::single(BrainKind::Conscious, site, OBS)),
    ];
    SystemState::with_reference(g, terms, 0.0, 1.0).unwrap()
}

fn conscious_profile(st: &SystemState) -> pulse_reduction::state::Profile {
    st.conscious_pulse().unwrap().profile().clone()
}

#[test]
fn instant_formation_keeps_coefficients() {
    let st = post_reduction(128, 0.7);
    let formed = form_pulse(&st, 128, &FormationPolicy::instantaneous(0.05)).unwrap();
    assert_abs_diff_eq!(formed.total_square_modulus(), 0.49, epsilon = 1e-12);
    assert_eq!(formed.terms[1].coefficient, c(0.7));
    let p = formed.conscious_pulse().unwrap();
    assert!(p.is_fully_formed());
    assert_eq!(p.center_index(), 128);
    let reference = make_gaussian_pulse(grid(), 0.5, 0.05, BrainKind::Conscious).unwrap();
    for (a, b) in p.weights().iter().zip(reference.weights()) {
        assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
    }
}

#[test]
fn formation_needs_a_reduced_state() {
    let st = interaction_state();
    assert!(matches!(
        form_pulse(&st, 128, &FormationPolicy::instantaneous(0.05)),
        Err(Error::NotPostReduction(_))
    ));
}

#[test]
fn staged_formation_follows_its_time_constant() {
    let (tau, dt, target) = (0.1, 0.01, 0.05);
    let st = post_reduction(128, 1.0);
    let mut cur = form_pulse(&st, 128, &FormationPolicy::staged(target, tau, 64)).unwrap();
    assert_eq!(cur.conscious_pulse().unwrap().profile().occupied_sites(), 1);
    let hold = EnvelopeSchedule::hold();
    let du = grid().spacing();

    for _ in 0..10 {
        cur = step(&cur, &hold, dt).unwrap().0;
    }
    let r = (-1.0f64).exp();
    let expected = target * (1.0 - r) + 2.0 * du * r;
    let width = conscious_profile(&cur).fitted_width();
    assert!((width - expected).abs() / expected < 1e-3, "{width} vs {expected}");

    let mut steps = 10;
    while cur.is_forming() {
        cur = step(&cur, &hold, dt).unwrap().0;
        steps += 1;
        assert!(steps < 10_000);
    }
    let width = conscious_profile(&cur).fitted_width();
    assert!((width - target).abs() / target < 1e-6, "{width}");
    assert!(cur.conscious_pulse().unwrap().is_fully_formed());
    assert_abs_diff_eq!(cur.total_square_modulus(), 1.0, epsilon = 1e-12);
}

fn drift_state(shadow: bool) -> SystemState {
    let g = grid();
    let p = make_gaussian_pulse(g, 0.3, 0.05, BrainKind::Conscious).unwrap();
    let mut terms = vec![Term::new(0, c(1.0), BrainFactor::pulse(p, OBS))];
    if shadow {
        let q = make_gaussian_pulse(g, 0.3, 0.05, BrainKind::Ready).unwrap();
        terms.push(Term::new(0, c(0.0), BrainFactor::pulse(q, OBS)));
    }
    SystemState::new(g, terms, 0.0).unwrap()
}

#[test]
fn zero_velocity_drift_stands_still() {
    let st = drift_state(false);
    let params = DriftParams { velocity: 0.0, shadow_feed: None };
    let next = drift_pulse(&st, &params, 0.01).unwrap();
    assert_eq!(next.terms, st.terms);
}

#[test]
fn drift_moves_one_site_per_step() {
    let du = grid().spacing();
    let dt = 0.01;
    let params = DriftParams { velocity: du / dt, shadow_feed: None };
    let mut cur = drift_state(false);
    let start = conscious_profile(&cur).mean_position();
    for _ in 0..40 {
        cur = drift_pulse(&cur, &params, dt).unwrap();
    }
    let shift = conscious_profile(&cur).mean_position() - start;
    assert_abs_diff_eq!(shift, 40.0 * du, epsilon = 1e-9);
    assert_abs_diff_eq!(cur.terms[0].coefficient.norm_sqr(), 1.0, epsilon = 0.0);
}

#[test]
fn fractional_drift_tracks_velocity() {
    let du = grid().spacing();
    let params = DriftParams { velocity: 0.137, shadow_feed: None };
    let mut cur = drift_state(false);
    let start = conscious_profile(&cur).mean_position();
    for _ in 0..100 {
        cur = drift_pulse(&cur, &params, 0.01).unwrap();
    }
    let shift = conscious_profile(&cur).mean_position() - start;
    assert!((shift - 0.137).abs() < 0.5 * du, "{shift}");
}

fn check_conservation(kind: RampKind, fraction: f64, dt: f64, amp: (f64, f64)) -> Result<(), TestCaseError> {
    let g = grid();
    let b1 = make_gaussian_pulse(g, 0.3, 0.05, BrainKind::Conscious).unwrap();
    let b2 = make_gaussian_pulse(g, 0.7, 0.05, BrainKind::Ready).unwrap();
    let a = Complex64::new(amp.0, amp.1);
    let terms = vec![
        Term::new(0, a, BrainFactor::pulse(b1, OBS)),
        Term::new(1, c(0.0), BrainFactor::pulse(b2, OBS)),
    ];
    let mut st = SystemState::new(g, terms, 0.0).unwrap();
    let s = st.s();
    let sch = ramp(&st, kind, fraction);
    let n = (1.2 / dt).ceil() as usize;
    for _ in 0..n {
        let (next, report) = step(&st, &sch, dt).unwrap();
        prop_assert!((next.total_square_modulus() - s).abs() <= 1e-12 * s.max(1.0));
        prop_assert!((report.per_term[0] + report.per_term[1]).abs() * dt <= 1e-12 * s.max(1.0));
        prop_assert!(report.per_term[0] <= 1e-12 && report.per_term[1] >= -1e-12);
        st = next;
    }
    prop_assert!((st.terms[1].coefficient.norm_sqr() - fraction * s).abs() <= 1e-9 * s.max(1.0));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ramps_conserve_total_modulus(
        trig in any::<bool>(),
        fraction in 0.0f64..=1.0,
        dt in 0.001f64..0.01,
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
    ) {
        prop_assume!(re * re + im * im > 1e-3);
        let kind = if trig { RampKind::TrigRamp } else { RampKind::LinearRamp };
        check_conservation(kind, fraction, dt, (re, im))?;
    }

    #[test]
    fn phantoms_never_move(steps in 5usize..60, velocity in 0.05f64..0.3, feed in 0.01f64..0.2) {
        let dt = 0.01;
        let params = DriftParams { velocity, shadow_feed: Some(feed) };
        let mut cur = drift_state(true);
        let s = cur.s();
        let mut seen: Vec<Term> = Vec::new();
        for _ in 0..steps {
            cur = drift_pulse(&cur, &params, dt).unwrap();
            let phantoms: Vec<&Term> = cur.terms.iter().filter(|t| t.phantom).collect();
            prop_assert!(phantoms.len() >= seen.len());
            for (old, new) in seen.iter().zip(&phantoms) {
                prop_assert_eq!(old, *new);
            }
            for t in &phantoms {
                let is_single = matches!(t.brain.state, BrainState::Single { kind: BrainKind::Ready, .. });
                prop_assert!(is_single);
            }
            seen = phantoms.into_iter().cloned().collect();
            prop_assert!((cur.total_square_modulus() - s).abs() <= 1e-12);
        }
    }
}
