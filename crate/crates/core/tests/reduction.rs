use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use pulse_reduction::dynamics::{step, CurrentReport, EnvelopeSchedule, RampKind};
use pulse_reduction::reduction::{reduce, RateBasis, ReductionEngine, RngStream};
use pulse_reduction::state::{
    make_gaussian_pulse, BrainFactor, BrainGrid, BrainKind, ObserverId, SystemState, Term,
};
use pulse_reduction::Error;

const OBS: ObserverId = ObserverId(0);
const N: usize = 256;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn grid() -> BrainGrid {
    BrainGrid::unit(N).unwrap()
}

fn ready(center: f64, sigma: f64) -> BrainFactor {
    BrainFactor::pulse(make_gaussian_pulse(grid(), center, sigma, BrainKind::Ready).unwrap(), OBS)
}

/// Unnormalized Gaussian amplitude, normalized here by direct summation.
fn oracle_amplitude(center: f64, sigma: f64, site: usize) -> f64 {
    let du = 1.0 / N as f64;
    let f = |k: usize| {
        let d = k as f64 * du - center;
        (-d * d / (2.0 * sigma * sigma)).exp()
    };
    let norm = ((0..N).map(|k| f(k) * f(k)).sum::<f64>() * du).sqrt();
    f(site) / norm * du.sqrt()
}

/// Every `(post-step state, report)` pair of an interaction ramp.
fn ramp_trace(fraction: f64, dt: f64) -> Vec<(SystemState, CurrentReport)> {
    let g = grid();
    let b1 = make_gaussian_pulse(g, 0.3, 0.05, BrainKind::Conscious).unwrap();
    let terms = vec![
        Term::new(0, c(1.0), BrainFactor::pulse(b1, OBS)),
        Term::new(1, c(0.0), ready(0.7, 0.05)),
    ];
    let mut st = SystemState::new(g, terms, 0.0).unwrap();
    let sch = EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, fraction, &[(0, 1)]).unwrap();
    let n = (1.0 / dt).round() as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (next, report) = step(&st, &sch, dt).unwrap();
        out.push((next.clone(), report));
        st = next;
    }
    out
}

fn survival(trace: &[(SystemState, CurrentReport)], engine: &ReductionEngine) -> f64 {
    trace
        .iter()
        .map(|(st, r)| 1.0 - engine.step_probability(st, r).unwrap())
        .product()
}

#[test]
fn cumulative_hit_probability_matches_final_weight() {
    for fraction in [0.1, 0.3, 0.75, 1.0] {
        let trace = ramp_trace(fraction, 1e-3);
        let p = 1.0 - survival(&trace, &ReductionEngine::new(RateBasis::Feeding));
        assert!((p - fraction).abs() <= 1e-2, "{fraction}: {p}");
        assert_abs_diff_eq!(p, fraction, epsilon = 1e-9);
    }
}

#[test]
fn reference_rate_compounds_exponentially() {
    let fraction = 0.3;
    let trace = ramp_trace(fraction, 1e-3);
    let p = 1.0 - survival(&trace, &ReductionEngine::new(RateBasis::Reference));
    assert_abs_diff_eq!(p, 1.0 - (-fraction).exp(), epsilon = 1e-3);
}

#[test]
fn reference_rate_caps_step_probability() {
    let trace = ramp_trace(1.0, 0.01);
    let engine = ReductionEngine::new(RateBasis::Reference);
    let (st, _) = &trace[0];
    let fast = CurrentReport::from_term_currents(vec![-10.0, 10.0], 0.01);
    assert!(matches!(engine.step_probability(st, &fast), Err(Error::HitRateTooHigh { .. })));
    let slow = CurrentReport::from_term_currents(vec![-4.0, 4.0], 0.01);
    assert_abs_diff_eq!(engine.step_probability(st, &slow).unwrap(), 0.04, epsilon = 1e-15);
    // The largest step a ramp resolves stays under the cap.
    assert!(trace.iter().all(|(st, r)| engine.step_probability(st, r).is_ok()));
}

fn first_hit(trace: &[(SystemState, CurrentReport)], seed: u64, trial: u64) -> Option<(usize, usize, [f64; 2])> {
    let engine = ReductionEngine::default();
    let mut rng = RngStream::for_trial(seed, trial);
    for (st, r) in trace {
        if let Some(h) = engine.sample_hit(st, r, &mut rng).unwrap() {
            return Some((h.term, h.site, h.draws));
        }
    }
    None
}

#[test]
fn sampled_hits_follow_the_ramp() {
    let fraction = 0.3;
    let trace = ramp_trace(fraction, 0.01);
    let n = 20_000;
    let hits: Vec<_> = (0..n).filter_map(|i| first_hit(&trace, 11, i)).collect();
    let p = hits.len() as f64 / n as f64;
    let se = (fraction * (1.0 - fraction) / n as f64).sqrt();
    assert!((p - fraction).abs() < 4.0 * se, "{p}");

    // Hit sites are distributed like the ready pulse's mass.
    let du = grid().spacing();
    let mean = hits.iter().map(|h| h.1 as f64 * du).sum::<f64>() / hits.len() as f64;
    let sd = 0.05 / 2f64.sqrt();
    assert!((mean - 0.7).abs() < 4.0 * sd / (hits.len() as f64).sqrt(), "{mean}");
    assert!(hits.iter().all(|h| h.0 == 1));
}

#[test]
fn trials_replay_exactly() {
    let trace = ramp_trace(0.5, 0.01);
    for trial in 0..200 {
        assert_eq!(first_hit(&trace, 5, trial), first_hit(&trace, 5, trial));
    }
    let a: Vec<_> = (0..200).map(|t| first_hit(&trace, 5, t)).collect();
    let b: Vec<_> = (0..200).map(|t| first_hit(&trace, 6, t)).collect();
    assert_ne!(a, b);
}

#[test]
fn surviving_coefficients_match_oracle() {
    let (a1, a2) = (0.6, 0.8);
    let terms = vec![
        Term::new(0, c(a1), ready(0.45, 0.05)),
        Term::new(1, c(a2), ready(0.55, 0.05)),
    ];
    let st = SystemState::new(grid(), terms, 0.0).unwrap();
    for site in [100, 120, 128, 140, 160] {
        let next = reduce(&st, 0, site).unwrap();
        assert_abs_diff_eq!(next.terms[0].coefficient.re, a1 * oracle_amplitude(0.45, 0.05, site), epsilon = 1e-12);
        assert_abs_diff_eq!(next.terms[1].coefficient.re, a2 * oracle_amplitude(0.55, 0.05, site), epsilon = 1e-12);
    }
}

#[test]
fn ready_to_ready_schedules_are_refused() {
    let terms = vec![
        Term::new(0, c(1.0), ready(0.4, 0.05)),
        Term::new(1, c(0.0), ready(0.6, 0.05)),
    ];
    let st = SystemState::new(grid(), terms, 0.0).unwrap();
    let sch = EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, 1.0, &[(0, 1)]).unwrap();
    match step(&st, &sch, 0.01) {
        Err(Error::Rule4Violation(v)) => assert_eq!((v[0].source, v[0].target), (0, 1)),
        other => panic!("expected a rule 4 refusal, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn reduce_zeroes_and_never_grows(
        coefs in prop::collection::vec((0.01f64..1.0, 0.3f64..0.7), 2..5),
        pick in any::<prop::sample::Index>(),
        offset in -8i64..=8,
    ) {
        let mut terms: Vec<Term> = coefs
            .iter()
            .enumerate()
            .map(|(i, (a, center))| Term::new(i, c(*a), ready(*center, 0.04)))
            .collect();
        // An unrelated conscious component must always be zeroed.
        let b = make_gaussian_pulse(grid(), 0.5, 0.05, BrainKind::Conscious).unwrap();
        terms.push(Term::new(coefs.len(), c(0.3), BrainFactor::pulse(b, OBS)));
        let st = SystemState::new(grid(), terms, 0.0).unwrap();
        let hit = pick.index(coefs.len());
        let center = grid().nearest_index(coefs[hit].1).unwrap() as i64;
        let site = (center + offset) as usize;
        let next = reduce(&st, hit, site).unwrap();

        prop_assert!(next.total_square_modulus() <= st.total_square_modulus());
        prop_assert_eq!(next.s(), st.s());
        prop_assert_eq!(next.terms.last().unwrap().coefficient, c(0.0));
        for (i, (a, center)) in coefs.iter().enumerate() {
            let expected = a * oracle_amplitude(*center, 0.04, site);
            let got = next.terms[i].coefficient;
            prop_assert!((got.re - expected).abs() <= 1e-12);
            if got != c(0.0) {
                prop_assert!(next.terms[i].brain == BrainFactor::single(BrainKind::Conscious, site, OBS));
            }
        }
        prop_assert!(next.terms[hit].coefficient.norm() > 0.0);
    }
}
