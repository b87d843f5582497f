//! Acceptance suite. Runs as a plain binary so the verdict lines always show
//! up in `cargo test` output; exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;

use pulse_reduction::analysis::{compare, compare_mean, hit_histogram, P_VALUE_LIMIT, Z_LIMIT};
use pulse_reduction::dynamics::{relative_intensity, FormationMode};
use pulse_reduction::reduction::ReductionEvent;
use pulse_reduction::scenarios::{run_trials, Hooks, Scenario, ScenarioConfig, Summary, TrialOutcome};
use pulse_reduction::state::{make_gaussian_pulse, BrainGrid, BrainKind, BrainState};
use pulse_reduction::Error;

const TRIALS: usize = 100_000;

type Verdict = Result<String, String>;

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn trials(name: &str) -> (Scenario, Vec<TrialOutcome>) {
    let sc = Scenario::new(config(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let out = run_trials(&sc, TRIALS).unwrap_or_else(|e| panic!("{name}: {e}"));
    (sc, out)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn events(outcomes: &[TrialOutcome]) -> Vec<ReductionEvent> {
    outcomes.iter().filter_map(|o| o.event.clone()).collect()
}

/// Grid amplitude `F(u)√Δu` of a Gaussian, normalized by direct summation
/// over the unit grid.
fn oracle_site_amplitude(n: usize, center: f64, sigma: f64, site: usize) -> f64 {
    let du = 1.0 / n as f64;
    let f = |k: usize| {
        let d = k as f64 * du - center;
        (-d * d / (2.0 * sigma * sigma)).exp()
    };
    let norm = ((0..n).map(|k| f(k) * f(k)).sum::<f64>() * du).sqrt();
    f(site) / norm * du.sqrt()
}

/// A trig ramp over the whole unit window moves amplitude as `a sin(πt/2)`.
fn oracle_ramped(a: f64, t: f64) -> f64 {
    a * (std::f64::consts::FRAC_PI_2 * t.clamp(0.0, 1.0)).sin()
}

fn c1_interaction_probability() -> Verdict {
    let start = Instant::now();
    let (sc, out) = trials("interaction_partial.toml");
    let elapsed = start.elapsed().as_secs_f64();
    let s = sc.initial_state().map_err(|e| e.to_string())?.s();
    ensure(s == 1.0, format!("s = {s}"))?;
    let hits: Vec<bool> = out.iter().map(|o| o.hit).collect();
    let r = compare(&hits, 0.3).map_err(|e| e.to_string())?;
    let detail = format!(
        "empirical {:.5} vs 0.3, z = {:.2}, 3 sigma = {:.4}, trials took {elapsed:.1} s",
        r.empirical,
        r.z_score,
        3.0 * r.std_error
    );
    ensure(r.z_score.abs() <= Z_LIMIT, detail.clone())?;
    ensure(elapsed < 60.0, detail.clone())?;
    Ok(detail)
}

fn c2_certain_hit(full: &[TrialOutcome]) -> Verdict {
    let n = full.iter().filter(|o| o.hit).count();
    let detail = format!("{n}/{} trials reduced", full.len());
    ensure(n == full.len(), detail.clone())?;
    Ok(detail)
}

fn c3_born_weighting(sc: &Scenario, full: &[TrialOutcome]) -> Verdict {
    let cfg = sc.config();
    let n = cfg.grid.n_points;
    let (center, sigma) = (cfg.brain.ready_centers[0], cfg.brain.sigma);
    let expected: Vec<f64> = (0..n)
        .map(|u| oracle_site_amplitude(n, center, sigma, u).powi(2))
        .collect();
    let evs = events(full);
    let h = hit_histogram(&evs, sc.grid(), &expected).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} events, chi2 = {:.1} on {} dof, p = {:.3}",
        h.n_events, h.chi_square, h.dof, h.p_value
    );
    ensure(evs.len() >= 10_000 && h.p_value > P_VALUE_LIMIT, detail.clone())?;
    Ok(detail)
}

fn p2(outcomes: &[TrialOutcome]) -> Vec<bool> {
    outcomes.iter().map(|o| o.spot_remains == Some(true)).collect()
}

fn c4_turn_off() -> Verdict {
    let (_, overlap) = trials("turn_off_overlap.toml");
    let (_, disjoint) = trials("turn_off_disjoint.toml");
    let a = compare(&p2(&overlap), 0.5).map_err(|e| e.to_string())?;
    let b = compare(&p2(&disjoint), 0.5).map_err(|e| e.to_string())?;
    let z_ab = (a.empirical - b.empirical) / (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let detail = format!(
        "overlap P2 = {:.5} (z {:.2}), disjoint P2 = {:.5} (z {:.2}), difference z = {:.2}",
        a.empirical, a.z_score, b.empirical, b.z_score, z_ab
    );
    ensure(a.z_score.abs() <= Z_LIMIT && b.z_score.abs() <= Z_LIMIT, detail.clone())?;
    ensure(z_ab.abs() <= Z_LIMIT, detail.clone())?;
    Ok(detail)
}

fn c5_reduced_structure(overlap: &(Scenario, Vec<TrialOutcome>)) -> Verdict {
    let (sc, out) = overlap;
    let cfg = sc.config();
    let n = cfg.grid.n_points;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for e in events(out) {
        let mut labels = 0;
        for (label, (&a, &center)) in cfg.apparatus.amplitudes.iter().zip(&cfg.brain.ready_centers).enumerate() {
            let expected = oracle_ramped(a, e.t_sc) * oracle_site_amplitude(n, center, cfg.brain.sigma, e.u_sc);
            let got = e
                .post_coefficients
                .iter()
                .find(|c| c.apparatus == label)
                .map_or(Complex64::new(0.0, 0.0), |c| c.coefficient);
            worst = worst.max((got - expected).norm());
            if got.norm_sqr() > 0.0 {
                labels += 1;
            }
        }
        ensure(labels == e.multiplicity(), "a surviving term carries no apparatus label")?;
        checked += 1;
    }
    ensure(worst <= 1e-12, format!("max coefficient error {worst:.2e}"))?;

    let (_, disjoint) = trials("unresolvable_disjoint.toml");
    let single_label = events(&disjoint).iter().filter(|e| e.multiplicity() == 1).count();
    let (_, single_x) = trials("unresolvable_single_x.toml");
    let superposed = events(&single_x).iter().filter(|e| e.multiplicity() > 1).count();
    let detail = format!(
        "{checked} overlap hits, max coefficient error {worst:.1e}; disjoint single-label {single_label}/{}; single-state superpositions {superposed}/{}",
        disjoint.len(),
        single_x.len()
    );
    ensure(single_label == disjoint.len(), detail.clone())?;
    ensure(superposed == 0 && events(&single_x).len() == single_x.len(), detail.clone())?;
    Ok(detail)
}

fn c6_final_vs_initial(overlap: &(Scenario, Vec<TrialOutcome>)) -> Verdict {
    let asym = trials("unresolvable_asymmetric.toml");
    let mut parts = Vec::new();
    for (sc, out) in [overlap, &asym] {
        let cfg = sc.config();
        let s = sc.initial_state().map_err(|e| e.to_string())?.s();
        let a_sq: Vec<f64> = cfg.apparatus.amplitudes.iter().map(|a| a * a).collect();
        let initial: f64 = a_sq.iter().sum::<f64>() / s;
        let totals: Vec<f64> = out.iter().map(|o| o.label_weights.iter().sum()).collect();
        let total = compare_mean(&totals, initial).map_err(|e| e.to_string())?;
        ensure(total.pass, format!("total {:.6} vs {initial}", total.empirical))?;
        let mut labels = Vec::new();
        for (i, w) in a_sq.iter().enumerate() {
            let values: Vec<f64> = out.iter().map(|o| o.label_weights.get(i).copied().unwrap_or(0.0)).collect();
            let r = compare_mean(&values, w / s).map_err(|e| e.to_string())?;
            labels.push(format!("{:.4} vs {:.2} (z {:.2})", r.empirical, w / s, r.z_score));
            ensure(r.z_score.abs() <= Z_LIMIT, labels.join(", "))?;
        }
        parts.push(format!("a = {:?}: total {:.6}, labels {}", cfg.apparatus.amplitudes, total.empirical, labels.join(", ")));
    }
    Ok(parts.join("; "))
}

fn pulse_norm_error(states: impl Iterator<Item = BrainState>) -> f64 {
    states
        .filter_map(|b| match b {
            BrainState::Pulse(p) => Some(p.norm()),
            BrainState::Disengaged(x) => Some(x.norm()),
            BrainState::Single { .. } => None,
        })
        .map(|n| (n - 1.0).abs())
        .fold(0.0, f64::max)
}

fn c7_invariants() -> Verdict {
    let bundle = [
        "interaction.toml",
        "interaction_partial.toml",
        "unresolvable_overlap.toml",
        "unresolvable_asymmetric.toml",
        "unresolvable_disjoint.toml",
        "unresolvable_single_x.toml",
        "turn_off_overlap.toml",
        "turn_off_disjoint.toml",
        "disengage.toml",
        "pulse_drift.toml",
        "fade_in.toml",
    ];
    let mut norm_err = 0.0f64;
    let mut rate = 0.0f64;
    let mut snapshots = 0;
    let mut runs = Vec::new();
    for name in bundle {
        let mut cfgs = vec![config(name)];
        if cfgs[0].name.has_hits() {
            let mut staged = cfgs[0].clone();
            staged.formation.mode = FormationMode::Staged;
            cfgs.push(staged);
        }
        for cfg in cfgs {
            let run = Scenario::new(cfg).and_then(|s| s.run()).map_err(|e| format!("{name}: {e}"))?;
            snapshots += run.trajectory.len();
            norm_err = norm_err
                .max(pulse_norm_error(run.trajectory.iter().flat_map(|s| s.terms.iter().map(|t| t.brain.state.clone()))))
                .max(run.monitor.max_norm_error);
            rate = rate.max(run.monitor.max_conservation_rate);
            runs.push((name, run));
        }
    }
    ensure(norm_err <= 1e-9, format!("pulse norm error {norm_err:.2e}"))?;
    ensure(rate <= 1e-9, format!("conservation rate {rate:.2e}"))?;

    // Pre-reduction snapshots keep the initial modulus.
    let (_, partial) = runs.iter().find(|(n, _)| *n == "interaction_partial.toml").unwrap();
    let s0: f64 = partial.trajectory[0].terms.iter().map(|t| t.square_modulus()).sum();
    for snap in partial.trajectory.iter().take_while(|s| s.terms.iter().all(|t| !matches!(t.brain.state, BrainState::Single { .. }))) {
        let total: f64 = snap.terms.iter().map(|t| t.square_modulus()).sum();
        ensure((total - s0).abs() <= 1e-9, format!("modulus {total} at t = {}", snap.t))?;
    }

    // Every term a reduction leaves out is exactly zero.
    let mut zeroed = 0;
    for (name, run) in &runs {
        for e in &run.events {
            let post = run
                .trajectory
                .iter()
                .find(|s| s.t == e.t_sc && s.terms.iter().any(|t| matches!(t.brain.state, BrainState::Single { kind: BrainKind::Conscious, .. })))
                .ok_or_else(|| format!("{name}: no post-reduction snapshot"))?;
            for (i, t) in post.terms.iter().enumerate() {
                if !e.post_coefficients.iter().any(|c| c.term == i) {
                    ensure(t.coefficient == Complex64::new(0.0, 0.0), format!("{name}: term {i} not zeroed"))?;
                    zeroed += 1;
                }
            }
        }
    }

    let drift = runs.iter().find_map(|(_, r)| match &r.summary {
        Summary::PulseDrift(d) => Some(d.clone()),
        _ => None,
    });
    let drift = drift.ok_or("no drift run")?;
    ensure(drift.phantom_sites > 0 && drift.max_phantom_drift < 1e-12, format!("phantom drift {:.2e}", drift.max_phantom_drift))?;
    let tampered = Scenario::new(config("pulse_drift.toml"))
        .map(|s| s.with_hooks(Hooks { tamper_phantom: true, ..Hooks::default() }))
        .and_then(|s| s.run());
    ensure(
        matches!(tampered, Err(Error::InvariantBreach { invariant: "phantom_freeze", .. })),
        "tampered phantom not detected",
    )?;

    let mut guarded = config("negative/pulse_drift_rule4.toml");
    guarded.guard = true;
    let refused = Scenario::new(guarded).and_then(|s| s.run());
    ensure(matches!(refused, Err(Error::Rule4Violation(_))), "trailing-to-leading ready transfer was not refused")?;

    let mut replays = 0;
    for name in ["unresolvable_overlap.toml", "turn_off_overlap.toml", "interaction_partial.toml"] {
        let sc = Scenario::new(config(name)).map_err(|e| e.to_string())?;
        for trial in 0..5 {
            let a = serde_json::to_vec(&sc.run_recorded(trial).map_err(|e| e.to_string())?.events).unwrap();
            let b = serde_json::to_vec(&sc.run_recorded(trial).map_err(|e| e.to_string())?.events).unwrap();
            ensure(a == b, format!("{name} trial {trial}: event logs differ"))?;
            replays += 1;
        }
    }

    Ok(format!(
        "{} runs, {snapshots} snapshots: norm error {norm_err:.1e}, conservation {rate:.1e}/unit time, {zeroed} zeroed terms exact, {} phantoms frozen (drift {:.1e}), rule 4 refused, {replays} byte-identical replays",
        runs.len(),
        drift.phantom_sites,
        drift.max_phantom_drift
    ))
}

fn c8_intensity() -> Verdict {
    let g = BrainGrid::unit(256).map_err(|e| e.to_string())?;
    let full = make_gaussian_pulse(g, 0.5, 0.05, BrainKind::Conscious).map_err(|e| e.to_string())?;
    let whole = relative_intensity(&full, 0, 255).map_err(|e| e.to_string())?;
    let mid = make_gaussian_pulse(g, 127.5 * g.spacing(), 0.05, BrainKind::Conscious).map_err(|e| e.to_string())?;
    let lower = relative_intensity(&mid, 0, 127).map_err(|e| e.to_string())?;
    let upper = relative_intensity(&mid, 128, 255).map_err(|e| e.to_string())?;
    let detail = format!("full {whole:.12}, halves {lower:.6} / {upper:.6}");
    ensure((whole - 1.0).abs() <= 1e-9, detail.clone())?;
    ensure((lower - 0.5).abs() <= 1e-3 && (upper - 0.5).abs() <= 1e-3, detail.clone())?;
    Ok(detail)
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let mut results = Vec::new();
    let mut report = |n: usize, title: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &v {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("criterion {n} {tag} {title}: {detail} [{secs:.1} s]");
        results.push(v.is_ok());
    };

    report(1, "interaction probability", &mut c1_interaction_probability);
    let full = trials("interaction.toml");
    report(2, "certain hit on completed transfer", &mut || c2_certain_hit(&full.1));
    report(3, "within-pulse Born weighting", &mut || c3_born_weighting(&full.0, &full.1));
    drop(full);
    report(4, "turn-off experiment", &mut c4_turn_off);
    let overlap = trials("unresolvable_overlap.toml");
    report(5, "reduced-state structure", &mut || c5_reduced_structure(&overlap));
    report(6, "final vs initial probability", &mut || c6_final_vs_initial(&overlap));
    drop(overlap);
    report(7, "invariant suite", &mut c7_invariants);
    report(8, "relative intensity", &mut c8_intensity);

    let passed = results.iter().filter(|ok| **ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
