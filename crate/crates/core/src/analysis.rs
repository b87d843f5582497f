//! Closed-form probabilities, Monte Carlo comparisons and the hit-site
//! histogram test.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::reduction::ReductionEvent;
use crate::scenarios::{Scenario, ScenarioName, TrialOutcome};
use crate::state::BrainGrid;

pub const MIN_TRIALS: usize = 1_000;
pub const MIN_EVENTS: usize = 10_000;
/// Monte Carlo comparisons pass when `|z| < Z_LIMIT`.
pub const Z_LIMIT: f64 = 3.0;
/// Histogram fits pass when the χ² p-value exceeds this.
pub const P_VALUE_LIMIT: f64 = 0.01;
/// Tolerance for comparisons whose trial values carry no sampling noise.
pub const DETERMINISTIC_TOL: f64 = 1e-9;
/// Smallest expected bin count before neighbouring bins are pooled.
const MIN_EXPECTED: f64 = 5.0;

fn check_s(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::NonpositiveS(s));
    }
    Ok(())
}

fn check_modulus(x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Config(format!("square modulus {x} must be >= 0")));
    }
    Ok(())
}

/// `P = |a₂(T)|² / s`.
pub fn closed_form_p_hit(a2_final_sq: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    check_modulus(a2_final_sq)?;
    Ok(a2_final_sq / s)
}

/// Probability that the spot of the remaining source survives turning the
/// other source off: `|a₂|² / s`, whatever the pulse overlap.
pub fn closed_form_p2_after_off(a2_sq: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    check_modulus(a2_sq)?;
    Ok(a2_sq / s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityReport {
    pub closed_form: f64,
    pub empirical: f64,
    pub n_trials: usize,
    pub std_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

fn judge(closed_form: f64, empirical: f64, n_trials: usize, std_error: f64, exact_tol: f64) -> ProbabilityReport {
    let diff = empirical - closed_form;
    let (z_score, pass) = if std_error > 0.0 {
        let z = diff / std_error;
        (z, z.abs() < Z_LIMIT)
    } else if diff.abs() <= exact_tol {
        (0.0, true)
    } else {
        (diff.signum() * f64::INFINITY, false)
    };
    ProbabilityReport {
        closed_form,
        empirical,
        n_trials,
        std_error,
        z_score,
        pass,
    }
}

/// Bernoulli comparison with `std_error = √(p̂(1 − p̂)/n)`. When every trial
/// agrees the error is zero and the closed form must match exactly.
pub fn compare(outcomes: &[bool], closed_form: f64) -> Result<ProbabilityReport> {
    let n = outcomes.len();
    if n < MIN_TRIALS {
        return Err(Error::TooFewTrials { n, min: MIN_TRIALS });
    }
    let successes = outcomes.iter().filter(|x| **x).count();
    let p = successes as f64 / n as f64;
    let std_error = (p * (1.0 - p) / n as f64).sqrt();
    Ok(judge(closed_form, p, n, std_error, 0.0))
}

/// Comparison of the mean of per-trial values in `[0, 1]`, with the sample
/// standard error. Noise-free values are held to [`DETERMINISTIC_TOL`].
pub fn compare_mean(values: &[f64], closed_form: f64) -> Result<ProbabilityReport> {
    let n = values.len();
    if n < MIN_TRIALS {
        return Err(Error::TooFewTrials { n, min: MIN_TRIALS });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut std_error = (var / n as f64).sqrt();
    if std_error < DETERMINISTIC_TOL * 1e-3 {
        std_error = 0.0;
    }
    Ok(judge(closed_form, mean, n, std_error, DETERMINISTIC_TOL))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramReport {
    pub n_events: usize,
    /// Observed hit frequency per grid site.
    pub frequencies: Vec<f64>,
    /// Bins after pooling sparse neighbours.
    pub bins: usize,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
}

/// χ² goodness of fit of the hit sites against `expected` (per-site
/// probabilities, renormalized here). Adjacent sites are pooled until every
/// bin expects at least five events.
pub fn hit_histogram(events: &[ReductionEvent], grid: &BrainGrid, expected: &[f64]) -> Result<HistogramReport> {
    let n = events.len();
    if n < MIN_EVENTS {
        return Err(Error::TooFewEvents { n, min: MIN_EVENTS });
    }
    let sites = grid.n_points();
    if expected.len() != sites {
        return Err(Error::GridMismatch);
    }
    let total: f64 = expected.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroProfile);
    }
    let mut counts = vec![0usize; sites];
    for e in events {
        grid.check_index(e.u_sc)?;
        counts[e.u_sc] += 1;
    }

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (c, m) in counts.iter().zip(expected) {
        obs += *c as f64;
        exp += m / total * n as f64;
        if exp >= MIN_EXPECTED {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    match bins.last_mut() {
        Some(last) => {
            last.0 += obs;
            last.1 += exp;
        }
        None => bins.push((obs, exp)),
    }

    let chi_square: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let p_value = if dof == 0 {
        if chi_square == 0.0 { 1.0 } else { 0.0 }
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(chi_square)
    };
    Ok(HistogramReport {
        n_events: n,
        frequencies: counts.iter().map(|c| *c as f64 / n as f64).collect(),
        bins: bins.len(),
        chi_square,
        dof,
        p_value,
        pass: p_value > P_VALUE_LIMIT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedReport {
    pub name: String,
    #[serde(flatten)]
    pub report: ProbabilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub n_trials: usize,
    pub n_events: usize,
    pub comparisons: Vec<NamedReport>,
    /// Absent when there are too few events for the χ² test.
    pub histogram: Option<HistogramReport>,
    /// Trials per number of surviving apparatus labels.
    pub multiplicity: BTreeMap<usize, usize>,
    pub pass: bool,
}

/// All statistical comparisons for a batch of trials of one scenario.
pub fn scenario_report(scenario: &Scenario, outcomes: &[TrialOutcome]) -> Result<MonteCarloReport> {
    let cfg = scenario.config();
    let p_hit = scenario.closed_form_p_hit()?;
    let hits: Vec<bool> = outcomes.iter().map(|o| o.hit).collect();
    let mut comparisons = vec![NamedReport {
        name: "p_hit".into(),
        report: compare(&hits, p_hit)?,
    }];

    if cfg.name.is_observation() {
        let shares = scenario.expected_label_shares()?;
        let totals: Vec<f64> = outcomes.iter().map(|o| o.label_weights.iter().sum()).collect();
        comparisons.push(NamedReport {
            name: "final_state_probability".into(),
            report: compare_mean(&totals, p_hit)?,
        });
        for (label, share) in shares.iter().enumerate() {
            let values: Vec<f64> = outcomes
                .iter()
                .map(|o| o.label_weights.get(label).copied().unwrap_or(0.0))
                .collect();
            comparisons.push(NamedReport {
                name: format!("label_{label}_probability"),
                report: compare_mean(&values, share * p_hit)?,
            });
        }
    }
    if cfg.name == ScenarioName::TurnOff {
        let spot = 1 - cfg.turn_off.label;
        let a = cfg.apparatus.amplitudes[spot];
        let initial = scenario.initial_state()?;
        let remains: Vec<bool> = outcomes.iter().map(|o| o.spot_remains == Some(true)).collect();
        comparisons.push(NamedReport {
            name: "p2_after_off".into(),
            report: compare(&remains, closed_form_p2_after_off(a * a, initial.s())?)?,
        });
    }

    let events: Vec<ReductionEvent> = outcomes.iter().filter_map(|o| o.event.clone()).collect();
    let histogram = if events.len() >= MIN_EVENTS {
        Some(hit_histogram(&events, scenario.grid(), &scenario.expected_hit_profile()?)?)
    } else {
        None
    };
    let mut multiplicity = BTreeMap::new();
    for e in &events {
        *multiplicity.entry(e.multiplicity()).or_insert(0) += 1;
    }
    let pass = comparisons.iter().all(|c| c.report.pass) && histogram.as_ref().is_none_or(|h| h.pass);
    Ok(MonteCarloReport {
        scenario: cfg.name,
        seed: cfg.seed,
        n_trials: outcomes.len(),
        n_events: events.len(),
        comparisons,
        histogram,
        multiplicity,
        pass,
    })
}
