use rayon::prelude::*;
use serde::Serialize;

use super::Scenario;
use crate::error::Result;
use crate::reduction::ReductionEvent;

/// Statistics-relevant outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub hit: bool,
    pub event: Option<ReductionEvent>,
    /// Share of the post-reduction square modulus per apparatus label;
    /// empty without a hit.
    pub label_weights: Vec<f64>,
    /// Turn-off only: whether the spot of the remaining source stays.
    pub spot_remains: Option<bool>,
}

/// Runs trials `0..n` in parallel. Each trial owns the stream
/// `(seed, trial)`, so results do not depend on scheduling.
pub fn run_trials(scenario: &Scenario, n: usize) -> Result<Vec<TrialOutcome>> {
    (0..n as u64)
        .into_par_iter()
        .map(|trial| scenario.run_trial(trial))
        .collect()
}
