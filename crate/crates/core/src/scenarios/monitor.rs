use std::collections::BTreeMap;

use serde::Serialize;

use crate::dynamics::CurrentReport;
use crate::error::{Error, Result};
use crate::reduction::{ReductionEvent, Rule4Violation};
use crate::state::{BrainFactor, BrainState, SystemState};

/// Invariant names, as reported by `verify` and in breach errors.
pub const NORMALIZATION: &str = "normalization";
pub const CONSERVATION: &str = "conservation";
pub const PHANTOM_FREEZE: &str = "phantom_freeze";
pub const RULE4_GUARD: &str = "rule4_guard";
pub const REDUCTION_ZEROING: &str = "reduction_zeroing";

pub const NORM_TOL: f64 = 1e-9;
/// Allowed drift of the total square modulus per unit time.
pub const CONSERVATION_RATE_TOL: f64 = 1e-9;
pub const PHANTOM_TOL: f64 = 1e-12;

/// Checks invariants on every state a scenario produces. The first breach
/// aborts the run.
#[derive(Debug, Clone, Default)]
pub struct Monitor {
    reference: Option<(f64, f64)>,
    phantoms: BTreeMap<usize, (num_complex::Complex64, BrainFactor)>,
    checks: BTreeMap<&'static str, usize>,
    /// Largest phantom amplitude change seen.
    pub max_phantom_drift: f64,
    /// Largest pulse or profile norm error seen.
    pub max_norm_error: f64,
    /// Largest pre-reduction modulus drift per unit time seen.
    pub max_conservation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub checks: BTreeMap<&'static str, usize>,
    pub max_norm_error: f64,
    pub max_conservation_rate: f64,
    pub max_phantom_drift: f64,
}

fn breach(invariant: &'static str, detail: String) -> Error {
    Error::InvariantBreach { invariant, detail }
}

impl Monitor {
    pub fn new() -> Self {
        Self::default()
    }

    fn tick(&mut self, name: &'static str) {
        *self.checks.entry(name).or_default() += 1;
    }

    pub fn summary(&self) -> MonitorSummary {
        MonitorSummary {
            checks: self.checks.clone(),
            max_norm_error: self.max_norm_error,
            max_conservation_rate: self.max_conservation_rate,
            max_phantom_drift: self.max_phantom_drift,
        }
    }

    /// Restarts the conservation baseline, e.g. after a reduction or an
    /// external intervention such as switching a source off.
    pub fn rebase(&mut self, state: &SystemState) {
        self.reference = Some((state.time, state.total_square_modulus()));
    }

    /// Checks a state produced by unitary-surrogate evolution. `report` is
    /// the current report of the step that produced it, if any.
    pub fn observe(&mut self, state: &SystemState, report: Option<&CurrentReport>) -> Result<()> {
        self.check_norms(state)?;
        self.check_phantoms(state)?;
        self.check_conservation(state, report)?;
        if let Some(r) = report {
            self.check_rule4(state, r)?;
        }
        Ok(())
    }

    fn check_norms(&mut self, state: &SystemState) -> Result<()> {
        self.tick(NORMALIZATION);
        for (i, term) in state.terms.iter().enumerate() {
            let norm = match &term.brain.state {
                BrainState::Pulse(p) => p.norm(),
                BrainState::Disengaged(p) => p.norm(),
                BrainState::Single { .. } => continue,
            };
            let err = (norm - 1.0).abs();
            self.max_norm_error = self.max_norm_error.max(err);
            if !(err <= NORM_TOL) {
                return Err(breach(
                    NORMALIZATION,
                    format!("term {i} brain factor norm {norm} at t = {}", state.time),
                ));
            }
        }
        Ok(())
    }

    fn check_phantoms(&mut self, state: &SystemState) -> Result<()> {
        self.tick(PHANTOM_FREEZE);
        for (i, term) in state.terms.iter().enumerate().filter(|(_, t)| t.phantom) {
            match self.phantoms.get(&i) {
                None => {
                    self.phantoms.insert(i, (term.coefficient, term.brain.clone()));
                }
                Some((c, brain)) => {
                    let drift = (term.coefficient - c).norm();
                    self.max_phantom_drift = self.max_phantom_drift.max(drift);
                    if drift >= PHANTOM_TOL || term.brain != *brain {
                        return Err(breach(
                            PHANTOM_FREEZE,
                            format!("phantom term {i} changed by {drift:e} at t = {}", state.time),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_conservation(&mut self, state: &SystemState, report: Option<&CurrentReport>) -> Result<()> {
        self.tick(CONSERVATION);
        let total = state.total_square_modulus();
        let &mut (t0, m0) = self.reference.get_or_insert((state.time, total));
        let elapsed = (state.time - t0).max(1.0);
        let rate = (total - m0).abs() / elapsed;
        self.max_conservation_rate = self.max_conservation_rate.max(rate);
        if !(rate <= CONSERVATION_RATE_TOL) {
            return Err(breach(
                CONSERVATION,
                format!("total square modulus moved from {m0} to {total} by t = {}", state.time),
            ));
        }
        if let Some(r) = report {
            let net = r.net();
            if !(net.abs() <= CONSERVATION_RATE_TOL) {
                return Err(breach(CONSERVATION, format!("currents sum to {net} at t = {}", state.time)));
            }
        }
        Ok(())
    }

    /// Realized ready-to-ready flow: within one observer, a ready term lost
    /// square modulus while another ready term gained it.
    fn check_rule4(&mut self, state: &SystemState, report: &CurrentReport) -> Result<()> {
        self.tick(RULE4_GUARD);
        let mut found = Vec::new();
        let ready = |i: usize| state.terms[i].brain.is_ready() && !state.terms[i].phantom;
        for (src, &js) in report.per_term.iter().enumerate() {
            if js >= 0.0 || !ready(src) {
                continue;
            }
            for (dst, &jd) in report.per_term.iter().enumerate() {
                if jd > 0.0
                    && ready(dst)
                    && state.terms[src].brain.observer == state.terms[dst].brain.observer
                {
                    found.push(Rule4Violation {
                        source: src,
                        target: dst,
                        observer: state.terms[src].brain.observer,
                    });
                }
            }
        }
        if found.is_empty() {
            Ok(())
        } else {
            Err(Error::Rule4Violation(found))
        }
    }

    /// Checks a reduction: every term either keeps exactly
    /// `a_i(t_sc) · F_i(u_sc) √Δu` or is exactly zero.
    pub fn observe_reduction(
        &mut self,
        pre: &SystemState,
        post: &SystemState,
        event: &ReductionEvent,
    ) -> Result<()> {
        self.tick(REDUCTION_ZEROING);
        let observer = pre.terms[event.term_hit].brain.observer;
        for (i, (before, after)) in pre.terms.iter().zip(&post.terms).enumerate() {
            let amp = before.brain.site_amplitude(event.u_sc);
            let survives = before.is_hit_target() && before.brain.observer == observer && amp.norm_sqr() > 0.0;
            let expected = if survives {
                before.coefficient * amp
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            };
            if after.coefficient != expected {
                return Err(breach(
                    REDUCTION_ZEROING,
                    format!("term {i} holds {} after reduction, expected {expected}", after.coefficient),
                ));
            }
        }
        if !(event.post_norm <= event.pre_norm) {
            return Err(breach(
                REDUCTION_ZEROING,
                format!("reduction raised the square modulus from {} to {}", event.pre_norm, event.post_norm),
            ));
        }
        self.phantoms.clear();
        self.rebase(post);
        Ok(())
    }
}
