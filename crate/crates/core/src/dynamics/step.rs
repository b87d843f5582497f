use std::sync::Arc;

use super::formation;
use super::schedule::EnvelopeSchedule;
use crate::error::{Error, Result};
use crate::reduction::guard_rule4;
use crate::state::{BrainKind, BrainState, SystemState, Term};

/// How a ready term's current is spread over grid sites.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteProfile {
    /// Per-site mass `|F(u)|² Δu` of a ready pulse; sums to one.
    Spread(Arc<[f64]>),
    Single(usize),
}

/// Current into each grid site of one ready term.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCurrents {
    pub term: usize,
    /// Net current `J_n` into the whole term.
    pub current: f64,
    pub profile: SiteProfile,
}

impl SiteCurrents {
    /// Current into `site`. Ready factors keep their shape under `step`,
    /// so the site current is the term current times the site's mass.
    pub fn get(&self, site: usize) -> f64 {
        match &self.profile {
            SiteProfile::Spread(mass) => mass.get(site).map_or(0.0, |m| self.current * m),
            SiteProfile::Single(s) if *s == site => self.current,
            SiteProfile::Single(_) => 0.0,
        }
    }

    pub fn values(&self, n_points: usize) -> Vec<f64> {
        (0..n_points).map(|u| self.get(u)).collect()
    }

    pub fn sum(&self) -> f64 {
        match &self.profile {
            SiteProfile::Spread(mass) => mass.iter().map(|m| self.current * m).sum(),
            SiteProfile::Single(_) => self.current,
        }
    }
}

/// Probability currents produced by one step: `J_n = Δ|·|² / dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentReport {
    pub per_term: Vec<f64>,
    pub per_site: Vec<SiteCurrents>,
    pub total_positive: f64,
    /// Square modulus, at the start of the step, of the components whose
    /// current is negative (the ones feeding the others).
    pub feeding_modulus: f64,
    pub dt: f64,
}

impl CurrentReport {
    /// A report carrying only term-level currents.
    pub fn from_term_currents(per_term: Vec<f64>, dt: f64) -> Self {
        let total_positive = per_term.iter().filter(|j| **j > 0.0).sum();
        Self {
            per_term,
            per_site: Vec::new(),
            total_positive,
            feeding_modulus: 0.0,
            dt,
        }
    }

    pub fn net(&self) -> f64 {
        self.per_term.iter().sum()
    }

    pub fn site_currents(&self, term: usize) -> Option<&SiteCurrents> {
        self.per_site.iter().find(|s| s.term == term)
    }
}

fn check_step(state: &SystemState, schedule: &EnvelopeSchedule, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidSchedule(format!("dt {dt} must be > 0")));
    }
    if let Some(max) = schedule.max_dt() {
        let active = state.time < schedule.t_end() && state.time + dt > schedule.t_start();
        if active && dt > max * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { dt, max });
        }
    }
    for tr in schedule.transfers() {
        for idx in std::iter::once(tr.source).chain(tr.targets.iter().map(|(d, _)| *d)) {
            if state.term(idx)?.phantom {
                return Err(Error::PhantomTransfer { term: idx });
            }
        }
    }
    Ok(())
}

/// Advances `state` by `dt` under `schedule`.
///
/// Refuses schedules that move current between two ready components of the
/// same observer.
pub fn step(
    state: &SystemState,
    schedule: &EnvelopeSchedule,
    dt: f64,
) -> Result<(SystemState, CurrentReport)> {
    check_step(state, schedule, dt)?;
    let violations = guard_rule4(schedule, state);
    if !violations.is_empty() {
        return Err(Error::Rule4Violation(violations));
    }
    advance(state, schedule, dt)
}

/// [`step`] without the Rule (4) guard. Callers that disable the guard are
/// expected to audit the realized flows themselves.
pub fn step_unguarded(
    state: &SystemState,
    schedule: &EnvelopeSchedule,
    dt: f64,
) -> Result<(SystemState, CurrentReport)> {
    check_step(state, schedule, dt)?;
    advance(state, schedule, dt)
}

fn advance(
    state: &SystemState,
    schedule: &EnvelopeSchedule,
    dt: f64,
) -> Result<(SystemState, CurrentReport)> {
    let before: Vec<f64> = state.terms.iter().map(Term::square_modulus).collect();
    let mut next = state.clone();
    next.time = schedule.snap(state.time + dt, dt);

    let (src_env, dst_env) = schedule.envelope(next.time);
    for tr in schedule.transfers() {
        next.terms[tr.source].coefficient = tr.amplitude * src_env;
        for &(dst, share) in &tr.targets {
            next.terms[dst].coefficient = tr.amplitude * (share * dst_env);
        }
    }

    // Components that come into being are ready, never conscious.
    for (term, &was) in next.terms.iter_mut().zip(&before) {
        if was == 0.0 && term.coefficient.norm_sqr() > 0.0 && term.brain.is_conscious() {
            term.brain.set_kind(BrainKind::Ready);
        }
    }

    if next.formation.is_some() {
        formation::advance(&mut next)?;
    }

    let mut per_term = Vec::with_capacity(before.len());
    let mut feeding_modulus = 0.0;
    for (term, &was) in next.terms.iter().zip(&before) {
        let j = (term.square_modulus() - was) / dt;
        if j < 0.0 && !term.phantom {
            feeding_modulus += was;
        }
        per_term.push(j);
    }

    let per_site = next
        .terms
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_hit_target())
        .filter_map(|(i, t)| {
            let profile = match &t.brain.state {
                BrainState::Pulse(p) => SiteProfile::Spread(p.profile().shared_mass()),
                BrainState::Single { site, .. } => SiteProfile::Single(*site),
                BrainState::Disengaged(_) => return None,
            };
            Some(SiteCurrents {
                term: i,
                current: per_term[i],
                profile,
            })
        })
        .collect();

    let total_positive = per_term.iter().filter(|j| **j > 0.0).sum();
    let report = CurrentReport {
        per_term,
        per_site,
        total_positive,
        feeding_modulus,
        dt,
    };
    Ok((next, report))
}
