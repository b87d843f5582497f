//! Stochastic hits driven by probability current, state reduction onto the
//! chosen brain state, and the ready-to-ready transfer guard.

mod rng;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use rng::RngStream;

use crate::dynamics::{CurrentReport, EnvelopeSchedule, SiteProfile};
use crate::error::{Error, Result};
use crate::state::{BrainFactor, BrainKind, ObserverId, SystemState};

/// Per-step hit probability allowed when the rate is taken against the fixed
/// reference modulus.
pub const MAX_STEP_PROBABILITY: f64 = 0.05;

/// Square modulus the positive current is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateBasis {
    /// Current square modulus of the components feeding the current. The
    /// step probability is then the exact conditional hit probability of
    /// the step, so hit totals do not depend on `dt`.
    #[default]
    Feeding,
    /// The state's fixed reference `s`. Per-step Bernoulli sampling is an
    /// approximation here and steps are capped at [`MAX_STEP_PROBABILITY`].
    Reference,
}

/// Rule for picking the site once a hit has fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SiteSelection {
    /// Proportional to positive per-site current.
    #[default]
    Current,
    /// Proportional to current times site mass. Deliberately wrong; used as
    /// a negative control for the statistical checks.
    #[doc(hidden)]
    Biased,
}

/// A forbidden transfer between two ready components of one observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rule4Violation {
    pub source: usize,
    pub target: usize,
    pub observer: ObserverId,
}

/// Every scheduled transfer whose two ends both hold a ready factor of the
/// same observer.
pub fn guard_rule4(schedule: &EnvelopeSchedule, state: &SystemState) -> Vec<Rule4Violation> {
    let mut out = Vec::new();
    for tr in schedule.transfers() {
        let Some(src) = state.terms.get(tr.source) else {
            continue;
        };
        for &(target, _) in &tr.targets {
            let Some(dst) = state.terms.get(target) else {
                continue;
            };
            if src.brain.is_ready()
                && dst.brain.is_ready()
                && src.brain.observer == dst.brain.observer
            {
                out.push(Rule4Violation {
                    source: tr.source,
                    target,
                    observer: src.brain.observer,
                });
            }
        }
    }
    out
}

/// `clamp(Σ J⁺ · dt / s, 0, 1)`.
pub fn hit_probability(report: &CurrentReport, s: f64, dt: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::NonpositiveS(s));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidSchedule(format!("dt {dt} must be > 0")));
    }
    Ok((report.total_positive * dt / s).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub term: usize,
    pub site: usize,
    pub probability: f64,
    /// Hit test draw and site selection draw.
    pub draws: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivingCoefficient {
    pub term: usize,
    pub apparatus: usize,
    pub coefficient: Complex64,
}

/// Record of one stochastic hit, with the draws needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionEvent {
    pub t_sc: f64,
    pub term_hit: usize,
    pub u_sc: usize,
    pub step_probability: f64,
    pub pre_norm: f64,
    pub post_norm: f64,
    pub post_coefficients: Vec<SurvivingCoefficient>,
    pub rng_draws: [f64; 2],
}

impl ReductionEvent {
    /// Number of apparatus labels left in the surviving bracket.
    pub fn multiplicity(&self) -> usize {
        self.post_coefficients.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReductionEngine {
    pub basis: RateBasis,
    pub selection: SiteSelection,
}

impl ReductionEngine {
    pub fn new(basis: RateBasis) -> Self {
        Self {
            basis,
            selection: SiteSelection::Current,
        }
    }

    /// Hit probability for the step that produced `report`.
    pub fn step_probability(&self, state: &SystemState, report: &CurrentReport) -> Result<f64> {
        match self.basis {
            RateBasis::Feeding => {
                if report.feeding_modulus <= 0.0 {
                    return Ok(0.0);
                }
                hit_probability(report, report.feeding_modulus, report.dt)
            }
            RateBasis::Reference => {
                let p = hit_probability(report, state.s(), report.dt)?;
                if p >= MAX_STEP_PROBABILITY {
                    return Err(Error::HitRateTooHigh {
                        p,
                        max: MAX_STEP_PROBABILITY,
                    });
                }
                Ok(p)
            }
        }
    }

    /// Bernoulli hit test for one step; on a hit, picks a (term, site) pair
    /// among live ready components in proportion to positive site current.
    pub fn sample_hit(
        &self,
        state: &SystemState,
        report: &CurrentReport,
        rng: &mut RngStream,
    ) -> Result<Option<Hit>> {
        let p = self.step_probability(state, report)?;
        if p <= 0.0 {
            return Ok(None);
        }
        let u1 = rng.uniform();
        if u1 >= p {
            return Ok(None);
        }
        let u2 = rng.uniform();
        Ok(self
            .select_site(state, report, u2)
            .map(|(term, site)| Hit {
                term,
                site,
                probability: p,
                draws: [u1, u2],
            }))
    }

    fn site_weight(&self, mass: f64) -> f64 {
        match self.selection {
            SiteSelection::Current => mass,
            SiteSelection::Biased => mass * mass,
        }
    }

    fn select_site(&self, state: &SystemState, report: &CurrentReport, u: f64) -> Option<(usize, usize)> {
        let candidates: Vec<_> = report
            .per_site
            .iter()
            .filter(|s| s.current > 0.0)
            .filter(|s| state.terms.get(s.term).is_some_and(|t| t.is_hit_target()))
            .collect();
        let term_weight = |s: &&crate::dynamics::SiteCurrents| match &s.profile {
            SiteProfile::Spread(mass) => s.current * mass.iter().map(|m| self.site_weight(*m)).sum::<f64>(),
            SiteProfile::Single(_) => s.current,
        };
        let total: f64 = candidates.iter().map(term_weight).sum();
        if !(total > 0.0) {
            return None;
        }
        let mut target = u * total;
        let mut fallback = None;
        for s in &candidates {
            match &s.profile {
                SiteProfile::Single(site) => {
                    fallback = Some((s.term, *site));
                    if target < s.current {
                        return fallback;
                    }
                    target -= s.current;
                }
                SiteProfile::Spread(mass) => {
                    for (site, m) in mass.iter().enumerate() {
                        let w = s.current * self.site_weight(*m);
                        if w <= 0.0 {
                            continue;
                        }
                        fallback = Some((s.term, site));
                        if target < w {
                            return fallback;
                        }
                        target -= w;
                    }
                }
            }
        }
        // Rounding left the target just past the last positive weight.
        fallback
    }

    /// Applies [`reduce`] for `hit` and records the event.
    pub fn apply(&self, state: &SystemState, hit: &Hit) -> Result<(SystemState, ReductionEvent)> {
        let pre_norm = state.total_square_modulus();
        let next = reduce(state, hit.term, hit.site)?;
        let post_coefficients = next
            .surviving()
            .map(|(i, t)| SurvivingCoefficient {
                term: i,
                apparatus: t.apparatus.0,
                coefficient: t.coefficient,
            })
            .collect();
        let event = ReductionEvent {
            t_sc: state.time,
            term_hit: hit.term,
            u_sc: hit.site,
            step_probability: hit.probability,
            pre_norm,
            post_norm: next.total_square_modulus(),
            post_coefficients,
            rng_draws: hit.draws,
        };
        Ok((next, event))
    }
}

/// Reduces the state onto the single brain state at `u_sc` of the observer
/// owning `term_hit`.
///
/// Every live ready component of that observer with weight at `u_sc` keeps
/// coefficient `a_i · F_i(u_sc) √Δu` and becomes entangled with one conscious
/// grid state at `u_sc`; every other coefficient is set to exactly zero. The
/// result is not renormalized and `s` is left alone.
pub fn reduce(state: &SystemState, term_hit: usize, u_sc: usize) -> Result<SystemState> {
    state.grid().check_index(u_sc)?;
    let hit = state.term(term_hit)?;
    if !hit.is_hit_target() {
        return Err(Error::NotHitTarget(term_hit));
    }
    if hit.brain.site_amplitude(u_sc).norm_sqr() == 0.0 {
        return Err(Error::ZeroWeightSite {
            term: term_hit,
            site: u_sc,
        });
    }
    let observer = hit.brain.observer;
    let mut next = state.clone();
    for term in &mut next.terms {
        let amp = term.brain.site_amplitude(u_sc);
        if term.is_hit_target() && term.brain.observer == observer && amp.norm_sqr() > 0.0 {
            term.coefficient *= amp;
            term.brain = BrainFactor::single(BrainKind::Conscious, u_sc, observer);
        } else {
            term.coefficient = Complex64::new(0.0, 0.0);
        }
    }
    next.formation = None;
    next.drift = None;
    Ok(next)
}
