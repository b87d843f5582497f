use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{BrainFactor, BrainKind, BrainState, Profile, Pulse, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormationMode {
    Instantaneous,
    Staged,
}

/// How a chosen conscious state widens into a full conscious pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationPolicy {
    pub mode: FormationMode,
    /// Time constant of staged widening.
    pub tau: f64,
    pub target_sigma: f64,
    /// Sites newly reachable from the occupied region per step.
    pub neighbor_radius: usize,
}

impl FormationPolicy {
    pub fn instantaneous(target_sigma: f64) -> Self {
        Self {
            mode: FormationMode::Instantaneous,
            tau: 1.0,
            target_sigma,
            neighbor_radius: 1,
        }
    }

    pub fn staged(target_sigma: f64, tau: f64, neighbor_radius: usize) -> Self {
        Self {
            mode: FormationMode::Staged,
            tau,
            target_sigma,
            neighbor_radius,
        }
    }

    pub fn validate(&self, spacing: f64) -> Result<()> {
        if self.mode == FormationMode::Staged && !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!("formation tau {} must be > 0", self.tau)));
        }
        if self.neighbor_radius < 1 {
            return Err(Error::Config("formation neighbor_radius must be >= 1".into()));
        }
        if !(self.target_sigma >= 2.0 * spacing) {
            return Err(Error::GridTooCoarse {
                sigma: self.target_sigma,
                spacing,
            });
        }
        Ok(())
    }
}

/// Staged formation in progress; advanced by every `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub chosen: usize,
    pub t_sc: f64,
    pub policy: FormationPolicy,
    /// Occupied support `[lo, hi]`.
    pub lo: usize,
    pub hi: usize,
}

impl Formation {
    pub fn occupied(&self) -> usize {
        self.hi - self.lo + 1
    }
}

/// Below this residual the staged pulse is replaced by the final one.
const SETTLED: f64 = 1e-12;

fn full_pulse(state: &SystemState, chosen: usize, sigma: f64) -> Result<Pulse> {
    let grid = *state.grid();
    let profile = Profile::gaussian_on(grid, grid.position(chosen), sigma, 0..=grid.n_points() - 1)?;
    Ok(Pulse::new(BrainKind::Conscious, profile))
}

fn replace_conscious_factor(state: &mut SystemState, chosen: usize, pulse: &Pulse) {
    for term in state.terms.iter_mut().filter(|t| !t.phantom) {
        let matches = match &term.brain.state {
            BrainState::Single { kind, site } => *kind == BrainKind::Conscious && *site == chosen,
            BrainState::Pulse(p) => p.kind() == BrainKind::Conscious && !p.is_fully_formed(),
            BrainState::Disengaged(_) => false,
        };
        if matches {
            term.brain = BrainFactor::pulse(pulse.clone(), term.brain.observer);
        }
    }
}

/// Converts the single conscious state left by a reduction into a conscious
/// pulse centred on it. Coefficients are untouched.
///
/// Staged formation starts from the single site; subsequent [`step`] calls
/// widen it.
///
/// [`step`]: super::step
pub fn form_pulse(
    state: &SystemState,
    chosen: usize,
    policy: &FormationPolicy,
) -> Result<SystemState> {
    state.grid().check_index(chosen)?;
    policy.validate(state.grid().spacing())?;

    let mut surviving = state.surviving().filter(|(_, t)| !t.phantom).peekable();
    if surviving.peek().is_none() {
        return Err(Error::NotPostReduction("no surviving component".into()));
    }
    for (i, term) in surviving {
        match term.brain.state {
            BrainState::Single {
                kind: BrainKind::Conscious,
                site,
            } if site == chosen => {}
            _ => {
                return Err(Error::NotPostReduction(format!(
                    "term {i} does not carry the chosen conscious state at site {chosen}"
                )))
            }
        }
    }

    let mut next = state.clone();
    match policy.mode {
        FormationMode::Instantaneous => {
            let pulse = full_pulse(state, chosen, policy.target_sigma)?;
            replace_conscious_factor(&mut next, chosen, &pulse);
        }
        FormationMode::Staged => {
            let seed = Pulse::new(BrainKind::Conscious, Profile::point(*state.grid(), chosen)?)
                .with_stage(0.0);
            replace_conscious_factor(&mut next, chosen, &seed);
            next.formation = Some(Formation {
                chosen,
                t_sc: state.time,
                policy: *policy,
                lo: chosen,
                hi: chosen,
            });
        }
    }
    Ok(next)
}

/// Widens a staged pulse to `state.time`: the support grows by
/// `neighbor_radius` and the width follows
/// `σ(t) = σ_target (1 - e^{-Δt/τ}) + 2Δu e^{-Δt/τ}`.
pub(crate) fn advance(state: &mut SystemState) -> Result<()> {
    let Some(mut f) = state.formation.take() else {
        return Ok(());
    };
    let grid = *state.grid();
    let last = grid.n_points() - 1;
    f.lo = f.lo.saturating_sub(f.policy.neighbor_radius);
    f.hi = (f.hi + f.policy.neighbor_radius).min(last);

    let residual = (-(state.time - f.t_sc) / f.policy.tau).exp();
    let stage = 1.0 - residual;

    let pulse = if residual < SETTLED && f.lo == 0 && f.hi == last {
        full_pulse(state, f.chosen, f.policy.target_sigma)?
    } else {
        let sigma = f.policy.target_sigma * stage + 2.0 * grid.spacing() * residual;
        let profile = Profile::gaussian_on(grid, grid.position(f.chosen), sigma, f.lo..=f.hi)?;
        Pulse::new(BrainKind::Conscious, profile).with_stage(stage.min(1.0 - f64::EPSILON))
    };
    replace_conscious_factor(state, f.chosen, &pulse);
    if !pulse.is_fully_formed() {
        state.formation = Some(f);
    }
    Ok(())
}

impl SystemState {
    /// The formation in progress, if any.
    pub fn formation(&self) -> Option<&Formation> {
        self.formation.as_ref()
    }

    /// The conscious pulse carried by the surviving terms, if any.
    pub fn conscious_pulse(&self) -> Option<&Pulse> {
        self.terms.iter().filter(|t| !t.phantom).find_map(|t| match &t.brain.state {
            BrainState::Pulse(p) if p.kind() == BrainKind::Conscious => Some(p),
            _ => None,
        })
    }
}
