use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{BrainFactor, BrainKind, BrainState, Profile, Pulse, SystemState, Term};

/// Incoming site current below which a ready site counts as unfed.
pub const PHANTOM_THRESHOLD: f64 = 1e-12;

/// Undistorted profile of a drifting pulse and how far it has moved.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTrack {
    term: usize,
    base: Profile,
    displacement: f64,
}

impl DriftTrack {
    pub fn displacement(&self) -> f64 {
        self.displacement
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    /// `du/dt` of the conscious pulse centre.
    pub velocity: f64,
    /// When set, a ready shadow pulse is fed from the conscious pulse at this
    /// rate (fraction of the conscious square modulus per unit time).
    pub shadow_feed: Option<f64>,
}

/// Shifts `base` by `displacement` using linear interpolation between sites.
/// Sites that would read from outside the grid get zero weight.
fn resample(base: &Profile, displacement: f64) -> Result<Profile> {
    let grid = *base.grid();
    let n = grid.n_points();
    let shift = displacement / grid.spacing();
    let src = base.weights();
    let weights = (0..n)
        .map(|k| {
            let x = k as f64 - shift;
            if x < 0.0 || x > (n - 1) as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let i = x.floor() as usize;
            let frac = x - i as f64;
            if i + 1 < n {
                src[i] * (1.0 - frac) + src[i + 1] * frac
            } else {
                src[i]
            }
        })
        .collect();
    Profile::new(grid, weights)
}

fn conscious_term(state: &SystemState) -> Result<usize> {
    if state.is_forming() {
        return Err(Error::NotFullyFormed("pulse formation still in progress".into()));
    }
    state
        .terms
        .iter()
        .position(|t| {
            !t.phantom
                && matches!(&t.brain.state, BrainState::Pulse(p)
                    if p.kind() == BrainKind::Conscious && p.is_fully_formed())
        })
        .ok_or_else(|| Error::NotFullyFormed("no fully formed conscious pulse".into()))
}

/// Moves the conscious pulse by `velocity * dt`, renormalizing its weights.
///
/// With a shadow feed, the ready shadow pulse gains amplitude only from the
/// conscious pulse, site by site; it never moves amplitude between its own
/// sites. Ready sites whose feed has stopped are split off as phantom terms
/// and never touched again.
pub fn drift_pulse(state: &SystemState, params: &DriftParams, dt: f64) -> Result<SystemState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidSchedule(format!("dt {dt} must be > 0")));
    }
    let ci = conscious_term(state)?;
    let mut next = state.clone();
    next.time = state.time + dt;

    let BrainState::Pulse(current) = &state.terms[ci].brain.state else {
        unreachable!("conscious_term returns a pulse-bearing term")
    };
    let observer = state.terms[ci].brain.observer;
    let mut track = match &state.drift {
        Some(t) if t.term == ci => t.clone(),
        _ => DriftTrack {
            term: ci,
            base: current.profile().clone(),
            displacement: 0.0,
        },
    };
    if params.velocity != 0.0 {
        track.displacement += params.velocity * dt;
        let moved = Pulse::new(BrainKind::Conscious, resample(&track.base, track.displacement)?);
        next.terms[ci].brain = BrainFactor::pulse(moved, observer);
    }
    next.drift = Some(track);

    let Some(rate) = params.shadow_feed else {
        return Ok(next);
    };
    if !(rate >= 0.0 && rate * dt < 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "shadow feed rate {rate} must satisfy 0 <= rate * dt < 1"
        )));
    }
    let si = next
        .terms
        .iter()
        .position(|t| t.is_hit_target() && t.brain.observer == observer)
        .filter(|&i| matches!(next.terms[i].brain.state, BrainState::Pulse(_)))
        .ok_or_else(|| Error::InvalidSchedule("no ready shadow pulse to feed".into()))?;

    let grid = *state.grid();
    let conscious_sq = next.terms[ci].coefficient.norm_sqr();
    let conscious_mass = match &next.terms[ci].brain.state {
        BrainState::Pulse(p) => p.profile().shared_mass(),
        _ => unreachable!(),
    };
    let shadow = &next.terms[si];
    let shadow_sq = shadow.coefficient.norm_sqr();
    let phase = if shadow_sq > 0.0 {
        shadow.coefficient / shadow_sq.sqrt()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut site_sq: Vec<f64> = match &shadow.brain.state {
        BrainState::Pulse(p) => p.mass().iter().map(|m| m * shadow_sq).collect(),
        _ => unreachable!(),
    };

    let mut moved = 0.0;
    let mut phantoms = Vec::new();
    for (u, r) in site_sq.iter_mut().enumerate() {
        let mut incoming = rate * conscious_sq * conscious_mass[u];
        if incoming < PHANTOM_THRESHOLD {
            incoming = 0.0;
        }
        if incoming == 0.0 {
            if *r > 0.0 {
                phantoms.push(Term {
                    phantom: true,
                    ..Term::new(
                        shadow.apparatus.0,
                        phase * r.sqrt(),
                        BrainFactor::single(BrainKind::Ready, u, shadow.brain.observer),
                    )
                });
                *r = 0.0;
            }
            continue;
        }
        let gain = incoming * dt;
        *r += gain;
        moved += gain;
    }

    let remaining: f64 = site_sq.iter().sum();
    if remaining > 0.0 {
        let du = grid.spacing();
        let weights = site_sq
            .iter()
            .map(|r| Complex64::new((r / (remaining * du)).sqrt(), 0.0))
            .collect();
        let pulse = Pulse::new(BrainKind::Ready, Profile::new(grid, weights)?);
        next.terms[si].brain = BrainFactor::pulse(pulse, next.terms[si].brain.observer);
        next.terms[si].coefficient = phase * remaining.sqrt();
    } else {
        next.terms[si].coefficient = Complex64::new(0.0, 0.0);
    }
    if conscious_sq > 0.0 {
        let kept = (conscious_sq - moved).max(0.0);
        next.terms[ci].coefficient *= (kept / conscious_sq).sqrt();
    }
    next.terms.extend(phantoms);
    Ok(next)
}
