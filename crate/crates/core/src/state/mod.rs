//! Discretized state space: grid, pulses, brain factors, product terms and
//! the full system state with its Rule (1) bookkeeping.

mod grid;
mod pulse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use grid::BrainGrid;
pub use pulse::{
    make_gaussian_pulse, profile_overlap, pulse_overlap, BrainKind, Profile, Pulse, GAUSSIAN_CUTOFF,
};

use crate::dynamics::{DriftTrack, Formation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ObserverId(pub u32);

/// Index into the orthonormal apparatus basis `A₁, A₂, …` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ApparatusLabel(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum BrainState {
    Pulse(Pulse),
    /// One unit-norm grid state.
    Single { kind: BrainKind, site: usize },
    /// Observer disengaged from the apparatus (`{X}`); neither conscious of
    /// it nor ready.
    Disengaged(Profile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainFactor {
    pub state: BrainState,
    pub observer: ObserverId,
}

impl BrainFactor {
    pub fn pulse(pulse: Pulse, observer: ObserverId) -> Self {
        Self {
            state: BrainState::Pulse(pulse),
            observer,
        }
    }

    pub fn single(kind: BrainKind, site: usize, observer: ObserverId) -> Self {
        Self {
            state: BrainState::Single { kind, site },
            observer,
        }
    }

    pub fn disengaged(profile: Profile, observer: ObserverId) -> Self {
        Self {
            state: BrainState::Disengaged(profile),
            observer,
        }
    }

    /// Conscious or ready; `None` for a disengaged factor.
    pub fn kind(&self) -> Option<BrainKind> {
        match &self.state {
            BrainState::Pulse(p) => Some(p.kind()),
            BrainState::Single { kind, .. } => Some(*kind),
            BrainState::Disengaged(_) => None,
        }
    }

    pub fn is_ready(&self) -> bool {
        self.kind() == Some(BrainKind::Ready)
    }

    pub fn is_conscious(&self) -> bool {
        self.kind() == Some(BrainKind::Conscious)
    }

    pub fn norm(&self) -> f64 {
        match &self.state {
            BrainState::Pulse(p) => p.norm(),
            BrainState::Single { .. } => 1.0,
            BrainState::Disengaged(x) => x.norm(),
        }
    }

    /// Overlap of this factor with the unit-norm grid state at `site`.
    pub fn site_amplitude(&self, site: usize) -> Complex64 {
        match &self.state {
            BrainState::Pulse(p) => p.profile().site_amplitude(site),
            BrainState::Single { site: s, .. } if *s == site => Complex64::new(1.0, 0.0),
            BrainState::Single { .. } => Complex64::new(0.0, 0.0),
            BrainState::Disengaged(x) => x.site_amplitude(site),
        }
    }

    pub fn grid(&self) -> Option<&BrainGrid> {
        match &self.state {
            BrainState::Pulse(p) => Some(p.grid()),
            BrainState::Single { .. } => None,
            BrainState::Disengaged(x) => Some(x.grid()),
        }
    }

    pub(crate) fn set_kind(&mut self, kind: BrainKind) {
        match &mut self.state {
            BrainState::Pulse(p) => *p = p.clone().with_kind(kind),
            BrainState::Single { kind: k, .. } => *k = kind,
            BrainState::Disengaged(_) => {}
        }
    }

    pub fn label(&self) -> &'static str {
        match &self.state {
            BrainState::Pulse(_) => "pulse",
            BrainState::Single { .. } => "single",
            BrainState::Disengaged(_) => "disengaged",
        }
    }
}

/// One product component: apparatus state × coefficient × brain factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub apparatus: ApparatusLabel,
    pub coefficient: Complex64,
    pub brain: BrainFactor,
    pub phantom: bool,
}

impl Term {
    pub fn new(apparatus: usize, coefficient: Complex64, brain: BrainFactor) -> Self {
        Self {
            apparatus: ApparatusLabel(apparatus),
            coefficient,
            brain,
            phantom: false,
        }
    }

    pub fn square_modulus(&self) -> f64 {
        self.coefficient.norm_sqr() * self.brain.norm()
    }

    /// Live ready components are the only legal stochastic hit targets.
    pub fn is_hit_target(&self) -> bool {
        !self.phantom && self.brain.is_ready()
    }
}

/// `Σ |coefficient|² × brain-factor norm` over all terms, phantoms included.
pub fn total_square_modulus(terms: &[Term]) -> f64 {
    terms.iter().map(Term::square_modulus).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub terms: Vec<Term>,
    s: f64,
    pub time: f64,
    grid: BrainGrid,
    pub(crate) formation: Option<Formation>,
    pub(crate) drift: Option<DriftTrack>,
}

impl SystemState {
    /// Builds a state whose reference square modulus `s` is the total square
    /// modulus of `terms` at `time`. `s` is never rescaled afterwards.
    pub fn new(grid: BrainGrid, terms: Vec<Term>, time: f64) -> Result<Self> {
        let s = total_square_modulus(&terms);
        Self::with_reference(grid, terms, time, s)
    }

    pub fn with_reference(grid: BrainGrid, terms: Vec<Term>, time: f64, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NonpositiveS(s));
        }
        for term in &terms {
            if let Some(g) = term.brain.grid() {
                if *g != grid {
                    return Err(Error::GridMismatch);
                }
            }
            if let BrainState::Single { site, .. } = term.brain.state {
                grid.check_index(site)?;
            }
        }
        Ok(Self {
            terms,
            s,
            time,
            grid,
            formation: None,
            drift: None,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn grid(&self) -> &BrainGrid {
        &self.grid
    }

    pub fn total_square_modulus(&self) -> f64 {
        total_square_modulus(&self.terms)
    }

    pub fn term(&self, index: usize) -> Result<&Term> {
        self.terms.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.terms.len(),
        })
    }

    /// Terms with a nonzero coefficient.
    pub fn surviving(&self) -> impl Iterator<Item = (usize, &Term)> {
        self.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.coefficient.norm_sqr() > 0.0)
    }

    pub fn is_forming(&self) -> bool {
        self.formation.is_some()
    }

    pub fn phantom_sites(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter(|t| t.phantom)
            .filter_map(|t| match t.brain.state {
                BrainState::Single { site, .. } => Some(site),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn empty_terms_have_zero_modulus() {
        assert_eq!(total_square_modulus(&[]), 0.0);
        let g = BrainGrid::unit(16).unwrap();
        assert_eq!(
            SystemState::new(g, vec![], 0.0).unwrap_err(),
            Error::NonpositiveS(0.0)
        );
    }

    #[test]
    fn symmetric_disengaged_superposition_has_unit_modulus() {
        let g = BrainGrid::unit(256).unwrap();
        let x = make_gaussian_pulse(g, 0.5, 0.05, BrainKind::Conscious).unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let factor = BrainFactor::disengaged(x.profile().clone(), ObserverId(0));
        let terms = vec![Term::new(0, c(a), factor.clone()), Term::new(1, c(a), factor)];
        let state = SystemState::new(g, terms, 0.0).unwrap();
        assert_abs_diff_eq!(state.total_square_modulus(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.s(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn post_reduction_bracket_modulus() {
        let g = BrainGrid::unit(256).unwrap();
        let p = make_gaussian_pulse(g, 0.5, 0.05, BrainKind::Conscious).unwrap();
        let f = BrainFactor::pulse(p, ObserverId(0));
        let terms = vec![Term::new(0, c(0.3), f.clone()), Term::new(1, c(0.4), f)];
        assert_abs_diff_eq!(total_square_modulus(&terms), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn grid_states_are_orthonormal() {
        let a = BrainFactor::single(BrainKind::Ready, 3, ObserverId(0));
        assert_eq!(a.site_amplitude(3), c(1.0));
        assert_eq!(a.site_amplitude(4), c(0.0));
        assert_eq!(a.norm(), 1.0);
    }

    #[test]
    fn factor_grid_must_match_state_grid() {
        let g = BrainGrid::unit(256).unwrap();
        let other = BrainGrid::unit(128).unwrap();
        let p = make_gaussian_pulse(other, 0.5, 0.05, BrainKind::Ready).unwrap();
        let terms = vec![Term::new(0, c(1.0), BrainFactor::pulse(p, ObserverId(0)))];
        assert_eq!(
            SystemState::new(g, terms, 0.0).unwrap_err(),
            Error::GridMismatch
        );
    }
}
