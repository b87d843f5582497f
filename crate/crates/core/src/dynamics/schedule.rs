use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::SystemState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    /// `a_src = cos θ · a₀`, `a_dst = sin θ · a₀`, θ linear in time.
    TrigRamp,
    /// Transferred square modulus linear in time (constant current).
    LinearRamp,
    Hold,
}

/// Amplitude flow from one source term into one or more destination terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub source: usize,
    /// Destination term and its share of the transferred amplitude; shares
    /// are normalized so that `Σ share² = 1`.
    pub targets: Vec<(usize, f64)>,
    /// Source coefficient when the ramp starts.
    pub amplitude: Complex64,
}

/// Time course of the apparatus coefficients: the stand-in for the
/// Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSchedule {
    kind: RampKind,
    t_start: f64,
    t_end: f64,
    fraction: f64,
    transfers: Vec<Transfer>,
}

impl EnvelopeSchedule {
    pub fn hold() -> Self {
        Self {
            kind: RampKind::Hold,
            t_start: 0.0,
            t_end: 0.0,
            fraction: 0.0,
            transfers: Vec::new(),
        }
    }

    /// One-to-one ramps `source → target`, capturing each source's current
    /// coefficient as its starting amplitude. `fraction` is the share of the
    /// source square modulus moved by `t_end`.
    pub fn ramp(
        kind: RampKind,
        state: &SystemState,
        t_start: f64,
        t_end: f64,
        fraction: f64,
        routes: &[(usize, usize)],
    ) -> Result<Self> {
        let fan_out: Vec<(usize, Vec<(usize, f64)>)> =
            routes.iter().map(|&(s, d)| (s, vec![(d, 1.0)])).collect();
        Self::fan_out(kind, state, t_start, t_end, fraction, &fan_out)
    }

    pub fn fan_out(
        kind: RampKind,
        state: &SystemState,
        t_start: f64,
        t_end: f64,
        fraction: f64,
        routes: &[(usize, Vec<(usize, f64)>)],
    ) -> Result<Self> {
        if kind == RampKind::Hold {
            return Ok(Self::hold());
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::InvalidSchedule(format!(
                "ramp window [{t_start}, {t_end}] is empty"
            )));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidSchedule(format!(
                "transfer fraction {fraction} outside [0, 1]"
            )));
        }
        let mut seen = Vec::new();
        let mut transfers = Vec::with_capacity(routes.len());
        for (source, targets) in routes {
            let src = state.term(*source)?;
            if src.phantom {
                return Err(Error::PhantomTransfer { term: *source });
            }
            if targets.is_empty() {
                return Err(Error::InvalidSchedule(format!(
                    "source {source} has no destination"
                )));
            }
            let share_norm: f64 = targets.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if !(share_norm > 0.0) {
                return Err(Error::InvalidSchedule(format!(
                    "source {source} has zero fan-out shares"
                )));
            }
            for &(dst, _) in targets {
                if state.term(dst)?.phantom {
                    return Err(Error::PhantomTransfer { term: dst });
                }
            }
            for idx in std::iter::once(*source).chain(targets.iter().map(|(d, _)| *d)) {
                if seen.contains(&idx) {
                    return Err(Error::InvalidSchedule(format!(
                        "term {idx} appears in more than one route"
                    )));
                }
                seen.push(idx);
            }
            transfers.push(Transfer {
                source: *source,
                targets: targets
                    .iter()
                    .map(|&(d, w)| (d, w / share_norm))
                    .collect(),
                amplitude: src.coefficient,
            });
        }
        Ok(Self {
            kind,
            t_start,
            t_end,
            fraction,
            transfers,
        })
    }

    pub fn kind(&self) -> RampKind {
        self.kind
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    pub fn is_hold(&self) -> bool {
        self.kind == RampKind::Hold || self.transfers.is_empty()
    }

    /// Largest step the ramp resolves: a hundredth of its window.
    pub fn max_dt(&self) -> Option<f64> {
        (!self.is_hold()).then(|| (self.t_end - self.t_start) / 100.0)
    }

    fn progress(&self, t: f64) -> f64 {
        ((t - self.t_start) / (self.t_end - self.t_start)).clamp(0.0, 1.0)
    }

    /// Real amplitude factors `(source, destination)` relative to the
    /// starting amplitude; their squares always sum to one.
    pub fn envelope(&self, t: f64) -> (f64, f64) {
        match self.kind {
            RampKind::Hold => (1.0, 0.0),
            RampKind::TrigRamp => {
                let x = self.progress(t);
                if x >= 1.0 && self.fraction >= 1.0 {
                    return (0.0, 1.0);
                }
                let theta = self.fraction.sqrt().asin() * x;
                (theta.cos(), theta.sin())
            }
            RampKind::LinearRamp => {
                let moved = self.fraction * self.progress(t);
                ((1.0 - moved).sqrt(), moved.sqrt())
            }
        }
    }

    /// Snaps a time that landed within rounding of a ramp boundary onto it.
    pub(crate) fn snap(&self, t: f64, dt: f64) -> f64 {
        if self.is_hold() {
            return t;
        }
        let eps = 1e-9 * dt;
        for edge in [self.t_start, self.t_end] {
            if (t - edge).abs() < eps {
                return edge;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_gaussian_pulse, BrainFactor, BrainGrid, BrainKind, ObserverId, Term};
    use approx::assert_abs_diff_eq;

    fn two_term_state() -> SystemState {
        let g = BrainGrid::unit(256).unwrap();
        let b1 = make_gaussian_pulse(g, 0.3, 0.05, BrainKind::Conscious).unwrap();
        let b2 = make_gaussian_pulse(g, 0.6, 0.05, BrainKind::Ready).unwrap();
        let terms = vec![
            Term::new(0, Complex64::new(1.0, 0.0), BrainFactor::pulse(b1, ObserverId(0))),
            Term::new(1, Complex64::new(0.0, 0.0), BrainFactor::pulse(b2, ObserverId(0))),
        ];
        SystemState::new(g, terms, 0.0).unwrap()
    }

    #[test]
    fn envelopes_conserve_norm() {
        let st = two_term_state();
        for kind in [RampKind::TrigRamp, RampKind::LinearRamp] {
            let sch = EnvelopeSchedule::ramp(kind, &st, 0.0, 1.0, 0.8, &[(0, 1)]).unwrap();
            for i in 0..=20 {
                let (a, b) = sch.envelope(i as f64 / 20.0);
                assert_abs_diff_eq!(a * a + b * b, 1.0, epsilon = 1e-15);
            }
            let (_, b) = sch.envelope(1.0);
            assert_abs_diff_eq!(b * b, 0.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_trig_ramp_ends_exactly_empty() {
        let st = two_term_state();
        let sch = EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, 1.0, &[(0, 1)]).unwrap();
        assert_eq!(sch.envelope(1.0), (0.0, 1.0));
        assert_eq!(sch.envelope(2.0), (0.0, 1.0));
        assert_eq!(sch.envelope(-1.0), (1.0, 0.0));
    }

    #[test]
    fn rejects_phantom_targets() {
        let mut st = two_term_state();
        st.terms[1].phantom = true;
        let err = EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, 1.0, &[(0, 1)]);
        assert_eq!(err.unwrap_err(), Error::PhantomTransfer { term: 1 });
    }

    #[test]
    fn rejects_bad_windows_and_fractions() {
        let st = two_term_state();
        assert!(EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 1.0, 1.0, 1.0, &[(0, 1)]).is_err());
        assert!(EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, 1.5, &[(0, 1)]).is_err());
        assert!(EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, 1.0, &[(0, 0)]).is_err());
        assert!(EnvelopeSchedule::ramp(RampKind::TrigRamp, &st, 0.0, 1.0, 1.0, &[(0, 7)]).is_err());
    }

    #[test]
    fn fan_out_shares_are_normalized() {
        let st = two_term_state();
        let sch = EnvelopeSchedule::fan_out(
            RampKind::TrigRamp,
            &st,
            0.0,
            1.0,
            1.0,
            &[(1, vec![(0, 3.0)])],
        )
        .unwrap();
        assert_eq!(sch.transfers()[0].targets, vec![(0, 1.0)]);
    }
}
