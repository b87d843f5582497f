//! Envelope-driven evolution, probability currents, pulse formation and
//! pulse drift.

mod drift;
mod formation;
mod schedule;
mod step;

pub use drift::{drift_pulse, DriftParams, DriftTrack, PHANTOM_THRESHOLD};
pub use formation::{form_pulse, Formation, FormationMode, FormationPolicy};
pub use schedule::{EnvelopeSchedule, RampKind, Transfer};
pub use step::{step, step_unguarded, CurrentReport, SiteCurrents, SiteProfile};

use crate::error::{Error, Result};
use crate::state::Pulse;

/// Share of the pulse's unit intensity carried by sites `lo..=hi`:
/// `Σ |F(u)|² Δu`.
pub fn relative_intensity(pulse: &Pulse, lo: usize, hi: usize) -> Result<f64> {
    let n = pulse.grid().n_points();
    if hi >= n {
        return Err(Error::IndexOutOfRange { index: hi, len: n });
    }
    if lo > hi {
        return Err(Error::IndexOutOfRange { index: lo, len: hi + 1 });
    }
    Ok(pulse.mass()[lo..=hi].iter().sum())
}
