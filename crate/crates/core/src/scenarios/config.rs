use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{FormationMode, FormationPolicy, RampKind};
use crate::error::{Error, Result};
use crate::reduction::RateBasis;
use crate::state::BrainGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Interaction,
    UnresolvableObservation,
    TurnOff,
    Disengage,
    PulseDrift,
    FadeIn,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Interaction => "interaction",
            Self::UnresolvableObservation => "unresolvable_observation",
            Self::TurnOff => "turn_off",
            Self::Disengage => "disengage",
            Self::PulseDrift => "pulse_drift",
            Self::FadeIn => "fade_in",
        }
    }

    /// Scenarios whose trajectories contain stochastic hits.
    pub fn has_hits(&self) -> bool {
        matches!(
            self,
            Self::Interaction | Self::UnresolvableObservation | Self::TurnOff | Self::Disengage
        )
    }

    /// Scenarios built on the two-label observation of `(a₁A₁ + a₂A₂){X}`.
    pub fn is_observation(&self) -> bool {
        matches!(self, Self::UnresolvableObservation | Self::TurnOff | Self::Disengage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_points: usize,
    /// Defaults to `1 / n_points`, so the grid covers `[origin, origin + 1)`.
    pub spacing: Option<f64>,
    pub origin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 256,
            spacing: None,
            origin: 0.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<BrainGrid> {
        let spacing = self.spacing.unwrap_or(1.0 / self.n_points.max(1) as f64);
        BrainGrid::new(self.n_points, spacing, self.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RampConfig {
    pub kind: RampKind,
    pub t_start: f64,
    pub t_end: f64,
    /// Share of the source square modulus moved by `t_end`.
    pub fraction: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            kind: RampKind::TrigRamp,
            t_start: 0.0,
            t_end: 1.0,
            fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApparatusConfig {
    /// Initial real apparatus amplitudes. One for the interaction, two for
    /// the observation scenarios.
    pub amplitudes: Vec<f64>,
}

impl Default for ApparatusConfig {
    fn default() -> Self {
        Self {
            amplitudes: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrainConfig {
    pub sigma: f64,
    /// Centre of the initial conscious pulse, or of the disengaged profile.
    pub conscious_center: f64,
    pub ready_centers: Vec<f64>,
    /// Ready factors are single grid states at the ready centres instead of
    /// pulses.
    pub single_state: bool,
}

impl Default for BrainConfig {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            conscious_center: 0.3,
            ready_centers: vec![0.7],
            single_state: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormationConfig {
    pub mode: FormationMode,
    /// Defaults to `10 · dt`.
    pub tau: Option<f64>,
    pub neighbor_radius: usize,
    /// Defaults to the brain `sigma`.
    pub target_sigma: Option<f64>,
}

impl Default for FormationConfig {
    fn default() -> Self {
        Self {
            mode: FormationMode::Instantaneous,
            tau: None,
            neighbor_radius: 1,
            target_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurnOffConfig {
    /// `t_off − t_sc`.
    pub delay: f64,
    /// Apparatus label whose source is switched off.
    pub label: usize,
}

impl Default for TurnOffConfig {
    fn default() -> Self {
        Self {
            delay: 0.05,
            label: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisengageConfig {
    /// `t_dis − t_sc`.
    pub delay: f64,
    /// Hold steps recorded after the swap.
    pub hold_steps: usize,
}

impl Default for DisengageConfig {
    fn default() -> Self {
        Self {
            delay: 0.05,
            hold_steps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    pub velocity: f64,
    pub duration: f64,
    /// Shadow feed rate, as a fraction of the conscious square modulus per
    /// unit time.
    pub feed_rate: f64,
    pub shadow_ready: bool,
    /// Negative test: schedule a transfer from the shadow ready pulse into a
    /// leading-edge ready state of the same observer halfway through.
    pub intra_ready_transfer: bool,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            velocity: 0.2,
            duration: 1.0,
            feed_rate: 0.05,
            shadow_ready: true,
            intra_ready_transfer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadeInConfig {
    pub chosen_center: f64,
    /// Coefficient left on the chosen state by the reduction.
    pub coefficient: f64,
    /// Run length after `t_sc`; defaults to enough steps for the staged
    /// pulse to settle.
    pub duration: Option<f64>,
}

impl Default for FadeInConfig {
    fn default() -> Self {
        Self {
            chosen_center: 0.5,
            coefficient: 0.7,
            duration: None,
        }
    }
}

/// One scenario, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to a hundredth of the ramp window.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_guard")]
    pub guard: bool,
    #[serde(default)]
    pub rate_basis: RateBasis,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub ramp: RampConfig,
    #[serde(default)]
    pub apparatus: ApparatusConfig,
    #[serde(default)]
    pub brain: BrainConfig,
    #[serde(default)]
    pub formation: FormationConfig,
    #[serde(default)]
    pub turn_off: TurnOffConfig,
    #[serde(default)]
    pub disengage: DisengageConfig,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub fade_in: FadeInConfig,
}

fn default_guard() -> bool {
    true
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn dt(&self) -> f64 {
        self.dt
            .unwrap_or((self.ramp.t_end - self.ramp.t_start) / 100.0)
    }

    pub fn formation_policy(&self) -> FormationPolicy {
        let f = &self.formation;
        FormationPolicy {
            mode: f.mode,
            tau: f.tau.unwrap_or(10.0 * self.dt()),
            target_sigma: f.target_sigma.unwrap_or(self.brain.sigma),
            neighbor_radius: f.neighbor_radius,
        }
    }

    /// Scenario preconditions that can be checked without building states.
    pub fn validate(&self) -> Result<()> {
        let dt = self.dt();
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt {dt} must be > 0")));
        }
        let r = &self.ramp;
        if !(r.t_end > r.t_start) {
            return Err(Error::Config(format!(
                "ramp window [{}, {}] is empty",
                r.t_start, r.t_end
            )));
        }
        if !(0.0..=1.0).contains(&r.fraction) {
            return Err(Error::Config(format!("ramp fraction {} outside [0, 1]", r.fraction)));
        }
        self.formation_policy()
            .validate(self.grid.build()?.spacing())?;

        let (amps, readies) = (self.apparatus.amplitudes.len(), self.brain.ready_centers.len());
        match self.name {
            ScenarioName::Interaction => {
                expect_len("apparatus.amplitudes", amps, 1)?;
                expect_len("brain.ready_centers", readies, 1)?;
            }
            n if n.is_observation() => {
                expect_len("apparatus.amplitudes", amps, 2)?;
                expect_len("brain.ready_centers", readies, 2)?;
            }
            _ => {}
        }
        if self.name.has_hits() && self.apparatus.amplitudes.iter().all(|a| *a == 0.0) {
            return Err(Error::NonpositiveS(0.0));
        }
        if self.name == ScenarioName::TurnOff {
            if self.turn_off.label > 1 {
                return Err(Error::Config(format!("turn_off.label {} must be 0 or 1", self.turn_off.label)));
            }
            if !(self.turn_off.delay >= 0.0) {
                return Err(Error::Config("turn_off.delay must be >= 0".into()));
            }
        }
        if self.name == ScenarioName::Disengage && !(self.disengage.delay >= 0.0) {
            return Err(Error::Config("disengage.delay must be >= 0".into()));
        }
        if self.name == ScenarioName::PulseDrift {
            let d = &self.drift;
            if !(d.duration > 0.0) {
                return Err(Error::Config("drift.duration must be > 0".into()));
            }
            if d.intra_ready_transfer && !d.shadow_ready {
                return Err(Error::Config("drift.intra_ready_transfer needs drift.shadow_ready".into()));
            }
        }
        if self.name == ScenarioName::FadeIn && self.formation.mode != FormationMode::Staged {
            return Err(Error::Config("fade_in needs formation.mode = \"staged\"".into()));
        }
        Ok(())
    }
}

fn expect_len(key: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Config(format!("{key} needs {want} entries, got {got}")));
    }
    Ok(())
}
