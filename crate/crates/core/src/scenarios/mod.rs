//! Configurable reconstructions of the interaction, observation, turn-off,
//! disengage, drift and fade-in experiments.

mod config;
pub mod monitor;
mod montecarlo;

use num_complex::Complex64;
use serde::Serialize;

pub use config::{
    ApparatusConfig, BrainConfig, DisengageConfig, DriftConfig, FadeInConfig, FormationConfig,
    GridConfig, RampConfig, ScenarioConfig, ScenarioName, TurnOffConfig,
};
pub use monitor::{Monitor, MonitorSummary};
pub use montecarlo::{run_trials, TrialOutcome};

use crate::dynamics::{
    drift_pulse, form_pulse, step, step_unguarded, CurrentReport, DriftParams, EnvelopeSchedule,
    FormationMode, RampKind,
};
use crate::error::{Error, Result};
use crate::reduction::{ReductionEngine, ReductionEvent, RngStream, SiteSelection};
use crate::state::{
    make_gaussian_pulse, BrainFactor, BrainGrid, BrainKind, BrainState, ObserverId, Pulse,
    SystemState, Term,
};

const OBSERVER: ObserverId = ObserverId(0);

/// Cap on post-reduction hold steps while a staged pulse settles.
const MAX_SETTLE_STEPS: usize = 1_000_000;

/// Test hooks that deliberately break the simulation. Used only as negative
/// controls for the statistical and invariant checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Hooks {
    /// Select hit sites with weight `current × mass²` instead of
    /// `current × mass`.
    pub bias_site_selection: bool,
    /// Nudge a phantom amplitude mid-run.
    pub tamper_phantom: bool,
}

/// One recorded state of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub terms: Vec<Term>,
    /// Per-term current of the step that produced this state; zero where no
    /// envelope step was taken.
    pub currents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitSummary {
    pub s: f64,
    /// `(1/s) Σ |a_ready(T)|²`: the hit probability over the whole ramp.
    pub closed_form_p_hit: f64,
    /// `(1/s) Σ_u Σ_i |a_i(T) F_i(u)|² Δu` evaluated on the grid.
    pub integrated_final_probability: f64,
    pub hit: bool,
    pub t_sc: Option<f64>,
    pub u_sc: Option<usize>,
    pub term_hit: Option<usize>,
    /// Apparatus labels left with nonzero coefficient.
    pub multiplicity: usize,
    /// Share of the post-reduction square modulus per apparatus label.
    pub label_weights: Vec<f64>,
    pub pre_norm: Option<f64>,
    pub post_norm: Option<f64>,
    /// Norm of the conscious factor once formation has finished.
    pub pulse_norm: Option<f64>,
    pub formation_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnOffSummary {
    #[serde(flatten)]
    pub observation: HitSummary,
    pub t_off: f64,
    pub switched_label: usize,
    pub spot_label: usize,
    /// Probability that the spot remains, given this trial's reduction.
    pub spot_weight: f64,
    pub spot_remains: bool,
    pub closed_form_p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisengageSummary {
    #[serde(flatten)]
    pub observation: HitSummary,
    pub t_dis: f64,
    pub coefficients_before: Vec<Complex64>,
    pub coefficients_after: Vec<Complex64>,
    pub coefficients_identical: bool,
    pub factor_norm_before: f64,
    pub factor_norm_after: f64,
    /// Every term bit-identical across the post-swap hold steps.
    pub hold_constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSummary {
    pub velocity: f64,
    pub steps: usize,
    pub start_center: usize,
    pub end_center: usize,
    /// `round(v · n · dt / Δu)`.
    pub expected_shift_sites: i64,
    pub center_shift_sites: i64,
    pub phantom_sites: usize,
    pub max_phantom_drift: f64,
    pub rule4_violations: usize,
    pub max_norm_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FadeInSummary {
    pub t_sc: f64,
    pub chosen: usize,
    pub target_sigma: f64,
    pub fitted_sigma: f64,
    pub relative_width_error: f64,
    /// `(t, occupied sites)` for every recorded state.
    pub occupied: Vec<(f64, usize)>,
    /// `(t, conscious pulse norm)` for every recorded state.
    pub norms: Vec<(f64, f64)>,
    pub occupied_monotone: bool,
    pub formation_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Summary {
    Interaction(HitSummary),
    UnresolvableObservation(HitSummary),
    TurnOff(TurnOffSummary),
    Disengage(DisengageSummary),
    PulseDrift(DriftSummary),
    FadeIn(FadeInSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub trajectory: Vec<Snapshot>,
    pub events: Vec<ReductionEvent>,
    pub summary: Summary,
    pub monitor: MonitorSummary,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
    grid: BrainGrid,
    hooks: Hooks,
}

/// Per-run mutable context: monitor, recorder and step counter.
struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    hooks: Hooks,
    dt: f64,
    engine: ReductionEngine,
    monitor: Option<Monitor>,
    record: bool,
    snapshots: Vec<Snapshot>,
    events: Vec<ReductionEvent>,
    steps: usize,
}

impl Ctx<'_> {
    fn observe(&mut self, state: &SystemState, report: Option<&CurrentReport>) -> Result<()> {
        if let Some(m) = &mut self.monitor {
            m.observe(state, report)?;
        }
        self.snapshot(state, report);
        Ok(())
    }

    fn snapshot(&mut self, state: &SystemState, report: Option<&CurrentReport>) {
        if !self.record {
            return;
        }
        let currents = match report {
            Some(r) => r.per_term.clone(),
            None => vec![0.0; state.terms.len()],
        };
        self.snapshots.push(Snapshot {
            step: self.steps,
            t: state.time,
            terms: state.terms.clone(),
            currents,
        });
    }

    fn evolve(&mut self, state: &SystemState, schedule: &EnvelopeSchedule) -> Result<(SystemState, CurrentReport)> {
        let (next, report) = if self.cfg.guard {
            step(state, schedule, self.dt)?
        } else {
            step_unguarded(state, schedule, self.dt)?
        };
        self.steps += 1;
        self.observe(&next, Some(&report))?;
        Ok((next, report))
    }

    fn hold(&mut self, state: SystemState, steps: usize) -> Result<SystemState> {
        let hold = EnvelopeSchedule::hold();
        let mut state = state;
        for _ in 0..steps {
            state = self.evolve(&state, &hold)?.0;
        }
        Ok(state)
    }
}

fn label_count(state: &SystemState) -> usize {
    state.terms.iter().map(|t| t.apparatus.0 + 1).max().unwrap_or(0)
}

fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt - 1e-9).ceil().max(0.0) as usize
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid.build()?;
        let scenario = Self {
            cfg,
            grid,
            hooks: Hooks::default(),
        };
        if scenario.cfg.name.has_hits() {
            scenario.initial_state()?;
            if scenario.cfg.name.is_observation() && scenario.cfg.name != ScenarioName::UnresolvableObservation && scenario.cfg.ramp.fraction < 1.0 {
                return Err(Error::Config(format!(
                    "{} needs a completed observation ramp (ramp.fraction = 1)",
                    scenario.cfg.name.as_str()
                )));
            }
        }
        Ok(scenario)
    }

    pub fn with_hooks(mut self, hooks: Hooks) -> Self {
        self.hooks = hooks;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &BrainGrid {
        &self.grid
    }

    pub fn engine(&self) -> ReductionEngine {
        ReductionEngine {
            basis: self.cfg.rate_basis,
            selection: if self.hooks.bias_site_selection {
                SiteSelection::Biased
            } else {
                SiteSelection::Current
            },
        }
    }

    fn ready_factor(&self, index: usize) -> Result<BrainFactor> {
        let b = &self.cfg.brain;
        let center = b.ready_centers[index];
        if b.single_state {
            let site = self.grid.nearest_index(center).ok_or(Error::CenterOutOfRange {
                center,
                lo: self.grid.origin(),
                hi: self.grid.end(),
            })?;
            Ok(BrainFactor::single(BrainKind::Ready, site, OBSERVER))
        } else {
            let p = make_gaussian_pulse(self.grid, center, b.sigma, BrainKind::Ready)?;
            Ok(BrainFactor::pulse(p, OBSERVER))
        }
    }

    /// `s` is the sum of the initial `|a_i|²`; brain factors are unit norm by
    /// construction, and leaving their rounding out keeps `s = 1` exact for
    /// normalized configs.
    fn state(&self, terms: Vec<Term>, time: f64) -> Result<SystemState> {
        let s = terms.iter().map(|t| t.coefficient.norm_sqr()).sum();
        SystemState::with_reference(self.grid, terms, time, s)
    }

    /// State at the start of the ramp, and the ramp routes.
    pub fn initial_state(&self) -> Result<SystemState> {
        Ok(self.initial()?.0)
    }

    fn initial(&self) -> Result<(SystemState, Vec<(usize, usize)>)> {
        let b = &self.cfg.brain;
        let amps = &self.cfg.apparatus.amplitudes;
        let c = |x: f64| Complex64::new(x, 0.0);
        let zero = c(0.0);
        let t0 = self.cfg.ramp.t_start;
        match self.cfg.name {
            ScenarioName::Interaction => {
                let conscious = make_gaussian_pulse(self.grid, b.conscious_center, b.sigma, BrainKind::Conscious)?;
                let terms = vec![
                    Term::new(0, c(amps[0]), BrainFactor::pulse(conscious, OBSERVER)),
                    Term::new(1, zero, self.ready_factor(0)?),
                ];
                Ok((self.state(terms, t0)?, vec![(0, 1)]))
            }
            n if n.is_observation() => {
                let x = make_gaussian_pulse(self.grid, b.conscious_center, b.sigma, BrainKind::Conscious)?
                    .profile()
                    .clone();
                let terms = vec![
                    Term::new(0, c(amps[0]), BrainFactor::disengaged(x.clone(), OBSERVER)),
                    Term::new(1, c(amps[1]), BrainFactor::disengaged(x, OBSERVER)),
                    Term::new(0, zero, self.ready_factor(0)?),
                    Term::new(1, zero, self.ready_factor(1)?),
                ];
                Ok((self.state(terms, t0)?, vec![(0, 2), (1, 3)]))
            }
            ScenarioName::PulseDrift => {
                let conscious = make_gaussian_pulse(self.grid, b.conscious_center, b.sigma, BrainKind::Conscious)?;
                let mut terms = vec![Term::new(0, c(1.0), BrainFactor::pulse(conscious.clone(), OBSERVER))];
                if self.cfg.drift.shadow_ready {
                    let shadow = make_gaussian_pulse(self.grid, b.conscious_center, b.sigma, BrainKind::Ready)?;
                    terms.push(Term::new(0, zero, BrainFactor::pulse(shadow, OBSERVER)));
                }
                Ok((self.state(terms, 0.0)?, vec![]))
            }
            ScenarioName::FadeIn => {
                let f = &self.cfg.fade_in;
                let chosen = self.grid.nearest_index(f.chosen_center).ok_or(Error::CenterOutOfRange {
                    center: f.chosen_center,
                    lo: self.grid.origin(),
                    hi: self.grid.end(),
                })?;
                let terms = vec![Term::new(0, c(f.coefficient), BrainFactor::single(BrainKind::Conscious, chosen, OBSERVER))];
                Ok((self.state(terms, 0.0)?, vec![]))
            }
            _ => unreachable!("all scenario names handled"),
        }
    }

    fn schedule(&self, state: &SystemState, routes: &[(usize, usize)]) -> Result<EnvelopeSchedule> {
        let r = &self.cfg.ramp;
        EnvelopeSchedule::ramp(r.kind, state, r.t_start, r.t_end, r.fraction, routes)
    }

    fn closed_form_p_hit_for(&self, state: &SystemState, schedule: &EnvelopeSchedule) -> f64 {
        let (_, dst) = schedule.envelope(self.cfg.ramp.t_end);
        let moved: f64 = schedule
            .transfers()
            .iter()
            .map(|t| t.amplitude.norm_sqr() * dst * dst)
            .sum();
        moved / state.s()
    }

    fn integrated_final_probability(&self, state: &SystemState, schedule: &EnvelopeSchedule) -> f64 {
        let (_, dst) = schedule.envelope(self.cfg.ramp.t_end);
        let mut total = 0.0;
        for tr in schedule.transfers() {
            for &(target, share) in &tr.targets {
                let a_sq = (tr.amplitude * share * dst).norm_sqr();
                let factor = &state.terms[target].brain;
                let mass: f64 = (0..self.grid.n_points())
                    .map(|u| factor.site_amplitude(u).norm_sqr())
                    .sum();
                total += a_sq * mass;
            }
        }
        total / state.s()
    }

    /// Closed-form probability of a hit over the configured ramp.
    pub fn closed_form_p_hit(&self) -> Result<f64> {
        let (initial, routes) = self.initial()?;
        let schedule = self.schedule(&initial, &routes)?;
        Ok(self.closed_form_p_hit_for(&initial, &schedule))
    }

    /// Expected share of square modulus per apparatus label among hits:
    /// `|a_i(T)|² / Σ_j |a_j(T)|²`.
    pub fn expected_label_shares(&self) -> Result<Vec<f64>> {
        let (initial, routes) = self.initial()?;
        let schedule = self.schedule(&initial, &routes)?;
        let mut shares = vec![0.0; label_count(&initial)];
        for tr in schedule.transfers() {
            for &(target, share) in &tr.targets {
                shares[initial.terms[target].apparatus.0] += (tr.amplitude * share).norm_sqr();
            }
        }
        let total: f64 = shares.iter().sum();
        if total > 0.0 {
            shares.iter_mut().for_each(|w| *w /= total);
        }
        Ok(shares)
    }

    /// Distribution of the hit site `u_sc`: the ready profiles `|F_i(u)|² Δu`
    /// weighted by the square modulus each one receives.
    pub fn expected_hit_profile(&self) -> Result<Vec<f64>> {
        let (initial, routes) = self.initial()?;
        let schedule = self.schedule(&initial, &routes)?;
        let mut mass = vec![0.0; self.grid.n_points()];
        for tr in schedule.transfers() {
            for &(target, share) in &tr.targets {
                let w = (tr.amplitude * share).norm_sqr();
                let factor = &initial.terms[target].brain;
                for (u, m) in mass.iter_mut().enumerate() {
                    *m += w * factor.site_amplitude(u).norm_sqr();
                }
            }
        }
        let total: f64 = mass.iter().sum();
        if total > 0.0 {
            mass.iter_mut().for_each(|m| *m /= total);
        }
        Ok(mass)
    }

    fn ctx(&self, record: bool) -> Ctx<'_> {
        Ctx {
            cfg: &self.cfg,
            hooks: self.hooks,
            dt: self.cfg.dt(),
            engine: self.engine(),
            monitor: record.then(Monitor::new),
            record,
            snapshots: Vec::new(),
            events: Vec::new(),
            steps: 0,
        }
    }

    /// Runs trial 0 of the configured seed with full recording and the
    /// invariant monitor on.
    pub fn run(&self) -> Result<ScenarioRun> {
        self.run_recorded(0)
    }

    pub fn run_recorded(&self, trial: u64) -> Result<ScenarioRun> {
        let mut ctx = self.ctx(true);
        let mut rng = RngStream::for_trial(self.cfg.seed, trial);
        let summary = match self.cfg.name {
            ScenarioName::PulseDrift => Summary::PulseDrift(self.drift(&mut ctx)?),
            ScenarioName::FadeIn => Summary::FadeIn(self.fade_in(&mut ctx)?),
            _ => self.hit_scenario(&mut ctx, &mut rng, true)?.0,
        };
        let monitor = ctx.monitor.as_ref().map(Monitor::summary).expect("recording runs monitor");
        Ok(ScenarioRun {
            trajectory: ctx.snapshots,
            events: ctx.events,
            summary,
            monitor,
        })
    }

    /// One Monte Carlo trial: no recording, no monitor, and the run stops as
    /// soon as the outcome is decided. Pulse formation and later holds do not
    /// touch coefficients, so they cannot change any trial statistic.
    pub fn run_trial(&self, trial: u64) -> Result<TrialOutcome> {
        if !self.cfg.name.has_hits() {
            return Err(Error::Config(format!(
                "{} has no stochastic observables",
                self.cfg.name.as_str()
            )));
        }
        let mut ctx = self.ctx(false);
        let mut rng = RngStream::for_trial(self.cfg.seed, trial);
        let (summary, event) = self.hit_scenario(&mut ctx, &mut rng, false)?;
        let (hit, spot_remains) = match &summary {
            Summary::Interaction(h) | Summary::UnresolvableObservation(h) => (h.clone(), None),
            Summary::TurnOff(t) => (t.observation.clone(), Some(t.spot_remains)),
            Summary::Disengage(d) => (d.observation.clone(), None),
            _ => unreachable!("hit scenarios only"),
        };
        Ok(TrialOutcome {
            trial,
            hit: hit.hit,
            event,
            label_weights: hit.label_weights,
            spot_remains,
        })
    }

    fn hit_scenario(
        &self,
        ctx: &mut Ctx<'_>,
        rng: &mut RngStream,
        full: bool,
    ) -> Result<(Summary, Option<ReductionEvent>)> {
        let (initial, routes) = self.initial()?;
        let schedule = self.schedule(&initial, &routes)?;
        let dt = ctx.dt;
        ctx.observe(&initial, None)?;

        let ramp_steps = steps_for(self.cfg.ramp.t_end - self.cfg.ramp.t_start, dt);
        let mut state = initial.clone();
        let mut reduced = None;
        for _ in 0..ramp_steps {
            let (next, report) = ctx.evolve(&state, &schedule)?;
            if let Some(hit) = ctx.engine.sample_hit(&next, &report, rng)? {
                let (post, event) = ctx.engine.apply(&next, &hit)?;
                if let Some(m) = &mut ctx.monitor {
                    m.observe_reduction(&next, &post, &event)?;
                }
                ctx.snapshot(&post, None);
                reduced = Some((post, event));
                break;
            }
            state = next;
        }

        let mut summary = HitSummary {
            s: initial.s(),
            closed_form_p_hit: self.closed_form_p_hit_for(&initial, &schedule),
            integrated_final_probability: self.integrated_final_probability(&initial, &schedule),
            hit: reduced.is_some(),
            t_sc: None,
            u_sc: None,
            term_hit: None,
            multiplicity: 0,
            label_weights: Vec::new(),
            pre_norm: None,
            post_norm: None,
            pulse_norm: None,
            formation_steps: 0,
        };

        let Some((post, event)) = reduced else {
            if self.cfg.name.is_observation() && self.cfg.name != ScenarioName::UnresolvableObservation {
                return Err(Error::NotPostReduction(
                    "observation ramp finished without a stochastic hit".into(),
                ));
            }
            let summary = match self.cfg.name {
                ScenarioName::Interaction => Summary::Interaction(summary),
                _ => Summary::UnresolvableObservation(summary),
            };
            return Ok((summary, None));
        };

        let mut weights = vec![0.0; label_count(&initial)];
        for c in &event.post_coefficients {
            weights[c.apparatus] += c.coefficient.norm_sqr();
        }
        let kept: f64 = weights.iter().sum();
        if kept > 0.0 {
            weights.iter_mut().for_each(|w| *w /= kept);
        }
        summary.t_sc = Some(event.t_sc);
        summary.u_sc = Some(event.u_sc);
        summary.term_hit = Some(event.term_hit);
        summary.multiplicity = event.multiplicity();
        summary.label_weights = weights.clone();
        summary.pre_norm = Some(event.pre_norm);
        summary.post_norm = Some(event.post_norm);
        ctx.events.push(event.clone());

        let mut state = post;
        if full {
            let policy = self.cfg.formation_policy();
            state = form_pulse(&state, event.u_sc, &policy)?;
            if let Some(m) = &mut ctx.monitor {
                m.rebase(&state);
            }
            ctx.observe(&state, None)?;
            let hold = EnvelopeSchedule::hold();
            while state.is_forming() {
                if summary.formation_steps >= MAX_SETTLE_STEPS {
                    return Err(Error::NotFullyFormed(format!(
                        "staged pulse still forming after {MAX_SETTLE_STEPS} steps"
                    )));
                }
                state = ctx.evolve(&state, &hold)?.0;
                summary.formation_steps += 1;
            }
            summary.pulse_norm = state.conscious_pulse().map(Pulse::norm);
        }

        let out = match self.cfg.name {
            ScenarioName::Interaction => Summary::Interaction(summary),
            ScenarioName::UnresolvableObservation => Summary::UnresolvableObservation(summary),
            ScenarioName::TurnOff => {
                let cfg = &self.cfg.turn_off;
                let t_off = event.t_sc + cfg.delay;
                if full {
                    let remaining = steps_for(t_off - state.time, dt);
                    state = ctx.hold(state, remaining)?;
                    for term in state.terms.iter_mut().filter(|t| t.apparatus.0 == cfg.label) {
                        term.coefficient = Complex64::new(0.0, 0.0);
                    }
                    if let Some(m) = &mut ctx.monitor {
                        m.rebase(&state);
                    }
                    ctx.observe(&state, None)?;
                }
                let spot_label = 1 - cfg.label;
                let spot_weight = weights[spot_label];
                let spot_remains = rng.uniform() < spot_weight;
                let amps = &self.cfg.apparatus.amplitudes;
                Summary::TurnOff(TurnOffSummary {
                    closed_form_p2: crate::analysis::closed_form_p2_after_off(
                        amps[spot_label] * amps[spot_label],
                        initial.s(),
                    )?,
                    observation: summary,
                    t_off,
                    switched_label: cfg.label,
                    spot_label,
                    spot_weight,
                    spot_remains,
                })
            }
            ScenarioName::Disengage => {
                let cfg = &self.cfg.disengage;
                let t_dis = event.t_sc + cfg.delay;
                let (mut before, mut after, mut norm_before, mut norm_after) = (vec![], vec![], 1.0, 1.0);
                let mut hold_constant = true;
                if full {
                    let remaining = steps_for(t_dis - state.time, dt);
                    state = ctx.hold(state, remaining)?;
                    let x = match &initial.terms[0].brain.state {
                        BrainState::Disengaged(x) => x.clone(),
                        _ => unreachable!("observation starts disengaged"),
                    };
                    before = state.terms.iter().map(|t| t.coefficient).collect();
                    norm_before = state.conscious_pulse().map_or(f64::NAN, Pulse::norm);
                    for term in state.terms.iter_mut().filter(|t| t.coefficient.norm_sqr() > 0.0) {
                        term.brain = BrainFactor::disengaged(x.clone(), term.brain.observer);
                    }
                    after = state.terms.iter().map(|t| t.coefficient).collect();
                    norm_after = x.norm();
                    ctx.observe(&state, None)?;
                    let frozen = state.terms.clone();
                    state = ctx.hold(state, cfg.hold_steps)?;
                    hold_constant = state.terms == frozen;
                }
                Summary::Disengage(DisengageSummary {
                    observation: summary,
                    t_dis,
                    coefficients_identical: before.len() == after.len()
                        && before.iter().zip(&after).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()),
                    coefficients_before: before,
                    coefficients_after: after,
                    factor_norm_before: norm_before,
                    factor_norm_after: norm_after,
                    hold_constant,
                })
            }
            _ => unreachable!("hit scenarios only"),
        };
        Ok((out, Some(event)))
    }

    fn drift(&self, ctx: &mut Ctx<'_>) -> Result<DriftSummary> {
        let d = &self.cfg.drift;
        let dt = ctx.dt;
        let (initial, _) = self.initial()?;
        ctx.observe(&initial, None)?;
        let start_center = initial.conscious_pulse().expect("drift starts with a pulse").center_index();
        let params = DriftParams {
            velocity: d.velocity,
            shadow_feed: d.shadow_ready.then_some(d.feed_rate),
        };
        let steps = steps_for(d.duration, dt);
        let mut state = initial;
        let mut phantom_seen = false;
        let mut tampered = false;
        for k in 0..steps {
            state = drift_pulse(&state, &params, dt)?;
            ctx.steps += 1;
            if ctx.hooks.tamper_phantom && phantom_seen && !tampered {
                if let Some(t) = state.terms.iter_mut().find(|t| t.phantom) {
                    t.coefficient += 1e-9;
                    tampered = true;
                }
            }
            ctx.observe(&state, None)?;
            phantom_seen |= state.terms.iter().any(|t| t.phantom);
            if d.intra_ready_transfer && k == steps / 2 {
                state = self.intra_ready_transfer(ctx, state)?;
            }
        }
        let end_center = state.conscious_pulse().expect("drift keeps the pulse").center_index();
        let monitor = ctx.monitor.as_ref();
        Ok(DriftSummary {
            velocity: d.velocity,
            steps,
            start_center,
            end_center,
            expected_shift_sites: (d.velocity * steps as f64 * dt / self.grid.spacing()).round() as i64,
            center_shift_sites: end_center as i64 - start_center as i64,
            phantom_sites: state.phantom_sites().len(),
            max_phantom_drift: monitor.map_or(0.0, |m| m.max_phantom_drift),
            rule4_violations: 0,
            max_norm_error: monitor.map_or(0.0, |m| m.max_norm_error),
        })
    }

    /// Negative test: a ready state just ahead of the pulse is fed from the
    /// shadow ready pulse of the same observer.
    fn intra_ready_transfer(&self, ctx: &mut Ctx<'_>, mut state: SystemState) -> Result<SystemState> {
        let pulse = state.conscious_pulse().expect("drift keeps the pulse");
        let ahead = (pulse.center_index() + (2.0 * self.cfg.brain.sigma / self.grid.spacing()).ceil() as usize)
            .min(self.grid.n_points() - 1);
        let shadow = state
            .terms
            .iter()
            .position(|t| t.is_hit_target() && matches!(t.brain.state, BrainState::Pulse(_)))
            .ok_or_else(|| Error::Config("no shadow ready pulse".into()))?;
        state.terms.push(Term::new(
            0,
            Complex64::new(0.0, 0.0),
            BrainFactor::single(BrainKind::Ready, ahead, OBSERVER),
        ));
        let leading = state.terms.len() - 1;
        let t = state.time;
        let schedule = EnvelopeSchedule::ramp(
            RampKind::LinearRamp,
            &state,
            t,
            t + 100.0 * ctx.dt,
            0.5,
            &[(shadow, leading)],
        )?;
        Ok(ctx.evolve(&state, &schedule)?.0)
    }

    fn fade_in(&self, ctx: &mut Ctx<'_>) -> Result<FadeInSummary> {
        let policy = self.cfg.formation_policy();
        debug_assert_eq!(policy.mode, FormationMode::Staged);
        let (initial, _) = self.initial()?;
        let chosen = match initial.terms[0].brain.state {
            BrainState::Single { site, .. } => site,
            _ => unreachable!("fade-in starts from a single conscious state"),
        };
        let mut state = form_pulse(&initial, chosen, &policy)?;
        let mut occupied = Vec::new();
        let mut norms = Vec::new();
        let mut track = |s: &SystemState| {
            let p = s.conscious_pulse().expect("formation keeps a conscious pulse");
            occupied.push((s.time, p.profile().occupied_sites()));
            norms.push((s.time, p.norm()));
        };
        ctx.observe(&state, None)?;
        track(&state);

        let hold = EnvelopeSchedule::hold();
        let mut formation_steps = 0;
        let fixed = self.cfg.fade_in.duration.map(|d| steps_for(d, ctx.dt));
        loop {
            let done = match fixed {
                Some(n) => formation_steps >= n,
                None => !state.is_forming() || formation_steps >= MAX_SETTLE_STEPS,
            };
            if done {
                break;
            }
            state = ctx.evolve(&state, &hold)?.0;
            formation_steps += 1;
            track(&state);
        }
        let fitted = state.conscious_pulse().expect("formation keeps a conscious pulse").profile().fitted_width();
        Ok(FadeInSummary {
            t_sc: initial.time,
            chosen,
            target_sigma: policy.target_sigma,
            fitted_sigma: fitted,
            relative_width_error: (fitted - policy.target_sigma).abs() / policy.target_sigma,
            occupied_monotone: occupied.windows(2).all(|w| w[0].1 <= w[1].1),
            occupied,
            norms,
            formation_steps,
        })
    }
}
