use std::ops::RangeInclusive;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::BrainGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrainKind {
    Conscious,
    Ready,
}

/// Gaussian weights below this fraction of the peak amplitude are set to
/// exactly zero, so pulses have finite support and well-separated pulses
/// share no sites.
pub const GAUSSIAN_CUTOFF: f64 = 1e-15;

/// Unit-norm amplitude profile `F(u)` on a grid: `Σ |F(u)|² Δu = 1`.
///
/// Weights are shared behind `Arc` so trajectories can clone states per step
/// without copying the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: BrainGrid,
    weights: Arc<[Complex64]>,
    mass: Arc<[f64]>,
    peak: usize,
}

impl Profile {
    /// Normalizes `weights` so that `Σ |w|² Δu = 1`.
    pub fn new(grid: BrainGrid, weights: Vec<Complex64>) -> Result<Self> {
        if weights.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        let du = grid.spacing();
        let norm_sq: f64 = weights.iter().map(|w| w.norm_sqr()).sum::<f64>() * du;
        if !(norm_sq.is_finite() && norm_sq > 0.0) {
            return Err(Error::ZeroProfile);
        }
        let scale = norm_sq.sqrt().recip();
        let weights: Vec<Complex64> = weights.into_iter().map(|w| w * scale).collect();
        Ok(Self::from_normalized(grid, weights))
    }

    fn from_normalized(grid: BrainGrid, weights: Vec<Complex64>) -> Self {
        let du = grid.spacing();
        let mass: Vec<f64> = weights.iter().map(|w| w.norm_sqr() * du).collect();
        // Lowest index wins ties.
        let mut peak = 0;
        for (k, &m) in mass.iter().enumerate() {
            if m > mass[peak] {
                peak = k;
            }
        }
        Self {
            grid,
            weights: weights.into(),
            mass: mass.into(),
            peak,
        }
    }

    /// A single occupied site carrying the whole norm.
    pub fn point(grid: BrainGrid, site: usize) -> Result<Self> {
        grid.check_index(site)?;
        let mut weights = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        weights[site] = Complex64::new(grid.spacing().sqrt().recip(), 0.0);
        Self::new(grid, weights)
    }

    /// Gaussian `exp(-(u - center)² / (2σ²))` restricted to `support`,
    /// renormalized on the grid. No range checks beyond the grid itself.
    pub(crate) fn gaussian_on(
        grid: BrainGrid,
        center: f64,
        sigma: f64,
        support: RangeInclusive<usize>,
    ) -> Result<Self> {
        let mut weights = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        let two_var = 2.0 * sigma * sigma;
        let hi = (*support.end()).min(grid.n_points() - 1);
        for k in *support.start()..=hi {
            let d = grid.position(k) - center;
            let w = (-d * d / two_var).exp();
            if w >= GAUSSIAN_CUTOFF {
                weights[k] = Complex64::new(w, 0.0);
            }
        }
        Self::new(grid, weights)
    }

    pub fn grid(&self) -> &BrainGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Per-site probability mass `|F(u)|² Δu`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub(crate) fn shared_mass(&self) -> Arc<[f64]> {
        Arc::clone(&self.mass)
    }

    pub fn peak_index(&self) -> usize {
        self.peak
    }

    pub fn norm(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Amplitude of the discrete unit-norm grid state at `site`: `F(u) √Δu`.
    pub fn site_amplitude(&self, site: usize) -> Complex64 {
        self.weights
            .get(site)
            .map(|w| w * self.grid.spacing().sqrt())
            .unwrap_or_default()
    }

    pub fn occupied_sites(&self) -> usize {
        self.weights.iter().filter(|w| w.norm_sqr() > 0.0).count()
    }

    /// Mean position of `|F|²`.
    pub fn mean_position(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, m)| m * self.grid.position(k))
            .sum::<f64>()
            / self.norm()
    }

    /// Gaussian width recovered from the second moment: `F ∝ exp(-x²/2σ²)`
    /// has `|F|²` variance `σ²/2`.
    pub fn fitted_width(&self) -> f64 {
        let mean = self.mean_position();
        let var = self
            .mass
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let d = self.grid.position(k) - mean;
                m * d * d
            })
            .sum::<f64>()
            / self.norm();
        (2.0 * var).sqrt()
    }
}

/// A conscious or ready brain pulse `{B_k} = ∫ du F_k(u) B_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    kind: BrainKind,
    profile: Profile,
    formation_stage: f64,
}

impl Pulse {
    pub fn new(kind: BrainKind, profile: Profile) -> Self {
        Self {
            kind,
            profile,
            formation_stage: 1.0,
        }
    }

    pub(crate) fn with_stage(mut self, stage: f64) -> Self {
        self.formation_stage = stage.clamp(0.0, 1.0);
        self
    }

    pub(crate) fn with_kind(mut self, kind: BrainKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn kind(&self) -> BrainKind {
        self.kind
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn grid(&self) -> &BrainGrid {
        self.profile.grid()
    }

    pub fn center_index(&self) -> usize {
        self.profile.peak_index()
    }

    pub fn weights(&self) -> &[Complex64] {
        self.profile.weights()
    }

    pub fn mass(&self) -> &[f64] {
        self.profile.mass()
    }

    pub fn norm(&self) -> f64 {
        self.profile.norm()
    }

    /// 0 for a freshly chosen single state, 1 once fully formed.
    pub fn formation_stage(&self) -> f64 {
        self.formation_stage
    }

    pub fn is_fully_formed(&self) -> bool {
        self.formation_stage >= 1.0
    }
}

/// Gaussian pulse of width `sigma` centred on `center`.
///
/// The profile must be resolvable (`sigma >= 2Δu`) and sit at least `4σ`
/// inside the grid.
pub fn make_gaussian_pulse(
    grid: BrainGrid,
    center: f64,
    sigma: f64,
    kind: BrainKind,
) -> Result<Pulse> {
    if !(sigma.is_finite() && sigma > 0.0) || sigma < 2.0 * grid.spacing() {
        return Err(Error::GridTooCoarse {
            sigma,
            spacing: grid.spacing(),
        });
    }
    let (lo, hi) = (grid.origin(), grid.end());
    if !grid.contains(center) {
        return Err(Error::CenterOutOfRange { center, lo, hi });
    }
    if center - 4.0 * sigma < lo || center + 4.0 * sigma > hi {
        return Err(Error::EdgeClearance {
            center,
            sigma,
            lo,
            hi,
        });
    }
    let profile = Profile::gaussian_on(grid, center, sigma, 0..=grid.n_points() - 1)?;
    Ok(Pulse::new(kind, profile))
}

/// `Σ |F_p(u)| |F_q(u)| Δu`.
pub fn pulse_overlap(p: &Pulse, q: &Pulse) -> Result<f64> {
    profile_overlap(p.profile(), q.profile())
}

pub fn profile_overlap(p: &Profile, q: &Profile) -> Result<f64> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    let du = p.grid().spacing();
    Ok(p
        .weights()
        .iter()
        .zip(q.weights())
        .map(|(a, b)| a.norm() * b.norm())
        .sum::<f64>()
        * du)
}
