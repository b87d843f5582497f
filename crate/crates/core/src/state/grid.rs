use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform, non-periodic discretization of the brain variable `u`.
///
/// Site `k` sits at `origin + k * spacing`; the grid covers
/// `[origin, origin + n_points * spacing)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrainGrid {
    n_points: usize,
    spacing: f64,
    origin: f64,
}

impl BrainGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n_points: usize, spacing: f64, origin: f64) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "n_points {n_points} < {}",
                Self::MIN_POINTS
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing {spacing} must be > 0")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("origin {origin} is not finite")));
        }
        Ok(Self {
            n_points,
            spacing,
            origin,
        })
    }

    /// `n_points` sites covering `[0, 1)`.
    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(n_points, 1.0 / n_points as f64, 0.0)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn end(&self) -> f64 {
        self.origin + self.n_points as f64 * self.spacing
    }

    pub fn position(&self, index: usize) -> f64 {
        self.origin + index as f64 * self.spacing
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.origin && u < self.end()
    }

    /// Nearest site to `u`, or `None` when `u` lies outside the grid.
    pub fn nearest_index(&self, u: f64) -> Option<usize> {
        if !self.contains(u) {
            return None;
        }
        let k = ((u - self.origin) / self.spacing).round() as usize;
        Some(k.min(self.n_points - 1))
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n_points {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                len: self.n_points,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(BrainGrid::new(7, 0.1, 0.0).is_err());
        assert!(BrainGrid::new(8, 0.0, 0.0).is_err());
        assert!(BrainGrid::new(8, -1.0, 0.0).is_err());
        assert!(BrainGrid::new(8, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn nearest_index_rounds() {
        let g = BrainGrid::unit(256).unwrap();
        assert_eq!(g.nearest_index(0.5), Some(128));
        assert_eq!(g.nearest_index(0.0), Some(0));
        assert_eq!(g.nearest_index(0.9999), Some(255));
        assert_eq!(g.nearest_index(1.0), None);
        assert_eq!(g.nearest_index(-0.01), None);
    }
}
