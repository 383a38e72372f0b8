use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform trait grid on the lattice dz·ℤ, so that the optimum z = 0 is always a
/// lattice point. Node i sits at (offset + i)·dz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub offset: i64,
    pub n: usize,
    pub dz: f64,
}

impl Grid {
    /// Smallest lattice grid covering [z_lo, z_hi].
    pub fn new(z_lo: f64, z_hi: f64, dz: f64) -> Result<Self> {
        if !(dz > 0.0 && dz.is_finite() && z_lo.is_finite() && z_hi.is_finite() && z_hi > z_lo) {
            return Err(Error::Invalid(format!(
                "grid needs z_lo < z_hi and dz > 0, got [{z_lo}, {z_hi}] dz={dz}"
            )));
        }
        let lo = (z_lo / dz + 1e-9).floor() as i64;
        let hi = (z_hi / dz - 1e-9).ceil() as i64;
        let n = (hi - lo + 1) as usize;
        if n < 3 {
            return Err(Error::Invalid("grid needs at least 3 nodes".into()));
        }
        Ok(Grid { offset: lo, n, dz })
    }

    pub fn symmetric(half_width: f64, dz: f64) -> Result<Self> {
        Self::new(-half_width, half_width, dz)
    }

    #[inline]
    pub fn z(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.dz
    }

    pub fn z_min(&self) -> f64 {
        self.z(0)
    }

    pub fn z_max(&self) -> f64 {
        self.z(self.n - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.z(i)).collect()
    }

    /// Index of the node at z = 0, if it lies inside the grid.
    pub fn origin(&self) -> Option<usize> {
        let i = -self.offset;
        (i >= 0 && (i as usize) < self.n).then_some(i as usize)
    }

    /// Alias of the nearest node to z, clamped to the grid.
    pub fn nearest(&self, z: f64) -> usize {
        let i = (z / self.dz).round() as i64 - self.offset;
        i.clamp(0, self.n as i64 - 1) as usize
    }

    /// Same lattice extended by `extra_lo` nodes on the left and `extra_hi` on the right.
    pub fn extended(&self, extra_lo: usize, extra_hi: usize) -> Grid {
        Grid {
            offset: self.offset - extra_lo as i64,
            n: self.n + extra_lo + extra_hi,
            dz: self.dz,
        }
    }
}

/// Trapezoid rule for samples on a uniform grid.
pub fn trapezoid(values: &[f64], dz: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => dz * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}
