use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Number of tracked resource dimensions.
pub const DIMENSIONS: usize = 4;

/// Relative slack used by [`ResourceVector::covers`] so that sums of
/// floating-point capacities compare as the arithmetic intends.
pub const COVER_EPSILON: f64 = 1e-9;
const COVER_ABS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    /// Compute, in ECU.
    Cpu,
    /// Memory, in GiB.
    Memory,
    /// Network bandwidth, in Mbit/s.
    Network,
    /// Disk throughput, in MB/s.
    DiskIo,
}

impl Dimension {
    pub const ALL: [Dimension; DIMENSIONS] = [Dimension::Cpu, Dimension::Memory, Dimension::Network, Dimension::DiskIo];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A non-negative magnitude per resource dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceVector(pub [f64; DIMENSIONS]);

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector([0.0; DIMENSIONS]);

    pub fn new(cpu: f64, memory: f64, network: f64, disk_io: f64) -> Self {
        ResourceVector([cpu, memory, network, disk_io])
    }

    /// A vector with only the compute dimension set.
    pub fn cpu(ecu: f64) -> Self {
        ResourceVector([ecu, 0.0, 0.0, 0.0])
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        self.0[dim.index()]
    }

    pub fn scale(&self, factor: f64) -> Self {
        ResourceVector(self.0.map(|v| v * factor))
    }

    /// True iff every component of `self` is at least the matching component
    /// of `other`, up to [`COVER_EPSILON`] relative rounding slack.
    pub fn covers(&self, other: &ResourceVector) -> bool {
        self.0
            .iter()
            .zip(other.0.iter())
            .all(|(&a, &b)| a >= b * (1.0 - COVER_EPSILON) - COVER_ABS)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn all_non_negative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0 && v.is_finite())
    }

    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0 && v.is_finite())
    }

    pub fn any_positive(&self) -> bool {
        self.0.iter().any(|&v| v > 0.0)
    }

    /// Component-wise maximum.
    pub fn max(&self, other: &ResourceVector) -> Self {
        let mut out = self.0;
        for (o, &b) in out.iter_mut().zip(other.0.iter()) {
            *o = o.max(b);
        }
        ResourceVector(out)
    }

    /// Component-wise `self - other`, clamped at zero.
    pub fn saturating_sub(&self, other: &ResourceVector) -> Self {
        let mut out = self.0;
        for (o, &b) in out.iter_mut().zip(other.0.iter()) {
            *o = (*o - b).max(0.0);
        }
        ResourceVector(out)
    }
}

impl Index<Dimension> for ResourceVector {
    type Output = f64;

    fn index(&self, dim: Dimension) -> &f64 {
        &self.0[dim.index()]
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;

    fn add(mut self, rhs: ResourceVector) -> ResourceVector {
        self += rhs;
        self
    }
}

impl AddAssign for ResourceVector {
    fn add_assign(&mut self, rhs: ResourceVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for ResourceVector {
    type Output = ResourceVector;

    fn sub(mut self, rhs: ResourceVector) -> ResourceVector {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for ResourceVector {
    type Output = ResourceVector;

    fn mul(self, rhs: f64) -> ResourceVector {
        self.scale(rhs)
    }
}

impl std::iter::Sum for ResourceVector {
    fn sum<I: Iterator<Item = ResourceVector>>(iter: I) -> Self {
        iter.fold(ResourceVector::ZERO, Add::add)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, m, n, d] = self.0;
        write!(f, "(cpu={c:.4}, mem={m:.4}, net={n:.4}, disk={d:.4})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_is_component_wise() {
        let a = ResourceVector::new(2.0, 4.0, 0.0, 0.0);
        assert!(a.covers(&ResourceVector::new(2.0, 3.0, 0.0, 0.0)));
        assert!(!a.covers(&ResourceVector::new(1.0, 5.0, 0.0, 0.0)));
        assert!(a.covers(&a));
    }

    #[test]
    fn covers_tolerates_summation_rounding() {
        let parts: ResourceVector = (0..10).map(|_| ResourceVector::cpu(0.1)).sum();
        assert!(parts.covers(&ResourceVector::cpu(1.0)));
    }
}
