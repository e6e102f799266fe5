//! Domain discretizations: the equivariant radial grid on a round sphere and
//! the periodic structured grid on a flat torus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Radial grid for rotationally symmetric maps between round spheres.
///
/// Nodes sit at `r_j = j·π/J` for `j = 1..J-1`; the poles `j = 0, J` carry
/// boundary data only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub sphere_dim: usize,
    pub domain_radius: f64,
    pub intervals: usize,
}

impl RadialGrid {
    pub fn new(sphere_dim: usize, domain_radius: f64, intervals: usize) -> Self {
        Self {
            sphere_dim,
            domain_radius,
            intervals,
        }
    }

    /// Angular spacing Δr.
    pub fn spacing(&self) -> f64 {
        PI / self.intervals as f64
    }

    /// Angle of extended node `j` (`0..=J`, poles included).
    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * PI / self.intervals as f64
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.intervals.saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior node angles.
    pub fn nodes(&self) -> Vec<f64> {
        (1..self.intervals).map(|j| self.angle(j)).collect()
    }
}

/// Periodic grid on `[0, L_0) × … × [0, L_{d-1})`, `d ∈ {1, 2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub periods: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl PeriodicGrid {
    pub fn new(periods: Vec<f64>, resolution: Vec<usize>) -> Self {
        Self {
            periods,
            resolution,
        }
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.resolution[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution[..axis].iter().product()
    }

    /// Multi-index of a flat node index; axis 0 varies fastest.
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        self.resolution
            .iter()
            .map(|&n| {
                let i = rem % n;
                rem /= n;
                i
            })
            .collect()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.spacing(a))
            .collect()
    }

    /// Flat index of the neighbour `offset` steps along `axis`, wrapping.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.resolution[axis] as isize;
        let stride = self.stride(axis);
        let i = ((idx / stride) as isize) % n;
        let j = (i + offset).rem_euclid(n);
        (idx as isize + (j - i) * stride as isize) as usize
    }
}

/// Discretized domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainGrid {
    Equivariant1D(RadialGrid),
    Periodic(PeriodicGrid),
}

impl DomainGrid {
    /// Spatial dimension of the stencil (1 for the radial reduction).
    pub fn stencil_dim(&self) -> usize {
        match self {
            DomainGrid::Equivariant1D(_) => 1,
            DomainGrid::Periodic(p) => p.dim(),
        }
    }

    /// Smallest physical (arc-length) spacing.
    pub fn min_spacing(&self) -> f64 {
        match self {
            DomainGrid::Equivariant1D(g) => g.domain_radius * g.spacing(),
            DomainGrid::Periodic(p) => p.min_spacing(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            DomainGrid::Equivariant1D(g) => g.len(),
            DomainGrid::Periodic(p) => p.len(),
        }
    }

    pub fn as_radial(&self) -> Option<&RadialGrid> {
        match self {
            DomainGrid::Equivariant1D(g) => Some(g),
            DomainGrid::Periodic(_) => None,
        }
    }

    pub fn as_periodic(&self) -> Option<&PeriodicGrid> {
        match self {
            DomainGrid::Periodic(p) => Some(p),
            DomainGrid::Equivariant1D(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_nodes_exclude_poles() {
        let g = RadialGrid::new(2, 1.0, 8);
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 7);
        assert!((nodes[0] - PI / 8.0).abs() < 1e-15);
        assert!((nodes[6] - 7.0 * PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_neighbors_wrap() {
        let g = PeriodicGrid::new(vec![1.0, 2.0], vec![4, 3]);
        assert_eq!(g.len(), 12);
        // (0, 0) left along axis 0 wraps to (3, 0)
        assert_eq!(g.neighbor(0, 0, -1), 3);
        // (0, 0) down along axis 1 wraps to (0, 2)
        assert_eq!(g.neighbor(0, 1, -1), 8);
        assert_eq!(g.neighbor(11, 1, 1), 3);
        assert_eq!(g.neighbor(11, 0, 1), 8);
        assert_eq!(g.multi_index(7), vec![3, 1]);
        let c = g.coords(7);
        assert!((c[0] - 0.75).abs() < 1e-15 && (c[1] - 2.0 / 3.0).abs() < 1e-15);
    }
}
