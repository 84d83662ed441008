//! Rectangular node grid over the domain `M` and its boundary enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A boundary grid node with its arc-length coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub i: usize,
    pub j: usize,
    /// Arc-length coordinate, counter-clockwise from the lower-left corner.
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub corner: bool,
}

/// Axis-aligned rectangle discretised by `nx x ny` square cells of side `h`.
///
/// Nodes are indexed `(i, j)` with `0 <= i <= nx`, `0 <= j <= ny` and sit at
/// `origin + (i h, j h)`. Cells are indexed `(i, j)` with `i < nx`, `j < ny`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDomain {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub lx: f64,
    pub ly: f64,
    pub origin: (f64, f64),
    boundary: Vec<BoundaryNode>,
}

impl DiscreteDomain {
    /// Grid with `nx` cells across `lx`; the cell count in `y` follows from `ly`.
    pub fn new(origin: (f64, f64), lx: f64, ly: f64, nx: usize) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("extents must be positive, got {lx} x {ly}")));
        }
        if nx < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells, got {nx}")));
        }
        let h = lx / nx as f64;
        let ny_f = ly / h;
        let ny = ny_f.round() as usize;
        if ny < 4 || (ny_f - ny as f64).abs() > 1e-9 * ny_f.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "ly = {ly} is not an integer multiple of h = {h}"
            )));
        }
        Ok(Self::build(origin, nx, ny, h))
    }

    /// The unit square `[0,1]^2` with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new((0.0, 0.0), 1.0, 1.0, n)
    }

    fn build(origin: (f64, f64), nx: usize, ny: usize, h: f64) -> Self {
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        let mut push = |i: usize, j: usize| {
            let k = boundary.len();
            let corner = (i == 0 || i == nx) && (j == 0 || j == ny);
            boundary.push(BoundaryNode {
                i,
                j,
                s: k as f64 * h,
                x: origin.0 + i as f64 * h,
                y: origin.1 + j as f64 * h,
                corner,
            });
        };
        for i in 0..nx {
            push(i, 0);
        }
        for j in 0..ny {
            push(nx, j);
        }
        for i in (1..=nx).rev() {
            push(i, ny);
        }
        for j in (1..=ny).rev() {
            push(0, j);
        }
        Self {
            nx,
            ny,
            h,
            lx: nx as f64 * h,
            ly: ny as f64 * h,
            origin,
            boundary,
        }
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.h,
            self.origin.1 + j as f64 * self.h,
        )
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.h,
            self.origin.1 + (j as f64 + 0.5) * self.h,
        )
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len()
    }

    /// Grid indices of the boundary nodes, in boundary order.
    pub fn boundary_node_indices(&self) -> Vec<usize> {
        self.boundary
            .iter()
            .map(|b| self.node_index(b.i, b.j))
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.lx + self.ly)
    }

    /// Euclidean arc-length weight of every boundary node (trapezoid rule on the closed polygon).
    pub fn arc_weights(&self) -> Vec<f64> {
        vec![self.h; self.boundary.len()]
    }

    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Unit tangent (direction of increasing `s`) and inward normal at a non-corner boundary node.
    pub fn edge_frame(&self, k: usize) -> ((f64, f64), (f64, f64)) {
        let b = &self.boundary[k];
        if b.j == 0 && b.i < self.nx {
            ((1.0, 0.0), (0.0, 1.0))
        } else if b.i == self.nx && b.j < self.ny {
            ((0.0, 1.0), (-1.0, 0.0))
        } else if b.j == self.ny && b.i > 0 {
            ((-1.0, 0.0), (0.0, -1.0))
        } else {
            ((0.0, -1.0), (1.0, 0.0))
        }
    }

    /// Boundary node nearest to `(x, y)`.
    pub fn nearest_boundary(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, b) in self.boundary.iter().enumerate() {
            let d = (b.x - x).powi(2) + (b.y - y).powi(2);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Boundary node at arc coordinate `s` (wrapped to the perimeter, rounded to the nearest node).
    pub fn boundary_at_arc(&self, s: f64) -> usize {
        let n = self.boundary.len();
        let k = (s.rem_euclid(self.perimeter()) / self.h).round() as usize;
        k % n
    }

    /// Distance along the boundary polygon between two boundary nodes.
    pub fn arc_distance(&self, a: usize, b: usize) -> f64 {
        let d = (self.boundary[a].s - self.boundary[b].s).abs();
        d.min(self.perimeter() - d)
    }

    /// Same rectangle with an outer collar of `margin` cells on each side.
    pub fn extended(&self, margin: usize) -> Self {
        let m = margin as f64 * self.h;
        Self::build(
            (self.origin.0 - m, self.origin.1 - m),
            self.nx + 2 * margin,
            self.ny + 2 * margin,
            self.h,
        )
    }

    pub fn diameter(&self) -> f64 {
        self.lx.hypot(self.ly)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.origin.0 - 1e-12
            && y >= self.origin.1 - 1e-12
            && x <= self.origin.0 + self.lx + 1e-12
            && y <= self.origin.1 + self.ly + 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_traversal_is_consecutive_and_closed() {
        let d = DiscreteDomain::new((0.0, 0.0), 1.0, 0.5, 8).unwrap();
        assert_eq!(d.ny, 4);
        let b = d.boundary();
        assert_eq!(b.len(), 2 * (8 + 4));
        for k in 0..b.len() {
            let n = &b[(k + 1) % b.len()];
            let c = &b[k];
            let step = (c.i as i64 - n.i as i64).abs() + (c.j as i64 - n.j as i64).abs();
            assert_eq!(step, 1, "nodes {k} and next are not adjacent");
        }
        let mut seen: Vec<_> = b.iter().map(|n| (n.i, n.j)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), b.len());
        assert_eq!(b.iter().filter(|n| n.corner).count(), 4);
        assert!((d.arc_weights().iter().sum::<f64>() - d.perimeter()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_integer_aspect() {
        assert!(DiscreteDomain::new((0.0, 0.0), 1.0, 0.51, 8).is_err());
        assert!(DiscreteDomain::new((0.0, 0.0), -1.0, 1.0, 8).is_err());
    }

    #[test]
    fn extents_match_cell_size() {
        let d = DiscreteDomain::unit_square(64).unwrap();
        assert!((d.nx as f64 * d.h - d.lx).abs() <= 4.0 * f64::EPSILON);
        assert!((d.ny as f64 * d.h - d.ly).abs() <= 4.0 * f64::EPSILON);
        let e = d.extended(3);
        assert_eq!(e.nx, 70);
        assert!((e.origin.0 + 3.0 * d.h).abs() < 1e-15);
    }

    #[test]
    fn frames_point_inward() {
        let d = DiscreteDomain::unit_square(8).unwrap();
        for k in 0..d.boundary_len() {
            if d.boundary()[k].corner {
                continue;
            }
            let b = d.boundary()[k];
            let (_, n) = d.edge_frame(k);
            let (x, y) = (b.x + 0.1 * n.0, b.y + 0.1 * n.1);
            assert!(d.contains(x, y));
        }
    }
}
