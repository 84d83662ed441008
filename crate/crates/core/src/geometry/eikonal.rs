//! First-order fast marching for `|grad phi| = 1 / speed` on the node grid.
//!
//! Godunov upwind update with 4-neighbour causality and a binary heap. The
//! discrete solution is monotone in the seed values and exact for plane waves
//! aligned with the grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::domain::DiscreteDomain;
use crate::geometry::speed::Metric;

/// Travel-time field on the grid nodes.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub phi: Vec<f64>,
    pub metric: MetricTag,
}

/// Which distance function a [`DistanceField`] realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricTag {
    /// `d`, the background metric restricted to `M`.
    Background,
    /// `d~`, the metric with the inclusion.
    Inclusion,
    /// `d^`, the background metric on the ambient plane.
    Ambient,
    /// A caller-supplied speed field.
    Custom,
}

impl From<Metric> for MetricTag {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Background => MetricTag::Background,
            Metric::Inclusion => MetricTag::Inclusion,
        }
    }
}

impl DistanceField {
    /// Bilinear value at the centre of cell `(i, j)`.
    #[inline]
    pub fn cell_value(&self, domain: &DiscreteDomain, i: usize, j: usize) -> f64 {
        0.25 * (self.phi[domain.node_index(i, j)]
            + self.phi[domain.node_index(i + 1, j)]
            + self.phi[domain.node_index(i, j + 1)]
            + self.phi[domain.node_index(i + 1, j + 1)])
    }

    pub fn at(&self, domain: &DiscreteDomain, i: usize, j: usize) -> f64 {
        self.phi[domain.node_index(i, j)]
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    value: f64,
    node: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on value, ties broken by node index for determinism
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Far,
    Trial,
    Accepted,
}

/// Solve the eikonal equation with `phi(seed) = value` (minimum over duplicate seeds).
///
/// `speed` holds one strictly positive value per grid node.
pub fn eikonal_distance(
    domain: &DiscreteDomain,
    speed: &[f64],
    seeds: &[(usize, f64)],
) -> Result<DistanceField> {
    if seeds.is_empty() {
        return Err(Error::NoSources);
    }
    let n = domain.node_count();
    if speed.len() != n {
        return Err(Error::InvalidArgument(format!(
            "speed field has {} values for {} nodes",
            speed.len(),
            n
        )));
    }
    if let Some(s) = speed.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidSpeed(format!("eikonal speed {s}")));
    }
    let mut phi = vec![f64::INFINITY; n];
    let mut state = vec![State::Far; n];
    let mut heap = BinaryHeap::with_capacity(seeds.len() * 2);
    for &(node, value) in seeds {
        if node >= n {
            return Err(Error::InvalidArgument(format!("seed node {node} out of range")));
        }
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("seed value {value} not finite")));
        }
        if value < phi[node] {
            phi[node] = value;
            state[node] = State::Trial;
            heap.push(Trial { value, node });
        }
    }

    let (nx, ny) = (domain.nx, domain.ny);
    let stride = nx + 1;
    let h = domain.h;
    while let Some(Trial { value, node }) = heap.pop() {
        if state[node] == State::Accepted || value > phi[node] {
            continue;
        }
        state[node] = State::Accepted;
        let i = node % stride;
        let j = node / stride;
        let mut visit = |nb: usize, ni: usize, nj: usize| {
            if state[nb] == State::Accepted {
                return;
            }
            let a = {
                let l = if ni > 0 { accepted(&phi, &state, nb - 1) } else { f64::INFINITY };
                let r = if ni < nx { accepted(&phi, &state, nb + 1) } else { f64::INFINITY };
                l.min(r)
            };
            let b = {
                let d = if nj > 0 { accepted(&phi, &state, nb - stride) } else { f64::INFINITY };
                let u = if nj < ny { accepted(&phi, &state, nb + stride) } else { f64::INFINITY };
                d.min(u)
            };
            let t = godunov(a, b, h / speed[nb]);
            if t < phi[nb] {
                phi[nb] = t;
                state[nb] = State::Trial;
                heap.push(Trial { value: t, node: nb });
            }
        };
        if i > 0 {
            visit(node - 1, i - 1, j);
        }
        if i < nx {
            visit(node + 1, i + 1, j);
        }
        if j > 0 {
            visit(node - stride, i, j - 1);
        }
        if j < ny {
            visit(node + stride, i, j + 1);
        }
    }
    Ok(DistanceField {
        phi,
        metric: MetricTag::Custom,
    })
}

#[inline]
fn accepted(phi: &[f64], state: &[State], k: usize) -> f64 {
    if state[k] == State::Accepted {
        phi[k]
    } else {
        f64::INFINITY
    }
}

/// Upwind update from the smaller neighbour in each axis and local cost `f = h / speed`.
#[inline]
fn godunov(a: f64, b: f64, f: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo >= f {
        lo + f
    } else {
        let disc = 2.0 * f * f - (a - b) * (a - b);
        0.5 * (a + b + disc.sqrt())
    }
}

/// Seeds at every boundary node with values `-tau(y)`.
pub fn boundary_seeds(domain: &DiscreteDomain, tau: &[f64]) -> Vec<(usize, f64)> {
    domain
        .boundary()
        .iter()
        .zip(tau)
        .map(|(b, t)| (domain.node_index(b.i, b.j), -t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corner_field(n: usize, speed: f64) -> (DiscreteDomain, DistanceField) {
        let d = DiscreteDomain::unit_square(n).unwrap();
        let s = vec![speed; d.node_count()];
        let f = eikonal_distance(&d, &s, &[(d.node_index(0, 0), 0.0)]).unwrap();
        (d, f)
    }

    #[test]
    fn constant_speed_corner_to_corner() {
        let (d, f) = corner_field(64, 1.0);
        let v = f.at(&d, 64, 64);
        assert!((v - 2f64.sqrt()).abs() <= 3.0 * d.h, "{v}");
    }

    #[test]
    fn travel_time_scales_with_inverse_speed() {
        let (d, f) = corner_field(64, 2.0);
        let v = f.at(&d, 64, 64);
        assert!((v - 2f64.sqrt() / 2.0).abs() <= 3.0 * d.h, "{v}");
    }

    #[test]
    fn axis_aligned_plane_wave_is_exact() {
        let d = DiscreteDomain::unit_square(16).unwrap();
        let s = vec![1.0; d.node_count()];
        let seeds: Vec<_> = (0..=16).map(|i| (d.node_index(i, 0), 0.0)).collect();
        let f = eikonal_distance(&d, &s, &seeds).unwrap();
        for j in 0..=16 {
            for i in 0..=16 {
                assert!((f.at(&d, i, j) - j as f64 * d.h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn errors() {
        let d = DiscreteDomain::unit_square(8).unwrap();
        let s = vec![1.0; d.node_count()];
        assert!(matches!(eikonal_distance(&d, &s, &[]), Err(Error::NoSources)));
        let mut bad = s.clone();
        bad[3] = 0.0;
        assert!(matches!(
            eikonal_distance(&d, &bad, &[(0, 0.0)]),
            Err(Error::InvalidSpeed(_))
        ));
    }

    #[test]
    fn duplicate_seeds_take_minimum() {
        let d = DiscreteDomain::unit_square(8).unwrap();
        let s = vec![1.0; d.node_count()];
        let f = eikonal_distance(&d, &s, &[(0, 0.5), (0, -0.25)]).unwrap();
        assert_eq!(f.phi[0], -0.25);
    }

    #[test]
    fn seeds_can_be_overridden_by_cheaper_paths() {
        let d = DiscreteDomain::unit_square(8).unwrap();
        let s = vec![1.0; d.node_count()];
        let far = d.node_index(1, 0);
        let f = eikonal_distance(&d, &s, &[(0, -1.0), (far, 5.0)]).unwrap();
        assert!((f.phi[far] - (-1.0 + d.h)).abs() < 1e-12);
    }
}
