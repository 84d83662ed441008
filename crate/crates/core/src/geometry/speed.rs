//! Wave speed models: a background speed `c0` plus piecewise-constant contrast inclusions.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::domain::DiscreteDomain;

/// Background speed `c0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Background {
    Constant(f64),
    /// Node samples on a rectangular grid, bilinearly interpolated and clamped outside.
    Grid {
        origin: [f64; 2],
        h: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    },
}

impl Background {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Background::Constant(c) => *c,
            Background::Grid {
                origin,
                h,
                nx,
                ny,
                values,
            } => {
                let fx = ((x - origin[0]) / h).clamp(0.0, *nx as f64);
                let fy = ((y - origin[1]) / h).clamp(0.0, *ny as f64);
                let i = (fx.floor() as usize).min(nx - 1);
                let j = (fy.floor() as usize).min(ny - 1);
                let (tx, ty) = (fx - i as f64, fy - j as f64);
                let at = |a: usize, b: usize| values[b * (nx + 1) + a];
                (1.0 - tx) * (1.0 - ty) * at(i, j)
                    + tx * (1.0 - ty) * at(i + 1, j)
                    + (1.0 - tx) * ty * at(i, j + 1)
                    + tx * ty * at(i + 1, j + 1)
            }
        }
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            Background::Constant(c) => Some(*c),
            Background::Grid { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Background::Constant(c) => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidSpeed(format!("background speed {c}")));
                }
            }
            Background::Grid {
                h, nx, ny, values, ..
            } => {
                if *nx == 0 || *ny == 0 || !(*h > 0.0) {
                    return Err(Error::InvalidModel("degenerate background grid".into()));
                }
                if values.len() != (nx + 1) * (ny + 1) {
                    return Err(Error::InvalidModel(format!(
                        "background grid expects {} values, got {}",
                        (nx + 1) * (ny + 1),
                        values.len()
                    )));
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidSpeed(format!("background speed {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Inclusion primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
    Triangle { vertices: [[f64; 2]; 3] },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disk { center, radius } => {
                (x - center[0]).powi(2) + (y - center[1]).powi(2) <= radius * radius
            }
            Shape::Rect { min, max } => x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1],
            Shape::Triangle { vertices: v } => {
                let cross = |a: [f64; 2], b: [f64; 2]| {
                    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
                };
                let d0 = cross(v[0], v[1]);
                let d1 = cross(v[1], v[2]);
                let d2 = cross(v[2], v[0]);
                let neg = d0 < 0.0 || d1 < 0.0 || d2 < 0.0;
                let pos = d0 > 0.0 || d1 > 0.0 || d2 > 0.0;
                !(neg && pos)
            }
        }
    }

    /// Euclidean distance from a point to the shape (0 inside).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        if self.contains(x, y) {
            return 0.0;
        }
        match self {
            Shape::Disk { center, radius } => {
                ((x - center[0]).hypot(y - center[1]) - radius).max(0.0)
            }
            Shape::Rect { min, max } => {
                let dx = (min[0] - x).max(0.0).max(x - max[0]);
                let dy = (min[1] - y).max(0.0).max(y - max[1]);
                dx.hypot(dy)
            }
            Shape::Triangle { vertices: v } => (0..3)
                .map(|k| segment_distance((x, y), v[k], v[(k + 1) % 3]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Point of the shape nearest to `(x, y)`.
    pub fn nearest_point(&self, x: f64, y: f64) -> (f64, f64) {
        if self.contains(x, y) {
            return (x, y);
        }
        match self {
            Shape::Disk { center, radius } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let r = dx.hypot(dy);
                (center[0] + dx * radius / r, center[1] + dy * radius / r)
            }
            Shape::Rect { min, max } => (x.clamp(min[0], max[0]), y.clamp(min[1], max[1])),
            Shape::Triangle { vertices: v } => {
                let mut best = (f64::INFINITY, (x, y));
                for k in 0..3 {
                    let p = segment_nearest((x, y), v[k], v[(k + 1) % 3]);
                    let d = (p.0 - x).hypot(p.1 - y);
                    if d < best.0 {
                        best = (d, p);
                    }
                }
                best.1
            }
        }
    }

    /// Sample points on the shape outline (used for convex hull checks).
    pub fn outline(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            Shape::Disk { center, radius } => (0..n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    (center[0] + radius * a.cos(), center[1] + radius * a.sin())
                })
                .collect(),
            Shape::Rect { min, max } => vec![
                (min[0], min[1]),
                (max[0], min[1]),
                (max[0], max[1]),
                (min[0], max[1]),
            ],
            Shape::Triangle { vertices } => vertices.iter().map(|v| (v[0], v[1])).collect(),
        }
    }
}

fn segment_nearest(p: (f64, f64), a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ux * ux + uy * uy;
    let t = if len2 > 0.0 {
        (((p.0 - a[0]) * ux + (p.1 - a[1]) * uy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a[0] + t * ux, a[1] + t * uy)
}

fn segment_distance(p: (f64, f64), a: [f64; 2], b: [f64; 2]) -> f64 {
    let q = segment_nearest(p, a, b);
    (q.0 - p.0).hypot(q.1 - p.1)
}

/// An inclusion region with constant contrast: `c~ = c0 * contrast` inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    pub shape: Shape,
    pub contrast: f64,
}

/// Background plus inclusions `Sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedModel {
    pub background: Background,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
}

impl SpeedModel {
    pub fn constant(c0: f64) -> Self {
        Self {
            background: Background::Constant(c0),
            inclusions: Vec::new(),
        }
    }

    pub fn with_inclusion(mut self, shape: Shape, contrast: f64) -> Self {
        self.inclusions.push(Inclusion { shape, contrast });
        self
    }

    /// Contrast at a point, `None` outside `Sigma`. The first matching inclusion wins.
    pub fn contrast_at(&self, x: f64, y: f64) -> Option<f64> {
        self.inclusions
            .iter()
            .find(|inc| inc.shape.contains(x, y))
            .map(|inc| inc.contrast)
    }

    pub fn background_only(&self) -> Self {
        Self {
            background: self.background.clone(),
            inclusions: Vec::new(),
        }
    }

    /// Euclidean distance from a point to `Sigma`.
    pub fn distance_to_inclusions(&self, x: f64, y: f64) -> f64 {
        self.inclusions
            .iter()
            .map(|inc| inc.shape.distance(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_contrast(&self) -> Option<f64> {
        self.inclusions.iter().map(|i| i.contrast).reduce(f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        self.background.validate()?;
        for (k, inc) in self.inclusions.iter().enumerate() {
            if !(inc.contrast > 0.0 && inc.contrast.is_finite()) {
                return Err(Error::InvalidSpeed(format!(
                    "inclusion {k} has contrast {}",
                    inc.contrast
                )));
            }
            if let Shape::Disk { radius, .. } = inc.shape {
                if !(radius > 0.0) {
                    return Err(Error::InvalidModel(format!("inclusion {k} has radius {radius}")));
                }
            }
        }
        Ok(())
    }
}

/// Which travel-time metric to use: `g` (background) or `g~` (with inclusion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Background,
    Inclusion,
}

/// A speed model sampled on a grid.
///
/// Nodes carry the speed used by the eikonal solver; cells carry the density
/// `c^-2` of the volume measures `m` and `m~`.
#[derive(Debug, Clone)]
pub struct Medium {
    pub domain: DiscreteDomain,
    pub model: SpeedModel,
    pub node_c0: Vec<f64>,
    pub node_speed: Vec<f64>,
    pub node_sigma: Vec<bool>,
    pub cell_c0: Vec<f64>,
    pub cell_speed: Vec<f64>,
    pub cell_sigma: Vec<bool>,
}

/// Cells of the collar inside the boundary that must stay free of inclusions.
pub const SIGMA_COLLAR: usize = 2;

impl Medium {
    pub fn new(domain: DiscreteDomain, model: SpeedModel) -> Result<Self> {
        let m = Self::sample(domain, model)?;
        m.check_collar()?;
        Ok(m)
    }

    /// Sample without the interior-collar check (used for extended grids).
    pub fn sample(domain: DiscreteDomain, model: SpeedModel) -> Result<Self> {
        model.validate()?;
        let mut node_c0 = Vec::with_capacity(domain.node_count());
        let mut node_speed = Vec::with_capacity(domain.node_count());
        let mut node_sigma = Vec::with_capacity(domain.node_count());
        for j in 0..=domain.ny {
            for i in 0..=domain.nx {
                let (x, y) = domain.node_pos(i, j);
                let c0 = model.background.eval(x, y);
                let c = model.contrast_at(x, y);
                node_c0.push(c0);
                node_speed.push(c0 * c.unwrap_or(1.0));
                node_sigma.push(c.is_some());
            }
        }
        let mut cell_c0 = Vec::with_capacity(domain.cell_count());
        let mut cell_speed = Vec::with_capacity(domain.cell_count());
        let mut cell_sigma = Vec::with_capacity(domain.cell_count());
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let (x, y) = domain.cell_center(i, j);
                let c0 = model.background.eval(x, y);
                let c = model.contrast_at(x, y);
                cell_c0.push(c0);
                cell_speed.push(c0 * c.unwrap_or(1.0));
                cell_sigma.push(c.is_some());
            }
        }
        if let Some(v) = node_speed
            .iter()
            .chain(cell_speed.iter())
            .find(|v| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidSpeed(format!("sampled speed {v}")));
        }
        Ok(Self {
            domain,
            model,
            node_c0,
            node_speed,
            node_sigma,
            cell_c0,
            cell_speed,
            cell_sigma,
        })
    }

    fn check_collar(&self) -> Result<()> {
        let d = &self.domain;
        for j in 0..=d.ny {
            for i in 0..=d.nx {
                let depth = i.min(j).min(d.nx - i).min(d.ny - j);
                if depth <= SIGMA_COLLAR && self.node_sigma[d.node_index(i, j)] {
                    return Err(Error::InvalidModel(format!(
                        "inclusion reaches node ({i}, {j}) within {SIGMA_COLLAR} cells of the boundary"
                    )));
                }
            }
        }
        for j in 0..d.ny {
            for i in 0..d.nx {
                let depth = i.min(j).min(d.nx - 1 - i).min(d.ny - 1 - j);
                if depth < SIGMA_COLLAR && self.cell_sigma[d.cell_index(i, j)] {
                    return Err(Error::InvalidModel(format!(
                        "inclusion reaches cell ({i}, {j}) within {SIGMA_COLLAR} cells of the boundary"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn background(&self) -> Result<Medium> {
        Medium::sample(self.domain.clone(), self.model.background_only())
    }

    pub fn has_inclusion(&self) -> bool {
        self.cell_sigma.iter().any(|&s| s) || self.node_sigma.iter().any(|&s| s)
    }

    pub fn node_speed(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Background => &self.node_c0,
            Metric::Inclusion => &self.node_speed,
        }
    }

    /// Density of the volume measure per cell: `c0^-2` for `m`, `c~^-2` for `m~`.
    pub fn cell_density(&self, metric: Metric) -> Vec<f64> {
        let c = match metric {
            Metric::Background => &self.cell_c0,
            Metric::Inclusion => &self.cell_speed,
        };
        c.iter().map(|c| 1.0 / (c * c)).collect()
    }

    /// Quadrature weights of `dS_g = c0^-1 dl` at the boundary nodes.
    pub fn boundary_weights(&self) -> Vec<f64> {
        let d = &self.domain;
        d.boundary()
            .iter()
            .map(|b| d.h / self.node_c0[d.node_index(b.i, b.j)])
            .collect()
    }

    pub fn max_speed(&self) -> f64 {
        self.node_speed
            .iter()
            .chain(self.cell_speed.iter())
            .fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Total volume `m(M)` or `m~(M)` under the cell quadrature.
    pub fn total_volume(&self, metric: Metric) -> f64 {
        let h2 = self.domain.h * self.domain.h;
        self.cell_density(metric).iter().sum::<f64>() * h2
    }

    /// Stable digest of the grid and speed model.
    pub fn model_hash(&self) -> String {
        let payload = serde_json::json!({
            "grid": [self.domain.nx, self.domain.ny, self.domain.h, self.domain.origin.0, self.domain.origin.1],
            "model": self.model,
        });
        let digest = Sha256::digest(payload.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> Shape {
        Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        }
    }

    #[test]
    fn total_speed_combines_background_and_contrast() {
        let d = DiscreteDomain::unit_square(32).unwrap();
        let m = Medium::new(d, SpeedModel::constant(1.5).with_inclusion(disk(), 2.0)).unwrap();
        let centre = m.domain.node_index(16, 16);
        assert_eq!(m.node_speed[centre], 3.0);
        assert_eq!(m.node_c0[centre], 1.5);
        assert_eq!(m.node_speed[0], 1.5);
        assert!(m.has_inclusion());
        let w = m.boundary_weights();
        assert!(w.iter().all(|&w| (w - m.domain.h / 1.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_inclusion_touching_collar() {
        let d = DiscreteDomain::unit_square(32).unwrap();
        let near = Shape::Disk {
            center: [0.5, 0.05],
            radius: 0.04,
        };
        let err = Medium::new(d, SpeedModel::constant(1.0).with_inclusion(near, 2.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_non_positive_speeds() {
        let d = DiscreteDomain::unit_square(8).unwrap();
        assert!(Medium::new(d.clone(), SpeedModel::constant(0.0)).is_err());
        let m = SpeedModel::constant(1.0).with_inclusion(disk(), -1.0);
        assert!(Medium::new(d, m).is_err());
    }

    #[test]
    fn shape_distances() {
        let s = disk();
        assert!((s.distance(0.5, 0.0) - 0.35).abs() < 1e-12);
        let (px, py) = s.nearest_point(0.5, 0.0);
        assert!((px - 0.5).abs() < 1e-12 && (py - 0.35).abs() < 1e-12);
        let t = Shape::Triangle {
            vertices: [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        };
        assert!(t.contains(0.2, 0.2));
        assert!(!t.contains(0.6, 0.6));
        assert!((t.distance(1.0, 1.0) - 0.5f64.sqrt()).abs() < 1e-12);
        let r = Shape::Rect {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        };
        assert!((r.distance(2.0, 2.0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grid_background_interpolates() {
        let bg = Background::Grid {
            origin: [0.0, 0.0],
            h: 1.0,
            nx: 1,
            ny: 1,
            values: vec![1.0, 2.0, 3.0, 4.0],
        };
        assert!((bg.eval(0.5, 0.5) - 2.5).abs() < 1e-12);
        assert!((bg.eval(-5.0, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let d = DiscreteDomain::unit_square(16).unwrap();
        let a = Medium::new(d.clone(), SpeedModel::constant(1.0)).unwrap();
        let b = Medium::new(d, SpeedModel::constant(1.0).with_inclusion(disk(), 2.0)).unwrap();
        assert_eq!(a.model_hash(), a.model_hash());
        assert_ne!(a.model_hash(), b.model_hash());
    }
}
