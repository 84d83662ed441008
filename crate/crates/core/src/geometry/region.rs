//! Domains of influence `M(tau)`, `M~(tau)` and their volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::domain::DiscreteDomain;
use crate::geometry::eikonal::{boundary_seeds, eikonal_distance, DistanceField, MetricTag};
use crate::geometry::speed::{Medium, Metric};

/// How a [`TauFunction`] was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauDescriptor {
    Constant { s: f64 },
    /// `r - d^(x, y)` clipped at zero, `x` a boundary node.
    Cone { center: usize, r: f64 },
    /// `r` on the boundary patch around `center`, `h` elsewhere.
    Spike { center: usize, r: f64, h: f64 },
    Custom,
}

/// A travel-time budget per boundary node, an element of `C_T(dM)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauFunction {
    pub values: Vec<f64>,
    pub descriptor: TauDescriptor,
}

impl TauFunction {
    /// Values are clipped into `[0, t_max]`.
    pub fn new(mut values: Vec<f64>, descriptor: TauDescriptor, t_max: f64) -> Result<Self> {
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("tau value {v} not finite")));
            }
            *v = v.clamp(0.0, t_max);
        }
        Ok(Self { values, descriptor })
    }

    pub fn constant(domain: &DiscreteDomain, s: f64, t_max: f64) -> Result<Self> {
        Self::new(
            vec![s; domain.boundary_len()],
            TauDescriptor::Constant { s },
            t_max,
        )
    }

    /// `tau_r(y) = r - d^(x, y)` given the ambient distances from `x`.
    pub fn cone(center: usize, r: f64, ambient_from_center: &[f64], t_max: f64) -> Result<Self> {
        let values = ambient_from_center.iter().map(|d| r - d).collect();
        Self::new(values, TauDescriptor::Cone { center, r }, t_max)
    }

    /// `r` on the nodes listed in `patch`, `h` elsewhere.
    pub fn spike(
        domain: &DiscreteDomain,
        center: usize,
        patch: &[usize],
        r: f64,
        h: f64,
        t_max: f64,
    ) -> Result<Self> {
        let mut values = vec![h; domain.boundary_len()];
        for &k in patch {
            values[k] = r;
        }
        Self::new(values, TauDescriptor::Spike { center, r, h }, t_max)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Pointwise `tau + eps`, clipped.
    pub fn shifted(&self, eps: f64, t_max: f64) -> Result<Self> {
        Self::new(
            self.values.iter().map(|v| v + eps).collect(),
            TauDescriptor::Custom,
            t_max,
        )
    }
}

/// Cell indicator with the density of the volume measure it is integrated against.
#[derive(Debug, Clone)]
pub struct RegionMask {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub inside: Vec<bool>,
    pub density: Vec<f64>,
}

impl RegionMask {
    pub fn empty(domain: &DiscreteDomain, density: Vec<f64>) -> Self {
        Self {
            nx: domain.nx,
            ny: domain.ny,
            h: domain.h,
            inside: vec![false; domain.cell_count()],
            density,
        }
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.inside
            .iter()
            .zip(&other.inside)
            .all(|(&a, &b)| !a || b)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.inside[j * self.nx + i]
    }

    /// Same cells, integrated against another density.
    pub fn with_density(&self, density: Vec<f64>) -> Self {
        Self {
            density,
            ..self.clone()
        }
    }
}

/// Sum of `density * h^2` over the cells of the mask.
pub fn region_volume(mask: &RegionMask) -> f64 {
    let h2 = mask.h * mask.h;
    mask.inside
        .iter()
        .zip(&mask.density)
        .filter(|(&b, _)| b)
        .map(|(_, &d)| d)
        .sum::<f64>()
        * h2
}

/// Volume quadrature for `{phi <= 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Cell-centre indicator.
    CellCenter,
    /// Exact area of the piecewise-linear level set on two triangles per cell.
    Fractional,
}

/// Multi-source eikonal solve with seeds `-tau(y)`.
pub fn influence_field(medium: &Medium, metric: Metric, tau: &TauFunction) -> Result<DistanceField> {
    let d = &medium.domain;
    if tau.values.len() != d.boundary_len() {
        return Err(Error::InvalidArgument(format!(
            "tau has {} values for {} boundary nodes",
            tau.values.len(),
            d.boundary_len()
        )));
    }
    let mut f = eikonal_distance(d, medium.node_speed(metric), &boundary_seeds(d, &tau.values))?;
    f.metric = MetricTag::from(metric);
    Ok(f)
}

/// `M(tau)` (background metric) or `M~(tau)` (inclusion metric) as a cell mask.
pub fn domain_of_influence(medium: &Medium, metric: Metric, tau: &TauFunction) -> Result<RegionMask> {
    let field = influence_field(medium, metric, tau)?;
    Ok(mask_from_field(&medium.domain, &field, medium.cell_density(metric)))
}

/// Cells whose centre value is `<= 0`.
pub fn mask_from_field(domain: &DiscreteDomain, field: &DistanceField, density: Vec<f64>) -> RegionMask {
    let mut mask = RegionMask::empty(domain, density);
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            mask.inside[domain.cell_index(i, j)] = field.cell_value(domain, i, j) <= 0.0;
        }
    }
    mask
}

/// Volume of `{phi <= 0}` under the given density.
pub fn field_volume(domain: &DiscreteDomain, field: &DistanceField, density: &[f64], quad: Quadrature) -> f64 {
    let h2 = domain.h * domain.h;
    let mut total = 0.0;
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let c = domain.cell_index(i, j);
            let frac = match quad {
                Quadrature::CellCenter => {
                    if field.cell_value(domain, i, j) <= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Quadrature::Fractional => {
                    let p00 = field.at(domain, i, j);
                    let p10 = field.at(domain, i + 1, j);
                    let p01 = field.at(domain, i, j + 1);
                    let p11 = field.at(domain, i + 1, j + 1);
                    0.5 * (triangle_fraction(p00, p10, p11) + triangle_fraction(p00, p11, p01))
                }
            };
            total += frac * density[c];
        }
    }
    total * h2
}

/// Fraction of a triangle where the linear interpolant of the vertex values is `<= 0`.
pub fn triangle_fraction(a: f64, b: f64, c: f64) -> f64 {
    let neg = [a <= 0.0, b <= 0.0, c <= 0.0];
    let count = neg.iter().filter(|&&n| n).count();
    match count {
        0 => 0.0,
        3 => 1.0,
        _ => {
            // isolate the vertex on the minority side
            let v = [a, b, c];
            let lone_neg = count == 1;
            let k = (0..3).find(|&k| neg[k] == lone_neg).unwrap();
            let (p, q, r) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
            let corner = (p * p) / ((p - q) * (p - r));
            if lone_neg {
                corner
            } else {
                1.0 - corner
            }
        }
    }
}

/// `m(M(tau))` or `m~(M~(tau))`.
pub fn influence_volume(medium: &Medium, metric: Metric, tau: &TauFunction, quad: Quadrature) -> Result<f64> {
    let field = influence_field(medium, metric, tau)?;
    Ok(field_volume(
        &medium.domain,
        &field,
        &medium.cell_density(metric),
        quad,
    ))
}

/// Ambient background distances `d^(x, y)` from boundary node `center` to every boundary node.
///
/// Constant backgrounds use the Euclidean formula; otherwise fast marching runs
/// on a grid extended by an outer collar so that geodesics may leave `M`.
pub fn ambient_boundary_distances(medium: &Medium, center: usize) -> Result<Vec<f64>> {
    let d = &medium.domain;
    let x = d.boundary()[center];
    if let Some(c0) = medium.model.background.is_constant() {
        return Ok(d
            .boundary()
            .iter()
            .map(|y| (y.x - x.x).hypot(y.y - x.y) / c0)
            .collect());
    }
    let margin = (d.nx.max(d.ny) / 4).max(4);
    let ext = d.extended(margin);
    let ext_medium = Medium::sample(ext.clone(), medium.model.background_only())?;
    let seed = ext.node_index(x.i + margin, x.j + margin);
    let field = eikonal_distance(&ext, &ext_medium.node_c0, &[(seed, 0.0)])?;
    Ok(d
        .boundary()
        .iter()
        .map(|y| field.phi[ext.node_index(y.i + margin, y.j + margin)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::speed::{Shape, SpeedModel};

    fn square(n: usize) -> Medium {
        Medium::new(DiscreteDomain::unit_square(n).unwrap(), SpeedModel::constant(1.0)).unwrap()
    }

    #[test]
    fn zero_tau_gives_vanishing_volume() {
        let m = square(64);
        let tau = TauFunction::constant(&m.domain, 0.0, 1.5).unwrap();
        let mask = domain_of_influence(&m, Metric::Background, &tau).unwrap();
        assert!(region_volume(&mask) <= 4.0 * m.domain.h);
    }

    #[test]
    fn boundary_offset_area() {
        let m = square(64);
        let tau = TauFunction::constant(&m.domain, 0.1, 1.5).unwrap();
        let v = region_volume(&domain_of_influence(&m, Metric::Background, &tau).unwrap());
        assert!((v - 0.36).abs() <= 5.0 * m.domain.h, "{v}");
        let vf = influence_volume(&m, Metric::Background, &tau, Quadrature::Fractional).unwrap();
        assert!((vf - 0.36).abs() <= 5.0 * m.domain.h, "{vf}");
    }

    #[test]
    fn large_tau_covers_everything() {
        let m = square(32);
        let tau = TauFunction::constant(&m.domain, 1.5, 1.5).unwrap();
        let mask = domain_of_influence(&m, Metric::Background, &tau).unwrap();
        assert_eq!(mask.count(), m.domain.cell_count());
        assert!((region_volume(&mask) - m.total_volume(Metric::Background)).abs() < 1e-12);
    }

    #[test]
    fn full_square_volumes() {
        let d = DiscreteDomain::unit_square(64).unwrap();
        let m = Medium::new(d.clone(), SpeedModel::constant(1.0)).unwrap();
        let mut full = RegionMask::empty(&d, m.cell_density(Metric::Background));
        full.inside.iter_mut().for_each(|b| *b = true);
        assert!((region_volume(&full) - 1.0).abs() <= 2.0 * d.h);
        assert_eq!(region_volume(&RegionMask::empty(&d, m.cell_density(Metric::Background))), 0.0);

        let disk = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        };
        let mi = Medium::new(d.clone(), SpeedModel::constant(1.0).with_inclusion(disk, 2.0)).unwrap();
        let full = full.with_density(mi.cell_density(Metric::Inclusion));
        let a = std::f64::consts::PI * 0.15 * 0.15;
        let expect = 1.0 - a + a / 4.0;
        assert!((region_volume(&full) - expect).abs() <= 5.0 * d.h);
    }

    #[test]
    fn triangle_fraction_cases() {
        assert_eq!(triangle_fraction(1.0, 1.0, 1.0), 0.0);
        assert_eq!(triangle_fraction(-1.0, -1.0, -1.0), 1.0);
        // lone negative vertex at half distance along both edges -> quarter area
        assert!((triangle_fraction(-1.0, 1.0, 1.0) - 0.25).abs() < 1e-12);
        assert!((triangle_fraction(1.0, -1.0, -1.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cone_distances_are_euclidean_for_constant_background() {
        let m = square(16);
        let k = m.domain.nearest_boundary(0.5, 0.0);
        let dist = ambient_boundary_distances(&m, k).unwrap();
        let far = m.domain.nearest_boundary(0.5, 1.0);
        assert!((dist[far] - 1.0).abs() < 1e-12);
        assert_eq!(dist[k], 0.0);
    }
}
