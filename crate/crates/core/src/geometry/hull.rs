//! Boundary distance hull and direction segments from boundary distances `r_Sigma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::eikonal::eikonal_distance;
use crate::geometry::region::RegionMask;
use crate::geometry::speed::{Medium, Metric};

fn check_radii(medium: &Medium, r_sigma: &[f64]) -> Result<()> {
    if r_sigma.len() != medium.domain.boundary_len() {
        return Err(Error::InvalidArgument(format!(
            "r_sigma has {} values for {} boundary nodes",
            r_sigma.len(),
            medium.domain.boundary_len()
        )));
    }
    if let Some(r) = r_sigma.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument(format!("r_sigma value {r} must be >= 0")));
    }
    Ok(())
}

/// `M \ U_y B^(y, r_Sigma(y))`, evaluated at cell centres.
///
/// The balls are open and live in the ambient plane: Euclidean for a constant
/// background, otherwise measured by fast marching on a grid extended beyond `M`.
pub fn boundary_distance_hull(background: &Medium, r_sigma: &[f64]) -> Result<RegionMask> {
    check_radii(background, r_sigma)?;
    let d = &background.domain;
    let density = background.cell_density(Metric::Background);
    let mut hull = RegionMask::empty(d, density);
    let active: Vec<(f64, f64, f64)> = d
        .boundary()
        .iter()
        .zip(r_sigma)
        .filter(|(_, &r)| r > 0.0)
        .map(|(b, &r)| (b.x, b.y, r))
        .collect();

    if let Some(c0) = background.model.background.is_constant() {
        for j in 0..d.ny {
            for i in 0..d.nx {
                let (x, y) = d.cell_center(i, j);
                let phi = active
                    .iter()
                    .map(|&(bx, by, r)| (x - bx).hypot(y - by) / c0 - r)
                    .fold(f64::INFINITY, f64::min);
                hull.inside[d.cell_index(i, j)] = phi >= 0.0;
            }
        }
        return Ok(hull);
    }

    if active.is_empty() {
        hull.inside.iter_mut().for_each(|b| *b = true);
        return Ok(hull);
    }
    let r_max = r_sigma.iter().cloned().fold(0.0, f64::max);
    let max_c0 = background.node_c0.iter().cloned().fold(0.0, f64::max);
    let margin = ((r_max * max_c0 / d.h).ceil() as usize + 2).min(d.nx.max(d.ny));
    let ext = d.extended(margin);
    let ext_medium = Medium::sample(ext.clone(), background.model.background_only())?;
    let seeds: Vec<(usize, f64)> = d
        .boundary()
        .iter()
        .zip(r_sigma)
        .map(|(b, &r)| (ext.node_index(b.i + margin, b.j + margin), -r))
        .collect();
    let field = eikonal_distance(&ext, &ext_medium.node_c0, &seeds)?;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let phi = field.cell_value(&ext, i + margin, j + margin);
            hull.inside[d.cell_index(i, j)] = phi >= 0.0;
        }
    }
    Ok(hull)
}

/// A boundary point with the direction and length of `r^ grad r^` pointing into `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub dir_x: f64,
    pub dir_y: f64,
    /// Travel-time length `r_Sigma(y)`.
    pub length: f64,
}

/// Direction segments from the boundary distance profile.
///
/// The tangential derivative of `r_Sigma` is read off the profile; the normal
/// component follows from `|grad r| = 1 / c0`. At corners the two one-sided
/// edge derivatives give the full gradient.
pub fn emit_segments(background: &Medium, r_sigma: &[f64]) -> Result<Vec<Segment>> {
    check_radii(background, r_sigma)?;
    let d = &background.domain;
    let n = d.boundary_len();
    let h = d.h;
    let at = |k: isize| r_sigma[k.rem_euclid(n as isize) as usize];
    let pos = |k: isize| {
        let b = d.boundary()[k.rem_euclid(n as isize) as usize];
        (b.x, b.y)
    };
    let mut out = Vec::with_capacity(n);
    for (k, b) in d.boundary().iter().enumerate() {
        let ki = k as isize;
        let c0 = background.node_c0[d.node_index(b.i, b.j)];
        let r = r_sigma[k];
        let dir = if b.corner {
            let (x0, y0) = pos(ki);
            let (xn, yn) = pos(ki + 1);
            let (xp, yp) = pos(ki - 1);
            let t_next = ((xn - x0) / h, (yn - y0) / h);
            let t_prev = ((xp - x0) / h, (yp - y0) / h);
            let g_next = (-3.0 * at(ki) + 4.0 * at(ki + 1) - at(ki + 2)) / (2.0 * h);
            let g_prev = (-3.0 * at(ki) + 4.0 * at(ki - 1) - at(ki - 2)) / (2.0 * h);
            let grad = (
                g_next * t_next.0 + g_prev * t_prev.0,
                g_next * t_next.1 + g_prev * t_prev.1,
            );
            let inward = (t_next.0 + t_prev.0, t_next.1 + t_prev.1);
            normalize((-grad.0, -grad.1)).unwrap_or_else(|| normalize(inward).unwrap())
        } else {
            let (t, n_in) = d.edge_frame(k);
            let g_t = (at(ki + 1) - at(ki - 1)) / (2.0 * h);
            let g_n = (1.0 / (c0 * c0) - g_t * g_t).max(0.0).sqrt();
            normalize((-g_t * t.0 + g_n * n_in.0, -g_t * t.1 + g_n * n_in.1)).unwrap_or(n_in)
        };
        out.push(Segment {
            s: b.s,
            x: b.x,
            y: b.y,
            dir_x: dir.0,
            dir_y: dir.1,
            length: r,
        });
    }
    Ok(out)
}

fn normalize(v: (f64, f64)) -> Option<(f64, f64)> {
    let n = v.0.hypot(v.1);
    (n > 1e-14).then(|| (v.0 / n, v.1 / n))
}

/// Exact `d(y, Sigma)` per boundary node for a constant background (Euclidean / c0).
pub fn exact_boundary_distances(medium: &Medium) -> Vec<f64> {
    let c0 = medium.model.background.is_constant().unwrap_or(1.0);
    medium
        .domain
        .boundary()
        .iter()
        .map(|b| medium.model.distance_to_inclusions(b.x, b.y) / c0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::DiscreteDomain;
    use crate::geometry::speed::{Background, Shape, SpeedModel};

    fn disk_medium(n: usize) -> Medium {
        let shape = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        };
        Medium::new(
            DiscreteDomain::unit_square(n).unwrap(),
            SpeedModel::constant(1.0).with_inclusion(shape, 2.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_radii_give_full_hull_and_zero_segments() {
        let m = disk_medium(32);
        let bg = m.background().unwrap();
        let zeros = vec![0.0; m.domain.boundary_len()];
        let hull = boundary_distance_hull(&bg, &zeros).unwrap();
        assert_eq!(hull.count(), m.domain.cell_count());
        let segs = emit_segments(&bg, &zeros).unwrap();
        assert!(segs.iter().all(|s| s.length == 0.0));
    }

    #[test]
    fn negative_radii_rejected() {
        let m = disk_medium(16);
        let mut r = vec![0.0; m.domain.boundary_len()];
        r[3] = -0.1;
        assert!(boundary_distance_hull(&m, &r).is_err());
    }

    #[test]
    fn segment_below_disk_points_up() {
        let m = disk_medium(64);
        let r = exact_boundary_distances(&m);
        let segs = emit_segments(&m.background().unwrap(), &r).unwrap();
        let k = m.domain.nearest_boundary(0.5, 0.0);
        let s = segs[k];
        let angle = s.dir_x.atan2(s.dir_y).abs();
        assert!(angle < 0.1, "angle {angle}");
        assert!((s.length - 0.35).abs() <= 3.0 * m.domain.h);
    }

    #[test]
    fn corner_segment_points_at_disk() {
        let m = disk_medium(64);
        let r = exact_boundary_distances(&m);
        let segs = emit_segments(&m.background().unwrap(), &r).unwrap();
        let s = segs[0];
        let expect = (1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt());
        assert!((s.dir_x - expect.0).abs() < 0.05 && (s.dir_y - expect.1).abs() < 0.05);
    }

    #[test]
    fn grid_background_matches_constant_hull() {
        let m = disk_medium(32);
        let r = exact_boundary_distances(&m);
        let n = m.domain.node_count();
        let grid_model = SpeedModel {
            background: Background::Grid {
                origin: [0.0, 0.0],
                h: m.domain.h,
                nx: 32,
                ny: 32,
                values: vec![1.0; n],
            },
            inclusions: vec![],
        };
        let gm = Medium::new(m.domain.clone(), grid_model).unwrap();
        let a = boundary_distance_hull(&m.background().unwrap(), &r).unwrap();
        let b = boundary_distance_hull(&gm, &r).unwrap();
        // first-order fast marching resolves the envelope of the balls to O(h)
        let differ = a.inside.iter().zip(&b.inside).filter(|(x, y)| x != y).count();
        assert!(differ < 64, "{differ} cells differ");
        for j in 0..32 {
            for i in 0..32 {
                let (x, y) = m.domain.cell_center(i, j);
                if (x - 0.5).hypot(y - 0.5) < 0.15 - 2.0 * m.domain.h {
                    assert!(b.get(i, j));
                }
            }
        }
    }
}
