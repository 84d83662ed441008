//! Hull and direction segments from a distance profile.

use crate::detect::profile::DistanceProfile;
use crate::error::{Error, Result};
use crate::geometry::hull::{boundary_distance_hull, emit_segments, Segment};
use crate::geometry::region::RegionMask;
use crate::geometry::speed::{Background, Medium};

/// Hull `M \ U B^(y, r_Sigma(y))` and the segments of length `r_Sigma(y)` along
/// the inward normals, using `background` for the balls and geodesics.
///
/// Pass a [`distorted`] background to image the hull in an assumed metric.
pub fn reconstruct_hull_and_segments(
    profile: &DistanceProfile,
    background: &Medium,
) -> Result<(RegionMask, Vec<Segment>)> {
    let r: Vec<f64> = profile
        .interpolate(&background.domain)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let hull = boundary_distance_hull(background, &r)?;
    let segments = emit_segments(background, &r)?;
    Ok((hull, segments))
}

/// Background of `medium` with metric `g0 = factor * g`, i.e. speed `c0 / sqrt(factor)`.
pub fn distorted(medium: &Medium, factor: f64) -> Result<Medium> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("metric factor {factor} must be positive")));
    }
    let s = factor.sqrt();
    let mut model = medium.model.background_only();
    model.background = match model.background {
        Background::Constant(c) => Background::Constant(c / s),
        Background::Grid {
            origin,
            h,
            nx,
            ny,
            values,
        } => Background::Grid {
            origin,
            h,
            nx,
            ny,
            values: values.into_iter().map(|c| c / s).collect(),
        },
    };
    Medium::sample(medium.domain.clone(), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::DiscreteDomain;
    use crate::geometry::hull::exact_boundary_distances;
    use crate::geometry::speed::{Shape, SpeedModel};

    fn disk(n: usize) -> (Medium, Shape) {
        let shape = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        };
        let m = Medium::new(
            DiscreteDomain::unit_square(n).unwrap(),
            SpeedModel::constant(1.0).with_inclusion(shape.clone(), 2.0),
        )
        .unwrap();
        (m, shape)
    }

    #[test]
    fn exact_profile_hull_contains_disk_and_stays_close() {
        let (m, shape) = disk(64);
        let d = &m.domain;
        let prof = DistanceProfile::exact(d, &exact_boundary_distances(&m));
        let (hull, segs) = reconstruct_hull_and_segments(&prof, &m.background().unwrap()).unwrap();
        assert_eq!(segs.len(), d.boundary_len());
        for j in 0..d.ny {
            for i in 0..d.nx {
                let (x, y) = d.cell_center(i, j);
                if shape.contains(x, y) {
                    assert!(hull.get(i, j), "cell ({i}, {j}) of the disk missing");
                }
                if hull.get(i, j) {
                    assert!(shape.distance(x, y) <= 3.0 * d.h, "cell ({i}, {j}) too far out");
                }
            }
        }
    }

    #[test]
    fn no_inclusion_profile_gives_empty_hull() {
        let (m, _) = disk(32);
        let prof = DistanceProfile::exact(&m.domain, &vec![1.0; m.domain.boundary_len()]);
        let (hull, _) = reconstruct_hull_and_segments(&prof, &m.background().unwrap()).unwrap();
        assert_eq!(hull.count(), 0);
    }

    #[test]
    fn distorted_hull_is_well_formed() {
        let (m, _) = disk(48);
        let prof = DistanceProfile::exact(&m.domain, &exact_boundary_distances(&m));
        let g0 = distorted(&m, 1.1).unwrap();
        assert!((g0.model.background.is_constant().unwrap() - 1.0 / 1.1f64.sqrt()).abs() < 1e-15);
        let (hull, segs) = reconstruct_hull_and_segments(&prof, &g0).unwrap();
        assert!(hull.count() > 0);
        assert!(segs.iter().all(|s| s.length.is_finite() && s.length >= 0.0));
        assert!(distorted(&m, 0.0).is_err());
    }
}
