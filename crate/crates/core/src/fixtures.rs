//! Reference media used by the tests, the self-test and the example configs.

use crate::error::Result;
use crate::geometry::domain::DiscreteDomain;
use crate::geometry::region::{TauDescriptor, TauFunction};
use crate::geometry::speed::{Medium, Shape, SpeedModel};

/// Disk of radius 0.15 at the centre of the unit square.
pub fn centered_disk() -> Shape {
    Shape::Disk {
        center: [0.5, 0.5],
        radius: 0.15,
    }
}

/// Unit square, `c0 = 1`, one centred disk with the given contrast.
pub fn disk_model(contrast: f64) -> SpeedModel {
    SpeedModel::constant(1.0).with_inclusion(centered_disk(), contrast)
}

pub fn disk_medium(n: usize, contrast: f64) -> Result<Medium> {
    Medium::new(DiscreteDomain::unit_square(n)?, disk_model(contrast))
}

pub fn empty_medium(n: usize) -> Result<Medium> {
    Medium::new(DiscreteDomain::unit_square(n)?, SpeedModel::constant(1.0))
}

/// Two disks of different size, off the diagonal.
pub fn two_disk_model(contrast: f64) -> SpeedModel {
    SpeedModel::constant(1.0)
        .with_inclusion(
            Shape::Disk {
                center: [0.35, 0.6],
                radius: 0.1,
            },
            contrast,
        )
        .with_inclusion(
            Shape::Disk {
                center: [0.65, 0.4],
                radius: 0.08,
            },
            contrast,
        )
}

pub fn two_disk_medium(n: usize, contrast: f64) -> Result<Medium> {
    Medium::new(DiscreteDomain::unit_square(n)?, two_disk_model(contrast))
}

/// Tangent-disk probe: `tau = 0.35` everywhere reaches exactly the top of the
/// disk of radius 0.15 centred at `(0.5, 0.5)` from the bottom edge.
pub const TANGENT_TAU: f64 = 0.35;

/// Half-width of the thin triangle in the slow-layer example.
pub fn triangle_half_angle() -> f64 {
    0.1
}

/// Layer `y < 0` plus a thin triangle with apex `(0, 1)` on top of it, all
/// with contrast 2, in the box `[-3, 3] x [-3, 2]`.
///
/// With `tau(y) = max(0, y)` on the boundary the fast region lets `M~(tau)`
/// outgrow `M(tau)` in measure even though its volume density is smaller.
pub fn triangle_example(nx: usize) -> Result<(Medium, TauFunction)> {
    let d = DiscreteDomain::new((-3.0, -3.0), 6.0, 5.0, nx)?;
    let a = triangle_half_angle().tan();
    let model = SpeedModel::constant(1.0)
        .with_inclusion(
            Shape::Rect {
                min: [-2.5, -2.5],
                max: [2.5, 0.0],
            },
            2.0,
        )
        .with_inclusion(
            Shape::Triangle {
                vertices: [[-a, 0.0], [a, 0.0], [0.0, 1.0]],
            },
            2.0,
        );
    let m = Medium::new(d.clone(), model)?;
    let vals = d.boundary().iter().map(|b| b.y.max(0.0)).collect();
    let tau = TauFunction::new(vals, TauDescriptor::Custom, 2.0)?;
    Ok((m, tau))
}
