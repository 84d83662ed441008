//! Ground-truth travel-time geometry: distances, domains of influence, volumes and hulls.

pub mod domain;
pub mod eikonal;
pub mod hull;
pub mod probe;
pub mod region;
pub mod speed;

pub use domain::{BoundaryNode, DiscreteDomain};
pub use eikonal::{eikonal_distance, DistanceField, MetricTag};
pub use hull::{boundary_distance_hull, emit_segments, exact_boundary_distances, Segment};
pub use probe::{epsilon_scaling_probe, ProbeOutcome, ProbeResult};
pub use region::{
    ambient_boundary_distances, domain_of_influence, influence_field, influence_volume,
    region_volume, Quadrature, RegionMask, TauDescriptor, TauFunction,
};
pub use speed::{Background, Inclusion, Medium, Metric, Shape, SpeedModel};
