//! From volume data to inclusion geometry: boundary distances, smoothness breakdown, hull.

pub mod locate;
pub mod profile;
pub mod reconstruct;
pub mod smoothness;
pub mod volumes;

pub use locate::{calibrate, locate_known_bg, Flag, LocateOptions, Located, TolVol};
pub use profile::{
    sample_nodes, scan_boundary_known_bg, scan_boundary_unknown_bg, DistanceProfile, Method,
    ProfileEntry,
};
pub use reconstruct::{distorted, reconstruct_hull_and_segments};
pub use smoothness::{
    divergence_slope, smoothness_test_unknown_bg, spike_patch, ControlVolume, OffsetScan,
    OracleVolume, SmoothnessOptions, SmoothnessResult, VolumeSource,
};
pub use volumes::{ControlPair, OraclePair, PairSample, VolumePair};
