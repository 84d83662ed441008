//! Boundary control: time operators, the operator `K`, the regularised control
//! equation and the resulting volume estimates.

pub mod kmatrix;
pub mod solve;
pub mod time_ops;

pub use kmatrix::{apply_k, assemble_k, KMatrix};
pub use solve::{
    alpha_schedule, estimate_volume, estimate_volume_scheduled, extrapolate, krylov_solve, project_tau, rhs_coefficients,
    AlphaSample, AlphaScale, AlphaSchedule, ControlMask, ControlProblem, KrylovMethod, Provenance, SolveDiagnostics,
    SolveOptions, VolumeCurve, VolumeEstimate, VolumeSample,
};
pub use time_ops::{op_i, op_i_adj, op_j, op_r};
