//! Forward model: leapfrog wave solver, boundary signals and the operator `Lambda_2T`.

pub mod basis;
pub mod lambda;
pub mod signal;
pub mod solver;

pub use basis::{BasisSpec, SourceBasis};
pub use lambda::{assemble_lambda_matrix, LambdaHeader, LambdaMode, LambdaOperator, PatchResponses};
pub use signal::{BoundarySignal, SignalSpace, TimeGrid};
pub use solver::{Record, WaveOutput, WaveSolver, CFL_STABILITY_LIMIT};
