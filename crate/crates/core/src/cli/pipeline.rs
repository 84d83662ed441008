//! Wiring shared by the subcommands and the self-test.

use std::path::Path;

use serde::Serialize;

use crate::cli::config::{DetectMethod, ExperimentConfig, TolVolMode, VolumeProvenance};
use crate::control::assemble_k;
use crate::detect::{
    calibrate, sample_nodes, scan_boundary_known_bg, scan_boundary_unknown_bg, ControlPair,
    ControlVolume, DistanceProfile, OraclePair, OracleVolume, TolVol, VolumePair,
};
use crate::error::Result;
use crate::forward::lambda::{assemble_lambda_matrix, LambdaOperator};
use crate::forward::signal::TimeGrid;
use crate::geometry::eikonal::eikonal_distance;
use crate::geometry::hull::exact_boundary_distances;
use crate::geometry::region::{ambient_boundary_distances, TauFunction};
use crate::geometry::speed::{Medium, Metric};

/// Where the measured operator comes from and where a simulated one goes.
#[derive(Debug, Clone, Copy, Default)]
pub struct OperatorIo<'a> {
    pub load: Option<&'a Path>,
    pub store: Option<&'a Path>,
}

/// Measured operator: loaded when `io.load` is given, otherwise simulated and
/// stored under `io.store` if set.
pub fn measured_lambda(cfg: &ExperimentConfig, medium: &Medium, time: TimeGrid, io: OperatorIo) -> Result<LambdaOperator> {
    match io.load {
        Some(prefix) => LambdaOperator::load(prefix, medium, time, cfg.time.cfl, cfg.basis),
        None => {
            let lam = assemble_lambda_matrix(medium, time, cfg.time.cfl, cfg.basis)?;
            if let Some(prefix) = io.store {
                lam.store(prefix)?;
            }
            Ok(lam)
        }
    }
}

/// Measured and background operators on the time grid of the measured medium.
pub fn control_pair(cfg: &ExperimentConfig, medium: &Medium, io: OperatorIo) -> Result<ControlPair> {
    let time = cfg.time_grid(medium)?;
    let measured = measured_lambda(cfg, medium, time, io)?;
    let background = assemble_lambda_matrix(&medium.background()?, time, cfg.time.cfl, cfg.basis)?;
    ControlPair::new(&measured, &background, cfg.control.alpha.clone(), cfg.control.solver)
}

/// Cones from four boundary points at radii up to `r_max`.
fn calibration_taus(background: &Medium, r_max: f64, t_max: f64) -> Result<Vec<TauFunction>> {
    let mut out = Vec::new();
    for node in sample_nodes(&background.domain, 4) {
        let amb = ambient_boundary_distances(background, node)?;
        for k in 1..=4 {
            out.push(TauFunction::cone(node, r_max * k as f64 / 4.0, &amb, t_max)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerance {
    pub tol: TolVol,
    /// Largest gap on the calibration run, when one was made.
    pub calibration_gap: Option<f64>,
}

/// Volume tolerance from the config; calibration reruns the pair on a medium without inclusion.
pub fn tolerance(cfg: &ExperimentConfig, medium: &Medium) -> Result<Tolerance> {
    match cfg.detect.tol_vol {
        TolVolMode::Fixed(tol) => Ok(Tolerance {
            tol,
            calibration_gap: None,
        }),
        TolVolMode::Calibrated { factor, floor } => {
            let bg = medium.background()?;
            let pair: Box<dyn VolumePair> = match cfg.detect.source {
                VolumeProvenance::Control => {
                    let time = cfg.time_grid(medium)?;
                    let lam = assemble_lambda_matrix(&bg, time, cfg.time.cfl, cfg.basis)?;
                    Box::new(ControlPair::new(&lam, &lam, cfg.control.alpha.clone(), cfg.control.solver)?)
                }
                _ => Box::new(OraclePair {
                    medium: bg.clone(),
                    quad: cfg.detect.quadrature,
                }),
            };
            let taus = calibration_taus(&bg, cfg.detect.r_max, cfg.time.t_final)?;
            let gap = calibrate(pair.as_ref(), &taus)?;
            Ok(Tolerance {
                tol: TolVol {
                    abs: floor.abs.max(factor * gap),
                    rel: floor.rel,
                },
                calibration_gap: Some(gap),
            })
        }
    }
}

/// True `d(y, Sigma)` at boundary node `node` in the background metric.
pub fn true_distance(medium: &Medium, node: usize) -> Result<f64> {
    if medium.model.background.is_constant().is_some() {
        return Ok(exact_boundary_distances(medium)[node]);
    }
    let d = &medium.domain;
    let b = d.boundary()[node];
    let field = eikonal_distance(d, medium.node_speed(Metric::Background), &[(d.node_index(b.i, b.j), 0.0)])?;
    Ok(field
        .phi
        .iter()
        .zip(&medium.node_sigma)
        .filter(|(_, &s)| s)
        .map(|(p, _)| *p)
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    pub node: usize,
    pub s: f64,
    /// `None` without inclusion.
    pub r_true: Option<f64>,
    pub r_est: f64,
    pub error: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocateSummary {
    pub method: DetectMethod,
    pub source: VolumeProvenance,
    pub n_samples: usize,
    pub tolerance: Option<Tolerance>,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub lipschitz_violations: usize,
    pub points: Vec<PointSummary>,
}

/// Boundary scan as configured, compared against the true distances.
pub fn locate_profile(cfg: &ExperimentConfig, medium: &Medium, io: OperatorIo) -> Result<(DistanceProfile, LocateSummary)> {
    let bg = medium.background()?;
    let d = &medium.domain;
    let nodes = sample_nodes(d, cfg.detect.n_samples);
    let t_max = cfg.time.t_final;
    let mut tolerance_used = None;
    let mut profile = match (cfg.detect.method, cfg.detect.source) {
        (_, VolumeProvenance::Exact) => {
            let exact = exact_or_marched(medium)?;
            let mut p = DistanceProfile::exact(d, &exact);
            p.entries.retain(|e| nodes.contains(&e.node));
            p
        }
        (DetectMethod::KnownBackground, source) => {
            let tol = tolerance(cfg, medium)?;
            let opts = cfg.detect.locate_options(tol.tol);
            tolerance_used = Some(tol);
            let pair: Box<dyn VolumePair> = match source {
                VolumeProvenance::Control => Box::new(control_pair(cfg, medium, io)?),
                _ => Box::new(OraclePair {
                    medium: medium.clone(),
                    quad: cfg.detect.quadrature,
                }),
            };
            scan_boundary_known_bg(pair.as_ref(), &bg, &nodes, t_max, &opts)?
        }
        (DetectMethod::UnknownBackground, VolumeProvenance::Control) => {
            let time = cfg.time_grid(medium)?;
            let lam = measured_lambda(cfg, medium, time, io)?;
            let source = ControlVolume {
                k: assemble_k(&lam)?,
                basis: lam.basis().clone(),
                schedule: cfg.control.alpha.clone(),
                opts: cfg.control.solver,
            };
            scan_boundary_unknown_bg(&source, d, &nodes, t_max, &cfg.detect.smoothness)?
        }
        (DetectMethod::UnknownBackground, _) => {
            let source = OracleVolume {
                medium: medium.clone(),
                metric: Metric::Inclusion,
                quad: cfg.detect.quadrature,
            };
            scan_boundary_unknown_bg(&source, d, &nodes, t_max, &cfg.detect.smoothness)?
        }
    };
    let lipschitz_violations = profile.mark_lipschitz(&bg, 2.0 * cfg.detect.tol_r.max(d.h))?;
    let points = profile
        .entries
        .iter()
        .map(|e| {
            let r_true = Some(true_distance(medium, e.node)?).filter(|r| r.is_finite());
            Ok(PointSummary {
                node: e.node,
                s: e.s,
                r_true,
                r_est: e.r,
                error: r_true.map(|t| e.r - t),
                flags: e.flags.iter().map(|f| f.as_str().to_string()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = points.len().max(1) as f64;
    let summary = LocateSummary {
        method: cfg.detect.method,
        source: cfg.detect.source,
        n_samples: points.len(),
        tolerance: tolerance_used,
        max_abs_error: points.iter().filter_map(|p| p.error).fold(0.0, |m, e| m.max(e.abs())),
        mean_abs_error: points.iter().filter_map(|p| p.error).map(f64::abs).sum::<f64>() / n,
        lipschitz_violations,
        points,
    };
    Ok((profile, summary))
}

/// True distances at every boundary node.
pub fn exact_or_marched(medium: &Medium) -> Result<Vec<f64>> {
    if medium.model.background.is_constant().is_some() {
        return Ok(exact_boundary_distances(medium));
    }
    (0..medium.domain.boundary_len())
        .map(|k| true_distance(medium, k))
        .collect()
}
