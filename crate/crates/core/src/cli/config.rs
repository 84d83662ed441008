//! Experiment configuration: a single JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AlphaSchedule, SolveOptions};
use crate::detect::{LocateOptions, SmoothnessOptions, TolVol};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::forward::basis::BasisSpec;
use crate::forward::signal::TimeGrid;
use crate::geometry::domain::DiscreteDomain;
use crate::geometry::region::Quadrature;
use crate::geometry::speed::{Background, Inclusion, Medium, SpeedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub grid: GridConfig,
    pub speed: SpeedConfig,
    pub time: TimeConfig,
    pub basis: BasisSpec,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default)]
    pub volumes: VolumesConfig,
    #[serde(default)]
    pub io: IoConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

/// `c0` as a constant or as a JSON file holding a gridded background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum C0Spec {
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedConfig {
    pub c0: C0Spec,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default)]
    pub alpha: AlphaSchedule,
    #[serde(default)]
    pub solver: SolveOptions,
}

/// Where the volume data for detection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeProvenance {
    /// Boundary control on simulated measurements.
    Control,
    /// Travel-time geometry, no wave solves.
    Oracle,
    /// Exact distances, only meaningful for `hull`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TolVolMode {
    Fixed(TolVol),
    /// `factor` times the largest gap on a run without inclusion, floored at `floor`.
    Calibrated { factor: f64, floor: TolVol },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectMethod {
    KnownBackground,
    UnknownBackground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub method: DetectMethod,
    pub source: VolumeProvenance,
    pub r_max: f64,
    pub r_step: f64,
    pub tol_r: f64,
    pub tol_vol: TolVolMode,
    /// Boundary samples at equal arc spacing.
    pub n_samples: usize,
    pub quadrature: Quadrature,
    pub smoothness: SmoothnessOptions,
    /// Metric factor of an assumed background `g0 = factor * g` for the hull; 1 uses the true one.
    pub hull_metric_factor: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            method: DetectMethod::KnownBackground,
            source: VolumeProvenance::Control,
            r_max: 0.8,
            r_step: 0.025,
            tol_r: 0.005,
            tol_vol: TolVolMode::Calibrated {
                factor: 3.0,
                floor: TolVol { abs: 1e-4, rel: 5e-4 },
            },
            n_samples: 32,
            quadrature: Quadrature::Fractional,
            smoothness: SmoothnessOptions {
                r_max: 0.8,
                ..SmoothnessOptions::default()
            },
            hull_metric_factor: 1.0,
        }
    }
}

impl DetectConfig {
    pub fn locate_options(&self, tol: TolVol) -> LocateOptions {
        LocateOptions {
            r_max: self.r_max,
            r_step: self.r_step,
            tol_r: self.tol_r,
            tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TauSpec {
    /// `tau = r` everywhere.
    Constant,
    /// `tau = (r - d^(x, y))_+` from the boundary node nearest `x`.
    Cone { x: [f64; 2] },
    /// `r` on a patch around `x`, `h` elsewhere.
    Spike { x: [f64; 2], h: f64, half_width: f64 },
}

impl TauSpec {
    pub fn label(&self) -> &'static str {
        match self {
            TauSpec::Constant => "constant",
            TauSpec::Cone { .. } => "cone",
            TauSpec::Spike { .. } => "spike",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumesConfig {
    pub tau: TauSpec,
    pub r_values: Vec<f64>,
}

impl Default for VolumesConfig {
    fn default() -> Self {
        Self {
            tau: TauSpec::Constant,
            r_values: vec![0.1, 0.2, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub out_dir: PathBuf,
    /// Prefix to store the assembled operator under.
    pub store: Option<PathBuf>,
    /// Prefix to load a stored operator from instead of simulating.
    pub load: Option<PathBuf>,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            store: None,
            load: None,
        }
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    /// 64 x 64 unit square, centred disk with the given contrast, `T = 1.5`, CFL 0.5, 32 x 96 basis.
    pub fn desk(contrast: f64) -> Self {
        let inclusions = if contrast == 1.0 {
            Vec::new()
        } else {
            fixtures::disk_model(contrast).inclusions
        };
        Self {
            seed: default_seed(),
            grid: GridConfig {
                nx: 64,
                ny: 64,
                lx: 1.0,
                ly: 1.0,
                origin: [0.0, 0.0],
            },
            speed: SpeedConfig {
                c0: C0Spec::Constant(1.0),
                inclusions,
            },
            time: TimeConfig { t_final: 1.5, cfl: 0.5 },
            basis: BasisSpec { n_patch: 32, n_bin: 96 },
            control: ControlConfig::default(),
            detect: DetectConfig::default(),
            volumes: VolumesConfig::default(),
            io: IoConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx < 4 || g.ny < 4 {
            return Err(Error::config("grid", "needs at least 4 cells per side"));
        }
        positive("grid.lx", g.lx)?;
        positive("grid.ly", g.ly)?;
        let h = g.lx / g.nx as f64;
        if ((g.ly / h).round() as usize) != g.ny || (g.ny as f64 * h - g.ly).abs() > 1e-9 * g.ly {
            return Err(Error::config("grid.ny", "cells must be square: ly / ny must equal lx / nx"));
        }
        if let C0Spec::Constant(c) = self.speed.c0 {
            positive("speed.c0.constant", c)?;
        }
        for (k, inc) in self.speed.inclusions.iter().enumerate() {
            positive(&format!("speed.inclusions[{k}].contrast"), inc.contrast)?;
        }
        positive("time.T", self.time.t_final)?;
        positive("time.cfl", self.time.cfl)?;
        if self.basis.n_patch == 0 {
            return Err(Error::config("basis.n_patch", "must be positive"));
        }
        if self.basis.n_bin == 0 {
            return Err(Error::config("basis.n_bin", "must be positive"));
        }
        positive("control.solver.tol", self.control.solver.tol)?;
        if self.control.alpha.exponents.is_empty() {
            return Err(Error::config("control.alpha.exponents", "must not be empty"));
        }
        let d = &self.detect;
        positive("detect.r_max", d.r_max)?;
        positive("detect.r_step", d.r_step)?;
        positive("detect.tol_r", d.tol_r)?;
        positive("detect.smoothness.delta", d.smoothness.delta)?;
        positive("detect.hull_metric_factor", d.hull_metric_factor)?;
        if d.n_samples == 0 {
            return Err(Error::config("detect.n_samples", "must be positive"));
        }
        if d.smoothness.eps_list.len() < 3 {
            return Err(Error::config("detect.smoothness.eps_list", "needs at least 3 values"));
        }
        match d.tol_vol {
            TolVolMode::Fixed(t) | TolVolMode::Calibrated { floor: t, .. } => {
                if !(t.abs >= 0.0 && t.rel >= 0.0) {
                    return Err(Error::config("detect.tol_vol", "tolerances must be non-negative"));
                }
            }
        }
        if let TolVolMode::Calibrated { factor, .. } = d.tol_vol {
            positive("detect.tol_vol.calibrated.factor", factor)?;
        }
        if self.volumes.r_values.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::config("volumes.r_values", "must be non-negative"));
        }
        Ok(())
    }

    /// Extra checks for `locate` and `hull`: a fast inclusion and radii the observation time covers.
    pub fn validate_detection(&self) -> Result<()> {
        if self.speed.inclusions.iter().any(|i| i.contrast <= 1.0) {
            return Err(Error::config(
                "speed.inclusions",
                "detection needs contrast > 1 for every inclusion",
            ));
        }
        let t = self.time.t_final;
        if self.detect.r_max > t {
            return Err(Error::config(
                "detect.r_max",
                format!("must not exceed T = {t} so that tau_r is never clipped"),
            ));
        }
        if self.detect.smoothness.r_max > t {
            return Err(Error::config("detect.smoothness.r_max", format!("must not exceed T = {t}")));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DiscreteDomain> {
        let g = &self.grid;
        DiscreteDomain::new((g.origin[0], g.origin[1]), g.lx, g.ly, g.nx)
            .map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn speed_model(&self) -> Result<SpeedModel> {
        let background = match &self.speed.c0 {
            C0Spec::Constant(c) => Background::Constant(*c),
            C0Spec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::config("speed.c0.file", format!("{}: {e}", path.display())))?;
                let bg: Background = serde_json::from_str(&text)
                    .map_err(|e| Error::config("speed.c0.file", e.to_string()))?;
                bg
            }
        };
        Ok(SpeedModel {
            background,
            inclusions: self.speed.inclusions.clone(),
        })
    }

    pub fn medium(&self) -> Result<Medium> {
        let model = self.speed_model()?;
        model
            .validate()
            .map_err(|e| Error::config("speed", e.to_string()))?;
        Medium::new(self.domain()?, model).map_err(|e| Error::config("speed", e.to_string()))
    }

    /// Time grid resolving the fastest speed of `medium` at the configured CFL number.
    pub fn time_grid(&self, medium: &Medium) -> Result<TimeGrid> {
        TimeGrid::new(
            self.time.t_final,
            self.time.cfl * medium.domain.h / medium.max_speed(),
            self.basis.n_bin,
        )
    }
}
