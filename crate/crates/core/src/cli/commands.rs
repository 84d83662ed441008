//! Subcommands. Each reads the config, runs its stage and writes its outputs at the end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cli::config::{ExperimentConfig, TauSpec, VolumeProvenance};
use crate::cli::pipeline::{exact_or_marched, locate_profile, measured_lambda, OperatorIo};
use crate::cli::selftest::run_all;
use crate::control::{assemble_k, estimate_volume_scheduled, Provenance, VolumeCurve, VolumeSample};
use crate::detect::{distorted, reconstruct_hull_and_segments, spike_patch, DistanceProfile};
use crate::error::{Error, Result};
use crate::forward::signal::BoundarySignal;
use crate::geometry::probe::{epsilon_scaling_probe, ProbeResult};
use crate::geometry::region::{ambient_boundary_distances, influence_volume, TauFunction};
use crate::geometry::speed::{Medium, Metric};
use crate::io::{segments_csv, volume_curve_csv, write_field, write_pgm, FieldHeader};

#[derive(Debug, Parser)]
#[command(name = "bcm", version, about = "Inclusion detection from simulated boundary measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate and store the Neumann-to-Dirichlet operator, plus a sample trace.
    Forward(CommonArgs),
    /// Control-estimated and oracle volumes for the configured tau family.
    Volumes(CommonArgs),
    /// Boundary distance profile and error summary.
    Locate(CommonArgs),
    /// Boundary distance hull and direction segments.
    Hull(CommonArgs),
    /// Pure geometry: volumes, eps-scaling probe and the exact hull.
    Oracle(CommonArgs),
    /// Run the acceptance suite and write a pass/fail report.
    Selftest(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON). Defaults to the 64 x 64 disk fixture.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prefix to store the simulated operator under.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Prefix of a stored operator to use instead of simulating.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Forward(a)
            | Command::Volumes(a)
            | Command::Locate(a)
            | Command::Hull(a)
            | Command::Oracle(a)
            | Command::Selftest(a) => a,
        }
    }
}

/// What a finished subcommand reports back to `main`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Done,
    SelftestFailed,
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    store: Option<PathBuf>,
    load: Option<PathBuf>,
}

impl Context {
    fn operator_io(&self) -> OperatorIo<'_> {
        OperatorIo {
            load: self.load.as_deref(),
            store: self.store.as_deref(),
        }
    }

    fn new(args: &CommonArgs) -> Result<Self> {
        let cfg = match &args.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::desk(2.0),
        };
        let out = args.out.clone().unwrap_or_else(|| cfg.io.out_dir.clone());
        std::fs::create_dir_all(&out)?;
        Ok(Self {
            store: args.store.clone().or_else(|| cfg.io.store.clone()),
            load: args.load.clone().or_else(|| cfg.io.load.clone()),
            cfg,
            out,
        })
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        std::fs::write(self.out.join(name), contents)?;
        Ok(())
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    let ctx = Context::new(cmd.args())?;
    match cmd {
        Command::Forward(_) => cmd_forward(&ctx)?,
        Command::Volumes(_) => cmd_volumes(&ctx)?,
        Command::Locate(_) => cmd_locate(&ctx)?,
        Command::Hull(_) => cmd_hull(&ctx)?,
        Command::Oracle(_) => cmd_oracle(&ctx)?,
        Command::Selftest(_) => {
            if !cmd_selftest(&ctx)? {
                return Ok(Outcome::SelftestFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct ForwardSummary {
    model_hash: String,
    nx: usize,
    ny: usize,
    h: f64,
    t_final: f64,
    dt: f64,
    nt: usize,
    nb: usize,
    n_patch: usize,
    n_bin: usize,
    cfl_ratio: f64,
    stored: String,
}

fn cmd_forward(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let m = cfg.medium()?;
    let time = cfg.time_grid(&m)?;
    let io = OperatorIo {
        load: ctx.load.as_deref(),
        store: None,
    };
    let lam = measured_lambda(cfg, &m, time, io)?;
    let prefix = ctx.store.clone().unwrap_or_else(|| ctx.out.join("lambda"));
    lam.store(&prefix)?;

    // patch-wise random amplitudes times one smooth pulse on (0, T)
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let basis = lam.basis();
    let amp: Vec<f64> = (0..cfg.basis.n_patch).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = BoundarySignal::from_fn(time.nt(), m.domain.boundary_len(), |k, b| {
        let t = time.t(k);
        if t < time.t_final {
            amp[basis.patch_of(b)] * (std::f64::consts::PI * t / time.t_final).sin().powi(2)
        } else {
            0.0
        }
    });
    let trace = lam.apply(&f)?;
    let header = FieldHeader::new("trace", trace.nb, trace.nt, time.dt, [0.0, 0.0], "boundary_time");
    write_field(&ctx.out.join("trace"), &header, &trace.data)?;
    ctx.write_json(
        "forward.json",
        &ForwardSummary {
            model_hash: m.model_hash(),
            nx: m.domain.nx,
            ny: m.domain.ny,
            h: m.domain.h,
            t_final: time.t_final,
            dt: time.dt,
            nt: time.nt(),
            nb: trace.nb,
            n_patch: cfg.basis.n_patch,
            n_bin: cfg.basis.n_bin,
            cfl_ratio: lam.solver().cfl_ratio(),
            stored: prefix.display().to_string(),
        },
    )
}

/// `tau` of the configured family at parameter `r`.
pub fn build_tau(spec: &TauSpec, r: f64, medium: &Medium, t_max: f64) -> Result<TauFunction> {
    let d = &medium.domain;
    match *spec {
        TauSpec::Constant => TauFunction::constant(d, r, t_max),
        TauSpec::Cone { x } => {
            let node = d.nearest_boundary(x[0], x[1]);
            let amb = ambient_boundary_distances(&medium.background()?, node)?;
            TauFunction::cone(node, r, &amb, t_max)
        }
        TauSpec::Spike { x, h, half_width } => {
            let node = d.nearest_boundary(x[0], x[1]);
            TauFunction::spike(d, node, &spike_patch(d, node, half_width), r, h, t_max)
        }
    }
}

fn cmd_volumes(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let m = cfg.medium()?;
    let time = cfg.time_grid(&m)?;
    let lam = measured_lambda(cfg, &m, time, ctx.operator_io())?;
    let k = assemble_k(&lam)?;
    let mut samples = Vec::new();
    let mut oracle = Vec::new();
    for &r in &cfg.volumes.r_values {
        let tau = build_tau(&cfg.volumes.tau, r, &m, time.t_final)?;
        let est = estimate_volume_scheduled(&k, lam.basis(), &tau, &cfg.control.alpha, &k, &cfg.control.solver)?;
        oracle.push(influence_volume(&m, Metric::Inclusion, &tau, cfg.detect.quadrature)?);
        samples.push(VolumeSample {
            r,
            value: est.value,
            estimate: Some(est),
        });
    }
    let curve = VolumeCurve {
        provenance: Provenance::Control,
        samples,
    };
    ctx.write(
        "volumes.csv",
        volume_curve_csv(cfg.volumes.tau.label(), &curve, Some(&oracle))?,
    )
}

fn cmd_locate(ctx: &Context) -> Result<()> {
    ctx.cfg.validate_detection()?;
    let m = ctx.cfg.medium()?;
    let (profile, summary) = locate_profile(&ctx.cfg, &m, ctx.operator_io())?;
    ctx.write("profile.csv", profile.to_csv()?)?;
    ctx.write_json("locate.json", &summary)
}

#[derive(Serialize)]
struct HullSummary {
    source: VolumeProvenance,
    metric_factor: f64,
    hull_cells: usize,
    hull_area: f64,
    sigma_cells: usize,
    sigma_cells_in_hull: usize,
    segments: usize,
}

fn cmd_hull(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    cfg.validate_detection()?;
    let m = cfg.medium()?;
    let profile = match cfg.detect.source {
        VolumeProvenance::Exact => DistanceProfile::exact(&m.domain, &exact_or_marched(&m)?),
        _ => locate_profile(cfg, &m, ctx.operator_io())?.0,
    };
    let factor = cfg.detect.hull_metric_factor;
    let background = if factor == 1.0 {
        m.background()?
    } else {
        distorted(&m, factor)?
    };
    let (mask, segments) = reconstruct_hull_and_segments(&profile, &background)?;
    write_pgm(&ctx.out.join("hull.pgm"), &mask)?;
    ctx.write("segments.csv", segments_csv(&segments)?)?;
    ctx.write("profile.csv", profile.to_csv()?)?;
    let sigma_cells = m.cell_sigma.iter().filter(|&&s| s).count();
    let sigma_cells_in_hull = m
        .cell_sigma
        .iter()
        .zip(&mask.inside)
        .filter(|(&s, &h)| s && h)
        .count();
    ctx.write_json(
        "hull.json",
        &HullSummary {
            source: cfg.detect.source,
            metric_factor: factor,
            hull_cells: mask.count(),
            hull_area: mask.count() as f64 * mask.h * mask.h,
            sigma_cells,
            sigma_cells_in_hull,
            segments: segments.len(),
        },
    )
}

#[derive(Serialize)]
struct OracleVolumeRow {
    r: f64,
    v_background: f64,
    v_measured: f64,
    gap: f64,
}

#[derive(Serialize)]
struct OracleSummary {
    tau_descriptor: String,
    volumes: Vec<OracleVolumeRow>,
    max_abs_gap: f64,
    probe: Option<ProbeResult>,
    probe_skipped: Option<String>,
    hull_cells: usize,
}

fn cmd_oracle(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let m = cfg.medium()?;
    let t_max = cfg.time.t_final;
    let quad = cfg.detect.quadrature;
    let mut rows = Vec::new();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["tau_descriptor", "r", "v_background", "v_measured", "gap"])
        .map_err(csv_err)?;
    for &r in &cfg.volumes.r_values {
        let tau = build_tau(&cfg.volumes.tau, r, &m, t_max)?;
        let v = influence_volume(&m, Metric::Background, &tau, quad)?;
        let vt = influence_volume(&m, Metric::Inclusion, &tau, quad)?;
        w.write_record([
            cfg.volumes.tau.label().to_string(),
            r.to_string(),
            v.to_string(),
            vt.to_string(),
            (v - vt).to_string(),
        ])
        .map_err(csv_err)?;
        rows.push(OracleVolumeRow {
            r,
            v_background: v,
            v_measured: vt,
            gap: v - vt,
        });
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    ctx.write("oracle_volumes.csv", bytes)?;

    // tangent constant tau: the smallest boundary distance to the inclusion
    let exact = exact_or_marched(&m)?;
    let tangent = exact.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps: Vec<f64> = [0.1, 0.07, 0.05, 0.035, 0.025, 0.0175, 0.01]
        .into_iter()
        .filter(|&e| e >= 4.0 * m.domain.h)
        .collect();
    let (probe, probe_skipped) = if !tangent.is_finite() {
        (None, Some("no inclusion".to_string()))
    } else if eps.len() < 4 || eps[0] < 10.0 * eps[eps.len() - 1] {
        (None, Some("grid too coarse for a decade of eps >= 4h".to_string()))
    } else {
        let tau = TauFunction::constant(&m.domain, tangent, t_max)?;
        (Some(epsilon_scaling_probe(&m, &tau, &eps, t_max, quad)?), None)
    };

    let radii: Vec<f64> = exact.iter().map(|&r| if r.is_finite() { r } else { t_max }).collect();
    let profile = DistanceProfile::exact(&m.domain, &radii);
    let (mask, segments) = reconstruct_hull_and_segments(&profile, &m.background()?)?;
    write_pgm(&ctx.out.join("hull_exact.pgm"), &mask)?;
    ctx.write("segments_exact.csv", segments_csv(&segments)?)?;
    ctx.write_json(
        "oracle.json",
        &OracleSummary {
            tau_descriptor: cfg.volumes.tau.label().into(),
            max_abs_gap: rows.iter().fold(0.0, |a, r| a.max(r.gap.abs())),
            volumes: rows,
            probe,
            probe_skipped,
            hull_cells: mask.count(),
        },
    )
}

#[derive(Serialize)]
struct SelftestSummary<'a> {
    passed: bool,
    seed: u64,
    criteria: &'a [crate::cli::selftest::CriterionReport],
}

/// True when every criterion passed.
fn cmd_selftest(ctx: &Context) -> Result<bool> {
    let reports = run_all(ctx.cfg.seed, Some(&ctx.out))?;
    for r in &reports {
        println!("{}", r.line());
    }
    let passed = reports.iter().all(|r| r.passed);
    ctx.write_json(
        "selftest.json",
        &SelftestSummary {
            passed,
            seed: ctx.cfg.seed,
            criteria: &reports,
        },
    )?;
    Ok(passed)
}

/// Exit code for an error: 2 for configuration problems, 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

