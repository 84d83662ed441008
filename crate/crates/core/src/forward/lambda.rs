//! The discrete Neumann-to-Dirichlet operator `Lambda_2T`.
//!
//! In precomputed mode the operator stores, for every boundary patch, the trace
//! produced by a unit source on that patch during the first time sample. The
//! scheme is linear and shift invariant in time, so any source that is
//! constant across each patch (in particular every element of the source
//! basis) is mapped by a sum of shifted copies of these responses.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::basis::{BasisSpec, SourceBasis};
use crate::forward::signal::{BoundarySignal, SignalSpace, TimeGrid};
use crate::forward::solver::{Record, WaveSolver};
use crate::geometry::speed::Medium;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    MatrixFree,
    Precomputed,
}

/// Per-patch impulse responses, one column of `nt * nb` values per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchResponses {
    pub nt: usize,
    pub nb: usize,
    pub n_patch: usize,
    pub data: Vec<f64>,
}

impl PatchResponses {
    pub fn column(&self, p: usize) -> &[f64] {
        let len = self.nt * self.nb;
        &self.data[p * len..(p + 1) * len]
    }
}

/// On-disk header of a stored operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaHeader {
    pub format: String,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub dt: f64,
    pub t_final: f64,
    pub half: usize,
    pub nt: usize,
    pub nb: usize,
    pub basis: BasisSpec,
    pub speed_model_hash: String,
    /// Rows of the column-major float64 matrix (`nt * nb`, time-major).
    pub rows: usize,
    /// Columns (one per patch).
    pub cols: usize,
    pub columns: String,
    pub byte_order: String,
}

const FORMAT: &str = "bcm-lambda-v1";

#[derive(Debug, Clone)]
pub struct LambdaOperator {
    solver: WaveSolver,
    basis: SourceBasis,
    responses: Option<PatchResponses>,
    model_hash: String,
    grid: (usize, usize, f64, [f64; 2]),
}

impl LambdaOperator {
    pub fn matrix_free(medium: &Medium, time: TimeGrid, cfl: f64, spec: BasisSpec) -> Result<Self> {
        let solver = WaveSolver::new(medium, time, cfl)?;
        let basis = SourceBasis::new(solver.space(), spec)?;
        let d = &medium.domain;
        Ok(Self {
            solver,
            basis,
            responses: None,
            model_hash: medium.model_hash(),
            grid: (d.nx, d.ny, d.h, [d.origin.0, d.origin.1]),
        })
    }

    pub fn mode(&self) -> LambdaMode {
        if self.responses.is_some() {
            LambdaMode::Precomputed
        } else {
            LambdaMode::MatrixFree
        }
    }

    pub fn solver(&self) -> &WaveSolver {
        &self.solver
    }

    pub fn basis(&self) -> &SourceBasis {
        &self.basis
    }

    pub fn space(&self) -> &SignalSpace {
        self.solver.space()
    }

    pub fn time(&self) -> TimeGrid {
        self.solver.time()
    }

    pub fn responses(&self) -> Option<&PatchResponses> {
        self.responses.as_ref()
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    /// One forward solve.
    pub fn apply_matrix_free(&self, f: &BoundarySignal) -> Result<BoundarySignal> {
        Ok(self.solver.solve(f, Record::TRACE)?.trace.expect("trace recorded"))
    }

    pub fn apply(&self, f: &BoundarySignal) -> Result<BoundarySignal> {
        match &self.responses {
            None => self.apply_matrix_free(f),
            Some(resp) => {
                let profiles = self.patch_profiles(f)?;
                Ok(convolve(resp, &profiles))
            }
        }
    }

    /// Time profile per patch of a signal that is constant across every patch.
    pub fn patch_profiles(&self, f: &BoundarySignal) -> Result<Vec<Vec<f64>>> {
        self.space().check(f)?;
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        let mut out = Vec::with_capacity(self.basis.spec.n_patch);
        for range in self.basis.patches() {
            let mut prof = vec![0.0; f.nt];
            for (k, p) in prof.iter_mut().enumerate() {
                let v = f.get(k, range.start);
                for y in range.clone() {
                    if (f.get(k, y) - v).abs() > 1e-12 * scale {
                        return Err(Error::BasisMismatch(
                            "source varies inside a boundary patch; precomputed mode cannot apply it"
                                .into(),
                        ));
                    }
                }
                *p = v;
            }
            out.push(prof);
        }
        Ok(out)
    }

    /// `Lambda b_idx`.
    pub fn column(&self, idx: usize) -> Result<BoundarySignal> {
        self.apply(&self.basis.element(idx))
    }

    /// Store as `<prefix>.json` (header) and `<prefix>.bin` (little-endian float64, column-major).
    pub fn store(&self, prefix: &Path) -> Result<()> {
        let resp = self.responses.as_ref().ok_or_else(|| {
            Error::InvalidArgument("only precomputed operators can be stored".into())
        })?;
        let (json, bin) = paths(prefix);
        let header = self.header(resp);
        std::fs::write(&json, serde_json::to_string_pretty(&header)?)?;
        let mut w = BufWriter::new(File::create(&bin)?);
        for v in &resp.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    fn header(&self, resp: &PatchResponses) -> LambdaHeader {
        let t = self.time();
        LambdaHeader {
            format: FORMAT.into(),
            nx: self.grid.0,
            ny: self.grid.1,
            h: self.grid.2,
            origin: self.grid.3,
            dt: t.dt,
            t_final: t.t_final,
            half: t.half,
            nt: resp.nt,
            nb: resp.nb,
            basis: self.basis.spec,
            speed_model_hash: self.model_hash.clone(),
            rows: resp.nt * resp.nb,
            cols: resp.n_patch,
            columns: "patch_impulse_response".into(),
            byte_order: "little".into(),
        }
    }

    /// Load a stored operator, checking it matches `medium`, `time` and `spec`.
    pub fn load(prefix: &Path, medium: &Medium, time: TimeGrid, cfl: f64, spec: BasisSpec) -> Result<Self> {
        let mut op = Self::matrix_free(medium, time, cfl, spec)?;
        let (json, bin) = paths(prefix);
        let header: LambdaHeader = serde_json::from_str(&std::fs::read_to_string(&json)?)?;
        let nt = time.nt();
        let nb = medium.domain.boundary_len();
        let expected = op.header(&PatchResponses {
            nt,
            nb,
            n_patch: spec.n_patch,
            data: Vec::new(),
        });
        if header.format != FORMAT {
            return Err(Error::BasisMismatch(format!("unknown operator format {}", header.format)));
        }
        if header.speed_model_hash != expected.speed_model_hash {
            return Err(Error::BasisMismatch("stored operator was built for another speed model".into()));
        }
        if header.nt != nt
            || header.nb != nb
            || header.basis != spec
            || header.half != time.half
            || (header.dt - time.dt).abs() > 1e-15 * time.dt.max(1.0)
        {
            return Err(Error::BasisMismatch("stored operator discretisation differs".into()));
        }
        let mut bytes = Vec::new();
        BufReader::new(File::open(&bin)?).read_to_end(&mut bytes)?;
        if bytes.len() != header.rows * header.cols * 8 {
            return Err(Error::BasisMismatch(format!(
                "operator payload has {} bytes, expected {}",
                bytes.len(),
                header.rows * header.cols * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        op.responses = Some(PatchResponses {
            nt,
            nb,
            n_patch: spec.n_patch,
            data,
        });
        Ok(op)
    }
}

fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (prefix.with_extension("json"), prefix.with_extension("bin"))
}

/// Sum of shifted patch responses weighted by the patch time profiles.
fn convolve(resp: &PatchResponses, profiles: &[Vec<f64>]) -> BoundarySignal {
    let (nt, nb) = (resp.nt, resp.nb);
    let mut out = BoundarySignal::zeros(nt, nb);
    for (p, prof) in profiles.iter().enumerate() {
        let g = resp.column(p);
        for (k, &a) in prof.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let len = (nt - k) * nb;
            let dst = &mut out.data[k * nb..];
            for (o, gv) in dst[..len].iter_mut().zip(&g[..len]) {
                *o += a * gv;
            }
        }
    }
    out
}

/// Precompute the operator: one forward solve per boundary patch.
pub fn assemble_lambda_matrix(medium: &Medium, time: TimeGrid, cfl: f64, spec: BasisSpec) -> Result<LambdaOperator> {
    let mut op = LambdaOperator::matrix_free(medium, time, cfl, spec)?;
    let nt = time.nt();
    let nb = medium.domain.boundary_len();
    let columns: Vec<Result<Vec<f64>>> = op
        .basis
        .patches()
        .par_iter()
        .enumerate()
        .map(|(p, range)| {
            let mut f = BoundarySignal::zeros(nt, nb);
            for y in range.clone() {
                f.set(0, y, 1.0);
            }
            op.solver
                .solve(&f, Record::TRACE)
                .map(|o| o.trace.expect("trace recorded").data)
                .map_err(|e| Error::Column {
                    column: p,
                    source: Box::new(e),
                })
        })
        .collect();
    let mut data = Vec::with_capacity(nt * nb * spec.n_patch);
    for c in columns {
        data.extend(c?);
    }
    op.responses = Some(PatchResponses {
        nt,
        nb,
        n_patch: spec.n_patch,
        data,
    });
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::DiscreteDomain;
    use crate::geometry::speed::{Shape, SpeedModel};

    fn small() -> (Medium, TimeGrid, BasisSpec) {
        let d = DiscreteDomain::unit_square(16).unwrap();
        let shape = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        };
        let m = Medium::new(d, SpeedModel::constant(1.0).with_inclusion(shape, 2.0)).unwrap();
        let time = TimeGrid::new(0.75, 0.5 * m.domain.h / 2.0, 6).unwrap();
        (m, time, BasisSpec { n_patch: 8, n_bin: 6 })
    }

    #[test]
    fn precomputed_columns_match_matrix_free() {
        let (m, time, spec) = small();
        let op = assemble_lambda_matrix(&m, time, 0.5, spec).unwrap();
        assert_eq!(op.mode(), LambdaMode::Precomputed);
        for idx in [0, 7, 13, 47] {
            let e = op.basis().element(idx);
            let a = op.column(idx).unwrap();
            let b = op.apply_matrix_free(&e).unwrap();
            let mut diff = a.clone();
            diff.axpy(-1.0, &b);
            assert!(diff.max_abs() <= 1e-10 * b.max_abs(), "column {idx}");
            assert!(b.max_abs() > 0.0 && b.data.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn precomputed_rejects_signals_varying_inside_patch() {
        let (m, time, spec) = small();
        let op = assemble_lambda_matrix(&m, time, 0.5, spec).unwrap();
        let mut f = op.space().zeros();
        f.set(3, 1, 1.0);
        assert!(matches!(op.apply(&f), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn store_and_load_round_trip() {
        let (m, time, spec) = small();
        let op = assemble_lambda_matrix(&m, time, 0.5, spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("lambda");
        op.store(&prefix).unwrap();
        let back = LambdaOperator::load(&prefix, &m, time, 0.5, spec).unwrap();
        assert_eq!(back.responses(), op.responses());
        let other = Medium::new(m.domain.clone(), SpeedModel::constant(1.0)).unwrap();
        assert!(LambdaOperator::load(&prefix, &other, time, 0.5, spec).is_err());
    }
}
