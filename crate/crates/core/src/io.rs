//! File formats: PGM masks, float32 grids with a JSON sidecar, and CSV tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::VolumeCurve;
use crate::error::{Error, Result};
use crate::geometry::hull::Segment;
use crate::geometry::region::RegionMask;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Binary (P5) PGM, 255 inside the mask. The top image row is the largest `y`.
pub fn mask_to_pgm(mask: &RegionMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.nx, mask.ny).into_bytes();
    for j in (0..mask.ny).rev() {
        for i in 0..mask.nx {
            out.push(if mask.get(i, j) { 255 } else { 0 });
        }
    }
    out
}

/// Width, height and pixels of a P5 file as written by [`mask_to_pgm`].
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = || Error::InvalidArgument("malformed PGM".into());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos + 1..).ok_or_else(bad)?;
    if data.len() != w * h {
        return Err(bad());
    }
    Ok((w, h, data.to_vec()))
}

pub fn write_pgm(path: &Path, mask: &RegionMask) -> Result<()> {
    fs::write(path, mask_to_pgm(mask))?;
    Ok(())
}

/// Sidecar describing a `.f32` grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub field: String,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    /// `"node"` or `"cell"`.
    pub location: String,
    pub dtype: String,
    pub byte_order: String,
    /// Row `j = 0` (smallest `y`) comes first.
    pub row_order: String,
}

impl FieldHeader {
    pub fn new(field: &str, nx: usize, ny: usize, h: f64, origin: [f64; 2], location: &str) -> Self {
        Self {
            field: field.into(),
            nx,
            ny,
            h,
            origin,
            location: location.into(),
            dtype: "float32".into(),
            byte_order: "little".into(),
            row_order: "bottom_up".into(),
        }
    }
}

/// Writes `<prefix>.f32` and `<prefix>.json`.
pub fn write_field(prefix: &Path, header: &FieldHeader, values: &[f64]) -> Result<()> {
    if values.len() != header.nx * header.ny {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for a {}x{} grid",
            values.len(),
            header.nx,
            header.ny
        )));
    }
    let bytes: Vec<u8> = values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(prefix.with_extension("f32"), bytes)?;
    fs::write(prefix.with_extension("json"), serde_json::to_string_pretty(header)?)?;
    Ok(())
}

pub fn read_field(prefix: &Path) -> Result<(FieldHeader, Vec<f32>)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(prefix.with_extension("json"))?)?;
    let bytes = fs::read(prefix.with_extension("f32"))?;
    if bytes.len() != 4 * header.nx * header.ny {
        return Err(Error::InvalidArgument("field file size does not match its sidecar".into()));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, values))
}

/// Columns `s, y_x, y_y, dir_x, dir_y, length`.
pub fn segments_csv(segments: &[Segment]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["s", "y_x", "y_y", "dir_x", "dir_y", "length"])
        .map_err(csv_err)?;
    for s in segments {
        w.write_record(
            [s.s, s.x, s.y, s.dir_x, s.dir_y, s.length].map(|v| v.to_string()),
        )
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Columns `tau_descriptor, r, alpha, v_alpha, v_extrapolated, cg_iters, residual, v_oracle`,
/// one row per `alpha` (a single row with empty solver columns for oracle samples).
pub fn volume_curve_csv(tau_descriptor: &str, curve: &VolumeCurve, oracle: Option<&[f64]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "tau_descriptor",
        "r",
        "alpha",
        "v_alpha",
        "v_extrapolated",
        "cg_iters",
        "residual",
        "v_oracle",
    ])
    .map_err(csv_err)?;
    for (k, s) in curve.samples.iter().enumerate() {
        let o = oracle
            .and_then(|o| o.get(k))
            .map(|v| v.to_string())
            .unwrap_or_default();
        match &s.estimate {
            Some(est) => {
                for a in &est.samples {
                    w.write_record([
                        tau_descriptor.to_string(),
                        s.r.to_string(),
                        a.alpha.to_string(),
                        a.value.to_string(),
                        s.value.to_string(),
                        a.iterations.to_string(),
                        a.residual.to_string(),
                        o.clone(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            None => {
                w.write_record([
                    tau_descriptor.to_string(),
                    s.r.to_string(),
                    String::new(),
                    String::new(),
                    s.value.to_string(),
                    String::new(),
                    String::new(),
                    o,
                ])
                .map_err(csv_err)?;
            }
        }
    }
    finish_csv(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Provenance, VolumeSample};
    use crate::geometry::domain::DiscreteDomain;

    #[test]
    fn pgm_round_trip() {
        let d = DiscreteDomain::new((0.0, 0.0), 1.0, 0.5, 8).unwrap();
        let mut mask = RegionMask::empty(&d, vec![1.0; d.cell_count()]);
        mask.inside[d.cell_index(1, 0)] = true;
        let bytes = mask_to_pgm(&mask);
        let (w, h, px) = parse_pgm(&bytes).unwrap();
        assert_eq!((w, h), (8, 4));
        // bottom row is written last
        assert_eq!(px[3 * 8 + 1], 255);
        assert_eq!(px.iter().filter(|&&p| p == 255).count(), 1);
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("phi");
        let header = FieldHeader::new("phi", 3, 2, 0.5, [0.0, 0.0], "cell");
        let vals = [0.0, 0.25, -1.5, 2.0, 3.0, 1e-3];
        write_field(&prefix, &header, &vals).unwrap();
        let (h2, back) = read_field(&prefix).unwrap();
        assert_eq!(h2, header);
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(*a as f32, *b);
        }
        assert!(write_field(&prefix, &header, &vals[..5]).is_err());
    }

    #[test]
    fn csv_tables_have_expected_headers() {
        let seg = Segment {
            s: 0.5,
            x: 0.5,
            y: 0.0,
            dir_x: 0.0,
            dir_y: 1.0,
            length: 0.35,
        };
        let text = segments_csv(&[seg]).unwrap();
        assert_eq!(text, "s,y_x,y_y,dir_x,dir_y,length\n0.5,0.5,0,0,1,0.35\n");
        let curve = VolumeCurve {
            provenance: Provenance::Oracle,
            samples: vec![VolumeSample {
                r: 0.1,
                value: 0.36,
                estimate: None,
            }],
        };
        let text = volume_curve_csv("constant", &curve, Some(&[0.36])).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "constant,0.1,,,0.36,,,0.36");
    }
}
