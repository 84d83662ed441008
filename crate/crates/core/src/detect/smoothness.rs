//! Unknown-background test: where does `r -> V~(tau_{r,h})` stop being smooth?
//!
//! `tau_{r,h}` is `r` on a boundary patch around `x` and `h` elsewhere. While
//! `M~(tau_{r,h})` stays away from the inclusion the volume is smooth in `r`;
//! once it touches, the volume picks up an `eps^{3/2}` term and the second
//! difference `D2(r, eps)` grows like `eps^{-1/2}`. The slope `q(r)` of
//! `log |D2|` against `log eps` therefore drops from about 0 to about -1/2.

use serde::{Deserialize, Serialize};

use crate::control::{estimate_volume_scheduled, AlphaSchedule, KMatrix, SolveOptions};
use crate::detect::locate::Flag;
use crate::error::{Error, Result};
use crate::forward::basis::SourceBasis;
use crate::geometry::domain::DiscreteDomain;
use crate::geometry::probe::ls_slope;
use crate::geometry::region::{influence_volume, Quadrature, TauFunction};
use crate::geometry::speed::{Medium, Metric};

/// A single volume functional `tau -> V(tau)`.
pub trait VolumeSource: Sync {
    fn volume(&self, tau: &TauFunction) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct OracleVolume {
    pub medium: Medium,
    pub metric: Metric,
    pub quad: Quadrature,
}

impl VolumeSource for OracleVolume {
    fn volume(&self, tau: &TauFunction) -> Result<f64> {
        influence_volume(&self.medium, self.metric, tau, self.quad)
    }
}

/// Control estimate from the measured `K` alone; `alpha` is scaled by the same matrix.
#[derive(Debug, Clone)]
pub struct ControlVolume {
    pub k: KMatrix,
    pub basis: SourceBasis,
    pub schedule: AlphaSchedule,
    pub opts: SolveOptions,
}

impl VolumeSource for ControlVolume {
    fn volume(&self, tau: &TauFunction) -> Result<f64> {
        Ok(estimate_volume_scheduled(&self.k, &self.basis, tau, &self.schedule, &self.k, &self.opts)?.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothnessOptions {
    /// Spacing of the `r` grid. Every `eps` must be a whole multiple of it.
    pub delta: f64,
    pub eps_list: Vec<f64>,
    pub h_offsets: Vec<f64>,
    /// Half-width (arc length) of the patch carrying the value `r`.
    pub patch_half_width: f64,
    pub q_threshold: f64,
    pub r_max: f64,
    /// Largest spread of the per-offset breakdowns still called consistent.
    pub consistency: f64,
}

impl Default for SmoothnessOptions {
    fn default() -> Self {
        let delta = 0.0025;
        Self {
            delta,
            eps_list: vec![delta, 2.0 * delta, 3.0 * delta, 4.0 * delta],
            h_offsets: vec![0.02, 0.04, 0.06],
            patch_half_width: 0.0625,
            q_threshold: -0.25,
            r_max: 1.0,
            consistency: 4.0 * delta,
        }
    }
}

impl SmoothnessOptions {
    /// `eps_list` as multiples of `delta`.
    fn multiples(&self) -> Result<Vec<usize>> {
        if self.eps_list.len() < 3 {
            return Err(Error::InsufficientEpsilon {
                need: 3,
                got: self.eps_list.len(),
            });
        }
        if !(self.delta > 0.0) || self.h_offsets.is_empty() {
            return Err(Error::InvalidArgument("delta must be positive and h_offsets non-empty".into()));
        }
        let mut out = Vec::with_capacity(self.eps_list.len());
        for &e in &self.eps_list {
            let m = (e / self.delta).round();
            if m < 1.0 || (m * self.delta - e).abs() > 1e-9 * e.max(self.delta) {
                return Err(Error::InvalidArgument(format!(
                    "eps {e} is not a positive multiple of the r grid step {}",
                    self.delta
                )));
            }
            out.push(m as usize);
        }
        out.sort_unstable();
        out.dedup();
        if out.len() < 3 {
            return Err(Error::InsufficientEpsilon { need: 3, got: out.len() });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetScan {
    pub h: f64,
    /// First grid radius with `q <= threshold`.
    pub breakdown: Option<f64>,
    /// `(r, q(r))` up to and including the breakdown.
    pub divergence: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessResult {
    pub node: usize,
    pub r: f64,
    /// `q` at the reported radius, from the offset closest to the median.
    pub q: Option<f64>,
    pub offsets: Vec<OffsetScan>,
    pub flags: Vec<Flag>,
}

/// Boundary nodes within `half_width` of `center` along the boundary.
pub fn spike_patch(domain: &DiscreteDomain, center: usize, half_width: f64) -> Vec<usize> {
    (0..domain.boundary_len())
        .filter(|&k| domain.arc_distance(k, center) <= half_width + 1e-9)
        .collect()
}

/// Slope of `log |D2(r, eps)|` against `log eps` from volumes on the `r` grid.
///
/// `vols[j]` is the volume at grid index `j`; `j` must be at least the largest multiple.
pub fn divergence_slope(vols: &[f64], j: usize, multiples: &[usize], delta: f64) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = multiples
        .iter()
        .map(|&m| {
            let e = m as f64 * delta;
            let d2 = (vols[j + m] - 2.0 * vols[j] + vols[j - m]) / (e * e);
            (e.ln(), d2.abs().max(1e-300).ln())
        })
        .unzip();
    ls_slope(&xs, &ys)
}

fn scan_offset(
    source: &dyn VolumeSource,
    domain: &DiscreteDomain,
    node: usize,
    patch: &[usize],
    h: f64,
    multiples: &[usize],
    opts: &SmoothnessOptions,
    t_max: f64,
) -> Result<OffsetScan> {
    let delta = opts.delta;
    let m_max = *multiples.last().expect("validated");
    // start where r - eps_max already exceeds the floor h
    let i0 = ((h / delta).ceil() as usize) + m_max + 1;
    let i1 = (opts.r_max / delta + 1e-9).floor() as usize;
    let mut vols = Vec::new();
    let base = i0 - m_max;
    let mut divergence = Vec::new();
    for i in i0..=i1 {
        while base + vols.len() <= i + m_max {
            let r = (base + vols.len()) as f64 * delta;
            let tau = TauFunction::spike(domain, node, patch, r, h, t_max)?;
            vols.push(source.volume(&tau)?);
        }
        let r = i as f64 * delta;
        let q = divergence_slope(&vols, i - base, multiples, delta);
        divergence.push((r, q));
        if q <= opts.q_threshold {
            return Ok(OffsetScan {
                h,
                breakdown: Some(r),
                divergence,
            });
        }
    }
    Ok(OffsetScan {
        h,
        breakdown: None,
        divergence,
    })
}

/// Breakdown radius of `r -> V~(tau_{r,h})` at boundary node `node`.
///
/// Each `h` offset is scanned separately; the estimate is the median of the
/// offsets that broke down. If none did, `r_max` is returned flagged.
pub fn smoothness_test_unknown_bg(
    source: &dyn VolumeSource,
    domain: &DiscreteDomain,
    node: usize,
    opts: &SmoothnessOptions,
    t_max: f64,
) -> Result<SmoothnessResult> {
    let multiples = opts.multiples()?;
    if opts.r_max > t_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "r_max = {} exceeds the observation time T = {t_max}",
            opts.r_max
        )));
    }
    let patch = spike_patch(domain, node, opts.patch_half_width);
    let offsets = opts
        .h_offsets
        .iter()
        .map(|&h| scan_offset(source, domain, node, &patch, h, &multiples, opts, t_max))
        .collect::<Result<Vec<_>>>()?;

    let mut flags = Vec::new();
    let mut hits: Vec<(f64, usize)> = offsets
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.breakdown.map(|r| (r, k)))
        .collect();
    if hits.is_empty() {
        flags.push(Flag::NoInclusionSeen);
        return Ok(SmoothnessResult {
            node,
            r: opts.r_max,
            q: None,
            offsets,
            flags,
        });
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let spread = hits[hits.len() - 1].0 - hits[0].0;
    if hits.len() < offsets.len() || spread > opts.consistency + 1e-12 {
        flags.push(Flag::InconsistentOffsets);
    }
    let (r, k) = hits[(hits.len() - 1) / 2];
    let q = offsets[k].divergence.last().map(|&(_, q)| q);
    Ok(SmoothnessResult {
        node,
        r,
        q,
        offsets,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::speed::SpeedModel;

    struct Kink {
        at: f64,
        node: usize,
    }

    impl VolumeSource for Kink {
        fn volume(&self, tau: &TauFunction) -> Result<f64> {
            let r = tau.values[self.node];
            // smooth part plus a one-sided 3/2 power switching on at `at`
            Ok(0.3 * r * r + (r - self.at).max(0.0).powf(1.5))
        }
    }

    #[test]
    fn finds_synthetic_kink() {
        let d = DiscreteDomain::unit_square(32).unwrap();
        let src = Kink { at: 0.3, node: 5 };
        let opts = SmoothnessOptions {
            r_max: 0.6,
            ..SmoothnessOptions::default()
        };
        let res = smoothness_test_unknown_bg(&src, &d, 5, &opts, 1.5).unwrap();
        assert!((res.r - 0.3).abs() <= 4.0 * opts.delta, "{}", res.r);
        assert!(res.flags.is_empty());
        for o in &res.offsets {
            for &(r, q) in &o.divergence {
                if r + 4.0 * opts.delta < 0.3 {
                    assert!(q >= -0.1, "q({r}) = {q}");
                }
            }
        }
    }

    #[test]
    fn smooth_volume_reports_nothing() {
        let d = DiscreteDomain::unit_square(32).unwrap();
        let src = Kink { at: 10.0, node: 0 };
        let opts = SmoothnessOptions {
            r_max: 0.5,
            ..SmoothnessOptions::default()
        };
        let res = smoothness_test_unknown_bg(&src, &d, 0, &opts, 1.5).unwrap();
        assert_eq!(res.r, 0.5);
        assert_eq!(res.flags, vec![Flag::NoInclusionSeen]);
    }

    #[test]
    fn too_few_eps_is_an_error() {
        let d = DiscreteDomain::unit_square(16).unwrap();
        let m = Medium::new(d.clone(), SpeedModel::constant(1.0)).unwrap();
        let src = OracleVolume {
            medium: m,
            metric: Metric::Inclusion,
            quad: Quadrature::Fractional,
        };
        let opts = SmoothnessOptions {
            eps_list: vec![0.0025, 0.005],
            ..SmoothnessOptions::default()
        };
        let err = smoothness_test_unknown_bg(&src, &d, 0, &opts, 1.5).unwrap_err();
        assert!(matches!(err, Error::InsufficientEpsilon { need: 3, got: 2 }));
    }

    #[test]
    fn eps_off_the_grid_rejected() {
        let opts = SmoothnessOptions {
            eps_list: vec![0.0025, 0.004, 0.0075],
            ..SmoothnessOptions::default()
        };
        assert!(opts.multiples().is_err());
    }
}
