//! Boundary distance to the inclusion with a known background.
//!
//! `d^(x, Sigma)` is the largest `r` with `V(tau_r) = V~(tau_r)` where
//! `tau_r(y) = (r - d^(x, y))_+`. Numerically the equality is replaced by
//! `|V - V~| <= tol`; the first `r` violating it is found by a coarse scan
//! followed by bisection.

use serde::{Deserialize, Serialize};

use crate::detect::volumes::VolumePair;
use crate::error::{Error, Result};
use crate::geometry::region::TauFunction;

/// `tol(V) = max(abs, rel * V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolVol {
    pub abs: f64,
    pub rel: f64,
}

impl TolVol {
    pub fn threshold(&self, volume: f64) -> f64 {
        self.abs.max(self.rel * volume.abs())
    }

    /// `factor` times the largest gap seen on a calibration run.
    pub fn calibrated(calibration_gap: f64, factor: f64, rel: f64) -> Self {
        Self {
            abs: factor * calibration_gap,
            rel,
        }
    }
}

/// Largest `|V - V~|` over `taus` for a pair that should show no inclusion.
pub fn calibrate(pair: &dyn VolumePair, taus: &[TauFunction]) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in taus {
        worst = worst.max(pair.volumes(t)?.gap().abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// The gap never exceeded the tolerance up to `r_max`.
    NoInclusionSeen,
    /// `V < V~ - tol` somewhere.
    InconsistentData,
    /// A control estimate could not be extrapolated in `alpha`.
    ExtrapolationUnreliable,
    /// The breakdown radius differs across the `h` offsets.
    InconsistentOffsets,
    /// The profile breaks the 1-Lipschitz bound at this sample.
    LipschitzViolation,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::NoInclusionSeen => "no_inclusion_seen",
            Flag::InconsistentData => "inconsistent_data",
            Flag::ExtrapolationUnreliable => "extrapolation_unreliable",
            Flag::InconsistentOffsets => "inconsistent_offsets",
            Flag::LipschitzViolation => "lipschitz_violation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocateOptions {
    pub r_max: f64,
    /// Coarse scan step.
    pub r_step: f64,
    /// Final bracket width.
    pub tol_r: f64,
    pub tol: TolVol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Located {
    pub node: usize,
    pub r: f64,
    /// `V - V~` at the upper end of the final bracket.
    pub gap: f64,
    pub flags: Vec<Flag>,
    pub evaluations: usize,
}

/// Estimate `d^(x, Sigma)` for the boundary node `node`.
///
/// `ambient` holds `d^(x, y)` for every boundary node `y`; `t_max` is the
/// observation half-time `T`, which must be at least `r_max`.
pub fn locate_known_bg(
    pair: &dyn VolumePair,
    node: usize,
    ambient: &[f64],
    t_max: f64,
    opts: &LocateOptions,
) -> Result<Located> {
    if !(opts.r_max > 0.0 && opts.r_step > 0.0 && opts.tol_r > 0.0) {
        return Err(Error::InvalidArgument("r_max, r_step and tol_r must be positive".into()));
    }
    if opts.r_max > t_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "r_max = {} exceeds the observation time T = {t_max}",
            opts.r_max
        )));
    }
    let mut flags = Vec::new();
    let mut evaluations = 0;
    let mut eval = |r: f64, flags: &mut Vec<Flag>| -> Result<(bool, f64)> {
        evaluations += 1;
        let tau = TauFunction::cone(node, r, ambient, t_max)?;
        let s = pair.volumes(&tau)?;
        let gap = s.gap();
        let thr = opts.tol.threshold(s.background);
        if !s.reliable && !flags.contains(&Flag::ExtrapolationUnreliable) {
            flags.push(Flag::ExtrapolationUnreliable);
        }
        if gap < -thr && !flags.contains(&Flag::InconsistentData) {
            flags.push(Flag::InconsistentData);
        }
        Ok((gap.abs() > thr, gap))
    };

    let steps = (opts.r_max / opts.r_step - 1e-9).ceil() as usize;
    let mut lo = 0.0;
    let mut hit = None;
    for k in 1..=steps {
        let r = (k as f64 * opts.r_step).min(opts.r_max);
        let (fires, gap) = eval(r, &mut flags)?;
        if fires {
            hit = Some((r, gap));
            break;
        }
        lo = r;
    }
    let Some((mut hi, mut gap)) = hit else {
        flags.push(Flag::NoInclusionSeen);
        return Ok(Located {
            node,
            r: opts.r_max,
            gap: 0.0,
            flags,
            evaluations,
        });
    };
    while hi - lo > opts.tol_r {
        let mid = 0.5 * (lo + hi);
        let (fires, g) = eval(mid, &mut flags)?;
        if fires {
            hi = mid;
            gap = g;
        } else {
            lo = mid;
        }
    }
    debug_assert!(lo < hi);
    Ok(Located {
        node,
        r: 0.5 * (lo + hi),
        gap,
        flags,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Provenance;
    use crate::detect::volumes::{OraclePair, PairSample};
    use crate::geometry::domain::DiscreteDomain;
    use crate::geometry::region::{ambient_boundary_distances, Quadrature};
    use crate::geometry::speed::{Medium, Shape, SpeedModel};

    /// Gap that switches on at a known radius.
    struct Step {
        at: f64,
        center_ambient: Vec<f64>,
    }

    impl VolumePair for Step {
        fn volumes(&self, tau: &TauFunction) -> Result<PairSample> {
            // recover r from the centre value of the cone
            let center = self.center_ambient.iter().position(|&d| d == 0.0).unwrap();
            let r = tau.values[center];
            Ok(PairSample {
                background: 1.0,
                measured: if r > self.at { 0.9 } else { 1.0 },
                reliable: true,
            })
        }

        fn provenance(&self) -> Provenance {
            Provenance::Oracle
        }
    }

    fn opts() -> LocateOptions {
        LocateOptions {
            r_max: 1.0,
            r_step: 0.05,
            tol_r: 1e-3,
            tol: TolVol { abs: 1e-3, rel: 0.0 },
        }
    }

    #[test]
    fn bisection_brackets_transition() {
        let ambient: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let pair = Step {
            at: 0.4321,
            center_ambient: ambient.clone(),
        };
        let got = locate_known_bg(&pair, 0, &ambient, 1.5, &opts()).unwrap();
        assert!((got.r - 0.4321).abs() <= 1e-3);
        assert!(got.flags.is_empty());
    }

    #[test]
    fn refuses_r_max_beyond_t() {
        let ambient = vec![0.0; 4];
        let pair = Step {
            at: 0.5,
            center_ambient: ambient.clone(),
        };
        assert!(locate_known_bg(&pair, 0, &ambient, 0.5, &opts()).is_err());
    }

    #[test]
    fn disk_distance_from_oracle_volumes() {
        let d = DiscreteDomain::unit_square(128).unwrap();
        let shape = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        };
        let m = Medium::new(d.clone(), SpeedModel::constant(1.0).with_inclusion(shape, 2.0)).unwrap();
        let x = d.nearest_boundary(0.5, 0.0);
        let amb = ambient_boundary_distances(&m, x).unwrap();
        let pair = OraclePair {
            medium: m.clone(),
            quad: Quadrature::Fractional,
        };
        let o = LocateOptions {
            r_max: 0.8,
            r_step: 0.05,
            tol_r: d.h / 2.0,
            tol: TolVol { abs: 1e-6, rel: 1e-3 },
        };
        let got = locate_known_bg(&pair, x, &amb, 1.5, &o).unwrap();
        assert!((got.r - 0.35).abs() <= 3.0 * d.h, "{}", got.r);

        let free = OraclePair {
            medium: m.background().unwrap(),
            quad: Quadrature::Fractional,
        };
        let got = locate_known_bg(&free, x, &amb, 1.5, &o).unwrap();
        assert_eq!(got.r, 0.8);
        assert_eq!(got.flags, vec![Flag::NoInclusionSeen]);
    }
}
