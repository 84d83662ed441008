//! Oracle-level probe of the volume gap `m(M(tau + eps)) - m~(M~(tau + eps))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::region::{influence_field, field_volume, Quadrature, TauFunction};
use crate::geometry::speed::{Medium, Metric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProbeOutcome {
    Separated { exponent: f64, points_used: usize },
    NoSeparation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeResult {
    pub eps: Vec<f64>,
    pub differences: Vec<f64>,
    pub outcome: ProbeOutcome,
    /// Whether `M(tau)` already meets `Sigma` (cells). The tangency
    /// precondition is only flagged, never verified.
    pub touches_at_zero: bool,
}

impl ProbeResult {
    pub fn exponent(&self) -> Option<f64> {
        match self.outcome {
            ProbeOutcome::Separated { exponent, .. } => Some(exponent),
            ProbeOutcome::NoSeparation => None,
        }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Volume differences for `tau + eps` and the fitted power law exponent.
///
/// Differences below `10 h^2` are treated as quadrature noise and left out of
/// the fit, as are non-positive ones.
pub fn epsilon_scaling_probe(
    medium: &Medium,
    tau: &TauFunction,
    eps_list: &[f64],
    t_max: f64,
    quad: Quadrature,
) -> Result<ProbeResult> {
    let h = medium.domain.h;
    if eps_list.len() < 4 {
        return Err(Error::InsufficientEpsilon {
            need: 4,
            got: eps_list.len(),
        });
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("eps_list must be strictly decreasing".into()));
    }
    let (hi, lo) = (eps_list[0], eps_list[eps_list.len() - 1]);
    if hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument("eps_list must span at least one decade".into()));
    }
    if lo < 4.0 * h * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "smallest eps {lo} is below 4h = {}",
            4.0 * h
        )));
    }
    let dens_bg = medium.cell_density(Metric::Background);
    let dens_inc = medium.cell_density(Metric::Inclusion);
    let base = influence_field(medium, Metric::Background, tau)?;
    let touches_at_zero = (0..medium.domain.ny).any(|j| {
        (0..medium.domain.nx).any(|i| {
            medium.cell_sigma[medium.domain.cell_index(i, j)]
                && base.cell_value(&medium.domain, i, j) <= 0.0
        })
    });
    let mut differences = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let t = tau.shifted(eps, t_max)?;
        let f = influence_field(medium, Metric::Background, &t)?;
        let ft = influence_field(medium, Metric::Inclusion, &t)?;
        let v = field_volume(&medium.domain, &f, &dens_bg, quad);
        let vt = field_volume(&medium.domain, &ft, &dens_inc, quad);
        differences.push(v - vt);
    }
    let noise = 10.0 * h * h;
    let (xs, ys): (Vec<f64>, Vec<f64>) = eps_list
        .iter()
        .zip(&differences)
        .filter(|(_, &d)| d > noise)
        .map(|(&e, &d)| (e.ln(), d.ln()))
        .unzip();
    let outcome = if xs.len() >= 2 {
        ProbeOutcome::Separated {
            exponent: ls_slope(&xs, &ys),
            points_used: xs.len(),
        }
    } else {
        ProbeOutcome::NoSeparation
    };
    Ok(ProbeResult {
        eps: eps_list.to_vec(),
        differences,
        outcome,
        touches_at_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [0.1f64, 0.05, 0.02, 0.01].iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = [0.1f64, 0.05, 0.02, 0.01]
            .iter()
            .map(|e| (3.0 * e.powf(1.5)).ln())
            .collect();
        assert!((ls_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }
}
