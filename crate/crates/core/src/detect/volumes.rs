//! Paired volume data `(V(tau), V~(tau))` for a given `tau`.

use crate::control::{estimate_volume_scheduled, AlphaSchedule, KMatrix, Provenance, SolveOptions};
use crate::control::kmatrix::assemble_k;
use crate::error::{Error, Result};
use crate::forward::basis::SourceBasis;
use crate::forward::lambda::LambdaOperator;
use crate::geometry::region::{influence_volume, Quadrature, TauFunction};
use crate::geometry::speed::{Medium, Metric};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    /// `V(tau)` from the known background.
    pub background: f64,
    /// `V~(tau)` from the measurements.
    pub measured: f64,
    /// False when either estimate flagged its extrapolation.
    pub reliable: bool,
}

impl PairSample {
    pub fn gap(&self) -> f64 {
        self.background - self.measured
    }
}

pub trait VolumePair: Sync {
    fn volumes(&self, tau: &TauFunction) -> Result<PairSample>;
    fn provenance(&self) -> Provenance;
}

/// Both volumes from the travel-time geometry of one medium.
#[derive(Debug, Clone)]
pub struct OraclePair {
    pub medium: Medium,
    pub quad: Quadrature,
}

impl VolumePair for OraclePair {
    fn volumes(&self, tau: &TauFunction) -> Result<PairSample> {
        Ok(PairSample {
            background: influence_volume(&self.medium, Metric::Background, tau, self.quad)?,
            measured: influence_volume(&self.medium, Metric::Inclusion, tau, self.quad)?,
            reliable: true,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Oracle
    }
}

/// Both volumes from boundary control: `V~` from the measured operator, `V`
/// from the operator simulated on the known background with the same grid,
/// basis and weights, so that discretisation bias cancels in the difference.
#[derive(Debug, Clone)]
pub struct ControlPair {
    pub measured: KMatrix,
    pub background: KMatrix,
    pub basis: SourceBasis,
    pub schedule: AlphaSchedule,
    pub opts: SolveOptions,
}

impl ControlPair {
    pub fn new(
        measured: &LambdaOperator,
        background: &LambdaOperator,
        schedule: AlphaSchedule,
        opts: SolveOptions,
    ) -> Result<Self> {
        if measured.basis() != background.basis() || measured.time() != background.time() {
            return Err(Error::BasisMismatch(
                "measured and background operators use different discretisations".into(),
            ));
        }
        Ok(Self {
            measured: assemble_k(measured)?,
            background: assemble_k(background)?,
            basis: measured.basis().clone(),
            schedule,
            opts,
        })
    }
}

impl VolumePair for ControlPair {
    fn volumes(&self, tau: &TauFunction) -> Result<PairSample> {
        let v = estimate_volume_scheduled(
            &self.background,
            &self.basis,
            tau,
            &self.schedule,
            &self.background,
            &self.opts,
        )?;
        let vt = estimate_volume_scheduled(
            &self.measured,
            &self.basis,
            tau,
            &self.schedule,
            &self.background,
            &self.opts,
        )?;
        Ok(PairSample {
            background: v.value,
            measured: vt.value,
            reliable: v.reliable && vt.reliable,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Control
    }
}
