//! Boundary signals on `(0, 2T) x dM` and the space `S` they live in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid on `(0, 2T)` with `nt = 2 * half` cells.
///
/// Sample `k` represents the interval `[k dt, (k + 1) dt]` and sits at its
/// midpoint, so time reversal `t -> 2T - t` maps sample `k` to `nt - 1 - k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub half: usize,
    pub dt: f64,
}

impl TimeGrid {
    /// Largest grid with `dt <= dt_max` whose half length is a multiple of `multiple`.
    pub fn new(t_final: f64, dt_max: f64, multiple: usize) -> Result<Self> {
        if !(t_final > 0.0 && dt_max > 0.0) || multiple == 0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs T > 0 and dt > 0, got T = {t_final}, dt = {dt_max}"
            )));
        }
        let blocks = (t_final / (dt_max * multiple as f64) - 1e-9).ceil().max(1.0) as usize;
        let half = blocks * multiple;
        Ok(Self {
            t_final,
            half,
            dt: t_final / half as f64,
        })
    }

    #[inline]
    pub fn nt(&self) -> usize {
        2 * self.half
    }

    /// Midpoint of sample `k`.
    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }
}

/// Samples over time steps x boundary nodes, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySignal {
    pub nt: usize,
    pub nb: usize,
    pub data: Vec<f64>,
}

impl BoundarySignal {
    pub fn zeros(nt: usize, nb: usize) -> Self {
        Self {
            nt,
            nb,
            data: vec![0.0; nt * nb],
        }
    }

    pub fn from_fn(nt: usize, nb: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(nt, nb);
        for k in 0..nt {
            for b in 0..nb {
                s.data[k * nb + b] = f(k, b);
            }
        }
        s
    }

    #[inline]
    pub fn get(&self, k: usize, b: usize) -> f64 {
        self.data[k * self.nb + b]
    }

    #[inline]
    pub fn set(&mut self, k: usize, b: usize, v: f64) {
        self.data[k * self.nb + b] = v;
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.nb..(k + 1) * self.nb]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nt == other.nt && self.nb == other.nb
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            nt: self.nt,
            nb: self.nb,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }
}

/// `S = L^2((0, 2T) x dM; dt (x) dS_g)` on the discrete grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpace {
    pub time: TimeGrid,
    /// Quadrature weights of `dS_g` per boundary node.
    pub weights: Vec<f64>,
}

impl SignalSpace {
    pub fn new(time: TimeGrid, weights: Vec<f64>) -> Self {
        Self { time, weights }
    }

    pub fn nt(&self) -> usize {
        self.time.nt()
    }

    pub fn nb(&self) -> usize {
        self.weights.len()
    }

    pub fn zeros(&self) -> BoundarySignal {
        BoundarySignal::zeros(self.nt(), self.nb())
    }

    pub fn ones(&self) -> BoundarySignal {
        let mut s = self.zeros();
        s.data.iter_mut().for_each(|x| *x = 1.0);
        s
    }

    pub fn check(&self, f: &BoundarySignal) -> Result<()> {
        if f.nt != self.nt() || f.nb != self.nb() {
            return Err(Error::InvalidArgument(format!(
                "signal shape {}x{} does not match {}x{}",
                f.nt,
                f.nb,
                self.nt(),
                self.nb()
            )));
        }
        Ok(())
    }

    pub fn inner(&self, f: &BoundarySignal, g: &BoundarySignal) -> f64 {
        debug_assert!(f.same_shape(g));
        let nb = self.nb();
        let mut total = 0.0;
        for k in 0..f.nt {
            let (a, b) = (&f.data[k * nb..(k + 1) * nb], &g.data[k * nb..(k + 1) * nb]);
            total += a
                .iter()
                .zip(b)
                .zip(&self.weights)
                .map(|((x, y), w)| x * y * w)
                .sum::<f64>();
        }
        total * self.time.dt
    }

    pub fn norm(&self, f: &BoundarySignal) -> f64 {
        self.inner(f, f).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn time_grid_respects_step_bound_and_multiple() {
        let g = TimeGrid::new(1.5, 1.0 / 128.0, 48).unwrap();
        assert_eq!(g.half % 48, 0);
        assert!(g.dt <= 1.0 / 128.0 + 1e-15);
        assert!((g.nt() as f64 * g.dt - 3.0).abs() < 1e-12);
        assert!((g.t(g.nt() - 1) - (3.0 - 0.5 * g.dt)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric_and_positive(
            vals in proptest::collection::vec(-1.0f64..1.0, 24),
            other in proptest::collection::vec(-1.0f64..1.0, 24),
        ) {
            let space = SignalSpace::new(
                TimeGrid { t_final: 1.0, half: 3, dt: 1.0 / 3.0 },
                vec![0.5, 1.0, 0.25, 2.0],
            );
            let f = BoundarySignal { nt: 6, nb: 4, data: vals };
            let g = BoundarySignal { nt: 6, nb: 4, data: other };
            prop_assert!((space.inner(&f, &g) - space.inner(&g, &f)).abs() < 1e-14);
            if !f.is_zero() {
                prop_assert!(space.inner(&f, &f) > 0.0);
            }
        }
    }
}
