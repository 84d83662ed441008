//! Leapfrog solver for `u_tt = c~^2 Lap u` with Neumann boundary sources.
//!
//! Space: 5-point Laplacian on the node grid. The Neumann condition
//! `d_nu u = f` (with `d_nu = c0 d_n` for the conformal metric) is imposed
//! through ghost nodes `u_ghost = u_inner + 2 h f / c0`; eliminating the ghosts
//! gives half-weight edges along the boundary and a boundary load
//! `(h / c0) f`. The density `c~^-2` is lumped onto the nodes from the four
//! surrounding cell centres.
//!
//! Time: `u^{n+1} = 2 u^n - u^{n-1} + dt^2 M^-1 (-A u^n + B F^n)` from
//! `u^0 = u^-1 = 0`, with `F^n` the mean of the two signal samples adjacent to
//! `t = n dt` and traces reported at sample midpoints as `(u^k + u^{k+1}) / 2`.
//! Every step has the same form, so the discrete map from sources to traces
//! is exactly shift invariant in time.

use crate::error::{Error, Result};
use crate::forward::signal::{BoundarySignal, SignalSpace, TimeGrid};
use crate::geometry::speed::Medium;

/// Hard stability bound of the explicit scheme in 2D.
pub const CFL_STABILITY_LIMIT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// What a solve should keep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Record {
    pub trace: bool,
    pub snapshot: bool,
    pub energy: bool,
}

impl Record {
    pub const TRACE: Record = Record {
        trace: true,
        snapshot: false,
        energy: false,
    };
    pub const ALL: Record = Record {
        trace: true,
        snapshot: true,
        energy: true,
    };
}

#[derive(Debug, Clone, Default)]
pub struct WaveOutput {
    pub trace: Option<BoundarySignal>,
    /// `u` at `t = T` (step `half` of the time grid).
    pub snapshot: Option<Vec<f64>>,
    /// Staggered leapfrog energy after every step.
    pub energies: Option<Vec<f64>>,
}

/// A forward solver bound to one medium and one time grid.
#[derive(Debug, Clone)]
pub struct WaveSolver {
    nx: usize,
    ny: usize,
    h: f64,
    time: TimeGrid,
    /// Lumped nodal mass `sum_cells c~^-2 h^2 / 4`.
    mass: Vec<f64>,
    inv_mass: Vec<f64>,
    /// Horizontal edge weights, `(ny + 1) x nx`.
    ex: Vec<f64>,
    /// Vertical edge weights, `ny x (nx + 1)`.
    ey: Vec<f64>,
    boundary_nodes: Vec<usize>,
    space: SignalSpace,
    cfl_ratio: f64,
}

impl WaveSolver {
    /// Checks `dt <= cfl * h / max(c~)` and `cfl` below the stability limit.
    pub fn new(medium: &Medium, time: TimeGrid, cfl: f64) -> Result<Self> {
        let d = &medium.domain;
        let (nx, ny, h) = (d.nx, d.ny, d.h);
        let c_max = medium.max_speed();
        let ratio = time.dt * c_max / h;
        let limit = cfl.min(CFL_STABILITY_LIMIT);
        if !(cfl > 0.0) || ratio > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { ratio, limit });
        }
        let mut mass = vec![0.0; d.node_count()];
        for j in 0..ny {
            for i in 0..nx {
                let c = medium.cell_speed[d.cell_index(i, j)];
                let q = 0.25 * h * h / (c * c);
                mass[d.node_index(i, j)] += q;
                mass[d.node_index(i + 1, j)] += q;
                mass[d.node_index(i, j + 1)] += q;
                mass[d.node_index(i + 1, j + 1)] += q;
            }
        }
        let inv_mass = mass.iter().map(|m| 1.0 / m).collect();
        let mut ex = vec![1.0; (ny + 1) * nx];
        for i in 0..nx {
            ex[i] = 0.5;
            ex[ny * nx + i] = 0.5;
        }
        let mut ey = vec![1.0; ny * (nx + 1)];
        for j in 0..ny {
            ey[j * (nx + 1)] = 0.5;
            ey[j * (nx + 1) + nx] = 0.5;
        }
        let space = SignalSpace::new(time, medium.boundary_weights());
        Ok(Self {
            nx,
            ny,
            h,
            time,
            mass,
            inv_mass,
            ex,
            ey,
            boundary_nodes: d.boundary_node_indices(),
            space,
            cfl_ratio: ratio,
        })
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn space(&self) -> &SignalSpace {
        &self.space
    }

    pub fn cfl_ratio(&self) -> f64 {
        self.cfl_ratio
    }

    /// Lumped nodal mass of `m~`; `(u, v)_{L^2(m~)} = sum mass u v`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn node_count(&self) -> usize {
        self.mass.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `acc = -A u`.
    fn stiffness(&self, u: &[f64], acc: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let stride = nx + 1;
        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..=ny {
            let row = j * stride;
            let ew = &self.ex[j * nx..(j + 1) * nx];
            for i in 0..nx {
                let a = row + i;
                let flux = ew[i] * (u[a + 1] - u[a]);
                acc[a] += flux;
                acc[a + 1] -= flux;
            }
        }
        for j in 0..ny {
            let row = j * stride;
            let ew = &self.ey[j * stride..(j + 1) * stride];
            for i in 0..=nx {
                let a = row + i;
                let b = a + stride;
                let flux = ew[i] * (u[b] - u[a]);
                acc[a] += flux;
                acc[b] -= flux;
            }
        }
    }

    /// `u^T A v` summed edge by edge.
    fn edge_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let stride = nx + 1;
        let mut e = 0.0;
        for j in 0..=ny {
            for i in 0..nx {
                let a = j * stride + i;
                e += self.ex[j * nx + i] * (u[a + 1] - u[a]) * (v[a + 1] - v[a]);
            }
        }
        for j in 0..ny {
            for i in 0..=nx {
                let a = j * stride + i;
                e += self.ey[j * stride + i] * (u[a + stride] - u[a]) * (v[a + stride] - v[a]);
            }
        }
        e
    }

    /// Run the scheme over `(0, 2T)` for the Neumann source `f`.
    pub fn solve(&self, f: &BoundarySignal, record: Record) -> Result<WaveOutput> {
        self.space.check(f)?;
        let n = self.node_count();
        let nt = self.time.nt();
        let nb = self.boundary_nodes.len();
        let dt2 = self.time.dt * self.time.dt;
        let weights = &self.space.weights;
        let mut u_prev = vec![0.0; n];
        let mut u = vec![0.0; n];
        let mut u_next = vec![0.0; n];
        let mut acc = vec![0.0; n];
        let mut trace = record.trace.then(|| BoundarySignal::zeros(nt, nb));
        let mut snapshot = None;
        let mut energies = record.energy.then(|| Vec::with_capacity(nt));
        if record.snapshot && self.time.half == 0 {
            snapshot = Some(u.clone());
        }

        for step in 0..nt {
            self.stiffness(&u, &mut acc);
            let cur = f.row(step);
            for (b, &node) in self.boundary_nodes.iter().enumerate() {
                let prev = if step > 0 { f.get(step - 1, b) } else { 0.0 };
                acc[node] += weights[b] * 0.5 * (prev + cur[b]);
            }
            for k in 0..n {
                u_next[k] = 2.0 * u[k] - u_prev[k] + dt2 * self.inv_mass[k] * acc[k];
            }
            if step % 100 == 99 || step + 1 == nt {
                if u_next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { step: step + 1 });
                }
            }
            if let Some(tr) = trace.as_mut() {
                let row = &mut tr.data[step * nb..(step + 1) * nb];
                for (b, &node) in self.boundary_nodes.iter().enumerate() {
                    row[b] = 0.5 * (u[node] + u_next[node]);
                }
            }
            if let Some(es) = energies.as_mut() {
                let inv_dt = 1.0 / self.time.dt;
                let kinetic: f64 = (0..n)
                    .map(|k| {
                        let v = (u_next[k] - u[k]) * inv_dt;
                        self.mass[k] * v * v
                    })
                    .sum();
                es.push(0.5 * kinetic + 0.5 * self.edge_form(&u_next, &u));
            }
            std::mem::swap(&mut u_prev, &mut u);
            std::mem::swap(&mut u, &mut u_next);
            if record.snapshot && step + 1 == self.time.half {
                snapshot = Some(u.clone());
            }
        }
        Ok(WaveOutput {
            trace,
            snapshot,
            energies,
        })
    }

    /// `(u, v)_{L^2(M; m~)}` for node fields.
    pub fn field_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    /// Continuum energy `1/2 sum (c~^-2 u_t^2 + |grad u|^2) h^2` from two consecutive levels.
    pub fn energy_between(&self, u0: &[f64], u1: &[f64]) -> f64 {
        let inv_dt = 1.0 / self.time.dt;
        let kinetic: f64 = self
            .mass
            .iter()
            .zip(u0.iter().zip(u1))
            .map(|(m, (a, b))| {
                let v = (b - a) * inv_dt;
                m * v * v
            })
            .sum();
        0.5 * kinetic + 0.5 * self.edge_form(u1, u0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::DiscreteDomain;
    use crate::geometry::speed::SpeedModel;

    fn setup(n: usize, t: f64) -> WaveSolver {
        let m = Medium::new(DiscreteDomain::unit_square(n).unwrap(), SpeedModel::constant(1.0)).unwrap();
        let time = TimeGrid::new(t, 0.5 * m.domain.h, 4).unwrap();
        WaveSolver::new(&m, time, 0.5).unwrap()
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let s = setup(16, 0.5);
        let out = s.solve(&s.space().zeros(), Record::ALL).unwrap();
        assert!(out.trace.unwrap().is_zero());
        assert!(out.snapshot.unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn refuses_cfl_violation() {
        let m = Medium::new(DiscreteDomain::unit_square(16).unwrap(), SpeedModel::constant(1.0)).unwrap();
        let time = TimeGrid::new(0.5, m.domain.h, 1).unwrap();
        assert!(matches!(WaveSolver::new(&m, time, 0.5), Err(Error::Cfl { .. })));
        assert!(matches!(WaveSolver::new(&m, time, 1.0), Err(Error::Cfl { .. })));
    }

    #[test]
    fn mass_sums_to_total_volume() {
        let s = setup(16, 0.5);
        assert!((s.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_flux_balances_mass() {
        // d^2/dt^2 (u, 1)_m~ = int f dS_g
        let s = setup(16, 0.5);
        let f = s.space().ones();
        let out = s.solve(&f, Record { snapshot: true, ..Record::default() }).unwrap();
        let t = s.time().t_final;
        let total: f64 = s.mass().iter().zip(out.snapshot.unwrap()).map(|(m, u)| m * u).sum();
        // exact for the scheme up to the half-sample start-up
        let expect = 0.5 * t * t * 4.0;
        assert!((total - expect).abs() < 2.0 * s.time().dt * t * 4.0, "{total} vs {expect}");
    }
}
