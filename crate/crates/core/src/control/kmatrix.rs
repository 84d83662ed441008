//! The operator `K = J Lambda - R Lambda R J` and its matrix on the source basis.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::control::time_ops::{j_profile, j_transpose_profile, op_j, op_r, reverse_profile};
use crate::error::{Error, Result};
use crate::forward::basis::SourceBasis;
use crate::forward::lambda::LambdaOperator;
use crate::forward::signal::BoundarySignal;

/// `K f = J Lambda f - R Lambda R J f`, two forward solves.
pub fn apply_k(lambda: &LambdaOperator, f: &BoundarySignal) -> Result<BoundarySignal> {
    let t = lambda.time();
    let mut out = op_j(&lambda.apply(f)?, t.half, t.dt);
    let back = op_r(&lambda.apply(&op_r(&op_j(f, t.half, t.dt)))?);
    out.axpy(-1.0, &back);
    Ok(out)
}

/// Dense symmetric `K_ij = <b_i, K b_j>_S`.
#[derive(Debug, Clone)]
pub struct KMatrix {
    pub n: usize,
    /// Row-major, symmetrised.
    pub data: Vec<f64>,
    /// `||K - K^T||_F / ||K||_F` before symmetrisation.
    pub asymmetry: f64,
    norm: OnceLock<f64>,
}

impl KMatrix {
    /// Symmetrise a raw row-major matrix, recording its asymmetry.
    pub fn from_raw(n: usize, mut data: Vec<f64>) -> Self {
        let mut skew = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = data[i * n + j] - data[j * n + i];
                skew += d * d;
                total += data[i * n + j] * data[i * n + j];
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = m;
                data[j * n + i] = m;
            }
        }
        let asymmetry = if total > 0.0 { (skew / total).sqrt() } else { 0.0 };
        Self {
            n,
            data,
            asymmetry,
            norm: OnceLock::new(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Principal submatrix on `idx`, row-major.
    pub fn submatrix(&self, idx: &[usize]) -> Vec<f64> {
        let m = idx.len();
        let mut out = Vec::with_capacity(m * m);
        for &i in idx {
            out.extend(idx.iter().map(|&j| self.get(i, j)));
        }
        out
    }

    /// `||K||_2` from 20 power iterations, computed once.
    pub fn norm(&self) -> f64 {
        *self.norm.get_or_init(|| self.norm_estimate(20))
    }

    /// `||K||_2` by power iteration from a fixed start vector.
    pub fn norm_estimate(&self, iterations: usize) -> f64 {
        let mut x: Vec<f64> = (0..self.n).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..iterations.max(1) {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.matvec(&x);
            lambda = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y;
        }
        lambda
    }
}

/// Assemble `K` on the basis from the stored patch impulse responses.
///
/// With `G_q(tau, y)` the trace at lag `tau` from a unit pulse on patch `q`,
/// `K_ij = dt a_i a_j sum_tau H_{p_i p_j}(tau) X_{b_i b_j}(tau)` where `H`
/// integrates `G` over the receiving patch and `X` collects the time
/// operators applied to the two bin indicators.
pub fn assemble_k(lambda: &LambdaOperator) -> Result<KMatrix> {
    let resp = lambda.responses().ok_or_else(|| {
        Error::BasisMismatch("matrix assembly needs a precomputed operator".into())
    })?;
    let basis: &SourceBasis = lambda.basis();
    let t = lambda.time();
    let (nt, nb, half, dt) = (resp.nt, resp.nb, t.half, t.dt);
    let n_patch = basis.spec.n_patch;
    let n_bin = basis.spec.n_bin;
    let weights = &lambda.space().weights;

    // h[(p * n_patch + q) * nt + tau]
    let mut h = vec![0.0; n_patch * n_patch * nt];
    h.par_chunks_mut(n_patch * nt).enumerate().for_each(|(p, rows)| {
        let range = basis.patch(p);
        for q in 0..n_patch {
            let g = resp.column(q);
            for tau in 0..nt {
                let row = &g[tau * nb..(tau + 1) * nb];
                rows[q * nt + tau] = range.clone().map(|y| weights[y] * row[y]).sum();
            }
        }
    });

    let indicator = |b: usize| {
        let mut e = vec![0.0; nt];
        for k in basis.bin_samples(b) {
            e[k] = 1.0;
        }
        e
    };
    let jt: Vec<Vec<f64>> = (0..n_bin).map(|b| j_transpose_profile(&indicator(b), half, dt)).collect();
    let rj: Vec<Vec<f64>> = (0..n_bin)
        .map(|b| reverse_profile(&j_profile(&indicator(b), half, dt)))
        .collect();

    // x[(b * n_bin + c) * nt + tau]
    let len = basis.bin_len();
    let mut x = vec![0.0; n_bin * n_bin * nt];
    x.par_chunks_mut(n_bin * nt).enumerate().for_each(|(b, rows)| {
        // R e_b is the indicator of the mirrored bin.
        let mirror = nt - (b + 1) * len..nt - b * len;
        for c in 0..n_bin {
            let out = &mut rows[c * nt..(c + 1) * nt];
            for k in basis.bin_samples(c) {
                for (tau, o) in out.iter_mut().enumerate().take(nt - k) {
                    *o += jt[b][k + tau];
                }
            }
            for m in mirror.clone() {
                for (tau, o) in out.iter_mut().enumerate().take(m + 1) {
                    *o -= rj[c][m - tau];
                }
            }
        }
    });

    let n = basis.len();
    let mut raw = vec![0.0; n * n];
    raw.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let (pi, bi) = basis.split(i);
        let ai = basis.amplitude(pi);
        for (j, r) in row.iter_mut().enumerate() {
            let (pj, bj) = basis.split(j);
            let hv = &h[(pi * n_patch + pj) * nt..(pi * n_patch + pj + 1) * nt];
            let xv = &x[(bi * n_bin + bj) * nt..(bi * n_bin + bj + 1) * nt];
            let s: f64 = hv.iter().zip(xv).map(|(a, b)| a * b).sum();
            *r = dt * ai * basis.amplitude(pj) * s;
        }
    });
    Ok(KMatrix::from_raw(n, raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::basis::BasisSpec;
    use crate::forward::lambda::assemble_lambda_matrix;
    use crate::forward::signal::TimeGrid;
    use crate::geometry::domain::DiscreteDomain;
    use crate::geometry::speed::{Medium, Shape, SpeedModel};

    fn op() -> LambdaOperator {
        let d = DiscreteDomain::unit_square(12).unwrap();
        let shape = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.2,
        };
        let m = Medium::new(d, SpeedModel::constant(1.0).with_inclusion(shape, 2.0)).unwrap();
        let time = TimeGrid::new(0.6, 0.5 * m.domain.h / 2.0, 4).unwrap();
        assemble_lambda_matrix(&m, time, 0.5, BasisSpec { n_patch: 6, n_bin: 4 }).unwrap()
    }

    #[test]
    fn assembled_entries_match_matrix_free_pairs() {
        let lambda = op();
        let k = assemble_k(&lambda).unwrap();
        let basis = lambda.basis();
        let space = lambda.space();
        for j in [0, 5, 11, 17, 23] {
            let kb = apply_k(&lambda, &basis.element(j)).unwrap();
            let mf = lambda.apply_matrix_free(&basis.element(j)).unwrap();
            assert!(mf.max_abs() > 0.0);
            for i in [0, 3, 11, 18, 23] {
                let direct = space.inner(&basis.element(i), &kb);
                let sym = 0.5 * (direct + space.inner(&basis.element(j), &apply_k(&lambda, &basis.element(i)).unwrap()));
                assert!((k.get(i, j) - sym).abs() < 1e-10 * k.norm_estimate(20), "({i},{j})");
            }
        }
    }

    #[test]
    fn zero_source_zero_k() {
        let lambda = op();
        let z = lambda.space().zeros();
        assert!(apply_k(&lambda, &z).unwrap().is_zero());
    }

    #[test]
    fn symmetrisation_records_defect() {
        let k = KMatrix::from_raw(2, vec![1.0, 2.0, 0.0, 1.0]);
        assert_eq!(k.get(0, 1), 1.0);
        assert_eq!(k.get(1, 0), 1.0);
        assert!((k.asymmetry - (8.0f64 / 6.0).sqrt()).abs() < 1e-12);
    }
}
