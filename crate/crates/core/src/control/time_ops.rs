//! Time operators `R`, `J`, `I` and `I+` on the sample grid of [`TimeGrid`].
//!
//! All act sample-wise along time and independently per boundary node. With
//! `N = half` and `dt` the sample width:
//!
//! * `R f_k = f_{nt-1-k}`
//! * `J f_j = dt/2 (f_j / 2 + sum_{j<k<nt-1-j} f_k + f_{nt-1-j} / 2)` for `j < N`, else 0
//! * `I f_j = dt (sum_{k<j} f_k + f_j / 2)` for `j < N`, else 0
//! * `I+` is the transpose of `I` (the time weights are uniform, so this is
//!   the adjoint in `S`).
//!
//! `J 1 = (T - t)_+` and `I+ 1 = (T - s)_+` hold exactly at the sample midpoints.

use crate::forward::signal::BoundarySignal;

pub fn reverse_profile(f: &[f64]) -> Vec<f64> {
    f.iter().rev().copied().collect()
}

pub fn j_profile(f: &[f64], half: usize, dt: f64) -> Vec<f64> {
    let nt = f.len();
    debug_assert_eq!(nt, 2 * half);
    // suffix[k] = sum_{m >= k} f_m
    let mut suffix = vec![0.0; nt + 1];
    for k in (0..nt).rev() {
        suffix[k] = suffix[k + 1] + f[k];
    }
    let mut out = vec![0.0; nt];
    for (j, o) in out.iter_mut().enumerate().take(half) {
        let last = nt - 1 - j;
        let inner = suffix[j + 1] - suffix[last];
        *o = 0.5 * dt * (0.5 * f[j] + inner + 0.5 * f[last]);
    }
    out
}

/// Transpose of [`j_profile`] as a matrix over samples.
pub fn j_transpose_profile(g: &[f64], half: usize, dt: f64) -> Vec<f64> {
    let nt = g.len();
    let mut out = vec![0.0; nt];
    // Row j spreads g_j over (j, nt-1-j) with weight 1 and its endpoints with 1/2.
    // Difference array for the interior ranges.
    let mut diff = vec![0.0; nt + 1];
    for j in 0..half {
        let w = 0.5 * dt * g[j];
        let last = nt - 1 - j;
        out[j] += 0.5 * w;
        out[last] += 0.5 * w;
        diff[j + 1] += w;
        diff[last] -= w;
    }
    let mut run = 0.0;
    for k in 0..nt {
        run += diff[k];
        out[k] += run;
    }
    out
}

pub fn i_profile(f: &[f64], half: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    let mut acc = 0.0;
    for j in 0..half {
        out[j] = dt * (acc + 0.5 * f[j]);
        acc += f[j];
    }
    out
}

pub fn i_adjoint_profile(g: &[f64], half: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let mut acc = 0.0;
    for k in (0..half).rev() {
        out[k] = dt * (0.5 * g[k] + acc);
        acc += g[k];
    }
    out
}

fn per_node(f: &BoundarySignal, op: impl Fn(&[f64]) -> Vec<f64>) -> BoundarySignal {
    let mut out = BoundarySignal::zeros(f.nt, f.nb);
    let mut col = vec![0.0; f.nt];
    for b in 0..f.nb {
        for (k, c) in col.iter_mut().enumerate() {
            *c = f.get(k, b);
        }
        for (k, v) in op(&col).into_iter().enumerate() {
            out.set(k, b, v);
        }
    }
    out
}

pub fn op_r(f: &BoundarySignal) -> BoundarySignal {
    let mut out = BoundarySignal::zeros(f.nt, f.nb);
    for k in 0..f.nt {
        let src = f.row(f.nt - 1 - k);
        out.data[k * f.nb..(k + 1) * f.nb].copy_from_slice(src);
    }
    out
}

pub fn op_j(f: &BoundarySignal, half: usize, dt: f64) -> BoundarySignal {
    per_node(f, |c| j_profile(c, half, dt))
}

pub fn op_i(f: &BoundarySignal, half: usize, dt: f64) -> BoundarySignal {
    per_node(f, |c| i_profile(c, half, dt))
}

pub fn op_i_adj(f: &BoundarySignal, half: usize, dt: f64) -> BoundarySignal {
    per_node(f, |c| i_adjoint_profile(c, half, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::signal::{SignalSpace, TimeGrid};
    use proptest::prelude::*;

    const HALF: usize = 10;
    const DT: f64 = 0.1;

    fn space() -> SignalSpace {
        SignalSpace::new(
            TimeGrid {
                t_final: 1.0,
                half: HALF,
                dt: DT,
            },
            vec![0.3, 0.5, 0.2],
        )
    }

    fn dense(op: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                op(&e)
            })
            .collect()
    }

    #[test]
    fn closed_forms_on_constants() {
        let t = 1.0;
        let ones = vec![1.0; 2 * HALF];
        let j1 = j_profile(&ones, HALF, DT);
        let i1 = i_profile(&ones, HALF, DT);
        let ia1 = i_adjoint_profile(&ones, HALF, DT);
        for k in 0..2 * HALF {
            let s = (k as f64 + 0.5) * DT;
            assert!((j1[k] - (t - s).max(0.0)).abs() < 1e-12);
            assert!((ia1[k] - (t - s).max(0.0)).abs() < 1e-12);
            let expect = if s < t { s } else { 0.0 };
            assert!((i1[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn j_transpose_matches_dense_transpose() {
        let n = 2 * HALF;
        let j = dense(|f| j_profile(f, HALF, DT), n);
        let jt = dense(|f| j_transpose_profile(f, HALF, DT), n);
        for a in 0..n {
            for b in 0..n {
                assert!((j[a][b] - jt[b][a]).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn adjoint_identities(
            fv in proptest::collection::vec(-1.0f64..1.0, 60),
            gv in proptest::collection::vec(-1.0f64..1.0, 60),
        ) {
            let s = space();
            let f = BoundarySignal { nt: 20, nb: 3, data: fv };
            let g = BoundarySignal { nt: 20, nb: 3, data: gv };
            let scale = s.norm(&f) * s.norm(&g) + 1e-300;
            let lhs = s.inner(&op_i(&f, HALF, DT), &g);
            let rhs = s.inner(&f, &op_i_adj(&g, HALF, DT));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            prop_assert_eq!(op_r(&op_r(&f)), f.clone());
            let r1 = s.inner(&op_r(&f), &g);
            let r2 = s.inner(&f, &op_r(&g));
            prop_assert!((r1 - r2).abs() <= 1e-12 * scale);
        }
    }
}
