//! Projection `P_tau`, the regularised control equation and the volume estimator.

use serde::{Deserialize, Serialize};

use crate::control::kmatrix::KMatrix;
use crate::error::{Error, Result};
use crate::forward::basis::SourceBasis;
use crate::forward::signal::BoundarySignal;
use crate::geometry::region::TauFunction;

/// `P_tau` on the source basis: a 0/1 diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMask {
    pub keep: Vec<bool>,
    /// Per-patch `tau` after snapping down to a whole number of time bins.
    pub tau_snapped: Vec<f64>,
}

impl ControlMask {
    /// Element `(p, b)` is kept when its time bin lies in `[T - tau_p, T]`,
    /// `tau_p` being `tau` at the patch centre snapped down to a bin boundary.
    pub fn from_tau(basis: &SourceBasis, tau: &TauFunction) -> Result<Self> {
        let nb = basis.space().nb();
        if tau.values.len() != nb {
            return Err(Error::BasisMismatch(format!(
                "tau has {} values for {nb} boundary nodes",
                tau.values.len()
            )));
        }
        let n_bin = basis.spec.n_bin;
        let width = basis.bin_width();
        let mut keep = vec![false; basis.len()];
        let mut tau_snapped = Vec::with_capacity(basis.spec.n_patch);
        for p in 0..basis.spec.n_patch {
            let v = tau.values[basis.patch_center(p)];
            let bins = ((v / width + 1e-9).floor() as usize).min(n_bin);
            tau_snapped.push(bins as f64 * width);
            for b in n_bin - bins..n_bin {
                keep[basis.index(p, b)] = true;
            }
        }
        Ok(Self { keep, tau_snapped })
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.keep.len()).filter(|&i| self.keep[i]).collect()
    }

    pub fn apply(&self, coeffs: &mut [f64]) {
        for (c, &k) in coeffs.iter_mut().zip(&self.keep) {
            if !k {
                *c = 0.0;
            }
        }
    }
}

/// `P_tau f` for a signal in the span of the basis.
pub fn project_tau(basis: &SourceBasis, mask: &ControlMask, f: &BoundarySignal) -> Result<BoundarySignal> {
    let mut c = basis.coefficients(f)?;
    mask.apply(&mut c);
    Ok(basis.expand(&c))
}

/// `<b_i, (T - s)_+>_S`, exact for piecewise-constant elements.
pub fn rhs_coefficients(basis: &SourceBasis) -> Vec<f64> {
    let t = basis.space().time;
    let width = basis.bin_width();
    (0..basis.len())
        .map(|i| {
            let (p, b) = basis.split(i);
            let w: f64 = basis.patch(p).map(|y| basis.space().weights[y]).sum();
            let s0 = b as f64 * width;
            let s1 = s0 + width;
            let integral = t.t_final * width - 0.5 * (s1 * s1 - s0 * s0);
            basis.amplitude(p) * w * integral
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrylovMethod {
    ConjugateGradient,
    /// Minimises the residual over the Krylov space, so its norm never increases.
    ConjugateResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    pub tol: f64,
    /// Defaults to ten times the system size.
    pub max_iter: Option<usize>,
    pub method: KrylovMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
            method: KrylovMethod::ConjugateResidual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(a: &[f64], x: &[f64], alpha: f64) -> Vec<f64> {
    let n = x.len();
    a.chunks_exact(n)
        .zip(x)
        .map(|(row, xi)| dot(row, x) + alpha * xi)
        .collect()
}

/// Solve `(A + alpha) x = b` for a dense symmetric `A`, starting from `x0`.
pub fn krylov_solve(
    a: &[f64],
    alpha: f64,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> (Vec<f64>, SolveDiagnostics) {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if bnorm == 0.0 {
        return (
            vec![0.0; n],
            SolveDiagnostics {
                iterations: 0,
                residual: 0.0,
                converged: true,
                residual_history: vec![0.0],
            },
        );
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let ax = matvec(a, &x, alpha);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut history = vec![dot(&r, &r).sqrt() / bnorm];
    let mut iterations = 0;
    match opts.method {
        KrylovMethod::ConjugateGradient => {
            let mut rr = dot(&r, &r);
            while iterations < max_iter && history[iterations] > opts.tol {
                let ap = matvec(a, &p, alpha);
                let step = rr / dot(&p, &ap);
                for i in 0..n {
                    x[i] += step * p[i];
                    r[i] -= step * ap[i];
                }
                let rr_new = dot(&r, &r);
                let beta = rr_new / rr;
                rr = rr_new;
                for i in 0..n {
                    p[i] = r[i] + beta * p[i];
                }
                iterations += 1;
                history.push(rr.sqrt() / bnorm);
            }
        }
        KrylovMethod::ConjugateResidual => {
            let mut ar = matvec(a, &r, alpha);
            let mut ap = ar.clone();
            let mut rar = dot(&r, &ar);
            while iterations < max_iter && history[iterations] > opts.tol {
                let step = rar / dot(&ap, &ap);
                for i in 0..n {
                    x[i] += step * p[i];
                    r[i] -= step * ap[i];
                }
                ar = matvec(a, &r, alpha);
                let rar_new = dot(&r, &ar);
                let beta = rar_new / rar;
                rar = rar_new;
                for i in 0..n {
                    p[i] = r[i] + beta * p[i];
                    ap[i] = ar[i] + beta * ap[i];
                }
                iterations += 1;
                history.push(dot(&r, &r).sqrt() / bnorm);
            }
        }
    }
    let residual = *history.last().unwrap();
    (
        x,
        SolveDiagnostics {
            iterations,
            residual,
            converged: residual <= opts.tol,
            residual_history: history,
        },
    )
}

/// `(P K P + alpha) f = P I+ 1` on the basis.
#[derive(Debug, Clone)]
pub struct ControlProblem<'a> {
    pub k: &'a KMatrix,
    pub mask: ControlMask,
    pub alpha: f64,
    /// Full `I+ 1` coefficients; the mask is applied when solving.
    pub rhs: Vec<f64>,
}

impl ControlProblem<'_> {
    /// Coefficients of `f_alpha` (zero off the mask).
    pub fn solve(&self, opts: &SolveOptions) -> Result<(Vec<f64>, SolveDiagnostics)> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        let idx = self.mask.indices();
        let a = self.k.submatrix(&idx);
        let b: Vec<f64> = idx.iter().map(|&i| self.rhs[i]).collect();
        let (x, diag) = krylov_solve(&a, self.alpha, &b, None, opts);
        let mut full = vec![0.0; self.k.n];
        for (&i, v) in idx.iter().zip(x) {
            full[i] = v;
        }
        Ok((full, diag))
    }
}

/// `alpha_k = 10^-k ||K||` for `k` in `exponents`.
pub fn alpha_schedule(k_norm: f64, exponents: &[i32]) -> Vec<f64> {
    exponents.iter().map(|&e| 10f64.powi(-e) * k_norm).collect()
}

/// Which norm the regularisation weights are relative to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScale {
    /// `||K||`
    Operator,
    /// `||P_tau K P_tau||`, so the schedule tracks the size of the control space.
    Restricted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSchedule {
    pub exponents: Vec<i32>,
    pub scale: AlphaScale,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        Self {
            exponents: vec![1, 2, 3, 4],
            scale: AlphaScale::Restricted,
        }
    }
}

impl AlphaSchedule {
    /// Weights for `tau`'s mask, scaled by the norm of `k`.
    pub fn alphas(&self, k: &KMatrix, mask: &ControlMask) -> Vec<f64> {
        let norm = match self.scale {
            AlphaScale::Operator => k.norm(),
            AlphaScale::Restricted => {
                let idx = mask.indices();
                KMatrix::from_raw(idx.len(), k.submatrix(&idx)).norm_estimate(20)
            }
        };
        alpha_schedule(norm, &self.exponents)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub alpha: f64,
    /// `<I f_alpha, 1>_S`.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub samples: Vec<AlphaSample>,
    /// Fitted `p` in `v(alpha) = v0 + a alpha^p`, when the fit was usable.
    pub exponent: Option<f64>,
    /// Distance between the extrapolated and the last raw value.
    pub fit_residual: f64,
    pub reliable: bool,
}

/// `v0 + a alpha^p` through the last three points of a geometric schedule.
pub fn extrapolate(alphas: &[f64], values: &[f64]) -> (f64, Option<f64>, bool) {
    let n = values.len();
    let last = values[n - 1];
    if n < 3 {
        return (last, None, false);
    }
    let (v1, v2, v3) = (values[n - 3], values[n - 2], values[n - 1]);
    let (d1, d2) = (v2 - v1, v3 - v2);
    let scale = v3.abs().max(1e-300);
    // Non-monotone beyond 5%: do not extrapolate.
    if d1 * d2 < 0.0 && d1.abs().min(d2.abs()) > 0.05 * scale {
        return (last, None, false);
    }
    if d1 == 0.0 || d2 == 0.0 || d1 * d2 < 0.0 {
        return (last, None, true);
    }
    let ratio = d2 / d1;
    if ratio >= 1.0 {
        return (last, None, false);
    }
    let step = (alphas[n - 2] / alphas[n - 1]).ln();
    let p = -ratio.ln() / step;
    (v3 + d2 * ratio / (1.0 - ratio), Some(p), true)
}

/// Control estimate of `m~(M~(tau))` over a decreasing `alpha` schedule.
pub fn estimate_volume(
    k: &KMatrix,
    basis: &SourceBasis,
    tau: &TauFunction,
    alphas: &[f64],
    opts: &SolveOptions,
) -> Result<VolumeEstimate> {
    if alphas.len() < 3 || alphas.windows(2).any(|w| !(w[1] < w[0])) || alphas[alphas.len() - 1] <= 0.0 {
        return Err(Error::InvalidArgument(
            "alpha schedule must be positive, decreasing and have at least 3 entries".into(),
        ));
    }
    let mask = ControlMask::from_tau(basis, tau)?;
    solve_masked(k, basis, &mask, alphas, opts)
}

/// [`estimate_volume`] with weights from `schedule`, scaled by the norm of `scale_from`.
pub fn estimate_volume_scheduled(
    k: &KMatrix,
    basis: &SourceBasis,
    tau: &TauFunction,
    schedule: &AlphaSchedule,
    scale_from: &KMatrix,
    opts: &SolveOptions,
) -> Result<VolumeEstimate> {
    let mask = ControlMask::from_tau(basis, tau)?;
    if mask.indices().is_empty() {
        return Ok(VolumeEstimate {
            value: 0.0,
            samples: Vec::new(),
            exponent: None,
            fit_residual: 0.0,
            reliable: true,
        });
    }
    let alphas = schedule.alphas(scale_from, &mask);
    if alphas.len() < 3 {
        return Err(Error::InvalidArgument("alpha schedule needs at least 3 entries".into()));
    }
    solve_masked(k, basis, &mask, &alphas, opts)
}

fn solve_masked(
    k: &KMatrix,
    basis: &SourceBasis,
    mask: &ControlMask,
    alphas: &[f64],
    opts: &SolveOptions,
) -> Result<VolumeEstimate> {
    if alphas.windows(2).any(|w| !(w[1] < w[0])) || !(alphas[alphas.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument(
            "alpha schedule must be positive and decreasing".into(),
        ));
    }
    let rhs = rhs_coefficients(basis);
    let idx = mask.indices();
    let a = k.submatrix(&idx);
    let b: Vec<f64> = idx.iter().map(|&i| rhs[i]).collect();
    let mut samples = Vec::with_capacity(alphas.len());
    let mut warm: Option<Vec<f64>> = None;
    for &alpha in alphas {
        let (x, diag) = krylov_solve(&a, alpha, &b, warm.as_deref(), opts);
        samples.push(AlphaSample {
            alpha,
            value: dot(&x, &b),
            iterations: diag.iterations,
            residual: diag.residual,
            converged: diag.converged,
        });
        warm = Some(x);
    }
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let (value, exponent, reliable) = extrapolate(alphas, &values);
    Ok(VolumeEstimate {
        value,
        fit_residual: (value - values[values.len() - 1]).abs(),
        samples,
        exponent,
        reliable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSample {
    pub r: f64,
    pub value: f64,
    pub estimate: Option<VolumeEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeCurve {
    pub provenance: Provenance,
    pub samples: Vec<VolumeSample>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::basis::BasisSpec;
    use crate::forward::signal::{SignalSpace, TimeGrid};
    use crate::geometry::region::TauDescriptor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis() -> SourceBasis {
        let space = SignalSpace::new(
            TimeGrid {
                t_final: 1.0,
                half: 16,
                dt: 1.0 / 16.0,
            },
            vec![0.125; 16],
        );
        SourceBasis::new(&space, BasisSpec { n_patch: 4, n_bin: 8 }).unwrap()
    }

    fn tau(v: Vec<f64>) -> TauFunction {
        TauFunction::new(v, TauDescriptor::Custom, 1.0).unwrap()
    }

    fn spd(n: usize, seed: u64) -> KMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() / n as f64;
            }
        }
        KMatrix::from_raw(n, a)
    }

    #[test]
    fn mask_keeps_last_bins() {
        let b = basis();
        // bin width 0.125; 0.3 snaps down to 0.25 -> two bins
        let m = ControlMask::from_tau(&b, &tau(vec![0.3; 16])).unwrap();
        assert_eq!(m.tau_snapped, vec![0.25; 4]);
        for i in 0..b.len() {
            assert_eq!(m.keep[i], b.split(i).1 >= 6);
        }
        let zero = ControlMask::from_tau(&b, &tau(vec![0.0; 16])).unwrap();
        assert!(zero.indices().is_empty());
        let full = ControlMask::from_tau(&b, &tau(vec![1.0; 16])).unwrap();
        assert_eq!(full.indices().len(), b.len());
    }

    #[test]
    fn projection_is_orthogonal() {
        let b = basis();
        let m = ControlMask::from_tau(&b, &tau((0..16).map(|k| k as f64 / 16.0).collect())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = b.expand(&(0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let g = b.expand(&(0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        let pf = project_tau(&b, &m, &f).unwrap();
        let pg = project_tau(&b, &m, &g).unwrap();
        let s = b.space();
        assert!((s.inner(&pf, &g) - s.inner(&f, &pg)).abs() < 1e-12 * s.norm(&f) * s.norm(&g));
        let ppf = project_tau(&b, &m, &pf).unwrap();
        let mut d = ppf.clone();
        d.axpy(-1.0, &pf);
        assert!(d.max_abs() < 1e-12 * pf.max_abs());
    }

    #[test]
    fn rhs_matches_discrete_adjoint_of_i() {
        use crate::control::time_ops::op_i_adj;
        let b = basis();
        let t = b.space().time;
        let ia1 = op_i_adj(&b.space().ones(), t.half, t.dt);
        let proj = b.project(&ia1);
        for (x, y) in rhs_coefficients(&b).iter().zip(proj) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn solvers_agree_and_residual_monotone_for_cr() {
        let k = spd(30, 3);
        let rhs: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let cg = SolveOptions {
            method: KrylovMethod::ConjugateGradient,
            ..Default::default()
        };
        let cr = SolveOptions::default();
        let (x1, d1) = krylov_solve(&k.data, 1e-3, &rhs, None, &cg);
        let (x2, d2) = krylov_solve(&k.data, 1e-3, &rhs, None, &cr);
        assert!(d1.converged && d2.converged);
        assert!(x1.iter().zip(&x2).all(|(a, b)| (a - b).abs() < 1e-5 * (1.0 + a.abs())));
        assert!(d2.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let ax = matvec(&k.data, &x2, 1e-3);
        let err: f64 = ax.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * dot(&rhs, &rhs).sqrt() * 1.01);
    }

    #[test]
    fn zero_tau_gives_zero_control() {
        let b = basis();
        let k = spd(b.len(), 5);
        let problem = ControlProblem {
            k: &k,
            mask: ControlMask::from_tau(&b, &tau(vec![0.0; 16])).unwrap(),
            alpha: 1e-3,
            rhs: rhs_coefficients(&b),
        };
        let (f, _) = problem.solve(&SolveOptions::default()).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
        let est = estimate_volume(&k, &b, &tau(vec![0.0; 16]), &[1e-1, 1e-2, 1e-3], &SolveOptions::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn large_alpha_limit() {
        let b = basis();
        let k = spd(b.len(), 7);
        let alpha = 1e4 * k.norm_estimate(20);
        let mask = ControlMask::from_tau(&b, &tau(vec![0.6; 16])).unwrap();
        let rhs = rhs_coefficients(&b);
        let problem = ControlProblem {
            k: &k,
            mask: mask.clone(),
            alpha,
            rhs: rhs.clone(),
        };
        let (f, _) = problem.solve(&SolveOptions::default()).unwrap();
        let mut expect = rhs.iter().map(|r| r / alpha).collect::<Vec<_>>();
        mask.apply(&mut expect);
        let num: f64 = f.iter().zip(&expect).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(num <= 1e-3 * dot(&expect, &expect).sqrt());
    }

    #[test]
    fn extrapolation_recovers_power_law() {
        let alphas = [1e-1, 1e-2, 1e-3, 1e-4];
        let values: Vec<f64> = alphas.iter().map(|a: &f64| 0.5 - 0.3 * a.powf(0.5)).collect();
        let (v0, p, ok) = extrapolate(&alphas, &values);
        assert!(ok);
        assert!((v0 - 0.5).abs() < 1e-12);
        assert!((p.unwrap() - 0.5).abs() < 1e-12);
        let (v, p, ok) = extrapolate(&alphas, &[0.1, 0.3, 0.2, 0.35]);
        assert!(!ok && p.is_none() && v == 0.35);
    }

    #[test]
    fn rejects_bad_schedules() {
        let b = basis();
        let k = spd(b.len(), 9);
        let t = tau(vec![0.5; 16]);
        let o = SolveOptions::default();
        assert!(estimate_volume(&k, &b, &t, &[1e-1, 1e-2], &o).is_err());
        assert!(estimate_volume(&k, &b, &t, &[1e-1, 1e-2, 1e-1], &o).is_err());
    }
}
