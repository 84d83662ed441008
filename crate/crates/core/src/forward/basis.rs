//! Piecewise-constant source basis: boundary patches x time bins on `(0, T)`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::signal::{BoundarySignal, SignalSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub n_patch: usize,
    pub n_bin: usize,
}

/// Indicators of patch x bin, normalised in `S`. Element `(p, b)` has index `p * n_bin + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBasis {
    pub spec: BasisSpec,
    patches: Vec<Range<usize>>,
    /// Samples per time bin.
    bin_len: usize,
    norms: Vec<f64>,
    space: SignalSpace,
}

impl SourceBasis {
    pub fn new(space: &SignalSpace, spec: BasisSpec) -> Result<Self> {
        let nb = space.nb();
        let half = space.time.half;
        if spec.n_patch == 0 || spec.n_patch > nb {
            return Err(Error::BasisMismatch(format!(
                "{} patches for {nb} boundary nodes",
                spec.n_patch
            )));
        }
        if spec.n_bin == 0 || half % spec.n_bin != 0 {
            return Err(Error::BasisMismatch(format!(
                "{} time bins do not divide {half} steps on (0, T)",
                spec.n_bin
            )));
        }
        let patches: Vec<Range<usize>> = (0..spec.n_patch)
            .map(|p| (p * nb / spec.n_patch)..((p + 1) * nb / spec.n_patch))
            .collect();
        let bin_len = half / spec.n_bin;
        let norms = patches
            .iter()
            .map(|r| {
                let w: f64 = space.weights[r.clone()].iter().sum();
                (w * bin_len as f64 * space.time.dt).sqrt()
            })
            .collect();
        Ok(Self {
            spec,
            patches,
            bin_len,
            norms,
            space: space.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.spec.n_patch * self.spec.n_bin
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, patch: usize, bin: usize) -> usize {
        patch * self.spec.n_bin + bin
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.spec.n_bin, idx % self.spec.n_bin)
    }

    pub fn patch(&self, p: usize) -> Range<usize> {
        self.patches[p].clone()
    }

    pub fn patches(&self) -> &[Range<usize>] {
        &self.patches
    }

    pub fn bin_len(&self) -> usize {
        self.bin_len
    }

    pub fn bin_samples(&self, bin: usize) -> Range<usize> {
        bin * self.bin_len..(bin + 1) * self.bin_len
    }

    /// Width of one time bin.
    pub fn bin_width(&self) -> f64 {
        self.bin_len as f64 * self.space.time.dt
    }

    /// Value of the normalised indicator on its support.
    pub fn amplitude(&self, patch: usize) -> f64 {
        1.0 / self.norms[patch]
    }

    pub fn space(&self) -> &SignalSpace {
        &self.space
    }

    /// Patch that contains boundary node `node`.
    pub fn patch_of(&self, node: usize) -> usize {
        self.patches
            .iter()
            .position(|r| r.contains(&node))
            .expect("node outside every patch")
    }

    /// Boundary node at the middle of patch `p`.
    pub fn patch_center(&self, p: usize) -> usize {
        let r = &self.patches[p];
        (r.start + r.end) / 2
    }

    pub fn element(&self, idx: usize) -> BoundarySignal {
        let mut c = vec![0.0; self.len()];
        c[idx] = 1.0;
        self.expand(&c)
    }

    pub fn expand(&self, coeffs: &[f64]) -> BoundarySignal {
        let mut s = self.space.zeros();
        let nb = s.nb;
        for (idx, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (p, b) = self.split(idx);
            let v = c * self.amplitude(p);
            for k in self.bin_samples(b) {
                for y in self.patch(p) {
                    s.data[k * nb + y] += v;
                }
            }
        }
        s
    }

    /// Coefficients `<b_i, f>_S`.
    pub fn project(&self, f: &BoundarySignal) -> Vec<f64> {
        let dt = self.space.time.dt;
        let mut out = vec![0.0; self.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let (p, b) = self.split(idx);
            let mut acc = 0.0;
            for k in self.bin_samples(b) {
                for y in self.patch(p) {
                    acc += f.get(k, y) * self.space.weights[y];
                }
            }
            *o = acc * dt * self.amplitude(p);
        }
        out
    }

    /// Coefficients of `f`, or an error if `f` is not in the span.
    pub fn coefficients(&self, f: &BoundarySignal) -> Result<Vec<f64>> {
        self.space.check(f)?;
        let c = self.project(f);
        let mut r = self.expand(&c);
        r.axpy(-1.0, f);
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        if r.max_abs() > 1e-10 * scale {
            return Err(Error::BasisMismatch("signal is not in the span of the source basis".into()));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::signal::TimeGrid;

    fn space() -> SignalSpace {
        SignalSpace::new(
            TimeGrid {
                t_final: 1.0,
                half: 8,
                dt: 0.125,
            },
            vec![0.25; 16],
        )
    }

    #[test]
    fn elements_are_orthonormal() {
        let s = space();
        let basis = SourceBasis::new(&s, BasisSpec { n_patch: 4, n_bin: 4 }).unwrap();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let ip = s.inner(&basis.element(i), &basis.element(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn elements_supported_in_first_half() {
        let s = space();
        let basis = SourceBasis::new(&s, BasisSpec { n_patch: 4, n_bin: 2 }).unwrap();
        for i in 0..basis.len() {
            let e = basis.element(i);
            for k in 8..16 {
                assert!(e.row(k).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn span_membership() {
        let s = space();
        let basis = SourceBasis::new(&s, BasisSpec { n_patch: 4, n_bin: 4 }).unwrap();
        let c: Vec<f64> = (0..basis.len()).map(|k| k as f64 - 3.0).collect();
        let f = basis.expand(&c);
        let back = basis.coefficients(&f).unwrap();
        assert!(c.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
        let mut g = f.clone();
        g.set(9, 0, 1.0);
        assert!(basis.coefficients(&g).is_err());
    }

    #[test]
    fn rejects_misaligned_bins() {
        let s = space();
        assert!(SourceBasis::new(&s, BasisSpec { n_patch: 4, n_bin: 3 }).is_err());
        assert!(SourceBasis::new(&s, BasisSpec { n_patch: 17, n_bin: 4 }).is_err());
    }
}
