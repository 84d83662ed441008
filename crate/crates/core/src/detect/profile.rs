//! Boundary scans producing the distance profile `y -> r_Sigma(y)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::locate::{locate_known_bg, Flag, LocateOptions};
use crate::detect::smoothness::{smoothness_test_unknown_bg, SmoothnessOptions, VolumeSource};
use crate::detect::volumes::VolumePair;
use crate::error::{Error, Result};
use crate::geometry::domain::DiscreteDomain;
use crate::geometry::region::ambient_boundary_distances;
use crate::geometry::speed::Medium;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BisectionKnownBg,
    SecondDiffUnknownBg,
    /// Taken from the geometry directly.
    Exact,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BisectionKnownBg => "bisection_known_bg",
            Method::SecondDiffUnknownBg => "second_diff_unknown_bg",
            Method::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub node: usize,
    /// Arc coordinate of the node.
    pub s: f64,
    pub r: f64,
    pub method: Method,
    /// `V - V~` at the decision point.
    pub gap: Option<f64>,
    /// Divergence slope at the decision point.
    pub q_slope: Option<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    /// Sorted by arc coordinate.
    pub entries: Vec<ProfileEntry>,
}

/// `n` boundary nodes at equal arc spacing starting from `s = 0`.
pub fn sample_nodes(domain: &DiscreteDomain, n: usize) -> Vec<usize> {
    let p = domain.perimeter();
    let mut out: Vec<usize> = (0..n)
        .map(|k| domain.boundary_at_arc(k as f64 * p / n as f64))
        .collect();
    out.dedup();
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

impl DistanceProfile {
    pub fn new(mut entries: Vec<ProfileEntry>) -> Self {
        entries.sort_by(|a, b| a.s.total_cmp(&b.s));
        Self { entries }
    }

    /// Profile from exact distances at every boundary node.
    pub fn exact(domain: &DiscreteDomain, r: &[f64]) -> Self {
        Self::new(
            domain
                .boundary()
                .iter()
                .zip(r)
                .enumerate()
                .map(|(k, (b, &r))| ProfileEntry {
                    node: k,
                    s: b.s,
                    r,
                    method: Method::Exact,
                    gap: None,
                    q_slope: None,
                    flags: Vec::new(),
                })
                .collect(),
        )
    }

    pub fn radii(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.r).collect()
    }

    /// `r_Sigma` at every boundary node, linear in arc length between samples and periodic.
    pub fn interpolate(&self, domain: &DiscreteDomain) -> Result<Vec<f64>> {
        let n = self.entries.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty distance profile".into()));
        }
        let p = domain.perimeter();
        Ok(domain
            .boundary()
            .iter()
            .map(|b| {
                if n == 1 {
                    return self.entries[0].r;
                }
                // first sample strictly after s, wrapping around
                let k = self.entries.partition_point(|e| e.s <= b.s);
                let (a, c) = (&self.entries[(k + n - 1) % n], &self.entries[k % n]);
                let span = (c.s - a.s).rem_euclid(p);
                if span == 0.0 {
                    return a.r;
                }
                let t = (b.s - a.s).rem_euclid(p) / span;
                (1.0 - t) * a.r + t * c.r
            })
            .collect())
    }

    /// Index pairs `(i, j)` with `|r_i - r_j| > d^(y_i, y_j) + slack`.
    pub fn lipschitz_violations(&self, background: &Medium, slack: f64) -> Result<Vec<(usize, usize)>> {
        let rows: Vec<Vec<f64>> = self
            .entries
            .par_iter()
            .map(|e| ambient_boundary_distances(background, e.node))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for (i, a) in self.entries.iter().enumerate() {
            for (j, b) in self.entries.iter().enumerate().skip(i + 1) {
                if (a.r - b.r).abs() > rows[i][b.node] + slack {
                    out.push((i, j));
                }
            }
        }
        Ok(out)
    }

    /// Flag every entry taking part in a Lipschitz violation; returns the number of pairs.
    pub fn mark_lipschitz(&mut self, background: &Medium, slack: f64) -> Result<usize> {
        let bad = self.lipschitz_violations(background, slack)?;
        for &(i, j) in &bad {
            for k in [i, j] {
                if !self.entries[k].flags.contains(&Flag::LipschitzViolation) {
                    self.entries[k].flags.push(Flag::LipschitzViolation);
                }
            }
        }
        Ok(bad.len())
    }

    /// RFC 4180 CSV with columns `s, r_est, method, gap, q_slope, flags`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "r_est", "method", "gap", "q_slope", "flags"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            let flags: Vec<&str> = e.flags.iter().map(Flag::as_str).collect();
            w.write_record([
                e.s.to_string(),
                e.r.to_string(),
                e.method.as_str().to_string(),
                opt(e.gap),
                opt(e.q_slope),
                flags.join(";"),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Known-background distance test at each node of `nodes`, in parallel.
pub fn scan_boundary_known_bg(
    pair: &dyn VolumePair,
    background: &Medium,
    nodes: &[usize],
    t_max: f64,
    opts: &LocateOptions,
) -> Result<DistanceProfile> {
    let d = &background.domain;
    let entries = nodes
        .par_iter()
        .map(|&node| {
            let ambient = ambient_boundary_distances(background, node)?;
            let loc = locate_known_bg(pair, node, &ambient, t_max, opts)?;
            Ok(ProfileEntry {
                node,
                s: d.boundary()[node].s,
                r: loc.r,
                method: Method::BisectionKnownBg,
                gap: Some(loc.gap),
                q_slope: None,
                flags: loc.flags,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceProfile::new(entries))
}

/// Unknown-background smoothness test at each node of `nodes`, in parallel.
pub fn scan_boundary_unknown_bg(
    source: &dyn VolumeSource,
    domain: &DiscreteDomain,
    nodes: &[usize],
    t_max: f64,
    opts: &SmoothnessOptions,
) -> Result<DistanceProfile> {
    let entries = nodes
        .par_iter()
        .map(|&node| {
            let res = smoothness_test_unknown_bg(source, domain, node, opts, t_max)?;
            Ok(ProfileEntry {
                node,
                s: domain.boundary()[node].s,
                r: res.r,
                method: Method::SecondDiffUnknownBg,
                gap: None,
                q_slope: res.q,
                flags: res.flags,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceProfile::new(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::locate::TolVol;
    use crate::detect::volumes::OraclePair;
    use crate::geometry::hull::exact_boundary_distances;
    use crate::geometry::region::Quadrature;
    use crate::geometry::speed::{Shape, SpeedModel};
    use proptest::prelude::*;

    fn two_disks(n: usize) -> Medium {
        let model = SpeedModel::constant(1.0)
            .with_inclusion(
                Shape::Disk {
                    center: [0.35, 0.6],
                    radius: 0.1,
                },
                2.0,
            )
            .with_inclusion(
                Shape::Disk {
                    center: [0.65, 0.4],
                    radius: 0.08,
                },
                2.0,
            );
        Medium::new(DiscreteDomain::unit_square(n).unwrap(), model).unwrap()
    }

    fn locate_opts(d: &DiscreteDomain) -> LocateOptions {
        LocateOptions {
            r_max: 0.8,
            r_step: 0.05,
            tol_r: d.h / 2.0,
            tol: TolVol { abs: 1e-6, rel: 1e-3 },
        }
    }

    #[test]
    fn sample_nodes_are_distinct_and_ordered() {
        let d = DiscreteDomain::unit_square(64).unwrap();
        let nodes = sample_nodes(&d, 32);
        assert_eq!(nodes.len(), 32);
        assert_eq!(nodes[0], 0);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn centred_disk_profile_is_four_fold_symmetric() {
        let d = DiscreteDomain::unit_square(64).unwrap();
        let shape = Shape::Disk {
            center: [0.5, 0.5],
            radius: 0.15,
        };
        let m = Medium::new(d.clone(), SpeedModel::constant(1.0).with_inclusion(shape, 2.0)).unwrap();
        let pair = OraclePair {
            medium: m.clone(),
            quad: Quadrature::Fractional,
        };
        let opts = locate_opts(&d);
        let nodes = sample_nodes(&d, 16);
        let prof = scan_boundary_known_bg(&pair, &m.background().unwrap(), &nodes, 1.5, &opts).unwrap();
        let r = prof.radii();
        for k in 0..4 {
            for side in 1..4 {
                let a = r[k];
                let b = r[k + 4 * side];
                assert!((a - b).abs() <= 2.0 * opts.tol_r + 1e-12, "{k}: {a} vs {b}");
            }
        }
        let truth = exact_boundary_distances(&m);
        for e in &prof.entries {
            assert!((e.r - truth[e.node]).abs() <= 3.0 * d.h, "{} vs {}", e.r, truth[e.node]);
        }
    }

    #[test]
    fn two_disk_minima_sit_nearest_each_disk() {
        let d = DiscreteDomain::unit_square(64).unwrap();
        let m = two_disks(64);
        let pair = OraclePair {
            medium: m.clone(),
            quad: Quadrature::Fractional,
        };
        let nodes = sample_nodes(&d, 64);
        let mut prof = scan_boundary_known_bg(&pair, &m.background().unwrap(), &nodes, 1.5, &locate_opts(&d)).unwrap();
        assert_eq!(prof.mark_lipschitz(&m.background().unwrap(), 2.0 * d.h).unwrap(), 0);
        let truth = exact_boundary_distances(&m);
        // per edge: argmin of the estimate vs argmin of the truth over the same samples
        let per_edge = prof.entries.len() / 4;
        for edge in 0..4 {
            let part = &prof.entries[edge * per_edge..(edge + 1) * per_edge];
            let argmin = |f: &dyn Fn(&ProfileEntry) -> f64| {
                part.iter()
                    .enumerate()
                    .min_by(|a, b| f(a.1).total_cmp(&f(b.1)))
                    .unwrap()
                    .0
            };
            let est = argmin(&|e| e.r);
            let exact = argmin(&|e| truth[e.node]);
            assert!(est.abs_diff(exact) <= 3, "edge {edge}: {est} vs {exact}");
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_sample() {
        let d = DiscreteDomain::unit_square(8).unwrap();
        let mut prof = DistanceProfile::exact(&d, &vec![0.25; d.boundary_len()]);
        prof.entries[0].flags = vec![Flag::NoInclusionSeen, Flag::InconsistentData];
        let text = prof.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s,r_est,method,gap,q_slope,flags");
        assert_eq!(lines.len(), d.boundary_len() + 1);
        assert!(lines[1].ends_with("no_inclusion_seen;inconsistent_data"));
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_samples_and_stays_in_range(
            vals in proptest::collection::vec(0.0f64..1.0, 8),
        ) {
            let d = DiscreteDomain::unit_square(16).unwrap();
            let nodes = sample_nodes(&d, 8);
            let prof = DistanceProfile::new(
                nodes
                    .iter()
                    .zip(&vals)
                    .map(|(&node, &r)| ProfileEntry {
                        node,
                        s: d.boundary()[node].s,
                        r,
                        method: Method::Exact,
                        gap: None,
                        q_slope: None,
                        flags: vec![],
                    })
                    .collect(),
            );
            let full = prof.interpolate(&d).unwrap();
            let (lo, hi) = vals.iter().fold((1.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            for (&node, &v) in nodes.iter().zip(&vals) {
                prop_assert!((full[node] - v).abs() < 1e-12);
            }
            prop_assert!(full.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }
}
