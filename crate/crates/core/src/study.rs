//! Refinement and asymptotics studies.
//!
//! Sphere multiplets are indexed by degree `k` through cumulative
//! multiplicity: after the monopole, physical modes `(k-1)(k+1) .. k(k+2)`
//! (rank order) form the degree-`k` group. Other shapes have no canonical
//! degree and are indexed by cluster order.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::analytic::{cumulative_multiplicity, sphere_eps};
use crate::mesh::{gen_ellipsoid, gen_icosphere, panelize};
use crate::operator::{assemble, gauss_check};
use crate::output::{fmt17, ser_f64, ser_opt_f64, SCHEMA_VERSION};
use crate::spectra::{solve, FilterTolerances, ModeSet};
use crate::{AssemblyOptions, Error, Result, SurfaceMesh, Vec3};

/// Modes with `|ε + 1|` below this count as near the flat-interface limit.
pub const NEAR_MINUS_ONE: f64 = 0.2;

/// Allowed relative increase of a refinement error before a violation is fatal rather than flagged.
pub const MONOTONE_SLACK: f64 = 0.10;

/// Generator description, e.g. `icosphere:3` or `ellipsoid:2,1,1:3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Icosphere { level: u32, radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64, level: u32 },
}

impl Geometry {
    pub fn level(&self) -> u32 {
        match *self {
            Geometry::Icosphere { level, .. } | Geometry::Ellipsoid { level, .. } => level,
        }
    }

    pub fn with_level(&self, level: u32) -> Self {
        match *self {
            Geometry::Icosphere { radius, .. } => Geometry::Icosphere { level, radius },
            Geometry::Ellipsoid { a, b, c, .. } => Geometry::Ellipsoid { a, b, c, level },
        }
    }

    pub fn generate(&self) -> Result<SurfaceMesh> {
        match *self {
            Geometry::Icosphere { level, radius } => gen_icosphere(level, radius),
            Geometry::Ellipsoid { a, b, c, level } => gen_ellipsoid(a, b, c, level),
        }
    }

    /// Splits a comma-separated list where ellipsoid axes also use commas.
    pub fn parse_list(s: &str) -> Result<Vec<Geometry>> {
        let mut items: Vec<String> = Vec::new();
        for tok in s.split(',') {
            match items.last_mut() {
                Some(last) if !tok.starts_with(|c: char| c.is_ascii_alphabetic()) => {
                    last.push(',');
                    last.push_str(tok);
                }
                _ => items.push(tok.to_string()),
            }
        }
        items.iter().map(|i| i.parse()).collect()
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Geometry::Icosphere { level, radius: 1.0 } => write!(f, "icosphere:{level}"),
            Geometry::Icosphere { level, radius } => write!(f, "icosphere:{level}:{radius}"),
            Geometry::Ellipsoid { a, b, c, level } => write!(f, "ellipsoid:{a},{b},{c}:{level}"),
        }
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad geometry spec {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let lvl = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["icosphere", level] => Ok(Geometry::Icosphere {
                level: lvl(level)?,
                radius: 1.0,
            }),
            ["icosphere", level, radius] => Ok(Geometry::Icosphere {
                level: lvl(level)?,
                radius: num(radius)?,
            }),
            ["ellipsoid", abc, level] => {
                let axes = abc.split(',').map(num).collect::<Result<Vec<_>>>()?;
                let [a, b, c] = axes[..] else {
                    return Err(bad());
                };
                Ok(Geometry::Ellipsoid {
                    a,
                    b,
                    c,
                    level: lvl(level)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// A solved geometry.
#[derive(Debug, Clone)]
pub struct Solution {
    pub label: String,
    pub n_panels: usize,
    pub signed_volume: f64,
    /// `|gauss_check(origin) - 4π| / 4π`.
    pub gauss_rel_error: f64,
    pub modes: ModeSet,
}

pub fn solve_mesh(
    mesh: &SurfaceMesh,
    label: impl Into<String>,
    assembly: &AssemblyOptions,
    tols: &FilterTolerances,
) -> Result<Solution> {
    let panels = panelize(mesh)?;
    let op = assemble(&panels, assembly)?;
    let modes = solve(&op, tols)?;
    Ok(Solution {
        label: label.into(),
        n_panels: panels.len(),
        signed_volume: mesh.signed_volume(),
        gauss_rel_error: (gauss_check(&panels, &Vec3::zeros()) - 4.0 * PI).abs() / (4.0 * PI),
        modes,
    })
}

pub fn solve_geometry(
    g: &Geometry,
    assembly: &AssemblyOptions,
    tols: &FilterTolerances,
) -> Result<Solution> {
    solve_mesh(&g.generate()?, g.to_string(), assembly, tols)
}

/// The degree-`k` sphere group compared with the analytic resonance.
#[derive(Debug, Clone, Serialize)]
pub struct SphereMatch {
    pub k: u64,
    /// Size of the cluster holding the first mode of the group.
    pub multiplicity: usize,
    pub expected_multiplicity: usize,
    #[serde(serialize_with = "ser_f64")]
    pub eps_mean: f64,
    #[serde(serialize_with = "ser_f64")]
    pub eps_oracle: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rel_err: f64,
    /// The group coincides with exactly one cluster.
    pub matched: bool,
}

/// Mean ε of each degree-`k` group, selected by cumulative multiplicity.
pub fn sphere_groups(modes: &ModeSet, ks: &[u64]) -> Result<Vec<SphereMatch>> {
    let physical: Vec<usize> = (0..modes.modes.len())
        .filter(|&i| !modes.modes[i].monopole)
        .collect();
    ks.iter()
        .map(|&k| {
            let oracle = sphere_eps(k)?;
            let lo = cumulative_multiplicity(k - 1) as usize;
            let hi = cumulative_multiplicity(k) as usize;
            if hi > physical.len() {
                return Err(Error::InvalidParameter(format!(
                    "degree {k} needs {hi} physical modes, only {} retained",
                    physical.len()
                )));
            }
            let group = &physical[lo..hi];
            let eps: Vec<f64> = group.iter().filter_map(|&i| modes.modes[i].eps).collect();
            let eps_mean = eps.iter().sum::<f64>() / eps.len() as f64;
            let first_cluster = modes.modes[group[0]].cluster;
            let multiplicity = first_cluster.map_or(0, |c| modes.clusters[c].multiplicity);
            let matched = first_cluster.is_some_and(|c| modes.clusters[c].members == group);
            Ok(SphereMatch {
                k,
                multiplicity,
                expected_multiplicity: (2 * k + 1) as usize,
                eps_mean,
                eps_oracle: oracle,
                rel_err: (eps_mean - oracle).abs() / oracle.abs(),
                matched,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    #[serde(serialize_with = "ser_f64")]
    pub mean_eps: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    pub level: u32,
    pub n_panels: usize,
    pub discarded_complex: usize,
    pub clusters: Vec<ClusterSummary>,
    pub sphere: Vec<SphereMatch>,
    #[serde(serialize_with = "ser_f64")]
    pub gauss_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    #[serde(serialize_with = "ser_f64")]
    pub c: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rms_residual: f64,
    pub k_range: [u64; 2],
    pub points: Vec<TailPoint>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailPoint {
    pub k: u64,
    #[serde(serialize_with = "ser_f64")]
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeEntry {
    pub geometry: String,
    pub n_panels: usize,
    pub n_retained: usize,
    #[serde(serialize_with = "ser_f64")]
    pub near_minus_one: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub median_low_half_eps: Option<f64>,
}

/// Result of a study run. Unused sections are empty.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub study: String,
    pub geometry: String,
    pub levels: Vec<LevelRecord>,
    /// Non-monotone refinement steps, e.g. `k=2 level 3->4: 0.012 -> 0.013`.
    pub flags: Vec<String>,
    pub tail: Option<TailFit>,
    pub shapes: Vec<ShapeEntry>,
}

impl StudyReport {
    fn empty(study: &str, geometry: String) -> Self {
        StudyReport {
            schema_version: SCHEMA_VERSION,
            study: study.into(),
            geometry,
            levels: Vec::new(),
            flags: Vec::new(),
            tail: None,
            shapes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Error table (`level,N,k,eps_mean,eps_oracle,rel_err`), or the shape table for shape studies.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        if !self.shapes.is_empty() {
            wr.write_record([
                "geometry",
                "N",
                "n_retained",
                "near_minus_one",
                "median_low_half_eps",
            ])?;
            for s in &self.shapes {
                wr.write_record([
                    s.geometry.clone(),
                    s.n_panels.to_string(),
                    s.n_retained.to_string(),
                    fmt17(s.near_minus_one),
                    s.median_low_half_eps.map(fmt17).unwrap_or_default(),
                ])?;
            }
        } else {
            wr.write_record(["level", "N", "k", "eps_mean", "eps_oracle", "rel_err"])?;
            for l in &self.levels {
                for m in &l.sphere {
                    wr.write_record([
                        l.level.to_string(),
                        l.n_panels.to_string(),
                        m.k.to_string(),
                        fmt17(m.eps_mean),
                        fmt17(m.eps_oracle),
                        fmt17(m.rel_err),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Tail data (`k,eps`) if a fit was run.
    pub fn write_tail_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "eps"])?;
        for p in self.tail.iter().flat_map(|t| &t.points) {
            wr.write_record([p.k.to_string(), fmt17(p.eps)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn level_record(level: u32, sol: &Solution, ks: &[u64]) -> Result<LevelRecord> {
    Ok(LevelRecord {
        level,
        n_panels: sol.n_panels,
        discarded_complex: sol.modes.discarded_complex,
        clusters: sol
            .modes
            .clusters
            .iter()
            .map(|c| ClusterSummary {
                mean_eps: c.mean_eps,
                multiplicity: c.multiplicity,
            })
            .collect(),
        sphere: sphere_groups(&sol.modes, ks)?,
        gauss_rel_error: sol.gauss_rel_error,
    })
}

/// Builds a sphere refinement report from already solved levels (ascending).
pub fn converge_sphere_from(
    solutions: &[(u32, &Solution)],
    ks: &[u64],
    radius: f64,
) -> Result<StudyReport> {
    if solutions.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter(
            "levels must be strictly increasing".into(),
        ));
    }
    let mut report = StudyReport::empty(
        "sphere",
        Geometry::Icosphere { level: 0, radius }.to_string(),
    );
    for &(level, sol) in solutions {
        let rec = level_record(level, sol, ks)?;
        for m in rec.sphere.iter().filter(|m| !m.matched) {
            let msg = format!(
                "level {level} k={}: cluster multiplicity {} (expected {})",
                m.k, m.multiplicity, m.expected_multiplicity
            );
            log::warn!("{msg}");
            report.flags.push(msg);
        }
        report.levels.push(rec);
    }
    for (idx, &k) in ks.iter().enumerate() {
        for w in report.levels.windows(2) {
            let (prev, next) = (w[0].sphere[idx].rel_err, w[1].sphere[idx].rel_err);
            if next > prev {
                let severity = if next > prev * (1.0 + MONOTONE_SLACK) {
                    "violation"
                } else {
                    "minor"
                };
                report.flags.push(format!(
                    "{severity}: k={k} level {}->{}: {prev:e} -> {next:e}",
                    w[0].level, w[1].level
                ));
            }
        }
    }
    Ok(report)
}

/// Solves icospheres at each level and compares degree-`k` multiplets with `-(k+1)/k`.
pub fn converge_sphere(
    levels: &[u32],
    radius: f64,
    ks: &[u64],
    assembly: &AssemblyOptions,
    tols: &FilterTolerances,
) -> Result<StudyReport> {
    if let Some(&l) = levels.iter().find(|&&l| !(1..=5).contains(&l)) {
        return Err(Error::InvalidParameter(format!(
            "study level {l} outside 1..=5"
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| !(1..=4).contains(&k)) {
        return Err(Error::InvalidParameter(format!(
            "target degree {k} outside 1..=4"
        )));
    }
    let sols = levels
        .iter()
        .map(|&l| solve_geometry(&Geometry::Icosphere { level: l, radius }, assembly, tols))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(u32, &Solution)> = levels.iter().copied().zip(&sols).collect();
    converge_sphere_from(&pairs, ks, radius)
}

/// Least-squares fit of `ε_k ≈ -1 - c/k`.
pub fn tail_fit(points: &[(u64, f64)]) -> Result<TailFit> {
    if points.len() < 3 {
        return Err(Error::TooFewClusters(points.len()));
    }
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(k, eps)| {
        let x = 1.0 / k as f64;
        (n - (eps + 1.0) * x, d + x * x)
    });
    let c = num / den;
    let ss: f64 = points
        .iter()
        .map(|&(k, eps)| (eps - (-1.0 - c / k as f64)).powi(2))
        .sum();
    let k_min = points.iter().map(|p| p.0).min().unwrap_or(0);
    let k_max = points.iter().map(|p| p.0).max().unwrap_or(0);
    Ok(TailFit {
        c,
        rms_residual: (ss / points.len() as f64).sqrt(),
        k_range: [k_min, k_max],
        points: points
            .iter()
            .map(|&(k, eps)| TailPoint { k, eps })
            .collect(),
    })
}

/// How cluster rank `k` is assigned for tail fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KIndexing {
    /// Degree-`k` groups of `2k+1` modes.
    SphereMultiplicity,
    /// `k`-th cluster in rank order.
    ClusterOrder,
}

pub fn tail_points(
    modes: &ModeSet,
    k_min: u64,
    k_max: u64,
    indexing: KIndexing,
) -> Result<Vec<(u64, f64)>> {
    if k_min == 0 || k_max < k_min {
        return Err(Error::InvalidParameter(format!(
            "bad k range {k_min}..={k_max}"
        )));
    }
    let ks: Vec<u64> = (k_min..=k_max).collect();
    match indexing {
        KIndexing::SphereMultiplicity => Ok(sphere_groups(modes, &ks)?
            .into_iter()
            .map(|m| (m.k, m.eps_mean))
            .collect()),
        KIndexing::ClusterOrder => Ok(ks
            .iter()
            .filter_map(|&k| modes.clusters.get(k as usize - 1).map(|c| (k, c.mean_eps)))
            .collect()),
    }
}

pub fn tail_fit_modes(
    modes: &ModeSet,
    k_min: u64,
    k_max: u64,
    indexing: KIndexing,
) -> Result<TailFit> {
    tail_fit(&tail_points(modes, k_min, k_max, indexing)?)
}

/// Fraction of physical modes with `|ε + 1| < NEAR_MINUS_ONE`, and the median ε of the
/// physical half with smallest `|λ|`.
pub fn shape_entry(sol: &Solution) -> ShapeEntry {
    let mut phys: Vec<(f64, f64)> = sol
        .modes
        .physical()
        .filter_map(|m| m.eps.map(|e| (m.lambda, e)))
        .collect();
    let n = phys.len();
    let near = phys
        .iter()
        .filter(|(_, e)| (e + 1.0).abs() < NEAR_MINUS_ONE)
        .count();
    phys.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let mut low: Vec<f64> = phys[..n / 2].iter().map(|p| p.1).collect();
    low.sort_by(f64::total_cmp);
    let median = match low.len() {
        0 => None,
        m if m % 2 == 1 => Some(low[m / 2]),
        m => Some(0.5 * (low[m / 2 - 1] + low[m / 2])),
    };
    ShapeEntry {
        geometry: sol.label.clone(),
        n_panels: sol.n_panels,
        n_retained: n,
        near_minus_one: if n == 0 { 0.0 } else { near as f64 / n as f64 },
        median_low_half_eps: median,
    }
}

pub fn shape_independence_from(solutions: &[&Solution]) -> StudyReport {
    let label = solutions
        .iter()
        .map(|s| s.label.as_str())
        .collect::<Vec<_>>()
        .join(",");
    let mut report = StudyReport::empty("shapes", label);
    report.shapes = solutions.iter().map(|s| shape_entry(s)).collect();
    report
}

/// Side-by-side high-order statistics for several closed meshes.
pub fn shape_independence(
    meshes: &[(String, SurfaceMesh)],
    assembly: &AssemblyOptions,
    tols: &FilterTolerances,
) -> Result<StudyReport> {
    let sols = meshes
        .iter()
        .map(|(label, m)| solve_mesh(m, label.clone(), assembly, tols))
        .collect::<Result<Vec<_>>>()?;
    Ok(shape_independence_from(&sols.iter().collect::<Vec<_>>()))
}

/// Tail-fit study on one generated geometry.
pub fn tail_study(
    geometry: &Geometry,
    k_min: u64,
    k_max: u64,
    assembly: &AssemblyOptions,
    tols: &FilterTolerances,
) -> Result<StudyReport> {
    let sol = solve_geometry(geometry, assembly, tols)?;
    tail_study_from(geometry, &sol, k_min, k_max)
}

pub fn tail_study_from(
    geometry: &Geometry,
    sol: &Solution,
    k_min: u64,
    k_max: u64,
) -> Result<StudyReport> {
    let indexing = match geometry {
        Geometry::Icosphere { .. } => KIndexing::SphereMultiplicity,
        Geometry::Ellipsoid { .. } => KIndexing::ClusterOrder,
    };
    let mut report = StudyReport::empty("tail", geometry.to_string());
    report.tail = Some(tail_fit_modes(&sol.modes, k_min, k_max, indexing)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::asymptote_reference;

    #[test]
    fn fit_exact_tail() {
        let fit = tail_fit(&asymptote_reference(10).unwrap()).unwrap();
        assert!((fit.c - 1.0).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-12);
        assert_eq!(fit.k_range, [1, 10]);
    }

    #[test]
    fn fit_flat_tail() {
        let pts: Vec<(u64, f64)> = (1..=6).map(|k| (k, -1.0)).collect();
        let fit = tail_fit(&pts).unwrap();
        assert_eq!(fit.c, 0.0);
        assert_eq!(fit.rms_residual, 0.0);
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(matches!(
            tail_fit(&[(1, -2.0), (2, -1.5)]),
            Err(Error::TooFewClusters(2))
        ));
    }

    #[test]
    fn fit_scaled_tail() {
        // ε_k = −1 − 0.7/k is fit exactly.
        let pts: Vec<(u64, f64)> = (2..=5).map(|k| (k, -1.0 - 0.7 / k as f64)).collect();
        let fit = tail_fit(&pts).unwrap();
        assert!((fit.c - 0.7).abs() < 1e-14);
    }

    #[test]
    fn geometry_specs() {
        let g: Geometry = "icosphere:3".parse().unwrap();
        assert_eq!(
            g,
            Geometry::Icosphere {
                level: 3,
                radius: 1.0
            }
        );
        let list = Geometry::parse_list("icosphere:3,ellipsoid:2,1,1:3").unwrap();
        assert_eq!(
            list[1],
            Geometry::Ellipsoid {
                a: 2.0,
                b: 1.0,
                c: 1.0,
                level: 3
            }
        );
        assert_eq!(list[1].to_string(), "ellipsoid:2,1,1:3");
        assert_eq!(list[1].with_level(2).level(), 2);
        assert!("torus:1".parse::<Geometry>().is_err());
        assert!("ellipsoid:1,2:3".parse::<Geometry>().is_err());
        let r: Geometry = "icosphere:2:0.5".parse().unwrap();
        assert_eq!(r.to_string().parse::<Geometry>().unwrap(), r);
    }

    #[test]
    fn sphere_groups_level2() {
        let sol = solve_geometry(
            &Geometry::Icosphere {
                level: 2,
                radius: 1.0,
            },
            &AssemblyOptions::default(),
            &FilterTolerances::default(),
        )
        .unwrap();
        let g = sphere_groups(&sol.modes, &[1, 2, 3]).unwrap();
        for m in &g {
            assert!(m.matched, "{m:?}");
            assert_eq!(m.multiplicity, m.expected_multiplicity);
        }
        assert!(g[0].rel_err < 0.05);
        let fit = tail_fit_modes(&sol.modes, 1, 3, KIndexing::SphereMultiplicity).unwrap();
        assert!((fit.c - 1.0).abs() < 0.15, "{}", fit.c);
        let by_cluster = tail_fit_modes(&sol.modes, 1, 3, KIndexing::ClusterOrder).unwrap();
        assert!((by_cluster.c - fit.c).abs() < 1e-12);

        let entry = shape_entry(&sol);
        assert!((entry.median_low_half_eps.unwrap() + 1.0).abs() < 0.15);
    }

    #[test]
    fn converge_guards() {
        let a = AssemblyOptions::default();
        let t = FilterTolerances::default();
        assert!(converge_sphere(&[0, 1], 1.0, &[1], &a, &t).is_err());
        assert!(converge_sphere(&[1], 1.0, &[5], &a, &t).is_err());
    }

    #[test]
    fn csv_rows() {
        let report = converge_sphere(
            &[1, 2],
            1.0,
            &[1, 2],
            &AssemblyOptions::default(),
            &FilterTolerances::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "level,N,k,eps_mean,eps_oracle,rel_err");
        assert_eq!(lines.len(), 5);
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["levels"].as_array().unwrap().len(), 2);
    }
}
