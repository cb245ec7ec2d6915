//! Closed triangulated surfaces and their collocation geometry.

mod generate;
mod io;

use std::collections::HashMap;

use serde::Serialize;

use crate::{Error, Result, Vec3};

pub use generate::{gen_ellipsoid, gen_icosphere, MAX_LEVEL};
pub use io::{load_mesh, parse_off, parse_stl, write_off, MeshFormat};

/// Triangles of area below this fraction of the squared bounding-box diagonal are rejected.
pub const DEGENERATE_AREA_REL: f64 = 1e-12;

/// Vertices and counter-clockwise (seen from outside) triangles of a closed surface.
///
/// Constructed only through [`SurfaceMesh::new`], which enforces the
/// closed-manifold, orientation and non-degeneracy invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

/// Outcome of validating a mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_faces: usize,
    pub euler_characteristic: i64,
    /// Signed volume after any orientation fix; always positive.
    pub signed_volume: f64,
    /// True when the input winding was inward and every triangle was flipped.
    pub flipped: bool,
    pub warnings: Vec<String>,
}

impl SurfaceMesh {
    /// Validates and, if needed, globally re-orients a triangulation.
    ///
    /// Fails on out-of-range indices, open or non-manifold edges, locally
    /// inconsistent winding and degenerate triangles. A globally inward
    /// winding is flipped and reported as a warning.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<(Self, MeshReport)> {
        let mut mesh = SurfaceMesh {
            vertices,
            triangles,
        };
        let report = mesh.validate_and_orient()?;
        Ok((mesh, report))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_faces(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Volume enclosed by the surface, from the divergence theorem.
    pub fn signed_volume(&self) -> f64 {
        signed_volume(&self.vertices, &self.triangles)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.n_faces())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.vertices)
    }

    /// Applies a point map to every vertex and re-validates.
    ///
    /// Orientation-reversing maps are corrected like any inward input.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<(Self, MeshReport)> {
        Self::new(
            self.vertices.iter().map(f).collect(),
            self.triangles.clone(),
        )
    }

    /// Reorders triangles so that new triangle `i` is old triangle `order[i]`.
    pub fn permute_triangles(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.triangles.len() {
            return Err(Error::InvalidParameter(format!(
                "permutation length {} != face count {}",
                order.len(),
                self.triangles.len()
            )));
        }
        let mut seen = vec![false; order.len()];
        for &o in order {
            if o >= order.len() || std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
        }
        Ok(SurfaceMesh {
            vertices: self.vertices.clone(),
            triangles: order.iter().map(|&o| self.triangles[o]).collect(),
        })
    }

    fn validate_and_orient(&mut self) -> Result<MeshReport> {
        let nv = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= nv) {
                return Err(Error::VertexIndex { triangle: t, index });
            }
        }
        if self.triangles.is_empty() {
            return Err(Error::InvalidParameter("mesh has no triangles".into()));
        }

        // Directed edge counts. In a closed, consistently wound manifold each
        // undirected edge appears exactly once in each direction.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        let mut undirected: Vec<((usize, usize), usize)> = {
            let mut m: HashMap<(usize, usize), usize> = HashMap::new();
            for (&(a, b), &c) in &directed {
                *m.entry((a.min(b), a.max(b))).or_default() += c;
            }
            m.into_iter().collect()
        };
        // Report the smallest offending edge so errors are deterministic.
        undirected.sort_unstable();
        for &((a, b), count) in &undirected {
            match count {
                1 => return Err(Error::OpenBoundary(a, b)),
                2 => {}
                _ => return Err(Error::NonManifoldEdge { a, b, count }),
            }
        }
        for &((a, b), _) in &undirected {
            if directed.get(&(a, b)).copied().unwrap_or(0) != 1 {
                return Err(Error::InconsistentOrientation(a, b));
            }
        }

        let diag = bbox_diagonal(&self.vertices);
        let min_area = DEGENERATE_AREA_REL * diag * diag;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if area.is_nan() || area <= min_area {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }

        let mut warnings = Vec::new();
        let mut volume = self.signed_volume();
        let flipped = volume < 0.0;
        if flipped {
            for tri in &mut self.triangles {
                tri.swap(1, 2);
            }
            volume = -volume;
            warnings.push("inward orientation detected; all triangles flipped".to_string());
        }

        let used = {
            let mut used = vec![false; nv];
            self.triangles
                .iter()
                .flatten()
                .for_each(|&i| used[i] = true);
            used.iter().filter(|&&u| u).count()
        };
        if used != nv {
            warnings.push(format!("{} unreferenced vertices", nv - used));
        }
        let n_edges = undirected.len();
        let euler = used as i64 - n_edges as i64 + self.triangles.len() as i64;
        if euler != 2 {
            warnings.push(format!(
                "Euler characteristic {euler} (genus {}); surface is not a sphere topologically",
                (2 - euler) / 2
            ));
        }
        for w in &warnings {
            log::warn!("{w}");
        }

        Ok(MeshReport {
            n_vertices: used,
            n_edges,
            n_faces: self.triangles.len(),
            euler_characteristic: euler,
            signed_volume: volume,
            flipped,
            warnings,
        })
    }
}

fn signed_volume(vertices: &[Vec3], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .map(|&[a, b, c]| vertices[a].dot(&vertices[b].cross(&vertices[c])))
        .sum::<f64>()
        / 6.0
}

fn bbox_diagonal(vertices: &[Vec3]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    if vertices.is_empty() {
        0.0
    } else {
        (hi - lo).norm()
    }
}

/// Per-triangle collocation geometry, indexed in triangle order.
#[derive(Debug, Clone)]
pub struct PanelSet {
    pub centroids: Vec<Vec3>,
    /// Outward unit normals.
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
    /// Longest edge of each panel.
    pub diameters: Vec<f64>,
    pub corners: Vec<[Vec3; 3]>,
}

impl PanelSet {
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// `Σ area·normal`, which vanishes for a closed surface.
    pub fn vector_area(&self) -> Vec3 {
        self.areas
            .iter()
            .zip(&self.normals)
            .fold(Vec3::zeros(), |acc, (a, n)| acc + *a * n)
    }
}

/// Computes centroid, outward normal, area and diameter of every triangle.
pub fn panelize(mesh: &SurfaceMesh) -> Result<PanelSet> {
    panelize_triangles((0..mesh.n_faces()).map(|t| mesh.corners(t)))
}

/// Panel geometry of arbitrary triangles, used directly for single panels.
pub fn panelize_triangles(tris: impl IntoIterator<Item = [Vec3; 3]>) -> Result<PanelSet> {
    let tris: Vec<[Vec3; 3]> = tris.into_iter().collect();
    let n = tris.len();
    let mut panels = PanelSet {
        centroids: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        areas: Vec::with_capacity(n),
        diameters: Vec::with_capacity(n),
        corners: Vec::with_capacity(n),
    };
    for (index, [a, b, c]) in tris.into_iter().enumerate() {
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::DegenerateTriangle {
                index,
                area: 0.5 * norm,
            });
        }
        panels.centroids.push((a + b + c) / 3.0);
        panels.normals.push(cross / norm);
        panels.areas.push(0.5 * norm);
        panels
            .diameters
            .push((b - a).norm().max((c - b).norm()).max((a - c).norm()));
        panels.corners.push([a, b, c]);
    }
    Ok(panels)
}
