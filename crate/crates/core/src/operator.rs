//! Dense collocation matrix of the layer-potential operator.
//!
//! Entry `K[i][j]` approximates `∫_{panel j} F(cᵢ, nᵢ, y) dS(y)` with
//! `F(r, r') = -(1/2π) n(r)·(r - r')/|r - r'|³`. Far pairs use the one-point
//! centroid rule; near pairs integrate over a uniformly subdivided copy of
//! panel `j`. The diagonal is not integrated: it is fixed by requiring the
//! area-weighted column sums `Σᵢ areaᵢ·K[i][j]/areaⱼ` to equal `-1`, the
//! value of `∫_S F(r, r') dS(r)` for `r'` on a smooth closed surface.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::fmt17;
use crate::{Error, PanelSet, Result, Vec3};

/// Quadrature and size settings for [`assemble`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssemblyOptions {
    /// Pairs with centroid distance below `eta·(diamᵢ + diamⱼ)` use subdivided quadrature.
    pub eta: f64,
    /// Number of 4-way subdivisions of the source panel for near pairs.
    pub subdiv_depth: u32,
    pub max_panels: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            eta: 2.0,
            subdiv_depth: 2,
            max_panels: 20_000,
        }
    }
}

/// `F(r, r')` for observation point `r` with unit normal `n_r`.
pub fn kernel_eval(r: &Vec3, n_r: &Vec3, r_prime: &Vec3) -> Result<f64> {
    let d = r - r_prime;
    let dist2 = d.norm_squared();
    if dist2 == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(kernel_unchecked(n_r, &d, dist2))
}

#[inline]
fn kernel_unchecked(n_r: &Vec3, d: &Vec3, dist2: f64) -> f64 {
    -n_r.dot(d) / (2.0 * PI * dist2 * dist2.sqrt())
}

/// Midpoint rule on `4^depth` congruent sub-triangles: (centroid, area) pairs.
fn subdivided_points(tri: &[Vec3; 3], depth: u32) -> Vec<(Vec3, f64)> {
    let mut tris = vec![*tri];
    for _ in 0..depth {
        tris = tris
            .iter()
            .flat_map(|&[a, b, c]| {
                let (ab, bc, ca) = ((a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5);
                [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
            })
            .collect();
    }
    tris.iter()
        .map(|[a, b, c]| ((a + b + c) / 3.0, 0.5 * (b - a).cross(&(c - a)).norm()))
        .collect()
}

/// Assembled operator; immutable after construction.
#[derive(Debug, Clone)]
pub struct NpOperator {
    matrix: Mat<f64>,
    areas: Vec<f64>,
    options: AssemblyOptions,
}

impl NpOperator {
    /// Wraps an arbitrary square matrix with panel areas, e.g. for synthetic spectra.
    ///
    /// No structural identity is enforced.
    pub fn from_matrix(matrix: Mat<f64>, areas: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != areas.len() {
            return Err(Error::InvalidParameter(format!(
                "matrix {}x{} does not match {} areas",
                matrix.nrows(),
                matrix.ncols(),
                areas.len()
            )));
        }
        Ok(NpOperator {
            matrix,
            areas,
            options: AssemblyOptions::default(),
        })
    }

    pub fn matrix(&self) -> faer::MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn options(&self) -> &AssemblyOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm_l2()
    }

    /// `Σᵢ areaᵢ·K[i][j] / areaⱼ` for every column `j`; `-1` by construction.
    pub fn column_identity(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let col = self.matrix.col(j);
                let s: f64 = (0..self.len()).map(|i| col[i] * self.areas[i]).sum();
                s / self.areas[j]
            })
            .collect()
    }

    /// Text dump: header `# N=<N>`, then one row per line with 17 significant digits.
    pub fn write_dump(&self, mut w: impl Write) -> std::io::Result<()> {
        let n = self.len();
        writeln!(w, "# N={n}")?;
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for j in 0..n {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&fmt17(self.matrix[(i, j)]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Off-diagonal column `j` (diagonal left at zero).
fn off_diagonal_column(panels: &PanelSet, j: usize, opts: &AssemblyOptions, col: &mut [f64]) {
    let src = panels.centroids[j];
    let area_j = panels.areas[j];
    let mut near_points: Option<Vec<(Vec3, f64)>> = None;
    for (i, out) in col.iter_mut().enumerate() {
        if i == j {
            *out = 0.0;
            continue;
        }
        let c = panels.centroids[i];
        let n = panels.normals[i];
        let d = c - src;
        let dist = d.norm();
        *out = if dist > opts.eta * (panels.diameters[i] + panels.diameters[j]) {
            kernel_unchecked(&n, &d, dist * dist) * area_j
        } else {
            let pts = near_points
                .get_or_insert_with(|| subdivided_points(&panels.corners[j], opts.subdiv_depth));
            pts.iter()
                .map(|(y, a)| {
                    let d = c - y;
                    kernel_unchecked(&n, &d, d.norm_squared()) * a
                })
                .sum()
        };
    }
}

/// Off-diagonal sums `Σ_{i≠j} areaᵢ·K[i][j]/areaⱼ`, before the diagonal rule.
///
/// On a fine mesh of a smooth surface these approach `-1`.
pub fn off_diagonal_column_sums(panels: &PanelSet, opts: &AssemblyOptions) -> Vec<f64> {
    let n = panels.len();
    (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![0.0; n];
            off_diagonal_column(panels, j, opts, &mut col);
            col.iter()
                .zip(&panels.areas)
                .map(|(k, a)| k * a)
                .sum::<f64>()
                / panels.areas[j]
        })
        .collect()
}

/// Assembles the dense operator over `panels`.
pub fn assemble(panels: &PanelSet, opts: &AssemblyOptions) -> Result<NpOperator> {
    let n = panels.len();
    if n < 4 {
        return Err(Error::TooFewPanels(n));
    }
    if n > opts.max_panels {
        return Err(Error::TooManyPanels {
            count: n,
            limit: opts.max_panels,
        });
    }
    if !(opts.eta.is_finite() && opts.eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be positive, got {}",
            opts.eta
        )));
    }
    if let Some((index, &area)) = panels
        .areas
        .iter()
        .enumerate()
        .find(|(_, a)| a.is_nan() || **a <= 0.0)
    {
        return Err(Error::DegenerateTriangle { index, area });
    }

    let mut matrix = Mat::<f64>::zeros(n, n);
    matrix
        .par_col_iter_mut()
        .enumerate()
        .for_each(|(j, mut col)| {
            let mut buf = vec![0.0; n];
            off_diagonal_column(panels, j, opts, &mut buf);
            // Fixed ascending summation order keeps the diagonal independent of scheduling.
            let area_j = panels.areas[j];
            let off: f64 = buf
                .iter()
                .zip(&panels.areas)
                .map(|(k, a)| (k / area_j) * a)
                .sum();
            buf[j] = -1.0 - off;
            for (i, v) in buf.into_iter().enumerate() {
                col[i] = v;
            }
        });

    if let Some(bad) = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .find(|&(i, j)| !matrix[(i, j)].is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "non-finite operator entry at {bad:?}"
        )));
    }

    Ok(NpOperator {
        matrix,
        areas: panels.areas.clone(),
        options: *opts,
    })
}

/// `Σᵢ nᵢ·(cᵢ - x)/|cᵢ - x|³ · areaᵢ`: `4π` for `x` inside, `0` outside.
pub fn gauss_check(panels: &PanelSet, x: &Vec3) -> f64 {
    panels
        .centroids
        .iter()
        .zip(&panels.normals)
        .zip(&panels.areas)
        .map(|((c, n), a)| {
            let d = c - x;
            n.dot(&d) / d.norm().powi(3) * a
        })
        .sum()
}
