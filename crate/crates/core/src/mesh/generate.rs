use std::collections::HashMap;

use super::SurfaceMesh;
use crate::{Error, Result, Vec3};

/// Largest accepted subdivision level (20·4⁷ = 327 680 faces).
pub const MAX_LEVEL: u32 = 7;

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let v = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Unit-sphere vertices and faces of the `level`-times subdivided icosahedron.
fn unit_icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let (mut verts, mut faces) = icosahedron();
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

fn check_level(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        Err(Error::LevelOutOfRange(level))
    } else {
        Ok(())
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

/// Icosahedron subdivided `level` times with vertices projected onto a sphere of `radius`.
///
/// Has `20·4^level` faces and `10·4^level + 2` vertices.
pub fn gen_icosphere(level: u32, radius: f64) -> Result<SurfaceMesh> {
    check_level(level)?;
    check_positive("radius", radius)?;
    let (v, f) = unit_icosphere(level);
    let (mesh, _) = SurfaceMesh::new(v.into_iter().map(|p| p * radius).collect(), f)?;
    Ok(mesh)
}

/// Unit icosphere with vertices scaled by `(a, b, c)` along the axes.
pub fn gen_ellipsoid(a: f64, b: f64, c: f64, level: u32) -> Result<SurfaceMesh> {
    check_level(level)?;
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_positive("c", c)?;
    let (v, f) = unit_icosphere(level);
    let (mesh, _) = SurfaceMesh::new(
        v.into_iter()
            .map(|p| Vec3::new(a * p.x, b * p.y, c * p.z))
            .collect(),
        f,
    )?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::panelize;
    use std::f64::consts::PI;

    #[test]
    fn level_zero_is_icosahedron() {
        let (v, f) = icosahedron();
        let (_, report) = SurfaceMesh::new(v, f).unwrap();
        assert!(!report.flipped);
        assert_eq!(report.euler_characteristic, 2);
        let m = gen_icosphere(0, 1.0).unwrap();
        assert_eq!(m.n_faces(), 20);
        assert_eq!(m.vertices().len(), 12);
        for v in m.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn face_and_vertex_counts() {
        for level in 0..=4 {
            let m = gen_icosphere(level, 1.0).unwrap();
            let p = 4usize.pow(level);
            assert_eq!(m.n_faces(), 20 * p);
            assert_eq!(m.vertices().len(), 10 * p + 2);
        }
    }

    #[test]
    fn level3_area_close_to_sphere() {
        let m = gen_icosphere(3, 1.0).unwrap();
        assert_eq!(m.n_faces(), 1280);
        let rel = (m.surface_area() - 4.0 * PI).abs() / (4.0 * PI);
        assert!(rel < 0.01, "{rel}");
    }

    #[test]
    fn inscribed_volume_deficit() {
        // The inscribed level-2 polyhedron holds 96.6% of the ball; level 3 is within 1%.
        let ball = 4.0 / 3.0 * PI * 8.0;
        let r2 = gen_icosphere(2, 2.0).unwrap().signed_volume() / ball;
        assert!((r2 - 0.966161).abs() < 1e-5, "{r2}");
        let r3 = gen_icosphere(3, 2.0).unwrap().signed_volume() / ball;
        assert!((1.0 - r3) < 0.01, "{r3}");
    }

    #[test]
    fn volume_increases_with_level() {
        let vols: Vec<f64> = (0..=5)
            .map(|l| gen_icosphere(l, 1.0).unwrap().signed_volume())
            .collect();
        for w in vols.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(*vols.last().unwrap() < 4.0 / 3.0 * PI);
    }

    #[test]
    fn level2_centroid_radii() {
        let p = panelize(&gen_icosphere(2, 1.0).unwrap()).unwrap();
        for c in &p.centroids {
            let r = c.norm();
            assert!((0.97..=1.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn unit_ellipsoid_matches_icosphere() {
        for level in 0..3 {
            assert_eq!(
                gen_ellipsoid(1.0, 1.0, 1.0, level).unwrap(),
                gen_icosphere(level, 1.0).unwrap()
            );
        }
    }

    #[test]
    fn prolate_volume() {
        // Axis scaling multiplies every volume by abc, so the icosphere deficit carries over.
        let sphere = gen_icosphere(2, 1.0).unwrap().signed_volume();
        let m = gen_ellipsoid(2.0, 1.0, 1.0, 2).unwrap();
        assert!((m.signed_volume() - 2.0 * sphere).abs() < 1e-13);
        let exact = 4.0 / 3.0 * PI * 2.0;
        let m3 = gen_ellipsoid(2.0, 1.0, 1.0, 3).unwrap();
        assert!((m3.signed_volume() - exact).abs() / exact < 0.01);
    }

    #[test]
    fn flat_ellipsoid_is_degenerate() {
        assert!(matches!(
            gen_ellipsoid(1.0, 1.0, 1e-15, 1),
            Err(Error::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn guards() {
        assert!(matches!(
            gen_icosphere(8, 1.0),
            Err(Error::LevelOutOfRange(8))
        ));
        assert!(matches!(
            gen_icosphere(1, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            gen_ellipsoid(1.0, -1.0, 1.0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }
}
