//! Closed-form resonance results for the flat interface and the sphere.
//!
//! Both Dirichlet-to-Neumann operators of a half-space act in Fourier space
//! as multiplication by `|ξ|` (interior) and `-|ξ|` (exterior), so their
//! ratio is `-1` at every wave vector and the only resonance is `ε = -1`.
//!
//! For a sphere of radius `R`, the degree-`k` spherical harmonic `Y_k` extends
//! inside as `(r/R)^k Y_k` and outside as `(R/r)^(k+1) Y_k`. The outward normal
//! derivatives give the DtN eigenvalues `k/R` and `-(k+1)/R`, so
//! `ε_k = -(k+1)/k`, shared by the `2k+1` harmonics of degree `k`. Through the
//! layer-potential map `ε = (λ-1)/(λ+1)` this is `λ_k = -1/(2k+1)`.

use serde::Serialize;

use crate::{Error, Result};

/// Resonance of a flat interface.
pub fn halfspace_eps() -> f64 {
    let s = HalfSpaceSymbols::at([1.0, 0.0]);
    1.0 / (s.d_minus / s.d_plus)
}

/// Principal symbols of the interior and exterior DtN operators of a half-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfSpaceSymbols {
    pub xi: [f64; 2],
    pub d_minus: f64,
    pub d_plus: f64,
}

impl HalfSpaceSymbols {
    pub fn at(xi: [f64; 2]) -> Self {
        let m = xi[0].hypot(xi[1]);
        HalfSpaceSymbols {
            xi,
            d_minus: m,
            d_plus: -m,
        }
    }
}

fn check_degree(k: u64) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter(
            "k = 0 is the uniform charge (monopole), not a surface resonance".into(),
        ))
    } else {
        Ok(())
    }
}

/// `-(k+1)/k`, the degree-`k` sphere resonance.
pub fn sphere_eps(k: u64) -> Result<f64> {
    check_degree(k)?;
    let k = k as f64;
    Ok(-(k + 1.0) / k)
}

/// `-1/(2k+1)`, the layer-potential eigenvalue of the degree-`k` sphere mode.
pub fn sphere_lambda(k: u64) -> Result<f64> {
    check_degree(k)?;
    Ok(-1.0 / (2.0 * k as f64 + 1.0))
}

/// DtN eigenvalues on the degree-`k` harmonics of a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereDtn {
    pub d_minus: f64,
    pub d_plus: f64,
}

pub fn dtn_sphere(k: u64, radius: f64) -> Result<SphereDtn> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let k = k as f64;
    Ok(SphereDtn {
        d_minus: k / radius,
        d_plus: -(k + 1.0) / radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereEntry {
    pub k: u64,
    pub eps: f64,
    pub lambda: f64,
    pub multiplicity: u64,
}

/// The sphere resonance table for degrees `1..=kmax`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereSpectrum {
    pub entries: Vec<SphereEntry>,
}

impl SphereSpectrum {
    pub fn new(kmax: u64) -> Result<Self> {
        check_degree(kmax)?;
        let entries = (1..=kmax)
            .map(|k| SphereEntry {
                k,
                eps: -(k as f64 + 1.0) / k as f64,
                lambda: -1.0 / (2.0 * k as f64 + 1.0),
                multiplicity: 2 * k + 1,
            })
            .collect();
        Ok(SphereSpectrum { entries })
    }
}

/// Number of sphere modes of degree `1..=k`, i.e. `k(k+2)`.
pub fn cumulative_multiplicity(k: u64) -> u64 {
    k * (k + 2)
}

/// Reference tail `(k, -1 - 1/k)` for `k = 1..=kmax`.
pub fn asymptote_reference(kmax: u64) -> Result<Vec<(u64, f64)>> {
    check_degree(kmax)?;
    Ok((1..=kmax).map(|k| (k, -1.0 - 1.0 / k as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::eps_from_lambda;

    #[test]
    fn halfspace() {
        assert_eq!(halfspace_eps(), -1.0);
        for xi in [[0.3, -2.0], [1e-8, 0.0], [5.0, 7.0]] {
            let s = HalfSpaceSymbols::at(xi);
            assert_eq!(s.d_minus, -s.d_plus);
            assert_eq!(s.d_minus / s.d_plus, -1.0);
        }
        // D-route eigenvalue −1 of D₋D₊⁻¹ inverts to ε = −1.
        assert_eq!(1.0 / -1.0, halfspace_eps());
    }

    #[test]
    fn sphere_values() {
        assert_eq!(sphere_eps(1).unwrap(), -2.0);
        assert_eq!(sphere_eps(2).unwrap(), -1.5);
        assert!((sphere_eps(1_000_000).unwrap() + 1.0).abs() < 1e-5);
        assert_eq!(sphere_lambda(1).unwrap(), -1.0 / 3.0);
        assert_eq!(sphere_lambda(2).unwrap(), -0.2);
        assert!(sphere_lambda(1_000_000).unwrap().abs() < 1e-6);
        assert!(sphere_eps(0).is_err());
        assert!(sphere_lambda(0).is_err());
    }

    #[test]
    fn dtn_values() {
        assert_eq!(
            dtn_sphere(1, 1.0).unwrap(),
            SphereDtn {
                d_minus: 1.0,
                d_plus: -2.0
            }
        );
        assert_eq!(
            dtn_sphere(0, 1.0).unwrap(),
            SphereDtn {
                d_minus: 0.0,
                d_plus: -1.0
            }
        );
        assert_eq!(
            dtn_sphere(3, 2.0).unwrap(),
            SphereDtn {
                d_minus: 1.5,
                d_plus: -2.0
            }
        );
        assert!(dtn_sphere(1, 0.0).is_err());
    }

    #[test]
    fn identities() {
        for k in 1..=1000u64 {
            let eps = sphere_eps(k).unwrap();
            assert!((eps + 1.0 + 1.0 / k as f64).abs() < 1e-15);
            let via_lambda = eps_from_lambda(sphere_lambda(k).unwrap()).unwrap();
            assert!((via_lambda - eps).abs() <= 1e-14 * eps.abs());
            for r in [0.5, 1.0, 3.7] {
                let d = dtn_sphere(k, r).unwrap();
                assert!((1.0 / (d.d_minus / d.d_plus) - eps).abs() <= 1e-14 * eps.abs());
            }
        }
        for k in [10_000u64, 1_000_000] {
            let eps = sphere_eps(k).unwrap();
            assert!(
                (eps_from_lambda(sphere_lambda(k).unwrap()).unwrap() - eps).abs()
                    < 1e-14 * eps.abs() + 1e-14
            );
        }
    }

    #[test]
    fn spectrum_table() {
        let s = SphereSpectrum::new(12).unwrap();
        for w in s.entries.windows(2) {
            assert!(w[1].eps > w[0].eps && w[1].eps < -1.0);
            assert!(w[1].lambda > w[0].lambda && w[1].lambda < 0.0);
        }
        for kk in 1..=12 {
            let total: u64 = s.entries[..kk as usize]
                .iter()
                .map(|e| e.multiplicity)
                .sum();
            assert_eq!(total, cumulative_multiplicity(kk));
        }
    }

    #[test]
    fn asymptote() {
        let t = asymptote_reference(3).unwrap();
        assert_eq!(t[0], (1, -2.0));
        assert_eq!(t[1], (2, -1.5));
        assert_eq!(t[2].0, 3);
        assert!((t[2].1 + 4.0 / 3.0).abs() < 1e-15);
        let long = asymptote_reference(50).unwrap();
        for w in long.windows(2) {
            assert!(w[1].1 > w[0].1 && w[1].1 < -1.0);
        }
        for (k, eps) in long {
            assert!((eps - sphere_eps(k).unwrap()).abs() <= 2.0 * f64::EPSILON * eps.abs());
        }
    }
}
