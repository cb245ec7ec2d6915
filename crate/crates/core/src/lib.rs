//! Boundary-element computation of electrostatic surface-plasmon resonances.
//!
//! A closed, outward-oriented triangulated surface is discretized into flat
//! panels. The surface integral operator with kernel
//!
//! ```text
//! F(r, r') = -(1/2π) n(r)·(r - r') / |r - r'|³
//! ```
//!
//! is collocated at panel centroids against piecewise-constant densities.
//! Each eigenpair `(λ, σ)` of the resulting matrix is a surface mode: `σ` is
//! its induced charge density and the resonance permittivity of the particle
//! (in vacuum) is `ε = (λ - 1)/(λ + 1)`.
//!
//! Modules:
//! - [`mesh`]: surface ingestion (OFF, ASCII STL), generators and validation.
//! - [`operator`]: kernel, quadrature and dense assembly.
//! - [`spectra`]: eigendecomposition, physicality filter, multiplet clustering.
//! - [`analytic`]: closed-form half-space and sphere results used as oracles.
//! - [`study`]: refinement and asymptotics studies.
//! - [`output`]: stable JSON/CSV/sidecar serializations.

pub mod analytic;
pub mod error;
pub mod mesh;
pub mod operator;
pub mod output;
pub mod spectra;
pub mod study;

pub use error::{Error, Result};
pub use mesh::{MeshFormat, MeshReport, PanelSet, SurfaceMesh};
pub use operator::{AssemblyOptions, NpOperator};
pub use spectra::{Cluster, FilterTolerances, Mode, ModeSet, RawEigenpairs};

/// 3-vector used throughout for points and normals.
pub type Vec3 = nalgebra::Vector3<f64>;
