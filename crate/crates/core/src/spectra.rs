//! Eigenmodes of the assembled operator and their physical interpretation.

use std::collections::HashSet;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::{c64, Mat, MatRef, Par};
use serde::Serialize;

use crate::{Error, NpOperator, Result};

/// `ε = (λ - 1)/(λ + 1)`.
pub fn eps_from_lambda(lambda: f64) -> Result<f64> {
    if lambda == -1.0 {
        return Err(Error::Pole(lambda));
    }
    Ok((lambda - 1.0) / (lambda + 1.0))
}

/// `λ = (1 + ε)/(1 - ε)`, inverse of [`eps_from_lambda`].
pub fn lambda_from_eps(eps: f64) -> Result<f64> {
    if eps == 1.0 {
        return Err(Error::Pole(eps));
    }
    Ok((1.0 + eps) / (1.0 - eps))
}

/// All eigenpairs of a real matrix.
///
/// `vectors` uses the packed real convention: for a real eigenvalue at index
/// `j` column `j` is its eigenvector; for a conjugate pair at `j, j+1`
/// (positive imaginary part first) the eigenvector of `values[j]` is
/// `col(j) + i·col(j+1)`.
#[derive(Debug, Clone)]
pub struct RawEigenpairs {
    pub values: Vec<c64>,
    pub vectors: Mat<f64>,
}

/// Dense nonsymmetric eigendecomposition (Hessenberg reduction, shifted QR), run sequentially.
pub fn eigendecompose_matrix(a: MatRef<'_, f64>) -> Result<RawEigenpairs> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    let par = Par::Seq;
    let mut vectors = Mat::<f64>::zeros(n, n);
    let mut s_re = Diag::<f64>::zeros(n);
    let mut s_im = Diag::<f64>::zeros(n);
    let mut mem = MemBuffer::new(evd::evd_scratch::<f64>(
        n,
        ComputeEigenvectors::No,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::evd_real(
        a,
        s_re.as_mut(),
        s_im.as_mut(),
        None,
        Some(vectors.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::NoConvergence { index: None })?;
    let values = (0..n)
        .map(|j| c64::new(s_re[j], s_im[j]))
        .collect::<Vec<_>>();
    if let Some(index) = values
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::NoConvergence { index: Some(index) });
    }
    Ok(RawEigenpairs { values, vectors })
}

pub fn eigendecompose(op: &NpOperator) -> Result<RawEigenpairs> {
    eigendecompose_matrix(op.matrix())
}

/// Thresholds for [`filter_modes`] and [`cluster_modes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterTolerances {
    /// Pairs with `|Im λ| > imag_rel · max|λ|` are discarded.
    pub imag_rel: f64,
    /// Distance from `λ = -1` within which a net-charged mode is flagged as the monopole.
    pub monopole: f64,
    /// Relative ε tolerance for multiplet clustering.
    pub cluster_rel: f64,
    /// Retained conjugate pairs whose real-form densities exceed this relative residual are discarded.
    pub residual: f64,
}

impl Default for FilterTolerances {
    fn default() -> Self {
        FilterTolerances {
            imag_rel: 1e-6,
            monopole: 0.05,
            cluster_rel: 0.02,
            residual: 1e-8,
        }
    }
}

/// One retained surface mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub lambda: f64,
    /// Imaginary part below the discard tolerance, if the eigenvalue was not exactly real.
    pub lambda_imag: f64,
    /// `None` for the monopole.
    pub eps: Option<f64>,
    /// Per-panel charge density, scaled so the largest entry is exactly `+1`.
    pub sigma: Vec<f64>,
    pub monopole: bool,
    /// Taken from a conjugate pair whose imaginary part was under tolerance.
    pub complex_partner: bool,
    /// `|Kσ - λσ| / (|K|_F |σ|)`.
    pub residual: f64,
    /// `|Σσ·area| / Σ|σ|·area`.
    pub charge_ratio: f64,
    /// Index into [`ModeSet::clusters`]; `None` for the monopole.
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub mean_eps: f64,
    pub members: Vec<usize>,
    pub multiplicity: usize,
}

/// Physical modes sorted by descending `|λ|`, with multiplet clusters.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
    pub clusters: Vec<Cluster>,
    /// Eigenvalues dropped as complex, including `discarded_residual`.
    pub discarded_complex: usize,
    /// Near-real conjugate pairs (both members counted) dropped because no real
    /// density in their invariant plane meets the residual tolerance.
    pub discarded_residual: usize,
    pub frobenius_norm: f64,
}

impl ModeSet {
    pub fn monopole_count(&self) -> usize {
        self.modes.iter().filter(|m| m.monopole).count()
    }

    /// Non-monopole modes in rank order.
    pub fn physical(&self) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(|m| !m.monopole)
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    // First entry of largest magnitude; dividing by it makes that entry exactly +1.
    let vmax = v.iter().fold(
        0.0f64,
        |best, &x| if x.abs() > best.abs() { x } else { best },
    );
    if vmax != 0.0 {
        v.iter_mut().for_each(|x| *x /= vmax);
    }
    v
}

/// Applies the physicality filter, computes ε and residuals, and clusters.
///
/// Steps: drop conjugate pairs with non-negligible imaginary part; extract a
/// real, normalized density per remaining eigenvalue; flag the net-charged
/// mode near `λ = -1` as the monopole; compute ε for the rest; sort by
/// descending `|λ|`; attach residuals; drop near-real pairs that fail the
/// residual tolerance; cluster.
pub fn filter_modes(
    raw: &RawEigenpairs,
    op: &NpOperator,
    tols: &FilterTolerances,
) -> Result<ModeSet> {
    let n = raw.values.len();
    let areas = op.areas();
    let max_abs = raw.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag_tol = tols.imag_rel * max_abs;

    struct Candidate {
        index: usize,
        lambda: f64,
        imag: f64,
        sigma: Vec<f64>,
        /// First column of the conjugate pair this density came from.
        pair: Option<usize>,
    }
    let mut candidates = Vec::with_capacity(n);
    let mut discarded = 0;
    let mut j = 0;
    while j < n {
        let v = raw.values[j];
        if v.im == 0.0 {
            candidates.push(Candidate {
                index: j,
                lambda: v.re,
                imag: 0.0,
                sigma: normalize(raw.vectors.col(j).iter().copied().collect()),
                pair: None,
            });
            j += 1;
            continue;
        }
        if j + 1 >= n {
            return Err(Error::InvalidParameter(
                "unpaired complex eigenvalue".into(),
            ));
        }
        if v.im.abs() > imag_tol {
            discarded += 2;
        } else {
            // The real and imaginary parts span the (nearly real) invariant plane.
            for (k, col) in [j, j + 1].into_iter().enumerate() {
                candidates.push(Candidate {
                    index: col,
                    lambda: v.re,
                    imag: if k == 0 { v.im } else { -v.im },
                    sigma: normalize(raw.vectors.col(col).iter().copied().collect()),
                    pair: Some(j),
                });
            }
        }
        j += 2;
    }
    if candidates.is_empty() {
        return Err(Error::NoModes);
    }

    candidates.sort_by(|a, b| {
        b.lambda
            .abs()
            .total_cmp(&a.lambda.abs())
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.index.cmp(&b.index))
    });

    // Residuals for all retained densities in one product.
    let m = candidates.len();
    let sig = Mat::<f64>::from_fn(n, m, |i, c| candidates[c].sigma[i]);
    let ks = op.matrix() * &sig;
    let fro = op.frobenius_norm();

    let scored: Vec<(Option<usize>, Mode)> = candidates
        .into_iter()
        .enumerate()
        .map(|(c, cand)| {
            let kcol = ks.col(c);
            let mut r2 = 0.0;
            let mut s2 = 0.0;
            let mut net = 0.0;
            let mut abs = 0.0;
            for i in 0..n {
                let s = cand.sigma[i];
                r2 += (kcol[i] - cand.lambda * s).powi(2);
                s2 += s * s;
                net += s * areas[i];
                abs += s.abs() * areas[i];
            }
            let charge_ratio = if abs > 0.0 { net.abs() / abs } else { 0.0 };
            let monopole = (cand.lambda + 1.0).abs() < tols.monopole && charge_ratio > 0.5;
            let mode = Mode {
                lambda: cand.lambda,
                lambda_imag: cand.imag,
                eps: if monopole {
                    None
                } else {
                    eps_from_lambda(cand.lambda).ok()
                },
                sigma: cand.sigma,
                monopole,
                complex_partner: cand.pair.is_some(),
                residual: r2.sqrt() / (fro * s2.sqrt()),
                charge_ratio,
                cluster: None,
            };
            (cand.pair, mode)
        })
        .collect();

    // A genuinely complex pair has no real eigenvector, however small its
    // imaginary part; drop both members if either density fails the residual.
    let failed_pairs: HashSet<usize> = scored
        .iter()
        .filter(|(pair, m)| pair.is_some() && m.residual > tols.residual)
        .filter_map(|(pair, _)| *pair)
        .collect();
    let discarded_residual = 2 * failed_pairs.len();
    let modes: Vec<Mode> = scored
        .into_iter()
        .filter(|(pair, _)| pair.is_none_or(|p| !failed_pairs.contains(&p)))
        .map(|(_, m)| m)
        .collect();
    if modes.is_empty() {
        return Err(Error::NoModes);
    }
    let worst_real = modes.iter().map(|m| m.residual).fold(0.0, f64::max);
    if worst_real > tols.residual {
        log::warn!(
            "real eigenpair residual {worst_real:e} exceeds tolerance {:e}",
            tols.residual
        );
    }

    let mut set = ModeSet {
        modes,
        clusters: Vec::new(),
        discarded_complex: discarded + discarded_residual,
        discarded_residual,
        frobenius_norm: fro,
    };
    let monopoles = set.monopole_count();
    if monopoles != 1 {
        log::warn!("expected one monopole mode per closed surface, found {monopoles}");
    }
    set.clusters = cluster_modes(&set, tols.cluster_rel);
    for (c, cl) in set.clusters.iter().enumerate() {
        for &i in &cl.members {
            set.modes[i].cluster = Some(c);
        }
    }
    Ok(set)
}

/// Greedy grouping of consecutive non-monopole modes with nearly equal ε.
///
/// A mode joins the open cluster when `|ε - mean| ≤ rel_tol·|mean|`;
/// member indices refer to `modeset.modes`.
pub fn cluster_modes(modeset: &ModeSet, rel_tol: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut sum = 0.0;
    for (i, mode) in modeset.modes.iter().enumerate() {
        let Some(eps) = mode.eps.filter(|_| !mode.monopole) else {
            continue;
        };
        if let Some(open) = clusters.last_mut() {
            if (eps - open.mean_eps).abs() <= rel_tol * open.mean_eps.abs() {
                open.members.push(i);
                open.multiplicity += 1;
                sum += eps;
                open.mean_eps = sum / open.multiplicity as f64;
                continue;
            }
        }
        sum = eps;
        clusters.push(Cluster {
            mean_eps: eps,
            members: vec![i],
            multiplicity: 1,
        });
    }
    clusters
}

/// Full pipeline from assembled operator to clustered modes.
pub fn solve(op: &NpOperator, tols: &FilterTolerances) -> Result<ModeSet> {
    let raw = eigendecompose(op)?;
    filter_modes(&raw, op, tols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_icosphere, panelize};
    use crate::operator::assemble;
    use crate::AssemblyOptions;
    use proptest::prelude::*;

    #[test]
    fn map_examples() {
        assert!((eps_from_lambda(-1.0 / 3.0).unwrap() + 2.0).abs() < 1e-15);
        assert_eq!(eps_from_lambda(0.0).unwrap(), -1.0);
        assert_eq!(eps_from_lambda(1.0).unwrap(), 0.0);
        assert!(matches!(eps_from_lambda(-1.0), Err(Error::Pole(_))));

        assert!((lambda_from_eps(-2.0).unwrap() + 1.0 / 3.0).abs() < 1e-16);
        assert!((lambda_from_eps(-4.0 / 3.0).unwrap() + 1.0 / 7.0).abs() < 1e-16);
        assert_eq!(lambda_from_eps(0.0).unwrap(), 1.0);
        assert_eq!(lambda_from_eps(-1.0).unwrap(), 0.0);
        assert!(matches!(lambda_from_eps(1.0), Err(Error::Pole(_))));
    }

    proptest! {
        #[test]
        fn round_trip(eps in prop_oneof![-10.0f64..-1.01, -0.99f64..10.0]) {
            // λ = (ε+1)/(ε−1) is singular at ε = 1, not in either range.
            prop_assume!((eps - 1.0).abs() > 1e-3);
            let back = eps_from_lambda(lambda_from_eps(eps).unwrap()).unwrap();
            prop_assert!((back - eps).abs() <= 1e-14 * eps.abs().max(1e-300) + 1e-15, "{} {}", eps, back);
        }

        #[test]
        fn monotone_on_open_interval(a in -0.999f64..0.999, b in -0.999f64..0.999) {
            prop_assume!(a < b);
            prop_assert!(eps_from_lambda(a).unwrap() < eps_from_lambda(b).unwrap());
        }
    }

    #[test]
    fn sphere_chain() {
        for k in 1..=100u32 {
            let lam = -1.0 / (2.0 * f64::from(k) + 1.0);
            let eps = -(f64::from(k) + 1.0) / f64::from(k);
            assert!((eps_from_lambda(lam).unwrap() - eps).abs() <= 1e-14 * eps.abs());
        }
    }

    #[test]
    fn diagonal_matrix() {
        let a = Mat::from_fn(
            2,
            2,
            |i, j| if i == j { [-1.0 / 3.0, -0.2][i] } else { 0.0 },
        );
        let raw = eigendecompose_matrix(a.as_ref()).unwrap();
        let mut vals: Vec<f64> = raw.values.iter().map(|v| v.re).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![-1.0 / 3.0, -0.2]);
        for j in 0..2 {
            let col = raw.vectors.col(j);
            let axis = if raw.values[j].re == -0.2 { 1 } else { 0 };
            assert!((col[axis].abs() - 1.0).abs() < 1e-15);
            assert!(col[1 - axis].abs() < 1e-15);
        }
    }

    /// 4×4 block-diagonal matrix with known real and complex eigenvalues.
    fn synthetic(pair_im: f64) -> (NpOperator, RawEigenpairs) {
        let mut a = Mat::<f64>::zeros(4, 4);
        a[(0, 0)] = -1.0 / 3.0;
        a[(1, 1)] = -0.2;
        a[(2, 2)] = 0.1;
        a[(3, 3)] = 0.1;
        a[(2, 3)] = pair_im;
        a[(3, 2)] = -pair_im;
        let op = NpOperator::from_matrix(a, vec![1.0; 4]).unwrap();
        let raw = eigendecompose(&op).unwrap();
        (op, raw)
    }

    #[test]
    fn complex_pair_discarded() {
        let (op, raw) = synthetic(0.2);
        let set = filter_modes(&raw, &op, &FilterTolerances::default()).unwrap();
        assert_eq!(set.discarded_complex, 2);
        assert_eq!(set.modes.len(), 2);
        assert_eq!(set.modes[0].lambda, -1.0 / 3.0);
        assert_eq!(set.modes[1].lambda, -0.2);
    }

    #[test]
    fn tiny_imaginary_pair_retained() {
        let (op, raw) = synthetic(1e-9);
        let set = filter_modes(&raw, &op, &FilterTolerances::default()).unwrap();
        assert_eq!(set.discarded_complex, 0);
        let partners: Vec<&Mode> = set.modes.iter().filter(|m| m.complex_partner).collect();
        assert_eq!(partners.len(), 2);
        for m in partners {
            assert!((m.lambda - 0.1).abs() < 1e-15);
            assert!(m.residual < 1e-8);
        }
        assert_eq!(set.discarded_residual, 0);
    }

    #[test]
    fn near_real_pair_failing_residual_discarded() {
        // |Im λ| = 2e-7 is under the imaginary threshold (1e-6 · 1/3), but its
        // real densities leave a residual of about 2e-7 / |K|_F.
        let (op, raw) = synthetic(2e-7);
        let set = filter_modes(&raw, &op, &FilterTolerances::default()).unwrap();
        assert_eq!(set.discarded_residual, 2);
        assert_eq!(set.discarded_complex, 2);
        assert_eq!(set.modes.len(), 2);
        assert!(set.modes.iter().all(|m| !m.complex_partner));

        let loose = FilterTolerances {
            residual: 1e-3,
            ..FilterTolerances::default()
        };
        let set = filter_modes(&raw, &op, &loose).unwrap();
        assert_eq!(set.discarded_residual, 0);
        assert_eq!(set.modes.len(), 4);
    }

    #[test]
    fn normalization_contract() {
        let v = normalize(vec![0.5, -2.0, 1.0]);
        assert_eq!(v, vec![-0.25, 1.0, -0.5]);
    }

    fn sphere_modes(level: u32) -> (NpOperator, ModeSet) {
        let panels = panelize(&gen_icosphere(level, 1.0).unwrap()).unwrap();
        let op = assemble(&panels, &AssemblyOptions::default()).unwrap();
        let set = solve(&op, &FilterTolerances::default()).unwrap();
        (op, set)
    }

    #[test]
    fn sphere_level2_modes() {
        let (op, set) = sphere_modes(2);
        // Complex pairs only appear among the unresolved mesh-scale modes.
        let raw = eigendecompose(&op).unwrap();
        let k4 = crate::analytic::sphere_lambda(4).unwrap().abs();
        for v in raw
            .values
            .iter()
            .filter(|v| v.im.abs() > 1e-8 * op.frobenius_norm())
        {
            assert!(v.re.abs() < k4, "{v}");
        }
        assert!(
            set.discarded_complex * 5 < op.len(),
            "{}",
            set.discarded_complex
        );

        assert_eq!(set.monopole_count(), 1);
        let mono = set.modes.iter().find(|m| m.monopole).unwrap();
        assert!((mono.lambda + 1.0).abs() < 0.05);

        for m in set.physical() {
            assert!(m.charge_ratio <= 1e-3, "{}", m.charge_ratio);
            assert!(m.residual <= 1e-8, "{}", m.residual);
            let eps = m.eps.unwrap();
            assert!((-2.2..=-0.5).contains(&eps), "{eps}");
        }
        for w in set.modes.windows(2) {
            assert!(w[0].lambda.abs() >= w[1].lambda.abs());
        }
        for m in &set.modes {
            let max = m.sigma.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert_eq!(max, 1.0);
            assert!(m.sigma.contains(&1.0));
        }

        // Eigenvalue closest to −1/3 within 5%.
        let closest = set
            .modes
            .iter()
            .map(|m| m.lambda)
            .min_by(|a, b| (a + 1.0 / 3.0).abs().total_cmp(&(b + 1.0 / 3.0).abs()))
            .unwrap();
        assert!((closest + 1.0 / 3.0).abs() < 0.05 / 3.0, "{closest}");
    }

    #[test]
    fn sphere_level3_clusters() {
        let (_, set) = sphere_modes(3);
        let c = &set.clusters;
        assert_eq!(c[0].multiplicity, 3);
        assert!(
            (c[0].mean_eps + 2.0).abs() < 0.03 * 2.0,
            "{}",
            c[0].mean_eps
        );
        assert_eq!(c[1].multiplicity, 5);
        assert!(
            (c[1].mean_eps + 1.5).abs() < 0.04 * 1.5,
            "{}",
            c[1].mean_eps
        );
    }
}
