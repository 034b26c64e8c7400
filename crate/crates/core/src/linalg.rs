//! Dense small-matrix kernels: spectra, guarded linear solves and the
//! P-matrix test.
//!
//! Eigenvalues come from nalgebra's real Schur decomposition with an
//! explicit iteration cap. A stalled iteration is retried on the transpose
//! and on the index-reversed matrix before it surfaces as an error.

use nalgebra::{Complex, DMatrix, DVector, Schur, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical margins shared by the stability and P-matrix decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinalgConfig {
    /// Relative tolerance `tol = rel * max(1, ||A||_inf)` for sign decisions on eigenvalues.
    pub stability_rel: f64,
    /// Relative tolerance for a principal minor of order `k`: `rel * max(1, ||A||_inf)^k`.
    pub minor_rel: f64,
    /// Condition estimate above which a system is reported singular.
    pub max_condition: f64,
    pub eigen_cap: usize,
    pub p_matrix_cap: usize,
}

impl Default for LinalgConfig {
    fn default() -> Self {
        LinalgConfig { stability_rel: 1e-9, minor_rel: 1e-12, max_condition: 1e12, eigen_cap: 64, p_matrix_cap: 20 }
    }
}

impl LinalgConfig {
    pub fn stability_tol(&self, a: &DMatrix<f64>) -> f64 {
        self.stability_rel * inf_norm(a).max(1.0)
    }
}

pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest real part.
    pub abscissa: f64,
    /// Largest modulus.
    pub radius: f64,
}

impl Spectrum {
    fn from_eigenvalues(eigenvalues: Vec<Complex<f64>>) -> Self {
        let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Spectrum { eigenvalues, abscissa, radius }
    }
}

pub fn eigen(a: &DMatrix<f64>) -> Result<Spectrum> {
    eigen_with(a, &LinalgConfig::default())
}

pub fn eigen_with(a: &DMatrix<f64>, cfg: &LinalgConfig) -> Result<Spectrum> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("eigen: {}x{} matrix is not square", n, a.ncols())));
    }
    if n > cfg.eigen_cap {
        return Err(Error::SizeCap { what: "eigenvalue problem", n, cap: cfg.eigen_cap });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("eigen: matrix has non-finite entries".into()));
    }
    match n {
        0 => return Ok(Spectrum { eigenvalues: vec![], abscissa: f64::NEG_INFINITY, radius: 0.0 }),
        1 => return Ok(Spectrum::from_eigenvalues(vec![Complex::new(a[(0, 0)], 0.0)])),
        _ => {}
    }
    // Already triangular: the diagonal is the exact spectrum.
    let upper = (0..n).all(|j| (j + 1..n).all(|i| a[(i, j)] == 0.0));
    let lower = (0..n).all(|j| (0..j).all(|i| a[(i, j)] == 0.0));
    if upper || lower {
        return Ok(Spectrum::from_eigenvalues((0..n).map(|i| Complex::new(a[(i, i)], 0.0)).collect()));
    }
    // The shifted QR iteration occasionally stalls on one ordering of a matrix.
    // The transpose and the index-reversed matrix share the spectrum.
    let reversed = DMatrix::from_fn(n, n, |i, j| a[(n - 1 - i, n - 1 - j)]);
    let schur = [a.clone(), a.transpose(), reversed]
        .into_iter()
        .find_map(|m| Schur::try_new(m, f64::EPSILON, 100 * n))
        .ok_or(Error::EigenNoConvergence { dim: n })?;
    let eigenvalues = schur.complex_eigenvalues().iter().copied().collect();
    Ok(Spectrum::from_eigenvalues(eigenvalues))
}

/// Returned when a system is too ill-conditioned to solve reliably.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    /// One-norm condition estimate; infinite for exactly singular matrices.
    pub condition: f64,
}

impl From<SingularReport> for Error {
    fn from(r: SingularReport) -> Self {
        Error::Singular { condition: r.condition }
    }
}

/// LU factorisation that has passed the conditioning check.
#[derive(Debug, Clone)]
pub struct Factored {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

impl Factored {
    pub fn new(a: &DMatrix<f64>, max_condition: f64) -> std::result::Result<Self, SingularReport> {
        let n = a.nrows();
        if n == 0 {
            return Ok(Factored { lu: LU::new(a.clone()), condition: 1.0 });
        }
        let lu = LU::new(a.clone());
        let inv = lu.try_inverse().ok_or(SingularReport { condition: f64::INFINITY })?;
        let condition = one_norm(a) * one_norm(&inv);
        if !condition.is_finite() || condition > max_condition {
            return Err(SingularReport { condition });
        }
        Ok(Factored { lu, condition })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        if b.is_empty() {
            return b.clone();
        }
        self.lu.solve(b).expect("factorisation was checked to be invertible")
    }
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> std::result::Result<DVector<f64>, SingularReport> {
    solve_with(a, b, &LinalgConfig::default())
}

pub fn solve_with(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    cfg: &LinalgConfig,
) -> std::result::Result<DVector<f64>, SingularReport> {
    assert!(a.is_square() && a.nrows() == b.len(), "solve: dimensions disagree");
    Ok(Factored::new(a, cfg.max_condition)?.solve(b))
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs())).unwrap();
        if m[(p, k)] == 0.0 {
            return 0.0;
        }
        if p != k {
            m.swap_rows(p, k);
            det = -det;
        }
        let pivot = m[(k, k)];
        det *= pivot;
        for i in k + 1..n {
            let f = m[(i, k)] / pivot;
            for j in k + 1..n {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
    }
    det
}

/// Every principal minor, indexed by the bitmask of the retained rows/columns.
/// Entry 0 (the empty minor) is 1.
pub fn principal_minors(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    (0u64..1 << n)
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
            determinant(&sub)
        })
        .collect()
}

fn minor_tol(a: &DMatrix<f64>, k: usize, cfg: &LinalgConfig) -> f64 {
    cfg.minor_rel * inf_norm(a).max(1.0).powi(k as i32)
}

/// Reference P-matrix test: one pivoted elimination per principal minor.
pub fn is_p_matrix_brute(a: &DMatrix<f64>, cfg: &LinalgConfig) -> bool {
    let minors = principal_minors(a);
    minors.iter().enumerate().skip(1).all(|(mask, &det)| det > minor_tol(a, mask.count_ones() as usize, cfg))
}

pub fn is_p_matrix(a: &DMatrix<f64>) -> Result<bool> {
    is_p_matrix_with(a, &LinalgConfig::default())
}

/// Tests whether every principal minor of `a` is positive.
///
/// Subsets are visited depth-first in increasing index order. Each
/// extension `S -> S + {j}` multiplies the minor by the Schur complement
/// pivot `a_jj - a_jS A_SS^{-1} a_Sj`, with `A_SS^{-1}` updated by the
/// bordering formula, so a subset costs `O(|S|^2)` and the search stops at
/// the first non-positive minor.
pub fn is_p_matrix_with(a: &DMatrix<f64>, cfg: &LinalgConfig) -> Result<bool> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("P-matrix test needs a square matrix".into()));
    }
    if n > cfg.p_matrix_cap {
        return Err(Error::SizeCap { what: "P-matrix test", n, cap: cfg.p_matrix_cap });
    }
    let tols: Vec<f64> = (0..=n).map(|k| minor_tol(a, k, cfg)).collect();
    let mut frame = Frame { idx: Vec::with_capacity(n), inv: Vec::new(), det: 1.0 };
    Ok(extend_all(a, &mut frame, 0, &tols))
}

struct Frame {
    idx: Vec<usize>,
    /// Row-major inverse of the current principal submatrix.
    inv: Vec<f64>,
    det: f64,
}

fn extend_all(a: &DMatrix<f64>, frame: &mut Frame, start: usize, tols: &[f64]) -> bool {
    let n = a.nrows();
    for j in start..n {
        let k = frame.idx.len();
        // v = inv * a[S, j], w = a[j, S] * inv
        let mut v = vec![0.0; k];
        let mut w = vec![0.0; k];
        for r in 0..k {
            let mut sv = 0.0;
            let mut sw = 0.0;
            for c in 0..k {
                sv += frame.inv[r * k + c] * a[(frame.idx[c], j)];
                sw += a[(j, frame.idx[c])] * frame.inv[c * k + r];
            }
            v[r] = sv;
            w[r] = sw;
        }
        let pivot = a[(j, j)] - (0..k).map(|c| a[(j, frame.idx[c])] * v[c]).sum::<f64>();
        let det = frame.det * pivot;
        if !(det > tols[k + 1]) {
            return false;
        }
        let k1 = k + 1;
        let mut inv = vec![0.0; k1 * k1];
        for r in 0..k {
            for c in 0..k {
                inv[r * k1 + c] = frame.inv[r * k + c] + v[r] * w[c] / pivot;
            }
            inv[r * k1 + k] = -v[r] / pivot;
            inv[k * k1 + r] = -w[r] / pivot;
        }
        inv[k * k1 + k] = 1.0 / pivot;

        let saved_inv = std::mem::replace(&mut frame.inv, inv);
        let saved_det = frame.det;
        frame.idx.push(j);
        frame.det = det;
        let ok = extend_all(a, frame, j + 1, tols);
        frame.idx.pop();
        frame.inv = saved_inv;
        frame.det = saved_det;
        if !ok {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sorted(mut z: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        z
    }

    #[test]
    fn diagonal_spectrum() {
        let s = eigen(&DMatrix::from_diagonal(&DVector::from_column_slice(&[-1.0, -3.0]))).unwrap();
        assert_eq!(s.abscissa, -1.0);
        assert_eq!(sorted(s.eigenvalues), vec![Complex::new(-3.0, 0.0), Complex::new(-1.0, 0.0)]);
    }

    #[test]
    fn rotation_spectrum() {
        let s = eigen(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(s.abscissa, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.radius, 1.0, epsilon = 1e-12);
        let z = sorted(s.eigenvalues);
        assert_abs_diff_eq!(z[0].im.abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1].im.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_region_of_oscillating_pair_is_unstable() {
        // characteristic polynomial l^2 - 2l + 6: roots 1 +- i sqrt(5)
        let s = eigen(&DMatrix::from_row_slice(2, 2, &[3.0, -3.0, 3.0, -1.0])).unwrap();
        assert_abs_diff_eq!(s.abscissa, 1.0, epsilon = 1e-12);
        for z in &s.eigenvalues {
            assert_abs_diff_eq!(z.im.abs(), 5f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn eigen_rejects_oversize_and_nonfinite() {
        let cfg = LinalgConfig { eigen_cap: 3, ..Default::default() };
        assert!(matches!(eigen_with(&DMatrix::zeros(4, 4), &cfg), Err(Error::SizeCap { .. })));
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(eigen(&a).is_err());
    }

    #[test]
    fn identity_solve() {
        let b = DVector::from_column_slice(&[1.0, -2.0, 3.0]);
        assert_eq!(solve(&DMatrix::identity(3, 3), &b).unwrap(), b);
    }

    #[test]
    fn triangular_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.0, 1.0]);
        let x = solve(&a, &DVector::from_column_slice(&[1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_solve_reports() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = solve(&a, &DVector::from_column_slice(&[1.0, 2.0])).unwrap_err();
        assert!(r.condition > 1e12);
    }

    #[test]
    fn p_matrix_examples() {
        assert!(is_p_matrix(&DMatrix::identity(5, 5)).unwrap());
        assert!(!is_p_matrix(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap());
        let w = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, -2.0, 0.0]);
        assert!(!is_p_matrix(&(DMatrix::identity(2, 2) - w)).unwrap());
        let cfg = LinalgConfig { p_matrix_cap: 3, ..Default::default() };
        assert!(is_p_matrix_with(&DMatrix::identity(4, 4), &cfg).is_err());
    }

    fn leibniz(a: &DMatrix<f64>) -> f64 {
        // Cofactor expansion along the first row; independent of elimination.
        let n = a.nrows();
        if n == 0 {
            return 1.0;
        }
        (0..n)
            .map(|j| {
                let minor = a.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * leibniz(&minor)
            })
            .sum()
    }

    fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-3.0..3.0f64, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
    }

    fn any_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..=6).prop_flat_map(matrix)
    }

    // Diagonally dominant with positive diagonal: always a P-matrix, so the
    // fast path has to walk every subset.
    fn dominant_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        any_matrix().prop_map(|mut a| {
            let n = a.nrows();
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
                a[(i, i)] = off + 0.5 + a[(i, i)].abs();
            }
            a
        })
    }

    proptest! {
        #[test]
        fn p_matrix_matches_brute_force(a in any_matrix()) {
            let cfg = LinalgConfig::default();
            let fast = is_p_matrix_with(&a, &cfg).unwrap();
            prop_assert_eq!(fast, is_p_matrix_brute(&a, &cfg));
            let by_cofactors = (1u64..1 << a.nrows()).all(|mask| {
                let idx: Vec<usize> = (0..a.nrows()).filter(|&i| mask >> i & 1 == 1).collect();
                leibniz(&DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])) > minor_tol(&a, idx.len(), &cfg)
            });
            prop_assert_eq!(fast, by_cofactors);
        }

        #[test]
        fn dominant_matrices_are_p(a in dominant_matrix()) {
            prop_assert!(is_p_matrix(&a).unwrap());
            prop_assert!(is_p_matrix_brute(&a, &LinalgConfig::default()));
        }

        #[test]
        fn spectrum_is_permutation_invariant(a in any_matrix(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let n = a.nrows();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let pa = DMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])]);
            let x = sorted(eigen(&a).unwrap().eigenvalues);
            let y = sorted(eigen(&pa).unwrap().eigenvalues);
            // Match as multisets: greedy nearest pairing.
            let mut used = vec![false; n];
            for z in &x {
                let (k, d) = y.iter().enumerate().filter(|(k, _)| !used[*k])
                    .map(|(k, w)| (k, (z - w).norm())).min_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
                used[k] = true;
                prop_assert!(d < 1e-8 * (1.0 + inf_norm(&a)), "eigenvalue {} unmatched (distance {})", z, d);
            }
        }

        #[test]
        fn eigen_backward_error(a in any_matrix()) {
            // sigma_min(A - lambda I) bounds the residual of the best eigenvector.
            let n = a.nrows();
            let s = eigen(&a).unwrap();
            prop_assert_eq!(s.eigenvalues.len(), n);
            let ac = a.map(|v| Complex::new(v, 0.0));
            for z in &s.eigenvalues {
                let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * *z;
                let smin = shifted.singular_values().iter().copied().fold(f64::INFINITY, f64::min);
                prop_assert!(smin <= 1e-8 * inf_norm(&a).max(1e-300), "residual {} for {}", smin, z);
            }
        }

        #[test]
        fn triangular_spectrum_is_diagonal(a in any_matrix()) {
            let n = a.nrows();
            let t = DMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { 0.0 });
            let s = eigen(&t).unwrap();
            let mut got: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
            let mut want: Vec<f64> = (0..n).map(|i| t[(i, i)]).collect();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-10);
            }
        }

        #[test]
        fn solve_residual_bound(a in any_matrix(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let n = a.nrows();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if let Ok(x) = solve(&a, &b) {
                let r = (&a * &x - &b).amax();
                prop_assert!(r <= 1e-9 * (inf_norm(&a) * x.amax() + b.amax()));
            }
        }
    }
}
