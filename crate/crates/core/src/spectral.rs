//! Dense spectral kernels: cyclic Jacobi for symmetric matrices, power
//! iteration with deflation for the two largest-modulus eigenvalues of
//! non-symmetric ones, pivoted solves, the spectral norm, and the
//! resolvent-type transform `γ (L + γ I)⁻¹`.

use serde::{Deserialize, Serialize};

use crate::cones::positivity_class;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseOperator, Lu};

/// Default absolute tolerance on residuals.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Default relative tolerance on eigenvalues.
pub const EIGENVALUE_RTOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order; eigenvectors stored as the columns of an
/// orthogonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseOperator,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    /// `Q f(Λ) Qᵀ`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> DenseOperator {
        let q = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        q.scale_cols(&fl).matmul(&q.transpose())
    }

    /// `Σ_k f(k, λ_k) q_k q_kᵀ`, symmetrized.
    pub fn apply_function_indexed(&self, f: impl Fn(usize, f64) -> f64) -> DenseOperator {
        let q = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().enumerate().map(|(k, &l)| f(k, l)).collect();
        q.scale_cols(&fl).matmul(&q.transpose()).symmetrized()
    }

    pub fn reconstruct(&self) -> DenseOperator {
        self.apply_function(|l| l)
    }
}

/// Certified eigendata of a linear part.
///
/// `primary_value` is `λ_m` (m-form, smallest eigenvalue) or the spectral
/// radius (r-form); `gap_value` is `μ_m` or the largest remaining modulus.
/// `phi` has unit norm and `⟨phi_star, phi⟩ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTriple {
    pub primary_value: f64,
    pub gap_value: f64,
    pub phi: Vec<f64>,
    pub phi_star: Vec<f64>,
}

impl SpectralTriple {
    /// Scales `phi` to unit norm and `phi_star` to unit pairing.
    pub fn normalized(primary_value: f64, gap_value: f64, phi: &[f64], phi_star: &[f64]) -> Result<Self> {
        let phi = linalg::normalized(phi);
        let pairing = linalg::dot(phi_star, &phi);
        if !(pairing.abs() > 1e-300) || !pairing.is_finite() {
            return Err(Error::BadNormalization(pairing));
        }
        let phi_star = linalg::scaled(1.0 / pairing, phi_star);
        Ok(Self {
            primary_value,
            gap_value,
            phi,
            phi_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// `(‖S φ − ρ φ‖, ‖Sᵀ φ* − ρ φ*‖)`.
    pub fn residuals(&self, s: &DenseOperator) -> (f64, f64) {
        let r = linalg::add_scaled(&s.matvec(&self.phi), -self.primary_value, &self.phi);
        let l = linalg::add_scaled(&s.matvec_t(&self.phi_star), -self.primary_value, &self.phi_star);
        (linalg::norm2(&r), linalg::norm2(&l))
    }
}

/// Cyclic Jacobi eigensolver for symmetric input.
pub fn symmetric_eigendecompose(a: &DenseOperator, tol: f64) -> Result<EigenDecomposition> {
    let allowed = 1e-12 * a.max_abs();
    let defect = a.symmetry_defect();
    if defect > allowed {
        return Err(Error::NonSymmetricInput { defect, allowed });
    }
    let n = a.dim();
    let mut m = a.symmetrized();
    let mut v = DenseOperator::identity(n);
    let frob = m.frobenius_norm();
    let target = tol.clamp(f64::EPSILON, 1e-14) * frob;

    let off_norm = |m: &DenseOperator| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += m[(p, q)] * m[(p, q)];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&m);
        if off <= target || frob == 0.0 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "Jacobi sweeps".into(),
                iterations: sweeps,
                residual: off / frob,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Negligible next to both diagonal entries: drop it.
                if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                if apq == 0.0 {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[(k, p)];
                        let akq = m[(k, q)];
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        m[(k, p)] = new_kp;
                        m[(p, k)] = new_kp;
                        m[(k, q)] = new_kq;
                        m[(q, k)] = new_kq;
                    }
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = DenseOperator::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on a linear map given by `apply`, with Rayleigh-quotient
/// residual `‖Av − ρv‖` as the stopping metric.
pub fn power_iterate(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    tol_abs: f64,
    max_iter: usize,
) -> Result<PowerResult> {
    let mut v = linalg::normalized(start);
    let mut av = apply(&v);
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let rho = linalg::dot(&v, &av);
        residual = linalg::norm2(&linalg::add_scaled(&av, -rho, &v));
        if residual <= tol_abs {
            return Ok(PowerResult {
                value: rho,
                vector: v,
                residual,
                iterations: it,
            });
        }
        let nrm = linalg::norm2(&av);
        if nrm == 0.0 || !nrm.is_finite() {
            break;
        }
        v = linalg::scaled(1.0 / nrm, &av);
        av = apply(&v);
    }
    Err(Error::NoConvergence {
        what: "power iteration".into(),
        iterations: max_iter,
        residual,
    })
}

/// Perron root and positive unit eigenvector of a primitive nonnegative matrix.
pub fn dominant_eigenpair(a: &DenseOperator, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let class = positivity_class(a, 1e-12 * a.max_abs());
    if !class.preserving || class.primitive_exponent.is_none() {
        return Err(Error::NotPrimitive);
    }
    let norm = operator_norm(a);
    let start = vec![1.0; a.dim()];
    let res = power_iterate(|x| a.matvec(x), &start, tol * norm, max_iter)?;
    Ok((res.value, res.vector))
}

/// Largest-modulus eigenvalue left after deflating a known simple eigenpair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeflatedEigenvalue {
    /// Modulus of the dominant remaining eigenvalue.
    pub modulus: f64,
    /// Its signed value, when the remaining dominant eigenvalue is real and
    /// the iteration settled on it.
    pub value: Option<f64>,
}

/// Deflates the eigenpair `(rho, phi)` with left eigenvector `phi_star` and
/// estimates the largest remaining modulus by power iteration.
pub fn deflated_second(
    a: &DenseOperator,
    rho: f64,
    phi: &[f64],
    phi_star: &[f64],
) -> DeflatedEigenvalue {
    let n = a.dim();
    let pairing = linalg::dot(phi_star, phi);
    let psi = linalg::scaled(rho / pairing, phi_star);
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = a.matvec(x);
        linalg::axpy(-linalg::dot(&psi, x), phi, &mut y);
        y
    };
    let scale = operator_norm(a).max(rho.abs()).max(f64::MIN_POSITIVE);
    let mut x: Vec<f64> = (0..n).map(generic_start_entry).collect();
    // Strip the deflated direction so roundoff starts from a clean slate.
    let c = linalg::dot(phi_star, &x) / pairing;
    linalg::axpy(-c, phi, &mut x);
    if linalg::norm2(&x) == 0.0 {
        return DeflatedEigenvalue {
            modulus: 0.0,
            value: Some(0.0),
        };
    }
    x = linalg::normalized(&x);

    const MAX_ITER: usize = 20_000;
    let mut last = f64::NAN;
    let mut settled = 0;
    let mut estimate = DeflatedEigenvalue {
        modulus: 0.0,
        value: None,
    };
    for it in 0..MAX_ITER {
        let y = apply(&x);
        let ny = linalg::norm2(&y);
        if ny <= 1e-15 * scale {
            return DeflatedEigenvalue {
                modulus: 0.0,
                value: Some(0.0),
            };
        }
        let ray = linalg::dot(&x, &y);
        let res = linalg::norm2(&linalg::add_scaled(&y, -ray, &x));
        if res <= 1e-12 * scale && it > 2 {
            return DeflatedEigenvalue {
                modulus: ray.abs(),
                value: Some(ray),
            };
        }
        // Complex and ± pairs never settle the Rayleigh quotient; fit
        // A²x ≈ p Ax + q x instead and read the pair off z² − p z − q.
        if let Some(pair) = two_term_fit(&x, &y, &apply(&y)) {
            if (pair.modulus - last).abs() <= 1e-13 * scale {
                settled += 1;
                if settled >= 3 {
                    return pair;
                }
            } else {
                settled = 0;
            }
            last = pair.modulus;
            estimate = pair;
        }
        x = linalg::scaled(1.0 / ny, &y);
    }
    estimate
}

fn two_term_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<DeflatedEigenvalue> {
    let (yy, yx, xx) = (linalg::dot(y, y), linalg::dot(y, x), linalg::dot(x, x));
    let (wy, wx) = (linalg::dot(w, y), linalg::dot(w, x));
    let det = yy * xx - yx * yx;
    if det <= 1e-24 * yy * xx {
        return None;
    }
    let p = (wy * xx - wx * yx) / det;
    let q = (wx * yy - wy * yx) / det;
    let disc = p * p + 4.0 * q;
    Some(if disc < 0.0 {
        DeflatedEigenvalue {
            modulus: (-q).sqrt(),
            value: None,
        }
    } else {
        let (r1, r2) = ((p + disc.sqrt()) / 2.0, (p - disc.sqrt()) / 2.0);
        let (big, small) = if r1.abs() >= r2.abs() { (r1, r2) } else { (r2, r1) };
        DeflatedEigenvalue {
            modulus: big.abs(),
            value: (big.abs() - small.abs() > 1e-9 * big.abs()).then_some(big),
        }
    })
}

/// Deterministic, non-symmetric start vector entry.
pub(crate) fn generic_start_entry(i: usize) -> f64 {
    1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()
}

/// Solves `A x = rhs` by LU with partial pivoting.
pub fn linear_solve(a: &DenseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: rhs.len(),
        });
    }
    let lu = Lu::factor(a, 1e-14 * operator_norm(a))?;
    Ok(lu.solve(rhs))
}

/// `γ (L + γ I)⁻¹`: maps each eigenvalue `λ` of `L` to `γ / (λ + γ)`.
pub fn cayley_transform(l: &DenseOperator, gamma: f64) -> Result<DenseOperator> {
    let shifted = l.shift(gamma);
    let floor = 1e-12 * operator_norm(l).max(gamma.abs());
    let lu = Lu::factor(&shifted, floor).map_err(|_| Error::SingularShift { gamma })?;
    let t = lu.inverse().scale(gamma);
    if l.is_symmetric() {
        Ok(t.symmetrized())
    } else {
        Ok(t)
    }
}

/// Spectral norm `‖A‖₂ = √r(AᵀA)`.
pub fn operator_norm(a: &DenseOperator) -> f64 {
    if a.max_abs() == 0.0 {
        return 0.0;
    }
    let n = a.dim();
    let exact = || -> f64 {
        let ata = a.transpose().matmul(a).symmetrized();
        symmetric_eigendecompose(&ata, 1e-15)
            .map(|e| e.eigenvalues[n - 1].max(0.0).sqrt())
            .unwrap_or_else(|_| a.frobenius_norm())
    };
    if n <= 128 {
        return exact();
    }
    let start: Vec<f64> = (0..n).map(generic_start_entry).collect();
    let apply = |x: &[f64]| a.matvec_t(&a.matvec(x));
    let scale = a.frobenius_norm().powi(2);
    match power_iterate(apply, &start, 1e-10 * scale, 20_000) {
        Ok(res) => res.value.max(0.0).sqrt(),
        Err(_) => exact(),
    }
}

/// Smallest eigenvalue and unit eigenvector of a symmetric matrix.
///
/// Inverse iteration from a Gershgorin lower bound, optionally warm-started;
/// small matrices and stalled iterations fall back to a full decomposition.
pub fn lowest_eigenpair(m: &DenseOperator, start: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    let n = m.dim();
    let full = || -> Result<(f64, Vec<f64>)> {
        let eig = symmetric_eigendecompose(m, 1e-15)?;
        Ok((eig.eigenvalues[0], eig.vector(0)))
    };
    if n <= 12 {
        return full();
    }
    let gersh = (0..n)
        .map(|i| {
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            m[(i, i)] - r
        })
        .fold(f64::INFINITY, f64::min);
    let scale = m.inf_norm().max(1.0);
    let shift = gersh - 1e-3 * scale - 1.0;
    let lu = match Lu::factor(&m.shift(-shift), 1e-14 * scale) {
        Ok(lu) => lu,
        Err(_) => return full(),
    };
    let mut v = match start {
        Some(s) if linalg::norm2(s) > 0.0 => linalg::normalized(s),
        _ => linalg::normalized(&vec![1.0; n]),
    };
    for _ in 0..500 {
        let mv = m.matvec(&v);
        let ray = linalg::dot(&v, &mv);
        let res = linalg::norm2(&linalg::add_scaled(&mv, -ray, &v));
        if res <= 1e-13 * scale {
            return Ok((ray, v));
        }
        let y = lu.solve(&v);
        v = linalg::normalized(&y);
    }
    full()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> DenseOperator {
        let h = 1.0 / (n as f64 + 1.0);
        DenseOperator::from_fn(n, |i, j| {
            if i == j {
                2.0 / (h * h)
            } else if i.abs_diff(j) == 1 {
                -1.0 / (h * h)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn identity_decomposition() {
        let e = symmetric_eigendecompose(&DenseOperator::identity(3), 1e-12).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        let qtq = e.eigenvectors.transpose().matmul(&e.eigenvectors);
        assert!(qtq.sub(&DenseOperator::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn diagonal_sorted_with_coordinate_vectors() {
        let a = DenseOperator::from_diagonal(&[2.0, -1.0, 5.0]);
        let e = symmetric_eigendecompose(&a, 1e-12).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 2.0, 5.0]);
        assert_eq!(e.vector(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
        assert_eq!(e.vector(2).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn laplacian_three_points_closed_form() {
        // (4/h²) sin²(kπh/2), h = 1/4
        let e = symmetric_eigendecompose(&laplacian(3), 1e-12).unwrap();
        let s2 = 2f64.sqrt();
        let expected = [16.0 * (2.0 - s2), 32.0, 16.0 * (2.0 + s2)];
        for (got, want) in e.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_non_symmetric() {
        let a = DenseOperator::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            symmetric_eigendecompose(&a, 1e-12),
            Err(Error::NonSymmetricInput { .. })
        ));
    }

    #[test]
    fn dominant_pairs_of_small_positive_matrices() {
        let ones = DenseOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let (rho, v) = dominant_eigenpair(&ones, 1e-12, 1000).unwrap();
        assert!((rho - 2.0).abs() < 1e-12);
        let r = 0.5f64.sqrt();
        assert!(linalg::distance(&v, &[r, r]) < 1e-12);

        let a = DenseOperator::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (rho, v) = dominant_eigenpair(&a, 1e-12, 1000).unwrap();
        assert!((rho - 3.0).abs() < 1e-12);
        assert!(linalg::distance(&v, &[r, r]) < 1e-12);
    }

    #[test]
    fn dominant_pair_rejects_periodic_matrix() {
        let swap = DenseOperator::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(dominant_eigenpair(&swap, 1e-12, 100), Err(Error::NotPrimitive));
    }

    #[test]
    fn dominant_pair_of_transformed_laplacian() {
        // T = Γ₁(L - λ_m), eigenvector sin(jπ/4) = (√2/2, 1, √2/2)
        let l = laplacian(3);
        let lm = 16.0 * (2.0 - 2f64.sqrt());
        let t = cayley_transform(&l.shift(-lm), 1.0).unwrap();
        let (rho, v) = dominant_eigenpair(&t, 1e-12, 1000).unwrap();
        assert!((rho - 1.0).abs() < 1e-10);
        let want = linalg::normalized(&[0.5f64.sqrt(), 1.0, 0.5f64.sqrt()]);
        assert!(linalg::distance(&v, &want) < 1e-9);
    }

    #[test]
    fn linear_solve_examples() {
        let x = linear_solve(&DenseOperator::identity(2), &[3.0, -1.0]).unwrap();
        assert_eq!(x, vec![3.0, -1.0]);
        let x = linear_solve(&DenseOperator::from_diagonal(&[2.0, 4.0]), &[2.0, 2.0]).unwrap();
        assert!(linalg::distance(&x, &[1.0, 0.5]) < 1e-15);
        // inverse of tridiag(-1,2,-1) has first column (3,2,1)/4
        let a = laplacian(3).scale(1.0 / 16.0);
        let x = linear_solve(&a, &[1.0, 0.0, 0.0]).unwrap();
        assert!(linalg::distance(&x, &[0.75, 0.5, 0.25]) < 1e-14);
    }

    #[test]
    fn linear_solve_singular() {
        let a = DenseOperator::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(linear_solve(&a, &[1.0, 1.0]), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn cayley_examples() {
        let t = cayley_transform(&DenseOperator::from_diagonal(&[0.0, 3.0]), 1.0).unwrap();
        assert!(t.sub(&DenseOperator::from_diagonal(&[1.0, 0.25])).max_abs() < 1e-15);
        let t = cayley_transform(&DenseOperator::zeros(4), 2.5).unwrap();
        assert!(t.sub(&DenseOperator::identity(4)).max_abs() < 1e-15);
        assert!(matches!(
            cayley_transform(&DenseOperator::from_diagonal(&[1.0, 3.0]), -1.0),
            Err(Error::SingularShift { .. })
        ));
    }

    #[test]
    fn cayley_second_eigenvalue() {
        let l = laplacian(3);
        let lm = 16.0 * (2.0 - 2f64.sqrt());
        let t = cayley_transform(&l.shift(-lm), 1.0).unwrap();
        let e = symmetric_eigendecompose(&t, 1e-14).unwrap();
        assert!((e.eigenvalues[2] - 1.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 1.0 / (1.0 + 32.0 - lm)).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&DenseOperator::identity(3)) - 1.0).abs() < 1e-12);
        assert!((operator_norm(&DenseOperator::from_diagonal(&[3.0, -7.0])) - 7.0).abs() < 1e-12);
        let a = DenseOperator::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!((operator_norm(&a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_large_matches_jacobi() {
        let a = DenseOperator::from_fn(40, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let ata = a.transpose().matmul(&a);
        let e = symmetric_eigendecompose(&ata.symmetrized(), 1e-15).unwrap();
        let exact = e.eigenvalues[39].sqrt();
        assert!((operator_norm(&a) - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn lowest_eigenpair_matches_jacobi() {
        let l = laplacian(40).sub(&DenseOperator::from_diagonal(
            &(0..40).map(|i| 10.0 + (i as f64 * 0.3).sin()).collect::<Vec<_>>(),
        ));
        let (lam, v) = lowest_eigenpair(&l, None).unwrap();
        let e = symmetric_eigendecompose(&l, 1e-14).unwrap();
        assert!((lam - e.eigenvalues[0]).abs() < 1e-9 * e.eigenvalues[39].abs());
        let r = linalg::add_scaled(&l.matvec(&v), -lam, &v);
        assert!(linalg::norm2(&r) < 1e-8);
    }

    #[test]
    fn deflation_finds_second_eigenvalue() {
        let a = DenseOperator::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = 0.5f64.sqrt();
        let d = deflated_second(&a, 3.0, &[r, r], &[r, r]);
        assert!((d.modulus - 1.0).abs() < 1e-10);
        assert!((d.value.unwrap() - 1.0).abs() < 1e-10);

        let ones = DenseOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let d = deflated_second(&ones, 2.0, &[r, r], &[r, r]);
        assert!(d.modulus < 1e-12);
    }

    #[test]
    fn deflation_handles_rotation_block() {
        // eigenvalues 3 and ±i·1 on the complement: modulus 1
        let a = DenseOperator::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 0.0, -1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let d = deflated_second(&a, 3.0, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert!((d.modulus - 1.0).abs() < 1e-8, "{d:?}");
        assert!(d.value.is_none());
    }
}
