//! Positivity over the standard orthant: entrywise classification, Perron
//! eigenvalue certificates and the fine-perturbation test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseOperator};
use crate::spectral::{self, SpectralTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeCheckReport {
    /// Every entry is `≥ −pos_tol`.
    pub preserving: bool,
    /// Every entry is `> pos_tol`: nonzero cone points go to strictly positive ones.
    pub ergodic: bool,
    /// Smallest `k` with `Aᵏ` entrywise positive.
    pub primitive_exponent: Option<usize>,
}

/// Boolean matrix with rows packed into 64-bit words.
#[derive(Clone, PartialEq)]
struct Pattern {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Pattern {
    fn from_matrix(a: &DenseOperator, pos_tol: f64) -> Self {
        let n = a.dim();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] > pos_tol {
                    bits[i * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Self { n, words, bits }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    fn product(&self, other: &Self) -> Self {
        let (n, words) = (self.n, self.words);
        let mut bits = vec![0u64; n * words];
        for i in 0..n {
            let out = &mut bits[i * words..(i + 1) * words];
            for k in 0..n {
                if self.get(i, k) {
                    for (o, w) in out.iter_mut().zip(other.row(k)) {
                        *o |= w;
                    }
                }
            }
        }
        Self { n, words, bits }
    }

    fn all_set(&self) -> bool {
        let full_words = self.n / 64;
        let tail = self.n % 64;
        (0..self.n).all(|i| {
            let r = self.row(i);
            r[..full_words].iter().all(|&w| w == u64::MAX)
                && (tail == 0 || r[full_words] == (1u64 << tail) - 1)
        })
    }
}

/// Smallest `k ≤ (n−1)² + 1` (Wielandt's bound) with a positive power pattern.
fn primitive_exponent(p: &Pattern) -> Option<usize> {
    let bound = (p.n - 1) * (p.n - 1) + 1;
    // powers[j] = P^(2^j)
    let mut powers = vec![p.clone()];
    while !powers.last().unwrap().all_set() {
        if 1usize << (powers.len() - 1) >= bound {
            return None;
        }
        let last = powers.last().unwrap();
        powers.push(last.product(last));
    }
    // Positivity of P^k persists for larger k, so build the largest
    // non-positive exponent bit by bit.
    let mut acc: Option<Pattern> = None;
    let mut k = 0usize;
    for j in (0..powers.len()).rev() {
        let trial = match &acc {
            None => powers[j].clone(),
            Some(q) => q.product(&powers[j]),
        };
        if !trial.all_set() {
            acc = Some(trial);
            k += 1 << j;
        }
    }
    Some(k + 1)
}

pub fn positivity_class(a: &DenseOperator, pos_tol: f64) -> ConeCheckReport {
    let preserving = a.as_slice().iter().all(|&x| x >= -pos_tol);
    let ergodic = preserving && a.as_slice().iter().all(|&x| x > pos_tol);
    let primitive_exponent = if ergodic {
        Some(1)
    } else if preserving {
        primitive_exponent(&Pattern::from_matrix(a, pos_tol))
    } else {
        None
    };
    ConeCheckReport {
        preserving,
        ergodic,
        primitive_exponent,
    }
}

/// Default entrywise strictness threshold for `a`.
pub fn default_pos_tol(a: &DenseOperator) -> f64 {
    1e-12 * a.max_abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicEigenvalueCertificate {
    pub triple: SpectralTriple,
    /// `r − |second modulus|`.
    pub gap_margin: f64,
    /// `⟨φ*, φ⟩` for unit right and left eigenvectors.
    pub simplicity_witness: f64,
    /// Signed second eigenvalue, when real.
    pub second_value: Option<f64>,
}

/// Certifies the spectral radius of a primitive nonnegative matrix as a
/// basic eigenvalue: positive left and right eigenvectors, a strict modulus
/// gap, and a nonzero dual pairing.
pub fn certify_basic_eigenvalue(s: &DenseOperator, tol: f64) -> Result<BasicEigenvalueCertificate> {
    let class = positivity_class(s, default_pos_tol(s));
    if !class.preserving || !(class.ergodic || class.primitive_exponent.is_some()) {
        return Err(Error::NotErgodic);
    }
    let n = s.dim();
    let (rho, phi, phi_star, second) = if s.is_symmetric() {
        let eig = spectral::symmetric_eigendecompose(s, 1e-15)?;
        let rho = eig.eigenvalues[n - 1];
        let mut phi = eig.vector(n - 1);
        if phi.iter().sum::<f64>() < 0.0 {
            phi = linalg::scaled(-1.0, &phi);
        }
        let second = if n == 1 {
            (0.0, Some(0.0))
        } else {
            let lo = eig.eigenvalues[0];
            let hi = eig.eigenvalues[n - 2];
            if lo.abs() > hi.abs() {
                (lo.abs(), Some(lo))
            } else {
                (hi.abs(), Some(hi))
            }
        };
        (rho, phi.clone(), phi, second)
    } else {
        let (rho, phi) = spectral::dominant_eigenpair(s, 1e-13, 200_000)?;
        let (rho_t, phi_star) = spectral::dominant_eigenpair(&s.transpose(), 1e-13, 200_000)?;
        if (rho - rho_t).abs() > 1e-8 * rho.abs().max(1.0) {
            return Err(Error::CertificationFailed(format!(
                "left and right Perron roots differ: {rho} vs {rho_t}"
            )));
        }
        let d = spectral::deflated_second(s, rho, &phi, &phi_star);
        (rho, phi, phi_star, (d.modulus, d.value))
    };

    let min_entry = linalg::min_entry(&phi).min(linalg::min_entry(&phi_star));
    if min_entry <= 0.0 {
        return Err(Error::NonPositiveEigenvector { min_entry });
    }
    let gap_margin = rho - second.0;
    if gap_margin <= tol {
        return Err(Error::GapTooSmall { gap: gap_margin, tol });
    }
    let witness = linalg::dot(&linalg::normalized(&phi_star), &linalg::normalized(&phi));
    if witness.abs() <= tol {
        return Err(Error::DegenerateWitness { witness });
    }
    let triple = SpectralTriple::normalized(rho, second.0, &phi, &phi_star)?;
    Ok(BasicEigenvalueCertificate {
        triple,
        gap_margin,
        simplicity_witness: witness,
        second_value: second.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinePerturbationCertificate {
    pub norm_bound: f64,
    pub b: f64,
    /// Smallest `p ≥ 0` with `A + pI` entrywise nonnegative; absent when a
    /// negative off-diagonal entry makes every shift fail.
    pub p_min: Option<f64>,
    pub symmetric: bool,
    pub member: bool,
}

pub fn certify_fine_perturbation(a: &DenseOperator, mu_m: f64, b: f64) -> FinePerturbationCertificate {
    let n = a.dim();
    let tol = default_pos_tol(a);
    let off_diagonal_ok = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= -tol));
    let p_min = off_diagonal_ok.then(|| {
        let d = a.diagonal().into_iter().fold(f64::INFINITY, f64::min);
        (-d).max(0.0)
    });
    let norm_bound = spectral::operator_norm(a);
    let symmetric = a.is_symmetric();
    let member = symmetric && norm_bound <= b * (1.0 + 1e-12) && b < mu_m && p_min.is_some();
    FinePerturbationCertificate {
        norm_bound,
        b,
        p_min,
        symmetric,
        member,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseOperator {
        DenseOperator::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn classification_examples() {
        let id = positivity_class(&DenseOperator::identity(3), 0.0);
        assert!(id.preserving && !id.ergodic);
        assert_eq!(id.primitive_exponent, None);

        let ones = positivity_class(&DenseOperator::from_fn(3, |_, _| 1.0), 0.0);
        assert!(ones.preserving && ones.ergodic);
        assert_eq!(ones.primitive_exponent, Some(1));

        let swap = positivity_class(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), 0.0);
        assert!(swap.preserving && !swap.ergodic);
        assert_eq!(swap.primitive_exponent, None);

        let neg = positivity_class(&m(&[&[1.0, -1.0], &[1.0, 1.0]]), 0.0);
        assert!(!neg.preserving && !neg.ergodic);
    }

    #[test]
    fn primitive_exponent_of_wielandt_matrix() {
        // cycle 0→1→…→n−1→0 plus the chord n−1→1 reaches the bound (n−1)²+1
        for n in [2usize, 3, 5, 8, 70] {
            let a = DenseOperator::from_fn(n, |i, j| {
                let edge = j == (i + 1) % n || (i == n - 1 && j == 1);
                if edge { 1.0 } else { 0.0 }
            });
            let want = (n - 1) * (n - 1) + 1;
            assert_eq!(positivity_class(&a, 0.0).primitive_exponent, Some(want), "n = {n}");
        }
    }

    #[test]
    fn primitive_exponent_of_path_with_loop() {
        // tridiagonal with positive diagonal: exponent n−1
        let a = DenseOperator::from_fn(6, |i, j| if i.abs_diff(j) <= 1 { 1.0 } else { 0.0 });
        assert_eq!(positivity_class(&a, 0.0).primitive_exponent, Some(5));
    }

    #[test]
    fn certify_examples() {
        let c = certify_basic_eigenvalue(&m(&[&[2.0, 1.0], &[1.0, 2.0]]), 1e-10).unwrap();
        assert!((c.triple.primary_value - 3.0).abs() < 1e-12);
        assert!((c.gap_margin - 2.0).abs() < 1e-12);
        let r = 0.5f64.sqrt();
        assert!(linalg::distance(&c.triple.phi, &[r, r]) < 1e-12);
        assert!(linalg::distance(&c.triple.phi_star, &[r, r]) < 1e-12);

        let c = certify_basic_eigenvalue(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), 1e-10).unwrap();
        assert!((c.triple.primary_value - 2.0).abs() < 1e-12);
        assert!((c.gap_margin - 2.0).abs() < 1e-12);
    }

    #[test]
    fn certify_rejects_reducible_and_periodic() {
        assert_eq!(
            certify_basic_eigenvalue(&DenseOperator::identity(2), 1e-10),
            Err(Error::NotErgodic)
        );
        assert_eq!(
            certify_basic_eigenvalue(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-10),
            Err(Error::NotErgodic)
        );
    }

    #[test]
    fn certify_non_symmetric() {
        // eigenvalues 4 and 1; right φ ∝ (1,1), left φ* ∝ (1,2)
        let a = m(&[&[2.0, 2.0], &[1.0, 3.0]]);
        let c = certify_basic_eigenvalue(&a, 1e-10).unwrap();
        assert!((c.triple.primary_value - 4.0).abs() < 1e-10);
        assert!((c.gap_margin - 3.0).abs() < 1e-8);
        let (r, l) = c.triple.residuals(&a);
        assert!(r < 1e-10 && l < 1e-10);
        assert!((linalg::dot(&c.triple.phi_star, &c.triple.phi) - 1.0).abs() < 1e-12);
        assert!((c.triple.phi_star[1] / c.triple.phi_star[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fine_perturbation_examples() {
        let c = certify_fine_perturbation(&DenseOperator::zeros(2), 5.0, 1.0);
        assert!(c.member);
        assert_eq!(c.p_min, Some(0.0));

        let c = certify_fine_perturbation(&DenseOperator::from_diagonal(&[-2.0, 3.0]), 5.0, 4.0);
        assert!(c.member);
        assert_eq!(c.p_min, Some(2.0));
        assert!((c.norm_bound - 3.0).abs() < 1e-12);

        let c = certify_fine_perturbation(&DenseOperator::from_diagonal(&[-2.0, 3.0]), 5.0, 2.0);
        assert!(!c.member);

        let c = certify_fine_perturbation(&m(&[&[1.0, -0.5], &[-0.5, 1.0]]), 5.0, 4.0);
        assert_eq!(c.p_min, None);
        assert!(!c.member);

        let c = certify_fine_perturbation(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), 5.0, 4.0);
        assert!(!c.symmetric && !c.member);
    }
}
