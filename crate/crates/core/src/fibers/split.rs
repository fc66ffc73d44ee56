use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseOperator};
use crate::spectral::SpectralTriple;

/// `H = W ⊕ ⟨φ⟩` with `W = ker φ*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpace {
    pub phi: Vec<f64>,
    pub phi_star: Vec<f64>,
}

pub fn build_split(triple: &SpectralTriple) -> Result<SplitSpace> {
    SplitSpace::new(&triple.phi, &triple.phi_star)
}

impl SplitSpace {
    /// Rescales `phi_star` so that `⟨φ*, φ⟩ = 1`.
    pub fn new(phi: &[f64], phi_star: &[f64]) -> Result<Self> {
        if phi.len() != phi_star.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.len(),
                got: phi_star.len(),
            });
        }
        let pairing = linalg::dot(phi_star, phi);
        if !(pairing > 1e-12) {
            return Err(Error::BadNormalization(pairing));
        }
        Ok(Self {
            phi: phi.to_vec(),
            phi_star: linalg::scaled(1.0 / pairing, phi_star),
        })
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn height(&self, u: &[f64]) -> f64 {
        linalg::dot(&self.phi_star, u)
    }

    pub fn project_w(&self, u: &[f64]) -> Vec<f64> {
        linalg::add_scaled(u, -self.height(u), &self.phi)
    }

    /// `w + t φ`.
    pub fn compose(&self, w: &[f64], t: f64) -> Vec<f64> {
        linalg::add_scaled(w, t, &self.phi)
    }

    /// `I − φ φ*ᵀ`.
    pub fn projector(&self) -> DenseOperator {
        DenseOperator::identity(self.dim()).sub(&DenseOperator::outer(&self.phi, &self.phi_star))
    }

    /// `Π_W A + φ φ*ᵀ`: invertible exactly when `Π_W A` is invertible on `W`
    /// along `⟨φ⟩`, and its solutions of `M δ = r` with `r ∈ W` lie in `W`.
    pub fn bordered(&self, a: &DenseOperator) -> DenseOperator {
        let n = self.dim();
        let phi_t_a = a.matvec_t(&self.phi_star);
        DenseOperator::from_fn(n, |i, j| {
            a[(i, j)] - self.phi[i] * phi_t_a[j] + self.phi[i] * self.phi_star[j]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_split() {
        let s = SplitSpace::new(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.project_w(&[3.0, 4.0, 5.0]), vec![0.0, 4.0, 5.0]);
        assert_eq!(s.project_w(&s.phi), vec![0.0; 3]);
        assert_eq!(s.height(&linalg::scaled(3.0, &s.phi)), 3.0);
    }

    #[test]
    fn dirichlet_split() {
        let phi = linalg::normalized(&[0.5f64.sqrt(), 1.0, 0.5f64.sqrt()]);
        let s = SplitSpace::new(&phi, &phi).unwrap();
        let w = s.project_w(&[1.0, 0.0, 0.0]);
        assert!(linalg::dot(&w, &phi).abs() < 1e-12);
        let ww = s.project_w(&w);
        assert!(linalg::distance(&w, &ww) < 1e-12);
    }

    #[test]
    fn oblique_split_and_bordered_matrix() {
        let s = SplitSpace::new(&[0.6, 0.8], &[1.0, 2.0]).unwrap();
        assert!((s.height(&s.phi) - 1.0).abs() < 1e-15);
        let p = s.projector();
        assert!(p.matmul(&p).sub(&p).max_abs() < 1e-12);
        let a = DenseOperator::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]).unwrap();
        let direct = p.matmul(&a).add(&DenseOperator::outer(&s.phi, &s.phi_star));
        assert!(s.bordered(&a).sub(&direct).max_abs() < 1e-14);
        assert_eq!(SplitSpace::new(&[1.0, 0.0], &[0.0, 1.0]), Err(Error::BadNormalization(0.0)));
    }
}
