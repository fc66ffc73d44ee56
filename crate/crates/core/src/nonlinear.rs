//! Nonlinear parts `P` with closed-form Jacobians and exact two-point
//! linearizations `P(u) − P(v) = G(u, v)(u − v)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseOperator};
use crate::spectral;

/// `f(t) = m t + c (√(t² + κ²) − κ)` with `m = (a+b)/2`, `c = (b−a)/2`:
/// smooth, strictly convex, `f(0) = 0`, and `f′` sweeps `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexProfile {
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
}

pub fn make_convex_profile(a: f64, b: f64, kappa: f64) -> Result<ConvexProfile> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::BadSlopes { a, b });
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::BadCurvature(kappa));
    }
    Ok(ConvexProfile { a, b, kappa })
}

impl ConvexProfile {
    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    fn root(&self, t: f64) -> f64 {
        t.hypot(self.kappa)
    }

    pub fn value(&self, t: f64) -> f64 {
        // √(t²+κ²) − κ = t² / (√(t²+κ²) + κ), without cancellation
        self.mid() * t + self.half_width() * t * t / (self.root(t) + self.kappa)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.mid() + self.half_width() * t / self.root(t)
    }

    /// Newton quotient `(f(r) − f(s)) / (r − s)`, continuous across `r = s`.
    pub fn quotient(&self, r: f64, s: f64) -> f64 {
        self.mid() + self.half_width() * (r + s) / (self.root(r) + self.root(s))
    }

    /// The profile seen by the transformed problem `y − P(Ty)`: slopes
    /// `1 + (a − λ_m)/γ` and `1 + (b − λ_m)/γ`, same curvature scale.
    pub fn to_r_form(&self, lambda_m: f64, gamma: f64) -> Result<ConvexProfile> {
        make_convex_profile(
            1.0 + (self.a - lambda_m) / gamma,
            1.0 + (self.b - lambda_m) / gamma,
            self.kappa,
        )
    }
}

/// `q(r, s)` for `h(t) = t sin t`, stable as `r → s`.
fn sine_height_quotient(r: f64, s: f64) -> f64 {
    let half = 0.5 * (r - s);
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    r.sin() + s * (0.5 * (r + s)).cos() * sinc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearMap {
    /// `u ↦ f(u)` componentwise.
    Nemitskii { profile: ConvexProfile, dim: usize },
    /// `u ↦ Aᵀ (g ⊙ f(A u))`.
    Nonlocal {
        matrix: DenseOperator,
        weight: Vec<f64>,
        profile: ConvexProfile,
    },
    /// `u ↦ λ u − (t sin t) φ` with `t = ⟨φ*, u⟩`.
    VerticalSine {
        phi: Vec<f64>,
        phi_star: Vec<f64>,
        lambda_m: f64,
    },
    /// `u ↦ M u`.
    Linear { matrix: DenseOperator },
}

pub fn nemitskii(profile: ConvexProfile, dim: usize) -> Result<NonlinearMap> {
    if dim == 0 {
        return Err(Error::InvalidOperator("dimension must be >= 1".into()));
    }
    Ok(NonlinearMap::Nemitskii { profile, dim })
}

pub fn nonlocal_map(a: &DenseOperator, g: &[f64], profile: ConvexProfile) -> Result<NonlinearMap> {
    if g.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: g.len(),
        });
    }
    if a.min_entry() < 0.0 {
        return Err(Error::NotPositivelyStable(format!("negative entry {}", a.min_entry())));
    }
    if let Some(i) = (0..a.dim()).find(|&i| a.row(i).iter().all(|&x| x == 0.0)) {
        return Err(Error::NotPositivelyStable(format!("row {i} is zero")));
    }
    if g.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::NonPositiveWeight);
    }
    Ok(NonlinearMap::Nonlocal {
        matrix: a.clone(),
        weight: g.to_vec(),
        profile,
    })
}

pub fn vertical_sine_map(phi: &[f64], phi_star: &[f64], lambda_m: f64) -> Result<NonlinearMap> {
    if phi.len() != phi_star.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            got: phi_star.len(),
        });
    }
    let pairing = linalg::dot(phi_star, phi);
    if (pairing - 1.0).abs() > 1e-10 {
        return Err(Error::BadNormalization(pairing));
    }
    Ok(NonlinearMap::VerticalSine {
        phi: phi.to_vec(),
        phi_star: phi_star.to_vec(),
        lambda_m,
    })
}

pub fn linear_map(matrix: &DenseOperator) -> NonlinearMap {
    NonlinearMap::Linear { matrix: matrix.clone() }
}

pub fn linearize(p: &NonlinearMap, u: &[f64], v: &[f64]) -> DenseOperator {
    p.linearize(u, v)
}

impl NonlinearMap {
    pub fn dim(&self) -> usize {
        match self {
            NonlinearMap::Nemitskii { dim, .. } => *dim,
            NonlinearMap::Nonlocal { matrix, .. } | NonlinearMap::Linear { matrix } => matrix.dim(),
            NonlinearMap::VerticalSine { phi, .. } => phi.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NonlinearMap::Nemitskii { .. } => "nemitskii",
            NonlinearMap::Nonlocal { .. } => "nonlocal",
            NonlinearMap::VerticalSine { .. } => "vertical_sine",
            NonlinearMap::Linear { .. } => "linear",
        }
    }

    pub fn profile(&self) -> Option<&ConvexProfile> {
        match self {
            NonlinearMap::Nemitskii { profile, .. } | NonlinearMap::Nonlocal { profile, .. } => Some(profile),
            _ => None,
        }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        match self {
            NonlinearMap::Nemitskii { profile, .. } => u.iter().map(|&x| profile.value(x)).collect(),
            NonlinearMap::Nonlocal { matrix, weight, profile } => {
                let au = matrix.matvec(u);
                let inner: Vec<f64> = au.iter().zip(weight).map(|(&x, &g)| g * profile.value(x)).collect();
                matrix.matvec_t(&inner)
            }
            NonlinearMap::VerticalSine { phi, phi_star, lambda_m } => {
                let t = linalg::dot(phi_star, u);
                let mut out = linalg::scaled(*lambda_m, u);
                linalg::axpy(-t * t.sin(), phi, &mut out);
                out
            }
            NonlinearMap::Linear { matrix } => matrix.matvec(u),
        }
    }

    pub fn jacobian(&self, u: &[f64]) -> DenseOperator {
        match self {
            NonlinearMap::Nemitskii { profile, .. } => {
                DenseOperator::from_diagonal(&u.iter().map(|&x| profile.derivative(x)).collect::<Vec<_>>())
            }
            NonlinearMap::Nonlocal { matrix, weight, profile } => {
                let d: Vec<f64> = matrix
                    .matvec(u)
                    .iter()
                    .zip(weight)
                    .map(|(&x, &g)| g * profile.derivative(x))
                    .collect();
                sandwich(matrix, &d)
            }
            NonlinearMap::VerticalSine { phi, phi_star, lambda_m } => {
                let t = linalg::dot(phi_star, u);
                rank_one_update(*lambda_m, -(t.sin() + t * t.cos()), phi, phi_star)
            }
            NonlinearMap::Linear { matrix } => matrix.clone(),
        }
    }

    /// `G(u, v)` with `P(u) − P(v) = G(u, v)(u − v)` and `G(u, u) = J(u)`.
    pub fn linearize(&self, u: &[f64], v: &[f64]) -> DenseOperator {
        match self {
            NonlinearMap::Nemitskii { profile, .. } => DenseOperator::from_diagonal(
                &u.iter().zip(v).map(|(&r, &s)| profile.quotient(r, s)).collect::<Vec<_>>(),
            ),
            NonlinearMap::Nonlocal { matrix, weight, profile } => {
                let (au, av) = (matrix.matvec(u), matrix.matvec(v));
                let d: Vec<f64> = au
                    .iter()
                    .zip(&av)
                    .zip(weight)
                    .map(|((&r, &s), &g)| g * profile.quotient(r, s))
                    .collect();
                sandwich(matrix, &d)
            }
            NonlinearMap::VerticalSine { phi, phi_star, lambda_m } => {
                let (r, s) = (linalg::dot(phi_star, u), linalg::dot(phi_star, v));
                rank_one_update(*lambda_m, -sine_height_quotient(r, s), phi, phi_star)
            }
            NonlinearMap::Linear { matrix } => matrix.clone(),
        }
    }

    /// Interval `[lo, hi]` containing the spectrum of every symmetric
    /// linearization, or `None` for kinds whose linearizations are not
    /// symmetric.
    pub fn linearization_bounds(&self) -> Option<(f64, f64)> {
        match self {
            NonlinearMap::Nemitskii { profile, .. } => Some((profile.a, profile.b)),
            NonlinearMap::Nonlocal { matrix, weight, profile } => {
                let gmin = weight.iter().copied().fold(f64::INFINITY, f64::min);
                let gmax = weight.iter().copied().fold(0.0, f64::max);
                let d_lo = (gmin * profile.a).min(gmax * profile.a);
                let d_hi = (gmin * profile.b).max(gmax * profile.b);
                let ata = matrix.transpose().matmul(matrix).symmetrized();
                let eig = spectral::symmetric_eigendecompose(&ata, 1e-15).ok()?;
                let smin = eig.eigenvalues[0].max(0.0);
                let smax = eig.eigenvalues[eig.dim() - 1];
                let lo = if d_lo >= 0.0 { d_lo * smin } else { d_lo * smax };
                let hi = if d_hi >= 0.0 { d_hi * smax } else { d_hi * smin };
                Some((lo, hi))
            }
            NonlinearMap::VerticalSine { .. } => None,
            NonlinearMap::Linear { matrix } => {
                if !matrix.is_symmetric() {
                    return None;
                }
                let eig = spectral::symmetric_eigendecompose(matrix, 1e-15).ok()?;
                Some((eig.eigenvalues[0], eig.eigenvalues[eig.dim() - 1]))
            }
        }
    }
}

/// `Aᵀ diag(d) A`, symmetrized.
fn sandwich(a: &DenseOperator, d: &[f64]) -> DenseOperator {
    a.transpose().matmul(&a.scale_rows(d)).symmetrized()
}

/// `λ I + c φ φ*ᵀ`.
fn rank_one_update(lambda: f64, c: f64, phi: &[f64], phi_star: &[f64]) -> DenseOperator {
    DenseOperator::outer(phi, phi_star).scale(c).shift(lambda)
}
