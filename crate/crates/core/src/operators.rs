//! Finite-difference model operators with certified ground states, and the
//! passage from `L`-form to `T = γ (L − λ_m + γ)⁻¹`.

use serde::{Deserialize, Serialize};

use crate::cones::certify_basic_eigenvalue;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseOperator, Lu};
use crate::spectral::{self, SpectralTriple};

/// Pointwise coefficient: a constant or one sample per interior node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Coefficient {
    fn at(&self, i: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Samples(v) => v[i],
        }
    }

    fn check(&self, name: &str, n: usize) -> Result<()> {
        match self {
            Coefficient::Constant(c) if !c.is_finite() => Err(Error::SpecInvalid(format!("{name} is not finite"))),
            Coefficient::Samples(v) if v.len() != n => Err(Error::SpecInvalid(format!(
                "{name} has {} samples, grid has {n} interior nodes",
                v.len()
            ))),
            Coefficient::Samples(v) if v.iter().any(|x| !x.is_finite()) => {
                Err(Error::SpecInvalid(format!("{name} has non-finite samples")))
            }
            _ => Ok(()),
        }
    }
}

fn zero() -> Coefficient {
    Coefficient::Constant(0.0)
}

fn one() -> Coefficient {
    Coefficient::Constant(1.0)
}

fn unit_upper() -> f64 {
    1.0
}

fn oscillator_extent() -> f64 {
    8.0
}

/// Description of a model operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `−u″ + V u` on `(x_min, x_max)`, `n` interior nodes, Dirichlet ends.
    #[serde(rename = "dirichlet_laplacian_1d")]
    DirichletLaplacian1d {
        n: usize,
        #[serde(default)]
        x_min: f64,
        #[serde(default = "unit_upper")]
        x_max: f64,
        #[serde(default = "zero")]
        potential: Coefficient,
    },
    /// `−Δu` on a rectangle, `nx × ny` interior nodes, row-major in x.
    #[serde(rename = "dirichlet_laplacian_2d")]
    DirichletLaplacian2d {
        nx: usize,
        ny: usize,
        #[serde(default = "unit_upper")]
        x_extent: f64,
        #[serde(default = "unit_upper")]
        y_extent: f64,
    },
    /// Cell-centred `−u″` with reflecting ends.
    #[serde(rename = "neumann_laplacian_1d")]
    NeumannLaplacian1d {
        n: usize,
        #[serde(default)]
        x_min: f64,
        #[serde(default = "unit_upper")]
        x_max: f64,
    },
    #[serde(rename = "periodic_laplacian_1d")]
    PeriodicLaplacian1d {
        n: usize,
        #[serde(default)]
        x_min: f64,
        #[serde(default = "unit_upper")]
        x_max: f64,
    },
    /// `−u″ + x² u` on `[−x_max, x_max]` with Dirichlet ends.
    HarmonicOscillator {
        n: usize,
        #[serde(default = "oscillator_extent")]
        x_max: f64,
    },
    /// `−a u″ − B u′ − q u` with centred differences and Dirichlet ends.
    #[serde(rename = "nondivergence_1d")]
    Nondivergence1d {
        n: usize,
        #[serde(default)]
        x_min: f64,
        #[serde(default = "unit_upper")]
        x_max: f64,
        #[serde(default = "one")]
        diffusion: Coefficient,
        #[serde(default = "zero")]
        drift: Coefficient,
        #[serde(default = "zero")]
        potential: Coefficient,
    },
    /// `[[L, −αI], [−αI, L]]` over a base operator.
    CoupledSystem { base: Box<ProblemSpec>, alpha: f64 },
    /// `L^s` computed in the eigenbasis of a symmetric positive base.
    FractionalPower { base: Box<ProblemSpec>, s: f64 },
    /// A caller-supplied matrix.
    Explicit { matrix: DenseOperator },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOperator {
    pub l: DenseOperator,
    pub triple: SpectralTriple,
    pub spec: ProblemSpec,
    pub self_adjoint: bool,
}

impl ModelOperator {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn lambda_m(&self) -> f64 {
        self.triple.primary_value
    }

    pub fn mu_m(&self) -> f64 {
        self.triple.gap_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RFormProblem {
    pub t: DenseOperator,
    pub triple: SpectralTriple,
    /// The `λ_m` subtracted before transforming.
    pub shift: f64,
    pub gamma: f64,
    /// Whether the source operator was symmetric.
    pub self_adjoint: bool,
}

fn check_grid(n: usize, lo: f64, hi: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::SpecInvalid(format!("grid size must be >= 2 (got {n})")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::SpecInvalid(format!("empty domain ({lo}, {hi})")));
    }
    Ok(())
}

fn tridiagonal(n: usize, diag: impl Fn(usize) -> f64, lower: impl Fn(usize) -> f64, upper: impl Fn(usize) -> f64) -> DenseOperator {
    DenseOperator::from_fn(n, |i, j| {
        if i == j {
            diag(i)
        } else if j + 1 == i {
            lower(i)
        } else if i + 1 == j {
            upper(i)
        } else {
            0.0
        }
    })
}

/// Assembled matrix, before certification.
pub fn assemble(spec: &ProblemSpec) -> Result<DenseOperator> {
    match spec {
        ProblemSpec::DirichletLaplacian1d { n, x_min, x_max, potential } => {
            check_grid(*n, *x_min, *x_max)?;
            potential.check("potential", *n)?;
            let h = (x_max - x_min) / (*n as f64 + 1.0);
            let k = 1.0 / (h * h);
            Ok(tridiagonal(*n, |i| 2.0 * k + potential.at(i), |_| -k, |_| -k))
        }
        ProblemSpec::DirichletLaplacian2d { nx, ny, x_extent, y_extent } => {
            check_grid(*nx, 0.0, *x_extent)?;
            check_grid(*ny, 0.0, *y_extent)?;
            let kx = ((*nx as f64 + 1.0) / x_extent).powi(2);
            let ky = ((*ny as f64 + 1.0) / y_extent).powi(2);
            let (nx, ny) = (*nx, *ny);
            Ok(DenseOperator::from_fn(nx * ny, |p, q| {
                let (iy, ix) = (p / nx, p % nx);
                let (jy, jx) = (q / nx, q % nx);
                if p == q {
                    2.0 * kx + 2.0 * ky
                } else if iy == jy && ix.abs_diff(jx) == 1 {
                    -kx
                } else if ix == jx && iy.abs_diff(jy) == 1 {
                    -ky
                } else {
                    0.0
                }
            }))
        }
        ProblemSpec::NeumannLaplacian1d { n, x_min, x_max } => {
            check_grid(*n, *x_min, *x_max)?;
            let h = (x_max - x_min) / *n as f64;
            let k = 1.0 / (h * h);
            let n = *n;
            Ok(tridiagonal(n, |i| if i == 0 || i == n - 1 { k } else { 2.0 * k }, |_| -k, |_| -k))
        }
        ProblemSpec::PeriodicLaplacian1d { n, x_min, x_max } => {
            check_grid(*n, *x_min, *x_max)?;
            let h = (x_max - x_min) / *n as f64;
            let k = 1.0 / (h * h);
            let n = *n;
            if n == 2 {
                return DenseOperator::from_rows(&[vec![2.0 * k, -2.0 * k], vec![-2.0 * k, 2.0 * k]]);
            }
            Ok(DenseOperator::from_fn(n, |i, j| {
                if i == j {
                    2.0 * k
                } else if (i + 1) % n == j || (j + 1) % n == i {
                    -k
                } else {
                    0.0
                }
            }))
        }
        ProblemSpec::HarmonicOscillator { n, x_max } => {
            check_grid(*n, -x_max, *x_max)?;
            let h = 2.0 * x_max / (*n as f64 + 1.0);
            let k = 1.0 / (h * h);
            Ok(tridiagonal(
                *n,
                |i| {
                    let x = -x_max + (i as f64 + 1.0) * h;
                    2.0 * k + x * x
                },
                |_| -k,
                |_| -k,
            ))
        }
        ProblemSpec::Nondivergence1d { n, x_min, x_max, diffusion, drift, potential } => {
            check_grid(*n, *x_min, *x_max)?;
            diffusion.check("diffusion", *n)?;
            drift.check("drift", *n)?;
            potential.check("potential", *n)?;
            if (0..*n).any(|i| diffusion.at(i) <= 0.0) {
                return Err(Error::SpecInvalid("diffusion must be strictly positive".into()));
            }
            let h = (x_max - x_min) / (*n as f64 + 1.0);
            Ok(tridiagonal(
                *n,
                |i| 2.0 * diffusion.at(i) / (h * h) - potential.at(i),
                |i| -diffusion.at(i) / (h * h) + drift.at(i) / (2.0 * h),
                |i| -diffusion.at(i) / (h * h) - drift.at(i) / (2.0 * h),
            ))
        }
        ProblemSpec::CoupledSystem { base, alpha } => {
            if !alpha.is_finite() {
                return Err(Error::SpecInvalid("coupling is not finite".into()));
            }
            let b = build_model_operator(base)?;
            let n = b.dim();
            Ok(DenseOperator::from_fn(2 * n, |i, j| {
                let (bi, bj) = (i / n, j / n);
                let (ii, jj) = (i % n, j % n);
                if bi == bj {
                    b.l[(ii, jj)]
                } else if ii == jj {
                    -alpha
                } else {
                    0.0
                }
            }))
            .and_then(|m| {
                let (lm, mm) = (b.lambda_m(), b.mu_m());
                if *alpha <= -lm || *alpha >= mm {
                    Err(Error::SpecInvalid(format!(
                        "coupling {alpha} outside (-lambda_m, mu_m) = ({}, {mm})",
                        -lm
                    )))
                } else {
                    Ok(m)
                }
            })
        }
        ProblemSpec::FractionalPower { base, s } => {
            if !(*s > 0.0 && *s < 1.0) {
                return Err(Error::SpecInvalid(format!("fractional exponent must lie in (0,1) (got {s})")));
            }
            fractional_power(&assemble(base)?, *s)
        }
        ProblemSpec::Explicit { matrix } => Ok(matrix.clone()),
    }
}

/// `L^s` for symmetric positive semidefinite `L`.
pub fn fractional_power(l: &DenseOperator, s: f64) -> Result<DenseOperator> {
    if !l.is_symmetric() {
        return Err(Error::SpecInvalid("fractional power needs a symmetric base".into()));
    }
    let eig = spectral::symmetric_eigendecompose(l, 1e-15)?;
    let floor = -1e-12 * eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if eig.eigenvalues[0] < floor {
        return Err(Error::SpecInvalid(format!(
            "fractional power needs a nonnegative spectrum (min {})",
            eig.eigenvalues[0]
        )));
    }
    Ok(eig.apply_function(|x| x.max(0.0).powf(s)).symmetrized())
}

/// Assembles and certifies: simple lowest eigenvalue with strictly positive
/// left and right eigenvectors and a strict gap above it.
pub fn build_model_operator(spec: &ProblemSpec) -> Result<ModelOperator> {
    let l = assemble(spec)?;
    let self_adjoint = l.is_symmetric();
    let triple = if self_adjoint {
        certify_symmetric(&l)?
    } else {
        certify_via_resolvent(&l)?
    };
    Ok(ModelOperator {
        l,
        triple,
        spec: spec.clone(),
        self_adjoint,
    })
}

fn certify_symmetric(l: &DenseOperator) -> Result<SpectralTriple> {
    let n = l.dim();
    let eig = spectral::symmetric_eigendecompose(l, 1e-15)?;
    let lambda_m = eig.eigenvalues[0];
    let mu_m = if n > 1 { eig.eigenvalues[1] } else { f64::INFINITY };
    let scale = eig.eigenvalues[n - 1].abs().max(eig.eigenvalues[0].abs()).max(1.0);
    if mu_m - lambda_m <= 1e-10 * scale {
        return Err(Error::CertificationFailed(format!(
            "lowest eigenvalue {lambda_m} is not simple (next {mu_m})"
        )));
    }
    let mut phi = eig.vector(0);
    if phi.iter().sum::<f64>() < 0.0 {
        phi = linalg::scaled(-1.0, &phi);
    }
    let min = linalg::min_entry(&phi);
    if min <= 0.0 {
        return Err(Error::CertificationFailed(format!(
            "ground state is not strictly positive (min entry {min:.3e})"
        )));
    }
    SpectralTriple::normalized(lambda_m, mu_m, &phi, &phi)
}

/// Non-symmetric case: `(L + sI)⁻¹` is a positive matrix for a Gershgorin
/// shift `s`, so its Perron pair carries the ground state of `L`.
fn certify_via_resolvent(l: &DenseOperator) -> Result<SpectralTriple> {
    let n = l.dim();
    if (0..n).any(|i| (0..n).any(|j| i != j && l[(i, j)] > 0.0)) {
        return Err(Error::CertificationFailed(
            "non-symmetric operator has positive off-diagonal entries".into(),
        ));
    }
    let gersh = (0..n)
        .map(|i| l[(i, i)] - (0..n).filter(|&j| j != i).map(|j| l[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let s = (-gersh).max(0.0) + 1.0;
    let shifted = l.shift(s);
    let lu = Lu::factor(&shifted, 1e-14 * shifted.max_abs())?;
    let resolvent = lu.inverse();
    let cert = certify_basic_eigenvalue(&resolvent, 1e-12)
        .map_err(|e| Error::CertificationFailed(format!("shifted resolvent: {e}")))?;
    let rho = cert.triple.primary_value;
    let lambda_m = 1.0 / rho - s;
    let mu_m = match cert.second_value {
        Some(v) if v > 0.0 => 1.0 / v - s,
        _ => 1.0 / cert.triple.gap_value - s,
    };
    let triple = SpectralTriple::normalized(lambda_m, mu_m, &cert.triple.phi, &cert.triple.phi_star)?;
    let (r, lres) = triple.residuals(l);
    let tol = 1e-8 * l.max_abs().max(1.0);
    if r > tol || lres > tol {
        return Err(Error::CertificationFailed(format!(
            "eigen-residuals {r:.3e}, {lres:.3e} exceed {tol:.3e}"
        )));
    }
    Ok(triple)
}

/// Entrywise test of one resolvent `(L − μ)⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventCheck {
    pub mu: f64,
    pub below_lambda_m: bool,
    pub min_entry: f64,
    /// `(row, col, value)` of the smallest entry when it is not positive.
    pub offending: Option<(usize, usize, f64)>,
    pub improving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSpecialReport {
    pub lambda_m: f64,
    pub mu_m: f64,
    pub gap: f64,
    pub resolvents: Vec<ResolventCheck>,
    /// No eigenvalue other than `λ_m` lies within `tol` of zero.
    pub zero_only_at_bottom: bool,
    pub passed: bool,
}

/// Checks that `(L − μ)⁻¹` is entrywise positive at each sample and that a
/// zero eigenvalue, if any, is the lowest one.
pub fn verify_m_special(m: &ModelOperator, mu_samples: &[f64], tol: f64) -> MSpecialReport {
    let lambda_m = m.lambda_m();
    let mu_m = m.mu_m();
    let n = m.dim();
    let resolvents: Vec<ResolventCheck> = mu_samples
        .iter()
        .map(|&mu| {
            let below = mu < lambda_m - tol;
            let shifted = m.l.shift(-mu);
            match Lu::factor(&shifted, 1e-14 * shifted.max_abs()) {
                Ok(lu) => {
                    let r = lu.inverse();
                    let (mut bi, mut bj, mut best) = (0, 0, f64::INFINITY);
                    for i in 0..n {
                        for j in 0..n {
                            if r[(i, j)] < best {
                                (bi, bj, best) = (i, j, r[(i, j)]);
                            }
                        }
                    }
                    ResolventCheck {
                        mu,
                        below_lambda_m: below,
                        min_entry: best,
                        offending: (best <= 0.0).then_some((bi, bj, best)),
                        improving: best > 0.0,
                    }
                }
                Err(_) => ResolventCheck {
                    mu,
                    below_lambda_m: below,
                    min_entry: f64::NAN,
                    offending: None,
                    improving: false,
                },
            }
        })
        .collect();
    let zero_only_at_bottom = if m.self_adjoint {
        spectral::symmetric_eigendecompose(&m.l, 1e-15)
            .map(|e| e.eigenvalues[1..].iter().all(|x| x.abs() > tol))
            .unwrap_or(false)
    } else {
        mu_m > tol || mu_m < -tol
    };
    let passed = resolvents.iter().all(|r| r.below_lambda_m && r.improving)
        && zero_only_at_bottom
        && mu_m - lambda_m > tol;
    MSpecialReport {
        lambda_m,
        mu_m,
        gap: mu_m - lambda_m,
        resolvents,
        zero_only_at_bottom,
        passed,
    }
}

/// `T = γ (L − λ_m I + γ I)⁻¹`, re-certified as a primitive operator with
/// spectral radius one.
pub fn to_r_form(m: &ModelOperator, gamma: f64) -> Result<RFormProblem> {
    if !(gamma > 0.0) {
        return Err(Error::SpecInvalid(format!("gamma must be positive (got {gamma})")));
    }
    let shift = m.lambda_m();
    let t = spectral::cayley_transform(&m.l.shift(-shift), gamma)?;
    let cert = certify_basic_eigenvalue(&t, 1e-12).map_err(|e| Error::CertificationFailed(format!("transformed operator: {e}")))?;
    let r = cert.triple.primary_value;
    if (r - 1.0).abs() > 1e-8 {
        return Err(Error::CertificationFailed(format!("spectral radius {r} differs from 1")));
    }
    Ok(RFormProblem {
        t,
        triple: cert.triple,
        shift,
        gamma,
        self_adjoint: m.self_adjoint,
    })
}
