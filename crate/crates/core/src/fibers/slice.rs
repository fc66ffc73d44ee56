use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::problem::{FoldProblem, Form};
use crate::linalg::{self, Lu};

const MAX_FIXED_POINT: usize = 2000;
const MAX_NEWTON: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSolution {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
    /// Largest ratio of consecutive fixed-point step norms.
    pub observed_ratio: f64,
    /// `‖Π_W F(w + tφ) − z‖`.
    pub residual: f64,
}

/// `Π_W F(w + tφ) − z`.
pub fn slice_residual(prob: &FoldProblem, z: &[f64], t: f64, w: &[f64]) -> Vec<f64> {
    let u = prob.split.compose(w, t);
    linalg::sub(&prob.split.project_w(&prob.eval(&u)), z)
}

/// Size below which residuals are indistinguishable from rounding.
fn rounding_floor(prob: &FoldProblem, z: &[f64], t: f64, w: &[f64]) -> f64 {
    let u = prob.split.compose(w, t);
    let scale = linalg::norm2(&prob.linear_matrix().matvec(&u))
        + linalg::norm2(&prob.map.eval(&prob.inner(&u)))
        + linalg::norm2(&u)
        + linalg::norm2(z);
    256.0 * f64::EPSILON * scale
}

/// Solves `Π_W F(w + tφ) = z` for `w ∈ W`.
///
/// m-form: iterates `y ← Π_W P̂(L̂_W⁻¹ y + tφ) + z` with `w = L̂_W⁻¹ y`.
/// r-form: iterates `w ← Π_W P(T(w + tφ)) + z`, switching to Newton when
/// the iteration stalls. Both finish with bordered Newton steps if needed.
pub fn invert_slice(prob: &FoldProblem, z: &[f64], t: f64, w0: &[f64], tol: f64) -> Result<SliceSolution> {
    let n = prob.dim();
    if z.len() != n || w0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if z.len() != n { z.len() } else { w0.len() },
        });
    }
    let hz = prob.split.height(z);
    if hz.abs() > 1e-10 * (1.0 + linalg::norm2(z)) {
        return Err(Error::AnchorNotInW(hz));
    }
    if let Some(c) = prob.contraction {
        if c >= 1.0 {
            return Err(Error::NotAContraction(c));
        }
    }
    let (w, iterations, observed_ratio) = match prob.form {
        Form::MForm => fixed_point_m(prob, z, t, w0, tol),
        Form::RForm => fixed_point_r(prob, z, t, w0, tol),
    };
    let mut w = w;
    let mut residual = linalg::norm2(&slice_residual(prob, z, t, &w));
    let mut newton_steps = 0;
    if residual > tol {
        let polished = newton(prob, z, t, w, residual, tol)?;
        w = polished.0;
        residual = polished.1;
        newton_steps = polished.2;
    }
    if residual > tol.max(rounding_floor(prob, z, t, &w)) {
        return Err(Error::NoConvergence {
            what: format!("slice solve at t = {t}"),
            iterations: iterations + newton_steps,
            residual,
        });
    }
    Ok(SliceSolution {
        w,
        iterations,
        newton_steps,
        observed_ratio,
        residual,
    })
}

fn fixed_point_m(prob: &FoldProblem, z: &[f64], t: f64, w0: &[f64], tol: f64) -> (Vec<f64>, usize, f64) {
    let split = &prob.split;
    let inv = prob.slice_inverse().expect("m-form problem has a slice inverse");
    let lhat = prob.centered_linear().expect("m-form problem has a centred operator");
    let mut y = split.project_w(&lhat.matvec(&split.project_w(w0)));
    let mut w = inv.matvec(&y);
    let mut prev: Option<f64> = None;
    let mut ratio = 0.0f64;
    let mut it = 0;
    while it < MAX_FIXED_POINT {
        it += 1;
        let u = split.compose(&w, t);
        let next = linalg::add(&split.project_w(&prob.centered_map(&u)), z);
        let step = linalg::distance(&next, &y);
        let size = 1.0 + linalg::norm2(&next);
        if let Some(p) = prev {
            // ratios of steps near rounding level carry no information
            if p > 1e-10 * size {
                ratio = ratio.max(step / p);
            }
        }
        y = next;
        w = inv.matvec(&y);
        if step <= 0.1 * tol || step <= 64.0 * f64::EPSILON * size {
            break;
        }
        prev = Some(step);
    }
    (w, it, ratio)
}

fn fixed_point_r(prob: &FoldProblem, z: &[f64], t: f64, w0: &[f64], tol: f64) -> (Vec<f64>, usize, f64) {
    let split = &prob.split;
    let t_op = prob.linear_matrix();
    let mut w = split.project_w(w0);
    let mut prev: Option<f64> = None;
    let mut ratio = 0.0f64;
    let mut it = 0;
    let mut slow = 0;
    while it < 200 {
        it += 1;
        let u = split.compose(&w, t);
        let next = linalg::add(&split.project_w(&prob.map.eval(&t_op.matvec(&u))), z);
        let step = linalg::distance(&next, &w);
        let size = 1.0 + linalg::norm2(&next);
        if !step.is_finite() {
            break;
        }
        if let Some(p) = prev {
            if p > 1e-10 * size {
                let r = step / p;
                ratio = ratio.max(r);
                slow = if r > 0.9 { slow + 1 } else { 0 };
            }
        }
        w = next;
        if step <= 0.1 * tol || step <= 64.0 * f64::EPSILON * size || slow >= 3 {
            break;
        }
        prev = Some(step);
    }
    (w, it, ratio)
}

/// Damped bordered Newton on `Π_W F(w + tφ) = z`.
pub(crate) fn newton(
    prob: &FoldProblem,
    z: &[f64],
    t: f64,
    mut w: Vec<f64>,
    mut residual: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let split = &prob.split;
    let mut steps = 0;
    while residual > tol && steps < MAX_NEWTON {
        steps += 1;
        let u = split.compose(&w, t);
        let r = slice_residual(prob, z, t, &w);
        let m = split.bordered(&prob.jacobian(&u));
        let lu = Lu::factor(&m, 1e-14 * m.max_abs())?;
        let delta = linalg::scaled(-1.0, &lu.solve(&r));
        let mut damping = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = split.project_w(&linalg::add_scaled(&w, damping, &delta));
            let tr = linalg::norm2(&slice_residual(prob, z, t, &trial));
            if tr < residual {
                w = trial;
                residual = tr;
                improved = true;
                break;
            }
            damping *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((w, residual, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseOperator;
    use crate::nonlinear::{linear_map, make_convex_profile, nemitskii};
    use crate::operators::{build_model_operator, ProblemSpec};

    fn dirichlet(n: usize) -> crate::operators::ModelOperator {
        build_model_operator(&ProblemSpec::DirichletLaplacian1d {
            n,
            x_min: 0.0,
            x_max: 1.0,
            potential: crate::operators::Coefficient::Constant(0.0),
        })
        .unwrap()
    }

    fn ap(n: usize) -> FoldProblem {
        FoldProblem::m_form(dirichlet(n), nemitskii(make_convex_profile(5.0, 15.0, 1.0).unwrap(), n).unwrap()).unwrap()
    }

    #[test]
    fn zero_map_is_one_linear_solve() {
        let p = FoldProblem::m_form(dirichlet(3), linear_map(&DenseOperator::zeros(3))).unwrap();
        let z = p.split.project_w(&[1.0, 2.0, -1.0]);
        let s = invert_slice(&p, &z, 0.7, &[0.0; 3], 1e-12).unwrap();
        let want = p.slice_inverse().unwrap().matvec(&z);
        assert!(linalg::distance(&s.w, &want) < 1e-12);
        assert!(s.iterations <= 2);
        let s = invert_slice(&p, &[0.0; 3], 0.7, &[0.0; 3], 1e-12).unwrap();
        assert!(linalg::norm2(&s.w) < 1e-15);
    }

    #[test]
    fn origin_slice_of_convex_map() {
        let s = invert_slice(&ap(3), &[0.0; 3], 0.0, &[0.0; 3], 1e-12).unwrap();
        assert_eq!(s.w, vec![0.0; 3]);
    }

    #[test]
    fn observed_ratio_below_contraction() {
        let p = ap(3);
        let c = p.contraction.unwrap();
        assert!((c - 5.0 / 22.0).abs() < 1e-12);
        let z = p.split.project_w(&[3.0, -4.0, 1.0]);
        for t in [-50.0, -3.0, 0.0, 0.4, 2.0, 40.0] {
            let s = invert_slice(&p, &z, t, &[10.0, 0.0, -10.0], 1e-11).unwrap();
            assert!(s.observed_ratio <= c + 0.05, "t = {t}: {}", s.observed_ratio);
            assert!(s.residual <= 1e-11);
            assert!(p.split.height(&s.w).abs() < 1e-12);
        }
    }

    #[test]
    fn anchor_must_lie_in_w() {
        let p = ap(3);
        assert!(matches!(invert_slice(&p, &p.split.phi.clone(), 0.0, &[0.0; 3], 1e-10), Err(Error::AnchorNotInW(_))));
    }
}
