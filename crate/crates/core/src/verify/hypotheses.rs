use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::certify_fine_perturbation;
use crate::error::{Error, Result};
use crate::fibers::{FoldProblem, Form};
use crate::linalg::{self, DenseOperator};
use crate::nonlinear::NonlinearMap;
use crate::spectral;
use crate::verify::index::eigenvalues_above_one;

/// Per-sample margins and violations.
type SampleOutcome = (Vec<(&'static str, f64)>, Vec<Violation>);

/// Sample coordinates are drawn from `[-SAMPLE_RADIUS, SAMPLE_RADIUS]`
/// (times the profile curvature scale when larger than one).
pub const SAMPLE_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: usize,
    pub hypothesis: String,
    pub inputs: Vec<Vec<f64>>,
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hypothesis: String,
    pub samples: usize,
    pub violations: Vec<Violation>,
    /// Worst-case slack per checked inequality; negative means violated.
    pub margins: BTreeMap<String, f64>,
    pub passed: bool,
    pub summary: String,
}

impl HypothesisReport {
    fn finish(hypothesis: &str, samples: usize, mut violations: Vec<Violation>, margins: BTreeMap<String, f64>) -> Self {
        violations.sort_by(|a, b| a.sample.cmp(&b.sample).then_with(|| a.hypothesis.cmp(&b.hypothesis)));
        let passed = violations.is_empty();
        let summary = if passed {
            format!("no violation found in {samples} samples")
        } else {
            format!("{} violations in {samples} samples", violations.len())
        };
        Self {
            hypothesis: hypothesis.into(),
            samples,
            violations,
            margins,
            passed,
            summary,
        }
    }
}

fn radius(map: &NonlinearMap) -> f64 {
    SAMPLE_RADIUS * map.profile().map_or(1.0, |p| p.kappa.max(1.0))
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

fn increment(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.1..1.0)).collect()
}

fn update(margins: &mut BTreeMap<String, f64>, key: &str, value: f64) {
    let e = margins.entry(key.to_string()).or_insert(f64::INFINITY);
    *e = e.min(value);
}

struct MSample {
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// Sampled check of the m-form hypotheses: the projected centred
/// linearizations stay below the half width, which stays below the centred
/// gap; each linearization is a fine perturbation; the three-point convexity
/// inequality is strict on ordered triples; Jacobians are monotone.
pub fn check_m_hypotheses(prob: &FoldProblem, n_samples: usize, seed: u64) -> Result<HypothesisReport> {
    if prob.form != Form::MForm {
        return Err(Error::WrongForm("an m-form problem".into()));
    }
    let n = prob.dim();
    let r = radius(&prob.map);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<MSample> = (0..n_samples)
        .map(|_| {
            let u = random_point(&mut rng, n, r);
            let v = linalg::add(&u, &increment(&mut rng, n));
            let w = linalg::add(&v, &increment(&mut rng, n));
            MSample { u, v, w }
        })
        .collect();

    let gamma = prob.gamma_center;
    let bhat = prob.half_width;
    let muhat = prob.mu_m() - gamma;
    let projector = prob.split.projector();
    let mut margins = BTreeMap::new();
    let mut violations = Vec::new();
    margins.insert("gap_minus_half_width".to_string(), muhat - bhat);
    if !(bhat < muhat) {
        violations.push(Violation {
            sample: 0,
            hypothesis: "m-H gap".into(),
            inputs: vec![],
            measured: bhat - muhat,
        });
    }

    let results: Vec<SampleOutcome> = samples
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut m = Vec::new();
            let mut v = Vec::new();
            // (m-H) on an unordered pair
            let g = prob.map.linearize(&s.u, &s.w);
            let norm = spectral::operator_norm(&projector.matmul(&g.shift(-gamma)));
            m.push(("projected_norm_slack", bhat - norm));
            if norm > bhat * (1.0 + 1e-12) + 1e-12 {
                v.push(Violation {
                    sample: k,
                    hypothesis: "m-H norm".into(),
                    inputs: vec![s.u.clone(), s.w.clone()],
                    measured: norm,
                });
            }
            let cert = certify_fine_perturbation(&g, prob.mu_m(), gamma + bhat);
            if !cert.member {
                v.push(Violation {
                    sample: k,
                    hypothesis: "m-H fine perturbation".into(),
                    inputs: vec![s.u.clone(), s.w.clone()],
                    measured: cert.norm_bound,
                });
            }
            // (m-Conv)
            let (pu, pv, pw) = (prob.map.eval(&s.u), prob.map.eval(&s.v), prob.map.eval(&s.w));
            let terms = [
                linalg::dot(&linalg::sub(&s.v, &s.u), &pw),
                linalg::dot(&linalg::sub(&s.w, &s.v), &pu),
                linalg::dot(&linalg::sub(&s.u, &s.w), &pv),
            ];
            let value: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|x| x.abs()).sum();
            m.push(("convexity_relative", if scale > 0.0 { value / scale } else { 0.0 }));
            if value <= 1e-12 * scale {
                v.push(Violation {
                    sample: k,
                    hypothesis: "m-Conv".into(),
                    inputs: vec![s.u.clone(), s.v.clone(), s.w.clone()],
                    measured: value,
                });
            }
            // (m-Convs)
            let (ju, jv) = (prob.map.jacobian(&s.u), prob.map.jacobian(&s.v));
            let diff = jv.sub(&ju);
            let floor = -1e-12 * ju.max_abs().max(jv.max_abs());
            let worst = diff.min_entry();
            m.push(("jacobian_monotonicity", worst));
            if worst < floor {
                v.push(Violation {
                    sample: k,
                    hypothesis: "m-Convs".into(),
                    inputs: vec![s.u.clone(), s.v.clone()],
                    measured: worst,
                });
            }
            (m, v)
        })
        .collect();
    for (m, v) in results {
        for (key, val) in m {
            update(&mut margins, key, val);
        }
        violations.extend(v);
    }
    Ok(HypothesisReport::finish("m", n_samples, violations, margins))
}

/// `(A, B)` with `G(u, v) = A + B` for the sampled pair of arguments of `P`.
pub type Decomposition<'a> = &'a (dyn Fn(&[f64], &[f64]) -> (DenseOperator, DenseOperator) + Sync);

/// Nemitskii split `A = diag(min(q, 1))`, `B = diag(max(q − 1, 0))`.
pub fn canonical_decomposition(map: &NonlinearMap, u: &[f64], v: &[f64]) -> Result<(DenseOperator, DenseOperator)> {
    match map {
        NonlinearMap::Nemitskii { profile, .. } => {
            let q: Vec<f64> = u.iter().zip(v).map(|(&r, &s)| profile.quotient(r, s)).collect();
            let a: Vec<f64> = q.iter().map(|x| x.min(1.0)).collect();
            let b: Vec<f64> = q.iter().map(|x| (x - 1.0).max(0.0)).collect();
            Ok((DenseOperator::from_diagonal(&a), DenseOperator::from_diagonal(&b)))
        }
        other => Err(Error::SupplierMissing(other.kind_name().into())),
    }
}

struct RSample {
    y: Vec<f64>,
    z: Vec<f64>,
    y_hi: Vec<f64>,
    z_hi: Vec<f64>,
}

/// Sampled check of the r-form hypotheses at a supplied (or canonical)
/// decomposition, with `S_floor = a T` for the profile's lower slope `a`.
pub fn check_r_hypotheses(
    prob: &FoldProblem,
    supplier: Option<Decomposition<'_>>,
    n_samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if prob.form != Form::RForm {
        return Err(Error::WrongForm("an r-form problem".into()));
    }
    if supplier.is_none() {
        // fails early for kinds without a canonical split
        let zero = vec![0.0; prob.dim()];
        canonical_decomposition(&prob.map, &zero, &zero)?;
    }
    let n = prob.dim();
    let t_op = prob.linear_matrix();
    let t_tol = 1e-12 * t_op.max_abs();
    let floor_slope = prob.map.profile().map_or(0.0, |p| p.a);
    let s_floor = t_op.scale(floor_slope);
    let b_bound = prob.half_width;
    let r = radius(&prob.map);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<RSample> = (0..n_samples)
        .map(|_| {
            let y = random_point(&mut rng, n, r);
            let z = random_point(&mut rng, n, r);
            let y_hi = linalg::add(&y, &increment(&mut rng, n));
            let z_hi = linalg::add(&z, &increment(&mut rng, n));
            RSample { y, z, y_hi, z_hi }
        })
        .collect();

    let mut margins = BTreeMap::new();
    let mut violations = Vec::new();
    let floor_min = s_floor.min_entry();
    margins.insert("floor_nonnegative".to_string(), floor_min);
    if floor_min < -t_tol {
        violations.push(Violation {
            sample: 0,
            hypothesis: "r-H floor".into(),
            inputs: vec![],
            measured: floor_min,
        });
    }

    let split = |u: &[f64], v: &[f64]| -> (DenseOperator, DenseOperator) {
        match supplier {
            Some(f) => f(u, v),
            None => canonical_decomposition(&prob.map, u, v).expect("checked above"),
        }
    };

    let results: Vec<Result<SampleOutcome>> = samples
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut m = Vec::new();
            let mut v = Vec::new();
            let pair = || vec![s.y.clone(), s.z.clone()];
            let (a, b) = split(&s.y, &s.z);
            let at = a.matmul(t_op);
            let lower = at.sub(&s_floor).min_entry();
            let upper = t_op.sub(&at).min_entry();
            m.push(("floor_below_at", lower));
            m.push(("at_below_t", upper));
            if lower < -t_tol || upper < -t_tol {
                v.push(Violation {
                    sample: k,
                    hypothesis: "r-H sandwich".into(),
                    inputs: pair(),
                    measured: lower.min(upper),
                });
            }
            let b_min = b.min_entry();
            m.push(("b_nonnegative", b_min));
            if b_min < -1e-12 * b.max_abs() {
                v.push(Violation {
                    sample: k,
                    hypothesis: "r-H B nonnegative".into(),
                    inputs: pair(),
                    measured: b_min,
                });
            }
            let b_norm = spectral::operator_norm(&b);
            m.push(("b_norm_slack", b_bound - b_norm));
            if b_norm > b_bound * (1.0 + 1e-12) + 1e-14 {
                v.push(Violation {
                    sample: k,
                    hypothesis: "r-H B norm".into(),
                    inputs: pair(),
                    measured: b_norm,
                });
            }
            let g = prob.map.linearize(&s.y, &s.z);
            let above = eigenvalues_above_one(&g.matmul(t_op))?;
            m.push(("eigenvalues_above_one_slack", 1.0 - above as f64));
            if above > 1 {
                v.push(Violation {
                    sample: k,
                    hypothesis: "r-H eigenvalues above one".into(),
                    inputs: pair(),
                    measured: above as f64,
                });
            }
            // (r-Conv): entrywise nonnegative with a positive entry in every column
            let diff = prob.map.linearize(&s.y_hi, &s.z_hi).sub(&g);
            let tol = 1e-12 * g.max_abs().max(1.0);
            let worst = diff.min_entry();
            let weakest_column = (0..n)
                .map(|j| (0..n).map(|i| diff[(i, j)]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            m.push(("convexity_entry", worst));
            m.push(("convexity_column", weakest_column));
            if worst < -tol || weakest_column <= tol {
                v.push(Violation {
                    sample: k,
                    hypothesis: "r-Conv".into(),
                    inputs: vec![s.y.clone(), s.z.clone(), s.y_hi.clone(), s.z_hi.clone()],
                    measured: worst.min(weakest_column),
                });
            }
            Ok((m, v))
        })
        .collect();
    for res in results {
        let (m, v) = res?;
        for (key, val) in m {
            update(&mut margins, key, val);
        }
        violations.extend(v);
    }
    Ok(HypothesisReport::finish("r", n_samples, violations, margins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::{linear_map, make_convex_profile, nemitskii, vertical_sine_map};
    use crate::operators::{build_model_operator, to_r_form, Coefficient, ModelOperator, ProblemSpec};

    fn dirichlet(n: usize) -> ModelOperator {
        build_model_operator(&ProblemSpec::DirichletLaplacian1d {
            n,
            x_min: 0.0,
            x_max: 1.0,
            potential: Coefficient::Constant(0.0),
        })
        .unwrap()
    }

    fn ap3() -> FoldProblem {
        FoldProblem::m_form(dirichlet(3), nemitskii(make_convex_profile(5.0, 15.0, 1.0).unwrap(), 3).unwrap()).unwrap()
    }

    fn bnv(gamma: f64) -> FoldProblem {
        let m = dirichlet(3);
        let lm = m.lambda_m();
        let prof = make_convex_profile(5.0, 15.0, 1.0).unwrap().to_r_form(lm, gamma).unwrap();
        FoldProblem::r_form(to_r_form(&m, gamma).unwrap(), nemitskii(prof, 3).unwrap()).unwrap()
    }

    #[test]
    fn convex_nemitskii_passes_with_margin_17() {
        let r = check_m_hypotheses(&ap3(), 500, 7).unwrap();
        assert!(r.passed, "{:?}", r.violations.first());
        assert!((r.margins["gap_minus_half_width"] - 17.0).abs() < 1e-9);
        assert!(r.margins["projected_norm_slack"] >= 0.0);
        assert_eq!(r.summary, "no violation found in 500 samples");
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = check_m_hypotheses(&ap3(), 50, 3).unwrap();
        let b = check_m_hypotheses(&ap3(), 50, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_half_width_is_reported() {
        let mut p = ap3();
        p.half_width = 30.0;
        let r = check_m_hypotheses(&p, 20, 1).unwrap();
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| v.hypothesis == "m-H gap"));
    }

    #[test]
    fn zero_map_violates_strict_convexity() {
        let p = FoldProblem::m_form(dirichlet(3), linear_map(&DenseOperator::zeros(3))).unwrap();
        let r = check_m_hypotheses(&p, 30, 2).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violations.iter().filter(|v| v.hypothesis == "m-Conv").count(), 30);
        assert!(r.violations.iter().all(|v| v.hypothesis == "m-Conv"));
    }

    #[test]
    fn sine_map_is_not_convex() {
        let m = dirichlet(3);
        let map = vertical_sine_map(&m.triple.phi, &m.triple.phi_star, m.lambda_m()).unwrap();
        let p = FoldProblem::m_form(m, map).unwrap();
        let r = check_m_hypotheses(&p, 100, 4).unwrap();
        assert!(r.violations.iter().any(|v| v.hypothesis == "m-Conv"));
    }

    #[test]
    fn r_form_passes_for_large_gamma() {
        let r = check_r_hypotheses(&bnv(40.0), None, 200, 11).unwrap();
        assert!(r.passed, "{:?}", r.violations.first());
    }

    #[test]
    fn floor_goes_negative_below_threshold() {
        // threshold is λ_m − a ≈ 4.37 here
        let r = check_r_hypotheses(&bnv(3.0), None, 20, 11).unwrap();
        assert!(r.violations.iter().any(|v| v.hypothesis == "r-H floor"));
    }

    #[test]
    fn small_b_bound_is_reported() {
        let mut p = bnv(40.0);
        p.half_width *= 0.25;
        let r = check_r_hypotheses(&p, None, 50, 5).unwrap();
        assert!(r.violations.iter().any(|v| v.hypothesis == "r-H B norm"));
    }

    #[test]
    fn at_most_one_eigenvalue_above_one_matches_full_spectrum() {
        let p = bnv(40.0);
        let t = p.linear_matrix().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let y = random_point(&mut rng, 3, 10.0);
            let z = random_point(&mut rng, 3, 10.0);
            let g = p.map.linearize(&y, &z);
            // G T is similar to the symmetric G^½ T G^½
            let half: Vec<f64> = g.diagonal().iter().map(|x| x.sqrt()).collect();
            let sym = t.scale_rows(&half).scale_cols(&half).symmetrized();
            let eig = spectral::symmetric_eigendecompose(&sym, 1e-15).unwrap();
            let full = eig.eigenvalues.iter().filter(|&&x| x > 1.0).count();
            assert!(full <= 1);
            assert_eq!(eigenvalues_above_one(&g.matmul(&t)).unwrap(), full);
        }
    }

    #[test]
    fn supplier_required_for_nonlocal() {
        let m = dirichlet(3);
        let prof = make_convex_profile(5.0, 15.0, 1.0).unwrap();
        let map = crate::nonlinear::nonlocal_map(&DenseOperator::identity(3), &[1.0; 3], prof).unwrap();
        let p = FoldProblem::r_form(to_r_form(&m, 40.0).unwrap(), map).unwrap();
        assert!(matches!(check_r_hypotheses(&p, None, 5, 1), Err(Error::SupplierMissing(_))));
        let supply = |u: &[f64], v: &[f64]| (p.map.linearize(u, v), DenseOperator::zeros(3));
        assert!(check_r_hypotheses(&p, Some(&supply), 5, 1).is_ok());
    }
}
