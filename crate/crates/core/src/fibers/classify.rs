use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fibers::problem::FoldProblem;
use crate::fibers::trace::{fiber_point, Fiber};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Homeomorphism,
    FoldDown,
    FoldUp,
    NonSimple,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Homeomorphism => "homeomorphism",
            Verdict::FoldDown => "fold_down",
            Verdict::FoldUp => "fold_up",
            Verdict::NonSimple => "non_simple",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn is_fold(&self) -> bool {
        matches!(self, Verdict::FoldDown | Verdict::FoldUp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Fraction of samples at each end used for slope fits.
    pub slope_window: f64,
    /// Relative agreement required between the full-window and half-window slopes.
    pub slope_rtol: f64,
    /// `|λ|` at or below this is treated as zero.
    pub lambda_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            slope_window: 0.2,
            slope_rtol: 0.1,
            lambda_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldClassification {
    pub verdict: Verdict,
    /// Sign changes of the discrete derivative of `h`.
    pub sign_changes: usize,
    /// `+1` increasing, `−1` decreasing, `0` otherwise.
    pub monotone_direction: i8,
    pub end_slopes: (f64, f64),
    /// Slopes over half the window, for the stabilization test.
    pub inner_end_slopes: (f64, f64),
    pub slopes_stable: bool,
    /// Grid `t` at each discrete extremum of `h`.
    pub critical_t: Vec<f64>,
    pub handr_checked: usize,
    pub handr_mismatches: usize,
    pub notes: Vec<String>,
}

/// Least-squares slope of `ys` against `ts`.
pub fn ls_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    num / den
}

fn end_slopes(fiber: &Fiber, fraction: f64) -> (f64, f64) {
    let n = fiber.len();
    let k = ((fraction * n as f64).round() as usize).clamp(3, n);
    (
        ls_slope(&fiber.t_samples[..k], &fiber.h_samples[..k]),
        ls_slope(&fiber.t_samples[n - k..], &fiber.h_samples[n - k..]),
    )
}

fn sign(x: f64, floor: f64) -> i8 {
    if x > floor {
        1
    } else if x < -floor {
        -1
    } else {
        0
    }
}

pub fn classify_fold(fiber: &Fiber, slope_window: f64, slope_rtol: f64) -> FoldClassification {
    classify_fold_with(
        fiber,
        &ClassifyOptions {
            slope_window,
            slope_rtol,
            ..ClassifyOptions::default()
        },
    )
}

/// Verdict from discrete monotonicity of `h`, the end slopes, and the sign
/// identity between `h′` and `λ`.
pub fn classify_fold_with(fiber: &Fiber, opts: &ClassifyOptions) -> FoldClassification {
    let n = fiber.len();
    let mut notes = Vec::new();
    let h = &fiber.h_samples;
    let hmax = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-12 * hmax.max(1.0);

    // signs of nonzero grid differences and where they flip
    let mut last: i8 = 0;
    let mut first: i8 = 0;
    let mut sign_changes = 0;
    let mut critical_t = Vec::new();
    let mut kinds = Vec::new();
    for k in 0..n.saturating_sub(1) {
        let s = sign(h[k + 1] - h[k], floor);
        if s == 0 {
            continue;
        }
        if first == 0 {
            first = s;
        }
        if last != 0 && s != last {
            sign_changes += 1;
            critical_t.push(fiber.t_samples[k]);
            kinds.push(last);
        }
        last = s;
    }

    let (left, right) = end_slopes(fiber, opts.slope_window);
    let (ileft, iright) = end_slopes(fiber, 0.5 * opts.slope_window);
    let close = |a: f64, b: f64| (a - b).abs() <= opts.slope_rtol * a.abs().max(b.abs()).max(1e-300);
    let slopes_stable = close(left, ileft) && close(right, iright);

    let mut checked = 0;
    let mut mismatches = 0;
    for k in 1..n.saturating_sub(1) {
        let lam = fiber.lambda_samples[k];
        if lam.abs() > 10.0 * opts.lambda_tol {
            checked += 1;
            if sign(fiber.dh_samples[k], 0.0) != sign(lam, 0.0) {
                mismatches += 1;
            }
        }
    }

    let verdict = if n < 32 {
        notes.push(format!("only {n} samples; at least 32 are needed"));
        Verdict::Inconclusive
    } else if mismatches > 0 {
        notes.push(format!("sign of h' disagrees with lambda at {mismatches} samples"));
        Verdict::Inconclusive
    } else if sign_changes >= 2 {
        Verdict::NonSimple
    } else if !slopes_stable {
        notes.push("end slopes have not stabilized; widen the window".into());
        Verdict::Inconclusive
    } else if sign_changes == 0 {
        let (sl, sr) = (sign(left, 0.0), sign(right, 0.0));
        if first != 0 && sl == first && sr == first {
            Verdict::Homeomorphism
        } else {
            notes.push("monotone samples but end slopes disagree with the direction".into());
            Verdict::Inconclusive
        }
    } else if kinds[0] == 1 && left > 0.0 && right < 0.0 {
        Verdict::FoldDown
    } else if kinds[0] == -1 && left < 0.0 && right > 0.0 {
        Verdict::FoldUp
    } else {
        notes.push("single extremum but end slopes do not match a fold".into());
        Verdict::Inconclusive
    };

    FoldClassification {
        verdict,
        sign_changes,
        monotone_direction: if sign_changes == 0 { first } else { 0 },
        end_slopes: (left, right),
        inner_end_slopes: (ileft, iright),
        slopes_stable,
        critical_t,
        handr_checked: checked,
        handr_mismatches: mismatches,
        notes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub h: f64,
    pub lambda: f64,
}

/// Every sign change of `λ` along the fiber, refined by bisection on `λ`
/// with a fresh slice solve per probe.
pub fn critical_points_on_fiber(prob: &FoldProblem, fiber: &Fiber, refine_tol: f64) -> Result<Vec<CriticalPoint>> {
    let nonzero: Vec<usize> = (0..fiber.len())
        .filter(|&k| fiber.lambda_samples[k].abs() > refine_tol)
        .collect();
    let mut out = Vec::new();
    for pair in nonzero.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        if fiber.lambda_samples[i].signum() == fiber.lambda_samples[j].signum() {
            continue;
        }
        out.push(refine_critical(prob, fiber, i, j, refine_tol)?);
    }
    Ok(out)
}

pub(crate) fn refine_critical(prob: &FoldProblem, fiber: &Fiber, i: usize, j: usize, refine_tol: f64) -> Result<CriticalPoint> {
    let z = &fiber.z;
    let tol = fiber.slice_tol * 1e-2;
    let (mut a, mut b) = (fiber.t_samples[i], fiber.t_samples[j]);
    let sa = fiber.lambda_samples[i].signum();
    let mut w = fiber.w_samples[i].clone();
    let mut best = fiber_point(prob, z, a, &w, tol, None)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let p = fiber_point(prob, z, m, &w, tol, Some(&best.eigvec))?;
        w = p.w.clone();
        let done = p.lambda.abs() <= refine_tol || (b - a) <= 4.0 * f64::EPSILON * m.abs().max(1.0);
        if p.lambda.signum() == sa {
            a = m;
        } else {
            b = m;
        }
        best = p;
        if done {
            break;
        }
    }
    let u = best.u(prob);
    Ok(CriticalPoint {
        t: best.t,
        h: best.h,
        lambda: best.lambda,
        u,
        w: best.w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibers::trace::trace_fiber;
    use crate::linalg::DenseOperator;
    use crate::nonlinear::{linear_map, make_convex_profile, nemitskii, vertical_sine_map};
    use crate::operators::{build_model_operator, Coefficient, ModelOperator, ProblemSpec};
    use std::f64::consts::PI;

    fn dirichlet(n: usize) -> ModelOperator {
        build_model_operator(&ProblemSpec::DirichletLaplacian1d {
            n,
            x_min: 0.0,
            x_max: 1.0,
            potential: Coefficient::Constant(0.0),
        })
        .unwrap()
    }

    fn sine(n: usize) -> FoldProblem {
        let m = dirichlet(n);
        let map = vertical_sine_map(&m.triple.phi, &m.triple.phi_star, m.lambda_m()).unwrap();
        FoldProblem::m_form(m, map).unwrap()
    }

    #[test]
    fn slope_fit_is_exact_on_lines() {
        assert!((ls_slope(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_map_is_homeomorphism() {
        let p = FoldProblem::m_form(dirichlet(3), linear_map(&DenseOperator::zeros(3))).unwrap();
        let f = trace_fiber(&p, &[0.0; 3], -10.0, 10.0, 64).unwrap();
        let c = classify_fold(&f, 0.2, 0.1);
        assert_eq!(c.verdict, Verdict::Homeomorphism);
        assert_eq!(c.monotone_direction, 1);
        assert!(critical_points_on_fiber(&p, &f, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn convex_map_folds_down_once() {
        let p = FoldProblem::m_form(dirichlet(3), nemitskii(make_convex_profile(5.0, 15.0, 1.0).unwrap(), 3).unwrap()).unwrap();
        let f = trace_fiber(&p, &[0.0; 3], -200.0, 200.0, 256).unwrap();
        let c = classify_fold(&f, 0.2, 0.1);
        assert_eq!(c.verdict, Verdict::FoldDown, "{c:?}");
        assert_eq!(c.handr_mismatches, 0);
        let crit = critical_points_on_fiber(&p, &f, 1e-9).unwrap();
        assert_eq!(crit.len(), 1);
        let k = (0..f.len()).max_by(|&i, &j| f.h_samples[i].total_cmp(&f.h_samples[j])).unwrap();
        let dt = f.t_samples[1] - f.t_samples[0];
        assert!((crit[0].t - f.t_samples[k]).abs() <= dt);
        assert!(crit[0].lambda.abs() <= 1e-9);
    }

    #[test]
    fn sine_is_not_simple() {
        let p = sine(3);
        let f = trace_fiber(&p, &[0.0; 3], -4.0 * PI, 4.0 * PI, 256).unwrap();
        let c = classify_fold(&f, 0.2, 0.1);
        assert_eq!(c.verdict, Verdict::NonSimple);
        assert_eq!(c.handr_mismatches, 0);
    }

    #[test]
    fn sine_critical_points_solve_tan_t_equals_minus_t() {
        let p = sine(3);
        let f = trace_fiber(&p, &[0.0; 3], 0.0, 4.0 * PI, 200).unwrap();
        let crit = critical_points_on_fiber(&p, &f, 1e-10).unwrap();
        assert_eq!(crit.len(), 4);
        // bisection on sin t + t cos t over ((k − ½)π, kπ)
        for (cp, k) in crit.iter().zip(1..) {
            let g = |t: f64| t.sin() + t * t.cos();
            let (mut a, mut b) = ((k as f64 - 0.5) * PI, k as f64 * PI);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if g(m).signum() == g(a).signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            assert!((cp.t - a).abs() < 1e-8, "{} vs {a}", cp.t);
        }
    }
}
