use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::{solve_preimages, FoldProblem};
use crate::linalg::{self, Lu};

pub const MAX_ORACLE_DIM: usize = 3;
const DEDUP_RADIUS: f64 = 1e-6;
const MATCH_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    pub fn cube(n: usize, half: f64) -> Self {
        Self {
            lower: vec![-half; n],
            upper: vec![half; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Window passed to the engine; oracle roots outside it are dropped.
    /// Defaults to the range of heights over the box corners.
    pub window: Option<(f64, f64)>,
    pub nt: usize,
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            window: None,
            nt: 256,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub target: Vec<f64>,
    pub oracle_solutions: Vec<Vec<f64>>,
    pub engine_solutions: Vec<Vec<f64>>,
    /// Largest distance after optimal pairing (infinite on count mismatch).
    pub max_pair_distance: f64,
    #[serde(rename = "match")]
    pub matched: bool,
}

pub fn brute_force_oracle(prob: &FoldProblem, g: &[f64], bounds: &SearchBox, grid_per_axis: usize) -> Result<OracleReport> {
    brute_force_oracle_with(prob, g, bounds, grid_per_axis, &OracleOptions::default())
}

/// Damped Newton on `F(u) = g` from every node of a uniform grid over the
/// box, deduplicated, then compared with the fiber solver.
pub fn brute_force_oracle_with(
    prob: &FoldProblem,
    g: &[f64],
    bounds: &SearchBox,
    grid_per_axis: usize,
    opts: &OracleOptions,
) -> Result<OracleReport> {
    let n = prob.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::DimensionTooLarge(n));
    }
    if bounds.lower.len() != n || bounds.upper.len() != n || g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if g.len() != n { g.len() } else { bounds.lower.len() },
        });
    }
    let window = opts.window.unwrap_or_else(|| corner_heights(prob, bounds));
    let k = grid_per_axis.max(2);
    let nodes: Vec<Vec<f64>> = (0..k.pow(n as u32))
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let j = idx % k;
                    idx /= k;
                    bounds.lower[i] + (bounds.upper[i] - bounds.lower[i]) * j as f64 / (k - 1) as f64
                })
                .collect()
        })
        .collect();
    let accept = opts.tol.max(1e-10 * (1.0 + linalg::norm2(g)));
    let roots: Vec<Option<Vec<f64>>> = nodes.par_iter().map(|x| newton_from(prob, g, x, accept)).collect();

    let mut oracle: Vec<Vec<f64>> = Vec::new();
    for r in roots.into_iter().flatten() {
        let t = prob.split.height(&r);
        if t < window.0 || t > window.1 {
            continue;
        }
        if !oracle.iter().any(|s| linalg::distance(s, &r) <= DEDUP_RADIUS) {
            oracle.push(r);
        }
    }
    oracle.sort_by(|a, b| prob.split.height(a).total_cmp(&prob.split.height(b)));

    let report = solve_preimages(prob, g, window, opts.nt, opts.tol)?;
    let engine: Vec<Vec<f64>> = report.solutions.into_iter().map(|s| s.u).collect();
    let max_pair_distance = if oracle.len() == engine.len() {
        optimal_pairing(&oracle, &engine)
    } else {
        f64::INFINITY
    };
    Ok(OracleReport {
        target: g.to_vec(),
        matched: max_pair_distance <= MATCH_DISTANCE,
        oracle_solutions: oracle,
        engine_solutions: engine,
        max_pair_distance,
    })
}

fn corner_heights(prob: &FoldProblem, bounds: &SearchBox) -> (f64, f64) {
    let n = bounds.lower.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mask in 0..(1usize << n) {
        let c: Vec<f64> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { bounds.upper[i] } else { bounds.lower[i] })
            .collect();
        let t = prob.split.height(&c);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    (lo, hi)
}

fn newton_from(prob: &FoldProblem, g: &[f64], start: &[f64], accept: f64) -> Option<Vec<f64>> {
    let mut u = start.to_vec();
    let mut r = linalg::sub(&prob.eval(&u), g);
    let mut res = linalg::norm2(&r);
    // runs to the rounding floor: near a double root the error is only the
    // square root of the residual
    for _ in 0..200 {
        if res == 0.0 {
            break;
        }
        let df = prob.jacobian(&u);
        let lu = Lu::factor(&df, 1e-14 * df.max_abs().max(1e-300)).ok()?;
        let delta = lu.solve(&r);
        let mut damping = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial = linalg::add_scaled(&u, -damping, &delta);
            let tr = linalg::sub(&prob.eval(&trial), g);
            let tres = linalg::norm2(&tr);
            if tres < res {
                u = trial;
                r = tr;
                res = tres;
                improved = true;
                break;
            }
            damping *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (res <= accept).then_some(u)
}

/// Minimal largest distance over all pairings (counts are tiny).
fn optimal_pairing(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn go(a: &[Vec<f64>], b: &[Vec<f64>], used: &mut Vec<bool>, i: usize) -> f64 {
        if i == a.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let d = linalg::distance(&a[i], &b[j]).max(go(a, b, used, i + 1));
                used[j] = false;
                best = best.min(d);
            }
        }
        best
    }
    go(a, b, &mut vec![false; b.len()], 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibers::{critical_points_on_fiber, trace_fiber};
    use crate::linalg::DenseOperator;
    use crate::nonlinear::{linear_map, make_convex_profile, nemitskii};
    use crate::operators::{build_model_operator, Coefficient, ModelOperator, ProblemSpec};
    use crate::spectral::linear_solve;

    fn dirichlet(n: usize) -> ModelOperator {
        build_model_operator(&ProblemSpec::DirichletLaplacian1d {
            n,
            x_min: 0.0,
            x_max: 1.0,
            potential: Coefficient::Constant(0.0),
        })
        .unwrap()
    }

    #[test]
    fn linear_problem_has_the_linear_solution() {
        let m = dirichlet(2);
        let l = m.l.clone();
        let p = FoldProblem::m_form(m, linear_map(&DenseOperator::zeros(2))).unwrap();
        let g = [3.0, -1.0];
        let r = brute_force_oracle(&p, &g, &SearchBox::cube(2, 5.0), 5).unwrap();
        assert!(r.matched);
        assert_eq!(r.oracle_solutions.len(), 1);
        let want = linear_solve(&l, &g).unwrap();
        assert!(linalg::distance(&r.oracle_solutions[0], &want) < 1e-9);
    }

    #[test]
    fn fold_counts_match_on_both_sides() {
        let p = FoldProblem::m_form(dirichlet(3), nemitskii(make_convex_profile(5.0, 15.0, 1.0).unwrap(), 3).unwrap()).unwrap();
        let z = p.split.project_w(&[0.5, -0.2, 0.1]);
        let f = trace_fiber(&p, &z, -200.0, 200.0, 256).unwrap();
        let hc = critical_points_on_fiber(&p, &f, 1e-9).unwrap()[0].h;
        let opts = OracleOptions {
            window: Some((-200.0, 200.0)),
            ..Default::default()
        };
        let bx = SearchBox::cube(3, 150.0);
        let below = linalg::add_scaled(&z, hc - 3.0, &p.split.phi);
        let r = brute_force_oracle_with(&p, &below, &bx, 7, &opts).unwrap();
        assert_eq!(r.oracle_solutions.len(), 2);
        assert!(r.matched, "{r:?}");
        let above = linalg::add_scaled(&z, hc + 3.0, &p.split.phi);
        let r = brute_force_oracle_with(&p, &above, &bx, 7, &opts).unwrap();
        assert!(r.oracle_solutions.is_empty() && r.matched);
    }

    #[test]
    fn rejects_large_dimension() {
        let p = FoldProblem::m_form(dirichlet(4), linear_map(&DenseOperator::zeros(4))).unwrap();
        assert!(matches!(
            brute_force_oracle(&p, &[0.0; 4], &SearchBox::cube(4, 1.0), 3),
            Err(Error::DimensionTooLarge(4))
        ));
    }
}
