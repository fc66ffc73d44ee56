use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::classify::{classify_fold_with, critical_points_on_fiber, ClassifyOptions, FoldClassification, Verdict};
use crate::fibers::problem::FoldProblem;
use crate::fibers::trace::{height_at, trace_fiber_with, Fiber, TraceOptions};
use crate::linalg::{self, Lu};
use crate::verify::index::index_at;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveOptions {
    pub trace: TraceOptions,
    pub classify: ClassifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub t: f64,
    pub u: Vec<f64>,
    /// `‖F(u) − g‖`.
    pub residual: f64,
    /// `±1` at regular points, `0` at a fold tangency.
    pub index: i8,
    pub lambda: f64,
    pub critical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Less,
    Greater,
    Equal,
    Unordered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOrdering {
    pub first: usize,
    pub second: usize,
    pub relation: Relation,
    /// `min_i |u_i − v_i|`.
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub target: Vec<f64>,
    pub anchor: Vec<f64>,
    pub target_height: f64,
    pub solutions: Vec<Solution>,
    pub count: usize,
    pub ordering: Vec<PairOrdering>,
    pub verdict: Verdict,
    /// End slopes stabilized and no root can lie beyond the window. The
    /// stabilization test is a heuristic.
    pub window_adequate: bool,
    pub notes: Vec<String>,
}

pub fn compare(u: &[f64], v: &[f64]) -> (Relation, f64) {
    let scale = 1e-12 * (1.0 + linalg::norm_inf(u).max(linalg::norm_inf(v)));
    let gap = u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(f64::INFINITY, f64::min);
    let rel = if u.iter().zip(v).all(|(a, b)| (a - b).abs() <= scale) {
        Relation::Equal
    } else if u.iter().zip(v).all(|(a, b)| a < b) {
        Relation::Less
    } else if u.iter().zip(v).all(|(a, b)| a > b) {
        Relation::Greater
    } else {
        Relation::Unordered
    };
    (rel, gap)
}

pub fn solve_preimages(prob: &FoldProblem, g: &[f64], window: (f64, f64), nt: usize, tol: f64) -> Result<SolveReport> {
    solve_preimages_with(prob, g, window, nt, tol, &SolveOptions::default())
}

/// All preimages of `g` on the fiber through `Π_W g`, located by sign changes
/// of `h − h*`, fold tangencies, bisection and a full-space Newton polish.
pub fn solve_preimages_with(
    prob: &FoldProblem,
    g: &[f64],
    window: (f64, f64),
    nt: usize,
    tol: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if g.len() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            got: g.len(),
        });
    }
    let z = prob.split.project_w(g);
    let fiber = trace_fiber_with(prob, &z, window.0, window.1, nt, &opts.trace)?;
    let cls = classify_fold_with(&fiber, &opts.classify);
    solve_on_fiber(prob, &fiber, &cls, g, tol, opts)
}

/// Root finding on an already traced fiber whose anchor is `Π_W g`.
pub fn solve_on_fiber(
    prob: &FoldProblem,
    fiber: &Fiber,
    cls: &FoldClassification,
    g: &[f64],
    tol: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let z = &fiber.z;
    let h_star = prob.split.height(g);
    let mut notes = cls.notes.clone();
    let n = fiber.len();
    let (left, right) = cls.end_slopes;

    if !cls.slopes_stable && cls.verdict != Verdict::NonSimple {
        return Err(Error::WindowTooNarrow(format!(
            "end slopes not stabilized: ({left:.4e}, {right:.4e}) vs ({:.4e}, {:.4e})",
            cls.inner_end_slopes.0, cls.inner_end_slopes.1
        )));
    }
    let mut window_adequate = cls.slopes_stable;
    if matches!(cls.verdict, Verdict::FoldDown | Verdict::FoldUp | Verdict::Homeomorphism) {
        let beyond_left = (h_star - fiber.h_samples[0]) * left < 0.0;
        let beyond_right = (h_star - fiber.h_samples[n - 1]) * right > 0.0;
        if beyond_left || beyond_right {
            return Err(Error::WindowTooNarrow(format!(
                "target height {h_star:.6e} is reached beyond the {} end of the window",
                if beyond_left { "left" } else { "right" }
            )));
        }
    } else {
        window_adequate = false;
        notes.push("no asymptotic model for this verdict; roots beyond the window are not excluded".into());
    }

    let slice_tol = fiber.slice_tol * 1e-2;
    let critical = critical_points_on_fiber(prob, fiber, opts.classify.lambda_tol)?;
    // grid samples plus the refined extrema, so roots sharing a grid cell
    // with a fold are still bracketed
    let mut nodes: Vec<(f64, f64, Vec<f64>)> = (0..n)
        .map(|k| (fiber.t_samples[k], fiber.h_samples[k] - h_star, fiber.w_samples[k].clone()))
        .collect();
    nodes.extend(critical.iter().map(|c| (c.t, c.h - h_star, c.w.clone())));
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut found: Vec<Solution> = Vec::new();
    for k in 0..nodes.len() {
        let (t, e, ref w) = nodes[k];
        if e == 0.0 {
            found.push(polish(prob, g, t, w, tol)?);
        } else if k + 1 < nodes.len() && e * nodes[k + 1].1 < 0.0 {
            let (t, w) = bisect_height(prob, z, h_star, (t, e, w), nodes[k + 1].0, slice_tol)?;
            found.push(polish(prob, g, t, &w, tol)?);
        }
    }

    let tangency_tol = tol.max(1e-8 * (1.0 + h_star.abs()));
    for cp in critical {
        if (cp.h - h_star).abs() <= tangency_tol {
            let residual = linalg::norm2(&linalg::sub(&prob.eval(&cp.u), g));
            found.push(Solution {
                t: cp.t,
                u: cp.u,
                residual,
                index: 0,
                lambda: cp.lambda,
                critical: true,
            });
        }
    }

    let solutions = merge(found, 10.0 * tol.sqrt());
    for s in &solutions {
        let floor = 1e3 * f64::EPSILON * (linalg::norm2(&prob.linear_matrix().matvec(&s.u)) + linalg::norm2(&prob.map.eval(&prob.inner(&s.u))) + linalg::norm2(g));
        let allowed = if s.critical { tangency_tol.max(floor) } else { tol.max(floor) };
        if s.residual > allowed {
            return Err(Error::NoConvergence {
                what: format!("preimage at t = {}", s.t),
                iterations: 0,
                residual: s.residual,
            });
        }
    }
    let mut ordering = Vec::new();
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let (relation, min_gap) = compare(&solutions[i].u, &solutions[j].u);
            ordering.push(PairOrdering {
                first: i,
                second: j,
                relation,
                min_gap,
            });
        }
    }
    Ok(SolveReport {
        target: g.to_vec(),
        anchor: z.clone(),
        target_height: h_star,
        count: solutions.len(),
        solutions,
        ordering,
        verdict: cls.verdict,
        window_adequate,
        notes,
    })
}

fn bisect_height(prob: &FoldProblem, z: &[f64], h_star: f64, left: (f64, f64, &[f64]), right: f64, tol: f64) -> Result<(f64, Vec<f64>)> {
    let (mut a, ea, w0) = left;
    let mut b = right;
    let mut w = w0.to_vec();
    let mut best = (a, w.clone(), ea.abs());
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        let (h, wm) = height_at(prob, z, m, &w, tol)?;
        let em = h - h_star;
        if em.abs() < best.2 {
            best = (m, wm.clone(), em.abs());
        }
        if em == 0.0 {
            break;
        }
        if em.signum() == ea.signum() {
            a = m;
        } else {
            b = m;
        }
        w = wm;
    }
    Ok((best.0, best.1))
}

/// Full-space Newton on `F(u) = g`, keeping only steps that reduce the
/// residual; then the index of the result.
fn polish(prob: &FoldProblem, g: &[f64], t: f64, w: &[f64], tol: f64) -> Result<Solution> {
    let mut u = prob.split.compose(w, t);
    let mut r = linalg::sub(&prob.eval(&u), g);
    let mut res = linalg::norm2(&r);
    for _ in 0..10 {
        if res <= 1e-3 * tol {
            break;
        }
        let df = prob.jacobian(&u);
        let Ok(lu) = Lu::factor(&df, 1e-14 * df.max_abs()) else { break };
        let trial = linalg::sub(&u, &lu.solve(&r));
        let tr = linalg::sub(&prob.eval(&trial), g);
        let tres = linalg::norm2(&tr);
        if !(tres < res) {
            break;
        }
        u = trial;
        r = tr;
        res = tres;
    }
    let t = prob.split.height(&u);
    let (lambda, index, critical) = match index_at(prob, &u, 1e-10) {
        Ok(ix) => (ix.lambda_value, ix.index, false),
        Err(Error::CriticalPoint(l)) => (l, 0, true),
        Err(e) => return Err(e),
    };
    Ok(Solution {
        t,
        u,
        residual: res,
        index,
        lambda,
        critical,
    })
}

/// Collapses solutions closer than `radius` in `t`, preferring a tangency
/// point, then the smallest residual.
fn merge(mut found: Vec<Solution>, radius: f64) -> Vec<Solution> {
    found.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut out: Vec<Solution> = Vec::new();
    let mut cluster_start = f64::NEG_INFINITY;
    for s in found {
        match out.last_mut() {
            Some(last) if s.t - cluster_start <= radius => {
                let better = (s.critical && !last.critical) || (s.critical == last.critical && s.residual < last.residual);
                if better {
                    *last = s;
                }
            }
            _ => {
                cluster_start = s.t;
                out.push(s);
            }
        }
    }
    out
}
