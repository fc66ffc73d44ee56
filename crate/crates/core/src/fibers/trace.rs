use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::problem::FoldProblem;
use crate::fibers::slice::invert_slice;

/// Default slice tolerance.
pub const SLICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub slice_tol: f64,
    /// Probe half-step for the centred derivative of `h`, as a fraction of
    /// the grid spacing.
    pub probe_fraction: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            slice_tol: SLICE_TOL,
            probe_fraction: 1e-4,
        }
    }
}

/// One point `u(t) = w(t) + tφ` of a fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPoint {
    pub t: f64,
    pub w: Vec<f64>,
    pub h: f64,
    pub lambda: f64,
    pub residual: f64,
    pub observed_ratio: f64,
    pub(crate) eigvec: Vec<f64>,
}

impl FiberPoint {
    pub fn u(&self, prob: &FoldProblem) -> Vec<f64> {
        prob.split.compose(&self.w, self.t)
    }
}

/// Slice solve plus height and critical value at one `t`.
pub fn fiber_point(
    prob: &FoldProblem,
    z: &[f64],
    t: f64,
    w0: &[f64],
    tol: f64,
    eig_start: Option<&[f64]>,
) -> Result<FiberPoint> {
    let s = invert_slice(prob, z, t, w0, tol)?;
    let u = prob.split.compose(&s.w, t);
    let h = prob.height_of(&u);
    let (lambda, eigvec) = prob.lambda(&u, eig_start)?;
    Ok(FiberPoint {
        t,
        w: s.w,
        h,
        lambda,
        residual: s.residual,
        observed_ratio: s.observed_ratio,
        eigvec,
    })
}

/// Height alone, for probes.
pub(crate) fn height_at(prob: &FoldProblem, z: &[f64], t: f64, w0: &[f64], tol: f64) -> Result<(f64, Vec<f64>)> {
    let s = invert_slice(prob, z, t, w0, tol)?;
    let h = prob.height_of(&prob.split.compose(&s.w, t));
    Ok((h, s.w))
}

/// Sampled fiber through the anchor `z ∈ W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub z: Vec<f64>,
    pub t_samples: Vec<f64>,
    pub w_samples: Vec<Vec<f64>>,
    pub h_samples: Vec<f64>,
    pub lambda_samples: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Centred difference of `h` with a probe step well below the grid spacing.
    pub dh_samples: Vec<f64>,
    /// Largest step ratio over all slice solves.
    pub observed_ratio: f64,
    pub slice_tol: f64,
}

impl Fiber {
    pub fn len(&self) -> usize {
        self.t_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_samples.is_empty()
    }

    /// CSV with header `t,h,lambda,residual,w_0,...`.
    pub fn to_csv(&self) -> String {
        let n = self.z.len();
        let mut out = String::from("t,h,lambda,residual");
        for i in 0..n {
            out.push_str(&format!(",w_{i}"));
        }
        out.push('\n');
        for k in 0..self.len() {
            let mut row = vec![
                format!("{:.16e}", self.t_samples[k]),
                format!("{:.16e}", self.h_samples[k]),
                format!("{:.16e}", self.lambda_samples[k]),
                format!("{:.16e}", self.residuals[k]),
            ];
            row.extend(self.w_samples[k].iter().map(|x| format!("{x:.16e}")));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn trace_fiber(prob: &FoldProblem, z: &[f64], t_min: f64, t_max: f64, nt: usize) -> Result<Fiber> {
    trace_fiber_with(prob, z, t_min, t_max, nt, &TraceOptions::default())
}

/// Uniform grid in `t`, each slice warm-started from its predecessor.
pub fn trace_fiber_with(
    prob: &FoldProblem,
    z: &[f64],
    t_min: f64,
    t_max: f64,
    nt: usize,
    opts: &TraceOptions,
) -> Result<Fiber> {
    if !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(Error::InvalidFiber(format!("empty window [{t_min}, {t_max}]")));
    }
    if nt < 3 {
        return Err(Error::InvalidFiber(format!("need at least 3 samples (got {nt})")));
    }
    let n = prob.dim();
    let dt = (t_max - t_min) / (nt - 1) as f64;
    let probe = opts.probe_fraction * dt;
    let probe_tol = opts.slice_tol * 1e-3;
    let mut fiber = Fiber {
        z: z.to_vec(),
        t_samples: Vec::with_capacity(nt),
        w_samples: Vec::with_capacity(nt),
        h_samples: Vec::with_capacity(nt),
        lambda_samples: Vec::with_capacity(nt),
        residuals: Vec::with_capacity(nt),
        dh_samples: Vec::with_capacity(nt),
        observed_ratio: 0.0,
        slice_tol: opts.slice_tol,
    };
    let mut w = vec![0.0; n];
    let mut eig: Option<Vec<f64>> = None;
    for k in 0..nt {
        let t = if k == nt - 1 { t_max } else { t_min + k as f64 * dt };
        let p = fiber_point(prob, z, t, &w, opts.slice_tol, eig.as_deref())?;
        let (hp, _) = height_at(prob, z, t + probe, &p.w, probe_tol)?;
        let (hm, _) = height_at(prob, z, t - probe, &p.w, probe_tol)?;
        fiber.t_samples.push(t);
        fiber.h_samples.push(p.h);
        fiber.lambda_samples.push(p.lambda);
        fiber.residuals.push(p.residual);
        fiber.dh_samples.push((hp - hm) / (2.0 * probe));
        fiber.observed_ratio = fiber.observed_ratio.max(p.observed_ratio);
        w = p.w.clone();
        eig = Some(p.eigvec);
        fiber.w_samples.push(p.w);
    }
    Ok(fiber)
}
