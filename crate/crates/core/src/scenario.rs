//! Scenario configuration (TOML or JSON) and the pipelines run on it.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fibers::{
    classify_fold_with, critical_points_on_fiber, solve_preimages_with, trace_fiber_with, ClassifyOptions, Fiber,
    FoldClassification, FoldProblem, Form, SolveOptions, SolveReport, TraceOptions, Verdict, SLICE_TOL,
};
use crate::linalg::{self, DenseOperator};
use crate::nonlinear::{linear_map, make_convex_profile, nemitskii, nonlocal_map, vertical_sine_map, ConvexProfile};
use crate::operators::{build_model_operator, to_r_form, ModelOperator, ProblemSpec};
use crate::verify::{
    brute_force_oracle_with, check_m_hypotheses, check_r_hypotheses, HypothesisReport, OracleOptions, OracleReport, SearchBox,
    MAX_ORACLE_DIM,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearKind {
    Nemitskii,
    Nonlocal,
    VerticalSine,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: NonlinearKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<DenseOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub kind: Form,
    /// Shift of the transform for the r-form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub tol: f64,
    pub slice_tol: f64,
    pub seed: u64,
    /// Point whose `W` component anchors the traced fiber (origin if absent).
    pub anchor: Option<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Target heights relative to the fold height on the anchor fiber.
    pub fold_offsets: Vec<f64>,
    /// Number of targets `F(u)` with `u` drawn uniformly from the sample box.
    pub random_targets: usize,
    pub random_radius: f64,
    pub samples: usize,
    pub oracle_grid: usize,
    pub oracle_half_width: f64,
    pub slope_window: f64,
    pub slope_rtol: f64,
    pub expect: Option<Verdict>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            t_min: -200.0,
            t_max: 200.0,
            nt: 512,
            tol: 1e-9,
            slice_tol: SLICE_TOL,
            seed: 0,
            anchor: None,
            targets: Vec::new(),
            fold_offsets: Vec::new(),
            random_targets: 0,
            random_radius: 5.0,
            samples: 200,
            oracle_grid: 7,
            oracle_half_width: 150.0,
            slope_window: 0.2,
            slope_rtol: 0.1,
            expect: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub operator: ProblemSpec,
    pub nonlinearity: NonlinearitySpec,
    pub form: FormSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> f64 {
    1.0
}

/// Reads a `.json` file as JSON and anything else as TOML; referenced data
/// files are resolved relative to the config's directory and inlined.
pub fn load_config(path: &Path) -> std::result::Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let json = path.extension().is_some_and(|e| e == "json");
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, json, base)
}

pub fn parse_config(text: &str, json: bool, base: &Path) -> std::result::Result<ScenarioConfig, ConfigError> {
    let value: Value = if json {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
    } else {
        let t: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        serde_json::to_value(t).map_err(|e| ConfigError::Parse(e.to_string()))?
    };
    let Value::Object(mut top) = value else {
        return Err(ConfigError::Parse("top level must be a table".into()));
    };
    let mut issues = Vec::new();
    let known = ["operator", "nonlinearity", "form", "run", "output"];
    let unknown: Vec<String> = top.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect();
    for k in unknown {
        issues.push(format!("{k}: unknown section"));
        top.remove(&k);
    }
    let operator: Option<ProblemSpec> = section(&mut top, "operator", true, &mut issues);
    let nonlinearity: Option<NonlinearitySpec> = section(&mut top, "nonlinearity", true, &mut issues);
    let form: Option<FormSpec> = section(&mut top, "form", true, &mut issues);
    let run: Option<RunSpec> = section(&mut top, "run", false, &mut issues);
    let output: Option<OutputSpec> = section(&mut top, "output", false, &mut issues);
    let (Some(operator), Some(mut nonlinearity), Some(form)) = (operator, nonlinearity, form) else {
        return Err(ConfigError::Validation(issues));
    };
    if let Some(p) = &nonlinearity.matrix_path {
        match read_json::<DenseOperator>(&base.join(p)) {
            Ok(m) => nonlinearity.matrix = Some(m),
            Err(e) => issues.push(format!("nonlinearity.matrix_path: {e}")),
        }
    }
    if let Some(p) = &nonlinearity.weight_path {
        match read_json::<Vec<f64>>(&base.join(p)) {
            Ok(w) => nonlinearity.weight = Some(w),
            Err(e) => issues.push(format!("nonlinearity.weight_path: {e}")),
        }
    }
    let cfg = ScenarioConfig {
        operator,
        nonlinearity,
        form,
        run: run.unwrap_or_default(),
        output: output.unwrap_or_default(),
    };
    issues.extend(validate(&cfg));
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(issues))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> std::result::Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Deserializes one section, stripping and reporting each unknown key so
/// that all of them are named.
fn section<T: DeserializeOwned>(
    top: &mut serde_json::Map<String, Value>,
    name: &str,
    required: bool,
    issues: &mut Vec<String>,
) -> Option<T> {
    let Some(mut v) = top.remove(name) else {
        if required {
            issues.push(format!("{name}: missing section"));
        }
        return None;
    };
    loop {
        match serde_json::from_value::<T>(v.clone()) {
            Ok(t) => return Some(t),
            Err(e) => {
                let msg = e.to_string();
                let key = msg
                    .strip_prefix("unknown field `")
                    .and_then(|rest| rest.split('`').next())
                    .map(str::to_string);
                match (key, v.as_object_mut()) {
                    (Some(k), Some(obj)) if obj.contains_key(&k) => {
                        issues.push(format!("{name}.{k}: unknown key"));
                        obj.remove(&k);
                    }
                    _ => {
                        issues.push(format!("{name}: {msg}"));
                        return None;
                    }
                }
            }
        }
    }
}

pub fn validate(cfg: &ScenarioConfig) -> Vec<String> {
    let mut issues = Vec::new();
    let nl = &cfg.nonlinearity;
    match nl.kind {
        NonlinearKind::Nemitskii | NonlinearKind::Nonlocal => match (nl.a, nl.b) {
            (Some(a), Some(b)) => {
                if let Err(e) = make_convex_profile(a, b, nl.kappa) {
                    issues.push(format!("nonlinearity: {e}"));
                }
            }
            _ => issues.push("nonlinearity: slopes `a` and `b` are required".into()),
        },
        _ => {}
    }
    if matches!(nl.kind, NonlinearKind::Nonlocal | NonlinearKind::Linear) && nl.matrix.is_none() {
        issues.push("nonlinearity: `matrix` or `matrix_path` is required for this kind".into());
    }
    match cfg.form.kind {
        Form::RForm => {
            match cfg.form.gamma {
                Some(g) if g > 0.0 && g.is_finite() => {}
                Some(g) => issues.push(format!("form.gamma: must be positive (got {g})")),
                None => issues.push("form.gamma: required for the r-form".into()),
            }
            if nl.kind != NonlinearKind::Nemitskii {
                issues.push("form: the r-form is built for nemitskii nonlinearities only".into());
            }
        }
        Form::MForm => {
            if cfg.form.gamma.is_some() {
                issues.push("form.gamma: only meaningful for the r-form".into());
            }
        }
    }
    let r = &cfg.run;
    if !(r.t_min < r.t_max) || !r.t_min.is_finite() || !r.t_max.is_finite() {
        issues.push(format!("run.t_min/t_max: empty window [{}, {}]", r.t_min, r.t_max));
    }
    if r.nt < 3 {
        issues.push(format!("run.nt: need at least 3 samples (got {})", r.nt));
    }
    for (key, v) in [("tol", r.tol), ("slice_tol", r.slice_tol), ("random_radius", r.random_radius), ("oracle_half_width", r.oracle_half_width)] {
        if !(v > 0.0) || !v.is_finite() {
            issues.push(format!("run.{key}: must be positive (got {v})"));
        }
    }
    if !(r.slope_window > 0.0 && r.slope_window <= 0.5) {
        issues.push(format!("run.slope_window: must lie in (0, 0.5] (got {})", r.slope_window));
    }
    if !(r.slope_rtol > 0.0) {
        issues.push(format!("run.slope_rtol: must be positive (got {})", r.slope_rtol));
    }
    issues
}

/// A config turned into a certified operator and a fold problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: ModelOperator,
    pub problem: FoldProblem,
}

fn profile_of(nl: &NonlinearitySpec) -> Result<ConvexProfile> {
    match (nl.a, nl.b) {
        (Some(a), Some(b)) => make_convex_profile(a, b, nl.kappa),
        _ => Err(Error::SpecInvalid("profile slopes missing".into())),
    }
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let model = build_model_operator(&cfg.operator)?;
    let n = model.dim();
    let nl = &cfg.nonlinearity;
    let problem = match cfg.form.kind {
        Form::MForm => {
            let map = match nl.kind {
                NonlinearKind::Nemitskii => nemitskii(profile_of(nl)?, n)?,
                NonlinearKind::Nonlocal => {
                    let a = nl.matrix.clone().ok_or_else(|| Error::SpecInvalid("nonlocal matrix missing".into()))?;
                    let w = nl.weight.clone().unwrap_or_else(|| vec![1.0; n]);
                    nonlocal_map(&a, &w, profile_of(nl)?)?
                }
                NonlinearKind::VerticalSine => vertical_sine_map(&model.triple.phi, &model.triple.phi_star, model.lambda_m())?,
                NonlinearKind::Linear => linear_map(nl.matrix.as_ref().ok_or_else(|| Error::SpecInvalid("linear matrix missing".into()))?),
            };
            FoldProblem::m_form(model.clone(), map)?
        }
        Form::RForm => {
            let gamma = cfg.form.gamma.ok_or_else(|| Error::SpecInvalid("gamma missing".into()))?;
            let r = to_r_form(&model, gamma)?;
            let profile = profile_of(nl)?.to_r_form(model.lambda_m(), gamma)?;
            FoldProblem::r_form(r, nemitskii(profile, n)?)?
        }
    };
    Ok(Scenario {
        config: cfg.clone(),
        model,
        problem,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub operator: String,
    pub dim: usize,
    pub self_adjoint: bool,
    pub lambda_m: f64,
    pub mu_m: f64,
    pub phi: Vec<f64>,
    pub phi_star: Vec<f64>,
    pub form: Form,
    pub gamma: Option<f64>,
    /// Spectral radius and second eigenvalue of the transformed operator.
    pub transformed: Option<(f64, f64)>,
}

impl Scenario {
    pub fn spectrum(&self) -> SpectrumReport {
        let operator = serde_json::to_value(&self.config.operator)
            .ok()
            .and_then(|v| v.get("kind").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_default();
        let transformed = match &self.problem.linear {
            crate::fibers::LinearPart::R(r) => Some((r.triple.primary_value, r.triple.gap_value)),
            crate::fibers::LinearPart::M(_) => None,
        };
        SpectrumReport {
            operator,
            dim: self.model.dim(),
            self_adjoint: self.model.self_adjoint,
            lambda_m: self.model.lambda_m(),
            mu_m: self.model.mu_m(),
            phi: self.model.triple.phi.clone(),
            phi_star: self.model.triple.phi_star.clone(),
            form: self.problem.form,
            gamma: self.config.form.gamma,
            transformed,
        }
    }

    fn trace_opts(&self) -> TraceOptions {
        TraceOptions {
            slice_tol: self.config.run.slice_tol,
            ..Default::default()
        }
    }

    pub fn classify_opts(&self) -> ClassifyOptions {
        ClassifyOptions {
            slope_window: self.config.run.slope_window,
            slope_rtol: self.config.run.slope_rtol,
            ..Default::default()
        }
    }

    pub fn solve_opts(&self) -> SolveOptions {
        SolveOptions {
            trace: self.trace_opts(),
            classify: self.classify_opts(),
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.config.run.t_min, self.config.run.t_max)
    }

    pub fn anchor(&self) -> Vec<f64> {
        match &self.config.run.anchor {
            Some(a) => self.problem.split.project_w(a),
            None => vec![0.0; self.problem.dim()],
        }
    }

    pub fn fiber(&self) -> Result<Fiber> {
        let (lo, hi) = self.window();
        trace_fiber_with(&self.problem, &self.anchor(), lo, hi, self.config.run.nt, &self.trace_opts())
    }

    pub fn classify(&self, fiber: &Fiber) -> FoldClassification {
        classify_fold_with(fiber, &self.classify_opts())
    }

    /// Height of the fold on `fiber`: the largest critical height for a
    /// downward fold, the smallest otherwise.
    pub fn fold_height(&self, fiber: &Fiber, verdict: Verdict) -> Result<f64> {
        let cps = critical_points_on_fiber(&self.problem, fiber, ClassifyOptions::default().lambda_tol)?;
        let hs = cps.iter().map(|c| c.h);
        let h = if verdict == Verdict::FoldUp {
            hs.fold(f64::INFINITY, f64::min)
        } else {
            hs.fold(f64::NEG_INFINITY, f64::max)
        };
        if h.is_finite() {
            Ok(h)
        } else {
            Err(Error::InvalidFiber("no critical point on the anchor fiber".into()))
        }
    }

    /// Explicit targets, fold-relative targets on the anchor fiber, then
    /// seeded random images `F(u)`.
    pub fn targets(&self, fiber: &Fiber, verdict: Verdict) -> Result<Vec<Vec<f64>>> {
        let run = &self.config.run;
        let mut out = run.targets.clone();
        if !run.fold_offsets.is_empty() {
            let hc = self.fold_height(fiber, verdict)?;
            let z = self.anchor();
            for d in &run.fold_offsets {
                out.push(linalg::add_scaled(&z, hc + d, &self.problem.split.phi));
            }
        }
        out.extend(random_images(&self.problem, run.random_targets, run.random_radius, run.seed));
        Ok(out)
    }

    pub fn solve(&self, targets: &[Vec<f64>]) -> Vec<Result<SolveReport>> {
        let opts = self.solve_opts();
        let run = &self.config.run;
        targets
            .par_iter()
            .map(|g| solve_preimages_with(&self.problem, g, self.window(), run.nt, run.tol, &opts))
            .collect()
    }

    pub fn hypotheses(&self) -> Result<HypothesisReport> {
        let run = &self.config.run;
        match self.problem.form {
            Form::MForm => check_m_hypotheses(&self.problem, run.samples, run.seed),
            Form::RForm => check_r_hypotheses(&self.problem, None, run.samples, run.seed),
        }
    }

    /// Oracle comparisons for each target; empty above the oracle's dimension.
    pub fn oracle(&self, targets: &[Vec<f64>]) -> Result<Vec<OracleReport>> {
        if self.problem.dim() > MAX_ORACLE_DIM {
            return Ok(Vec::new());
        }
        let run = &self.config.run;
        let bx = SearchBox::cube(self.problem.dim(), run.oracle_half_width);
        let opts = OracleOptions {
            window: Some(self.window()),
            nt: run.nt,
            tol: run.tol,
        };
        targets
            .iter()
            .map(|g| brute_force_oracle_with(&self.problem, g, &bx, run.oracle_grid, &opts))
            .collect()
    }
}

/// `F(u)` for `count` points drawn uniformly from `[-radius, radius]ⁿ`.
pub fn random_images(prob: &FoldProblem, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..prob.dim()).map(|_| rng.gen_range(-radius..radius)).collect();
            prob.eval(&u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[operator]
kind = "dirichlet_laplacian_1d"
n = 3

[nonlinearity]
kind = "nemitskii"
a = 5.0
b = 15.0

[form]
kind = "m_form"
"#;

    fn parse(text: &str) -> std::result::Result<ScenarioConfig, ConfigError> {
        parse_config(text, false, Path::new("."))
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.run, RunSpec::default());
        assert_eq!(c.nonlinearity.kappa, 1.0);
        let s = build_scenario(&c).unwrap();
        assert!((s.problem.contraction.unwrap() - 5.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn json_is_equivalent() {
        let c = parse(MINIMAL).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config(&json, true, Path::new(".")).unwrap(), c);
    }

    #[test]
    fn every_unknown_key_is_named() {
        let text = format!("{MINIMAL}\n[run]\nfoo = 1\nbar = 2\nnt = 64\n[extra]\nx = 1\n");
        let text = text.replace("n = 3", "n = 3\nspeed = 2");
        let Err(ConfigError::Validation(issues)) = parse(&text) else { panic!() };
        let joined = issues.join("\n");
        for k in ["run.foo", "run.bar", "operator.speed", "extra"] {
            assert!(joined.contains(k), "{joined}");
        }
    }

    #[test]
    fn reversed_slopes_are_rejected() {
        let text = MINIMAL.replace("a = 5.0", "a = 15.0").replace("b = 15.0", "b = 5.0");
        let Err(ConfigError::Validation(issues)) = parse(&text) else { panic!() };
        assert!(issues.iter().any(|i| i.contains("slopes")), "{issues:?}");
    }

    #[test]
    fn toml_errors_carry_location() {
        let Err(ConfigError::Parse(msg)) = parse("[operator\nkind = 1") else { panic!() };
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn missing_data_file_is_reported() {
        let text = MINIMAL.replace("kind = \"nemitskii\"", "kind = \"nonlocal\"\nmatrix_path = \"nope.json\"");
        let Err(ConfigError::Validation(issues)) = parse(&text) else { panic!() };
        assert!(issues.iter().any(|i| i.starts_with("nonlinearity.matrix_path")));
    }
}
