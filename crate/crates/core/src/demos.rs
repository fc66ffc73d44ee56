//! Built-in scenarios, each at full size and in a variant of dimension at
//! most three (two-dimensional base for the coupled system, so four).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::{Fiber, FoldClassification, Form, SolveReport, Verdict};
use crate::linalg::DenseOperator;
use crate::operators::{build_model_operator, Coefficient, ProblemSpec};
use crate::scenario::{build_scenario, FormSpec, NonlinearKind, NonlinearitySpec, OutputSpec, RunSpec, Scenario, ScenarioConfig};
use crate::verify::HypothesisReport;

pub const DEMO_NAMES: [&str; 6] = [
    "ap_fold",
    "dolph_hammerstein",
    "sine_nonsimple",
    "bnv_nonselfadjoint",
    "coupled_system",
    "nonlocal_gradient",
];

/// Coupling strength of the coupled demo.
pub const COUPLING: f64 = 5.0;

fn dirichlet(n: usize) -> ProblemSpec {
    ProblemSpec::DirichletLaplacian1d {
        n,
        x_min: 0.0,
        x_max: 1.0,
        potential: Coefficient::Constant(0.0),
    }
}

fn profile(kind: NonlinearKind, a: f64, b: f64) -> NonlinearitySpec {
    NonlinearitySpec {
        kind,
        a: Some(a),
        b: Some(b),
        kappa: 1.0,
        matrix: None,
        matrix_path: None,
        weight: None,
        weight_path: None,
    }
}

fn m_form() -> FormSpec {
    FormSpec {
        kind: Form::MForm,
        gamma: None,
    }
}

/// `I + ε J/n` with `J` the all-ones matrix.
pub fn nonlocal_matrix(n: usize, eps: f64) -> DenseOperator {
    DenseOperator::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 } + eps / n as f64)
}

/// Config of a named demo; `small` selects the low-dimensional variant.
pub fn demo_config(name: &str, small: bool) -> Result<ScenarioConfig> {
    let n = if small { 3 } else { 63 };
    let run = RunSpec {
        nt: if small { 256 } else { 512 },
        ..Default::default()
    };
    let cfg = match name {
        "ap_fold" => ScenarioConfig {
            operator: dirichlet(n),
            nonlinearity: profile(NonlinearKind::Nemitskii, 5.0, 15.0),
            form: m_form(),
            run: RunSpec {
                fold_offsets: vec![-1.0, 0.0, 1.0],
                expect: Some(Verdict::FoldDown),
                ..run
            },
            output: OutputSpec::default(),
        },
        "dolph_hammerstein" => ScenarioConfig {
            operator: dirichlet(n),
            nonlinearity: profile(NonlinearKind::Nemitskii, 15.0, 30.0),
            form: m_form(),
            run: RunSpec {
                random_targets: 10,
                expect: Some(Verdict::Homeomorphism),
                ..run
            },
            output: OutputSpec::default(),
        },
        "sine_nonsimple" => {
            let four_pi = 4.0 * std::f64::consts::PI;
            ScenarioConfig {
                operator: dirichlet(n),
                nonlinearity: NonlinearitySpec {
                    a: None,
                    b: None,
                    ..profile(NonlinearKind::VerticalSine, 0.0, 0.0)
                },
                form: m_form(),
                run: RunSpec {
                    t_min: -four_pi,
                    t_max: four_pi,
                    oracle_half_width: four_pi + 1.0,
                    oracle_grid: 15,
                    expect: Some(Verdict::NonSimple),
                    ..run
                },
                output: OutputSpec::default(),
            }
        }
        "bnv_nonselfadjoint" => {
            let n = if small { 3 } else { 31 };
            ScenarioConfig {
                operator: ProblemSpec::Nondivergence1d {
                    n,
                    x_min: 0.0,
                    x_max: 1.0,
                    diffusion: Coefficient::Constant(1.0),
                    drift: Coefficient::Constant(5.0),
                    potential: Coefficient::Constant(0.0),
                },
                nonlinearity: profile(NonlinearKind::Nemitskii, 6.0, 30.0),
                form: FormSpec {
                    kind: Form::RForm,
                    gamma: Some(20.0),
                },
                run: RunSpec {
                    fold_offsets: vec![-1.0, 0.0, 1.0],
                    expect: Some(Verdict::FoldDown),
                    ..run
                },
                output: OutputSpec::default(),
            }
        }
        "coupled_system" => {
            let base = if small { 2 } else { 31 };
            ScenarioConfig {
                operator: ProblemSpec::CoupledSystem {
                    base: Box::new(dirichlet(base)),
                    alpha: COUPLING,
                },
                nonlinearity: profile(NonlinearKind::Nemitskii, 0.0, 12.0),
                form: m_form(),
                run: RunSpec {
                    fold_offsets: vec![-1.0, 0.0, 1.0],
                    expect: Some(Verdict::FoldDown),
                    ..run
                },
                output: OutputSpec::default(),
            }
        }
        "nonlocal_gradient" => {
            let n = if small { 3 } else { 31 };
            ScenarioConfig {
                operator: dirichlet(n),
                nonlinearity: NonlinearitySpec {
                    matrix: Some(nonlocal_matrix(n, 0.05)),
                    weight: Some(vec![1.0; n]),
                    ..profile(NonlinearKind::Nonlocal, 5.0, 15.0)
                },
                form: m_form(),
                run: RunSpec {
                    fold_offsets: vec![-1.0, 0.0, 1.0],
                    expect: Some(Verdict::FoldDown),
                    ..run
                },
                output: OutputSpec::default(),
            }
        }
        other => return Err(Error::SpecInvalid(format!("unknown demo `{other}` (known: {})", DEMO_NAMES.join(", ")))),
    };
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    pub name: String,
    pub scenario: Scenario,
    pub fiber: Fiber,
    pub classification: FoldClassification,
    pub targets: Vec<Vec<f64>>,
    pub solves: Vec<SolveReport>,
    pub hypotheses: HypothesisReport,
    pub checks: Vec<Check>,
}

impl DemoRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.solves.iter().map(|s| s.count).collect()
    }
}

fn check(checks: &mut Vec<Check>, name: &str, passed: bool, detail: String) {
    checks.push(Check {
        name: name.into(),
        passed,
        detail,
    });
}

pub fn run_demo(name: &str, small: bool) -> Result<DemoRun> {
    run_config(name, &demo_config(name, small)?)
}

/// Runs the full pipeline of a demo config and evaluates its canned checks.
pub fn run_config(name: &str, cfg: &ScenarioConfig) -> Result<DemoRun> {
    let scenario = build_scenario(cfg)?;
    let fiber = scenario.fiber()?;
    let classification = scenario.classify(&fiber);
    let verdict = classification.verdict;
    let mut checks = Vec::new();
    if let Some(want) = cfg.run.expect {
        check(&mut checks, "verdict", verdict == want, format!("{} (expected {})", verdict.as_str(), want.as_str()));
    }
    check(
        &mut checks,
        "handr",
        classification.handr_mismatches == 0,
        format!("{} mismatches in {} checked samples", classification.handr_mismatches, classification.handr_checked),
    );

    let targets = scenario.targets(&fiber, verdict)?;
    let solves = scenario.solve(&targets).into_iter().collect::<Result<Vec<_>>>()?;
    let hypotheses = scenario.hypotheses()?;
    let lm = scenario.model.lambda_m();

    match name {
        "ap_fold" | "coupled_system" | "nonlocal_gradient" | "bnv_nonselfadjoint" => {
            let counts: Vec<usize> = solves.iter().map(|s| s.count).collect();
            check(&mut checks, "counts", counts == [2, 1, 0], format!("{counts:?} at fold offsets -1, 0, +1"));
        }
        "dolph_hammerstein" => {
            let bad = solves.iter().filter(|s| s.count != 1).count();
            check(&mut checks, "unique", bad == 0, format!("{bad} of {} targets without exactly one preimage", solves.len()));
        }
        _ => {}
    }
    match name {
        "ap_fold" => {
            let (a, b) = (cfg.nonlinearity.a.unwrap_or(0.0), cfg.nonlinearity.b.unwrap_or(0.0));
            let (left, right) = classification.end_slopes;
            let ok = ((left - (lm - a)) / (lm - a)).abs() <= 0.05 && ((right - (lm - b)) / (lm - b)).abs() <= 0.05;
            check(&mut checks, "slopes", ok, format!("({left:.4}, {right:.4}) vs ({:.4}, {:.4})", lm - a, lm - b));
        }
        "sine_nonsimple" => {
            let err = fiber
                .t_samples
                .iter()
                .zip(&fiber.h_samples)
                .map(|(t, h)| (h - t * t.sin()).abs())
                .fold(0.0, f64::max);
            check(&mut checks, "height", err <= 1e-8, format!("max |h - t sin t| = {err:.3e}"));
            let z = scenario.anchor();
            let g = crate::linalg::add_scaled(&z, 1.0, &scenario.problem.split.phi);
            let run = &cfg.run;
            let r = crate::fibers::solve_preimages_with(&scenario.problem, &g, scenario.window(), run.nt, run.tol, &scenario.solve_opts())?;
            check(&mut checks, "preimages_of_one", r.count >= 3, format!("{} preimages of height 1", r.count));
        }
        "coupled_system" => {
            if let ProblemSpec::CoupledSystem { base, alpha } = &cfg.operator {
                let base_lm = build_model_operator(base)?.lambda_m();
                let err = (lm - (base_lm - alpha)).abs();
                check(&mut checks, "shifted_ground_value", err <= 1e-9, format!("|λ - (λ_base - α)| = {err:.3e}"));
            }
        }
        "bnv_nonselfadjoint" => {
            check(&mut checks, "hypotheses", hypotheses.passed, hypotheses.summary.clone());
        }
        _ => {}
    }
    Ok(DemoRun {
        name: name.into(),
        scenario,
        fiber,
        classification,
        targets,
        solves,
        hypotheses,
        checks,
    })
}
