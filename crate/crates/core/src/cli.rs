//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 when a report fails, 2 on usage or configuration errors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::demos::{demo_config, run_config, DEMO_NAMES};
use crate::error::Error;
use crate::operators::verify_m_special;
use crate::scenario::{build_scenario, load_config, Scenario, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "foldmap", version, about = "Fibers, folds and preimage counts of nonlinear perturbations of positive operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certified ground state and gap of the linear part.
    Spectrum(Common),
    /// Trace the fiber through the configured anchor.
    Fiber(Common),
    /// Solve `F(u) = g` for each configured target.
    Solve(Common),
    /// Trace and classify the anchor fiber.
    Classify(Common),
    /// Sampled hypothesis checks and, at dimension ≤ 3, the brute-force oracle.
    Verify(Common),
    /// Run a built-in scenario end to end.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(DEMO_NAMES))]
        name: String,
        /// Use the low-dimensional variant.
        #[arg(long)]
        small: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fiber samples.
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long = "t-min", allow_negative_numbers = true)]
    t_min: Option<f64>,
    #[arg(long = "t-max", allow_negative_numbers = true)]
    t_max: Option<f64>,
    /// Solution residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        let r = &mut cfg.run;
        if let Some(s) = self.seed {
            r.seed = s;
        }
        if let Some(n) = self.nt {
            r.nt = n;
        }
        if let Some(t) = self.t_min {
            r.t_min = t;
        }
        if let Some(t) = self.t_max {
            r.t_max = t;
        }
        if let Some(t) = self.tol {
            r.tol = t;
        }
    }
}

enum Failure {
    Usage(String),
    Report(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Report(e.to_string())
    }
}

/// Emitted files, in order, with their digests.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        self.files.push((name.to_string(), hex_digest(bytes)));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Report(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = match &cli.command {
        Command::Demo { common, .. } => common.jobs,
        Command::Spectrum(c) | Command::Fiber(c) | Command::Solve(c) | Command::Classify(c) | Command::Verify(c) => c.jobs,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Report(msg)) => {
            eprintln!("failed: {msg}");
            1
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let path = common.config.as_ref().ok_or_else(|| Failure::Usage("--config is required".into()))?;
    let mut cfg = load_config(path).map_err(|e| Failure::Usage(e.to_string()))?;
    common.apply(&mut cfg);
    let issues = crate::scenario::validate(&cfg);
    if !issues.is_empty() {
        return Err(Failure::Usage(format!("invalid configuration:\n  {}", issues.join("\n  "))));
    }
    Ok(cfg)
}

fn build(cfg: &ScenarioConfig, context: &str) -> Result<Scenario, Failure> {
    build_scenario(cfg).map_err(|e| Failure::Usage(format!("{context}: {e}")))
}

fn out_dir(common: &Common, cfg: &ScenarioConfig) -> Result<PathBuf, Failure> {
    let dir = common.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn context(common: &Common) -> String {
    common.config.as_deref().map_or_else(|| "scenario".into(), |p: &Path| format!("scenario {}", p.display()))
}

fn execute(command: &Command) -> Result<(), Failure> {
    let start = Instant::now();
    let (name, common, cfg) = match command {
        Command::Demo { name, small, common } => {
            let mut cfg = demo_config(name, *small).map_err(|e| Failure::Usage(e.to_string()))?;
            common.apply(&mut cfg);
            (format!("demo {name}"), common, cfg)
        }
        Command::Spectrum(c) => ("spectrum".to_string(), c, load(c)?),
        Command::Fiber(c) => ("fiber".to_string(), c, load(c)?),
        Command::Solve(c) => ("solve".to_string(), c, load(c)?),
        Command::Classify(c) => ("classify".to_string(), c, load(c)?),
        Command::Verify(c) => ("verify".to_string(), c, load(c)?),
    };
    let mut out = Outputs {
        dir: out_dir(common, &cfg)?,
        files: Vec::new(),
    };
    let ctx = match command {
        Command::Demo { name, .. } => format!("demo {name}"),
        _ => context(common),
    };
    let result = match command {
        Command::Demo { name, .. } => demo(name, &cfg, &mut out, &ctx),
        _ => {
            let sc = build(&cfg, &ctx)?;
            match command {
                Command::Spectrum(_) => out.json("triple.json", &sc.spectrum()),
                Command::Fiber(_) => fiber(&sc, &mut out, &ctx),
                Command::Classify(_) => classify(&sc, &mut out, &ctx),
                Command::Solve(_) => solve(&sc, &mut out, &ctx),
                Command::Verify(_) => verify(&sc, &mut out, &ctx),
                Command::Demo { .. } => unreachable!(),
            }
        }
    };
    let files: Vec<_> = out.files.iter().map(|(n, d)| json!({ "name": n, "sha256": d })).collect();
    let manifest = json!({
        "command": name,
        "config": cfg,
        "versions": { "foldmap": env!("CARGO_PKG_VERSION") },
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "status": match &result { Ok(()) => "ok".to_string(), Err(Failure::Report(m)) | Err(Failure::Usage(m)) => m.clone() },
        "files": files,
    });
    out.json("manifest.json", &manifest)?;
    result
}

fn with_context<T>(ctx: &str, r: crate::error::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Report(format!("{ctx}: {e}")))
}

fn fiber(sc: &Scenario, out: &mut Outputs, ctx: &str) -> Result<(), Failure> {
    let f = with_context(ctx, sc.fiber())?;
    out.write("fiber.csv", f.to_csv().as_bytes())
}

fn expect_verdict(sc: &Scenario, got: crate::fibers::Verdict, ctx: &str) -> Result<(), Failure> {
    match sc.config.run.expect {
        Some(want) if want != got => Err(Failure::Report(format!("{ctx}: classified {} but {} was expected", got.as_str(), want.as_str()))),
        _ => Ok(()),
    }
}

fn classify(sc: &Scenario, out: &mut Outputs, ctx: &str) -> Result<(), Failure> {
    let f = with_context(ctx, sc.fiber())?;
    out.write("fiber.csv", f.to_csv().as_bytes())?;
    let c = sc.classify(&f);
    out.json("classify.json", &c)?;
    expect_verdict(sc, c.verdict, ctx)
}

fn solve(sc: &Scenario, out: &mut Outputs, ctx: &str) -> Result<(), Failure> {
    let f = with_context(ctx, sc.fiber())?;
    let c = sc.classify(&f);
    let targets = with_context(ctx, sc.targets(&f, c.verdict))?;
    if targets.is_empty() {
        return Err(Failure::Usage(format!("{ctx}: no targets (set run.targets, run.fold_offsets or run.random_targets)")));
    }
    let reports: Vec<_> = sc
        .solve(&targets)
        .into_iter()
        .map(|r| match r {
            Ok(rep) => json!(rep),
            Err(e) => json!({ "error": e.to_string() }),
        })
        .collect();
    let failed = reports.iter().filter(|r| r.get("error").is_some()).count();
    out.json("solve.json", &reports)?;
    if failed > 0 {
        return Err(Failure::Report(format!("{ctx}: {failed} of {} targets failed", reports.len())));
    }
    Ok(())
}

fn verify(sc: &Scenario, out: &mut Outputs, ctx: &str) -> Result<(), Failure> {
    let hyp = with_context(ctx, sc.hypotheses())?;
    let f = with_context(ctx, sc.fiber())?;
    let c = sc.classify(&f);
    let mut targets = with_context(ctx, sc.targets(&f, c.verdict))?;
    if targets.is_empty() {
        let run = &sc.config.run;
        targets = crate::scenario::random_images(&sc.problem, 10, run.random_radius, run.seed);
    }
    let oracle = with_context(ctx, sc.oracle(&targets))?;
    let lm = sc.model.lambda_m();
    let probes = [lm - 0.01 * (1.0 + lm.abs()), lm - 1.0, lm - 10.0];
    let m_special = sc.model.self_adjoint.then(|| verify_m_special(&sc.model, &probes, 1e-12));
    out.json(
        "verify.json",
        &json!({ "hypotheses": [hyp], "m_special": m_special, "oracle": oracle }),
    )?;
    let mismatches = oracle.iter().filter(|o| !o.matched).count();
    let special_ok = m_special.as_ref().is_none_or(|m| m.passed);
    if !hyp.passed || mismatches > 0 || !special_ok {
        return Err(Failure::Report(format!(
            "{ctx}: {}; {mismatches} oracle mismatches; resolvent check {}",
            hyp.summary,
            if special_ok { "passed" } else { "failed" }
        )));
    }
    Ok(())
}

fn demo(name: &str, cfg: &ScenarioConfig, out: &mut Outputs, ctx: &str) -> Result<(), Failure> {
    let run = with_context(ctx, run_config(name, cfg))?;
    out.json("triple.json", &run.scenario.spectrum())?;
    out.write("fiber.csv", run.fiber.to_csv().as_bytes())?;
    out.json("classify.json", &run.classification)?;
    out.json("solve.json", &run.solves)?;
    out.json("verify.json", &json!({ "hypotheses": [&run.hypotheses], "checks": &run.checks }))?;
    for c in &run.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<_> = run.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Report(format!("{ctx}: failed checks {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["foldmap", "bogus"]), 2);
        assert_eq!(run(["foldmap", "demo", "nope"]), 2);
        assert_eq!(run(["foldmap", "spectrum"]), 2);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(hex_digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
