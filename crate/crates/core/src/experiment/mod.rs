//! Experiment orchestration for the command-line front end: configuration,
//! seeding, artifact emission and the run manifest.
//!
//! Exit codes: 0 when every check passes, 1 on a hypothesis or bound
//! violation, 2 on a usage or configuration error.

pub mod config;
pub mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::audit::{audit, AssumptionReport};
use crate::basis::GaussianSpace;
use crate::chaos::ChaosVector;
use crate::error::{Error, Result};
use crate::limit::{xi_l2_norm, xi_series, LimitDensityJson, XiNorms};
use crate::llt::{rate_sweep, RateConstant, RateTable, SweepConfig};
use crate::measures::shift_mixture;
use crate::output::sha256_hex;
use crate::rng::derive_seed;
use crate::sde::{
    assumption3_estimate, novikov_estimate, simulate_drift_shifts, Assumption3Report, NovikovReport, PathGrid,
};

use config::{matrix, DensityExtras, ExperimentConfig, LltSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Written into every artifact produced under `--override-audit` when the
/// audit failed.
pub const OVERRIDE_WATERMARK: &str =
    "ASSUMPTIONS NOT SATISFIED: produced with --override-audit; results carry no guarantee";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Audit,
    Llt,
    Validate,
    Sde,
    BuildXi,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::Llt => "llt",
            Command::Validate => "validate",
            Command::Sde => "sde",
            Command::BuildXi => "build-xi",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub override_audit: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// One line per check or failure, for the terminal.
    pub messages: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

/// Exit code for an error surfaced by a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AssumptionViolation { .. }
        | Error::BoundViolation { .. }
        | Error::Validation(_)
        | Error::NotNormalized(_)
        | Error::NotSymmetric { .. }
        | Error::EnvelopeBreach { .. }
        | Error::NonFiniteDrift { .. }
        | Error::NovikovOverflow { .. } => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

#[derive(Serialize)]
struct StageTime {
    stage: String,
    seconds: f64,
}

#[derive(Serialize)]
struct OutputDigest {
    file: String,
    sha256: String,
}

/// Everything needed to reproduce a run; `outputs` carries the digests that
/// identical re-runs must match.
#[derive(Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: Value,
    master_seed: u64,
    derived_seeds: BTreeMap<&'static str, u64>,
    threads: Option<usize>,
    override_audit: bool,
    exit_code: i32,
    stages: Vec<StageTime>,
    outputs: Vec<OutputDigest>,
}

struct Run {
    out_dir: PathBuf,
    stages: Vec<StageTime>,
    outputs: Vec<(String, String)>,
    messages: Vec<String>,
    master_seed: u64,
    override_audit: bool,
}

impl Run {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.out_dir.join(name), contents)?;
        self.outputs.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.stages.push(StageTime { stage: name.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    fn say(&mut self, line: impl Into<String>) {
        self.messages.push(line.into());
    }
}

fn seeds(master: u64) -> BTreeMap<&'static str, u64> {
    ["sde", "l1-distance", "validate"].into_iter().map(|l| (l, derive_seed(master, l))).collect()
}

/// Loads the configuration, runs `command` and writes artifacts plus
/// `manifest.json` into `options.out_dir`.
pub fn run(command: Command, config_path: &Path, options: &RunOptions) -> RunOutcome {
    let cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return RunOutcome { exit_code: EXIT_USAGE, messages: vec![e.to_string()], outputs: vec![] },
    };
    run_config(command, cfg, options)
}

pub fn run_config(command: Command, mut cfg: ExperimentConfig, options: &RunOptions) -> RunOutcome {
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    if let Err(e) = fs::create_dir_all(&options.out_dir) {
        return RunOutcome {
            exit_code: EXIT_USAGE,
            messages: vec![format!("cannot create {}: {e}", options.out_dir.display())],
            outputs: vec![],
        };
    }
    let pool = match options.threads {
        Some(0) => {
            return RunOutcome {
                exit_code: EXIT_USAGE,
                messages: vec!["--threads must be positive".into()],
                outputs: vec![],
            }
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
        None => None,
    };
    let mut run = Run {
        out_dir: options.out_dir.clone(),
        stages: Vec::new(),
        outputs: Vec::new(),
        messages: Vec::new(),
        master_seed: cfg.seed,
        override_audit: options.override_audit,
    };
    let body = |run: &mut Run| -> Result<i32> {
        match command {
            Command::Audit => cmd_audit(run, &cfg),
            Command::Llt => cmd_llt(run, &cfg),
            Command::Validate => cmd_validate(run, &cfg),
            Command::Sde => cmd_sde(run, &cfg),
            Command::BuildXi => cmd_build_xi(run, &cfg),
        }
    };
    let result = match &pool {
        Some(p) => p.install(|| body(&mut run)),
        None => body(&mut run),
    };
    let exit_code = match result {
        Ok(code) => code,
        Err(e) => {
            run.say(format!("error: {e}"));
            exit_code(&e)
        }
    };
    let manifest = RunManifest {
        tool: "wick-llt",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config: serde_json::to_value(&cfg).unwrap_or(Value::Null),
        master_seed: cfg.seed,
        derived_seeds: seeds(cfg.seed),
        threads: options.threads,
        override_audit: options.override_audit,
        exit_code,
        stages: std::mem::take(&mut run.stages),
        outputs: run.outputs.iter().map(|(f, h)| OutputDigest { file: f.clone(), sha256: h.clone() }).collect(),
    };
    let mut outputs: Vec<PathBuf> = run.outputs.iter().map(|(f, _)| options.out_dir.join(f)).collect();
    let manifest_path = options.out_dir.join("manifest.json");
    match serde_json::to_string_pretty(&manifest) {
        Ok(text) if fs::write(&manifest_path, format!("{text}\n")).is_ok() => outputs.push(manifest_path),
        _ => run.say("warning: could not write manifest.json"),
    }
    RunOutcome { exit_code, messages: run.messages, outputs }
}

fn verdict_lines(report: &AssumptionReport) -> Vec<String> {
    report
        .verdicts
        .iter()
        .map(|v| {
            format!(
                "{} {} {}: measured {:e}, threshold {:e}",
                if v.pass { "PASS" } else { "FAIL" },
                v.assumption,
                v.quantity,
                v.measured,
                v.threshold
            )
        })
        .collect()
}

#[derive(Serialize)]
struct AuditOutput<'a> {
    report: &'a AssumptionReport,
    extras: &'a DensityExtras,
}

fn build_density(run: &mut Run, cfg: &ExperimentConfig) -> Result<(ChaosVector, DensityExtras)> {
    let space = cfg.require_space()?.build()?;
    let density = cfg.require_density()?;
    let seed = run.master_seed;
    run.stage("density", |_| density.build(&space, seed))
}

fn cmd_audit(run: &mut Run, cfg: &ExperimentConfig) -> Result<i32> {
    let (f, extras) = build_density(run, cfg)?;
    let grid = cfg.grid_for(f.dimension());
    let report = run.stage("audit", |_| audit(&f, &grid))?;
    for line in verdict_lines(&report) {
        run.say(line);
    }
    if let Some(v) = extras.shift_variance_trace {
        run.say(format!("shift variance trace (sufficient condition < 1): {v:e}"));
    }
    run.write_json("audit.json", &AuditOutput { report: &report, extras: &extras })?;
    Ok(if report.all_pass { EXIT_PASS } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct LltSummary<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    watermark: Option<&'static str>,
    constant: Option<&'a RateConstant>,
    c: f64,
    n0: usize,
    beta: f64,
    nonincreasing: bool,
    secant_slope: Option<f64>,
    bound_violation: Option<usize>,
    audit: &'a AssumptionReport,
    extras: &'a DensityExtras,
    config: &'a LltSpec,
}

fn table_csv(table: &RateTable, watermarked: bool) -> String {
    let csv = table.to_csv();
    if watermarked {
        format!("# {OVERRIDE_WATERMARK}\n{csv}")
    } else {
        csv
    }
}

/// Audit, sweep and write `rate_table.csv` plus `llt_summary.json`.
fn llt_on(
    run: &mut Run,
    f: &ChaosVector,
    extras: &DensityExtras,
    llt: &LltSpec,
    cfg: &ExperimentConfig,
) -> Result<i32> {
    let grid = cfg.grid_for(f.dimension());
    let report = run.stage("audit", |_| audit(f, &grid))?;
    if !report.all_pass && !run.override_audit {
        for line in verdict_lines(&report).into_iter().filter(|l| l.starts_with("FAIL")) {
            run.say(line);
        }
        run.say("audit failed; rerun with --override-audit to sweep anyway");
        run.write_json("audit.json", &AuditOutput { report: &report, extras })?;
        return Ok(EXIT_VIOLATION);
    }
    let watermarked = !report.all_pass;
    let sweep = SweepConfig {
        alpha: llt.alpha,
        n_values: llt.n_values.clone(),
        distance: llt.distance.resolve(f.dimension(), run.master_seed),
        record_timing: llt.record_timing,
        override_audit: true,
        grid: Some(grid),
    };
    let outcome = run.stage("rate_sweep", |_| rate_sweep(f, &sweep));
    let (table, constant, violation) = match outcome {
        Ok(o) => (o.table, Some(o.constant), None),
        Err(Error::BoundViolation { n, table, .. }) => (*table, None, Some(n)),
        Err(e) => return Err(e),
    };
    for r in &table.rows {
        run.say(format!(
            "{} n={} l1={:e} bound={:e} err={:e}",
            if r.within_bound() { "PASS" } else { "FAIL" },
            r.n,
            r.l1,
            r.bound,
            r.err
        ));
    }
    run.write("rate_table.csv", &table_csv(&table, watermarked))?;
    let summary = LltSummary {
        watermark: watermarked.then_some(OVERRIDE_WATERMARK),
        constant: constant.as_ref(),
        c: table.c,
        n0: table.n0,
        beta: table.beta,
        nonincreasing: table.nonincreasing(),
        secant_slope: table.secant_slope(),
        bound_violation: violation,
        audit: &report,
        extras,
        config: llt,
    };
    run.write_json("llt_summary.json", &summary)?;
    Ok(if violation.is_some() { EXIT_VIOLATION } else { EXIT_PASS })
}

fn cmd_llt(run: &mut Run, cfg: &ExperimentConfig) -> Result<i32> {
    let llt = cfg.llt.as_ref().ok_or_else(|| Error::Config("missing field `llt`".into()))?;
    let (f, extras) = build_density(run, cfg)?;
    llt_on(run, &f, &extras, llt, cfg)
}

fn cmd_validate(run: &mut Run, cfg: &ExperimentConfig) -> Result<i32> {
    let spec = cfg.validate.clone().unwrap_or_default();
    let seed = derive_seed(run.master_seed, "validate");
    let report = run.stage("validate", |_| validate::run_suite(&spec, seed))?;
    for i in &report.identities {
        let tail = i.tail_bound.map(|t| format!(", tail bound {t:e}")).unwrap_or_default();
        run.say(format!(
            "{} {}: error {:e}, tolerance {:e}{tail}",
            if i.pass { "PASS" } else { "FAIL" },
            i.identity,
            i.max_error,
            i.tolerance
        ));
    }
    run.write_json("validate.json", &report)?;
    Ok(if report.all_pass { EXIT_PASS } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct SdeReport {
    steps: usize,
    paths: usize,
    novikov: NovikovReport,
    assumption3: Assumption3Report,
    exp_integrability: f64,
    shift_variance_trace: f64,
    audit: AssumptionReport,
}

fn cmd_sde(run: &mut Run, cfg: &ExperimentConfig) -> Result<i32> {
    let spec = cfg.sde.as_ref().ok_or_else(|| Error::Config("missing field `sde`".into()))?;
    let grid = PathGrid::new(spec.steps)?;
    let drift = crate::sde::DriftSpec { b1: spec.drift, kappa: spec.kappa };
    let seed = derive_seed(run.master_seed, "sde");
    let space = GaussianSpace::new(spec.steps, spec.max_degree)?;
    let nu = run.stage("simulate", |_| simulate_drift_shifts(&drift, grid, spec.paths, seed))?;
    let novikov = run.stage("novikov", |_| novikov_estimate(&drift, grid, spec.paths, seed, spec.novikov_ceiling))?;
    let assumption3 = run.stage("assumption3", |_| assumption3_estimate(&drift, grid, spec.paths, seed))?;
    let f = run.stage("density", |_| shift_mixture(&nu, &space))?;
    let audit_grid = cfg.grid_for(f.dimension());
    let report = run.stage("audit", |_| audit(&f, &audit_grid))?;
    run.say(format!(
        "{} novikov: {:e} (se {:e}, ceiling {:e})",
        if novikov.finite { "PASS" } else { "FAIL" },
        novikov.estimate.mean,
        novikov.estimate.std_error,
        novikov.ceiling
    ));
    run.say(format!(
        "{} assumption3: {:e} (se {:e})",
        if assumption3.pass { "PASS" } else { "FAIL" },
        assumption3.estimate.mean,
        assumption3.estimate.std_error
    ));
    let extras = DensityExtras {
        shift_variance_trace: Some(nu.shift_variance_trace()),
        exp_integrability: Some(nu.exp_integrability()),
    };
    run.write("sde_shifts.json", &(nu.to_json_string()? + "\n"))?;
    run.write("sde_density.json", &(f.to_json_string()? + "\n"))?;
    run.write_json(
        "sde_report.json",
        &SdeReport {
            steps: spec.steps,
            paths: spec.paths,
            novikov,
            assumption3,
            exp_integrability: nu.exp_integrability(),
            shift_variance_trace: nu.shift_variance_trace(),
            audit: report,
        },
    )?;
    let mut code = if novikov.finite && assumption3.pass { EXIT_PASS } else { EXIT_VIOLATION };
    if let Some(llt) = &spec.llt {
        if code == EXIT_PASS || run.override_audit {
            code = code.max(llt_on(run, &f, &extras, llt, cfg)?);
        } else {
            run.say("skipping llt: path-space hypotheses failed (use --override-audit to force)");
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct XiOutput {
    xi: LimitDensityJson,
    norms: XiNorms,
    spectral_radius_2g: f64,
    l2_tail_bound_sq: f64,
}

fn cmd_build_xi(run: &mut Run, cfg: &ExperimentConfig) -> Result<i32> {
    let xi_spec = cfg.xi.as_ref().ok_or_else(|| Error::Config("missing field `xi`".into()))?;
    let g = matrix(&xi_spec.g2)?;
    let space = match cfg.space {
        Some(s) => s.build()?,
        None => return Err(Error::Config("missing field `space`".into())),
    };
    let xi = run.stage("xi_series", |_| xi_series(&g, &space))?;
    let norms = xi_l2_norm(&g, &space)?;
    run.say(format!(
        "‖ξ‖² series {:e}, eigenvalue product {:e}, scalar formula {}",
        norms.series_value,
        norms.determinant_value,
        norms.frobenius_scalar_value.map(|v| format!("{v:e}")).unwrap_or_else(|| "undefined".into())
    ));
    let out = XiOutput {
        xi: xi.to_json()?,
        norms,
        spectral_radius_2g: xi.spectral_radius_2g(),
        l2_tail_bound_sq: xi.l2_tail_bound_sq(),
    };
    run.write_json("xi.json", &out)?;
    Ok(EXIT_PASS)
}
