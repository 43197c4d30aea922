//! Run configuration and command dispatch.
//!
//! A run is described by a JSON document (see README for the schema). Presets
//! name the standard domains; `--set key=value` overrides nested keys. Every
//! run writes a self-describing directory: `config.json` (canonical echo),
//! `summary.json`, `report.json`, and the command's CSV artifacts.
//!
//! Exit codes: 0 success, 1 solver non-convergence, 2 configuration error,
//! 3 failed verification or witness.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{
    delta_sweep, lemma_battery, nonuniqueness_witness, ExperimentConfig, Expectation,
    WitnessDomain,
};
use crate::geometry::DomainSpec;
use crate::grid::{GridDomain, RasterOptions};
use crate::inf::{solve_inf, InfProblem, ScalarSeed};
use crate::io;
use crate::plap::{minimize_rayleigh, p_continuation, PLapProblem, SeedChoice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONVERGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Domain,
    Plap,
    Inf,
    Sweep,
    Witness,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Domain => "domain",
            Command::Plap => "plap",
            Command::Inf => "inf",
            Command::Sweep => "sweep",
            Command::Witness => "witness",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub padding: Option<f64>,
    #[serde(default)]
    pub node_budget: Option<usize>,
    #[serde(default)]
    pub ridge_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlapBlock {
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub p_schedule: Option<Vec<f64>>,
    #[serde(default = "default_plap_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_plap_seed")]
    pub seed: SeedChoice,
}

impl Default for PlapBlock {
    fn default() -> Self {
        PlapBlock {
            p: None,
            p_schedule: None,
            tol: default_plap_tol(),
            max_iters: default_max_iters(),
            seed: default_plap_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PinChoice {
    Named(PinName),
    Explicit { nodes: Vec<u32> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PinName {
    RightRidge,
    FullRidge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfBlock {
    #[serde(default = "default_inf_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_pin")]
    pub pin: PinChoice,
    #[serde(default = "default_inf_seed")]
    pub seed: ScalarSeed,
}

impl Default for InfBlock {
    fn default() -> Self {
        InfBlock {
            tol: default_inf_tol(),
            max_iters: default_max_iters(),
            pin: default_pin(),
            seed: default_inf_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(default = "default_epsilon_schedule")]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_expect")]
    pub expect: Expectation,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            epsilon_schedule: default_epsilon_schedule(),
            deltas: default_deltas(),
            expect: default_expect(),
        }
    }
}

fn default_plap_tol() -> f64 {
    1e-9
}
fn default_inf_tol() -> f64 {
    1e-8
}
fn default_max_iters() -> usize {
    200_000
}
fn default_plap_seed() -> SeedChoice {
    SeedChoice::Distance
}
fn default_inf_seed() -> ScalarSeed {
    ScalarSeed::Distance
}
fn default_pin() -> PinChoice {
    PinChoice::Named(PinName::FullRidge)
}
fn default_epsilon_schedule() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.02, 0.0]
}
fn default_deltas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_expect() -> Expectation {
    Expectation::Auto
}
fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub plap: PlapBlock,
    #[serde(default)]
    pub inf: InfBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub out: Option<String>,
}

pub const PRESETS: [&str; 5] = ["dumbbell", "dumbbell-asym", "stadium", "ball", "disjoint-balls"];

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(
                "delta",
                format!("must lie in (0,1), got {}", self.delta),
            ));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::config(
                "epsilon",
                format!("must lie in [0,1), got {}", self.epsilon),
            ));
        }
        if let Some(p) = &self.preset {
            if !PRESETS.contains(&p.as_str()) {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{p}`; expected one of {PRESETS:?}"),
                ));
            }
            if self.domain.is_some() {
                return Err(Error::config(
                    "preset",
                    "preset and explicit domain are mutually exclusive",
                ));
            }
        }
        if let Some(h) = self.grid.h {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::config("grid.h", format!("must be > 0, got {h}")));
            }
            if let Some(pad) = self.grid.padding {
                if pad < h {
                    return Err(Error::config(
                        "grid.padding",
                        format!("must be >= grid.h = {h}, got {pad}"),
                    ));
                }
            }
        }
        if let Some(p) = self.plap.p {
            if !(2.0..=crate::plap::P_MAX).contains(&p) {
                return Err(Error::config(
                    "plap.p",
                    format!("must lie in [2, {}], got {p}", crate::plap::P_MAX),
                ));
            }
        }
        if let Some(sched) = &self.plap.p_schedule {
            if sched.is_empty() || sched[0] != 2.0 {
                return Err(Error::config("plap.p_schedule", "must start at 2"));
            }
            if sched.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("plap.p_schedule", "must be strictly increasing"));
            }
            if *sched.last().unwrap() > crate::plap::P_MAX {
                return Err(Error::config(
                    "plap.p_schedule",
                    format!("capped at {}", crate::plap::P_MAX),
                ));
            }
        }
        if !(self.plap.tol > 0.0) {
            return Err(Error::config("plap.tol", "must be > 0"));
        }
        if !(self.inf.tol > 0.0) {
            return Err(Error::config("inf.tol", "must be > 0"));
        }
        if self.plap.max_iters == 0 {
            return Err(Error::config("plap.max_iters", "must be >= 1"));
        }
        if self.inf.max_iters == 0 {
            return Err(Error::config("inf.max_iters", "must be >= 1"));
        }
        let sched = &self.experiment.epsilon_schedule;
        if sched.is_empty() || *sched.last().unwrap() != 0.0 {
            return Err(Error::config("experiment.epsilon_schedule", "must end at 0"));
        }
        if sched.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config(
                "experiment.epsilon_schedule",
                "must be strictly decreasing",
            ));
        }
        if sched.iter().any(|&e| !(0.0..1.0).contains(&e)) {
            return Err(Error::config(
                "experiment.epsilon_schedule",
                "entries must lie in [0,1)",
            ));
        }
        let deltas = &self.experiment.deltas;
        if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::config("experiment.deltas", "entries must lie in (0,1)"));
        }
        if deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config(
                "experiment.deltas",
                "must be strictly decreasing",
            ));
        }
        if let Some(d) = &self.domain {
            DomainSpec::new(d.name.clone(), d.primitives.clone())
                .map_err(|e| Error::config("domain", e.to_string()))?;
        }
        Ok(())
    }

    /// Resolved grid spacing: explicit or δ/4.
    pub fn h(&self) -> f64 {
        self.grid.h.unwrap_or(self.delta / 4.0)
    }

    pub fn padding(&self) -> f64 {
        self.grid.padding.unwrap_or(2.0 * self.h())
    }

    /// The domain this run operates on.
    pub fn domain_spec(&self) -> Result<DomainSpec> {
        if let Some(d) = &self.domain {
            return DomainSpec::new(d.name.clone(), d.primitives.clone());
        }
        match self.preset.as_deref() {
            None | Some("dumbbell") => DomainSpec::dumbbell(self.delta, 0.0),
            Some("dumbbell-asym") => DomainSpec::dumbbell(self.delta, self.epsilon),
            Some("stadium") => Ok(DomainSpec::stadium()),
            Some("ball") => DomainSpec::ball(1.0),
            Some("disjoint-balls") => DomainSpec::disjoint_balls(self.epsilon).map_err(|_| {
                Error::config(
                    "epsilon",
                    "the disjoint-balls preset needs epsilon in (0,1)",
                )
            }),
            Some(other) => Err(Error::config("preset", format!("unknown preset `{other}`"))),
        }
    }

    fn raster_opts(&self) -> RasterOptions {
        RasterOptions {
            node_budget: self.grid.node_budget,
            ridge_tol: self.grid.ridge_tol,
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_delta(self.delta);
        cfg.h = self.h();
        cfg.padding = self.padding();
        cfg.epsilon_schedule = self.experiment.epsilon_schedule.clone();
        cfg.inf_tol = self.inf.tol;
        cfg.inf_max_iters = self.inf.max_iters;
        cfg.plap_tol = self.plap.tol;
        cfg.plap_max_iters = self.plap.max_iters;
        if let Some(sched) = &self.plap.p_schedule {
            cfg.p_schedule = sched.clone();
        }
        cfg.node_budget = self.grid.node_budget;
        cfg.expect = self.experiment.expect;
        cfg
    }

    /// Canonical JSON: the validated config re-serialized with all defaults
    /// filled and keys sorted.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses and validates a config document; errors carry the key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { String::from("<root>") } else { path };
        Error::config(key, e.inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub headline: serde_json::Value,
    pub artifacts: Vec<String>,
    pub pass: bool,
}

struct RunDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    fn new(dir: PathBuf) -> RunDir {
        RunDir {
            dir,
            artifacts: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        io::write_string(&self.dir.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.dir.join(name), value)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

fn resolve_pins(grid: &GridDomain, pin: &PinChoice) -> Vec<u32> {
    match pin {
        PinChoice::Named(PinName::FullRidge) => grid.ridge().to_vec(),
        PinChoice::Named(PinName::RightRidge) => grid.rightmost_ridge_component(),
        PinChoice::Explicit { nodes } => nodes.clone(),
    }
}

/// Executes a validated config; returns the summary and the process exit code.
pub fn run(cfg: &RunConfig, out_override: Option<&Path>) -> Result<(RunSummary, i32)> {
    let hash = cfg.config_hash();
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.command.name(), &hash[..8])));
    let mut run_dir = RunDir::new(out_dir);
    run_dir.write("config.json", &format!("{}\n", cfg.canonical_json()))?;

    let (headline, pass, exit) = match cfg.command {
        Command::Domain => run_domain(cfg, &mut run_dir)?,
        Command::Plap => run_plap(cfg, &mut run_dir)?,
        Command::Inf => run_inf(cfg, &mut run_dir)?,
        Command::Witness => run_witness(cfg, &mut run_dir)?,
        Command::Sweep => run_sweep(cfg, &mut run_dir)?,
        Command::Verify => run_verify(cfg, &mut run_dir)?,
    };

    let summary = RunSummary {
        command: cfg.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        headline,
        artifacts: run_dir.artifacts.clone(),
        pass,
    };
    io::write_json(&run_dir.dir.join("summary.json"), &summary)?;
    Ok((summary, exit))
}

type CommandOutcome = (serde_json::Value, bool, i32);

fn run_domain(cfg: &RunConfig, dir: &mut RunDir) -> Result<CommandOutcome> {
    let spec = cfg.domain_spec()?;
    let grid = GridDomain::rasterize_with(spec, cfg.h(), cfg.padding(), cfg.raster_opts())?;
    dir.write("dist.csv", &io::field_csv(&grid, grid.dist(), "d"))?;
    let lambda = grid.lambda_inf().ok();
    let headline = serde_json::json!({
        "lambda_inf": lambda,
        "max_dist": grid.max_dist(),
        "nx": grid.nx,
        "ny": grid.ny,
        "inside_nodes": grid.inside_nodes().len(),
        "ridge_nodes": grid.ridge().len(),
    });
    dir.write_json("report.json", &headline)?;
    Ok((headline, true, EXIT_OK))
}

fn run_plap(cfg: &RunConfig, dir: &mut RunDir) -> Result<CommandOutcome> {
    let spec = cfg.domain_spec()?;
    let grid = GridDomain::rasterize_with(spec, cfg.h(), cfg.padding(), cfg.raster_opts())?;
    if let Some(schedule) = &cfg.plap.p_schedule {
        let (trace, states) =
            p_continuation(&grid, schedule, cfg.plap.tol, cfg.plap.max_iters)?;
        dir.write("trace.csv", &io::trace_csv(&trace))?;
        let (p, last) = states.last().expect("nonempty schedule");
        let norm = last.max_normalized();
        dir.write("field.csv", &io::field_csv(&grid, &norm, "u"))?;
        let converged = states.iter().all(|(_, s)| s.converged);
        let headline = serde_json::json!({
            "p": p,
            "lambda": last.lambda,
            "iterations": last.iterations,
            "residual": last.residual,
            "converged": converged,
            "probes": {
                "left": grid.probe(&norm, -5.0, 0.0)?,
                "right": grid.probe(&norm, 5.0, 0.0)?,
            },
        });
        dir.write_json("report.json", &headline)?;
        let exit = if converged { EXIT_OK } else { EXIT_NONCONVERGED };
        Ok((headline, converged, exit))
    } else {
        let p = cfg.plap.p.unwrap_or(2.0);
        let mut problem = PLapProblem::new(&grid, p);
        problem.tol = cfg.plap.tol;
        problem.max_iters = cfg.plap.max_iters;
        problem.seed = cfg.plap.seed.clone();
        let result = minimize_rayleigh(&problem)?;
        let norm = result.max_normalized();
        dir.write("field.csv", &io::field_csv(&grid, &norm, "u"))?;
        let headline = serde_json::json!({
            "p": p,
            "lambda": result.lambda,
            "iterations": result.iterations,
            "residual": result.residual,
            "converged": result.converged,
            "probes": {
                "left": grid.probe(&norm, -5.0, 0.0)?,
                "right": grid.probe(&norm, 5.0, 0.0)?,
            },
        });
        dir.write_json("report.json", &headline)?;
        let exit = if result.converged {
            EXIT_OK
        } else {
            EXIT_NONCONVERGED
        };
        Ok((headline, result.converged, exit))
    }
}

fn run_inf(cfg: &RunConfig, dir: &mut RunDir) -> Result<CommandOutcome> {
    let spec = cfg.domain_spec()?;
    let grid = GridDomain::rasterize_with(spec, cfg.h(), cfg.padding(), cfg.raster_opts())?;
    let pins = resolve_pins(&grid, &cfg.inf.pin);
    let mut problem = InfProblem::new(&grid, pins)?;
    problem.tol = cfg.inf.tol;
    problem.max_iters = cfg.inf.max_iters;
    problem.apply_seed(cfg.inf.seed);
    let result = solve_inf(&problem)?;
    dir.write("field.csv", &io::field_csv(&grid, &result.field, "u"))?;
    dir.write("branch.csv", &io::branch_csv(&grid, &result.branch_map))?;
    let headline = serde_json::json!({
        "lambda": problem.lambda,
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "probes": {
            "left": grid.probe(&result.field, -5.0, 0.0)?,
            "right": grid.probe(&result.field, 5.0, 0.0)?,
        },
    });
    dir.write_json("report.json", &headline)?;
    let exit = if result.converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGED
    };
    Ok((headline, result.converged, exit))
}

fn run_witness(cfg: &RunConfig, dir: &mut RunDir) -> Result<CommandOutcome> {
    let domain = match cfg.preset.as_deref() {
        None | Some("dumbbell") if cfg.domain.is_none() => {
            WitnessDomain::Dumbbell { delta: cfg.delta }
        }
        _ => WitnessDomain::Fixed(cfg.domain_spec()?),
    };
    let exp = cfg.experiment_config();
    let outcome = nonuniqueness_witness(&domain, &exp)?;
    dir.write(
        "field_sym.csv",
        &io::field_csv(&outcome.grid, &outcome.sym.field, "u"),
    )?;
    dir.write(
        "field_asym.csv",
        &io::field_csv(&outcome.grid, &outcome.asym.field, "u"),
    )?;
    dir.write(
        "branch_asym.csv",
        &io::branch_csv(&outcome.grid, &outcome.asym.branch_map),
    )?;
    if let Some(eps) = &outcome.continuation {
        dir.write("trace.csv", &io::trace_csv(&eps.trace))?;
        for step in &eps.steps {
            let name = format!("fields/eps_{:.6}.csv", step.epsilon);
            dir.write(&name, &io::field_csv(&step.grid, &step.result.field, "u"))?;
        }
    }
    dir.write_json("report.json", &outcome.report)?;
    let headline = serde_json::to_value(&outcome.report)?;
    let exit = if !outcome.report.converged {
        EXIT_NONCONVERGED
    } else if !outcome.report.pass {
        EXIT_FAILED
    } else {
        EXIT_OK
    };
    Ok((headline, outcome.report.pass, exit))
}

fn run_sweep(cfg: &RunConfig, dir: &mut RunDir) -> Result<CommandOutcome> {
    let exp = cfg.experiment_config();
    let outcome = delta_sweep(&cfg.experiment.deltas, &exp)?;
    let mut table = String::from("delta,h,lambda,probe_left,probe_right,gap,pass\n");
    for r in &outcome.rows {
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            io::format_f64(r.delta),
            io::format_f64(r.h),
            io::format_f64(r.lambda),
            io::format_f64(r.probe_left),
            io::format_f64(r.probe_right),
            io::format_f64(r.gap),
            r.pass,
        ));
    }
    dir.write("sweep.csv", &table)?;
    dir.write_json("report.json", &outcome)?;
    let headline = serde_json::to_value(&outcome)?;
    let all_pass = outcome.pass;
    let exit = if outcome.rows.iter().any(|r| !r.pass) || !outcome.monotone {
        EXIT_FAILED
    } else {
        EXIT_OK
    };
    Ok((headline, all_pass, exit))
}

fn run_verify(cfg: &RunConfig, dir: &mut RunDir) -> Result<CommandOutcome> {
    let exp = cfg.experiment_config();
    let report = lemma_battery(&exp)?;
    dir.write_json("report.json", &report)?;
    let headline = serde_json::to_value(&report)?;
    let exit = if report.pass { EXIT_OK } else { EXIT_FAILED };
    Ok((headline, report.pass, exit))
}

#[derive(Debug, Parser)]
#[command(name = "groundstate", version, about = "p-Laplacian and infinity-Laplacian principal eigenproblems on 2D grid domains")]
pub struct CliArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Named domain preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override a config key, e.g. --set grid.h=0.0125
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn apply_override(value: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec.to_string(), "expected KEY=VALUE"))?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cursor.is_object() {
            return Err(Error::config(path.to_string(), "path crosses a non-object"));
        }
        let map = cursor.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    Ok(())
}

/// Assembles the effective config from a file, `--preset`, and `--set`
/// overrides; runs it; prints the summary. Returns the process exit code.
pub fn execute(args: CliArgs) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    #[cfg(feature = "parallel")]
    if let Some(n) = args.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let result = (|| -> Result<(RunSummary, i32)> {
        let mut value: serde_json::Value = match &args.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => serde_json::json!({}),
        };
        if !value.is_object() {
            return Err(Error::config("<root>", "config must be a JSON object"));
        }
        if let Some(preset) = &args.preset {
            value
                .as_object_mut()
                .unwrap()
                .insert("preset".to_string(), serde_json::json!(preset));
        }
        for spec in &args.set {
            apply_override(&mut value, spec)?;
        }
        let cfg = parse_config(&serde_json::to_string(&value)?)?;
        run(&cfg, args.out.as_deref())
    })();

    match result {
        Ok((summary, exit)) => {
            match serde_json::to_string_pretty(&summary) {
                Ok(text) => println!("{text}"),
                Err(e) => eprintln!("summary serialization failed: {e}"),
            }
            exit
        }
        Err(err) => {
            let exit = match &err {
                Error::NonConverged { .. } => EXIT_NONCONVERGED,
                _ => EXIT_CONFIG,
            };
            println!(
                "{}",
                serde_json::json!({ "error": err.to_string(), "exit": exit })
            );
            exit
        }
    }
}
