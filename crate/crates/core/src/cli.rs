//! The `coxmeas` command-line tool.
//!
//! Every subcommand writes its result to `--out` (or stdout) and a
//! [`RunManifest`] next to it as `<out>.manifest.json`. The result files
//! carry no timing or host information, so identical inputs and seeds give
//! byte-identical results at any `--threads`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    compute_tables, solve_fredholm, AsymptoticSettings, AsymptoticTables, FredholmSolution, Truth, Weight,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::error_model::ErrorModel;
use crate::estimator::{fit_stage1, fit_stage2, Estimate, FitConfig};
use crate::simulation::{run_study, sample_dataset, write_replicates_csv, StudyConfig, StudyKind, StudyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "coxmeas", version, about = "Corrected Cox regression with covariate measurement error")]
pub struct Cli {
    /// Master seed; overrides any seed inside the config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a truth.
    Simulate(SimulateArgs),
    /// Fit the stage-1 or stage-2 estimator to a dataset.
    Fit(FitArgs),
    /// Population matrices, sandwich covariance and the Fredholm direction.
    Asymptotics(AsymptoticsArgs),
    /// Monte Carlo consistency or normality study.
    Study(StudyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Truth JSON; the default fixture when absent.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV with header `y,delta,w1,...,wm`.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON object `{"fit": <FitConfig>, "error": <ErrorSpec>}`.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    /// Output of an earlier `--stage 1` run, reused instead of refitting.
    #[arg(long)]
    pub stage1_result: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    /// Truth JSON; the default fixture when absent.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Weight function: `one`, `t`, or comma-separated grid values.
    #[arg(long, default_value = "one")]
    pub f: String,
    #[arg(long, default_value_t = 2001)]
    pub grid_nodes: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 40)]
    pub hermite_nodes: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Consistency,
    Normality,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Directory for the per-replicate CSV dump.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Input file of `fit --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub fit: FitConfig,
    pub error: ErrorModel,
}

/// Output of `fit`. Stage 2 carries the stage-1 estimate it was built on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub epsilon_n: f64,
    pub stage1: Estimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<Estimate>,
}

impl FitReport {
    /// The estimate of the requested stage.
    pub fn last(&self) -> &Estimate {
        self.stage2.as_ref().unwrap_or(&self.stage1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub truth: Truth,
    pub tables: AsymptoticTables,
    pub fredholm: FredholmSolution,
}

/// Provenance record written beside every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
    /// SHA-256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sidecar manifest path for an output file.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Maps an error onto the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NONCONVERGENCE
    } else {
        EXIT_INPUT
    }
}

struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
        self.0.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}

struct Output {
    subcommand: &'static str,
    config: serde_json::Value,
    seed: u64,
    body: Vec<u8>,
    extra: Vec<(PathBuf, Vec<u8>)>,
    converged: bool,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load_truth(inputs: &mut Inputs, path: Option<&Path>) -> Result<Truth> {
    match path {
        Some(p) => inputs.json(p),
        None => Ok(Truth::default_fixture()),
    }
}

fn simulate(cli: &Cli, args: &SimulateArgs, inputs: &mut Inputs) -> Result<Output> {
    let truth = load_truth(inputs, args.truth.as_deref())?;
    let seed = cli.seed.unwrap_or(0);
    let data = sample_dataset(&truth, args.n, seed)?;
    let mut body = Vec::new();
    data.write_csv(&mut body)?;
    Ok(Output {
        subcommand: "simulate",
        config: serde_json::json!({ "truth": truth, "n": args.n }),
        seed,
        body,
        extra: Vec::new(),
        converged: true,
    })
}

fn fit(cli: &Cli, args: &FitArgs, inputs: &mut Inputs) -> Result<Output> {
    let mut req: FitRequest = inputs.json(&args.config)?;
    if let Some(s) = cli.seed {
        req.fit.seed = s;
    }
    req.fit.validate()?;
    let bytes = inputs.read(&args.data)?;
    let data = Dataset::read_csv(bytes.as_slice(), req.fit.tau)?;
    let stage1 = match (&args.stage1_result, args.stage) {
        (Some(p), 2) => {
            let prior: FitReport = inputs.json(p)?;
            if prior.stage1.stage != 1 {
                return Err(Error::usage("--stage1-result does not hold a stage-1 estimate"));
            }
            prior.stage1
        }
        (Some(_), _) => return Err(Error::usage("--stage1-result only applies to --stage 2")),
        (None, _) => fit_stage1(&data, &req.error, &req.fit)?,
    };
    let stage2 = if args.stage == 2 { Some(fit_stage2(&data, &req.error, &stage1, &req.fit)?) } else { None };
    let report = FitReport { epsilon_n: req.fit.epsilon_n(data.len()), stage1, stage2 };
    let converged = report.last().diagnostics.converged;
    Ok(Output {
        subcommand: "fit",
        config: serde_json::json!({ "request": req, "stage": args.stage }),
        seed: req.fit.seed,
        body: to_json(&report)?,
        extra: Vec::new(),
        converged,
    })
}

fn asymptotics(cli: &Cli, args: &AsymptoticsArgs, inputs: &mut Inputs) -> Result<Output> {
    let truth = load_truth(inputs, args.truth.as_deref())?;
    let weight = Weight::parse(&args.f)?;
    let seed = cli.seed.unwrap_or(0);
    let settings =
        AsymptoticSettings { grid_nodes: args.grid_nodes, hermite_nodes: args.hermite_nodes, reps: args.reps, seed };
    let tables = compute_tables(&truth, &settings)?;
    let fredholm = solve_fredholm(&truth, &tables, &weight, args.reps, seed)?;
    let report = AsymptoticsReport { truth, tables, fredholm };
    Ok(Output {
        subcommand: "asymptotics",
        config: serde_json::json!({ "settings": settings, "f": weight }),
        seed,
        body: to_json(&report)?,
        extra: Vec::new(),
        converged: true,
    })
}

fn study(cli: &Cli, args: &StudyArgs, inputs: &mut Inputs) -> Result<Output> {
    let mut cfg: StudyConfig = inputs.json(&args.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let kind = match args.kind {
        KindArg::Consistency => StudyKind::Consistency,
        KindArg::Normality => StudyKind::Normality,
    };
    let report: StudyReport = run_study(&cfg, kind)?;
    let mut extra = Vec::new();
    if let Some(dir) = &args.csv {
        let mut csv = Vec::new();
        write_replicates_csv(&report.replicates, cfg.truth.dim(), &mut csv)?;
        extra.push((dir.join("replicates.csv"), csv));
    }
    Ok(Output {
        subcommand: "study",
        config: serde_json::to_value(&cfg)?,
        seed: cfg.seed,
        body: to_json(&report)?,
        extra,
        converged: true,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let mut inputs = Inputs(BTreeMap::new());
    let out = match &cli.command {
        Command::Simulate(a) => simulate(cli, a, &mut inputs)?,
        Command::Fit(a) => fit(cli, a, &mut inputs)?,
        Command::Asymptotics(a) => asymptotics(cli, a, &mut inputs)?,
        Command::Study(a) => study(cli, a, &mut inputs)?,
    };
    let mut outputs = BTreeMap::new();
    for (path, bytes) in &out.extra {
        write_file(path, bytes)?;
        outputs.insert(path.display().to_string(), sha256_hex(bytes));
    }
    let manifest_target = match &cli.out {
        Some(path) => {
            write_file(path, &out.body)?;
            outputs.insert(path.display().to_string(), sha256_hex(&out.body));
            Some(manifest_path(path))
        }
        None => {
            std::io::stdout().write_all(&out.body)?;
            None
        }
    };
    let manifest = RunManifest {
        subcommand: out.subcommand.into(),
        config: out.config,
        seed: out.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        inputs: inputs.0,
        outputs,
    };
    let text = to_json(&manifest)?;
    match manifest_target {
        Some(p) => write_file(&p, &text)?,
        None => std::io::stderr().write_all(&text)?,
    }
    if out.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("coxmeas: solver did not converge; best iterate written");
        Ok(EXIT_NONCONVERGENCE)
    }
}

/// Runs the tool on parsed arguments and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let pool = match cli.threads {
        Some(0) => {
            eprintln!("coxmeas: --threads must be at least 1");
            return EXIT_INPUT;
        }
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("coxmeas: cannot start worker threads: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("coxmeas: {e}");
            exit_code(&e)
        }
    }
}
