//! Argument definitions and the subcommand runners behind the `pointsim` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pointsim::dsample::{guided_downsample_detailed, scorer_by_name, SamplerParams, ScoredCloud, SCORER_NAMES};
use pointsim::grad::Loss;
use pointsim::metrics::{dcd_unequal, CloudPair, ChamferVariant, UnequalVariant};
use pointsim::transport::{emd_approx, emd_exact, emd_value, EmdNormalization, DEFAULT_EPS, DEFAULT_MAX_ITERS};
use pointsim::{DcdParams, ExponentMode, PointCloud};
use serde::{Deserialize, Serialize};

use crate::accumulate::{read_column, AccumulationCurve};
use crate::bench::{run_bench, BenchConfig};
use crate::error::{CliError, Result};
use crate::experiments::noise_imbalance_config;
use crate::format::sig9;
use crate::io::{read_cloud, write_cloud};
use crate::profile;
use crate::sweep::{run_sweep, samples_csv, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "pointsim", version, about = "Point cloud distances, sensitivity sweeps and benchmarks")]
pub struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print a JSON document instead of text or CSV.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distances between two point cloud files.
    Dist(DistArgs),
    /// Grid sweep of degradation parameters.
    Sweep(SweepArgs),
    /// Accumulation curve of a per-sample distance column.
    Accumulate(AccumulateArgs),
    /// Wall-clock timing of CD, DCD and EMD.
    Bench(BenchArgs),
    /// Guided down-sampling of a coarse cloud merged with a reconstruction.
    Downsample(DownsampleArgs),
    /// Per-pair gradient magnitude against pair distance.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Squared,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Naive,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    CdT,
    CdP,
    Dcd,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Chamfer distance, both the squared (cd-t) and plain (cd-p) forms.
    #[arg(long)]
    pub cd: bool,
    /// Symmetric Hausdorff distance.
    #[arg(long)]
    pub hd: bool,
    /// Density-aware Chamfer distance.
    #[arg(long)]
    pub dcd: bool,
    /// Earth mover's distance (equal sizes only).
    #[arg(long)]
    pub emd: bool,
    #[arg(long, default_value_t = 1000.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Squared)]
    pub mode: ModeArg,
    /// DCD form for clouds of different sizes.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Relative accuracy of the approximate EMD solver.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Solve EMD exactly (at most 512 points).
    #[arg(long)]
    pub exact: bool,
    #[arg(long, value_enum, default_value_t = NormalizeArg::Mean)]
    pub normalize: NormalizeArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration instead of a file.
    #[arg(long, value_parser = ["noise-imbalance"], conflicts_with = "config")]
    pub preset: Option<String>,
    /// Directory for sweep.csv, sweep.json and samples.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the number of trials per cell.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AccumulateArgs {
    /// CSV of per-sample distances.
    pub input: PathBuf,
    /// Column holding the distances.
    #[arg(long)]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON bench configuration; flags below are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2048")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    /// Coarse cloud to up-sample and thin.
    pub coarse: PathBuf,
    /// Reconstructed cloud merged in before the final FPS.
    pub rec: PathBuf,
    /// Output cloud (.xyz or .ply).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Output size.
    #[arg(short = 'm', long)]
    pub size: usize,
    /// Ground truth, needed by the oracle scorer.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Per-point scores, one per line, instead of a scorer.
    #[arg(long, conflicts_with = "scorer")]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value = "oracle")]
    pub scorer: String,
    #[arg(long, default_value_t = 9.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Distance scale of the target for unqueried points (calibrated when absent).
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub upscale: usize,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Dcd)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 1000.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Query count of the matched target point.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[arg(long, default_value_t = 0.1)]
    pub l_max: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistValue {
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmdInfo {
    pub exact: bool,
    pub converged: bool,
    pub approx_error: f64,
    pub iterations: usize,
    pub normalize: EmdNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistReport {
    pub n_a: usize,
    pub n_b: usize,
    pub values: Vec<DistValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dcd: Option<DcdParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<UnequalVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emd: Option<EmdInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleReport {
    pub size: usize,
    pub upsampled: usize,
    pub survivors: usize,
    pub refilled: usize,
    pub probabilities: Vec<f64>,
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main_with(args: impl IntoIterator<Item = String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { crate::error::EXIT_INPUT } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match run(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Core(pointsim::Error::CardinalityMismatch { .. }) = e {
                let _ = writeln!(err, "hint: use --variant e for clouds of different sizes");
            }
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        // Ignored when the global pool already exists (repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Dist(a) => dist(cli, a, out),
        Command::Sweep(a) => sweep(cli, a, out),
        Command::Accumulate(a) => accumulate(cli, a, out, err),
        Command::Bench(a) => bench(cli, a, out, err),
        Command::Downsample(a) => downsample(cli, a, out),
        Command::Profile(a) => profile_cmd(cli, a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, &s)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn dist_report(a: &PointCloud, b: &PointCloud, args: &DistArgs) -> Result<DistReport> {
    let all = !(args.cd || args.hd || args.dcd || args.emd);
    let pair = CloudPair::new(a, b);
    let mut values = Vec::new();
    let mut push = |metric: &str, value: f64| values.push(DistValue { metric: metric.into(), value });
    let mut report_dcd = None;
    let mut report_variant = None;
    let mut emd = None;
    if all || args.cd {
        push("cd-t", pair.chamfer(ChamferVariant::T).value);
        push("cd-p", pair.chamfer(ChamferVariant::P).value);
    }
    if all || args.hd {
        push("hd", pair.hausdorff());
    }
    if all || args.dcd {
        let mode = match args.mode {
            ModeArg::Squared => ExponentMode::Squared,
            ModeArg::Euclidean => ExponentMode::Euclidean,
        };
        let params = DcdParams { alpha: args.alpha, lambda: args.lambda, exponent_mode: mode };
        let value = match args.variant {
            None => pair.dcd(&params)?.value,
            Some(v) => {
                let v = match v {
                    VariantArg::Naive => UnequalVariant::Naive,
                    VariantArg::E => UnequalVariant::E,
                };
                report_variant = Some(v);
                dcd_unequal(a, b, &params, v)?.value
            }
        };
        push("dcd", value);
        report_dcd = Some(params);
    }
    if all || args.emd {
        let r = if args.exact { emd_exact(a, b)? } else { emd_approx(a, b, args.eps, args.max_iters)? };
        let normalize = match args.normalize {
            NormalizeArg::Mean => EmdNormalization::Mean,
            NormalizeArg::Sum => EmdNormalization::Sum,
        };
        push("emd", emd_value(&r, normalize));
        emd = Some(EmdInfo {
            exact: args.exact,
            converged: r.converged,
            approx_error: r.approx_error,
            iterations: r.iterations,
            normalize,
        });
    }
    Ok(DistReport { n_a: a.len(), n_b: b.len(), values, dcd: report_dcd, variant: report_variant, emd })
}

fn dist(cli: &Cli, args: &DistArgs, out: &mut dyn Write) -> Result<()> {
    let a = read_cloud(&args.a)?;
    let b = read_cloud(&args.b)?;
    let report = dist_report(&a, &b, args)?;
    if cli.json {
        return emit_json(out, &report);
    }
    let mut text = String::new();
    for v in &report.values {
        text.push_str(&format!("{} {}\n", v.metric, sig9(v.value)));
    }
    if let Some(e) = &report.emd {
        if !e.converged {
            text.push_str(&format!("# emd did not converge; gap {}\n", sig9(e.approx_error)));
        }
    }
    emit(out, &text)
}

fn sweep(cli: &Cli, args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => SweepConfig::from_json(&read_text(path)?)?,
        _ => noise_imbalance_config(0),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let (report, samples) = run_sweep(&cfg)?;
    let csv = report.to_csv()?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_text(&dir.join("sweep.csv"), &csv)?;
        write_text(&dir.join("sweep.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        write_text(&dir.join("samples.csv"), &samples_csv(&report, &samples)?)?;
    }
    if cli.json {
        emit_json(out, &report)
    } else {
        emit(out, &csv)
    }
}

fn accumulate(cli: &Cli, args: &AccumulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let file = fs::File::open(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    let values = read_column(file, &args.column)?;
    let curve = AccumulationCurve::new(&values)?;
    if cli.json {
        return emit_json(out, &curve);
    }
    emit(out, &curve.to_csv()?)?;
    writeln!(err, "top25 {}\ntop50 {}", sig9(curve.top25), sig9(curve.top50)).map_err(|e| CliError::io("<stderr>", e))
}

fn bench(cli: &Cli, args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?)?,
        None => BenchConfig {
            sizes: args.sizes.clone(),
            trials: args.trials,
            seed: 0,
            levels: args.levels.clone(),
            emd_eps: args.eps,
            emd_max_iters: args.max_iters,
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report = run_bench(&cfg)?;
    if cli.json {
        return emit_json(out, &report);
    }
    emit(out, &report.to_csv()?)?;
    for c in &report.checks {
        writeln!(err, "{} {}: {}", if c.holds { "PASS" } else { "FAIL" }, c.name, c.detail)
            .map_err(|e| CliError::io("<stderr>", e))?;
    }
    Ok(())
}

fn read_scores(path: &Path) -> Result<Vec<f64>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| CliError::Parse { path: path.into(), line: i + 1, msg: e.to_string() })
        })
        .collect()
}

fn downsample(cli: &Cli, args: &DownsampleArgs, out: &mut dyn Write) -> Result<()> {
    let params = SamplerParams { beta: args.beta, gamma: args.gamma, t: args.t, upscale: args.upscale };
    params.validate()?;
    let coarse = read_cloud(&args.coarse)?;
    let rec = read_cloud(&args.rec)?;
    let scores = match &args.scores {
        Some(path) => read_scores(path)?,
        None => {
            let scorer = scorer_by_name(&args.scorer, &params).ok_or_else(|| {
                CliError::Config(format!("unknown scorer {:?} (expected one of {})", args.scorer, SCORER_NAMES.join(", ")))
            })?;
            let gt = args.gt.as_deref().map(read_cloud).transpose()?;
            scorer.score(&coarse, gt.as_ref())?
        }
    };
    let scored = ScoredCloud::new(coarse, scores)?;
    let outcome = guided_downsample_detailed(&scored, &rec, &params, args.size, cli.seed.unwrap_or(0))?;
    write_cloud(&outcome.cloud, &args.output)?;
    let report = DownsampleReport {
        size: outcome.cloud.len(),
        upsampled: outcome.upsampled.len(),
        survivors: outcome.survivors.len(),
        refilled: outcome.refilled.len(),
        probabilities: outcome.probabilities,
    };
    if cli.json {
        return emit_json(out, &report);
    }
    emit(
        out,
        &format!(
            "size {}\nupsampled {}\nsurvivors {}\nrefilled {}\n",
            report.size, report.upsampled, report.survivors, report.refilled
        ),
    )
}

fn profile_cmd(cli: &Cli, args: &ProfileArgs, out: &mut dyn Write) -> Result<()> {
    let loss = match args.loss {
        LossArg::CdT => Loss::CdT,
        LossArg::CdP => Loss::CdP,
        LossArg::Dcd => Loss::Dcd,
    };
    let params = DcdParams::training(args.alpha, args.lambda);
    let rows = profile::profile(loss, &params, &profile::grid(args.l_max, args.points)?, args.n)?;
    if cli.json {
        return emit_json(out, &rows);
    }
    emit(out, &profile::to_csv(&rows)?)
}
