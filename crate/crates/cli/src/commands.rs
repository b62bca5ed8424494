use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use grassframe::bounds::{self, BoundParams, ClassSupports};
use grassframe::channel::{self, ChannelConfig};
use grassframe::collapse;
use grassframe::frames::{self, CorrelationMode};
use grassframe::linalg::{self, Matrix};
use grassframe::ufm::{self, SynthOptions, UfmConfig};
use grassframe::{Frame, RngSeed};

use crate::failure::{CliResult, Failure};
use crate::manifest::{absolute, ensure_dir, parent_dir, write_output, Manifest};
use crate::svg;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a Grassmannian frame by gradient descent.
    Gen(GenArgs),
    /// Report frame properties as JSON.
    Check(CheckArgs),
    /// Apply a seeded rotation and/or column permutation (R·M·P).
    Transform(TransformArgs),
    /// Train the unconstrained feature model and track neural collapse.
    Simulate(SimulateArgs),
    /// Monte Carlo Gaussian channel with minimum-distance decoding.
    Channel(ChannelArgs),
    /// Evaluate the margin bound and/or the covering-number accuracy bound.
    Bounds(BoundsArgs),
    /// Rerun a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "C")]
    #[serde(rename = "C")]
    pub classes: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// Frame JSON to write; its directory receives the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub frame: PathBuf,
    #[arg(long, default_value_t = frames::DEFAULT_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TransformArgs {
    pub frame: PathBuf,
    #[arg(long)]
    pub rotate_seed: Option<u64>,
    #[arg(long)]
    pub permute_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "C")]
    #[serde(rename = "C")]
    pub classes: usize,
    #[arg(long, default_value_t = 20)]
    pub n_per_class: usize,
    /// Number of evenly spaced SVG snapshots (planar runs only).
    #[arg(long, default_value_t = 5)]
    pub snapshots: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 200_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 1000)]
    pub record_every: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChannelArgs {
    pub frame: PathBuf,
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    pub sigma: Option<f64>,
    /// Comma-separated, strictly decreasing noise levels.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sweep: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Also write the result and a manifest here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    /// Margin-bound parameters JSON.
    #[arg(long, required_unless_present = "supports")]
    pub params: Option<PathBuf>,
    /// Class supports JSON for the accuracy bound.
    #[arg(long, requires_all = ["frame", "n_total"])]
    pub supports: Option<PathBuf>,
    /// Classifier frame for the accuracy bound.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lipschitz: f64,
    /// Total sample count N.
    #[arg(long)]
    pub n_total: Option<usize>,
    /// Evaluate the accuracy bound under this many seeded column permutations.
    #[arg(long, requires_all = ["supports", "seed"])]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the manifest's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Gen(a) => gen(a),
        Command::Check(a) => check(a),
        Command::Transform(a) => transform(a),
        Command::Simulate(a) => simulate(a),
        Command::Channel(a) => channel_cmd(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Replay(a) => replay(a),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::read(path, e))
}

fn read_frame(path: &Path) -> CliResult<Frame> {
    Frame::from_json(&read_text(path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn file_name(path: &Path) -> CliResult<String> {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Failure::invalid(format!("{} is not a file path", path.display())))
}

fn gen(args: GenArgs) -> CliResult {
    let options = SynthOptions {
        lambda: args.lambda,
        alpha: args.alpha,
        max_iters: args.iters,
        seed: RngSeed(args.seed),
        init_scale: args.init_scale,
    };
    let config = options.config(args.d, args.classes)?;
    let frame = ufm::synthesize_grassmannian(args.d, args.classes, &options)?;
    let dir = parent_dir(&args.out);
    ensure_dir(&dir)?;
    write_output(&args.out, frame.to_json())?;
    let mut manifest = Manifest::new("gen", Some(args.seed), &args).with_resolved(&config);
    manifest.outputs.push(file_name(&args.out)?);
    manifest.write(&dir)?;
    println!(
        "{}",
        frames::max_correlation(&frame, CorrelationMode::Signed)?
    );
    Ok(())
}

fn check(args: CheckArgs) -> CliResult {
    let frame = read_frame(&args.frame)?;
    print!("{}", to_json(&frames::check_frame(&frame, args.tol)?));
    Ok(())
}

fn transform(args: TransformArgs) -> CliResult {
    if args.rotate_seed.is_none() && args.permute_seed.is_none() {
        return Err(Failure::invalid(
            "give --rotate-seed, --permute-seed, or both",
        ));
    }
    let mut frame = read_frame(&args.frame)?;
    if let Some(seed) = args.rotate_seed {
        let r = linalg::random_rotation(frame.d(), RngSeed(seed))?;
        frame = frames::transform_type1(&frame, &r)?;
        frame.meta.insert("rotate_seed".into(), seed.to_string());
    }
    if let Some(seed) = args.permute_seed {
        let p = linalg::random_permutation(frame.c(), RngSeed(seed))?;
        frame = frames::transform_type2(&frame, &p)?;
        frame.meta.insert("permute_seed".into(), seed.to_string());
    }
    let dir = parent_dir(&args.out);
    ensure_dir(&dir)?;
    write_output(&args.out, frame.to_json())?;
    let recorded = TransformArgs {
        frame: absolute(&args.frame),
        ..args.clone()
    };
    let mut manifest = Manifest::new(
        "transform",
        args.rotate_seed.or(args.permute_seed),
        &recorded,
    );
    manifest.outputs.push(file_name(&args.out)?);
    manifest.write(&dir)
}

/// `count` iterations spread evenly over `0..=iters`.
fn snapshot_schedule(count: usize, iters: usize) -> Vec<usize> {
    let mut at: Vec<usize> = match count {
        0 => Vec::new(),
        1 => vec![iters],
        _ => (0..count).map(|k| k * iters / (count - 1)).collect(),
    };
    at.dedup();
    at
}

fn simulate(args: SimulateArgs) -> CliResult {
    let config = UfmConfig::new(
        args.d,
        args.classes,
        args.n_per_class,
        args.lambda,
        args.alpha,
    )?
    .with_max_iters(args.iters)
    .with_seed(args.seed)
    .with_init_scale(args.init_scale)
    .with_record_every(args.record_every);
    config.validate()?;
    ensure_dir(&args.out_dir)?;

    let planar = args.d == 2;
    if !planar && args.snapshots > 0 {
        eprintln!(
            "note: snapshots need d = 2; skipping SVG output for d = {}",
            args.d
        );
    }
    let wanted = if planar {
        snapshot_schedule(args.snapshots, args.iters)
    } else {
        Vec::new()
    };
    let mut captured: BTreeMap<usize, (Matrix, Matrix)> = BTreeMap::new();
    let (state, trajectory) = ufm::run_ufm_observed(&config, |s| {
        if wanted.binary_search(&s.iter).is_ok() {
            captured.insert(s.iter, (s.m.clone(), s.z.clone()));
        }
    })?;
    // A run that stops early is drawn once more at its final iterate.
    if wanted.iter().any(|&i| i > state.iter) {
        captured.insert(state.iter, (state.m.clone(), state.z.clone()));
    }

    let labels = config.labels();
    let mut outputs = Vec::new();
    let mut csv = Vec::new();
    trajectory.write_csv(&mut csv).expect("writing to memory");
    write_output(&args.out_dir.join("trajectory.csv"), csv)?;
    outputs.push("trajectory.csv".to_string());

    let report = collapse::gnc_report(&state.m, &state.z, &labels)?;
    write_output(&args.out_dir.join("report.json"), to_json(&report))?;
    outputs.push("report.json".to_string());

    for (iter, (m, z)) in &captured {
        let name = format!("snap_{iter}.svg");
        write_output(
            &args.out_dir.join(&name),
            svg::snapshot(m, z, &labels, *iter),
        )?;
        outputs.push(name);
    }

    let mut manifest = Manifest::new("simulate", Some(args.seed), &args).with_resolved(&config);
    manifest.outputs = outputs;
    manifest.write(&args.out_dir)?;
    println!(
        "iter {} nc1 {:e} nc2 {:e} nc3_signed {:.6} nc4 {} ref_norm {:.6}",
        state.iter,
        report.nc1,
        report.nc2,
        report.nc3_signed,
        report.nc4_agreement,
        report.ref_norm
    );
    Ok(())
}

fn channel_cmd(args: ChannelArgs) -> CliResult {
    let codebook = read_frame(&args.frame)?;
    let seed = RngSeed(args.seed);
    let (name, body) = match (&args.sweep, args.sigma) {
        (Some(sigmas), _) => {
            let rows = channel::error_exponent_sweep(&codebook, sigmas, args.trials, seed)?;
            let mut csv = Vec::new();
            channel::write_sweep_csv(&rows, &mut csv).expect("writing to memory");
            ("sweep.csv", String::from_utf8(csv).expect("CSV is UTF-8"))
        }
        (None, Some(sigma)) => {
            let result = channel::simulate_channel(&ChannelConfig {
                codebook,
                sigma,
                trials: args.trials,
                seed,
            })?;
            ("channel.json", to_json(&result))
        }
        (None, None) => return Err(Failure::invalid("give --sigma or --sweep")),
    };
    print!("{body}");
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        write_output(&dir.join(name), &body)?;
        let recorded = ChannelArgs {
            frame: absolute(&args.frame),
            ..args.clone()
        };
        let mut manifest = Manifest::new("channel", Some(args.seed), &recorded);
        manifest.outputs.push(name.to_string());
        manifest.write(dir)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PermutationSweep {
    seed: u64,
    /// Column order of each permuted frame: output column `perm[i]` is input
    /// column `i`.
    permutations: Vec<Vec<usize>>,
    bounds: Vec<f64>,
    range: f64,
}

#[derive(Debug, Default, Serialize)]
struct BoundsOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    margin_bound: Option<bounds::BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<bounds::AccuracyBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation_sweep: Option<PermutationSweep>,
}

fn bounds_cmd(args: BoundsArgs) -> CliResult {
    let mut output = BoundsOutput::default();
    if let Some(path) = &args.params {
        let params = BoundParams::from_json(&read_text(path)?)?;
        output.margin_bound = Some(bounds::multiclass_margin_bound(&params)?);
    }
    if let Some(path) = &args.supports {
        let supports = ClassSupports::from_json(&read_text(path)?)?.supports;
        let frame_path = args
            .frame
            .as_ref()
            .ok_or_else(|| Failure::invalid("--supports needs --frame"))?;
        let n_total = args
            .n_total
            .ok_or_else(|| Failure::invalid("--supports needs --n-total"))?;
        let frame = read_frame(frame_path)?;
        output.accuracy = Some(bounds::accuracy_bound_breakdown(
            &frame,
            args.rho,
            args.lipschitz,
            &supports,
            n_total,
        )?);
        if let Some(count) = args.permutations {
            let seed = args
                .seed
                .ok_or_else(|| Failure::invalid("--permutations needs --seed"))?;
            // Permutation k is drawn from seed + k.
            let matrices = (0..count as u64)
                .map(|k| linalg::random_permutation(frame.c(), RngSeed(seed.wrapping_add(k))))
                .collect::<Result<Vec<_>, _>>()?;
            let values = bounds::permutation_bound_sweep(
                &frame,
                &supports,
                args.rho,
                args.lipschitz,
                n_total,
                &matrices,
            )?;
            output.permutation_sweep = Some(PermutationSweep {
                seed,
                permutations: matrices.iter().filter_map(linalg::permutation_of).collect(),
                range: bounds::bound_range(&values),
                bounds: values,
            });
        }
    }
    let body = to_json(&output);
    print!("{body}");
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        write_output(&dir.join("bounds.json"), &body)?;
        let recorded = BoundsArgs {
            params: args.params.as_deref().map(absolute),
            supports: args.supports.as_deref().map(absolute),
            frame: args.frame.as_deref().map(absolute),
            ..args.clone()
        };
        let mut manifest = Manifest::new("bounds", args.seed, &recorded);
        manifest.outputs.push("bounds.json".to_string());
        manifest.write(dir)?;
    }
    Ok(())
}

fn parse_config<T: for<'de> Deserialize<'de>>(manifest: &Manifest) -> CliResult<T> {
    serde_json::from_value(manifest.config.clone())
        .map_err(|e| Failure::invalid(format!("manifest config for {}: {e}", manifest.command)))
}

fn replay(args: ReplayArgs) -> CliResult {
    let manifest = Manifest::load(&args.manifest)?;
    let target = args.out_dir.unwrap_or_else(|| parent_dir(&args.manifest));
    let retarget = |path: &Path| -> CliResult<PathBuf> { Ok(target.join(file_name(path)?)) };
    match manifest.command.as_str() {
        "gen" => {
            let mut a: GenArgs = parse_config(&manifest)?;
            a.out = retarget(&a.out)?;
            gen(a)
        }
        "transform" => {
            let mut a: TransformArgs = parse_config(&manifest)?;
            a.out = retarget(&a.out)?;
            transform(a)
        }
        "simulate" => {
            let mut a: SimulateArgs = parse_config(&manifest)?;
            a.out_dir = target;
            simulate(a)
        }
        "channel" => {
            let mut a: ChannelArgs = parse_config(&manifest)?;
            a.out_dir = Some(target);
            channel_cmd(a)
        }
        "bounds" => {
            let mut a: BoundsArgs = parse_config(&manifest)?;
            a.out_dir = Some(target);
            bounds_cmd(a)
        }
        other => Err(Failure::invalid(format!(
            "manifest names unknown command {other:?}"
        ))),
    }
}
