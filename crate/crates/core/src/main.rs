use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use actgen::analysis::plot::{render_svg, write_csv};
use actgen::analysis::report::{fit_latent_pca, style_trajectories, trajectory_of};
use actgen::analysis::{evaluate, EvalConfig};
use actgen::checkpoint::Checkpoint;
use actgen::data::ntu::{label_from_file_name, parse_ntu_skeleton, NTU_JOINTS};
use actgen::data::synth::{default_specs, synth_generate, SynthConfig};
use actgen::data::{apply_normalization, resample, ActionSequence, Dataset};
use actgen::generation::{chain, generate, ChainRequest, GenerationRequest};
use actgen::pipeline::{prepare, train_checkpointed};
use actgen::training::TrainConfig;
use actgen::{Error, Result};

#[derive(Parser)]
#[command(name = "actgen", version, about = "Skeleton action generation with an autoencoder and a conditional GAN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic action dataset as canonical JSON.
    Synth(SynthArgs),
    /// Convert NTU `.skeleton` files into a canonical JSON dataset.
    ImportNtu(ImportArgs),
    /// Train all networks on a dataset and write a checkpoint.
    Train(TrainArgs),
    /// Generate one action from an initial pose.
    Generate(GenerateArgs),
    /// Generate consecutive actions, each starting where the previous ended.
    Chain(ChainArgs),
    /// Write the full metric report as JSON.
    Eval(EvalArgs),
    /// Export 2-D latent trajectories as SVG and CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 300)]
    per_class: usize,
    #[arg(long, default_value_t = 32)]
    seq_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path.
    #[arg(long, short)]
    out: PathBuf,
    /// Optional CSV copy.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    /// `.skeleton` files; labels come from the `A<nnn>` part of each name.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value_t = 32)]
    seq_len: usize,
    /// Number of classes; defaults to the largest label seen plus one.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Raw dataset JSON; normalization is fitted on it.
    #[arg(long)]
    data: PathBuf,
    /// Final checkpoint path.
    #[arg(long, short)]
    out: PathBuf,
    /// TOML training config (same fields as the checkpoint's `train` object).
    #[arg(long, env = "ACTGEN_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d_steps: Option<usize>,
    /// Per-step metrics as JSON lines.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Directory for periodic checkpoints named `step-<n>.json`.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// JSON output (canonical dataset format); stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Convert back to source units (root-relative).
    #[arg(long)]
    denormalize: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    label: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON array with one raw frame; the checkpoint's default pose otherwise.
    #[arg(long)]
    initial: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated class ids.
    #[arg(long, value_delimiter = ',', required = true)]
    labels: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    initial: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Raw training dataset (classifier fitting).
    #[arg(long)]
    data: PathBuf,
    /// Raw held-out dataset.
    #[arg(long)]
    held_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Raw dataset whose latent codes fix the projection.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    label: usize,
    #[arg(long, default_value_t = 10)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Also draw this many real trajectories per class.
    #[arg(long, default_value_t = 1)]
    real_per_class: usize,
    #[arg(long)]
    svg: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let specs = default_specs(a.classes, a.seed)?;
    let ds = synth_generate(&specs, &SynthConfig::default(), a.per_class, a.seq_len, a.seed)?;
    ds.write(&a.out)?;
    if let Some(p) = a.csv {
        ds.write_csv(BufWriter::new(File::create(p)?))?;
    }
    info!("wrote {} sequences to {}", ds.len(), a.out.display());
    Ok(())
}

fn import_ntu(a: ImportArgs) -> Result<()> {
    let mut sequences = Vec::new();
    for path in &a.files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let label = label_from_file_name(name)
            .ok_or_else(|| Error::Config(format!("no action id in file name {name}")))?;
        let text = std::fs::read_to_string(path)?;
        let rec = parse_ntu_skeleton(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let frames = rec
            .primary_sequence()
            .ok_or_else(|| Error::Degenerate(format!("{}: no tracked body", path.display())))?;
        let seq = ActionSequence {
            label,
            frames,
            meta: name.to_string(),
        };
        sequences.push(resample(&seq, a.seq_len)?);
    }
    let max_label = sequences.iter().map(|s| s.label).max().unwrap_or(0);
    let ds = Dataset {
        classes: a.classes.unwrap_or(max_label + 1),
        joints: NTU_JOINTS,
        dims: 3,
        sequences,
    };
    ds.validate()?;
    ds.write(&a.out)?;
    info!("imported {} sequences", ds.len());
    Ok(())
}

fn load_train_config(a: &TrainArgs, data: &Dataset) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => {
            let mut cfg = TrainConfig::default();
            cfg.model.frame_dim = data.frame_dim();
            cfg.model.classes = data.classes;
            if let Some(n) = data.seq_len() {
                cfg.model.seq_len = n;
                cfg.model.window = actgen::model::ModelConfig::default_window(n);
            }
            cfg
        }
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lambda {
        cfg.model.lambda = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.d_steps {
        cfg.d_steps_per_g = v;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let raw = Dataset::read(&a.data)?;
    let cfg = load_train_config(&a, &raw)?;
    let prepared = prepare(&raw)?;
    if let Some(dir) = &a.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let (ck, history) = train_checkpointed(&prepared, &cfg, |ck| {
        if let Some(dir) = &a.checkpoint_dir {
            let path = dir.join(format!("step-{}.json", ck.step));
            ck.save(&path)?;
            info!("checkpoint {}", path.display());
        }
        Ok(())
    })?;
    if let Some(p) = &a.metrics {
        let mut w = BufWriter::new(File::create(p)?);
        for m in &history {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    ck.save(&a.out)?;
    if let Some(last) = history.last() {
        info!("trained {} steps; last metrics {last:?}", history.len());
    }
    Ok(())
}

fn initial_pose(ck: &Checkpoint, path: Option<&Path>) -> Result<Vec<f64>> {
    match path {
        None => Ok(ck.default_initial.clone()),
        Some(p) => {
            let frame: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            if frame.len() != ck.model.frame_dim {
                return Err(Error::Config(format!(
                    "initial frame has {} values, expected {}",
                    frame.len(),
                    ck.model.frame_dim
                )));
            }
            ck.normalization.normalize_frame(&frame)
        }
    }
}

fn emit(ck: &Checkpoint, sequences: Vec<ActionSequence>, out: &OutputArgs) -> Result<()> {
    let stats = ck.normalization;
    let sequences = sequences
        .into_iter()
        .map(|mut s| {
            if out.denormalize {
                s.frames = s.frames.iter().map(|f| stats.denormalize_frame(f)).collect();
            }
            s
        })
        .collect();
    let ds = Dataset {
        classes: ck.model.classes,
        joints: ck.model.frame_dim / stats.dims,
        dims: stats.dims,
        sequences,
    };
    let mut json = ds.to_json()?;
    json.push('\n');
    write_text(out.out.as_deref(), &json)?;
    if let Some(p) = &out.csv {
        ds.write_csv(BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn generate_cmd(a: GenerateArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let bundle = ck.bundle()?;
    let req = GenerationRequest {
        initial: initial_pose(&ck, a.initial.as_deref())?,
        label: a.label,
        z: None,
        seed: a.seed,
    };
    let seq = generate(&bundle, &req)?;
    emit(&ck, vec![seq], &a.output)
}

fn chain_cmd(a: ChainArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let bundle = ck.bundle()?;
    let req = ChainRequest {
        initial: initial_pose(&ck, a.initial.as_deref())?,
        labels: a.labels,
        z: None,
        seed: a.seed,
    };
    emit(&ck, chain(&bundle, &req)?, &a.output)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let bundle = ck.bundle()?;
    let train = apply_normalization(&Dataset::read(&a.data)?, &ck.normalization)?;
    let held = apply_normalization(&Dataset::read(&a.held_out)?, &ck.normalization)?;
    let cfg = EvalConfig {
        seed: a.seed,
        ..EvalConfig::default()
    };
    let report = evaluate(&bundle, &train, &held, &cfg)?;
    write_text(a.out.as_deref(), &report.to_json()?)
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let bundle = ck.bundle()?;
    let data = apply_normalization(&Dataset::read(&a.data)?, &ck.normalization)?;
    let pca = fit_latent_pca(&bundle, &data)?;
    let initial = initial_pose(&ck, a.initial.as_deref())?;
    let mut traj = style_trajectories(&bundle, &pca, &initial, a.label, a.draws, a.seed)?;
    for (k, idx) in data.indices_by_label().iter().enumerate() {
        for (j, &i) in idx.iter().take(a.real_per_class).enumerate() {
            let h = bundle.encode_sequence(&data.sequences[i].frames)?;
            traj.push(trajectory_of(&pca, &format!("real{k}_{j}"), k, &h)?);
        }
    }
    std::fs::write(&a.svg, render_svg(&traj))?;
    if let Some(p) = a.csv {
        write_csv(&traj, BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::ImportNtu(a) => import_ntu(a),
        Command::Train(a) => train(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Chain(a) => chain_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors exit with status 2 inside `parse`.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
