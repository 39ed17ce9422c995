//! Subcommands of the `tpsgtr` executable.
//!
//! Exit codes: 0 success, 1 gradient check over tolerance, 2 bad
//! configuration or arguments, 3 unreadable or corrupt files, 4 training
//! divergence, 5 checkpoint/dataset shape mismatch.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tpsgtr_core::decoder::{Arch, Dims, ModelParams, ModelSpec, Param};
use tpsgtr_core::metrics::{decode, report_from_outputs, DecodeConfig, MetricReport};
use tpsgtr_core::scenegraph::{generate_toy_world, SceneRecord, ToyWorld, ToyWorldConfig};
use tpsgtr_core::training::{
    check_model_gradients_against, sequence_loss_and_grads, train, Checkpoint, GroupError,
};
use tpsgtr_core::vocab::Vocab;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::dataset::{read_dataset, write_dataset};
use crate::error::{CliError, Result};
use crate::inspect::{bind_report, unbind_report, InspectInput};
use crate::report::write_report;

/// Largest relative gradient error a group may show and still pass.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Central-difference step of the gradient check.
pub const GRADCHECK_EPS: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "tpsgtr", version, about = "Scene-graph triplet captioning with tensor-product role binding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Tdbu,
    Stdbu,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Tdbu => Arch::Tdbu,
            ArchArg::Stdbu => Arch::Stdbu,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Flat key = value file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set hidden=32 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic toy-world dataset as JSON Lines
    GenData {
        #[arg(long)]
        scenes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a decoder; prints the per-epoch loss as TSV
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        arch: ArchArg,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one caption per record as "id<TAB>tokens"
    Caption {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Beam width; overrides the config's `beam` (default 1)
        #[arg(long)]
        beam: Option<usize>,
        /// Longest caption; overrides the config's `max_len` (default 32)
        #[arg(long)]
        max_len: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Decode every record, score against its references and write a JSON report
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Beam width; overrides the config's `beam` (default 1)
        #[arg(long)]
        beam: Option<usize>,
        /// Longest caption; overrides the config's `max_len` (default 32)
        #[arg(long)]
        max_len: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Bind triplets to their role matrices or take encodings apart
    Inspect {
        #[arg(long, conflicts_with = "unbind", required_unless_present = "unbind")]
        bind: bool,
        #[arg(long)]
        unbind: bool,
        #[arg(long)]
        input: PathBuf,
    },
    /// Compare backpropagated and central-difference gradients at toy dims
    Gradcheck {
        #[arg(long, value_enum)]
        arch: ArchArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Test hook: add 1 to the first backpropagated entry of this parameter
        #[arg(long, hide = true, value_name = "PARAM")]
        corrupt_gradient: Option<String>,
    },
}

/// Upper bound on decode worker threads, from `TPSGTR_THREADS` (default 1).
pub fn thread_cap() -> Result<usize> {
    match std::env::var("TPSGTR_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("TPSGTR_THREADS={v:?} must be a positive integer"))),
        },
    }
}

/// Model dims implied by a dataset and the run config.
pub fn spec_for_data(cfg: &RunConfig, arch: Arch, data: &[SceneRecord], vocab: &Vocab) -> Result<ModelSpec> {
    let first = &data[0];
    let feature = first.triplet_dim().unwrap_or(0);
    let global = first.global_feature.as_ref().map_or(0, |v| v.len());
    if arch == Arch::Tdbu && global == 0 {
        return Err(CliError::Shape(format!(
            "record {} has no global_feature, which tdbu needs; train stdbu instead",
            first.id
        )));
    }
    Ok(cfg.spec(arch, feature, global, first.tags.len(), vocab.len()))
}

/// Checks that every record fits the checkpoint's dims.
pub fn check_compatible(ckpt: &Checkpoint, data: &[SceneRecord]) -> Result<()> {
    let dims: &Dims = ckpt.params.dims();
    for rec in data {
        let mismatch = |what: &str, want: usize, got: usize| {
            Err(CliError::Shape(format!(
                "record {}: {what} is {got}, checkpoint expects {want}",
                rec.id
            )))
        };
        let feature = rec.triplet_dim().unwrap_or(0);
        if feature != dims.feature {
            return mismatch("triplet dimension", dims.feature, feature);
        }
        if rec.tags.len() != dims.tags {
            return mismatch("tag dimension", dims.tags, rec.tags.len());
        }
        if ckpt.params.arch() == Arch::Tdbu {
            let g = rec.global_feature.as_ref().map_or(0, |v| v.len());
            if g != dims.global {
                return mismatch("global feature dimension", dims.global, g);
            }
        }
    }
    Ok(())
}

/// Decodes every record, splitting the work over up to `threads` workers;
/// the output order is the record order whatever the split.
pub fn decode_all(
    ckpt: &Checkpoint,
    data: &[SceneRecord],
    cfg: &DecodeConfig,
    threads: usize,
) -> Result<Vec<Vec<usize>>> {
    let threads = threads.clamp(1, data.len().max(1));
    if threads == 1 {
        return data.iter().map(|r| Ok(decode(ckpt, r, cfg)?)).collect();
    }
    let chunk = data.len().div_ceil(threads);
    let parts: Vec<tpsgtr_core::Result<Vec<Vec<usize>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = data
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|r| decode(ckpt, r, cfg)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("decode worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(data.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn evaluate_dataset(ckpt: &Checkpoint, data: &[SceneRecord], cfg: &DecodeConfig) -> Result<MetricReport> {
    check_compatible(ckpt, data)?;
    if let Some(r) = data.iter().find(|r| r.captions.is_empty()) {
        return Err(CliError::Config(format!("record {} has no reference caption", r.id)));
    }
    let tokens = decode_all(ckpt, data, cfg, thread_cap()?)?;
    let ids: Vec<String> = data.iter().map(|r| r.id.clone()).collect();
    let cands = tokens
        .iter()
        .map(|t| ckpt.vocab.decode(t))
        .collect::<tpsgtr_core::Result<Vec<_>>>()?;
    let refs: Vec<Vec<Vec<String>>> = data.iter().map(|r| r.captions.clone()).collect();
    Ok(report_from_outputs(&ids, &cands, &refs)?)
}

/// The fixed gradient-check problem for one architecture and seed: a
/// 3-triplet scene with d = 8, d_h = 16, vocabulary 20, and a two-word
/// caption decoded over three steps.
pub fn gradcheck_problem(arch: Arch, seed: u64) -> Result<(ModelParams, SceneRecord, Vec<usize>)> {
    let world = ToyWorldConfig {
        feature_dim: 8,
        min_triplets: 3,
        max_triplets: 3,
        seed,
        ..ToyWorldConfig::default()
    };
    let rec = ToyWorld::new(world.clone())?.scene(0);
    let dims = Dims {
        feature: 8,
        global: 8,
        tags: world.tag_dim(),
        embed: 8,
        hidden: 16,
        attention: 16,
        vocab: 20,
        ..Dims::default()
    };
    let params = ModelParams::init(ModelSpec::new(arch, dims), seed)?;
    let words = 18u64;
    let caption = vec![2 + (seed % words) as usize, 2 + ((seed * 7 + 3) % words) as usize];
    Ok((params, rec, caption))
}

pub fn gradcheck(arch: Arch, seed: u64, corrupt: Option<Param>) -> Result<Vec<(Param, GroupError)>> {
    let (params, rec, caption) = gradcheck_problem(arch, seed)?;
    let grads = match corrupt {
        None => None,
        Some(p) => {
            let enc = tpsgtr_core::decoder::scene_encodings(&rec, params.spec())?;
            let (_, _, mut g) = sequence_loss_and_grads(&params, &rec, &enc, &caption)?;
            let t = g
                .get_mut(&p)
                .ok_or_else(|| CliError::Config(format!("{} is not a {} parameter", p.name(), arch.name())))?;
            t.data_mut()[0] += 1.0;
            Some(g)
        }
    };
    let report = check_model_gradients_against(&params, &rec, &caption, grads.as_ref(), GRADCHECK_EPS)?;
    Ok(report.into_iter().collect())
}

fn write_out(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text)
        .map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), source: e })
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        write_out($out, format_args!($($arg)*))
    };
}

fn decode_config(config: &ConfigArgs, beam: Option<usize>, max_len: Option<usize>) -> Result<DecodeConfig> {
    let mut cfg = config.load()?;
    cfg.beam = beam.unwrap_or(cfg.beam);
    cfg.max_len = max_len.unwrap_or(cfg.max_len);
    if cfg.beam == 0 || cfg.max_len == 0 {
        return Err(CliError::Config("beam and max_len must be at least 1".into()));
    }
    Ok(cfg.decode())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenData { scenes, seed, config, out: path } => {
            let mut cfg = config.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            if scenes == 0 {
                return Err(CliError::Config("--scenes must be at least 1".into()));
            }
            let world = cfg.toy_world();
            let data = generate_toy_world(&world, scenes).map_err(|e| CliError::Config(e.to_string()))?;
            write_dataset(&path, &data)?;
            let vocab = Vocab::from_records(&data);
            say!(out, "records\t{}\n", data.len())?;
            say!(out, "vocabulary\t{}\n", vocab.len())?;
            say!(out, "words\t{}\n", vocab.tokens()[2..].join(" "))?;
            say!(out, "feature_dim\t{}\n", world.feature_dim)?;
            say!(out, "tag_dim\t{}\n", world.tag_dim())?;
        }
        Command::Train { data, arch, seed, config, out: path } => {
            let mut cfg = config.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let records = read_dataset(&data)?;
            let vocab = Vocab::from_records(&records);
            let spec = spec_for_data(&cfg, arch.into(), &records, &vocab)?;
            let tc = cfg.train_config(spec);
            say!(out, "epoch\tloss\n")?;
            let mut failed = None;
            let outcome = train(&records, &vocab, &tc, |epoch, loss| {
                if failed.is_none() {
                    failed = say!(&mut *out, "{epoch}\t{loss}\n").err();
                }
            })?;
            if let Some(e) = failed {
                return Err(e);
            }
            save_checkpoint(&outcome.checkpoint, &path)?;
        }
        Command::Caption { ckpt, data, beam, max_len, config } => {
            let cfg = decode_config(&config, beam, max_len)?;
            let ckpt = load_checkpoint(&ckpt)?;
            let records = read_dataset(&data)?;
            check_compatible(&ckpt, &records)?;
            let tokens = decode_all(&ckpt, &records, &cfg, thread_cap()?)?;
            for (rec, t) in records.iter().zip(tokens) {
                say!(out, "{}\t{}\n", rec.id, ckpt.vocab.decode(&t)?.join(" "))?;
            }
        }
        Command::Eval { ckpt, data, out: path, beam, max_len, config } => {
            let cfg = decode_config(&config, beam, max_len)?;
            let ckpt = load_checkpoint(&ckpt)?;
            let records = read_dataset(&data)?;
            let report = evaluate_dataset(&ckpt, &records, &cfg)?;
            write_report(&report, &path)?;
            for (n, b) in report.bleu.iter().enumerate() {
                say!(out, "BLEU-{}\t{b}\n", n + 1)?;
            }
            say!(out, "ROUGE-L\t{}\n", report.rouge_l)?;
        }
        Command::Inspect { bind, unbind: _, input } => {
            let parsed = InspectInput::parse(&read_text(&input)?)?;
            let basis = RunConfig::default().spec(Arch::Stdbu, 1, 0, 1, 3).dims.basis()?;
            let text = if bind { bind_report(&parsed, &basis)? } else { unbind_report(&parsed, &basis)? };
            say!(out, "{text}")?;
        }
        Command::Gradcheck { arch, seed, corrupt_gradient } => {
            let corrupt = match corrupt_gradient {
                None => None,
                Some(name) => Some(
                    Param::from_name(&name).ok_or_else(|| CliError::Config(format!("unknown parameter {name:?}")))?,
                ),
            };
            let rows = gradcheck(arch.into(), seed, corrupt)?;
            say!(out, "param\trelative\tabsolute\n")?;
            let mut worst = 0.0f64;
            for (p, e) in &rows {
                say!(out, "{}\t{:e}\t{:e}\n", p.name(), e.relative, e.absolute)?;
                worst = worst.max(e.relative);
            }
            let pass = rows.iter().all(|(_, e)| e.relative < GRADCHECK_TOLERANCE);
            say!(out, "max\t{worst:e}\n")?;
            say!(out, "result\t{}\n", if pass { "pass" } else { "fail" })?;
            if !pass {
                return Err(CliError::GradCheck { worst });
            }
        }
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let result = run(cli.command, &mut lock);
    let _ = lock.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tpsgtr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
