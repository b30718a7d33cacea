//! Command-line workflows: `train`, `eval`, `upscale` and `analyze`.

mod commands;
mod config;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub use commands::{
    cmd_analyze, cmd_eval, cmd_train, cmd_upscale, echo_config, load_weights, render_eval_csv, render_table,
    report_json, upscale_image, EvalRow, TrainSummary, CONFIG_ECHO, LOSS_CSV, METRICS_CSV,
};
pub use config::{Paths, RunConfig, KEYS};

use crate::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "epnet", version, about = "Efficient pyramid super-resolution network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train on a directory of HR images.
    Train(#[command(flatten)] Common),
    /// Score a checkpoint on a directory of HR images.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Use the raw weights instead of the averaged ones.
        #[arg(long)]
        raw_weights: bool,
    },
    /// Super-resolve one image.
    Upscale {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        raw_weights: bool,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Print parameter and multi-add counts.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Output resolution the multi-adds are counted at.
        #[arg(long, default_value = "1280x720")]
        resolution: Resolution,
    },
}

/// Flags shared by every command; they override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=4))]
    pub scale: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_espm: bool,
    #[arg(long)]
    pub no_esab: bool,
    #[arg(long)]
    pub no_lfeb: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
        match (parse(w), parse(h)) {
            (Some(width), Some(height)) => Ok(Resolution { width, height }),
            _ => Err(format!("expected positive WxH, got {s:?}")),
        }
    }
}

impl Common {
    /// Config file (or the one saved beside the checkpoint, or defaults),
    /// then flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let saved = self
            .checkpoint
            .as_ref()
            .map(|c| c.join(CONFIG_ECHO))
            .filter(|p| p.is_file());
        let mut cfg = match (&self.config, saved) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(path)) => {
                let mut c = RunConfig::load(path)?;
                c.paths = Paths::default();
                c
            }
            (None, None) => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set("train.seed", &Value::from(s))?;
        }
        if let Some(s) = self.scale {
            cfg.set("model.scale", &Value::from(s))?;
        }
        if let Some(n) = self.iters {
            cfg.train.iterations = n;
        }
        if self.data_dir.is_some() {
            cfg.paths.data_dir = self.data_dir.clone();
        }
        if self.checkpoint.is_some() {
            cfg.paths.checkpoint = self.checkpoint.clone();
        }
        if self.output_dir.is_some() {
            cfg.paths.output_dir = self.output_dir.clone();
        }
        cfg.model.use_espm &= !self.no_espm;
        cfg.model.use_esab &= !self.no_esab;
        cfg.model.use_lfeb &= !self.no_lfeb;
        Ok(cfg)
    }
}

/// Process exit status for an error: 2 usage, 3 data or parse, 4 numeric.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Config(_) | Error::Dimension { .. } | Error::Index(_) => 2,
        Error::Parse { .. } | Error::Load(_) | Error::Io { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

/// Execute a parsed command, printing to `out`.
pub fn run(cli: Cli, out: &mut impl std::io::Write) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let s = cmd_train(&common.resolve()?, out)?;
            let _ = writeln!(
                out,
                "trained: loss {:.6} -> {:.6}, checkpoint in {}",
                s.first_loss,
                s.final_loss,
                s.checkpoint.display()
            );
        }
        Command::Eval { common, raw_weights } => {
            cmd_eval(&common.resolve()?, raw_weights, out)?;
        }
        Command::Upscale { common, raw_weights, input, output } => {
            let (w, h) = cmd_upscale(&common.resolve()?, raw_weights, &input, &output)?;
            let _ = writeln!(out, "wrote {w}x{h} image to {}", output.display());
        }
        Command::Analyze { common, resolution } => {
            cmd_analyze(&common.resolve()?, resolution.width, resolution.height, out)?;
        }
    }
    Ok(())
}
