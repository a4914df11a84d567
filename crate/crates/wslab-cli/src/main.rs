//! `wslab`: build model zoos of formal-language LSTMs, learn weight
//! representations with emulation-based self-supervision, and verify
//! the interrogation theory with exact probe accounting.

mod commands;
mod config;
mod rundir;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "wslab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a population of subject LSTMs and persist the zoo.
    ZooGenerate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Override a config value (`section.key=value`); repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Jointly train an encoder and the emulator on a zoo.
    SslTrain {
        #[arg(long)]
        zoo: PathBuf,
        /// stats | flat | transformer | dws | probe | iprobe
        #[arg(long)]
        encoder: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Property prediction from a frozen encoder (or supervised from
    /// scratch with --supervised).
    Downstream {
        #[arg(long)]
        zoo: PathBuf,
        #[arg(long)]
        encoder_ckpt: PathBuf,
        /// task | accuracy
        #[arg(long)]
        target: String,
        #[arg(long)]
        supervised: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Identify oracles from a function family, counting interactions.
    Interrogate {
        /// languages | constants | worstcase
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long = "M", default_value_t = 3)]
        m_bound: u32,
        /// Family size for constants / worstcase.
        #[arg(long, default_value_t = 12)]
        size: usize,
        /// interactive | noninteractive | tree
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariance grid of fresh encoders over zoo subjects.
    InvarianceCheck {
        #[arg(long)]
        zoo: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Export embeddings of every checkpoint with PCA coordinates.
    EmbedExport {
        #[arg(long)]
        zoo: PathBuf,
        #[arg(long)]
        encoder_ckpt: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::ZooGenerate {
            config,
            out,
            workers,
            set,
        } => commands::zoo_generate(config.as_deref(), &out, workers, &set),
        Command::SslTrain {
            zoo,
            encoder,
            config,
            out,
            seed,
            set,
        } => commands::ssl_train(&zoo, &encoder, config.as_deref(), &out, seed, &set),
        Command::Downstream {
            zoo,
            encoder_ckpt,
            target,
            supervised,
            out,
            config,
            set,
        } => commands::downstream_cmd(
            &zoo,
            &encoder_ckpt,
            &target,
            supervised,
            &out,
            config.as_deref(),
            &set,
        ),
        Command::Interrogate {
            family,
            k,
            m_bound,
            size,
            mode,
            out,
        } => commands::interrogate(&family, k, m_bound, size, &mode, &out),
        Command::InvarianceCheck {
            zoo,
            samples,
            out,
            config,
            set,
        } => commands::invariance_check(&zoo, samples, &out, config.as_deref(), &set),
        Command::EmbedExport {
            zoo,
            encoder_ckpt,
            out,
        } => commands::embed_export(&zoo, &encoder_ckpt, &out),
    }
}
