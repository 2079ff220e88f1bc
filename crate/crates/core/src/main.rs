use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperpretrain::io::{emit_report, load_checkpoint, load_dataset, save_checkpoint, write_synthetic, ReportFormat};
use hyperpretrain::losses::LossKind;
use hyperpretrain::model::{EmbeddingTable, TaVariant};
use hyperpretrain::pipeline::{
    cold_start_eval, evaluate, finetune, generate_synthetic, pretrain, run_ablation, EvalReport, InteractionDataset,
    SyntheticConfig, TrainConfig,
};
use hyperpretrain::{Error, Result};

/// Multitask pretraining of recommendation embeddings over task hypergraphs.
#[derive(Parser)]
#[command(name = "hyperpretrain", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint multitask pretraining; writes an embedding checkpoint.
    Pretrain {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finetune a checkpoint (or a fresh table) with one convolution layer.
    Finetune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Start from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recall@K / NDCG@K of a checkpoint on the held-out interactions.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split seed; defaults to the seed stored in the checkpoint.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        eval_ks: Option<Vec<usize>>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// TA-variant and loss-combination ablation grids.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Cold-start comparison with and without auxiliary tasks.
    Coldstart {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
        ratios: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a planted block-model dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0.6)]
        density: f64,
        /// Also write a user-side attribute task holding each user's block.
        #[arg(long)]
        user_groups: bool,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset manifest (TOML).
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct OutputArgs {
    /// Report destination; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// `table` or `kv`.
    #[arg(long, default_value = "table")]
    format: ReportFormat,
}

/// Overrides on top of the defaults (or of `--config`).
#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    seed: u64,
    /// TOML file with any subset of the training fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs_pretrain: Option<usize>,
    #[arg(long)]
    epochs_finetune: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    negatives_per_positive: Option<usize>,
    #[arg(long)]
    pretrain_loss: Option<LossKind>,
    #[arg(long)]
    finetune_loss: Option<LossKind>,
    #[arg(long)]
    ta_layers: Option<usize>,
    #[arg(long)]
    aux_encoder_layers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    eval_ks: Option<Vec<usize>>,
    #[arg(long)]
    quantization_bins: Option<usize>,
    #[arg(long)]
    ta_variant: Option<TaVariant>,
    #[arg(long)]
    unified_attributes: Option<bool>,
    #[arg(long)]
    uniformity_weight: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

fn base_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::from_toml(&std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?),
        None => Ok(TrainConfig::default()),
    }
}

impl TrainArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = base_config(self.config.as_deref())?;
        c.seed = self.seed;
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        apply!(
            dim,
            gamma,
            beta,
            lambda_reg,
            lr,
            epochs_pretrain,
            epochs_finetune,
            batch_size,
            negatives_per_positive,
            pretrain_loss,
            finetune_loss,
            ta_layers,
            aux_encoder_layers,
            eval_ks,
            quantization_bins,
            ta_variant,
            unified_attributes,
            uniformity_weight,
            train_fraction
        );
        c.validate()?;
        Ok(c)
    }
}

fn load_split(data: &DataArgs, config: &TrainConfig) -> Result<InteractionDataset> {
    let loaded = load_dataset(&data.data, config.quantization_bins)?;
    eprint!("{}", loaded.raw.stats);
    loaded.raw.split(config.train_fraction, config.seed)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pretrain { data, train, out } => {
            let config = train.resolve()?;
            let dataset = load_split(&data, &config)?;
            let table = pretrain(&dataset, &config)?;
            save_checkpoint(&table, &config, &out)
        }
        Command::Finetune {
            data,
            train,
            checkpoint,
            out,
        } => {
            let config = train.resolve()?;
            let dataset = load_split(&data, &config)?;
            let start = match checkpoint {
                Some(p) => load_checkpoint(&p)?.table,
                None => EmbeddingTable::init(dataset.num_users, dataset.num_items, config.dim, config.seed)?,
            };
            let table = finetune(start, &dataset, &config)?;
            save_checkpoint(&table, &config, &out)
        }
        Command::Evaluate {
            data,
            checkpoint,
            seed,
            train_fraction,
            eval_ks,
            output,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let mut config = TrainConfig {
                seed: seed.unwrap_or(ck.seed),
                dim: ck.table.dim(),
                epochs_pretrain: 0,
                epochs_finetune: 0,
                ..TrainConfig::default()
            };
            if let Some(f) = train_fraction {
                config.train_fraction = f;
            }
            if let Some(ks) = eval_ks {
                config.eval_ks = ks;
            }
            config.validate()?;
            let dataset = load_split(&data, &config)?;
            let metrics = evaluate(&ck.table, &dataset, &config.eval_ks)?;
            let report = EvalReport::single(&config, "evaluation", "checkpoint", metrics);
            emit_report(&report, output.format, output.report.as_deref())
        }
        Command::Ablate { data, train, output } => {
            let config = train.resolve()?;
            let dataset = load_split(&data, &config)?;
            let report = run_ablation(&dataset, &config)?;
            emit_report(&report, output.format, output.report.as_deref())
        }
        Command::Coldstart {
            data,
            train,
            ratios,
            output,
        } => {
            let config = train.resolve()?;
            let dataset = load_split(&data, &config)?;
            let mut report = EvalReport::new(&config);
            for ratio in ratios {
                report.tables.extend(cold_start_eval(&dataset, &config, ratio)?.tables);
            }
            emit_report(&report, output.format, output.report.as_deref())
        }
        Command::Synth {
            out,
            users,
            items,
            blocks,
            noise,
            density,
            user_groups,
            seed,
        } => {
            let cfg = SyntheticConfig {
                density,
                user_groups,
                ..SyntheticConfig::new(users, items, blocks, noise, seed)
            };
            let data = generate_synthetic(&cfg)?;
            let manifest = write_synthetic(&data, &out)?;
            eprint!("{}", data.raw.stats);
            eprintln!("wrote {}", manifest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
