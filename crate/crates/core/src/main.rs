use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lccd::pipeline::{self, Manifest, PipelineConfig};
use lccd::synthetic::{self, SyntheticSpec};
use lccd::Result;

/// Local colour contrast descriptors: extraction, encoding and classification.
#[derive(Parser)]
#[command(name = "lccd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Working directory for descriptors, models, encodings and reports.
    #[arg(long, default_value = "lccd-out")]
    out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WithManifest {
    #[command(flatten)]
    common: Common,
    /// CSV of image_path,label,split[,partition].
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Describe every manifest image; writes spatial.dsc and channel.dsc.
    Extract {
        #[command(flatten)]
        args: WithManifest,
        /// Exit nonzero if any image had to be skipped.
        #[arg(long)]
        strict: bool,
    },
    /// Write a luminance-gradient stream (gradient.dsc) usable with --external.
    Gradient {
        #[command(flatten)]
        args: WithManifest,
        #[arg(long)]
        strict: bool,
    },
    /// Fit PCA and GMM per stream on the train split.
    Fit {
        #[command(flatten)]
        args: WithManifest,
        /// Additional descriptor files to fit and fuse.
        #[arg(long)]
        external: Vec<PathBuf>,
    },
    /// Encode every image and fuse the streams into encodings.enc.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        external: Vec<PathBuf>,
    },
    /// Train and evaluate the classifier; writes report.json and CSVs.
    TrainEval {
        #[command(flatten)]
        args: WithManifest,
    },
    /// Print a written report and re-emit its CSVs.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic colour-texture dataset with a manifest.
    Synth {
        #[arg(long, default_value = "lccd-synth")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        per_class: usize,
        #[arg(long, default_value_t = 30)]
        train_per_class: usize,
        #[arg(long, default_value_t = 160)]
        size: usize,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { args, strict } => {
            let cfg = load_config(&args.common)?;
            let manifest = Manifest::load(&args.manifest)?;
            let s = pipeline::extract(&cfg, &manifest, &args.common.out_dir, strict)?;
            println!("described {} images, skipped {}", s.written, s.skipped.len());
        }
        Command::Gradient { args, strict } => {
            let cfg = load_config(&args.common)?;
            let manifest = Manifest::load(&args.manifest)?;
            let s = pipeline::extract_gradient(&cfg, &manifest, &args.common.out_dir, strict)?;
            println!("described {} images, skipped {}", s.written, s.skipped.len());
        }
        Command::Fit { args, external } => {
            let cfg = load_config(&args.common)?;
            let manifest = Manifest::load(&args.manifest)?;
            for f in pipeline::fit(&cfg, &manifest, &args.common.out_dir, &external)? {
                println!(
                    "{}: {} -> {} dims, {} train images, GMM {} iterations",
                    f.stream, f.input_dim, f.output_dim, f.train_images, f.gmm_iterations
                );
            }
        }
        Command::Encode { common, external } => {
            let cfg = load_config(&common)?;
            let s = pipeline::encode(&cfg, &common.out_dir, &external)?;
            println!("encoded {} images, {} dims", s.images, s.dim);
        }
        Command::TrainEval { args } => {
            let cfg = load_config(&args.common)?;
            let manifest = Manifest::load(&args.manifest)?;
            pipeline::train_eval(&cfg, &manifest, &args.common.out_dir)?;
            print!("{}", pipeline::report(&args.common.out_dir)?);
        }
        Command::Report { common } => {
            print!("{}", pipeline::report(&common.out_dir)?);
        }
        Command::Synth {
            out_dir,
            seed,
            classes,
            per_class,
            train_per_class,
            size,
        } => {
            let spec = SyntheticSpec {
                classes,
                per_class,
                train_per_class,
                width: size,
                height: size,
                seed,
            };
            let manifest = synthetic::write_dataset(&out_dir, &spec)?;
            println!("wrote {}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
