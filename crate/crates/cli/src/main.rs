use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infoshock::dataset::{ShockName, Window};
use infoshock::event_study::render_table;
use infoshock::pipeline::{self, PipelineConfig, OUT_DIR_ENV};
use infoshock::synth::{generate, SynthConfig};
use infoshock::{Error, ErrorCategory};

#[derive(Parser, Debug)]
#[command(
    name = "infoshock",
    version,
    about = "Split monetary policy surprises into news and monetary components"
)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Restrict the run to one shock: pns, ffr_surprise or ff4.
    #[arg(long, global = true)]
    shock: Option<ShockName>,
    /// Restrict the run to one subsample: full or prezlb.
    #[arg(long, global = true)]
    subsample: Option<Window>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every stage and write the manifest.
    Run,
    /// Load and align the inputs and report sample sizes.
    IngestCheck,
    /// Grid search, stage-3 table, penalty table and news/monetary series.
    Decompose,
    /// Multi-gap channel regression table.
    Channels,
    /// Daily rate responses to the shock and its components.
    EventStudy,
    /// BVARX impulse responses to the monetary component.
    Bvar,
    /// Write a synthetic dataset and a matching config.
    Synth {
        /// recovery, null, noiseless or small.
        #[arg(long, default_value = "recovery")]
        preset: String,
    },
    /// Print the artifacts of a finished run as text tables.
    Report,
}

fn out_override(cli: &Cli) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .map(absolute)
}

fn absolute(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        std::env::current_dir().map(|d| d.join(&p)).unwrap_or(p)
    }
}

fn load_config(cli: &Cli) -> infoshock::Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(out) = out_override(cli) {
        cfg.out_dir = out;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = cli.shock {
        cfg.sample.shocks = vec![s];
    }
    if let Some(w) = cli.subsample {
        cfg.sample.subsamples = vec![w];
    }
    infoshock::par::init_threads(cfg.jobs);
    Ok(cfg)
}

fn print_written(arts: &pipeline::Artifacts) {
    for p in &arts.written {
        println!("wrote {}", p.display());
    }
}

fn print_warnings(w: &[String]) {
    for m in w {
        eprintln!("warning: {m}");
    }
}

fn synth(cli: &Cli, preset: &str) -> infoshock::Result<()> {
    let dir = out_override(cli).ok_or_else(|| Error::Config("synth needs --out <dir>".into()))?;
    let mut sc = SynthConfig::preset(preset)?;
    if let Some(s) = cli.seed {
        sc.seed = s;
    }
    let ds = generate(&sc)?;
    ds.write(&dir)?;
    let cfg = synth_pipeline_config(&sc);
    let path = dir.join("config.toml");
    cfg.save(&path)?;
    println!(
        "wrote synthetic dataset ({} meetings, dimension {}) and {}",
        sc.t,
        sc.d,
        path.display()
    );
    Ok(())
}

fn synth_pipeline_config(sc: &SynthConfig) -> PipelineConfig {
    let rel = |s: &str| Path::new(s).to_path_buf();
    PipelineConfig {
        seed: sc.seed,
        jobs: 0,
        out_dir: rel("out"),
        data: pipeline::DataPaths {
            embeddings: rel("embeddings.csv"),
            targets: rel("targets.csv"),
            shocks: rel("shocks.csv"),
            outcomes: rel("outcomes.csv"),
            macro_panel: rel("macro.csv"),
            embedding_dim: sc.d,
        },
        sample: Default::default(),
        decomposition: Default::default(),
        channels: Default::default(),
        bvar: Default::default(),
        base_dir: PathBuf::new(),
    }
}

fn dispatch(cli: &Cli) -> infoshock::Result<()> {
    match &cli.command {
        Command::Synth { preset } => synth(cli, preset),
        Command::Report => {
            let out = match (out_override(cli), &cli.config) {
                (Some(o), _) => o,
                (None, Some(_)) => load_config(cli)?.out_dir(),
                (None, None) => return Err(Error::Config("report needs --out or --config".into())),
            };
            print!("{}", pipeline::report(&out)?);
            Ok(())
        }
        Command::IngestCheck => {
            let cfg = load_config(cli)?;
            for s in pipeline::ingest_check(&cfg)? {
                let span = match (s.first, s.last) {
                    (Some(a), Some(b)) => format!("{a} to {b}"),
                    _ => "empty".into(),
                };
                println!(
                    "{:<7} {:<4} {:>4} meetings ({span}), {} dropped",
                    s.subsample, s.shock, s.n_obs, s.dropped
                );
            }
            Ok(())
        }
        Command::Decompose => {
            let cfg = load_config(cli)?;
            let (res, arts) = pipeline::decompose_stage(&cfg)?;
            print_warnings(&res.warnings);
            print_written(&arts);
            Ok(())
        }
        Command::Channels => {
            let cfg = load_config(cli)?;
            let ((), arts) = pipeline::channels_stage(&cfg)?;
            print_written(&arts);
            Ok(())
        }
        Command::EventStudy => {
            let cfg = load_config(cli)?;
            let (res, arts) = pipeline::event_study_stage(&cfg)?;
            print_warnings(&res.warnings);
            print!("{}", render_table("Event study", &res.rows));
            print_written(&arts);
            Ok(())
        }
        Command::Bvar => {
            let cfg = load_config(cli)?;
            let (res, arts) = pipeline::bvar_stage(&cfg)?;
            print_warnings(&res.warnings);
            println!("estimated on {} months", res.n_months);
            print_written(&arts);
            Ok(())
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            let m = pipeline::run(&cfg)?;
            print_warnings(&m.warnings);
            for a in &m.artifacts {
                println!("wrote {}", cfg.out_dir().join(a).display());
            }
            println!("config hash {}", m.config_hash);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numeric => 4,
            })
        }
    }
}
