use calibag_cli::config::{validate_config, FileConfig, Recipe, RunConfig};
use calibag_cli::recipes::{list_recipes, run_recipe};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "calibag",
    about = "Batch experiment runner: calibration studies and sequential-learning simulations",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one recipe and write CSV tables plus summary.json.
    Run(RunArgs),
    /// List the available recipes.
    List,
    /// Parse and validate a config file without running anything.
    Validate {
        /// Config file to check.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Recipe name (see `calibag list`).
    #[arg(long)]
    recipe: Option<String>,

    /// Base seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,

    /// Bag count override.
    #[arg(long)]
    bags: Option<usize>,

    /// Noise level override.
    #[arg(long)]
    noise: Option<f64>,

    /// Confidence level for recalibration and coverage.
    #[arg(long)]
    p: Option<f64>,

    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    /// Where to write tables and summary.json.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Directory holding fixture CSVs and schemas.
    #[arg(long)]
    fixture_dir: Option<PathBuf>,

    /// Optional TOML config; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Restore full-scale parameters (e.g. the thermoelectric study).
    #[arg(long)]
    full: bool,
}

fn resolve(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::from_path(path)?,
        None => FileConfig::default(),
    };
    let recipe_name = args
        .recipe
        .clone()
        .or_else(|| file.recipe.clone())
        .ok_or_else(|| anyhow::anyhow!("no recipe given: pass --recipe or set it in the config"))?;
    let mut config = RunConfig::new(Recipe::from_str(&recipe_name)?);
    config.apply_file(&file);
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.trials {
        config.trials = Some(v);
    }
    if let Some(v) = args.bags {
        config.bags = Some(v);
    }
    if let Some(v) = args.noise {
        config.noise = Some(v);
    }
    if let Some(v) = args.p {
        config.p = v;
    }
    if let Some(v) = &args.methods {
        config.methods = Some(v.clone());
    }
    if let Some(v) = &args.output_dir {
        config.output_dir = v.clone();
    }
    if let Some(v) = &args.fixture_dir {
        config.fixture_dir = v.clone();
    }
    if args.full {
        config.full = true;
    }
    if !(0.0 < config.p && config.p < 1.0) {
        anyhow::bail!("p = {} outside (0, 1)", config.p);
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };

    match cli.command {
        Command::List => {
            print!("{}", list_recipes());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match validate_config(&config) {
            Ok(parsed) => {
                println!("{} is valid", config.display());
                println!("recipe      = {}", parsed.recipe.as_deref().unwrap_or("(default: required at run time)"));
                println!("seed        = {}", parsed.seed.map_or("0 (default)".into(), |v| v.to_string()));
                println!("p           = {}", parsed.p.map_or("0.683 (default)".into(), |v| v.to_string()));
                println!("trials      = {}", parsed.trials.map_or("recipe default".into(), |v| v.to_string()));
                println!("bags        = {}", parsed.bags.map_or("recipe default".into(), |v| v.to_string()));
                println!("noise       = {}", parsed.noise.map_or("recipe default".into(), |v| v.to_string()));
                println!("output_dir  = {}", parsed.output_dir.as_deref().map_or("results".into(), |v| v.display().to_string()));
                println!("fixture_dir = {}", parsed.fixture_dir.as_deref().map_or("fixtures".into(), |v| v.display().to_string()));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid config: {e:#}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Run(args) => {
            let config = match resolve(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("usage error: {e:#}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            eprintln!("running recipe '{}' (seed {})", config.recipe, config.seed);
            match run_recipe(&config) {
                Ok(bundle) => {
                    for t in &bundle.tables {
                        eprintln!("wrote {}", t.display());
                    }
                    eprintln!("wrote {}", bundle.summary_path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_DATA)
                }
            }
        }
    }
}
