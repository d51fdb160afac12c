//! Command-line driver.
//!
//! Settings resolve as flags > `--config` TOML > `CONCENTRA_*` environment
//! variables > defaults. Usage errors exit with 2, computation errors with 1.

mod commands;
mod manifest;
mod settings;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use manifest::{file_digest, manifest_path, sha256_hex, RunManifest};
pub use settings::{Layer, OutputFormat, Settings, ENV_PREFIX};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "concentra", version, about = "Retail concentration analytics over establishment microdata")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML file with default settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["product", "industry"])]
    market_def: Option<String>,
    #[arg(long, global = true, value_parser = ["zip", "county", "cz", "msa", "national"])]
    geo: Option<String>,
    #[arg(long, global = true, value_parser = ["sales", "employment"])]
    weights: Option<String>,
    #[arg(long, global = true, value_parser = ["contemporaneous", "base", "rst", "decomp"])]
    scheme: Option<String>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// `line_code,category` CSV extending the default category map.
    #[arg(long, global = true)]
    categories: Option<PathBuf>,
    /// Write results here (with a manifest beside it) instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Establishment CSV.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Pre-built cube CSV (firm_id,market_key,location_id,year,sales).
    #[arg(long)]
    cube: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate establishments and write the aggregated sales cube.
    Ingest {
        #[arg(long, short)]
        input: PathBuf,
        /// market_key,year,deflator CSV.
        #[arg(long)]
        deflators: Option<PathBuf>,
        /// Write rejected rows here.
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Local or national HHI by year.
    Hhi {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        year: Option<i32>,
        /// Weight year for the base and rst schemes.
        #[arg(long)]
        weight_year: Option<i32>,
        #[arg(long, value_parser = ["local", "national"], default_value = "local")]
        measure: String,
    },
    /// Sales-weighted top-N firm share of local markets.
    Topn {
        #[command(flatten)]
        source: Source,
        #[arg(long, short, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Split the national HHI into local and cross-market terms.
    Decompose {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        year: Option<i32>,
        /// One product; all products plus the aggregate by default.
        #[arg(long)]
        product: Option<String>,
    },
    /// Market-structure counterfactuals.
    Counterfactual {
        #[command(subcommand)]
        kind: Counterfactual,
    },
    /// Bounds on local concentration once non-store sales are included.
    Bounds {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Cross-section change, end-weighted change and the gap between them.
    Rst {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        base: i32,
        #[arg(long)]
        target: i32,
    },
    /// Markup estimation and implied changes.
    Markups {
        #[command(subcommand)]
        kind: Markups,
    },
    /// Synthetic economies and equilibrium markets.
    Synth {
        #[command(subcommand)]
        kind: Synth,
    },
    /// Monte-Carlo check of closed-form metrics.
    Oracle {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        year: Option<i32>,
        #[arg(long)]
        product: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
}

#[derive(Debug, Subcommand)]
enum Counterfactual {
    /// National HHI with every firm split by location.
    Breakup {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        year: Option<i32>,
    },
    /// Target-year shares reassigned to base-year firms by rank.
    Rank {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        base: i32,
        #[arg(long)]
        target: i32,
    },
}

#[derive(Debug, Subcommand)]
enum Markups {
    /// Invert observed margins into elasticities.
    Fit {
        #[command(flatten)]
        source: Source,
        /// product_or_industry,year,margin_ratio CSV.
        #[arg(long)]
        margins: PathBuf,
    },
    /// Margin change implied by a change in mean local HHI.
    Imply {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Homogeneous-good Cournot margins instead of CES.
        #[arg(long)]
        cournot: bool,
    },
}

#[derive(Debug, Subcommand)]
enum Synth {
    /// Write a synthetic establishment CSV with metadata and category map.
    Generate {
        /// EconomyConfig TOML.
        #[arg(long)]
        economy: Option<PathBuf>,
        #[arg(long, value_parser = ["default", "expansion"], default_value = "default")]
        preset: String,
        /// Approximate number of establishment-year rows.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Solve one CES-Cournot market.
    Equilibrium {
        #[arg(long, value_delimiter = ',', required = true)]
        costs: Vec<f64>,
        #[arg(long)]
        eps: f64,
    },
}

/// What a command produced.
struct Outcome {
    stdout: String,
    notes: Vec<String>,
}

struct Context {
    settings: Settings,
    /// A seed was given by flag, config or environment.
    seed_set: bool,
    output: Option<PathBuf>,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    start: Instant,
}

impl Context {
    fn manifest(&self, extra: &[PathBuf]) -> Result<RunManifest> {
        let resolved = serde_json::to_vec(&self.settings)?;
        let inputs = self
            .inputs
            .iter()
            .chain(extra)
            .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
            .collect::<Result<_>>()?;
        Ok(RunManifest {
            command: self.argv.clone(),
            config_sha256: sha256_hex(&resolved),
            inputs,
            seed: self.settings.seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
        })
    }

    /// Sends `text` to the output file (plus manifest) or to stdout.
    fn emit(&self, text: String, notes: Vec<String>, inputs: &[PathBuf]) -> Result<Outcome> {
        match &self.output {
            None => Ok(Outcome { stdout: text, notes }),
            Some(path) => {
                std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
                self.write_manifest(path, inputs)?;
                let mut notes = notes;
                notes.push(format!("wrote {}", path.display()));
                Ok(Outcome {
                    stdout: String::new(),
                    notes,
                })
            }
        }
    }

    fn write_manifest(&self, path: &std::path::Path, inputs: &[PathBuf]) -> Result<()> {
        self.manifest(inputs)?.write_beside(path)?;
        Ok(())
    }
}

fn usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_))
}

/// Runs the CLI with explicit arguments, environment and streams; returns
/// the exit code.
pub fn run<I, T>(
    args: I,
    env: impl Fn(&str) -> Option<String>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = if e.use_stderr() { e.render().to_string() } else { e.to_string() };
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut json_errors = cli.global.format.as_deref() == Some("json");
    let result = prepare(&cli, &env, argv).and_then(|ctx| {
        json_errors = ctx.settings.format == OutputFormat::Json;
        match ctx.settings.threads {
            None => commands::execute(&cli.command, &ctx),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(|| commands::execute(&cli.command, &ctx)),
        }
    });
    match result {
        Ok(o) => {
            let _ = stdout.write_all(o.stdout.as_bytes());
            for n in o.notes {
                let _ = writeln!(stderr, "{n}");
            }
            0
        }
        Err(e) => {
            if json_errors {
                let v = serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string()}});
                let _ = writeln!(stderr, "{v}");
            } else {
                let _ = writeln!(stderr, "error[{}]: {e}", e.kind());
            }
            if usage_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn prepare(cli: &Cli, env: &dyn Fn(&str) -> Option<String>, argv: Vec<String>) -> Result<Context> {
    let g = &cli.global;
    let flags = Layer {
        market_def: g.market_def.clone(),
        geo: g.geo.clone(),
        weights: g.weights.clone(),
        scheme: g.scheme.clone(),
        format: g.format.clone(),
        seed: g.seed,
        threads: g.threads.map(|n| n as usize),
        categories: g.categories.clone(),
    };
    let config_path = g.config.clone().or_else(|| env(&format!("{ENV_PREFIX}CONFIG")).map(PathBuf::from));
    let config = match &config_path {
        Some(p) => Layer::from_toml_file(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
            other => other,
        })?,
        None => Layer::default(),
    };
    let merged = flags.over(config).over(Layer::from_env(env)?);
    let seed_set = merged.seed.is_some();
    let settings = Settings::resolve(merged)?;
    let mut inputs: Vec<PathBuf> = config_path.into_iter().collect();
    inputs.extend(settings.categories.clone());
    Ok(Context {
        settings,
        seed_set,
        output: g.output.clone(),
        argv,
        inputs,
        start: Instant::now(),
    })
}

/// Entry point for the binary: real arguments, environment and streams.
pub fn main_entry() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run(
        std::env::args_os(),
        |k| std::env::var(k).ok(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
