use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use screen_trex::biobank::{load_manifest, BatchRow, Branch};
use screen_trex::sim::{mc_sweep, SimSpec};
use screen_trex::{load_csv, report, run_batch, screen_phenotype, ScreenConfig};

/// FDR-controlled variable screening with terminated random experiments.
#[derive(Parser, Debug)]
#[command(name = "screen-trex", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Screen a single phenotype.
    Screen {
        /// Predictor matrix CSV (rows = samples).
        #[arg(long)]
        x: PathBuf,
        /// Single-column response CSV.
        #[arg(long)]
        y: PathBuf,
        /// Phenotype label used in the output.
        #[arg(long, default_value = "phenotype")]
        id: String,
        #[command(flatten)]
        common: Common,
    },
    /// Screen every phenotype listed in a manifest CSV
    /// (columns x_path, y_path, phenotype_id).
    Batch {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo campaign on simulated data.
    Bench {
        /// Simulation spec as inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Comma-separated methods: ordinary, confidence, fallback.
        #[arg(long, value_delimiter = ',', default_value = "ordinary,confidence")]
        methods: Vec<Branch>,
        /// Comma-separated SNR values; defaults to the spec's SNR.
        #[arg(long, value_delimiter = ',')]
        snr_grid: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Target FDR of the fallback selector.
    #[arg(long)]
    alpha: Option<f64>,
    /// Lower bound of the acceptance window.
    #[arg(long)]
    alpha_l: Option<f64>,
    /// Upper bound of the acceptance window.
    #[arg(long)]
    alpha_u: Option<f64>,
    /// Number of random experiments [default: 20].
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap resamples [default: 1000].
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Input CSVs start with a header row.
    #[arg(long)]
    header: bool,
    /// Flat JSON config; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; without it the CSV table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl Common {
    fn config(&self) -> Result<ScreenConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))
                    .map_err(Failure::Usage)?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
                    .map_err(Failure::Usage)?
            }
            None => ScreenConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag { cfg.$field = v; }
            )*};
        }
        set!(alpha => alpha, alpha_l => alpha_l, alpha_u => alpha_u, k => k, seed => master_seed, resamples => resamples);
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.header |= self.header;
        cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
        }
        Ok(cfg)
    }
}

fn write_outputs(
    out: Option<&Path>,
    table_name: &str,
    write_table: impl FnOnce(&mut dyn Write) -> screen_trex::Result<()>,
    summary: serde_json::Value,
) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let table = dir.join(table_name);
            let mut f = io::BufWriter::new(
                fs::File::create(&table).with_context(|| format!("creating {}", table.display()))?,
            );
            write_table(&mut f)?;
            f.flush()?;
            let summary_path = dir.join("summary.json");
            fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
                .with_context(|| format!("writing {}", summary_path.display()))?;
        }
        None => write_table(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn read_spec(arg: &str) -> Result<SimSpec, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)
            .with_context(|| format!("reading spec {arg}"))
            .map_err(Failure::Usage)?
    };
    serde_json::from_str(&text)
        .context("parsing simulation spec")
        .map_err(Failure::Usage)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Screen { x, y, id, common } => {
            let cfg = common.config()?;
            let d = load_csv(&x, &y, cfg.header).map_err(anyhow::Error::from)?;
            let decision = screen_phenotype(&id, &d, &cfg).map_err(anyhow::Error::from)?;
            let summary = report::decision_json(&decision, Some(d.labels()));
            let rows = [BatchRow::Done(decision)];
            write_outputs(
                common.out.as_deref(),
                "results.csv",
                |w| report::write_results_csv(&rows, w),
                summary,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Batch { manifest, common } => {
            let cfg = common.config()?;
            let entries = load_manifest(&manifest).map_err(anyhow::Error::from)?;
            let batch = run_batch(&entries, &cfg).map_err(anyhow::Error::from)?;
            for row in &batch.rows {
                if let BatchRow::Failed { phenotype_id, error } = row {
                    eprintln!("warning: phenotype {phenotype_id} failed: {error}");
                }
            }
            write_outputs(
                common.out.as_deref(),
                "results.csv",
                |w| report::write_results_csv(&batch.rows, w),
                report::batch_summary_json(&batch),
            )?;
            if batch.all_failed() {
                return Err(Failure::Run(anyhow!("every phenotype in the manifest failed")));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            spec,
            reps,
            methods,
            snr_grid,
            common,
        } => {
            let cfg = common.config()?;
            let spec = read_spec(&spec)?;
            let grid = if snr_grid.is_empty() { vec![spec.snr] } else { snr_grid };
            let campaign = mc_sweep(&spec, &grid, reps, &methods, &cfg).map_err(|e| match e {
                screen_trex::Error::InvalidParameter(_) => Failure::Usage(e.into()),
                e => Failure::Run(e.into()),
            })?;
            for msg in &campaign.failure_messages {
                eprintln!("warning: {msg}");
            }
            write_outputs(
                common.out.as_deref(),
                "metrics.csv",
                |w| report::write_metrics_csv(&campaign, w),
                report::campaign_summary_json(&campaign),
            )?;
            if campaign.rows.is_empty() {
                return Err(Failure::Run(anyhow!("every replicate failed")));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
