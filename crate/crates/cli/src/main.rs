use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faircredit::dataset::{curate, load_csv};
use faircredit::harness::{
    emit_plot_data, emit_report, load_dataset, parse_processor, run_benchmark_on, ReportFormat, SuiteConfig,
};
use faircredit::{BenchmarkTable, DatasetId, Error, FeatureSchema, PipelineSpec, Processor, Result};

#[derive(Parser)]
#[command(name = "faircredit", version, about = "Fairness audit and bias mitigation for credit scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// `german`, `consumer` (reads CONSUMER_LOANS_CSV), or a CSV path.
    data: String,
    /// Schema for a raw CSV; without it a path is read as an encoded CSV.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, env = "FAIRCREDIT_SEED")]
    seed: Option<u64>,
    /// 0 evaluates a single split.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value = "markdown")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Curate and one-hot encode a raw CSV.
    Prepare {
        csv: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the unmitigated classifier.
    Audit(RunArgs),
    /// Run one processor next to the baseline.
    Mitigate {
        #[command(flatten)]
        run: RunArgs,
        /// e.g. `reweighing`, `dir{lambda=0.8}`, `roc{constraint=spd}`.
        #[arg(long)]
        processor: String,
        /// pre, in, post or none; checked against the processor.
        #[arg(long = "type")]
        kind: Option<String>,
    },
    /// Run a processor suite and write results.json, report.csv and report.md.
    Benchmark {
        /// Falls back to the suite's `dataset`.
        data: Option<String>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, env = "FAIRCREDIT_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Render a saved results.json.
    Report {
        results: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one scatter CSV per fairness metric.
    PlotData {
        results: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn read_table(path: &Path) -> Result<BenchmarkTable> {
    BenchmarkTable::from_json(&fs::read_to_string(path)?)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, contents)?)
}

fn run_and_print(run: &RunArgs, processors: Vec<Processor>) -> Result<()> {
    let format: ReportFormat = run.format.parse()?;
    let suite = SuiteConfig::default();
    let dataset: DatasetId = run.data.parse()?;
    let mut specs = suite.specs(dataset, run.seed, run.folds)?;
    specs.truncate(1);
    let base = specs.pop().expect("suite yields a spec");
    let specs: Vec<PipelineSpec> = processors
        .into_iter()
        .map(|processor| PipelineSpec { processor, ..base.clone() })
        .collect();
    let data = load_dataset(&base.dataset, run.schema.as_deref())?;
    let table = run_benchmark_on(&data, &specs)?;
    print!("{}", emit_report(&table, format)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { csv, schema, out } => {
            let schema = FeatureSchema::from_path(&schema)?;
            let ds = curate(&load_csv(&csv, &schema)?, &schema)?;
            ds.save_csv(&out)?;
            eprintln!("wrote {} rows x {} features to {}", ds.len(), ds.n_features(), out.display());
        }
        Command::Audit(run) => run_and_print(&run, vec![Processor::None])?,
        Command::Mitigate { run, processor, kind } => {
            let p = parse_processor(&processor, kind.as_deref())?;
            run_and_print(&run, vec![p])?;
        }
        Command::Benchmark { data, suite, schema, folds, seed, out_dir } => {
            let cfg = match &suite {
                Some(path) => SuiteConfig::from_path(path)?,
                None => SuiteConfig::default(),
            };
            let data = data
                .or_else(|| cfg.dataset.clone())
                .ok_or_else(|| Error::Config("no dataset given on the command line or in the suite".into()))?;
            let specs = cfg.specs(data.parse()?, seed, folds)?;
            let schema = schema.or_else(|| cfg.schema.clone());
            let loaded = load_dataset(&specs[0].dataset, schema.as_deref())?;
            let table = run_benchmark_on(&loaded, &specs)?;
            write(&out_dir.join("results.json"), &table.to_json()?)?;
            write(&out_dir.join("report.csv"), &emit_report(&table, ReportFormat::Csv)?)?;
            let md = emit_report(&table, ReportFormat::Markdown)?;
            write(&out_dir.join("report.md"), &md)?;
            print!("{md}");
        }
        Command::Report { results, format, out } => {
            let text = emit_report(&read_table(&results)?, format.parse()?)?;
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::PlotData { results, out_dir } => {
            for (name, contents) in emit_plot_data(&read_table(&results)?)? {
                write(&out_dir.join(&name), &contents)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
