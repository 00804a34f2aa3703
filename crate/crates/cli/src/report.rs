use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use saw_core::bench::{emit_report, BenchReport, ReportFormat};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by `bench`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated list of json, csv, svg.
    #[arg(long, default_value = "json,csv,svg", value_delimiter = ',')]
    pub format: Vec<String>,
    /// Destination directory (default: next to the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: ReportArgs) -> anyhow::Result<()> {
    let formats = args
        .format
        .iter()
        .map(|f| f.parse::<ReportFormat>())
        .collect::<Result<Vec<_>, _>>()?;
    let report = BenchReport::load(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let out = args
        .out
        .clone()
        .or_else(|| args.input.parent().map(|p| p.to_path_buf()))
        .unwrap_or_else(|| PathBuf::from("."));
    for p in emit_report(&report, &out, &formats)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
