use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hetjoin_cli::{
    cmd_gen, cmd_pack, cmd_plan, cmd_run, cmd_sweep, cmd_verify, dims_csv, read_placement,
    sweep_csv, to_json, ExperimentConfig, Overrides, SweepParam,
};

/// Plan and simulate one-round joins on heterogeneous fleets.
#[derive(Parser)]
#[command(name = "hetjoin", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower bound and per-machine side lengths, as JSON.
    Plan {
        /// Print `machine,var,lambda` CSV instead of the JSON report.
        #[arg(long)]
        emit_dims: bool,
        /// Also write the dims CSV here.
        #[arg(long)]
        dims: Option<PathBuf>,
    },
    /// Placement of the machines' boxes in the output grid, as JSON; the
    /// merge trace goes to stderr.
    Pack {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write relation CSVs for the first seed.
    Gen,
    /// Execute one round and report per-machine loads.
    Run,
    /// Check coverage, inflation and oracle equality; exits 1 on failure.
    Verify {
        /// Placement JSON (as written by `pack`) to check instead of the
        /// computed one.
        #[arg(long)]
        placement: Option<PathBuf>,
    },
    /// Vary one parameter and report load ratios as CSV.
    Sweep {
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let exp = ExperimentConfig::assemble(&cli.overrides)?;
    match cli.cmd {
        Cmd::Plan { emit_dims, dims } => {
            let out = cmd_plan(&exp)?;
            let csv = dims_csv(&exp.query, &out.partition);
            if let Some(p) = dims.as_deref().or(exp.output.dims.as_deref()) {
                emit(Some(p), &csv)?;
            }
            let json = to_json(&out)?;
            if emit_dims {
                if let Some(p) = exp.output.report.as_deref() {
                    emit(Some(p), &json)?;
                }
                emit(None, &csv)?;
            } else {
                emit(exp.output.report.as_deref(), &json)?;
            }
        }
        Cmd::Pack { out } => {
            let packed = cmd_pack(&exp)?;
            for line in &packed.placement.trace {
                eprintln!("{line}");
            }
            let path = out.as_deref().or(exp.output.placement.as_deref());
            emit(path, &to_json(&packed)?)?;
        }
        Cmd::Gen => {
            let dir = exp
                .data_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("data"));
            for p in cmd_gen(&exp, &dir)? {
                println!("{}", p.display());
            }
        }
        Cmd::Run => {
            let report = cmd_run(&exp, exp.seeds[0])?;
            emit(exp.output.report.as_deref(), &to_json(&report)?)?;
        }
        Cmd::Verify { placement } => {
            let placement = placement.as_deref().map(read_placement).transpose()?;
            let summary = cmd_verify(&exp, placement)?;
            print!("{}", summary.render());
            return Ok(summary.passed());
        }
        Cmd::Sweep { param, values, out } => {
            let declared = exp.sweep.clone();
            let param = param
                .or(declared.as_ref().map(|s| s.parameter))
                .context("no sweep parameter: set [sweep] or --param")?;
            let values = values
                .or(declared.map(|s| s.values))
                .context("no sweep values: set [sweep] or --values")?;
            let rows = cmd_sweep(&exp, param, &values)?;
            emit(
                out.as_deref().or(exp.output.sweep.as_deref()),
                &sweep_csv(&rows),
            )?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
