use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{exit, Error, Result};
use crate::export::{episode_json, slice, write_episode_csv, write_slice_csv, SliceSpec};
use crate::precompute::{check_converged, compute, load_tables, write_artifacts, write_json};
use crate::simulate::{episode_exit_code, simulate, WallClock};
use crate::tables::{load_table, value_path};
use crate::verify::verify_dir;

/// Tracking-error-bound precomputation and robust planning simulator.
#[derive(Debug, Parser)]
#[command(name = "fastrack", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the games and write tables, gradients, reports and teb.json.
    Precompute(Precompute),
    /// Run one episode and write episode.csv, episode.json and metrics.json.
    Simulate(Simulate),
    /// Run the invariant suites against a table directory.
    Verify(Verify),
    /// Write a two-dimensional slice of a value table as CSV.
    ExportSlice(ExportSlice),
}

#[derive(Debug, Args)]
pub struct Precompute {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Simulate {
    #[arg(long)]
    pub config: PathBuf,
    /// Table directory; defaults to the config's `output`.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Verify {
    #[arg(long)]
    pub tables: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportSlice {
    /// Table directory holding `--table`.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Table name (`X4`, `Z2`, ...) or path to a `.tbl` file.
    #[arg(long)]
    pub table: String,
    /// Fixed axis value, `name=value`. Repeatable.
    #[arg(long = "fix", num_args = 1..)]
    pub fix: Vec<String>,
    /// The two free axes, `a,b`.
    #[arg(long)]
    pub free: String,
    /// Output CSV file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Precompute(a) => cmd_precompute(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::ExportSlice(a) => cmd_export_slice(&a),
    }
}

fn cmd_precompute(a: &Precompute) -> Result<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let dir = a.out.clone().unwrap_or_else(|| cfg.output.clone());
    let mut last = String::new();
    let pre = compute(&cfg, &mut |name, step, delta| {
        if step % 500 == 0 || name != last {
            eprintln!("{name}: step {step} change {delta:.3e}");
            last = name.to_string();
        }
    })?;
    write_artifacts(&pre, &dir)?;
    for s in &pre.solutions {
        let r = &s.report;
        println!(
            "{}: v_bar {:.6} steps {} pseudo_time {:.3} s final_change {:.3e} converged {}",
            r.subsystem, r.min_value, r.steps, r.pseudo_time, r.final_delta, r.converged
        );
    }
    if let Some(teb) = &pre.teb {
        println!(
            "half-widths x {:.4} y {:.4} z {:.4} m",
            teb.half_widths[0], teb.half_widths[1], teb.half_widths[2]
        );
    }
    check_converged(&pre.manifest)?;
    println!("wrote {}", dir.display());
    Ok(exit::OK)
}

fn cmd_simulate(a: &Simulate) -> Result<i32> {
    let cfg = RunConfig::load(&a.config)?;
    let tables = a.tables.clone().unwrap_or_else(|| cfg.output.clone());
    let out = a.out.clone().unwrap_or_else(|| cfg.output.clone());
    let loaded = load_tables(&tables)?;
    let (log, metrics) = simulate(&cfg, &loaded, &mut WallClock::default())?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let csv_path = out.join("episode.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_episode_csv(&log, std::io::BufWriter::new(file))?;
    let json_path = out.join("episode.json");
    fs::write(&json_path, episode_json(&log)).map_err(|e| Error::io(&json_path, e))?;
    write_json(&out.join("metrics.json"), &metrics)?;
    println!(
        "outcome {:?} steps {} max_error {:.4?} collisions {} containment {} mean_latency {:.3e} s",
        metrics.outcome,
        metrics.steps,
        metrics.max_error,
        metrics.collisions,
        metrics.containment_held,
        metrics.mean_latency_s
    );
    Ok(episode_exit_code(&metrics))
}

fn cmd_verify(a: &Verify) -> Result<i32> {
    let results = verify_dir(&a.tables)?;
    for r in &results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed) {
        Ok(exit::OK)
    } else {
        Ok(exit::VERIFY)
    }
}

fn cmd_export_slice(a: &ExportSlice) -> Result<i32> {
    let direct = Path::new(&a.table);
    let path = if direct.is_file() {
        direct.to_path_buf()
    } else {
        let dir = a
            .tables
            .as_deref()
            .ok_or_else(|| Error::Config(format!("{} is not a file and --tables is not set", a.table)))?;
        value_path(dir, &a.table)
    };
    let table = load_table(&path)?;
    let spec = SliceSpec::parse(&a.fix, &a.free)?;
    let rows = slice(&table, &spec)?;
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Error::io(p, e))?;
            write_slice_csv(&spec.free, &rows, std::io::BufWriter::new(f))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_slice_csv(&spec.free, &rows, &mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(exit::OK)
}
