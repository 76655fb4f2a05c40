//! Command-line front end. Exit codes: 0 success, 1 runtime failure or
//! failed expectation, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{compute_statistics, statistics_csv, statistics_json, DEFAULT_WINDOW_MS};
use crate::engine::{run, validate, write_exports, ExportFormat, NetworkSpec, Recording};
use crate::error::{Result, SnnError};
use crate::experiments::{preset, preset_names, run_preset_spec, sweep, sweep_csv, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "snn-tune", version, about = "Discrete-time spiking network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network spec and print its diagnostics.
    Validate {
        /// Network spec JSON file.
        spec: PathBuf,
    },
    /// Simulate a network spec and write its recording.
    Run {
        /// Network spec JSON file. Never modified.
        spec: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Export written next to recording.json: ndjson, csv or svg.
        #[arg(long, default_value = "ndjson")]
        format: ExportFormat,
    },
    /// Run a catalog preset and check its expectations.
    Preset {
        /// Preset name, see --list.
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        /// Output directory for the recording, rasters and report.json.
        #[arg(long, required_unless_present = "list")]
        out: Option<PathBuf>,
        /// Override the preset's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the catalog instead.
        #[arg(long, conflicts_with_all = ["name", "out", "seed"])]
        list: bool,
    },
    /// Run a parameter sweep and write a CSV table.
    Sweep {
        /// Sweep JSON file: a preset or inline spec, axes and metrics.
        spec: PathBuf,
        /// Output directory for sweep.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a recording file.
    Stats {
        /// recording.json written by run or preset.
        recording: PathBuf,
        /// Counting window for rates and the Fano factor.
        #[arg(long, default_value_t = DEFAULT_WINDOW_MS)]
        window_ms: f64,
        /// Also write statistics.csv and statistics.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP and WebSocket service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let SnnError::Validation(diags) = &e {
                for d in diags {
                    eprintln!("  {d}");
                }
            }
            EXIT_FAILURE
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Run { spec, out, seed, format } => cmd_run(&spec, &out, seed, format),
        Command::Preset { list: true, .. } => {
            for name in preset_names() {
                let p = preset(name)?;
                println!("{name:<20} {}", p.description);
            }
            Ok(EXIT_OK)
        }
        Command::Preset { name, out, seed, .. } => {
            let (Some(name), Some(out)) = (name, out) else {
                unreachable!("clap enforces name and --out without --list")
            };
            cmd_preset(&name, &out, seed)
        }
        Command::Sweep { spec, out } => cmd_sweep(&spec, &out),
        Command::Stats { recording, window_ms, out } => cmd_stats(&recording, window_ms, out.as_deref()),
        Command::Serve { port, host } => {
            crate::server::serve_blocking(&host, port)?;
            Ok(EXIT_OK)
        }
    }
}

fn read_spec(path: &Path) -> Result<NetworkSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| SnnError::Configuration(format!("cannot read {}: {e}", path.display())))?;
    NetworkSpec::from_json(&text)
}

fn cmd_validate(path: &Path) -> Result<i32> {
    let spec = read_spec(path)?;
    let diags = validate(&spec);
    for d in &diags {
        println!("{d}");
    }
    let errors = diags.iter().filter(|d| d.is_error()).count();
    if errors > 0 {
        println!("{}: {errors} error(s)", path.display());
        Ok(EXIT_FAILURE)
    } else {
        println!("{}: ok ({} warning(s))", path.display(), diags.len());
        Ok(EXIT_OK)
    }
}

fn write_recording(rec: &Recording, out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join("recording.json");
    fs::write(&path, rec.to_json())?;
    Ok(path)
}

fn summarize(rec: &Recording) {
    println!(
        "{} steps of {} ms, seed {}{}",
        rec.meta.steps,
        rec.meta.dt_ms,
        rec.meta.seed,
        if rec.meta.complete { "" } else { " (incomplete)" }
    );
    for r in &rec.rasters {
        println!("  {:<12} {:>6} neurons {:>8} events", r.population, r.size, r.events.len());
    }
}

fn cmd_run(path: &Path, out: &Path, seed: Option<u64>, format: ExportFormat) -> Result<i32> {
    let mut spec = read_spec(path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    for w in validate(&spec).iter().filter(|d| !d.is_error()) {
        println!("{w}");
    }
    let rec = run(&spec)?;
    let mut files = vec![write_recording(&rec, out)?];
    files.extend(write_exports(&rec, out, format)?);
    summarize(&rec);
    for f in &files {
        println!("wrote {}", f.display());
    }
    if let Some(err) = &rec.meta.error {
        eprintln!("error: {err}");
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

fn cmd_preset(name: &str, out: &Path, seed: Option<u64>) -> Result<i32> {
    let p = preset(name)?;
    let mut spec = p.spec.clone();
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let result = run_preset_spec(&p, &spec)?;
    let mut files = vec![write_recording(&result.recording, out)?];
    files.extend(write_exports(&result.recording, out, ExportFormat::Svg)?);
    let report = out.join("report.json");
    fs::write(&report, result.report_json())?;
    files.push(report);

    println!("{name}: {}", p.description);
    summarize(&result.recording);
    for r in &result.results {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        println!(
            "  {} {}  (measured {}, reference {})",
            if r.passed { "PASS" } else { "FAIL" },
            r.description,
            fmt(r.measured),
            fmt(r.reference)
        );
    }
    for f in &files {
        println!("wrote {}", f.display());
    }
    let passed = result.results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} expectations passed", result.results.len());
    Ok(if result.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_sweep(path: &Path, out: &Path) -> Result<i32> {
    let text = fs::read_to_string(path)
        .map_err(|e| SnnError::Configuration(format!("cannot read {}: {e}", path.display())))?;
    let spec = SweepSpec::from_json(&text)?;
    let table = sweep(&spec)?;
    fs::create_dir_all(out)?;
    let csv = out.join("sweep.csv");
    fs::write(&csv, sweep_csv(&table))?;
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} point(s), {failed} failed", table.rows.len());
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        println!("  point {}: {}", row.point, row.error.as_deref().unwrap_or_default());
    }
    println!("wrote {}", csv.display());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_stats(path: &Path, window_ms: f64, out: Option<&Path>) -> Result<i32> {
    let text = fs::read_to_string(path)
        .map_err(|e| SnnError::Configuration(format!("cannot read {}: {e}", path.display())))?;
    let rec = Recording::from_json(&text)?;
    let stats = rec
        .rasters
        .iter()
        .map(|r| compute_statistics(&rec, &r.population, window_ms))
        .collect::<Result<Vec<_>>>()?;
    for s in &stats {
        println!("{}", s.population);
        for (metric, value) in s.metrics() {
            println!("  {metric:<16} {value:.6}");
        }
        if s.fano_insufficient {
            println!("  (fano: fewer than two windows or no events)");
        }
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("statistics.csv"), statistics_csv(&stats))?;
        fs::write(out.join("statistics.json"), statistics_json(&stats))?;
        println!("wrote {}", out.display());
    }
    Ok(EXIT_OK)
}
