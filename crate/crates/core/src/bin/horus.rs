use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use horus_core::harness::{
    emit_plot_data, load_scenario, run_udp, run_with_seed, sweep_with, RunResult, SweepAxis, SweepSpec, UdpOptions,
};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "horus", version, about = "Fused line-following vehicle simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Transport {
    Sim,
    Udp,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its logs and summary.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $HORUS_OUT_DIR/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sim")]
        transport: Transport,
        /// UDP transport only: simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        /// UDP transport only: bind vehicle 5000 and sensors 4000 + i.
        #[arg(long)]
        fixed_ports: bool,
    },
    /// Run a scenario once per (value, repetition) and emit plot tables.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, or start:stop:step.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the summary of a finished run directory.
    Summarize { run_dir: PathBuf },
}

/// Like `println!` but ignores a closed stdout instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn default_out(name: &str) -> PathBuf {
    let base = std::env::var_os("HORUS_OUT_DIR").map_or_else(|| PathBuf::from("horus-out"), PathBuf::from);
    base.join(name)
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .context("range must be start:stop:step")?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("range needs step > 0 and stop >= start");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // round to the step's precision so 0.1 steps print cleanly
        return Ok((0..=n)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect());
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?}")))
        .collect()
}

fn print_result(r: &RunResult, dir: &Path) {
    let rep = r.report();
    match r.crash_time {
        Some(t) => out!("{}: crashed at {t:.3} s (seed {})", r.name, r.seed),
        None => out!("{}: completed {:.1} s (seed {})", r.name, r.duration, r.seed),
    }
    if let Some(d) = rep.deviation {
        out!(
            "  mean |deviation| {:.4} m (std {:.4}, n {})",
            d.mean_abs,
            d.std_abs,
            d.count
        );
    }
    if let Some(c) = rep.correction {
        out!("  mean |correction| {:.3} (std {:.3})", c.mean_abs, c.std_abs);
    }
    out!("  written to {}", dir.display());
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    transport: Transport,
    time_scale: f64,
    fixed_ports: bool,
) -> Result<ExitCode> {
    let scenario = load_scenario(path)?;
    let seed = seed.unwrap_or(scenario.seed);
    let result = match transport {
        Transport::Sim => run_with_seed(&scenario, seed),
        Transport::Udp => run_udp(
            &scenario,
            seed,
            UdpOptions {
                time_scale,
                fixed_ports,
            },
        )?,
    };
    let dir = out.unwrap_or_else(|| default_out(&scenario.name));
    result
        .write_to(&dir)
        .with_context(|| format!("writing {}", dir.display()))?;
    print_result(&result, &dir);
    Ok(if result.completed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_sweep(path: &Path, axis: &str, values: &str, reps: usize, out: Option<PathBuf>) -> Result<ExitCode> {
    let scenario = load_scenario(path)?;
    let axis: SweepAxis = axis.parse().map_err(anyhow::Error::msg)?;
    let spec = SweepSpec {
        axis,
        values: parse_values(values)?,
        repetitions: reps,
    };
    let dir = out.unwrap_or_else(|| default_out(&format!("{}-{}", scenario.name, axis)));
    let mut write_err = None;
    let table = sweep_with(&scenario, &spec, |value, rep, r| {
        let run_dir = dir.join(format!("{axis}={value}")).join(format!("rep{rep}"));
        if let Err(e) = r.write_to(&run_dir) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing per-run CSVs");
    }
    let paths = emit_plot_data(&table, &dir)?;
    std::fs::write(dir.join("table.json"), serde_json::to_string_pretty(&table)? + "\n")?;
    out!(
        "{:>10} {:>12} {:>12} {:>8}",
        axis.name(),
        "|deviation|",
        "|correction|",
        "crashes"
    );
    for row in &table.rows {
        let get = |k: &str| row.metrics.get(k).map_or(f64::NAN, |c| c.mean);
        out!(
            "{:>10} {:>12.5} {:>12.3} {:>8.2}",
            row.value,
            get("deviation"),
            get("correction"),
            row.crash_rate
        );
    }
    out!("{} plot files in {}", paths.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_summarize(dir: &Path) -> Result<ExitCode> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).context("parsing summary.json")?;
    out!("{} (seed {})", v["name"].as_str().unwrap_or("?"), v["seed"]);
    match v["crash_time"].as_f64() {
        Some(t) => out!("  crashed at {t:.3} s"),
        None => out!("  completed {} s", v["duration"]),
    }
    out!("  samples {}", v["samples"]);
    for key in [
        "deviation",
        "correction",
        "post_outage_deviation",
        "post_outage_correction",
    ] {
        if let Some(m) = v[key].as_object() {
            out!(
                "  {key:<24} mean {:.5} std {:.5} n {}",
                m["mean_abs"].as_f64().unwrap_or(f64::NAN),
                m["std_abs"].as_f64().unwrap_or(f64::NAN),
                m["count"]
            );
        }
    }
    if let Some(pe) = v["position_error"].as_object() {
        for (src, m) in pe {
            if let Some(m) = m.as_object() {
                out!(
                    "  position_error {src:<9} mean {:.3} std {:.3}",
                    m["mean_abs"].as_f64().unwrap_or(f64::NAN),
                    m["std_abs"].as_f64().unwrap_or(f64::NAN)
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            transport,
            time_scale,
            fixed_ports,
        } => cmd_run(&scenario, seed, out, transport, time_scale, fixed_ports),
        Command::Sweep {
            scenario,
            axis,
            values,
            reps,
            out,
        } => cmd_sweep(&scenario, &axis, &values, reps, out),
        Command::Summarize { run_dir } => cmd_summarize(&run_dir),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
