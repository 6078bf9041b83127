use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qrecycle_core::acceptance;
use qrecycle_core::mc::Workers;
use qrecycle_core::nspin;
use qrecycle_core::qubit::{disturbance_constant, eta_from_c, QubitKrausFamily};
use qrecycle_core::sweep::{
    emit_encoding, format_float, parse_range, plot_script, run_sweep, write_encoding,
    write_records, OutputFormat, SweepConfig, SweepMode, SweepOutcome, DEFAULT_SEED,
    DEFAULT_TRIALS, DEFAULT_Z_MAX,
};

#[derive(Parser)]
#[command(
    name = "qrecycle",
    version,
    about = "Information recycled by sequential non-communicating observers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form Δ_k and F_k for a mode, N range and k range.
    Analytic(AnalyticArgs),
    /// Monte Carlo estimate of a single (mode, N, k) cell.
    Mc(CellArgs),
    /// Monte Carlo sweep over N and k ranges.
    Sweep(SweepArgs),
    /// Emit the optimal N-spin encoding.
    Encode(EncodeArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_parser = ["csv", "jsonl"])]
    format: Option<String>,
    /// Write to PATH instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, default_value = "single_qubit")]
    mode: String,
    #[arg(long, default_value = "1")]
    n: String,
    #[arg(long, default_value = "1..4")]
    k: String,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CellArgs {
    #[arg(long, default_value = "single_qubit")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long = "z-max", default_value_t = DEFAULT_Z_MAX)]
    z_max: f64,
    /// Worker threads (0 = all cores); output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// key = value file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    /// N values: `4`, `2..10`, `2..20:2` or comma separated.
    #[arg(long)]
    n: Option<String>,
    /// k values, same syntax as --n.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "z-max")]
    z_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write a gnuplot script for the CSV output to PATH.
    #[arg(long)]
    plot_script: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_format(value: Option<&str>, default: OutputFormat) -> Result<OutputFormat> {
    Ok(match value {
        Some(v) => v.parse()?,
        None => default,
    })
}

fn workers(n: usize) -> Workers {
    Workers((n > 0).then_some(n))
}

fn report(outcome: &SweepOutcome) -> ExitCode {
    for r in outcome.degenerate() {
        eprintln!(
            "warning: N = {}, k = {}: fewer than two trials, no standard error",
            r.n, r.k
        );
    }
    let bad = outcome.violations();
    for r in &bad {
        eprintln!(
            "z-score violation: mode = {}, N = {}, k = {}, z = {:.3} (limit {})",
            r.mode,
            r.n,
            r.k,
            r.z.unwrap_or(f64::NAN),
            outcome.z_max
        );
    }
    if bad.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn analytic(args: AnalyticArgs) -> Result<ExitCode> {
    let mode: SweepMode = args.mode.parse()?;
    let spins = parse_range(&args.n)?;
    let ks = parse_range(&args.k)?;
    let cfg = SweepConfig {
        mode,
        spins: spins.clone(),
        ks: ks.clone(),
        phi: args.phi,
        ..Default::default()
    };
    cfg.validate()?;
    let format = parse_format(args.output.format.as_deref(), OutputFormat::Csv)?;
    let mut out = open_output(args.output.out.as_ref())?;

    let eta = match mode {
        SweepMode::SingleQubit => Some(eta_from_c(disturbance_constant(&QubitKrausFamily::new(
            args.phi,
        )?))?),
        _ => None,
    };
    if format == OutputFormat::Csv {
        writeln!(out, "mode,N,k,phi,delta,fidelity,fidelity_asymptotic")?;
    }
    for &n in &spins {
        for &k in &ks {
            let delta = cfg.analytic(n, k)?;
            let fidelity = 0.5 * (1.0 + delta);
            let asymptotic = match mode {
                SweepMode::NspinOptimal => nspin::fk_asymptotic(n, k).ok(),
                _ => None,
            };
            let phi = eta.map(|_| args.phi);
            match format {
                OutputFormat::Csv => writeln!(
                    out,
                    "{mode},{n},{k},{},{},{},{}",
                    phi.map(format_float).unwrap_or_default(),
                    format_float(delta),
                    format_float(fidelity),
                    asymptotic.map(format_float).unwrap_or_default()
                )?,
                OutputFormat::Jsonl => writeln!(
                    out,
                    "{}",
                    serde_json::json!({
                        "mode": mode, "N": n, "k": k, "phi": phi, "delta": delta,
                        "fidelity": fidelity, "fidelity_asymptotic": asymptotic,
                    })
                )?,
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn mc(args: CellArgs) -> Result<ExitCode> {
    let cfg = SweepConfig {
        mode: args.mode.parse()?,
        spins: vec![args.n],
        ks: vec![args.k],
        phi: args.phi,
        trials: args.trials,
        seed: args.seed,
        format: parse_format(args.output.format.as_deref(), OutputFormat::Csv)?,
        z_max: args.z_max,
    };
    let outcome = run_sweep(&cfg, workers(args.workers))?;
    let mut out = open_output(args.output.out.as_ref())?;
    write_records(&outcome.records, cfg.format, &mut out)?;
    Ok(report(&outcome))
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_key_values(&text)?;
    }
    if let Some(v) = &args.mode {
        cfg.set("mode", v)?;
    }
    if let Some(v) = &args.n {
        cfg.set("n", v)?;
    }
    if let Some(v) = &args.k {
        cfg.set("k", v)?;
    }
    if let Some(v) = args.phi {
        cfg.phi = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.z_max {
        cfg.z_max = v;
    }
    if let Some(v) = &args.output.format {
        cfg.set("format", v)?;
    }
    if args.plot_script.is_some() && (cfg.format != OutputFormat::Csv || args.output.out.is_none())
    {
        bail!("--plot-script needs CSV output written with --out");
    }
    cfg.validate()?;

    let outcome = run_sweep(&cfg, workers(args.workers))?;
    let mut out = open_output(args.output.out.as_ref())?;
    write_records(&outcome.records, cfg.format, &mut out)?;
    drop(out);

    if let (Some(script), Some(csv)) = (&args.plot_script, &args.output.out) {
        std::fs::write(script, plot_script(&csv.display().to_string(), cfg.mode))
            .with_context(|| format!("writing {}", script.display()))?;
    }
    Ok(report(&outcome))
}

fn encode(args: EncodeArgs) -> Result<ExitCode> {
    let record = emit_encoding(args.n)?;
    let format = parse_format(args.output.format.as_deref(), OutputFormat::Jsonl)?;
    let mut out = open_output(args.output.out.as_ref())?;
    write_encoding(&record, format, &mut out)?;
    Ok(ExitCode::SUCCESS)
}

fn selftest(args: SelftestArgs) -> Result<ExitCode> {
    let results = acceptance::run_all(workers(args.workers));
    for r in &results {
        println!("{r}");
    }
    Ok(if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analytic(a) => analytic(a),
        Command::Mc(a) => mc(a),
        Command::Sweep(a) => sweep(a),
        Command::Encode(a) => encode(a),
        Command::Selftest(a) => selftest(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
