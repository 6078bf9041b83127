//! Parameter sweeps: configuration, execution and CSV / JSON-lines output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{kraus_model, run_cells, CellJob, Model, Workers};
use crate::nspin::{self, Encoding};
use crate::qubit::{analytic_delta_single, disturbance_constant, eta_from_c, QubitKrausFamily};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_Z_MAX: f64 = 4.0;

/// Version plus `git describe` of the source tree at build time.
pub const BUILD_ID: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "+",
    env!("QRECYCLE_GIT_DESCRIBE")
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    SingleQubit,
    NspinParallel,
    NspinOptimal,
    ParallelStart,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::SingleQubit => "single_qubit",
            SweepMode::NspinParallel => "nspin_parallel",
            SweepMode::NspinOptimal => "nspin_optimal",
            SweepMode::ParallelStart => "parallel_start",
        }
    }

    pub fn encoding(self) -> Option<Encoding> {
        match self {
            SweepMode::SingleQubit => None,
            SweepMode::NspinParallel => Some(Encoding::Parallel),
            SweepMode::NspinOptimal => Some(Encoding::Optimal),
            SweepMode::ParallelStart => Some(Encoding::ParallelStart),
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_qubit" => Ok(SweepMode::SingleQubit),
            "nspin_parallel" => Ok(SweepMode::NspinParallel),
            "nspin_optimal" => Ok(SweepMode::NspinOptimal),
            "parallel_start" => Ok(SweepMode::ParallelStart),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (single_qubit, nspin_parallel, nspin_optimal, parallel_start)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (csv, jsonl)"
            ))),
        }
    }
}

/// Parses `5`, `1..4` (inclusive), `2..10:2` (with step) or a comma list of those.
pub fn parse_range(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse range '{text}'"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, rest)) = part.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (hi, step.trim().parse::<usize>().map_err(|_| bad())?),
                None => (rest, 1),
            };
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if step == 0 || hi < lo {
                return Err(bad());
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("range '{text}' is empty")));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub spins: Vec<usize>,
    pub ks: Vec<usize>,
    pub phi: f64,
    pub trials: u64,
    pub seed: u64,
    pub format: OutputFormat,
    pub z_max: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode: SweepMode::SingleQubit,
            spins: vec![1],
            ks: vec![1, 2, 3, 4],
            phi: 0.0,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            format: OutputFormat::Csv,
            z_max: DEFAULT_Z_MAX,
        }
    }
}

impl SweepConfig {
    /// Overlays `key = value` lines (`#` starts a comment) onto `self`.
    ///
    /// Keys: `mode`, `n`, `k`, `phi`, `trials`, `seed`, `format`, `z_max`.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim().trim_matches('"'))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |what: &str| Error::Config(format!("invalid {what} '{value}'"));
        match key {
            "mode" => self.mode = value.parse()?,
            "n" | "N" => self.spins = parse_range(value)?,
            "k" => self.ks = parse_range(value)?,
            "phi" => self.phi = value.parse().map_err(|_| num("phi"))?,
            "trials" => self.trials = value.parse().map_err(|_| num("trials"))?,
            "seed" => self.seed = value.parse().map_err(|_| num("seed"))?,
            "format" => self.format = value.parse()?,
            "z_max" | "z-max" => self.z_max = value.parse().map_err(|_| num("z_max"))?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Checks every cell before any simulation starts.
    pub fn validate(&self) -> Result<()> {
        if self.spins.is_empty() || self.ks.is_empty() {
            return Err(Error::Config("N and k ranges must be non-empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::NoObservers);
        }
        if self.z_max.is_nan() || self.z_max <= 0.0 {
            return Err(Error::Config(format!(
                "z_max must be positive (got {})",
                self.z_max
            )));
        }
        match self.mode.encoding() {
            None => {
                QubitKrausFamily::new(self.phi)?;
                if self.spins != [1] {
                    return Err(Error::Config("single_qubit mode takes N = 1".into()));
                }
            }
            Some(enc) => self.spins.iter().try_for_each(|&n| enc.validate(n))?,
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        let mut spins = self.spins.clone();
        let mut ks = self.ks.clone();
        spins.sort_unstable();
        spins.dedup();
        ks.sort_unstable();
        ks.dedup();
        spins
            .iter()
            .flat_map(|&n| ks.iter().map(move |&k| (n, k)))
            .collect()
    }

    fn model(&self, spins: usize) -> Result<Model> {
        match self.mode.encoding() {
            None => kraus_model(self.phi),
            Some(encoding) => Ok(Model::NSpin { spins, encoding }),
        }
    }

    /// Closed-form `Δ_k` for a cell.
    pub fn analytic(&self, spins: usize, k: usize) -> Result<f64> {
        match self.mode.encoding() {
            None => {
                let family = QubitKrausFamily::new(self.phi)?;
                let eta = eta_from_c(disturbance_constant(&family))?;
                analytic_delta_single(k as u32, eta)
            }
            Some(enc) => nspin::analytic_delta(enc, spins, k),
        }
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub mode: SweepMode,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub phi: Option<f64>,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_stderr: Option<f64>,
    pub z: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub build: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub z_max: f64,
}

impl SweepOutcome {
    /// Records whose `|z|` exceeds the threshold.
    pub fn violations(&self) -> Vec<&SweepRecord> {
        self.records
            .iter()
            .filter(|r| r.z.is_some_and(|z| z.abs() > self.z_max))
            .collect()
    }

    /// Records without a standard error (fewer than two trials).
    pub fn degenerate(&self) -> Vec<&SweepRecord> {
        self.records
            .iter()
            .filter(|r| r.mc_stderr.is_none())
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.violations().is_empty()
    }
}

pub fn run_sweep(cfg: &SweepConfig, workers: Workers) -> Result<SweepOutcome> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs = cells
        .iter()
        .map(|&(n, k)| {
            Ok(CellJob {
                model: cfg.model(n)?,
                k,
                trials: cfg.trials,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = run_cells(&jobs, cfg.seed, workers)?;
    let records = cells
        .iter()
        .zip(stats)
        .map(|(&(n, k), s)| {
            let analytic = cfg.analytic(n, k)?;
            let est = s.delta(k);
            Ok(SweepRecord {
                mode: cfg.mode,
                n,
                k,
                phi: (cfg.mode == SweepMode::SingleQubit).then_some(cfg.phi),
                analytic,
                mc_mean: est.mean,
                mc_stderr: est.stderr,
                z: est.z_score(analytic),
                trials: est.trials,
                seed: cfg.seed,
                build: BUILD_ID.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutcome {
        records,
        z_max: cfg.z_max,
    })
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub const CSV_HEADER: [&str; 11] = [
    "mode",
    "N",
    "k",
    "phi",
    "analytic",
    "mc_mean",
    "mc_stderr",
    "z",
    "trials",
    "seed",
    "build",
];

pub fn write_records<W: Write>(
    records: &[SweepRecord],
    format: OutputFormat,
    out: W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                w.write_record([
                    r.mode.as_str().to_string(),
                    r.n.to_string(),
                    r.k.to_string(),
                    opt_float(r.phi),
                    format_float(r.analytic),
                    format_float(r.mc_mean),
                    opt_float(r.mc_stderr),
                    opt_float(r.z),
                    r.trials.to_string(),
                    r.seed.to_string(),
                    r.build.clone(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Reads back CSV written by [`write_records`].
pub fn read_csv_records<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad float '{s}'")))
        }
    };
    let num =
        |s: &str| -> Result<f64> { opt(s)?.ok_or_else(|| Error::Config("missing value".into())) };
    let int = |s: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad integer '{s}'")))
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push(SweepRecord {
            mode: row[0].parse()?,
            n: int(&row[1])? as usize,
            k: int(&row[2])? as usize,
            phi: opt(&row[3])?,
            analytic: num(&row[4])?,
            mc_mean: num(&row[5])?,
            mc_stderr: opt(&row[6])?,
            z: opt(&row[7])?,
            trials: int(&row[8])?,
            seed: int(&row[9])?,
            build: row[10].to_string(),
        });
    }
    Ok(out)
}

/// Gnuplot script plotting MC means with error bars against the closed form.
pub fn plot_script(csv_path: &str, mode: SweepMode) -> String {
    format!(
        "# {mode}: Monte Carlo Δ_k against the closed form\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'k'\n\
         set ylabel 'Delta_k'\n\
         set logscale y\n\
         plot '{csv_path}' using 3:6:7 with yerrorbars title 'Monte Carlo', \\\n\
         \x20    '' using 3:5 with linespoints title 'closed form'\n"
    )
}

/// Serialized optimal encoding for a given `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda_max: f64,
    pub phi: Vec<f64>,
    pub parallel_tilde_delta: f64,
    pub optimal_tilde_delta: f64,
    pub build: String,
}

pub fn emit_encoding(spins: usize) -> Result<EncodingRecord> {
    let matrix = nspin::jacobi_matrix(spins)?;
    let (lambda_max, phi) = nspin::principal_eigenpair(&matrix)?;
    Ok(EncodingRecord {
        n: spins,
        lambda_max,
        phi,
        parallel_tilde_delta: nspin::parallel_tilde_delta(spins)?,
        optimal_tilde_delta: nspin::optimal_tilde_delta(spins)?,
        build: BUILD_ID.to_string(),
    })
}

pub fn write_encoding<W: Write>(
    record: &EncodingRecord,
    format: OutputFormat,
    out: W,
) -> Result<()> {
    match format {
        OutputFormat::Jsonl => {
            let mut out = out;
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "N",
                "J",
                "phi_J",
                "lambda_max",
                "parallel_tilde_delta",
                "optimal_tilde_delta",
                "build",
            ])?;
            for (j, p) in record.phi.iter().enumerate() {
                w.write_record([
                    record.n.to_string(),
                    j.to_string(),
                    format_float(*p),
                    format_float(record.lambda_max),
                    format_float(record.parallel_tilde_delta),
                    format_float(record.optimal_tilde_delta),
                    record.build.clone(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
