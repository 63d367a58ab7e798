use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use mrc_core::analysis::{estimate_dof_slope, trial_plan, verify_noiseless, DofReport};
use mrc_core::bounds::{format_dof, table1_row, Dof, Table1Row};
use mrc_core::channel::{generate_channels, ChannelSet, NetworkConfig};
use mrc_core::rng::{stream_rng, trial_seed, Stream};

use crate::args::{BoundsArgs, Format, OutputArgs, RunArgs, SweepArgs, Table1Args};
use crate::error::CliError;
use crate::settings::{ConfigFile, DEFAULT_P_GRID, DEFAULT_SEED, DEFAULT_TRIALS};

/// Decoding error allowed by `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-8;

pub fn version_line() -> String {
    format!("# mrc-dof-lab v{}", env!("CARGO_PKG_VERSION"))
}

struct Output {
    format: Format,
    path: Option<std::path::PathBuf>,
}

impl Output {
    fn resolve(args: &OutputArgs, file: &ConfigFile) -> Result<Self, CliError> {
        Ok(Self {
            format: file.pick(args.format, "format")?.unwrap_or(Format::Csv),
            path: file.pick(args.out.clone(), "out")?,
        })
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.path {
            Some(path) => {
                fs::write(path, text).map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn csv_document(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("{}\n{header}\n", version_line());
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn json_document<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

fn as_real(v: Dof) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

#[derive(Serialize)]
struct BoundsJson<'a> {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    case_index: u8,
    private_only: f64,
    private_only_exact: String,
    cutset: u64,
    gain: f64,
    notes: &'a [&'static str],
}

fn bounds_json(row: &Table1Row) -> BoundsJson<'_> {
    BoundsJson {
        k: row.k,
        m: row.m,
        n: row.n,
        case_index: row.case_index,
        private_only: as_real(row.private_only),
        private_only_exact: row.private_only.to_string(),
        cutset: row.cutset,
        gain: as_real(row.gain),
        notes: &row.notes,
    }
}

pub fn bounds(args: &BoundsArgs, file: &ConfigFile) -> Result<(), CliError> {
    let k = file.require(args.k, "k")?;
    let m = file.require(args.m, "m")?;
    let n = file.require(args.n, "n")?;
    let out = Output::resolve(&args.output, file)?;
    let row = table1_row(k, m, n)?;
    let text = match out.format {
        Format::Csv => csv_document(
            "K,M,N,case_index,private_only,cutset,gain",
            [format!(
                "{},{},{},{},{},{},{}",
                row.k,
                row.m,
                row.n,
                row.case_index,
                format_dof(row.private_only),
                row.cutset,
                format_dof(row.gain)
            )],
        ),
        Format::Json => json_document(&bounds_json(&row)),
    };
    out.emit(&text)
}

pub fn table1(args: &Table1Args, file: &ConfigFile) -> Result<(), CliError> {
    let k: usize = file.require(args.k, "k")?;
    let m: usize = file.require(args.m, "m")?;
    let nmax = file.pick(args.nmax, "nmax")?.unwrap_or(k * m);
    if nmax == 0 {
        return Err(CliError::Invalid("--nmax must be at least 1".into()));
    }
    let out = Output::resolve(&args.output, file)?;
    let rows = (1..=nmax).map(|n| table1_row(k, m, n)).collect::<Result<Vec<_>, _>>()?;
    let text = match out.format {
        Format::Csv => csv_document(
            "K,M,N,N_over_M,case_index,private_only,common_private,gain,notes",
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    r.k,
                    r.m,
                    r.n,
                    format_dof(Dof::new(r.n as i64, r.m as i64)),
                    r.case_index,
                    format_dof(r.private_only),
                    r.cutset,
                    format_dof(r.gain),
                    r.notes.join(";")
                )
            }),
        ),
        Format::Json => json_document(&rows.iter().map(bounds_json).collect::<Vec<_>>()),
    };
    out.emit(&text)
}

struct RunSettings {
    config: NetworkConfig,
    trials: usize,
    p_grid: Vec<f64>,
    fixed: Option<ChannelSet>,
}

fn resolve_run(args: &RunArgs, file: &ConfigFile) -> Result<RunSettings, CliError> {
    let k = file.pick(args.k, "k")?;
    let m = file.pick(args.m, "m")?;
    let n = file.pick(args.n, "n")?;
    let load: Option<std::path::PathBuf> = file.pick(args.load_channels.clone(), "load-channels")?;
    let fixed = load.map(|p| read_channels(&p)).transpose()?;
    let (k, m, n) = match &fixed {
        Some(ch) => {
            for (name, flag, actual) in [("k", k, ch.k()), ("m", m, ch.m()), ("n", n, ch.n())] {
                if flag.is_some_and(|v| v != actual) {
                    return Err(CliError::Invalid(format!("--{name} disagrees with the loaded channels ({actual})")));
                }
            }
            (ch.k(), ch.m(), ch.n())
        }
        None => (
            k.ok_or_else(|| CliError::Invalid("missing required --k".into()))?,
            m.ok_or_else(|| CliError::Invalid("missing required --m".into()))?,
            n.ok_or_else(|| CliError::Invalid("missing required --n".into()))?,
        ),
    };
    let config = NetworkConfig::new(k, m, n)?
        .with_seed(file.pick(args.seed, "seed")?.unwrap_or(DEFAULT_SEED))
        .with_reciprocal(file.reciprocity(args.reciprocal, args.no_reciprocal)?)
        .with_half_duplex(file.switch(args.half_duplex, "half-duplex")?);
    let trials = file.pick(args.trials, "trials")?.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Invalid("--trials must be at least 1".into()));
    }
    let p_grid = file.pick_list(args.p_grid.clone(), "p-grid")?.unwrap_or_else(|| DEFAULT_P_GRID.to_vec());
    Ok(RunSettings { config, trials, p_grid, fixed })
}

fn read_channels(path: &Path) -> Result<ChannelSet, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read channels {}: {e}", path.display())))?;
    let channels = ChannelSet::from_json(&text)?;
    if channels.extension_factor() != 1 {
        return Err(CliError::Invalid("loaded channels must be unextended (L = 1)".into()));
    }
    Ok(channels)
}

/// Writes trial 0's raw channels and designed plan when requested.
fn dump_artifacts(args: &RunArgs, file: &ConfigFile, run: &RunSettings) -> Result<(), CliError> {
    let channel_path: Option<std::path::PathBuf> = file.pick(args.dump_channels.clone(), "dump-channels")?;
    let plan_path: Option<std::path::PathBuf> = file.pick(args.dump_plan.clone(), "dump-plan")?;
    if let Some(path) = channel_path {
        let channels = match &run.fixed {
            Some(ch) => ch.clone(),
            None => generate_channels(&run.config, &mut stream_rng(trial_seed(run.config.seed, 0), Stream::Channels)),
        };
        fs::write(&path, channels.to_json() + "\n")?;
        log::info!("wrote channels of trial 0 to {}", path.display());
    }
    if let Some(path) = plan_path {
        let (_, plan) = trial_plan(&run.config, 0, run.fixed.as_ref())?;
        fs::write(&path, plan.to_json() + "\n")?;
        log::info!("wrote plan of trial 0 to {}", path.display());
    }
    Ok(())
}

fn emit_report(out: &Output, report: &DofReport) -> Result<(), CliError> {
    let text = match out.format {
        Format::Csv => csv_document(&DofReport::csv_header(), [report.csv_row()]),
        Format::Json => json_document(report),
    };
    out.emit(&text)
}

fn check_report(report: &DofReport) -> Result<(), CliError> {
    if report.verified(VERIFY_TOLERANCE) {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(format!(
            "streams {} vs cut-set {}, max decoding error {:.3e}",
            report.achieved_streams, report.cutset, report.noiseless_max_error
        )))
    }
}

pub fn verify(args: &RunArgs, file: &ConfigFile) -> Result<(), CliError> {
    let run = resolve_run(args, file)?;
    let out = Output::resolve(&args.output, file)?;
    dump_artifacts(args, file, &run)?;
    let report = verify_noiseless(&run.config, run.trials, run.fixed.as_ref())?;
    emit_report(&out, &report)?;
    check_report(&report)
}

pub fn simulate(args: &RunArgs, file: &ConfigFile) -> Result<(), CliError> {
    let run = resolve_run(args, file)?;
    let out = Output::resolve(&args.output, file)?;
    dump_artifacts(args, file, &run)?;
    let report = mrc_core::analysis::simulate(&run.config, &run.p_grid, run.trials, run.fixed.as_ref())?;
    emit_report(&out, &report)?;
    check_report(&report)
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    report: Option<DofReport>,
    error: Option<String>,
}

impl SweepRow {
    fn csv(&self) -> String {
        match (&self.report, &self.error) {
            (Some(r), _) => format!("{},", r.csv_row()),
            (None, err) => {
                let blanks = ",".repeat(mrc_core::analysis::CSV_COLUMNS.len() - 3);
                let msg = err.as_deref().unwrap_or("").replace([',', '\n'], ";");
                format!("{},{},{}{blanks},{msg}", self.k, self.m, self.n)
            }
        }
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

pub fn sweep(args: &SweepArgs, file: &ConfigFile) -> Result<(), CliError> {
    let ks = sorted(file.pick_list(args.k.clone(), "k")?.ok_or_else(|| CliError::Invalid("missing --k".into()))?);
    let ms = sorted(file.pick_list(args.m.clone(), "m")?.ok_or_else(|| CliError::Invalid("missing --m".into()))?);
    let ns = sorted(file.pick_list(args.n.clone(), "n")?.ok_or_else(|| CliError::Invalid("missing --n".into()))?);
    if ks.is_empty() || ms.is_empty() || ns.is_empty() {
        return Err(CliError::Invalid("K, M and N lists must be nonempty".into()));
    }
    let trials = file.pick(args.trials, "trials")?.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Invalid("--trials must be at least 1".into()));
    }
    let seed = file.pick(args.seed, "seed")?.unwrap_or(DEFAULT_SEED);
    let p_grid: Option<Vec<f64>> = file.pick_list(args.p_grid.clone(), "p-grid")?;
    let reciprocal = file.reciprocity(args.reciprocal, args.no_reciprocal)?;
    let half = file.switch(args.half_duplex, "half-duplex")?;
    let out = Output::resolve(&args.output, file)?;

    let mut grid = Vec::with_capacity(ks.len() * ms.len() * ns.len());
    for &k in &ks {
        for &m in &ms {
            grid.extend(ns.iter().map(|&n| (k, m, n)));
        }
    }
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(k, m, n)| {
            let result = (|| -> mrc_core::Result<DofReport> {
                let config =
                    NetworkConfig::new(k, m, n)?.with_seed(seed).with_reciprocal(reciprocal).with_half_duplex(half);
                let mut report = verify_noiseless(&config, trials, None)?;
                if let Some(p_grid) = &p_grid {
                    let slope = estimate_dof_slope(&config, p_grid, trials, None)?;
                    report.slope_estimate = Some(slope.slope);
                    report.slope_stderr = Some(slope.stderr);
                }
                Ok(report)
            })();
            match result {
                Ok(report) => SweepRow { k, m, n, report: Some(report), error: None },
                Err(e) => {
                    log::error!("sweep row K={k} M={m} N={n}: {e}");
                    SweepRow { k, m, n, report: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect();

    let text = match out.format {
        Format::Csv => csv_document(&format!("{},error", DofReport::csv_header()), rows.iter().map(SweepRow::csv)),
        Format::Json => json_document(&rows),
    };
    out.emit(&text)
}
