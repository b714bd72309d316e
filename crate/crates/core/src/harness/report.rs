use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::spec::{EstimatorKind, ExperimentSpec};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "estimator",
    "sweep_key",
    "snr_db",
    "nmse_theta",
    "nmse_H",
    "nmse_G",
    "crb_norm",
    "iters_mean",
    "iters_median",
    "conv_rate",
    "time_ms",
    "runs",
    "failures",
];

/// Aggregates for one (estimator, sweep point, SNR) cell.
///
/// Means are over successful runs; `conv_rate` counts converged runs
/// against all runs. For `block_ls` the `nmse_theta` column holds the
/// per-block cascaded-channel NMSE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub estimator: EstimatorKind,
    pub sweep_key: String,
    pub snr_db: f64,
    pub nmse_theta: f64,
    pub nmse_h: f64,
    pub nmse_g: f64,
    pub crb_norm: f64,
    pub iters_mean: f64,
    pub iters_median: f64,
    pub conv_rate: f64,
    pub time_ms: f64,
    pub runs: usize,
    pub failures: usize,
}

/// Provenance of one Monte Carlo trial, shared by every estimator in it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub sweep_key: String,
    #[serde(serialize_with = "ser_f64")]
    pub snr_db: f64,
    pub run: usize,
    pub seed: u64,
    /// FNV-1a hash of the received tensor's bits.
    pub checksum: u64,
    /// Every estimator saw a tensor with this checksum.
    pub paired: bool,
}

fn ser_f64<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_f64(*v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub spec: ExperimentSpec,
    pub version: String,
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
    /// `sweep_key: estimator: reason` for every dropped cell.
    pub skipped: Vec<String>,
}

impl MonteCarloReport {
    pub fn cell(&self, estimator: EstimatorKind, sweep_key: &str, snr_db: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.sweep_key == sweep_key && c.snr_db == snr_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Toml,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "toml" => Ok(ReportFormat::Toml),
            _ => Err(Error::Parse(format!("unknown report format '{s}'"))),
        }
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Parse(format!("bad float '{s}'"))),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

pub fn write_csv<W: Write>(cells: &[CellSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in cells {
        w.write_record([
            c.estimator.name().to_string(),
            c.sweep_key.clone(),
            fmt_f64(c.snr_db),
            fmt_f64(c.nmse_theta),
            fmt_f64(c.nmse_h),
            fmt_f64(c.nmse_g),
            fmt_f64(c.crb_norm),
            fmt_f64(c.iters_mean),
            fmt_f64(c.iters_median),
            fmt_f64(c.conv_rate),
            fmt_f64(c.time_ms),
            c.runs.to_string(),
            c.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CellSummary>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| parse_f64(&rec[i]);
        let u = |i: usize| {
            rec[i]
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad count '{}'", &rec[i])))
        };
        cells.push(CellSummary {
            estimator: rec[0].parse()?,
            sweep_key: rec[1].to_string(),
            snr_db: f(2)?,
            nmse_theta: f(3)?,
            nmse_h: f(4)?,
            nmse_g: f(5)?,
            crb_norm: f(6)?,
            iters_mean: f(7)?,
            iters_median: f(8)?,
            conv_rate: f(9)?,
            time_ms: f(10)?,
            runs: u(11)?,
            failures: u(12)?,
        });
    }
    Ok(cells)
}

pub fn write_runs_csv<W: Write>(runs: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in runs {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'a str,
    cells: usize,
    runs: usize,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    skipped: &'a [String],
    spec: &'a ExperimentSpec,
}

/// Version, counts, skipped cells and the full spec as TOML.
pub fn sidecar_toml(report: &MonteCarloReport) -> Result<String> {
    toml::to_string(&Sidecar {
        version: &report.version,
        cells: report.cells.len(),
        runs: report.runs.len(),
        skipped: &report.skipped,
        spec: &report.spec,
    })
    .map_err(|e| Error::Parse(format!("sidecar: {e}")))
}

#[derive(Serialize)]
struct TomlReport<'a> {
    #[serde(flatten)]
    meta: Sidecar<'a>,
    cell: Vec<TomlCell<'a>>,
}

// Floats in the same text form as the CSV.
#[derive(Serialize)]
struct TomlCell<'a> {
    estimator: &'a str,
    sweep_key: &'a str,
    snr_db: String,
    nmse_theta: String,
    nmse_h: String,
    nmse_g: String,
    crb_norm: String,
    iters_mean: String,
    iters_median: String,
    conv_rate: String,
    time_ms: String,
    runs: usize,
    failures: usize,
}

fn toml_report(report: &MonteCarloReport) -> Result<String> {
    let cell = report
        .cells
        .iter()
        .map(|c| TomlCell {
            estimator: c.estimator.name(),
            sweep_key: &c.sweep_key,
            snr_db: fmt_f64(c.snr_db),
            nmse_theta: fmt_f64(c.nmse_theta),
            nmse_h: fmt_f64(c.nmse_h),
            nmse_g: fmt_f64(c.nmse_g),
            crb_norm: fmt_f64(c.crb_norm),
            iters_mean: fmt_f64(c.iters_mean),
            iters_median: fmt_f64(c.iters_median),
            conv_rate: fmt_f64(c.conv_rate),
            time_ms: fmt_f64(c.time_ms),
            runs: c.runs,
            failures: c.failures,
        })
        .collect();
    toml::to_string(&TomlReport {
        meta: Sidecar {
            version: &report.version,
            cells: report.cells.len(),
            runs: report.runs.len(),
            skipped: &report.skipped,
            spec: &report.spec,
        },
        cell,
    })
    .map_err(|e| Error::Parse(format!("report: {e}")))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Writes the report to `out`, or to stdout when `out` is `None`.
///
/// A CSV file also gets `<stem>.meta.toml` and `<stem>.runs.csv` next to it.
/// Returns the files written.
pub fn emit_report(report: &MonteCarloReport, out: Option<&Path>, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let Some(path) = out else {
        let stdout = std::io::stdout();
        match format {
            ReportFormat::Csv => write_csv(&report.cells, stdout.lock())?,
            ReportFormat::Toml => stdout.lock().write_all(toml_report(report)?.as_bytes())?,
        }
        return Ok(Vec::new());
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    match format {
        ReportFormat::Csv => {
            write_csv(&report.cells, fs::File::create(path)?)?;
            let meta = sibling(path, ".meta.toml");
            fs::write(&meta, sidecar_toml(report)?)?;
            let runs = sibling(path, ".runs.csv");
            write_runs_csv(&report.runs, fs::File::create(&runs)?)?;
            Ok(vec![path.to_path_buf(), meta, runs])
        }
        ReportFormat::Toml => {
            fs::write(path, toml_report(report)?)?;
            Ok(vec![path.to_path_buf()])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SystemConfig;

    fn cell(snr: f64) -> CellSummary {
        CellSummary {
            estimator: EstimatorKind::Krf,
            sweep_key: "n=4;k=4".into(),
            snr_db: snr,
            nmse_theta: 1.0 / 3.0,
            nmse_h: f64::NAN,
            nmse_g: 2e-300,
            crb_norm: 0.0,
            iters_mean: 0.0,
            iters_median: 0.0,
            conv_rate: 1.0,
            time_ms: 0.125,
            runs: 10,
            failures: 0,
        }
    }

    fn same(a: &CellSummary, b: &CellSummary) -> bool {
        let fa = [a.snr_db, a.nmse_theta, a.nmse_h, a.nmse_g, a.crb_norm, a.iters_mean, a.iters_median, a.conv_rate, a.time_ms];
        let fb = [b.snr_db, b.nmse_theta, b.nmse_h, b.nmse_g, b.crb_norm, b.iters_mean, b.iters_median, b.conv_rate, b.time_ms];
        fa.iter().zip(&fb).all(|(x, y)| x.to_bits() == y.to_bits())
            && (a.estimator, &a.sweep_key, a.runs, a.failures) == (b.estimator, &b.sweep_key, b.runs, b.failures)
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let cells = vec![cell(0.0), cell(f64::INFINITY)];
        let mut buf = Vec::new();
        write_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("estimator,sweep_key,snr_db,nmse_theta,nmse_H"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert!(cells.iter().zip(&back).all(|(a, b)| same(a, b)));
    }

    #[test]
    fn sidecar_and_files() {
        let spec = ExperimentSpec::new(SystemConfig::new(2, 2, 2, 2, 2), vec![10.0], vec![EstimatorKind::Krf], 1);
        let report = MonteCarloReport {
            spec,
            version: "0.0.0".into(),
            cells: vec![cell(10.0)],
            runs: vec![RunRecord {
                sweep_key: "base".into(),
                snr_db: 10.0,
                run: 0,
                seed: 7,
                checksum: 9,
                paired: true,
            }],
            skipped: vec![],
        };
        let meta = sidecar_toml(&report).unwrap();
        assert!(meta.contains("version = \"0.0.0\""));
        assert!(meta.contains("[spec.system]"));
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, Some(&dir.path().join("out/r.csv")), ReportFormat::Csv).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files.iter().all(|f| f.exists()));
        let runs = fs::read_to_string(&files[2]).unwrap();
        assert!(runs.starts_with("sweep_key,snr_db,run,seed,checksum,paired"));
        let toml_path = dir.path().join("r.toml");
        emit_report(&report, Some(&toml_path), ReportFormat::Toml).unwrap();
        assert!(fs::read_to_string(toml_path).unwrap().contains("[[cell]]"));
    }
}
