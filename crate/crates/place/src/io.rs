//! Result files. Every float is written with 17 significant digits so that
//! reading it back gives the same `f64`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bearing_core::{Method, TrialRecord};
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::RunError;
use crate::sweep::{CellSummary, ConvergenceRow, SavingRow, Stats, SweepResult, TrialRow};

pub const TRIALS_CSV: &str = "trials.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const SAVING_CSV: &str = "saving.csv";
pub const CONVERGENCE_CSV: &str = "convergence.csv";

pub const AGGREGATE_HEADER: [&str; 10] = [
    "M",
    "R",
    "sigma_deg",
    "n_seeds",
    "dopt_mean",
    "dopt_std",
    "maxent_mean",
    "maxent_std",
    "improvement_pct",
    "maxent_better",
];

/// `d.dddddddddddddddde±x`: 17 significant digits, exact round trip.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn trial_json_name(method: Method, seed: u64) -> String {
    format!("trial_{method}_seed{seed}.json")
}

pub fn filmstrip_name(method: Method, seed: u64) -> String {
    format!("filmstrip_{method}_seed{seed}.jsonl")
}

/// serde_json formatter that writes floats via [`fmt_f64`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PreciseFloats;

impl Formatter for PreciseFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFloats);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|e| RunError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, RunError> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> RunError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => RunError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        RunError::format(path, e)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::io(path, e)
}

/// Full record as one JSON document plus the filmstrip as JSON lines, one
/// snapshot per iteration. Returns both paths.
pub fn write_trial_record(dir: &Path, record: &TrialRecord) -> Result<(PathBuf, PathBuf), RunError> {
    let json = dir.join(trial_json_name(record.method, record.seed));
    let mut w = create(&json)?;
    writeln!(w, "{}", to_json(record)).map_err(io_err(&json))?;
    w.flush().map_err(io_err(&json))?;

    let strip = dir.join(filmstrip_name(record.method, record.seed));
    let mut w = create(&strip)?;
    for snap in &record.snapshots {
        writeln!(w, "{}", to_json(snap)).map_err(io_err(&strip))?;
    }
    w.flush().map_err(io_err(&strip))?;
    Ok((json, strip))
}

pub fn read_trial_record(path: &Path) -> Result<TrialRecord, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| RunError::format(path, e))
}

pub fn write_trials_csv(path: &Path, rows: &[TrialRow]) -> Result<(), RunError> {
    let len = rows.first().map_or(0, |r| r.rmse.len());
    if let Some(bad) = rows.iter().find(|r| r.rmse.len() != len) {
        return Err(RunError::format(
            path,
            format!("trial seed {} has {} RMSE values, expected {len}", bad.seed, bad.rmse.len()),
        ));
    }
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["M", "R", "sigma_deg", "method", "seed", "final_rmse"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..len).map(|t| format!("rmse_t{t}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let mut rec = vec![
            r.sources.to_string(),
            r.sensors.to_string(),
            fmt_f64(r.sigma_deg),
            r.method.to_string(),
            r.seed.to_string(),
            fmt_f64(r.final_rmse()),
        ];
        rec.extend(r.rmse.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

struct Columns<'a> {
    path: &'a Path,
    header: csv::StringRecord,
}

impl<'a> Columns<'a> {
    fn index(&self, name: &str) -> Result<usize, RunError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RunError::format(self.path, format!("missing column `{name}`")))
    }

    fn parse<T: std::str::FromStr>(&self, rec: &csv::StringRecord, idx: usize) -> Result<T, RunError> {
        let raw = rec.get(idx).unwrap_or("");
        raw.trim().parse().map_err(|_| {
            RunError::format(
                self.path,
                format!("column `{}`: cannot parse {raw:?}", &self.header[idx]),
            )
        })
    }
}

fn open_csv(path: &Path) -> Result<(csv::Reader<File>, Columns<'_>), RunError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    Ok((rdr, Columns { path, header }))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRow>, RunError> {
    let (mut rdr, cols) = open_csv(path)?;
    let m = cols.index("M")?;
    let r = cols.index("R")?;
    let s = cols.index("sigma_deg")?;
    let method = cols.index("method")?;
    let seed = cols.index("seed")?;
    cols.index("final_rmse")?;
    let rmse_cols: Vec<usize> = (0..)
        .map_while(|t| cols.index(&format!("rmse_t{t}")).ok())
        .collect();
    if rmse_cols.is_empty() {
        return Err(RunError::format(path, "missing column `rmse_t0`"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let name = rec.get(method).unwrap_or("");
        let method = Method::parse(name)
            .ok_or_else(|| RunError::format(path, format!("column `method`: unknown method {name:?}")))?;
        out.push(TrialRow {
            sources: cols.parse(&rec, m)?,
            sensors: cols.parse(&rec, r)?,
            sigma_deg: cols.parse(&rec, s)?,
            method,
            seed: cols.parse(&rec, seed)?,
            rmse: rmse_cols.iter().map(|&i| cols.parse(&rec, i)).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}

pub fn write_aggregate_csv(path: &Path, cells: &[CellSummary]) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| csv_error(path, e))?;
    for c in cells {
        w.write_record([
            c.sources.to_string(),
            c.sensors.to_string(),
            fmt_f64(c.sigma_deg),
            c.dopt.count.min(c.maxent.count).to_string(),
            fmt_f64(c.dopt.mean),
            fmt_f64(c.dopt.std),
            fmt_f64(c.maxent.mean),
            fmt_f64(c.maxent.std),
            fmt_f64(c.improvement),
            (c.maxent.mean < c.dopt.mean).to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<CellSummary>, RunError> {
    let (mut rdr, cols) = open_csv(path)?;
    let idx: Vec<usize> = AGGREGATE_HEADER[..9]
        .iter()
        .map(|h| cols.index(h))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let count: usize = cols.parse(&rec, idx[3])?;
        out.push(CellSummary {
            sources: cols.parse(&rec, idx[0])?,
            sensors: cols.parse(&rec, idx[1])?,
            sigma_deg: cols.parse(&rec, idx[2])?,
            dopt: Stats {
                mean: cols.parse(&rec, idx[4])?,
                std: cols.parse(&rec, idx[5])?,
                count,
            },
            maxent: Stats {
                mean: cols.parse(&rec, idx[6])?,
                std: cols.parse(&rec, idx[7])?,
                count,
            },
            improvement: cols.parse(&rec, idx[8])?,
        });
    }
    Ok(out)
}

pub fn write_saving_csv(path: &Path, rows: &[SavingRow]) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    w.write_record(["M", "sigma_deg", "saving"]).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([r.sources.to_string(), fmt_f64(r.sigma_deg), r.saving.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_saving_csv(path: &Path) -> Result<Vec<SavingRow>, RunError> {
    let (mut rdr, cols) = open_csv(path)?;
    let (m, s, v) = (cols.index("M")?, cols.index("sigma_deg")?, cols.index("saving")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        out.push(SavingRow {
            sources: cols.parse(&rec, m)?,
            sigma_deg: cols.parse(&rec, s)?,
            saving: cols.parse(&rec, v)?,
        });
    }
    Ok(out)
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<(), RunError> {
    let mut w = csv_writer(path)?;
    w.write_record(["M", "R", "sigma_deg", "method", "iteration", "n_seeds", "mean", "std"])
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.sources.to_string(),
            r.sensors.to_string(),
            fmt_f64(r.sigma_deg),
            r.method.to_string(),
            r.iteration.to_string(),
            r.stats.count.to_string(),
            fmt_f64(r.stats.mean),
            fmt_f64(r.stats.std),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the per-trial, aggregate, saving and convergence tables into `dir`.
pub fn write_sweep(dir: &Path, sweep: &SweepResult) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(dir)?;
    let paths: Vec<PathBuf> = [TRIALS_CSV, AGGREGATE_CSV, SAVING_CSV, CONVERGENCE_CSV]
        .iter()
        .map(|n| dir.join(n))
        .collect();
    write_trials_csv(&paths[0], &sweep.trials)?;
    write_derived(dir, sweep)?;
    Ok(paths)
}

/// Everything except the per-trial table.
pub fn write_derived(dir: &Path, sweep: &SweepResult) -> Result<(), RunError> {
    write_aggregate_csv(&dir.join(AGGREGATE_CSV), &sweep.cells)?;
    write_saving_csv(&dir.join(SAVING_CSV), &sweep.savings())?;
    write_convergence_csv(&dir.join(CONVERGENCE_CSV), &sweep.convergence())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1.0 / 3.0, 0.30700000000000005, 1e-300, -2.5e17, f64::MIN_POSITIVE, 7.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            let mantissa = s.split('e').next().unwrap();
            let digits = mantissa.chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(fmt_f64(0.307), "3.0700000000000000e-1");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn json_uses_17_digits() {
        #[derive(Serialize)]
        struct S {
            x: f64,
            n: u32,
            bad: f64,
        }
        let s = to_json(&S {
            x: 0.1,
            n: 3,
            bad: f64::NAN,
        });
        assert_eq!(s, r#"{"x":1.0000000000000001e-1,"n":3,"bad":null}"#);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64().unwrap(), 0.1);
    }
}
