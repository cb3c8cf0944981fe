//! CSV schemas: device outcomes, real-valued run data and Eberhard counts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use csv::{ByteRecord, ReaderBuilder, WriterBuilder};

use shl_core::breakdown::OUTCOMES;
use shl_core::eberhard::{Setting, SettingCounts};
use shl_core::homogeneity::{Outcomes, RunSample, RunSet};

pub const OUTCOMES_HEADER: [&str; 3] = ["run_id", "t", "outcome"];
pub const VALUES_HEADER: [&str; 2] = ["run_id", "value"];
pub const SERIES_HEADER: [&str; 1] = ["value"];
pub const COUNTS_HEADER: [&str; 15] = [
    "a", "b", "bin", "n_oo", "n_oe", "n_eo", "n_ee", "n_ou", "n_uo", "n_eu", "n_ue", "n_uu",
    "nA_o", "nB_o", "trials",
];

/// `(alice, bob)` response indices of the nine joint columns, in header order.
const JOINT_ORDER: [(usize, usize); 9] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (1, 1),
    (0, 2),
    (2, 0),
    (1, 2),
    (2, 1),
    (2, 2),
];

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Writes `run_id,t,outcome` rows, `t` counting from 1 within each run.
pub fn write_outcomes<W: Write>(out: W, rs: &RunSet) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(OUTCOMES_HEADER)?;
    for run in &rs.runs {
        let Outcomes::Categorical(x) = &run.outcomes else {
            bail!("run {} is not categorical", run.run_id);
        };
        for (t, c) in x.iter().enumerate() {
            w.serialize((run.run_id, t as u64 + 1, c))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parsed input of the `audit` command.
#[derive(Debug, Clone, PartialEq)]
pub enum AuditInput {
    /// `run_id,t,outcome` or `run_id,value`.
    Runs(RunSet),
    /// A single `value` column.
    Series(Vec<f64>),
}

fn field<T: FromStr>(rec: &ByteRecord, i: usize, name: &str, line: u64) -> Result<T> {
    let raw =
        std::str::from_utf8(&rec[i]).map_err(|_| anyhow!("line {line}: {name} is not UTF-8"))?;
    raw.trim()
        .parse()
        .map_err(|_| anyhow!("line {line}: cannot parse {name} from {raw:?}"))
}

fn next_record<R: Read>(r: &mut csv::Reader<R>, rec: &mut ByteRecord) -> Result<bool> {
    r.read_byte_record(rec).map_err(|e| match e.position() {
        Some(p) => anyhow!("line {}: malformed CSV: {e}", p.line()),
        None => anyhow!("malformed CSV: {e}"),
    })
}

fn line_of(rec: &ByteRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn records<R: Read>(input: R, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut r = ReaderBuilder::new().from_reader(input);
    let header = r.headers().context("line 1: cannot read header")?;
    if header.iter().ne(expected.iter().copied()) {
        bail!(
            "line 1: header must be exactly `{}`, found `{}`",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        );
    }
    Ok(r)
}

fn header_of(bytes: &[u8]) -> Vec<String> {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    String::from_utf8_lossy(first)
        .trim_end_matches('\r')
        .split(',')
        .map(str::to_owned)
        .collect()
}

/// Reads any of the three audit schemas, chosen by header.
pub fn read_audit_input<R: Read>(mut input: R) -> Result<AuditInput> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let header = header_of(&bytes);
    if header == OUTCOMES_HEADER {
        read_outcomes(&bytes[..]).map(AuditInput::Runs)
    } else if header == VALUES_HEADER {
        read_values(&bytes[..]).map(AuditInput::Runs)
    } else if header == SERIES_HEADER {
        read_series(&bytes[..]).map(AuditInput::Series)
    } else {
        bail!(
            "line 1: unrecognised header `{}`; expected `{}`, `{}` or `{}`",
            header.join(","),
            OUTCOMES_HEADER.join(","),
            VALUES_HEADER.join(","),
            SERIES_HEADER.join(",")
        )
    }
}

/// Outcomes file into a categorical run set, runs ordered by id.
pub fn read_outcomes<R: Read>(input: R) -> Result<RunSet> {
    let mut r = records(input, &OUTCOMES_HEADER)?;
    let mut runs: BTreeMap<u64, (u64, Vec<u32>)> = BTreeMap::new();
    let mut rec = ByteRecord::new();
    while next_record(&mut r, &mut rec)? {
        let line = line_of(&rec);
        let run_id: u64 = field(&rec, 0, "run_id", line)?;
        let t: u64 = field(&rec, 1, "t", line)?;
        let outcome: u32 = field(&rec, 2, "outcome", line)?;
        if outcome == 0 || outcome as usize > OUTCOMES {
            bail!("line {line}: outcome {outcome} outside 1..={OUTCOMES}");
        }
        let entry = runs.entry(run_id).or_insert((0, Vec::new()));
        if !entry.1.is_empty() && t <= entry.0 {
            bail!("line {line}: t = {t} does not increase within run {run_id}");
        }
        entry.0 = t;
        entry.1.push(outcome);
    }
    let runs = runs
        .into_iter()
        .map(|(id, (_, x))| RunSample::categorical(id, x))
        .collect();
    Ok(RunSet::new(runs, Some(OUTCOMES))?)
}

fn read_values<R: Read>(input: R) -> Result<RunSet> {
    let mut r = records(input, &VALUES_HEADER)?;
    let mut runs: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut rec = ByteRecord::new();
    while next_record(&mut r, &mut rec)? {
        let line = line_of(&rec);
        let run_id: u64 = field(&rec, 0, "run_id", line)?;
        let v: f64 = field(&rec, 1, "value", line)?;
        if !v.is_finite() {
            bail!("line {line}: value must be finite");
        }
        runs.entry(run_id).or_default().push(v);
    }
    let runs = runs
        .into_iter()
        .map(|(id, x)| RunSample::real(id, x))
        .collect();
    Ok(RunSet::new(runs, None)?)
}

fn read_series<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = records(input, &SERIES_HEADER)?;
    let mut out = Vec::new();
    let mut rec = ByteRecord::new();
    while next_record(&mut r, &mut rec)? {
        let line = line_of(&rec);
        let v: f64 = field(&rec, 0, "value", line)?;
        if !v.is_finite() {
            bail!("line {line}: value must be finite");
        }
        out.push(v);
    }
    Ok(out)
}

/// Writes a one-column `value` series, one row per entry.
pub fn write_series<W: Write>(out: W, x: &[f64]) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for v in x {
        w.serialize(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_counts<W: Write>(out: W, counts: &[SettingCounts]) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(COUNTS_HEADER)?;
    let mut row = [0u64; 15];
    for c in counts {
        row[0] = c.setting.a.into();
        row[1] = c.setting.b.into();
        row[2] = c.bin;
        for (k, (i, j)) in JOINT_ORDER.iter().enumerate() {
            row[3 + k] = c.joint[*i][*j];
        }
        row[12] = c.n_a_o;
        row[13] = c.n_b_o;
        row[14] = c.trials;
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a counts file, checking count closure and singles on every row.
pub fn read_counts<R: Read>(input: R) -> Result<Vec<SettingCounts>> {
    let mut r = records(input, &COUNTS_HEADER)?;
    let mut out = Vec::new();
    let mut rec = ByteRecord::new();
    while next_record(&mut r, &mut rec)? {
        let line = line_of(&rec);
        let a: u8 = field(&rec, 0, "a", line)?;
        let b: u8 = field(&rec, 1, "b", line)?;
        let setting = Setting::new(a, b).with_context(|| format!("line {line}"))?;
        let bin: u64 = field(&rec, 2, "bin", line)?;
        let mut joint = [[0u64; 3]; 3];
        for (k, (i, j)) in JOINT_ORDER.iter().enumerate() {
            joint[*i][*j] = field(&rec, 3 + k, COUNTS_HEADER[3 + k], line)?;
        }
        let c = SettingCounts {
            setting,
            bin,
            joint,
            n_a_o: field(&rec, 12, "nA_o", line)?,
            n_b_o: field(&rec, 13, "nB_o", line)?,
            trials: field(&rec, 14, "trials", line)?,
        };
        c.validate().with_context(|| format!("line {line}"))?;
        out.push(c);
    }
    Ok(out)
}

/// Number of bins in a counts file: one past the largest bin index.
pub fn bin_count(counts: &[SettingCounts]) -> Result<u64> {
    counts
        .iter()
        .map(|c| c.bin + 1)
        .max()
        .ok_or_else(|| anyhow!("counts file has no data rows"))
}
