//! CSV output: UTF-8, one header row, LF line endings, `.` decimals.
//! Floats use Rust's shortest round-trip formatting, so reruns produce
//! byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::federation::{RoundRecord, RunOutput};
use crate::presets::{Curve, CurveData};

pub const ROUNDS_HEADER: [&str; 6] = [
    "round",
    "accuracy",
    "loss",
    "bytes_up",
    "bytes_down",
    "sim_time",
];
pub const SUMMARY_HEADER: [&str; 3] = ["final_accuracy", "total_bytes", "sim_time"];

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn to_file(path: &Path, fill: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<()> {
    let mut w = writer(Vec::new());
    fill(&mut w)?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn rounds_rows<W: Write>(w: &mut csv::Writer<W>, records: &[RoundRecord]) -> Result<()> {
    w.write_record(ROUNDS_HEADER)?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            r.accuracy.to_string(),
            r.loss.to_string(),
            r.bytes_up.to_string(),
            r.bytes_down.to_string(),
            r.sim_time.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_rounds_to<W: Write>(out: W, records: &[RoundRecord]) -> Result<()> {
    let mut w = writer(out);
    rounds_rows(&mut w, records)?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_rounds(path: &Path, records: &[RoundRecord]) -> Result<()> {
    to_file(path, |w| rounds_rows(w, records))
}

pub fn write_summary(path: &Path, out: &RunOutput) -> Result<()> {
    let last = out.final_record();
    to_file(path, |w| {
        w.write_record(SUMMARY_HEADER)?;
        w.write_record([
            last.accuracy.to_string(),
            out.ledger.total_bytes().to_string(),
            last.sim_time.to_string(),
        ])?;
        Ok(())
    })
}

/// Writes the cost sweep as `agencies,n,ratio` rows.
pub fn write_cost_rows<W: Write>(out: W, rows: &[crate::cost_model::CurvePoint]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["agencies", "n", "ratio"])?;
    for p in rows {
        w.write_record([p.agencies.to_string(), p.n.to_string(), p.ratio.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `<dir>/<curve name>.csv`.
pub fn write_curve(dir: &Path, curve: &Curve) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("{}.csv", curve.name));
    match &curve.data {
        CurveData::Rounds(records) => write_rounds(&path, records)?,
        CurveData::Cost(rows) => {
            let mut buf = Vec::new();
            write_cost_rows(&mut buf, rows)?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        CurveData::Sweep(points) => to_file(&path, |w| {
            w.write_record(["exchange_per_class", "final_accuracy"])?;
            for p in points {
                w.write_record([
                    p.exchange_per_class.to_string(),
                    p.final_accuracy.to_string(),
                ])?;
            }
            Ok(())
        })?,
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_schema_and_line_endings() {
        let rec = RoundRecord {
            round: 1,
            accuracy: 0.5,
            loss: 1.25,
            bytes_up: 10,
            bytes_down: 20,
            sim_time: 3.0,
        };
        let mut buf = Vec::new();
        write_rounds_to(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "round,accuracy,loss,bytes_up,bytes_down,sim_time\n1,0.5,1.25,10,20,3\n"
        );
    }
}
