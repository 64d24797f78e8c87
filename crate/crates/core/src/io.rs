//! File formats: event logs as JSON lines, trajectories as CSV at their
//! breakpoints, and atom lists as `weight,point` CSV.

use std::io::{BufRead, Write};

use crate::engine::{EventRecord, SimulationResult};
use crate::error::{Error, Result};
use crate::types::AtomicMeasure;

/// One JSON object `{t, groups, post_v}` per line.
pub fn write_event_log<W: Write>(result: &SimulationResult, mut out: W) -> Result<()> {
    for record in result.event_records() {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<EventRecord>> {
    let mut records = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidEventLog(format!("line {}: {e}", k + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Rows `particle_index,t,x_1..x_d,v_1..v_d`, one per breakpoint.
pub fn write_trajectory_csv<W: Write>(result: &SimulationResult, out: W) -> Result<()> {
    let d = result.dim();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["particle_index".to_string(), "t".to_string()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    header.extend((1..=d).map(|k| format!("v_{k}")));
    writer.write_record(&header).map_err(csv_error)?;
    let mut row = Vec::with_capacity(2 + 2 * d);
    for i in 0..result.len() {
        for b in result.trajectory(i).breakpoints {
            row.clear();
            row.push(i.to_string());
            row.push(b.time.to_string());
            row.extend(b.position.iter().map(f64::to_string));
            row.extend(b.velocity.iter().map(f64::to_string));
            writer.write_record(&row).map_err(csv_error)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("csv: {other:?}")),
    }
}

/// One-dimensional measure from `weight,point` rows. A first row that does
/// not parse as numbers is taken as a header.
pub fn read_atoms<R: std::io::Read>(input: R) -> Result<AtomicMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut pairs = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Domain(format!("row {}: {e}", k + 1)))?;
        if record.len() != 2 {
            return Err(Error::Domain(format!(
                "row {}: expected `weight,point`, got {} fields",
                k + 1,
                record.len()
            )));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(w), Ok(p)) => pairs.push((w, p)),
            _ if k == 0 => continue,
            _ => {
                return Err(Error::Domain(format!(
                    "row {}: cannot parse `{},{}`",
                    k + 1,
                    &record[0],
                    &record[1]
                )))
            }
        }
    }
    AtomicMeasure::from_pairs(&pairs)
}
