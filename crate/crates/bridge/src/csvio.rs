//! CSV streams: header `t,q_0,…,q_{n−1}`, seconds and radians.

use std::io::{Read, Write};
use std::path::Path;

use teleop_otg_core::harness::Trace;
use teleop_otg_core::servo::Command;
use teleop_otg_core::TimedWaypoint;

use crate::error::{BridgeError, Result};

/// Significant digits written for every value.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` rounded to nine significant digits, in its shortest form.
pub fn format_value(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses");
    if (1e-5..1e15).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

/// `x` after a write and re-read.
pub fn round_trip(x: f64) -> f64 {
    format_value(x).parse().expect("formatted float parses")
}

fn csv_err(e: csv::Error) -> BridgeError {
    BridgeError::Csv(e.to_string())
}

fn header(prefixes: &[&str], dof: usize) -> Vec<String> {
    let mut h = vec![String::from("t")];
    for p in prefixes {
        h.extend((0..dof).map(|j| format!("{p}_{j}")));
    }
    h
}

/// Reads a waypoint stream. An empty document is an empty stream.
pub fn read_waypoints<R: Read>(reader: R) -> Result<Vec<TimedWaypoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let Some(first) = records.next() else { return Ok(Vec::new()) };
    let head = first.map_err(csv_err)?;
    let dof = head.len().saturating_sub(1);
    let expected = header(&["q"], dof);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(BridgeError::Csv(format!("header must be {}", expected.join(","))));
    }
    let mut out: Vec<TimedWaypoint> = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        if rec.len() != dof + 1 {
            return Err(BridgeError::Csv(format!("line {line}: expected {} fields, found {}", dof + 1, rec.len())));
        }
        let values: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| BridgeError::Csv(format!("line {line}: '{f}' is not a number"))))
            .collect::<Result<_>>()?;
        if let Some(prev) = out.last() {
            if !(values[0] > prev.t) {
                return Err(BridgeError::Csv(format!("line {line}: time {} does not follow {}", values[0], prev.t)));
            }
        }
        out.push(TimedWaypoint::new(values[0], values[1..].to_vec()));
    }
    Ok(out)
}

pub fn load_waypoints(path: &Path) -> Result<Vec<TimedWaypoint>> {
    let file = std::fs::File::open(path).map_err(|e| BridgeError::io(path.display().to_string(), e))?;
    read_waypoints(std::io::BufReader::new(file))
}

/// Writes a waypoint stream; `dof` sizes the header when the stream is empty.
pub fn write_waypoints<W: Write>(writer: W, stream: &[TimedWaypoint], dof: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(&["q"], dof)).map_err(csv_err)?;
    for p in stream {
        let row = std::iter::once(p.t).chain(p.q.iter().copied()).map(format_value);
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| BridgeError::io("csv output", e))
}

pub fn write_commands<W: Write>(writer: W, commands: &[Command], dof: usize) -> Result<()> {
    let stream: Vec<TimedWaypoint> = commands.iter().map(|c| TimedWaypoint::new(c.t, c.q.clone())).collect();
    write_waypoints(writer, &stream, dof)
}

/// Writes positions, velocities and accelerations of a trace.
pub fn write_trace<W: Write>(writer: W, trace: &Trace) -> Result<()> {
    let dof = trace.positions.cols();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(&["q", "qd", "qdd"], dof)).map_err(csv_err)?;
    for (i, t) in trace.times.iter().enumerate() {
        let row = std::iter::once(*t)
            .chain(trace.positions.row(i).iter().copied())
            .chain(trace.velocities.row(i).iter().copied())
            .chain(trace.accelerations.row(i).iter().copied())
            .map(format_value);
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| BridgeError::io("csv output", e))
}

pub fn save<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let file = std::fs::File::create(path).map_err(|e| BridgeError::io(path.display().to_string(), e))?;
    write(std::io::BufWriter::new(file))
}
