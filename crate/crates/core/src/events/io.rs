//! Event file formats: the EVT1 binary container and a CSV reader for
//! interchange.
//!
//! EVT1 layout (little endian):
//!   header, 16 bytes: magic `EVT1`, width u16, height u16, count u64
//!   records, 13 bytes each: t f64 (seconds), x u16, y u16, p i8

use super::{Event, EventStream};
use crate::ensure;
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"EVT1";

pub fn write_evt1(path: &Path, stream: &EventStream) -> Result<()> {
    ensure!(
        stream.width <= u16::MAX as usize && stream.height <= u16::MAX as usize,
        "resolution {}x{} exceeds the 16-bit format limit",
        stream.width,
        stream.height
    );
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&(stream.width as u16).to_le_bytes())?;
    w.write_all(&(stream.height as u16).to_le_bytes())?;
    w.write_all(&(stream.events.len() as u64).to_le_bytes())?;
    for e in &stream.events {
        w.write_all(&e.t.to_le_bytes())?;
        w.write_all(&e.x.to_le_bytes())?;
        w.write_all(&e.y.to_le_bytes())?;
        w.write_all(&e.p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an EVT1 file. The interval bounds are taken from the first and last
/// record; callers that know the true recording interval should widen them.
pub fn read_evt1(path: &Path) -> Result<EventStream> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format(format!("{}: truncated EVT1 header", path.display())))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad EVT1 magic", path.display())));
    }
    let width = u16::from_le_bytes([header[4], header[5]]) as usize;
    let height = u16::from_le_bytes([header[6], header[7]]) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;

    let mut events = Vec::with_capacity(count);
    let mut rec = [0u8; 13];
    for i in 0..count {
        r.read_exact(&mut rec).map_err(|_| {
            Error::Format(format!("{}: truncated at record {i} of {count}", path.display()))
        })?;
        events.push(Event {
            t: f64::from_le_bytes(rec[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([rec[8], rec[9]]),
            y: u16::from_le_bytes([rec[10], rec[11]]),
            p: rec[12] as i8,
        });
    }
    let (t0, t1) = match (events.first(), events.last()) {
        (Some(first), Some(last)) => (first.t, last.t),
        _ => (0.0, 0.0),
    };
    EventStream::new(events, t0, t1, width, height)
}

/// Reads `t,x,y,p` CSV rows. A single non-numeric header line is skipped.
/// Resolution is inferred as the smallest sensor containing all events.
pub fn read_csv_events(path: &Path) -> Result<EventStream> {
    let file = std::fs::File::open(path)?;
    let mut events = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "{}:{}: expected 4 comma-separated fields",
                path.display(),
                lineno + 1
            )));
        }
        let t: f64 = match fields[0].parse() {
            Ok(v) => v,
            Err(_) if lineno == 0 => continue, // header row
            Err(e) => {
                return Err(Error::Format(format!(
                    "{}:{}: bad timestamp: {e}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        let parse_u16 = |s: &str, what: &str| -> Result<u16> {
            s.parse().map_err(|e| {
                Error::Format(format!("{}:{}: bad {what}: {e}", path.display(), lineno + 1))
            })
        };
        let x = parse_u16(fields[1], "x")?;
        let y = parse_u16(fields[2], "y")?;
        let p: i8 = match fields[3] {
            "1" | "+1" => 1,
            "-1" => -1,
            other => {
                return Err(Error::Format(format!(
                    "{}:{}: polarity must be +1/-1, got {other}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        events.push(Event { t, x, y, p });
    }
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    let width = events.iter().map(|e| e.x as usize + 1).max().unwrap_or(1);
    let height = events.iter().map(|e| e.y as usize + 1).max().unwrap_or(1);
    let (t0, t1) = match (events.first(), events.last()) {
        (Some(first), Some(last)) => (first.t, last.t),
        _ => (0.0, 0.0),
    };
    EventStream::new(events, t0, t1, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evt1_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.evt1");
        let events = vec![
            Event { x: 3, y: 1, t: 0.125, p: 1 },
            Event { x: 0, y: 7, t: 0.5, p: -1 },
            Event { x: 9, y: 2, t: 0.75, p: 1 },
        ];
        let stream = EventStream::new(events, 0.125, 0.75, 10, 8).unwrap();
        write_evt1(&path, &stream).unwrap();
        let back = read_evt1(&path).unwrap();
        assert_eq!(back, stream);
    }

    #[test]
    fn evt1_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.evt1");
        std::fs::write(&path, b"NOPE0123456789ab").unwrap();
        assert!(read_evt1(&path).is_err());
    }

    #[test]
    fn csv_reader_accepts_header_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        std::fs::write(&path, "t,x,y,p\n0.5,1,2,-1\n0.25,3,4,+1\n").unwrap();
        let s = read_csv_events(&path).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.events[0].t, 0.25);
        assert_eq!(s.events[0].p, 1);
        assert_eq!(s.events[1].p, -1);
        assert_eq!(s.width, 4);
        assert_eq!(s.height, 5);
    }

    #[test]
    fn csv_reader_rejects_bad_polarity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        std::fs::write(&path, "0.5,1,2,2\n").unwrap();
        assert!(read_csv_events(&path).is_err());
    }
}
