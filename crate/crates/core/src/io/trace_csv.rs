//! Trace files: header row `t,<channel>,...`, one sample per row, time in
//! seconds and channels in pu deviations.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lti::{MeasurementTrace, Trace};

pub fn read_trace_csv(path: &Path) -> Result<MeasurementTrace> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trace(f)
}

pub fn read_trace<R: Read>(reader: R) -> Result<MeasurementTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile);
    }
    if header[0] != "t" {
        return Err(Error::Parse(format!(
            "first column must be `t`, found `{}`",
            header[0]
        )));
    }
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::Parse(format!(
                "empty channel name in column {}",
                i + 1
            )));
        }
        if header[..i].contains(h) {
            return Err(Error::DuplicateChannel(h.clone()));
        }
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let line = r + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, got {}",
                header.len(),
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "line {line}, column `{}`: not a number: `{field}`",
                    header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "line {line}, column `{}`: non-finite value",
                    header[c]
                )));
            }
            cols[c].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut it = cols.into_iter();
    let mut tr = Trace::new(it.next().unwrap_or_default());
    for (name, data) in header.into_iter().skip(1).zip(it) {
        tr.insert(name, data)?;
    }
    if tr.len() > 1 {
        tr.dt()?;
    }
    Ok(tr)
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let f =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(f);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Values are written in shortest round-trip form.
pub fn write_trace<W: Write>(trace: &Trace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["t"];
    header.extend(trace.channels.keys().map(String::as_str));
    w.write_record(&header).map_err(io)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..trace.len() {
        row.clear();
        row.push(trace.t[k].to_string());
        row.extend(trace.channels.values().map(|c| c[k].to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Trace> {
        read_trace(s.as_bytes())
    }

    #[test]
    fn reads_header_and_rows() {
        let tr =
            parse("t,dP_G2,u_G2,domega_A1\n0,0,0,0\n0.01,0.1,0.2,-0.001\n0.02,0.15,0.2,-0.002\n")
                .unwrap();
        assert_eq!(
            tr.channels.keys().collect::<Vec<_>>(),
            ["dP_G2", "u_G2", "domega_A1"]
        );
        assert_eq!(tr.len(), 3);
        assert!((tr.dt().unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(tr.get("domega_A1").unwrap()[2], -0.002);
    }

    #[test]
    fn jitter_is_rejected() {
        let e = parse("t,x\n0,0\n0.01,0\n0.0201,0\n0.03,0\n").unwrap_err();
        assert_eq!(e, Error::NonuniformSampling { row: 2 });
    }

    #[test]
    fn duplicate_and_empty() {
        assert_eq!(
            parse("t,x,x\n0,1,2\n").unwrap_err(),
            Error::DuplicateChannel("x".into())
        );
        assert_eq!(parse("").unwrap_err(), Error::EmptyFile);
        assert_eq!(parse("t,x\n").unwrap_err(), Error::EmptyFile);
    }

    #[test]
    fn malformed_value_names_column() {
        let e = parse("t,x\n0,1\n1,abc\n").unwrap_err();
        assert!(e.to_string().contains("line 3, column `x`"), "{e}");
    }

    #[test]
    fn round_trip_is_identity() {
        let n = 257;
        let mut tr = Trace::uniform(n, 1e-3);
        tr.insert(
            "a",
            (0..n).map(|k| (k as f64 * 0.37).sin() * 1e-5).collect(),
        )
        .unwrap();
        tr.insert("b", (0..n).map(|k| 1.0 / (1.0 + k as f64) - 0.3).collect())
            .unwrap();
        let mut buf = Vec::new();
        write_trace(&tr, &mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.channels.keys().collect::<Vec<_>>(), ["a", "b"]);
        for (name, v) in &tr.channels {
            for (x, y) in v.iter().zip(back.get(name).unwrap()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
        for (x, y) in tr.t.iter().zip(&back.t) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}
