//! Field containers (binary and CSV) and CSV exports.
//!
//! Binary layout, all little-endian: the magic `LACF`, `u32` dimension,
//! `u32` side, `f64` period, `u64` value count, then `count` pairs of `f64`
//! (real, imaginary) in row-major order.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::decomposition::SignViolation;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Symbol};

pub const FIELD_MAGIC: &[u8; 4] = b"LACF";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;
/// Largest field accepted by the CSV reader and written by the CSV writer.
pub const CSV_MAX_POINTS: usize = 1 << 16;

fn decode_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Decode(msg.into()))
}

pub fn encode_field(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.points());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.side() as u32).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&(g.points() as u64).to_le_bytes());
    for z in f.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let end = at.checked_add(N).filter(|&e| e <= bytes.len());
    let Some(end) = end else {
        return decode_err("truncated field container");
    };
    let mut a = [0u8; N];
    a.copy_from_slice(&bytes[*at..end]);
    *at = end;
    Ok(a)
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let mut at = 0;
    if take::<4>(bytes, &mut at)? != *FIELD_MAGIC {
        return decode_err("bad magic");
    }
    let dim = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let side = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let length = f64::from_le_bytes(take(bytes, &mut at)?);
    let count = u64::from_le_bytes(take(bytes, &mut at)?);
    let grid = Grid::new(dim, side, length).map_err(|e| Error::Decode(e.to_string()))?;
    if count != grid.points() as u64 {
        return decode_err(format!("{count} values for a {grid} grid"));
    }
    let body = bytes.len() - at;
    if body as u64 != count * 16 {
        return decode_err(format!("payload of {body} bytes, expected {}", count * 16));
    }
    let values = bytes[at..]
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("chunk of 16"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("chunk of 16"));
            Complex64::new(re, im)
        })
        .collect();
    Field::new(grid, values).map_err(|e| Error::Decode(e.to_string()))
}

pub fn write_field<W: Write>(f: &Field, mut out: W) -> Result<()> {
    out.write_all(&encode_field(f))?;
    Ok(())
}

pub fn read_field<R: Read>(mut input: R) -> Result<Field> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    decode_field(&buf)
}

/// CSV layout: a `dim,side,length` header and its row, then a header
/// `i0,…,i{d−1},re,im` and one row per grid point in any order.
pub fn write_field_csv<W: Write>(f: &Field, out: W) -> Result<()> {
    let g = f.grid();
    if g.points() > CSV_MAX_POINTS {
        return Err(Error::InvalidArgument(format!("{g} grid is too large for CSV")));
    }
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(out);
    wr.write_record(["dim", "side", "length"])?;
    wr.write_record([g.dim().to_string(), g.side().to_string(), format!("{:e}", g.length())])?;
    let mut head: Vec<String> = (0..g.dim()).map(|a| format!("i{a}")).collect();
    head.push("re".into());
    head.push("im".into());
    wr.write_record(&head)?;
    let mut c = vec![0usize; g.dim()];
    for (i, z) in f.values().iter().enumerate() {
        g.coords(i, &mut c);
        let mut row: Vec<String> = c.iter().map(|k| k.to_string()).collect();
        row.push(format!("{:e}", z.re));
        row.push(format!("{:e}", z.im));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_field_csv<R: Read>(input: R) -> Result<Field> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = rd.records();
    let mut next = || -> Result<csv::StringRecord> {
        match rows.next() {
            Some(r) => Ok(r?),
            None => decode_err("truncated field CSV"),
        }
    };
    let h = next()?;
    if h.iter().map(str::trim).ne(["dim", "side", "length"]) {
        return decode_err("missing dim,side,length header");
    }
    let spec = next()?;
    if spec.len() != 3 {
        return decode_err("grid row needs three entries");
    }
    let parse_u = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Decode(format!("{s:?}: {e}")));
    let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Decode(format!("{s:?}: {e}")));
    let grid = Grid::new(parse_u(&spec[0])?, parse_u(&spec[1])?, parse_f(&spec[2])?)
        .map_err(|e| Error::Decode(e.to_string()))?;
    if grid.points() > CSV_MAX_POINTS {
        return decode_err(format!("{grid} grid is too large for CSV"));
    }
    let cols = next()?;
    if cols.len() != grid.dim() + 2 {
        return decode_err("value header has the wrong width");
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.points()];
    let mut seen = vec![false; grid.points()];
    let mut c = vec![0usize; grid.dim()];
    for rec in rows {
        let rec = rec?;
        if rec.len() != grid.dim() + 2 {
            return decode_err("value row has the wrong width");
        }
        for a in 0..grid.dim() {
            c[a] = parse_u(&rec[a])?;
            if c[a] >= grid.side() {
                return decode_err(format!("index {} outside side {}", c[a], grid.side()));
            }
        }
        let i = grid.index(&c);
        if seen[i] {
            return decode_err("repeated grid point");
        }
        seen[i] = true;
        values[i] = Complex64::new(parse_f(&rec[grid.dim()])?, parse_f(&rec[grid.dim() + 1])?);
    }
    if seen.iter().any(|s| !s) {
        return decode_err("missing grid points");
    }
    Field::new(grid, values).map_err(|e| Error::Decode(e.to_string()))
}

/// (ξ₁, ξ₂, value) over the planar frequency box, with the other frequencies
/// fixed at `rest`.
pub fn write_symbol_slice<W: Write>(m: &Symbol, side: usize, rest: &[f64], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["xi1", "xi2", "re", "im"])?;
    let half = (side / 2) as i64;
    let mut xi = vec![0.0; 2 + rest.len()];
    xi[2..].copy_from_slice(rest);
    for a in -half..half {
        for b in -half..half {
            xi[0] = a as f64;
            xi[1] = b as f64;
            let z = m.eval(&xi);
            wr.write_record([a.to_string(), b.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_violations_csv<W: Write>(v: &[SignViolation], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["eps", "octant", "positive", "negative"])?;
    for x in v {
        let eps: String = x.eps.iter().map(|c| c.tag()).collect::<Vec<_>>().join(" ");
        let oct: String = x.octant.0.iter().map(|s| if *s > 0 { "+" } else { "-" }).collect();
        wr.write_record([eps, oct, x.positive.to_string(), x.negative.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Real field as a CSV column with its grid coordinates.
pub fn write_real_csv<W: Write>(grid: &Grid, values: &[f64], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut head: Vec<String> = (0..grid.dim()).map(|a| format!("i{a}")).collect();
    head.push("value".into());
    wr.write_record(&head)?;
    let mut c = vec![0usize; grid.dim()];
    for (i, v) in values.iter().enumerate() {
        grid.coords(i, &mut c);
        let mut row: Vec<String> = c.iter().map(|k| k.to_string()).collect();
        row.push(format!("{v:e}"));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
