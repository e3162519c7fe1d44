//! Field snapshots on disk: CSV rows `(x1, eta, rho, u)` or a raw
//! little-endian `f64` block.
//!
//! Both formats start with the schema version, `nx`, `neta` and the time.
//! The binary header is four `f64` values followed by the `nx·neta` values in
//! storage order.

use std::io::{BufRead, Read, Write};

use crate::geometry::MappedGrid;
use crate::solver::Field;
use crate::{Error, Real, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(found: f64) -> Result<()> {
    if found != f64::from(SCHEMA_VERSION) {
        return Err(Error::Malformed(format!(
            "schema version {found} is not the supported version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

pub fn write_csv<S: Real, W: Write>(
    grid: &MappedGrid<S>,
    field: &Field<S>,
    mut out: W,
) -> Result<()> {
    field.matches_grid(grid)?;
    writeln!(
        out,
        "# schema_version {} nx {} neta {} time {}",
        SCHEMA_VERSION,
        field.nx,
        field.neta,
        field.time.to64()
    )?;
    writeln!(out, "x1,eta,rho,u")?;
    for i in 0..grid.nx() {
        let x1 = grid.x_nodes()[i].to64();
        for j in 0..grid.neta() {
            writeln!(
                out,
                "{},{},{},{}",
                x1,
                grid.eta(j).to64(),
                grid.rho(i, j).to64(),
                field.values[grid.index(i, j)].to64()
            )?;
        }
    }
    Ok(())
}

/// Reads a CSV snapshot; only the header and the `u` column are used.
pub fn read_csv<S: Real, R: BufRead>(input: R) -> Result<Field<S>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty snapshot".into()))??;
    let words: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    let value = |key: &str| -> Result<f64> {
        let pos = words
            .iter()
            .position(|w| *w == key)
            .ok_or_else(|| Error::Malformed(format!("snapshot header lacks {key}")))?;
        words
            .get(pos + 1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Malformed(format!("bad {key} in snapshot header")))
    };
    check_version(value("schema_version")?)?;
    let (nx, neta, time) = (
        value("nx")? as usize,
        value("neta")? as usize,
        value("time")?,
    );
    match lines.next() {
        Some(Ok(cols)) if cols.trim() == "x1,eta,rho,u" => {}
        _ => {
            return Err(Error::Malformed(
                "missing column header x1,eta,rho,u".into(),
            ))
        }
    }
    let mut values = Vec::with_capacity(nx * neta);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let u = line
            .rsplit(',')
            .next()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Malformed(format!("bad snapshot row {line:?}")))?;
        values.push(S::of(u));
    }
    if values.len() != nx * neta {
        return Err(Error::Malformed(format!(
            "{} rows for a {nx} x {neta} grid",
            values.len()
        )));
    }
    Ok(Field {
        nx,
        neta,
        time: S::of(time),
        values,
    })
}

pub fn write_binary<S: Real, W: Write>(field: &Field<S>, mut out: W) -> Result<()> {
    let header = [
        f64::from(SCHEMA_VERSION),
        field.nx as f64,
        field.neta as f64,
        field.time.to64(),
    ];
    for v in header
        .iter()
        .copied()
        .chain(field.values.iter().map(|v| v.to64()))
    {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<S: Real, R: Read>(mut input: R) -> Result<Field<S>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 || bytes.len() < 32 {
        return Err(Error::Malformed(format!(
            "{} bytes is not a snapshot",
            bytes.len()
        )));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    check_version(floats[0])?;
    let (nx, neta, time) = (floats[1] as usize, floats[2] as usize, floats[3]);
    if floats.len() - 4 != nx * neta {
        return Err(Error::Malformed(format!(
            "{} values for a {nx} x {neta} grid",
            floats.len() - 4
        )));
    }
    Ok(Field {
        nx,
        neta,
        time: S::of(time),
        values: floats[4..].iter().map(|&v| S::of(v)).collect(),
    })
}
