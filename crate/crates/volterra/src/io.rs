//! CSV readers and writers for paths, observations, and reconstructions.
//!
//! Schemas: path dumps are `t,x_1..x_d,z_1..z_d` on the fine grid;
//! observations are `t,x_1..x_d` at a constant step, validated on load to
//! `1e-9 h`; reconstructions are `t,z_1..z_d` on the block grid. Values are
//! written with shortest-roundtrip formatting, so read-back is lossless.

use crate::error::{Error, Result};
use crate::invert::{ReconstructedPath, SampledObservation};
use crate::sim::SimulatedPath;
use std::io::{Read, Write};

/// Parses `t,x_1..x_d` observations and validates the sampling grid.
pub fn parse_observation_csv<R: Read>(reader: R) -> Result<SampledObservation> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if headers.len() < 2 || headers.get(0) != Some("t") {
        return Err(Error::Csv("header must be t,x_1..x_d".into()));
    }
    let dim = headers.len() - 1;
    for (i, name) in headers.iter().skip(1).enumerate() {
        let expected = format!("x_{}", i + 1);
        if name != expected {
            return Err(Error::Csv(format!(
                "column {} is '{name}', expected '{expected}'",
                i + 2
            )));
        }
    }
    let mut times = Vec::new();
    let mut x = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != dim + 1 {
            return Err(Error::Csv(format!(
                "row {}: {} fields, expected {}",
                row_idx + 2,
                record.len(),
                dim + 1
            )));
        }
        let mut fields = record.iter();
        let t: f64 = parse_field(fields.next().unwrap(), row_idx)?;
        times.push(t);
        for field in fields {
            x.push(parse_field(field, row_idx)?);
        }
    }
    SampledObservation::from_times(times, x, dim)
}

fn parse_field(s: &str, row_idx: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Csv(format!("row {}: '{s}' is not a number", row_idx + 2)))?;
    if !v.is_finite() {
        return Err(Error::Csv(format!("row {}: non-finite value '{s}'", row_idx + 2)));
    }
    Ok(v)
}

/// Writes the fine-grid path dump `t,x_1..x_d,z_1..z_d`.
pub fn write_path_csv<W: Write>(out: &mut W, path: &SimulatedPath) -> Result<()> {
    let d = path.dim_state;
    write!(out, "t")?;
    for c in 1..=d {
        write!(out, ",x_{c}")?;
    }
    for c in 1..=d {
        write!(out, ",z_{c}")?;
    }
    writeln!(out)?;
    for (i, t) in path.times.iter().enumerate() {
        write!(out, "{t}")?;
        for v in path.x_at(i) {
            write!(out, ",{v}")?;
        }
        for v in path.z_at(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes observations in the schema `parse_observation_csv` reads.
pub fn write_observation_csv<W: Write>(out: &mut W, obs: &SampledObservation) -> Result<()> {
    let d = obs.dim_state();
    write!(out, "t")?;
    for c in 1..=d {
        write!(out, ",x_{c}")?;
    }
    writeln!(out)?;
    for (j, t) in obs.times().iter().enumerate() {
        write!(out, "{t}")?;
        for v in obs.x_at(j) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes the reconstruction `t,z_1..z_d` on the block grid.
pub fn write_recon_csv<W: Write>(out: &mut W, recon: &ReconstructedPath) -> Result<()> {
    let d = recon.dim_state;
    write!(out, "t")?;
    for c in 1..=d {
        write!(out, ",z_{c}")?;
    }
    writeln!(out)?;
    for (j, t) in recon.query_times.iter().enumerate() {
        write!(out, "{t}")?;
        for v in recon.z_at(j) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
