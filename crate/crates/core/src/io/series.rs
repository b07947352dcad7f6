use std::io::{Read, Write};

use serde::Deserialize;

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::evolution::StepRecord;
use crate::modulation::CSV_HEADER;

pub const TIMESERIES_HEADER: &str = "t,s,mass,energy,momentum_psi,max_abs_u,grad_norm";

/// Evolution time series, one row per record.
pub fn write_timeseries(records: &[StepRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{TIMESERIES_HEADER}")?;
    for r in records {
        let c = r.conserved;
        let row = [r.t, r.s, c.mass, c.energy, c.momentum_psi, r.max_abs, r.grad_norm()];
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// One row of the modulation CSV.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ModulationRow {
    pub t: f64,
    pub s: f64,
    pub lambda: f64,
    pub b: f64,
    pub gamma: f64,
    pub r_c: f64,
    pub z_c: f64,
    #[serde(rename = "E_eps")]
    pub e_eps: f64,
    pub orth1: f64,
    pub orth2r: f64,
    pub orth2z: f64,
    pub orth3: f64,
    pub orth4: f64,
    pub res_scaling: f64,
    pub res_b: f64,
    pub res_trans: f64,
    pub gamma_rate: f64,
    pub lyapunov: f64,
    pub ext_l2: f64,
    pub ext_hhalf: f64,
}

/// Reads a modulation CSV; the header must match the writer's exactly.
pub fn read_modulation_csv(r: impl Read) -> Result<Vec<ModulationRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != CSV_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("unexpected modulation CSV header '{}'", got.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        let row: ModulationRow = rec.map_err(|e: csv::Error| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}
