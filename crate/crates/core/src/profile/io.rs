//! CSV and JSON-sidecar serialization of profiles.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::{BenchInfo, DecayFit, ProfileSolution, SolveStats, TwState};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

const HEADER: [&str; 7] = ["x", "u", "z", "y", "u'", "z'", "y'"];

/// Metadata written next to a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub schema_version: u32,
    pub params: ModelParams,
    pub u_minus: f64,
    pub domain: [f64; 2],
    pub node_count: usize,
    pub residual_norm: f64,
    pub endpoint_error: f64,
    pub boundary_residual: f64,
    pub decay: DecayFit,
    pub reaction_width: f64,
    pub spike_height: f64,
    pub bench: Option<BenchInfo>,
    pub stats: SolveStats,
}

impl ProfileSolution {
    pub fn sidecar(&self) -> ProfileSidecar {
        ProfileSidecar {
            schema_version: PROFILE_SCHEMA_VERSION,
            params: self.params,
            u_minus: self.ends.u_minus_strong,
            domain: [self.x_minus, self.x_plus],
            node_count: self.grid.len(),
            residual_norm: self.residual_norm,
            endpoint_error: self.endpoint_error,
            boundary_residual: self.boundary_residual,
            decay: self.decay,
            reaction_width: self.reaction_width(),
            spike_height: self.spike_height(),
            bench: self.bench(),
            stats: self.stats,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(HEADER)?;
        for ((x, v), d) in self.grid.iter().zip(&self.values).zip(&self.derivs) {
            wtr.serialize((x, v.u, v.z, v.y, d.u, d.z, d.y))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.sidecar())?;
        Ok(())
    }
}

/// Sampled profile read back from CSV: grid, states and derivatives.
pub fn read_profile_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<TwState>, Vec<TwState>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(Error::InvalidParameter(format!("unexpected profile CSV header {headers:?}")));
    }
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    for row in rdr.deserialize() {
        let (x, u, z, y, du, dz, dy): (f64, f64, f64, f64, f64, f64, f64) = row?;
        grid.push(x);
        values.push(TwState::new(u, z, y));
        derivs.push(TwState::new(du, dz, dy));
    }
    Ok((grid, values, derivs))
}
