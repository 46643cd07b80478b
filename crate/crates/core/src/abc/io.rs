use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParticlePopulation, TraceRow};
use crate::eab::EabParams;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct PosteriorRecord {
    eta0: f64,
    eta1: f64,
    eta2: f64,
    eta3: f64,
    eps0: f64,
    eps1: f64,
    eps2: f64,
    t1: f64,
    gof: f64,
    weight: f64,
}

/// One row per particle: eight parameters, gof and weight.
pub fn write_posterior(path: &Path, pop: &ParticlePopulation) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in &pop.particles {
        let t = p.theta;
        w.serialize(PosteriorRecord {
            eta0: t.eta0,
            eta1: t.eta1,
            eta2: t.eta2,
            eta3: t.eta3,
            eps0: t.eps0,
            eps1: t.eps1,
            eps2: t.eps2,
            t1: t.t1,
            gof: p.gof,
            weight: p.weight,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_posterior(path: &Path) -> Result<ParticlePopulation> {
    let mut r = csv::Reader::from_path(path)?;
    let mut particles = Vec::new();
    for rec in r.deserialize() {
        let rec: PosteriorRecord = rec?;
        let theta = EabParams::from_array([
            rec.eta0, rec.eta1, rec.eta2, rec.eta3, rec.eps0, rec.eps1, rec.eps2, rec.t1,
        ]);
        particles.push((theta, rec.gof, rec.weight));
    }
    let mut pop = ParticlePopulation::from_particles(particles.iter().map(|p| (p.0, p.1)).collect(), 0)?;
    let total: f64 = particles.iter().map(|p| p.2).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("posterior weights sum to zero"));
    }
    for (p, rec) in pop.particles.iter_mut().zip(&particles) {
        p.weight = rec.2 / total;
    }
    Ok(pop)
}

pub fn write_diagnostics(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
