//! First-stage deterministic calibration of Newell's response time and
//! minimum spacing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::trajectory::{newell_shift, CfPair};
use crate::{Error, Result};

/// Newell shift parameters: response time `tau` (s), minimum spacing `delta`
/// (m) and the implied congestion wave speed `w = -delta / tau` (m/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewellParams {
    pub tau: f64,
    pub delta: f64,
    pub w: f64,
}

impl NewellParams {
    pub fn new(tau: f64, delta: f64) -> Result<Self> {
        let p = NewellParams {
            tau,
            delta,
            w: -delta / tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Normalised root mean square error: `rms(obs - sim) / rms(obs)`.
pub fn nrmse(obs: &[f64], sim: &[f64]) -> Result<f64> {
    if obs.len() != sim.len() {
        return Err(Error::LengthMismatch {
            left: obs.len(),
            right: sim.len(),
        });
    }
    if obs.is_empty() {
        return Err(Error::Empty("series"));
    }
    let denom: f64 = obs.iter().map(|o| o * o).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateObservation);
    }
    let num: f64 = obs.iter().zip(sim).map(|(o, s)| (o - s).powi(2)).sum();
    Ok((num / denom).sqrt())
}

/// Response-time grid 0.5..=2.0 s in 0.1 s steps.
pub fn default_tau_grid() -> Vec<f64> {
    (5..=20).map(|i| i as f64 / 10.0).collect()
}

/// Minimum-spacing grid 2..=15 m in 1 m steps.
pub fn default_delta_grid() -> Vec<f64> {
    (2..=15).map(f64::from).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage1Result {
    pub group: String,
    pub tau: f64,
    pub delta: f64,
    pub w: f64,
    /// Sum of position NRMSE over the training pairs at the optimum.
    pub objective: f64,
}

impl Stage1Result {
    pub fn params(&self) -> NewellParams {
        NewellParams {
            tau: self.tau,
            delta: self.delta,
            w: self.w,
        }
    }
}

/// Sum over pairs of the follower-position NRMSE under a Newell shift. Terms
/// are added in sorted order so the value does not depend on pair order.
pub fn newell_objective(training: &[CfPair], p: &NewellParams) -> Result<f64> {
    let mut terms = training
        .iter()
        .map(|pair| {
            let sim = newell_shift(&pair.leader, p)?;
            nrmse(&pair.follower.positions(), &sim.positions())
        })
        .collect::<Result<Vec<f64>>>()?;
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum())
}

/// Exhaustive grid search for `(tau, delta)` minimising [`newell_objective`].
/// Ties go to the smaller `tau`, then the smaller `delta`.
pub fn calibrate_newell(training: &[CfPair], tau_grid: &[f64], delta_grid: &[f64]) -> Result<Stage1Result> {
    if training.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if tau_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::Empty("calibration grid"));
    }
    let mut taus = tau_grid.to_vec();
    let mut deltas = delta_grid.to_vec();
    taus.sort_by(f64::total_cmp);
    deltas.sort_by(f64::total_cmp);
    let candidates: Vec<(f64, f64)> = taus.iter().flat_map(|&t| deltas.iter().map(move |&d| (t, d))).collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&(tau, delta)| {
            let p = NewellParams::new(tau, delta)?;
            newell_objective(training, &p)
        })
        .collect::<Result<_>>()?;
    let best = crate::stats::argmin(&scores).expect("non-empty grid");
    let (tau, delta) = candidates[best];
    Ok(Stage1Result {
        group: training[0].label.group(),
        tau,
        delta,
        w: -delta / tau,
        objective: scores[best],
    })
}
