use serde::{Deserialize, Serialize};

use crate::eab::window_samples;
use crate::eab::{measure_eta, simulate_follower, EabParams, EtaSeries, MeasureOptions};
use crate::newell::{nrmse, NewellParams};
use crate::trajectory::{CfPair, Trajectory};
use crate::{Error, Result};

/// Weights on the position, deviation and critical-point NRMSE terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GofWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for GofWeights {
    fn default() -> Self {
        GofWeights {
            c1: 0.4,
            c2: 0.4,
            c3: 0.2,
        }
    }
}

impl GofWeights {
    pub fn validate(&self) -> Result<()> {
        let c = [self.c1, self.c2, self.c3];
        if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("gof weights must be non-negative".into()));
        }
        let sum: f64 = c.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("gof weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Indices of the observed maximum, observed minimum and largest absolute
/// simulated-observed gap (first occurrence on ties).
fn critical_indices(obs: &[f64], sim: &[f64]) -> [usize; 3] {
    let mut idx = [0usize; 3];
    for i in 1..obs.len() {
        if obs[i] > obs[idx[0]] {
            idx[0] = i;
        }
        if obs[i] < obs[idx[1]] {
            idx[1] = i;
        }
        if (sim[i] - obs[i]).abs() > (sim[idx[2]] - obs[idx[2]]).abs() {
            idx[2] = i;
        }
    }
    idx
}

fn critical_points(obs: &[f64], sim: &[f64]) -> ([f64; 3], [f64; 3]) {
    let idx = critical_indices(obs, sim);
    (idx.map(|i| obs[i]), idx.map(|i| sim[i]))
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// Weighted NRMSE of positions, deviation series and critical deviation points.
pub fn gof_eab(obs_x: &[f64], sim_x: &[f64], obs_eta: &[f64], sim_eta: &[f64], cw: &GofWeights) -> Result<f64> {
    if obs_eta.len() != sim_eta.len() {
        return Err(Error::LengthMismatch {
            left: obs_eta.len(),
            right: sim_eta.len(),
        });
    }
    if obs_eta.is_empty() {
        return Err(Error::Empty("eta series"));
    }
    let (oc, sc) = critical_points(obs_eta, sim_eta);
    Ok(cw.c1 * nrmse(obs_x, sim_x)? + cw.c2 * nrmse(obs_eta, sim_eta)? + cw.c3 * nrmse(&oc, &sc)?)
}

/// Fit of one particle on one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Features {
    /// RMSE of positions (m).
    pub zeta_x: f64,
    /// RMSE of the deviation series.
    pub zeta_eta: f64,
    /// RMSE of the three critical deviation points.
    pub zeta_crit: f64,
    pub gof: f64,
}

/// A pair with its observed deviation series measured once up front.
#[derive(Clone, Debug)]
pub struct PreparedPair {
    pub id: String,
    leader: Trajectory,
    obs_x: Vec<f64>,
    obs_eta: EtaSeries,
    valid_idx: Vec<usize>,
    window: usize,
}

impl PreparedPair {
    pub fn new(pair: &CfPair, p: &NewellParams, opts: &MeasureOptions) -> Result<Self> {
        let obs_eta = measure_eta(pair, p, opts)?;
        let valid_idx: Vec<usize> = obs_eta.valid().map(|(i, _, _)| i).collect();
        if valid_idx.is_empty() {
            return Err(Error::Empty("measurable deviation samples"));
        }
        Ok(PreparedPair {
            id: pair.id(),
            leader: pair.leader.clone(),
            obs_x: pair.follower.positions(),
            obs_eta,
            valid_idx,
            window: window_samples(opts.smooth_window, pair.dt()),
        })
    }

    pub fn leader(&self) -> &Trajectory {
        &self.leader
    }

    pub fn observed_eta(&self) -> &EtaSeries {
        &self.obs_eta
    }

    /// Model deviation at the observed valid samples, smoothed like the
    /// observation.
    fn simulated_eta(&self, theta: &EabParams) -> Result<Vec<f64>> {
        let profile = theta.profile()?;
        let t0 = self.leader.t0();
        let mut series = EtaSeries {
            times: self.obs_eta.times.clone(),
            eta: vec![None; self.obs_eta.times.len()],
        };
        for &i in &self.valid_idx {
            series.eta[i] = Some(profile.eval(series.times[i] - t0));
        }
        if self.window > 1 {
            series = series.smoothed(self.window);
        }
        Ok(self.valid_idx.iter().filter_map(|&i| series.eta[i]).collect())
    }

    pub fn features(&self, p: &NewellParams, theta: &EabParams, cw: &GofWeights) -> Result<Features> {
        let sim = simulate_follower(&self.leader, p, theta)?;
        let sim_x = sim.positions();
        let obs_eta: Vec<f64> = self.valid_idx.iter().filter_map(|&i| self.obs_eta.eta[i]).collect();
        let sim_eta = self.simulated_eta(theta)?;
        let gof = gof_eab(&self.obs_x, &sim_x, &obs_eta, &sim_eta, cw)?;
        let (oc, sc) = critical_points(&obs_eta, &sim_eta);
        Ok(Features {
            zeta_x: rmse(&self.obs_x, &sim_x),
            zeta_eta: rmse(&obs_eta, &sim_eta),
            zeta_crit: rmse(&oc, &sc),
            gof,
        })
    }
}

/// Anything that scores a parameter vector; lower is better and invalid
/// vectors score `+inf`.
pub trait GofEvaluator: Sync {
    fn gof(&self, theta: &EabParams) -> f64;
}

/// Mean goodness of fit over a set of training pairs.
#[derive(Clone, Debug)]
pub struct CalibrationProblem {
    pub pairs: Vec<PreparedPair>,
    pub params: NewellParams,
    pub weights: GofWeights,
}

impl CalibrationProblem {
    pub fn new(pairs: &[CfPair], params: NewellParams, weights: GofWeights, opts: &MeasureOptions) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("training pairs"));
        }
        weights.validate()?;
        let pairs = pairs
            .iter()
            .map(|pair| PreparedPair::new(pair, &params, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationProblem { pairs, params, weights })
    }

    pub fn try_gof(&self, theta: &EabParams) -> Result<f64> {
        let mut total = 0.0;
        for pair in &self.pairs {
            total += pair.features(&self.params, theta, &self.weights)?.gof;
        }
        Ok(total / self.pairs.len() as f64)
    }
}

impl GofEvaluator for CalibrationProblem {
    fn gof(&self, theta: &EabParams) -> f64 {
        match self.try_gof(theta) {
            Ok(g) if g.is_finite() => g,
            _ => f64::INFINITY,
        }
    }
}
