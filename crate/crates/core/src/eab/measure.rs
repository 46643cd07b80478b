use serde::{Deserialize, Serialize};

use crate::newell::NewellParams;
use crate::trajectory::{CfPair, Trajectory};
use crate::Result;

/// Width of the centered moving average applied to measured `eta` (s).
pub const DEFAULT_SMOOTH_WINDOW: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureOptions {
    /// Bisection bracket for `eta`.
    pub eta_min: f64,
    pub eta_max: f64,
    /// Moving-average width in seconds; values below two sampling intervals
    /// disable smoothing.
    pub smooth_window: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            eta_min: 0.05,
            eta_max: 5.0,
            smooth_window: DEFAULT_SMOOTH_WINDOW,
        }
    }
}

/// `eta` sampled at the leader's timestamps; `None` marks samples whose root
/// fell outside the bracket (or outside the follower's window).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSeries {
    pub times: Vec<f64>,
    pub eta: Vec<Option<f64>>,
}

impl EtaSeries {
    pub fn from_values(times: Vec<f64>, values: Vec<f64>) -> Self {
        EtaSeries {
            times,
            eta: values.into_iter().map(Some).collect(),
        }
    }

    pub fn valid(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.eta)
            .enumerate()
            .filter_map(|(i, (&t, e))| e.map(|e| (i, t, e)))
    }

    pub fn valid_count(&self) -> usize {
        self.eta.iter().filter(|e| e.is_some()).count()
    }

    /// Centered moving average over `window` samples, skipping invalid ones.
    pub fn smoothed(&self, window: usize) -> EtaSeries {
        let half = window / 2;
        let n = self.eta.len();
        let eta = (0..n)
            .map(|i| {
                self.eta[i]?;
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(n - 1);
                let vals: Vec<f64> = self.eta[lo..=hi].iter().flatten().copied().collect();
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        EtaSeries {
            times: self.times.clone(),
            eta,
        }
    }
}

/// Odd moving-average length (in samples) for a window in seconds.
pub(crate) fn window_samples(window_secs: f64, dt: f64) -> usize {
    2 * ((window_secs / (2.0 * dt)) + 1e-9).floor() as usize + 1
}

fn solve_eta(leader_x: f64, t: f64, follower: &Trajectory, p: &NewellParams, opts: &MeasureOptions) -> Option<f64> {
    let room = (follower.t_end() - t) / p.tau;
    let mut lo = opts.eta_min;
    let mut hi = opts.eta_max.min(room);
    if hi <= lo {
        return None;
    }
    let f = |eta: f64| follower.position_at(t + eta * p.tau) - leader_x + eta * p.delta;
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo > 0.0 || f_hi < 0.0 {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Measures the follower's `eta` against its leader: for each leader time `t`
/// the root of `x_f(t + eta tau) - x_l(t) + eta delta = 0` by bisection,
/// followed by a centered moving average.
pub fn measure_eta(pair: &CfPair, p: &NewellParams, opts: &MeasureOptions) -> Result<EtaSeries> {
    p.validate()?;
    let raw = EtaSeries {
        times: pair.leader.times(),
        eta: pair
            .leader
            .points()
            .iter()
            .map(|lp| solve_eta(lp.x, lp.t, &pair.follower, p, opts))
            .collect(),
    };
    let window = window_samples(opts.smooth_window, pair.dt());
    Ok(if window > 1 { raw.smoothed(window) } else { raw })
}
