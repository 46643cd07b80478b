use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::{Error, Result};

pub const DEFAULT_V_DROP_FRAC: f64 = 0.1;

/// Window used to estimate the initial and final speed plateaus (s).
const PLATEAU_WINDOW: f64 = 2.0;
/// Dips separated by less than this are treated as one (s).
const DIP_MERGE_GAP: f64 = 1.0;
/// Fraction of the drop depth within which a speed counts as the minimum.
const MIN_SPEED_BAND: f64 = 0.01;

/// Deceleration and acceleration intervals of a leader's single disturbance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderPhases {
    pub decel: (f64, f64),
    pub accel: (f64, f64),
}

impl LeaderPhases {
    pub fn in_decel(&self, t: f64) -> bool {
        t >= self.decel.0 && t <= self.decel.1
    }

    pub fn after_accel(&self, t: f64) -> bool {
        t > self.accel.1
    }

    /// Same phases expressed relative to `origin`.
    pub fn relative_to(&self, origin: f64) -> Self {
        LeaderPhases {
            decel: (self.decel.0 - origin, self.decel.1 - origin),
            accel: (self.accel.0 - origin, self.accel.1 - origin),
        }
    }
}

fn plateau_speed(speeds: &[f64], n: usize) -> f64 {
    speeds[..n].iter().sum::<f64>() / n as f64
}

/// Time at which the speed crosses `level` between samples `i-1` and `i`.
fn crossing(times: &[f64], speeds: &[f64], i: usize, level: f64) -> f64 {
    if i == 0 {
        return times[0];
    }
    let (v0, v1) = (speeds[i - 1], speeds[i]);
    if (v1 - v0).abs() < f64::EPSILON {
        return times[i];
    }
    let f = ((level - v0) / (v1 - v0)).clamp(0.0, 1.0);
    times[i - 1] + f * (times[i] - times[i - 1])
}

/// Locates the deceleration and acceleration phases of a single stop-and-go
/// style disturbance.
///
/// The deceleration phase runs from the moment the speed falls below
/// `(1 - v_drop_frac)` of the initial plateau until the minimum speed is
/// reached; the acceleration phase runs from the last moment at the minimum
/// until the speed recovers to `(1 - v_drop_frac)` of the final plateau.
pub fn detect_phases(leader: &Trajectory, v_drop_frac: f64) -> Result<LeaderPhases> {
    if !(v_drop_frac > 0.0 && v_drop_frac < 1.0) {
        return Err(Error::invalid("v_drop_frac must be in (0, 1)"));
    }
    let times = leader.times();
    let speeds = leader.speeds();
    let n = speeds.len();
    let window = ((PLATEAU_WINDOW / leader.dt()).round() as usize).clamp(1, n);
    let v_init = plateau_speed(&speeds, window);
    let v_final = {
        let tail: Vec<f64> = speeds[n - window..].to_vec();
        plateau_speed(&tail, window)
    };
    let drop_level = (1.0 - v_drop_frac) * v_init;
    let recover_level = (1.0 - v_drop_frac) * v_final;

    // maximal runs below the drop level, merging short interruptions
    let merge = (DIP_MERGE_GAP / leader.dt()).round() as usize;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n {
        if speeds[k] < drop_level {
            let start = k;
            while k < n && speeds[k] < drop_level {
                k += 1;
            }
            let end = k - 1;
            match runs.last_mut() {
                Some(last) if start - last.1 <= merge => last.1 = end,
                _ => runs.push((start, end)),
            }
        } else {
            k += 1;
        }
    }
    match runs.len() {
        0 => return Err(Error::NoDisturbance),
        1 => {}
        m => return Err(Error::MultipleDisturbances(m)),
    }
    let (run_start, run_end) = runs[0];

    let (i_min, v_min) =
        speeds[run_start..=run_end]
            .iter()
            .enumerate()
            .fold((run_start, f64::INFINITY), |acc, (j, &v)| {
                if v < acc.1 {
                    (run_start + j, v)
                } else {
                    acc
                }
            });
    let band = v_min + MIN_SPEED_BAND * (v_init - v_min).max(0.0);
    let first_min = (run_start..=i_min).find(|&j| speeds[j] <= band).unwrap_or(i_min);
    let last_min = (i_min..=run_end).rev().find(|&j| speeds[j] <= band).unwrap_or(i_min);

    let decel_start = crossing(&times, &speeds, run_start, drop_level);
    let decel_end = crossing(&times, &speeds, first_min, band);
    let accel_start = if last_min + 1 < n {
        crossing(&times, &speeds, last_min + 1, band)
    } else {
        times[last_min]
    };
    let accel_end = (last_min + 1..n)
        .find(|&j| speeds[j] >= recover_level)
        .map(|j| crossing(&times, &speeds, j, recover_level))
        .unwrap_or(times[n - 1]);

    Ok(LeaderPhases {
        decel: (decel_start, decel_end.max(decel_start)),
        accel: (accel_start.max(decel_end), accel_end.max(accel_start)),
    })
}
