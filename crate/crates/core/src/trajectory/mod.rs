//! Uniformly sampled vehicle trajectories and leader/follower pairs.

mod io;
mod phases;

pub use io::{
    load_trajectories, read_manifest, read_trajectory_file, write_manifest, write_trajectories, ColumnMap,
    ManifestEntry,
};
pub use phases::{detect_phases, LeaderPhases, DEFAULT_V_DROP_FRAC};

use serde::{Deserialize, Serialize};

use crate::newell::NewellParams;
use crate::{Error, Result};

/// Default sampling interval (s).
pub const DEFAULT_DT: f64 = 0.1;
/// Allowed gap between reported and finite-difference speed before warning (m/s).
pub const KINEMATIC_TOLERANCE: f64 = 0.5;
/// Minimum common window of a car-following pair (s).
pub const MIN_PAIR_WINDOW: f64 = 30.0;
/// Tolerated backward motion in observed data before it is rejected (m).
pub const BACKWARD_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

/// An ordered, uniformly spaced vehicle trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    vehicle_id: String,
    dt: f64,
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Builds a trajectory, checking that timestamps are finite, strictly
    /// increasing and evenly spaced.
    pub fn new(vehicle_id: impl Into<String>, points: Vec<TrajectoryPoint>) -> Result<Self> {
        let vehicle_id = vehicle_id.into();
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory {vehicle_id} needs at least 2 points"
            )));
        }
        for w in points.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::NonMonotoneTime {
                    vehicle: vehicle_id,
                    t: w[1].t,
                });
            }
        }
        if points
            .iter()
            .any(|p| !(p.t.is_finite() && p.x.is_finite() && p.v.is_finite()))
        {
            return Err(Error::invalid(format!("trajectory {vehicle_id} has non-finite values")));
        }
        let n = points.len();
        let dt = (points[n - 1].t - points[0].t) / (n - 1) as f64;
        for (k, p) in points.iter().enumerate() {
            let expected = points[0].t + k as f64 * dt;
            if (p.t - expected).abs() > 1e-6 * dt.max(1.0) + 1e-3 * dt {
                return Err(Error::invalid(format!(
                    "trajectory {vehicle_id} is not uniformly sampled near t={}",
                    p.t
                )));
            }
        }
        Ok(Trajectory { vehicle_id, dt, points })
    }

    /// Builds a trajectory on the grid `t0 + k*dt` with explicit speeds.
    pub fn from_samples(vehicle_id: impl Into<String>, t0: f64, dt: f64, xs: &[f64], vs: &[f64]) -> Result<Self> {
        if xs.len() != vs.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: vs.len(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let points = xs
            .iter()
            .zip(vs)
            .enumerate()
            .map(|(k, (&x, &v))| TrajectoryPoint {
                t: t0 + k as f64 * dt,
                x,
                v,
            })
            .collect();
        Trajectory::new(vehicle_id, points)
    }

    /// Builds a trajectory from positions only; speeds by central difference.
    pub fn from_positions(vehicle_id: impl Into<String>, t0: f64, dt: f64, xs: &[f64]) -> Result<Self> {
        let vs = central_difference(xs, dt);
        Trajectory::from_samples(vehicle_id, t0, dt, xs, &vs)
    }

    pub fn vehicle_id(&self) -> &str {
        &self.vehicle_id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.vehicle_id = id.into();
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.points[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t0()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.v).collect()
    }

    /// Segment index `i` such that `t` lies in `[t_i, t_{i+1}]`, clamped.
    fn segment(&self, t: f64) -> usize {
        let n = self.points.len();
        let guess = ((t - self.t0()) / self.dt).floor();
        let mut i = if guess <= 0.0 { 0 } else { (guess as usize).min(n - 2) };
        while i > 0 && self.points[i].t > t {
            i -= 1;
        }
        while i + 2 < n && self.points[i + 1].t < t {
            i += 1;
        }
        i
    }

    /// Linearly interpolated position; outside the window the trajectory is
    /// extended at its first/last reported speed.
    pub fn position_at(&self, t: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if t <= first.t {
            return first.x + first.v * (t - first.t);
        }
        if t >= last.t {
            return last.x + last.v * (t - last.t);
        }
        let i = self.segment(t);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let f = (t - a.t) / (b.t - a.t);
        a.x + f * (b.x - a.x)
    }

    /// Linearly interpolated speed, held constant outside the window.
    pub fn speed_at(&self, t: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if t <= first.t {
            return first.v;
        }
        if t >= last.t {
            return last.v;
        }
        let i = self.segment(t);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let f = (t - a.t) / (b.t - a.t);
        a.v + f * (b.v - a.v)
    }

    /// Checks the properties expected of recorded data: non-negative speed and
    /// forward motion. Returns the number of interior samples whose reported
    /// speed disagrees with the finite-difference speed by more than
    /// [`KINEMATIC_TOLERANCE`] (reported as a warning, not an error).
    pub fn validate_observed(&self) -> Result<usize> {
        for p in &self.points {
            if p.v < 0.0 {
                return Err(Error::invalid(format!(
                    "vehicle {} has negative speed at t={}",
                    self.vehicle_id, p.t
                )));
            }
        }
        for w in self.points.windows(2) {
            if w[1].x < w[0].x - BACKWARD_TOLERANCE {
                return Err(Error::invalid(format!(
                    "vehicle {} moves backward at t={}",
                    self.vehicle_id, w[1].t
                )));
            }
        }
        let mut violations = 0;
        for w in self.points.windows(2) {
            let fd = (w[1].x - w[0].x) / (w[1].t - w[0].t);
            if (w[0].v - fd).abs() > KINEMATIC_TOLERANCE {
                violations += 1;
            }
        }
        if violations > 0 {
            log::warn!(
                "vehicle {}: {violations} samples exceed the kinematic tolerance",
                self.vehicle_id
            );
        }
        Ok(violations)
    }

    /// Restricts the trajectory to samples with `t_start <= t <= t_end`.
    pub fn crop(&self, t_start: f64, t_end: f64) -> Result<Self> {
        let eps = 1e-6 * self.dt;
        let points: Vec<_> = self
            .points
            .iter()
            .copied()
            .filter(|p| p.t >= t_start - eps && p.t <= t_end + eps)
            .collect();
        Trajectory::new(self.vehicle_id.clone(), points)
    }

    /// New trajectory on this trajectory's time grid.
    pub fn on_same_grid(&self, vehicle_id: impl Into<String>, xs: &[f64], vs: &[f64]) -> Result<Self> {
        if xs.len() != self.len() || vs.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: xs.len().min(vs.len()),
            });
        }
        let points = self
            .points
            .iter()
            .zip(xs.iter().zip(vs))
            .map(|(p, (&x, &v))| TrajectoryPoint { t: p.t, x, v })
            .collect();
        Ok(Trajectory {
            vehicle_id: vehicle_id.into(),
            dt: self.dt,
            points,
        })
    }

    /// Re-evaluates the trajectory on the given time grid.
    pub fn sample_on(&self, times: &[f64]) -> Result<Self> {
        let points = times
            .iter()
            .map(|&t| TrajectoryPoint {
                t,
                x: self.position_at(t),
                v: self.speed_at(t),
            })
            .collect();
        Trajectory::new(self.vehicle_id.clone(), points)
    }
}

/// Central differences with one-sided differences at both ends.
pub fn central_difference(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (xs[1] - xs[0]) / dt
            } else if i == n - 1 {
                (xs[n - 1] - xs[n - 2]) / dt
            } else {
                (xs[i + 1] - xs[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Resamples onto `t0 + k*dt_new` by linear interpolation of position; speeds
/// are recomputed by central difference.
pub fn resample(traj: &Trajectory, dt_new: f64) -> Result<Trajectory> {
    if !(dt_new > 0.0) {
        return Err(Error::invalid("dt_new must be positive"));
    }
    if dt_new > traj.duration() / 2.0 {
        return Err(Error::invalid(format!(
            "dt_new {dt_new} exceeds half the trajectory span {}",
            traj.duration()
        )));
    }
    let n = ((traj.duration() / dt_new) + 1e-9).floor() as usize + 1;
    let xs: Vec<f64> = (0..n)
        .map(|k| traj.position_at(traj.t0() + k as f64 * dt_new))
        .collect();
    Trajectory::from_positions(traj.vehicle_id(), traj.t0(), dt_new, &xs)
}

/// Shifts a trajectory by `time_shift` seconds and `space_shift` metres:
/// `x_out(t) = x_in(t - time_shift) - space_shift`, evaluated on the input grid.
/// Negative shifts give the inverse mapping.
pub fn shift_trajectory(
    traj: &Trajectory,
    time_shift: f64,
    space_shift: f64,
    vehicle_id: impl Into<String>,
) -> Trajectory {
    let points = traj
        .points()
        .iter()
        .map(|p| {
            let src = p.t - time_shift;
            TrajectoryPoint {
                t: p.t,
                x: traj.position_at(src) - space_shift,
                v: traj.speed_at(src),
            }
        })
        .collect();
    Trajectory {
        vehicle_id: vehicle_id.into(),
        dt: traj.dt,
        points,
    }
}

/// Newell follower: `x(t + tau) = x_leader(t) - delta` on the leader's grid.
pub fn newell_shift(leader: &Trajectory, p: &NewellParams) -> Result<Trajectory> {
    p.validate()?;
    Ok(shift_trajectory(
        leader,
        p.tau,
        p.delta,
        format!("{}-newell", leader.vehicle_id()),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VehicleClass {
    Hdv,
    Acc,
}

impl std::fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VehicleClass::Hdv => "HDV",
            VehicleClass::Acc => "ACC",
        })
    }
}

impl std::str::FromStr for VehicleClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HDV" => Ok(VehicleClass::Hdv),
            "ACC" => Ok(VehicleClass::Acc),
            other => Err(Error::Schema(format!("unknown vehicle class '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedRegime {
    Low,
    MedianHigh,
}

impl std::fmt::Display for SpeedRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpeedRegime::Low => "low",
            SpeedRegime::MedianHigh => "median_high",
        })
    }
}

impl std::str::FromStr for SpeedRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(SpeedRegime::Low),
            "median_high" | "median-high" | "high" => Ok(SpeedRegime::MedianHigh),
            other => Err(Error::Schema(format!("unknown speed regime '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairLabel {
    pub vehicle_class: VehicleClass,
    pub car_model: String,
    pub engine_mode: String,
    pub speed_regime: SpeedRegime,
}

impl PairLabel {
    /// Calibration group key: class, model, engine and speed regime.
    pub fn group(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.vehicle_class, self.car_model, self.engine_mode, self.speed_regime
        )
    }
}

/// A leader/follower pair cropped to a common, identical time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CfPair {
    pub leader: Trajectory,
    pub follower: Trajectory,
    pub label: PairLabel,
}

impl CfPair {
    /// Aligns both trajectories on the leader's grid over their common window
    /// and checks the pair invariants.
    pub fn new(leader: Trajectory, follower: Trajectory, label: PairLabel) -> Result<Self> {
        if (leader.dt() - follower.dt()).abs() > 1e-6 * leader.dt() {
            return Err(Error::invalid(format!(
                "leader {} and follower {} have different dt ({} vs {})",
                leader.vehicle_id(),
                follower.vehicle_id(),
                leader.dt(),
                follower.dt()
            )));
        }
        let start = leader.t0().max(follower.t0());
        let end = leader.t_end().min(follower.t_end());
        if end - start < MIN_PAIR_WINDOW - 1e-9 {
            return Err(Error::invalid(format!(
                "pair {}/{} overlaps for {:.2} s (< {MIN_PAIR_WINDOW} s)",
                leader.vehicle_id(),
                follower.vehicle_id(),
                (end - start).max(0.0)
            )));
        }
        let leader = leader.crop(start, end)?;
        let aligned = leader
            .points()
            .iter()
            .zip(
                follower
                    .points()
                    .iter()
                    .skip_while(|p| p.t < start - 1e-6 * leader.dt()),
            )
            .all(|(a, b)| (a.t - b.t).abs() <= 1e-6 * leader.dt());
        let follower = if aligned {
            follower.crop(start, end)?
        } else {
            follower.sample_on(&leader.times())?
        };
        if follower.len() != leader.len() {
            return Err(Error::invalid(format!(
                "pair {}/{} could not be aligned",
                leader.vehicle_id(),
                follower.vehicle_id()
            )));
        }
        for (l, f) in leader.points().iter().zip(follower.points()) {
            if f.x >= l.x {
                return Err(Error::Overtake {
                    leader: leader.vehicle_id().to_string(),
                    follower: follower.vehicle_id().to_string(),
                    t: l.t,
                });
            }
        }
        Ok(CfPair {
            leader,
            follower,
            label,
        })
    }

    pub fn id(&self) -> String {
        format!("{}->{}", self.leader.vehicle_id(), self.follower.vehicle_id())
    }

    pub fn dt(&self) -> f64 {
        self.leader.dt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: f64, n: usize) -> Trajectory {
        let xs: Vec<f64> = (0..n).map(|k| v * k as f64 * 0.1).collect();
        Trajectory::from_samples("a", 0.0, 0.1, &xs, &vec![v; n]).unwrap()
    }

    #[test]
    fn rejects_duplicate_timestamps() {
        let pts = vec![
            TrajectoryPoint { t: 0.0, x: 0.0, v: 1.0 },
            TrajectoryPoint { t: 0.0, x: 0.1, v: 1.0 },
        ];
        assert!(matches!(Trajectory::new("a", pts), Err(Error::NonMonotoneTime { .. })));
    }

    #[test]
    fn constant_speed_resample_is_unchanged() {
        let traj = line(12.0, 101);
        for dt in [0.05, 0.2, 0.3] {
            let r = resample(&traj, dt).unwrap();
            for p in r.points() {
                assert!((p.x - 12.0 * p.t).abs() < 1e-9);
                assert!((p.v - 12.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn resample_keeps_shared_grid_points_exact() {
        // piecewise-linear x with a kink at t = 5 s
        let xs: Vec<f64> = (0..101)
            .map(|k| {
                let t = k as f64 * 0.1;
                if t < 5.0 {
                    10.0 * t
                } else {
                    50.0 + 4.0 * (t - 5.0)
                }
            })
            .collect();
        let traj = Trajectory::from_positions("a", 0.0, 0.1, &xs).unwrap();
        let r = resample(&traj, 0.2).unwrap();
        for (k, p) in r.points().iter().enumerate() {
            assert!((p.x - xs[2 * k]).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_sinusoid_error_is_small() {
        // x = 10 t + 2 sin(0.5 t); linear interpolation error <= 2*0.25*dt^2/8
        let f = |t: f64| 10.0 * t + 2.0 * (0.5 * t).sin();
        let xs: Vec<f64> = (0..401).map(|k| f(k as f64 * 0.1)).collect();
        let traj = Trajectory::from_positions("s", 0.0, 0.1, &xs).unwrap();
        let r = resample(&traj, 0.05).unwrap();
        let max_err = r.points().iter().map(|p| (p.x - f(p.t)).abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-3, "max error {max_err}");
    }

    #[test]
    fn resample_rejects_coarse_dt() {
        let traj = line(5.0, 11);
        assert!(resample(&traj, 0.6).is_err());
    }

    #[test]
    fn resample_is_idempotent() {
        let xs: Vec<f64> = (0..200).map(|k| (k as f64 * 0.1).powi(2)).collect();
        let traj = Trajectory::from_positions("q", 0.0, 0.1, &xs).unwrap();
        let once = resample(&traj, 0.1).unwrap();
        let twice = resample(&once, 0.1).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn newell_constant_speed_spacing() {
        let leader = line(20.0, 600);
        let p = NewellParams::new(1.0, 6.0).unwrap();
        let f = newell_shift(&leader, &p).unwrap();
        for (l, fp) in leader.points().iter().zip(f.points()) {
            assert!((l.x - fp.x - 26.0).abs() < 1e-9);
        }
    }

    #[test]
    fn newell_stopped_leader_spacing_is_delta() {
        let leader = Trajectory::from_samples("l", 0.0, 0.1, &[100.0; 50], &[0.0; 50]).unwrap();
        let p = NewellParams::new(1.1, 10.0).unwrap();
        let f = newell_shift(&leader, &p).unwrap();
        for (l, fp) in leader.points().iter().zip(f.points()) {
            assert!((l.x - fp.x - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn newell_rejects_nonpositive_params() {
        let leader = line(20.0, 50);
        assert!(newell_shift(
            &leader,
            &NewellParams {
                tau: 0.0,
                delta: 5.0,
                w: 0.0
            }
        )
        .is_err());
    }

    #[test]
    fn overtake_is_rejected() {
        let leader = line(10.0, 400);
        let xs: Vec<f64> = leader
            .positions()
            .iter()
            .enumerate()
            .map(|(k, x)| if k == 200 { x + 1.0 } else { x - 15.0 })
            .collect();
        let follower = Trajectory::from_positions("f", 0.0, 0.1, &xs).unwrap();
        let label = PairLabel {
            vehicle_class: VehicleClass::Acc,
            car_model: "X".into(),
            engine_mode: "normal".into(),
            speed_regime: SpeedRegime::MedianHigh,
        };
        assert!(matches!(
            CfPair::new(leader, follower, label),
            Err(Error::Overtake { .. })
        ));
    }
}
