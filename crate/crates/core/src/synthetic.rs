//! Synthetic leader/follower datasets with planted parameters.
//!
//! Leaders follow a trapezoidal speed profile (cruise, decelerate, hold,
//! accelerate, cruise). Followers are simulated from planted deviation curves
//! of a chosen reaction pattern, optionally with Gaussian position noise.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eab::{simulate_follower, EabParams};
use crate::newell::NewellParams;
use crate::rng::{domain, substream};
use crate::trajectory::{
    central_difference, write_manifest, write_trajectories, CfPair, LeaderPhases, ManifestEntry, SpeedRegime,
    Trajectory, VehicleClass, DEFAULT_DT,
};
use crate::{Error, Result};

/// Trapezoidal leader speed profile. Durations in seconds, speeds in m/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeaderProfile {
    pub v_cruise: f64,
    pub v_low: f64,
    pub t_cruise: f64,
    pub t_decel: f64,
    pub t_hold: f64,
    pub t_accel: f64,
    pub t_tail: f64,
    pub dt: f64,
    pub x0: f64,
}

impl Default for LeaderProfile {
    fn default() -> Self {
        LeaderProfile {
            v_cruise: 20.0,
            v_low: 8.0,
            t_cruise: 15.0,
            t_decel: 6.0,
            t_hold: 5.0,
            t_accel: 10.0,
            t_tail: 30.0,
            dt: DEFAULT_DT,
            x0: 0.0,
        }
    }
}

impl LeaderProfile {
    fn knots(&self) -> [(f64, f64); 6] {
        let t1 = self.t_cruise;
        let t2 = t1 + self.t_decel;
        let t3 = t2 + self.t_hold;
        let t4 = t3 + self.t_accel;
        [
            (0.0, self.v_cruise),
            (t1, self.v_cruise),
            (t2, self.v_low),
            (t3, self.v_low),
            (t4, self.v_cruise),
            (t4 + self.t_tail, self.v_cruise),
        ]
    }

    pub fn duration(&self) -> f64 {
        self.knots()[5].0
    }

    /// Ramp-down and ramp-up intervals of the profile.
    pub fn ramps(&self) -> LeaderPhases {
        let k = self.knots();
        LeaderPhases {
            decel: (k[1].0, k[2].0),
            accel: (k[3].0, k[4].0),
        }
    }

    /// Exact position and speed at `t` (relative to the start).
    pub fn state(&self, t: f64) -> (f64, f64) {
        let k = self.knots();
        let mut x = self.x0;
        for w in k.windows(2) {
            let ((ta, va), (tb, vb)) = (w[0], w[1]);
            let slope = if tb > ta { (vb - va) / (tb - ta) } else { 0.0 };
            if t <= tb {
                let h = (t - ta).max(0.0);
                return (x + va * h + 0.5 * slope * h * h, va + slope * h);
            }
            x += 0.5 * (va + vb) * (tb - ta);
        }
        let (tl, vl) = k[5];
        (x + vl * (t - tl), vl)
    }

    pub fn validate(&self) -> Result<()> {
        let durations = [self.t_cruise, self.t_decel, self.t_hold, self.t_accel, self.t_tail];
        if durations.iter().any(|d| !(*d >= 0.0)) || !(self.dt > 0.0) {
            return Err(Error::invalid("leader profile durations must be non-negative"));
        }
        if !(self.v_cruise > self.v_low && self.v_low >= 0.0) {
            return Err(Error::invalid("leader profile needs v_cruise > v_low >= 0"));
        }
        Ok(())
    }
}

pub fn trapezoid_leader(id: impl Into<String>, profile: &LeaderProfile) -> Result<Trajectory> {
    profile.validate()?;
    let n = (profile.duration() / profile.dt).round() as usize + 1;
    let (xs, vs): (Vec<f64>, Vec<f64>) = (0..n).map(|k| profile.state(k as f64 * profile.dt)).unzip();
    Trajectory::from_samples(id, 0.0, profile.dt, &xs, &vs)
}

/// Reaction-pattern families used to plant deviation curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantPattern {
    /// Rise during the leader's deceleration, return to the initial level.
    ConcaveEarly,
    /// Drop during the leader's deceleration, return to the initial level.
    ConvexEarly,
    /// Rise, fall below the initial level, partial recovery.
    ConcaveConvex,
    /// Rise to a higher level and stay.
    NonDecreasing,
    /// Constant `eta = 1`.
    Equilibrium,
}

/// Random deviation curve of `pattern`, timed against `profile`.
pub fn sample_theta<R: Rng + ?Sized>(pattern: PlantPattern, profile: &LeaderProfile, rng: &mut R) -> EabParams {
    let tc = profile.t_cruise;
    match pattern {
        PlantPattern::ConcaveEarly | PlantPattern::ConvexEarly => {
            let s = if pattern == PlantPattern::ConcaveEarly {
                1.0
            } else {
                -1.0
            };
            let eta0 = if s > 0.0 {
                rng.random_range(0.9..1.1)
            } else {
                rng.random_range(0.95..1.1)
            };
            let eta1 = eta0 + s * rng.random_range(0.25..0.4);
            let eta3 = eta0 + rng.random_range(-0.04..0.04);
            EabParams {
                eta0,
                eta1,
                eta2: eta3,
                eta3,
                eps0: s * rng.random_range(0.1..0.15),
                eps1: -s * rng.random_range(0.05..0.1),
                eps2: 0.0,
                t1: tc + rng.random_range(0.0..0.5),
            }
        }
        PlantPattern::ConcaveConvex => {
            let eta0 = rng.random_range(0.95..1.05);
            let eta1 = eta0 + rng.random_range(0.35..0.45);
            let eta2 = eta0 - rng.random_range(0.2..0.25);
            let eta3 = eta0 + rng.random_range(-0.03..0.03);
            EabParams {
                eta0,
                eta1,
                eta2,
                eta3,
                eps0: rng.random_range(0.1..0.15),
                eps1: -rng.random_range(0.1..0.15),
                eps2: rng.random_range(0.05..0.1),
                t1: tc + rng.random_range(0.0..0.5),
            }
        }
        PlantPattern::NonDecreasing => {
            let eta0 = rng.random_range(0.9..1.1);
            let eta1 = eta0 + rng.random_range(0.3..0.6);
            EabParams {
                eta0,
                eta1,
                eta2: eta1,
                eta3: eta1,
                eps0: rng.random_range(0.05..0.1),
                eps1: 0.0,
                eps2: 0.0,
                t1: tc + rng.random_range(0.0..3.0),
            }
        }
        PlantPattern::Equilibrium => EabParams::constant(1.0),
    }
}

/// Leader profile with small random variations around the default.
pub fn jittered_profile<R: Rng + ?Sized>(rng: &mut R) -> LeaderProfile {
    LeaderProfile {
        v_cruise: rng.random_range(18.0..22.0),
        v_low: rng.random_range(6.0..10.0),
        t_decel: rng.random_range(5.0..7.0),
        t_hold: rng.random_range(3.0..6.0),
        t_accel: rng.random_range(8.0..12.0),
        ..LeaderProfile::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub vehicle_class: VehicleClass,
    pub car_model: String,
    pub engine_mode: String,
    pub pattern: PlantPattern,
    pub tau: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ConcaveAcc,
    ConvexAcc,
    ConcaveConvexAcc,
    NondecreasingHdv,
    Equilibrium,
    /// An HDV group (non-decreasing) and an ACC group (convex).
    Mixed,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::ConcaveAcc,
        Scenario::ConvexAcc,
        Scenario::ConcaveConvexAcc,
        Scenario::NondecreasingHdv,
        Scenario::Equilibrium,
        Scenario::Mixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ConcaveAcc => "concave_acc",
            Scenario::ConvexAcc => "convex_acc",
            Scenario::ConcaveConvexAcc => "concave_convex_acc",
            Scenario::NondecreasingHdv => "nondecreasing_hdv",
            Scenario::Equilibrium => "equilibrium",
            Scenario::Mixed => "mixed",
        }
    }

    pub fn groups(&self) -> Vec<GroupPlan> {
        let acc = |model: &str, pattern, tau, delta| GroupPlan {
            vehicle_class: VehicleClass::Acc,
            car_model: model.into(),
            engine_mode: "normal".into(),
            pattern,
            tau,
            delta,
        };
        let hdv = GroupPlan {
            vehicle_class: VehicleClass::Hdv,
            car_model: "human".into(),
            engine_mode: "manual".into(),
            pattern: PlantPattern::NonDecreasing,
            tau: 1.5,
            delta: 7.0,
        };
        match self {
            Scenario::ConcaveAcc => vec![acc("X", PlantPattern::ConcaveEarly, 1.2, 8.0)],
            Scenario::ConvexAcc => vec![acc("X", PlantPattern::ConvexEarly, 1.0, 6.0)],
            Scenario::ConcaveConvexAcc => vec![acc("Y", PlantPattern::ConcaveConvex, 1.1, 6.0)],
            Scenario::NondecreasingHdv => vec![hdv],
            Scenario::Equilibrium => vec![acc("X", PlantPattern::Equilibrium, 1.1, 10.0)],
            Scenario::Mixed => vec![hdv, acc("X", PlantPattern::ConvexEarly, 1.0, 6.0)],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::invalid(format!("unknown profile '{s}' (known: {})", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub pairs_per_group: usize,
    /// Standard deviation of Gaussian noise added to follower positions (m).
    pub noise_sd: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            pairs_per_group: 8,
            noise_sd: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub leader_id: String,
    pub follower_id: String,
    pub group: String,
    pub pattern: PlantPattern,
    pub theta: EabParams,
    pub leader_profile: LeaderProfile,
}

/// Everything planted into a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub scenario: Scenario,
    pub seed: u64,
    pub noise_sd: f64,
    pub newell: BTreeMap<String, NewellParams>,
    pub pairs: Vec<PlantedPair>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub trajectories: Vec<Trajectory>,
    pub manifest: Vec<ManifestEntry>,
    pub truth: Truth,
}

impl SyntheticDataset {
    pub fn pairs(&self) -> Result<Vec<CfPair>> {
        let find = |id: &str| {
            self.trajectories
                .iter()
                .find(|t| t.vehicle_id() == id)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("missing vehicle {id}")))
        };
        self.manifest
            .iter()
            .map(|e| CfPair::new(find(&e.leader_id)?, find(&e.follower_id)?, e.label()))
            .collect()
    }
}

/// Follower of `leader` from planted parameters, with optional position noise.
/// Speeds of a noisy follower are finite differences of the noisy positions.
pub fn planted_follower<R: Rng + ?Sized>(
    id: &str,
    leader: &Trajectory,
    p: &NewellParams,
    theta: &EabParams,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let sim = simulate_follower(leader, p, theta)?;
    let mut xs = sim.positions();
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
        for x in &mut xs {
            *x += normal.sample(rng);
        }
    }
    let vs = if noise_sd > 0.0 {
        central_difference(&xs, sim.dt())
    } else {
        sim.speeds()
    };
    sim.on_same_grid(id, &xs, &vs)
}

/// Running maximum of the positions, so a noisy trajectory never moves
/// backward (the loader rejects backward motion).
fn forward_only(traj: Trajectory) -> Result<Trajectory> {
    let mut high = f64::NEG_INFINITY;
    let xs: Vec<f64> = traj
        .positions()
        .into_iter()
        .map(|x| {
            high = high.max(x);
            high
        })
        .collect();
    let vs = central_difference(&xs, traj.dt());
    traj.on_same_grid(traj.vehicle_id().to_string(), &xs, &vs)
}

pub fn generate(scenario: Scenario, seed: u64, opts: &GenerateOptions) -> Result<SyntheticDataset> {
    if opts.pairs_per_group == 0 {
        return Err(Error::invalid("pairs_per_group must be at least 1"));
    }
    if !(opts.noise_sd >= 0.0) {
        return Err(Error::invalid("noise_sd must be non-negative"));
    }
    let mut trajectories = Vec::new();
    let mut manifest = Vec::new();
    let mut newell = BTreeMap::new();
    let mut planted = Vec::new();
    for (g, plan) in scenario.groups().iter().enumerate() {
        let p = NewellParams::new(plan.tau, plan.delta)?;
        let regime = SpeedRegime::MedianHigh;
        let group = format!(
            "{}/{}/{}/{}",
            plan.vehicle_class, plan.car_model, plan.engine_mode, regime
        );
        newell.insert(group.clone(), p);
        for i in 0..opts.pairs_per_group {
            let mut rng = substream(seed, domain::SYNTHETIC, g as u64, i as u64);
            let profile = jittered_profile(&mut rng);
            let theta = sample_theta(plan.pattern, &profile, &mut rng);
            let stem = format!(
                "{}-{}-{:02}",
                plan.vehicle_class.to_string().to_lowercase(),
                plan.car_model.to_lowercase(),
                i
            );
            let leader_id = format!("{stem}-lead");
            let leader = trapezoid_leader(&leader_id, &profile)?;
            let mut follower = planted_follower(&stem, &leader, &p, &theta, opts.noise_sd, &mut rng)?;
            if opts.noise_sd > 0.0 {
                follower = forward_only(follower)?;
            }
            manifest.push(ManifestEntry {
                leader_id: leader_id.clone(),
                follower_id: stem.clone(),
                vehicle_class: plan.vehicle_class,
                car_model: plan.car_model.clone(),
                engine_mode: plan.engine_mode.clone(),
                speed_regime: regime,
            });
            planted.push(PlantedPair {
                leader_id,
                follower_id: stem,
                group: group.clone(),
                pattern: plan.pattern,
                theta,
                leader_profile: profile,
            });
            trajectories.push(leader);
            trajectories.push(follower);
        }
    }
    Ok(SyntheticDataset {
        trajectories,
        manifest,
        truth: Truth {
            scenario,
            seed,
            noise_sd: opts.noise_sd,
            newell,
            pairs: planted,
        },
    })
}

pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes `trajectories.csv`, `manifest.csv` and the `truth.json` sidecar.
pub fn write_dataset(dir: &Path, ds: &SyntheticDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_trajectories(&dir.join(TRAJECTORY_FILE), &ds.trajectories)?;
    write_manifest(&dir.join(MANIFEST_FILE), &ds.manifest)?;
    let truth = serde_json::to_string_pretty(&ds.truth)?;
    let path = dir.join(TRUTH_FILE);
    std::fs::write(&path, truth + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::detect_phases;

    #[test]
    fn leader_positions_integrate_speeds() {
        let profile = LeaderProfile::default();
        let leader = trapezoid_leader("l", &profile).unwrap();
        let pts = leader.points();
        for w in pts.windows(2) {
            let avg = 0.5 * (w[0].v + w[1].v) * profile.dt;
            assert!((w[1].x - w[0].x - avg).abs() < 1e-9);
        }
        let expected = 20.0 * 15.0 + 14.0 * 6.0 + 8.0 * 5.0 + 14.0 * 10.0 + 20.0 * 30.0;
        assert!((pts.last().unwrap().x - expected).abs() < 1e-9);
    }

    #[test]
    fn detected_phases_sit_inside_the_ramps() {
        let profile = LeaderProfile::default();
        let leader = trapezoid_leader("l", &profile).unwrap();
        let ph = detect_phases(&leader, 0.1).unwrap();
        let ramps = profile.ramps();
        assert!(ph.decel.0 >= ramps.decel.0 && ph.decel.1 <= ramps.decel.1 + 0.2);
        assert!(ph.accel.0 >= ramps.accel.0 - 0.2 && ph.accel.1 <= ramps.accel.1);
    }

    #[test]
    fn planted_thetas_are_valid() {
        let profile = LeaderProfile::default();
        let mut rng = substream(5, 0, 0, 0);
        for pattern in [
            PlantPattern::ConcaveEarly,
            PlantPattern::ConvexEarly,
            PlantPattern::ConcaveConvex,
            PlantPattern::NonDecreasing,
            PlantPattern::Equilibrium,
        ] {
            for _ in 0..50 {
                let th = sample_theta(pattern, &profile, &mut rng);
                assert!(th.is_valid(), "{pattern:?} {th:?}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let opts = GenerateOptions {
            pairs_per_group: 2,
            noise_sd: 0.1,
        };
        let a = generate(Scenario::Mixed, 3, &opts).unwrap();
        let b = generate(Scenario::Mixed, 3, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs().unwrap().len(), 4);
        assert!("nope".parse::<Scenario>().is_err());
    }
}
