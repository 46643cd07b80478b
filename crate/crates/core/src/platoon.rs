//! Monte-Carlo simulation of mixed HDV/ACC platoons behind one leader.
//!
//! Each run places the ACC followers at random, draws a fresh θ for every
//! follower from its class posterior and simulates the chain in order. Runs
//! are independent and evaluated in parallel; every random draw comes from a
//! substream keyed by (seed, run, vehicle), so results do not depend on
//! scheduling.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::ParticlePopulation;
use crate::eab::{simulate_follower, EabParams};
use crate::hysteresis::{HysteresisLoop, DEFAULT_ZONE_DT};
use crate::newell::NewellParams;
use crate::rng::{domain, substream};
use crate::stats::{mean, std_dev};
use crate::trajectory::{Trajectory, VehicleClass};
use crate::{Error, Result};

pub const DEFAULT_N_VEHICLES: usize = 20;
pub const DEFAULT_RUNS: usize = 50;
/// Spacing below which a run is treated as a collision (m).
pub const MIN_SPACING: f64 = 0.5;
/// Draws per vehicle before a run is given up.
pub const MAX_THETA_DRAWS: usize = 10;

#[derive(Clone, Debug)]
pub struct PlatoonSpec {
    /// Vehicles including the leader.
    pub n_vehicles: usize,
    pub penetration: f64,
    pub leader: Trajectory,
    pub hdv_posterior: ParticlePopulation,
    pub acc_posterior: ParticlePopulation,
    pub hdv_params: NewellParams,
    pub acc_params: NewellParams,
    pub runs: usize,
    pub seed: u64,
    pub zone_dt: f64,
}

impl PlatoonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles < 2 {
            return Err(Error::invalid("a platoon needs at least 2 vehicles"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        check_penetration(self.penetration)?;
        if self.hdv_posterior.is_empty() || self.acc_posterior.is_empty() {
            return Err(Error::Empty("posterior"));
        }
        self.hdv_params.validate()?;
        self.acc_params.validate()?;
        if !(self.zone_dt > 0.0) {
            return Err(Error::invalid("zone_dt must be positive"));
        }
        Ok(())
    }

    /// Wave speed used for the platoon loop: the HDV group's.
    pub fn wave_speed(&self) -> f64 {
        self.hdv_params.w
    }

    fn population(&self, class: VehicleClass) -> (&ParticlePopulation, &NewellParams) {
        match class {
            VehicleClass::Hdv => (&self.hdv_posterior, &self.hdv_params),
            VehicleClass::Acc => (&self.acc_posterior, &self.acc_params),
        }
    }
}

fn check_penetration(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("penetration must lie in [0, 1], got {p}")))
    }
}

/// Classes of the `n - 1` followers: `round(penetration (n - 1))` ACC
/// vehicles at uniformly chosen positions, the rest HDV.
pub fn assign_types(n: usize, penetration: f64, seed: u64) -> Result<Vec<VehicleClass>> {
    types_for_run(n, penetration, seed, 0)
}

fn types_for_run(n: usize, penetration: f64, seed: u64, run: usize) -> Result<Vec<VehicleClass>> {
    check_penetration(penetration)?;
    let followers = n.saturating_sub(1);
    let n_acc = (penetration * followers as f64).round() as usize;
    let mut rng = substream(seed, domain::PLATOON_TYPES, run as u64, 0);
    let mut types = vec![VehicleClass::Hdv; followers];
    for i in index::sample(&mut rng, followers, n_acc) {
        types[i] = VehicleClass::Acc;
    }
    Ok(types)
}

#[derive(Clone, Debug)]
pub struct PlatoonRun {
    pub run: usize,
    pub types: Vec<VehicleClass>,
    pub thetas: Vec<EabParams>,
    /// Leader first.
    pub trajectories: Vec<Trajectory>,
    /// Initial speed minus minimum speed per vehicle, leader first (m/s).
    pub amplitudes: Vec<f64>,
}

fn amplitude(traj: &Trajectory) -> f64 {
    let v = traj.speeds();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    v[0] - min
}

/// Simulates one platoon run. Follower `j` reacts to vehicle `j - 1`; its θ
/// is shifted by the summed equilibrium delays of the vehicles ahead so the
/// deviation lines up with the disturbance reaching it.
pub fn simulate_platoon(spec: &PlatoonSpec, run: usize) -> Result<PlatoonRun> {
    spec.validate()?;
    let types = types_for_run(spec.n_vehicles, spec.penetration, spec.seed, run)?;
    let mut trajectories = vec![spec.leader.clone()];
    let mut thetas = Vec::with_capacity(types.len());
    let mut delay = 0.0;
    for (j, &class) in types.iter().enumerate() {
        let (pop, p) = spec.population(class);
        let weights: Vec<f64> = pop.particles.iter().map(|q| q.weight).collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = substream(spec.seed, domain::PLATOON_THETA, run as u64, j as u64);
        let ahead = trajectories.last().unwrap();
        let mut last_err = None;
        let mut done = None;
        for _ in 0..MAX_THETA_DRAWS {
            let theta = pop.particles[dist.sample(&mut rng)].theta;
            match simulate_follower(ahead, p, &theta.delayed(delay)) {
                Ok(traj) => {
                    done = Some((theta, traj));
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        let Some((theta, traj)) = done else {
            return Err(Error::invalid(format!(
                "run {run}, vehicle {}: no usable θ in {MAX_THETA_DRAWS} draws ({})",
                j + 1,
                last_err.map(|e| e.to_string()).unwrap_or_default()
            )));
        };
        for (a, b) in ahead.points().iter().zip(traj.points()) {
            let spacing = a.x - b.x;
            if spacing < MIN_SPACING {
                return Err(Error::SpacingCollapse { t: a.t, spacing });
            }
        }
        delay += theta.eta0 * p.tau;
        thetas.push(theta);
        trajectories.push(traj.with_id(format!("veh-{:02}", j + 1)));
    }
    let amplitudes = trajectories.iter().map(amplitude).collect();
    Ok(PlatoonRun {
        run,
        types,
        thetas,
        trajectories,
        amplitudes,
    })
}

#[derive(Clone, Debug)]
pub struct PlatoonResult {
    pub runs: Vec<(PlatoonRun, HysteresisLoop)>,
    /// `(run, reason)` for every run that was aborted.
    pub failed: Vec<(usize, String)>,
    pub mean_center: (f64, f64),
    pub mean_sd: (f64, f64),
    /// Mean largest cross-product magnitude, (veh/km)·(veh/h).
    pub mean_magnitude: f64,
    /// Standard error of `mean_magnitude`.
    pub magnitude_se: f64,
}

/// Runs `spec.runs` platoons in parallel and averages their loops.
pub fn run_platoon(spec: &PlatoonSpec) -> Result<PlatoonResult> {
    spec.validate()?;
    let w = spec.wave_speed();
    let outcomes: Vec<Result<(PlatoonRun, HysteresisLoop)>> = (0..spec.runs)
        .into_par_iter()
        .map(|r| {
            let run = simulate_platoon(spec, r)?;
            let lp = HysteresisLoop::from_trajectories(&run.trajectories, w, spec.zone_dt)?;
            Ok((run, lp))
        })
        .collect();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(x) => runs.push(x),
            Err(e) => {
                log::warn!("platoon run {r} failed: {e}");
                failed.push((r, e.to_string()));
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::invalid(format!(
            "all {} platoon runs failed; first: {}",
            spec.runs,
            failed.first().map(|f| f.1.as_str()).unwrap_or("")
        )));
    }
    let col = |f: &dyn Fn(&HysteresisLoop) -> f64| -> Vec<f64> { runs.iter().map(|(_, l)| f(l)).collect() };
    let mags = col(&|l| l.max_magnitude());
    Ok(PlatoonResult {
        mean_center: (mean(&col(&|l| l.center.0)), mean(&col(&|l| l.center.1))),
        mean_sd: (mean(&col(&|l| l.sd.0)), mean(&col(&|l| l.sd.1))),
        mean_magnitude: mean(&mags),
        magnitude_se: std_dev(&mags) / (mags.len() as f64).sqrt(),
        runs,
        failed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub penetration: f64,
    pub completed: usize,
    pub failed: usize,
    pub center_k: f64,
    pub center_q: f64,
    pub sd_k: f64,
    pub sd_q: f64,
    pub magnitude: f64,
    pub magnitude_se: f64,
}

/// Expectation curves over penetration rates.
pub fn sweep_penetration(template: &PlatoonSpec, penetrations: &[f64], runs: usize) -> Result<Vec<SweepPoint>> {
    if penetrations.is_empty() {
        return Err(Error::Empty("penetration list"));
    }
    penetrations
        .iter()
        .map(|&pen| {
            let spec = PlatoonSpec {
                penetration: pen,
                runs,
                ..template.clone()
            };
            let res = run_platoon(&spec)?;
            Ok(SweepPoint {
                penetration: pen,
                completed: res.runs.len(),
                failed: res.failed.len(),
                center_k: res.mean_center.0,
                center_q: res.mean_center.1,
                sd_k: res.mean_sd.0,
                sd_q: res.mean_sd.1,
                magnitude: res.mean_magnitude,
                magnitude_se: res.magnitude_se,
            })
        })
        .collect()
}

/// Writes the expectation curves as CSV.
pub fn write_sweep(path: &std::path::Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn default_spec(
    leader: Trajectory,
    hdv: ParticlePopulation,
    acc: ParticlePopulation,
    hdv_params: NewellParams,
    acc_params: NewellParams,
) -> PlatoonSpec {
    PlatoonSpec {
        n_vehicles: DEFAULT_N_VEHICLES,
        penetration: 0.0,
        leader,
        hdv_posterior: hdv,
        acc_posterior: acc,
        hdv_params,
        acc_params,
        runs: DEFAULT_RUNS,
        seed: 0,
        zone_dt: DEFAULT_ZONE_DT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{trapezoid_leader, LeaderProfile};

    fn single(theta: EabParams) -> ParticlePopulation {
        ParticlePopulation::from_particles(vec![(theta, 0.0); 10], 0).unwrap()
    }

    fn spec(hdv: EabParams, acc: EabParams, n: usize) -> PlatoonSpec {
        let prof = LeaderProfile {
            t_tail: 60.0,
            ..LeaderProfile::default()
        };
        let leader = trapezoid_leader("lead", &prof).unwrap();
        let p = NewellParams::new(1.2, 8.0).unwrap();
        PlatoonSpec {
            n_vehicles: n,
            runs: 2,
            ..default_spec(leader, single(hdv), single(acc), p, p)
        }
    }

    #[test]
    fn type_counts_follow_rounding() {
        assert!(assign_types(20, 0.0, 1)
            .unwrap()
            .iter()
            .all(|c| *c == VehicleClass::Hdv));
        assert!(assign_types(20, 1.0, 1)
            .unwrap()
            .iter()
            .all(|c| *c == VehicleClass::Acc));
        for seed in 0..100 {
            let t = assign_types(20, 0.5, seed).unwrap();
            assert_eq!(t.len(), 19);
            let acc = t.iter().filter(|c| **c == VehicleClass::Acc).count();
            assert!(acc == 9 || acc == 10);
            assert_eq!(t, assign_types(20, 0.5, seed).unwrap());
        }
        assert!(assign_types(20, 1.5, 0).is_err());
    }

    #[test]
    fn newell_chain_keeps_amplitude() {
        let s = spec(EabParams::constant(1.0), EabParams::constant(1.0), 6);
        let run = simulate_platoon(&s, 0).unwrap();
        let a0 = run.amplitudes[0];
        for a in &run.amplitudes {
            assert!((a - a0).abs() < 1e-6, "{a} vs {a0}");
        }
    }

    #[test]
    fn concave_followers_amplify() {
        let concave = EabParams {
            eta0: 1.0,
            eta1: 1.3,
            eta2: 1.0,
            eta3: 1.0,
            eps0: 0.12,
            eps1: -0.07,
            eps2: 0.0,
            t1: 15.2,
        };
        let run = simulate_platoon(&spec(concave, concave, 20), 0).unwrap();
        assert!(run.amplitudes[19] > run.amplitudes[2] + 1.0, "{:?}", run.amplitudes);
    }

    #[test]
    fn convex_followers_damp_the_first_vehicles() {
        // the recovery starts once the leader is accelerating again
        let convex = EabParams {
            eta0: 1.0,
            eta1: 0.8,
            eta2: 0.7,
            eta3: 1.0,
            eps0: -0.05,
            eps1: -0.1 / 9.0,
            eps2: 0.03,
            t1: 15.0,
        };
        let run = simulate_platoon(&spec(convex, convex, 6), 0).unwrap();
        for j in 2..6 {
            assert!(run.amplitudes[j] < run.amplitudes[j - 1], "{:?}", run.amplitudes);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = spec(EabParams::constant(1.0), EabParams::constant(1.1), 5);
        let a = simulate_platoon(
            &PlatoonSpec {
                penetration: 0.5,
                ..s.clone()
            },
            3,
        )
        .unwrap();
        let b = simulate_platoon(&PlatoonSpec { penetration: 0.5, ..s }, 3).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.types, b.types);
    }
}
