use super::{EabParams, EtaProfile};
use crate::newell::NewellParams;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Largest fraction of non-monotone mapping samples that is repaired by
/// re-sorting instead of being reported as an error.
pub const MONOTONE_REPAIR_FRACTION: f64 = 0.01;

/// Simulates an EAB follower behind `leader`.
///
/// For every leader sample `t` the follower passes `x_l(t) - eta(t) delta` at
/// time `t + eta(t) tau`; those points are interpolated back onto the
/// leader's grid. Before the deviation onset the follower sits on its
/// `eta0` equilibrium, extended backwards at the leader's initial speed.
pub fn simulate_follower(leader: &Trajectory, p: &NewellParams, theta: &EabParams) -> Result<Trajectory> {
    let profile = theta.profile()?;
    simulate_with_profile(leader, p, &profile)
}

/// [`simulate_follower`] for an arbitrary piecewise-linear `eta` curve whose
/// times are relative to `leader.t0()`.
pub fn simulate_with_profile(leader: &Trajectory, p: &NewellParams, profile: &EtaProfile) -> Result<Trajectory> {
    p.validate()?;
    let dt = leader.dt();
    let t0 = leader.t0();
    let n = leader.len();
    let pre = (profile.max_level() * p.tau / dt).ceil() as usize + 2;
    let total = pre + n;

    let mut s = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    let mut v = Vec::with_capacity(total);
    let mut lt = Vec::with_capacity(total);
    for k in 0..total {
        let t = if k < pre {
            t0 - (pre - k) as f64 * dt
        } else {
            leader.points()[k - pre].t
        };
        let rel = t - t0;
        let eta = profile.eval(rel);
        let slope = profile.slope(rel);
        lt.push(t);
        s.push(t + eta * p.tau);
        y.push(leader.position_at(t) - eta * p.delta);
        v.push((leader.speed_at(t) - slope * p.delta) / (1.0 + slope * p.tau));
    }

    let bad: Vec<usize> = (1..total).filter(|&k| s[k] <= s[k - 1]).collect();
    if !bad.is_empty() {
        if (bad.len() as f64) >= MONOTONE_REPAIR_FRACTION * total as f64 {
            return Err(Error::NonMonotoneMapping {
                t_start: lt[bad[0] - 1],
                t_end: lt[bad[bad.len() - 1]],
                count: bad.len(),
            });
        }
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
        let mut s2 = Vec::with_capacity(total);
        let mut y2 = Vec::with_capacity(total);
        let mut v2 = Vec::with_capacity(total);
        for k in order {
            if s2.last().is_some_and(|&last: &f64| s[k] <= last) {
                continue;
            }
            s2.push(s[k]);
            y2.push(y[k]);
            v2.push(v[k]);
        }
        s = s2;
        y = y2;
        v = v2;
    }

    let mut xs = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let mut j = 0;
    for point in leader.points() {
        let t = point.t;
        while j + 2 < s.len() && s[j + 1] < t {
            j += 1;
        }
        let f = (t - s[j]) / (s[j + 1] - s[j]);
        xs.push(y[j] + f * (y[j + 1] - y[j]));
        vs.push(v[j] + f * (v[j + 1] - v[j]));
    }
    for (point, &x) in leader.points().iter().zip(&xs) {
        let spacing = point.x - x;
        if spacing <= 0.0 {
            return Err(Error::SpacingCollapse { t: point.t, spacing });
        }
    }
    leader.on_same_grid(format!("{}-eab", leader.vehicle_id()), &xs, &vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::newell_shift;

    fn constant_leader(v: f64, secs: f64) -> Trajectory {
        let n = (secs / 0.1) as usize + 1;
        let xs: Vec<f64> = (0..n).map(|k| 500.0 + v * k as f64 * 0.1).collect();
        Trajectory::from_samples("lead", 0.0, 0.1, &xs, &vec![v; n]).unwrap()
    }

    #[test]
    fn unit_eta_reduces_to_newell() {
        let leader = constant_leader(17.0, 40.0);
        let p = NewellParams::new(1.3, 7.0).unwrap();
        let eab = simulate_follower(&leader, &p, &EabParams::constant(1.0)).unwrap();
        let newell = newell_shift(&leader, &p).unwrap();
        for (a, b) in eab.points().iter().zip(newell.points()) {
            assert!((a.x - b.x).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_eta_scales_equilibrium_spacing() {
        let (v, c) = (12.0, 1.25);
        let leader = constant_leader(v, 40.0);
        let p = NewellParams::new(1.1, 8.0).unwrap();
        let f = simulate_follower(&leader, &p, &EabParams::constant(c)).unwrap();
        for (l, fp) in leader.points().iter().zip(f.points()) {
            assert!((l.x - fp.x - c * (p.delta + v * p.tau)).abs() < 1e-9);
            assert!((fp.v - v).abs() < 1e-9);
        }
    }

    #[test]
    fn shrinking_eta_keeps_spacing_positive() {
        // stopped leader, eta shrinking toward zero pulls the follower almost into it
        let leader = Trajectory::from_samples("l", 0.0, 0.1, &[100.0; 300], &[0.0; 300]).unwrap();
        let p = NewellParams::new(1.0, 5.0).unwrap();
        let profile = EtaProfile::from_knots(vec![(0.0, 1.0), (10.0, 1e-3)]).unwrap();
        let f = simulate_with_profile(&leader, &p, &profile).unwrap();
        let last = f.points().last().unwrap().x;
        assert!((100.0 - last - 5e-3).abs() < 1e-9);
    }

    #[test]
    fn wholesale_non_monotone_mapping_is_an_error() {
        let leader = constant_leader(10.0, 40.0);
        let p = NewellParams::new(2.0, 5.0).unwrap();
        // slope -1 per second makes t + eta*tau decrease
        let profile = EtaProfile::from_knots(vec![(5.0, 2.5), (7.0, 0.5)]).unwrap();
        assert!(matches!(
            simulate_with_profile(&leader, &p, &profile),
            Err(Error::NonMonotoneMapping { .. })
        ));
    }

    #[test]
    fn simulation_is_bit_deterministic() {
        let leader = constant_leader(20.0, 30.0);
        let p = NewellParams::new(1.0, 6.0).unwrap();
        let theta = EabParams {
            eta0: 1.0,
            eta1: 1.3,
            eta2: 0.9,
            eta3: 1.0,
            eps0: 0.1,
            eps1: -0.08,
            eps2: 0.05,
            t1: 4.0,
        };
        let a = simulate_follower(&leader, &p, &theta).unwrap();
        let b = simulate_follower(&leader, &p, &theta).unwrap();
        assert_eq!(a, b);
    }
}
