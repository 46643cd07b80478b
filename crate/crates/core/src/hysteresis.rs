//! Flow-density hysteresis through a disturbance.
//!
//! Zones are bounded left and right by characteristic lines of slope `w`
//! anchored on the leader every `zone_dt` seconds, above by the first
//! trajectory and below by the last. Each zone gives one (k, q) point via
//! Edie's generalised definitions; the smoothed sequence of points forms a
//! loop whose orientation and level shift are read from 2-D cross products.
//!
//! All quantities are SI (veh/m, veh/s). Classification thresholds are given
//! in (veh/km)·(veh/h) and converted with [`CROSS_UNIT_SCALE`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::stats::{centered_moving_average, mean, std_dev};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

pub const DEFAULT_ZONE_DT: f64 = 3.0;
pub const SMOOTH_WINDOW: usize = 3;
/// SI cross products times this value are in (veh/km)·(veh/h).
pub const CROSS_UNIT_SCALE: f64 = 1000.0 * 3600.0;
/// Fewest zones that form a loop.
pub const MIN_LOOP_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdieZone {
    pub index: usize,
    /// Position of the zone's left line on the leader's `zone_dt` grid,
    /// before end zones are dropped.
    pub anchor: usize,
    /// Corners in (t, x): leader at the left line, leader at the right line,
    /// last vehicle at the right line, last vehicle at the left line.
    pub vertices: [(f64, f64); 4],
    pub dt: Vec<f64>,
    pub dx: Vec<f64>,
    pub raw_area: f64,
    pub area: f64,
    pub k: f64,
    pub q: f64,
}

/// First time at which `traj` crosses the line `x = x_a + w (t - t_a)`.
fn crossing(traj: &Trajectory, w: f64, (t_a, x_a): (f64, f64)) -> Option<f64> {
    let f = |t: f64, x: f64| x - x_a - w * (t - t_a);
    let pts = traj.points();
    let first = pts[0];
    let mut prev = f(first.t, first.x);
    if prev == 0.0 {
        return Some(first.t);
    }
    if prev > 0.0 {
        return None;
    }
    for pair in pts.windows(2) {
        let cur = f(pair[1].t, pair[1].x);
        if cur >= 0.0 {
            let frac = -prev / (cur - prev);
            return Some(pair[0].t + frac * (pair[1].t - pair[0].t));
        }
        prev = cur;
    }
    None
}

fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    0.5 * twice.abs()
}

/// Polyline of `traj` between times `from` and `to`, endpoints interpolated.
fn polyline(traj: &Trajectory, from: f64, to: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(from, traj.position_at(from))];
    out.extend(
        traj.points()
            .iter()
            .filter(|p| p.t > from && p.t < to)
            .map(|p| (p.t, p.x)),
    );
    out.push((to, traj.position_at(to)));
    out
}

fn zone(trajs: &[Trajectory], w: f64, index: usize, t_left: f64, t_right: f64) -> Option<EdieZone> {
    let leader = &trajs[0];
    let last = &trajs[trajs.len() - 1];
    let left = (t_left, leader.position_at(t_left));
    let right = (t_right, leader.position_at(t_right));
    let mut dt = Vec::with_capacity(trajs.len());
    let mut dx = Vec::with_capacity(trajs.len());
    let mut last_span = (0.0, 0.0);
    for traj in trajs {
        let a = crossing(traj, w, left)?;
        let b = crossing(traj, w, right)?;
        if b <= a {
            return None;
        }
        dt.push(b - a);
        dx.push(traj.position_at(b) - traj.position_at(a));
        last_span = (a, b);
    }
    let (d_t, c_t) = last_span;
    let mut poly = polyline(leader, t_left, t_right);
    let mut bottom = polyline(last, d_t, c_t);
    bottom.reverse();
    poly.extend(bottom);
    let raw_area = shoelace(&poly);
    if !(raw_area > 0.0) {
        return None;
    }
    let i = trajs.len() as f64;
    let area = raw_area * i / (i - 1.0);
    let mut z = EdieZone {
        index,
        anchor: index,
        vertices: [left, right, (c_t, last.position_at(c_t)), (d_t, last.position_at(d_t))],
        dt,
        dx,
        raw_area,
        area,
        k: 0.0,
        q: 0.0,
    };
    let (k, q) = edie_measure(&z).ok()?;
    z.k = k;
    z.q = q;
    Some(z)
}

/// Partitions the region between the first and last trajectory into
/// wave-parallel zones. Zones at either end that are not crossed by every
/// trajectory are dropped.
pub fn build_zones(trajs: &[Trajectory], w: f64, zone_dt: f64) -> Result<Vec<EdieZone>> {
    if trajs.len() < 2 {
        return Err(Error::invalid("zones need at least two trajectories"));
    }
    if !(w < 0.0 && w.is_finite()) {
        return Err(Error::invalid(format!("wave speed must be negative, got {w}")));
    }
    if !(zone_dt > 0.0 && zone_dt.is_finite()) {
        return Err(Error::invalid(format!("zone_dt must be positive, got {zone_dt}")));
    }
    let leader = &trajs[0];
    let start = trajs.iter().map(|t| t.t0()).fold(f64::NEG_INFINITY, f64::max);
    let end = trajs.iter().map(|t| t.t_end()).fold(f64::INFINITY, f64::min);
    if start >= end {
        return Err(Error::invalid("trajectories do not overlap in time"));
    }
    let t0 = leader.t0();
    let count = ((leader.t_end() - t0) / zone_dt + 1e-9).floor() as usize;
    let zones: Vec<EdieZone> = (0..count)
        .filter_map(|g| {
            let a = t0 + g as f64 * zone_dt;
            zone(trajs, w, g, a, a + zone_dt)
        })
        .enumerate()
        .map(|(i, mut z)| {
            z.index = i;
            z
        })
        .collect();
    if zones.is_empty() {
        return Err(Error::DegenerateZone(
            "no characteristic pair intersects both boundary trajectories".into(),
        ));
    }
    Ok(zones)
}

/// Edie density and flow of a zone: total time spent and total distance
/// travelled over the adjusted area.
pub fn edie_measure(zone: &EdieZone) -> Result<(f64, f64)> {
    if !(zone.area > 0.0) {
        return Err(Error::DegenerateZone(format!("zone {} has zero area", zone.index)));
    }
    let k = zone.dt.iter().sum::<f64>() / zone.area;
    let q = zone.dx.iter().sum::<f64>() / zone.area;
    Ok((k, q))
}

/// Centered window-3 moving average applied to k and q separately.
pub fn smooth_loop(raw: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if raw.len() < SMOOTH_WINDOW {
        return Err(Error::invalid(format!(
            "smoothing needs at least {SMOOTH_WINDOW} points, got {}",
            raw.len()
        )));
    }
    let k: Vec<f64> = raw.iter().map(|p| p.0).collect();
    let q: Vec<f64> = raw.iter().map(|p| p.1).collect();
    let k = centered_moving_average(&k, SMOOTH_WINDOW);
    let q = centered_moving_average(&q, SMOOTH_WINDOW);
    Ok(k.into_iter().zip(q).collect())
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSeries {
    /// `H_g x H_{g+1}` about the center; one fewer entry than points.
    pub cross: Vec<f64>,
    /// Position of each point relative to the initial equilibrium line.
    pub eq_init: Vec<f64>,
    /// Position of each point relative to the new equilibrium line.
    pub eq_new: Vec<f64>,
}

/// Signed cross products of a loop. Positive means counter-clockwise, or
/// above the equilibrium line through the anchor point.
pub fn cross_products(points: &[(f64, f64)], w: f64) -> Result<CrossSeries> {
    if points.len() < 3 {
        return Err(Error::invalid("cross products need at least 3 points"));
    }
    if !(w < 0.0) {
        return Err(Error::invalid(format!("wave speed must be negative, got {w}")));
    }
    let n = points.len() as f64;
    let center = (
        points.iter().map(|p| p.0).sum::<f64>() / n,
        points.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let cross_series = points
        .windows(2)
        .map(|p| cross(sub(p[0], center), sub(p[1], center)))
        .collect();
    let against = |anchor: (f64, f64)| -> Vec<f64> {
        let to_jam = (-anchor.1 / w, -anchor.1);
        points.iter().map(|&p| cross(to_jam, sub(p, anchor))).collect()
    };
    Ok(CrossSeries {
        cross: cross_series,
        eq_init: against(points[0]),
        eq_new: against(points[points.len() - 1]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HysteresisPattern {
    #[serde(rename = "NSL")]
    Nsl,
    #[serde(rename = "CW+")]
    CwPlus,
    #[serde(rename = "CW-")]
    CwMinus,
    #[serde(rename = "CW")]
    Cw,
    #[serde(rename = "CCW+")]
    CcwPlus,
    #[serde(rename = "CCW-")]
    CcwMinus,
    #[serde(rename = "CCW")]
    Ccw,
}

impl HysteresisPattern {
    pub const ALL: [HysteresisPattern; 7] = [
        HysteresisPattern::Nsl,
        HysteresisPattern::CwPlus,
        HysteresisPattern::CwMinus,
        HysteresisPattern::Cw,
        HysteresisPattern::CcwPlus,
        HysteresisPattern::CcwMinus,
        HysteresisPattern::Ccw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HysteresisPattern::Nsl => "NSL",
            HysteresisPattern::CwPlus => "CW+",
            HysteresisPattern::CwMinus => "CW-",
            HysteresisPattern::Cw => "CW",
            HysteresisPattern::CcwPlus => "CCW+",
            HysteresisPattern::CcwMinus => "CCW-",
            HysteresisPattern::Ccw => "CCW",
        }
    }

    pub fn is_clockwise(self) -> bool {
        matches!(
            self,
            HysteresisPattern::Cw | HysteresisPattern::CwPlus | HysteresisPattern::CwMinus
        )
    }
}

impl fmt::Display for HysteresisPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HysteresisPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown hysteresis pattern {s:?}")))
    }
}

/// Significance thresholds in (veh/km)·(veh/h).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HysteresisThresholds {
    pub h_t: f64,
    pub h_t0: f64,
    pub h_t1: f64,
}

impl HysteresisThresholds {
    pub fn median_high() -> Self {
        HysteresisThresholds {
            h_t: 15.0,
            h_t0: 4770.0,
            h_t1: 8460.0,
        }
    }

    pub fn low() -> Self {
        HysteresisThresholds {
            h_t: 400.0,
            h_t0: 21700.0,
            h_t1: 36700.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.h_t, self.h_t0, self.h_t1]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::invalid("hysteresis thresholds must be finite and non-negative"))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HysteresisThresholds {
            h_t: self.h_t * factor,
            h_t0: self.h_t0 * factor,
            h_t1: self.h_t1 * factor,
        }
    }
}

impl Default for HysteresisThresholds {
    fn default() -> Self {
        Self::median_high()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisLoop {
    /// Smoothed (k, q) points, one per zone.
    pub points: Vec<(f64, f64)>,
    pub center: (f64, f64),
    /// Sample standard deviations of k and q.
    pub sd: (f64, f64),
    pub cross: Vec<f64>,
    pub eq_init: Vec<f64>,
    pub eq_new: Vec<f64>,
    pub pattern: Option<HysteresisPattern>,
}

impl HysteresisLoop {
    /// Builds a loop from already smoothed points.
    pub fn from_points(points: Vec<(f64, f64)>, w: f64) -> Result<Self> {
        if points.len() < MIN_LOOP_POINTS {
            return Err(Error::invalid(format!(
                "a loop needs at least {MIN_LOOP_POINTS} points, got {}",
                points.len()
            )));
        }
        let k: Vec<f64> = points.iter().map(|p| p.0).collect();
        let q: Vec<f64> = points.iter().map(|p| p.1).collect();
        let series = cross_products(&points, w)?;
        Ok(HysteresisLoop {
            center: (mean(&k), mean(&q)),
            sd: (std_dev(&k), std_dev(&q)),
            points,
            cross: series.cross,
            eq_init: series.eq_init,
            eq_new: series.eq_new,
            pattern: None,
        })
    }

    /// Zones, Edie measurement and smoothing in one step.
    pub fn from_trajectories(trajs: &[Trajectory], w: f64, zone_dt: f64) -> Result<Self> {
        let raw: Vec<(f64, f64)> = build_zones(trajs, w, zone_dt)?.iter().map(|z| (z.k, z.q)).collect();
        Self::from_points(smooth_loop(&raw)?, w)
    }

    /// Signed cross product of largest magnitude (SI units).
    pub fn peak_cross(&self) -> f64 {
        signed_extreme(&self.cross)
    }

    /// Largest cross-product magnitude in (veh/km)·(veh/h).
    pub fn max_magnitude(&self) -> f64 {
        self.peak_cross().abs() * CROSS_UNIT_SCALE
    }

    pub fn classify(&mut self, th: &HysteresisThresholds) -> HysteresisPattern {
        let p = classify_hysteresis(self, th);
        self.pattern = Some(p);
        p
    }
}

fn signed_extreme(xs: &[f64]) -> f64 {
    xs.iter()
        .copied()
        .fold(0.0, |best, x| if x.abs() > best.abs() { x } else { best })
}

/// Index and value of the first element that is best under `better`.
fn extreme_at(xs: &[f64], better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if better(x, best.1) {
            best = (i, x);
        }
    }
    best
}

/// Seven-way classification of a loop.
///
/// The peak cross product decides significance and orientation. A point
/// dropping below the initial equilibrium by more than `h_t0` while another
/// rises above the new one by more than `h_t1` makes the plain composite
/// pattern, provided the dip comes first. Otherwise the largest excursion
/// from the initial equilibrium, if beyond `h_t0`, gives the `+`/`-` variant.
pub fn classify_hysteresis(lp: &HysteresisLoop, th: &HysteresisThresholds) -> HysteresisPattern {
    let s = CROSS_UNIT_SCALE;
    let peak = lp.peak_cross() * s;
    if peak.abs() <= th.h_t {
        return HysteresisPattern::Nsl;
    }
    let ccw = peak > 0.0;
    // the dip below the initial equilibrium has to come before the rise
    // above the new one
    let (i_min, min_init) = extreme_at(&lp.eq_init, |a, b| a < b);
    let (i_max, max_new) = extreme_at(&lp.eq_new, |a, b| a > b);
    let level = if min_init * s < -th.h_t0 && max_new * s > th.h_t1 && i_min < i_max {
        0
    } else {
        let ext = signed_extreme(&lp.eq_init) * s;
        if ext.abs() > th.h_t0 {
            if ext > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        }
    };
    match (ccw, level) {
        (true, 1) => HysteresisPattern::CcwPlus,
        (true, -1) => HysteresisPattern::CcwMinus,
        (true, _) => HysteresisPattern::Ccw,
        (false, 1) => HysteresisPattern::CwPlus,
        (false, -1) => HysteresisPattern::CwMinus,
        (false, _) => HysteresisPattern::Cw,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisComparison {
    /// Mean distance between loop centers.
    pub d_center: f64,
    /// Mean distance between (SD_k, SD_q) pairs.
    pub d_sd: f64,
    /// Mean NRMSE of the cross-product series.
    pub nrmse_cross: f64,
}

fn nrmse_or_zero(obs: &[f64], sim: &[f64]) -> Result<f64> {
    let num: f64 = obs.iter().zip(sim).map(|(o, s)| (o - s).powi(2)).sum();
    if num == 0.0 {
        return Ok(0.0);
    }
    crate::newell::nrmse(obs, sim)
}

/// Distances between observed and simulated loops, averaged over pairs.
pub fn compare_hysteresis(obs: &[HysteresisLoop], sim: &[HysteresisLoop]) -> Result<HysteresisComparison> {
    if obs.len() != sim.len() {
        return Err(Error::LengthMismatch {
            left: obs.len(),
            right: sim.len(),
        });
    }
    if obs.is_empty() {
        return Err(Error::Empty("loop list"));
    }
    let (mut dc, mut ds, mut dn) = (0.0, 0.0, 0.0);
    for (o, s) in obs.iter().zip(sim) {
        if o.points.len() != s.points.len() {
            return Err(Error::LengthMismatch {
                left: o.points.len(),
                right: s.points.len(),
            });
        }
        dc += (o.center.0 - s.center.0).hypot(o.center.1 - s.center.1);
        ds += (o.sd.0 - s.sd.0).hypot(o.sd.1 - s.sd.1);
        dn += nrmse_or_zero(&o.cross, &s.cross)?;
    }
    let n = obs.len() as f64;
    Ok(HysteresisComparison {
        d_center: dc / n,
        d_sd: ds / n,
        nrmse_cross: dn / n,
    })
}

/// Observed and simulated loops over the zones both platoons share, so the
/// two can go through [`compare_hysteresis`]. Both sets must have the same
/// leader.
pub fn paired_loops(
    obs: &[Trajectory],
    sim: &[Trajectory],
    w: f64,
    zone_dt: f64,
) -> Result<(HysteresisLoop, HysteresisLoop)> {
    let zo = build_zones(obs, w, zone_dt)?;
    let zs = build_zones(sim, w, zone_dt)?;
    let shared: Vec<usize> = zo
        .iter()
        .map(|z| z.anchor)
        .filter(|a| zs.iter().any(|z| z.anchor == *a))
        .collect();
    let pick = |zones: &[EdieZone]| -> Result<HysteresisLoop> {
        let raw: Vec<(f64, f64)> = zones
            .iter()
            .filter(|z| shared.contains(&z.anchor))
            .map(|z| (z.k, z.q))
            .collect();
        HysteresisLoop::from_points(smooth_loop(&raw)?, w)
    };
    Ok((pick(&zo)?, pick(&zs)?))
}

#[derive(Serialize, Deserialize)]
struct LoopRow {
    g: usize,
    k: f64,
    q: f64,
    cross: Option<f64>,
    eq_init: f64,
    eq_new: f64,
}

/// Writes a loop as rows `(g, k, q, cross, eq_init, eq_new)`; the last row
/// has no cross product.
pub fn write_loop(path: &Path, lp: &HysteresisLoop) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    for (g, &(k, q)) in lp.points.iter().enumerate() {
        w.serialize(LoopRow {
            g,
            k,
            q,
            cross: lp.cross.get(g).copied(),
            eq_init: lp.eq_init[g],
            eq_new: lp.eq_new[g],
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a loop file back; the center, spread and cross series are recomputed
/// from the points with wave speed `w`.
pub fn read_loop(path: &Path, w: f64) -> Result<HysteresisLoop> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for row in r.deserialize() {
        let row: LoopRow = row?;
        points.push((row.k, row.q));
    }
    HysteresisLoop::from_points(points, w)
}
