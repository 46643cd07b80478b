//! Delimiter-separated trajectory files and pair manifests.
//!
//! Trajectory files carry a header row with (at least) vehicle id, time,
//! position and optionally speed columns; rows of one vehicle appear in time
//! order. The manifest lists `(leader_id, follower_id, label)` triples.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{central_difference, CfPair, PairLabel, SpeedRegime, Trajectory, TrajectoryPoint, VehicleClass};
use crate::{Error, Result};

/// Column names of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub vehicle_id: String,
    pub t: String,
    pub x: String,
    /// When absent (or missing from the file) speeds are reconstructed by
    /// central difference.
    pub v: Option<String>,
    pub delimiter: char,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            vehicle_id: "vehicle_id".into(),
            t: "t".into(),
            x: "x".into(),
            v: Some("v".into()),
            delimiter: ',',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub leader_id: String,
    pub follower_id: String,
    pub vehicle_class: VehicleClass,
    pub car_model: String,
    pub engine_mode: String,
    pub speed_regime: SpeedRegime,
}

impl ManifestEntry {
    pub fn label(&self) -> PairLabel {
        PairLabel {
            vehicle_class: self.vehicle_class,
            car_model: self.car_model.clone(),
            engine_mode: self.engine_mode.clone(),
            speed_regime: self.speed_regime,
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("line {line}: cannot parse {what} '{field}'")))
}

struct RawVehicle {
    id: String,
    t: Vec<f64>,
    x: Vec<f64>,
    v: Option<Vec<f64>>,
}

/// Reads every vehicle in a trajectory file, in order of first appearance.
///
/// Vehicles whose sampling has a gap larger than two sampling intervals are
/// returned as `None` next to their id so callers can reject the pairs that
/// use them.
fn read_raw(path: &Path, schema: &ColumnMap) -> Result<Vec<RawVehicle>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let id_col = column(&headers, &schema.vehicle_id)
        .ok_or_else(|| Error::Schema(format!("missing column '{}'", schema.vehicle_id)))?;
    let t_col = column(&headers, &schema.t).ok_or_else(|| Error::Schema(format!("missing column '{}'", schema.t)))?;
    let x_col = column(&headers, &schema.x).ok_or_else(|| Error::Schema(format!("missing column '{}'", schema.x)))?;
    let v_col = schema.v.as_deref().and_then(|name| column(&headers, name));

    let mut order: Vec<RawVehicle> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |c: usize| {
            record
                .get(c)
                .ok_or_else(|| Error::Schema(format!("line {line}: missing field {c}")))
        };
        let id = get(id_col)?.to_string();
        let t = parse_f64(get(t_col)?, "t", line)?;
        let x = parse_f64(get(x_col)?, "x", line)?;
        let v = match v_col {
            Some(c) => Some(parse_f64(get(c)?, "v", line)?),
            None => None,
        };
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(RawVehicle {
                id: id.clone(),
                t: Vec::new(),
                x: Vec::new(),
                v: v_col.map(|_| Vec::new()),
            });
            order.len() - 1
        });
        let veh = &mut order[slot];
        if let Some(&last) = veh.t.last() {
            if !(t > last) {
                return Err(Error::NonMonotoneTime { vehicle: id, t });
            }
        }
        veh.t.push(t);
        veh.x.push(x);
        if let (Some(vs), Some(v)) = (veh.v.as_mut(), v) {
            vs.push(v);
        }
    }
    Ok(order)
}

/// Converts raw samples to a uniform trajectory. Returns `Ok(None)` when a
/// gap exceeds twice the nominal interval; smaller irregularities are
/// interpolated onto the uniform grid.
fn regularize(raw: RawVehicle) -> Result<Option<Trajectory>> {
    let n = raw.t.len();
    if n < 2 {
        return Err(Error::invalid(format!("vehicle {} has fewer than 2 rows", raw.id)));
    }
    let mut diffs: Vec<f64> = raw.t.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(f64::total_cmp);
    let dt = diffs[diffs.len() / 2];
    if diffs[diffs.len() - 1] > 2.0 * dt * (1.0 + 1e-6) {
        return Ok(None);
    }
    let uniform = diffs[diffs.len() - 1] - diffs[0] <= 1e-3 * dt;
    if uniform {
        let vs = match raw.v {
            Some(v) => v,
            None => central_difference(&raw.x, dt),
        };
        let points = (0..n)
            .map(|k| TrajectoryPoint {
                t: raw.t[k],
                x: raw.x[k],
                v: vs[k],
            })
            .collect();
        return Trajectory::new(raw.id, points).map(Some);
    }
    let t0 = raw.t[0];
    let m = ((raw.t[n - 1] - t0) / dt + 1e-9).floor() as usize + 1;
    let mut xs = Vec::with_capacity(m);
    let mut j = 0;
    for k in 0..m {
        let t = t0 + k as f64 * dt;
        while j + 2 < n && raw.t[j + 1] < t {
            j += 1;
        }
        let f = ((t - raw.t[j]) / (raw.t[j + 1] - raw.t[j])).clamp(0.0, 1.0);
        xs.push(raw.x[j] + f * (raw.x[j + 1] - raw.x[j]));
    }
    Trajectory::from_positions(raw.id, t0, dt, &xs).map(Some)
}

/// Reads all vehicles of a trajectory file. Vehicles with sampling gaps
/// larger than two intervals are dropped with a warning.
pub fn read_trajectory_file(path: &Path, schema: &ColumnMap) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for raw in read_raw(path, schema)? {
        let id = raw.id.clone();
        match regularize(raw)? {
            Some(traj) => out.push(traj),
            None => log::warn!("vehicle {id}: gap larger than 2*dt, dropped"),
        }
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema(format!("{}: {other:?}", path.display())),
        })?;
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let entry: ManifestEntry = row.map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{other:?}")),
    })?;
    for e in entries {
        writer.serialize(e)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads the pairs declared in `manifest` from the trajectory file `data`.
///
/// Pairs referencing a vehicle that was dropped for sampling gaps are
/// skipped with a warning; unknown vehicle ids and overtakes are errors.
pub fn load_trajectories(data: &Path, manifest: &Path, schema: &ColumnMap) -> Result<Vec<CfPair>> {
    let entries = read_manifest(manifest)?;
    let mut raws = read_raw(data, schema)?;
    let known: Vec<String> = raws.iter().map(|r| r.id.clone()).collect();
    let mut trajs: HashMap<String, Option<Trajectory>> = HashMap::new();
    for raw in raws.drain(..) {
        let id = raw.id.clone();
        let traj = regularize(raw)?;
        if let Some(t) = &traj {
            t.validate_observed()?;
        }
        trajs.insert(id, traj);
    }
    let mut pairs = Vec::with_capacity(entries.len());
    for entry in entries {
        let lookup = |id: &str| -> Result<&Option<Trajectory>> {
            trajs.get(id).ok_or_else(|| {
                Error::Schema(format!(
                    "manifest references unknown vehicle '{id}' (file has {})",
                    known.len()
                ))
            })
        };
        match (lookup(&entry.leader_id)?, lookup(&entry.follower_id)?) {
            (Some(leader), Some(follower)) => {
                pairs.push(CfPair::new(leader.clone(), follower.clone(), entry.label())?);
            }
            _ => log::warn!(
                "pair {}->{} rejected: sampling gap larger than 2*dt",
                entry.leader_id,
                entry.follower_id
            ),
        }
    }
    Ok(pairs)
}

/// Writes trajectories in the canonical schema (`vehicle_id,t,x,v`) with
/// 3 decimals for time and 4 for position and speed.
pub fn write_trajectories<'a>(path: &Path, trajs: impl IntoIterator<Item = &'a Trajectory>) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "vehicle_id,t,x,v").map_err(io)?;
    for traj in trajs {
        for p in traj.points() {
            writeln!(w, "{},{:.3},{:.4},{:.4}", traj.vehicle_id(), p.t, p.x, p.v).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}
