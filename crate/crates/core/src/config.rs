//! Run configuration, read from and written to TOML.
//!
//! Every section is optional; missing keys take the documented defaults.
//! [`RunConfig::validate`] checks all values against the preconditions of the
//! modules they feed, so a bad config fails before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abc::{AsmcSettings, GofWeights, PriorSpec};
use crate::eab::{MeasureOptions, ACC_DELTA_ETA_T, HDV_DELTA_ETA_T};
use crate::hysteresis::{HysteresisThresholds, DEFAULT_ZONE_DT};
use crate::newell::{default_delta_grid, default_tau_grid};
use crate::platoon::{DEFAULT_N_VEHICLES, DEFAULT_RUNS};
use crate::synthetic::LeaderProfile;
use crate::trajectory::{ColumnMap, SpeedRegime, VehicleClass, DEFAULT_V_DROP_FRAC};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub trajectories: PathBuf,
    pub manifest: PathBuf,
    /// Restrict the run to one calibration group (e.g. `ACC/X/normal/median_high`).
    pub group: Option<String>,
    /// Resample every trajectory to this interval (s) before use.
    pub dt: Option<f64>,
    pub columns: ColumnMap,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            trajectories: PathBuf::from("data/trajectories.csv"),
            manifest: PathBuf::from("data/manifest.csv"),
            group: None,
            dt: None,
            columns: ColumnMap::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub tau_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// Share of each group's pairs used for calibration.
    pub train_fraction: f64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            tau_grid: default_tau_grid(),
            delta_grid: default_delta_grid(),
            train_fraction: 0.75,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub acc: PriorSpec,
    pub hdv: PriorSpec,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            acc: PriorSpec::acc(),
            hdv: PriorSpec::hdv(),
        }
    }
}

impl PriorConfig {
    pub fn for_class(&self, class: VehicleClass) -> PriorSpec {
        match class {
            VehicleClass::Acc => self.acc,
            VehicleClass::Hdv => self.hdv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    pub delta_eta_t_acc: f64,
    pub delta_eta_t_hdv: f64,
    pub v_drop_frac: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            delta_eta_t_acc: ACC_DELTA_ETA_T,
            delta_eta_t_hdv: HDV_DELTA_ETA_T,
            v_drop_frac: DEFAULT_V_DROP_FRAC,
        }
    }
}

impl PatternConfig {
    pub fn threshold(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Acc => self.delta_eta_t_acc,
            VehicleClass::Hdv => self.delta_eta_t_hdv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisConfig {
    pub zone_dt: f64,
    pub median_high: HysteresisThresholds,
    pub low: HysteresisThresholds,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        HysteresisConfig {
            zone_dt: DEFAULT_ZONE_DT,
            median_high: HysteresisThresholds::median_high(),
            low: HysteresisThresholds::low(),
        }
    }
}

impl HysteresisConfig {
    pub fn thresholds(&self, regime: SpeedRegime) -> HysteresisThresholds {
        match regime {
            SpeedRegime::MedianHigh => self.median_high,
            SpeedRegime::Low => self.low,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonConfig {
    pub enabled: bool,
    pub n_vehicles: usize,
    pub runs: usize,
    pub penetrations: Vec<f64>,
    /// Groups whose posteriors drive the two vehicle classes. When absent the
    /// first group of each class is used.
    pub hdv_group: Option<String>,
    pub acc_group: Option<String>,
    pub leader: LeaderProfile,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        PlatoonConfig {
            enabled: true,
            n_vehicles: DEFAULT_N_VEHICLES,
            runs: DEFAULT_RUNS,
            penetrations: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            hdv_group: None,
            acc_group: None,
            leader: LeaderProfile {
                t_tail: 60.0,
                ..LeaderProfile::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub stage1: Stage1Config,
    pub measure: MeasureOptions,
    pub prior: PriorConfig,
    pub asmc: AsmcSettings,
    pub gof: GofWeights,
    pub pattern: PatternConfig,
    pub hysteresis: HysteresisConfig,
    pub platoon: PlatoonConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            stage1: Stage1Config::default(),
            measure: MeasureOptions::default(),
            prior: PriorConfig::default(),
            asmc: AsmcSettings::default(),
            gof: GofWeights::default(),
            pattern: PatternConfig::default(),
            hysteresis: HysteresisConfig::default(),
            platoon: PlatoonConfig::default(),
        }
    }
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg(format!("{name} must be positive, got {v}")))
    }
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(cfg(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| cfg(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.data.dt {
            positive("data.dt", dt)?;
        }
        let s1 = &self.stage1;
        if s1.tau_grid.is_empty() || s1.delta_grid.is_empty() {
            return Err(cfg("stage-1 grids must not be empty"));
        }
        for &t in &s1.tau_grid {
            positive("stage1.tau_grid entry", t)?;
        }
        for &d in &s1.delta_grid {
            positive("stage1.delta_grid entry", d)?;
        }
        if !(s1.train_fraction > 0.0 && s1.train_fraction <= 1.0) {
            return Err(cfg(format!(
                "stage1.train_fraction must lie in (0, 1], got {}",
                s1.train_fraction
            )));
        }
        let m = &self.measure;
        positive("measure.eta_min", m.eta_min)?;
        if !(m.eta_max > m.eta_min && m.eta_max.is_finite()) {
            return Err(cfg("measure.eta_max must exceed eta_min"));
        }
        if !(m.smooth_window >= 0.0 && m.smooth_window.is_finite()) {
            return Err(cfg("measure.smooth_window must be non-negative"));
        }
        self.prior.acc.validate()?;
        self.prior.hdv.validate()?;
        self.asmc.validate()?;
        if self.asmc.max_iter == 0 {
            return Err(cfg("asmc.max_iter must be at least 1"));
        }
        self.gof.validate()?;
        positive("pattern.delta_eta_t_acc", self.pattern.delta_eta_t_acc)?;
        positive("pattern.delta_eta_t_hdv", self.pattern.delta_eta_t_hdv)?;
        if !(self.pattern.v_drop_frac > 0.0 && self.pattern.v_drop_frac < 1.0) {
            return Err(cfg("pattern.v_drop_frac must lie in (0, 1)"));
        }
        positive("hysteresis.zone_dt", self.hysteresis.zone_dt)?;
        self.hysteresis.median_high.validate().map_err(|e| cfg(e.to_string()))?;
        self.hysteresis.low.validate().map_err(|e| cfg(e.to_string()))?;
        let p = &self.platoon;
        if p.n_vehicles < 2 {
            return Err(cfg("platoon.n_vehicles must be at least 2"));
        }
        if p.runs == 0 {
            return Err(cfg("platoon.runs must be at least 1"));
        }
        if p.enabled && p.penetrations.is_empty() {
            return Err(cfg("platoon.penetrations must not be empty"));
        }
        for &x in &p.penetrations {
            fraction("platoon.penetrations entry", x)?;
        }
        p.leader.validate().map_err(|e| cfg(format!("platoon.leader: {e}")))?;
        Ok(())
    }
}

/// Parses a comma-separated list of numbers such as `"0,0.2,0.5"`.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| cfg(format!("bad number '{}': {e}", p.trim())))
        })
        .collect()
}
