//! Extended asymmetric-behavior (EAB) car-following model.
//!
//! A follower tracks its leader with a time-varying multiplier `eta(t)` on the
//! Newell shift: `x_f(t + eta(t) tau) = x_l(t) - eta(t) delta`. The multiplier
//! is a continuous piecewise-linear curve with up to three sloped segments.

mod measure;
mod params;
mod pattern;
mod simulate;

pub(crate) use measure::window_samples;
pub use measure::{measure_eta, EtaSeries, MeasureOptions, DEFAULT_SMOOTH_WINDOW};
pub use params::{eta_eval, EabParams, EtaProfile, PARAM_NAMES};
pub use pattern::{
    classify_pattern, iqr_threshold, PatternCategory, PatternInput, ReactionPattern, Response, ACC_DELTA_ETA_T,
    HDV_DELTA_ETA_T,
};
pub use simulate::{simulate_follower, simulate_with_profile, MONOTONE_REPAIR_FRACTION};
