use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EabParams, EtaSeries};
use crate::stats;
use crate::trajectory::LeaderPhases;
use crate::Error;

/// Default significance threshold on level changes for ACC followers.
pub const ACC_DELTA_ETA_T: f64 = 0.09;
/// Default significance threshold on level changes for human drivers.
pub const HDV_DELTA_ETA_T: f64 = 0.18;

/// Span at each end of a measured series averaged into the start/end level (s).
const END_LEVEL_WINDOW: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternCategory {
    #[serde(rename = "NE")]
    Ne,
    Concave,
    Convex,
    ConcaveConvex,
    ConvexConcave,
    NonDecreasing,
    NonIncreasing,
}

impl PatternCategory {
    pub const ALL: [PatternCategory; 7] = [
        PatternCategory::Ne,
        PatternCategory::Concave,
        PatternCategory::Convex,
        PatternCategory::ConcaveConvex,
        PatternCategory::ConvexConcave,
        PatternCategory::NonDecreasing,
        PatternCategory::NonIncreasing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PatternCategory::Ne => "NE",
            PatternCategory::Concave => "Concave",
            PatternCategory::Convex => "Convex",
            PatternCategory::ConcaveConvex => "ConcaveConvex",
            PatternCategory::ConvexConcave => "ConvexConcave",
            PatternCategory::NonDecreasing => "NonDecreasing",
            PatternCategory::NonIncreasing => "NonIncreasing",
        }
    }

    /// Whether early/late timing applies to this category.
    pub fn has_response(&self) -> bool {
        matches!(
            self,
            PatternCategory::Concave
                | PatternCategory::Convex
                | PatternCategory::NonDecreasing
                | PatternCategory::NonIncreasing
        )
    }
}

impl fmt::Display for PatternCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternCategory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        PatternCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown pattern category '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Early,
    Late,
    Other,
    NotApplicable,
}

impl Response {
    pub fn as_str(&self) -> &'static str {
        match self {
            Response::Early => "early",
            Response::Late => "late",
            Response::Other => "other",
            Response::NotApplicable => "not_applicable",
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionPattern {
    pub category: PatternCategory,
    pub response: Response,
    /// Start of the return toward the final level, when there is one (s).
    pub onset: Option<f64>,
}

impl ReactionPattern {
    /// Canonical label such as `Concave/early` or `NE`.
    pub fn label(&self) -> String {
        match self.response {
            Response::NotApplicable => self.category.to_string(),
            r => format!("{}/{}", self.category, r),
        }
    }
}

impl fmt::Display for ReactionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// What to classify: calibrated parameters (breakpoint times relative to
/// `origin`, normally the leader's first timestamp) or a measured series.
#[derive(Clone, Copy, Debug)]
pub enum PatternInput<'a> {
    Params { theta: &'a EabParams, origin: f64 },
    Series(&'a EtaSeries),
}

/// Threshold from the spread of calibrated `eta0` values.
pub fn iqr_threshold(eta0: &[f64]) -> f64 {
    stats::iqr(eta0)
}

fn sign(d: f64, threshold: f64) -> i8 {
    if d > threshold {
        1
    } else if d < -threshold {
        -1
    } else {
        0
    }
}

/// Sign triple to category.
fn categorize(deltas: [f64; 3], threshold: f64) -> (PatternCategory, Option<usize>) {
    let signs: Vec<i8> = deltas.iter().map(|&d| sign(d, threshold)).collect();
    let net: f64 = deltas.iter().sum();
    // Compress zeros and repeats; remember the delta index where each run starts.
    let mut runs: Vec<(i8, usize)> = Vec::new();
    for (j, &s) in signs.iter().enumerate() {
        if s != 0 && runs.last().is_none_or(|r| r.0 != s) {
            runs.push((s, j));
        }
    }
    let last_start = runs.last().map(|r| r.1);
    let seq: Vec<i8> = runs.iter().map(|r| r.0).collect();
    let by_net = |flat: PatternCategory| {
        if net > threshold {
            PatternCategory::NonDecreasing
        } else if net < -threshold {
            PatternCategory::NonIncreasing
        } else {
            flat
        }
    };
    let cat = match seq.as_slice() {
        [] => PatternCategory::Ne,
        [1] => by_net(PatternCategory::Concave),
        [-1] => by_net(PatternCategory::Convex),
        [1, -1] => by_net(PatternCategory::Concave),
        [-1, 1] => by_net(PatternCategory::Convex),
        [1, -1, 1] => PatternCategory::ConcaveConvex,
        [-1, 1, -1] => PatternCategory::ConvexConcave,
        _ => unreachable!("at most three alternating runs"),
    };
    (cat, last_start)
}

/// Start and end levels plus the two interior extremes in time order.
fn series_levels(series: &EtaSeries) -> Option<([f64; 4], [f64; 4])> {
    let valid: Vec<(f64, f64)> = series.valid().map(|(_, t, e)| (t, e)).collect();
    if valid.len() < 3 {
        return None;
    }
    let (t_first, t_last) = (valid[0].0, valid[valid.len() - 1].0);
    let head: Vec<f64> = valid
        .iter()
        .filter(|p| p.0 <= t_first + END_LEVEL_WINDOW)
        .map(|p| p.1)
        .collect();
    let tail: Vec<f64> = valid
        .iter()
        .filter(|p| p.0 >= t_last - END_LEVEL_WINDOW)
        .map(|p| p.1)
        .collect();
    let (mut imax, mut imin) = (0, 0);
    for (i, p) in valid.iter().enumerate() {
        if p.1 > valid[imax].1 {
            imax = i;
        }
        if p.1 < valid[imin].1 {
            imin = i;
        }
    }
    let (a, b) = if imin <= imax { (imin, imax) } else { (imax, imin) };
    Some((
        [stats::mean(&head), valid[a].1, valid[b].1, stats::mean(&tail)],
        [t_first, valid[a].0, valid[b].0, t_last],
    ))
}

/// Last time after `from` (and before the series reaches `target`) at which
/// the series is still within `tol` of `level`.
fn departure_time(series: &EtaSeries, from: f64, level: f64, target: f64, tol: f64) -> f64 {
    let mut onset = from;
    for (_, t, e) in series.valid().filter(|p| p.1 >= from) {
        if (e - target).abs() <= tol {
            break;
        }
        if (e - level).abs() <= tol {
            onset = t;
        }
    }
    onset
}

/// Classifies a reaction pattern from the significant level changes of the
/// deviation curve and, for single patterns, whether the return toward the
/// final level starts during the leader's deceleration (early) or after its
/// acceleration has ended (late).
///
/// `phases` and `restore_time` are absolute times. `restore_time`, when given,
/// overrides the detected onset of the return.
pub fn classify_pattern(
    input: PatternInput<'_>,
    threshold: f64,
    phases: &LeaderPhases,
    restore_time: Option<f64>,
) -> ReactionPattern {
    let (levels, onset_of) = match input {
        PatternInput::Params { theta, origin } => {
            let Ok(bp) = theta.breakpoints() else {
                return ReactionPattern {
                    category: PatternCategory::Ne,
                    response: Response::NotApplicable,
                    onset: None,
                };
            };
            (theta.levels(), Onset::Breakpoints(bp.map(|t| t + origin)))
        }
        PatternInput::Series(series) => match series_levels(series) {
            Some((levels, times)) => (levels, Onset::Series(series, times)),
            None => {
                return ReactionPattern {
                    category: PatternCategory::Ne,
                    response: Response::NotApplicable,
                    onset: None,
                }
            }
        },
    };
    let deltas = [levels[1] - levels[0], levels[2] - levels[1], levels[3] - levels[2]];
    let (category, last_seg) = categorize(deltas, threshold);
    let onset = restore_time.or_else(|| {
        let j = last_seg?;
        Some(match onset_of {
            Onset::Breakpoints(bp) => bp[j],
            Onset::Series(series, times) => departure_time(series, times[j], levels[j], levels[j + 1], threshold / 4.0),
        })
    });
    let response = match onset {
        Some(t) if category.has_response() => {
            if phases.in_decel(t) {
                Response::Early
            } else if phases.after_accel(t) {
                Response::Late
            } else {
                Response::Other
            }
        }
        _ => Response::NotApplicable,
    };
    ReactionPattern {
        category,
        response,
        onset,
    }
}

enum Onset<'a> {
    Breakpoints([f64; 4]),
    Series(&'a EtaSeries, [f64; 4]),
}
