use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PARAM_NAMES: [&str; 8] = ["eta0", "eta1", "eta2", "eta3", "eps0", "eps1", "eps2", "t1"];

/// The eight EAB parameters. Levels `eta0..eta3` are dimensionless, slopes
/// `eps0..eps2` are in 1/s and `t1` (s) is the onset of the deviation,
/// measured from the start of the leader's trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EabParams {
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub t1: f64,
}

impl EabParams {
    /// Constant multiplier `eta` (all segments zero-length).
    pub fn constant(eta: f64) -> Self {
        EabParams {
            eta0: eta,
            eta1: eta,
            eta2: eta,
            eta3: eta,
            eps0: 0.0,
            eps1: 0.0,
            eps2: 0.0,
            t1: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.eta0, self.eta1, self.eta2, self.eta3, self.eps0, self.eps1, self.eps2, self.t1,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        EabParams {
            eta0: a[0],
            eta1: a[1],
            eta2: a[2],
            eta3: a[3],
            eps0: a[4],
            eps1: a[5],
            eps2: a[6],
            t1: a[7],
        }
    }

    pub fn levels(&self) -> [f64; 4] {
        [self.eta0, self.eta1, self.eta2, self.eta3]
    }

    pub fn slopes(&self) -> [f64; 3] {
        [self.eps0, self.eps1, self.eps2]
    }

    /// Level differences `eta^{j+1} - eta^j`.
    pub fn deltas(&self) -> [f64; 3] {
        let l = self.levels();
        [l[1] - l[0], l[2] - l[1], l[3] - l[2]]
    }

    /// Same curve with every breakpoint moved `offset` seconds later.
    pub fn delayed(&self, offset: f64) -> Self {
        EabParams {
            t1: self.t1 + offset,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite component".into()));
        }
        if self.levels().iter().any(|&e| e <= 0.0) {
            return Err(Error::InvalidParams("levels must be positive".into()));
        }
        for (j, (d, e)) in self.deltas().iter().zip(self.slopes()).enumerate() {
            if *d == 0.0 {
                continue;
            }
            if e == 0.0 || d.signum() != e.signum() {
                return Err(Error::InvalidParams(format!(
                    "segment {j}: level change {d:.4} inconsistent with slope {e:.4}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// Breakpoints `[t1, t2, t3, t4]`, with `t_{j+1} = t_j + (eta^{j+1} - eta^j) / eps^j`
    /// and zero-length segments where the levels match.
    pub fn breakpoints(&self) -> Result<[f64; 4]> {
        self.validate()?;
        let mut t = [self.t1; 4];
        for (j, (d, e)) in self.deltas().iter().zip(self.slopes()).enumerate() {
            let len = if *d == 0.0 { 0.0 } else { d / e };
            t[j + 1] = t[j] + len;
        }
        Ok(t)
    }

    pub fn profile(&self) -> Result<EtaProfile> {
        let t = self.breakpoints()?;
        let l = self.levels();
        Ok(EtaProfile {
            knots: (0..4).map(|j| (t[j], l[j])).collect(),
        })
    }
}

/// A continuous piecewise-linear `eta(t)` through time-ordered knots, constant
/// before the first knot and after the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaProfile {
    knots: Vec<(f64, f64)>,
}

impl EtaProfile {
    /// Knots must be non-empty with non-decreasing times and positive levels.
    /// Coincident knot times must carry equal levels (continuity).
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Empty("eta profile"));
        }
        for &(t, e) in &knots {
            if !t.is_finite() || !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidParams(format!("bad knot ({t}, {e})")));
            }
        }
        for w in knots.windows(2) {
            if w[1].0 < w[0].0 || (w[1].0 == w[0].0 && w[1].1 != w[0].1) {
                return Err(Error::InvalidParams("knots out of order".into()));
            }
        }
        Ok(EtaProfile { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn max_level(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::MIN, f64::max)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let first = self.knots[0];
        if t <= first.0 {
            return first.1;
        }
        for w in self.knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t <= b.0 {
                if b.0 == a.0 {
                    return b.1;
                }
                return a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0);
            }
        }
        self.knots[self.knots.len() - 1].1
    }

    /// Right derivative of `eta` at `t`.
    pub fn slope(&self, t: f64) -> f64 {
        for w in self.knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t >= a.0 && t < b.0 {
                return (b.1 - a.1) / (b.0 - a.0);
            }
        }
        0.0
    }
}

/// `eta(t)` for parameters `theta`, with `t` measured from the leader's start.
pub fn eta_eval(theta: &EabParams, t: f64) -> Result<f64> {
    Ok(theta.profile()?.eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_curve_is_constant() {
        let theta = EabParams::constant(1.0);
        for t in [-5.0, 0.0, 3.0, 100.0] {
            assert_eq!(eta_eval(&theta, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_slope_direct_evaluation() {
        let theta = EabParams {
            eta0: 1.0,
            eta1: 1.2,
            eta2: 1.2,
            eta3: 1.2,
            eps0: 0.05,
            eps1: 0.0,
            eps2: 0.0,
            t1: 5.0,
        };
        let bp = theta.breakpoints().unwrap();
        assert!((bp[1] - 9.0).abs() < 1e-12);
        assert!((eta_eval(&theta, 7.0).unwrap() - 1.1).abs() < 1e-12);
        assert_eq!(eta_eval(&theta, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn sign_inconsistent_segment_is_rejected() {
        let theta = EabParams {
            eta0: 1.0,
            eta1: 1.2,
            eta2: 1.0,
            eta3: 1.0,
            eps0: -0.05,
            eps1: -0.05,
            eps2: 0.0,
            t1: 5.0,
        };
        assert!(matches!(eta_eval(&theta, 1.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn zero_slope_with_level_change_is_rejected() {
        let mut theta = EabParams::constant(1.0);
        theta.eta1 = 1.1;
        theta.eta2 = 1.1;
        theta.eta3 = 1.1;
        assert!(theta.validate().is_err());
    }

    pub(crate) fn valid_theta() -> impl Strategy<Value = EabParams> {
        (
            0.5f64..1.5,
            prop::array::uniform3((0.01f64..0.15, prop::bool::ANY, 0.0f64..0.4)),
            0.0f64..25.0,
        )
            .prop_filter_map("positive levels", |(eta0, segs, t1)| {
                let mut levels = [eta0, 0.0, 0.0, 0.0];
                let mut slopes = [0.0; 3];
                for (j, (mag, up, dlevel)) in segs.iter().enumerate() {
                    let s = if *up { 1.0 } else { -1.0 };
                    levels[j + 1] = levels[j] + s * dlevel;
                    slopes[j] = s * mag;
                }
                let theta = EabParams {
                    eta0,
                    eta1: levels[1],
                    eta2: levels[2],
                    eta3: levels[3],
                    eps0: slopes[0],
                    eps1: slopes[1],
                    eps2: slopes[2],
                    t1,
                };
                theta.is_valid().then_some(theta)
            })
    }

    proptest! {
        #[test]
        fn final_branch_is_eta3(theta in valid_theta()) {
            let bp = theta.breakpoints().unwrap();
            prop_assert!((eta_eval(&theta, bp[3] + 10.0).unwrap() - theta.eta3).abs() < 1e-12);
        }

        #[test]
        fn continuous_at_breakpoints(theta in valid_theta()) {
            let p = theta.profile().unwrap();
            for (j, t) in theta.breakpoints().unwrap().iter().enumerate() {
                let left = p.eval(t - 1e-9);
                let right = p.eval(t + 1e-9);
                prop_assert!((left - right).abs() < 1e-8, "jump at breakpoint {}", j);
                prop_assert!((p.eval(*t) - theta.levels()[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn breakpoints_are_ordered(theta in valid_theta()) {
            let bp = theta.breakpoints().unwrap();
            prop_assert!(bp.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
