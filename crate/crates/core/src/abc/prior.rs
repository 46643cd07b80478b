use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eab::EabParams;
use crate::trajectory::VehicleClass;
use crate::{Error, Result};

/// Draws rejected for sign-inconsistent segments before giving up.
const MAX_PRIOR_ATTEMPTS: usize = 100_000;

/// Independent uniform bounds on the levels, slopes and onset time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub eta: (f64, f64),
    pub eps: (f64, f64),
    pub t1: (f64, f64),
}

impl PriorSpec {
    pub fn acc() -> Self {
        PriorSpec {
            eta: (0.5, 1.5),
            eps: (-0.15, 0.15),
            t1: (0.0, 25.0),
        }
    }

    pub fn hdv() -> Self {
        PriorSpec {
            eta: (0.3, 3.0),
            ..Self::acc()
        }
    }

    pub fn for_class(class: VehicleClass) -> Self {
        match class {
            VehicleClass::Acc => Self::acc(),
            VehicleClass::Hdv => Self::hdv(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("eta", self.eta), ("eps", self.eps), ("t1", self.t1)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("prior bounds for {name}: need lo < hi")));
            }
        }
        if self.eta.0 <= 0.0 {
            return Err(Error::Config("prior eta bounds must be positive".into()));
        }
        Ok(())
    }

    /// Per-component `(lo, hi)` in parameter order.
    pub fn bounds(&self) -> [(f64, f64); 8] {
        [
            self.eta, self.eta, self.eta, self.eta, self.eps, self.eps, self.eps, self.t1,
        ]
    }

    /// Interquartile range of each uniform marginal.
    pub fn iqr(&self) -> [f64; 8] {
        self.bounds().map(|(lo, hi)| 0.5 * (hi - lo))
    }

    pub fn contains(&self, theta: &EabParams) -> bool {
        theta
            .to_array()
            .iter()
            .zip(self.bounds())
            .all(|(&v, (lo, hi))| v >= lo && v <= hi)
    }

    /// Inside the bounds and with consistent segments: the set on which the
    /// prior density is positive.
    pub fn supports(&self, theta: &EabParams) -> bool {
        self.contains(theta) && theta.is_valid()
    }

    /// Uniform draw restricted to parameter vectors with consistent segments.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EabParams> {
        for _ in 0..MAX_PRIOR_ATTEMPTS {
            let a = self.bounds().map(|(lo, hi)| rng.random_range(lo..hi));
            let theta = EabParams::from_array(a);
            if theta.is_valid() {
                return Ok(theta);
            }
        }
        Err(Error::InvalidParams("prior has no sign-consistent support".into()))
    }
}
