//! Adaptive sequential Monte Carlo ABC calibration of the deviation curve.
//!
//! A population of `K` particles is drawn from a uniform prior and repeatedly
//! tightened: the tolerance drops to the `lambda` quantile of the current
//! goodness-of-fit values, the best `ceil(lambda K)` particles survive and the
//! rest are replaced by Gaussian random-walk moves from the survivors that
//! meet the new tolerance.

mod gof;
mod io;
mod prior;
mod smc;

pub use gof::{gof_eab, CalibrationProblem, Features, GofEvaluator, GofWeights, PreparedPair};
pub use io::{read_diagnostics, read_posterior, write_diagnostics, write_posterior};
pub use prior::PriorSpec;
pub use smc::{
    asmc_iterate, init_population, proposal_cap, run_calibration, sample_posterior, AsmcSettings, DiagnosticsTrace,
    Gamma0Rule, Particle, ParticlePopulation, StopReason, TraceRow, KERNEL_VARIANCE_FLOOR, PROPOSAL_CAP_FACTOR,
};
