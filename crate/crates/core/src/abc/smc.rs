use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GofEvaluator, PriorSpec};
use crate::eab::EabParams;
use crate::rng::{domain, substream};
use crate::stats;
use crate::{Error, Result};

/// Proposals allowed per iteration, as a multiple of `(1 - lambda) K`.
pub const PROPOSAL_CAP_FACTOR: f64 = 50.0;
/// Lower bound on the random-walk variance of every component.
pub const KERNEL_VARIANCE_FLOOR: f64 = 1e-8;
/// Kernel draws tried per proposal before it counts as a rejection.
const MAX_KERNEL_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum Gamma0Rule {
    /// Quantile of the initial prior draws' goodness of fit.
    Quantile(f64),
    Fixed(f64),
}

impl Default for Gamma0Rule {
    fn default() -> Self {
        Gamma0Rule::Quantile(0.95)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: EabParams,
    pub gof: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticlePopulation {
    pub particles: Vec<Particle>,
    pub iteration: usize,
    pub gamma: f64,
    pub rho: f64,
    pub seed: u64,
}

impl ParticlePopulation {
    /// Equally weighted population.
    pub fn from_particles(thetas: Vec<(EabParams, f64)>, seed: u64) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::Empty("population"));
        }
        let w = 1.0 / thetas.len() as f64;
        let gamma = thetas.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        Ok(ParticlePopulation {
            particles: thetas
                .into_iter()
                .map(|(theta, gof)| Particle { theta, gof, weight: w })
                .collect(),
            iteration: 0,
            gamma,
            rho: 1.0,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn thetas(&self) -> Vec<EabParams> {
        self.particles.iter().map(|p| p.theta).collect()
    }

    pub fn gofs(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.gof).collect()
    }

    /// Values of parameter `j` (in parameter order) across particles.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.particles.iter().map(|p| p.theta.to_array()[j]).collect()
    }

    pub fn iqr(&self) -> [f64; 8] {
        std::array::from_fn(|j| stats::iqr(&self.component(j)))
    }

    /// Central credible interval of parameter `j` at `level` (e.g. 0.9).
    pub fn credible_interval(&self, j: usize, level: f64) -> (f64, f64) {
        let c = self.component(j);
        let a = 0.5 * (1.0 - level);
        (stats::quantile(&c, a), stats::quantile(&c, 1.0 - a))
    }

    /// Lowest-gof particle (first on ties).
    pub fn best(&self) -> Option<(usize, &Particle)> {
        let i = stats::argmin(&self.gofs())?;
        Some((i, &self.particles[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsmcSettings {
    pub k: usize,
    pub lambda: f64,
    pub rho_stop: f64,
    pub max_iter: usize,
    pub gamma0: Gamma0Rule,
}

impl Default for AsmcSettings {
    fn default() -> Self {
        AsmcSettings {
            k: 500,
            lambda: 0.95,
            rho_stop: 0.01,
            max_iter: 150,
            gamma0: Gamma0Rule::default(),
        }
    }
}

impl AsmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("K must be at least 2".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config("lambda must lie in (0, 1)".into()));
        }
        if !(self.rho_stop >= 0.0 && self.rho_stop < 1.0) {
            return Err(Error::Config("rho_stop must lie in [0, 1)".into()));
        }
        match self.gamma0 {
            Gamma0Rule::Quantile(q) if !(0.0..=1.0).contains(&q) => {
                Err(Error::Config("gamma0 quantile must lie in [0, 1]".into()))
            }
            Gamma0Rule::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                Err(Error::Config("fixed gamma0 must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub gamma: f64,
    pub rho: f64,
    pub proposed: usize,
    pub accepted: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RhoBelowThreshold,
    MaxIterations,
    ProposalCapExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsTrace {
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
}

/// Draws `k` particles from the prior with equal weights and sets the
/// initial tolerance.
pub fn init_population<E: GofEvaluator + ?Sized>(
    prior: &PriorSpec,
    k: usize,
    gamma0: Gamma0Rule,
    eval: &E,
    seed: u64,
) -> Result<ParticlePopulation> {
    if k < 2 {
        return Err(Error::invalid(format!("population size {k} < 2")));
    }
    prior.validate()?;
    let thetas = (0..k)
        .into_par_iter()
        .map(|i| prior.sample(&mut substream(seed, domain::PRIOR, 0, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let gofs: Vec<f64> = thetas.par_iter().map(|th| eval.gof(th)).collect();
    let gamma = match gamma0 {
        Gamma0Rule::Fixed(g) => g,
        Gamma0Rule::Quantile(q) => {
            let mut sorted = gofs.clone();
            sorted.sort_by(f64::total_cmp);
            let g = stats::quantile_sorted(&sorted, q);
            if !g.is_finite() {
                return Err(Error::invalid(
                    "initial tolerance is not finite: too many prior draws failed to simulate",
                ));
            }
            g
        }
    };
    let mut pop = ParticlePopulation::from_particles(thetas.into_iter().zip(gofs).collect(), seed)?;
    pop.gamma = gamma;
    Ok(pop)
}

struct StepOutcome {
    pop: ParticlePopulation,
    alive: usize,
    needed: usize,
    accepted: usize,
    proposed: usize,
}

fn kernel_sd(alive: &[&Particle]) -> [f64; 8] {
    std::array::from_fn(|j| {
        let c: Vec<f64> = alive.iter().map(|p| p.theta.to_array()[j]).collect();
        let var = if c.len() > 1 { stats::variance(&c) } else { 0.0 };
        (2.0 * var).max(KERNEL_VARIANCE_FLOOR).sqrt()
    })
}

/// Proposals allowed in one iteration: `PROPOSAL_CAP_FACTOR (1 - lambda) K`,
/// raised to `(1 - lambda) K / rho_stop` so that an acceptance ratio below
/// `rho_stop` can actually be observed before the cap is hit.
pub fn proposal_cap(k: usize, lambda: f64, rho_stop: f64) -> usize {
    let factor = if rho_stop > 0.0 {
        PROPOSAL_CAP_FACTOR.max(1.0 / rho_stop)
    } else {
        PROPOSAL_CAP_FACTOR
    };
    (factor * (1.0 - lambda) * k as f64 - 1e-9).ceil() as usize
}

fn asmc_step<E: GofEvaluator + ?Sized>(
    pop: &ParticlePopulation,
    eval: &E,
    prior: &PriorSpec,
    lambda: f64,
    cap: usize,
) -> Result<StepOutcome> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda {lambda} outside (0, 1)")));
    }
    let k = pop.len();
    if k < 2 {
        return Err(Error::invalid("population needs at least two particles"));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| pop.particles[a].gof.total_cmp(&pop.particles[b].gof).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| pop.particles[i].gof).collect();
    let gamma = stats::quantile_sorted(&sorted, lambda).min(pop.gamma);
    if !gamma.is_finite() {
        return Err(Error::invalid("tolerance is not finite"));
    }
    let n_alive = ((lambda * k as f64).ceil() as usize).min(sorted.iter().take_while(|&&g| g <= gamma).count());
    if n_alive == 0 {
        return Err(Error::invalid("no particle meets the tolerance"));
    }
    let alive: Vec<&Particle> = order[..n_alive].iter().map(|&i| &pop.particles[i]).collect();
    let needed = k - n_alive;
    let sd = kernel_sd(&alive);
    let iteration = pop.iteration + 1;

    // Kernel draws with zero prior density are redrawn (new parent, new
    // noise) rather than counted as proposals.
    let propose = |n: usize| -> (EabParams, f64) {
        let mut rng = substream(pop.seed, domain::PROPOSAL, iteration as u64, n as u64);
        let mut theta = alive[0].theta;
        for _ in 0..MAX_KERNEL_REDRAWS {
            let parent = alive[rng.random_range(0..n_alive)].theta.to_array();
            let a: [f64; 8] = std::array::from_fn(|j| {
                let z: f64 = rng.sample(StandardNormal);
                parent[j] + sd[j] * z
            });
            theta = EabParams::from_array(a);
            if prior.supports(&theta) {
                return (theta, eval.gof(&theta));
            }
        }
        (theta, f64::INFINITY)
    };

    let mut fresh = Vec::with_capacity(needed);
    let mut proposed = 0;
    let chunk = (4 * needed).max(64);
    while fresh.len() < needed && proposed < cap {
        let end = (proposed + chunk).min(cap);
        let batch: Vec<(EabParams, f64)> = (proposed..end).into_par_iter().map(propose).collect();
        for (theta, gof) in batch {
            proposed += 1;
            if gof <= gamma {
                fresh.push((theta, gof));
                if fresh.len() == needed {
                    break;
                }
            }
        }
    }
    let accepted = fresh.len();
    let rho = if proposed == 0 {
        1.0
    } else {
        accepted as f64 / proposed as f64
    };
    let mut particles: Vec<(EabParams, f64)> = alive.iter().map(|p| (p.theta, p.gof)).collect();
    particles.extend(fresh);
    let mut next = ParticlePopulation::from_particles(particles, pop.seed)?;
    next.iteration = iteration;
    next.gamma = gamma;
    next.rho = rho;
    Ok(StepOutcome {
        pop: next,
        alive: n_alive,
        needed,
        accepted,
        proposed,
    })
}

/// One tolerance-tightening iteration. Fails with
/// [`Error::ProposalCapExhausted`] when the perturbed set cannot be filled.
pub fn asmc_iterate<E: GofEvaluator + ?Sized>(
    pop: &ParticlePopulation,
    eval: &E,
    prior: &PriorSpec,
    settings: &AsmcSettings,
) -> Result<ParticlePopulation> {
    let cap = proposal_cap(pop.len(), settings.lambda, settings.rho_stop);
    let out = asmc_step(pop, eval, prior, settings.lambda, cap)?;
    if out.accepted < out.needed {
        return Err(Error::ProposalCapExhausted {
            accepted: out.accepted,
            needed: out.needed,
            proposed: out.proposed,
        });
    }
    Ok(out.pop)
}

/// Refills a partially filled population to `k` by copying survivors.
fn pad(mut pop: ParticlePopulation, alive: usize, k: usize) -> ParticlePopulation {
    let mut rng = substream(pop.seed, domain::PAD, pop.iteration as u64, 0);
    while pop.particles.len() < k {
        let i = rng.random_range(0..alive);
        pop.particles.push(pop.particles[i]);
    }
    let w = 1.0 / k as f64;
    for p in &mut pop.particles {
        p.weight = w;
    }
    pop
}

/// Runs the sampler until the acceptance ratio drops below `rho_stop`, the
/// iteration budget is spent or an iteration exhausts its proposal cap.
pub fn run_calibration<E: GofEvaluator + ?Sized>(
    eval: &E,
    prior: &PriorSpec,
    settings: &AsmcSettings,
    seed: u64,
) -> Result<(ParticlePopulation, DiagnosticsTrace)> {
    settings.validate()?;
    let mut pop = init_population(prior, settings.k, settings.gamma0, eval, seed)?;
    let mut rows = vec![TraceRow {
        iteration: 0,
        gamma: pop.gamma,
        rho: 1.0,
        proposed: settings.k,
        accepted: settings.k,
    }];
    let mut stop = StopReason::MaxIterations;
    let cap = proposal_cap(settings.k, settings.lambda, settings.rho_stop);
    for _ in 0..settings.max_iter {
        let out = asmc_step(&pop, eval, prior, settings.lambda, cap)?;
        rows.push(TraceRow {
            iteration: out.pop.iteration,
            gamma: out.pop.gamma,
            rho: out.pop.rho,
            proposed: out.proposed,
            accepted: out.accepted,
        });
        log::info!(
            "iteration {}: gamma {:.6} rho {:.4} ({}/{})",
            out.pop.iteration,
            out.pop.gamma,
            out.pop.rho,
            out.accepted,
            out.proposed
        );
        if out.accepted < out.needed {
            log::warn!(
                "proposal cap exhausted after {} proposals ({} of {} accepted)",
                out.proposed,
                out.accepted,
                out.needed
            );
            pop = pad(out.pop, out.alive, settings.k);
            stop = StopReason::ProposalCapExhausted;
            break;
        }
        pop = out.pop;
        if pop.rho < settings.rho_stop {
            stop = StopReason::RhoBelowThreshold;
            break;
        }
    }
    Ok((pop, DiagnosticsTrace { rows, stop }))
}

/// `n` weighted draws with replacement.
pub fn sample_posterior(pop: &ParticlePopulation, n: usize, seed: u64) -> Result<Vec<EabParams>> {
    if pop.is_empty() {
        return Err(Error::Empty("population"));
    }
    if n == 0 {
        return Err(Error::invalid("posterior sample size must be at least 1"));
    }
    let weights: Vec<f64> = pop.particles.iter().map(|p| p.weight).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = substream(seed, domain::POSTERIOR, 0, 0);
    Ok((0..n).map(|_| pop.particles[dist.sample(&mut rng)].theta).collect())
}
