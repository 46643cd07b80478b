//! Distribution-wise validation of a calibrated posterior.
//!
//! * [`ws_metric`] assigns every pair its best-reproducing particle and averages
//!   the position, deviation and critical-point errors over pairs.
//! * [`select_representative`] picks the best-fit, 5th-percentile and
//!   deterministic-optimal particles for one pair.
//! * [`jsd`] compares two posteriors with a Jensen–Shannon distance.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::{Features, GofWeights, ParticlePopulation, PreparedPair};
use crate::eab::EabParams;
use crate::newell::NewellParams;
use crate::rng::{domain, substream};
use crate::{Error, Result};

/// Histogram bins per parameter used by [`jsd`].
pub const JSD_BINS: usize = 20;
/// Monte-Carlo samples drawn from each posterior by [`jsd`].
pub const JSD_SAMPLES: usize = 20_000;
const JSD_SEED: u64 = 0x15D;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAssignment {
    pub pair_id: String,
    /// Particle minimising the position error.
    pub best_particle: usize,
    /// Minimising particle for each of `zeta_x`, `zeta_eta`, `zeta_crit`.
    pub best_by_feature: [usize; 3],
    /// `[zeta_x, zeta_eta, zeta_crit]` at their minimisers.
    pub zeta: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub pairs: Vec<PairAssignment>,
    /// Pairs for which no particle could be simulated.
    pub excluded: Vec<String>,
    /// Mean over pairs of the per-pair minimum, per feature.
    pub ws: [f64; 3],
    /// The same sums additionally divided by the population size.
    pub ws_literal: [f64; 3],
    pub population_size: usize,
}

fn argmin_by(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|b| *v < values[b].unwrap()) {
                best = Some(i);
            }
        }
    }
    best
}

/// Features of every particle on `pair`; `None` where simulation failed.
pub fn particle_features(
    pop: &ParticlePopulation,
    pair: &PreparedPair,
    p: &NewellParams,
    cw: &GofWeights,
) -> Vec<Option<Features>> {
    pop.particles
        .par_iter()
        .map(|particle| pair.features(p, &particle.theta, cw).ok())
        .collect()
}

/// Assigns each pair its best particle per feature and aggregates the
/// minimum errors over pairs.
pub fn ws_metric(
    pop: &ParticlePopulation,
    pairs: &[PreparedPair],
    p: &NewellParams,
    cw: &GofWeights,
) -> Result<AssignmentResult> {
    if pop.is_empty() {
        return Err(Error::Empty("population"));
    }
    if pairs.is_empty() {
        return Err(Error::Empty("validation pairs"));
    }
    let mut assigned = Vec::new();
    let mut excluded = Vec::new();
    for pair in pairs {
        let feats = particle_features(pop, pair, p, cw);
        let columns: [Vec<Option<f64>>; 3] = [
            feats.iter().map(|f| f.map(|f| f.zeta_x)).collect(),
            feats.iter().map(|f| f.map(|f| f.zeta_eta)).collect(),
            feats.iter().map(|f| f.map(|f| f.zeta_crit)).collect(),
        ];
        let best: Vec<Option<usize>> = columns.iter().map(|c| argmin_by(c)).collect();
        match (best[0], best[1], best[2]) {
            (Some(bx), Some(be), Some(bc)) => assigned.push(PairAssignment {
                pair_id: pair.id.clone(),
                best_particle: bx,
                best_by_feature: [bx, be, bc],
                zeta: [
                    columns[0][bx].unwrap(),
                    columns[1][be].unwrap(),
                    columns[2][bc].unwrap(),
                ],
            }),
            _ => {
                log::warn!("pair {}: no particle could be simulated", pair.id);
                excluded.push(pair.id.clone());
            }
        }
    }
    if assigned.is_empty() {
        return Err(Error::invalid("no pair could be matched to a particle"));
    }
    let m = assigned.len() as f64;
    let ws: [f64; 3] = std::array::from_fn(|j| assigned.iter().map(|a| a.zeta[j]).sum::<f64>() / m);
    let ws_literal = ws.map(|v| v / pop.len() as f64);
    Ok(AssignmentResult {
        pairs: assigned,
        excluded,
        ws,
        ws_literal,
        population_size: pop.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub index: usize,
    pub theta: EabParams,
    /// Goodness of fit on the pair.
    pub gof: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representatives {
    pub best_fit: Representative,
    pub p5: Representative,
    pub deterministic_optimal: Representative,
}

/// Smallest population accepted by [`select_representative`].
pub const MIN_REPRESENTATIVE_POPULATION: usize = 20;

/// Best-fit and 5th-percentile particles on `pair`, plus the particle with
/// the lowest stored (training-set) goodness of fit.
pub fn select_representative(
    pop: &ParticlePopulation,
    pair: &PreparedPair,
    p: &NewellParams,
    cw: &GofWeights,
) -> Result<Representatives> {
    if pop.len() < MIN_REPRESENTATIVE_POPULATION {
        return Err(Error::invalid(format!(
            "need at least {MIN_REPRESENTATIVE_POPULATION} particles, got {}",
            pop.len()
        )));
    }
    let gofs: Vec<f64> = particle_features(pop, pair, p, cw)
        .iter()
        .map(|f| f.map_or(f64::INFINITY, |f| f.gof))
        .collect();
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| gofs[a].total_cmp(&gofs[b]).then(a.cmp(&b)));
    let rank = (0.05 * pop.len() as f64).floor() as usize;
    let pick = |i: usize| Representative {
        index: i,
        theta: pop.particles[i].theta,
        gof: gofs[i],
    };
    let (opt, _) = pop.best().ok_or(Error::Empty("population"))?;
    Ok(Representatives {
        best_fit: pick(order[0]),
        p5: pick(order[rank]),
        deterministic_optimal: pick(opt),
    })
}

/// Per-component bin masses on a shared grid.
struct MarginalHistograms {
    masses: Vec<Vec<f64>>,
    cdf: Vec<Vec<f64>>,
}

fn shared_edges(a: &ParticlePopulation, b: &ParticlePopulation) -> Vec<(f64, f64)> {
    (0..8)
        .map(|j| {
            let vals = a.component(j).into_iter().chain(b.component(j));
            vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

fn bin_of(v: f64, (lo, hi): (f64, f64)) -> usize {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * JSD_BINS as f64).floor() as usize).min(JSD_BINS - 1)
}

impl MarginalHistograms {
    fn new(pop: &ParticlePopulation, edges: &[(f64, f64)]) -> Self {
        let total: f64 = pop.particles.iter().map(|p| p.weight).sum();
        let masses: Vec<Vec<f64>> = edges
            .iter()
            .enumerate()
            .map(|(j, &e)| {
                let mut m = vec![0.0; JSD_BINS];
                for p in &pop.particles {
                    m[bin_of(p.theta.to_array()[j], e)] += p.weight / total;
                }
                m
            })
            .collect();
        let cdf = masses
            .iter()
            .map(|m| {
                m.iter()
                    .scan(0.0, |acc, x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        MarginalHistograms { masses, cdf }
    }

    fn draw(&self, j: usize, u: f64) -> usize {
        let cdf = &self.cdf[j];
        let scaled = u * cdf[JSD_BINS - 1];
        let mut bin = cdf.partition_point(|&c| c <= scaled).min(JSD_BINS - 1);
        // never land on an empty bin because of rounding at the top
        while self.masses[j][bin] == 0.0 && bin > 0 {
            bin -= 1;
        }
        bin
    }

    fn mass(&self, bins: &[usize]) -> f64 {
        bins.iter().enumerate().map(|(j, &b)| self.masses[j][b]).product()
    }
}

/// `phi(p / m, q / m)` averaged under `m` gives the Jensen–Shannon
/// divergence (base 2). Taking both ratios explicitly, rather than `2 - u`,
/// keeps the value bit-identical when the sides are swapped.
fn phi(u: f64, v: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { 0.5 * x * x.log2() } else { 0.0 };
    term(u) + term(v)
}

/// Jensen–Shannon distance (base 2, square-root convention) between two
/// posteriors, each approximated by the product of its per-parameter
/// histograms on a shared 20-bin grid.
///
/// The divergence is estimated by Monte Carlo with common random numbers for
/// the draws from both sides, which keeps the estimate exactly symmetric,
/// exactly 0 for identical inputs and exactly 1 for disjoint supports.
pub fn jsd(a: &ParticlePopulation, b: &ParticlePopulation) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("population"));
    }
    let edges = shared_edges(a, b);
    let ha = MarginalHistograms::new(a, &edges);
    let hb = MarginalHistograms::new(b, &edges);
    let total: f64 = (0..JSD_SAMPLES)
        .into_par_iter()
        .map(|n| {
            let mut rng = substream(JSD_SEED, domain::JSD, 0, n as u64);
            let us: [f64; 8] = std::array::from_fn(|_| rng.random::<f64>());
            let value = |bins: &[usize]| {
                let (pa, pb) = (ha.mass(bins), hb.mass(bins));
                let m = pa + pb;
                phi(2.0 * pa / m, 2.0 * pb / m)
            };
            let sa: Vec<usize> = (0..8).map(|j| ha.draw(j, us[j])).collect();
            let sb: Vec<usize> = (0..8).map(|j| hb.draw(j, us[j])).collect();
            0.5 * (value(&sa) + value(&sb))
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((total / JSD_SAMPLES as f64).clamp(0.0, 1.0).sqrt())
}
