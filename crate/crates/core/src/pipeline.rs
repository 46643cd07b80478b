//! End-to-end batch pipeline.
//!
//! Stages: load and group pairs, seeded train/test split, Newell calibration,
//! ABC-ASMC, then the analysis stages (reproduction distances, pattern and
//! hysteresis tables, posterior distances, platoon sweep). Every stage writes
//! its artifacts under the output directory and the analysis stages only read
//! those artifacts plus the dataset, so each table can be re-derived from the
//! files on disk.
//!
//! Output layout:
//!
//! ```text
//! out/config.toml              resolved configuration
//! out/calibration.json         split and Newell parameters per group
//! out/asmc.json                sampler seed and stop reason per group
//! out/groups/<group>/posterior.csv
//! out/groups/<group>/diagnostics.csv
//! out/penetration.csv
//! out/report.json, out/summary.txt
//! out/plots/*.svg
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::{
    read_diagnostics, read_posterior, run_calibration, write_diagnostics, write_posterior, CalibrationProblem,
    ParticlePopulation, PreparedPair, StopReason, TraceRow,
};
use crate::config::RunConfig;
use crate::eab::{classify_pattern, measure_eta, simulate_follower, PatternInput, PARAM_NAMES};
use crate::hysteresis::{compare_hysteresis, paired_loops, HysteresisLoop};
use crate::newell::{calibrate_newell, NewellParams, Stage1Result};
use crate::platoon::{sweep_penetration, write_sweep, PlatoonSpec};
use crate::plot;
use crate::report::{
    proportions, render_summary, write_report, AsmcSummary, ComponentSummary, GroupReport, NewellSummary, PairReport,
    PenetrationReport, Report, WsSummary, REPORT_FILE, SUMMARY_FILE,
};
use crate::rng::{derived_seed, domain, substream};
use crate::stats;
use crate::synthetic::trapezoid_leader;
use crate::trajectory::{detect_phases, load_trajectories, resample, CfPair, VehicleClass};
use crate::validation::{jsd, select_representative, ws_metric};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const ASMC_FILE: &str = "asmc.json";
pub const PENETRATION_FILE: &str = "penetration.csv";

/// The pairs of one calibration group.
#[derive(Clone, Debug)]
pub struct Group {
    pub name: String,
    /// Position among all groups of the dataset; selects the group's random
    /// streams.
    pub index: usize,
    pub class: VehicleClass,
    pub pairs: Vec<CfPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCalibration {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub newell: Stage1Result,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsmcRecord {
    pub seed: u64,
    pub stop: StopReason,
}

/// Posterior and trace of one group.
#[derive(Clone, Debug)]
pub struct GroupPosterior {
    pub population: ParticlePopulation,
    pub trace: Vec<TraceRow>,
    pub record: AsmcRecord,
}

/// Which analysis stages to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub validate: bool,
    pub classify: bool,
    pub hysteresis: bool,
    pub platoon: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        validate: true,
        classify: true,
        hysteresis: true,
        platoon: true,
    };
    pub const NONE: Stages = Stages {
        validate: false,
        classify: false,
        hysteresis: false,
        platoon: false,
    };
}

/// Directory-safe version of a group name.
pub fn group_slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn group_dir(out: &Path, name: &str) -> PathBuf {
    out.join("groups").join(group_slug(name))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads the dataset, resamples it if asked and groups the pairs. Groups are
/// indexed over the whole dataset before the optional group filter applies.
pub fn load_groups(cfg: &RunConfig) -> Result<Vec<Group>> {
    let d = &cfg.data;
    let mut pairs = load_trajectories(&d.trajectories, &d.manifest, &d.columns)?;
    if let Some(dt) = d.dt {
        pairs = pairs
            .into_iter()
            .map(|p| CfPair::new(resample(&p.leader, dt)?, resample(&p.follower, dt)?, p.label))
            .collect::<Result<_>>()?;
    }
    let mut by_group: BTreeMap<String, Vec<CfPair>> = BTreeMap::new();
    for p in pairs {
        by_group.entry(p.label.group()).or_default().push(p);
    }
    let groups: Vec<Group> = by_group
        .into_iter()
        .enumerate()
        .map(|(index, (name, pairs))| Group {
            class: pairs[0].label.vehicle_class,
            name,
            index,
            pairs,
        })
        .filter(|g| d.group.as_ref().is_none_or(|want| *want == g.name))
        .collect();
    if groups.is_empty() {
        return Err(match &d.group {
            Some(g) => Error::invalid(format!("group '{g}' not found in the dataset")),
            None => Error::Empty("dataset"),
        });
    }
    Ok(groups)
}

/// Seeded split of `n` pairs: indices of the training and test sets, each
/// sorted. The training set holds `round(fraction n)` pairs, at least one;
/// the test set keeps at least one pair whenever `n >= 2`.
pub fn split_indices(n: usize, fraction: f64, seed: u64, group_index: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, domain::SPLIT, group_index as u64, 0));
    let mut n_train = ((fraction * n as f64).round() as usize).max(1).min(n);
    if n >= 2 && n_train == n && fraction < 1.0 {
        n_train = n - 1;
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn pairs_by_id<'a>(group: &'a Group, ids: &[String]) -> Result<Vec<&'a CfPair>> {
    ids.iter()
        .map(|id| {
            group
                .pairs
                .iter()
                .find(|p| p.id() == *id)
                .ok_or_else(|| Error::invalid(format!("pair {id} not found in group {}", group.name)))
        })
        .collect()
}

/// Split and Newell calibration for every group; writes `calibration.json`.
pub fn stage_newell(cfg: &RunConfig, groups: &[Group]) -> Result<BTreeMap<String, GroupCalibration>> {
    let mut out = BTreeMap::new();
    for g in groups {
        let (train, test) = split_indices(g.pairs.len(), cfg.stage1.train_fraction, cfg.seed, g.index);
        let training: Vec<CfPair> = train.iter().map(|&i| g.pairs[i].clone()).collect();
        let newell = calibrate_newell(&training, &cfg.stage1.tau_grid, &cfg.stage1.delta_grid)?;
        log::info!(
            "{}: tau {} delta {} (objective {:.4})",
            g.name,
            newell.tau,
            newell.delta,
            newell.objective
        );
        let ids = |ix: &[usize]| ix.iter().map(|&i| g.pairs[i].id()).collect::<Vec<_>>();
        out.insert(
            g.name.clone(),
            GroupCalibration {
                train: ids(&train),
                test: ids(&test),
                newell,
            },
        );
    }
    create_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join(CALIBRATION_FILE), &out)?;
    Ok(out)
}

pub fn read_calibration(out: &Path) -> Result<BTreeMap<String, GroupCalibration>> {
    read_json(&out.join(CALIBRATION_FILE))
}

/// ABC-ASMC on each group's training pairs; writes posteriors, traces and
/// `asmc.json`.
pub fn stage_asmc(
    cfg: &RunConfig,
    groups: &[Group],
    calib: &BTreeMap<String, GroupCalibration>,
) -> Result<BTreeMap<String, GroupPosterior>> {
    let mut out = BTreeMap::new();
    for g in groups {
        let c = calib
            .get(&g.name)
            .ok_or_else(|| Error::invalid(format!("no Newell calibration for group {}", g.name)))?;
        let training: Vec<CfPair> = pairs_by_id(g, &c.train)?.into_iter().cloned().collect();
        let problem = CalibrationProblem::new(&training, c.newell.params(), cfg.gof, &cfg.measure)?;
        let seed = derived_seed(cfg.seed, domain::GROUP, g.index as u64);
        log::info!("{}: ABC-ASMC on {} pairs (seed {seed})", g.name, training.len());
        let (population, diag) = run_calibration(&problem, &cfg.prior.for_class(g.class), &cfg.asmc, seed)?;
        let dir = group_dir(&cfg.out_dir, &g.name);
        create_dir(&dir)?;
        write_posterior(&dir.join("posterior.csv"), &population)?;
        write_diagnostics(&dir.join("diagnostics.csv"), &diag.rows)?;
        out.insert(
            g.name.clone(),
            GroupPosterior {
                population,
                trace: diag.rows,
                record: AsmcRecord { seed, stop: diag.stop },
            },
        );
    }
    let records: BTreeMap<&String, &AsmcRecord> = out.iter().map(|(k, v)| (k, &v.record)).collect();
    write_json(&cfg.out_dir.join(ASMC_FILE), &records)?;
    Ok(out)
}

/// Reads back what [`stage_asmc`] wrote.
pub fn read_posteriors(out: &Path, groups: &[Group]) -> Result<BTreeMap<String, GroupPosterior>> {
    let records: BTreeMap<String, AsmcRecord> = read_json(&out.join(ASMC_FILE))?;
    let mut res = BTreeMap::new();
    for g in groups {
        let record = records
            .get(&g.name)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("no posterior recorded for group {}", g.name)))?;
        let dir = group_dir(out, &g.name);
        let population = read_posterior(&dir.join("posterior.csv"))?;
        let trace = read_diagnostics(&dir.join("diagnostics.csv"))?;
        res.insert(
            g.name.clone(),
            GroupPosterior {
                population,
                trace,
                record,
            },
        );
    }
    Ok(res)
}

fn asmc_summary(post: &GroupPosterior) -> Result<AsmcSummary> {
    let pop = &post.population;
    let (_, best) = pop.best().ok_or(Error::Empty("population"))?;
    let iqr = pop.iqr();
    let posterior = PARAM_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let c = pop.component(j);
            let s = ComponentSummary {
                median: stats::quantile(&c, 0.5),
                ci90: pop.credible_interval(j, 0.9),
                iqr: iqr[j],
            };
            (name.to_string(), s)
        })
        .collect();
    let last = post.trace.last().ok_or(Error::Empty("diagnostics trace"))?;
    Ok(AsmcSummary {
        seed: post.record.seed,
        iterations: last.iteration,
        stop: post.record.stop,
        final_gamma: last.gamma,
        final_rho: last.rho,
        trace: post.trace.clone(),
        best_theta: best.theta,
        best_gof: best.gof,
        posterior,
    })
}

/// Everything derived for one pair.
struct PairOutcome {
    report: PairReport,
    loops: Option<(HysteresisLoop, HysteresisLoop)>,
}

fn analyze_pair(
    cfg: &RunConfig,
    group: &Group,
    pair: &CfPair,
    split: &str,
    p: &NewellParams,
    pop: &ParticlePopulation,
    stages: Stages,
) -> PairOutcome {
    let mut r = PairReport {
        pair_id: pair.id(),
        split: split.to_string(),
        observed_pattern: None,
        fitted_pattern: None,
        best_particle: None,
        observed_hysteresis: None,
        simulated_hysteresis: None,
        notes: Vec::new(),
    };
    let mut loops = None;
    let threshold = cfg.pattern.threshold(group.class);
    let phases = detect_phases(&pair.leader, cfg.pattern.v_drop_frac);
    let best = PreparedPair::new(pair, p, &cfg.measure)
        .and_then(|prep| select_representative(pop, &prep, p, &cfg.gof))
        .map(|reps| reps.best_fit);
    if let Ok(b) = &best {
        r.best_particle = Some(b.index);
    }
    if stages.classify {
        match &phases {
            Ok(ph) => {
                match measure_eta(pair, p, &cfg.measure) {
                    Ok(series) => {
                        r.observed_pattern =
                            Some(classify_pattern(PatternInput::Series(&series), threshold, ph, None).label())
                    }
                    Err(e) => r.notes.push(format!("deviation measurement: {e}")),
                }
                if let Ok(b) = &best {
                    let input = PatternInput::Params {
                        theta: &b.theta,
                        origin: pair.leader.t0(),
                    };
                    r.fitted_pattern = Some(classify_pattern(input, threshold, ph, None).label());
                }
            }
            Err(e) => r.notes.push(format!("leader phases: {e}")),
        }
    }
    if let Err(e) = &best {
        r.notes.push(format!("representative particle: {e}"));
    }
    if stages.hysteresis {
        let th = cfg.hysteresis.thresholds(pair.label.speed_regime);
        let obs = [pair.leader.clone(), pair.follower.clone()];
        let built = best.as_ref().map_err(|e| Error::invalid(e.to_string())).and_then(|b| {
            let sim = simulate_follower(&pair.leader, p, &b.theta)?;
            paired_loops(&obs, &[pair.leader.clone(), sim], p.w, cfg.hysteresis.zone_dt)
        });
        match built {
            Ok((mut o, mut s)) => {
                r.observed_hysteresis = Some(o.classify(&th).to_string());
                r.simulated_hysteresis = Some(s.classify(&th).to_string());
                loops = Some((o, s));
            }
            Err(e) => {
                r.notes.push(format!("hysteresis: {e}"));
                if let Ok(mut o) = HysteresisLoop::from_trajectories(&obs, p.w, cfg.hysteresis.zone_dt) {
                    r.observed_hysteresis = Some(o.classify(&th).to_string());
                }
            }
        }
    }
    PairOutcome { report: r, loops }
}

fn plot_or_log(result: Result<()>) {
    if let Err(e) = result {
        log::warn!("{e}");
    }
}

fn pick_group<'a>(wanted: &Option<String>, class: VehicleClass, groups: &'a [Group]) -> Option<&'a Group> {
    match wanted {
        Some(name) => groups.iter().find(|g| g.name == *name),
        None => groups.iter().find(|g| g.class == class),
    }
}

/// Platoon sweep between the configured HDV and ACC groups.
pub fn stage_platoon(
    cfg: &RunConfig,
    groups: &[Group],
    calib: &BTreeMap<String, GroupCalibration>,
    posts: &BTreeMap<String, GroupPosterior>,
) -> Result<Option<PenetrationReport>> {
    let pc = &cfg.platoon;
    let (Some(hdv), Some(acc)) = (
        pick_group(&pc.hdv_group, VehicleClass::Hdv, groups),
        pick_group(&pc.acc_group, VehicleClass::Acc, groups),
    ) else {
        log::info!("platoon sweep skipped: needs both an HDV and an ACC group");
        return Ok(None);
    };
    let get = |g: &Group| -> Result<(ParticlePopulation, NewellParams)> {
        let post = posts
            .get(&g.name)
            .ok_or_else(|| Error::invalid(format!("no posterior for {}", g.name)))?;
        let c = calib
            .get(&g.name)
            .ok_or_else(|| Error::invalid(format!("no calibration for {}", g.name)))?;
        Ok((post.population.clone(), c.newell.params()))
    };
    let (hdv_pop, hdv_params) = get(hdv)?;
    let (acc_pop, acc_params) = get(acc)?;
    let spec = PlatoonSpec {
        n_vehicles: pc.n_vehicles,
        penetration: 0.0,
        leader: trapezoid_leader("platoon-leader", &pc.leader)?,
        hdv_posterior: hdv_pop,
        acc_posterior: acc_pop,
        hdv_params,
        acc_params,
        runs: pc.runs,
        seed: cfg.seed,
        zone_dt: cfg.hysteresis.zone_dt,
    };
    let points = sweep_penetration(&spec, &pc.penetrations, pc.runs)?;
    write_sweep(&cfg.out_dir.join(PENETRATION_FILE), &points)?;
    Ok(Some(PenetrationReport {
        hdv_group: hdv.name.clone(),
        acc_group: acc.name.clone(),
        seed: cfg.seed,
        points,
    }))
}

/// Analysis stages on top of stored calibration results.
pub fn analyze(
    cfg: &RunConfig,
    groups: &[Group],
    calib: &BTreeMap<String, GroupCalibration>,
    posts: &BTreeMap<String, GroupPosterior>,
    stages: Stages,
) -> Result<Report> {
    let plots = cfg.out_dir.join("plots");
    if let Err(e) = create_dir(&plots) {
        log::warn!("{e}");
    }
    let mut reports = BTreeMap::new();
    for g in groups {
        let c = calib
            .get(&g.name)
            .ok_or_else(|| Error::invalid(format!("no calibration for {}", g.name)))?;
        let post = posts
            .get(&g.name)
            .ok_or_else(|| Error::invalid(format!("no posterior for {}", g.name)))?;
        let p = c.newell.params();
        let pop = &post.population;
        let slug = group_slug(&g.name);

        let ws = if stages.validate && !c.test.is_empty() {
            let prepared = pairs_by_id(g, &c.test)?
                .into_iter()
                .map(|pair| PreparedPair::new(pair, &p, &cfg.measure))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_stage("validate"))?;
            let a = ws_metric(pop, &prepared, &p, &cfg.gof).map_err(|e| e.at_stage("validate"))?;
            Some(WsSummary {
                ws: a.ws,
                ws_literal: a.ws_literal,
                matched: a.pairs.len(),
                excluded: a.excluded,
            })
        } else {
            None
        };

        let mut outcomes = Vec::new();
        if stages.classify || stages.hysteresis {
            let items: Vec<(&CfPair, &str)> = g
                .pairs
                .iter()
                .map(|pair| {
                    let split = if c.train.contains(&pair.id()) { "train" } else { "test" };
                    (pair, split)
                })
                .collect();
            outcomes = items
                .par_iter()
                .map(|&(pair, split)| analyze_pair(cfg, g, pair, split, &p, pop, stages))
                .collect();
        }
        let pattern_table = proportions(outcomes.iter().map(|o| o.report.fitted_pattern.as_deref()));
        let hysteresis_table = proportions(outcomes.iter().map(|o| o.report.observed_hysteresis.as_deref()));
        let (obs, sim): (Vec<HysteresisLoop>, Vec<HysteresisLoop>) =
            outcomes.iter().filter_map(|o| o.loops.clone()).unzip();
        let hysteresis_comparison = if obs.is_empty() {
            None
        } else {
            Some(compare_hysteresis(&obs, &sim).map_err(|e| e.at_stage("hysteresis"))?)
        };

        plot_or_log(plot::plot_trace(
            &plots.join(format!("trace_{slug}.svg")),
            &g.name,
            &post.trace,
        ));
        if let Some((o, s)) = outcomes.iter().find_map(|o| o.loops.as_ref()) {
            plot_or_log(plot::plot_loops(
                &plots.join(format!("loop_{slug}.svg")),
                &g.name,
                &[("observed", o), ("best fit", s)],
            ));
        }

        reports.insert(
            g.name.clone(),
            GroupReport {
                n_pairs: g.pairs.len(),
                train: c.train.clone(),
                test: c.test.clone(),
                newell: NewellSummary {
                    tau: p.tau,
                    delta: p.delta,
                    w: p.w,
                    objective: c.newell.objective,
                },
                asmc: asmc_summary(post)?,
                ws,
                pairs: outcomes.into_iter().map(|o| o.report).collect(),
                pattern_table,
                hysteresis_table,
                hysteresis_comparison,
            },
        );
    }

    let mut jsd_table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    if stages.validate {
        let names: Vec<&String> = posts.keys().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let d = jsd(&posts[*a].population, &posts[*b].population).map_err(|e| e.at_stage("validate"))?;
                jsd_table.entry((*a).clone()).or_default().insert((*b).clone(), d);
            }
        }
    }

    let penetration = if stages.platoon && cfg.platoon.enabled {
        let p = stage_platoon(cfg, groups, calib, posts).map_err(|e| e.at_stage("platoon"))?;
        if let Some(p) = &p {
            plot_or_log(plot::plot_penetration(&plots.join("penetration.svg"), &p.points));
        }
        p
    } else {
        None
    };

    Ok(Report {
        seed: cfg.seed,
        groups: reports,
        jsd: jsd_table,
        penetration,
    })
}

/// Writes `report.json` (or `<name>.json` for partial runs) and the text
/// summary next to it.
pub fn emit_report(cfg: &RunConfig, report: &Report, name: &str) -> Result<PathBuf> {
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join(name);
    write_report(&path, report)?;
    let summary = cfg.out_dir.join(if name == REPORT_FILE {
        SUMMARY_FILE.to_string()
    } else {
        format!("{name}.txt")
    });
    std::fs::write(&summary, render_summary(report)).map_err(|e| Error::io(&summary, e))?;
    Ok(path)
}

/// Runs every stage and writes all artifacts.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Report> {
    cfg.validate().map_err(|e| e.at_stage("config"))?;
    create_dir(&cfg.out_dir).map_err(|e| e.at_stage("config"))?;
    cfg.save(&cfg.out_dir.join(CONFIG_FILE))
        .map_err(|e| e.at_stage("config"))?;
    let groups = load_groups(cfg).map_err(|e| e.at_stage("load"))?;
    let calib = stage_newell(cfg, &groups).map_err(|e| e.at_stage("stage1"))?;
    let posts = stage_asmc(cfg, &groups, &calib).map_err(|e| e.at_stage("asmc"))?;
    let report = analyze(cfg, &groups, &calib, &posts, Stages::ALL)?;
    emit_report(cfg, &report, REPORT_FILE).map_err(|e| e.at_stage("report"))?;
    Ok(report)
}
