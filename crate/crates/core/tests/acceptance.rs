//! Acceptance suite: one check per numbered criterion, each at its stated
//! tolerance. Runs as a plain binary so every criterion is attempted and
//! reported even when an earlier one fails:
//!
//! ```text
//! cargo test -p eab-core --test acceptance            # all criteria
//! cargo test -p eab-core --test acceptance -- 5 8     # a subset
//! ```

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use eab_core::abc::{
    run_calibration, AsmcSettings, CalibrationProblem, GofWeights, ParticlePopulation, PreparedPair, PriorSpec,
    StopReason,
};
use eab_core::config::RunConfig;
use eab_core::eab::{
    classify_pattern, eta_eval, measure_eta, simulate_follower, EabParams, MeasureOptions, PatternCategory,
    PatternInput, Response, ACC_DELTA_ETA_T,
};
use eab_core::hysteresis::{
    build_zones, compare_hysteresis, cross_products, HysteresisLoop, HysteresisPattern, HysteresisThresholds,
    CROSS_UNIT_SCALE,
};
use eab_core::newell::{calibrate_newell, default_delta_grid, default_tau_grid, NewellParams};
use eab_core::pipeline::run_pipeline;
use eab_core::platoon::{default_spec, sweep_penetration, SweepPoint};
use eab_core::rng::substream;
use eab_core::synthetic::{
    generate, jittered_profile, planted_follower, sample_theta, trapezoid_leader, write_dataset, GenerateOptions,
    LeaderProfile, PlantPattern, Scenario, MANIFEST_FILE, TRAJECTORY_FILE,
};
use eab_core::trajectory::{
    detect_phases, newell_shift, CfPair, PairLabel, SpeedRegime, Trajectory, VehicleClass, DEFAULT_V_DROP_FRAC,
};
use eab_core::validation::{jsd, ws_metric};

/// Stream tag for draws made by this suite, apart from the library's own.
const SUITE: u64 = 0xACCE;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn label(class: VehicleClass) -> PairLabel {
    PairLabel {
        vehicle_class: class,
        car_model: "X".into(),
        engine_mode: "normal".into(),
        speed_regime: SpeedRegime::MedianHigh,
    }
}

fn max_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn c1_newell_identity() -> Outcome {
    let start = Instant::now();
    let profile = LeaderProfile {
        t_tail: 24.0,
        ..LeaderProfile::default()
    };
    let leader = trapezoid_leader("lead", &profile).unwrap();
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let sim = simulate_follower(&leader, &p, &EabParams::constant(1.0)).unwrap();
    let shifted = newell_shift(&leader, &p).unwrap();
    let gap = max_gap(&sim, &shifted);
    let elapsed = start.elapsed();
    outcome(
        gap < 1e-6 && elapsed < Duration::from_secs(1) && (leader.duration() - 60.0).abs() < 1e-9,
        format!(
            "max gap {gap:.2e} m over {:.0} s leader in {:.3} s",
            leader.duration(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Random AB-style deviation: levels change only through slopes of size
/// `eps`, so `eps = 0` leaves the follower on its initial equilibrium.
fn ab_theta<R: Rng>(rng: &mut R, eps: f64) -> EabParams {
    let eta0 = rng.random_range(0.6..1.4);
    let signs: [f64; 3] = std::array::from_fn(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let durations: [f64; 3] = std::array::from_fn(|_| rng.random_range(1.0..10.0));
    let eta1 = eta0 + signs[0] * eps * durations[0];
    let eta2 = eta1 + signs[1] * eps * durations[1];
    let eta3 = eta2 + signs[2] * eps * durations[2];
    EabParams {
        eta0,
        eta1,
        eta2,
        eta3,
        eps0: signs[0] * eps,
        eps1: signs[1] * eps,
        eps2: signs[2] * eps,
        t1: rng.random_range(5.0..25.0),
    }
}

fn c2_ab_degeneration() -> Outcome {
    let leader = trapezoid_leader("lead", &LeaderProfile::default()).unwrap();
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let eab = ab_theta(&mut substream(SUITE, 2, i, 0), 1e-6);
        let ab = ab_theta(&mut substream(SUITE, 2, i, 0), 0.0);
        assert_eq!(eab.eta0, ab.eta0);
        let a = simulate_follower(&leader, &p, &eab).unwrap();
        let b = simulate_follower(&leader, &p, &ab).unwrap();
        worst = worst.max(max_gap(&a, &b));
    }
    outcome(
        worst < 1e-3,
        format!("worst gap over 100 parameterizations {worst:.2e} m"),
    )
}

fn c3_eta_round_trip() -> Outcome {
    let leader = trapezoid_leader("lead", &LeaderProfile::default()).unwrap();
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let prior = PriorSpec::acc();
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    let mut draw = 0u64;
    while tested < 50 {
        let theta = prior.sample(&mut substream(SUITE, 3, draw, 0)).unwrap();
        draw += 1;
        let Ok(follower) = simulate_follower(&leader, &p, &theta) else {
            continue;
        };
        let pair = CfPair::new(leader.clone(), follower.with_id("f"), label(VehicleClass::Acc)).unwrap();
        let series = measure_eta(&pair, &p, &MeasureOptions::default()).unwrap();
        let bps = theta.breakpoints().unwrap().map(|b| b + leader.t0());
        for (_, t, eta) in series.valid() {
            if bps.iter().any(|b| (t - b).abs() <= 0.2) {
                continue;
            }
            let truth = eta_eval(&theta, t - leader.t0()).unwrap();
            worst = worst.max((eta - truth).abs());
        }
        tested += 1;
    }
    outcome(
        worst < 0.01,
        format!("sup error {worst:.4} over {tested} θ ({draw} drawn)"),
    )
}

fn c4_stage1_recovery() -> Outcome {
    let start = Instant::now();
    let taus = default_tau_grid();
    let deltas = default_delta_grid();
    let mut hits = 0;
    let mut misses = Vec::new();
    for i in 0..20u64 {
        let mut rng = substream(SUITE, 4, i, 0);
        let tau = taus[rng.random_range(0..taus.len())];
        let delta = deltas[rng.random_range(0..deltas.len())];
        let p = NewellParams::new(tau, delta).unwrap();
        let pairs: Vec<CfPair> = (0..3)
            .map(|j| {
                let leader = trapezoid_leader(format!("l{j}"), &jittered_profile(&mut rng)).unwrap();
                let follower = newell_shift(&leader, &p).unwrap().with_id(format!("f{j}"));
                CfPair::new(leader, follower, label(VehicleClass::Hdv)).unwrap()
            })
            .collect();
        let got = calibrate_newell(&pairs, &taus, &deltas).unwrap();
        if got.tau == tau && got.delta == delta {
            hits += 1;
        } else {
            misses.push(format!("({tau},{delta})->({},{})", got.tau, got.delta));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        hits == 20 && elapsed < Duration::from_secs(30),
        format!(
            "{hits}/20 recovered exactly in {:.1} s {}",
            elapsed.as_secs_f64(),
            misses.join(" ")
        ),
    )
}

fn c5_asmc_soundness() -> Outcome {
    let start = Instant::now();
    let theta = EabParams {
        eta0: 1.0,
        eta1: 1.4,
        eta2: 0.7,
        eta3: 1.1,
        eps0: 0.12,
        eps1: -0.1,
        eps2: 0.08,
        t1: 14.0,
    };
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let prior = PriorSpec::acc();
    let settings = AsmcSettings {
        k: 500,
        lambda: 0.95,
        ..AsmcSettings::default()
    };
    let prior_iqr = prior.iqr();
    let runs = 20u64;
    let (mut monotone, mut terminated, mut concentrated, mut cover_eta0, mut cover_t1) = (0, 0, 0, 0, 0);
    let mut notes = Vec::new();
    for seed in 0..runs {
        let mut rng = substream(SUITE, 5, seed, 0);
        let pairs: Vec<CfPair> = (0..4)
            .map(|j| {
                let leader = trapezoid_leader(format!("l{j}"), &jittered_profile(&mut rng)).unwrap();
                let follower = planted_follower(&format!("f{j}"), &leader, &p, &theta, 3.0, &mut rng).unwrap();
                CfPair::new(leader, follower, label(VehicleClass::Acc)).unwrap()
            })
            .collect();
        let problem = CalibrationProblem::new(&pairs, p, GofWeights::default(), &MeasureOptions::default()).unwrap();
        let (pop, trace) = run_calibration(&problem, &prior, &settings, seed).unwrap();
        if trace.rows.windows(2).all(|w| w[1].gamma <= w[0].gamma) {
            monotone += 1;
        }
        let last = trace.rows.last().unwrap();
        let stopped_early = trace.stop != StopReason::MaxIterations && last.rho < 0.01 && last.iteration < 150;
        terminated += stopped_early as usize;
        let iqr = pop.iqr();
        let wide: Vec<usize> = (0..8).filter(|&j| iqr[j] > prior_iqr[j]).collect();
        concentrated += wide.is_empty() as usize;
        let (lo, hi) = pop.credible_interval(0, 0.9);
        cover_eta0 += (lo..=hi).contains(&theta.eta0) as usize;
        let (lo, hi) = pop.credible_interval(7, 0.9);
        cover_t1 += (lo..=hi).contains(&theta.t1) as usize;
        notes.push(format!(
            "seed {seed}: {} iters, rho {:.4}, {:?}{}",
            last.iteration,
            last.rho,
            trace.stop,
            if wide.is_empty() {
                String::new()
            } else {
                format!(", iqr above prior on {wide:?}")
            }
        ));
    }
    for n in &notes {
        println!("    {n}");
    }
    let runs = runs as usize;
    let need = (0.8 * runs as f64).ceil() as usize;
    let elapsed = start.elapsed();
    let (a, b, c, d) = (
        monotone == runs,
        terminated == runs,
        concentrated == runs,
        cover_eta0 >= need && cover_t1 >= need,
    );
    outcome(
        a && b && c && d && elapsed < Duration::from_secs(600),
        format!(
            "(a) gamma non-increasing {monotone}/{runs} | (b) stopped with rho<0.01 before 150 {terminated}/{runs} | \
             (c) iqr <= prior {concentrated}/{runs} | (d) coverage eta0 {cover_eta0}/{runs}, t1 {cover_t1}/{runs} | {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn steady(id: &str, x0: f64, v: f64, seconds: f64) -> Trajectory {
    let n = (seconds / 0.1).round() as usize + 1;
    let xs: Vec<f64> = (0..n).map(|i| x0 + v * 0.1 * i as f64).collect();
    Trajectory::from_positions(id, 0.0, 0.1, &xs).unwrap()
}

fn c6_edie_oracle() -> Outcome {
    let lead = steady("a", 20.0, 10.0, 60.0);
    let back = steady("b", 0.0, 10.0, 60.0);
    let zones = build_zones(&[lead, back], -5.0, 5.0).unwrap();
    let worst_k = zones.iter().map(|z| (z.k - 0.05).abs()).fold(0.0, f64::max);
    let worst_q = zones.iter().map(|z| (z.q - 0.5).abs()).fold(0.0, f64::max);
    let adjusted = zones.iter().all(|z| (z.area / z.raw_area - 2.0).abs() < 1e-12);
    outcome(
        !zones.is_empty() && worst_k <= 0.001 && worst_q <= 0.01 && adjusted,
        format!(
            "{} zones, max |k-0.05| {worst_k:.2e} veh/m, max |q-0.5| {worst_q:.2e} veh/s, I/(I-1)=2 {adjusted}",
            zones.len()
        ),
    )
}

fn ellipse(n: usize, ccw: bool) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let a = if ccw { a } else { -a };
            (0.04 + 0.01 * a.cos(), 0.5 + 0.1 * a.sin())
        })
        .collect()
}

fn c7_orientation() -> Outcome {
    let ccw = cross_products(&ellipse(24, true), -5.0).unwrap().cross;
    let cw = cross_products(&ellipse(24, false), -5.0).unwrap().cross;
    let all_pos = ccw.iter().all(|c| *c > 0.0);
    let all_neg = cw.iter().all(|c| *c < 0.0);
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let leader = trapezoid_leader("lead", &LeaderProfile::default()).unwrap();
    let follower = simulate_follower(&leader, &p, &EabParams::constant(1.0)).unwrap();
    let th = HysteresisThresholds::median_high();
    let mut lp = HysteresisLoop::from_trajectories(&[leader, follower], p.w, 3.0).unwrap();
    let eq = lp.classify(&th);
    outcome(
        all_pos && all_neg && eq == HysteresisPattern::Nsl,
        format!(
            "ccw ellipse all positive {all_pos}, cw all negative {all_neg}, equilibrium pair {eq} (peak {:.1} vs H_T {})",
            lp.peak_cross().abs() * CROSS_UNIT_SCALE,
            th.h_t
        ),
    )
}

fn c8_pattern_hysteresis() -> Outcome {
    let profile = LeaderProfile::default();
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let leader = trapezoid_leader("lead", &profile).unwrap();
    let phases = detect_phases(&leader, DEFAULT_V_DROP_FRAC).unwrap();
    let th = HysteresisThresholds::median_high();
    let cases = [
        (
            PlantPattern::ConcaveEarly,
            (PatternCategory::Concave, Response::Early),
            HysteresisPattern::CcwMinus,
        ),
        (
            PlantPattern::ConvexEarly,
            (PatternCategory::Convex, Response::Early),
            HysteresisPattern::CwPlus,
        ),
        (
            PlantPattern::ConcaveConvex,
            (PatternCategory::ConcaveConvex, Response::NotApplicable),
            HysteresisPattern::Ccw,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (plant, (category, response), expected)) in cases.into_iter().enumerate() {
        let mut hits = 0;
        let mut labelled = 0;
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for i in 0..10u64 {
            let mut rng = substream(SUITE, 8, k as u64, i);
            let theta = sample_theta(plant, &profile, &mut rng);
            let pattern = classify_pattern(
                PatternInput::Params {
                    theta: &theta,
                    origin: leader.t0(),
                },
                ACC_DELTA_ETA_T,
                &phases,
                None,
            );
            labelled += (pattern.category == category && pattern.response == response) as usize;
            let follower = planted_follower("f", &leader, &p, &theta, 0.0, &mut rng).unwrap();
            let mut lp = HysteresisLoop::from_trajectories(&[leader.clone(), follower], p.w, 3.0).unwrap();
            let got = lp.classify(&th);
            hits += (got == expected) as usize;
            *seen.entry(got.to_string()).or_default() += 1;
        }
        pass &= hits >= 9 && labelled == 10;
        parts.push(format!(
            "{plant:?} -> {expected}: {hits}/10 (pattern label ok {labelled}/10, seen {seen:?})"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn point_mc(points: &[SweepPoint], pen: f64) -> &SweepPoint {
    points.iter().find(|p| p.penetration == pen).unwrap()
}

fn c9_platoon_direction() -> Outcome {
    let start = Instant::now();
    let leader = trapezoid_leader(
        "lead",
        &LeaderProfile {
            t_tail: 60.0,
            ..LeaderProfile::default()
        },
    )
    .unwrap();
    let convex = EabParams {
        eta0: 1.0,
        eta1: 0.8,
        eta2: 0.7,
        eta3: 1.0,
        eps0: -0.05,
        eps1: -0.1 / 9.0,
        eps2: 0.03,
        t1: 15.0,
    };
    let nd = EabParams {
        eta0: 1.0,
        eta1: 1.4,
        eta2: 1.4,
        eta3: 1.4,
        eps0: 0.08,
        eps1: 0.0,
        eps2: 0.0,
        t1: 16.0,
    };
    // Posteriors concentrated on one pattern: small jitter around the
    // centre, drawn so every particle keeps its pattern.
    let concentrated = |theta: EabParams, tag: u64| {
        let particles: Vec<(EabParams, f64)> = (0..100)
            .map(|i| {
                let mut rng = substream(SUITE, 9, tag, i);
                let mut a = theta.to_array();
                a[0] += rng.random_range(-0.02..0.02);
                a[7] += rng.random_range(-0.5..0.5);
                let t = EabParams::from_array(a);
                let shift = a[0] - theta.eta0;
                let t = EabParams {
                    eta1: t.eta1 + shift,
                    eta2: t.eta2 + shift,
                    eta3: t.eta3 + shift,
                    ..t
                };
                (t, 0.0)
            })
            .collect();
        ParticlePopulation::from_particles(particles, tag).unwrap()
    };
    let hdv_p = NewellParams::new(1.5, 7.0).unwrap();
    let acc_p = NewellParams::new(1.2, 8.0).unwrap();
    let spec = default_spec(
        leader.clone(),
        concentrated(nd, 1),
        concentrated(convex, 2),
        hdv_p,
        acc_p,
    );
    let mixed = sweep_penetration(&spec, &[0.0, 1.0], 50).unwrap();
    let (m0, m1) = (point_mc(&mixed, 0.0), point_mc(&mixed, 1.0));
    let falls = m1.magnitude < m0.magnitude;

    let same = concentrated(nd, 1);
    let flat_spec = default_spec(leader, same.clone(), same, hdv_p, hdv_p);
    let pens = [0.0, 0.5, 1.0];
    let flat = sweep_penetration(&flat_spec, &pens, 50).unwrap();
    let base = point_mc(&flat, 0.0);
    let flat_ok = flat.iter().all(|pt| {
        let se = pt.magnitude_se.hypot(base.magnitude_se);
        (pt.magnitude - base.magnitude).abs() <= 2.0 * se
    });
    let elapsed = start.elapsed();
    outcome(
        falls && flat_ok && elapsed < Duration::from_secs(600) && m0.completed + m1.completed > 0,
        format!(
            "magnitude 0% {:.0}±{:.0} ({} runs) vs 100% {:.0}±{:.0} ({} runs); identical posteriors {:?}; {:.0} s",
            m0.magnitude,
            m0.magnitude_se,
            m0.completed,
            m1.magnitude,
            m1.magnitude_se,
            m1.completed,
            flat.iter().map(|p| p.magnitude.round()).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c10_metric_identities() -> Outcome {
    let p = NewellParams::new(1.2, 8.0).unwrap();
    let leader = trapezoid_leader("lead", &LeaderProfile::default()).unwrap();
    let mut rng = substream(SUITE, 10, 0, 0);
    let theta = sample_theta(PlantPattern::ConcaveEarly, &LeaderProfile::default(), &mut rng);
    let follower = planted_follower("f", &leader, &p, &theta, 0.0, &mut rng).unwrap();
    let obs = HysteresisLoop::from_trajectories(&[leader.clone(), follower.clone()], p.w, 3.0).unwrap();
    let cmp = compare_hysteresis(std::slice::from_ref(&obs), std::slice::from_ref(&obs)).unwrap();
    let cmp_zero = cmp.d_center == 0.0 && cmp.d_sd == 0.0 && cmp.nrmse_cross == 0.0;

    let prior = PriorSpec::acc();
    let mut particles: Vec<(EabParams, f64)> = (0..99)
        .map(|i| (prior.sample(&mut substream(SUITE, 10, 1, i)).unwrap(), 1.0))
        .collect();
    particles.insert(37, (theta, 0.0));
    let pop = ParticlePopulation::from_particles(particles, 1).unwrap();
    let pair = CfPair::new(leader, follower, label(VehicleClass::Acc)).unwrap();
    let prepared = PreparedPair::new(&pair, &p, &MeasureOptions::default()).unwrap();
    let ws = ws_metric(&pop, &[prepared], &p, &GofWeights::default()).unwrap();
    let zeta_x = ws.pairs[0].zeta[0];

    let same = jsd(&pop, &pop).unwrap();
    let shifted: Vec<(EabParams, f64)> = pop
        .particles
        .iter()
        .map(|pt| {
            let mut a = pt.theta.to_array();
            a[7] += 100.0;
            (EabParams::from_array(a), pt.gof)
        })
        .collect();
    let far = ParticlePopulation::from_particles(shifted, 2).unwrap();
    let disjoint = jsd(&pop, &far).unwrap();
    outcome(
        cmp_zero && zeta_x < 1e-3 && same == 0.0 && disjoint == 1.0,
        format!(
            "compare(obs, obs) = ({}, {}, {}); ws zeta_x {zeta_x:.2e} m (particle {}); jsd(A,A) = {same}; disjoint jsd = {disjoint}",
            cmp.d_center, cmp.d_sd, cmp.nrmse_cross, ws.pairs[0].best_particle
        ),
    )
}

fn files_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn c11_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    let ds = generate(
        Scenario::Mixed,
        11,
        &GenerateOptions {
            pairs_per_group: 4,
            noise_sd: 0.5,
        },
    )
    .unwrap();
    write_dataset(&data, &ds).unwrap();
    let mut cfg = RunConfig {
        seed: 2024,
        ..RunConfig::default()
    };
    cfg.data.trajectories = data.join(TRAJECTORY_FILE);
    cfg.data.manifest = data.join(MANIFEST_FILE);
    cfg.asmc.k = 200;
    cfg.platoon.runs = 10;
    cfg.platoon.penetrations = vec![0.0, 0.5, 1.0];
    let run = |name: &str, threads: usize| {
        let mut c = cfg.clone();
        c.out_dir = root.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_pipeline(&c)).unwrap();
        c.out_dir
    };
    let a = run("a", 1);
    let b = run("b", 4);
    let numeric = |p: &Path| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "csv"));
    let fa: Vec<_> = files_under(&a).into_iter().filter(|p| numeric(p)).collect();
    let mut differing = Vec::new();
    for f in &fa {
        let rel = f.strip_prefix(&a).unwrap();
        if std::fs::read(f).ok() != std::fs::read(b.join(rel)).ok() {
            differing.push(rel.display().to_string());
        }
    }
    let count_b = files_under(&b).into_iter().filter(|p| numeric(p)).count();
    outcome(
        differing.is_empty() && fa.len() == count_b && fa.len() >= 8,
        format!(
            "{} numeric files compared (1 vs 4 threads), differing: {differing:?}",
            fa.len()
        ),
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("Newell identity", c1_newell_identity),
        ("EAB to AB degeneration", c2_ab_degeneration),
        ("eta round trip", c3_eta_round_trip),
        ("stage-1 recovery", c4_stage1_recovery),
        ("ASMC soundness", c5_asmc_soundness),
        ("Edie oracle", c6_edie_oracle),
        ("orientation correctness", c7_orientation),
        ("pattern to hysteresis consistency", c8_pattern_hysteresis),
        ("platoon directionality", c9_platoon_direction),
        ("metric identities", c10_metric_identities),
        ("determinism", c11_determinism),
    ];
    // cargo passes harness flags through; only bare numbers select criteria.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {n:>2} {:<34} {} [{:.1} s] {}",
            name,
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failed.push(n);
        }
    }
    println!(
        "acceptance: {}/{ran} criteria passed{}",
        ran - failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failing: {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
