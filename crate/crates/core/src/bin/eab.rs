use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use eab_core::config::{parse_list, RunConfig};
use eab_core::pipeline::{self, Stages};
use eab_core::report::{read_report, render_summary, REPORT_FILE};
use eab_core::synthetic::{generate, write_dataset, GenerateOptions, Scenario, MANIFEST_FILE, TRAJECTORY_FILE};

#[derive(Parser)]
#[command(
    name = "eab",
    version,
    about = "Stochastic EAB car-following calibration and hysteresis analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every config-driven command. Explicit flags win over the
/// config file.
#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset directory holding trajectories.csv and manifest.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Particle count.
    #[arg(long)]
    k: Option<usize>,
    /// Share of particles kept alive per iteration.
    #[arg(long)]
    lambda: Option<f64>,
    /// Monte-Carlo runs per penetration rate.
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated ACC penetration rates, e.g. "0,0.5,1".
    #[arg(long)]
    penetrations: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(d) = &self.data {
            cfg.data.trajectories = d.join(TRAJECTORY_FILE);
            cfg.data.manifest = d.join(MANIFEST_FILE);
        }
        if let Some(k) = self.k {
            cfg.asmc.k = k;
        }
        if let Some(l) = self.lambda {
            cfg.asmc.lambda = l;
        }
        if let Some(r) = self.runs {
            cfg.platoon.runs = r;
        }
        if let Some(p) = &self.penetrations {
            cfg.platoon.penetrations = parse_list(p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted parameters.
    Generate {
        /// One of concave_acc, convex_acc, concave_convex_acc,
        /// nondecreasing_hdv, equilibrium, mixed.
        #[arg(long, default_value = "mixed")]
        profile: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        /// Gaussian position noise on followers (m).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Train/test split and Newell grid calibration per group.
    CalibrateNewell(Common),
    /// Newell calibration followed by ABC-ASMC per group.
    CalibrateEab(Common),
    /// Reaction-pattern table from stored posteriors.
    Classify(Common),
    /// Reproduction distances and posterior distances from stored posteriors.
    Validate(Common),
    /// Hysteresis loops and their classification from stored posteriors.
    Hysteresis(Common),
    /// Mixed-platoon penetration sweep from stored posteriors.
    Platoon(Common),
    /// Every stage end to end.
    Pipeline(Common),
    /// Print the summary of an existing report.
    Report {
        /// Report file, or an output directory containing report.json.
        #[arg(default_value = "out")]
        path: PathBuf,
    },
}

fn analysis(common: &Common, stages: Stages, name: &str) -> Result<()> {
    let cfg = common.resolve()?;
    let groups = pipeline::load_groups(&cfg).context("load")?;
    let calib = pipeline::read_calibration(&cfg.out_dir).context("reading calibration; run calibrate-eab first")?;
    let posts =
        pipeline::read_posteriors(&cfg.out_dir, &groups).context("reading posteriors; run calibrate-eab first")?;
    let report = pipeline::analyze(&cfg, &groups, &calib, &posts, stages)?;
    let path = pipeline::emit_report(&cfg, &report, name)?;
    print!("{}", render_summary(&report));
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(REPORT_FILE)
    } else {
        path.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            profile,
            seed,
            out,
            pairs,
            noise,
        } => {
            let scenario: Scenario = profile.parse()?;
            if pairs == 0 {
                bail!("--pairs must be at least 1");
            }
            if noise.is_nan() || noise < 0.0 {
                bail!("--noise must be non-negative");
            }
            let ds = generate(
                scenario,
                seed,
                &GenerateOptions {
                    pairs_per_group: pairs,
                    noise_sd: noise,
                },
            )?;
            write_dataset(&out, &ds)?;
            eprintln!("wrote {} pairs to {}", ds.manifest.len(), out.display());
        }
        Command::CalibrateNewell(c) => {
            let cfg = c.resolve()?;
            let groups = pipeline::load_groups(&cfg).context("load")?;
            let calib = pipeline::stage_newell(&cfg, &groups).context("stage1")?;
            for (name, g) in &calib {
                println!(
                    "{name}: tau {:.2} s, delta {:.2} m, w {:.3} m/s ({} train, {} test)",
                    g.newell.tau,
                    g.newell.delta,
                    g.newell.w,
                    g.train.len(),
                    g.test.len()
                );
            }
        }
        Command::CalibrateEab(c) => {
            let cfg = c.resolve()?;
            let groups = pipeline::load_groups(&cfg).context("load")?;
            let calib = pipeline::stage_newell(&cfg, &groups).context("stage1")?;
            let posts = pipeline::stage_asmc(&cfg, &groups, &calib).context("asmc")?;
            for (name, p) in &posts {
                let last = p.trace.last().expect("trace has the initial row");
                println!(
                    "{name}: {} iterations, stop {:?}, gamma {:.5}, rho {:.4}",
                    last.iteration, p.record.stop, last.gamma, last.rho
                );
            }
        }
        Command::Classify(c) => analysis(
            &c,
            Stages {
                classify: true,
                ..Stages::NONE
            },
            "classify.json",
        )?,
        Command::Validate(c) => analysis(
            &c,
            Stages {
                validate: true,
                ..Stages::NONE
            },
            "validate.json",
        )?,
        Command::Hysteresis(c) => analysis(
            &c,
            Stages {
                hysteresis: true,
                ..Stages::NONE
            },
            "hysteresis.json",
        )?,
        Command::Platoon(c) => analysis(
            &c,
            Stages {
                platoon: true,
                ..Stages::NONE
            },
            "platoon.json",
        )?,
        Command::Pipeline(c) => {
            let cfg = c.resolve()?;
            let report = pipeline::run_pipeline(&cfg)?;
            print!("{}", render_summary(&report));
            eprintln!("wrote {}", cfg.out_dir.join(REPORT_FILE).display());
        }
        Command::Report { path } => {
            let report = read_report(&report_path(&path))?;
            print!("{}", render_summary(&report));
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        // Library errors already embed their causes, so only append the ones
        // that add something.
        let mut msg = e.to_string();
        for cause in e.chain().skip(1) {
            let s = cause.to_string();
            if !msg.contains(&s) {
                msg = format!("{msg}: {s}");
            }
        }
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
