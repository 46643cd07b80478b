use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const EAB: &str = env!("CARGO_BIN_EXE_eab");

fn eab(args: &[&str]) -> Output {
    Command::new(EAB).args(args).output().expect("spawn eab")
}

fn ok(args: &[&str]) -> Output {
    let out = eab(args);
    assert!(
        out.status.success(),
        "eab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")
}

#[test]
fn generate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        ok(&[
            "generate",
            "--profile",
            "convex_acc",
            "--seed",
            seed,
            "--pairs",
            "3",
            "--out",
            s(out),
        ]);
    }
    for f in ["trajectories.csv", "manifest.csv", "truth.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_ne!(
        std::fs::read(a.join("truth.json")).unwrap(),
        std::fs::read(c.join("truth.json")).unwrap()
    );
}

#[test]
fn unknown_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = eab(&["generate", "--profile", "wobbly", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown profile"));
}

#[test]
fn noiseless_newell_data_recovers_the_plant() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "generate",
        "--profile",
        "equilibrium",
        "--seed",
        "1",
        "--pairs",
        "4",
        "--out",
        s(&data),
    ]);
    let out = ok(&[
        "calibrate-newell",
        "--data",
        s(&data),
        "--out",
        s(&dir.path().join("out")),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    let truth: serde_json::Value = serde_json::from_slice(&std::fs::read(data.join("truth.json")).unwrap()).unwrap();
    let (_, plant) = truth["newell"].as_object().unwrap().iter().next().unwrap();
    let tau = plant["tau"].as_f64().unwrap();
    assert!(text.contains(&format!("tau {tau:.2} s")), "{text} vs {tau}");
}

#[test]
fn invalid_weights_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[gof]\nc1 = 0.5\nc2 = 0.5\nc3 = 0.5\n[data]\ntrajectories = \"missing.csv\"\n",
    )
    .unwrap();
    let out = eab(&["pipeline", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sum"), "{err}");
    assert!(!err.contains("missing.csv"), "data was touched: {err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn desk_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&[
        "generate",
        "--profile",
        "mixed",
        "--seed",
        "7",
        "--pairs",
        "4",
        "--noise",
        "0.5",
        "--out",
        s(&data),
    ]);
    let run = ok(&[
        "pipeline",
        "--config",
        s(&desk_config()),
        "--data",
        s(&data),
        "--out",
        s(&out),
    ]);
    let summary = String::from_utf8_lossy(&run.stdout);
    for f in [
        "config.toml",
        "calibration.json",
        "asmc.json",
        "report.json",
        "summary.txt",
        "penetration.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let groups: Vec<_> = std::fs::read_dir(out.join("groups"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert!(!groups.is_empty());
    for g in &groups {
        assert!(
            g.join("posterior.csv").is_file() && g.join("diagnostics.csv").is_file(),
            "{}",
            g.display()
        );
    }
    let svgs = std::fs::read_dir(out.join("plots"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"));
    assert!(svgs.count() > groups.len());

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    let points = report["penetration"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 6);

    // The report command renders the stored report unchanged.
    let again = ok(&["report", s(&out)]);
    assert_eq!(String::from_utf8_lossy(&again.stdout), summary);
    assert_eq!(std::fs::read_to_string(out.join("summary.txt")).unwrap(), summary);

    // Partial commands reuse the stored posteriors.
    ok(&[
        "classify",
        "--config",
        s(&desk_config()),
        "--data",
        s(&data),
        "--out",
        s(&out),
    ]);
    let classify: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("classify.json")).unwrap()).unwrap();
    let groups = report["groups"].as_object().unwrap();
    assert!(!groups.is_empty());
    for (name, g) in groups {
        assert_eq!(classify["groups"][name]["pattern_table"], g["pattern_table"], "{name}");
    }
}
