use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use potminer_cli::pipeline::{self as stages, sha256_hex, Manifest, Stage};

fn potminer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_potminer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = potminer(args);
    assert!(
        out.status.success(),
        "potminer {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 6] = ["--codewords", "40", "--restarts", "2", "--k-range", "2:4"];

/// A six-shot dataset and a complete small pipeline run.
fn small_run(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("data.txt");
    ok(&["synth", "--shots", "6", "--seed", "3", s(&data)]);
    let out = dir.join("run");
    let mut args = vec!["pipeline", s(&data), s(&out)];
    args.extend(SMALL);
    ok(&args);
    (data, out)
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn pipeline_writes_every_artifact_into_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, out) = small_run(tmp.path());
    let manifest = Manifest::load(&out).unwrap();
    assert_eq!(manifest.completed, Stage::ALL.to_vec());
    assert_eq!(manifest.dataset, data);
    assert_eq!(
        manifest.dataset_sha256,
        sha256_hex(&std::fs::read(&data).unwrap())
    );
    assert_eq!(manifest.seeds.codebook, 0);
    for name in [
        stages::CONFIG,
        stages::STATS,
        stages::POTS,
        stages::CODEBOOK,
        stages::INTERVALS,
        stages::CLUSTERS,
        stages::METRICS,
        stages::BEHAVIORS,
        stages::REPORT_SVG,
        stages::GALLERY,
    ] {
        let entry = manifest
            .artifacts
            .iter()
            .find(|a| a.name == name)
            .unwrap_or_else(|| panic!("{name} missing from manifest"));
        let bytes = std::fs::read(out.join(name)).unwrap();
        assert_eq!(entry.sha256, sha256_hex(&bytes), "{name}");
        assert_eq!(entry.bytes, bytes.len() as u64);
    }
    assert_eq!(read(&out.join(stages::METRICS)).lines().count(), 4);
    assert!(read(&out.join(stages::GALLERY)).starts_with("# k 4\n"));
}

#[test]
fn stage_flag_stops_early() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.txt");
    ok(&["synth", "--shots", "2", s(&data)]);
    let out = tmp.path().join("run");
    ok(&["pipeline", "--stage", "pot", s(&data), s(&out)]);
    let manifest = Manifest::load(&out).unwrap();
    assert_eq!(manifest.completed, vec![Stage::Stats, Stage::Pot]);
    assert!(out.join(stages::POTS).exists());
    assert!(!out.join(stages::CODEBOOK).exists());
}

#[test]
fn stage_subcommands_reproduce_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, out) = small_run(tmp.path());
    let dir = tmp.path();
    let file = |name: &str| out.join(name);

    ok(&["stats", s(&data), s(&dir.join("stats.txt"))]);
    assert_eq!(read(&dir.join("stats.txt")), read(&file(stages::STATS)));

    ok(&["pot", s(&data), s(&dir.join("pots.txt"))]);
    assert_eq!(read(&dir.join("pots.txt")), read(&file(stages::POTS)));

    let (own_pots, own_cb) = (dir.join("pots.txt"), dir.join("cb"));
    ok(&[
        "codebook",
        "--k",
        "40",
        "--restarts",
        "2",
        s(&own_pots),
        s(&own_cb),
    ]);
    assert_eq!(read(&dir.join("cb")), read(&file(stages::CODEBOOK)));

    let codebook = file(stages::CODEBOOK);
    let pots = file(stages::POTS);
    ok(&[
        "partition",
        "--codebook",
        s(&codebook),
        s(&data),
        s(&pots),
        s(&dir.join("intervals.txt")),
    ]);
    assert_eq!(
        read(&dir.join("intervals.txt")),
        read(&file(stages::INTERVALS))
    );

    let intervals = file(stages::INTERVALS);
    ok(&[
        "cluster",
        "--k-range",
        "2:4",
        "--codebook",
        s(&codebook),
        s(&pots),
        s(&intervals),
        s(&dir.join("clusters.txt")),
    ]);
    assert_eq!(
        read(&dir.join("clusters.txt")),
        read(&file(stages::CLUSTERS))
    );

    ok(&[
        "eval",
        s(&data),
        s(&intervals),
        s(&file(stages::CLUSTERS)),
        s(&dir.join("metrics.csv")),
    ]);
    assert_eq!(read(&dir.join("metrics.csv")), read(&file(stages::METRICS)));

    let svg = read(&file(stages::REPORT_SVG));
    std::fs::remove_file(file(stages::REPORT_SVG)).unwrap();
    ok(&["report", s(&out)]);
    assert_eq!(read(&file(stages::REPORT_SVG)), svg);
}

#[test]
fn invalid_input_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.txt");
    ok(&["synth", "--shots", "1", s(&data)]);
    let out = tmp.path().join("run");

    let bad_flag = potminer(&["pipeline", "--theta-p", "0", s(&data), s(&out)]);
    assert!(!bad_flag.status.success());
    assert!(String::from_utf8_lossy(&bad_flag.stderr).contains("theta_p"));

    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "[codebook]\nk = 0\n").unwrap();
    assert!(
        !potminer(&["pipeline", "--config", s(&config), s(&data), s(&out)])
            .status
            .success()
    );

    std::fs::write(&config, "[nonsense]\n").unwrap();
    assert!(
        !potminer(&["pot", "--config", s(&config), s(&data), s(&out)])
            .status
            .success()
    );

    let garbage = tmp.path().join("garbage.txt");
    std::fs::write(&garbage, "shot x\n").unwrap();
    assert!(!potminer(&["stats", s(&garbage), s(&out)]).status.success());

    assert!(!potminer(&["--threads", "0", "synth", s(&data)])
        .status
        .success());
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.txt");
    ok(&["synth", "--shots", "2", s(&data)]);
    let config = tmp.path().join("cfg.toml");
    std::fs::write(
        &config,
        "[selection]\ntheta_p = 0.3\n[codebook]\nseed = 9\n",
    )
    .unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "pipeline",
        "--config",
        s(&config),
        "--n",
        "8",
        "--stage",
        "stats",
        s(&data),
        s(&out),
    ]);
    let written = potminer_cli::PipelineConfig::load(&out.join(stages::CONFIG)).unwrap();
    assert_eq!(written.selection.theta_p, 0.3);
    assert_eq!(written.selection.n, 8);
    assert_eq!(written.codebook.seed, 9);
    assert_eq!(Manifest::load(&out).unwrap().seeds.codebook, 9);
}

#[test]
fn shipped_configs_match_the_defaults() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    assert_eq!(
        potminer_cli::PipelineConfig::load(&root.join("default.toml")).unwrap(),
        potminer_cli::PipelineConfig::default()
    );
    assert_eq!(
        potminer::SynthConfig::from_toml(&read(&root.join("benchmark.toml"))).unwrap(),
        potminer::SynthConfig::benchmark()
    );
}
