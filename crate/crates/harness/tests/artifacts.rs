use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};
use toda_core::quantum::BasisSpec;
use toda_core::{Execution, Preset};
use toda_harness::config::Cutoff;
use toda_harness::experiment::{analyze_directory, Manifest, MANIFEST, REPORT};
use toda_harness::{run_experiment, CacheOutcome, ExperimentConfig, HarnessError, SpectralCache, Stages};

fn small_config(preset: Preset, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(preset);
    c.time.t_max = 60.0;
    c.time.samples = 241;
    c.quantum.hbar = vec![0.5];
    c.quantum.cutoff_margin = 4;
    c.quantum.check_extra = 0;
    c.classical.delta = vec![0.32, 0.16, 0.08];
    c.classical.m = 3000;
    c.poincare.orbits = 3;
    c.poincare.crossings = 20;
    c.run.output = out.to_path_buf();
    c
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn cache_cold_warm_and_corrupt() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = SpectralCache::new(tmp.path());
    let params = Preset::Chaotic.params();
    let basis = BasisSpec::triangular(0.5, 1.0, 24).unwrap();

    let (cold, o) = cache.get_or_build(&params, &basis, Execution::Parallel).unwrap();
    assert_eq!(o, CacheOutcome::Built);
    let (warm, o) = cache.get_or_build(&params, &basis, Execution::Parallel).unwrap();
    assert_eq!(o, CacheOutcome::Hit);
    assert_eq!(cold.eigenvalues(), warm.eigenvalues());
    assert_eq!(cold.eigenvectors(), warm.eigenvectors());

    let path = cache.path_for(&SpectralCache::key(&params, &basis));
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let (rebuilt, o) = cache.get_or_build(&params, &basis, Execution::Parallel).unwrap();
    assert_eq!(o, CacheOutcome::Rebuilt);
    assert_eq!(rebuilt.eigenvalues(), cold.eigenvalues());

    let mut flipped = fs::read(&path).unwrap();
    flipped[200] ^= 1;
    fs::write(&path, &flipped).unwrap();
    assert_eq!(
        cache.get_or_build(&params, &basis, Execution::Parallel).unwrap().1,
        CacheOutcome::Rebuilt
    );

    let other = BasisSpec::triangular(0.25, 1.0, 24).unwrap();
    assert_eq!(cache.get_or_build(&params, &other, Execution::Parallel).unwrap().1, CacheOutcome::Built);
    assert_eq!(cache.entries().unwrap().len(), 2);
    assert_eq!(cache.purge().unwrap(), 2);
    assert!(cache.entries().unwrap().is_empty());
}

#[test]
fn non_orthogonal_entry_is_a_hard_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = SpectralCache::new(tmp.path());
    let params = Preset::Regular.params();
    let basis = BasisSpec::triangular(0.5, 1.0, 12).unwrap();
    cache.get_or_build(&params, &basis, Execution::Sequential).unwrap();
    let path = cache.path_for(&SpectralCache::key(&params, &basis));
    let mut bytes = fs::read(&path).unwrap();
    // first eigenvector component, after the header and the eigenvalues
    let at = 76 + 8 * basis.dim();
    let x = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) + 0.5;
    bytes[at..at + 8].copy_from_slice(&x.to_le_bytes());
    let body = bytes.len() - 32;
    let digest = Sha256::digest(&bytes[..body]);
    bytes[body..].copy_from_slice(&digest);
    fs::write(&path, &bytes).unwrap();
    let err = cache.get_or_build(&params, &basis, Execution::Sequential).unwrap_err();
    assert!(err.is_numerical_guard(), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn artifact_directory_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = SpectralCache::new(tmp.path().join("cache"));
    let a = tmp.path().join("a");
    let cfg = small_config(Preset::Chaotic, &a);

    let first = run_experiment(&cfg, Stages::ALL, &cache, Execution::Parallel).unwrap();
    assert!(first.failures.is_empty(), "{:?}", first.failures);
    let snapshot = read_dir_sorted(&a);
    let names: Vec<&str> = snapshot.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "classical_delta_0.08.dat",
            "classical_delta_0.16.dat",
            "classical_delta_0.32.dat",
            "classical_delta_0.5.dat",
            MANIFEST,
            "poincare.dat",
            "quantum_hbar_0.5.dat",
            REPORT,
        ]
    );

    // every listed file is present with the recorded hash
    let manifest = Manifest::read(&a).unwrap();
    assert_eq!(manifest.files.len(), snapshot.len() - 1);
    for (name, hash) in &manifest.files {
        let bytes = &snapshot.iter().find(|(n, _)| n == name).unwrap().1;
        assert_eq!(&toda_harness::sha256_hex(bytes), hash);
    }
    assert_eq!(manifest.config().unwrap(), cfg);

    // warm cache, same directory: bitwise identical
    run_experiment(&cfg, Stages::ALL, &cache, Execution::Parallel).unwrap();
    assert_eq!(read_dir_sorted(&a), snapshot);

    // other directory, other scheduling: identical files and hashes
    let b = tmp.path().join("b");
    let mut cfg_b = cfg.clone();
    cfg_b.run.output = b.clone();
    cfg_b.run.workers = 3;
    let second = run_experiment(&cfg_b, Stages::ALL, &cache, Execution::Sequential).unwrap();
    assert_eq!(second.files, first.files);
    assert_eq!(cfg_b.hash(), cfg.hash());

    // re-analysis from the files alone reproduces the report
    let redo = analyze_directory(&a, &[]).unwrap();
    assert_eq!(redo.hash_of(REPORT), first.hash_of(REPORT));
    assert_eq!(read_dir_sorted(&a), snapshot);
}

#[test]
fn empty_hbar_schedule_gives_classical_only_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = small_config(Preset::Regular, &out);
    cfg.quantum.hbar.clear();
    cfg.classical.delta = vec![0.1];
    cfg.poincare.enabled = false;
    let summary = run_experiment(&cfg, Stages::ALL, &SpectralCache::new(tmp.path()), Execution::Parallel).unwrap();
    let names: Vec<&str> = summary.files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["classical_delta_0.1.dat", REPORT]);
    // a single curve cannot support a sweep analysis; the report says so
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].0, REPORT);
}

#[test]
fn failed_cells_are_recorded_and_others_proceed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = small_config(Preset::Regular, &out);
    cfg.quantum.cutoff = Cutoff::Fixed(5);
    let stages = Stages {
        poincare: false,
        analysis: false,
        ..Stages::ALL
    };
    let summary = run_experiment(&cfg, stages, &SpectralCache::new(tmp.path()), Execution::Parallel).unwrap();
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].0, "quantum_hbar_0.5.dat");
    assert!(summary.failures[0].2);
    assert_eq!(summary.files.len(), 4);
    let manifest = Manifest::read(&out).unwrap();
    assert_eq!(manifest.failures.len(), 1);
    assert!(manifest.failures[0].1.contains("truncation"));
    let err = summary.into_result().unwrap_err();
    assert!(matches!(err, HarnessError::Partial { failed: 1, total: 5, .. }));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn command_line_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let toda = env!("CARGO_BIN_EXE_toda");
    let run = |args: &[&str]| {
        Command::new(toda)
            .args(args)
            .env("TODA_CACHE_DIR", tmp.path().join("cache"))
            .env("RUST_LOG", "off")
            .output()
            .unwrap()
    };

    let shown = run(&["run", "--preset", "chaotic", "--m", "77", "--print-config"]);
    assert_eq!(shown.status.code(), Some(0));
    let text = String::from_utf8(shown.stdout).unwrap();
    let cfg = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg.classical.m, 77);
    assert_eq!(cfg.time.t_max, 200.0);

    let file = tmp.path().join("c.toda");
    fs::write(&file, "[classical]\nm = 5\n").unwrap();
    let from_file = run(&["run", "-c", file.to_str().unwrap(), "--set", "classical.seed=9", "--print-config"]);
    let cfg = ExperimentConfig::parse(&String::from_utf8(from_file.stdout).unwrap()).unwrap();
    assert_eq!((cfg.classical.m, cfg.classical.seed), (5, 9));

    assert_eq!(run(&["run", "--set", "classical.mass=3"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--bogus-flag"]).status.code(), Some(1));

    let out = tmp.path().join("q");
    let q = run(&[
        "quantum",
        "-o",
        out.to_str().unwrap(),
        "--hbar",
        "0.5",
        "--set",
        "quantum.cutoff=5",
    ]);
    assert_eq!(q.status.code(), Some(2), "{}", String::from_utf8_lossy(&q.stderr));

    let out = tmp.path().join("p");
    let p = run(&[
        "run",
        "-o",
        out.to_str().unwrap(),
        "--hbar",
        "0.5",
        "--delta",
        "0.3",
        "--m",
        "500",
        "--t-max",
        "2",
        "--samples",
        "9",
        "--set",
        "quantum.cutoff=5",
        "--set",
        "poincare.enabled=false",
    ]);
    assert_eq!(p.status.code(), Some(3), "{}", String::from_utf8_lossy(&p.stderr));

    let listed = run(&["cache", "list"]);
    assert_eq!(listed.status.code(), Some(0));
}
