//! Sweep execution: one cell per quantum `hbar`, classical `delta` and
//! surface of section, then the analysis report and the manifest.
//!
//! Cells run concurrently on a pool of `run.workers` threads and write
//! their own files. The manifest lists every file of the invocation with
//! its SHA-256, the full configuration and the cells that failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use toda_core::dynamics::{
    initial_states_on_line, poincare_section, PoincareOptions, SectionPoint, SectionSpec,
};
use toda_core::ensemble::{classical_entropy_curve, ClassicalRun, SAMPLER_VERSION};
use toda_core::quantum::{entanglement_curves, packet_deficit, BasisSpec, TRUNCATION_TOLERANCE};
use toda_core::{EntropyCurve, Execution, CODE_VERSION};

use crate::cache::{SpectralCache, FORMAT_VERSION};
use crate::config::{parse_entries, Cutoff, Entry, ExperimentConfig, SectionStart};
use crate::report::{analyze, format_report};
use crate::tables::{format_curves, format_poincare, parse_curves, write_atomic};
use crate::{sha256_hex, HarnessError};

pub const MANIFEST: &str = "manifest.txt";
pub const REPORT: &str = "report.txt";
pub const POINCARE: &str = "poincare.dat";

/// Which parts of the experiment an invocation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub quantum: bool,
    pub classical: bool,
    pub poincare: bool,
    pub analysis: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        quantum: true,
        classical: true,
        poincare: true,
        analysis: true,
    };
    pub const NONE: Stages = Stages {
        quantum: false,
        classical: false,
        poincare: false,
        analysis: false,
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cell {
    Quantum(f64),
    /// `sweep` is false for curves run only to pair with a quantum `hbar`.
    Classical { delta: f64, sweep: bool },
    Poincare,
}

impl Cell {
    fn file_name(&self) -> String {
        match self {
            Cell::Quantum(h) => quantum_file(*h),
            Cell::Classical { delta, .. } => classical_file(*delta),
            Cell::Poincare => POINCARE.into(),
        }
    }
}

pub fn quantum_file(hbar: f64) -> String {
    format!("quantum_hbar_{hbar}.dat")
}

pub fn classical_file(delta: f64) -> String {
    format!("classical_delta_{delta}.dat")
}

enum Produced {
    Curves([EntropyCurve; 2]),
    Section,
}

/// Outcome of one invocation.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    /// `(file name, sha256)` in manifest order.
    pub files: Vec<(String, String)>,
    /// `(cell, message, numerical guard)`.
    pub failures: Vec<(String, String, bool)>,
    pub cells: usize,
}

impl RunSummary {
    /// `Err(Partial)` if anything failed.
    pub fn into_result(self) -> Result<Self, HarnessError> {
        if self.failures.is_empty() {
            Ok(self)
        } else {
            Err(HarnessError::Partial {
                failed: self.failures.len(),
                total: self.cells,
                guard_only: self.failures.iter().all(|f| f.2),
            })
        }
    }

    pub fn hash_of(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, h)| h.as_str())
    }
}

/// Smallest triangular cutoff holding the initial packet centered at the
/// model's initial point to the truncation tolerance.
pub fn minimal_cutoff(config: &ExperimentConfig, hbar: f64) -> Result<usize, HarnessError> {
    let center = config.model.center();
    let scales = config.packet.scales(&config.model.params());
    for n in 1..=4000 {
        let basis = BasisSpec::triangular(hbar, config.quantum.omega, n).map_err(toda_core::Error::from)?;
        if packet_deficit(&center, scales, &basis).map_err(toda_core::Error::from)? < TRUNCATION_TOLERANCE {
            return Ok(n);
        }
    }
    Err(toda_core::Error::from(toda_core::quantum::QuantumError::Config(format!(
        "no cutoff up to 4000 holds the initial state at hbar = {hbar}"
    )))
    .into())
}

/// The cutoff a quantum cell uses at `hbar`.
pub fn cutoff_for(config: &ExperimentConfig, hbar: f64) -> Result<usize, HarnessError> {
    Ok(match config.quantum.cutoff {
        Cutoff::Fixed(n) => n,
        Cutoff::Auto => minimal_cutoff(config, hbar)? + config.quantum.cutoff_margin,
    })
}

fn common_header(config: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let p = config.model.params();
    let c = config.model.center();
    vec![
        ("code_version", CODE_VERSION.to_string()),
        ("config_hash", config.hash()),
        ("preset", config.model.name().to_string()),
        ("masses", format!("{} {}", p.m1, p.m2)),
        ("energy", p.energy.to_string()),
        ("center", format!("{} {} {} {}", c.q1, c.q2, c.p1, c.p2)),
        ("packet", config.packet.name().to_string()),
    ]
}

fn quantum_cell(
    config: &ExperimentConfig,
    hbar: f64,
    cache: &SpectralCache,
    exec: Execution,
) -> Result<(String, [EntropyCurve; 2]), HarnessError> {
    let params = config.model.params();
    let center = config.model.center();
    let times = config.time.times();
    let q = &config.quantum;
    let run = |n: usize| -> Result<[EntropyCurve; 2], HarnessError> {
        let basis = BasisSpec::triangular(hbar, q.omega, n).map_err(toda_core::Error::from)?;
        let (spec, outcome) = cache.get_or_build(&params, &basis, exec)?;
        info!("hbar = {hbar}, cutoff {n} (dimension {}): cache {outcome:?}", basis.dim());
        Ok(entanglement_curves(&spec, &center, config.packet, &times, exec)?)
    };
    let n = cutoff_for(config, hbar)?;
    let basis = BasisSpec::triangular(hbar, q.omega, n).map_err(toda_core::Error::from)?;
    let deficit = packet_deficit(&center, config.packet.scales(&params), &basis).map_err(toda_core::Error::from)?;
    let curves = run(n)?;
    let mut header = common_header(config);
    header.push(("omega", q.omega.to_string()));
    header.push(("cutoff", format!("n1 + n2 <= {n}")));
    header.push(("dimension", basis.dim().to_string()));
    header.push(("truncation_deficit", deficit.to_string()));
    if q.check_extra > 0 {
        let wider = run(n + q.check_extra)?;
        let difference = curves
            .iter()
            .zip(&wider)
            .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if !(difference <= q.check_tolerance) {
            return Err(HarnessError::Convergence {
                hbar,
                cutoff: n,
                wider: n + q.check_extra,
                difference,
                tolerance: q.check_tolerance,
            });
        }
        header.push((
            "truncation_check",
            format!("max |dS| = {difference} against cutoff {}", n + q.check_extra),
        ));
    }
    Ok((format_curves(&header, &curves), curves))
}

fn classical_cell(
    config: &ExperimentConfig,
    delta: f64,
    sweep: bool,
    exec: Execution,
) -> Result<(String, [EntropyCurve; 2]), HarnessError> {
    let c = &config.classical;
    let run = ClassicalRun {
        params: config.model.params(),
        center: config.model.center(),
        width: delta,
        packet: config.packet,
        m: c.m,
        seed: c.seed,
        dt: c.dt,
    };
    let curves = classical_entropy_curve(&run, delta, &config.time.times(), exec)?;
    let mut header = common_header(config);
    header.push(("dt", c.dt.to_string()));
    header.push(("sampler_version", SAMPLER_VERSION.to_string()));
    header.push(("role", if sweep { "sweep" } else { "paired" }.to_string()));
    Ok((format_curves(&header, &curves), curves))
}

/// Surface-of-section points for the configured starting states.
pub fn section_points(config: &ExperimentConfig, exec: Execution) -> Result<(Vec<SectionPoint>, usize), HarnessError> {
    let p = &config.poincare;
    let params = config.model.params();
    let section = SectionSpec::default();
    let states = match p.start {
        SectionStart::Line => initial_states_on_line(&section, &params, p.orbits, 0.0),
        SectionStart::Center => vec![config.model.center()],
    };
    let options = PoincareOptions {
        n_crossings: p.crossings,
        dt: p.dt,
        max_time: p.max_time,
        refine: p.refine,
        ..PoincareOptions::default()
    };
    let result = poincare_section(&states, &section, &params, &options, exec).map_err(toda_core::Error::from)?;
    if !result.incomplete.is_empty() {
        warn!(
            "{} of {} orbits ran out of time before {} crossings",
            result.incomplete.len(),
            states.len(),
            p.crossings
        );
    }
    Ok((result.points, result.incomplete.len()))
}

fn poincare_cell(config: &ExperimentConfig, exec: Execution) -> Result<String, HarnessError> {
    let p = &config.poincare;
    let (points, incomplete) = section_points(config, exec)?;
    let mut header = common_header(config);
    header.push(("section", "q2 = 0 crossed with p2 > 0".into()));
    header.push(("plotted", "q1 p1".into()));
    header.push((
        "start",
        match p.start {
            SectionStart::Line => format!("{} states along p1 = 0", p.orbits),
            SectionStart::Center => "initial-state center".into(),
        },
    ));
    header.push(("crossings_per_orbit", p.crossings.to_string()));
    header.push(("dt", p.dt.to_string()));
    header.push(("newton_refinement", p.refine.to_string()));
    header.push(("incomplete_orbits", incomplete.to_string()));
    Ok(format_poincare(&header, &points))
}

fn run_cell(
    cell: Cell,
    config: &ExperimentConfig,
    dir: &Path,
    cache: &SpectralCache,
    exec: Execution,
) -> Result<(String, Produced), HarnessError> {
    let (text, produced) = match cell {
        Cell::Quantum(h) => {
            let (t, c) = quantum_cell(config, h, cache, exec)?;
            (t, Produced::Curves(c))
        }
        Cell::Classical { delta, sweep } => {
            let (t, c) = classical_cell(config, delta, sweep, exec)?;
            (t, Produced::Curves(c))
        }
        Cell::Poincare => (poincare_cell(config, exec)?, Produced::Section),
    };
    write_atomic(&dir.join(cell.file_name()), text.as_bytes())?;
    Ok((sha256_hex(text.as_bytes()), produced))
}

#[cfg(feature = "parallel")]
fn run_cells<R: Send>(workers: usize, cells: &[Cell], f: impl Fn(Cell) -> R + Sync) -> Result<Vec<R>, HarnessError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::io("thread pool", std::io::Error::other(e)))?;
    Ok(pool.install(|| cells.par_iter().map(|c| f(*c)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_cells<R: Send>(_workers: usize, cells: &[Cell], f: impl Fn(Cell) -> R + Sync) -> Result<Vec<R>, HarnessError> {
    Ok(cells.iter().map(|c| f(*c)).collect())
}

/// Runs the selected stages of `config` into `config.run.output`.
///
/// Cell failures do not abort the run; they are listed in the manifest and
/// in [`RunSummary::failures`]. Only configuration and I/O problems outside
/// the cells return `Err`.
pub fn run_experiment(
    config: &ExperimentConfig,
    stages: Stages,
    cache: &SpectralCache,
    exec: Execution,
) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let dir = config.run.output.clone();
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    remove_previous_artifacts(&dir)?;

    let mut cells = Vec::new();
    if stages.quantum {
        cells.extend(config.quantum.hbar.iter().map(|&h| Cell::Quantum(h)));
    }
    if stages.classical {
        let sweep = &config.classical.delta;
        for d in config.classical_deltas() {
            let in_sweep = sweep.iter().any(|x| x.to_bits() == d.to_bits());
            if in_sweep || stages.quantum {
                cells.push(Cell::Classical {
                    delta: d,
                    sweep: in_sweep,
                });
            }
        }
    }
    if stages.poincare && config.poincare.enabled {
        cells.push(Cell::Poincare);
    }
    info!("running {} cells into {}", cells.len(), dir.display());

    let results = run_cells(config.run.workers, &cells, |cell| run_cell(cell, config, &dir, cache, exec))?;

    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut quantum = Vec::new();
    let mut sweep = Vec::new();
    let mut paired = Vec::new();
    for (cell, result) in cells.iter().zip(results) {
        let name = cell.file_name();
        match result {
            Ok((hash, produced)) => {
                files.push((name, hash));
                if let Produced::Curves(c) = produced {
                    match *cell {
                        Cell::Quantum(h) => quantum.push((h, c)),
                        Cell::Classical { delta, sweep: true } => sweep.push((delta, c)),
                        Cell::Classical { delta, .. } => paired.push((delta, c)),
                        Cell::Poincare => {}
                    }
                }
            }
            Err(e) => {
                warn!("cell {name} failed: {e}");
                failures.push((name, e.to_string(), e.is_numerical_guard()));
            }
        }
    }
    let mut total = cells.len();

    if stages.analysis && !(quantum.is_empty() && sweep.is_empty()) {
        total += 1;
        let report = analyze(config.model.name(), &config.analysis, &sweep, &paired, &quantum);
        let text = format_report(&common_header(config), &report);
        write_atomic(&dir.join(REPORT), text.as_bytes())?;
        files.push((REPORT.to_string(), sha256_hex(text.as_bytes())));
        if !report.errors.is_empty() {
            failures.push((REPORT.to_string(), report.errors.join("; "), true));
        }
    }

    write_manifest(&dir, config, &files, &failures)?;
    Ok(RunSummary {
        dir,
        files,
        failures,
        cells: total,
    })
}

/// Recomputes the report from the curve files listed in `dir`'s manifest,
/// with analysis settings from `overrides` applied to the recorded config.
pub fn analyze_directory(dir: &Path, overrides: &[Entry]) -> Result<RunSummary, HarnessError> {
    let manifest = Manifest::read(dir)?;
    let mut entries = manifest.config_entries;
    entries.extend(overrides.iter().cloned());
    let mut config = ExperimentConfig::from_entries(&entries)?;
    config.run.output = dir.to_path_buf();

    let mut quantum = Vec::new();
    let mut sweep = Vec::new();
    let mut paired = Vec::new();
    let mut files: Vec<(String, String)> = Vec::new();
    for (name, hash) in &manifest.files {
        if name == REPORT {
            continue;
        }
        files.push((name.clone(), hash.clone()));
        if !name.ends_with(".dat") || name == POINCARE {
            continue;
        }
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let (curves, table) = parse_curves(&text).map_err(|message| HarnessError::Format {
            path: path.clone(),
            message,
        })?;
        let param = curves[0].tag.scale();
        match (table.get("kind"), table.get("role")) {
            (Some("quantum"), _) => quantum.push((param, curves)),
            (_, Some("paired")) => paired.push((param, curves)),
            _ => sweep.push((param, curves)),
        }
    }
    let by_param = |v: &mut Vec<(f64, [EntropyCurve; 2])>| v.sort_by(|a, b| b.0.total_cmp(&a.0));
    by_param(&mut quantum);
    by_param(&mut sweep);
    by_param(&mut paired);

    let report = analyze(config.model.name(), &config.analysis, &sweep, &paired, &quantum);
    let text = format_report(&common_header(&config), &report);
    write_atomic(&dir.join(REPORT), text.as_bytes())?;
    files.push((REPORT.to_string(), sha256_hex(text.as_bytes())));
    let mut failures: Vec<(String, String, bool)> = manifest
        .failures
        .into_iter()
        .filter(|(cell, _, _)| cell != REPORT)
        .collect();
    if !report.errors.is_empty() {
        failures.push((REPORT.to_string(), report.errors.join("; "), true));
    }
    write_manifest(dir, &config, &files, &failures)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        cells: files.len() + failures.len(),
        files,
        failures,
    })
}

fn write_manifest(
    dir: &Path,
    config: &ExperimentConfig,
    files: &[(String, String)],
    failures: &[(String, String, bool)],
) -> Result<(), HarnessError> {
    let mut s = String::from("[manifest]\n");
    s += &format!("code_version = {CODE_VERSION}\n");
    s += &format!("config_hash = {}\n", config.hash());
    s += &format!("sampler_version = {SAMPLER_VERSION}\n");
    s += &format!("cache_format = {FORMAT_VERSION}\n");
    s += "\n[files]\n";
    let mut sorted: Vec<&(String, String)> = files.iter().collect();
    sorted.sort();
    for (name, hash) in sorted {
        s += &format!("{name} = {hash}\n");
    }
    s += "\n[failures]\n";
    for (cell, message, guard) in failures {
        let kind = if *guard { "numerical" } else { "error" };
        s += &format!("{cell} = {kind}: {message}\n");
    }
    s += "\n";
    s += &config.to_text();
    write_atomic(&dir.join(MANIFEST), s.as_bytes())
}

/// A parsed manifest.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub meta: BTreeMap<String, String>,
    pub files: Vec<(String, String)>,
    pub failures: Vec<(String, String, bool)>,
    /// The recorded configuration as assignments.
    pub config_entries: Vec<Entry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        Self::parse(&text).map_err(|e| HarnessError::Format {
            path,
            message: e.to_string(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, crate::ConfigError> {
        let mut meta = BTreeMap::new();
        let mut files = Vec::new();
        let mut failures = Vec::new();
        let mut config_entries = Vec::new();
        for e in parse_entries(text)? {
            let (section, key) = e.key.split_once('.').unwrap();
            match section {
                "manifest" => {
                    meta.insert(key.to_string(), e.value);
                }
                "files" => files.push((key.to_string(), e.value)),
                "failures" => {
                    let (kind, message) = e.value.split_once(": ").unwrap_or(("error", &e.value));
                    failures.push((key.to_string(), message.to_string(), kind == "numerical"));
                }
                _ => config_entries.push(e),
            }
        }
        Ok(Self {
            meta,
            files,
            failures,
            config_entries,
        })
    }

    pub fn config(&self) -> Result<ExperimentConfig, crate::ConfigError> {
        ExperimentConfig::from_entries(&self.config_entries)
    }
}

/// Deletes the files an earlier manifest in `dir` listed, so the directory
/// holds exactly one invocation's artifacts.
fn remove_previous_artifacts(dir: &Path) -> Result<(), HarnessError> {
    if !dir.join(MANIFEST).exists() {
        return Ok(());
    }
    let Ok(old) = Manifest::read(dir) else {
        warn!("ignoring unreadable manifest in {}", dir.display());
        return Ok(());
    };
    for (name, _) in old.files {
        // names come from a file we wrote, but stay inside the directory
        if name.contains('/') || name.contains('\\') || name.starts_with('.') {
            continue;
        }
        let path = dir.join(&name);
        if let Err(e) = fs::remove_file(&path) {
            if e.kind() != std::io::ErrorKind::NotFound {
                return Err(HarnessError::io(&path, e));
            }
        }
    }
    Ok(())
}
