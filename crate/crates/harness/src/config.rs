//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every setting has a default that depends only on the model preset, and
//! [`ExperimentConfig::to_text`] writes all of them out, so a config parsed
//! back from its own text compares equal to the original.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;
use toda_core::analysis::{FitSettings, GrowthModel};
use toda_core::dynamics::{total_energy, ModelParams, PacketWidth, PhaseState, Preset};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

/// The Hamiltonian and the center of the initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelChoice {
    Preset(Preset),
    Custom { params: ModelParams, center: PhaseState },
}

impl ModelChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ModelChoice::Preset(p) => p.name(),
            ModelChoice::Custom { .. } => "custom",
        }
    }

    pub fn params(&self) -> ModelParams {
        match self {
            ModelChoice::Preset(p) => p.params(),
            ModelChoice::Custom { params, .. } => *params,
        }
    }

    pub fn center(&self) -> PhaseState {
        match self {
            ModelChoice::Preset(p) => p.center(),
            ModelChoice::Custom { center, .. } => *center,
        }
    }
}

/// Uniform sampling of `[0, t_max]` with both ends included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        let n = (self.samples - 1) as f64;
        (0..self.samples).map(|k| self.t_max * k as f64 / n).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / (self.samples - 1) as f64
    }
}

/// Triangular cutoff `n1 + n2 <= N` of the oscillator product basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cutoff {
    /// Smallest `N` holding the initial state to the truncation tolerance,
    /// plus `cutoff_margin`.
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumConfig {
    pub hbar: Vec<f64>,
    pub omega: f64,
    pub cutoff: Cutoff,
    pub cutoff_margin: usize,
    /// Repeat each run at cutoff `N + check_extra` and compare; 0 skips it.
    pub check_extra: usize,
    pub check_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalConfig {
    /// Cell areas; the ensemble width equals the cell area.
    pub delta: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    pub dt: f64,
    /// Also run `delta = hbar` for every `hbar` of the quantum schedule.
    pub paired: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionStart {
    /// `orbits` states spread along `p1 = 0` on the section.
    Line,
    /// The single orbit through the initial-state center.
    Center,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareConfig {
    pub enabled: bool,
    pub start: SectionStart,
    pub orbits: usize,
    pub crossings: usize,
    pub dt: f64,
    pub max_time: f64,
    pub refine: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub output: PathBuf,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    /// Initial packet widths, shared by the quantum and classical runs.
    pub packet: PacketWidth,
    pub time: TimeGrid,
    pub quantum: QuantumConfig,
    pub classical: ClassicalConfig,
    pub analysis: FitSettings,
    pub poincare: PoincareConfig,
    pub run: RunConfig,
}

/// One `section.key = value` assignment, from a file or a command-line flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Entry {
    /// Parses `section.key=value`.
    pub fn from_assignment(s: &str) -> Result<Self, ConfigError> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("expected section.key=value, got `{s}`")))?;
        let key = k.trim();
        if !key.contains('.') {
            return Err(ConfigError::Invalid(format!("`{key}` lacks a section prefix")));
        }
        Ok(Entry {
            key: key.to_string(),
            value: v.trim().to_string(),
            line: 0,
        })
    }
}

/// Splits config text into assignments, qualifying each key with its section.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: "unterminated section header".into(),
                })?
                .trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("bad section name `{name}`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected key = value, got `{s}`"),
            });
        };
        let Some(sec) = &section else {
            return Err(ConfigError::Syntax {
                line,
                message: "assignment before the first section header".into(),
            });
        };
        out.push(Entry {
            key: format!("{sec}.{}", k.trim()),
            value: v.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| bad(key, format!("cannot parse `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{v}`"))),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

const CUSTOM_KEYS: [&str; 7] = ["m1", "m2", "energy", "q1", "q2", "p1", "p2"];

impl ExperimentConfig {
    /// Defaults for one of the two studied initial conditions.
    pub fn preset(preset: Preset) -> Self {
        Self::for_model(ModelChoice::Preset(preset))
    }

    pub fn for_model(model: ModelChoice) -> Self {
        // the regular curves saturate late, so they get a longer window
        let (time, analysis, poincare) = match model {
            ModelChoice::Preset(Preset::Regular) => (
                TimeGrid {
                    t_max: 400.0,
                    samples: 1601,
                },
                FitSettings::regular(),
                (SectionStart::Line, 4000),
            ),
            ModelChoice::Preset(Preset::Chaotic) => (
                TimeGrid {
                    t_max: 200.0,
                    samples: 801,
                },
                FitSettings::chaotic(),
                (SectionStart::Center, 4000),
            ),
            ModelChoice::Custom { .. } => (
                TimeGrid {
                    t_max: 100.0,
                    samples: 401,
                },
                FitSettings::regular(),
                (SectionStart::Line, 500),
            ),
        };
        Self {
            model,
            packet: PacketWidth::UnitMass,
            time,
            quantum: QuantumConfig {
                hbar: vec![0.5, 0.25, 0.125],
                omega: 1.0,
                cutoff: Cutoff::Auto,
                cutoff_margin: 20,
                check_extra: 10,
                check_tolerance: 1e-3,
            },
            classical: ClassicalConfig {
                delta: vec![0.32, 0.16, 0.08, 0.04, 0.02],
                m: 100_000,
                seed: 1,
                dt: 0.0025,
                paired: true,
            },
            analysis,
            poincare: PoincareConfig {
                enabled: true,
                start: poincare.0,
                orbits: 20,
                crossings: poincare.1,
                dt: 1e-3,
                max_time: 1e5,
                refine: true,
            },
            run: RunConfig {
                output: PathBuf::from(format!("out/{}", model.name())),
                workers: 1,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_entries(&parse_entries(text)?)
    }

    /// Builds a config from assignments applied in order on top of the
    /// defaults of the last `model.preset` among them (regular if none).
    pub fn from_entries(entries: &[Entry]) -> Result<Self, ConfigError> {
        let preset = entries
            .iter()
            .rev()
            .find(|e| e.key == "model.preset")
            .map(|e| e.value.as_str())
            .unwrap_or("regular");
        let mut cfg = match preset {
            "custom" => Self::for_model(ModelChoice::Custom {
                params: Preset::Regular.params(),
                center: Preset::Regular.center(),
            }),
            name => Self::preset(Preset::from_str(name).map_err(|m| bad("model.preset", m))?),
        };
        for e in entries.iter().filter(|e| e.key != "model.preset") {
            cfg.set(&e.key, &e.value).map_err(|err| match err {
                ConfigError::Value { key, message } if e.line > 0 => ConfigError::Syntax {
                    line: e.line,
                    message: format!("`{key}`: {message}"),
                },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one `section.key`. The preset itself cannot be changed here
    /// because it selects the defaults; see [`Self::from_entries`].
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "model.preset" => {
                if v != self.model.name() {
                    return Err(bad(key, "the preset is fixed once defaults are chosen"));
                }
            }
            "model.packet" => self.packet = PacketWidth::from_str(v).map_err(|m| bad(key, m))?,
            k if k.strip_prefix("model.").is_some_and(|f| CUSTOM_KEYS.contains(&f)) => {
                let ModelChoice::Custom { params, center } = &mut self.model else {
                    return Err(bad(key, "only a custom model takes explicit parameters"));
                };
                let x: f64 = num(key, v)?;
                match &k[6..] {
                    "m1" => params.m1 = x,
                    "m2" => params.m2 = x,
                    "energy" => params.energy = x,
                    "q1" => center.q1 = x,
                    "q2" => center.q2 = x,
                    "p1" => center.p1 = x,
                    _ => center.p2 = x,
                }
            }
            "time.t_max" => self.time.t_max = num(key, v)?,
            "time.samples" => self.time.samples = num(key, v)?,
            "quantum.hbar" => self.quantum.hbar = list(key, v)?,
            "quantum.omega" => self.quantum.omega = num(key, v)?,
            "quantum.cutoff" => {
                self.quantum.cutoff = match v {
                    "auto" => Cutoff::Auto,
                    n => Cutoff::Fixed(num(key, n)?),
                }
            }
            "quantum.cutoff_margin" => self.quantum.cutoff_margin = num(key, v)?,
            "quantum.check_extra" => self.quantum.check_extra = num(key, v)?,
            "quantum.check_tolerance" => self.quantum.check_tolerance = num(key, v)?,
            "classical.delta" => self.classical.delta = list(key, v)?,
            "classical.m" => self.classical.m = num(key, v)?,
            "classical.seed" => self.classical.seed = num(key, v)?,
            "classical.dt" => self.classical.dt = num(key, v)?,
            "classical.paired" => self.classical.paired = boolean(key, v)?,
            "analysis.model" => {
                self.analysis.model = GrowthModel::from_str(v).map_err(|e| bad(key, e.to_string()))?
            }
            "analysis.window_start" => self.analysis.window_start = num(key, v)?,
            "analysis.window_factor" => self.analysis.window_factor = num(key, v)?,
            "analysis.tail_fraction" => self.analysis.tail_fraction = num(key, v)?,
            "analysis.smoothing" => self.analysis.smoothing = num(key, v)?,
            "poincare.enabled" => self.poincare.enabled = boolean(key, v)?,
            "poincare.start" => {
                self.poincare.start = match v {
                    "line" => SectionStart::Line,
                    "center" => SectionStart::Center,
                    _ => return Err(bad(key, format!("expected line or center, got `{v}`"))),
                }
            }
            "poincare.orbits" => self.poincare.orbits = num(key, v)?,
            "poincare.crossings" => self.poincare.crossings = num(key, v)?,
            "poincare.dt" => self.poincare.dt = num(key, v)?,
            "poincare.max_time" => self.poincare.max_time = num(key, v)?,
            "poincare.refine" => self.poincare.refine = boolean(key, v)?,
            "run.output" => self.run.output = PathBuf::from(v),
            "run.workers" => self.run.workers = num(key, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(bad(key, format!("must be finite and positive, got {x}")))
            }
        };
        if let ModelChoice::Custom { params, center } = &self.model {
            let p = ModelParams::new(params.m1, params.m2, params.energy).map_err(|e| bad("model", e.to_string()))?;
            let e = total_energy(center, &p).map_err(|e| bad("model", e.to_string()))?;
            if (e - p.energy).abs() > 1e-6 * p.energy.max(1.0) {
                return Err(bad(
                    "model",
                    format!("the center has energy {e}, not the configured {}", p.energy),
                ));
            }
        }
        positive("time.t_max", self.time.t_max)?;
        if self.time.samples < 2 {
            return Err(bad("time.samples", "need at least two samples"));
        }
        for &h in &self.quantum.hbar {
            positive("quantum.hbar", h)?;
        }
        positive("quantum.omega", self.quantum.omega)?;
        positive("quantum.check_tolerance", self.quantum.check_tolerance)?;
        if self.quantum.cutoff == Cutoff::Fixed(0) {
            return Err(bad("quantum.cutoff", "must be at least 1"));
        }
        for &d in &self.classical.delta {
            positive("classical.delta", d)?;
        }
        if self.classical.m == 0 {
            return Err(bad("classical.m", "the ensemble needs at least one point"));
        }
        positive("classical.dt", self.classical.dt)?;
        let steps = self.time.spacing() / self.classical.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(bad(
                "classical.dt",
                format!(
                    "time grid spacing {} is not a whole number of steps of {}",
                    self.time.spacing(),
                    self.classical.dt
                ),
            ));
        }
        self.analysis.validate().map_err(|e| bad("analysis", e.to_string()))?;
        positive("poincare.dt", self.poincare.dt)?;
        positive("poincare.max_time", self.poincare.max_time)?;
        if self.poincare.crossings == 0 {
            return Err(bad("poincare.crossings", "must be at least 1"));
        }
        if self.poincare.start == SectionStart::Line && self.poincare.orbits == 0 {
            return Err(bad("poincare.orbits", "must be at least 1"));
        }
        if self.run.workers == 0 {
            return Err(bad("run.workers", "must be at least 1"));
        }
        Ok(())
    }

    /// Cell areas of the classical runs: the schedule plus, when paired,
    /// every `hbar` not already in it.
    pub fn classical_deltas(&self) -> Vec<f64> {
        let mut out = self.classical.delta.clone();
        if self.classical.paired {
            for &h in &self.quantum.hbar {
                if !out.iter().any(|d| d.to_bits() == h.to_bits()) {
                    out.push(h);
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = self.experiment_text();
        s.push_str("\n[run]\n");
        s.push_str(&format!("output = {}\n", self.run.output.display()));
        s.push_str(&format!("workers = {}\n", self.run.workers));
        s
    }

    /// Everything except `[run]`, which says where and how fast to compute
    /// but not what.
    fn experiment_text(&self) -> String {
        let mut s = String::new();
        let mut w = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        w("[model]".into());
        w(format!("preset = {}", self.model.name()));
        w(format!("packet = {}", self.packet.name()));
        if let ModelChoice::Custom { params, center } = &self.model {
            let values = [
                params.m1,
                params.m2,
                params.energy,
                center.q1,
                center.q2,
                center.p1,
                center.p2,
            ];
            for (k, x) in CUSTOM_KEYS.iter().zip(values) {
                w(format!("{k} = {x}"));
            }
        }
        w(String::new());
        w("[time]".into());
        w(format!("t_max = {}", self.time.t_max));
        w(format!("samples = {}", self.time.samples));
        w(String::new());
        let q = &self.quantum;
        w("[quantum]".into());
        w(format!("hbar = {}", join(&q.hbar)));
        w(format!("omega = {}", q.omega));
        w(match q.cutoff {
            Cutoff::Auto => "cutoff = auto".into(),
            Cutoff::Fixed(n) => format!("cutoff = {n}"),
        });
        w(format!("cutoff_margin = {}", q.cutoff_margin));
        w(format!("check_extra = {}", q.check_extra));
        w(format!("check_tolerance = {}", q.check_tolerance));
        w(String::new());
        let c = &self.classical;
        w("[classical]".into());
        w(format!("delta = {}", join(&c.delta)));
        w(format!("m = {}", c.m));
        w(format!("seed = {}", c.seed));
        w(format!("dt = {}", c.dt));
        w(format!("paired = {}", c.paired));
        w(String::new());
        let a = &self.analysis;
        w("[analysis]".into());
        w(format!("model = {}", a.model));
        w(format!("window_start = {}", a.window_start));
        w(format!("window_factor = {}", a.window_factor));
        w(format!("tail_fraction = {}", a.tail_fraction));
        w(format!("smoothing = {}", a.smoothing));
        w(String::new());
        let p = &self.poincare;
        w("[poincare]".into());
        w(format!("enabled = {}", p.enabled));
        w(format!(
            "start = {}",
            match p.start {
                SectionStart::Line => "line",
                SectionStart::Center => "center",
            }
        ));
        w(format!("orbits = {}", p.orbits));
        w(format!("crossings = {}", p.crossings));
        w(format!("dt = {}", p.dt));
        w(format!("max_time = {}", p.max_time));
        w(format!("refine = {}", p.refine));
        s
    }

    /// SHA-256 of the configuration text without the `[run]` section.
    pub fn hash(&self) -> String {
        crate::sha256_hex(self.experiment_text().as_bytes())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Regular)
    }
}

/// Renders `key = value` pairs as `#` header lines.
pub(crate) fn header_lines(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}
