//! Analysis report: per-curve table, scaling summary and a `# key = value`
//! trailer meant for scripts.

use std::fmt::Write as _;

use toda_core::analysis::{
    analyze_sweep, curve_distance, saturation_time, saturation_value, FitSettings, ScalingFit, SweepAnalysis,
};
use toda_core::EntropyCurve;

/// Quantum curve at `hbar` against the classical curve at `delta = hbar`.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub hbar: f64,
    /// Saturation time of the classical curve, read off the classical
    /// limit fit; the comparison window is `[0, t_d]`.
    pub t_d: f64,
    /// Sup-norm distance of the particle-1 curves over the window.
    pub distance: f64,
    /// `|S_quantum(0) - S_classical(0)|`.
    pub initial_gap: f64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub preset: String,
    pub settings: FitSettings,
    pub classical: Option<SweepAnalysis>,
    pub quantum: Option<SweepAnalysis>,
    pub comparisons: Vec<Comparison>,
    pub errors: Vec<String>,
}

impl Report {
    /// True when the distances shrink strictly with `hbar` (checked in
    /// decreasing `hbar` order); `None` with fewer than two comparisons.
    pub fn distances_decrease(&self) -> Option<bool> {
        if self.comparisons.len() < 2 {
            return None;
        }
        let mut c: Vec<&Comparison> = self.comparisons.iter().collect();
        c.sort_by(|a, b| b.hbar.total_cmp(&a.hbar));
        Some(c.windows(2).all(|w| w[1].distance < w[0].distance))
    }
}

/// Curves are `(parameter, [particle 1, particle 2])`. `sweep` holds the
/// classical cell-area schedule, `paired` any extra classical curves used
/// only for the quantum comparison.
pub fn analyze(
    preset: &str,
    settings: &FitSettings,
    sweep: &[(f64, [EntropyCurve; 2])],
    paired: &[(f64, [EntropyCurve; 2])],
    quantum: &[(f64, [EntropyCurve; 2])],
) -> Report {
    let mut errors = Vec::new();
    let first = |set: &[(f64, [EntropyCurve; 2])]| -> Vec<(f64, EntropyCurve)> {
        set.iter().map(|(p, [c, _])| (*p, c.clone())).collect()
    };
    let mut run = |label: &str, set: &[(f64, [EntropyCurve; 2])]| {
        if set.is_empty() {
            return None;
        }
        analyze_sweep(&first(set), settings)
            .map_err(|e| errors.push(format!("{label} sweep: {e}")))
            .ok()
    };
    let classical = run("delta", sweep);
    let quantum_sweep = run("hbar", quantum);

    let mut comparisons = Vec::new();
    if let Some(limit) = classical.as_ref().map(|c| c.limit.fit) {
        for (hbar, [q, _]) in quantum {
            let Some((_, [cl, _])) = sweep
                .iter()
                .chain(paired)
                .find(|(d, _)| d.to_bits() == hbar.to_bits())
            else {
                continue;
            };
            let result = saturation_value(cl, settings.tail_fraction)
                .and_then(|sat| saturation_time(cl, &limit, sat.s_bar))
                .and_then(|t_d| Ok((t_d, curve_distance(q, cl, (0.0, t_d))?)));
            match result {
                Ok((t_d, distance)) => comparisons.push(Comparison {
                    hbar: *hbar,
                    t_d,
                    distance,
                    initial_gap: (q.values()[0] - cl.values()[0]).abs(),
                }),
                Err(e) => errors.push(format!("comparison at hbar = {hbar}: {e}")),
            }
        }
    }
    Report {
        preset: preset.to_string(),
        settings: *settings,
        classical,
        quantum: quantum_sweep,
        comparisons,
        errors,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("nan".into(), |v| v.to_string())
}

pub const REPORT_COLUMNS: &str = "preset family parameter s_bar s_bar_err t_d growth_slope r_squared";

/// Renders the report. `header` pairs go first.
pub fn format_report(header: &[(&str, String)], report: &Report) -> String {
    let mut s = crate::config::header_lines(header);
    let st = &report.settings;
    let _ = writeln!(s, "# growth_model = {}", st.model);
    let _ = writeln!(
        s,
        "# fit_window = [{}, {} * t_d]",
        st.window_start, st.window_factor
    );
    let _ = writeln!(s, "# tail_fraction = {}", st.tail_fraction);
    let _ = writeln!(s, "# smoothing = {}", st.smoothing);
    let _ = writeln!(s, "# {REPORT_COLUMNS}");
    let sweeps = [("delta", &report.classical), ("hbar", &report.quantum)];
    for (family, sweep) in sweeps {
        let Some(a) = sweep else { continue };
        for r in a.rows.iter().rev() {
            let _ = writeln!(
                s,
                "{} {family} {} {} {} {} {} {}",
                report.preset,
                r.parameter,
                r.saturation.s_bar,
                r.saturation.std_error,
                r.t_d,
                opt(r.growth.map(|g| g.b)),
                opt(r.growth.map(|g| g.r_squared)),
            );
        }
    }

    let mut trailer: Vec<(String, String)> = vec![("preset".into(), report.preset.clone())];
    let _ = writeln!(s, "#");
    let _ = writeln!(s, "# summary");
    for (family, sweep) in sweeps {
        let Some(a) = sweep else { continue };
        let l = &a.limit;
        let _ = writeln!(
            s,
            "#   {family}: limit curve at {} fitted by {} model on [{}, {}]: S = {} + {} f(t), r2 = {}, t_d = {}, s_bar = {}",
            a.limit_parameter,
            l.fit.model,
            l.fit.window.0,
            l.fit.window.1,
            l.fit.a,
            l.fit.b,
            l.fit.r_squared,
            l.t_d,
            l.saturation.s_bar
        );
        let mut kv = |k: &str, v: String| trailer.push((format!("{family}.{k}"), v));
        kv("limit", a.limit_parameter.to_string());
        kv("limit.model", l.fit.model.to_string());
        kv("limit.window_lo", l.fit.window.0.to_string());
        kv("limit.window_hi", l.fit.window.1.to_string());
        kv("limit.intercept", l.fit.a.to_string());
        kv("limit.slope", l.fit.b.to_string());
        kv("limit.r_squared", l.fit.r_squared.to_string());
        kv("limit.t_d", l.t_d.to_string());
        kv("limit.s_bar", l.saturation.s_bar.to_string());
        let fits: [(&str, &str, &Option<ScalingFit>); 3] = [
            ("s_bar", "ln(1/x)", &a.s_bar_scaling),
            ("t_d.log", "ln(1/x)", &a.t_d_log_scaling),
            ("t_d.sqrt", "1/sqrt(x)", &a.t_d_sqrt_scaling),
        ];
        for (name, law, fit) in fits {
            match fit {
                Some(f) => {
                    let _ = writeln!(
                        s,
                        "#   {family}: {name} against {law}: slope = {}, intercept = {}, r2 = {}",
                        f.b, f.a, f.r_squared
                    );
                    kv(&format!("{name}.slope"), f.b.to_string());
                    kv(&format!("{name}.r_squared"), f.r_squared.to_string());
                }
                None => {
                    let _ = writeln!(s, "#   {family}: {name} against {law}: fewer than three points");
                }
            }
        }
    }
    for c in &report.comparisons {
        let _ = writeln!(
            s,
            "#   compare hbar = {}: distance on [0, {}] = {}, initial gap = {}",
            c.hbar, c.t_d, c.distance, c.initial_gap
        );
        trailer.push((format!("compare.{}.t_d", c.hbar), c.t_d.to_string()));
        trailer.push((format!("compare.{}.distance", c.hbar), c.distance.to_string()));
        trailer.push((format!("compare.{}.initial_gap", c.hbar), c.initial_gap.to_string()));
    }
    if let Some(dec) = report.distances_decrease() {
        trailer.push(("compare.decreasing".into(), dec.to_string()));
    }
    for e in &report.errors {
        let _ = writeln!(s, "#   error: {e}");
    }
    trailer.push(("errors".into(), report.errors.len().to_string()));
    let _ = writeln!(s, "#");
    let _ = writeln!(s, "# trailer");
    for (k, v) in trailer {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// The `key = value` pairs after the `# trailer` marker.
pub fn parse_trailer(text: &str) -> Vec<(String, String)> {
    text.lines()
        .skip_while(|l| l.trim() != "# trailer")
        .skip(1)
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
