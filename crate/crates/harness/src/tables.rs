//! Whitespace-delimited text tables with `# key = value` header lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use toda_core::dynamics::SectionPoint;
use toda_core::{CurveTag, EntropyCurve, Particle};

use crate::config::header_lines;
use crate::HarnessError;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

/// A parsed table: header pairs in file order and numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    fn require(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing header `{key}`"))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T, String> {
        let v = self.require(key)?;
        v.parse().map_err(|_| format!("header `{key}` = `{v}` is not a number"))
    }
}

/// Parses a table. The last `#` line that is not `key = value` names the
/// columns.
pub fn parse_table(text: &str) -> Result<Table, String> {
    let mut header = Vec::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(c) = s.strip_prefix('#') {
            let c = c.trim();
            match c.split_once(" = ") {
                Some((k, v)) => header.push((k.trim().to_string(), v.trim().to_string())),
                None => columns = c.split_whitespace().map(String::from).collect(),
            }
            continue;
        }
        let row = s
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| format!("line {}: non-numeric field", i + 1))?;
        if row.len() != columns.len() {
            return Err(format!(
                "line {}: {} fields for {} columns",
                i + 1,
                row.len(),
                columns.len()
            ));
        }
        rows.push(row);
    }
    Ok(Table { header, columns, rows })
}

pub const CURVE_COLUMNS: &str = "t S_particle1 S_particle2";

/// Curve table for both particles; `header` lands above the tag fields.
pub fn format_curves(header: &[(&str, String)], curves: &[EntropyCurve; 2]) -> String {
    let [a, b] = curves;
    let mut pairs: Vec<(&str, String)> = header.to_vec();
    match a.tag {
        CurveTag::Quantum { hbar } => {
            pairs.push(("kind", "quantum".into()));
            pairs.push(("hbar", hbar.to_string()));
        }
        CurveTag::Classical { delta, width, m, seed } => {
            pairs.push(("kind", "classical".into()));
            pairs.push(("delta", delta.to_string()));
            pairs.push(("width", width.to_string()));
            pairs.push(("M", m.to_string()));
            pairs.push(("seed", seed.to_string()));
        }
    }
    let mut s = header_lines(&pairs);
    let _ = writeln!(s, "# {CURVE_COLUMNS}");
    for ((t, x), y) in a.times().iter().zip(a.values()).zip(b.values()) {
        let _ = writeln!(s, "{t} {x} {y}");
    }
    s
}

/// Reads a curve table back into its two curves plus the full header.
pub fn parse_curves(text: &str) -> Result<([EntropyCurve; 2], Table), String> {
    let table = parse_table(text)?;
    if table.columns.join(" ") != CURVE_COLUMNS {
        return Err(format!("expected columns `{CURVE_COLUMNS}`"));
    }
    let tag = match table.require("kind")? {
        "quantum" => CurveTag::Quantum {
            hbar: table.number("hbar")?,
        },
        "classical" => CurveTag::Classical {
            delta: table.number("delta")?,
            width: table.number("width")?,
            m: table.number("M")?,
            seed: table.number("seed")?,
        },
        other => return Err(format!("unknown curve kind `{other}`")),
    };
    let t = table.column("t").unwrap();
    let curve = |name: &str, particle| {
        EntropyCurve::new(t.clone(), table.column(name).unwrap(), tag, particle).map_err(|e| e.to_string())
    };
    let curves = [curve("S_particle1", Particle::First)?, curve("S_particle2", Particle::Second)?];
    Ok((curves, table))
}

pub const POINCARE_COLUMNS: &str = "orbit_index t_crossing x y";

pub fn format_poincare(header: &[(&str, String)], points: &[SectionPoint]) -> String {
    let mut s = header_lines(header);
    let _ = writeln!(s, "# {POINCARE_COLUMNS}");
    for p in points {
        let _ = writeln!(s, "{} {} {} {}", p.orbit, p.t, p.x, p.y);
    }
    s
}

pub fn parse_poincare(text: &str) -> Result<(Vec<SectionPoint>, Table), String> {
    let table = parse_table(text)?;
    if table.columns.join(" ") != POINCARE_COLUMNS {
        return Err(format!("expected columns `{POINCARE_COLUMNS}`"));
    }
    let points = table
        .rows
        .iter()
        .map(|r| SectionPoint {
            orbit: r[0] as usize,
            t: r[1],
            x: r[2],
            y: r[3],
        })
        .collect();
    Ok((points, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(tag: CurveTag) -> [EntropyCurve; 2] {
        let t = vec![0.0, 0.25, 0.5];
        [
            EntropyCurve::new(t.clone(), vec![0.0, 0.1 + 0.2, 1.0 / 3.0], tag, Particle::First).unwrap(),
            EntropyCurve::new(t, vec![1e-300, 2.5, 7.0], tag, Particle::Second).unwrap(),
        ]
    }

    #[test]
    fn curves_round_trip_exactly() {
        for tag in [
            CurveTag::Quantum { hbar: 0.125 },
            CurveTag::Classical {
                delta: 0.02,
                width: 0.02,
                m: 100_000,
                seed: u64::MAX,
            },
        ] {
            let curves = pair(tag);
            let text = format_curves(&[("preset", "regular".into())], &curves);
            let (back, table) = parse_curves(&text).unwrap();
            assert_eq!(back, curves);
            assert_eq!(table.get("preset"), Some("regular"));
        }
    }

    #[test]
    fn poincare_round_trip() {
        let pts = vec![
            SectionPoint {
                orbit: 0,
                t: 1.5,
                x: -0.25,
                y: 2.0,
            },
            SectionPoint {
                orbit: 3,
                t: 7.125,
                x: 1e-9,
                y: -3.0,
            },
        ];
        let (back, _) = parse_poincare(&format_poincare(&[], &pts)).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn malformed_tables() {
        assert!(parse_table("# a b\n1 2 3\n").is_err());
        assert!(parse_table("# a\nx\n").is_err());
        assert!(parse_curves("# kind = quantum\n# t S\n0 0\n").is_err());
    }
}
