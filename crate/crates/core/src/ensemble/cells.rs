use super::EnsembleError;
use crate::exec::Execution;

/// Square tiling of a `(q, p)` plane into cells of area `delta`.
///
/// Cells are half-open: a point on a boundary belongs to the cell on its
/// upper/right side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellPartition {
    delta: f64,
    side: f64,
    origin: [f64; 2],
}

impl CellPartition {
    pub fn new(delta: f64) -> Result<Self, EnsembleError> {
        Self::with_origin(delta, [0.0, 0.0])
    }

    pub fn with_origin(delta: f64, origin: [f64; 2]) -> Result<Self, EnsembleError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(EnsembleError::InvalidRequest(format!("cell area must be positive, got {delta}")));
        }
        if !origin.iter().all(|x| x.is_finite()) {
            return Err(EnsembleError::InvalidRequest("cell origin is not finite".into()));
        }
        Ok(Self {
            delta,
            side: delta.sqrt(),
            origin,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Integer cell coordinates of `point`.
    pub fn cell_of(&self, point: [f64; 2]) -> (i64, i64) {
        (
            ((point[0] - self.origin[0]) / self.side).floor() as i64,
            ((point[1] - self.origin[1]) / self.side).floor() as i64,
        )
    }
}

/// Occupied cells and their counts, sorted by cell.
pub fn cell_histogram(
    points: &[[f64; 2]],
    partition: &CellPartition,
    exec: Execution,
) -> Result<Vec<((i64, i64), usize)>, EnsembleError> {
    if let Some(bad) = points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(EnsembleError::NonFinitePoint(bad));
    }
    let mut keys = exec.map(points, |_, &p| partition.cell_of(p));
    exec.sort_unstable(&mut keys);
    let mut out: Vec<((i64, i64), usize)> = Vec::new();
    for k in keys {
        match out.last_mut() {
            Some((last, count)) if *last == k => *count += 1,
            _ => out.push((k, 1)),
        }
    }
    Ok(out)
}

/// Shannon entropy `-sum (w/M) ln(w/M)` of the cell occupation.
pub fn cell_entropy(points: &[[f64; 2]], partition: &CellPartition, exec: Execution) -> Result<f64, EnsembleError> {
    if points.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let m = points.len() as f64;
    let hist = cell_histogram(points, partition, exec)?;
    let s: f64 = hist
        .iter()
        .map(|&(_, w)| {
            let p = w as f64 / m;
            -p * p.ln()
        })
        .sum();
    Ok(s.max(0.0))
}
