//! Classical counterpart of the reduced quantum state: a Gaussian cloud of
//! phase-space points matched to the coherent state, evolved point by point
//! with RK4 and coarse-grained on square cells in one particle's plane.

mod cells;
mod sample;

pub use cells::{cell_entropy, cell_histogram, CellPartition};
pub use sample::{sample_initial_ensemble, sample_packet_ensemble, SAMPLER_VERSION};

use thiserror::Error;

use crate::curve::{CurveTag, EntropyCurve, Particle};
use crate::dynamics::{advance_chunk, relative_drift, total_energy, LANES, ModelParams, PacketWidth, PhaseState, DEFAULT_DRIFT_TOLERANCE};
use crate::exec::Execution;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble request: {0}")]
    InvalidRequest(String),
    #[error("point {point} overflowed before t = {time}")]
    Overflow { point: usize, time: f64 },
    #[error("point {point} drifted in energy by {drift:.3e} (> {tolerance:.1e}) at t = {time}")]
    EnergyDrift {
        point: usize,
        time: f64,
        drift: f64,
        tolerance: f64,
    },
    #[error("point {0} is not finite")]
    NonFinitePoint(usize),
    #[error("cannot bin an empty point set")]
    Empty,
}

impl EnsembleError {
    pub fn is_numerical_guard(&self) -> bool {
        matches!(self, EnsembleError::Overflow { .. } | EnsembleError::EnergyDrift { .. })
    }
}

/// `m` equally weighted phase-space points and how they were generated.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    points: Vec<PhaseState>,
    initial_energies: Vec<f64>,
    pub center: PhaseState,
    /// Width parameter: each coordinate was drawn with variance `width / 2`.
    pub width: f64,
    pub seed: u64,
    /// Current time.
    pub t: f64,
}

impl Ensemble {
    pub(crate) fn from_points(
        points: Vec<PhaseState>,
        center: PhaseState,
        width: f64,
        seed: u64,
    ) -> Self {
        Self {
            points,
            initial_energies: Vec::new(),
            center,
            width,
            seed,
            t: 0.0,
        }
    }

    pub fn points(&self) -> &[PhaseState] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean energy over the ensemble.
    pub fn mean_energy(&self, params: &ModelParams) -> Result<f64, crate::Error> {
        let mut total = 0.0;
        for s in &self.points {
            total += total_energy(s, params)?;
        }
        Ok(total / self.points.len() as f64)
    }

    /// Advances every point to `t_target` with `dt` steps, then checks each
    /// point's energy against its value at `t = 0`.
    pub fn advance_to(
        &mut self,
        t_target: f64,
        dt: f64,
        params: &ModelParams,
        exec: Execution,
    ) -> Result<(), crate::Error> {
        let steps = aligned_steps(self.t, t_target, dt)?;
        if self.initial_energies.is_empty() {
            let energies = exec.map(&self.points, |_, s| total_energy(s, params));
            self.initial_energies = energies.into_iter().collect::<Result<_, _>>()?;
        }
        if steps == 0 {
            return Ok(());
        }
        let (im1, im2) = (1.0 / params.m1, 1.0 / params.m2);
        exec.fill_chunks(&mut self.points, LANES, |_, chunk| advance_chunk(chunk, steps, dt, im1, im2));
        let e0 = &self.initial_energies;
        // non-finite values propagate through every later step
        let drifts = exec.map(&self.points, |i, s| {
            total_energy(s, params).map(|e| relative_drift(e, e0[i])).ok()
        });
        self.t = t_target;
        for (point, drift) in drifts.into_iter().enumerate() {
            match drift {
                None => return Err(EnsembleError::Overflow { point, time: t_target }.into()),
                Some(drift) if drift > DEFAULT_DRIFT_TOLERANCE => {
                    return Err(EnsembleError::EnergyDrift {
                        point,
                        time: t_target,
                        drift,
                        tolerance: DEFAULT_DRIFT_TOLERANCE,
                    }
                    .into())
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn aligned_steps(t_from: f64, t_to: f64, dt: f64) -> Result<usize, EnsembleError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(EnsembleError::InvalidRequest(format!("dt must be positive, got {dt}")));
    }
    if !(t_to.is_finite() && t_to >= t_from) {
        return Err(EnsembleError::InvalidRequest(format!(
            "target time {t_to} precedes the ensemble time {t_from}"
        )));
    }
    let n = (t_to - t_from) / dt;
    let r = n.round();
    if (n - r).abs() > 1e-6 {
        return Err(EnsembleError::InvalidRequest(format!(
            "interval {} is not a whole number of dt = {dt} steps",
            t_to - t_from
        )));
    }
    Ok(r as usize)
}

/// Copy of `ens` advanced to `t_target`.
pub fn evolve_ensemble(
    ens: &Ensemble,
    t_target: f64,
    dt: f64,
    params: &ModelParams,
    exec: Execution,
) -> Result<Ensemble, crate::Error> {
    let mut out = ens.clone();
    out.advance_to(t_target, dt, params, exec)?;
    Ok(out)
}

/// `(q, p)` of one particle for every point, in ensemble order.
pub fn project(ens: &Ensemble, particle: Particle) -> Vec<[f64; 2]> {
    project_points(ens.points(), particle)
}

pub fn project_points(points: &[PhaseState], particle: Particle) -> Vec<[f64; 2]> {
    points
        .iter()
        .map(|s| match particle {
            Particle::First => [s.q1, s.p1],
            Particle::Second => [s.q2, s.p2],
        })
        .collect()
}

/// Parameters of one classical ensemble run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalRun {
    pub params: ModelParams,
    pub center: PhaseState,
    /// Sampling width (the `hbar` of the matching coherent state).
    pub width: f64,
    pub packet: PacketWidth,
    pub m: usize,
    pub seed: u64,
    pub dt: f64,
}

/// Cell-entropy curves for every cell area in `deltas`, for both particles,
/// from a single ensemble evolution through `times`.
pub fn classical_entropy_curves(
    run: &ClassicalRun,
    deltas: &[f64],
    times: &[f64],
    exec: Execution,
) -> Result<Vec<[EntropyCurve; 2]>, crate::Error> {
    let partitions = deltas
        .iter()
        .map(|&d| CellPartition::new(d))
        .collect::<Result<Vec<_>, _>>()?;
    if times.is_empty() || times[0] < 0.0 {
        return Err(EnsembleError::InvalidRequest("time grid must be nonempty and start at t >= 0".into()).into());
    }
    let scales = run.packet.scales(&run.params);
    let mut ens = sample_packet_ensemble(&run.center, run.width, scales, run.m, run.seed)?;
    // values[partition][particle][time]
    let mut values = vec![[Vec::with_capacity(times.len()), Vec::with_capacity(times.len())]; partitions.len()];
    for &t in times {
        ens.advance_to(t, run.dt, &run.params, exec)?;
        for (k, particle) in [Particle::First, Particle::Second].into_iter().enumerate() {
            let projected = project(&ens, particle);
            for (part, vals) in partitions.iter().zip(values.iter_mut()) {
                vals[k].push(cell_entropy(&projected, part, exec)?);
            }
        }
    }
    partitions
        .iter()
        .zip(values)
        .map(|(part, [v1, v2])| {
            let tag = CurveTag::Classical {
                delta: part.delta(),
                width: run.width,
                m: run.m,
                seed: run.seed,
            };
            Ok([
                EntropyCurve::new(times.to_vec(), v1, tag, Particle::First)?,
                EntropyCurve::new(times.to_vec(), v2, tag, Particle::Second)?,
            ])
        })
        .collect()
}

/// Single-`delta` convenience wrapper around [`classical_entropy_curves`].
pub fn classical_entropy_curve(
    run: &ClassicalRun,
    delta: f64,
    times: &[f64],
    exec: Execution,
) -> Result<[EntropyCurve; 2], crate::Error> {
    Ok(classical_entropy_curves(run, &[delta], times, exec)?.remove(0))
}
