use super::{
    relative_drift, rk4, total_energy, DynamicsError, ModelParams, PhaseState, DEFAULT_DRIFT_TOLERANCE,
};

/// Fixed-step RK4 integrator with an energy-drift guard.
#[derive(Clone, Copy, Debug)]
pub struct Integrator {
    pub params: ModelParams,
    pub dt: f64,
    pub drift_tolerance: f64,
}

/// Sampled trajectory plus the worst relative energy drift seen.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhaseState)>,
    pub max_drift: f64,
}

impl Integrator {
    pub fn new(params: ModelParams, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DynamicsError::InvalidRequest(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            params,
            dt,
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
        })
    }

    pub fn with_drift_tolerance(mut self, tolerance: f64) -> Self {
        self.drift_tolerance = tolerance;
        self
    }

    /// Number of steps covering `duration`, tolerating round-off in
    /// `duration / dt`.
    pub fn steps_for(&self, duration: f64) -> usize {
        let n = duration / self.dt;
        let r = n.round();
        if (n - r).abs() < 1e-9 * r.max(1.0) {
            r as usize
        } else {
            n.ceil() as usize
        }
    }

    /// Advances `state` by `steps` RK4 steps without sampling; checks every
    /// step for overflow.
    pub fn advance(&self, state: &PhaseState, steps: usize) -> Result<PhaseState, DynamicsError> {
        let (im1, im2) = (1.0 / self.params.m1, 1.0 / self.params.m2);
        let mut s = state.to_array();
        for _ in 0..steps {
            let next = rk4(&s, self.dt, im1, im2);
            if !next.iter().all(|x| x.is_finite()) {
                return Err(DynamicsError::Overflow {
                    state: PhaseState::from_array(s),
                });
            }
            s = next;
        }
        Ok(PhaseState::from_array(s))
    }

    pub fn trajectory(
        &self,
        state0: &PhaseState,
        t_end: f64,
        sample_stride: usize,
    ) -> Result<Trajectory, DynamicsError> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(DynamicsError::InvalidRequest(format!("t_end must be positive, got {t_end}")));
        }
        if sample_stride == 0 {
            return Err(DynamicsError::InvalidRequest("sample_stride must be >= 1".into()));
        }
        let steps = self.steps_for(t_end);
        let e0 = total_energy(state0, &self.params)?;
        let (im1, im2) = (1.0 / self.params.m1, 1.0 / self.params.m2);

        let mut samples = Vec::with_capacity(steps / sample_stride + 1);
        samples.push((0.0, *state0));
        let mut max_drift = 0.0f64;
        let mut s = state0.to_array();
        for k in 1..=steps {
            let next = rk4(&s, self.dt, im1, im2);
            let t = k as f64 * self.dt;
            let state = PhaseState::from_array(next);
            let e = total_energy(&state, &self.params).map_err(|_| DynamicsError::Overflow {
                state: PhaseState::from_array(s),
            })?;
            let drift = relative_drift(e, e0);
            max_drift = max_drift.max(drift);
            if drift > self.drift_tolerance {
                return Err(DynamicsError::EnergyDrift {
                    time: t,
                    drift,
                    tolerance: self.drift_tolerance,
                });
            }
            if k % sample_stride == 0 {
                samples.push((t, state));
            }
            s = next;
        }
        Ok(Trajectory { samples, max_drift })
    }
}

/// Integrates with the default drift guard, emitting every
/// `sample_stride`-th state (the initial state is always emitted).
pub fn integrate_trajectory(
    state0: &PhaseState,
    t_end: f64,
    dt: f64,
    params: &ModelParams,
    sample_stride: usize,
) -> Result<Trajectory, DynamicsError> {
    Integrator::new(*params, dt)?.trajectory(state0, t_end, sample_stride)
}
