//! Classical mechanics of two particles on a line with Toda interactions:
//!
//! `H = p1²/2m1 + p2²/2m2 + exp(-q1) + exp(-(q2 - q1)) + exp(q2) - 3`
//!
//! The potential is convex with its minimum 0 at the origin. Equal masses
//! give a completely integrable system; unequal masses become chaotic as the
//! energy grows.

mod kernel;
mod poincare;
mod trajectory;

pub use poincare::{
    initial_states_on_line, poincare_section, Coordinate, CrossingDirection, PoincareOptions,
    PoincareResult, SectionPoint, SectionSpec,
};
pub use trajectory::{integrate_trajectory, Integrator, Trajectory};

pub(crate) use kernel::{advance_chunk, flow, rk4, LANES};

use thiserror::Error;

/// Relative energy drift allowed along any trajectory.
pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-8;
/// Production RK4 step.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value while evaluating the Toda flow at {state:?}")]
    Overflow { state: PhaseState },
    #[error("relative energy drift {drift:.3e} exceeds {tolerance:.1e} at t = {time}")]
    EnergyDrift {
        time: f64,
        drift: f64,
        tolerance: f64,
    },
    #[error("invalid integration request: {0}")]
    InvalidRequest(String),
    #[error("invalid section: {0}")]
    InvalidSection(String),
    #[error("initial state {index} has energy {energy}, off the E = {target} shell")]
    OffShell {
        index: usize,
        energy: f64,
        target: f64,
    },
}

impl DynamicsError {
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            DynamicsError::Overflow { .. } | DynamicsError::EnergyDrift { .. }
        )
    }
}

/// Masses and nominal energy of the two-particle model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub m1: f64,
    pub m2: f64,
    pub energy: f64,
}

impl ModelParams {
    pub fn new(m1: f64, m2: f64, energy: f64) -> Result<Self, DynamicsError> {
        for (name, v) in [("m1", m1), ("m2", m2), ("energy", energy)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(Self { m1, m2, energy })
    }
}

/// The two initial conditions studied at `E = 7`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Equal unit masses: integrable.
    Regular,
    /// `m1 = 1`, `m2 = 0.54`, started inside the chaotic sea.
    Chaotic,
}

impl Preset {
    pub const ENERGY: f64 = 7.0;
    pub const CHAOTIC_M2: f64 = 0.54;

    pub fn name(self) -> &'static str {
        match self {
            Preset::Regular => "regular",
            Preset::Chaotic => "chaotic",
        }
    }

    pub fn params(self) -> ModelParams {
        match self {
            Preset::Regular => ModelParams {
                m1: 1.0,
                m2: 1.0,
                energy: Self::ENERGY,
            },
            Preset::Chaotic => ModelParams {
                m1: 1.0,
                m2: Self::CHAOTIC_M2,
                energy: Self::ENERGY,
            },
        }
    }

    /// Center of the initial coherent state / Gaussian ensemble.
    pub fn center(self) -> PhaseState {
        let e = Self::ENERGY;
        match self {
            Preset::Regular => PhaseState::new(0.0, 0.0, e.sqrt(), e.sqrt()),
            Preset::Chaotic => PhaseState::new(0.0, 0.0, e.sqrt(), -(Self::CHAOTIC_M2 * e).sqrt()),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regular" => Ok(Preset::Regular),
            "chaotic" => Ok(Preset::Chaotic),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

/// Widths of the initial wave packet and of the matching classical
/// Gaussian, relative to unit-mass oscillators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PacketWidth {
    /// Variance `hbar/2` in every coordinate, whatever the masses.
    #[default]
    UnitMass,
    /// Ground-state widths of an oscillator with the particle's mass:
    /// `hbar / 2m` in `q` and `hbar m / 2` in `p`.
    MassMatched,
}

impl PacketWidth {
    pub fn name(self) -> &'static str {
        match self {
            PacketWidth::UnitMass => "unit_mass",
            PacketWidth::MassMatched => "mass_matched",
        }
    }

    /// Per-particle stiffness `s`: the `q` variance is divided by `s` and
    /// the `p` variance multiplied by it.
    pub fn scales(self, params: &ModelParams) -> [f64; 2] {
        match self {
            PacketWidth::UnitMass => [1.0, 1.0],
            PacketWidth::MassMatched => [params.m1, params.m2],
        }
    }
}

impl std::str::FromStr for PacketWidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit_mass" => Ok(PacketWidth::UnitMass),
            "mass_matched" => Ok(PacketWidth::MassMatched),
            other => Err(format!("unknown packet width `{other}` (unit_mass or mass_matched)")),
        }
    }
}

/// A point `(q1, q2, p1, p2)` of the four-dimensional phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseState {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PhaseState {
    pub const fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        Self { q1, q2, p1, p2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q1, self.q2, self.p1, self.p2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Momentum reversal `(q, p) -> (q, -p)`.
    pub fn reversed(self) -> Self {
        Self::new(self.q1, self.q2, -self.p1, -self.p2)
    }

    pub fn sup_distance(&self, other: &PhaseState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn potential_energy(q1: f64, q2: f64) -> Result<f64, DynamicsError> {
    let v = (-q1).exp() + (q1 - q2).exp() + q2.exp() - 3.0;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DynamicsError::Overflow {
            state: PhaseState::new(q1, q2, 0.0, 0.0),
        })
    }
}

pub fn kinetic_energy(state: &PhaseState, params: &ModelParams) -> f64 {
    0.5 * (state.p1 * state.p1 / params.m1 + state.p2 * state.p2 / params.m2)
}

pub fn total_energy(state: &PhaseState, params: &ModelParams) -> Result<f64, DynamicsError> {
    let v = potential_energy(state.q1, state.q2).map_err(|_| DynamicsError::Overflow {
        state: *state,
    })?;
    let e = kinetic_energy(state, params) + v;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(DynamicsError::Overflow { state: *state })
    }
}

/// Hamilton's equations as `(dq1, dq2, dp1, dp2)`.
pub fn hamiltonian_flow(state: &PhaseState, params: &ModelParams) -> Result<[f64; 4], DynamicsError> {
    let f = flow(&state.to_array(), 1.0 / params.m1, 1.0 / params.m2);
    if f.iter().all(|x| x.is_finite()) {
        Ok(f)
    } else {
        Err(DynamicsError::Overflow { state: *state })
    }
}

/// One classical RK4 step of length `dt` (negative `dt` integrates backwards).
pub fn rk4_step(state: &PhaseState, dt: f64, params: &ModelParams) -> Result<PhaseState, DynamicsError> {
    if !dt.is_finite() {
        return Err(DynamicsError::InvalidRequest(format!("dt = {dt}")));
    }
    let next = rk4(&state.to_array(), dt, 1.0 / params.m1, 1.0 / params.m2);
    if next.iter().all(|x| x.is_finite()) {
        Ok(PhaseState::from_array(next))
    } else {
        Err(DynamicsError::Overflow { state: *state })
    }
}

/// `|E - E0| / max(|E0|, 1)`; the floor keeps states near the potential
/// minimum from reporting huge relative drifts for round-off.
pub(crate) fn relative_drift(e: f64, e0: f64) -> f64 {
    (e - e0).abs() / e0.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT7: f64 = 2.6457513110645907;

    #[test]
    fn potential_examples() {
        assert_eq!(potential_energy(0.0, 0.0).unwrap(), 0.0);
        // e^-1.2 + e^1.2 + 1 - 3
        assert!((potential_energy(1.2, 0.0).unwrap() - 1.621_310_8).abs() < 1e-6);
        assert!(potential_energy(800.0, 0.0).is_err());
        assert!(potential_energy(0.0, 800.0).is_err());
    }

    #[test]
    fn gradient_vanishes_at_origin() {
        let f = hamiltonian_flow(&PhaseState::default(), &Preset::Regular.params()).unwrap();
        assert_eq!(f, [0.0; 4]);
    }

    #[test]
    fn preset_centers_have_energy_seven() {
        for p in [Preset::Regular, Preset::Chaotic] {
            let e = total_energy(&p.center(), &p.params()).unwrap();
            assert!((e - 7.0).abs() < 1e-12, "{p:?}: {e}");
        }
        let e = total_energy(&PhaseState::new(1.2, 0.0, 0.0, 0.0), &Preset::Chaotic.params()).unwrap();
        assert!((e - 1.621_310_8).abs() < 1e-6);
    }

    #[test]
    fn flow_examples() {
        let p = Preset::Regular.params();
        let f = hamiltonian_flow(&PhaseState::new(0.0, 0.0, SQRT7, SQRT7), &p).unwrap();
        assert_eq!(f, [SQRT7, SQRT7, 0.0, 0.0]);
        let f = hamiltonian_flow(&PhaseState::new(1.0, 0.0, 0.0, 0.0), &p).unwrap();
        assert!(f[0] == 0.0 && f[1] == 0.0);
        assert!((f[2] + 2.350_402_4).abs() < 1e-6);
        assert!((f[3] - 1.718_281_8).abs() < 1e-6);
    }

    #[test]
    fn flow_is_divergence_free() {
        // dq_i/dt depends only on p and dp_i/dt only on q, so each diagonal
        // Jacobian entry vanishes; check numerically.
        let p = Preset::Chaotic.params();
        let s = PhaseState::new(0.3, -0.7, 1.1, -0.4);
        let h = 1e-6;
        let mut div = 0.0;
        for i in 0..4 {
            let mut a = s.to_array();
            let mut b = s.to_array();
            a[i] += h;
            b[i] -= h;
            let fa = hamiltonian_flow(&PhaseState::from_array(a), &p).unwrap();
            let fb = hamiltonian_flow(&PhaseState::from_array(b), &p).unwrap();
            div += (fa[i] - fb[i]) / (2.0 * h);
        }
        assert!(div.abs() < 1e-9);
    }

    #[test]
    fn rk4_zero_step_is_identity() {
        let s = Preset::Chaotic.center();
        assert_eq!(rk4_step(&s, 0.0, &Preset::Chaotic.params()).unwrap(), s);
    }

    #[test]
    fn rk4_single_step_energy_and_reversibility() {
        let p = Preset::Regular.params();
        let s = Preset::Regular.center();
        let e0 = total_energy(&s, &p).unwrap();
        let s1 = rk4_step(&s, 0.01, &p).unwrap();
        assert!((total_energy(&s1, &p).unwrap() - e0).abs() < 1e-10);
        let back = rk4_step(&s1, -0.01, &p).unwrap();
        assert!(back.sup_distance(&s) < 1e-10);

        // against a dt/10 substep reference
        let mut r = s;
        for _ in 0..10 {
            r = rk4_step(&r, 0.001, &p).unwrap();
        }
        assert!(r.sup_distance(&s1) < 1e-10);
    }

    #[test]
    fn rk4_order_is_four() {
        // One-step error against a dt/100 reference: halving dt should cut
        // the local error by ~2^5.
        let p = Preset::Chaotic.params();
        let s = PhaseState::new(0.4, -0.2, 1.5, -1.0);
        let reference = |dt: f64| {
            let mut r = s;
            for _ in 0..100 {
                r = rk4_step(&r, dt / 100.0, &p).unwrap();
            }
            r
        };
        let err = |dt: f64| rk4_step(&s, dt, &p).unwrap().sup_distance(&reference(dt));
        let ratio = err(0.1) / err(0.05);
        assert!((24.0..=40.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_time_reversal_is_exact() {
        let p = Preset::Chaotic.params();
        let s = Preset::Chaotic.center();
        let backward = rk4_step(&s, -0.01, &p).unwrap();
        let mirrored = rk4_step(&s.reversed(), 0.01, &p).unwrap().reversed();
        assert_eq!(backward, mirrored);
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(1.0, 0.54, 7.0).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 7.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 7.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn flow_antisymmetry(q1 in -3.0..3.0f64, q2 in -3.0..3.0f64,
                             p1 in -4.0..4.0f64, p2 in -4.0..4.0f64, m2 in 0.2..2.0f64) {
            let params = ModelParams::new(1.0, m2, 7.0).unwrap();
            let s = PhaseState::new(q1, q2, p1, p2);
            let f = hamiltonian_flow(&s, &params).unwrap();
            let g = hamiltonian_flow(&s.reversed(), &params).unwrap();
            prop_assert_eq!([-f[0], -f[1], f[2], f[3]], g);
        }

        #[test]
        fn potential_is_convex_along_lines(x in -3.0..3.0f64, y in -3.0..3.0f64,
                                           angle in 0.0..std::f64::consts::TAU) {
            let (dy, dx) = angle.sin_cos();
            let h = 1e-3;
            let v = |t: f64| potential_energy(x + t * dx, y + t * dy).unwrap();
            let second = (v(h) - 2.0 * v(0.0) + v(-h)) / (h * h);
            prop_assert!(second >= -1e-6, "second difference {}", second);
        }
    }
}
