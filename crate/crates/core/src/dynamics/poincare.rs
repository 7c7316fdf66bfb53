use super::{
    potential_energy, relative_drift, rk4, total_energy, DynamicsError, ModelParams, PhaseState,
    DEFAULT_DRIFT_TOLERANCE, DEFAULT_DT,
};
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {
    Q1,
    Q2,
    P1,
    P2,
}

impl Coordinate {
    pub fn index(self) -> usize {
        match self {
            Coordinate::Q1 => 0,
            Coordinate::Q2 => 1,
            Coordinate::P1 => 2,
            Coordinate::P2 => 3,
        }
    }

    pub fn conjugate(self) -> Coordinate {
        match self {
            Coordinate::Q1 => Coordinate::P1,
            Coordinate::Q2 => Coordinate::P2,
            Coordinate::P1 => Coordinate::Q1,
            Coordinate::P2 => Coordinate::Q2,
        }
    }

    pub fn is_position(self) -> bool {
        matches!(self, Coordinate::Q1 | Coordinate::Q2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Coordinate::Q1 => "q1",
            Coordinate::Q2 => "q2",
            Coordinate::P1 => "p1",
            Coordinate::P2 => "p2",
        }
    }
}

impl std::str::FromStr for Coordinate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "q1" => Ok(Coordinate::Q1),
            "q2" => Ok(Coordinate::Q2),
            "p1" => Ok(Coordinate::P1),
            "p2" => Ok(Coordinate::P2),
            other => Err(format!("unknown coordinate `{other}`")),
        }
    }
}

/// Sign of the pinned coordinate's conjugate momentum at a recorded crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingDirection {
    Positive,
    Negative,
}

impl CrossingDirection {
    pub fn sign(self) -> f64 {
        match self {
            CrossingDirection::Positive => 1.0,
            CrossingDirection::Negative => -1.0,
        }
    }
}

/// A surface of section: `pinned == value`, crossed with the conjugate
/// momentum of sign `direction`, recording the `(x, y)` coordinate pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionSpec {
    pinned: Coordinate,
    value: f64,
    direction: CrossingDirection,
    x: Coordinate,
    y: Coordinate,
}

impl Default for SectionSpec {
    /// `q2 = 0` crossed with `p2 > 0`, plotting `(q1, p1)`.
    fn default() -> Self {
        Self {
            pinned: Coordinate::Q2,
            value: 0.0,
            direction: CrossingDirection::Positive,
            x: Coordinate::Q1,
            y: Coordinate::P1,
        }
    }
}

impl SectionSpec {
    pub fn new(
        pinned: Coordinate,
        value: f64,
        direction: CrossingDirection,
        x: Coordinate,
        y: Coordinate,
    ) -> Result<Self, DynamicsError> {
        if !pinned.is_position() {
            return Err(DynamicsError::InvalidSection(format!(
                "pinned coordinate must be a position, got {}",
                pinned.name()
            )));
        }
        if !value.is_finite() {
            return Err(DynamicsError::InvalidSection(format!("section value {value}")));
        }
        let excluded = [pinned, pinned.conjugate()];
        if x == y || excluded.contains(&x) || excluded.contains(&y) {
            return Err(DynamicsError::InvalidSection(format!(
                "plotted pair ({}, {}) must be the other particle's coordinates",
                x.name(),
                y.name()
            )));
        }
        Ok(Self {
            pinned,
            value,
            direction,
            x,
            y,
        })
    }

    pub fn pinned(&self) -> Coordinate {
        self.pinned
    }
    pub fn value(&self) -> f64 {
        self.value
    }
    pub fn direction(&self) -> CrossingDirection {
        self.direction
    }
    pub fn plotted(&self) -> (Coordinate, Coordinate) {
        (self.x, self.y)
    }

    /// Full phase-space point on the section with plotted coordinates
    /// `(x, y)`, the eliminated momentum fixed by the energy. `None` when
    /// `(x, y)` lies outside the energetically allowed region.
    pub fn reconstruct(&self, x: f64, y: f64, params: &ModelParams) -> Option<PhaseState> {
        let mut s = [0.0; 4];
        s[self.pinned.index()] = self.value;
        s[self.x.index()] = x;
        s[self.y.index()] = y;
        let v = potential_energy(s[0], s[1]).ok()?;
        let (free_p, free_m) = if self.pinned == Coordinate::Q1 {
            (s[3], params.m2)
        } else {
            (s[2], params.m1)
        };
        let kinetic = params.energy - v - 0.5 * free_p * free_p / free_m;
        if kinetic < 0.0 {
            return None;
        }
        let pinned_m = if self.pinned == Coordinate::Q1 {
            params.m1
        } else {
            params.m2
        };
        s[self.pinned.conjugate().index()] = self.direction.sign() * (2.0 * pinned_m * kinetic).sqrt();
        Some(PhaseState::from_array(s))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PoincareOptions {
    pub n_crossings: usize,
    pub dt: f64,
    /// Integration time allotted per orbit.
    pub max_time: f64,
    /// One Newton correction of the crossing time after linear interpolation.
    pub refine: bool,
    /// Allowed relative energy mismatch of initial states.
    pub shell_tolerance: f64,
    pub drift_tolerance: f64,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        Self {
            n_crossings: 500,
            dt: DEFAULT_DT,
            max_time: 1e4,
            refine: true,
            shell_tolerance: 1e-6,
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionPoint {
    pub orbit: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PoincareResult {
    /// Crossings ordered by orbit, then time.
    pub points: Vec<SectionPoint>,
    /// Orbits that ran out of time before `n_crossings` crossings.
    pub incomplete: Vec<usize>,
}

impl PoincareResult {
    pub fn orbit_points(&self, orbit: usize) -> impl Iterator<Item = &SectionPoint> {
        self.points.iter().filter(move |p| p.orbit == orbit)
    }
}

pub fn poincare_section(
    initial_states: &[PhaseState],
    spec: &SectionSpec,
    params: &ModelParams,
    options: &PoincareOptions,
    exec: Execution,
) -> Result<PoincareResult, DynamicsError> {
    if !(options.dt.is_finite() && options.dt > 0.0) {
        return Err(DynamicsError::InvalidRequest(format!("dt = {}", options.dt)));
    }
    for (index, s) in initial_states.iter().enumerate() {
        let energy = total_energy(s, params)?;
        if relative_drift(energy, params.energy) > options.shell_tolerance {
            return Err(DynamicsError::OffShell {
                index,
                energy,
                target: params.energy,
            });
        }
    }
    let orbits = exec.map(initial_states, |i, s| trace_orbit(i, s, spec, params, options));
    let mut result = PoincareResult::default();
    for (i, orbit) in orbits.into_iter().enumerate() {
        let points = orbit?;
        if points.len() < options.n_crossings {
            result.incomplete.push(i);
        }
        result.points.extend(points);
    }
    Ok(result)
}

fn trace_orbit(
    orbit: usize,
    start: &PhaseState,
    spec: &SectionSpec,
    params: &ModelParams,
    options: &PoincareOptions,
) -> Result<Vec<SectionPoint>, DynamicsError> {
    let (im1, im2) = (1.0 / params.m1, 1.0 / params.m2);
    let pin = spec.pinned.index();
    let pin_momentum = spec.pinned.conjugate().index();
    let pin_inv_mass = if spec.pinned == Coordinate::Q1 { im1 } else { im2 };
    let sign = spec.direction.sign();
    let dt = options.dt;
    let e0 = total_energy(start, params)?;
    let max_steps = (options.max_time / dt).ceil() as usize;

    let mut out = Vec::with_capacity(options.n_crossings);
    let mut s = start.to_array();
    // signed distance to the section, oriented so that crossings go - to +
    let mut g_prev = sign * (s[pin] - spec.value);
    for k in 0..max_steps {
        if out.len() >= options.n_crossings {
            break;
        }
        let next = rk4(&s, dt, im1, im2);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(DynamicsError::Overflow {
                state: PhaseState::from_array(s),
            });
        }
        let g_next = sign * (next[pin] - spec.value);
        if g_prev < 0.0 && g_next >= 0.0 {
            let mut tau = dt * g_prev / (g_prev - g_next);
            let crossing = if options.refine {
                let trial = rk4(&s, tau, im1, im2);
                let rate = trial[pin_momentum] * pin_inv_mass;
                if rate != 0.0 {
                    tau -= (trial[pin] - spec.value) / rate;
                }
                rk4(&s, tau, im1, im2)
            } else {
                let w = tau / dt;
                std::array::from_fn(|i| s[i] + w * (next[i] - s[i]))
            };
            let t = k as f64 * dt + tau;
            let state = PhaseState::from_array(crossing);
            let drift = relative_drift(total_energy(&state, params)?, e0);
            if drift > options.drift_tolerance {
                return Err(DynamicsError::EnergyDrift {
                    time: t,
                    drift,
                    tolerance: options.drift_tolerance,
                });
            }
            out.push(SectionPoint {
                orbit,
                t,
                x: crossing[spec.x.index()],
                y: crossing[spec.y.index()],
            });
        }
        g_prev = g_next;
        s = next;
    }
    Ok(out)
}

/// `n` section states with plotted `y` fixed, spread evenly over the
/// interior of the energetically allowed `x` interval.
pub fn initial_states_on_line(
    spec: &SectionSpec,
    params: &ModelParams,
    n: usize,
    y: f64,
) -> Vec<PhaseState> {
    const SPAN: f64 = 20.0;
    const GRID: usize = 40_001;
    let allowed: Vec<f64> = (0..GRID)
        .map(|i| -SPAN + 2.0 * SPAN * i as f64 / (GRID - 1) as f64)
        .filter(|&x| spec.reconstruct(x, y, params).is_some())
        .collect();
    let (Some(&lo), Some(&hi)) = (allowed.first(), allowed.last()) else {
        return Vec::new();
    };
    (1..=n)
        .filter_map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n + 1) as f64;
            spec.reconstruct(x, y, params)
        })
        .collect()
}
