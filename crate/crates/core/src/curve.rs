use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("times ({times}) and values ({values}) differ in length")]
    LengthMismatch { times: usize, values: usize },
    #[error("times must be finite and strictly ascending (index {0})")]
    NotAscending(usize),
    #[error("entropy value {value} at index {index} is negative or not finite")]
    BadValue { index: usize, value: f64 },
}

/// Which particle's reduced description a curve refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Particle {
    First,
    Second,
}

impl Particle {
    pub fn number(self) -> u8 {
        match self {
            Particle::First => 1,
            Particle::Second => 2,
        }
    }
}

/// Provenance of an entropy curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurveTag {
    /// von Neumann entropy of the reduced density matrix at `hbar`.
    Quantum { hbar: f64 },
    /// Cell entropy at cell area `delta` of an ensemble of `m` points drawn
    /// with width parameter `width` and `seed`.
    Classical {
        delta: f64,
        width: f64,
        m: usize,
        seed: u64,
    },
}

impl CurveTag {
    /// `hbar` for quantum curves, `delta` for classical ones.
    pub fn scale(&self) -> f64 {
        match *self {
            CurveTag::Quantum { hbar } => hbar,
            CurveTag::Classical { delta, .. } => delta,
        }
    }
}

/// Entropy sampled on an ascending time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyCurve {
    times: Vec<f64>,
    values: Vec<f64>,
    pub tag: CurveTag,
    pub particle: Particle,
}

impl EntropyCurve {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        tag: CurveTag,
        particle: Particle,
    ) -> Result<Self, CurveError> {
        if times.len() != values.len() {
            return Err(CurveError::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= times[i - 1]) {
                return Err(CurveError::NotAscending(i));
            }
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CurveError::BadValue { index, value });
            }
        }
        Ok(Self {
            times,
            values,
            tag,
            particle,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    /// `(t, S)` pairs with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .filter(move |(t, _)| **t >= lo && **t <= hi)
            .map(|(t, s)| (*t, *s))
    }

    /// Linear interpolation; `None` outside the sampled span.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.span()?;
        if t < lo || t > hi {
            return None;
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            return Some(self.values[0]);
        }
        if k == self.times.len() {
            return Some(self.values[k - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (s0, s1) = (self.values[k - 1], self.values[k]);
        Some(s0 + (s1 - s0) * (t - t0) / (t1 - t0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag() -> CurveTag {
        CurveTag::Quantum { hbar: 0.5 }
    }

    #[test]
    fn validation() {
        assert!(EntropyCurve::new(vec![0.0, 1.0], vec![0.0], tag(), Particle::First).is_err());
        assert!(EntropyCurve::new(vec![0.0, 0.0], vec![0.0, 0.0], tag(), Particle::First).is_err());
        assert!(EntropyCurve::new(vec![0.0, 1.0], vec![0.0, -0.1], tag(), Particle::First).is_err());
        assert!(EntropyCurve::new(vec![0.0, 1.0], vec![0.0, 0.1], tag(), Particle::First).is_ok());
    }

    #[test]
    fn interpolation() {
        let c = EntropyCurve::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 4.0], tag(), Particle::First).unwrap();
        assert_eq!(c.interpolate(0.5), Some(1.0));
        assert_eq!(c.interpolate(2.0), Some(3.0));
        assert_eq!(c.interpolate(3.0), Some(4.0));
        assert_eq!(c.interpolate(0.0), Some(0.0));
        assert_eq!(c.interpolate(3.5), None);
        assert_eq!(c.window(0.5, 3.0).count(), 2);
    }
}
