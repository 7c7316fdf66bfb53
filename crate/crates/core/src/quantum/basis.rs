use super::QuantumError;

const NOT_ADMITTED: u32 = u32::MAX;

/// Product basis `|n1> (x) |n2>` of two unit-mass oscillators of frequency
/// `omega`, with `n1, n2 <= n_max` and optionally `n1 + n2 <= n_sum_max`.
///
/// Admitted pairs are indexed lexicographically (`n1` outer).
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpec {
    hbar: f64,
    omega: f64,
    n_max: usize,
    n_sum_max: Option<usize>,
    pairs: Vec<(u32, u32)>,
    lookup: Vec<u32>,
}

impl BasisSpec {
    pub fn new(hbar: f64, omega: f64, n_max: usize, n_sum_max: Option<usize>) -> Result<Self, QuantumError> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(QuantumError::Config(format!("hbar must be positive, got {hbar}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(QuantumError::Config(format!("omega must be positive, got {omega}")));
        }
        if n_max > 2000 {
            return Err(QuantumError::Config(format!("n_max {n_max} is out of range")));
        }
        if let Some(s) = n_sum_max {
            if s < n_max || s > 2 * n_max {
                return Err(QuantumError::Config(format!(
                    "n_sum_max {s} must lie in [n_max, 2 n_max] = [{n_max}, {}]",
                    2 * n_max
                )));
            }
        }
        let side = n_max + 1;
        let mut pairs = Vec::new();
        let mut lookup = vec![NOT_ADMITTED; side * side];
        for n1 in 0..side {
            for n2 in 0..side {
                if n_sum_max.is_none_or(|s| n1 + n2 <= s) {
                    lookup[n1 * side + n2] = pairs.len() as u32;
                    pairs.push((n1 as u32, n2 as u32));
                }
            }
        }
        Ok(Self {
            hbar,
            omega,
            n_max,
            n_sum_max,
            pairs,
            lookup,
        })
    }

    /// Triangular cutoff `n1 + n2 <= n`.
    pub fn triangular(hbar: f64, omega: f64, n: usize) -> Result<Self, QuantumError> {
        Self::new(hbar, omega, n, Some(n))
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn n_max(&self) -> usize {
        self.n_max
    }
    pub fn n_sum_max(&self) -> Option<usize> {
        self.n_sum_max
    }

    /// Number of admitted pairs.
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Single-mode dimension `n_max + 1`.
    pub fn mode_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn pair(&self, index: usize) -> (usize, usize) {
        let (a, b) = self.pairs[index];
        (a as usize, b as usize)
    }

    pub fn pairs(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    pub fn index(&self, n1: usize, n2: usize) -> Option<usize> {
        if n1 > self.n_max || n2 > self.n_max {
            return None;
        }
        match self.lookup[n1 * self.mode_dim() + n2] {
            NOT_ADMITTED => None,
            i => Some(i as usize),
        }
    }

    /// Whether the same cutoff shape with every bound set to `n` admits
    /// `(n1, n2)`; used when searching for an adequate cutoff.
    pub(crate) fn same_shape_admits(&self, n: usize, n1: usize, n2: usize) -> bool {
        match self.n_sum_max {
            Some(_) => n1 + n2 <= n,
            None => n1 <= n && n2 <= n,
        }
    }
}
