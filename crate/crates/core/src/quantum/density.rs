use faer::{c64, Mat, Side};

use super::{QuantumError, WaveVector};
use crate::curve::Particle;

/// Reduced density matrix of one particle on its single-mode basis.
#[derive(Clone, Debug)]
pub struct ReducedDensity {
    entries: Mat<c64>,
}

impl ReducedDensity {
    pub fn from_matrix(entries: Mat<c64>) -> Result<Self, QuantumError> {
        if entries.nrows() != entries.ncols() {
            return Err(QuantumError::Config("density matrix must be square".into()));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Ascending eigenvalues, unclipped.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, QuantumError> {
        self.entries
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| QuantumError::Eigensolver(format!("reduced density: {e:?}")))
    }
}

/// Partial trace of a pure state over the other particle.
///
/// With `C[n1, n2]` the amplitude matrix (zero off the admitted pairs),
/// particle 1 gets `C C^dagger` and particle 2 gets `C^T conj(C)`.
pub fn reduced_density(psi: &WaveVector, particle: Particle) -> ReducedDensity {
    let basis = psi.basis();
    let n = basis.mode_dim();
    let mut amps = Mat::<c64>::zeros(n, n);
    for (i, (n1, n2)) in basis.pairs().enumerate() {
        let c = psi.coefficients()[i];
        match particle {
            Particle::First => amps[(n1, n2)] = c,
            Particle::Second => amps[(n2, n1)] = c,
        }
    }
    let rho = &amps * amps.adjoint();
    // symmetrize away round-off asymmetry from the product
    let entries = Mat::from_fn(n, n, |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
    ReducedDensity { entries }
}

/// Eigenvalues below this are corruption rather than round-off.
pub const NEGATIVE_EIGENVALUE_LIMIT: f64 = -1e-6;

/// `-sum(l ln l)` over eigenvalues clipped to `[0, 1]`, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &ReducedDensity) -> Result<f64, QuantumError> {
    let eig = rho.eigenvalues()?;
    if let Some(&min) = eig.first() {
        if min < NEGATIVE_EIGENVALUE_LIMIT {
            return Err(QuantumError::InvalidDensity { min_eigenvalue: min });
        }
    }
    Ok(eig
        .iter()
        .map(|&l| l.clamp(0.0, 1.0))
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::BasisSpec;
    use num_complex::Complex64;
    use std::sync::Arc;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn bell_state_has_ln2_entropy() {
        let b = Arc::new(BasisSpec::new(1.0, 1.0, 3, None).unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = WaveVector::from_terms(b, &[((0, 0), c(h)), ((1, 1), c(h))]).unwrap();
        let rho = reduced_density(&psi, Particle::First);
        assert!((rho.entries()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho.entries()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert_eq!(rho.entries()[(0, 1)].norm(), 0.0);
        let s = von_neumann_entropy(&rho).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12, "{s}");
    }

    #[test]
    fn product_state_is_pure() {
        let b = Arc::new(BasisSpec::new(1.0, 1.0, 3, None).unwrap());
        // (|0> + i|2>)/sqrt2 (x) (|1> - |3>)/sqrt2
        let h = 0.5;
        let i = Complex64::new(0.0, 1.0);
        let terms = [
            ((0, 1), c(h)),
            ((0, 3), c(-h)),
            ((2, 1), i * h),
            ((2, 3), -i * h),
        ];
        let psi = WaveVector::from_terms(b, &terms).unwrap();
        for particle in [Particle::First, Particle::Second] {
            let rho = reduced_density(&psi, particle);
            let purity: f64 = {
                let sq = rho.entries() * rho.entries();
                (0..rho.dim()).map(|k| sq[(k, k)].re).sum()
            };
            assert!((purity - 1.0).abs() < 1e-12);
            assert!(von_neumann_entropy(&rho).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_entropies() {
        let rho = |d: &[f64]| {
            let m = Mat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i]) } else { c(0.0) });
            ReducedDensity::from_matrix(m).unwrap()
        };
        assert!(von_neumann_entropy(&rho(&[1.0, 0.0])).unwrap().abs() < 1e-15);
        assert!((von_neumann_entropy(&rho(&[0.5, 0.5])).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((von_neumann_entropy(&rho(&[0.9, 0.1])).unwrap() - 0.325_082_9).abs() < 1e-7);
        assert!(matches!(
            von_neumann_entropy(&rho(&[1.1, -0.1])),
            Err(QuantumError::InvalidDensity { .. })
        ));
        // tiny negative round-off is clipped
        assert!(von_neumann_entropy(&rho(&[1.0 + 1e-9, -1e-9])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn schmidt_spectra_agree() {
        let b = Arc::new(BasisSpec::triangular(1.0, 1.0, 6).unwrap());
        let coeffs: Vec<Complex64> = (0..b.dim())
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi = WaveVector::new(b, coeffs.iter().map(|z| z / norm).collect()).unwrap();
        let r1 = reduced_density(&psi, Particle::First);
        let r2 = reduced_density(&psi, Particle::Second);
        assert!((r1.trace() - 1.0).abs() < 1e-12);
        assert!(r1.hermiticity_error() < 1e-14);
        let e1 = r1.eigenvalues().unwrap();
        let e2 = r2.eigenvalues().unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-12);
        }
        let s1 = von_neumann_entropy(&r1).unwrap();
        let s2 = von_neumann_entropy(&r2).unwrap();
        assert!((s1 - s2).abs() < 1e-10 && s1 > 0.1);
    }
}
