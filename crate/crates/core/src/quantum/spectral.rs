use std::sync::Arc;

use faer::{Mat, Side};

use super::{BasisSpec, QuantumError};
use crate::dynamics::ModelParams;

/// Orthogonality tolerance: sup-norm of `V^T V - I`.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;
/// Reconstruction tolerance: `|V L V^T - H|_F / |H|_F`.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-8;
/// The potential is bounded below by zero.
pub const MIN_EIGENVALUE: f64 = -1e-6;

/// Full eigensolution of a truncated Hamiltonian. Immutable once built.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    basis: Arc<BasisSpec>,
    model: ModelParams,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl SpectralDecomposition {
    /// Reassembles a decomposition (e.g. from a cache), checking shapes,
    /// ordering and the eigenvalue bound. Orthogonality is checked
    /// separately through [`Self::orthogonality_error`].
    pub fn from_parts(
        basis: Arc<BasisSpec>,
        model: ModelParams,
        eigenvalues: Vec<f64>,
        eigenvectors: Mat<f64>,
    ) -> Result<Self, QuantumError> {
        let d = basis.dim();
        if eigenvalues.len() != d || eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(QuantumError::Invariant(format!(
                "expected dimension {d}, got {} eigenvalues and a {}x{} eigenvector matrix",
                eigenvalues.len(),
                eigenvectors.nrows(),
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(QuantumError::Invariant("eigenvalues are not ascending".into()));
        }
        if let Some(&lowest) = eigenvalues.first() {
            if lowest < MIN_EIGENVALUE {
                return Err(QuantumError::Invariant(format!(
                    "lowest eigenvalue {lowest} is below the potential minimum"
                )));
            }
        }
        Ok(Self {
            basis,
            model,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }
    pub fn model(&self) -> &ModelParams {
        &self.model
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    /// Columns are eigenvectors.
    pub fn eigenvectors(&self) -> &Mat<f64> {
        &self.eigenvectors
    }
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Sup-norm of `V^T V - I`.
    pub fn orthogonality_error(&self) -> f64 {
        let v = &self.eigenvectors;
        let gram = v.transpose() * v;
        let mut worst = 0.0f64;
        for j in 0..gram.ncols() {
            for i in 0..gram.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `|V L V^T - H|_F / |H|_F`.
    pub fn reconstruction_error(&self, h: &Mat<f64>) -> f64 {
        let v = &self.eigenvectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        let rebuilt = &scaled * v.transpose();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..h.ncols() {
            for i in 0..h.nrows() {
                let d = rebuilt[(i, j)] - h[(i, j)];
                num += d * d;
                den += h[(i, j)] * h[(i, j)];
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Dense symmetric eigensolution with the invariant checks applied.
pub fn spectral_decompose(
    h: &Mat<f64>,
    basis: &BasisSpec,
    model: &ModelParams,
) -> Result<SpectralDecomposition, QuantumError> {
    let d = basis.dim();
    if h.nrows() != d || h.ncols() != d {
        return Err(QuantumError::Config(format!(
            "matrix is {}x{} but the basis has dimension {d}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for j in 0..d {
        for i in 0..d {
            scale = scale.max(h[(i, j)].abs());
            asym = asym.max((h[(i, j)] - h[(j, i)]).abs());
            if !h[(i, j)].is_finite() {
                return Err(QuantumError::Eigensolver(format!("entry ({i}, {j}) is not finite")));
            }
        }
    }
    if asym > 1e-12 * scale.max(1.0) {
        return Err(QuantumError::Config(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }

    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| QuantumError::Eigensolver(format!("{e:?} (dimension {d}, max |H_ij| = {scale:e})")))?;
    let eigenvalues: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let eigenvectors = evd.U().to_owned();

    let spec = SpectralDecomposition::from_parts(Arc::new(basis.clone()), *model, eigenvalues, eigenvectors)?;
    let ortho = spec.orthogonality_error();
    if ortho > ORTHOGONALITY_TOLERANCE {
        return Err(QuantumError::Invariant(format!(
            "eigenvectors deviate from orthogonality by {ortho:e}"
        )));
    }
    let recon = spec.reconstruction_error(h);
    if recon > RECONSTRUCTION_TOLERANCE {
        return Err(QuantumError::Invariant(format!("reconstruction residual {recon:e}")));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Preset;
    use crate::exec::Execution;
    use crate::quantum::{build_hamiltonian, build_oscillator_hamiltonian};

    #[test]
    fn two_by_two_blocks() {
        // [[2,1],[1,2]] twice on the diagonal of the 4-state square basis
        let b = BasisSpec::new(1.0, 1.0, 1, None).unwrap();
        let h = Mat::from_fn(4, 4, |i, j| match (i / 2 == j / 2, i == j) {
            (true, true) => 2.0,
            (true, false) => 1.0,
            _ => 0.0,
        });
        let spec = spectral_decompose(&h, &b, &Preset::Regular.params()).unwrap();
        let want = [1.0, 1.0, 3.0, 3.0];
        for (got, want) in spec.eigenvalues().iter().zip(want) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn toda_matrix_reconstructs() {
        let b = BasisSpec::new(0.5, 1.0, 20, None).unwrap();
        let p = Preset::Chaotic.params();
        let h = build_hamiltonian(&p, &b, Execution::Parallel).unwrap();
        let spec = spectral_decompose(&h, &b, &p).unwrap();
        assert!(spec.reconstruction_error(&h) < 1e-10);
        assert!(spec.orthogonality_error() < 1e-10);
        assert!(spec.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn oscillator_spectrum() {
        let b = BasisSpec::triangular(0.5, 1.0, 10).unwrap();
        let h = build_oscillator_hamiltonian(&b, Execution::Sequential);
        let spec = spectral_decompose(&h, &b, &Preset::Regular.params()).unwrap();
        let mut expect: Vec<f64> = b.pairs().map(|(a, c)| 0.5 * (a + c + 1) as f64).collect();
        expect.sort_by(f64::total_cmp);
        for (got, want) in spec.eigenvalues().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn ground_state_variational_bounds() {
        let b = BasisSpec::new(1.0, 1.0, 40, Some(40)).unwrap();
        let p = Preset::Regular.params();
        let h = build_hamiltonian(&p, &b, Execution::Parallel).unwrap();
        let spec = spectral_decompose(&h, &b, &p).unwrap();
        let e0 = spec.eigenvalues()[0];
        assert!(e0 > 0.0 && e0 <= 1.716_779, "{e0}");
    }

    #[test]
    fn rejects_asymmetric_input() {
        let b = BasisSpec::new(1.0, 1.0, 1, None).unwrap();
        let mut h = Mat::<f64>::identity(4, 4);
        h[(0, 1)] = 1.0;
        assert!(matches!(
            spectral_decompose(&h, &b, &Preset::Regular.params()),
            Err(QuantumError::Config(_))
        ));
    }

    #[test]
    fn from_parts_checks_shape_and_order() {
        let b = Arc::new(BasisSpec::new(1.0, 1.0, 1, None).unwrap());
        let p = Preset::Regular.params();
        let v = Mat::<f64>::identity(4, 4);
        assert!(SpectralDecomposition::from_parts(b.clone(), p, vec![0.0; 3], v.clone()).is_err());
        assert!(SpectralDecomposition::from_parts(b.clone(), p, vec![1.0, 0.0, 2.0, 3.0], v.clone()).is_err());
        assert!(SpectralDecomposition::from_parts(b.clone(), p, vec![-1.0, 0.0, 2.0, 3.0], v.clone()).is_err());
        assert!(SpectralDecomposition::from_parts(b, p, vec![0.0, 1.0, 2.0, 3.0], v).is_ok());
    }
}
