use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use super::{BasisSpec, QuantumError, SpectralDecomposition};
use crate::dynamics::PhaseState;

/// Two-particle state as complex amplitudes over the admitted pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveVector {
    basis: Arc<BasisSpec>,
    coefficients: Vec<Complex64>,
}

impl WaveVector {
    pub fn new(basis: Arc<BasisSpec>, coefficients: Vec<Complex64>) -> Result<Self, QuantumError> {
        if coefficients.len() != basis.dim() {
            return Err(QuantumError::Config(format!(
                "{} coefficients for a basis of dimension {}",
                coefficients.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, coefficients })
    }

    /// Builds a state from `((n1, n2), amplitude)` terms; unlisted pairs are 0.
    pub fn from_terms(
        basis: Arc<BasisSpec>,
        terms: &[((usize, usize), Complex64)],
    ) -> Result<Self, QuantumError> {
        let mut c = vec![Complex64::new(0.0, 0.0); basis.dim()];
        for &((n1, n2), a) in terms {
            let i = basis
                .index(n1, n2)
                .ok_or_else(|| QuantumError::Config(format!("pair ({n1}, {n2}) is not in the basis")))?;
            c[i] += a;
        }
        Self::new(basis, c)
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `<psi| H |psi>` for a real symmetric `H` on the same basis.
    pub fn expectation(&self, h: &Mat<f64>) -> f64 {
        let d = self.coefficients.len();
        let mut total = 0.0;
        for j in 0..d {
            let cj = self.coefficients[j];
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                acc += self.coefficients[i].conj() * h[(i, j)];
            }
            total += (acc * cj).re;
        }
        total
    }
}

fn same_basis(a: &Arc<BasisSpec>, b: &Arc<BasisSpec>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Single-mode amplitudes, `n = 0..=n_max`, of the Gaussian packet centered
/// at `(q, p)` with `q` variance `hbar / (2 scale omega)` and `p` variance
/// `hbar scale omega / 2`, in the basis of a unit-mass oscillator of
/// frequency `omega`. At `scale = 1` this is the coherent state
/// `exp(-|a|^2/2) a^n / sqrt(n!)`.
fn mode_amplitudes(
    q: f64,
    p: f64,
    hbar: f64,
    omega: f64,
    scale: f64,
    n_max: usize,
) -> Result<Vec<Complex64>, QuantumError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(QuantumError::Config(format!("packet scale must be positive, got {scale}")));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    if scale == 1.0 {
        let a = Complex64::new(q * (omega / (2.0 * hbar)).sqrt(), p / (2.0 * omega * hbar).sqrt());
        let half_norm = 0.5 * a.norm_sqr();
        if half_norm > 700.0 {
            return Err(QuantumError::Overflow(format!(
                "coherent amplitude |alpha|^2 = {} underflows the vacuum weight",
                a.norm_sqr()
            )));
        }
        let mut c = Complex64::new((-half_norm).exp(), 0.0);
        out.push(c);
        for n in 1..=n_max {
            c = c * a / (n as f64).sqrt();
            out.push(c);
        }
        return Ok(out);
    }
    // The packet is the eigenstate of b = mu a + nu a^dagger, the
    // annihilation operator of the stiffer (or softer) oscillator, with
    // eigenvalue beta. Projecting b psi = beta psi onto <n| gives
    // mu sqrt(n+1) c[n+1] + nu sqrt(n) c[n-1] = beta c[n].
    let root = scale.sqrt();
    let (mu, nu) = (0.5 * (root + 1.0 / root), 0.5 * (root - 1.0 / root));
    let beta = Complex64::new(q * (scale * omega / (2.0 * hbar)).sqrt(), p / (2.0 * hbar * scale * omega).sqrt());
    // <0|psi> from the Gaussian overlap integral, phase chosen to agree
    // with the coherent branch as scale -> 1
    let a2 = omega * (1.0 + scale) / (2.0 * hbar);
    let b = Complex64::new(scale * omega * q / hbar, p / hbar);
    let c = Complex64::new(-scale * omega * q * q / (2.0 * hbar), -p * q / (2.0 * hbar));
    let exponent = b * b / (4.0 * a2) + c;
    if exponent.re < -700.0 {
        return Err(QuantumError::Overflow(format!(
            "packet vacuum weight exp({}) underflows",
            2.0 * exponent.re
        )));
    }
    out.push(scale.powf(0.25) * (2.0 / (1.0 + scale)).sqrt() * exponent.exp());
    for n in 0..n_max {
        let prev = if n == 0 { Complex64::new(0.0, 0.0) } else { out[n - 1] };
        let next = (beta * out[n] - nu * (n as f64).sqrt() * prev) / (mu * ((n + 1) as f64).sqrt());
        out.push(next);
    }
    Ok(out)
}

/// `1 - |c|^2` of the separable coherent state centered at `center`
/// restricted to `basis`.
pub fn coherent_deficit(center: &PhaseState, basis: &BasisSpec) -> Result<f64, QuantumError> {
    packet_deficit(center, [1.0, 1.0], basis)
}

/// [`coherent_deficit`] for a packet with per-particle `scales`
/// (see [`crate::PacketWidth::scales`]).
pub fn packet_deficit(center: &PhaseState, scales: [f64; 2], basis: &BasisSpec) -> Result<f64, QuantumError> {
    let (a1, a2) = mode_pair(center, scales, basis, basis.n_max())?;
    let kept: f64 = basis.pairs().map(|(n1, n2)| a1[n1].norm_sqr() * a2[n2].norm_sqr()).sum();
    Ok(1.0 - kept)
}

fn mode_pair(
    center: &PhaseState,
    scales: [f64; 2],
    basis: &BasisSpec,
    n_max: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>), QuantumError> {
    let (h, w) = (basis.hbar(), basis.omega());
    Ok((
        mode_amplitudes(center.q1, center.p1, h, w, scales[0], n_max)?,
        mode_amplitudes(center.q2, center.p2, h, w, scales[1], n_max)?,
    ))
}

/// Smallest cutoff of the same shape (square or triangular) whose
/// truncation deficit is below `tolerance`.
fn required_cutoff(
    center: &PhaseState,
    scales: [f64; 2],
    basis: &BasisSpec,
    tolerance: f64,
) -> Result<usize, QuantumError> {
    const SEARCH_LIMIT: usize = 4000;
    let (a1, a2) = mode_pair(center, scales, basis, SEARCH_LIMIT)?;
    let p1: Vec<f64> = a1.iter().map(|c| c.norm_sqr()).collect();
    let p2: Vec<f64> = a2.iter().map(|c| c.norm_sqr()).collect();
    let mut cum2 = Vec::with_capacity(p2.len());
    let mut acc = 0.0;
    for p in &p2 {
        acc += p;
        cum2.push(acc);
    }
    for n in basis.n_max()..=SEARCH_LIMIT {
        let kept: f64 = (0..=n)
            .map(|n1| {
                // largest admitted n2 for this n1 under the same shape
                let top = (0..=n).rev().find(|&n2| basis.same_shape_admits(n, n1, n2)).unwrap_or(0);
                p1[n1] * cum2[top]
            })
            .sum();
        if 1.0 - kept < tolerance {
            return Ok(n);
        }
    }
    Ok(SEARCH_LIMIT)
}

/// Separable coherent state centered at `center`, each particle expanded in
/// its unit-mass basis oscillator with
/// `alpha = q sqrt(omega / 2 hbar) + i p / sqrt(2 omega hbar)`.
///
/// Fails with [`QuantumError::Truncation`] when the basis keeps less than
/// `1 - tolerance` of the norm.
pub fn coherent_coefficients(
    center: &PhaseState,
    basis: &Arc<BasisSpec>,
    tolerance: f64,
) -> Result<WaveVector, QuantumError> {
    packet_coefficients(center, [1.0, 1.0], basis, tolerance)
}

/// Separable Gaussian packet with per-particle `scales`; equal to
/// [`coherent_coefficients`] when both scales are 1.
pub fn packet_coefficients(
    center: &PhaseState,
    scales: [f64; 2],
    basis: &Arc<BasisSpec>,
    tolerance: f64,
) -> Result<WaveVector, QuantumError> {
    let (a1, a2) = mode_pair(center, scales, basis, basis.n_max())?;
    let coefficients: Vec<Complex64> = basis.pairs().map(|(n1, n2)| a1[n1] * a2[n2]).collect();
    let psi = WaveVector::new(basis.clone(), coefficients)?;
    let deficit = 1.0 - psi.norm_sqr();
    if deficit > tolerance {
        return Err(QuantumError::Truncation {
            deficit,
            tolerance,
            required_cutoff: required_cutoff(center, scales, basis, tolerance)?,
        });
    }
    Ok(psi)
}

/// Spectral propagator `V exp(-i L t / hbar) V^T` applied to one initial
/// state; the projection `V^T psi0` is computed once.
pub struct Propagator<'a> {
    spec: &'a SpectralDecomposition,
    projected: Vec<Complex64>,
}

const TIME_BATCH: usize = 32;

impl<'a> Propagator<'a> {
    pub fn new(spec: &'a SpectralDecomposition, psi0: &WaveVector) -> Result<Self, QuantumError> {
        if !same_basis(spec.basis(), psi0.basis()) {
            return Err(QuantumError::BasisMismatch);
        }
        let d = spec.dim();
        let split = Mat::from_fn(d, 2, |i, j| {
            let c = psi0.coefficients[i];
            if j == 0 {
                c.re
            } else {
                c.im
            }
        });
        let proj = spec.eigenvectors().transpose() * &split;
        let projected = (0..d).map(|k| Complex64::new(proj[(k, 0)], proj[(k, 1)])).collect();
        Ok(Self { spec, projected })
    }

    pub fn state_at(&self, t: f64) -> WaveVector {
        self.states_at(&[t]).pop().expect("one time in, one state out")
    }

    /// States at each of `times`, evaluated as batched matrix products.
    pub fn states_at(&self, times: &[f64]) -> Vec<WaveVector> {
        let mut out = Vec::with_capacity(times.len());
        for batch in times.chunks(TIME_BATCH) {
            out.extend(self.batch(batch));
        }
        out
    }

    fn batch(&self, times: &[f64]) -> Vec<WaveVector> {
        let d = self.spec.dim();
        let hbar = self.spec.basis().hbar();
        let energies = self.spec.eigenvalues();
        let nt = times.len();
        // columns 2k / 2k+1: real / imaginary parts in the eigenbasis at times[k]
        let mut rotated = Mat::<f64>::zeros(d, 2 * nt);
        for (k, &t) in times.iter().enumerate() {
            for i in 0..d {
                let (s, c) = (-energies[i] * t / hbar).sin_cos();
                let z = self.projected[i] * Complex64::new(c, s);
                rotated[(i, 2 * k)] = z.re;
                rotated[(i, 2 * k + 1)] = z.im;
            }
        }
        let psi = self.spec.eigenvectors() * &rotated;
        (0..nt)
            .map(|k| WaveVector {
                basis: self.spec.basis().clone(),
                coefficients: (0..d)
                    .map(|i| Complex64::new(psi[(i, 2 * k)], psi[(i, 2 * k + 1)]))
                    .collect(),
            })
            .collect()
    }
}

/// `psi(t) = V exp(-i L t / hbar) V^T psi(0)`.
pub fn evolve(psi0: &WaveVector, t: f64, spec: &SpectralDecomposition) -> Result<WaveVector, QuantumError> {
    Ok(Propagator::new(spec, psi0)?.state_at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Preset;
    use crate::exec::Execution;
    use crate::quantum::{build_hamiltonian, spectral_decompose, TRUNCATION_TOLERANCE};

    #[test]
    fn vacuum_is_a_single_coefficient() {
        let b = Arc::new(BasisSpec::new(1.0, 1.0, 5, None).unwrap());
        let psi = coherent_coefficients(&PhaseState::default(), &b, TRUNCATION_TOLERANCE).unwrap();
        assert_eq!(psi.coefficients()[0], Complex64::new(1.0, 0.0));
        assert!(psi.coefficients()[1..].iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn occupations_are_poissonian() {
        let center = PhaseState::new(0.0, 0.0, 7f64.sqrt(), 0.0);
        let amps = mode_amplitudes(center.q1, center.p1, 1.0, 1.0, 1.0, 40).unwrap();
        let mean = 3.5f64;
        let mut poisson = (-mean).exp();
        for (n, a) in amps.iter().enumerate() {
            if n > 0 {
                poisson *= mean / n as f64;
            }
            assert!((a.norm_sqr() - poisson).abs() < 1e-10, "n = {n}");
        }
    }

    /// Mean and variance of `x` and `p` from number-basis amplitudes.
    fn moments(c: &[Complex64], hbar: f64, omega: f64) -> [f64; 4] {
        let zero = Complex64::new(0.0, 0.0);
        let at = |n: usize| c.get(n).copied().unwrap_or(zero);
        let (mut a, mut a2, mut n_op) = (zero, zero, 0.0);
        for n in 0..c.len() {
            a += at(n).conj() * at(n + 1) * ((n + 1) as f64).sqrt();
            a2 += at(n).conj() * at(n + 2) * (((n + 1) * (n + 2)) as f64).sqrt();
            n_op += n as f64 * at(n).norm_sqr();
        }
        // x = sqrt(hbar/2w)(a + a+), p = i sqrt(hbar w/2)(a+ - a)
        let x = (hbar / (2.0 * omega)).sqrt() * 2.0 * a.re;
        let p = (hbar * omega / 2.0).sqrt() * 2.0 * a.im;
        let x2 = hbar / (2.0 * omega) * (2.0 * a2.re + 2.0 * n_op + 1.0);
        let p2 = hbar * omega / 2.0 * (-2.0 * a2.re + 2.0 * n_op + 1.0);
        [x, p, x2 - x * x, p2 - p * p]
    }

    #[test]
    fn packet_has_the_requested_widths() {
        for (hbar, omega, scale) in [(0.5, 1.0, 0.54), (0.25, 1.3, 2.5), (1.0, 0.7, 1.0)] {
            let (q, p) = (0.4, -1.1);
            let c = mode_amplitudes(q, p, hbar, omega, scale, 300).unwrap();
            let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12, "norm {norm}");
            let [x, pm, vx, vp] = moments(&c, hbar, omega);
            assert!((x - q).abs() < 1e-10 && (pm - p).abs() < 1e-10, "{x} {pm}");
            assert!((vx - hbar / (2.0 * scale * omega)).abs() < 1e-10, "{vx}");
            assert!((vp - hbar * scale * omega / 2.0).abs() < 1e-10, "{vp}");
        }
    }

    #[test]
    fn squeezed_branch_meets_coherent_branch() {
        let (q, p) = (0.3, 2.0);
        let coherent = mode_amplitudes(q, p, 0.5, 1.0, 1.0, 60).unwrap();
        let near = mode_amplitudes(q, p, 0.5, 1.0, 1.0 + 1e-9, 60).unwrap();
        for (a, b) in coherent.iter().zip(&near) {
            assert!((a - b).norm() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_scales_reproduce_the_coherent_state() {
        let b = Arc::new(BasisSpec::triangular(0.5, 1.0, 40).unwrap());
        let c = Preset::Chaotic.center();
        let plain = coherent_coefficients(&c, &b, 1e-8).unwrap();
        assert_eq!(packet_coefficients(&c, [1.0, 1.0], &b, 1e-8).unwrap(), plain);
        let matched = packet_coefficients(&c, [1.0, Preset::CHAOTIC_M2], &b, 1e-6).unwrap();
        assert!((matched.norm_sqr() - 1.0).abs() < 1e-6);
        assert_ne!(matched, plain);
    }

    #[test]
    fn truncation_deficit_shrinks_with_cutoff() {
        let center = Preset::Regular.center();
        let deficits: Vec<f64> = [30, 40, 50, 60]
            .iter()
            .map(|&n| coherent_deficit(&center, &BasisSpec::new(0.25, 1.0, n, None).unwrap()).unwrap())
            .collect();
        assert!(deficits.windows(2).all(|w| w[1] < w[0]), "{deficits:?}");
        assert!(deficits[3] < 1e-8, "{deficits:?}");
    }

    #[test]
    fn insufficient_basis_names_the_required_cutoff() {
        let b = Arc::new(BasisSpec::new(0.25, 1.0, 20, None).unwrap());
        match coherent_coefficients(&Preset::Regular.center(), &b, TRUNCATION_TOLERANCE) {
            Err(QuantumError::Truncation { required_cutoff, .. }) => {
                let ok = BasisSpec::new(0.25, 1.0, required_cutoff, None).unwrap();
                assert!(coherent_deficit(&Preset::Regular.center(), &ok).unwrap() < TRUNCATION_TOLERANCE);
                let short = BasisSpec::new(0.25, 1.0, required_cutoff - 1, None).unwrap();
                assert!(coherent_deficit(&Preset::Regular.center(), &short).unwrap() >= TRUNCATION_TOLERANCE);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    fn small_system() -> (Arc<BasisSpec>, Mat<f64>, SpectralDecomposition) {
        let b = Arc::new(BasisSpec::triangular(1.0, 1.0, 30).unwrap());
        let p = Preset::Chaotic.params();
        let h = build_hamiltonian(&p, &b, Execution::Parallel).unwrap();
        let spec = spectral_decompose(&h, &b, &p).unwrap();
        (b, h, spec)
    }

    #[test]
    fn evolution_is_unitary_and_conserves_energy() {
        let (b, h, spec) = small_system();
        let psi0 = coherent_coefficients(&PhaseState::new(0.0, 0.0, 1.0, -0.5), &b, 1e-8).unwrap();
        let at0 = evolve(&psi0, 0.0, &spec).unwrap();
        for (a, c) in at0.coefficients().iter().zip(psi0.coefficients()) {
            assert!((a - c).norm() < 1e-12);
        }
        let n0 = psi0.norm_sqr();
        let e0 = psi0.expectation(&h);
        for t in [1.0, 10.0, 100.0] {
            let psi = evolve(&psi0, t, &spec).unwrap();
            assert!((psi.norm_sqr() - n0).abs() < 1e-10);
            assert!((psi.expectation(&h) - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn batched_and_single_times_agree() {
        let (b, _, spec) = small_system();
        let psi0 = coherent_coefficients(&PhaseState::new(0.2, 0.0, 1.0, 0.0), &b, 1e-8).unwrap();
        let prop = Propagator::new(&spec, &psi0).unwrap();
        let times: Vec<f64> = (0..70).map(|k| 0.3 * k as f64).collect();
        let many = prop.states_at(&times);
        for (k, &t) in times.iter().enumerate().step_by(13) {
            let one = prop.state_at(t);
            for (a, c) in one.coefficients().iter().zip(many[k].coefficients()) {
                assert!((a - c).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let (_, _, spec) = small_system();
        let other = Arc::new(BasisSpec::triangular(0.5, 1.0, 30).unwrap());
        let psi = coherent_coefficients(&PhaseState::default(), &other, 1e-8).unwrap();
        assert!(matches!(evolve(&psi, 1.0, &spec), Err(QuantumError::BasisMismatch)));
    }
}
