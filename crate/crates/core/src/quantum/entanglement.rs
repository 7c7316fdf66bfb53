use std::sync::Arc;

use super::{
    build_hamiltonian, packet_coefficients, reduced_density, spectral_decompose, von_neumann_entropy,
    BasisSpec, Propagator, QuantumError, SpectralDecomposition, TRUNCATION_TOLERANCE,
};
use crate::curve::{CurveTag, EntropyCurve, Particle};
use crate::dynamics::{ModelParams, PacketWidth, PhaseState};
use crate::exec::Execution;
use crate::Error;

/// Entanglement entropy of both particles for the wave packet centered at
/// `center`, on an already diagonalized Hamiltonian.
pub fn entanglement_curves(
    spec: &SpectralDecomposition,
    center: &PhaseState,
    width: PacketWidth,
    times: &[f64],
    exec: Execution,
) -> Result<[EntropyCurve; 2], Error> {
    let scales = width.scales(spec.model());
    let psi0 = packet_coefficients(center, scales, spec.basis(), TRUNCATION_TOLERANCE)?;
    let propagator = Propagator::new(spec, &psi0)?;
    let states = propagator.states_at(times);
    let entropies = exec.map(&states, |_, psi| -> Result<(f64, f64), QuantumError> {
        Ok((
            von_neumann_entropy(&reduced_density(psi, Particle::First))?,
            von_neumann_entropy(&reduced_density(psi, Particle::Second))?,
        ))
    });
    let mut s1 = Vec::with_capacity(times.len());
    let mut s2 = Vec::with_capacity(times.len());
    for e in entropies {
        let (a, b) = e?;
        s1.push(a);
        s2.push(b);
    }
    let tag = CurveTag::Quantum {
        hbar: spec.basis().hbar(),
    };
    Ok([
        EntropyCurve::new(times.to_vec(), s1, tag, Particle::First)?,
        EntropyCurve::new(times.to_vec(), s2, tag, Particle::Second)?,
    ])
}

/// Builds and diagonalizes the Hamiltonian, then returns particle 1's
/// entanglement curve.
pub fn entanglement_curve(
    params: &ModelParams,
    basis: &BasisSpec,
    center: &PhaseState,
    width: PacketWidth,
    times: &[f64],
    exec: Execution,
) -> Result<EntropyCurve, Error> {
    // fail on truncation before paying for the eigensolve
    packet_coefficients(center, width.scales(params), &Arc::new(basis.clone()), TRUNCATION_TOLERANCE)?;
    let h = build_hamiltonian(params, basis, exec)?;
    let spec = spectral_decompose(&h, basis, params)?;
    let [first, _] = entanglement_curves(&spec, center, width, times, exec)?;
    Ok(first)
}
