use std::sync::Arc;

use proptest::prelude::*;
use toda_core::dynamics::{integrate_trajectory, total_energy, ModelParams, PhaseState};
use toda_core::ensemble::{cell_entropy, evolve_ensemble, project, sample_initial_ensemble, CellPartition};
use toda_core::quantum::{
    build_hamiltonian, coherent_coefficients, evolve, reduced_density, spectral_decompose, von_neumann_entropy,
    BasisSpec, Propagator,
};
use toda_core::{Execution, Particle, Preset};

/// Phase-space point with the given positions and total energy `e`, the
/// kinetic part split between the particles by `share`.
fn on_shell(q1: f64, q2: f64, share: f64, sign: (bool, bool), params: &ModelParams, e: f64) -> Option<PhaseState> {
    let v = total_energy(&PhaseState::new(q1, q2, 0.0, 0.0), params).ok()?;
    let kin = e - v;
    if kin < 0.0 {
        return None;
    }
    let p1 = (2.0 * params.m1 * kin * share).sqrt();
    let p2 = (2.0 * params.m2 * kin * (1.0 - share)).sqrt();
    Some(PhaseState::new(
        q1,
        q2,
        if sign.0 { p1 } else { -p1 },
        if sign.1 { p2 } else { -p2 },
    ))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn default_step_conserves_energy(
        q1 in -1.5..1.5f64, q2 in -1.5..1.5f64, share in 0.0..1.0f64,
        s1: bool, s2: bool, chaotic: bool,
    ) {
        let preset = if chaotic { Preset::Chaotic } else { Preset::Regular };
        let params = preset.params();
        let state = on_shell(q1, q2, share, (s1, s2), &params, 7.0);
        prop_assume!(state.is_some());
        let traj = integrate_trajectory(&state.unwrap(), 20.0, 1e-3, &params, 1000).unwrap();
        prop_assert!(traj.max_drift < 1e-8);
    }

    #[test]
    fn quantum_evolution_is_unitary(
        q1 in -0.5..0.5f64, q2 in -0.5..0.5f64, p1 in -1.0..1.0f64, p2 in -1.0..1.0f64,
        t in 0.0..50.0f64,
    ) {
        let basis = Arc::new(BasisSpec::triangular(0.5, 1.0, 30).unwrap());
        let params = Preset::Chaotic.params();
        let h = build_hamiltonian(&params, &basis, Execution::Parallel).unwrap();
        let spec = spectral_decompose(&h, &basis, &params).unwrap();
        let psi0 = coherent_coefficients(&PhaseState::new(q1, q2, p1, p2), &basis, 1e-8).unwrap();
        let psi = evolve(&psi0, t, &spec).unwrap();
        prop_assert!((psi.norm_sqr() - psi0.norm_sqr()).abs() < 1e-10);
        let e0 = psi0.expectation(&h);
        prop_assert!((psi.expectation(&h) - e0).abs() < 1e-8 * e0.abs().max(1.0));
        let s1 = von_neumann_entropy(&reduced_density(&psi, Particle::First)).unwrap();
        let s2 = von_neumann_entropy(&reduced_density(&psi, Particle::Second)).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-6, "{} vs {}", s1, s2);
    }

    #[test]
    fn reduced_traces_are_one(t in 0.0..30.0f64) {
        let basis = Arc::new(BasisSpec::triangular(0.5, 1.0, 30).unwrap());
        let params = Preset::Regular.params();
        let h = build_hamiltonian(&params, &basis, Execution::Parallel).unwrap();
        let spec = spectral_decompose(&h, &basis, &params).unwrap();
        let psi0 = coherent_coefficients(&PhaseState::new(0.0, 0.0, 0.8, 0.8), &basis, 1e-8).unwrap();
        let psi = Propagator::new(&spec, &psi0).unwrap().state_at(t);
        for particle in [Particle::First, Particle::Second] {
            let rho = reduced_density(&psi, particle);
            prop_assert!((rho.trace() - psi.norm_sqr()).abs() < 1e-12);
            prop_assert!(rho.hermiticity_error() < 1e-14);
        }
    }
}

#[test]
fn classical_entropy_is_deterministic_under_either_schedule() {
    let preset = Preset::Chaotic;
    let ens = sample_initial_ensemble(&preset.center(), 0.25, 3000, 5).unwrap();
    let a = evolve_ensemble(&ens, 10.0, 0.005, &preset.params(), Execution::Sequential).unwrap();
    let b = evolve_ensemble(&ens, 10.0, 0.005, &preset.params(), Execution::Parallel).unwrap();
    assert_eq!(a.points(), b.points());
    let part = CellPartition::new(0.25).unwrap();
    let sa = cell_entropy(&project(&a, Particle::First), &part, Execution::Sequential).unwrap();
    let sb = cell_entropy(&project(&b, Particle::First), &part, Execution::Parallel).unwrap();
    assert_eq!(sa, sb);
    assert!(sa > cell_entropy(&project(&ens, Particle::First), &part, Execution::Sequential).unwrap());
}
