use faer::{Mat, MatRef};

use super::{ho_exp_matrix, ho_p2_matrix, ho_q2_matrix, BasisSpec, QuantumError};
use crate::dynamics::ModelParams;
use crate::exec::Execution;

/// Quantized Toda Hamiltonian on the admitted product basis:
///
/// `T1 (x) 1 + 1 (x) T2 + e^{-q1} (x) 1 + e^{q1} (x) e^{-q2} + 1 (x) e^{q2} - 3`
///
/// with `Ti = p^2 / 2 mi`. Every entry is assembled from single-mode
/// factors in the same order for `(i, j)` and `(j, i)`, so the result is
/// exactly symmetric.
pub fn build_hamiltonian(
    params: &ModelParams,
    basis: &BasisSpec,
    exec: Execution,
) -> Result<Mat<f64>, QuantumError> {
    let p2 = ho_p2_matrix(basis);
    let t1 = scaled(&p2, 0.5 / params.m1);
    let t2 = scaled(&p2, 0.5 / params.m2);
    let exp_minus = ho_exp_matrix(-1.0, basis)?;
    let exp_plus = ho_exp_matrix(1.0, basis)?;
    Ok(assemble(basis, exec, |(m1, m2), (n1, n2)| {
        let mut h = 0.0;
        if m2 == n2 {
            h += t1[(m1, n1)] + exp_minus[(m1, n1)];
        }
        if m1 == n1 {
            h += t2[(m2, n2)] + exp_plus[(m2, n2)];
        }
        h += exp_plus[(m1, n1)] * exp_minus[(m2, n2)];
        if m1 == n1 && m2 == n2 {
            h -= 3.0;
        }
        h
    }))
}

/// Two uncoupled unit-mass oscillators of the basis frequency; its spectrum
/// is `hbar omega (n1 + n2 + 1)`.
pub fn build_oscillator_hamiltonian(basis: &BasisSpec, exec: Execution) -> Mat<f64> {
    let w2 = basis.omega() * basis.omega();
    let p2 = ho_p2_matrix(basis);
    let q2 = ho_q2_matrix(basis);
    let single = Mat::from_fn(basis.mode_dim(), basis.mode_dim(), |i, j| {
        0.5 * p2[(i, j)] + 0.5 * w2 * q2[(i, j)]
    });
    assemble(basis, exec, |(m1, m2), (n1, n2)| {
        let mut h = 0.0;
        if m2 == n2 {
            h += single[(m1, n1)];
        }
        if m1 == n1 {
            h += single[(m2, n2)];
        }
        h
    })
}

fn scaled(m: &Mat<f64>, s: f64) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| s * m[(i, j)])
}

fn assemble<F>(basis: &BasisSpec, exec: Execution, entry: F) -> Mat<f64>
where
    F: Fn((usize, usize), (usize, usize)) -> f64 + Sync + Send,
{
    let d = basis.dim();
    let pairs: Vec<(usize, usize)> = basis.pairs().collect();
    let mut data = vec![0.0; d * d];
    exec.fill_chunks(&mut data, d, |j, column| {
        let col_pair = pairs[j];
        for (i, v) in column.iter_mut().enumerate() {
            *v = entry(pairs[i], col_pair);
        }
    });
    MatRef::from_column_major_slice(&data, d, d).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Preset;

    #[test]
    fn vacuum_expectation() {
        // 0.25 + 0.25 + 2 e^{1/4} + e^{1/2} - 3
        let b = BasisSpec::new(1.0, 1.0, 6, None).unwrap();
        let h = build_hamiltonian(&Preset::Regular.params(), &b, Execution::Sequential).unwrap();
        let expect = 0.5 + 2.0 * 0.25f64.exp() + 0.5f64.exp() - 3.0;
        assert!((h[(0, 0)] - expect).abs() < 1e-13);
        assert!((h[(0, 0)] - 1.716_772_1).abs() < 1e-7);
    }

    #[test]
    fn exactly_symmetric_and_deterministic() {
        let b = BasisSpec::triangular(0.5, 1.0, 12).unwrap();
        let p = Preset::Chaotic.params();
        let h = build_hamiltonian(&p, &b, Execution::Parallel).unwrap();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
        let h_seq = build_hamiltonian(&p, &b, Execution::Sequential).unwrap();
        assert_eq!(h, h_seq);
    }

    #[test]
    fn square_and_triangular_share_entries() {
        let sq = BasisSpec::new(0.5, 1.0, 8, None).unwrap();
        let tri = BasisSpec::triangular(0.5, 1.0, 8).unwrap();
        let p = Preset::Regular.params();
        let hs = build_hamiltonian(&p, &sq, Execution::Sequential).unwrap();
        let ht = build_hamiltonian(&p, &tri, Execution::Sequential).unwrap();
        for i in 0..tri.dim() {
            for j in 0..tri.dim() {
                let (a, b) = tri.pair(i);
                let (c, d) = tri.pair(j);
                let (si, sj) = (sq.index(a, b).unwrap(), sq.index(c, d).unwrap());
                assert_eq!(ht[(i, j)], hs[(si, sj)]);
            }
        }
    }
}
