//! Single-mode matrix elements in the unit-mass oscillator eigenbasis,
//! `q = sqrt(hbar / 2 omega) (a + a^dagger)`.

use faer::Mat;

use super::{BasisSpec, QuantumError};

/// `ln n!` for `n = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `<m| exp(alpha q) |n>` for `m, n <= n_max`.
///
/// With `beta = alpha sqrt(hbar / 2 omega)` and `m >= n`:
/// `exp(beta^2/2) sqrt(n!/m!) beta^(m-n) L_n^(m-n)(-beta^2)`.
/// The Laguerre argument is negative so the three-term recurrence has no
/// cancellation; prefactors are combined in log space.
pub fn ho_exp_matrix(alpha: f64, basis: &BasisSpec) -> Result<Mat<f64>, QuantumError> {
    let dim = basis.mode_dim();
    if alpha == 0.0 {
        return Ok(Mat::identity(dim, dim));
    }
    let beta = alpha * (basis.hbar() / (2.0 * basis.omega())).sqrt();
    let b2 = beta * beta;
    let ln_beta = beta.abs().ln();
    let lnf = ln_factorials(dim);
    let mut out = Mat::zeros(dim, dim);

    let mut laguerre = vec![0.0; dim];
    for k in 0..dim {
        // L_j^(k)(-b2) for j = 0..dim-k
        let len = dim - k;
        let kf = k as f64;
        laguerre[0] = 1.0;
        if len > 1 {
            laguerre[1] = 1.0 + kf + b2;
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            laguerre[j + 1] = ((2.0 * jf + 1.0 + kf + b2) * laguerre[j] - (jf + kf) * laguerre[j - 1]) / (jf + 1.0);
        }
        let sign = if beta < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        for n in 0..len {
            let m = n + k;
            let lag = laguerre[n];
            if !lag.is_finite() {
                return Err(QuantumError::Overflow(format!(
                    "Laguerre polynomial L_{n}^({k}) overflowed at beta = {beta}"
                )));
            }
            let ln_mag = 0.5 * b2 + 0.5 * (lnf[n] - lnf[m]) + kf * ln_beta + lag.ln();
            if ln_mag > 700.0 {
                return Err(QuantumError::Overflow(format!(
                    "<{m}|exp({alpha} q)|{n}> exceeds f64 range (beta = {beta})"
                )));
            }
            let v = sign * ln_mag.exp();
            out[(m, n)] = v;
            out[(n, m)] = v;
        }
    }
    Ok(out)
}

/// `<m| p^2 |n>`: diagonal `hbar omega (n + 1/2)`, second off-diagonal
/// `-(hbar omega / 2) sqrt((n+1)(n+2))`.
pub fn ho_p2_matrix(basis: &BasisSpec) -> Mat<f64> {
    let scale = basis.hbar() * basis.omega();
    second_moment(basis.mode_dim(), scale, -0.5 * scale)
}

/// `<m| q^2 |n>`: diagonal `(hbar / 2 omega)(2n + 1)`, second off-diagonal
/// `(hbar / 2 omega) sqrt((n+1)(n+2))`.
pub fn ho_q2_matrix(basis: &BasisSpec) -> Mat<f64> {
    let scale = basis.hbar() / (2.0 * basis.omega());
    second_moment(basis.mode_dim(), 2.0 * scale, scale)
}

fn second_moment(dim: usize, diag_scale: f64, off_scale: f64) -> Mat<f64> {
    let mut out = Mat::zeros(dim, dim);
    for n in 0..dim {
        out[(n, n)] = diag_scale * (n as f64 + 0.5);
        if n + 2 < dim {
            let v = off_scale * ((n as f64 + 1.0) * (n as f64 + 2.0)).sqrt();
            out[(n + 2, n)] = v;
            out[(n, n + 2)] = v;
        }
    }
    out
}
