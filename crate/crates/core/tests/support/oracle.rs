//! Independent reference values for oscillator matrix elements.
//!
//! `<m| exp(alpha q) |n>` is evaluated as a Gauss-Hermite sum over
//! normalized Hermite polynomials, shifted so the exponential folds into the
//! weight. Nodes come from Newton iteration on the Hermite recurrence; no
//! closed-form Laguerre expression and no linear algebra is involved.

/// Gauss-Hermite nodes and weights for `int f(x) exp(-x^2) dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `h_0 .. h_nmax` at `x`, orthonormal under `exp(-x^2) / sqrt(pi)`.
pub fn normalized_hermite(nmax: usize, x: f64) -> Vec<f64> {
    let mut h = vec![0.0; nmax + 1];
    h[0] = 1.0;
    if nmax >= 1 {
        h[1] = std::f64::consts::SQRT_2 * x;
    }
    for n in 1..nmax {
        let nf = n as f64;
        h[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
    }
    h
}

/// `<m| exp(alpha q) |n>` for the unit-mass oscillator with
/// `q = sqrt(hbar / omega) xi`, for all `m, n <= nmax`, row-major.
pub fn exp_matrix_by_quadrature(alpha: f64, hbar: f64, omega: f64, nmax: usize) -> Vec<Vec<f64>> {
    let c = alpha * (hbar / omega).sqrt();
    let (nodes, weights) = gauss_hermite(2 * nmax + 20);
    let scale = (0.25 * c * c).exp() / std::f64::consts::PI.sqrt();
    let mut out = vec![vec![0.0; nmax + 1]; nmax + 1];
    for (u, w) in nodes.iter().zip(&weights) {
        let h = normalized_hermite(nmax, u + 0.5 * c);
        for m in 0..=nmax {
            for n in 0..=nmax {
                out[m][n] += w * h[m] * h[n];
            }
        }
    }
    for row in &mut out {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    out
}
