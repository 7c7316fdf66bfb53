//! RK4 inner loop over batches of phase-space points.
//!
//! The libm `exp` is opaque to the vectorizer, so the flow uses [`exp`]
//! below: a branch-free range reduction plus a degree-13 polynomial that
//! LLVM turns into packed instructions. Scalar and batched code share it,
//! and no operation is fused or reordered between the two, so a point
//! integrated alone or inside a batch takes bitwise-identical steps.

use super::PhaseState;

/// Points advanced together by one call of the batched kernel.
pub(crate) const LANES: usize = 16;

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits
const SHIFT: f64 = 6_755_399_441_055_744.0;
const OVERFLOW: f64 = 709.782_712_893_384;
const UNDERFLOW: f64 = -708.0;

/// `e^x` to within two ulp. Results below `e^-708` flush to zero; above the
/// double range they are `+inf`; NaN propagates.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    let xc = x.max(UNDERFLOW).min(709.0);
    let t = xc * LOG2E + SHIFT;
    let n = t - SHIFT;
    let r = (xc - n * LN2_HI) - n * LN2_LO;
    // Taylor series of e^r for |r| <= ln2 / 2, Horner form
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let k = t.to_bits().wrapping_sub(SHIFT.to_bits());
    let scale = f64::from_bits(k.wrapping_add(1023) << 52);
    let y = p * scale;
    let y = if x > OVERFLOW { f64::INFINITY } else { y };
    let y = if x < UNDERFLOW { 0.0 } else { y };
    if x.is_nan() {
        x
    } else {
        y
    }
}

// exp(q1 - q2) is formed as 1 / (exp(-q1) exp(q2)) so each evaluation costs
// two exponentials; overflow shows up as a non-finite component.
#[inline(always)]
pub(crate) fn flow(s: &[f64; 4], inv_m1: f64, inv_m2: f64) -> [f64; 4] {
    let left = exp(-s[0]);
    let right = exp(s[1]);
    let middle = 1.0 / (left * right);
    [s[2] * inv_m1, s[3] * inv_m2, left - middle, middle - right]
}

#[inline(always)]
fn axpy(s: &[f64; 4], h: f64, k: &[f64; 4]) -> [f64; 4] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]]
}

#[inline(always)]
pub(crate) fn rk4(s: &[f64; 4], dt: f64, inv_m1: f64, inv_m2: f64) -> [f64; 4] {
    let half = 0.5 * dt;
    let k1 = flow(s, inv_m1, inv_m2);
    let k2 = flow(&axpy(s, half, &k1), inv_m1, inv_m2);
    let k3 = flow(&axpy(s, half, &k2), inv_m1, inv_m2);
    let k4 = flow(&axpy(s, dt, &k3), inv_m1, inv_m2);
    let sixth = dt / 6.0;
    let mut out = *s;
    for i in 0..4 {
        out[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// Coordinates of `LANES` points, coordinate-major.
type Batch = [[f64; LANES]; 4];

#[inline(always)]
fn flow_batch(s: &Batch, inv_m1: f64, inv_m2: f64) -> Batch {
    let mut out = [[0.0; LANES]; 4];
    for l in 0..LANES {
        let left = exp(-s[0][l]);
        let right = exp(s[1][l]);
        let middle = 1.0 / (left * right);
        out[0][l] = s[2][l] * inv_m1;
        out[1][l] = s[3][l] * inv_m2;
        out[2][l] = left - middle;
        out[3][l] = middle - right;
    }
    out
}

#[inline(always)]
fn axpy_batch(s: &Batch, h: f64, k: &Batch) -> Batch {
    let mut out = *s;
    for i in 0..4 {
        for l in 0..LANES {
            out[i][l] = s[i][l] + h * k[i][l];
        }
    }
    out
}

#[inline(always)]
fn advance_batch_body(s: &mut Batch, steps: usize, dt: f64, inv_m1: f64, inv_m2: f64) {
    let half = 0.5 * dt;
    let sixth = dt / 6.0;
    for _ in 0..steps {
        let k1 = flow_batch(s, inv_m1, inv_m2);
        let k2 = flow_batch(&axpy_batch(s, half, &k1), inv_m1, inv_m2);
        let k3 = flow_batch(&axpy_batch(s, half, &k2), inv_m1, inv_m2);
        let k4 = flow_batch(&axpy_batch(s, dt, &k3), inv_m1, inv_m2);
        for i in 0..4 {
            for l in 0..LANES {
                s[i][l] += sixth * (k1[i][l] + 2.0 * (k2[i][l] + k3[i][l]) + k4[i][l]);
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn advance_batch_avx512(s: &mut Batch, steps: usize, dt: f64, inv_m1: f64, inv_m2: f64) {
    advance_batch_body(s, steps, dt, inv_m1, inv_m2)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn advance_batch_avx2(s: &mut Batch, steps: usize, dt: f64, inv_m1: f64, inv_m2: f64) {
    advance_batch_body(s, steps, dt, inv_m1, inv_m2)
}

fn advance_batch(s: &mut Batch, steps: usize, dt: f64, inv_m1: f64, inv_m2: f64) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { advance_batch_avx512(s, steps, dt, inv_m1, inv_m2) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: as above.
            return unsafe { advance_batch_avx2(s, steps, dt, inv_m1, inv_m2) };
        }
    }
    advance_batch_body(s, steps, dt, inv_m1, inv_m2)
}

/// Advances up to `LANES` points by `steps` RK4 steps. A short final batch
/// is padded with copies of its first point.
pub(crate) fn advance_chunk(points: &mut [PhaseState], steps: usize, dt: f64, inv_m1: f64, inv_m2: f64) {
    debug_assert!(!points.is_empty() && points.len() <= LANES);
    let mut batch: Batch = [[0.0; LANES]; 4];
    for l in 0..LANES {
        let x = points.get(l).unwrap_or(&points[0]).to_array();
        for i in 0..4 {
            batch[i][l] = x[i];
        }
    }
    advance_batch(&mut batch, steps, dt, inv_m1, inv_m2);
    for (l, p) in points.iter_mut().enumerate() {
        *p = PhaseState::new(batch[0][l], batch[1][l], batch[2][l], batch[3][l]);
    }
}
