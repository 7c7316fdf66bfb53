use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ensemble, EnsembleError};
use crate::dynamics::PhaseState;

/// Bumped whenever the mapping from `(seed, index)` to a point changes, so
/// stored artifacts can tell which sampler produced them.
pub const SAMPLER_VERSION: u32 = 1;

/// Uniform on `(0, 1]` from the top 53 bits of one draw.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals (Box-Muller).
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = (-2.0 * open_unit(rng).ln()).sqrt();
    let theta = std::f64::consts::TAU * open_unit(rng);
    (r * theta.cos(), r * theta.sin())
}

/// Draws point `index` of the ensemble. Each point owns its own ChaCha
/// stream, so a point depends only on `(seed, index)` and not on `m` or on
/// the order in which points are generated.
fn draw(center: &PhaseState, sigma: [f64; 4], seed: u64, index: usize) -> PhaseState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let (a, b) = normal_pair(&mut rng);
    let (c, d) = normal_pair(&mut rng);
    PhaseState::new(
        center.q1 + sigma[0] * a,
        center.q2 + sigma[1] * b,
        center.p1 + sigma[2] * c,
        center.p2 + sigma[3] * d,
    )
}

/// `m` points drawn independently from a Gaussian with mean `center` and
/// variance `width / 2` in every coordinate.
pub fn sample_initial_ensemble(
    center: &PhaseState,
    width: f64,
    m: usize,
    seed: u64,
) -> Result<Ensemble, EnsembleError> {
    sample_packet_ensemble(center, width, [1.0, 1.0], m, seed)
}

/// Like [`sample_initial_ensemble`], with particle `i`'s `q` variance
/// divided by `scales[i]` and its `p` variance multiplied by it.
pub fn sample_packet_ensemble(
    center: &PhaseState,
    width: f64,
    scales: [f64; 2],
    m: usize,
    seed: u64,
) -> Result<Ensemble, EnsembleError> {
    if !scales.iter().all(|s| s.is_finite() && *s > 0.0) {
        return Err(EnsembleError::InvalidRequest(format!("packet scales must be positive, got {scales:?}")));
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(EnsembleError::InvalidRequest(format!("width must be positive, got {width}")));
    }
    if m == 0 {
        return Err(EnsembleError::InvalidRequest("ensemble size must be positive".into()));
    }
    if !center.is_finite() {
        return Err(EnsembleError::InvalidRequest("center is not finite".into()));
    }
    let var = 0.5 * width;
    let sigma = [
        (var / scales[0]).sqrt(),
        (var / scales[1]).sqrt(),
        (var * scales[0]).sqrt(),
        (var * scales[1]).sqrt(),
    ];
    let points = (0..m).map(|i| draw(center, sigma, seed, i)).collect();
    Ok(Ensemble::from_points(points, *center, width, seed))
}
