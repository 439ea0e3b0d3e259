//! Reproducible measurement noise.
//!
//! Draws come from ChaCha8 seeded with the 64-bit seed; `stream` selects an
//! independent ChaCha stream so traces for different droplet positions get
//! uncorrelated noise from one seed. Each `η` is uniform on the open interval
//! `(−1, 1)`, mapped as `2u − 1` from `u ∈ (0, 1)`.

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{MeasurementTrace, NoiseConvention, NoiseInfo};
use crate::error::{Error, Result};

/// `η₀, η₁, …` for `(seed, stream)`.
pub fn uniform_draws(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Open01
        .sample_iter(&mut rng)
        .take(len)
        .map(|u: f64| 2.0 * u - 1.0)
        .collect()
}

/// `U(1 + δ̄η)` for the relative convention, `U + δη` for the absolute one.
pub fn add_noise(
    trace: &MeasurementTrace,
    convention: NoiseConvention,
    level: f64,
    seed: u64,
    stream: u64,
) -> Result<MeasurementTrace> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be >= 0, got {level}")));
    }
    let mut out = trace.clone();
    if level > 0.0 {
        let eta = uniform_draws(seed, stream, trace.samples.len());
        for (u, e) in out.samples.iter_mut().zip(eta) {
            *u = match convention {
                NoiseConvention::Relative => *u * (1.0 + level * e),
                NoiseConvention::Absolute => *u + level * e,
            };
        }
    }
    out.noise = Some(NoiseInfo {
        convention,
        level,
        seed,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> MeasurementTrace {
        let samples = (0..65).map(|k| (k as f64 * 0.3).sin() - 0.2).collect();
        MeasurementTrace::new([1.2, 0.0, 0.0], 3.1, 1.0, samples).unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let t = trace();
        let n = add_noise(&t, NoiseConvention::Relative, 0.0, 7, 0).unwrap();
        assert_eq!(n.samples, t.samples);
        assert_eq!(n.noise.unwrap().level, 0.0);
    }

    #[test]
    fn relative_noise_is_bounded_and_deterministic() {
        let t = trace();
        let a = add_noise(&t, NoiseConvention::Relative, 0.05, 11, 3).unwrap();
        let b = add_noise(&t, NoiseConvention::Relative, 0.05, 11, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        for (n, u) in a.samples.iter().zip(&t.samples) {
            assert!((n - u).abs() <= 0.05 * u.abs());
        }
        let other = add_noise(&t, NoiseConvention::Relative, 0.05, 11, 4).unwrap();
        assert_ne!(a.samples, other.samples);
        assert!(add_noise(&t, NoiseConvention::Absolute, -1.0, 0, 0).is_err());
    }

    #[test]
    fn draws_are_centred_in_the_open_interval() {
        let eta = uniform_draws(1, 0, 20_000);
        assert!(eta.iter().all(|e| e.abs() < 1.0));
        let mean = eta.iter().sum::<f64>() / eta.len() as f64;
        assert!(mean.abs() < 0.02);
    }
}
