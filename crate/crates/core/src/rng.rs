//! Counter-keyed random streams.
//!
//! Every draw is addressed by `(seed, purpose, particle, step)`: each address
//! seeds its own ChaCha8 generator, and the draw index is the position inside
//! that stream. Realized Brownian increments therefore do not depend on how
//! particles are scheduled across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for; keeps initialization and noise draws disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Noise = 0,
    Init = 1,
    Sampling = 2,
    Anchors = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    seed: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, purpose: Purpose, particle: u64, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&particle.to_le_bytes());
        key[24..].copy_from_slice(&step.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// Fills `out` with i.i.d. standard normals for `(particle, step)`.
    pub fn gaussian(&self, particle: u64, step: u64, out: &mut [f64]) {
        let mut rng = self.stream(Purpose::Noise, particle, step);
        for x in out {
            *x = rng.sample(StandardNormal);
        }
    }
}

/// Uniform point in the ball of `radius` around `center`.
pub(crate) fn uniform_in_ball<R: Rng>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = crate::norm(&dir).max(f64::MIN_POSITIVE);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    for (x, c) in dir.iter_mut().zip(center) {
        *x = c + r * *x / n;
    }
    dir
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_addressed() {
        let key = StreamKey::new(42);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        key.gaussian(5, 7, &mut a);
        key.gaussian(5, 7, &mut b);
        assert_eq!(a, b);
        key.gaussian(5, 8, &mut b);
        assert_ne!(a, b);
        key.gaussian(6, 7, &mut b);
        assert_ne!(a, b);
        StreamKey::new(43).gaussian(5, 7, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn purposes_are_disjoint() {
        let key = StreamKey::new(1);
        let x: u64 = key.stream(Purpose::Noise, 0, 0).random();
        let y: u64 = key.stream(Purpose::Init, 0, 0).random();
        assert_ne!(x, y);
    }

    #[test]
    fn ball_samples_inside() {
        let mut rng = StreamKey::new(3).stream(Purpose::Sampling, 0, 0);
        for _ in 0..1000 {
            let p = uniform_in_ball(&mut rng, &[1.0, -1.0, 2.0], 0.5);
            assert!(crate::dist(&p, &[1.0, -1.0, 2.0]) <= 0.5 + 1e-12);
        }
    }
}
