use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Conformer;
use crate::error::{Error, Result};

/// `x ↦ Q x + t` with `Q` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Uniform rotation (Shoemake's quaternion method) and a translation
    /// uniform on `[−5, 5]³`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let tau = std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (w, x, y, z) = (
            a * (tau * u2).sin(),
            a * (tau * u2).cos(),
            b * (tau * u3).sin(),
            b * (tau * u3).cos(),
        );
        let rotation = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        let translation = [
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ];
        Self { rotation, translation }
    }

    /// A random rotation composed with the reflection `x ↦ −x`.
    pub fn random_improper<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut m = Self::random(rng);
        for row in m.rotation.iter_mut() {
            row[0] = -row[0];
        }
        m
    }

    pub fn apply(&self, r: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(r.dim());
        for (i, p) in r.rows().into_iter().enumerate() {
            for k in 0..3 {
                out[[i, k]] = self.rotation[k][0] * p[0]
                    + self.rotation[k][1] * p[1]
                    + self.rotation[k][2] * p[2]
                    + self.translation[k];
            }
        }
        out
    }
}

pub fn apply_rigid_motion(conf: &Conformer, motion: &RigidMotion) -> Conformer {
    conf.with_coordinates(motion.apply(conf.coordinates()))
        .expect("rigid motion preserves finiteness and shape")
}

/// Gaussian jitter of every coordinate (std `sigma`), then a seeded random
/// rigid motion. Atoms are unchanged.
pub fn perturb_conformer(conf: &Conformer, sigma: f64, seed: u64) -> Result<Conformer> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be finite and ≥ 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let jittered = conf.coordinates().mapv(|x| x + noise.sample(&mut rng));
    let motion = RigidMotion::random(&mut rng);
    conf.with_coordinates(motion.apply(&jittered))
}
