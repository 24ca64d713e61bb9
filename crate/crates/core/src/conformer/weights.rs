use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MAX_ATOMIC_NUMBER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Hidden width `d`.
    pub d: usize,
    /// Interaction blocks in the 3D encoder.
    pub layers: usize,
    /// Attention layers in the 2D encoder.
    pub gat_layers: usize,
    /// Width of the 2D node descriptors.
    pub d0: usize,
    /// Width of 2D edge features; 0 when edges carry none.
    pub edge_dim: usize,
    /// Largest RBF center (Å); centers run from 0 in steps of `rbf_spacing`.
    pub rbf_max: f64,
    pub rbf_spacing: f64,
    pub gamma: f64,
    /// Default message-passing cutoff (Å).
    pub cutoff: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d: 16,
            layers: 3,
            gat_layers: 3,
            d0: 8,
            edge_dim: 0,
            rbf_max: 10.0,
            rbf_spacing: 0.1,
            gamma: 10.0,
            cutoff: 10.0,
        }
    }
}

impl EncoderConfig {
    pub fn n_rbf(&self) -> usize {
        (self.rbf_max / self.rbf_spacing).round() as usize + 1
    }
}

/// Affine map `x ↦ W x + b`, `W` stored as `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn random(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let s = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-s..=s));
        let b = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-s..=s));
        Self { w, b }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            w: Array2::eye(d),
            b: Array1::zeros(d),
        }
    }

    pub fn apply(&self, x: ndarray::ArrayView1<'_, f64>) -> Array1<f64> {
        self.w.dot(&x) + &self.b
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionBlock {
    /// Filter network `φ₁,₂`: RBF → d → d.
    pub filter1: Linear,
    pub filter2: Linear,
    /// Neighbor transform `φ₁`.
    pub message: Linear,
    /// Update network `φ₃,₄`.
    pub update1: Linear,
    pub update2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub w: Array2<f64>,
    /// Attention vector over `[W h_v ‖ W h_u ‖ e_vu]`.
    pub att: Array1<f64>,
}

/// Frozen weights for every learned map of the forward function, drawn
/// from a seeded generator (uniform on `±1/√fan_in`).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub seed: u64,
    pub config: EncoderConfig,
    /// Row `Z` is the embedding of atomic number `Z`; row 0 is unused.
    pub embedding: Array2<f64>,
    pub blocks: Vec<InteractionBlock>,
    pub gat_input: Linear,
    pub gat_layers: Vec<GatLayer>,
    pub readout_3d: Linear,
    pub readout_bc: Linear,
    pub w2d: Array2<f64>,
    pub w3d: Array2<f64>,
    pub wbc: Array2<f64>,
    pub w_g: Array1<f64>,
    pub b_g: f64,
}

impl EncoderWeights {
    pub fn from_seed(seed: u64, config: &EncoderConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d;
        let embedding = Array2::from_shape_simple_fn((MAX_ATOMIC_NUMBER as usize + 1, d), || {
            rng.random_range(-1.0..=1.0)
        });
        let blocks = (0..config.layers)
            .map(|_| InteractionBlock {
                filter1: Linear::random(&mut rng, config.n_rbf(), d),
                filter2: Linear::random(&mut rng, d, d),
                message: Linear::random(&mut rng, d, d),
                update1: Linear::random(&mut rng, d, d),
                update2: Linear::random(&mut rng, d, d),
            })
            .collect();
        let gat_input = Linear::random(&mut rng, config.d0, d);
        let att_len = 2 * d + config.edge_dim;
        let gat_layers = (0..config.gat_layers)
            .map(|_| GatLayer {
                w: Linear::random(&mut rng, d, d).w,
                att: Array1::from_shape_simple_fn(att_len, || {
                    rng.random_range(-1.0..=1.0) / (att_len as f64).sqrt()
                }),
            })
            .collect();
        let readout_3d = Linear::random(&mut rng, d, d);
        let readout_bc = Linear::random(&mut rng, d, d);
        let w2d = Linear::random(&mut rng, d, d).w;
        let w3d = Linear::random(&mut rng, d, d).w;
        let wbc = Linear::random(&mut rng, d, d).w;
        let head = Linear::random(&mut rng, d, 1);
        Self {
            seed,
            config: config.clone(),
            embedding,
            blocks,
            gat_input,
            gat_layers,
            readout_3d,
            readout_bc,
            w2d,
            w3d,
            wbc,
            w_g: head.w.row(0).to_owned(),
            b_g: head.b[0],
        }
    }

    pub fn d(&self) -> usize {
        self.config.d
    }
}
