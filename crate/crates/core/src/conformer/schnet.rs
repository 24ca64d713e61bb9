//! Continuous-filter convolutions over interatomic distances.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::weights::{EncoderConfig, EncoderWeights};
use super::{distance_matrix, Conformer};
use crate::error::{Error, Result};

/// Shifted softplus `ln(0.5 eˣ + 0.5)`.
pub fn ssp(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn rbf_centers(config: &EncoderConfig) -> Vec<f64> {
    (0..config.n_rbf()).map(|k| k as f64 * config.rbf_spacing).collect()
}

/// Gaussian expansion `exp(−γ (dist − c_k)²)`.
pub fn rbf_expand(dist: f64, centers: &[f64], gamma: f64) -> Array1<f64> {
    centers.iter().map(|c| (-gamma * (dist - c).powi(2)).exp()).collect()
}

fn ssp_vec(mut x: Array1<f64>) -> Array1<f64> {
    x.mapv_inplace(ssp);
    x
}

/// Atom-wise features after the interaction blocks; one row per atom.
pub fn schnet_lite_forward(conf: &Conformer, enc: &EncoderWeights, cutoff: f64) -> Result<Array2<f64>> {
    if !(cutoff >= 0.0) {
        return Err(Error::InvalidParams(format!("cutoff = {cutoff} must be ≥ 0")));
    }
    let n = conf.n();
    let dist = distance_matrix(conf.coordinates());
    let centers = rbf_centers(&enc.config);

    let mut h = Array2::zeros((n, enc.d()));
    for (v, &z) in conf.atomic_numbers().iter().enumerate() {
        h.row_mut(v).assign(&enc.embedding.row(z as usize));
    }

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|v| (0..n).filter(|&u| u != v && dist[[v, u]] <= cutoff).collect())
        .collect();

    for block in &enc.blocks {
        let transformed: Vec<Array1<f64>> = h.rows().into_iter().map(|row| block.message.apply(row)).collect();
        let mut next = h.clone();
        for v in 0..n {
            let mut agg = Array1::zeros(enc.d());
            for &u in &neighbors[v] {
                let rbf = rbf_expand(dist[[v, u]], &centers, enc.config.gamma);
                let e = block.filter2.apply(ssp_vec(block.filter1.apply(rbf.view())).view());
                agg += &(&transformed[u] * &e);
            }
            let upd = block.update2.apply(ssp_vec(block.update1.apply(agg.view())).view());
            next.row_mut(v).scaled_add(1.0, &upd);
        }
        h = next;
    }
    Ok(h)
}

/// `Σ_v (A h_v + a)` with the 3D readout map.
pub fn schnet_readout(h: ArrayView2<'_, f64>, enc: &EncoderWeights) -> Result<Array1<f64>> {
    sum_readout(h, &enc.readout_3d)
}

pub(crate) fn sum_readout(h: ArrayView2<'_, f64>, lin: &super::Linear) -> Result<Array1<f64>> {
    if h.ncols() != lin.in_dim() {
        return Err(Error::Shape(format!(
            "feature width {} does not match readout input {}",
            h.ncols(),
            lin.in_dim()
        )));
    }
    let summed = h.sum_axis(Axis(0));
    Ok(lin.w.dot(&summed) + &lin.b * h.nrows() as f64)
}
