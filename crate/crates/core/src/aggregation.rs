//! End-to-end forward pass: 2D embedding, per-conformer 3D embeddings, a
//! barycenter embedding, their combination and the linear prediction head.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::barycenter::{barycenter, BarycenterOptions, BarycenterResult};
use crate::conformer::{
    conformer_to_graph, gat_forward, schnet_readout, Conformer, EncoderWeights, Molecule2D,
};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, FgwParams};

#[derive(Debug, Clone)]
pub struct ConanForwardResult {
    pub y_hat: f64,
    pub h2d: Array1<f64>,
    /// `d × K`, column `k` from conformer `k`.
    pub h3d_per_conf: Array2<f64>,
    pub h_bc: Array1<f64>,
    pub barycenter: BarycenterResult,
}

/// `Σ_v (Ā h̄_v + ā)` over the barycenter's node features.
pub fn barycenter_readout(bary: &AttributedGraph, enc: &EncoderWeights) -> Result<Array1<f64>> {
    crate::conformer::schnet::sum_readout(bary.features(), &enc.readout_bc)
}

/// Column `k` is `W2D h2d + W3D h3d_k + WBC h_bc`.
pub fn combine(
    h2d: ArrayView1<'_, f64>,
    h3d: ArrayView2<'_, f64>,
    h_bc: ArrayView1<'_, f64>,
    enc: &EncoderWeights,
) -> Result<Array2<f64>> {
    let d = enc.d();
    if h3d.ncols() == 0 {
        return Err(Error::Empty("no conformer embeddings"));
    }
    if h2d.len() != d || h_bc.len() != d || h3d.nrows() != d {
        return Err(Error::Shape(format!(
            "embedding widths ({}, {}, {}) do not match d = {d}",
            h2d.len(),
            h3d.nrows(),
            h_bc.len()
        )));
    }
    let shared = enc.w2d.dot(&h2d) + enc.wbc.dot(&h_bc);
    let mut out = enc.w3d.dot(&h3d);
    for mut col in out.axis_iter_mut(Axis(1)) {
        col += &shared;
    }
    Ok(out)
}

/// `W_G · mean_k(Hcomb[:, k]) + b_G`.
pub fn predict(hcomb: ArrayView2<'_, f64>, enc: &EncoderWeights) -> Result<f64> {
    if hcomb.ncols() == 0 {
        return Err(Error::Empty("no columns to aggregate"));
    }
    if hcomb.nrows() != enc.w_g.len() {
        return Err(Error::Shape(format!(
            "combined width {} does not match head width {}",
            hcomb.nrows(),
            enc.w_g.len()
        )));
    }
    let mean = hcomb.sum_axis(Axis(1)) / hcomb.ncols() as f64;
    Ok(enc.w_g.dot(&mean) + enc.b_g)
}

/// 3D graph and pooled embedding of one conformer.
pub fn encode_conformer(conf: &Conformer, enc: &EncoderWeights) -> Result<(AttributedGraph, Array1<f64>)> {
    let g = conformer_to_graph(conf, enc, enc.config.cutoff)?;
    let h = schnet_readout(g.features(), enc)?;
    Ok((g, h))
}

pub fn conan_forward(
    mol2d: &Molecule2D,
    conformers: &[Conformer],
    enc: &EncoderWeights,
    params: &FgwParams,
) -> Result<ConanForwardResult> {
    let k = conformers.len();
    if k == 0 {
        return Err(Error::Empty("at least one conformer is required"));
    }
    let z0 = conformers[0].atomic_numbers();
    if let Some(bad) = conformers.iter().position(|c| c.atomic_numbers() != z0) {
        return Err(Error::InvalidParams(format!(
            "conformer {bad} lists different atoms than conformer 0"
        )));
    }
    let h2d = gat_forward(mol2d, enc)?;
    let encoded: Vec<(AttributedGraph, Array1<f64>)> = conformers
        .par_iter()
        .map(|c| encode_conformer(c, enc))
        .collect::<Result<_>>()?;
    let mut h3d = Array2::zeros((enc.d(), k));
    for (col, (_, h)) in encoded.iter().enumerate() {
        h3d.column_mut(col).assign(h);
    }
    let graphs: Vec<AttributedGraph> = encoded.into_iter().map(|(g, _)| g).collect();
    let bary = barycenter(&graphs, &BarycenterOptions::default(), params)?;
    let h_bc = barycenter_readout(&bary.graph, enc)?;
    let hcomb = combine(h2d.view(), h3d.view(), h_bc.view(), enc)?;
    let y_hat = predict(hcomb.view(), enc)?;
    if !y_hat.is_finite() {
        return Err(Error::NonFinite("prediction"));
    }
    Ok(ConanForwardResult {
        y_hat,
        h2d,
        h3d_per_conf: h3d,
        h_bc,
        barycenter: bary,
    })
}
