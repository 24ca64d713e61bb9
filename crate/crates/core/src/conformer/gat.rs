//! Graph attention over the covalent-bond graph.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::weights::EncoderWeights;
use super::Molecule2D;
use crate::error::{Error, Result};

const LEAKY_SLOPE: f64 = 0.2;

fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Neighbor lists with the row of the edge-feature matrix for each pair.
fn adjacency(mol: &Molecule2D) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); mol.n()];
    for (k, &(i, j)) in mol.edges().iter().enumerate() {
        adj[i].push((j, k));
        adj[j].push((i, k));
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    adj
}

/// Softmax-normalized attention of each node over its neighbors.
fn attention(
    wh: &Array2<f64>,
    adj: &[Vec<(usize, usize)>],
    edge_feats: Option<&Array2<f64>>,
    att: ArrayView1<'_, f64>,
) -> Vec<Vec<(usize, f64)>> {
    let d = wh.ncols();
    let a_self = att.slice(ndarray::s![..d]);
    let a_nbr = att.slice(ndarray::s![d..2 * d]);
    let a_edge = att.slice(ndarray::s![2 * d..]);
    adj.iter()
        .enumerate()
        .map(|(v, nbrs)| {
            let left = a_self.dot(&wh.row(v));
            let scores: Vec<f64> = nbrs
                .iter()
                .map(|&(u, k)| {
                    let edge = match edge_feats {
                        Some(ef) if !a_edge.is_empty() => a_edge.dot(&ef.row(k)),
                        _ => 0.0,
                    };
                    leaky_relu(left + a_nbr.dot(&wh.row(u)) + edge)
                })
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            nbrs.iter().zip(exps).map(|(&(u, _), e)| (u, e / total)).collect()
        })
        .collect()
}

/// Pooled 2D embedding `Σ_v h_v^{(L)}`.
///
/// Each layer adds `ELU(Σ_u α_vu W h_u)` to `h_v`; a node without
/// neighbors receives a zero message.
pub fn gat_forward(mol: &Molecule2D, enc: &EncoderWeights) -> Result<Array1<f64>> {
    let x = mol.node_features();
    if x.ncols() != enc.gat_input.in_dim() {
        return Err(Error::Shape(format!(
            "node features have width {}, encoder expects {}",
            x.ncols(),
            enc.gat_input.in_dim()
        )));
    }
    let edge_feats = mol.edge_features();
    if let Some(ef) = edge_feats {
        if ef.ncols() != enc.config.edge_dim {
            return Err(Error::Shape(format!(
                "edge features have width {}, encoder expects {}",
                ef.ncols(),
                enc.config.edge_dim
            )));
        }
    }
    let adj = adjacency(mol);
    let mut h = Array2::zeros((mol.n(), enc.d()));
    for (v, row) in x.rows().into_iter().enumerate() {
        h.row_mut(v).assign(&enc.gat_input.apply(row));
    }
    for layer in &enc.gat_layers {
        let wh = h.dot(&layer.w.t());
        let alpha = attention(&wh, &adj, edge_feats, layer.att.view());
        let mut next = h.clone();
        for (v, coeffs) in alpha.iter().enumerate() {
            let mut msg = Array1::<f64>::zeros(enc.d());
            for &(u, a) in coeffs {
                msg.scaled_add(a, &wh.row(u));
            }
            next.row_mut(v).scaled_add(1.0, &msg.mapv(elu));
        }
        h = next;
    }
    Ok(h.sum_axis(Axis(0)))
}
